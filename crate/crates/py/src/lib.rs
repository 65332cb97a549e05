//! Python bindings: bases and projection, the perceptron, data
//! generation and the experiment runners.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fmlp_core::basis::{BasisSystem, QuadratureRule};
use fmlp_core::datagen::{
    estimate_oracle_risk, estimate_risk, make_dataset, DistributionSpec, FunctionalDistribution,
    GridKind, ProjectionMode,
};
use fmlp_core::harness::{
    run_approx_sweep, run_consistency_sweep, run_schedule_check, KIND_APPROX, KIND_CONSISTENCY,
    KIND_SCHEDULE,
};
use fmlp_core::ingest::{self, ResultRow};
use fmlp_core::mlp::{self, CoordDataset, FmlpModel, TrainConfig};
use fmlp_core::projection::{
    project_exact, project_sampled, reconstruct, residual_norm, CoordinateVector,
    EvaluableFunction, SampledFunction,
};

fn err(e: fmlp_core::Error) -> PyErr {
    // Validation problems map to ValueError, runtime failures to RuntimeError,
    // mirroring the command line exit codes.
    match e.exit_code() {
        2 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Orthonormal basis over [0, 1] with its reference quadrature rule.
#[pyclass(frozen)]
struct Basis {
    system: BasisSystem,
    rule: QuadratureRule,
}

#[pymethods]
impl Basis {
    /// Fourier basis of dimension p.
    #[staticmethod]
    fn fourier(p: usize) -> PyResult<Self> {
        Ok(Basis {
            system: BasisSystem::fourier(p).map_err(err)?,
            rule: QuadratureRule::reference(),
        })
    }

    /// Orthonormalized B-spline basis from a degree and interior knots.
    #[staticmethod]
    fn bspline(degree: usize, interior_knots: Vec<f64>) -> PyResult<Self> {
        Ok(Basis {
            system: BasisSystem::bspline(degree, &interior_knots).map_err(err)?,
            rule: QuadratureRule::reference(),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.system.dim()
    }

    #[getter]
    fn id(&self) -> String {
        self.system.id().to_string()
    }

    /// Value of basis function k at x.
    fn eval(&self, k: usize, x: f64) -> PyResult<f64> {
        self.system.eval(k, x).map_err(err)
    }

    /// Coordinates of a curve observed at sample points, by least squares.
    #[pyo3(signature = (xs, values, ridge = 0.0))]
    fn project_samples(&self, xs: Vec<f64>, values: Vec<f64>, ridge: f64) -> PyResult<Vec<f64>> {
        let f = SampledFunction::new("curve", xs, values).map_err(err)?;
        Ok(project_sampled(&f, &self.system, ridge).map_err(err)?.coords)
    }

    /// Coordinates of the Fourier expansion with the given coefficients,
    /// projected onto this basis by quadrature (exact projection).
    fn project_coefficients(&self, coefficients: Vec<f64>) -> PyResult<Vec<f64>> {
        let family = BasisSystem::fourier(coefficients.len().max(1)).map_err(err)?;
        let g = EvaluableFunction::from_expansion(&family, &coefficients).map_err(err)?;
        Ok(project_exact(&g, &self.system, &self.rule).map_err(err)?.coords)
    }

    /// Value at x of the curve with the given coordinates.
    fn reconstruct(&self, coords: Vec<f64>, x: f64) -> PyResult<f64> {
        let c = CoordinateVector::new(coords, self.system.id());
        reconstruct(&c, &self.system, x).map_err(err)
    }

    /// L2 distance between the expansion with the given Fourier
    /// coefficients and its projection onto this basis.
    fn residual(&self, coefficients: Vec<f64>, coords: Vec<f64>) -> PyResult<f64> {
        let family = BasisSystem::fourier(coefficients.len().max(1)).map_err(err)?;
        let g = EvaluableFunction::from_expansion(&family, &coefficients).map_err(err)?;
        let c = CoordinateVector::new(coords, self.system.id());
        residual_norm(&g, &c, &self.system, &self.rule).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Basis('{}')", self.system.id())
    }
}

/// Trained perceptron over coordinate vectors.
#[pyclass(frozen)]
struct Model {
    inner: FmlpModel,
}

#[pymethods]
impl Model {
    /// Load a model from its JSON file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Model {
            inner: ingest::load_model(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        ingest::save_model(path, &self.inner).map_err(err)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn hidden_units(&self) -> usize {
        self.inner.hidden_units()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn output_weights(&self) -> Vec<f64> {
        self.inner.output_weights().to_vec()
    }

    #[getter]
    fn output_l1_norm(&self) -> f64 {
        self.inner.output_l1_norm()
    }

    /// Prediction for one coordinate vector.
    fn predict(&self, coords: Vec<f64>) -> PyResult<f64> {
        self.inner.forward(&coords).map_err(err)
    }

    /// Predictions for many coordinate vectors.
    fn predict_many(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        rows.iter().map(|r| self.inner.forward(r).map_err(err)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(p={}, L={}, alpha={})",
            self.inner.input_dim(),
            self.inner.hidden_units(),
            self.inner.alpha()
        )
    }
}

fn train_config(
    restarts: Option<usize>,
    max_iters: Option<usize>,
    step: Option<f64>,
    tolerance: Option<f64>,
    stall_window: Option<usize>,
    seed: Option<u64>,
) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    if let Some(v) = restarts {
        cfg.restarts = v;
    }
    if let Some(v) = max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = step {
        cfg.step = v;
    }
    if let Some(v) = tolerance {
        cfg.tolerance = v;
    }
    if let Some(v) = stall_window {
        cfg.stall_window = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    cfg
}

/// Fit a perceptron with L hidden units and output budget alpha to
/// coordinate rows and scalar targets. Returns (model, final_loss).
#[pyfunction]
#[pyo3(signature = (rows, targets, hidden_units, alpha, *, restarts = None, max_iters = None, step = None, tolerance = None, stall_window = None, seed = None))]
#[allow(clippy::too_many_arguments)]
fn train(
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    hidden_units: usize,
    alpha: f64,
    restarts: Option<usize>,
    max_iters: Option<usize>,
    step: Option<f64>,
    tolerance: Option<f64>,
    stall_window: Option<usize>,
    seed: Option<u64>,
) -> PyResult<(Model, f64)> {
    let p = rows.first().map(|r| r.len()).unwrap_or(0);
    let data = CoordDataset::from_rows(&rows, &targets, format!("fourier-{p}")).map_err(err)?;
    let cfg = train_config(restarts, max_iters, step, tolerance, stall_window, seed);
    let (model, report) = mlp::train(&data, hidden_units, alpha, &cfg).map_err(err)?;
    Ok((Model { inner: model }, report.final_loss))
}

/// Hidden-layer width and output budget for a sample of size n.
#[pyfunction]
fn schedule(n: usize) -> PyResult<(usize, f64)> {
    let plan = mlp::schedule(n).map_err(err)?;
    Ok((plan.hidden_units, plan.alpha))
}

/// Law of (G, Y): Gaussian Fourier coefficients with power-law decay and a
/// scalar target with additive noise.
#[pyclass(frozen)]
struct Distribution {
    inner: FunctionalDistribution,
}

#[pymethods]
impl Distribution {
    /// Build from K_max, decay s, noise level, target kind ("linear",
    /// "sqnorm", "sine") with optional weights and scale, and a seed.
    #[new]
    #[pyo3(signature = (k_max, s, noise_sd, target, *, w = None, scale = None, seed = 0))]
    fn new(
        k_max: usize,
        s: f64,
        noise_sd: f64,
        target: &str,
        w: Option<Vec<f64>>,
        scale: Option<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let spec = DistributionSpec {
            k_max,
            s,
            noise_sd,
            target: fmlp_core::datagen::TargetSpec {
                kind: target.to_string(),
                w,
                scale,
            },
            seed,
        };
        Ok(Distribution {
            inner: FunctionalDistribution::from_spec(&spec).map_err(err)?,
        })
    }

    #[getter]
    fn k_max(&self) -> usize {
        self.inner.k_max()
    }

    #[getter]
    fn minimal_risk(&self) -> f64 {
        self.inner.minimal_risk()
    }

    /// Noiseless target value for a coefficient vector.
    fn target_value(&self, coefficients: Vec<f64>) -> f64 {
        self.inner.target_value(&coefficients)
    }

    /// Draw n curves and return (rows, targets): exact p-dimensional
    /// projections with noisy targets, or least-squares projections from
    /// `samples` observation points per curve when given.
    #[pyo3(signature = (n, p, *, samples = None, random_grid = false))]
    fn make_dataset(
        &self,
        n: usize,
        p: usize,
        samples: Option<usize>,
        random_grid: bool,
    ) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
        let mode = match samples {
            None => ProjectionMode::Exact { p },
            Some(m) => ProjectionMode::Sampled {
                p,
                m,
                grid: if random_grid {
                    GridKind::Random
                } else {
                    GridKind::Uniform
                },
            },
        };
        let dataset = make_dataset(&self.inner, n, &mode).map_err(err)?;
        let rows: Vec<Vec<f64>> = (0..dataset.coords.len())
            .map(|i| dataset.coords.inputs().row(i).iter().copied().collect())
            .collect();
        let targets: Vec<f64> = dataset.coords.targets().iter().copied().collect();
        Ok((rows, targets))
    }

    /// Monte Carlo risk of a model on fresh draws: (rmse, se).
    fn risk(&self, model: &Model, n_test: usize) -> PyResult<(f64, f64)> {
        let estimate = estimate_risk(&model.inner, &self.inner, n_test).map_err(err)?;
        Ok((estimate.rmse, estimate.se))
    }

    /// Monte Carlo risk of the conditional-expectation oracle: (rmse, se).
    fn oracle_risk(&self, n_test: usize) -> PyResult<(f64, f64)> {
        let estimate = estimate_oracle_risk(&self.inner, n_test).map_err(err)?;
        Ok((estimate.rmse, estimate.se))
    }

    fn __repr__(&self) -> String {
        let spec = self.inner.spec();
        format!(
            "Distribution(K_max={}, s={}, noise_sd={}, target='{}')",
            spec.k_max, spec.s, spec.noise_sd, spec.target.kind
        )
    }
}

fn rows_to_dicts<'py>(py: Python<'py>, rows: &[ResultRow]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    rows.iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("run_id", &row.run_id)?;
            d.set_item("config_hash", &row.config_hash)?;
            d.set_item("p", row.param_p)?;
            d.set_item("L", row.param_l)?;
            d.set_item("n", row.param_n)?;
            d.set_item("metric", &row.metric)?;
            d.set_item("value", row.value)?;
            d.set_item("se", row.se)?;
            d.set_item("wall_ms", row.wall_ms)?;
            Ok(d)
        })
        .collect()
}

/// Run an experiment from a JSON configuration string and return its
/// results table as a list of dicts.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ingest::parse_experiment_config(config).map_err(err)?;
    let rows = match cfg.kind.as_str() {
        KIND_APPROX => run_approx_sweep(&cfg).map_err(err)?.rows,
        KIND_CONSISTENCY => run_consistency_sweep(&cfg).map_err(err)?.rows,
        KIND_SCHEDULE => run_schedule_check(&cfg).map_err(err)?.rows,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown experiment kind '{other}'"
            )))
        }
    };
    rows_to_dicts(py, &rows)
}

#[pymodule]
fn fmlp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Basis>()?;
    m.add_class::<Model>()?;
    m.add_class::<Distribution>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
