//! Synthetic functional data.
//!
//! Random curves are Fourier series with independent Gaussian coefficients
//! xi_k ~ N(0, k^(-2s)) truncated at K_max. Targets are functionals of the
//! curve plus observation noise, so the conditional expectation E[Y | G]
//! is known in closed form and the minimal risk equals the noise standard
//! deviation exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::mlp::{CoordDataset, FmlpModel};
use crate::projection::{
    project_sampled, CoordinateVector, EvaluableFunction, SampledFunction,
};
use crate::rng::Stream;

pub const DEFAULT_K_MAX: usize = 25;
pub const DEFAULT_DECAY: f64 = 1.5;
pub const DEFAULT_NOISE_SD: f64 = 0.2;

/// Target functional applied to the generating coefficients.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetFunctional {
    /// sum_k w_k xi_k, the integral of the curve against a fixed weight
    /// function expanded in the same basis.
    LinearIntegral { w: Vec<f64> },
    /// Squared L2 norm of the curve.
    SquaredNorm,
    /// sin(scale * sum_k w_k xi_k).
    SineOfLinear { w: Vec<f64>, scale: f64 },
}

impl TargetFunctional {
    fn value(&self, xi: &[f64]) -> f64 {
        match self {
            TargetFunctional::LinearIntegral { w } => dot_prefix(w, xi),
            TargetFunctional::SquaredNorm => xi.iter().map(|x| x * x).sum(),
            TargetFunctional::SineOfLinear { w, scale } => (scale * dot_prefix(w, xi)).sin(),
        }
    }

    fn validate(&self) -> Result<()> {
        let w = match self {
            TargetFunctional::LinearIntegral { w } => w,
            TargetFunctional::SineOfLinear { w, .. } => w,
            TargetFunctional::SquaredNorm => return Ok(()),
        };
        if w.is_empty() {
            return Err(Error::InvalidArgument("target weight vector is empty".into()));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("target weights must be finite".into()));
        }
        Ok(())
    }
}

fn dot_prefix(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluate a target functional on a coordinate vector. The functional is
/// defined against the Fourier generating basis, so the coordinates must
/// come from a Fourier basis; truncation is then the exact projection.
pub fn eval_target(target: &TargetFunctional, c: &CoordinateVector) -> Result<f64> {
    if !c.basis_id.starts_with("fourier-") {
        return Err(Error::BasisMismatch {
            expected: "fourier-*".into(),
            got: c.basis_id.clone(),
        });
    }
    Ok(target.value(&c.coords))
}

/// Serializable target description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl TargetSpec {
    pub fn build(&self) -> Result<TargetFunctional> {
        let target = match self.kind.as_str() {
            "linear" => TargetFunctional::LinearIntegral {
                w: self.w.clone().ok_or_else(|| {
                    Error::InvalidArgument("linear target requires weights w".into())
                })?,
            },
            "sqnorm" => {
                if self.w.is_some() || self.scale.is_some() {
                    return Err(Error::InvalidArgument(
                        "sqnorm target takes no parameters".into(),
                    ));
                }
                TargetFunctional::SquaredNorm
            }
            "sine" => TargetFunctional::SineOfLinear {
                w: self.w.clone().ok_or_else(|| {
                    Error::InvalidArgument("sine target requires weights w".into())
                })?,
                scale: self.scale.unwrap_or(1.0),
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown target kind '{other}'"
                )))
            }
        };
        target.validate()?;
        Ok(target)
    }

    pub fn of(target: &TargetFunctional) -> Self {
        match target {
            TargetFunctional::LinearIntegral { w } => TargetSpec {
                kind: "linear".into(),
                w: Some(w.clone()),
                scale: None,
            },
            TargetFunctional::SquaredNorm => TargetSpec {
                kind: "sqnorm".into(),
                w: None,
                scale: None,
            },
            TargetFunctional::SineOfLinear { w, scale } => TargetSpec {
                kind: "sine".into(),
                w: Some(w.clone()),
                scale: Some(*scale),
            },
        }
    }
}

/// Serializable distribution description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub s: f64,
    pub noise_sd: f64,
    pub target: TargetSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Law of (G, Y): G has Fourier coefficients xi_k ~ N(0, k^(-2s)) for
/// k = 1..K_max and Y = F(G) + noise, with noise ~ N(0, noise_sd^2)
/// independent of G.
#[derive(Clone, Debug)]
pub struct FunctionalDistribution {
    basis: BasisSystem,
    sigma: Vec<f64>,
    decay: f64,
    noise_sd: f64,
    target: TargetFunctional,
    seed: u64,
}

impl FunctionalDistribution {
    pub fn new(
        k_max: usize,
        decay: f64,
        noise_sd: f64,
        target: TargetFunctional,
        seed: u64,
    ) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidDimension);
        }
        if !(decay > 0.5) {
            return Err(Error::InvalidArgument(format!(
                "decay exponent must exceed 1/2 for square-summable curves, got {decay}"
            )));
        }
        if !(noise_sd >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise_sd must be nonnegative, got {noise_sd}"
            )));
        }
        target.validate()?;
        let sigma = (1..=k_max).map(|k| (k as f64).powf(-decay)).collect();
        Ok(FunctionalDistribution {
            basis: BasisSystem::fourier(k_max)?,
            sigma,
            decay,
            noise_sd,
            target,
            seed,
        })
    }

    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        FunctionalDistribution::new(
            spec.k_max,
            spec.s,
            spec.noise_sd,
            spec.target.build()?,
            spec.seed,
        )
    }

    pub fn spec(&self) -> DistributionSpec {
        DistributionSpec {
            k_max: self.k_max(),
            s: self.decay,
            noise_sd: self.noise_sd,
            target: TargetSpec::of(&self.target),
            seed: self.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Override the per-coordinate standard deviations (one per k up to
    /// K_max). Meant for diagnostics and tests of other coefficient laws;
    /// the config schema only describes the power-law family, so `spec`
    /// keeps reporting the power-law parameters.
    pub fn with_coefficient_sds(mut self, sds: Vec<f64>) -> Result<Self> {
        if sds.len() != self.sigma.len() {
            return Err(Error::ShapeMismatch {
                expected: self.sigma.len(),
                got: sds.len(),
            });
        }
        if let Some(bad) = sds.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "coefficient standard deviations must be finite and nonnegative, got {bad}"
            )));
        }
        self.sigma = sds;
        Ok(self)
    }

    pub fn k_max(&self) -> usize {
        self.sigma.len()
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn target(&self) -> &TargetFunctional {
        &self.target
    }

    pub fn generation_basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn coefficient_sds(&self) -> &[f64] {
        &self.sigma
    }

    /// The minimal achievable risk: no predictor can beat the conditional
    /// expectation, whose root mean squared error is the noise level.
    pub fn minimal_risk(&self) -> f64 {
        self.noise_sd
    }

    /// Generating coefficients of curve `index` in the stream `label`.
    pub fn sample_coefficients(&self, label: &str, index: u64) -> Vec<f64> {
        let mut stream = Stream::new(self.seed, label, index);
        self.sigma
            .iter()
            .map(|&sd| sd * stream.next_standard_normal())
            .collect()
    }

    /// A random curve with its generating coordinates.
    pub fn sample_curve(&self, index: u64) -> (EvaluableFunction, CoordinateVector) {
        let xi = self.sample_coefficients("curve", index);
        let c = CoordinateVector::new(xi, self.basis.id());
        let g = EvaluableFunction::from_expansion(&self.basis, &c.coords)
            .expect("coordinates match the generation basis");
        (g, c)
    }

    fn noise(&self, label: &str, index: u64) -> f64 {
        if self.noise_sd == 0.0 {
            return 0.0;
        }
        let mut stream = Stream::new(self.seed, label, index);
        self.noise_sd * stream.next_standard_normal()
    }

    pub fn target_value(&self, xi: &[f64]) -> f64 {
        self.target.value(xi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    Uniform,
    Random,
}

/// How curves are turned into coordinate vectors.
#[derive(Clone, Debug, PartialEq)]
pub enum ProjectionMode {
    /// Exact projection onto the first p Fourier functions. By nestedness
    /// this is truncation (or zero padding) of the generating coefficients.
    Exact { p: usize },
    /// Least-squares projection from m samples per curve on a uniform or
    /// per-curve random grid.
    Sampled { p: usize, m: usize, grid: GridKind },
}

impl ProjectionMode {
    pub fn p(&self) -> usize {
        match self {
            ProjectionMode::Exact { p } => *p,
            ProjectionMode::Sampled { p, .. } => *p,
        }
    }
}

/// A generated dataset: network-ready coordinates plus the latent truth
/// they came from.
#[derive(Clone, Debug)]
pub struct GeneratedDataset {
    pub coords: CoordDataset,
    /// Generating coefficients, one row per curve.
    pub xi: Vec<Vec<f64>>,
    /// Target values before observation noise.
    pub noiseless: Vec<f64>,
}

fn truncate_or_pad(xi: &[f64], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p];
    let n = xi.len().min(p);
    out[..n].copy_from_slice(&xi[..n]);
    out
}

/// Draw n curves, project them, and attach noisy targets. Datasets with
/// different n use disjoint random streams, so they are independent draws
/// rather than nested prefixes.
pub fn make_dataset(
    dist: &FunctionalDistribution,
    n: usize,
    mode: &ProjectionMode,
) -> Result<GeneratedDataset> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let p = mode.p();
    if p == 0 {
        return Err(Error::InvalidDimension);
    }
    if let ProjectionMode::Sampled { m, .. } = mode {
        if *m < p {
            return Err(Error::Underdetermined {
                samples: *m,
                dim: p,
            });
        }
    }

    let coeff_label = format!("data-n{n}");
    let noise_label = format!("noise-n{n}");
    let grid_label = format!("grid-n{n}");
    let xi: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| dist.sample_coefficients(&coeff_label, i))
        .collect();

    let projection_basis = BasisSystem::fourier(p)?;
    let rows: Vec<Vec<f64>> = match mode {
        ProjectionMode::Exact { .. } => xi.par_iter().map(|x| truncate_or_pad(x, p)).collect(),
        ProjectionMode::Sampled { m, grid, .. } => {
            let uniform_grid: Option<Vec<f64>> = match grid {
                GridKind::Uniform => Some(uniform_points(*m)),
                GridKind::Random => None,
            };
            let results: Vec<Result<Vec<f64>>> = (0..n as u64)
                .into_par_iter()
                .map(|i| {
                    let xs = match &uniform_grid {
                        Some(g) => g.clone(),
                        None => random_grid(dist.seed(), &grid_label, i, *m),
                    };
                    let values = curve_values(dist, &xi[i as usize], &xs);
                    let sampled = SampledFunction::new(format!("{i}"), xs, values)?;
                    Ok(project_sampled(&sampled, &projection_basis, 0.0)?.coords)
                })
                .collect();
            results.into_iter().collect::<Result<Vec<_>>>()?
        }
    };

    let noiseless: Vec<f64> = xi.par_iter().map(|x| dist.target_value(x)).collect();
    let targets: Vec<f64> = noiseless
        .iter()
        .enumerate()
        .map(|(i, &f)| f + dist.noise(&noise_label, i as u64))
        .collect();

    let coords = CoordDataset::from_rows(&rows, &targets, projection_basis.id())?;
    Ok(GeneratedDataset {
        coords,
        xi,
        noiseless,
    })
}

fn uniform_points(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5];
    }
    (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
}

fn random_grid(seed: u64, label: &str, index: u64, m: usize) -> Vec<f64> {
    let mut stream = Stream::new(seed, label, index);
    loop {
        let mut xs: Vec<f64> = (0..m).map(|_| stream.next_f64()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("uniform draws are finite"));
        if xs.windows(2).all(|w| w[0] < w[1]) {
            return xs;
        }
    }
}

fn curve_values(dist: &FunctionalDistribution, xi: &[f64], xs: &[f64]) -> Vec<f64> {
    let basis = dist.generation_basis();
    let mut values = vec![0.0; basis.dim()];
    xs.iter()
        .map(|&x| {
            basis.eval_all(x, &mut values);
            dot_prefix(&values, xi)
        })
        .collect()
}

/// Monte Carlo risk estimate with a delta-method standard error for the
/// root mean squared error.
#[derive(Clone, Copy, Debug)]
pub struct RiskEstimate {
    pub rmse: f64,
    pub se: f64,
    pub n: usize,
}

fn risk_core(
    dist: &FunctionalDistribution,
    n_test: usize,
    predict: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<RiskEstimate> {
    if n_test < 2 {
        return Err(Error::InvalidArgument(
            "risk estimation needs at least 2 test draws".into(),
        ));
    }
    let squared_errors: Vec<f64> = (0..n_test as u64)
        .into_par_iter()
        .map(|i| {
            let xi = dist.sample_coefficients("test", i);
            let y = dist.target_value(&xi) + dist.noise("test-noise", i);
            let e = predict(&xi) - y;
            e * e
        })
        .collect();
    let n = n_test as f64;
    let mse = squared_errors.iter().sum::<f64>() / n;
    let var = squared_errors
        .iter()
        .map(|e| (e - mse) * (e - mse))
        .sum::<f64>()
        / (n - 1.0);
    let se_mse = (var / n).sqrt();
    let rmse = mse.sqrt();
    let se = if rmse > 0.0 { se_mse / (2.0 * rmse) } else { 0.0 };
    Ok(RiskEstimate {
        rmse,
        se,
        n: n_test,
    })
}

/// Risk of a trained model over fresh draws. The model sees the exact
/// projection of each test curve (truncation to its input dimension).
pub fn estimate_risk(
    model: &FmlpModel,
    dist: &FunctionalDistribution,
    n_test: usize,
) -> Result<RiskEstimate> {
    let p = model.input_dim();
    risk_core(dist, n_test, |xi| {
        let x = truncate_or_pad(xi, p);
        model.forward(&x).expect("input dimension matches by construction")
    })
}

/// Risk of the conditional expectation itself; converges to noise_sd.
pub fn estimate_oracle_risk(
    dist: &FunctionalDistribution,
    n_test: usize,
) -> Result<RiskEstimate> {
    risk_core(dist, n_test, |xi| dist.target_value(xi))
}
