//! Single-hidden-layer perceptron on coordinate vectors, with an l1 budget
//! on the output weights.
//!
//! The model computes sum_l a_l T(b_l + beta_l . x) with T the logistic
//! sigmoid and the constraint |a|_1 <= alpha. Training is full-batch
//! projected gradient descent: after every step the output weights are
//! projected back onto the l1 ball, so every iterate is feasible.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Slack accepted when checking the l1 constraint, to absorb rounding in
/// the projection arithmetic.
pub const L1_SLACK: f64 = 1e-9;

/// Every this many accepted steps, the convex output-layer subproblem is
/// re-solved with the hidden layer frozen.
const OUTPUT_REFINE_PERIOD: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "sigmoid")]
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            // Split by sign so the exponential never overflows.
            Activation::Sigmoid => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Derivative expressed through the activation value t = T(z).
    pub fn derivative_from_output(self, t: f64) -> f64 {
        match self {
            Activation::Sigmoid => t * (1.0 - t),
        }
    }
}

/// The functional perceptron acting on p-dimensional coordinate vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FmlpModel {
    output_weights: DVector<f64>,
    hidden_bias: DVector<f64>,
    hidden_weights: DMatrix<f64>,
    alpha: f64,
    activation: Activation,
}

impl FmlpModel {
    pub fn new(
        output_weights: Vec<f64>,
        hidden_bias: Vec<f64>,
        hidden_weights: DMatrix<f64>,
        alpha: f64,
    ) -> Result<Self> {
        let hidden_units = output_weights.len();
        if hidden_units == 0 || hidden_weights.ncols() == 0 {
            return Err(Error::EmptyData);
        }
        if hidden_bias.len() != hidden_units {
            return Err(Error::ShapeMismatch {
                expected: hidden_units,
                got: hidden_bias.len(),
            });
        }
        if hidden_weights.nrows() != hidden_units {
            return Err(Error::ShapeMismatch {
                expected: hidden_units,
                got: hidden_weights.nrows(),
            });
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let finite = output_weights.iter().all(|v| v.is_finite())
            && hidden_bias.iter().all(|v| v.is_finite())
            && hidden_weights.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "model parameters must be finite".into(),
            ));
        }
        let l1: f64 = output_weights.iter().map(|a| a.abs()).sum();
        if l1 > alpha + L1_SLACK {
            return Err(Error::InvalidArgument(format!(
                "output weights have |a|_1 = {l1}, exceeding alpha = {alpha}"
            )));
        }
        Ok(FmlpModel {
            output_weights: DVector::from_vec(output_weights),
            hidden_bias: DVector::from_vec(hidden_bias),
            hidden_weights,
            alpha,
            activation: Activation::Sigmoid,
        })
    }

    /// Random initialization: hidden parameters uniform in [-1, 1] scaled
    /// by 1/sqrt(p), output weights uniform in [-alpha, alpha] and then
    /// projected onto the budget.
    pub fn random_init(p: usize, hidden_units: usize, alpha: f64, stream: &mut Stream) -> Self {
        let scale = 1.0 / (p as f64).sqrt();
        let hidden_weights =
            DMatrix::from_fn(hidden_units, p, |_, _| stream.next_in(-1.0, 1.0) * scale);
        let hidden_bias =
            DVector::from_fn(hidden_units, |_, _| stream.next_in(-1.0, 1.0) * scale);
        let raw: Vec<f64> = (0..hidden_units)
            .map(|_| stream.next_in(-alpha, alpha))
            .collect();
        let output_weights = DVector::from_vec(project_l1_ball(&raw, alpha));
        FmlpModel {
            output_weights,
            hidden_bias,
            hidden_weights,
            alpha,
            activation: Activation::Sigmoid,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden_weights.ncols()
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_weights.nrows()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_weights(&self) -> &[f64] {
        self.output_weights.as_slice()
    }

    pub fn hidden_bias(&self) -> &[f64] {
        self.hidden_bias.as_slice()
    }

    pub fn hidden_weights(&self) -> &DMatrix<f64> {
        &self.hidden_weights
    }

    pub fn output_l1_norm(&self) -> f64 {
        self.output_weights.iter().map(|a| a.abs()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut out = 0.0;
        for l in 0..self.hidden_units() {
            let mut z = self.hidden_bias[l];
            for (k, &xk) in x.iter().enumerate() {
                z += self.hidden_weights[(l, k)] * xk;
            }
            out += self.output_weights[l] * self.activation.apply(z);
        }
        Ok(out)
    }

    /// Hidden activations for a batch: H[i, l] = T(b_l + beta_l . x_i).
    fn hidden_activations(&self, inputs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = inputs * self.hidden_weights.transpose();
        for i in 0..z.nrows() {
            for l in 0..z.ncols() {
                z[(i, l)] = self.activation.apply(z[(i, l)] + self.hidden_bias[l]);
            }
        }
        z
    }

    pub fn predictions(&self, inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: inputs.ncols(),
            });
        }
        Ok(self.hidden_activations(inputs) * &self.output_weights)
    }

    pub fn to_spec(&self) -> ModelSpec {
        let l = self.hidden_units();
        let p = self.input_dim();
        let beta = (0..l)
            .map(|i| (0..p).map(|k| self.hidden_weights[(i, k)]).collect())
            .collect();
        ModelSpec {
            p,
            hidden_units: l,
            alpha: self.alpha,
            activation: self.activation,
            output_weights: self.output_weights.as_slice().to_vec(),
            hidden_bias: self.hidden_bias.as_slice().to_vec(),
            hidden_weights: beta,
        }
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        if spec.hidden_units != spec.hidden_weights.len() {
            return Err(Error::ShapeMismatch {
                expected: spec.hidden_units,
                got: spec.hidden_weights.len(),
            });
        }
        for row in &spec.hidden_weights {
            if row.len() != spec.p {
                return Err(Error::ShapeMismatch {
                    expected: spec.p,
                    got: row.len(),
                });
            }
        }
        let beta = DMatrix::from_fn(spec.hidden_units, spec.p, |i, k| spec.hidden_weights[i][k]);
        FmlpModel::new(
            spec.output_weights.clone(),
            spec.hidden_bias.clone(),
            beta,
            spec.alpha,
        )
    }
}

/// Serializable form of the model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub p: usize,
    #[serde(rename = "L")]
    pub hidden_units: usize,
    pub alpha: f64,
    pub activation: Activation,
    #[serde(rename = "a")]
    pub output_weights: Vec<f64>,
    #[serde(rename = "beta0")]
    pub hidden_bias: Vec<f64>,
    #[serde(rename = "beta")]
    pub hidden_weights: Vec<Vec<f64>>,
}

/// Coordinate inputs with scalar targets.
#[derive(Clone, Debug)]
pub struct CoordDataset {
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
    basis_id: String,
}

impl CoordDataset {
    pub fn from_rows(rows: &[Vec<f64>], targets: &[f64], basis_id: impl Into<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData);
        }
        if rows.len() != targets.len() {
            return Err(Error::ShapeMismatch {
                expected: rows.len(),
                got: targets.len(),
            });
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::EmptyData);
        }
        for row in rows {
            if row.len() != p {
                return Err(Error::ShapeMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite input coordinate".into()));
            }
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite target".into()));
        }
        let inputs = DMatrix::from_fn(rows.len(), p, |i, k| rows[i][k]);
        Ok(CoordDataset {
            inputs,
            targets: DVector::from_column_slice(targets),
            basis_id: basis_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn basis_id(&self) -> &str {
        &self.basis_id
    }
}

/// Gradient of the mean squared error with respect to all parameters.
#[derive(Clone, Debug)]
pub struct ModelGradient {
    pub output_weights: DVector<f64>,
    pub hidden_bias: DVector<f64>,
    pub hidden_weights: DMatrix<f64>,
}

/// Mean squared error of the model on the dataset.
pub fn loss(model: &FmlpModel, data: &CoordDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let pred = model.predictions(&data.inputs)?;
    let n = data.len() as f64;
    Ok((&pred - &data.targets).norm_squared() / n)
}

/// Mean squared error together with its exact gradient.
pub fn loss_and_gradient(model: &FmlpModel, data: &CoordDataset) -> Result<(f64, ModelGradient)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.dim() != model.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: model.input_dim(),
            got: data.dim(),
        });
    }
    let n = data.len();
    let nf = n as f64;
    let hidden = model.hidden_activations(&data.inputs);
    let residuals = &hidden * &model.output_weights - &data.targets;
    let loss = residuals.norm_squared() / nf;

    let common = 2.0 / nf;
    let grad_a = hidden.transpose() * &residuals * common;

    // dz[i, l] = common * r_i * a_l * T'(z_il), written through the output.
    let l_units = model.hidden_units();
    let mut dz = DMatrix::zeros(n, l_units);
    for i in 0..n {
        let factor = common * residuals[i];
        for l in 0..l_units {
            let t = hidden[(i, l)];
            dz[(i, l)] =
                factor * model.output_weights[l] * model.activation.derivative_from_output(t);
        }
    }
    let grad_bias = dz.row_sum().transpose();
    let grad_hidden = dz.transpose() * &data.inputs;

    Ok((
        loss,
        ModelGradient {
            output_weights: grad_a,
            hidden_bias: grad_bias,
            hidden_weights: grad_hidden,
        },
    ))
}

/// Refine the output weights with the hidden layer frozen: projected
/// gradient on the convex problem min |H a - y|^2 / n over the L1 ball,
/// stepping with the exact line-search length of the unconstrained
/// quadratic, halved until the projected point improves. Returns the new
/// loss, never larger than the loss passed in.
fn refine_output_weights(
    model: &mut FmlpModel,
    data: &CoordDataset,
    mut current_loss: f64,
    inner_iters: usize,
) -> f64 {
    let n = data.len() as f64;
    let hidden = model.hidden_activations(&data.inputs);
    let mut a = model.output_weights.clone();
    for _ in 0..inner_iters {
        let residuals = &hidden * &a - &data.targets;
        let grad = hidden.transpose() * &residuals * (2.0 / n);
        let gnorm2 = grad.norm_squared();
        if gnorm2 == 0.0 {
            break;
        }
        let along = &hidden * &grad;
        let curvature = 2.0 * along.norm_squared() / n;
        if !(curvature > 0.0) {
            break;
        }
        let mut step = gnorm2 / curvature;
        let mut improved = false;
        for _ in 0..60 {
            let raw: Vec<f64> = (0..a.nrows()).map(|l| a[l] - step * grad[l]).collect();
            let candidate = DVector::from_vec(project_l1_ball(&raw, model.alpha));
            let candidate_loss = (&hidden * &candidate - &data.targets).norm_squared() / n;
            if candidate_loss < current_loss {
                a = candidate;
                current_loss = candidate_loss;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    model.output_weights = a;
    current_loss
}

/// Root mean squared prediction error on the dataset.
pub fn empirical_rmse(model: &FmlpModel, data: &CoordDataset) -> Result<f64> {
    loss(model, data).map(f64::sqrt)
}

/// Euclidean projection of v onto the l1 ball of the given radius, by the
/// sort-and-threshold algorithm. A feasible v is returned unchanged.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius > 0.0, "l1 radius must be positive");
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut magnitudes: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    magnitudes.sort_by(|a, b| b.partial_cmp(a).expect("magnitudes are finite"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in magnitudes.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step: f64,
    pub tolerance: f64,
    pub stall_window: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            restarts: 20,
            max_iters: 2000,
            step: 1.0,
            tolerance: 1e-10,
            stall_window: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "restarts and max_iters must be at least 1".into(),
            ));
        }
        if !(self.step > 0.0) || !(self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument(
                "step must be positive and tolerance nonnegative".into(),
            ));
        }
        if self.stall_window == 0 {
            return Err(Error::InvalidArgument(
                "stall_window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RestartReport {
    pub restart: usize,
    pub iterations: usize,
    pub final_loss: f64,
    /// Loss after every accepted step, starting with the initial loss.
    pub losses: Vec<f64>,
    /// Largest |a|_1 observed across iterates; stays within alpha + slack.
    pub max_output_l1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub restarts: Vec<RestartReport>,
    pub best_restart: usize,
    pub final_loss: f64,
}

fn run_restart(
    data: &CoordDataset,
    hidden_units: usize,
    alpha: f64,
    cfg: &TrainConfig,
    restart: usize,
) -> Result<(FmlpModel, RestartReport)> {
    let mut stream = Stream::new(cfg.seed.wrapping_add(restart as u64), "train-init", 0);
    let mut model = FmlpModel::random_init(data.dim(), hidden_units, alpha, &mut stream);
    let mut current_loss = loss(&model, data)?;
    if !current_loss.is_finite() {
        return Err(Error::Divergence {
            restart,
            iteration: 0,
        });
    }
    let mut losses = vec![current_loss];
    let mut max_l1 = model.output_l1_norm();
    let mut iterations = 0;

    let n = data.len();
    let p = data.dim();
    let q = hidden_units * (p + 2);
    // Damped Gauss-Newton: each iteration solves
    //   (J'J + lambda * diag(J'J)) delta = J'r
    // for the residual Jacobian J, steps to theta - delta with the output
    // weights projected onto the budget, and accepts only loss decreases.
    // The damping relaxes after every accepted step and grows on each
    // rejection, so accepted losses are monotone.
    let mut damping = 1.0 / cfg.step;
    let mut jacobian = DMatrix::zeros(n, q);

    for iteration in 0..cfg.max_iters {
        let hidden = model.hidden_activations(&data.inputs);
        let residuals = &hidden * &model.output_weights - &data.targets;
        for i in 0..n {
            for l in 0..hidden_units {
                let t = hidden[(i, l)];
                let slope = model.output_weights[l] * model.activation.derivative_from_output(t);
                jacobian[(i, l)] = t;
                jacobian[(i, hidden_units + l)] = slope;
                let col0 = 2 * hidden_units + l * p;
                for k in 0..p {
                    jacobian[(i, col0 + k)] = slope * data.inputs[(i, k)];
                }
            }
        }
        let gram = jacobian.transpose() * &jacobian;
        let gradient = jacobian.transpose() * &residuals;

        let mut accepted = None;
        let mut lambda = damping;
        for _attempt in 0..60 {
            let mut damped = gram.clone();
            for d in 0..q {
                damped[(d, d)] += lambda * gram[(d, d)].max(1e-12);
            }
            let Some(factor) = damped.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let delta = factor.solve(&gradient);

            let raw_a: Vec<f64> = (0..hidden_units)
                .map(|l| model.output_weights[l] - delta[l])
                .collect();
            let candidate = FmlpModel {
                output_weights: DVector::from_vec(project_l1_ball(&raw_a, alpha)),
                hidden_bias: DVector::from_fn(hidden_units, |l, _| {
                    model.hidden_bias[l] - delta[hidden_units + l]
                }),
                hidden_weights: DMatrix::from_fn(hidden_units, p, |l, k| {
                    model.hidden_weights[(l, k)] - delta[2 * hidden_units + l * p + k]
                }),
                alpha,
                activation: model.activation,
            };
            let candidate_loss = loss(&candidate, data)?;
            if !candidate_loss.is_finite() {
                return Err(Error::Divergence { restart, iteration });
            }
            if candidate_loss <= current_loss {
                damping = (lambda / 3.0).max(1e-12);
                accepted = Some((candidate, candidate_loss));
                break;
            }
            lambda *= 4.0;
        }
        let Some((candidate, candidate_loss)) = accepted else {
            break;
        };
        model = candidate;
        current_loss = candidate_loss;
        losses.push(current_loss);
        max_l1 = max_l1.max(model.output_l1_norm());
        iterations = iteration + 1;

        if (iteration + 1) % OUTPUT_REFINE_PERIOD == 0 {
            let refined = refine_output_weights(&mut model, data, current_loss, 30);
            if refined < current_loss {
                current_loss = refined;
                losses.push(current_loss);
                max_l1 = max_l1.max(model.output_l1_norm());
            }
        }

        let len = losses.len();
        if len > cfg.stall_window
            && losses[len - 1 - cfg.stall_window] - losses[len - 1] < cfg.tolerance
        {
            break;
        }
    }

    let refined = refine_output_weights(&mut model, data, current_loss, 200);
    if refined < current_loss {
        current_loss = refined;
        losses.push(current_loss);
        max_l1 = max_l1.max(model.output_l1_norm());
    }

    Ok((
        model,
        RestartReport {
            restart,
            iterations,
            final_loss: current_loss,
            losses,
            max_output_l1: max_l1,
        },
    ))
}

/// Fit a network of the given width under the output budget alpha.
/// Restarts run independently (in parallel) from seeds cfg.seed + r; the
/// restart with the lowest final loss wins, earlier index breaking ties.
pub fn train(
    data: &CoordDataset,
    hidden_units: usize,
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<(FmlpModel, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if hidden_units == 0 {
        return Err(Error::InvalidArgument(
            "hidden_units must be at least 1".into(),
        ));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }

    let outcomes: Vec<Result<(FmlpModel, RestartReport)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(data, hidden_units, alpha, cfg, r))
        .collect();

    let mut best: Option<(FmlpModel, usize, f64)> = None;
    let mut reports = Vec::with_capacity(cfg.restarts);
    for outcome in outcomes {
        let (model, report) = outcome?;
        let better = match &best {
            None => true,
            Some((_, _, best_loss)) => report.final_loss < *best_loss,
        };
        if better {
            best = Some((model, report.restart, report.final_loss));
        }
        reports.push(report);
    }
    let (model, best_restart, final_loss) = best.expect("at least one restart");
    Ok((
        model,
        TrainReport {
            restarts: reports,
            best_restart,
            final_loss,
        },
    ))
}

/// Width and output budget as functions of the sample size: the number of
/// hidden units grows like ceil(ln n) and the budget like n^(1/8).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub n: usize,
    pub hidden_units: usize,
    pub alpha: f64,
}

/// Exponent delta in the tail diagnostic alpha^4 / n^(1 - delta).
pub const SCHEDULE_DELTA: f64 = 0.25;

pub fn schedule(n: usize) -> Result<Schedule> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".into(),
        ));
    }
    let nf = n as f64;
    let hidden_units = (nf.ln().ceil() as usize).max(1);
    Ok(Schedule {
        n,
        hidden_units,
        alpha: nf.powf(0.125),
    })
}

impl Schedule {
    /// L alpha^4 log(L alpha) / n; must vanish as n grows for estimation
    /// error to die out.
    pub fn growth_diagnostic(&self) -> f64 {
        let l = self.hidden_units as f64;
        l * self.alpha.powi(4) * (l * self.alpha).ln() / self.n as f64
    }

    /// alpha^4 / n^(1 - delta); must vanish for the almost-sure part.
    pub fn tail_diagnostic(&self) -> f64 {
        self.alpha.powi(4) / (self.n as f64).powf(1.0 - SCHEDULE_DELTA)
    }
}
