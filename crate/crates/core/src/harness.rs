//! Experiment harness: the approximation sweep, the consistency sweep and
//! the schedule diagnostics.
//!
//! Each runner resolves its defaults into an explicit config, hashes that
//! config canonically, executes the sweep cell by cell, and (when an
//! output directory is set) writes `results.csv` and `run-meta.json`.
//! Metrics are bit-identical across reruns of the same config; wall-clock
//! columns are measurements and are excluded from that guarantee.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::datagen::{
    estimate_risk, make_dataset, DistributionSpec, FunctionalDistribution, ProjectionMode,
};
use crate::error::{Error, Result};
use crate::ingest::{self, ExperimentConfig, ResultRow, RunMeta};
use crate::mlp::{schedule, train, CoordDataset, TrainConfig};
use crate::rng::Stream;

pub const KIND_APPROX: &str = "approx-sweep";
pub const KIND_CONSISTENCY: &str = "consistency-sweep";
pub const KIND_SCHEDULE: &str = "schedule-check";

fn config_issues(issues: Vec<String>) -> Error {
    Error::Config { issues }
}

fn check_grid(issues: &mut Vec<String>, name: &str, grid: &[usize]) {
    if grid.is_empty() {
        issues.push(format!("{name} must not be empty"));
        return;
    }
    if grid.iter().any(|&v| v == 0) {
        issues.push(format!("{name} values must be positive"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        issues.push(format!("{name} must be strictly ascending"));
    }
}

fn forbid<T>(issues: &mut Vec<String>, kind: &str, name: &str, value: &Option<T>) {
    if value.is_some() {
        issues.push(format!("'{name}' is not used by {kind}"));
    }
}

/// Fully resolved approximation-sweep configuration; hashing this yields
/// the run's config hash.
#[derive(Clone, Debug, Serialize)]
pub struct ApproxConfig {
    pub kind: String,
    pub distribution: DistributionSpec,
    pub p_grid: Vec<usize>,
    pub l_grid: Vec<usize>,
    pub alpha: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub clip_radius: f64,
    pub train: TrainConfig,
    pub seed: u64,
}

impl ApproxConfig {
    /// Apply defaults and validate. The experiment seed overrides the
    /// distribution's own seed, and targets are taken noiseless: the
    /// approximation experiment measures representation error, not noise.
    /// The default output budget is deliberately generous — smooth
    /// low-curvature fits need large output weights paired with small
    /// hidden weights, and a tight budget caps accuracy long before the
    /// hidden layer runs out of units.
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        let mut issues = Vec::new();
        if cfg.kind != KIND_APPROX {
            issues.push(format!("kind must be '{KIND_APPROX}', got '{}'", cfg.kind));
        }
        forbid(&mut issues, KIND_APPROX, "seeds", &cfg.seeds);
        forbid(&mut issues, KIND_APPROX, "p", &cfg.p);
        forbid(&mut issues, KIND_APPROX, "n_grid", &cfg.n_grid);
        let Some(mut distribution) = cfg.distribution.clone() else {
            issues.push("approx-sweep requires a distribution".into());
            return Err(config_issues(issues));
        };
        distribution.seed = cfg.seed;
        distribution.noise_sd = 0.0;

        let resolved = ApproxConfig {
            kind: KIND_APPROX.into(),
            distribution,
            p_grid: cfg.p_grid.clone().unwrap_or_else(|| vec![2, 4, 8]),
            l_grid: cfg.l_grid.clone().unwrap_or_else(|| vec![2, 4, 16]),
            alpha: cfg.alpha.unwrap_or(3000.0),
            n_train: cfg.n_train.unwrap_or(2000),
            n_test: cfg.n_test.unwrap_or(500),
            clip_radius: cfg.clip_radius.unwrap_or(3.0),
            train: cfg.train.clone().unwrap_or_default(),
            seed: cfg.seed,
        };
        check_grid(&mut issues, "p_grid", &resolved.p_grid);
        check_grid(&mut issues, "l_grid", &resolved.l_grid);
        if !(resolved.alpha > 0.0) {
            issues.push("alpha must be positive".into());
        }
        if resolved.n_train == 0 {
            issues.push("n_train must be positive".into());
        }
        if resolved.n_test < 2 {
            issues.push("n_test must be at least 2".into());
        }
        if !(resolved.clip_radius > 0.0) {
            issues.push("clip_radius must be positive".into());
        }
        if let Err(e) = resolved.train.validate() {
            issues.push(e.to_string());
        }
        if let Err(e) = FunctionalDistribution::from_spec(&resolved.distribution) {
            issues.push(e.to_string());
        }
        if issues.is_empty() {
            Ok(resolved)
        } else {
            Err(config_issues(issues))
        }
    }
}

#[derive(Clone, Debug)]
pub struct ApproxCell {
    pub p: usize,
    pub hidden_units: usize,
    pub sup_error: f64,
    pub rmse: f64,
    pub train_loss: f64,
    pub wall_ms: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ApproxOutcome {
    pub config: ApproxConfig,
    pub config_hash: String,
    pub cells: Vec<ApproxCell>,
    pub rows: Vec<ResultRow>,
    pub wall_ms: u64,
}

fn clip_to_ball(mut xi: Vec<f64>, radius: f64) -> Vec<f64> {
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > radius {
        let scale = radius / norm;
        for x in &mut xi {
            *x *= scale;
        }
    }
    xi
}

fn truncate(xi: &[f64], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p];
    let n = xi.len().min(p);
    out[..n].copy_from_slice(&xi[..n]);
    out
}

/// Per-cell training seed; depends only on the base seed and the cell's
/// (p, L), so a cell's result does not change when the surrounding grid
/// does.
fn cell_seed(base: u64, label: &str) -> u64 {
    Stream::new(base, label, 0).next_u64()
}

/// Sweep (p, L) over the grid on noiseless targets over a bounded curve
/// region, reporting sup-error and RMSE on fresh curves from that region.
pub fn run_approx_sweep(cfg: &ExperimentConfig) -> Result<ApproxOutcome> {
    let started = Instant::now();
    let resolved = ApproxConfig::resolve(cfg)?;
    let config_hash = ingest::canonical_hash(&resolved);
    let dist = FunctionalDistribution::from_spec(&resolved.distribution)?;

    let draw = |label: &str, count: usize| -> Vec<Vec<f64>> {
        (0..count as u64)
            .map(|i| clip_to_ball(dist.sample_coefficients(label, i), resolved.clip_radius))
            .collect()
    };
    let train_xi = draw("approx-train", resolved.n_train);
    let test_xi = draw("approx-test", resolved.n_test);
    let train_targets: Vec<f64> = train_xi.iter().map(|x| dist.target_value(x)).collect();
    let test_targets: Vec<f64> = test_xi.iter().map(|x| dist.target_value(x)).collect();

    let mut cells = Vec::new();
    let mut rows = Vec::new();
    for &p in &resolved.p_grid {
        let basis_id = format!("fourier-{p}");
        let train_rows: Vec<Vec<f64>> = train_xi.iter().map(|x| truncate(x, p)).collect();
        let test_rows: Vec<Vec<f64>> = test_xi.iter().map(|x| truncate(x, p)).collect();
        let data = CoordDataset::from_rows(&train_rows, &train_targets, &basis_id)?;

        for &hidden_units in &resolved.l_grid {
            let cell_started = Instant::now();
            let train_cfg = TrainConfig {
                seed: cell_seed(resolved.train.seed, &format!("cell-p{p}-L{hidden_units}")),
                ..resolved.train.clone()
            };
            let cell = match train(&data, hidden_units, resolved.alpha, &train_cfg) {
                Ok((model, report)) => {
                    let mut sup_error: f64 = 0.0;
                    let mut sq_sum = 0.0;
                    for (row, &target) in test_rows.iter().zip(&test_targets) {
                        let e = model.forward(row)? - target;
                        sup_error = sup_error.max(e.abs());
                        sq_sum += e * e;
                    }
                    let rmse = (sq_sum / test_rows.len() as f64).sqrt();
                    ApproxCell {
                        p,
                        hidden_units,
                        sup_error,
                        rmse,
                        train_loss: report.final_loss,
                        wall_ms: cell_started.elapsed().as_millis() as u64,
                        error: None,
                    }
                }
                Err(e) => ApproxCell {
                    p,
                    hidden_units,
                    sup_error: f64::NAN,
                    rmse: f64::NAN,
                    train_loss: f64::NAN,
                    wall_ms: cell_started.elapsed().as_millis() as u64,
                    error: Some(e.to_string()),
                },
            };
            let mut push = |metric: &str, value: f64| {
                rows.push(ResultRow {
                    run_id: "approx".into(),
                    config_hash: config_hash.clone(),
                    param_p: Some(p),
                    param_l: Some(hidden_units),
                    param_n: None,
                    metric: metric.into(),
                    value,
                    se: None,
                    wall_ms: cell.wall_ms,
                });
            };
            match &cell.error {
                None => {
                    push("sup_error", cell.sup_error);
                    push("rmse", cell.rmse);
                    push("train_loss", cell.train_loss);
                }
                Some(_) => push("failed", 1.0),
            }
            cells.push(cell);
        }
    }

    let outcome = ApproxOutcome {
        config: resolved,
        config_hash,
        cells,
        rows,
        wall_ms: started.elapsed().as_millis() as u64,
    };
    if let Some(dir) = &cfg.out_dir {
        write_outputs(
            dir,
            KIND_APPROX,
            &outcome.config_hash,
            cfg.seed,
            &outcome.rows,
            outcome.wall_ms,
        )?;
    }
    Ok(outcome)
}

/// Fully resolved consistency-sweep configuration.
#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyConfig {
    pub kind: String,
    pub distribution: DistributionSpec,
    pub p: usize,
    pub n_grid: Vec<usize>,
    pub n_test: usize,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
}

impl ConsistencyConfig {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        let mut issues = Vec::new();
        if cfg.kind != KIND_CONSISTENCY {
            issues.push(format!(
                "kind must be '{KIND_CONSISTENCY}', got '{}'",
                cfg.kind
            ));
        }
        forbid(&mut issues, KIND_CONSISTENCY, "p_grid", &cfg.p_grid);
        forbid(&mut issues, KIND_CONSISTENCY, "l_grid", &cfg.l_grid);
        forbid(&mut issues, KIND_CONSISTENCY, "alpha", &cfg.alpha);
        forbid(&mut issues, KIND_CONSISTENCY, "n_train", &cfg.n_train);
        forbid(&mut issues, KIND_CONSISTENCY, "clip_radius", &cfg.clip_radius);
        let Some(distribution) = cfg.distribution.clone() else {
            issues.push("consistency-sweep requires a distribution".into());
            return Err(config_issues(issues));
        };

        let resolved = ConsistencyConfig {
            kind: KIND_CONSISTENCY.into(),
            distribution,
            p: cfg.p.unwrap_or(5),
            n_grid: cfg.n_grid.clone().unwrap_or_else(|| vec![100, 400, 1600, 6400]),
            n_test: cfg.n_test.unwrap_or(100_000),
            seeds: cfg
                .seeds
                .clone()
                .unwrap_or_else(|| (0..5).map(|i| cfg.seed.wrapping_add(i)).collect()),
            train: cfg.train.clone().unwrap_or_default(),
        };
        check_grid(&mut issues, "n_grid", &resolved.n_grid);
        if resolved.p == 0 {
            issues.push("p must be positive".into());
        }
        if resolved.n_test < 2 {
            issues.push("n_test must be at least 2".into());
        }
        if resolved.seeds.is_empty() {
            issues.push("seeds must not be empty".into());
        }
        if let Err(e) = resolved.train.validate() {
            issues.push(e.to_string());
        }
        if let Err(e) = FunctionalDistribution::from_spec(&resolved.distribution) {
            issues.push(e.to_string());
        }
        if issues.is_empty() {
            Ok(resolved)
        } else {
            Err(config_issues(issues))
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConsistencyCell {
    pub seed: u64,
    pub n: usize,
    pub hidden_units: usize,
    pub alpha: f64,
    pub risk: f64,
    pub se: f64,
    pub gap: f64,
    pub train_loss: f64,
    pub wall_ms: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ConsistencyOutcome {
    pub config: ConsistencyConfig,
    pub config_hash: String,
    pub minimal_risk: f64,
    pub cells: Vec<ConsistencyCell>,
    pub rows: Vec<ResultRow>,
    pub wall_ms: u64,
}

/// For each replicate seed and each n: fresh training set, the width and
/// budget from the schedule, and risk on a shared large test sample.
pub fn run_consistency_sweep(cfg: &ExperimentConfig) -> Result<ConsistencyOutcome> {
    let started = Instant::now();
    let resolved = ConsistencyConfig::resolve(cfg)?;
    let config_hash = ingest::canonical_hash(&resolved);
    let base = FunctionalDistribution::from_spec(&resolved.distribution)?;
    let minimal_risk = base.minimal_risk();

    let mut cells = Vec::new();
    let mut rows = Vec::new();
    for &seed in &resolved.seeds {
        let dist = base.clone().with_seed(seed);
        let run_id = format!("consistency-s{seed}");
        for &n in &resolved.n_grid {
            let cell_started = Instant::now();
            let plan = schedule(n)?;
            let outcome: Result<(f64, f64, f64)> = (|| {
                let data = make_dataset(&dist, n, &ProjectionMode::Exact { p: resolved.p })?;
                let train_cfg = TrainConfig {
                    seed: cell_seed(resolved.train.seed, &format!("cell-s{seed}-n{n}")),
                    ..resolved.train.clone()
                };
                let (model, report) =
                    train(&data.coords, plan.hidden_units, plan.alpha, &train_cfg)?;
                let risk = estimate_risk(&model, &dist, resolved.n_test)?;
                Ok((risk.rmse, risk.se, report.final_loss))
            })();
            let cell = match outcome {
                Ok((risk, se, train_loss)) => ConsistencyCell {
                    seed,
                    n,
                    hidden_units: plan.hidden_units,
                    alpha: plan.alpha,
                    risk,
                    se,
                    gap: risk - minimal_risk,
                    train_loss,
                    wall_ms: cell_started.elapsed().as_millis() as u64,
                    error: None,
                },
                Err(e) => ConsistencyCell {
                    seed,
                    n,
                    hidden_units: plan.hidden_units,
                    alpha: plan.alpha,
                    risk: f64::NAN,
                    se: f64::NAN,
                    gap: f64::NAN,
                    train_loss: f64::NAN,
                    wall_ms: cell_started.elapsed().as_millis() as u64,
                    error: Some(e.to_string()),
                },
            };
            let mut push = |metric: &str, value: f64, se: Option<f64>| {
                rows.push(ResultRow {
                    run_id: run_id.clone(),
                    config_hash: config_hash.clone(),
                    param_p: Some(resolved.p),
                    param_l: Some(cell.hidden_units),
                    param_n: Some(n),
                    metric: metric.into(),
                    value,
                    se,
                    wall_ms: cell.wall_ms,
                });
            };
            match &cell.error {
                None => {
                    push("risk", cell.risk, Some(cell.se));
                    push("gap", cell.gap, Some(cell.se));
                    push("train_loss", cell.train_loss, None);
                }
                Some(_) => push("failed", 1.0, None),
            }
            cells.push(cell);
        }
    }

    let outcome = ConsistencyOutcome {
        config: resolved,
        config_hash,
        minimal_risk,
        cells,
        rows,
        wall_ms: started.elapsed().as_millis() as u64,
    };
    if let Some(dir) = &cfg.out_dir {
        write_outputs(
            dir,
            KIND_CONSISTENCY,
            &outcome.config_hash,
            cfg.seed,
            &outcome.rows,
            outcome.wall_ms,
        )?;
    }
    Ok(outcome)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleConfig {
    pub kind: String,
    pub n_grid: Vec<usize>,
}

impl ScheduleConfig {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        let mut issues = Vec::new();
        if cfg.kind != KIND_SCHEDULE {
            issues.push(format!("kind must be '{KIND_SCHEDULE}', got '{}'", cfg.kind));
        }
        forbid(&mut issues, KIND_SCHEDULE, "seeds", &cfg.seeds);
        forbid(&mut issues, KIND_SCHEDULE, "distribution", &cfg.distribution);
        forbid(&mut issues, KIND_SCHEDULE, "p", &cfg.p);
        forbid(&mut issues, KIND_SCHEDULE, "p_grid", &cfg.p_grid);
        forbid(&mut issues, KIND_SCHEDULE, "l_grid", &cfg.l_grid);
        forbid(&mut issues, KIND_SCHEDULE, "alpha", &cfg.alpha);
        forbid(&mut issues, KIND_SCHEDULE, "n_train", &cfg.n_train);
        forbid(&mut issues, KIND_SCHEDULE, "n_test", &cfg.n_test);
        forbid(&mut issues, KIND_SCHEDULE, "clip_radius", &cfg.clip_radius);
        if cfg.train.is_some() {
            issues.push(format!("'train' is not used by {KIND_SCHEDULE}"));
        }
        let resolved = ScheduleConfig {
            kind: KIND_SCHEDULE.into(),
            n_grid: cfg.n_grid.clone().unwrap_or_else(|| {
                (3..=9).map(|e| 10usize.pow(e)).collect()
            }),
        };
        check_grid(&mut issues, "n_grid", &resolved.n_grid);
        if issues.is_empty() {
            Ok(resolved)
        } else {
            Err(config_issues(issues))
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ScheduleRow {
    pub n: usize,
    pub hidden_units: usize,
    pub alpha: f64,
    pub growth_diagnostic: f64,
    pub tail_diagnostic: f64,
}

#[derive(Clone, Debug)]
pub struct ScheduleOutcome {
    pub config: ScheduleConfig,
    pub config_hash: String,
    pub table: Vec<ScheduleRow>,
    /// Whether the growth diagnostic decreases strictly past its peak.
    pub growth_ok: bool,
    pub tail_ok: bool,
    pub rows: Vec<ResultRow>,
    pub wall_ms: u64,
}

/// True when the sequence decreases strictly after its (first) maximum.
fn eventually_decreasing(values: &[f64]) -> bool {
    if values.len() <= 1 {
        return true;
    }
    let peak = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("diagnostics are finite"))
        .map(|(i, _)| i)
        .unwrap_or(0);
    // max_by returns the last maximum; find the first.
    let peak = values
        .iter()
        .position(|&v| v == values[peak])
        .unwrap_or(peak);
    if peak == values.len() - 1 {
        return false;
    }
    values[peak..].windows(2).all(|w| w[1] < w[0])
}

/// Evaluate the schedule and its two hypothesis diagnostics over a grid.
pub fn run_schedule_check(cfg: &ExperimentConfig) -> Result<ScheduleOutcome> {
    let started = Instant::now();
    let resolved = ScheduleConfig::resolve(cfg)?;
    let config_hash = ingest::canonical_hash(&resolved);

    let mut table = Vec::new();
    let mut rows = Vec::new();
    for &n in &resolved.n_grid {
        let plan = schedule(n)?;
        let row = ScheduleRow {
            n,
            hidden_units: plan.hidden_units,
            alpha: plan.alpha,
            growth_diagnostic: plan.growth_diagnostic(),
            tail_diagnostic: plan.tail_diagnostic(),
        };
        let mut push = |metric: &str, value: f64| {
            rows.push(ResultRow {
                run_id: "schedule".into(),
                config_hash: config_hash.clone(),
                param_p: None,
                param_l: Some(row.hidden_units),
                param_n: Some(n),
                metric: metric.into(),
                value,
                se: None,
                wall_ms: 0,
            });
        };
        push("hidden_units", row.hidden_units as f64);
        push("alpha", row.alpha);
        push("growth_diagnostic", row.growth_diagnostic);
        push("tail_diagnostic", row.tail_diagnostic);
        table.push(row);
    }
    let growth: Vec<f64> = table.iter().map(|r| r.growth_diagnostic).collect();
    let tail: Vec<f64> = table.iter().map(|r| r.tail_diagnostic).collect();

    let outcome = ScheduleOutcome {
        config: resolved,
        config_hash,
        growth_ok: eventually_decreasing(&growth),
        tail_ok: eventually_decreasing(&tail),
        table,
        rows,
        wall_ms: started.elapsed().as_millis() as u64,
    };
    if let Some(dir) = &cfg.out_dir {
        write_outputs(
            dir,
            KIND_SCHEDULE,
            &outcome.config_hash,
            cfg.seed,
            &outcome.rows,
            outcome.wall_ms,
        )?;
    }
    Ok(outcome)
}

fn write_outputs(
    dir: &Path,
    kind: &str,
    config_hash: &str,
    seed: u64,
    rows: &[ResultRow],
    wall_ms: u64,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    ingest::save_results(dir.join("results.csv"), rows)?;
    ingest::save_json(
        dir.join("run-meta.json"),
        &RunMeta {
            kind: kind.into(),
            config_hash: config_hash.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_ms,
        },
    )?;
    Ok(())
}

/// Row-wise equality of everything the harness guarantees to reproduce:
/// all fields except the wall-clock measurement, floats compared by bits.
pub fn tables_match(a: &[ResultRow], b: &[ResultRow]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.run_id == y.run_id
                && x.config_hash == y.config_hash
                && x.param_p == y.param_p
                && x.param_l == y.param_l
                && x.param_n == y.param_n
                && x.metric == y.metric
                && x.value.to_bits() == y.value.to_bits()
                && x.se.map(f64::to_bits) == y.se.map(f64::to_bits)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::TargetSpec;

    fn sqnorm_distribution() -> DistributionSpec {
        DistributionSpec {
            k_max: 10,
            s: 1.5,
            noise_sd: 0.0,
            target: TargetSpec {
                kind: "sqnorm".into(),
                w: None,
                scale: None,
            },
            seed: 0,
        }
    }

    #[test]
    fn approx_defaults_resolve() {
        let cfg = ExperimentConfig {
            kind: KIND_APPROX.into(),
            distribution: Some(sqnorm_distribution()),
            ..ExperimentConfig::default()
        };
        let resolved = ApproxConfig::resolve(&cfg).unwrap();
        assert_eq!(resolved.p_grid, vec![2, 4, 8]);
        assert_eq!(resolved.l_grid, vec![2, 4, 16]);
        assert_eq!(resolved.n_train, 2000);
        assert_eq!(resolved.n_test, 500);
        assert_eq!(resolved.alpha, 3000.0);
        assert_eq!(resolved.clip_radius, 3.0);
        assert_eq!(resolved.distribution.noise_sd, 0.0);
    }

    #[test]
    fn approx_validation_collects_issues() {
        let cfg = ExperimentConfig {
            kind: KIND_APPROX.into(),
            distribution: Some(sqnorm_distribution()),
            p_grid: Some(vec![4, 2]),
            l_grid: Some(vec![]),
            alpha: Some(-1.0),
            n_grid: Some(vec![100]),
            ..ExperimentConfig::default()
        };
        match ApproxConfig::resolve(&cfg) {
            Err(Error::Config { issues }) => {
                let joined = issues.join("\n");
                assert!(joined.contains("p_grid"), "{joined}");
                assert!(joined.contains("l_grid"), "{joined}");
                assert!(joined.contains("alpha"), "{joined}");
                assert!(joined.contains("n_grid"), "{joined}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn consistency_defaults_resolve() {
        let cfg = ExperimentConfig {
            kind: KIND_CONSISTENCY.into(),
            seed: 3,
            distribution: Some(sqnorm_distribution()),
            ..ExperimentConfig::default()
        };
        let resolved = ConsistencyConfig::resolve(&cfg).unwrap();
        assert_eq!(resolved.p, 5);
        assert_eq!(resolved.n_grid, vec![100, 400, 1600, 6400]);
        assert_eq!(resolved.n_test, 100_000);
        assert_eq!(resolved.seeds, vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn kind_mismatch_is_config_error() {
        let cfg = ExperimentConfig {
            kind: KIND_SCHEDULE.into(),
            distribution: Some(sqnorm_distribution()),
            ..ExperimentConfig::default()
        };
        assert!(ApproxConfig::resolve(&cfg).is_err());
        assert!(ConsistencyConfig::resolve(&cfg).is_err());
    }

    #[test]
    fn config_hash_ignores_out_dir_and_is_stable() {
        let make = |out: Option<&str>| ExperimentConfig {
            kind: KIND_SCHEDULE.into(),
            n_grid: Some(vec![10, 100]),
            out_dir: out.map(Into::into),
            ..ExperimentConfig::default()
        };
        let a = run_schedule_check(&make(None)).unwrap();
        let dir = std::env::temp_dir().join(format!("fmlp-harness-{}", std::process::id()));
        let b = run_schedule_check(&make(dir.to_str())).unwrap();
        assert_eq!(a.config_hash, b.config_hash);
        assert!(dir.join("results.csv").is_file());
        assert!(dir.join("run-meta.json").is_file());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn schedule_check_table() {
        let cfg = ExperimentConfig {
            kind: KIND_SCHEDULE.into(),
            n_grid: Some(vec![1, 10, 100, 10_000, 1_000_000]),
            ..ExperimentConfig::default()
        };
        let outcome = run_schedule_check(&cfg).unwrap();
        assert_eq!(outcome.table[0].hidden_units, 1);
        assert_eq!(outcome.table[0].alpha, 1.0);
        let row_1e4 = &outcome.table[3];
        assert_eq!(row_1e4.hidden_units, 10);
        assert!((row_1e4.alpha - 3.1622776601683795).abs() < 1e-12);
        assert!(outcome.growth_ok);
        assert!(outcome.tail_ok);
        assert_eq!(outcome.rows.len(), 4 * outcome.table.len());
    }

    #[test]
    fn eventually_decreasing_cases() {
        assert!(eventually_decreasing(&[1.0]));
        assert!(eventually_decreasing(&[3.0, 2.0, 1.0]));
        assert!(eventually_decreasing(&[1.0, 5.0, 4.0, 2.0]));
        assert!(!eventually_decreasing(&[1.0, 2.0]));
        assert!(!eventually_decreasing(&[5.0, 4.0, 4.5]));
        assert!(!eventually_decreasing(&[2.0, 2.0]));
    }

    #[test]
    fn train_and_test_streams_are_disjoint() {
        let dist = FunctionalDistribution::from_spec(&sqnorm_distribution()).unwrap();
        let train0 = dist.sample_coefficients("approx-train", 0);
        let test0 = dist.sample_coefficients("approx-test", 0);
        assert_ne!(train0, test0);
        let data_train = dist.sample_coefficients("data-n100", 0);
        let risk_test = dist.sample_coefficients("test", 0);
        assert_ne!(data_train, risk_test);
    }

    #[test]
    fn clip_scales_into_ball() {
        let clipped = clip_to_ball(vec![3.0, 4.0], 1.0);
        let norm = clipped.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((clipped[0] / clipped[1] - 0.75).abs() < 1e-12);
        let kept = clip_to_ball(vec![0.3, 0.4], 1.0);
        assert_eq!(kept, vec![0.3, 0.4]);
    }

    #[test]
    fn tables_match_ignores_wall_only() {
        let row = ResultRow {
            run_id: "r".into(),
            config_hash: "h".into(),
            param_p: Some(1),
            param_l: None,
            param_n: None,
            metric: "m".into(),
            value: 0.5,
            se: None,
            wall_ms: 10,
        };
        let mut other = row.clone();
        other.wall_ms = 99;
        assert!(tables_match(&[row.clone()], &[other.clone()]));
        other.value = f64::from_bits(row.value.to_bits() + 1);
        assert!(!tables_match(&[row], &[other]));
    }
}
