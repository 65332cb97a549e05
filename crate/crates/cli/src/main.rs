//! `fmlp`: data generation, projection, training, prediction and the
//! experiment sweeps as subcommands. Exit codes: 0 on success, 1 for
//! validation or configuration problems, 2 for runtime failures.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use fmlp_core::basis::BasisSpec;
use fmlp_core::datagen::{
    make_dataset, DistributionSpec, FunctionalDistribution, GridKind, ProjectionMode,
};
use fmlp_core::error::{Error, Result};
use fmlp_core::harness::{
    run_approx_sweep, run_consistency_sweep, run_schedule_check, KIND_SCHEDULE,
};
use fmlp_core::ingest;
use fmlp_core::mlp::{empirical_rmse, schedule, train, CoordDataset, TrainConfig};
use fmlp_core::projection::{project_sampled, EvaluableFunction, SampledFunction};

#[derive(Parser)]
#[command(name = "fmlp", version, about = "Functional-input perceptrons over basis projections")]
struct Cli {
    /// Thread count for sweep and data-generation parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw curves from a distribution and write coordinates and targets.
    GenData {
        /// Distribution description (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for coords.csv, targets.csv, distribution.json.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the distribution file.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of curves.
        #[arg(long)]
        n: usize,
        /// Projection dimension; defaults to the distribution's K_max.
        #[arg(long)]
        p: Option<usize>,
        /// Observe each curve at this many points and project by least
        /// squares instead of projecting exactly.
        #[arg(long)]
        samples: Option<usize>,
        /// Observation grid when --samples is set: uniform or random.
        #[arg(long, default_value = "uniform")]
        grid: String,
        /// Also write curves.csv with each curve observed at this many
        /// uniform points.
        #[arg(long)]
        curve_points: Option<usize>,
    },
    /// Project sampled curves onto a basis by least squares.
    Project {
        /// Basis description (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Curves to project (CSV with header id,x,value).
        #[arg(long)]
        curves: PathBuf,
        /// Output directory for coords.csv and residuals.csv.
        #[arg(long)]
        out: PathBuf,
        /// Tikhonov regularization; 0 is plain least squares.
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
    },
    /// Fit a perceptron to projected coordinates.
    Train {
        /// Optional training configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Coordinates (CSV with header id,k1..kp).
        #[arg(long)]
        coords: PathBuf,
        /// Targets (CSV with header id,value).
        #[arg(long)]
        targets: PathBuf,
        /// Output directory for model.json and train-report.json.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the training configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Hidden units; defaults with --alpha from the sample-size schedule.
        #[arg(long)]
        hidden_units: Option<usize>,
        /// Output weight budget; defaults with --hidden-units from the schedule.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Evaluate a trained model on coordinates.
    Predict {
        /// Model file (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Coordinates (CSV with header id,k1..kp).
        #[arg(long)]
        coords: PathBuf,
        /// Output directory for predictions.csv.
        #[arg(long)]
        out: PathBuf,
        /// Optional targets; reports RMSE against them when given.
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Run the approximation sweep over a (p, L) grid.
    ExpApprox {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides out_dir in the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the consistency sweep over a sample-size grid.
    ExpConsistency {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides out_dir in the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the width and budget schedule and its diagnostics.
    CheckSchedule {
        /// Experiment configuration (JSON); defaults to the built-in grid.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; overrides out_dir in the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // configuration problem.
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: cannot configure {workers} workers: {e}");
            std::process::exit(1);
        }
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData {
            config,
            out,
            seed,
            n,
            p,
            samples,
            grid,
            curve_points,
        } => gen_data(&config, &out, seed, n, p, samples, &grid, curve_points),
        Command::Project {
            config,
            curves,
            out,
            ridge,
        } => project(&config, &curves, &out, ridge),
        Command::Train {
            config,
            coords,
            targets,
            out,
            seed,
            hidden_units,
            alpha,
        } => train_cmd(config.as_deref(), &coords, &targets, &out, seed, hidden_units, alpha),
        Command::Predict {
            model,
            coords,
            out,
            targets,
        } => predict(&model, &coords, &out, targets.as_deref()),
        Command::ExpApprox { config, out, seed } => exp_approx(&config, out, seed),
        Command::ExpConsistency { config, out, seed } => exp_consistency(&config, out, seed),
        Command::CheckSchedule { config, out } => check_schedule(config.as_deref(), out),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

#[allow(clippy::too_many_arguments)]
fn gen_data(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    n: usize,
    p: Option<usize>,
    samples: Option<usize>,
    grid: &str,
    curve_points: Option<usize>,
) -> Result<()> {
    let mut spec: DistributionSpec = ingest::load_json(config)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let dist = FunctionalDistribution::from_spec(&spec)?;
    let p = p.unwrap_or_else(|| dist.k_max());
    let mode = match samples {
        None => ProjectionMode::Exact { p },
        Some(m) => {
            let grid = match grid {
                "uniform" => GridKind::Uniform,
                "random" => GridKind::Random,
                other => {
                    return Err(Error::Config {
                        issues: vec![format!("unknown grid '{other}', expected uniform or random")],
                    })
                }
            };
            ProjectionMode::Sampled { p, m, grid }
        }
    };
    let dataset = make_dataset(&dist, n, &mode)?;

    ensure_dir(out)?;
    let coords: Vec<(String, Vec<f64>)> = (0..dataset.coords.len())
        .map(|i| {
            let row = dataset.coords.inputs().row(i).iter().copied().collect();
            (format!("{i}"), row)
        })
        .collect();
    let targets: Vec<(String, f64)> = dataset
        .coords
        .targets()
        .iter()
        .enumerate()
        .map(|(i, &y)| (format!("{i}"), y))
        .collect();
    ingest::save_coords(out.join("coords.csv"), &coords)?;
    ingest::save_targets(out.join("targets.csv"), &targets)?;
    ingest::save_json(out.join("distribution.json"), &dist.spec())?;
    if let Some(points) = curve_points {
        let xs: Vec<f64> = if points == 1 {
            vec![0.5]
        } else {
            (0..points).map(|j| j as f64 / (points - 1) as f64).collect()
        };
        let basis = dist.generation_basis();
        let mut curves = Vec::with_capacity(n);
        for (i, xi) in dataset.xi.iter().enumerate() {
            let g = EvaluableFunction::from_expansion(basis, xi)?;
            let values: Vec<f64> = xs.iter().map(|&x| g.value(x)).collect();
            curves.push(SampledFunction::new(format!("{i}"), xs.clone(), values)?);
        }
        ingest::save_curves(out.join("curves.csv"), &curves)?;
    }
    println!(
        "wrote {n} curves at p = {p} to {}",
        out.display()
    );
    Ok(())
}

fn project(config: &Path, curves: &Path, out: &Path, ridge: f64) -> Result<()> {
    let spec: BasisSpec = ingest::load_json(config)?;
    let basis = spec.build()?;
    let sampled = ingest::load_curves(curves)?;
    if sampled.is_empty() {
        return Err(Error::EmptyData);
    }

    let mut coords = Vec::with_capacity(sampled.len());
    let mut residuals = Vec::with_capacity(sampled.len());
    let mut values = vec![0.0; basis.dim()];
    for curve in &sampled {
        let c = project_sampled(curve, &basis, ridge)?;
        // Root mean square misfit at the observation points.
        let mut acc = 0.0;
        for (&x, &v) in curve.xs().iter().zip(curve.values()) {
            basis.eval_all(x, &mut values);
            let fit: f64 = values.iter().zip(&c.coords).map(|(b, c)| b * c).sum();
            acc += (fit - v) * (fit - v);
        }
        residuals.push((curve.id().to_string(), (acc / curve.len() as f64).sqrt()));
        coords.push((curve.id().to_string(), c.coords));
    }

    ensure_dir(out)?;
    ingest::save_coords(out.join("coords.csv"), &coords)?;
    ingest::save_targets(out.join("residuals.csv"), &residuals)?;
    let worst = residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    println!(
        "projected {} curves onto {} (worst sample residual {worst:.3e})",
        coords.len(),
        basis.id()
    );
    Ok(())
}

fn train_cmd(
    config: Option<&Path>,
    coords: &Path,
    targets: &Path,
    out: &Path,
    seed: Option<u64>,
    hidden_units: Option<usize>,
    alpha: Option<f64>,
) -> Result<()> {
    let mut cfg: TrainConfig = match config {
        Some(path) => ingest::load_json(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let data = load_dataset(coords, targets)?;
    let (hidden_units, alpha) = match (hidden_units, alpha) {
        (Some(l), Some(a)) => (l, a),
        (None, None) => {
            let plan = schedule(data.len())?;
            println!(
                "schedule for n = {}: L = {}, alpha = {:.6}",
                data.len(),
                plan.hidden_units,
                plan.alpha
            );
            (plan.hidden_units, plan.alpha)
        }
        _ => {
            return Err(Error::Config {
                issues: vec![
                    "--hidden-units and --alpha must be given together (or both omitted \
                     to use the schedule)"
                        .into(),
                ],
            })
        }
    };

    let (model, report) = train(&data, hidden_units, alpha, &cfg)?;
    let rmse = empirical_rmse(&model, &data)?;
    ensure_dir(out)?;
    ingest::save_model(out.join("model.json"), &model)?;
    let summary = serde_json::json!({
        "best_restart": report.best_restart,
        "final_loss": report.final_loss,
        "train_rmse": rmse,
        "restarts": report
            .restarts
            .iter()
            .map(|r| {
                serde_json::json!({
                    "restart": r.restart,
                    "iterations": r.iterations,
                    "final_loss": r.final_loss,
                    "max_output_l1": r.max_output_l1,
                })
            })
            .collect::<Vec<_>>(),
    });
    ingest::save_json(out.join("train-report.json"), &summary)?;
    println!(
        "trained L = {hidden_units}, alpha = {alpha}: loss {:.6e}, rmse {rmse:.6e} \
         (best restart {})",
        report.final_loss, report.best_restart
    );
    Ok(())
}

fn load_dataset(coords: &Path, targets: &Path) -> Result<CoordDataset> {
    let coord_rows = ingest::load_coords(coords)?;
    let target_rows = ingest::load_targets(targets)?;
    if coord_rows.len() != target_rows.len() {
        return Err(Error::ShapeMismatch {
            expected: coord_rows.len(),
            got: target_rows.len(),
        });
    }
    let mut rows = Vec::with_capacity(coord_rows.len());
    let mut ys = Vec::with_capacity(coord_rows.len());
    for ((cid, row), (tid, y)) in coord_rows.into_iter().zip(target_rows) {
        if cid != tid {
            return Err(Error::Config {
                issues: vec![format!(
                    "coordinate id '{cid}' does not match target id '{tid}'"
                )],
            });
        }
        rows.push(row);
        ys.push(y);
    }
    let p = rows.first().map(|r| r.len()).unwrap_or(0);
    CoordDataset::from_rows(&rows, &ys, format!("fourier-{p}"))
}

fn predict(model: &Path, coords: &Path, out: &Path, targets: Option<&Path>) -> Result<()> {
    let model = ingest::load_model(model)?;
    let rows = ingest::load_coords(coords)?;
    let mut predictions = Vec::with_capacity(rows.len());
    for (id, row) in &rows {
        predictions.push((id.clone(), model.forward(row)?));
    }
    ensure_dir(out)?;
    ingest::save_targets(out.join("predictions.csv"), &predictions)?;
    match targets {
        Some(path) => {
            let truth = ingest::load_targets(path)?;
            if truth.len() != predictions.len() {
                return Err(Error::ShapeMismatch {
                    expected: predictions.len(),
                    got: truth.len(),
                });
            }
            let mse = predictions
                .iter()
                .zip(&truth)
                .map(|((_, p), (_, y))| (p - y) * (p - y))
                .sum::<f64>()
                / predictions.len() as f64;
            println!(
                "predicted {} rows, rmse {:.6e}",
                predictions.len(),
                mse.sqrt()
            );
        }
        None => println!("predicted {} rows", predictions.len()),
    }
    Ok(())
}

fn load_experiment(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<ingest::ExperimentConfig> {
    let mut cfg = ingest::load_experiment_config(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if out.is_some() {
        cfg.out_dir = out;
    }
    Ok(cfg)
}

fn exp_approx(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let cfg = load_experiment(config, out, seed)?;
    let outcome = run_approx_sweep(&cfg)?;
    println!("approximation sweep {}", outcome.config_hash);
    for cell in &outcome.cells {
        match &cell.error {
            None => println!(
                "  p = {:>3}  L = {:>3}  sup {:.4e}  rmse {:.4e}  loss {:.4e}  [{} ms]",
                cell.p, cell.hidden_units, cell.sup_error, cell.rmse, cell.train_loss, cell.wall_ms
            ),
            Some(e) => println!("  p = {:>3}  L = {:>3}  failed: {e}", cell.p, cell.hidden_units),
        }
    }
    report_written(cfg.out_dir.as_deref(), outcome.wall_ms);
    Ok(())
}

fn exp_consistency(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let cfg = load_experiment(config, out, seed)?;
    let outcome = run_consistency_sweep(&cfg)?;
    println!(
        "consistency sweep {} (minimal risk {:.4})",
        outcome.config_hash, outcome.minimal_risk
    );
    for cell in &outcome.cells {
        match &cell.error {
            None => println!(
                "  seed {:>3}  n = {:>6}  L = {:>2}  alpha {:.3}  risk {:.4} ± {:.4}  gap {:.4}  [{} ms]",
                cell.seed, cell.n, cell.hidden_units, cell.alpha, cell.risk, cell.se, cell.gap,
                cell.wall_ms
            ),
            Some(e) => println!("  seed {:>3}  n = {:>6}  failed: {e}", cell.seed, cell.n),
        }
    }
    report_written(cfg.out_dir.as_deref(), outcome.wall_ms);
    Ok(())
}

fn check_schedule(config: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = match config {
        Some(path) => ingest::load_experiment_config(path)?,
        None => ingest::ExperimentConfig {
            kind: KIND_SCHEDULE.into(),
            ..Default::default()
        },
    };
    if out.is_some() {
        cfg.out_dir = out;
    }
    let outcome = run_schedule_check(&cfg)?;
    println!("schedule check {}", outcome.config_hash);
    println!("  {:>12}  {:>4}  {:>10}  {:>12}  {:>12}", "n", "L", "alpha", "growth", "tail");
    for row in &outcome.table {
        println!(
            "  {:>12}  {:>4}  {:>10.4}  {:>12.4e}  {:>12.4e}",
            row.n, row.hidden_units, row.alpha, row.growth_diagnostic, row.tail_diagnostic
        );
    }
    println!(
        "  growth diagnostic eventually decreasing: {}",
        verdict(outcome.growth_ok)
    );
    println!(
        "  tail diagnostic eventually decreasing: {}",
        verdict(outcome.tail_ok)
    );
    report_written(cfg.out_dir.as_deref(), outcome.wall_ms);
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "yes"
    } else {
        "NO"
    }
}

fn report_written(dir: Option<&Path>, wall_ms: u64) {
    match dir {
        Some(dir) => println!("results written to {} [{} ms]", dir.display(), wall_ms),
        None => println!("no output directory set; results not written [{} ms]", wall_ms),
    }
}
