//! File interchange: curves, coordinates, targets and results as CSV;
//! models, bases, distributions and experiment configs as JSON.
//!
//! Floats in CSV files are written in scientific notation with 17
//! significant digits, which round-trips f64 exactly; re-loading a results
//! table therefore reproduces the original values bit for bit.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::DistributionSpec;
use crate::error::{Error, Result};
use crate::mlp::{FmlpModel, ModelSpec, TrainConfig};
use crate::projection::SampledFunction;

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(path: &Path, line: u64, field: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {field} value '{raw}' as a number"),
    })
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    })
}

fn open_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    })
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let headers = reader.headers().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {expected:?}, got {got:?}"),
        });
    }
    Ok(())
}

fn write_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Write curves as long-format CSV with header id,x,value.
pub fn save_curves(path: impl AsRef<Path>, curves: &[SampledFunction]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = open_writer(path)?;
    writer
        .write_record(["id", "x", "value"])
        .map_err(|e| write_error(path, e))?;
    for curve in curves {
        for (&x, &v) in curve.xs().iter().zip(curve.values()) {
            writer
                .write_record([curve.id(), &fmt_f64(x), &fmt_f64(v)])
                .map_err(|e| write_error(path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read curves from long-format CSV. Rows must be grouped by id and each
/// curve's sample points must be strictly increasing.
pub fn load_curves(path: impl AsRef<Path>) -> Result<Vec<SampledFunction>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &["id", "x", "value"])?;

    let mut finished: BTreeSet<String> = BTreeSet::new();
    let mut curves = Vec::new();
    let mut current: Option<(String, Vec<f64>, Vec<f64>)> = None;

    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let id = record[0].to_string();
        let x = parse_f64(path, line, "x", &record[1])?;
        let value = parse_f64(path, line, "value", &record[2])?;

        let start_new = match &current {
            Some((cur_id, _, _)) => *cur_id != id,
            None => true,
        };
        if start_new {
            if let Some((done_id, xs, values)) = current.take() {
                finished.insert(done_id.clone());
                curves.push(SampledFunction::new(done_id, xs, values)?);
            }
            if finished.contains(&id) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("rows for id '{id}' are not contiguous"),
                });
            }
            current = Some((id, vec![x], vec![value]));
        } else if let Some((_, xs, values)) = &mut current {
            xs.push(x);
            values.push(value);
        }
    }
    if let Some((id, xs, values)) = current {
        curves.push(SampledFunction::new(id, xs, values)?);
    }
    if curves.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(curves)
}

/// Write coordinate rows with header id,c1,...,cp.
pub fn save_coords(path: impl AsRef<Path>, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let path = path.as_ref();
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let p = rows[0].1.len();
    let mut writer = open_writer(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((1..=p).map(|k| format!("c{k}")));
    writer
        .write_record(&header)
        .map_err(|e| write_error(path, e))?;
    for (id, coords) in rows {
        if coords.len() != p {
            return Err(Error::ShapeMismatch {
                expected: p,
                got: coords.len(),
            });
        }
        let mut record = vec![id.clone()];
        record.extend(coords.iter().map(|&c| fmt_f64(c)));
        writer
            .write_record(&record)
            .map_err(|e| write_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read coordinate rows; the dimension is taken from the header.
pub fn load_coords(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f64>)>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let fields: Vec<&str> = headers.iter().collect();
    if fields.is_empty() || fields[0] != "id" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header starting with 'id', got {fields:?}"),
        });
    }
    for (k, field) in fields[1..].iter().enumerate() {
        let expected = format!("c{}", k + 1);
        if *field != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected column '{expected}', got '{field}'"),
            });
        }
    }
    let p = fields.len() - 1;
    if p == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "coordinate file has no coordinate columns".into(),
        });
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        if record.len() != p + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, got {}", p + 1, record.len()),
            });
        }
        let id = record[0].to_string();
        let mut coords = Vec::with_capacity(p);
        for k in 0..p {
            coords.push(parse_f64(path, line, &format!("c{}", k + 1), &record[k + 1])?);
        }
        rows.push((id, coords));
    }
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(rows)
}

/// Write targets with header id,y.
pub fn save_targets(path: impl AsRef<Path>, rows: &[(String, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = open_writer(path)?;
    writer
        .write_record(["id", "y"])
        .map_err(|e| write_error(path, e))?;
    for (id, y) in rows {
        writer
            .write_record([id.as_str(), &fmt_f64(*y)])
            .map_err(|e| write_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_targets(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &["id", "y"])?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        if record.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 2 fields, got {}", record.len()),
            });
        }
        rows.push((record[0].to_string(), parse_f64(path, line, "y", &record[1])?));
    }
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(rows)
}

/// One metric from one experiment cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub run_id: String,
    pub config_hash: String,
    pub param_p: Option<usize>,
    pub param_l: Option<usize>,
    pub param_n: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub se: Option<f64>,
    pub wall_ms: u64,
}

pub const RESULTS_HEADER: [&str; 9] = [
    "run_id",
    "config_hash",
    "param_p",
    "param_L",
    "param_n",
    "metric",
    "value",
    "se",
    "wall_ms",
];

pub fn save_results(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = open_writer(path)?;
    writer
        .write_record(RESULTS_HEADER)
        .map_err(|e| write_error(path, e))?;
    let opt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        writer
            .write_record([
                row.run_id.clone(),
                row.config_hash.clone(),
                opt_usize(row.param_p),
                opt_usize(row.param_l),
                opt_usize(row.param_n),
                row.metric.clone(),
                fmt_f64(row.value),
                row.se.map(fmt_f64).unwrap_or_default(),
                row.wall_ms.to_string(),
            ])
            .map_err(|e| write_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &RESULTS_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        if record.len() != RESULTS_HEADER.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!(
                    "expected {} fields, got {}",
                    RESULTS_HEADER.len(),
                    record.len()
                ),
            });
        }
        let parse_opt_usize = |field: &str, raw: &str| -> Result<Option<usize>> {
            let raw = raw.trim();
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse::<usize>().map(Some).map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("cannot parse {field} value '{raw}'"),
            })
        };
        let se = if record[7].trim().is_empty() {
            None
        } else {
            Some(parse_f64(path, line, "se", &record[7])?)
        };
        rows.push(ResultRow {
            run_id: record[0].to_string(),
            config_hash: record[1].to_string(),
            param_p: parse_opt_usize("param_p", &record[2])?,
            param_l: parse_opt_usize("param_L", &record[3])?,
            param_n: parse_opt_usize("param_n", &record[4])?,
            metric: record[5].to_string(),
            value: parse_f64(path, line, "value", &record[6])?,
            se,
            wall_ms: record[8].trim().parse::<u64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("cannot parse wall_ms value '{}'", &record[8]),
            })?,
        });
    }
    Ok(rows)
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn save_model(path: impl AsRef<Path>, model: &FmlpModel) -> Result<()> {
    save_json(path, &model.to_spec())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FmlpModel> {
    let spec: ModelSpec = load_json(path)?;
    FmlpModel::from_spec(&spec)
}

/// SHA-256 over the canonical (sorted-key, compact) JSON serialization.
pub fn canonical_hash<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value)
        .and_then(|v| serde_json::to_string(&v))
        .expect("config serialization cannot fail");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Raw experiment configuration as written by the user. Defaults are
/// resolved per experiment kind by the harness.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: String,
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub distribution: Option<DistributionSpec>,
    pub p: Option<usize>,
    pub p_grid: Option<Vec<usize>>,
    pub l_grid: Option<Vec<usize>>,
    pub n_grid: Option<Vec<usize>>,
    pub alpha: Option<f64>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub clip_radius: Option<f64>,
    pub train: Option<TrainConfig>,
    pub out_dir: Option<PathBuf>,
}

const ROOT_KEYS: &[&str] = &[
    "kind",
    "seed",
    "seeds",
    "distribution",
    "p",
    "p_grid",
    "l_grid",
    "n_grid",
    "alpha",
    "n_train",
    "n_test",
    "clip_radius",
    "train",
    "out_dir",
];
const DISTRIBUTION_KEYS: &[&str] = &["K_max", "s", "noise_sd", "target", "seed"];
const TARGET_KEYS: &[&str] = &["kind", "w", "scale"];
const TRAIN_KEYS: &[&str] = &["restarts", "max_iters", "step", "tolerance", "stall_window", "seed"];

fn collect_unknown_keys(value: &serde_json::Value, issues: &mut Vec<String>) {
    let Some(root) = value.as_object() else {
        issues.push("top level must be a JSON object".into());
        return;
    };
    let check = |obj: &serde_json::Map<String, serde_json::Value>,
                 allowed: &[&str],
                 prefix: &str,
                 issues: &mut Vec<String>| {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                issues.push(format!("unknown key '{prefix}{key}'"));
            }
        }
    };
    check(root, ROOT_KEYS, "", issues);
    if let Some(dist) = root.get("distribution").and_then(|v| v.as_object()) {
        check(dist, DISTRIBUTION_KEYS, "distribution.", issues);
        if let Some(target) = dist.get("target").and_then(|v| v.as_object()) {
            check(target, TARGET_KEYS, "distribution.target.", issues);
        }
    }
    if let Some(train) = root.get("train").and_then(|v| v.as_object()) {
        check(train, TRAIN_KEYS, "train.", issues);
    }
}

/// Parse an experiment config, reporting every unknown key at once.
pub fn load_experiment_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_experiment_config(&text).map_err(|e| match e {
        Error::Config { issues } => Error::Config {
            issues: issues
                .into_iter()
                .map(|i| format!("{}: {i}", path.display()))
                .collect(),
        },
        other => other,
    })
}

pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config {
        issues: vec![format!("not valid JSON: {e}")],
    })?;
    let mut issues = Vec::new();
    collect_unknown_keys(&value, &mut issues);
    if !issues.is_empty() {
        return Err(Error::Config { issues });
    }
    serde_json::from_value(value).map_err(|e| Error::Config {
        issues: vec![e.to_string()],
    })
}

/// Metadata written next to experiment outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_ms: u64,
}
