//! CSV and JSON exports.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! parsing a file back recovers every value exactly.

use std::fs;
use std::path::Path;

use actlab_core::gradsim::{CompareMode, GradQualityRecord};
use actlab_core::landscape::LandscapeGrid;
use actlab_core::ppo::{CurvePoint, LossTerm};

use crate::error::{AppError, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| AppError::config(format!("{}: '{s}' is not a number", path.display())))
}

fn parse_u64(s: &str, path: &Path) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| AppError::config(format!("{}: '{s}' is not an integer", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> AppError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => AppError::io(path, io),
        other => AppError::config(format!("{}: malformed CSV ({other:?})", path.display())),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    Ok(())
}

/// Writes `rows` under `header` (all fields already formatted).
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// A parsed CSV file: header plus string records.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let header = r
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(|e| csv_err(path, e))?.iter().map(String::from).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column indices for `names`, failing with the list of missing ones.
    pub fn require(&self, path: &Path, names: &[&str]) -> Result<Vec<usize>> {
        let missing: Vec<&str> = names.iter().copied().filter(|n| self.column(n).is_none()).collect();
        if !missing.is_empty() {
            return Err(AppError::config(format!(
                "{}: missing column(s) {}",
                path.display(),
                missing.join(", ")
            )));
        }
        Ok(names.iter().map(|n| self.column(n).expect("checked")).collect())
    }
}

// ---------------------------------------------------------------------------
// Learning curves

pub const CURVE_COLUMNS: [&str; 6] = ["seed", "env_step", "gradient_step", "mean_return", "std_return", "discounted_return"];

pub fn write_curves(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    write_csv(
        path,
        &CURVE_COLUMNS,
        curve.iter().map(|p| {
            vec![
                p.seed.to_string(),
                p.env_step.to_string(),
                p.gradient_step.to_string(),
                fmt_f64(p.mean_return),
                fmt_f64(p.std_return),
                fmt_f64(p.discounted_return),
            ]
        }),
    )
}

pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    let t = Table::read(path)?;
    let c = t.require(path, &CURVE_COLUMNS)?;
    t.rows
        .iter()
        .map(|r| {
            Ok(CurvePoint {
                seed: parse_u64(&r[c[0]], path)?,
                env_step: parse_u64(&r[c[1]], path)?,
                gradient_step: parse_u64(&r[c[2]], path)?,
                mean_return: parse_f64(&r[c[3]], path)?,
                std_return: parse_f64(&r[c[4]], path)?,
                discounted_return: parse_f64(&r[c[5]], path)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Landscape grids

pub const GRID_COLUMNS: [&str; 11] = [
    "row",
    "col",
    "alpha",
    "beta",
    "reward",
    "policy_loss",
    "value_loss",
    "total_loss",
    "n_samples",
    "valid",
    "reward_se",
];

pub fn write_grid(path: &Path, g: &LandscapeGrid) -> Result<()> {
    let res = g.resolution();
    write_csv(
        path,
        &GRID_COLUMNS,
        (0..res * res).map(|k| {
            let (row, col) = (k / res, k % res);
            vec![
                row.to_string(),
                col.to_string(),
                fmt_f64(g.coordinates[col]),
                fmt_f64(g.coordinates[row]),
                fmt_f64(g.reward[k]),
                fmt_f64(g.policy_loss[k]),
                fmt_f64(g.value_loss[k]),
                fmt_f64(g.total_loss[k]),
                g.n_samples[k].to_string(),
                (g.valid[k] as u8).to_string(),
                fmt_f64(g.reward_se[k]),
            ]
        }),
    )
}

/// Grid metadata written next to `grid.csv`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GridMeta {
    pub checkpoint: String,
    pub env_step: u64,
    pub config: actlab_core::landscape::LandscapeConfig,
    pub coordinates: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub setup: actlab_core::ppo::TrainSetup,
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| AppError::Other(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| AppError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

/// One surface of a grid CSV as a dense row-major array plus validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSurface {
    pub resolution: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Reads column `surface` of a grid CSV. Every `(row, col)` must be present
/// exactly once; missing cells are listed in the error.
pub fn read_grid_surface(path: &Path, surface: &str) -> Result<GridSurface> {
    let t = Table::read(path)?;
    let c = t.require(path, &["row", "col", surface, "valid"])?;
    let n = t.rows.len();
    let res = (n as f64).sqrt().round() as usize;
    let mut max_index = 0;
    let mut cells = Vec::with_capacity(n);
    for r in &t.rows {
        let row = parse_u64(&r[c[0]], path)? as usize;
        let col = parse_u64(&r[c[1]], path)? as usize;
        max_index = max_index.max(row).max(col);
        cells.push((row, col, parse_f64(&r[c[2]], path)?, r[c[3]].trim() == "1"));
    }
    let res = res.max(max_index + 1);
    let mut values = vec![f64::NAN; res * res];
    let mut valid = vec![false; res * res];
    let mut seen = vec![false; res * res];
    for (row, col, v, ok) in cells {
        let k = row * res + col;
        if seen[k] {
            return Err(AppError::config(format!("{}: cell ({row},{col}) appears twice", path.display())));
        }
        seen[k] = true;
        values[k] = v;
        valid[k] = ok;
    }
    let missing: Vec<String> = (0..res * res)
        .filter(|&k| !seen[k])
        .map(|k| format!("({},{})", k / res, k % res))
        .collect();
    if !missing.is_empty() {
        return Err(AppError::config(format!(
            "{}: missing cells {}",
            path.display(),
            missing.join(" ")
        )));
    }
    Ok(GridSurface {
        resolution: res,
        values,
        valid,
    })
}

// ---------------------------------------------------------------------------
// Gradient-quality records

pub const RECORD_COLUMNS: [&str; 11] = [
    "checkpoint",
    "env_step",
    "term",
    "batch_size",
    "mean_cos",
    "std_cos",
    "n",
    "oracle_norm",
    "gradient_step",
    "mode",
    "degenerate",
];

fn mode_name(m: CompareMode) -> &'static str {
    match m {
        CompareMode::Oracle => "oracle",
        CompareMode::Pairwise => "pairwise",
    }
}

pub fn write_records(path: &Path, records: &[GradQualityRecord]) -> Result<()> {
    write_csv(
        path,
        &RECORD_COLUMNS,
        records.iter().map(|r| {
            vec![
                r.checkpoint.clone(),
                r.env_step.to_string(),
                r.term.name().to_string(),
                r.batch_size.to_string(),
                fmt_f64(r.mean_cos),
                fmt_f64(r.std_cos),
                r.n.to_string(),
                r.oracle_norm.map(fmt_f64).unwrap_or_default(),
                r.gradient_step.to_string(),
                mode_name(r.mode).to_string(),
                r.degenerate.to_string(),
            ]
        }),
    )
}

pub fn read_records(path: &Path) -> Result<Vec<GradQualityRecord>> {
    let t = Table::read(path)?;
    let c = t.require(path, &RECORD_COLUMNS)?;
    t.rows
        .iter()
        .map(|r| {
            let term = LossTerm::ALL
                .into_iter()
                .find(|t| t.name() == r[c[2]])
                .ok_or_else(|| AppError::config(format!("{}: unknown term '{}'", path.display(), r[c[2]])))?;
            let mode = match r[c[9]].as_str() {
                "oracle" => CompareMode::Oracle,
                "pairwise" => CompareMode::Pairwise,
                other => return Err(AppError::config(format!("{}: unknown mode '{other}'", path.display()))),
            };
            Ok(GradQualityRecord {
                checkpoint: r[c[0]].clone(),
                env_step: parse_u64(&r[c[1]], path)?,
                term,
                batch_size: parse_u64(&r[c[3]], path)? as usize,
                mean_cos: parse_f64(&r[c[4]], path)?,
                std_cos: parse_f64(&r[c[5]], path)?,
                n: parse_u64(&r[c[6]], path)? as usize,
                oracle_norm: if r[c[7]].is_empty() { None } else { Some(parse_f64(&r[c[7]], path)?) },
                gradient_step: parse_u64(&r[c[8]], path)?,
                mode,
                degenerate: parse_u64(&r[c[10]], path)? as usize,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE, 123_456_789.123_456_79] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(!s.contains(','));
        }
    }

    #[test]
    fn curves_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let pts = vec![
            CurvePoint {
                seed: 1,
                env_step: 2048,
                gradient_step: 320,
                mean_return: -1234.567891234,
                std_return: 0.1,
                discounted_return: -100.0 / 3.0,
            };
            3
        ];
        write_curves(&p, &pts).unwrap();
        assert_eq!(read_curves(&p).unwrap(), pts);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("seed,env_step,gradient_step,mean_return,std_return,discounted_return\n"));
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let recs = vec![
            GradQualityRecord {
                checkpoint: "ckpt_000002048".into(),
                env_step: 2048,
                gradient_step: 320,
                term: LossTerm::Value,
                batch_size: 64,
                mode: CompareMode::Oracle,
                mean_cos: 0.123,
                std_cos: 0.01,
                n: 200,
                oracle_norm: Some(3.5),
                degenerate: 0,
            },
            GradQualityRecord {
                mode: CompareMode::Pairwise,
                oracle_norm: None,
                term: LossTerm::Total,
                ..recs_base()
            },
        ];
        write_records(&p, &recs).unwrap();
        assert_eq!(read_records(&p).unwrap(), recs);
    }

    fn recs_base() -> GradQualityRecord {
        GradQualityRecord {
            checkpoint: "x".into(),
            env_step: 1,
            gradient_step: 1,
            term: LossTerm::Policy,
            batch_size: 1,
            mode: CompareMode::Oracle,
            mean_cos: -0.5,
            std_cos: 0.0,
            n: 2,
            oracle_norm: None,
            degenerate: 1,
        }
    }

    #[test]
    fn missing_grid_cells_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let rows = (0..9)
            .filter(|k| *k != 4 && *k != 7)
            .map(|k| vec![(k / 3).to_string(), (k % 3).to_string(), fmt_f64(k as f64), "1".into()]);
        write_csv(&p, &["row", "col", "reward", "valid"], rows).unwrap();
        let err = read_grid_surface(&p, "reward").unwrap_err().to_string();
        assert!(err.contains("(1,1)") && err.contains("(2,1)"), "{err}");
        let err = read_grid_surface(&p, "nope").unwrap_err().to_string();
        assert!(err.contains("nope"));
    }
}
