//! Trajectory persistence: CSV samples plus a JSON metadata sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SimulationConfig, Trajectory};
use crate::error::{Error, Result};
use crate::num::Real;

pub const TOOL_NAME: &str = "levicsl";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `levicsl/<version>`, embedded in every written artifact.
pub fn tool_tag() -> String {
    format!("{TOOL_NAME}/{TOOL_VERSION}")
}

/// Contents of the `.json` sidecar written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TrajectoryMetadata<T: Real = f64> {
    pub tool: String,
    pub config_digest: String,
    pub seed: u64,
    pub sample_interval_s: T,
    pub burn_in_s: T,
    pub samples: usize,
    pub mode_labels: Vec<String>,
    pub config: Option<SimulationConfig<T>>,
}

/// Sidecar path for a trajectory CSV: `run.csv` → `run.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Renders the trajectory as CSV with header `t_s,x1_m[,x2_m]`, preceded by
/// a comment line carrying the tool tag and config digest.
pub fn trajectory_csv<T: Real>(traj: &Trajectory<T>) -> String {
    let modes = traj.samples.len();
    let mut out = String::with_capacity(32 * (modes + 1) * traj.len() + 128);
    let _ = writeln!(out, "# tool={} config_digest={}", tool_tag(), traj.config_digest);
    out.push_str("t_s");
    for i in 0..modes {
        let _ = write!(out, ",x{}_m", i + 1);
    }
    out.push('\n');
    for k in 0..traj.len() {
        let t = traj.dt * T::from_count(k);
        let _ = write!(out, "{:e}", t.as_f64());
        for s in &traj.samples {
            let _ = write!(out, ",{:e}", s[k].as_f64());
        }
        out.push('\n');
    }
    out
}

/// Writes `path` (CSV) and its JSON sidecar.
pub fn write_trajectory<T: Real>(
    path: &Path,
    traj: &Trajectory<T>,
    config: Option<&SimulationConfig<T>>,
) -> Result<()> {
    fs::write(path, trajectory_csv(traj))?;
    let meta = TrajectoryMetadata {
        tool: tool_tag(),
        config_digest: traj.config_digest.clone(),
        seed: traj.seed,
        sample_interval_s: traj.dt,
        burn_in_s: traj.burn_in,
        samples: traj.len(),
        mode_labels: traj.mode_labels.clone(),
        config: config.cloned(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

/// Parses trajectory CSV text. The sample interval is taken from the first
/// two timestamps; the series must be uniformly sampled.
pub fn parse_trajectory_csv<T: Real>(text: &str) -> Result<Trajectory<T>> {
    let mut digest = String::new();
    let mut header: Option<usize> = None;
    let mut times: Vec<f64> = Vec::new();
    let mut samples: Vec<Vec<T>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for field in comment.split_whitespace() {
                if let Some(d) = field.strip_prefix("config_digest=") {
                    digest = d.to_string();
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some(modes) = header else {
            if cols.first() != Some(&"t_s") || cols.len() < 2 || cols.len() > 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected header t_s,x1_m[,x2_m], got {line:?}",
                    lineno + 1
                )));
            }
            for (i, c) in cols[1..].iter().enumerate() {
                if *c != format!("x{}_m", i + 1) {
                    return Err(Error::Parse(format!("line {}: unexpected column {c:?}", lineno + 1)));
                }
            }
            header = Some(cols.len() - 1);
            samples = vec![Vec::new(); cols.len() - 1];
            continue;
        };
        if cols.len() != modes + 1 {
            return Err(Error::Parse(format!(
                "line {}: expected {} columns, got {}",
                lineno + 1,
                modes + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {s:?}: {e}", lineno + 1)))
        };
        times.push(parse(cols[0])?);
        for (series, c) in samples.iter_mut().zip(&cols[1..]) {
            series.push(T::lit(parse(c)?));
        }
    }
    if header.is_none() {
        return Err(Error::Parse("missing header line".into()));
    }
    if times.len() < 2 {
        return Err(Error::Size {
            needed: 2,
            got: times.len(),
        });
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::Parse(format!("non-increasing timestamps (dt = {dt:e})")));
    }
    let last = *times.last().unwrap_or(&0.0);
    let expected = times[0] + dt * (times.len() - 1) as f64;
    if (last - expected).abs() > 1e-3 * dt {
        return Err(Error::Parse("timestamps are not uniformly spaced".into()));
    }
    let modes = samples.len();
    Ok(Trajectory {
        dt: T::lit(dt),
        samples,
        seed: 0,
        config_digest: digest,
        burn_in: T::zero(),
        mode_labels: (1..=modes).map(|i| format!("x{i}")).collect(),
    })
}

/// Reads a trajectory CSV, filling seed, burn-in and labels from the sidecar
/// when one is present.
pub fn read_trajectory<T: Real>(path: &Path) -> Result<Trajectory<T>> {
    let text = fs::read_to_string(path)?;
    let mut traj = parse_trajectory_csv::<T>(&text)?;
    let side = sidecar_path(path);
    if side.exists() {
        let meta: TrajectoryMetadata<T> = serde_json::from_str(&fs::read_to_string(&side)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", side.display())))?;
        if !traj.config_digest.is_empty() && meta.config_digest != traj.config_digest {
            return Err(Error::Parse(format!(
                "sidecar digest {} does not match trajectory digest {}",
                meta.config_digest, traj.config_digest
            )));
        }
        traj.seed = meta.seed;
        traj.burn_in = meta.burn_in_s;
        traj.config_digest = meta.config_digest;
        if meta.mode_labels.len() == traj.samples.len() {
            traj.mode_labels = meta.mode_labels;
        }
    }
    Ok(traj)
}
