//! Deterministic file output helpers: atomic writes and the CSV emitters
//! shared by the sim and analyze commands.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use sotto_core::sim::{MessageMetrics, SimMetrics};

/// Writes via a temp file and rename so failed runs never leave a partial
/// artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Reach curve CSV for one tracked message:
/// `t_seconds,reach_fraction,mean_priority` rows plus a `# t90_seconds=`
/// summary line.
pub fn reach_csv(metrics: &SimMetrics, message: &MessageMetrics) -> String {
    let mut out = String::from("t_seconds,reach_fraction,mean_priority\n");
    for (step, (reach, mean)) in message
        .reach
        .iter()
        .zip(message.mean_priority.iter())
        .enumerate()
    {
        let t = step as f64 * metrics.step_s;
        let _ = writeln!(out, "{t},{reach},{mean}");
    }
    match message.t90_s(metrics.step_s) {
        Some(t90) => {
            let _ = writeln!(out, "# t90_seconds={t90}");
        }
        None => {
            let _ = writeln!(out, "# t90_seconds=unreached");
        }
    }
    out
}

/// Two-column CSV for (x, y) curves.
pub fn pairs_csv(header: &str, points: &[(f64, f64)]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

/// Leakage trajectory CSV: `t,L,U,X,ratio`.
pub fn leakage_csv(rows: &[(f64, f64, f64, f64)]) -> String {
    let mut out = String::from("t,L,U,X,ratio\n");
    for &(t, l, u, x) in rows {
        let ratio = if l + u > 0.0 { l / (l + u) } else { 0.0 };
        let _ = writeln!(out, "{t},{l},{u},{x},{ratio}");
    }
    out
}
