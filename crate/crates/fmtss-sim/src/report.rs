//! CSV results and the run manifest.

use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// One result row; `extra` carries experiment-specific key=value pairs.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub experiment: String,
    pub u: usize,
    pub placement: String,
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub extra: Vec<(String, String)>,
}

impl ResultRow {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// Wilson 95% confidence interval for a binomial proportion.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z = 1.959963984540054f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Render rows to CSV with the standard header.
pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("experiment,u,placement,snr_db,bits,errors,ber,ci_lo,ci_hi,extra\n");
    for row in rows {
        let (lo, hi) = wilson_interval(row.errors, row.bits);
        let extra = row
            .extra
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{}",
            row.experiment,
            row.u,
            row.placement,
            format_snr(row.snr_db),
            row.bits,
            row.errors,
            row.ber(),
            lo,
            hi,
            extra
        );
    }
    out
}

fn format_snr(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Run manifest written next to every CSV.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
    pub rows: usize,
}

pub fn write_outputs(
    out_dir: &Path,
    experiment: &str,
    rows: &[ResultRow],
    config_hash: u64,
    master_seed: u64,
) -> anyhow::Result<std::path::PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{experiment}.csv"));
    std::fs::write(&csv_path, render_csv(rows))?;
    let manifest = Manifest {
        experiment: experiment.to_string(),
        config_hash: format!("{config_hash:016x}"),
        master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        rows: rows.len(),
    };
    std::fs::write(
        out_dir.join(format!("{experiment}.manifest.json")),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(csv_path)
}

/// Interpolate the SNR at which a BER curve crosses a level; the curve is
/// a list of (snr_db, ber) points sorted by SNR. Log-linear interpolation
/// between bracketing points.
pub fn snr_at_ber(curve: &[(f64, f64)], level: f64) -> Option<f64> {
    for w in curve.windows(2) {
        let (s0, b0) = w[0];
        let (s1, b1) = w[1];
        if (b0 >= level && b1 <= level) || (b0 <= level && b1 >= level) {
            if b0 <= 0.0 || b1 <= 0.0 {
                // zero cell: crossing sits between the two grid points
                return Some(if b0 >= level { (s0 + s1) / 2.0 } else { s0 });
            }
            let l0 = b0.ln();
            let l1 = b1.ln();
            let t = if (l1 - l0).abs() < 1e-12 { 0.5 } else { (level.ln() - l0) / (l1 - l0) };
            return Some(s0 + t * (s1 - s0));
        }
    }
    None
}
