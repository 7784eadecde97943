//! Sweep CSV and key=value sidecar files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use betadelta_core::experiment::{AggregateReport, TrialReport, TrialStatus};

use crate::error::CliError;
use crate::format::real;

pub const CSV_HEADER: &str = "beta,g_value,qp_error,qp_residual,qp_k";

/// Keys every sidecar starts with, in this order.
pub const META_KEYS: [&str; 15] = [
    "n",
    "m",
    "k",
    "sigma",
    "sigma_w",
    "delta",
    "seed",
    "lpn_l1",
    "lpn_error",
    "beta_star",
    "beta_best",
    "bound_lower_exact",
    "bound_upper_exact",
    "bound_lower_gauss",
    "bound_upper_gauss",
];

/// Nominal SNR labels for the two noise levels used in the reference
/// experiment. Other noise levels get no label.
pub fn snr_label(sigma_w: f64) -> Option<&'static str> {
    let var = sigma_w * sigma_w;
    if (var - 0.0225).abs() <= 1e-12 {
        Some("30dB")
    } else if (var - 0.2025).abs() <= 1e-12 {
        Some("20dB")
    } else {
        None
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), real)
}

pub fn status_name(s: &TrialStatus) -> &'static str {
    match s {
        TrialStatus::Solved => "solved",
        TrialStatus::Noiseless => "noiseless",
        TrialStatus::Trivial => "trivial",
        TrialStatus::LpnFailed(_) => "not_converged",
    }
}

pub fn trial_csv(r: &TrialReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for i in 0..r.betas.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            real(r.betas[i]),
            opt(r.g_values[i]),
            real(r.qp_errors[i]),
            real(r.qp_residuals[i]),
            r.qp_k[i]
        )
        .unwrap();
    }
    out
}

pub fn trial_meta(r: &TrialReport) -> String {
    let p = &r.params;
    let values = [
        p.n.to_string(),
        p.m.to_string(),
        p.k.to_string(),
        real(p.sigma),
        real(p.sigma_w),
        real(r.delta),
        r.seed.to_string(),
        real(r.lpn_l1),
        real(r.lpn_error),
        opt(r.beta_star),
        opt(r.beta_best),
        opt(r.bounds_exact.map(|b| b.lower)),
        opt(r.bounds_exact.map(|b| b.upper)),
        opt(r.bounds_gaussian.map(|b| b.0)),
        opt(r.bounds_gaussian.map(|b| b.1)),
    ];
    let mut out = String::new();
    for (k, v) in META_KEYS.iter().zip(values) {
        writeln!(out, "{k}={v}").unwrap();
    }
    writeln!(out, "status={}", status_name(&r.status)).unwrap();
    writeln!(out, "snr_label={}", snr_label(p.sigma_w).unwrap_or("none")).unwrap();
    writeln!(out, "duality_gap={}", opt(r.duality_gap)).unwrap();
    writeln!(out, "boundary_gap={}", opt(r.boundary_gap)).unwrap();
    writeln!(out, "boundary_hit={}", r.boundary_hit).unwrap();
    writeln!(out, "best_in_bounds={}", r.best_in_bounds).unwrap();
    writeln!(
        out,
        "support_size={}",
        r.x_lpn.iter().filter(|v| **v != 0.0).count()
    )
    .unwrap();
    out
}

pub fn aggregate_csv(a: &AggregateReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for i in 0..a.betas.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            real(a.betas[i]),
            opt(a.mean_g_curve[i]),
            real(a.mean_qp_error_curve[i]),
            real(a.mean_qp_residual_curve[i]),
            real(a.mean_qp_k_curve[i])
        )
        .unwrap();
    }
    out
}

/// Same keys as a trial sidecar; per-trial quantities are means and `seed`
/// is the master seed.
pub fn aggregate_meta(a: &AggregateReport, master_seed: u64) -> String {
    let p = &a.params;
    let values = [
        p.n.to_string(),
        p.m.to_string(),
        p.k.to_string(),
        real(p.sigma),
        real(p.sigma_w),
        real(a.delta),
        master_seed.to_string(),
        real(a.mean_lpn_l1),
        real(a.mean_lpn_error),
        real(a.mean_beta_star),
        real(a.mean_beta_best),
        real(a.mean_bound_lower_exact),
        real(a.mean_bound_upper_exact),
        opt(a.bounds_gaussian.map(|b| b.0)),
        opt(a.bounds_gaussian.map(|b| b.1)),
    ];
    let mut out = String::new();
    for (k, v) in META_KEYS.iter().zip(values) {
        writeln!(out, "{k}={v}").unwrap();
    }
    writeln!(out, "trials={}", a.trial_count).unwrap();
    writeln!(out, "snr_label={}", snr_label(p.sigma_w).unwrap_or("none")).unwrap();
    writeln!(out, "bounds_coverage_rate={}", real(a.bounds_coverage_rate)).unwrap();
    out
}

/// `foo.csv` -> `foo.meta`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Parses a sidecar into ordered key/value pairs.
pub fn parse_meta(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
