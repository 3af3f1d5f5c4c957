//! Cartesian sweeps over the initial masses `(m1, m2)`.

use chemotax::constants::splitmix;
use chemotax::functionals::{fit_exponential_rate, truncate_at_floor};
use chemotax::regimes::classify;
use chemotax::RunStatus;
use rayon::prelude::*;

use crate::commands::run_state;
use crate::config::RunConfig;
use crate::output::fmt_f64;
use crate::CliError;

pub const SWEEP_COLUMNS: [&str; 7] =
    ["m1", "m2", "predicted_b1", "predicted_b3", "predicted_b4", "observed_status", "fitted_rate"];

/// Relative tolerance for "on the blow-up line" in sweep predictions.
pub const LINE_TOL: f64 = 1e-9;

/// `a:b:n`, `n` evenly spaced values from `a` to `b` inclusive (`n = 1` gives `a`).
fn parse_range(name: &str, spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Invalid(format!("bad range {name}={spec}; expected a:b:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    Ok((0..n)
        .map(|i| match i {
            0 => a,
            _ if i == n - 1 => b,
            _ => a + (b - a) * i as f64 / (n - 1) as f64,
        })
        .collect())
}

/// `m1=a:b:n,m2=c:d:n`; both axes are required.
pub fn parse_grid(spec: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut m1 = None;
    let mut m2 = None;
    for item in spec.split(',') {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("bad grid item {item:?}")))?;
        match k.trim() {
            "m1" => m1 = Some(parse_range("m1", v)?),
            "m2" => m2 = Some(parse_range("m2", v)?),
            other => return Err(CliError::Invalid(format!("unknown sweep axis {other:?}"))),
        }
    }
    match (m1, m2) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(CliError::Invalid("grid needs both m1 and m2".into())),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub m1: f64,
    pub m2: f64,
    pub predicted_b1: bool,
    pub predicted_b3: bool,
    /// On the blow-up line with supercritical mass.
    pub predicted_b4: bool,
    /// A run status, or `error` when the point could not be run.
    pub observed_status: String,
    /// Decay rate fitted to the summed `W^{1,∞}` distances; absent when the fit is undefined.
    pub fitted_rate: Option<f64>,
    pub message: Option<String>,
}

/// Points in row-major order: `m1` outer, `m2` inner.
pub fn points(m1: &[f64], m2: &[f64]) -> Vec<(f64, f64)> {
    m1.iter().flat_map(|&a| m2.iter().map(move |&b| (a, b))).collect()
}

fn run_point(cfg: &RunConfig, constants: &crate::config::Constants, index: usize, m1: f64, m2: f64) -> SweepRow {
    let mut row = SweepRow {
        m1,
        m2,
        predicted_b1: false,
        predicted_b3: false,
        predicted_b4: false,
        observed_status: "error".into(),
        fitted_rate: None,
        message: None,
    };
    let mut attempt = || -> Result<(), CliError> {
        let c = cfg.reseeded(splitmix(cfg.sweep.base_seed, index as u64));
        let state0 = c.state_with_masses(m1, m2)?;
        let dp = c.derived(&state0, constants)?;
        let v = classify(&c.params()?, &dp, LINE_TOL);
        row.predicted_b1 = v.b1_bounded;
        row.predicted_b3 = v.b3_converges;
        row.predicted_b4 = v.b4_on_blowup_line && v.b4_blowup_mass;
        let out = run_state(&c, &state0, constants, None)?;
        row.observed_status = out.report.status.to_string();
        row.message = out.report.message.clone();
        if out.report.status == RunStatus::Completed {
            let t: Vec<f64> = out.rows.iter().map(|r| r.t).collect();
            let y: Vec<f64> = out.rows.iter().map(|r| r.w1inf_dist_u + r.w1inf_dist_w).collect();
            let (t, y) = truncate_at_floor(&t, &y, 1e-8);
            row.fitted_rate = fit_exponential_rate(&t, &y, 0.5).ok().map(|f| f.rate);
        }
        Ok(())
    };
    if let Err(e) = attempt() {
        row.observed_status = "error".into();
        row.message = Some(e.to_string());
    }
    row
}

/// Runs every point, at most `jobs` at a time. Rows come back in point order regardless of `jobs`.
pub fn sweep(cfg: &RunConfig, m1: &[f64], m2: &[f64], jobs: usize) -> Result<Vec<SweepRow>, CliError> {
    let constants = cfg.constants_for(true)?;
    let pts = points(m1, m2);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        pts.par_iter()
            .enumerate()
            .map(|(i, &(a, b))| run_point(cfg, &constants, i, a, b))
            .collect()
    }))
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.m1),
            fmt_f64(r.m2),
            r.predicted_b1.to_string(),
            r.predicted_b3.to_string(),
            r.predicted_b4.to_string(),
            r.observed_status.clone(),
            r.fitted_rate.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

/// `CHEMOTAX_JOBS` wins over the flag; the default is the rayon default.
pub fn resolve_jobs(flag: Option<usize>) -> usize {
    std::env::var("CHEMOTAX_JOBS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .or(flag)
        .unwrap_or_else(rayon::current_num_threads)
        .max(1)
}
