//! The subcommands, as library functions returning data; `main` only does I/O plumbing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chemotax::constants::{estimate_cgn, estimate_k, k_reference, pistar, poincare_l2_oracle, BoundDirection};
use chemotax::functionals::DiagnosticsContext;
use chemotax::model::second_moment;
use chemotax::regimes::{classify, RegimeVerdict};
use chemotax::{BlowupReport, RunOutput, SimState, Solver};
use serde::Serialize;

use crate::config::{Constants, InitSpec, RunConfig};
use crate::output::{fmt_f64, DiagnosticsWriter};
use crate::snapshot::Snapshot;
use crate::CliError;

/// Runs `state0` under `cfg` with the given constants, streaming diagnostics rows to `csv`.
pub fn run_state(
    cfg: &RunConfig,
    state0: &SimState<f64>,
    constants: &Constants,
    csv: Option<&mut dyn Write>,
) -> Result<RunOutput<f64>, CliError> {
    let dom = cfg.domain()?;
    let params = cfg.params()?;
    let dp = cfg.derived(state0, constants)?;
    let solver = Solver::new(&dom, params, cfg.solver_config()?)?.with_derived(dp);
    let every = cfg.diagnostics.every;
    let Some(out) = csv else {
        return Ok(solver.run(state0, every)?);
    };
    let mut w = DiagnosticsWriter::new(out)?;
    let first = DiagnosticsContext::new(dom, params, dp).row(&solver.consistent(state0)?, 0.0)?;
    w.write(&first)?;
    let mut written = 1;
    let mut failed = None;
    let result = solver.run_with(state0, every, |ev| {
        if let (Some(r), None) = (ev.row, &failed) {
            match w.write(r) {
                Ok(()) => written += 1,
                Err(e) => failed = Some(e),
            }
        }
    })?;
    if let Some(e) = failed {
        return Err(e);
    }
    for r in &result.rows[written..] {
        w.write(r)?;
    }
    Ok(result)
}

/// `run`: the configured simulation, with snapshot and report written to the configured paths.
pub fn run(cfg: &RunConfig, csv: Option<&mut dyn Write>) -> Result<RunOutput<f64>, CliError> {
    let state0 = cfg.initial_state()?;
    let constants = cfg.constants_for(false)?;
    let out = match (&cfg.output.csv, csv) {
        (Some(path), _) => {
            let mut f = std::io::BufWriter::new(fs::File::create(path)?);
            run_state(cfg, &state0, &constants, Some(&mut f))?
        }
        (None, sink) => run_state(cfg, &state0, &constants, sink)?,
    };
    if let Some(path) = &cfg.output.snapshot {
        let snap = Snapshot::new(&out.state, &cfg.domain()?, &cfg.params()?)?;
        snap.write_to(std::io::BufWriter::new(fs::File::create(path)?))?;
    }
    if let Some(path) = &cfg.output.report {
        fs::write(path, crate::output::report_block(&out.report))?;
    }
    Ok(out)
}

/// `classify`: the regime verdict for the configured initial masses.
pub fn classify_config(cfg: &RunConfig, line_tol: f64) -> Result<RegimeVerdict<f64>, CliError> {
    let state0 = cfg.initial_state()?;
    let constants = cfg.constants_for(true)?;
    let dp = cfg.derived(&state0, &constants)?;
    Ok(classify(&cfg.params()?, &dp, line_tol))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "-".into())
}

pub fn verdict_table(v: &RegimeVerdict<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<62} {:>24} {:>24} {:>6}", "condition", "lhs", "rhs", "holds");
    for c in &v.applicable_conditions {
        let _ = writeln!(s, "{:<62} {:>24} {:>24} {:>6}", c.name, fmt_f64(c.lhs), fmt_f64(c.rhs), c.holds);
        if let Some(n) = &c.note {
            let _ = writeln!(s, "    note: {n}");
        }
    }
    let _ = writeln!(s, "b1 bounded={} margin={}", v.b1_bounded, fmt_f64(v.b1_margin));
    let _ = writeln!(s, "b3 converges={}", v.b3_converges);
    let _ = writeln!(s, "b4 on_blowup_line={} blowup_mass={}", v.b4_on_blowup_line, v.b4_blowup_mass);
    let _ = writeln!(s, "outlook {}", v.outlook);
    let r = &v.rates;
    let _ = writeln!(
        s,
        "rates mu={} delta={} sigma={} zeta={} rate_u_w={}",
        opt(r.mu),
        opt(r.delta),
        opt(r.sigma),
        opt(r.zeta),
        opt(r.rate_u_w)
    );
    let prov = |p: Option<chemotax::Provenance>| p.map_or("-".to_string(), |p| format!("{p:?}"));
    let _ = writeln!(s, "k provenance {}, C_GN provenance {}", prov(v.k_provenance), prov(v.cgn_provenance));
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantRow {
    pub name: String,
    pub estimate: f64,
    pub bound_direction: Option<BoundDirection>,
    pub reference: Option<f64>,
    pub note: Option<String>,
}

/// `constants`: every domain constant with its bound direction and any analytic reference.
pub fn constants_table(cfg: &RunConfig) -> Result<Vec<ConstantRow>, CliError> {
    let dom = cfg.domain()?;
    let opt = cfg.constants.opt_config();
    let k = estimate_k(&dom, &opt)?;
    let c = estimate_cgn(&dom, &opt)?;
    let l2 = poincare_l2_oracle(&dom, &opt)?;
    let lmax = dom.lx().max(dom.ly());
    Ok(vec![
        ConstantRow {
            name: "pi*".into(),
            estimate: pistar(&dom),
            bound_direction: None,
            reference: Some(4.0 * std::f64::consts::PI),
            note: Some("exact: 4*pi on any rectangle".into()),
        },
        ConstantRow {
            name: "k".into(),
            estimate: k.value,
            bound_direction: Some(k.bound_direction),
            reference: Some(k_reference(&dom)),
            note: k.alarm,
        },
        ConstantRow {
            name: "C_GN^4".into(),
            estimate: c.value,
            bound_direction: Some(c.bound_direction),
            reference: None,
            note: Some(format!("C_GN >= {}", fmt_f64(c.value.powf(0.25)))),
        },
        ConstantRow {
            name: "poincare_l2".into(),
            estimate: l2,
            bound_direction: Some(BoundDirection::Upper),
            reference: Some(std::f64::consts::PI.powi(2) / (lmax * lmax)),
            note: None,
        },
    ])
}

pub fn constants_text(rows: &[ConstantRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>24} {:>7} {:>24}  note", "constant", "estimate", "bound", "reference");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>24} {:>7} {:>24}  {}",
            r.name,
            fmt_f64(r.estimate),
            r.bound_direction.map_or("exact".to_string(), |b| b.to_string()),
            opt(r.reference),
            r.note.as_deref().unwrap_or("")
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub width: f64,
    pub second_moment: f64,
    pub report: BlowupReport<f64>,
}

/// `probe-blowup`: the configured run repeated with each `u0` Gaussian width.
pub fn probe_blowup(cfg: &RunConfig, widths: &[f64]) -> Result<Vec<ProbeRow>, CliError> {
    let InitSpec::Gaussian { center, .. } = cfg.u0 else {
        return Err(CliError::Invalid("probe-blowup needs a gaussian u0".into()));
    };
    let dom = cfg.domain()?;
    let constants = cfg.constants_for(false)?;
    widths
        .iter()
        .map(|&width| {
            let mut c = cfg.clone();
            if let InitSpec::Gaussian { width: w, .. } = &mut c.u0 {
                *w = width;
            }
            let state0 = c.initial_state()?;
            let out = run_state(&c, &state0, &constants, None)?;
            Ok(ProbeRow {
                width,
                second_moment: second_moment(&state0.u, &dom, (center[0], center[1])),
                report: out.report,
            })
        })
        .collect()
}

pub fn probe_text(rows: &[ProbeRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8} {:>24} {:>17} {:>24} {:>24} {:>24} {:>9}",
        "width", "second_moment", "status", "t_stop", "linf_ratio", "dt_at_stop", "steps"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>8} {:>24} {:>17} {:>24} {:>24} {:>24} {:>9}",
            fmt_f64(r.width),
            fmt_f64(r.second_moment),
            r.report.status.to_string(),
            fmt_f64(r.report.t_stop),
            fmt_f64(r.report.linf_ratio()),
            fmt_f64(r.report.dt_at_stop),
            r.report.steps
        );
    }
    s
}

/// `plot`: one `<column>.dat` file per requested column holding `t value` pairs, copied
/// verbatim from the CSV text. Empty cells are skipped. Returns the files written.
pub fn plot(csv_path: &Path, out_dir: &Path, columns: Option<&[String]>) -> Result<Vec<PathBuf>, CliError> {
    let mut rdr = csv::Reader::from_path(csv_path)?;
    let headers = rdr.headers()?.clone();
    let index: BTreeMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let t_col = *index.get("t").ok_or_else(|| CliError::MissingColumn("t".into()))?;
    let wanted: Vec<String> = match columns {
        Some(c) => c.to_vec(),
        None => headers.iter().filter(|h| *h != "t").map(String::from).collect(),
    };
    let cols = wanted
        .iter()
        .map(|c| index.get(c.as_str()).copied().ok_or_else(|| CliError::MissingColumn(c.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut bodies: Vec<String> = wanted.iter().map(|c| format!("# t {c}\n")).collect();
    for rec in rdr.records() {
        let rec = rec?;
        let t = &rec[t_col];
        for (body, &ci) in bodies.iter_mut().zip(&cols) {
            let v = &rec[ci];
            if !v.is_empty() {
                body.push_str(t);
                body.push(' ');
                body.push_str(v);
                body.push('\n');
            }
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::with_capacity(wanted.len());
    for (name, body) in wanted.iter().zip(bodies) {
        let path = out_dir.join(format!("{name}.dat"));
        fs::write(&path, body)?;
        files.push(path);
    }
    Ok(files)
}
