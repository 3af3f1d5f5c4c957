//! CSV diagnostics and the plain-text report block.

use std::io::Write;

use chemotax::functionals::DiagnosticsRow;
use chemotax::BlowupReport;

use crate::CliError;

pub const COLUMNS: [&str; 19] = [
    "t",
    "mass_u",
    "mass_w",
    "mass_v",
    "mass_z",
    "entropy_u",
    "entropy_w",
    "linf_u",
    "linf_w",
    "h1_v",
    "h1_z",
    "F",
    "G",
    "H",
    "l1_U_minus_1",
    "l1_W_minus_1",
    "w1inf_dist_u",
    "w1inf_dist_w",
    "dt",
];

/// Shortest representation that parses back to the same bits; never locale dependent.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn row_cells(r: &DiagnosticsRow<f64>) -> [String; 19] {
    let f = fmt_f64;
    [
        f(r.t),
        f(r.mass_u),
        f(r.mass_w),
        f(r.mass_v),
        f(r.mass_z),
        f(r.entropy_u),
        f(r.entropy_w),
        f(r.linf_u),
        f(r.linf_w),
        f(r.h1_v),
        f(r.h1_z),
        fmt_opt(r.f_val),
        fmt_opt(r.g_val),
        fmt_opt(r.h_val),
        f(r.l1_u_minus_1),
        f(r.l1_w_minus_1),
        f(r.w1inf_dist_u),
        f(r.w1inf_dist_w),
        f(r.dt),
    ]
}

/// Row-at-a-time diagnostics writer; flushes after every row.
pub struct DiagnosticsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(out: W) -> Result<Self, CliError> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        inner.write_record(COLUMNS)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &DiagnosticsRow<f64>) -> Result<(), CliError> {
        self.inner.write_record(row_cells(row))?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Diagnostics CSV for a whole trajectory.
pub fn rows_to_csv(rows: &[DiagnosticsRow<f64>]) -> Result<String, CliError> {
    let mut buf = Vec::new();
    {
        let mut w = DiagnosticsWriter::new(&mut buf)?;
        for r in rows {
            w.write(r)?;
        }
    }
    Ok(String::from_utf8(buf).expect("csv output is ascii"))
}

pub fn report_block(r: &BlowupReport<f64>) -> String {
    let mut s = String::from("[blowup_report]\n");
    let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
    kv("status", r.status.to_string());
    kv("t_stop", fmt_f64(r.t_stop));
    kv("steps", r.steps.to_string());
    kv("rejections", r.rejections.to_string());
    kv("dt_at_stop", fmt_f64(r.dt_at_stop));
    kv("peak_linf_u", fmt_f64(r.peak_linf_u));
    kv("peak_linf_w", fmt_f64(r.peak_linf_w));
    kv("linf_ratio", fmt_f64(r.linf_ratio()));
    kv("entropy_peak", fmt_f64(r.entropy_peak));
    kv("entropy_flag", r.entropy_flag.to_string());
    if let Some(m) = &r.message {
        kv("message", format!("{m:?}"));
    }
    s
}
