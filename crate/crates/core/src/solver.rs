//! Time integration: implicit diffusion and signal relaxation through Helmholtz
//! solves, explicit exponentially fitted drift, adaptive step control and
//! blow-up monitoring.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{entropy, DiagnosticsContext, DiagnosticsRow};
use crate::grid::{Domain, Field};
use crate::helmholtz::{Backend, Helmholtz};
use crate::model::{DerivedParams, ModelParams, Regime, SimState};
use crate::scalar::{neg, pos, Real};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityMode {
    #[default]
    ScharfetterGummel,
    Upwind,
}

impl FromStr for PositivityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scharfetter_gummel" | "sg" => Ok(Self::ScharfetterGummel),
            "upwind" => Ok(Self::Upwind),
            other => Err(Error::InvalidParams(format!("unknown positivity mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    pub dt_init: T,
    pub dt_min: T,
    pub dt_max: T,
    pub cfl_safety: T,
    pub t_end: T,
    /// Peak `L∞` of `u` or `w` relative to its initial value that counts as an explosion.
    pub blowup_linf_factor: T,
    /// Entropy growth relative to `max(1, |initial entropy|)` that is flagged (never stops a run).
    pub blowup_entropy_factor: T,
    pub positivity_mode: PositivityMode,
    pub helmholtz_backend: Backend,
    /// Accepted-step budget; exhausting it ends the run as a solver failure.
    pub max_steps: Option<usize>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            dt_init: T::lit(1e-3),
            dt_min: T::lit(1e-9),
            dt_max: T::lit(1e-2),
            cfl_safety: T::lit(0.5),
            t_end: T::one(),
            blowup_linf_factor: T::lit(1e4),
            blowup_entropy_factor: T::lit(1e3),
            positivity_mode: PositivityMode::ScharfetterGummel,
            helmholtz_backend: Backend::Cosine,
            max_steps: None,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    /// `t_end = 0` is accepted and yields the initial diagnostics only.
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > T::zero()
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.dt_max.is_finite()
            && self.cfl_safety > T::zero()
            && self.cfl_safety <= T::one()
            && self.t_end >= T::zero()
            && self.t_end.is_finite()
            && self.blowup_linf_factor > T::one()
            && self.blowup_entropy_factor > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("inconsistent solver config {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowupIndicated,
    SolverFailure,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Completed => "completed",
            RunStatus::BlowupIndicated => "blowup_indicated",
            RunStatus::SolverFailure => "solver_failure",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport<T> {
    pub status: RunStatus,
    pub t_stop: T,
    pub peak_linf_u: T,
    pub peak_linf_w: T,
    pub initial_linf_u: T,
    pub initial_linf_w: T,
    pub entropy_peak: T,
    /// Entropy grew beyond `blowup_entropy_factor`; informational.
    pub entropy_flag: bool,
    pub dt_at_stop: T,
    pub steps: usize,
    pub rejections: usize,
    pub message: Option<String>,
}

impl<T: Real> BlowupReport<T> {
    pub fn linf_ratio(&self) -> T {
        (self.peak_linf_u / self.initial_linf_u).max(self.peak_linf_w / self.initial_linf_w)
    }
}

/// What the observer sees after every accepted step.
pub struct StepEvent<'a, T> {
    pub prev: &'a SimState<T>,
    pub state: &'a SimState<T>,
    pub dt: T,
    /// Present on diagnostics samples.
    pub row: Option<&'a DiagnosticsRow<T>>,
}

#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub rows: Vec<DiagnosticsRow<T>>,
    pub state: SimState<T>,
    pub report: BlowupReport<T>,
}

/// `B(x) = x / (eˣ − 1)`.
#[inline]
pub fn bernoulli<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-10) {
        T::one() - x / T::lit(2.0)
    } else {
        x / x.exp_m1()
    }
}

/// Divergence of the explicit drift part of the flux, `∇·(drift)` per cell, and the
/// largest face drift velocity. Faces carry `(u_P − u_N)/h` implicitly; the
/// remainder of the exponentially fitted flux is returned here.
fn drift_divergence<T: Real>(u: &Field<T>, pot: &Field<T>, dom: &Domain<T>, mode: PositivityMode) -> (Vec<T>, T) {
    let (nx, ny) = (dom.nx(), dom.ny());
    let (hx, hy) = (dom.hx(), dom.hy());
    let uv = u.values();
    let pv = pot.values();
    let mut div = vec![T::zero(); uv.len()];
    let mut vmax = T::zero();
    let one = T::one();
    let mut face = |p: usize, q: usize, h: T| {
        let d = pv[q] - pv[p];
        vmax = vmax.max(d.abs() / h);
        let flux = match mode {
            PositivityMode::ScharfetterGummel => {
                ((bernoulli(-d) - one) * uv[p] - (bernoulli(d) - one) * uv[q]) / h
            }
            PositivityMode::Upwind => (pos(d) * uv[p] - neg(d) * uv[q]) / h,
        };
        div[p] += flux / h;
        div[q] -= flux / h;
    };
    for j in 0..ny {
        for i in 0..nx - 1 {
            face(j * nx + i, j * nx + i + 1, hx);
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            face(j * nx + i, (j + 1) * nx + i, hy);
        }
    }
    (div, vmax)
}

#[derive(Debug)]
pub struct Solver<T: Real> {
    dom: Domain<T>,
    params: ModelParams<T>,
    cfg: SolverConfig<T>,
    helm: Helmholtz<T>,
    derived: Option<DerivedParams<T>>,
}

impl<T: Real> Solver<T> {
    pub fn new(dom: &Domain<T>, params: ModelParams<T>, cfg: SolverConfig<T>) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        Ok(Self {
            dom: *dom,
            params,
            helm: Helmholtz::new(dom, cfg.helmholtz_backend),
            cfg,
            derived: None,
        })
    }

    /// Derived parameters (with `k`, `C_GN`) used for diagnostics; otherwise built from the initial masses.
    pub fn with_derived(mut self, dp: DerivedParams<T>) -> Self {
        self.derived = Some(dp);
        self
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.dom
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.cfg
    }

    /// `(I − Δ)⁻¹ f`.
    pub fn elliptic_signal(&self, f: &Field<T>) -> Result<Field<T>> {
        self.helm.solve(f, T::one(), T::one())
    }

    /// For `τ = 0` the signals are slaved to the densities: replace `v, z` by
    /// `(I − Δ)⁻¹ w` and `(I − Δ)⁻¹ u`. Identity otherwise.
    pub fn consistent(&self, state: &SimState<T>) -> Result<SimState<T>> {
        match self.params.regime() {
            Regime::FullyParabolic => Ok(state.clone()),
            Regime::ParabolicElliptic => Ok(SimState {
                t: state.t,
                u: state.u.clone(),
                v: self.elliptic_signal(&state.w)?,
                w: state.w.clone(),
                z: self.elliptic_signal(&state.u)?,
            }),
        }
    }

    fn density_step(&self, rho: &Field<T>, pot: &Field<T>, dt: T, name: &str) -> Result<Field<T>> {
        let (div, vmax) = drift_divergence(rho, pot, &self.dom, self.cfg.positivity_mode);
        if vmax > T::zero() && dt * vmax > self.cfg.cfl_safety * self.dom.h_min() {
            return Err(Error::StepRejected(format!(
                "{name}: drift CFL violated (dt={dt}, velocity={vmax})"
            )));
        }
        let pred: Vec<T> = rho.values().iter().zip(&div).map(|(&r, &d)| r - dt * d).collect();
        if let Some(bad) = pred.iter().position(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(Error::StepRejected(format!(
                "{name}: explicit drift predictor non-positive at cell {bad} ({})",
                pred[bad]
            )));
        }
        let pred = Field::from_vec(&self.dom, pred)?;
        let next = self.helm.solve(&pred, T::one(), dt)?;
        if let Some(bad) = next.values().iter().position(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(Error::StepRejected(format!("{name}: non-positive after diffusion at cell {bad}")));
        }
        Ok(next)
    }

    /// One splitting step: signals first, then both densities against the updated signals.
    pub fn step(&self, state: &SimState<T>, dt: T) -> Result<SimState<T>> {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::PreconditionViolation(format!("step size {dt} must be positive")));
        }
        let ModelParams { chi1, chi2, chi3, tau1, tau2 } = self.params;
        let (v, z) = match self.params.regime() {
            Regime::ParabolicElliptic => (self.elliptic_signal(&state.w)?, self.elliptic_signal(&state.u)?),
            Regime::FullyParabolic => {
                let (r1, r2) = (tau1 / dt, tau2 / dt);
                let v = self.helm.solve(&state.v.scaled(r1).axpy(T::one(), &state.w), r1 + T::one(), T::one())?;
                let z = self.helm.solve(&state.z.scaled(r2).axpy(T::one(), &state.u), r2 + T::one(), T::one())?;
                (v, z)
            }
        };
        let pot_u = v.scaled(chi1);
        let pot_w = z.scaled(chi2).axpy(chi3, &v);
        let u = self.density_step(&state.u, &pot_u, dt, "u")?;
        let w = self.density_step(&state.w, &pot_w, dt, "w")?;
        let t = state.t + dt;
        match self.params.regime() {
            Regime::ParabolicElliptic => {
                let v = self.elliptic_signal(&w)?;
                let z = self.elliptic_signal(&u)?;
                Ok(SimState { t, u, v, w, z })
            }
            Regime::FullyParabolic => Ok(SimState { t, u, v, w, z }),
        }
    }

    /// Adaptive run from `state0.t` to `cfg.t_end`; diagnostics every `every` accepted steps and at the end.
    pub fn run(&self, state0: &SimState<T>, every: usize) -> Result<RunOutput<T>> {
        self.run_with(state0, every, |_| {})
    }

    pub fn run_with(
        &self,
        state0: &SimState<T>,
        every: usize,
        mut observer: impl FnMut(&StepEvent<'_, T>),
    ) -> Result<RunOutput<T>> {
        state0.validate(&self.dom)?;
        state0.u.check_positive()?;
        state0.w.check_positive()?;
        let every = every.max(1);
        let dom = &self.dom;
        let mut state = self.consistent(state0)?;
        let dp = match self.derived {
            Some(dp) => dp,
            None => DerivedParams::from_initial(&state.u, &state.w, &self.params, dom)?,
        };
        let ctx = DiagnosticsContext::new(*dom, self.params, dp);
        let first = ctx.row(&state, T::zero())?;
        let init_entropy = first.entropy_u.abs().max(first.entropy_w.abs()).max(T::one());
        let mut report = BlowupReport {
            status: RunStatus::Completed,
            t_stop: state.t,
            peak_linf_u: first.linf_u,
            peak_linf_w: first.linf_w,
            initial_linf_u: first.linf_u,
            initial_linf_w: first.linf_w,
            entropy_peak: first.entropy_u.max(first.entropy_w),
            entropy_flag: false,
            dt_at_stop: self.cfg.dt_init,
            steps: 0,
            rejections: 0,
            message: None,
        };
        let mut rows = vec![first];
        let t_end = self.cfg.t_end;
        let mut dt = self.cfg.dt_init;
        // remaining intervals shorter than this are absorbed into the previous step
        let t_eps = T::lit(1e-12) * t_end.abs().max(T::one());
        while t_end - state.t > t_eps {
            if self.cfg.max_steps.is_some_and(|m| report.steps >= m) {
                report.status = RunStatus::SolverFailure;
                report.message = Some(format!("step budget of {} exhausted at t={}", report.steps, state.t));
                break;
            }
            let remaining = t_end - state.t;
            let last = dt >= remaining - t_eps;
            let trial = if last { remaining } else { dt };
            match self.step(&state, trial) {
                Ok(mut next) => {
                    if last {
                        next.t = t_end;
                    }
                    report.steps += 1;
                    report.peak_linf_u = report.peak_linf_u.max(next.u.linf());
                    report.peak_linf_w = report.peak_linf_w.max(next.w.linf());
                    let sample = report.steps % every == 0 || last;
                    let row = if sample { Some(ctx.row(&next, trial)?) } else { None };
                    if let Some(r) = &row {
                        report.entropy_peak = report.entropy_peak.max(r.entropy_u).max(r.entropy_w);
                    }
                    observer(&StepEvent { prev: &state, state: &next, dt: trial, row: row.as_ref() });
                    if let Some(r) = row {
                        rows.push(r);
                    }
                    state = next;
                    report.dt_at_stop = trial;
                    if !last {
                        dt = (dt * T::lit(1.2)).min(self.cfg.dt_max);
                    }
                }
                Err(Error::StepRejected(msg)) => {
                    report.rejections += 1;
                    dt = dt * T::lit(0.5);
                    if dt < self.cfg.dt_min {
                        report.dt_at_stop = dt;
                        report.message = Some(msg);
                        report.status = if report.linf_ratio() >= self.cfg.blowup_linf_factor {
                            RunStatus::BlowupIndicated
                        } else {
                            RunStatus::SolverFailure
                        };
                        break;
                    }
                }
                Err(e) => {
                    report.status = RunStatus::SolverFailure;
                    report.message = Some(e.to_string());
                    report.dt_at_stop = trial;
                    break;
                }
            }
        }
        // the final state is always sampled
        if rows.last().map(|r| r.t) != Some(state.t) {
            let r = ctx.row(&state, report.dt_at_stop)?;
            report.entropy_peak = report.entropy_peak.max(r.entropy_u).max(r.entropy_w);
            rows.push(r);
        }
        let e_final = entropy(&state.u, dom)?.max(entropy(&state.w, dom)?);
        report.entropy_peak = report.entropy_peak.max(e_final);
        report.entropy_flag = report.entropy_peak >= self.cfg.blowup_entropy_factor * init_entropy;
        report.t_stop = state.t;
        Ok(RunOutput { rows, state, report })
    }
}

/// One step with a throwaway solver.
pub fn step<T: Real>(
    state: &SimState<T>,
    params: &ModelParams<T>,
    cfg: &SolverConfig<T>,
    dt: T,
    dom: &Domain<T>,
) -> Result<SimState<T>> {
    Solver::new(dom, *params, cfg.clone())?.step(state, dt)
}

/// Full adaptive run with a throwaway solver.
pub fn run<T: Real>(
    state0: &SimState<T>,
    params: &ModelParams<T>,
    cfg: &SolverConfig<T>,
    every: usize,
    dom: &Domain<T>,
) -> Result<RunOutput<T>> {
    Solver::new(dom, *params, cfg.clone())?.run(state0, every)
}
