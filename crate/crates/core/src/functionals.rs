//! Scalar diagnostics: entropies, norms, the Lyapunov functionals, the
//! closed-form decay rates, inequality gaps and exponential-rate fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grad_faces, grad_inner, gradient_sq_norm, inner, integrate, Domain, Field};
use crate::model::{normalize, DerivedParams, ModelParams, NormalizedState, Regime, SimState};
use crate::scalar::{neg, pos, Real};

/// `∫ f ln f`.
pub fn entropy<T: Real>(f: &Field<T>, dom: &Domain<T>) -> Result<T> {
    f.check_shape(dom)?;
    f.check_finite()?;
    f.check_positive()?;
    let s: T = f.values().iter().map(|&x| x * x.ln()).sum();
    Ok(s * dom.cell_area())
}

/// `∫ (f ln f − f + 1)`, pointwise non-negative. Equals `∫ f ln f` whenever `f` has
/// mean one; the normalized functionals use it to avoid rounding-level negative values.
pub fn relative_entropy<T: Real>(f: &Field<T>, dom: &Domain<T>) -> Result<T> {
    f.check_shape(dom)?;
    f.check_finite()?;
    f.check_positive()?;
    let s: T = f.values().iter().map(|&x| x * x.ln() - x + T::one()).sum();
    Ok(s * dom.cell_area())
}

/// `‖f‖²_{L²} + ‖∇f‖²_{L²}`.
pub fn h1_sq_norm<T: Real>(f: &Field<T>, dom: &Domain<T>) -> Result<T> {
    Ok(inner(f, f, dom) + gradient_sq_norm(f, dom)?)
}

/// Discrete `‖f - c‖_{W^{1,∞}}`: `max |f - c|` plus the largest face gradient.
pub fn w1inf_distance<T: Real>(f: &Field<T>, c: T, dom: &Domain<T>) -> T {
    wk_inf_distance(f, c, dom, 1)
}

/// Discrete `‖f - c‖_{W^{k,∞}}` from repeated one-directional face differences.
/// Only orders 0..=1 are reliable at coarse resolution; higher orders are reported, not trusted.
pub fn wk_inf_distance<T: Real>(f: &Field<T>, c: T, dom: &Domain<T>, order: usize) -> T {
    let (nx, ny) = (dom.nx(), dom.ny());
    let mut total = f.values().iter().fold(T::zero(), |m, &x| m.max((x - c).abs()));
    // rows: differences along x
    let mut along_x: Vec<Vec<T>> = (0..ny).map(|j| f.values()[j * nx..(j + 1) * nx].to_vec()).collect();
    let mut along_y: Vec<Vec<T>> = (0..nx).map(|i| (0..ny).map(|j| f.at(i, j)).collect()).collect();
    for _ in 0..order {
        along_x = along_x.iter().map(|r| r.windows(2).map(|w| (w[1] - w[0]) / dom.hx()).collect()).collect();
        along_y = along_y.iter().map(|r| r.windows(2).map(|w| (w[1] - w[0]) / dom.hy()).collect()).collect();
        let mx = along_x.iter().flatten().fold(T::zero(), |m, &x| m.max(x.abs()));
        let my = along_y.iter().flatten().fold(T::zero(), |m, &x| m.max(x.abs()));
        total += mx.max(my);
    }
    total
}

/// Logarithmic mean `(a - b) / (ln a - ln b)`; the face value of a density that
/// makes `u ∇ln u = ∇u` hold exactly on each face.
#[inline]
pub fn log_mean<T: Real>(a: T, b: T) -> T {
    let r = b / a;
    let x = r - T::one();
    if x.abs() < T::lit(1e-4) {
        a * (T::one() + x / T::lit(2.0) - x * x / T::lit(12.0))
    } else {
        (b - a) / r.ln()
    }
}

/// Discrete `∫ ρ |∇(ln ρ - φ)|²`, face values of `ρ` by logarithmic mean.
pub fn fisher_dissipation<T: Real>(rho: &Field<T>, phi: &Field<T>, dom: &Domain<T>) -> T {
    let (nx, ny) = (dom.nx(), dom.ny());
    let (hx, hy) = (dom.hx(), dom.hy());
    let r = rho.values();
    let p = phi.values();
    let mut acc = T::zero();
    let mut face = |a: usize, b: usize, h: T| {
        let g = ((r[b].ln() - r[a].ln()) - (p[b] - p[a])) / h;
        acc += log_mean(r[a], r[b]) * g * g;
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
    acc * dom.cell_area()
}

/// The energy
/// `χ₂∫u ln u + χ₁∫w ln w − χ₁χ₂∫(uv+wz) − χ₁χ₃∫wv + χ₁χ₂∫(vz+∇v·∇z) + (χ₁χ₃/2)∫(v²+|∇v|²)`.
pub fn lyapunov_f<T: Real>(state: &SimState<T>, params: &ModelParams<T>, dom: &Domain<T>) -> Result<T> {
    state.validate(dom)?;
    let ModelParams { chi1, chi2, chi3, .. } = *params;
    let (u, v, w, z) = (&state.u, &state.v, &state.w, &state.z);
    let half = T::lit(0.5);
    Ok(chi2 * entropy(u, dom)? + chi1 * entropy(w, dom)?
        - chi1 * chi2 * (inner(u, v, dom) + inner(w, z, dom))
        - chi1 * chi3 * inner(w, v, dom)
        + chi1 * chi2 * (inner(v, z, dom) + grad_inner(v, z, dom))
        + half * chi1 * chi3 * (inner(v, v, dom) + grad_inner(v, v, dom)))
}

/// Both sides of the energy identity between two consecutive states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DissipationCheck<T> {
    /// `(F(next) - F(curr)) / dt`
    pub lhs: T,
    /// Dissipation integrals at `curr`, time derivatives by forward difference.
    pub rhs: T,
}

impl<T: Real> DissipationCheck<T> {
    /// `|lhs - rhs| <= rel (|lhs| + |rhs| + floor)`.
    pub fn agrees(&self, rel: T, floor: T) -> bool {
        (self.lhs - self.rhs).abs() <= rel * (self.lhs.abs() + self.rhs.abs() + floor)
    }
}

pub fn lyapunov_f_dissipation<T: Real>(
    curr: &SimState<T>,
    next: &SimState<T>,
    params: &ModelParams<T>,
    dom: &Domain<T>,
    dt: T,
) -> Result<DissipationCheck<T>> {
    let lhs = (lyapunov_f(next, params, dom)? - lyapunov_f(curr, params, dom)?) / dt;
    let ModelParams { chi1, chi2, chi3, tau1, tau2 } = *params;
    let vt = next.v.axpy(-T::one(), &curr.v).scaled(T::one() / dt);
    let zt = next.z.axpy(-T::one(), &curr.z).scaled(T::one() / dt);
    let pot_u = curr.v.scaled(chi1);
    let pot_w = curr.z.scaled(chi2).axpy(chi3, &curr.v);
    let rhs = -(tau1 + tau2) * chi1 * chi2 * inner(&vt, &zt, dom)
        - tau1 * chi1 * chi3 * inner(&vt, &vt, dom)
        - chi2 * fisher_dissipation(&curr.u, &pot_u, dom)
        - chi1 * fisher_dissipation(&curr.w, &pot_w, dom);
    Ok(DissipationCheck { lhs, rhs })
}

/// `G = (η₂/η₁)∫U ln U + ∫W ln W`, entropies in [`relative_entropy`] form.
pub fn lyapunov_g<T: Real>(ns: &NormalizedState<T>, dp: &DerivedParams<T>, dom: &Domain<T>) -> Result<T> {
    Ok(dp.eta2 / dp.eta1 * relative_entropy(&ns.u, dom)? + relative_entropy(&ns.w, dom)?)
}

/// Free parameters of the fully parabolic energy and the coefficients of its dissipation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParamsPP<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma1: T,
    pub gamma2: T,
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub a4: T,
}

impl<T: Real> RateParamsPP<T> {
    pub fn all_positive(&self) -> bool {
        [
            self.alpha, self.beta, self.gamma1, self.gamma2, self.a1, self.a2, self.a3, self.a4,
        ]
        .iter()
        .all(|&x| x > T::zero())
    }
}

/// `H`, the six-term energy of the fully parabolic regime.
pub fn lyapunov_h<T: Real>(
    ns: &NormalizedState<T>,
    dp: &DerivedParams<T>,
    rp: &RateParamsPP<T>,
    params: &ModelParams<T>,
    dom: &Domain<T>,
) -> Result<T> {
    if params.regime() != Regime::FullyParabolic {
        return Err(Error::PreconditionViolation("H needs tau1, tau2 > 0".into()));
    }
    let k = dp.k_value()?;
    let (t1, t2) = (params.tau1, params.tau2);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let RateParamsPP { alpha, beta, gamma1, gamma2, .. } = *rp;
    let cv = T::one() + two * beta + gamma1 / (k * dp.eta1);
    let cz = T::one() + two * beta + gamma2 / (k * dp.eta2);
    Ok(alpha / k * relative_entropy(&ns.u, dom)?
        + half * t1 * alpha * gradient_sq_norm(&ns.v, dom)?
        + half * t1 * alpha * cv * inner(&ns.v, &ns.v, dom)
        + relative_entropy(&ns.w, dom)? / k
        + half * t2 * gradient_sq_norm(&ns.z, dom)?
        + half * t2 * cz * inner(&ns.z, &ns.z, dom))
}

/// The scalars the closed-form rates depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateInputs<T> {
    pub k: T,
    pub eta1: T,
    pub eta2: T,
    pub chi: T,
    pub tau1: T,
    pub tau2: T,
}

impl<T: Real> RateInputs<T> {
    pub fn new(dp: &DerivedParams<T>, params: &ModelParams<T>) -> Result<Self> {
        Ok(Self {
            k: dp.k_value()?,
            eta1: dp.eta1,
            eta2: dp.eta2,
            chi: dp.chi,
            tau1: params.tau1,
            tau2: params.tau2,
        })
    }

    /// `k²η₁η₂ + kη₁χ⁺ < 4`.
    pub fn elliptic_condition(&self) -> bool {
        self.elliptic_gap() > T::zero()
    }

    /// `4 − k²η₁η₂ − kη₁χ⁺`.
    pub fn elliptic_gap(&self) -> T {
        let k = self.k;
        T::lit(4.0) - k * k * self.eta1 * self.eta2 - k * self.eta1 * pos(self.chi)
    }

    /// `(2−√22)/3 < kη₁χ < √2` and `k²η₁η₂ < (2√2/3) min{1, 3/2 + kη₁χ}`.
    pub fn parabolic_condition(&self) -> bool {
        let k = self.k;
        let s = k * self.eta1 * self.chi;
        let lo = (T::lit(2.0) - T::lit(22.0).sqrt()) / T::lit(3.0);
        let hi = T::SQRT_2();
        let bound = T::lit(2.0) * T::SQRT_2() / T::lit(3.0) * T::one().min(T::lit(1.5) + s);
        lo < s && s < hi && k * k * self.eta1 * self.eta2 < bound
    }
}

/// `μ = gap/(2k²) · min{k, 4/(k²η₁η₂ + 2 gap)}` with `gap = 4 − k²η₁η₂ − kη₁χ⁺`; absent when `gap <= 0`.
pub fn rate_mu_from<T: Real>(ri: &RateInputs<T>) -> Option<T> {
    let gap = ri.elliptic_gap();
    if !(gap > T::zero()) {
        return None;
    }
    let k = ri.k;
    let kk = k * k;
    let two = T::lit(2.0);
    Some(gap / (two * kk) * k.min(T::lit(4.0) / (kk * ri.eta1 * ri.eta2 + two * gap)))
}

pub fn rate_mu<T: Real>(dp: &DerivedParams<T>, params: &ModelParams<T>) -> Result<Option<T>> {
    if params.regime() != Regime::ParabolicElliptic {
        return Err(Error::PreconditionViolation("mu is defined for tau1 = tau2 = 0".into()));
    }
    Ok(rate_mu_from(&RateInputs::new(dp, params)?))
}

/// Parameter choices of the fully parabolic energy; absent outside the admissible window.
///
/// Sign conventions, occurrence by occurrence:
/// * `alpha`: `χ²` (sign-free) in the max, `χ⁻ = max{−χ, 0}` in `3 − 2kη₁χ⁻`;
/// * `gamma1`: signed `χ` in `kη₁χ + 1`;
/// * `a2`, `a3`: signed `χ` (`γ₁α − χ`, `χ²`).
pub fn rate_params_pp_from<T: Real>(ri: &RateInputs<T>) -> Result<Option<RateParamsPP<T>>> {
    if !ri.parabolic_condition() {
        return Ok(None);
    }
    let RateInputs { k, eta1, eta2, chi, .. } = *ri;
    let (one, two, three, half) = (T::one(), T::lit(2.0), T::lit(3.0), T::lit(0.5));
    let k2e1 = k * k * eta1 * eta1;
    let alpha = half
        * ((chi * chi / two).max(eta2 / (T::SQRT_2() * eta1)) + (three - two * k * eta1 * neg(chi)) / (three * k2e1));
    let beta = (one - k2e1 * alpha) / (k2e1 * alpha);
    let gamma1 = (k * eta1 * chi + one) / (k * eta1 * alpha);
    let gamma2 = alpha / (k * eta2);
    let a1 = -((one + beta) * eta2 * eta2 - two * alpha / (k * k));
    let g1a = gamma1 * alpha - chi;
    let a2 = -half * ((one - two * beta) * alpha + g1a * g1a - two * gamma1 * alpha / (k * eta1));
    let a3 = -half * (two * (one + beta) * alpha * eta1 * eta1 - T::lit(4.0) / (k * k) + chi * chi / (k * k * alpha));
    let a4 = -half * (one - two * beta + gamma2 * gamma2 / alpha - two * gamma2 / (k * eta2));
    let rp = RateParamsPP { alpha, beta, gamma1, gamma2, a1, a2, a3, a4 };
    if !rp.all_positive() {
        return Err(Error::InvalidParams(format!(
            "transcription alarm: admissible inputs gave non-positive rate parameters {rp:?}"
        )));
    }
    Ok(Some(rp))
}

pub fn rate_params_pp<T: Real>(dp: &DerivedParams<T>, params: &ModelParams<T>) -> Result<Option<RateParamsPP<T>>> {
    if params.regime() != Regime::FullyParabolic {
        return Err(Error::PreconditionViolation("rate parameters need tau1, tau2 > 0".into()));
    }
    rate_params_pp_from(&RateInputs::new(dp, params)?)
}

/// The six candidate rates whose minimum is `δ`.
pub fn delta_branches<T: Real>(rp: &RateParamsPP<T>, ri: &RateInputs<T>) -> [T; 6] {
    let RateInputs { k, eta1, eta2, tau1, tau2, .. } = *ri;
    let RateParamsPP { alpha, beta, gamma1, gamma2, a1, a2, a3, a4 } = *rp;
    let (one, two) = (T::one(), T::lit(2.0));
    let cv = one + two * beta + gamma1 / (k * eta1);
    let cz = one + two * beta + gamma2 / (k * eta2);
    [
        a1 * k / alpha,
        two * a2 / (alpha * tau1 * cv),
        a3 * k,
        two * a4 / (tau2 * cz),
        two * (gamma1 / (k * eta1 * tau1) + two * beta / tau1),
        two * (gamma2 / (k * eta2 * tau2) + two * beta / tau2),
    ]
}

pub fn rate_delta_from<T: Real>(rp: &RateParamsPP<T>, ri: &RateInputs<T>) -> Option<T> {
    if !(ri.tau1 > T::zero() && ri.tau2 > T::zero()) {
        return None;
    }
    let d = delta_branches(rp, ri).into_iter().fold(T::infinity(), T::min);
    (d > T::zero() && d.is_finite()).then_some(d)
}

pub fn rate_delta<T: Real>(rp: &RateParamsPP<T>, dp: &DerivedParams<T>, params: &ModelParams<T>) -> Result<Option<T>> {
    if params.regime() != Regime::FullyParabolic {
        return Err(Error::PreconditionViolation("delta needs tau1, tau2 > 0".into()));
    }
    Ok(rate_delta_from(rp, &RateInputs::new(dp, params)?))
}

/// Predicted exponents. `zeta1 = 1/τ₁` and `zeta2 = 1/τ₂` are the relaxation
/// candidates entering `zeta = min{1/τ₁, 1/τ₂, σ/2}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateReport<T> {
    pub mu: Option<T>,
    pub delta: Option<T>,
    pub sigma: Option<T>,
    pub zeta1: Option<T>,
    pub zeta2: Option<T>,
    pub zeta: Option<T>,
    /// `σ/14`, exponent for `‖(u − ū₀, w − w̄₀)‖_{W^{1,∞}}`.
    pub rate_u_w: Option<T>,
    /// `μ/44`, exponent for the signals when `τ = 0`.
    pub rate_vz_ee: Option<T>,
    /// `ζ/15`, exponent for the signals when `τ > 0`.
    pub rate_vz_pp: Option<T>,
}

pub fn rate_report<T: Real>(dp: &DerivedParams<T>, params: &ModelParams<T>) -> RateReport<T> {
    let Ok(ri) = RateInputs::new(dp, params) else {
        return RateReport::default();
    };
    rate_report_from(&ri)
}

pub fn rate_report_from<T: Real>(ri: &RateInputs<T>) -> RateReport<T> {
    let mut rep = RateReport::default();
    if ri.tau1 == T::zero() && ri.tau2 == T::zero() {
        rep.mu = rate_mu_from(ri);
        rep.sigma = rep.mu;
        rep.rate_vz_ee = rep.mu.map(|m| m / T::lit(44.0));
    } else if ri.tau1 > T::zero() && ri.tau2 > T::zero() {
        rep.zeta1 = Some(T::one() / ri.tau1);
        rep.zeta2 = Some(T::one() / ri.tau2);
        if let Ok(Some(rp)) = rate_params_pp_from(ri) {
            rep.delta = rate_delta_from(&rp, ri);
        }
        rep.sigma = rep.delta;
        rep.zeta = rep
            .sigma
            .map(|s| (T::one() / ri.tau1).min(T::one() / ri.tau2).min(s / T::lit(2.0)));
        rep.rate_vz_pp = rep.zeta.map(|z| z / T::lit(15.0));
    }
    rep.rate_u_w = rep.sigma.map(|s| s / T::lit(14.0));
    rep
}

/// Two sides of an inequality `lhs <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap<T> {
    pub lhs: T,
    pub rhs: T,
}

impl<T: Real> Gap<T> {
    pub fn holds(&self, rel_slack: T) -> bool {
        self.lhs <= self.rhs * (T::one() + rel_slack) + T::epsilon() * T::lit(16.0)
    }
}

/// Csiszár–Kullback–Pinsker for a mean-one density: `‖U − 1‖²_{L¹} <= 2|Ω| ∫U ln U`.
pub fn ckp_gap_single<T: Real>(f: &Field<T>, dom: &Domain<T>) -> Result<Gap<T>> {
    let l1: T = f.values().iter().map(|&x| (x - T::one()).abs()).sum::<T>() * dom.cell_area();
    Ok(Gap {
        lhs: l1 * l1,
        rhs: T::lit(2.0) * dom.area() * relative_entropy(f, dom)?,
    })
}

/// CKP gaps for `U` and `W`.
pub fn ckp_gap<T: Real>(ns: &NormalizedState<T>, dom: &Domain<T>) -> Result<(Gap<T>, Gap<T>)> {
    Ok((ckp_gap_single(&ns.u, dom)?, ckp_gap_single(&ns.w, dom)?))
}

/// `‖U − 1‖²_{L²}` versus `k ‖∇U^{1/2}‖²_{L²}`.
pub fn poincare_gap_single<T: Real>(f: &Field<T>, k: T, dom: &Domain<T>) -> Result<Gap<T>> {
    f.check_positive()?;
    let dev = f.map(|x| x - T::one());
    let root = f.map(|x| x.sqrt());
    Ok(Gap {
        lhs: inner(&dev, &dev, dom),
        rhs: k * gradient_sq_norm(&root, dom)?,
    })
}

pub fn poincare_gap<T: Real>(ns: &NormalizedState<T>, k: T, dom: &Domain<T>) -> Result<(Gap<T>, Gap<T>)> {
    Ok((poincare_gap_single(&ns.u, k, dom)?, poincare_gap_single(&ns.w, k, dom)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit<T> {
    /// Negated slope of `ln y` against `t`.
    pub rate: T,
    /// Coefficient of determination of the log-linear fit.
    pub r2: T,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 8;

/// Least-squares fit of `ln y = c − rate · t` over the trailing `tail_fraction` of the series.
pub fn fit_exponential_rate<T: Real>(t: &[T], y: &[T], tail_fraction: T) -> Result<ExpFit<T>> {
    if t.len() != y.len() {
        return Err(Error::FitUndefined("time and value series differ in length".into()));
    }
    if t.len() < MIN_FIT_SAMPLES {
        return Err(Error::FitUndefined(format!(
            "need at least {MIN_FIT_SAMPLES} samples, got {}",
            t.len()
        )));
    }
    if !(tail_fraction > T::zero() && tail_fraction <= T::one()) {
        return Err(Error::FitUndefined("tail fraction must lie in (0, 1]".into()));
    }
    let n = t.len();
    let window = ((T::from_usize_lossy(n) * tail_fraction).ceil().to_usize().unwrap_or(n)).clamp(2, n);
    let (tw, yw) = (&t[n - window..], &y[n - window..]);
    if let Some(bad) = yw.iter().find(|v| !(**v > T::zero()) || !v.is_finite()) {
        return Err(Error::FitUndefined(format!("non-positive value {bad} in fit window")));
    }
    let ly: Vec<T> = yw.iter().map(|v| v.ln()).collect();
    let m = T::from_usize_lossy(window);
    let tm = tw.iter().copied().sum::<T>() / m;
    let lm = ly.iter().copied().sum::<T>() / m;
    let (mut stt, mut sty, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&ti, &li) in tw.iter().zip(&ly) {
        let (dt, dl) = (ti - tm, li - lm);
        stt += dt * dt;
        sty += dt * dl;
        syy += dl * dl;
    }
    if !(stt > T::zero()) {
        return Err(Error::FitUndefined("fit window spans zero time".into()));
    }
    let slope = sty / stt;
    let ss_res = ly
        .iter()
        .zip(tw)
        .map(|(&li, &ti)| {
            let e = li - (lm + slope * (ti - tm));
            e * e
        })
        .sum::<T>();
    let scale = syy.max(lm.abs() * lm.abs() * T::epsilon());
    let r2 = if syy <= T::epsilon() * T::epsilon() * scale.max(T::one()) {
        T::one()
    } else {
        T::one() - ss_res / syy
    };
    Ok(ExpFit { rate: -slope, r2, samples: window })
}

/// Keeps the prefix of a decaying series that stays above `floor_rel · max(y)`;
/// beyond that point the samples are dominated by rounding.
pub fn truncate_at_floor<T: Real>(t: &[T], y: &[T], floor_rel: T) -> (Vec<T>, Vec<T>) {
    let peak = y.iter().copied().fold(T::zero(), T::max);
    let cut = y.iter().position(|&v| !(v > floor_rel * peak)).unwrap_or(y.len());
    (t[..cut].to_vec(), y[..cut].to_vec())
}

/// One time sample of every scalar diagnostic. Absent functionals are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow<T> {
    pub t: T,
    pub mass_u: T,
    pub mass_w: T,
    pub mass_v: T,
    pub mass_z: T,
    pub entropy_u: T,
    pub entropy_w: T,
    pub linf_u: T,
    pub linf_w: T,
    pub h1_v: T,
    pub h1_z: T,
    pub f_val: Option<T>,
    pub g_val: Option<T>,
    pub h_val: Option<T>,
    pub l1_u_minus_1: T,
    pub l1_w_minus_1: T,
    pub w1inf_dist_u: T,
    pub w1inf_dist_w: T,
    pub dt: T,
}

/// Everything needed to turn a state into a [`DiagnosticsRow`].
#[derive(Clone, Debug)]
pub struct DiagnosticsContext<T> {
    pub dom: Domain<T>,
    pub params: ModelParams<T>,
    pub dp: DerivedParams<T>,
    pub rate_params: Option<RateParamsPP<T>>,
}

impl<T: Real> DiagnosticsContext<T> {
    pub fn new(dom: Domain<T>, params: ModelParams<T>, dp: DerivedParams<T>) -> Self {
        let rate_params = match params.regime() {
            Regime::FullyParabolic => rate_params_pp(&dp, &params).ok().flatten(),
            Regime::ParabolicElliptic => None,
        };
        Self { dom, params, dp, rate_params }
    }

    pub fn normalized(&self, state: &SimState<T>) -> Result<NormalizedState<T>> {
        normalize(state, &self.dp, &self.params)
    }

    pub fn row(&self, state: &SimState<T>, dt: T) -> Result<DiagnosticsRow<T>> {
        let dom = &self.dom;
        let ns = self.normalized(state)?;
        let l1 = |f: &Field<T>| f.values().iter().map(|&x| (x - T::one()).abs()).sum::<T>() * dom.cell_area();
        let (g_val, h_val) = match self.params.regime() {
            Regime::ParabolicElliptic if self.dp.eta1 > T::zero() => (Some(lyapunov_g(&ns, &self.dp, dom)?), None),
            Regime::ParabolicElliptic => (None, None),
            Regime::FullyParabolic => (
                None,
                match &self.rate_params {
                    Some(rp) => Some(lyapunov_h(&ns, &self.dp, rp, &self.params, dom)?),
                    None => None,
                },
            ),
        };
        Ok(DiagnosticsRow {
            t: state.t,
            mass_u: integrate(&state.u, dom)?,
            mass_w: integrate(&state.w, dom)?,
            mass_v: integrate(&state.v, dom)?,
            mass_z: integrate(&state.z, dom)?,
            entropy_u: entropy(&state.u, dom)?,
            entropy_w: entropy(&state.w, dom)?,
            linf_u: state.u.linf(),
            linf_w: state.w.linf(),
            h1_v: h1_sq_norm(&state.v, dom)?,
            h1_z: h1_sq_norm(&state.z, dom)?,
            f_val: Some(lyapunov_f(state, &self.params, dom)?),
            g_val,
            h_val,
            l1_u_minus_1: l1(&ns.u),
            l1_w_minus_1: l1(&ns.w),
            w1inf_dist_u: w1inf_distance(&state.u, self.dp.u0bar, dom),
            w1inf_dist_w: w1inf_distance(&state.w, self.dp.w0bar, dom),
            dt,
        })
    }
}

/// Largest face gradient of `f`, the `W^{1,∞}` seminorm part.
pub fn max_face_gradient<T: Real>(f: &Field<T>, dom: &Domain<T>) -> T {
    grad_faces(f, dom).max_abs()
}
