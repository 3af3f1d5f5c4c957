//! Domain constants: the Trudinger–Moser value `π*`, and variational lower-bound
//! certificates for the Poincaré-type constant `k` and the Gagliardo–Nirenberg constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grad_faces, gradient_sq_norm, laplacian, Domain, Field};
use crate::scalar::Real;

/// `π*` for a rectangle, which is never a ball: `4π`.
pub fn pistar<T: Real>(_dom: &Domain<T>) -> T {
    T::lit(4.0) * T::PI()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    Lower,
    Upper,
}

impl std::fmt::Display for BoundDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundDirection::Lower => "lower",
            BoundDirection::Upper => "upper",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ConstantEstimate<T> {
    pub value: T,
    pub bound_direction: BoundDirection,
    /// Accepted descent steps of the winning start.
    pub iterations: usize,
    pub best_start: usize,
    pub best_test_function: Field<T>,
    /// Objective after each accepted step of the winning start.
    pub residual_history: Vec<T>,
    /// Raw extremal value of the optimized ratio.
    pub ratio: T,
    pub alarm: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    /// Seeded random starts, in addition to the structured ones.
    pub random_starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative improvement of one step falls below this.
    pub rel_tol: f64,
    /// Include the lowest cosine mode (and a few other structured fields) as starts.
    pub warm_start: bool,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { random_starts: 8, seed: 0x5eed, max_iter: 10_000, rel_tol: 1e-10, warm_start: true }
    }
}

struct Run<T> {
    best: T,
    field: Field<T>,
    history: Vec<T>,
}

/// Normalized-direction descent with backtracking. `eval` returns the value and
/// gradient of the objective to be minimized; `project` restores admissibility.
fn descend<T: Real>(
    start: Field<T>,
    cfg: &OptConfig,
    center: T,
    eval: &(dyn Fn(&Field<T>) -> (T, Field<T>) + Sync),
    project: &(dyn Fn(&mut Field<T>) + Sync),
) -> Run<T> {
    let mut x = start;
    project(&mut x);
    let (mut fx, mut g) = eval(&x);
    let mut history = vec![fx];
    let mut step = T::one();
    let rel_tol = T::lit(cfg.rel_tol);
    for _ in 0..cfg.max_iter {
        if !fx.is_finite() {
            break;
        }
        let gmax = g.linf();
        let scale = x.values().iter().fold(T::zero(), |m, &v| m.max((v - center).abs()));
        if !(gmax > T::zero()) || !(scale > T::zero()) {
            break;
        }
        let dir = g.scaled(-scale / gmax);
        // restart the halving sequence a little above the last accepted step
        let mut s = (step * T::lit(4.0)).min(T::one());
        let mut accepted = None;
        while s > T::lit(1e-14) {
            let mut trial = x.axpy(s, &dir);
            project(&mut trial);
            let (ft, gt) = eval(&trial);
            if ft < fx {
                accepted = Some((trial, ft, gt));
                break;
            }
            s = s * T::lit(0.5);
        }
        let Some((xn, fnew, gn)) = accepted else { break };
        let improvement = (fx - fnew) / fx.abs().max(T::min_positive_value());
        x = xn;
        fx = fnew;
        g = gn;
        step = s;
        history.push(fx);
        if improvement < rel_tol {
            break;
        }
    }
    Run { best: fx, field: x, history }
}

fn project_mean_one<T: Real>(f: &mut Field<T>) {
    let shift = T::one() - f.mean();
    f.values_mut().iter_mut().for_each(|v| *v += shift);
}

fn remove_mean<T: Real>(g: &mut Field<T>) {
    let m = g.mean();
    g.values_mut().iter_mut().for_each(|v| *v -= m);
}

/// Smooth random field built from low cosine modes plus a little cell noise.
fn random_smooth<T: Real>(dom: &Domain<T>, seed: u64) -> Field<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> = (0..12)
        .map(|_| (rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64, rng.gen_range(-1.0..1.0)))
        .collect();
    let (lx, ly) = (dom.lx().as_f64(), dom.ly().as_f64());
    let mut f = Field::from_fn(dom, |x, y| {
        let (x, y) = (x.as_f64(), y.as_f64());
        let s: f64 = modes
            .iter()
            .map(|&(p, q, c)| c * (p * std::f64::consts::PI * x / lx).cos() * (q * std::f64::consts::PI * y / ly).cos())
            .sum();
        T::lit(s)
    });
    for v in f.values_mut() {
        *v += T::lit(0.01 * rng.gen_range(-1.0..1.0));
    }
    f
}

/// Structured starts: lowest cosine modes in each direction, a half-domain step, a corner block.
fn structured_starts<T: Real>(dom: &Domain<T>) -> Vec<Field<T>> {
    let (lx, ly) = (dom.lx(), dom.ly());
    let pi = T::PI();
    let longest_x = lx >= ly;
    let eps = T::lit(0.1);
    let cos_long = Field::from_fn(dom, |x, y| {
        if longest_x {
            (pi * x / lx).cos()
        } else {
            (pi * y / ly).cos()
        }
    });
    let cos_x = Field::from_fn(dom, |x, _| (pi * x / lx).cos());
    let cos_y = Field::from_fn(dom, |_, y| (pi * y / ly).cos());
    let half = T::lit(0.5);
    let step = Field::from_fn(dom, |x, y| {
        let s = if longest_x { x < half * lx } else { y < half * ly };
        if s {
            T::one()
        } else {
            -T::one()
        }
    });
    let corner = Field::from_fn(dom, |x, y| if x < T::lit(0.25) * lx && y < T::lit(0.25) * ly { T::one() } else { T::zero() });
    vec![cos_long, cos_x, cos_y, step, corner]
        .into_iter()
        .map(|f| f.scaled(eps))
        .collect()
}

fn starts<T: Real>(dom: &Domain<T>, cfg: &OptConfig) -> Vec<Field<T>> {
    let mut s = if cfg.warm_start { structured_starts(dom) } else { Vec::new() };
    s.extend((0..cfg.random_starts).map(|i| random_smooth(dom, splitmix(cfg.seed, i as u64))));
    s
}

/// Deterministic seed derivation shared by every multi-start consumer.
pub fn splitmix(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every start shifted by `offset`; step lengths scale with `max |x − center|`.
fn multistart<T: Real>(
    dom: &Domain<T>,
    cfg: &OptConfig,
    offset: T,
    center: T,
    extra: Vec<Field<T>>,
    eval: &(dyn Fn(&Field<T>) -> (T, Field<T>) + Sync),
    project: &(dyn Fn(&mut Field<T>) + Sync),
) -> Result<(usize, Run<T>)> {
    let mut init = extra;
    init.extend(starts(dom, cfg).into_iter().map(|s| s.map(|v| v + offset)));
    if init.is_empty() {
        return Err(Error::EstimateFailure("no optimizer starts configured".into()));
    }
    let runs: Vec<Run<T>> = init
        .into_par_iter()
        .map(|s| descend(s, cfg, center, eval, project))
        .collect();
    let mut best: Option<(usize, Run<T>)> = None;
    for (i, r) in runs.into_iter().enumerate() {
        if !r.best.is_finite() {
            continue;
        }
        if best.as_ref().map_or(true, |(_, b)| r.best < b.best) {
            best = Some((i, r));
        }
    }
    best.ok_or_else(|| Error::EstimateFailure("every start degenerated".into()))
}

/// `(‖∇φ‖_{L¹}², ‖φ − 1‖²_{L²})` and the ratio's subgradient. The L¹ norm of the
/// gradient sums `|Δφ/h|` over x- and y-faces, each weighted by the cell area.
pub fn k_ratio<T: Real>(phi: &Field<T>, dom: &Domain<T>) -> (T, Field<T>) {
    let (nx, ny) = (dom.nx(), dom.ny());
    let (hx, hy) = (dom.hx(), dom.hy());
    let a = dom.cell_area();
    let f = phi.values();
    let mut dn = vec![T::zero(); f.len()];
    let mut n = T::zero();
    let mut face = |p: usize, q: usize, h: T| {
        let g = (f[q] - f[p]) / h;
        n += g.abs() * a;
        let s = if g > T::zero() {
            T::one()
        } else if g < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        dn[q] += s * a / h;
        dn[p] -= s * a / h;
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
    let m = phi.mean();
    let d: T = f.iter().map(|&v| (v - m) * (v - m)).sum::<T>() * a;
    if !(d > T::zero()) {
        return (T::infinity(), Field::zeros(dom));
    }
    let r = n * n / d;
    let grad: Vec<T> = f
        .iter()
        .zip(&dn)
        .map(|(&v, &dni)| (T::lit(2.0) * n * dni * d - n * n * T::lit(2.0) * (v - m) * a) / (d * d))
        .collect();
    let mut g = Field::from_vec(dom, grad).expect("shape");
    remove_mean(&mut g);
    (r, g)
}

/// Lower-bound certificate `k̂ = 4|Ω| / min ratio`.
pub fn estimate_k<T: Real>(dom: &Domain<T>, cfg: &OptConfig) -> Result<ConstantEstimate<T>> {
    let eval = |f: &Field<T>| k_ratio(f, dom);
    let (idx, run) = multistart(dom, cfg, T::one(), T::one(), Vec::new(), &eval, &project_mean_one)?;
    if !(run.best > T::zero()) {
        return Err(Error::EstimateFailure(format!("degenerate ratio {}", run.best)));
    }
    let value = T::lit(4.0) * dom.area() / run.best;
    let reference = k_reference(dom);
    let alarm = (value > T::lit(100.0) * reference)
        .then(|| format!("k estimate {value} exceeds 100x the convex-domain lower bound {reference}; grid too coarse?"));
    Ok(ConstantEstimate {
        value,
        bound_direction: BoundDirection::Lower,
        iterations: run.history.len() - 1,
        best_start: idx,
        best_test_function: run.field,
        residual_history: run.history,
        ratio: run.best,
        alarm,
    })
}

/// Analytic lower bound `4d²/π²` for convex domains of diameter `d`.
pub fn k_reference<T: Real>(dom: &Domain<T>) -> T {
    let d = dom.diameter();
    T::lit(4.0) * d * d / (T::PI() * T::PI())
}

/// `R(ψ) = ‖ψ‖⁴_{L⁴} / (8(‖ψ‖²_{L²}‖∇ψ‖²_{L²} + ‖ψ‖⁴_{L²}))`.
pub fn cgn_ratio<T: Real>(psi: &Field<T>, dom: &Domain<T>) -> Result<T> {
    let a = dom.cell_area();
    let l4: T = psi.values().iter().map(|&v| v * v * v * v).sum::<T>() * a;
    let l2: T = psi.values().iter().map(|&v| v * v).sum::<T>() * a;
    let g = gradient_sq_norm(psi, dom)?;
    Ok(l4 / (T::lit(8.0) * (l2 * g + l2 * l2)))
}

fn cgn_ratio_grad<T: Real>(psi: &Field<T>, dom: &Domain<T>) -> (T, Field<T>) {
    let a = dom.cell_area();
    let l4: T = psi.values().iter().map(|&v| v * v * v * v).sum::<T>() * a;
    let l2: T = psi.values().iter().map(|&v| v * v).sum::<T>() * a;
    let Ok(g) = gradient_sq_norm(psi, dom) else {
        return (T::nan(), Field::zeros(dom));
    };
    let den = T::lit(8.0) * (l2 * g + l2 * l2);
    if !(den > T::zero()) {
        return (T::nan(), Field::zeros(dom));
    }
    let lap = laplacian(psi, dom);
    let two = T::lit(2.0);
    let grad: Vec<T> = psi
        .values()
        .iter()
        .zip(lap.values())
        .map(|(&v, &l)| {
            let dl4 = T::lit(4.0) * v * v * v * a;
            let dl2 = two * v * a;
            let dg = -two * l * a;
            let dden = T::lit(8.0) * (dl2 * g + l2 * dg + two * l2 * dl2);
            (dl4 * den - l4 * dden) / (den * den)
        })
        .collect();
    (l4 / den, Field::from_vec(dom, grad).expect("shape"))
}

/// Lower-bound certificate for `C_GN⁴`: the largest ratio found by ascent.
pub fn estimate_cgn<T: Real>(dom: &Domain<T>, cfg: &OptConfig) -> Result<ConstantEstimate<T>> {
    let eval = |f: &Field<T>| {
        let (r, g) = cgn_ratio_grad(f, dom);
        (-r, g.scaled(-T::one()))
    };
    let project = |f: &mut Field<T>| {
        // scale-invariant objective: keep the sup-norm near one for conditioning
        let m = f.linf();
        if m > T::zero() {
            f.values_mut().iter_mut().for_each(|v| *v /= m);
        }
    };
    // the constant field is the natural weak start; the others perturb it
    let (idx, run) = multistart(dom, cfg, T::one(), T::zero(), vec![Field::constant(dom, T::one())], &eval, &project)?;
    let value = -run.best;
    if !(value > T::zero()) || !value.is_finite() {
        return Err(Error::EstimateFailure(format!("degenerate ratio {value}")));
    }
    Ok(ConstantEstimate {
        value,
        bound_direction: BoundDirection::Lower,
        iterations: run.history.len() - 1,
        best_start: idx,
        best_test_function: run.field,
        residual_history: run.history.into_iter().map(|v| -v).collect(),
        ratio: value,
        alarm: None,
    })
}

/// Smallest `‖∇φ‖²_{L²} / ‖φ − 1‖²_{L²}` found over mean-one fields; the exact
/// value on a rectangle is `π²/max(Lx, Ly)²`.
pub fn poincare_l2_oracle<T: Real>(dom: &Domain<T>, cfg: &OptConfig) -> Result<T> {
    let eval = |f: &Field<T>| l2_ratio_grad(f, dom);
    let (_, run) = multistart(dom, cfg, T::one(), T::one(), Vec::new(), &eval, &project_mean_one)?;
    if !(run.best > T::zero()) {
        return Err(Error::EstimateFailure(format!("degenerate ratio {}", run.best)));
    }
    Ok(run.best)
}

fn l2_ratio_grad<T: Real>(phi: &Field<T>, dom: &Domain<T>) -> (T, Field<T>) {
    let a = dom.cell_area();
    let m = phi.mean();
    let d: T = phi.values().iter().map(|&v| (v - m) * (v - m)).sum::<T>() * a;
    let faces = grad_faces(phi, dom);
    let n: T = (faces.x.iter().map(|&g| g * g).sum::<T>() + faces.y.iter().map(|&g| g * g).sum::<T>()) * a;
    if !(d > T::zero()) {
        return (T::infinity(), Field::zeros(dom));
    }
    let lap = laplacian(phi, dom);
    let two = T::lit(2.0);
    let grad: Vec<T> = phi
        .values()
        .iter()
        .zip(lap.values())
        .map(|(&v, &l)| (-two * l * a * d - n * two * (v - m) * a) / (d * d))
        .collect();
    let mut g = Field::from_vec(dom, grad).expect("shape");
    remove_mean(&mut g);
    (n / d, g)
}
