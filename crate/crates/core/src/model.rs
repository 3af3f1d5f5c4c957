//! Parameters, derived quantities, initial data, and the normalization
//! `U = u/ū₀, W = w/w̄₀, V = χ₁(v - v̄), Z = χ₂(z - z̄)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate, Domain, Field};
use crate::scalar::Real;

/// Which of the two analyzed relaxation regimes a parameter set is in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `τ₁ = τ₂ = 0`: signals solve Helmholtz problems instantaneously.
    ParabolicElliptic,
    /// `τ₁, τ₂ > 0`.
    FullyParabolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub chi1: T,
    pub chi2: T,
    pub chi3: T,
    pub tau1: T,
    pub tau2: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(chi1: T, chi2: T, chi3: T, tau1: T, tau2: T) -> Result<Self> {
        let p = Self {
            chi1,
            chi2,
            chi3,
            tau1,
            tau2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parabolic-elliptic parameters (`τ₁ = τ₂ = 0`).
    pub fn elliptic(chi1: T, chi2: T, chi3: T) -> Result<Self> {
        Self::new(chi1, chi2, chi3, T::zero(), T::zero())
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.chi1, self.chi2, self.chi3, self.tau1, self.tau2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite model parameter".into()));
        }
        if self.chi1 < T::zero() || self.chi2 < T::zero() {
            return Err(Error::InvalidParams(format!(
                "chi1 and chi2 must be non-negative (got {}, {})",
                self.chi1, self.chi2
            )));
        }
        if self.tau1 < T::zero() || self.tau2 < T::zero() {
            return Err(Error::InvalidParams("relaxation times must be >= 0".into()));
        }
        if (self.tau1 == T::zero()) != (self.tau2 == T::zero()) {
            return Err(Error::InvalidParams(format!(
                "mixed relaxation (tau1={}, tau2={}) is not supported: both zero or both positive",
                self.tau1, self.tau2
            )));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if self.tau1 == T::zero() {
            Regime::ParabolicElliptic
        } else {
            Regime::FullyParabolic
        }
    }
}

/// Where a domain constant came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    UserSupplied,
    Estimated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConstant<T> {
    pub value: T,
    pub provenance: Provenance,
}

impl<T> DomainConstant<T> {
    pub fn user(value: T) -> Self {
        Self {
            value,
            provenance: Provenance::UserSupplied,
        }
    }
    pub fn estimated(value: T) -> Self {
        Self {
            value,
            provenance: Provenance::Estimated,
        }
    }
}

/// Quantities fixed by the initial masses and the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams<T> {
    pub m1: T,
    pub m2: T,
    pub area: T,
    pub u0bar: T,
    pub w0bar: T,
    /// `χ₁ w̄₀`
    pub eta1: T,
    /// `χ₂ ū₀`
    pub eta2: T,
    /// `χ₃ / χ₁`
    pub chi: T,
    pub pistar: T,
    pub k: Option<DomainConstant<T>>,
    /// `C_GN` itself, not its fourth power.
    pub cgn: Option<DomainConstant<T>>,
}

impl<T: Real> DerivedParams<T> {
    pub fn from_masses(m1: T, m2: T, params: &ModelParams<T>, dom: &Domain<T>) -> Result<Self> {
        params.validate()?;
        if !(m1 > T::zero() && m2 > T::zero() && m1.is_finite() && m2.is_finite()) {
            return Err(Error::InvalidData(format!(
                "masses must be positive and finite (m1={m1}, m2={m2})"
            )));
        }
        let area = dom.area();
        let u0bar = m1 / area;
        let w0bar = m2 / area;
        Ok(Self {
            m1,
            m2,
            area,
            u0bar,
            w0bar,
            eta1: params.chi1 * w0bar,
            eta2: params.chi2 * u0bar,
            // undefined without the u-taxis; rate formulas then report absent values
            chi: if params.chi1 > T::zero() { params.chi3 / params.chi1 } else { T::nan() },
            pistar: crate::constants::pistar(dom),
            k: None,
            cgn: None,
        })
    }

    pub fn from_initial(
        u0: &Field<T>,
        w0: &Field<T>,
        params: &ModelParams<T>,
        dom: &Domain<T>,
    ) -> Result<Self> {
        Self::from_masses(integrate(u0, dom)?, integrate(w0, dom)?, params, dom)
    }

    pub fn with_k(mut self, k: DomainConstant<T>) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_cgn(mut self, cgn: DomainConstant<T>) -> Self {
        self.cgn = Some(cgn);
        self
    }

    pub fn k_value(&self) -> Result<T> {
        self.k
            .map(|k| k.value)
            .ok_or_else(|| Error::PreconditionViolation("Poincaré-type constant k not set".into()))
    }

    pub fn cgn_value(&self) -> Result<T> {
        self.cgn
            .map(|c| c.value)
            .ok_or_else(|| Error::PreconditionViolation("Gagliardo–Nirenberg constant not set".into()))
    }
}

/// The quadruple `(u, v, w, z)` at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState<T> {
    pub t: T,
    pub u: Field<T>,
    pub v: Field<T>,
    pub w: Field<T>,
    pub z: Field<T>,
}

impl<T: Real> SimState<T> {
    pub fn new(u: Field<T>, v: Field<T>, w: Field<T>, z: Field<T>) -> Self {
        Self {
            t: T::zero(),
            u,
            v,
            w,
            z,
        }
    }

    pub fn fields(&self) -> [&Field<T>; 4] {
        [&self.u, &self.v, &self.w, &self.z]
    }

    /// Shape, finiteness, and strict positivity of the densities.
    pub fn validate(&self, dom: &Domain<T>) -> Result<()> {
        for f in self.fields() {
            f.check_shape(dom)?;
            f.check_finite()?;
        }
        self.u.check_positive()?;
        self.w.check_positive()
    }
}

/// State of the normalized system; the stored means allow exact inversion.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedState<T> {
    pub t: T,
    pub u: Field<T>,
    pub v: Field<T>,
    pub w: Field<T>,
    pub z: Field<T>,
    pub v_mean: T,
    pub z_mean: T,
}

pub fn normalize<T: Real>(state: &SimState<T>, dp: &DerivedParams<T>, params: &ModelParams<T>) -> Result<NormalizedState<T>> {
    if !(dp.u0bar > T::zero() && dp.w0bar > T::zero()) {
        return Err(Error::InvalidData("cannot normalize with zero mass".into()));
    }
    let v_mean = state.v.mean();
    let z_mean = state.z.mean();
    Ok(NormalizedState {
        t: state.t,
        u: state.u.scaled(T::one() / dp.u0bar),
        w: state.w.scaled(T::one() / dp.w0bar),
        v: state.v.map(|x| params.chi1 * (x - v_mean)),
        z: state.z.map(|x| params.chi2 * (x - z_mean)),
        v_mean,
        z_mean,
    })
}

pub fn denormalize<T: Real>(ns: &NormalizedState<T>, dp: &DerivedParams<T>, params: &ModelParams<T>) -> SimState<T> {
    SimState {
        t: ns.t,
        u: ns.u.scaled(dp.u0bar),
        w: ns.w.scaled(dp.w0bar),
        v: ns.v.map(|x| x / params.chi1 + ns.v_mean),
        z: ns.z.map(|x| x / params.chi2 + ns.z_mean),
    }
}

/// Default positivity floor for density initial data: `1e-8 · mass / area`.
pub fn default_floor<T: Real>(mass: T, dom: &Domain<T>) -> T {
    T::lit(1e-8) * mass / dom.area()
}

/// Gaussian bump centered at `center` plus a constant floor, rescaled so that
/// its integral is exactly `mass`. Widths much larger than the domain give an
/// (almost) flat field.
pub fn build_gaussian_bump<T: Real>(
    dom: &Domain<T>,
    mass: T,
    center: (T, T),
    width: T,
    floor: T,
) -> Result<Field<T>> {
    if !(width > T::zero() && width.is_finite()) {
        return Err(Error::InvalidData(format!("width must be positive, got {width}")));
    }
    if !(floor > T::zero()) {
        return Err(Error::InvalidData("floor must be strictly positive".into()));
    }
    if !dom.contains(center.0, center.1) {
        return Err(Error::InvalidData("bump center outside the closed domain".into()));
    }
    let excess = mass - floor * dom.area();
    if !(excess > T::zero()) {
        return Err(Error::InvalidData(format!(
            "mass {mass} does not exceed floor * area = {}",
            floor * dom.area()
        )));
    }
    let two_w2 = T::lit(2.0) * width * width;
    let bump = Field::from_fn(dom, |x, y| {
        let (dx, dy) = (x - center.0, y - center.1);
        (-(dx * dx + dy * dy) / two_w2).exp()
    });
    let bump_mass = integrate(&bump, dom)?;
    if !(bump_mass > T::zero()) {
        return Err(Error::InvalidData("bump underflows on this grid".into()));
    }
    let scale = excess / bump_mass;
    let field = bump.map(|g| floor + scale * g);
    // Remove the last rounding residue of the mass through the (dominant) bump cells.
    let err = mass - integrate(&field, dom)?;
    let fix = err / dom.area();
    Ok(field.map(|v| v + fix))
}

/// `∫ f |x - x₀|²`.
pub fn second_moment<T: Real>(f: &Field<T>, dom: &Domain<T>, center: (T, T)) -> T {
    let weights = Field::from_fn(dom, |x, y| {
        let (dx, dy) = (x - center.0, y - center.1);
        dx * dx + dy * dy
    });
    crate::grid::inner(f, &weights, dom)
}

/// `(w₀, z₀) = ((χ₂/χ₁) u₀, (χ₁/χ₂) v₀)`, putting the masses on the line `m₁χ₂ = m₂χ₁`.
pub fn build_symmetric_copy<T: Real>(
    u0: &Field<T>,
    v0: &Field<T>,
    params: &ModelParams<T>,
) -> Result<(Field<T>, Field<T>)> {
    if params.tau1 != params.tau2 {
        return Err(Error::PreconditionViolation(format!(
            "symmetric reduction needs tau1 == tau2 (got {}, {})",
            params.tau1, params.tau2
        )));
    }
    let r = params.chi2 / params.chi1;
    Ok((u0.scaled(r), v0.scaled(T::one() / r)))
}

/// `mean · (1 + amplitude · cos(mx π x / Lx) cos(my π y / Ly))`; the cosine has zero mean.
pub fn build_cosine_mode<T: Real>(
    dom: &Domain<T>,
    mean: T,
    amplitude: T,
    mode_x: usize,
    mode_y: usize,
) -> Field<T> {
    let (kx, ky) = (
        T::PI() * T::from_usize_lossy(mode_x) / dom.lx(),
        T::PI() * T::from_usize_lossy(mode_y) / dom.ly(),
    );
    Field::from_fn(dom, |x, y| mean * (T::one() + amplitude * (kx * x).cos() * (ky * y).cos()))
}

/// `mean · (1 + amplitude · ξ)` with i.i.d. `ξ ~ U(-1, 1)`, re-centered to the exact mean.
/// Positive whenever `amplitude < 1/(1 + |ξ̄|)`; the sample mean `ξ̄` shrinks like `N^{-1/2}`, so
/// `amplitude <= 0.8` is safe from about a hundred cells up.
pub fn build_random_perturbation<T: Real>(dom: &Domain<T>, mean: T, amplitude: T, seed: u64) -> Field<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<T> = (0..dom.len()).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    let n = T::from_usize_lossy(raw.len());
    let avg = raw.iter().copied().sum::<T>() / n;
    let values = raw.into_iter().map(|x| mean * (T::one() + amplitude * (x - avg))).collect();
    Field::from_vec(dom, values).expect("length matches domain")
}
