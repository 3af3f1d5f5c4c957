//! Solver for `(a I - b Δ_h) x = rhs` with homogeneous Neumann boundary.
//!
//! Two interchangeable backends meet the same residual contract:
//! * [`Backend::Cosine`] diagonalizes the five-point Neumann Laplacian with a
//!   type-II cosine transform in each direction (exact up to rounding);
//! * [`Backend::ConjugateGradient`] runs Jacobi-preconditioned CG.

use std::str::FromStr;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{laplacian, Domain, Field};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Cosine,
    ConjugateGradient,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" | "dct" => Ok(Self::Cosine),
            "cg" | "conjugate_gradient" => Ok(Self::ConjugateGradient),
            other => Err(Error::InvalidParams(format!("unknown helmholtz backend `{other}`"))),
        }
    }
}

/// Neumann eigenvalues of `-Δ_h` in one direction: `4 sin²(πk/2n) / h²`.
pub fn neumann_eigenvalues<T: Real>(n: usize, h: T) -> Vec<T> {
    let two_n = T::from_usize_lossy(2 * n);
    (0..n)
        .map(|k| {
            let s = (T::PI() * T::from_usize_lossy(k) / two_n).sin();
            T::lit(4.0) * s * s / (h * h)
        })
        .collect()
}

/// Reusable Helmholtz solver bound to one domain.
#[derive(Clone)]
pub struct Helmholtz<T: Real> {
    dom: Domain<T>,
    backend: Backend,
    dct_x: Arc<dyn TransformType2And3<T>>,
    dct_y: Arc<dyn TransformType2And3<T>>,
    eig_x: Vec<T>,
    eig_y: Vec<T>,
    max_iter: usize,
}

impl<T: Real> std::fmt::Debug for Helmholtz<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Helmholtz")
            .field("dom", &self.dom)
            .field("backend", &self.backend)
            .finish()
    }
}

impl<T: Real> Helmholtz<T> {
    pub fn new(dom: &Domain<T>, backend: Backend) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            dom: *dom,
            backend,
            dct_x: planner.plan_dct2(dom.nx()),
            dct_y: planner.plan_dct2(dom.ny()),
            eig_x: neumann_eigenvalues(dom.nx(), dom.hx()),
            eig_y: neumann_eigenvalues(dom.ny(), dom.hy()),
            max_iter: 20 * dom.len().max(100),
        }
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.dom
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Relative residual target used by the iterative backend.
    pub fn tolerance() -> T {
        T::epsilon() * T::lit(1000.0)
    }

    /// `(a I - b Δ_h) x`.
    pub fn apply(&self, x: &Field<T>, a: T, b: T) -> Field<T> {
        let lap = laplacian(x, &self.dom);
        x.zip_map(&lap, |xv, lv| a * xv - b * lv)
    }

    pub fn solve(&self, rhs: &Field<T>, a: T, b: T) -> Result<Field<T>> {
        rhs.check_shape(&self.dom)?;
        rhs.check_finite()?;
        if !(a > T::zero() && a.is_finite()) || !(b >= T::zero() && b.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "helmholtz coefficients need a > 0, b >= 0 (got a={a}, b={b})"
            )));
        }
        let x = match self.backend {
            Backend::Cosine => self.solve_cosine(rhs, a, b),
            Backend::ConjugateGradient => self.solve_cg(rhs, a, b)?,
        };
        // Σ(Δ_h x) = 0, so the constant mode is decoupled: pin it exactly.
        let n = T::from_usize_lossy(self.dom.len());
        let shift = (rhs.sum() - a * x.sum()) / (a * n);
        Ok(x.map(|v| v + shift))
    }

    fn solve_cosine(&self, rhs: &Field<T>, a: T, b: T) -> Field<T> {
        let (nx, ny) = (self.dom.nx(), self.dom.ny());
        let mut rows = rhs.values().to_vec();
        let mut scratch = vec![T::zero(); self.dct_x.get_scratch_len().max(self.dct_y.get_scratch_len())];
        for row in rows.chunks_exact_mut(nx) {
            self.dct_x.process_dct2_with_scratch(row, &mut scratch);
        }
        let mut cols = transpose(&rows, nx, ny);
        for (i, col) in cols.chunks_exact_mut(ny).enumerate() {
            self.dct_y.process_dct2_with_scratch(col, &mut scratch);
            let lx = self.eig_x[i];
            for (c, &ly) in col.iter_mut().zip(&self.eig_y) {
                *c /= a + b * (lx + ly);
            }
            self.dct_y.process_dct3_with_scratch(col, &mut scratch);
        }
        let mut out = transpose(&cols, ny, nx);
        let scale = T::lit(4.0) / T::from_usize_lossy(nx * ny);
        for row in out.chunks_exact_mut(nx) {
            self.dct_x.process_dct3_with_scratch(row, &mut scratch);
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        Field::from_vec(&self.dom, out).expect("shape preserved")
    }

    fn solve_cg(&self, rhs: &Field<T>, a: T, b: T) -> Result<Field<T>> {
        let dom = &self.dom;
        let (nx, ny) = (dom.nx(), dom.ny());
        let (cx, cy) = (
            T::one() / (dom.hx() * dom.hx()),
            T::one() / (dom.hy() * dom.hy()),
        );
        let diag: Vec<T> = (0..dom.len())
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                let mut d = a;
                if i > 0 {
                    d += b * cx;
                }
                if i + 1 < nx {
                    d += b * cx;
                }
                if j > 0 {
                    d += b * cy;
                }
                if j + 1 < ny {
                    d += b * cy;
                }
                d
            })
            .collect();
        let rhs_norm = rhs.linf();
        let mut x = rhs.zip_map(&Field::from_vec(dom, diag.clone())?, |r, d| r / d);
        if rhs_norm == T::zero() {
            return Ok(Field::zeros(dom));
        }
        let target = Self::tolerance() * rhs_norm;
        let mut r = rhs.zip_map(&self.apply(&x, a, b), |r, ax| r - ax);
        let mut z: Vec<T> = r.values().iter().zip(&diag).map(|(&rv, &d)| rv / d).collect();
        let mut p = Field::from_vec(dom, z.clone())?;
        let mut rz: T = r.values().iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let mut iterations = 0;
        while r.linf() > target {
            if iterations >= self.max_iter {
                return Err(Error::SolveFailure {
                    iterations,
                    residual: (r.linf() / rhs_norm).as_f64(),
                });
            }
            let ap = self.apply(&p, a, b);
            let pap: T = p.values().iter().zip(ap.values()).map(|(&a, &b)| a * b).sum();
            let alpha = rz / pap;
            x = x.axpy(alpha, &p);
            r = r.axpy(-alpha, &ap);
            // Periodic true-residual refresh keeps rounding drift bounded.
            if iterations % 50 == 49 {
                r = rhs.zip_map(&self.apply(&x, a, b), |r, ax| r - ax);
            }
            z = r.values().iter().zip(&diag).map(|(&rv, &d)| rv / d).collect();
            let rz_new: T = r.values().iter().zip(&z).map(|(&a, &b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            let zf = Field::from_vec(dom, z.clone())?;
            p = zf.axpy(beta, &p);
            iterations += 1;
        }
        Ok(x)
    }
}

fn transpose<T: Copy>(src: &[T], width: usize, height: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(src.len());
    for i in 0..width {
        for j in 0..height {
            out.push(src[j * width + i]);
        }
    }
    out
}

/// One-shot convenience wrapper around [`Helmholtz`] with the cosine backend.
pub fn solve_helmholtz<T: Real>(rhs: &Field<T>, a: T, b: T, dom: &Domain<T>) -> Result<Field<T>> {
    Helmholtz::new(dom, Backend::Cosine).solve(rhs, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(dom: &Domain<f64>, seed: u64) -> Field<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_fn(dom, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn backends() -> [Backend; 2] {
        [Backend::Cosine, Backend::ConjugateGradient]
    }

    #[test]
    fn constant_rhs_is_fixed_point() {
        let d = Domain::<f64>::new(2.0, 1.0, 16, 12).unwrap();
        for be in backends() {
            let sol = Helmholtz::new(&d, be)
                .solve(&Field::constant(&d, 2.5), 1.0, 1.0)
                .unwrap();
            assert!(sol.values().iter().all(|&v| (v - 2.5).abs() < 1e-13), "{be:?}");
        }
    }

    #[test]
    fn cosine_mode_hits_discrete_eigenvalue() {
        let lx = 1.7;
        let d = Domain::<f64>::new(lx, 1.0, 32, 16).unwrap();
        let rhs = Field::from_fn(&d, |x, _| (PI * x / lx).cos());
        let hx = d.hx();
        let lam = 2.0 * (1.0 - (PI * hx / lx).cos()) / (hx * hx);
        for be in backends() {
            let sol = Helmholtz::new(&d, be).solve(&rhs, 1.0, 1.0).unwrap();
            let expected = rhs.scaled(1.0 / (1.0 + lam));
            assert!(sol.max_abs_diff(&expected) < 1e-12, "{be:?}");
            // and the continuum value is close
            let cont = rhs.scaled(1.0 / (1.0 + PI * PI / (lx * lx)));
            assert!(sol.max_abs_diff(&cont) < 1e-2);
        }
    }

    #[test]
    fn random_rhs_round_trip_and_mass() {
        let d = Domain::<f64>::new(1.0, 2.0, 24, 40).unwrap();
        let rhs = random_field(&d, 9).map(|v| v + 0.3);
        for be in backends() {
            let h = Helmholtz::new(&d, be);
            for &(a, b) in &[(1.0, 1.0), (3.0, 1e-3), (1.0 + 1e3, 1.0), (0.5, 0.0)] {
                let sol = h.solve(&rhs, a, b).unwrap();
                let back = h.apply(&sol, a, b);
                assert!(back.max_abs_diff(&rhs) <= 1e-10 * rhs.linf(), "{be:?} a={a} b={b}");
                let m_sol = integrate(&sol, &d).unwrap();
                let m_rhs = integrate(&rhs, &d).unwrap();
                assert!((m_sol - m_rhs / a).abs() <= 1e-12 * (m_rhs / a).abs(), "{be:?}");
            }
        }
    }

    #[test]
    fn cosine_backend_is_deterministic() {
        let d = Domain::<f64>::unit_square(20).unwrap();
        let rhs = random_field(&d, 4);
        let h = Helmholtz::new(&d, Backend::Cosine);
        let a = h.solve(&rhs, 1.0, 0.1).unwrap();
        let b = h.solve(&rhs, 1.0, 0.1).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_bad_coefficients() {
        let d = Domain::<f64>::unit_square(8).unwrap();
        let h = Helmholtz::new(&d, Backend::Cosine);
        assert!(h.solve(&Field::zeros(&d), 0.0, 1.0).is_err());
        assert!(h.solve(&Field::zeros(&d), 1.0, -1.0).is_err());
    }

    #[test]
    fn single_precision_solve() {
        let d = Domain::<f32>::unit_square(16).unwrap();
        let rhs = Field::from_fn(&d, |x, y| 1.0 + 0.1 * (x * y));
        let h = Helmholtz::new(&d, Backend::Cosine);
        let sol = h.solve(&rhs, 1.0, 0.5).unwrap();
        assert!(h.apply(&sol, 1.0, 0.5).max_abs_diff(&rhs) < 1e-4);
    }
}
