//! Uniform cell-centered grid on a rectangle with homogeneous Neumann boundary.
//!
//! Cells are stored row-major: cell `(i, j)` (column `i` along x, row `j` along y)
//! lives at index `j * nx + i`. Boundary faces carry zero flux, which is the
//! mirror ghost-cell extension: the ghost value equals its interior neighbour.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rectangle `[0, lx] x [0, ly]` split into `nx * ny` equal cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain<T> {
    lx: T,
    ly: T,
    nx: usize,
    ny: usize,
}

impl<T: Real> Domain<T> {
    pub const MIN_CELLS: usize = 4;

    pub fn new(lx: T, ly: T, nx: usize, ny: usize) -> Result<Self> {
        if !(lx.is_finite() && ly.is_finite() && lx > T::zero() && ly > T::zero()) {
            return Err(Error::InvalidParams(format!(
                "domain lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        if nx < Self::MIN_CELLS || ny < Self::MIN_CELLS {
            return Err(Error::InvalidParams(format!(
                "need at least {} cells per direction, got {nx} x {ny}",
                Self::MIN_CELLS
            )));
        }
        Ok(Self { lx, ly, nx, ny })
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(T::one(), T::one(), n, n)
    }

    /// Same rectangle, different resolution.
    pub fn with_resolution(&self, nx: usize, ny: usize) -> Result<Self> {
        Self::new(self.lx, self.ly, nx, ny)
    }

    pub fn lx(&self) -> T {
        self.lx
    }
    pub fn ly(&self) -> T {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> T {
        self.lx / T::from_usize_lossy(self.nx)
    }
    pub fn hy(&self) -> T {
        self.ly / T::from_usize_lossy(self.ny)
    }
    pub fn h_min(&self) -> T {
        self.hx().min(self.hy())
    }
    pub fn cell_area(&self) -> T {
        self.hx() * self.hy()
    }
    /// `|Ω|`.
    pub fn area(&self) -> T {
        self.lx * self.ly
    }
    pub fn diameter(&self) -> T {
        self.lx.hypot(self.ly)
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Center of cell `(i, j)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (T, T) {
        let half = T::lit(0.5);
        (
            (T::from_usize_lossy(i) + half) * self.hx(),
            (T::from_usize_lossy(j) + half) * self.hy(),
        )
    }

    pub fn contains(&self, x: T, y: T) -> bool {
        x >= T::zero() && x <= self.lx && y >= T::zero() && y <= self.ly
    }
}

/// Cell-centered scalar grid function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field<T> {
    nx: usize,
    ny: usize,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(dom: &Domain<T>) -> Self {
        Self::constant(dom, T::zero())
    }

    pub fn constant(dom: &Domain<T>, c: T) -> Self {
        Self {
            nx: dom.nx(),
            ny: dom.ny(),
            values: vec![c; dom.len()],
        }
    }

    pub fn from_vec(dom: &Domain<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != dom.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                dom.len(),
                values.len()
            )));
        }
        Ok(Self {
            nx: dom.nx(),
            ny: dom.ny(),
            values,
        })
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(dom: &Domain<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(dom.len());
        for j in 0..dom.ny() {
            for i in 0..dom.nx() {
                let (x, y) = dom.center(i, j);
                values.push(f(x, y));
            }
        }
        Self {
            nx: dom.nx(),
            ny: dom.ny(),
            values,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.nx + i]
    }

    pub fn matches(&self, dom: &Domain<T>) -> bool {
        self.nx == dom.nx() && self.ny == dom.ny()
    }

    pub fn check_shape(&self, dom: &Domain<T>) -> Result<()> {
        if self.matches(dom) {
            Ok(())
        } else {
            Err(Error::InvalidField(format!(
                "field is {}x{}, domain is {}x{}",
                self.nx,
                self.ny,
                dom.nx(),
                dom.ny()
            )))
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::InvalidField(format!(
                "non-finite value {} at cell {k}",
                self.values[k]
            ))),
        }
    }

    pub fn check_positive(&self) -> Result<()> {
        match self.values.iter().position(|v| !(*v > T::zero())) {
            None => Ok(()),
            Some(k) => Err(Error::InvalidField(format!(
                "non-positive value {} at cell {k}",
                self.values[k]
            ))),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            nx: self.nx,
            ny: self.ny,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn linf(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Plain sum of cell values.
    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// Arithmetic mean of the cell values, i.e. `integrate / area`.
    pub fn mean(&self) -> T {
        self.sum() / T::from_usize_lossy(self.values.len())
    }

    /// Largest absolute difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

impl<T> Index<usize> for Field<T> {
    type Output = T;
    fn index(&self, k: usize) -> &T {
        &self.values[k]
    }
}

impl<T> IndexMut<usize> for Field<T> {
    fn index_mut(&mut self, k: usize) -> &mut T {
        &mut self.values[k]
    }
}

/// Midpoint quadrature `Σ f_i hx hy`.
pub fn integrate<T: Real>(f: &Field<T>, dom: &Domain<T>) -> Result<T> {
    f.check_shape(dom)?;
    f.check_finite()?;
    Ok(f.sum() * dom.cell_area())
}

/// `∫ f g` by midpoint quadrature.
pub fn inner<T: Real>(f: &Field<T>, g: &Field<T>, dom: &Domain<T>) -> T {
    let s: T = f.values().iter().zip(g.values()).map(|(&a, &b)| a * b).sum();
    s * dom.cell_area()
}

/// Gradients on interior faces. Boundary faces have zero gradient and are not stored.
///
/// `x[j * (nx - 1) + i]` is `(f(i+1, j) - f(i, j)) / hx`;
/// `y[j * nx + i]` is `(f(i, j+1) - f(i, j)) / hy`.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceGradients<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> FaceGradients<T> {
    /// Largest absolute face gradient.
    pub fn max_abs(&self) -> T {
        self.x
            .iter()
            .chain(&self.y)
            .fold(T::zero(), |m, g| m.max(g.abs()))
    }
}

pub fn grad_faces<T: Real>(f: &Field<T>, dom: &Domain<T>) -> FaceGradients<T> {
    let (nx, ny) = (dom.nx(), dom.ny());
    let (ihx, ihy) = (T::one() / dom.hx(), T::one() / dom.hy());
    let v = f.values();
    let mut gx = Vec::with_capacity((nx - 1) * ny);
    for j in 0..ny {
        let row = &v[j * nx..(j + 1) * nx];
        gx.extend(row.windows(2).map(|w| (w[1] - w[0]) * ihx));
    }
    let mut gy = Vec::with_capacity(nx * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx {
            gy.push((v[(j + 1) * nx + i] - v[j * nx + i]) * ihy);
        }
    }
    FaceGradients { x: gx, y: gy }
}

/// Discrete `∫ ∇f · ∇g`: sum over interior faces of the face-gradient products,
/// each face weighted by one cell volume `hx hy`.
pub fn grad_inner<T: Real>(f: &Field<T>, g: &Field<T>, dom: &Domain<T>) -> T {
    let gf = grad_faces(f, dom);
    let gg = grad_faces(g, dom);
    let sx: T = gf.x.iter().zip(&gg.x).map(|(&a, &b)| a * b).sum();
    let sy: T = gf.y.iter().zip(&gg.y).map(|(&a, &b)| a * b).sum();
    (sx + sy) * dom.cell_area()
}

/// `‖∇f‖²_{L²}`; equals `-∫ f Δ_h f` exactly (summation by parts).
pub fn gradient_sq_norm<T: Real>(f: &Field<T>, dom: &Domain<T>) -> Result<T> {
    f.check_shape(dom)?;
    f.check_finite()?;
    Ok(grad_inner(f, f, dom))
}

/// Five-point Neumann Laplacian.
pub fn laplacian<T: Real>(f: &Field<T>, dom: &Domain<T>) -> Field<T> {
    let (nx, ny) = (dom.nx(), dom.ny());
    let hx = dom.hx();
    let hy = dom.hy();
    let (cx, cy) = (T::one() / (hx * hx), T::one() / (hy * hy));
    let v = f.values();
    let mut out = vec![T::zero(); v.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let c = v[k];
            let mut acc = T::zero();
            if i > 0 {
                acc += (v[k - 1] - c) * cx;
            }
            if i + 1 < nx {
                acc += (v[k + 1] - c) * cx;
            }
            if j > 0 {
                acc += (v[k - nx] - c) * cy;
            }
            if j + 1 < ny {
                acc += (v[k + nx] - c) * cy;
            }
            out[k] = acc;
        }
    }
    Field {
        nx,
        ny,
        values: out,
    }
}
