//! Doubly periodic rectangular grids, scalar fields on them, and the
//! finite-difference stencils shared by the solver, the frame integrator and
//! the geometry checks.
//!
//! Node `(i, j)` sits at `(i·hx, j·hy)` and is stored at `j·nx + i` (x fastest).

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{CMat3, CVec3};

/// Values that can be combined linearly by a stencil.
pub trait Linear: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl Linear for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Linear for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

impl Linear for CVec3 {
    fn zero() -> Self {
        CVec3::zero()
    }
}

impl Linear for CMat3 {
    fn zero() -> Self {
        CMat3::zero()
    }
}

/// A fixed-size block of reals differentiated componentwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packed<const N: usize>(pub [f64; N]);

impl<const N: usize> Add for Packed<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Packed<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul<f64> for Packed<N> {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for a in self.0.iter_mut() {
            *a *= s;
        }
        self
    }
}

impl<const N: usize> Linear for Packed<N> {
    fn zero() -> Self {
        Packed([0.0; N])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Derivative scheme for periodic scalar fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DiffScheme {
    #[default]
    FourthOrder,
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicGrid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl PeriodicGrid {
    pub const MIN_NODES: usize = 8;

    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < Self::MIN_NODES || ny < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!("need at least 8 nodes per axis, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("periods must be positive, got {lx} x {ly}")));
        }
        Ok(PeriodicGrid { nx, ny, lx, ly })
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Index of a node with periodic wrap-around.
    pub fn wrap(&self, i: isize, j: isize) -> usize {
        let i = i.rem_euclid(self.nx as isize) as usize;
        let j = j.rem_euclid(self.ny as isize) as usize;
        self.index(i, j)
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    pub fn stencil(&self) -> Stencil {
        Stencil { nx: self.nx, ny: self.ny, hx: self.hx(), hy: self.hy(), boundary: Boundary::Periodic }
    }
}

/// A real field `u` on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFieldPeriodic {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
}

impl ScalarFieldPeriodic {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Validation(format!("field has {} values, grid needs {}", values.len(), grid.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite field value at index {k}")));
        }
        Ok(ScalarFieldPeriodic { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        ScalarFieldPeriodic { grid, values }
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        ScalarFieldPeriodic { grid, values: vec![c; grid.len()] }
    }

    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.values[self.grid.wrap(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarFieldPeriodic { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn derivative(&self, axis: Axis, scheme: DiffScheme) -> Self {
        let values = match scheme {
            DiffScheme::FourthOrder => self.grid.stencil().d1(&self.values, axis),
            DiffScheme::Spectral => spectral_d1(&self.values, &self.grid, axis),
        };
        ScalarFieldPeriodic { grid: self.grid, values }
    }

    pub fn dx(&self) -> Self {
        self.derivative(Axis::X, DiffScheme::FourthOrder)
    }

    pub fn dy(&self) -> Self {
        self.derivative(Axis::Y, DiffScheme::FourthOrder)
    }

    /// Fourth-order periodic five-point Laplacian.
    pub fn laplacian(&self) -> Self {
        let s = self.grid.stencil();
        let xx = s.d2(&self.values, Axis::X);
        let yy = s.d2(&self.values, Axis::Y);
        ScalarFieldPeriodic { grid: self.grid, values: xx.iter().zip(&yy).map(|(a, b)| a + b).collect() }
    }
}

pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Non-periodic node block; one-sided fourth-order stencils at the edges.
    Open,
}

/// Fourth-order finite-difference operators on an `nx × ny` node block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub boundary: Boundary,
}

// One-sided first-derivative weights for the first two nodes of an open line.
const D1_EDGE0: [f64; 5] = [-25.0 / 12.0, 48.0 / 12.0, -36.0 / 12.0, 16.0 / 12.0, -3.0 / 12.0];
const D1_EDGE1: [f64; 5] = [-3.0 / 12.0, -10.0 / 12.0, 18.0 / 12.0, -6.0 / 12.0, 1.0 / 12.0];

impl Stencil {
    pub fn open(nx: usize, ny: usize, hx: f64, hy: f64) -> Self {
        Stencil { nx, ny, hx, hy, boundary: Boundary::Open }
    }

    fn line(&self, axis: Axis) -> (usize, usize, usize, f64) {
        // (line length, number of lines, stride along line, spacing)
        match axis {
            Axis::X => (self.nx, self.ny, 1, self.hx),
            Axis::Y => (self.ny, self.nx, self.nx, self.hy),
        }
    }

    /// First derivative along `axis`.
    pub fn d1<V: Linear>(&self, values: &[V], axis: Axis) -> Vec<V> {
        assert_eq!(values.len(), self.nx * self.ny);
        let (n, _, stride, h) = self.line(axis);
        let base_of = |k: usize| match axis {
            Axis::X => k - k % self.nx,
            Axis::Y => k % self.nx,
        };
        (0..values.len())
            .map(|k| {
                let base = base_of(k);
                let pos = match axis {
                    Axis::X => k % self.nx,
                    Axis::Y => k / self.nx,
                };
                let at = |p: usize| values[base + p * stride];
                let combine = |w: &[f64; 5], start: usize| {
                    (0..5).fold(V::zero(), |acc, q| acc + at(start + q) * w[q]) * (1.0 / h)
                };
                match self.boundary {
                    Boundary::Periodic => {
                        // antisymmetric pairs first, so constants differentiate to exactly 0
                        let w = |o: isize| at((pos as isize + o).rem_euclid(n as isize) as usize);
                        ((w(1) - w(-1)) * 8.0 - (w(2) - w(-2))) * (1.0 / (12.0 * h))
                    }
                    Boundary::Open => {
                        if pos >= 2 && pos + 2 < n {
                            ((at(pos + 1) - at(pos - 1)) * 8.0 - (at(pos + 2) - at(pos - 2))) * (1.0 / (12.0 * h))
                        } else if pos == 0 {
                            combine(&D1_EDGE0, 0)
                        } else if pos == 1 {
                            combine(&D1_EDGE1, 0)
                        } else {
                            // mirror image of the leading edge, with sign flip
                            let rev: [f64; 5] = if pos == n - 1 { D1_EDGE0 } else { D1_EDGE1 };
                            let w = [-rev[4], -rev[3], -rev[2], -rev[1], -rev[0]];
                            combine(&w, n - 5)
                        }
                    }
                }
            })
            .collect()
    }

    /// Second derivative along `axis` (periodic only).
    pub fn d2<V: Linear>(&self, values: &[V], axis: Axis) -> Vec<V> {
        assert_eq!(self.boundary, Boundary::Periodic, "second-derivative stencil is periodic only");
        assert_eq!(values.len(), self.nx * self.ny);
        let (n, _, stride, h) = self.line(axis);
        let inv = 1.0 / (h * h);
        (0..values.len())
            .map(|k| {
                let (base, pos) = match axis {
                    Axis::X => (k - k % self.nx, k % self.nx),
                    Axis::Y => (k % self.nx, k / self.nx),
                };
                let w = |o: isize| values[base + (pos as isize + o).rem_euclid(n as isize) as usize * stride];
                let c = w(0);
                let near = w(1) + w(-1) - c * 2.0;
                let far = w(2) + w(-2) - c * 2.0;
                (near * 16.0 - far) * (inv / 12.0)
            })
            .collect()
    }
}

/// Eigenvalue of the periodic fourth-order second-difference operator for
/// mode number `j` on a line of `n` nodes and spacing `h`.
pub fn second_difference_symbol(j: usize, n: usize, h: f64) -> f64 {
    let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
    (-2.0 * (2.0 * t).cos() + 32.0 * t.cos() - 30.0) / (12.0 * h * h)
}

/// Spectral first derivative of a real periodic field.
pub fn spectral_d1(values: &[f64], grid: &PeriodicGrid, axis: Axis) -> Vec<f64> {
    let (n, lines, stride, period) = match axis {
        Axis::X => (grid.nx, grid.ny, 1, grid.lx),
        Axis::Y => (grid.ny, grid.nx, grid.nx, grid.ly),
    };
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut out = vec![0.0; values.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for line in 0..lines {
        let base = match axis {
            Axis::X => line * grid.nx,
            Axis::Y => line,
        };
        for (p, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(values[base + p * stride], 0.0);
        }
        fwd.process(&mut buf);
        for (m, b) in buf.iter_mut().enumerate() {
            let wave = if 2 * m < n {
                m as f64
            } else if 2 * m == n {
                0.0
            } else {
                m as f64 - n as f64
            };
            let k = 2.0 * std::f64::consts::PI * wave / period;
            *b *= Complex64::new(0.0, k / n as f64);
        }
        inv.process(&mut buf);
        for (p, b) in buf.iter().enumerate() {
            out[base + p * stride] = b.re;
        }
    }
    out
}

/// Cubic Lagrange weights for nodes `-1, 0, 1, 2` evaluated at `t ∈ [0, 1]`.
pub fn lagrange4_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}
