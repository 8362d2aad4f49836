//! Complex 3-vectors and 3×3 matrices over `C³`, with the Hermitian product
//! `<A|B> = Σ conj(A_i) B_i` and its real part, the Euclidean product on `R⁶`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A vector in `C³`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CVec3(pub [Complex64; 3]);

impl CVec3 {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64) -> Self {
        CVec3([a, b, c])
    }

    pub const fn zero() -> Self {
        CVec3([ZERO; 3])
    }

    /// Standard basis vector `e_{k+1}`.
    pub fn basis(k: usize) -> Self {
        let mut v = Self::zero();
        v.0[k] = ONE;
        v
    }

    pub fn from_real(a: f64, b: f64, c: f64) -> Self {
        CVec3([a.into(), b.into(), c.into()])
    }

    pub fn scale(self, s: Complex64) -> Self {
        CVec3(self.0.map(|z| z * s))
    }

    pub fn conj(self) -> Self {
        CVec3(self.0.map(|z| z.conj()))
    }

    /// Euclidean length in `R⁶`.
    pub fn norm(self) -> f64 {
        hermitian_inner(self, self).re.sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// The six real coordinates `(re x1, im x1, re x2, im x2, re x3, im x3)`.
    pub fn to_real6(self) -> [f64; 6] {
        let [a, b, c] = self.0;
        [a.re, a.im, b.re, b.im, c.re, c.im]
    }
}

impl Index<usize> for CVec3 {
    type Output = Complex64;
    fn index(&self, k: usize) -> &Complex64 {
        &self.0[k]
    }
}

impl IndexMut<usize> for CVec3 {
    fn index_mut(&mut self, k: usize) -> &mut Complex64 {
        &mut self.0[k]
    }
}

impl Add for CVec3 {
    type Output = CVec3;
    fn add(self, o: CVec3) -> CVec3 {
        CVec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for CVec3 {
    fn add_assign(&mut self, o: CVec3) {
        *self = *self + o;
    }
}

impl Sub for CVec3 {
    type Output = CVec3;
    fn sub(self, o: CVec3) -> CVec3 {
        CVec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for CVec3 {
    type Output = CVec3;
    fn neg(self) -> CVec3 {
        CVec3(self.0.map(|z| -z))
    }
}

impl Mul<f64> for CVec3 {
    type Output = CVec3;
    fn mul(self, s: f64) -> CVec3 {
        CVec3(self.0.map(|z| z * s))
    }
}

impl Mul<Complex64> for CVec3 {
    type Output = CVec3;
    fn mul(self, s: Complex64) -> CVec3 {
        self.scale(s)
    }
}

/// Hermitian product `Σ conj(a_i) b_i`.
pub fn hermitian_inner(a: CVec3, b: CVec3) -> Complex64 {
    a.0.iter().zip(b.0.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean product on `C³ ≅ R⁶`: the real part of the Hermitian product.
pub fn euclidean_inner(a: CVec3, b: CVec3) -> f64 {
    hermitian_inner(a, b).re
}

/// A 3×3 complex matrix, stored row-major (`m.0[row][col]`).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CMat3(pub [[Complex64; 3]; 3]);

impl CMat3 {
    pub const fn zero() -> Self {
        CMat3([[ZERO; 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diag([ONE; 3])
    }

    pub fn diag(d: [Complex64; 3]) -> Self {
        let mut m = Self::zero();
        for k in 0..3 {
            m.0[k][k] = d[k];
        }
        m
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zero();
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] = f(r, c);
            }
        }
        m
    }

    pub fn from_columns(cols: [CVec3; 3]) -> Self {
        Self::from_fn(|r, c| cols[c][r])
    }

    pub fn column(&self, c: usize) -> CVec3 {
        CVec3([self.0[0][c], self.0[1][c], self.0[2][c]])
    }

    pub fn set_column(&mut self, c: usize, v: CVec3) {
        for r in 0..3 {
            self.0[r][c] = v[r];
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(|r, c| self.0[c][r].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|r, c| self.0[c][r])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_fn(|r, c| self.0[r][c] * s)
    }

    pub fn mul_vec(&self, v: CVec3) -> CVec3 {
        let row = |r: usize| self.0[r][0] * v[0] + self.0[r][1] * v[1] + self.0[r][2] * v[2];
        CVec3([row(0), row(1), row(2)])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by the adjugate formula; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if det.norm() == 0.0 || !det.re.is_finite() || !det.im.is_finite() {
            return None;
        }
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = CMat3([
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ]);
        Some(adj.scale(det.inv()))
    }

    /// Unitary factor of the polar decomposition, by the Newton iteration
    /// `X ← (X + X^{-†}) / 2`. Converges quadratically for nonsingular input.
    pub fn polar_unitary(&self) -> Option<Self> {
        let mut x = *self;
        for _ in 0..60 {
            let next = (x + x.inverse()?.adjoint()) * 0.5;
            let change = (next - x).max_abs();
            x = next;
            if change < 1e-15 {
                break;
            }
        }
        Some(x)
    }

    /// Anti-Hermiticity defect: max-abs entry of `A + A†`.
    pub fn anti_hermitian_defect(&self) -> f64 {
        (*self + self.adjoint()).max_abs()
    }
}

impl Index<(usize, usize)> for CMat3 {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for CMat3 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.0[r][c]
    }
}

impl Add for CMat3 {
    type Output = CMat3;
    fn add(self, o: CMat3) -> CMat3 {
        CMat3::from_fn(|r, c| self.0[r][c] + o.0[r][c])
    }
}

impl AddAssign for CMat3 {
    fn add_assign(&mut self, o: CMat3) {
        *self = *self + o;
    }
}

impl Sub for CMat3 {
    type Output = CMat3;
    fn sub(self, o: CMat3) -> CMat3 {
        CMat3::from_fn(|r, c| self.0[r][c] - o.0[r][c])
    }
}

impl Neg for CMat3 {
    type Output = CMat3;
    fn neg(self) -> CMat3 {
        CMat3::from_fn(|r, c| -self.0[r][c])
    }
}

impl Mul<f64> for CMat3 {
    type Output = CMat3;
    fn mul(self, s: f64) -> CMat3 {
        CMat3::from_fn(|r, c| self.0[r][c] * s)
    }
}

impl Mul<Complex64> for CMat3 {
    type Output = CMat3;
    fn mul(self, s: Complex64) -> CMat3 {
        self.scale(s)
    }
}

impl Mul for CMat3 {
    type Output = CMat3;
    fn mul(self, o: CMat3) -> CMat3 {
        CMat3::from_fn(|r, c| (0..3).map(|k| self.0[r][k] * o.0[k][c]).sum())
    }
}

impl Mul<CVec3> for CMat3 {
    type Output = CVec3;
    fn mul(self, v: CVec3) -> CVec3 {
        self.mul_vec(v)
    }
}

/// Max-abs entry of `U†U − I`.
pub fn unitarity_defect(u: &CMat3) -> f64 {
    (u.adjoint() * *u - CMat3::identity()).max_abs()
}

/// Commutator `AB − BA`.
pub fn commutator(a: &CMat3, b: &CMat3) -> CMat3 {
    *a * *b - *b * *a
}
