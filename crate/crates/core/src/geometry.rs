//! Induced tensors and scalar invariants of a surface in the sphere
//! `S_R ⊂ C³`: metric and skew form from the Hermitian product, the
//! Levi-Civita connection, curvature, the cubic form `T^k_ij` and its
//! invariants `H²`, `k`, `q`, and residuals of the Gauss, Codazzi and
//! Cauchy–Riemann identities.
//!
//! Index conventions: `Connection2.0[k][i][j] = Γ^k_ij`,
//! `Curvature2.0[s][k][i][j] = R^s_kij`, `SymTensor3.0[k][i][j] = T^k_ij`.

use crate::error::{Error, Result};
use crate::grid::{sup_norm, Axis, DiffScheme, Linear, Packed, ScalarFieldPeriodic, Stencil};
use crate::linalg::{hermitian_inner, CVec3};

pub type Mat2 = [[f64; 2]; 2];

const DELTA: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// Relative eigenvalue floor below which a metric counts as degenerate.
pub const METRIC_TOLERANCE: f64 = 1e-12;

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut m = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            m[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    m
}

fn mat_add(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn mat_scale(a: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

/// Induced Riemannian metric `g_ij` at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric2(pub Mat2);

impl Metric2 {
    pub fn conformal(factor: f64) -> Self {
        Metric2(mat_scale(&DELTA, factor))
    }

    /// Eigenvalues `(min, max)` of the symmetric part.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let g = &self.0;
        let mean = 0.5 * (g[0][0] + g[1][1]);
        let off = 0.5 * (g[0][1] + g[1][0]);
        let rad = (0.25 * (g[0][0] - g[1][1]).powi(2) + off * off).sqrt();
        (mean - rad, mean + rad)
    }

    pub fn is_positive_definite(&self) -> bool {
        let (min, max) = self.eigenvalues();
        max > 0.0 && min > METRIC_TOLERANCE * max
    }

    /// `g^ij`; errors when the metric is not positive definite.
    pub fn inverse(&self) -> Result<Mat2> {
        if !self.is_positive_definite() {
            let (min, max) = self.eigenvalues();
            return Err(Error::SingularMetric { min, max });
        }
        let g = &self.0;
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        Ok([[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]])
    }

    fn flat(&self) -> [f64; 4] {
        [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]]
    }
}

/// Skew form `ω_ij`, stored by its single independent entry `ω_12`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SkewForm2 {
    pub w12: f64,
}

impl SkewForm2 {
    pub fn matrix(&self) -> Mat2 {
        [[0.0, self.w12], [-self.w12, 0.0]]
    }
}

/// `h_ij = <E_i|E_j> = g_ij + i ω_ij`.
pub fn hermitian_induced(e1: CVec3, e2: CVec3) -> Result<(Metric2, SkewForm2)> {
    let e = [e1, e2];
    let mut g = [[0.0; 2]; 2];
    let mut w = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let h = hermitian_inner(e[i], e[j]);
            g[i][j] = h.re;
            w[i][j] = h.im;
        }
    }
    let metric = Metric2(g);
    if !metric.is_positive_definite() {
        let (min, max) = metric.eigenvalues();
        return Err(Error::DegenerateTangent { min, max });
    }
    Ok((metric, SkewForm2 { w12: 0.5 * (w[0][1] - w[1][0]) }))
}

/// `Ω^i_j`, `f_ij` and `F^i_j` built from `g` and `ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InducedTensors {
    pub omega: Mat2,
    pub f: Mat2,
    pub big_f: Mat2,
}

pub fn induced_tensors(g: &Metric2, w: &SkewForm2) -> Result<InducedTensors> {
    let ginv = g.inverse()?;
    let wm = w.matrix();
    let mut omega = mat_mul(&ginv, &wm);
    // Ω = g⁻¹ω is traceless for antisymmetric ω; pin the diagonal exactly.
    let t = 0.5 * (omega[0][0] - omega[1][1]);
    omega[0][0] = t;
    omega[1][1] = -t;
    let f = mat_add(&g.0, &mat_mul(&wm, &mat_mul(&ginv, &wm)));
    let big_f = mat_add(&DELTA, &mat_mul(&omega, &omega));
    Ok(InducedTensors { omega, f, big_f })
}

/// Christoffel symbols `Γ^k_ij` at one node.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Connection2(pub [[[f64; 2]; 2]; 2]);

impl Connection2 {
    fn flat(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out[4 * k + 2 * i + j] = self.0[k][i][j];
                }
            }
        }
        out
    }

    fn max_abs_diff(&self, other: &Connection2) -> f64 {
        self.flat().iter().zip(other.flat().iter()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Connection of `g = c·e^u·δ` from the gradient of `u` (independent of `c`).
pub fn conformal_connection(u_x: f64, u_y: f64) -> Connection2 {
    let (a, b) = (0.5 * u_x, 0.5 * u_y);
    Connection2([[[a, b], [b, -a]], [[-b, a], [a, b]]])
}

/// Closed-form connection of a conformal metric `c·e^u·δ` over a periodic field.
pub fn christoffel_conformal(u: &ScalarFieldPeriodic, scheme: DiffScheme) -> Vec<Connection2> {
    let ux = u.derivative(Axis::X, scheme);
    let uy = u.derivative(Axis::Y, scheme);
    ux.values.iter().zip(&uy.values).map(|(&a, &b)| conformal_connection(a, b)).collect()
}

/// Connection of an arbitrary sampled metric field by the Levi-Civita formula.
pub fn christoffel_generic(metric: &[Metric2], stencil: &Stencil) -> Result<Vec<Connection2>> {
    let flat: Vec<Packed<4>> = metric.iter().map(|g| Packed(g.flat())).collect();
    let dg = [stencil.d1(&flat, Axis::X), stencil.d1(&flat, Axis::Y)];
    metric
        .iter()
        .enumerate()
        .map(|(n, g)| {
            let ginv = g.inverse()?;
            // ∂_a g_bc
            let d = |a: usize, b: usize, c: usize| dg[a][n].0[2 * b + c];
            let mut out = Connection2::default();
            for k in 0..2 {
                for i in 0..2 {
                    for j in i..2 {
                        let v: f64 = (0..2)
                            .map(|s| 0.5 * ginv[k][s] * (d(i, s, j) + d(j, i, s) - d(s, i, j)))
                            .sum();
                        out.0[k][i][j] = v;
                        out.0[k][j][i] = v;
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

/// Riemann tensor `R^s_kij` at one node.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Curvature2(pub [[[[f64; 2]; 2]; 2]; 2]);

/// `R^s_kij = ∂_iΓ^s_kj − ∂_jΓ^s_ki − Γ^r_ki Γ^s_rj + Γ^r_kj Γ^s_ri`.
pub fn riemann(gamma: &[Connection2], stencil: &Stencil) -> Vec<Curvature2> {
    let flat: Vec<Packed<8>> = gamma.iter().map(|g| Packed(g.flat())).collect();
    let dgam = [stencil.d1(&flat, Axis::X), stencil.d1(&flat, Axis::Y)];
    gamma
        .iter()
        .enumerate()
        .map(|(n, g)| {
            let g = &g.0;
            let d = |a: usize, s: usize, k: usize, j: usize| dgam[a][n].0[4 * s + 2 * k + j];
            let mut r = Curvature2::default();
            for s in 0..2 {
                for k in 0..2 {
                    let (i, j) = (0, 1);
                    let quad: f64 = (0..2).map(|m| -g[m][k][i] * g[s][m][j] + g[m][k][j] * g[s][m][i]).sum();
                    let v = d(i, s, k, j) - d(j, s, k, i) + quad;
                    r.0[s][k][i][j] = v;
                    r.0[s][k][j][i] = -v;
                }
            }
            r
        })
        .collect()
}

/// `K = ½ Σ g^{kj} R^s_ksj` per node.
pub fn gauss_curvature(metric: &[Metric2], curvature: &[Curvature2]) -> Result<Vec<f64>> {
    metric
        .iter()
        .zip(curvature)
        .map(|(g, r)| {
            let ginv = g.inverse()?;
            let mut sum = 0.0;
            for k in 0..2 {
                for j in 0..2 {
                    for s in 0..2 {
                        sum += ginv[k][j] * r.0[s][k][s][j];
                    }
                }
            }
            Ok(0.5 * sum)
        })
        .collect()
}

/// Cubic form `T^k_ij` at one node.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SymTensor3(pub [[[f64; 2]; 2]; 2]);

impl SymTensor3 {
    /// Minimal-surface parametrization by two functions `A`, `B`.
    pub fn from_ab(a: f64, b: f64) -> Self {
        SymTensor3([[[a, -b], [-b, -a]], [[-b, -a], [-a, b]]])
    }

    /// Cubic form of the torus case `e^u(A + iB) = cos θ + i sin θ`.
    ///
    /// `T^2_12 = T^2_21 = −e^{−u} cos θ`: this is the sign for which the
    /// lowered tensor is totally symmetric and which the tangent dynamics of
    /// the embedding reproduce.
    pub fn cubic_form(u: f64, theta: f64) -> Self {
        let s = (-u).exp();
        Self::from_ab(s * theta.cos(), s * theta.sin())
    }

    /// `T_kij = Σ_s g_ks T^s_ij`.
    pub fn lowered(&self, g: &Metric2) -> [[[f64; 2]; 2]; 2] {
        let mut out = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out[k][i][j] = (0..2).map(|s| g.0[k][s] * self.0[s][i][j]).sum();
                }
            }
        }
        out
    }

    /// Largest deviation of the lowered tensor from total symmetry.
    pub fn symmetry_defect(&self, g: &Metric2) -> f64 {
        let t = self.lowered(g);
        let mut worst: f64 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for (p, q, r) in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                        worst = worst.max((t[a][b][c] - t[p][q][r]).abs());
                    }
                }
            }
        }
        worst
    }

    /// `Σ_i T^{ik}_i` with the second index raised by `g`.
    pub fn trace_vector(&self, g: &Metric2) -> Result<[f64; 2]> {
        let ginv = g.inverse()?;
        let mut v = [0.0; 2];
        for (k, vk) in v.iter_mut().enumerate() {
            for i in 0..2 {
                for b in 0..2 {
                    *vk += ginv[k][b] * self.0[i][b][i];
                }
            }
        }
        Ok(v)
    }

    pub fn max_abs_diff(&self, other: &SymTensor3) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    m = m.max((self.0[k][i][j] - other.0[k][i][j]).abs());
                }
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarInvariants {
    pub h2: f64,
    pub k: f64,
    pub q: f64,
}

/// Second-order invariants `H²`, `k` and the fourth-order invariant `q`.
pub fn scalar_invariants(t: &SymTensor3, g: &Metric2) -> Result<ScalarInvariants> {
    let ginv = g.inverse()?;
    let tt = &t.0;
    let low = t.lowered(g);
    // T^{ab}_c: second index raised.
    let mut mixed = [[[0.0; 2]; 2]; 2];
    // T^{abc}: all raised.
    let mut up = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                mixed[a][b][c] = (0..2).map(|m| ginv[b][m] * tt[a][m][c]).sum();
            }
        }
    }
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                up[a][b][c] = (0..2).map(|m| ginv[c][m] * mixed[a][b][m]).sum();
            }
        }
    }
    let mut h2 = 0.0;
    for s in 0..2 {
        let v: f64 = (0..2).map(|i| mixed[i][s][i]).sum();
        let w: f64 = (0..2).map(|j| tt[j][j][s]).sum();
        h2 += v * w;
    }
    let mut k = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                k += up[a][b][c] * low[a][b][c];
            }
        }
    }
    // Q^i_s = Σ_jk T^i_jk T^{jk}_s
    let mut qm = [[0.0; 2]; 2];
    for i in 0..2 {
        for s in 0..2 {
            for j in 0..2 {
                for kk in 0..2 {
                    qm[i][s] += tt[i][j][kk] * mixed[j][kk][s];
                }
            }
        }
    }
    let q = (0..2).flat_map(|i| (0..2).map(move |s| (i, s))).map(|(i, s)| qm[i][s] * qm[s][i]).sum();
    Ok(ScalarInvariants { h2, k, q })
}

/// `2K − H² + k − 2/R²`.
pub fn gauss_residual(gauss: f64, h2: f64, k: f64, radius: f64) -> f64 {
    2.0 * gauss - h2 + k - 2.0 / (radius * radius)
}

/// `H·n = Σ_{i,k} T^{ik}_i F_k`.
pub fn mean_curvature_vector(t: &SymTensor3, f1: CVec3, f2: CVec3, g: &Metric2) -> Result<CVec3> {
    let v = t.trace_vector(g)?;
    Ok(f1 * v[0] + f2 * v[1])
}

/// Coefficients of the normal dynamics of an immersion into a hypersurface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypersurfaceCoefficients {
    pub b: Mat2,
    pub d: Mat2,
    /// `L^k_i`, stored as `l[k][i]`.
    pub l: Mat2,
    /// `M^k_i`, stored as `m[k][i]`.
    pub m: Mat2,
    pub s: [f64; 2],
}

impl HypersurfaceCoefficients {
    /// `b_ij = −Σ L^k_i g_kj` and `d_ij = Σ M^k_i f_kj − Σ L^k_i ω_kj`.
    pub fn from_normal_dynamics(l: Mat2, m: Mat2, s: [f64; 2], g: &Metric2, w: &SkewForm2) -> Result<Self> {
        let f = induced_tensors(g, w)?.f;
        let wm = w.matrix();
        let mut b = [[0.0; 2]; 2];
        let mut d = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                b[i][j] = -(0..2).map(|k| l[k][i] * g.0[k][j]).sum::<f64>();
                d[i][j] = (0..2).map(|k| m[k][i] * f[k][j] - l[k][i] * wm[k][j]).sum();
            }
        }
        Ok(HypersurfaceCoefficients { b, d, l, m, s })
    }

    /// Sphere of radius `R`: `L = δ/R`, `M = 0`, `S = 0`.
    pub fn sphere(g: &Metric2, w: &SkewForm2, radius: f64) -> Result<Self> {
        Self::from_normal_dynamics(mat_scale(&DELTA, 1.0 / radius), [[0.0; 2]; 2], [0.0; 2], g, w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereReduction {
    pub b: Mat2,
    pub d: Mat2,
    /// `d` is symmetric, which forces `d = ω = 0`.
    pub consistent: bool,
}

/// Relative tolerance on the asymmetry of `d` in [`sphere_reduction_check`].
pub const SPHERE_REDUCTION_TOLERANCE: f64 = 1e-9;

pub fn sphere_reduction_check(g: &Metric2, w: &SkewForm2, radius: f64) -> Result<SphereReduction> {
    let c = HypersurfaceCoefficients::sphere(g, w, radius)?;
    let scale = c.b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let asym = (c.d[0][1] - c.d[1][0]).abs();
    Ok(SphereReduction { b: c.b, d: c.d, consistent: asym <= SPHERE_REDUCTION_TOLERANCE * scale })
}

/// Per-node `max |∇_i T_jsk − ∇_j T_isk|` over all index choices.
pub fn codazzi_residual(
    t: &[SymTensor3],
    gamma: &[Connection2],
    metric: &[Metric2],
    stencil: &Stencil,
) -> Vec<f64> {
    let low: Vec<Packed<8>> = t
        .iter()
        .zip(metric)
        .map(|(t, g)| {
            let l = t.lowered(g);
            let mut out = [0.0; 8];
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        out[4 * a + 2 * b + c] = l[a][b][c];
                    }
                }
            }
            Packed(out)
        })
        .collect();
    let dlow = [stencil.d1(&low, Axis::X), stencil.d1(&low, Axis::Y)];
    (0..t.len())
        .map(|n| {
            let tl = |a: usize, b: usize, c: usize| low[n].0[4 * a + 2 * b + c];
            let g = &gamma[n].0;
            let cov = |i: usize, j: usize, s: usize, k: usize| {
                let mut v = dlow[i][n].0[4 * j + 2 * s + k];
                for m in 0..2 {
                    v -= g[m][i][j] * tl(m, s, k) + g[m][i][s] * tl(j, m, k) + g[m][i][k] * tl(j, s, m);
                }
                v
            };
            let mut worst: f64 = 0.0;
            for s in 0..2 {
                for k in 0..2 {
                    worst = worst.max((cov(0, 1, s, k) - cov(1, 0, s, k)).abs());
                }
            }
            worst
        })
        .collect()
}

/// Max-abs of `∂_x(e^u A) − ∂_y(e^u B)` and `∂_y(e^u A) + ∂_x(e^u B)`.
pub fn cauchy_riemann_residual(a: &[f64], b: &[f64], u: &[f64], stencil: &Stencil) -> f64 {
    let p: Vec<f64> = a.iter().zip(u).map(|(a, u)| u.exp() * a).collect();
    let q: Vec<f64> = b.iter().zip(u).map(|(b, u)| u.exp() * b).collect();
    let (px, py) = (stencil.d1(&p, Axis::X), stencil.d1(&p, Axis::Y));
    let (qx, qy) = (stencil.d1(&q, Axis::X), stencil.d1(&q, Axis::Y));
    let first: Vec<f64> = px.iter().zip(&qy).map(|(a, b)| a - b).collect();
    let second: Vec<f64> = py.iter().zip(&qx).map(|(a, b)| a + b).collect();
    sup_norm(&first).max(sup_norm(&second))
}

/// Max-abs difference between two connection fields.
pub fn connection_distance(a: &[Connection2], b: &[Connection2]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max(x.max_abs_diff(y)))
}

impl Linear for Connection2 {
    fn zero() -> Self {
        Connection2::default()
    }
}

impl std::ops::Add for Connection2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out.0[k][i][j] += o.0[k][i][j];
                }
            }
        }
        out
    }
}

impl std::ops::Sub for Connection2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o * -1.0
    }
}

impl std::ops::Mul<f64> for Connection2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        let mut out = self;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out.0[k][i][j] *= s;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::linalg::I;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn induced_metric_cases() {
        let (g, w) = hermitian_induced(CVec3::basis(0), CVec3::basis(1)).unwrap();
        assert_eq!(g, Metric2(DELTA));
        assert_eq!(w.w12, 0.0);

        let (g, w) = hermitian_induced(CVec3::basis(0), CVec3::basis(0) * I).unwrap();
        assert_eq!(g, Metric2(DELTA));
        assert_eq!(w.w12, 1.0);

        assert!(matches!(
            hermitian_induced(CVec3::basis(0), CVec3::basis(0) * 2.0),
            Err(Error::DegenerateTangent { .. })
        ));
    }

    #[test]
    fn skew_part_is_euclidean_product_with_i() {
        let e1 = CVec3::new(Complex64::new(0.3, -1.0), Complex64::new(0.5, 0.2), Complex64::new(-0.1, 0.4));
        let e2 = CVec3::new(Complex64::new(1.1, 0.0), Complex64::new(-0.7, 0.9), Complex64::new(0.2, 0.3));
        let (_, w) = hermitian_induced(e1, e2).unwrap();
        assert!(close(w.w12, crate::linalg::euclidean_inner(e1 * I, e2), 1e-15));
    }

    #[test]
    fn induced_tensors_cases() {
        let g = Metric2([[2.0, 0.3], [0.3, 1.5]]);
        let t = induced_tensors(&g, &SkewForm2::default()).unwrap();
        assert_eq!(t.omega, [[0.0; 2]; 2]);
        assert_eq!(t.f, g.0);
        assert_eq!(t.big_f, DELTA);

        // g = δ, ω_12 = w: Ω = ((0, w), (−w, 0)), F = (1 − w²)δ
        let w = 0.35;
        let t = induced_tensors(&Metric2(DELTA), &SkewForm2 { w12: w }).unwrap();
        assert_eq!(t.omega, [[0.0, w], [-w, 0.0]]);
        for r in 0..2 {
            for c in 0..2 {
                let expect = if r == c { 1.0 - w * w } else { 0.0 };
                assert!(close(t.big_f[r][c], expect, 1e-15));
            }
        }

        assert!(induced_tensors(&Metric2([[1.0, 1.0], [1.0, 1.0]]), &SkewForm2::default()).is_err());
    }

    proptest! {
        #[test]
        fn omega_is_traceless_and_f_matches(a in 0.5f64..3.0, b in -0.4f64..0.4, c in 0.5f64..3.0, w in -2.0f64..2.0) {
            let g = Metric2([[a, b], [b, c]]);
            let t = induced_tensors(&g, &SkewForm2 { w12: w }).unwrap();
            prop_assert_eq!(t.omega[0][0] + t.omega[1][1], 0.0);
            let ginv = g.inverse().unwrap();
            let f_mixed = mat_mul(&ginv, &t.f);
            for r in 0..2 {
                for s in 0..2 {
                    prop_assert!((f_mixed[r][s] - t.big_f[r][s]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn cubic_form_invariants_match_closed_forms(u in -1.5f64..1.5, theta in -PI..PI, r in 0.2f64..5.0) {
            let g = Metric2::conformal(2.0 * r * r * u.exp());
            let t = SymTensor3::cubic_form(u, theta);
            let inv = scalar_invariants(&t, &g).unwrap();
            prop_assert!((inv.k * r * r * (3.0 * u).exp() - 2.0).abs() < 1e-12);
            prop_assert!((inv.q * r.powi(4) * (6.0 * u).exp() - 2.0).abs() < 1e-12);
            prop_assert!(inv.h2.abs() < 1e-12 * inv.k);
            prop_assert!(t.symmetry_defect(&g) <= 1e-15 * g.0[0][0]);
        }
    }

    /// For a conformal metric `c·δ`: `k = Σ (T^i_js)² / c` and
    /// `q = tr(Q²)` with `Q^i_s = Σ T^i_jk T^s_jk / c`.
    fn conformal_oracle(t: &SymTensor3, c: f64) -> (f64, f64) {
        let tt = &t.0;
        let k: f64 = tt.iter().flatten().flatten().map(|v| v * v).sum::<f64>() / c;
        let mut q = [[0.0; 2]; 2];
        for i in 0..2 {
            for s in 0..2 {
                for j in 0..2 {
                    for kk in 0..2 {
                        q[i][s] += tt[i][j][kk] * tt[s][j][kk] / c;
                    }
                }
            }
        }
        (k, q[0][0] * q[0][0] + 2.0 * q[0][1] * q[1][0] + q[1][1] * q[1][1])
    }

    #[test]
    fn scalar_invariant_examples() {
        let g = Metric2::conformal(2.0);
        let t = SymTensor3::cubic_form(0.0, 0.0);
        let inv = scalar_invariants(&t, &g).unwrap();
        assert!(close(inv.h2, 0.0, 1e-15));
        assert!(close(inv.k, 2.0, 1e-15));
        assert!(close(inv.q, 2.0, 1e-15));
        let (k, q) = conformal_oracle(&t, 2.0);
        assert!(close(k, 2.0, 1e-15) && close(q, 2.0, 1e-15));

        let zero = scalar_invariants(&SymTensor3::default(), &g).unwrap();
        assert_eq!((zero.h2, zero.k, zero.q), (0.0, 0.0, 0.0));

        let u = 2f64.ln();
        let g = Metric2::conformal(2.0 * u.exp());
        let inv = scalar_invariants(&SymTensor3::cubic_form(u, 0.7), &g).unwrap();
        assert!(close(inv.k, 0.25, 1e-14));
        assert!(close(inv.q, 0.03125, 1e-14));
    }

    #[test]
    fn printed_sign_breaks_total_symmetry() {
        let g = Metric2::conformal(2.0);
        let mut printed = SymTensor3::cubic_form(0.0, 0.4);
        printed.0[1][0][1] = -printed.0[1][0][1];
        printed.0[1][1][0] = -printed.0[1][1][0];
        assert!(printed.symmetry_defect(&g) > 1.0);
        assert!(SymTensor3::cubic_form(0.0, 0.4).symmetry_defect(&g) < 1e-15);
    }

    #[test]
    fn gauss_residual_cases() {
        assert_eq!(gauss_residual(0.0, 0.0, 2.0, 1.0), 0.0);
        assert_eq!(gauss_residual(1.0, 0.0, 2.0, 1.0), 2.0);
    }

    #[test]
    fn mean_curvature_vector_cases() {
        let g = Metric2(DELTA);
        let (f1, f2) = (CVec3::basis(0), CVec3::basis(1) * I);
        let h = mean_curvature_vector(&SymTensor3::from_ab(0.8, -0.3), f1, f2, &g).unwrap();
        assert_eq!(h, CVec3::zero());
        let mut t = SymTensor3::default();
        t.0[0][0][0] = 1.0;
        assert_eq!(mean_curvature_vector(&t, f1, f2, &g).unwrap(), CVec3::basis(0));
        assert_eq!(mean_curvature_vector(&SymTensor3::default(), f1, f2, &g).unwrap(), CVec3::zero());
    }

    #[test]
    fn sphere_reduction_cases() {
        let g = Metric2([[3.0, 0.2], [0.2, 2.0]]);
        let r = 2.0;
        let s = sphere_reduction_check(&g, &SkewForm2::default(), r).unwrap();
        assert!(s.consistent);
        assert_eq!(s.b, mat_scale(&g.0, -1.0 / r));
        assert_eq!(s.d, [[0.0; 2]; 2]);
        let s = sphere_reduction_check(&g, &SkewForm2 { w12: 0.1 }, r).unwrap();
        assert!(!s.consistent);
    }

    #[test]
    fn christoffel_conformal_cases() {
        let grid = PeriodicGrid::new(16, 16, 2.0, 2.0).unwrap();
        let flat = christoffel_conformal(&ScalarFieldPeriodic::constant(grid, 0.7), DiffScheme::FourthOrder);
        assert!(flat.iter().all(|c| c.0.iter().flatten().flatten().all(|v| *v == 0.0)));

        // With u = αx the closed form reads Γ¹₁₁ = Γ²₁₂ = α/2, Γ¹₂₂ = −α/2.
        let alpha = 0.6;
        let c = conformal_connection(alpha, 0.0);
        assert_eq!(c.0[0][0][0], alpha / 2.0);
        assert_eq!(c.0[1][0][1], alpha / 2.0);
        assert_eq!(c.0[1][1][0], alpha / 2.0);
        assert_eq!(c.0[0][1][1], -alpha / 2.0);
        assert_eq!(c.0[1][0][0], 0.0);
    }

    fn smooth_u(x: f64, y: f64) -> f64 {
        0.3 * (x + 0.2).sin() * (2.0 * y).cos() + 0.2 * (2.0 * x - y).cos() - 0.1 * (3.0 * y + 0.5).sin()
    }

    #[test]
    fn generic_connection_matches_closed_form() {
        let err = |n: usize| {
            let grid = PeriodicGrid::new(n, n, 2.0 * PI, 2.0 * PI).unwrap();
            let u = ScalarFieldPeriodic::from_fn(grid, smooth_u);
            let metric: Vec<Metric2> = u.values.iter().map(|v| Metric2::conformal(3.0 * v.exp())).collect();
            let generic = christoffel_generic(&metric, &grid.stencil()).unwrap();
            // exact derivatives for the closed form, so the comparison measures the generic path
            let h = 1e-6;
            let exact: Vec<Connection2> = (0..grid.len())
                .map(|k| {
                    let (x, y) = (grid.x(k % n), grid.y(k / n));
                    let ux = (smooth_u(x + h, y) - smooth_u(x - h, y)) / (2.0 * h);
                    let uy = (smooth_u(x, y + h) - smooth_u(x, y - h)) / (2.0 * h);
                    conformal_connection(ux, uy)
                })
                .collect();
            let closed = christoffel_conformal(&u, DiffScheme::FourthOrder);
            (connection_distance(&generic, &exact), connection_distance(&generic, &closed))
        };
        let (e1, d1) = err(16);
        let (e2, d2) = err(32);
        let (e3, d3) = err(64);
        for (a, b) in [(e1, e2), (e2, e3), (d1, d2), (d2, d3)] {
            assert!((a / b).log2() >= 1.9, "errors {a} -> {b}");
        }
        assert!(generic_symmetric(16));
    }

    fn generic_symmetric(n: usize) -> bool {
        let grid = PeriodicGrid::new(n, n, 1.0, 1.0).unwrap();
        let metric: Vec<Metric2> = (0..grid.len())
            .map(|k| {
                let x = grid.x(k % n) * 2.0 * PI;
                Metric2([[2.0 + x.sin(), 0.3 * x.cos()], [0.3 * x.cos(), 2.0]])
            })
            .collect();
        christoffel_generic(&metric, &grid.stencil())
            .unwrap()
            .iter()
            .all(|c| (0..2).all(|k| c.0[k][0][1] == c.0[k][1][0]))
    }

    /// Round sphere `diag(1, sin²x)` sampled at half-offset nodes in `x ∈ (0, π)`.
    fn sphere_curvature(n: usize, scale: f64) -> (Vec<f64>, PeriodicGrid) {
        let grid = PeriodicGrid::new(n, 8, PI * scale, 2.0 * PI * scale).unwrap();
        let metric: Vec<Metric2> = (0..grid.len())
            .map(|k| {
                let x = (grid.x(k % n) + 0.5 * grid.hx()) / scale;
                Metric2([[1.0 / (scale * scale), 0.0], [0.0, x.sin().powi(2) / (scale * scale)]])
            })
            .collect();
        let s = grid.stencil();
        let gamma = christoffel_generic(&metric, &s).unwrap();
        let r = riemann(&gamma, &s);
        assert!(r.iter().all(|r| (0..2).all(|s| (0..2).all(|k| r.0[s][k][0][1] == -r.0[s][k][1][0] && r.0[s][k][0][0] == 0.0))));
        (gauss_curvature(&metric, &r).unwrap(), grid)
    }

    #[test]
    fn round_sphere_has_unit_curvature() {
        let err = |n: usize| {
            let (k, grid) = sphere_curvature(n, 1.0);
            (0..grid.len())
                .filter(|idx| {
                    let x = grid.x(idx % n) + 0.5 * grid.hx();
                    x > PI / 4.0 && x < 3.0 * PI / 4.0
                })
                .map(|idx| (k[idx] - 1.0).abs())
                .fold(0.0, f64::max)
        };
        let (a, b) = (err(64), err(128));
        assert!(a < 1e-4, "{a}");
        assert!((a / b).log2() > 1.9);
    }

    #[test]
    fn gauss_curvature_survives_homothetic_rescaling() {
        let (k1, _) = sphere_curvature(32, 1.0);
        let (k2, _) = sphere_curvature(32, 3.0);
        for (a, b) in k1.iter().zip(&k2) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn flat_metric_has_zero_curvature() {
        let grid = PeriodicGrid::new(16, 16, 1.0, 1.0).unwrap();
        let u = ScalarFieldPeriodic::constant(grid, 0.0);
        let gamma = christoffel_conformal(&u, DiffScheme::FourthOrder);
        let r = riemann(&gamma, &grid.stencil());
        let metric = vec![Metric2::conformal(2.0); grid.len()];
        assert!(gauss_curvature(&metric, &r).unwrap().iter().all(|k| *k == 0.0));
        let r0 = riemann(&vec![Connection2::default(); grid.len()], &grid.stencil());
        assert!(r0.iter().all(|r| *r == Curvature2::default()));
    }

    #[test]
    fn codazzi_holds_for_cubic_form_with_constant_theta() {
        // the lowered tensor is 2R²·cos θ, sin θ: constant, and the Γ terms cancel
        let grid = PeriodicGrid::new(32, 32, 2.0 * PI, 2.0 * PI).unwrap();
        let u = ScalarFieldPeriodic::from_fn(grid, smooth_u);
        let t: Vec<SymTensor3> = u.values.iter().map(|&v| SymTensor3::cubic_form(v, 0.9)).collect();
        let g: Vec<Metric2> = u.values.iter().map(|v| Metric2::conformal(2.0 * v.exp())).collect();
        let gamma = christoffel_conformal(&u, DiffScheme::FourthOrder);
        let s = grid.stencil();
        assert!(sup_norm(&codazzi_residual(&t, &gamma, &g, &s)) < 1e-12);
        let zero = sup_norm(&codazzi_residual(&vec![SymTensor3::default(); grid.len()], &gamma, &g, &s));
        assert_eq!(zero, 0.0);
        // a randomly perturbed component is not a Codazzi tensor
        let mut bad = t.clone();
        for (k, b) in bad.iter_mut().enumerate() {
            b.0[0][0][0] += 0.2 * ((k * 7919 % 13) as f64 / 13.0 - 0.5);
        }
        assert!(sup_norm(&codazzi_residual(&bad, &gamma, &g, &s)) > 0.1);
    }

    /// `e^u(A + iB) = G(z)` holomorphic, `u` arbitrary, on an open patch.
    fn holomorphic_codazzi(n: usize) -> f64 {
        let h = 1.0 / (n - 1) as f64;
        let s = Stencil::open(n, n, h, h);
        let node = |k: usize| ((k % n) as f64 * h, (k / n) as f64 * h);
        let u = |x: f64, y: f64| 0.3 * (x + 2.0 * y).sin();
        let grad = |x: f64, y: f64| (0.3 * (x + 2.0 * y).cos(), 0.6 * (x + 2.0 * y).cos());
        let mut t = Vec::new();
        let mut g = Vec::new();
        let mut gamma = Vec::new();
        for k in 0..n * n {
            let (x, y) = node(k);
            // G = exp(z/2)
            let (gr, gi) = ((0.5 * x).exp() * (0.5 * y).cos(), (0.5 * x).exp() * (0.5 * y).sin());
            let e = (-u(x, y)).exp();
            t.push(SymTensor3::from_ab(e * gr, e * gi));
            g.push(Metric2::conformal(2.0 * u(x, y).exp()));
            let (ux, uy) = grad(x, y);
            gamma.push(conformal_connection(ux, uy));
        }
        sup_norm(&codazzi_residual(&t, &gamma, &g, &s))
    }

    #[test]
    fn codazzi_holds_for_holomorphic_cubic_differentials() {
        let (a, b, c) = (holomorphic_codazzi(17), holomorphic_codazzi(33), holomorphic_codazzi(65));
        assert!(a < 1e-3, "{a}");
        assert!((a / b).log2() >= 1.9 && (b / c).log2() >= 1.9, "{a} {b} {c}");
    }

    #[test]
    fn cauchy_riemann_cases() {
        let grid = PeriodicGrid::new(32, 32, 2.0 * PI, 2.0 * PI).unwrap();
        let u = ScalarFieldPeriodic::from_fn(grid, smooth_u);
        let theta: f64 = 0.4;
        let a: Vec<f64> = u.values.iter().map(|v| (-v).exp() * theta.cos()).collect();
        let b: Vec<f64> = u.values.iter().map(|v| (-v).exp() * theta.sin()).collect();
        assert!(cauchy_riemann_residual(&a, &b, &u.values, &grid.stencil()) < 1e-13);

        // e^u(A + iB) = z and exp(z) on an open patch
        let patch = |n: usize, f: &dyn Fn(f64, f64) -> (f64, f64)| {
            let h = 1.0 / (n - 1) as f64;
            let s = Stencil::open(n, n, h, h);
            let zero = vec![0.0; n * n];
            let (re, im): (Vec<f64>, Vec<f64>) = (0..n * n).map(|k| f((k % n) as f64 * h, (k / n) as f64 * h)).unzip();
            cauchy_riemann_residual(&re, &im, &zero, &s)
        };
        assert!(patch(17, &|x, y| (x, y)) < 1e-12);
        let exp = |x: f64, y: f64| (x.exp() * y.cos(), x.exp() * y.sin());
        let (coarse, fine) = (patch(17, &exp), patch(33, &exp));
        assert!(coarse < 1e-3 && (coarse / fine).log2() >= 1.9, "{coarse} {fine}");

        let noise: Vec<f64> = (0..grid.len()).map(|k| ((k * 2654435761usize) % 1000) as f64 / 1000.0).collect();
        assert!(cauchy_riemann_residual(&noise, &b, &u.values, &grid.stencil()) > 1.0);
    }
}
