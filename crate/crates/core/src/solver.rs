//! Doubly periodic solutions of `u_xx + u_yy = 4e^{-2u} - 4e^u` by Newton's
//! method with a sparse direct solve, and the y-independent travelling waves
//! `u''/1 = -V'(u)`, `V(u) = 4e^u + 2e^{-2u}`, used as seeds and oracles.
//!
//! Cross-differentiating the Lax system gives `u_{zz̄} = e^{-2u} - e^u`;
//! with `4∂_z∂_z̄ = Δ` this is the real form above. Linearised about
//! `u = 0` it reads `Δv + 12v = 0`, so `u ≡ 0` is a centre for the waves and
//! lattices on which the discrete Laplacian has the eigenvalue `-12` are
//! resonant.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{second_difference_symbol, PeriodicGrid, ScalarFieldPeriodic};

/// Minimum of the wave potential, attained at `u = 0`.
pub const V_MIN: f64 = 6.0;

/// Distance from `-12` below which a Laplacian eigenvalue counts as resonant.
pub const RESONANCE_GAP: f64 = 1e-6;

/// Effective Jacobian eigenvalue below which Newton reports a singular system.
pub const SINGULAR_EIGENVALUE: f64 = 1e-10;

/// Residual level treated as the rounding floor in the quadratic-ratio test.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

pub fn potential(u: f64) -> f64 {
    4.0 * u.exp() + 2.0 * (-2.0 * u).exp()
}

/// `V'(u)`; the wave equation is `u'' = -V'(u)`.
pub fn potential_slope(u: f64) -> f64 {
    4.0 * u.exp() - 4.0 * (-2.0 * u).exp()
}

/// `Δu − 4e^{−2u} + 4e^u` with the fourth-order periodic Laplacian.
pub fn pde_residual(u: &ScalarFieldPeriodic) -> ScalarFieldPeriodic {
    let mut r = u.laplacian();
    for (r, &v) in r.values.iter_mut().zip(&u.values) {
        *r += potential_slope(v);
    }
    r
}

/// Rejects lattices whose discrete Laplacian has an eigenvalue near `-12`.
pub fn check_resonance(grid: &PeriodicGrid) -> Result<()> {
    let sx: Vec<f64> = (0..=grid.nx / 2).map(|j| second_difference_symbol(j, grid.nx, grid.hx())).collect();
    let sy: Vec<f64> = (0..=grid.ny / 2).map(|j| second_difference_symbol(j, grid.ny, grid.hy())).collect();
    for (jx, a) in sx.iter().enumerate() {
        for (jy, b) in sy.iter().enumerate() {
            let gap = (a + b + 12.0).abs();
            if gap < RESONANCE_GAP {
                return Err(Error::Resonance { jx, jy, eigenvalue: a + b, gap });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    /// Sup-norm residual of every iterate, starting with the seed.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Smallest `‖r‖₂ / ‖δ‖₂` seen, a lower estimate of the Jacobian's
    /// smallest eigenvalue magnitude along the Newton directions.
    pub min_gain: f64,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("seed residual is always recorded")
    }

    /// `r_{n+1} / r_n²` for consecutive iterates whose successor is above
    /// [`RESIDUAL_FLOOR`].
    pub fn quadratic_ratios(&self) -> Vec<f64> {
        self.residuals
            .windows(2)
            .filter(|w| w[1] > RESIDUAL_FLOOR && w[0] > 0.0)
            .map(|w| w[1] / (w[0] * w[0]))
            .collect()
    }

    /// True when at least three ratios exist and the last three are below `bound`.
    pub fn is_quadratic(&self, bound: f64) -> bool {
        let ratios = self.quadratic_ratios();
        ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|r| *r <= bound)
    }
}

fn jacobian(u: &ScalarFieldPeriodic) -> SparseColMat<usize, f64> {
    let g = u.grid;
    let cx = 1.0 / (12.0 * g.hx() * g.hx());
    let cy = 1.0 / (12.0 * g.hy() * g.hy());
    let weights = [(-2isize, -1.0), (-1, 16.0), (1, 16.0), (2, -1.0)];
    let mut t = Vec::with_capacity(9 * g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let row = g.index(i, j);
            let v = u.values[row];
            let diag = -30.0 * (cx + cy) + 8.0 * (-2.0 * v).exp() + 4.0 * v.exp();
            t.push(Triplet::new(row, row, diag));
            for &(o, w) in &weights {
                t.push(Triplet::new(row, g.wrap(i as isize + o, j as isize), w * cx));
                t.push(Triplet::new(row, g.wrap(i as isize, j as isize + o), w * cy));
            }
        }
    }
    SparseColMat::try_new_from_triplets(g.len(), g.len(), &t).expect("stencil indices are in range")
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton iteration on the periodic discretisation, stopping once the
/// sup-norm residual drops below `tol`.
pub fn newton_solve(u0: &ScalarFieldPeriodic, tol: f64, max_iter: usize) -> Result<(ScalarFieldPeriodic, NewtonReport)> {
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    check_resonance(&u0.grid)?;
    let mut u = ScalarFieldPeriodic::new(u0.grid, u0.values.clone())?;
    let mut r = pde_residual(&u);
    let mut report = NewtonReport { residuals: vec![r.sup_norm()], iterations: 0, min_gain: f64::INFINITY };
    while report.final_residual() >= tol {
        if report.iterations == max_iter {
            return Err(Error::Divergence { iterations: max_iter, residual: report.final_residual() });
        }
        let lu = jacobian(&u).sp_lu().map_err(|_| Error::SingularJacobian(0.0, report.iterations))?;
        let rhs = Mat::<f64>::from_fn(r.values.len(), 1, |k, _| -r.values[k]);
        let step = lu.solve(&rhs);
        let delta: Vec<f64> = (0..r.values.len()).map(|k| step[(k, 0)]).collect();
        let dn = norm2(&delta);
        if !dn.is_finite() {
            return Err(Error::SingularJacobian(0.0, report.iterations));
        }
        let gain = norm2(&r.values) / dn;
        report.min_gain = report.min_gain.min(gain);
        if gain < SINGULAR_EIGENVALUE {
            return Err(Error::SingularJacobian(gain, report.iterations));
        }
        // Damp only steps that blow up; moderate overshoot is part of the
        // quadratic regime and is left alone.
        let old = report.final_residual();
        let mut scale = 1.0;
        let (next, next_r) = loop {
            let cand = ScalarFieldPeriodic {
                grid: u.grid,
                values: u.values.iter().zip(&delta).map(|(a, d)| a + scale * d).collect(),
            };
            let cr = pde_residual(&cand);
            let s = cr.sup_norm();
            if (s.is_finite() && s <= 10.0 * old) || scale < 1e-6 {
                break (cand, cr);
            }
            scale *= 0.5;
        };
        u = next;
        r = next_r;
        report.iterations += 1;
        let s = r.sup_norm();
        if !s.is_finite() {
            return Err(Error::Divergence { iterations: report.iterations, residual: s });
        }
        report.residuals.push(s);
    }
    // post-hoc verification on the returned field
    debug_assert!(pde_residual(&u).sup_norm() < tol);
    Ok((u, report))
}

/// One period of a y-independent solution, sampled uniformly from the
/// maximum `u(0) = u₊`; the profile is even in `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveProfile1D {
    pub energy: f64,
    pub period: f64,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

const PROFILE_SAMPLES: usize = 256;
const PROFILE_SUBSTEPS: usize = 16;
const QUADRATURE_NODES: usize = 512;
const SHOOTING_STEPS: usize = 20_000;

fn check_energy(energy: f64) -> Result<()> {
    if energy.is_finite() && energy > V_MIN {
        Ok(())
    } else {
        Err(Error::Domain { energy })
    }
}

/// Turning points `(u₋, u₊)` with `V(u±) = E`, `u₋ < 0 < u₊`.
pub fn turning_points(energy: f64) -> Result<(f64, f64)> {
    check_energy(energy)?;
    let root = |mut lo: f64, mut hi: f64| {
        // V − E changes sign on [lo, hi]; bisect to adjacent floats.
        let f = |u: f64| potential(u) - energy;
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut hi = 1.0;
    while potential(hi) < energy {
        hi *= 2.0;
    }
    let mut lo = -1.0;
    while potential(lo) < energy {
        lo *= 2.0;
    }
    Ok((root(lo, 0.0), root(0.0, hi)))
}

/// Period by the turning-point integral `T = 2∫ du / sqrt(2(E − V))`.
///
/// With `u = m + a·sin φ` the integrand `a|cos φ| / sqrt(2(E − V))` is smooth
/// and periodic in `φ`, so the offset trapezoid rule converges geometrically.
pub fn period_quadrature(energy: f64) -> Result<f64> {
    let (um, up) = turning_points(energy)?;
    let (mid, half) = (0.5 * (up + um), 0.5 * (up - um));
    let span = up - um;
    let n = QUADRATURE_NODES;
    let mut sum = 0.0;
    for k in 0..n {
        let phi = 2.0 * PI * (k as f64 + 0.5) / n as f64;
        let s = phi.sin();
        let u = mid + half * s;
        // E − V written against the nearer turning point to avoid cancellation.
        let gap = if s >= 0.0 {
            let d = 0.5 * span * (1.0 - s);
            4.0 * u.exp() * d.exp_m1() + 2.0 * (-2.0 * u).exp() * (-2.0 * d).exp_m1()
        } else {
            let d = 0.5 * span * (1.0 + s);
            4.0 * u.exp() * (-d).exp_m1() + 2.0 * (-2.0 * u).exp() * (2.0 * d).exp_m1()
        };
        sum += half * phi.cos().abs() / (2.0 * gap).sqrt();
    }
    Ok(sum * 2.0 * PI / n as f64)
}

fn wave_rhs(s: [f64; 2]) -> [f64; 2] {
    [s[1], -potential_slope(s[0])]
}

fn rk4(s: [f64; 2], h: f64) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], c: f64| [a[0] + c * b[0], a[1] + c * b[1]];
    let k1 = wave_rhs(s);
    let k2 = wave_rhs(add(s, k1, 0.5 * h));
    let k3 = wave_rhs(add(s, k2, 0.5 * h));
    let k4 = wave_rhs(add(s, k3, h));
    [
        s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Period by shooting from `(u₊, 0)` to the next zero of `u'`.
pub fn period_shooting(energy: f64) -> Result<f64> {
    let (_, up) = turning_points(energy)?;
    let h = 2.0 * PI / 12f64.sqrt() / SHOOTING_STEPS as f64;
    let mut s = [up, 0.0];
    let mut t = 0.0;
    // u' is negative on the way down; the half period ends where it returns to 0.
    loop {
        let next = rk4(s, h);
        if next[1] >= 0.0 && t > 0.0 {
            break;
        }
        s = next;
        t += h;
        if t > 100.0 {
            return Err(Error::Domain { energy });
        }
    }
    let mut step = h * s[1] / (s[1] - rk4(s, h)[1]);
    for _ in 0..50 {
        let v = rk4(s, step);
        let slope = wave_rhs(v)[1];
        let ds = -v[1] / slope;
        step += ds;
        if ds.abs() < 1e-17 {
            break;
        }
    }
    Ok(2.0 * (t + step))
}

/// One period of the y-independent wave at energy `E`.
pub fn travelling_wave(energy: f64) -> Result<WaveProfile1D> {
    let period = period_quadrature(energy)?;
    let (_, up) = turning_points(energy)?;
    let h = period / (PROFILE_SAMPLES * PROFILE_SUBSTEPS) as f64;
    let mut s = [up, 0.0];
    let mut u = Vec::with_capacity(PROFILE_SAMPLES);
    let mut du = Vec::with_capacity(PROFILE_SAMPLES);
    for _ in 0..PROFILE_SAMPLES {
        u.push(s[0]);
        du.push(s[1]);
        for _ in 0..PROFILE_SUBSTEPS {
            s = rk4(s, h);
        }
    }
    Ok(WaveProfile1D { energy, period, u, du })
}

impl WaveProfile1D {
    /// `u ≡ 0` labelled with the small-amplitude limit period.
    pub fn constant_zero() -> Self {
        WaveProfile1D {
            energy: V_MIN,
            period: 2.0 * PI / 12f64.sqrt(),
            u: vec![0.0; PROFILE_SAMPLES],
            du: vec![0.0; PROFILE_SAMPLES],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.u.iter().all(|v| *v == self.u[0])
    }

    /// Trigonometric interpolation of the samples at any `x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.is_constant() {
            return self.u[0];
        }
        let n = self.u.len();
        let t = 2.0 * PI * x / self.period;
        // Even profile: a cosine series with real coefficients.
        let mut value = 0.0;
        for m in 0..=n / 2 {
            let c: f64 = self.u.iter().enumerate().map(|(k, v)| v * (2.0 * PI * (m * k) as f64 / n as f64).cos()).sum();
            let w = if m == 0 || 2 * m == n { 1.0 } else { 2.0 };
            value += w * c / n as f64 * (m as f64 * t).cos();
        }
        value
    }

    /// Largest `|u'²/2 + V(u) − E|` over the samples.
    pub fn energy_drift(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.du)
            .map(|(u, d)| (0.5 * d * d + potential(*u) - self.energy).abs())
            .fold(0.0, f64::max)
    }

    /// Tolerance on `Lx / T` being an integer.
    pub const COMMENSURABILITY: f64 = 1e-9;

    /// Number of whole periods in `lx`, or an error.
    pub fn periods_in(&self, lx: f64) -> Result<usize> {
        let m = (lx / self.period).round();
        if m < 1.0 || (lx / self.period - m).abs() > Self::COMMENSURABILITY * m {
            return Err(Error::IncommensuratePeriod { lx, period: self.period });
        }
        Ok(m as usize)
    }
}

/// Spreads a wave profile over the grid as a y-independent field.
pub fn lift_1d(profile: &WaveProfile1D, grid: PeriodicGrid) -> Result<ScalarFieldPeriodic> {
    if profile.is_constant() {
        return Ok(ScalarFieldPeriodic::constant(grid, profile.u[0]));
    }
    profile.periods_in(grid.lx)?;
    let row: Vec<f64> = (0..grid.nx).map(|i| profile.eval(grid.x(i).rem_euclid(profile.period))).collect();
    let values = (0..grid.ny).flat_map(|_| row.iter().copied()).collect();
    ScalarFieldPeriodic::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn residual_examples() {
        let g = PeriodicGrid::new(8, 8, 1.0, 1.0).unwrap();
        assert!(pde_residual(&ScalarFieldPeriodic::constant(g, 0.0)).values.iter().all(|v| *v == 0.0));
        let r = pde_residual(&ScalarFieldPeriodic::constant(g, 2f64.ln()));
        assert!(r.values.iter().all(|v| (v - 7.0).abs() < 1e-14));
    }

    #[test]
    fn residual_matches_symbolic_evaluation() {
        let f = |x: f64, y: f64| 0.3 * x.sin() * (2.0 * y).cos();
        let exact = |x: f64, y: f64| -5.0 * f(x, y) + potential_slope(f(x, y));
        let err = |n: usize| {
            let g = PeriodicGrid::new(n, n, 2.0 * PI, 2.0 * PI).unwrap();
            let r = pde_residual(&ScalarFieldPeriodic::from_fn(g, f));
            let e = ScalarFieldPeriodic::from_fn(g, exact);
            r.values.iter().zip(&e.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let slope = (err(32) / err(64)).log2();
        assert!(slope > 3.8, "{slope}");
    }

    #[test]
    fn resonant_lattice_is_rejected() {
        // find Lx with σ(1) exactly −12 for nx = 16 by bisection on the symbol
        let nx = 16;
        let (mut lo, mut hi) = (1.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if second_difference_symbol(1, nx, mid / nx as f64) < -12.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let g = PeriodicGrid::new(nx, 8, lo, 0.5).unwrap();
        assert!(matches!(check_resonance(&g), Err(Error::Resonance { jx: 1, jy: 0, .. })));
        let u0 = ScalarFieldPeriodic::constant(g, 0.0);
        assert!(matches!(newton_solve(&u0, 1e-10, 5), Err(Error::Resonance { .. })));
        assert!(check_resonance(&PeriodicGrid::new(nx, 8, 1.1 * lo, 0.5).unwrap()).is_ok());
    }

    #[test]
    fn zero_seed_needs_no_iterations() {
        let g = PeriodicGrid::new(16, 16, 1.0, 1.0).unwrap();
        let (u, rep) = newton_solve(&ScalarFieldPeriodic::constant(g, 0.0), 1e-12, 10).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn small_cosine_seed_converges_quadratically() {
        let g = PeriodicGrid::new(32, 8, 1.3, 0.9).unwrap();
        let u0 = ScalarFieldPeriodic::from_fn(g, |x, _| 0.01 * (2.0 * PI * x / 1.3).cos());
        let (u, rep) = newton_solve(&u0, 1e-12, 20).unwrap();
        assert!(pde_residual(&u).sup_norm() < 1e-12);
        assert!(rep.residuals.windows(2).filter(|w| w[1] > RESIDUAL_FLOOR).all(|w| w[1] <= 1e3 * w[0] * w[0]));
        assert!(u.sup_norm() < 1e-12);
    }

    #[test]
    fn divergence_and_validation_errors() {
        let g = PeriodicGrid::new(16, 16, 1.0, 1.0).unwrap();
        let u0 = ScalarFieldPeriodic::constant(g, 0.4);
        assert!(matches!(newton_solve(&u0, 1e-12, 1), Err(Error::Divergence { iterations: 1, .. })));
        assert!(matches!(newton_solve(&u0, 0.0, 10), Err(Error::Validation(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn constant_seeds_return_to_zero(c in -0.5f64..0.5) {
            let g = PeriodicGrid::new(8, 8, 1.0, 1.0).unwrap();
            let (u, _) = newton_solve(&ScalarFieldPeriodic::constant(g, c), 1e-12, 30).unwrap();
            prop_assert!(u.sup_norm() < 1e-12);
        }
    }

    #[test]
    fn small_amplitude_period_limit() {
        let t0 = 2.0 * PI / 12f64.sqrt();
        let t = period_quadrature(6.001).unwrap();
        assert!(((t - t0) / t0).abs() < 0.01);
        assert!((t - 1.813_774_17).abs() < 1e-7, "{t}");
        assert!(t < t0);
    }

    #[test]
    fn quadrature_and_shooting_agree() {
        for e in [6.001, 6.1, 7.0] {
            let a = period_quadrature(e).unwrap();
            let b = period_shooting(e).unwrap();
            assert!((a - b).abs() < 1e-8, "{e}: {a} vs {b}");
        }
        assert!((period_quadrature(6.1).unwrap() - 1.811_281_15).abs() < 1e-7);
    }

    #[test]
    fn turning_points_at_known_energy() {
        let (um, up) = turning_points(6.1).unwrap();
        assert!((up - 0.131_745).abs() < 1e-6 && (um + 0.126_215).abs() < 1e-6);
        assert!((potential(up) - 6.1).abs() < 1e-13);
    }

    #[test]
    fn domain_errors() {
        for e in [6.0, 5.0, f64::NAN] {
            assert!(matches!(travelling_wave(e), Err(Error::Domain { .. })));
        }
    }

    #[test]
    fn profile_conserves_energy_and_is_even() {
        let p = travelling_wave(6.1).unwrap();
        assert!(p.energy_drift() < 1e-10);
        for x in [0.1, 0.37, 0.9] {
            let a = p.eval(x);
            assert!((a - p.eval(-x)).abs() < 1e-12);
            assert!((a - p.eval(x + p.period)).abs() < 1e-12);
        }
        // the reflected profile solves the same ODE
        let h = 1e-3;
        for x in [-0.4, -0.2, 0.3] {
            let r = |x: f64| p.eval(-x);
            let upp = (r(x + h) - 2.0 * r(x) + r(x - h)) / (h * h);
            assert!((upp + potential_slope(r(x))).abs() < 1e-5);
        }
        assert!((p.eval(0.0) - p.u[0]).abs() < 1e-13);
    }

    #[test]
    fn lift_examples() {
        let g = PeriodicGrid::new(16, 8, 3.0, 1.0).unwrap();
        let zero = lift_1d(&WaveProfile1D::constant_zero(), g).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));

        let p = travelling_wave(6.1).unwrap();
        let bad = PeriodicGrid::new(16, 8, 1.5 * p.period, 1.0).unwrap();
        assert!(matches!(lift_1d(&p, bad), Err(Error::IncommensuratePeriod { .. })));

        let err = |n: usize| {
            let g = PeriodicGrid::new(n, 8, p.period, 1.5).unwrap();
            pde_residual(&lift_1d(&p, g).unwrap()).sup_norm()
        };
        let slope = (err(32) / err(64)).log2();
        assert!(slope > 3.8, "{slope}");
    }

    #[test]
    fn discrete_solutions_converge_to_the_wave() {
        let p = travelling_wave(6.1).unwrap();
        let err = |n: usize| {
            let g = PeriodicGrid::new(n, 8, p.period, 1.5).unwrap();
            let exact = lift_1d(&p, g).unwrap();
            let (u, _) = newton_solve(&exact, 1e-12, 20).unwrap();
            u.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e16, e24, e32) = (err(16), err(24), err(32));
        let s1 = (e16 / e24).ln() / 1.5f64.ln();
        let s2 = (e24 / e32).ln() / (4.0f64 / 3.0).ln();
        assert!(s1 >= 3.5 && s2 >= 3.5, "{s1} {s2}");
    }
}
