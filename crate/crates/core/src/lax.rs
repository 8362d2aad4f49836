//! The Lax system for `ψ`, the unitary moving frame `(L, M, N)` and the
//! bilinear pairing of solutions at `λ` and `−μ`.
//!
//! In the complex variable the system is `ψ_z = Aψ`, `ψ_z̄ = Bψ` with
//!
//! ```text
//! A = [[-u_z, 0, iλ], [i, u_z, 0], [0, i, 0]]
//! B = [[0, ie^{-2u}, 0], [0, 0, ie^u], [iλ⁻¹e^u, 0, 0]]
//! ```
//!
//! and `A_z̄ − B_z + [A, B] = 0` holds exactly when `u_{zz̄} = e^{-2u} − e^u`.
//! In real variables `ψ_x = (A + B)ψ`, `ψ_y = i(A − B)ψ`. The frame rows
//! `(L_r, M_r, N_r) = (e^{u/2}ψ₁, e^{-u/2}ψ₂, ψ₃)` obey `φ_x = Xφ`,
//! `φ_y = Yφ` with `X`, `Y` the gauge transforms of these generators; both
//! are anti-Hermitian when `|λ| = 1`, so the frame stays unitary.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{lagrange4_weights, Axis, Linear, PeriodicGrid, ScalarFieldPeriodic};
use crate::linalg::{unitarity_defect, CMat3, CVec3, I};

/// Defect above which frame integration is aborted.
pub const UNITARITY_BLOWUP: f64 = 1e-6;

/// Largest `h·‖G‖_F` per RK4 step when substeps are chosen automatically.
/// RK4 loses unitarity by about `(h‖G‖)⁶/72` per step.
pub const STEP_ANGLE: f64 = 0.01;

fn auto_substeps(sampler: &FieldSampler, generator: impl Fn(f64, f64, f64, Axis) -> CMat3) -> usize {
    let g = sampler.grid();
    let mut worst: f64 = 0.0;
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let (u, ux, uy) = sampler.at(i, j, Axis::X, 0.0);
            worst = worst
                .max(g.hx() * generator(u, ux, uy, Axis::X).frobenius())
                .max(g.hy() * generator(u, ux, uy, Axis::Y).frobenius());
        }
    }
    ((worst / STEP_ANGLE).ceil() as usize).max(1)
}

/// Unit-modulus spectral parameter `λ = cos θ + i sin θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint {
    pub theta: f64,
    pub lambda: Complex64,
}

impl SpectralPoint {
    pub fn new(theta: f64) -> Self {
        SpectralPoint { theta, lambda: Complex64::new(theta.cos(), theta.sin()) }
    }

    /// The point `−λ`, with the sign flipped exactly.
    pub fn negated(&self) -> Self {
        SpectralPoint { theta: self.theta + std::f64::consts::PI, lambda: -self.lambda }
    }

    /// `λ⁻¹ = conj(λ)` on the unit circle.
    pub fn inverse(&self) -> Complex64 {
        self.lambda.conj()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Direction {
    Z,
    ZBar,
}

/// A solution value `ψ` at `z = x + iy` for a given spectral point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiState {
    pub psi: CVec3,
    pub z: Complex64,
    pub spectral: SpectralPoint,
}

/// Coefficient matrix of the complex-direction system.
pub fn psi_generator(u: f64, u_z: Complex64, spectral: SpectralPoint, direction: Direction) -> CMat3 {
    let zero = Complex64::new(0.0, 0.0);
    match direction {
        Direction::Z => CMat3([
            [-u_z, zero, I * spectral.lambda],
            [I, u_z, zero],
            [zero, I, zero],
        ]),
        Direction::ZBar => CMat3([
            [zero, I * (-2.0 * u).exp(), zero],
            [zero, zero, I * u.exp()],
            [I * spectral.inverse() * u.exp(), zero, zero],
        ]),
    }
}

/// `∂_z ψ` or `∂_z̄ ψ`.
pub fn psi_rhs(state: &PsiState, u: f64, u_z: Complex64, direction: Direction) -> CVec3 {
    let p = state.psi;
    let lam = state.spectral.lambda;
    match direction {
        Direction::Z => CVec3::new(-u_z * p[0] + I * lam * p[2], u_z * p[1] + I * p[0], I * p[1]),
        Direction::ZBar => CVec3::new(
            I * (-2.0 * u).exp() * p[1],
            I * u.exp() * p[2],
            I * state.spectral.inverse() * u.exp() * p[0],
        ),
    }
}

/// `u_z = (u_x − i u_y) / 2`.
pub fn complex_gradient(u_x: f64, u_y: f64) -> Complex64 {
    Complex64::new(0.5 * u_x, -0.5 * u_y)
}

/// Real-direction generator of `ψ`: `A + B` along x, `i(A − B)` along y.
pub fn psi_real_generator(u: f64, u_x: f64, u_y: f64, spectral: SpectralPoint, axis: Axis) -> CMat3 {
    let uz = complex_gradient(u_x, u_y);
    let a = psi_generator(u, uz, spectral, Direction::Z);
    let b = psi_generator(u, uz, spectral, Direction::ZBar);
    match axis {
        Axis::X => a + b,
        Axis::Y => (a - b) * I,
    }
}

/// Frame generator `X` (along x) or `Y` (along y) acting on `(L, M, N)`.
pub fn frame_generator(u: f64, u_x: f64, u_y: f64, spectral: SpectralPoint, axis: Axis) -> CMat3 {
    let lam = spectral.lambda;
    let inv = spectral.inverse();
    let em = Complex64::new((-u).exp(), 0.0);
    let eh = Complex64::new((0.5 * u).exp(), 0.0);
    let one = Complex64::new(1.0, 0.0);
    match axis {
        Axis::X => CMat3([
            [I * (0.5 * u_y), I * em, I * lam * eh],
            [I * em, -I * (0.5 * u_y), I * eh],
            [I * inv * eh, I * eh, Complex64::new(0.0, 0.0)],
        ]),
        Axis::Y => CMat3([
            [-I * (0.5 * u_x), em, -lam * eh],
            [-em, I * (0.5 * u_x), eh],
            [inv * eh, -one * eh, Complex64::new(0.0, 0.0)],
        ]),
    }
}

/// `∂U` for `U = [L M N]`: `U·Gᵀ` with `G` the frame generator.
pub fn frame_rhs(frame: &CMat3, u: f64, u_x: f64, u_y: f64, spectral: SpectralPoint, axis: Axis) -> CMat3 {
    *frame * frame_generator(u, u_x, u_y, spectral, axis).transpose()
}

/// `u`, `u_x`, `u_y` with cubic interpolation between nodes.
#[derive(Clone, Debug)]
pub struct FieldSampler {
    u: ScalarFieldPeriodic,
    ux: ScalarFieldPeriodic,
    uy: ScalarFieldPeriodic,
}

impl FieldSampler {
    pub fn new(u: &ScalarFieldPeriodic) -> Self {
        FieldSampler { u: u.clone(), ux: u.dx(), uy: u.dy() }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.u.grid
    }

    /// Values at node `(i, j)` advanced by `t ∈ [0, 1]` cells along `axis`.
    pub fn at(&self, i: isize, j: isize, axis: Axis, t: f64) -> (f64, f64, f64) {
        let get = |f: &ScalarFieldPeriodic| {
            if t == 0.0 {
                return f.at(i, j);
            }
            let w = lagrange4_weights(t);
            (0..4)
                .map(|q| {
                    let o = q as isize - 1;
                    let v = match axis {
                        Axis::X => f.at(i + o, j),
                        Axis::Y => f.at(i, j + o),
                    };
                    w[q] * v
                })
                .sum()
        };
        (get(&self.u), get(&self.ux), get(&self.uy))
    }
}

/// Evolves states `S` under `S' = apply(G, S)` where `G` is built from the
/// sampled field.
struct Marcher<'a, S, G, A> {
    sampler: &'a FieldSampler,
    generator: G,
    apply: A,
    substeps: usize,
    _s: std::marker::PhantomData<S>,
}

impl<S, G, A> Marcher<'_, S, G, A>
where
    S: Linear,
    G: Fn(f64, f64, f64, Axis) -> CMat3 + Sync,
    A: Fn(&CMat3, S) -> S + Sync,
{
    fn gen_at(&self, i: isize, j: isize, axis: Axis, t: f64) -> CMat3 {
        let (u, ux, uy) = self.sampler.at(i, j, axis, t);
        (self.generator)(u, ux, uy, axis)
    }

    /// One cell from node `(i, j)` along `axis` (positive direction).
    fn cell(&self, mut s: S, i: isize, j: isize, axis: Axis) -> S {
        let h = match axis {
            Axis::X => self.sampler.grid().hx(),
            Axis::Y => self.sampler.grid().hy(),
        } / self.substeps as f64;
        let n = self.substeps as f64;
        let mut g0 = self.gen_at(i, j, axis, 0.0);
        for k in 0..self.substeps {
            let t = k as f64 / n;
            let gm = self.gen_at(i, j, axis, (k as f64 + 0.5) / n);
            let g1 = if k + 1 == self.substeps {
                // the next cell starts at a node; take exact node values there
                match axis {
                    Axis::X => self.gen_at(i + 1, j, axis, 0.0),
                    Axis::Y => self.gen_at(i, j + 1, axis, 0.0),
                }
            } else {
                self.gen_at(i, j, axis, t + 1.0 / n)
            };
            let k1 = (self.apply)(&g0, s);
            let k2 = (self.apply)(&gm, s + k1 * (0.5 * h));
            let k3 = (self.apply)(&gm, s + k2 * (0.5 * h));
            let k4 = (self.apply)(&g1, s + k3 * h);
            s = s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            g0 = g1;
        }
        s
    }

    /// States at `count` consecutive nodes from `(i, j)` along `axis`.
    fn line(&self, start: S, i: isize, j: isize, axis: Axis, count: usize, post: &(dyn Fn(S) -> S + Sync)) -> Vec<S> {
        let mut out = Vec::with_capacity(count);
        let mut s = start;
        for k in 0..count {
            out.push(s);
            if k + 1 < count {
                let (ci, cj) = match axis {
                    Axis::X => (i + k as isize, j),
                    Axis::Y => (i, j + k as isize),
                };
                s = post(self.cell(s, ci, cj, axis));
            }
        }
        out
    }
}

/// Which direction is integrated first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PathOrder {
    /// First row along x, then every column along y.
    #[default]
    RowFirst,
    /// First column along y, then every row along x.
    ColumnFirst,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameOptions {
    /// RK4 steps per grid cell; `None` picks enough steps to keep
    /// `h·‖G‖` below [`STEP_ANGLE`].
    pub substeps: Option<usize>,
    /// Project onto the unitary group after every cell.
    pub reunitarize: bool,
    pub order: PathOrder,
    /// Number of nodes `(ex, ey)` to fill; `None` means `(nx + 1, ny + 1)`,
    /// which includes the period-shifted copies of the first row and column.
    pub extent: Option<(usize, usize)>,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions { substeps: None, reunitarize: false, order: PathOrder::RowFirst, extent: None }
    }
}

/// Unitary frames on an `ex × ey` block of nodes starting at the origin;
/// node `(i, j)` is stored at `j·ex + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameField {
    pub grid: PeriodicGrid,
    pub spectral: SpectralPoint,
    pub ex: usize,
    pub ey: usize,
    pub frames: Vec<CMat3>,
}

impl FrameField {
    pub fn new(grid: PeriodicGrid, spectral: SpectralPoint, ex: usize, ey: usize, frames: Vec<CMat3>) -> Result<Self> {
        if frames.len() != ex * ey || ex < 5 || ey < 5 {
            return Err(Error::InvalidFrame(format!("{} frames for a {ex}x{ey} block", frames.len())));
        }
        if let Some(k) = frames.iter().position(|f| !f.is_finite()) {
            return Err(Error::InvalidFrame(format!("non-finite frame at node ({}, {})", k % ex, k / ex)));
        }
        Ok(FrameField { grid, spectral, ex, ey, frames })
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.ex + i
    }

    pub fn at(&self, i: usize, j: usize) -> &CMat3 {
        &self.frames[self.index(i, j)]
    }

    pub fn column(&self, i: usize, j: usize, c: usize) -> CVec3 {
        self.at(i, j).column(c)
    }

    /// Per-node unitarity defect.
    pub fn defects(&self) -> Vec<f64> {
        self.frames.iter().map(unitarity_defect).collect()
    }
}

/// Largest unitarity defect over all nodes.
pub fn frame_orthonormality_report(frames: &FrameField) -> f64 {
    frames.defects().into_iter().fold(0.0, f64::max)
}

fn march_block<S, G, A>(marcher: &Marcher<'_, S, G, A>, start: S, ex: usize, ey: usize, order: PathOrder, post: &(dyn Fn(S) -> S + Sync)) -> Vec<S>
where
    S: Linear + Send + Sync,
    G: Fn(f64, f64, f64, Axis) -> CMat3 + Sync,
    A: Fn(&CMat3, S) -> S + Sync,
{
    let mut out = vec![S::zero(); ex * ey];
    match order {
        PathOrder::RowFirst => {
            let row = marcher.line(start, 0, 0, Axis::X, ex, post);
            let cols: Vec<Vec<S>> =
                row.par_iter().enumerate().map(|(i, s)| marcher.line(*s, i as isize, 0, Axis::Y, ey, post)).collect();
            for (i, col) in cols.iter().enumerate() {
                for (j, s) in col.iter().enumerate() {
                    out[j * ex + i] = *s;
                }
            }
        }
        PathOrder::ColumnFirst => {
            let col = marcher.line(start, 0, 0, Axis::Y, ey, post);
            let rows: Vec<Vec<S>> =
                col.par_iter().enumerate().map(|(j, s)| marcher.line(*s, 0, j as isize, Axis::X, ex, post)).collect();
            for (j, row) in rows.iter().enumerate() {
                out[j * ex..(j + 1) * ex].copy_from_slice(row);
            }
        }
    }
    out
}

fn resolve_extent(grid: &PeriodicGrid, options: &FrameOptions) -> Result<(usize, usize)> {
    let (ex, ey) = options.extent.unwrap_or((grid.nx + 1, grid.ny + 1));
    if ex < 5 || ey < 5 {
        return Err(Error::Validation(format!("frame extent {ex}x{ey} is below 5 nodes per axis")));
    }
    if options.substeps == Some(0) {
        return Err(Error::Validation("substeps must be at least 1".into()));
    }
    Ok((ex, ey))
}

/// Integrates the frame from `U(0, 0) = U0` with RK4.
pub fn integrate_frame(u: &ScalarFieldPeriodic, spectral: SpectralPoint, u0: CMat3, options: &FrameOptions) -> Result<FrameField> {
    let d0 = unitarity_defect(&u0);
    if d0 >= 1e-12 {
        return Err(Error::InvalidFrame(format!("initial frame has unitarity defect {d0:e}")));
    }
    let (ex, ey) = resolve_extent(&u.grid, options)?;
    let sampler = FieldSampler::new(u);
    let generator = move |u: f64, ux: f64, uy: f64, axis: Axis| frame_generator(u, ux, uy, spectral, axis).transpose();
    let substeps = options.substeps.unwrap_or_else(|| auto_substeps(&sampler, generator));
    let marcher = Marcher {
        sampler: &sampler,
        generator,
        apply: |g: &CMat3, s: CMat3| s * *g,
        substeps,
        _s: std::marker::PhantomData,
    };
    let reunitarize = options.reunitarize;
    let post = move |s: CMat3| if reunitarize { s.polar_unitary().unwrap_or(s) } else { s };
    let frames = march_block(&marcher, u0, ex, ey, options.order, &post);
    for (k, f) in frames.iter().enumerate() {
        let defect = unitarity_defect(f);
        if !(defect <= UNITARITY_BLOWUP) {
            return Err(Error::UnitarityBlowup { i: k % ex, j: k / ex, defect });
        }
    }
    FrameField::new(u.grid, spectral, ex, ey, frames)
}

/// Max-abs difference between two frame fields on the same block.
pub fn frame_distance(a: &FrameField, b: &FrameField) -> f64 {
    a.frames.iter().zip(&b.frames).fold(0.0, |m, (x, y)| m.max((*x - *y).max_abs()))
}

/// `ψ` on an `ex × ey` block, same layout as [`FrameField`].
pub fn integrate_psi(u: &ScalarFieldPeriodic, spectral: SpectralPoint, psi0: CVec3, options: &FrameOptions) -> Result<Vec<CVec3>> {
    let (ex, ey) = resolve_extent(&u.grid, options)?;
    let sampler = FieldSampler::new(u);
    let substeps = options.substeps.unwrap_or_else(|| auto_substeps(&sampler, |u, ux, uy, axis| psi_real_generator(u, ux, uy, spectral, axis)));
    let marcher = psi_marcher(&sampler, spectral, substeps);
    Ok(march_block(&marcher, psi0, ex, ey, options.order, &|s| s))
}

fn psi_marcher<S: Linear>(
    sampler: &FieldSampler,
    spectral: SpectralPoint,
    substeps: usize,
) -> Marcher<'_, S, impl Fn(f64, f64, f64, Axis) -> CMat3 + Sync, impl Fn(&CMat3, S) -> S + Sync>
where
    CMat3: std::ops::Mul<S, Output = S>,
{
    Marcher {
        sampler,
        generator: move |u: f64, ux: f64, uy: f64, axis: Axis| psi_real_generator(u, ux, uy, spectral, axis),
        apply: |g: &CMat3, s: S| *g * s,
        substeps,
        _s: std::marker::PhantomData,
    }
}

/// `ψ` at `count` nodes of row `j`, starting from node `(0, j)`.
pub fn propagate_psi_row(u: &ScalarFieldPeriodic, spectral: SpectralPoint, psi0: CVec3, j: usize, count: usize, substeps: Option<usize>) -> Vec<CVec3> {
    let sampler = FieldSampler::new(u);
    let substeps = substeps.unwrap_or_else(|| auto_substeps(&sampler, |u, ux, uy, axis| psi_real_generator(u, ux, uy, spectral, axis))).max(1);
    psi_marcher(&sampler, spectral, substeps).line(psi0, 0, j as isize, Axis::X, count, &|s| s)
}

/// Per-cell defect of x-then-y against y-then-x transport of a `ψ` basis.
pub fn compatibility_field(u: &ScalarFieldPeriodic, spectral: SpectralPoint) -> Vec<f64> {
    let g = u.grid;
    let sampler = FieldSampler::new(u);
    let m = psi_marcher::<CMat3>(&sampler, spectral, 1);
    (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = ((k % g.nx) as isize, (k / g.nx) as isize);
            let id = CMat3::identity();
            let xy = m.cell(m.cell(id, i, j, Axis::X), i + 1, j, Axis::Y);
            let yx = m.cell(m.cell(id, i, j, Axis::Y), i, j + 1, Axis::X);
            (xy - yx).max_abs()
        })
        .collect()
}

/// Max over cells of [`compatibility_field`].
pub fn compatibility_residual(u: &ScalarFieldPeriodic, spectral: SpectralPoint) -> f64 {
    compatibility_field(u, spectral).into_iter().fold(0.0, f64::max)
}

/// `Ω = λ(ψ₁φ₂ − ψ₂φ₁) − λ²ψ₃φ₃` for `ψ` at `λ` and `φ` at `−μ`.
pub fn pairing(psi: &PsiState, phi: &PsiState) -> Complex64 {
    let lam = psi.spectral.lambda;
    let (p, f) = (psi.psi, phi.psi);
    lam * (p[0] * f[1] - p[1] * f[0]) - lam * lam * p[2] * f[2]
}

/// `∂_zΩ = iλ(μ − λ)ψ₂φ₃`, where `φ` sits at `−μ`.
pub fn pairing_dz(psi: &PsiState, phi: &PsiState) -> Complex64 {
    let lam = psi.spectral.lambda;
    let mu = -phi.spectral.lambda;
    I * lam * (mu - lam) * psi.psi[1] * phi.psi[2]
}

/// `∂_z̄Ω = ie^uλ(λ/μ − 1)ψ₃φ₁`.
pub fn pairing_dzbar(psi: &PsiState, phi: &PsiState, u: f64) -> Complex64 {
    let lam = psi.spectral.lambda;
    let mu = -phi.spectral.lambda;
    I * u.exp() * lam * (lam / mu - 1.0) * psi.psi[2] * phi.psi[0]
}

/// `∂_xΩ = ∂_zΩ + ∂_z̄Ω`.
pub fn pairing_dx(psi: &PsiState, phi: &PsiState, u: f64) -> Complex64 {
    pairing_dz(psi, phi) + pairing_dzbar(psi, phi, u)
}
