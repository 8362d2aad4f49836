//! The immersion `r = R·N` into the sphere of radius `R`, its tangents
//! `E₁ = ∂_x r`, `E₂ = ∂_y r`, the extracted cubic form and the aggregated
//! residual report.

use crate::error::{Error, Result};
use crate::geometry::{
    christoffel_generic, codazzi_residual, conformal_connection, gauss_curvature, gauss_residual, hermitian_induced,
    mean_curvature_vector, riemann, scalar_invariants, sphere_reduction_check, Connection2, Metric2, SymTensor3,
};
use crate::grid::{Axis, PeriodicGrid, ScalarFieldPeriodic, Stencil};
use crate::lax::{frame_orthonormality_report, integrate_frame, FrameField, FrameOptions, SpectralPoint};
use crate::linalg::{euclidean_inner, hermitian_inner, CMat3, CVec3, I};

/// Frames worse than this are refused by [`build_surface`].
pub const FRAME_TOLERANCE: f64 = 1e-8;

/// Torus candidates need two independent shifts below this defect.
pub const CLOSURE_TOLERANCE: f64 = 1e-4;

/// Points and analytic tangents on the frame's node block.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    pub grid: PeriodicGrid,
    pub radius: f64,
    pub ex: usize,
    pub ey: usize,
    pub r: Vec<CVec3>,
    pub e1: Vec<CVec3>,
    pub e2: Vec<CVec3>,
}

impl SurfaceMesh {
    pub fn stencil(&self) -> Stencil {
        Stencil::open(self.ex, self.ey, self.grid.hx(), self.grid.hy())
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

fn u_on_block(u: &ScalarFieldPeriodic, ex: usize, ey: usize) -> Vec<f64> {
    (0..ey).flat_map(|j| (0..ex).map(move |i| u.at(i as isize, j as isize))).collect()
}

fn check_grids(frames: &FrameField, u: &ScalarFieldPeriodic) -> Result<()> {
    if frames.grid != u.grid {
        return Err(Error::Validation("frame field and u live on different grids".into()));
    }
    Ok(())
}

/// `E₁ = iRe^{u/2}(λ⁻¹L + M)`, `E₂ = Re^{u/2}(λ⁻¹L − M)`.
pub fn tangent_analytic(frames: &FrameField, u: &ScalarFieldPeriodic, radius: f64) -> Result<(Vec<CVec3>, Vec<CVec3>)> {
    check_grids(frames, u)?;
    let inv = frames.spectral.inverse();
    let uu = u_on_block(u, frames.ex, frames.ey);
    Ok(frames
        .frames
        .iter()
        .zip(&uu)
        .map(|(f, &v)| {
            let s = radius * (0.5 * v).exp();
            let (l, m) = (f.column(0) * inv, f.column(1));
            ((l + m) * (I * s), (l - m) * s)
        })
        .unzip())
}

pub fn build_surface(frames: &FrameField, u: &ScalarFieldPeriodic, radius: f64) -> Result<SurfaceMesh> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Validation(format!("sphere radius must be positive, got {radius}")));
    }
    let defect = frame_orthonormality_report(frames);
    if !(defect < FRAME_TOLERANCE) {
        return Err(Error::InvalidFrame(format!("unitarity defect {defect:e} exceeds {FRAME_TOLERANCE:e}")));
    }
    let (e1, e2) = tangent_analytic(frames, u, radius)?;
    Ok(SurfaceMesh {
        grid: frames.grid,
        radius,
        ex: frames.ex,
        ey: frames.ey,
        r: frames.frames.iter().map(|f| f.column(2) * radius).collect(),
        e1,
        e2,
    })
}

/// `∂r/∂x`, `∂r/∂y` by fourth-order finite differences on the node block.
pub fn tangent_finite_difference(mesh: &SurfaceMesh) -> (Vec<CVec3>, Vec<CVec3>) {
    let s = mesh.stencil();
    (s.d1(&mesh.r, Axis::X), s.d1(&mesh.r, Axis::Y))
}

/// Cubic form and normal coefficients read off `∇_iE_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondForm {
    pub t: Vec<SymTensor3>,
    /// `(N | ∇_iE_j)` as `normal[n][i][j]`.
    pub normal: Vec<[[f64; 2]; 2]>,
}

/// `∇_iE_j = ∂_iE_j − Γ^k_ij E_k` with `Γ` in closed conformal form, then
/// `T^k_ij = (iE_k | ∇_iE_j) / (2R²e^u)`.
pub fn extract_second_form(frames: &FrameField, u: &ScalarFieldPeriodic, radius: f64) -> Result<SecondForm> {
    let mesh = build_surface(frames, u, radius)?;
    Ok(second_form_of(&mesh, u))
}

fn connections_on_block(u: &ScalarFieldPeriodic, ex: usize, ey: usize) -> Vec<Connection2> {
    let (ux, uy) = (u.dx(), u.dy());
    (0..ey)
        .flat_map(|j| (0..ex).map(move |i| (i as isize, j as isize)))
        .map(|(i, j)| conformal_connection(ux.at(i, j), uy.at(i, j)))
        .collect()
}

fn second_form_of(mesh: &SurfaceMesh, u: &ScalarFieldPeriodic) -> SecondForm {
    let s = mesh.stencil();
    let d = [[s.d1(&mesh.e1, Axis::X), s.d1(&mesh.e2, Axis::X)], [s.d1(&mesh.e1, Axis::Y), s.d1(&mesh.e2, Axis::Y)]];
    let gamma = connections_on_block(u, mesh.ex, mesh.ey);
    let uu = u_on_block(u, mesh.ex, mesh.ey);
    let mut t = Vec::with_capacity(mesh.len());
    let mut normal = Vec::with_capacity(mesh.len());
    for n in 0..mesh.len() {
        let e = [mesh.e1[n], mesh.e2[n]];
        let f = [e[0] * I, e[1] * I];
        let norm = 2.0 * mesh.radius * mesh.radius * uu[n].exp();
        let unit_n = mesh.r[n] * (1.0 / mesh.radius);
        let g = &gamma[n].0;
        let mut tn = SymTensor3::default();
        let mut nn = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let cov = d[i][j][n] - e[0] * g[0][i][j] - e[1] * g[1][i][j];
                for k in 0..2 {
                    tn.0[k][i][j] = euclidean_inner(f[k], cov) / norm;
                }
                nn[i][j] = euclidean_inner(unit_n, cov);
            }
        }
        t.push(tn);
        normal.push(nn);
    }
    SecondForm { t, normal }
}

/// Named residuals of one immersion; every entry is a sup-norm over nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ImmersionReport {
    pub entries: Vec<(&'static str, f64)>,
}

impl ImmersionReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    fn push(&mut self, name: &'static str, value: f64) {
        self.entries.push((name, value));
    }

    /// Adds `<name>_slope = log(coarse/fine) / log(h_coarse/h_fine)` for
    /// every defect present in both reports.
    pub fn add_slopes(&mut self, coarse: &ImmersionReport, ratio: f64, names: &[&'static str]) {
        for &name in names {
            if let (Some(f), Some(c)) = (self.get(name), coarse.get(name)) {
                let slope = (c / f).ln() / ratio.ln();
                self.entries.push((slope_name(name), slope));
            }
        }
    }
}

fn slope_name(name: &str) -> &'static str {
    match name {
        "gauss_defect" => "gauss_defect_slope",
        "codazzi_defect" => "codazzi_defect_slope",
        "tensor_match_defect" => "tensor_match_defect_slope",
        "normal_coefficient_defect" => "normal_coefficient_defect_slope",
        "fd_tangent_defect" => "fd_tangent_defect_slope",
        "k_closed_defect" => "k_closed_defect_slope",
        _ => "slope",
    }
}

/// Defects whose convergence under refinement is reported.
pub const REFINED_DEFECTS: [&str; 5] =
    ["gauss_defect", "codazzi_defect", "tensor_match_defect", "normal_coefficient_defect", "fd_tangent_defect"];

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)))
}

/// Per-node `max_i |⟨E_i|N⟩|` with the analytic tangents.
pub fn normality_field(mesh: &SurfaceMesh) -> Vec<f64> {
    (0..mesh.len())
        .map(|n| {
            let nn = mesh.r[n] * (1.0 / mesh.radius);
            hermitian_inner(mesh.e1[n], nn).norm().max(hermitian_inner(mesh.e2[n], nn).norm())
        })
        .collect()
}

/// Fills every residual from the mesh, its frames and the generating field.
pub fn full_report(mesh: &SurfaceMesh, frames: &FrameField, u: &ScalarFieldPeriodic, theta: f64) -> Result<ImmersionReport> {
    check_grids(frames, u)?;
    let rad = mesh.radius;
    let uu = u_on_block(u, mesh.ex, mesh.ey);
    let stencil = mesh.stencil();
    let mut rep = ImmersionReport { entries: Vec::new() };

    rep.push("unitarity_defect", frame_orthonormality_report(frames));
    rep.push("sphere_defect", max_of(mesh.r.iter().map(|r| (r.norm() - rad).abs())));
    rep.push("normality_defect", max_of(normality_field(mesh).into_iter()));

    let mut metric = Vec::with_capacity(mesh.len());
    let mut skew: f64 = 0.0;
    let mut conformal: f64 = 0.0;
    let mut reduction_ok = true;
    for n in 0..mesh.len() {
        let (g, w) = hermitian_induced(mesh.e1[n], mesh.e2[n])?;
        let c = 2.0 * rad * rad * uu[n].exp();
        conformal = conformal.max((g.0[0][0] - c).abs()).max((g.0[1][1] - c).abs()).max(g.0[0][1].abs());
        skew = skew.max(w.w12.abs());
        reduction_ok &= sphere_reduction_check(&g, &w, rad)?.consistent;
        metric.push(g);
    }
    rep.push("conformal_defect", conformal);
    rep.push("skew_form_max", skew);
    rep.push("sphere_reduction_failures", if reduction_ok { 0.0 } else { 1.0 });

    let (fx, fy) = tangent_finite_difference(mesh);
    rep.push(
        "fd_tangent_defect",
        max_of((0..mesh.len()).map(|n| (fx[n] - mesh.e1[n]).max_abs().max((fy[n] - mesh.e2[n]).max_abs()))),
    );

    let second = second_form_of(mesh, u);
    let mut k = Vec::with_capacity(mesh.len());
    let mut q = Vec::with_capacity(mesh.len());
    let mut h2 = Vec::with_capacity(mesh.len());
    let mut h_vec: f64 = 0.0;
    let mut trace: f64 = 0.0;
    let mut tmatch: f64 = 0.0;
    let mut ncoef: f64 = 0.0;
    let mut k_closed: f64 = 0.0;
    let mut q_closed: f64 = 0.0;
    for n in 0..mesh.len() {
        let t = &second.t[n];
        let g = &metric[n];
        let inv = scalar_invariants(t, g)?;
        let v = u_exp(uu[n]);
        k_closed = k_closed.max((inv.k - 2.0 * v.powi(-3) / (rad * rad)).abs());
        q_closed = q_closed.max((inv.q - 2.0 * v.powi(-6) / rad.powi(4)).abs());
        k.push(inv.k);
        q.push(inv.q);
        h2.push(inv.h2);
        let hv = mean_curvature_vector(t, mesh.e1[n] * I, mesh.e2[n] * I, g)?;
        h_vec = h_vec.max(hv.norm());
        let tv = t.trace_vector(g)?;
        trace = trace.max(tv[0].abs().max(tv[1].abs()));
        tmatch = tmatch.max(t.max_abs_diff(&SymTensor3::cubic_form(uu[n], theta)));
        let want = -2.0 * rad * v;
        let nn = &second.normal[n];
        ncoef = ncoef.max((nn[0][0] - want).abs()).max((nn[1][1] - want).abs()).max(nn[0][1].abs()).max(nn[1][0].abs());
    }
    let (kmin, kmax) = min_max(&k);
    let (qmin, qmax) = min_max(&q);
    rep.push("k_min", kmin);
    rep.push("k_max", kmax);
    rep.push("q_min", qmin);
    rep.push("q_max", qmax);
    rep.push("k_closed_defect", k_closed);
    rep.push("q_closed_defect", q_closed);
    rep.push("h2_max", max_of(h2.iter().map(|v| v.abs())));
    rep.push("minimality_h", h_vec);
    rep.push("trace_defect", trace);
    rep.push("tensor_match_defect", tmatch);
    rep.push("normal_coefficient_defect", ncoef);

    let gamma_g = christoffel_generic(&metric, &stencil)?;
    let curv = riemann(&gamma_g, &stencil);
    let gk = gauss_curvature(&metric, &curv)?;
    let (gmin, gmax) = min_max(&gk);
    rep.push("gauss_curvature_min", gmin);
    rep.push("gauss_curvature_max", gmax);
    rep.push(
        "gauss_defect",
        max_of((0..mesh.len()).map(|n| gauss_residual(gk[n], h2[n], k[n], rad).abs())),
    );

    let gamma_c = connections_on_block(u, mesh.ex, mesh.ey);
    rep.push("codazzi_defect", max_of(codazzi_residual(&second.t, &gamma_c, &metric, &stencil).into_iter()));

    let shifts = [(mesh.grid.nx, 0), (0, mesh.grid.ny)];
    let closure = if mesh.ex > mesh.grid.nx && mesh.ey > mesh.grid.ny {
        max_of(torus_closure(frames, &shifts)?.into_iter())
    } else {
        f64::NAN
    };
    if closure.is_finite() {
        rep.push("closure_defect", closure);
    }
    Ok(rep)
}

fn u_exp(u: f64) -> f64 {
    u.exp()
}

/// `max_p ‖U(p + s) − U(p)‖` for each grid-aligned shift `s`.
pub fn torus_closure(frames: &FrameField, shifts: &[(usize, usize)]) -> Result<Vec<f64>> {
    shifts
        .iter()
        .map(|&(dx, dy)| {
            if dx >= frames.ex || dy >= frames.ey {
                return Err(Error::Validation(format!(
                    "shift ({dx}, {dy}) leaves the {}x{} frame block",
                    frames.ex, frames.ey
                )));
            }
            let mut worst: f64 = 0.0;
            for j in 0..frames.ey - dy {
                for i in 0..frames.ex - dx {
                    let diff: CMat3 = *frames.at(i + dx, j + dy) - *frames.at(i, j);
                    worst = worst.max(diff.max_abs());
                }
            }
            Ok(worst)
        })
        .collect()
}

/// True when two linearly independent shifts close below [`CLOSURE_TOLERANCE`].
pub fn is_torus_candidate(shifts: &[(usize, usize)], defects: &[f64]) -> bool {
    let good: Vec<(i64, i64)> = shifts
        .iter()
        .zip(defects)
        .filter(|(_, d)| **d < CLOSURE_TOLERANCE)
        .map(|(s, _)| (s.0 as i64, s.1 as i64))
        .collect();
    good.iter().enumerate().any(|(a, p)| good[a + 1..].iter().any(|q| p.0 * q.1 - p.1 * q.0 != 0))
}

/// Frame, mesh and report for one field, with the pipeline's defaults.
pub fn immersion_report(
    u: &ScalarFieldPeriodic,
    spectral: SpectralPoint,
    radius: f64,
    options: &FrameOptions,
) -> Result<(FrameField, SurfaceMesh, ImmersionReport)> {
    let frames = integrate_frame(u, spectral, CMat3::identity(), options)?;
    let mesh = build_surface(&frames, u, radius)?;
    let rep = full_report(&mesh, &frames, u, spectral.theta)?;
    Ok((frames, mesh, rep))
}

/// Every other node of `u` in both directions, or `None` if too coarse.
pub fn coarsen(u: &ScalarFieldPeriodic) -> Option<ScalarFieldPeriodic> {
    let g = u.grid;
    if g.nx % 2 != 0 || g.ny % 2 != 0 {
        return None;
    }
    let coarse = PeriodicGrid::new(g.nx / 2, g.ny / 2, g.lx, g.ly).ok()?;
    let values = (0..coarse.ny).flat_map(|j| (0..coarse.nx).map(move |i| u.values[g.index(2 * i, 2 * j)])).collect();
    ScalarFieldPeriodic::new(coarse, values).ok()
}

/// [`immersion_report`] plus refinement slopes against the coarsened field.
pub fn immersion_report_with_slopes(
    u: &ScalarFieldPeriodic,
    spectral: SpectralPoint,
    radius: f64,
    options: &FrameOptions,
) -> Result<(FrameField, SurfaceMesh, ImmersionReport)> {
    let (frames, mesh, mut rep) = immersion_report(u, spectral, radius, options)?;
    if let Some(c) = coarsen(u) {
        let mut copt = *options;
        copt.extent = options.extent.map(|(ex, ey)| (ex / 2 + 1, ey / 2 + 1));
        if let Ok((_, _, crep)) = immersion_report(&c, spectral, radius, &copt) {
            rep.add_slopes(&crep, 2.0, &REFINED_DEFECTS);
        }
    }
    Ok((frames, mesh, rep))
}

/// Induced metric per node from the analytic tangents.
pub fn induced_metric(mesh: &SurfaceMesh) -> Result<Vec<Metric2>> {
    (0..mesh.len()).map(|n| hermitian_induced(mesh.e1[n], mesh.e2[n]).map(|(g, _)| g)).collect()
}
