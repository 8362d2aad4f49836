//! Text formats for fields, frames, meshes and reports. Every number is
//! written with 17 significant digits so values survive a round trip
//! through text exactly.
//!
//! * field CSV: `nx,ny,lx,ly` on the first line, then one value per line in
//!   storage order (`j·nx + i`);
//! * frame CSV: `nx,ny,lx,ly,theta,ex,ey`, then one line of 18 numbers per
//!   node, the real and imaginary parts of `U` column by column;
//! * mesh CSV: a header naming the six real coordinates, then one node per line;
//! * OBJ / PLY: a 3-coordinate projection of the mesh, triangulated;
//! * report JSON: one flat object of named numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarFieldPeriodic};
use crate::lax::{FrameField, SpectralPoint};
use crate::linalg::CMat3;
use crate::solver::WaveProfile1D;
use crate::surface::{ImmersionReport, SurfaceMesh};

/// Names of the real coordinates of C³ ≅ R⁶.
pub const COORDINATE_NAMES: [&str; 6] = ["x1_re", "x1_im", "x2_re", "x2_im", "x3_re", "x3_im"];

/// 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{what}: cannot read number '{}'", s.trim())))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("{what}: cannot read count '{}'", s.trim())))
}

fn header_fields<'a>(lines: &mut impl Iterator<Item = &'a str>, count: usize, what: &str) -> Result<Vec<&'a str>> {
    let first = lines.next().ok_or_else(|| Error::Parse(format!("{what}: empty file")))?;
    let fields: Vec<&str> = first.split(',').collect();
    if fields.len() != count {
        return Err(Error::Parse(format!("{what}: header needs {count} fields, found {}", fields.len())));
    }
    Ok(fields)
}

pub fn field_to_csv(u: &ScalarFieldPeriodic) -> String {
    let g = &u.grid;
    let mut s = format!("{},{},{},{}\n", g.nx, g.ny, num(g.lx), num(g.ly));
    for v in &u.values {
        s.push_str(&num(*v));
        s.push('\n');
    }
    s
}

pub fn field_from_csv(text: &str) -> Result<ScalarFieldPeriodic> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let h = header_fields(&mut lines, 4, "field")?;
    let grid = PeriodicGrid::new(
        parse_usize(h[0], "field nx")?,
        parse_usize(h[1], "field ny")?,
        parse_f64(h[2], "field lx")?,
        parse_f64(h[3], "field ly")?,
    )?;
    let values = lines.map(|l| parse_f64(l, "field value")).collect::<Result<Vec<_>>>()?;
    ScalarFieldPeriodic::new(grid, values)
}

pub fn write_field(path: &Path, u: &ScalarFieldPeriodic) -> Result<()> {
    write(path, &field_to_csv(u))
}

pub fn read_field(path: &Path) -> Result<ScalarFieldPeriodic> {
    field_from_csv(&read(path)?)
}

pub fn frame_to_csv(f: &FrameField) -> String {
    let g = &f.grid;
    let mut s = format!("{},{},{},{},{},{},{}\n", g.nx, g.ny, num(g.lx), num(g.ly), num(f.spectral.theta), f.ex, f.ey);
    for m in &f.frames {
        let mut parts = Vec::with_capacity(18);
        for c in 0..3 {
            for r in 0..3 {
                parts.push(num(m[(r, c)].re));
                parts.push(num(m[(r, c)].im));
            }
        }
        s.push_str(&parts.join(","));
        s.push('\n');
    }
    s
}

pub fn frame_from_csv(text: &str) -> Result<FrameField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let h = header_fields(&mut lines, 7, "frame")?;
    let grid = PeriodicGrid::new(
        parse_usize(h[0], "frame nx")?,
        parse_usize(h[1], "frame ny")?,
        parse_f64(h[2], "frame lx")?,
        parse_f64(h[3], "frame ly")?,
    )?;
    let theta = parse_f64(h[4], "frame theta")?;
    let (ex, ey) = (parse_usize(h[5], "frame ex")?, parse_usize(h[6], "frame ey")?);
    let frames = lines
        .map(|l| {
            let v = l.split(',').map(|x| parse_f64(x, "frame entry")).collect::<Result<Vec<_>>>()?;
            if v.len() != 18 {
                return Err(Error::Parse(format!("frame node needs 18 numbers, found {}", v.len())));
            }
            Ok(CMat3::from_fn(|r, c| Complex64::new(v[6 * c + 2 * r], v[6 * c + 2 * r + 1])))
        })
        .collect::<Result<Vec<_>>>()?;
    FrameField::new(grid, SpectralPoint::new(theta), ex, ey, frames).map_err(|e| match e {
        Error::InvalidFrame(m) => Error::Validation(m),
        other => other,
    })
}

pub fn write_frame(path: &Path, f: &FrameField) -> Result<()> {
    write(path, &frame_to_csv(f))
}

pub fn read_frame(path: &Path) -> Result<FrameField> {
    frame_from_csv(&read(path)?)
}

pub fn mesh_to_csv(mesh: &SurfaceMesh) -> String {
    let mut s = COORDINATE_NAMES.join(",");
    s.push('\n');
    for r in &mesh.r {
        let parts: Vec<String> = r.to_real6().iter().map(|v| num(*v)).collect();
        s.push_str(&parts.join(","));
        s.push('\n');
    }
    s
}

/// How mesh points are mapped to three dimensions for OBJ/PLY export.
#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    /// Three of the six real coordinates, by index into [`COORDINATE_NAMES`].
    Coordinates([usize; 3]),
    /// The top three principal components of the point cloud.
    Pca,
}

impl Projection {
    /// `pca` or three comma-separated coordinate names such as `x1_re,x2_re,x3_re`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("pca") {
            return Ok(Projection::Pca);
        }
        let idx = t
            .split(',')
            .map(|n| {
                COORDINATE_NAMES
                    .iter()
                    .position(|c| *c == n.trim())
                    .ok_or_else(|| Error::Parse(format!("unknown coordinate '{}'", n.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        match idx.as_slice() {
            [a, b, c] => Ok(Projection::Coordinates([*a, *b, *c])),
            _ => Err(Error::Parse(format!("projection needs three coordinates, got '{t}'"))),
        }
    }
}

/// Projected points plus the description written to the sidecar.
#[derive(Clone, Debug, PartialEq)]
pub struct Projected {
    pub points: Vec<[f64; 3]>,
    /// Unit vectors in R⁶ spanning the projection.
    pub axes: [[f64; 6]; 3],
    pub mean: [f64; 6],
    /// Variance of the cloud along each axis.
    pub variance: [f64; 3],
    pub mode: String,
}

pub fn project(mesh: &SurfaceMesh, projection: &Projection) -> Projected {
    let pts: Vec<[f64; 6]> = mesh.r.iter().map(|r| r.to_real6()).collect();
    let n = pts.len() as f64;
    let mut mean = [0.0; 6];
    for p in &pts {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / n;
        }
    }
    let cov = DMatrix::from_fn(6, 6, |a, b| pts.iter().map(|p| (p[a] - mean[a]) * (p[b] - mean[b])).sum::<f64>() / n);
    let (axes, mode, center) = match projection {
        Projection::Coordinates(idx) => {
            let mut axes = [[0.0; 6]; 3];
            for (k, &i) in idx.iter().enumerate() {
                axes[k][i] = 1.0;
            }
            let mode = idx.iter().map(|&i| COORDINATE_NAMES[i]).collect::<Vec<_>>().join(",");
            (axes, mode, [0.0; 6])
        }
        Projection::Pca => {
            let eig = SymmetricEigen::new(cov.clone());
            let mut order: Vec<usize> = (0..6).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
            let mut axes = [[0.0; 6]; 3];
            for (k, &o) in order.iter().take(3).enumerate() {
                let col = eig.eigenvectors.column(o);
                // fix the sign so the largest component is positive
                let big = (0..6).max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a))).unwrap_or(0);
                let sign = if col[big] < 0.0 { -1.0 } else { 1.0 };
                for i in 0..6 {
                    axes[k][i] = sign * col[i];
                }
            }
            (axes, "pca".to_string(), mean)
        }
    };
    let dot = |p: &[f64; 6], a: &[f64; 6]| (0..6).map(|i| (p[i] - center[i]) * a[i]).sum::<f64>();
    let points = pts.iter().map(|p| [dot(p, &axes[0]), dot(p, &axes[1]), dot(p, &axes[2])]).collect();
    let mut variance = [0.0; 3];
    for (k, a) in axes.iter().enumerate() {
        variance[k] = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| a[i] * cov[(i, j)] * a[j]).sum();
    }
    Projected { points, axes, mean, variance, mode }
}

/// Two triangles per cell of the `ex × ey` node block, zero-based.
pub fn triangles(ex: usize, ey: usize) -> Vec<[usize; 3]> {
    let mut t = Vec::with_capacity(2 * (ex - 1) * (ey - 1));
    for j in 0..ey - 1 {
        for i in 0..ex - 1 {
            let a = j * ex + i;
            let (b, c, d) = (a + 1, a + ex + 1, a + ex);
            t.push([a, b, c]);
            t.push([a, c, d]);
        }
    }
    t
}

pub fn to_obj(p: &Projected, ex: usize, ey: usize) -> String {
    let mut s = format!("# projection {}\n", p.mode);
    for v in &p.points {
        let _ = writeln!(s, "v {} {} {}", num(v[0]), num(v[1]), num(v[2]));
    }
    for t in triangles(ex, ey) {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn to_ply(p: &Projected, ex: usize, ey: usize) -> String {
    let tris = triangles(ex, ey);
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\ncomment projection {}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        p.mode,
        p.points.len(),
        tris.len()
    );
    for v in &p.points {
        let _ = writeln!(s, "{} {} {}", num(v[0]), num(v[1]), num(v[2]));
    }
    for t in tris {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_num(v: f64) -> String {
    if v.is_finite() {
        num(v)
    } else {
        "null".into()
    }
}

fn json_array(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| json_num(*x)).collect::<Vec<_>>().join(", "))
}

/// Sidecar describing the OBJ/PLY projection.
pub fn projection_sidecar(p: &Projected) -> String {
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"projection\": {},", json_string(&p.mode));
    let _ = writeln!(s, "  \"coordinates\": [{}],", COORDINATE_NAMES.map(json_string).join(", "));
    let _ = writeln!(s, "  \"center\": {},", json_array(if p.mode == "pca" { &p.mean } else { &[0.0; 6] }));
    let axes: Vec<String> = p.axes.iter().map(|a| json_array(a)).collect();
    let _ = writeln!(s, "  \"axes\": [{}],", axes.join(", "));
    let _ = writeln!(s, "  \"variance\": {}", json_array(&p.variance));
    s.push_str("}\n");
    s
}

pub fn report_to_json(report: &ImmersionReport) -> String {
    let body: Vec<String> = report.entries.iter().map(|(k, v)| format!("  {}: {}", json_string(k), json_num(*v))).collect();
    format!("{{\n{}\n}}\n", body.join(",\n"))
}

pub fn wave_to_csv(p: &WaveProfile1D) -> String {
    let mut s = format!("energy,period\n{},{}\nx,u,du\n", num(p.energy), num(p.period));
    let n = p.u.len();
    for k in 0..n {
        let x = p.period * k as f64 / n as f64;
        let _ = writeln!(s, "{},{},{}", num(x), num(p.u[k]), num(p.du[k]));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write(path, text)
}
