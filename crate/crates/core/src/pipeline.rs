//! Stage runner. Each stage writes its artifact into the output directory
//! and reuses artifacts already there; missing prerequisites are computed
//! and written on the way.
//!
//! | stage   | artifact                                                   |
//! |---------|------------------------------------------------------------|
//! | wave    | `wave.csv`                                                 |
//! | solve   | `field.csv`                                                |
//! | frame   | `frame.csv`                                                |
//! | surface | `mesh.csv`                                                 |
//! | report  | `report.json`                                              |
//! | export  | `surface.obj`, `surface.ply`, `surface.projection.json`    |
//!
//! Every run also writes `<stage>.log`, one `key=value` per line, ending in
//! `status=ok` or `error=<name>`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::{RunConfig, Seed};
use crate::error::{Error, Result};
use crate::grid::{sup_norm, PeriodicGrid, ScalarFieldPeriodic};
use crate::io::{self, num};
use crate::lax::{compatibility_residual, integrate_frame, FrameField, FrameOptions, SpectralPoint};
use crate::linalg::CMat3;
use crate::solver::{
    lift_1d, newton_solve, pde_residual, period_quadrature, period_shooting, travelling_wave, WaveProfile1D,
};
use crate::surface::{build_surface, coarsen, full_report, immersion_report, ImmersionReport, SurfaceMesh, REFINED_DEFECTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Solve,
    Wave,
    Frame,
    Surface,
    Report,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Solve, Stage::Wave, Stage::Frame, Stage::Surface, Stage::Report, Stage::Export];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Solve => "solve",
            Stage::Wave => "wave",
            Stage::Frame => "frame",
            Stage::Surface => "surface",
            Stage::Report => "report",
            Stage::Export => "export",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| Error::Parse(format!("unknown stage '{s}'")))
    }
}

pub const FIELD_FILE: &str = "field.csv";
pub const WAVE_FILE: &str = "wave.csv";
pub const FRAME_FILE: &str = "frame.csv";
pub const MESH_FILE: &str = "mesh.csv";
pub const REPORT_FILE: &str = "report.json";
pub const OBJ_FILE: &str = "surface.obj";
pub const PLY_FILE: &str = "surface.ply";
pub const SIDECAR_FILE: &str = "surface.projection.json";

pub fn log_file(out: &Path, stage: Stage) -> PathBuf {
    out.join(format!("{}.log", stage.name()))
}

struct Run<'a> {
    config: &'a RunConfig,
    log: Vec<String>,
    written: Vec<PathBuf>,
    field: Option<ScalarFieldPeriodic>,
    frames: Option<FrameField>,
}

/// Runs one stage; the log is written whether or not it succeeds.
pub fn run_pipeline(config: &RunConfig, stage: Stage) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let mut run = Run { config, log: vec![format!("stage={stage}")], written: Vec::new(), field: None, frames: None };
    let result = run.stage(stage);
    match &result {
        Ok(()) => run.line("status", "ok"),
        Err(e) => {
            run.line("message", &e.to_string());
            run.line("error", e.name());
        }
    }
    let path = log_file(&config.out, stage);
    let mut text = run.log.join("\n");
    text.push('\n');
    let logged = io::write_text(&path, &text);
    result?;
    logged?;
    run.written.push(path);
    Ok(run.written)
}

impl Run<'_> {
    fn line(&mut self, key: &str, value: &str) {
        self.log.push(format!("{key}={value}"));
    }

    fn value(&mut self, key: &str, v: f64) {
        self.log.push(format!("{key}={}", num(v)));
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn emit(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        io::write_text(&p, text)?;
        self.line("wrote", name);
        self.written.push(p);
        Ok(())
    }

    fn stage(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Wave => self.wave().map(|_| ()),
            Stage::Solve => self.solve().map(|_| ()),
            Stage::Frame => self.frame().map(|_| ()),
            Stage::Surface => {
                let mesh = self.mesh()?;
                self.emit(MESH_FILE, &io::mesh_to_csv(&mesh))
            }
            Stage::Report => self.report(),
            Stage::Export => self.export(),
        }
    }

    fn energy(&self) -> Result<f64> {
        match self.config.seed {
            Seed::Wave(e) => Ok(e),
            _ => Err(Error::Validation("the wave stage needs 'seed = wave <E>'".into())),
        }
    }

    fn wave(&mut self) -> Result<WaveProfile1D> {
        let e = self.energy()?;
        let profile = travelling_wave(e)?;
        let shot = period_shooting(e)?;
        self.value("energy", e);
        self.value("period_quadrature", profile.period);
        self.value("period_shooting", shot);
        self.value("period_difference", (profile.period - shot).abs());
        self.value("energy_drift", profile.energy_drift());
        self.emit(WAVE_FILE, &io::wave_to_csv(&profile))?;
        Ok(profile)
    }

    fn grid(&mut self) -> Result<PeriodicGrid> {
        let c = self.config;
        let lx = match (c.wave_periods, &c.seed) {
            (Some(m), Seed::Wave(e)) => {
                let lx = m as f64 * period_quadrature(*e)?;
                self.value("lx", lx);
                lx
            }
            _ => c.lx,
        };
        PeriodicGrid::new(c.nx, c.ny, lx, c.ly)
    }

    fn seed(&mut self) -> Result<ScalarFieldPeriodic> {
        let grid = self.grid()?;
        match self.config.seed.clone() {
            Seed::Zero => Ok(ScalarFieldPeriodic::constant(grid, 0.0)),
            Seed::Wave(_) => {
                let profile = self.wave()?;
                lift_1d(&profile, grid)
            }
            Seed::File(p) => {
                let u = io::read_field(&p)?;
                self.line("seed_file", &p.display().to_string());
                Ok(u)
            }
        }
    }

    fn solve(&mut self) -> Result<ScalarFieldPeriodic> {
        let u0 = self.seed()?;
        let (nx, ny) = (u0.grid.nx, u0.grid.ny);
        self.line("grid", &format!("{nx}x{ny}"));
        let result = newton_solve(&u0, self.config.tol, self.config.max_iter);
        let (u, report) = result?;
        for (k, r) in report.residuals.iter().enumerate() {
            self.value(&format!("residual_{k}"), *r);
        }
        self.line("iterations", &report.iterations.to_string());
        self.value("final_residual", report.final_residual());
        self.value("seed_amplitude", u0.sup_norm());
        self.value("amplitude", u.sup_norm());
        for (k, q) in report.quadratic_ratios().iter().enumerate() {
            self.value(&format!("quadratic_ratio_{k}"), *q);
        }
        self.emit(FIELD_FILE, &io::field_to_csv(&u))?;
        self.field = Some(u.clone());
        Ok(u)
    }

    fn field(&mut self) -> Result<ScalarFieldPeriodic> {
        if let Some(u) = &self.field {
            return Ok(u.clone());
        }
        let p = self.path(FIELD_FILE);
        let u = if p.is_file() {
            self.line("read", FIELD_FILE);
            io::read_field(&p)?
        } else {
            self.solve()?
        };
        self.field = Some(u.clone());
        Ok(u)
    }

    fn options(&self) -> FrameOptions {
        FrameOptions { substeps: self.config.substeps, reunitarize: self.config.reunitarize, ..FrameOptions::default() }
    }

    fn spectral(&self) -> SpectralPoint {
        SpectralPoint::new(self.config.theta)
    }

    fn frame(&mut self) -> Result<FrameField> {
        let u = self.field()?;
        let f = integrate_frame(&u, self.spectral(), CMat3::identity(), &self.options())?;
        self.value("theta", self.config.theta);
        self.value("unitarity_defect", crate::lax::frame_orthonormality_report(&f));
        self.emit(FRAME_FILE, &io::frame_to_csv(&f))?;
        self.frames = Some(f.clone());
        Ok(f)
    }

    fn frames(&mut self) -> Result<FrameField> {
        if let Some(f) = &self.frames {
            return Ok(f.clone());
        }
        let p = self.path(FRAME_FILE);
        let f = if p.is_file() {
            self.line("read", FRAME_FILE);
            io::read_frame(&p)?
        } else {
            self.frame()?
        };
        let u = self.field()?;
        if f.grid != u.grid {
            return Err(Error::Validation(format!("{FRAME_FILE} and {FIELD_FILE} are on different grids")));
        }
        self.frames = Some(f.clone());
        Ok(f)
    }

    fn mesh(&mut self) -> Result<SurfaceMesh> {
        let u = self.field()?;
        let f = self.frames()?;
        let mesh = build_surface(&f, &u, self.config.radius)?;
        let sphere = mesh.r.iter().map(|r| (r.norm() - mesh.radius).abs()).fold(0.0, f64::max);
        self.value("radius", mesh.radius);
        self.value("sphere_defect", sphere);
        self.value("normality_defect", crate::surface::normality_field(&mesh).into_iter().fold(0.0, f64::max));
        Ok(mesh)
    }

    fn report(&mut self) -> Result<()> {
        let u = self.field()?;
        let f = self.frames()?;
        let mesh = self.mesh()?;
        let mut rep = full_report(&mesh, &f, &u, f.spectral.theta)?;
        rep.entries.push(("pde_residual", sup_norm(&pde_residual(&u).values)));
        rep.entries.push(("compatibility_residual", compatibility_residual(&u, f.spectral)));
        if let Some(c) = coarsen(&u) {
            let options = self.options();
            match immersion_report(&c, f.spectral, self.config.radius, &options) {
                Ok((_, _, coarse)) => rep.add_slopes(&coarse, 2.0, &REFINED_DEFECTS),
                Err(e) => self.line("coarse_report", e.name()),
            }
        }
        self.log_report(&rep);
        self.emit(REPORT_FILE, &io::report_to_json(&rep))
    }

    fn log_report(&mut self, rep: &ImmersionReport) {
        for (k, v) in &rep.entries {
            self.value(k, *v);
        }
    }

    fn export(&mut self) -> Result<()> {
        let mesh = self.mesh()?;
        let p = io::project(&mesh, &self.config.projection);
        self.line("projection", &p.mode);
        self.emit(OBJ_FILE, &io::to_obj(&p, mesh.ex, mesh.ey))?;
        self.emit(PLY_FILE, &io::to_ply(&p, mesh.ex, mesh.ey))?;
        self.emit(SIDECAR_FILE, &io::projection_sidecar(&p))
    }
}
