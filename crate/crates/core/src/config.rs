//! Flat `key = value` run configuration.
//!
//! ```text
//! # flat torus
//! nx = 64
//! ny = 64
//! lx = 1
//! ly = 1
//! radius = 1
//! theta = 0
//! seed = zero          # or: wave 6.1 | file path/to/field.csv
//! projection = pca     # or: x1_re,x2_re,x3_re
//! ```
//!
//! Syntax problems (missing `=`, unknown or repeated keys, unreadable
//! numbers) are parse errors. Values that read fine but make no sense
//! (non-positive lengths, `radius <= 0`, a missing seed file) are
//! validation errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::io::Projection;

#[derive(Clone, Debug, PartialEq)]
pub enum Seed {
    Zero,
    Wave(f64),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    /// When set, `lx` is this many wave periods of the seed energy.
    pub wave_periods: Option<usize>,
    pub radius: f64,
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: Seed,
    pub out: PathBuf,
    pub projection: Projection,
    pub reunitarize: bool,
    /// RK4 substeps per cell, `None` for the automatic choice.
    pub substeps: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nx: 64,
            ny: 64,
            lx: 1.0,
            ly: 1.0,
            wave_periods: None,
            radius: 1.0,
            theta: 0.0,
            tol: 1e-10,
            max_iter: 30,
            seed: Seed::Zero,
            out: PathBuf::from("out"),
            projection: Projection::Pca,
            reunitarize: false,
            substeps: None,
        }
    }
}

const KEYS: [&str; 14] = [
    "nx",
    "ny",
    "lx",
    "ly",
    "wave_periods",
    "radius",
    "theta",
    "tol",
    "max_iter",
    "seed",
    "out",
    "projection",
    "reunitarize",
    "substeps",
];

fn number(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::Parse(format!("{key}: '{v}' is not a number")))
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| Error::Parse(format!("{key}: '{v}' is not a non-negative integer")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse(format!("{key}: '{v}' is not a boolean"))),
    }
}

impl RunConfig {
    /// Parses and validates. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value'", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Parse(format!("line {}: unknown key '{key}'", n + 1)));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse(format!("line {}: repeated key '{key}'", n + 1)));
            }
            match key {
                "nx" => c.nx = count(key, value)?,
                "ny" => c.ny = count(key, value)?,
                "lx" => c.lx = number(key, value)?,
                "ly" => c.ly = number(key, value)?,
                "wave_periods" => c.wave_periods = Some(count(key, value)?),
                "radius" => c.radius = number(key, value)?,
                "theta" => c.theta = number(key, value)?,
                "tol" => c.tol = number(key, value)?,
                "max_iter" => c.max_iter = count(key, value)?,
                "seed" => c.seed = parse_seed(value, base)?,
                "out" => c.out = base.join(value),
                "projection" => c.projection = Projection::parse(value)?,
                "reunitarize" => c.reunitarize = flag(key, value)?,
                "substeps" => {
                    c.substeps = if value == "auto" { None } else { Some(count(key, value)?) };
                }
                _ => unreachable!(),
            }
        }
        if !seen.contains("out") {
            c.out = base.join(&c.out);
        }
        if seen.contains("lx") && c.wave_periods.is_some() {
            return Err(Error::Validation("give either lx or wave_periods, not both".into()));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("lx", self.lx)?;
        positive("ly", self.ly)?;
        positive("radius", self.radius)?;
        positive("tol", self.tol)?;
        if !self.theta.is_finite() {
            return Err(Error::Validation(format!("theta must be finite, got {}", self.theta)));
        }
        if self.max_iter == 0 {
            return Err(Error::Validation("max_iter must be at least 1".into()));
        }
        if self.substeps == Some(0) {
            return Err(Error::Validation("substeps must be at least 1".into()));
        }
        match &self.seed {
            Seed::Wave(e) if !e.is_finite() => return Err(Error::Validation(format!("wave energy {e} is not finite"))),
            Seed::File(p) if !p.is_file() => {
                return Err(Error::Validation(format!("seed file {} does not exist", p.display())))
            }
            _ => {}
        }
        match (self.wave_periods, &self.seed) {
            (Some(0), _) => return Err(Error::Validation("wave_periods must be at least 1".into())),
            (Some(_), Seed::Wave(_)) | (None, _) => {}
            (Some(_), _) => return Err(Error::Validation("wave_periods needs a wave seed".into())),
        }
        PeriodicGrid::new(self.nx, self.ny, self.lx, self.ly)?;
        Ok(())
    }
}

fn parse_seed(value: &str, base: &Path) -> Result<Seed> {
    let mut parts = value.splitn(2, char::is_whitespace);
    match (parts.next().unwrap_or(""), parts.next().map(str::trim)) {
        ("zero", None) => Ok(Seed::Zero),
        ("wave", Some(e)) => Ok(Seed::Wave(number("seed", e)?)),
        ("file", Some(p)) if !p.is_empty() => Ok(Seed::File(base.join(p))),
        _ => Err(Error::Parse(format!("seed: expected 'zero', 'wave <E>' or 'file <path>', got '{value}'"))),
    }
}
