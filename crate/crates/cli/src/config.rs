//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Unknown keys are rejected. Command-line flags override values
//! read from a file.

use std::f64::consts::TAU;
use std::fmt::Write;
use std::path::PathBuf;

use magnon::bilayer::reference_coupling;
use magnon::linalg::mat2_hermitian_deviation;
use magnon::{Flux, Mat2, C64};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub flux: Flux,
    pub qmax: i64,
    pub kgrid: usize,
    pub e0: f64,
    pub phi_start: f64,
    pub phi_end: f64,
    pub steps: usize,
    pub radius: usize,
    pub tol: f64,
    pub truncation_tol: f64,
    pub margin: f64,
    pub fatten: f64,
    pub k: Mat2,
    pub m: Mat2,
    /// Cell of the A-site carrying the defect.
    pub v: (i64, i64),
    /// Which neighbour of `v` is `w` (0, 1, 2 in neighbour order).
    pub w: usize,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let (k, m) = reference_coupling();
        RunConfig {
            flux: Flux::Real(0.7),
            qmax: 10,
            kgrid: 24,
            e0: 3.5,
            phi_start: 0.0,
            phi_end: TAU,
            steps: 200,
            radius: 40,
            tol: 1e-12,
            truncation_tol: 1e-3,
            margin: 0.1,
            fatten: 0.0,
            k,
            m,
            v: (0, 0),
            w: 0,
            out: None,
            svg: None,
        }
    }
}

pub const KEYS: [&str; 18] = [
    "flux",
    "qmax",
    "kgrid",
    "e0",
    "phi_start",
    "phi_end",
    "steps",
    "radius",
    "tol",
    "truncation_tol",
    "margin",
    "fatten",
    "k",
    "m",
    "v",
    "w",
    "out",
    "svg",
];

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Usage(format!("config key `{key}` = `{value}`: {why}"))
}

/// `p/q` is the rational flux `alpha = p/q`; a bare number is the angle `phi`.
pub fn parse_flux(s: &str) -> Result<Flux, CliError> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = p
            .trim()
            .parse()
            .map_err(|_| bad("flux", s, "numerator is not an integer"))?;
        let q = q
            .trim()
            .parse()
            .map_err(|_| bad("flux", s, "denominator is not an integer"))?;
        return Flux::rational(p, q).map_err(|e| bad("flux", s, &e.to_string()));
    }
    let phi: f64 = s
        .parse()
        .map_err(|_| bad("flux", s, "expected p/q or a real angle"))?;
    if !phi.is_finite() {
        return Err(bad("flux", s, "angle must be finite"));
    }
    Ok(Flux::Real(phi))
}

fn format_flux(f: &Flux) -> String {
    match f {
        Flux::Real(phi) => format!("{phi:?}"),
        Flux::Rational { p, q } => format!("{p}/{q}"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| bad(key, value, "not a valid number"))
}

fn parse_positive(key: &str, value: &str) -> Result<f64, CliError> {
    let x: f64 = parse_num(key, value)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(bad(key, value, "must be positive"));
    }
    Ok(x)
}

/// Eight reals: `re im` of the entries `11, 12, 21, 22`.
pub fn parse_mat2(key: &str, value: &str) -> Result<Mat2, CliError> {
    let xs: Vec<f64> = value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_num(key, t))
        .collect::<Result<_, _>>()?;
    if xs.len() != 8 {
        return Err(bad(
            key,
            value,
            "expected 8 reals (re, im of entries 11, 12, 21, 22)",
        ));
    }
    let c = |i: usize| C64::new(xs[2 * i], xs[2 * i + 1]);
    let m = [[c(0), c(1)], [c(2), c(3)]];
    if mat2_hermitian_deviation(&m) > 1e-12 {
        return Err(bad(key, value, "matrix must be Hermitian"));
    }
    Ok(m)
}

fn format_mat2(m: &Mat2) -> String {
    m.iter()
        .flatten()
        .map(|z| format!("{:?} {:?}", z.re, z.im))
        .collect::<Vec<_>>()
        .join(" ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "config line {}: expected `key = value`",
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "flux" => self.flux = parse_flux(value)?,
            "qmax" => {
                self.qmax = parse_num(key, value)?;
                if self.qmax < 1 {
                    return Err(bad(key, value, "must be at least 1"));
                }
            }
            "kgrid" => {
                self.kgrid = parse_num(key, value)?;
                if self.kgrid < 4 {
                    return Err(bad(key, value, "must be at least 4"));
                }
            }
            "e0" => self.e0 = parse_num(key, value)?,
            "phi_start" => self.phi_start = parse_num(key, value)?,
            "phi_end" => self.phi_end = parse_num(key, value)?,
            "steps" => {
                self.steps = parse_num(key, value)?;
                if self.steps == 0 {
                    return Err(bad(key, value, "must be positive"));
                }
            }
            "radius" => {
                self.radius = parse_num(key, value)?;
                if self.radius == 0 {
                    return Err(bad(key, value, "must be positive"));
                }
            }
            "tol" => self.tol = parse_positive(key, value)?,
            "truncation_tol" => self.truncation_tol = parse_positive(key, value)?,
            "margin" => self.margin = parse_positive(key, value)?,
            "fatten" => {
                self.fatten = parse_num(key, value)?;
                if self.fatten.is_nan() || self.fatten < 0.0 {
                    return Err(bad(key, value, "must be non-negative"));
                }
            }
            "k" => self.k = parse_mat2(key, value)?,
            "m" => self.m = parse_mat2(key, value)?,
            "v" => {
                let (a, b) = value
                    .split_once(',')
                    .ok_or_else(|| bad(key, value, "expected n1,n2"))?;
                self.v = (parse_num(key, a.trim())?, parse_num(key, b.trim())?);
            }
            "w" => {
                self.w = parse_num(key, value)?;
                if self.w > 2 {
                    return Err(bad(key, value, "neighbour index must be 0, 1 or 2"));
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "svg" => self.svg = Some(PathBuf::from(value)),
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown config key `{key}` (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Inverse of [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "flux = {}", format_flux(&self.flux));
        let _ = writeln!(s, "qmax = {}", self.qmax);
        let _ = writeln!(s, "kgrid = {}", self.kgrid);
        let _ = writeln!(s, "e0 = {:?}", self.e0);
        let _ = writeln!(s, "phi_start = {:?}", self.phi_start);
        let _ = writeln!(s, "phi_end = {:?}", self.phi_end);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "radius = {}", self.radius);
        let _ = writeln!(s, "tol = {:?}", self.tol);
        let _ = writeln!(s, "truncation_tol = {:?}", self.truncation_tol);
        let _ = writeln!(s, "margin = {:?}", self.margin);
        let _ = writeln!(s, "fatten = {:?}", self.fatten);
        let _ = writeln!(s, "k = {}", format_mat2(&self.k));
        let _ = writeln!(s, "m = {}", format_mat2(&self.m));
        let _ = writeln!(s, "v = {},{}", self.v.0, self.v.1);
        let _ = writeln!(s, "w = {}", self.w);
        if let Some(p) = &self.out {
            let _ = writeln!(s, "out = {}", p.display());
        }
        if let Some(p) = &self.svg {
            let _ = writeln!(s, "svg = {}", p.display());
        }
        s
    }
}
