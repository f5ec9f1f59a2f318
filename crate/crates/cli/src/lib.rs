//! `magnon` command-line front end.

pub mod config;

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use magnon::bilayer::{embedded_state, embedding_check, hybridize};
use magnon::curve::{curve_to_fig5, Fig5Settings, TrackSettings};
use magnon::defect::{construct_defect, rotation_asymmetry};
use magnon::lattice::neighbors;
use magnon::spectral::{band_structure, butterfly, nearest_farey};
use magnon::svg::{render_svg, Plot, SvgStyle};
use magnon::{io as csv, Flux, MagneticHamiltonian, Region, Site, SolverConfig};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] magnon::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "magnon",
    version,
    about = "Magnetic graphene spectra, defect bound states and embedded eigenvalues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Plain-text `key = value` configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Band intervals for every reduced p/q in [0, 1] with q <= qmax.
    Butterfly {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        qmax: Option<i64>,
        /// Points per k-direction.
        #[arg(long)]
        kgrid: Option<usize>,
        /// Also write an SVG of the band intervals.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Magnetic Bloch bands at one rational flux.
    Bands {
        #[command(flatten)]
        common: Common,
        /// Rational flux `p/q` (alpha = phi / 2 pi).
        #[arg(long)]
        flux: Option<String>,
        #[arg(long)]
        kgrid: Option<usize>,
        /// Raw Bloch eigenvalues per k-point.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Single-layer two-site defect binding a state at E0.
    Defect {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        site: SiteArgs,
    },
    /// Defect energy tracked across the flux, overlaid on the shifted butterflies.
    Curve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        site: SiteArgs,
        #[arg(long)]
        phi_start: Option<f64>,
        #[arg(long)]
        phi_end: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        qmax: Option<i64>,
        #[arg(long)]
        kgrid: Option<usize>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Bilayer bound state in hybrid channel 1 and its embedding in channel 2.
    Embedded {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        site: SiteArgs,
        #[arg(long)]
        qmax: Option<i64>,
        #[arg(long)]
        kgrid: Option<usize>,
    },
    /// Runs the invariant suite.
    Verify,
}

#[derive(Debug, Args)]
struct SiteArgs {
    /// `p/q` or a real angle phi.
    #[arg(long)]
    flux: Option<String>,
    #[arg(long = "e0", allow_hyphen_values = true)]
    e0: Option<f64>,
    /// Graph radius of the ball region around the defect.
    #[arg(long)]
    radius: Option<usize>,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn apply_site(cfg: &mut RunConfig, s: &SiteArgs) -> Result<(), CliError> {
    if let Some(f) = &s.flux {
        cfg.flux = config::parse_flux(f)?;
    }
    if let Some(e) = s.e0 {
        cfg.e0 = e;
    }
    if let Some(r) = s.radius {
        cfg.set("radius", &r.to_string())?;
    }
    Ok(())
}

fn set_opt<T: ToString>(cfg: &mut RunConfig, key: &str, v: &Option<T>) -> Result<(), CliError> {
    match v {
        Some(v) => cfg.set(key, &v.to_string()),
        None => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn solver(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        tol: cfg.tol,
        truncation_tol: cfg.truncation_tol,
        ..SolverConfig::default()
    }
}

fn defect_sites(cfg: &RunConfig) -> (Site, Site) {
    let v = Site::a(cfg.v.0, cfg.v.1);
    (v, neighbors(v)[cfg.w].site)
}

fn rational_for(flux: Flux, qmax: i64) -> (i64, i64) {
    flux.as_rational()
        .unwrap_or_else(|| nearest_farey((flux.angle() / TAU).rem_euclid(1.0), qmax))
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code. Reports go to `stdout`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let mut report = Vec::new();
    let result = pool.install(|| execute(cli.command, &mut report));
    let _ = stdout.write_all(&report).and_then(|_| stdout.flush());
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Worker pool sized by `MAGNON_THREADS` (unset or 0: one per core).
fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let n = match std::env::var("MAGNON_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse::<usize>().map_err(|_| {
            CliError::Usage(format!(
                "MAGNON_THREADS must be a non-negative integer, got `{v}`"
            ))
        })?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

fn execute(cmd: Command, out: &mut Vec<u8>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    match cmd {
        Command::Butterfly {
            common,
            qmax,
            kgrid,
            svg,
        } => {
            let mut cfg = load(&common)?;
            set_opt(&mut cfg, "qmax", &qmax)?;
            set_opt(&mut cfg, "kgrid", &kgrid)?;
            if svg.is_some() {
                cfg.svg = svg;
            }
            let data = butterfly(cfg.qmax, cfg.kgrid, cfg.kgrid)?;
            let path = cfg
                .out
                .clone()
                .ok_or_else(|| CliError::Usage("butterfly needs --out".into()))?;
            write_with(&path, |w| csv::write_butterfly_csv(&data, w))?;
            if let Some(p) = &cfg.svg {
                let doc = render_svg(&Plot::Butterfly(&data), &SvgStyle::default())?;
                write_with(p, |w| w.write_all(doc.as_bytes()))?;
            }
            writeln!(out, "fluxes: {}", data.len()).map_err(io)?;
            writeln!(
                out,
                "bands: {}",
                data.iter().map(|d| d.bands.len()).sum::<usize>()
            )
            .map_err(io)?;
        }
        Command::Bands {
            common,
            flux,
            kgrid,
            samples,
        } => {
            let mut cfg = load(&common)?;
            if let Some(f) = flux {
                cfg.flux = config::parse_flux(&f)?;
            }
            set_opt(&mut cfg, "kgrid", &kgrid)?;
            if cfg.flux.as_rational().is_none() {
                return Err(CliError::Usage("bands needs a rational flux p/q".into()));
            }
            let data = band_structure(cfg.flux, cfg.kgrid, cfg.kgrid)?;
            for (b, iv) in data.bands.iter().enumerate() {
                writeln!(
                    out,
                    "band {b}: [{}, {}]",
                    csv::fmt_f64(iv.emin),
                    csv::fmt_f64(iv.emax)
                )
                .map_err(io)?;
            }
            if let Some(p) = &cfg.out {
                write_with(p, |w| {
                    csv::write_butterfly_csv(std::slice::from_ref(&data), w)
                })?;
            }
            if let Some(p) = &samples {
                write_with(p, |w| csv::write_band_samples_csv(&data, w))?;
            }
        }
        Command::Defect { common, site } => {
            let mut cfg = load(&common)?;
            apply_site(&mut cfg, &site)?;
            let (v, w) = defect_sites(&cfg);
            let h = MagneticHamiltonian::new(cfg.flux, Arc::new(Region::ball(v, cfg.radius)?));
            let c = construct_defect(&h, cfg.e0, v, w, &solver(&cfg))?;
            let vt = c.spec.vtilde;
            writeln!(out, "v: {v}\nw: {w}\nenergy: {}", csv::fmt_f64(cfg.e0)).map_err(io)?;
            for (i, row) in vt.iter().enumerate() {
                let z =
                    |c: magnon::C64| format!("({}, {})", csv::fmt_f64(c.re), csv::fmt_f64(c.im));
                writeln!(out, "vtilde[{i}]: {} {}", z(row[0]), z(row[1])).map_err(io)?;
            }
            writeln!(out, "residual: {:.3e}", c.bound.residual).map_err(io)?;
            writeln!(out, "gamma: {:.6}", c.bound.decay.gamma).map_err(io)?;
            writeln!(
                out,
                "orbit_spread: {:.3e}",
                rotation_asymmetry(&c.response, v)?
            )
            .map_err(io)?;
            if let Some(p) = &cfg.out {
                write_with(p, |w| csv::write_state_csv(&c.bound.state, w))?;
            }
        }
        Command::Curve {
            common,
            site,
            phi_start,
            phi_end,
            steps,
            qmax,
            kgrid,
            svg,
        } => {
            let mut cfg = load(&common)?;
            apply_site(&mut cfg, &site)?;
            set_opt(&mut cfg, "phi_start", &phi_start)?;
            set_opt(&mut cfg, "phi_end", &phi_end)?;
            set_opt(&mut cfg, "steps", &steps)?;
            set_opt(&mut cfg, "qmax", &qmax)?;
            set_opt(&mut cfg, "kgrid", &kgrid)?;
            if svg.is_some() {
                cfg.svg = svg;
            }
            let pair = hybridize(cfg.k, cfg.m)?;
            let (v, w) = defect_sites(&cfg);
            let region = Arc::new(Region::ball(v, cfg.radius)?);
            let solve = solver(&cfg);
            let h = MagneticHamiltonian::new(Flux::Real(cfg.phi_start), region.clone());
            let spec = construct_defect(&h, cfg.e0 - pair.kappa[0], v, w, &solve)?.spec;
            let track = TrackSettings {
                margin: cfg.margin,
                ..TrackSettings::default()
            };
            let fig = Fig5Settings {
                qmax: cfg.qmax,
                kgrid: cfg.kgrid,
                fatten: cfg.fatten,
            };
            let report = curve_to_fig5(
                &pair,
                &spec,
                (cfg.phi_start, cfg.phi_end),
                cfg.steps,
                cfg.e0,
                region,
                &solve,
                &track,
                &fig,
            )?;
            let c = &report.curve;
            writeln!(out, "samples: {}", c.samples.len()).map_err(io)?;
            writeln!(out, "embedded: {}", report.embedded_count).map_err(io)?;
            writeln!(out, "max_state_residual: {:.3e}", c.max_state_residual()).map_err(io)?;
            writeln!(
                out,
                "max_secular_residual: {:.3e}",
                c.max_secular_residual()
            )
            .map_err(io)?;
            writeln!(out, "min_decay_margin: {:.6}", c.decay_margin()).map_err(io)?;
            if let Some(p) = &cfg.out {
                write_with(p, |w| csv::write_curve_csv(c, w))?;
            }
            if let Some(p) = &cfg.svg {
                let plot = Plot::Overlay {
                    butterfly: &report.butterfly,
                    kappa: pair.kappa,
                    curve: c,
                };
                let doc = render_svg(&plot, &SvgStyle::default())?;
                write_with(p, |w| w.write_all(doc.as_bytes()))?;
            }
        }
        Command::Embedded {
            common,
            site,
            qmax,
            kgrid,
        } => {
            let mut cfg = load(&common)?;
            apply_site(&mut cfg, &site)?;
            set_opt(&mut cfg, "qmax", &qmax)?;
            set_opt(&mut cfg, "kgrid", &kgrid)?;
            let pair = hybridize(cfg.k, cfg.m)?;
            let (v, w) = defect_sites(&cfg);
            let h = MagneticHamiltonian::new(cfg.flux, Arc::new(Region::ball(v, cfg.radius)?));
            let s = embedded_state(&pair, &h, cfg.e0, v, w, cfg.margin, &solver(&cfg))?;
            let (p, q) = rational_for(cfg.flux, cfg.qmax);
            let bands = band_structure(Flux::rational(p, q)?, cfg.kgrid, cfg.kgrid)?;
            let rep = embedding_check(cfg.e0, &bands, pair.kappa, cfg.fatten);
            writeln!(
                out,
                "kappa: {:.12} {:.12}\nmu: {:.12} {:.12}",
                pair.kappa[0], pair.kappa[1], pair.mu[0], pair.mu[1]
            )
            .map_err(io)?;
            writeln!(out, "residual: {:.3e}", s.residual).map_err(io)?;
            writeln!(out, "gamma: {:.6}", s.decay.gamma).map_err(io)?;
            writeln!(out, "bands_at: {p}/{q}").map_err(io)?;
            for (i, ch) in rep.channels.iter().enumerate() {
                writeln!(
                    out,
                    "channel {}: E - kappa = {:.6}, inside = {}, edge_distance = {:.6}",
                    i + 1,
                    ch.shifted,
                    ch.inside,
                    ch.edge_distance
                )
                .map_err(io)?;
            }
            writeln!(out, "embedded: {}", rep.embedded()).map_err(io)?;
            if let Some(p) = &cfg.out {
                write_with(p, |w| csv::write_bilayer_csv(&s.state, w))?;
            }
        }
        Command::Verify => {
            let checks = magnon::verify::run_all();
            for c in &checks {
                writeln!(
                    out,
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )
                .map_err(io)?;
            }
            let failed: Vec<&str> = checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name)
                .collect();
            if !failed.is_empty() {
                return Err(CliError::Verification(failed.join(", ")));
            }
        }
    }
    Ok(())
}
