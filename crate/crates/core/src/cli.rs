//! Configuration, dispatch and artifact emission for the `freegig` binary.
//!
//! A run writes into its output directory:
//!
//! - `report.json`: the [`ExperimentReport`];
//! - `residuals.csv`: `check,value,tolerance,pass`;
//! - one CSV per report table and, for each histogram, `<name>_esd.csv`
//!   (`eigenvalue`) plus `<name>.svg`;
//! - `error.json` instead, when the run aborts.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so reruns with the
//! same configuration give byte-identical CSVs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    catalan, commutative_word_moment, cumulants_from_moments, enumerate_nc, mixed_cumulant_oracle,
    mixed_inverse_cumulants, moments_from_cumulants, CumulantSequence, MomentSequence,
};
use crate::distributions::{solve_support, FreeGig, FreeGigParams, MarchenkoPastur, MarchenkoPasturParams};
use crate::experiments::{
    default_r_grid, interior_grid, run_convolution_check, run_inverse_check, run_matrix_my, run_quadratic_a_check,
    run_regression_check, ExperimentReport, Histogram, MatrixMyConfig, RunMode, Table, MAX_QUADRATIC_ORDER,
    MAX_REGRESSION_ORDER,
};
use crate::transforms::{stieltjes_invert, AnalyticFunction, Domain};
use crate::{Error, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

pub const SUPPORT_GRID_LAMBDA: [f64; 5] = [-3.0, -1.0, 0.0, 2.0, 4.0];
pub const SUPPORT_GRID_SCALE: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

const SUPPORT_TOL: f64 = 1e-10;
const MASS_TOL: f64 = 1e-8;
const STIELTJES_TOL: f64 = 1e-5;
const TRANSFORM_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-12;
const SERIES_TOL: f64 = 1e-8;
const ORACLE_TOL: f64 = 1e-10;
const ORACLE_ORDER: usize = 6;
const CATALAN_MAX: usize = 12;
const MAX_SERIES_ORDER: usize = 32;
const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Support,
    Density,
    Moments,
    Cumulants,
    Convolve,
    Inverse,
    Regression,
    My,
    Quadratic,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Support => "support",
            Self::Density => "density",
            Self::Moments => "moments",
            Self::Cumulants => "cumulants",
            Self::Convolve => "convolve",
            Self::Inverse => "inverse",
            Self::Regression => "regression",
            Self::My => "my",
            Self::Quadratic => "quadratic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    #[default]
    Fgig,
    Mp,
}

/// Settings shared by every subcommand; each may also come from `--config`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Law for `density`, `moments` and `cumulants`.
    #[arg(long, value_enum)]
    pub law: Option<LawKind>,
    /// Marchenko–Pastur rate.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Marchenko–Pastur jump.
    #[arg(long)]
    pub jump: Option<f64>,
    /// Matrix dimension.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Series or moment order.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_hi: Option<f64>,
    /// Smaller dimension for the KS trend check of `my`.
    #[arg(long)]
    pub trend_n: Option<usize>,
    /// Allow `convolve` and `my` with λ ∈ (0, 1]; nothing is asserted.
    #[arg(long)]
    #[serde(default)]
    pub exploratory: bool,
}

impl Settings {
    /// `self` wins over `file`.
    fn over(self, file: Settings) -> Settings {
        Settings {
            out: self.out.or(file.out),
            lambda: self.lambda.or(file.lambda),
            alpha: self.alpha.or(file.alpha),
            beta: self.beta.or(file.beta),
            law: self.law.or(file.law),
            rate: self.rate.or(file.rate),
            jump: self.jump.or(file.jump),
            n: self.n.or(file.n),
            reps: self.reps.or(file.reps),
            order: self.order.or(file.order),
            seed: self.seed.or(file.seed),
            grid_points: self.grid_points.or(file.grid_points),
            grid_lo: self.grid_lo.or(file.grid_lo),
            grid_hi: self.grid_hi.or(file.grid_hi),
            trend_n: self.trend_n.or(file.trend_n),
            exploratory: self.exploratory || file.exploratory,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Invocation {
    /// Flat TOML file of settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Support endpoints (single law, or the 125-point grid when no parameters are given).
    Support(Invocation),
    /// Density on a grid, total mass and Stieltjes inversion.
    Density(Invocation),
    /// Moments and the moment/cumulant round trip.
    Moments(Invocation),
    /// Free cumulants, Cauchy/R consistency and combinatorial oracles.
    Cumulants(Invocation),
    /// fGIG ⊞ Marchenko–Pastur convolution identity.
    Convolve(Invocation),
    /// Inversion identity by change of variables.
    Inverse(Invocation),
    /// Moment identities of the regression characterization.
    Regression(Invocation),
    /// Random-matrix Matsumoto–Yor experiment.
    My(Invocation),
    /// Quadratic equation for the moment series.
    Quadratic(Invocation),
}

#[derive(Debug, Parser)]
#[command(name = "freegig", version, about = "Free GIG / Marchenko–Pastur numerics and Matsumoto–Yor checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LawSpec {
    FreeGig(FreeGigParams),
    MarchenkoPastur(MarchenkoPasturParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub points: usize,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

/// A validated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// `None` only for the `support` grid sweep.
    pub law: Option<LawSpec>,
    pub n: usize,
    pub reps: usize,
    pub order: Option<usize>,
    pub grid: GridSpec,
    pub seed: Option<u64>,
    pub trend_n: Option<usize>,
    pub mode: RunMode,
    pub out: PathBuf,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Reads a flat TOML file; unknown and duplicate keys are errors.
pub fn read_config_file(path: &Path) -> Result<Settings> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn from_parts(experiment: Experiment, settings: Settings) -> Result<Self> {
        let s = settings;
        let mode = if s.exploratory { RunMode::Exploratory } else { RunMode::Strict };
        if s.exploratory && !matches!(experiment, Experiment::Convolve | Experiment::My) {
            return Err(config_error(format!("--exploratory applies to convolve and my, not {}", experiment.name())));
        }
        let gig = match (s.lambda, s.alpha, s.beta) {
            (Some(l), Some(a), Some(b)) => Some(FreeGigParams::new(l, a, b)?),
            (None, None, None) => None,
            _ => return Err(config_error("lambda, alpha and beta must be given together")),
        };
        let mp = match (s.rate, s.jump) {
            (Some(r), Some(j)) => Some(MarchenkoPasturParams::new(r, j)?),
            (None, None) => None,
            _ => return Err(config_error("rate and jump must be given together")),
        };
        let need_gig = || gig.ok_or_else(|| config_error(format!("{} needs lambda, alpha and beta", experiment.name())));
        let need_strict = |p: &FreeGigParams| {
            if p.lambda > 1.0 || (mode == RunMode::Exploratory && p.lambda > 0.0) {
                Ok(())
            } else {
                Err(config_error(format!(
                    "{} requires lambda > 1, got lambda = {}{}",
                    experiment.name(),
                    p.lambda,
                    if matches!(experiment, Experiment::Convolve | Experiment::My) {
                        " (use --exploratory for lambda in (0, 1])"
                    } else {
                        ""
                    }
                )))
            }
        };

        let law = match experiment {
            Experiment::Support => {
                if s.law == Some(LawKind::Mp) {
                    return Err(config_error("support applies to the fGIG law"));
                }
                gig.map(LawSpec::FreeGig)
            }
            Experiment::Density | Experiment::Moments | Experiment::Cumulants => match s.law.unwrap_or_default() {
                LawKind::Fgig => Some(LawSpec::FreeGig(need_gig()?)),
                LawKind::Mp => Some(LawSpec::MarchenkoPastur(
                    mp.ok_or_else(|| config_error(format!("{} --law mp needs rate and jump", experiment.name())))?,
                )),
            },
            Experiment::Inverse => Some(LawSpec::FreeGig(need_gig()?)),
            Experiment::Convolve | Experiment::Regression | Experiment::Quadratic | Experiment::My => {
                let p = need_gig()?;
                need_strict(&p)?;
                Some(LawSpec::FreeGig(p))
            }
        };

        let order = match experiment {
            Experiment::Regression => Some(s.order.unwrap_or(MAX_REGRESSION_ORDER)),
            Experiment::Quadratic => Some(s.order.unwrap_or(MAX_QUADRATIC_ORDER)),
            Experiment::Moments | Experiment::Cumulants => Some(s.order.unwrap_or(8)),
            _ => s.order,
        };
        let cap = match experiment {
            Experiment::Regression => MAX_REGRESSION_ORDER,
            Experiment::Quadratic => MAX_QUADRATIC_ORDER,
            _ => MAX_SERIES_ORDER,
        };
        if let Some(o) = order {
            if o == 0 || o > cap {
                return Err(config_error(format!("{} order must be in 1..={cap}, got {o}", experiment.name())));
            }
        }

        let n = s.n.unwrap_or(256);
        let reps = s.reps.unwrap_or(20);
        if experiment == Experiment::My {
            if s.seed.is_none() {
                return Err(config_error("my needs an explicit --seed"));
            }
            if n == 0 || reps == 0 {
                return Err(config_error("my needs n >= 1 and reps >= 1"));
            }
            if let Some(t) = s.trend_n {
                if t == 0 || t >= n {
                    return Err(config_error(format!("trend_n must be in 1..n, got {t} with n = {n}")));
                }
            }
        }
        let grid = GridSpec {
            points: s.grid_points.unwrap_or(200),
            lo: s.grid_lo,
            hi: s.grid_hi,
        };
        if grid.points == 0 {
            return Err(config_error("grid_points must be >= 1"));
        }
        if let (Some(lo), Some(hi)) = (grid.lo, grid.hi) {
            if !(lo < hi) {
                return Err(config_error(format!("grid_lo must be < grid_hi, got {lo} and {hi}")));
            }
        }
        Ok(Self {
            experiment,
            law,
            n,
            reps,
            order,
            grid,
            seed: s.seed,
            trend_n: s.trend_n,
            mode,
            out: s.out.unwrap_or_else(|| PathBuf::from("freegig-out")),
        })
    }

    fn gig(&self) -> Result<FreeGigParams> {
        match self.law {
            Some(LawSpec::FreeGig(p)) => Ok(p),
            _ => Err(config_error(format!("{} needs fGIG parameters", self.experiment.name()))),
        }
    }
}

/// Parses flags (with `argv[0]`) and the optional config file.
pub fn parse_config<I, T>(args: I) -> std::result::Result<RunConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(ParseOutcome::Clap)?;
    let (experiment, inv) = match cli.command {
        Command::Support(i) => (Experiment::Support, i),
        Command::Density(i) => (Experiment::Density, i),
        Command::Moments(i) => (Experiment::Moments, i),
        Command::Cumulants(i) => (Experiment::Cumulants, i),
        Command::Convolve(i) => (Experiment::Convolve, i),
        Command::Inverse(i) => (Experiment::Inverse, i),
        Command::Regression(i) => (Experiment::Regression, i),
        Command::My(i) => (Experiment::My, i),
        Command::Quadratic(i) => (Experiment::Quadratic, i),
    };
    let file = match &inv.config {
        Some(path) => read_config_file(path).map_err(ParseOutcome::Invalid)?,
        None => Settings::default(),
    };
    RunConfig::from_parts(experiment, inv.settings.over(file)).map_err(ParseOutcome::Invalid)
}

#[derive(Debug)]
pub enum ParseOutcome {
    /// Includes `--help` and `--version`.
    Clap(clap::Error),
    Invalid(Error),
}

// ---------------------------------------------------------------------------
// Reports for the operation-level subcommands.

fn support_report(law: Option<LawSpec>) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("support", RunMode::Strict);
    let mut table = Table::new("support", &["lambda", "alpha", "beta", "a", "b", "residual1", "residual2"]);
    let params: Vec<FreeGigParams> = match law {
        Some(LawSpec::FreeGig(p)) => {
            report.gig_params(&p);
            vec![p]
        }
        _ => {
            let mut v = Vec::new();
            for &l in &SUPPORT_GRID_LAMBDA {
                for &a in &SUPPORT_GRID_SCALE {
                    for &b in &SUPPORT_GRID_SCALE {
                        v.push(FreeGigParams::new(l, a, b)?);
                    }
                }
            }
            v
        }
    };
    let (mut r1, mut r2) = (0.0f64, 0.0f64);
    for p in &params {
        let s = solve_support(p)?;
        r1 = r1.max(s.residual1.abs());
        r2 = r2.max(s.residual2.abs());
        table.push(vec![p.lambda, p.alpha, p.beta, s.a, s.b, s.residual1, s.residual2]);
    }
    report.param("laws", params.len() as f64);
    report.check("max_residual1", r1, SUPPORT_TOL);
    report.check("max_residual2", r2, SUPPORT_TOL);
    report.tables.push(table);
    Ok(report.finish())
}

fn law_name(report: &mut ExperimentReport, law: LawSpec) {
    match law {
        LawSpec::FreeGig(p) => {
            report.gig_params(&p);
        }
        LawSpec::MarchenkoPastur(q) => {
            report.param("rate", q.rate).param("jump", q.jump);
        }
    }
}

fn density_report(law: LawSpec, grid: &GridSpec) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("density", RunMode::Strict);
    law_name(&mut report, law);
    let mut table = Table::new("density", &["x", "value"]);
    match law {
        LawSpec::FreeGig(p) => {
            let f = FreeGig::new(p)?;
            let s = *f.support();
            report.param("support_a", s.a).param("support_b", s.b);
            let xs = interior_grid(grid.lo.unwrap_or(s.a), grid.hi.unwrap_or(s.b), grid.points);
            for &x in &xs {
                table.push(vec![x, f.density(x)]);
            }
            report.check("total_mass", f.moment(0)? - 1.0, MASS_TOL);
            // Middle half of the support, away from the square-root edges.
            let mid = interior_grid(s.a + 0.25 * (s.b - s.a), s.b - 0.25 * (s.b - s.a), 20);
            let law = f.clone();
            let g = AnalyticFunction::new(Domain::UpperHalfPlane, move |z| law.cauchy(z));
            let est = stieltjes_invert(&g, &mid)?;
            let err = est
                .grid
                .iter()
                .zip(&est.values)
                .map(|(&x, &v)| (v - f.density(x)).abs())
                .fold(0.0, f64::max);
            report.check("stieltjes_mid_support", err, STIELTJES_TOL);
        }
        LawSpec::MarchenkoPastur(q) => {
            let m = MarchenkoPastur::new(q);
            let (a, b) = q.edges();
            report.param("support_a", a).param("support_b", b).param("atom", q.atom());
            let xs = interior_grid(grid.lo.unwrap_or(a), grid.hi.unwrap_or(b), grid.points);
            for &x in &xs {
                table.push(vec![x, m.density(x).0]);
            }
            report.check("total_mass", m.moment(0)? - 1.0, MASS_TOL);
        }
    }
    report.tables.push(table);
    Ok(report.finish())
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b) / a.abs().max(b.abs()).max(1.0)
}

fn max_relative(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| relative(x, y).abs()).fold(0.0, f64::max)
}

fn moments_report(law: LawSpec, order: usize) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("moments", RunMode::Strict);
    law_name(&mut report, law);
    report.param("order", order as f64);
    let (moments, cumulants, inverse_mean): (MomentSequence, CumulantSequence, Option<f64>) = match law {
        LawSpec::FreeGig(p) => {
            let f = FreeGig::new(p)?;
            (f.moments(order)?, f.r_series(order)?, Some(f.moment(-1)?))
        }
        LawSpec::MarchenkoPastur(q) => {
            let m = MarchenkoPastur::new(q);
            let inv = if q.rate > 1.0 { Some(m.moment(-1)?) } else { None };
            (m.moments(order)?, m.cumulants(order)?, inv)
        }
    };
    let from_r = moments_from_cumulants(&cumulants, order)?;
    report.check("quadrature_vs_cumulant_moments", max_relative(moments.as_slice(), from_r.as_slice()), SERIES_TOL);
    let back = moments_from_cumulants(&cumulants_from_moments(&moments, order)?, order)?;
    report.check("moment_cumulant_round_trip", max_relative(moments.as_slice(), back.as_slice()), ROUND_TRIP_TOL);
    let mut table = Table::new("moments", &["k", "value"]);
    if let Some(v) = inverse_mean {
        table.push(vec![-1.0, v]);
    }
    for k in 0..=order {
        table.push(vec![k as f64, moments.get(k)]);
    }
    report.tables.push(table);
    Ok(report.finish())
}

enum Law {
    Gig(FreeGig),
    Mp(MarchenkoPastur),
}

impl Law {
    fn new(spec: LawSpec) -> Result<Self> {
        Ok(match spec {
            LawSpec::FreeGig(p) => Self::Gig(FreeGig::new(p)?),
            LawSpec::MarchenkoPastur(q) => Self::Mp(MarchenkoPastur::new(q)),
        })
    }

    fn rtransform(&self, w: Complex64) -> Result<Complex64> {
        match self {
            Self::Gig(f) => f.rtransform(w),
            Self::Mp(m) => m.rtransform(w),
        }
    }

    fn cauchy(&self, z: Complex64) -> Result<Complex64> {
        match self {
            Self::Gig(f) => f.cauchy(z),
            Self::Mp(m) => m.cauchy(z),
        }
    }

    fn moment(&self, k: i32) -> Result<f64> {
        match self {
            Self::Gig(f) => f.moment(k),
            Self::Mp(m) => m.moment(k),
        }
    }

    fn r_radius(&self) -> Result<f64> {
        match self {
            Self::Gig(f) => f.r_radius(),
            Self::Mp(m) => Ok(0.9 / m.params().jump),
        }
    }

    fn cumulants(&self, order: usize) -> Result<CumulantSequence> {
        match self {
            Self::Gig(f) => f.r_series(order),
            Self::Mp(m) => m.cumulants(order),
        }
    }

    /// `None` where `φ(x⁻¹)` diverges.
    fn inverse_mean(&self) -> Result<Option<f64>> {
        match self {
            Self::Gig(f) => f.moment(-1).map(Some),
            Self::Mp(m) if m.params().rate > 1.0 => m.inverse_mean().map(Some),
            Self::Mp(_) => Ok(None),
        }
    }
}

fn cumulants_report(law: LawSpec, order: usize) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("cumulants", RunMode::Strict);
    law_name(&mut report, law);
    report.param("order", order as f64);
    let law = Law::new(law)?;
    let radius = law.r_radius()?;
    let cumulants = law.cumulants(order.max(ORACLE_ORDER))?;
    let inv_mean = law.inverse_mean()?;
    let (r, g, power) = (|w| law.rtransform(w), |z| law.cauchy(z), |k| law.moment(k));

    // G(r(w) + 1/w) = w on a small circle, and r(G(z)) + 1/G(z) = z far out.
    let ring = 0.05f64.min(0.5 * radius);
    let mut g_of_r = 0.0f64;
    let mut r_of_g = 0.0f64;
    for k in 0..16 {
        let w = Complex64::from_polar(ring, std::f64::consts::PI * (2 * k + 1) as f64 / 16.0);
        g_of_r = g_of_r.max((g(r(w)? + 1.0 / w)? - w).norm());
        let big = 2.0 / radius + power(1)?.abs() + 4.0;
        let z = Complex64::from_polar(big, std::f64::consts::PI * (k as f64 + 0.5) / 16.0);
        let gz = g(z)?;
        r_of_g = r_of_g.max((r(gz)? + 1.0 / gz - z).norm());
    }
    report.param("ring_radius", ring);
    report.check("g_of_r_plus_inverse", g_of_r, TRANSFORM_TOL);
    report.check("r_of_g_plus_inverse", r_of_g, TRANSFORM_TOL);

    for n in 1..=CATALAN_MAX {
        report.check(&format!("nc_count_minus_catalan_n{n}"), enumerate_nc(n)?.len() as f64 - catalan(n) as f64, 0.0);
    }
    if let Some(c1) = inv_mean {
        let mixed = mixed_inverse_cumulants(c1, &cumulants, ORACLE_ORDER)?;
        let joint = commutative_word_moment(|k| power(k).unwrap_or(f64::NAN));
        let mut worst = 0.0f64;
        for n in 1..=ORACLE_ORDER {
            worst = worst.max((mixed_cumulant_oracle(&joint, n)? - mixed.get(n)).abs());
        }
        report.check("mixed_cumulants_vs_oracle", worst, ORACLE_TOL);
    }
    let mut table = Table::new("cumulants", &["n", "value"]);
    for n in 1..=order {
        table.push(vec![n as f64, cumulants.get(n)]);
    }
    report.tables.push(table);
    Ok(report.finish())
}

/// Runs the configured experiment without writing anything.
pub fn execute(cfg: &RunConfig) -> Result<ExperimentReport> {
    let law = || cfg.law.ok_or_else(|| config_error("missing law"));
    match cfg.experiment {
        Experiment::Support => support_report(cfg.law),
        Experiment::Density => density_report(law()?, &cfg.grid),
        Experiment::Moments => moments_report(law()?, cfg.order.unwrap_or(8)),
        Experiment::Cumulants => cumulants_report(law()?, cfg.order.unwrap_or(8)),
        Experiment::Convolve => run_convolution_check(&cfg.gig()?, &default_r_grid(), cfg.mode),
        Experiment::Inverse => {
            let p = cfg.gig()?;
            match (cfg.grid.lo, cfg.grid.hi) {
                (None, None) => run_inverse_check(&p, None),
                (lo, hi) => {
                    let s = *FreeGig::new(crate::distributions::invert_params(p))?.support();
                    let grid = interior_grid(lo.unwrap_or(s.a), hi.unwrap_or(s.b), cfg.grid.points);
                    run_inverse_check(&p, Some(&grid))
                }
            }
        }
        Experiment::Regression => run_regression_check(&cfg.gig()?, cfg.order.unwrap_or(MAX_REGRESSION_ORDER)),
        Experiment::Quadratic => run_quadratic_a_check(&cfg.gig()?, cfg.order.unwrap_or(MAX_QUADRATIC_ORDER)),
        Experiment::My => run_matrix_my(&MatrixMyConfig {
            params: cfg.gig()?,
            n: cfg.n,
            reps: cfg.reps,
            seed: cfg.seed.ok_or_else(|| config_error("my needs an explicit seed"))?,
            trend_n: cfg.trend_n,
            mode: cfg.mode,
        }),
    }
}

// ---------------------------------------------------------------------------
// Artifacts.

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv<P: AsRef<Path>>(path: P, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Histogram normalized to unit area, with the overlay drawn as a polyline.
pub fn histogram_svg(h: &Histogram) -> String {
    let (w, ht, pad) = (640.0, 400.0, 40.0);
    let lo = h
        .samples
        .iter()
        .chain(h.overlay.iter().map(|p| &p.0))
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = h
        .samples
        .iter()
        .chain(h.overlay.iter().map(|p| &p.0))
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let width = span / HISTOGRAM_BINS as f64;
    let mut counts = [0usize; HISTOGRAM_BINS];
    for &s in &h.samples {
        let i = (((s - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[i] += 1;
    }
    let total = h.samples.len().max(1) as f64;
    let heights: Vec<f64> = counts.iter().map(|&c| c as f64 / (total * width)).collect();
    let top = heights
        .iter()
        .copied()
        .chain(h.overlay.iter().map(|p| p.1))
        .fold(0.0, f64::max)
        .max(1e-300);
    let sx = |x: f64| pad + (x - lo) / span * (w - 2.0 * pad);
    let sy = |y: f64| ht - pad - y / top * (ht - 2.0 * pad);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}">"#);
    let _ = writeln!(svg, r#"<title>{}</title>"#, h.name);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{ht}" fill="white"/>"#);
    for (i, &y) in heights.iter().enumerate() {
        let x0 = sx(lo + i as f64 * width);
        let x1 = sx(lo + (i + 1) as f64 * width);
        let _ = writeln!(
            svg,
            r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>"##,
            x0,
            sy(y),
            x1 - x0,
            sy(0.0) - sy(y)
        );
    }
    if !h.overlay.is_empty() {
        let pts: Vec<String> = h.overlay.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
        let _ = writeln!(svg, r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##, pts.join(" "));
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{pad}" y1="{0:.3}" x2="{1:.3}" y2="{0:.3}" stroke="black"/>"#,
        sy(0.0),
        w - pad
    );
    let _ = writeln!(svg, r#"<text x="{pad}" y="{:.3}" font-size="12">{}</text>"#, ht - 12.0, fmt_f64(lo));
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" font-size="12" text-anchor="end">{}</text>"#,
        w - pad,
        ht - 12.0,
        fmt_f64(hi)
    );
    svg.push_str("</svg>\n");
    svg
}

/// Writes everything except `report.json`; returns the file names written.
fn write_tables(dir: &Path, report: &ExperimentReport, written: &mut Vec<String>) -> Result<()> {
    let header: Vec<String> = ["check", "value", "tolerance", "pass"].iter().map(|s| s.to_string()).collect();
    write_csv(
        dir.join("residuals.csv"),
        &header,
        report
            .residuals
            .iter()
            .map(|r| vec![r.check.clone(), fmt_f64(r.value), fmt_f64(r.tolerance), r.pass.to_string()]),
    )?;
    written.push("residuals.csv".into());
    for t in &report.tables {
        let name = format!("{}.csv", t.name);
        write_csv(dir.join(&name), &t.header, t.rows.iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect()))?;
        written.push(name);
    }
    for h in &report.histograms {
        let name = format!("{}_esd.csv", h.name);
        let mut values = h.samples.clone();
        values.sort_by(f64::total_cmp);
        write_csv(dir.join(&name), &["eigenvalue".to_string()], values.into_iter().map(|v| vec![fmt_f64(v)]))?;
        written.push(name);
        let name = format!("{}.svg", h.name);
        fs::write(dir.join(&name), histogram_svg(h))?;
        written.push(name);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ErrorManifest<'a> {
    experiment: &'a str,
    error: String,
    exit_code: i32,
    artifacts_written: &'a [String],
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    config: &'a RunConfig,
    passed: bool,
    report: &'a ExperimentReport,
}

/// Runs `cfg`, writes its artifacts and returns the exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    run_with(cfg, false)
}

/// As [`run`]; `echo` prints one line per residual row and the notes.
pub fn run_with(cfg: &RunConfig, echo: bool) -> i32 {
    let mut written = Vec::new();
    let result = (|| -> Result<bool> {
        fs::create_dir_all(&cfg.out)?;
        let report = execute(cfg)?;
        write_tables(&cfg.out, &report, &mut written)?;
        let passed = report.passed();
        let json = serde_json::to_string_pretty(&ReportFile {
            config: cfg,
            passed,
            report: &report,
        })
        .map_err(|e| config_error(format!("json: {e}")))?;
        fs::write(cfg.out.join("report.json"), json + "\n")?;
        written.push("report.json".into());
        for r in report.residuals.iter().filter(|_| echo) {
            println!("{} {:<40} {:>24} (tol {})", if r.pass { "PASS" } else { "FAIL" }, r.check, fmt_f64(r.value), fmt_f64(r.tolerance));
        }
        for n in report.notes.iter().filter(|_| echo) {
            println!("note: {n}");
        }
        Ok(passed)
    })();
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            let manifest = ErrorManifest {
                experiment: cfg.experiment.name(),
                error: e.to_string(),
                exit_code: EXIT_ERROR,
                artifacts_written: &written,
            };
            if let Ok(json) = serde_json::to_string_pretty(&manifest) {
                let _ = fs::write(cfg.out.join("error.json"), json + "\n");
            }
            EXIT_ERROR
        }
    }
}

/// Entry point of the binary: parse, run, map to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_config(args) {
        Ok(cfg) => run_with(&cfg, true),
        Err(ParseOutcome::Clap(e)) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = e.print();
            code
        }
        Err(ParseOutcome::Invalid(e)) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
