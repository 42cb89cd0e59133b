//! End-to-end checks. Each `run_*` function returns an [`ExperimentReport`]
//! whose residual rows carry their own tolerance; a report passes iff every
//! row does.

mod analytic;
mod matrix;

pub use analytic::{
    quadratic_cauchy, default_r_grid, interior_grid, run_convolution_check, run_inverse_check, run_quadratic_a_check,
    run_regression_check, MAX_QUADRATIC_ORDER, MAX_REGRESSION_ORDER,
};
pub use matrix::{run_matrix_my, MatrixMyConfig};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distributions::FreeGigParams;
use crate::{Error, Result};

/// How a residual row is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value| ≤ tolerance`.
    AbsAtMost,
    /// `value > tolerance`.
    GreaterThan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

/// A numeric table emitted as CSV by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Samples with a reference density curve, rendered as an SVG histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub name: String,
    pub samples: Vec<f64>,
    /// `(x, density)` points of the overlay curve.
    pub overlay: Vec<(f64, f64)>,
}

/// Whether pass/fail criteria apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Strict,
    /// Parameter regimes outside the proven range (λ ≤ 1): rows are computed
    /// and reported but never fail the run.
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: BTreeMap<String, f64>,
    pub mode: RunMode,
    pub seed: Option<u64>,
    pub residuals: Vec<ResidualRow>,
    pub notes: Vec<String>,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub histograms: Vec<Histogram>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, mode: RunMode) -> Self {
        Self {
            experiment: experiment.to_string(),
            parameters: BTreeMap::new(),
            mode,
            seed: None,
            residuals: Vec::new(),
            notes: Vec::new(),
            wall_clock_seconds: 0.0,
            tables: Vec::new(),
            histograms: Vec::new(),
            started: Some(Instant::now()),
        }
    }

    pub fn param(&mut self, name: &str, value: f64) -> &mut Self {
        self.parameters.insert(name.to_string(), value);
        self
    }

    pub fn gig_params(&mut self, p: &FreeGigParams) -> &mut Self {
        self.param("lambda", p.lambda).param("alpha", p.alpha).param("beta", p.beta)
    }

    /// Records `|value| ≤ tolerance`; NaN fails.
    pub fn check(&mut self, name: &str, value: f64, tolerance: f64) -> bool {
        self.push_row(name, value, tolerance, Relation::AbsAtMost)
    }

    /// Records `value > threshold`.
    pub fn check_greater(&mut self, name: &str, value: f64, threshold: f64) -> bool {
        self.push_row(name, value, threshold, Relation::GreaterThan)
    }

    fn push_row(&mut self, name: &str, value: f64, tolerance: f64, relation: Relation) -> bool {
        let pass = match relation {
            Relation::AbsAtMost => value.abs() <= tolerance,
            Relation::GreaterThan => value > tolerance,
        };
        self.residuals.push(ResidualRow {
            check: name.to_string(),
            value,
            tolerance,
            relation,
            pass,
        });
        pass
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn row(&self, name: &str) -> Option<&ResidualRow> {
        self.residuals.iter().find(|r| r.check == name)
    }

    pub fn all_rows_pass(&self) -> bool {
        self.residuals.iter().all(|r| r.pass)
    }

    /// Exploratory runs have no pass criterion.
    pub fn passed(&self) -> bool {
        self.mode == RunMode::Exploratory || self.all_rows_pass()
    }

    pub fn finish(mut self) -> Self {
        if let Some(t) = self.started.take() {
            self.wall_clock_seconds = t.elapsed().as_secs_f64();
        }
        self
    }
}

/// `c = λ/β`, `d = β/(λ−1)`, `δ₀ = α/(λ−1)`, `α₋₁ = −γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionConstants {
    pub c: f64,
    pub d: f64,
    pub delta0: f64,
    pub alpha_m1: f64,
}

impl RegressionConstants {
    pub fn from_params(p: &FreeGigParams, gamma: f64) -> Result<Self> {
        require_lambda_above_one(p)?;
        Ok(Self {
            c: p.lambda / p.beta,
            d: p.beta / (p.lambda - 1.0),
            delta0: p.alpha / (p.lambda - 1.0),
            alpha_m1: -gamma,
        })
    }

    pub fn cd(&self) -> f64 {
        self.c * self.d
    }
}

/// `λ = cd/(cd−1)`, `α = δ₀/(cd−1)`, `β = d/(cd−1)`.
pub fn characterization_params(c: f64, d: f64, delta0: f64) -> Result<FreeGigParams> {
    let cd = c * d;
    if !(cd > 1.0) || !cd.is_finite() {
        return Err(Error::Domain(format!("characterization needs cd > 1, got cd = {cd}")));
    }
    if !(delta0 > 0.0) || !(d > 0.0) {
        return Err(Error::Domain(format!("characterization needs d, δ₀ > 0, got d = {d}, δ₀ = {delta0}")));
    }
    let k = cd - 1.0;
    FreeGigParams::new(cd / k, delta0 / k, d / k)
}

pub(crate) fn require_lambda_above_one(p: &FreeGigParams) -> Result<()> {
    if !(p.lambda > 1.0) {
        return Err(Error::Parameter(format!("this experiment requires lambda > 1, got {}", p.lambda)));
    }
    Ok(())
}

pub(crate) fn require_mode(p: &FreeGigParams, mode: RunMode) -> Result<()> {
    match mode {
        RunMode::Strict => require_lambda_above_one(p),
        RunMode::Exploratory if p.lambda > 0.0 => Ok(()),
        RunMode::Exploratory => Err(Error::Parameter(format!(
            "exploratory runs need lambda > 0, got {}",
            p.lambda
        ))),
    }
}
