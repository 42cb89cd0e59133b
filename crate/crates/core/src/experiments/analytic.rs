use num_complex::Complex64;

use super::{characterization_params, require_lambda_above_one, require_mode, ExperimentReport, RegressionConstants, RunMode, Table};
use crate::combinatorics::mixed_inverse_cumulants;
use crate::distributions::{invert_params, FreeGig, FreeGigParams, MarchenkoPastur, MarchenkoPasturParams};
use crate::transforms::{
    cauchy_from_r, free_convolve_r, quadratic_a_solver, quadratic_residuals, series_compose_ac, stieltjes_invert,
    AnalyticFunction, Domain, TruncatedSeries,
};
use crate::{Error, Result};

pub const MAX_REGRESSION_ORDER: usize = 8;
pub const MAX_QUADRATIC_ORDER: usize = 10;

const R_TOL: f64 = 1e-8;
const DENSITY_ROUTE_TOL: f64 = 1e-4;
const INVERSE_TOL: f64 = 1e-8;
const S1_TOL: f64 = 1e-6;
const ANCHOR_TOL: f64 = 1e-8;
const QUADRATIC_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-14;
const QUADRATIC_G_TOL: f64 = 1e-7;
const DENSITY_GRID: usize = 200;

/// `0` plus three circles of radius ≤ 0.05.
pub fn default_r_grid() -> Vec<Complex64> {
    let mut grid = vec![Complex64::new(0.0, 0.0)];
    for radius in [0.01, 0.025, 0.05] {
        for k in 0..16 {
            grid.push(Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / 16.0));
        }
    }
    grid
}

/// Midpoints of `n` equal cells of `[a, b]`.
pub fn interior_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * (i as f64 + 0.5) / n as f64).collect()
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0)
}

fn r_function(law: FreeGig) -> Result<AnalyticFunction> {
    let radius = law.r_radius()?;
    Ok(AnalyticFunction::new(Domain::Disk { radius }, move |w| law.rtransform(w)))
}

fn mp_r_function(law: MarchenkoPastur) -> AnalyticFunction {
    let radius = 0.9 / law.params().jump;
    AnalyticFunction::new(Domain::Disk { radius }, move |w| law.rtransform(w))
}

/// `μ(−λ,α,β) ⊞ MP(rate λ, jump 1/α) = μ(λ,α,β)`, checked on R-transforms and
/// on densities recovered by Stieltjes inversion.
pub fn run_convolution_check(p: &FreeGigParams, r_grid: &[Complex64], mode: RunMode) -> Result<ExperimentReport> {
    require_mode(p, mode)?;
    let mut report = ExperimentReport::new("convolution", mode);
    report.gig_params(p);
    let target = FreeGig::new(*p)?;
    let x_law = FreeGig::new(FreeGigParams::new(-p.lambda, p.alpha, p.beta)?)?;
    let y_law = MarchenkoPastur::new(MarchenkoPasturParams::new(p.lambda, 1.0 / p.alpha)?);
    let sum = free_convolve_r(&r_function(x_law.clone())?, &mp_r_function(y_law))?;

    let mut r_residual = 0.0f64;
    for &w in r_grid {
        let lhs = sum.eval(w)?;
        let rhs = target.rtransform(w)?;
        r_residual = r_residual.max((lhs - rhs).norm());
    }
    let radius = target.r_radius()?;
    if r_grid.iter().any(|w| w.norm() > radius) {
        report.note(format!("r-grid extends past the declared analyticity radius {radius:.6}"));
    }
    report.check("r_transform_identity", r_residual, R_TOL);

    let g = AnalyticFunction::new(Domain::UpperHalfPlane, move |z| cauchy_from_r(&sum, z));
    let s = *target.support();
    let grid = interior_grid(s.a, s.b, DENSITY_GRID);
    let estimate = stieltjes_invert(&g, &grid)?;
    let mut table = Table::new("density", &["x", "closed_form", "convolution_route"]);
    let mut density_residual = 0.0f64;
    for (&x, &v) in estimate.grid.iter().zip(&estimate.values) {
        let exact = target.density(x);
        density_residual = density_residual.max((v - exact).abs());
        table.push(vec![x, exact, v]);
    }
    report.check("density_route_sup", density_residual, DENSITY_ROUTE_TOL);
    report.tables.push(table);
    Ok(report.finish())
}

/// `X ~ μ(λ,α,β) ⇒ X⁻¹ ~ μ(−λ,β,α)` by change of variables:
/// `f_q(y) = f_p(1/y)/y²`.
pub fn run_inverse_check(p: &FreeGigParams, grid: Option<&[f64]>) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("inverse", RunMode::Strict);
    report.gig_params(p);
    let law = FreeGig::new(*p)?;
    let inv = FreeGig::new(invert_params(*p))?;
    let s = *inv.support();
    let default_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            default_grid = interior_grid(s.a, s.b, DENSITY_GRID);
            &default_grid
        }
    };
    let mut table = Table::new("density", &["y", "pushforward", "inverse_law"]);
    let mut residual = 0.0f64;
    for &y in grid {
        if y <= 0.0 {
            return Err(Error::Parameter(format!("inverse check grid must be positive, got {y}")));
        }
        let lhs = law.density(1.0 / y) / (y * y);
        let rhs = inv.density(y);
        residual = residual.max((lhs - rhs).abs());
        table.push(vec![y, lhs, rhs]);
    }
    report.check("change_of_variables_sup", residual, INVERSE_TOL);
    report.tables.push(table);
    Ok(report.finish())
}

fn series_from(first: f64, rest: &[f64]) -> Result<TruncatedSeries> {
    let mut c = Vec::with_capacity(rest.len() + 1);
    c.push(first);
    c.extend_from_slice(rest);
    TruncatedSeries::new(c)
}

/// The moment identities behind the regression characterization, for
/// `X ~ μ(−λ,α,β)` and `Y ~ MP(rate λ, jump 1/α)` free:
///
/// - `α_n = φ((X+Y)ⁿ)` from quadrature of `μ(λ,α,β)`;
/// - `β_n = φ(X⁻¹(X+Y)ⁿ)`, `δ_n = φ(Y⁻¹(X+Y)ⁿ)` as coefficients of
///   `A(z)·C(zA(z))` with `C` built from the mixed inverse cumulants;
/// - `β_n − α_{n−1} = cα_n` and `δ_{n+2} − α_{n+1} = dα_n`.
///
/// Since `α_n` grows geometrically, these residuals are reported relative to
/// the larger side (floored at 1).
pub fn run_regression_check(p: &FreeGigParams, order: usize) -> Result<ExperimentReport> {
    require_lambda_above_one(p)?;
    if order > MAX_REGRESSION_ORDER {
        return Err(Error::Parameter(format!("regression order must be <= {MAX_REGRESSION_ORDER}, got {order}")));
    }
    let mut report = ExperimentReport::new("regression", RunMode::Strict);
    report.gig_params(p).param("order", order as f64);

    let law = FreeGig::new(*p)?;
    let gamma = law.gamma().value;
    let k = RegressionConstants::from_params(p, gamma)?;
    let top = order + 2;
    let a = series_from(1.0, law.moments(top.max(MAX_QUADRATIC_ORDER))?.as_slice())?;
    let alpha_m1 = law.moment(-1)?;

    let x_law = FreeGig::new(FreeGigParams::new(-p.lambda, p.alpha, p.beta)?)?;
    let cx = mixed_inverse_cumulants(x_law.moment(-1)?, &x_law.r_series(top)?, top + 1)?;
    let y_law = MarchenkoPastur::new(MarchenkoPasturParams::new(p.lambda, 1.0 / p.alpha)?);
    let cy = mixed_inverse_cumulants(y_law.inverse_mean()?, &y_law.cumulants(top)?, top + 1)?;
    let b = series_compose_ac(&a, &TruncatedSeries::new(cx.as_slice().to_vec())?, top)?;
    let d = series_compose_ac(&a, &TruncatedSeries::new(cy.as_slice().to_vec())?, top)?;

    for n in 1..=order {
        report.check(
            &format!("regression_beta_n{n}"),
            relative(b.get(n) - a.get(n - 1), k.c * a.get(n)),
            S1_TOL,
        );
    }
    for n in 0..=order {
        report.check(
            &format!("regression_delta_n{n}"),
            relative(d.get(n + 2) - a.get(n + 1), k.d * a.get(n)),
            S1_TOL,
        );
    }

    report.check("anchor_beta0", b.get(0) - (k.c + alpha_m1), ANCHOR_TOL);
    report.check("anchor_delta1", d.get(1) - (k.d * alpha_m1 + 1.0), ANCHOR_TOL);
    report.check("anchor_delta0", y_law.moment(-1)? - p.alpha / (p.lambda - 1.0), ANCHOR_TOL);
    report.check("anchor_alpha_m1_gamma", alpha_m1 + gamma, ANCHOR_TOL);
    let v_law = MarchenkoPastur::new(MarchenkoPasturParams::new(p.lambda, 1.0 / p.beta)?);
    report.check("anchor_phi_v_c", v_law.moment(1)? - k.c, ANCHOR_TOL);
    report.check("anchor_phi_v_inv_d", v_law.moment(-1)? - k.d, ANCHOR_TOL);

    let residuals = quadratic_residuals(&a, k.cd(), k.d, k.delta0, alpha_m1, MAX_QUADRATIC_ORDER);
    for (n, r) in residuals.iter().enumerate() {
        report.check(
            &format!("moment_equation_n{n}"),
            r / quadratic_scale(&a, k, n),
            QUADRATIC_TOL,
        );
    }

    let back = characterization_params(k.c, k.d, k.delta0)?;
    let round_trip = relative(back.lambda, p.lambda)
        .abs()
        .max(relative(back.alpha, p.alpha).abs())
        .max(relative(back.beta, p.beta).abs());
    report.check("parameter_map_round_trip", round_trip, ROUND_TRIP_TOL);

    let mut table = Table::new("series", &["n", "alpha_n", "beta_n", "delta_n"]);
    for n in 0..=top {
        table.push(vec![n as f64, a.get(n), b.get(n), d.get(n)]);
    }
    report.tables.push(table);
    Ok(report.finish())
}

/// Magnitude of the terms entering coefficient `n` of the quadratic.
fn quadratic_scale(a: &TruncatedSeries, k: RegressionConstants, n: usize) -> f64 {
    let sq = a.mul(a, n);
    let mut s = k.delta0 * a.get(n).abs();
    if n >= 1 {
        s += (k.cd() - 1.0) * sq.get(n - 1).abs() + a.get(n - 1).abs();
    }
    if n >= 2 {
        s += k.d * a.get(n - 2).abs();
    }
    s.max(1.0)
}

const QUADRATIC_G_STEPS: usize = 64;

/// `G(z) = (−d + z(zδ₀ − 1) + √p(z)) / (2(cd−1)z²)` with
/// `p(z) = (δ₀z² − z − d)² − 4(cd−1)z²(dα₋₁ + zδ₀)`; the root is continued
/// from `8i(1+|z|)`, where it is close to `−δ₀z²`.
pub fn quadratic_cauchy(k: &RegressionConstants, z: Complex64) -> Result<Complex64> {
    if z.norm() == 0.0 {
        return Err(Error::Singularity {
            z,
            what: "quadratic Cauchy transform at the origin",
        });
    }
    let cd1 = k.cd() - 1.0;
    let poly = |z: Complex64| (k.delta0 * z * z - z - k.d).powi(2) - 4.0 * cd1 * z * z * (k.d * k.alpha_m1 + z * k.delta0);
    let z0 = Complex64::new(0.0, 8.0 * (1.0 + z.norm()));
    let mut prev = -k.delta0 * z0 * z0;
    for step in 0..=QUADRATIC_G_STEPS {
        let zz = z0 + (z - z0) * (step as f64 / QUADRATIC_G_STEPS as f64);
        let r = poly(zz).sqrt();
        prev = if (r - prev).norm() <= (r + prev).norm() { r } else { -r };
    }
    Ok((-k.d + z * (z * k.delta0 - 1.0) + prev) / (2.0 * cd1 * z * z))
}

/// The power-series solution of the quadratic, with constants from the
/// inverse parameter map and `α₋₁ = −γ`, against quadrature moments; and the
/// closed-form Cauchy transform it encodes against the fGIG one.
pub fn run_quadratic_a_check(p: &FreeGigParams, order: usize) -> Result<ExperimentReport> {
    require_lambda_above_one(p)?;
    if order > MAX_QUADRATIC_ORDER {
        return Err(Error::Parameter(format!("quadratic order must be <= {MAX_QUADRATIC_ORDER}, got {order}")));
    }
    let mut report = ExperimentReport::new("quadratic", RunMode::Strict);
    report.gig_params(p).param("order", order as f64);
    let law = FreeGig::new(*p)?;
    let k = RegressionConstants::from_params(p, law.gamma().value)?;
    let a = quadratic_a_solver(k.cd(), k.d, k.delta0, k.alpha_m1, order)?;
    let residuals = quadratic_residuals(&a, k.cd(), k.d, k.delta0, k.alpha_m1, order);
    let worst = residuals
        .iter()
        .enumerate()
        .map(|(n, r)| (r / quadratic_scale(&a, k, n)).abs())
        .fold(0.0, f64::max);
    report.check("solver_defining_residual", worst, 1e-12);

    let mut table = Table::new("coefficients", &["n", "solver", "quadrature"]);
    for n in 0..=order {
        let m = if n == 0 { law.moment(0)? } else { law.moment(n as i32)? };
        report.check(&format!("coefficient_n{n}"), relative(a.get(n), m), QUADRATIC_TOL);
        table.push(vec![n as f64, a.get(n), m]);
    }
    report.tables.push(table);

    let mut points = vec![Complex64::new(1.0, 1.0)];
    let s = *law.support();
    for j in 0..10 {
        points.push(Complex64::new(s.a - 1.0 + (s.b - s.a + 2.0) * j as f64 / 9.0, 0.05 + 0.25 * j as f64));
    }
    let mut worst_g = 0.0f64;
    for (j, &z) in points.iter().enumerate() {
        let diff = (quadratic_cauchy(&k, z)? - law.cauchy(z)?).norm();
        if j == 0 {
            report.check("quadratic_cauchy_at_1_plus_i", diff, QUADRATIC_G_TOL);
        }
        worst_g = worst_g.max(diff);
    }
    report.check("quadratic_cauchy_grid_sup", worst_g, QUADRATIC_G_TOL);
    Ok(report.finish())
}
