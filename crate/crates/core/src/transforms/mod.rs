//! Cauchy/R-transform calculus: Stieltjes inversion, free additive
//! convolution by adding R-transforms, numeric recovery of `G` from `r`, and
//! truncated power series.

mod series;

pub use series::{moment_series_from_r, quadratic_a_solver, quadratic_residuals, series_compose_ac, TruncatedSeries};

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Where an [`AnalyticFunction`] is known to be analytic. This is metadata:
/// evaluation is not refused outside it (a Cauchy transform's values leave
/// any disk on which the matching R-transform's series converges, yet the
/// closed form stays valid there).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    UpperHalfPlane,
    Disk { radius: f64 },
}

type Eval = dyn Fn(Complex64) -> Result<Complex64> + Send + Sync;

#[derive(Clone)]
pub struct AnalyticFunction {
    eval: Arc<Eval>,
    domain: Domain,
}

impl std::fmt::Debug for AnalyticFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticFunction").field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl AnalyticFunction {
    pub fn new<F>(domain: Domain, eval: F) -> Self
    where
        F: Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            domain,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match self.domain {
            Domain::UpperHalfPlane => z.im > 0.0,
            Domain::Disk { radius } => z.norm() <= radius,
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let v = (self.eval)(z)?;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Singularity {
                z,
                what: "non-finite value",
            });
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Smallest ε the extrapolation used.
    pub epsilon_used: f64,
}

const STIELTJES_EPS: [f64; 3] = [1e-3, 1e-4, 1e-5];
const STIELTJES_TOL: f64 = 1e-4;

/// `−(1/π)·Im G(t + iε)` extrapolated to `ε = 0` by the quadratic through
/// `ε ∈ {1e−3, 1e−4, 1e−5}`.
pub fn stieltjes_invert(g: &AnalyticFunction, grid: &[f64]) -> Result<DensityEstimate> {
    // Lagrange weights of the quadratic at ε = 0.
    let e = STIELTJES_EPS;
    let weights: [f64; 3] = std::array::from_fn(|i| {
        (0..3)
            .filter(|&j| j != i)
            .map(|j| e[j] / (e[j] - e[i]))
            .product()
    });
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid {
        let mut v = [0.0; 3];
        for (k, &eps) in e.iter().enumerate() {
            v[k] = -g.eval(Complex64::new(t, eps))?.im / PI;
        }
        let extrapolated: f64 = weights.iter().zip(&v).map(|(w, x)| w * x).sum();
        let monotone = (v[0] <= v[1] && v[1] <= v[2]) || (v[0] >= v[1] && v[1] >= v[2]);
        if !monotone && (extrapolated - v[2]).abs() > STIELTJES_TOL {
            return Err(Error::InversionUnstable {
                t,
                detail: format!("values {v:?} are not monotone in ε and extrapolate to {extrapolated}"),
            });
        }
        if extrapolated < -STIELTJES_TOL {
            return Err(Error::InversionUnstable {
                t,
                detail: format!("negative density {extrapolated}"),
            });
        }
        values.push(extrapolated.max(0.0));
    }
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        epsilon_used: e[2],
    })
}

/// `r₁ + r₂` on the intersection of two disks.
pub fn free_convolve_r(r1: &AnalyticFunction, r2: &AnalyticFunction) -> Result<AnalyticFunction> {
    let radius = match (r1.domain, r2.domain) {
        (Domain::Disk { radius: a }, Domain::Disk { radius: b }) => a.min(b),
        _ => return Err(Error::Domain("R-transforms must be declared on disks".into())),
    };
    if !(radius > 0.0) {
        return Err(Error::Domain("R-transform disks do not intersect".into()));
    }
    let (f, g) = (r1.clone(), r2.clone());
    Ok(AnalyticFunction::new(Domain::Disk { radius }, move |z| Ok(f.eval(z)? + g.eval(z)?)))
}

const PATH_STEPS: usize = 32;
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

/// Solves `r(w) + 1/w = z` for `w = G(z)` by Newton continuation along the
/// segment from `8i(1+|z|)` to `z`, starting from `w = 1/z₀`.
pub fn cauchy_from_r(r: &AnalyticFunction, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("cauchy_from_r needs Im z > 0, got {z}")));
    }
    let z0 = Complex64::new(0.0, 8.0 * (1.0 + z.norm()));
    let mut w = 1.0 / z0;
    let mut residual = f64::INFINITY;
    for step in 1..=PATH_STEPS {
        let target = z0 + (z - z0) * (step as f64 / PATH_STEPS as f64);
        let tol = NEWTON_TOL * target.norm().max(1.0);
        let f = |w: Complex64| -> Result<Complex64> { Ok(r.eval(w)? + 1.0 / w - target) };
        let mut fw = f(w)?;
        residual = fw.norm();
        let mut iter = 0;
        while residual > tol {
            iter += 1;
            if iter > NEWTON_MAX_ITER {
                return Err(Error::Continuation { z, last: w, residual });
            }
            let h = 1e-5 * w.norm();
            let dr = (r.eval(w + h)? - r.eval(w - h)?) / (2.0 * h);
            let deriv = dr - 1.0 / (w * w);
            if deriv.norm() == 0.0 {
                return Err(Error::Continuation { z, last: w, residual });
            }
            let delta = fw / deriv;
            let mut damping = 1.0;
            loop {
                let candidate = w - delta * damping;
                // G maps the upper half-plane into the lower one.
                if candidate.im < 0.0 {
                    if let Ok(fc) = f(candidate) {
                        if fc.norm() < residual {
                            w = candidate;
                            fw = fc;
                            residual = fc.norm();
                            break;
                        }
                    }
                }
                damping *= 0.5;
                if damping < 1e-10 {
                    return Err(Error::Continuation { z, last: w, residual });
                }
            }
        }
    }
    debug_assert!(residual.is_finite());
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{FreeGig, FreeGigParams, MarchenkoPastur, MarchenkoPasturParams};

    fn disk(radius: f64, f: impl Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static) -> AnalyticFunction {
        AnalyticFunction::new(Domain::Disk { radius }, f)
    }

    fn gig_r(l: f64, a: f64, b: f64) -> AnalyticFunction {
        let g = FreeGig::new(FreeGigParams::new(l, a, b).unwrap()).unwrap();
        let radius = g.r_radius().unwrap();
        disk(radius, move |w| g.rtransform(w))
    }

    fn mp_r(rate: f64, jump: f64) -> AnalyticFunction {
        let m = MarchenkoPastur::new(MarchenkoPasturParams::new(rate, jump).unwrap());
        disk(0.9 / jump, move |w| m.rtransform(w))
    }

    #[test]
    fn point_mass_has_no_density() {
        let g = AnalyticFunction::new(Domain::UpperHalfPlane, |z| Ok(1.0 / z));
        let grid: Vec<f64> = (0..20).map(|k| 0.1 + 0.2 * k as f64).chain([-0.5, -2.0]).collect();
        let est = stieltjes_invert(&g, &grid).unwrap();
        assert!(est.values.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn stieltjes_recovers_fgig_density() {
        let law = FreeGig::new(FreeGigParams::new(2.0, 1.0, 1.0).unwrap()).unwrap();
        let s = *law.support();
        let grid: Vec<f64> = (0..200).map(|i| s.a + (s.b - s.a) * (i as f64 + 0.5) / 200.0).collect();
        let g = {
            let law = law.clone();
            AnalyticFunction::new(Domain::UpperHalfPlane, move |z| law.cauchy(z))
        };
        let est = stieltjes_invert(&g, &grid).unwrap();
        let mut mass = 0.0;
        for (i, (&x, &v)) in est.grid.iter().zip(&est.values).enumerate() {
            if (40..160).contains(&i) {
                assert!((v - law.density(x)).abs() < 1e-5, "{x}");
            }
            mass += v * (s.b - s.a) / 200.0;
        }
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
    }

    #[test]
    fn convolution_identities() {
        let zero = disk(1.0, |_| Ok(Complex64::new(0.0, 0.0)));
        let r1 = gig_r(2.0, 1.0, 1.0);
        let sum = free_convolve_r(&r1, &zero).unwrap();
        let w = Complex64::new(0.01, 0.02);
        assert_eq!(sum.eval(w).unwrap(), r1.eval(w).unwrap());

        let semi = disk(10.0, |w| Ok(w));
        let doubled = free_convolve_r(&semi, &semi).unwrap();
        assert_eq!(doubled.eval(w).unwrap(), 2.0 * w);

        let conv = free_convolve_r(&gig_r(-2.0, 1.0, 1.0), &mp_r(2.0, 1.0)).unwrap();
        for j in 0..24 {
            for rho in [0.01, 0.03, 0.05] {
                let w = Complex64::from_polar(rho, 2.0 * PI * j as f64 / 24.0);
                assert!((conv.eval(w).unwrap() - r1.eval(w).unwrap()).norm() < 1e-8);
            }
        }
        let uhp = AnalyticFunction::new(Domain::UpperHalfPlane, |z| Ok(z));
        assert!(free_convolve_r(&uhp, &semi).is_err());
    }

    #[test]
    fn cauchy_from_zero_r_is_point_mass() {
        let zero = disk(1.0, |_| Ok(Complex64::new(0.0, 0.0)));
        let z = Complex64::new(0.3, 0.7);
        assert!((cauchy_from_r(&zero, z).unwrap() - 1.0 / z).norm() < 1e-12);
    }

    #[test]
    fn cauchy_from_mp_r_matches_closed_form() {
        let m = MarchenkoPastur::new(MarchenkoPasturParams::new(2.0, 1.0).unwrap());
        let z = Complex64::new(1.0, 1.0);
        let w = cauchy_from_r(&mp_r(2.0, 1.0), z).unwrap();
        assert!((w - m.cauchy(z).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn cauchy_from_gig_r_matches_closed_form() {
        let law = FreeGig::new(FreeGigParams::new(2.0, 1.0, 1.0).unwrap()).unwrap();
        let r = gig_r(2.0, 1.0, 1.0);
        for k in 0..10 {
            let z = Complex64::new(-1.0 + 1.2 * k as f64, 0.05 + 0.2 * k as f64);
            let w = cauchy_from_r(&r, z).unwrap();
            assert!((w - law.cauchy(z).unwrap()).norm() < 1e-8, "{z}");
        }
    }

    #[test]
    fn convolved_cauchy_matches_closed_form() {
        let law = FreeGig::new(FreeGigParams::new(2.0, 1.0, 1.0).unwrap()).unwrap();
        let conv = free_convolve_r(&gig_r(-2.0, 1.0, 1.0), &mp_r(2.0, 1.0)).unwrap();
        for k in 0..10 {
            let z = Complex64::new(0.5 + 0.6 * k as f64, 0.02 + 0.3 * k as f64);
            let w = cauchy_from_r(&conv, z).unwrap();
            assert!((w - law.cauchy(z).unwrap()).norm() < 1e-7, "{z}");
        }
    }

    #[test]
    fn mp_density_via_r_pipeline() {
        let params = MarchenkoPasturParams::new(2.0, 1.0).unwrap();
        let m = MarchenkoPastur::new(params);
        let r = mp_r(2.0, 1.0);
        let g = AnalyticFunction::new(Domain::UpperHalfPlane, move |z| cauchy_from_r(&r, z));
        let (a, b) = params.edges();
        let grid: Vec<f64> = (0..40).map(|i| a + (b - a) * (i as f64 + 0.5) / 40.0).collect();
        let est = stieltjes_invert(&g, &grid).unwrap();
        for (&x, &v) in est.grid.iter().zip(&est.values) {
            assert!((v - m.density(x).0).abs() < 1e-4, "{x}");
        }
    }

    #[test]
    fn series_round_trip() {
        let law = FreeGig::new(FreeGigParams::new(3.0, 2.0, 0.5).unwrap()).unwrap();
        let r = law.r_series(8).unwrap();
        let a = moment_series_from_r(&TruncatedSeries::new(r.as_slice().to_vec()).unwrap(), 8).unwrap();
        let m = crate::combinatorics::MomentSequence::new(a.coefficients()[1..].to_vec()).unwrap();
        let back = crate::combinatorics::cumulants_from_moments(&m, 8).unwrap();
        for n in 1..=8 {
            assert!((back.get(n) - r.get(n)).abs() < 1e-10 * r.get(n).abs().max(1.0));
        }
    }

    #[test]
    fn moment_series_matches_quadrature() {
        let law = FreeGig::new(FreeGigParams::new(2.0, 1.0, 1.0).unwrap()).unwrap();
        let r = law.r_series(8).unwrap();
        let a = moment_series_from_r(&TruncatedSeries::new(r.as_slice().to_vec()).unwrap(), 8).unwrap();
        for k in 1..=8 {
            let m = law.moment(k as i32).unwrap();
            assert!((a.get(k) - m).abs() < 1e-6 * m, "{k}");
        }
    }
}
