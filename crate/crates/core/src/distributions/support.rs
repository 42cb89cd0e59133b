//! Support endpoints of `μ(λ,α,β)`.
//!
//! In `s = √(ab)`, `t = (a+b)/2` the two endpoint equations become
//!
//! ```text
//! F₁ = 1 − λ + αs − βt/s² = 0
//! F₂ = 1 + λ + β/s − αt   = 0
//! ```
//!
//! Damped Newton starts from the `β → 0` (Marchenko–Pastur) endpoints.
//! Eliminating `t` leaves the quartic `α²s⁴ + α(1−λ)s³ − β(1+λ)s − β² = 0`,
//! which has exactly one positive root; bisection on it is the fallback.

use serde::{Deserialize, Serialize};

use super::FreeGigParams;
use crate::{Error, Result};

const NEWTON_MAX_ITER: usize = 100;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportInterval {
    pub a: f64,
    pub b: f64,
    pub residual1: f64,
    pub residual2: f64,
}

impl SupportInterval {
    /// `√(ab)`.
    pub fn geometric_mean(&self) -> f64 {
        (self.a * self.b).sqrt()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }
}

/// Residuals of the two endpoint equations at `(a, b)`.
pub fn support_residuals(p: &FreeGigParams, a: f64, b: f64) -> (f64, f64) {
    let s = (a * b).sqrt();
    let r1 = 1.0 - p.lambda + p.alpha * s - p.beta * (a + b) / (2.0 * a * b);
    let r2 = 1.0 + p.lambda + p.beta / s - p.alpha * (a + b) / 2.0;
    (r1, r2)
}

fn equations(p: &FreeGigParams, s: f64, t: f64) -> [f64; 2] {
    [
        1.0 - p.lambda + p.alpha * s - p.beta * t / (s * s),
        1.0 + p.lambda + p.beta / s - p.alpha * t,
    ]
}

fn norm(f: [f64; 2]) -> f64 {
    f[0].abs().max(f[1].abs())
}

fn newton(p: &FreeGigParams) -> Option<(f64, f64)> {
    let (alpha, beta) = (p.alpha, p.beta);
    let mp_guess = (1.0 - p.lambda).abs() / alpha;
    let mut s = mp_guess.max((beta / alpha).sqrt() * 1e-3).max(1e-8);
    let mut t = (1.0 + p.lambda + beta / s) / alpha;
    let mut f = equations(p, s, t);
    for _ in 0..NEWTON_MAX_ITER {
        if norm(f) < 1e-15 * (1.0 + p.lambda.abs() + alpha * s + beta / s) {
            break;
        }
        let j11 = alpha + 2.0 * beta * t / (s * s * s);
        let j12 = -beta / (s * s);
        let j21 = -beta / (s * s);
        let j22 = -alpha;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let ds = (-f[0] * j22 + f[1] * j12) / det;
        let dt = (-j11 * f[1] + j21 * f[0]) / det;
        let mut step = 1.0;
        loop {
            let (ns, nt) = (s + step * ds, t + step * dt);
            if ns > 0.0 {
                let nf = equations(p, ns, nt);
                if norm(nf) < norm(f) {
                    s = ns;
                    t = nt;
                    f = nf;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-12 {
                return finish(p, s, t);
            }
        }
    }
    finish(p, s, t)
}

fn finish(p: &FreeGigParams, s: f64, t: f64) -> Option<(f64, f64)> {
    let f = equations(p, s, t);
    (s > 0.0 && f.iter().all(|v| v.is_finite()) && norm(f) < RESIDUAL_TOL).then_some((s, t))
}

fn quartic(p: &FreeGigParams, s: f64) -> f64 {
    let (l, a, b) = (p.lambda, p.alpha, p.beta);
    ((a * a * s + a * (1.0 - l)) * s * s - b * (1.0 + l)) * s - b * b
}

fn bisection(p: &FreeGigParams) -> Option<(f64, f64)> {
    let mut hi = 1.0;
    let mut guard = 0;
    while quartic(p, hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if quartic(p, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Some((s, (1.0 + p.lambda + p.beta / s) / p.alpha))
}

pub fn solve_support(p: &FreeGigParams) -> Result<SupportInterval> {
    p.validate()?;
    let (s, t) = match newton(p) {
        Some(st) => st,
        None => bisection(p).ok_or_else(|| {
            let f = equations(p, 1.0, 1.0);
            Error::SolverNonConvergence {
                s: f64::NAN,
                t: f64::NAN,
                residual1: f[0],
                residual2: f[1],
            }
        })?,
    };
    if !(t > s && s > 0.0) {
        return Err(Error::Domain(format!(
            "endpoint equations give s = √(ab) = {s}, t = (a+b)/2 = {t}; no interval with 0 < a < b"
        )));
    }
    // b − a = 2√(t² − s²); computing a as s²/b avoids cancellation.
    let b = t + ((t - s) * (t + s)).sqrt();
    let a = s * s / b;
    let (residual1, residual2) = support_residuals(p, a, b);
    if !(residual1.abs() < RESIDUAL_TOL && residual2.abs() < RESIDUAL_TOL) {
        return Err(Error::SolverNonConvergence {
            s,
            t,
            residual1,
            residual2,
        });
    }
    Ok(SupportInterval {
        a,
        b,
        residual1,
        residual2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: f64, a: f64, b: f64) -> FreeGigParams {
        FreeGigParams::new(l, a, b).unwrap()
    }

    #[test]
    fn symmetric_case_closed_form() {
        let s = solve_support(&params(0.0, 1.0, 1.0)).unwrap();
        assert!((s.a - (2.0 - 3f64.sqrt())).abs() < 1e-12);
        assert!((s.b - (2.0 + 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn residuals_small() {
        let s = solve_support(&params(2.0, 1.0, 1.0)).unwrap();
        assert!(s.residual1.abs() < 1e-10 && s.residual2.abs() < 1e-10);
        assert!(0.0 < s.a && s.a < s.b);
    }

    #[test]
    fn small_beta_approaches_mp_edges() {
        let s = solve_support(&params(2.0, 1.0, 1e-6)).unwrap();
        let r = 2f64.sqrt();
        assert!((s.a - (1.0 - r).powi(2)).abs() < 1e-3);
        assert!((s.b - (1.0 + r).powi(2)).abs() < 1e-3);
    }

    #[test]
    fn bisection_agrees_with_newton() {
        for &(l, a, b) in &[(2.0, 1.0, 1.0), (-3.0, 0.5, 8.0), (4.0, 8.0, 0.5), (1.0, 1.0, 1.0)] {
            let p = params(l, a, b);
            let (s1, t1) = newton(&p).unwrap();
            let (s2, t2) = bisection(&p).unwrap();
            assert!((s1 - s2).abs() < 1e-10 * s1.max(1.0), "{p:?}");
            assert!((t1 - t2).abs() < 1e-9 * t1.max(1.0), "{p:?}");
        }
    }

    #[test]
    fn grid_residuals() {
        for &l in &[-3.0, -1.0, 0.0, 2.0, 4.0] {
            for &a in &[0.5, 1.0, 2.0, 4.0, 8.0] {
                for &b in &[0.5, 1.0, 2.0, 4.0, 8.0] {
                    let s = solve_support(&params(l, a, b)).unwrap();
                    assert!(s.residual1.abs() < 1e-10 && s.residual2.abs() < 1e-10);
                }
            }
        }
    }
}
