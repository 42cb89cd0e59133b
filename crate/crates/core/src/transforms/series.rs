use serde::{Deserialize, Serialize};

use crate::combinatorics::{moments_from_cumulants, CumulantSequence};
use crate::{Error, Result};

/// Real power series `c₀ + c₁z + … + c_order z^order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSeries {
    coefficients: Vec<f64>,
}

impl TruncatedSeries {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Parameter("series needs at least one coefficient".into()));
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::Parameter(format!("series coefficient {i} is not finite")));
        }
        Ok(Self { coefficients })
    }

    pub fn one() -> Self {
        Self { coefficients: vec![1.0] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Highest stored power.
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Coefficient of `zⁿ`; zero past the stored order.
    pub fn get(&self, n: usize) -> f64 {
        self.coefficients.get(n).copied().unwrap_or(0.0)
    }

    fn require(&self, order: usize) -> Result<()> {
        if self.order() < order {
            return Err(Error::LengthMismatch {
                needed: order + 1,
                available: self.coefficients.len(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self, order: usize) -> Self {
        Self {
            coefficients: (0..=order).map(|n| self.get(n) + other.get(n)).collect(),
        }
    }

    pub fn mul(&self, other: &Self, order: usize) -> Self {
        let coefficients = (0..=order)
            .map(|n| (0..=n).map(|i| self.get(i) * other.get(n - i)).sum())
            .collect();
        Self { coefficients }
    }

    pub fn div(&self, other: &Self, order: usize) -> Result<Self> {
        let b0 = other.get(0);
        if b0 == 0.0 {
            return Err(Error::Domain("series division by a series vanishing at 0".into()));
        }
        let mut q: Vec<f64> = Vec::with_capacity(order + 1);
        for n in 0..=order {
            let acc: f64 = (1..=n).map(|i| other.get(i) * q[n - i]).sum();
            q.push((self.get(n) - acc) / b0);
        }
        Self::new(q)
    }

    /// Square root with positive constant term.
    pub fn sqrt(&self, order: usize) -> Result<Self> {
        let c0 = self.get(0);
        if c0 <= 0.0 {
            return Err(Error::Domain(format!("series square root needs c₀ > 0, got {c0}")));
        }
        let s0 = c0.sqrt();
        let mut s = Vec::with_capacity(order + 1);
        s.push(s0);
        for n in 1..=order {
            let acc: f64 = (1..n).map(|i| s[i] * s[n - i]).sum();
            s.push((self.get(n) - acc) / (2.0 * s0));
        }
        Self::new(s)
    }

    /// `self(inner(z))` for `inner(0) = 0`.
    pub fn compose(&self, inner: &Self, order: usize) -> Result<Self> {
        if inner.get(0) != 0.0 {
            return Err(Error::Domain("composition needs an inner series vanishing at 0".into()));
        }
        let terms = self.order().min(order);
        let mut acc = Self::new(vec![self.get(terms)])?;
        for k in (0..terms).rev() {
            acc = acc.mul(inner, order);
            acc.coefficients[0] += self.get(k);
        }
        acc.coefficients.resize(order + 1, 0.0);
        Ok(acc)
    }
}

/// `A(z) = Σ_{n≥0} m_n zⁿ` (`m₀ = 1`) from `r(z) = Σ R_{n+1} zⁿ`.
pub fn moment_series_from_r(r: &TruncatedSeries, order: usize) -> Result<TruncatedSeries> {
    if order == 0 {
        return Ok(TruncatedSeries::one());
    }
    if r.coefficients().len() < order {
        return Err(Error::LengthMismatch {
            needed: order,
            available: r.coefficients().len(),
        });
    }
    let cumulants = CumulantSequence::new(r.coefficients()[..order].to_vec())?;
    let m = moments_from_cumulants(&cumulants, order)?;
    let mut a = Vec::with_capacity(order + 1);
    a.push(1.0);
    a.extend_from_slice(m.as_slice());
    TruncatedSeries::new(a)
}

/// Coefficients `0..=order` of `A(z)·C(z·A(z))`.
pub fn series_compose_ac(a: &TruncatedSeries, c: &TruncatedSeries, order: usize) -> Result<TruncatedSeries> {
    a.require(order)?;
    c.require(order)?;
    let mut shift = vec![0.0];
    shift.extend_from_slice(&a.coefficients()[..order]);
    let za = TruncatedSeries::new(shift)?;
    Ok(a.mul(&c.compose(&za, order)?, order))
}

/// Power-series solution `A(0) = 1` of
/// `(cd−1)zA² + (dz² + z − δ₀)A + zdα₋₁ + δ₀ = 0`, coefficients `0..=order`.
pub fn quadratic_a_solver(cd: f64, d: f64, delta0: f64, alpha_m1: f64, order: usize) -> Result<TruncatedSeries> {
    if !(cd > 1.0) {
        return Err(Error::Domain(format!("quadratic needs cd > 1, got {cd}")));
    }
    if !(delta0 > 0.0) {
        return Err(Error::Domain(format!("quadratic needs δ₀ > 0, got {delta0}")));
    }
    let mut a: Vec<f64> = Vec::with_capacity(order + 1);
    a.push(1.0);
    for n in 1..=order {
        let conv: f64 = (0..n).map(|i| a[i] * a[n - 1 - i]).sum();
        let mut rhs = (cd - 1.0) * conv + a[n - 1];
        if n >= 2 {
            rhs += d * a[n - 2];
        }
        if n == 1 {
            rhs += d * alpha_m1;
        }
        a.push(rhs / delta0);
    }
    TruncatedSeries::new(a)
}

/// Coefficients of `(cd−1)zA² + (dz² + z − δ₀)A + zdα₋₁ + δ₀` up to `order`.
pub fn quadratic_residuals(a: &TruncatedSeries, cd: f64, d: f64, delta0: f64, alpha_m1: f64, order: usize) -> Vec<f64> {
    let sq = a.mul(a, order);
    (0..=order)
        .map(|n| {
            let mut v = -delta0 * a.get(n);
            if n >= 1 {
                v += (cd - 1.0) * sq.get(n - 1) + a.get(n - 1);
            }
            if n >= 2 {
                v += d * a.get(n - 2);
            }
            match n {
                0 => v + delta0,
                1 => v + d * alpha_m1,
                _ => v,
            }
        })
        .collect()
}
