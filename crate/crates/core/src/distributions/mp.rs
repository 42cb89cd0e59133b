use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use super::{edge_sqrt, MarchenkoPasturParams};
use crate::combinatorics::{CumulantSequence, MomentSequence};
use crate::quadrature::{ArcsineEdge, EdgeCdf};
use crate::{Error, Result};

const MOMENT_TOL: f64 = 1e-12;

/// `(continuous density, atom mass at 0)`. The continuous part is
/// `√(4λγ² − (x − γ(1+λ))²) / (2πγx)` on the support, with total mass
/// `min{1, λ}`.
pub fn mp_density(p: &MarchenkoPasturParams, x: f64) -> (f64, f64) {
    let (a, b) = p.edges();
    let atom = p.atom();
    if p.rate == 0.0 || x <= a || x >= b {
        return (0.0, atom);
    }
    (((x - a) * (b - x)).sqrt() * edge_weight(p, x), atom)
}

fn edge_weight(p: &MarchenkoPasturParams, x: f64) -> f64 {
    1.0 / (2.0 * PI * p.jump * x)
}

/// `λγ / (1 − γz)`.
pub fn mp_rtransform(p: &MarchenkoPasturParams, z: Complex64) -> Result<Complex64> {
    let den = 1.0 - p.jump * z;
    if den.norm() < 1e-14 {
        return Err(Error::Singularity {
            z,
            what: "Marchenko-Pastur R-transform pole",
        });
    }
    Ok(p.rate * p.jump / den)
}

#[derive(Debug, Clone)]
pub struct MarchenkoPastur {
    params: MarchenkoPasturParams,
    cdf: OnceLock<Option<EdgeCdf>>,
}

impl MarchenkoPastur {
    pub fn new(params: MarchenkoPasturParams) -> Self {
        Self {
            params,
            cdf: OnceLock::new(),
        }
    }

    pub fn params(&self) -> &MarchenkoPasturParams {
        &self.params
    }

    pub fn density(&self, x: f64) -> (f64, f64) {
        mp_density(&self.params, x)
    }

    pub fn rtransform(&self, z: Complex64) -> Result<Complex64> {
        mp_rtransform(&self.params, z)
    }

    /// `G(z) = (z + γ(1−λ) − √((z−a)(z−b))) / (2γz)`.
    pub fn cauchy(&self, z: Complex64) -> Result<Complex64> {
        let (a, b) = self.params.edges();
        if z.im == 0.0 && ((a <= z.re && z.re <= b) || z.re == 0.0) {
            return Err(Error::Singularity {
                z,
                what: "Marchenko-Pastur Cauchy transform on its support",
            });
        }
        if z.norm() < 1e-8 * b.max(self.params.jump) {
            return Err(Error::Singularity {
                z,
                what: "Marchenko-Pastur Cauchy transform formula at the origin",
            });
        }
        let g = self.params.jump;
        Ok((z + g * (1.0 - self.params.rate) - edge_sqrt(z, a, b)) / (2.0 * g * z))
    }

    /// `R_n = γⁿλ`.
    pub fn cumulants(&self, order: usize) -> Result<CumulantSequence> {
        let (l, g) = (self.params.rate, self.params.jump);
        CumulantSequence::new((1..=order as i32).map(|n| g.powi(n) * l).collect())
    }

    /// `∫ x^k dν`; negative powers require `λ > 1` (no atom, support away
    /// from 0).
    pub fn moment(&self, k: i32) -> Result<f64> {
        let p = self.params;
        if k < 0 && p.rate <= 1.0 {
            return Err(Error::Domain(format!(
                "negative moments of the Marchenko-Pastur law need rate > 1 (rate = {})",
                p.rate
            )));
        }
        let atom = if k == 0 { p.atom() } else { 0.0 };
        if p.rate == 0.0 {
            return Ok(atom);
        }
        let (a, b) = p.edges();
        let continuous = ArcsineEdge::new(a, b).integrate(MOMENT_TOL, |x| edge_weight(&p, x) * x.powi(k))?;
        Ok(atom + continuous)
    }

    pub fn moments(&self, order: usize) -> Result<MomentSequence> {
        let m = (1..=order as i32).map(|k| self.moment(k)).collect::<Result<Vec<_>>>()?;
        MomentSequence::new(m)
    }

    /// `∫ x⁻¹ dν = 1/(γ(λ−1))` for `λ > 1`.
    pub fn inverse_mean(&self) -> Result<f64> {
        let p = self.params;
        if p.rate <= 1.0 {
            return Err(Error::Domain(format!("φ(Y⁻¹) diverges for rate {} <= 1", p.rate)));
        }
        Ok(1.0 / (p.jump * (p.rate - 1.0)))
    }

    fn cdf_table(&self) -> Result<Option<&EdgeCdf>> {
        if let Some(t) = self.cdf.get() {
            return Ok(t.as_ref());
        }
        let p = self.params;
        let table = if p.rate == 0.0 {
            None
        } else {
            let (a, b) = p.edges();
            Some(EdgeCdf::new(a, b, Arc::new(move |x| edge_weight(&p, x)))?)
        };
        Ok(self.cdf.get_or_init(|| table).as_ref())
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let atom = self.params.atom();
        let step = if x >= 0.0 { atom } else { 0.0 };
        Ok(match self.cdf_table()? {
            None => step,
            Some(t) => step + (1.0 - atom) * t.cdf(x),
        })
    }
}
