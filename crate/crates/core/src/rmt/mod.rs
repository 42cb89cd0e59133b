//! Finite-N ensembles: Ginibre, Haar unitary, complex Wishart and
//! Haar-rotated fGIG spectra, with the spectral statistics used by the
//! Matsumoto–Yor experiments.
//!
//! Every replicate draws from its own ChaCha20 stream, derived from a master
//! seed and the replicate index, so runs are reproducible regardless of
//! scheduling.

mod spectral;

pub use spectral::{
    esd, freeness_statistics, hua_residual, ks_distance, my_transform, pair_statistics, trace_moment,
    EmpiricalSpectralDistribution, FreenessReport, MyPair,
};

pub(crate) use spectral::hua_residual_with;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{FreeGig, FreeGigParams};
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub stream: u64,
}

/// The stream for replicate `stream` of a run seeded with `master`.
pub fn replicate_rng(master: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Ensemble {
    Wishart { dof: usize, alpha_scale: f64 },
    FreeGigSpectrum { params: FreeGigParams },
    /// Result of a matrix computation (e.g. the Matsumoto–Yor pair).
    Derived { description: String },
}

/// Eigenvectors (columns) and eigenvalues.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub vectors: CMatrix,
    pub values: Vec<f64>,
}

impl Spectral {
    fn compose(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(v));
        }
        hermitian_part(&(scaled * self.vectors.adjoint()))
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

#[derive(Debug, Clone)]
pub struct HermitianSample {
    entries: CMatrix,
    ensemble: Ensemble,
    seed: Option<SeedRecord>,
    spectral: Option<Arc<Spectral>>,
}

impl HermitianSample {
    /// Checks Hermiticity to `1e−12` (relative to the largest entry) and
    /// stores the exactly Hermitian part.
    pub fn new(entries: CMatrix, ensemble: Ensemble, seed: Option<SeedRecord>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::Parameter(format!(
                "Hermitian sample must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let scale = entries.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        let skew = (&entries - entries.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if skew > HERMITIAN_TOL * scale {
            return Err(Error::Parameter(format!("matrix is not Hermitian (skew {skew:e})")));
        }
        Ok(Self {
            entries: hermitian_part(&entries),
            ensemble,
            seed,
            spectral: None,
        })
    }

    fn from_spectral(spectral: Spectral, ensemble: Ensemble, seed: Option<SeedRecord>) -> Self {
        Self {
            entries: spectral.compose(|v| v),
            ensemble,
            seed,
            spectral: Some(Arc::new(spectral)),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn seed(&self) -> Option<SeedRecord> {
        self.seed
    }

    /// Eigendecomposition, reusing the one the sample was built from if any.
    pub fn spectral(&self) -> Result<Arc<Spectral>> {
        if let Some(s) = &self.spectral {
            return Ok(Arc::clone(s));
        }
        let eig = self.entries.clone().symmetric_eigen();
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Linalg("eigensolver returned non-finite eigenvalues".into()));
        }
        Ok(Arc::new(Spectral {
            vectors: eig.eigenvectors,
            values,
        }))
    }

    /// `M⁻¹` through the eigendecomposition; refuses condition numbers above
    /// `1e12` and non-positive spectra.
    pub fn inverse(&self, description: &str) -> Result<Self> {
        let s = self.spectral()?;
        let (lo, hi) = s
            .values
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
        if !(lo > 0.0) || hi / lo > 1e12 {
            return Err(Error::Conditioning {
                condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            });
        }
        let inv = Spectral {
            vectors: s.vectors.clone(),
            values: s.values.iter().map(|v| 1.0 / v).collect(),
        };
        Ok(Self::from_spectral(
            inv,
            Ensemble::Derived {
                description: description.to_string(),
            },
            self.seed,
        ))
    }
}

/// `rows × cols` matrix of i.i.d. standard complex Gaussians (real and
/// imaginary parts independent with variance 1/2), filled column by column.
pub fn sample_ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let data: Vec<Complex64> = (0..rows * cols)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    CMatrix::from_vec(rows, cols, data)
}

/// Haar unitary from the QR factorization of a Ginibre matrix, with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    for _ in 0..2 {
        let qr = sample_ginibre(n, n, rng).qr();
        let r = qr.r();
        let diag: Vec<Complex64> = (0..n).map(|i| r[(i, i)]).collect();
        if diag.iter().any(|d| d.norm() < 1e-12) {
            continue;
        }
        let mut q = qr.q();
        for (j, d) in diag.iter().enumerate() {
            let phase = d / d.norm();
            q.column_mut(j).iter_mut().for_each(|e| *e *= phase);
        }
        return Ok(q);
    }
    Err(Error::Linalg("Ginibre matrix was rank deficient twice".into()))
}

/// `Y = G·G*/alpha_scale` with `G` an `n × dof` Ginibre matrix.
pub fn sample_wishart<R: Rng + ?Sized>(
    n: usize,
    dof: usize,
    alpha_scale: f64,
    rng: &mut R,
    seed: Option<SeedRecord>,
) -> Result<HermitianSample> {
    if n == 0 || dof < n {
        return Err(Error::Parameter(format!("Wishart needs dof >= n >= 1, got n = {n}, dof = {dof}")));
    }
    if !(alpha_scale > 0.0 && alpha_scale.is_finite()) {
        return Err(Error::Parameter(format!("alpha_scale must be > 0, got {alpha_scale}")));
    }
    let g = sample_ginibre(n, dof, rng);
    let y = (&g * g.adjoint()).unscale(alpha_scale);
    HermitianSample::new(y, Ensemble::Wishart { dof, alpha_scale }, seed)
}

/// `U·diag(x)·U*` with `x` i.i.d. from the law and `U` Haar.
pub fn sample_fgig_matrix<R: Rng + ?Sized>(
    n: usize,
    law: &FreeGig,
    rng: &mut R,
    seed: Option<SeedRecord>,
) -> Result<HermitianSample> {
    let values = law.sample(n, rng)?;
    let vectors = sample_haar_unitary(n, rng)?;
    Ok(HermitianSample::from_spectral(
        Spectral { vectors, values },
        Ensemble::FreeGigSpectrum { params: *law.params() },
        seed,
    ))
}
