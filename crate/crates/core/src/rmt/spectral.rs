use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMatrix, Ensemble, HermitianSample};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSpectralDistribution {
    pub eigenvalues: Vec<f64>,
}

impl EmpiricalSpectralDistribution {
    /// Sorts `values` ascending.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { eigenvalues: values }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Fraction of eigenvalues `≤ x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.eigenvalues.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }
}

pub fn esd(m: &HermitianSample) -> Result<EmpiricalSpectralDistribution> {
    Ok(EmpiricalSpectralDistribution::from_values(m.spectral()?.values.clone()))
}

/// `sup_x |F_emp(x) − cdf(x)|`, attained at an eigenvalue from one side.
pub fn ks_distance<F: Fn(f64) -> f64>(e: &EmpiricalSpectralDistribution, cdf: F) -> f64 {
    let n = e.len() as f64;
    let v = &e.eigenvalues;
    let mut worst = 0.0f64;
    let mut i = 0;
    while i < v.len() {
        // Ties jump together.
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        worst = worst.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    worst
}

/// `(1/N)·Re Tr(M₁M₂⋯M_k)`.
pub fn trace_moment(word: &[&CMatrix]) -> Result<f64> {
    let first = word.first().ok_or_else(|| Error::Parameter("empty word".into()))?;
    let n = first.nrows();
    for m in word {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Parameter(format!(
                "trace word needs {n}x{n} matrices, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let trace = match word {
        [a] => a.trace(),
        [a, b] => trace_of_product(a, b),
        [head @ .., last] => {
            let mut p = (*head[0]).clone();
            for m in &head[1..] {
                p = &p * *m;
            }
            trace_of_product(&p, last)
        }
        [] => unreachable!("checked non-empty"),
    };
    Ok(trace.re / n as f64)
}

/// `Tr(AB)` without forming the product.
fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `U = (X+Y)⁻¹` and `V = X⁻¹ − (X+Y)⁻¹`.
#[derive(Debug, Clone)]
pub struct MyPair {
    pub u: HermitianSample,
    pub v: HermitianSample,
}

fn check_pair(x: &HermitianSample, y: &HermitianSample) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::Parameter(format!("dimension mismatch: {} vs {}", x.n(), y.n())));
    }
    Ok(())
}

fn sum(x: &HermitianSample, y: &HermitianSample) -> Result<HermitianSample> {
    HermitianSample::new(
        x.entries() + y.entries(),
        Ensemble::Derived {
            description: "X+Y".into(),
        },
        x.seed(),
    )
}

pub fn my_transform(x: &HermitianSample, y: &HermitianSample) -> Result<MyPair> {
    check_pair(x, y)?;
    let u = sum(x, y)?.inverse("(X+Y)^-1")?;
    let x_inv = x.inverse("X^-1")?;
    let v = HermitianSample::new(
        x_inv.entries() - u.entries(),
        Ensemble::Derived {
            description: "X^-1-(X+Y)^-1".into(),
        },
        x.seed(),
    )?;
    Ok(MyPair { u, v })
}

/// `‖(X + XY⁻¹X)(X⁻¹ − (X+Y)⁻¹) − I‖` in operator norm.
pub fn hua_residual(x: &HermitianSample, y: &HermitianSample) -> Result<f64> {
    let pair = my_transform(x, y)?;
    hua_residual_with(x, y, &pair.v)
}

pub(crate) fn hua_residual_with(x: &HermitianSample, y: &HermitianSample, v: &HermitianSample) -> Result<f64> {
    check_pair(x, y)?;
    let y_inv = y.inverse("Y^-1")?;
    let xm = x.entries();
    let v_inv = xm + xm * y_inv.entries() * xm;
    let n = x.n();
    let m = v_inv * v.entries() - CMatrix::identity(n, n);
    m.singular_values()
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::Linalg("empty singular value set".into()))
}

/// `(κ̂₂, alt₄) = (φ(UV) − φ(U)φ(V), φ(ŮV̊ŮV̊))` with `Ů = U − φ(U)I`.
pub fn pair_statistics(u: &HermitianSample, v: &HermitianSample) -> Result<(f64, f64)> {
    check_pair(u, v)?;
    let n = u.n();
    let (um, vm) = (u.entries(), v.entries());
    let phi_u = um.trace().re / n as f64;
    let phi_v = vm.trace().re / n as f64;
    let k2 = trace_moment(&[um, vm])? - phi_u * phi_v;
    let shift = |m: &CMatrix, c: f64| {
        let mut out = m.clone();
        for i in 0..n {
            out[(i, i)] -= c;
        }
        out
    };
    let uc = shift(um, phi_u);
    let vc = shift(vm, phi_v);
    let p = &uc * &vc;
    let alt4 = trace_moment(&[&p, &p])?;
    Ok((k2, alt4))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreenessReport {
    pub mixed_cumulant_2: f64,
    pub mixed_cumulant_2_se: f64,
    pub alternating_moment_4: f64,
    pub alternating_moment_4_se: f64,
    /// `(κ̂₂, alt₄)` per replicate.
    pub per_replicate: Vec<(f64, f64)>,
    pub n: usize,
    pub replicates: usize,
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl FreenessReport {
    pub fn from_replicates(n: usize, per_replicate: Vec<(f64, f64)>) -> Result<Self> {
        if per_replicate.is_empty() {
            return Err(Error::Parameter("freeness statistics need at least one replicate".into()));
        }
        let (k2, k2_se) = mean_and_se(per_replicate.iter().map(|p| p.0));
        let (a4, a4_se) = mean_and_se(per_replicate.iter().map(|p| p.1));
        Ok(Self {
            mixed_cumulant_2: k2,
            mixed_cumulant_2_se: k2_se,
            alternating_moment_4: a4,
            alternating_moment_4_se: a4_se,
            replicates: per_replicate.len(),
            per_replicate,
            n,
        })
    }
}

/// Runs `sampler` for replicates `0..reps` (each gets its replicate index)
/// and averages [`pair_statistics`].
pub fn freeness_statistics<F>(reps: usize, mut sampler: F) -> Result<FreenessReport>
where
    F: FnMut(u64) -> Result<(HermitianSample, HermitianSample)>,
{
    if reps < 1 {
        return Err(Error::Parameter("freeness statistics need reps >= 1".into()));
    }
    let mut n = 0;
    let mut values = Vec::with_capacity(reps);
    for k in 0..reps {
        let (u, v) = sampler(k as u64)?;
        if k > 0 && u.n() != n {
            return Err(Error::Parameter("replicates have different dimensions".into()));
        }
        n = u.n();
        values.push(pair_statistics(&u, &v)?);
    }
    FreenessReport::from_replicates(n, values)
}

#[cfg(test)]
mod tests {
    use super::super::{replicate_rng, sample_fgig_matrix, sample_haar_unitary, sample_wishart};
    use super::*;
    use crate::distributions::{FreeGig, FreeGigParams};

    fn diag(values: &[f64]) -> HermitianSample {
        let n = values.len();
        let m = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        HermitianSample::new(
            m,
            Ensemble::Derived {
                description: "diag".into(),
            },
            None,
        )
        .unwrap()
    }

    fn rotated(values: &[f64], seed: u64) -> HermitianSample {
        let n = values.len();
        let u = sample_haar_unitary(n, &mut replicate_rng(seed, 0)).unwrap();
        let d = diag(values);
        HermitianSample::new(
            &u * d.entries() * u.adjoint(),
            Ensemble::Derived {
                description: "rotated".into(),
            },
            None,
        )
        .unwrap()
    }

    #[test]
    fn ks_self_distance_and_uniform_grid() {
        let n = 50;
        let values: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
        let e = esd(&diag(&values)).unwrap();
        for (k, v) in e.eigenvalues.iter().enumerate() {
            assert!((v - (k + 1) as f64 / n as f64).abs() < 1e-14);
        }
        let copy = e.clone();
        assert!(ks_distance(&e, |x| copy.cdf(x)) <= 1.0 / n as f64 + 1e-12);
        let uniform = ks_distance(&e, |x| x.clamp(0.0, 1.0));
        assert!(uniform <= 1.0 / n as f64 + 1e-12);
    }

    #[test]
    fn trace_moment_basics() {
        let i = CMatrix::identity(5, 5);
        assert_eq!(trace_moment(&[&i]).unwrap(), 1.0);
        let a = rotated(&[1.0, 2.0, 3.0, 4.0, 5.0], 1);
        let b = rotated(&[0.5, 1.5, 2.5, 3.5, 1.0], 2);
        let c = rotated(&[2.0, 1.0, 3.0, 1.0, 0.5], 3);
        let w1 = trace_moment(&[a.entries(), b.entries(), c.entries()]).unwrap();
        let w2 = trace_moment(&[b.entries(), c.entries(), a.entries()]).unwrap();
        assert!((w1 - w2).abs() < 1e-12);
        assert!(trace_moment(&[&i, &CMatrix::identity(4, 4)]).is_err());
    }

    #[test]
    fn hua_identity_cases() {
        let eye = diag(&[1.0; 6]);
        let pair = my_transform(&eye, &eye).unwrap();
        let half = pair.v.entries() - CMatrix::identity(6, 6).scale(0.5);
        assert!(half.iter().all(|c| c.norm() < 1e-15));
        assert!(hua_residual(&eye, &eye).unwrap() < 1e-14);

        let law = FreeGig::new(FreeGigParams::new(-2.0, 1.0, 1.0).unwrap()).unwrap();
        let x = sample_fgig_matrix(64, &law, &mut replicate_rng(4, 0), None).unwrap();
        let y = sample_wishart(64, 128, 64.0, &mut replicate_rng(4, 1), None).unwrap();
        assert!(hua_residual(&x, &y).unwrap() < 1e-10);
        let pair = my_transform(&x, &y).unwrap();
        assert!(pair.v.spectral().unwrap().values.iter().all(|&v| v > 0.0));
        assert!(pair.u.spectral().unwrap().values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn small_y_gives_small_v() {
        let x = rotated(&[1.0, 2.0, 3.0, 1.5], 5);
        let y = rotated(&[1e-9, 2e-9, 1.5e-9, 1e-9], 6);
        let pair = my_transform(&x, &y).unwrap();
        assert!(pair.v.entries().norm() < 1e-6);
    }

    #[test]
    fn singular_input_rejected() {
        let x = diag(&[1.0, 0.0, 2.0]);
        let y = diag(&[1.0, 1.0, 1.0]);
        assert!(matches!(my_transform(&x, &y), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn self_pair_gives_variance() {
        let u = rotated(&[1.0, 2.0, 3.0, 4.0], 7);
        let (k2, _) = pair_statistics(&u, &u).unwrap();
        assert!((k2 - 1.25).abs() < 1e-12);
    }

    #[test]
    fn independent_rotations_are_nearly_free() {
        let n = 256;
        let a: Vec<f64> = (0..n).map(|k| 1.0 + (k % 7) as f64).collect();
        let b: Vec<f64> = (0..n).map(|k| 0.5 + (k % 3) as f64).collect();
        let report = freeness_statistics(5, |k| Ok((rotated(&a, 100 + k), rotated(&b, 200 + k)))).unwrap();
        assert!(report.mixed_cumulant_2.abs() < 0.02);
        assert!(report.alternating_moment_4.abs() < 0.02);
        assert_eq!(report.replicates, 5);
        assert!(freeness_statistics(0, |k| Ok((rotated(&a, k), rotated(&b, k)))).is_err());
    }
}
