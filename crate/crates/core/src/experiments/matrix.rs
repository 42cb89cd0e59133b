use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_mode, ExperimentReport, Histogram, RunMode, Table};
use crate::distributions::{FreeGig, FreeGigParams, MarchenkoPastur, MarchenkoPasturParams};
use crate::rmt::{
    esd, ks_distance, my_transform, pair_statistics, replicate_rng, sample_fgig_matrix, sample_ginibre,
    sample_wishart, Ensemble, HermitianSample, SeedRecord,
};
use crate::rmt::hua_residual_with;
use crate::{Error, Result};

const KS_TOL: f64 = 0.05;
const FREENESS_TOL: f64 = 0.02;
const HUA_TOL: f64 = 1e-9;
/// Trend replicates draw from streams disjoint from the main run.
const TREND_STREAM_OFFSET: u64 = 1 << 32;
const OVERLAY_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMyConfig {
    pub params: FreeGigParams,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Smaller dimension whose median KS distances must exceed those at `n`.
    pub trend_n: Option<usize>,
    pub mode: RunMode,
}

#[derive(Debug, Clone)]
struct Replicate {
    ks_u: f64,
    ks_v: f64,
    k2: f64,
    alt4: f64,
    /// `None` when `Y` is singular (exploratory λ < 1).
    hua: Option<f64>,
    u_values: Vec<f64>,
    v_values: Vec<f64>,
}

struct Laws {
    x: FreeGig,
    u: FreeGig,
    v: MarchenkoPastur,
}

impl Laws {
    fn new(p: &FreeGigParams) -> Result<Self> {
        let x = FreeGig::new(FreeGigParams::new(-p.lambda, p.alpha, p.beta)?)?;
        let u = FreeGig::new(FreeGigParams::new(-p.lambda, p.beta, p.alpha)?)?;
        let v = MarchenkoPastur::new(MarchenkoPasturParams::new(p.lambda, 1.0 / p.beta)?);
        // Build the CDF tables once, so the closures below cannot fail.
        u.cdf(0.0)?;
        v.cdf(0.0)?;
        Ok(Self { x, u, v })
    }
}

fn sample_y(p: &FreeGigParams, n: usize, rng: &mut rand_chacha::ChaCha20Rng, seed: SeedRecord) -> Result<HermitianSample> {
    let dof = (p.lambda * n as f64).round() as usize;
    let alpha_scale = p.alpha * n as f64;
    if dof >= n {
        return sample_wishart(n, dof, alpha_scale, rng, Some(seed));
    }
    if dof == 0 {
        return Err(Error::Parameter(format!("Wishart dof round(lambda*N) is 0 for N = {n}")));
    }
    // Rank-deficient Wishart, only reachable in exploratory mode.
    let g = sample_ginibre(n, dof, rng);
    HermitianSample::new((&g * g.adjoint()).unscale(alpha_scale), Ensemble::Wishart { dof, alpha_scale }, Some(seed))
}

fn run_replicate(p: &FreeGigParams, laws: &Laws, n: usize, master: u64, stream: u64) -> Result<Replicate> {
    let seed = SeedRecord { master, stream };
    let mut rng = replicate_rng(master, stream);
    let x = sample_fgig_matrix(n, &laws.x, &mut rng, Some(seed))?;
    let y = sample_y(p, n, &mut rng, seed)?;
    let pair = my_transform(&x, &y)?;
    let eu = esd(&pair.u)?;
    let ev = esd(&pair.v)?;
    let ks_u = ks_distance(&eu, |t| laws.u.cdf(t).unwrap_or(f64::NAN));
    let ks_v = ks_distance(&ev, |t| laws.v.cdf(t).unwrap_or(f64::NAN));
    let (k2, alt4) = pair_statistics(&pair.u, &pair.v)?;
    let hua = match hua_residual_with(&x, &y, &pair.v) {
        Ok(h) => Some(h),
        Err(Error::Conditioning { .. }) if matches!(y.ensemble(), Ensemble::Wishart { dof, .. } if *dof < n) => None,
        Err(e) => return Err(e),
    };
    Ok(Replicate {
        ks_u,
        ks_v,
        k2,
        alt4,
        hua,
        u_values: eu.eigenvalues,
        v_values: ev.eigenvalues,
    })
}

/// Replicates in stream order; ill-conditioned inputs are dropped and counted.
fn run_batch(p: &FreeGigParams, laws: &Laws, n: usize, reps: usize, master: u64, offset: u64) -> Result<(Vec<(u64, Replicate)>, usize)> {
    let outcomes: Vec<(u64, Result<Replicate>)> = (0..reps as u64)
        .into_par_iter()
        .map(|k| (k, run_replicate(p, laws, n, master, offset + k)))
        .collect();
    let mut kept = Vec::with_capacity(reps);
    let mut excluded = 0;
    for (k, outcome) in outcomes {
        match outcome {
            Ok(r) => kept.push((k, r)),
            Err(Error::Conditioning { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((kept, excluded))
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

fn overlay(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    (0..OVERLAY_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / OVERLAY_POINTS as f64;
            (x, f(x))
        })
        .collect()
}

/// `X ~ μ(−λ,α,β)` Haar-rotated, `Y` complex Wishart with `round(λN)`
/// degrees of freedom and scale `αN`; checks that `U = (X+Y)⁻¹` and
/// `V = X⁻¹ − (X+Y)⁻¹` follow `μ(−λ,β,α)` and `MP(λ, 1/β)` and look free.
pub fn run_matrix_my(cfg: &MatrixMyConfig) -> Result<ExperimentReport> {
    let p = &cfg.params;
    require_mode(p, cfg.mode)?;
    if cfg.n == 0 || cfg.reps == 0 {
        return Err(Error::Parameter(format!("need N >= 1 and reps >= 1, got N = {}, reps = {}", cfg.n, cfg.reps)));
    }
    let mut report = ExperimentReport::new("matrix_my", cfg.mode);
    report.gig_params(p).param("n", cfg.n as f64).param("reps", cfg.reps as f64);
    report.seed = Some(cfg.seed);
    let laws = Laws::new(p)?;

    let (kept, excluded) = run_batch(p, &laws, cfg.n, cfg.reps, cfg.seed, 0)?;
    report.param("excluded_replicates", excluded as f64);
    if excluded > 0 {
        report.note(format!("{excluded} replicate(s) excluded for ill-conditioned inputs"));
    }
    let ks_u = median(kept.iter().map(|(_, r)| r.ks_u).collect());
    let ks_v = median(kept.iter().map(|(_, r)| r.ks_v).collect());
    report.check("median_ks_u", ks_u, KS_TOL);
    report.check("median_ks_v", ks_v, KS_TOL);
    report.check("mean_mixed_cumulant_2", mean(kept.iter().map(|(_, r)| r.k2)), FREENESS_TOL);
    report.check("mean_alternating_moment_4", mean(kept.iter().map(|(_, r)| r.alt4)), FREENESS_TOL);
    let hua: Vec<f64> = kept.iter().filter_map(|(_, r)| r.hua).collect();
    if hua.len() < kept.len() {
        report.note("Hua residual skipped for singular Y");
    }
    if !hua.is_empty() {
        report.check("max_hua_residual", hua.iter().copied().fold(0.0, f64::max), HUA_TOL);
    }

    let mut per_rep = Table::new("replicates", &["replicate", "ks_u", "ks_v", "mixed_cumulant_2", "alternating_moment_4", "hua_residual"]);
    for (k, r) in &kept {
        per_rep.push(vec![*k as f64, r.ks_u, r.ks_v, r.k2, r.alt4, r.hua.unwrap_or(f64::NAN)]);
    }
    report.tables.push(per_rep);

    if let Some((_, first)) = kept.first() {
        let mut eig = Table::new("eigenvalues", &["index", "u", "v"]);
        for (i, (u, v)) in first.u_values.iter().zip(&first.v_values).enumerate() {
            eig.push(vec![i as f64, *u, *v]);
        }
        report.tables.push(eig);
        let su = *laws.u.support();
        report.histograms.push(Histogram {
            name: "u_spectrum".into(),
            samples: first.u_values.clone(),
            overlay: overlay(su.a, su.b, |x| laws.u.density(x)),
        });
        let (va, vb) = laws.v.params().edges();
        report.histograms.push(Histogram {
            name: "v_spectrum".into(),
            samples: first.v_values.clone(),
            overlay: overlay(va, vb, |x| laws.v.density(x).0),
        });
    }

    if let Some(small) = cfg.trend_n {
        report.param("trend_n", small as f64);
        let (small_kept, small_excluded) = run_batch(p, &laws, small, cfg.reps, cfg.seed, TREND_STREAM_OFFSET)?;
        report.param("trend_excluded_replicates", small_excluded as f64);
        let small_u = median(small_kept.iter().map(|(_, r)| r.ks_u).collect());
        let small_v = median(small_kept.iter().map(|(_, r)| r.ks_v).collect());
        report.check_greater("trend_ks_u_decrease", small_u - ks_u, 0.0);
        report.check_greater("trend_ks_v_decrease", small_v - ks_v, 0.0);
    }
    Ok(report.finish())
}
