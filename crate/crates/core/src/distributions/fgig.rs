use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{edge_sqrt, invert_params, solve_support, FreeGigParams, SupportInterval};
use crate::combinatorics::{CumulantSequence, MomentSequence};
use crate::quadrature::{ArcsineEdge, EdgeCdf};
use crate::transforms::TruncatedSeries;
use crate::{Error, Result};

/// Largest `|k|` accepted by [`FreeGig::moment`].
pub const MOMENT_POWER_CAP: i32 = 32;
const MOMENT_TOL: f64 = 1e-12;
const SAMPLE_X_TOL: f64 = 1e-10;

/// The constant `γ` of the R-transform; `−γ` is `∫ x⁻¹ dμ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConst {
    pub value: f64,
}

/// `γ = (α²ab + β²/(ab) − 2αβ((a+b)/√(ab) − 1) − (λ−1)²) / (4β)`.
pub fn gamma_const(p: &FreeGigParams, s: &SupportInterval) -> GammaConst {
    let (l, al, be) = (p.lambda, p.alpha, p.beta);
    let ab = s.a * s.b;
    let value =
        (al * al * ab + be * be / ab - 2.0 * al * be * ((s.a + s.b) / ab.sqrt() - 1.0) - (l - 1.0).powi(2)) / (4.0 * be);
    GammaConst { value }
}

pub fn fgig_density(p: &FreeGigParams, s: &SupportInterval, x: f64) -> f64 {
    if x <= s.a || x >= s.b {
        return 0.0;
    }
    debug_assert!(x > 0.0);
    ((x - s.a) * (s.b - x)).sqrt() * edge_weight(p, s.geometric_mean(), x)
}

/// Density divided by `√((x−a)(b−x))`.
fn edge_weight(p: &FreeGigParams, sqrt_ab: f64, x: f64) -> f64 {
    (p.alpha / x + p.beta / (sqrt_ab * x * x)) / (2.0 * PI)
}

/// `G(z) = (αz² − (λ−1)z − β − (αz + β/√(ab))·√((z−a)(z−b))) / (2z²)`.
///
/// The sign in front of the square-root term is the one for which `G` is the
/// Cauchy transform of the density (checked against quadrature and Stieltjes
/// inversion in the tests).
pub fn fgig_cauchy(p: &FreeGigParams, s: &SupportInterval, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && s.contains(z.re) {
        return Err(Error::Singularity {
            z,
            what: "fGIG Cauchy transform on its support",
        });
    }
    if z.norm() < 1e-8 * s.b {
        return Err(Error::Singularity {
            z,
            what: "fGIG Cauchy transform formula at the origin",
        });
    }
    let (l, al, be) = (p.lambda, p.alpha, p.beta);
    let root = edge_sqrt(z, s.a, s.b);
    let num = al * z * z - (l - 1.0) * z - be - (al * z + be / s.geometric_mean()) * root;
    Ok(num / (2.0 * z * z))
}

/// Branch data for the square root in the R-transform. The discriminant
/// `D(w) = (α + w(λ−1))² − 4βw(w−α)(w−γ)` factors as `−4β(w−w₀)²(w−w₁)`, so
/// `√D = σ(w−w₀)·√(4β(w₁−w))` is single-valued off the cut `[w₁, ∞)`.
#[derive(Debug, Clone, Copy)]
struct RBranch {
    w0: f64,
    w1: f64,
    sigma: f64,
}

fn discriminant_coefficients(p: &FreeGigParams, gamma: f64) -> [f64; 4] {
    let (l, al, be) = (p.lambda, p.alpha, p.beta);
    [
        al * al,
        2.0 * al * (l - 1.0) - 4.0 * be * al * gamma,
        (l - 1.0).powi(2) + 4.0 * be * (al + gamma),
        -4.0 * be,
    ]
}

fn eval_cubic(c: &[f64; 4], w: f64) -> f64 {
    ((c[3] * w + c[2]) * w + c[1]) * w + c[0]
}

impl RBranch {
    fn new(p: &FreeGigParams, gamma: f64) -> Result<Self> {
        let c = discriminant_coefficients(p, gamma);
        // The double root is a root of D'(w) = c₁ + 2c₂w + 3c₃w².
        let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return Err(Error::Domain("R-transform discriminant has no real critical point".into()));
        }
        let sq = disc.sqrt();
        // Stable quadratic roots.
        let q = -0.5 * (qb + qb.signum() * sq);
        let mut candidates = vec![q / qa];
        if q != 0.0 {
            candidates.push(qc / q);
        }
        let w0 = candidates
            .into_iter()
            .min_by(|x, y| eval_cubic(&c, *x).abs().total_cmp(&eval_cubic(&c, *y).abs()))
            .expect("at least one candidate");
        let w1 = c[2] / (4.0 * p.beta) - 2.0 * w0;
        let scale = c.iter().map(|v| v.abs()).sum::<f64>() * (1.0 + w0.abs()).powi(3);
        let constant = 4.0 * p.beta * w1 * w0 * w0;
        if eval_cubic(&c, w0).abs() > 1e-9 * scale || (constant - c[0]).abs() > 1e-8 * c[0] || w1 <= 0.0 {
            return Err(Error::Domain(format!(
                "R-transform discriminant does not factor as a double root times a linear term (w0 = {w0}, w1 = {w1})"
            )));
        }
        let sigma = (p.alpha / (-w0 * (4.0 * p.beta * w1).sqrt())).signum();
        Ok(Self { w0, w1, sigma })
    }

    fn sqrt_discriminant(&self, beta: f64, w: Complex64) -> Complex64 {
        self.sigma * (w - self.w0) * (4.0 * beta * (self.w1 - w)).sqrt()
    }
}

/// A solved `μ(λ,α,β)`: support, `γ`, R-transform branch, and a lazily built
/// CDF table for sampling.
#[derive(Debug, Clone)]
pub struct FreeGig {
    params: FreeGigParams,
    support: SupportInterval,
    gamma: GammaConst,
    branch: Result<RBranch, String>,
    cdf: OnceLock<EdgeCdf>,
}

impl FreeGig {
    pub fn new(params: FreeGigParams) -> Result<Self> {
        let support = solve_support(&params)?;
        let gamma = gamma_const(&params, &support);
        let branch = RBranch::new(&params, gamma.value).map_err(|e| e.to_string());
        Ok(Self {
            params,
            support,
            gamma,
            branch,
            cdf: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &FreeGigParams {
        &self.params
    }

    pub fn support(&self) -> &SupportInterval {
        &self.support
    }

    pub fn gamma(&self) -> GammaConst {
        self.gamma
    }

    /// The law of `X⁻¹`.
    pub fn inverse(&self) -> Result<Self> {
        Self::new(invert_params(self.params))
    }

    pub fn density(&self, x: f64) -> f64 {
        fgig_density(&self.params, &self.support, x)
    }

    pub fn cauchy(&self, z: Complex64) -> Result<Complex64> {
        fgig_cauchy(&self.params, &self.support, z)
    }

    /// `r(0)`, the first free cumulant: `(λ − βγ)/α`.
    pub fn mean(&self) -> f64 {
        (self.params.lambda - self.params.beta * self.gamma.value) / self.params.alpha
    }

    fn branch(&self) -> Result<RBranch> {
        self.branch.clone().map_err(Error::Domain)
    }

    /// Radius of the disk on which [`FreeGig::rtransform`] is declared
    /// analytic: `0.9·min(w₁, α)`.
    pub fn r_radius(&self) -> Result<f64> {
        Ok(0.9 * self.branch()?.w1.min(self.params.alpha))
    }

    /// `r(w) = (−α + w(λ+1) + √D(w)) / (2w(α−w))`, evaluated in the
    /// equivalent rationalized form `2(λ + β(w−γ)) / (α − w(λ+1) + √D(w))`,
    /// which has no removable singularity at `w = 0`.
    pub fn rtransform(&self, w: Complex64) -> Result<Complex64> {
        let branch = self.branch()?;
        if w.im == 0.0 && w.re >= branch.w1 {
            return Err(Error::Singularity {
                z: w,
                what: "fGIG R-transform on its branch cut",
            });
        }
        let (l, al, be) = (self.params.lambda, self.params.alpha, self.params.beta);
        let den = al - w * (l + 1.0) + branch.sqrt_discriminant(be, w);
        if den.norm() <= 1e-13 * (al + w.norm() * (l.abs() + 1.0)) {
            return Err(Error::Singularity {
                z: w,
                what: "fGIG R-transform pole",
            });
        }
        Ok(2.0 * (l + be * (w - self.gamma.value)) / den)
    }

    /// Taylor coefficients of `r` at 0, i.e. the free cumulants `R₁..R_order`.
    pub fn r_series(&self, order: usize) -> Result<CumulantSequence> {
        if order == 0 {
            return Err(Error::Parameter("series order must be >= 1".into()));
        }
        let (l, al, be) = (self.params.lambda, self.params.alpha, self.params.beta);
        let n = order - 1;
        let disc = TruncatedSeries::new(discriminant_coefficients(&self.params, self.gamma.value).to_vec())?;
        let root = disc.sqrt(n)?;
        let den = root.add(&TruncatedSeries::new(vec![al, -(l + 1.0)])?, n);
        let num = TruncatedSeries::new(vec![2.0 * (l - be * self.gamma.value), 2.0 * be])?;
        let r = num.div(&den, n)?;
        CumulantSequence::new(r.coefficients().to_vec())
    }

    /// `∫ x^k dμ` for `|k| ≤ 32`, by Gauss–Legendre in the arcsine variable.
    pub fn moment(&self, k: i32) -> Result<f64> {
        if k.abs() > MOMENT_POWER_CAP {
            return Err(Error::Parameter(format!("moment power {k} exceeds ±{MOMENT_POWER_CAP}")));
        }
        let edge = ArcsineEdge::new(self.support.a, self.support.b);
        let s = self.support.geometric_mean();
        edge.integrate(MOMENT_TOL, |x| edge_weight(&self.params, s, x) * x.powi(k))
    }

    /// `m₁..m_order`.
    pub fn moments(&self, order: usize) -> Result<MomentSequence> {
        let m = (1..=order as i32).map(|k| self.moment(k)).collect::<Result<Vec<_>>>()?;
        MomentSequence::new(m)
    }

    fn cdf_table(&self) -> Result<&EdgeCdf> {
        if let Some(t) = self.cdf.get() {
            return Ok(t);
        }
        let (p, s) = (self.params, self.support.geometric_mean());
        let table = EdgeCdf::new(self.support.a, self.support.b, Arc::new(move |x| edge_weight(&p, s, x)))?;
        Ok(self.cdf.get_or_init(|| table))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.cdf_table()?.cdf(x))
    }

    /// `x` with `F(x) = u`, to `1e−10` in `x`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        Ok(self.cdf_table()?.quantile(u, SAMPLE_X_TOL))
    }

    /// `n` i.i.d. draws by inverting the tabulated CDF.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let table = self.cdf_table()?;
        Ok((0..n).map(|_| table.quantile(rng.random::<f64>(), SAMPLE_X_TOL)).collect())
    }
}

pub fn fgig_rtransform(p: &FreeGigParams, s: &SupportInterval, z: Complex64) -> Result<Complex64> {
    let gamma = gamma_const(p, s);
    let law = FreeGig {
        params: *p,
        support: *s,
        gamma,
        branch: RBranch::new(p, gamma.value).map_err(|e| e.to_string()),
        cdf: OnceLock::new(),
    };
    law.rtransform(z)
}

pub fn fgig_moment(p: &FreeGigParams, k: i32) -> Result<f64> {
    FreeGig::new(*p)?.moment(k)
}

pub fn sample_spectrum<R: Rng + ?Sized>(p: &FreeGigParams, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    FreeGig::new(*p)?.sample(n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::cumulants_from_moments;
    use crate::quadrature::rule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn law(l: f64, a: f64, b: f64) -> FreeGig {
        FreeGig::new(FreeGigParams::new(l, a, b).unwrap()).unwrap()
    }

    fn sweep() -> Vec<FreeGig> {
        vec![law(2.0, 1.0, 1.0), law(3.0, 2.0, 0.5), law(1.5, 1.0, 2.0)]
    }

    #[test]
    fn density_zero_outside_and_at_edges() {
        let g = law(2.0, 1.0, 1.0);
        let s = g.support();
        for x in [s.a, s.b, s.a - 0.1, s.b + 1.0, -1.0] {
            assert_eq!(g.density(x), 0.0);
        }
        assert!(g.density(0.5 * (s.a + s.b)) > 0.0);
    }

    #[test]
    fn normalization_with_fixed_rule() {
        let g = law(2.0, 1.0, 1.0);
        let edge = ArcsineEdge::new(g.support().a, g.support().b);
        let s = g.support().geometric_mean();
        let mass = rule(1024).integrate(-PI / 2.0, PI / 2.0, edge.pulled_back(|x| edge_weight(g.params(), s, x)));
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gamma_symmetric_case() {
        let g = law(0.0, 1.0, 1.0);
        assert!((g.gamma().value + 1.25).abs() < 1e-12);
    }

    #[test]
    fn gamma_is_minus_inverse_mean() {
        for g in sweep() {
            assert!((g.gamma().value + g.moment(-1).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn gamma_reproducible() {
        let a = law(2.0, 1.0, 1.0).gamma().value;
        let b = law(2.0, 1.0, 1.0).gamma().value;
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn moments_basic() {
        let g = law(2.0, 1.0, 1.0);
        assert!((g.moment(0).unwrap() - 1.0).abs() < 1e-9);
        let sym = law(0.0, 1.0, 1.0);
        assert!((sym.moment(1).unwrap() - sym.moment(-1).unwrap()).abs() < 1e-9);
        assert!(g.moment(33).is_err());
        assert!((g.moment(1).unwrap() - g.mean()).abs() < 1e-10);
    }

    #[test]
    fn cauchy_matches_quadrature() {
        for g in sweep() {
            let s = *g.support();
            let edge = ArcsineEdge::new(s.a, s.b);
            let sq = s.geometric_mean();
            for k in 0..20 {
                let z = Complex64::new(-1.0 + 0.5 * k as f64, 0.1 + 0.1 * (k % 20) as f64);
                let re = edge
                    .integrate(1e-13, |x| edge_weight(g.params(), sq, x) * (z.re - x) / (z - x).norm_sqr())
                    .unwrap();
                let im = edge
                    .integrate(1e-13, |x| edge_weight(g.params(), sq, x) * (-z.im) / (z - x).norm_sqr())
                    .unwrap();
                let expected = Complex64::new(re, im);
                let got = g.cauchy(z).unwrap();
                assert!((got - expected).norm() < 1e-6 * expected.norm(), "{z}: {got} vs {expected}");
                assert!(got.im < 0.0);
            }
        }
    }

    #[test]
    fn cauchy_asymptotics_and_errors() {
        let g = law(2.0, 1.0, 1.0);
        let z = Complex64::new(0.0, 1e6);
        let zg = z * g.cauchy(z).unwrap();
        // zG(z) = 1 + m₁/z + O(z⁻²): the real part is already within 1e−6,
        // the imaginary part is ≈ −m₁/y.
        assert!((zg.re - 1.0).abs() < 1e-6, "{zg}");
        assert!((zg.im * z.im + g.mean()).abs() < 1e-4, "{zg}");
        let far = Complex64::new(0.0, 1e7);
        assert!((far * g.cauchy(far).unwrap() - 1.0).norm() < 1e-6);
        let mid = 0.5 * (g.support().a + g.support().b);
        assert!(g.cauchy(Complex64::new(mid, 0.0)).is_err());
        assert!(g.cauchy(Complex64::new(0.0, 0.0)).is_err());
        let near = g.cauchy(Complex64::new(mid, 1e-8)).unwrap();
        assert!((-near.im / PI - g.density(mid)).abs() < 1e-5);
    }

    #[test]
    fn r_at_origin_is_mean() {
        for g in sweep() {
            let r0 = g.rtransform(Complex64::new(0.0, 0.0)).unwrap();
            assert!((r0.re - g.moment(1).unwrap()).abs() < 1e-7);
            assert!(r0.im.abs() < 1e-15);
        }
    }

    #[test]
    fn cauchy_of_k_is_identity_on_small_circle() {
        for g in sweep() {
            for j in 0..32 {
                let w = Complex64::from_polar(0.05, 2.0 * PI * j as f64 / 32.0);
                let z = g.rtransform(w).unwrap() + 1.0 / w;
                let back = g.cauchy(z).unwrap();
                assert!((back - w).norm() < 1e-8, "{w}: {back}");
            }
        }
    }

    #[test]
    fn k_of_cauchy_is_identity() {
        for g in sweep() {
            let s = *g.support();
            for k in 0..40 {
                let x = s.a - 2.0 + (s.b - s.a + 4.0) * k as f64 / 39.0;
                for y in [1e-3, 0.1, 1.0, 5.0] {
                    let z = Complex64::new(x, y);
                    let w = g.cauchy(z).unwrap();
                    let back = g.rtransform(w).unwrap() + 1.0 / w;
                    assert!((back - z).norm() < 1e-8 * (1.0 + z.norm()), "{z}: {back}");
                }
            }
        }
    }

    #[test]
    fn r_series_matches_cumulants_of_moments() {
        for g in sweep() {
            let r = g.r_series(8).unwrap();
            let m = g.moments(8).unwrap();
            let expected = cumulants_from_moments(&m, 8).unwrap();
            for n in 1..=8 {
                let scale = expected.get(n).abs().max(1.0);
                assert!((r.get(n) - expected.get(n)).abs() < 1e-6 * scale, "{n}");
            }
        }
    }

    #[test]
    fn r_pole_and_cut_are_errors() {
        let g = law(2.0, 1.0, 1.0);
        let w1 = g.branch().unwrap().w1;
        assert!(g.rtransform(Complex64::new(w1 + 0.5, 0.0)).is_err());
        assert!(g.r_radius().unwrap() > 0.05);
    }

    #[test]
    fn inverse_law_pushforward() {
        let g = law(2.0, 1.0, 3.0);
        let inv = g.inverse().unwrap();
        let s = *inv.support();
        for k in 0..200 {
            let y = s.a + (s.b - s.a) * (k as f64 + 0.5) / 200.0;
            let lhs = g.density(1.0 / y) / (y * y);
            assert!((lhs - inv.density(y)).abs() < 1e-8);
        }
    }

    #[test]
    fn small_beta_matches_mp_density() {
        let g = law(2.0, 1.0, 1e-6);
        let mp = super::super::MarchenkoPastur::new(super::super::MarchenkoPasturParams::new(2.0, 1.0).unwrap());
        let (a, b) = (g.support().a, g.support().b);
        for k in 1..50 {
            let x = a + (b - a) * k as f64 / 50.0;
            assert!((g.density(x) - mp.density(x).0).abs() < 1e-3);
        }
    }

    #[test]
    fn samples_in_support_deterministic() {
        let g = law(2.0, 1.0, 1.0);
        let draw = |seed| g.sample(500, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let x = draw(3);
        assert!(x.iter().all(|v| g.support().contains(*v)));
        let y = draw(3);
        assert_eq!(
            x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            y.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn sample_mean_within_three_standard_errors() {
        let g = law(2.0, 1.0, 1.0);
        let n = 1_000_000;
        let x = g.sample(n, &mut ChaCha20Rng::seed_from_u64(11)).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = g.moment(2).unwrap() - g.moment(1).unwrap().powi(2);
        let se = (var / n as f64).sqrt();
        assert!((mean - g.moment(1).unwrap()).abs() < 3.0 * se);
    }

    #[test]
    fn cdf_monotone_and_quantile_roundtrip() {
        let g = law(1.5, 1.0, 2.0);
        let s = *g.support();
        let mut prev = 0.0;
        for k in 0..=100 {
            let x = s.a + (s.b - s.a) * k as f64 / 100.0;
            let f = g.cdf(x).unwrap();
            assert!(f >= prev);
            prev = f;
        }
        for u in [0.01, 0.3, 0.5, 0.77, 0.99] {
            assert!((g.cdf(g.quantile(u).unwrap()).unwrap() - u).abs() < 1e-8);
        }
    }
}
