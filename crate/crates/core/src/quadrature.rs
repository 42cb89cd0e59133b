//! Gauss–Legendre quadrature with node doubling, and the arcsine edge
//! substitution used for densities carrying a `√((x−a)(b−x))` factor.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, Mutex, OnceLock};

use crate::{Error, Result};

pub const MIN_NODES: usize = 64;
pub const MAX_NODES: usize = 4096;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
#[derive(Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    fn compute(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi-style initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[lo, hi]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let pn1 = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * pn - pn1) / (x * x - 1.0);
    (pn, d)
}

/// Shared, lazily built rule with `n` nodes. Each rule is computed once.
pub fn rule(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&n) {
        return Arc::clone(r);
    }
    let computed = Arc::new(GaussLegendre::compute(n));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    Arc::clone(guard.entry(n).or_insert(computed))
}

/// Integrates with node doubling from [`MIN_NODES`] to [`MAX_NODES`] until two
/// successive estimates agree to `tol` (relative to `max(1, |I|)`).
pub fn integrate_refined<F: Fn(f64) -> f64>(lo: f64, hi: f64, tol: f64, f: F) -> Result<f64> {
    let mut n = MIN_NODES;
    let mut prev = rule(n).integrate(lo, hi, &f);
    while n < MAX_NODES {
        n *= 2;
        let next = rule(n).integrate(lo, hi, &f);
        if !next.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integral with {n} nodes")));
        }
        if (next - prev).abs() <= tol * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "no agreement to {tol:e} after {MAX_NODES} nodes (last two differ by {:e})",
        (rule(MAX_NODES).integrate(lo, hi, &f) - rule(MAX_NODES / 2).integrate(lo, hi, &f)).abs()
    )))
}

/// The substitution `x = c + h·sin θ` on `θ ∈ [−π/2, π/2]`, with `c = (a+b)/2`
/// and `h = (b−a)/2`. Under it `√((x−a)(b−x)) dx = h² cos²θ dθ`, which removes
/// the square-root edge behavior from the integrand.
#[derive(Debug, Clone, Copy)]
pub struct ArcsineEdge {
    center: f64,
    half_width: f64,
}

impl ArcsineEdge {
    pub fn new(a: f64, b: f64) -> Self {
        debug_assert!(a < b);
        Self {
            center: 0.5 * (a + b),
            half_width: 0.5 * (b - a),
        }
    }

    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn x(&self, theta: f64) -> f64 {
        self.center + self.half_width * theta.sin()
    }

    pub fn theta(&self, x: f64) -> f64 {
        ((x - self.center) / self.half_width).clamp(-1.0, 1.0).asin()
    }

    /// Integrand in θ for `∫ √((x−a)(b−x)) g(x) dx`.
    pub fn pulled_back<'a, G: Fn(f64) -> f64 + 'a>(&'a self, g: G) -> impl Fn(f64) -> f64 + 'a {
        move |theta| {
            let c = theta.cos();
            self.half_width * self.half_width * c * c * g(self.x(theta))
        }
    }

    /// `∫_a^b √((x−a)(b−x)) g(x) dx` with node doubling.
    pub fn integrate<G: Fn(f64) -> f64>(&self, tol: f64, g: G) -> Result<f64> {
        integrate_refined(-FRAC_PI_2, FRAC_PI_2, tol, self.pulled_back(g))
    }
}

const CDF_PANELS: usize = 256;
const PANEL_NODES: usize = 16;

/// Tabulated CDF of a density of the form `√((x−a)(b−x))·g(x)` on `[a, b]`,
/// stored as cumulative panel integrals in the arcsine variable.
#[derive(Clone)]
pub struct EdgeCdf {
    edge: ArcsineEdge,
    weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    cumulative: Vec<f64>,
    total: f64,
}

impl std::fmt::Debug for EdgeCdf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EdgeCdf")
            .field("edge", &self.edge)
            .field("total", &self.total)
            .finish_non_exhaustive()
    }
}

impl EdgeCdf {
    pub fn new(a: f64, b: f64, weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Result<Self> {
        let edge = ArcsineEdge::new(a, b);
        let panel_rule = rule(PANEL_NODES);
        let width = std::f64::consts::PI / CDF_PANELS as f64;
        let mut cumulative = Vec::with_capacity(CDF_PANELS + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        {
            let f = edge.pulled_back(|x| weight(x));
            for j in 0..CDF_PANELS {
                let lo = -FRAC_PI_2 + j as f64 * width;
                let piece = panel_rule.integrate(lo, lo + width, &f);
                if !piece.is_finite() || piece < -1e-14 {
                    return Err(Error::Quadrature(format!(
                        "CDF panel {j} has invalid mass {piece:e}"
                    )));
                }
                acc += piece.max(0.0);
                cumulative.push(acc);
            }
        }
        if acc <= 0.0 {
            return Err(Error::Quadrature("CDF has zero total mass".into()));
        }
        Ok(Self {
            edge,
            weight,
            cumulative,
            total: acc,
        })
    }

    /// Unnormalized mass captured by the table.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    fn panel_width() -> f64 {
        std::f64::consts::PI / CDF_PANELS as f64
    }

    fn mass_up_to_theta(&self, theta: f64) -> f64 {
        let width = Self::panel_width();
        let pos = ((theta + FRAC_PI_2) / width).floor();
        let j = (pos.max(0.0) as usize).min(CDF_PANELS - 1);
        let lo = -FRAC_PI_2 + j as f64 * width;
        let f = self.edge.pulled_back(|x| (self.weight)(x));
        self.cumulative[j] + rule(PANEL_NODES).integrate(lo, theta, f)
    }

    /// Normalized CDF at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.edge.lower() {
            return 0.0;
        }
        if x >= self.edge.upper() {
            return 1.0;
        }
        (self.mass_up_to_theta(self.edge.theta(x)) / self.total).clamp(0.0, 1.0)
    }

    /// Inverse CDF by bisection inside the bracketing panel, to `x_tol` in `x`.
    pub fn quantile(&self, u: f64, x_tol: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.total;
        let j = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&target).expect("finite cumulative mass"))
        {
            Ok(k) => return self.edge.x(-FRAC_PI_2 + k as f64 * Self::panel_width()),
            Err(k) => k.saturating_sub(1).min(CDF_PANELS - 1),
        };
        let width = Self::panel_width();
        let mut lo = -FRAC_PI_2 + j as f64 * width;
        let mut hi = lo + width;
        while self.edge.x(hi) - self.edge.x(lo) > x_tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.mass_up_to_theta(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.edge.x(0.5 * (lo + hi))
    }
}
