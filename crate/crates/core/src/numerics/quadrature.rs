//! Composite Gauss–Legendre quadrature for weighted integrals on `[0, 1]`.
//!
//! The integrals behind the stationary laws all carry the weight
//! `γ(1−s)^{γ−1}`, which is singular at `s = 1` when `γ < 1` and packs
//! essentially all of its mass into an `O(γ)` neighbourhood of `s = 1` when
//! `γ` is small. The substitution `u = (1−s)^γ` turns the weight into the
//! Lebesgue measure, leaving a bounded integrand `g(1 − u^{1/γ})`. That
//! integrand still has a boundary layer at `u → 1` (width `O(γ)`) and a
//! fractional-power kink at `u → 0` (for `γ > 1`), so the Gauss–Legendre
//! rule is applied on panels graded geometrically toward both endpoints and
//! refined by doubling the number of nodes per panel.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Number of dyadic grading levels toward each endpoint.
const GRADING_DEPTH: i32 = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Gauss–Legendre nodes per panel on the first pass.
    pub node_count: usize,
    pub target_rel_tol: f64,
    /// Maximum number of node doublings.
    pub max_refinements: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            node_count: 16,
            target_rel_tol: 1e-13,
            max_refinements: 6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_count < 8 {
            return Err(Error::invalid(
                "node_count",
                format!("must be >= 8, got {}", self.node_count),
            ));
        }
        if !(self.target_rel_tol >= 100.0 * f64::EPSILON) {
            return Err(Error::invalid(
                "target_rel_tol",
                format!(
                    "must be >= 100 * machine epsilon, got {}",
                    self.target_rel_tol
                ),
            ));
        }
        if self.max_refinements == 0 {
            return Err(Error::invalid("max_refinements", "must be >= 1"));
        }
        Ok(())
    }
}

/// A quadrature value together with its error estimate (difference between
/// the last two refinement levels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug)]
pub(crate) struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    fn compute(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub(crate) fn get(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
            .clone()
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Panel of the graded partition of `[0, len]`. Upper panels are stored in
/// the reflected coordinate `d = len − x` so that nodes close to the right
/// end keep full relative precision in `d`.
#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    reflected: bool,
}

fn graded_panels(len: f64) -> Vec<Panel> {
    let half = 0.5 * len;
    let mut panels = Vec::with_capacity(2 * GRADING_DEPTH as usize + 2);
    let innermost = len * 2f64.powi(-GRADING_DEPTH);
    for reflected in [false, true] {
        panels.push(Panel {
            lo: 0.0,
            hi: innermost,
            reflected,
        });
        for j in (1..GRADING_DEPTH).rev() {
            panels.push(Panel {
                lo: len * 2f64.powi(-j - 1),
                hi: len * 2f64.powi(-j),
                reflected,
            });
        }
        // [len/4, len/2] is the last panel on each side; j = 1 covers it.
        debug_assert!((panels.last().unwrap().hi - half).abs() <= 1e-15 * len.max(1.0));
    }
    panels
}

/// One pass of the graded composite rule with `n` nodes per panel.
///
/// `f(x, d, out)` receives the abscissa `x ∈ [0, len]`, its complement
/// `d = len − x` (both accurate to full relative precision), and adds the
/// integrand components into `out` (it must *assign*, the caller zeroes).
/// Returns per-component sums and sums of absolute values.
fn graded_pass<F>(len: f64, n: usize, dim: usize, f: &F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(f64, f64, &mut [f64]),
{
    let rule = GaussLegendre::get(n);
    let mut sum = vec![0.0; dim];
    let mut abs = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    for panel in graded_panels(len) {
        let mid = 0.5 * (panel.lo + panel.hi);
        let rad = 0.5 * (panel.hi - panel.lo);
        for (&t, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
            let y = mid + rad * t;
            let (x, d) = if panel.reflected {
                (len - y, y)
            } else {
                (y, len - y)
            };
            buf.iter_mut().for_each(|b| *b = 0.0);
            f(x, d, &mut buf);
            let wr = w * rad;
            for ((s, a), b) in sum.iter_mut().zip(abs.iter_mut()).zip(buf.iter()) {
                *s += wr * b;
                *a += wr * b.abs();
            }
        }
    }
    (sum, abs)
}

/// Integrates a vector-valued function over `[0, len]` on the graded
/// partition, doubling nodes until every component meets the relative
/// tolerance (measured against the integral of its absolute value).
pub(crate) fn integrate_graded_vec<F>(
    len: f64,
    dim: usize,
    cfg: &QuadratureConfig,
    f: F,
) -> Result<Vec<Quadrature>>
where
    F: Fn(f64, f64, &mut [f64]),
{
    cfg.validate()?;
    let mut n = cfg.node_count;
    let (mut prev, _) = graded_pass(len, n, dim, &f);
    let mut worst = f64::INFINITY;
    for _ in 0..cfg.max_refinements {
        n *= 2;
        let (cur, abs) = graded_pass(len, n, dim, &f);
        worst = 0.0;
        let mut ok = true;
        for i in 0..dim {
            let err = (cur[i] - prev[i]).abs();
            let scale = abs[i];
            let rel = if scale > 0.0 { err / scale } else { 0.0 };
            if !rel.is_finite() {
                return Err(Error::NonConvergence {
                    what: "quadrature",
                    achieved: f64::INFINITY,
                    target: cfg.target_rel_tol,
                });
            }
            worst = worst.max(rel);
            if rel > cfg.target_rel_tol {
                ok = false;
            }
        }
        if ok {
            return Ok(cur
                .iter()
                .zip(prev.iter())
                .map(|(&c, &p)| Quadrature {
                    value: c,
                    error: (c - p).abs(),
                })
                .collect());
        }
        prev = cur;
    }
    Err(Error::NonConvergence {
        what: "quadrature",
        achieved: worst,
        target: cfg.target_rel_tol,
    })
}

/// Maps the node `(u, 1−u)` of the substituted variable on `[0, c]`, where
/// `c = (1 − s0)^γ`, back to `(s, 1 − s)` with `1 − s = u^{1/γ}`.
#[inline]
fn unsubstitute(u: f64, c_minus_u: f64, ln_c: f64, c: f64, gamma: f64) -> (f64, f64) {
    let ln_u = if u <= 0.5 * c {
        u.ln()
    } else {
        ln_c + (-c_minus_u / c).ln_1p()
    };
    let e = ln_u / gamma;
    let one_minus_s = e.exp();
    let s = if one_minus_s > 0.5 {
        -e.exp_m1()
    } else {
        1.0 - one_minus_s
    };
    (s, one_minus_s)
}

/// `∫_{s0}^{1} γ(1−s)^{γ−1} g(s, 1−s) ds` for each component of `g`.
///
/// For `γ < 1` the substitution `u = (1−s)^γ` absorbs the singular weight.
/// For `γ ≥ 1` the weight is bounded and the integral is taken in `s`
/// directly; substituting there would trade it for a `u^{1/γ}` kink at
/// `u = 0` that no panel resolves once `g` concentrates near `s = 1`.
pub(crate) fn gamma_weight_vec<G>(
    gamma: f64,
    s0: f64,
    dim: usize,
    cfg: &QuadratureConfig,
    g: G,
) -> Result<Vec<Quadrature>>
where
    G: Fn(f64, f64, &mut [f64]),
{
    require_positive("gamma", gamma)?;
    debug_assert!((0.0..1.0).contains(&s0));
    if gamma >= 1.0 {
        let len = 1.0 - s0;
        return integrate_graded_vec(len, dim, cfg, |x, oms, out| {
            let s = if oms < 0.5 { 1.0 - oms } else { s0 + x };
            g(s, oms, out);
            let w = if gamma == 1.0 { 1.0 } else { gamma * oms.powf(gamma - 1.0) };
            out.iter_mut().for_each(|o| *o *= w);
        });
    }
    let ln_c = gamma * (-s0).ln_1p();
    let c = ln_c.exp();
    integrate_graded_vec(c, dim, cfg, |u, cmu, out| {
        let (s, oms) = unsubstitute(u, cmu, ln_c, c, gamma);
        g(s, oms, out);
    })
}

/// `∫₀¹ γ(1−s)^{γ−1} g(s) ds`, computed after the substitution
/// `u = (1−s)^γ` on a graded Gauss–Legendre partition.
pub fn quad_gamma_weight<G>(g: G, gamma: f64, cfg: &QuadratureConfig) -> Result<Quadrature>
where
    G: Fn(f64) -> f64,
{
    quad_gamma_weight_with(|s, _| g(s), gamma, cfg)
}

/// Same as [`quad_gamma_weight`], but `g` also receives `1 − s` computed
/// without cancellation.
pub fn quad_gamma_weight_with<G>(g: G, gamma: f64, cfg: &QuadratureConfig) -> Result<Quadrature>
where
    G: Fn(f64, f64) -> f64,
{
    let v = gamma_weight_vec(gamma, 0.0, 1, cfg, |s, oms, out| out[0] = g(s, oms))?;
    Ok(v[0])
}

/// Plain integral `∫₀^len f(x) dx` on the graded partition; `f` receives
/// `(x, len − x)`.
pub fn integrate_graded<F>(len: f64, cfg: &QuadratureConfig, f: F) -> Result<Quadrature>
where
    F: Fn(f64, f64) -> f64,
{
    let v = integrate_graded_vec(len, 1, cfg, |x, d, out| out[0] = f(x, d))?;
    Ok(v[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::get(16);
        let sum_w: f64 = rule.weights.iter().sum();
        assert_relative_eq!(sum_w, 2.0, epsilon = 1e-14);
        // ∫_{-1}^{1} x^30 dx = 2/31
        let v: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(30))
            .sum();
        assert_relative_eq!(v, 2.0 / 31.0, max_relative = 1e-13);
    }

    #[test]
    fn unit_weight_integrates_to_one() {
        let cfg = QuadratureConfig::default();
        for gamma in [1e-6, 0.1, 0.5, 1.0, 2.0, 5.0, 40.0] {
            let q = quad_gamma_weight(|_| 1.0, gamma, &cfg).unwrap();
            assert_relative_eq!(q.value, 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn exponential_with_unit_gamma() {
        let q = quad_gamma_weight(|s| (-s).exp(), 1.0, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(q.value, 1.0 - (-1.0f64).exp(), max_relative = 1e-13);
        assert!(q.error < 1e-12);
    }

    #[test]
    fn linear_with_gamma_two() {
        let q = quad_gamma_weight(|s| s, 2.0, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(q.value, 1.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn beta_function_for_singular_weight() {
        // ∫ γ(1−s)^{γ−1} s^n ds = γ B(n+1, γ) = n! Γ(γ+1) / Γ(n+γ+1)
        let cfg = QuadratureConfig::default();
        for (gamma, n) in [(0.1, 3), (0.3, 10), (2.5, 7), (1e-4, 2)] {
            let v = quad_gamma_weight(|s| s.powi(n), gamma, &cfg).unwrap().value;
            let mut expect = 1.0;
            for k in 1..=n {
                expect *= k as f64 / (k as f64 + gamma);
            }
            assert_relative_eq!(v, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_gamma_and_config() {
        let cfg = QuadratureConfig::default();
        assert!(matches!(
            quad_gamma_weight(|_| 1.0, 0.0, &cfg),
            Err(Error::InvalidParam { name: "gamma", .. })
        ));
        assert!(quad_gamma_weight(|_| 1.0, -1.0, &cfg).is_err());
        let bad = QuadratureConfig {
            node_count: 4,
            ..cfg
        };
        assert!(quad_gamma_weight(|_| 1.0, 1.0, &bad).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        // A jump inside a panel defeats node doubling at this tolerance.
        let cfg = QuadratureConfig {
            node_count: 8,
            target_rel_tol: 1e-12,
            max_refinements: 1,
        };
        let r = quad_gamma_weight(|s| if s < 0.3 { 0.0 } else { 1.0 }, 1.0, &cfg);
        assert!(matches!(r, Err(Error::NonConvergence { .. })), "{r:?}");
    }
}
