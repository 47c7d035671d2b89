use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Description of the mass beyond the last explicit entry of a [`Pmf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Tail {
    /// `π_k = ratio^{k−start} π_start` for every `k ≥ start`.
    ExactGeometric { ratio: f64, start: usize },
    /// The mass beyond the head is at most `mass_bound`.
    BoundedRemainder { mass_bound: f64 },
}

/// Stationary distribution on `{0, 1, 2, …}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub head: Vec<f64>,
    pub tail: Tail,
}

impl Pmf {
    pub fn point_mass_at_zero() -> Self {
        Pmf {
            head: vec![1.0],
            tail: Tail::BoundedRemainder { mass_bound: 0.0 },
        }
    }

    /// Geometric law `(1−ρ) ρ^k` with head `0..=n_max`.
    pub fn geometric(rho: f64, n_max: usize) -> Self {
        let mut head = Vec::with_capacity(n_max + 1);
        let mut p = 1.0 - rho;
        for _ in 0..=n_max {
            head.push(p);
            p *= rho;
        }
        Pmf {
            head,
            tail: Tail::ExactGeometric {
                ratio: rho,
                start: 0,
            },
        }
    }

    pub fn n_max(&self) -> usize {
        self.head.len() - 1
    }

    pub fn prob(&self, k: usize) -> f64 {
        if let Some(&p) = self.head.get(k) {
            return p;
        }
        match self.tail {
            Tail::ExactGeometric { ratio, .. } => {
                let last = *self.head.last().unwrap();
                last * ratio.powf((k - self.n_max()) as f64)
            }
            Tail::BoundedRemainder { .. } => 0.0,
        }
    }

    pub fn head_sum(&self) -> f64 {
        self.head.iter().sum()
    }

    /// Exact mass beyond `n_max` for geometric tails; 0 for bounded tails,
    /// whose remainder is not represented.
    pub fn tail_mass(&self) -> f64 {
        match self.tail {
            Tail::ExactGeometric { ratio, .. } => {
                if ratio == 0.0 {
                    0.0
                } else {
                    self.head.last().unwrap() * ratio / (1.0 - ratio)
                }
            }
            Tail::BoundedRemainder { .. } => 0.0,
        }
    }

    /// Upper bound on the mass beyond `n_max`.
    pub fn tail_bound(&self) -> f64 {
        match self.tail {
            Tail::ExactGeometric { .. } => self.tail_mass(),
            Tail::BoundedRemainder { mass_bound } => mass_bound,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.head_sum() + self.tail_mass()
    }

    /// `Σ_{j ≥ 1} π_j`, including a geometric tail in closed form.
    pub fn mass_above_zero(&self) -> f64 {
        self.head[1..].iter().sum::<f64>() + self.tail_mass()
    }

    pub fn mean(&self) -> f64 {
        let head: f64 = self.head.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        match self.tail {
            Tail::ExactGeometric { ratio, .. } if ratio > 0.0 => {
                // Σ_{j≥1} (n+j) p_n ρ^j
                let n = self.n_max() as f64;
                let pn = *self.head.last().unwrap();
                let s = ratio / (1.0 - ratio);
                head + pn * (n * s + s / (1.0 - ratio))
            }
            _ => head,
        }
    }

    /// Entries `0..=n`, reading geometric tails where needed.
    pub fn values_to(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|k| self.prob(k)).collect()
    }

    /// Total variation distance over `0..=n` plus any mass either side
    /// places beyond `n`.
    pub fn tv_distance(&self, other: &Pmf) -> f64 {
        let n = self.n_max().max(other.n_max());
        let a = self.values_to(n);
        let b = other.values_to(n);
        let head: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        let rest = |v: &[f64]| (1.0 - v.iter().sum::<f64>()).max(0.0);
        0.5 * (head + rest(&a) + rest(&b))
    }

    /// Largest absolute difference over both heads (and geometric tails).
    pub fn sup_distance(&self, other: &Pmf) -> f64 {
        let n = self.n_max().max(other.n_max());
        (0..=n)
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .fold(0.0, f64::max)
    }
}

/// Requested truncation: `n_max = None` picks the smallest index whose
/// certified tail mass is below `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub n_max: Option<usize>,
    pub eps: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            n_max: None,
            eps: 1e-12,
        }
    }
}

/// Hard cap on automatically chosen truncation indices.
pub const MAX_AUTO_N: usize = 2_000_000;

impl Truncation {
    pub fn fixed(n_max: usize) -> Self {
        Truncation {
            n_max: Some(n_max),
            ..Default::default()
        }
    }

    pub fn with_eps(eps: f64) -> Self {
        Truncation { n_max: None, eps }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid("eps", format!("must lie in (0, 1), got {}", self.eps)));
        }
        Ok(())
    }

    /// Resolves `n_max` against a certificate `bound(n) ≥ P(X > n)` that is
    /// non-increasing in `n`.
    pub fn resolve(&self, bound: impl Fn(usize) -> f64) -> Result<(usize, f64)> {
        self.validate()?;
        match self.n_max {
            Some(n) => {
                let b = bound(n);
                if b > self.eps {
                    Err(Error::TruncationTooSmall {
                        n_max: n,
                        bound: b,
                        eps: self.eps,
                    })
                } else {
                    Ok((n, b))
                }
            }
            None => {
                // exponential search then bisection
                let mut hi = 1usize;
                while bound(hi) >= self.eps {
                    hi *= 2;
                    if hi > MAX_AUTO_N {
                        return Err(Error::TruncationTooSmall {
                            n_max: MAX_AUTO_N,
                            bound: bound(MAX_AUTO_N),
                            eps: self.eps,
                        });
                    }
                }
                let mut lo = 0usize;
                if bound(0) < self.eps {
                    return Ok((0, bound(0)));
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if bound(mid) < self.eps {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok((hi, bound(hi)))
            }
        }
    }
}

/// `ρ^{n+1}`: tail of a geometric law on `{0, 1, …}` beyond `n`.
pub fn geometric_tail(rho: f64, n: usize) -> f64 {
    if rho <= 0.0 {
        0.0
    } else {
        ((n as f64 + 1.0) * rho.ln()).exp()
    }
}

/// Upper bound on `P(N > n)` for `N ~ Poisson(m)`: the first omitted term
/// times the geometric sum of the (decreasing) term ratios.
pub fn poisson_tail_bound(m: f64, n: usize) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    let k = n as f64 + 1.0;
    let ratio = m / (k + 1.0);
    if ratio >= 1.0 {
        return 1.0;
    }
    let ln_term = k * m.ln() - m - statrs::function::gamma::ln_gamma(k + 1.0);
    (ln_term.exp() / (1.0 - ratio)).min(1.0)
}
