use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_graded, QuadratureConfig};

/// Law of an interarrival time `U` or a service time `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Uniform { lower: f64, upper: f64 },
    /// `masses[k] = P(· = k)` on `{0, 1, 2, …}`.
    Lattice { masses: Vec<f64> },
}

/// `e^{-40}`: mass of an exponential law beyond its effective support.
const EXP_SUPPORT_UNITS: f64 = 40.0;

impl DistributionSpec {
    pub fn validate(&self, name: &'static str) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid(name, reason));
        match self {
            DistributionSpec::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("exponential rate must be finite and > 0, got {rate}"));
                }
            }
            DistributionSpec::Deterministic { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return bad(format!("deterministic value must be finite and >= 0, got {value}"));
                }
            }
            DistributionSpec::Uniform { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && *lower >= 0.0 && lower < upper) {
                    return bad(format!("uniform bounds need 0 <= lower < upper, got [{lower}, {upper}]"));
                }
            }
            DistributionSpec::Lattice { masses } => {
                if masses.is_empty() {
                    return bad("lattice masses are empty".into());
                }
                if masses.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return bad("lattice masses must be finite and >= 0".into());
                }
                let s: f64 = masses.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return bad(format!("lattice masses sum to {s}, not 1"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => 1.0 / rate,
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Uniform { lower, upper } => 0.5 * (lower + upper),
            DistributionSpec::Lattice { masses } => {
                masses.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
            }
        }
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            DistributionSpec::Deterministic { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::Uniform { lower, upper } => {
                ((x - lower) / (upper - lower)).clamp(0.0, 1.0)
            }
            DistributionSpec::Lattice { masses } => {
                if x < 0.0 {
                    return 0.0;
                }
                let k = x.floor() as usize;
                masses[..masses.len().min(k + 1)].iter().sum::<f64>().min(1.0)
            }
        }
    }

    /// Atoms `(point, mass)` of a purely discrete law.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            DistributionSpec::Deterministic { value } => Some(vec![(*value, 1.0)]),
            DistributionSpec::Lattice { masses } => Some(
                masses
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(k, p)| (k as f64, *p))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Interval holding all but `e^{-40}` of a continuous law, and its
    /// density there.
    fn continuous_support(&self) -> Option<(f64, f64)> {
        match self {
            DistributionSpec::Exponential { rate } => Some((0.0, EXP_SUPPORT_UNITS / rate)),
            DistributionSpec::Uniform { lower, upper } => Some((*lower, *upper)),
            _ => None,
        }
    }

    fn density(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => rate * (-rate * x).exp(),
            DistributionSpec::Uniform { lower, upper } => 1.0 / (upper - lower),
            _ => 0.0,
        }
    }

    /// Points where the CDF is not smooth.
    fn kinks(&self) -> Vec<f64> {
        match self {
            DistributionSpec::Exponential { .. } => vec![0.0],
            DistributionSpec::Uniform { lower, upper } => vec![*lower, *upper],
            _ => Vec::new(),
        }
    }

    /// Draws one value. Deterministic laws consume no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Uniform { lower, upper } => {
                lower + (upper - lower) * rng.random::<f64>()
            }
            DistributionSpec::Lattice { masses } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for (k, p) in masses.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as f64;
                    }
                }
                // rounding left u above the accumulated total
                masses.iter().rposition(|p| *p > 0.0).unwrap_or(0) as f64
            }
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Exponential { rate } => write!(f, "exp:{rate}"),
            DistributionSpec::Deterministic { value } => write!(f, "det:{value}"),
            DistributionSpec::Uniform { lower, upper } => write!(f, "uniform:{lower},{upper}"),
            DistributionSpec::Lattice { masses } => {
                let parts: Vec<String> = masses
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(k, p)| format!("{k}={p}"))
                    .collect();
                write!(f, "lattice:{}", parts.join(","))
            }
        }
    }
}

/// Parses `exp:RATE`, `det:VALUE`, `uniform:LO,HI`, `lattice:K` (a point
/// mass at `K`) or `lattice:K=P,K=P,…`.
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::invalid("distribution", reason);
        let (family, rest) = s
            .split_once(':')
            .ok_or_else(|| bad(format!("expected FAMILY:PARAMS, got `{s}`")))?;
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("`{t}` is not a number in `{s}`")))
        };
        let spec = match family.trim() {
            "exp" | "exponential" => DistributionSpec::Exponential { rate: num(rest)? },
            "det" | "deterministic" => DistributionSpec::Deterministic { value: num(rest)? },
            "uniform" | "unif" => {
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| bad(format!("uniform needs LO,HI in `{s}`")))?;
                DistributionSpec::Uniform {
                    lower: num(a)?,
                    upper: num(b)?,
                }
            }
            "lattice" => {
                let mut pairs = Vec::new();
                for item in rest.split(',') {
                    let (k, p) = match item.split_once('=') {
                        Some((k, p)) => (k, num(p)?),
                        None => (item, 1.0),
                    };
                    let k: usize = k
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("`{k}` is not a lattice point in `{s}`")))?;
                    pairs.push((k, p));
                }
                let len = pairs.iter().map(|(k, _)| k + 1).max().unwrap_or(1);
                let mut masses = vec![0.0; len];
                for (k, p) in pairs {
                    masses[k] += p;
                }
                DistributionSpec::Lattice { masses }
            }
            other => return Err(bad(format!("unknown family `{other}`"))),
        };
        spec.validate("distribution")?;
        Ok(spec)
    }
}

/// Law of `X = V − U` for independent `U` (interarrival) and `V` (service).
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceLaw {
    pub u: DistributionSpec,
    pub v: DistributionSpec,
    quad: QuadratureConfig,
}

impl DifferenceLaw {
    pub fn new(u: DistributionSpec, v: DistributionSpec) -> Result<Self> {
        u.validate("u")?;
        v.validate("v")?;
        Ok(DifferenceLaw {
            u,
            v,
            quad: QuadratureConfig {
                target_rel_tol: 1e-12,
                ..Default::default()
            },
        })
    }

    /// `P(V − U ≤ x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if let Some(atoms) = self.u.atoms() {
            return Ok(atoms.iter().map(|(u, p)| p * self.v.cdf(x + u)).sum::<f64>().min(1.0));
        }
        // U is continuous from here on, so P(U ≥ y) = 1 − F_U(y)
        if let Some(atoms) = self.v.atoms() {
            return Ok(atoms
                .iter()
                .map(|(v, p)| p * (1.0 - self.u.cdf(v - x)))
                .sum::<f64>()
                .min(1.0));
        }
        if let (
            DistributionSpec::Exponential { rate: a },
            DistributionSpec::Exponential { rate: b },
        ) = (&self.u, &self.v)
        {
            let (a, b) = (*a, *b);
            return Ok(if x >= 0.0 {
                1.0 - a / (a + b) * (-b * x).exp()
            } else {
                b / (a + b) * (a * x).exp()
            });
        }
        // ∫ F_V(x + u) dF_U(u), split where either CDF has a kink
        let (lo, hi) = self.u.continuous_support().unwrap();
        let mut cuts = vec![lo, hi];
        cuts.extend(self.v.kinks().iter().map(|k| k - x));
        cuts.retain(|c| *c >= lo && *c <= hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            total += integrate_graded(b - a, &self.quad, |s, _| {
                let u = a + s;
                self.v.cdf(x + u) * self.u.density(u)
            })?
            .value;
        }
        Ok(total.clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_round_trip() {
        for s in ["exp:2", "det:0", "uniform:0.5,1.5", "lattice:1", "lattice:1=0.5,2=0.5"] {
            let d: DistributionSpec = s.parse().unwrap();
            let again: DistributionSpec = d.to_string().parse().unwrap();
            assert_eq!(d, again);
        }
        assert_eq!(
            "lattice:1".parse::<DistributionSpec>().unwrap(),
            DistributionSpec::Lattice {
                masses: vec![0.0, 1.0]
            }
        );
    }

    #[test]
    fn parse_rejects_bad_input() {
        for s in ["exp", "exp:-1", "uniform:2,1", "lattice:1=0.3", "gamma:2", "det:x"] {
            assert!(s.parse::<DistributionSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn means_and_cdfs() {
        let e = DistributionSpec::Exponential { rate: 2.0 };
        assert_eq!(e.mean(), 0.5);
        assert_relative_eq!(e.cdf(1.0), 1.0 - (-2f64).exp(), max_relative = 1e-15);
        let l = DistributionSpec::Lattice {
            masses: vec![0.0, 0.5, 0.5],
        };
        assert_eq!((l.cdf(0.9), l.cdf(1.0), l.cdf(7.0)), (0.0, 0.5, 1.0));
        assert_eq!(l.mean(), 1.5);
    }

    #[test]
    fn lattice_sampling_frequencies() {
        let l = DistributionSpec::Lattice {
            masses: vec![0.2, 0.0, 0.8],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let twos = (0..n).filter(|_| l.sample(&mut rng) == 2.0).count();
        assert!((twos as f64 / n as f64 - 0.8).abs() < 0.01);
    }

    #[test]
    fn difference_law_cases_agree_with_closed_forms() {
        let exp1 = DistributionSpec::Exponential { rate: 1.0 };
        let zero = DistributionSpec::Deterministic { value: 0.0 };
        let d = DifferenceLaw::new(zero, exp1.clone()).unwrap();
        assert_relative_eq!(d.cdf(2.0).unwrap(), 1.0 - (-2f64).exp(), max_relative = 1e-15);
        assert_eq!(d.cdf(-0.1).unwrap(), 0.0);

        // exp(a) − exp(b) through the quadrature branch vs the closed form
        let u = DistributionSpec::Exponential { rate: 1.5 };
        let closed = DifferenceLaw::new(u.clone(), exp1.clone()).unwrap();
        let unif = DistributionSpec::Uniform {
            lower: 0.0,
            upper: 2.0,
        };
        let mixed = DifferenceLaw::new(unif.clone(), exp1).unwrap();
        for x in [-1.5, -0.2, 0.0, 0.3, 2.0] {
            let c = closed.cdf(x).unwrap();
            assert!((0.0..=1.0).contains(&c));
            // uniform U on [0,2], V ~ Exp(1): P(V ≤ x + U)
            let expect = if x >= 0.0 {
                1.0 - (-x).exp() * (1.0 - (-2f64).exp()) / 2.0
            } else {
                let lo = -x;
                ((2.0 - lo) - (-(lo + x)).exp() + (-(2.0 + x)).exp()) / 2.0
            };
            assert!((mixed.cdf(x).unwrap() - expect).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn deterministic_service_reflects_interarrival() {
        let d = DifferenceLaw::new(
            DistributionSpec::Uniform {
                lower: 0.0,
                upper: 2.0,
            },
            DistributionSpec::Deterministic { value: 1.0 },
        )
        .unwrap();
        // X = 1 − U is uniform on [−1, 1]
        for x in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            assert_relative_eq!(d.cdf(x).unwrap(), (x + 1.0) / 2.0, epsilon = 1e-15);
        }
    }
}
