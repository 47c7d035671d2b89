use num_complex::Complex64;

use crate::analytic::{Pmf, Tail};
use crate::error::{require_probability_open, Error, Result};

/// Weight `(1−q)^{j+1}` below which the lattice series stops.
pub const LATTICE_SERIES_TOL: f64 = 1e-15;

/// Law of the reset waiting time for `X ≥ 1` on the integers:
/// `π = q Σ_j (1−q)^j p_X^{∗j}` on `0..=n_max`, convolutions done exactly.
///
/// `masses[k] = P(X = k)`; `masses[0]` must be 0. The reported tail bound is
/// `1 − Σ head`, which dominates the true mass beyond `n_max` since every
/// omitted series term is non-negative.
pub fn lattice_wh(masses: &[f64], q: f64, n_max: usize) -> Result<Pmf> {
    require_probability_open("q", q)?;
    if masses.first().copied().unwrap_or(0.0) != 0.0 {
        return Err(Error::invalid("x", "lattice increment must be supported on {1, 2, ...}"));
    }
    if masses.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("x", "lattice masses must be finite and >= 0"));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("x", format!("lattice masses sum to {total}, not 1")));
    }
    let p: Vec<f64> = masses.iter().copied().take(n_max + 1).collect();
    let mut head = vec![0.0; n_max + 1];
    let mut power = vec![0.0; n_max + 1];
    power[0] = 1.0;
    let mut weight = q;
    let mut remaining = 1.0 - q;
    // p^{∗j} lives on {j, j+1, …}, so nothing reaches the head once j > n_max
    for j in 0..=n_max {
        for (h, c) in head.iter_mut().zip(&power) {
            *h += weight * c;
        }
        if remaining < LATTICE_SERIES_TOL || j == n_max {
            break;
        }
        let mut next = vec![0.0; n_max + 1];
        for (a, ca) in power.iter().enumerate().skip(j) {
            if *ca == 0.0 {
                continue;
            }
            for (b, pb) in p.iter().enumerate().skip(1) {
                if a + b > n_max {
                    break;
                }
                next[a + b] += ca * pb;
            }
        }
        power = next;
        weight *= 1.0 - q;
        remaining *= 1.0 - q;
    }
    let mass_bound = (1.0 - head.iter().sum::<f64>()).max(0.0);
    Ok(Pmf {
        head,
        tail: Tail::BoundedRemainder { mass_bound },
    })
}

/// Characteristic function of the reset waiting time for `X ≥ 0`:
/// `ψ = q / (1 − (1−q) φ)`.
pub fn cf_reset(phi: Complex64, q: f64) -> Result<Complex64> {
    require_probability_open("q", q)?;
    if !(phi.re.is_finite() && phi.im.is_finite()) || phi.norm() > 1.0 + 1e-12 {
        return Err(Error::invalid("phi", format!("need |phi| <= 1, got {phi}")));
    }
    let den = Complex64::new(1.0, 0.0) - (1.0 - q) * phi;
    let modulus = den.norm();
    if modulus < 1e-14 {
        return Err(Error::DivisionNearZero { modulus });
    }
    Ok(q / den)
}
