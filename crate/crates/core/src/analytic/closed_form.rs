//! Stationary laws of the Markovian queues with resetting, and the
//! classical laws they reduce to as the resetting rate vanishes.

use statrs::function::gamma::ln_gamma;

use super::params::{ModelKind, ModelParams};
use super::pmf::{geometric_tail, poisson_tail_bound, Pmf, Tail, Truncation};
use crate::error::{require_nonneg, require_positive, Error, Result};
use crate::numerics::coeffs::eta_weighted_vec;
use crate::numerics::{a_coeffs, ln_factorial, spectral_roots, MmrCoefficients, QuadratureConfig};

/// Tolerance on the relative residual of the key identity before the
/// M/M/r law is trusted.
pub const KEY_IDENTITY_TOL: f64 = 1e-8;

/// `θⁿ/n! · A_n`, with the tail certified by the clearing-model geometric
/// law `θ/(θ+γ)` and by the Poisson(θ) law of the queue without resetting.
pub fn mminf_reset(theta: f64, gamma: f64, trunc: &Truncation) -> Result<Pmf> {
    require_nonneg("theta", theta)?;
    require_positive("gamma", gamma)?;
    if theta == 0.0 {
        return Ok(Pmf::point_mass_at_zero());
    }
    let clear = theta / (theta + gamma);
    let (n, bound) =
        trunc.resolve(|n| geometric_tail(clear, n).min(poisson_tail_bound(theta, n)))?;
    let a = a_coeffs(n, theta, gamma, &QuadratureConfig::default())?;
    let ln_theta = theta.ln();
    let mut ln_fact = 0.0;
    let head = a
        .iter()
        .enumerate()
        .map(|(k, &ak)| {
            if k > 0 {
                ln_fact += (k as f64).ln();
            }
            (k as f64 * ln_theta - ln_fact + ak.ln()).exp()
        })
        .collect();
    Ok(Pmf {
        head,
        tail: Tail::BoundedRemainder { mass_bound: bound },
    })
}

/// `θ^k/k! (A_k − L C_k)` for `k < r`, then geometric with ratio `α`.
pub fn mmr_reset(r: usize, theta: f64, gamma: f64, trunc: &Truncation) -> Result<Pmf> {
    if r == 0 {
        return Err(Error::invalid("r", "server count must be >= 1"));
    }
    require_positive("theta", theta)?;
    require_positive("gamma", gamma)?;
    let co = MmrCoefficients::compute(r, theta, gamma, &QuadratureConfig::default())?;
    let res = co.key_identity_residual();
    if !(res <= KEY_IDENTITY_TOL) {
        return Err(Error::IdentityCheck {
            what: "theta^r (A_{r-1} C_r - C_{r-1} A_r) = gamma (r-1)!",
            residual: res,
            tol: KEY_IDENTITY_TOL,
        });
    }
    let ln_theta = theta.ln();
    let mut ln_fact = 0.0;
    let mut head = Vec::with_capacity(r);
    for k in 0..r {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let d = co.d(k);
        if !(d > 0.0) {
            return Err(Error::IdentityCheck {
                what: "A_k - L C_k > 0",
                residual: d,
                tol: 0.0,
            });
        }
        head.push((k as f64 * ln_theta - ln_fact).exp() * d);
    }
    let alpha = co.roots.alpha;
    let last = head[r - 1];
    let geo = alpha / (1.0 - alpha);
    let tail_after = |n: usize| -> f64 {
        if n + 1 >= r {
            last * alpha.powf((n + 2 - r) as f64) / (1.0 - alpha)
        } else {
            head[n + 1..].iter().sum::<f64>() + last * geo
        }
    };
    let (n, _) = trunc.resolve(tail_after)?;
    let mut p = last;
    for _ in r..=n {
        p *= alpha;
        head.push(p);
    }
    Ok(Pmf {
        head,
        tail: Tail::ExactGeometric {
            ratio: alpha,
            start: r - 1,
        },
    })
}

/// Ratio of the geometric M/M/1 law with resetting (or of its degenerate
/// cases: pure clearing when `μ = 0`, classical when `κ = 0`).
pub fn mm1_ratio(lambda: f64, mu: f64, kappa: f64) -> Result<f64> {
    require_nonneg("lambda", lambda)?;
    require_nonneg("mu", mu)?;
    require_nonneg("kappa", kappa)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    if kappa == 0.0 {
        if mu > lambda {
            return Ok(lambda / mu);
        }
        return Err(Error::UnstableModel {
            param: "kappa",
            reason: format!("without resetting the queue needs mu > lambda (mu = {mu}, lambda = {lambda})"),
        });
    }
    if mu == 0.0 {
        return Ok(lambda / (lambda + kappa));
    }
    Ok(spectral_roots(1, lambda / mu, kappa / mu)?.alpha)
}

/// Geometric law `(1−ρ) ρ^i`.
pub fn mm1_reset(lambda: f64, mu: f64, kappa: f64, trunc: &Truncation) -> Result<Pmf> {
    let rho = mm1_ratio(lambda, mu, kappa)?;
    let (n, _) = trunc.resolve(|n| geometric_tail(rho, n))?;
    Ok(Pmf::geometric(rho, n))
}

/// `θ^k/∏_{i<k}(i+η) · γA_k/((γ+θ)A_0 − θA_1)` with the η-weighted `A_k`.
pub fn mm1m_reset(lambda: f64, mu: f64, nu: f64, kappa: f64, trunc: &Truncation) -> Result<Pmf> {
    require_nonneg("lambda", lambda)?;
    require_positive("mu", mu)?;
    require_positive("nu", nu)?;
    require_positive("kappa", kappa)?;
    if lambda == 0.0 {
        return Ok(Pmf::point_mass_at_zero());
    }
    let clear = lambda / (lambda + kappa);
    let no_abandon = mm1_ratio(lambda, mu, kappa)?;
    let infinite = lambda / mu.min(nu);
    let (n, bound) = trunc.resolve(|n| {
        geometric_tail(clear, n)
            .min(geometric_tail(no_abandon, n))
            .min(poisson_tail_bound(infinite, n))
    })?;
    let (theta, gamma, eta) = (lambda / nu, kappa / nu, mu / nu);
    // components 0..=n: A_k; component n+1: ∫ γ(1−t)^γ t^{η−1} e^{−θt} dt
    let v = eta_weighted_vec(gamma, eta, n + 2, &QuadratureConfig::default(), |t, omt, out| {
        let e = (-theta * t).exp();
        let mut p = 1.0;
        for slot in out[..=n].iter_mut() {
            *slot = p * e;
            p *= t;
        }
        out[n + 1] = omt * e;
    })?;
    let den = gamma * v[0] + theta * v[n + 1];
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator {
            what: "(gamma + theta) A_0 - theta A_1",
            value: den,
        });
    }
    let ln_scale = gamma.ln() - den.ln();
    let ln_theta = theta.ln();
    let mut ln_prod = 0.0;
    let head = (0..=n)
        .map(|k| {
            if k > 0 {
                ln_prod += ((k - 1) as f64 + eta).ln();
            }
            (k as f64 * ln_theta - ln_prod + v[k].ln() + ln_scale).exp()
        })
        .collect();
    Ok(Pmf {
        head,
        tail: Tail::BoundedRemainder { mass_bound: bound },
    })
}

/// Classical (no resetting) law of the same queue, the `γ → 0` reference.
pub fn classical_ref(params: &ModelParams, trunc: &Truncation) -> Result<Pmf> {
    require_nonneg("lambda", params.lambda)?;
    match params.kind {
        ModelKind::MMInf => {
            require_positive("mu", params.mu)?;
            poisson(params.theta(), trunc)
        }
        ModelKind::MMr => {
            require_positive("mu", params.mu)?;
            erlang(params.r, params.theta(), trunc)
        }
        ModelKind::MM1 => {
            let rho = mm1_ratio(params.lambda, params.mu, 0.0)?;
            let (n, _) = trunc.resolve(|n| geometric_tail(rho, n))?;
            Ok(Pmf::geometric(rho, n))
        }
        ModelKind::MM1M => {
            require_positive("mu", params.mu)?;
            require_positive("nu", params.nu)?;
            classical_abandonment(params.theta(), params.eta(), trunc)
        }
        ModelKind::ClearingOnly => Err(Error::UnstableModel {
            param: "kappa",
            reason: "a queue without service has no stationary law without resetting".into(),
        }),
    }
}

fn poisson(theta: f64, trunc: &Truncation) -> Result<Pmf> {
    if theta == 0.0 {
        return Ok(Pmf::point_mass_at_zero());
    }
    let (n, bound) = trunc.resolve(|n| poisson_tail_bound(theta, n))?;
    let ln_theta = theta.ln();
    let head = (0..=n)
        .map(|k| (k as f64 * ln_theta - theta - ln_factorial(k)).exp())
        .collect();
    Ok(Pmf {
        head,
        tail: Tail::BoundedRemainder { mass_bound: bound },
    })
}

fn erlang(r: usize, theta: f64, trunc: &Truncation) -> Result<Pmf> {
    if r == 0 {
        return Err(Error::invalid("r", "server count must be >= 1"));
    }
    let rf = r as f64;
    if !(theta < rf) {
        return Err(Error::UnstableModel {
            param: "theta",
            reason: format!("the classical M/M/r queue needs theta < r (theta = {theta}, r = {r})"),
        });
    }
    if theta == 0.0 {
        return Ok(Pmf::point_mass_at_zero());
    }
    // ln of θ^k/k! for k ≤ r, normalised in log space
    let ln_theta = theta.ln();
    let ln_terms: Vec<f64> = (0..=r)
        .map(|k| k as f64 * ln_theta - ln_factorial(k))
        .collect();
    let ln_last = ln_terms[r] + (rf / (rf - theta)).ln();
    let m = ln_terms[..r]
        .iter()
        .cloned()
        .chain(std::iter::once(ln_last))
        .fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = ln_terms[..r].iter().map(|x| (x - m).exp()).sum::<f64>() + (ln_last - m).exp();
    let ln_p0 = -(m + z.ln());
    let mut head: Vec<f64> = ln_terms[..r].iter().map(|x| (x + ln_p0).exp()).collect();
    let ratio = theta / rf;
    let last = head[r - 1];
    let (n, _) = trunc.resolve(|n| {
        if n + 1 >= r {
            last * ratio.powf((n + 2 - r) as f64) / (1.0 - ratio)
        } else {
            head[n + 1..].iter().sum::<f64>() + last * ratio / (1.0 - ratio)
        }
    })?;
    let mut p = last;
    for _ in r..=n {
        p *= ratio;
        head.push(p);
    }
    Ok(Pmf {
        head,
        tail: Tail::ExactGeometric {
            ratio,
            start: r - 1,
        },
    })
}

fn classical_abandonment(theta: f64, eta: f64, trunc: &Truncation) -> Result<Pmf> {
    if theta == 0.0 {
        return Ok(Pmf::point_mass_at_zero());
    }
    // Z = 1 + θ e^θ ∫₀¹ t^{η−1} e^{−θt} dt
    let integral = eta_weighted_vec(1.0, eta, 1, &QuadratureConfig::default(), |t, _, out| {
        out[0] = (-theta * t).exp()
    })?[0];
    let x = theta.ln() + theta + integral.ln();
    let ln_z = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    let ln_theta = theta.ln();
    let ln_g_eta = ln_gamma(eta);
    // ln π_k = k ln θ − ln Γ(k+η) + ln Γ(η) − ln Z
    let ln_pi = |k: usize| k as f64 * ln_theta - ln_gamma(k as f64 + eta) + ln_g_eta - ln_z;
    let (n, bound) = trunc.resolve(|n| {
        // consecutive ratios θ/(k+η) decrease, so the tail is dominated by a
        // geometric series started at π_{n+1}
        let ratio = theta / (n as f64 + 1.0 + eta);
        if ratio >= 1.0 {
            1.0
        } else {
            (ln_pi(n + 1).exp() / (1.0 - ratio)).min(1.0)
        }
    })?;
    let mut ln_prod = 0.0;
    let head = (0..=n)
        .map(|k| {
            if k > 0 {
                ln_prod += ((k - 1) as f64 + eta).ln();
            }
            (k as f64 * ln_theta - ln_prod - ln_z).exp()
        })
        .collect();
    Ok(Pmf {
        head,
        tail: Tail::BoundedRemainder { mass_bound: bound },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const E_INV: f64 = 0.36787944117144233;

    fn auto() -> Truncation {
        Truncation::default()
    }

    #[test]
    fn mminf_unit_parameters() {
        let p = mminf_reset(1.0, 1.0, &auto()).unwrap();
        assert_relative_eq!(p.head[0], 1.0 - E_INV, max_relative = 1e-12);
        assert_relative_eq!(p.head[1], 1.0 - 2.0 * E_INV, max_relative = 1e-12);
        assert!((p.head_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mminf_without_arrivals_is_empty() {
        let p = mminf_reset(0.0, 2.0, &auto()).unwrap();
        assert_eq!(p.head, vec![1.0]);
    }

    #[test]
    fn mminf_small_gamma_is_poisson() {
        let p = mminf_reset(1.0, 1e-6, &auto()).unwrap();
        let q = poisson(1.0, &auto()).unwrap();
        assert!(p.sup_distance(&q) < 1e-4);
    }

    #[test]
    fn mminf_matches_mixed_poisson_integral() {
        use crate::numerics::quad_gamma_weight;
        let (theta, gamma) = (2.5, 0.7);
        let p = mminf_reset(theta, gamma, &auto()).unwrap();
        for n in [0usize, 1, 3, 8] {
            let mix = quad_gamma_weight(
                |y| {
                    let m = theta * y;
                    if m == 0.0 {
                        if n == 0 { 1.0 } else { 0.0 }
                    } else {
                        (n as f64 * m.ln() - m - ln_factorial(n)).exp()
                    }
                },
                gamma,
                &QuadratureConfig::default(),
            )
            .unwrap()
            .value;
            assert!((p.head[n] - mix).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn mmr_is_normalised_and_geometric_beyond_r() {
        let p = mmr_reset(3, 2.0, 0.5, &auto()).unwrap();
        assert!((p.total_mass() - 1.0).abs() < 1e-12, "{}", p.total_mass());
        let alpha = spectral_roots(3, 2.0, 0.5).unwrap().alpha;
        for k in 3..10 {
            assert_relative_eq!(p.prob(k), alpha.powi(k as i32 - 2) * p.prob(2), max_relative = 1e-12);
        }
    }

    #[test]
    fn mmr_with_one_server_is_mm1() {
        for (lambda, mu, kappa) in [(1.0, 1.0, 1.0), (3.0, 0.5, 2.0), (0.2, 4.0, 0.01)] {
            let a = mmr_reset(1, lambda / mu, kappa / mu, &auto()).unwrap();
            let b = mm1_reset(lambda, mu, kappa, &auto()).unwrap();
            assert!(a.sup_distance(&b) < 1e-10, "{lambda} {mu} {kappa}");
        }
    }

    #[test]
    fn mmr_rejects_zero_load() {
        assert!(matches!(
            mmr_reset(2, 0.0, 1.0, &auto()),
            Err(Error::InvalidParam { name: "theta", .. })
        ));
    }

    #[test]
    fn mmr_small_gamma_is_erlang() {
        let p = mmr_reset(3, 1.0, 1e-6, &auto()).unwrap();
        let q = erlang(3, 1.0, &auto()).unwrap();
        assert!(p.sup_distance(&q) < 1e-4);
    }

    #[test]
    fn mm1_examples() {
        let p = mm1_reset(1.0, 1.0, 1.0, &auto()).unwrap();
        let rho = (3.0 - 5f64.sqrt()) / 2.0;
        assert_relative_eq!(p.head[0], 1.0 - rho, max_relative = 1e-15);
        assert_relative_eq!(p.head[1], rho * (1.0 - rho), max_relative = 1e-14);
        let c = mm1_reset(1.0, 0.0, 1.0, &auto()).unwrap();
        for i in 0..20 {
            assert_eq!(c.prob(i), 0.5f64.powi(i as i32 + 1));
        }
        let e = mm1_reset(0.0, 1.0, 1.0, &auto()).unwrap();
        assert_eq!(e.head[0], 1.0);
        assert_eq!(e.total_mass(), 1.0);
    }

    #[test]
    fn mm1_without_resetting_needs_stability() {
        assert!(matches!(mm1_reset(1.0, 1.0, 0.0, &auto()), Err(Error::UnstableModel { .. })));
        assert!(matches!(mm1_reset(1.0, 0.0, 0.0, &auto()), Err(Error::UnstableModel { .. })));
        let p = mm1_reset(1.0, 2.0, 0.0, &auto()).unwrap();
        assert_relative_eq!(p.head[0], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn mm1m_with_equal_rates_is_mminf() {
        for (lambda, nu, kappa) in [(1.0, 1.0, 1.0), (4.0, 2.0, 0.3), (0.5, 0.25, 3.0)] {
            let a = mm1m_reset(lambda, nu, nu, kappa, &auto()).unwrap();
            let b = mminf_reset(lambda / nu, kappa / nu, &auto()).unwrap();
            assert!(a.sup_distance(&b) < 1e-10);
        }
    }

    #[test]
    fn mm1m_is_normalised() {
        for (lambda, mu, nu, kappa) in [(2.0, 0.5, 1.0, 0.3), (1.0, 3.0, 0.2, 1.0)] {
            let p = mm1m_reset(lambda, mu, nu, kappa, &auto()).unwrap();
            assert!((p.head_sum() - 1.0).abs() < 1e-12, "{}", p.head_sum());
        }
        assert_eq!(mm1m_reset(0.0, 1.0, 1.0, 1.0, &auto()).unwrap().head, vec![1.0]);
    }

    #[test]
    fn mm1m_small_gamma_is_classical() {
        let params = ModelParams::mm1m(1.5, 0.6, 1.0, 1e-6);
        let p = mm1m_reset(1.5, 0.6, 1.0, 1e-6, &auto()).unwrap();
        let q = classical_ref(&params, &auto()).unwrap();
        assert!(p.sup_distance(&q) < 1e-4);
        assert!((q.head_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_examples() {
        let p = classical_ref(&ModelParams::mminf(1.0, 1.0, 0.0), &auto()).unwrap();
        assert_relative_eq!(p.head[0], E_INV, max_relative = 1e-14);
        let p = classical_ref(&ModelParams::mmr(2, 1.0, 1.0, 0.0), &auto()).unwrap();
        assert_relative_eq!(p.head[0], 1.0 / 3.0, max_relative = 1e-14);
        assert!((p.total_mass() - 1.0).abs() < 1e-14);
        let p = classical_ref(&ModelParams::mm1m(1.0, 1.0, 1.0, 0.0), &auto()).unwrap();
        let e = std::f64::consts::E;
        assert_relative_eq!(p.head[0], 1.0 / (1.0 + e * (1.0 - 1.0 / e)), max_relative = 1e-13);
        assert!(matches!(
            classical_ref(&ModelParams::mmr(2, 3.0, 1.0, 0.0), &auto()),
            Err(Error::UnstableModel { .. })
        ));
        assert!(classical_ref(&ModelParams::clearing(1.0, 1.0), &auto()).is_err());
    }
}
