use serde::{Deserialize, Serialize};

use super::quadrature::{gamma_weight_vec, integrate_graded_vec, QuadratureConfig};
use crate::error::{require_nonneg, require_positive, Error, Result};

/// `(θ, γ, η, r)`: rates normalised by the service (or abandonment) rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    pub theta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub r: usize,
}

impl NormalizedParams {
    pub fn new(theta: f64, gamma: f64) -> Result<Self> {
        Self::with_all(theta, gamma, 1.0, 1)
    }

    pub fn with_all(theta: f64, gamma: f64, eta: f64, r: usize) -> Result<Self> {
        require_nonneg("theta", theta)?;
        require_positive("gamma", gamma)?;
        require_positive("eta", eta)?;
        if r == 0 {
            return Err(Error::invalid("r", "server count must be >= 1"));
        }
        Ok(NormalizedParams {
            theta,
            gamma,
            eta,
            r,
        })
    }
}

/// Roots `0 < α < 1 < β` of `r x² − (r+θ+γ) x + θ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRoots {
    pub alpha: f64,
    pub beta: f64,
}

/// `ln n!` accumulated as a sum of logarithms (exact enough for n ≲ 10⁶).
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

#[inline]
fn monomial_exp(s: f64, n: usize, theta: f64) -> f64 {
    // s^n e^{-θ s}; powi keeps relative accuracy, underflow to 0 is harmless
    let p = if n == 0 { 1.0 } else { s.powi(n as i32) };
    p * (-theta * s).exp()
}

fn check_theta_gamma(theta: f64, gamma: f64) -> Result<()> {
    require_nonneg("theta", theta)?;
    require_positive("gamma", gamma)?;
    Ok(())
}

/// `A_0, …, A_{n_max}` with `A_n = ∫₀¹ γ(1−s)^{γ−1} sⁿ e^{−θs} ds`.
///
/// Each `A_n` is an independent quadrature (the nodes are shared, the
/// three-term recursion is never used to generate values).
pub fn a_coeffs(n_max: usize, theta: f64, gamma: f64, cfg: &QuadratureConfig) -> Result<Vec<f64>> {
    check_theta_gamma(theta, gamma)?;
    let q = gamma_weight_vec(gamma, 0.0, n_max + 1, cfg, |s, _, out| {
        let e = (-theta * s).exp();
        let mut p = 1.0;
        for slot in out.iter_mut() {
            *slot = p * e;
            p *= s;
        }
    })?;
    Ok(q.into_iter().map(|x| x.value).collect())
}

pub fn a_coeff(n: usize, theta: f64, gamma: f64) -> Result<f64> {
    a_coeff_with(n, theta, gamma, &QuadratureConfig::default())
}

pub fn a_coeff_with(n: usize, theta: f64, gamma: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_theta_gamma(theta, gamma)?;
    let q = gamma_weight_vec(gamma, 0.0, 1, cfg, |s, _, out| {
        out[0] = monomial_exp(s, n, theta)
    })?;
    Ok(q[0].value)
}

/// Vector of integrals `∫₀¹ γ(1−t)^{γ−1} t^{η−1} f_j(t) dt`.
///
/// The interval is split at `t = 1/2`. On the left half `w = t^η` removes
/// the `t^{η−1}` singularity when `η < 1`; on the right half the
/// `u = (1−t)^γ` substitution handles the weight. `f(t, 1−t, out)` fills
/// all components.
pub(crate) fn eta_weighted_vec<F>(
    gamma: f64,
    eta: f64,
    dim: usize,
    cfg: &QuadratureConfig,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(f64, f64, &mut [f64]),
{
    require_positive("gamma", gamma)?;
    require_positive("eta", eta)?;
    let weight = |omt: f64| gamma * omt.powf(gamma - 1.0);
    let left = if eta < 1.0 {
        let top = 0.5f64.powf(eta);
        integrate_graded_vec(top, dim, cfg, |w, _, out| {
            let t = w.powf(1.0 / eta);
            f(t, 1.0 - t, out);
            let c = weight(1.0 - t) / eta;
            out.iter_mut().for_each(|o| *o *= c);
        })?
    } else {
        integrate_graded_vec(0.5, dim, cfg, |t, _, out| {
            f(t, 1.0 - t, out);
            let c = weight(1.0 - t) * if eta == 1.0 { 1.0 } else { t.powf(eta - 1.0) };
            out.iter_mut().for_each(|o| *o *= c);
        })?
    };
    let right = gamma_weight_vec(gamma, 0.5, dim, cfg, |t, omt, out| {
        f(t, omt, out);
        let c = if eta == 1.0 { 1.0 } else { t.powf(eta - 1.0) };
        out.iter_mut().for_each(|o| *o *= c);
    })?;
    Ok(left
        .iter()
        .zip(right.iter())
        .map(|(l, r)| l.value + r.value)
        .collect())
}

/// `A_0, …, A_{k_max}` with `A_k = ∫₀¹ γ(1−t)^{γ−1} t^{η−1+k} e^{−θt} dt`.
pub fn a_eta_coeffs(
    k_max: usize,
    theta: f64,
    gamma: f64,
    eta: f64,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    check_theta_gamma(theta, gamma)?;
    eta_weighted_vec(gamma, eta, k_max + 1, cfg, |t, _, out| {
        let e = (-theta * t).exp();
        let mut p = 1.0;
        for slot in out.iter_mut() {
            *slot = p * e;
            p *= t;
        }
    })
}

pub fn a_eta_coeff(k: usize, theta: f64, gamma: f64, eta: f64) -> Result<f64> {
    check_theta_gamma(theta, gamma)?;
    let v = eta_weighted_vec(gamma, eta, 1, &QuadratureConfig::default(), |t, _, out| {
        out[0] = monomial_exp(t, k, theta)
    })?;
    Ok(v[0])
}

/// `ln C_k`, accumulated in log space so it never overflows.
pub fn ln_c_coeff(k: usize, theta: f64, gamma: f64) -> Result<f64> {
    require_positive("theta", theta)?;
    require_positive("gamma", gamma)?;
    let mut ln_terms = Vec::with_capacity(k + 1);
    let mut lt = 0.0;
    ln_terms.push(lt);
    let ln_theta = theta.ln();
    for l in 0..k {
        lt += ((k - l) as f64 / (l + 1) as f64).ln() + (gamma + l as f64).ln() - ln_theta;
        ln_terms.push(lt);
    }
    let m = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = ln_terms.iter().map(|x| (x - m).exp()).sum();
    Ok(m + s.ln())
}

/// `C_k = Σ_{l=0}^{k} binom(k,l) γ(γ+1)⋯(γ+l−1) θ^{−l}` via the term ratio
/// `t_{l+1} = t_l · (k−l)/(l+1) · (γ+l)/θ`.
pub fn c_coeff(k: usize, theta: f64, gamma: f64) -> Result<f64> {
    require_positive("theta", theta)?;
    require_positive("gamma", gamma)?;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for l in 0..k {
        term *= (k - l) as f64 / (l + 1) as f64 * ((gamma + l as f64) / theta);
        sum += term;
    }
    if sum.is_finite() {
        Ok(sum)
    } else {
        Err(Error::Overflow { what: "C_k" })
    }
}

/// `B_{k,r}` by direct evaluation of its defining double sum. Only used to
/// cross-check `B_{k,r} = A_r C_k / γ`.
pub fn b_coeff(k: usize, r: usize, theta: f64, gamma: f64) -> Result<f64> {
    require_positive("theta", theta)?;
    require_positive("gamma", gamma)?;
    if k > r {
        return Err(Error::invalid("k", format!("must satisfy k <= r = {r}, got {k}")));
    }
    let terms = k.min(r);
    // ∫(1−s)^{γ−1+i} s^{k+r−2i} e^{−θs} ds = γ⁻¹ ∫ γ(1−s)^{γ−1} (1−s)^i s^{k+r−2i} e^{−θs} ds
    let ints = gamma_weight_vec(gamma, 0.0, terms + 1, &QuadratureConfig::default(), |s, oms, out| {
        let e = (-theta * s).exp();
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = oms.powi(i as i32) * s.powi((k + r - 2 * i) as i32) * e;
        }
    })?;
    let ln_theta = theta.ln();
    let mut total = 0.0;
    for (i, q) in ints.iter().enumerate() {
        let ln_coef = ln_binomial(k, i) + ln_binomial(r, i) + ln_factorial(i) - i as f64 * ln_theta;
        total += ln_coef.exp() * q.value / gamma;
    }
    Ok(total)
}

/// `α = 2θ / (r+θ+γ + √((r+θ+γ)² − 4θr))` and `β = (r+θ+γ)/r − α`.
///
/// The discriminant is evaluated as `(r+γ−θ)² + 4θγ`, which is a sum of
/// non-negative terms.
pub fn spectral_roots(r: usize, theta: f64, gamma: f64) -> Result<SpectralRoots> {
    if r == 0 {
        return Err(Error::invalid("r", "server count must be >= 1"));
    }
    check_theta_gamma(theta, gamma)?;
    let rf = r as f64;
    let b = rf + theta + gamma;
    let d = rf + gamma - theta;
    let disc = (d * d + 4.0 * theta * gamma).sqrt();
    let alpha = 2.0 * theta / (b + disc);
    let beta = (b + disc) / (2.0 * rf);
    Ok(SpectralRoots { alpha, beta })
}

/// Everything the M/M/r closed form needs, with `C_k` kept in log space.
#[derive(Debug, Clone)]
pub struct MmrCoefficients {
    pub r: usize,
    pub theta: f64,
    pub gamma: f64,
    pub roots: SpectralRoots,
    /// `A_0..=A_r`.
    pub a: Vec<f64>,
    /// `ln C_0..=ln C_r`.
    pub ln_c: Vec<f64>,
    /// `θ A_r − r α A_{r−1}`.
    pub l_numerator: f64,
    /// `(θ C_r − r α C_{r−1}) / C_{r−1}`, strictly positive.
    pub l_denominator_scaled: f64,
}

impl MmrCoefficients {
    pub fn compute(r: usize, theta: f64, gamma: f64, cfg: &QuadratureConfig) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("r", "server count must be >= 1"));
        }
        require_positive("theta", theta)?;
        require_positive("gamma", gamma)?;
        let roots = spectral_roots(r, theta, gamma)?;
        let a = a_coeffs(r, theta, gamma, cfg)?;
        let ln_c = (0..=r)
            .map(|k| ln_c_coeff(k, theta, gamma))
            .collect::<Result<Vec<_>>>()?;
        let ra = r as f64 * roots.alpha;
        let l_numerator = theta * a[r] - ra * a[r - 1];
        let l_denominator_scaled = theta * (ln_c[r] - ln_c[r - 1]).exp() - ra;
        if !(l_denominator_scaled > 0.0) {
            return Err(Error::DegenerateDenominator {
                what: "L_{r-1,r}",
                value: l_denominator_scaled,
            });
        }
        Ok(MmrCoefficients {
            r,
            theta,
            gamma,
            roots,
            a,
            ln_c,
            l_numerator,
            l_denominator_scaled,
        })
    }

    /// `L_{r−1,r}`; may underflow to 0 when `C_{r−1}` is astronomically large.
    pub fn l(&self) -> f64 {
        self.l_numerator / self.l_denominator_scaled * (-self.ln_c[self.r - 1]).exp()
    }

    /// `L_{r−1,r} · C_k` without forming either factor separately.
    pub fn l_times_c(&self, k: usize) -> f64 {
        self.l_numerator / self.l_denominator_scaled * (self.ln_c[k] - self.ln_c[self.r - 1]).exp()
    }

    /// `D_k = A_k − L_{r−1,r} C_k` for `k ≤ r`.
    pub fn d(&self, k: usize) -> f64 {
        self.a[k] - self.l_times_c(k)
    }

    /// Relative residual of `θ^r (A_{r−1} C_r − C_{r−1} A_r) = γ (r−1)!`.
    pub fn key_identity_residual(&self) -> f64 {
        let r = self.r;
        let ratio = (self.ln_c[r] - self.ln_c[r - 1]).exp();
        let scale = (r as f64 * self.theta.ln() + self.ln_c[r - 1]
            - self.gamma.ln()
            - ln_factorial(r - 1))
        .exp();
        (scale * (self.a[r - 1] * ratio - self.a[r]) - 1.0).abs()
    }
}

/// `L_{r−1,r} = (θA_r − rαA_{r−1}) / (θC_r − rαC_{r−1})`.
pub fn l_coeff(r: usize, theta: f64, gamma: f64) -> Result<f64> {
    Ok(MmrCoefficients::compute(r, theta, gamma, &QuadratureConfig::default())?.l())
}

/// Relative residual of the key identity, see
/// [`MmrCoefficients::key_identity_residual`].
pub fn key_identity_residual(r: usize, theta: f64, gamma: f64) -> Result<f64> {
    Ok(MmrCoefficients::compute(r, theta, gamma, &QuadratureConfig::default())?
        .key_identity_residual())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const E_INV: f64 = 0.36787944117144233;

    #[test]
    fn a_coeff_examples() {
        for gamma in [0.1, 1.0, 3.0] {
            assert_relative_eq!(a_coeff(0, 0.0, gamma).unwrap(), 1.0, max_relative = 1e-13);
        }
        assert_relative_eq!(a_coeff(0, 1.0, 1.0).unwrap(), 1.0 - E_INV, max_relative = 1e-13);
        assert_relative_eq!(a_coeff(1, 1.0, 1.0).unwrap(), 1.0 - 2.0 * E_INV, max_relative = 1e-13);
    }

    #[test]
    fn large_gamma_high_moments_match_beta_function() {
        // θ = 0: A_n = γ B(n+1, γ); the mass of sⁿ piles up against s = 1
        use statrs::function::gamma::ln_gamma;
        for gamma in [1.0, 2.5, 7.6, 12.0] {
            let a = a_coeffs(200, 0.0, gamma, &QuadratureConfig::default()).unwrap();
            for n in [0usize, 60, 200] {
                let nf = n as f64;
                let exact = gamma * (ln_gamma(nf + 1.0) + ln_gamma(gamma) - ln_gamma(nf + 1.0 + gamma)).exp();
                assert_relative_eq!(a[n], exact, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn a_coeffs_match_scalar_and_decrease() {
        let v = a_coeffs(40, 2.0, 0.5, &QuadratureConfig::default()).unwrap();
        for (n, &a) in v.iter().enumerate().step_by(7) {
            assert_relative_eq!(a, a_coeff(n, 2.0, 0.5).unwrap(), max_relative = 1e-12);
        }
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(v.iter().all(|&a| a > 0.0 && a <= 1.0));
    }

    #[test]
    fn a_eta_examples() {
        for k in 0..6 {
            assert_relative_eq!(
                a_eta_coeff(k, 0.7, 0.4, 1.0).unwrap(),
                a_coeff(k, 0.7, 0.4).unwrap(),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                a_eta_coeff(k, 0.0, 1.0, 1.0).unwrap(),
                1.0 / (k as f64 + 1.0),
                max_relative = 1e-13
            );
        }
        assert_relative_eq!(a_eta_coeff(0, 1.0, 1.0, 2.0).unwrap(), 1.0 - 2.0 * E_INV, max_relative = 1e-13);
    }

    #[test]
    fn a_eta_with_small_eta_matches_beta_function() {
        // θ = 0: ∫ γ(1−t)^{γ−1} t^{η−1+k} dt = γ B(η+k, γ)
        let (gamma, eta) = (0.3f64, 0.2f64);
        let expect = |k: usize| {
            let x = eta + k as f64;
            (statrs::function::gamma::ln_gamma(x) + statrs::function::gamma::ln_gamma(gamma + 1.0)
                - statrs::function::gamma::ln_gamma(x + gamma))
            .exp()
        };
        let v = a_eta_coeffs(5, 0.0, gamma, eta, &QuadratureConfig::default()).unwrap();
        for (k, &a) in v.iter().enumerate() {
            assert_relative_eq!(a, expect(k), max_relative = 1e-11);
        }
    }

    #[test]
    fn c_coeff_examples() {
        assert_eq!(c_coeff(0, 0.3, 2.0).unwrap(), 1.0);
        assert_relative_eq!(c_coeff(1, 0.3, 2.0).unwrap(), 1.0 + 2.0 / 0.3, max_relative = 1e-15);
        assert_relative_eq!(c_coeff(2, 1.0, 1.0).unwrap(), 5.0, max_relative = 1e-15);
        assert_relative_eq!(ln_c_coeff(2, 1.0, 1.0).unwrap(), 5f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn c_coeff_overflow_is_flagged_and_log_path_survives() {
        assert!(matches!(c_coeff(200, 0.1, 5.0), Err(Error::Overflow { .. })));
        let ln = ln_c_coeff(200, 0.1, 5.0).unwrap();
        assert!(ln.is_finite() && ln > 709.0);
    }

    #[test]
    fn c_coeff_requires_positive_theta() {
        assert!(matches!(
            c_coeff(3, 0.0, 1.0),
            Err(Error::InvalidParam { name: "theta", .. })
        ));
    }

    #[test]
    fn b_coeff_examples() {
        for (r, theta, gamma) in [(1, 1.0, 1.0), (3, 0.5, 2.0), (5, 2.0, 0.1)] {
            let ar = a_coeff(r, theta, gamma).unwrap();
            assert_relative_eq!(b_coeff(0, r, theta, gamma).unwrap(), ar / gamma, max_relative = 1e-12);
        }
        let a1 = a_coeff(1, 1.0, 1.0).unwrap();
        assert_relative_eq!(b_coeff(1, 1, 1.0, 1.0).unwrap(), 2.0 * a1, max_relative = 1e-12);
        assert_relative_eq!(b_coeff(1, 1, 1.0, 1.0).unwrap(), 0.5284822353142307, max_relative = 1e-9);
        assert!(b_coeff(3, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn spectral_root_examples() {
        let s = spectral_roots(2, 1.0, 1.0).unwrap();
        let h = std::f64::consts::SQRT_2 / 2.0;
        assert_relative_eq!(s.alpha, 1.0 - h, max_relative = 1e-15);
        assert_relative_eq!(s.beta, 1.0 + h, max_relative = 1e-15);
        assert_eq!(spectral_roots(4, 0.0, 0.5).unwrap().alpha, 0.0);
        // r = 1 reproduces the M/M/1 root (3 − √5)/2 at λ = μ = κ
        assert_relative_eq!(
            spectral_roots(1, 1.0, 1.0).unwrap().alpha,
            (3.0 - 5f64.sqrt()) / 2.0,
            max_relative = 1e-15
        );
        assert!(spectral_roots(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn l_coeff_r1_reproduces_geometric_empty_probability() {
        let rho = (3.0 - 5f64.sqrt()) / 2.0;
        let a0 = a_coeff(0, 1.0, 1.0).unwrap();
        let l = l_coeff(1, 1.0, 1.0).unwrap();
        assert_relative_eq!(a0 - l, 1.0 - rho, max_relative = 1e-12);
    }

    #[test]
    fn key_identity_holds() {
        for r in [1, 2, 3, 7, 15, 20] {
            for (theta, gamma) in [(0.1, 5.0), (5.0, 0.1), (1.0, 1.0)] {
                let res = key_identity_residual(r, theta, gamma).unwrap();
                assert!(res < 1e-8, "r={r} θ={theta} γ={gamma}: {res:e}");
            }
        }
    }

    #[test]
    fn l_coeff_has_the_closed_form_small_gamma_limit() {
        // lim_{γ→0} L = a e^{−θ}/(1 + a) with a = θ^{r−1}/(r−1)! · (θ e^{−θ}/(r−θ) − θ ∫₀¹ s^{r−1} e^{−θs} ds)
        let (r, theta) = (3usize, 1.5f64);
        let mut fact = 1.0;
        for k in 1..r {
            fact *= k as f64;
        }
        // ∫₀¹ s^{r−1}e^{−θs} ds = (r−1)!/θ^r (1 − e^{−θ} Σ_{i<r} θ^i/i!)
        let mut partial = 0.0;
        let mut term = 1.0;
        for i in 0..r {
            if i > 0 {
                term *= theta / i as f64;
            }
            partial += term;
        }
        let integral = fact / theta.powi(r as i32) * (1.0 - (-theta).exp() * partial);
        let a = theta.powi(r as i32 - 1) / fact
            * (theta * (-theta).exp() / (r as f64 - theta) - theta * integral);
        let limit = a * (-theta).exp() / (1.0 + a);
        let mut errs = Vec::new();
        for gamma in [1e-2, 1e-4, 1e-6] {
            errs.push((l_coeff(r, theta, gamma).unwrap() - limit).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 1e-5, "{errs:?}");
        assert!(limit > 0.0);
    }
}
