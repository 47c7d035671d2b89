//! Deterministic invariant checks over a parameter grid: recursions and
//! identities of the special constants, agreement with the linear-solve
//! oracle, balance residuals, limits, cross-model coincidences and the
//! Wiener–Hopf solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::analytic::{
    classical_ref, mm1_reset, mm1m_reset, mminf_reset, mmr_reset, model_for, ModelParams, Pmf,
    Truncation,
};
use crate::error::Result;
use crate::numerics::{
    a_coeffs, a_eta_coeffs, b_coeff, key_identity_residual, ln_c_coeff, QuadratureConfig,
};
use crate::oracle::{oracle_pmf, pbe_residual};
use crate::waiting_time::{lattice_wh, solve_wh, wh_residual, DistributionSpec, WhConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_err: f64,
    pub tol: f64,
    pub pass: bool,
    pub points: usize,
    /// First error raised while evaluating, if any.
    pub failure: Option<String>,
}

impl CheckResult {
    fn from_points(name: &str, tol: f64, results: Vec<Result<f64>>) -> Self {
        let points = results.len();
        let mut max_err = 0.0f64;
        let mut failure = None;
        for r in results {
            match r {
                Ok(e) if e.is_nan() => {
                    max_err = f64::INFINITY;
                    failure.get_or_insert_with(|| "NaN error".to_string());
                }
                Ok(e) => max_err = max_err.max(e),
                Err(e) => {
                    max_err = f64::INFINITY;
                    failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        CheckResult {
            name: name.to_string(),
            max_err,
            tol,
            pass: failure.is_none() && max_err <= tol,
            points,
            failure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub thetas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub servers: Vec<usize>,
    pub etas: Vec<f64>,
    /// Largest index in the recursion checks.
    pub n_max: usize,
}

impl Grid {
    pub fn standard() -> Self {
        let v = vec![0.1, 0.5, 1.0, 2.0, 5.0];
        Grid {
            thetas: v.clone(),
            gammas: v.clone(),
            servers: vec![1, 2, 3, 5, 10],
            etas: v,
            n_max: 200,
        }
    }

    fn pairs(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &t in &self.thetas {
            for &g in &self.gammas {
                out.push((t, g));
            }
        }
        out
    }

    fn triples(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &r in &self.servers {
            for (t, g) in self.pairs() {
                out.push((r, t, g));
            }
        }
        out
    }

    /// Every Markovian model at every grid point, with `μ = 1` (`ν = 1` for
    /// M/M/1+M, where `η` runs over the grid).
    pub fn models(&self) -> Vec<ModelParams> {
        let mut out = Vec::new();
        for (t, g) in self.pairs() {
            out.push(ModelParams::mminf(t, 1.0, g));
            out.push(ModelParams::mm1(t, 1.0, g));
            out.push(ModelParams::clearing(t, g));
            for &eta in &self.etas {
                out.push(ModelParams::mm1m(t, eta, 1.0, g));
            }
            for &r in &self.servers {
                out.push(ModelParams::mmr(r, t, 1.0, g));
            }
        }
        out
    }
}

/// `|θx_{n+1} − (c+n+θ+γ)x_n + (c+n)x_{n−1}|` relative to the sum of the
/// absolute terms.
fn three_term_residual(theta: f64, gamma: f64, shift: f64, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for n in 1..x.len().saturating_sub(1) {
        let k = shift + n as f64;
        let t = [theta * x[n + 1], (k + theta + gamma) * x[n], k * x[n - 1]];
        let scale = t[0].abs() + t[1].abs() + t[2].abs();
        worst = worst.max((t[0] - t[1] + t[2]).abs() / scale);
    }
    worst
}

fn pmf_for(p: &ModelParams) -> Result<Pmf> {
    model_for(p)?.stationary(&Truncation::with_eps(1e-12))
}

pub fn a_recursion(grid: &Grid) -> CheckResult {
    let res = grid
        .pairs()
        .into_par_iter()
        .map(|(t, g)| {
            let a = a_coeffs(grid.n_max, t, g, &QuadratureConfig::default())?;
            Ok(three_term_residual(t, g, 0.0, &a))
        })
        .collect();
    CheckResult::from_points("A recursion", 1e-8, res)
}

/// The recursion on `C_k`, evaluated after scaling every triple by its
/// largest member so nothing overflows.
pub fn c_recursion(grid: &Grid) -> CheckResult {
    let res = grid
        .pairs()
        .into_par_iter()
        .map(|(t, g)| {
            let lc = (0..=grid.n_max)
                .map(|k| ln_c_coeff(k, t, g))
                .collect::<Result<Vec<_>>>()?;
            let mut worst = 0.0f64;
            for k in 1..grid.n_max {
                let m = lc[k - 1].max(lc[k]).max(lc[k + 1]);
                let x = [(lc[k - 1] - m).exp(), (lc[k] - m).exp(), (lc[k + 1] - m).exp()];
                worst = worst.max(three_term_residual(t, g, k as f64 - 1.0, &x));
            }
            Ok(worst)
        })
        .collect();
    CheckResult::from_points("C recursion", 1e-8, res)
}

pub fn b_recursions(grid: &Grid) -> CheckResult {
    let res = grid
        .triples()
        .into_par_iter()
        .map(|(r, t, g)| {
            let mut worst = 0.0f64;
            for second in [r, r - 1] {
                let b = (0..=second)
                    .map(|k| b_coeff(k, second, t, g))
                    .collect::<Result<Vec<_>>>()?;
                worst = worst.max(three_term_residual(t, g, 0.0, &b));
            }
            Ok(worst)
        })
        .collect();
    CheckResult::from_points("B recursions", 1e-8, res)
}

/// `B_{k,r} = A_r C_k / γ` and `B_{k,r−1} = A_{r−1} C_k / γ`.
pub fn b_product_form(grid: &Grid) -> CheckResult {
    let res = grid
        .triples()
        .into_par_iter()
        .map(|(r, t, g)| {
            let a = a_coeffs(r, t, g, &QuadratureConfig::default())?;
            let mut worst = 0.0f64;
            for second in [r, r - 1] {
                for k in 0..=second {
                    let b = b_coeff(k, second, t, g)?;
                    let expect = a[second] * ln_c_coeff(k, t, g)?.exp() / g;
                    worst = worst.max((b - expect).abs() / expect.abs());
                }
            }
            Ok(worst)
        })
        .collect();
    CheckResult::from_points("B product form", 1e-8, res)
}

pub fn eta_recursion(grid: &Grid) -> CheckResult {
    let mut pts = Vec::new();
    for (t, g) in grid.pairs() {
        for &e in &grid.etas {
            pts.push((t, g, e));
        }
    }
    let res = pts
        .into_par_iter()
        .map(|(t, g, e)| {
            let a = a_eta_coeffs(grid.n_max, t, g, e, &QuadratureConfig::default())?;
            Ok(three_term_residual(t, g, e - 1.0, &a))
        })
        .collect();
    CheckResult::from_points("eta-weighted recursion", 1e-8, res)
}

pub fn key_identity(grid: &Grid) -> CheckResult {
    let res = grid
        .triples()
        .into_par_iter()
        .map(|(r, t, g)| key_identity_residual(r, t, g))
        .collect();
    CheckResult::from_points("key identity", 1e-8, res)
}

pub fn oracle_agreement(grid: &Grid) -> CheckResult {
    let res = grid
        .models()
        .into_par_iter()
        .map(|p| Ok(pmf_for(&p)?.sup_distance(&oracle_pmf(&p, 1e-12)?)))
        .collect();
    CheckResult::from_points("closed form vs linear solve", 1e-8, res)
}

pub fn balance_residuals(grid: &Grid) -> CheckResult {
    let res = grid
        .models()
        .into_par_iter()
        .map(|p| Ok(pbe_residual(&p, &pmf_for(&p)?).max))
        .collect();
    CheckResult::from_points("balance residuals", 1e-10, res)
}

/// Sup distance to the law without resetting at `γ = 10⁻⁶`.
pub fn vanishing_reset_limits(grid: &Grid) -> CheckResult {
    let g = 1e-6;
    let mut models = Vec::new();
    for &t in &grid.thetas {
        models.push(ModelParams::mminf(t, 1.0, g));
        for &e in &grid.etas {
            models.push(ModelParams::mm1m(t, e, 1.0, g));
        }
        for &r in grid.servers.iter().filter(|&&r| t < r as f64) {
            models.push(ModelParams::mmr(r, t, 1.0, g));
        }
    }
    let res = models
        .into_par_iter()
        .map(|p| {
            let trunc = Truncation::with_eps(1e-12);
            Ok(pmf_for(&p)?.sup_distance(&classical_ref(&p, &trunc)?))
        })
        .collect();
    CheckResult::from_points("vanishing reset limits", 1e-4, res)
}

pub fn coincidences(grid: &Grid) -> CheckResult {
    let trunc = Truncation::with_eps(1e-14);
    let res = grid
        .pairs()
        .into_par_iter()
        .map(|(t, g)| {
            let one_server = mmr_reset(1, t, g, &trunc)?.sup_distance(&mm1_reset(t, 1.0, g, &trunc)?);
            let unit_eta =
                mm1m_reset(t, 1.0, 1.0, g, &trunc)?.sup_distance(&mminf_reset(t, g, &trunc)?);
            let rho = t / (t + g);
            let clearing = pmf_for(&ModelParams::clearing(t, g))?;
            let geo = (0..=clearing.n_max())
                .map(|i| (clearing.prob(i) - (1.0 - rho) * rho.powi(i as i32)).abs())
                .fold(0.0, f64::max);
            Ok(one_server.max(unit_eta).max(geo))
        })
        .collect();
    CheckResult::from_points("cross-model coincidences", 1e-10, res)
}

/// At `γ = 1`, `π_n = P(Poisson(θ) > n) / θ`.
pub fn unit_gamma(n_max: usize) -> CheckResult {
    let res = [0.5, 1.0, 2.0]
        .into_iter()
        .map(|theta: f64| {
            let pmf = mminf_reset(theta, 1.0, &Truncation::with_eps(1e-15))?;
            let mut worst = 0.0f64;
            for n in 0..=n_max {
                let upper: f64 = (n + 1..n + 400)
                    .map(|j| (j as f64 * theta.ln() - theta - ln_gamma(j as f64 + 1.0)).exp())
                    .sum();
                worst = worst.max((pmf.prob(n) - upper / theta).abs());
            }
            Ok(worst)
        })
        .collect();
    CheckResult::from_points("unit gamma Poisson tail", 1e-10, res)
}

/// Unit lattice increment at `q = 0.3` against `0.3·0.7ⁱ`.
pub fn wh_lattice() -> CheckResult {
    let res = (|| {
        let p = lattice_wh(&[0.0, 1.0], 0.3, 200)?;
        Ok(p.head
            .iter()
            .enumerate()
            .map(|(i, v)| (v - 0.3 * 0.7f64.powi(i as i32)).abs())
            .fold(0.0, f64::max))
    })();
    CheckResult::from_points("Wiener-Hopf lattice", 1e-15, vec![res])
}

/// `X ~ Exp(1)`, `U ≡ 0`, `q = 0.25`: sup error against
/// `q + (1−q)(1 − e^{−qt})` at `h`.
pub fn wh_exponential_error(h: f64) -> Result<f64> {
    let q = 0.25;
    let cfg = WhConfig {
        h: Some(h),
        t_max: Some(50.0),
        ..WhConfig::default()
    };
    let (sol, _) = solve_wh(
        &DistributionSpec::Deterministic { value: 0.0 },
        &DistributionSpec::Exponential { rate: 1.0 },
        q,
        &cfg,
    )?;
    Ok(sol.cdf.sup_distance_to(|t| q + (1.0 - q) * (1.0 - (-q * t).exp())))
}

pub fn wh_exponential() -> CheckResult {
    CheckResult::from_points("Wiener-Hopf exponential", 5e-3, vec![wh_exponential_error(0.01)])
}

/// Ratio of the exponential-case errors at `h/2` and `h`; first order
/// convergence puts it near 1/2.
pub fn wh_halving() -> CheckResult {
    let ratio = (|| Ok(wh_exponential_error(0.005)? / wh_exponential_error(0.01)?))();
    let dev = ratio.map(|r| (r - 0.5).abs() / 0.5);
    CheckResult::from_points("Wiener-Hopf error halves with h", 0.2, vec![dev])
}

/// `wh_residual` of solver output less `eps` plus the reported
/// discretization bound, over a few laws and reset probabilities.
pub fn wh_residual_bound() -> CheckResult {
    let cases = [
        ("det:0", "exp:1", 0.25),
        ("exp:1", "exp:2", 0.1),
        ("exp:2", "uniform:0,1", 0.5),
        ("det:1", "exp:1.5", 0.05),
        ("uniform:0,2", "det:1", 0.3),
    ];
    let res = cases
        .into_par_iter()
        .map(|(u, v, q)| {
            let u: DistributionSpec = u.parse()?;
            let v: DistributionSpec = v.parse()?;
            let cfg = WhConfig::default();
            let (sol, fx) = solve_wh(&u, &v, q, &cfg)?;
            let excess = wh_residual(&sol.cdf, &fx, q)? - cfg.eps - sol.discretization_bound;
            Ok(excess.max(0.0))
        })
        .collect();
    CheckResult::from_points("Wiener-Hopf residual bound", 0.0, res)
}

/// All deterministic checks on `grid`.
pub fn run_suite(grid: &Grid) -> Vec<CheckResult> {
    vec![
        a_recursion(grid),
        c_recursion(grid),
        b_recursions(grid),
        b_product_form(grid),
        eta_recursion(grid),
        key_identity(grid),
        oracle_agreement(grid),
        balance_residuals(grid),
        vanishing_reset_limits(grid),
        coincidences(grid),
        unit_gamma(50),
        wh_lattice(),
        wh_exponential(),
        wh_halving(),
        wh_residual_bound(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Grid {
        Grid {
            thetas: vec![0.5, 2.0],
            gammas: vec![0.5, 1.0],
            servers: vec![1, 3],
            etas: vec![0.5, 2.0],
            n_max: 30,
        }
    }

    #[test]
    fn small_grid_identities_hold() {
        let g = small();
        for c in [a_recursion(&g), c_recursion(&g), b_recursions(&g), b_product_form(&g), eta_recursion(&g), key_identity(&g)] {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn residual_detects_a_broken_sequence() {
        let mut a = a_coeffs(10, 1.0, 1.0, &QuadratureConfig::default()).unwrap();
        assert!(three_term_residual(1.0, 1.0, 0.0, &a) < 1e-12);
        a[5] *= 1.0 + 1e-6;
        assert!(three_term_residual(1.0, 1.0, 0.0, &a) > 1e-8);
    }

    #[test]
    fn errors_fail_the_check() {
        let c = CheckResult::from_points("x", 1.0, vec![Ok(0.1), Err(crate::Error::invalid("p", "bad"))]);
        assert!(!c.pass);
        assert!(c.failure.is_some());
        assert_eq!(c.points, 2);
    }
}
