//! Brute-force verification: truncated generators, dense stationary solves
//! and balance-equation residuals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytic::{model_for, ModelKind, ModelParams, Pmf, Tail};
use crate::error::{Error, Result};

/// Generator of the chain on `{0, …, N}` with arrivals dropped at `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub q: DMatrix<f64>,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residuals: Vec<f64>,
    pub labels: Vec<String>,
    pub max: f64,
}

pub fn build_generator(model: &ModelParams, n: usize) -> Result<GeneratorMatrix> {
    model.validate()?;
    if model.kind == ModelKind::MMr && n < model.r {
        return Err(Error::invalid(
            "n",
            format!("truncation {n} must be >= r = {}", model.r),
        ));
    }
    let dim = n + 1;
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        if i < n {
            q[(i, i + 1)] += model.lambda;
        }
        if i >= 1 {
            q[(i, i - 1)] += model.departure_rate(i);
            q[(i, 0)] += model.reset_rate(i);
        }
        let mut out = 0.0;
        for j in (0..dim).filter(|&j| j != i) {
            out += q[(i, j)];
        }
        q[(i, i)] = -out;
    }
    Ok(GeneratorMatrix { q })
}

/// Solves `πQ = 0, Σπ = 1` by LU with partial pivoting after replacing the
/// last balance equation with the normalisation row.
pub fn stationary_solve(gen: &GeneratorMatrix) -> Result<Pmf> {
    let dim = gen.dim();
    if dim == 1 {
        return Ok(Pmf::point_mass_at_zero());
    }
    let mut a = gen.q.transpose();
    a.row_mut(dim - 1).fill(1.0);
    let mut b = DVector::<f64>::zeros(dim);
    b[dim - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(Error::SingularSystem { dim })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { dim });
    }
    Ok(Pmf {
        head: x.iter().map(|&v| v.max(0.0)).collect(),
        tail: Tail::BoundedRemainder { mass_bound: 0.0 },
    })
}

/// Smallest `N` whose certified stationary tail mass is below `eps`.
pub fn oracle_size(model: &ModelParams, eps: f64) -> Result<usize> {
    let m = model_for(model)?;
    let floor = if model.kind == ModelKind::MMr { model.r } else { 0 };
    let mut hi = floor.max(1);
    while m.tail_bound(hi) >= eps {
        hi *= 2;
        if hi > 1 << 16 {
            return Err(Error::TruncationTooSmall {
                n_max: hi,
                bound: m.tail_bound(hi),
                eps,
            });
        }
    }
    let mut lo = floor;
    if m.tail_bound(lo) < eps {
        return Ok(lo);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if m.tail_bound(mid) < eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Dense-solve stationary law on a window certified to hold all but `eps`
/// of the mass.
pub fn oracle_pmf(model: &ModelParams, eps: f64) -> Result<Pmf> {
    let n = oracle_size(model, eps)?;
    stationary_solve(&build_generator(model, n)?)
}

/// Raw-rate balance equations over `0..=n_max`:
/// `λπ_0 = d_1π_1 + κΣ_{j≥1}π_j` and
/// `(λ + d_i + κ)π_i = λπ_{i−1} + d_{i+1}π_{i+1}`.
pub fn pbe_residual(model: &ModelParams, pmf: &Pmf) -> ResidualReport {
    let n = pmf.n_max();
    let lambda = model.lambda;
    let mut residuals = Vec::with_capacity(n + 1);
    let mut labels = Vec::with_capacity(n + 1);
    let r0 = lambda * pmf.prob(0)
        - model.departure_rate(1) * pmf.prob(1)
        - model.kappa * pmf.mass_above_zero();
    residuals.push(r0.abs());
    labels.push("state 0".to_string());
    for i in 1..=n {
        let out = (lambda + model.departure_rate(i) + model.reset_rate(i)) * pmf.prob(i);
        let inflow = lambda * pmf.prob(i - 1) + model.departure_rate(i + 1) * pmf.prob(i + 1);
        residuals.push((out - inflow).abs());
        labels.push(format!("state {i}"));
    }
    let max = residuals.iter().cloned().fold(0.0, f64::max);
    ResidualReport {
        residuals,
        labels,
        max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{mminf_reset, mmr_reset, Truncation};

    #[test]
    fn mminf_generator_rows() {
        let g = build_generator(&ModelParams::mminf(1.0, 1.0, 1.0), 2).unwrap();
        let expect = [[-1.0, 1.0, 0.0], [2.0, -3.0, 1.0], [1.0, 2.0, -3.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.rate(i, j), expect[i][j], "({i},{j})");
            }
        }
    }

    #[test]
    fn departure_and_reset_entries() {
        let g = build_generator(&ModelParams::mmr(2, 1.0, 0.7, 0.3), 8).unwrap();
        assert_eq!(g.rate(5, 4), 1.4);
        assert_eq!(g.rate(5, 0), 0.3);
        let g = build_generator(&ModelParams::mm1m(1.0, 2.0, 0.5, 0.25), 6).unwrap();
        assert_eq!(g.rate(3, 2), 3.0);
        assert_eq!(g.rate(3, 0), 0.25);
        assert!(build_generator(&ModelParams::mmr(3, 1.0, 1.0, 1.0), 2).is_err());
    }

    #[test]
    fn diagonal_balances_each_row() {
        let g = build_generator(&ModelParams::mm1m(1.3, 0.4, 0.9, 0.2), 30).unwrap();
        for i in 0..g.dim() {
            let mut off = 0.0;
            for j in (0..g.dim()).filter(|&j| j != i) {
                assert!(g.rate(i, j) >= 0.0);
                off += g.rate(i, j);
            }
            assert_eq!(g.rate(i, i), -off);
        }
    }

    #[test]
    fn clearing_solve_is_geometric() {
        let p = stationary_solve(&build_generator(&ModelParams::clearing(1.0, 1.0), 60).unwrap())
            .unwrap();
        for i in 0..=40 {
            assert!((p.head[i] - 0.5f64.powi(i as i32 + 1)).abs() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn single_state_is_point_mass() {
        let p = stationary_solve(&build_generator(&ModelParams::mminf(1.0, 1.0, 1.0), 0).unwrap())
            .unwrap();
        assert_eq!(p.head, vec![1.0]);
    }

    #[test]
    fn mminf_solve_matches_closed_form() {
        let model = ModelParams::mminf(1.0, 1.0, 1.0);
        let o = stationary_solve(&build_generator(&model, 60).unwrap()).unwrap();
        let a = mminf_reset(1.0, 1.0, &Truncation::default()).unwrap();
        assert!(o.sup_distance(&a) < 1e-8);
    }

    #[test]
    fn closed_form_satisfies_balance() {
        let model = ModelParams::mmr(2, 1.0, 1.0, 1.0);
        let p = mmr_reset(2, 1.0, 1.0, &Truncation::default()).unwrap();
        assert!(pbe_residual(&model, &p).max < 1e-10);
    }

    #[test]
    fn perturbation_shows_up_in_residual() {
        let model = ModelParams::mmr(2, 1.0, 1.0, 1.0);
        let mut p = mmr_reset(2, 1.0, 1.0, &Truncation::default()).unwrap();
        p.head[1] += 1e-3;
        let rep = pbe_residual(&model, &p);
        assert!(rep.residuals[0] >= 0.5e-3 && rep.residuals[1] >= 0.5e-3, "{:?}", &rep.residuals[..3]);
        assert_eq!(rep.labels[1], "state 1");
    }

    #[test]
    fn clearing_geometric_balances_exactly() {
        let model = ModelParams::clearing(1.0, 1.0);
        let p = Pmf::geometric(0.5, 50);
        assert!(pbe_residual(&model, &p).max < 1e-14);
    }

    #[test]
    fn oracle_size_certifies_tail() {
        let model = ModelParams::mminf(2.0, 1.0, 0.5);
        let n = oracle_size(&model, 1e-12).unwrap();
        let m = model_for(&model).unwrap();
        assert!(m.tail_bound(n) < 1e-12);
        assert!(n == 0 || m.tail_bound(n - 1) >= 1e-12);
    }
}
