//! Grid solution of `F = [q + (1−q)(F ∗ F_X)]·1_{ℝ₊}` by the geometric
//! operator series `F = Σ_j q(1−q)^j K^j(1_{ℝ₊})`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::dist::{DifferenceLaw, DistributionSpec};
use crate::error::{require_positive, require_probability_open, Error, Result};

/// Right-continuous CDF sampled at `0, h, …, Mh`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCdf {
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridCdf {
    /// `1_{ℝ₊}` on `m + 1` grid points.
    pub fn unit_step(h: f64, m: usize) -> Self {
        GridCdf {
            h,
            values: vec![1.0; m + 1],
        }
    }

    pub fn from_fn(h: f64, m: usize, f: impl Fn(f64) -> f64) -> Self {
        GridCdf {
            h,
            values: (0..=m).map(|k| f(k as f64 * h)).collect(),
        }
    }

    pub fn atom_at_zero(&self) -> f64 {
        self.values[0]
    }

    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn t_max(&self) -> f64 {
        self.m() as f64 * self.h
    }

    /// Step interpolation: the value at the largest grid point `≤ x`, 0 left
    /// of the origin and the terminal value right of the grid.
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let k = (x / self.h).floor() as usize;
        self.values[k.min(self.m())]
    }

    pub fn is_valid(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
            && self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// Largest gap to `f` over the grid points.
    pub fn sup_distance_to(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| (v - f(k as f64 * self.h)).abs())
            .fold(0.0, f64::max)
    }

    /// Convex combination `Σ wᵢ Gᵢ` on a shared grid.
    pub fn mix(parts: &[(f64, &GridCdf)]) -> Result<GridCdf> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("parts", "empty combination"))?
            .1;
        let mut values = vec![0.0; first.values.len()];
        for (w, g) in parts {
            check_step(first.h, g.h)?;
            if g.values.len() != values.len() {
                return Err(Error::invalid("parts", "grids differ in length"));
            }
            for (acc, v) in values.iter_mut().zip(&g.values) {
                *acc += w * v;
            }
        }
        Ok(GridCdf { h: first.h, values })
    }
}

/// Law of `X` as point masses on `y_i = −T + i h`, `i = 0..=2N` with
/// `T = N h`. Mass `F(y_i) − F(y_{i−1})` sits at the right end `y_i` of each
/// cell; the mass left of `−T` is lumped at `−T`, the mass right of `T` at
/// `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCdf {
    pub h: f64,
    pub half_steps: usize,
    pub masses: Vec<f64>,
    /// Mass moved from outside the window onto its end points.
    pub relocated: f64,
}

impl WindowCdf {
    pub fn from_cdf(h: f64, half_steps: usize, cdf: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        require_positive("h", h)?;
        let n = 2 * half_steps;
        let mut f_prev = 0.0;
        let mut masses = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let y = (i as f64 - half_steps as f64) * h;
            let f = cdf(y)?.clamp(f_prev, 1.0);
            masses.push(f - f_prev);
            f_prev = f;
        }
        let upper = 1.0 - f_prev;
        masses[n] += upper;
        Ok(WindowCdf {
            h,
            half_steps,
            relocated: masses[0] + upper,
            masses,
        })
    }

    /// All mass at the grid point nearest `y`.
    pub fn point_mass(h: f64, half_steps: usize, y: f64) -> Result<Self> {
        require_positive("h", h)?;
        let i = (y / h).round() as i64 + half_steps as i64;
        if i < 0 || i > 2 * half_steps as i64 {
            return Err(Error::invalid("y", format!("{y} lies outside the window")));
        }
        let mut masses = vec![0.0; 2 * half_steps + 1];
        masses[i as usize] = 1.0;
        Ok(WindowCdf {
            h,
            half_steps,
            masses,
            relocated: 0.0,
        })
    }

    pub fn t(&self) -> f64 {
        self.half_steps as f64 * self.h
    }

    /// `Σ_{y_i > t} p_i` at `t = 0, h, …`: the grid version of `P(X > t)`.
    pub fn survival_at(&self, k: usize) -> f64 {
        let start = self.half_steps + k + 1;
        self.masses.get(start..).map(|s| s.iter().sum()).unwrap_or(0.0)
    }
}

fn check_step(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        Err(Error::GridMismatch { left: a, right: b })
    } else {
        Ok(())
    }
}

/// Precomputed convolution with the masses of a [`WindowCdf`] for CDFs on
/// `m + 1` grid points.
pub struct KOperator {
    m: usize,
    half: usize,
    masses: Vec<f64>,
    fft: Option<FftPlan>,
}

struct FftPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex64>,
}

/// Below this many multiply-adds the direct sum is used.
const DIRECT_LIMIT: usize = 1 << 20;

impl KOperator {
    pub fn new(fx: &WindowCdf, m: usize) -> Self {
        let half = fx.half_steps;
        let taps = fx.masses.len();
        let fft = if (m + 1) * taps <= DIRECT_LIMIT {
            None
        } else {
            let len = (m + 2 * half + 1 + taps - 1).next_power_of_two();
            let mut planner = FftPlanner::<f64>::new();
            let forward = planner.plan_fft_forward(len);
            let inverse = planner.plan_fft_inverse(len);
            let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
            for (s, p) in spectrum.iter_mut().zip(&fx.masses) {
                s.re = *p;
            }
            forward.process(&mut spectrum);
            Some(FftPlan {
                len,
                forward,
                inverse,
                spectrum,
            })
        };
        KOperator {
            m,
            half,
            masses: fx.masses.clone(),
            fft,
        }
    }

    /// `(KH)(x_k) = Σ_i H(x_k − y_i) p_i` for `k = 0..=m`, with `H` zero left
    /// of 0 and constant right of its grid; the result is clamped to a
    /// valid CDF.
    pub fn apply(&self, h_vals: &[f64]) -> Vec<f64> {
        let (m, half) = (self.m, self.half);
        // ext(s) = H((s − N) h), so (KH)_k = Σ_i p_i ext(k + 2N − i)
        let ext_len = m + 2 * half + 1;
        let ext = |s: usize| -> f64 {
            if s < half {
                0.0
            } else {
                h_vals[(s - half).min(m)]
            }
        };
        let mut out = vec![0.0; m + 1];
        match &self.fft {
            None => {
                for (k, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (i, p) in self.masses.iter().enumerate() {
                        if *p != 0.0 {
                            acc += p * ext(k + 2 * half - i);
                        }
                    }
                    *o = acc;
                }
            }
            Some(plan) => {
                let mut buf = vec![Complex64::new(0.0, 0.0); plan.len];
                for (s, b) in buf.iter_mut().enumerate().take(ext_len) {
                    b.re = ext(s);
                }
                plan.forward.process(&mut buf);
                for (b, s) in buf.iter_mut().zip(&plan.spectrum) {
                    *b *= s;
                }
                plan.inverse.process(&mut buf);
                let scale = 1.0 / plan.len as f64;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = buf[k + 2 * half].re * scale;
                }
            }
        }
        let mut run = 0.0f64;
        for o in out.iter_mut() {
            run = run.max(o.clamp(0.0, 1.0));
            *o = run;
        }
        out
    }
}

/// One application of `K H = (H ∗ F_X)·1_{ℝ₊}`.
pub fn wh_apply_k(h: &GridCdf, fx: &WindowCdf) -> Result<GridCdf> {
    check_step(h.h, fx.h)?;
    let op = KOperator::new(fx, h.m());
    Ok(GridCdf {
        h: h.h,
        values: op.apply(&h.values),
    })
}

/// Partial sum of the operator series with its error certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhSolution {
    pub cdf: GridCdf,
    /// Number of series terms summed (`j = 0..terms`).
    pub terms: usize,
    /// `(1−q)^{terms}`: mass of the omitted terms.
    pub truncation_bound: f64,
    /// Window mass relocated onto the end points plus the CDF defect at the
    /// right edge of the grid plus a floating-point allowance.
    pub discretization_bound: f64,
}

/// Floating-point allowance added to the discretization bound.
const ROUNDOFF_ALLOWANCE: f64 = 1e-12;

/// Sums `q(1−q)^j K^j(1_{ℝ₊})` on `m + 1` grid points until the remaining
/// weight `(1−q)^{j+1}` drops below `eps` or `j_max` terms have been added.
pub fn wh_series(fx: &WindowCdf, q: f64, m: usize, eps: f64, j_max: usize) -> Result<WhSolution> {
    require_probability_open("q", q)?;
    require_positive("eps", eps)?;
    let op = KOperator::new(fx, m);
    let mut power = vec![1.0; m + 1];
    let mut acc = vec![0.0; m + 1];
    let mut weight = q;
    let mut remaining = 1.0 - q;
    let mut terms = 0;
    loop {
        for (a, p) in acc.iter_mut().zip(&power) {
            *a += weight * p;
        }
        terms += 1;
        if remaining < eps || terms > j_max {
            break;
        }
        power = op.apply(&power);
        weight *= 1.0 - q;
        remaining *= 1.0 - q;
    }
    for a in acc.iter_mut() {
        *a = a.min(1.0);
    }
    let edge_defect = 1.0 - acc[m];
    Ok(WhSolution {
        cdf: GridCdf {
            h: fx.h,
            values: acc,
        },
        terms,
        truncation_bound: remaining,
        discretization_bound: fx.relocated + edge_defect.max(0.0) + ROUNDOFF_ALLOWANCE,
    })
}

/// `sup_k |F − q − (1−q) K F|` over the grid.
pub fn wh_residual(f: &GridCdf, fx: &WindowCdf, q: f64) -> Result<f64> {
    require_probability_open("q", q)?;
    let kf = wh_apply_k(f, fx)?;
    Ok(f.values
        .iter()
        .zip(&kf.values)
        .map(|(a, b)| (a - q - (1.0 - q) * b).abs())
        .fold(0.0, f64::max))
}

/// Grid and tolerance settings for [`solve_wh`]. Unset lengths default to
/// `h = 0.01·E[V]` and `T = 50·E[V]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhConfig {
    pub h: Option<f64>,
    pub t_max: Option<f64>,
    pub eps: f64,
    pub j_max: usize,
    /// Largest admissible mass outside the window of `X`.
    pub window_tol: f64,
}

impl Default for WhConfig {
    fn default() -> Self {
        WhConfig {
            h: None,
            t_max: None,
            eps: 1e-12,
            j_max: 100_000,
            window_tol: 1e-10,
        }
    }
}

/// Builds the window of `X = V − U`, widening it until the mass outside is
/// below `cfg.window_tol`, and sums the series on `[0, T]`.
pub fn solve_wh(
    u: &DistributionSpec,
    v: &DistributionSpec,
    q: f64,
    cfg: &WhConfig,
) -> Result<(WhSolution, WindowCdf)> {
    require_probability_open("q", q)?;
    let law = DifferenceLaw::new(u.clone(), v.clone())?;
    let scale = if v.mean() > 0.0 { v.mean() } else { 1.0 };
    let h = cfg.h.unwrap_or(0.01 * scale);
    let t_max = cfg.t_max.unwrap_or(50.0 * scale);
    require_positive("h", h)?;
    require_positive("t_max", t_max)?;
    let m = (t_max / h).round().max(1.0) as usize;
    let mut half = m;
    loop {
        let t = half as f64 * h;
        let outside = law.cdf(-t)? + (1.0 - law.cdf(t)?);
        if outside < cfg.window_tol {
            break;
        }
        if half > 1 << 24 {
            return Err(Error::NonConvergence {
                what: "window of X",
                achieved: outside,
                target: cfg.window_tol,
            });
        }
        half *= 2;
    }
    let fx = WindowCdf::from_cdf(h, half, |y| law.cdf(y))?;
    let sol = wh_series(&fx, q, m, cfg.eps, cfg.j_max)?;
    Ok((sol, fx))
}
