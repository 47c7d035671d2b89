//! Event-driven simulation of the Markovian queues with resetting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ModelKind, ModelParams, Pmf, Tail};
use crate::error::{Error, Result};
use crate::stats::batch_mean_ci;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub burn_in: f64,
    pub seed: u64,
    pub batches: usize,
    /// Independent replications, each on its own RNG stream.
    #[serde(default = "one")]
    pub replications: usize,
}

fn one() -> usize {
    1
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 1e6,
            burn_in: 1e3,
            seed: 0,
            batches: 20,
            replications: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::invalid("burn_in", format!("must be finite and >= 0, got {}", self.burn_in)));
        }
        if !(self.horizon > self.burn_in && self.horizon.is_finite()) {
            return Err(Error::invalid(
                "horizon",
                format!("must be finite and exceed burn_in, got {}", self.horizon),
            ));
        }
        if self.batches < 10 {
            return Err(Error::invalid("batches", format!("must be >= 10, got {}", self.batches)));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    /// Time-average occupancy over `(burn_in, horizon]`.
    pub pmf: Pmf,
    /// 95% batch-means half-width per state.
    pub half_width: Vec<f64>,
    /// Observed time summed over replications.
    pub total_time: f64,
    pub events: u64,
    /// Resets observed after burn-in.
    pub resets: u64,
    pub seed: u64,
}

impl SimEstimate {
    /// Observed resets per unit time.
    pub fn reset_frequency(&self) -> f64 {
        self.resets as f64 / self.total_time
    }
}

struct Run {
    /// `occ[b][s]`: time spent in state `s` during batch `b`.
    occ: Vec<Vec<f64>>,
    events: u64,
    resets: u64,
}

fn check_stable(model: &ModelParams) -> Result<()> {
    model.validate()?;
    if model.kappa == 0.0 && model.lambda > 0.0 {
        let cap = match model.kind {
            ModelKind::MMInf | ModelKind::MM1M => f64::INFINITY,
            ModelKind::MMr => model.r as f64 * model.mu,
            ModelKind::MM1 => model.mu,
            ModelKind::ClearingOnly => 0.0,
        };
        if !(model.lambda < cap) {
            return Err(Error::invalid(
                "kappa",
                "kappa = 0 requires lambda below the total service capacity",
            ));
        }
    }
    Ok(())
}

fn run_one(model: &ModelParams, cfg: &SimConfig, stream: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let batch_len = (cfg.horizon - cfg.burn_in) / cfg.batches as f64;
    let mut occ = vec![vec![0.0f64; 8]; cfg.batches];
    let mut state = 0usize;
    let mut t = 0.0f64;
    let mut events = 0u64;
    let mut resets = 0u64;
    while t < cfg.horizon {
        let up = model.lambda;
        let down = model.departure_rate(state);
        let reset = model.reset_rate(state);
        let total = up + down + reset;
        let next = if total > 0.0 {
            let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
            t + hold
        } else {
            f64::INFINITY
        };
        // split [t, next) ∩ (burn_in, horizon] over the batches
        let lo = t.max(cfg.burn_in);
        let hi = next.min(cfg.horizon);
        if hi > lo {
            let mut a = lo;
            let mut b = (((lo - cfg.burn_in) / batch_len) as usize).min(cfg.batches - 1);
            loop {
                let end = if b + 1 == cfg.batches {
                    hi
                } else {
                    hi.min(cfg.burn_in + (b + 1) as f64 * batch_len)
                };
                if end > a {
                    let row = &mut occ[b];
                    if state >= row.len() {
                        row.resize(state + 1, 0.0);
                    }
                    row[state] += end - a;
                    a = end;
                }
                if a >= hi || b + 1 == cfg.batches {
                    break;
                }
                b += 1;
            }
        }
        if next >= cfg.horizon {
            break;
        }
        t = next;
        events += 1;
        let u = rng.random::<f64>() * total;
        if u < up {
            state += 1;
        } else if u < up + down {
            state -= 1;
        } else {
            state = 0;
            if t > cfg.burn_in {
                resets += 1;
            }
        }
    }
    Run {
        occ,
        events,
        resets,
    }
}

/// Time-average stationary occupancy with batch-means intervals.
///
/// Each replication runs on stream `i` of a ChaCha8 generator seeded with
/// `cfg.seed`; results are merged in replication order, so the output is a
/// function of `(model, cfg)` only.
pub fn simulate_ctmc(model: &ModelParams, cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate()?;
    check_stable(model)?;
    let runs: Vec<Run> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|s| run_one(model, cfg, s))
        .collect();
    let width = runs
        .iter()
        .flat_map(|r| r.occ.iter().map(|row| row.len()))
        .max()
        .unwrap_or(1);
    let batch_len = (cfg.horizon - cfg.burn_in) / cfg.batches as f64;
    let mut total = vec![0.0f64; width];
    let mut per_batch: Vec<Vec<f64>> = vec![Vec::new(); width];
    let mut events = 0;
    let mut resets = 0;
    for run in &runs {
        events += run.events;
        resets += run.resets;
        for row in &run.occ {
            for (s, slot) in per_batch.iter_mut().enumerate() {
                let v = row.get(s).copied().unwrap_or(0.0);
                total[s] += v;
                slot.push(v / batch_len);
            }
        }
    }
    let total_time = (cfg.horizon - cfg.burn_in) * cfg.replications as f64;
    let mut head: Vec<f64> = total.iter().map(|v| v / total_time).collect();
    while head.len() > 1 && *head.last().unwrap() == 0.0 {
        head.pop();
    }
    let half_width = per_batch[..head.len()]
        .iter()
        .map(|b| batch_mean_ci(b).1)
        .collect();
    Ok(SimEstimate {
        pmf: Pmf {
            head,
            tail: Tail::BoundedRemainder { mass_bound: 0.0 },
        },
        half_width,
        total_time,
        events,
        resets,
        seed: cfg.seed,
    })
}
