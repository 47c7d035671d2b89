use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::DistributionSpec;
use super::step::{gginf_in_place, kw_in_place, lindley_in_place, ResetDraw, ResetSpec, WorkloadState};
use crate::analytic::{Pmf, Tail};
use crate::error::{Error, Result};
use crate::stats::batch_mean_ci;

/// A workload recursion driven by `(U_n, V_n, Z_{n+1})`.
pub trait WorkloadRecursion: Send + Sync {
    fn name(&self) -> &'static str;

    fn initial(&self) -> WorkloadState;

    fn step(&self, state: &mut WorkloadState, u: f64, v: f64, z: ResetDraw);

    /// Scalar observable: the waiting time, or the clearing time for the
    /// infinite-server queue.
    fn observe(&self, state: &WorkloadState) -> f64;

    /// Number of jobs present, when the state carries it.
    fn busy(&self, _state: &WorkloadState) -> Option<usize> {
        None
    }

    /// True in the state every reset returns to.
    fn at_reset_state(&self, state: &WorkloadState) -> bool;
}

struct Gg1;

impl WorkloadRecursion for Gg1 {
    fn name(&self) -> &'static str {
        "gg1"
    }
    fn initial(&self) -> WorkloadState {
        WorkloadState::Scalar(0.0)
    }
    fn step(&self, state: &mut WorkloadState, u: f64, v: f64, z: ResetDraw) {
        if let WorkloadState::Scalar(w) = state {
            lindley_in_place(w, u, v, z);
        }
    }
    fn observe(&self, state: &WorkloadState) -> f64 {
        match state {
            WorkloadState::Scalar(w) => *w,
            _ => f64::NAN,
        }
    }
    fn at_reset_state(&self, state: &WorkloadState) -> bool {
        matches!(state, WorkloadState::Scalar(w) if *w == 0.0)
    }
}

struct Ggr {
    r: usize,
}

impl WorkloadRecursion for Ggr {
    fn name(&self) -> &'static str {
        "ggr"
    }
    fn initial(&self) -> WorkloadState {
        WorkloadState::Ascending(vec![0.0; self.r])
    }
    fn step(&self, state: &mut WorkloadState, u: f64, v: f64, z: ResetDraw) {
        if let WorkloadState::Ascending(w) = state {
            kw_in_place(w, u, v, z);
        }
    }
    fn observe(&self, state: &WorkloadState) -> f64 {
        match state {
            WorkloadState::Ascending(w) => w[0],
            _ => f64::NAN,
        }
    }
    fn at_reset_state(&self, state: &WorkloadState) -> bool {
        matches!(state, WorkloadState::Ascending(w) if w.iter().all(|x| *x == 0.0))
    }
}

struct GgInf;

impl WorkloadRecursion for GgInf {
    fn name(&self) -> &'static str {
        "gginf"
    }
    fn initial(&self) -> WorkloadState {
        WorkloadState::Descending(Vec::new())
    }
    fn step(&self, state: &mut WorkloadState, u: f64, v: f64, z: ResetDraw) {
        if let WorkloadState::Descending(w) = state {
            gginf_in_place(w, u, v, z);
        }
    }
    fn observe(&self, state: &WorkloadState) -> f64 {
        match state {
            WorkloadState::Descending(w) => w.first().copied().unwrap_or(0.0),
            _ => f64::NAN,
        }
    }
    fn busy(&self, state: &WorkloadState) -> Option<usize> {
        match state {
            WorkloadState::Descending(w) => Some(w.len()),
            _ => None,
        }
    }
    fn at_reset_state(&self, state: &WorkloadState) -> bool {
        matches!(state, WorkloadState::Descending(w) if w.is_empty())
    }
}

/// Constructor stored in a [`RecursionRegistry`]; receives the server count.
pub type RecursionFactory = fn(usize) -> Result<Box<dyn WorkloadRecursion>>;

pub struct RecursionRegistry {
    entries: BTreeMap<&'static str, RecursionFactory>,
}

impl RecursionRegistry {
    pub fn standard() -> Self {
        let mut reg = RecursionRegistry {
            entries: BTreeMap::new(),
        };
        reg.register("gg1", |_| Ok(Box::new(Gg1)));
        reg.register("ggr", |r| {
            if r == 0 {
                return Err(Error::invalid("r", "server count must be >= 1"));
            }
            Ok(Box::new(Ggr { r }))
        });
        reg.register("gginf", |_| Ok(Box::new(GgInf)));
        reg
    }

    pub fn register(&mut self, name: &'static str, factory: RecursionFactory) {
        self.entries.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn build(&self, name: &str, r: usize) -> Result<Box<dyn WorkloadRecursion>> {
        let f = self.entries.get(name).ok_or_else(|| Error::UnknownStrategy {
            registry: "recursion",
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        f(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecursionKind {
    GG1,
    GGr(usize),
    GGInf,
}

impl RecursionKind {
    pub fn name(&self) -> &'static str {
        match self {
            RecursionKind::GG1 => "gg1",
            RecursionKind::GGr(_) => "ggr",
            RecursionKind::GGInf => "gginf",
        }
    }

    pub fn build(&self) -> Result<Box<dyn WorkloadRecursion>> {
        let r = match self {
            RecursionKind::GGr(r) => *r,
            _ => 1,
        };
        RecursionRegistry::standard().build(self.name(), r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionConfig {
    pub n_steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub batches: usize,
}

impl Default for RecursionConfig {
    fn default() -> Self {
        RecursionConfig {
            n_steps: 1_000_000,
            burn_in: 10_000,
            seed: 0,
            batches: 20,
        }
    }
}

impl RecursionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps <= self.burn_in {
            return Err(Error::invalid(
                "n_steps",
                format!("must exceed burn_in ({} <= {})", self.n_steps, self.burn_in),
            ));
        }
        if self.batches < 10 || self.batches > self.n_steps - self.burn_in {
            return Err(Error::invalid(
                "batches",
                format!("need 10 <= batches <= recorded samples, got {}", self.batches),
            ));
        }
        Ok(())
    }

    pub fn recorded(&self) -> usize {
        self.n_steps - self.burn_in
    }
}

/// Lengths of the excursions between visits to the reset state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegenerationStats {
    pub cycles: u64,
    pub mean_length: f64,
    pub std_length: f64,
}

impl RegenerationStats {
    pub fn std_error(&self) -> f64 {
        self.std_length / (self.cycles as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionEstimate {
    pub recursion: String,
    /// Recorded observable, sorted ascending (the ECDF support).
    pub samples: Vec<f64>,
    pub mean: f64,
    pub mean_half_width: f64,
    pub atom_at_zero: f64,
    pub atom_half_width: f64,
    /// Number-in-system pmf at arrival epochs, with per-state half-widths.
    pub busy: Option<(Pmf, Vec<f64>)>,
    pub regeneration: RegenerationStats,
    pub resets: u64,
    pub seed: u64,
}

impl RecursionEstimate {
    /// Empirical CDF at `x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|s| *s <= x) as f64 / self.samples.len() as f64
    }
}

#[derive(Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

/// Runs the recursion for `cfg.n_steps` arrivals.
///
/// Draws per step, in order: `U`, `V`, then a uniform that resets when it
/// falls below `q`. Deterministic laws consume no draw. The observable of
/// the state reached after step `n` is recorded once `n ≥ burn_in`.
pub fn simulate_recursion(
    kind: &RecursionKind,
    u_spec: &DistributionSpec,
    v_spec: &DistributionSpec,
    reset: &ResetSpec,
    cfg: &RecursionConfig,
) -> Result<RecursionEstimate> {
    u_spec.validate("u")?;
    v_spec.validate("v")?;
    cfg.validate()?;
    let rec = kind.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = rec.initial();
    let n = cfg.recorded();
    let batch_size = n / cfg.batches;
    let mut samples = Vec::with_capacity(n);
    let mut busy_counts: Vec<Vec<u64>> = Vec::new();
    let mut batch_sum = vec![0.0f64; cfg.batches];
    let mut batch_zero = vec![0.0f64; cfg.batches];
    let mut cycles = Welford::default();
    let mut last_visit: Option<usize> = None;
    let mut resets = 0u64;
    for step in 0..cfg.n_steps {
        let u = u_spec.sample(&mut rng);
        let v = v_spec.sample(&mut rng);
        let z = reset.draw(rng.random::<f64>());
        rec.step(&mut state, u, v, z);
        if step < cfg.burn_in {
            continue;
        }
        if z == ResetDraw::Reset {
            resets += 1;
        }
        let idx = step - cfg.burn_in;
        let obs = rec.observe(&state);
        samples.push(obs);
        let b = (idx / batch_size.max(1)).min(cfg.batches - 1);
        batch_sum[b] += obs;
        if obs == 0.0 {
            batch_zero[b] += 1.0;
        }
        if let Some(s) = rec.busy(&state) {
            if s >= busy_counts.len() {
                busy_counts.resize(s + 1, vec![0; cfg.batches]);
            }
            busy_counts[s][b] += 1;
        }
        if rec.at_reset_state(&state) {
            if let Some(prev) = last_visit {
                cycles.push((idx - prev) as f64);
            }
            last_visit = Some(idx);
        }
    }
    let sizes: Vec<f64> = (0..cfg.batches)
        .map(|b| {
            if b + 1 == cfg.batches {
                (n - b * batch_size) as f64
            } else {
                batch_size as f64
            }
        })
        .collect();
    let per_batch = |acc: &[f64]| -> Vec<f64> { acc.iter().zip(&sizes).map(|(a, s)| a / s).collect() };
    let (_, mean_half_width) = batch_mean_ci(&per_batch(&batch_sum));
    let (_, atom_half_width) = batch_mean_ci(&per_batch(&batch_zero));
    let mean = samples.iter().sum::<f64>() / n as f64;
    let atom_at_zero = samples.iter().filter(|x| **x == 0.0).count() as f64 / n as f64;
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let busy = if busy_counts.is_empty() {
        None
    } else {
        let head = busy_counts
            .iter()
            .map(|c| c.iter().sum::<u64>() as f64 / n as f64)
            .collect();
        let hw = busy_counts
            .iter()
            .map(|c| {
                let f: Vec<f64> = c.iter().map(|x| *x as f64).collect();
                batch_mean_ci(&per_batch(&f)).1
            })
            .collect();
        Some((
            Pmf {
                head,
                tail: Tail::BoundedRemainder { mass_bound: 0.0 },
            },
            hw,
        ))
    };
    Ok(RecursionEstimate {
        recursion: rec.name().to_string(),
        samples,
        mean,
        mean_half_width,
        atom_at_zero,
        atom_half_width,
        busy,
        regeneration: RegenerationStats {
            cycles: cycles.n,
            mean_length: cycles.mean,
            std_length: cycles.std(),
        },
        resets,
        seed: cfg.seed,
    })
}

/// Number-in-system pmf at arrival epochs of the infinite-server queue with
/// resetting, from a continuous-time event simulation: each arrival first
/// removes finished jobs, then resets the system with probability `q`, is
/// counted, and finally joins with its own service time.
pub fn simulate_gginf_events(
    u_spec: &DistributionSpec,
    v_spec: &DistributionSpec,
    reset: &ResetSpec,
    cfg: &RecursionConfig,
) -> Result<Pmf> {
    u_spec.validate("u")?;
    v_spec.validate("v")?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut departures: Vec<f64> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut t = 0.0f64;
    // The first arrival is at time 0; later ones follow the interarrival law.
    for n in 0..cfg.n_steps {
        if n > 0 {
            t += u_spec.sample(&mut rng);
        }
        departures.retain(|d| *d > t);
        if rng.random::<f64>() < reset.q {
            departures.clear();
        }
        if n >= cfg.burn_in {
            let s = departures.len();
            if s >= counts.len() {
                counts.resize(s + 1, 0);
            }
            counts[s] += 1;
        }
        departures.push(t + v_spec.sample(&mut rng));
    }
    let total = cfg.recorded() as f64;
    Ok(Pmf {
        head: counts.iter().map(|c| *c as f64 / total).collect(),
        tail: Tail::BoundedRemainder { mass_bound: 0.0 },
    })
}
