use std::collections::BTreeMap;

use super::closed_form::{classical_ref, mm1_ratio, mm1_reset, mm1m_reset, mminf_reset, mmr_reset};
use super::params::{ModelKind, ModelParams};
use super::pmf::{geometric_tail, poisson_tail_bound, Pmf, Truncation};
use crate::error::{Error, Result};

/// A Markovian queue with resetting whose stationary law is known in closed
/// form.
pub trait QueueModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn params(&self) -> &ModelParams;

    fn stationary(&self, trunc: &Truncation) -> Result<Pmf>;

    fn classical(&self, trunc: &Truncation) -> Result<Pmf> {
        classical_ref(self.params(), trunc)
    }

    /// Certified upper bound on `P(X > n)` under the stationary law.
    fn tail_bound(&self, n: usize) -> f64;
}

/// Constructor stored in a [`ModelRegistry`].
pub type ModelFactory = fn(ModelParams) -> Result<Box<dyn QueueModel>>;

fn clearing_ratio(p: &ModelParams) -> f64 {
    p.lambda / (p.lambda + p.kappa)
}

struct MmInf(ModelParams);

impl QueueModel for MmInf {
    fn name(&self) -> &'static str {
        "mminf"
    }
    fn params(&self) -> &ModelParams {
        &self.0
    }
    fn stationary(&self, trunc: &Truncation) -> Result<Pmf> {
        mminf_reset(self.0.theta(), self.0.gamma(), trunc)
    }
    fn tail_bound(&self, n: usize) -> f64 {
        geometric_tail(clearing_ratio(&self.0), n).min(poisson_tail_bound(self.0.theta(), n))
    }
}

struct Mmr(ModelParams);

impl QueueModel for Mmr {
    fn name(&self) -> &'static str {
        "mmr"
    }
    fn params(&self) -> &ModelParams {
        &self.0
    }
    fn stationary(&self, trunc: &Truncation) -> Result<Pmf> {
        mmr_reset(self.0.r, self.0.theta(), self.0.gamma(), trunc)
    }
    fn tail_bound(&self, n: usize) -> f64 {
        // exact geometric tail where available, clearing bound otherwise
        let clear = geometric_tail(clearing_ratio(&self.0), n);
        match self.stationary(&Truncation::fixed(n).loose()) {
            Ok(p) => {
                let beyond: f64 = p.head[n + 1..].iter().sum();
                (beyond + p.tail_mass()).min(clear)
            }
            _ => clear,
        }
    }
}

struct Mm1(ModelParams);

impl QueueModel for Mm1 {
    fn name(&self) -> &'static str {
        "mm1"
    }
    fn params(&self) -> &ModelParams {
        &self.0
    }
    fn stationary(&self, trunc: &Truncation) -> Result<Pmf> {
        mm1_reset(self.0.lambda, self.0.mu, self.0.kappa, trunc)
    }
    fn tail_bound(&self, n: usize) -> f64 {
        mm1_ratio(self.0.lambda, self.0.mu, self.0.kappa)
            .map(|rho| geometric_tail(rho, n))
            .unwrap_or(1.0)
    }
}

struct Mm1m(ModelParams);

impl QueueModel for Mm1m {
    fn name(&self) -> &'static str {
        "mm1m"
    }
    fn params(&self) -> &ModelParams {
        &self.0
    }
    fn stationary(&self, trunc: &Truncation) -> Result<Pmf> {
        let p = &self.0;
        mm1m_reset(p.lambda, p.mu, p.nu, p.kappa, trunc)
    }
    fn tail_bound(&self, n: usize) -> f64 {
        let p = &self.0;
        let no_abandon = mm1_ratio(p.lambda, p.mu, p.kappa).unwrap_or(1.0);
        geometric_tail(clearing_ratio(p), n)
            .min(geometric_tail(no_abandon, n))
            .min(poisson_tail_bound(p.lambda / p.mu.min(p.nu), n))
    }
}

struct Clearing(ModelParams);

impl QueueModel for Clearing {
    fn name(&self) -> &'static str {
        "clearing"
    }
    fn params(&self) -> &ModelParams {
        &self.0
    }
    fn stationary(&self, trunc: &Truncation) -> Result<Pmf> {
        mm1_reset(self.0.lambda, 0.0, self.0.kappa, trunc)
    }
    fn tail_bound(&self, n: usize) -> f64 {
        geometric_tail(clearing_ratio(&self.0), n)
    }
}

impl Truncation {
    /// Same `n_max` with the certificate check effectively disabled.
    fn loose(self) -> Self {
        Truncation {
            eps: 1.0 - f64::EPSILON,
            ..self
        }
    }
}

/// Name → constructor table for the Markovian models.
pub struct ModelRegistry {
    entries: BTreeMap<&'static str, (ModelKind, ModelFactory)>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        ModelRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(ModelKind::MMInf, |p| Ok(Box::new(MmInf(p))));
        r.register(ModelKind::MMr, |p| Ok(Box::new(Mmr(p))));
        r.register(ModelKind::MM1, |p| Ok(Box::new(Mm1(p))));
        r.register(ModelKind::MM1M, |p| Ok(Box::new(Mm1m(p))));
        r.register(ModelKind::ClearingOnly, |p| Ok(Box::new(Clearing(p))));
        r
    }

    pub fn register(&mut self, kind: ModelKind, factory: ModelFactory) {
        self.entries.insert(kind.name(), (kind, factory));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    /// Builds the model registered under `name`; `params.kind` is
    /// overwritten with the registered kind.
    pub fn build(&self, name: &str, params: ModelParams) -> Result<Box<dyn QueueModel>> {
        let (kind, factory) = self.entries.get(name).ok_or_else(|| Error::UnknownStrategy {
            registry: "model",
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        let params = ModelParams {
            kind: *kind,
            ..params
        };
        params.validate()?;
        factory(params)
    }
}

/// Builds the model matching `params.kind` from the standard registry.
pub fn model_for(params: &ModelParams) -> Result<Box<dyn QueueModel>> {
    ModelRegistry::standard().build(params.kind.name(), *params)
}
