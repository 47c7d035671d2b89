use serde::{Deserialize, Serialize};

use crate::error::{require_nonneg, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    MMInf,
    MMr,
    MM1,
    MM1M,
    ClearingOnly,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::MMInf,
        ModelKind::MMr,
        ModelKind::MM1,
        ModelKind::MM1M,
        ModelKind::ClearingOnly,
    ];

    /// Registry key of the model.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MMInf => "mminf",
            ModelKind::MMr => "mmr",
            ModelKind::MM1 => "mm1",
            ModelKind::MM1M => "mm1m",
            ModelKind::ClearingOnly => "clearing",
        }
    }

    pub fn from_name(name: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Raw rates of a birth–death queue with resetting. `nu` is only read by
/// `MM1M`, `r` only by `MMr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub lambda: f64,
    pub mu: f64,
    pub kappa: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default = "one")]
    pub r: usize,
}

fn one() -> usize {
    1
}

impl ModelParams {
    pub fn mminf(lambda: f64, mu: f64, kappa: f64) -> Self {
        Self::raw(ModelKind::MMInf, lambda, mu, kappa, 0.0, 1)
    }

    pub fn mmr(r: usize, lambda: f64, mu: f64, kappa: f64) -> Self {
        Self::raw(ModelKind::MMr, lambda, mu, kappa, 0.0, r)
    }

    pub fn mm1(lambda: f64, mu: f64, kappa: f64) -> Self {
        Self::raw(ModelKind::MM1, lambda, mu, kappa, 0.0, 1)
    }

    pub fn mm1m(lambda: f64, mu: f64, nu: f64, kappa: f64) -> Self {
        Self::raw(ModelKind::MM1M, lambda, mu, kappa, nu, 1)
    }

    pub fn clearing(lambda: f64, kappa: f64) -> Self {
        Self::raw(ModelKind::ClearingOnly, lambda, 0.0, kappa, 0.0, 1)
    }

    fn raw(kind: ModelKind, lambda: f64, mu: f64, kappa: f64, nu: f64, r: usize) -> Self {
        ModelParams {
            kind,
            lambda,
            mu,
            kappa,
            nu,
            r,
        }
    }

    /// Checks the sign constraints of each model kind. Stability beyond these
    /// (e.g. `κ = 0` with `λ ≥ μ` for `MM1`) is reported when the law is
    /// requested.
    pub fn validate(&self) -> Result<()> {
        require_nonneg("lambda", self.lambda)?;
        require_nonneg("mu", self.mu)?;
        require_nonneg("kappa", self.kappa)?;
        require_nonneg("nu", self.nu)?;
        let need = |ok: bool, name: &'static str, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{what} for {}", self.kind.name())))
            }
        };
        match self.kind {
            ModelKind::MMInf => {
                need(self.mu > 0.0, "mu", "must be > 0")?;
                need(self.kappa > 0.0, "kappa", "must be > 0")
            }
            ModelKind::MMr => {
                need(self.r >= 1, "r", "must be >= 1")?;
                need(self.lambda > 0.0, "lambda", "must be > 0")?;
                need(self.mu > 0.0, "mu", "must be > 0")?;
                need(self.kappa > 0.0, "kappa", "must be > 0")
            }
            ModelKind::MM1 => Ok(()),
            ModelKind::MM1M => {
                need(self.mu > 0.0, "mu", "must be > 0")?;
                need(self.nu > 0.0, "nu", "must be > 0")?;
                need(self.kappa > 0.0, "kappa", "must be > 0")
            }
            ModelKind::ClearingOnly => {
                need(self.mu == 0.0, "mu", "must be 0")?;
                need(self.kappa > 0.0, "kappa", "must be > 0")
            }
        }
    }

    /// Rate used to normalise: `ν` for `MM1M`, `μ` otherwise.
    fn scale(&self) -> f64 {
        match self.kind {
            ModelKind::MM1M => self.nu,
            _ => self.mu,
        }
    }

    pub fn theta(&self) -> f64 {
        self.lambda / self.scale()
    }

    pub fn gamma(&self) -> f64 {
        self.kappa / self.scale()
    }

    /// `μ/ν` for `MM1M`, 1 otherwise.
    pub fn eta(&self) -> f64 {
        match self.kind {
            ModelKind::MM1M => self.mu / self.nu,
            _ => 1.0,
        }
    }

    /// Total service-plus-abandonment rate out of state `i`.
    pub fn departure_rate(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        match self.kind {
            ModelKind::MMInf => i as f64 * self.mu,
            ModelKind::MMr => i.min(self.r) as f64 * self.mu,
            ModelKind::MM1 => self.mu,
            ModelKind::MM1M => self.mu + (i - 1) as f64 * self.nu,
            ModelKind::ClearingOnly => 0.0,
        }
    }

    /// Rate of the jump to 0 out of state `i`.
    pub fn reset_rate(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.kappa
        }
    }
}
