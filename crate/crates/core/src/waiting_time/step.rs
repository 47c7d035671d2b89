//! Single steps of the workload recursions with resetting.
//!
//! The reset indicator follows the convention `Z = 0` means reset, which
//! happens with probability `q`; [`ResetDraw::Reset`] is `Z = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResetDraw {
    /// `Z = 0`.
    Reset,
    /// `Z = 1`.
    Continue,
}

impl ResetDraw {
    pub fn from_z(z: u8) -> Self {
        if z == 0 {
            ResetDraw::Reset
        } else {
            ResetDraw::Continue
        }
    }

    pub fn z(self) -> u8 {
        match self {
            ResetDraw::Reset => 0,
            ResetDraw::Continue => 1,
        }
    }
}

/// Reset probability per arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetSpec {
    pub q: f64,
}

impl ResetSpec {
    pub fn new(q: f64) -> Result<Self> {
        crate::error::require_probability_open("q", q)?;
        Ok(ResetSpec { q })
    }

    /// `Reset` when the uniform draw falls below `q`.
    pub fn draw(&self, uniform: f64) -> ResetDraw {
        if uniform < self.q {
            ResetDraw::Reset
        } else {
            ResetDraw::Continue
        }
    }
}

/// Residual-workload state seen by an arriving customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WorkloadState {
    Scalar(f64),
    /// Fixed length `r`, `w_1 ≤ … ≤ w_r`, all `≥ 0`.
    Ascending(Vec<f64>),
    /// `w_1 ≥ … ≥ w_s > 0`; empty means no job in the system.
    Descending(Vec<f64>),
}

impl WorkloadState {
    pub fn is_valid(&self) -> bool {
        match self {
            WorkloadState::Scalar(w) => *w >= 0.0,
            WorkloadState::Ascending(w) => {
                w.iter().all(|x| *x >= 0.0) && w.windows(2).all(|p| p[0] <= p[1])
            }
            WorkloadState::Descending(w) => {
                w.iter().all(|x| *x > 0.0) && w.windows(2).all(|p| p[0] >= p[1])
            }
        }
    }
}

/// `W' = Z (w + x)⁺`.
pub fn step_lindley(w: f64, x: f64, z: ResetDraw) -> f64 {
    match z {
        ResetDraw::Reset => 0.0,
        ResetDraw::Continue => (w + x).max(0.0),
    }
}

/// `Z [sort↑(w + v e₁) − u]⁺` on an ascending vector.
pub fn step_kw(state: &[f64], u: f64, v: f64, z: ResetDraw) -> Result<Vec<f64>> {
    if state.is_empty() {
        return Err(Error::invalid("state", "workload vector needs r >= 1 entries"));
    }
    let mut w = state.to_vec();
    kw_in_place(&mut w, u, v, z);
    Ok(w)
}

/// `Z · sort↓(drop₀([prepend(v, w) − u]⁺))`; an empty result is the empty
/// system.
pub fn step_gginf(state: &[f64], u: f64, v: f64, z: ResetDraw) -> Vec<f64> {
    let mut w = state.to_vec();
    gginf_in_place(&mut w, u, v, z);
    w
}

pub(crate) fn lindley_in_place(w: &mut f64, u: f64, v: f64, z: ResetDraw) {
    // (w + v) − u, the same arithmetic as the one-server KW step
    *w = match z {
        ResetDraw::Reset => 0.0,
        ResetDraw::Continue => ((*w + v) - u).max(0.0),
    };
}

pub(crate) fn kw_in_place(w: &mut [f64], u: f64, v: f64, z: ResetDraw) {
    if z == ResetDraw::Reset {
        w.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let moved = w[0] + v;
    let mut i = 0;
    while i + 1 < w.len() && w[i + 1] < moved {
        w[i] = w[i + 1];
        i += 1;
    }
    w[i] = moved;
    for x in w.iter_mut() {
        *x = (*x - u).max(0.0);
    }
}

pub(crate) fn gginf_in_place(w: &mut Vec<f64>, u: f64, v: f64, z: ResetDraw) {
    if z == ResetDraw::Reset {
        w.clear();
        return;
    }
    // subtracting u keeps the order, so positives form a prefix
    for x in w.iter_mut() {
        *x -= u;
    }
    let keep = w.partition_point(|x| *x > 0.0);
    w.truncate(keep);
    let arriving = v - u;
    if arriving > 0.0 {
        let at = w.partition_point(|x| *x >= arriving);
        w.insert(at, arriving);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lindley_examples() {
        assert_eq!(step_lindley(2.5, -1.0, ResetDraw::Continue), 1.5);
        assert_eq!(step_lindley(7.0, 3.0, ResetDraw::Reset), 0.0);
        assert_eq!(step_lindley(1.0, -3.0, ResetDraw::Continue), 0.0);
    }

    #[test]
    fn kw_examples() {
        assert_eq!(step_kw(&[0.0, 0.0], 1.0, 3.0, ResetDraw::Continue).unwrap(), vec![0.0, 2.0]);
        assert_eq!(step_kw(&[1.0, 4.0, 9.0], 0.5, 2.0, ResetDraw::Reset).unwrap(), vec![0.0; 3]);
        assert_eq!(
            step_kw(&[1.0, 2.0, 5.0], 0.5, 3.0, ResetDraw::Continue).unwrap(),
            vec![1.5, 3.5, 4.5]
        );
        assert!(step_kw(&[], 1.0, 1.0, ResetDraw::Continue).is_err());
    }

    #[test]
    fn gginf_examples() {
        assert_eq!(step_gginf(&[4.0, 2.0], 1.0, 5.0, ResetDraw::Continue), vec![4.0, 3.0, 1.0]);
        assert!(step_gginf(&[0.5], 1.0, 0.2, ResetDraw::Continue).is_empty());
        assert!(step_gginf(&[3.0, 1.0], 0.1, 2.0, ResetDraw::Reset).is_empty());
        // an entry hitting exactly zero is removed
        assert_eq!(step_gginf(&[3.0, 1.0], 1.0, 0.5, ResetDraw::Continue), vec![2.0]);
    }

    #[test]
    fn reset_draw_convention() {
        let spec = ResetSpec::new(0.3).unwrap();
        assert_eq!(spec.draw(0.1), ResetDraw::Reset);
        assert_eq!(spec.draw(0.3), ResetDraw::Continue);
        assert_eq!(ResetDraw::from_z(0), ResetDraw::Reset);
        assert_eq!(ResetDraw::Continue.z(), 1);
        assert!(ResetSpec::new(1.0).is_err());
        assert!(ResetSpec::new(0.0).is_err());
    }

    fn draw() -> impl Strategy<Value = ResetDraw> {
        prop_oneof![Just(ResetDraw::Reset), Just(ResetDraw::Continue)]
    }

    proptest! {
        #[test]
        fn kw_with_one_server_is_lindley(w in 0.0..50.0f64, u in 0.0..20.0f64, v in 0.0..20.0f64, z in draw()) {
            let kw = step_kw(&[w], u, v, z).unwrap()[0];
            let l = step_lindley(w, v - u, z);
            prop_assert!((kw - l).abs() <= 1e-12 * (w + u + v));
        }

        #[test]
        fn kw_preserves_order_and_sign(
            mut w in proptest::collection::vec(0.0..30.0f64, 1..8),
            u in 0.0..10.0f64, v in 0.0..10.0f64, z in draw()
        ) {
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let out = step_kw(&w, u, v, z).unwrap();
            prop_assert_eq!(out.len(), w.len());
            prop_assert!(WorkloadState::Ascending(out).is_valid());
        }

        #[test]
        fn kw_matches_literal_sort(
            mut w in proptest::collection::vec(0.0..30.0f64, 1..8),
            u in 0.0..10.0f64, v in 0.0..10.0f64
        ) {
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut lit = w.clone();
            lit[0] += v;
            lit.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lit: Vec<f64> = lit.iter().map(|x| (x - u).max(0.0)).collect();
            prop_assert_eq!(step_kw(&w, u, v, ResetDraw::Continue).unwrap(), lit);
        }

        #[test]
        fn gginf_matches_literal_operators(
            mut w in proptest::collection::vec(0.01..30.0f64, 0..10),
            u in 0.0..10.0f64, v in 0.0..10.0f64
        ) {
            w.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let mut lit = vec![v];
            lit.extend(&w);
            let mut lit: Vec<f64> = lit.iter().map(|x| (x - u).max(0.0)).filter(|x| *x > 0.0).collect();
            lit.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let out = step_gginf(&w, u, v, ResetDraw::Continue);
            prop_assert!(WorkloadState::Descending(out.clone()).is_valid());
            prop_assert_eq!(out, lit);
        }
    }
}
