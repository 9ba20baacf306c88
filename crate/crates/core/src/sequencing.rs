//! Feature-sequence construction and partial-parameter-sharing windows.
//!
//! [`build_sequence`] turns the embedded features `X0` into the sequence
//! `[X0 + A_0, X0 + A_1, ...]` of learned additive adaptations (or plain
//! copies of `X0` when adaptation is off). [`slice_windows`] then hands task
//! `i` the half-open window `[i*I, i*I + L)` of that sequence. Neighbouring
//! windows overlap by `L - I` positions; the overlapping items are the same
//! tape nodes, so gradients from both tasks meet there.

use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::nn::{Graph, Initializer, ParamId, ParamStore};

/// Window geometry: `n_tasks` windows of `window_len` items, each starting
/// `interval` items after the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingPlan {
    n_tasks: usize,
    window_len: usize,
    interval: usize,
}

impl SharingPlan {
    pub fn new(n_tasks: usize, window_len: usize, interval: usize) -> Result<Self> {
        if n_tasks == 0 {
            return Err(Error::Plan("n_tasks must be at least 1".into()));
        }
        if window_len == 0 {
            return Err(Error::Plan("window_len must be at least 1".into()));
        }
        if interval > window_len {
            return Err(Error::Plan(format!(
                "interval must satisfy 0 ≤ I ≤ L (got I={interval}, L={window_len})"
            )));
        }
        Ok(SharingPlan {
            n_tasks,
            window_len,
            interval,
        })
    }

    /// Two tasks, windows of 5, interval 2.
    pub fn xiaomi() -> Self {
        SharingPlan::new(2, 5, 2).unwrap()
    }

    /// Two tasks, windows of 3, interval 1.
    pub fn alicpp() -> Self {
        SharingPlan::new(2, 3, 1).unwrap()
    }

    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn interval(&self) -> usize {
        self.interval
    }

    /// `L + (n - 1) * I`.
    pub fn required_len(&self) -> usize {
        self.window_len + (self.n_tasks - 1) * self.interval
    }

    /// Index range of task `task`'s window.
    pub fn window(&self, task: usize) -> std::ops::Range<usize> {
        let start = task * self.interval;
        start..start + self.window_len
    }

    pub fn overlap(&self) -> usize {
        self.window_len - self.interval
    }

    pub fn sharing(&self) -> SharingKind {
        if self.interval == 0 {
            SharingKind::Hard
        } else if self.interval == self.window_len {
            SharingKind::Soft
        } else {
            SharingKind::Partial
        }
    }
}

pub fn required_len(plan: &SharingPlan) -> usize {
    plan.required_len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SharingKind {
    /// `I = 0`: every task sees the same window.
    Hard,
    /// `I = L`: windows are disjoint.
    Soft,
    /// `0 < I < L`.
    Partial,
}

impl std::fmt::Display for SharingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SharingKind::Hard => "hard",
            SharingKind::Soft => "soft",
            SharingKind::Partial => "partial",
        })
    }
}

/// Learned per-position offsets `A_i`, each as wide as `X0`.
#[derive(Clone, Debug)]
pub struct AdaptiveBank {
    seq_len: usize,
    width: usize,
    params: Vec<ParamId>,
}

impl AdaptiveBank {
    pub const GROUP: &'static str = "ada";

    /// Zero-initialized offsets, so an enabled bank starts out as the identity.
    pub fn enabled(store: &mut ParamStore, init: &mut Initializer, seq_len: usize, width: usize) -> Self {
        let params = (0..seq_len)
            .map(|i| store.add(Self::GROUP, format!("a{i}"), init.zeros(&[width])))
            .collect();
        AdaptiveBank { seq_len, width, params }
    }

    pub fn disabled(seq_len: usize, width: usize) -> Self {
        AdaptiveBank {
            seq_len,
            width,
            params: Vec::new(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        !self.params.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len() * self.width
    }
}

/// Items `[X_0, X_1, ...]`, each a `[batch x d]` node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSequence {
    pub items: Vec<Var>,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub fn build_sequence(g: &mut Graph, x0: Var, bank: &AdaptiveBank) -> Result<FeatureSequence> {
    let width = g.tape.shape(x0).dims().last().copied().unwrap_or(1);
    if width != bank.width {
        return Err(Error::Contract(format!(
            "adaptive bank width {} does not match X0 width {width}",
            bank.width
        )));
    }
    if !bank.is_enabled() {
        return Ok(FeatureSequence {
            items: vec![x0; bank.seq_len],
        });
    }
    let mut items = Vec::with_capacity(bank.seq_len);
    for &id in &bank.params {
        let a = g.param(id);
        items.push(g.tape.add_row(x0, a)?);
    }
    Ok(FeatureSequence { items })
}

/// Per-task windows; items are shared, not copied.
pub fn slice_windows(plan: &SharingPlan, seq: &FeatureSequence) -> Result<Vec<Vec<Var>>> {
    let need = plan.required_len();
    if seq.len() < need {
        return Err(Error::Plan(format!(
            "sequence too short: plan needs {need} items, got {}",
            seq.len()
        )));
    }
    Ok((0..plan.n_tasks).map(|i| seq.items[plan.window(i)].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use proptest::prelude::*;

    // Leaves of a fresh tape get ids 0..len, so ids double as positions.
    fn index_seq(len: usize) -> FeatureSequence {
        let mut t = crate::autodiff::Tape::new();
        FeatureSequence {
            items: (0..len).map(|_| t.leaf(Tensor::scalar(0.0))).collect(),
        }
    }

    fn ids(window: &[Var]) -> Vec<usize> {
        window.iter().map(|v| v.id()).collect()
    }

    #[test]
    fn paper_presets() {
        let k = slice_windows(&SharingPlan::new(2, 5, 2).unwrap(), &index_seq(7)).unwrap();
        assert_eq!(ids(&k[0]), vec![0, 1, 2, 3, 4]);
        assert_eq!(ids(&k[1]), vec![2, 3, 4, 5, 6]);
        assert_eq!(SharingPlan::xiaomi().required_len(), 7);
        assert_eq!(SharingPlan::alicpp().required_len(), 4);
        assert_eq!(required_len(&SharingPlan::new(1, 9, 4).unwrap()), 9);
    }

    #[test]
    fn hard_and_soft_degenerations() {
        let hard = SharingPlan::new(3, 4, 0).unwrap();
        let k = slice_windows(&hard, &index_seq(4)).unwrap();
        assert!(k.iter().all(|w| w == &k[0]));
        assert_eq!(hard.sharing(), SharingKind::Hard);

        let soft = SharingPlan::new(2, 3, 3).unwrap();
        let k = slice_windows(&soft, &index_seq(6)).unwrap();
        assert_eq!(ids(&k[0]), vec![0, 1, 2]);
        assert_eq!(ids(&k[1]), vec![3, 4, 5]);
        assert_eq!(soft.sharing(), SharingKind::Soft);
        assert_eq!(SharingPlan::new(2, 3, 1).unwrap().sharing(), SharingKind::Partial);
    }

    #[test]
    fn plan_errors() {
        let err = SharingPlan::new(2, 3, 4).unwrap_err().to_string();
        assert!(err.contains("0 ≤ I ≤ L"), "{err}");
        let err = slice_windows(&SharingPlan::new(2, 5, 2).unwrap(), &index_seq(6)).unwrap_err();
        assert!(err.to_string().contains("needs 7"), "{err}");
    }

    #[test]
    fn sequence_construction() {
        let mut store = ParamStore::new();
        let bank = AdaptiveBank::enabled(&mut store, &mut Initializer::new(0), 3, 2);
        store
            .set(bank.params()[1], Tensor::vector(vec![0.5, -0.5]).unwrap())
            .unwrap();
        let mut g = Graph::new(&store);
        let x0 = g.input(Tensor::matrix(1, 2, vec![1., 2.]).unwrap());
        let seq = build_sequence(&mut g, x0, &bank).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(g.value(seq.items[0]).data(), &[1., 2.]);
        assert_eq!(g.value(seq.items[1]).data(), &[1.5, 1.5]);

        let off = AdaptiveBank::disabled(4, 2);
        let seq = build_sequence(&mut g, x0, &off).unwrap();
        assert_eq!(seq.items, vec![x0; 4]);

        let wide = AdaptiveBank::disabled(4, 3);
        assert!(build_sequence(&mut g, x0, &wide).is_err());
    }

    proptest! {
        #[test]
        fn window_geometry(n in 1usize..6, l in 1usize..8, frac in 0.0f64..=1.0) {
            let i = ((l as f64) * frac).floor() as usize;
            let plan = SharingPlan::new(n, l, i).unwrap();
            let seq = index_seq(plan.required_len());
            let k = slice_windows(&plan, &seq).unwrap();
            prop_assert_eq!(k.len(), n);
            let mut covered = vec![false; plan.required_len()];
            for (t, w) in k.iter().enumerate() {
                prop_assert_eq!(w.len(), l);
                for v in w {
                    covered[v.id()] = true;
                }
                if t > 0 {
                    let prev: std::collections::HashSet<_> = k[t - 1].iter().collect();
                    let shared = w.iter().filter(|v| prev.contains(v)).count();
                    prop_assert_eq!(shared, l - i);
                }
            }
            prop_assert!(covered.iter().all(|&c| c));
        }
    }
}
