//! Structural invariants of sharing plans, models, cross layers and AUC.

mod common;

use dcrnn::autodiff::Tensor;
use dcrnn::cross::{dcn_layer, DcnStack};
use dcrnn::evaluation::{auc, count_params, ScoredSet};
use dcrnn::models::{Dcrnn, ModelGraph, ModelSpec};
use dcrnn::nn::{checkpoint, CellKind, Direction, FeatureIds, Graph, Initializer, ParamStore};
use dcrnn::sequencing::{slice_windows, FeatureSequence, SharingPlan};
use dcrnn::training::{weighted_bce, LossConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn batch() -> FeatureIds {
    FeatureIds::new(3, 3, vec![1, 2, 3, 4, 0, 5, 0, 3, 1]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn windows_follow_the_plan(n in 1usize..8, l in 1usize..10, i_frac in 0.0f64..=1.0) {
        let i = (l as f64 * i_frac).round() as usize;
        let plan = SharingPlan::new(n, l, i).unwrap();
        let need = plan.required_len();
        prop_assert_eq!(need, l + (n - 1) * i);
        let mut tape = dcrnn::autodiff::Tape::new();
        let seq = FeatureSequence { items: (0..need).map(|_| tape.leaf(Tensor::scalar(0.0))).collect() };
        let w = slice_windows(&plan, &seq).unwrap();
        for t in 0..n {
            prop_assert_eq!(w[t].len(), l);
            if t > 0 {
                let shared = w[t].iter().filter(|v| w[t - 1].contains(v)).count();
                prop_assert_eq!(shared, l - i);
            }
            if i == 0 {
                prop_assert_eq!(&w[t], &w[0]);
            }
            if i == l && t > 0 {
                prop_assert!(w[t].iter().all(|v| !w[t - 1].contains(v)));
            }
        }
    }

    #[test]
    fn interval_beyond_window_is_rejected(n in 1usize..5, l in 1usize..6, extra in 1usize..4) {
        prop_assert!(SharingPlan::new(n, l, l + extra).is_err());
    }

    #[test]
    fn auc_matches_pair_enumeration(seed in any::<u64>(), n in 2usize..200, levels in 1u32..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / 3.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let set = ScoredSet::new(scores.clone(), labels.clone()).unwrap();
        let a = auc(&set).unwrap();
        prop_assert!((a - common::brute_auc(&scores, &labels)).abs() < 1e-12);
        let warped = ScoredSet::new(scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect(), labels).unwrap();
        prop_assert!((auc(&warped).unwrap() - a).abs() < 1e-12);
    }
}

#[test]
fn overlapping_items_collect_gradient_from_both_tasks() {
    // With shared items, d loss / d X_k sums the contributions of every task
    // window that contains X_k.
    let model = Dcrnn::new(common::tiny_dcrnn(CellKind::Lstm, Direction::Bi, true), 3).unwrap();
    let per_task = |mask: [f64; 2]| {
        let mut g = Graph::new(model.params());
        let (_, windows) = model.task_inputs(&mut g, &batch()).unwrap();
        let logits = model.forward_windows(&mut g, &windows).unwrap();
        let mut total = None;
        for (t, &l) in logits.iter().enumerate() {
            let loss = weighted_bce(&mut g.tape, l, &[1.0, 0.0, 1.0], 1.0).unwrap();
            let loss = g.tape.scale(loss, mask[t]);
            total = Some(match total {
                None => loss,
                Some(acc) => g.tape.add(acc, loss).unwrap(),
            });
        }
        let grads = g.tape.backward(total.unwrap()).unwrap();
        // Items 1 and 2 are shared by the alicpp windows [0, 3) and [1, 4).
        (1..3)
            .map(|k| grads.get(windows[0][k]).map(|t| t.data().to_vec()))
            .collect::<Vec<_>>()
    };
    let both = per_task([1.0, 1.0]);
    let first = per_task([1.0, 0.0]);
    let second = per_task([0.0, 1.0]);
    for k in 0..2 {
        let (b, f, s) = (
            both[k].as_ref().unwrap(),
            first[k].as_ref().unwrap(),
            second[k].as_ref().unwrap(),
        );
        assert!(s.iter().any(|v| *v != 0.0), "task 1 must reach shared item");
        for i in 0..b.len() {
            assert!((b[i] - (f[i] + s[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn ada_degenerates_to_plain_copies_at_initialization() {
    let on = Dcrnn::new(common::tiny_dcrnn(CellKind::Lstm, Direction::Bi, true), 9).unwrap();
    let off = Dcrnn::new(common::tiny_dcrnn(CellKind::Lstm, Direction::Bi, false), 9).unwrap();
    let mut g = Graph::new(on.params());
    let (x0, windows) = on.task_inputs(&mut g, &batch()).unwrap();
    for w in &windows {
        for &item in w {
            assert_eq!(g.value(item).data(), g.value(x0).data());
        }
    }
    let a = ModelGraph::Dcrnn(on).predict(&batch()).unwrap();
    let b = ModelGraph::Dcrnn(off).predict(&batch()).unwrap();
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn dcn_cross_term_is_a_multiple_of_x0() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let d = rng.random_range(2..10);
        let rand_vec =
            |rng: &mut ChaCha8Rng, n: usize| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        let (x0v, hv, wv, bv) = (
            rand_vec(&mut rng, d),
            rand_vec(&mut rng, d),
            rand_vec(&mut rng, d),
            rand_vec(&mut rng, d),
        );
        let mut tape = dcrnn::autodiff::Tape::new();
        let x0 = tape.leaf(Tensor::matrix(1, d, x0v.clone()).unwrap());
        let h = tape.leaf(Tensor::matrix(1, d, hv.clone()).unwrap());
        let w = tape.leaf(Tensor::vector(wv).unwrap());
        let b = tape.leaf(Tensor::vector(bv.clone()).unwrap());
        let y = dcn_layer(&mut tape, x0, h, w, b).unwrap();
        let cross: Vec<f64> = (0..d).map(|i| tape.value(y).data()[i] - bv[i] - hv[i]).collect();
        let dot: f64 = cross.iter().zip(&x0v).map(|(a, b)| a * b).sum();
        let na = cross.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = x0v.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na > 1e-9 {
            assert!((dot.abs() / (na * nb) - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn dcn_stack_parameters_grow_linearly() {
    for depth in 1..5 {
        let mut store = ParamStore::new();
        DcnStack::new(&mut store, &mut Initializer::new(0), depth, 6);
        assert_eq!(store.scalar_count(), 12 * depth);
    }
}

#[test]
fn loss_ignores_batch_order() {
    let model = ModelSpec::Dcrnn(common::tiny_dcrnn(CellKind::Gru, Direction::Bi, true))
        .build(2)
        .unwrap();
    let ids = vec![1, 2, 3, 4, 0, 5, 0, 3, 1, 2, 2, 2];
    let labels = [[1.0, 0.0, 1.0, 1.0], [1.0, 0.0, 0.0, 1.0]];
    let loss_of = |order: &[usize]| {
        let rows: Vec<u32> = order.iter().flat_map(|&r| ids[r * 3..r * 3 + 3].to_vec()).collect();
        let fb = FeatureIds::new(4, 3, rows).unwrap();
        let mut g = Graph::new(model.params());
        let logits = model.forward(&mut g, &fb).unwrap();
        let cfg = LossConfig::alicpp();
        let mut total = 0.0;
        for (t, &l) in logits.iter().enumerate() {
            let z: Vec<f64> = order.iter().map(|&r| labels[t][r]).collect();
            let v = weighted_bce(&mut g.tape, l, &z, cfg.pos_weight[t]).unwrap();
            total += g.value(v).item().unwrap();
        }
        total
    };
    let base = loss_of(&[0, 1, 2, 3]);
    for order in [[3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]] {
        assert!((loss_of(&order) - base).abs() < 1e-12);
    }
}

#[test]
fn parameter_counts_match_checkpoint_and_formulas() {
    for spec in [
        ModelSpec::Dcrnn(common::tiny_dcrnn(CellKind::Lstm, Direction::Bi, true)),
        ModelSpec::Dcrnn(common::tiny_dcrnn(CellKind::Gru, Direction::Uni, false)),
        ModelSpec::Mmoe(common::tiny_mmoe()),
    ] {
        let model = spec.build(0).unwrap();
        let report = count_params(&model);
        let records = checkpoint::records(model.params());
        let from_records: usize = records.iter().map(|r| r.tensor.numel()).sum();
        assert_eq!(report.total, from_records);
        assert_eq!(report.groups.iter().map(|(_, n)| n).sum::<usize>(), report.total);
    }

    // Embedding 15·3, ada 4 positions · 9, per task BiLSTM 2·4·(4·(9+4)+4)
    // plus tower 8·5+5 + 5+1.
    let model = ModelSpec::Dcrnn(common::tiny_dcrnn(CellKind::Lstm, Direction::Bi, true))
        .build(0)
        .unwrap();
    let rnn = 2 * 4 * (4 * (9 + 4) + 4);
    let tower = 8 * 5 + 5 + 5 + 1;
    assert_eq!(count_params(&model).total, 45 + 36 + 2 * (rnn + tower));
    let groups = count_params(&model).groups;
    assert!(groups.iter().any(|(g, n)| g == "ada" && *n == 36));
    let no_ada = ModelSpec::Dcrnn(common::tiny_dcrnn(CellKind::Lstm, Direction::Bi, false))
        .build(0)
        .unwrap();
    assert!(count_params(&no_ada).groups.iter().all(|(g, _)| g != "ada"));
}

#[test]
fn mmoe_gates_are_distributions() {
    let model = dcrnn::models::Mmoe::new(common::tiny_mmoe(), 4).unwrap();
    let mut g = Graph::new(model.params());
    let x0 = g.input(Tensor::matrix(2, 9, (0..18).map(|i| (i as f64).cos()).collect()).unwrap());
    for w in model.gate_weights(&mut g, x0).unwrap() {
        let v = g.value(w);
        for r in 0..2 {
            let s: f64 = v.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(v.row(r).iter().all(|&p| p > 0.0));
        }
    }
}
