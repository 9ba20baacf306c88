//! Finite-difference checks for every layer and for whole models.

mod common;

use dcrnn::autodiff::{ActivationKind, Tensor, Var};
use dcrnn::cross::{CinStack, DcnStack};
use dcrnn::models::{ModelGraph, ModelSpec};
use dcrnn::nn::gradcheck::check_params;
use dcrnn::nn::{
    CellKind, Dense, Direction, EmbeddingTable, FeatureIds, Graph, Initializer, ParamStore, RnnCell, SequenceRunner,
};
use dcrnn::sequencing::{build_sequence, AdaptiveBank};
use dcrnn::training::{multitask_loss, weighted_bce};
use dcrnn::Result;

const STEP: f64 = 1e-5;
const LAYER_TOL: f64 = 1e-6;
const MODEL_TOL: f64 = 1e-5;

fn wavy(dims: &[usize], phase: f64) -> Tensor {
    let n: usize = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|i| (i as f64 * 0.71 + phase).sin()).collect()).unwrap()
}

/// `sum(y ∘ R)` for a fixed `R`, so every output element has its own weight.
fn project(g: &mut Graph, y: Var) -> Result<Var> {
    let r = g.input(wavy(g.tape.shape(y).dims(), 0.3));
    let p = g.tape.hadamard(y, r)?;
    Ok(g.tape.reduce_sum(p))
}

fn assert_close(name: &str, err: f64, tol: f64) {
    assert!(err < tol, "{name}: relative error {err:e} ≥ {tol:e}");
}

#[test]
fn dense_layers() {
    for act in [
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::Relu,
        ActivationKind::Identity,
    ] {
        let mut store = ParamStore::new();
        let mut init = Initializer::new(1);
        let layer = Dense::new(&mut store, &mut init, "d", "layer", 4, 3, act);
        let x = store.add("input", "x", wavy(&[2, 4], 1.0));
        let r = check_params(&store, STEP, |g| {
            let x = g.param(x);
            let y = layer.forward(g, x)?;
            project(g, y)
        })
        .unwrap();
        assert_close(&format!("dense {act:?}"), r.max_relative_error(), LAYER_TOL);
    }
}

#[test]
fn embedding_table() {
    let mut store = ParamStore::new();
    let table = EmbeddingTable::new(&mut store, &mut Initializer::new(2), &[5, 4], 3).unwrap();
    let batch = FeatureIds::new(2, 2, vec![1, 3, 1, 0]).unwrap();
    let r = check_params(&store, STEP, |g| {
        let y = table.embed(g, &batch)?;
        project(g, y)
    })
    .unwrap();
    assert_close("embedding", r.max_relative_error(), LAYER_TOL);
}

#[test]
fn recurrent_cells() {
    for kind in [CellKind::Lstm, CellKind::Gru] {
        let mut store = ParamStore::new();
        let cell = RnnCell::new(&mut store, &mut Initializer::new(3), "rnn", "cell", kind, 3, 4);
        let x = store.add("input", "x", wavy(&[2, 3], 0.5));
        let h = store.add("input", "h", wavy(&[2, 4], 2.0));
        let r = check_params(&store, STEP, |g| {
            let (x, h) = (g.param(x), g.param(h));
            let mut state = cell.zero_state(g, 2);
            state.h = h;
            let next = cell.step(g, x, &state)?;
            let next = cell.step(g, x, &next)?;
            project(g, next.h)
        })
        .unwrap();
        assert_close(&format!("{kind:?} cell"), r.max_relative_error(), LAYER_TOL);
    }
}

#[test]
fn sequence_runners() {
    for kind in [CellKind::Lstm, CellKind::Gru] {
        for direction in [Direction::Uni, Direction::Bi] {
            let mut store = ParamStore::new();
            let runner = SequenceRunner::new(&mut store, &mut Initializer::new(4), "rnn", kind, direction, 3, 2);
            let xs: Vec<_> = (0..3)
                .map(|i| store.add("input", format!("x{i}"), wavy(&[2, 3], i as f64)))
                .collect();
            let r = check_params(&store, STEP, |g| {
                let seq: Vec<Var> = xs.iter().map(|&x| g.param(x)).collect();
                let y = runner.run(g, &seq)?;
                project(g, y)
            })
            .unwrap();
            assert_close(
                &format!("{kind:?} {direction:?} runner"),
                r.max_relative_error(),
                LAYER_TOL,
            );
        }
    }
}

#[test]
fn dcn_stack() {
    let mut store = ParamStore::new();
    let stack = DcnStack::new(&mut store, &mut Initializer::new(5), 3, 4);
    let x = store.add("input", "x0", wavy(&[2, 4], 0.2));
    let r = check_params(&store, STEP, |g| {
        let x = g.param(x);
        let y = stack.forward(g, x)?;
        project(g, y)
    })
    .unwrap();
    assert_close("dcn", r.max_relative_error(), LAYER_TOL);
}

#[test]
fn cin_stack() {
    let mut store = ParamStore::new();
    let stack = CinStack::new(&mut store, &mut Initializer::new(6), 3, &[2, 2]);
    let x = store.add("input", "x0", wavy(&[3, 4], 0.9));
    let r = check_params(&store, STEP, |g| {
        let x = g.param(x);
        let outs = stack.forward(g, x)?;
        let mut total = project(g, outs[0])?;
        for &o in &outs[1..] {
            let p = project(g, o)?;
            total = g.tape.add(total, p)?;
        }
        Ok(total)
    })
    .unwrap();
    assert_close("cin", r.max_relative_error(), LAYER_TOL);
}

#[test]
fn adaptive_bank() {
    let mut store = ParamStore::new();
    let bank = AdaptiveBank::enabled(&mut store, &mut Initializer::new(7), 3, 4);
    for (i, &id) in bank.params().to_vec().iter().enumerate() {
        store.set(id, wavy(&[4], i as f64)).unwrap();
    }
    let x = store.add("input", "x0", wavy(&[2, 4], 1.7));
    let r = check_params(&store, STEP, |g| {
        let x = g.param(x);
        let seq = build_sequence(g, x, &bank)?;
        let mut total = g.tape.reduce_sum(x);
        for (i, &item) in seq.items.iter().enumerate() {
            // Squares make each item's gradient depend on its value.
            let sq = g.tape.hadamard(item, item)?;
            let s = g.tape.scale(sq, 1.0 + i as f64);
            let p = project(g, s)?;
            total = g.tape.add(total, p)?;
        }
        Ok(total)
    })
    .unwrap();
    assert_close("adaptive bank", r.max_relative_error(), LAYER_TOL);
}

#[test]
fn weighted_bce_matches_finite_differences_and_closed_form() {
    let logits = [-3.0, -0.4, 0.0, 0.8, 5.0];
    let labels = [1.0, 0.0, 1.0, 0.0, 1.0];
    let w = 2.5;
    let mut store = ParamStore::new();
    let x = store.add("input", "x", Tensor::matrix(5, 1, logits.to_vec()).unwrap());
    let r = check_params(&store, STEP, |g| {
        let x = g.param(x);
        weighted_bce(&mut g.tape, x, &labels, w)
    })
    .unwrap();
    assert_close("weighted bce", r.max_relative_error(), LAYER_TOL);

    let mut g = Graph::new(&store);
    let xv = g.param(x);
    let loss = weighted_bce(&mut g.tape, xv, &labels, w).unwrap();
    let grads = g.tape.backward(loss).unwrap();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    for (i, (&xi, &z)) in logits.iter().zip(&labels).enumerate() {
        let expected = (w * z * (sig(xi) - 1.0) + (1.0 - z) * sig(xi)) / logits.len() as f64;
        let got = grads.get(xv).unwrap().data()[i];
        assert!((got - expected).abs() < 1e-15, "example {i}: {got} vs {expected}");
    }
}

fn model_loss(model: &ModelGraph, g: &mut Graph, batch: &FeatureIds) -> Result<Var> {
    let logits = model.forward(g, batch)?;
    let labels = [[1.0, 0.0], [1.0, 1.0]];
    let mut losses = Vec::new();
    for (t, &l) in logits.iter().enumerate() {
        losses.push(weighted_bce(
            &mut g.tape,
            l,
            &[labels[0][t], labels[1][t]],
            1.0 + t as f64,
        )?);
    }
    multitask_loss(&mut g.tape, &losses, &[1.0, 0.7])
}

fn randomize(model: &mut ModelGraph) {
    // Ada starts at zero; give it a generic point.
    let ids: Vec<_> = model.params().ids_in_group("ada").collect();
    for (k, id) in ids.into_iter().enumerate() {
        let dims = model.params().get(id).dims().to_vec();
        model.params_mut().set(id, wavy(&dims, k as f64).scaled(0.2)).unwrap();
    }
}

trait Scaled {
    fn scaled(self, s: f64) -> Self;
}

impl Scaled for Tensor {
    fn scaled(mut self, s: f64) -> Self {
        self.data_mut().iter_mut().for_each(|v| *v *= s);
        self
    }
}

#[test]
fn end_to_end_models() {
    let batch = FeatureIds::new(2, 3, vec![1, 2, 3, 4, 0, 5]).unwrap();
    let specs = [
        ModelSpec::Dcrnn(common::tiny_dcrnn(CellKind::Lstm, Direction::Bi, true)),
        ModelSpec::Dcrnn(common::tiny_dcrnn(CellKind::Gru, Direction::Uni, true)),
        ModelSpec::Dcrnn(common::tiny_dcrnn(CellKind::Gru, Direction::Bi, false)),
        ModelSpec::Mmoe(common::tiny_mmoe()),
    ];
    for spec in specs {
        let mut model = spec.build(11).unwrap();
        randomize(&mut model);
        let r = check_params(model.params(), STEP, |g| model_loss(&model, g, &batch)).unwrap();
        assert_close(&format!("{spec:?}"), r.max_relative_error(), MODEL_TOL);
    }
}
