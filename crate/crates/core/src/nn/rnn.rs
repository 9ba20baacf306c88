//! LSTM and GRU cells plus uni/bidirectional sequence runners.
//!
//! Gate layout inside the fused weight matrices:
//! - LSTM columns: input, forget, candidate, output (`4h` wide).
//! - GRU input columns: update, reset, candidate (`3h` wide); the recurrent
//!   weights are split into `[h x 2h]` for update/reset and `[h x h]` for
//!   the candidate, which sees `reset ∘ h`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};

use super::params::{Graph, Initializer, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    /// `gates * (h * (d + h) + h)`.
    pub fn param_count(self, input_dim: usize, hidden_dim: usize) -> usize {
        self.gates() * (hidden_dim * (input_dim + hidden_dim) + hidden_dim)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[serde(alias = "forward")]
    Uni,
    Bi,
}

#[derive(Clone, Debug)]
pub struct RnnCell {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub wx: ParamId,
    pub wh: ParamId,
    /// GRU candidate recurrent weights; `None` for LSTM.
    pub wh_candidate: Option<ParamId>,
    pub bias: ParamId,
}

/// Hidden state, plus cell memory for LSTM.
#[derive(Clone, Copy, Debug)]
pub struct RnnState {
    pub h: Var,
    pub c: Option<Var>,
}

impl RnnCell {
    pub fn new(
        store: &mut ParamStore,
        init: &mut Initializer,
        group: &str,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let (d, h) = (input_dim, hidden_dim);
        let fan_in = d + h;
        let g = kind.gates();
        let wx = store.add(group, format!("{prefix}.wx"), init.uniform(&[d, g * h], fan_in));
        let (wh, wh_candidate) = match kind {
            CellKind::Lstm => (
                store.add(group, format!("{prefix}.wh"), init.uniform(&[h, 4 * h], fan_in)),
                None,
            ),
            CellKind::Gru => {
                let wh = store.add(group, format!("{prefix}.wh"), init.uniform(&[h, 2 * h], fan_in));
                let whc = store.add(group, format!("{prefix}.wh_candidate"), init.uniform(&[h, h], fan_in));
                (wh, Some(whc))
            }
        };
        let bias = store.add(group, format!("{prefix}.bias"), init.uniform(&[g * h], fan_in));
        RnnCell {
            kind,
            input_dim,
            hidden_dim,
            wx,
            wh,
            wh_candidate,
            bias,
        }
    }

    pub fn param_count(&self) -> usize {
        self.kind.param_count(self.input_dim, self.hidden_dim)
    }

    pub fn zero_state(&self, g: &mut Graph, batch: usize) -> RnnState {
        let zeros = || Tensor::new(vec![batch, self.hidden_dim], vec![0.0; batch * self.hidden_dim]).unwrap();
        let h = g.input(zeros());
        let c = (self.kind == CellKind::Lstm).then(|| g.input(zeros()));
        RnnState { h, c }
    }

    pub fn step(&self, g: &mut Graph, x: Var, state: &RnnState) -> Result<RnnState> {
        let dims = g.tape.shape(x).dims().to_vec();
        if dims.len() != 2 || dims[1] != self.input_dim {
            return Err(Error::Contract(format!(
                "rnn step expects [batch x {}] input, got {}",
                self.input_dim,
                g.tape.shape(x)
            )));
        }
        let hdims = g.tape.shape(state.h).dims();
        if hdims != [dims[0], self.hidden_dim] {
            return Err(Error::Contract(format!(
                "rnn step expects [{} x {}] state, got {}",
                dims[0],
                self.hidden_dim,
                g.tape.shape(state.h)
            )));
        }
        match self.kind {
            CellKind::Lstm => self.lstm_step(g, x, state),
            CellKind::Gru => self.gru_step(g, x, state),
        }
    }

    fn lstm_step(&self, g: &mut Graph, x: Var, state: &RnnState) -> Result<RnnState> {
        let h = self.hidden_dim;
        let c_prev = state
            .c
            .ok_or_else(|| Error::Contract("LSTM step needs cell memory".into()))?;
        let (wx, wh, b) = (g.param(self.wx), g.param(self.wh), g.param(self.bias));
        let xw = g.tape.matmul(x, wx)?;
        let hw = g.tape.matmul(state.h, wh)?;
        let sum = g.tape.add(xw, hw)?;
        let pre = g.tape.add_row(sum, b)?;

        let i = g.tape.slice(pre, 1, 0, h)?;
        let f = g.tape.slice(pre, 1, h, 2 * h)?;
        let cand = g.tape.slice(pre, 1, 2 * h, 3 * h)?;
        let o = g.tape.slice(pre, 1, 3 * h, 4 * h)?;
        let i = g.tape.sigmoid(i);
        let f = g.tape.sigmoid(f);
        let cand = g.tape.tanh(cand);
        let o = g.tape.sigmoid(o);

        let keep = g.tape.hadamard(f, c_prev)?;
        let write = g.tape.hadamard(i, cand)?;
        let c = g.tape.add(keep, write)?;
        let tc = g.tape.tanh(c);
        let h_next = g.tape.hadamard(o, tc)?;
        Ok(RnnState { h: h_next, c: Some(c) })
    }

    fn gru_step(&self, g: &mut Graph, x: Var, state: &RnnState) -> Result<RnnState> {
        let h = self.hidden_dim;
        let whc = self
            .wh_candidate
            .ok_or_else(|| Error::Contract("GRU cell without candidate weights".into()))?;
        let (wx, wh, whc, b) = (g.param(self.wx), g.param(self.wh), g.param(whc), g.param(self.bias));
        let xw = g.tape.matmul(x, wx)?;
        let xw = g.tape.add_row(xw, b)?;
        let hw = g.tape.matmul(state.h, wh)?;

        let xz = g.tape.slice(xw, 1, 0, h)?;
        let xr = g.tape.slice(xw, 1, h, 2 * h)?;
        let xn = g.tape.slice(xw, 1, 2 * h, 3 * h)?;
        let hz = g.tape.slice(hw, 1, 0, h)?;
        let hr = g.tape.slice(hw, 1, h, 2 * h)?;

        let z = g.tape.add(xz, hz)?;
        let z = g.tape.sigmoid(z);
        let r = g.tape.add(xr, hr)?;
        let r = g.tape.sigmoid(r);
        let rh = g.tape.hadamard(r, state.h)?;
        let rhw = g.tape.matmul(rh, whc)?;
        let n = g.tape.add(xn, rhw)?;
        let n = g.tape.tanh(n);

        // (1 - z) ∘ n + z ∘ h = n + z ∘ (h - n)
        let diff = g.tape.sub(state.h, n)?;
        let gated = g.tape.hadamard(z, diff)?;
        let h_next = g.tape.add(n, gated)?;
        Ok(RnnState { h: h_next, c: None })
    }
}

/// Runs one cell over a sequence, or two cells in opposite directions.
#[derive(Clone, Debug)]
pub struct SequenceRunner {
    pub forward: RnnCell,
    pub backward: Option<RnnCell>,
}

impl SequenceRunner {
    pub fn new(
        store: &mut ParamStore,
        init: &mut Initializer,
        group: &str,
        kind: CellKind,
        direction: Direction,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let forward = RnnCell::new(store, init, group, "fwd", kind, input_dim, hidden_dim);
        let backward =
            (direction == Direction::Bi).then(|| RnnCell::new(store, init, group, "bwd", kind, input_dim, hidden_dim));
        SequenceRunner { forward, backward }
    }

    pub fn direction(&self) -> Direction {
        if self.backward.is_some() {
            Direction::Bi
        } else {
            Direction::Uni
        }
    }

    pub fn output_width(&self) -> usize {
        match self.backward {
            Some(_) => 2 * self.forward.hidden_dim,
            None => self.forward.hidden_dim,
        }
    }

    pub fn param_count(&self) -> usize {
        self.forward.param_count() + self.backward.as_ref().map_or(0, RnnCell::param_count)
    }

    /// Final hidden state; for bidirectional runners the forward and
    /// backward final states concatenated along the feature axis.
    pub fn run(&self, g: &mut Graph, seq: &[Var]) -> Result<Var> {
        let first = *seq
            .first()
            .ok_or_else(|| Error::Contract("run_sequence on an empty sequence".into()))?;
        let batch = g.tape.shape(first).dims()[0];
        let fwd = run_cell(g, &self.forward, seq.iter().copied(), batch)?;
        match &self.backward {
            None => Ok(fwd),
            Some(cell) => {
                let bwd = run_cell(g, cell, seq.iter().rev().copied(), batch)?;
                g.tape.concat(&[fwd, bwd], 1)
            }
        }
    }
}

fn run_cell(g: &mut Graph, cell: &RnnCell, seq: impl Iterator<Item = Var>, batch: usize) -> Result<Var> {
    let mut state = cell.zero_state(g, batch);
    for x in seq {
        state = cell.step(g, x, &state)?;
    }
    Ok(state.h)
}
