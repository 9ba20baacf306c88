//! Explicit feature-cross layers: the DCN cross layer and the vector-wise
//! compressed interaction (CIN) layer, plus a parameter-growth table that
//! compares them with RNN-based crossing.
//!
//! DCN: `h_t = x0 * <h_{t-1}, w> + b + h_{t-1}`. The cross term is always a
//! scalar multiple of `x0`.
//!
//! CIN: output row `k` is `sum_i sum_j W[k][i][j] * (h_{t-1}[i] ∘ x0[j])`,
//! interacting whole field vectors rather than individual bits.

use std::fmt::Write as _;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{CellKind, Graph, Initializer, ParamId, ParamStore};

/// One DCN cross layer over `[B x d]` rows with `w, b: [d]`.
pub fn dcn_layer(tape: &mut Tape, x0: Var, h_prev: Var, w: Var, b: Var) -> Result<Var> {
    let d = match tape.shape(x0).dims() {
        [_, d] => *d,
        _ => {
            return Err(Error::InvalidShape(format!(
                "dcn x0 must be [B x d], got {}",
                tape.shape(x0)
            )))
        }
    };
    if tape.shape(h_prev) != tape.shape(x0) {
        return Err(Error::Dimension {
            op: "dcn_layer",
            lhs: tape.shape(x0).clone(),
            rhs: tape.shape(h_prev).clone(),
        });
    }
    for p in [w, b] {
        if tape.shape(p).dims() != [d] {
            return Err(Error::Dimension {
                op: "dcn_layer",
                lhs: tape.shape(x0).clone(),
                rhs: tape.shape(p).clone(),
            });
        }
    }
    let w_col = tape.reshape(w, vec![d, 1])?;
    let s = tape.matmul(h_prev, w_col)?;
    let cross = tape.mul_col(x0, s)?;
    let biased = tape.add_row(cross, b)?;
    tape.add(biased, h_prev)
}

/// One CIN layer: `x0: [m x D]`, `h_prev: [r x D]`, `weights: [r' x r x m]`.
pub fn cin_layer(tape: &mut Tape, x0: Var, h_prev: Var, weights: Var) -> Result<Var> {
    let (m, d) = match tape.shape(x0).dims() {
        [m, d] => (*m, *d),
        _ => {
            return Err(Error::InvalidShape(format!(
                "cin x0 must be [m x D], got {}",
                tape.shape(x0)
            )))
        }
    };
    let (r, d2) = match tape.shape(h_prev).dims() {
        [r, d2] => (*r, *d2),
        _ => {
            return Err(Error::InvalidShape(format!(
                "cin h_prev must be [r x D], got {}",
                tape.shape(h_prev)
            )))
        }
    };
    if d != d2 {
        return Err(Error::Dimension {
            op: "cin_layer",
            lhs: tape.shape(x0).clone(),
            rhs: tape.shape(h_prev).clone(),
        });
    }
    let r_out = match tape.shape(weights).dims() {
        [k, i, j] if *i == r && *j == m => *k,
        _ => {
            return Err(Error::Dimension {
                op: "cin_layer weights",
                lhs: tape.shape(h_prev).clone(),
                rhs: tape.shape(weights).clone(),
            })
        }
    };
    // Row (i, j) of the pair block is h_prev[i] ∘ x0[j], built with 0/1
    // selection matrices so the whole layer stays on the tape.
    let mut pick_h = vec![0.0; r * m * r];
    let mut pick_x = vec![0.0; r * m * m];
    for i in 0..r {
        for j in 0..m {
            let row = i * m + j;
            pick_h[row * r + i] = 1.0;
            pick_x[row * m + j] = 1.0;
        }
    }
    let pick_h = tape.leaf(Tensor::matrix(r * m, r, pick_h)?);
    let pick_x = tape.leaf(Tensor::matrix(r * m, m, pick_x)?);
    let hs = tape.matmul(pick_h, h_prev)?;
    let xs = tape.matmul(pick_x, x0)?;
    let pairs = tape.hadamard(hs, xs)?;
    let flat = tape.reshape(weights, vec![r_out, r * m])?;
    tape.matmul(flat, pairs)
}

/// `depth` DCN layers over width `d`.
#[derive(Clone, Debug)]
pub struct DcnStack {
    pub width: usize,
    pub layers: Vec<(ParamId, ParamId)>,
}

impl DcnStack {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, depth: usize, width: usize) -> Self {
        let layers = (0..depth)
            .map(|t| {
                let w = store.add("dcn", format!("layer{t}.w"), init.uniform(&[width], width));
                let b = store.add("dcn", format!("layer{t}.b"), init.uniform(&[width], width));
                (w, b)
            })
            .collect();
        DcnStack { width, layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn forward(&self, g: &mut Graph, x0: Var) -> Result<Var> {
        let mut h = x0;
        for &(w, b) in &self.layers {
            let (w, b) = (g.param(w), g.param(b));
            h = dcn_layer(&mut g.tape, x0, h, w, b)?;
        }
        Ok(h)
    }
}

/// CIN layers with per-layer row counts; layer `t` maps `r_{t-1}` rows to
/// `r_t` rows, with `r_0 = m`.
#[derive(Clone, Debug)]
pub struct CinStack {
    pub fields: usize,
    pub rows: Vec<usize>,
    pub weights: Vec<ParamId>,
}

impl CinStack {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, fields: usize, rows: &[usize]) -> Self {
        let mut prev = fields;
        let weights = rows
            .iter()
            .enumerate()
            .map(|(t, &r)| {
                let w = store.add(
                    "cin",
                    format!("layer{t}.w"),
                    init.uniform(&[r, prev, fields], prev * fields),
                );
                prev = r;
                w
            })
            .collect();
        CinStack {
            fields,
            rows: rows.to_vec(),
            weights,
        }
    }

    /// Hidden field matrices of every layer, in order.
    pub fn forward(&self, g: &mut Graph, x0: Var) -> Result<Vec<Var>> {
        let mut h = x0;
        let mut out = Vec::with_capacity(self.weights.len());
        for &w in &self.weights {
            let w = g.param(w);
            h = cin_layer(&mut g.tape, x0, h, w)?;
            out.push(h);
        }
        Ok(out)
    }
}

pub fn dcn_param_count(depth: usize, width: usize) -> usize {
    2 * width * depth
}

/// Sum over layers of `r_t * r_{t-1} * m`, with `r_0 = m`.
pub fn cin_param_count(fields: usize, rows: &[usize]) -> usize {
    let mut prev = fields;
    rows.iter()
        .map(|&r| {
            let n = r * prev * fields;
            prev = r;
            n
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrowthRanges {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    /// Field count `m` seen by CIN.
    pub cin_fields: usize,
    /// Input width `d` of the CRNN cells.
    pub crnn_input: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrowthRow {
    pub kind: &'static str,
    pub depth_or_len: usize,
    pub width: usize,
    pub params: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrowthTable {
    pub rows: Vec<GrowthRow>,
}

/// Exact trainable-scalar counts per configuration.
///
/// `width` is the feature width for DCN, the per-layer row count for CIN
/// and the hidden width for CRNN; CRNN rows use the sequence length as
/// `depth_or_len` since cell parameters are reused at every step.
pub fn param_growth(ranges: &GrowthRanges) -> GrowthTable {
    let mut rows = Vec::new();
    for &depth in &ranges.depths {
        for &width in &ranges.widths {
            rows.push(GrowthRow {
                kind: "dcn",
                depth_or_len: depth,
                width,
                params: dcn_param_count(depth, width),
            });
            rows.push(GrowthRow {
                kind: "cin",
                depth_or_len: depth,
                width,
                params: cin_param_count(ranges.cin_fields, &vec![width; depth]),
            });
            for (kind, cell) in [("crnn-lstm", CellKind::Lstm), ("crnn-gru", CellKind::Gru)] {
                rows.push(GrowthRow {
                    kind,
                    depth_or_len: depth,
                    width,
                    params: cell.param_count(ranges.crnn_input, width),
                });
            }
        }
    }
    GrowthTable { rows }
}

impl GrowthTable {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>12} {:>6} {:>12}\n",
            "kind", "depth_or_len", "width", "params"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>12} {:>6} {:>12}",
                r.kind, r.depth_or_len, r.width, r.params
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,depth_or_len,width,params\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.kind, r.depth_or_len, r.width, r.params);
        }
        out
    }
}
