use crate::autodiff::Var;
use crate::error::{Error, Result};

use super::params::{Graph, Initializer, ParamId, ParamStore};

/// Row-major block of categorical ids: `rows` examples by `fields` slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureIds {
    pub rows: usize,
    pub fields: usize,
    pub ids: Vec<u32>,
}

impl FeatureIds {
    pub fn new(rows: usize, fields: usize, ids: Vec<u32>) -> Result<Self> {
        if rows == 0 || ids.len() != rows * fields {
            return Err(Error::Contract(format!(
                "feature block of {rows} rows x {fields} fields cannot hold {} ids",
                ids.len()
            )));
        }
        Ok(FeatureIds { rows, fields, ids })
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.ids[r * self.fields..(r + 1) * self.fields]
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let ids = rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        FeatureIds {
            rows: rows.len(),
            fields: self.fields,
            ids,
        }
    }
}

/// One `[vocab x dim]` table per categorical field.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    tables: Vec<ParamId>,
    vocab_sizes: Vec<usize>,
    dim: usize,
}

impl EmbeddingTable {
    pub const GROUP: &'static str = "embedding";

    pub fn new(store: &mut ParamStore, init: &mut Initializer, vocab_sizes: &[usize], dim: usize) -> Result<Self> {
        if vocab_sizes.is_empty() || dim == 0 || vocab_sizes.contains(&0) {
            return Err(Error::Contract(format!(
                "embedding needs at least one field, positive vocabularies and width (got {vocab_sizes:?}, dim {dim})"
            )));
        }
        let tables = vocab_sizes
            .iter()
            .enumerate()
            .map(|(f, &v)| {
                // A lookup is a one-hot product, so the fan-in is the vocabulary.
                let value = init.uniform(&[v, dim], v);
                store.add(Self::GROUP, format!("field{f}"), value)
            })
            .collect();
        Ok(EmbeddingTable {
            tables,
            vocab_sizes: vocab_sizes.to_vec(),
            dim,
        })
    }

    pub fn field_count(&self) -> usize {
        self.tables.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_sizes(&self) -> &[usize] {
        &self.vocab_sizes
    }

    pub fn output_width(&self) -> usize {
        self.field_count() * self.dim
    }

    pub fn table(&self, field: usize) -> ParamId {
        self.tables[field]
    }

    pub fn param_count(&self) -> usize {
        self.vocab_sizes.iter().sum::<usize>() * self.dim
    }

    /// Concatenated field embeddings `X0`, `[rows x fields*dim]`.
    pub fn embed(&self, g: &mut Graph, batch: &FeatureIds) -> Result<Var> {
        if batch.fields != self.field_count() {
            return Err(Error::Contract(format!(
                "batch has {} fields, embedding expects {}",
                batch.fields,
                self.field_count()
            )));
        }
        let mut parts = Vec::with_capacity(self.field_count());
        let mut rows = Vec::with_capacity(batch.rows);
        for (f, (&table, &vocab)) in self.tables.iter().zip(&self.vocab_sizes).enumerate() {
            rows.clear();
            for r in 0..batch.rows {
                let id = batch.ids[r * batch.fields + f] as usize;
                if id >= vocab {
                    return Err(Error::OutOfVocabulary {
                        field: f,
                        id: id as u64,
                        vocab,
                    });
                }
                rows.push(id);
            }
            let t = g.param(table);
            parts.push(g.tape.gather_rows(t, &rows)?);
        }
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        g.tape.concat(&parts, 1)
    }
}
