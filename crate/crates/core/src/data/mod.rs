//! Datasets of sparse categorical records, their TSV wire format, a
//! synthetic two-task generator and run configuration.
//!
//! Wire format, one example per line:
//!
//! ```text
//! click<TAB>second<TAB>field:id,field:id,...
//! ```
//!
//! Labels are `0` or `1`. Fields absent from a line take the reserved id 0.
//! A second-task positive without a click violates the funnel and is
//! rejected.

pub mod config;
pub mod synth;

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::FeatureIds;

pub use synth::{gen_synthetic, gen_synthetic_with_scores, load_synth_spec, LatentScores, SynthSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    /// Field identifier as written in the wire format.
    pub key: u32,
    pub vocab: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub fields: Vec<FieldSpec>,
}

impl Schema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Data("schema needs at least one field".into()));
        }
        for (i, f) in fields.iter().enumerate() {
            if f.vocab == 0 {
                return Err(Error::Data(format!("field {} has an empty vocabulary", f.key)));
            }
            if fields[..i].iter().any(|g| g.key == f.key) {
                return Err(Error::Data(format!("field {} declared twice", f.key)));
            }
        }
        Ok(Schema { fields })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn vocab_sizes(&self) -> Vec<usize> {
        self.fields.iter().map(|f| f.vocab).collect()
    }

    fn position(&self, key: u32) -> Option<usize> {
        self.fields.iter().position(|f| f.key == key)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub click: bool,
    /// Conversion or valid-play label, downstream of the click.
    pub second: bool,
    /// One id per schema field, in schema order.
    pub ids: Vec<u32>,
}

impl Example {
    /// Task 0 is the click, task 1 the second funnel stage.
    pub fn label(&self, task: usize) -> bool {
        match task {
            0 => self.click,
            _ => self.second,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub schema: Schema,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub const TASK_NAMES: [&'static str; 2] = ["click", "conversion"];

    pub fn new(schema: Schema, examples: Vec<Example>) -> Result<Self> {
        for (i, ex) in examples.iter().enumerate() {
            if ex.ids.len() != schema.len() {
                return Err(Error::Data(format!(
                    "example {i} has {} ids, schema has {} fields",
                    ex.ids.len(),
                    schema.len()
                )));
            }
            if let Some((f, &id)) = ex
                .ids
                .iter()
                .enumerate()
                .find(|(f, &id)| id as usize >= schema.fields[*f].vocab)
            {
                return Err(Error::OutOfVocabulary {
                    field: f,
                    id: id as u64,
                    vocab: schema.fields[f].vocab,
                });
            }
            if ex.second && !ex.click {
                return Err(Error::Data(format!("example {i} converts without a click")));
            }
        }
        Ok(Dataset { schema, examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn task_count(&self) -> usize {
        Self::TASK_NAMES.len()
    }

    pub fn feature_batch(&self, indices: &[usize]) -> FeatureIds {
        let fields = self.schema.len();
        let mut ids = Vec::with_capacity(indices.len() * fields);
        for &i in indices {
            ids.extend_from_slice(&self.examples[i].ids);
        }
        FeatureIds {
            rows: indices.len(),
            fields,
            ids,
        }
    }

    /// Labels of `task` for the given examples, as 0.0 / 1.0.
    pub fn labels(&self, task: usize, indices: &[usize]) -> Vec<f64> {
        indices
            .iter()
            .map(|&i| if self.examples[i].label(task) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Fraction of positives per task.
    pub fn label_rates(&self) -> [f64; 2] {
        let n = self.len().max(1) as f64;
        let clicks = self.examples.iter().filter(|e| e.click).count() as f64;
        let second = self.examples.iter().filter(|e| e.second).count() as f64;
        [clicks / n, second / n]
    }

    /// Splits off the examples from `at` onward.
    pub fn split_off(&mut self, at: usize) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            examples: self.examples.split_off(at),
        }
    }

    pub fn write_tsv(&self, mut out: impl Write) -> Result<()> {
        let mut line = String::new();
        for ex in &self.examples {
            line.clear();
            line.push(if ex.click { '1' } else { '0' });
            line.push('\t');
            line.push(if ex.second { '1' } else { '0' });
            line.push('\t');
            for (k, (f, id)) in self.schema.fields.iter().zip(&ex.ids).enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{}:{}", f.key, id));
            }
            line.push('\n');
            out.write_all(line.as_bytes())
                .map_err(|e| Error::io("writing dataset", e))?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_tsv(&mut w)?;
        w.flush()
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub lines: usize,
    pub loaded: usize,
    pub malformed: usize,
    pub funnel_violations: usize,
}

enum LineError {
    Malformed(String),
    Funnel,
}

fn parse_label(s: &str) -> std::result::Result<bool, LineError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(LineError::Malformed(format!("label {other:?} is not 0 or 1"))),
    }
}

fn parse_line(line: &str, schema: &Schema) -> std::result::Result<Example, LineError> {
    let mut parts = line.split('\t');
    let (Some(c), Some(s), Some(feats), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(LineError::Malformed("expected three tab-separated columns".into()));
    };
    let click = parse_label(c)?;
    let second = parse_label(s)?;
    let mut ids = vec![0u32; schema.len()];
    let mut seen = vec![false; schema.len()];
    for item in feats.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = item
            .split_once(':')
            .ok_or_else(|| LineError::Malformed(format!("feature {item:?} is not field:id")))?;
        let key: u32 = k
            .parse()
            .map_err(|_| LineError::Malformed(format!("field {k:?} is not an integer")))?;
        let id: u32 = v
            .parse()
            .map_err(|_| LineError::Malformed(format!("id {v:?} is not an integer")))?;
        let f = schema
            .position(key)
            .ok_or_else(|| LineError::Malformed(format!("field {key} is not in the schema")))?;
        if seen[f] {
            return Err(LineError::Malformed(format!("field {key} appears twice")));
        }
        if id as usize >= schema.fields[f].vocab {
            return Err(LineError::Malformed(format!(
                "field {key}: id {id} outside vocabulary of size {}",
                schema.fields[f].vocab
            )));
        }
        seen[f] = true;
        ids[f] = id;
    }
    if second && !click {
        return Err(LineError::Funnel);
    }
    Ok(Example { click, second, ids })
}

/// Streams a TSV dataset. Bad lines are skipped and counted; once more
/// than `tolerance` lines have been rejected, loading fails.
pub fn read_tsv(input: impl BufRead, schema: &Schema, tolerance: usize) -> Result<(Dataset, LoadStats)> {
    let mut stats = LoadStats::default();
    let mut examples = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading line {}", n + 1), e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        match parse_line(line, schema) {
            Ok(ex) => examples.push(ex),
            Err(err) => {
                let reason = match err {
                    LineError::Malformed(m) => {
                        stats.malformed += 1;
                        m
                    }
                    LineError::Funnel => {
                        stats.funnel_violations += 1;
                        "funnel violation: second-stage label without a click".to_string()
                    }
                };
                if stats.malformed + stats.funnel_violations > tolerance {
                    return Err(Error::Data(format!("line {}: {reason}", n + 1)));
                }
            }
        }
    }
    stats.loaded = examples.len();
    Ok((
        Dataset {
            schema: schema.clone(),
            examples,
        },
        stats,
    ))
}

pub fn load_tsv(path: &Path, schema: &Schema, tolerance: usize) -> Result<(Dataset, LoadStats)> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    read_tsv(BufReader::new(file), schema, tolerance).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}
