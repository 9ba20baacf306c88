//! Rank-based AUC, parameter counting and the model comparison report.

use std::fmt::Write as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::ModelGraph;

/// Scores paired with binary labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Contract(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Mann-Whitney AUC with average ranks for ties:
/// `(sum of positive ranks - P(P+1)/2) / (P N)`.
pub fn auc(set: &ScoredSet) -> Result<f64> {
    let n = set.scores.len();
    let pos = set.positives();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes, got {pos} positives and {neg} negatives"
        )));
    }
    if set.scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("AUC over NaN scores".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| set.scores[a].total_cmp(&set.scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && set.scores[order[j]] == set.scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let avg = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&k| set.labels[k]).count();
        rank_sum += avg * tied_pos as f64;
        i = j;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamReport {
    pub groups: Vec<(String, usize)>,
    pub total: usize,
}

pub fn count_params(model: &ModelGraph) -> ParamReport {
    let store = model.params();
    let groups: Vec<(String, usize)> = store
        .groups()
        .into_iter()
        .map(|name| {
            let n = store.ids_in_group(&name).map(|id| store.get(id).numel()).sum();
            (name, n)
        })
        .collect();
    let total = groups.iter().map(|(_, n)| n).sum();
    ParamReport { groups, total }
}

/// Per-task logits and labels of `model` over all of `data`.
pub fn score_tasks(model: &ModelGraph, data: &Dataset, batch_size: usize) -> Result<Vec<ScoredSet>> {
    let n_tasks = model.n_tasks();
    if n_tasks > data.task_count() {
        return Err(Error::Contract(format!(
            "model has {n_tasks} tasks, data carries {} labels",
            data.task_count()
        )));
    }
    let mut sets = vec![ScoredSet::default(); n_tasks];
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let logits = model.predict(&data.feature_batch(chunk))?;
        for (r, &i) in chunk.iter().enumerate() {
            for (t, set) in sets.iter_mut().enumerate() {
                set.scores.push(logits.row(r)[t]);
                set.labels.push(data.examples[i].label(t));
            }
        }
    }
    Ok(sets)
}

/// AUC of every task; fails when any task is single-class.
pub fn evaluate(model: &ModelGraph, data: &Dataset, batch_size: usize) -> Result<Vec<f64>> {
    score_tasks(model, data, batch_size)?.iter().map(auc).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub model: String,
    pub task: usize,
    pub auc: f64,
    pub params: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub dcrnn_params: ParamReport,
    pub mmoe_params: ParamReport,
    /// `dcrnn total / mmoe total`.
    pub ratio: f64,
}

pub fn compare_report(
    dcrnn: &ModelGraph,
    mmoe: &ModelGraph,
    data: &Dataset,
    batch_size: usize,
) -> Result<CompareReport> {
    let dcrnn_params = count_params(dcrnn);
    let mmoe_params = count_params(mmoe);
    let mut rows = Vec::new();
    for (label, model, params) in [("dcrnn", dcrnn, &dcrnn_params), ("mmoe", mmoe, &mmoe_params)] {
        for (task, auc) in evaluate(model, data, batch_size)?.into_iter().enumerate() {
            rows.push(CompareRow {
                model: label.to_string(),
                task,
                auc,
                params: params.total,
            });
        }
    }
    let ratio = dcrnn_params.total as f64 / mmoe_params.total as f64;
    Ok(CompareReport {
        rows,
        dcrnn_params,
        mmoe_params,
        ratio,
    })
}

impl CompareReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<8} {:>4} {:>10} {:>12}\n", "model", "task", "auc", "params");
        for r in &self.rows {
            let _ = writeln!(out, "{:<8} {:>4} {:>10.6} {:>12}", r.model, r.task, r.auc, r.params);
        }
        let _ = writeln!(out, "param ratio dcrnn/mmoe = {:.6}", self.ratio);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,task,auc,params\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.model, r.task, r.auc, r.params);
        }
        out
    }
}
