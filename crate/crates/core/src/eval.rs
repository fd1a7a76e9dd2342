//! Accuracy of a prediction file against gold instances, per category.
//!
//! An instance counts as correct when its reply earns reward 1.0 under the
//! chosen scheme. Missing predictions are incorrect and tallied separately.
//!
//! `overall_macro` is the unweighted mean of category accuracies,
//! `overall_micro` is total correct over total count. Both are 0 for an
//! empty gold set.

use crate::error::{Error, Result};
use crate::model::{RewardScheme, TrainingInstance};
use crate::reward::score;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write;

pub const UNCATEGORIZED: &str = "uncategorized";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub count: usize,
    pub correct: usize,
    pub missing: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: RewardScheme,
    pub per_category: BTreeMap<String, CategoryStats>,
    pub overall_macro: f64,
    pub overall_micro: f64,
    pub total: usize,
    pub correct: usize,
    pub missing: usize,
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub reply: String,
}

pub fn evaluate(
    gold: &[TrainingInstance],
    predictions: &HashMap<String, String>,
    scheme: RewardScheme,
) -> Result<EvalReport> {
    let mut seen = HashSet::new();
    if let Some(dup) = gold.iter().find(|g| !seen.insert(g.id.as_str())) {
        return Err(Error::usage(format!("duplicate gold id `{}`", dup.id)));
    }

    let mut per_category: BTreeMap<String, CategoryStats> = BTreeMap::new();
    for inst in gold {
        let key = inst.category.as_deref().unwrap_or(UNCATEGORIZED).to_owned();
        let stats = per_category.entry(key).or_default();
        stats.count += 1;
        match predictions.get(&inst.id) {
            Some(reply) if score(inst, reply, scheme).reward == 1.0 => stats.correct += 1,
            Some(_) => {}
            None => stats.missing += 1,
        }
    }
    for stats in per_category.values_mut() {
        stats.accuracy = stats.correct as f64 / stats.count as f64;
    }

    let total: usize = per_category.values().map(|s| s.count).sum();
    let correct: usize = per_category.values().map(|s| s.correct).sum();
    let missing: usize = per_category.values().map(|s| s.missing).sum();
    let overall_macro = if per_category.is_empty() {
        0.0
    } else {
        per_category.values().map(|s| s.accuracy).sum::<f64>() / per_category.len() as f64
    };
    let overall_micro = if total == 0 { 0.0 } else { correct as f64 / total as f64 };

    Ok(EvalReport {
        scheme,
        per_category,
        overall_macro,
        overall_micro,
        total,
        correct,
        missing,
    })
}

impl EvalReport {
    /// Plain-text table for terminals.
    pub fn render_table(&self) -> String {
        let width = self
            .per_category
            .keys()
            .map(String::len)
            .chain(["category".len(), "overall (micro)".len()])
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>8}",
            "category", "count", "correct", "missing", "accuracy"
        );
        for (name, s) in &self.per_category {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7}  {:>7}  {:>7}  {:>8.4}",
                name, s.count, s.correct, s.missing, s.accuracy
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>8.4}",
            "overall (micro)", self.total, self.correct, self.missing, self.overall_micro
        );
        let _ = writeln!(out, "{:<width$}  {:>34.4}", "overall (macro)", self.overall_macro);
        out
    }
}
