//! Label agreement metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    pub miou: f64,
    /// IoU per category, only for categories seen in either labeling.
    pub per_category: BTreeMap<u32, f64>,
}

/// Mean intersection-over-union of `pred` against `truth`.
///
/// With `categories` given, only those are scored; otherwise every label
/// that occurs in either array is. Categories absent from both are skipped.
pub fn miou(pred: &[u32], truth: &[u32], categories: Option<&[u32]>) -> Result<IouReport> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} predicted labels but {} ground truth labels",
            pred.len(),
            truth.len()
        )));
    }
    // (intersection, union) per category
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    if let Some(cats) = categories {
        for &c in cats {
            counts.insert(c, (0, 0));
        }
    }
    let scored = |c: u32, counts: &BTreeMap<u32, (usize, usize)>| categories.is_none() || counts.contains_key(&c);
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            if scored(p, &counts) {
                let e = counts.entry(p).or_default();
                e.0 += 1;
                e.1 += 1;
            }
        } else {
            for c in [p, t] {
                if scored(c, &counts) {
                    counts.entry(c).or_default().1 += 1;
                }
            }
        }
    }
    let per_category: BTreeMap<u32, f64> = counts
        .into_iter()
        .filter(|(_, (_, u))| *u > 0)
        .map(|(c, (i, u))| (c, i as f64 / u as f64))
        .collect();
    let miou = if per_category.is_empty() {
        1.0
    } else {
        per_category.values().sum::<f64>() / per_category.len() as f64
    };
    Ok(IouReport { miou, per_category })
}
