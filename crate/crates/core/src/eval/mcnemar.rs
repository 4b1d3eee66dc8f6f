use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{index_predictions, normalize_label, GoldRecord, PredictionRecord};
use crate::error::{Error, Result};

/// Discordant-pair count at which the chi-square approximation takes over
/// from the exact binomial test.
pub const CHI_SQUARE_MIN_DISCORDANT: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    Exact,
    ChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// A correct, B wrong.
    pub b: u64,
    /// A wrong, B correct.
    pub c: u64,
    /// Continuity-corrected chi-square statistic.
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
}

/// P(X >= k) for X ~ Binomial(n, 1/2), computed with exact integer counts.
/// `n` must not exceed 120.
pub fn binomial_upper_tail(n: u64, k: u64) -> f64 {
    assert!(n <= 120, "exact tail supports n <= 120");
    if k > n {
        return 0.0;
    }
    let mut coef: u128 = 1;
    let mut total: u128 = 0;
    for i in 0..=n {
        if i >= k {
            total += coef;
        }
        coef = coef * (n - i) as u128 / (i + 1) as u128;
    }
    total as f64 / 2f64.powi(n as i32)
}

pub fn mcnemar_counts(b: u64, c: u64) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
            method: McNemarMethod::Exact,
        };
    }
    let diff = b.abs_diff(c) as f64 - 1.0;
    let statistic = diff * diff / n as f64;
    if n >= CHI_SQUARE_MIN_DISCORDANT {
        let dist = ChiSquared::new(1.0).expect("one degree of freedom");
        McNemar {
            b,
            c,
            statistic,
            p_value: dist.sf(statistic).clamp(0.0, 1.0),
            method: McNemarMethod::ChiSquare,
        }
    } else {
        McNemar {
            b,
            c,
            statistic,
            p_value: (2.0 * binomial_upper_tail(n, b.max(c))).min(1.0),
            method: McNemarMethod::Exact,
        }
    }
}

/// McNemar's test over per-unit correctness of systems A and B. Both maps
/// must cover the same units.
pub fn mcnemar(a: &BTreeMap<String, bool>, b: &BTreeMap<String, bool>) -> Result<McNemar> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        let only_a = a.keys().filter(|k| !b.contains_key(*k)).count();
        let only_b = b.keys().filter(|k| !a.contains_key(*k)).count();
        return Err(Error::CoverageError(format!(
            "{only_a} unit(s) only in A, {only_b} only in B"
        )));
    }
    let (mut n_b, mut n_c) = (0, 0);
    for (x, y) in a.values().zip(b.values()) {
        match (x, y) {
            (true, false) => n_b += 1,
            (false, true) => n_c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(n_b, n_c))
}

/// McNemar's test for two closed-set prediction files against the same
/// gold labels. Both files must predict exactly the gold ids.
pub fn mcnemar_predictions(
    preds_a: &[PredictionRecord],
    preds_b: &[PredictionRecord],
    gold: &[GoldRecord],
) -> Result<McNemar> {
    let gold: BTreeMap<&str, String> = gold
        .iter()
        .map(|g| (g.instance_id.as_str(), normalize_label(&g.gold)))
        .collect();
    let outcomes = |preds: &[PredictionRecord], name: &str| -> Result<BTreeMap<String, bool>> {
        let index = index_predictions(preds)?;
        if index.len() != gold.len() || index.keys().any(|k| !gold.contains_key(k)) {
            return Err(Error::CoverageError(format!(
                "system {name} predicts {} id(s), gold has {}",
                index.len(),
                gold.len()
            )));
        }
        Ok(index
            .into_iter()
            .map(|(id, p)| (id.to_string(), normalize_label(p) == gold[id]))
            .collect())
    };
    mcnemar(&outcomes(preds_a, "A")?, &outcomes(preds_b, "B")?)
}
