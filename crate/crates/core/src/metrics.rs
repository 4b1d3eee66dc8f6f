//! Classification and agreement statistics shared by the judge, the
//! annotation service and the evaluation harness.

use serde::{Deserialize, Serialize};

/// Square confusion matrix; rows are gold, columns are predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn new(k: usize) -> Self {
        Confusion {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_pairs(k: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::new(k);
        for (gold, pred) in pairs {
            m.add(gold, pred);
        }
        m
    }

    pub fn add(&mut self, gold: usize, pred: usize) {
        self.counts[gold][pred] += 1;
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio((0..self.k()).map(|i| self.counts[i][i]).sum(), self.total())
    }

    /// Precision, recall and F1 of one class. Undefined ratios are 0.
    pub fn prf(&self, class: usize) -> Prf {
        let tp = self.counts[class][class];
        let precision = ratio(tp, self.col(class));
        let recall = ratio(tp, self.row(class));
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
            support: self.row(class),
        }
    }

    /// Unweighted mean of per-class precision, recall and F1.
    pub fn macro_prf(&self) -> Prf {
        let per: Vec<_> = (0..self.k()).map(|c| self.prf(c)).collect();
        let k = per.len() as f64;
        Prf {
            precision: per.iter().map(|p| p.precision).sum::<f64>() / k,
            recall: per.iter().map(|p| p.recall).sum::<f64>() / k,
            f1: per.iter().map(|p| p.f1).sum::<f64>() / k,
            support: self.total(),
        }
    }

    pub fn observed_agreement(&self) -> f64 {
        self.accuracy()
    }

    /// Agreement expected by chance from the two marginals.
    pub fn expected_agreement(&self) -> f64 {
        let n = self.total() as f64;
        if n == 0.0 {
            return 0.0;
        }
        (0..self.k())
            .map(|i| (self.row(i) as f64 / n) * (self.col(i) as f64 / n))
            .sum()
    }

    /// Cohen's kappa. Defined as 1 when chance agreement is already 1.
    pub fn kappa(&self) -> f64 {
        let po = self.observed_agreement();
        let pe = self.expected_agreement();
        if (1.0 - pe).abs() < 1e-12 {
            1.0
        } else {
            (po - pe) / (1.0 - pe)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn worked_example() {
        // gold V,V,I,A predicted V,I,I,A
        let m = Confusion::from_pairs(3, [(0, 0), (0, 1), (1, 1), (2, 2)]);
        assert_relative_eq!(m.accuracy(), 0.75);
        assert_relative_eq!(m.prf(0).precision, 1.0);
        assert_relative_eq!(m.prf(0).recall, 0.5);
        assert_relative_eq!(m.prf(1).precision, 0.5);
        assert_relative_eq!(m.prf(1).recall, 1.0);
        assert_relative_eq!(m.prf(2).f1, 1.0);
    }

    #[test]
    fn zero_support_class_has_zero_f1() {
        let m = Confusion::from_pairs(3, [(0, 0), (1, 1)]);
        assert_eq!(m.prf(2).f1, 0.0);
    }

    #[test]
    fn kappa_cases() {
        let same = Confusion::from_pairs(3, [(0, 0), (1, 1), (2, 2), (0, 0)]);
        assert_relative_eq!(same.kappa(), 1.0);
        let constant_b = Confusion::from_pairs(3, [(0, 0), (1, 0), (2, 0), (0, 0)]);
        assert_relative_eq!(constant_b.kappa(), 0.0);
        let degenerate = Confusion::from_pairs(3, [(1, 1), (1, 1)]);
        assert_relative_eq!(degenerate.kappa(), 1.0);
        let table = Confusion {
            counts: vec![vec![4, 1, 0], vec![1, 3, 1], vec![0, 0, 2]],
        };
        // po = 9/12; pe = (5*5 + 5*4 + 2*3)/144 = 51/144
        let po: f64 = 9.0 / 12.0;
        let pe: f64 = 51.0 / 144.0;
        assert_relative_eq!(table.kappa(), (po - pe) / (1.0 - pe), max_relative = 1e-12);
    }
}
