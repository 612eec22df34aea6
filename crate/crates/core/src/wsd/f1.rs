//! Best-alignment micro-F1 between induced clusters and gold senses.

use std::collections::BTreeMap;

use super::WsdError;

/// Counts behind a micro-F1 score; add them up across words before
/// computing the score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct F1Counts {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl F1Counts {
    pub fn f1(&self) -> f64 {
        if self.true_positives == 0 {
            return 0.0;
        }
        let p = self.true_positives as f64 / self.predicted as f64;
        let r = self.true_positives as f64 / self.gold as f64;
        2.0 * p * r / (p + r)
    }
}

impl std::ops::Add for F1Counts {
    type Output = F1Counts;

    fn add(self, o: F1Counts) -> F1Counts {
        F1Counts {
            true_positives: self.true_positives + o.true_positives,
            predicted: self.predicted + o.predicted,
            gold: self.gold + o.gold,
        }
    }
}

const MAX_ALIGN: usize = 16;

/// Aligns clusters one-to-one with gold labels to maximize agreement.
/// Instances in clusters left without a gold partner count as predictions
/// that are never correct.
pub fn alignment_counts<A, B>(assignments: &[A], gold: &[B]) -> Result<F1Counts, WsdError>
where
    A: Ord + Clone,
    B: Ord + Clone,
{
    if assignments.len() != gold.len() {
        return Err(WsdError::LabelMismatch {
            assigned: assignments.len(),
            gold: gold.len(),
        });
    }
    if assignments.is_empty() {
        return Err(WsdError::EmptyEvaluation);
    }
    let clusters = index(assignments);
    let labels = index(gold);
    let mut table = vec![vec![0usize; labels.len()]; clusters.len()];
    for (a, g) in assignments.iter().zip(gold) {
        table[clusters[a]][labels[g]] += 1;
    }
    let (rows, transposed) = if clusters.len() <= labels.len() {
        (table, false)
    } else {
        ((0..labels.len()).map(|g| (0..clusters.len()).map(|c| table[c][g]).collect()).collect(), true)
    };
    let cols = rows[0].len();
    if cols > MAX_ALIGN {
        return Err(WsdError::TooManyLabels(rows.len().max(cols)));
    }
    let (tp, matched_rows) = best_matching(&rows);
    let cluster_sizes: Vec<usize> = if transposed {
        (0..clusters.len()).map(|c| (0..labels.len()).map(|g| rows[g][c]).sum()).collect()
    } else {
        rows.iter().map(|r| r.iter().sum()).collect()
    };
    let predicted = if transposed {
        matched_rows.iter().map(|&(_, c)| cluster_sizes[c]).sum()
    } else {
        matched_rows.iter().map(|&(c, _)| cluster_sizes[c]).sum()
    };
    Ok(F1Counts {
        true_positives: tp,
        predicted,
        gold: gold.len(),
    })
}

pub fn wsd_f1<A, B>(assignments: &[A], gold: &[B]) -> Result<f64, WsdError>
where
    A: Ord + Clone,
    B: Ord + Clone,
{
    alignment_counts(assignments, gold).map(|c| c.f1())
}

fn index<T: Ord + Clone>(values: &[T]) -> BTreeMap<T, usize> {
    let mut map = BTreeMap::new();
    for v in values {
        let n = map.len();
        map.entry(v.clone()).or_insert(n);
    }
    map
}

/// Maximum-weight matching of every row to a distinct column (rows <= cols)
/// by dynamic programming over column subsets. Returns the weight and the
/// matched (row, column) pairs.
fn best_matching(w: &[Vec<usize>]) -> (usize, Vec<(usize, usize)>) {
    let cols = w[0].len();
    let full = 1usize << cols;
    let mut dp = vec![vec![None::<usize>; full]; w.len() + 1];
    dp[0][0] = Some(0);
    for r in 0..w.len() {
        for mask in 0..full {
            let Some(base) = dp[r][mask] else { continue };
            for (c, &gain) in w[r].iter().enumerate() {
                if mask & (1 << c) == 0 {
                    let slot = &mut dp[r + 1][mask | (1 << c)];
                    if slot.is_none_or(|v| base + gain > v) {
                        *slot = Some(base + gain);
                    }
                }
            }
        }
    }
    let (mut mask, best) = dp[w.len()]
        .iter()
        .enumerate()
        .filter_map(|(m, v)| v.map(|v| (m, v)))
        .max_by_key(|&(m, v)| (v, std::cmp::Reverse(m)))
        .expect("a complete matching exists");
    let mut pairs = Vec::new();
    for r in (0..w.len()).rev() {
        let c = (0..cols)
            .find(|&c| {
                mask & (1 << c) != 0
                    && dp[r][mask ^ (1 << c)].is_some_and(|v| v + w[r][c] == dp[r + 1][mask].unwrap())
            })
            .expect("traceback");
        pairs.push((r, c));
        mask ^= 1 << c;
    }
    pairs.reverse();
    (best, pairs)
}
