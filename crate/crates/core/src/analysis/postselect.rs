use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::DecodedShot;
use crate::error::{invalid, Result};
use crate::sim::{QubitModels, ShotRecord};

/// Shots surviving leakage post-selection.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageSelection {
    pub kept: Vec<ShotRecord>,
    /// Retained fraction per number of rounds.
    pub retained: BTreeMap<usize, f64>,
}

/// Keep the shots in which no measurement is classified as |2>.
pub fn postselect_leakage(shots: &[ShotRecord], models: &QubitModels) -> Result<LeakageSelection> {
    let mut kept = Vec::new();
    let mut counts: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    for s in shots {
        let c = counts.entry(s.rounds).or_default();
        c.1 += 1;
        if !s.any_leakage(models)? {
            c.0 += 1;
            kept.push(s.clone());
        }
    }
    if kept.is_empty() && !shots.is_empty() {
        warn!("leakage post-selection discarded every shot");
    }
    Ok(LeakageSelection {
        kept,
        retained: counts.into_iter().map(|(r, (k, n))| (r, k as f64 / n as f64)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "budget")]
pub enum PostselectMode {
    /// Discard the same number of least confident runs at every round count;
    /// the budget is the total number of discards.
    ConstantFraction(usize),
    /// Discard the `budget` least confident runs over all round counts.
    ConstantThreshold(usize),
    /// Discard every run with `|y - 1/2| < p_th`.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostselectResult {
    pub kept: Vec<DecodedShot>,
    /// Per round count: (total, discarded).
    pub counts: BTreeMap<usize, (u64, u64)>,
    /// Per round count: the largest discarded `|y - 1/2|`, if any.
    pub thresholds: BTreeMap<usize, Option<f64>>,
}

impl PostselectResult {
    pub fn retained_fraction(&self, rounds: usize) -> Option<f64> {
        self.counts.get(&rounds).map(|&(n, d)| (n - d) as f64 / n as f64)
    }

    pub fn total_discarded(&self) -> u64 {
        self.counts.values().map(|c| c.1).sum()
    }
}

fn distance(s: &DecodedShot) -> f64 {
    (s.confidence - 0.5).abs()
}

/// Order by closeness to 1/2, ties by shot id.
fn least_confident_first(a: &DecodedShot, b: &DecodedShot) -> std::cmp::Ordering {
    distance(a).total_cmp(&distance(b)).then(a.shot_id.cmp(&b.shot_id))
}

/// Discard the runs whose confidence is closest to 1/2.
///
/// In constant-fraction mode a budget that does not divide evenly gives one
/// extra discard to the smallest round counts.
pub fn postselect_confidence(shots: &[DecodedShot], mode: PostselectMode) -> Result<PostselectResult> {
    let mut by_r: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, s) in shots.iter().enumerate() {
        by_r.entry(s.rounds).or_default().push(k);
    }
    let mut drop = vec![false; shots.len()];
    match mode {
        PostselectMode::Threshold(p_th) => {
            if !(p_th >= 0.0) {
                return Err(invalid(format!("threshold {p_th} must be nonnegative")));
            }
            for (k, s) in shots.iter().enumerate() {
                drop[k] = distance(s) < p_th;
            }
        }
        PostselectMode::ConstantThreshold(budget) => {
            if budget > shots.len() {
                return Err(invalid(format!("budget {budget} exceeds the {} available runs", shots.len())));
            }
            let mut order: Vec<usize> = (0..shots.len()).collect();
            order.sort_by(|&a, &b| least_confident_first(&shots[a], &shots[b]));
            for &k in &order[..budget] {
                drop[k] = true;
            }
        }
        PostselectMode::ConstantFraction(budget) => {
            if budget > shots.len() {
                return Err(invalid(format!("budget {budget} exceeds the {} available runs", shots.len())));
            }
            let groups = by_r.len().max(1);
            for (g, idx) in by_r.values().enumerate() {
                let share = budget / groups + usize::from(g < budget % groups);
                if share > idx.len() {
                    return Err(invalid(format!(
                        "budget share {share} exceeds the {} runs at one round count",
                        idx.len()
                    )));
                }
                let mut order = idx.clone();
                order.sort_by(|&a, &b| least_confident_first(&shots[a], &shots[b]));
                for &k in &order[..share] {
                    drop[k] = true;
                }
            }
        }
    }
    let mut counts = BTreeMap::new();
    let mut thresholds = BTreeMap::new();
    for (&r, idx) in &by_r {
        let dropped: Vec<usize> = idx.iter().copied().filter(|&k| drop[k]).collect();
        counts.insert(r, (idx.len() as u64, dropped.len() as u64));
        thresholds.insert(r, dropped.iter().map(|&k| distance(&shots[k])).reduce(f64::max));
    }
    let kept = shots
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(s, _)| s.clone())
        .collect();
    Ok(PostselectResult {
        kept,
        counts,
        thresholds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    /// Runs in the bin whose logical actually flipped.
    pub flips: u64,
    /// Runs in the bin that the decoder got right.
    pub successes: u64,
    pub sum_y: f64,
}

impl BinStats {
    pub fn flip_fraction(&self) -> Option<f64> {
        (self.count > 0).then(|| self.flips as f64 / self.count as f64)
    }

    pub fn success_fraction(&self) -> Option<f64> {
        (self.count > 0).then(|| self.successes as f64 / self.count as f64)
    }

    pub fn mean_y(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_y / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceHistogram {
    pub bins: usize,
    pub per_round: BTreeMap<usize, Vec<BinStats>>,
    pub total: Vec<BinStats>,
}

/// Histogram of `y` on `bins` equal bins of [0, 1], per round count and
/// overall.
pub fn confidence_histogram(shots: &[DecodedShot], bins: usize) -> Result<ConfidenceHistogram> {
    if bins < 2 {
        return Err(invalid("a confidence histogram needs at least 2 bins"));
    }
    let empty: Vec<BinStats> = (0..bins)
        .map(|b| BinStats {
            lo: b as f64 / bins as f64,
            hi: (b + 1) as f64 / bins as f64,
            ..Default::default()
        })
        .collect();
    let mut total = empty.clone();
    let mut per_round: BTreeMap<usize, Vec<BinStats>> = BTreeMap::new();
    for s in shots {
        let b = ((s.confidence * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        let row = per_round.entry(s.rounds).or_insert_with(|| empty.clone());
        for bin in [&mut row[b], &mut total[b]] {
            bin.count += 1;
            bin.flips += s.observed_flip() as u64;
            bin.successes += s.success() as u64;
            bin.sum_y += s.confidence;
        }
    }
    Ok(ConfidenceHistogram {
        bins,
        per_round,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shot(id: u64, rounds: usize, y: f64) -> DecodedShot {
        DecodedShot {
            shot_id: id,
            rounds,
            initial_state: "000000000".into(),
            z_in: 0,
            z_out: 0,
            flip: (y >= 0.5) as u8,
            confidence: y,
            weight: 0.0,
            complementary_weight: None,
        }
    }

    fn sample() -> Vec<DecodedShot> {
        (0..40).map(|i| shot(i, 1 + (i as usize % 2) * 3, (i as f64 * 0.37).fract())).collect()
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let s = sample();
        let r = postselect_confidence(&s, PostselectMode::Threshold(0.0)).unwrap();
        assert_eq!(r.kept, s);
        assert_eq!(r.total_discarded(), 0);
    }

    #[test]
    fn full_budget_discards_everything() {
        let s = sample();
        for mode in [PostselectMode::ConstantThreshold(40), PostselectMode::ConstantFraction(40)] {
            let r = postselect_confidence(&s, mode).unwrap();
            assert!(r.kept.is_empty());
        }
        assert!(postselect_confidence(&s, PostselectMode::ConstantThreshold(41)).is_err());
    }

    #[test]
    fn equal_budgets_equal_totals() {
        let s = sample();
        let a = postselect_confidence(&s, PostselectMode::ConstantThreshold(10)).unwrap();
        let b = postselect_confidence(&s, PostselectMode::ConstantFraction(10)).unwrap();
        assert_eq!(a.total_discarded(), 10);
        assert_eq!(b.total_discarded(), 10);
        assert_eq!(b.counts[&1].1, 5);
    }

    #[test]
    fn ties_break_by_shot_id() {
        let s: Vec<_> = (0..6).map(|i| shot(i, 1, 0.7)).collect();
        let r = postselect_confidence(&s, PostselectMode::ConstantThreshold(2)).unwrap();
        assert_eq!(r.kept.iter().map(|k| k.shot_id).collect::<Vec<_>>(), vec![2, 3, 4, 5]);
    }

    #[test]
    fn histogram_fixtures() {
        let h = confidence_histogram(&[], 10).unwrap();
        assert!(h.total.iter().all(|b| b.count == 0));
        let s: Vec<_> = (0..5).map(|i| shot(i, 1, 0.5)).collect();
        let h = confidence_histogram(&s, 10).unwrap();
        let occupied: Vec<usize> = h.total.iter().enumerate().filter(|(_, b)| b.count > 0).map(|(i, _)| i).collect();
        assert_eq!(occupied, vec![5]);
        assert!(confidence_histogram(&s, 1).is_err());
    }
}
