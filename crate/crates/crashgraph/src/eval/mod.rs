//! AUROC computation, multi-run aggregation, baselines, and ablations.

mod runner;

pub use runner::{
    run_experiment, run_prediction_phase, score_outcomes, sweep, write_artifacts, DayGraphs,
    DayOutcome, ExperimentParams, ExperimentSetup, PipelineVariant, RunKind, RunRecord,
    SweepParam, SweepRow,
};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One prediction day ready for scoring: the model's score, the next trading
/// day's label, and audit flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDay {
    pub day: NaiveDate,
    /// 1.0/0.0 from binary verdicts, or the reported probability.
    pub score: f64,
    pub label: u8,
    pub parse_failed: bool,
    pub empty_graph: bool,
}

/// Area under the ROC curve, rank-based (Mann-Whitney): tied scores receive
/// average ranks, which matches the all-pairs convention of counting a tied
/// positive/negative pair as one half.
pub fn auroc(scored: &[ScoredDay]) -> Result<f64> {
    let positives = scored.iter().filter(|s| s.label == 1).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUROC needs both classes; got {positives} positive / {negatives} negative"
        )));
    }

    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].score.total_cmp(&scored[b].score));

    let mut rank_sum_positive = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].score == scored[order[i]].score {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share the average rank.
        let average_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if scored[idx].label == 1 {
                rank_sum_positive += average_rank;
            }
        }
        i = j + 1;
    }

    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_positive - p * (p + 1.0) / 2.0) / (p * n))
}

/// Population standard deviation.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let variance =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    variance.sqrt()
}

#[cfg(test)]
pub(crate) fn pairwise_auroc_oracle(scored: &[ScoredDay]) -> f64 {
    // Independent all-pairs route: 1 for a correctly ordered pair, 1/2 for a
    // tie, over P*N pairs.
    let mut wins = 0.0f64;
    let mut pairs = 0.0f64;
    for pos in scored.iter().filter(|s| s.label == 1) {
        for neg in scored.iter().filter(|s| s.label == 0) {
            pairs += 1.0;
            if pos.score > neg.score {
                wins += 1.0;
            } else if pos.score == neg.score {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(scores: &[f64], labels: &[u8]) -> Vec<ScoredDay> {
        scores
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (score, label))| ScoredDay {
                day: NaiveDate::from_ymd_opt(2007, 6, 1).unwrap() + chrono::Days::new(i as u64),
                score: *score,
                label: *label,
                parse_failed: false,
                empty_graph: false,
            })
            .collect()
    }

    #[test]
    fn perfect_separation_scores_one() {
        let s = scored(&[0.9, 0.8, 0.1], &[1, 1, 0]);
        assert_eq!(auroc(&s).unwrap(), 1.0);
    }

    #[test]
    fn constant_scores_give_exactly_half() {
        let s = scored(&[0.4, 0.4, 0.4, 0.4], &[1, 0, 1, 0]);
        assert_eq!(auroc(&s).unwrap(), 0.5);
    }

    #[test]
    fn four_point_case_matches_the_pairwise_oracle_exactly() {
        let s = scored(&[0.9, 0.4, 0.6, 0.1], &[1, 0, 1, 0]);
        let got = auroc(&s).unwrap();
        assert_eq!(got, pairwise_auroc_oracle(&s));
        assert_eq!(got, 1.0); // both positives outrank both negatives
    }

    #[test]
    fn single_class_input_is_undefined() {
        let s = scored(&[0.9, 0.4], &[1, 1]);
        assert!(matches!(auroc(&s), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn random_instances_match_the_pairwise_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(2..=120usize);
            let mut scores = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                // Coarse grid scores provoke plenty of ties.
                scores.push((rng.random_range(0..=10) as f64) / 10.0);
                labels.push(rng.random_range(0..2) as u8);
            }
            if !labels.contains(&0) || !labels.contains(&1) {
                continue;
            }
            let s = scored(&scores, &labels);
            let got = auroc(&s).unwrap();
            let want = pairwise_auroc_oracle(&s);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn auroc_is_invariant_under_monotone_transforms() {
        let s = scored(&[0.9, 0.4, 0.6, 0.1, 0.6], &[1, 0, 1, 0, 0]);
        let transformed: Vec<ScoredDay> = s
            .iter()
            .map(|d| ScoredDay { score: (d.score * 3.0 + 1.0).exp(), ..d.clone() })
            .collect();
        assert_eq!(auroc(&s).unwrap(), auroc(&transformed).unwrap());
    }

    #[test]
    fn complement_symmetry_holds_for_tie_free_scores() {
        let s = scored(&[0.91, 0.42, 0.63, 0.17, 0.55], &[1, 0, 1, 0, 1]);
        let flipped: Vec<ScoredDay> =
            s.iter().map(|d| ScoredDay { score: 1.0 - d.score, ..d.clone() }).collect();
        let total = auroc(&s).unwrap() + auroc(&flipped).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn population_std_degenerate_cases() {
        assert!(population_std(&[0.7, 0.7, 0.7]) < 1e-12);
        assert_eq!(population_std(&[0.75]), 0.0, "a single repeat has zero spread");
        assert_eq!(population_std(&[]), 0.0);
        // Hand-checked: values 1 and 3 have population std 1.
        assert!((population_std(&[1.0, 3.0]) - 1.0).abs() < 1e-12);
    }
}
