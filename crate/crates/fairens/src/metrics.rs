//! Instance- and set-level fairness losses (discriminative risk, tandem loss),
//! group-fairness measures (DP, EO, PQP), classification metrics, and Pearson
//! correlation.
//!
//! All functions here are pure over immutable inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("input lengths disagree")]
    LengthMismatch,
    #[error("prediction profile is empty")]
    EmptyProfile,
    #[error("group fairness measures require a binary task")]
    NonBinaryTask,
    #[error("vector is constant; correlation undefined")]
    ConstantVector,
}

/// Cached per-member predictions on original and perturbed features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionProfile {
    pub member_id: usize,
    pub preds_orig: Vec<usize>,
    pub preds_pert: Vec<usize>,
}

impl PredictionProfile {
    pub fn len(&self) -> usize {
        self.preds_orig.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds_orig.is_empty()
    }
}

/// 1 iff the prediction changed under sensitive perturbation.
#[inline]
pub fn fair_loss_instance(p_orig: usize, p_pert: usize) -> u8 {
    u8::from(p_orig != p_pert)
}

/// Mean instance-level fairness loss of one member over its sample.
pub fn empirical_dr(profile: &PredictionProfile) -> Result<f64, MetricError> {
    if profile.is_empty() {
        return Err(MetricError::EmptyProfile);
    }
    if profile.preds_orig.len() != profile.preds_pert.len() {
        return Err(MetricError::LengthMismatch);
    }
    let flips: u64 = profile
        .preds_orig
        .iter()
        .zip(&profile.preds_pert)
        .map(|(&a, &b)| fair_loss_instance(a, b) as u64)
        .sum();
    Ok(flips as f64 / profile.len() as f64)
}

/// Discriminative risk of an arbitrary prediction pair (e.g. ensemble votes).
pub fn empirical_dr_pair(orig: &[usize], pert: &[usize]) -> Result<f64, MetricError> {
    if orig.is_empty() {
        return Err(MetricError::EmptyProfile);
    }
    if orig.len() != pert.len() {
        return Err(MetricError::LengthMismatch);
    }
    let flips: u64 = orig
        .iter()
        .zip(pert)
        .map(|(&a, &b)| fair_loss_instance(a, b) as u64)
        .sum();
    Ok(flips as f64 / orig.len() as f64)
}

/// 1 iff both members flip on this instance.
#[inline]
pub fn tandem_loss_instance(
    f_orig: usize,
    f_pert: usize,
    g_orig: usize,
    g_pert: usize,
) -> u8 {
    fair_loss_instance(f_orig, f_pert) & fair_loss_instance(g_orig, g_pert)
}

/// Mean tandem fairness loss of two members; symmetric in its arguments.
pub fn empirical_tandem(
    a: &PredictionProfile,
    b: &PredictionProfile,
) -> Result<f64, MetricError> {
    if a.len() != b.len() || a.preds_orig.len() != a.preds_pert.len() {
        return Err(MetricError::LengthMismatch);
    }
    if a.is_empty() {
        return Err(MetricError::EmptyProfile);
    }
    let both: u64 = (0..a.len())
        .map(|i| {
            tandem_loss_instance(a.preds_orig[i], a.preds_pert[i], b.preds_orig[i], b.preds_pert[i])
                as u64
        })
        .sum();
    Ok(both as f64 / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupMeasure {
    Dp,
    Eo,
    Pqp,
}

/// Group fairness value, or `None` when a conditioning cell is empty.
/// An empty cell is reported as undefined rather than coerced to zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupFairnessResult {
    pub measure: GroupMeasure,
    pub value: Option<f64>,
    /// (marginalised, privileged) group sizes.
    pub group_sizes: (usize, usize),
}

/// DP/EO/PQP on a binary task. `group[i]` is true for the privileged group.
pub fn group_fairness(
    measure: GroupMeasure,
    preds: &[usize],
    labels: &[usize],
    group: &[bool],
) -> Result<GroupFairnessResult, MetricError> {
    if preds.len() != labels.len() || preds.len() != group.len() {
        return Err(MetricError::LengthMismatch);
    }
    if preds.iter().chain(labels).any(|&v| v > 1) {
        return Err(MetricError::NonBinaryTask);
    }
    let size1 = group.iter().filter(|&&g| g).count();
    let size0 = group.len() - size1;

    // Conditional frequency P[num | den] over rows matching `den`.
    let rate = |den: &dyn Fn(usize) -> bool, num: &dyn Fn(usize) -> bool| -> Option<f64> {
        let mut d = 0usize;
        let mut n = 0usize;
        for i in 0..preds.len() {
            if den(i) {
                d += 1;
                if num(i) {
                    n += 1;
                }
            }
        }
        if d == 0 {
            None
        } else {
            Some(n as f64 / d as f64)
        }
    };

    let value = match measure {
        GroupMeasure::Dp => {
            let p1 = rate(&|i| group[i], &|i| preds[i] == 1);
            let p0 = rate(&|i| !group[i], &|i| preds[i] == 1);
            match (p1, p0) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            }
        }
        GroupMeasure::Eo => {
            let p1 = rate(&|i| group[i] && labels[i] == 1, &|i| preds[i] == 1);
            let p0 = rate(&|i| !group[i] && labels[i] == 1, &|i| preds[i] == 1);
            match (p1, p0) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            }
        }
        GroupMeasure::Pqp => {
            let p1 = rate(&|i| group[i] && preds[i] == 1, &|i| labels[i] == 1);
            let p0 = rate(&|i| !group[i] && preds[i] == 1, &|i| labels[i] == 1);
            match (p1, p0) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            }
        }
    };

    Ok(GroupFairnessResult {
        measure,
        value,
        group_sizes: (size0, size1),
    })
}

/// Confusion-matrix metrics with positive class 1. Ratios with an empty
/// denominator (or a non-binary task) are `None`; accuracy is always defined.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub specificity: Option<f64>,
}

pub fn classification_metrics(
    preds: &[usize],
    labels: &[usize],
) -> Result<ClassificationMetrics, MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::LengthMismatch);
    }
    if preds.is_empty() {
        return Err(MetricError::EmptyProfile);
    }
    let correct = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    let accuracy = correct as f64 / preds.len() as f64;

    let binary = preds.iter().chain(labels).all(|&v| v <= 1);
    if !binary {
        return Ok(ClassificationMetrics {
            accuracy,
            precision: None,
            recall: None,
            f1: None,
            specificity: None,
        });
    }

    let (mut tp, mut fp, mut tn, mut r#fn) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            _ => r#fn += 1,
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { None } else { Some(num as f64 / den as f64) };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + r#fn);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    let specificity = ratio(tn, tn + fp);
    Ok(ClassificationMetrics {
        accuracy,
        precision,
        recall,
        f1,
        specificity,
    })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch);
    }
    if x.len() < 2 {
        return Err(MetricError::ConstantVector);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ConstantVector);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(orig: &[usize], pert: &[usize]) -> PredictionProfile {
        PredictionProfile {
            member_id: 0,
            preds_orig: orig.to_vec(),
            preds_pert: pert.to_vec(),
        }
    }

    #[test]
    fn fair_loss_cases() {
        assert_eq!(fair_loss_instance(1, 1), 0);
        assert_eq!(fair_loss_instance(1, 0), 1);
        assert_eq!(fair_loss_instance(2, 3), 1); // multi-class
    }

    #[test]
    fn empirical_dr_cases() {
        let all_eq = profile(&[0, 1, 1, 0], &[0, 1, 1, 0]);
        assert_eq!(empirical_dr(&all_eq).unwrap(), 0.0);
        let all_diff = profile(&[0, 1], &[1, 0]);
        assert_eq!(empirical_dr(&all_diff).unwrap(), 1.0);
        let two_of_eight = profile(&[0; 8], &[1, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(empirical_dr(&two_of_eight).unwrap(), 0.25);
        assert!(matches!(
            empirical_dr(&profile(&[], &[])),
            Err(MetricError::EmptyProfile)
        ));
    }

    #[test]
    fn tandem_instance_is_logical_and() {
        assert_eq!(tandem_loss_instance(0, 1, 0, 0), 0); // f flips, g stable
        assert_eq!(tandem_loss_instance(0, 1, 1, 0), 1); // both flip
        // identical profiles degenerate to the single-member loss
        for (a, b) in [(0, 0), (0, 1), (2, 3)] {
            assert_eq!(tandem_loss_instance(a, b, a, b), fair_loss_instance(a, b));
        }
    }

    #[test]
    fn empirical_tandem_cases() {
        let a = profile(&[0, 0, 0, 0], &[0, 1, 1, 0]); // flips on {1,2}
        let b = profile(&[0, 0, 0, 0], &[0, 0, 1, 1]); // flips on {2,3}
        assert_eq!(empirical_tandem(&a, &b).unwrap(), 0.25);
        assert_eq!(empirical_tandem(&a, &a).unwrap(), empirical_dr(&a).unwrap());
        let c = profile(&[0, 0, 0, 0], &[1, 0, 0, 0]); // flip set disjoint from b's
        assert_eq!(empirical_tandem(&b, &c).unwrap(), 0.0);
    }

    #[test]
    fn dp_extremes_and_hand_count() {
        let r = group_fairness(
            GroupMeasure::Dp,
            &[1, 1, 0, 0],
            &[1, 1, 0, 0],
            &[true, true, false, false],
        )
        .unwrap();
        assert_eq!(r.value, Some(1.0));

        let r = group_fairness(
            GroupMeasure::Dp,
            &[1, 1, 1, 1],
            &[1, 0, 1, 0],
            &[true, true, false, false],
        )
        .unwrap();
        assert_eq!(r.value, Some(0.0));

        // |2/3 - 1/3| = 1/3
        let r = group_fairness(
            GroupMeasure::Dp,
            &[1, 0, 1, 0, 1, 0],
            &[1, 1, 0, 0, 1, 0],
            &[true, true, true, false, false, false],
        )
        .unwrap();
        assert!((r.value.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pqp_with_empty_cell_is_undefined() {
        // group 0 (marginalised) has no positive predictions
        let r = group_fairness(
            GroupMeasure::Pqp,
            &[1, 1, 0, 0],
            &[1, 0, 1, 0],
            &[true, true, false, false],
        )
        .unwrap();
        assert_eq!(r.value, None);
    }

    #[test]
    fn group_fairness_rejects_multiclass() {
        assert!(matches!(
            group_fairness(GroupMeasure::Dp, &[2, 0], &[0, 1], &[true, false]),
            Err(MetricError::NonBinaryTask)
        ));
    }

    proptest! {
        #[test]
        fn group_relabel_invariance(
            preds in proptest::collection::vec(0usize..2, 6..30),
            labels_seed in proptest::collection::vec(0usize..2, 6..30),
            group_seed in proptest::collection::vec(proptest::bool::ANY, 6..30),
        ) {
            let n = preds.len().min(labels_seed.len()).min(group_seed.len());
            let preds = &preds[..n];
            let labels = &labels_seed[..n];
            let group: Vec<bool> = group_seed[..n].to_vec();
            let flipped: Vec<bool> = group.iter().map(|g| !g).collect();
            for m in [GroupMeasure::Dp, GroupMeasure::Eo, GroupMeasure::Pqp] {
                let a = group_fairness(m, preds, labels, &group).unwrap();
                let b = group_fairness(m, preds, labels, &flipped).unwrap();
                prop_assert_eq!(a.value, b.value);
                if let Some(v) = a.value {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn tandem_bounded_by_min_and_symmetric(
            orig_a in proptest::collection::vec(0usize..3, 10..60),
            flip_a in proptest::collection::vec(proptest::bool::ANY, 10..60),
            flip_b in proptest::collection::vec(proptest::bool::ANY, 10..60),
        ) {
            let n = orig_a.len().min(flip_a.len()).min(flip_b.len());
            let mk = |flips: &[bool]| PredictionProfile {
                member_id: 0,
                preds_orig: orig_a[..n].to_vec(),
                preds_pert: (0..n)
                    .map(|i| if flips[i] { (orig_a[i] + 1) % 3 } else { orig_a[i] })
                    .collect(),
            };
            let a = mk(&flip_a);
            let b = mk(&flip_b);
            let t_ab = empirical_tandem(&a, &b).unwrap();
            let t_ba = empirical_tandem(&b, &a).unwrap();
            prop_assert_eq!(t_ab.to_bits(), t_ba.to_bits());
            let da = empirical_dr(&a).unwrap();
            let db = empirical_dr(&b).unwrap();
            prop_assert!(t_ab <= da.min(db) + 1e-15);
            prop_assert_eq!(empirical_tandem(&a, &a).unwrap(), da);
        }
    }

    #[test]
    fn classification_metrics_cases() {
        let perfect = classification_metrics(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!(perfect.accuracy, 1.0);
        assert_eq!(perfect.f1, Some(1.0));

        let complement = classification_metrics(&[1, 0, 1, 0], &[0, 1, 0, 1]).unwrap();
        assert_eq!(complement.accuracy, 0.0);

        let m = classification_metrics(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(m.precision, Some(0.5));
        assert_eq!(m.recall, Some(0.5));
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn accuracy_is_one_minus_zero_one_loss() {
        let preds = [0usize, 1, 2, 1, 0];
        let labels = [0usize, 1, 1, 1, 2];
        let m = classification_metrics(&preds, &labels).unwrap();
        let err = preds.iter().zip(&labels).filter(|(p, y)| p != y).count() as f64 / 5.0;
        assert!((m.accuracy - (1.0 - err)).abs() < 1e-15);
        assert_eq!(m.precision, None); // multi-class: ratios undefined
    }

    #[test]
    fn pearson_cases() {
        let x = vec![1.0, 2.0, 4.0, 8.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        let c = vec![3.0; 4];
        assert!(matches!(pearson(&c, &x), Err(MetricError::ConstantVector)));
    }
}
