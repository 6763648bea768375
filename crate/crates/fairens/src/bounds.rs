//! First-order, second-order, and C-tandem oracle bounds on the ensemble's
//! discriminative risk, the second-moment identity connecting them, and
//! Hoeffding/McAllester PAC-Bayesian slack terms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{EnsembleProfile, WeightedEnsemble};
use crate::metrics::{empirical_dr, empirical_dr_pair, empirical_tandem, MetricError};

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("input lengths disagree")]
    LengthMismatch,
    #[error("tandem matrix is not symmetric")]
    AsymmetricMatrix,
    #[error("matrix shape disagrees with weights")]
    ShapeMismatch,
    #[error("delta must lie in (0,1]")]
    InvalidDelta,
    #[error("KL divergence must be non-negative")]
    NegativeKl,
    #[error("vector is not a probability distribution")]
    NotADistribution,
    #[error("rho puts mass where pi has none; KL divergence is infinite")]
    DivergentSupport,
    #[error("profile was not built from this ensemble")]
    ProfileMismatch,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// 2 Σ_j w_j dr_j.
pub fn first_order_bound(weights: &[f64], member_drs: &[f64]) -> Result<f64, BoundError> {
    if weights.len() != member_drs.len() {
        return Err(BoundError::LengthMismatch);
    }
    Ok(2.0 * dot(weights, member_drs))
}

/// 4 Σ_{i,j} w_i w_j tandem_ij.
pub fn second_order_bound(weights: &[f64], tandem: &[Vec<f64>]) -> Result<f64, BoundError> {
    Ok(4.0 * weighted_tandem(weights, tandem)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CTandem {
    Bound(f64),
    /// The hypothesis E_ρ[dr] < 1/2 fails (strictly, so exactly 1/2 is also
    /// inapplicable).
    Inapplicable,
}

/// Chebyshev-Cantelli variant: (T - μ²)/(T - μ + 1/4) when μ < 1/2.
pub fn c_tandem_bound(
    weights: &[f64],
    member_drs: &[f64],
    tandem: &[Vec<f64>],
) -> Result<CTandem, BoundError> {
    if weights.len() != member_drs.len() {
        return Err(BoundError::LengthMismatch);
    }
    let mu = dot(weights, member_drs);
    let t = weighted_tandem(weights, tandem)?;
    if mu >= 0.5 {
        return Ok(CTandem::Inapplicable);
    }
    Ok(CTandem::Bound((t - mu * mu) / (t - mu + 0.25)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted_tandem(weights: &[f64], tandem: &[Vec<f64>]) -> Result<f64, BoundError> {
    let m = weights.len();
    if tandem.len() != m || tandem.iter().any(|r| r.len() != m) {
        return Err(BoundError::ShapeMismatch);
    }
    for i in 0..m {
        for j in 0..i {
            if (tandem[i][j] - tandem[j][i]).abs() > 1e-12 {
                return Err(BoundError::AsymmetricMatrix);
            }
        }
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            total += weights[i] * weights[j] * tandem[i][j];
        }
    }
    Ok(total)
}

/// Both sides of the second-moment identity: the mean over rows of the squared
/// ρ-weighted instance loss equals the ρ²-weighted tandem matrix built from
/// the same rows.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SecondMomentCheck {
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluates both routes with compensated summation; they agree to 1e-12.
/// `losses` is an n×m binary matrix of per-instance member losses.
pub fn second_moment_identity(
    weights: &[f64],
    losses: &[Vec<u8>],
) -> Result<SecondMomentCheck, BoundError> {
    let m = weights.len();
    let n = losses.len();
    if n == 0 || losses.iter().any(|r| r.len() != m) {
        return Err(BoundError::ShapeMismatch);
    }
    // lhs: E_S[(Σ_j w_j ℓ_ij)^2]
    let mut lhs_sum = KahanSum::default();
    for row in losses {
        let s: f64 = row
            .iter()
            .zip(weights)
            .map(|(&l, &w)| w * l as f64)
            .sum();
        lhs_sum.add(s * s);
    }
    let lhs = lhs_sum.value() / n as f64;

    // rhs: Σ_{j,j'} w_j w_j' E_S[ℓ_ij ℓ_ij']
    let mut rhs_sum = KahanSum::default();
    for j in 0..m {
        for jp in 0..m {
            let mut co = KahanSum::default();
            for row in losses {
                co.add((row[j] & row[jp]) as f64);
            }
            rhs_sum.add(weights[j] * weights[jp] * (co.value() / n as f64));
        }
    }
    Ok(SecondMomentCheck {
        lhs,
        rhs: rhs_sum.value(),
    })
}

#[derive(Default)]
struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

fn check_delta(delta: f64) -> Result<(), BoundError> {
    if delta <= 0.0 || delta > 1.0 {
        return Err(BoundError::InvalidDelta);
    }
    Ok(())
}

/// Hoeffding slack for a single hypothesis: sqrt(ln(1/δ)/(2n)).
pub fn hoeffding_single(n: usize, delta: f64) -> Result<f64, BoundError> {
    check_delta(delta)?;
    Ok(((1.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Union-bound slack over a finite class: sqrt(ln(|F|/δ)/(2n)).
pub fn hoeffding_class(n: usize, delta: f64, class_size: usize) -> Result<f64, BoundError> {
    check_delta(delta)?;
    Ok(((class_size as f64 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// McAllester slack: sqrt((KL(ρ‖π) + ln(2√n/δ))/(2n)).
pub fn mcallester_bound(n: usize, delta: f64, kl: f64) -> Result<f64, BoundError> {
    check_delta(delta)?;
    if !kl.is_finite() || kl < 0.0 {
        return Err(BoundError::NegativeKl);
    }
    Ok(((kl + (2.0 * (n as f64).sqrt() / delta).ln()) / (2.0 * n as f64)).sqrt())
}

/// KL divergence between discrete distributions, with 0·ln(0/·) = 0.
pub fn kl_discrete(rho: &[f64], pi: &[f64]) -> Result<f64, BoundError> {
    if rho.len() != pi.len() {
        return Err(BoundError::LengthMismatch);
    }
    for dist in [rho, pi] {
        if dist.iter().any(|&p| p < 0.0)
            || (dist.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(BoundError::NotADistribution);
        }
    }
    let mut kl = 0.0;
    for (&r, &p) in rho.iter().zip(pi) {
        if r == 0.0 {
            continue;
        }
        if p == 0.0 {
            return Err(BoundError::DivergentSupport);
        }
        kl += r * (r / p).ln();
    }
    Ok(kl)
}

/// All empirical quantities and oracle-bound checks for one ensemble on one
/// sample. On the empirical distribution the first- and second-order flags
/// always hold; the C-tandem flag holds whenever the bound applies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleBoundReport {
    /// Rate of instances where at least half the member mass flips. This is
    /// the discriminative-decision event the guarantees are stated for: a raw
    /// vote flip can occur with less than half the mass flipping (opposing
    /// flips can tip a knife-edge vote), so the raw rate is reported
    /// separately and left out of the bound checks.
    pub ensemble_dr: f64,
    /// Rate of instances where the weighted vote itself changes.
    pub vote_flip_dr: f64,
    pub expected_member_dr: f64,
    pub expected_tandem: f64,
    pub first_order: f64,
    pub second_order: f64,
    pub c_tandem: CTandem,
    pub member_drs: Vec<f64>,
    pub holds_first_order: bool,
    pub holds_second_order: bool,
    /// None when the C-tandem hypothesis fails.
    pub holds_c_tandem: Option<bool>,
    /// Which sample stood in for the population ("empirical" for the profile's
    /// own rows, or a caller-supplied label for held-out proxies).
    pub sample_kind: String,
}

pub fn audit_bounds(
    e: &WeightedEnsemble,
    profile: &EnsembleProfile,
) -> Result<OracleBoundReport, BoundError> {
    if profile.weights.len() != e.len()
        || profile
            .weights
            .iter()
            .zip(e.weights())
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(BoundError::ProfileMismatch);
    }
    audit_profile(profile, "empirical")
}

/// Profile-only variant for callers that no longer hold the ensemble.
pub fn audit_profile(
    profile: &EnsembleProfile,
    sample_kind: &str,
) -> Result<OracleBoundReport, BoundError> {
    let m = profile.m();
    let weights = &profile.weights;
    let member_drs: Vec<f64> = profile
        .members
        .iter()
        .map(empirical_dr)
        .collect::<Result<_, _>>()?;
    let mut tandem = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let t = empirical_tandem(&profile.members[i], &profile.members[j])?;
            tandem[i][j] = t;
            tandem[j][i] = t;
        }
    }
    let vote_flip_dr = empirical_dr_pair(&profile.vote_orig, &profile.vote_pert)?;
    let n = profile.n();
    let half_mass_flips = (0..n)
        .filter(|&i| {
            let z: f64 = profile
                .members
                .iter()
                .zip(weights)
                .map(|(p, &w)| w * f64::from(p.preds_orig[i] != p.preds_pert[i]))
                .sum();
            z >= 0.5
        })
        .count();
    let ensemble_dr = half_mass_flips as f64 / n as f64;
    let expected_member_dr = dot(weights, &member_drs);
    let expected_tandem = weighted_tandem(weights, &tandem)?;
    let first_order = first_order_bound(weights, &member_drs)?;
    let second_order = second_order_bound(weights, &tandem)?;
    let c_tandem = c_tandem_bound(weights, &member_drs, &tandem)?;
    Ok(OracleBoundReport {
        ensemble_dr,
        vote_flip_dr,
        expected_member_dr,
        expected_tandem,
        first_order,
        second_order,
        holds_first_order: ensemble_dr <= first_order,
        holds_second_order: ensemble_dr <= second_order,
        holds_c_tandem: match c_tandem {
            CTandem::Bound(b) => Some(ensemble_dr <= b),
            CTandem::Inapplicable => None,
        },
        c_tandem,
        member_drs,
        sample_kind: sample_kind.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{perturb_sensitive, synth_biased};
    use crate::ensemble::{build_profile, train_bagging};
    use proptest::prelude::*;

    #[test]
    fn first_order_cases() {
        let b = first_order_bound(&[0.5, 0.5], &[0.1, 0.3]).unwrap();
        assert!((b - 0.4).abs() < 1e-15);
        assert_eq!(first_order_bound(&[0.5, 0.5], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(first_order_bound(&[1.0], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn second_order_cases() {
        assert!((second_order_bound(&[1.0], &[vec![0.2]]).unwrap() - 0.8).abs() < 1e-15);
        let z = second_order_bound(&[0.5, 0.5], &[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(z, 0.0);
        let asym = second_order_bound(&[0.5, 0.5], &[vec![0.1, 0.2], vec![0.3, 0.1]]);
        assert!(matches!(asym, Err(BoundError::AsymmetricMatrix)));
    }

    #[test]
    fn c_tandem_cases() {
        // zero-variance case: T = μ²
        let r = c_tandem_bound(&[0.5, 0.5], &[0.25, 0.25], &[
            vec![0.0625, 0.0625],
            vec![0.0625, 0.0625],
        ])
        .unwrap();
        match r {
            CTandem::Bound(b) => assert!(b.abs() < 1e-12),
            _ => panic!("expected a bound"),
        }
        // μ = 1/2 exactly is inapplicable
        let r = c_tandem_bound(&[1.0], &[0.5], &[vec![0.5]]).unwrap();
        assert_eq!(r, CTandem::Inapplicable);
        // single member, dr = 0.3: (0.3-0.09)/(0.25) = 0.84
        let r = c_tandem_bound(&[1.0], &[0.3], &[vec![0.3]]).unwrap();
        match r {
            CTandem::Bound(b) => assert!((b - 0.84).abs() < 1e-12),
            _ => panic!("expected a bound"),
        }
    }

    #[test]
    fn second_moment_degenerate_cases() {
        // single member: both sides equal the member DR since ℓ² = ℓ
        let losses: Vec<Vec<u8>> = vec![vec![1], vec![0], vec![1], vec![0]];
        let c = second_moment_identity(&[1.0], &losses).unwrap();
        assert!((c.lhs - 0.5).abs() < 1e-15);
        assert!((c.rhs - 0.5).abs() < 1e-15);

        let ones: Vec<Vec<u8>> = vec![vec![1, 1]; 5];
        let c = second_moment_identity(&[0.3, 0.7], &ones).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-12);
        assert!((c.rhs - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn second_moment_identity_holds(
            rows in proptest::collection::vec(
                proptest::collection::vec(0u8..2, 4), 5..50),
            raw_w in proptest::collection::vec(0.01f64..1.0, 4),
        ) {
            let total: f64 = raw_w.iter().sum();
            let w: Vec<f64> = raw_w.iter().map(|v| v / total).collect();
            let c = second_moment_identity(&w, &rows).unwrap();
            prop_assert!((c.lhs - c.rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn hoeffding_values() {
        assert_eq!(hoeffding_single(10, 1.0).unwrap(), 0.0);
        let s = hoeffding_single(50, 0.05).unwrap();
        assert!((s - (20f64.ln() / 100.0).sqrt()).abs() < 1e-12);
        assert!(hoeffding_single(100, 0.05).unwrap() < s);

        assert_eq!(
            hoeffding_class(50, 0.05, 1).unwrap(),
            hoeffding_single(50, 0.05).unwrap()
        );
        let c = hoeffding_class(100, 0.05, 10).unwrap();
        assert!((c - (200f64.ln() / 200.0).sqrt()).abs() < 1e-12);
        assert!(hoeffding_class(100, 0.05, 20).unwrap() > c);
    }

    #[test]
    fn mcallester_values() {
        let s = mcallester_bound(100, 0.05, 0.0).unwrap();
        assert!((s - (400f64.ln() / 200.0).sqrt()).abs() < 1e-12);
        assert!(mcallester_bound(100, 0.05, 1.0).unwrap() > s);
        // 1/(2n) scaling dominates the ln(2√n) growth
        assert!(
            mcallester_bound(400, 1.0, 0.0).unwrap() < mcallester_bound(100, 1.0, 0.0).unwrap()
        );
        assert!(mcallester_bound(10, 0.0, 0.0).is_err());
        assert!(mcallester_bound(10, 0.5, -1.0).is_err());
    }

    #[test]
    fn kl_cases() {
        assert_eq!(kl_discrete(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let v = kl_discrete(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);
        assert!(matches!(
            kl_discrete(&[0.5, 0.5], &[1.0, 0.0]),
            Err(BoundError::DivergentSupport)
        ));
        assert!(matches!(
            kl_discrete(&[0.5, 0.6], &[0.5, 0.5]),
            Err(BoundError::NotADistribution)
        ));
    }

    #[test]
    fn audit_on_random_ensembles_never_violates() {
        for trial in 0..25u64 {
            let d = synth_biased(100 + (trial as usize % 5) * 40, 0.6, 3, trial);
            let e = train_bagging(&d, 3 + (trial as usize % 5), 3, trial ^ 0xabcd).unwrap();
            let view = perturb_sensitive(&d, trial ^ 0x1234).unwrap();
            let p = build_profile(&e, &d, &view).unwrap();
            let r = audit_bounds(&e, &p).unwrap();
            assert!(r.holds_first_order, "first-order violated on trial {trial}");
            assert!(r.holds_second_order, "second-order violated on trial {trial}");
            if let Some(holds) = r.holds_c_tandem {
                assert!(holds, "c-tandem violated on trial {trial}");
            }
            assert!((r.first_order - 2.0 * r.expected_member_dr).abs() < 1e-12);
            assert!((r.second_order - 4.0 * r.expected_tandem).abs() < 1e-12);
        }
    }

    #[test]
    fn audit_of_identical_members() {
        // ensemble of identical constant predictors: dr = 0 everywhere
        let d = synth_biased(50, 0.5, 2, 4);
        let e = train_bagging(&d, 1, 0, 4).unwrap();
        let view = perturb_sensitive(&d, 9).unwrap();
        let p = build_profile(&e, &d, &view).unwrap();
        let r = audit_bounds(&e, &p).unwrap();
        assert_eq!(r.ensemble_dr, 0.0);
        assert_eq!(r.first_order, 0.0);
        assert_eq!(r.second_order, 0.0);
        assert!(r.holds_first_order && r.holds_second_order);
    }
}
