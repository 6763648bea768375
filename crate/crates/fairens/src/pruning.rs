//! Bi-objective domination machinery and the three pruning algorithms:
//! Pareto-archive search (POAF) and the centralised/distributed greedy
//! pruners (EPAF-C, EPAF-D).

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{weighted_vote, EnsembleProfile};
use crate::metrics::PredictionProfile;
use crate::seeding::stream_seed;

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("lambda must lie strictly between 0 and 1")]
    InvalidLambda,
    #[error("selector selects no members")]
    EmptySelector,
    #[error("invalid pruning configuration: {0}")]
    InvalidConfig(String),
    #[error("input lengths disagree")]
    LengthMismatch,
}

/// (error, discriminative risk) objective pair; both to be minimised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiObjective {
    pub err: f64,
    pub dr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domination {
    Strict,
    WeakOnly,
    None,
}

/// Componentwise comparison of `a` against `b`.
pub fn dominates(a: BiObjective, b: BiObjective) -> Domination {
    if a.err <= b.err && a.dr <= b.dr {
        if a.err < b.err || a.dr < b.dr {
            Domination::Strict
        } else {
            Domination::WeakOnly
        }
    } else {
        Domination::None
    }
}

/// Set of mutually non-dominated selector vectors with their objective values.
#[derive(Debug, Clone, Default)]
pub struct ParetoArchive {
    entries: Vec<(Vec<bool>, BiObjective)>,
}

impl ParetoArchive {
    pub fn entries(&self) -> &[(Vec<bool>, BiObjective)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rejects candidates strictly dominated by an existing entry; otherwise
    /// removes every entry the candidate weakly dominates and inserts it.
    /// Duplicate bit patterns are treated as weakly dominated re-insertions.
    pub fn insert(&mut self, bits: Vec<bool>, objective: BiObjective) -> bool {
        for (_, existing) in &self.entries {
            if dominates(*existing, objective) == Domination::Strict {
                return false;
            }
        }
        self.entries.retain(|(b, g)| {
            !(matches!(dominates(objective, *g), Domination::Strict | Domination::WeakOnly))
                && b != &bits
        });
        self.entries.push((bits, objective));
        true
    }
}

/// λ-combined pairwise loss of two members:
/// (λ/2)(err_f + err_g) + (1-λ)·tandem_fg. Symmetric in (f, g).
pub fn pair_loss(
    err_f: f64,
    err_g: f64,
    tandem_fg: f64,
    lambda: f64,
) -> Result<f64, PruneError> {
    if !(0.0..1.0).contains(&lambda) || lambda == 0.0 {
        return Err(PruneError::InvalidLambda);
    }
    Ok(lambda / 2.0 * (err_f + err_g) + (1.0 - lambda) * tandem_fg)
}

/// Bi-objective value (0/1 error, DR) of the uniform-weight vote over the
/// selected members.
pub fn subensemble_objective(
    bits: &[bool],
    profile: &EnsembleProfile,
    labels: &[usize],
) -> Result<BiObjective, PruneError> {
    let selected: Vec<usize> = (0..bits.len()).filter(|&j| bits[j]).collect();
    if selected.is_empty() {
        return Err(PruneError::EmptySelector);
    }
    if bits.len() != profile.m() || labels.len() != profile.n() {
        return Err(PruneError::LengthMismatch);
    }
    let w = vec![1.0 / selected.len() as f64; selected.len()];
    let n = profile.n();
    let mut err_count = 0usize;
    let mut flip_count = 0usize;
    for i in 0..n {
        let po: Vec<usize> = selected
            .iter()
            .map(|&j| profile.members[j].preds_orig[i])
            .collect();
        let pp: Vec<usize> = selected
            .iter()
            .map(|&j| profile.members[j].preds_pert[i])
            .collect();
        let vo = weighted_vote(&po, &w).expect("lengths match");
        let vp = weighted_vote(&pp, &w).expect("lengths match");
        if vo != labels[i] {
            err_count += 1;
        }
        if vo != vp {
            flip_count += 1;
        }
    }
    Ok(BiObjective {
        err: err_count as f64 / n as f64,
        dr: flip_count as f64 / n as f64,
    })
}

/// λ·err + (1-λ)·dr of the selected sub-ensemble's vote.
pub fn subensemble_loss(
    bits: &[bool],
    profile: &EnsembleProfile,
    labels: &[usize],
    lambda: f64,
) -> Result<f64, PruneError> {
    if !(0.0..1.0).contains(&lambda) || lambda == 0.0 {
        return Err(PruneError::InvalidLambda);
    }
    let g = subensemble_objective(bits, profile, labels)?;
    Ok(lambda * g.err + (1.0 - lambda) * g.dr)
}

/// Pruning configuration shared by the three algorithms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Maximum sub-ensemble size.
    pub k: usize,
    /// Accuracy/fairness trade-off, strictly inside (0,1).
    pub lambda: f64,
    /// Machine count for the distributed pruner.
    pub n_m: usize,
    pub seed: u64,
    /// Outer-iteration multiplier for the archive search (default 1 keeps the
    /// loop bound tied to k as written).
    #[serde(default = "default_multiplier")]
    pub iter_multiplier: usize,
}

fn default_multiplier() -> usize {
    1
}

impl PruneConfig {
    fn validate(&self, m: usize) -> Result<(), PruneError> {
        if self.k == 0 || self.k > m {
            return Err(PruneError::InvalidConfig(format!(
                "k must lie in 1..={m}, got {}",
                self.k
            )));
        }
        if !(0.0..1.0).contains(&self.lambda) || self.lambda == 0.0 {
            return Err(PruneError::InvalidLambda);
        }
        if self.n_m == 0 || self.n_m > m {
            return Err(PruneError::InvalidConfig(format!(
                "n_m must lie in 1..={m}, got {}",
                self.n_m
            )));
        }
        Ok(())
    }
}

/// Pruning outcome: selected member indices plus the objective values that
/// ranked them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub selected: Vec<usize>,
    pub objective: BiObjective,
    pub combined_loss: f64,
}

struct ObjectiveCache<'a> {
    profile: &'a EnsembleProfile,
    labels: &'a [usize],
    lambda: f64,
    cache: HashMap<Vec<bool>, (BiObjective, f64)>,
}

impl<'a> ObjectiveCache<'a> {
    fn new(profile: &'a EnsembleProfile, labels: &'a [usize], lambda: f64) -> Self {
        Self {
            profile,
            labels,
            lambda,
            cache: HashMap::new(),
        }
    }

    fn eval(&mut self, bits: &[bool]) -> (BiObjective, f64) {
        if let Some(&v) = self.cache.get(bits) {
            return v;
        }
        let g = subensemble_objective(bits, self.profile, self.labels)
            .expect("feasible selector");
        let loss = self.lambda * g.err + (1.0 - self.lambda) * g.dr;
        self.cache.insert(bits.to_vec(), (g, loss));
        (g, loss)
    }
}

fn popcount(bits: &[bool]) -> usize {
    bits.iter().filter(|&&b| b).count()
}

fn feasible(bits: &[bool], k: usize) -> bool {
    let p = popcount(bits);
    p >= 1 && p <= k
}

/// Pareto-archive pruning: archive of non-dominated selectors, refreshed by
/// per-bit mutation and neighbour expansion, returning the archive entry with
/// the smallest λ-combined loss. Infeasible selectors (empty or larger than
/// k) are skipped wherever they arise.
pub fn poaf(
    profile: &EnsembleProfile,
    labels: &[usize],
    cfg: &PruneConfig,
) -> Result<PruneOutcome, PruneError> {
    let m = profile.m();
    cfg.validate(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache = ObjectiveCache::new(profile, labels, cfg.lambda);

    // initial selector: k members drawn without replacement
    let mut idx: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let mut init = vec![false; m];
    for &j in idx.iter().take(cfg.k) {
        init[j] = true;
    }

    let mut archive = ParetoArchive::default();
    let (g0, _) = cache.eval(&init);
    archive.insert(init, g0);

    let iterations = cfg.k * cfg.iter_multiplier.max(1);
    for _ in 0..iterations {
        let pick = rng.gen_range(0..archive.len());
        let base = archive.entries()[pick].0.clone();
        let mut mutated = base.clone();
        for bit in mutated.iter_mut() {
            if rng.gen_range(0..m) == 0 {
                *bit = !*bit;
            }
        }
        if !feasible(&mutated, cfg.k) {
            continue;
        }
        let (g, _) = cache.eval(&mutated);
        if archive
            .entries()
            .iter()
            .any(|(_, z)| dominates(*z, g) == Domination::Strict)
        {
            continue;
        }
        archive.insert(mutated.clone(), g);

        // neighbour solutions: one member removed or one member added
        let mut neighbours: Vec<Vec<bool>> = Vec::new();
        for j in 0..m {
            let mut v = mutated.clone();
            v[j] = !v[j];
            if feasible(&v, cfg.k) {
                neighbours.push(v);
            }
        }
        let mut scored: Vec<(f64, Vec<bool>)> = neighbours
            .into_iter()
            .map(|v| {
                let (_, loss) = cache.eval(&v);
                (loss, v)
            })
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for (_, v) in scored {
            let (g, _) = cache.eval(&v);
            if archive
                .entries()
                .iter()
                .any(|(_, z)| dominates(*z, g) == Domination::Strict)
            {
                continue;
            }
            archive.insert(v, g);
        }
    }

    // H = argmin over the archive of the combined loss; ties break on the
    // lexicographically smallest bit pattern for determinism.
    let mut best: Option<(f64, Vec<bool>, BiObjective)> = None;
    for (bits, g) in archive.entries() {
        let (_, loss) = cache.eval(bits);
        let better = match &best {
            None => true,
            Some((bl, bb, _)) => loss < *bl || (loss == *bl && bits < bb),
        };
        if better {
            best = Some((loss, bits.clone(), *g));
        }
    }
    let (loss, bits, g) = best.expect("archive is never empty");
    Ok(PruneOutcome {
        selected: (0..m).filter(|&j| bits[j]).collect(),
        objective: g,
        combined_loss: loss,
    })
}

/// Per-member statistics the greedy pruners rank on.
pub struct MemberStats {
    pub errs: Vec<f64>,
    pub tandem: Vec<Vec<f64>>,
}

/// Member 0/1 error rates and the pairwise tandem-fairness matrix of a
/// profile against the labels.
pub fn member_stats(profile: &EnsembleProfile, labels: &[usize]) -> MemberStats {
    let m = profile.m();
    let n = profile.n();
    let errs: Vec<f64> = profile
        .members
        .iter()
        .map(|p| {
            p.preds_orig
                .iter()
                .zip(labels)
                .filter(|(a, b)| a != b)
                .count() as f64
                / n as f64
        })
        .collect();
    let flip = |p: &PredictionProfile, i: usize| p.preds_orig[i] != p.preds_pert[i];
    let mut tandem = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..=a {
            let both = (0..n)
                .filter(|&i| flip(&profile.members[a], i) && flip(&profile.members[b], i))
                .count() as f64
                / n as f64;
            tandem[a][b] = both;
            tandem[b][a] = both;
        }
    }
    MemberStats { errs, tandem }
}

/// Centralised greedy pruning: start from the member with the smallest
/// degenerate combined loss, then repeatedly add the candidate minimising the
/// summed pairwise loss against the current selection. Ties break to the
/// lowest member index.
pub fn epaf_c(
    profile: &EnsembleProfile,
    labels: &[usize],
    k: usize,
    lambda: f64,
) -> Result<PruneOutcome, PruneError> {
    let stats = member_stats(profile, labels);
    let selected = epaf_c_from_stats(&stats, k, lambda)?;
    finish_outcome(selected, profile, labels, lambda)
}

/// Greedy selection given precomputed member stats; used by both EPAF
/// variants (the distributed version runs it per group).
pub fn epaf_c_from_stats(
    stats: &MemberStats,
    k: usize,
    lambda: f64,
) -> Result<Vec<usize>, PruneError> {
    let m = stats.errs.len();
    if m == 0 {
        return Err(PruneError::EmptySelector);
    }
    if k == 0 {
        return Err(PruneError::InvalidConfig("k must be positive".into()));
    }
    if !(0.0..1.0).contains(&lambda) || lambda == 0.0 {
        return Err(PruneError::InvalidLambda);
    }
    // degenerate pair loss L(f,f) = λ·err + (1-λ)·dr
    let mut first = 0usize;
    let mut first_loss = f64::INFINITY;
    for j in 0..m {
        let loss = lambda * stats.errs[j] + (1.0 - lambda) * stats.tandem[j][j];
        if loss < first_loss {
            first_loss = loss;
            first = j;
        }
    }
    let mut selected = vec![first];
    while selected.len() < k.min(m) {
        let mut best: Option<(f64, usize)> = None;
        for cand in 0..m {
            if selected.contains(&cand) {
                continue;
            }
            let total: f64 = selected
                .iter()
                .map(|&j| {
                    pair_loss(stats.errs[cand], stats.errs[j], stats.tandem[cand][j], lambda)
                        .expect("lambda validated")
                })
                .sum();
            let better = match best {
                None => true,
                Some((bl, _)) => total < bl,
            };
            if better {
                best = Some((total, cand));
            }
        }
        selected.push(best.expect("candidates remain").1);
    }
    selected.sort_unstable();
    Ok(selected)
}

fn finish_outcome(
    selected: Vec<usize>,
    profile: &EnsembleProfile,
    labels: &[usize],
    lambda: f64,
) -> Result<PruneOutcome, PruneError> {
    let mut bits = vec![false; profile.m()];
    for &j in &selected {
        bits[j] = true;
    }
    let objective = subensemble_objective(&bits, profile, labels)?;
    Ok(PruneOutcome {
        selected,
        objective,
        combined_loss: lambda * objective.err + (1.0 - lambda) * objective.dr,
    })
}

/// Distributed greedy pruning: random near-equal partition into n_m groups,
/// EPAF-C within each group, EPAF-C again on the union of the group picks,
/// then the loss-minimal candidate among the group results and the merged
/// result (ties to the earliest in that ordering).
pub fn epaf_d(
    profile: &EnsembleProfile,
    labels: &[usize],
    cfg: &PruneConfig,
) -> Result<PruneOutcome, PruneError> {
    let m = profile.m();
    cfg.validate(m)?;
    let stats = member_stats(profile, labels);

    let mut perm: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 0));
    for i in (1..m).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_m];
    for (pos, &member) in perm.iter().enumerate() {
        groups[pos % cfg.n_m].push(member);
    }
    // canonical within-group order so greedy tie-breaks are index-based and
    // n_m = 1 reduces exactly to the centralised pruner
    for g in &mut groups {
        g.sort_unstable();
    }

    let restrict = |members: &[usize]| MemberStats {
        errs: members.iter().map(|&j| stats.errs[j]).collect(),
        tandem: members
            .iter()
            .map(|&a| members.iter().map(|&b| stats.tandem[a][b]).collect())
            .collect(),
    };

    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut union: Vec<usize> = Vec::new();
    for group in &groups {
        let local = epaf_c_from_stats(&restrict(group), cfg.k, cfg.lambda)?;
        let picked: Vec<usize> = local.iter().map(|&i| group[i]).collect();
        union.extend(&picked);
        candidates.push(picked);
    }
    union.sort_unstable();
    let merged_local = epaf_c_from_stats(&restrict(&union), cfg.k, cfg.lambda)?;
    candidates.push(merged_local.iter().map(|&i| union[i]).collect());

    let mut best: Option<(f64, Vec<usize>)> = None;
    for cand in candidates {
        let mut bits = vec![false; m];
        for &j in &cand {
            bits[j] = true;
        }
        let loss = subensemble_loss(&bits, profile, labels, cfg.lambda)?;
        let better = match &best {
            None => true,
            Some((bl, _)) => loss < *bl,
        };
        if better {
            best = Some((loss, cand));
        }
    }
    let (_, selected) = best.expect("at least one candidate");
    finish_outcome(selected, profile, labels, cfg.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::PredictionProfile;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obj(err: f64, dr: f64) -> BiObjective {
        BiObjective { err, dr }
    }

    #[test]
    fn domination_cases() {
        assert_eq!(dominates(obj(0.1, 0.2), obj(0.2, 0.3)), Domination::Strict);
        assert_eq!(dominates(obj(0.1, 0.2), obj(0.1, 0.2)), Domination::WeakOnly);
        assert_eq!(dominates(obj(0.1, 0.4), obj(0.2, 0.3)), Domination::None);
    }

    #[test]
    fn archive_insert_cases() {
        let mut a = ParetoArchive::default();
        assert!(a.insert(vec![true, false], obj(0.5, 0.5)));
        // strictly dominated candidate rejected, archive unchanged
        assert!(!a.insert(vec![false, true], obj(0.6, 0.6)));
        assert_eq!(a.len(), 1);
        // candidate dominating two of three entries
        let mut a = ParetoArchive::default();
        a.insert(vec![true, false, false], obj(0.5, 0.4));
        a.insert(vec![false, true, false], obj(0.4, 0.5));
        a.insert(vec![false, false, true], obj(0.05, 0.9));
        assert!(a.insert(vec![true, true, false], obj(0.3, 0.3)));
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn pair_loss_cases() {
        let v = pair_loss(0.2, 0.4, 0.1, 0.5).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
        // symmetry
        assert_eq!(
            pair_loss(0.2, 0.4, 0.1, 0.3).unwrap(),
            pair_loss(0.4, 0.2, 0.1, 0.3).unwrap()
        );
        assert!(matches!(pair_loss(0.1, 0.1, 0.1, 0.0), Err(PruneError::InvalidLambda)));
        assert!(matches!(pair_loss(0.1, 0.1, 0.1, 1.0), Err(PruneError::InvalidLambda)));
    }

    /// Random profiles with controllable flip patterns.
    fn random_profile(m: usize, n: usize, seed: u64) -> (EnsembleProfile, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let members: Vec<PredictionProfile> = (0..m)
            .map(|j| {
                let preds_orig: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
                let preds_pert: Vec<usize> = preds_orig
                    .iter()
                    .map(|&p| if rng.gen_range(0..4) == 0 { 1 - p } else { p })
                    .collect();
                PredictionProfile {
                    member_id: j,
                    preds_orig,
                    preds_pert,
                }
            })
            .collect();
        let w = vec![1.0 / m as f64; m];
        let mut vote_orig = Vec::with_capacity(n);
        let mut vote_pert = Vec::with_capacity(n);
        for i in 0..n {
            let po: Vec<usize> = members.iter().map(|p| p.preds_orig[i]).collect();
            let pp: Vec<usize> = members.iter().map(|p| p.preds_pert[i]).collect();
            vote_orig.push(weighted_vote(&po, &w).unwrap());
            vote_pert.push(weighted_vote(&pp, &w).unwrap());
        }
        (
            EnsembleProfile {
                members,
                vote_orig,
                vote_pert,
                weights: w,
            },
            labels,
        )
    }

    #[test]
    fn subensemble_loss_brute_force() {
        let (profile, labels) = random_profile(3, 20, 5);
        let bits = vec![true, true, true];
        let loss = subensemble_loss(&bits, &profile, &labels, 0.5).unwrap();
        // brute force: recompute votes directly
        let w = vec![1.0 / 3.0; 3];
        let mut err = 0.0;
        let mut dr = 0.0;
        for i in 0..20 {
            let po: Vec<usize> = profile.members.iter().map(|p| p.preds_orig[i]).collect();
            let pp: Vec<usize> = profile.members.iter().map(|p| p.preds_pert[i]).collect();
            let vo = weighted_vote(&po, &w).unwrap();
            let vp = weighted_vote(&pp, &w).unwrap();
            if vo != labels[i] {
                err += 1.0;
            }
            if vo != vp {
                dr += 1.0;
            }
        }
        let expect = 0.5 * err / 20.0 + 0.5 * dr / 20.0;
        assert!((loss - expect).abs() < 1e-15);
        assert!(matches!(
            subensemble_loss(&[false; 3], &profile, &labels, 0.5),
            Err(PruneError::EmptySelector)
        ));
    }

    #[test]
    fn epaf_c_exhaustion_and_k1() {
        let (profile, labels) = random_profile(5, 30, 7);
        let all = epaf_c(&profile, &labels, 5, 0.5).unwrap();
        assert_eq!(all.selected, vec![0, 1, 2, 3, 4]);

        let one = epaf_c(&profile, &labels, 1, 0.5).unwrap();
        let stats = member_stats(&profile, &labels);
        let best = (0..5)
            .min_by(|&a, &b| {
                let la = 0.5 * stats.errs[a] + 0.5 * stats.tandem[a][a];
                let lb = 0.5 * stats.errs[b] + 0.5 * stats.tandem[b][b];
                la.partial_cmp(&lb).unwrap()
            })
            .unwrap();
        assert_eq!(one.selected, vec![best]);
    }

    #[test]
    fn epaf_c_matches_hand_trace() {
        // 3 members with a hand-built pairwise loss structure via stats
        let stats = MemberStats {
            errs: vec![0.4, 0.1, 0.2],
            tandem: vec![
                vec![0.30, 0.05, 0.10],
                vec![0.05, 0.20, 0.15],
                vec![0.10, 0.15, 0.10],
            ],
        };
        // λ=0.5: degenerate losses: 0.35, 0.15, 0.15 → tie (1,2) → pick 1
        // step 2 candidates against H={1}:
        //   cand 0: 0.25*(0.4+0.1)+0.5*0.05 = 0.15
        //   cand 2: 0.25*(0.2+0.1)+0.5*0.15 = 0.15  → tie → pick 0
        let sel = epaf_c_from_stats(&stats, 2, 0.5).unwrap();
        assert_eq!(sel, vec![0, 1]);
    }

    #[test]
    fn epaf_d_single_group_degenerates_to_epaf_c() {
        for seed in 0..10u64 {
            let (profile, labels) = random_profile(6, 40, seed);
            let cfg = PruneConfig {
                k: 3,
                lambda: 0.5,
                n_m: 1,
                seed,
                iter_multiplier: 1,
            };
            let d = epaf_d(&profile, &labels, &cfg).unwrap();
            let c = epaf_c(&profile, &labels, 3, 0.5).unwrap();
            assert_eq!(d.combined_loss, c.combined_loss);
        }
    }

    #[test]
    fn epaf_d_singleton_groups() {
        let (profile, labels) = random_profile(5, 40, 3);
        let cfg = PruneConfig {
            k: 2,
            lambda: 0.5,
            n_m: 5,
            seed: 3,
            iter_multiplier: 1,
        };
        let d = epaf_d(&profile, &labels, &cfg).unwrap();
        // result must be at least as good as every group (singleton) result
        for j in 0..5 {
            let mut bits = vec![false; 5];
            bits[j] = true;
            let loss = subensemble_loss(&bits, &profile, &labels, 0.5).unwrap();
            assert!(d.combined_loss <= loss + 1e-15);
        }
    }

    #[test]
    fn poaf_contract_and_determinism() {
        let (profile, labels) = random_profile(5, 40, 1);
        let cfg = PruneConfig {
            k: 3,
            lambda: 0.5,
            n_m: 1,
            seed: 1,
            iter_multiplier: 1,
        };
        let a = poaf(&profile, &labels, &cfg).unwrap();
        let b = poaf(&profile, &labels, &cfg).unwrap();
        assert_eq!(a.selected, b.selected);
        assert!(!a.selected.is_empty() && a.selected.len() <= 3);
        assert!(a.selected.iter().all(|&j| j < 5));
    }

    #[test]
    fn poaf_prefers_dominating_member() {
        // member 0 flips nowhere and is always right; member 1 flips everywhere
        // and is always wrong. With k=1 and enough iterations to reach both
        // singletons, the search must keep only member 0.
        let n = 16;
        let labels = vec![1usize; n];
        let members = vec![
            PredictionProfile {
                member_id: 0,
                preds_orig: vec![1; n],
                preds_pert: vec![1; n],
            },
            PredictionProfile {
                member_id: 1,
                preds_orig: vec![0; n],
                preds_pert: vec![1; n],
            },
        ];
        let w = vec![0.5, 0.5];
        let profile = EnsembleProfile {
            vote_orig: members[0].preds_orig.clone(),
            vote_pert: members[0].preds_pert.clone(),
            members,
            weights: w,
        };
        for seed in 0..32u64 {
            let cfg = PruneConfig {
                k: 1,
                lambda: 0.5,
                n_m: 1,
                seed,
                iter_multiplier: 100,
            };
            let out = poaf(&profile, &labels, &cfg).unwrap();
            assert_eq!(out.selected, vec![0], "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn archive_never_holds_dominated_pair(
            objs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..40)
        ) {
            let mut archive = ParetoArchive::default();
            for (i, &(err, dr)) in objs.iter().enumerate() {
                let mut bits = vec![false; 8];
                bits[i % 8] = true;
                bits[(i / 8) % 8] = true;
                let cand = obj(err, dr);
                let strictly_dominated = archive
                    .entries()
                    .iter()
                    .any(|(_, g)| dominates(*g, cand) == Domination::Strict);
                let accepted = archive.insert(bits, cand);
                prop_assert_eq!(accepted, !strictly_dominated);
                for (x, a) in archive.entries() {
                    for (y, b) in archive.entries() {
                        if x != y {
                            prop_assert!(dominates(*a, *b) != Domination::Strict);
                        }
                    }
                }
            }
        }

        #[test]
        fn pruners_respect_size_contract(seed in 0u64..50, k in 1usize..5, m in 2usize..8) {
            prop_assume!(k <= m);
            let (profile, labels) = random_profile(m, 30, seed);
            let cfg = PruneConfig { k, lambda: 0.5, n_m: (m / 2).max(1), seed, iter_multiplier: 1 };
            for out in [
                poaf(&profile, &labels, &cfg).unwrap(),
                epaf_c(&profile, &labels, k, 0.5).unwrap(),
                epaf_d(&profile, &labels, &cfg).unwrap(),
            ] {
                prop_assert!(!out.selected.is_empty());
                prop_assert!(out.selected.len() <= k);
                prop_assert!(out.selected.iter().all(|&j| j < m));
            }
        }
    }
}
