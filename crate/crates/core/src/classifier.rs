//! Minimum-distance classification against the theoretical feature table and
//! majority fusion of the per-branch decisions.
//!
//! The classifier needs no training: each branch vector is matched to the
//! closest theoretical vector in plain Euclidean distance, and the most
//! frequent scheme across branches wins. All tie-breaks are deterministic:
//! equal distances fall back to the scheme order, equal vote counts to the
//! smaller accumulated distance and then the scheme order.

use crate::error::{DmiError, Result};
use crate::hos::FeatureVector;
use crate::modem::ModulationScheme;

/// Per-branch classification outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchDecision {
    pub branch_index: usize,
    pub scheme: ModulationScheme,
    pub distance: f64,
}

/// Nearest theoretical vector in Euclidean distance. The reference `table`
/// must carry the same feature set (and hence dimension) as `features`.
pub fn classify_branch(
    branch_index: usize,
    features: &FeatureVector,
    table: &[(ModulationScheme, FeatureVector)],
) -> Result<BranchDecision> {
    if table.is_empty() {
        return Err(DmiError::InvalidArgument("empty reference table".into()));
    }
    let mut best: Option<(ModulationScheme, f64)> = None;
    for (scheme, reference) in table {
        if reference.feature_set() != features.feature_set() || reference.dim() != features.dim() {
            return Err(DmiError::InvalidArgument(format!(
                "feature mismatch: branch has {:?}/{}, table entry {} has {:?}/{}",
                features.feature_set(),
                features.dim(),
                scheme,
                reference.feature_set(),
                reference.dim()
            )));
        }
        let d2: f64 = features
            .values()
            .iter()
            .zip(reference.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let d = d2.sqrt();
        let better = match best {
            None => true,
            Some((s, bd)) => d < bd || (d == bd && *scheme < s),
        };
        if better {
            best = Some((*scheme, d));
        }
    }
    let (scheme, distance) = best.unwrap();
    Ok(BranchDecision {
        branch_index,
        scheme,
        distance,
    })
}

/// Plurality vote over branch decisions. Ties are broken by the smallest
/// total distance among the tied schemes, then by the scheme order.
pub fn fuse_decisions(decisions: &[BranchDecision]) -> Result<ModulationScheme> {
    if decisions.is_empty() {
        return Err(DmiError::NoDecision);
    }
    let mut votes = [0usize; 6];
    let mut dist = [0.0f64; 6];
    for d in decisions {
        votes[d.scheme.index()] += 1;
        dist[d.scheme.index()] += d.distance;
    }
    let mut winner = 0usize;
    for i in 1..6 {
        if votes[i] > votes[winner] || (votes[i] == votes[winner] && dist[i] < dist[winner]) {
            winner = i;
        }
    }
    Ok(ModulationScheme::ALL[winner])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hos::{theoretical_feature_table, FeatureSet};
    use proptest::prelude::*;

    fn table() -> Vec<(ModulationScheme, FeatureVector)> {
        theoretical_feature_table(FeatureSet::HosDenoised)
    }

    fn decision(scheme: ModulationScheme, distance: f64) -> BranchDecision {
        BranchDecision {
            branch_index: 0,
            scheme,
            distance,
        }
    }

    #[test]
    fn exact_vector_classifies_with_zero_distance() {
        let t = table();
        let psk8 = t[ModulationScheme::Psk8.index()].1.clone();
        let d = classify_branch(3, &psk8, &t).unwrap();
        assert_eq!(d.scheme, ModulationScheme::Psk8);
        assert_eq!(d.distance, 0.0);
        assert_eq!(d.branch_index, 3);
    }

    #[test]
    fn small_perturbation_keeps_the_decision() {
        let t = table();
        let mut values: Vec<f64> = t[ModulationScheme::Qpsk.index()].1.values().to_vec();
        values[0] += 0.01;
        let fv = FeatureVector::new(values, FeatureSet::HosDenoised).unwrap();
        let d = classify_branch(0, &fv, &t).unwrap();
        assert_eq!(d.scheme, ModulationScheme::Qpsk);
        assert!(d.distance > 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let hos = table();
        let hoc = theoretical_feature_table(FeatureSet::HocOnly);
        let fv = hoc[0].1.clone();
        assert!(matches!(
            classify_branch(0, &fv, &hos),
            Err(DmiError::InvalidArgument(_))
        ));
    }

    #[test]
    fn fuse_majority_and_singletons() {
        let q = decision(ModulationScheme::Qpsk, 0.5);
        let b = decision(ModulationScheme::Bpsk, 0.1);
        assert_eq!(fuse_decisions(&[q, q, b]).unwrap(), ModulationScheme::Qpsk);
        assert_eq!(fuse_decisions(&[b]).unwrap(), ModulationScheme::Bpsk);
        assert!(matches!(fuse_decisions(&[]), Err(DmiError::NoDecision)));
    }

    #[test]
    fn fuse_tie_breaks_on_total_distance_then_order() {
        let b = decision(ModulationScheme::Bpsk, 1.0);
        let q = decision(ModulationScheme::Qpsk, 0.2);
        assert_eq!(fuse_decisions(&[b, q]).unwrap(), ModulationScheme::Qpsk);
        // Equal distances: the scheme order decides.
        let b = decision(ModulationScheme::Bpsk, 0.2);
        assert_eq!(fuse_decisions(&[q, b]).unwrap(), ModulationScheme::Bpsk);
    }

    #[test]
    fn fusion_is_permutation_invariant_without_ties() {
        let a = decision(ModulationScheme::Ask4, 0.3);
        let b = decision(ModulationScheme::Ask4, 0.6);
        let c = decision(ModulationScheme::Qam16, 0.1);
        let fwd = fuse_decisions(&[a, b, c]).unwrap();
        let rev = fuse_decisions(&[c, b, a]).unwrap();
        assert_eq!(fwd, rev);
        assert_eq!(fwd, ModulationScheme::Ask4);
    }

    #[test]
    fn empirical_noiseless_features_classify_correctly() {
        use crate::hos::{cumulants_from_moments, normalize_features, MomentSet};
        use crate::modem::generate_symbols;
        use rand::SeedableRng;

        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let x = generate_symbols(ModulationScheme::Qam16, 100_000, &mut rng).unwrap();
        let m = MomentSet::estimate(&x.samples).unwrap();
        let k = cumulants_from_moments(&m);
        let fv = normalize_features(&m, &k, m.mu21.re, FeatureSet::HosDenoised).unwrap();
        let d = classify_branch(0, &fv, &table()).unwrap();
        assert_eq!(d.scheme, ModulationScheme::Qam16);
    }

    #[test]
    fn storage_order_of_table_does_not_matter() {
        let mut t = table();
        let probe = t[ModulationScheme::Ask8.index()].1.clone();
        t.reverse();
        let d = classify_branch(0, &probe, &t).unwrap();
        assert_eq!(d.scheme, ModulationScheme::Ask8);
    }

    proptest! {
        /// Scaling every feature and every reference by the same positive
        /// constant cannot change any decision.
        #[test]
        fn argmax_invariant_under_positive_scaling(
            scale in 0.05f64..20.0,
            bump in proptest::collection::vec(-0.4f64..0.4, 15),
        ) {
            let t = table();
            let base: Vec<f64> = t[ModulationScheme::Qam16.index()]
                .1
                .values()
                .iter()
                .zip(&bump)
                .map(|(v, b)| v + b)
                .collect();
            let fv = FeatureVector::new(base.clone(), FeatureSet::HosDenoised).unwrap();
            let before = classify_branch(0, &fv, &t).unwrap().scheme;

            let scaled_table: Vec<_> = t
                .iter()
                .map(|(s, v)| {
                    let vals: Vec<f64> = v.values().iter().map(|x| x * scale).collect();
                    (*s, FeatureVector::new(vals, FeatureSet::HosDenoised).unwrap())
                })
                .collect();
            let scaled_fv = FeatureVector::new(
                base.iter().map(|x| x * scale).collect(),
                FeatureSet::HosDenoised,
            )
            .unwrap();
            let after = classify_branch(0, &scaled_fv, &scaled_table).unwrap().scheme;
            prop_assert_eq!(before, after);
        }
    }
}
