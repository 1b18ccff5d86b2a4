//! Unique-ID certification via successor rings and polynomial multi-set
//! fingerprints.
//!
//! The sorted ID list puts IDs in a ring. Each node holds one element of
//! the multi-set of claimed IDs and derives one element of the multi-set of
//! their successors; the two multi-sets are equal exactly when each listed
//! ID is held once. Equality is checked by evaluating the product
//! polynomials of both multi-sets at shared points, multiplying partial
//! products up the tree, and comparing at the root.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{field_mul_fold, FieldElement, MODULUS};
use crate::types::NodeId;

/// Number of evaluation points drawn by the root in randomized mode. A
/// duplicate goes undetected only if every drawn point is a root of the
/// difference polynomial, i.e. with probability at most `(n / Q)^k`.
pub const RANDOM_POINT_COUNT: usize = 3;

/// How evaluation points for a uniqueness round are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniquenessMode {
    /// Evaluate at the fixed points `0..=n`. Always correct; each node
    /// sends `n + 1` pairs per round.
    #[default]
    Deterministic,
    /// The root draws [`RANDOM_POINT_COUNT`] points from the whole field
    /// and floods them down the tree before the evaluation pass. Constant
    /// message size, with the miss probability bounded above.
    RootRandom,
}

/// Per-round evaluation state for one node: the active points, the node's
/// element of the ID multi-set, and its element of the successor multi-set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualityRoundState {
    pub points: Vec<FieldElement>,
    pub own_id: FieldElement,
    pub own_successor: FieldElement,
}

impl EqualityRoundState {
    pub fn new(points: Vec<FieldElement>, id: NodeId, successor_id: NodeId) -> Self {
        EqualityRoundState {
            points,
            own_id: id.to_field(),
            own_successor: successor_id.to_field(),
        }
    }

    /// Evaluates this node's pair at every point, folding in the aligned
    /// child pair lists.
    pub fn evaluate(&self, child_pairs: &[Vec<(FieldElement, FieldElement)>]) -> SetEqPairs {
        self.points
            .iter()
            .enumerate()
            .map(|(i, &point)| {
                let at_point: Vec<(FieldElement, FieldElement)> = child_pairs
                    .iter()
                    .map(|pairs| pairs.get(i).copied().unwrap_or((FieldElement::ONE, FieldElement::ONE)))
                    .collect();
                set_equality_step(point, self.own_id, self.own_successor, &at_point)
            })
            .collect()
    }
}

/// One `(p0, p1)` pair per evaluation point.
pub type SetEqPairs = Vec<(FieldElement, FieldElement)>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdListError {
    #[error("id {0} is not in the id list")]
    MissingId(NodeId),
}

/// Next ID in the ring over `id_list`: the smallest element greater than
/// `id`, wrapping around to the smallest element overall.
pub fn successor(id: NodeId, id_list: &[NodeId]) -> Result<NodeId, IdListError> {
    match id_list.binary_search(&id) {
        Ok(pos) => Ok(id_list[(pos + 1) % id_list.len()]),
        Err(_) => Err(IdListError::MissingId(id)),
    }
}

/// True when the list is nonempty and strictly increasing, which doubles
/// as the local duplicate-freedom check every node runs before the round.
/// An empty list is a degenerate configuration and is rejected.
pub fn check_id_list(id_list: &[NodeId]) -> bool {
    !id_list.is_empty() && id_list.windows(2).all(|w| w[0] < w[1])
}

/// One node's contribution at one point: its linear factor for each
/// multi-set times the partial products received from its children.
pub fn set_equality_step(
    point: FieldElement,
    own_id: FieldElement,
    own_successor: FieldElement,
    child_pairs: &[(FieldElement, FieldElement)],
) -> (FieldElement, FieldElement) {
    let p0 = field_mul_fold(point - own_id, child_pairs.iter().map(|p| p.0));
    let p1 = field_mul_fold(point - own_successor, child_pairs.iter().map(|p| p.1));
    (p0, p1)
}

/// Evaluation points for one round under `mode`, where `n` is the number
/// of active nodes. Randomized points come only from the supplied seeded
/// generator, never from system entropy.
pub fn evaluation_points(mode: UniquenessMode, n: u64, rng: &mut ChaCha8Rng) -> Vec<FieldElement> {
    match mode {
        UniquenessMode::Deterministic => (0..=n).map(FieldElement::new).collect(),
        UniquenessMode::RootRandom => (0..RANDOM_POINT_COUNT)
            .map(|_| FieldElement::new(rng.gen_range(0..MODULUS)))
            .collect(),
    }
}

/// Root-side comparison: indices of points where the two product
/// evaluations differ. Empty means the multi-sets fingerprint as equal.
/// The root signals on the first differing point but the full list is
/// reported for diagnosis.
pub fn differing_points(pairs: &[(FieldElement, FieldElement)]) -> Vec<usize> {
    pairs
        .iter()
        .enumerate()
        .filter(|(_, (p0, p1))| p0 != p1)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn ids(values: &[u64]) -> Vec<NodeId> {
        values.iter().copied().map(NodeId::new).collect()
    }

    #[test]
    fn successor_takes_the_next_element() {
        assert_eq!(
            successor(NodeId::new(1), &ids(&[1, 2, 3])),
            Ok(NodeId::new(2))
        );
    }

    #[test]
    fn successor_wraps_to_the_smallest() {
        assert_eq!(
            successor(NodeId::new(3), &ids(&[1, 2, 3])),
            Ok(NodeId::new(1))
        );
    }

    #[test]
    fn successor_of_a_singleton_is_itself() {
        assert_eq!(successor(NodeId::new(7), &ids(&[7])), Ok(NodeId::new(7)));
    }

    #[test]
    fn successor_requires_membership() {
        assert_eq!(
            successor(NodeId::new(5), &ids(&[1, 2, 3])),
            Err(IdListError::MissingId(NodeId::new(5)))
        );
    }

    #[test]
    fn id_list_check_accepts_strictly_increasing() {
        assert!(check_id_list(&ids(&[1, 2, 3])));
    }

    #[test]
    fn id_list_check_rejects_duplicates_and_empty() {
        assert!(!check_id_list(&ids(&[1, 1, 3])));
        assert!(!check_id_list(&ids(&[2, 1])));
        assert!(!check_id_list(&[]));
    }

    /// Centralized evaluation of both product polynomials for a multi-set
    /// of held IDs against the successor multi-set derived from `id_list`.
    fn fingerprint_at(
        point: FieldElement,
        held: &[NodeId],
        id_list: &[NodeId],
    ) -> (FieldElement, FieldElement) {
        let mut p0 = FieldElement::ONE;
        let mut p1 = FieldElement::ONE;
        for &id in held {
            p0 = p0 * (point - id.to_field());
            let succ = successor(id, id_list).unwrap();
            p1 = p1 * (point - succ.to_field());
        }
        (p0, p1)
    }

    #[test]
    fn duplicate_pair_one_one_three_differs_at_point_zero() {
        // Held IDs (1, 1, 3) against list [1, 3]: the ID multi-set is
        // {1,1,3} and the successor multi-set is {3,3,1}; at point 0 the
        // products differ by 6 in the field.
        let held = ids(&[1, 1, 3]);
        let list = ids(&[1, 3]);
        let (p0, p1) = fingerprint_at(FieldElement::ZERO, &held, &list);
        assert_eq!((p1 - p0).value(), MODULUS - 6);
        assert_ne!(p0, p1);
        assert_eq!(differing_points(&[(p0, p1)]), vec![0]);
    }

    #[test]
    fn identical_multisets_agree_everywhere() {
        let held = ids(&[1, 2, 3]);
        let list = ids(&[1, 2, 3]);
        for v in 0..=3u64 {
            let (p0, p1) = fingerprint_at(FieldElement::new(v), &held, &list);
            assert_eq!(p0, p1);
        }
    }

    #[test]
    fn step_matches_centralized_product_over_a_small_tree() {
        // Two leaves under a root; the folded products must equal the flat
        // product over all three nodes' factors.
        let list = ids(&[2, 5, 9]);
        let point = FieldElement::new(4);
        let leaf = |id: u64| {
            let id = NodeId::new(id);
            set_equality_step(
                point,
                id.to_field(),
                successor(id, &list).unwrap().to_field(),
                &[],
            )
        };
        let child_pairs = vec![leaf(5), leaf(9)];
        let root_id = NodeId::new(2);
        let folded = set_equality_step(
            point,
            root_id.to_field(),
            successor(root_id, &list).unwrap().to_field(),
            &child_pairs,
        );
        let flat = fingerprint_at(point, &ids(&[2, 5, 9]), &list);
        assert_eq!(folded, flat);
    }

    /// Brute-force multi-set equality used as the independent oracle.
    fn multisets_equal(a: &[u64], b: &[u64]) -> bool {
        let count = |xs: &[u64]| {
            let mut m = BTreeMap::new();
            for &x in xs {
                *m.entry(x).or_insert(0u32) += 1;
            }
            m
        };
        count(a) == count(b)
    }

    /// Enumerates every multi-set of the given size over `universe`.
    fn multisets(universe: &[u64], size: usize) -> Vec<Vec<u64>> {
        fn rec(universe: &[u64], from: usize, size: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
            if size == 0 {
                out.push(cur.clone());
                return;
            }
            for i in from..universe.len() {
                cur.push(universe[i]);
                rec(universe, i, size - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(universe, 0, size, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn fingerprint_agrees_with_brute_force_over_all_small_multiset_pairs() {
        // Exhaustive over all pairs of multi-sets of equal size <= 5 from a
        // 5-value universe. Both polynomials are monic of the multi-set's
        // size, so their difference has fewer roots than evaluation points
        // and the fingerprint over [0, n] decides equality exactly.
        let universe = [0u64, 1, 2, 3, 4];
        for size in 1..=5usize {
            let sets = multisets(&universe, size);
            let points: Vec<FieldElement> = (0..=size as u64).map(FieldElement::new).collect();
            for a in &sets {
                for b in &sets {
                    let equal_fp = points.iter().all(|&v| {
                        let fp = |xs: &[u64]| {
                            field_mul_fold(
                                FieldElement::ONE,
                                xs.iter().map(|&x| v - FieldElement::new(x)),
                            )
                        };
                        fp(a) == fp(b)
                    });
                    assert_eq!(
                        equal_fp,
                        multisets_equal(a, b),
                        "fingerprint disagreed with brute force on {a:?} vs {b:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn verdict_is_invariant_under_permuting_id_assignment() {
        // Which node holds which ID cannot matter: the fingerprint is a
        // product over all held IDs.
        let list = ids(&[3, 8, 11, 20]);
        let held = ids(&[3, 8, 11, 20]);
        let point = FieldElement::new(13);
        let (a0, a1) = fingerprint_at(point, &held, &list);
        let permuted = ids(&[20, 3, 11, 8]);
        let (b0, b1) = fingerprint_at(point, &permuted, &list);
        assert_eq!((a0, a1), (b0, b1));
    }

    #[test]
    fn evaluation_points_deterministic_mode_is_zero_to_n() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts = evaluation_points(UniquenessMode::Deterministic, 4, &mut rng);
        assert_eq!(pts, (0..=4).map(FieldElement::new).collect::<Vec<_>>());
    }

    #[test]
    fn evaluation_points_random_mode_draws_from_seeded_rng() {
        use rand::SeedableRng;
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        let pa = evaluation_points(UniquenessMode::RootRandom, 64, &mut a);
        let pb = evaluation_points(UniquenessMode::RootRandom, 64, &mut b);
        assert_eq!(pa, pb);
        assert_eq!(pa.len(), RANDOM_POINT_COUNT);
    }
}
