//! Success-probability measurements for the recovery attack: Monte Carlo at
//! arbitrary field sizes, exact enumeration at tiny ones, and the live
//! impersonation-rate experiment for the ambiguous case.
//!
//! The attack matrix depends only on field-level data, so everything here
//! except the live experiment runs without a curve; that is what makes
//! `p = 1009` with a hundred thousand trials cheap.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::algebra::{
    dot, sample_vector_where, solve_dot_constraint, CurveParams, FieldVector,
};
use crate::attacklab::linalg::{MatFp, SolveOutcome};
use crate::attacklab::recovery::live_authenticate;
use crate::authority::{Lcd, SecretComponent};
use crate::error::{Error, Result};
use crate::topology::NodeId;

/// 99% two-sided normal quantile, for the Monte Carlo confidence intervals.
const Z_99: f64 = 2.5758293035489004;

const STAR_SAMPLE_ATTEMPTS: u32 = 64;

/// One field-level run of the assignment procedure on a star: a root plus
/// fresh edges to `leaves.len()` leaf nodes. Leaf `i` is node `i + 2`.
#[derive(Debug, Clone)]
pub struct StarSample {
    pub p: u64,
    pub root_k: FieldVector,
    pub root_t: FieldVector,
    pub leaves: Vec<StarLeaf>,
}

#[derive(Debug, Clone)]
pub struct StarLeaf {
    pub k: FieldVector,
    pub t: FieldVector,
    /// Pre-image of the root's published vector toward this leaf.
    pub m_out: FieldVector,
    /// Pre-image of the leaf's published vector back to the root.
    pub m_back: FieldVector,
}

/// Runs the fresh-edge assignment for every leaf, with the same samplers the
/// authority uses, so the outcome distribution matches real provisioning.
pub fn sample_star<R: Rng + ?Sized>(p: u64, leaves: usize, rng: &mut R) -> Result<StarSample> {
    let root_k = crate::algebra::sample_nonzero_vector(rng, 2, p);
    let root_t = crate::algebra::sample_nonzero_vector(rng, 2, p);
    let mut out = Vec::with_capacity(leaves);
    for _ in 0..leaves {
        let m_out = sample_vector_where(rng, 2, p, STAR_SAMPLE_ATTEMPTS, |m| {
            !dot(&root_k, m).expect("same field").is_zero()
        })?;
        let k = solve_dot_constraint(&root_t, dot(&root_k, &m_out)?, rng)?;
        let m_back = sample_vector_where(rng, 2, p, STAR_SAMPLE_ATTEMPTS, |m| {
            !dot(&k, m).expect("same field").is_zero()
        })?;
        let t = solve_dot_constraint(&root_k, dot(&k, &m_back)?, rng)?;
        out.push(StarLeaf { k, t, m_out, m_back });
    }
    Ok(StarSample {
        p,
        root_k,
        root_t,
        leaves: out,
    })
}

impl StarSample {
    /// The attacker's system from the first two leaves, with ground-truth
    /// right-hand sides (no oracle involved at field level).
    pub fn attack_system(&self) -> (MatFp, FieldVector) {
        let rows = [0usize, 1].map(|i| {
            let leaf = &self.leaves[i];
            (
                FieldVector::new(vec![
                    leaf.k.coord(0),
                    leaf.k.coord(1),
                    leaf.m_out.coord(0).neg(),
                    leaf.m_out.coord(1).neg(),
                ]),
                FieldVector::from_values(
                    &[0, 0, leaf.t.coord(0).value(), leaf.t.coord(1).value()],
                    self.p,
                ),
            )
        });
        let matrix = MatFp::from_rows(&[
            rows[0].0.clone(),
            rows[0].1.clone(),
            rows[1].0.clone(),
            rows[1].1.clone(),
        ]);
        let b2 = dot(&self.leaves[0].k, &self.leaves[0].m_back).unwrap();
        let b4 = dot(&self.leaves[1].k, &self.leaves[1].m_back).unwrap();
        let mut rhs = FieldVector::zero(4, self.p);
        rhs = FieldVector::new(vec![rhs.coord(0), b2, rhs.coord(2), b4]);
        (matrix, rhs)
    }

    /// Flat matrix entries in scan order (k2, m12, t2, k3, m13, t3), used as
    /// the dedup key of the census.
    fn matrix_key(&self) -> [u64; 12] {
        let l0 = &self.leaves[0];
        let l1 = &self.leaves[1];
        [
            l0.k.coord(0).value(),
            l0.k.coord(1).value(),
            l0.m_out.coord(0).value(),
            l0.m_out.coord(1).value(),
            l0.t.coord(0).value(),
            l0.t.coord(1).value(),
            l1.k.coord(0).value(),
            l1.k.coord(1).value(),
            l1.m_out.coord(0).value(),
            l1.m_out.coord(1).value(),
            l1.t.coord(0).value(),
            l1.t.coord(1).value(),
        ]
    }

    /// The target's LCD and one LCD per leaf, lifted onto `curve`; this is
    /// how the live experiment turns a field-level sample into protocol
    /// participants.
    pub fn build_lcds(&self, curve: &CurveParams) -> Result<(Lcd, Vec<Lcd>)> {
        let mut root_public = BTreeMap::new();
        let mut leaf_lcds = Vec::with_capacity(self.leaves.len());
        for (i, leaf) in self.leaves.iter().enumerate() {
            let node = (i + 2) as NodeId;
            root_public.insert(node, curve.lift_vector(&leaf.m_out)?);
            let mut public = BTreeMap::new();
            public.insert(1 as NodeId, curve.lift_vector(&leaf.m_back)?);
            leaf_lcds.push(Lcd {
                node,
                secret: SecretComponent {
                    k: leaf.k.clone(),
                    t: leaf.t.clone(),
                },
                public,
            });
        }
        let root = Lcd {
            node: 1,
            secret: SecretComponent {
                k: self.root_k.clone(),
                t: self.root_t.clone(),
            },
            public: root_public,
        };
        Ok((root, leaf_lcds))
    }
}

// -- fast 4x4 arithmetic over F_p on raw residues, for the big enumerations --

fn inv_mod(a: u64, p: u64) -> u64 {
    // p is prime and tiny here; Fermat is plenty.
    let mut acc = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    acc
}

fn eliminate4(m: &mut [u64; 16], p: u64) -> (usize, u64, usize) {
    // Returns (rank, product of pivots, swap count).
    let mut rank = 0usize;
    let mut pivot_product = 1u64;
    let mut swaps = 0usize;
    let mut row = 0usize;
    for col in 0..4 {
        let Some(found) = (row..4).find(|&r| m[r * 4 + col] % p != 0) else {
            continue;
        };
        if found != row {
            for c in 0..4 {
                m.swap(found * 4 + c, row * 4 + c);
            }
            swaps += 1;
        }
        let pivot = m[row * 4 + col] % p;
        pivot_product = pivot_product * pivot % p;
        let inv = inv_mod(pivot, p);
        for r in (row + 1)..4 {
            let factor = m[r * 4 + col] % p * inv % p;
            if factor != 0 {
                for c in col..4 {
                    m[r * 4 + c] = (m[r * 4 + c] + (p - factor) * m[row * 4 + c]) % p;
                }
            }
        }
        rank += 1;
        row += 1;
        if row == 4 {
            break;
        }
    }
    (rank, pivot_product, swaps)
}

fn det4(entries: &[u64; 16], p: u64) -> u64 {
    let mut m = *entries;
    let (rank, pivot_product, swaps) = eliminate4(&mut m, p);
    if rank < 4 {
        return 0;
    }
    if swaps % 2 == 0 {
        pivot_product
    } else {
        (p - pivot_product) % p
    }
}

fn rank4(entries: &[u64; 16], p: u64) -> usize {
    let mut m = *entries;
    eliminate4(&mut m, p).0
}

fn matrix_entries(key: &[u64; 12], p: u64) -> [u64; 16] {
    let neg = |v: u64| (p - v % p) % p;
    [
        key[0], key[1], neg(key[2]), neg(key[3]),
        0, 0, key[4], key[5],
        key[6], key[7], neg(key[8]), neg(key[9]),
        0, 0, key[10], key[11],
    ]
}

/// Monte Carlo estimate of the attack success probability over assignment
/// outcomes at field size `p`.
#[derive(Debug, Clone, Serialize)]
pub struct SpEstimate {
    pub p: u64,
    pub trials: u64,
    pub invertible: u64,
    pub estimate: f64,
    pub ci99_low: f64,
    pub ci99_high: f64,
}

/// Repeats the star assignment `trials` times, counts invertible systems,
/// and wraps the rate in a 99% confidence interval. Each trial runs on its
/// own seeded stream, so the result is independent of iteration order.
pub fn estimate_sp(p: u64, trials: u64, seed: u64) -> Result<SpEstimate> {
    if !crate::algebra::is_prime(p) {
        return Err(Error::InvalidParameter(format!("{p} is not prime")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial".into()));
    }
    let mut invertible = 0u64;
    for trial in 0..trials {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let sample = sample_star(p, 2, &mut rng)?;
        let entries = matrix_entries(&sample.matrix_key(), p);
        if det4(&entries, p) != 0 {
            invertible += 1;
        }
    }
    let estimate = invertible as f64 / trials as f64;
    let half = Z_99 * (estimate * (1.0 - estimate) / trials as f64).sqrt();
    Ok(SpEstimate {
        p,
        trials,
        invertible,
        estimate,
        ci99_low: (estimate - half).max(0.0),
        ci99_high: (estimate + half).min(1.0),
    })
}

/// Exact enumeration of the whole assignment support at tiny `p`: the
/// operational success fraction, the rank distribution, and the census of
/// distinct admissible / invertible matrices.
#[derive(Debug, Clone, Serialize)]
pub struct ExactCensus {
    pub p: u64,
    pub total_outcomes: u64,
    pub invertible_outcomes: u64,
    /// invertible_outcomes / total_outcomes.
    pub operational_fraction: f64,
    pub rank2_outcomes: u64,
    pub rank3_outcomes: u64,
    pub rank4_outcomes: u64,
    /// Distinct matrices reachable by some assignment.
    pub distinct_admissible: u64,
    /// Distinct reachable matrices with nonzero determinant.
    pub distinct_invertible: u64,
    /// The closed form `(p^2 - p)^4 (p^2 - 1)^2` quoted for the invertible
    /// census, kept for side-by-side comparison.
    pub formula_invertible: u64,
    /// `formula_invertible / p^12`, the quoted lower bound on the success
    /// probability.
    pub formula_lower_bound: f64,
}

struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(bits: usize) -> Self {
        BitSet {
            words: vec![0; bits.div_ceil(64)],
        }
    }

    fn insert(&mut self, idx: usize) {
        self.words[idx / 64] |= 1 << (idx % 64);
    }

    fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// Full enumeration of the assignment procedure's support on the two-leaf
/// star: about 6.7 million outcomes at `p = 3`, a few thousand at `p = 2`.
pub fn exact_sp_small(p: u64) -> Result<ExactCensus> {
    if !(p == 2 || p == 3) {
        return Err(Error::InvalidParameter(format!(
            "exact enumeration supports p in {{2, 3}}, not {p}"
        )));
    }
    let vectors: Vec<(u64, u64)> = (0..p)
        .flat_map(|a| (0..p).map(move |b| (a, b)))
        .collect();
    let dot2 = |u: (u64, u64), v: (u64, u64)| (u.0 * v.0 + u.1 * v.1) % p;

    // Side tuples (k_leaf, m_out, t_leaf) with multiplicity, per (k1, t1):
    // every choice of m_back contributes one outcome.
    let side_tuples = |k1: (u64, u64), t1: (u64, u64)| -> Vec<[u64; 6]> {
        let mut sides = Vec::new();
        for &m_out in &vectors {
            let c = dot2(k1, m_out);
            if c == 0 {
                continue;
            }
            for &k in &vectors {
                if dot2(k, t1) != c {
                    continue;
                }
                for &m_back in &vectors {
                    let c2 = dot2(k, m_back);
                    if c2 == 0 {
                        continue;
                    }
                    for &t in &vectors {
                        if dot2(k1, t) != c2 {
                            continue;
                        }
                        sides.push([k.0, k.1, m_out.0, m_out.1, t.0, t.1]);
                    }
                }
            }
        }
        sides
    };

    let key_space = (p as usize).pow(12);
    let mut admissible = BitSet::new(key_space);
    let mut invertible_set = BitSet::new(key_space);
    let key_index = |key: &[u64; 12]| -> usize {
        key.iter().fold(0usize, |acc, &v| acc * p as usize + v as usize)
    };

    let mut total = 0u64;
    let mut invertible = 0u64;
    let mut ranks = [0u64; 3]; // rank 2, 3, 4
    for &k1 in &vectors {
        if k1 == (0, 0) {
            continue;
        }
        for &t1 in &vectors {
            if t1 == (0, 0) {
                continue;
            }
            let sides = side_tuples(k1, t1);
            for s2 in &sides {
                for s3 in &sides {
                    let key = [
                        s2[0], s2[1], s2[2], s2[3], s2[4], s2[5],
                        s3[0], s3[1], s3[2], s3[3], s3[4], s3[5],
                    ];
                    let entries = matrix_entries(&key, p);
                    total += 1;
                    let idx = key_index(&key);
                    admissible.insert(idx);
                    let det = det4(&entries, p);
                    if det != 0 {
                        invertible += 1;
                        invertible_set.insert(idx);
                        ranks[2] += 1;
                    } else {
                        ranks[rank4(&entries, p) - 2] += 1;
                    }
                }
            }
        }
    }

    let formula = (p * p - p).pow(4) * (p * p - 1).pow(2);
    Ok(ExactCensus {
        p,
        total_outcomes: total,
        invertible_outcomes: invertible,
        operational_fraction: invertible as f64 / total as f64,
        rank2_outcomes: ranks[0],
        rank3_outcomes: ranks[1],
        rank4_outcomes: ranks[2],
        distinct_admissible: admissible.count(),
        distinct_invertible: invertible_set.count(),
        formula_invertible: formula,
        formula_lower_bound: formula as f64 / (p as f64).powi(12),
    })
}

/// Live impersonation measurement for the `p^2`-ambiguous case.
#[derive(Debug, Clone, Serialize)]
pub struct ImpersonationStats {
    pub p: u64,
    pub honest_verifiers: u32,
    /// Star assignments drawn before enough ambiguous instances appeared.
    pub provisionings: u64,
    pub unique_instances: u64,
    pub rank3_instances: u64,
    /// Instances with a p^2-element candidate space (rank 2).
    pub ambiguous_trials: u64,
    pub live_passes: u64,
    pub pass_rate: f64,
    /// The 1/p^2 reference rate.
    pub expected_rate: f64,
    /// Binomial standard deviation of the pass rate at `expected_rate`.
    pub sigma: f64,
}

/// Draws star assignments until `target_trials` rank-2 instances have been
/// seen; for each, a uniform candidate from the solution space impersonates
/// the root through real mutual sessions against every honest verifier leaf.
///
/// Compromised-edge sessions are satisfied by every candidate in the space,
/// so verification must go through the honest leaves; a handful of them is
/// enough to push the accidental pass rate of wrong candidates below noise,
/// leaving the exact-secret rate `1/p^2`.
pub fn impersonation_experiment(
    curve: &CurveParams,
    honest_verifiers: u32,
    target_trials: u64,
    seed: u64,
) -> Result<ImpersonationStats> {
    if honest_verifiers == 0 || target_trials == 0 {
        return Err(Error::InvalidParameter(
            "need at least one verifier and one trial".into(),
        ));
    }
    let p = curve.subgroup_order();
    let leaves = 2 + honest_verifiers as usize;
    let mut provisionings = 0u64;
    let mut unique_instances = 0u64;
    let mut rank3_instances = 0u64;
    let mut ambiguous_trials = 0u64;
    let mut live_passes = 0u64;
    let mut stream = 0u64;
    while ambiguous_trials < target_trials {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        stream += 1;
        provisionings += 1;
        let sample = sample_star(p, leaves, &mut rng)?;
        let (matrix, rhs) = sample.attack_system();
        match matrix.solve(&rhs)? {
            SolveOutcome::Unique(_) => {
                unique_instances += 1;
            }
            SolveOutcome::Affine { particular, basis } => {
                if basis.len() != 2 {
                    rank3_instances += 1;
                    continue;
                }
                ambiguous_trials += 1;
                let outcome = crate::attacklab::recovery::RecoveryOutcome::Ambiguous {
                    particular,
                    basis,
                    solution_count: (p as u128).pow(2),
                };
                let candidate =
                    crate::attacklab::recovery::sample_candidate(&outcome, &mut rng);
                let (target_lcd, leaf_lcds) = sample.build_lcds(curve)?;
                let verifier_refs: Vec<&Lcd> = leaf_lcds[2..].iter().collect();
                if live_authenticate(curve, &target_lcd, &candidate, &verifier_refs, &mut rng) {
                    live_passes += 1;
                }
            }
        }
    }
    let expected_rate = 1.0 / (p as f64 * p as f64);
    Ok(ImpersonationStats {
        p,
        honest_verifiers,
        provisionings,
        unique_instances,
        rank3_instances,
        ambiguous_trials,
        live_passes,
        pass_rate: live_passes as f64 / ambiguous_trials as f64,
        expected_rate,
        sigma: (expected_rate * (1.0 - expected_rate) / target_trials as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn star_samples_satisfy_the_assignment_constraints() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for p in [3u64, 11, 1009] {
            for _ in 0..100 {
                let s = sample_star(p, 3, &mut rng).unwrap();
                for leaf in &s.leaves {
                    let c = dot(&s.root_k, &leaf.m_out).unwrap();
                    assert!(!c.is_zero());
                    assert_eq!(dot(&leaf.k, &s.root_t).unwrap(), c);
                    let c2 = dot(&leaf.k, &leaf.m_back).unwrap();
                    assert!(!c2.is_zero());
                    assert_eq!(dot(&s.root_k, &leaf.t).unwrap(), c2);
                }
            }
        }
    }

    #[test]
    fn truth_solves_the_field_level_system() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..200 {
            let s = sample_star(11, 2, &mut rng).unwrap();
            let (matrix, rhs) = s.attack_system();
            let truth = FieldVector::new(vec![
                s.root_t.coord(0),
                s.root_t.coord(1),
                s.root_k.coord(0),
                s.root_k.coord(1),
            ]);
            assert_eq!(matrix.mul_vector(&truth).unwrap(), rhs);
            // The raw det agrees with the checked matrix type.
            let entries = matrix_entries(&s.matrix_key(), 11);
            assert_eq!(det4(&entries, 11), matrix.det().value());
            assert_eq!(rank4(&entries, 11), matrix.rank());
        }
    }

    #[test]
    fn estimates_are_deterministic_and_reasonable() {
        let a = estimate_sp(11, 5000, 9).unwrap();
        let b = estimate_sp(11, 5000, 9).unwrap();
        assert_eq!(a.invertible, b.invertible);
        assert!(a.ci99_low <= a.estimate && a.estimate <= a.ci99_high);
        // Singular instances occur at rate about 2/p; the estimate must sit
        // well inside (0.5, 1) at p = 11.
        assert!(a.estimate > 0.5 && a.estimate < 1.0);
        assert!(estimate_sp(10, 10, 0).is_err());
        assert!(estimate_sp(11, 0, 0).is_err());
    }

    #[test]
    fn estimates_grow_with_the_field_size() {
        // Monotone nondecreasing across the fixture sizes, with overlapping
        // confidence intervals permitted.
        let estimates: Vec<SpEstimate> = [3u64, 11, 101, 1009]
            .iter()
            .map(|&p| estimate_sp(p, 20_000, 11).unwrap())
            .collect();
        for pair in estimates.windows(2) {
            assert!(
                pair[1].estimate >= pair[0].estimate || pair[1].ci99_high >= pair[0].ci99_low,
                "estimates fell from {} to {}",
                pair[0].p,
                pair[1].p
            );
        }
    }

    #[test]
    fn tiny_census_at_p2_is_fully_consistent() {
        let census = exact_sp_small(2).unwrap();
        assert_eq!(census.total_outcomes, 2304);
        assert_eq!(
            census.rank2_outcomes + census.rank3_outcomes + census.rank4_outcomes,
            census.total_outcomes
        );
        assert_eq!(census.invertible_outcomes, census.rank4_outcomes);
        assert!(census.distinct_invertible <= census.distinct_admissible);
        assert!(census.operational_fraction > census.formula_lower_bound);
        assert!(exact_sp_small(5).is_err());
    }

    #[test]
    fn census_monte_carlo_cross_check_at_p2() {
        let census = exact_sp_small(2).unwrap();
        let mc = estimate_sp(2, 20_000, 13).unwrap();
        let sigma = (census.operational_fraction * (1.0 - census.operational_fraction)
            / mc.trials as f64)
            .sqrt();
        assert!(
            (mc.estimate - census.operational_fraction).abs() <= 3.0 * sigma,
            "Monte Carlo {} vs exact {}",
            mc.estimate,
            census.operational_fraction
        );
    }

    #[test]
    fn impersonation_pass_rate_tracks_the_exact_match_rate() {
        // Small smoke run at p = 3 with four honest verifiers; the full-size
        // measurement lives in the acceptance suite.
        let curve = fixtures::curve_p3();
        let stats = impersonation_experiment(&curve, 4, 300, 17).unwrap();
        assert_eq!(stats.ambiguous_trials, 300);
        assert!(stats.pass_rate < 0.25, "rate {} is implausibly high", stats.pass_rate);
        assert!(stats.rank3_instances > 0, "rank-3 cases should dominate ambiguity");
    }
}
