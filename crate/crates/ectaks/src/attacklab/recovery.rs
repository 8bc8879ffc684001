//! Secret recovery from two compromised neighbors: rebuild the pre-image
//! vectors with the discrete-log oracle, assemble the linear system, and
//! solve for the target's secret component.
//!
//! With compromised neighbors `2, 3` of target `1`, the unknowns are
//! `x = (t_1, k_1)` and the system rows read
//!
//! ```text
//! ( k_2 | -m_(1-2) ) x = 0          ( 0 0 | t_2 ) x = k_2 . m_(2-1)
//! ( k_3 | -m_(1-3) ) x = 0          ( 0 0 | t_3 ) x = k_3 . m_(3-1)
//! ```
//!
//! An invertible matrix pins the secret exactly; otherwise the attacker
//! faces an affine space of candidates and must gamble.

use serde::Serialize;

use crate::algebra::{ecdl_bruteforce, CurveParams, FieldElement, FieldVector};
use crate::attacklab::linalg::{MatFp, SolveOutcome};
use crate::authority::{CaState, Lcd, SecretComponent};
use crate::error::{Error, Result};
use crate::session;
use crate::topology::NodeId;

/// The assembled system `Ax = b` for one target. Two rows per compromised
/// neighbor; four unknowns.
#[derive(Debug, Clone)]
pub struct AttackSystem {
    pub target: NodeId,
    pub compromised: Vec<NodeId>,
    pub matrix: MatFp,
    pub rhs: FieldVector,
}

/// What solving the system yields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecoveryOutcome {
    /// The unique solution, repackaged as the recovered secret component.
    Unique(SecretComponent),
    /// The full affine candidate space: `p^basis.len()` solutions.
    Ambiguous {
        particular: FieldVector,
        basis: Vec<FieldVector>,
        solution_count: u128,
    },
}

impl AttackSystem {
    /// Reconstructs the system from captured node data and the public
    /// directory entry of the target, calling the discrete-log oracle once
    /// per published point and once per right-hand side.
    pub fn build(
        curve: &CurveParams,
        target: NodeId,
        target_public: &std::collections::BTreeMap<NodeId, crate::algebra::PointVector>,
        compromised: &[&Lcd],
    ) -> Result<AttackSystem> {
        if compromised.is_empty() {
            return Err(Error::PrerequisiteMissing(
                "at least one compromised neighbor is required".into(),
            ));
        }
        let p = curve.subgroup_order();
        let base = curve.base_point();
        let mut rows: Vec<FieldVector> = Vec::with_capacity(2 * compromised.len());
        let mut rhs: Vec<FieldElement> = Vec::with_capacity(2 * compromised.len());
        for lcd in compromised {
            let j = lcd.node;
            let published = target_public.get(&j).ok_or_else(|| {
                Error::PrerequisiteMissing(format!(
                    "target publishes no topology vector toward node {j}"
                ))
            })?;
            // Oracle: strip G off the published pair to recover m_(target-j).
            let m_tj = FieldVector::from_values(
                &[
                    ecdl_bruteforce(curve, &base, &published.point(0), p)?,
                    ecdl_bruteforce(curve, &base, &published.point(1), p)?,
                ],
                p,
            );
            // Oracle: the right-hand side k_j . m_(j-target) is the discrete
            // log of the point the captured node can already compute.
            let reverse = lcd.public.get(&target).ok_or_else(|| {
                Error::PrerequisiteMissing(format!(
                    "captured node {j} has no arrow toward the target"
                ))
            })?;
            let b_point = curve.mixed_dot(&lcd.secret.k, reverse)?;
            let b_j = ecdl_bruteforce(curve, &base, &b_point, p)?;

            rows.push(FieldVector::new(vec![
                lcd.secret.k.coord(0),
                lcd.secret.k.coord(1),
                m_tj.coord(0).neg(),
                m_tj.coord(1).neg(),
            ]));
            rhs.push(FieldElement::zero(p));
            rows.push(FieldVector::from_values(
                &[0, 0, lcd.secret.t.coord(0).value(), lcd.secret.t.coord(1).value()],
                p,
            ));
            rhs.push(FieldElement::new(b_j, p));
        }
        Ok(AttackSystem {
            target,
            compromised: compromised.iter().map(|l| l.node).collect(),
            matrix: MatFp::from_rows(&rows),
            rhs: FieldVector::new(rhs),
        })
    }

    pub fn rank(&self) -> usize {
        self.matrix.rank()
    }

    /// Determinant, defined only for the square two-neighbor system.
    pub fn det(&self) -> Option<FieldElement> {
        (self.matrix.rows() == self.matrix.cols()).then(|| self.matrix.det())
    }

    /// Solves the system. The true secret always satisfies it, so an
    /// inconsistent system can only mean corrupted inputs.
    pub fn solve(&self) -> Result<RecoveryOutcome> {
        let p = self.matrix.modulus();
        match self.matrix.solve(&self.rhs)? {
            SolveOutcome::Unique(x) => Ok(RecoveryOutcome::Unique(split_candidate(&x))),
            SolveOutcome::Affine { particular, basis } => {
                let solution_count = (p as u128).pow(basis.len() as u32);
                Ok(RecoveryOutcome::Ambiguous {
                    particular,
                    basis,
                    solution_count,
                })
            }
        }
    }
}

/// Unknown layout is `(t_1, k_1)`; fold a length-4 solution back into a
/// secret component.
pub fn split_candidate(x: &FieldVector) -> SecretComponent {
    assert_eq!(x.len(), 4);
    SecretComponent {
        t: FieldVector::new(vec![x.coord(0), x.coord(1)]),
        k: FieldVector::new(vec![x.coord(2), x.coord(3)]),
    }
}

fn join_candidate(secret: &SecretComponent) -> FieldVector {
    FieldVector::new(vec![
        secret.t.coord(0),
        secret.t.coord(1),
        secret.k.coord(0),
        secret.k.coord(1),
    ])
}

/// Draws a uniform element of the outcome's solution space.
pub fn sample_candidate<R: rand::Rng + ?Sized>(
    outcome: &RecoveryOutcome,
    rng: &mut R,
) -> SecretComponent {
    match outcome {
        RecoveryOutcome::Unique(secret) => secret.clone(),
        RecoveryOutcome::Ambiguous {
            particular, basis, ..
        } => {
            let p = particular.modulus();
            let mut x = particular.clone();
            for v in basis {
                let c = FieldElement::new(rng.random_range(0..p), p);
                x = x.add(&v.scale(c));
            }
            split_candidate(&x)
        }
    }
}

/// Serializable summary of one recovery run.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub target: NodeId,
    pub compromised: Vec<NodeId>,
    pub p: u64,
    pub rank: usize,
    pub det: Option<u64>,
    pub outcome: String,
    pub solution_count: u64,
    /// Unique case: recovered secret (t, k) coordinate values.
    pub recovered: Option<[u64; 4]>,
    /// Unique case: exact equality against the CA's ground truth.
    pub exact_match: Option<bool>,
    /// Ambiguous case: the true secret lies in the candidate space.
    pub truth_in_space: Option<bool>,
    /// Ambiguous case: one uniform candidate survived live authentication
    /// against every honest (non-compromised) neighbor of the target.
    pub sampled_candidate_authenticates: Option<bool>,
    pub honest_verifiers: Vec<NodeId>,
}

/// Runs the full attack against a provisioned state, then verifies the
/// result against ground truth.
///
/// For unique outcomes the recovered secret is compared with the CA's. For
/// ambiguous ones the report confirms the truth sits in the candidate space
/// and plays one uniformly drawn candidate through real mutual sessions with
/// every honest neighbor of the target (both directions must succeed). A
/// wrong candidate survives that gauntlet with probability about `1/p^2`
/// when the space has `p^2` elements.
pub fn recover_secret<R: rand::Rng + ?Sized>(
    state: &CaState,
    target: NodeId,
    compromised: &[NodeId],
    rng: &mut R,
) -> Result<(RecoveryOutcome, RecoveryReport)> {
    let curve = state.curve();
    for &j in compromised {
        if !state.topology().has_arrow(target, j) {
            return Err(Error::PrerequisiteMissing(format!(
                "node {j} is not connected to the target {target}"
            )));
        }
    }
    let target_lcd = state.export_lcd(target)?;
    let captured: Vec<&Lcd> = compromised
        .iter()
        .map(|&j| state.export_lcd(j))
        .collect::<Result<Vec<_>>>()?;
    let system = AttackSystem::build(curve, target, &target_lcd.public, &captured)?;
    let outcome = system.solve()?;

    let truth = &target_lcd.secret;
    let honest: Vec<NodeId> = state
        .topology()
        .neighbors(target)
        .into_iter()
        .filter(|j| !compromised.contains(j))
        .collect();

    let mut report = RecoveryReport {
        target,
        compromised: compromised.to_vec(),
        p: curve.subgroup_order(),
        rank: system.rank(),
        det: system.det().map(|d| d.value()),
        outcome: String::new(),
        solution_count: 0,
        recovered: None,
        exact_match: None,
        truth_in_space: None,
        sampled_candidate_authenticates: None,
        honest_verifiers: honest.clone(),
    };
    match &outcome {
        RecoveryOutcome::Unique(secret) => {
            report.outcome = "unique".into();
            report.solution_count = 1;
            report.recovered = Some([
                secret.t.coord(0).value(),
                secret.t.coord(1).value(),
                secret.k.coord(0).value(),
                secret.k.coord(1).value(),
            ]);
            report.exact_match = Some(secret == truth);
        }
        RecoveryOutcome::Ambiguous { solution_count, .. } => {
            report.outcome = "ambiguous".into();
            report.solution_count = *solution_count as u64;
            report.truth_in_space = Some(
                system
                    .matrix
                    .mul_vector(&join_candidate(truth))
                    .map(|image| image == system.rhs)?,
            );
            if !honest.is_empty() {
                let candidate = sample_candidate(&outcome, rng);
                let verifier_lcds: Vec<&Lcd> = honest
                    .iter()
                    .map(|&j| state.export_lcd(j))
                    .collect::<Result<Vec<_>>>()?;
                report.sampled_candidate_authenticates = Some(live_authenticate(
                    curve,
                    target_lcd,
                    &candidate,
                    &verifier_lcds,
                    rng,
                ));
            }
        }
    }
    Ok((outcome, report))
}

/// Plays a candidate secret through the real protocol: for every verifier
/// the impersonator must both seal a message the verifier accepts and open a
/// message the verifier seals toward the target. Any failure is a bust.
pub fn live_authenticate<R: rand::Rng + ?Sized>(
    curve: &CurveParams,
    target_lcd: &Lcd,
    candidate: &SecretComponent,
    verifiers: &[&Lcd],
    rng: &mut R,
) -> bool {
    if candidate.k.is_zero() || candidate.t.is_zero() {
        return false;
    }
    let impostor = Lcd {
        node: target_lcd.node,
        secret: candidate.clone(),
        public: target_lcd.public.clone(),
    };
    for verifier in verifiers {
        let outbound = session::seal(curve, &impostor, verifier.node, b"probe", rng)
            .and_then(|wire| session::open(curve, verifier, &wire));
        if outbound.is_err() {
            return false;
        }
        let inbound = session::seal(curve, verifier, impostor.node, b"challenge", rng)
            .and_then(|wire| session::open(curve, &impostor, &wire));
        if inbound.is_err() {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::dot;
    use crate::fixtures;
    use crate::topology::Ant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    /// Two-neighbor star around node 1 on the p = 11 fixture.
    fn star_state(seed: u64) -> CaState {
        let g = Ant::from_edges(3, [(1, 2), (1, 3)]).unwrap();
        CaState::provision(g, fixtures::curve_p11(), None, seed).unwrap()
    }

    #[test]
    fn system_shape_matches_the_construction() {
        let state = star_state(1);
        let lcd1 = state.export_lcd(1).unwrap();
        let captured = [state.export_lcd(2).unwrap(), state.export_lcd(3).unwrap()];
        let system = AttackSystem::build(state.curve(), 1, &lcd1.public, &captured).unwrap();
        assert_eq!(system.matrix.rows(), 4);
        assert_eq!(system.matrix.cols(), 4);
        // Rows 2 and 4 have a zero left block.
        for r in [1usize, 3] {
            assert!(system.matrix.get(r, 0).is_zero());
            assert!(system.matrix.get(r, 1).is_zero());
        }
        // Right-hand side entries are the oracle-recovered products.
        let b2 = dot(&captured[0].secret.k, state.ca_secret(2, 1).unwrap()).unwrap();
        let b4 = dot(&captured[1].secret.k, state.ca_secret(3, 1).unwrap()).unwrap();
        assert_eq!(system.rhs.coord(1), b2);
        assert_eq!(system.rhs.coord(3), b4);
        assert!(system.rhs.coord(0).is_zero());
        assert!(system.rhs.coord(2).is_zero());
    }

    #[test]
    fn oracle_reconstruction_matches_ca_ground_truth() {
        let state = star_state(2);
        let lcd1 = state.export_lcd(1).unwrap();
        let captured = [state.export_lcd(2).unwrap(), state.export_lcd(3).unwrap()];
        let system = AttackSystem::build(state.curve(), 1, &lcd1.public, &captured).unwrap();
        // Columns 2,3 of row 0 hold -m_(1-2); compare against the CA secret.
        let m12 = state.ca_secret(1, 2).unwrap();
        assert_eq!(system.matrix.get(0, 2), m12.coord(0).neg());
        assert_eq!(system.matrix.get(0, 3), m12.coord(1).neg());
    }

    #[test]
    fn true_secret_always_solves_the_system() {
        for seed in 0..50 {
            let state = star_state(seed);
            let lcd1 = state.export_lcd(1).unwrap();
            let captured = [state.export_lcd(2).unwrap(), state.export_lcd(3).unwrap()];
            let system = AttackSystem::build(state.curve(), 1, &lcd1.public, &captured).unwrap();
            let truth = join_candidate(&lcd1.secret);
            assert_eq!(system.matrix.mul_vector(&truth).unwrap(), system.rhs);
        }
    }

    #[test]
    fn unique_outcomes_recover_exactly_and_ambiguous_spaces_hold_the_truth() {
        let mut uniques = 0;
        let mut ambiguous = 0;
        let mut r = rng(77);
        for seed in 0..200 {
            let state = star_state(seed);
            let (outcome, report) = recover_secret(&state, 1, &[2, 3], &mut r).unwrap();
            match outcome {
                RecoveryOutcome::Unique(_) => {
                    uniques += 1;
                    assert_eq!(report.exact_match, Some(true));
                    assert_eq!(report.rank, 4);
                }
                RecoveryOutcome::Ambiguous { solution_count, .. } => {
                    ambiguous += 1;
                    assert_eq!(report.truth_in_space, Some(true));
                    assert!(report.rank == 2 || report.rank == 3);
                    let expected = (11u128).pow(4 - report.rank as u32);
                    assert_eq!(solution_count, expected);
                }
            }
        }
        assert!(uniques > 0, "determinant was always zero across 200 seeds");
        assert!(ambiguous > 0, "no ambiguous instance in 200 seeds at p = 11");
    }

    #[test]
    fn single_compromised_neighbor_is_never_enough() {
        let mut r = rng(78);
        for seed in 0..30 {
            let state = star_state(seed);
            let (outcome, report) = recover_secret(&state, 1, &[2], &mut r).unwrap();
            assert!(matches!(outcome, RecoveryOutcome::Ambiguous { .. }));
            assert_eq!(report.rank, 2);
            assert_eq!(report.solution_count, 11 * 11);
            assert_eq!(report.truth_in_space, Some(true));
        }
    }

    #[test]
    fn disconnected_compromised_node_is_rejected() {
        let g = Ant::from_edges(4, [(1, 2), (1, 3), (3, 4)]).unwrap();
        let state = CaState::provision(g, fixtures::curve_p11(), None, 5).unwrap();
        let err = recover_secret(&state, 1, &[2, 4], &mut rng(0));
        assert!(matches!(err, Err(Error::PrerequisiteMissing(_))));
    }

    #[test]
    fn oracle_guard_propagates() {
        // A state whose subgroup order exceeds the guard cannot be attacked;
        // the refusal must surface, not a silent grind. Fake it by calling
        // the oracle directly, since no fixture curve is that large.
        let curve = fixtures::curve_p11();
        let err = ecdl_bruteforce(
            &curve,
            &curve.base_point(),
            &curve.base_point(),
            (1 << 24) + 1,
        );
        assert!(matches!(err, Err(Error::OracleRefused { .. })));
    }

    #[test]
    fn true_secret_passes_live_authentication() {
        let g = Ant::from_edges(4, [(1, 2), (1, 3), (1, 4)]).unwrap();
        let state = CaState::provision(g, fixtures::curve_p11(), None, 9).unwrap();
        let lcd1 = state.export_lcd(1).unwrap();
        let verifier = state.export_lcd(4).unwrap();
        let mut r = rng(10);
        assert!(live_authenticate(
            state.curve(),
            lcd1,
            &lcd1.secret,
            &[verifier],
            &mut r
        ));
        // A random wrong secret almost surely fails.
        let wrong = SecretComponent {
            k: crate::algebra::sample_nonzero_vector(&mut r, 2, 11),
            t: crate::algebra::sample_nonzero_vector(&mut r, 2, 11),
        };
        if wrong != lcd1.secret {
            assert!(!live_authenticate(state.curve(), lcd1, &wrong, &[verifier], &mut r));
        }
    }
}
