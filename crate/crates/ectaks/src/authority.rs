//! The certification authority: sequential parameter assignment over a
//! validated topology, cluster provisioning, and the node lifecycle.
//!
//! Per node the CA produces two secret vectors, the local key component `k`
//! and the transmitted key component `t`, plus one published curve-point pair
//! per outbound arrow. The defining constraint for every arrow `(i, j)` is
//!
//! ```text
//! k_i . m_(i-j) = k_j . t_i  != 0
//! ```
//!
//! where only the lift `m_(i-j) G` ever leaves the CA. The field pre-images
//! stay in [`CaState::ca_secrets`], which must never be exported to nodes.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::algebra::{
    dot, sample_nonzero_vector, sample_vector_where, solve_dot_constraint, CurveParams,
    FieldElement, FieldVector, PointVector,
};
use crate::error::{Error, Result};
use crate::topology::{plan_assignment, Ant, EdgeCase, NodeId};

/// Vector length used by provisioning. The algebra layer is length-agnostic;
/// the scheme as implemented is pinned to two dimensions.
pub const VECTOR_DIM: usize = 2;

/// Attempt bound for every rejection-sampled choice; the per-attempt failure
/// probability is at most 1/p, so hitting this bound means something is wrong.
const MAX_SAMPLE_ATTEMPTS: u32 = 64;

/// Attempt bound for whole-plan re-provisioning when an existing-case edge
/// forces a zero session key and earlier free choices must be re-drawn.
const MAX_PROVISION_ATTEMPTS: u64 = 64;

/// A node's secret component: local key component `k` and transmitted key
/// component `t`, both nonzero vectors over `F_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretComponent {
    pub k: FieldVector,
    pub t: FieldVector,
}

/// A node's public component: one published topology vector per outbound
/// arrow, keyed by the neighbor id.
pub type PublicComponent = BTreeMap<NodeId, PointVector>;

/// Local configuration data preloaded into one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcd {
    pub node: NodeId,
    pub secret: SecretComponent,
    pub public: PublicComponent,
}

/// A point-to-multipoint group: every arrow from the master to a member
/// carries the same nonzero product `gamma`, so one broadcast key serves all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub master: NodeId,
    pub members: BTreeSet<NodeId>,
    pub gamma: FieldElement,
}

/// Everything the CA knows: the topology, the curve, all node LCDs, the
/// private pre-image vectors per arrow, cluster records, and replacement
/// counters. Only the LCDs and the lifted public directory may leave.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaState {
    topology: Ant,
    curve: CurveParams,
    lcds: BTreeMap<NodeId, Lcd>,
    ca_secrets: BTreeMap<(NodeId, NodeId), FieldVector>,
    clusters: BTreeMap<NodeId, Cluster>,
    replacements: BTreeMap<NodeId, u32>,
}

impl CaState {
    /// Empty state over a validated topology; fails unless `p > N`.
    pub fn new(topology: Ant, curve: CurveParams) -> Result<Self> {
        check_field_vs_nodes(&curve, topology.node_count())?;
        Ok(CaState {
            topology,
            curve,
            lcds: BTreeMap::new(),
            ca_secrets: BTreeMap::new(),
            clusters: BTreeMap::new(),
            replacements: BTreeMap::new(),
        })
    }

    pub fn topology(&self) -> &Ant {
        &self.topology
    }

    pub fn curve(&self) -> &CurveParams {
        &self.curve
    }

    pub fn lcds(&self) -> &BTreeMap<NodeId, Lcd> {
        &self.lcds
    }

    pub fn clusters(&self) -> &BTreeMap<NodeId, Cluster> {
        &self.clusters
    }

    pub fn replacement_count(&self, node: NodeId) -> u32 {
        self.replacements.get(&node).copied().unwrap_or(0)
    }

    pub fn replacements_map(&self) -> &BTreeMap<NodeId, u32> {
        &self.replacements
    }

    /// Reassembles a state from its serialized parts; used by the state-file
    /// loader, which runs the invariant replay right after.
    pub(crate) fn from_parts(
        topology: Ant,
        curve: CurveParams,
        lcds: BTreeMap<NodeId, Lcd>,
        ca_secrets: BTreeMap<(NodeId, NodeId), FieldVector>,
        clusters: BTreeMap<NodeId, Cluster>,
        replacements: BTreeMap<NodeId, u32>,
    ) -> Result<Self> {
        check_field_vs_nodes(&curve, topology.node_count())?;
        Ok(CaState {
            topology,
            curve,
            lcds,
            ca_secrets,
            clusters,
            replacements,
        })
    }

    /// CA-private pre-image vector for an arrow. Exposed for the attack lab's
    /// ground-truth replay and the sensitive state file, nothing else.
    pub fn ca_secret(&self, tail: NodeId, head: NodeId) -> Option<&FieldVector> {
        self.ca_secrets.get(&(tail, head))
    }

    pub fn ca_secrets(&self) -> &BTreeMap<(NodeId, NodeId), FieldVector> {
        &self.ca_secrets
    }

    fn secret(&self, i: NodeId) -> Option<&SecretComponent> {
        self.lcds.get(&i).map(|lcd| &lcd.secret)
    }

    fn require_secret(&self, i: NodeId) -> Result<&SecretComponent> {
        self.secret(i)
            .ok_or_else(|| Error::PrerequisiteMissing(format!("node {i} has no secret component")))
    }

    /// Ratio of the scheme field size to the node count, reported alongside
    /// provisioning output. Only `p > N` is enforced.
    pub fn field_to_node_ratio(&self) -> f64 {
        self.curve.subgroup_order() as f64 / self.topology.node_count() as f64
    }

    /// Draws the root secrets `k_i, t_i` uniformly from the nonzero vectors.
    pub fn init_root<R: Rng + ?Sized>(&mut self, i: NodeId, rng: &mut R) -> Result<()> {
        self.topology.check_node(i)?;
        if self.lcds.contains_key(&i) {
            return Err(Error::AlreadyProvisioned(i));
        }
        let p = self.curve.subgroup_order();
        let secret = SecretComponent {
            k: sample_nonzero_vector(rng, VECTOR_DIM, p),
            t: sample_nonzero_vector(rng, VECTOR_DIM, p),
        };
        self.lcds.insert(
            i,
            Lcd {
                node: i,
                secret,
                public: BTreeMap::new(),
            },
        );
        Ok(())
    }

    /// Stores the pre-image for arrow `(tail, head)` and publishes its lift.
    fn publish_arrow(&mut self, tail: NodeId, head: NodeId, m: FieldVector) -> Result<()> {
        let lifted = self.curve.lift_vector(&m)?;
        debug_assert!(!lifted.is_all_infinity());
        self.ca_secrets.insert((tail, head), m);
        self.lcds
            .get_mut(&tail)
            .expect("tail is provisioned before publishing")
            .public
            .insert(head, lifted);
        Ok(())
    }

    /// Keys both arrows of edge `{i, j}` when `j` has no secret yet.
    ///
    /// `m_(i-j)` is drawn with a nonzero product against `k_i`; `k_j` comes
    /// from the solution line of the arrow constraint; then the reverse arrow
    /// repeats the pattern and pins `t_j`.
    pub fn assign_fresh_edge<R: Rng + ?Sized>(
        &mut self,
        i: NodeId,
        j: NodeId,
        rng: &mut R,
    ) -> Result<()> {
        self.check_unprovisioned_arrow(i, j)?;
        if self.secret(j).is_some() {
            return Err(Error::AlreadyProvisioned(j));
        }
        let p = self.curve.subgroup_order();
        let (k_i, t_i) = {
            let s = self.require_secret(i)?;
            (s.k.clone(), s.t.clone())
        };

        let m_ij = sample_vector_where(rng, VECTOR_DIM, p, MAX_SAMPLE_ATTEMPTS, |m| {
            !dot(&k_i, m).expect("same field").is_zero()
        })?;
        let product_ij = dot(&k_i, &m_ij)?;

        // k_j from the line  k_j . t_i = k_i . m_(i-j);  the nonzero product
        // keeps the line away from the origin, so k_j != 0 for free.
        let k_j = solve_dot_constraint(&t_i, product_ij, rng)?;

        let m_ji = sample_vector_where(rng, VECTOR_DIM, p, MAX_SAMPLE_ATTEMPTS, |m| {
            !dot(&k_j, m).expect("same field").is_zero()
        })?;
        let product_ji = dot(&k_j, &m_ji)?;

        // t_j from the line  k_i . t_j = k_j . m_(j-i).
        let t_j = solve_dot_constraint(&k_i, product_ji, rng)?;

        self.lcds.insert(
            j,
            Lcd {
                node: j,
                secret: SecretComponent { k: k_j, t: t_j },
                public: BTreeMap::new(),
            },
        );
        self.publish_arrow(i, j, m_ij)?;
        self.publish_arrow(j, i, m_ji)?;
        Ok(())
    }

    /// Keys both arrows of edge `{i, j}` when both secrets already exist.
    ///
    /// Both products are forced by the existing secrets; if either is zero
    /// the session key would be the identity point, which the scheme forbids,
    /// so the edge is refused and the caller re-draws earlier free choices.
    pub fn assign_existing_edge<R: Rng + ?Sized>(
        &mut self,
        i: NodeId,
        j: NodeId,
        rng: &mut R,
    ) -> Result<()> {
        self.check_unprovisioned_arrow(i, j)?;
        let (k_i, t_i) = {
            let s = self.require_secret(i)?;
            (s.k.clone(), s.t.clone())
        };
        let (k_j, t_j) = {
            let s = self.require_secret(j)?;
            (s.k.clone(), s.t.clone())
        };

        let product_ij = dot(&k_j, &t_i)?;
        if product_ij.is_zero() {
            return Err(Error::ZeroSessionKey(i, j));
        }
        let product_ji = dot(&k_i, &t_j)?;
        if product_ji.is_zero() {
            return Err(Error::ZeroSessionKey(j, i));
        }

        // m_(i-j) from the line  k_i . m = k_j . t_i,  and mirrored.
        let m_ij = solve_dot_constraint(&k_i, product_ij, rng)?;
        let m_ji = solve_dot_constraint(&k_j, product_ji, rng)?;
        self.publish_arrow(i, j, m_ij)?;
        self.publish_arrow(j, i, m_ji)?;
        Ok(())
    }

    fn check_unprovisioned_arrow(&self, i: NodeId, j: NodeId) -> Result<()> {
        if !self.topology.has_arrow(i, j) {
            return Err(Error::PrerequisiteMissing(format!(
                "arrow ({i}, {j}) is not in the topology"
            )));
        }
        if self.ca_secrets.contains_key(&(i, j)) || self.ca_secrets.contains_key(&(j, i)) {
            return Err(Error::AlreadyProvisioned(i));
        }
        Ok(())
    }

    /// Runs one full assignment pass over the plan.
    fn run_plan<R: Rng + ?Sized>(&mut self, roots: Option<&[NodeId]>, rng: &mut R) -> Result<()> {
        let plan = plan_assignment(&self.topology, roots)?;
        for &root in &plan.roots {
            self.init_root(root, rng)?;
        }
        for step in &plan.steps {
            match step.case {
                EdgeCase::Fresh => self.assign_fresh_edge(step.tail, step.head, rng)?,
                EdgeCase::Existing => self.assign_existing_edge(step.tail, step.head, rng)?,
            }
        }
        Ok(())
    }

    /// Full deterministic provisioning from a seed.
    ///
    /// An existing-case edge can force a zero product, in which case the run
    /// is abandoned and the whole plan is re-drawn on a fresh random stream;
    /// the zero probability is about `2/p` per existing edge, so the attempt
    /// bound is never reached on sane parameters.
    pub fn provision(
        topology: Ant,
        curve: CurveParams,
        roots: Option<&[NodeId]>,
        seed: u64,
    ) -> Result<CaState> {
        let mut last_err = None;
        for attempt in 0..MAX_PROVISION_ATTEMPTS {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(attempt);
            let mut state = CaState::new(topology.clone(), curve.clone())?;
            match state.run_plan(roots, &mut rng) {
                Ok(()) => {
                    state.verify_invariants()?;
                    return Ok(state);
                }
                Err(err @ Error::ZeroSessionKey(..)) => {
                    last_err = Some(err);
                    continue;
                }
                Err(other) => return Err(other),
            }
        }
        Err(last_err.expect("loop ran at least once"))
    }

    /// Forms (or extends) the cluster of `master`, so that every member
    /// arrow from the master carries one common nonzero product `gamma`.
    ///
    /// Members may be: already keyed neighbors (their arrow product must
    /// already equal `gamma`), keyed nodes whose master arrow is still free
    /// (their product is forced; mismatch is a conflict), or entirely new
    /// node ids, which are admitted into the topology with their parameters
    /// chosen on the `gamma` line. Existing members' LCDs are never touched.
    pub fn form_cluster<R: Rng + ?Sized>(
        &mut self,
        master: NodeId,
        members: &[NodeId],
        rng: &mut R,
    ) -> Result<()> {
        let mut trial = self.clone();
        trial.try_form_cluster(master, members, rng)?;
        trial.verify_invariants()?;
        *self = trial;
        Ok(())
    }

    fn try_form_cluster<R: Rng + ?Sized>(
        &mut self,
        master: NodeId,
        members: &[NodeId],
        rng: &mut R,
    ) -> Result<()> {
        let master_secret = self.require_secret(master)?.clone();
        let p = self.curve.subgroup_order();
        let mut members: Vec<NodeId> = members.to_vec();
        members.sort_unstable();
        members.dedup();
        if members.contains(&master) {
            return Err(Error::InvalidParameter(format!(
                "master {master} cannot be its own cluster member"
            )));
        }

        // Fix gamma: an existing cluster record wins, then any product that
        // is already forced by a provisioned member arrow, then a fresh draw.
        let mut gamma: Option<FieldElement> = self.clusters.get(&master).map(|c| c.gamma);
        for &j in &members {
            let forced = if let Some(m) = self.ca_secrets.get(&(master, j)) {
                Some(dot(&master_secret.k, m)?)
            } else if let Some(secret_j) = self.secret(j) {
                // Unprovisioned arrow to an already keyed node: the arrow
                // constraint forces the product.
                Some(dot(&secret_j.k, &master_secret.t)?)
            } else {
                None
            };
            if let Some(value) = forced {
                match gamma {
                    None => gamma = Some(value),
                    Some(g) if g != value => return Err(Error::ClusterConflict(j)),
                    Some(_) => {}
                }
            }
        }
        let gamma = match gamma {
            Some(g) if g.is_zero() => return Err(Error::ZeroSessionKey(master, members[0])),
            Some(g) => g,
            None => FieldElement::new(rng.random_range(1..p), p),
        };

        for &j in &members {
            if self.ca_secrets.contains_key(&(master, j)) {
                continue; // checked against gamma above
            }
            if j > self.topology.node_count() || !self.topology.has_arrow(master, j) {
                self.topology = self.topology.extended_with(j, &[master])?;
                check_field_vs_nodes(&self.curve, self.topology.node_count())?;
            }
            if self.secret(j).is_some() {
                // Existing-case arrows with the product already known to
                // match gamma; the reverse arrow may still force a zero.
                self.assign_existing_edge(master, j, rng)?;
            } else {
                self.assign_cluster_fresh_member(master, j, gamma, rng)?;
            }
            debug_assert_eq!(
                dot(&master_secret.k, &self.ca_secrets[&(master, j)]).unwrap(),
                gamma
            );
        }

        let entry = self.clusters.entry(master).or_insert(Cluster {
            master,
            members: BTreeSet::new(),
            gamma,
        });
        entry.members.extend(members);
        Ok(())
    }

    /// Fresh-case assignment with the master-side product pinned to `gamma`.
    fn assign_cluster_fresh_member<R: Rng + ?Sized>(
        &mut self,
        master: NodeId,
        j: NodeId,
        gamma: FieldElement,
        rng: &mut R,
    ) -> Result<()> {
        self.check_unprovisioned_arrow(master, j)?;
        let p = self.curve.subgroup_order();
        let (k_m, t_m) = {
            let s = self.require_secret(master)?;
            (s.k.clone(), s.t.clone())
        };
        // m_(master-j) on the line  k_master . m = gamma.
        let m_mj = solve_dot_constraint(&k_m, gamma, rng)?;
        // k_j on the line  k_j . t_master = gamma  (the arrow constraint).
        let k_j = solve_dot_constraint(&t_m, gamma, rng)?;
        let m_jm = sample_vector_where(rng, VECTOR_DIM, p, MAX_SAMPLE_ATTEMPTS, |m| {
            !dot(&k_j, m).expect("same field").is_zero()
        })?;
        let t_j = solve_dot_constraint(&k_m, dot(&k_j, &m_jm)?, rng)?;
        self.lcds.insert(
            j,
            Lcd {
                node: j,
                secret: SecretComponent { k: k_j, t: t_j },
                public: BTreeMap::new(),
            },
        );
        self.publish_arrow(master, j, m_mj)?;
        self.publish_arrow(j, master, m_jm)?;
        Ok(())
    }

    /// Issues an LCD for a replacement device of node `i`: same parameters,
    /// bumped revocation counter, nobody else touched.
    pub fn replace_node(&mut self, i: NodeId) -> Result<Lcd> {
        let lcd = self.lcds.get(&i).ok_or(Error::UnknownNode(i))?.clone();
        *self.replacements.entry(i).or_insert(0) += 1;
        Ok(lcd)
    }

    /// Admits a new node connected to `neighbors`: extends the topology, runs
    /// one fresh-case edge for the first neighbor and existing-case edges for
    /// the rest. Neighbors' secret components are never modified; only their
    /// public components grow. Zero-product collisions on the existing-case
    /// edges are retried with fresh randomness for the new node's choices.
    pub fn admit_node<R: Rng + ?Sized>(
        &mut self,
        new_id: NodeId,
        neighbors: &[NodeId],
        rng: &mut R,
    ) -> Result<()> {
        if neighbors.is_empty() {
            return Err(Error::PrerequisiteMissing(
                "a new node needs at least one neighbor".into(),
            ));
        }
        if self.lcds.contains_key(&new_id) {
            return Err(Error::IdCollision(new_id));
        }
        let mut neighbors = neighbors.to_vec();
        neighbors.sort_unstable();
        neighbors.dedup();
        for &u in &neighbors {
            self.require_secret(u)?;
        }

        let mut last_err = None;
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let mut trial = self.clone();
            match trial.try_admit(new_id, &neighbors, rng) {
                Ok(()) => {
                    trial.verify_invariants()?;
                    *self = trial;
                    return Ok(());
                }
                Err(err @ Error::ZeroSessionKey(..)) => {
                    last_err = Some(err);
                    continue;
                }
                Err(other) => return Err(other),
            }
        }
        Err(last_err.expect("loop ran at least once"))
    }

    fn try_admit<R: Rng + ?Sized>(
        &mut self,
        new_id: NodeId,
        neighbors: &[NodeId],
        rng: &mut R,
    ) -> Result<()> {
        self.topology = self.topology.extended_with(new_id, neighbors)?;
        check_field_vs_nodes(&self.curve, self.topology.node_count())?;
        self.assign_fresh_edge(neighbors[0], new_id, rng)?;
        for &u in &neighbors[1..] {
            self.assign_existing_edge(u, new_id, rng)?;
        }
        Ok(())
    }

    /// The LCD preloaded into node `i`'s device.
    pub fn export_lcd(&self, i: NodeId) -> Result<&Lcd> {
        self.lcds.get(&i).ok_or(Error::UnknownNode(i))
    }

    /// All published topology vectors, and nothing else: the pre-image
    /// vectors never appear here.
    pub fn export_public_directory(&self) -> BTreeMap<NodeId, PublicComponent> {
        self.lcds
            .iter()
            .map(|(&i, lcd)| (i, lcd.public.clone()))
            .collect()
    }

    /// Replays every invariant the construction promises. Cheap at desk
    /// scale; run after every mutating operation and from tests.
    pub fn verify_invariants(&self) -> Result<()> {
        check_field_vs_nodes(&self.curve, self.topology.node_count())?;
        let fail = |msg: String| Err(Error::PrerequisiteMissing(msg));

        for (&i, lcd) in &self.lcds {
            if lcd.secret.k.is_zero() || lcd.secret.t.is_zero() {
                return fail(format!("node {i} has a zero secret vector"));
            }
            let expected: Vec<NodeId> = self.topology.neighbors(i);
            let have: Vec<NodeId> = lcd.public.keys().copied().collect();
            if expected != have {
                return fail(format!(
                    "node {i} public component covers {have:?}, topology says {expected:?}"
                ));
            }
        }
        for (i, j) in self.topology.arrows() {
            let m = match self.ca_secrets.get(&(i, j)) {
                Some(m) => m,
                None => {
                    if self.lcds.contains_key(&i) || self.lcds.contains_key(&j) {
                        return fail(format!("arrow ({i}, {j}) lacks a pre-image vector"));
                    }
                    continue; // unprovisioned region of the graph
                }
            };
            if m.is_zero() {
                return fail(format!("arrow ({i}, {j}) has a zero topology vector"));
            }
            let lcd_i = self.lcds.get(&i).expect("tail must be provisioned");
            let lcd_j = self.lcds.get(&j).expect("head must be provisioned");
            let published = lcd_i
                .public
                .get(&j)
                .expect("public keys checked against topology above");
            if *published != self.curve.lift_vector(m)? {
                return fail(format!("arrow ({i}, {j}) publishes a stale lift"));
            }
            let lhs = dot(&lcd_i.secret.k, m)?;
            let rhs = dot(&lcd_j.secret.k, &lcd_i.secret.t)?;
            if lhs != rhs {
                return fail(format!("arrow ({i}, {j}) violates its defining constraint"));
            }
            if lhs.is_zero() {
                return fail(format!("arrow ({i}, {j}) carries a zero session product"));
            }
        }
        for cluster in self.clusters.values() {
            if cluster.gamma.is_zero() {
                return fail(format!("cluster of {} has zero gamma", cluster.master));
            }
            let master = self.require_secret(cluster.master)?;
            for &j in &cluster.members {
                let m = self
                    .ca_secrets
                    .get(&(cluster.master, j))
                    .ok_or_else(|| Error::PrerequisiteMissing(format!(
                        "cluster member {j} has no master arrow"
                    )))?;
                if dot(&master.k, m)? != cluster.gamma {
                    return fail(format!("cluster member {j} is off the gamma line"));
                }
            }
        }
        Ok(())
    }
}

fn check_field_vs_nodes(curve: &CurveParams, n: NodeId) -> Result<()> {
    if curve.subgroup_order() <= n as u64 {
        return Err(Error::ParameterMismatch(format!(
            "scheme field order {} must exceed the node count {n}",
            curve.subgroup_order()
        )));
    }
    Ok(())
}
