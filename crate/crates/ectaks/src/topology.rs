//! The authenticated network topology: a symmetric, loop-free directed graph
//! whose arrows are the only links the scheme will ever key.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Validated topology on nodes `1..=n`. Symmetry ((i,j) implies (j,i)) and
/// loop-freeness are established at construction and hold for life.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ant {
    n: NodeId,
    arrows: BTreeSet<(NodeId, NodeId)>,
}

impl Ant {
    /// Builds from explicit arrows, checking symmetry, loops, and id range.
    pub fn from_arrows<I>(n: NodeId, arrows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let arrows: BTreeSet<(NodeId, NodeId)> = arrows.into_iter().collect();
        for &(i, j) in &arrows {
            for id in [i, j] {
                if id < 1 || id > n {
                    return Err(Error::IdOutOfRange { id, n });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !arrows.contains(&(j, i)) {
                return Err(Error::AsymmetricArrow(i, j));
            }
        }
        Ok(Ant { n, arrows })
    }

    /// Builds from unordered edges, adding both arrows per pair.
    pub fn from_edges<I>(n: NodeId, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut arrows = BTreeSet::new();
        for (i, j) in edges {
            arrows.insert((i, j));
            arrows.insert((j, i));
        }
        Ant::from_arrows(n, arrows)
    }

    pub fn node_count(&self) -> NodeId {
        self.n
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        1..=self.n
    }

    pub fn arrows(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.arrows.iter().copied()
    }

    pub fn arrow_count(&self) -> usize {
        self.arrows.len()
    }

    pub fn has_arrow(&self, i: NodeId, j: NodeId) -> bool {
        self.arrows.contains(&(i, j))
    }

    /// Outbound neighbors of `i`, ascending.
    pub fn neighbors(&self, i: NodeId) -> Vec<NodeId> {
        self.arrows
            .range((i, 0)..=(i, NodeId::MAX))
            .map(|&(_, j)| j)
            .collect()
    }

    pub fn check_node(&self, i: NodeId) -> Result<()> {
        if i < 1 || i > self.n {
            return Err(Error::IdOutOfRange { id: i, n: self.n });
        }
        Ok(())
    }

    /// The subgraph of links node `i` is entitled to use: every arrow with
    /// tail `i`, plus the nodes those arrows reach.
    pub fn out_subgraph(&self, i: NodeId) -> Result<AntSubgraph> {
        self.check_node(i)?;
        let arrows: Vec<(NodeId, NodeId)> = self
            .arrows
            .range((i, 0)..=(i, NodeId::MAX))
            .copied()
            .collect();
        let mut nodes = BTreeSet::new();
        nodes.insert(i);
        nodes.extend(arrows.iter().map(|&(_, j)| j));
        Ok(AntSubgraph {
            owner: i,
            arrows,
            nodes,
        })
    }

    /// Connected components (over the undirected view), each listed ascending,
    /// components ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = BTreeSet::new();
        let mut components = Vec::new();
        for start in self.nodes() {
            if seen.contains(&start) {
                continue;
            }
            let mut component = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(u) = queue.pop_front() {
                component.push(u);
                for v in self.neighbors(u) {
                    if seen.insert(v) {
                        queue.push_back(v);
                    }
                }
            }
            component.sort_unstable();
            components.push(component);
        }
        components
    }

    /// Grows the topology with a new node connected to `neighbors`; both
    /// arrows are added per neighbor. `new_id` may extend the id range by one.
    pub fn extended_with(&self, new_id: NodeId, neighbors: &[NodeId]) -> Result<Ant> {
        if new_id < 1 || new_id > self.n + 1 {
            return Err(Error::IdOutOfRange {
                id: new_id,
                n: self.n + 1,
            });
        }
        if new_id <= self.n && !self.neighbors(new_id).is_empty() {
            return Err(Error::IdCollision(new_id));
        }
        let n = self.n.max(new_id);
        let mut arrows = self.arrows.clone();
        for &u in neighbors {
            if u == new_id {
                return Err(Error::SelfLoop(u));
            }
            arrows.insert((u, new_id));
            arrows.insert((new_id, u));
        }
        Ant::from_arrows(n, arrows)
    }
}

/// The outbound subgraph of one node: non-symmetric and cycle-free by
/// construction, since every arrow starts at the owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntSubgraph {
    pub owner: NodeId,
    pub arrows: Vec<(NodeId, NodeId)>,
    pub nodes: BTreeSet<NodeId>,
}

/// Which assignment branch an edge takes: `Fresh` when the far node has no
/// secret yet, `Existing` when both endpoints are already keyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeCase {
    Fresh,
    Existing,
}

/// One provisioning step: the unordered pair `{i, j}` handled through the
/// arrow `(i, j)`, where `i` is the side whose secret already exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanStep {
    pub tail: NodeId,
    pub head: NodeId,
    pub case: EdgeCase,
}

/// The ordered edge walk the authority follows: breadth-first from one root
/// per component, ascending ids breaking ties, so plans are reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentPlan {
    pub roots: Vec<NodeId>,
    pub steps: Vec<PlanStep>,
}

/// Plans the edge order for provisioning. `roots` may pick one start node per
/// connected component; defaults to the smallest id of each component.
pub fn plan_assignment(graph: &Ant, roots: Option<&[NodeId]>) -> Result<AssignmentPlan> {
    let components = graph.components();
    let chosen: Vec<NodeId> = match roots {
        None => components.iter().map(|c| c[0]).collect(),
        Some(roots) => {
            if roots.len() != components.len() {
                return Err(Error::RootsMismatch(format!(
                    "{} roots for {} components",
                    roots.len(),
                    components.len()
                )));
            }
            let mut by_component: BTreeMap<usize, NodeId> = BTreeMap::new();
            for &r in roots {
                graph.check_node(r)?;
                let idx = components
                    .iter()
                    .position(|c| c.contains(&r))
                    .expect("checked node is in some component");
                if by_component.insert(idx, r).is_some() {
                    return Err(Error::RootsMismatch(format!(
                        "two roots in the component of node {r}"
                    )));
                }
            }
            (0..components.len())
                .map(|idx| by_component[&idx])
                .collect()
        }
    };

    let mut steps = Vec::new();
    let mut keyed = BTreeSet::new();
    let mut done_pairs = BTreeSet::new();
    for &root in &chosen {
        keyed.insert(root);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for v in graph.neighbors(u) {
                let pair = (u.min(v), u.max(v));
                if done_pairs.contains(&pair) {
                    continue;
                }
                done_pairs.insert(pair);
                if keyed.contains(&v) {
                    steps.push(PlanStep {
                        tail: u,
                        head: v,
                        case: EdgeCase::Existing,
                    });
                } else {
                    keyed.insert(v);
                    queue.push_back(v);
                    steps.push(PlanStep {
                        tail: u,
                        head: v,
                        case: EdgeCase::Fresh,
                    });
                }
            }
        }
    }
    Ok(AssignmentPlan {
        roots: chosen,
        steps,
    })
}
