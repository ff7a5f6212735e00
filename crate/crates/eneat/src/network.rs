//! Feed-forward phenotype networks and the binary class label.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::activation::ActivationKind;
use crate::error::{Error, Result};

/// Identifier of a network/genome node. Ids are allocated once per
/// evolution run and never reused, so they can be sparse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary segment class: Forest or Non-Forest (the deforestation class).
///
/// The derived order (`F < NF`) is fixed so serialized output is
/// deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    F,
    NF,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::F, ClassLabel::NF];

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::F => "F",
            ClassLabel::NF => "NF",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(ClassLabel::F),
            "NF" => Ok(ClassLabel::NF),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// A non-input node of a phenotype network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkNode {
    pub id: NodeId,
    pub bias: f64,
    pub activation: ActivationKind,
}

/// A weighted directed connection of a phenotype network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConnection {
    pub source: NodeId,
    pub target: NodeId,
    pub weight: f64,
}

/// An immutable, evaluable feed-forward network.
///
/// Node-id convention: inputs occupy ids `0..input_count`, outputs
/// `input_count..input_count + output_count`, hidden nodes any id above
/// that. Construction validates acyclicity and fixes a topological
/// evaluation order, so evaluation is a pure function of `(self, inputs)`
/// and instances can be shared across threads freely.
#[derive(Debug, Clone)]
pub struct FeedForwardNetwork {
    input_count: usize,
    output_count: usize,
    nodes: Vec<NetworkNode>,
    connections: Vec<NetworkConnection>,
    evaluation_order: Vec<NodeId>,
    plan: Vec<PlanStep>,
    output_slots: Vec<usize>,
    slot_count: usize,
}

#[derive(Debug, Clone)]
struct PlanStep {
    slot: usize,
    bias: f64,
    activation: ActivationKind,
    incoming: Vec<(usize, f64)>,
}

impl PartialEq for FeedForwardNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.input_count == other.input_count
            && self.output_count == other.output_count
            && self.nodes == other.nodes
            && self.connections == other.connections
            && self.evaluation_order == other.evaluation_order
    }
}

impl FeedForwardNetwork {
    /// Build and validate a network from its parts. `nodes` holds every
    /// non-input node; input nodes are implied by `input_count`.
    pub fn new(
        input_count: usize,
        output_count: usize,
        mut nodes: Vec<NetworkNode>,
        mut connections: Vec<NetworkConnection>,
    ) -> Result<Self> {
        if input_count == 0 || output_count == 0 {
            return Err(Error::InvalidNetwork(
                "input_count and output_count must be positive".into(),
            ));
        }
        nodes.sort_by_key(|n| n.id);
        connections.sort_by_key(|c| (c.source, c.target));

        let mut ids = BTreeSet::new();
        for n in &nodes {
            if (n.id.0 as usize) < input_count {
                return Err(Error::InvalidNetwork(format!(
                    "node {} collides with the input id range",
                    n.id
                )));
            }
            if !ids.insert(n.id) {
                return Err(Error::InvalidNetwork(format!("duplicate node id {}", n.id)));
            }
        }
        for o in 0..output_count {
            let id = NodeId((input_count + o) as u32);
            if !ids.contains(&id) {
                return Err(Error::InvalidNetwork(format!("missing output node {id}")));
            }
        }

        let is_input = |id: NodeId| (id.0 as usize) < input_count;
        let mut pairs = BTreeSet::new();
        for c in &connections {
            if is_input(c.target) {
                return Err(Error::InvalidNetwork(format!(
                    "connection targets input node {}",
                    c.target
                )));
            }
            if !is_input(c.source) && !ids.contains(&c.source) {
                return Err(Error::InvalidNetwork(format!(
                    "connection source {} does not exist",
                    c.source
                )));
            }
            if !ids.contains(&c.target) {
                return Err(Error::InvalidNetwork(format!(
                    "connection target {} does not exist",
                    c.target
                )));
            }
            if !pairs.insert((c.source, c.target)) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate connection {} -> {}",
                    c.source, c.target
                )));
            }
        }

        // Kahn's algorithm over edges between non-input nodes; edges from
        // inputs impose no ordering constraint. Ready nodes are taken in
        // ascending id order so the evaluation order is canonical.
        let mut indegree: HashMap<NodeId, usize> = nodes.iter().map(|n| (n.id, 0)).collect();
        let mut successors: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for c in &connections {
            if !is_input(c.source) {
                *indegree.get_mut(&c.target).expect("validated target") += 1;
                successors.entry(c.source).or_default().push(c.target);
            }
        }
        let mut ready: BTreeSet<NodeId> = indegree
            .iter()
            .filter(|(_, deg)| **deg == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut evaluation_order = Vec::with_capacity(nodes.len());
        while let Some(&id) = ready.iter().next() {
            ready.remove(&id);
            evaluation_order.push(id);
            if let Some(succ) = successors.get(&id) {
                for &t in succ {
                    let deg = indegree.get_mut(&t).expect("validated target");
                    *deg -= 1;
                    if *deg == 0 {
                        ready.insert(t);
                    }
                }
            }
        }
        if evaluation_order.len() != nodes.len() {
            return Err(Error::InvalidNetwork("connection graph has a cycle".into()));
        }

        // Dense slots: inputs first, then non-input nodes in id order.
        let slot_of: HashMap<NodeId, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, input_count + i))
            .collect();
        let slot = |id: NodeId| -> usize {
            if is_input(id) {
                id.0 as usize
            } else {
                slot_of[&id]
            }
        };

        let mut incoming: HashMap<NodeId, Vec<(usize, f64)>> = HashMap::new();
        for c in &connections {
            incoming
                .entry(c.target)
                .or_default()
                .push((slot(c.source), c.weight));
        }
        let node_by_id: HashMap<NodeId, &NetworkNode> = nodes.iter().map(|n| (n.id, n)).collect();
        let plan = evaluation_order
            .iter()
            .map(|id| {
                let n = node_by_id[id];
                PlanStep {
                    slot: slot(*id),
                    bias: n.bias,
                    activation: n.activation,
                    incoming: incoming.remove(id).unwrap_or_default(),
                }
            })
            .collect();
        let output_slots = (0..output_count)
            .map(|o| slot(NodeId((input_count + o) as u32)))
            .collect();
        let slot_count = input_count + nodes.len();

        Ok(FeedForwardNetwork {
            input_count,
            output_count,
            nodes,
            connections,
            evaluation_order,
            plan,
            output_slots,
            slot_count,
        })
    }

    pub fn input_count(&self) -> usize {
        self.input_count
    }

    pub fn output_count(&self) -> usize {
        self.output_count
    }

    /// Non-input nodes in ascending id order.
    pub fn nodes(&self) -> &[NetworkNode] {
        &self.nodes
    }

    pub fn connections(&self) -> &[NetworkConnection] {
        &self.connections
    }

    /// Topological order in which non-input nodes are evaluated.
    pub fn evaluation_order(&self) -> &[NodeId] {
        &self.evaluation_order
    }

    /// Evaluate the network, returning output node values in id order.
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let mut values = vec![0.0; self.slot_count];
        self.forward_into(inputs, &mut values)?;
        Ok(self.output_slots.iter().map(|&s| values[s]).collect())
    }

    /// Classify a feature vector: `NF` when the output is at or above 0.5,
    /// `F` below.
    pub fn classify(&self, features: &[f64]) -> Result<ClassLabel> {
        let mut values = vec![0.0; self.slot_count];
        self.classify_scratch(features, &mut values)
    }

    /// Classification reusing a caller-owned scratch buffer; the hot path
    /// for fitness evaluation.
    pub(crate) fn classify_scratch(
        &self,
        features: &[f64],
        values: &mut Vec<f64>,
    ) -> Result<ClassLabel> {
        self.forward_into(features, values)?;
        Ok(if values[self.output_slots[0]] >= 0.5 {
            ClassLabel::NF
        } else {
            ClassLabel::F
        })
    }

    fn forward_into(&self, inputs: &[f64], values: &mut Vec<f64>) -> Result<()> {
        if inputs.len() != self.input_count {
            return Err(Error::InputLength {
                expected: self.input_count,
                got: inputs.len(),
            });
        }
        debug_assert!(inputs.iter().all(|x| x.is_finite()));
        values.clear();
        values.resize(self.slot_count, 0.0);
        values[..self.input_count].copy_from_slice(inputs);
        for step in &self.plan {
            let mut sum = step.bias;
            for &(src, weight) in &step.incoming {
                sum += weight * values[src];
            }
            values[step.slot] = step.activation.apply(sum);
        }
        Ok(())
    }
}
