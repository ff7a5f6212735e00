//! Genome representation and the genetic operators: structural mutations,
//! weight mutations, crossover and compatibility distance, with global
//! innovation tracking.
//!
//! Genomes keep their node genes sorted by id and their connection genes
//! sorted by innovation number. Operators are pure: they take a genome by
//! reference and return a new one, and every random decision comes from
//! the caller's seeded generator.
//!
//! Acyclicity is maintained over the *full* connection set (disabled genes
//! included), which is strictly stronger than the required invariant on
//! enabled genes: it makes re-enabling a disabled gene always safe and
//! keeps crossover closed under the invariant, since a child's connection
//! pairs are exactly the fitter parent's pairs.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::network::{FeedForwardNetwork, NetworkConnection, NetworkNode, NodeId};

/// Historical marker of a structural gene, global within one evolution run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Innovation(pub u64);

impl fmt::Display for Innovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Input,
    Hidden,
    Output,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Hidden => "hidden",
            NodeKind::Output => "output",
        }
    }
}

/// A node gene. Input nodes carry no bias/activation semantics; their
/// fields are fixed to `0.0` / identity and ignored by evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGene {
    pub id: NodeId,
    pub kind: NodeKind,
    pub bias: f64,
    pub activation: ActivationKind,
}

/// A connection gene.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionGene {
    pub innovation: Innovation,
    pub source: NodeId,
    pub target: NodeId,
    pub weight: f64,
    pub enabled: bool,
}

/// An evolvable network description.
#[derive(Debug, Clone)]
pub struct Genome {
    /// Creation-order id within one evolution run; bookkeeping only and
    /// excluded from equality.
    pub id: u64,
    nodes: Vec<NodeGene>,
    connections: Vec<ConnectionGene>,
    fitness: Option<f64>,
}

impl PartialEq for Genome {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.connections == other.connections
            && self.fitness == other.fitness
    }
}

impl Genome {
    /// Assemble a genome from parts, sorting and validating.
    pub fn from_parts(
        nodes: Vec<NodeGene>,
        connections: Vec<ConnectionGene>,
        fitness: Option<f64>,
    ) -> Result<Self> {
        let mut g = Genome {
            id: 0,
            nodes,
            connections,
            fitness,
        };
        g.nodes.sort_by_key(|n| n.id);
        g.connections.sort_by_key(|c| c.innovation);
        g.validate().map_err(Error::Internal)?;
        Ok(g)
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn connections(&self) -> &[ConnectionGene] {
        &self.connections
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    pub fn set_fitness(&mut self, fitness: f64) {
        self.fitness = Some(fitness);
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn input_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Input)
            .count()
    }

    pub fn output_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Output)
            .count()
    }

    /// Structural equality: same node and connection genes, ignoring
    /// fitness and the bookkeeping id.
    pub fn same_structure(&self, other: &Genome) -> bool {
        self.nodes == other.nodes && self.connections == other.connections
    }

    /// Check every genome invariant; returns a description of the first
    /// violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for w in self.nodes.windows(2) {
            if w[0].id >= w[1].id {
                return Err(format!("node ids not strictly ascending at {}", w[1].id));
            }
        }
        for w in self.connections.windows(2) {
            if w[0].innovation >= w[1].innovation {
                return Err(format!(
                    "innovations not strictly ascending at {}",
                    w[1].innovation
                ));
            }
        }
        let mut pairs = HashSet::new();
        for c in &self.connections {
            self.node(c.source).ok_or_else(|| {
                format!(
                    "connection {} has dangling source {}",
                    c.innovation, c.source
                )
            })?;
            let target = self.node(c.target).ok_or_else(|| {
                format!(
                    "connection {} has dangling target {}",
                    c.innovation, c.target
                )
            })?;
            if target.kind == NodeKind::Input {
                return Err(format!("connection {} targets an input node", c.innovation));
            }
            if !pairs.insert((c.source, c.target)) {
                return Err(format!(
                    "duplicate connection pair {} -> {}",
                    c.source, c.target
                ));
            }
        }
        if let Some(f) = self.fitness {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("fitness {f} outside [0, 1]"));
            }
        }
        if self.topology().order.is_none() {
            return Err("connection graph has a cycle".into());
        }
        Ok(())
    }

    /// Convert to the evaluable phenotype. Only enabled connections are
    /// realized; node-id conventions (inputs `0..in`, outputs
    /// `in..in+out`) are checked.
    pub fn phenotype(&self) -> Result<FeedForwardNetwork> {
        let input_count = self.input_count();
        let output_count = self.output_count();
        for (i, n) in self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Input)
            .enumerate()
        {
            if n.id != NodeId(i as u32) {
                return Err(Error::Internal(format!(
                    "input node {} out of canonical position {i}",
                    n.id
                )));
            }
        }
        for (o, n) in self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Output)
            .enumerate()
        {
            if n.id != NodeId((input_count + o) as u32) {
                return Err(Error::Internal(format!(
                    "output node {} out of canonical position {}",
                    n.id,
                    input_count + o
                )));
            }
        }
        let nodes = self
            .nodes
            .iter()
            .filter(|n| n.kind != NodeKind::Input)
            .map(|n| NetworkNode {
                id: n.id,
                bias: n.bias,
                activation: n.activation,
            })
            .collect();
        let connections = self
            .connections
            .iter()
            .filter(|c| c.enabled)
            .map(|c| NetworkConnection {
                source: c.source,
                target: c.target,
                weight: c.weight,
            })
            .collect();
        FeedForwardNetwork::new(input_count, output_count, nodes, connections)
    }

    fn pair_set(&self) -> HashSet<(NodeId, NodeId)> {
        self.connections
            .iter()
            .map(|c| (c.source, c.target))
            .collect()
    }

    /// Dense adjacency over the full connection set plus a topological
    /// order (None if cyclic).
    fn topology(&self) -> Topology {
        let ids: Vec<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        let index_of = |id: NodeId| ids.binary_search(&id).expect("endpoint exists");
        let n = ids.len();
        let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for c in &self.connections {
            let s = index_of(c.source);
            let t = index_of(c.target);
            successors[s].push(t);
            indegree[t] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = stack.pop() {
            order.push(i);
            for &t in &successors[i] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    stack.push(t);
                }
            }
        }
        Topology {
            ids,
            successors,
            order: (order.len() == n).then_some(order),
        }
    }

    fn enabled_graph_is_acyclic(&self) -> bool {
        let ids: Vec<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        let index_of = |id: NodeId| ids.binary_search(&id).expect("endpoint exists");
        let n = ids.len();
        let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for c in self.connections.iter().filter(|c| c.enabled) {
            successors[index_of(c.source)].push(index_of(c.target));
            indegree[index_of(c.target)] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = stack.pop() {
            seen += 1;
            for &t in &successors[i] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    stack.push(t);
                }
            }
        }
        seen == n
    }

    fn insert_connection(&mut self, gene: ConnectionGene) {
        let pos = self
            .connections
            .partition_point(|c| c.innovation < gene.innovation);
        self.connections.insert(pos, gene);
    }

    fn insert_node(&mut self, gene: NodeGene) {
        let pos = self.nodes.partition_point(|n| n.id < gene.id);
        self.nodes.insert(pos, gene);
    }
}

struct Topology {
    ids: Vec<NodeId>,
    successors: Vec<Vec<usize>>,
    order: Option<Vec<usize>>,
}

impl Topology {
    /// reachable[i][j]: node j is reachable from node i over full edges.
    fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.ids.len();
        let mut reach = vec![vec![false; n]; n];
        for start in 0..n {
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                for &t in &self.successors[i] {
                    if !reach[start][t] {
                        reach[start][t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        reach
    }
}

/// Run-global innovation bookkeeping: identical structural mutations
/// receive identical innovation numbers (and node ids) for the whole run,
/// which keeps genes alignable across genomes and generations.
///
/// Shared-mutable within one run: when a generation's mutations execute in
/// parallel, access must be serialized (the evolution loop mutates only
/// from its single reproduction thread).
#[derive(Debug, Clone, Default)]
pub struct InnovationRegistry {
    next_innovation: u64,
    next_node_id: u32,
    next_genome_id: u64,
    seen: HashMap<(NodeId, NodeId), Innovation>,
    splits: HashMap<(NodeId, NodeId), Vec<SplitRecord>>,
}

#[derive(Debug, Clone, Copy)]
pub struct SplitRecord {
    pub node: NodeId,
    pub into_new: Innovation,
    pub out_of_new: Innovation,
}

impl InnovationRegistry {
    /// Registry primed for the canonical fully-connected initial topology,
    /// matching the numbering of [`initial_genome`].
    pub fn primed(input_count: usize, hidden_count: usize, output_count: usize) -> Self {
        let mut reg = InnovationRegistry::default();
        for pair in initial_wiring(input_count, hidden_count, output_count) {
            let innovation = Innovation(reg.next_innovation);
            reg.next_innovation += 1;
            reg.seen.insert(pair, innovation);
        }
        reg.next_node_id = (input_count + output_count + hidden_count) as u32;
        reg
    }

    pub fn next_innovation(&self) -> u64 {
        self.next_innovation
    }

    pub fn next_node_id(&self) -> u32 {
        self.next_node_id
    }

    pub fn alloc_genome_id(&mut self) -> u64 {
        let id = self.next_genome_id;
        self.next_genome_id += 1;
        id
    }

    /// Innovation number for adding a connection `source -> target`; the
    /// same pair always yields the same number.
    pub fn connection_innovation(&mut self, source: NodeId, target: NodeId) -> Innovation {
        if let Some(&i) = self.seen.get(&(source, target)) {
            return i;
        }
        let innovation = Innovation(self.next_innovation);
        self.next_innovation += 1;
        self.seen.insert((source, target), innovation);
        innovation
    }

    /// Node id and connection innovations for splitting `source -> target`.
    /// Reuses a previous split of the same pair unless the genome already
    /// contains that node (a pair split twice along one lineage), in which
    /// case a fresh record is allocated.
    pub fn node_split(
        &mut self,
        source: NodeId,
        target: NodeId,
        genome_has_node: impl Fn(NodeId) -> bool,
    ) -> SplitRecord {
        if let Some(rec) = self
            .splits
            .get(&(source, target))
            .and_then(|records| records.iter().find(|r| !genome_has_node(r.node)).copied())
        {
            return rec;
        }
        let node = NodeId(self.next_node_id);
        self.next_node_id += 1;
        let into_new = Innovation(self.next_innovation);
        let out_of_new = Innovation(self.next_innovation + 1);
        self.next_innovation += 2;
        self.seen.insert((source, node), into_new);
        self.seen.insert((node, target), out_of_new);
        let rec = SplitRecord {
            node,
            into_new,
            out_of_new,
        };
        self.splits.entry((source, target)).or_default().push(rec);
        rec
    }
}

/// Probabilities and ranges governing the mutation operators.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationRates {
    pub weight_perturb_prob: f64,
    pub weight_replace_prob: f64,
    pub bias_perturb_prob: f64,
    pub add_connection_prob: f64,
    pub add_node_prob: f64,
    pub activation_mutate_prob: f64,
    pub toggle_enable_prob: f64,
    pub perturb_sigma: f64,
    pub weight_range: (f64, f64),
}

impl Default for MutationRates {
    fn default() -> Self {
        MutationRates {
            weight_perturb_prob: 0.8,
            weight_replace_prob: 0.1,
            bias_perturb_prob: 0.7,
            add_connection_prob: 0.5,
            add_node_prob: 0.2,
            activation_mutate_prob: 0.05,
            toggle_enable_prob: 0.01,
            perturb_sigma: 0.5,
            weight_range: (-30.0, 30.0),
        }
    }
}

impl MutationRates {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("weight_perturb_prob", self.weight_perturb_prob),
            ("weight_replace_prob", self.weight_replace_prob),
            ("bias_perturb_prob", self.bias_perturb_prob),
            ("add_connection_prob", self.add_connection_prob),
            ("add_node_prob", self.add_node_prob),
            ("activation_mutate_prob", self.activation_mutate_prob),
            ("toggle_enable_prob", self.toggle_enable_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        if !(self.perturb_sigma > 0.0) {
            return Err(Error::Config(format!(
                "perturb_sigma = {} must be positive",
                self.perturb_sigma
            )));
        }
        if !(self.weight_range.0 < self.weight_range.1) {
            return Err(Error::Config(format!(
                "weight_range ({}, {}) must have min < max",
                self.weight_range.0, self.weight_range.1
            )));
        }
        Ok(())
    }
}

fn initial_wiring(
    input_count: usize,
    hidden_count: usize,
    output_count: usize,
) -> Vec<(NodeId, NodeId)> {
    let input = |i: usize| NodeId(i as u32);
    let output = |o: usize| NodeId((input_count + o) as u32);
    let hidden = |h: usize| NodeId((input_count + output_count + h) as u32);
    let mut pairs = Vec::new();
    if hidden_count == 0 {
        for i in 0..input_count {
            for o in 0..output_count {
                pairs.push((input(i), output(o)));
            }
        }
    } else {
        for i in 0..input_count {
            for h in 0..hidden_count {
                pairs.push((input(i), hidden(h)));
            }
        }
        for h in 0..hidden_count {
            for o in 0..output_count {
                pairs.push((hidden(h), output(o)));
            }
        }
    }
    pairs
}

/// The canonical fully-connected starting genome: every input feeds every
/// hidden node and every hidden node feeds every output (inputs feed
/// outputs directly when `hidden_count` is 0). Weights and biases are
/// uniform draws from `weight_range`; activations are uniform draws from
/// `activation_pool`; innovation numbers follow the fixed wiring order.
pub fn initial_genome<R: Rng>(
    input_count: usize,
    hidden_count: usize,
    output_count: usize,
    activation_pool: &[ActivationKind],
    weight_range: (f64, f64),
    rng: &mut R,
) -> Result<Genome> {
    debug_assert!(input_count >= 1 && output_count >= 1);
    if activation_pool.is_empty() {
        return Err(Error::EmptyActivationPool);
    }
    let (lo, hi) = weight_range;
    let mut nodes = Vec::with_capacity(input_count + output_count + hidden_count);
    for i in 0..input_count {
        nodes.push(NodeGene {
            id: NodeId(i as u32),
            kind: NodeKind::Input,
            bias: 0.0,
            activation: ActivationKind::Identity,
        });
    }
    for o in 0..output_count {
        nodes.push(NodeGene {
            id: NodeId((input_count + o) as u32),
            kind: NodeKind::Output,
            bias: rng.random_range(lo..hi),
            activation: activation_pool[rng.random_range(0..activation_pool.len())],
        });
    }
    for h in 0..hidden_count {
        nodes.push(NodeGene {
            id: NodeId((input_count + output_count + h) as u32),
            kind: NodeKind::Hidden,
            bias: rng.random_range(lo..hi),
            activation: activation_pool[rng.random_range(0..activation_pool.len())],
        });
    }
    let connections = initial_wiring(input_count, hidden_count, output_count)
        .into_iter()
        .enumerate()
        .map(|(k, (source, target))| ConnectionGene {
            innovation: Innovation(k as u64),
            source,
            target,
            weight: rng.random_range(lo..hi),
            enabled: true,
        })
        .collect();
    Ok(Genome {
        id: 0,
        nodes,
        connections,
        fitness: None,
    })
}

/// Split a uniformly chosen enabled connection with a new hidden node: the
/// old gene is disabled, the incoming half gets weight 1.0 and the
/// outgoing half inherits the old weight. No enabled connections is a
/// no-op, not a failure.
pub fn mutate_add_node<R: Rng>(
    genome: &Genome,
    registry: &mut InnovationRegistry,
    activation_pool: &[ActivationKind],
    rng: &mut R,
) -> Genome {
    debug_assert!(!activation_pool.is_empty());
    let enabled: Vec<usize> = genome
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| c.enabled)
        .map(|(i, _)| i)
        .collect();
    if enabled.is_empty() {
        return genome.clone();
    }
    let mut out = genome.clone();
    let pick = enabled[rng.random_range(0..enabled.len())];
    let (source, target, weight) = {
        let c = &mut out.connections[pick];
        c.enabled = false;
        (c.source, c.target, c.weight)
    };
    let rec = registry.node_split(source, target, |id| genome.node(id).is_some());
    let activation = activation_pool[rng.random_range(0..activation_pool.len())];
    out.insert_node(NodeGene {
        id: rec.node,
        kind: NodeKind::Hidden,
        bias: 0.0,
        activation,
    });
    out.insert_connection(ConnectionGene {
        innovation: rec.into_new,
        source,
        target: rec.node,
        weight: 1.0,
        enabled: true,
    });
    out.insert_connection(ConnectionGene {
        innovation: rec.out_of_new,
        source: rec.node,
        target,
        weight,
        enabled: true,
    });
    debug_assert_eq!(out.validate(), Ok(()));
    out
}

/// Add one new enabled connection between a uniformly chosen valid pair:
/// the target is not an input, the pair is not already present, and the
/// addition cannot create a cycle (checked against the full connection
/// set, so candidates that would cycle are excluded before sampling).
/// Saturated genomes are a no-op.
pub fn mutate_add_connection<R: Rng>(
    genome: &Genome,
    registry: &mut InnovationRegistry,
    weight_range: (f64, f64),
    rng: &mut R,
) -> Genome {
    let topo = genome.topology();
    let reach = topo.reachability();
    let pairs = genome.pair_set();
    let mut candidates: Vec<(NodeId, NodeId)> = Vec::new();
    for (si, &source) in topo.ids.iter().enumerate() {
        for (ti, &target) in topo.ids.iter().enumerate() {
            if si == ti {
                continue;
            }
            if genome.nodes[ti].kind == NodeKind::Input {
                continue;
            }
            if pairs.contains(&(source, target)) {
                continue;
            }
            // target must not reach source, or the new edge closes a cycle
            if reach[ti][si] {
                continue;
            }
            candidates.push((source, target));
        }
    }
    if candidates.is_empty() {
        return genome.clone();
    }
    let (source, target) = candidates[rng.random_range(0..candidates.len())];
    let mut out = genome.clone();
    out.insert_connection(ConnectionGene {
        innovation: registry.connection_innovation(source, target),
        source,
        target,
        weight: rng.random_range(weight_range.0..weight_range.1),
        enabled: true,
    });
    debug_assert_eq!(out.validate(), Ok(()));
    out
}

/// Per-gene weight/bias/activation/enable mutations. Each connection
/// weight is independently replaced (uniform redraw) or perturbed
/// (Gaussian, then clamped into range); biases of non-input nodes are
/// perturbed the same way; activations of non-input nodes are resampled
/// from the pool; enable flags are toggled, with re-enabling reverted if
/// it would leave a cyclic enabled graph.
pub fn mutate_weights<R: Rng>(
    genome: &Genome,
    rates: &MutationRates,
    activation_pool: &[ActivationKind],
    rng: &mut R,
) -> Genome {
    debug_assert!(!activation_pool.is_empty());
    let mut out = genome.clone();
    let (lo, hi) = rates.weight_range;
    let noise = Normal::new(0.0, rates.perturb_sigma).expect("validated sigma");

    for c in &mut out.connections {
        if rng.random_bool(rates.weight_replace_prob) {
            c.weight = rng.random_range(lo..hi);
        } else if rng.random_bool(rates.weight_perturb_prob) {
            c.weight = (c.weight + noise.sample(rng)).clamp(lo, hi);
        }
    }
    for n in &mut out.nodes {
        if n.kind == NodeKind::Input {
            continue;
        }
        if rng.random_bool(rates.bias_perturb_prob) {
            n.bias = (n.bias + noise.sample(rng)).clamp(lo, hi);
        }
    }
    for n in &mut out.nodes {
        if n.kind == NodeKind::Input {
            continue;
        }
        if rng.random_bool(rates.activation_mutate_prob) {
            n.activation = activation_pool[rng.random_range(0..activation_pool.len())];
        }
    }
    for i in 0..out.connections.len() {
        if rng.random_bool(rates.toggle_enable_prob) {
            if out.connections[i].enabled {
                out.connections[i].enabled = false;
            } else {
                out.connections[i].enabled = true;
                if !out.enabled_graph_is_acyclic() {
                    out.connections[i].enabled = false;
                }
            }
        }
    }
    debug_assert_eq!(out.validate(), Ok(()));
    out
}

/// NEAT crossover. Genes are matched by innovation number: matching genes
/// come from either parent uniformly at random, disjoint and excess genes
/// from the fitter parent (parent `a` on a tie). Where the parents
/// disagree on a gene's enable flag, or a single-parent gene is disabled,
/// the child's gene stays disabled with probability 0.75; where they
/// agree, the shared flag is kept, so `crossover(g, g)` reproduces `g`
/// exactly. The child's nodes are those referenced by inherited
/// connections plus all input and output nodes.
pub fn crossover<R: Rng>(parent_a: &Genome, parent_b: &Genome, rng: &mut R) -> Result<Genome> {
    let fitness_a = parent_a.fitness.ok_or(Error::MissingFitness)?;
    let fitness_b = parent_b.fitness.ok_or(Error::MissingFitness)?;
    let a_is_fitter = fitness_a >= fitness_b;

    let mut connections: Vec<ConnectionGene> = Vec::new();
    let mut enable_conflicts: Vec<usize> = Vec::new();
    let (mut i, mut j) = (0, 0);
    let a_conns = &parent_a.connections;
    let b_conns = &parent_b.connections;
    while i < a_conns.len() && j < b_conns.len() {
        let ga = &a_conns[i];
        let gb = &b_conns[j];
        match ga.innovation.cmp(&gb.innovation) {
            std::cmp::Ordering::Equal => {
                let mut gene = if rng.random_bool(0.5) {
                    ga.clone()
                } else {
                    gb.clone()
                };
                if ga.enabled == gb.enabled {
                    gene.enabled = ga.enabled;
                } else {
                    enable_conflicts.push(connections.len());
                }
                connections.push(gene);
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                if a_is_fitter {
                    if !ga.enabled {
                        enable_conflicts.push(connections.len());
                    }
                    connections.push(ga.clone());
                }
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                if !a_is_fitter {
                    if !gb.enabled {
                        enable_conflicts.push(connections.len());
                    }
                    connections.push(gb.clone());
                }
                j += 1;
            }
        }
    }
    let (tail, take_tail) = if a_is_fitter {
        (&a_conns[i..], true)
    } else {
        (&b_conns[j..], true)
    };
    if take_tail {
        for g in tail {
            if !g.enabled {
                enable_conflicts.push(connections.len());
            }
            connections.push(g.clone());
        }
    }
    for idx in enable_conflicts {
        connections[idx].enabled = !rng.random_bool(0.75);
    }

    let mut needed: HashSet<NodeId> = connections
        .iter()
        .flat_map(|c| [c.source, c.target])
        .collect();
    for parent in [parent_a, parent_b] {
        for n in &parent.nodes {
            if n.kind != NodeKind::Hidden {
                needed.insert(n.id);
            }
        }
    }
    let mut ids: Vec<NodeId> = needed.into_iter().collect();
    ids.sort_unstable();
    let mut nodes = Vec::with_capacity(ids.len());
    for id in ids {
        let gene = match (parent_a.node(id), parent_b.node(id)) {
            (Some(na), Some(nb)) => {
                if na.kind == NodeKind::Input {
                    na.clone()
                } else if rng.random_bool(0.5) {
                    na.clone()
                } else {
                    nb.clone()
                }
            }
            (Some(na), None) => na.clone(),
            (None, Some(nb)) => nb.clone(),
            (None, None) => {
                return Err(Error::Internal(format!(
                    "crossover references node {id} absent from both parents"
                )))
            }
        };
        nodes.push(gene);
    }

    let child = Genome {
        id: 0,
        nodes,
        connections,
        fitness: None,
    };
    debug_assert_eq!(child.validate(), Ok(()));
    Ok(child)
}

/// How many connection genes a genome must have before the compatibility
/// distance normalizes by genome size.
const COMPAT_SIZE_NORMALIZATION_THRESHOLD: usize = 20;

/// Structural-similarity distance
/// `c1 * E / N + c2 * D / N + c3 * mean |dw|` over excess (E), disjoint
/// (D) and matching connection genes, with N the larger gene count (1 when
/// both genomes have fewer than 20 genes).
pub fn compatibility_distance(a: &Genome, b: &Genome, c1: f64, c2: f64, c3: f64) -> f64 {
    let a_conns = &a.connections;
    let b_conns = &b.connections;
    let a_max = a_conns.last().map(|c| c.innovation);
    let b_max = b_conns.last().map(|c| c.innovation);

    let mut matching = 0usize;
    let mut weight_diff = 0.0;
    let mut disjoint = 0usize;
    let mut excess = 0usize;
    let mut classify_unmatched =
        |innovation: Innovation, other_max: Option<Innovation>| match other_max {
            Some(m) if innovation <= m => disjoint += 1,
            _ => excess += 1,
        };

    let (mut i, mut j) = (0, 0);
    while i < a_conns.len() && j < b_conns.len() {
        match a_conns[i].innovation.cmp(&b_conns[j].innovation) {
            std::cmp::Ordering::Equal => {
                matching += 1;
                weight_diff += (a_conns[i].weight - b_conns[j].weight).abs();
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                classify_unmatched(a_conns[i].innovation, b_max);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                classify_unmatched(b_conns[j].innovation, a_max);
                j += 1;
            }
        }
    }
    while i < a_conns.len() {
        classify_unmatched(a_conns[i].innovation, b_max);
        i += 1;
    }
    while j < b_conns.len() {
        classify_unmatched(b_conns[j].innovation, a_max);
        j += 1;
    }

    let larger = a_conns.len().max(b_conns.len());
    if larger == 0 {
        return 0.0;
    }
    let n = if a_conns.len() < COMPAT_SIZE_NORMALIZATION_THRESHOLD
        && b_conns.len() < COMPAT_SIZE_NORMALIZATION_THRESHOLD
    {
        1.0
    } else {
        larger as f64
    };
    let mean_weight_diff = if matching > 0 {
        weight_diff / matching as f64
    } else {
        0.0
    };
    c1 * excess as f64 / n + c2 * disjoint as f64 / n + c3 * mean_weight_diff
}
