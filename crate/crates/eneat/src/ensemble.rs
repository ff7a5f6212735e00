//! The ensemble method: diversify n evolution configurations, run n
//! independent evolutions, pool the best networks, and aggregate votes by
//! mode with seeded random tie-breaking.
//!
//! Member runs share nothing but the read-only training table, so they
//! may execute in any order or in parallel; the trained model is
//! independent of the execution schedule.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::activation::ActivationKind;
use crate::dataset::SampleTable;
use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionConfig, EvolutionReport};
use crate::genome::Genome;
use crate::haralick::FeatureScaler;
use crate::metrics::{mean, sample_std, ConfusionMatrix};
use crate::network::{ClassLabel, FeedForwardNetwork};
use crate::seed;

/// Current model file format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Per-member variation ranges: each member draws its population size and
/// an activation subset from these, seeded by its member seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversificationPolicy {
    pub population_sizes: Vec<usize>,
    /// Inclusive bounds on the drawn activation-pool size.
    pub pool_size_range: (usize, usize),
}

impl Default for DiversificationPolicy {
    fn default() -> Self {
        DiversificationPolicy {
            population_sizes: vec![100, 150, 200, 250, 300],
            pool_size_range: (3, ActivationKind::ALL.len()),
        }
    }
}

impl DiversificationPolicy {
    fn validate(&self) -> Result<()> {
        if self.population_sizes.is_empty() {
            return Err(Error::Config("population_sizes is empty".into()));
        }
        if self.population_sizes.iter().any(|&p| p < 2) {
            return Err(Error::Config(
                "every diversified population size must be at least 2".into(),
            ));
        }
        let (lo, hi) = self.pool_size_range;
        if lo < 1 || hi > ActivationKind::ALL.len() || lo > hi {
            return Err(Error::Config(format!(
                "pool_size_range ({lo}, {hi}) must satisfy 1 <= min <= max <= {}",
                ActivationKind::ALL.len()
            )));
        }
        Ok(())
    }
}

/// Configuration of one ensemble training run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_members: usize,
    pub base: EvolutionConfig,
    pub policy: DiversificationPolicy,
    pub master_seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_members: 15,
            base: EvolutionConfig::default(),
            policy: DiversificationPolicy::default(),
            master_seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_members == 0 {
            return Err(Error::Config("n_members must be at least 1".into()));
        }
        self.base.validate()?;
        self.policy.validate()?;
        for cfg in diversify_configs(self) {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// Derive the n member configurations: member i gets a seed split from
/// the master seed, a population size drawn from the policy's choices and
/// an activation subset of policy-bounded size; everything else comes
/// from the base configuration. Deterministic in the config alone.
pub fn diversify_configs(cfg: &EnsembleConfig) -> Vec<EvolutionConfig> {
    (0..cfg.n_members)
        .map(|i| {
            let member_seed = seed::member_seed(cfg.master_seed, i as u64);
            let mut draw = seed::rng(seed::derive(member_seed, seed::STREAM_DIVERSIFY));
            let population_size = cfg.policy.population_sizes
                [draw.random_range(0..cfg.policy.population_sizes.len())];
            let (lo, hi) = cfg.policy.pool_size_range;
            let pool_size = draw.random_range(lo..=hi);
            let mut activation_pool: Vec<ActivationKind> =
                rand::seq::index::sample(&mut draw, ActivationKind::ALL.len(), pool_size)
                    .into_iter()
                    .map(|k| ActivationKind::ALL[k])
                    .collect();
            activation_pool.sort();
            EvolutionConfig {
                population_size,
                activation_pool,
                seed: member_seed,
                ..cfg.base.clone()
            }
        })
        .collect()
}

/// Short digest of an evolution configuration, stored as member metadata.
pub fn config_digest(cfg: &EvolutionConfig) -> String {
    let hash = Sha256::digest(cfg.canonical_string().as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// One trained member: the evolved genome, its phenotype, and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub seed: u64,
    pub config_digest: String,
    pub fitness: f64,
    pub genome: Genome,
    pub network: FeedForwardNetwork,
}

impl EnsembleMember {
    pub fn new(seed: u64, config_digest: String, fitness: f64, genome: Genome) -> Result<Self> {
        let network = genome.phenotype()?;
        Ok(EnsembleMember {
            seed,
            config_digest,
            fitness,
            genome,
            network,
        })
    }
}

/// Vote aggregation rule. Only the mode (majority vote with uniform
/// random tie-breaking) is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    Mode,
}

impl Aggregator {
    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Mode => "mode",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mode" => Ok(Aggregator::Mode),
            other => Err(Error::MalformedModel(format!(
                "unknown aggregator `{other}`"
            ))),
        }
    }
}

/// Vote counts per class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VoteTally {
    counts: [usize; 2],
}

impl VoteTally {
    pub fn new() -> Self {
        VoteTally::default()
    }

    pub fn from_votes<I: IntoIterator<Item = ClassLabel>>(votes: I) -> Self {
        let mut tally = VoteTally::new();
        for v in votes {
            tally.add(v);
        }
        tally
    }

    pub fn add(&mut self, label: ClassLabel) {
        self.counts[label as usize] += 1;
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.counts[label as usize]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// The label with the most votes; an exact tie is resolved uniformly at
/// random among the tied labels using the provided seeded source.
pub fn aggregate<R: Rng>(tally: &VoteTally, rng: &mut R) -> Result<ClassLabel> {
    if tally.total() == 0 {
        return Err(Error::EmptyTally);
    }
    let top = ClassLabel::ALL
        .iter()
        .map(|&l| tally.count(l))
        .max()
        .expect("two labels");
    let tied: Vec<ClassLabel> = ClassLabel::ALL
        .into_iter()
        .filter(|&l| tally.count(l) == top)
        .collect();
    Ok(if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    })
}

/// A trained, immutable ensemble: member networks, the aggregation rule,
/// and the feature scaler fitted on the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub format_version: u32,
    pub input_count: usize,
    pub aggregator: Aggregator,
    pub scaler: FeatureScaler,
    members: Vec<EnsembleMember>,
}

impl EnsembleModel {
    pub fn new(
        input_count: usize,
        aggregator: Aggregator,
        scaler: FeatureScaler,
        members: Vec<EnsembleMember>,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("a model needs at least one member".into()));
        }
        for m in &members {
            if m.network.input_count() != input_count {
                return Err(Error::Dimension {
                    expected: input_count,
                    got: m.network.input_count(),
                });
            }
        }
        if scaler.dimension() != input_count {
            return Err(Error::Dimension {
                expected: input_count,
                got: scaler.dimension(),
            });
        }
        Ok(EnsembleModel {
            format_version: MODEL_FORMAT_VERSION,
            input_count,
            aggregator,
            scaler,
            members,
        })
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }
}

/// Train the ensemble: fit the scaler on the training features, then run
/// one independent evolution per diversified configuration (in parallel
/// when a rayon pool is available; the result does not depend on the
/// schedule) and pool each run's best genome.
pub fn train_ensemble(cfg: &EnsembleConfig, train: &SampleTable) -> Result<EnsembleModel> {
    train_ensemble_with_reports(cfg, train).map(|(model, _)| model)
}

/// [`train_ensemble`] also returning each member run's report, in member
/// order.
pub fn train_ensemble_with_reports(
    cfg: &EnsembleConfig,
    train: &SampleTable,
) -> Result<(EnsembleModel, Vec<EvolutionReport>)> {
    cfg.validate()?;
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let features: Vec<&[f64]> = train.rows().iter().map(|r| r.features.as_slice()).collect();
    let scaler = FeatureScaler::fit(&features)?;
    let scaled_train = train.scaled(&scaler)?;

    let configs = diversify_configs(cfg);
    let trained: Result<Vec<(EnsembleMember, EvolutionReport)>> = configs
        .par_iter()
        .map(|member_cfg| {
            let (genome, report) = evolve(member_cfg, &scaled_train)?;
            let fitness = genome
                .fitness()
                .ok_or_else(|| Error::Internal("evolve returned an unevaluated genome".into()))?;
            let member =
                EnsembleMember::new(member_cfg.seed, config_digest(member_cfg), fitness, genome)?;
            Ok((member, report))
        })
        .collect();
    let (members, reports): (Vec<_>, Vec<_>) = trained?.into_iter().unzip();
    let model = EnsembleModel::new(train.feature_dimension(), Aggregator::Mode, scaler, members)?;
    Ok((model, reports))
}

/// Classify raw (pre-scaling) features: scale, collect one vote per
/// member, aggregate. With an odd member count no tie is possible and the
/// result is independent of the generator.
pub fn predict<R: Rng>(model: &EnsembleModel, features: &[f64], rng: &mut R) -> Result<ClassLabel> {
    let scaled = model.scaler.apply(features)?;
    let mut tally = VoteTally::new();
    for member in &model.members {
        tally.add(member.network.classify(&scaled)?);
    }
    aggregate(&tally, rng)
}

/// Scores of a model on a labeled table.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEvaluation {
    pub ensemble_confusion: ConfusionMatrix,
    pub ensemble_balanced_accuracy: f64,
    /// Balanced accuracy of each member's own classifications, in member
    /// order; independent of the aggregation generator.
    pub member_accuracies: Vec<f64>,
    pub member_mean: f64,
    pub member_std: f64,
}

/// Score the ensemble and every member on a labeled test table.
pub fn evaluate_ensemble<R: Rng>(
    model: &EnsembleModel,
    test: &SampleTable,
    rng: &mut R,
) -> Result<EnsembleEvaluation> {
    if !test.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let n = model.members.len();
    let mut member_confusions = vec![ConfusionMatrix::default(); n];
    let mut ensemble_confusion = ConfusionMatrix::default();
    let mut scratch = Vec::new();
    for row in test.rows() {
        let scaled = model.scaler.apply(&row.features)?;
        let mut tally = VoteTally::new();
        for (m, member) in model.members.iter().enumerate() {
            let vote = member.network.classify_scratch(&scaled, &mut scratch)?;
            member_confusions[m].record(row.label, vote);
            tally.add(vote);
        }
        let decision = aggregate(&tally, rng)?;
        ensemble_confusion.record(row.label, decision);
    }
    let member_accuracies: Vec<f64> = member_confusions
        .iter()
        .map(|cm| cm.balanced_accuracy())
        .collect::<Result<_>>()?;
    Ok(EnsembleEvaluation {
        ensemble_balanced_accuracy: ensemble_confusion.balanced_accuracy()?,
        ensemble_confusion,
        member_mean: mean(&member_accuracies),
        member_std: sample_std(&member_accuracies),
        member_accuracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SampleRow;
    use crate::genome::{ConnectionGene, NodeGene, NodeKind};
    use crate::network::NodeId;

    fn toy_table(dimension: usize) -> SampleTable {
        // NF iff the first feature is >= 0.5 of its range.
        let rows = (0..20)
            .map(|i| {
                let x = i as f64 / 19.0;
                SampleRow {
                    segment_id: i as u64,
                    features: (0..dimension)
                        .map(|d| if d == 0 { x } else { (i + d) as f64 * 0.05 })
                        .collect(),
                    label: if x >= 0.5 {
                        ClassLabel::NF
                    } else {
                        ClassLabel::F
                    },
                }
            })
            .collect();
        SampleTable::new(rows).unwrap()
    }

    fn tiny_ensemble_cfg(n_members: usize, master_seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            n_members,
            base: EvolutionConfig {
                population_size: 12,
                max_generations: 3,
                hidden_count: 1,
                ..EvolutionConfig::default()
            },
            policy: DiversificationPolicy {
                population_sizes: vec![8, 10, 12],
                pool_size_range: (3, 8),
            },
            master_seed,
        }
    }

    /// A member whose network always outputs `value`.
    fn constant_member(inputs: usize, value: f64) -> EnsembleMember {
        let mut nodes: Vec<NodeGene> = (0..inputs)
            .map(|i| NodeGene {
                id: NodeId(i as u32),
                kind: NodeKind::Input,
                bias: 0.0,
                activation: ActivationKind::Identity,
            })
            .collect();
        nodes.push(NodeGene {
            id: NodeId(inputs as u32),
            kind: NodeKind::Output,
            bias: value,
            activation: ActivationKind::Identity,
        });
        let genome = Genome::from_parts(nodes, Vec::<ConnectionGene>::new(), Some(0.5)).unwrap();
        EnsembleMember::new(0, "0000000000000000".into(), 0.5, genome).unwrap()
    }

    fn constant_model(votes_nf: usize, votes_f: usize) -> EnsembleModel {
        let mut members = Vec::new();
        for _ in 0..votes_nf {
            members.push(constant_member(1, 1.0));
        }
        for _ in 0..votes_f {
            members.push(constant_member(1, 0.0));
        }
        let scaler = FeatureScaler::fit(&[vec![0.0], vec![1.0]]).unwrap();
        EnsembleModel::new(1, Aggregator::Mode, scaler, members).unwrap()
    }

    #[test]
    fn diversify_produces_distinct_seeds_and_valid_pools() {
        let cfg = EnsembleConfig::default();
        let configs = diversify_configs(&cfg);
        assert_eq!(configs.len(), 15);
        for (i, a) in configs.iter().enumerate() {
            assert!((3..=8).contains(&a.activation_pool.len()));
            assert!([100, 150, 200, 250, 300].contains(&a.population_size));
            for b in &configs[i + 1..] {
                assert_ne!(a.seed, b.seed);
            }
        }
        let again = diversify_configs(&cfg);
        assert_eq!(configs, again, "same master seed, same configs");
    }

    #[test]
    fn aggregate_examples() {
        let mut rng = seed::rng(0);
        let mut t = VoteTally::new();
        for _ in 0..8 {
            t.add(ClassLabel::F);
        }
        for _ in 0..7 {
            t.add(ClassLabel::NF);
        }
        assert_eq!(aggregate(&t, &mut rng).unwrap(), ClassLabel::F);

        let unanimous = VoteTally::from_votes(vec![ClassLabel::F; 15]);
        assert_eq!(aggregate(&unanimous, &mut rng).unwrap(), ClassLabel::F);

        assert!(matches!(
            aggregate(&VoteTally::new(), &mut rng),
            Err(Error::EmptyTally)
        ));
    }

    #[test]
    fn tie_break_is_roughly_uniform() {
        let mut tied = VoteTally::new();
        for _ in 0..7 {
            tied.add(ClassLabel::F);
            tied.add(ClassLabel::NF);
        }
        let mut rng = seed::rng(42);
        let mut f_count = 0;
        let draws = 10_000;
        for _ in 0..draws {
            if aggregate(&tied, &mut rng).unwrap() == ClassLabel::F {
                f_count += 1;
            }
        }
        let freq = f_count as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "tie frequency {freq}");
    }

    #[test]
    fn predict_majority_and_unanimity() {
        let mut rng = seed::rng(1);
        // 8 NF votes vs 7 F votes -> NF.
        let model = constant_model(8, 7);
        assert_eq!(predict(&model, &[0.3], &mut rng).unwrap(), ClassLabel::NF);

        // All members identical: ensemble equals a single member.
        let model = constant_model(0, 5);
        assert_eq!(predict(&model, &[0.3], &mut rng).unwrap(), ClassLabel::F);
        let single = &model.members()[0];
        assert_eq!(single.network.classify(&[0.3]).unwrap(), ClassLabel::F);
    }

    #[test]
    fn odd_member_count_is_rng_independent() {
        let model = constant_model(8, 7);
        let a = predict(&model, &[0.9], &mut seed::rng(1)).unwrap();
        let b = predict(&model, &[0.9], &mut seed::rng(999)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = constant_model(3, 2);
        assert!(matches!(
            predict(&model, &[0.1, 0.2], &mut seed::rng(0)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn train_single_member_matches_direct_evolve() {
        let train = toy_table(2);
        let cfg = tiny_ensemble_cfg(1, 77);
        let model = train_ensemble(&cfg, &train).unwrap();
        assert_eq!(model.n_members(), 1);

        let member_cfg = &diversify_configs(&cfg)[0];
        let features: Vec<&[f64]> = train.rows().iter().map(|r| r.features.as_slice()).collect();
        let scaler = FeatureScaler::fit(&features).unwrap();
        let (genome, _) = evolve(member_cfg, &train.scaled(&scaler).unwrap()).unwrap();
        assert_eq!(model.members()[0].genome, genome);
        assert_eq!(model.members()[0].seed, member_cfg.seed);
    }

    #[test]
    fn members_differ_topologically() {
        let train = toy_table(2);
        let cfg = tiny_ensemble_cfg(5, 3);
        let model = train_ensemble(&cfg, &train).unwrap();
        let all_same = model
            .members()
            .iter()
            .all(|m| m.genome.same_structure(&model.members()[0].genome));
        assert!(!all_same, "diversified members collapsed to one topology");
    }

    #[test]
    fn parallel_and_sequential_training_agree() {
        let train = toy_table(2);
        let cfg = tiny_ensemble_cfg(4, 9);
        let sequential = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| train_ensemble(&cfg, &train))
            .unwrap();
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| train_ensemble(&cfg, &train))
            .unwrap();
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn member_independence() {
        // Retraining any single member from its diversified config alone
        // reproduces the pooled member exactly.
        let train = toy_table(2);
        let cfg = tiny_ensemble_cfg(3, 21);
        let model = train_ensemble(&cfg, &train).unwrap();
        let features: Vec<&[f64]> = train.rows().iter().map(|r| r.features.as_slice()).collect();
        let scaled = train
            .scaled(&FeatureScaler::fit(&features).unwrap())
            .unwrap();
        for (i, member_cfg) in diversify_configs(&cfg).iter().enumerate() {
            let (genome, _) = evolve(member_cfg, &scaled).unwrap();
            assert_eq!(model.members()[i].genome, genome, "member {i}");
        }
    }

    #[test]
    fn evaluate_identical_perfect_members() {
        // Members that reproduce the toy rule perfectly: identity output
        // reading feature 0 (scaled to [0,1], threshold 0.5).
        let nodes = vec![
            NodeGene {
                id: NodeId(0),
                kind: NodeKind::Input,
                bias: 0.0,
                activation: ActivationKind::Identity,
            },
            NodeGene {
                id: NodeId(1),
                kind: NodeKind::Output,
                bias: 0.0,
                activation: ActivationKind::Identity,
            },
        ];
        let conns = vec![ConnectionGene {
            innovation: crate::genome::Innovation(0),
            source: NodeId(0),
            target: NodeId(1),
            weight: 1.0,
            enabled: true,
        }];
        let genome = Genome::from_parts(nodes, conns, Some(1.0)).unwrap();
        let members: Vec<EnsembleMember> = (0..15)
            .map(|_| {
                EnsembleMember::new(0, "0000000000000000".into(), 1.0, genome.clone()).unwrap()
            })
            .collect();
        let scaler = FeatureScaler::fit(&[vec![0.0], vec![1.0]]).unwrap();
        let model = EnsembleModel::new(1, Aggregator::Mode, scaler, members).unwrap();

        let rows = (0..10)
            .map(|i| SampleRow {
                segment_id: i,
                features: vec![i as f64 / 9.0],
                label: if i as f64 / 9.0 >= 0.5 {
                    ClassLabel::NF
                } else {
                    ClassLabel::F
                },
            })
            .collect();
        let test = SampleTable::new(rows).unwrap();
        let eval = evaluate_ensemble(&model, &test, &mut seed::rng(0)).unwrap();
        assert_eq!(eval.ensemble_balanced_accuracy, 1.0);
        assert_eq!(eval.member_mean, 1.0);
        assert_eq!(eval.member_std, 0.0);
        assert_eq!(eval.member_accuracies, vec![1.0; 15]);
    }

    #[test]
    fn member_accuracies_independent_of_rng() {
        let train = toy_table(1);
        let model = constant_model(7, 7); // even count: ensemble ties possible
        let a = evaluate_ensemble(&model, &train, &mut seed::rng(5)).unwrap();
        let b = evaluate_ensemble(&model, &train, &mut seed::rng(6)).unwrap();
        assert_eq!(a.member_accuracies, b.member_accuracies);
        assert_eq!(a.member_mean, b.member_mean);
    }

    #[test]
    fn single_class_test_rejected() {
        let model = constant_model(1, 2);
        let rows = (0..4)
            .map(|i| SampleRow {
                segment_id: i,
                features: vec![0.1],
                label: ClassLabel::F,
            })
            .collect();
        let table = SampleTable::new(rows).unwrap();
        assert!(matches!(
            evaluate_ensemble(&model, &table, &mut seed::rng(0)),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn config_digest_is_stable_and_sensitive() {
        let a = EvolutionConfig::default();
        let mut b = EvolutionConfig::default();
        assert_eq!(config_digest(&a), config_digest(&b));
        b.population_size = 201;
        assert_ne!(config_digest(&a), config_digest(&b));
        assert_eq!(config_digest(&a).len(), 16);
    }
}
