//! Population lifecycle: speciation with fitness sharing, reproduction
//! with elitism and stagnation, and the generation loop. Fitness is the
//! balanced accuracy of a genome's phenotype on the training table.
//!
//! A whole run is a deterministic function of `(config, training table)`:
//! one seeded generator drives every random decision in a fixed order, and
//! the only parallel section (fitness evaluation) is pure.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::activation::ActivationKind;
use crate::dataset::SampleTable;
use crate::error::{Error, Result};
use crate::genome::{
    compatibility_distance, crossover, initial_genome, mutate_add_connection, mutate_add_node,
    mutate_weights, Genome, InnovationRegistry, MutationRates,
};
use crate::metrics::ConfusionMatrix;
use crate::seed;
use crate::textio::fmt_f64;

/// Coefficients of the compatibility distance used for speciation.
pub const COMPATIBILITY_COEFFICIENTS: (f64, f64, f64) = (1.0, 1.0, 0.4);

/// Parameters of one evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub max_generations: u32,
    /// Stop as soon as the best fitness reaches this value.
    pub fitness_target: f64,
    pub activation_pool: Vec<ActivationKind>,
    /// Hidden nodes in the fully-connected initial topology.
    pub hidden_count: usize,
    pub compatibility_threshold: f64,
    /// Number of best species protected from stagnation removal.
    pub species_elitism: usize,
    /// Members copied unchanged into the next generation, per species.
    pub elites_per_species: usize,
    /// Fraction of each species (by fitness) eligible as parents.
    pub survival_fraction: f64,
    /// Generations without improvement before a species is removed.
    pub stagnation_limit: u32,
    pub mutation: MutationRates,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: 200,
            max_generations: 75,
            fitness_target: 1.0,
            activation_pool: ActivationKind::ALL.to_vec(),
            hidden_count: 8,
            compatibility_threshold: 3.0,
            species_elitism: 2,
            elites_per_species: 2,
            survival_fraction: 0.2,
            stagnation_limit: 15,
            mutation: MutationRates::default(),
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config(format!(
                "population_size = {} must be at least 2",
                self.population_size
            )));
        }
        if self.max_generations == 0 {
            return Err(Error::Config("max_generations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.fitness_target) {
            return Err(Error::Config(format!(
                "fitness_target = {} is not in [0, 1]",
                self.fitness_target
            )));
        }
        if self.activation_pool.is_empty() {
            return Err(Error::EmptyActivationPool);
        }
        let mut sorted = self.activation_pool.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.activation_pool.len() {
            return Err(Error::Config("activation_pool has duplicates".into()));
        }
        if !(self.compatibility_threshold > 0.0) {
            return Err(Error::Config(format!(
                "compatibility_threshold = {} must be positive",
                self.compatibility_threshold
            )));
        }
        if !(self.survival_fraction > 0.0 && self.survival_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "survival_fraction = {} is not in (0, 1]",
                self.survival_fraction
            )));
        }
        self.mutation.validate()
    }

    /// Fixed-order textual form of every field, the basis of the config
    /// digest stored in model files.
    pub fn canonical_string(&self) -> String {
        let pool: Vec<&str> = self.activation_pool.iter().map(|a| a.name()).collect();
        format!(
            "population_size={};max_generations={};fitness_target={};activation_pool={};\
             hidden_count={};compatibility_threshold={};species_elitism={};\
             elites_per_species={};survival_fraction={};stagnation_limit={};\
             weight_perturb_prob={};weight_replace_prob={};bias_perturb_prob={};\
             add_connection_prob={};add_node_prob={};activation_mutate_prob={};\
             toggle_enable_prob={};perturb_sigma={};weight_range={},{};seed={}",
            self.population_size,
            self.max_generations,
            fmt_f64(self.fitness_target),
            pool.join(","),
            self.hidden_count,
            fmt_f64(self.compatibility_threshold),
            self.species_elitism,
            self.elites_per_species,
            fmt_f64(self.survival_fraction),
            self.stagnation_limit,
            fmt_f64(self.mutation.weight_perturb_prob),
            fmt_f64(self.mutation.weight_replace_prob),
            fmt_f64(self.mutation.bias_perturb_prob),
            fmt_f64(self.mutation.add_connection_prob),
            fmt_f64(self.mutation.add_node_prob),
            fmt_f64(self.mutation.activation_mutate_prob),
            fmt_f64(self.mutation.toggle_enable_prob),
            fmt_f64(self.mutation.perturb_sigma),
            fmt_f64(self.mutation.weight_range.0),
            fmt_f64(self.mutation.weight_range.1),
            self.seed
        )
    }
}

/// A niche of structurally similar genomes.
#[derive(Debug, Clone)]
pub struct Species {
    pub id: u32,
    pub representative: Genome,
    pub members: Vec<Genome>,
    pub best_fitness_ever: f64,
    pub last_improved: u32,
}

/// The population state between generations.
#[derive(Debug, Clone)]
pub struct Population {
    pub generation: u32,
    pub species: Vec<Species>,
    pub best_genome_so_far: Genome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TargetReached,
    GenerationLimit,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::TargetReached => "target_reached",
            StopReason::GenerationLimit => "generation_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationEntry {
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub n_species: usize,
}

/// Per-generation statistics of a finished run. Equality ignores the wall
/// time, so reports from identical seeded runs compare equal.
#[derive(Debug, Clone)]
pub struct EvolutionReport {
    pub entries: Vec<GenerationEntry>,
    pub stop_reason: StopReason,
    pub elapsed: Duration,
}

impl PartialEq for EvolutionReport {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.stop_reason == other.stop_reason
    }
}

impl EvolutionReport {
    /// Delimiter-separated table: `generation,best_fitness,mean_fitness,n_species`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("generation,best_fitness,mean_fitness,n_species\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.generation, e.best_fitness, e.mean_fitness, e.n_species
            ));
        }
        out
    }
}

/// Balanced accuracy of the genome's phenotype on the training table,
/// stored into the genome as its fitness.
pub fn evaluate_fitness(genome: &mut Genome, train: &SampleTable) -> Result<f64> {
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let network = genome.phenotype()?;
    let mut cm = ConfusionMatrix::default();
    let mut scratch = Vec::new();
    for row in train.rows() {
        let predicted = network.classify_scratch(&row.features, &mut scratch)?;
        cm.record(row.label, predicted);
    }
    let fitness = cm.balanced_accuracy()?;
    genome.set_fitness(fitness);
    Ok(fitness)
}

/// Assign each genome to the first species (in id order) whose
/// representative lies within `threshold`, founding a new species when
/// none does. Emptied species are dropped and each surviving species
/// re-chooses its representative uniformly from its new members.
pub fn speciate<R: Rng>(
    genomes: Vec<Genome>,
    previous: &[Species],
    threshold: f64,
    rng: &mut R,
) -> Vec<Species> {
    let (c1, c2, c3) = COMPATIBILITY_COEFFICIENTS;
    let mut species: Vec<Species> = previous
        .iter()
        .map(|s| Species {
            id: s.id,
            representative: s.representative.clone(),
            members: Vec::new(),
            best_fitness_ever: s.best_fitness_ever,
            last_improved: s.last_improved,
        })
        .collect();
    species.sort_by_key(|s| s.id);
    let mut next_id = species.iter().map(|s| s.id + 1).max().unwrap_or(0);

    for genome in genomes {
        let found = species.iter().position(|s| {
            compatibility_distance(&genome, &s.representative, c1, c2, c3) <= threshold
        });
        match found {
            Some(i) => species[i].members.push(genome),
            None => {
                let representative = genome.clone();
                species.push(Species {
                    id: next_id,
                    representative,
                    members: vec![genome],
                    best_fitness_ever: f64::NEG_INFINITY,
                    last_improved: 0,
                });
                next_id += 1;
            }
        }
    }
    species.retain(|s| !s.members.is_empty());
    for s in &mut species {
        s.representative = s.members[rng.random_range(0..s.members.len())].clone();
    }
    species
}

/// Fitness sharing: each member's fitness divided by the species size.
pub fn adjusted_fitness(species: &Species) -> Vec<f64> {
    let size = species.members.len() as f64;
    species
        .members
        .iter()
        .map(|g| g.fitness().unwrap_or(0.0) / size)
        .collect()
}

fn member_fitness(genome: &Genome) -> Result<f64> {
    genome
        .fitness()
        .ok_or_else(|| Error::Internal("reproduce called with unevaluated genomes".into()))
}

/// Offspring quotas by largest-remainder rounding of the given shares so
/// they sum exactly to `total`.
fn largest_remainder_quotas(shares: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    if sum <= 0.0 {
        let k = shares.len();
        return (0..k)
            .map(|i| total / k + usize::from(i < total % k))
            .collect();
    }
    let exact: Vec<f64> = shares.iter().map(|s| total as f64 * s / sum).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..total.saturating_sub(assigned) {
        quotas[order[i % order.len()]] += 1;
    }
    quotas
}

/// Produce the next generation: update stagnation bookkeeping, remove
/// stagnant species (always keeping the `species_elitism` best), copy
/// per-species elites unchanged, and breed the remaining quota from each
/// species' top `survival_fraction` by crossover plus mutation. The
/// result always holds exactly `population_size` genomes.
pub fn reproduce<R: Rng>(
    population: &Population,
    cfg: &EvolutionConfig,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) -> Result<Population> {
    let generation = population.generation;
    let mut species: Vec<Species> = population.species.clone();
    species.sort_by_key(|s| s.id);

    let mut current_best = Vec::with_capacity(species.len());
    for s in &mut species {
        let mut best = f64::NEG_INFINITY;
        for m in &s.members {
            best = best.max(member_fitness(m)?);
        }
        if best > s.best_fitness_ever {
            s.best_fitness_ever = best;
            s.last_improved = generation;
        }
        current_best.push(best);
    }

    let mut ranking: Vec<usize> = (0..species.len()).collect();
    ranking.sort_by(|&a, &b| {
        current_best[b]
            .partial_cmp(&current_best[a])
            .unwrap()
            .then(species[a].id.cmp(&species[b].id))
    });
    let protected: Vec<u32> = ranking
        .iter()
        .take(cfg.species_elitism)
        .map(|&i| species[i].id)
        .collect();

    let mut survivors: Vec<(Species, f64)> = Vec::new();
    for (s, best) in species.into_iter().zip(current_best) {
        let stagnant = generation.saturating_sub(s.last_improved) > cfg.stagnation_limit;
        if protected.contains(&s.id) || !stagnant {
            survivors.push((s, best));
        }
    }
    if survivors.is_empty() {
        return Err(Error::Extinction);
    }

    let shares: Vec<f64> = survivors
        .iter()
        .map(|(s, _)| adjusted_fitness(s).iter().sum())
        .collect();
    let mut quotas = largest_remainder_quotas(&shares, cfg.population_size);

    // The best surviving species must breed: steal one slot from the
    // largest quota if rounding starved it.
    let best_idx = (0..survivors.len())
        .max_by(|&a, &b| {
            survivors[a]
                .1
                .partial_cmp(&survivors[b].1)
                .unwrap()
                .then(survivors[b].0.id.cmp(&survivors[a].0.id))
        })
        .expect("non-empty survivors");
    if quotas[best_idx] == 0 {
        let donor = (0..quotas.len())
            .max_by(|&a, &b| quotas[a].cmp(&quotas[b]).then(b.cmp(&a)))
            .expect("non-empty quotas");
        quotas[donor] -= 1;
        quotas[best_idx] += 1;
    }

    let mut next_species = Vec::with_capacity(survivors.len());
    for ((mut s, _), quota) in survivors.into_iter().zip(quotas) {
        // Highest fitness first, ties by creation id.
        s.members.sort_by(|a, b| {
            b.fitness()
                .partial_cmp(&a.fitness())
                .unwrap()
                .then(a.id.cmp(&b.id))
        });
        let mut offspring = Vec::with_capacity(quota);
        let elite_count = cfg.elites_per_species.min(quota).min(s.members.len());
        for elite in &s.members[..elite_count] {
            offspring.push(elite.clone());
        }
        if offspring.len() < quota {
            let pool_size = ((cfg.survival_fraction * s.members.len() as f64).ceil() as usize)
                .clamp(1, s.members.len());
            let pool = &s.members[..pool_size];
            while offspring.len() < quota {
                let parent_a = &pool[rng.random_range(0..pool.len())];
                let parent_b = &pool[rng.random_range(0..pool.len())];
                let mut child = crossover(parent_a, parent_b, rng)?;
                child.id = registry.alloc_genome_id();
                child = mutate_weights(&child, &cfg.mutation, &cfg.activation_pool, rng);
                if rng.random_bool(cfg.mutation.add_node_prob) {
                    child = mutate_add_node(&child, registry, &cfg.activation_pool, rng);
                }
                if rng.random_bool(cfg.mutation.add_connection_prob) {
                    child = mutate_add_connection(&child, registry, cfg.mutation.weight_range, rng);
                }
                offspring.push(child);
            }
        }
        s.members = offspring;
        next_species.push(s);
    }

    Ok(Population {
        generation: generation + 1,
        species: next_species,
        best_genome_so_far: population.best_genome_so_far.clone(),
    })
}

struct BestTracker {
    genome: Genome,
    fitness: f64,
    generation: u32,
}

impl BestTracker {
    fn consider(&mut self, genome: &Genome, generation: u32) {
        let fitness = genome.fitness().expect("evaluated");
        let better = fitness > self.fitness
            || (fitness == self.fitness
                && (generation, genome.id) < (self.generation, self.genome.id));
        if better {
            self.genome = genome.clone();
            self.fitness = fitness;
            self.generation = generation;
        }
    }
}

/// Run the initialize -> evaluate -> speciate -> reproduce loop until the
/// fitness target is reached or the generation cap is hit. Returns the
/// best genome ever seen (ties broken by earliest generation, then lowest
/// genome id) together with the run report.
pub fn evolve(cfg: &EvolutionConfig, train: &SampleTable) -> Result<(Genome, EvolutionReport)> {
    cfg.validate()?;
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let start = Instant::now();
    let mut rng = seed::rng(cfg.seed);
    let input_count = train.feature_dimension();
    let mut registry = InnovationRegistry::primed(input_count, cfg.hidden_count, 1);

    let mut genomes = Vec::with_capacity(cfg.population_size);
    for _ in 0..cfg.population_size {
        let mut g = initial_genome(
            input_count,
            cfg.hidden_count,
            1,
            &cfg.activation_pool,
            cfg.mutation.weight_range,
            &mut rng,
        )?;
        g.id = registry.alloc_genome_id();
        genomes.push(g);
    }

    let mut prev_species: Vec<Species> = Vec::new();
    let mut best: Option<BestTracker> = None;
    let mut entries = Vec::new();
    let stop_reason;

    let mut generation = 1u32;
    loop {
        genomes
            .par_iter_mut()
            .try_for_each(|g| evaluate_fitness(g, train).map(|_| ()))?;

        for g in &genomes {
            match &mut best {
                Some(tracker) => tracker.consider(g, generation),
                None => {
                    best = Some(BestTracker {
                        fitness: g.fitness().expect("evaluated"),
                        genome: g.clone(),
                        generation,
                    });
                }
            }
        }
        let tracker = best.as_mut().expect("population non-empty");

        let generation_best = genomes
            .iter()
            .map(|g| g.fitness().expect("evaluated"))
            .fold(f64::NEG_INFINITY, f64::max);
        let mean_fitness = genomes
            .iter()
            .map(|g| g.fitness().expect("evaluated"))
            .sum::<f64>()
            / genomes.len() as f64;

        let species = speciate(
            genomes,
            &prev_species,
            cfg.compatibility_threshold,
            &mut rng,
        );
        entries.push(GenerationEntry {
            generation,
            best_fitness: generation_best,
            mean_fitness,
            n_species: species.len(),
        });

        if tracker.fitness >= cfg.fitness_target {
            stop_reason = StopReason::TargetReached;
            break;
        }
        if generation >= cfg.max_generations {
            stop_reason = StopReason::GenerationLimit;
            break;
        }

        let population = Population {
            generation,
            species,
            best_genome_so_far: tracker.genome.clone(),
        };
        let next = reproduce(&population, cfg, &mut registry, &mut rng)?;
        let mut shells = next.species;
        genomes = shells
            .iter_mut()
            .flat_map(|s| s.members.drain(..))
            .collect();
        prev_species = shells;
        generation += 1;
    }

    let tracker = best.expect("at least one generation evaluated");
    let report = EvolutionReport {
        entries,
        stop_reason,
        elapsed: start.elapsed(),
    };
    Ok((tracker.genome, report))
}
