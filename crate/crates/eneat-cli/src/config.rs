//! Flat key=value run configuration with a fixed schema.
//!
//! Keys use section prefixes (`neat.`, `mutation.`, `ensemble.`,
//! `features.`, `protocol.`); unknown keys are rejected. Missing keys fall
//! back to the shipped defaults, so an empty file is a valid
//! configuration. The full schema is listed in the README and mirrored by
//! `configs/default.conf`.

use std::str::FromStr;

use eneat::error::{Error, Result};
use eneat::haralick;
use eneat::EnsembleConfig;

/// Everything a run needs besides the input/output paths (those are
/// command-line arguments).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ensemble: EnsembleConfig,
    pub bands: Vec<String>,
    pub levels: usize,
    pub round_seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ensemble: EnsembleConfig::default(),
            bands: haralick::default_bands(),
            levels: haralick::DEFAULT_LEVELS,
            round_seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl RunConfig {
    /// Parse a configuration file body, validating every key and value
    /// against the schema.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected `key=value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value)
                .map_err(|msg| Error::Parse { line: line_no, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let base = &mut self.ensemble.base;
        match key {
            "neat.population_size" => base.population_size = parse(key, value)?,
            "neat.max_generations" => base.max_generations = parse(key, value)?,
            "neat.fitness_target" => base.fitness_target = parse(key, value)?,
            "neat.activation_pool" => base.activation_pool = parse_list(key, value)?,
            "neat.hidden_count" => base.hidden_count = parse(key, value)?,
            "neat.compatibility_threshold" => base.compatibility_threshold = parse(key, value)?,
            "neat.species_elitism" => base.species_elitism = parse(key, value)?,
            "neat.elites_per_species" => base.elites_per_species = parse(key, value)?,
            "neat.survival_fraction" => base.survival_fraction = parse(key, value)?,
            "neat.stagnation_limit" => base.stagnation_limit = parse(key, value)?,
            "mutation.weight_perturb_prob" => {
                base.mutation.weight_perturb_prob = parse(key, value)?
            }
            "mutation.weight_replace_prob" => {
                base.mutation.weight_replace_prob = parse(key, value)?
            }
            "mutation.bias_perturb_prob" => base.mutation.bias_perturb_prob = parse(key, value)?,
            "mutation.add_connection_prob" => {
                base.mutation.add_connection_prob = parse(key, value)?
            }
            "mutation.add_node_prob" => base.mutation.add_node_prob = parse(key, value)?,
            "mutation.activation_mutate_prob" => {
                base.mutation.activation_mutate_prob = parse(key, value)?
            }
            "mutation.toggle_enable_prob" => base.mutation.toggle_enable_prob = parse(key, value)?,
            "mutation.perturb_sigma" => base.mutation.perturb_sigma = parse(key, value)?,
            "mutation.weight_min" => base.mutation.weight_range.0 = parse(key, value)?,
            "mutation.weight_max" => base.mutation.weight_range.1 = parse(key, value)?,
            "ensemble.n_members" => self.ensemble.n_members = parse(key, value)?,
            "ensemble.master_seed" => self.ensemble.master_seed = parse(key, value)?,
            "ensemble.population_sizes" => {
                self.ensemble.policy.population_sizes = parse_list(key, value)?
            }
            "ensemble.pool_size_min" => self.ensemble.policy.pool_size_range.0 = parse(key, value)?,
            "ensemble.pool_size_max" => self.ensemble.policy.pool_size_range.1 = parse(key, value)?,
            "features.bands" => {
                self.bands = value.split(',').map(|s| s.trim().to_string()).collect()
            }
            "features.levels" => self.levels = parse(key, value)?,
            "protocol.round_seeds" => self.round_seeds = parse_list(key, value)?,
            other => return Err(format!("unknown configuration key `{other}`")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if self.levels < 2 {
            return Err(Error::Config(format!(
                "features.levels = {} must be at least 2",
                self.levels
            )));
        }
        if self.bands.is_empty() {
            return Err(Error::Config("features.bands is empty".into()));
        }
        let mut unique = self.bands.clone();
        unique.sort();
        unique.dedup();
        if unique.len() != self.bands.len() {
            return Err(Error::Config("features.bands has duplicates".into()));
        }
        if self.round_seeds.is_empty() {
            return Err(Error::Config("protocol.round_seeds is empty".into()));
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(|item| parse(key, item.trim()))
        .collect()
}
