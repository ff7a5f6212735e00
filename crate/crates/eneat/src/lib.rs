//! Neuroevolution ensemble classification for imbalanced binary tabular
//! data.
//!
//! The toolkit evolves feed-forward networks with a NEAT-style algorithm
//! (structural and weight mutations, innovation-aligned crossover,
//! speciation with fitness sharing), trains a pool of them under
//! diversified configurations, and combines their votes by majority with
//! seeded random tie-breaking. Balanced accuracy drives both the
//! evolutionary fitness and the evaluation harness. A GLCM/Haralick
//! feature extractor turns labeled pixel segments into the 26-dimensional
//! vectors the networks consume.
//!
//! Everything is deterministic under explicit seeds: independent member
//! runs derive their own seed streams, so sequential and parallel
//! training produce byte-identical serialized models.

pub mod activation;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evolution;
pub mod genome;
pub mod haralick;
pub mod metrics;
pub mod model_file;
pub mod network;
pub mod seed;
pub mod textio;

pub use activation::ActivationKind;
pub use dataset::{FeatureTable, RoundProtocol, SampleRow, SampleTable, SplitSpec};
pub use ensemble::{EnsembleConfig, EnsembleModel, VoteTally};
pub use error::{Error, Result};
pub use evolution::{EvolutionConfig, EvolutionReport};
pub use genome::{Genome, InnovationRegistry, MutationRates};
pub use haralick::{FeatureScaler, SegmentPixels};
pub use metrics::{ConfusionMatrix, RoundSummary};
pub use network::{ClassLabel, FeedForwardNetwork};
