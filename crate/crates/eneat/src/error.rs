use thiserror::Error;

/// Errors surfaced by the toolkit.
///
/// Every variant except [`Error::Internal`] and [`Error::Io`] describes a
/// problem with caller-supplied input (bad files, dimension mismatches,
/// invalid configuration); `Internal` marks a broken invariant inside the
/// library itself.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown activation function `{0}`")]
    UnknownActivation(String),

    #[error("unknown class label `{0}` (expected F or NF)")]
    UnknownLabel(String),

    #[error("input vector has length {got}, network expects {expected}")]
    InputLength { expected: usize, got: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("activation pool is empty")]
    EmptyActivationPool,

    #[error("crossover requires fitness on both parents")]
    MissingFitness,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("table contains a single class; both F and NF are required")]
    SingleClass,

    #[error("all species went extinct (every species stagnant with species_elitism = 0)")]
    Extinction,

    #[error("vote tally is empty")]
    EmptyTally,

    #[error("feature vector has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate segment id {0}")]
    DuplicateSegment(u64),

    #[error("table has no rows")]
    EmptyTable,

    #[error("band `{0}` is not declared in the segment file")]
    MissingBand(String),

    #[error("segment {0} has no co-occurring pixel pair for any offset")]
    DegenerateSegment(u64),

    #[error("class `{0}` has fewer than 2 rows; stratified splitting needs at least 2 per class")]
    ClassTooSmall(&'static str),

    #[error("cannot take the majority of an empty label list")]
    EmptyLabels,

    #[error("confusion matrix is missing a class in the truth labels")]
    ClassAbsent,

    #[error("truth and prediction lists differ in length ({truth} vs {predicted})")]
    LabelLength { truth: usize, predicted: usize },

    #[error("need at least 2 scores to summarize, got {0}")]
    TooFewScores(usize),

    #[error("relative gain requires a positive baseline, got {0}")]
    NonPositiveBaseline(f64),

    #[error("model format version {got} is not supported (expected {expected})")]
    UnsupportedVersion { expected: u32, got: u32 },

    #[error("model stream is corrupt: {0}")]
    MalformedModel(String),

    #[error("model checksum mismatch (stream corrupted or edited)")]
    ChecksumMismatch,

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error is attributable to caller input rather than a bug
    /// or an environment failure. CLI layers map this to exit codes.
    pub fn is_user_input(&self) -> bool {
        !matches!(self, Error::Internal(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
