//! Labeled feature tables with CSV I/O, stratified splitting,
//! pixel-majority labeling, and the multi-round evaluation protocol.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use crate::ensemble::{evaluate_ensemble, train_ensemble, EnsembleConfig};
use crate::error::{Error, Result};
use crate::haralick::FeatureScaler;
use crate::metrics::RoundSummary;
use crate::network::ClassLabel;
use crate::seed;
use crate::textio::fmt_f64;

/// One labeled sample: a segment id and its feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub segment_id: u64,
    pub features: Vec<f64>,
    pub label: ClassLabel,
}

/// An immutable table of labeled feature vectors with a uniform dimension
/// and unique segment ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    rows: Vec<SampleRow>,
    feature_dimension: usize,
}

impl SampleTable {
    pub fn new(rows: Vec<SampleRow>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyTable)?;
        let feature_dimension = first.features.len();
        let mut ids = HashSet::new();
        for row in &rows {
            if row.features.len() != feature_dimension {
                return Err(Error::Dimension {
                    expected: feature_dimension,
                    got: row.features.len(),
                });
            }
            if !ids.insert(row.segment_id) {
                return Err(Error::DuplicateSegment(row.segment_id));
            }
        }
        Ok(SampleTable {
            rows,
            feature_dimension,
        })
    }

    pub fn rows(&self) -> &[SampleRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_dimension(&self) -> usize {
        self.feature_dimension
    }

    /// `(F count, NF count)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let nf = self
            .rows
            .iter()
            .filter(|r| r.label == ClassLabel::NF)
            .count();
        (self.rows.len() - nf, nf)
    }

    pub fn has_both_classes(&self) -> bool {
        let (f, nf) = self.class_counts();
        f > 0 && nf > 0
    }

    /// A copy of the table with every feature vector scaled.
    pub fn scaled(&self, scaler: &FeatureScaler) -> Result<SampleTable> {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                Ok(SampleRow {
                    segment_id: r.segment_id,
                    features: scaler.apply(&r.features)?,
                    label: r.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SampleTable::new(rows)
    }

    /// Parse the feature CSV format: header
    /// `segment_id,f_0,...,f_{d-1},label`, one sample per line, labels
    /// strictly `F` or `NF`.
    pub fn load_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.ok_or(Error::EmptyTable)?;
        let dimension = parse_feature_header(&header, true)?;
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dimension + 2 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {} fields, got {}", dimension + 2, fields.len()),
                });
            }
            let segment_id: u64 = fields[0].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid segment id `{}`", fields[0]),
            })?;
            let features = parse_features(&fields[1..=dimension], line_no)?;
            let label: ClassLabel = fields[dimension + 1].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!(
                    "unknown label `{}` (expected F or NF)",
                    fields[dimension + 1]
                ),
            })?;
            rows.push(SampleRow {
                segment_id,
                features,
                label,
            });
        }
        SampleTable::new(rows)
    }

    /// Write the feature CSV format losslessly (17 significant digits).
    pub fn save_csv<W: Write>(&self, writer: &mut W) -> Result<()> {
        writer.write_all(feature_header(self.feature_dimension, true).as_bytes())?;
        for row in &self.rows {
            let features: Vec<String> = row.features.iter().map(|&x| fmt_f64(x)).collect();
            writeln!(
                writer,
                "{},{},{}",
                row.segment_id,
                features.join(","),
                row.label
            )?;
        }
        Ok(())
    }
}

/// An unlabeled feature table, the prediction-time input. Accepts both
/// labeled and unlabeled CSVs (labels are dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: Vec<(u64, Vec<f64>)>,
    feature_dimension: usize,
}

impl FeatureTable {
    pub fn rows(&self) -> &[(u64, Vec<f64>)] {
        &self.rows
    }

    pub fn feature_dimension(&self) -> usize {
        self.feature_dimension
    }

    pub fn load_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.ok_or(Error::EmptyTable)?;
        let labeled = header.ends_with(",label");
        let dimension = parse_feature_header(&header, labeled)?;
        let expected_fields = dimension + 1 + usize::from(labeled);
        let mut rows = Vec::new();
        let mut ids = HashSet::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected_fields {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {expected_fields} fields, got {}", fields.len()),
                });
            }
            let segment_id: u64 = fields[0].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid segment id `{}`", fields[0]),
            })?;
            if !ids.insert(segment_id) {
                return Err(Error::DuplicateSegment(segment_id));
            }
            let features = parse_features(&fields[1..=dimension], line_no)?;
            rows.push((segment_id, features));
        }
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        Ok(FeatureTable {
            rows,
            feature_dimension: dimension,
        })
    }

    /// Write the unlabeled variant of the feature CSV.
    pub fn save_csv<W: Write>(&self, writer: &mut W) -> Result<()> {
        writer.write_all(feature_header(self.feature_dimension, false).as_bytes())?;
        for (segment_id, features) in &self.rows {
            let features: Vec<String> = features.iter().map(|&x| fmt_f64(x)).collect();
            writeln!(writer, "{},{}", segment_id, features.join(","))?;
        }
        Ok(())
    }
}

fn feature_header(dimension: usize, labeled: bool) -> String {
    let mut header = String::from("segment_id");
    for d in 0..dimension {
        header.push_str(&format!(",f_{d}"));
    }
    if labeled {
        header.push_str(",label");
    }
    header.push('\n');
    header
}

fn parse_feature_header(header: &str, labeled: bool) -> Result<usize> {
    let fields: Vec<&str> = header.split(',').collect();
    let bad = |msg: String| Error::Parse { line: 1, msg };
    let min_fields = 2 + usize::from(labeled);
    if fields.len() < min_fields || fields[0] != "segment_id" {
        return Err(bad(
            "header must be `segment_id,f_0,...,f_{d-1}[,label]`".into()
        ));
    }
    if labeled && *fields.last().unwrap() != "label" {
        return Err(bad("header must end with `label`".into()));
    }
    let feature_fields = &fields[1..fields.len() - usize::from(labeled)];
    for (d, f) in feature_fields.iter().enumerate() {
        if *f != format!("f_{d}") {
            return Err(bad(format!("expected header column `f_{d}`, got `{f}`")));
        }
    }
    Ok(feature_fields.len())
}

fn parse_features(fields: &[&str], line_no: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid feature value `{f}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite feature value `{f}`"),
                });
            }
            Ok(v)
        })
        .collect()
}

/// Parameters of a stratified train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Always true; per-class proportions are maintained by construction.
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction,
            seed,
            stratified: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction = {} is not in (0, 1)",
                self.train_fraction
            )));
        }
        if !self.stratified {
            return Err(Error::Config(
                "only stratified splitting is supported".into(),
            ));
        }
        Ok(())
    }
}

/// Split per class: round(train_fraction * count) rows (half up) drawn
/// uniformly without replacement into the training side, the rest into
/// the test side. Row order within each side follows the input table.
pub fn stratified_split(
    table: &SampleTable,
    spec: &SplitSpec,
) -> Result<(SampleTable, SampleTable)> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let mut in_train = vec![false; table.len()];
    for class in ClassLabel::ALL {
        let indices: Vec<usize> = table
            .rows()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == class)
            .map(|(i, _)| i)
            .collect();
        if indices.len() < 2 {
            return Err(Error::ClassTooSmall(class.name()));
        }
        let take = ((spec.train_fraction * indices.len() as f64) + 0.5).floor() as usize;
        let take = take.min(indices.len());
        for pick in rand::seq::index::sample(&mut rng, indices.len(), take) {
            in_train[indices[pick]] = true;
        }
    }
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (i, row) in table.rows().iter().enumerate() {
        if in_train[i] {
            train_rows.push(row.clone());
        } else {
            test_rows.push(row.clone());
        }
    }
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::Config(format!(
            "train_fraction = {} leaves one side of the split empty",
            spec.train_fraction
        )));
    }
    Ok((SampleTable::new(train_rows)?, SampleTable::new(test_rows)?))
}

/// Segment label from its pixel labels: the strictly more frequent class;
/// an exact tie resolves to NF (flagging possible deforestation is the
/// safer error for this application).
pub fn majority_label(pixel_labels: &[ClassLabel]) -> Result<ClassLabel> {
    if pixel_labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    let forest = pixel_labels.iter().filter(|l| **l == ClassLabel::F).count();
    let non_forest = pixel_labels.len() - forest;
    Ok(if forest > non_forest {
        ClassLabel::F
    } else {
        ClassLabel::NF
    })
}

/// Seeds of a multi-round protocol; each round trains a fresh ensemble
/// with that round's seed as master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundProtocol {
    round_seeds: Vec<u64>,
}

impl Default for RoundProtocol {
    fn default() -> Self {
        RoundProtocol {
            round_seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl RoundProtocol {
    pub fn new(round_seeds: Vec<u64>) -> Result<Self> {
        if round_seeds.is_empty() {
            return Err(Error::Config("protocol needs at least one round".into()));
        }
        Ok(RoundProtocol { round_seeds })
    }

    pub fn n_rounds(&self) -> usize {
        self.round_seeds.len()
    }

    pub fn round_seeds(&self) -> &[u64] {
        &self.round_seeds
    }
}

/// Scores of one protocol round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundScore {
    pub round: usize,
    pub seed: u64,
    pub ensemble_balanced_accuracy: f64,
    pub member_mean: f64,
    pub member_std: f64,
}

/// Per-round scores plus the summary over the ensemble scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub rounds: Vec<RoundScore>,
    pub summary: RoundSummary,
    /// True when only one round ran: min = mean = max and the standard
    /// deviation is reported as 0.0 by convention.
    pub degenerate_std: bool,
}

/// Run the protocol: round i trains an ensemble with master seed
/// `round_seeds[i]` on the fixed training table and scores it on the
/// fixed test table. Results are a pure function of (seeds, config, data).
pub fn run_protocol(
    protocol: &RoundProtocol,
    cfg: &EnsembleConfig,
    train: &SampleTable,
    test: &SampleTable,
) -> Result<ProtocolResult> {
    let mut rounds = Vec::with_capacity(protocol.n_rounds());
    for (i, &round_seed) in protocol.round_seeds().iter().enumerate() {
        let round_cfg = EnsembleConfig {
            master_seed: round_seed,
            ..cfg.clone()
        };
        let model = train_ensemble(&round_cfg, train)?;
        let mut predict_rng = seed::rng(seed::derive(round_seed, seed::STREAM_PREDICT));
        let eval = evaluate_ensemble(&model, test, &mut predict_rng)?;
        rounds.push(RoundScore {
            round: i + 1,
            seed: round_seed,
            ensemble_balanced_accuracy: eval.ensemble_balanced_accuracy,
            member_mean: eval.member_mean,
            member_std: eval.member_std,
        });
    }
    let scores: Vec<f64> = rounds
        .iter()
        .map(|r| r.ensemble_balanced_accuracy)
        .collect();
    let (summary, degenerate_std) = if scores.len() >= 2 {
        (RoundSummary::from_scores(&scores)?, false)
    } else {
        let only = scores[0];
        (
            RoundSummary {
                mean: only,
                std: 0.0,
                min: only,
                max: only,
            },
            true,
        )
    };
    Ok(ProtocolResult {
        rounds,
        summary,
        degenerate_std,
    })
}
