//! GLCM construction over irregular pixel segments and the 13 Haralick
//! texture coefficients, plus min-max feature scaling.
//!
//! Gray levels are 0-based throughout. Logarithms are natural-base with
//! `0 * ln 0 = 0`, and correlation-type features fall back to 0 when a
//! variance or entropy denominator drops below `1e-12`, so every feature
//! is defined for every valid GLCM.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::network::ClassLabel;

/// Default number of quantization levels.
pub const DEFAULT_LEVELS: usize = 16;

/// Default co-occurrence offsets: the four unit directions, accumulated
/// into a single symmetric matrix.
pub const DEFAULT_OFFSETS: [(i64, i64); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

/// Default Landsat-8 band pair (red, shortwave infrared I).
pub fn default_bands() -> Vec<String> {
    vec!["b4".to_string(), "b6".to_string()]
}

/// Number of Haralick coefficients per band.
pub const COEFFICIENTS_PER_BAND: usize = 13;

/// One pixel of a segment: integer grid position plus one intensity per
/// declared band (parallel to `SegmentPixels::bands`).
#[derive(Debug, Clone, PartialEq)]
pub struct Pixel {
    pub row: i64,
    pub col: i64,
    pub values: Vec<f64>,
}

/// An irregular group of pixels treated as one classification unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPixels {
    pub segment_id: u64,
    pub bands: Vec<String>,
    pub pixels: Vec<Pixel>,
    pub label: Option<ClassLabel>,
}

impl SegmentPixels {
    /// Validate coordinate uniqueness and per-pixel band arity.
    pub fn new(
        segment_id: u64,
        bands: Vec<String>,
        pixels: Vec<Pixel>,
        label: Option<ClassLabel>,
    ) -> Result<Self> {
        let mut seen = HashMap::new();
        for p in &pixels {
            if p.values.len() != bands.len() {
                return Err(Error::Internal(format!(
                    "segment {segment_id}: pixel ({}, {}) carries {} values for {} bands",
                    p.row,
                    p.col,
                    p.values.len(),
                    bands.len()
                )));
            }
            if seen.insert((p.row, p.col), ()).is_some() {
                return Err(Error::Internal(format!(
                    "segment {segment_id}: duplicate pixel ({}, {})",
                    p.row, p.col
                )));
            }
        }
        Ok(SegmentPixels {
            segment_id,
            bands,
            pixels,
            label,
        })
    }

    fn band_index(&self, band: &str) -> Result<usize> {
        self.bands
            .iter()
            .position(|b| b == band)
            .ok_or_else(|| Error::MissingBand(band.to_string()))
    }
}

/// Pixels of one segment reduced to quantized gray levels for one band.
#[derive(Debug, Clone)]
pub struct QuantizedPixels {
    pub levels: usize,
    pub pixels: Vec<(i64, i64, usize)>,
}

/// Equal-width binning of `[band min, band max]` over the segment into
/// `levels` bins. A constant band maps every pixel to bin 0; the band
/// maximum is clamped into the top bin.
pub fn quantize(segment: &SegmentPixels, band: &str, levels: usize) -> Result<QuantizedPixels> {
    debug_assert!(levels >= 2);
    let bi = segment.band_index(band)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in &segment.pixels {
        lo = lo.min(p.values[bi]);
        hi = hi.max(p.values[bi]);
    }
    let range = hi - lo;
    let pixels = segment
        .pixels
        .iter()
        .map(|p| {
            let level = if range <= 0.0 {
                0
            } else {
                let bin = ((p.values[bi] - lo) / range * levels as f64).floor() as usize;
                bin.min(levels - 1)
            };
            (p.row, p.col, level)
        })
        .collect();
    Ok(QuantizedPixels { levels, pixels })
}

/// A symmetric, normalized gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    p: Vec<f64>,
}

impl Glcm {
    /// Build directly from a normalized symmetric matrix in row-major
    /// order. Intended for tests and oracles; `glcm` is the production
    /// path.
    pub fn from_matrix(levels: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != levels * levels {
            return Err(Error::Internal(format!(
                "matrix length {} does not match {levels}x{levels}",
                p.len()
            )));
        }
        Ok(Glcm { levels, p })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }
}

/// Accumulate co-occurrence counts of `quantized` pixel pairs over all
/// `offsets` (pairs where both ends lie inside the segment), symmetrize,
/// and normalize to unit mass.
pub fn glcm(segment_id: u64, quantized: &QuantizedPixels, offsets: &[(i64, i64)]) -> Result<Glcm> {
    debug_assert!(!offsets.is_empty());
    let levels = quantized.levels;
    let index: HashMap<(i64, i64), usize> = quantized
        .pixels
        .iter()
        .map(|&(r, c, l)| ((r, c), l))
        .collect();
    let mut counts = vec![0.0f64; levels * levels];
    let mut total = 0.0;
    for &(r, c, level) in &quantized.pixels {
        for &(dr, dc) in offsets {
            if let Some(&neighbor) = index.get(&(r + dr, c + dc)) {
                counts[level * levels + neighbor] += 1.0;
                total += 1.0;
            }
        }
    }
    if total == 0.0 {
        return Err(Error::DegenerateSegment(segment_id));
    }
    // Symmetrize (add the transpose), then normalize to sum 1.
    let mut p = vec![0.0f64; levels * levels];
    for i in 0..levels {
        for j in 0..levels {
            p[i * levels + j] = (counts[i * levels + j] + counts[j * levels + i]) / (2.0 * total);
        }
    }
    Ok(Glcm { levels, p })
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

const DEGENERACY_EPS: f64 = 1e-12;

/// The 13 Haralick coefficients of a GLCM, in the fixed order: angular
/// second moment, contrast, correlation, sum-of-squares variance, inverse
/// difference moment, sum average, sum variance, sum entropy, entropy,
/// difference variance, difference entropy, and the two information
/// measures of correlation. Sum variance is centered on the sum average.
pub fn haralick13(g: &Glcm) -> [f64; 13] {
    let n = g.levels();
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut p_sum = vec![0.0; 2 * n - 1];
    let mut p_diff = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let p = g.at(i, j);
            px[i] += p;
            py[j] += p;
            p_sum[i + j] += p;
            p_diff[i.abs_diff(j)] += p;
        }
    }
    let mu_x: f64 = px.iter().enumerate().map(|(i, &p)| i as f64 * p).sum();
    let mu_y: f64 = py.iter().enumerate().map(|(j, &p)| j as f64 * p).sum();
    let var_x: f64 = px
        .iter()
        .enumerate()
        .map(|(i, &p)| (i as f64 - mu_x).powi(2) * p)
        .sum();
    let var_y: f64 = py
        .iter()
        .enumerate()
        .map(|(j, &p)| (j as f64 - mu_y).powi(2) * p)
        .sum();

    let mut asm = 0.0;
    let mut idm = 0.0;
    let mut entropy = 0.0;
    let mut cross = 0.0;
    let mut variance = 0.0;
    let mut hxy1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = g.at(i, j);
            asm += p * p;
            idm += p / (1.0 + (i as f64 - j as f64).powi(2));
            entropy -= xlnx(p);
            cross += i as f64 * j as f64 * p;
            variance += (i as f64 - mu_x).powi(2) * p;
            if p > 0.0 && px[i] * py[j] > 0.0 {
                hxy1 -= p * (px[i] * py[j]).ln();
            }
        }
    }

    let contrast: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, &p)| (k * k) as f64 * p)
        .sum();
    let sigma = (var_x * var_y).sqrt();
    let correlation = if sigma < DEGENERACY_EPS {
        0.0
    } else {
        (cross - mu_x * mu_y) / sigma
    };

    let sum_average: f64 = p_sum.iter().enumerate().map(|(k, &p)| k as f64 * p).sum();
    let sum_variance: f64 = p_sum
        .iter()
        .enumerate()
        .map(|(k, &p)| (k as f64 - sum_average).powi(2) * p)
        .sum();
    let sum_entropy: f64 = -p_sum.iter().map(|&p| xlnx(p)).sum::<f64>();

    let diff_mean: f64 = p_diff.iter().enumerate().map(|(k, &p)| k as f64 * p).sum();
    let diff_variance: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, &p)| (k as f64 - diff_mean).powi(2) * p)
        .sum();
    let diff_entropy: f64 = -p_diff.iter().map(|&p| xlnx(p)).sum::<f64>();

    let hx: f64 = -px.iter().map(|&p| xlnx(p)).sum::<f64>();
    let hy: f64 = -py.iter().map(|&p| xlnx(p)).sum::<f64>();
    let mut hxy2 = 0.0;
    for &pi in &px {
        for &pj in &py {
            hxy2 -= xlnx(pi * pj);
        }
    }
    let info_corr_1 = if hx.max(hy) < DEGENERACY_EPS {
        0.0
    } else {
        (entropy - hxy1) / hx.max(hy)
    };
    let info_corr_2 = (1.0 - (-2.0 * (hxy2 - entropy)).exp()).max(0.0).sqrt();

    [
        asm,
        contrast,
        correlation,
        variance,
        idm,
        sum_average,
        sum_variance,
        sum_entropy,
        entropy,
        diff_variance,
        diff_entropy,
        info_corr_1,
        info_corr_2,
    ]
}

/// Full descriptor of a segment: 13 coefficients per band, concatenated
/// in the given band order.
pub fn segment_features(
    segment: &SegmentPixels,
    bands: &[String],
    levels: usize,
    offsets: &[(i64, i64)],
) -> Result<Vec<f64>> {
    let mut features = Vec::with_capacity(COEFFICIENTS_PER_BAND * bands.len());
    for band in bands {
        let q = quantize(segment, band, levels)?;
        let g = glcm(segment.segment_id, &q, offsets)?;
        features.extend_from_slice(&haralick13(&g));
    }
    Ok(features)
}

/// Per-dimension min-max scaling fitted on training data. Applying the
/// scaler clamps unseen values into `[0, 1]`; a dimension that was
/// constant during fitting always maps to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyTable)?.as_ref();
        let dim = first.len();
        let mut mins = vec![f64::INFINITY; dim];
        let mut maxs = vec![f64::NEG_INFINITY; dim];
        for v in vectors {
            let v = v.as_ref();
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: v.len(),
                });
            }
            for (d, &x) in v.iter().enumerate() {
                mins[d] = mins[d].min(x);
                maxs[d] = maxs[d].max(x);
            }
        }
        Ok(FeatureScaler { mins, maxs })
    }

    /// Rebuild from stored parameters (model deserialization).
    pub fn from_bounds(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self> {
        if mins.len() != maxs.len() {
            return Err(Error::Dimension {
                expected: mins.len(),
                got: maxs.len(),
            });
        }
        for (d, (&lo, &hi)) in mins.iter().zip(&maxs).enumerate() {
            if hi < lo {
                return Err(Error::MalformedModel(format!(
                    "scaler dimension {d} has max {hi} < min {lo}"
                )));
            }
        }
        Ok(FeatureScaler { mins, maxs })
    }

    pub fn dimension(&self) -> usize {
        self.mins.len()
    }

    pub fn bounds(&self, dim: usize) -> (f64, f64) {
        (self.mins[dim], self.maxs[dim])
    }

    pub fn apply(&self, vector: &[f64]) -> Result<Vec<f64>> {
        if vector.len() != self.mins.len() {
            return Err(Error::Dimension {
                expected: self.mins.len(),
                got: vector.len(),
            });
        }
        Ok(vector
            .iter()
            .enumerate()
            .map(|(d, &x)| {
                let range = self.maxs[d] - self.mins[d];
                if range <= 0.0 {
                    0.0
                } else {
                    ((x - self.mins[d]) / range).clamp(0.0, 1.0)
                }
            })
            .collect())
    }
}

/// Parse a segment pixel file.
///
/// The format is line-oriented and whitespace-separated: a `bands` header
/// naming the bands, optional `label <segment_id> <F|NF>` lines, and one
/// pixel per line as `<segment_id> <row> <col> <intensity per band>`.
/// Blank lines and lines starting with `#` are ignored. Segments are
/// returned in ascending id order.
pub fn read_segments<R: BufRead>(reader: R) -> Result<Vec<SegmentPixels>> {
    let mut bands: Option<Vec<String>> = None;
    let mut pixels: HashMap<u64, Vec<Pixel>> = HashMap::new();
    let mut labels: HashMap<u64, ClassLabel> = HashMap::new();
    let mut order: Vec<u64> = Vec::new();
    let mut coords: HashMap<(u64, i64, i64), usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parse_err = |msg: String| Error::Parse { line: line_no, msg };

        if bands.is_none() {
            if fields[0] != "bands" || fields.len() < 2 {
                return Err(parse_err(
                    "expected a `bands <name>...` header before any data".into(),
                ));
            }
            let names: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
            let mut unique = names.clone();
            unique.sort();
            unique.dedup();
            if unique.len() != names.len() {
                return Err(parse_err("duplicate band name in header".into()));
            }
            bands = Some(names);
            continue;
        }
        let band_count = bands.as_ref().map(Vec::len).unwrap_or(0);

        if fields[0] == "label" {
            if fields.len() != 3 {
                return Err(parse_err("expected `label <segment_id> <F|NF>`".into()));
            }
            let id: u64 = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("invalid segment id `{}`", fields[1])))?;
            let label: ClassLabel = fields[2]
                .parse()
                .map_err(|_| parse_err(format!("invalid label `{}`", fields[2])))?;
            if labels.insert(id, label).is_some() {
                return Err(parse_err(format!("segment {id} labeled twice")));
            }
            continue;
        }

        if fields.len() != 3 + band_count {
            return Err(parse_err(format!(
                "expected segment_id, row, col and {band_count} band intensities, got {} fields",
                fields.len()
            )));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("invalid segment id `{}`", fields[0])))?;
        let row: i64 = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("invalid row `{}`", fields[1])))?;
        let col: i64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("invalid column `{}`", fields[2])))?;
        let mut values = Vec::with_capacity(band_count);
        for f in &fields[3..] {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(format!("invalid intensity `{f}`")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite intensity `{f}`")));
            }
            values.push(v);
        }
        if coords.insert((id, row, col), line_no).is_some() {
            return Err(parse_err(format!(
                "duplicate pixel ({row}, {col}) in segment {id}"
            )));
        }
        if !pixels.contains_key(&id) {
            order.push(id);
        }
        pixels
            .entry(id)
            .or_default()
            .push(Pixel { row, col, values });
    }

    let bands = bands.ok_or(Error::EmptyTable)?;
    if pixels.is_empty() {
        return Err(Error::EmptyTable);
    }
    for id in labels.keys() {
        if !pixels.contains_key(id) {
            return Err(Error::Parse {
                line: 0,
                msg: format!("label given for segment {id} which has no pixels"),
            });
        }
    }
    order.sort_unstable();
    order
        .into_iter()
        .map(|id| {
            SegmentPixels::new(
                id,
                bands.clone(),
                pixels.remove(&id).unwrap(),
                labels.get(&id).copied(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment_from_grid(values: &[&[f64]]) -> SegmentPixels {
        let mut pixels = Vec::new();
        for (r, row) in values.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                pixels.push(Pixel {
                    row: r as i64,
                    col: c as i64,
                    values: vec![v],
                });
            }
        }
        SegmentPixels::new(1, vec!["b4".into()], pixels, None).unwrap()
    }

    #[test]
    fn quantize_rules() {
        let constant = segment_from_grid(&[&[5.0, 5.0], &[5.0, 5.0]]);
        let q = quantize(&constant, "b4", 16).unwrap();
        assert!(q.pixels.iter().all(|&(_, _, l)| l == 0));

        let two_point = segment_from_grid(&[&[0.0, 255.0]]);
        let q = quantize(&two_point, "b4", 2).unwrap();
        let levels: Vec<usize> = q.pixels.iter().map(|&(_, _, l)| l).collect();
        assert_eq!(levels, vec![0, 1]);

        let three = segment_from_grid(&[&[0.0, 100.0, 200.0]]);
        let q = quantize(&three, "b4", 4).unwrap();
        let levels: Vec<usize> = q.pixels.iter().map(|&(_, _, l)| l).collect();
        assert_eq!(levels, vec![0, 2, 3]);
    }

    #[test]
    fn quantize_missing_band() {
        let seg = segment_from_grid(&[&[1.0]]);
        assert!(matches!(
            quantize(&seg, "b6", 16),
            Err(Error::MissingBand(b)) if b == "b6"
        ));
    }

    #[test]
    fn glcm_two_column_example() {
        // [[0,1],[0,1]] with a single horizontal offset: two 0->1 pairs,
        // symmetrized to P(0,1) = P(1,0) = 0.5.
        let seg = segment_from_grid(&[&[0.0, 1.0], &[0.0, 1.0]]);
        let q = quantize(&seg, "b4", 2).unwrap();
        let g = glcm(1, &q, &[(0, 1)]).unwrap();
        assert!((g.at(0, 1) - 0.5).abs() < 1e-15);
        assert!((g.at(1, 0) - 0.5).abs() < 1e-15);
        assert_eq!(g.at(0, 0), 0.0);
        assert_eq!(g.at(1, 1), 0.0);
    }

    #[test]
    fn glcm_constant_segment() {
        let seg = segment_from_grid(&[&[3.0, 3.0], &[3.0, 3.0]]);
        let q = quantize(&seg, "b4", 8).unwrap();
        let g = glcm(1, &q, &DEFAULT_OFFSETS).unwrap();
        assert_eq!(g.at(0, 0), 1.0);
    }

    #[test]
    fn glcm_isolated_pixels_degenerate() {
        let far_apart = SegmentPixels::new(
            9,
            vec!["b4".into()],
            vec![
                Pixel {
                    row: 0,
                    col: 0,
                    values: vec![1.0],
                },
                Pixel {
                    row: 100,
                    col: 100,
                    values: vec![2.0],
                },
            ],
            None,
        )
        .unwrap();
        let q = quantize(&far_apart, "b4", 4).unwrap();
        assert!(matches!(
            glcm(9, &q, &DEFAULT_OFFSETS),
            Err(Error::DegenerateSegment(9))
        ));
    }

    #[test]
    fn glcm_symmetric_unit_mass() {
        let seg = segment_from_grid(&[
            &[0.0, 3.0, 7.0, 1.0],
            &[9.0, 2.0, 4.0, 8.0],
            &[5.0, 6.0, 0.0, 2.0],
        ]);
        let q = quantize(&seg, "b4", 4).unwrap();
        let g = glcm(1, &q, &DEFAULT_OFFSETS).unwrap();
        let mut mass = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                mass += g.at(i, j);
                assert!((g.at(i, j) - g.at(j, i)).abs() < 1e-15);
            }
        }
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haralick_checkerboard_values() {
        let g = Glcm::from_matrix(2, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let f = haralick13(&g);
        assert!((f[0] - 0.5).abs() < 1e-12, "ASM");
        assert!((f[1] - 1.0).abs() < 1e-12, "contrast");
        assert!((f[8] - 2f64.ln()).abs() < 1e-12, "entropy");
    }

    #[test]
    fn haralick_constant_glcm() {
        let mut p = vec![0.0; 16];
        p[0] = 1.0;
        let g = Glcm::from_matrix(4, p).unwrap();
        let f = haralick13(&g);
        assert_eq!(f[0], 1.0, "ASM");
        assert_eq!(f[1], 0.0, "contrast");
        assert_eq!(f[2], 0.0, "correlation degenerates to 0");
        assert_eq!(f[8], 0.0, "entropy");
        assert_eq!(f[12], 0.0, "info correlation 2");
    }

    #[test]
    fn haralick_finite_on_random_glcms() {
        use rand::Rng;
        let mut rng = crate::seed::rng(11);
        for _ in 0..200 {
            let n = rng.random_range(2..8usize);
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.random();
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
            let total: f64 = m.iter().sum();
            for v in &mut m {
                *v /= total;
            }
            let g = Glcm::from_matrix(n, m).unwrap();
            for (k, f) in haralick13(&g).iter().enumerate() {
                assert!(f.is_finite(), "f{} not finite", k + 1);
            }
        }
    }

    #[test]
    fn segment_feature_lengths_and_band_order() {
        let mut pixels = Vec::new();
        for r in 0..4i64 {
            for c in 0..4i64 {
                let v = (r * 4 + c) as f64;
                pixels.push(Pixel {
                    row: r,
                    col: c,
                    values: vec![v, v],
                });
            }
        }
        let seg = SegmentPixels::new(7, vec!["b4".into(), "b6".into()], pixels, None).unwrap();
        let two = segment_features(&seg, &seg.bands, 4, &DEFAULT_OFFSETS).unwrap();
        assert_eq!(two.len(), 26);
        let one = segment_features(&seg, &["b4".to_string()], 4, &DEFAULT_OFFSETS).unwrap();
        assert_eq!(one.len(), 13);
        // Identical band values: first 13 entries equal last 13.
        assert_eq!(&two[..13], &two[13..]);
        assert_eq!(&two[..13], &one[..]);
    }

    #[test]
    fn translation_and_intensity_shift_invariance() {
        let base = segment_from_grid(&[&[1.0, 4.0, 2.0], &[8.0, 3.0, 5.0]]);
        let f_base = segment_features(&base, &base.bands, 4, &DEFAULT_OFFSETS).unwrap();

        let shifted_coords = SegmentPixels::new(
            1,
            base.bands.clone(),
            base.pixels
                .iter()
                .map(|p| Pixel {
                    row: p.row + 100,
                    col: p.col - 37,
                    values: p.values.clone(),
                })
                .collect(),
            None,
        )
        .unwrap();
        assert_eq!(
            segment_features(&shifted_coords, &base.bands, 4, &DEFAULT_OFFSETS).unwrap(),
            f_base
        );

        let shifted_intensity = SegmentPixels::new(
            1,
            base.bands.clone(),
            base.pixels
                .iter()
                .map(|p| Pixel {
                    row: p.row,
                    col: p.col,
                    values: p.values.iter().map(|v| v + 250.0).collect(),
                })
                .collect(),
            None,
        )
        .unwrap();
        assert_eq!(
            segment_features(&shifted_intensity, &base.bands, 4, &DEFAULT_OFFSETS).unwrap(),
            f_base
        );
    }

    #[test]
    fn scaler_rules() {
        let scaler = FeatureScaler::fit(&[vec![2.0, 7.0, 1.0], vec![4.0, 7.0, 3.0]]).unwrap();
        let scaled = scaler.apply(&[3.0, 7.0, 0.0]).unwrap();
        assert_eq!(scaled[0], 0.5);
        assert_eq!(scaled[1], 0.0, "constant dimension maps to 0");
        assert_eq!(scaled[2], 0.0, "below-min clamps to 0");
        let scaled = scaler.apply(&[100.0, 7.0, 3.0]).unwrap();
        assert_eq!(scaled[0], 1.0, "above-max clamps to 1");
        assert!(matches!(
            scaler.apply(&[1.0]),
            Err(Error::Dimension {
                expected: 3,
                got: 1
            })
        ));
    }

    #[test]
    fn read_segments_happy_and_errors() {
        let text = "# demo\nbands b4 b6\nlabel 2 NF\n2 0 0 1.0 9.0\n2 0 1 2.0 8.0\n1 5 5 3.0 7.0\n1 5 6 4.0 6.0\n";
        let segs = read_segments(text.as_bytes()).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].segment_id, 1);
        assert_eq!(segs[0].label, None);
        assert_eq!(segs[1].segment_id, 2);
        assert_eq!(segs[1].label, Some(ClassLabel::NF));
        assert_eq!(segs[1].pixels.len(), 2);

        let missing_header = "1 0 0 1.0\n";
        assert!(matches!(
            read_segments(missing_header.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));

        let ragged = "bands b4 b6\n1 0 0 1.0\n";
        assert!(matches!(
            read_segments(ragged.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));

        let bad_label = "bands b4\nlabel 1 X\n1 0 0 1.0\n";
        assert!(matches!(
            read_segments(bad_label.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));

        let dup_pixel = "bands b4\n1 0 0 1.0\n1 0 0 2.0\n";
        assert!(matches!(
            read_segments(dup_pixel.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));

        assert!(matches!(
            read_segments("".as_bytes()),
            Err(Error::EmptyTable)
        ));
    }
}
