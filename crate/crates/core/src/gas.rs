//! Grounded attention score: the share of a token's attention mass that
//! lands on visual tokens inside a ground-truth region.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Parallelism};

pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GasError {
    #[error("attention weight {index} is {value}; weights must be finite and non-negative")]
    BadWeight { index: usize, value: f64 },
    #[error("grid {frames}x{rows}x{cols} needs {expected} values, got {got}")]
    ShapeMismatch {
        frames: usize,
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("attention has {attn} tokens but the mask has {mask}")]
    LengthMismatch { attn: usize, mask: usize },
    #[error("total attention mass is zero")]
    ZeroMass,
    #[error("coverage threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("a {rows}x{cols} grid over a {width}x{height} image leaves empty cells")]
    ZeroAreaCell {
        rows: usize,
        cols: usize,
        width: usize,
        height: usize,
    },
    #[error("no pairs to score")]
    NoPairs,
    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<GasError>,
    },
}

pub type Result<T, E = GasError> = std::result::Result<T, E>;

fn check_shape(frames: usize, rows: usize, cols: usize, got: usize) -> Result<()> {
    let expected = frames * rows * cols;
    if expected != got {
        return Err(GasError::ShapeMismatch {
            frames,
            rows,
            cols,
            expected,
            got,
        });
    }
    Ok(())
}

/// Unnormalized attention over `frames · rows · cols` visual tokens, in
/// frame-major, then row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    frames: usize,
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    provenance: String,
}

impl AttentionMap {
    pub fn new(frames: usize, rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        check_shape(frames, rows, cols, weights.len())?;
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(GasError::BadWeight { index, value });
        }
        Ok(Self {
            frames,
            rows,
            cols,
            weights,
            provenance: String::new(),
        })
    }

    /// Single-frame map laid out as one row.
    pub fn flat(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        Self::new(1, 1, n, weights)
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.frames, self.rows, self.cols)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weights rescaled to sum to one.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(GasError::ZeroMass);
        }
        Ok(self.weights.iter().map(|w| w / total).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    frames: usize,
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    /// Resolution of the pixel mask this was derived from, if any.
    pub source_resolution: Option<(usize, usize)>,
}

impl RegionMask {
    pub fn new(frames: usize, rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        check_shape(frames, rows, cols, bits.len())?;
        Ok(Self {
            frames,
            rows,
            cols,
            bits,
            source_resolution: None,
        })
    }

    pub fn flat(bits: Vec<bool>) -> Result<Self> {
        let n = bits.len();
        Self::new(1, 1, n, bits)
    }

    /// Stacks single- or multi-frame masks sharing one grid.
    pub fn stack(parts: &[RegionMask]) -> Result<Self> {
        let first = parts.first().ok_or(GasError::NoPairs)?;
        let (rows, cols) = (first.rows, first.cols);
        let mut bits = Vec::new();
        let mut frames = 0;
        for p in parts {
            if (p.rows, p.cols) != (rows, cols) {
                return Err(GasError::LengthMismatch {
                    attn: rows * cols,
                    mask: p.rows * p.cols,
                });
            }
            frames += p.frames;
            bits.extend_from_slice(&p.bits);
        }
        Self::new(frames, rows, cols, bits)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.frames, self.rows, self.cols)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
            ..self.clone()
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(GasError::LengthMismatch {
                attn: self.len(),
                mask: other.len(),
            });
        }
        Ok(Self {
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
            ..self.clone()
        })
    }
}

/// (masked mass, total mass). Both sums run in token order, so the masked
/// sum never exceeds the total and growing the mask never shrinks it.
fn masses(attn: &AttentionMap, mask: &RegionMask) -> Result<(f64, f64)> {
    if attn.len() != mask.len() {
        return Err(GasError::LengthMismatch {
            attn: attn.len(),
            mask: mask.len(),
        });
    }
    let total = attn.total_mass();
    if total <= 0.0 {
        return Err(GasError::ZeroMass);
    }
    let masked = attn
        .weights
        .iter()
        .zip(&mask.bits)
        .filter(|(_, m)| **m)
        .map(|(w, _)| *w)
        .sum();
    Ok((masked, total))
}

pub fn grounded_attention_score(attn: &AttentionMap, mask: &RegionMask) -> Result<f64> {
    let (masked, total) = masses(attn, mask)?;
    Ok(masked / total)
}

/// Row-major boolean image.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self> {
        check_shape(1, height, width, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x]
    }
}

/// Pixel span `[start, end)` of cell `i` when `extent` pixels are split into
/// `n` cells; the last cell absorbs the remainder.
fn cell_span(i: usize, n: usize, extent: usize) -> (usize, usize) {
    let size = extent / n;
    let end = if i + 1 == n { extent } else { (i + 1) * size };
    (i * size, end)
}

/// Marks a token when the masked fraction of its pixel cell reaches
/// `coverage_threshold`.
pub fn mask_from_pixels(
    pixels: &PixelMask,
    rows: usize,
    cols: usize,
    coverage_threshold: f64,
) -> Result<RegionMask> {
    if !(coverage_threshold > 0.0 && coverage_threshold <= 1.0) {
        return Err(GasError::BadThreshold(coverage_threshold));
    }
    if rows == 0 || cols == 0 || pixels.height / rows == 0 || pixels.width / cols == 0 {
        return Err(GasError::ZeroAreaCell {
            rows,
            cols,
            width: pixels.width,
            height: pixels.height,
        });
    }
    let mut bits = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (y0, y1) = cell_span(r, rows, pixels.height);
        for c in 0..cols {
            let (x0, x1) = cell_span(c, cols, pixels.width);
            let hits = (y0..y1)
                .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                .filter(|&(x, y)| pixels.get(x, y))
                .count();
            let area = (y1 - y0) * (x1 - x0);
            bits.push(hits as f64 / area as f64 >= coverage_threshold);
        }
    }
    let mut mask = RegionMask::new(1, rows, cols, bits)?;
    mask.source_resolution = Some((pixels.width, pixels.height));
    Ok(mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasReport {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Σ masked mass / Σ total mass over all pairs.
    pub pooled: f64,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<String>,
}

pub fn gas_report(pairs: &[(AttentionMap, RegionMask)]) -> Result<GasReport> {
    gas_report_with(pairs, Parallelism::default())
}

pub fn gas_report_with(pairs: &[(AttentionMap, RegionMask)], mode: Parallelism) -> Result<GasReport> {
    if pairs.is_empty() {
        return Err(GasError::NoPairs);
    }
    let per_pair = par::try_map_range(pairs.len(), mode, |i| {
        masses(&pairs[i].0, &pairs[i].1).map_err(|e| GasError::Pair {
            index: i,
            source: Box::new(e),
        })
    })?;
    let scores: Vec<f64> = per_pair.iter().map(|(m, t)| m / t).collect();
    let n = scores.len();
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let (masked, total) = per_pair
        .iter()
        .fold((0.0, 0.0), |(am, at), (m, t)| (am + m, at + t));
    let mut provenance: Vec<String> = pairs
        .iter()
        .map(|(a, _)| a.provenance.clone())
        .filter(|p| !p.is_empty())
        .collect();
    provenance.dedup();
    Ok(GasReport {
        count: n,
        mean: scores.iter().sum::<f64>() / n as f64,
        median,
        min: sorted[0],
        max: sorted[n - 1],
        pooled: masked / total,
        scores,
        provenance,
    })
}

impl GasReport {
    /// Text report; the headline row is the mean, in the three-decimal style
    /// of a results table's GAS column.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for p in &self.provenance {
            let _ = writeln!(s, "Source: {p}");
        }
        let _ = writeln!(s, "Pairs: {}", crate::dataset::thousands(self.count));
        let _ = writeln!(s, "GAS: {:.3}", self.mean);
        let _ = writeln!(s, "  - mean: {:.6}", self.mean);
        let _ = writeln!(s, "  - median: {:.6}", self.median);
        let _ = writeln!(s, "  - min/max: {:.6} / {:.6}", self.min, self.max);
        let _ = writeln!(s, "  - pooled: {:.6}", self.pooled);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (AttentionMap, RegionMask) {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let m: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        (AttentionMap::flat(w).unwrap(), RegionMask::flat(m).unwrap())
    }

    #[test]
    fn uniform_attention() {
        let attn = AttentionMap::flat(vec![1.0; 100]).unwrap();
        let mask = RegionMask::flat((0..100).map(|i| i < 7).collect()).unwrap();
        assert_eq!(grounded_attention_score(&attn, &mask).unwrap(), 0.07);
        let full = RegionMask::flat(vec![true; 100]).unwrap();
        assert_eq!(grounded_attention_score(&attn, &full).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        let zero = AttentionMap::flat(vec![0.0; 4]).unwrap();
        let mask = RegionMask::flat(vec![true; 4]).unwrap();
        assert_eq!(grounded_attention_score(&zero, &mask), Err(GasError::ZeroMass));
        let short = RegionMask::flat(vec![true; 3]).unwrap();
        let attn = AttentionMap::flat(vec![1.0; 4]).unwrap();
        assert_eq!(
            grounded_attention_score(&attn, &short),
            Err(GasError::LengthMismatch { attn: 4, mask: 3 })
        );
        assert!(matches!(
            AttentionMap::flat(vec![1.0, -0.5]),
            Err(GasError::BadWeight { index: 1, .. })
        ));
        assert!(AttentionMap::new(2, 2, 2, vec![0.0; 7]).is_err());
    }

    #[test]
    fn matches_exhaustive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let (a, m) = random_pair(&mut rng, 257);
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..257 {
                den += a.weights()[i];
                if m.bits()[i] {
                    num += a.weights()[i];
                }
            }
            let got = grounded_attention_score(&a, &m).unwrap();
            assert!((got - num / den).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalized_view_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (a, _) = random_pair(&mut rng, 1000);
        let s: f64 = a.normalized().unwrap().iter().sum();
        assert!((s - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn pixel_masks() {
        let all = PixelMask::new(8, 6, vec![true; 48]).unwrap();
        let m = mask_from_pixels(&all, 3, 4, 0.5).unwrap();
        assert!(m.bits().iter().all(|b| *b));
        assert_eq!(m.source_resolution, Some((8, 6)));

        // exactly cell (row 1, col 2) of a 3x4 grid of 2x2 cells
        let mut px = vec![false; 48];
        for y in 2..4 {
            for x in 4..6 {
                px[y * 8 + x] = true;
            }
        }
        let m = mask_from_pixels(&PixelMask::new(8, 6, px).unwrap(), 3, 4, 0.5).unwrap();
        let on: Vec<usize> = (0..12).filter(|&i| m.bits()[i]).collect();
        assert_eq!(on, vec![6]);

        assert!(matches!(mask_from_pixels(&all, 7, 4, 0.5), Err(GasError::ZeroAreaCell { .. })));
        assert_eq!(mask_from_pixels(&all, 3, 4, 0.0), Err(GasError::BadThreshold(0.0)));
        assert_eq!(mask_from_pixels(&all, 3, 4, 1.5), Err(GasError::BadThreshold(1.5)));
        assert!(mask_from_pixels(&all, 3, 4, 1.0).is_ok());
    }

    #[test]
    fn pixel_mask_matches_cell_count_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (w, h, rows, cols) = (37, 23, 4, 5);
        let px: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.5)).collect();
        let pm = PixelMask::new(w, h, px.clone()).unwrap();
        let m = mask_from_pixels(&pm, rows, cols, 0.5).unwrap();
        let (ch, cw) = (h / rows, w / cols);
        for r in 0..rows {
            for c in 0..cols {
                let mut hits = 0;
                let mut area = 0;
                for y in 0..h {
                    for x in 0..w {
                        let cr = (y / ch).min(rows - 1);
                        let cc = (x / cw).min(cols - 1);
                        if (cr, cc) == (r, c) {
                            area += 1;
                            hits += px[y * w + x] as usize;
                        }
                    }
                }
                assert_eq!(m.bits()[r * cols + c], 2 * hits >= area, "cell ({r},{c})");
            }
        }
    }

    #[test]
    fn report_examples() {
        let attn = AttentionMap::flat(vec![1.0; 4]).unwrap();
        let none = RegionMask::flat(vec![false; 4]).unwrap();
        let all = RegionMask::flat(vec![true; 4]).unwrap();
        let r = gas_report(&[(attn.clone(), none.clone())]).unwrap();
        assert_eq!(r.mean, 0.0);
        let r = gas_report(&[(attn.clone(), none), (attn.clone(), all)]).unwrap();
        assert_eq!(r.mean, 0.5);
        assert_eq!(r.median, 0.5);
        assert_eq!((r.min, r.max), (0.0, 1.0));
        assert_eq!(r.pooled, 0.5);
        assert!(r.render().contains("GAS: 0.500\n"));
        assert_eq!(gas_report(&[]), Err(GasError::NoPairs));
    }

    #[test]
    fn report_errors_name_pair() {
        let good = (AttentionMap::flat(vec![1.0]).unwrap(), RegionMask::flat(vec![true]).unwrap());
        let bad = (AttentionMap::flat(vec![0.0]).unwrap(), RegionMask::flat(vec![true]).unwrap());
        let err = gas_report(&[good.clone(), bad.clone(), good, bad]).unwrap_err();
        assert!(matches!(err, GasError::Pair { index: 1, .. }), "{err}");
    }

    #[test]
    fn report_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pairs: Vec<_> = (0..50).map(|_| random_pair(&mut rng, 64)).collect();
        let r = gas_report_with(&pairs, Parallelism::Rayon).unwrap();
        let scores: Vec<f64> = pairs
            .iter()
            .map(|(a, m)| grounded_attention_score(a, m).unwrap())
            .collect();
        assert_eq!(r.scores, scores);
        let mean = scores.iter().sum::<f64>() / 50.0;
        assert!((r.mean - mean).abs() <= 1e-15);
        assert_eq!(r, gas_report_with(&pairs, Parallelism::Sequential).unwrap());
    }

    proptest! {
        #[test]
        fn identities(
            weights in prop::collection::vec(0.0f64..10.0, 1..200),
            seed in any::<u64>(),
            scale in 1e-6f64..1e6,
        ) {
            prop_assume!(weights.iter().sum::<f64>() > 0.0);
            let n = weights.len();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mask = RegionMask::flat((0..n).map(|_| rng.random_bool(0.4)).collect()).unwrap();
            let extra = RegionMask::flat((0..n).map(|_| rng.random_bool(0.2)).collect()).unwrap();
            let attn = AttentionMap::flat(weights.clone()).unwrap();
            let g = grounded_attention_score(&attn, &mask).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));

            let scaled = AttentionMap::flat(weights.iter().map(|w| w * scale).collect()).unwrap();
            prop_assert!((grounded_attention_score(&scaled, &mask).unwrap() - g).abs() <= 1e-12);

            let gc = grounded_attention_score(&attn, &mask.complement()).unwrap();
            prop_assert!((g + gc - 1.0).abs() <= 1e-12);

            let bigger = mask.union(&extra).unwrap();
            prop_assert!(grounded_attention_score(&attn, &bigger).unwrap() >= g);
        }
    }
}
