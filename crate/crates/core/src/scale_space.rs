//! Quantisation scale-spaces: the image sequence produced by a merge path and
//! executable checks of its scale-space properties.

use crate::error::{Error, Result};
use crate::image::{entropy, level_partition, mse, total_contrast, Image, Mask};
use crate::quantisation::{apply_path, QuantisationPath};

/// Slack for the non-strict entropy comparisons.
pub const ENTROPY_TOLERANCE: f64 = 1e-12;

/// The family `f^0, ..., f^L` for a path with `L` steps, built cascadically.
pub fn generate(image: &Image, mask: Option<&Mask>, path: &QuantisationPath) -> Result<Vec<Image>> {
    let first = apply_path(image, mask, path, 0)?;
    let indices: Vec<usize> = match mask {
        Some(m) => m.indices().to_vec(),
        None => (0..image.len()).collect(),
    };
    let mut sequence = Vec::with_capacity(path.len() + 1);
    sequence.push(first);
    for step in path.steps() {
        let prev = sequence.last().expect("non-empty");
        let mut pixels = prev.pixels().to_vec();
        for &i in &indices {
            if pixels[i] == step.low || pixels[i] == step.high {
                pixels[i] = step.merged;
            }
        }
        sequence.push(prev.with_pixels(pixels));
    }
    Ok(sequence)
}

/// Per-step entropies and the outcome of the Lyapunov checks.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    /// `H(f^m)` in bits per considered pixel.
    pub entropies: Vec<f64>,
    /// Non-empty level sets of `f^m`.
    pub occurring_levels: Vec<usize>,
    /// Transitions `m -> m+1` that violate a check.
    pub violations: Vec<usize>,
}

impl EntropyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Entropy must never increase; it must strictly drop whenever two non-empty
/// level sets merge (the occurring level count falls) and stay put when an
/// empty set takes part.
pub fn verify_lyapunov_entropy(sequence: &[Image], mask: Option<&Mask>) -> Result<EntropyReport> {
    let mut entropies = Vec::with_capacity(sequence.len());
    let mut occurring_levels = Vec::with_capacity(sequence.len());
    for f in sequence {
        let p = level_partition(f, mask)?;
        entropies.push(entropy(&p));
        occurring_levels.push(p.len());
    }
    let violations = (1..sequence.len())
        .filter(|&m| {
            let (before, after) = (entropies[m - 1], entropies[m]);
            let increased = after > before + ENTROPY_TOLERANCE;
            let merged_non_empty = occurring_levels[m] < occurring_levels[m - 1];
            let missed_strict = merged_non_empty && !(after < before);
            let drifted = !merged_non_empty && (after - before).abs() > ENTROPY_TOLERANCE;
            increased || missed_strict || drifted
        })
        .map(|m| m - 1)
        .collect();
    Ok(EntropyReport { entropies, occurring_levels, violations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinReport {
    /// Range of the initial image.
    pub bounds: (u8, u8),
    /// `(min, max)` of every `f^m`.
    pub ranges: Vec<(u8, u8)>,
    /// Scales whose values leave the initial range.
    pub violations: Vec<usize>,
}

impl MaxMinReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every `f^m` stays within `[min f^0, max f^0]`, widened to `value_range`
/// when given. Uncommitted paths may move a pixel to any value of their
/// initial range, so pass `path_range` of the path for those.
pub fn verify_maxmin(sequence: &[Image], value_range: Option<(u8, u8)>) -> Result<MaxMinReport> {
    let range = |f: &Image| {
        let min = *f.pixels().iter().min().expect("non-empty image");
        let max = *f.pixels().iter().max().expect("non-empty image");
        (min, max)
    };
    let first = sequence.first().ok_or(Error::EmptyDomain)?;
    let (lo, hi) = range(first);
    let bounds = match value_range {
        Some((a, b)) => (lo.min(a), hi.max(b)),
        None => (lo, hi),
    };
    let ranges: Vec<(u8, u8)> = sequence.iter().map(range).collect();
    let violations = ranges
        .iter()
        .enumerate()
        .filter(|(_, &(lo, hi))| lo < bounds.0 || hi > bounds.1)
        .map(|(m, _)| m)
        .collect();
    Ok(MaxMinReport { bounds, ranges, violations })
}

/// Smallest and largest initial value of a path.
pub fn path_range(path: &QuantisationPath) -> Option<(u8, u8)> {
    let values = path.initial_values();
    Some((*values.first()?, *values.last()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SemigroupReport {
    pub split: usize,
    pub steps: usize,
    pub passed: bool,
}

/// `f^{l+n}` computed directly equals `n` further steps applied to `f^l`.
pub fn verify_semigroup(image: &Image, path: &QuantisationPath, split: usize, steps: usize) -> Result<SemigroupReport> {
    let total = split
        .checked_add(steps)
        .filter(|&t| t <= path.len())
        .ok_or(Error::OutOfRange { index: split.saturating_add(steps), max: path.len() })?;
    let direct = apply_path(image, None, path, total)?;
    let intermediate = apply_path(image, None, path, split)?;
    let cascaded = apply_path(&intermediate, None, &path.remainder(split)?, steps)?;
    Ok(SemigroupReport { split, steps, passed: direct == cascaded })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastReport {
    pub contrasts: Vec<u8>,
    pub violations: Vec<usize>,
}

impl ContrastReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Total contrast never grows along the sequence.
pub fn verify_contrast_lyapunov(sequence: &[Image], mask: Option<&Mask>) -> Result<ContrastReport> {
    let contrasts = sequence
        .iter()
        .map(|f| total_contrast(f, mask))
        .collect::<Result<Vec<_>>>()?;
    let violations = (1..contrasts.len())
        .filter(|&m| contrasts[m] > contrasts[m - 1])
        .map(|m| m - 1)
        .collect();
    Ok(ContrastReport { contrasts, violations })
}

/// One row of the per-step scale-space table.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub step: usize,
    /// Active values of the path (empty level sets included).
    pub active_levels: usize,
    pub occurring_levels: usize,
    pub entropy_bits: f64,
    pub contrast: u8,
    /// MSE of `f^m` against `f^0` over the considered pixels.
    pub mse: f64,
    /// Lyapunov checks of the transition into this step.
    pub entropy_ok: bool,
    pub contrast_ok: bool,
    pub maxmin_ok: bool,
}

/// Per-step table plus verifier summary for a generated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpaceReport {
    pub rows: Vec<StepRow>,
    pub entropy: EntropyReport,
    pub contrast: ContrastReport,
    pub maxmin: MaxMinReport,
}

impl ScaleSpaceReport {
    pub fn passed(&self) -> bool {
        self.entropy.passed() && self.contrast.passed() && self.maxmin.passed()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,active_levels,occurring_levels,entropy_bits,contrast,mse,entropy_ok,contrast_ok,maxmin_ok\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.step,
                r.active_levels,
                r.occurring_levels,
                r.entropy_bits,
                r.contrast,
                r.mse,
                u8::from(r.entropy_ok),
                u8::from(r.contrast_ok),
                u8::from(r.maxmin_ok)
            ));
        }
        out
    }
}

/// Generate the scale-space of `path` and run every sequence verifier.
pub fn analyse(image: &Image, mask: Option<&Mask>, path: &QuantisationPath) -> Result<ScaleSpaceReport> {
    let sequence = generate(image, mask, path)?;
    let entropy = verify_lyapunov_entropy(&sequence, mask)?;
    let contrast = verify_contrast_lyapunov(&sequence, mask)?;
    let maxmin = verify_maxmin(&sequence, path_range(path))?;
    let known = mask.map(|m| m.indices().to_vec());
    let first = &sequence[0];
    let rows = sequence
        .iter()
        .enumerate()
        .map(|(m, f)| {
            let err = match &known {
                Some(idx) => {
                    let sum: f64 = idx
                        .iter()
                        .map(|&i| {
                            let d = f64::from(f.pixels()[i]) - f64::from(first.pixels()[i]);
                            d * d
                        })
                        .sum();
                    sum / idx.len() as f64
                }
                None => mse(f, first).expect("same extent"),
            };
            let transition_ok = |violations: &[usize]| m == 0 || !violations.contains(&(m - 1));
            StepRow {
                step: m,
                active_levels: path.initial_values().len() - m,
                occurring_levels: entropy.occurring_levels[m],
                entropy_bits: entropy.entropies[m],
                contrast: contrast.contrasts[m],
                mse: err,
                entropy_ok: transition_ok(&entropy.violations),
                contrast_ok: transition_ok(&contrast.violations),
                maxmin_ok: !maxmin.violations.contains(&m),
            }
        })
        .collect();
    Ok(ScaleSpaceReport { rows, entropy, contrast, maxmin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::LevelPartition;
    use crate::quantisation::{uniform_path, ward_path, MergeStep};

    #[test]
    fn empty_path_gives_single_image() {
        let img = Image::new(2, 1, vec![4, 9]).unwrap();
        let path = QuantisationPath::new(vec![4, 9], vec![]).unwrap();
        assert_eq!(generate(&img, None, &path).unwrap(), vec![img]);
    }

    #[test]
    fn two_values_one_step_flattens() {
        let img = Image::new(3, 1, vec![4, 9, 9]).unwrap();
        let path = QuantisationPath::new(vec![4, 9], vec![MergeStep::new(4, 9, 9)]).unwrap();
        let seq = generate(&img, None, &path).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq[1].pixels(), &[9, 9, 9]);
    }

    #[test]
    fn ward_sequence_example() {
        let img = Image::new(4, 1, vec![0, 0, 10, 100]).unwrap();
        let path = ward_path(&level_partition(&img, None).unwrap()).unwrap();
        let seq = generate(&img, None, &path).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq[0], img);
        assert_eq!(seq[1].pixels(), &[0, 0, 0, 100]);
        assert_eq!(level_partition(&seq[2], None).unwrap().len(), 1);
        let report = verify_lyapunov_entropy(&seq, None).unwrap();
        assert!(report.passed());
        assert_eq!(*report.entropies.last().unwrap(), 0.0);
    }

    #[test]
    fn merging_singletons_drops_entropy() {
        let img = Image::new(4, 1, vec![1, 1, 2, 3]).unwrap();
        let path = QuantisationPath::new(vec![1, 2, 3], vec![MergeStep::new(2, 3, 2)]).unwrap();
        let report = verify_lyapunov_entropy(&generate(&img, None, &path).unwrap(), None).unwrap();
        assert_eq!(report.entropies, vec![1.5, 1.0]);
        assert!(report.passed());
    }

    #[test]
    fn empty_bin_merge_keeps_entropy() {
        // 1 is empty; merging it with 0 relabels nothing
        let img = Image::with_depth(2, 1, 4, vec![0, 3]).unwrap();
        let path = uniform_path(4).unwrap();
        let seq = generate(&img, None, &path).unwrap();
        let report = verify_lyapunov_entropy(&seq, None).unwrap();
        assert_eq!(report.entropies[0], report.entropies[1]);
        assert!(report.passed());
    }

    #[test]
    fn flagged_increase() {
        let a = Image::new(2, 1, vec![0, 0]).unwrap();
        let b = Image::new(2, 1, vec![0, 1]).unwrap();
        let report = verify_lyapunov_entropy(&[a.clone(), b.clone()], None).unwrap();
        assert_eq!(report.violations, vec![0]);
        assert!(!verify_contrast_lyapunov(&[a, b], None).unwrap().passed());
    }

    #[test]
    fn extremal_merge_drops_contrast() {
        let img = Image::new(3, 1, vec![0, 50, 200]).unwrap();
        let path = QuantisationPath::new(vec![0, 50, 200], vec![MergeStep::new(50, 200, 50)]).unwrap();
        let report = verify_contrast_lyapunov(&generate(&img, None, &path).unwrap(), None).unwrap();
        assert_eq!(report.contrasts, vec![200, 50]);
        assert!(report.passed());
    }

    #[test]
    fn uniform_full_range_contrast_and_bounds() {
        let img = Image::new(16, 16, (0..=255).collect()).unwrap();
        let seq = generate(&img, None, &uniform_path(256).unwrap()).unwrap();
        let contrast = verify_contrast_lyapunov(&seq, None).unwrap();
        assert!(contrast.passed());
        assert_eq!(*contrast.contrasts.last().unwrap(), 0);
        assert!(verify_maxmin(&seq, None).unwrap().passed());
        assert!(verify_lyapunov_entropy(&seq, None).unwrap().passed());
    }

    #[test]
    fn uniform_bins_can_widen_image_range() {
        // 2 and 1 fall into different bins whose midpoints are 3 and 1
        let img = Image::with_depth(2, 1, 4, vec![1, 2]).unwrap();
        let path = uniform_path(4).unwrap();
        let seq = generate(&img, None, &path).unwrap();
        assert_eq!(seq[2].pixels(), &[1, 3]);
        assert!(!verify_contrast_lyapunov(&seq, None).unwrap().passed());
        assert!(!verify_maxmin(&seq, None).unwrap().passed());
        assert!(verify_maxmin(&seq, path_range(&path)).unwrap().passed());
    }

    #[test]
    fn semigroup_trivial_splits() {
        let img = Image::new(8, 1, vec![0, 1, 2, 3, 4, 5, 6, 7]).unwrap();
        let path = ward_path(&LevelPartition::from_histogram(&[(0, 1), (3, 2), (7, 4)]).unwrap()).unwrap();
        let img2 = Image::new(7, 1, vec![0, 3, 3, 7, 7, 7, 7]).unwrap();
        assert!(verify_semigroup(&img2, &path, 0, 2).unwrap().passed);
        assert!(verify_semigroup(&img2, &path, 1, 0).unwrap().passed);
        assert!(verify_semigroup(&img2, &path, 2, 1).is_err());
        let uniform = uniform_path(8).unwrap();
        assert!(verify_semigroup(&img, &uniform, 3, 2).unwrap().passed);
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let img = Image::new(4, 1, vec![0, 0, 10, 100]).unwrap();
        let path = ward_path(&level_partition(&img, None).unwrap()).unwrap();
        let report = analyse(&img, None, &path).unwrap();
        assert!(report.passed());
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("step,active_levels,"));
    }
}
