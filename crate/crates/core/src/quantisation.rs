//! Hierarchical quantisation: merge steps that collapse exactly two active
//! grey values, paths of such steps, and three ways of building paths.

use rayon::prelude::*;

use crate::error::{Error, PathFormatError, Result};
use crate::image::{level_partition, Image, LevelPartition, Mask};
use crate::inpainting::{InpaintConfig, InpaintSystem};

const PATH_MAGIC: &str = "QSSQPATH v1";

/// One hierarchical quantisation step: `low` and `high` both map to `merged`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MergeStep {
    pub low: u8,
    pub high: u8,
    pub merged: u8,
}

impl MergeStep {
    pub fn new(low: u8, high: u8, merged: u8) -> Self {
        Self { low, high, merged }
    }
}

/// Ordered merge steps over a starting set of active grey values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantisationPath {
    initial_values: Vec<u8>,
    steps: Vec<MergeStep>,
}

impl QuantisationPath {
    /// Validate every step against the active set left by its predecessors.
    pub fn new(initial_values: Vec<u8>, steps: Vec<MergeStep>) -> Result<Self> {
        if initial_values.is_empty() {
            return Err(Error::EmptyDomain);
        }
        if initial_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("initial values must be strictly increasing".into()));
        }
        let (lo, hi) = (initial_values[0], initial_values[initial_values.len() - 1]);
        let mut active = [false; 256];
        for &v in &initial_values {
            active[v as usize] = true;
        }
        for (k, s) in steps.iter().enumerate() {
            let fail = |reason: String| Err(Error::InvalidStep { step: k, reason });
            if s.low >= s.high {
                return fail(format!("low {} not below high {}", s.low, s.high));
            }
            if !active[s.low as usize] || !active[s.high as usize] {
                return fail(format!("({}, {}) not both active", s.low, s.high));
            }
            if s.merged < lo || s.merged > hi {
                return fail(format!("merged value {} outside [{lo}, {hi}]", s.merged));
            }
            if s.merged != s.low && s.merged != s.high && active[s.merged as usize] {
                return fail(format!("merged value {} collides with an active value", s.merged));
            }
            active[s.low as usize] = false;
            active[s.high as usize] = false;
            active[s.merged as usize] = true;
        }
        Ok(Self { initial_values, steps })
    }

    pub fn initial_values(&self) -> &[u8] {
        &self.initial_values
    }

    pub fn steps(&self) -> &[MergeStep] {
        &self.steps
    }

    /// Number of merge steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Whether the path ends with a single active value.
    pub fn is_full(&self) -> bool {
        self.steps.len() + 1 == self.initial_values.len()
    }

    /// Mapping from initial values to their value after `m` steps.
    pub fn lookup(&self, m: usize) -> Result<[Option<u8>; 256]> {
        if m > self.steps.len() {
            return Err(Error::OutOfRange { index: m, max: self.steps.len() });
        }
        let mut lut = [None; 256];
        for &v in &self.initial_values {
            lut[v as usize] = Some(v);
        }
        for s in &self.steps[..m] {
            for &v in &self.initial_values {
                let slot = &mut lut[v as usize];
                if *slot == Some(s.low) || *slot == Some(s.high) {
                    *slot = Some(s.merged);
                }
            }
        }
        Ok(lut)
    }

    /// Active values after `m` steps, ascending.
    pub fn active_values(&self, m: usize) -> Result<Vec<u8>> {
        let lut = self.lookup(m)?;
        let mut values: Vec<u8> = self.initial_values.iter().filter_map(|&v| lut[v as usize]).collect();
        values.sort_unstable();
        values.dedup();
        Ok(values)
    }

    /// The steps after the first `skip`, starting from the active set there.
    pub fn remainder(&self, skip: usize) -> Result<Self> {
        let initial = self.active_values(skip)?;
        Self::new(initial, self.steps[skip..].to_vec())
    }

    pub fn to_text(&self) -> String {
        let values: Vec<String> = self.initial_values.iter().map(u8::to_string).collect();
        let mut out = format!("{PATH_MAGIC}\n{}\n", values.join(" "));
        for s in &self.steps {
            out.push_str(&format!("{} {} {}\n", s.low, s.high, s.merged));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::from(PathFormatError { line, message });
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(PATH_MAGIC) {
            return Err(err(1, format!("expected \"{PATH_MAGIC}\"")));
        }
        let initial = lines
            .next()
            .ok_or_else(|| err(2, "missing initial values".into()))?
            .split_whitespace()
            .map(|t| t.parse::<u8>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(2, e.to_string()))?;
        let mut steps = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts = line
                .split_whitespace()
                .map(|t| t.parse::<u8>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| err(k + 3, e.to_string()))?;
            let [low, high, merged] = parts[..] else {
                return Err(err(k + 3, format!("expected \"s t r\", found {line:?}")));
            };
            steps.push(MergeStep { low, high, merged });
        }
        Self::new(initial, steps)
    }
}

/// Apply the first `m` steps pointwise. With a mask only the masked pixels
/// are quantised.
pub fn apply_path(image: &Image, mask: Option<&Mask>, path: &QuantisationPath, m: usize) -> Result<Image> {
    let lut = path.lookup(m)?;
    let map = |v: u8| lut[v as usize].ok_or(Error::ValueNotInPath(v));
    let mut pixels = image.pixels().to_vec();
    match mask {
        Some(mask) => {
            mask.check_image(image)?;
            for &i in mask.indices() {
                pixels[i] = map(pixels[i])?;
            }
        }
        None => {
            for p in &mut pixels {
                *p = map(*p)?;
            }
        }
    }
    Ok(image.with_pixels(pixels))
}

/// Pyramidal uniform quantisation over the full range `0..grey_depth`.
///
/// Each pyramid level merges neighbouring bins pairwise from the bottom; a
/// merged bin spanning `[lo, hi]` takes the value `lo + (hi - lo) / 2` rounded
/// half away from zero.
pub fn uniform_path(grey_depth: u32) -> Result<QuantisationPath> {
    if grey_depth == 0 || grey_depth > 256 || !grey_depth.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(grey_depth));
    }
    // (lo, hi, value) per bin
    let mut bins: Vec<(u32, u32, u8)> = (0..grey_depth).map(|v| (v, v, v as u8)).collect();
    let mut steps = Vec::with_capacity(grey_depth as usize - 1);
    while bins.len() > 1 {
        bins = bins
            .chunks(2)
            .map(|pair| {
                let (lo, _, a) = pair[0];
                let (_, hi, b) = pair[1];
                let merged = (f64::from(lo) + 0.5 * f64::from(hi - lo)).round() as u8;
                steps.push(MergeStep { low: a, high: b, merged });
                (lo, hi, merged)
            })
            .collect();
    }
    QuantisationPath::new((0..grey_depth).map(|v| v as u8).collect(), steps)
}

/// A merged group of initial grey values with exact moment sums.
#[derive(Debug, Clone)]
struct Cluster {
    value: u8,
    count: i64,
    sum: i64,
    sum_sq: i64,
    /// Inpainting response of the cluster's known pixels (sparsification only).
    response: Vec<f64>,
}

impl Cluster {
    /// Squared error of representing the cluster by `r`.
    fn cost(&self, r: u8) -> i64 {
        let r = i64::from(r);
        self.sum_sq - 2 * r * self.sum + r * r * self.count
    }
}

/// Representative of a merged pair: the value of the larger set, the
/// smaller value on equal counts.
fn representative(a: &Cluster, b: &Cluster) -> u8 {
    match a.count.cmp(&b.count) {
        std::cmp::Ordering::Greater => a.value,
        std::cmp::Ordering::Less => b.value,
        std::cmp::Ordering::Equal => a.value.min(b.value),
    }
}

fn clusters_from(partition: &LevelPartition) -> Vec<Cluster> {
    partition
        .values()
        .iter()
        .zip(partition.sets())
        .map(|(&v, set)| {
            let c = set.len() as i64;
            let v64 = i64::from(v);
            Cluster { value: v, count: c, sum: c * v64, sum_sq: c * v64 * v64, response: Vec::new() }
        })
        .collect()
}

/// Increase of the total squared error when clusters `a` and `b` merge.
fn ward_delta(a: &Cluster, b: &Cluster) -> (i64, u8) {
    let r = representative(a, b);
    let delta = a.cost(r) + b.cost(r) - a.cost(a.value) - b.cost(b.value);
    (delta, r)
}

/// Merge clusters `i < j` into position `i`; returns the committed step.
fn merge_clusters(clusters: &mut Vec<Cluster>, i: usize, j: usize, merged: u8) -> MergeStep {
    let b = clusters.remove(j);
    let a = &mut clusters[i];
    let step = MergeStep { low: a.value.min(b.value), high: a.value.max(b.value), merged };
    a.value = merged;
    a.count += b.count;
    a.sum += b.sum;
    a.sum_sq += b.sum_sq;
    a.response.iter_mut().zip(&b.response).for_each(|(x, y)| *x += y);
    clusters.sort_by_key(|c| c.value);
    step
}

/// Greedy Ward clustering of the grey values.
///
/// Every pair of active values is a candidate (no adjacency restriction);
/// the pair whose merge adds the least squared error against the original
/// data is committed. Ties go to the smallest `(low, high)`.
pub fn ward_path(partition: &LevelPartition) -> Result<QuantisationPath> {
    if partition.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut clusters = clusters_from(partition);
    let mut steps = Vec::with_capacity(clusters.len() - 1);
    while clusters.len() > 1 {
        let mut best: Option<(i64, usize, usize, u8)> = None;
        // clusters sorted by value, so (i, j) runs in (low, high) order
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (delta, r) = ward_delta(&clusters[i], &clusters[j]);
                if best.is_none_or(|(d, ..)| delta < d) {
                    best = Some((delta, i, j, r));
                }
            }
        }
        let (_, i, j, r) = best.expect("at least one pair");
        steps.push(merge_clusters(&mut clusters, i, j, r));
    }
    QuantisationPath::new(partition.values().to_vec(), steps)
}

/// Options for [`sparsification_quant_path`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SparsQuantOptions {
    pub inpaint: InpaintConfig,
    /// Evaluate only the `k` pairs with the smallest Ward cost per step.
    /// Paths built with a limit are approximations.
    pub candidate_limit: Option<usize>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Greedy quantisation of the known data by inpainting error.
///
/// At each step every pair of active known values is merged tentatively
/// (representative as in [`ward_path`]), the known data is inpainted, and the
/// merge with the smallest mean squared error against the full image is
/// committed. Ties go to the smallest `(low, high)`.
///
/// Inpainting is linear in the known data, so the reconstruction is kept as
/// a superposition `u = sum_C value_C * phi_C` of per-cluster responses
/// `phi_C` (the inpainting of the indicator of the cluster's known pixels).
/// Re-valuing one cluster `D` by `d` changes the squared error by
/// `2 d <e, phi_D> + d^2 |phi_D|^2`, where `e = u - f`.
pub fn sparsification_quant_path(image: &Image, mask: &Mask, options: &SparsQuantOptions) -> Result<QuantisationPath> {
    mask.check_image(image)?;
    if mask.is_empty() {
        return Err(Error::InvalidMask("empty mask".into()));
    }
    let partition = level_partition(image, Some(mask))?;
    let system = InpaintSystem::new(image.width(), image.height(), mask)?;
    let n = image.len();

    let basis: Vec<Vec<f64>> = partition
        .sets()
        .par_iter()
        .map(|set| {
            let mut data = vec![0.0; n];
            for &i in set {
                data[i] = 1.0;
            }
            system.solve(&data, None, &options.inpaint).map(|u| u.values)
        })
        .collect::<Result<_>>()?;

    let original: Vec<f64> = image.pixels().iter().map(|&v| f64::from(v)).collect();
    let mut clusters = clusters_from(&partition);
    let mut error: Vec<f64> = original.iter().map(|f| -f).collect();
    for (c, phi) in clusters.iter_mut().zip(basis) {
        let v = f64::from(c.value);
        error.iter_mut().zip(&phi).for_each(|(e, p)| *e += v * p);
        c.response = phi;
    }
    let mut sse: f64 = dot(&error, &error);

    let mut steps = Vec::with_capacity(clusters.len().saturating_sub(1));
    while clusters.len() > 1 {
        let (inner, norms): (Vec<f64>, Vec<f64>) = clusters
            .par_iter()
            .map(|c| (dot(&error, &c.response), dot(&c.response, &c.response)))
            .unzip();

        let mut pairs: Vec<(usize, usize)> = (0..clusters.len())
            .flat_map(|i| (i + 1..clusters.len()).map(move |j| (i, j)))
            .collect();
        if let Some(limit) = options.candidate_limit {
            let mut ranked: Vec<(i64, usize, usize)> = pairs
                .iter()
                .map(|&(i, j)| (ward_delta(&clusters[i], &clusters[j]).0, i, j))
                .collect();
            ranked.sort_unstable();
            ranked.truncate(limit.max(1));
            pairs = ranked.into_iter().map(|(_, i, j)| (i, j)).collect();
            pairs.sort_unstable();
        }

        // (sse, i, j, merged, re-valued cluster, shift)
        let mut best: Option<(f64, usize, usize, u8, usize, f64)> = None;
        for (i, j) in pairs {
            let r = representative(&clusters[i], &clusters[j]);
            let k = if clusters[i].value == r { j } else { i };
            let d = f64::from(r) - f64::from(clusters[k].value);
            let candidate = sse + 2.0 * d * inner[k] + d * d * norms[k];
            if best.is_none_or(|(b, ..)| candidate < b) {
                best = Some((candidate, i, j, r, k, d));
            }
        }
        let (_, i, j, r, k, d) = best.expect("at least one pair");
        error.iter_mut().zip(&clusters[k].response).for_each(|(e, p)| *e += d * p);
        sse = dot(&error, &error);
        steps.push(merge_clusters(&mut clusters, i, j, r));
    }
    QuantisationPath::new(partition.values().to_vec(), steps)
}

/// Which strategy builds a quantisation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantMethod {
    Uniform,
    Ward,
    Sparsification,
}

impl QuantMethod {
    pub const ALL: [QuantMethod; 3] = [QuantMethod::Uniform, QuantMethod::Ward, QuantMethod::Sparsification];

    pub fn name(self) -> &'static str {
        match self {
            QuantMethod::Uniform => "uniform",
            QuantMethod::Ward => "ward",
            QuantMethod::Sparsification => "sparsification",
        }
    }

    /// Committed methods adapt to the occurring values.
    pub fn is_committed(self) -> bool {
        !matches!(self, QuantMethod::Uniform)
    }
}

impl std::fmt::Display for QuantMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for QuantMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(QuantMethod::Uniform),
            "ward" => Ok(QuantMethod::Ward),
            "spars" | "sparsification" => Ok(QuantMethod::Sparsification),
            other => Err(Error::InvalidParameter(format!("unknown quantisation method {other:?}"))),
        }
    }
}

/// Build the full path of `method` for the known data of `image` on `mask`.
pub fn build_path(
    method: QuantMethod,
    image: &Image,
    mask: Option<&Mask>,
    options: &SparsQuantOptions,
) -> Result<QuantisationPath> {
    match method {
        QuantMethod::Uniform => uniform_path(u32::from(image.grey_depth())),
        QuantMethod::Ward => ward_path(&level_partition(image, mask)?),
        QuantMethod::Sparsification => {
            let full;
            let mask = match mask {
                Some(m) => m,
                None => {
                    full = Mask::full(image.len());
                    &full
                }
            };
            sparsification_quant_path(image, mask, options)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steps(triples: &[(u8, u8, u8)]) -> Vec<MergeStep> {
        triples.iter().map(|&(a, b, c)| MergeStep::new(a, b, c)).collect()
    }

    #[test]
    fn apply_examples() {
        let img = Image::new(4, 1, vec![0, 0, 10, 100]).unwrap();
        let path = QuantisationPath::new(vec![0, 10, 100], steps(&[(0, 10, 0), (0, 100, 0)])).unwrap();
        assert_eq!(apply_path(&img, None, &path, 0).unwrap(), img);
        assert_eq!(apply_path(&img, None, &path, 1).unwrap().pixels(), &[0, 0, 0, 100]);
        assert_eq!(apply_path(&img, None, &path, 2).unwrap().pixels(), &[0, 0, 0, 0]);
        assert!(matches!(apply_path(&img, None, &path, 3), Err(Error::OutOfRange { .. })));
        let foreign = Image::new(2, 1, vec![0, 5]).unwrap();
        assert_eq!(apply_path(&foreign, None, &path, 1), Err(Error::ValueNotInPath(5)));
    }

    #[test]
    fn masked_apply_leaves_unknown_pixels() {
        let img = Image::new(3, 1, vec![0, 10, 7]).unwrap();
        let mask = Mask::new(vec![0, 1], 3).unwrap();
        let path = QuantisationPath::new(vec![0, 10], steps(&[(0, 10, 10)])).unwrap();
        assert_eq!(apply_path(&img, Some(&mask), &path, 1).unwrap().pixels(), &[10, 10, 7]);
    }

    #[test]
    fn step_validation() {
        assert!(QuantisationPath::new(vec![0, 5, 9], steps(&[(5, 0, 0)])).is_err());
        assert!(QuantisationPath::new(vec![0, 5, 9], steps(&[(0, 4, 0)])).is_err());
        assert!(QuantisationPath::new(vec![0, 5, 9], steps(&[(0, 5, 9)])).is_err());
        assert!(QuantisationPath::new(vec![3, 5, 9], steps(&[(3, 5, 1)])).is_err());
        assert!(QuantisationPath::new(vec![0, 5, 9], steps(&[(0, 5, 2), (2, 9, 9)])).is_ok());
    }

    #[test]
    fn uniform_small_depths() {
        assert_eq!(uniform_path(2).unwrap().steps(), steps(&[(0, 1, 1)]).as_slice());
        assert_eq!(uniform_path(4).unwrap().steps(), steps(&[(0, 1, 1), (2, 3, 3), (1, 3, 2)]).as_slice());
        assert!(uniform_path(1).unwrap().is_empty());
        assert_eq!(uniform_path(12), Err(Error::NotPowerOfTwo(12)));
    }

    #[test]
    fn uniform_first_level_keeps_odd_values() {
        let path = uniform_path(256).unwrap();
        assert_eq!(path.len(), 255);
        let odd: Vec<u8> = (0..128).map(|i| 2 * i + 1).collect();
        assert_eq!(path.active_values(128).unwrap(), odd);
        assert_eq!(path.active_values(255).unwrap().len(), 1);
    }

    #[test]
    fn ward_first_merge_and_ties() {
        let p = LevelPartition::from_histogram(&[(0, 2), (10, 1), (100, 1)]).unwrap();
        let path = ward_path(&p).unwrap();
        assert_eq!(path.steps()[0], MergeStep::new(0, 10, 0));
        assert_eq!(path.len(), 2);

        let tie = LevelPartition::from_histogram(&[(40, 3), (90, 3)]).unwrap();
        assert_eq!(ward_path(&tie).unwrap().steps(), &[MergeStep::new(40, 90, 40)]);

        let single = LevelPartition::from_histogram(&[(7, 5)]).unwrap();
        assert!(ward_path(&single).unwrap().is_empty());
    }

    #[test]
    fn text_round_trip() {
        let path = uniform_path(8).unwrap();
        let text = path.to_text();
        assert!(text.starts_with("QSSQPATH v1\n0 1 2 3 4 5 6 7\n0 1 1\n"));
        assert_eq!(QuantisationPath::from_text(&text).unwrap(), path);
        assert!(QuantisationPath::from_text("QSSQPATH v1\n0 1\n0 1\n").is_err());
        assert!(QuantisationPath::from_text("QSSPATH v1\n0 1\n").is_err());
    }

    #[test]
    fn remainder_continues_from_split() {
        let path = uniform_path(8).unwrap();
        let rest = path.remainder(3).unwrap();
        assert_eq!(rest.initial_values(), path.active_values(3).unwrap().as_slice());
        assert_eq!(rest.len(), path.len() - 3);
    }
}
