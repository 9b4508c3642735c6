//! Joint rate-distortion optimisation over the sparsification scale `l`
//! (how many pixels were removed) and the quantisation scale `m` (how many
//! grey levels were merged), with an entropy-based coding cost.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{entropy_of_values, mse, Image, Mask};
use crate::inpainting::{round_to_grey, InpaintSystem};
use crate::quantisation::{apply_path, build_path, QuantMethod, QuantisationPath, SparsQuantOptions};
use crate::sparsification::SparsificationPath;

/// Bits to store one grey value of the quantisation table.
pub const BITS_PER_STORED_VALUE: f64 = 8.0;

/// Mask densities evaluated when no explicit grid is given.
pub const DEFAULT_DENSITIES: [f64; 7] = [0.64, 0.32, 0.16, 0.08, 0.04, 0.02, 0.01];

/// Coding cost of the known data for one quantisation method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub method: QuantMethod,
    /// Entropy of the known values, bits per known pixel.
    pub per_value_bits: f64,
    pub n_known: usize,
    /// Side information: 8 bits for the uniform level count, or 8 bits per
    /// stored grey value for non-uniform tables. Positions are free.
    pub overhead_bits: f64,
}

impl CostModel {
    pub fn total_bits(&self) -> f64 {
        self.n_known as f64 * self.per_value_bits + self.overhead_bits
    }
}

pub fn coding_cost(known_values: &[u8], q_levels: usize, method: QuantMethod) -> Result<CostModel> {
    if known_values.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if q_levels == 0 {
        return Err(Error::InvalidParameter("at least one quantisation level required".into()));
    }
    let overhead_bits = match method {
        QuantMethod::Uniform => BITS_PER_STORED_VALUE,
        QuantMethod::Ward | QuantMethod::Sparsification => BITS_PER_STORED_VALUE * q_levels as f64,
    };
    Ok(CostModel {
        method,
        per_value_bits: entropy_of_values(known_values),
        n_known: known_values.len(),
        overhead_bits,
    })
}

/// One evaluated `(l, m)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDistortionPoint {
    pub method: QuantMethod,
    /// Sparsification scale: pixels removed.
    pub l: usize,
    /// Quantisation scale: merge steps applied.
    pub m: usize,
    pub q_levels: usize,
    pub n_known: usize,
    pub entropy_bits_per_value: f64,
    pub overhead_bits: f64,
    pub total_bits: f64,
    /// MSE of the rounded reconstruction against the original.
    pub mse: f64,
    /// `8 N / total_bits`.
    pub compression_ratio: f64,
}

impl RateDistortionPoint {
    /// Key-value pairs in manifest order.
    pub fn manifest_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("method", self.method.to_string()),
            ("l", self.l.to_string()),
            ("m", self.m.to_string()),
            ("q_levels", self.q_levels.to_string()),
            ("n_known", self.n_known.to_string()),
            ("entropy_bits_per_value", self.entropy_bits_per_value.to_string()),
            ("overhead_bits", self.overhead_bits.to_string()),
            ("total_bits", self.total_bits.to_string()),
            ("compression_ratio", self.compression_ratio.to_string()),
            ("mse", self.mse.to_string()),
        ]
    }
}

/// Sparsification scales for the given mask densities, in the given order.
pub fn density_grid(path: &SparsificationPath, densities: &[f64]) -> Vec<usize> {
    densities.iter().map(|&d| path.step_for_density(d)).collect()
}

/// Everything that depends on `l` but not on `m`.
struct Scale {
    l: usize,
    mask: Mask,
    system: InpaintSystem,
    path: QuantisationPath,
}

fn prepare_scale(
    image: &Image,
    spars_path: &SparsificationPath,
    method: QuantMethod,
    l: usize,
    options: &SparsQuantOptions,
) -> Result<Scale> {
    let mask = spars_path.mask_at(l)?;
    let system = InpaintSystem::new(image.width(), image.height(), &mask)?;
    let path = build_path(method, image, Some(&mask), options)?;
    Ok(Scale { l, mask, system, path })
}

/// Uniform paths start from the full range, committed ones from the
/// occurring values; each step removes one active value.
fn q_levels(path: &QuantisationPath, m: usize) -> usize {
    path.initial_values().len() - m
}

/// Quantised known data and its cost at scale `m`.
fn cost_at(image: &Image, scale: &Scale, method: QuantMethod, m: usize) -> Result<(Image, CostModel)> {
    let quantised = apply_path(image, Some(&scale.mask), &scale.path, m)?;
    let cost = coding_cost(&quantised.values_at(Some(&scale.mask)), q_levels(&scale.path, m), method)?;
    Ok((quantised, cost))
}

fn reconstruction_mse(image: &Image, scale: &Scale, quantised: &Image, options: &SparsQuantOptions) -> Result<f64> {
    let data: Vec<f64> = quantised.pixels().iter().map(|&v| f64::from(v)).collect();
    let u = scale.system.solve(&data, None, &options.inpaint)?;
    mse(image, &round_to_grey(&u, image.grey_depth()))
}

fn point(image: &Image, method: QuantMethod, l: usize, m: usize, cost: &CostModel, q: usize, err: f64) -> RateDistortionPoint {
    let total = cost.total_bits();
    RateDistortionPoint {
        method,
        l,
        m,
        q_levels: q,
        n_known: cost.n_known,
        entropy_bits_per_value: cost.per_value_bits,
        overhead_bits: cost.overhead_bits,
        total_bits: total,
        mse: err,
        compression_ratio: 8.0 * image.len() as f64 / total,
    }
}

fn check_grid(image: &Image, spars_path: &SparsificationPath, l_grid: &[usize]) -> Result<()> {
    if spars_path.image_size() != image.len() {
        return Err(Error::DimensionMismatch(format!(
            "sparsification path for {} pixels, image has {}",
            spars_path.image_size(),
            image.len()
        )));
    }
    if l_grid.is_empty() {
        return Err(Error::InvalidParameter("empty sparsification grid".into()));
    }
    Ok(())
}

/// Find `(l, m)` minimising reconstruction MSE subject to `total_bits < budget`.
///
/// Every `l` in `l_grid` and every `m` of the method's path at that `l` is
/// considered. Ties prefer larger `l`, then larger `m`.
pub fn rd_optimize(
    image: &Image,
    spars_path: &SparsificationPath,
    method: QuantMethod,
    budget: f64,
    l_grid: &[usize],
    options: &SparsQuantOptions,
) -> Result<RateDistortionPoint> {
    check_grid(image, spars_path, l_grid)?;
    let mut feasible = Vec::new();
    let mut min_cost = f64::INFINITY;
    let scales = l_grid
        .par_iter()
        .map(|&l| prepare_scale(image, spars_path, method, l, options))
        .collect::<Result<Vec<_>>>()?;
    for (s, scale) in scales.iter().enumerate() {
        for m in 0..=scale.path.len() {
            let (_, cost) = cost_at(image, scale, method, m)?;
            let total = cost.total_bits();
            min_cost = min_cost.min(total);
            if total < budget {
                feasible.push((s, m));
            }
        }
    }
    if feasible.is_empty() {
        return Err(Error::InfeasibleBudget { budget, min_cost });
    }
    let points = feasible
        .par_iter()
        .map(|&(s, m)| {
            let scale = &scales[s];
            let (quantised, cost) = cost_at(image, scale, method, m)?;
            let err = reconstruction_mse(image, scale, &quantised, options)?;
            Ok(point(image, method, scale.l, m, &cost, q_levels(&scale.path, m), err))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(*points
        .iter()
        .min_by(|a, b| {
            a.mse
                .total_cmp(&b.mse)
                .then(b.l.cmp(&a.l))
                .then(b.m.cmp(&a.m))
        })
        .expect("non-empty"))
}

/// Evaluate every `(l, m)` combination of one method. `m_grid = None` means
/// every scale of the path; listed scales beyond the path length are skipped.
pub fn rd_points(
    image: &Image,
    spars_path: &SparsificationPath,
    method: QuantMethod,
    l_grid: &[usize],
    m_grid: Option<&[usize]>,
    options: &SparsQuantOptions,
) -> Result<Vec<RateDistortionPoint>> {
    check_grid(image, spars_path, l_grid)?;
    let scales = l_grid
        .par_iter()
        .map(|&l| prepare_scale(image, spars_path, method, l, options))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = scales
        .iter()
        .enumerate()
        .flat_map(|(s, scale)| {
            let ms: Vec<usize> = match m_grid {
                Some(grid) => grid.iter().copied().filter(|&m| m <= scale.path.len()).collect(),
                None => (0..=scale.path.len()).collect(),
            };
            ms.into_iter().map(move |m| (s, m))
        })
        .collect();
    jobs.par_iter()
        .map(|&(s, m)| {
            let scale = &scales[s];
            let (quantised, cost) = cost_at(image, scale, method, m)?;
            let err = reconstruction_mse(image, scale, &quantised, options)?;
            Ok(point(image, method, scale.l, m, &cost, q_levels(&scale.path, m), err))
        })
        .collect()
}

/// Best point among those reaching at least `ratio_threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub ratio_threshold: f64,
    pub point: RateDistortionPoint,
}

/// Ratio thresholds `10^(k / buckets_per_decade)`.
pub fn ratio_bucket(k: i32, buckets_per_decade: u32) -> f64 {
    10f64.powf(f64::from(k) / f64::from(buckets_per_decade))
}

/// Lower MSE envelope over compression-ratio buckets. For each threshold
/// between the smallest and largest achieved ratio, keep the lowest-MSE
/// point whose ratio reaches the threshold. MSE is therefore non-decreasing
/// in the threshold.
pub fn lower_envelope(points: &[RateDistortionPoint], buckets_per_decade: u32) -> Vec<EnvelopePoint> {
    if points.is_empty() {
        return Vec::new();
    }
    let b = f64::from(buckets_per_decade);
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.compression_ratio), hi.max(p.compression_ratio))
    });
    let k_min = (b * lo.log10()).floor() as i32;
    let k_max = (b * hi.log10()).floor() as i32;
    (k_min..=k_max)
        .filter_map(|k| {
            let threshold = ratio_bucket(k, buckets_per_decade);
            points
                .iter()
                .filter(|p| p.compression_ratio >= threshold)
                .min_by(|a, b| {
                    a.mse
                        .total_cmp(&b.mse)
                        .then(b.compression_ratio.total_cmp(&a.compression_ratio))
                })
                .map(|&point| EnvelopePoint { ratio_threshold: threshold, point })
        })
        .collect()
}

/// Envelope curves (MSE against compression ratio) for several methods.
pub fn rd_curve(
    image: &Image,
    spars_path: &SparsificationPath,
    methods: &[QuantMethod],
    l_grid: &[usize],
    m_grid: Option<&[usize]>,
    buckets_per_decade: u32,
    options: &SparsQuantOptions,
) -> Result<Vec<EnvelopePoint>> {
    let mut out = Vec::new();
    for &method in methods {
        let points = rd_points(image, spars_path, method, l_grid, m_grid, options)?;
        out.extend(lower_envelope(&points, buckets_per_decade));
    }
    Ok(out)
}

/// CSV with columns `method,ratio,mse`.
pub fn curve_csv(curve: &[EnvelopePoint]) -> String {
    let mut out = String::from("method,ratio,mse\n");
    for e in curve {
        out.push_str(&format!("{},{},{}\n", e.point.method, e.point.compression_ratio, e.point.mse));
    }
    out
}
