//! Grey-value images, pixel masks, level sets and the scalar metrics that
//! act on them (entropy, total contrast, mean squared error).

use crate::error::{Error, Result};

/// Default number of grey levels for 8-bit data.
pub const DEFAULT_GREY_DEPTH: u16 = 256;

/// A rectangular grid of integer grey values stored row by row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    grey_depth: u16,
    pixels: Vec<u8>,
}

impl Image {
    /// Build an 8-bit image (`Q = 256`).
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        Self::with_depth(width, height, DEFAULT_GREY_DEPTH, pixels)
    }

    /// Build an image whose grey values lie in `0..grey_depth`.
    pub fn with_depth(width: usize, height: usize, grey_depth: u16, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty extent {width}x{height}")));
        }
        if grey_depth == 0 || grey_depth > 256 {
            return Err(Error::InvalidImage(format!("grey depth {grey_depth} outside 1..=256")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} grid",
                pixels.len()
            )));
        }
        if let Some(&v) = pixels.iter().find(|&&v| u16::from(v) >= grey_depth) {
            return Err(Error::InvalidImage(format!("grey value {v} exceeds depth {grey_depth}")));
        }
        Ok(Self { width, height, grey_depth, pixels })
    }

    /// Constant image of value `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of grey levels `Q` of the value range.
    pub fn grey_depth(&self) -> u16 {
        self.grey_depth
    }

    /// Pixel count `N`.
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    /// Always false; images have at least one pixel.
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Replace the pixel buffer, keeping extent and depth.
    pub(crate) fn with_pixels(&self, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        Self { width: self.width, height: self.height, grey_depth: self.grey_depth, pixels }
    }

    /// Grey values at the given pixel indices (or all pixels).
    pub fn values_at(&self, mask: Option<&Mask>) -> Vec<u8> {
        match mask {
            Some(m) => m.indices().iter().map(|&i| self.pixels[i]).collect(),
            None => self.pixels.clone(),
        }
    }
}

/// A set of known pixel indices within an image of `image_size` pixels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    indices: Vec<usize>,
    image_size: usize,
}

impl Mask {
    /// Build a mask from arbitrary-order indices. Duplicates and indices
    /// outside the image are rejected.
    pub fn new(mut indices: Vec<usize>, image_size: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&last) = indices.last() {
            if last >= image_size {
                return Err(Error::InvalidMask(format!(
                    "index {last} outside image of {image_size} pixels"
                )));
            }
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidMask(format!("duplicate index {}", w[0])));
        }
        Ok(Self { indices, image_size })
    }

    /// Mask containing every pixel.
    pub fn full(image_size: usize) -> Self {
        Self { indices: (0..image_size).collect(), image_size }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.image_size
    }

    /// Fraction of known pixels.
    pub fn density(&self) -> f64 {
        self.indices.len() as f64 / self.image_size as f64
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Dense membership flags, one per pixel.
    pub fn membership(&self) -> Vec<bool> {
        let mut known = vec![false; self.image_size];
        for &i in &self.indices {
            known[i] = true;
        }
        known
    }

    pub(crate) fn check_image(&self, image: &Image) -> Result<()> {
        if self.image_size != image.len() {
            return Err(Error::DimensionMismatch(format!(
                "mask for {} pixels applied to image of {} pixels",
                self.image_size,
                image.len()
            )));
        }
        Ok(())
    }
}

/// The occurring grey values of a pixel set together with their level sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelPartition {
    values: Vec<u8>,
    sets: Vec<Vec<usize>>,
    domain_size: usize,
}

impl LevelPartition {
    /// Strictly increasing occurring grey values.
    pub fn values(&self) -> &[u8] {
        &self.values
    }

    /// Sorted pixel indices per value, parallel to [`values`](Self::values).
    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// Number of pixels the partition covers.
    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    /// Number of non-empty level sets.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Occurrence count per value.
    pub fn counts(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    /// Build a partition directly from a value histogram. The level sets hold
    /// synthetic indices `0..n` assigned in value order; useful when only the
    /// histogram matters.
    pub fn from_histogram(histogram: &[(u8, usize)]) -> Result<Self> {
        let mut entries: Vec<(u8, usize)> = histogram.iter().copied().filter(|&(_, c)| c > 0).collect();
        entries.sort_unstable_by_key(|&(v, _)| v);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("repeated value in histogram".into()));
        }
        if entries.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut next = 0;
        let mut values = Vec::with_capacity(entries.len());
        let mut sets = Vec::with_capacity(entries.len());
        for (v, c) in entries {
            values.push(v);
            sets.push((next..next + c).collect());
            next += c;
        }
        Ok(Self { values, sets, domain_size: next })
    }
}

/// Group the considered pixels by grey value.
pub fn level_partition(image: &Image, mask: Option<&Mask>) -> Result<LevelPartition> {
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); 256];
    let domain_size = match mask {
        Some(m) => {
            m.check_image(image)?;
            if m.is_empty() {
                return Err(Error::EmptyDomain);
            }
            for &i in m.indices() {
                buckets[image.pixels[i] as usize].push(i);
            }
            m.len()
        }
        None => {
            for (i, &v) in image.pixels.iter().enumerate() {
                buckets[v as usize].push(i);
            }
            image.len()
        }
    };
    let mut values = Vec::new();
    let mut sets = Vec::new();
    for (v, set) in buckets.into_iter().enumerate() {
        if !set.is_empty() {
            values.push(v as u8);
            sets.push(set);
        }
    }
    Ok(LevelPartition { values, sets, domain_size })
}

/// Shannon entropy in bits of a set of occurrence counts summing to `total`.
pub(crate) fn entropy_of_counts(counts: impl IntoIterator<Item = usize>, total: usize) -> f64 {
    let n = total as f64;
    let h: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    // -0.0 for a single symbol
    h.max(0.0)
}

/// Zeroth-order Shannon entropy of the level-set histogram, in bits per pixel.
pub fn entropy(partition: &LevelPartition) -> f64 {
    entropy_of_counts(partition.sets.iter().map(Vec::len), partition.domain_size)
}

/// Entropy of a plain list of grey values.
pub fn entropy_of_values(values: &[u8]) -> f64 {
    let mut hist = [0usize; 256];
    for &v in values {
        hist[v as usize] += 1;
    }
    entropy_of_counts(hist.iter().copied(), values.len())
}

/// Difference between the largest and smallest considered grey value.
pub fn total_contrast(image: &Image, mask: Option<&Mask>) -> Result<u8> {
    let values = match mask {
        Some(m) => {
            m.check_image(image)?;
            image.values_at(Some(m))
        }
        None => image.pixels.clone(),
    };
    let min = values.iter().min().ok_or(Error::EmptyDomain)?;
    let max = values.iter().max().ok_or(Error::EmptyDomain)?;
    Ok(max - min)
}

/// Mean squared error per pixel between two images of equal extent.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let sum: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}
