//! Spatial sparsification paths: nested inpainting masks obtained by
//! removing one pixel at a time, ordered by probabilistic sparsification.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, PathFormatError, Result};
use crate::image::{Image, Mask};
use crate::inpainting::{InpaintConfig, InpaintSystem};

const PATH_MAGIC: &str = "QSSPATH v1";

/// Pixel removal order from the full mask down to a single pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsificationPath {
    removal_order: Vec<usize>,
}

/// Number of known pixels `ceil(density * N)`, at least one.
pub fn known_count_for_density(image_size: usize, density: f64) -> usize {
    ((density * image_size as f64).ceil() as usize).clamp(1, image_size)
}

impl SparsificationPath {
    /// Wrap a removal order; it must be a permutation of `0..N`.
    pub fn new(removal_order: Vec<usize>) -> Result<Self> {
        let n = removal_order.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty sparsification path".into()));
        }
        let mut seen = vec![false; n];
        for &i in &removal_order {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!("removal order is not a permutation (index {i})")));
            }
        }
        Ok(Self { removal_order })
    }

    pub fn removal_order(&self) -> &[usize] {
        &self.removal_order
    }

    pub fn image_size(&self) -> usize {
        self.removal_order.len()
    }

    /// Known pixels after `step` removals.
    pub fn mask_at(&self, step: usize) -> Result<Mask> {
        let n = self.image_size();
        if step >= n {
            return Err(Error::OutOfRange { index: step, max: n - 1 });
        }
        Mask::new(self.removal_order[step..].to_vec(), n)
    }

    /// Scale `l` whose mask keeps `ceil(density * N)` pixels.
    pub fn step_for_density(&self, density: f64) -> usize {
        self.image_size() - known_count_for_density(self.image_size(), density)
    }

    pub fn mask_for_density(&self, density: f64) -> Mask {
        self.mask_at(self.step_for_density(density)).expect("step is within range")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{PATH_MAGIC} N={}\n", self.image_size());
        for i in &self.removal_order {
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let n: usize = header
            .strip_prefix(PATH_MAGIC)
            .and_then(|rest| rest.trim().strip_prefix("N="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format_error(1, format!("expected \"{PATH_MAGIC} N=<N>\", found {header:?}")))?;
        let mut order = Vec::with_capacity(n);
        for (k, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            order.push(line.parse().map_err(|_| format_error(k + 2, format!("invalid index {line:?}")))?);
        }
        if order.len() != n {
            return Err(format_error(n + 2, format!("expected {n} indices, found {}", order.len())).into());
        }
        Self::new(order).map_err(|e| format_error(0, e.to_string()).into())
    }
}

fn format_error(line: usize, message: String) -> PathFormatError {
    PathFormatError { line, message }
}

/// Parameters of probabilistic sparsification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsifyParams {
    /// Fraction `p` of the current mask drawn as removal candidates.
    pub candidate_fraction: f64,
    /// Fraction `q` of candidates with the largest error put back.
    pub keep_fraction: f64,
    /// Mask density at which the adaptive phase stops.
    pub target_density: f64,
    pub seed: u64,
}

impl Default for SparsifyParams {
    fn default() -> Self {
        Self { candidate_fraction: 0.02, keep_fraction: 0.02, target_density: 0.01, seed: 0 }
    }
}

impl SparsifyParams {
    fn validate(&self) -> Result<()> {
        let p = self.candidate_fraction;
        let q = self.keep_fraction;
        let d = self.target_density;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("candidate fraction {p} outside (0, 1]")));
        }
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("keep fraction {q} outside [0, 1)")));
        }
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::InvalidParameter(format!("target density {d} outside (0, 1]")));
        }
        Ok(())
    }
}

struct Sparsifier<'a> {
    image: &'a Image,
    known: Vec<usize>,
    order: Vec<usize>,
    reconstruction: Vec<f64>,
    rng: ChaCha8Rng,
    params: SparsifyParams,
    config: InpaintConfig,
}

impl Sparsifier<'_> {
    fn run_until(&mut self, target: usize) -> Result<()> {
        let image = self.image;
        let original: Vec<f64> = image.pixels().iter().map(|&v| f64::from(v)).collect();
        while self.known.len() > target {
            let size = self.known.len();
            let count = ((self.params.candidate_fraction * size as f64).ceil() as usize).clamp(1, size - 1);
            let picks = sample(&mut self.rng, size, count).into_vec();
            let mut is_candidate = vec![false; size];
            for &k in &picks {
                is_candidate[k] = true;
            }
            let remaining: Vec<usize> = self
                .known
                .iter()
                .zip(&is_candidate)
                .filter(|(_, &c)| !c)
                .map(|(&i, _)| i)
                .collect();
            let mask = Mask::new(remaining, image.len())?;
            let system = InpaintSystem::new(image.width(), image.height(), &mask)?;
            let u = system.solve(&original, Some(&self.reconstruction), &self.config)?;

            let mut candidates: Vec<(f64, usize)> = picks
                .iter()
                .map(|&k| {
                    let i = self.known[k];
                    ((u.values[i] - original[i]).abs(), i)
                })
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let keep = ((self.params.keep_fraction * count as f64).ceil() as usize).min(count - 1);
            let remove = (count - keep).min(size - target);

            let mut removed = vec![false; image.len()];
            for &(_, i) in &candidates[..remove] {
                removed[i] = true;
                self.order.push(i);
            }
            self.known.retain(|&i| !removed[i]);
            // warm start for the next round
            self.reconstruction = u.values;
        }
        Ok(())
    }
}

/// Order all pixels for removal by probabilistic sparsification.
///
/// Each round draws `ceil(p |K|)` candidates from the current mask `K`,
/// inpaints without them, puts back the `ceil(q * candidates)` with the
/// largest local error `|u_i - f_i|` and removes the rest, lowest error
/// first. Rounds stop at `ceil(target_density * N)` known pixels; the
/// remainder of the path is produced by the same procedure down to one pixel.
pub fn probabilistic_sparsify(
    image: &Image,
    params: &SparsifyParams,
    config: &InpaintConfig,
) -> Result<SparsificationPath> {
    params.validate()?;
    let n = image.len();
    let mut state = Sparsifier {
        image,
        known: (0..n).collect(),
        order: Vec::with_capacity(n),
        reconstruction: image.pixels().iter().map(|&v| f64::from(v)).collect(),
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        params: *params,
        config: *config,
    };
    state.run_until(known_count_for_density(n, params.target_density))?;
    state.run_until(1)?;
    state.order.extend_from_slice(&state.known);
    SparsificationPath::new(state.order)
}
