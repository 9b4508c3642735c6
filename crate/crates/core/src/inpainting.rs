//! Homogeneous diffusion inpainting.
//!
//! Known pixels keep their values; every unknown pixel satisfies the discrete
//! Laplace equation `sum_j (u_j - u_i) = 0` over its 4-neighbours inside the
//! image. Neighbours across the border are mirrored onto the pixel itself and
//! drop out of the stencil, which gives reflecting boundary conditions.
//!
//! Eliminating the known pixels leaves a sparse symmetric positive definite
//! system over the unknowns, solved matrix-free with conjugate gradients.

use crate::error::{Error, Result};
use crate::image::{Image, Mask};

const NO_SLOT: u32 = u32::MAX;

/// Stopping rule for the conjugate gradient solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InpaintConfig {
    /// Bound on `||b - A x|| / ||b||` over the unknown pixels.
    pub tolerance: f64,
    /// Iteration cap; `None` means `10 * N`.
    pub max_iterations: Option<usize>,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iterations: None }
    }
}

impl InpaintConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidParameter(format!("tolerance {} must be positive", self.tolerance)));
        }
        Ok(())
    }
}

/// Real-valued pixel grid produced by inpainting.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Reconstruction {
    /// Mean squared error against an integer image of equal extent.
    pub fn mse(&self, reference: &Image) -> Result<f64> {
        if self.width != reference.width() || self.height != reference.height() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} reconstruction vs {}x{} image",
                self.width,
                self.height,
                reference.width(),
                reference.height()
            )));
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(reference.pixels())
            .map(|(&u, &f)| {
                let d = u - f64::from(f);
                d * d
            })
            .sum();
        Ok(sum / self.values.len() as f64)
    }
}

/// Round half away from zero and clamp into `0..grey_depth`.
pub fn round_to_grey(reconstruction: &Reconstruction, grey_depth: u16) -> Image {
    let top = f64::from(grey_depth - 1);
    let pixels = reconstruction
        .values
        .iter()
        .map(|&u| u.round().clamp(0.0, top) as u8)
        .collect();
    Image::with_depth(reconstruction.width, reconstruction.height, grey_depth, pixels)
        .expect("clamped values lie within the grey depth")
}

/// Laplace system for one mask, reusable across several sets of known data.
#[derive(Debug, Clone)]
pub struct InpaintSystem {
    width: usize,
    height: usize,
    known: Vec<bool>,
    /// Pixel index of every unknown.
    unknowns: Vec<usize>,
    /// Stencil degree (in-image neighbour count) per unknown.
    degree: Vec<f64>,
    /// Unknown-slot neighbours per unknown, `NO_SLOT` padded.
    unknown_neighbours: Vec<[u32; 4]>,
    /// Known-pixel neighbours per unknown, `usize::MAX` padded.
    known_neighbours: Vec<[usize; 4]>,
}

impl InpaintSystem {
    pub fn new(width: usize, height: usize, mask: &Mask) -> Result<Self> {
        let n = width * height;
        if mask.image_size() != n {
            return Err(Error::DimensionMismatch(format!(
                "mask for {} pixels on a {width}x{height} grid",
                mask.image_size()
            )));
        }
        if mask.is_empty() {
            return Err(Error::InvalidMask("empty mask".into()));
        }
        let known = mask.membership();
        let mut slot = vec![NO_SLOT; n];
        let unknowns: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();
        for (s, &i) in unknowns.iter().enumerate() {
            slot[i] = s as u32;
        }
        let mut degree = Vec::with_capacity(unknowns.len());
        let mut unknown_neighbours = Vec::with_capacity(unknowns.len());
        let mut known_neighbours = Vec::with_capacity(unknowns.len());
        for &i in &unknowns {
            let (x, y) = (i % width, i / width);
            let mut nbrs = [usize::MAX; 4];
            let mut count = 0;
            if x > 0 {
                nbrs[count] = i - 1;
                count += 1;
            }
            if x + 1 < width {
                nbrs[count] = i + 1;
                count += 1;
            }
            if y > 0 {
                nbrs[count] = i - width;
                count += 1;
            }
            if y + 1 < height {
                nbrs[count] = i + width;
                count += 1;
            }
            let mut un = [NO_SLOT; 4];
            let mut kn = [usize::MAX; 4];
            let (mut nu, mut nk) = (0, 0);
            for &j in &nbrs[..count] {
                if known[j] {
                    kn[nk] = j;
                    nk += 1;
                } else {
                    un[nu] = slot[j];
                    nu += 1;
                }
            }
            degree.push(count as f64);
            unknown_neighbours.push(un);
            known_neighbours.push(kn);
        }
        Ok(Self { width, height, known, unknowns, degree, unknown_neighbours, known_neighbours })
    }

    pub fn unknown_count(&self) -> usize {
        self.unknowns.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            let mut acc = self.degree[s] * x[s];
            for &t in &self.unknown_neighbours[s] {
                if t == NO_SLOT {
                    break;
                }
                acc -= x[t as usize];
            }
            *o = acc;
        }
    }

    fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        self.apply(x, r);
        for (ri, &bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
    }

    /// Inpaint from `data`, a full-size grid whose entries at known pixels are
    /// the interpolation constraints (other entries are ignored). `guess`, if
    /// given, is a full-size starting point for the unknowns.
    pub fn solve(&self, data: &[f64], guess: Option<&[f64]>, config: &InpaintConfig) -> Result<Reconstruction> {
        config.validate()?;
        let n = self.width * self.height;
        if data.len() != n || guess.is_some_and(|g| g.len() != n) {
            return Err(Error::DimensionMismatch(format!("expected {n} values")));
        }
        let mut values = data.to_vec();
        let m = self.unknowns.len();
        if m == 0 {
            return Ok(Reconstruction { width: self.width, height: self.height, values });
        }

        let b: Vec<f64> = self
            .known_neighbours
            .iter()
            .map(|kn| kn.iter().take_while(|&&j| j != usize::MAX).map(|&j| data[j]).sum())
            .collect();
        let b_norm = norm(&b);
        let mut x: Vec<f64> = match guess {
            Some(g) => self.unknowns.iter().map(|&i| g[i]).collect(),
            None => {
                let (sum, count) = (0..n)
                    .filter(|&i| self.known[i])
                    .fold((0.0, 0usize), |(s, c), i| (s + data[i], c + 1));
                vec![sum / count as f64; m]
            }
        };
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let threshold = config.tolerance * b_norm;
            let max_iterations = config.max_iterations.unwrap_or(10 * n);
            conjugate_gradient(self, &b, &mut x, threshold, max_iterations)?;
        }
        for (&i, &v) in self.unknowns.iter().zip(&x) {
            values[i] = v;
        }
        Ok(Reconstruction { width: self.width, height: self.height, values })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn conjugate_gradient(
    system: &InpaintSystem,
    b: &[f64],
    x: &mut [f64],
    threshold: f64,
    max_iterations: usize,
) -> Result<()> {
    let m = x.len();
    let mut r = vec![0.0; m];
    let mut ap = vec![0.0; m];
    system.residual(b, x, &mut r);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    loop {
        if rr.sqrt() <= threshold {
            // guard against drift of the recursively updated residual
            system.residual(b, x, &mut r);
            rr = dot(&r, &r);
            if rr.sqrt() <= threshold {
                return Ok(());
            }
            p.copy_from_slice(&r);
        }
        if iterations >= max_iterations {
            return Err(Error::NoConvergence { iterations, residual: rr.sqrt() });
        }
        system.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            system.residual(b, x, &mut r);
            let residual = norm(&r);
            if residual <= threshold {
                return Ok(());
            }
            return Err(Error::NoConvergence { iterations, residual });
        }
        let alpha = rr / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
        iterations += 1;
    }
}

/// Reconstruct `known` from its values on `mask`.
pub fn inpaint(known: &Image, mask: &Mask, config: &InpaintConfig) -> Result<Reconstruction> {
    let system = InpaintSystem::new(known.width(), known.height(), mask)?;
    let data: Vec<f64> = known.pixels().iter().map(|&v| f64::from(v)).collect();
    system.solve(&data, None, config)
}
