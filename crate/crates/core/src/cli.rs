use std::fs;
use std::io::Write;
use std::path::Path;

use quantscale::compression::{density_grid, lower_envelope, rd_optimize, rd_points, curve_csv};
use quantscale::image::entropy_of_values;
use quantscale::scale_space::analyse;
use quantscale::sparsification::known_count_for_density;
use quantscale::{
    apply_path, build_path, inpaint, level_partition, probabilistic_sparsify, read_pgm, round_to_grey, write_pgm,
    Error, Image, InpaintConfig, Mask, QuantMethod, SparsQuantOptions, SparsificationPath, SparsifyParams,
};
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. } => CliError::Solver(e.to_string()),
            Error::InfeasibleBudget { min_cost, .. } => {
                CliError::Infeasible(format!("{e}\nminimal_cost_bits={min_cost}"))
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub fn quant_options(candidate_limit: Option<usize>, tolerance: f64) -> SparsQuantOptions {
    SparsQuantOptions { inpaint: InpaintConfig { tolerance, max_iterations: None }, candidate_limit }
}

/// Write through a temporary sibling and rename into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Input(format!("invalid output path {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_image(path: &Path) -> Result<Image, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    read_pgm(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_path(path: &Path, image: &Image) -> Result<SparsificationPath, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let spars = SparsificationPath::from_text(&text)?;
    if spars.image_size() != image.len() {
        return Err(CliError::Input(format!(
            "{} covers {} pixels, image has {}",
            path.display(),
            spars.image_size(),
            image.len()
        )));
    }
    Ok(spars)
}

/// Parse `<path-file>@<density>`.
fn load_mask(spec: &str, image: &Image) -> Result<Mask, CliError> {
    let (file, density) = spec
        .rsplit_once('@')
        .ok_or_else(|| CliError::Input(format!("mask {spec:?} is not <path-file>@<density>")))?;
    let density: f64 = density
        .parse()
        .ok()
        .filter(|d: &f64| *d > 0.0 && *d <= 1.0)
        .ok_or_else(|| CliError::Input(format!("invalid mask density {density:?}")))?;
    Ok(load_path(Path::new(file), image)?.mask_for_density(density))
}

fn parse_method(name: &str) -> Result<QuantMethod, CliError> {
    name.parse().map_err(CliError::from)
}

#[allow(clippy::too_many_arguments)]
pub fn sparsify(
    input: &Path,
    density: f64,
    p: f64,
    q: f64,
    seed: u64,
    out: &Path,
    mask_out: Option<&Path>,
    tolerance: f64,
) -> Result<(), CliError> {
    let image = load_image(input)?;
    let params = SparsifyParams { candidate_fraction: p, keep_fraction: q, target_density: density, seed };
    let config = InpaintConfig { tolerance, max_iterations: None };
    let path = probabilistic_sparsify(&image, &params, &config)?;
    write_atomic(out, path.to_text().as_bytes())?;
    if let Some(mask_out) = mask_out {
        let mask = path.mask_for_density(density);
        let known = mask.membership();
        let preview: Vec<u8> = known.iter().map(|&k| if k { 255 } else { 0 }).collect();
        let preview = Image::new(image.width(), image.height(), preview)?;
        write_atomic(mask_out, &write_pgm(&preview))?;
    }
    println!(
        "pixels={} known_at_density={}",
        image.len(),
        known_count_for_density(image.len(), density)
    );
    Ok(())
}

pub struct QuantiseArgs<'a> {
    pub input: &'a Path,
    pub method: &'a str,
    pub mask: Option<&'a str>,
    pub levels: usize,
    pub out: &'a Path,
    pub path_out: &'a Path,
    pub reconstruct: bool,
    pub options: SparsQuantOptions,
}

pub fn quantise(args: &QuantiseArgs) -> Result<(), CliError> {
    let image = load_image(args.input)?;
    let method = parse_method(args.method)?;
    let mask = args.mask.map(|m| load_mask(m, &image)).transpose()?;
    if method == QuantMethod::Sparsification && mask.is_none() {
        return Err(CliError::Input("the sparsification method needs --mask".into()));
    }
    let path = build_path(method, &image, mask.as_ref(), &args.options)?;
    let available = path.initial_values().len();
    if args.levels == 0 || args.levels > available {
        return Err(CliError::Input(format!("--levels {} outside 1..={available}", args.levels)));
    }
    let quantised = apply_path(&image, mask.as_ref(), &path, available - args.levels)?;
    let output = match (&mask, args.reconstruct) {
        (Some(mask), true) => round_to_grey(&inpaint(&quantised, mask, &args.options.inpaint)?, image.grey_depth()),
        _ => quantised,
    };
    write_atomic(args.out, &write_pgm(&output))?;
    write_atomic(args.path_out, path.to_text().as_bytes())?;
    Ok(())
}

pub fn scalespace(
    input: &Path,
    method: &str,
    mask: Option<&str>,
    report_path: &Path,
    options: &SparsQuantOptions,
) -> Result<(), CliError> {
    let image = load_image(input)?;
    let method = parse_method(method)?;
    let mask = mask.map(|m| load_mask(m, &image)).transpose()?;
    let path = build_path(method, &image, mask.as_ref(), options)?;
    let report = analyse(&image, mask.as_ref(), &path)?;
    write_atomic(report_path, report.to_csv().as_bytes())?;
    println!("steps={}", path.len());
    println!("entropy_lyapunov={}", if report.entropy.passed() { "pass" } else { "FAIL" });
    println!("contrast_lyapunov={}", if report.contrast.passed() { "pass" } else { "FAIL" });
    println!("maxmin={}", if report.maxmin.passed() { "pass" } else { "FAIL" });
    if !report.passed() {
        return Err(CliError::CheckFailed("scale-space property check failed".into()));
    }
    Ok(())
}

pub struct CompressArgs<'a> {
    pub input: &'a Path,
    pub method: &'a str,
    pub budget: Option<f64>,
    pub ratio: Option<f64>,
    pub seed: u64,
    pub p: f64,
    pub q: f64,
    pub densities: Vec<f64>,
    pub path: Option<&'a Path>,
    pub candidate_limit: Option<usize>,
    pub tolerance: f64,
    pub out: &'a Path,
    pub image_out: &'a Path,
}

fn sparsification_for(
    image: &Image,
    path: Option<&Path>,
    densities: &[f64],
    seed: u64,
    p: f64,
    q: f64,
    config: &InpaintConfig,
) -> Result<SparsificationPath, CliError> {
    if densities.is_empty() || densities.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
        return Err(CliError::Input("densities must lie in (0, 1]".into()));
    }
    match path {
        Some(path) => load_path(path, image),
        None => {
            let target = densities.iter().copied().fold(1.0, f64::min);
            let params = SparsifyParams { candidate_fraction: p, keep_fraction: q, target_density: target, seed };
            Ok(probabilistic_sparsify(image, &params, config)?)
        }
    }
}

fn list(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn compress(args: &CompressArgs) -> Result<(), CliError> {
    let image = load_image(args.input)?;
    let method = parse_method(args.method)?;
    let options = quant_options(args.candidate_limit, args.tolerance);
    let budget = match (args.budget, args.ratio) {
        (Some(b), _) => b,
        (None, Some(r)) if r > 0.0 => 8.0 * image.len() as f64 / r,
        (None, Some(r)) => return Err(CliError::Input(format!("invalid ratio {r}"))),
        (None, None) => f64::INFINITY,
    };
    let spars = sparsification_for(&image, args.path, &args.densities, args.seed, args.p, args.q, &options.inpaint)?;
    let grid = density_grid(&spars, &args.densities);
    let best = rd_optimize(&image, &spars, method, budget, &grid, &options)?;

    let mask = spars.mask_at(best.l)?;
    let path = build_path(method, &image, Some(&mask), &options)?;
    let quantised = apply_path(&image, Some(&mask), &path, best.m)?;
    let reconstruction = round_to_grey(&inpaint(&quantised, &mask, &options.inpaint)?, image.grey_depth());

    let mut manifest = String::new();
    let mut entry = |k: &str, v: String| manifest.push_str(&format!("{k}={v}\n"));
    entry("input", args.input.display().to_string());
    entry("width", image.width().to_string());
    entry("height", image.height().to_string());
    entry("seed", args.seed.to_string());
    entry("candidate_fraction", args.p.to_string());
    entry("keep_fraction", args.q.to_string());
    entry("sparsification_path", args.path.map_or("generated".into(), |p| p.display().to_string()));
    entry("densities", list(&args.densities));
    entry("budget_bits", budget.to_string());
    entry("tolerance", args.tolerance.to_string());
    entry("candidate_limit", args.candidate_limit.map_or("all".into(), |k| k.to_string()));
    entry(
        "approximate",
        (method == QuantMethod::Sparsification && args.candidate_limit.is_some()).to_string(),
    );
    for (k, v) in best.manifest_entries() {
        entry(k, v);
    }
    entry("density", mask.density().to_string());
    entry("image_out", args.image_out.display().to_string());

    write_atomic(args.image_out, &write_pgm(&reconstruction))?;
    write_atomic(args.out, manifest.as_bytes())?;
    print!("{manifest}");
    Ok(())
}

pub struct CurveArgs<'a> {
    pub input: &'a Path,
    pub methods: &'a [String],
    pub densities: Vec<f64>,
    pub seed: u64,
    pub p: f64,
    pub q: f64,
    pub path: Option<&'a Path>,
    pub buckets_per_decade: u32,
    pub tolerance: f64,
    pub out: &'a Path,
    pub levels_out: Option<&'a Path>,
}

pub fn curve(args: &CurveArgs) -> Result<(), CliError> {
    let image = load_image(args.input)?;
    let methods = args.methods.iter().map(|m| parse_method(m)).collect::<Result<Vec<_>, _>>()?;
    let options = quant_options(None, args.tolerance);
    let spars = sparsification_for(&image, args.path, &args.densities, args.seed, args.p, args.q, &options.inpaint)?;
    let grid = density_grid(&spars, &args.densities);
    if args.buckets_per_decade == 0 {
        return Err(CliError::Input("buckets per decade must be positive".into()));
    }

    let mut envelope = Vec::new();
    for &method in &methods {
        let points = rd_points(&image, &spars, method, &grid, None, &options)?;
        envelope.extend(lower_envelope(&points, args.buckets_per_decade));
    }
    write_atomic(args.out, curve_csv(&envelope).as_bytes())?;

    if let Some(levels_out) = args.levels_out {
        let mask = spars.mask_at(grid[0])?;
        let known = image.values_at(Some(&mask));
        let mut csv = String::from("method,q_levels,entropy,mse\n");
        for &method in &methods {
            let path = build_path(method, &image, Some(&mask), &options)?;
            for m in 0..=path.len() {
                let quantised = apply_path(&image, Some(&mask), &path, m)?.values_at(Some(&mask));
                let err: f64 = known
                    .iter()
                    .zip(&quantised)
                    .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
                    .sum::<f64>()
                    / known.len() as f64;
                csv.push_str(&format!(
                    "{method},{},{},{err}\n",
                    path.initial_values().len() - m,
                    entropy_of_values(&quantised)
                ));
            }
        }
        write_atomic(levels_out, csv.as_bytes())?;
    }
    let occurring = level_partition(&image, None)?.len();
    println!("pixels={} occurring_levels={occurring} points={}", image.len(), envelope.len());
    Ok(())
}

pub fn synth(width: usize, height: usize, out: &Path) -> Result<(), CliError> {
    if width == 0 || height == 0 {
        return Err(CliError::Input("extent must be positive".into()));
    }
    let image = quantscale::synthetic::piecewise_smooth(width, height);
    write_atomic(out, &write_pgm(&image))?;
    Ok(())
}
