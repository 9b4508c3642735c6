use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cli;

use cli::CliError;

#[derive(Parser)]
#[command(name = "quantscale", version, about = "Quantisation scale-spaces and inpainting-based compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a probabilistic sparsification path (QSSPATH file).
    Sparsify {
        input: PathBuf,
        /// Mask density where the adaptive phase stops.
        #[arg(long, default_value_t = 0.08)]
        density: f64,
        /// Fraction of the mask drawn as candidates per round.
        #[arg(long, default_value_t = 0.02)]
        p: f64,
        /// Fraction of candidates put back per round.
        #[arg(long, default_value_t = 0.02)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional PGM preview of the mask at `--density` (255 = known).
        #[arg(long)]
        mask_out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Quantise to a given number of grey levels and write the merge path.
    Quantise {
        input: PathBuf,
        #[arg(long, default_value = "ward")]
        method: String,
        /// Known-data mask as `<path-file>@<density>`.
        #[arg(long)]
        mask: Option<String>,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
        /// QSSQPATH output; defaults to `<out>.qssqpath`.
        #[arg(long)]
        path_out: Option<PathBuf>,
        /// Write the inpainted reconstruction instead of the quantised data.
        #[arg(long)]
        reconstruct: bool,
        /// Restrict sparsification candidates to the K cheapest Ward pairs.
        #[arg(long)]
        candidate_limit: Option<usize>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Emit the per-step scale-space table and verify its properties.
    Scalespace {
        input: PathBuf,
        #[arg(long, default_value = "ward")]
        method: String,
        #[arg(long)]
        mask: Option<String>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        candidate_limit: Option<usize>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Rate-distortion optimised compression under a bit budget.
    Compress {
        input: PathBuf,
        #[arg(long, default_value = "spars")]
        method: String,
        #[arg(long, conflicts_with = "ratio")]
        budget: Option<f64>,
        /// Target compression ratio; the budget becomes `8 N / ratio`.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        p: f64,
        #[arg(long, default_value_t = 0.02)]
        q: f64,
        /// Comma-separated mask densities for the sparsification scale.
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
        /// Reuse an existing QSSPATH file instead of sparsifying.
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long)]
        candidate_limit: Option<usize>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        /// Manifest output.
        #[arg(long)]
        out: PathBuf,
        /// Reconstruction output; defaults to `<out>.pgm`.
        #[arg(long)]
        image_out: Option<PathBuf>,
    },
    /// Rate-distortion envelopes (method,ratio,mse) for several methods.
    Curve {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "uniform,ward,spars")]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        p: f64,
        #[arg(long, default_value_t = 0.02)]
        q: f64,
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        buckets_per_decade: u32,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[arg(long)]
        out: PathBuf,
        /// Per-level table (method,q_levels,entropy,mse) at the first density.
        #[arg(long)]
        levels_out: Option<PathBuf>,
    },
    /// Write the built-in piecewise-smooth test image.
    Synth {
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sparsify { input, density, p, q, seed, out, mask_out, tolerance } => {
            cli::sparsify(&input, density, p, q, seed, &out, mask_out.as_deref(), tolerance)
        }
        Command::Quantise { input, method, mask, levels, out, path_out, reconstruct, candidate_limit, tolerance } => {
            let path_out = path_out.unwrap_or_else(|| with_suffix(&out, "qssqpath"));
            cli::quantise(&cli::QuantiseArgs {
                input: &input,
                method: &method,
                mask: mask.as_deref(),
                levels,
                out: &out,
                path_out: &path_out,
                reconstruct,
                options: cli::quant_options(candidate_limit, tolerance),
            })
        }
        Command::Scalespace { input, method, mask, report, candidate_limit, tolerance } => cli::scalespace(
            &input,
            &method,
            mask.as_deref(),
            &report,
            &cli::quant_options(candidate_limit, tolerance),
        ),
        Command::Compress {
            input,
            method,
            budget,
            ratio,
            seed,
            p,
            q,
            densities,
            path,
            candidate_limit,
            tolerance,
            out,
            image_out,
        } => {
            let image_out = image_out.unwrap_or_else(|| with_suffix(&out, "pgm"));
            cli::compress(&cli::CompressArgs {
                input: &input,
                method: &method,
                budget,
                ratio,
                seed,
                p,
                q,
                densities: densities.unwrap_or_else(|| {
                    // full data first so an unlimited budget stays lossless
                    std::iter::once(1.0).chain(quantscale::compression::DEFAULT_DENSITIES).collect()
                }),
                path: path.as_deref(),
                candidate_limit,
                tolerance,
                out: &out,
                image_out: &image_out,
            })
        }
        Command::Curve {
            input,
            methods,
            densities,
            seed,
            p,
            q,
            path,
            buckets_per_decade,
            tolerance,
            out,
            levels_out,
        } => cli::curve(&cli::CurveArgs {
            input: &input,
            methods: &methods,
            densities: densities.unwrap_or_else(|| quantscale::compression::DEFAULT_DENSITIES.to_vec()),
            seed,
            p,
            q,
            path: path.as_deref(),
            buckets_per_decade,
            tolerance,
            out: &out,
            levels_out: levels_out.as_deref(),
        }),
        Command::Synth { width, height, out } => cli::synth(width, height, &out),
    }
}

fn with_suffix(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
