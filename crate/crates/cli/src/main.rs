use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pansharp_core::harness::{emit_report, render_table};
use pansharp_core::io::{save_band, save_multiband, BitDepth};
use pansharp_core::raster::upsample;
use pansharp_core::{
    fuse, load_band, load_multiband, run_evaluation, synth_scene, EvalConfig, Error,
    FusionMethod, FusionParams, MultiBandImage, RasterBand, Result, Scene,
};

/// Pansharpening: wavelet high-pass modulation, baselines, and quality metrics.
#[derive(Debug, Parser)]
#[command(name = "pansharp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a deterministic synthetic MS/PAN scene.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// PAN width and height in pixels.
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 4)]
        ratio: usize,
        #[arg(long, default_value_t = 3)]
        bands: usize,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse one MS/PAN pair with a single method.
    Fuse {
        #[arg(long, value_parser = parse_method)]
        method: FusionMethod,
        /// MS band manifest.
        #[arg(long)]
        ms: PathBuf,
        /// PAN band (binary PGM).
        #[arg(long)]
        pan: PathBuf,
        /// Output manifest; bands are written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Fuse with several methods and write the metric comparison as CSV.
    Evaluate {
        #[arg(long)]
        ms: PathBuf,
        #[arg(long)]
        pan: PathBuf,
        /// `all` or a comma-separated list of method names.
        #[arg(long, default_value = "all")]
        methods: String,
        #[arg(long, default_value_t = 64)]
        mi_bins: usize,
        #[arg(long, default_value_t = 8)]
        q_window: usize,
        /// Evaluate at reduced resolution with the input MS as reference.
        #[arg(long)]
        wald: bool,
        /// Report CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Directory for the fused images of every method.
        #[arg(long)]
        save_images: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> std::result::Result<FusionMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_methods(list: &str) -> Result<Vec<FusionMethod>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(FusionMethod::ALL.to_vec());
    }
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn load_scene(ms: &Path, pan: &Path) -> Result<Scene> {
    let ms = load_multiband(ms)?;
    let pan = load_band(pan)?;
    Scene::new(ms, pan)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_owned(),
        message: e.to_string(),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            seed,
            size,
            ratio,
            bands,
            out,
        } => {
            let scene = synth_scene(seed, size, ratio, bands)?;
            create_dir(&out)?;
            save_multiband(&scene.ms, out.join("ms.txt"), BitDepth::Sixteen)?;
            save_band(&scene.pan, out.join("pan.pgm"), BitDepth::Sixteen)?;
            if let Some(truth) = &scene.truth {
                save_multiband(truth, out.join("truth.txt"), BitDepth::Sixteen)?;
            }
            println!(
                "wrote {} ({} bands, {}x{} MS, {}x{} PAN)",
                out.display(),
                bands,
                scene.ms.width(),
                scene.ms.height(),
                scene.pan.width(),
                scene.pan.height()
            );
        }
        Command::Fuse {
            method,
            ms,
            pan,
            out,
            levels,
            window,
            epsilon,
        } => {
            let scene = load_scene(&ms, &pan)?;
            let ratio = scene.ratio()?;
            let defaults = FusionParams::for_ratio(ratio);
            let params = FusionParams {
                levels: levels.unwrap_or(defaults.levels),
                boxcar_window: window.unwrap_or(defaults.boxcar_window),
                epsilon,
                ratio,
            };
            params.validate()?;
            let ms_up = scene
                .ms
                .map_bands(|b: &RasterBand| upsample(b, ratio))?;
            let fused: MultiBandImage = fuse(method, &ms_up, &scene.pan, &params)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            save_multiband(&fused, &out, BitDepth::Sixteen)?;
            println!("{method}: wrote {}", out.display());
        }
        Command::Evaluate {
            ms,
            pan,
            methods,
            mi_bins,
            q_window,
            wald,
            out,
            save_images,
        } => {
            let methods = parse_methods(&methods)?;
            let scene = load_scene(&ms, &pan)?;
            let config = EvalConfig {
                methods,
                params: FusionParams::for_ratio(scene.ratio()?),
                mi_bins,
                q_window,
                output_dir: save_images,
                wald,
                ..Default::default()
            };
            let rows = run_evaluation(&config, &scene)?;
            emit_report(&rows, &out)?;
            print!("{}", render_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
