use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ghostbench::cellmaps::RetinaSpec;
use ghostbench::forward::{measure, read_intensities_csv, NoiseModel};
use ghostbench::harness::config::parse_roi;
use ghostbench::harness::runner::{default_sweep_sigmas, load_object};
use ghostbench::harness::{
    emit_reports, run_experiment, run_noise_sweep, run_resolution_scaling, ExperimentConfig, Method, NoiseMode,
};
use ghostbench::patterns::stack::{read_pattern_stack, write_pattern_stack};
use ghostbench::patterns::{build_schedule, generate_sequence, Family, SequenceRequest};
use ghostbench::raster::{save_image, RoiSpec};
use ghostbench::recon::{solve_tv, TvProblem};
use ghostbench::Result;

#[derive(Parser)]
#[command(name = "ghostbench", version, about = "Computational ghost imaging benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a pattern sequence and write it as a GPAT1 stack.
    Patterns(PatternsArgs),
    /// Simulate bucket measurements of an object through a stack.
    Measure(MeasureArgs),
    /// Reconstruct an image from a stack and its intensities.
    Reconstruct(ReconstructArgs),
    /// Run a method comparison grid.
    Experiment(GridArgs),
    /// Run a grid over noise levels.
    NoiseSweep(GridArgs),
    /// Compare TSVCGI against UCGI at two or more resolutions.
    Scaling(ScalingArgs),
}

#[derive(Args)]
struct PatternsArgs {
    /// uniform, temporal, spatial or tsv
    #[arg(long)]
    family: Family,
    #[arg(long)]
    resolution: usize,
    #[arg(long)]
    count: usize,
    /// Lowest imaging resolution of the schedule (default resolution / 8).
    #[arg(long)]
    m1: Option<usize>,
    /// cx,cy,r in pixels (default centered, r = resolution / 4).
    #[arg(long)]
    roi: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeasureArgs {
    /// Built-in object name (peppers, bit) or image path.
    #[arg(long)]
    object: String,
    #[arg(long)]
    stack: PathBuf,
    /// Noise standard deviation in intensity units.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_mean: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    stack: PathBuf,
    /// CSV written by `measure`.
    #[arg(long)]
    intensities: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct SolverArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    /// key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    resolution: Option<usize>,
    /// cx,cy,r in pixels.
    #[arg(long)]
    roi: Option<String>,
    #[arg(long)]
    m1: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Built-in object name or image path.
    #[arg(long)]
    object: Option<String>,
    /// Comma-separated, e.g. UCGI,TVCGI.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated measurement counts.
    #[arg(long)]
    measurements: Option<String>,
    /// Comma-separated noise levels.
    #[arg(long)]
    sigmas: Option<String>,
    /// absolute or relative
    #[arg(long)]
    noise_mode: Option<String>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Comma-separated resolutions.
    #[arg(long, default_value = "32,64")]
    resolutions: String,
}

fn grid_config(a: &GridArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v));
    set("seeds", a.seed.map(|s| s.to_string()))?;
    set("resolution", a.resolution.map(|v| v.to_string()))?;
    set("roi", a.roi.clone())?;
    set("m1", a.m1.map(|v| v.to_string()))?;
    set("out", a.out.as_ref().map(|p| p.display().to_string()))?;
    set("object", a.object.clone())?;
    set("methods", a.methods.clone())?;
    set("measurements", a.measurements.clone())?;
    set("sigmas", a.sigmas.clone())?;
    set("noise_mode", a.noise_mode.clone())?;
    set("mu", a.solver.mu.map(|v| v.to_string()))?;
    set("beta", a.solver.beta.map(|v| v.to_string()))?;
    set("max_iterations", a.solver.max_iterations.map(|v| v.to_string()))?;
    set("tolerance", a.solver.tolerance.map(|v| v.to_string()))?;
    Ok(cfg)
}

fn print_rows(result: &ghostbench::harness::ExperimentResult) {
    for r in &result.rows {
        println!(
            "{:<7} T={:<6} sigma={:<8} seed={:<4} psnr={:6.2} dB  roi={:6.2} dB  iters={}",
            r.method, r.measurements, r.sigma, r.seed, r.psnr_full_db, r.psnr_roi_db, r.iterations
        );
    }
}

fn report(result: &ghostbench::harness::ExperimentResult) -> Result<()> {
    print_rows(result);
    if let Some(dir) = &result.config.output_dir {
        emit_reports(result, dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Patterns(a) => {
            let roi = match &a.roi {
                Some(s) => parse_roi(s)?,
                None => RoiSpec::centered(a.resolution, a.resolution, a.resolution as f64 / 4.0)?,
            };
            let m1 = a.m1.unwrap_or((a.resolution / 8).max(1));
            let seq = generate_sequence(&SequenceRequest {
                family: a.family,
                actual_resolution: a.resolution,
                count: a.count,
                schedule: if a.family.needs_schedule() { Some(build_schedule(a.resolution, m1)?) } else { None },
                retina: a.family.needs_retina().then(|| RetinaSpec::with_defaults(roi, 1, a.resolution)),
                seed: a.seed,
            })?;
            write_pattern_stack(&seq, &a.out)?;
            println!("wrote {} {} patterns to {}", seq.len(), seq.family(), a.out.display());
        }
        Command::Measure(a) => {
            let seq = read_pattern_stack(&a.stack)?;
            let object = load_object(&a.object.parse()?, seq.actual_resolution())?;
            let noise = if a.sigma > 0.0 {
                NoiseModel::gaussian(a.noise_mean, a.sigma, a.seed)?
            } else {
                NoiseModel::noiseless()
            };
            let m = measure(&object, &seq, &noise)?;
            m.write_csv(&a.out)?;
            println!("wrote {} intensities to {}", m.count(), a.out.display());
        }
        Command::Reconstruct(a) => {
            let seq = read_pattern_stack(&a.stack)?;
            let intensities = read_intensities_csv(&a.intensities)?;
            let mut problem = TvProblem::new(&seq, &intensities);
            let s = &mut problem.settings;
            s.fidelity_weight = a.solver.mu.unwrap_or(s.fidelity_weight);
            s.penalty_weight = a.solver.beta.unwrap_or(s.penalty_weight);
            s.max_iterations = a.solver.max_iterations.unwrap_or(s.max_iterations);
            s.tolerance = a.solver.tolerance.unwrap_or(s.tolerance);
            let sol = solve_tv(&problem)?;
            save_image(&sol.image, &a.out)?;
            println!(
                "wrote {} ({} iterations, converged {}, residual {:.3e})",
                a.out.display(),
                sol.iterations_used,
                sol.converged,
                sol.final_residual
            );
        }
        Command::Experiment(a) => report(&run_experiment(&grid_config(&a)?)?)?,
        Command::NoiseSweep(a) => {
            let mut cfg = grid_config(&a)?;
            if a.sigmas.is_none() && cfg.noise_sigmas.len() < 2 {
                cfg.noise_sigmas = default_sweep_sigmas();
                cfg.noise_mode = NoiseMode::Relative;
            }
            report(&run_noise_sweep(&cfg)?)?;
        }
        Command::Scaling(a) => {
            let cfg = grid_config(&a.grid)?;
            let resolutions: Vec<usize> = a
                .resolutions
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| ghostbench::Error::Config(format!("bad resolution '{s}'"))))
                .collect::<Result<_>>()?;
            let rep = run_resolution_scaling(&cfg, &resolutions)?;
            for r in &rep.results {
                report(r)?;
            }
            println!("ROI PSNR gain of {} over {} (dB, median over seeds)", Method::Tsvcgi, Method::Ucgi);
            print!("{}", rep.format_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
