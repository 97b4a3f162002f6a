use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::cellmaps::RetinaSpec;
use crate::error::{Error, Result};
use crate::forward::{measure, NoiseModel};
use crate::metrics::psnr;
use crate::patterns::{build_schedule, generate_sequence, PatternSequence, SequenceRequest};
use crate::raster::{load_image, Image, RoiSpec};
use crate::recon::{solve_tv, TvProblem};

use super::config::{ExperimentConfig, Method, NoiseMode, ObjectSource};
use super::seeds::{derive_seed, NOISE_LABEL, PATTERN_LABEL};

/// One grid row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub measurements: usize,
    /// Noise level as configured (absolute or relative, see the config's noise mode).
    pub sigma: f64,
    /// Standard deviation actually applied, in intensity units.
    pub sigma_abs: f64,
    pub seed: u64,
    pub psnr_full_db: f64,
    pub psnr_roi_db: f64,
    pub mse: f64,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub object: Image,
    pub roi: RoiSpec,
    pub rows: Vec<ResultRow>,
    /// Reconstruction of each row, same order as `rows`.
    pub reconstructions: Vec<Image>,
    /// Pattern sequence per `(method, seed)` holding the largest `T`; shorter
    /// rows use prefixes of it.
    pub sequences: BTreeMap<(Method, u64), PatternSequence>,
}

impl ExperimentResult {
    pub fn rows_for(&self, method: Method, t: usize, sigma: f64) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.method == method && r.measurements == t && r.sigma == sigma)
    }

    /// Median over seeds of ROI PSNR.
    pub fn median_roi_psnr(&self, method: Method, t: usize, sigma: f64) -> Option<f64> {
        median(self.rows_for(method, t, sigma).map(|r| r.psnr_roi_db).collect())
    }

    /// Median over seeds of full-frame PSNR.
    pub fn median_full_psnr(&self, method: Method, t: usize, sigma: f64) -> Option<f64> {
        median(self.rows_for(method, t, sigma).map(|r| r.psnr_full_db).collect())
    }
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn load_object(source: &ObjectSource, size: usize) -> Result<Image> {
    match source {
        ObjectSource::Builtin(b) => b.render(size),
        ObjectSource::File(p) => {
            let img = load_image(p)?;
            if img.width() == size && img.height() == size {
                Ok(img)
            } else {
                img.box_resample(size, size)
            }
        }
    }
}

/// The full-length pattern sequence of `method` for a row seed.
pub fn sequence_for(
    method: Method,
    actual_resolution: usize,
    count: usize,
    lowest_resolution: usize,
    roi: RoiSpec,
    row_seed: u64,
) -> Result<PatternSequence> {
    let family = method.family();
    let schedule = if family.needs_schedule() { Some(build_schedule(actual_resolution, lowest_resolution)?) } else { None };
    let retina = family.needs_retina().then(|| RetinaSpec::with_defaults(roi, 1, actual_resolution));
    generate_sequence(&SequenceRequest {
        family,
        actual_resolution,
        count,
        schedule,
        retina,
        seed: derive_seed(row_seed, PATTERN_LABEL),
    })
}

/// Worker count from `GHOSTBENCH_THREADS`, if set to a positive integer.
pub fn configured_threads() -> Option<usize> {
    std::env::var("GHOSTBENCH_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match configured_threads() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

struct Job {
    method: Method,
    seed: u64,
    t: usize,
    sigma: f64,
}

/// Runs every `(method, T, σ, seed)` combination of the grid.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let m = config.actual_resolution;
    let object = load_object(&config.object, m)?;
    let roi = config.resolved_roi()?;
    let m1 = config.resolved_m1();
    let t_max = *config.measurement_counts.iter().max().expect("validated non-empty");
    let reference_intensity = 0.5 * object.sum();

    with_pool(|| {
        let keys: Vec<(Method, u64)> =
            config.methods.iter().flat_map(|&mt| config.seeds.iter().map(move |&s| (mt, s))).collect();
        let sequences = keys
            .par_iter()
            .map(|&(mt, s)| Ok(((mt, s), sequence_for(mt, m, t_max, m1, roi, s)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;

        let mut jobs = Vec::new();
        for &method in &config.methods {
            for &t in &config.measurement_counts {
                for &sigma in &config.noise_sigmas {
                    for &seed in &config.seeds {
                        jobs.push(Job { method, seed, t, sigma });
                    }
                }
            }
        }
        let solved = jobs
            .par_iter()
            .map(|job| {
                let started = Instant::now();
                let seq = sequences[&(job.method, job.seed)].prefix(job.t);
                let sigma_abs = match config.noise_mode {
                    NoiseMode::Absolute => job.sigma,
                    NoiseMode::Relative => job.sigma * reference_intensity,
                };
                let noise = if sigma_abs > 0.0 {
                    NoiseModel::gaussian(0.0, sigma_abs, derive_seed(job.seed, NOISE_LABEL))?
                } else {
                    NoiseModel::noiseless()
                };
                let meas = measure(&object, &seq, &noise)?;
                let mut problem = TvProblem::new(&seq, &meas.intensities).with_settings(config.solver.clone());
                if sigma_abs > 0.0 {
                    problem = problem.with_noise_std(sigma_abs);
                }
                let sol = solve_tv(&problem)?;
                let full = psnr(&object, &sol.image, None, 8)?;
                let in_roi = psnr(&object, &sol.image, Some(&roi), 8)?;
                let row = ResultRow {
                    method: job.method,
                    measurements: job.t,
                    sigma: job.sigma,
                    sigma_abs,
                    seed: job.seed,
                    psnr_full_db: full.psnr_db,
                    psnr_roi_db: in_roi.psnr_db,
                    mse: full.mse,
                    iterations: sol.iterations_used,
                    wall_ms: started.elapsed().as_secs_f64() * 1e3,
                };
                Ok((row, sol.image))
            })
            .collect::<Result<Vec<_>>>()?;
        let (rows, reconstructions) = solved.into_iter().unzip();
        Ok(ExperimentResult { config: config.clone(), object, roi, rows, reconstructions, sequences })
    })?
}

/// Default noise levels for a sweep: 0, 1, 2 and 3 percent of the expected
/// mean noiseless intensity.
pub fn default_sweep_sigmas() -> Vec<f64> {
    vec![0.0, 0.01, 0.02, 0.03]
}

/// [`run_experiment`] over a noise grid; every σ shares the row seed's noise
/// stream, scaled.
pub fn run_noise_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.noise_sigmas.len() < 2 {
        return Err(Error::Config("a noise sweep needs at least two noise levels".into()));
    }
    run_experiment(config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEntry {
    pub resolution: usize,
    pub measurements: usize,
    /// Median over seeds of the paired ROI PSNR difference TSVCGI − UCGI.
    pub delta_db: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub results: Vec<ExperimentResult>,
    pub table: Vec<DeltaEntry>,
}

impl ScalingReport {
    /// Plain-text table: one row per resolution, one column per `T`.
    pub fn format_table(&self) -> String {
        let mut ts: Vec<usize> = self.table.iter().map(|d| d.measurements).collect();
        ts.sort_unstable();
        ts.dedup();
        let mut out = String::from("resolution");
        for t in &ts {
            out.push_str(&format!("\tT={t}"));
        }
        out.push('\n');
        for r in &self.results {
            let m = r.config.actual_resolution;
            out.push_str(&format!("{m}x{m}"));
            for t in &ts {
                match self.table.iter().find(|d| d.resolution == m && d.measurements == *t) {
                    Some(d) => out.push_str(&format!("\t{:.2}", d.delta_db)),
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Runs UCGI and TSVCGI at each resolution and tabulates the ROI PSNR gain at
/// the first configured noise level.
/// A configured ROI is scaled with the frame; otherwise each resolution uses
/// its default ROI. `m_1` is kept at `M / 8` unless configured.
pub fn run_resolution_scaling(config: &ExperimentConfig, resolutions: &[usize]) -> Result<ScalingReport> {
    if resolutions.is_empty() {
        return Err(Error::Config("no resolutions given".into()));
    }
    let base = config.actual_resolution as f64;
    let mut results = Vec::new();
    let mut table = Vec::new();
    for &m in resolutions {
        let k = m as f64 / base;
        let roi = match config.roi {
            Some(r) => Some(RoiSpec::new(r.center_x * k, r.center_y * k, r.radius * k)?),
            None => None,
        };
        let cfg = ExperimentConfig {
            actual_resolution: m,
            methods: vec![Method::Ucgi, Method::Tsvcgi],
            roi,
            output_dir: config.output_dir.as_ref().map(|d| d.join(format!("M{m}"))),
            ..config.clone()
        };
        let res = run_experiment(&cfg)?;
        let sigma = cfg.noise_sigmas[0];
        for &t in &cfg.measurement_counts {
            let diffs: Vec<f64> = cfg
                .seeds
                .iter()
                .filter_map(|&s| {
                    let pick = |mt| res.rows_for(mt, t, sigma).find(|r| r.seed == s).map(|r| r.psnr_roi_db);
                    Some(pick(Method::Tsvcgi)? - pick(Method::Ucgi)?)
                })
                .collect();
            table.push(DeltaEntry { resolution: m, measurements: t, delta_db: median(diffs).unwrap_or(f64::NAN) });
        }
        results.push(res);
    }
    Ok(ScalingReport { results, table })
}
