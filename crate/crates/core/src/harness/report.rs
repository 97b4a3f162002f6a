use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::patterns::stack::write_pattern_stack;
use crate::raster::save_image;

use super::runner::{ExperimentResult, ResultRow};

pub const CSV_HEADER: &str = "method,T,sigma,seed,psnr_full_db,psnr_roi_db,mse,iterations,wall_ms";

pub fn image_name(row: &ResultRow) -> String {
    format!("{}_T{}_s{}_seed{}.pgm", row.method, row.measurements, row.sigma, row.seed)
}

pub fn results_csv(result: &ExperimentResult) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{:.6},{:.9e},{},{:.1}",
            r.method, r.measurements, r.sigma, r.seed, r.psnr_full_db, r.psnr_roi_db, r.mse, r.iterations, r.wall_ms
        );
    }
    s
}

pub fn manifest(result: &ExperimentResult) -> String {
    let mut s = format!("# ghostbench run manifest\nversion = {}\n", env!("CARGO_PKG_VERSION"));
    // pin the resolved defaults so the run replays exactly
    let mut cfg = result.config.clone();
    cfg.roi = Some(result.roi);
    cfg.lowest_resolution = Some(cfg.resolved_m1());
    s.push_str(&cfg.to_text());
    s
}

/// Writes `results.csv`, one PGM per row, `manifest.txt` and, when requested,
/// the GPAT1 stack of every row. Returns the paths written.
pub fn emit_reports(result: &ExperimentResult, output_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() {
        return Err(Error::Config("nothing to report".into()));
    }
    let dir = output_dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let csv = dir.join("results.csv");
    fs::write(&csv, results_csv(result))?;
    written.push(csv);

    for (row, img) in result.rows.iter().zip(&result.reconstructions) {
        let p = dir.join(image_name(row));
        save_image(img, &p)?;
        written.push(p);
    }

    if result.config.save_stacks {
        let mut done = std::collections::BTreeSet::new();
        for r in &result.rows {
            if !done.insert((r.method, r.measurements, r.seed)) {
                continue;
            }
            let seq = result.sequences[&(r.method, r.seed)].prefix(r.measurements);
            let p = dir.join(format!("{}_T{}_seed{}.gpat", r.method, r.measurements, r.seed));
            write_pattern_stack(&seq, &p)?;
            written.push(p);
        }
    }

    let m = dir.join("manifest.txt");
    fs::write(&m, manifest(result))?;
    written.push(m);
    Ok(written)
}

/// `results.csv` text with the wall-time column removed, for reproducibility checks.
pub fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
