//! Mean squared error and peak signal-to-noise ratio, over the full frame or
//! restricted to a circular region of interest.

use crate::error::{Error, Result};
use crate::raster::{Image, RoiSpec};

/// Reported when the two images are identical, instead of infinity.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const DEFAULT_BIT_DEPTH: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    /// Mean squared error on the `[0, 2^k - 1]` scale.
    pub mse: f64,
    pub psnr_db: f64,
    pub pixel_count: usize,
    pub bit_depth: u32,
}

fn peak(bit_depth: u32) -> Result<f64> {
    if bit_depth == 0 || bit_depth > 32 {
        return Err(Error::InvalidImage(format!("unsupported bit depth {bit_depth}")));
    }
    Ok(((1u64 << bit_depth) - 1) as f64)
}

fn squared_error(reference: &Image, candidate: &Image, roi: Option<&RoiSpec>, bit_depth: u32) -> Result<(f64, usize)> {
    reference.same_shape(candidate)?;
    let scale = peak(bit_depth)?;
    let w = reference.width();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (a, b)) in reference.data().iter().zip(candidate.data()).enumerate() {
        if let Some(roi) = roi {
            if !roi.contains(i % w, i / w) {
                continue;
            }
        }
        let d = (a - b) * scale;
        sum += d * d;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyRoi);
    }
    Ok((sum, count))
}

/// MSE on the 8-bit scale.
pub fn mse(reference: &Image, candidate: &Image, roi: Option<&RoiSpec>) -> Result<f64> {
    mse_with_depth(reference, candidate, roi, DEFAULT_BIT_DEPTH)
}

pub fn mse_with_depth(reference: &Image, candidate: &Image, roi: Option<&RoiSpec>, bit_depth: u32) -> Result<f64> {
    let (sum, count) = squared_error(reference, candidate, roi, bit_depth)?;
    Ok(sum / count as f64)
}

/// PSNR in decibels for a given MSE, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64, bit_depth: u32) -> Result<f64> {
    let peak = peak(bit_depth)?;
    if mse <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

pub fn psnr(reference: &Image, candidate: &Image, roi: Option<&RoiSpec>, bit_depth: u32) -> Result<QualityReport> {
    let (sum, count) = squared_error(reference, candidate, roi, bit_depth)?;
    let mse = sum / count as f64;
    Ok(QualityReport {
        mse,
        psnr_db: psnr_from_mse(mse, bit_depth)?,
        pixel_count: count,
        bit_depth,
    })
}
