use crate::error::{Error, Result};
use crate::patterns::PatternSequence;
use crate::raster::Image;

use super::operator::PatternOperator;

/// Second-order correlation `<I S(x,y)> - <I><S(x,y)>` before any rescaling.
pub fn correlation_raw(seq: &PatternSequence, intensities: &[f64]) -> Result<Vec<f64>> {
    let t = seq.len();
    if t < 2 {
        return Err(Error::Unsolvable("correlation needs at least two patterns".into()));
    }
    if intensities.len() != t {
        return Err(Error::Unsolvable(format!("{} intensities for {t} patterns", intensities.len())));
    }
    if intensities.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unsolvable("non-finite intensity".into()));
    }
    let op = PatternOperator::new(seq);
    let n = op.cols();
    let mean_i = intensities.iter().sum::<f64>() / t as f64;
    let mean_s = op.mean_row();
    // A pixel whose pattern value never changes carries no correlation signal.
    if !mean_s.iter().any(|&m| m > 1e-12 && m < 1.0 - 1e-12) {
        return Err(Error::Unsolvable("patterns have zero variance at every pixel".into()));
    }
    let mut is = vec![0.0; n];
    op.apply_adjoint(intensities, &mut is);
    Ok(is.iter().zip(&mean_s).map(|(a, m)| a / t as f64 - mean_i * m).collect())
}

/// Correlation image affinely rescaled to `[0, 1]`; a flat correlation maps to zeros.
pub fn solve_correlation(seq: &PatternSequence, intensities: &[f64]) -> Result<Image> {
    let raw = correlation_raw(seq, intensities)?;
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let scale = intensities.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let data = if span > 1e-12 * scale {
        raw.iter().map(|v| (v - lo) / span).collect()
    } else {
        vec![0.0; raw.len()]
    };
    Image::new(seq.width(), seq.height(), data)
}
