use crate::error::{Error, Result};
use crate::patterns::PatternSequence;
use crate::raster::Image;

use super::correlation::correlation_raw;
use super::gradient::{gradient_adjoint_into, gradient_into, GradientField};
use super::operator::PatternOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TvNorm {
    #[default]
    Anisotropic,
    Isotropic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Weight of the data term, `μ_f`.
    pub fidelity_weight: f64,
    /// Weight coupling the split variable to the gradient, `β`.
    pub penalty_weight: f64,
    pub max_iterations: usize,
    /// Relative iterate change below which the solve stops.
    pub tolerance: f64,
    /// Conjugate-gradient steps per outer iteration.
    pub inner_iterations: usize,
    pub norm: TvNorm,
    /// How strongly a known measurement noise level relaxes the data term.
    pub noise_weight: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            fidelity_weight: 64.0,
            penalty_weight: 32.0,
            max_iterations: 300,
            tolerance: 1e-4,
            inner_iterations: 10,
            norm: TvNorm::Anisotropic,
            noise_weight: 1.0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.fidelity_weight) || !positive(self.penalty_weight) || !positive(self.tolerance) {
            return Err(Error::Unsolvable(format!(
                "weights and tolerance must be positive (mu {}, beta {}, tol {})",
                self.fidelity_weight, self.penalty_weight, self.tolerance
            )));
        }
        if !(self.noise_weight.is_finite() && self.noise_weight >= 0.0) {
            return Err(Error::Unsolvable(format!("noise weight must be non-negative, got {}", self.noise_weight)));
        }
        if self.max_iterations == 0 || self.inner_iterations == 0 {
            return Err(Error::Unsolvable("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TvProblem<'a> {
    pub patterns: &'a PatternSequence,
    pub intensities: &'a [f64],
    /// Standard deviation of additive measurement noise, if known.
    pub noise_std: Option<f64>,
    pub settings: SolverSettings,
}

impl<'a> TvProblem<'a> {
    pub fn new(patterns: &'a PatternSequence, intensities: &'a [f64]) -> Self {
        Self { patterns, intensities, noise_std: None, settings: SolverSettings::default() }
    }

    pub fn with_noise_std(mut self, std: f64) -> Self {
        self.noise_std = Some(std);
        self
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn width(&self) -> usize {
        self.patterns.width()
    }

    pub fn height(&self) -> usize {
        self.patterns.height()
    }
}

#[derive(Debug, Clone)]
pub struct TvSolution {
    /// Reconstruction clipped to `[0, 1]`.
    pub image: Image,
    /// Unclipped minimizer in object units.
    pub raw: Vec<f64>,
    pub iterations_used: usize,
    /// `‖S O − I‖ / ‖I‖` for the unclipped minimizer.
    pub final_residual: f64,
    pub converged: bool,
    /// Objective after each outer iteration, in the solver's normalized units.
    pub objective_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn shrink(g: &GradientField, c: &mut GradientField, t: f64, norm: TvNorm) {
    match norm {
        TvNorm::Anisotropic => {
            for (dst, src) in c.dx.iter_mut().zip(&g.dx).chain(c.dy.iter_mut().zip(&g.dy)) {
                *dst = src.signum() * (src.abs() - t).max(0.0);
            }
        }
        TvNorm::Isotropic => {
            for i in 0..g.dx.len() {
                let mag = g.dx[i].hypot(g.dy[i]);
                let k = if mag > t { (mag - t) / mag } else { 0.0 };
                c.dx[i] = k * g.dx[i];
                c.dy[i] = k * g.dy[i];
            }
        }
    }
}

struct System<'a> {
    op: &'a PatternOperator,
    mu: f64,
    beta: f64,
}

impl System<'_> {
    /// `(β GᵀG + μ SᵀS) x`, given `S x` and `G x`.
    fn hessian_from(&self, sx: &[f64], gx: &GradientField, out: &mut [f64], scratch: &mut [f64]) {
        self.op.apply_adjoint(sx, out);
        gradient_adjoint_into(gx, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o = self.mu * *o + self.beta * s;
        }
    }

    fn objective(&self, c: &GradientField, gx: &GradientField, sx: &[f64], b: &[f64], norm: TvNorm) -> f64 {
        let reg = match norm {
            TvNorm::Anisotropic => c.l1(),
            TvNorm::Isotropic => c.l21(),
        };
        let split: f64 = c.dx.iter().zip(&gx.dx).chain(c.dy.iter().zip(&gx.dy)).map(|(a, g)| (a - g).powi(2)).sum();
        let fit: f64 = sx.iter().zip(b).map(|(a, v)| (a - v).powi(2)).sum();
        reg + 0.5 * self.beta * split + 0.5 * self.mu * fit
    }
}

/// Affine fit `a·corr + k` of the correlation image to the measurements.
fn initial_guess(op: &PatternOperator, seq: &PatternSequence, b: &[f64]) -> Vec<f64> {
    let n = op.cols();
    let mut counts = vec![0.0; op.rows()];
    op.apply(&vec![1.0; n], &mut counts);
    let flat = || {
        let k = b.iter().sum::<f64>() / counts.iter().sum::<f64>().max(1.0);
        vec![k; n]
    };
    let Ok(corr) = correlation_raw(seq, b) else { return flat() };
    let mut u = vec![0.0; op.rows()];
    op.apply(&corr, &mut u);
    let (uu, uv, vv) = (dot(&u, &u), dot(&u, &counts), dot(&counts, &counts));
    let (ub, vb) = (dot(&u, b), dot(&counts, b));
    let det = uu * vv - uv * uv;
    if det.abs() <= 1e-12 * uu * vv || !det.is_finite() {
        return flat();
    }
    let a = (ub * vv - vb * uv) / det;
    let k = (uu * vb - uv * ub) / det;
    corr.iter().map(|c| a * c + k).collect()
}

/// Total-variation reconstruction by alternating minimization of
/// `‖c‖₁ + (β/2)‖c − G x‖² + (μ/2)‖S x − I‖²` over the split variable `c`
/// (exact shrinkage) and the image `x` (warm-started conjugate gradients).
pub fn solve_tv(problem: &TvProblem<'_>) -> Result<TvSolution> {
    let seq = problem.patterns;
    let set = &problem.settings;
    set.validate()?;
    let (w, h) = (seq.width(), seq.height());
    let t = seq.len();
    if problem.intensities.len() != t {
        return Err(Error::Unsolvable(format!("{} intensities for {t} patterns", problem.intensities.len())));
    }
    if problem.noise_std.is_some_and(|s| !(s.is_finite() && s >= 0.0)) {
        return Err(Error::Unsolvable("noise std must be finite and non-negative".into()));
    }
    if problem.intensities.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unsolvable("non-finite intensity".into()));
    }
    if seq.patterns().iter().all(|p| p.ones() == 0) {
        return Err(Error::Unsolvable("every pattern is empty".into()));
    }

    let op = PatternOperator::new(seq);
    let n = op.cols();

    // Work in units of the estimated mean pixel value so that the weights act
    // relative to image contrast and the solve is scale-covariant.
    let mean_ones = seq.patterns().iter().map(|p| p.ones() as f64).sum::<f64>() / t as f64;
    let mean_i = problem.intensities.iter().sum::<f64>() / t as f64;
    let rho = mean_i / mean_ones;
    let rho = if rho.is_finite() && rho > 1e-300 { rho } else { 1.0 };
    let b: Vec<f64> = problem.intensities.iter().map(|v| v / rho).collect();
    let b_norm = dot(&b, &b).sqrt();

    // The data weight is taken per unit pattern variance, N q (1 - q) for a
    // fraction q of lit pixels, so that it does not grow with the frame size.
    let q = mean_ones / n as f64;
    let row_var = if q > 0.0 && q < 1.0 { n as f64 * q * (1.0 - q) } else { n as f64 / 4.0 };
    // Known noise of variance s² (in normalized units) adds to the inverse
    // data weight, so noisier data is trusted less.
    let noise_var = problem.noise_std.map_or(0.0, |s| (s / rho).powi(2));
    let mu = 1.0 / (row_var / set.fidelity_weight + set.noise_weight * noise_var);
    let sys = System { op: &op, mu, beta: set.penalty_weight };
    let mut x = initial_guess(&op, seq, &b);
    let mut sx = vec![0.0; t];
    let mut gx = GradientField::zeros(w, h);
    let mut hx = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let refresh = |x: &[f64], sx: &mut Vec<f64>, gx: &mut GradientField, hx: &mut Vec<f64>, scratch: &mut Vec<f64>| {
        op.apply(x, sx);
        gradient_into(x, gx);
        sys.hessian_from(sx, gx, hx, scratch);
    };
    refresh(&x, &mut sx, &mut gx, &mut hx, &mut scratch);

    let mut rhs_data = vec![0.0; n];
    op.apply_adjoint(&b, &mut rhs_data);
    for v in rhs_data.iter_mut() {
        *v *= sys.mu;
    }

    let mut c = GradientField::zeros(w, h);
    let mut gc = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut sp = vec![0.0; t];
    let mut gp = GradientField::zeros(w, h);
    let mut hp = vec![0.0; n];
    let mut x_prev = vec![0.0; n];
    let mut history = Vec::with_capacity(set.max_iterations);
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=set.max_iterations {
        iterations = k;
        if k % 16 == 0 {
            refresh(&x, &mut sx, &mut gx, &mut hx, &mut scratch);
        }
        shrink(&gx, &mut c, 1.0 / sys.beta, set.norm);

        gradient_adjoint_into(&c, &mut gc);
        for i in 0..n {
            r[i] = rhs_data[i] + sys.beta * gc[i] - hx[i];
        }
        let rhs_scale = dot(&rhs_data, &rhs_data).sqrt().max(1e-300);
        x_prev.copy_from_slice(&x);
        p.copy_from_slice(&r);
        let mut rr = dot(&r, &r);
        for _ in 0..set.inner_iterations {
            if rr.sqrt() <= 1e-13 * rhs_scale {
                break;
            }
            op.apply(&p, &mut sp);
            gradient_into(&p, &mut gp);
            sys.hessian_from(&sp, &gp, &mut hp, &mut scratch);
            let php = dot(&p, &hp);
            if php <= 0.0 || !php.is_finite() {
                break;
            }
            let alpha = rr / php;
            axpy(alpha, &p, &mut x);
            axpy(alpha, &sp, &mut sx);
            axpy(alpha, &gp.dx, &mut gx.dx);
            axpy(alpha, &gp.dy, &mut gx.dy);
            axpy(alpha, &hp, &mut hx);
            axpy(-alpha, &hp, &mut r);
            let rr_new = dot(&r, &r);
            let beta_cg = rr_new / rr;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta_cg * *pi;
            }
            rr = rr_new;
        }
        history.push(sys.objective(&c, &gx, &sx, &b, set.norm));

        let delta: f64 = x.iter().zip(&x_prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let base = dot(&x_prev, &x_prev).sqrt().max(1e-12);
        if delta / base < set.tolerance {
            converged = true;
            break;
        }
    }

    op.apply(&x, &mut sx);
    let res: f64 = sx.iter().zip(&b).map(|(a, v)| (a - v).powi(2)).sum::<f64>().sqrt();
    let final_residual = if b_norm > 0.0 { res / b_norm } else { res };
    let raw: Vec<f64> = x.iter().map(|v| v * rho).collect();
    let image = Image::from_clipped(w, h, &raw)?;
    Ok(TvSolution { image, raw, iterations_used: iterations, final_residual, converged, objective_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{measure, NoiseModel};
    use crate::metrics::psnr;
    use crate::patterns::{generate_sequence, Family, SequenceRequest};

    fn uniform(m: usize, count: usize, seed: u64) -> PatternSequence {
        generate_sequence(&SequenceRequest {
            family: Family::Uniform,
            actual_resolution: m,
            count,
            schedule: None,
            retina: None,
            seed,
        })
        .unwrap()
    }

    fn square(m: usize) -> Image {
        Image::from_fn(m, m, |x, y| {
            let q = m / 4;
            if (q..m - q).contains(&x) && (q..m - q).contains(&y) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn constant_object_is_flat() {
        let seq = uniform(8, 40, 2);
        let obj = Image::filled(8, 8, 0.5).unwrap();
        let meas = measure(&obj, &seq, &NoiseModel::noiseless()).unwrap();
        let sol = solve_tv(&TvProblem::new(&seq, &meas.intensities)).unwrap();
        let tv = super::super::gradient::gradient_apply(&sol.image).l1();
        assert!(tv < 1e-3, "tv {tv}");
        assert!(sol.final_residual < 1e-4, "{}", sol.final_residual);
    }

    #[test]
    fn objective_never_increases() {
        let seq = uniform(16, 100, 5);
        let meas = measure(&square(16), &seq, &NoiseModel::noiseless()).unwrap();
        for norm in [TvNorm::Anisotropic, TvNorm::Isotropic] {
            let settings = SolverSettings { norm, max_iterations: 60, tolerance: 1e-12, ..Default::default() };
            let sol = solve_tv(&TvProblem::new(&seq, &meas.intensities).with_settings(settings)).unwrap();
            for w in sol.objective_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-8 * w[0].abs().max(1.0), "{w:?}");
            }
        }
    }

    #[test]
    fn beats_correlation_on_cartoon() {
        let seq = uniform(16, 100, 8);
        let obj = square(16);
        let meas = measure(&obj, &seq, &NoiseModel::noiseless()).unwrap();
        let tv = solve_tv(&TvProblem::new(&seq, &meas.intensities)).unwrap();
        let corr = super::super::correlation::solve_correlation(&seq, &meas.intensities).unwrap();
        let a = psnr(&obj, &tv.image, None, 8).unwrap().psnr_db;
        let b = psnr(&obj, &corr, None, 8).unwrap().psnr_db;
        assert!(a > b + 3.0, "tv {a} corr {b}");
        assert!(tv.iterations_used <= 300);
    }

    #[test]
    fn rejects_bad_input() {
        let seq = uniform(4, 3, 0);
        assert!(solve_tv(&TvProblem::new(&seq, &[1.0, f64::NAN, 0.0])).is_err());
        assert!(solve_tv(&TvProblem::new(&seq, &[1.0, 2.0])).is_err());
        let bad = SolverSettings { fidelity_weight: 0.0, ..Default::default() };
        assert!(solve_tv(&TvProblem::new(&seq, &[1.0; 3]).with_settings(bad)).is_err());
    }

    #[test]
    fn all_black_object() {
        let seq = uniform(8, 30, 1);
        let sol = solve_tv(&TvProblem::new(&seq, &[0.0; 30])).unwrap();
        assert!(sol.image.data().iter().all(|&v| v.abs() < 1e-9));
    }
}
