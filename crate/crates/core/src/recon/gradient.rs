use crate::raster::Image;

/// Forward differences of a `width × height` raster. Differences that would
/// reach past the last column or row are zero (replicate boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl GradientField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, dx: vec![0.0; width * height], dy: vec![0.0; width * height] }
    }

    pub fn dot(&self, other: &GradientField) -> f64 {
        self.dx.iter().zip(&other.dx).map(|(a, b)| a * b).sum::<f64>()
            + self.dy.iter().zip(&other.dy).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Anisotropic total variation, `Σ |dx| + |dy|`.
    pub fn l1(&self) -> f64 {
        self.dx.iter().chain(&self.dy).map(|v| v.abs()).sum()
    }

    /// Isotropic total variation, `Σ sqrt(dx² + dy²)`.
    pub fn l21(&self) -> f64 {
        self.dx.iter().zip(&self.dy).map(|(a, b)| a.hypot(*b)).sum()
    }
}

pub fn gradient_of(values: &[f64], width: usize, height: usize) -> GradientField {
    let mut g = GradientField::zeros(width, height);
    gradient_into(values, &mut g);
    g
}

pub(crate) fn gradient_into(values: &[f64], g: &mut GradientField) {
    let (w, h) = (g.width, g.height);
    for y in 0..h {
        let row = &values[y * w..(y + 1) * w];
        let dx = &mut g.dx[y * w..(y + 1) * w];
        for x in 0..w - 1 {
            dx[x] = row[x + 1] - row[x];
        }
        dx[w - 1] = 0.0;
        let dy = &mut g.dy[y * w..(y + 1) * w];
        if y + 1 < h {
            let next = &values[(y + 1) * w..(y + 2) * w];
            for x in 0..w {
                dy[x] = next[x] - row[x];
            }
        } else {
            dy.fill(0.0);
        }
    }
}

pub fn gradient_apply(image: &Image) -> GradientField {
    gradient_of(image.data(), image.width(), image.height())
}

/// Exact adjoint of [`gradient_apply`]: `<G u, v> = <u, G^T v>`. Components of
/// `v` in the last column (x) or last row (y) are ignored, since `G` never
/// produces them.
pub fn gradient_adjoint(field: &GradientField) -> Vec<f64> {
    let mut out = vec![0.0; field.width * field.height];
    gradient_adjoint_into(field, &mut out);
    out
}

pub(crate) fn gradient_adjoint_into(field: &GradientField, out: &mut [f64]) {
    let (w, h) = (field.width, field.height);
    for y in 0..h {
        let o = &mut out[y * w..(y + 1) * w];
        let dx = &field.dx[y * w..(y + 1) * w];
        o[0] = 0.0;
        for x in 0..w - 1 {
            o[x] -= dx[x];
            o[x + 1] = dx[x];
        }
        if y + 1 < h {
            for (ov, d) in o.iter_mut().zip(&field.dy[y * w..(y + 1) * w]) {
                *ov -= d;
            }
        }
        if y > 0 {
            for (ov, d) in o.iter_mut().zip(&field.dy[(y - 1) * w..y * w]) {
                *ov += d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_has_zero_gradient() {
        let g = gradient_apply(&Image::filled(5, 4, 0.3).unwrap());
        assert!(g.dx.iter().chain(&g.dy).all(|&v| v == 0.0));
    }

    #[test]
    fn ramp() {
        let w = 6;
        let img = Image::from_fn(w, 3, |x, _| x as f64 / (w - 1) as f64).unwrap();
        let g = gradient_apply(&img);
        for y in 0..3 {
            for x in 0..w {
                let expect = if x + 1 < w { 1.0 / (w - 1) as f64 } else { 0.0 };
                assert!((g.dx[y * w + x] - expect).abs() < 1e-15);
            }
        }
        assert!(g.dy.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_explicit_difference_matrix() {
        // Oracle: build G as a dense (2N × N) matrix row by row from the
        // definition and multiply.
        let (w, h) = (5, 5);
        let n = w * h;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let mut gmat = vec![vec![0.0; n]; 2 * n];
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                if x + 1 < w {
                    gmat[p][p] = -1.0;
                    gmat[p][p + 1] = 1.0;
                }
                if y + 1 < h {
                    gmat[n + p][p] = -1.0;
                    gmat[n + p][p + w] = 1.0;
                }
            }
        }
        let g = gradient_of(&u, w, h);
        for r in 0..2 * n {
            let expect: f64 = gmat[r].iter().zip(&u).map(|(a, b)| a * b).sum();
            let got = if r < n { g.dx[r] } else { g.dy[r - n] };
            assert!((expect - got).abs() < 1e-14);
        }
        // and the adjoint is the transpose of the same matrix
        let v = GradientField {
            width: w,
            height: h,
            dx: (0..n).map(|_| rng.gen()).collect(),
            dy: (0..n).map(|_| rng.gen()).collect(),
        };
        let gt = gradient_adjoint(&v);
        for c in 0..n {
            let expect: f64 = (0..2 * n).map(|r| gmat[r][c] * if r < n { v.dx[r] } else { v.dy[r - n] }).sum();
            assert!((expect - gt[c]).abs() < 1e-14);
        }
    }

    #[test]
    fn adjoint_identity_random_pairs() {
        let (w, h) = (8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..20 {
            let u: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = GradientField {
                width: w,
                height: h,
                dx: (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                dy: (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let lhs = gradient_of(&u, w, h).dot(&v);
            let rhs: f64 = u.iter().zip(gradient_adjoint(&v)).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
        }
    }

    #[test]
    fn zero_and_delta_fields() {
        assert!(gradient_adjoint(&GradientField::zeros(4, 3)).iter().all(|&v| v == 0.0));
        let mut f = GradientField::zeros(4, 3);
        f.dx[4 + 1] = 1.0; // difference between (2,1) and (1,1)
        let col = gradient_adjoint(&f);
        let nonzero: Vec<_> = col.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        assert_eq!(nonzero, vec![(5, &-1.0), (6, &1.0)]);
    }

    #[test]
    fn single_column_and_row_images() {
        let g = gradient_of(&[0.1, 0.4, 0.9], 1, 3);
        assert_eq!(g.dx, vec![0.0; 3]);
        assert!((g.dy[0] - 0.3).abs() < 1e-15 && (g.dy[1] - 0.5).abs() < 1e-15 && g.dy[2] == 0.0);
        let u = [0.2, 0.7, 0.1];
        let v = gradient_of(&[1.0, -2.0, 0.5], 3, 1);
        let lhs = gradient_of(&u, 3, 1).dot(&v);
        let rhs: f64 = u.iter().zip(gradient_adjoint(&v)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
