use std::sync::Arc;

use crate::cellmaps::CellMap;
use crate::patterns::PatternSequence;

/// Patterns of one cell map, stored per cell rather than per pixel.
struct Group {
    map: Arc<CellMap>,
    rows: Vec<usize>,
    /// `rows.len() × map.cell_count()` 0/1 entries, row-major.
    values: Vec<u8>,
}

/// Matrix view `S` (T × N) of a pattern sequence. Products go through cell
/// sums, so coarse stages cost only as much as their cell count.
pub struct PatternOperator {
    pixels: usize,
    rows: usize,
    groups: Vec<Group>,
}

impl PatternOperator {
    pub fn new(seq: &PatternSequence) -> Self {
        let mut groups: Vec<Group> = Vec::new();
        for (i, p) in seq.patterns().iter().enumerate() {
            let map = p.source_cell_map();
            let slot = match groups.iter().position(|g| Arc::ptr_eq(&g.map, map) || *g.map == **map) {
                Some(k) => k,
                None => {
                    groups.push(Group { map: Arc::clone(map), rows: Vec::new(), values: Vec::new() });
                    groups.len() - 1
                }
            };
            let g = &mut groups[slot];
            g.rows.push(i);
            g.values.extend(p.cell_values());
        }
        Self { pixels: seq.width() * seq.height(), rows: seq.len(), groups }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.pixels
    }

    /// `S x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for g in &self.groups {
            let sums = g.map.cell_sums(x);
            let cells = sums.len();
            for (r, &row) in g.rows.iter().enumerate() {
                let v = &g.values[r * cells..(r + 1) * cells];
                out[row] = v.iter().zip(&sums).map(|(&a, b)| f64::from(a) * b).sum();
            }
        }
    }

    /// `S^T y`.
    pub fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for g in &self.groups {
            let cells = g.map.cell_count();
            let mut acc = vec![0.0; cells];
            for (r, &row) in g.rows.iter().enumerate() {
                let w = y[row];
                if w == 0.0 {
                    continue;
                }
                let v = &g.values[r * cells..(r + 1) * cells];
                for (a, &b) in acc.iter_mut().zip(v) {
                    *a += w * f64::from(b);
                }
            }
            for (o, &c) in out.iter_mut().zip(g.map.cell_of_pixel()) {
                *o += acc[c as usize];
            }
        }
    }

    /// Column means of `S` (the mean pattern).
    pub fn mean_row(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pixels];
        self.apply_adjoint(&vec![1.0 / self.rows.max(1) as f64; self.rows], &mut out);
        out
    }
}
