//! Resolution structures of illumination patterns.
//!
//! A [`CellMap`] partitions the pixel grid into cells: every pixel of a cell
//! carries the same pattern bit. Uniform maps tile the frame with equal
//! squares. Retina-like maps keep the finest cells inside a circular ROI and
//! coarsen them ring by ring outwards, clipped to the rectangular frame.
//!
//! Retina maps are built top-down on an aligned grid: the frame is first cut
//! into tiles of the coarsest allowed side, and a tile is split into four
//! quadrants while its target side is smaller than its current side. A tile's
//! target side is the ROI cell side if any of its pixel centres lies inside the
//! ROI, and otherwise the side of the ring containing the tile centre. Because
//! every split halves an aligned power-of-two tile, cells stay rectangular,
//! contiguous and nested across ROI cell sizes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::raster::{Image, RoiSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Cell {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Longest side, used as "the" cell size for clipped border cells.
    pub fn side(&self) -> usize {
        self.width().max(self.height())
    }

    pub fn centroid(&self) -> (f64, f64) {
        ((self.x0 + self.x1) as f64 / 2.0, (self.y0 + self.y1) as f64 / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMap {
    width: usize,
    height: usize,
    cell_of_pixel: Vec<u32>,
    cells: Vec<Cell>,
}

impl CellMap {
    /// Assembles a map from rectangular cells, assigning indices in the order
    /// given. Fails if the rectangles do not partition the frame.
    fn from_cells(width: usize, height: usize, cells: Vec<Cell>) -> Result<Self> {
        let mut cell_of_pixel = vec![u32::MAX; width * height];
        for (idx, c) in cells.iter().enumerate() {
            if c.x1 > width || c.y1 > height || c.area() == 0 {
                return Err(Error::InvalidCellMap(format!("cell {idx} out of bounds or empty")));
            }
            for y in c.y0..c.y1 {
                for x in c.x0..c.x1 {
                    let slot = &mut cell_of_pixel[y * width + x];
                    if *slot != u32::MAX {
                        return Err(Error::InvalidCellMap(format!("pixel ({x},{y}) covered twice")));
                    }
                    *slot = idx as u32;
                }
            }
        }
        if cell_of_pixel.contains(&u32::MAX) {
            return Err(Error::InvalidCellMap("cells do not cover the frame".into()));
        }
        Ok(Self { width, height, cell_of_pixel, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell_of_pixel(&self) -> &[u32] {
        &self.cell_of_pixel
    }

    pub fn cell_at(&self, x: usize, y: usize) -> usize {
        self.cell_of_pixel[y * self.width + x] as usize
    }

    /// Sums a row-major pixel vector over each cell.
    pub fn cell_sums(&self, pixels: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cells.len()];
        for (&c, &v) in self.cell_of_pixel.iter().zip(pixels) {
            out[c as usize] += v;
        }
        out
    }

    /// `true` if every cell of `self` lies inside a single cell of `coarser`,
    /// considering only pixels selected by `mask` (all pixels when `None`).
    pub fn refines(&self, coarser: &CellMap, mask: Option<&[bool]>) -> bool {
        if self.width != coarser.width || self.height != coarser.height {
            return false;
        }
        let mut parent = vec![u32::MAX; self.cells.len()];
        for (i, (&fine, &coarse)) in self.cell_of_pixel.iter().zip(&coarser.cell_of_pixel).enumerate() {
            if mask.is_some_and(|m| !m[i]) {
                continue;
            }
            let p = &mut parent[fine as usize];
            if *p == u32::MAX {
                *p = coarse;
            } else if *p != coarse {
                return false;
            }
        }
        true
    }

    /// Diagnostic raster where brighter pixels belong to larger cells.
    pub fn size_image(&self) -> Image {
        let max_side = self.cells.iter().map(Cell::side).max().unwrap_or(1) as f64;
        let data = self
            .cell_of_pixel
            .iter()
            .map(|&c| self.cells[c as usize].side() as f64 / max_side)
            .collect();
        Image::new(self.width, self.height, data).expect("cell sizes normalized into [0, 1]")
    }
}

pub fn uniform_cell_map(width: usize, height: usize, cell_size: usize) -> Result<CellMap> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidCellMap("empty frame".into()));
    }
    if cell_size == 0 || width % cell_size != 0 || height % cell_size != 0 {
        return Err(Error::InvalidCellMap(format!(
            "cell size {cell_size} does not divide {width}x{height}"
        )));
    }
    let mut cells = Vec::with_capacity((width / cell_size) * (height / cell_size));
    for y0 in (0..height).step_by(cell_size) {
        for x0 in (0..width).step_by(cell_size) {
            cells.push(Cell { x0, y0, x1: x0 + cell_size, y1: y0 + cell_size });
        }
    }
    CellMap::from_cells(width, height, cells)
}

/// Parameters of a retina-like (foveated) cell layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetinaSpec {
    pub roi: RoiSpec,
    /// Cell side inside the ROI disk.
    pub roi_cell_size: usize,
    /// Ring `j` spans radii `[r0 * g^(j-1), r0 * g^j)`.
    pub ring_growth: f64,
    /// Coarsest cell side; must be `roi_cell_size * 2^j`.
    pub max_cell_size: usize,
}

impl RetinaSpec {
    /// Default layout for an `actual_resolution`-pixel frame: growth 2, coarsest
    /// cell a power-of-two multiple of the ROI cell no larger than `M / 8`.
    pub fn with_defaults(roi: RoiSpec, roi_cell_size: usize, actual_resolution: usize) -> Self {
        let target = (actual_resolution / 8).max(roi_cell_size);
        let mut max_cell_size = roi_cell_size.max(1);
        while max_cell_size * 2 <= target {
            max_cell_size *= 2;
        }
        Self { roi, roi_cell_size, ring_growth: 2.0, max_cell_size }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.roi_cell_size == 0 || width % self.roi_cell_size != 0 || height % self.roi_cell_size != 0 {
            return Err(Error::InvalidCellMap(format!(
                "ROI cell size {} does not divide {width}x{height}",
                self.roi_cell_size
            )));
        }
        if !(self.ring_growth > 1.0 && self.ring_growth.is_finite()) {
            return Err(Error::InvalidCellMap(format!("ring growth {} must exceed 1", self.ring_growth)));
        }
        if !is_pow2_multiple(self.max_cell_size, self.roi_cell_size) {
            return Err(Error::InvalidCellMap(format!(
                "max cell size {} is not the ROI cell size {} times a power of two",
                self.max_cell_size, self.roi_cell_size
            )));
        }
        self.roi.validate_for(width, height)
    }

    /// Ring index of a point at distance `d` from the ROI centre: 0 inside the
    /// disk, `j` for `r0 g^(j-1) <= d < r0 g^j`.
    pub fn ring_of(&self, d: f64) -> u32 {
        let mut bound = self.roi.radius;
        let mut j = 0;
        while d >= bound && j < 64 {
            bound *= self.ring_growth;
            j += 1;
        }
        j
    }

    /// Cell side for a ring, before any clipping to the frame.
    pub fn side_for_ring(&self, ring: u32) -> usize {
        let cap = self.max_cell_size.max(self.roi_cell_size);
        let mut side = self.roi_cell_size;
        for _ in 0..ring {
            if side >= cap {
                break;
            }
            side *= 2;
        }
        side.min(cap)
    }
}

fn is_pow2_multiple(value: usize, base: usize) -> bool {
    base > 0 && value >= base && value % base == 0 && (value / base).is_power_of_two()
}

/// Distance from `(cx, cy)` to the nearest pixel centre inside `[x0,x1)×[y0,y1)`.
fn nearest_pixel_distance(cell: &Cell, cx: f64, cy: f64) -> f64 {
    let px = cx.clamp(cell.x0 as f64 + 0.5, cell.x1 as f64 - 0.5);
    let py = cy.clamp(cell.y0 as f64 + 0.5, cell.y1 as f64 - 0.5);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

pub fn retina_cell_map(width: usize, height: usize, spec: &RetinaSpec) -> Result<CellMap> {
    spec.validate(width, height)?;
    let roi = &spec.roi;
    let top = spec.max_cell_size.max(spec.roi_cell_size);

    let target_side = |cell: &Cell| -> usize {
        if nearest_pixel_distance(cell, roi.center_x, roi.center_y) < roi.radius {
            return spec.roi_cell_size;
        }
        let (mx, my) = cell.centroid();
        let d = ((mx - roi.center_x).powi(2) + (my - roi.center_y).powi(2)).sqrt();
        spec.side_for_ring(spec.ring_of(d).max(1))
    };

    let mut cells = Vec::new();
    let mut stack = Vec::new();
    for ty in (0..height).step_by(top).rev() {
        for tx in (0..width).step_by(top).rev() {
            stack.push((tx, ty, top));
        }
    }
    // Depth-first with quadrants pushed in reverse so cells come out in
    // row-major tile order, quadrants in reading order.
    while let Some((x0, y0, side)) = stack.pop() {
        let cell = Cell { x0, y0, x1: (x0 + side).min(width), y1: (y0 + side).min(height) };
        if side > spec.roi_cell_size && target_side(&cell) < side {
            let half = side / 2;
            for (dx, dy) in [(half, half), (0, half), (half, 0), (0, 0)] {
                if x0 + dx < width && y0 + dy < height {
                    stack.push((x0 + dx, y0 + dy, half));
                }
            }
        } else {
            cells.push(cell);
        }
    }
    CellMap::from_cells(width, height, cells)
}

/// Base layout that a stage cell map is derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StageBase {
    Uniform,
    Retina(RetinaSpec),
}

/// Cell map of the stage with `stage_cells × stage_cells` cells (inside the ROI
/// for retina layouts) on an `M × M` frame.
pub fn cell_map_for_stage(base: &StageBase, actual_resolution: usize, stage_cells: usize) -> Result<CellMap> {
    if stage_cells == 0 || actual_resolution % stage_cells != 0 {
        return Err(Error::InvalidCellMap(format!(
            "{stage_cells} cells per side do not divide resolution {actual_resolution}"
        )));
    }
    let cell = actual_resolution / stage_cells;
    match base {
        StageBase::Uniform => uniform_cell_map(actual_resolution, actual_resolution, cell),
        StageBase::Retina(spec) => {
            let stage_spec = RetinaSpec {
                roi_cell_size: cell,
                max_cell_size: spec.max_cell_size.max(cell),
                ..*spec
            };
            retina_cell_map(actual_resolution, actual_resolution, &stage_spec)
        }
    }
}

/// Shared handle; patterns of one stage all point at the same map.
pub type SharedCellMap = Arc<CellMap>;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(w: usize, cx: f64, cy: f64, r: f64, roi_cell: usize, g: f64, max_cell: usize) -> (usize, RetinaSpec) {
        (
            w,
            RetinaSpec { roi: RoiSpec::new(cx, cy, r).unwrap(), roi_cell_size: roi_cell, ring_growth: g, max_cell_size: max_cell },
        )
    }

    fn assert_partition(map: &CellMap) {
        let total: usize = map.cells().iter().map(Cell::area).sum();
        assert_eq!(total, map.width() * map.height());
        let mut counts = vec![0usize; map.cell_count()];
        for &c in map.cell_of_pixel() {
            counts[c as usize] += 1;
        }
        assert!(counts.iter().all(|&n| n > 0));
    }

    #[test]
    fn uniform_counts() {
        let m = uniform_cell_map(128, 128, 8).unwrap();
        assert_eq!(m.cell_count(), 256);
        assert!(m.cells().iter().all(|c| c.width() == 8 && c.height() == 8));
        let id = uniform_cell_map(128, 128, 1).unwrap();
        assert_eq!(id.cell_count(), 16384);
        assert!(id.cell_of_pixel().iter().enumerate().all(|(i, &c)| c as usize == i));
    }

    #[test]
    fn uniform_matches_enumerated_partition() {
        let m = uniform_cell_map(16, 16, 4).unwrap();
        assert_eq!(m.cell_count(), 16);
        // Hand enumeration: pixel (x, y) belongs to block (x / 4, y / 4), blocks row-major.
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(m.cell_at(x, y), (y / 4) * 4 + x / 4);
            }
        }
    }

    #[test]
    fn uniform_rejects_non_divisible() {
        assert!(uniform_cell_map(10, 10, 3).is_err());
        assert!(uniform_cell_map(8, 8, 0).is_err());
    }

    #[test]
    fn covering_disk_degenerates_to_uniform() {
        let (w, s) = spec(128, 64.0, 64.0, 64.0 * 2f64.sqrt(), 8, 2.0, 16);
        let mut got = retina_cell_map(w, w, &s).unwrap().cells().to_vec();
        let mut expect = uniform_cell_map(128, 128, 8).unwrap().cells().to_vec();
        let key = |c: &Cell| (c.y0, c.x0);
        got.sort_by_key(key);
        expect.sort_by_key(key);
        assert_eq!(got, expect);
    }

    #[test]
    fn roi_pixels_are_singletons_at_unit_cells() {
        let (w, s) = spec(128, 64.0, 64.0, 16.0, 1, 2.0, 16);
        let map = retina_cell_map(w, w, &s).unwrap();
        assert_partition(&map);
        for y in 0..w {
            for x in 0..w {
                if s.roi.contains(x, y) {
                    assert_eq!(map.cells()[map.cell_at(x, y)].area(), 1, "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn ring_bands_match_brute_force_classifier() {
        // Oracle: classify each pixel by radius, then, independently of the
        // quadtree, find the coarsest aligned square around the pixel whose
        // band rule accepts it.
        let (w, s) = spec(32, 16.0, 16.0, 8.0, 2, 2.0, 8);
        let map = retina_cell_map(w, w, &s).unwrap();
        assert_partition(&map);
        let side_of = |x0: usize, y0: usize, side: usize| -> usize {
            let mut any_roi = false;
            for y in y0..y0 + side {
                for x in x0..x0 + side {
                    any_roi |= s.roi.contains(x, y);
                }
            }
            if any_roi {
                return 2;
            }
            let c = (x0 as f64 + side as f64 / 2.0, y0 as f64 + side as f64 / 2.0);
            let d = ((c.0 - 16.0).powi(2) + (c.1 - 16.0).powi(2)).sqrt();
            if d < 16.0 { 4 } else { 8 }
        };
        for y in 0..w {
            for x in 0..w {
                let mut side = 8;
                loop {
                    let (x0, y0) = (x / side * side, y / side * side);
                    if side == 2 || side_of(x0, y0, side) >= side {
                        break;
                    }
                    side /= 2;
                }
                let cell = &map.cells()[map.cell_at(x, y)];
                assert_eq!(cell.side(), side, "pixel ({x},{y})");
                assert_eq!((cell.x0, cell.y0), (x / side * side, y / side * side));
            }
        }
        let sides: std::collections::BTreeSet<_> = map.cells().iter().map(Cell::side).collect();
        assert_eq!(sides.into_iter().collect::<Vec<_>>(), vec![2, 4, 8]);
    }

    #[test]
    fn disjoint_roi_is_an_error() {
        let (w, s) = spec(32, -40.0, -40.0, 4.0, 2, 2.0, 8);
        assert!(retina_cell_map(w, w, &s).is_err());
    }

    #[test]
    fn stage_maps() {
        let u = cell_map_for_stage(&StageBase::Uniform, 128, 32).unwrap();
        assert_eq!(u.cell_count(), 1024);
        assert!(u.cells().iter().all(|c| c.side() == 4));
        assert!(cell_map_for_stage(&StageBase::Uniform, 128, 48).is_err());

        let base = RetinaSpec::with_defaults(RoiSpec::centered(128, 128, 32.0).unwrap(), 1, 128);
        assert_eq!(base.max_cell_size, 16);
        let finest = cell_map_for_stage(&StageBase::Retina(base), 128, 128).unwrap();
        for y in 0..128 {
            for x in 0..128 {
                if base.roi.contains(x, y) {
                    assert_eq!(finest.cells()[finest.cell_at(x, y)].area(), 1);
                }
            }
        }
        let coarse = cell_map_for_stage(&StageBase::Retina(base), 128, 16).unwrap();
        let direct = retina_cell_map(128, 128, &RetinaSpec { roi_cell_size: 8, ..base }).unwrap();
        assert_eq!(coarse, direct);
    }

    #[test]
    fn stages_refine_each_other() {
        let base = RetinaSpec::with_defaults(RoiSpec::centered(64, 64, 16.0).unwrap(), 1, 64);
        let mask = base.roi.mask(64, 64);
        let maps: Vec<_> = [8, 16, 32, 64]
            .iter()
            .map(|&m| cell_map_for_stage(&StageBase::Retina(base), 64, m).unwrap())
            .collect();
        for pair in maps.windows(2) {
            assert!(pair[1].refines(&pair[0], Some(&mask)));
            assert!(pair[1].refines(&pair[0], None));
            assert!(pair[1].cell_count() > pair[0].cell_count());
        }
    }

    #[test]
    fn size_image_is_normalized() {
        let base = RetinaSpec::with_defaults(RoiSpec::centered(32, 32, 8.0).unwrap(), 1, 32);
        let img = retina_cell_map(32, 32, &base).unwrap().size_image();
        assert_eq!(img.data().iter().cloned().fold(0.0, f64::max), 1.0);
    }

    fn arb_retina() -> impl Strategy<Value = (usize, RetinaSpec)> {
        (2u32..7, 0u32..3, 0.1f64..0.9, 0.1f64..0.9, 1.0f64..20.0, 1.2f64..3.0, 0u32..4)
            .prop_filter_map("roi cell must divide", |(wexp, cexp, fx, fy, r, g, jexp)| {
                let w = 1usize << wexp;
                let roi_cell = 1usize << cexp;
                if roi_cell > w {
                    return None;
                }
                let roi = RoiSpec::new(fx * w as f64, fy * w as f64, r).ok()?;
                roi.validate_for(w, w).ok()?;
                Some((w, RetinaSpec { roi, roi_cell_size: roi_cell, ring_growth: g, max_cell_size: roi_cell << jexp }))
            })
    }

    proptest! {
        #[test]
        fn retina_maps_partition_the_frame((w, s) in arb_retina()) {
            let map = retina_cell_map(w, w, &s).unwrap();
            let total: usize = map.cells().iter().map(Cell::area).sum();
            prop_assert_eq!(total, w * w);
            // ROI pixels always sit in ROI-sized cells (or smaller border clips).
            for y in 0..w {
                for x in 0..w {
                    if s.roi.contains(x, y) {
                        prop_assert!(map.cells()[map.cell_at(x, y)].side() <= s.roi_cell_size);
                    }
                }
            }
        }

        #[test]
        fn cell_side_grows_with_distance((w, s) in arb_retina()) {
            // Sides are non-decreasing in centroid distance, up to the
            // half-diagonal of the larger cell (ring assignment is by
            // tile centre, not by the centroid of every sub-block).
            let map = retina_cell_map(w, w, &s).unwrap();
            let dist = |c: &Cell| {
                let (mx, my) = c.centroid();
                ((mx - s.roi.center_x).powi(2) + (my - s.roi.center_y).powi(2)).sqrt()
            };
            for a in map.cells() {
                for b in map.cells() {
                    if a.side() > b.side() {
                        let slack = a.side() as f64 * std::f64::consts::SQRT_2 + b.side() as f64;
                        prop_assert!(dist(a) + slack >= dist(b) - 1e-9,
                            "cell {:?} (side {}) closer than {:?} (side {})", a, a.side(), b, b.side());
                    }
                }
            }
        }

        #[test]
        fn uniform_count_formula(exp in 0u32..5, k in 1usize..9) {
            let cell = 1usize << exp;
            let w = cell * k;
            prop_assert_eq!(uniform_cell_map(w, w, cell).unwrap().cell_count(), (w / cell).pow(2));
        }
    }
}
