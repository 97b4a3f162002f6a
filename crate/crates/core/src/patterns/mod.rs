//! Seeded random binary illumination patterns over cell maps.
//!
//! Four families are supported: uniform (finest uniform cells), temporal
//! (uniform cells refined stage by stage along a [`Schedule`]), spatial
//! (finest retina-like layout) and TSV (retina-like layouts refined along the
//! schedule). Every cell of every pattern takes one fair Bernoulli bit that is
//! a pure function of `(seed, pattern index, cell index)`.

mod schedule;
pub mod stack;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use schedule::{build_schedule, Schedule, Stage};
pub use stack::{read_pattern_stack, write_pattern_stack};

use crate::cellmaps::{cell_map_for_stage, CellMap, RetinaSpec, StageBase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Uniform,
    Temporal,
    Spatial,
    Tsv,
}

impl Family {
    pub fn tag(self) -> u8 {
        match self {
            Family::Uniform => 0,
            Family::Temporal => 1,
            Family::Spatial => 2,
            Family::Tsv => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Family::Uniform,
            1 => Family::Temporal,
            2 => Family::Spatial,
            3 => Family::Tsv,
            _ => return None,
        })
    }

    pub fn needs_schedule(self) -> bool {
        matches!(self, Family::Temporal | Family::Tsv)
    }

    pub fn needs_retina(self) -> bool {
        matches!(self, Family::Spatial | Family::Tsv)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Uniform => "uniform",
            Family::Temporal => "temporal",
            Family::Spatial => "spatial",
            Family::Tsv => "tsv",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Family::Uniform),
            "temporal" => Ok(Family::Temporal),
            "spatial" => Ok(Family::Spatial),
            "tsv" => Ok(Family::Tsv),
            other => Err(Error::InvalidSequence(format!("unknown family '{other}'"))),
        }
    }
}

/// Bytes per packed mask row.
pub fn row_bytes(width: usize) -> usize {
    width.div_ceil(8)
}

/// A binary mask, rows packed MSB-first and padded to whole bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    width: usize,
    height: usize,
    index: usize,
    stage: usize,
    bits: Vec<u8>,
    cell_map: Arc<CellMap>,
}

impl Pattern {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Position in the sequence.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Stage (for single-map families always 0).
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn packed(&self) -> &[u8] {
        &self.bits
    }

    pub fn source_cell_map(&self) -> &Arc<CellMap> {
        &self.cell_map
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        let byte = self.bits[y * row_bytes(self.width) + x / 8];
        (byte >> (7 - (x % 8))) & 1 == 1
    }

    /// Unpacked row-major 0/1 values.
    pub fn to_values(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.get(x, y) as u8);
            }
        }
        out
    }

    /// One value per cell of the source map.
    pub fn cell_values(&self) -> Vec<u8> {
        self.cell_map.cells().iter().map(|c| self.get(c.x0, c.y0) as u8).collect()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSequence {
    pub(crate) actual_resolution: usize,
    pub(crate) family: Family,
    pub(crate) schedule: Option<Schedule>,
    pub(crate) retina: Option<RetinaSpec>,
    pub(crate) seed: u64,
    pub(crate) stage_maps: Vec<Arc<CellMap>>,
    pub(crate) patterns: Vec<Pattern>,
}

impl PatternSequence {
    pub fn actual_resolution(&self) -> usize {
        self.actual_resolution
    }

    pub fn width(&self) -> usize {
        self.actual_resolution
    }

    pub fn height(&self) -> usize {
        self.actual_resolution
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        self.schedule.as_ref()
    }

    pub fn retina(&self) -> Option<&RetinaSpec> {
        self.retina.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn stage_maps(&self) -> &[Arc<CellMap>] {
        &self.stage_maps
    }

    /// First `count` patterns as a new sequence.
    pub fn prefix(&self, count: usize) -> PatternSequence {
        PatternSequence { patterns: self.patterns[..count.min(self.len())].to_vec(), ..self.clone() }
    }

    /// Reorders patterns (and re-labels indices), keeping the masks intact.
    pub fn permuted(&self, order: &[usize]) -> PatternSequence {
        let patterns = order
            .iter()
            .enumerate()
            .map(|(i, &src)| Pattern { index: i, ..self.patterns[src].clone() })
            .collect();
        PatternSequence { patterns, ..self.clone() }
    }
}

/// Everything needed to (re)generate a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRequest {
    pub family: Family,
    pub actual_resolution: usize,
    pub count: usize,
    pub schedule: Option<Schedule>,
    pub retina: Option<RetinaSpec>,
    pub seed: u64,
}

/// Bit for cell `cell` of pattern `index`. ChaCha8 keyed by `seed`, with the
/// pattern index as stream id; cell `c` reads bit `c % 32` of word `c / 32`.
pub fn cell_bit(seed: u64, index: usize, cell: usize) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.set_word_pos((cell / 32) as u128);
    (rng.next_u32() >> (cell % 32)) & 1 == 1
}

fn cell_bits(seed: u64, index: usize, cells: usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut out = Vec::with_capacity(cells);
    while out.len() < cells {
        let word = rng.next_u32();
        for b in 0..32 {
            if out.len() == cells {
                break;
            }
            out.push((word >> b) & 1 == 1);
        }
    }
    out
}

fn expand(map: &CellMap, bits: &[bool]) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let stride = row_bytes(w);
    let mut packed = vec![0u8; stride * h];
    for y in 0..h {
        for x in 0..w {
            if bits[map.cell_at(x, y)] {
                packed[y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    packed
}

/// Stage cell maps for a family; one map for single-resolution families.
pub(crate) fn stage_maps_for(
    family: Family,
    actual_resolution: usize,
    schedule: Option<&Schedule>,
    retina: Option<&RetinaSpec>,
) -> Result<Vec<Arc<CellMap>>> {
    let m = actual_resolution;
    let retina_base = || -> Result<StageBase> {
        let spec = retina.ok_or_else(|| Error::InvalidSequence(format!("family {family} requires a retina spec")))?;
        Ok(StageBase::Retina(*spec))
    };
    let schedule_for = || -> Result<&Schedule> {
        let s = schedule.ok_or_else(|| Error::InvalidSequence(format!("family {family} requires a schedule")))?;
        if s.actual_resolution() != m {
            return Err(Error::InvalidSequence(format!(
                "schedule is for resolution {}, sequence for {m}",
                s.actual_resolution()
            )));
        }
        Ok(s)
    };
    let maps = match family {
        Family::Uniform => vec![cell_map_for_stage(&StageBase::Uniform, m, m)?],
        Family::Spatial => vec![cell_map_for_stage(&retina_base()?, m, m)?],
        Family::Temporal => schedule_for()?
            .stages()
            .iter()
            .map(|s| cell_map_for_stage(&StageBase::Uniform, m, s.cells))
            .collect::<Result<_>>()?,
        Family::Tsv => {
            let base = retina_base()?;
            schedule_for()?
                .stages()
                .iter()
                .map(|s| cell_map_for_stage(&base, m, s.cells))
                .collect::<Result<_>>()?
        }
    };
    Ok(maps.into_iter().map(Arc::new).collect())
}

/// Stage index of every pattern position `0..count`.
pub(crate) fn stage_assignment(family: Family, schedule: Option<&Schedule>, count: usize) -> Result<Vec<usize>> {
    if !family.needs_schedule() {
        return Ok(vec![0; count]);
    }
    let schedule = schedule.ok_or_else(|| Error::InvalidSequence(format!("family {family} requires a schedule")))?;
    if count > schedule.total() {
        return Err(Error::InvalidSequence(format!(
            "{count} patterns requested but the schedule holds {}",
            schedule.total()
        )));
    }
    Ok(schedule
        .truncated_counts(count)
        .into_iter()
        .flat_map(|(k, n)| std::iter::repeat(k).take(n))
        .collect())
}

pub(crate) fn build_pattern(seed: u64, index: usize, stage: usize, map: &Arc<CellMap>) -> Pattern {
    let bits = cell_bits(seed, index, map.cell_count());
    Pattern {
        width: map.width(),
        height: map.height(),
        index,
        stage,
        bits: expand(map, &bits),
        cell_map: Arc::clone(map),
    }
}

pub fn generate_sequence(request: &SequenceRequest) -> Result<PatternSequence> {
    let SequenceRequest { family, actual_resolution, count, ref schedule, ref retina, seed } = *request;
    if count == 0 {
        return Err(Error::InvalidSequence("pattern count must be positive".into()));
    }
    if actual_resolution == 0 {
        return Err(Error::InvalidSequence("resolution must be positive".into()));
    }
    let maps = stage_maps_for(family, actual_resolution, schedule.as_ref(), retina.as_ref())?;
    let stages = stage_assignment(family, schedule.as_ref(), count)?;
    let patterns = stages
        .par_iter()
        .enumerate()
        .map(|(i, &k)| build_pattern(seed, i, k, &maps[k]))
        .collect();
    Ok(PatternSequence {
        actual_resolution,
        family,
        schedule: if family.needs_schedule() { schedule.clone() } else { None },
        retina: if family.needs_retina() { *retina } else { None },
        seed,
        stage_maps: maps,
        patterns,
    })
}
