use crate::error::{Error, Result};

/// One stage of a temporally variable-resolution sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    /// Cells per side (inside the ROI for retina layouts).
    pub cells: usize,
    pub count: usize,
}

/// Doubling ladder of imaging resolutions `m_1, 2 m_1, ..., M` with pattern
/// counts chosen so the cumulative count after stage `k` equals `m_k^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    actual_resolution: usize,
    stages: Vec<Stage>,
}

impl Schedule {
    pub fn actual_resolution(&self) -> usize {
        self.actual_resolution
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn total(&self) -> usize {
        self.stages.iter().map(|s| s.count).sum()
    }

    pub fn cumulative(&self) -> Vec<usize> {
        self.stages
            .iter()
            .scan(0, |acc, s| {
                *acc += s.count;
                Some(*acc)
            })
            .collect()
    }

    /// Stage counts actually used when only the first `total` patterns are drawn.
    pub fn truncated_counts(&self, total: usize) -> Vec<(usize, usize)> {
        let mut left = total;
        let mut out = Vec::new();
        for (k, s) in self.stages.iter().enumerate() {
            if left == 0 {
                break;
            }
            let n = s.count.min(left);
            out.push((k, n));
            left -= n;
        }
        out
    }

    /// Rebuilds a schedule from stored stages, checking the ladder invariants.
    pub fn from_stages(actual_resolution: usize, stages: Vec<Stage>) -> Result<Self> {
        let first = stages.first().ok_or_else(|| Error::InvalidSchedule("no stages".into()))?;
        let rebuilt = build_schedule(actual_resolution, first.cells)?;
        if rebuilt.stages != stages {
            return Err(Error::InvalidSchedule("stages do not follow the doubling ladder".into()));
        }
        Ok(rebuilt)
    }
}

pub fn build_schedule(actual_resolution: usize, lowest_resolution: usize) -> Result<Schedule> {
    if lowest_resolution == 0 || actual_resolution == 0 {
        return Err(Error::InvalidSchedule("resolutions must be positive".into()));
    }
    if lowest_resolution > actual_resolution {
        return Err(Error::InvalidSchedule(format!(
            "lowest resolution {lowest_resolution} exceeds actual resolution {actual_resolution}"
        )));
    }
    if actual_resolution % lowest_resolution != 0 || !(actual_resolution / lowest_resolution).is_power_of_two() {
        return Err(Error::InvalidSchedule(format!(
            "{actual_resolution} is not {lowest_resolution} times a power of two"
        )));
    }
    let mut stages = Vec::new();
    let mut done = 0usize;
    let mut m = lowest_resolution;
    while m <= actual_resolution {
        let count = m * m - done;
        stages.push(Stage { cells: m, count });
        done += count;
        m *= 2;
    }
    Ok(Schedule { actual_resolution, stages })
}
