use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::patterns::Family;
use crate::raster::RoiSpec;
use crate::recon::{SolverSettings, TvNorm};

use super::objects::BuiltinObject;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ucgi,
    Tvcgi,
    Svcgi,
    Tsvcgi,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ucgi, Method::Tvcgi, Method::Svcgi, Method::Tsvcgi];

    pub fn family(self) -> Family {
        match self {
            Method::Ucgi => Family::Uniform,
            Method::Tvcgi => Family::Temporal,
            Method::Svcgi => Family::Spatial,
            Method::Tsvcgi => Family::Tsv,
        }
    }

    pub fn needs_roi(self) -> bool {
        self.family().needs_retina()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ucgi => "UCGI",
            Method::Tvcgi => "TVCGI",
            Method::Svcgi => "SVCGI",
            Method::Tsvcgi => "TSVCGI",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectSource {
    Builtin(BuiltinObject),
    File(PathBuf),
}

impl fmt::Display for ObjectSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectSource::Builtin(b) => write!(f, "{b}"),
            ObjectSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for ObjectSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.parse::<BuiltinObject>() {
            Ok(b) => Ok(ObjectSource::Builtin(b)),
            Err(_) if !s.is_empty() => Ok(ObjectSource::File(PathBuf::from(s))),
            Err(e) => Err(e),
        }
    }
}

/// How `noise_sigmas` are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// Standard deviations in raw intensity units.
    #[default]
    Absolute,
    /// Fractions of the expected mean noiseless intensity, `0.5 · Σ O`.
    Relative,
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::Absolute => "absolute",
            NoiseMode::Relative => "relative",
        })
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "absolute" => Ok(NoiseMode::Absolute),
            "relative" => Ok(NoiseMode::Relative),
            other => Err(Error::Config(format!("unknown noise mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub object: ObjectSource,
    pub actual_resolution: usize,
    pub methods: Vec<Method>,
    pub measurement_counts: Vec<usize>,
    pub noise_sigmas: Vec<f64>,
    pub noise_mode: NoiseMode,
    /// Defaults to a centered disk of radius `M / 4` when absent.
    pub roi: Option<RoiSpec>,
    /// `m_1`; defaults to `M / 8`.
    pub lowest_resolution: Option<usize>,
    pub seeds: Vec<u64>,
    pub solver: SolverSettings,
    pub output_dir: Option<PathBuf>,
    /// Also write the GPAT1 stack of every row.
    pub save_stacks: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            object: ObjectSource::Builtin(BuiltinObject::Peppers),
            actual_resolution: 64,
            methods: vec![Method::Ucgi, Method::Tvcgi],
            measurement_counts: vec![410, 819, 1638],
            noise_sigmas: vec![0.0],
            noise_mode: NoiseMode::Absolute,
            roi: None,
            lowest_resolution: None,
            seeds: vec![1],
            solver: SolverSettings::default(),
            output_dir: None,
            save_stacks: false,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Error::Config(format!("{key}: cannot parse '{s}'"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

pub fn parse_roi(value: &str) -> Result<RoiSpec> {
    let v: Vec<f64> = parse_list("roi", value)?;
    if v.len() != 3 {
        return Err(Error::Config(format!("roi expects cx,cy,r; got '{value}'")));
    }
    RoiSpec::new(v[0], v[1], v[2])
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "object" => self.object = value.parse()?,
            "resolution" => self.actual_resolution = parse_one(key, value)?,
            "methods" => self.methods = parse_list(key, value)?,
            "measurements" => self.measurement_counts = parse_list(key, value)?,
            "sigmas" => self.noise_sigmas = parse_list(key, value)?,
            "noise_mode" => self.noise_mode = value.parse()?,
            "roi" => self.roi = if value.eq_ignore_ascii_case("default") { None } else { Some(parse_roi(value)?) },
            "m1" => self.lowest_resolution = Some(parse_one(key, value)?),
            "seeds" => self.seeds = parse_list(key, value)?,
            "mu" => self.solver.fidelity_weight = parse_one(key, value)?,
            "beta" => self.solver.penalty_weight = parse_one(key, value)?,
            "max_iterations" => self.solver.max_iterations = parse_one(key, value)?,
            "tolerance" => self.solver.tolerance = parse_one(key, value)?,
            "inner_iterations" => self.solver.inner_iterations = parse_one(key, value)?,
            "noise_weight" => self.solver.noise_weight = parse_one(key, value)?,
            "tv_norm" => {
                self.solver.norm = match value.to_ascii_lowercase().as_str() {
                    "anisotropic" => TvNorm::Anisotropic,
                    "isotropic" => TvNorm::Isotropic,
                    other => return Err(Error::Config(format!("unknown tv_norm '{other}'"))),
                }
            }
            "out" => self.output_dir = Some(PathBuf::from(value)),
            "save_stacks" => self.save_stacks = parse_one(key, value)?,
            // written by manifests for the record
            "version" => {}
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Serializes to the same `key = value` format that [`ExperimentConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let norm = match self.solver.norm {
            TvNorm::Anisotropic => "anisotropic",
            TvNorm::Isotropic => "isotropic",
        };
        let _ = writeln!(s, "object = {}", self.object);
        let _ = writeln!(s, "resolution = {}", self.actual_resolution);
        let _ = writeln!(s, "methods = {}", join(&self.methods));
        let _ = writeln!(s, "measurements = {}", join(&self.measurement_counts));
        let _ = writeln!(s, "sigmas = {}", join(&self.noise_sigmas));
        let _ = writeln!(s, "noise_mode = {}", self.noise_mode);
        if let Some(r) = &self.roi {
            let _ = writeln!(s, "roi = {},{},{}", r.center_x, r.center_y, r.radius);
        }
        if let Some(m1) = self.lowest_resolution {
            let _ = writeln!(s, "m1 = {m1}");
        }
        let _ = writeln!(s, "seeds = {}", join(&self.seeds));
        let _ = writeln!(s, "mu = {}", self.solver.fidelity_weight);
        let _ = writeln!(s, "beta = {}", self.solver.penalty_weight);
        let _ = writeln!(s, "max_iterations = {}", self.solver.max_iterations);
        let _ = writeln!(s, "tolerance = {}", self.solver.tolerance);
        let _ = writeln!(s, "inner_iterations = {}", self.solver.inner_iterations);
        let _ = writeln!(s, "noise_weight = {}", self.solver.noise_weight);
        let _ = writeln!(s, "tv_norm = {norm}");
        if let Some(o) = &self.output_dir {
            let _ = writeln!(s, "out = {}", o.display());
        }
        let _ = writeln!(s, "save_stacks = {}", self.save_stacks);
        s
    }

    pub fn resolved_roi(&self) -> Result<RoiSpec> {
        match self.roi {
            Some(r) => Ok(r),
            None => {
                let m = self.actual_resolution;
                RoiSpec::centered(m, m, m as f64 / 4.0)
            }
        }
    }

    pub fn resolved_m1(&self) -> usize {
        self.lowest_resolution.unwrap_or((self.actual_resolution / 8).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        if self.measurement_counts.is_empty() {
            return Err(Error::Config("no measurement counts given".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        if self.noise_sigmas.is_empty() {
            return Err(Error::Config("no noise levels given".into()));
        }
        if self.noise_sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Config("noise levels must be finite and non-negative".into()));
        }
        let m = self.actual_resolution;
        if m == 0 {
            return Err(Error::Config("resolution must be positive".into()));
        }
        if let Some(&t) = self.measurement_counts.iter().find(|&&t| t < 2 || t > m * m) {
            return Err(Error::Config(format!("measurement count {t} outside 2..={}", m * m)));
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return Err(Error::Config("duplicate method".into()));
        }
        self.resolved_roi()?.validate_for(m, m)?;
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.methods.iter().any(|mt| mt.family().needs_schedule()) {
            crate::patterns::build_schedule(m, self.resolved_m1())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let mut cfg = ExperimentConfig {
            methods: vec![Method::Tsvcgi, Method::Ucgi],
            roi: Some(RoiSpec::new(30.5, 31.0, 12.0).unwrap()),
            lowest_resolution: Some(4),
            seeds: vec![3, 9],
            noise_sigmas: vec![0.0, 0.01],
            noise_mode: NoiseMode::Relative,
            save_stacks: true,
            output_dir: Some("runs/a".into()),
            ..Default::default()
        };
        cfg.solver.norm = TvNorm::Isotropic;
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_unknown_keys() {
        let cfg = ExperimentConfig::parse("# header\nresolution = 32  # small\n\nmethods = ucgi, tvcgi\n").unwrap();
        assert_eq!(cfg.actual_resolution, 32);
        assert_eq!(cfg.methods, vec![Method::Ucgi, Method::Tvcgi]);
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("resolution 32").is_err());
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let empty = ExperimentConfig { methods: vec![], ..Default::default() };
        assert!(matches!(empty.validate(), Err(Error::Config(_))));
        let too_many = ExperimentConfig { measurement_counts: vec![5000], ..Default::default() };
        assert!(too_many.validate().is_err());
        let bad_ladder = ExperimentConfig { lowest_resolution: Some(5), ..Default::default() };
        assert!(bad_ladder.validate().is_err());
        let outside = ExperimentConfig { roi: Some(RoiSpec::new(500.0, 500.0, 3.0).unwrap()), ..Default::default() };
        assert!(outside.validate().is_err());
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.resolved_m1(), 8);
        let roi = cfg.resolved_roi().unwrap();
        assert_eq!((roi.center_x, roi.center_y, roi.radius), (32.0, 32.0, 16.0));
    }
}
