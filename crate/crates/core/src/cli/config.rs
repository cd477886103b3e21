//! Flat `key = value` run configuration. Every key has a default; unknown and
//! repeated keys are rejected. `#` starts a comment.

use std::collections::HashSet;
use std::path::PathBuf;
use std::str::FromStr;

use crate::grid::{GridFunction, NormMode};
use crate::problems::NoiseModel;
use crate::schedule::ScheduleParams;
use crate::solver::{GammaRule, InitialGuess, SolverConfig};
use crate::{Error, Result};

pub const KEYS: &[&str] = &[
    "schedule.d",
    "schedule.a0",
    "schedule.c",
    "schedule.b",
    "schedule.h",
    "stop.C",
    "stop.zeta",
    "stop.theta",
    "solver.max_iter",
    "solver.gamma",
    "solver.u0",
    "solver.shift",
    "solver.norm",
    "problem.kind",
    "problem.N",
    "problem.noise",
    "problem.delta_rel",
    "problem.seed",
    "problem.u_at_half",
    "problem.exact",
    "output.dir",
    "experiment.seeds",
    "experiment.delta_rels",
    "verify.n_max",
    "verify.tol",
    "verify.check_tol",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Trapezoid-discretized `e^{-|x-y|}` kernel plus `arctan³`.
    Integral,
    /// Diagonal `λ_i = (i + 1)^{-2}`.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactKind {
    Step,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorSource {
    Zero,
    FixedPoint,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schedule_d: Option<f64>,
    pub schedule_a0: Option<f64>,
    pub schedule_c: f64,
    pub schedule_b: f64,
    pub schedule_h: f64,
    pub stop_c: f64,
    pub stop_zeta: f64,
    pub stop_theta: f64,
    pub max_iter: usize,
    /// `None`: `γ_n = h`.
    pub gamma: Option<GammaRule>,
    pub u0: VectorSource,
    pub shift: Option<PathBuf>,
    pub norm: NormMode,
    pub kind: ProblemKind,
    pub n: usize,
    pub noise: NoiseKind,
    pub delta_rel: f64,
    pub seed: u64,
    pub u_at_half: f64,
    pub exact: ExactKind,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub delta_rels: Vec<f64>,
    pub verify_n_max: usize,
    pub verify_tol: f64,
    pub verify_check_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    Sinusoid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schedule_d: None,
            schedule_a0: None,
            schedule_c: 5.0,
            schedule_b: 0.99,
            schedule_h: 1.0,
            stop_c: 1.01,
            stop_zeta: 0.99,
            stop_theta: 1.0,
            max_iter: 100_000,
            gamma: None,
            u0: VectorSource::Zero,
            shift: None,
            norm: NormMode::Euclidean,
            kind: ProblemKind::Integral,
            n: 100,
            noise: NoiseKind::Gaussian,
            delta_rel: 0.01,
            seed: 0,
            u_at_half: 1.0,
            exact: ExactKind::Step,
            output_dir: PathBuf::from("out"),
            seeds: (0..10).collect(),
            delta_rels: vec![0.05, 0.03, 0.02, 0.01, 0.003, 0.001],
            verify_n_max: 200,
            verify_tol: 1e-11,
            verify_check_tol: 1e-8,
        }
    }
}

const DEFAULT_D: f64 = 0.1;

fn bad(line: usize, key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("line {line}: {key} = {value:?} is not {expected}"))
}

fn parse_num<T: FromStr>(line: usize, key: &str, value: &str, expected: &str) -> Result<T> {
    value.parse().map_err(|_| bad(line, key, value, expected))
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    let x: f64 = parse_num(line, key, value, "a decimal number")?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(line, key, value, "a finite number"))
    }
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str, expected: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(|s| parse_num(line, key, s.trim(), expected))
        .collect::<Result<_>>()?;
    Ok(items)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {line}: unknown key {key:?}")));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {line}: duplicate key {key:?}")));
            }
            cfg.set(line, key, value)?;
        }
        if cfg.schedule_d.is_some() && cfg.schedule_a0.is_some() {
            return Err(Error::Config(
                "schedule.d and schedule.a0 are mutually exclusive".into(),
            ));
        }
        if cfg.seeds.is_empty() || cfg.delta_rels.is_empty() {
            return Err(Error::Config("experiment lists must be nonempty".into()));
        }
        if cfg
            .delta_rels
            .iter()
            .chain([&cfg.delta_rel])
            .any(|d| *d < 0.0)
        {
            return Err(Error::Config("delta_rel must be nonnegative".into()));
        }
        if cfg.verify_n_max < 1 {
            return Err(Error::Config("verify.n_max must be at least 1".into()));
        }
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "schedule.d" => self.schedule_d = Some(parse_f64(line, key, value)?),
            "schedule.a0" => self.schedule_a0 = Some(parse_f64(line, key, value)?),
            "schedule.c" => self.schedule_c = parse_f64(line, key, value)?,
            "schedule.b" => self.schedule_b = parse_f64(line, key, value)?,
            "schedule.h" => self.schedule_h = parse_f64(line, key, value)?,
            "stop.C" => self.stop_c = parse_f64(line, key, value)?,
            "stop.zeta" => self.stop_zeta = parse_f64(line, key, value)?,
            "stop.theta" => self.stop_theta = parse_f64(line, key, value)?,
            "solver.max_iter" => {
                self.max_iter = parse_num(line, key, value, "a nonnegative integer")?
            }
            "solver.gamma" => {
                self.gamma = match value {
                    "h" => None,
                    "auto" => Some(GammaRule::Adaptive { cap: None }),
                    v => Some(GammaRule::Constant(parse_f64(line, key, v)?)),
                }
            }
            "solver.u0" => {
                self.u0 = match value {
                    "zero" => VectorSource::Zero,
                    "fixed_point" => VectorSource::FixedPoint,
                    path => VectorSource::File(PathBuf::from(path)),
                }
            }
            "solver.shift" => {
                self.shift = match value {
                    "none" | "zero" => None,
                    path => Some(PathBuf::from(path)),
                }
            }
            "solver.norm" => {
                self.norm = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "euclidean or trapezoid"))?
            }
            "problem.kind" => {
                self.kind = match value {
                    "integral" => ProblemKind::Integral,
                    "diagonal" => ProblemKind::Diagonal,
                    _ => return Err(bad(line, key, value, "integral or diagonal")),
                }
            }
            "problem.N" => self.n = parse_num(line, key, value, "an integer")?,
            "problem.noise" => {
                self.noise = match value {
                    "gaussian" => NoiseKind::Gaussian,
                    "sinusoid" => NoiseKind::Sinusoid,
                    _ => return Err(bad(line, key, value, "gaussian or sinusoid")),
                }
            }
            "problem.delta_rel" => self.delta_rel = parse_f64(line, key, value)?,
            "problem.seed" => self.seed = parse_num(line, key, value, "an unsigned integer")?,
            "problem.u_at_half" => self.u_at_half = parse_f64(line, key, value)?,
            "problem.exact" => {
                self.exact = match value {
                    "step" => ExactKind::Step,
                    "zero" => ExactKind::Zero,
                    _ => return Err(bad(line, key, value, "step or zero")),
                }
            }
            "output.dir" => self.output_dir = PathBuf::from(value),
            "experiment.seeds" => {
                self.seeds = parse_list(line, key, value, "a list of unsigned integers")?
            }
            "experiment.delta_rels" => {
                self.delta_rels = parse_list(line, key, value, "a list of decimals")?
            }
            "verify.n_max" => self.verify_n_max = parse_num(line, key, value, "an integer")?,
            "verify.tol" => self.verify_tol = parse_f64(line, key, value)?,
            "verify.check_tol" => self.verify_check_tol = parse_f64(line, key, value)?,
            _ => unreachable!("key list checked above"),
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<ScheduleParams> {
        match self.schedule_a0 {
            Some(a0) => {
                ScheduleParams::from_initial(a0, self.schedule_c, self.schedule_b, self.schedule_h)
            }
            None => ScheduleParams::new(
                self.schedule_d.unwrap_or(DEFAULT_D),
                self.schedule_c,
                self.schedule_b,
                self.schedule_h,
            ),
        }
    }

    pub fn noise_model(&self, seed: u64) -> NoiseModel {
        match self.noise {
            NoiseKind::Gaussian => NoiseModel::Gaussian { seed },
            NoiseKind::Sinusoid => NoiseModel::Sinusoid,
        }
    }

    /// Solver settings; vectors named by path are read here.
    pub fn solver_config(&self, dim: usize) -> Result<SolverConfig> {
        let u0 = match &self.u0 {
            VectorSource::Zero => InitialGuess::Zero,
            VectorSource::FixedPoint => InitialGuess::FixedPoint,
            VectorSource::File(p) => InitialGuess::Given(read_vector(p, dim)?),
        };
        let shift = self
            .shift
            .as_ref()
            .map(|p| read_vector(p, dim))
            .transpose()?;
        Ok(SolverConfig {
            c: self.stop_c,
            zeta: self.stop_zeta,
            theta: self.stop_theta,
            gamma: self.gamma,
            max_iter: self.max_iter,
            u0,
            shift,
            norm_mode: self.norm,
            ..SolverConfig::default()
        })
    }
}

/// Reads one decimal per line; blank lines are ignored.
pub fn read_vector(path: &std::path::Path, dim: usize) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let values: Vec<f64> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse()
                .map_err(|_| Error::Config(format!("{}: line {}: {l:?}", path.display(), i + 1)))
        })
        .collect::<Result<_>>()?;
    let v = GridFunction::new(values)?;
    v.check_len(dim)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let s = cfg.schedule().unwrap();
        assert_eq!((s.d, s.c, s.b, s.h), (0.1, 5.0, 0.99, 1.0));
    }

    #[test]
    fn parses_keys_and_comments() {
        let cfg = RunConfig::parse(
            "schedule.a0 = 0.1  # initial value\nsolver.gamma = auto\nproblem.noise = sinusoid\nexperiment.seeds = 3, 4\nsolver.norm = trapezoid\n",
        )
        .unwrap();
        assert!((cfg.schedule().unwrap().a_at(0) - 0.1).abs() < 1e-15);
        assert_eq!(cfg.gamma, Some(GammaRule::Adaptive { cap: None }));
        assert_eq!(cfg.noise, NoiseKind::Sinusoid);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.norm, NormMode::TrapezoidWeighted);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert!(RunConfig::parse("schedule.x = 1").is_err());
        assert!(RunConfig::parse("stop.C = 2\nstop.C = 3").is_err());
        assert!(RunConfig::parse("stop.C 2").is_err());
        assert!(RunConfig::parse("stop.C = two").is_err());
        assert!(RunConfig::parse("schedule.d = 1\nschedule.a0 = 1").is_err());
        assert!(RunConfig::parse("experiment.seeds = 1,,2").is_err());
        assert!(RunConfig::parse("problem.delta_rel = -0.1").is_err());
        assert!(RunConfig::parse("stop.C = inf").is_err());
    }
}
