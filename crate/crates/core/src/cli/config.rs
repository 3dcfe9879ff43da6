//! Experiment configuration: a flat TOML table.
//!
//! ```toml
//! preset = "paper-eq27"          # or inline a/b/q/r, or problem_file
//! a = "1.01, 0.01, 0; 0.01, 1.01, 0.01; 0, 0.01, 1.01"
//! algorithm = "pi"               # vi | pi | inexact-vi | inexact-pi
//! init = "pstar*0.5"             # zero | identity*s | pstar*c | matrix
//! init_gain = "improve(pstar*2)" # zero | matrix | improve(<kernel>)
//! schedule = "geometric"         # exact | constant | geometric | floor | custom
//! rho = 0.01
//! gamma = 0.9
//! tol = 1e-12
//! max_iter = 1000
//! seed = 7
//! ```
//!
//! Matrices are row-major with `;` between rows and commas or whitespace
//! between entries. Plain numbers are accepted for 1x1 matrices.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::inexact::Schedule;
use crate::lqr::{gain_l, Gain, Kernel, LqrProblem};
use crate::matlin::{Mat, SymMat};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixValue {
    Number(f64),
    Text(String),
}

impl MatrixValue {
    pub fn to_mat(&self) -> Result<Mat, ConfigError> {
        match self {
            MatrixValue::Number(x) => Ok(Mat::scalar(*x)),
            MatrixValue::Text(s) => parse_matrix(s),
        }
    }
}

/// Parses `"1, 2; 3, 4"` (rows separated by `;`, optional surrounding
/// brackets).
pub fn parse_matrix(text: &str) -> Result<Mat, ConfigError> {
    let body = text.trim().trim_start_matches('[').trim_end_matches(']');
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for row in body.split(';') {
        let entries = row
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| ConfigError::Parse(format!("bad matrix entry {t:?} in {text:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(entries);
    }
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(ConfigError::Parse(format!("ragged or empty matrix {text:?}")));
    }
    let data = rows.concat();
    Mat::from_row_major(rows.len(), cols, &data).map_err(|e| ConfigError::Parse(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Vi,
    Pi,
    InexactVi,
    InexactPi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionMode {
    Identity,
    Random,
}

/// Raw file contents. Every key is optional; [`ExperimentConfig`] applies
/// defaults and validation.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub problem_file: Option<PathBuf>,
    pub a: Option<MatrixValue>,
    pub b: Option<MatrixValue>,
    pub q: Option<MatrixValue>,
    pub r: Option<MatrixValue>,
    pub algorithm: Option<Algorithm>,
    pub init: Option<String>,
    pub init_gain: Option<String>,
    pub schedule: Option<String>,
    pub rho: Option<f64>,
    pub gamma: Option<f64>,
    pub phi: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub perturbation: Option<DirectionMode>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub probe_directions: Option<usize>,
    pub radius_cap: Option<f64>,
    pub iss_rhos: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    a: MatrixValue,
    b: MatrixValue,
    q: MatrixValue,
    r: MatrixValue,
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut raw = Self::from_toml(&text)?;
        if let (Some(f), Some(dir)) = (&raw.problem_file, path.parent()) {
            if f.is_relative() {
                raw.problem_file = Some(dir.join(f));
            }
        }
        Ok(raw)
    }
}

pub const BENCHMARK_PRESET: &str = "paper-eq27";

/// The three-state benchmark plant with `Q = 0.001 I`, `R = I`.
pub fn benchmark_system() -> LqrProblem {
    let a = Mat::from_rows(&[[1.01, 0.01, 0.0], [0.01, 1.01, 0.01], [0.0, 0.01, 1.01]])
        .expect("3x3");
    LqrProblem::from_mats(
        a,
        Mat::identity(3),
        Mat::identity(3).scale(0.001),
        Mat::identity(3),
    )
    .expect("valid preset")
}

pub fn preset(name: &str) -> Result<LqrProblem, ConfigError> {
    match name {
        BENCHMARK_PRESET => Ok(benchmark_system()),
        _ => invalid(format!("unknown preset {name:?} (known: {BENCHMARK_PRESET})")),
    }
}

/// Kernel initialization expression.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelExpr {
    Zero,
    Identity(f64),
    PStar(f64),
    Matrix(Mat),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainExpr {
    Zero,
    Matrix(Mat),
    /// `-L(P)` for a kernel expression.
    Improve(KernelExpr),
}

fn scaled(text: &str, word: &str) -> Result<Option<f64>, ConfigError> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let coef = if t == word {
        Some("1")
    } else if let Some(c) = t.strip_prefix(&format!("{word}*")) {
        Some(c)
    } else {
        t.strip_suffix(&format!("*{word}"))
    };
    match coef {
        None => Ok(None),
        Some(c) => c
            .parse::<f64>()
            .map(Some)
            .map_err(|_| ConfigError::Parse(format!("bad coefficient in {text:?}"))),
    }
}

impl KernelExpr {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim() == "zero" {
            return Ok(KernelExpr::Zero);
        }
        if let Some(s) = scaled(text, "identity")? {
            return Ok(KernelExpr::Identity(s));
        }
        if let Some(c) = scaled(text, "pstar")? {
            return Ok(KernelExpr::PStar(c));
        }
        parse_matrix(text).map(KernelExpr::Matrix)
    }

    pub fn needs_pstar(&self) -> bool {
        matches!(self, KernelExpr::PStar(_))
    }

    pub fn resolve(&self, n: usize, p_star: Option<&Kernel>) -> Result<Kernel, ConfigError> {
        match self {
            KernelExpr::Zero => Ok(Kernel::zeros(n)),
            KernelExpr::Identity(s) => Ok(Kernel::new(SymMat::identity(n).scale(*s))),
            KernelExpr::PStar(c) => match p_star {
                Some(p) => Ok(p.scale(*c)),
                None => invalid("init refers to pstar but no optimal kernel is available"),
            },
            KernelExpr::Matrix(m) => {
                if m.shape() != (n, n) {
                    return invalid(format!("init kernel is {:?}, expected {n}x{n}", m.shape()));
                }
                SymMat::new(m.clone())
                    .map(Kernel::new)
                    .map_err(|e| ConfigError::Invalid(format!("init kernel: {e}")))
            }
        }
    }
}

impl GainExpr {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let t = text.trim();
        if t == "zero" {
            return Ok(GainExpr::Zero);
        }
        if let Some(inner) = t.strip_prefix("improve(").and_then(|s| s.strip_suffix(')')) {
            return KernelExpr::parse(inner).map(GainExpr::Improve);
        }
        parse_matrix(t).map(GainExpr::Matrix)
    }

    pub fn needs_pstar(&self) -> bool {
        matches!(self, GainExpr::Improve(k) if k.needs_pstar())
    }

    pub fn resolve(&self, prob: &LqrProblem, p_star: Option<&Kernel>) -> Result<Gain, ConfigError> {
        let (n, m) = (prob.n_states(), prob.n_inputs());
        match self {
            GainExpr::Zero => Ok(Gain::zeros(m, n)),
            GainExpr::Matrix(k) => {
                if k.shape() != (m, n) {
                    return invalid(format!("init gain is {:?}, expected {m}x{n}", k.shape()));
                }
                Ok(Gain::new(k.clone()))
            }
            GainExpr::Improve(expr) => {
                let p = expr.resolve(n, p_star)?;
                gain_l(prob, &p)
                    .map(|l| Gain::new(l.scale(-1.0)))
                    .map_err(|e| ConfigError::Invalid(format!("init gain: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Kernel(KernelExpr),
    Gain(GainExpr),
}

impl Init {
    pub fn needs_pstar(&self) -> bool {
        match self {
            Init::Kernel(k) => k.needs_pstar(),
            Init::Gain(g) => g.needs_pstar(),
        }
    }
}

pub const DEFAULT_PROBE_DIRECTIONS: usize = 100;
pub const DEFAULT_ISS_RHOS: [f64; 4] = [1e-4, 2e-4, 4e-4, 8e-4];

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: LqrProblem,
    pub algorithm: Algorithm,
    pub init: Init,
    pub schedule: Schedule,
    pub perturbation: DirectionMode,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub probe_directions: usize,
    pub radius_cap: Option<f64>,
    pub iss_rhos: Vec<f64>,
}

fn schedule_from(raw: &RawConfig) -> Result<Schedule, ConfigError> {
    let need = |v: Option<f64>, key: &str, kind: &str| {
        v.ok_or_else(|| ConfigError::Invalid(format!("schedule {kind:?} needs {key}")))
    };
    let kind = raw.schedule.as_deref().unwrap_or("exact");
    let s = match kind {
        "exact" => Schedule::Exact,
        "constant" | "constant-offset" => Schedule::ConstantOffset {
            rho: need(raw.rho, "rho", kind)?,
        },
        "geometric" | "geometric-vanishing" => Schedule::GeometricVanishing {
            rho: need(raw.rho, "rho", kind)?,
            gamma: need(raw.gamma, "gamma", kind)?,
        },
        "floor" | "geometric-plus-floor" => Schedule::GeometricPlusFloor {
            rho: need(raw.rho, "rho", kind)?,
            gamma: need(raw.gamma, "gamma", kind)?,
            phi: need(raw.phi, "phi", kind)?,
        },
        "custom" | "custom-list" => Schedule::Custom(
            raw.values
                .clone()
                .ok_or_else(|| ConfigError::Invalid("custom schedule needs values".into()))?,
        ),
        other => return invalid(format!("unknown schedule {other:?}")),
    };
    s.validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(s)
}

fn problem_from(raw: &RawConfig) -> Result<LqrProblem, ConfigError> {
    let inline = [&raw.a, &raw.b, &raw.q, &raw.r];
    let sources = raw.preset.is_some() as u8
        + raw.problem_file.is_some() as u8
        + inline.iter().any(|m| m.is_some()) as u8;
    if sources > 1 {
        return invalid("give exactly one of preset, problem_file, or inline a/b/q/r");
    }
    if let Some(name) = &raw.preset {
        return preset(name);
    }
    let (a, b, q, r) = if let Some(path) = &raw.problem_file {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.clone(),
            source,
        })?;
        let f: ProblemFile =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        (f.a, f.b, f.q, f.r)
    } else {
        match (&raw.a, &raw.b, &raw.q, &raw.r) {
            (Some(a), Some(b), Some(q), Some(r)) => (a.clone(), b.clone(), q.clone(), r.clone()),
            (None, None, None, None) => return invalid("no problem given"),
            _ => return invalid("inline problems need all of a, b, q, r"),
        }
    };
    LqrProblem::from_mats(a.to_mat()?, b.to_mat()?, q.to_mat()?, r.to_mat()?)
        .map_err(|e| ConfigError::Invalid(format!("problem: {e}")))
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let problem = problem_from(raw)?;
        let algorithm = raw.algorithm.unwrap_or(Algorithm::Vi);
        let init = match (&raw.init, &raw.init_gain) {
            (Some(_), Some(_)) => return invalid("give init or init_gain, not both"),
            (Some(k), None) => Init::Kernel(KernelExpr::parse(k)?),
            (None, Some(g)) => {
                if matches!(algorithm, Algorithm::Vi | Algorithm::InexactVi) {
                    return invalid("value iteration starts from a kernel, not init_gain");
                }
                Init::Gain(GainExpr::parse(g)?)
            }
            (None, None) => Init::Kernel(KernelExpr::Zero),
        };
        let schedule = schedule_from(raw)?;
        if matches!(algorithm, Algorithm::Vi | Algorithm::Pi) && schedule != Schedule::Exact {
            return invalid("schedules apply to inexact-vi and inexact-pi only");
        }
        let tol = raw.tol.unwrap_or(1e-12);
        let max_iter = raw.max_iter.unwrap_or(10_000);
        if !(tol > 0.0) || max_iter == 0 {
            return invalid("tol and max_iter must be positive");
        }
        let iss_rhos = raw.iss_rhos.clone().unwrap_or(DEFAULT_ISS_RHOS.to_vec());
        Ok(ExperimentConfig {
            problem,
            algorithm,
            init,
            schedule,
            perturbation: raw.perturbation.unwrap_or(DirectionMode::Identity),
            tol,
            max_iter,
            seed: raw.seed.unwrap_or(0),
            probe_directions: raw.probe_directions.unwrap_or(DEFAULT_PROBE_DIRECTIONS),
            radius_cap: raw.radius_cap,
            iss_rhos,
        })
    }
}
