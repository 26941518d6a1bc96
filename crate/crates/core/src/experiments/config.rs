//! Experiment configuration as a `key = value` text file.
//!
//! ```text
//! # sparse source, Q-MAP weights, annealing
//! source = sparse-iid
//! p = 0.2
//! bits = 3
//! k = 0
//! n = 96
//! rates = 0.1, 0.3, 0.5, 0.7
//! trials = 50
//! weights = true-distribution
//! solver = anneal
//! restarts = 8
//! seed = 2024
//! ```
//!
//! Later assignments win, so command-line overrides are applied by feeding
//! extra `key=value` pairs through [`ExperimentConfig::set`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::quantization::QuantSpec;
use crate::solvers::AnnealSchedule;
use crate::sources::SourceModel;

/// Where the A-MEP weights come from, or L-MEP if none.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    /// Minimize conditional empirical entropy directly.
    Lmep,
    /// Weights from the empirical conditionals of the quantized input.
    EmpiricalInput,
    /// Q-MAP weights from the exact source law.
    TrueDistribution,
    /// A base scheme perturbed by `eps_w * b` in the sup norm, for each
    /// configured `eps_w`.
    Perturbed(Box<WeightScheme>),
    /// `-log q` conditionals from an external block table of order `k + 1`.
    Mismatched(PathBuf),
}

impl WeightScheme {
    pub fn name(&self) -> String {
        match self {
            Self::Lmep => "lmep".into(),
            Self::EmpiricalInput => "empirical-input".into(),
            Self::TrueDistribution => "true-distribution".into(),
            Self::Perturbed(base) => format!("perturbed({})", base.name()),
            Self::Mismatched(path) => format!("mismatched({})", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    Exhaustive,
    Anneal(AnnealSchedule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceModel,
    /// Explicit resolution; `None` follows `floor(r log2 log2 n)`.
    pub bits: Option<u32>,
    pub r: f64,
    pub delta: f64,
    pub k: usize,
    pub rates: Vec<f64>,
    pub eps_w: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub solver: SolverChoice,
    pub weight_scheme: WeightScheme,
    /// `None` follows `(log2 n)^(2r)`.
    pub lambda: Option<f64>,
    /// `None` uses `2^-b + 0.01`.
    pub threshold: Option<f64>,
    /// `None` uses the default weight cap for `(b, k)`.
    pub cap: Option<f64>,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: SourceModel::SparseIid {
                p: 0.2,
                lo: 0.0,
                hi: 1.0,
            },
            bits: None,
            r: 1.5,
            delta: 0.1,
            k: 0,
            rates: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            eps_w: vec![0.0],
            n: 96,
            trials: 20,
            solver: SolverChoice::Anneal(AnnealSchedule::default()),
            weight_scheme: WeightScheme::TrueDistribution,
            lambda: None,
            threshold: None,
            cap: None,
            master_seed: 1,
        }
    }
}

/// Raw `key -> value` assignments, kept so that source and solver settings
/// can be assembled once every override has been seen.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    entries: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "source",
    "p",
    "lo",
    "hi",
    "states",
    "transition",
    "bits",
    "r",
    "delta",
    "k",
    "rates",
    "eps_w",
    "n",
    "trials",
    "solver",
    "restarts",
    "proposals",
    "t_start",
    "t_end",
    "weights",
    "perturb_base",
    "q_file",
    "lambda",
    "threshold",
    "cap",
    "seed",
];

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut builder = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            builder
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
        }
        Ok(builder)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<&mut Self> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.entries.insert(key, value.to_string());
        Ok(self)
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<&mut Self> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {pair:?} is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("cannot parse {key} = {v:?}")))
            })
            .transpose()
    }

    fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.entries
            .get(key)
            .map(|v| parse_list(key, v))
            .transpose()
    }

    pub fn build(&self) -> Result<ExperimentConfig> {
        let defaults = ExperimentConfig::default();
        let source = match self.entries.get("source").map(String::as_str) {
            None | Some("sparse-iid") => SourceModel::sparse_iid(
                self.get("p")?.unwrap_or(0.2),
                self.get("lo")?.unwrap_or(0.0),
                self.get("hi")?.unwrap_or(1.0),
            )?,
            Some("markov") => {
                let states = self
                    .get_list("states")?
                    .ok_or_else(|| Error::Config("markov source needs states".into()))?;
                let transition = self
                    .entries
                    .get("transition")
                    .ok_or_else(|| Error::Config("markov source needs transition".into()))?
                    .split(';')
                    .map(|row| parse_list("transition", row))
                    .collect::<Result<Vec<_>>>()?;
                SourceModel::markov(states, transition)?
            }
            Some(other) => return Err(Error::Config(format!("unknown source {other:?}"))),
        };

        let mut schedule = AnnealSchedule::default();
        if let Some(v) = self.get("restarts")? {
            schedule.restarts = v;
        }
        if let Some(v) = self.get("proposals")? {
            schedule.proposals = Some(v);
        }
        if let Some(v) = self.get("t_start")? {
            schedule.t_start = v;
        }
        if let Some(v) = self.get("t_end")? {
            schedule.t_end = v;
        }
        let solver = match self.entries.get("solver").map(String::as_str) {
            None | Some("anneal") => SolverChoice::Anneal(schedule),
            Some("exhaustive") => SolverChoice::Exhaustive,
            Some(other) => return Err(Error::Config(format!("unknown solver {other:?}"))),
        };

        let simple = |name: &str| -> Result<WeightScheme> {
            match name {
                "lmep" => Ok(WeightScheme::Lmep),
                "empirical-input" => Ok(WeightScheme::EmpiricalInput),
                "true-distribution" | "qmap" => Ok(WeightScheme::TrueDistribution),
                "mismatched" => self
                    .entries
                    .get("q_file")
                    .map(|p| WeightScheme::Mismatched(PathBuf::from(p)))
                    .ok_or_else(|| Error::Config("mismatched weights need q_file".into())),
                other => Err(Error::Config(format!("unknown weight scheme {other:?}"))),
            }
        };
        let weight_scheme = match self.entries.get("weights").map(String::as_str) {
            None => defaults.weight_scheme,
            Some("perturbed") => {
                let base = self
                    .entries
                    .get("perturb_base")
                    .map(String::as_str)
                    .unwrap_or("true-distribution");
                let base = simple(base)?;
                if base == WeightScheme::Lmep {
                    return Err(Error::Config("cannot perturb L-MEP".into()));
                }
                WeightScheme::Perturbed(Box::new(base))
            }
            Some(name) => simple(name)?,
        };

        let cfg = ExperimentConfig {
            source,
            bits: self.get("bits")?,
            r: self.get("r")?.unwrap_or(defaults.r),
            delta: self.get("delta")?.unwrap_or(defaults.delta),
            k: self.get("k")?.unwrap_or(defaults.k),
            rates: self.get_list("rates")?.unwrap_or(defaults.rates),
            eps_w: self.get_list("eps_w")?.unwrap_or(defaults.eps_w),
            n: self.get("n")?.unwrap_or(defaults.n),
            trials: self.get("trials")?.unwrap_or(defaults.trials),
            solver,
            weight_scheme,
            lambda: self.get("lambda")?,
            threshold: self.get("threshold")?,
            cap: self.get("cap")?,
            master_seed: self.get("seed")?.unwrap_or(defaults.master_seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_list(key: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse {key} entry {t:?}")))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(Error::Config("at least one rate is required".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::Config(format!("rate {r} outside (0, 1]")));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.eps_w.is_empty() || self.eps_w.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::Config(
                "eps_w must be a list of nonnegative numbers".into(),
            ));
        }
        if !matches!(self.weight_scheme, WeightScheme::Perturbed(_))
            && self.eps_w.iter().any(|&e| e != 0.0)
        {
            return Err(Error::Config(
                "nonzero eps_w requires weights = perturbed".into(),
            ));
        }
        if self.n < self.k + 2 {
            return Err(Error::Config(format!(
                "n = {} is too short for k = {}",
                self.n, self.k
            )));
        }
        if !(self.r > 0.0 && self.r.is_finite()) || !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(
                "r must be positive and delta nonnegative".into(),
            ));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda must be positive, got {l}")));
            }
        }
        self.quant_spec()?;
        Ok(())
    }

    /// `b` if given, else `max(1, floor(r log2 log2 n))`.
    pub fn resolved_bits(&self) -> u32 {
        self.bits.unwrap_or_else(|| {
            let lln = (self.n.max(3) as f64).log2().log2();
            ((self.r * lln).floor() as u32).max(1)
        })
    }

    /// `lambda` if given, else `(log2 n)^(2r)`.
    pub fn resolved_lambda(&self) -> f64 {
        self.lambda
            .unwrap_or_else(|| (self.n.max(2) as f64).log2().powf(2.0 * self.r))
    }

    pub fn resolved_threshold(&self) -> f64 {
        self.threshold
            .unwrap_or_else(|| 2f64.powi(-(self.resolved_bits() as i32)) + 0.01)
    }

    pub fn quant_spec(&self) -> Result<QuantSpec> {
        self.source.quant_spec(self.resolved_bits())
    }

    /// `m = max(1, round(rate * n))`.
    pub fn measurements(&self, rate: f64) -> usize {
        ((rate * self.n as f64).round() as usize).max(1)
    }

    /// Round-trippable text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        match &self.source {
            SourceModel::SparseIid { p, lo, hi } => {
                let _ = writeln!(out, "source = sparse-iid\np = {p}\nlo = {lo}\nhi = {hi}");
            }
            SourceModel::FiniteMarkov(chain) => {
                let rows: Vec<String> = chain.transition().iter().map(|r| join(r)).collect();
                let _ = writeln!(
                    out,
                    "source = markov\nstates = {}\ntransition = {}",
                    join(chain.states()),
                    rows.join("; ")
                );
            }
        }
        if let Some(b) = self.bits {
            let _ = writeln!(out, "bits = {b}");
        }
        let _ = writeln!(
            out,
            "r = {}\ndelta = {}\nk = {}",
            self.r, self.delta, self.k
        );
        let _ = writeln!(
            out,
            "rates = {}\neps_w = {}",
            join(&self.rates),
            join(&self.eps_w)
        );
        let _ = writeln!(out, "n = {}\ntrials = {}", self.n, self.trials);
        match &self.solver {
            SolverChoice::Exhaustive => {
                let _ = writeln!(out, "solver = exhaustive");
            }
            SolverChoice::Anneal(s) => {
                let _ = writeln!(
                    out,
                    "solver = anneal\nrestarts = {}\nt_start = {}\nt_end = {}",
                    s.restarts, s.t_start, s.t_end
                );
                if let Some(p) = s.proposals {
                    let _ = writeln!(out, "proposals = {p}");
                }
            }
        }
        let scheme_line = |scheme: &WeightScheme| match scheme {
            WeightScheme::Mismatched(path) => {
                format!("mismatched\nq_file = {}", path.display())
            }
            other => other.name(),
        };
        match &self.weight_scheme {
            WeightScheme::Perturbed(base) => {
                let _ = writeln!(
                    out,
                    "weights = perturbed\nperturb_base = {}",
                    scheme_line(base)
                );
            }
            other => {
                let _ = writeln!(out, "weights = {}", scheme_line(other));
            }
        }
        for (key, value) in [
            ("lambda", self.lambda),
            ("threshold", self.threshold),
            ("cap", self.cap),
        ] {
            if let Some(v) = value {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        let _ = writeln!(out, "seed = {}", self.master_seed);
        out
    }
}
