//! Monte Carlo recovery sweeps over sampling rate and weight perturbation.
//!
//! Trial `t` at rate `rho` uses the seed `s = derive_seed(master, [bits(rho), t])`
//! and four sub-streams of it: `[1]` source sample, `[2]` sensing matrix,
//! `[3]` weight perturbation and `[4]` solver. None of them depend on
//! `eps_w`, so every perturbation level sees the same signals and matrices,
//! and the `eps_w = 0` column reproduces the unperturbed sweep exactly.

use std::time::Instant;

use rayon::prelude::*;

use crate::empirical::{empirical_distribution, TrueBlockDistribution};
use crate::error::{Error, Result};
use crate::quantization::{quantize_sequence, QuantSpec, QuantizedSequence};
use crate::seeding::derive_seed;
use crate::sensing::SensingSystem;
use crate::solvers::{
    normalized_error, solve_anneal, solve_exhaustive, CostSpec, Objective, RecoveryResult,
};
use crate::sources::{quantized_conditional_entropy, sample_source, true_block_distribution};
use crate::tables::parse_block_table;
use crate::weights::{
    default_cap, perturb_weights, weights_from_distribution, weights_from_empirical, WeightVector,
};

use super::config::{ExperimentConfig, SolverChoice, WeightScheme};
use super::report::{CellSummary, SweepReport, SweepRow, ThresholdRow};

/// Success fraction that defines the threshold rate of a curve.
pub const THRESHOLD_SUCCESS: f64 = 0.9;

/// Seed of trial `trial` at `rate`.
pub fn trial_seed(master: u64, rate: f64, trial: usize) -> u64 {
    derive_seed(master, &[rate.to_bits(), trial as u64])
}

/// Everything about one trial that a report row does not keep.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub row: SweepRow,
    pub m: usize,
    pub result: RecoveryResult,
    pub runtime_ms: f64,
}

/// Weight sets that do not depend on the trial.
struct SharedWeights {
    truth: Option<WeightVector>,
    mismatched: Option<WeightVector>,
}

/// Per-sweep constants shared by all trials.
pub struct Harness<'a> {
    cfg: &'a ExperimentConfig,
    quant: QuantSpec,
    lambda: f64,
    threshold: f64,
    cap: f64,
    shared: SharedWeights,
}

fn needs(scheme: &WeightScheme, target: fn(&WeightScheme) -> bool) -> bool {
    match scheme {
        WeightScheme::Perturbed(base) => needs(base, target),
        other => target(other),
    }
}

/// Reads a block probability table and normalizes it into a block law.
pub fn load_block_law(
    path: &std::path::Path,
    quant: &QuantSpec,
    order: usize,
) -> Result<TrueBlockDistribution> {
    let alphabet = quant.alphabet()?;
    let text = std::fs::read_to_string(path)?;
    let probs = parse_block_table(&text, &alphabet, order, 0.0)?;
    if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "{}: block probabilities must be nonnegative",
            path.display()
        )));
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "{}: table has no mass",
            path.display()
        )));
    }
    TrueBlockDistribution::new(order, alphabet, probs.iter().map(|p| p / total).collect())
}

impl<'a> Harness<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let quant = cfg.quant_spec()?;
        let cap = cfg.cap.unwrap_or_else(|| default_cap(quant.bits(), cfg.k));
        let truth = if needs(&cfg.weight_scheme, |s| *s == WeightScheme::TrueDistribution) {
            let law = true_block_distribution(&cfg.source, &quant, cfg.k + 1)?;
            Some(weights_from_distribution(&law, cap)?)
        } else {
            None
        };
        let mismatched = match &cfg.weight_scheme {
            WeightScheme::Mismatched(path) => Some(path),
            WeightScheme::Perturbed(base) => match base.as_ref() {
                WeightScheme::Mismatched(path) => Some(path),
                _ => None,
            },
            _ => None,
        }
        .map(|path| weights_from_distribution(&load_block_law(path, &quant, cfg.k + 1)?, cap))
        .transpose()?;
        Ok(Self {
            cfg,
            quant,
            lambda: cfg.resolved_lambda(),
            threshold: cfg.resolved_threshold(),
            cap,
            shared: SharedWeights { truth, mismatched },
        })
    }

    pub fn quant(&self) -> &QuantSpec {
        &self.quant
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn base_weights(
        &self,
        scheme: &WeightScheme,
        xq: Option<&QuantizedSequence>,
    ) -> Result<Option<WeightVector>> {
        Ok(match scheme {
            WeightScheme::Lmep => None,
            WeightScheme::EmpiricalInput => {
                let xq = xq.ok_or_else(|| {
                    Error::Config("empirical-input weights need the input signal".into())
                })?;
                Some(weights_from_empirical(
                    &empirical_distribution(xq, self.cfg.k + 1)?,
                    self.cap,
                )?)
            }
            WeightScheme::TrueDistribution => self.shared.truth.clone(),
            WeightScheme::Mismatched(_) => self.shared.mismatched.clone(),
            WeightScheme::Perturbed(base) => self.base_weights(base, xq)?,
        })
    }

    /// Weights of the configured scheme, perturbed by `eps_w` when the scheme
    /// asks for it; `None` means L-MEP.
    pub fn weights(
        &self,
        xq: Option<&QuantizedSequence>,
        eps_w: f64,
        perturb_seed: u64,
    ) -> Result<Option<WeightVector>> {
        let weights = self.base_weights(&self.cfg.weight_scheme, xq)?;
        match (&self.cfg.weight_scheme, weights) {
            (WeightScheme::Perturbed(_), Some(w)) if eps_w > 0.0 => Ok(Some(perturb_weights(
                &w,
                eps_w,
                self.quant.bits(),
                perturb_seed,
            )?)),
            (_, weights) => Ok(weights),
        }
    }

    /// Solves with the configured solver.
    pub fn solve(&self, spec: &CostSpec, seed: u64) -> Result<RecoveryResult> {
        match &self.cfg.solver {
            SolverChoice::Exhaustive => solve_exhaustive(spec),
            SolverChoice::Anneal(schedule) => solve_anneal(spec, schedule, seed),
        }
    }

    /// Runs one trial end to end.
    pub fn run_trial(&self, rate: f64, eps_w: f64, trial: usize) -> Result<TrialOutcome> {
        let seed = trial_seed(self.cfg.master_seed, rate, trial);
        self.run_seeded(rate, eps_w, seed)
            .map_err(|e| Error::Trial {
                rate,
                eps_w,
                seed,
                source: Box::new(e),
            })
    }

    fn run_seeded(&self, rate: f64, eps_w: f64, seed: u64) -> Result<TrialOutcome> {
        let start = Instant::now();
        let cfg = self.cfg;
        let x = sample_source(&cfg.source, cfg.n, derive_seed(seed, &[1]))?;
        let xq = quantize_sequence(&x, &self.quant)?;
        let m = cfg.measurements(rate);
        let sensing = SensingSystem::gaussian(m, cfg.n, derive_seed(seed, &[2]), self.lambda)?;
        let y = sensing.measure(&x)?;

        let weights = self.weights(Some(&xq), eps_w, derive_seed(seed, &[3]))?;
        let objective = match weights {
            None => Objective::Lmep,
            Some(w) => Objective::Amep(w),
        };
        let spec = CostSpec::new(objective, cfg.k, sensing, y, self.quant)?;
        let result = self.solve(&spec, derive_seed(seed, &[4]))?;
        let error = normalized_error(&x, result.xhat.values())?;
        Ok(TrialOutcome {
            row: SweepRow {
                rate,
                eps_w,
                seed,
                normalized_error: error,
                success: error < self.threshold,
                cost: result.cost,
            },
            m,
            result,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Every (rate, eps_w, trial) cell of the configuration, in parallel.
    pub fn run_all(&self) -> Result<Vec<TrialOutcome>> {
        let jobs: Vec<(f64, f64, usize)> = self
            .cfg
            .rates
            .iter()
            .flat_map(|&rate| {
                self.cfg
                    .eps_w
                    .iter()
                    .flat_map(move |&eps| (0..self.cfg.trials).map(move |t| (rate, eps, t)))
            })
            .collect();
        let mut outcomes = jobs
            .par_iter()
            .map(|&(rate, eps, t)| self.run_trial(rate, eps, t))
            .collect::<Result<Vec<_>>>()?;
        outcomes.sort_by(|a, b| a.row.order_key(&b.row));
        Ok(outcomes)
    }
}

fn summarize(outcomes: &[TrialOutcome]) -> Vec<CellSummary> {
    let mut cells: Vec<CellSummary> = Vec::new();
    for o in outcomes {
        let same = cells
            .last()
            .is_some_and(|c| c.rate == o.row.rate && c.eps_w == o.row.eps_w);
        if !same {
            cells.push(CellSummary {
                rate: o.row.rate,
                eps_w: o.row.eps_w,
                trials: 0,
                success_fraction: 0.0,
                mean_error: 0.0,
                mean_runtime_ms: 0.0,
            });
        }
        let c = cells.last_mut().expect("cell just pushed");
        c.trials += 1;
        c.success_fraction += o.row.success as u8 as f64;
        c.mean_error += o.row.normalized_error;
        c.mean_runtime_ms += o.runtime_ms;
    }
    for c in &mut cells {
        let t = c.trials as f64;
        c.success_fraction /= t;
        c.mean_error /= t;
        c.mean_runtime_ms /= t;
    }
    cells
}

fn report_from(outcomes: Vec<TrialOutcome>) -> SweepReport {
    let cells = summarize(&outcomes);
    SweepReport {
        rows: outcomes.into_iter().map(|o| o.row).collect(),
        cells,
        thresholds: Vec::new(),
    }
}

/// Success rate of every (rate, eps_w) cell; rows sorted by
/// `(rate, eps_w, seed)`.
pub fn run_recovery_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    Ok(report_from(Harness::new(cfg)?.run_all()?))
}

/// Smallest swept rate whose success fraction reaches `THRESHOLD_SUCCESS`
/// for the given `eps_w`.
pub fn threshold_rate(cells: &[CellSummary], eps_w: f64) -> Option<f64> {
    cells
        .iter()
        .filter(|c| c.eps_w == eps_w && c.success_fraction >= THRESHOLD_SUCCESS)
        .map(|c| c.rate)
        .min_by(f64::total_cmp)
}

/// Recovery sweep over the `(rate, eps_w)` grid plus, per `eps_w`, the
/// measured threshold rate against two references: the unperturbed
/// threshold plus `3 eps_w`, and `(1 + delta)(H([X]_b | context) / b + 3 eps_w)`.
pub fn run_robustness_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    if !matches!(
        cfg.weight_scheme,
        WeightScheme::Perturbed(_) | WeightScheme::Mismatched(_)
    ) {
        return Err(Error::Config(
            "robustness sweeps need weights = perturbed or mismatched".into(),
        ));
    }
    let harness = Harness::new(cfg)?;
    let mut report = report_from(harness.run_all()?);
    let entropy_rate = quantized_conditional_entropy(&cfg.source, harness.quant(), cfg.k)?
        / harness.quant().bits() as f64;
    let base = threshold_rate(&report.cells, 0.0);
    let mut eps_values = cfg.eps_w.clone();
    eps_values.sort_by(f64::total_cmp);
    eps_values.dedup();
    report.thresholds = eps_values
        .into_iter()
        .map(|eps| ThresholdRow {
            eps_w: eps,
            rate: threshold_rate(&report.cells, eps),
            budget: base.map(|b| b + 3.0 * eps),
            predicted: (1.0 + cfg.delta) * (entropy_rate + 3.0 * eps),
        })
        .collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::ConfigBuilder;

    fn cfg(text: &str) -> ExperimentConfig {
        ConfigBuilder::parse(text).unwrap().build().unwrap()
    }

    #[test]
    fn full_rate_exhaustive_recovers_grid_source() {
        // a two-state chain on {0, 0.5} is grid-valued at b = 1
        let c = cfg(
            "source = markov\nstates = 0, 0.5\ntransition = 0.8, 0.2; 0.3, 0.7\n\
                     bits = 1\nk = 1\nn = 10\nrates = 1.0\ntrials = 5\nsolver = exhaustive\n\
                     weights = lmep\nlambda = 1000",
        );
        let report = run_recovery_sweep(&c).unwrap();
        assert_eq!(report.rows.len(), 5);
        assert!(report
            .rows
            .iter()
            .all(|r| r.success && r.normalized_error == 0.0));
        assert_eq!(report.cells[0].success_fraction, 1.0);
    }

    #[test]
    fn sweeps_are_deterministic_and_sorted() {
        let c = cfg(
            "n = 24\nbits = 2\nrates = 0.5, 0.25\ntrials = 3\nrestarts = 1\n\
                     proposals = 200\nweights = empirical-input\nseed = 9",
        );
        let a = run_recovery_sweep(&c).unwrap();
        let b = run_recovery_sweep(&c).unwrap();
        assert_eq!(a.rows, b.rows);
        assert!(a.rows.windows(2).all(|w| w[0].rate <= w[1].rate));
        assert_eq!(a.rows[0].rate, 0.25);
        assert_eq!(a.cells.len(), 2);
    }

    #[test]
    fn zero_perturbation_reproduces_unperturbed_rows() {
        let base =
            "n = 20\nbits = 2\nrates = 0.6\ntrials = 3\nrestarts = 1\nproposals = 300\nseed = 4\n";
        let plain =
            run_recovery_sweep(&cfg(&format!("{base}weights = true-distribution"))).unwrap();
        let perturbed =
            run_robustness_sweep(&cfg(&format!("{base}weights = perturbed\neps_w = 0, 0.2")))
                .unwrap();
        let zero: Vec<_> = perturbed
            .rows
            .iter()
            .filter(|r| r.eps_w == 0.0)
            .cloned()
            .collect();
        assert_eq!(zero, plain.rows);
        assert_eq!(perturbed.thresholds.len(), 2);
    }

    #[test]
    fn robustness_requires_perturbed_weights() {
        assert!(run_robustness_sweep(&cfg("weights = lmep")).is_err());
    }

    #[test]
    fn threshold_rate_picks_smallest_passing_rate() {
        let cell = |rate, frac| CellSummary {
            rate,
            eps_w: 0.0,
            trials: 10,
            success_fraction: frac,
            mean_error: 0.0,
            mean_runtime_ms: 0.0,
        };
        let cells = [
            cell(0.2, 0.1),
            cell(0.4, 0.95),
            cell(0.6, 0.85),
            cell(0.8, 1.0),
        ];
        assert_eq!(threshold_rate(&cells, 0.0), Some(0.4));
        assert_eq!(threshold_rate(&cells, 0.1), None);
    }

    #[test]
    fn mismatched_weights_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.tsv");
        // b = 1 alphabet on [0, 1) is {0, 0.5}
        std::fs::write(&path, "0\t0.7\n0.5\t0.3\n").unwrap();
        let c = cfg(&format!(
            "n = 12\nbits = 1\nrates = 0.5\ntrials = 2\nsolver = exhaustive\n\
             weights = mismatched\nq_file = {}",
            path.display()
        ));
        let report = run_robustness_sweep(&c).unwrap();
        assert_eq!(report.rows.len(), 2);
    }
}
