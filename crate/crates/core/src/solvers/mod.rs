//! Recovery objectives and their minimization.
//!
//! Both objectives have the form `structure(u) + (lambda / n^2) ||A u - y||^2`
//! over sequences `u` on the quantization grid. For L-MEP the structure term
//! is the conditional empirical entropy of `u`; for A-MEP it is the linear
//! functional `sum_blocks w[block] * p_hat(block | u)`.
//!
//! Every cost is evaluated by one canonical routine over exact block counts,
//! so the exhaustive search, the annealer and the verifiers always agree on
//! the cost of a given sequence to the last bit.

mod anneal;
mod exhaustive;
mod verify;

pub use anneal::{solve_anneal, solve_anneal_from, AnnealSchedule};
pub use exhaustive::solve_exhaustive;
pub use verify::{
    check_minimizer_equivalence, check_sandwich_lemma, EquivalenceReport, InputWeightCheck,
    SandwichReport, VerificationInstance,
};

use crate::empirical::{entropy_from_counts, weighted_sum_from_counts};
use crate::error::{Error, Result};
use crate::quantization::{Alphabet, QuantSpec, QuantizedSequence};
use crate::sensing::{residual_into, SensingSystem};
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Conditional empirical entropy of order `k`.
    Lmep,
    /// Linear structure term with fixed weights of order `k + 1`.
    Amep(WeightVector),
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lmep => "lmep",
            Self::Amep(_) => "amep",
        }
    }
}

/// A fully specified recovery problem.
#[derive(Debug, Clone)]
pub struct CostSpec {
    objective: Objective,
    k: usize,
    sensing: SensingSystem,
    y: Vec<f64>,
    quant: QuantSpec,
    alphabet: Alphabet,
}

impl CostSpec {
    pub fn new(
        objective: Objective,
        k: usize,
        sensing: SensingSystem,
        y: Vec<f64>,
        quant: QuantSpec,
    ) -> Result<Self> {
        let alphabet = quant.alphabet()?;
        if y.len() != sensing.m() {
            return Err(Error::Shape(format!(
                "{} measurements for a matrix with {} rows",
                y.len(),
                sensing.m()
            )));
        }
        if sensing.n() < k + 2 {
            return Err(Error::InsufficientData {
                len: sensing.n(),
                order: k + 1,
            });
        }
        alphabet.block_count(k + 1)?;
        if let Objective::Amep(w) = &objective {
            if w.order() != k + 1 || w.alphabet() != &alphabet {
                return Err(Error::Shape(format!(
                    "weights of order {} over {} symbols do not match order {} over {} symbols",
                    w.order(),
                    w.alphabet().len(),
                    k + 1,
                    alphabet.len()
                )));
            }
        }
        Ok(Self {
            objective,
            k,
            sensing,
            y,
            quant,
            alphabet,
        })
    }

    pub fn lmep(k: usize, sensing: SensingSystem, y: Vec<f64>, quant: QuantSpec) -> Result<Self> {
        Self::new(Objective::Lmep, k, sensing, y, quant)
    }

    pub fn amep(
        weights: WeightVector,
        k: usize,
        sensing: SensingSystem,
        y: Vec<f64>,
        quant: QuantSpec,
    ) -> Result<Self> {
        Self::new(Objective::Amep(weights), k, sensing, y, quant)
    }

    /// Same problem with a different structure term.
    pub fn with_objective(&self, objective: Objective) -> Result<Self> {
        Self::new(
            objective,
            self.k,
            self.sensing.clone(),
            self.y.clone(),
            self.quant,
        )
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sensing(&self) -> &SensingSystem {
        &self.sensing
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn quant(&self) -> &QuantSpec {
        &self.quant
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n(&self) -> usize {
        self.sensing.n()
    }

    pub fn lambda(&self) -> f64 {
        self.sensing.lambda()
    }

    /// Number of order-(k+1) windows, `n - k - 1`.
    pub(crate) fn windows(&self) -> usize {
        self.n() - self.k - 1
    }

    /// `lambda / n^2`.
    pub(crate) fn residual_scale(&self) -> f64 {
        self.lambda() / (self.n() * self.n()) as f64
    }

    pub(crate) fn structure_from_counts(&self, counts: &[u64], ctx: &[u64]) -> f64 {
        let total = self.windows() as u64;
        match &self.objective {
            Objective::Lmep => entropy_from_counts(counts, ctx, total, self.alphabet.len()),
            Objective::Amep(w) => weighted_sum_from_counts(counts, total, w.weights()),
        }
    }

    pub(crate) fn residual_term_from(&self, residual: &[f64]) -> f64 {
        self.residual_scale() * residual.iter().map(|r| r * r).sum::<f64>()
    }

    /// Canonical cost of a symbol sequence.
    pub fn evaluate_symbols(&self, symbols: &[usize]) -> Result<CostBreakdown> {
        if symbols.len() != self.n() {
            return Err(Error::Shape(format!(
                "sequence has length {}, problem has n = {}",
                symbols.len(),
                self.n()
            )));
        }
        let q = self.alphabet.len();
        if let Some(&bad) = symbols.iter().find(|&&s| s >= q) {
            return Err(Error::InvalidInput(format!(
                "symbol index {bad} out of range"
            )));
        }
        let mut counts = vec![0u64; q.pow(self.k as u32 + 1)];
        let mut ctx = vec![0u64; q.pow(self.k as u32)];
        fill_counts(symbols, self.k, &self.alphabet, &mut counts, &mut ctx);
        let values: Vec<f64> = symbols.iter().map(|&s| self.alphabet.value(s)).collect();
        let mut residual = vec![0.0; self.sensing.m()];
        residual_into(self.sensing.matrix(), &values, &self.y, &mut residual);
        Ok(CostBreakdown::new(
            self.structure_from_counts(&counts, &ctx),
            self.residual_term_from(&residual),
        ))
    }

    /// Canonical cost of a quantized sequence on this problem's grid.
    pub fn evaluate(&self, u: &QuantizedSequence) -> Result<CostBreakdown> {
        self.evaluate_symbols(&u.symbols(&self.alphabet)?)
    }

    pub(crate) fn result_from_symbols(
        &self,
        symbols: &[usize],
        seed: u64,
        trace: Vec<TraceEntry>,
    ) -> Result<RecoveryResult> {
        let cost = self.evaluate_symbols(symbols)?;
        Ok(RecoveryResult {
            xhat: QuantizedSequence::from_symbols(symbols, &self.alphabet, self.quant),
            symbols: symbols.to_vec(),
            cost: cost.total,
            structure_term: cost.structure,
            residual_term: cost.residual,
            trace,
            seed,
        })
    }
}

/// Order-(k+1) window counts and their context counts.
pub(crate) fn fill_counts(
    symbols: &[usize],
    k: usize,
    alphabet: &Alphabet,
    counts: &mut [u64],
    ctx: &mut [u64],
) {
    counts.fill(0);
    ctx.fill(0);
    let q = alphabet.len();
    let n = symbols.len();
    for window in symbols[..n - 1].windows(k + 1) {
        let code = alphabet.encode_block(window);
        counts[code] += 1;
        ctx[code / q] += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub structure: f64,
    pub residual: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn new(structure: f64, residual: f64) -> Self {
        Self {
            structure,
            residual,
            total: structure + residual,
        }
    }
}

/// One accepted annealing move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub proposal: usize,
    pub coordinate: usize,
    pub value: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub xhat: QuantizedSequence,
    /// `xhat` as indices into the problem alphabet.
    pub symbols: Vec<usize>,
    pub cost: f64,
    pub structure_term: f64,
    pub residual_term: f64,
    pub trace: Vec<TraceEntry>,
    pub seed: u64,
}

/// `H_k(u) + (lambda / n^2) ||A u - y||^2`.
pub fn lmep_cost(u: &QuantizedSequence, spec: &CostSpec) -> Result<f64> {
    if !matches!(spec.objective, Objective::Lmep) {
        return Err(Error::InvalidInput(
            "cost spec is not an L-MEP problem".into(),
        ));
    }
    Ok(spec.evaluate(u)?.total)
}

/// `sum_blocks w * p_hat(block | u) + (lambda / n^2) ||A u - y||^2`.
pub fn amep_cost(u: &QuantizedSequence, spec: &CostSpec) -> Result<f64> {
    if !matches!(spec.objective, Objective::Amep(_)) {
        return Err(Error::InvalidInput(
            "cost spec is not an A-MEP problem".into(),
        ));
    }
    Ok(spec.evaluate(u)?.total)
}

/// `||x - xhat||_2 / sqrt(n)`.
pub fn normalized_error(x: &[f64], xhat: &[f64]) -> Result<f64> {
    if x.len() != xhat.len() {
        return Err(Error::Shape(format!(
            "lengths differ: {} vs {}",
            x.len(),
            xhat.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidInput("empty sequences".into()));
    }
    let ss: f64 = x.iter().zip(xhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / x.len() as f64).sqrt())
}
