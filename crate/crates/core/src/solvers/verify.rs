//! Exhaustive checks of the finite-n statements relating L-MEP and A-MEP:
//! minimizer equivalence under self-consistent weights, and the sandwich
//! bound for objectives with nearby weights.

use std::fmt;

use rand::Rng;

use crate::empirical::empirical_distribution_of_symbols;
use crate::error::{Error, Result};
use crate::quantization::{quantize_sequence, QuantSpec, QuantizedSequence};
use crate::seeding::{self, derive_seed};
use crate::sensing::{generate_matrix, measure, SensingSystem};
use crate::sources::{sample_source, SourceModel};
use crate::weights::{default_cap, weights_from_empirical, WeightVector};

use super::{solve_exhaustive, CostSpec, Objective, RecoveryResult};

/// Tolerance for comparing two L-MEP costs that are equal in exact arithmetic.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-10;

/// A small noiseless recovery problem: `y = A x` with `x` drawn from a
/// sparse mixture on `[0, 1)`.
#[derive(Debug, Clone)]
pub struct VerificationInstance {
    pub x: Vec<f64>,
    pub quant: QuantSpec,
    pub k: usize,
    pub sensing: SensingSystem,
    pub y: Vec<f64>,
}

impl VerificationInstance {
    pub fn new(x: Vec<f64>, quant: QuantSpec, k: usize, sensing: SensingSystem) -> Result<Self> {
        let y = sensing.measure(&x)?;
        Ok(Self {
            x,
            quant,
            k,
            sensing,
            y,
        })
    }

    /// Seeded instance with `x ~ 0.5 delta_0 + 0.5 Unif[0, 1)` and
    /// `lambda` log-uniform on `[1, 64]`.
    pub fn random(seed: u64, n: usize, m: usize, k: usize, bits: u32) -> Result<Self> {
        let quant = QuantSpec::half_open(bits, 0.0, 1.0)?;
        let model = SourceModel::sparse_iid(0.5, 0.0, 1.0)?;
        let x = sample_source(&model, n, derive_seed(seed, &[1]))?;
        let matrix_seed = derive_seed(seed, &[2]);
        let a = generate_matrix(m, n, matrix_seed)?;
        let mut rng = seeding::stream(derive_seed(seed, &[3]));
        let lambda = 2f64.powf(rng.random_range(0.0..6.0));
        let y = measure(&a, &x)?;
        Ok(Self {
            x,
            quant,
            k,
            sensing: SensingSystem::from_matrix(a, matrix_seed, lambda)?,
            y,
        })
    }

    pub fn spec(&self, objective: Objective) -> Result<CostSpec> {
        CostSpec::new(
            objective,
            self.k,
            self.sensing.clone(),
            self.y.clone(),
            self.quant,
        )
    }

    pub fn quantized_input(&self) -> Result<QuantizedSequence> {
        quantize_sequence(&self.x, &self.quant)
    }

    /// Self-consistent weights taken from the empirical law of `u`.
    pub fn weights_at(&self, u: &QuantizedSequence) -> Result<WeightVector> {
        let alphabet = self.quant.alphabet()?;
        let d = empirical_distribution_of_symbols(&u.symbols(&alphabet)?, &alphabet, self.k + 1)?;
        weights_from_empirical(&d, default_cap(self.quant.bits(), self.k))
    }
}

/// With weights from the quantized input `[x]_b`, the A-MEP minimizer must
/// satisfy `Lmep(xhat) <= Amep(xhat) <= Lmep([x]_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputWeightCheck {
    pub passed: bool,
    pub lmep_at_xhat: f64,
    pub amep_at_xhat: f64,
    pub lmep_at_input: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub passed: bool,
    pub lmep: RecoveryResult,
    pub amep: RecoveryResult,
    /// L-MEP cost of the A-MEP minimizer.
    pub lmep_cost_of_amep: f64,
    pub input_weights: InputWeightCheck,
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "minimizer equivalence: {}",
            if self.passed { "pass" } else { "FAIL" }
        )?;
        writeln!(
            f,
            "  L-MEP minimizer {:?} cost {:.17e}",
            self.lmep.xhat.values(),
            self.lmep.cost
        )?;
        writeln!(
            f,
            "  A-MEP minimizer {:?} L-MEP cost {:.17e}",
            self.amep.xhat.values(),
            self.lmep_cost_of_amep
        )?;
        write!(
            f,
            "  input weights: Lmep(xhat) {:.17e} <= Amep(xhat) {:.17e} <= Lmep([x]_b) {:.17e}",
            self.input_weights.lmep_at_xhat,
            self.input_weights.amep_at_xhat,
            self.input_weights.lmep_at_input
        )
    }
}

/// Solves L-MEP exhaustively, builds weights from the minimizer's empirical
/// law, solves the resulting A-MEP exhaustively and checks that its minimizer
/// attains the L-MEP optimum. Also runs the same protocol with weights from
/// the quantized input.
pub fn check_minimizer_equivalence(inst: &VerificationInstance) -> Result<EquivalenceReport> {
    let lmep_spec = inst.spec(Objective::Lmep)?;
    let lmep = solve_exhaustive(&lmep_spec)?;

    let w = inst.weights_at(&lmep.xhat)?;
    let amep_spec = inst.spec(Objective::Amep(w))?;
    let amep = solve_exhaustive(&amep_spec)?;
    let lmep_cost_of_amep = lmep_spec.evaluate(&amep.xhat)?.total;
    let equal = (lmep_cost_of_amep - lmep.cost).abs() <= EQUIVALENCE_TOLERANCE;

    let input = inst.quantized_input()?;
    let w_input = inst.weights_at(&input)?;
    let input_spec = inst.spec(Objective::Amep(w_input))?;
    let xhat = solve_exhaustive(&input_spec)?;
    let lmep_at_xhat = lmep_spec.evaluate(&xhat.xhat)?.total;
    let lmep_at_input = lmep_spec.evaluate(&input)?.total;
    let input_weights = InputWeightCheck {
        passed: lmep_at_xhat <= xhat.cost + EQUIVALENCE_TOLERANCE
            && xhat.cost <= lmep_at_input + EQUIVALENCE_TOLERANCE,
        lmep_at_xhat,
        amep_at_xhat: xhat.cost,
        lmep_at_input,
    };

    Ok(EquivalenceReport {
        passed: equal && input_weights.passed,
        lmep,
        amep,
        lmep_cost_of_amep,
        input_weights,
    })
}

/// `f` uses weights `w`, `f_hat` uses `w_hat`; `xhat = argmin f` and
/// `xtilde = argmin f_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub passed: bool,
    pub eps: f64,
    pub f_at_xhat: f64,
    pub f_at_xtilde: f64,
    pub xhat: QuantizedSequence,
    pub xtilde: QuantizedSequence,
}

impl fmt::Display for SandwichReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sandwich (eps {}): {} -- f(xhat) {:.17e} <= f(xtilde) {:.17e} <= f(xhat) + 2 eps; xhat {:?}, xtilde {:?}",
            self.eps,
            if self.passed { "pass" } else { "FAIL" },
            self.f_at_xhat,
            self.f_at_xtilde,
            self.xhat.values(),
            self.xtilde.values()
        )
    }
}

/// Checks `f(xhat) <= f(xtilde) <= f(xhat) + 2 eps` for weights with
/// `max |w - w_hat| <= eps`.
pub fn check_sandwich_lemma(
    inst: &VerificationInstance,
    w: &WeightVector,
    w_hat: &WeightVector,
    eps: f64,
) -> Result<SandwichReport> {
    if w.order() != w_hat.order() || w.alphabet() != w_hat.alphabet() {
        return Err(Error::Shape(
            "weight vectors are indexed by different blocks".into(),
        ));
    }
    let gap = w
        .weights()
        .iter()
        .zip(w_hat.weights())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if gap > eps {
        return Err(Error::InvalidInput(format!(
            "weights differ by {gap}, more than eps = {eps}"
        )));
    }
    let f = inst.spec(Objective::Amep(w.clone()))?;
    let f_hat = inst.spec(Objective::Amep(w_hat.clone()))?;
    let xhat = solve_exhaustive(&f)?;
    let xtilde = solve_exhaustive(&f_hat)?;
    let f_at_xtilde = f.evaluate_symbols(&xtilde.symbols)?.total;
    Ok(SandwichReport {
        passed: xhat.cost <= f_at_xtilde && f_at_xtilde <= xhat.cost + 2.0 * eps,
        eps,
        f_at_xhat: xhat.cost,
        f_at_xtilde,
        xhat: xhat.xhat,
        xtilde: xtilde.xhat,
    })
}
