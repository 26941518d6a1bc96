//! Randomized verification suites run by `qmep verify`.
//!
//! Each suite draws seeded cases, checks one exact or tolerance-bounded
//! statement on every case and records the first counterexample.

use std::fmt;

use rand::Rng;

use crate::empirical::{
    conditional_empirical_entropy, conditional_entropy, conditional_kl_decomposition,
    empirical_distribution_of_symbols, weighted_sum_from_counts, BlockLaw, TrueBlockDistribution,
};
use crate::error::Result;
use crate::quantization::{quantize_scalar, quantize_sequence, Alphabet, QuantSpec};
use crate::seeding::{self, derive_seed, StreamRng};
use crate::solvers::{check_minimizer_equivalence, check_sandwich_lemma, VerificationInstance};
use crate::weights::{perturb_weights, weights_from_distribution, weights_from_empirical};

/// Slack allowed in the first-order concavity bound.
pub const CONCAVITY_TOLERANCE: f64 = 1e-9;
/// Tolerance of the cross-entropy decomposition.
pub const KL_IDENTITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} {} ({}/{} cases passed)",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.cases - self.failures,
            self.cases
        )?;
        if let Some(detail) = &self.first_failure {
            write!(f, "\n  first counterexample: {detail}")?;
        }
        Ok(())
    }
}

/// The small exhaustive instance family: `n = 6`, binary grid, `k = 1`,
/// `m` alternating between 2 and 4.
pub fn small_instance(seed: u64, index: usize) -> Result<VerificationInstance> {
    let m = if index.is_multiple_of(2) { 2 } else { 4 };
    VerificationInstance::random(derive_seed(seed, &[index as u64]), 6, m, 1, 1)
}

pub fn minimizer_equivalence_suite(count: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("minimizer-equivalence");
    for i in 0..count {
        let report = check_minimizer_equivalence(&small_instance(seed, i)?)?;
        out.record(report.passed, || format!("instance {i}: {report}"));
    }
    Ok(out)
}

pub fn sandwich_suite(count: usize, eps: f64, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("sandwich");
    for i in 0..count {
        let inst = small_instance(seed, i)?;
        let w = inst.weights_at(&inst.quantized_input()?)?;
        let bits = inst.quant.bits();
        // perturb_weights bounds the change by eps_w * b
        let w_hat = perturb_weights(
            &w,
            eps / bits as f64,
            bits,
            derive_seed(seed, &[i as u64, 1]),
        )?;
        let report = check_sandwich_lemma(&inst, &w, &w_hat, eps)?;
        out.record(report.passed, || format!("instance {i}: {report}"));
    }
    Ok(out)
}

/// Random block law with roughly one in five blocks forced to zero.
pub fn random_law(
    rng: &mut StreamRng,
    alphabet: &Alphabet,
    order: usize,
) -> Result<TrueBlockDistribution> {
    let blocks = alphabet.len().pow(order as u32);
    let mut p: Vec<f64> = (0..blocks)
        .map(|_| {
            if rng.random::<f64>() < 0.2 {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    if p.iter().all(|&v| v == 0.0) {
        p[rng.random_range(0..blocks)] = 1.0;
    }
    let total: f64 = p.iter().sum();
    TrueBlockDistribution::new(
        order,
        alphabet.clone(),
        p.iter().map(|v| v / total).collect(),
    )
}

fn random_alphabet(rng: &mut StreamRng) -> Alphabet {
    let q = rng.random_range(2..=3usize);
    Alphabet::new((0..q).map(|i| i as f64).collect()).expect("distinct values")
}

/// `H(q) <= H(p) + <w_p, q - p>` for conditional entropy of block laws.
pub fn concavity_suite(count: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("concavity");
    let mut rng = seeding::stream(derive_seed(seed, &[3]));
    for i in 0..count {
        let alphabet = random_alphabet(&mut rng);
        let order = rng.random_range(1..=3usize);
        let p = random_law(&mut rng, &alphabet, order)?;
        let q = random_law(&mut rng, &alphabet, order)?;
        let w = weights_from_distribution(&p, 64.0)?;
        let linear: f64 = (0..p.num_blocks())
            .map(|c| w.weight(c) * (q.prob(c) - p.prob(c)))
            .sum();
        let (hp, hq) = (conditional_entropy(&p), conditional_entropy(&q));
        out.record(hq <= hp + linear + CONCAVITY_TOLERANCE, || {
            format!("case {i}: H(q) = {hq}, H(p) + <w, q - p> = {}", hp + linear)
        });
    }
    Ok(out)
}

/// `sum q2 * -log q1(last | context) = H(q2) + conditional KL(q2 || q1)`.
pub fn kl_identity_suite(count: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("kl-decomposition");
    let mut rng = seeding::stream(derive_seed(seed, &[4]));
    for i in 0..count {
        let alphabet = random_alphabet(&mut rng);
        let order = rng.random_range(1..=3usize);
        let q2 = random_law(&mut rng, &alphabet, order)?;
        // full support keeps the cross entropy finite
        let blocks = alphabet.len().pow(order as u32);
        let raw: Vec<f64> = (0..blocks).map(|_| 0.05 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let q1 = TrueBlockDistribution::new(
            order,
            alphabet.clone(),
            raw.iter().map(|v| v / total).collect(),
        )?;
        let ctx1 = q1.context_probs();
        let qn = alphabet.len();
        let cross: f64 = (0..blocks)
            .filter(|&c| q2.prob(c) > 0.0)
            .map(|c| -q2.prob(c) * (q1.prob(c) / ctx1[c / qn]).log2())
            .sum();
        let split = conditional_kl_decomposition(&q2, &q1)?;
        let rhs = conditional_entropy(&q2) + split.conditional_kl;
        out.record((cross - rhs).abs() <= KL_IDENTITY_TOLERANCE, || {
            format!("case {i}: cross entropy {cross} vs {rhs}")
        });
    }
    Ok(out)
}

/// `sum p_hat * w(p_hat) = H_k(p_hat)` bit for bit.
pub fn entropy_identity_suite(count: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("entropy-identity");
    let mut rng = seeding::stream(derive_seed(seed, &[5]));
    for i in 0..count {
        let q = rng.random_range(2..=4usize);
        let alphabet = Alphabet::new((0..q).map(|v| v as f64).collect()).expect("distinct");
        let order = rng.random_range(1..=3usize);
        let len = rng.random_range(order + 1..=200);
        let symbols: Vec<usize> = (0..len).map(|_| rng.random_range(0..q)).collect();
        let d = empirical_distribution_of_symbols(&symbols, &alphabet, order)?;
        let w = weights_from_empirical(&d, 64.0)?;
        let lhs = weighted_sum_from_counts(d.counts(), d.total(), w.weights());
        let h = conditional_empirical_entropy(&d);
        out.record(lhs == h, || format!("case {i}: {lhs} != {h}"));
    }
    Ok(out)
}

/// Resolution, idempotence, monotonicity and the sequence norm bound of
/// `[x]_b`.
pub fn quantization_suite(count: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("quantization");
    let mut rng = seeding::stream(derive_seed(seed, &[6]));
    for i in 0..count {
        let b = rng.random_range(1..=24u32);
        let step = 2f64.powi(-(b as i32));
        let x = rng.random_range(-8.0..8.0);
        let x2 = rng.random_range(-8.0..8.0);
        let qx = quantize_scalar(x, b)?;
        let gap = x - qx;
        let idempotent = quantize_scalar(qx, b)? == qx;
        let (lo, hi) = if x <= x2 { (x, x2) } else { (x2, x) };
        let monotone = quantize_scalar(lo, b)? <= quantize_scalar(hi, b)?;
        let n = rng.random_range(1..=64usize);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..8.0)).collect();
        let spec = QuantSpec::new(b, -8.0, 8.0)?;
        let qs = quantize_sequence(&xs, &spec)?;
        let norm = xs
            .iter()
            .zip(qs.values())
            .map(|(a, c)| (a - c).powi(2))
            .sum::<f64>()
            .sqrt();
        let ok = (0.0..step).contains(&gap)
            && idempotent
            && monotone
            && norm <= step * (n as f64).sqrt();
        out.record(ok, || format!("case {i}: x = {x}, b = {b}, [x]_b = {qx}"));
    }
    Ok(out)
}

/// Every suite with the default case counts.
pub fn run_all_suites(seed: u64) -> Result<Vec<SuiteOutcome>> {
    Ok(vec![
        minimizer_equivalence_suite(100, seed)?,
        sandwich_suite(100, 0.25, seed)?,
        concavity_suite(1000, seed)?,
        kl_identity_suite(1000, seed)?,
        entropy_identity_suite(1000, seed)?,
        quantization_suite(1000, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_small_counts() {
        for outcome in [
            minimizer_equivalence_suite(10, 1).unwrap(),
            sandwich_suite(10, 0.25, 1).unwrap(),
            concavity_suite(100, 1).unwrap(),
            kl_identity_suite(100, 1).unwrap(),
            entropy_identity_suite(100, 1).unwrap(),
            quantization_suite(100, 1).unwrap(),
        ] {
            assert!(outcome.passed(), "{outcome}");
            assert!(outcome.cases >= 10);
        }
    }

    #[test]
    fn failures_are_recorded_once() {
        let mut s = SuiteOutcome::new("demo");
        s.record(true, || unreachable!());
        s.record(false, || "first".into());
        s.record(false, || "second".into());
        assert!(!s.passed());
        assert_eq!((s.cases, s.failures), (3, 2));
        assert_eq!(s.first_failure.as_deref(), Some("first"));
        assert!(s.to_string().contains("FAIL"));
    }
}
