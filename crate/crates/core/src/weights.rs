//! Weight vectors for the linearized (A-MEP) structure term.
//!
//! A weight `w[a^{k+1}]` is the cost in bits of emitting the last symbol of a
//! block given its context. Blocks the reference law considers impossible get
//! a finite `cap` instead of infinity.

use rand::Rng;

use crate::empirical::{
    block_kl, conditional_kl_decomposition, log_ratio, BlockLaw, EmpiricalDistribution,
    TrueBlockDistribution,
};
use crate::error::{Error, Result};
use crate::quantization::Alphabet;
use crate::seeding;
use crate::tables;

/// `b * (k + 1) + 32` bits: above any `-log2` conditional reachable with at
/// most 2^32 windows at resolution `b`.
pub fn default_cap(bits: u32, k: usize) -> f64 {
    bits as f64 * (k + 1) as f64 + 32.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    order: usize,
    alphabet: Alphabet,
    w: Vec<f64>,
    cap: f64,
}

impl WeightVector {
    pub fn new(order: usize, alphabet: Alphabet, w: Vec<f64>, cap: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("weight order must be positive".into()));
        }
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cap must be positive, got {cap}"
            )));
        }
        let blocks = alphabet.block_count(order)?;
        if w.len() != blocks {
            return Err(Error::Shape(format!(
                "expected {blocks} weights, got {}",
                w.len()
            )));
        }
        if w.iter().any(|&v| !(0.0..=cap).contains(&v)) {
            return Err(Error::InvalidInput(format!(
                "weights must lie in [0, {cap}]"
            )));
        }
        Ok(Self {
            order,
            alphabet,
            w,
            cap,
        })
    }

    /// Same weight on every block.
    pub fn constant(order: usize, alphabet: Alphabet, value: f64, cap: f64) -> Result<Self> {
        let blocks = alphabet.block_count(order)?;
        Self::new(order, alphabet, vec![value; blocks], cap)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weight(&self, code: usize) -> f64 {
        self.w[code]
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// Adds `shift` to every weight; the cap grows with it.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let cap = self.cap + shift.max(0.0);
        Self::new(
            self.order,
            self.alphabet.clone(),
            self.w.iter().map(|v| v + shift).collect(),
            cap,
        )
    }

    pub fn to_table(&self) -> String {
        tables::format_block_table(&self.alphabet, self.order, &self.w)
    }

    /// Parses a weight table; unlisted blocks get `cap`.
    pub fn from_table(text: &str, alphabet: Alphabet, order: usize, cap: f64) -> Result<Self> {
        let w = tables::parse_block_table(text, &alphabet, order, cap)?;
        Self::new(order, alphabet, w, cap)
    }
}

/// `w = log2(p_k(context) / p_{k+1}(block))` from block counts.
///
/// Zero-count blocks get `cap`, whether or not their context was seen.
pub fn weights_from_empirical(d: &EmpiricalDistribution, cap: f64) -> Result<WeightVector> {
    let q = d.alphabet().len();
    let ctx = d.context_counts();
    let w = d
        .counts()
        .iter()
        .enumerate()
        .map(|(code, &c)| {
            if c > 0 {
                log_ratio(ctx[code / q], c).min(cap)
            } else {
                cap
            }
        })
        .collect();
    WeightVector::new(d.order(), d.alphabet().clone(), w, cap)
}

/// `w = -log2 P(last | context)` from a block law (the Q-MAP weights).
pub fn weights_from_distribution(dist: &TrueBlockDistribution, cap: f64) -> Result<WeightVector> {
    let q = dist.alphabet().len();
    let ctx = dist.context_probs();
    let w = dist
        .probs()
        .iter()
        .enumerate()
        .map(|(code, &p)| {
            if p > 0.0 && ctx[code / q] > 0.0 {
                (ctx[code / q] / p).log2().clamp(0.0, cap)
            } else {
                cap
            }
        })
        .collect();
    WeightVector::new(dist.order(), dist.alphabet().clone(), w, cap)
}

/// Adds i.i.d. `Unif[-eps*b, eps*b]` noise to every weight and clamps to
/// `[0, cap]`, so that `(1/b) ||out - in||_inf <= eps`.
///
/// The noise is drawn as a unit uniform scaled by `eps * b`, so one seed gives
/// proportional perturbations across `eps`.
pub fn perturb_weights(wv: &WeightVector, eps: f64, bits: u32, seed: u64) -> Result<WeightVector> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "eps must be nonnegative, got {eps}"
        )));
    }
    let radius = eps * bits as f64;
    let mut rng = seeding::stream(seed);
    let w =
        wv.w.iter()
            .map(|&v| {
                let unit: f64 = 2.0 * rng.random::<f64>() - 1.0;
                (v + unit * radius).clamp(0.0, wv.cap)
            })
            .collect();
    WeightVector::new(wv.order, wv.alphabet.clone(), w, wv.cap)
}

/// `(1/b) max |w1 - w2|`.
pub fn weight_linf_distance(w1: &WeightVector, w2: &WeightVector, bits: u32) -> Result<f64> {
    if w1.order != w2.order || w1.alphabet != w2.alphabet {
        return Err(Error::Shape(
            "weight vectors are indexed by different blocks".into(),
        ));
    }
    let max =
        w1.w.iter()
            .zip(&w2.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
    Ok(max / bits as f64)
}

/// Divergences between an empirical law and a reference law, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightGap {
    /// `(1/b) D(p_hat || q)` over full blocks; infinite on support mismatch.
    pub block_kl_per_bit: f64,
    /// `sum_ctx p_hat(ctx) D(p_hat(.|ctx) || q(.|ctx))`, unnormalized.
    pub conditional_kl: f64,
}

impl WeightGap {
    pub fn is_finite(&self) -> bool {
        self.block_kl_per_bit.is_finite() && self.conditional_kl.is_finite()
    }
}

pub fn conditional_kl_weight_gap(
    p_hat: &EmpiricalDistribution,
    q: &TrueBlockDistribution,
    bits: u32,
) -> Result<WeightGap> {
    let block = block_kl(p_hat, q)?;
    let split = conditional_kl_decomposition(p_hat, q)?;
    Ok(WeightGap {
        block_kl_per_bit: block / bits as f64,
        conditional_kl: split.conditional_kl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{conditional_empirical_entropy, empirical_distribution_of_symbols};
    use crate::sources::{sample_source, true_block_distribution, SourceModel};
    use proptest::prelude::*;

    fn binary() -> Alphabet {
        Alphabet::new(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn empirical_weights_of_alternation() {
        let d = empirical_distribution_of_symbols(&[0, 1, 0, 1, 0], &binary(), 2).unwrap();
        let w = weights_from_empirical(&d, 40.0).unwrap();
        assert_eq!(w.weights(), &[40.0, 0.0, 0.0, 40.0]);
    }

    #[test]
    fn uniform_and_point_mass_weights() {
        let uniform = EmpiricalDistribution::from_counts(2, binary(), vec![3, 3, 3, 3]).unwrap();
        let w = weights_from_empirical(&uniform, 40.0).unwrap();
        assert_eq!(w.weights(), &[1.0; 4]);

        let point = EmpiricalDistribution::from_counts(2, binary(), vec![0, 0, 0, 5]).unwrap();
        let w = weights_from_empirical(&point, 40.0).unwrap();
        assert_eq!(w.weights(), &[40.0, 40.0, 40.0, 0.0]);
    }

    #[test]
    fn qmap_weights() {
        let a = binary();
        let uniform = TrueBlockDistribution::new(2, a.clone(), vec![0.25; 4]).unwrap();
        let w = weights_from_distribution(&uniform, 40.0).unwrap();
        assert_eq!(w.weights(), &[1.0; 4]);

        let sparse = SourceModel::sparse_iid(0.2, 0.0, 1.0).unwrap();
        let spec = sparse.quant_spec(1).unwrap();
        let law = true_block_distribution(&sparse, &spec, 1).unwrap();
        let w = weights_from_distribution(&law, default_cap(1, 0)).unwrap();
        assert!((w.weight(0) - 0.152_003_093_445_049_3).abs() < 1e-12);
        assert!((w.weight(1) - 10f64.log2()).abs() < 1e-12);

        let chain =
            SourceModel::markov(vec![0.0, 1.0], vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let spec = crate::quantization::QuantSpec::new(1, 0.0, 1.0).unwrap();
        let law = true_block_distribution(&chain, &spec, 2).unwrap();
        let w = weights_from_distribution(&law, default_cap(1, 1)).unwrap();
        // alphabet {0, 0.5, 1}; states at indices 0 and 2
        assert!((w.weight(0) + 0.9f64.log2()).abs() < 1e-12);
        assert!((w.weight(2) + 0.1f64.log2()).abs() < 1e-12);
        assert!((w.weight(8) + 0.9f64.log2()).abs() < 1e-12);
        assert_eq!(w.weight(1), default_cap(1, 1));
    }

    #[test]
    fn perturbation_bounds() {
        let w = WeightVector::new(1, binary(), vec![0.1, 5.0], 10.0).unwrap();
        assert_eq!(perturb_weights(&w, 0.0, 4, 1).unwrap(), w);
        for seed in 0..200 {
            let p = perturb_weights(&w, 0.1, 4, seed).unwrap();
            for (a, b) in p.weights().iter().zip(w.weights()) {
                assert!((a - b).abs() <= 0.4 + 1e-12);
            }
            assert!(weight_linf_distance(&p, &w, 4).unwrap() <= 0.1 + 1e-12);
        }
        assert!(perturb_weights(&w, -1.0, 4, 1).is_err());
    }

    #[test]
    fn linf_distance_examples() {
        let w1 = WeightVector::new(1, binary(), vec![1.0, 2.0], 10.0).unwrap();
        let w2 = WeightVector::new(1, binary(), vec![1.0, 4.0], 10.0).unwrap();
        assert_eq!(weight_linf_distance(&w1, &w1, 4).unwrap(), 0.0);
        assert_eq!(weight_linf_distance(&w1, &w2, 4).unwrap(), 0.5);
        let w3 = WeightVector::new(2, binary(), vec![1.0; 4], 10.0).unwrap();
        assert!(weight_linf_distance(&w1, &w3, 4).is_err());
    }

    #[test]
    fn weight_gap_examples() {
        let a = binary();
        let counts = EmpiricalDistribution::from_counts(1, a.clone(), vec![3, 1]).unwrap();
        let same = TrueBlockDistribution::new(1, a.clone(), vec![0.75, 0.25]).unwrap();
        let gap = conditional_kl_weight_gap(&counts, &same, 3).unwrap();
        assert!(gap.block_kl_per_bit.abs() < 1e-15);
        assert!(gap.conditional_kl.abs() < 1e-15);

        let zero = TrueBlockDistribution::new(1, a, vec![1.0, 0.0]).unwrap();
        let gap = conditional_kl_weight_gap(&counts, &zero, 3).unwrap();
        assert!(!gap.is_finite());
    }

    #[test]
    fn weight_gap_shrinks_with_n() {
        let model = SourceModel::sparse_iid(0.3, 0.0, 1.0).unwrap();
        let spec = model.quant_spec(2).unwrap();
        let alphabet = spec.alphabet().unwrap();
        let law = true_block_distribution(&model, &spec, 2).unwrap();
        let gaps: Vec<f64> = [1_000usize, 10_000, 100_000]
            .iter()
            .map(|&n| {
                let x = sample_source(&model, n, 4).unwrap();
                let q = crate::quantization::quantize_sequence(&x, &spec).unwrap();
                let s = q.symbols(&alphabet).unwrap();
                let d = empirical_distribution_of_symbols(&s, &alphabet, 2).unwrap();
                conditional_kl_weight_gap(&d, &law, 2)
                    .unwrap()
                    .block_kl_per_bit
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn table_round_trip() {
        let w = WeightVector::new(2, binary(), vec![0.5, 1.5, 40.0, 0.0], 40.0).unwrap();
        let back = WeightVector::from_table(&w.to_table(), binary(), 2, 40.0).unwrap();
        assert_eq!(back, w);
    }

    proptest! {
        #[test]
        fn entropy_identity_is_exact(seq in proptest::collection::vec(0usize..3, 5..80), k in 0usize..3) {
            let a = Alphabet::new(vec![0.0, 0.5, 1.0]).unwrap();
            prop_assume!(seq.len() > k + 1);
            let d = empirical_distribution_of_symbols(&seq, &a, k + 1).unwrap();
            let w = weights_from_empirical(&d, default_cap(1, k)).unwrap();
            let total = d.total() as f64;
            let weighted: f64 = d
                .counts()
                .iter()
                .zip(w.weights())
                .filter(|(&c, _)| c > 0)
                .map(|(&c, &wi)| (c as f64 / total) * wi)
                .sum();
            prop_assert_eq!(weighted, conditional_empirical_entropy(&d));
            prop_assert!(w.weights().iter().all(|&v| v >= 0.0));
        }
    }
}
