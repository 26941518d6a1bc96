//! Block statistics of discrete sequences: k-th order empirical
//! distributions, conditional empirical entropy, LZ78 code length and the
//! divergences used to compare block laws.
//!
//! Blocks are stored densely, indexed by the mixed-radix code of
//! [`Alphabet::encode_block`]. The first `order - 1` symbols of a block are
//! its context; the last symbol is the one being predicted.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::quantization::{Alphabet, QuantizedSequence};

/// Common read access to a probability law over fixed-length blocks.
pub trait BlockLaw {
    fn order(&self) -> usize;
    fn alphabet(&self) -> &Alphabet;
    fn prob(&self, code: usize) -> f64;

    fn num_blocks(&self) -> usize {
        self.alphabet().len().pow(self.order() as u32)
    }

    /// Probabilities of the length `order - 1` contexts.
    fn context_probs(&self) -> Vec<f64> {
        let q = self.alphabet().len();
        let mut ctx = vec![0.0; self.num_blocks() / q];
        for code in 0..self.num_blocks() {
            ctx[code / q] += self.prob(code);
        }
        ctx
    }
}

/// Order-`k` block frequencies of a sequence, kept as exact integer counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    order: usize,
    alphabet: Alphabet,
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalDistribution {
    /// Builds a distribution from raw block counts.
    pub fn from_counts(order: usize, alphabet: Alphabet, counts: Vec<u64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("block order must be positive".into()));
        }
        let blocks = alphabet.block_count(order)?;
        if counts.len() != blocks {
            return Err(Error::Shape(format!(
                "expected {blocks} block counts, got {}",
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidInput("distribution has no mass".into()));
        }
        Ok(Self {
            order,
            alphabet,
            counts,
            total,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, code: usize) -> u64 {
        self.counts[code]
    }

    /// Number of windows, the common denominator of every probability.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Context counts obtained by summing out the last symbol.
    pub fn context_counts(&self) -> Vec<u64> {
        let q = self.alphabet.len();
        let mut ctx = vec![0; self.counts.len() / q];
        for (code, &c) in self.counts.iter().enumerate() {
            ctx[code / q] += c;
        }
        ctx
    }

    /// Sums out the first symbol instead of the last.
    pub fn marginalize_first(&self) -> Result<Self> {
        if self.order < 2 {
            return Err(Error::CannotMarginalize(self.order));
        }
        let stride = self.counts.len() / self.alphabet.len();
        let mut counts = vec![0; stride];
        for (code, &c) in self.counts.iter().enumerate() {
            counts[code % stride] += c;
        }
        Ok(Self {
            order: self.order - 1,
            alphabet: self.alphabet.clone(),
            counts,
            total: self.total,
        })
    }

    /// Materializes the frequencies as a real-valued block law.
    pub fn to_block_distribution(&self) -> TrueBlockDistribution {
        TrueBlockDistribution {
            order: self.order,
            alphabet: self.alphabet.clone(),
            probs: (0..self.counts.len()).map(|c| self.prob(c)).collect(),
        }
    }
}

impl BlockLaw for EmpiricalDistribution {
    fn order(&self) -> usize {
        self.order
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn prob(&self, code: usize) -> f64 {
        self.counts[code] as f64 / self.total as f64
    }

    fn num_blocks(&self) -> usize {
        self.counts.len()
    }
}

/// A real-valued law over blocks, typically a source's exact quantized law.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueBlockDistribution {
    order: usize,
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl TrueBlockDistribution {
    pub fn new(order: usize, alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("block order must be positive".into()));
        }
        let blocks = alphabet.block_count(order)?;
        if probs.len() != blocks {
            return Err(Error::Shape(format!(
                "expected {blocks} block probabilities, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidInput(
                "block probabilities must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "block probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self {
            order,
            alphabet,
            probs,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn marginalize(&self) -> Result<Self> {
        if self.order < 2 {
            return Err(Error::CannotMarginalize(self.order));
        }
        Ok(Self {
            order: self.order - 1,
            alphabet: self.alphabet.clone(),
            probs: self.context_probs(),
        })
    }
}

impl BlockLaw for TrueBlockDistribution {
    fn order(&self) -> usize {
        self.order
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn prob(&self, code: usize) -> f64 {
        self.probs[code]
    }

    fn num_blocks(&self) -> usize {
        self.probs.len()
    }
}

/// Order-`order` empirical distribution of a quantized sequence.
pub fn empirical_distribution(
    u: &QuantizedSequence,
    order: usize,
) -> Result<EmpiricalDistribution> {
    let alphabet = u.spec().alphabet()?;
    let symbols = u.symbols(&alphabet)?;
    empirical_distribution_of_symbols(&symbols, &alphabet, order)
}

/// Counts the windows `u[i-order .. i-1]` for `i = order+1 ..= n` (1-based).
///
/// There are `n - order` windows and the final symbol never ends one.
pub fn empirical_distribution_of_symbols(
    symbols: &[usize],
    alphabet: &Alphabet,
    order: usize,
) -> Result<EmpiricalDistribution> {
    if order == 0 {
        return Err(Error::InvalidInput("block order must be positive".into()));
    }
    let n = symbols.len();
    if n <= order {
        return Err(Error::InsufficientData { len: n, order });
    }
    let blocks = alphabet.block_count(order)?;
    let mut counts = vec![0u64; blocks];
    for window in symbols[..n - 1].windows(order) {
        counts[alphabet.encode_block(window)] += 1;
    }
    Ok(EmpiricalDistribution {
        order,
        alphabet: alphabet.clone(),
        counts,
        total: (n - order) as u64,
    })
}

/// Sums out the last symbol of every block.
pub fn marginalize(d: &EmpiricalDistribution) -> Result<EmpiricalDistribution> {
    if d.order < 2 {
        return Err(Error::CannotMarginalize(d.order));
    }
    Ok(EmpiricalDistribution {
        order: d.order - 1,
        alphabet: d.alphabet.clone(),
        counts: d.context_counts(),
        total: d.total,
    })
}

/// `log2(context_count / block_count)` for a block seen `count > 0` times.
pub(crate) fn log_ratio(context_count: u64, count: u64) -> f64 {
    (context_count as f64 / count as f64).log2()
}

/// Conditional empirical entropy `H(U_{k+1} | U^k)` in bits, where the
/// distribution has order `k + 1`.
pub fn conditional_empirical_entropy(d: &EmpiricalDistribution) -> f64 {
    entropy_from_counts(&d.counts, &d.context_counts(), d.total, d.alphabet.len())
}

/// Shared by every exact entropy evaluation so that equal counts always give
/// bit-identical results.
pub(crate) fn entropy_from_counts(counts: &[u64], ctx: &[u64], total: u64, q: usize) -> f64 {
    let total = total as f64;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(code, &c)| (c as f64 / total) * log_ratio(ctx[code / q], c))
        .sum()
}

/// `sum_{c > 0} (c / total) * w[code]`, the linear structure term.
pub(crate) fn weighted_sum_from_counts(counts: &[u64], total: u64, w: &[f64]) -> f64 {
    let total = total as f64;
    counts
        .iter()
        .zip(w)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &wi)| (c as f64 / total) * wi)
        .sum()
}

/// Conditional entropy of the last symbol given the others for any block law.
pub fn conditional_entropy<L: BlockLaw + ?Sized>(law: &L) -> f64 {
    let q = law.alphabet().len();
    let ctx = law.context_probs();
    (0..law.num_blocks())
        .map(|code| {
            let p = law.prob(code);
            if p > 0.0 {
                p * (ctx[code / q] / p).log2()
            } else {
                0.0
            }
        })
        .sum()
}

/// Shannon entropy of the full block law in bits.
pub fn block_entropy<L: BlockLaw + ?Sized>(law: &L) -> f64 {
    (0..law.num_blocks())
        .map(|code| law.prob(code))
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Bit length of the incremental LZ78 encoding of `symbols`.
///
/// Phrase `j` (1-based) costs `ceil(log2 j)` bits for the dictionary
/// reference plus `ceil(log2 |alphabet|)` bits for the innovation symbol. A
/// trailing phrase that is already in the dictionary is still emitted.
pub fn lz78_code_length_of_symbols(symbols: &[usize], alphabet_size: usize) -> u64 {
    let symbol_bits = ceil_log2(alphabet_size as u64);
    // trie edges: (parent node, symbol) -> child node; node 0 is the root
    let mut trie: HashMap<(usize, usize), usize> = HashMap::new();
    let mut node = 0;
    let mut phrases = 0u64;
    let mut bits = 0u64;
    let mut pending = false;
    for &s in symbols {
        match trie.get(&(node, s)) {
            Some(&child) => {
                node = child;
                pending = true;
            }
            None => {
                phrases += 1;
                bits += ceil_log2(phrases) + symbol_bits;
                trie.insert((node, s), trie.len() + 1);
                node = 0;
                pending = false;
            }
        }
    }
    if pending {
        phrases += 1;
        bits += ceil_log2(phrases) + symbol_bits;
    }
    bits
}

pub fn lz78_code_length(u: &QuantizedSequence) -> Result<u64> {
    if u.is_empty() {
        return Err(Error::InsufficientData { len: 0, order: 1 });
    }
    let alphabet = u.spec().alphabet()?;
    let symbols = u.symbols(&alphabet)?;
    Ok(lz78_code_length_of_symbols(&symbols, alphabet.len()))
}

fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros() as u64
    }
}

/// L1 deviation between two block laws and the total variation (half of it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub l1: f64,
    pub tv: f64,
}

fn check_same_support<A: BlockLaw + ?Sized, B: BlockLaw + ?Sized>(a: &A, b: &B) -> Result<()> {
    if a.order() != b.order() || a.alphabet() != b.alphabet() {
        return Err(Error::Shape(format!(
            "block laws differ: order {} over {} symbols vs order {} over {} symbols",
            a.order(),
            a.alphabet().len(),
            b.order(),
            b.alphabet().len()
        )));
    }
    Ok(())
}

pub fn total_variation<A: BlockLaw + ?Sized, B: BlockLaw + ?Sized>(
    d1: &A,
    d2: &B,
) -> Result<Deviation> {
    check_same_support(d1, d2)?;
    let l1: f64 = (0..d1.num_blocks())
        .map(|code| (d1.prob(code) - d2.prob(code)).abs())
        .sum();
    Ok(Deviation { l1, tv: l1 / 2.0 })
}

/// Split of the cross entropy `sum q2 * -log q1(last | context)` into the
/// context-averaged conditional divergence and the conditional entropy of
/// `q2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDecomposition {
    /// `sum_ctx q2(ctx) D(q2(.|ctx) || q1(.|ctx))`; infinite when `q2` puts
    /// mass where `q1` has none.
    pub conditional_kl: f64,
    pub conditional_entropy: f64,
}

impl KlDecomposition {
    pub fn is_finite(&self) -> bool {
        self.conditional_kl.is_finite()
    }

    pub fn cross_entropy(&self) -> f64 {
        self.conditional_kl + self.conditional_entropy
    }
}

pub fn conditional_kl_decomposition<A: BlockLaw + ?Sized, B: BlockLaw + ?Sized>(
    q2: &A,
    q1: &B,
) -> Result<KlDecomposition> {
    check_same_support(q2, q1)?;
    let q = q2.alphabet().len();
    let ctx2 = q2.context_probs();
    let ctx1 = q1.context_probs();
    let mut kl = 0.0;
    let mut entropy = 0.0;
    for code in 0..q2.num_blocks() {
        let p2 = q2.prob(code);
        if p2 <= 0.0 {
            continue;
        }
        let c = code / q;
        let cond2 = p2 / ctx2[c];
        let p1 = q1.prob(code);
        if p1 <= 0.0 || ctx1[c] <= 0.0 {
            kl = f64::INFINITY;
        } else {
            kl += p2 * (cond2 / (p1 / ctx1[c])).log2();
        }
        entropy += p2 * (ctx2[c] / p2).log2();
    }
    Ok(KlDecomposition {
        conditional_kl: kl,
        conditional_entropy: entropy,
    })
}

/// Full block divergence `D(p || q)` in bits; infinite on absolute-continuity
/// failure.
pub fn block_kl<A: BlockLaw + ?Sized, B: BlockLaw + ?Sized>(p: &A, q: &B) -> Result<f64> {
    check_same_support(p, q)?;
    let mut kl = 0.0;
    for code in 0..p.num_blocks() {
        let a = p.prob(code);
        if a <= 0.0 {
            continue;
        }
        let b = q.prob(code);
        if b <= 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += a * (a / b).log2();
    }
    Ok(kl)
}
