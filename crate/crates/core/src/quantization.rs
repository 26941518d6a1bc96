//! b-bit quantization of scalars and sequences.
//!
//! A real `x` is mapped to `floor(x)` plus the first `b` bits of the binary
//! expansion of its fractional part. The computation is done as
//! `floor(x * 2^b) / 2^b`, which is exact in binary floating point for every
//! finite `x` whose scaled value stays below 2^53.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Largest alphabet or block table the crate will materialize.
pub const ENUMERATION_LIMIT: u128 = 1 << 24;

/// Quantization resolution and the bounded source interval it applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantSpec {
    bits: u32,
    lo: f64,
    hi: f64,
    hi_inclusive: bool,
}

impl QuantSpec {
    /// Closed interval `[lo, hi]`.
    pub fn new(bits: u32, lo: f64, hi: f64) -> Result<Self> {
        Self::build(bits, lo, hi, true)
    }

    /// Half-open interval `[lo, hi)`.
    pub fn half_open(bits: u32, lo: f64, hi: f64) -> Result<Self> {
        Self::build(bits, lo, hi, false)
    }

    fn build(bits: u32, lo: f64, hi: f64, hi_inclusive: bool) -> Result<Self> {
        if bits == 0 || bits > 40 {
            return Err(Error::InvalidInput(format!(
                "quantization bits must be in 1..=40, got {bits}"
            )));
        }
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidInput(format!(
                "source interval must be finite with lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            bits,
            lo,
            hi,
            hi_inclusive,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn hi_inclusive(&self) -> bool {
        self.hi_inclusive
    }

    /// Grid step `2^-b`.
    pub fn step(&self) -> f64 {
        (-(self.bits as f64)).exp2()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && (x < self.hi || (self.hi_inclusive && x == self.hi))
    }

    /// Same interval at a different resolution.
    pub fn with_bits(&self, bits: u32) -> Result<Self> {
        Self::build(bits, self.lo, self.hi, self.hi_inclusive)
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        build_alphabet(self)
    }
}

/// Sorted, duplicate-free set of reals used as a symbol alphabet.
///
/// Symbols are referred to by their index in ascending order, so the
/// lexicographic order of index sequences matches the lexicographic order of
/// the value sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    values: Vec<f64>,
}

impl Alphabet {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("alphabet must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("alphabet values must be finite".into()));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.values
            .binary_search_by(|probe| probe.partial_cmp(&value).unwrap_or(Ordering::Less))
            .ok()
    }

    /// Number of blocks of the given length, guarded by [`ENUMERATION_LIMIT`].
    pub fn block_count(&self, order: usize) -> Result<usize> {
        let size = (self.len() as u128)
            .checked_pow(order as u32)
            .unwrap_or(u128::MAX);
        if size > ENUMERATION_LIMIT {
            return Err(Error::TooLarge {
                what: "block table",
                size,
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(size as usize)
    }

    /// Mixed-radix code of a block, first symbol most significant.
    pub fn encode_block(&self, symbols: &[usize]) -> usize {
        symbols.iter().fold(0, |code, &s| code * self.len() + s)
    }

    pub fn decode_block(&self, mut code: usize, order: usize) -> Vec<usize> {
        let mut out = vec![0; order];
        for slot in out.iter_mut().rev() {
            *slot = code % self.len();
            code /= self.len();
        }
        out
    }

    pub fn symbols_of(&self, values: &[f64]) -> Result<Vec<usize>> {
        values
            .iter()
            .map(|&v| {
                self.index_of(v)
                    .ok_or_else(|| Error::InvalidInput(format!("value {v} is not in the alphabet")))
            })
            .collect()
    }
}

/// A quantized sequence together with the spec that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSequence {
    values: Vec<f64>,
    spec: QuantSpec,
}

impl QuantizedSequence {
    /// Wraps values that are already on the grid of `spec`.
    pub fn from_grid_values(values: Vec<f64>, spec: QuantSpec) -> Result<Self> {
        for &v in &values {
            if !v.is_finite() || quantize_scalar(v, spec.bits)? != v {
                return Err(Error::InvalidInput(format!(
                    "{v} is not a {}-bit grid point",
                    spec.bits
                )));
            }
            if v < quantize_scalar(spec.lo, spec.bits)? || v > spec.hi {
                return Err(Error::Domain {
                    value: v,
                    lo: spec.lo,
                    hi: spec.hi,
                });
            }
        }
        Ok(Self { values, spec })
    }

    /// Builds a sequence from symbol indices into `spec.alphabet()`.
    pub fn from_symbols(symbols: &[usize], alphabet: &Alphabet, spec: QuantSpec) -> Self {
        Self {
            values: symbols.iter().map(|&s| alphabet.value(s)).collect(),
            spec,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> &QuantSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn symbols(&self, alphabet: &Alphabet) -> Result<Vec<usize>> {
        alphabet.symbols_of(&self.values)
    }
}

/// `[x]_b`: floor of `x` plus the first `b` fractional bits.
pub fn quantize_scalar(x: f64, bits: u32) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("cannot quantize {x}")));
    }
    if bits == 0 {
        return Err(Error::InvalidInput(
            "quantization bits must be positive".into(),
        ));
    }
    let scale = (bits as f64).exp2();
    Ok((x * scale).floor() / scale)
}

pub fn quantize_sequence(x: &[f64], spec: &QuantSpec) -> Result<QuantizedSequence> {
    let values = x
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("cannot quantize {v}")));
            }
            if !spec.contains(v) {
                return Err(Error::Domain {
                    value: v,
                    lo: spec.lo,
                    hi: spec.hi,
                });
            }
            quantize_scalar(v, spec.bits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedSequence {
        values,
        spec: *spec,
    })
}

/// All grid points `[x]_b` for `x` in the source interval, ascending.
pub fn build_alphabet(spec: &QuantSpec) -> Result<Alphabet> {
    let scale = (spec.bits as f64).exp2();
    let first = (spec.lo * scale).floor();
    let last = if spec.hi_inclusive {
        (spec.hi * scale).floor()
    } else {
        (spec.hi * scale).ceil() - 1.0
    };
    let size = (last - first + 1.0).max(0.0);
    if size > ENUMERATION_LIMIT as f64 {
        return Err(Error::TooLarge {
            what: "quantized alphabet",
            size: size as u128,
            limit: ENUMERATION_LIMIT,
        });
    }
    let values = (0..size as u64)
        .map(|i| (first + i as f64) / scale)
        .collect();
    Ok(Alphabet { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_examples() {
        assert_eq!(quantize_scalar(3.0, 4).unwrap(), 3.0);
        assert_eq!(quantize_scalar(0.6875, 2).unwrap(), 0.5);
        assert_eq!(quantize_scalar(-1.3, 1).unwrap(), -1.5);
        // dyadic fractions use the terminating expansion
        assert_eq!(quantize_scalar(0.5, 1).unwrap(), 0.5);
        assert_eq!(quantize_scalar(0.75, 2).unwrap(), 0.75);
    }

    #[test]
    fn scalar_rejects_non_finite() {
        assert!(matches!(
            quantize_scalar(f64::NAN, 3),
            Err(Error::InvalidInput(_))
        ));
        assert!(quantize_scalar(f64::INFINITY, 3).is_err());
    }

    #[test]
    fn sequence_examples() {
        let unit = QuantSpec::new(3, 0.0, 1.0).unwrap();
        let q = quantize_sequence(&[0.0, 1.0], &unit).unwrap();
        assert_eq!(q.values(), &[0.0, 1.0]);

        let spec = QuantSpec::new(2, 0.0, 1.0).unwrap();
        let x = [0.6875, 0.6875];
        let q = quantize_sequence(&x, &spec).unwrap();
        assert_eq!(q.values(), &[0.5, 0.5]);
        let err: f64 = x
            .iter()
            .zip(q.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((err - 0.265_165_042_944_955_3).abs() < 1e-12);
        assert!(err <= 0.25 * 2f64.sqrt());
    }

    #[test]
    fn sequence_domain_error() {
        let spec = QuantSpec::half_open(2, 0.0, 1.0).unwrap();
        assert!(matches!(
            quantize_sequence(&[0.2, 1.0], &spec),
            Err(Error::Domain { .. })
        ));
        assert!(quantize_sequence(&[-0.1], &spec).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(QuantSpec::new(0, 0.0, 1.0).is_err());
        assert!(QuantSpec::new(2, 1.0, 1.0).is_err());
        assert!(QuantSpec::new(2, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn alphabet_examples() {
        let a = build_alphabet(&QuantSpec::half_open(1, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(a.values(), &[0.0, 0.5]);
        let a = build_alphabet(&QuantSpec::new(1, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(a.values(), &[0.0, 0.5, 1.0]);
        let a = build_alphabet(&QuantSpec::new(1, -1.0, 1.0).unwrap()).unwrap();
        assert_eq!(a.values(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn alphabet_off_grid_endpoints() {
        let spec = QuantSpec::new(2, -0.3, 0.6).unwrap();
        let a = build_alphabet(&spec).unwrap();
        assert_eq!(a.values(), &[-0.5, -0.25, 0.0, 0.25, 0.5]);
        assert!(a.len() as f64 <= 0.9 * 4.0 + 2.0);
    }

    #[test]
    fn block_codes_round_trip() {
        let a = Alphabet::new(vec![0.0, 0.5, 1.0]).unwrap();
        let block = [2, 0, 1];
        let code = a.encode_block(&block);
        assert_eq!(code, 2 * 9 + 1);
        assert_eq!(a.decode_block(code, 3), block);
    }

    #[test]
    fn grid_value_validation() {
        let spec = QuantSpec::new(2, 0.0, 1.0).unwrap();
        assert!(QuantizedSequence::from_grid_values(vec![0.25, 1.0], spec).is_ok());
        assert!(QuantizedSequence::from_grid_values(vec![0.3], spec).is_err());
        assert!(QuantizedSequence::from_grid_values(vec![1.25], spec).is_err());
    }

    proptest! {
        #[test]
        fn resolution_and_idempotence(x in -1e6f64..1e6, bits in 1u32..30) {
            let q = quantize_scalar(x, bits).unwrap();
            let step = (-(bits as f64)).exp2();
            prop_assert!(q <= x);
            prop_assert!(x - q < step);
            prop_assert_eq!(quantize_scalar(q, bits).unwrap(), q);
        }

        #[test]
        fn monotone(x in -100f64..100.0, d in 0f64..10.0, bits in 1u32..20) {
            let y = x + d;
            prop_assert!(quantize_scalar(x, bits).unwrap() <= quantize_scalar(y, bits).unwrap());
        }

        #[test]
        fn alphabet_closure(lo in -4f64..4.0, width in 0.01f64..4.0, t in 0f64..1.0, bits in 1u32..8) {
            let spec = QuantSpec::new(bits, lo, lo + width).unwrap();
            let x = (lo + t * width).min(lo + width);
            let q = quantize_scalar(x, bits).unwrap();
            let alphabet = build_alphabet(&spec).unwrap();
            prop_assert!(alphabet.index_of(q).is_some());
            prop_assert!(alphabet.len() as f64 <= width * (bits as f64).exp2() + 2.0);
        }
    }
}
