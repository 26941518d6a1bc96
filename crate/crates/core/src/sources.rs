//! Synthetic stationary sources and their exact quantized block laws.
//!
//! Two families are supported: the sparse i.i.d. mixture
//! `(1 - p) * delta_0 + p * Unif[lo, hi)` and finite-state stationary Markov
//! chains whose states sit on the quantization grid.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::empirical::{conditional_entropy, BlockLaw, TrueBlockDistribution};
use crate::error::{Error, Result};
use crate::quantization::{quantize_scalar, Alphabet, QuantSpec};
use crate::seeding;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    states: Vec<f64>,
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

impl MarkovChain {
    pub fn new(states: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let s = states.len();
        if s == 0 {
            return Err(Error::Config(
                "Markov chain needs at least one state".into(),
            ));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("Markov states must be finite".into()));
        }
        let mut sorted = states.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != s {
            return Err(Error::Config("Markov states must be distinct".into()));
        }
        if transition.len() != s || transition.iter().any(|row| row.len() != s) {
            return Err(Error::Config(format!("transition matrix must be {s}x{s}")));
        }
        for row in &transition {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Config(
                    "transition entries must lie in [0, 1]".into(),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "transition row sums to {sum}, not 1"
                )));
            }
        }
        let stationary = stationary_law(&transition)?;
        Ok(Self {
            states,
            transition,
            stationary,
        })
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }
}

/// Solves `pi P = pi`, `sum pi = 1`; fails for chains without a unique law.
fn stationary_law(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let s = transition.len();
    let mut system = DMatrix::<f64>::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            system[(j, i)] = transition[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut rhs = DVector::<f64>::zeros(s);
    for j in 0..s {
        system[(s - 1, j)] = 1.0;
    }
    rhs[s - 1] = 1.0;
    let pi = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Config("Markov chain has no unique stationary law".into()))?;
    if pi.iter().any(|&p| !p.is_finite() || p < -1e-12) {
        return Err(Error::Config(
            "Markov chain has no unique stationary law".into(),
        ));
    }
    Ok(pi.iter().map(|&p| p.max(0.0)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceModel {
    /// `X ~ (1 - p) delta_0 + p Unif[lo, hi)`.
    SparseIid {
        p: f64,
        lo: f64,
        hi: f64,
    },
    FiniteMarkov(MarkovChain),
}

impl SourceModel {
    pub fn sparse_iid(p: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!(
                "spike probability {p} outside [0, 1]"
            )));
        }
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::Config(format!("bad interval [{lo}, {hi})")));
        }
        if lo > 0.0 || hi < 0.0 {
            return Err(Error::Config(format!(
                "interval [{lo}, {hi}) must contain 0"
            )));
        }
        Ok(Self::SparseIid { p, lo, hi })
    }

    pub fn markov(states: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        Ok(Self::FiniteMarkov(MarkovChain::new(states, transition)?))
    }

    /// Quantization interval that covers the model's support.
    pub fn quant_spec(&self, bits: u32) -> Result<QuantSpec> {
        match self {
            Self::SparseIid { lo, hi, .. } => QuantSpec::half_open(bits, *lo, *hi),
            Self::FiniteMarkov(chain) => {
                let lo = chain.states.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = chain
                    .states
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                if lo == hi {
                    QuantSpec::new(bits, lo, lo + 1.0)
                } else {
                    QuantSpec::new(bits, lo, hi)
                }
            }
        }
    }
}

/// Draws a length-`n` realization; deterministic in `seed`.
pub fn sample_source(model: &SourceModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("sample length must be positive".into()));
    }
    let mut rng = seeding::stream(seed);
    match model {
        SourceModel::SparseIid { p, lo, hi } => Ok((0..n)
            .map(|_| {
                if rng.random::<f64>() < *p {
                    let v = lo + (hi - lo) * rng.random::<f64>();
                    if v >= *hi {
                        hi.next_down()
                    } else {
                        v
                    }
                } else {
                    0.0
                }
            })
            .collect()),
        SourceModel::FiniteMarkov(chain) => {
            let initial = WeightedIndex::new(&chain.stationary)
                .map_err(|e| Error::Config(format!("stationary law: {e}")))?;
            let rows = chain
                .transition
                .iter()
                .map(|row| {
                    WeightedIndex::new(row)
                        .map_err(|e| Error::Config(format!("transition row: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut state = initial.sample(&mut rng);
            let mut out = Vec::with_capacity(n);
            out.push(chain.states[state]);
            for _ in 1..n {
                state = rows[state].sample(&mut rng);
                out.push(chain.states[state]);
            }
            Ok(out)
        }
    }
}

/// Per-symbol law of `[X]_b` for the sparse mixture over `alphabet`.
fn sparse_symbol_law(p: f64, lo: f64, hi: f64, spec: &QuantSpec, alphabet: &Alphabet) -> Vec<f64> {
    let step = spec.step();
    alphabet
        .values()
        .iter()
        .map(|&a| {
            let overlap = ((a + step).min(hi) - a.max(lo)).max(0.0);
            let atom = if a == 0.0 { 1.0 - p } else { 0.0 };
            atom + p * overlap / (hi - lo)
        })
        .collect()
}

/// Exact law of `([X_1]_b, ..., [X_order]_b)` over `spec.alphabet()`.
pub fn true_block_distribution(
    model: &SourceModel,
    spec: &QuantSpec,
    order: usize,
) -> Result<TrueBlockDistribution> {
    if order == 0 {
        return Err(Error::InvalidInput("block order must be positive".into()));
    }
    let alphabet = spec.alphabet()?;
    let blocks = alphabet.block_count(order)?;
    let q = alphabet.len();
    let probs = match model {
        SourceModel::SparseIid { p, lo, hi } => {
            let law = sparse_symbol_law(*p, *lo, *hi, spec, &alphabet);
            let covered: f64 = law.iter().sum();
            if (covered - 1.0).abs() > 1e-10 {
                return Err(Error::Config(format!(
                    "quantization interval covers only {covered} of the source mass"
                )));
            }
            let mut probs = vec![1.0];
            for _ in 0..order {
                probs = probs
                    .iter()
                    .flat_map(|&prefix| law.iter().map(move |&s| prefix * s))
                    .collect();
            }
            probs
        }
        SourceModel::FiniteMarkov(chain) => {
            let index = chain
                .states
                .iter()
                .map(|&s| {
                    if quantize_scalar(s, spec.bits())? != s {
                        return Err(Error::Config(format!(
                            "state {s} is not on the {}-bit grid",
                            spec.bits()
                        )));
                    }
                    alphabet.index_of(s).ok_or_else(|| {
                        Error::Config(format!("state {s} is outside the quantization interval"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let s = chain.states.len();
            let mut probs = vec![0.0; blocks];
            // walk all state paths of length `order`
            let mut path = vec![0usize; order];
            loop {
                let mut mass = chain.stationary[path[0]];
                for w in path.windows(2) {
                    mass *= chain.transition[w[0]][w[1]];
                }
                let code = path.iter().fold(0, |c, &st| c * q + index[st]);
                probs[code] += mass;
                let mut pos = order;
                loop {
                    if pos == 0 {
                        return TrueBlockDistribution::new(order, alphabet, probs);
                    }
                    pos -= 1;
                    path[pos] += 1;
                    if path[pos] < s {
                        break;
                    }
                    path[pos] = 0;
                }
            }
        }
    };
    TrueBlockDistribution::new(order, alphabet, probs)
}

/// Exact `H([X_{k+1}]_b | [X^k]_b)` in bits from the model structure.
///
/// This avoids enumerating `|X_b|^(k+1)` blocks: the i.i.d. mixture reduces to
/// the one-symbol entropy and a first-order chain to the stationary average of
/// row entropies.
pub fn quantized_conditional_entropy(
    model: &SourceModel,
    spec: &QuantSpec,
    k: usize,
) -> Result<f64> {
    let entropy = |law: &[f64]| -> f64 {
        law.iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    };
    match model {
        SourceModel::SparseIid { p, lo, hi } => {
            let alphabet = spec.alphabet()?;
            let law = sparse_symbol_law(*p, *lo, *hi, spec, &alphabet);
            Ok(entropy(&law))
        }
        SourceModel::FiniteMarkov(chain) => {
            for &s in &chain.states {
                if quantize_scalar(s, spec.bits())? != s || !spec.contains(s) {
                    return Err(Error::Config(format!(
                        "state {s} is not a grid point of the quantization interval"
                    )));
                }
            }
            if k == 0 {
                Ok(entropy(&chain.stationary))
            } else {
                Ok(chain
                    .stationary
                    .iter()
                    .zip(&chain.transition)
                    .map(|(pi, row)| pi * entropy(row))
                    .sum())
            }
        }
    }
}

/// Ratios `H([X_{k+1}]_b | [X^k]_b) / b` over a list of resolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct IdEstimate {
    pub k: usize,
    pub b_values: Vec<u32>,
    pub ratios: Vec<f64>,
    /// Ratio at the largest resolution.
    pub extrapolated: f64,
}

pub fn estimate_information_dimension(
    model: &SourceModel,
    k: usize,
    b_values: &[u32],
) -> Result<IdEstimate> {
    if b_values.is_empty() {
        return Err(Error::InvalidInput("need at least one resolution".into()));
    }
    let ratios = b_values
        .iter()
        .map(|&b| {
            let spec = model.quant_spec(b)?;
            Ok(quantized_conditional_entropy(model, &spec, k)? / b as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let largest = b_values
        .iter()
        .enumerate()
        .max_by_key(|(_, &b)| b)
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(IdEstimate {
        k,
        b_values: b_values.to_vec(),
        extrapolated: ratios[largest],
        ratios,
    })
}

/// Same ratio computed by enumerating the exact block law at orders `k` and
/// `k + 1`; only feasible for small alphabets.
pub fn conditional_entropy_by_enumeration(
    model: &SourceModel,
    spec: &QuantSpec,
    k: usize,
) -> Result<f64> {
    Ok(conditional_entropy(&true_block_distribution(
        model,
        spec,
        k + 1,
    )?))
}

/// True iff every nonzero block mass is at least `f * |X_b|^-(k+1)`.
pub fn check_qmap_mass_condition<L: BlockLaw + ?Sized>(dist: &L, f: f64) -> bool {
    let floor = f * (dist.alphabet().len() as f64).powi(-(dist.order() as i32));
    (0..dist.num_blocks())
        .map(|code| dist.prob(code))
        .filter(|&p| p > 0.0)
        .all(|p| p >= floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{empirical_distribution_of_symbols, total_variation};

    fn binary_entropy(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    fn sticky_chain() -> SourceModel {
        SourceModel::markov(vec![0.0, 1.0], vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap()
    }

    #[test]
    fn zero_spike_probability_gives_zeros() {
        let m = SourceModel::sparse_iid(0.0, 0.0, 1.0).unwrap();
        assert!(sample_source(&m, 100, 3).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sparse_fraction_concentrates() {
        let m = SourceModel::sparse_iid(0.2, 0.0, 1.0).unwrap();
        let x = sample_source(&m, 100_000, 1).unwrap();
        let frac = x.iter().filter(|&&v| v != 0.0).count() as f64 / x.len() as f64;
        assert!((frac - 0.2).abs() < 0.01, "{frac}");
        assert!(x.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = sticky_chain();
        assert_eq!(
            sample_source(&m, 50, 9).unwrap(),
            sample_source(&m, 50, 9).unwrap()
        );
        assert_ne!(
            sample_source(&m, 50, 9).unwrap(),
            sample_source(&m, 50, 10).unwrap()
        );
    }

    #[test]
    fn markov_self_transition_frequency() {
        let x = sample_source(&sticky_chain(), 100_000, 2).unwrap();
        let stays = x.windows(2).filter(|w| w[0] == w[1]).count() as f64;
        let freq = stays / (x.len() - 1) as f64;
        assert!((freq - 0.9).abs() < 0.01, "{freq}");
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(SourceModel::sparse_iid(1.5, 0.0, 1.0).is_err());
        assert!(SourceModel::sparse_iid(0.5, 0.5, 1.0).is_err());
        assert!(SourceModel::markov(vec![0.0, 1.0], vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(SourceModel::markov(vec![0.0, 0.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        // two closed classes: no unique stationary law
        assert!(SourceModel::markov(vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(sample_source(&sticky_chain(), 0, 1).is_err());
    }

    #[test]
    fn stationary_law_of_asymmetric_chain() {
        let m = MarkovChain::new(vec![0.0, 1.0], vec![vec![0.7, 0.3], vec![0.6, 0.4]]).unwrap();
        assert!((m.stationary()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.stationary()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_block_law() {
        let m = SourceModel::sparse_iid(0.2, 0.0, 1.0).unwrap();
        let spec = QuantSpec::half_open(1, 0.0, 1.0).unwrap();
        let d = true_block_distribution(&m, &spec, 1).unwrap();
        assert!((d.prob(0) - 0.9).abs() < 1e-15);
        assert!((d.prob(1) - 0.1).abs() < 1e-15);

        let d2 = true_block_distribution(&m, &spec, 2).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((d2.prob(a * 2 + b) - d.prob(a) * d.prob(b)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn markov_block_law_follows_chain_rule() {
        let m = sticky_chain();
        let spec = m.quant_spec(1).unwrap();
        let d = true_block_distribution(&m, &spec, 2).unwrap();
        // alphabet {0, 0.5, 1}: states at indices 0 and 2
        assert!((d.prob(0) - 0.5 * 0.9).abs() < 1e-15);
        assert!((d.prob(2) - 0.5 * 0.1).abs() < 1e-15);
        assert_eq!(d.prob(1), 0.0);
    }

    #[test]
    fn block_laws_normalize_and_marginalize() {
        let sparse = SourceModel::sparse_iid(0.3, -1.0, 1.0).unwrap();
        for model in [sparse, sticky_chain()] {
            for b in 1..4 {
                let spec = model.quant_spec(b).unwrap();
                let mut prev = true_block_distribution(&model, &spec, 1).unwrap();
                assert!((prev.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
                for order in 2..4 {
                    let d = true_block_distribution(&model, &spec, order).unwrap();
                    assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
                    let m = d.marginalize().unwrap();
                    assert!(total_variation(&m, &prev).unwrap().l1 < 1e-12);
                    prev = d;
                }
            }
        }
    }

    #[test]
    fn enumeration_guard() {
        let m = SourceModel::sparse_iid(0.2, 0.0, 1.0).unwrap();
        let spec = QuantSpec::half_open(12, 0.0, 1.0).unwrap();
        assert!(matches!(
            true_block_distribution(&m, &spec, 3),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn markov_states_must_be_on_grid() {
        let m = SourceModel::markov(vec![0.0, 0.3], vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let spec = QuantSpec::new(2, 0.0, 1.0).unwrap();
        assert!(true_block_distribution(&m, &spec, 1).is_err());
    }

    #[test]
    fn id_ratio_closed_form() {
        let m = SourceModel::sparse_iid(0.2, 0.0, 1.0).unwrap();
        let est = estimate_information_dimension(&m, 0, &[4, 8, 12, 16]).unwrap();
        let h2 = binary_entropy(0.2);
        for (ratio, &b) in est.ratios.iter().zip(&est.b_values) {
            assert!(*ratio >= 0.2 && *ratio <= 0.2 + h2 / b as f64 + 1e-6);
        }
        assert!(est.ratios.windows(2).all(|w| w[1] < w[0]));
        assert!((est.ratios[1] - 0.29).abs() < 0.01);
        assert!((est.extrapolated - 0.245).abs() < 0.005);
    }

    #[test]
    fn id_of_unstructured_source_tends_to_one() {
        let m = SourceModel::sparse_iid(1.0, 0.0, 1.0).unwrap();
        let est = estimate_information_dimension(&m, 0, &[4, 16]).unwrap();
        assert!((est.extrapolated - 1.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_matches_enumeration() {
        let sparse = SourceModel::sparse_iid(0.2, 0.0, 1.0).unwrap();
        for b in 1..6 {
            let spec = sparse.quant_spec(b).unwrap();
            for k in 0..2 {
                let a = quantized_conditional_entropy(&sparse, &spec, k).unwrap();
                let e = conditional_entropy_by_enumeration(&sparse, &spec, k).unwrap();
                assert!((a - e).abs() < 1e-10, "b={b} k={k}: {a} vs {e}");
            }
        }
        let chain = sticky_chain();
        let spec = chain.quant_spec(2).unwrap();
        for k in 0..3 {
            let a = quantized_conditional_entropy(&chain, &spec, k).unwrap();
            let e = conditional_entropy_by_enumeration(&chain, &spec, k).unwrap();
            assert!((a - e).abs() < 1e-10, "k={k}: {a} vs {e}");
        }
    }

    #[test]
    fn mass_condition() {
        let a = Alphabet::new(vec![0.0, 0.5]).unwrap();
        let uniform = TrueBlockDistribution::new(1, a.clone(), vec![0.5, 0.5]).unwrap();
        assert!(check_qmap_mass_condition(&uniform, 1.0));
        let skewed = TrueBlockDistribution::new(1, a.clone(), vec![0.75, 0.25]).unwrap();
        assert!(!check_qmap_mass_condition(&skewed, 1.0));
        let sparse = TrueBlockDistribution::new(1, a, vec![0.9, 0.1]).unwrap();
        assert!(check_qmap_mass_condition(&sparse, 0.2));
        assert!(!check_qmap_mass_condition(&sparse, 0.25));
    }

    #[test]
    fn empirical_law_approaches_true_law() {
        let chain = sticky_chain();
        let spec = chain.quant_spec(1).unwrap();
        let alphabet = spec.alphabet().unwrap();
        let truth = true_block_distribution(&chain, &spec, 2).unwrap();
        let mut devs = Vec::new();
        for n in [1_000usize, 100_000] {
            let x = sample_source(&chain, n, 17).unwrap();
            let symbols = alphabet.symbols_of(&x).unwrap();
            let d = empirical_distribution_of_symbols(&symbols, &alphabet, 2).unwrap();
            devs.push(total_variation(&d, &truth).unwrap().l1);
        }
        assert!(devs[1] < devs[0]);
    }
}
