//! Convergence of empirical block laws to the exact quantized block law.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::empirical::{empirical_distribution, total_variation};
use crate::error::{Error, Result};
use crate::quantization::{quantize_sequence, QuantSpec};
use crate::seeding::derive_seed;
use crate::sources::{sample_source, true_block_distribution, SourceModel};
use crate::weights::conditional_kl_weight_gap;

pub const CONVERGENCE_HEADER: &str = "n,replicate,seed,l1,tv,block_kl_per_bit,conditional_kl";

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    /// `sum |p_hat - p|` over blocks of order `k + 1`.
    pub l1: f64,
    pub tv: f64,
    pub block_kl_per_bit: f64,
    pub conditional_kl: f64,
}

/// Compares order-(k+1) empirical laws of `replicates` independent samples
/// per length against the exact law. Replicate `r` at length `n` samples
/// with `derive_seed(master_seed, [r, n])`.
pub fn run_convergence_study(
    model: &SourceModel,
    spec: &QuantSpec,
    k: usize,
    ns: &[usize],
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    if ns.is_empty() || replicates == 0 {
        return Err(Error::Config(
            "need at least one length and one replicate".into(),
        ));
    }
    let truth = true_block_distribution(model, spec, k + 1)?;
    let jobs: Vec<(usize, usize)> = ns
        .iter()
        .flat_map(|&n| (0..replicates).map(move |r| (n, r)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(n, replicate)| {
            let seed = derive_seed(master_seed, &[replicate as u64, n as u64]);
            let x = sample_source(model, n, seed)?;
            let emp = empirical_distribution(&quantize_sequence(&x, spec)?, k + 1)?;
            let dev = total_variation(&emp, &truth)?;
            let gap = conditional_kl_weight_gap(&emp, &truth, spec.bits())?;
            Ok(ConvergenceRow {
                n,
                replicate,
                seed,
                l1: dev.l1,
                tv: dev.tv,
                block_kl_per_bit: gap.block_kl_per_bit,
                conditional_kl: gap.conditional_kl,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.n, r.replicate));
    Ok(rows)
}

pub fn format_convergence_table(rows: &[ConvergenceRow]) -> String {
    let mut out = format!("{CONVERGENCE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n, r.replicate, r.seed, r.l1, r.tv, r.block_kl_per_bit, r.conditional_kl
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_source_has_zero_deviation() {
        let model = SourceModel::markov(vec![0.5], vec![vec![1.0]]).unwrap();
        let spec = model.quant_spec(2).unwrap();
        let rows = run_convergence_study(&model, &spec, 1, &[10, 100, 1000], 2, 3).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows
            .iter()
            .all(|r| r.l1 == 0.0 && r.block_kl_per_bit == 0.0));
    }

    #[test]
    fn iid_deviation_shrinks_with_length() {
        let model = SourceModel::sparse_iid(0.3, 0.0, 1.0).unwrap();
        let spec = model.quant_spec(2).unwrap();
        let rows = run_convergence_study(&model, &spec, 0, &[100, 10_000], 20, 8).unwrap();
        let (short, long): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r.n == 100);
        let wins = short.iter().zip(&long).filter(|(s, l)| l.l1 < s.l1).count();
        assert!(wins >= 18, "{wins}");
        assert!(long.iter().all(|r| r.block_kl_per_bit.is_finite()));
    }

    #[test]
    fn table_has_header_and_rows() {
        let model = SourceModel::sparse_iid(0.5, 0.0, 1.0).unwrap();
        let spec = model.quant_spec(1).unwrap();
        let rows = run_convergence_study(&model, &spec, 0, &[50], 3, 1).unwrap();
        let text = format_convergence_table(&rows);
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with(CONVERGENCE_HEADER));
        assert!(run_convergence_study(&model, &spec, 0, &[], 3, 1).is_err());
    }
}
