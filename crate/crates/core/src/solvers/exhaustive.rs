//! Exact minimization by enumerating every grid sequence.

use crate::error::{Error, Result};
use crate::quantization::ENUMERATION_LIMIT;

use super::{CostSpec, RecoveryResult};

struct Search<'a> {
    spec: &'a CostSpec,
    n: usize,
    q: usize,
    symbols: Vec<usize>,
    counts: Vec<u64>,
    ctx: Vec<u64>,
    /// `partial[j]` holds `sum_{i<j} A_i u_i`, accumulated in the same order
    /// as the canonical residual so leaf costs are bit-identical.
    partial: Vec<Vec<f64>>,
    residual: Vec<f64>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn descend(&mut self, j: usize) {
        if j == self.n {
            let structure = self.spec.structure_from_counts(&self.counts, &self.ctx);
            for ((r, &p), &y) in self
                .residual
                .iter_mut()
                .zip(&self.partial[j])
                .zip(self.spec.y())
            {
                *r = p - y;
            }
            let cost = structure + self.spec.residual_term_from(&self.residual);
            // strict comparison: the first minimizer in lexicographic order wins
            if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, self.symbols.clone()));
            }
            return;
        }
        let k = self.spec.k();
        // the window ending at j, if it is one of the n - k - 1 counted windows
        let closes_window = j >= k && j + 2 <= self.n;
        for s in 0..self.q {
            self.symbols[j] = s;
            let value = self.spec.alphabet().value(s);
            let (done, rest) = self.partial.split_at_mut(j + 1);
            let (prev, next) = (&done[j], &mut rest[0]);
            next.copy_from_slice(prev);
            if value != 0.0 {
                let column = self.spec.sensing().matrix().column(j);
                for (o, &aij) in next.iter_mut().zip(column.iter()) {
                    *o += aij * value;
                }
            }
            let code = closes_window.then(|| {
                let code = self.spec.alphabet().encode_block(&self.symbols[j - k..=j]);
                self.counts[code] += 1;
                self.ctx[code / self.q] += 1;
                code
            });
            self.descend(j + 1);
            if let Some(code) = code {
                self.counts[code] -= 1;
                self.ctx[code / self.q] -= 1;
            }
        }
    }
}

/// Global minimizer over all `|X_b|^n` sequences; ties go to the
/// lexicographically smallest value sequence.
pub fn solve_exhaustive(spec: &CostSpec) -> Result<RecoveryResult> {
    let n = spec.n();
    let q = spec.alphabet().len();
    let size = (q as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "exhaustive search space",
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let k = spec.k();
    let m = spec.sensing().m();
    let mut search = Search {
        spec,
        n,
        q,
        symbols: vec![0; n],
        counts: vec![0; q.pow(k as u32 + 1)],
        ctx: vec![0; q.pow(k as u32)],
        partial: vec![vec![0.0; m]; n + 1],
        residual: vec![0.0; m],
        best: None,
    };
    search.descend(0);
    let (_, best) = search
        .best
        .ok_or_else(|| Error::Numeric("empty search space".into()))?;
    spec.result_from_symbols(&best, spec.sensing().seed(), Vec::new())
}
