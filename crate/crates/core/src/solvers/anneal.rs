//! Simulated annealing over grid sequences with single-coordinate moves.
//!
//! Each proposal changes one coordinate, which touches at most `k + 1` block
//! counts and one column of the residual, so a move costs `O(k + m)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding::{self, derive_seed};

use super::{fill_counts, CostSpec, Objective, RecoveryResult, TraceEntry};

/// Geometric cooling from `t_start` to `t_end` (both in bits) over
/// `proposals` moves, repeated `restarts` times from fresh random states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub t_start: f64,
    pub t_end: f64,
    /// Proposals per restart; `None` means `200 * n`.
    pub proposals: Option<usize>,
    pub restarts: usize,
    pub record_trace: bool,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            t_start: 1.0,
            t_end: 1e-3,
            proposals: None,
            restarts: 16,
            record_trace: false,
        }
    }
}

impl AnnealSchedule {
    pub fn proposals_for(&self, n: usize) -> usize {
        self.proposals.unwrap_or(200 * n)
    }

    fn validate(&self) -> Result<()> {
        let temps_ok = self.t_start >= 0.0
            && self.t_end >= 0.0
            && self.t_start.is_finite()
            && self.t_end.is_finite()
            && self.t_end <= self.t_start
            && (self.t_end > 0.0 || self.t_start == 0.0);
        if !temps_ok {
            return Err(Error::InvalidInput(format!(
                "temperatures must satisfy 0 < t_end <= t_start (or both zero), got {} and {}",
                self.t_start, self.t_end
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidInput(
                "at least one restart is required".into(),
            ));
        }
        Ok(())
    }

    fn temperature(&self, i: usize, total: usize) -> f64 {
        if self.t_start == 0.0 || total <= 1 {
            return self.t_end;
        }
        let frac = i as f64 / (total - 1) as f64;
        self.t_start * (self.t_end / self.t_start).powf(frac)
    }
}

fn xlog2x(c: u64) -> f64 {
    if c == 0 {
        0.0
    } else {
        let c = c as f64;
        c * c.log2()
    }
}

/// Mutable annealing state with incrementally maintained cost pieces.
struct Chain<'a> {
    spec: &'a CostSpec,
    q: usize,
    windows: usize,
    symbols: Vec<usize>,
    counts: Vec<u64>,
    ctx: Vec<u64>,
    /// L-MEP: `sum_ctx f(C) - sum_block f(c)` with `f(c) = c log2 c`;
    /// A-MEP: `sum_block w c`. The structure term is `acc / windows`.
    acc: f64,
    residual: Vec<f64>,
    residual_sq: f64,
    column_norms: Vec<f64>,
    xlogx: Vec<f64>,
}

impl<'a> Chain<'a> {
    fn new(spec: &'a CostSpec, symbols: Vec<usize>) -> Self {
        let q = spec.alphabet().len();
        let windows = spec.windows();
        let a = spec.sensing().matrix();
        let column_norms = (0..spec.n())
            .map(|j| a.column(j).iter().map(|v| v * v).sum())
            .collect();
        let mut chain = Self {
            spec,
            q,
            windows,
            symbols,
            counts: vec![0; q.pow(spec.k() as u32 + 1)],
            ctx: vec![0; q.pow(spec.k() as u32)],
            acc: 0.0,
            residual: vec![0.0; spec.sensing().m()],
            residual_sq: 0.0,
            column_norms,
            xlogx: (0..=windows as u64).map(xlog2x).collect(),
        };
        chain.resync();
        chain
    }

    /// Recomputes the accumulated pieces from scratch to shed float drift.
    fn resync(&mut self) {
        fill_counts(
            &self.symbols,
            self.spec.k(),
            self.spec.alphabet(),
            &mut self.counts,
            &mut self.ctx,
        );
        self.acc = match self.spec.objective() {
            Objective::Lmep => {
                self.ctx
                    .iter()
                    .map(|&c| self.xlogx[c as usize])
                    .sum::<f64>()
                    - self
                        .counts
                        .iter()
                        .map(|&c| self.xlogx[c as usize])
                        .sum::<f64>()
            }
            Objective::Amep(w) => self
                .counts
                .iter()
                .zip(w.weights())
                .map(|(&c, &wi)| c as f64 * wi)
                .sum(),
        };
        let values: Vec<f64> = self.symbols.iter().map(|&s| self.value(s)).collect();
        crate::sensing::residual_into(
            self.spec.sensing().matrix(),
            &values,
            self.spec.y(),
            &mut self.residual,
        );
        self.residual_sq = self.residual.iter().map(|r| r * r).sum();
    }

    fn value(&self, s: usize) -> f64 {
        self.spec.alphabet().value(s)
    }

    fn cost(&self) -> f64 {
        self.acc / self.windows as f64 + self.spec.residual_scale() * self.residual_sq
    }

    /// Windows `t` with `t <= j <= t + k` among `0..windows`.
    fn affected(&self, j: usize) -> std::ops::Range<usize> {
        let k = self.spec.k();
        let lo = j.saturating_sub(k);
        let hi = (j + 1).min(self.windows);
        lo..hi.max(lo)
    }

    fn update_window(&mut self, t: usize, add: bool) {
        let k = self.spec.k();
        let code = self.spec.alphabet().encode_block(&self.symbols[t..=t + k]);
        let ctx = code / self.q;
        let (c, cc) = (self.counts[code] as usize, self.ctx[ctx] as usize);
        match self.spec.objective() {
            Objective::Lmep => {
                let f = &self.xlogx;
                if add {
                    self.acc += (f[cc + 1] - f[cc]) - (f[c + 1] - f[c]);
                } else {
                    self.acc += (f[cc - 1] - f[cc]) - (f[c - 1] - f[c]);
                }
            }
            Objective::Amep(w) => {
                if add {
                    self.acc += w.weight(code);
                } else {
                    self.acc -= w.weight(code);
                }
            }
        }
        if add {
            self.counts[code] += 1;
            self.ctx[ctx] += 1;
        } else {
            self.counts[code] -= 1;
            self.ctx[ctx] -= 1;
        }
    }

    fn set_symbol(&mut self, j: usize, s: usize) {
        for t in self.affected(j) {
            self.update_window(t, false);
        }
        self.symbols[j] = s;
        for t in self.affected(j) {
            self.update_window(t, true);
        }
    }

    /// Proposes `u_j <- s`; returns the cost change and leaves the structure
    /// part applied. Call `commit` or `revert` afterwards.
    fn propose(&mut self, j: usize, s: usize) -> (f64, f64) {
        let old_structure = self.acc;
        let delta = self.value(s) - self.value(self.symbols[j]);
        let dot: f64 = self
            .residual
            .iter()
            .zip(self.spec.sensing().matrix().column(j).iter())
            .map(|(r, a)| r * a)
            .sum();
        let d_residual_sq = 2.0 * delta * dot + delta * delta * self.column_norms[j];
        self.set_symbol(j, s);
        let d_structure = (self.acc - old_structure) / self.windows as f64;
        (
            d_structure + self.spec.residual_scale() * d_residual_sq,
            d_residual_sq,
        )
    }

    fn commit(&mut self, j: usize, delta: f64, d_residual_sq: f64) {
        if delta != 0.0 {
            let column = self.spec.sensing().matrix().column(j);
            for (r, &a) in self.residual.iter_mut().zip(column.iter()) {
                *r += a * delta;
            }
        }
        self.residual_sq += d_residual_sq;
    }
}

/// One annealing run from `start`; returns the best state seen.
fn run(
    spec: &CostSpec,
    schedule: &AnnealSchedule,
    start: Vec<usize>,
    rng: &mut seeding::StreamRng,
    trace: &mut Vec<TraceEntry>,
) -> Vec<usize> {
    let n = spec.n();
    let q = spec.alphabet().len();
    let total = schedule.proposals_for(n);
    let mut chain = Chain::new(spec, start);
    let mut current = chain.cost();
    let mut best_cost = current;
    let mut best = chain.symbols.clone();
    if q < 2 {
        return best;
    }
    for i in 0..total {
        let temperature = schedule.temperature(i, total);
        let j = rng.random_range(0..n);
        let old = chain.symbols[j];
        // uniform over the other q - 1 symbols
        let mut s = rng.random_range(0..q - 1);
        if s >= old {
            s += 1;
        }
        let acc_before = chain.acc;
        let value_delta = chain.value(s) - chain.value(old);
        let (delta, d_residual_sq) = chain.propose(j, s);
        let accept = delta <= 0.0
            || (temperature > 0.0 && rng.random::<f64>() < (-delta / temperature).exp());
        if accept && !(temperature == 0.0 && delta == 0.0) {
            chain.commit(j, value_delta, d_residual_sq);
            current += delta;
            if schedule.record_trace {
                trace.push(TraceEntry {
                    proposal: i,
                    coordinate: j,
                    value: chain.value(s),
                    cost: current,
                });
            }
        } else {
            chain.set_symbol(j, old);
            chain.acc = acc_before;
        }
        if (i + 1) % n == 0 {
            chain.resync();
            current = chain.cost();
        }
        if current < best_cost {
            best_cost = current;
            best.clone_from(&chain.symbols);
        }
    }
    best
}

/// Anneals from independent uniformly random starts, one per restart, and
/// returns the restart whose best state has the lowest canonical cost.
///
/// Restart `r` uses the stream `derive_seed(seed, [r])`, so raising the
/// restart count only appends runs and can never worsen the result.
pub fn solve_anneal(
    spec: &CostSpec,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<RecoveryResult> {
    solve(spec, schedule, seed, None)
}

/// Like [`solve_anneal`] but every restart begins at `start`.
pub fn solve_anneal_from(
    spec: &CostSpec,
    schedule: &AnnealSchedule,
    seed: u64,
    start: &[usize],
) -> Result<RecoveryResult> {
    if start.len() != spec.n() || start.iter().any(|&s| s >= spec.alphabet().len()) {
        return Err(Error::InvalidInput(
            "start state must be a full sequence of alphabet indices".into(),
        ));
    }
    solve(spec, schedule, seed, Some(start))
}

fn solve(
    spec: &CostSpec,
    schedule: &AnnealSchedule,
    seed: u64,
    start: Option<&[usize]>,
) -> Result<RecoveryResult> {
    schedule.validate()?;
    let n = spec.n();
    let q = spec.alphabet().len();
    let mut best: Option<(f64, Vec<usize>, Vec<TraceEntry>)> = None;
    for r in 0..schedule.restarts {
        let mut rng = seeding::stream(derive_seed(seed, &[r as u64]));
        let init = match start {
            Some(s) => s.to_vec(),
            None => (0..n).map(|_| rng.random_range(0..q)).collect(),
        };
        let mut trace = Vec::new();
        let symbols = run(spec, schedule, init, &mut rng, &mut trace);
        let cost = spec.evaluate_symbols(&symbols)?.total;
        if best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
            best = Some((cost, symbols, trace));
        }
    }
    let (_, symbols, trace) = best.expect("at least one restart");
    spec.result_from_symbols(&symbols, seed, trace)
}
