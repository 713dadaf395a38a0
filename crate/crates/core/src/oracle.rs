//! Independent verification: exhaustive grid search over feasible channels
//! (deliberately dumb, no closed forms), seeded Monte-Carlo protocol
//! simulation, and exact-rational cross-checks of the float path.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::comb::Compositions;
use crate::mechanisms::Mechanism;
use crate::model::DataModel;
use crate::privacy::privacy_single;
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("grid search needs {required} candidates, above the cap of {cap}")]
    SearchSpaceTooLarge { required: u64, cap: u64 },
    #[error("grid step does not divide 1: {detail}")]
    BadGridStep { detail: String },
    #[error("instance has no predicate map")]
    NoPredicate,
}

/// Grid-search configuration. The step must divide 1; every candidate row
/// keeps at least the feasibility mass on its function label.
#[derive(Debug, Clone)]
pub struct SearchConfig<T> {
    pub grid_step: T,
    pub rho: T,
    /// Cap on the total number of candidate mechanisms.
    pub max_cells: u64,
    pub workers: usize,
}

impl<T: Scalar> SearchConfig<T> {
    pub fn new(grid_step: T, rho: T) -> Self {
        SearchConfig {
            grid_step,
            rho,
            max_cells: 50_000_000,
            workers: 1,
        }
    }
}

/// Result of an exhaustive feasible-mechanism search.
#[derive(Debug, Clone)]
pub struct SearchOutcome<T> {
    pub best: Mechanism<T>,
    pub best_value: T,
    /// Grid-resolution allowance: `r * k * step`. The true optimum exceeds
    /// `best_value` by at most this much.
    pub slack: T,
    pub candidates: u64,
}

fn grid_units<T: Scalar>(config: &SearchConfig<T>) -> Result<u64, OracleError> {
    if config.grid_step <= T::zero() || config.grid_step > T::one() {
        return Err(OracleError::BadGridStep {
            detail: format!("step {} outside (0, 1]", config.grid_step),
        });
    }
    let approx = 1.0 / config.grid_step.to_f64_lossy();
    let units = approx.round();
    if !(1.0..=1e9).contains(&units) {
        return Err(OracleError::BadGridStep {
            detail: format!("step {} yields {approx} cells", config.grid_step),
        });
    }
    let units = units as u64;
    let reconstructed = T::from_ratio(1, units);
    if !reconstructed.close_to(&config.grid_step) {
        return Err(OracleError::BadGridStep {
            detail: format!("step {} is not 1/{units}", config.grid_step),
        });
    }
    Ok(units)
}

/// Candidate rows for one diagonal position: every grid row whose diagonal
/// entry is feasible at level `rho`.
fn candidate_rows<T: Scalar>(units: u64, k: usize, diag: usize, rho: &T) -> Vec<Vec<T>> {
    let mut min_diag = units;
    for m in 0..=units {
        if T::from_ratio(m, units) >= rho.clone() - T::tolerance() {
            min_diag = m;
            break;
        }
    }
    let mut rows = Vec::new();
    for m in min_diag..=units {
        for off in Compositions::new((units - m) as usize, k - 1) {
            let mut row = Vec::with_capacity(k);
            let mut off_iter = off.iter();
            for i in 0..k {
                if i == diag {
                    row.push(T::from_ratio(m, units));
                } else {
                    row.push(T::from_ratio(*off_iter.next().unwrap() as u64, units));
                }
            }
            rows.push(row);
        }
    }
    rows
}

enum Objective<'a> {
    Data,
    Predicate { h: &'a [usize], m: usize },
}

fn evaluate<T: Scalar>(
    model: &DataModel<T>,
    rows: &[&Vec<T>],
    objective: &Objective<'_>,
    scratch: &mut Vec<T>,
) -> T {
    let k = model.k();
    let px = model.px();
    let mut success = T::zero();
    match objective {
        Objective::Data => {
            for i in 0..k {
                let mut best = px[0].clone() * rows[0][i].clone();
                for (x, row) in rows.iter().enumerate().skip(1) {
                    let score = px[x].clone() * row[i].clone();
                    if score > best {
                        best = score;
                    }
                }
                success = success + best;
            }
        }
        Objective::Predicate { h, m } => {
            for i in 0..k {
                scratch.clear();
                scratch.resize(*m, T::zero());
                for (x, row) in rows.iter().enumerate() {
                    let j = h[x];
                    scratch[j] = scratch[j].clone() + px[x].clone() * row[i].clone();
                }
                let mut best = scratch[0].clone();
                for mass in scratch.iter().skip(1) {
                    if *mass > best {
                        best = mass.clone();
                    }
                }
                success = success + best;
            }
        }
    }
    T::one() - success
}

/// Exhaustive maximization of single-response privacy over all grid-feasible
/// mechanisms. Independent of every closed form in this crate: candidates
/// are scored by direct enumeration of the MAP success mass.
pub fn search_optimal_mechanism<T: Scalar + Send + Sync>(
    model: &DataModel<T>,
    config: &SearchConfig<T>,
) -> Result<SearchOutcome<T>, OracleError> {
    search(model, config, Objective::Data)
}

/// Same search with the predicate-privacy objective.
pub fn search_optimal_predicate<T: Scalar + Send + Sync>(
    model: &DataModel<T>,
    config: &SearchConfig<T>,
) -> Result<SearchOutcome<T>, OracleError> {
    let h = model.h().ok_or(OracleError::NoPredicate)?;
    let m = model.m().expect("predicate implies m");
    search(model, config, Objective::Predicate { h, m })
}

fn search<T: Scalar + Send + Sync>(
    model: &DataModel<T>,
    config: &SearchConfig<T>,
    objective: Objective<'_>,
) -> Result<SearchOutcome<T>, OracleError> {
    let units = grid_units(config)?;
    let r = model.len();
    let k = model.k();
    let per_cell: Vec<Vec<Vec<T>>> = (0..k)
        .map(|diag| candidate_rows(units, k, diag, &config.rho))
        .collect();
    let per_row_counts: Vec<u64> = model
        .f()
        .iter()
        .map(|&fx| per_cell[fx].len() as u64)
        .collect();
    let mut total: u64 = 1;
    for &count in &per_row_counts {
        total = total.saturating_mul(count);
    }
    if total > config.max_cells {
        return Err(OracleError::SearchSpaceTooLarge {
            required: total,
            cap: config.max_cells,
        });
    }

    let first_row_cell = model.f()[0];
    let first_count = per_cell[first_row_cell].len();
    let workers = config.workers.max(1).min(first_count.max(1));
    let chunks: Vec<(usize, usize)> = split_ranges(first_count, workers);

    let results: Vec<(T, Vec<usize>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|&(start, end)| {
                let per_cell = &per_cell;
                let objective = &objective;
                scope.spawn(move || {
                    search_chunk(model, per_cell, objective, start, end)
                })
            })
            .collect();
        handles.into_iter().filter_map(|h| h.join().unwrap()).collect()
    });

    // Deterministic merge: workers are ordered by chunk, strict improvement
    // keeps the earliest maximizer, matching the sequential scan.
    let (mut best_value, mut best_sel) = results.first().cloned().expect("nonempty search");
    for (value, sel) in results.into_iter().skip(1) {
        if value > best_value {
            best_value = value;
            best_sel = sel;
        }
    }

    let rows: Vec<Vec<T>> = best_sel
        .iter()
        .enumerate()
        .map(|(x, &sel)| per_cell[model.f()[x]][sel].clone())
        .collect();
    let best = Mechanism::from_rows(rows).expect("grid rows are stochastic");
    let slack = T::from_usize(r * k).expect("small product") * config.grid_step.clone();
    Ok(SearchOutcome {
        best,
        best_value,
        slack,
        candidates: total,
    })
}

fn split_ranges(total: usize, parts: usize) -> Vec<(usize, usize)> {
    let parts = parts.max(1);
    let base = total / parts;
    let extra = total % parts;
    let mut ranges = Vec::new();
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        if len == 0 {
            continue;
        }
        ranges.push((start, start + len));
        start += len;
    }
    if ranges.is_empty() {
        ranges.push((0, total));
    }
    ranges
}

fn search_chunk<T: Scalar>(
    model: &DataModel<T>,
    per_cell: &[Vec<Vec<T>>],
    objective: &Objective<'_>,
    first_start: usize,
    first_end: usize,
) -> Option<(T, Vec<usize>)> {
    let r = model.len();
    let counts: Vec<usize> = model.f().iter().map(|&fx| per_cell[fx].len()).collect();
    let mut sel = vec![0usize; r];
    sel[0] = first_start;
    let mut scratch = Vec::new();
    let mut best: Option<(T, Vec<usize>)> = None;
    loop {
        let rows: Vec<&Vec<T>> = sel
            .iter()
            .enumerate()
            .map(|(x, &s)| &per_cell[model.f()[x]][s])
            .collect();
        let value = evaluate(model, &rows, objective, &mut scratch);
        match &best {
            Some((current, _)) if value <= *current => {}
            _ => best = Some((value, sel.clone())),
        }
        // Odometer with the first digit confined to this chunk.
        let mut pos = r;
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            sel[pos] += 1;
            let limit = if pos == 0 { first_end } else { counts[pos] };
            if sel[pos] < limit {
                break;
            }
            sel[pos] = if pos == 0 { first_end } else { 0 };
            if pos == 0 {
                return best;
            }
        }
    }
}

/// Outcome of a seeded Monte-Carlo run of the query-response protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub trials: u64,
    pub errors: u64,
    pub empirical_error: f64,
    /// Binomial standard error of the empirical frequency.
    pub std_error: f64,
    pub seed: u64,
    pub workers: usize,
    /// RNG algorithm identifier pinned into reports.
    pub rng_algorithm: &'static str,
    pub responses_per_trial: usize,
}

impl SimResult {
    /// Whether the empirical frequency sits within `sigmas` standard errors
    /// of an exact value; a consistency flag, not a hard guarantee.
    pub fn within_sigma(&self, exact: f64, sigmas: f64) -> bool {
        (self.empirical_error - exact).abs() <= sigmas * self.std_error
    }
}

/// Pinned RNG identity for reproducibility metadata.
pub const RNG_ALGORITHM: &str = "chacha12(rand_chacha-0.9)";

/// Simulates `trials` independent protocol rounds: draw a data symbol, draw
/// each response through its channel, apply the MAP rule per sample, count
/// errors. Reproducible for a fixed `(seed, workers)` pair: worker `w` uses
/// the ChaCha stream `w` of the seed.
pub fn simulate_protocol(
    model: &DataModel<f64>,
    mechs: &[Mechanism<f64>],
    trials: u64,
    seed: u64,
    workers: usize,
) -> SimResult {
    for w in mechs {
        assert_eq!(w.n_rows(), model.len());
        assert_eq!(w.k(), model.k());
    }
    let px_cum = cumulative(model.px());
    let row_cums: Vec<Vec<Vec<f64>>> = mechs
        .iter()
        .map(|w| w.rows().iter().map(|row| cumulative(row)).collect())
        .collect();

    let workers = workers.max(1);
    let per_worker = split_trials(trials, workers);
    let errors: u64 = std::thread::scope(|scope| {
        let handles: Vec<_> = per_worker
            .iter()
            .enumerate()
            .map(|(widx, &count)| {
                let px_cum = &px_cum;
                let row_cums = &row_cums;
                scope.spawn(move || {
                    let mut rng = ChaCha12Rng::seed_from_u64(seed);
                    rng.set_stream(widx as u64);
                    simulate_chunk(model, mechs, px_cum, row_cums, count, &mut rng)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    });

    let empirical_error = errors as f64 / trials as f64;
    let std_error = (empirical_error * (1.0 - empirical_error) / trials as f64).sqrt();
    SimResult {
        trials,
        errors,
        empirical_error,
        std_error,
        seed,
        workers,
        rng_algorithm: RNG_ALGORITHM,
        responses_per_trial: mechs.len(),
    }
}

fn split_trials(total: u64, workers: usize) -> Vec<u64> {
    let w = workers as u64;
    (0..w).map(|i| total / w + u64::from(i < total % w)).collect()
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    row.iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Inverse-CDF draw; boundary ties resolve toward the lower index.
fn sample_index(cum: &[f64], u: f64) -> usize {
    for (idx, &c) in cum.iter().enumerate() {
        if u <= c {
            return idx;
        }
    }
    cum.len() - 1
}

fn simulate_chunk(
    model: &DataModel<f64>,
    mechs: &[Mechanism<f64>],
    px_cum: &[f64],
    row_cums: &[Vec<Vec<f64>>],
    trials: u64,
    rng: &mut ChaCha12Rng,
) -> u64 {
    let px = model.px();
    let mut errors = 0u64;
    let mut responses = vec![0usize; mechs.len()];
    for _ in 0..trials {
        let x = sample_index(px_cum, rng.random::<f64>());
        for (t, cums) in row_cums.iter().enumerate() {
            responses[t] = sample_index(&cums[x], rng.random::<f64>());
        }
        // MAP decision evaluated per sample, never materialized as a table.
        let mut best = 0usize;
        let mut best_score = -1.0f64;
        for (cand, &prior) in px.iter().enumerate() {
            let mut score = prior;
            for (t, &z) in responses.iter().enumerate() {
                score *= mechs[t].prob(z, cand);
                if score == 0.0 {
                    break;
                }
            }
            if score > best_score {
                best_score = score;
                best = cand;
            }
        }
        if best != x {
            errors += 1;
        }
    }
    errors
}

/// Exact privacy of a rational instance/channel pair. The float path must
/// agree with this value to within its tolerance.
pub fn rational_crosscheck(model: &DataModel<Rational>, w: &Mechanism<Rational>) -> Rational {
    privacy_single(model, w).value
}

/// Convenience: exact rational value as an `f64` for comparisons.
pub fn rational_to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}
