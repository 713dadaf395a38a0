//! Exact MAP estimation error for single and repeated independent responses,
//! predicate privacy, and function-recovery probability.
//!
//! Repeated responses are enumerated naively over response tuples up to a
//! cap; identically distributed repetitions instead iterate over response
//! count vectors with multinomial weights computed in log space, which keeps
//! the computation exact-to-rounding for large response counts.

use num_traits::Float;
use thiserror::Error;

use crate::comb::{ln_factorials, ln_multinomial, Compositions};
use crate::mechanisms::{AddNoiseMechanism, Mechanism};
use crate::model::{DataModel, SupportStats};
use crate::scalar::Scalar;

/// Default bound on naive response-tuple enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrivacyError {
    #[error("enumeration needs {required} tuples, above the cap of {cap}")]
    EnumerationTooLarge { required: u64, cap: u64 },
    #[error("instance has no predicate map")]
    NoPredicate,
}

/// How a privacy value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComputeMethod {
    NaiveEnumeration,
    TypeClass,
    ReducedToCellModes,
}

impl ComputeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ComputeMethod::NaiveEnumeration => "naive-enumeration",
            ComputeMethod::TypeClass => "type-class",
            ComputeMethod::ReducedToCellModes => "reduced-cell-modes",
        }
    }
}

/// Win and error masses for one response label (single-response reports).
/// `win_mass + error_mass` is the total probability of the response.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputStat<T> {
    pub response: usize,
    pub estimate: usize,
    pub win_mass: T,
    pub error_mass: T,
}

/// A lazily evaluated MAP decision rule: response tuples are mapped to
/// estimates on demand instead of materializing a `k^n` table.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionRule<T> {
    /// No responses: always answer the prior mode.
    Constant(usize),
    /// Single response: a direct response -> estimate table. For predicate
    /// reports the entries are predicate labels.
    Table(Vec<usize>),
    /// MAP over data symbols through per-response channels.
    RowLifted {
        weights: Vec<T>,
        channels: Vec<Vec<Vec<T>>>,
    },
    /// MAP over data symbols through one channel repeated `n` times.
    RowLiftedIid {
        weights: Vec<T>,
        channel: Vec<Vec<T>>,
        n: usize,
    },
    /// MAP over function cells through add-noise channels; estimates are the
    /// per-cell modes.
    CellModes {
        cell_mass: Vec<T>,
        representatives: Vec<usize>,
        channels: Vec<Vec<Vec<T>>>,
    },
    CellModesIid {
        cell_mass: Vec<T>,
        representatives: Vec<usize>,
        channel: Vec<Vec<T>>,
        n: usize,
    },
}

impl<T: Scalar> DecisionRule<T> {
    /// MAP estimate for a response tuple; ties break to the lowest index.
    pub fn estimate(&self, responses: &[usize]) -> usize {
        match self {
            DecisionRule::Constant(x) => *x,
            DecisionRule::Table(table) => {
                assert_eq!(responses.len(), 1);
                table[responses[0]]
            }
            DecisionRule::RowLifted { weights, channels } => {
                assert_eq!(responses.len(), channels.len());
                argmax_weighted(weights, |x| {
                    product(responses.iter().zip(channels).map(|(&i, ch)| &ch[x][i]))
                })
            }
            DecisionRule::RowLiftedIid {
                weights,
                channel,
                n,
            } => {
                assert_eq!(responses.len(), *n);
                argmax_weighted(weights, |x| {
                    product(responses.iter().map(|&i| &channel[x][i]))
                })
            }
            DecisionRule::CellModes {
                cell_mass,
                representatives,
                channels,
            } => {
                assert_eq!(responses.len(), channels.len());
                let j = argmax_weighted(cell_mass, |j| {
                    product(responses.iter().zip(channels).map(|(&i, ch)| &ch[j][i]))
                });
                representatives[j]
            }
            DecisionRule::CellModesIid {
                cell_mass,
                representatives,
                channel,
                n,
            } => {
                assert_eq!(responses.len(), *n);
                let j = argmax_weighted(cell_mass, |j| {
                    product(responses.iter().map(|&i| &channel[j][i]))
                });
                representatives[j]
            }
        }
    }
}

fn product<'a, T: Scalar>(factors: impl Iterator<Item = &'a T>) -> T {
    let mut acc = T::one();
    for f in factors {
        acc = acc * f.clone();
    }
    acc
}

fn argmax_weighted<T: Scalar>(weights: &[T], factor: impl Fn(usize) -> T) -> usize {
    let mut best = 0;
    let mut best_score: Option<T> = None;
    for (x, w) in weights.iter().enumerate() {
        let score = w.clone() * factor(x);
        match &best_score {
            Some(b) if score <= *b => {}
            _ => {
                best = x;
                best_score = Some(score);
            }
        }
    }
    best
}

/// The exact MAP estimation error of a mechanism (or several), together with
/// the achieving decision rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyReport<T> {
    /// Probability that the MAP estimator misses.
    pub value: T,
    /// `1 - value`.
    pub success: T,
    pub method: ComputeMethod,
    /// Per-response-label win masses; populated for single-response reports.
    pub per_output: Option<Vec<OutputStat<T>>>,
    pub rule: DecisionRule<T>,
}

impl<T: Scalar> PrivacyReport<T> {
    fn new(
        success: T,
        method: ComputeMethod,
        per_output: Option<Vec<OutputStat<T>>>,
        rule: DecisionRule<T>,
    ) -> Self {
        PrivacyReport {
            value: T::one() - success.clone(),
            success,
            method,
            per_output,
            rule,
        }
    }
}

/// Compensated accumulation that stays exact for exact scalars.
struct Accum<T: Scalar> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> Accum<T> {
    fn new() -> Self {
        Accum {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    fn add(&mut self, value: T) {
        let t = self.sum.clone() + value.clone();
        if self.sum.abs() >= value.abs() {
            self.compensation =
                self.compensation.clone() + ((self.sum.clone() - t.clone()) + value);
        } else {
            self.compensation =
                self.compensation.clone() + ((value - t.clone()) + self.sum.clone());
        }
        self.sum = t;
    }

    fn value(&self) -> T {
        self.sum.clone() + self.compensation.clone()
    }
}

/// The MAP estimate of the data symbol from one response: the symbol
/// maximizing `px(x) * W(response | x)`, lowest index on ties.
pub fn map_estimate<T: Scalar>(model: &DataModel<T>, w: &Mechanism<T>, response: usize) -> usize {
    assert_eq!(w.n_rows(), model.len());
    argmax_weighted(model.px(), |x| w.prob(response, x).clone())
}

/// Iterates all `k^n` response tuples.
struct Tuples {
    k: usize,
    current: Option<Vec<usize>>,
}

impl Tuples {
    fn new(k: usize, n: usize) -> Self {
        Tuples {
            k,
            current: Some(vec![0; n]),
        }
    }

    fn advance(&mut self) {
        let Some(current) = &mut self.current else {
            return;
        };
        for slot in current.iter_mut().rev() {
            *slot += 1;
            if *slot < self.k {
                return;
            }
            *slot = 0;
        }
        self.current = None;
    }
}

fn require_cap(k: usize, n: usize, cap: u64) -> Result<(), PrivacyError> {
    let required = (k as u64)
        .checked_pow(n as u32)
        .unwrap_or(u64::MAX);
    if required > cap {
        return Err(PrivacyError::EnumerationTooLarge { required, cap });
    }
    Ok(())
}

fn prior_report<T: Scalar>(model: &DataModel<T>, stats_mode: usize) -> PrivacyReport<T> {
    let success = model.px()[stats_mode].clone();
    PrivacyReport::new(
        success,
        ComputeMethod::NaiveEnumeration,
        None,
        DecisionRule::Constant(stats_mode),
    )
}

fn mode_index<T: Scalar>(model: &DataModel<T>) -> usize {
    let mut best = 0;
    for (x, p) in model.px().iter().enumerate() {
        if *p > model.px()[best] {
            best = x;
        }
    }
    best
}

/// The exact privacy of a single response through a row-lifted channel:
/// one minus the summed per-response maximal posterior masses.
pub fn privacy_single<T: Scalar>(model: &DataModel<T>, w: &Mechanism<T>) -> PrivacyReport<T> {
    assert_eq!(w.n_rows(), model.len());
    let k = w.k();
    let mut success = Accum::new();
    let mut per_output = Vec::with_capacity(k);
    let mut table = Vec::with_capacity(k);
    for i in 0..k {
        let mut win = model.px()[0].clone() * w.prob(i, 0).clone();
        let mut winner = 0usize;
        let mut column = Accum::new();
        column.add(win.clone());
        for x in 1..model.len() {
            let score = model.px()[x].clone() * w.prob(i, x).clone();
            column.add(score.clone());
            if score > win {
                win = score;
                winner = x;
            }
        }
        success.add(win.clone());
        per_output.push(OutputStat {
            response: i,
            estimate: winner,
            win_mass: win.clone(),
            error_mass: column.value() - win,
        });
        table.push(winner);
    }
    let report = PrivacyReport::new(
        success.value(),
        ComputeMethod::NaiveEnumeration,
        Some(per_output),
        DecisionRule::Table(table),
    );
    debug_assert!(rule_error_single(model, w, &report.rule)
        .close_to(&report.value)
        || T::tolerance() == T::zero());
    report
}

fn rule_error_single<T: Scalar>(
    model: &DataModel<T>,
    w: &Mechanism<T>,
    rule: &DecisionRule<T>,
) -> T {
    let mut err = Accum::new();
    for i in 0..w.k() {
        let winner = rule.estimate(&[i]);
        for x in 0..model.len() {
            if x != winner {
                err.add(model.px()[x].clone() * w.prob(i, x).clone());
            }
        }
    }
    err.value()
}

/// Exact privacy of `n` conditionally independent responses by naive
/// enumeration over all response tuples.
pub fn privacy_multi_naive<T: Scalar>(
    model: &DataModel<T>,
    ws: &[Mechanism<T>],
    cap: u64,
) -> Result<PrivacyReport<T>, PrivacyError> {
    if ws.is_empty() {
        return Ok(prior_report(model, mode_index(model)));
    }
    let k = model.k();
    for w in ws {
        assert_eq!(w.n_rows(), model.len());
        assert_eq!(w.k(), k);
    }
    require_cap(k, ws.len(), cap)?;

    let mut success = Accum::new();
    let mut tuples = Tuples::new(k, ws.len());
    while let Some(tuple) = &tuples.current {
        let mut best: Option<T> = None;
        for x in 0..model.len() {
            let mut score = model.px()[x].clone();
            for (t, &i) in tuple.iter().enumerate() {
                score = score * ws[t].prob(i, x).clone();
                if score == T::zero() {
                    break;
                }
            }
            match &best {
                Some(b) if score <= *b => {}
                _ => best = Some(score),
            }
        }
        success.add(best.expect("nonempty data alphabet"));
        tuples.advance();
    }
    let rule = DecisionRule::RowLifted {
        weights: model.px().to_vec(),
        channels: ws.iter().map(|w| w.rows().to_vec()).collect(),
    };
    Ok(PrivacyReport::new(
        success.value(),
        ComputeMethod::NaiveEnumeration,
        None,
        rule,
    ))
}

/// Exact privacy of `n` i.i.d. responses through one channel, iterating over
/// response count vectors instead of tuples.
pub fn privacy_iid<T: Scalar + Float>(
    model: &DataModel<T>,
    w: &Mechanism<T>,
    n: usize,
    cap: u64,
) -> Result<PrivacyReport<T>, PrivacyError> {
    if n == 0 {
        return Ok(prior_report(model, mode_index(model)));
    }
    assert_eq!(w.n_rows(), model.len());
    let k = model.k();
    let success = typeclass_sum(n, k, cap, model.px(), |x| w.row(x))?;
    let rule = DecisionRule::RowLiftedIid {
        weights: model.px().to_vec(),
        channel: w.rows().to_vec(),
        n,
    };
    Ok(PrivacyReport::new(
        success,
        ComputeMethod::TypeClass,
        None,
        rule,
    ))
}

/// Shared type-class kernel: sum over count vectors of
/// `multinomial(n; c) * max_idx weight(idx) * prod_i channel(idx)[i]^(c_i)`.
fn typeclass_sum<'a, T, F>(
    n: usize,
    k: usize,
    cap: u64,
    weights: &[T],
    channel_row: F,
) -> Result<T, PrivacyError>
where
    T: Scalar + Float,
    F: Fn(usize) -> &'a [T],
    T: 'a,
{
    let types = Compositions::count(n as u64, k as u64).unwrap_or(u64::MAX);
    if types > cap {
        return Err(PrivacyError::EnumerationTooLarge {
            required: types,
            cap,
        });
    }
    let ln_fact = ln_factorials(n);
    let mut success = Accum::new();
    for counts in Compositions::new(n, k) {
        let weight: T = T::from(ln_multinomial(&ln_fact, n, &counts).exp())
            .expect("multinomial weight fits the scalar");
        let mut best: Option<T> = None;
        for (idx, prior) in weights.iter().enumerate() {
            let row = channel_row(idx);
            let mut score = *prior;
            for (i, &c) in counts.iter().enumerate() {
                if c > 0 {
                    score = score * row[i].powi(c as i32);
                    if score == T::zero() {
                        break;
                    }
                }
            }
            match best {
                Some(b) if score <= b => {}
                _ => best = Some(score),
            }
        }
        success.add(weight * best.expect("nonempty maximization domain"));
    }
    Ok(success.value())
}

/// Exact privacy of independent responses; dispatches to the type-class path
/// when all channels are identical and to naive enumeration otherwise.
pub fn privacy_multi<T: Scalar + Float>(
    model: &DataModel<T>,
    ws: &[Mechanism<T>],
    cap: u64,
) -> Result<PrivacyReport<T>, PrivacyError> {
    if ws.len() >= 2 && ws.windows(2).all(|pair| pair[0] == pair[1]) {
        return privacy_iid(model, &ws[0], ws.len(), cap);
    }
    privacy_multi_naive(model, ws, cap)
}

/// Naive-enumeration privacy of independent add-noise responses. The MAP
/// maximization collapses to the per-cell modes.
pub fn privacy_multi_addnoise_naive<T: Scalar>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
    vs: &[AddNoiseMechanism<T>],
    cap: u64,
) -> Result<PrivacyReport<T>, PrivacyError> {
    if vs.is_empty() {
        return Ok(prior_report(model, stats.mode));
    }
    let k = model.k();
    for v in vs {
        assert_eq!(v.k(), k);
    }
    require_cap(k, vs.len(), cap)?;
    let cell_mass = stats.cell_mode_masses.clone();

    let mut success = Accum::new();
    let mut tuples = Tuples::new(k, vs.len());
    while let Some(tuple) = &tuples.current {
        let mut best: Option<T> = None;
        for (j, mass) in cell_mass.iter().enumerate() {
            let mut score = mass.clone();
            for (t, &i) in tuple.iter().enumerate() {
                score = score * vs[t].prob(i, j).clone();
                if score == T::zero() {
                    break;
                }
            }
            match &best {
                Some(b) if score <= *b => {}
                _ => best = Some(score),
            }
        }
        success.add(best.expect("nonempty response alphabet"));
        tuples.advance();
    }
    let rule = DecisionRule::CellModes {
        cell_mass,
        representatives: stats.cell_modes.clone(),
        channels: vs.iter().map(|v| v.rows().to_vec()).collect(),
    };
    Ok(PrivacyReport::new(
        success.value(),
        ComputeMethod::NaiveEnumeration,
        None,
        rule,
    ))
}

/// Exact privacy of `n` i.i.d. add-noise responses via the reduction to the
/// cell-mode chain: privacy equals one minus the total cell-mode mass times
/// the success probability of distinguishing the normalized cell-mode pmf
/// through the channel.
pub fn privacy_iid_addnoise<T: Scalar + Float>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
    v: &AddNoiseMechanism<T>,
    n: usize,
    cap: u64,
) -> Result<PrivacyReport<T>, PrivacyError> {
    if n == 0 {
        return Ok(prior_report(model, stats.mode));
    }
    assert_eq!(v.k(), model.k());
    let cell_mass = stats.cell_mode_masses.clone();
    let total = stats.cell_mode_mass_sum;
    let reduced_pmf: Vec<T> = cell_mass.iter().map(|m| *m / total).collect();
    let reduced_success = typeclass_sum(n, model.k(), cap, &reduced_pmf, |j| v.row(j))?;
    let success = total * reduced_success;
    let rule = DecisionRule::CellModesIid {
        cell_mass,
        representatives: stats.cell_modes.clone(),
        channel: v.rows().to_vec(),
        n,
    };
    Ok(PrivacyReport::new(
        success,
        ComputeMethod::ReducedToCellModes,
        None,
        rule,
    ))
}

/// Exact privacy of independent add-noise responses; identical channels use
/// the reduced i.i.d. path.
pub fn privacy_multi_addnoise<T: Scalar + Float>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
    vs: &[AddNoiseMechanism<T>],
    cap: u64,
) -> Result<PrivacyReport<T>, PrivacyError> {
    if vs.len() >= 2 && vs.windows(2).all(|pair| pair[0] == pair[1]) {
        return privacy_iid_addnoise(model, stats, &vs[0], vs.len(), cap);
    }
    privacy_multi_addnoise_naive(model, stats, vs, cap)
}

/// Exact predicate privacy of a single response: one minus the summed
/// per-response maximal predicate-label masses.
pub fn predicate_privacy<T: Scalar>(
    model: &DataModel<T>,
    w: &Mechanism<T>,
) -> Result<PrivacyReport<T>, PrivacyError> {
    let h = model.h().ok_or(PrivacyError::NoPredicate)?;
    let m = model.m().expect("predicate implies m");
    assert_eq!(w.n_rows(), model.len());
    let k = w.k();
    let mut success = Accum::new();
    let mut per_output = Vec::with_capacity(k);
    let mut table = Vec::with_capacity(k);
    for i in 0..k {
        let mut label_mass = vec![T::zero(); m];
        for (x, &j) in h.iter().enumerate() {
            label_mass[j] =
                label_mass[j].clone() + model.px()[x].clone() * w.prob(i, x).clone();
        }
        let mut winner = 0usize;
        let mut column = T::zero();
        for (j, mass) in label_mass.iter().enumerate() {
            column = column + mass.clone();
            if j > 0 && *mass > label_mass[winner] {
                winner = j;
            }
        }
        success.add(label_mass[winner].clone());
        per_output.push(OutputStat {
            response: i,
            estimate: winner,
            win_mass: label_mass[winner].clone(),
            error_mass: column - label_mass[winner].clone(),
        });
        table.push(winner);
    }
    Ok(PrivacyReport::new(
        success.value(),
        ComputeMethod::NaiveEnumeration,
        Some(per_output),
        DecisionRule::Table(table),
    ))
}

/// Exact probability that the MAP estimator of the function value recovers
/// it from `n` independent responses.
pub fn function_recovery_probability<T: Scalar>(
    model: &DataModel<T>,
    ws: &[Mechanism<T>],
    cap: u64,
) -> Result<T, PrivacyError> {
    let k = model.k();
    if ws.is_empty() {
        let mut best = T::zero();
        for j in 0..k {
            let mut mass = T::zero();
            for x in model.cell(j) {
                mass = mass + model.px()[x].clone();
            }
            if mass > best {
                best = mass;
            }
        }
        return Ok(best);
    }
    for w in ws {
        assert_eq!(w.n_rows(), model.len());
        assert_eq!(w.k(), k);
    }
    require_cap(k, ws.len(), cap)?;

    let mut success = Accum::new();
    let mut tuples = Tuples::new(k, ws.len());
    while let Some(tuple) = &tuples.current {
        let mut best: Option<T> = None;
        for j in 0..k {
            let mut mass = Accum::new();
            for x in model.cell(j) {
                let mut score = model.px()[x].clone();
                for (t, &i) in tuple.iter().enumerate() {
                    score = score * ws[t].prob(i, x).clone();
                    if score == T::zero() {
                        break;
                    }
                }
                mass.add(score);
            }
            let mass = mass.value();
            match &best {
                Some(b) if mass <= *b => {}
                _ => best = Some(mass),
            }
        }
        success.add(best.expect("nonempty response alphabet"));
        tuples.advance();
    }
    Ok(success.value())
}

/// Type-class variant of [`function_recovery_probability`] for i.i.d.
/// responses through one channel.
pub fn function_recovery_iid<T: Scalar + Float>(
    model: &DataModel<T>,
    w: &Mechanism<T>,
    n: usize,
    cap: u64,
) -> Result<T, PrivacyError> {
    if n == 0 {
        return function_recovery_probability(model, &[], cap);
    }
    assert_eq!(w.n_rows(), model.len());
    let k = model.k();
    let types = Compositions::count(n as u64, k as u64).unwrap_or(u64::MAX);
    if types > cap {
        return Err(PrivacyError::EnumerationTooLarge {
            required: types,
            cap,
        });
    }
    let ln_fact = ln_factorials(n);
    let mut success = Accum::new();
    for counts in Compositions::new(n, k) {
        let weight: T = T::from(ln_multinomial(&ln_fact, n, &counts).exp())
            .expect("multinomial weight fits the scalar");
        let mut best: Option<T> = None;
        for j in 0..k {
            let mut mass = Accum::new();
            for x in model.cell(j) {
                let mut score = model.px()[x];
                for (i, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        score = score * w.prob(i, x).powi(c as i32);
                        if score == T::zero() {
                            break;
                        }
                    }
                }
                mass.add(score);
            }
            let mass = mass.value();
            match best {
                Some(b) if mass <= b => {}
                _ => best = Some(mass),
            }
        }
        success.add(weight * best.expect("nonempty response alphabet"));
    }
    Ok(success.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{
        lift_addnoise, optimal_addnoise, optimal_lifted, paired_block_addnoise,
        uniform_block_addnoise,
    };
    use crate::model::support_stats;

    fn reference() -> (DataModel<f64>, SupportStats<f64>) {
        let model = DataModel::from_maps(vec![0.5, 0.3, 0.2], vec![0, 1, 2]).unwrap();
        let stats = support_stats(&model);
        (model, stats)
    }

    /// Test-local brute force, independent of the library enumeration path.
    fn brute_force_privacy(px: &[f64], rows: &[Vec<f64>], n: usize) -> f64 {
        let k = rows[0].len();
        let mut success = 0.0;
        let total = k.pow(n as u32);
        for code in 0..total {
            let mut tuple = Vec::with_capacity(n);
            let mut c = code;
            for _ in 0..n {
                tuple.push(c % k);
                c /= k;
            }
            let best = px
                .iter()
                .enumerate()
                .map(|(x, p)| tuple.iter().fold(*p, |acc, &i| acc * rows[x][i]))
                .fold(0.0f64, f64::max);
            success += best;
        }
        1.0 - success
    }

    #[test]
    fn map_estimates_on_paired_block_channel() {
        let (model, _) = reference();
        let v = paired_block_addnoise(3, &0.6).unwrap();
        let w = lift_addnoise(&v, &model);
        let report = privacy_single(&model, &w);
        let rule = &report.rule;
        assert_eq!(rule.estimate(&[0]), 0); // 0.30 vs 0.12 vs 0.08
        assert_eq!(rule.estimate(&[1]), 0); // 0.20 vs 0.18 vs 0
        assert_eq!(rule.estimate(&[2]), 2);
        for i in 0..3 {
            assert_eq!(map_estimate(&model, &w, i), rule.estimate(&[i]));
        }
    }

    #[test]
    fn map_estimate_deterministic_channel_returns_cell_mode() {
        let (model, stats) = reference();
        let w = optimal_lifted(&model, &stats, &1.0).unwrap();
        let report = privacy_single(&model, &w);
        for i in 0..3 {
            assert_eq!(report.rule.estimate(&[i]), stats.cell_modes[i]);
        }
    }

    #[test]
    fn single_response_reference_values() {
        let (model, stats) = reference();
        let w = optimal_lifted(&model, &stats, &0.6).unwrap();
        assert!((privacy_single(&model, &w).value - 0.4).abs() < 1e-12);

        let v = paired_block_addnoise(3, &0.6).unwrap();
        let lifted = lift_addnoise(&v, &model);
        assert!((privacy_single(&model, &lifted).value - 0.38).abs() < 1e-12);
    }

    #[test]
    fn uninformative_channel_leaves_prior_error() {
        let (model, _) = reference();
        let w = Mechanism::from_rows(vec![vec![1.0 / 3.0; 3]; 3]).unwrap();
        assert!((privacy_single(&model, &w).value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn multi_reduces_to_single_at_one_response() {
        let (model, _) = reference();
        let v = paired_block_addnoise(3, &0.6).unwrap();
        let w = lift_addnoise(&v, &model);
        let single = privacy_single(&model, &w).value;
        let multi = privacy_multi(&model, std::slice::from_ref(&w), DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .value;
        assert_eq!(single, multi);
        let iid = privacy_iid(&model, &w, 1, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .value;
        assert_eq!(single, iid);
    }

    #[test]
    fn two_responses_match_brute_force_and_both_paths_agree() {
        let (model, _) = reference();
        let v = paired_block_addnoise(3, &0.6).unwrap();
        let w = lift_addnoise(&v, &model);
        let naive = privacy_multi_naive(&model, &[w.clone(), w.clone()], 1000)
            .unwrap()
            .value;
        let typed = privacy_iid(&model, &w, 2, 1000).unwrap().value;
        // 38/125, fixed by the 9-term enumeration.
        let brute = brute_force_privacy(model.px(), w.rows(), 2);
        assert!((naive - 0.304).abs() < 1e-12);
        assert!((naive - brute).abs() < 1e-15);
        assert!((naive - typed).abs() < 1e-12);
    }

    #[test]
    fn addnoise_matches_lifted_and_reference_value() {
        let (model, stats) = reference();
        let vo = optimal_addnoise(&model, &stats, &0.6).unwrap();
        let report =
            privacy_multi_addnoise(&model, &stats, std::slice::from_ref(&vo), DEFAULT_ENUMERATION_CAP)
                .unwrap();
        assert!((report.value - 0.4).abs() < 1e-12);

        let lifted = lift_addnoise(&vo, &model);
        for n in 1..=4 {
            let via_w = privacy_multi(&model, &vec![lifted.clone(); n], 1 << 20)
                .unwrap()
                .value;
            let via_v =
                privacy_multi_addnoise(&model, &stats, &vec![vo.clone(); n], 1 << 20)
                    .unwrap()
                    .value;
            assert!((via_w - via_v).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn binary_toy_three_responses() {
        let model = DataModel::from_maps(vec![0.6, 0.4], vec![0, 1]).unwrap();
        let stats = support_stats(&model);
        let v = AddNoiseMechanism::from_rows(vec![vec![0.7, 0.3], vec![0.3, 0.7]]).unwrap();
        let report =
            privacy_multi_addnoise(&model, &stats, &[v.clone(), v.clone(), v.clone()], 1000)
                .unwrap();
        // 27/125, fixed by the 8-term enumeration.
        assert!((report.value - 0.216).abs() < 1e-12);
        let w = lift_addnoise(&v, &model);
        let brute = brute_force_privacy(model.px(), w.rows(), 3);
        assert!((report.value - brute).abs() < 1e-15);
    }

    #[test]
    fn uniform_block_privacy_does_not_depend_on_n() {
        let model = DataModel::from_maps(vec![0.125; 8], (0..8).collect()).unwrap();
        let stats = support_stats(&model);
        let v = uniform_block_addnoise(8, &(1.0 / 3.0)).unwrap();
        let first =
            privacy_multi_addnoise(&model, &stats, std::slice::from_ref(&v), DEFAULT_ENUMERATION_CAP)
                .unwrap()
                .value;
        assert!((first - 0.625).abs() < 1e-12);
        for n in 2..=4 {
            let value =
                privacy_multi_addnoise(&model, &stats, &vec![v.clone(); n], 1 << 22)
                    .unwrap()
                    .value;
            assert!((value - first).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn predicate_privacy_with_identity_predicate_matches_plain_privacy() {
        let model = DataModel::from_maps_with_predicate(
            vec![0.5, 0.3, 0.2],
            vec![0, 1, 2],
            vec![0, 1, 2],
        )
        .unwrap();
        let stats = support_stats(&model);
        let w = optimal_lifted(&model, &stats, &0.7).unwrap();
        let plain = privacy_single(&model, &w).value;
        let pred = predicate_privacy(&model, &w).unwrap().value;
        assert!((plain - pred).abs() < 1e-15);
    }

    #[test]
    fn predicate_privacy_reference_instance() {
        let model = DataModel::from_maps_with_predicate(
            vec![0.4, 0.3, 0.2, 0.1],
            vec![0, 0, 1, 1],
            vec![0, 1, 0, 1],
        )
        .unwrap();
        let stats = support_stats(&model);
        let w = crate::mechanisms::optimal_predicate_lifted(&model, &stats, &0.9).unwrap();
        let report = predicate_privacy(&model, &w).unwrap();
        assert!((report.value - 0.4).abs() < 1e-12);
    }

    #[test]
    fn predicate_privacy_constant_columns_leaves_prior_error() {
        let model = DataModel::from_maps_with_predicate(
            vec![0.4, 0.3, 0.2, 0.1],
            vec![0, 0, 1, 1],
            vec![0, 1, 0, 1],
        )
        .unwrap();
        let w = Mechanism::from_rows(vec![vec![0.8, 0.2]; 4]).unwrap();
        let report = predicate_privacy(&model, &w).unwrap();
        // max_j mass(h^-1(j)) = 0.6
        assert!((report.value - 0.4).abs() < 1e-12);
    }

    #[test]
    fn predicate_privacy_requires_predicate() {
        let (model, stats) = reference();
        let w = optimal_lifted(&model, &stats, &0.5).unwrap();
        assert_eq!(
            predicate_privacy(&model, &w).unwrap_err(),
            PrivacyError::NoPredicate
        );
    }

    #[test]
    fn function_recovery_reference_values() {
        let (model, stats) = reference();
        let deterministic = optimal_lifted(&model, &stats, &1.0).unwrap();
        let p = function_recovery_probability(&model, &[deterministic], 1000).unwrap();
        assert!((p - 1.0).abs() < 1e-15);

        let v = paired_block_addnoise(3, &0.6).unwrap();
        let w = lift_addnoise(&v, &model);
        let p = function_recovery_probability(&model, std::slice::from_ref(&w), 1000).unwrap();
        assert!((p - 0.62).abs() < 1e-12);
        let p_iid = function_recovery_iid(&model, &w, 1, 1000).unwrap();
        assert!((p - p_iid).abs() < 1e-12);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let (model, _) = reference();
        let v = paired_block_addnoise(3, &0.6).unwrap();
        let w = lift_addnoise(&v, &model);
        let err = privacy_multi_naive(&model, &vec![w; 4], 80).unwrap_err();
        assert_eq!(
            err,
            PrivacyError::EnumerationTooLarge {
                required: 81,
                cap: 80
            }
        );
    }
}
