//! Rényi divergences, pairwise Chernoff information, the Chernoff radius of
//! an add-noise channel, the identical-row reduction behind the asymptotic
//! privacy of repeated responses, and the scheme comparison it supports.
//!
//! All information quantities are in bits.

use num_traits::Float;
use thiserror::Error;

use crate::bounds::{bernoulli_kl, uniform_block_privacy};
use crate::comb::KahanSumT;
use crate::mechanisms::{optimal_addnoise, paired_block_addnoise, AddNoiseMechanism};
use crate::model::{DataModel, SupportStats};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChernoffError {
    #[error("Renyi order {lambda} outside (0, 1)")]
    LambdaOutOfRange { lambda: String },
    #[error("pairwise Chernoff information needs two distinct row indices (got {index})")]
    SameRowIndex { index: usize },
}

/// Rényi divergence of order `lambda` in (0, 1) between pmfs on a common
/// alphabet, in bits. Summands with `p_i = 0` vanish; the divergence is
/// `+inf` exactly when the supports are disjoint.
pub fn renyi_divergence<T: Float + std::fmt::Debug>(p: &[T], q: &[T], lambda: T) -> Result<T, ChernoffError> {
    if !(lambda > T::zero() && lambda < T::one()) {
        return Err(ChernoffError::LambdaOutOfRange {
            lambda: format!("{lambda:?}"),
        });
    }
    assert_eq!(p.len(), q.len());
    let sum = hellinger_sum(p, q, lambda);
    if sum <= T::zero() {
        return Ok(T::infinity());
    }
    Ok(sum.log2() / (lambda - T::one()))
}

/// `sum_i p_i^lambda q_i^(1-lambda)` with zero-support terms dropped.
fn hellinger_sum<T: Float>(p: &[T], q: &[T], lambda: T) -> T {
    let mut acc = KahanSumT::new();
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > T::zero() && qi > T::zero() {
            acc.add((lambda * pi.ln() + (T::one() - lambda) * qi.ln()).exp());
        }
    }
    acc.value()
}

/// Pairwise Chernoff information between two rows: the maximum over lambda
/// of `-log2 sum_i a_i^lambda b_i^(1-lambda)`, found by ternary search on the
/// convex inner objective plus explicit endpoint limits (needed when the
/// rows carry zeros). Identical rows give 0 at lambda = 1/2 by convention.
pub fn chernoff_pair_rows<T: Float>(a: &[T], b: &[T]) -> (T, T) {
    assert_eq!(a.len(), b.len());
    let half = T::from(0.5).unwrap();
    if a.iter().zip(b).all(|(x, y)| x == y) {
        return (T::zero(), half);
    }

    // Endpoint limits: mass of one support under the other row.
    let mass_b_on_a: T = mass_on_support(b, a);
    let mass_a_on_b: T = mass_on_support(a, b);
    if mass_b_on_a <= T::zero() || mass_a_on_b <= T::zero() {
        return (T::infinity(), half);
    }
    let at_zero = -mass_b_on_a.log2();
    let at_one = -mass_a_on_b.log2();

    let delta = T::from(1e-9).unwrap();
    let third = T::from(3.0).unwrap();
    let mut lo = delta;
    let mut hi = T::one() - delta;
    let objective = |lambda: T| hellinger_sum(a, b, lambda).log2();
    while hi - lo > T::from(1e-12).unwrap() {
        let step = (hi - lo) / third;
        let m1 = lo + step;
        let m2 = hi - step;
        if objective(m1) < objective(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let lambda = (lo + hi) * half;
    let interior = -objective(lambda);

    let mut best = (interior, lambda);
    if at_zero > best.0 {
        best = (at_zero, T::zero());
    }
    if at_one > best.0 {
        best = (at_one, T::one());
    }
    best
}

fn mass_on_support<T: Float>(weigh: &[T], support: &[T]) -> T {
    let mut acc = KahanSumT::new();
    for (&w, &s) in weigh.iter().zip(support) {
        if s > T::zero() {
            acc.add(w);
        }
    }
    acc.value()
}

/// Pairwise Chernoff information between rows `j` and `j_prime` of an
/// add-noise channel, with the minimizing lambda.
pub fn chernoff_pair<T: Scalar + Float>(
    v: &AddNoiseMechanism<T>,
    j: usize,
    j_prime: usize,
) -> Result<(T, T), ChernoffError> {
    if j == j_prime {
        return Err(ChernoffError::SameRowIndex { index: j });
    }
    Ok(chernoff_pair_rows(v.row(j), v.row(j_prime)))
}

/// One pairwise Chernoff information entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseChernoff<T> {
    pub j: usize,
    pub j_prime: usize,
    pub value_bits: T,
    pub lambda_star: T,
}

/// All pairwise Chernoff informations of a channel and their minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusReport<T> {
    pub pairwise: Vec<PairwiseChernoff<T>>,
    pub radius_bits: T,
    pub argmin_pair: (usize, usize),
}

/// The Chernoff radius: the minimum pairwise Chernoff information over all
/// unordered row pairs. Zero exactly when two rows coincide.
pub fn chernoff_radius<T: Scalar + Float>(v: &AddNoiseMechanism<T>) -> RadiusReport<T> {
    radius_of_rows(v.rows(), &(0..v.k()).collect::<Vec<_>>())
}

fn radius_of_rows<T: Scalar + Float>(rows: &[Vec<T>], labels: &[usize]) -> RadiusReport<T> {
    let mut pairwise = Vec::new();
    let mut radius = T::infinity();
    let mut argmin = (labels[0], labels[0]);
    for a in 0..rows.len() {
        for b in (a + 1)..rows.len() {
            let (value, lambda) = chernoff_pair_rows(&rows[a], &rows[b]);
            if value < radius {
                radius = value;
                argmin = (labels[a], labels[b]);
            }
            pairwise.push(PairwiseChernoff {
                j: labels[a],
                j_prime: labels[b],
                value_bits: value,
                lambda_star: lambda,
            });
        }
    }
    if rows.len() < 2 {
        // A single reduced row never separates: no decay at all.
        radius = T::infinity();
    }
    RadiusReport {
        pairwise,
        radius_bits: radius,
        argmin_pair: argmin,
    }
}

/// Identical-row structure of a channel: the groups, the surviving label of
/// each group (largest cell-mode mass, lowest label on ties), and the
/// restriction of the channel to the survivors.
#[derive(Debug, Clone, PartialEq)]
pub struct RowReduction<T> {
    /// Maximal groups of pairwise identical rows (singletons included),
    /// listed by ascending leading label.
    pub groups: Vec<Vec<usize>>,
    /// Surviving representative per group, in group order.
    pub representatives: Vec<usize>,
    /// Ascending labels of the reduced support.
    pub reduced_support: Vec<usize>,
    /// Rows of the reduced channel, aligned with `reduced_support`.
    pub reduced_rows: Vec<Vec<T>>,
}

/// Groups identical rows (entrywise within tolerance; exact scalars compare
/// exactly) and keeps one representative per group.
pub fn reduce_identical_rows<T: Scalar>(
    stats: &SupportStats<T>,
    v: &AddNoiseMechanism<T>,
) -> RowReduction<T> {
    let k = v.k();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for j in 0..k {
        let found = groups
            .iter()
            .position(|members| rows_equal(v.row(j), v.row(members[0])));
        match found {
            Some(g) => groups[g].push(j),
            None => groups.push(vec![j]),
        }
    }
    let representatives: Vec<usize> = groups
        .iter()
        .map(|members| {
            let mut best = members[0];
            for &j in &members[1..] {
                if stats.cell_mode_masses[j] > stats.cell_mode_masses[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    let mut reduced_support = representatives.clone();
    reduced_support.sort_unstable();
    let reduced_rows = reduced_support.iter().map(|&j| v.row(j).to_vec()).collect();
    RowReduction {
        groups,
        representatives,
        reduced_support,
        reduced_rows,
    }
}

fn rows_equal<T: Scalar>(a: &[T], b: &[T]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.close_to(y))
}

/// Limit of the privacy of i.i.d. responses through `v` and the exponential
/// rate of convergence to it: one minus the reduced-support cell-mode mass,
/// decaying at the reduced Chernoff radius. A fully collapsed channel (one
/// reduced row) holds its value for every response count: rate `+inf`.
pub fn asymptotic_privacy<T: Scalar + Float>(
    stats: &SupportStats<T>,
    v: &AddNoiseMechanism<T>,
) -> (T, T) {
    let reduction = reduce_identical_rows(stats, v);
    let mut recovered = T::zero();
    for &j in &reduction.reduced_support {
        recovered = recovered + stats.cell_mode_masses[j];
    }
    let limit = T::one() - recovered;
    let rate = radius_of_rows(&reduction.reduced_rows, &reduction.reduced_support).radius_bits;
    (limit, rate)
}

/// Full Chernoff bundle for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChernoffReport<T> {
    pub pairwise: Vec<PairwiseChernoff<T>>,
    pub radius_bits: T,
    pub argmin_pair: (usize, usize),
    pub identical_row_groups: Vec<Vec<usize>>,
    pub reduced_support: Vec<usize>,
    pub reduced_radius_bits: T,
    pub asymptotic_limit: T,
    /// Decay rate towards the limit; equals the reduced radius.
    pub rate_bits: T,
}

pub fn chernoff_report<T: Scalar + Float>(
    stats: &SupportStats<T>,
    v: &AddNoiseMechanism<T>,
) -> ChernoffReport<T> {
    let radius = chernoff_radius(v);
    let reduction = reduce_identical_rows(stats, v);
    let (limit, rate) = asymptotic_privacy(stats, v);
    ChernoffReport {
        pairwise: radius.pairwise,
        radius_bits: radius.radius_bits,
        argmin_pair: radius.argmin_pair,
        identical_row_groups: reduction.groups,
        reduced_support: reduction.reduced_support,
        reduced_radius_bits: rate,
        asymptotic_limit: limit,
        rate_bits: rate,
    }
}

/// Least-squares slope of `-log2(privacy_n - limit)` against `n` over an
/// inclusive range, computed from exact type-class privacy values. This is
/// the desk-scale estimate of the exponential decay rate towards the
/// asymptotic limit; `None` when the excess is not strictly positive
/// somewhere in the range (no decay to measure).
pub fn empirical_decay_slope<T: Scalar + Float>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
    v: &AddNoiseMechanism<T>,
    n_lo: usize,
    n_hi: usize,
    cap: u64,
) -> Result<Option<T>, crate::privacy::PrivacyError> {
    assert!(n_lo <= n_hi);
    let (limit, _) = asymptotic_privacy(stats, v);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in n_lo..=n_hi {
        let value = crate::privacy::privacy_iid_addnoise(model, stats, v, n, cap)?.value;
        let excess = value - limit;
        if excess <= T::zero() {
            return Ok(None);
        }
        xs.push(T::from(n).unwrap());
        ys.push(-excess.log2());
    }
    let count = T::from(xs.len()).unwrap();
    let mut sx = T::zero();
    let mut sy = T::zero();
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        sx = sx + x;
        sy = sy + y;
        sxx = sxx + x * x;
        sxy = sxy + x * y;
    }
    Ok(Some((count * sxy - sx * sy) / (count * sxx - sx * sx)))
}

/// Long-run ordering of the universal block schemes against i.i.d.
/// repetitions of the single-response-optimal channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeVerdict {
    /// The universal scheme is strictly better for all large response counts.
    StrictlyBetter,
    /// The two schemes coincide.
    Equal,
    /// At least as good for all large response counts.
    AtLeastAsGood,
}

impl SchemeVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeVerdict::StrictlyBetter => "strictly-better",
            SchemeVerdict::Equal => "equal",
            SchemeVerdict::AtLeastAsGood => "at-least-as-good",
        }
    }
}

/// Evidence bundle behind a [`SchemeVerdict`].
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeComparison<T> {
    /// True when `rho <= 1/2` (uniform-block realm), false above.
    pub low_realm: bool,
    pub verdict: SchemeVerdict,
    /// Chernoff radius of the universal scheme (paired-block realm only).
    pub universal_rate_bits: Option<T>,
    /// Chernoff rate of the repeated optimal channel.
    pub optimal_rate_bits: T,
    /// Long-run privacy of the universal scheme.
    pub universal_limit: T,
    /// Long-run privacy of the repeated optimal channel.
    pub optimal_limit: T,
    /// Whether the two channels are identical matrices.
    pub same_channel: bool,
}

/// Compares the realm-appropriate universal block scheme against i.i.d.
/// repetitions of the single-response-optimal add-noise channel.
pub fn compare_schemes<T: Scalar + Float>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
    rho: T,
) -> SchemeComparison<T> {
    let half = T::from(0.5).unwrap();
    let optimal = optimal_addnoise(model, stats, &rho).expect("rho validated by caller");
    let (optimal_limit, optimal_rate) = asymptotic_privacy(stats, &optimal);

    if rho <= half {
        let universal_limit = uniform_block_privacy(stats, &rho).expect("low realm");
        let strict = universal_limit > optimal_limit + T::tolerance();
        return SchemeComparison {
            low_realm: true,
            verdict: if strict {
                SchemeVerdict::StrictlyBetter
            } else {
                SchemeVerdict::AtLeastAsGood
            },
            universal_rate_bits: None,
            optimal_rate_bits: optimal_rate,
            universal_limit,
            optimal_limit,
            same_channel: false,
        };
    }

    let universal = paired_block_addnoise(model.k(), &rho).expect("valid level");
    let universal_rate = bernoulli_kl(half, rho);
    let floor = T::one() - stats.cell_mode_mass_sum;
    let same_channel = universal == optimal;
    let verdict = if same_channel {
        SchemeVerdict::Equal
    } else {
        // Same limit, strictly smaller decay rate for the paired scheme.
        debug_assert!(universal_rate < optimal_rate);
        SchemeVerdict::StrictlyBetter
    };
    SchemeComparison {
        low_realm: false,
        verdict,
        universal_rate_bits: Some(universal_rate),
        optimal_rate_bits: optimal_rate,
        universal_limit: floor,
        optimal_limit,
        same_channel,
    }
}
