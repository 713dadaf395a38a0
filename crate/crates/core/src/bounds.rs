//! Closed forms and bounds: the single-response privacy value, its predicate
//! counterpart, the minentropy decomposition, converse and achievability
//! corrections for repeated responses, the uniform-block closed form, the
//! divergence-based bounds, asymptotic limits, and the worst-prior guarantee.
//!
//! Logarithms and exponentials are base 2 throughout the public surface.

use num_traits::Float;
use thiserror::Error;

use crate::comb::{ln_factorials, KahanSumT};
use crate::mechanisms::inverse_floor;
use crate::model::{DataModel, SupportStats};
use crate::scalar::{max_scalar, min_scalar, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("recoverability level {rho} outside the valid realm {realm}")]
    RhoOutOfRealm { rho: String, realm: &'static str },
    #[error("instance has no predicate map")]
    NoPredicate,
    #[error("family members are not structurally compatible: {detail}")]
    IncompatibleFamily { detail: String },
}

/// Maximal single-response privacy at level `rho`:
/// `1 - max(critical_level, rho) * sum of cell-mode masses`.
pub fn privacy_closed_form<T: Scalar>(stats: &SupportStats<T>, rho: &T) -> T {
    let level = max_scalar(stats.critical_level.clone(), rho.clone());
    let value = T::one() - level * stats.cell_mode_mass_sum.clone();
    debug_assert!({
        let mode_mass = stats.critical_level.clone() * stats.cell_mode_mass_sum.clone();
        let alt = T::one()
            - max_scalar(mode_mass, rho.clone() * stats.cell_mode_mass_sum.clone());
        alt.close_to(&value)
    });
    value
}

/// Maximal single-response predicate privacy at level `rho`.
pub fn predicate_privacy_closed_form<T: Scalar>(
    stats: &SupportStats<T>,
    rho: &T,
) -> Result<T, BoundsError> {
    let pred = stats.predicate.as_ref().ok_or(BoundsError::NoPredicate)?;
    let level = max_scalar(pred.critical_level.clone(), rho.clone());
    Ok(T::one() - level * pred.joint_mode_mass_sum.clone())
}

/// Per-cell minentropy view of the quantities the optimal mechanism uses.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMinentropy<T> {
    pub cell: usize,
    /// Total mass of the cell.
    pub mass: T,
    /// Minentropy of the cell-conditional pmf, in bits.
    pub min_entropy_bits: T,
    /// Mode mass of the cell; equals `mass * 2^(-min_entropy_bits)`.
    pub mode_mass: T,
}

/// Splits each cell-mode mass into cell mass times `2^(-minentropy)`.
pub fn minentropy_decomposition<T: Scalar + Float>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
) -> Vec<CellMinentropy<T>> {
    (0..model.k())
        .map(|cell| {
            let mut mass = T::zero();
            for x in model.cell(cell) {
                mass = mass + model.px()[x];
            }
            let mode_mass = stats.cell_mode_masses[cell];
            CellMinentropy {
                cell,
                mass,
                min_entropy_bits: (mass / mode_mass).log2(),
                mode_mass,
            }
        })
        .collect()
}

/// Kullback-Leibler divergence between Bernoulli laws, in bits, with the
/// conventions `0 log 0 = 0` and `p log(p/0) = +inf`.
pub fn bernoulli_kl<T: Float>(a: T, b: T) -> T {
    let mut total = T::zero();
    for (p, q) in [(a, b), (T::one() - a, T::one() - b)] {
        if p > T::zero() {
            if q <= T::zero() {
                return T::infinity();
            }
            total = total + p * (p / q).log2();
        }
    }
    total
}

/// `P(Bin(n, rho) <= floor(n/2))`, summed in log space along the smaller
/// tail with compensated accumulation.
pub fn binom_tail_at_half<T: Float>(n: u64, rho: T) -> T {
    let half = T::from(0.5).unwrap();
    if rho >= half {
        binom_tail_sum(n, rho, 0, n / 2)
    } else {
        T::one() - binom_tail_sum(n, rho, n / 2 + 1, n)
    }
}

/// `P(Bin(n, rho) >= floor(n/2) + 1)`: the majority-success probability.
pub fn binom_majority<T: Float>(n: u64, rho: T) -> T {
    let half = T::from(0.5).unwrap();
    if rho <= half {
        binom_tail_sum(n, rho, n / 2 + 1, n)
    } else {
        T::one() - binom_tail_sum(n, rho, 0, n / 2)
    }
}

fn binom_tail_sum<T: Float>(n: u64, rho: T, lo: u64, hi: u64) -> T {
    debug_assert!(rho >= T::zero() && rho <= T::one());
    let ln_fact = ln_factorials(n as usize);
    let ln_rho = rho.ln();
    let ln_rho_c = (T::one() - rho).ln();
    let mut sum = KahanSumT::new();
    for l in lo..=hi {
        let ln_choose =
            T::from(ln_fact[n as usize] - ln_fact[l as usize] - ln_fact[(n - l) as usize])
                .unwrap();
        let l_t = T::from(l).unwrap();
        let r_t = T::from(n - l).unwrap();
        // 0 * ln 0 is an honest 0 here (empty factor), not NaN.
        let mut ln_term = ln_choose;
        if l > 0 {
            ln_term = ln_term + l_t * ln_rho;
        }
        if n - l > 0 {
            ln_term = ln_term + r_t * ln_rho_c;
        }
        sum.add(ln_term.exp());
    }
    sum.value()
}

/// Correction term of the converse bound for `n` responses:
/// `min(1 - critical, min(1 - rho, tail)) * sum of cell-mode masses`.
pub fn converse_correction<T: Scalar + Float>(stats: &SupportStats<T>, n: u64, rho: T) -> T {
    let tail = binom_tail_at_half(n, rho);
    let inner = min_scalar(T::one() - rho, tail);
    min_scalar(T::one() - stats.critical_level, inner) * stats.cell_mode_mass_sum
}

/// Correction term of the paired-block achievability bound:
/// `tail * (sorted cell-mode masses at odd positions)`.
pub fn achievability_correction<T: Scalar + Float>(stats: &SupportStats<T>, n: u64, rho: T) -> T {
    let sorted = stats.sorted_cell_mode_masses();
    let mut odd_sum = T::zero();
    for mass in sorted.iter().skip(1).step_by(2) {
        odd_sum = odd_sum + *mass;
    }
    binom_tail_at_half(n, rho) * odd_sum
}

/// Upper bound on the privacy of any `n` independent responses at level
/// `rho`; at `n = 1` it coincides with the single-response closed form.
pub fn converse_upper_bound<T: Scalar + Float>(stats: &SupportStats<T>, n: u64, rho: T) -> T {
    T::one() - stats.cell_mode_mass_sum + converse_correction(stats, n, rho)
}

/// Lower bound achieved by `n` i.i.d. paired-block responses, valid for
/// levels strictly above one half.
pub fn paired_block_lower_bound<T: Scalar + Float>(
    stats: &SupportStats<T>,
    n: u64,
    rho: T,
) -> Result<T, BoundsError> {
    require_high_realm(rho)?;
    Ok(T::one() - stats.cell_mode_mass_sum + achievability_correction(stats, n, rho))
}

/// Exact privacy of i.i.d. uniform-block responses (any count) for levels at
/// or below one half: one minus the sorted cell-mode masses at block heads.
pub fn uniform_block_privacy<T: Scalar>(stats: &SupportStats<T>, rho: &T) -> Result<T, BoundsError> {
    let half = T::from_ratio(1, 2);
    if *rho < T::zero() || *rho > half + T::tolerance() {
        return Err(BoundsError::RhoOutOfRealm {
            rho: format!("{rho}"),
            realm: "[0, 0.5]",
        });
    }
    let sorted = stats.sorted_cell_mode_masses();
    let k = sorted.len();
    let k_t = T::from_usize(k).expect("alphabet size fits the scalar");
    if rho.clone() * k_t <= T::one() + T::tolerance() {
        return Ok(T::one() - sorted[0].clone());
    }
    let side = inverse_floor(rho, k);
    let full_blocks = k / side;
    let head_count = if k.is_multiple_of(side) {
        full_blocks
    } else {
        full_blocks + 1
    };
    let mut recovered = T::zero();
    for i in 0..head_count {
        recovered = recovered + sorted[i * side].clone();
    }
    Ok(T::one() - recovered)
}

/// Divergence-form upper/lower bounds for `n` responses at levels above one
/// half. The upper bound carries its validity condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialBounds<T> {
    pub upper: T,
    pub upper_valid: bool,
    pub lower: T,
}

pub fn exponential_bounds<T: Scalar + Float>(
    stats: &SupportStats<T>,
    n: u64,
    rho: T,
) -> Result<ExponentialBounds<T>, BoundsError> {
    require_high_realm(rho)?;
    let half_count = T::from(n / 2).unwrap();
    let n_t = T::from(n).unwrap();
    let divergence = bernoulli_kl(half_count / n_t, rho);
    let decay = (-n_t * divergence).exp2();
    let poly_hi = T::from(n / 2 + 1).unwrap();
    let poly_lo = T::from(n + 1).unwrap();

    let sum = stats.cell_mode_mass_sum;
    let sorted = stats.sorted_cell_mode_masses();
    let mut odd_sum = T::zero();
    for mass in sorted.iter().skip(1).step_by(2) {
        odd_sum = odd_sum + *mass;
    }
    let upper = T::one() - sum + poly_hi * decay * sum;
    let lower = T::one() - sum + decay / poly_lo * odd_sum;
    let upper_valid = poly_hi * decay <= T::one() - min_scalar(rho, stats.critical_level);
    Ok(ExponentialBounds {
        upper,
        upper_valid,
        lower,
    })
}

fn require_high_realm<T: Scalar + Float>(rho: T) -> Result<(), BoundsError> {
    let half = T::from(0.5).unwrap();
    if rho <= half || rho > T::one() {
        return Err(BoundsError::RhoOutOfRealm {
            rho: format!("{rho}"),
            realm: "(0.5, 1]",
        });
    }
    Ok(())
}

/// Limiting privacy of repeated responses and the decay rate towards it.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticSummary<T> {
    /// Limit of the privacy as the response count grows.
    pub limit: T,
    /// Exponential decay rate towards the limit, in bits (zero when the
    /// privacy does not decay).
    pub rate_bits: T,
    /// Whether privacy converges to the function-revealed error floor.
    pub converging: bool,
    /// For the non-converging realm: whether the uniform-block privacy stays
    /// strictly above the floor.
    pub strict_gap: Option<bool>,
}

pub fn asymptotic_summary<T: Scalar + Float>(
    stats: &SupportStats<T>,
    rho: T,
) -> AsymptoticSummary<T> {
    let floor = T::one() - stats.cell_mode_mass_sum;
    let half = T::from(0.5).unwrap();
    if rho > half {
        AsymptoticSummary {
            limit: floor,
            rate_bits: bernoulli_kl(half, rho),
            converging: true,
            strict_gap: None,
        }
    } else {
        let value = uniform_block_privacy(stats, &rho).expect("realm checked");
        AsymptoticSummary {
            limit: value,
            rate_bits: T::zero(),
            converging: false,
            strict_gap: Some(value > floor),
        }
    }
}

/// Everything the bound machinery knows about one `(n, rho)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport<T> {
    pub rho: T,
    pub n: u64,
    /// Single-response closed form (also the converse at `n = 1`).
    pub closed_form: T,
    pub converse_upper: T,
    pub converse_correction: T,
    pub achievability_correction: T,
    /// Paired-block lower bound; present above one half.
    pub paired_block_lower: Option<T>,
    /// Uniform-block exact value; present at or below one half.
    pub uniform_block: Option<T>,
    /// Divergence-form bounds; present above one half.
    pub exponential: Option<ExponentialBounds<T>>,
    pub limit: T,
    pub rate_bits: T,
}

/// Assembles every realm-appropriate bound for one `(n, rho)` pair.
pub fn bounds_report<T: Scalar + Float>(
    stats: &SupportStats<T>,
    n: u64,
    rho: T,
) -> BoundsReport<T> {
    let half = T::from(0.5).unwrap();
    let summary = asymptotic_summary(stats, rho);
    BoundsReport {
        rho,
        n,
        closed_form: privacy_closed_form(stats, &rho),
        converse_upper: converse_upper_bound(stats, n, rho),
        converse_correction: converse_correction(stats, n, rho),
        achievability_correction: achievability_correction(stats, n, rho),
        paired_block_lower: (rho > half).then(|| {
            paired_block_lower_bound(stats, n, rho).expect("realm checked")
        }),
        uniform_block: (rho <= half)
            .then(|| uniform_block_privacy(stats, &rho).expect("realm checked")),
        exponential: (rho > half)
            .then(|| exponential_bounds(stats, n, rho).expect("realm checked")),
        limit: summary.limit,
        rate_bits: summary.rate_bits,
    }
}

/// Which guaranteed quantity the worst-prior search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuaranteeScheme {
    /// Single-response closed form.
    SingleResponse,
    /// Paired-block lower bound at a given response count.
    PairedBlockLower,
    /// Uniform-block exact value (response-count independent).
    UniformBlock,
}

/// The prior in the family attaining the smallest guaranteed value, with
/// that value. Ties resolve to the lowest index.
pub fn prior_family_guarantee<T: Scalar + Float>(
    family: &[DataModel<T>],
    rho: T,
    n: u64,
    scheme: GuaranteeScheme,
) -> Result<(usize, T), BoundsError> {
    let first = family.first().ok_or_else(|| BoundsError::IncompatibleFamily {
        detail: "family is empty".into(),
    })?;
    for (idx, member) in family.iter().enumerate().skip(1) {
        if !first.same_shape(member) {
            return Err(BoundsError::IncompatibleFamily {
                detail: format!("member {idx} differs in alphabet, function, or predicate"),
            });
        }
    }
    let mut best: Option<(usize, T)> = None;
    for (idx, member) in family.iter().enumerate() {
        let stats = crate::model::support_stats(member);
        let value = match scheme {
            GuaranteeScheme::SingleResponse => privacy_closed_form(&stats, &rho),
            GuaranteeScheme::PairedBlockLower => paired_block_lower_bound(&stats, n, rho)?,
            GuaranteeScheme::UniformBlock => uniform_block_privacy(&stats, &rho)?,
        };
        match &best {
            Some((_, current)) if value >= *current => {}
            _ => best = Some((idx, value)),
        }
    }
    Ok(best.expect("nonempty family"))
}
