//! Construction of query-response mechanisms: the privacy-optimal pair for a
//! single response, the predicate variants, the two universal block schemes
//! for repeated responses, and conversions between row-lifted and add-noise
//! forms.

use thiserror::Error;

use crate::model::{DataModel, SupportStats};
use crate::scalar::{max_scalar, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error("matrix entry ({row}, {col}) = {value} is negative")]
    InvalidEntry {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("row {row} sums to {sum} (must be 1 within tolerance)")]
    RowNotStochastic { row: usize, sum: String },
    #[error("row {row} has width {width}, expected {expected}")]
    BadShape {
        expected: usize,
        row: usize,
        width: usize,
    },
    #[error("recoverability level {rho} outside the valid realm {realm}")]
    RhoOutOfRealm { rho: String, realm: &'static str },
    #[error("instance has no predicate map")]
    NoPredicate,
    #[error("denominator for data symbol {row} is not strictly positive")]
    DegenerateDenominator { row: usize },
    #[error("rows inside the preimage of response label {cell} differ; cannot collapse")]
    NotRowConstant { cell: usize },
    #[error("response alphabet of size {k} is too small (need at least 2)")]
    AlphabetTooSmall { k: usize },
}

/// A row-stochastic channel from data symbols to response labels.
/// Row `x`, column `i` holds `W(i | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism<T> {
    rows: Vec<Vec<T>>,
}

/// A square row-stochastic channel from function values to response labels,
/// realizable by adding value-dependent noise to the function output.
#[derive(Debug, Clone, PartialEq)]
pub struct AddNoiseMechanism<T> {
    rows: Vec<Vec<T>>,
}

fn validate_rows<T: Scalar>(rows: &mut [Vec<T>]) -> Result<(), MechanismError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(MechanismError::AlphabetTooSmall { k: 0 });
    }
    let width = rows[0].len();
    for (r, row) in rows.iter_mut().enumerate() {
        if row.len() != width {
            return Err(MechanismError::BadShape {
                expected: width,
                row: r,
                width: row.len(),
            });
        }
        let mut sum = T::zero();
        for (c, entry) in row.iter_mut().enumerate() {
            // Normalize negative zeros produced by `0 * (-x)`.
            if *entry == T::zero() {
                *entry = T::zero();
            }
            if *entry < -T::tolerance() {
                return Err(MechanismError::InvalidEntry {
                    row: r,
                    col: c,
                    value: format!("{entry}"),
                });
            }
            sum = sum + entry.clone();
        }
        if !sum.close_to(&T::one()) {
            return Err(MechanismError::RowNotStochastic {
                row: r,
                sum: format!("{sum}"),
            });
        }
    }
    Ok(())
}

impl<T: Scalar> Mechanism<T> {
    pub fn from_rows(mut rows: Vec<Vec<T>>) -> Result<Self, MechanismError> {
        validate_rows(&mut rows)?;
        Ok(Mechanism { rows })
    }

    /// Number of response labels.
    pub fn k(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Number of data symbols.
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    /// `W(i | x)`.
    pub fn prob(&self, i: usize, x: usize) -> &T {
        &self.rows[x][i]
    }

    /// `min_x W(f(x) | x)`: the recoverability level this channel guarantees.
    pub fn recoverability_level(&self, f: &[usize]) -> T {
        assert_eq!(f.len(), self.n_rows());
        let mut level: Option<T> = None;
        for (x, &fx) in f.iter().enumerate() {
            let v = self.rows[x][fx].clone();
            level = Some(match level {
                Some(cur) if cur < v => cur,
                _ => v,
            });
        }
        level.expect("mechanism has at least one row")
    }
}

impl<T: Scalar> AddNoiseMechanism<T> {
    pub fn from_rows(mut rows: Vec<Vec<T>>) -> Result<Self, MechanismError> {
        let k = rows.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(MechanismError::BadShape {
                    expected: k,
                    row,
                    width: r.len(),
                });
            }
        }
        validate_rows(&mut rows)?;
        Ok(AddNoiseMechanism { rows })
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    /// `V(i | j)`.
    pub fn prob(&self, i: usize, j: usize) -> &T {
        &self.rows[j][i]
    }

    /// `min_i V(i | i)`.
    pub fn recoverability_level(&self) -> T {
        let mut level = self.rows[0][0].clone();
        for (j, row) in self.rows.iter().enumerate().skip(1) {
            if row[j] < level {
                level = row[j].clone();
            }
        }
        level
    }
}

fn check_unit_interval<T: Scalar>(rho: &T) -> Result<(), MechanismError> {
    if *rho < T::zero() || *rho > T::one() {
        return Err(MechanismError::RhoOutOfRealm {
            rho: format!("{rho}"),
            realm: "[0, 1]",
        });
    }
    Ok(())
}

/// The privacy-optimal row-lifted mechanism at recoverability level `rho`.
///
/// The diagonal cell gets `max(critical_level, rho)` and the remaining mass
/// is spread over the other response labels proportionally to their cell-mode
/// masses. Rows are constant on each function preimage, so the result
/// collapses to an add-noise channel.
pub fn optimal_lifted<T: Scalar>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
    rho: &T,
) -> Result<Mechanism<T>, MechanismError> {
    check_unit_interval(rho)?;
    let level = max_scalar(stats.critical_level.clone(), rho.clone());
    let masses = stats.cell_mode_masses.clone();
    let rows = model
        .f()
        .iter()
        .map(|&fx| optimal_row(&level, &masses, &stats.cell_mode_mass_sum, fx))
        .collect();
    Mechanism::from_rows(rows)
}

/// Add-noise form of [`optimal_lifted`]: the same rows indexed by function
/// value instead of data symbol.
pub fn optimal_addnoise<T: Scalar>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
    rho: &T,
) -> Result<AddNoiseMechanism<T>, MechanismError> {
    check_unit_interval(rho)?;
    let level = max_scalar(stats.critical_level.clone(), rho.clone());
    let masses = stats.cell_mode_masses.clone();
    let rows = (0..model.k())
        .map(|j| optimal_row(&level, &masses, &stats.cell_mode_mass_sum, j))
        .collect();
    AddNoiseMechanism::from_rows(rows)
}

fn optimal_row<T: Scalar>(level: &T, masses: &[T], mass_sum: &T, diag: usize) -> Vec<T> {
    let residual = T::one() - level.clone();
    let denom = mass_sum.clone() - masses[diag].clone();
    masses
        .iter()
        .enumerate()
        .map(|(i, mass)| {
            if i == diag {
                level.clone()
            } else {
                residual.clone() * mass.clone() / denom.clone()
            }
        })
        .collect()
}

/// The predicate-privacy-optimal row-lifted mechanism.
///
/// Degenerates to the deterministic channel when the predicate critical level
/// is 1 (within tolerance). Rows are constant on each joint cell
/// `f^{-1}(i) ∩ h^{-1}(j)`.
pub fn optimal_predicate_lifted<T: Scalar>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
    rho: &T,
) -> Result<Mechanism<T>, MechanismError> {
    check_unit_interval(rho)?;
    let pred = stats
        .predicate
        .as_ref()
        .ok_or(MechanismError::NoPredicate)?;
    let k = model.k();
    let m = model.m().expect("predicate implies m");

    if pred.critical_level.close_to(&T::one()) {
        let rows = model
            .f()
            .iter()
            .map(|&fx| indicator_row::<T>(k, fx))
            .collect();
        return Mechanism::from_rows(rows);
    }

    let level = max_scalar(pred.critical_level.clone(), rho.clone());
    let residual = T::one() - level.clone();
    let mut label_mass = vec![T::zero(); m];
    for (i, row) in pred.joint.iter().enumerate() {
        let _ = i;
        for (j, mass) in row.iter().enumerate() {
            label_mass[j] = label_mass[j].clone() + mass.clone();
        }
    }

    let mut rows = Vec::with_capacity(model.len());
    for (x, (&fx, &hx)) in model.f().iter().zip(model.h().unwrap()).enumerate() {
        let denom = pred.joint_mode_mass_sum.clone() - label_mass[hx].clone();
        if denom <= T::zero() {
            return Err(MechanismError::DegenerateDenominator { row: x });
        }
        let row: Vec<T> = (0..k)
            .map(|i| {
                let top = pred.joint[i][pred.cell_mode_labels[i]].clone()
                    - pred.joint[i][hx].clone();
                let spread = residual.clone() * top / denom.clone();
                if i == fx {
                    level.clone() + spread
                } else {
                    spread
                }
            })
            .collect();
        rows.push(row);
    }
    Mechanism::from_rows(rows)
}

/// Identity-predicate reduction of [`optimal_predicate_lifted`], built from
/// the displayed closed form with every numerator `mass_i - px(x)`.
///
/// Experimental: the displayed form yields negative entries (and rows that do
/// not sum to one) whenever some `px(x)` exceeds an off-cell mode mass, which
/// happens on most instances for `rho < 1`. Construction validates and
/// rejects such matrices rather than repairing them.
pub fn predicate_reduction_lifted<T: Scalar>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
    rho: &T,
) -> Result<Mechanism<T>, MechanismError> {
    check_unit_interval(rho)?;
    let level = max_scalar(stats.critical_level.clone(), rho.clone());
    let residual = T::one() - level.clone();
    let masses = stats.cell_mode_masses.clone();
    let mut rows = Vec::with_capacity(model.len());
    for (x, &fx) in model.f().iter().enumerate() {
        let denom = stats.cell_mode_mass_sum.clone() - model.px()[x].clone();
        if denom <= T::zero() {
            return Err(MechanismError::DegenerateDenominator { row: x });
        }
        let row: Vec<T> = (0..model.k())
            .map(|i| {
                let top = masses[i].clone() - model.px()[x].clone();
                let spread = residual.clone() * top / denom.clone();
                if i == fx {
                    level.clone() + spread
                } else {
                    spread
                }
            })
            .collect();
        rows.push(row);
    }
    Mechanism::from_rows(rows)
}

fn indicator_row<T: Scalar>(k: usize, hot: usize) -> Vec<T> {
    let mut row = vec![T::zero(); k];
    row[hot] = T::one();
    row
}

/// Paired-block add-noise scheme: 2x2 blocks `[[rho, 1-rho], [1-rho, rho]]`
/// down the diagonal; for odd `k` the last row sends its off-mass to label 0.
/// Does not depend on the data pmf.
pub fn paired_block_addnoise<T: Scalar>(
    k: usize,
    rho: &T,
) -> Result<AddNoiseMechanism<T>, MechanismError> {
    if k < 2 {
        return Err(MechanismError::AlphabetTooSmall { k });
    }
    check_unit_interval(rho)?;
    let mut rows = vec![vec![T::zero(); k]; k];
    for (j, row) in rows.iter_mut().enumerate() {
        row[j] = rho.clone();
        let partner = if j % 2 == 0 { (j + 1) % k } else { j - 1 };
        row[partner] = row[partner].clone() + (T::one() - rho.clone());
    }
    AddNoiseMechanism::from_rows(rows)
}

/// Uniform-block add-noise scheme for levels at or below one half: uniform
/// diagonal blocks of side `floor(1/rho)` plus one smaller filler block, or a
/// fully uniform matrix when `rho <= 1/k`. Does not depend on the data pmf.
pub fn uniform_block_addnoise<T: Scalar>(
    k: usize,
    rho: &T,
) -> Result<AddNoiseMechanism<T>, MechanismError> {
    if k < 2 {
        return Err(MechanismError::AlphabetTooSmall { k });
    }
    let half = T::from_ratio(1, 2);
    if *rho < T::zero() || *rho > half + T::tolerance() {
        return Err(MechanismError::RhoOutOfRealm {
            rho: format!("{rho}"),
            realm: "[0, 0.5]",
        });
    }
    let k_t = T::from_usize(k).expect("alphabet size fits the scalar");
    if rho.clone() * k_t <= T::one() + T::tolerance() {
        let cell = T::from_ratio(1, k as u64);
        return AddNoiseMechanism::from_rows(vec![vec![cell; k]; k]);
    }

    let side = inverse_floor(rho, k);
    let full_blocks = k / side;
    let filler = k % side;
    let block_cell = T::from_ratio(1, side as u64);
    let mut rows = vec![vec![T::zero(); k]; k];
    for (j, row) in rows.iter_mut().enumerate() {
        if j < full_blocks * side {
            let start = (j / side) * side;
            for cell in row.iter_mut().skip(start).take(side) {
                *cell = block_cell.clone();
            }
        } else {
            let filler_cell = T::from_ratio(1, filler as u64);
            for cell in row.iter_mut().skip(full_blocks * side) {
                *cell = filler_cell.clone();
            }
        }
    }
    AddNoiseMechanism::from_rows(rows)
}

/// Largest `q >= 1` with `q * rho <= 1` (within tolerance), capped at `k`.
pub(crate) fn inverse_floor<T: Scalar>(rho: &T, k: usize) -> usize {
    let mut q = 1;
    while q < k {
        let candidate = T::from_usize(q + 1).expect("fits scalar") * rho.clone();
        if candidate <= T::one() + T::tolerance() {
            q += 1;
        } else {
            break;
        }
    }
    q
}

/// Lifts an add-noise channel to a row-lifted mechanism by repeating the row
/// of `f(x)` for every data symbol `x`. Privacy is preserved.
pub fn lift_addnoise<T: Scalar>(v: &AddNoiseMechanism<T>, model: &DataModel<T>) -> Mechanism<T> {
    assert_eq!(v.k(), model.k());
    let rows = model.f().iter().map(|&fx| v.row(fx).to_vec()).collect();
    Mechanism { rows }
}

/// Collapses a mechanism whose rows are constant on each function preimage to
/// its add-noise form. Fails with [`MechanismError::NotRowConstant`] when two
/// rows of the same cell differ beyond tolerance.
pub fn collapse_to_addnoise<T: Scalar>(
    w: &Mechanism<T>,
    model: &DataModel<T>,
) -> Result<AddNoiseMechanism<T>, MechanismError> {
    assert_eq!(w.k(), model.k());
    assert_eq!(w.n_rows(), model.len());
    let mut rows: Vec<Option<Vec<T>>> = vec![None; model.k()];
    for (x, &fx) in model.f().iter().enumerate() {
        match &rows[fx] {
            None => rows[fx] = Some(w.row(x).to_vec()),
            Some(existing) => {
                let equal = existing
                    .iter()
                    .zip(w.row(x))
                    .all(|(a, b)| a.close_to(b));
                if !equal {
                    return Err(MechanismError::NotRowConstant { cell: fx });
                }
            }
        }
    }
    let rows = rows
        .into_iter()
        .map(|r| r.expect("surjective f fills every cell"))
        .collect();
    AddNoiseMechanism::from_rows(rows)
}

/// A stable response-label reordering by nonincreasing cell-mode mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relabeling {
    /// `new_to_old[new_label] = old_label`.
    pub new_to_old: Vec<usize>,
    /// `old_to_new[old_label] = new_label`.
    pub old_to_new: Vec<usize>,
}

impl Relabeling {
    pub fn is_identity(&self) -> bool {
        self.new_to_old.iter().enumerate().all(|(n, &o)| n == o)
    }

    /// Maps an add-noise channel built on the canonical labels back to the
    /// original labels.
    pub fn restore_addnoise<T: Scalar>(&self, v: &AddNoiseMechanism<T>) -> AddNoiseMechanism<T> {
        let k = v.k();
        let rows = (0..k)
            .map(|j| {
                (0..k)
                    .map(|i| v.prob(self.old_to_new[i], self.old_to_new[j]).clone())
                    .collect()
            })
            .collect();
        AddNoiseMechanism { rows }
    }

    /// Maps a row-lifted mechanism built on the canonical labels back to the
    /// original labels (columns are permuted; data rows stay in place).
    pub fn restore_lifted<T: Scalar>(&self, w: &Mechanism<T>) -> Mechanism<T> {
        let k = w.k();
        let rows = w
            .rows()
            .iter()
            .map(|row| (0..k).map(|i| row[self.old_to_new[i]].clone()).collect())
            .collect();
        Mechanism { rows }
    }
}

/// Relabels the response alphabet so cell-mode masses are nonincreasing
/// (stable: ties keep their original order). Returns the relabeled instance
/// and the permutation needed to restore the original labels.
pub fn canonical_relabel<T: Scalar>(
    model: &DataModel<T>,
    stats: &SupportStats<T>,
) -> (DataModel<T>, Relabeling) {
    let masses = stats.cell_mode_masses.clone();
    let mut new_to_old: Vec<usize> = (0..model.k()).collect();
    new_to_old.sort_by(|&a, &b| {
        masses[b]
            .partial_cmp(&masses[a])
            .expect("masses are ordered")
    });
    let mut old_to_new = vec![0; model.k()];
    for (new, &old) in new_to_old.iter().enumerate() {
        old_to_new[old] = new;
    }
    let f_new: Vec<usize> = model.f().iter().map(|&fx| old_to_new[fx]).collect();
    let relabeled = model
        .with_function(f_new, model.k())
        .expect("relabeling preserves validity");
    (
        relabeled,
        Relabeling {
            new_to_old,
            old_to_new,
        },
    )
}
