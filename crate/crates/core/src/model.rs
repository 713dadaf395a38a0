//! Problem instances: a strictly positive pmf on a finite data alphabet, a
//! surjective function onto the response alphabet, and (optionally) a
//! predicate onto a third alphabet. Also the two joint-table liftings that
//! turn "privacy for correlated data" questions into predicate instances.

use thiserror::Error;

use crate::scalar::{argmax, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    /// Every symbol must carry strictly positive mass.
    #[error("probability mass at index {index} is not strictly positive")]
    NonPositiveMass { index: usize },
    /// The pmf must sum to one within the scalar tolerance.
    #[error("probability vector sums to {sum} (must be 1 within tolerance)")]
    NotNormalized { sum: String },
    /// A label map must cover its declared range.
    #[error("{map} does not map onto {{0..{alphabet}}}: {detail}")]
    NotSurjective {
        map: &'static str,
        alphabet: usize,
        detail: String,
    },
    /// Response and predicate alphabets need at least two labels.
    #[error("alphabet of size {size} is too small (need at least 2)")]
    AlphabetTooSmall { size: usize },
    /// Arrays describing one instance must agree in length.
    #[error("length mismatch: {detail}")]
    LengthMismatch { detail: String },
}

/// A validated problem instance.
///
/// Immutable after construction; the pmf has been renormalized exactly once
/// at ingestion (inputs must already sum to one within tolerance).
#[derive(Debug, Clone, PartialEq)]
pub struct DataModel<T> {
    px: Vec<T>,
    f: Vec<usize>,
    k: usize,
    h: Option<Vec<usize>>,
    m: Option<usize>,
}

impl<T: Scalar> DataModel<T> {
    /// Builds and validates an instance with a declared response alphabet size.
    pub fn new(px: Vec<T>, f: Vec<usize>, k: usize) -> Result<Self, ModelError> {
        Self::build(px, f, k, None, None)
    }

    /// Builds an instance, inferring `k` as `max(f) + 1`.
    pub fn from_maps(px: Vec<T>, f: Vec<usize>) -> Result<Self, ModelError> {
        let k = f.iter().copied().max().map_or(0, |v| v + 1);
        Self::build(px, f, k, None, None)
    }

    /// Builds an instance carrying a predicate map with a declared range size.
    pub fn with_predicate(
        px: Vec<T>,
        f: Vec<usize>,
        k: usize,
        h: Vec<usize>,
        m: usize,
    ) -> Result<Self, ModelError> {
        Self::build(px, f, k, Some(h), Some(m))
    }

    /// Builds a predicate-carrying instance, inferring both range sizes.
    pub fn from_maps_with_predicate(
        px: Vec<T>,
        f: Vec<usize>,
        h: Vec<usize>,
    ) -> Result<Self, ModelError> {
        let k = f.iter().copied().max().map_or(0, |v| v + 1);
        let m = h.iter().copied().max().map_or(0, |v| v + 1);
        Self::build(px, f, k, Some(h), Some(m))
    }

    fn build(
        px: Vec<T>,
        f: Vec<usize>,
        k: usize,
        h: Option<Vec<usize>>,
        m: Option<usize>,
    ) -> Result<Self, ModelError> {
        let r = px.len();
        if f.len() != r {
            return Err(ModelError::LengthMismatch {
                detail: format!("pmf has {r} entries but f has {}", f.len()),
            });
        }
        if let Some(h) = &h {
            if h.len() != r {
                return Err(ModelError::LengthMismatch {
                    detail: format!("pmf has {r} entries but h has {}", h.len()),
                });
            }
        }
        for (index, p) in px.iter().enumerate() {
            if *p <= T::zero() {
                return Err(ModelError::NonPositiveMass { index });
            }
        }
        let mut sum = T::zero();
        for p in &px {
            sum = sum + p.clone();
        }
        if !sum.close_to(&T::one()) {
            return Err(ModelError::NotNormalized {
                sum: format!("{sum}"),
            });
        }
        let px: Vec<T> = px.into_iter().map(|p| p / sum.clone()).collect();

        validate_onto(&f, k, "f", r)?;
        if let (Some(h), Some(m)) = (&h, m) {
            validate_onto(h, m, "h", r)?;
        }

        Ok(DataModel { px, f, k, h, m })
    }

    pub fn len(&self) -> usize {
        self.px.len()
    }

    pub fn is_empty(&self) -> bool {
        self.px.is_empty()
    }

    /// Size of the response alphabet.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Size of the predicate alphabet, when a predicate is present.
    pub fn m(&self) -> Option<usize> {
        self.m
    }

    pub fn px(&self) -> &[T] {
        &self.px
    }

    pub fn f(&self) -> &[usize] {
        &self.f
    }

    pub fn h(&self) -> Option<&[usize]> {
        self.h.as_deref()
    }

    /// Data symbols mapped to response label `i`.
    pub fn cell(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.f
            .iter()
            .enumerate()
            .filter_map(move |(x, &fx)| (fx == i).then_some(x))
    }

    /// Replaces the function map, revalidating surjectivity. The pmf and
    /// predicate are kept as-is.
    pub fn with_function(&self, f: Vec<usize>, k: usize) -> Result<Self, ModelError> {
        Self::build(self.px.clone(), f, k, self.h.clone(), self.m)
    }

    /// Structural compatibility: same data alphabet, function, and predicate.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.len() == other.len() && self.f == other.f && self.k == other.k && self.h == other.h
    }
}

fn validate_onto(
    map: &[usize],
    alphabet: usize,
    name: &'static str,
    r: usize,
) -> Result<(), ModelError> {
    if alphabet < 2 {
        return Err(ModelError::AlphabetTooSmall { size: alphabet });
    }
    if alphabet > r {
        return Err(ModelError::NotSurjective {
            map: name,
            alphabet,
            detail: format!("range of size {alphabet} exceeds data alphabet of size {r}"),
        });
    }
    let mut seen = vec![false; alphabet];
    for (x, &label) in map.iter().enumerate() {
        if label >= alphabet {
            return Err(ModelError::NotSurjective {
                map: name,
                alphabet,
                detail: format!("{name}({x}) = {label} is out of range"),
            });
        }
        seen[label] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(ModelError::NotSurjective {
            map: name,
            alphabet,
            detail: format!("label {missing} has empty preimage"),
        });
    }
    Ok(())
}

/// Per-cell maxima and critical levels of an instance.
///
/// `cell_modes[i]` is the most probable data symbol inside the preimage of
/// response label `i` (lowest index on ties), and `critical_level` is the
/// recoverability level below which the optimal response is uninformative.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportStats<T> {
    /// Most probable data symbol overall (lowest index on ties).
    pub mode: usize,
    /// Response label of the overall mode.
    pub mode_cell: usize,
    /// Per-response-label most probable data symbol.
    pub cell_modes: Vec<usize>,
    /// Per-response-label mode mass, indexed like `cell_modes`.
    pub cell_mode_masses: Vec<T>,
    /// Sum of the per-cell mode masses.
    pub cell_mode_mass_sum: T,
    /// Critical recoverability level in `[1/k, 1)`.
    pub critical_level: T,
    /// Present iff the instance carries a predicate.
    pub predicate: Option<PredicateStats<T>>,
}

/// Predicate counterpart of [`SupportStats`].
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateStats<T> {
    /// Most probable predicate label (lowest index on ties).
    pub mode_label: usize,
    /// Joint mass table: `joint[i][j]` is the mass of the cell
    /// `f^{-1}(i) ∩ h^{-1}(j)`.
    pub joint: Vec<Vec<T>>,
    /// Per-response-label maximizing predicate label.
    pub cell_mode_labels: Vec<usize>,
    /// Sum over response labels of the maximal joint cell masses.
    pub joint_mode_mass_sum: T,
    /// Critical level for predicate recovery, in `[max(1/m, 1/k), 1]`.
    pub critical_level: T,
}

impl<T: Scalar> SupportStats<T> {
    /// Per-cell mode masses sorted nonincreasing (stable on ties), the
    /// canonical ordering for the block-scheme bounds.
    pub fn sorted_cell_mode_masses(&self) -> Vec<T> {
        let mut masses = self.cell_mode_masses.clone();
        masses.sort_by(|a, b| b.partial_cmp(a).expect("masses are ordered"));
        masses
    }
}

/// Computes per-cell maxima, critical levels, and the predicate analogues.
/// All argmax ties break toward the lowest index.
pub fn support_stats<T: Scalar>(model: &DataModel<T>) -> SupportStats<T> {
    let px = model.px();
    let k = model.k();
    let mode = argmax(px.iter());
    let mode_cell = model.f()[mode];

    let mut cell_modes = vec![usize::MAX; k];
    for (x, &i) in model.f().iter().enumerate() {
        let current = cell_modes[i];
        if current == usize::MAX || px[x] > px[current] {
            cell_modes[i] = x;
        }
    }
    let cell_mode_masses: Vec<T> = cell_modes.iter().map(|&x| px[x].clone()).collect();
    let mut cell_mode_mass_sum = T::zero();
    for mass in &cell_mode_masses {
        cell_mode_mass_sum = cell_mode_mass_sum + mass.clone();
    }
    let critical_level = px[mode].clone() / cell_mode_mass_sum.clone();

    let predicate = model.h().map(|h| {
        let m = model.m().expect("predicate present implies m");
        let mut joint = vec![vec![T::zero(); m]; k];
        for (x, (&i, &j)) in model.f().iter().zip(h.iter()).enumerate() {
            joint[i][j] = joint[i][j].clone() + px[x].clone();
        }
        let mut label_mass = vec![T::zero(); m];
        for (x, &j) in h.iter().enumerate() {
            label_mass[j] = label_mass[j].clone() + px[x].clone();
        }
        let mode_label = argmax(label_mass.iter());
        let cell_mode_labels: Vec<usize> = joint.iter().map(|row| argmax(row.iter())).collect();
        let mut joint_mode_mass_sum = T::zero();
        for (i, &j) in cell_mode_labels.iter().enumerate() {
            joint_mode_mass_sum = joint_mode_mass_sum + joint[i][j].clone();
        }
        let critical_level = label_mass[mode_label].clone() / joint_mode_mass_sum.clone();
        PredicateStats {
            mode_label,
            joint,
            cell_mode_labels,
            joint_mode_mass_sum,
            critical_level,
        }
    });

    SupportStats {
        mode,
        mode_cell,
        cell_modes,
        cell_mode_masses,
        cell_mode_mass_sum,
        critical_level,
        predicate,
    }
}

/// Lifts a joint table on data × auxiliary into an augmented instance whose
/// predicate is the auxiliary coordinate: privacy for a randomized function of
/// the data becomes predicate privacy on the result.
///
/// The augmented alphabet enumerates pairs row-major: `(x, y) -> x * m + y`.
pub fn lift_randomized_function<T: Scalar>(
    joint: &[Vec<T>],
    f: &[usize],
) -> Result<DataModel<T>, ModelError> {
    let (rows, cols) = joint_dims(joint)?;
    if f.len() != rows {
        return Err(ModelError::LengthMismatch {
            detail: format!("joint table has {rows} rows but f has {} entries", f.len()),
        });
    }
    let k = f.iter().copied().max().map_or(0, |v| v + 1);
    let mut px = Vec::with_capacity(rows * cols);
    let mut f_bar = Vec::with_capacity(rows * cols);
    let mut h_bar = Vec::with_capacity(rows * cols);
    for (x, row) in joint.iter().enumerate() {
        for (y, mass) in row.iter().enumerate() {
            px.push(mass.clone());
            f_bar.push(f[x]);
            h_bar.push(y);
        }
    }
    DataModel::with_predicate(px, f_bar, k, h_bar, cols)
}

/// Lifts a joint table on private × nonprivate data into an instance whose
/// function releases the nonprivate coordinate while the predicate asks for
/// the private one.
pub fn lift_private_nonprivate<T: Scalar>(joint: &[Vec<T>]) -> Result<DataModel<T>, ModelError> {
    let (rows, cols) = joint_dims(joint)?;
    let mut px = Vec::with_capacity(rows * cols);
    let mut f_tilde = Vec::with_capacity(rows * cols);
    let mut h_tilde = Vec::with_capacity(rows * cols);
    for (x, row) in joint.iter().enumerate() {
        for (y, mass) in row.iter().enumerate() {
            px.push(mass.clone());
            f_tilde.push(y);
            h_tilde.push(x);
        }
    }
    DataModel::with_predicate(px, f_tilde, cols, h_tilde, rows)
}

fn joint_dims<T: Scalar>(joint: &[Vec<T>]) -> Result<(usize, usize), ModelError> {
    let rows = joint.len();
    if rows < 1 {
        return Err(ModelError::AlphabetTooSmall { size: 0 });
    }
    let cols = joint[0].len();
    if rows < 2 {
        return Err(ModelError::AlphabetTooSmall { size: rows });
    }
    if cols < 2 {
        return Err(ModelError::AlphabetTooSmall { size: cols });
    }
    for row in joint {
        if row.len() != cols {
            return Err(ModelError::LengthMismatch {
                detail: "joint table rows have unequal lengths".into(),
            });
        }
    }
    // Positivity of every cell; normalization is checked by the constructor.
    for (x, row) in joint.iter().enumerate() {
        for (y, mass) in row.iter().enumerate() {
            if *mass <= T::zero() {
                return Err(ModelError::NonPositiveMass { index: x * cols + y });
            }
        }
    }
    Ok((rows, cols))
}
