//! Small combinatorics kit shared by the type-class enumeration, the tail
//! bounds, and the grid-search oracle.

use num_traits::Float;

/// Iterates every vector of `parts` nonnegative integers summing to `total`,
/// starting from `(total, 0, .., 0)` and ending at `(0, .., 0, total)`.
pub(crate) struct Compositions {
    current: Option<Vec<usize>>,
}

impl Compositions {
    pub(crate) fn new(total: usize, parts: usize) -> Self {
        assert!(parts >= 1);
        let mut first = vec![0; parts];
        first[0] = total;
        Compositions {
            current: Some(first),
        }
    }

    /// Number of compositions: C(total + parts - 1, parts - 1).
    pub(crate) fn count(total: u64, parts: u64) -> Option<u64> {
        debug_assert!(parts >= 1);
        let mut acc: u64 = 1;
        for i in 1..parts {
            acc = acc.checked_mul(total + i)?.checked_div(i)?;
        }
        Some(acc)
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.current.take()?;
        let parts = current.len();
        let mut next = current.clone();
        // Successor: move one unit from the leftmost nonzero slot rightwards,
        // refilling everything before it into slot 0.
        let mut advanced = false;
        for i in 0..parts - 1 {
            if next[i] > 0 {
                let v = next[i];
                next[i] = 0;
                next[0] = v - 1;
                next[i + 1] += 1;
                advanced = true;
                break;
            }
        }
        if advanced {
            self.current = Some(next);
        }
        Some(current)
    }
}

/// Cumulative table of `ln(i!)` for `i = 0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    table.push(0.0);
    let mut acc = KahanSumT::new();
    for i in 1..=n {
        acc.add((i as f64).ln());
        table.push(acc.value());
    }
    table
}

/// ln of the multinomial coefficient `n! / prod(counts!)`.
pub(crate) fn ln_multinomial(table: &[f64], n: usize, counts: &[usize]) -> f64 {
    let mut v = table[n];
    for &c in counts {
        v -= table[c];
    }
    v
}

/// Neumaier-compensated accumulator for any float scalar.
pub(crate) struct KahanSumT<T: Float> {
    sum: T,
    compensation: T,
}

impl<T: Float> KahanSumT<T> {
    pub(crate) fn new() -> Self {
        KahanSumT {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    pub(crate) fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation = self.compensation + ((self.sum - t) + value);
        } else {
            self.compensation = self.compensation + ((value - t) + self.sum);
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> T {
        self.sum + self.compensation
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts() {
        for (total, parts, expect) in [(0, 1, 1), (3, 1, 1), (2, 2, 3), (7, 3, 36), (5, 4, 56)] {
            assert_eq!(Compositions::count(total, parts), Some(expect));
            assert_eq!(
                Compositions::new(total as usize, parts as usize).count(),
                expect as usize
            );
        }
    }

    #[test]
    fn compositions_sum_and_are_unique() {
        let all: Vec<_> = Compositions::new(5, 3).collect();
        for c in &all {
            assert_eq!(c.iter().sum::<usize>(), 5);
        }
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), all.len());
    }

    #[test]
    fn ln_multinomial_small_values() {
        let table = ln_factorials(6);
        let v = ln_multinomial(&table, 4, &[2, 1, 1]).exp();
        assert!((v - 12.0).abs() < 1e-10);
        let v = ln_multinomial(&table, 6, &[3, 3]).exp();
        assert!((v - 20.0).abs() < 1e-10);
    }
}
