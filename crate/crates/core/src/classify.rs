//! Jenks natural breaks and Likert level assignment.
//!
//! Values are grouped into distinct values first; a class boundary can
//! only fall between two distinct values, so duplicates never straddle a
//! break. Among partitions with equal total within-class squared
//! deviation (SDCM) the one with the lexicographically smallest break
//! sequence wins. The dynamic program and the exhaustive oracle evaluate
//! class costs through the same prefix sums and add them left to right,
//! so with an exact scalar they agree bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cmp_scalar, Scalar};

/// Largest input accepted by [`jenks_oracle`].
pub const ORACLE_MAX_VALUES: usize = 14;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("cannot classify an empty list")]
    Empty,
    #[error("number of classes must be at least 1")]
    ZeroClasses,
    #[error("{k} classes requested but only {distinct} distinct values")]
    TooManyClasses { k: usize, distinct: usize },
    #[error("value at position {0} is not finite")]
    NonFinite(usize),
    #[error("exhaustive search limited to {max} values, got {got}")]
    TooLarge { max: usize, got: usize },
    #[error("{0} classes cannot be mapped to Likert levels")]
    TooManyLevels(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreaksClassification<T = f64> {
    pub k: usize,
    /// Inclusive upper bound of each class, ascending; the last is the maximum.
    pub breaks: Vec<T>,
    pub sdcm: T,
    /// Goodness of variance fit, `1 - SDCM/SDAM`.
    pub gvf: T,
    /// Class index (0-based) of each input value, in input order.
    pub classes: Vec<usize>,
    pub class_sizes: Vec<usize>,
}

/// Distinct sorted values with multiplicities and running sums.
struct Groups<T> {
    values: Vec<T>,
    count: Vec<usize>,
    s1: Vec<T>,
    s2: Vec<T>,
}

impl<T: Scalar> Groups<T> {
    fn new(values: &[T]) -> Result<Self, ClassifyError> {
        if values.is_empty() {
            return Err(ClassifyError::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite_value()) {
            return Err(ClassifyError::NonFinite(i));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(cmp_scalar);
        let mut distinct: Vec<T> = Vec::new();
        let mut mult: Vec<usize> = Vec::new();
        for v in sorted {
            match distinct.last() {
                Some(last) if *last == v => *mult.last_mut().expect("paired") += 1,
                _ => {
                    distinct.push(v);
                    mult.push(1);
                }
            }
        }
        let mut count = vec![0];
        let mut s1 = vec![T::zero()];
        let mut s2 = vec![T::zero()];
        for (v, c) in distinct.iter().zip(&mult) {
            let c_t = T::from_count(*c);
            count.push(count.last().expect("seeded") + c);
            s1.push(s1.last().expect("seeded").clone() + c_t.clone() * v.clone());
            s2.push(s2.last().expect("seeded").clone() + c_t * v.clone() * v.clone());
        }
        Ok(Self {
            values: distinct,
            count,
            s1,
            s2,
        })
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    /// Squared deviation from the class mean for distinct groups `[a, b)`.
    fn cost(&self, a: usize, b: usize) -> T {
        let n = T::from_count(self.count[b] - self.count[a]);
        let s1 = self.s1[b].clone() - self.s1[a].clone();
        let s2 = self.s2[b].clone() - self.s2[a].clone();
        T::max_of(T::zero(), s2 - s1.clone() * s1 / n)
    }

    /// Total cost of the partition that splits before each position in `cuts`.
    fn partition_cost(&self, cuts: &[usize]) -> T {
        let mut total = T::zero();
        let mut start = 0;
        for &c in cuts.iter().chain(std::iter::once(&self.len())) {
            total = total + self.cost(start, c);
            start = c;
        }
        total
    }

    fn finish(&self, input: &[T], cuts: Vec<usize>) -> BreaksClassification<T> {
        let k = cuts.len() + 1;
        let ends: Vec<usize> = cuts.iter().copied().chain(std::iter::once(self.len())).collect();
        let breaks: Vec<T> = ends.iter().map(|e| self.values[e - 1].clone()).collect();
        let sdcm = self.partition_cost(&cuts);
        let sdam = self.cost(0, self.len());
        let gvf = if sdam.is_zero() {
            T::one()
        } else {
            (T::one() - sdcm.clone() / sdam).unit_clamp()
        };
        let classes: Vec<usize> = input
            .iter()
            .map(|v| breaks.iter().position(|b| v <= b).unwrap_or(k - 1))
            .collect();
        let mut class_sizes = vec![0; k];
        for c in &classes {
            class_sizes[*c] += 1;
        }
        BreaksClassification {
            k,
            breaks,
            sdcm,
            gvf,
            classes,
            class_sizes,
        }
    }
}

fn check_k<T>(groups: &Groups<T>, k: usize) -> Result<(), ClassifyError>
where
    T: Scalar,
{
    if k == 0 {
        return Err(ClassifyError::ZeroClasses);
    }
    if k > groups.len() {
        return Err(ClassifyError::TooManyClasses {
            k,
            distinct: groups.len(),
        });
    }
    Ok(())
}

#[derive(Clone)]
struct Cell<T> {
    cost: T,
    cuts: Vec<usize>,
}

fn better<T: Scalar>(cost: &T, cuts: &[usize], than: &Cell<T>) -> bool {
    match cost.partial_cmp(&than.cost) {
        Some(std::cmp::Ordering::Less) => true,
        Some(std::cmp::Ordering::Equal) => cuts < than.cuts.as_slice(),
        _ => false,
    }
}

/// Optimal contiguous `k`-class partition by dynamic programming over the
/// distinct values, `O(k·m²)` for `m` distinct values.
#[allow(clippy::needless_range_loop)]
pub fn jenks_breaks<T: Scalar>(values: &[T], k: usize) -> Result<BreaksClassification<T>, ClassifyError> {
    let groups = Groups::new(values)?;
    check_k(&groups, k)?;
    let m = groups.len();
    // row[i]: best partition of groups [0, i) into the current number of classes
    let mut row: Vec<Option<Cell<T>>> = (0..=m)
        .map(|i| {
            (i >= 1).then(|| Cell {
                cost: groups.cost(0, i),
                cuts: Vec::new(),
            })
        })
        .collect();
    for classes in 2..=k {
        let mut next: Vec<Option<Cell<T>>> = vec![None; m + 1];
        for i in classes..=m {
            let mut best: Option<Cell<T>> = None;
            for p in (classes - 1)..i {
                let Some(prev) = &row[p] else { continue };
                let cost = prev.cost.clone() + groups.cost(p, i);
                let take = match &best {
                    None => true,
                    Some(b) => {
                        let mut cuts = prev.cuts.clone();
                        cuts.push(p);
                        better(&cost, &cuts, b)
                    }
                };
                if take {
                    let mut cuts = prev.cuts.clone();
                    cuts.push(p);
                    best = Some(Cell { cost, cuts });
                }
            }
            next[i] = best;
        }
        row = next;
    }
    let best = row[m].take().expect("k ≤ distinct values guarantees a partition");
    Ok(groups.finish(values, best.cuts))
}

/// Exhaustive search over every contiguous `k`-class partition; for
/// verification on small inputs.
pub fn jenks_oracle<T: Scalar>(values: &[T], k: usize) -> Result<BreaksClassification<T>, ClassifyError> {
    if values.len() > ORACLE_MAX_VALUES {
        return Err(ClassifyError::TooLarge {
            max: ORACLE_MAX_VALUES,
            got: values.len(),
        });
    }
    let groups = Groups::new(values)?;
    check_k(&groups, k)?;
    let m = groups.len();
    let mut cuts: Vec<usize> = (1..k).collect();
    let mut best = Cell {
        cost: groups.partition_cost(&cuts),
        cuts: cuts.clone(),
    };
    // combinations of k-1 cut positions from 1..m in lexicographic order
    while let Some(i) = (0..cuts.len()).rev().find(|&i| cuts[i] < m - (cuts.len() - i)) {
        cuts[i] += 1;
        for j in i + 1..cuts.len() {
            cuts[j] = cuts[j - 1] + 1;
        }
        let cost = groups.partition_cost(&cuts);
        if better(&cost, &cuts, &best) {
            best = Cell {
                cost,
                cuts: cuts.clone(),
            };
        }
    }
    Ok(groups.finish(values, best.cuts))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertAssignment {
    /// 1 is the lowest-value class, `k` the highest.
    pub levels: Vec<u8>,
    pub warnings: Vec<String>,
}

/// Level of each value: the first class whose upper bound is ≥ the value.
/// Values above the last break get the top level and a warning.
pub fn assign_likert<T: Scalar>(
    values: &[T],
    classification: &BreaksClassification<T>,
) -> Result<LikertAssignment, ClassifyError> {
    let k = classification.breaks.len();
    if k == 0 {
        return Err(ClassifyError::ZeroClasses);
    }
    if k > usize::from(u8::MAX) {
        return Err(ClassifyError::TooManyLevels(k));
    }
    let mut warnings = Vec::new();
    let levels = values
        .iter()
        .enumerate()
        .map(|(i, v)| match classification.breaks.iter().position(|b| v <= b) {
            Some(c) => (c + 1) as u8,
            None => {
                warnings.push(format!("value #{i} ({:?}) lies above the last break", v.to_real()));
                k as u8
            }
        })
        .collect();
    Ok(LikertAssignment { levels, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;
    use proptest::prelude::*;

    /// Independent check: SDCM of a labelled partition by two-pass means.
    fn sdcm_two_pass(values: &[f64], classes: &[usize], k: usize) -> f64 {
        (0..k)
            .map(|c| {
                let members: Vec<f64> = values
                    .iter()
                    .zip(classes)
                    .filter(|(_, cc)| **cc == c)
                    .map(|(v, _)| *v)
                    .collect();
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                members.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn two_obvious_clusters() {
        let values = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0];
        let c = jenks_breaks(&values, 2).unwrap();
        assert_eq!(c.breaks, vec![3.0, 12.0]);
        assert_eq!(c.classes, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(c.sdcm, 4.0);
        assert_eq!(c.class_sizes, vec![3, 3]);
        assert_eq!(jenks_oracle(&values, 2).unwrap(), c);
    }

    #[test]
    fn single_class_and_one_per_class() {
        let c = jenks_breaks(&[4.0, 1.0, 9.0], 1).unwrap();
        assert_eq!(c.breaks, vec![9.0]);
        assert_eq!(c.gvf, 0.0);
        let c = jenks_breaks(&[3.0, 1.0, 2.0], 3).unwrap();
        assert_eq!(c.breaks, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.sdcm, 0.0);
        assert_eq!(c.gvf, 1.0);
        assert_eq!(c.classes, vec![2, 0, 1]);
    }

    #[test]
    fn constant_data() {
        let c = jenks_oracle(&[5.0, 5.0, 5.0, 5.0], 1).unwrap();
        assert_eq!(c.sdcm, 0.0);
        assert_eq!(c.gvf, 1.0);
        assert_eq!(
            jenks_breaks(&[5.0, 5.0], 2),
            Err(ClassifyError::TooManyClasses { k: 2, distinct: 1 })
        );
    }

    #[test]
    fn error_paths() {
        assert_eq!(jenks_breaks::<f64>(&[], 1), Err(ClassifyError::Empty));
        assert_eq!(jenks_breaks(&[1.0], 0), Err(ClassifyError::ZeroClasses));
        assert_eq!(jenks_breaks(&[1.0, f64::NAN], 1), Err(ClassifyError::NonFinite(1)));
        let many: Vec<f64> = (0..15).map(f64::from).collect();
        assert_eq!(
            jenks_oracle(&many, 2),
            Err(ClassifyError::TooLarge { max: 14, got: 15 })
        );
    }

    #[test]
    fn ties_prefer_the_smallest_first_break() {
        // {0},{1,2} and {0,1},{2} both have SDCM 0.5
        let c = jenks_breaks(&[0.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(c.breaks, vec![0.0, 2.0]);
        assert_eq!(jenks_oracle(&[0.0, 1.0, 2.0], 2).unwrap().breaks, vec![0.0, 2.0]);
    }

    #[test]
    fn duplicates_stay_together() {
        let values = [1.0, 1.0, 1.0, 2.0, 2.0, 9.0, 9.0];
        let c = jenks_breaks(&values, 3).unwrap();
        assert_eq!(c.breaks, vec![1.0, 2.0, 9.0]);
        assert_eq!(c.class_sizes, vec![3, 2, 2]);
    }

    #[test]
    fn oracle_beats_hand_picked_partitions() {
        let values = [3.1, 0.4, 7.7, 7.9, 2.2, 5.0, 9.8, 0.1, 6.3, 4.4];
        let best = jenks_oracle(&values, 5).unwrap();
        let hand: [usize; 10] = [1, 0, 3, 3, 1, 2, 4, 0, 3, 2];
        assert!(best.sdcm <= sdcm_two_pass(&values, &hand, 5) + 1e-12);
        assert!((best.sdcm - sdcm_two_pass(&values, &best.classes, 5)).abs() < 1e-9);
    }

    #[test]
    fn likert_levels() {
        let c = jenks_breaks(&[1.0, 2.0, 3.0, 10.0, 11.0, 12.0], 2).unwrap();
        let a = assign_likert(&[2.0, 3.0, 10.0, 12.0], &c).unwrap();
        assert_eq!(a.levels, vec![1, 1, 2, 2]);
        assert!(a.warnings.is_empty());
        let out = assign_likert(&[13.0], &c).unwrap();
        assert_eq!(out.levels, vec![2]);
        assert_eq!(out.warnings.len(), 1);
    }

    fn small_values() -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(0i64..12, 1..=ORACLE_MAX_VALUES)
    }

    proptest! {
        #[test]
        fn dp_matches_oracle_exactly(values in small_values(), k in 1usize..=5) {
            let exact: Vec<Exact> = values.iter().map(|v| Exact::ratio(*v, 3)).collect();
            let distinct = { let mut d = values.clone(); d.sort(); d.dedup(); d.len() };
            prop_assume!(k <= distinct);
            let dp = jenks_breaks(&exact, k).unwrap();
            let oracle = jenks_oracle(&exact, k).unwrap();
            prop_assert_eq!(dp, oracle);
        }

        #[test]
        fn affine_maps_keep_memberships(values in small_values(), k in 1usize..=5, a in 1i64..20, b in -30i64..30) {
            let distinct = { let mut d = values.clone(); d.sort(); d.dedup(); d.len() };
            prop_assume!(k <= distinct);
            let base: Vec<Exact> = values.iter().map(|v| Exact::ratio(*v, 1)).collect();
            let mapped: Vec<Exact> = base.iter().map(|v| v * Exact::ratio(a, 7) + Exact::ratio(b, 1)).collect();
            prop_assert_eq!(jenks_breaks(&base, k).unwrap().classes, jenks_breaks(&mapped, k).unwrap().classes);
        }

        #[test]
        fn gvf_grows_with_k(values in small_values()) {
            let exact: Vec<Exact> = values.iter().map(|v| Exact::ratio(*v, 2)).collect();
            let distinct = { let mut d = values.clone(); d.sort(); d.dedup(); d.len() };
            let mut prev = Exact::ratio(-1, 1);
            for k in 1..=distinct.min(5) {
                let c = jenks_breaks(&exact, k).unwrap();
                prop_assert!(c.gvf >= Exact::ratio(0, 1) && c.gvf <= Exact::ratio(1, 1));
                prop_assert!(c.gvf >= prev);
                prev = c.gvf;
            }
        }

        #[test]
        fn likert_is_monotone(values in prop::collection::vec(0.0f64..100.0, 5..40), probes in prop::collection::vec(0.0f64..120.0, 2..20)) {
            let c = jenks_breaks(&values, 3.min(values.len())).unwrap();
            let mut sorted = probes.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let levels = assign_likert(&sorted, &c).unwrap().levels;
            prop_assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
