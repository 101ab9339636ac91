//! Sparse finitely supported vectors and probability measures on group
//! elements.
//!
//! These are the carriers of approximate invariant means and of ℓ²
//! certificate rows: a [`ProbMeasure`] is a finitely supported
//! probability density `m` on a group, a [`SparseVec`] a finitely
//! supported real vector. The module provides left translation
//! (`(s.m)({t}) = m({s⁻¹t})`), the total-variation distance that
//! measures translation deficiency (`‖s.m − m'‖₁`), and ℓ² distances.
//!
//! Two numerical rules hold throughout:
//!
//! * sums over supports use Neumaier-compensated accumulation, so the
//!   crate's 1e−12 normalization tolerance stays meaningful on supports
//!   with tens of thousands of entries, and
//! * entries are pruned only when exactly zero — deficiencies must never
//!   be shrunk by silent truncation.

use std::collections::BTreeMap;

use crate::group::{GroupDescriptor, GroupElement};
use crate::{Error, Result, NORM_TOL};

// ===========================================================================
// Compensated summation
// ===========================================================================

/// Neumaier's variant of Kahan summation: exact enough that the error of
/// a full-support sum stays far below [`NORM_TOL`] at every support size
/// this crate produces.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

// ===========================================================================
// Sparse vectors
// ===========================================================================

/// A finitely supported real-valued function on a group, stored as a
/// sorted list of `(element, value)` entries (canonical element order,
/// distinct keys, all values finite and nonzero).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    descriptor: GroupDescriptor,
    entries: Vec<(GroupElement, f64)>,
}

impl SparseVec {
    pub fn empty(descriptor: GroupDescriptor) -> SparseVec {
        SparseVec {
            descriptor,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from arbitrary entries: elements are validated
    /// against the descriptor, duplicate keys are summed, exact zeros
    /// pruned, non-finite values rejected.
    pub fn from_entries(
        descriptor: GroupDescriptor,
        entries: Vec<(GroupElement, f64)>,
    ) -> Result<SparseVec> {
        let mut map: BTreeMap<GroupElement, f64> = BTreeMap::new();
        for (g, v) in entries {
            descriptor.validate_element(&g)?;
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite value {v} at {g}")));
            }
            *map.entry(g).or_insert(0.0) += v;
        }
        Ok(SparseVec {
            descriptor,
            entries: map.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        })
    }

    /// Internal constructor for entries already validated, sorted, and
    /// distinct (translation images, row exports).
    pub(crate) fn from_sorted_unchecked(
        descriptor: GroupDescriptor,
        entries: Vec<(GroupElement, f64)>,
    ) -> SparseVec {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseVec {
            descriptor,
            entries: entries.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        }
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.descriptor
    }

    /// Entries in canonical element order.
    pub fn entries(&self) -> &[(GroupElement, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Value at `g` (zero off the support).
    pub fn get(&self, g: &GroupElement) -> f64 {
        match self.entries.binary_search_by(|(e, _)| e.cmp(g)) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn sum(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for (_, v) in &self.entries {
            acc.add(*v);
        }
        acc.value()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for (_, v) in &self.entries {
            acc.add(v * v);
        }
        acc.value()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Entrywise sum `self + other`.
    pub fn add(&self, other: &SparseVec) -> Result<SparseVec> {
        self.merge_with(other, |a, b| a + b)
    }

    /// Entrywise difference `self − other`.
    pub fn sub(&self, other: &SparseVec) -> Result<SparseVec> {
        self.merge_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> SparseVec {
        SparseVec {
            descriptor: self.descriptor,
            entries: self
                .entries
                .iter()
                .map(|(g, v)| (g.clone(), c * v))
                .filter(|(_, v)| *v != 0.0)
                .collect(),
        }
    }

    fn merge_with(&self, other: &SparseVec, f: impl Fn(f64, f64) -> f64) -> Result<SparseVec> {
        if self.descriptor != other.descriptor {
            return Err(Error::mismatch(&self.descriptor, &other.descriptor));
        }
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let take_left = match (self.entries.get(i), other.entries.get(j)) {
                (Some((a, _)), Some((b, _))) => match a.cmp(b) {
                    std::cmp::Ordering::Less => Some(true),
                    std::cmp::Ordering::Greater => Some(false),
                    std::cmp::Ordering::Equal => None,
                },
                (Some(_), None) => Some(true),
                (None, Some(_)) => Some(false),
                (None, None) => unreachable!(),
            };
            let (g, v) = match take_left {
                Some(true) => {
                    let (g, v) = &self.entries[i];
                    i += 1;
                    (g.clone(), f(*v, 0.0))
                }
                Some(false) => {
                    let (g, v) = &other.entries[j];
                    j += 1;
                    (g.clone(), f(0.0, *v))
                }
                None => {
                    let (g, a) = &self.entries[i];
                    let b = other.entries[j].1;
                    i += 1;
                    j += 1;
                    (g.clone(), f(*a, b))
                }
            };
            if v != 0.0 {
                out.push((g, v));
            }
        }
        Ok(SparseVec {
            descriptor: self.descriptor,
            entries: out,
        })
    }
}

/// `⟨v₁, v₂⟩ = Σ_t v₁(t)·v₂(t)`.
pub fn inner(v1: &SparseVec, v2: &SparseVec) -> Result<f64> {
    if v1.descriptor != v2.descriptor {
        return Err(Error::mismatch(&v1.descriptor, &v2.descriptor));
    }
    let mut acc = NeumaierSum::new();
    let (a, b) = (v1.entries(), v2.entries());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc.add(a[i].1 * b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    Ok(acc.value())
}

/// Squared ℓ² distance `Σ_t |v₁(t) − v₂(t)|²`.
pub fn l2_distance_sq(v1: &SparseVec, v2: &SparseVec) -> Result<f64> {
    if v1.descriptor != v2.descriptor {
        return Err(Error::mismatch(&v1.descriptor, &v2.descriptor));
    }
    let mut acc = NeumaierSum::new();
    merge_sorted(v1.entries(), v2.entries(), |a, b| {
        let d = a - b;
        acc.add(d * d);
    });
    Ok(acc.value())
}

/// ℓ² distance `(Σ_t |v₁(t) − v₂(t)|²)^{1/2}`.
pub fn l2_distance(v1: &SparseVec, v2: &SparseVec) -> Result<f64> {
    Ok(l2_distance_sq(v1, v2)?.sqrt())
}

/// Walks the union of two sorted supports, feeding aligned value pairs
/// (zero where absent) to `f`.
fn merge_sorted(a: &[(GroupElement, f64)], b: &[(GroupElement, f64)], mut f: impl FnMut(f64, f64)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                f(a[i].1, 0.0);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                f(0.0, b[j].1);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                f(a[i].1, b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    while i < a.len() {
        f(a[i].1, 0.0);
        i += 1;
    }
    while j < b.len() {
        f(0.0, b[j].1);
        j += 1;
    }
}

// ===========================================================================
// Probability measures
// ===========================================================================

/// A finitely supported probability measure: nonnegative masses summing
/// to 1 within [`NORM_TOL`]. Uniform measures are built from one shared
/// reciprocal, so all their masses are the identical f64 value.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMeasure {
    vec: SparseVec,
}

impl ProbMeasure {
    /// Validates nonnegativity and total mass.
    pub fn from_entries(
        descriptor: GroupDescriptor,
        entries: Vec<(GroupElement, f64)>,
    ) -> Result<ProbMeasure> {
        let vec = SparseVec::from_entries(descriptor, entries)?;
        if let Some((g, v)) = vec.entries().iter().find(|(_, v)| *v < 0.0) {
            return Err(Error::Domain(format!("negative mass {v} at {g}")));
        }
        let total = vec.sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain(format!(
                "total mass {total} deviates from 1 by more than {NORM_TOL}"
            )));
        }
        Ok(ProbMeasure { vec })
    }

    /// Uniform measure on a set of distinct elements, each with mass
    /// `1/n` (one division, shared exactly by every entry).
    pub fn uniform(descriptor: GroupDescriptor, support: Vec<GroupElement>) -> Result<ProbMeasure> {
        if support.is_empty() {
            return Err(Error::Domain("uniform measure needs nonempty support".into()));
        }
        let mass = 1.0 / support.len() as f64;
        let n = support.len();
        let vec = SparseVec::from_entries(
            descriptor,
            support.into_iter().map(|g| (g, mass)).collect(),
        )?;
        if vec.len() != n {
            return Err(Error::Domain(
                "uniform measure support contains duplicates".into(),
            ));
        }
        Ok(ProbMeasure { vec })
    }

    /// Point mass at `g`.
    pub fn dirac(descriptor: GroupDescriptor, g: GroupElement) -> Result<ProbMeasure> {
        descriptor.validate_element(&g)?;
        Ok(ProbMeasure {
            vec: SparseVec::from_sorted_unchecked(descriptor, vec![(g, 1.0)]),
        })
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.vec.descriptor()
    }

    pub fn mass(&self, g: &GroupElement) -> f64 {
        self.vec.get(g)
    }

    /// Entries in canonical element order.
    pub fn entries(&self) -> &[(GroupElement, f64)] {
        self.vec.entries()
    }

    pub fn support_size(&self) -> usize {
        self.vec.len()
    }

    pub fn as_sparse(&self) -> &SparseVec {
        &self.vec
    }

    pub fn total_mass(&self) -> f64 {
        self.vec.sum()
    }
}

/// Left translation (pushforward by left multiplication):
/// `(s.m)({t}) = m({s⁻¹t})`, i.e. the mass at `u` moves to `s·u`.
/// Masses are carried over unchanged, so total mass is preserved
/// exactly, bit for bit.
pub fn translate(s: &GroupElement, m: &ProbMeasure) -> Result<ProbMeasure> {
    let d = m.descriptor();
    d.validate_element(s)?;
    let mut entries: Vec<(GroupElement, f64)> = m
        .entries()
        .iter()
        .map(|(u, v)| Ok((d.mul(s, u)?, *v)))
        .collect::<Result<_>>()?;
    entries.sort_by(|(a, _), (b, _)| a.cmp(b));
    Ok(ProbMeasure {
        vec: SparseVec::from_sorted_unchecked(d, entries),
    })
}

/// Total-variation (ℓ¹) distance `Σ_t |m₁({t}) − m₂({t})|`.
pub fn tv_distance(m1: &ProbMeasure, m2: &ProbMeasure) -> Result<f64> {
    if m1.descriptor() != m2.descriptor() {
        return Err(Error::mismatch(&m1.descriptor(), &m2.descriptor()));
    }
    let mut acc = NeumaierSum::new();
    merge_sorted(m1.entries(), m2.entries(), |a, b| acc.add((a - b).abs()));
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupDescriptor {
        GroupDescriptor::free(2).unwrap()
    }

    fn w(s: &str) -> GroupElement {
        f2().parse_element(s).unwrap()
    }

    #[test]
    fn translation_is_a_pushforward() {
        let m = ProbMeasure::dirac(f2(), f2().identity()).unwrap();
        let shifted = translate(&w("a"), &m).unwrap();
        assert_eq!(shifted.mass(&w("a")), 1.0);

        let u = ProbMeasure::uniform(f2(), vec![w("a"), w("aa")]).unwrap();
        let shifted = translate(&w("a"), &u).unwrap();
        assert_eq!(shifted.mass(&w("aa")), 0.5);
        assert_eq!(shifted.mass(&w("aaa")), 0.5);
        // identity translation is a no-op
        assert_eq!(translate(&f2().identity(), &u).unwrap(), u);
    }

    #[test]
    fn tv_distance_basics() {
        let m = ProbMeasure::uniform(f2(), vec![w("a"), w("aa")]).unwrap();
        assert_eq!(tv_distance(&m, &m).unwrap(), 0.0);
        let d1 = ProbMeasure::dirac(f2(), f2().identity()).unwrap();
        let d2 = ProbMeasure::dirac(f2(), w("a")).unwrap();
        assert_eq!(tv_distance(&d1, &d2).unwrap(), 2.0);
        // overlap {aa}: uniform{a,aa} vs uniform{aa,aaa} differ by 1/2+1/2
        let m2 = translate(&w("a"), &m).unwrap();
        assert_eq!(tv_distance(&m2, &m).unwrap(), 1.0);
    }

    #[test]
    fn l2_distances() {
        let v1 = SparseVec::from_entries(f2(), vec![(f2().identity(), 1.0)]).unwrap();
        let v2 = SparseVec::from_entries(f2(), vec![(w("a"), 1.0)]).unwrap();
        assert_eq!(l2_distance(&v1, &v1).unwrap(), 0.0);
        assert!((l2_distance(&v1, &v2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let u = SparseVec::from_entries(f2(), vec![(f2().identity(), 0.6), (w("a"), 0.8)]).unwrap();
        assert!((l2_distance(&v1, &u).unwrap() - 0.8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_measures() {
        assert!(ProbMeasure::from_entries(f2(), vec![(w("a"), -0.5), (w("b"), 1.5)]).is_err());
        assert!(ProbMeasure::from_entries(f2(), vec![(w("a"), 0.7)]).is_err());
        assert!(SparseVec::from_entries(f2(), vec![(w("a"), f64::NAN)]).is_err());
        // duplicate support entries make uniform() fail
        assert!(ProbMeasure::uniform(f2(), vec![w("a"), w("a")]).is_err());
    }

    #[test]
    fn neumaier_handles_large_uniform_sums() {
        // normalization checks rely on this: a 65537-point uniform row
        // still sums to 1 well within the crate tolerance
        let n = 65537usize;
        let v = 1.0 / n as f64;
        let mut acc = NeumaierSum::new();
        for _ in 0..n {
            acc.add(v);
        }
        assert!((acc.value() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn neumaier_compensates_cancellation() {
        // naive left-to-right addition loses both small terms here
        let terms = [1.0, 1e100, 1.0, -1e100];
        let naive: f64 = terms.iter().sum();
        assert_eq!(naive, 0.0);
        let mut acc = NeumaierSum::new();
        for t in terms {
            acc.add(t);
        }
        assert_eq!(acc.value(), 2.0);
    }
}
