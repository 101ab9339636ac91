//! Tube-supported kernels on a group.
//!
//! All certificates in this crate are *tube kernels*: finitely many rows
//! `s ↦ row_s`, where each row is a finitely supported function on the
//! group and every support point `u` of `row_s` satisfies
//! `d(s, u) ≤ R` for the kernel's tube radius `R`. Equivalently, the
//! two-variable kernel `k(s, u) = row_s(u)` is supported in the tube
//! `{(s, u) : d(s, u) ≤ R}`.
//!
//! A kernel carries one of four row disciplines, checked at
//! construction:
//!
//! * `l1-normalized` — rows are probability densities (`≥ 0`, `Σ = 1`),
//!   e.g. approximately invariant means;
//! * `l2-normalized` — rows are unit vectors in `ℓ²` (any sign),
//!   e.g. entrywise square roots of densities or factorization columns;
//! * `positive-type` — rows tabulate a symmetric two-variable kernel
//!   `h(s, t)` (entries of a Gram matrix), with `h(s, t) = h(t, s)`;
//! * `density` — rows are nonnegative with no norm constraint,
//!   the intermediate shape produced by convolution smoothing.
//!
//! Rows are stored sparsely. Two compressed forms matter for scale:
//! a support can be a contiguous id `Range` (translates of an interval
//! in `Z`), and values can be `Uniform` (a single shared value). Row
//! distances between two uniform rows reduce to closed-form expressions
//! in three counts (left-only, right-only, shared support sizes), which
//! is what makes million-point sweeps exact and fast.

use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::group::{GroupDescriptor, GroupElement};
use crate::measure::{NeumaierSum, SparseVec};
use crate::{Error, Result, NORM_TOL, SYMMETRY_TOL};

// ===========================================================================
// Kinds, supports, values
// ===========================================================================

/// The row discipline a kernel promises (validated at construction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    L1Normalized,
    L2Normalized,
    PositiveType,
    Density,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::L1Normalized => "l1-normalized",
            KernelKind::L2Normalized => "l2-normalized",
            KernelKind::PositiveType => "positive-type",
            KernelKind::Density => "density",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Support of one row, as ids into the kernel's element table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Support {
    /// Strictly increasing ids.
    Ids(Vec<u32>),
    /// The contiguous id interval `lo..=hi` (used when the table is
    /// interned in an order where translates are intervals).
    Range { lo: u32, hi: u32 },
}

impl Support {
    pub(crate) fn len(&self) -> usize {
        match self {
            Support::Ids(ids) => ids.len(),
            Support::Range { lo, hi } => (hi - lo) as usize + 1,
        }
    }

    /// Position of `id` within the support, if present.
    fn position(&self, id: u32) -> Option<usize> {
        match self {
            Support::Ids(ids) => ids.binary_search(&id).ok(),
            Support::Range { lo, hi } => {
                (*lo..=*hi).contains(&id).then(|| (id - lo) as usize)
            }
        }
    }

    fn iter(&self) -> SupportIter<'_> {
        match self {
            Support::Ids(ids) => SupportIter::Ids(ids.iter()),
            Support::Range { lo, hi } => SupportIter::Range(*lo..=*hi),
        }
    }
}

enum SupportIter<'a> {
    Ids(std::slice::Iter<'a, u32>),
    Range(std::ops::RangeInclusive<u32>),
}

impl Iterator for SupportIter<'_> {
    type Item = u32;
    fn next(&mut self) -> Option<u32> {
        match self {
            SupportIter::Ids(it) => it.next().copied(),
            SupportIter::Range(r) => r.next(),
        }
    }
}

/// How many ids the two supports share.
fn support_intersection_count(a: &Support, b: &Support) -> u64 {
    match (a, b) {
        (Support::Range { lo: al, hi: ah }, Support::Range { lo: bl, hi: bh }) => {
            let lo = *al.max(bl);
            let hi = *ah.min(bh);
            if lo <= hi {
                (hi - lo) as u64 + 1
            } else {
                0
            }
        }
        (Support::Ids(ids), Support::Range { lo, hi })
        | (Support::Range { lo, hi }, Support::Ids(ids)) => {
            let start = ids.partition_point(|&id| id < *lo);
            let end = ids.partition_point(|&id| id <= *hi);
            (end - start) as u64
        }
        (Support::Ids(a), Support::Ids(b)) => {
            let (mut i, mut j, mut count) = (0usize, 0usize, 0u64);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        count += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            count
        }
    }
}

/// Values of one row, aligned with its support.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RowValues {
    /// Every support point carries this value.
    Uniform(f64),
    /// `values[k]` belongs to the k-th support id.
    Dense(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KernelRow {
    pub(crate) support: Support,
    pub(crate) values: RowValues,
}

impl KernelRow {
    pub(crate) fn len(&self) -> usize {
        self.support.len()
    }

    #[inline]
    fn value_at(&self, pos: usize) -> f64 {
        match &self.values {
            RowValues::Uniform(v) => *v,
            RowValues::Dense(vals) => vals[pos],
        }
    }

    pub(crate) fn get(&self, id: u32) -> Option<f64> {
        self.support.position(id).map(|pos| self.value_at(pos))
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.support
            .iter()
            .enumerate()
            .map(|(pos, id)| (id, self.value_at(pos)))
    }
}

// ===========================================================================
// Closed forms for pairs of uniform rows
// ===========================================================================
//
// For rows that are uniform (value v₁ on n₁-point support, value v₂ on an
// n₂-point support, sharing c points), the row distances depend only on
// (v₁, a, v₂, b, c) with a = n₁ − c, b = n₂ − c points unique to each
// side. The expressions below are evaluated in a fixed order so that two
// independent code paths computing the same counts produce bit-identical
// results.

#[inline]
pub(crate) fn uniform_pair_l1(v1: f64, a: u64, v2: f64, b: u64, c: u64) -> f64 {
    (v1.abs() * a as f64 + v2.abs() * b as f64) + (v1 - v2).abs() * c as f64
}

#[inline]
pub(crate) fn uniform_pair_l2_sq(v1: f64, a: u64, v2: f64, b: u64, c: u64) -> f64 {
    let d = v1 - v2;
    (v1 * v1 * a as f64 + v2 * v2 * b as f64) + d * d * c as f64
}

#[inline]
pub(crate) fn uniform_pair_inner(v1: f64, v2: f64, c: u64) -> f64 {
    v1 * v2 * c as f64
}

/// Merge two rows, feeding aligned value pairs (zero where absent) into
/// `f` in ascending id order.
fn merge_rows(a: &KernelRow, b: &KernelRow, mut f: impl FnMut(f64, f64)) {
    let mut ia = a.iter().peekable();
    let mut ib = b.iter().peekable();
    loop {
        match (ia.peek().copied(), ib.peek().copied()) {
            (Some((ka, va)), Some((kb, vb))) => match ka.cmp(&kb) {
                std::cmp::Ordering::Less => {
                    f(va, 0.0);
                    ia.next();
                }
                std::cmp::Ordering::Greater => {
                    f(0.0, vb);
                    ib.next();
                }
                std::cmp::Ordering::Equal => {
                    f(va, vb);
                    ia.next();
                    ib.next();
                }
            },
            (Some((_, va)), None) => {
                f(va, 0.0);
                ia.next();
            }
            (None, Some((_, vb))) => {
                f(0.0, vb);
                ib.next();
            }
            (None, None) => break,
        }
    }
}

pub(crate) fn rows_l1_distance(a: &KernelRow, b: &KernelRow) -> f64 {
    if let (RowValues::Uniform(v1), RowValues::Uniform(v2)) = (&a.values, &b.values) {
        let c = support_intersection_count(&a.support, &b.support);
        let na = a.len() as u64 - c;
        let nb = b.len() as u64 - c;
        return uniform_pair_l1(*v1, na, *v2, nb, c);
    }
    let mut sum = NeumaierSum::new();
    merge_rows(a, b, |x, y| sum.add((x - y).abs()));
    sum.value()
}

pub(crate) fn rows_l2_distance_sq(a: &KernelRow, b: &KernelRow) -> f64 {
    if let (RowValues::Uniform(v1), RowValues::Uniform(v2)) = (&a.values, &b.values) {
        let c = support_intersection_count(&a.support, &b.support);
        let na = a.len() as u64 - c;
        let nb = b.len() as u64 - c;
        return uniform_pair_l2_sq(*v1, na, *v2, nb, c);
    }
    let mut sum = NeumaierSum::new();
    merge_rows(a, b, |x, y| {
        let d = x - y;
        sum.add(d * d);
    });
    sum.value()
}

pub(crate) fn rows_inner(a: &KernelRow, b: &KernelRow) -> f64 {
    if let (RowValues::Uniform(v1), RowValues::Uniform(v2)) = (&a.values, &b.values) {
        let c = support_intersection_count(&a.support, &b.support);
        return uniform_pair_inner(*v1, *v2, c);
    }
    let mut sum = NeumaierSum::new();
    merge_rows(a, b, |x, y| sum.add(x * y));
    sum.value()
}

// ===========================================================================
// The kernel itself
// ===========================================================================

/// A finite family of rows `s ↦ row_s`, each supported in the tube
/// `d(s, ·) ≤ tube_radius`, with a validated row discipline. Build one
/// with [`KernelBuilder`].
#[derive(Debug, Clone)]
pub struct TubeKernel {
    descriptor: GroupDescriptor,
    kind: KernelKind,
    tube_radius: u64,
    /// Optional resolution parameter (e.g. the `n` of an approximate
    /// mean family); carried through conversions for reporting.
    n: Option<u64>,
    /// Interned elements; row supports refer to these by id.
    table: Vec<GroupElement>,
    index: HashMap<GroupElement, u32>,
    /// `(base id, row)`, sorted by base id, at most one row per base.
    rows: Vec<(u32, KernelRow)>,
}

impl TubeKernel {
    pub fn descriptor(&self) -> GroupDescriptor {
        self.descriptor
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn tube_radius(&self) -> u64 {
        self.tube_radius
    }

    pub fn n(&self) -> Option<u64> {
        self.n
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// The elements that have rows, in storage order.
    pub fn bases(&self) -> impl Iterator<Item = &GroupElement> {
        self.rows.iter().map(|(id, _)| &self.table[*id as usize])
    }

    pub fn has_row(&self, s: &GroupElement) -> bool {
        self.row_of(s).is_some()
    }

    pub(crate) fn element(&self, id: u32) -> &GroupElement {
        &self.table[id as usize]
    }

    pub(crate) fn id_of(&self, g: &GroupElement) -> Option<u32> {
        self.index.get(g).copied()
    }

    pub(crate) fn row_of(&self, s: &GroupElement) -> Option<&KernelRow> {
        let id = self.id_of(s)?;
        let pos = self.rows.binary_search_by_key(&id, |(b, _)| *b).ok()?;
        Some(&self.rows[pos].1)
    }

    fn row_pair(&self, s: &GroupElement, t: &GroupElement) -> Result<(&KernelRow, &KernelRow)> {
        let a = self
            .row_of(s)
            .ok_or_else(|| Error::UnderCoverage(format!("kernel has no row at {s}")))?;
        let b = self
            .row_of(t)
            .ok_or_else(|| Error::UnderCoverage(format!("kernel has no row at {t}")))?;
        Ok((a, b))
    }

    /// `‖row_s − row_t‖₁`.
    pub fn row_l1_distance(&self, s: &GroupElement, t: &GroupElement) -> Result<f64> {
        let (a, b) = self.row_pair(s, t)?;
        Ok(rows_l1_distance(a, b))
    }

    /// `‖row_s − row_t‖₂²` (the squared `ℓ²` distance).
    pub fn row_l2_distance_sq(&self, s: &GroupElement, t: &GroupElement) -> Result<f64> {
        let (a, b) = self.row_pair(s, t)?;
        Ok(rows_l2_distance_sq(a, b))
    }

    /// `⟨row_s, row_t⟩`.
    pub fn row_inner(&self, s: &GroupElement, t: &GroupElement) -> Result<f64> {
        let (a, b) = self.row_pair(s, t)?;
        Ok(rows_inner(a, b))
    }

    /// The tabulated value `row_s(u)`, `None` when `s` has no row or `u`
    /// is outside its support. For positive-type kernels an absent
    /// support point means the value is zero.
    pub fn value(&self, s: &GroupElement, u: &GroupElement) -> Option<f64> {
        let row = self.row_of(s)?;
        let id = self.id_of(u)?;
        row.get(id)
    }

    /// The row at `s` as a sparse vector on the group.
    pub fn row_to_sparsevec(&self, s: &GroupElement) -> Result<SparseVec> {
        let row = self
            .row_of(s)
            .ok_or_else(|| Error::UnderCoverage(format!("kernel has no row at {s}")))?;
        let entries: Vec<(GroupElement, f64)> = row
            .iter()
            .map(|(id, v)| (self.table[id as usize].clone(), v))
            .collect();
        SparseVec::from_entries(self.descriptor, entries)
    }

    /// Row entries at `s` as `(element, value)` pairs in table order.
    pub fn row_entries(&self, s: &GroupElement) -> Result<Vec<(&GroupElement, f64)>> {
        let row = self
            .row_of(s)
            .ok_or_else(|| Error::UnderCoverage(format!("kernel has no row at {s}")))?;
        Ok(row
            .iter()
            .map(|(id, v)| (&self.table[id as usize], v))
            .collect())
    }

    /// Largest support size over all rows.
    pub fn max_row_support(&self) -> usize {
        self.rows.iter().map(|(_, r)| r.len()).max().unwrap_or(0)
    }

    /// Rebuilds this kernel under a different declared kind, re-running
    /// that kind's validation (used after entrywise reinterpretation).
    /// Full interning table in id order (id `i` names `table()[i]`).
    pub(crate) fn table(&self) -> &[GroupElement] {
        &self.table
    }

    /// Raw `(base id, row)` pairs, sorted by base id.
    pub(crate) fn raw_rows(&self) -> &[(u32, KernelRow)] {
        &self.rows
    }

    pub(crate) fn rows_by_pos(&self) -> impl Iterator<Item = (&GroupElement, &KernelRow)> {
        self.rows
            .iter()
            .map(|(id, row)| (&self.table[*id as usize], row))
    }
}

// ===========================================================================
// Builder and validation
// ===========================================================================

/// Accumulates rows, then validates the whole kernel in [`Self::finalize`].
pub struct KernelBuilder {
    descriptor: GroupDescriptor,
    kind: KernelKind,
    tube_radius: u64,
    n: Option<u64>,
    table: Vec<GroupElement>,
    index: HashMap<GroupElement, u32>,
    rows: Vec<(u32, KernelRow)>,
}

impl KernelBuilder {
    pub fn new(descriptor: GroupDescriptor, kind: KernelKind, tube_radius: u64) -> KernelBuilder {
        KernelBuilder {
            descriptor,
            kind,
            tube_radius,
            n: None,
            table: Vec::new(),
            index: HashMap::new(),
            rows: Vec::new(),
        }
    }

    /// Records the resolution parameter the kernel was built at.
    pub fn set_n(&mut self, n: u64) -> &mut Self {
        self.n = Some(n);
        self
    }

    /// Interns an element, validating it against the descriptor.
    pub fn intern(&mut self, g: &GroupElement) -> Result<u32> {
        if let Some(&id) = self.index.get(g) {
            return Ok(id);
        }
        self.descriptor.validate_element(g)?;
        self.intern_unchecked(g.clone())
    }

    /// Interns an element already known to belong to the group.
    pub(crate) fn intern_unchecked(&mut self, g: GroupElement) -> Result<u32> {
        if let Some(&id) = self.index.get(&g) {
            return Ok(id);
        }
        let id = u32::try_from(self.table.len())
            .map_err(|_| Error::Domain("kernel table exceeds u32 ids".into()))?;
        self.table.push(g.clone());
        self.index.insert(g, id);
        Ok(id)
    }

    /// Adds a row with explicit `(support element, value)` entries.
    pub fn push_row(
        &mut self,
        base: &GroupElement,
        entries: &[(GroupElement, f64)],
    ) -> Result<()> {
        let base_id = self.intern(base)?;
        let mut pairs: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (g, v) in entries {
            pairs.push((self.intern(g)?, *v));
        }
        pairs.sort_unstable_by_key(|(id, _)| *id);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain(format!(
                "kernel row at {base} lists a support element twice"
            )));
        }
        let (ids, values): (Vec<u32>, Vec<f64>) = pairs.into_iter().unzip();
        self.push_row_parts(base_id, Support::Ids(ids), RowValues::Dense(values))
    }

    /// Adds a row that takes one shared value on the given support.
    pub fn push_uniform_row(
        &mut self,
        base: &GroupElement,
        support: &[GroupElement],
        value: f64,
    ) -> Result<()> {
        let base_id = self.intern(base)?;
        let mut ids: Vec<u32> = Vec::with_capacity(support.len());
        for g in support {
            ids.push(self.intern(g)?);
        }
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!(
                "kernel row at {base} lists a support element twice"
            )));
        }
        self.push_row_parts(base_id, Support::Ids(ids), RowValues::Uniform(value))
    }

    /// Adds a pre-assembled row (internal fast paths; the caller
    /// guarantees ids are valid, sorted and distinct).
    pub(crate) fn push_row_parts(
        &mut self,
        base_id: u32,
        support: Support,
        values: RowValues,
    ) -> Result<()> {
        if support.len() == 0 {
            return Err(Error::Domain("kernel rows must be nonempty".into()));
        }
        if let RowValues::Dense(vals) = &values {
            debug_assert_eq!(vals.len(), support.len());
        }
        self.rows.push((base_id, KernelRow { support, values }));
        Ok(())
    }

    /// Validates everything and produces the kernel, using the default
    /// normalization tolerance.
    pub fn finalize(self) -> Result<TubeKernel> {
        self.finalize_with_tol(NORM_TOL)
    }

    /// Validates with a caller-chosen normalization tolerance (spectral
    /// constructions produce rows normalized only up to the eigensolver
    /// accuracy, which can exceed the default tolerance).
    pub fn finalize_with_tol(mut self, norm_tol: f64) -> Result<TubeKernel> {
        self.rows.sort_by_key(|(id, _)| *id);
        if self.rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain("kernel has two rows with the same base".into()));
        }
        if self.rows.is_empty() {
            return Err(Error::Domain("kernel has no rows".into()));
        }
        let kernel = TubeKernel {
            descriptor: self.descriptor,
            kind: self.kind,
            tube_radius: self.tube_radius,
            n: self.n,
            table: self.table,
            index: self.index,
            rows: self.rows,
        };
        kernel.validate(norm_tol)?;
        Ok(kernel)
    }
}

impl TubeKernel {
    /// Checks tube support, finiteness, and the declared row discipline.
    fn validate(&self, norm_tol: f64) -> Result<()> {
        for (base_id, row) in &self.rows {
            let base = &self.table[*base_id as usize];
            // tube support
            for id in row.support.iter() {
                let u = &self.table[id as usize];
                let d = base.distance_to(u);
                if d > self.tube_radius {
                    return Err(Error::Domain(format!(
                        "row at {base} reaches {u} at distance {d}, beyond the tube radius {}",
                        self.tube_radius
                    )));
                }
            }
            // values
            let check_finite = |v: f64| -> Result<()> {
                if !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "row at {base} carries a non-finite value"
                    )));
                }
                Ok(())
            };
            let nonneg_required = matches!(
                self.kind,
                KernelKind::L1Normalized | KernelKind::Density
            );
            match &row.values {
                RowValues::Uniform(v) => {
                    check_finite(*v)?;
                    if nonneg_required && *v < 0.0 {
                        return Err(Error::Domain(format!(
                            "{} rows must be nonnegative, row at {base} is not",
                            self.kind
                        )));
                    }
                }
                RowValues::Dense(vals) => {
                    for &v in vals {
                        check_finite(v)?;
                        if nonneg_required && v < 0.0 {
                            return Err(Error::Domain(format!(
                                "{} rows must be nonnegative, row at {base} is not",
                                self.kind
                            )));
                        }
                    }
                }
            }
            // norms
            match self.kind {
                KernelKind::L1Normalized => {
                    let total = match &row.values {
                        RowValues::Uniform(v) => *v * row.len() as f64,
                        RowValues::Dense(vals) => {
                            let mut sum = NeumaierSum::new();
                            for &v in vals {
                                sum.add(v.abs());
                            }
                            sum.value()
                        }
                    };
                    if (total - 1.0).abs() > norm_tol {
                        return Err(Error::Domain(format!(
                            "l1-normalized row at {base} sums to {total:.17}, not 1"
                        )));
                    }
                }
                KernelKind::L2Normalized => {
                    let total = match &row.values {
                        RowValues::Uniform(v) => (*v * *v) * row.len() as f64,
                        RowValues::Dense(vals) => {
                            let mut sum = NeumaierSum::new();
                            for &v in vals {
                                sum.add(v * v);
                            }
                            sum.value()
                        }
                    };
                    if (total - 1.0).abs() > norm_tol {
                        return Err(Error::Domain(format!(
                            "l2-normalized row at {base} has squared norm {total:.17}, not 1"
                        )));
                    }
                }
                KernelKind::PositiveType | KernelKind::Density => {}
            }
        }
        if self.kind == KernelKind::PositiveType {
            self.validate_symmetry()?;
        }
        Ok(())
    }

    /// For tabulated two-variable kernels: wherever both `h(s, t)` and
    /// `h(t, s)` are determined (both bases have rows), they must agree;
    /// an absent support point reads as zero.
    fn validate_symmetry(&self) -> Result<()> {
        for (base_id, row) in &self.rows {
            let s = &self.table[*base_id as usize];
            for (t_id, v) in row.iter() {
                let t = &self.table[t_id as usize];
                let Some(back_row) = self.row_of(t) else {
                    continue;
                };
                let back = back_row.get(*base_id).unwrap_or(0.0);
                if (v - back).abs() > SYMMETRY_TOL {
                    return Err(Error::Domain(format!(
                        "kernel is not symmetric: value {v:.17} at ({s}, {t}) \
                         but {back:.17} at ({t}, {s})"
                    )));
                }
            }
        }
        Ok(())
    }
}

// ===========================================================================
// Equality and JSON encoding
// ===========================================================================

impl TubeKernel {
    fn sorted_view(&self) -> BTreeMap<&GroupElement, BTreeMap<&GroupElement, f64>> {
        let mut out = BTreeMap::new();
        for (base_id, row) in &self.rows {
            let mut m = BTreeMap::new();
            for (id, v) in row.iter() {
                m.insert(&self.table[id as usize], v);
            }
            out.insert(&self.table[*base_id as usize], m);
        }
        out
    }
}

/// Semantic equality: same descriptor, kind, tube radius, parameter, and
/// the same row values at the same elements (exact float comparison;
/// storage layout does not matter).
impl PartialEq for TubeKernel {
    fn eq(&self, other: &Self) -> bool {
        self.descriptor == other.descriptor
            && self.kind == other.kind
            && self.tube_radius == other.tube_radius
            && self.n == other.n
            && self.sorted_view() == other.sorted_view()
    }
}

impl Serialize for TubeKernel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: BTreeMap<String, BTreeMap<String, f64>> = self
            .sorted_view()
            .into_iter()
            .map(|(base, row)| {
                (
                    base.to_string(),
                    row.into_iter().map(|(g, v)| (g.to_string(), v)).collect(),
                )
            })
            .collect();
        let mut st = serializer.serialize_struct("TubeKernel", 5)?;
        st.serialize_field("descriptor", &self.descriptor)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("tube_radius", &self.tube_radius)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("rows", &rows)?;
        st.end()
    }
}

#[derive(Deserialize)]
struct TubeKernelRepr {
    descriptor: GroupDescriptor,
    kind: KernelKind,
    tube_radius: u64,
    #[serde(default)]
    n: Option<u64>,
    rows: BTreeMap<String, BTreeMap<String, f64>>,
}

impl<'de> Deserialize<'de> for TubeKernel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = TubeKernelRepr::deserialize(deserializer)?;
        let mut builder = KernelBuilder::new(repr.descriptor, repr.kind, repr.tube_radius);
        if let Some(n) = repr.n {
            builder.set_n(n);
        }
        for (base_text, row) in &repr.rows {
            let base = repr
                .descriptor
                .parse_element(base_text)
                .map_err(|e| D::Error::custom(e.to_string()))?;
            let mut entries = Vec::with_capacity(row.len());
            for (g_text, v) in row {
                let g = repr
                    .descriptor
                    .parse_element(g_text)
                    .map_err(|e| D::Error::custom(e.to_string()))?;
                entries.push((g, *v));
            }
            builder
                .push_row(&base, &entries)
                .map_err(|e| D::Error::custom(e.to_string()))?;
        }
        builder
            .finalize()
            .map_err(|e| D::Error::custom(e.to_string()))
    }
}
