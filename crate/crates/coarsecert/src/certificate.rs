//! Certificate constructions and deficiency measurement.
//!
//! A *certificate* here is a tube kernel whose rows move little under
//! translation; how little is the *deficiency*, measured as the largest
//! row distance over pairs of nearby base points. Three constructions
//! are provided:
//!
//! * **Følner certificates** on lattices `Z^d`: the row at `s` is the
//!   uniform density on the cube `s + {-n..n}^d`. Translating a cube by
//!   `δ` changes a `δ/(2n+1)` fraction of it per axis, so the
//!   deficiency decays like `1/n`. On `Z` the exact value at distance
//!   `δ` is `2δ/(2n+1)`.
//!
//! * **Ray certificates** on free groups: the row at `s` is uniform on
//!   the first `n` vertices after `s` of the geodesic ray from `s`
//!   toward a boundary point `ω`. Rays from nearby points merge and
//!   then agree forever, so long windows overlap in all but boundedly
//!   many vertices, giving `ℓ¹` deficiency at most `4δ/n`.
//!
//! * **Boundary mean families** on free groups: for each boundary
//!   point `ω`, the uniform probability measure on the first `n`
//!   prefixes of `ω`. Equivariance fails only near the basepoint:
//!   `s·m_n^ω` and `m_n^{s·ω}` are uniform on overlapping segments of
//!   the same ray, so their total-variation distance is at most
//!   `2·|s|/n`, and is an exact integer multiple of `1/n` — the
//!   measurement below counts mismatches in integers and divides once.
//!
//! Deficiency sweeps take an explicit *window* (a ball of base points)
//! and an explicit test radius, examine every window pair at distance
//! up to that radius, and report the supremum with a witness pair and a
//! per-distance table. A window too small to contain a row, or too
//! small to realize some distance up to the test radius, is an
//! under-coverage error: too little data to certify, never a silent
//! pass.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::boundary::BoundaryPoint;
use crate::group::{Ball, GroupDescriptor, GroupElement};
use crate::kernel::{
    uniform_pair_l2_sq, KernelBuilder, KernelKind, KernelRow, RowValues, Support, TubeKernel,
};
use crate::measure::ProbMeasure;
use crate::{Error, Result};

// ===========================================================================
// Følner certificates on lattices
// ===========================================================================

/// Uniform-cube certificate on `Z^d`: one row per window point `s`
/// (all `‖s‖₁ ≤ window_radius`), uniform on `s + {-n..n}^d` with value
/// `1/(2n+1)^d`. Tube radius `d·n`; the resolution parameter is `n`.
pub fn folner_certificate(
    descriptor: GroupDescriptor,
    n: u64,
    window_radius: u64,
) -> Result<TubeKernel> {
    let GroupDescriptor::Lattice { dim } = descriptor else {
        return Err(Error::Domain(format!(
            "uniform-cube certificates need a lattice, not {descriptor}"
        )));
    };
    if n == 0 {
        return Err(Error::Domain("certificate parameter n must be at least 1".into()));
    }
    if dim == 1 {
        return folner_certificate_line(descriptor, n, window_radius);
    }

    // predicted interned-table size: the union of all cubes is inside
    // the box [-(n+W), n+W]^d
    let side = 2u128 * (n as u128 + window_radius as u128) + 1;
    let mut predicted: u128 = 1;
    for _ in 0..dim {
        predicted = predicted.saturating_mul(side);
    }
    let budget = crate::group::DEFAULT_BALL_BUDGET;
    if predicted > budget as u128 {
        return Err(Error::Budget {
            what: format!("cube certificate on {descriptor} (n = {n}, window {window_radius})"),
            needed: predicted.min(u64::MAX as u128) as u64,
            budget,
        });
    }

    let window = Ball::enumerate(descriptor, window_radius)?;
    let value = {
        let mut cube_points = 1u64;
        for _ in 0..dim {
            cube_points *= 2 * n + 1;
        }
        1.0 / cube_points as f64
    };
    let mut builder = KernelBuilder::new(descriptor, KernelKind::L1Normalized, dim as u64 * n);
    builder.set_n(n);
    // cube offsets in lexicographic coordinate order
    let mut offsets: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(offsets.len() * (2 * n as usize + 1));
        for base in &offsets {
            for x in -(n as i64)..=n as i64 {
                let mut v = base.clone();
                v.push(x);
                next.push(v);
            }
        }
        offsets = next;
    }
    for s in window.iter() {
        let sv = s.as_vector().expect("lattice ball contains vectors");
        let support: Vec<GroupElement> = offsets
            .iter()
            .map(|off| {
                let coords: Vec<i64> = sv.iter().zip(off).map(|(a, b)| a + b).collect();
                GroupElement::Vector(coords.into())
            })
            .collect();
        builder.push_uniform_row(s, &support, value)?;
    }
    builder.finalize()
}

/// `Z` specialization: elements are interned in numeric order, so every
/// row support is a contiguous id range and row distances are closed
/// forms in interval overlaps.
fn folner_certificate_line(
    descriptor: GroupDescriptor,
    n: u64,
    window_radius: u64,
) -> Result<TubeKernel> {
    let half = n + window_radius;
    let table_len = 2 * half + 1;
    let budget = crate::group::DEFAULT_BALL_BUDGET;
    if table_len > budget {
        return Err(Error::Budget {
            what: format!("cube certificate on {descriptor} (n = {n}, window {window_radius})"),
            needed: table_len,
            budget,
        });
    }
    let mut builder = KernelBuilder::new(descriptor, KernelKind::L1Normalized, n);
    builder.set_n(n);
    // id of the integer x is x + half
    for x in -(half as i64)..=half as i64 {
        builder.intern_unchecked(GroupElement::Vector(vec![x].into()))?;
    }
    let value = 1.0 / (2 * n + 1) as f64;
    let w = window_radius as i64;
    for s in -w..=w {
        let base_id = (s + half as i64) as u32;
        let lo = (s + w) as u32; // (s - n) + half
        let hi = (s + w) as u32 + 2 * n as u32; // (s + n) + half
        builder.push_row_parts(base_id, Support::Range { lo, hi }, RowValues::Uniform(value))?;
    }
    builder.finalize()
}

// ===========================================================================
// Geodesic rays and ray certificates on free groups
// ===========================================================================

/// Longest common prefix length of a finite word with the infinite word.
fn lcp_with_boundary(word: &[u8], omega: &BoundaryPoint) -> u64 {
    let mut i = 0u64;
    while (i as usize) < word.len() && word[i as usize] == omega.letter_at(i) {
        i += 1;
    }
    i
}

/// The first `count` vertices strictly after `s` on the geodesic ray
/// from `s` toward `ω`: first back up along `s` to its longest common
/// prefix with `ω`, then follow the letters of `ω`. The j-th vertex is
/// at distance exactly `j` from `s`.
pub fn geodesic_ray(
    descriptor: GroupDescriptor,
    s: &GroupElement,
    omega: &BoundaryPoint,
    count: u64,
) -> Result<Vec<GroupElement>> {
    descriptor.validate_element(s)?;
    omega.validate_for(descriptor)?;
    let word = s.as_word().expect("validated free element is a word");
    let c = lcp_with_boundary(word, omega);
    let up = word.len() as u64 - c;
    let mut out = Vec::with_capacity(count as usize);
    for j in 1..=count {
        if j <= up {
            let keep = word.len() - j as usize;
            out.push(GroupElement::Word(word[..keep].to_vec().into()));
        } else {
            out.push(omega.prefix(c + (j - up)));
        }
    }
    Ok(out)
}

/// Ray certificate on a free group: one row per window point `s`
/// (all `|s| ≤ window_radius`), uniform with value `1/n` on the first
/// `n` ray vertices after `s` toward `ω`. Tube radius `n`.
pub fn free_ray_certificate(
    descriptor: GroupDescriptor,
    n: u64,
    omega: &BoundaryPoint,
    window_radius: u64,
) -> Result<TubeKernel> {
    let GroupDescriptor::Free { .. } = descriptor else {
        return Err(Error::Domain(format!(
            "ray certificates need a free group, not {descriptor}"
        )));
    };
    if n == 0 {
        return Err(Error::Domain("certificate parameter n must be at least 1".into()));
    }
    omega.validate_for(descriptor)?;
    let window = Ball::enumerate(descriptor, window_radius)?;
    let mut builder = KernelBuilder::new(descriptor, KernelKind::L1Normalized, n);
    builder.set_n(n);
    // prefixes of ω are shared by every row; intern them once
    let trunk: Vec<u32> = (0..=window_radius + n)
        .map(|k| builder.intern_unchecked(omega.prefix(k)))
        .collect::<Result<_>>()?;
    let value = 1.0 / n as f64;
    for s in window.iter() {
        let word = s.as_word().expect("free ball contains words");
        let c = lcp_with_boundary(word, omega);
        let up = word.len() as u64 - c;
        let base_id = builder.intern_unchecked(s.clone())?;
        let mut ids: Vec<u32> = Vec::with_capacity(n as usize);
        for j in 1..=up.min(n) {
            let keep = word.len() - j as usize;
            ids.push(builder.intern_unchecked(GroupElement::Word(word[..keep].to_vec().into()))?);
        }
        if n > up {
            // remaining vertices are the ω-prefixes c+1 ..= c+(n-up)
            let from = (c + 1) as usize;
            let to = (c + (n - up)) as usize;
            ids.extend_from_slice(&trunk[from..=to]);
        }
        ids.sort_unstable();
        builder.push_row_parts(base_id, Support::Ids(ids), RowValues::Uniform(value))?;
    }
    builder.finalize()
}

// ===========================================================================
// Closed-form ray geometry (shared with the embedding fast paths)
// ===========================================================================
//
// Rays toward the same boundary point merge at the median of
// (s, t, ω) and agree forever after. With b(x) = |x| − 2·lcp(x, ω) the
// horofunction value, the merge point sits i steps down s's ray and j
// steps down t's ray where i + j = d(s, t) and i − j = b(s) − b(t).
// Length-n ray windows then share max(0, (n − max(i,j)) − max(0, 1 − min(i,j)) + 1)
// vertices, which turns every pair distance between uniform ray rows
// into the closed form for uniform row pairs.

/// Horofunction value `b(s) = |s| − 2·lcp(s, ω)` toward `ω`.
pub(crate) fn busemann_value(word: &[u8], omega: &BoundaryPoint) -> i64 {
    word.len() as i64 - 2 * lcp_with_boundary(word, omega) as i64
}

/// Number of shared vertices between the length-`n` ray windows after
/// two *distinct* points at distance `d` with horofunction values
/// `bs`, `bt`.
pub(crate) fn ray_window_overlap(n: u64, d: u64, bs: i64, bt: i64) -> u64 {
    debug_assert!(d >= 1);
    let i = (d as i64 + bs - bt) / 2;
    let j = (d as i64 + bt - bs) / 2;
    debug_assert!((d as i64 + bs - bt) % 2 == 0 && i >= 0 && j >= 0);
    let x_min = 0i64.max(1 - i.min(j));
    let x_max = n as i64 - i.max(j);
    (x_max - x_min + 1).max(0) as u64
}

/// Squared `ℓ²` distance between the `1/√n`-valued ray rows at two
/// points, given their distance and horofunction values. Matches the
/// kernel-row computation bit for bit (both reduce to the same closed
/// form on the same counts).
pub(crate) fn ray_l2_row_distance_sq(n: u64, d: u64, bs: i64, bt: i64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let overlap = ray_window_overlap(n, d, bs, bt);
    let v = (1.0 / n as f64).sqrt();
    uniform_pair_l2_sq(v, n - overlap, v, n - overlap, overlap)
}

// ===========================================================================
// Boundary mean families
// ===========================================================================

/// The family `ω ↦ m_n^ω`: uniform probability on the first `n`
/// prefixes (lengths `1..=n`) of the boundary word `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryMeanFamily {
    descriptor: GroupDescriptor,
    n: u64,
}

/// Builds the prefix mean family at resolution `n` on a free group.
pub fn boundary_aicm(descriptor: GroupDescriptor, n: u64) -> Result<BoundaryMeanFamily> {
    let GroupDescriptor::Free { .. } = descriptor else {
        return Err(Error::Domain(format!(
            "boundary mean families need a free group, not {descriptor}"
        )));
    };
    if n == 0 {
        return Err(Error::Domain("mean family resolution n must be at least 1".into()));
    }
    Ok(BoundaryMeanFamily { descriptor, n })
}

impl BoundaryMeanFamily {
    pub fn descriptor(&self) -> GroupDescriptor {
        self.descriptor
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// The measure `m_n^ω`.
    pub fn mean(&self, omega: &BoundaryPoint) -> Result<ProbMeasure> {
        omega.validate_for(self.descriptor)?;
        let support: Vec<GroupElement> = (1..=self.n).map(|k| omega.prefix(k)).collect();
        ProbMeasure::uniform(self.descriptor, support)
    }

    /// Mismatch count between `s·m_n^ω` and `m_n^{s·ω}`: the number of
    /// group elements charged by exactly one of the two measures. Both
    /// measures put mass exactly `1/n` on `n` distinct points, so the
    /// total-variation distance is the count divided by `n` — computed
    /// here in exact integer arithmetic with a single final division.
    pub fn pair_mismatch(&self, omega: &BoundaryPoint, s: &GroupElement) -> Result<u64> {
        self.descriptor.validate_element(s)?;
        omega.validate_for(self.descriptor)?;
        let moved = omega.acted_by(s)?;
        let mut translated: Vec<GroupElement> = (1..=self.n)
            .map(|k| self.descriptor.mul(s, &omega.prefix(k)))
            .collect::<Result<_>>()?;
        let mut target: Vec<GroupElement> = (1..=self.n).map(|k| moved.prefix(k)).collect();
        translated.sort_unstable();
        target.sort_unstable();
        let mut shared = 0u64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < translated.len() && j < target.len() {
            match translated[i].cmp(&target[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(2 * (self.n - shared))
    }

    /// `‖s·m_n^ω − m_n^{s·ω}‖₁` via [`Self::pair_mismatch`].
    pub fn pair_deficiency(&self, omega: &BoundaryPoint, s: &GroupElement) -> Result<f64> {
        Ok(self.pair_mismatch(omega, s)? as f64 / self.n as f64)
    }

    /// The matrix coefficient `⟨√m_n^ω, s·√m_n^{s⁻¹ω}⟩`. Both vectors
    /// are `1/√n` on `n`-point supports, so the inner product is the
    /// shared-support count over `n` — again exact integer arithmetic.
    /// Satisfies `h(ω, e) = 1` and `h(ω, s) = h(s⁻¹ω, s⁻¹)` exactly, and
    /// is positive type: it is the Gram form of unit vectors.
    pub fn sqrt_coefficient(&self, omega: &BoundaryPoint, s: &GroupElement) -> Result<f64> {
        let s_inv = self.descriptor.inv(s)?;
        let pulled = omega.acted_by(&s_inv)?;
        // |s·m^{s⁻¹ω} ∩ m^ω| = n − mismatch/2
        let mismatch = self.pair_mismatch(&pulled, s)?;
        Ok((self.n - mismatch / 2) as f64 / self.n as f64)
    }
}

/// The boundary action coefficient `(ω, s) ↦ ⟨√m_n^ω, s·√m_n^{s⁻¹ω}⟩`
/// as a standalone function (the shape positivity checks consume).
pub fn boundary_sqrt_coefficient(
    family: BoundaryMeanFamily,
) -> impl Fn(&BoundaryPoint, &GroupElement) -> Result<f64> {
    move |omega, s| family.sqrt_coefficient(omega, s)
}

/// Equivariance deficiency of a boundary mean family: the supremum of
/// `‖s·m_n^ω − m_n^{s·ω}‖₁` over all sampled `ω` and all window points
/// `s`. The table is indexed by `|s|`; the reported supremum is an
/// exact fraction `mismatches/n` (also returned in `sup_fraction`).
pub fn aicm_deficiency(
    family: &BoundaryMeanFamily,
    omegas: &[BoundaryPoint],
    window: &Ball,
) -> Result<DeficiencyReport> {
    if window.descriptor() != family.descriptor() {
        return Err(Error::mismatch(&window.descriptor(), &family.descriptor()));
    }
    if omegas.is_empty() {
        return Err(Error::UnderCoverage(
            "mean family deficiency needs at least one boundary point".into(),
        ));
    }
    let radius = window.radius();
    let mut table: Vec<DeficiencyRow> = (0..=radius)
        .map(|d| DeficiencyRow { distance: d, max_deficiency: 0.0, pair_count: 0 })
        .collect();
    let mut best_count = 0u64;
    let mut witness: Option<(usize, usize)> = None; // (omega idx, window idx)
    let mut per_distance_count: Vec<u64> = vec![0; radius as usize + 1];
    for (oi, omega) in omegas.iter().enumerate() {
        for (si, s) in window.iter().enumerate() {
            let count = family.pair_mismatch(omega, s)?;
            let len = s.length() as usize;
            per_distance_count[len] = per_distance_count[len].max(count);
            table[len].pair_count += 1;
            if count > best_count || witness.is_none() {
                best_count = count;
                witness = Some((oi, si));
            }
        }
    }
    let n = family.n();
    for row in table.iter_mut() {
        row.max_deficiency = per_distance_count[row.distance as usize] as f64 / n as f64;
    }
    let (oi, si) = witness.expect("at least one pair was measured");
    Ok(DeficiencyReport {
        n: Some(n),
        tube_radius: radius,
        window: format!(
            "{} boundary points x ball of radius {radius} ({} points)",
            omegas.len(),
            window.len()
        ),
        sup: best_count as f64 / n as f64,
        sup_fraction: Some([best_count, n]),
        witness: Some(Witness::BoundaryPair {
            omega: omegas[oi].to_string(),
            s: window.get(si as u32).to_string(),
        }),
        table,
    })
}

// ===========================================================================
// Deficiency sweeps over kernel windows
// ===========================================================================

/// `ℓ¹` deficiency of an `l1-normalized` kernel: the largest
/// `‖row_s − row_t‖₁` over window pairs at distance `1..=tube_radius`.
pub fn deficiency_l1(
    kernel: &TubeKernel,
    tube_radius: u64,
    window: &Ball,
) -> Result<DeficiencyReport> {
    sweep_deficiency(kernel, tube_radius, window, KernelKind::L1Normalized, |a, b| {
        crate::kernel::rows_l1_distance(a, b)
    })
}

/// Squared `ℓ²` deficiency of an `l2-normalized` kernel: the largest
/// `‖row_s − row_t‖₂²` over window pairs at distance `1..=tube_radius`.
pub fn deficiency_l2(
    kernel: &TubeKernel,
    tube_radius: u64,
    window: &Ball,
) -> Result<DeficiencyReport> {
    sweep_deficiency(kernel, tube_radius, window, KernelKind::L2Normalized, |a, b| {
        crate::kernel::rows_l2_distance_sq(a, b)
    })
}

fn sweep_deficiency(
    kernel: &TubeKernel,
    tube_radius: u64,
    window: &Ball,
    required_kind: KernelKind,
    row_distance: impl Fn(&KernelRow, &KernelRow) -> f64,
) -> Result<DeficiencyReport> {
    if kernel.descriptor() != window.descriptor() {
        return Err(Error::mismatch(&kernel.descriptor(), &window.descriptor()));
    }
    if kernel.kind() != required_kind {
        return Err(Error::Domain(format!(
            "this deficiency flavor needs a {required_kind} kernel, got {}",
            kernel.kind()
        )));
    }
    // coverage: every window point must have a row
    let rows: Vec<&KernelRow> = window
        .iter()
        .map(|s| {
            kernel.row_of(s).ok_or_else(|| {
                Error::UnderCoverage(format!(
                    "kernel has no row at window point {s}; \
                     rebuild the certificate with window radius at least {}",
                    window.radius()
                ))
            })
        })
        .collect::<Result<_>>()?;
    let elements = window.elements();
    let mut table: Vec<DeficiencyRow> = (0..=tube_radius)
        .map(|d| DeficiencyRow { distance: d, max_deficiency: 0.0, pair_count: 0 })
        .collect();
    let mut sup = 0.0f64;
    let mut witness: Option<(usize, usize)> = None;
    for i in 0..elements.len() {
        for j in (i + 1)..elements.len() {
            let d = elements[i].distance_to(&elements[j]);
            if d == 0 || d > tube_radius {
                continue;
            }
            let value = row_distance(rows[i], rows[j]);
            let row = &mut table[d as usize];
            row.pair_count += 1;
            if value > row.max_deficiency {
                row.max_deficiency = value;
            }
            if value > sup || witness.is_none() {
                sup = value;
                witness = Some((i, j));
            }
        }
    }
    // coverage: every tested distance must actually occur in the window
    for row in &table {
        if row.distance >= 1 && row.pair_count == 0 {
            return Err(Error::UnderCoverage(format!(
                "window of radius {} realizes no pair at distance {}; \
                 enlarge the window or lower the tube radius",
                window.radius(),
                row.distance
            )));
        }
    }
    Ok(DeficiencyReport {
        n: kernel.n(),
        tube_radius,
        window: format!("ball of radius {} ({} points)", window.radius(), window.len()),
        sup,
        sup_fraction: None,
        witness: witness.map(|(i, j)| Witness::Pair {
            s: elements[i].to_string(),
            t: elements[j].to_string(),
        }),
        table,
    })
}

// ===========================================================================
// Reports
// ===========================================================================

/// The pair attaining a reported supremum, printed in element syntax.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Witness {
    /// Two group elements (kernel deficiency sweeps).
    Pair { s: String, t: String },
    /// A boundary point and a group element (mean family sweeps).
    BoundaryPair { omega: String, s: String },
}

/// One distance class of a deficiency sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyRow {
    pub distance: u64,
    pub max_deficiency: f64,
    pub pair_count: u64,
}

/// Outcome of a deficiency measurement: the supremum, who attains it,
/// and the per-distance breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyReport {
    /// Resolution parameter of the measured object, when it has one.
    pub n: Option<u64>,
    /// Largest pair distance examined.
    pub tube_radius: u64,
    /// Human-readable description of the examined window.
    pub window: String,
    /// Supremum of the measured deficiency.
    pub sup: f64,
    /// When the supremum is an exact fraction `[numerator, denominator]`
    /// (integer mismatch counting), the two integers.
    pub sup_fraction: Option<[u64; 2]>,
    /// A pair attaining `sup`; re-evaluating it reproduces `sup` exactly.
    pub witness: Option<Witness>,
    /// Per-distance maxima and pair counts, distances `0..=tube_radius`.
    pub table: Vec<DeficiencyRow>,
}

impl DeficiencyReport {
    /// The per-distance table as CSV (`distance,max_deficiency,pair_count`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance,max_deficiency,pair_count\n");
        for row in &self.table {
            let _ = writeln!(out, "{},{},{}", row.distance, row.max_deficiency, row.pair_count);
        }
        out
    }
}
