//! Uniform Hilbert-space embeddings assembled from certificate levels.
//!
//! A *certificate sequence* is a family of `l2-normalized` kernels
//! `ξ¹, ξ², …` over one group, where level `p` is contractive at scale
//! `p`: the measured squared deficiency `sup ‖ξᵖ_s − ξᵖ_t‖₂²` over
//! pairs at distance `≤ p` must not exceed `1/p²`. Summing the blocks
//!
//! ```text
//! f(s) = ⊕_p (ξᵖ_s − ξᵖ_e)
//! ```
//!
//! then gives a map into a direct-sum Hilbert space whose distortion
//! is controlled on both sides:
//!
//! * **upper**: for `d(s, t) = d`, levels below `d` contribute at most
//!   `(‖ξᵖ_s‖ + ‖ξᵖ_t‖)² = 4` each and levels `p ≥ d` at most `1/p²`,
//!   so `‖f(s) − f(t)‖² ≤ 4d + Σ_{k>d} 1/k²`;
//! * **lower**: rows of level `p` live in tubes of radius `ψ(p)` (the
//!   largest tube among levels `≤ p`), so once `d(s, t) > 2ψ(n)` the
//!   supports of the first `n` levels are disjoint and each block
//!   contributes its full `‖ξᵖ_s‖² + ‖ξᵖ_t‖² = 2`, giving
//!   `‖f(s) − f(t)‖² ≥ 2n`.
//!
//! Growth in `n` on the lower side against linear growth on the upper
//! side is exactly a uniform embedding with measurable distortion.
//! Everything here is *measured from the stored kernels*: the sequence
//! constructor re-runs the deficiency sweep for every level and
//! refuses (with [`Error::BoundViolation`]) any level that misses its
//! contract, and [`distortion_profile`] re-derives both brackets from
//! per-pair distances over an explicit window.
//!
//! Two level schedules are provided. On lattices, level `p` is the
//! square root of the uniform-cube certificate at `n = p³`: its
//! squared deficiency at distance `p` is at most `2p/(2p³+1) < 1/p²`.
//! On free groups, level `p` is the square root of the ray certificate
//! at `n = 2p³ + 2`: at distance `p` the ray windows shift by at most
//! `p`, so the squared deficiency is at most `2p/n = p/(p³+1) < 1/p²`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::boundary::BoundaryPoint;
use crate::certificate::{
    busemann_value, deficiency_l2, folner_certificate, free_ray_certificate,
    ray_l2_row_distance_sq,
};
use crate::group::{Ball, GroupDescriptor, GroupElement};
use crate::kernel::{rows_l2_distance_sq, KernelKind, KernelRow, TubeKernel};
use crate::measure::{NeumaierSum, SparseVec};
use crate::transform::density_to_l2;
use crate::{Error, Result};

/// Slack allowed below the ideal lower bound `2n`, absorbing the
/// `l2-normalization` tolerance of the stored rows (each block is only
/// unit up to [`NORM_TOL`](crate::NORM_TOL)) and summation rounding.
/// Far below every genuine margin: a scheduled level past the cutoff
/// already contributes more than `1/(max level)²` on its own.
pub const EMBED_LOWER_SLACK: f64 = 1e-9;

// ======================================================================
// Levels and sequences
// ======================================================================

/// One level of a certificate sequence: an `l2-normalized` kernel
/// together with its level index, and optionally the boundary ray it
/// was built along (which unlocks closed-form pair distances in the
/// distortion sweep — the formula is verified against the stored rows
/// when the sequence is assembled).
#[derive(Debug, Clone)]
pub struct CertificateLevel {
    level: u64,
    kernel: TubeKernel,
    ray: Option<BoundaryPoint>,
}

impl CertificateLevel {
    pub fn new(level: u64, kernel: TubeKernel) -> CertificateLevel {
        CertificateLevel {
            level,
            kernel,
            ray: None,
        }
    }

    pub fn with_ray(level: u64, kernel: TubeKernel, ray: BoundaryPoint) -> CertificateLevel {
        CertificateLevel {
            level,
            kernel,
            ray: Some(ray),
        }
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn kernel(&self) -> &TubeKernel {
        &self.kernel
    }

    pub fn ray(&self) -> Option<&BoundaryPoint> {
        self.ray.as_ref()
    }
}

/// A validated sequence of certificate levels `1..=N` over one group.
///
/// Construction re-measures every level's deficiency contract, so a
/// value of this type is *evidence*: each level `p` has verified
/// squared deficiency `≤ 1/p²` at distance `p` over the ball `B(p)`.
#[derive(Debug, Clone)]
pub struct CertificateSequence {
    descriptor: GroupDescriptor,
    levels: Vec<CertificateLevel>,
    /// Measured deficiency sup of each level, aligned with `levels`.
    measured: Vec<f64>,
}

impl CertificateSequence {
    /// Validates and assembles levels into a sequence.
    ///
    /// Requirements: levels are consecutively numbered from 1, share
    /// one descriptor, and are `l2-normalized`. Each level `p` is
    /// swept over the ball `B(p)` at tube radius `p`; a measured
    /// squared deficiency above `1/p²` is a hard
    /// [`Error::BoundViolation`]. Levels carrying a ray must know
    /// their window length (`n`) and must match the closed-form ray
    /// geometry bit for bit on a small sample — the distortion sweep
    /// later trusts that formula for them.
    pub fn from_levels(levels: Vec<CertificateLevel>) -> Result<CertificateSequence> {
        if levels.is_empty() {
            return Err(Error::Domain("certificate sequence has no levels".into()));
        }
        let descriptor = levels[0].kernel.descriptor();
        let mut measured = Vec::with_capacity(levels.len());
        for (pos, level) in levels.iter().enumerate() {
            let p = level.level;
            if p != pos as u64 + 1 {
                return Err(Error::Domain(format!(
                    "levels must be numbered consecutively from 1, position {pos} holds level {p}"
                )));
            }
            if level.kernel.descriptor() != descriptor {
                return Err(Error::mismatch(&descriptor, &level.kernel.descriptor()));
            }
            if level.kernel.kind() != KernelKind::L2Normalized {
                return Err(Error::Domain(format!(
                    "sequence levels must be l2-normalized, level {p} is {}",
                    level.kernel.kind()
                )));
            }
            if let Some(ray) = &level.ray {
                ray.validate_for(descriptor)?;
                verify_ray_geometry(&level.kernel, ray, p)?;
            }

            let window = Ball::enumerate(descriptor, p)?;
            let report = deficiency_l2(&level.kernel, p, &window)?;
            let contract = 1.0 / (p as f64 * p as f64);
            if report.sup > contract {
                return Err(Error::BoundViolation(format!(
                    "level {p} has squared deficiency {:.6e} at distance ≤ {p}, \
                     contract allows {contract:.6e}",
                    report.sup
                )));
            }
            measured.push(report.sup);
        }
        Ok(CertificateSequence {
            descriptor,
            levels,
            measured,
        })
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.descriptor
    }

    pub fn levels(&self) -> &[CertificateLevel] {
        &self.levels
    }

    pub fn max_level(&self) -> u64 {
        self.levels.len() as u64
    }

    /// Measured squared deficiency of level `p` (recorded when the
    /// sequence was assembled).
    pub fn measured_sup(&self, p: u64) -> Option<f64> {
        self.measured.get((p as usize).checked_sub(1)?).copied()
    }

    /// `ψ(n)`: the largest tube radius among levels `1..=min(n, N)`.
    /// Rows of those levels vanish outside tubes of this radius, so
    /// pairs farther apart than `2ψ(n)` have disjoint supports on the
    /// first `n` levels. `ψ(0) = 0`.
    pub fn support_radius(&self, n: u64) -> u64 {
        self.levels
            .iter()
            .take(n.min(self.max_level()) as usize)
            .map(|l| l.kernel.tube_radius())
            .max()
            .unwrap_or(0)
    }
}

/// Bit-for-bit consistency of the ray closed form with the stored
/// rows, sampled over all pairs in `B(min(p, 2))`. Both sides reduce
/// to the same uniform-row arithmetic, so any disagreement means the
/// kernel was not actually built along this ray.
fn verify_ray_geometry(kernel: &TubeKernel, ray: &BoundaryPoint, p: u64) -> Result<()> {
    let Some(n) = kernel.n() else {
        return Err(Error::Domain(format!(
            "ray level {p} does not record its window length n"
        )));
    };
    let sample = Ball::enumerate(kernel.descriptor(), p.min(2))?;
    let words: Vec<&GroupElement> = sample.elements().iter().collect();
    let busemann: Vec<i64> = words
        .iter()
        .map(|g| match g {
            GroupElement::Word(w) => Ok(busemann_value(w, ray)),
            GroupElement::Vector(_) => Err(Error::Domain(
                "ray levels require free-group elements".into(),
            )),
        })
        .collect::<Result<_>>()?;
    for i in 0..words.len() {
        for j in (i + 1)..words.len() {
            let d = kernel.descriptor().distance(words[i], words[j])?;
            let by_formula = ray_l2_row_distance_sq(n, d, busemann[i], busemann[j]);
            let by_rows = kernel.row_l2_distance_sq(words[i], words[j])?;
            if by_formula.to_bits() != by_rows.to_bits() {
                return Err(Error::Domain(format!(
                    "level {p} rows disagree with the declared ray at ({}, {}): \
                     formula {by_formula:.17e}, rows {by_rows:.17e}",
                    words[i], words[j]
                )));
            }
        }
    }
    Ok(())
}

// ======================================================================
// Level schedules
// ======================================================================

/// Square-root uniform-cube sequence on a lattice: level `p` is the
/// entrywise square root of the cube certificate at `n = p³`, an
/// `l2-normalized` kernel with squared deficiency at most
/// `2p/(2p³+1) < 1/p²` at distance `p`. `window_radius` must cover the
/// deepest re-measurement window, i.e. be at least `max_level`.
pub fn folner_sqrt_sequence(
    descriptor: GroupDescriptor,
    max_level: u64,
    window_radius: u64,
) -> Result<CertificateSequence> {
    require_schedule(max_level, window_radius)?;
    let mut levels = Vec::with_capacity(max_level as usize);
    for p in 1..=max_level {
        let n = p * p * p;
        let cube = folner_certificate(descriptor, n, window_radius)?;
        levels.push(CertificateLevel::new(p, density_to_l2(&cube)?));
    }
    CertificateSequence::from_levels(levels)
}

/// Square-root ray sequence on a free group: level `p` is the
/// entrywise square root of the ray certificate at `n = 2p³ + 2`,
/// whose squared deficiency at distance `p` is at most
/// `2p/(2p³+2) < 1/p²`. All levels look toward the same boundary
/// point. `window_radius` must be at least `max_level`.
pub fn free_ray_sqrt_sequence(
    descriptor: GroupDescriptor,
    max_level: u64,
    omega: &BoundaryPoint,
    window_radius: u64,
) -> Result<CertificateSequence> {
    require_schedule(max_level, window_radius)?;
    let mut levels = Vec::with_capacity(max_level as usize);
    for p in 1..=max_level {
        let n = 2 * p * p * p + 2;
        let rays = free_ray_certificate(descriptor, n, omega, window_radius)?;
        levels.push(CertificateLevel::with_ray(
            p,
            density_to_l2(&rays)?,
            omega.clone(),
        ));
    }
    CertificateSequence::from_levels(levels)
}

fn require_schedule(max_level: u64, window_radius: u64) -> Result<()> {
    if max_level == 0 {
        return Err(Error::Domain("sequences need at least one level".into()));
    }
    if window_radius < max_level {
        return Err(Error::Domain(format!(
            "window radius {window_radius} cannot cover the level-{max_level} \
             re-measurement window; it must be at least {max_level}"
        )));
    }
    Ok(())
}

// ======================================================================
// The embedding map
// ======================================================================

/// The image `f(s) = ⊕_p (ξᵖ_s − ξᵖ_e)` of one group element, stored
/// blockwise as sparse vectors over the group.
#[derive(Debug, Clone)]
pub struct EmbeddingVector {
    base: GroupElement,
    blocks: Vec<SparseVec>,
}

impl EmbeddingVector {
    pub fn base(&self) -> &GroupElement {
        &self.base
    }

    /// Blocks in level order (`blocks()[p-1]` belongs to level `p`).
    pub fn blocks(&self) -> &[SparseVec] {
        &self.blocks
    }

    /// `‖f(s)‖²` across all stored blocks.
    pub fn norm_sq(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for block in &self.blocks {
            for (_, v) in block.entries() {
                acc.add(v * v);
            }
        }
        acc.value()
    }

    /// Squared distance `‖f(s) − f(t)‖²` between two images from the
    /// same sequence (blockwise sorted-merge of the entries).
    pub fn distance_sq(&self, other: &EmbeddingVector) -> Result<f64> {
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::Domain(format!(
                "embedding vectors have {} and {} blocks; they come from \
                 different sequences",
                self.blocks.len(),
                other.blocks.len()
            )));
        }
        let mut acc = NeumaierSum::new();
        for (mine, theirs) in self.blocks.iter().zip(&other.blocks) {
            let (a, b) = (mine.entries(), theirs.entries());
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let diff = if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
                    let v = a[i].1;
                    i += 1;
                    v
                } else if i >= a.len() || b[j].0 < a[i].0 {
                    let v = -b[j].1;
                    j += 1;
                    v
                } else {
                    let v = a[i].1 - b[j].1;
                    i += 1;
                    j += 1;
                    v
                };
                acc.add(diff * diff);
            }
        }
        Ok(acc.value())
    }
}

/// Evaluates the embedding at `s`: every level must store rows at both
/// `s` and the identity (otherwise [`Error::UnderCoverage`]). Shared
/// support between `ξᵖ_s` and `ξᵖ_e` cancels exactly where the stored
/// values agree, so blocks stay sparse near the identity.
pub fn build_embedding(seq: &CertificateSequence, s: &GroupElement) -> Result<EmbeddingVector> {
    let e = seq.descriptor.identity();
    let mut blocks = Vec::with_capacity(seq.levels.len());
    for level in &seq.levels {
        let at_s = level.kernel.row_to_sparsevec(s)?;
        let at_e = level.kernel.row_to_sparsevec(&e)?;
        let mut entries: Vec<(GroupElement, f64)> = at_s.entries().to_vec();
        entries.extend(at_e.entries().iter().map(|(g, v)| (g.clone(), -v)));
        blocks.push(SparseVec::from_entries(seq.descriptor, entries)?);
    }
    Ok(EmbeddingVector {
        base: s.clone(),
        blocks,
    })
}

/// Sum of `1/k²` over `k > n` — the tail the finite level truncation
/// discards. Levels `p > n` each displace a pair at distance `≤ n+1`
/// by at most `1/p²`, so the truncated squared distance undershoots
/// the untruncated one by at most this amount.
pub fn tail_bound(n: u64) -> f64 {
    let mut partial = NeumaierSum::new();
    for k in (1..=n).rev() {
        let k = k as f64;
        partial.add(1.0 / (k * k));
    }
    std::f64::consts::PI.powi(2) / 6.0 - partial.value()
}

/// Truncated squared embedding distance `Σ_{p≤N} ‖ξᵖ_s − ξᵖ_t‖²`,
/// paired with [`tail_bound`]`(N)` for the discarded levels. Computed
/// from the stored rows of every level.
pub fn embedding_distance(
    seq: &CertificateSequence,
    s: &GroupElement,
    t: &GroupElement,
) -> Result<(f64, f64)> {
    let mut acc = NeumaierSum::new();
    for level in &seq.levels {
        acc.add(level.kernel.row_l2_distance_sq(s, t)?);
    }
    Ok((acc.value(), tail_bound(seq.max_level())))
}

// ======================================================================
// Distortion profile
// ======================================================================

/// One level echoed into a profile: its schedule parameters and the
/// deficiency measured when the sequence was assembled.
#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub level: u64,
    pub n: Option<u64>,
    pub tube_radius: u64,
    /// `"free-ray"` when pair distances come from the verified ray
    /// closed form, `"stored-rows"` when they come from row merges.
    pub geometry: String,
    pub measured_sup_sq: f64,
    pub contract_sup_sq: f64,
}

/// Distance bracket measured over all window pairs at one distance.
#[derive(Debug, Clone, Serialize)]
pub struct DistortionRow {
    pub distance: u64,
    pub pair_count: u64,
    pub min_sq: f64,
    pub max_sq: f64,
    /// `2·n_max(d) − EMBED_LOWER_SLACK` where `n_max(d)` is the
    /// deepest level prefix with `2ψ(n) < d`.
    pub lower_allowed: f64,
    /// `4d + tail_bound(d)`.
    pub upper_allowed: f64,
}

/// The measured distortion bracket of an embedding over a window:
/// per-distance extremes of the truncated squared distance, verified
/// against the lower and upper bounds the level contracts promise.
#[derive(Debug, Clone, Serialize)]
pub struct DistortionProfile {
    pub descriptor: String,
    pub window: String,
    pub max_level: u64,
    pub levels: Vec<LevelSummary>,
    pub rows: Vec<DistortionRow>,
}

impl DistortionProfile {
    /// Per-distance table as CSV (stable column order, one header).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance,pair_count,min_sq,max_sq,lower_allowed,upper_allowed\n");
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
                row.distance, row.pair_count, row.min_sq, row.max_sq, row.lower_allowed,
                row.upper_allowed
            )
            .expect("writing to String cannot fail");
        }
        out
    }
}

/// Per-level pair-distance evaluation strategy for the profile sweep.
enum LevelEval<'k> {
    /// Prefetched rows in window order; distances by sorted merge (or
    /// the O(1) closed form when supports are stored as ranges).
    Rows(Vec<&'k KernelRow>),
    /// Verified ray geometry: distances from window length and
    /// per-element horofunction values.
    Ray { n: u64, busemann: Vec<i64> },
}

/// Measures the embedding's distortion over every pair of window
/// elements and verifies both distortion bounds at every realized
/// distance `d`:
///
/// * `min_sq ≥ 2·n_max(d) − EMBED_LOWER_SLACK` with
///   `n_max(d) = max{n ≤ N : 2ψ(n) < d}` — the first `n_max(d)` levels
///   have pairwise-disjoint supports at distance `d`, so each must
///   contribute its full mass of 2;
/// * `max_sq ≤ 4d + tail_bound(d)` — levels below `d` are bounded by
///   the triangle inequality, levels at or above `d` by their measured
///   contracts.
///
/// Any violated bracket is a hard [`Error::BoundViolation`] naming the
/// offending pair. Every level must store rows for the whole window
/// ([`Error::UnderCoverage`] otherwise).
pub fn distortion_profile(
    seq: &CertificateSequence,
    window: &Ball,
) -> Result<DistortionProfile> {
    if window.descriptor() != seq.descriptor {
        return Err(Error::mismatch(&seq.descriptor, &window.descriptor()));
    }
    let elements = window.elements();
    let m = elements.len();

    // Per-level evaluation data, with full-window coverage checks.
    let mut evals: Vec<LevelEval> = Vec::with_capacity(seq.levels.len());
    for level in &seq.levels {
        for x in elements {
            if !level.kernel.has_row(x) {
                return Err(Error::UnderCoverage(format!(
                    "level {} has no row at window point {x}",
                    level.level
                )));
            }
        }
        match &level.ray {
            Some(ray) => {
                let n = level.kernel.n().ok_or_else(|| {
                    Error::Domain(format!(
                        "ray level {} does not record its window length n",
                        level.level
                    ))
                })?;
                let busemann = elements
                    .iter()
                    .map(|g| match g {
                        GroupElement::Word(w) => Ok(busemann_value(w, ray)),
                        GroupElement::Vector(_) => Err(Error::Domain(
                            "ray levels require free-group elements".into(),
                        )),
                    })
                    .collect::<Result<Vec<i64>>>()?;
                evals.push(LevelEval::Ray { n, busemann });
            }
            None => {
                let rows = elements
                    .iter()
                    .map(|x| {
                        level
                            .kernel
                            .row_of(x)
                            .expect("coverage was checked above")
                    })
                    .collect();
                evals.push(LevelEval::Rows(rows));
            }
        }
    }

    // Pair sweep: distance-indexed extremes of the truncated sum.
    struct Extremes {
        count: u64,
        min_sq: f64,
        min_pair: (usize, usize),
        max_sq: f64,
        max_pair: (usize, usize),
    }
    let d_max = (2 * window.radius()) as usize;
    let mut table: Vec<Option<Extremes>> = (0..=d_max).map(|_| None).collect();

    for i in 0..m {
        for j in (i + 1)..m {
            let d = seq.descriptor.distance(&elements[i], &elements[j])?;
            let mut acc = NeumaierSum::new();
            for eval in &evals {
                match eval {
                    LevelEval::Rows(rows) => acc.add(rows_l2_distance_sq(rows[i], rows[j])),
                    LevelEval::Ray { n, busemann } => {
                        acc.add(ray_l2_row_distance_sq(*n, d, busemann[i], busemann[j]))
                    }
                }
            }
            let sum = acc.value();
            let slot = &mut table[d as usize];
            match slot {
                None => {
                    *slot = Some(Extremes {
                        count: 1,
                        min_sq: sum,
                        min_pair: (i, j),
                        max_sq: sum,
                        max_pair: (i, j),
                    })
                }
                Some(ex) => {
                    ex.count += 1;
                    if sum < ex.min_sq {
                        ex.min_sq = sum;
                        ex.min_pair = (i, j);
                    }
                    if sum > ex.max_sq {
                        ex.max_sq = sum;
                        ex.max_pair = (i, j);
                    }
                }
            }
        }
    }

    // ψ is nondecreasing in the level prefix, so n_max(d) is a prefix
    // length: the number of levels whose running tube maximum stays
    // below d/2.
    let psi: Vec<u64> = (1..=seq.max_level())
        .map(|n| seq.support_radius(n))
        .collect();
    let n_max = |d: u64| psi.iter().take_while(|&&r| 2 * r < d).count() as u64;

    let mut rows = Vec::new();
    for (d, slot) in table.into_iter().enumerate() {
        let Some(ex) = slot else { continue };
        let d = d as u64;
        let lower_allowed = 2.0 * n_max(d) as f64 - EMBED_LOWER_SLACK;
        let upper_allowed = 4.0 * d as f64 + tail_bound(d);
        if ex.min_sq < lower_allowed {
            let (i, j) = ex.min_pair;
            return Err(Error::BoundViolation(format!(
                "pair ({}, {}) at distance {d} has squared embedding distance \
                 {:.6e}, below the lower bound {lower_allowed:.6e}",
                elements[i], elements[j], ex.min_sq
            )));
        }
        if ex.max_sq > upper_allowed {
            let (i, j) = ex.max_pair;
            return Err(Error::BoundViolation(format!(
                "pair ({}, {}) at distance {d} has squared embedding distance \
                 {:.6e}, above the upper bound {upper_allowed:.6e}",
                elements[i], elements[j], ex.max_sq
            )));
        }
        rows.push(DistortionRow {
            distance: d,
            pair_count: ex.count,
            min_sq: ex.min_sq,
            max_sq: ex.max_sq,
            lower_allowed,
            upper_allowed,
        });
    }

    let levels = seq
        .levels
        .iter()
        .zip(&seq.measured)
        .map(|(level, &measured)| LevelSummary {
            level: level.level,
            n: level.kernel.n(),
            tube_radius: level.kernel.tube_radius(),
            geometry: if level.ray.is_some() {
                "free-ray".into()
            } else {
                "stored-rows".into()
            },
            measured_sup_sq: measured,
            contract_sup_sq: 1.0 / (level.level as f64 * level.level as f64),
        })
        .collect();

    Ok(DistortionProfile {
        descriptor: seq.descriptor.to_string(),
        window: format!("B({}) ({} points)", window.radius(), m),
        max_level: seq.max_level(),
        levels,
        rows,
    })
}

// ======================================================================
// Tests
// ======================================================================
