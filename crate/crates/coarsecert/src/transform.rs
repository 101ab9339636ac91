//! Conversions between certificate flavours.
//!
//! The pipeline turns an approximately invariant family of means into a
//! positive-type kernel, one inequality-preserving step at a time:
//!
//! ```text
//! means ──convolve──▶ density ──normalize──▶ l1 ──√──▶ l2 ──⟨,⟩──▶ coefficient
//! ```
//!
//! Each step controls the new deficiency by the old one:
//!
//! 1. *Convolution* with a bump `φ` is an `ℓ¹` contraction:
//!    `‖(ρ_s − ρ_t) ∗ φ‖₁ ≤ ‖ρ_s − ρ_t‖₁`.
//! 2. *Normalization* adds a basepoint-translated bump with weight `1/n`
//!    and rescales, making rows exact probability densities again.
//! 3. *Entrywise square root* compresses distances:
//!    `‖√ρ_s − √ρ_t‖₂² ≤ ‖ρ_s − ρ_t‖₁` (since `(√a−√b)² ≤ |a−b|`).
//! 4. *Inner products* `h(s, t) = ⟨ξ_s, ξ_t⟩` give a positive-type
//!    kernel whose polarization `h(s,s) + h(t,t) − 2h(s,t)` equals the
//!    squared `ℓ²` distance exactly, and Cauchy–Schwarz bounds the
//!    squares' `ℓ¹` distance: `‖ξ_s² − ξ_t²‖₁ ≤ (‖ξ_s‖+‖ξ_t‖)·‖ξ_s−ξ_t‖₂`.
//!
//! [`verify_chain`] re-measures all four inequalities on every window
//! pair of an actual conversion run.
//!
//! The reverse direction is [`coefficient_factorize`]: given a
//! positive-type kernel `h` with unit diagonal, take the Gram matrix
//! over a large window, form its positive-semidefinite square root, and
//! read off columns `ξ_s` with `⟨ξ_s, ξ_t⟩ ≈ h(s, t)` — valid for inner
//! bases far enough from the window edge that truncation cannot reach
//! them. A margin of `tube radius + 1` is required, and a spectrum that
//! is genuinely negative (below the tolerance) is rejected with the
//! offending eigenvalue and eigenvector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::group::{Ball, GroupDescriptor, GroupElement};
use crate::kernel::{KernelBuilder, KernelKind, RowValues, TubeKernel};
use crate::linalg::symmetric_eigen;
use crate::measure::{NeumaierSum, ProbMeasure};
use crate::{Error, Result, NORM_TOL, PSD_TOL};

/// Slack allowed when re-checking the conversion inequalities in
/// floating point; the mathematical inequalities are exact.
pub const CHAIN_CHECK_TOL: f64 = 1e-12;

// ===========================================================================
// Bump functions
// ===========================================================================

/// A finitely supported probability density used for smoothing: the
/// convolution and normalization steps spread each row by this shape.
#[derive(Debug, Clone)]
pub struct BumpFunction {
    measure: ProbMeasure,
    radius: u64,
}

impl BumpFunction {
    /// The point mass at the identity (convolution leaves rows as they
    /// are; normalization adds mass only at the base point).
    pub fn dirac(descriptor: GroupDescriptor) -> Result<BumpFunction> {
        Ok(BumpFunction {
            measure: ProbMeasure::dirac(descriptor, descriptor.identity())?,
            radius: 0,
        })
    }

    /// Uniform density on the ball of the given radius.
    pub fn uniform_ball(descriptor: GroupDescriptor, radius: u64) -> Result<BumpFunction> {
        let ball = Ball::enumerate(descriptor, radius)?;
        Ok(BumpFunction {
            measure: ProbMeasure::uniform(descriptor, ball.elements().to_vec())?,
            radius,
        })
    }

    /// Any probability measure; the radius is the longest support element.
    pub fn from_measure(measure: ProbMeasure) -> BumpFunction {
        let radius = measure
            .entries()
            .iter()
            .map(|(g, _)| g.length())
            .max()
            .unwrap_or(0);
        BumpFunction { measure, radius }
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.measure.descriptor()
    }

    pub fn measure(&self) -> &ProbMeasure {
        &self.measure
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }
}

// ===========================================================================
// Forward conversions
// ===========================================================================

fn require_kind(kernel: &TubeKernel, wanted: &[KernelKind], what: &str) -> Result<()> {
    if !wanted.contains(&kernel.kind()) {
        return Err(Error::Domain(format!(
            "{what} needs a {} kernel, got {}",
            wanted
                .iter()
                .map(|k| k.as_str())
                .collect::<Vec<_>>()
                .join(" or "),
            kernel.kind()
        )));
    }
    Ok(())
}

fn require_same_group(kernel: &TubeKernel, bump: &BumpFunction) -> Result<()> {
    if kernel.descriptor() != bump.descriptor() {
        return Err(Error::mismatch(&kernel.descriptor(), &bump.descriptor()));
    }
    Ok(())
}

/// Convolves every row with the bump: `row'_s(u) = Σ_x row_s(x)·φ(x⁻¹u)`.
/// Row sums are preserved, pair `ℓ¹` distances can only shrink, and the
/// tube radius grows by the bump radius. The output is declared a plain
/// density (its sums are 1 only up to accumulated rounding).
pub fn mean_to_density(means: &TubeKernel, bump: &BumpFunction) -> Result<TubeKernel> {
    require_kind(means, &[KernelKind::L1Normalized], "convolution smoothing")?;
    require_same_group(means, bump)?;
    let descriptor = means.descriptor();
    let mut builder = KernelBuilder::new(
        descriptor,
        KernelKind::Density,
        means.tube_radius() + bump.radius(),
    );
    if let Some(n) = means.n() {
        builder.set_n(n);
    }
    for (base, row) in means.rows_by_pos() {
        let mut acc: BTreeMap<GroupElement, NeumaierSum> = BTreeMap::new();
        for (x, v) in row_entries_of(means, row) {
            for (y, p) in bump.measure.entries() {
                let u = descriptor.mul(x, y)?;
                acc.entry(u).or_insert_with(NeumaierSum::new).add(v * p);
            }
        }
        let entries: Vec<(GroupElement, f64)> =
            acc.into_iter().map(|(g, s)| (g, s.value())).collect();
        builder.push_row(base, &entries)?;
    }
    builder.finalize()
}

/// Renormalizes rows into exact probability densities:
/// `row'_s(u) = (row_s(u) + φ(s⁻¹u)/n) / (Σ row_s + 1/n)`, with `n` the
/// kernel's resolution parameter. A zero row becomes the translated
/// bump itself; nonzero rows are perturbed by at most `2/(n·Σ row_s)`
/// in `ℓ¹`.
pub fn density_normalize(kernel: &TubeKernel, bump: &BumpFunction) -> Result<TubeKernel> {
    require_kind(
        kernel,
        &[KernelKind::L1Normalized, KernelKind::Density],
        "density normalization",
    )?;
    require_same_group(kernel, bump)?;
    let Some(n) = kernel.n() else {
        return Err(Error::Domain(
            "density normalization needs the kernel's resolution parameter n".into(),
        ));
    };
    let delta = 1.0 / n as f64;
    let descriptor = kernel.descriptor();
    let mut builder = KernelBuilder::new(
        descriptor,
        KernelKind::L1Normalized,
        kernel.tube_radius().max(bump.radius()),
    );
    builder.set_n(n);
    for (base, row) in kernel.rows_by_pos() {
        let mut row_sum = NeumaierSum::new();
        let mut acc: BTreeMap<GroupElement, (f64, f64)> = BTreeMap::new();
        for (x, v) in row_entries_of(kernel, row) {
            row_sum.add(v);
            acc.insert(x.clone(), (v, 0.0));
        }
        for (y, p) in bump.measure.entries() {
            let u = descriptor.mul(base, y)?;
            acc.entry(u).or_insert((0.0, 0.0)).1 = *p;
        }
        let scale = row_sum.value() + delta;
        let entries: Vec<(GroupElement, f64)> = acc
            .into_iter()
            .map(|(g, (v, p))| (g, (v + delta * p) / scale))
            .collect();
        builder.push_row(base, &entries)?;
    }
    builder.finalize()
}

/// Entrywise square root: probability densities become unit `ℓ²`
/// vectors on the same supports. Uniform rows stay uniform.
pub fn density_to_l2(kernel: &TubeKernel) -> Result<TubeKernel> {
    require_kind(kernel, &[KernelKind::L1Normalized], "the square-root map")?;
    map_values(kernel, KernelKind::L2Normalized, NORM_TOL, f64::sqrt)
}

/// Entrywise square: unit `ℓ²` vectors become probability densities.
/// Inverse of [`density_to_l2`] up to one rounding per entry.
pub fn l2_to_density(kernel: &TubeKernel) -> Result<TubeKernel> {
    require_kind(kernel, &[KernelKind::L2Normalized], "the squaring map")?;
    map_values(kernel, KernelKind::L1Normalized, NORM_TOL.max(PSD_TOL), |v| v * v)
}

fn map_values(
    kernel: &TubeKernel,
    out_kind: KernelKind,
    norm_tol: f64,
    f: impl Fn(f64) -> f64,
) -> Result<TubeKernel> {
    let mut builder = KernelBuilder::new(kernel.descriptor(), out_kind, kernel.tube_radius());
    if let Some(n) = kernel.n() {
        builder.set_n(n);
    }
    // Re-intern the source table in id order: every id keeps its
    // meaning, so stored supports — including contiguous ranges, whose
    // compactness large certificates depend on — carry over verbatim.
    for g in kernel.table() {
        builder.intern_unchecked(g.clone())?;
    }
    for (base_id, row) in kernel.raw_rows() {
        let values = match &row.values {
            RowValues::Uniform(v) => RowValues::Uniform(f(*v)),
            RowValues::Dense(vs) => RowValues::Dense(vs.iter().copied().map(&f).collect()),
        };
        builder.push_row_parts(*base_id, row.support.clone(), values)?;
    }
    builder.finalize_with_tol(norm_tol)
}

fn row_entries_of<'k>(
    kernel: &'k TubeKernel,
    row: &'k crate::kernel::KernelRow,
) -> impl Iterator<Item = (&'k GroupElement, f64)> + 'k {
    row.iter().map(|(id, v)| (kernel.element(id), v))
}

/// Tabulates the positive-type kernel `h(s, t) = ⟨ξ_s, ξ_t⟩` over all
/// base pairs. Supports overlap only within twice the tube radius, so
/// the result is a tube kernel of doubled radius; exact zeros are not
/// stored (absent entries read as zero), and the diagonal is always
/// stored.
pub fn l2_to_coefficient(xi: &TubeKernel) -> Result<TubeKernel> {
    require_kind(xi, &[KernelKind::L2Normalized], "coefficient tabulation")?;
    let (bases, rows): (Vec<&GroupElement>, Vec<&crate::kernel::KernelRow>) =
        xi.rows_by_pos().unzip();
    let reach = 2 * xi.tube_radius();
    let mut builder = KernelBuilder::new(xi.descriptor(), KernelKind::PositiveType, reach);
    if let Some(n) = xi.n() {
        builder.set_n(n);
    }
    let ids: Vec<u32> = bases
        .iter()
        .map(|b| builder.intern_unchecked((*b).clone()))
        .collect::<Result<_>>()?;
    let mut entries: Vec<Vec<(u32, f64)>> = vec![Vec::new(); bases.len()];
    for i in 0..bases.len() {
        let diag = crate::kernel::rows_inner(rows[i], rows[i]);
        entries[i].push((ids[i], diag));
        for j in (i + 1)..bases.len() {
            if bases[i].distance_to(bases[j]) > reach {
                continue;
            }
            let value = crate::kernel::rows_inner(rows[i], rows[j]);
            if value != 0.0 {
                entries[i].push((ids[j], value));
                entries[j].push((ids[i], value));
            }
        }
    }
    for (i, mut row) in entries.into_iter().enumerate() {
        row.sort_unstable_by_key(|(id, _)| *id);
        let (support, values): (Vec<u32>, Vec<f64>) = row.into_iter().unzip();
        builder.push_row_parts(
            ids[i],
            crate::kernel::Support::Ids(support),
            RowValues::Dense(values),
        )?;
    }
    builder.finalize()
}

// ===========================================================================
// Factorization: coefficient kernel → l2 kernel
// ===========================================================================

/// Result of factorizing a positive-type kernel.
#[derive(Debug, Clone)]
pub struct Factorization {
    /// Unit `ℓ²` rows `ξ_s` for each inner-window base, supported on
    /// the outer window, with `⟨ξ_s, ξ_t⟩ ≈ h(s, t)`.
    pub kernel: TubeKernel,
    /// Smallest eigenvalue of the outer-window Gram matrix.
    pub min_eigenvalue: f64,
    /// Eigenvalues in `[-tolerance, 0)` clipped to zero.
    pub clipped_count: u64,
    /// Largest magnitude among clipped eigenvalues.
    pub max_clip_magnitude: f64,
    /// `max |⟨ξ_s, ξ_t⟩ − h(s, t)|` over inner-window pairs.
    pub residual: f64,
}

/// Factorizes a unit-diagonal positive-type kernel through the square
/// root of its Gram matrix on `window_out`, returning rows for
/// `window_in`.
///
/// Truncating the group to a finite window perturbs Gram entries only
/// near the window edge; requiring
/// `window_out.radius ≥ window_in.radius + h.tube_radius + 1`
/// keeps every inner row's tube strictly inside the outer window. A
/// spectrum below `-psd_tol` means `h` is not positive type on this
/// sample; the offending eigenvalue and its eigenvector (coordinates
/// in outer-window order) are returned as the error.
pub fn coefficient_factorize(
    h: &TubeKernel,
    window_out: &Ball,
    window_in: &Ball,
    psd_tol: f64,
) -> Result<Factorization> {
    require_kind(h, &[KernelKind::PositiveType], "factorization")?;
    if h.descriptor() != window_out.descriptor() {
        return Err(Error::mismatch(&h.descriptor(), &window_out.descriptor()));
    }
    if h.descriptor() != window_in.descriptor() {
        return Err(Error::mismatch(&h.descriptor(), &window_in.descriptor()));
    }
    if !(psd_tol > 0.0 && psd_tol <= 1e-6) {
        return Err(Error::Domain(format!(
            "positivity tolerance must lie in (0, 1e-6], got {psd_tol}"
        )));
    }
    let margin_needed = window_in.radius() + h.tube_radius() + 1;
    if window_out.radius() < margin_needed {
        return Err(Error::UnderCoverage(format!(
            "outer window radius {} is too small: factorizing a kernel of tube radius {} \
             for an inner window of radius {} needs at least {margin_needed}",
            window_out.radius(),
            h.tube_radius(),
            window_in.radius()
        )));
    }
    let outer = window_out.elements();
    let m = outer.len();
    let diag_tol = NORM_TOL.max(psd_tol);
    for g in outer {
        let Some(diag) = h.value(g, g) else {
            return Err(Error::UnderCoverage(format!(
                "kernel has no row at outer window point {g}"
            )));
        };
        if (diag - 1.0).abs() > diag_tol {
            return Err(Error::Domain(format!(
                "factorization needs a unit diagonal; h({g}, {g}) = {diag:.17}"
            )));
        }
    }

    // Gram matrix in window order; absent entries are exact zeros
    let gram = DMatrix::from_fn(m, m, |i, j| h.value(&outer[i], &outer[j]).unwrap_or(0.0));
    let (eigenvalues, vectors) = symmetric_eigen(&gram)?;
    let min_eigenvalue = eigenvalues[0];
    if min_eigenvalue < -psd_tol {
        return Err(Error::NotPositiveType {
            eigenvalue: min_eigenvalue,
            witness: vectors.column(0).iter().copied().collect(),
        });
    }
    let mut clipped_count = 0u64;
    let mut max_clip_magnitude = 0.0f64;
    let sqrt_eigenvalues: Vec<f64> = eigenvalues
        .iter()
        .map(|&lambda| {
            if lambda < 0.0 {
                clipped_count += 1;
                max_clip_magnitude = max_clip_magnitude.max(-lambda);
                0.0
            } else {
                lambda.sqrt()
            }
        })
        .collect();

    // ξ_s = V · diag(√λ) · Vᵀ e_s, one column per inner base
    let inner = window_in.elements();
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(inner.len());
    for s in inner {
        let row_idx = window_out
            .index_of(s)
            .expect("inner window is contained in the outer window")
            as usize;
        let scaled = DVector::from_fn(m, |k, _| vectors[(row_idx, k)] * sqrt_eigenvalues[k]);
        columns.push(&vectors * scaled);
    }

    // measured tube radius of the factor
    let mut tube_radius = 0u64;
    for (s, xi) in inner.iter().zip(&columns) {
        for (j, &v) in xi.iter().enumerate() {
            if v != 0.0 {
                tube_radius = tube_radius.max(s.distance_to(&outer[j]));
            }
        }
    }

    let mut builder = KernelBuilder::new(h.descriptor(), KernelKind::L2Normalized, tube_radius);
    if let Some(n) = h.n() {
        builder.set_n(n);
    }
    let outer_ids: Vec<u32> = outer
        .iter()
        .map(|g| builder.intern_unchecked(g.clone()))
        .collect::<Result<_>>()?;
    for (s, xi) in inner.iter().zip(&columns) {
        let base_id = builder.intern_unchecked(s.clone())?;
        let mut pairs: Vec<(u32, f64)> = Vec::with_capacity(m);
        for (j, &v) in xi.iter().enumerate() {
            if v != 0.0 {
                pairs.push((outer_ids[j], v));
            }
        }
        pairs.sort_unstable_by_key(|(id, _)| *id);
        let (ids, values): (Vec<u32>, Vec<f64>) = pairs.into_iter().unzip();
        builder.push_row_parts(base_id, crate::kernel::Support::Ids(ids), RowValues::Dense(values))?;
    }
    let kernel = builder.finalize_with_tol(NORM_TOL.max(psd_tol))?;

    let mut residual = 0.0f64;
    for i in 0..inner.len() {
        for j in i..inner.len() {
            let inner_product = columns[i].dot(&columns[j]);
            let target = h.value(&inner[i], &inner[j]).unwrap_or(0.0);
            residual = residual.max((inner_product - target).abs());
        }
    }

    Ok(Factorization {
        kernel,
        min_eigenvalue,
        clipped_count,
        max_clip_magnitude,
        residual,
    })
}

// ===========================================================================
// The full chain, with verification
// ===========================================================================

/// All stages of one conversion run.
#[derive(Debug, Clone)]
pub struct ConversionChain {
    pub means: TubeKernel,
    pub density: TubeKernel,
    pub normalized: TubeKernel,
    pub l2: TubeKernel,
    pub coefficient: TubeKernel,
}

/// Runs means → density → normalized → `ℓ²` → coefficient with one bump.
pub fn run_conversion_chain(means: &TubeKernel, bump: &BumpFunction) -> Result<ConversionChain> {
    let density = mean_to_density(means, bump)?;
    let normalized = density_normalize(&density, bump)?;
    let l2 = density_to_l2(&normalized)?;
    let coefficient = l2_to_coefficient(&l2)?;
    Ok(ConversionChain {
        means: means.clone(),
        density,
        normalized,
        l2,
        coefficient,
    })
}

/// One re-checked inequality: its largest measured `lhs − rhs` over all
/// window pairs and where that happened.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainCheck {
    pub label: String,
    /// Largest `lhs − rhs`; the inequality demands `≤ 0` up to rounding.
    pub max_violation: f64,
    pub worst_pair: [String; 2],
    /// Pairs exceeding [`CHAIN_CHECK_TOL`].
    pub violations: u64,
}

/// Outcome of re-measuring the four conversion inequalities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    pub pairs_checked: u64,
    pub tolerance: f64,
    pub checks: Vec<ChainCheck>,
    /// Total pairs over all checks exceeding the tolerance.
    pub violations: u64,
}

/// Re-measures, on every unordered window pair, the four inequalities
/// the conversion steps promise:
///
/// 1. `‖dens_s − dens_t‖₁ ≤ ‖mean_s − mean_t‖₁` (convolution contracts),
/// 2. `‖ξ_s − ξ_t‖₂² ≤ ‖ρ_s − ρ_t‖₁` (square root compresses),
/// 3. `|h(s,s) + h(t,t) − 2h(s,t) − ‖ξ_s − ξ_t‖₂²| = 0` (polarization),
/// 4. `‖ρ_s − ρ_t‖₁ ≤ (‖ξ_s‖ + ‖ξ_t‖)·‖ξ_s − ξ_t‖₂` (Cauchy–Schwarz),
///
/// where `ρ` is the normalized stage and `ξ` its square root. Every
/// window point must have a row in every stage.
pub fn verify_chain(chain: &ConversionChain, window: &Ball) -> Result<ChainReport> {
    let stages: [(&TubeKernel, &str); 5] = [
        (&chain.means, "means"),
        (&chain.density, "density"),
        (&chain.normalized, "normalized"),
        (&chain.l2, "l2"),
        (&chain.coefficient, "coefficient"),
    ];
    for (kernel, label) in stages {
        if kernel.descriptor() != window.descriptor() {
            return Err(Error::mismatch(&kernel.descriptor(), &window.descriptor()));
        }
        for g in window.elements() {
            if !kernel.has_row(g) {
                return Err(Error::UnderCoverage(format!(
                    "{label} stage has no row at window point {g}"
                )));
            }
        }
    }
    let elements = window.elements();
    let mut checks: Vec<ChainCheck> = [
        "convolution-contraction",
        "sqrt-compression",
        "polarization",
        "cauchy-schwarz",
    ]
    .iter()
    .map(|label| ChainCheck {
        label: (*label).to_string(),
        max_violation: f64::NEG_INFINITY,
        worst_pair: [String::new(), String::new()],
        violations: 0,
    })
    .collect();
    let mut pairs_checked = 0u64;
    for i in 0..elements.len() {
        for j in (i + 1)..elements.len() {
            let s = &elements[i];
            let t = &elements[j];
            pairs_checked += 1;
            let mean_l1 = chain.means.row_l1_distance(s, t)?;
            let dens_l1 = chain.density.row_l1_distance(s, t)?;
            let norm_l1 = chain.normalized.row_l1_distance(s, t)?;
            let l2_sq = chain.l2.row_l2_distance_sq(s, t)?;
            let h_ss = chain.coefficient.value(s, s).unwrap_or(0.0);
            let h_tt = chain.coefficient.value(t, t).unwrap_or(0.0);
            let h_st = chain.coefficient.value(s, t).unwrap_or(0.0);
            let norm_s = chain.l2.row_inner(s, s)?.sqrt();
            let norm_t = chain.l2.row_inner(t, t)?.sqrt();
            let values = [
                dens_l1 - mean_l1,
                l2_sq - norm_l1,
                ((h_ss + h_tt - 2.0 * h_st) - l2_sq).abs(),
                norm_l1 - (norm_s + norm_t) * l2_sq.sqrt(),
            ];
            for (check, value) in checks.iter_mut().zip(values) {
                if value > check.max_violation {
                    check.max_violation = value;
                    check.worst_pair = [s.to_string(), t.to_string()];
                }
                if value > CHAIN_CHECK_TOL {
                    check.violations += 1;
                }
            }
        }
    }
    if pairs_checked == 0 {
        return Err(Error::UnderCoverage(
            "chain verification needs a window with at least two points".into(),
        ));
    }
    let violations = checks.iter().map(|c| c.violations).sum();
    Ok(ChainReport {
        pairs_checked,
        tolerance: CHAIN_CHECK_TOL,
        checks,
        violations,
    })
}
