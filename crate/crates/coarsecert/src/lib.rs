//! Construction, conversion, and numerical certification of coarse
//! amenability data for finitely generated groups.
//!
//! The crate works with two families of groups — free groups `F_r` on
//! `r` generators and integer lattices `Z^d` — equipped with their word
//! metrics. For these it builds three interconvertible flavours of
//! *certificate*, each a finitely supported kernel on the group (or on
//! the group boundary) whose defect under translation is explicitly
//! measured:
//!
//! * **`l1-normalized`** kernels: each row is a probability density;
//!   translation defect is measured in total variation / ℓ¹.
//! * **`l2-normalized`** kernels: each row is a unit vector in ℓ²;
//!   defect is the squared ℓ² distance between rows.
//! * **`positive-type`** kernels: symmetric two-variable kernels with
//!   positive semidefinite Gram matrices; defect is read off the
//!   diagonal via polarization.
//!
//! The point of the crate is that every conversion between these
//! flavours comes with a *proved, per-pair inequality* relating the
//! output defect to the input defect, and every constructor
//! re-measures its output instead of trusting the construction. The
//! final product is a uniform embedding of the group into a Hilbert
//! space assembled from a sequence of certificates of increasing
//! quality, together with a measured distortion profile.
//!
//! # Module map
//!
//! * [`group`] — group descriptors, elements, word metrics, metric
//!   balls and tubes.
//! * [`measure`] — sparse finitely supported vectors and probability
//!   measures, with compensated summation.
//! * [`boundary`] — eventually periodic points of the Gromov boundary
//!   of a free group and the boundary action.
//! * [`kernel`] — the [`kernel::TubeKernel`] container; per-kind
//!   validation lives in its builder.
//! * [`certificate`] — Følner, geodesic-ray, and boundary-mean
//!   certificate constructors plus deficiency measurement.
//! * [`transform`] — the conversion pipeline between kernel kinds,
//!   including the positive-type factorization.
//! * [`psd`] — positive-semidefiniteness checks with witnesses.
//! * [`embedding`] — certificate sequences, the block-sum embedding,
//!   and its distortion profile.
//! * [`linalg`] — the symmetric eigensolver (system LAPACK).
//!
//! # Numerical contract
//!
//! All floating-point comparisons in the crate go through the
//! tolerance constants exported at the crate root ([`NORM_TOL`],
//! [`PSD_TOL`], [`SYMMETRY_TOL`], [`WITNESS_TOL`]). Row sums and inner
//! products over large supports use Neumaier compensated summation so
//! that the 1e-12 normalization tolerance is meaningful even for rows
//! with tens of thousands of entries. Quantities that admit an exact
//! integer representation (total variation between uniform measures
//! with equal masses) are computed in integers and only divided once.

pub mod boundary;
pub mod certificate;
pub mod embedding;
pub mod group;
pub mod kernel;
pub mod linalg;
pub mod measure;
pub mod psd;
pub mod transform;

// ===========================================================================
// Tolerances
// ===========================================================================

/// Tolerance for row normalization checks: ℓ¹ row sums of probability
/// rows and squared ℓ² norms of unit rows must be within this of 1.
pub const NORM_TOL: f64 = 1e-12;

/// Eigenvalues of a Gram matrix above `-PSD_TOL` are treated as
/// numerically nonnegative; anything below is a genuine negative
/// direction and produces a witness.
pub const PSD_TOL: f64 = 1e-10;

/// Positive-type kernels must satisfy `|h(s,t) - h(t,s)| <= SYMMETRY_TOL`
/// on every stored pair.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A reported negative-direction witness `v` must satisfy
/// `vᵀ G v < -WITNESS_TOL` when re-evaluated against the Gram matrix.
pub const WITNESS_TOL: f64 = 1e-9;

// ===========================================================================
// Errors
// ===========================================================================

/// Crate-wide error type.
///
/// Variants are ordered roughly by "whose fault it is": `Domain`,
/// `DescriptorMismatch`, `Budget`, and `Parse` indicate bad input;
/// `UnderCoverage` means the input object does not carry enough data
/// for the requested computation; `NotPositiveType` and
/// `BoundViolation` are verdicts — the computation ran and found that
/// a claimed property fails, with evidence attached.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain (rank 0, radius
    /// negative, unreduced word, non-probability mass, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects built over different groups were combined.
    #[error("descriptor mismatch: {left} vs {right}")]
    DescriptorMismatch { left: String, right: String },

    /// An enumeration would exceed its element budget.
    #[error("budget exceeded: {what} needs {needed} elements, budget is {budget}")]
    Budget {
        what: String,
        needed: u64,
        budget: u64,
    },

    /// The kernel does not store enough rows (or the stored window does
    /// not realize enough distances) to measure what was asked.
    #[error("under-coverage: {0}")]
    UnderCoverage(String),

    /// A kernel claimed to be positive type has a Gram matrix with an
    /// eigenvalue below `-PSD_TOL`; the offending eigenvalue and a unit
    /// witness vector (paired with the sample points) are attached.
    #[error("not positive type: eigenvalue {eigenvalue:.6e} on a {}-point sample", witness.len())]
    NotPositiveType {
        eigenvalue: f64,
        /// Unit vector `v` with `vᵀ G v = eigenvalue`, indexed like the
        /// sample the check ran on.
        witness: Vec<f64>,
    },

    /// A measured quantity violates a bound it was required to satisfy
    /// (embedding contract, distortion bracket, ...).
    #[error("bound violation: {0}")]
    BoundViolation(String),

    /// Malformed textual input (element syntax, JSON payloads, ...).
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn mismatch(
        left: &crate::group::GroupDescriptor,
        right: &crate::group::GroupDescriptor,
    ) -> Self {
        Error::DescriptorMismatch {
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
