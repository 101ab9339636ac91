//! Command implementations. Each command reads one validated
//! [`RunConfig`], performs its measurement through the library, and
//! persists reports into the content-addressed run directory:
//!
//! * `certify`   — deficiency sweeps, one report per resolution;
//! * `convert`   — the mean → density → ℓ² → coefficient chain with
//!   its four re-checked inequalities;
//! * `factorize` — Gram square-root factorization of a positive-type
//!   kernel (indefinite inputs produce a witness report and exit 1);
//! * `embed`     — certificate-sequence distortion profile;
//! * `psd`       — finite-sample positivity verdict.
//!
//! All numeric work is sequential and seeded, so re-running a
//! configuration writes byte-identical reports.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use coarsecert::boundary::cylinder_sample;
use coarsecert::certificate::{
    aicm_deficiency, boundary_aicm, deficiency_l1, deficiency_l2, folner_certificate,
    free_ray_certificate, DeficiencyReport,
};
use coarsecert::group::{Ball, GroupDescriptor, GroupElement};
use coarsecert::kernel::{KernelBuilder, KernelKind, TubeKernel};
use coarsecert::measure::NeumaierSum;
use coarsecert::psd::{psd_check_action, psd_check_group, random_l2_kernel, PsdReport};
use coarsecert::transform::{
    coefficient_factorize, density_to_l2, l2_to_coefficient, run_conversion_chain, verify_chain,
    BumpFunction,
};
use coarsecert::Error;

use crate::config::RunConfig;

// ===========================================================================
// Errors and exit codes
// ===========================================================================

/// Everything a run can fail with: a library error or an I/O error.
#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Io(e)
    }
}

impl CliError {
    /// Exit-code partition: 0 success, 1 mathematical violation,
    /// 2 under-coverage, 64 usage, 65 parse; I/O failures take the
    /// conventional 74.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(Error::NotPositiveType { .. } | Error::BoundViolation(_)) => 1,
            CliError::Lib(Error::UnderCoverage(_)) => 2,
            CliError::Lib(
                Error::Domain(_) | Error::DescriptorMismatch { .. } | Error::Budget { .. },
            ) => 64,
            CliError::Lib(Error::Parse(_)) => 65,
            CliError::Io(_) => 74,
        }
    }
}

type RunResult<T> = std::result::Result<T, CliError>;

/// What a finished command hands back to `main`.
pub struct RunOutcome {
    pub exit: i32,
    pub headline: String,
}

// ===========================================================================
// Dispatch
// ===========================================================================

/// Runs a validated configuration, writing reports into `dir`.
pub fn run(config: &RunConfig, dir: &Path) -> RunResult<RunOutcome> {
    match config.command.as_str() {
        "certify" => cmd_certify(config, dir),
        "convert" => cmd_convert(config, dir),
        "factorize" => cmd_factorize(config, dir),
        "embed" => cmd_embed(config, dir),
        "psd" => cmd_psd(config, dir),
        other => Err(Error::Domain(format!("unknown command {other:?}")).into()),
    }
}

/// The construction registry, printed by `--list-methods`.
pub fn method_listing() -> String {
    let mut out = String::new();
    out.push_str("certify\n");
    out.push_str("  folner              lattice cube densities (z:<dim>; flavors l1, l2)\n");
    out.push_str("  free-ray            geodesic-ray densities toward --omega (free:<rank>; flavors l1, l2)\n");
    out.push_str("  boundary            means along boundary prefixes, sampled on cylinders of --depth\n");
    out.push_str("convert\n");
    out.push_str("  folner | free-ray   source certificate for the chain mean,density,l2,coefficient\n");
    out.push_str("factorize\n");
    out.push_str("  delta               identity coefficient kernel (factors exactly)\n");
    out.push_str("  random-coefficient  Gram coefficient of a seeded random unit-row kernel\n");
    out.push_str("embed\n");
    out.push_str("  (schedule by group: z:<dim> cubes at n = p^3, free:<rank> rays at n = 2p^3 + 2)\n");
    out.push_str("psd\n");
    out.push_str("  random-coefficient  Gram coefficient of a seeded random unit-row kernel\n");
    out.push_str("  boundary            square-root matching coefficient of boundary means at --omega\n");
    out
}

// ===========================================================================
// File helpers
// ===========================================================================

fn write_text(dir: &Path, name: &str, text: &str) -> RunResult<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> RunResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Domain(format!("report serialization: {e}")))?;
    text.push('\n');
    write_text(dir, name, &text)
}

/// Loads a kernel from JSON and re-checks its row normalization at the
/// configured tolerance (the parser already enforced the library
/// default; a tighter `--norm-tol` gates harder).
fn load_kernel(path: &Path, norm_tol: f64) -> RunResult<TubeKernel> {
    let text = fs::read_to_string(path)?;
    let kernel: TubeKernel = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("kernel file {}: {e}", path.display())))?;
    let bases: Vec<GroupElement> = kernel.bases().cloned().collect();
    for base in &bases {
        let mut sum = NeumaierSum::new();
        for (_, v) in kernel.row_entries(base)? {
            match kernel.kind() {
                KernelKind::L1Normalized => sum.add(v.abs()),
                KernelKind::L2Normalized => sum.add(v * v),
                // densities and coefficients carry no row normalization
                KernelKind::Density | KernelKind::PositiveType => {}
            }
        }
        let total = sum.value();
        let normalized = matches!(
            kernel.kind(),
            KernelKind::L1Normalized | KernelKind::L2Normalized
        );
        if normalized && (total - 1.0).abs() > norm_tol {
            return Err(Error::Domain(format!(
                "row at {base} off normalization by {:.3e}, beyond norm-tol {norm_tol:.3e}",
                (total - 1.0).abs()
            ))
            .into());
        }
    }
    Ok(kernel)
}

/// Quotes a CSV cell (lattice elements print with commas).
fn csv_quote(cell: &str) -> String {
    format!("\"{cell}\"")
}

// ===========================================================================
// certify
// ===========================================================================

fn cmd_certify(config: &RunConfig, dir: &Path) -> RunResult<RunOutcome> {
    let descriptor = config.descriptor()?;
    let range = config.n.expect("validated");
    let tube = config.tube.expect("validated");
    let flavor = config.flavor.as_deref().unwrap_or("l1");

    let mut reports: Vec<DeficiencyReport> = Vec::new();
    match config.method.as_deref().expect("validated") {
        "folner" => {
            let window_radius = config.window.unwrap_or(tube + 2);
            let window = Ball::enumerate(descriptor, window_radius)?;
            for n in range.iter() {
                let cert = folner_certificate(descriptor, n, window_radius)?;
                reports.push(measure(&cert, tube, &window, flavor)?);
            }
        }
        "free-ray" => {
            let window_radius = config.window.unwrap_or(tube + 2);
            let window = Ball::enumerate(descriptor, window_radius)?;
            let omega = config.ray_target()?;
            for n in range.iter() {
                let cert = free_ray_certificate(descriptor, n, &omega, window_radius)?;
                reports.push(measure(&cert, tube, &window, flavor)?);
            }
        }
        "boundary" => {
            let depth = config.depth.expect("validated");
            let omegas = cylinder_sample(descriptor, depth)?;
            let translates = Ball::enumerate(descriptor, tube)?;
            for n in range.iter() {
                let family = boundary_aicm(descriptor, n)?;
                reports.push(aicm_deficiency(&family, &omegas, &translates)?);
            }
        }
        _ => unreachable!("validated"),
    }

    let mut csv = String::from("n,distance,max_deficiency,pair_count\n");
    for report in &reports {
        let n = report.n.map(|v| v.to_string()).unwrap_or_default();
        for row in &report.table {
            csv.push_str(&format!(
                "{n},{},{:.17e},{}\n",
                row.distance, row.max_deficiency, row.pair_count
            ));
        }
    }
    write_json(dir, "report.json", &reports)?;
    write_text(dir, "report.csv", &csv)?;

    let last = reports.last().expect("ranges are nonempty");
    Ok(RunOutcome {
        exit: 0,
        headline: format!(
            "{} resolutions, final sup {:.6e} at n = {}",
            reports.len(),
            last.sup,
            last.n.map(|v| v.to_string()).unwrap_or_default()
        ),
    })
}

fn measure(
    cert: &TubeKernel,
    tube: u64,
    window: &Ball,
    flavor: &str,
) -> RunResult<DeficiencyReport> {
    Ok(match flavor {
        "l1" => deficiency_l1(cert, tube, window)?,
        "l2" => deficiency_l2(&density_to_l2(cert)?, tube, window)?,
        _ => unreachable!("validated"),
    })
}

// ===========================================================================
// convert
// ===========================================================================

fn cmd_convert(config: &RunConfig, dir: &Path) -> RunResult<RunOutcome> {
    let descriptor = config.descriptor()?;
    let n = config.n.expect("validated").lo;
    let window_radius = config.window.unwrap_or(4);

    let means = match config.method.as_deref().unwrap_or("folner") {
        "folner" => folner_certificate(descriptor, n, window_radius)?,
        "free-ray" => free_ray_certificate(descriptor, n, &config.ray_target()?, window_radius)?,
        _ => unreachable!("validated"),
    };
    let bump = BumpFunction::uniform_ball(descriptor, 1)?;
    let chain = run_conversion_chain(&means, &bump)?;
    let window = Ball::enumerate(descriptor, window_radius)?;
    let report = verify_chain(&chain, &window)?;

    let mut csv = String::from("check,max_violation,violations,worst_s,worst_t\n");
    for check in &report.checks {
        csv.push_str(&format!(
            "{},{:.17e},{},{},{}\n",
            check.label,
            check.max_violation,
            check.violations,
            csv_quote(&check.worst_pair[0]),
            csv_quote(&check.worst_pair[1]),
        ));
    }
    write_json(dir, "report.json", &report)?;
    write_text(dir, "report.csv", &csv)?;
    write_json(dir, "kernel.json", &chain.coefficient)?;

    Ok(RunOutcome {
        exit: if report.violations == 0 { 0 } else { 1 },
        headline: format!(
            "{} checks over {} pairs, {} violations",
            report.checks.len(),
            report.pairs_checked,
            report.violations
        ),
    })
}

// ===========================================================================
// factorize
// ===========================================================================

/// Reported outcome of a factorization run. `positive_type: false`
/// carries the offending eigenvalue and its witness vector instead of
/// the reconstruction fields.
#[derive(Serialize)]
struct FactorizeReport {
    source: String,
    window_in: u64,
    window_out: u64,
    psd_tol: f64,
    positive_type: bool,
    min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    clipped_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_clip_magnitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<f64>>,
}

fn cmd_factorize(config: &RunConfig, dir: &Path) -> RunResult<RunOutcome> {
    let descriptor = config.descriptor()?;
    let window_in_radius = config.window_in.unwrap_or(1);

    let (h, source) = match (&config.input, config.method.as_deref()) {
        (Some(path), None) => (
            load_kernel(path, config.norm_tol)?,
            path.display().to_string(),
        ),
        (None, Some("delta")) => {
            let outer = config.window.unwrap_or(window_in_radius + 1);
            (delta_coefficient(descriptor, outer)?, "delta".into())
        }
        (None, Some("random-coefficient")) => {
            let tube = config.tube.unwrap_or(2);
            let outer = config.window.unwrap_or(window_in_radius + 2 * tube + 1);
            let xi = random_l2_kernel(descriptor, outer, tube, config.seed)?;
            (l2_to_coefficient(&xi)?, "random-coefficient".into())
        }
        _ => unreachable!("validated"),
    };
    let outer_radius = config
        .window
        .unwrap_or(window_in_radius + h.tube_radius() + 1);
    let window_out = Ball::enumerate(descriptor, outer_radius)?;
    let window_in = Ball::enumerate(descriptor, window_in_radius)?;

    match coefficient_factorize(&h, &window_out, &window_in, config.psd_tol) {
        Ok(factorization) => {
            let report = FactorizeReport {
                source,
                window_in: window_in_radius,
                window_out: outer_radius,
                psd_tol: config.psd_tol,
                positive_type: true,
                min_eigenvalue: factorization.min_eigenvalue,
                clipped_count: Some(factorization.clipped_count),
                max_clip_magnitude: Some(factorization.max_clip_magnitude),
                residual: Some(factorization.residual),
                witness: None,
            };
            write_json(dir, "report.json", &report)?;
            write_json(dir, "kernel.json", &factorization.kernel)?;
            Ok(RunOutcome {
                exit: 0,
                headline: format!(
                    "residual {:.6e}, min eigenvalue {:.6e}",
                    factorization.residual, factorization.min_eigenvalue
                ),
            })
        }
        Err(Error::NotPositiveType { eigenvalue, witness }) => {
            let report = FactorizeReport {
                source,
                window_in: window_in_radius,
                window_out: outer_radius,
                psd_tol: config.psd_tol,
                positive_type: false,
                min_eigenvalue: eigenvalue,
                clipped_count: None,
                max_clip_magnitude: None,
                residual: None,
                witness: Some(witness),
            };
            write_json(dir, "report.json", &report)?;
            Ok(RunOutcome {
                exit: 1,
                headline: format!("not positive type: eigenvalue {eigenvalue:.6e}"),
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// The identity coefficient: `h(s, t) = [s = t]` over a ball. Its Gram
/// matrix is the identity, so the factorization is exact.
fn delta_coefficient(descriptor: GroupDescriptor, radius: u64) -> RunResult<TubeKernel> {
    let ball = Ball::enumerate(descriptor, radius)?;
    let mut builder = KernelBuilder::new(descriptor, KernelKind::PositiveType, 0);
    for s in ball.elements() {
        builder.push_row(s, &[(s.clone(), 1.0)])?;
    }
    Ok(builder.finalize()?)
}

// ===========================================================================
// embed
// ===========================================================================

fn cmd_embed(config: &RunConfig, dir: &Path) -> RunResult<RunOutcome> {
    use coarsecert::embedding::{distortion_profile, folner_sqrt_sequence, free_ray_sqrt_sequence};

    let descriptor = config.descriptor()?;
    let levels = config.levels.expect("validated");
    let window_radius = config.window.expect("validated");

    let sequence = match descriptor {
        GroupDescriptor::Lattice { .. } => {
            folner_sqrt_sequence(descriptor, levels, window_radius)?
        }
        GroupDescriptor::Free { .. } => {
            free_ray_sqrt_sequence(descriptor, levels, &config.ray_target()?, window_radius)?
        }
    };
    let window = Ball::enumerate(descriptor, window_radius)?;
    let profile = distortion_profile(&sequence, &window)?;

    write_json(dir, "report.json", &profile)?;
    write_text(dir, "profile.csv", &profile.to_csv())?;

    Ok(RunOutcome {
        exit: 0,
        headline: format!(
            "{} levels over {} window points, both distortion brackets held",
            profile.levels.len(),
            window.len()
        ),
    })
}

// ===========================================================================
// psd
// ===========================================================================

fn cmd_psd(config: &RunConfig, dir: &Path) -> RunResult<RunOutcome> {
    let descriptor = config.descriptor()?;
    let window_radius = config.window.expect("validated");
    let sample = Ball::enumerate(descriptor, window_radius)?;

    let report: PsdReport = match (&config.input, config.method.as_deref()) {
        (Some(path), None) => {
            let kernel = load_kernel(path, config.norm_tol)?;
            psd_check_group(&kernel, sample.elements(), config.psd_tol)?
        }
        (None, None | Some("random-coefficient")) => {
            let tube = config.tube.unwrap_or(2);
            let xi = random_l2_kernel(descriptor, window_radius, tube, config.seed)?;
            let h = l2_to_coefficient(&xi)?;
            psd_check_group(&h, sample.elements(), config.psd_tol)?
        }
        (None, Some("boundary")) => {
            let family = boundary_aicm(descriptor, config.n.expect("validated").lo)?;
            let base = config.ray_target()?;
            psd_check_action(
                descriptor,
                &base,
                sample.elements(),
                |omega, s| family.sqrt_coefficient(omega, s),
                |g, omega| omega.acted_by(g),
                config.psd_tol,
            )?
        }
        _ => unreachable!("validated"),
    };

    write_json(dir, "report.json", &report)?;
    let exit = if report.positive_type { 0 } else { 1 };
    Ok(RunOutcome {
        exit,
        headline: format!(
            "min eigenvalue {:.6e} over {} sample points ({})",
            report.min_eigenvalue,
            report.sample.len(),
            if report.positive_type {
                "positive type"
            } else {
                "indefinite"
            }
        ),
    })
}
