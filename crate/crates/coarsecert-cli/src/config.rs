//! Run configuration: every invocation reduces to one serializable
//! [`RunConfig`], which is validated, canonically serialized, hashed,
//! and persisted next to the reports it produced. Re-running a saved
//! `config.json` reproduces the run bit for bit.
//!
//! The output directory is deliberately *not* part of the
//! configuration: two runs of the same experiment into different
//! directories are the same experiment, so they must hash to the same
//! report address and produce identical files.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use coarsecert::boundary::BoundaryPoint;
use coarsecert::group::GroupDescriptor;
use coarsecert::{Error, Result};

// ===========================================================================
// Resolution ranges
// ===========================================================================

/// Inclusive resolution range `lo..=hi` (a single `n` has `lo == hi`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NRange {
    pub lo: u64,
    pub hi: u64,
}

impl NRange {
    pub fn single(n: u64) -> NRange {
        NRange { lo: n, hi: n }
    }

    pub fn iter(self) -> impl Iterator<Item = u64> {
        self.lo..=self.hi
    }

    pub fn is_single(self) -> bool {
        self.lo == self.hi
    }
}

/// Parses `"8"` or an inclusive `"1..16"`. Used as a clap value parser,
/// hence the `String` error type.
pub fn parse_n_range(text: &str) -> std::result::Result<NRange, String> {
    let parse_one = |s: &str| -> std::result::Result<u64, String> {
        s.trim()
            .parse::<u64>()
            .map_err(|_| format!("expected a positive integer, got {s:?}"))
    };
    let range = match text.split_once("..") {
        Some((lo, hi)) => NRange {
            lo: parse_one(lo)?,
            hi: parse_one(hi)?,
        },
        None => NRange::single(parse_one(text)?),
    };
    if range.lo < 1 {
        return Err("resolutions start at 1".into());
    }
    if range.lo > range.hi {
        return Err(format!("empty range {}..{}", range.lo, range.hi));
    }
    Ok(range)
}

// ===========================================================================
// The configuration record
// ===========================================================================

/// One fully-specified run. Field order is the canonical serialization
/// order; the content address is the SHA-256 of the compact JSON form.
///
/// Optional fields are omitted from the serialization when absent, so
/// a configuration never carries fields its command does not read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `certify`, `convert`, `factorize`, `embed`, or `psd`.
    pub command: String,
    /// Group descriptor, e.g. `z:1` or `free:2`.
    pub group: String,
    /// Construction method, where the command offers a choice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Resolution parameter(s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<NRange>,
    /// Tube radius: pair distances swept in `certify`, generator tube
    /// in randomized kernels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tube: Option<u64>,
    /// Window radius: where rows live and sweeps run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u64>,
    /// Inner window radius for factorization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_in: Option<u64>,
    /// Boundary cylinder sampling depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u64>,
    /// Number of certificate levels for `embed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u64>,
    /// Deficiency flavor for `certify`: `l1` or `l2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flavor: Option<String>,
    /// Conversion chain for `convert`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<String>,
    /// Boundary point for ray constructions, e.g. `:a` or `b:ab`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    /// Kernel JSON file to load instead of generating input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Seed for randomized constructions.
    #[serde(default)]
    pub seed: u64,
    /// Eigenvalue tolerance separating indefiniteness from noise.
    pub psd_tol: f64,
    /// Row-normalization tolerance applied when revalidating kernels
    /// loaded from `input`.
    pub norm_tol: f64,
}

pub const SUPPORTED_CHAIN: &str = "mean,density,l2,coefficient";

impl RunConfig {
    /// Group descriptor, with parse failures reported as usage errors.
    pub fn descriptor(&self) -> Result<GroupDescriptor> {
        self.group
            .parse::<GroupDescriptor>()
            .map_err(|e| Error::Domain(format!("group: {e}")))
    }

    /// The boundary point to aim rays at (defaults to `:a`).
    pub fn ray_target(&self) -> Result<BoundaryPoint> {
        let text = self.omega.as_deref().unwrap_or(":a");
        let omega = text
            .parse::<BoundaryPoint>()
            .map_err(|e| Error::Domain(format!("omega: {e}")))?;
        omega.validate_for(self.descriptor()?)?;
        Ok(omega)
    }

    /// Canonical compact serialization — the hashing preimage.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configurations always serialize")
    }

    /// Content-addressed report directory name,
    /// `<command>-<first 12 hex of sha256(canonical json)>`.
    pub fn dir_name(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        let mut hex = String::with_capacity(12);
        for byte in digest.iter().take(6) {
            hex.push_str(&format!("{byte:02x}"));
        }
        format!("{}-{hex}", self.command)
    }

    // =======================================================================
    // Validation
    // =======================================================================

    /// Checks every invariant a configuration promises: known command
    /// and method names, positive radii and ranges, tolerances in
    /// `(0, 1e-6]`, and the fields each command needs.
    pub fn validate(&self) -> Result<()> {
        self.check_tolerance("psd-tol", self.psd_tol)?;
        self.check_tolerance("norm-tol", self.norm_tol)?;
        let descriptor = self.descriptor()?;
        for (name, value) in [
            ("n", self.n.map(|r| r.lo)),
            ("tube", self.tube),
            ("window", self.window),
            ("window-in", self.window_in),
            ("depth", self.depth),
            ("levels", self.levels),
        ] {
            if value == Some(0) {
                return Err(Error::Domain(format!("{name} must be positive")));
            }
        }
        if let Some(r) = self.n {
            if r.lo > r.hi {
                return Err(Error::Domain(format!("empty range {}..{}", r.lo, r.hi)));
            }
        }
        match self.command.as_str() {
            "certify" => self.validate_certify(descriptor),
            "convert" => self.validate_convert(),
            "factorize" => self.validate_factorize(),
            "embed" => self.validate_embed(descriptor),
            "psd" => self.validate_psd(descriptor),
            other => Err(Error::Domain(format!("unknown command {other:?}"))),
        }
    }

    fn check_tolerance(&self, name: &str, value: f64) -> Result<()> {
        if !(value > 0.0 && value <= 1e-6) {
            return Err(Error::Domain(format!(
                "{name} must lie in (0, 1e-6], got {value}"
            )));
        }
        Ok(())
    }

    fn require(&self, field: &str, present: bool) -> Result<()> {
        if present {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{} requires {field}",
                self.command
            )))
        }
    }

    fn method_or<'a>(&'a self, default: &'a str) -> &'a str {
        self.method.as_deref().unwrap_or(default)
    }

    fn validate_certify(&self, descriptor: GroupDescriptor) -> Result<()> {
        self.require("--n", self.n.is_some())?;
        self.require("--tube", self.tube.is_some())?;
        let flavor = self.flavor.as_deref().unwrap_or("l1");
        if !matches!(flavor, "l1" | "l2") {
            return Err(Error::Domain(format!(
                "flavor must be l1 or l2, got {flavor:?}"
            )));
        }
        match self.method_or("") {
            "folner" => require_lattice(descriptor),
            "free-ray" => {
                require_free(descriptor)?;
                self.ray_target().map(drop)
            }
            "boundary" => {
                require_free(descriptor)?;
                self.require("--depth", self.depth.is_some())?;
                if flavor != "l1" {
                    return Err(Error::Domain(
                        "boundary means are measured in total variation; use flavor l1".into(),
                    ));
                }
                Ok(())
            }
            other => Err(Error::Domain(format!(
                "certify methods are folner, free-ray, boundary; got {other:?}"
            ))),
        }
    }

    fn validate_convert(&self) -> Result<()> {
        self.require("--n", self.n.is_some())?;
        if !self.n.unwrap().is_single() {
            return Err(Error::Domain(
                "convert runs one chain; give a single n, not a range".into(),
            ));
        }
        match self.chain.as_deref() {
            Some(SUPPORTED_CHAIN) => {}
            Some(other) => {
                return Err(Error::Domain(format!(
                    "supported chain is {SUPPORTED_CHAIN:?}, got {other:?}"
                )))
            }
            None => return Err(Error::Domain("convert requires --chain".into())),
        }
        match self.method_or("folner") {
            "folner" => require_lattice(self.descriptor()?),
            "free-ray" => {
                require_free(self.descriptor()?)?;
                self.ray_target().map(drop)
            }
            other => Err(Error::Domain(format!(
                "convert methods are folner, free-ray; got {other:?}"
            ))),
        }
    }

    fn validate_factorize(&self) -> Result<()> {
        match (&self.input, self.method.as_deref()) {
            (Some(_), Some(_)) => Err(Error::Domain(
                "give either --input or --method, not both".into(),
            )),
            (Some(_), None) | (None, Some("delta" | "random-coefficient")) => Ok(()),
            (None, Some(other)) => Err(Error::Domain(format!(
                "factorize methods are delta, random-coefficient; got {other:?}"
            ))),
            (None, None) => Err(Error::Domain(
                "factorize requires --input or --method".into(),
            )),
        }
    }

    fn validate_embed(&self, descriptor: GroupDescriptor) -> Result<()> {
        self.require("--levels", self.levels.is_some())?;
        self.require("--window", self.window.is_some())?;
        if matches!(descriptor, GroupDescriptor::Free { .. }) {
            self.ray_target().map(drop)?;
        }
        Ok(())
    }

    fn validate_psd(&self, descriptor: GroupDescriptor) -> Result<()> {
        self.require("--window", self.window.is_some())?;
        match (&self.input, self.method.as_deref()) {
            (Some(_), Some(_)) => Err(Error::Domain(
                "give either --input or --method, not both".into(),
            )),
            (Some(_), None) | (None, None | Some("random-coefficient")) => Ok(()),
            (None, Some("boundary")) => {
                require_free(descriptor)?;
                self.require("--n", self.n.is_some())?;
                self.ray_target().map(drop)
            }
            (None, Some(other)) => Err(Error::Domain(format!(
                "psd methods are random-coefficient, boundary; got {other:?}"
            ))),
        }
    }
}

fn require_lattice(descriptor: GroupDescriptor) -> Result<()> {
    match descriptor {
        GroupDescriptor::Lattice { .. } => Ok(()),
        GroupDescriptor::Free { .. } => Err(Error::Domain(
            "this method builds lattice certificates; use a z:<dim> group".into(),
        )),
    }
}

fn require_free(descriptor: GroupDescriptor) -> Result<()> {
    match descriptor {
        GroupDescriptor::Free { .. } => Ok(()),
        GroupDescriptor::Lattice { .. } => Err(Error::Domain(
            "this method needs a hyperbolic boundary; use a free:<rank> group".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(command: &str, group: &str) -> RunConfig {
        RunConfig {
            command: command.into(),
            group: group.into(),
            method: None,
            n: None,
            tube: None,
            window: None,
            window_in: None,
            depth: None,
            levels: None,
            flavor: None,
            chain: None,
            omega: None,
            input: None,
            seed: 0,
            psd_tol: 1e-10,
            norm_tol: 1e-12,
        }
    }

    #[test]
    fn ranges_parse_inclusively() {
        assert_eq!(parse_n_range("8").unwrap(), NRange::single(8));
        let r = parse_n_range("1..16").unwrap();
        assert_eq!((r.lo, r.hi), (1, 16));
        assert_eq!(r.iter().count(), 16);
        assert!(parse_n_range("0").is_err());
        assert!(parse_n_range("5..2").is_err());
        assert!(parse_n_range("a..b").is_err());
    }

    #[test]
    fn configs_round_trip_losslessly() {
        let mut config = base("certify", "z:1");
        config.method = Some("folner".into());
        config.n = Some(NRange { lo: 1, hi: 16 });
        config.tube = Some(2);
        let text = config.canonical_json();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.canonical_json(), text);
    }

    #[test]
    fn absent_fields_leave_no_trace() {
        let config = base("embed", "z:1");
        let text = config.canonical_json();
        assert!(!text.contains("method"));
        assert!(!text.contains("input"));
        assert!(text.contains("\"seed\":0"));
    }

    #[test]
    fn addresses_depend_on_every_serialized_field() {
        let mut a = base("certify", "z:1");
        a.method = Some("folner".into());
        a.n = Some(NRange::single(4));
        a.tube = Some(2);
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.dir_name(), b.dir_name());
        assert!(a.dir_name().starts_with("certify-"));
        assert_eq!(a.dir_name().len(), "certify-".len() + 12);
        // Same content, same address.
        assert_eq!(a.dir_name(), a.clone().dir_name());
    }

    #[test]
    fn validation_rejects_mismatched_shapes() {
        let mut config = base("certify", "z:1");
        config.method = Some("folner".into());
        config.n = Some(NRange::single(4));
        config.tube = Some(2);
        config.validate().unwrap();

        config.tube = Some(0);
        assert!(config.validate().is_err());
        config.tube = Some(2);
        config.psd_tol = 1e-3;
        assert!(config.validate().is_err());
        config.psd_tol = 1e-10;
        config.method = Some("boundary".into());
        // boundary means need a free group and a depth
        assert!(config.validate().is_err());
        config.group = "free:2".into();
        config.depth = Some(4);
        config.validate().unwrap();
        config.flavor = Some("l2".into());
        assert!(config.validate().is_err());
    }

    #[test]
    fn replayed_configs_reject_unknown_fields() {
        let text = r#"{"command":"embed","group":"z:1","levels":4,
                       "window":8,"seed":0,"psd_tol":1e-10,
                       "norm_tol":1e-12,"typo_field":3}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }
}
