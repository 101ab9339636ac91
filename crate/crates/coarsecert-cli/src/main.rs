//! `coarsecert` — constructs, converts, and numerically certifies
//! coarse amenability certificates, and measures the Hilbert-space
//! embeddings they assemble into.
//!
//! Every run is one serializable configuration. Reports land in a
//! content-addressed directory under `--out`, named by the first
//! twelve hex digits of the configuration's SHA-256, so identical
//! experiments share an address and never clobber distinct ones.
//! Re-running any configuration (same flags, same seed) writes
//! byte-identical reports: sweeps are sequential, randomness is
//! seeded, and the linear algebra is pinned to one thread.
//!
//! Exit codes partition outcomes: 0 success, 1 mathematical violation
//! (indefinite kernel, broken distortion bracket, failed chain check),
//! 2 under-coverage (the requested window cannot support the
//! measurement), 64 usage, 65 malformed input file, 74 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{parse_n_range, NRange, RunConfig, SUPPORTED_CHAIN};

// ===========================================================================
// Flag surface
// ===========================================================================

#[derive(Parser)]
#[command(
    name = "coarsecert",
    version,
    about = "Construct and numerically certify coarse amenability certificates"
)]
struct Cli {
    /// List available construction methods and exit.
    #[arg(long)]
    list_methods: bool,

    /// Root directory for content-addressed report directories.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,

    /// Replay a saved config.json instead of giving a subcommand.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Measure deficiency sweeps of a certificate family.
    Certify(CertifyArgs),
    /// Run a conversion chain and re-check its inequalities.
    Convert(ConvertArgs),
    /// Factorize a positive-type kernel through its Gram square root.
    Factorize(FactorizeArgs),
    /// Assemble a certificate sequence and measure its distortion.
    Embed(EmbedArgs),
    /// Check positive-typeness of a kernel on a window sample.
    Psd(PsdArgs),
}

#[derive(Args)]
struct CertifyArgs {
    /// Group descriptor, e.g. z:1 or free:2.
    #[arg(long)]
    group: String,
    /// Certificate family: folner, free-ray, or boundary.
    #[arg(long)]
    method: String,
    /// Resolution(s): a single n or an inclusive range like 1..16.
    #[arg(long, value_parser = parse_n_range)]
    n: NRange,
    /// Largest pair distance swept (for boundary: translate radius).
    #[arg(long)]
    tube: u64,
    /// Window radius rows live on (default: tube + 2).
    #[arg(long)]
    window: Option<u64>,
    /// Cylinder sampling depth (boundary method).
    #[arg(long)]
    depth: Option<u64>,
    /// Deficiency flavor: l1 or l2.
    #[arg(long, default_value = "l1")]
    flavor: String,
    /// Boundary point rays aim at (default :a).
    #[arg(long)]
    omega: Option<String>,
}

#[derive(Args)]
struct ConvertArgs {
    /// Group descriptor, e.g. z:1 or free:2.
    #[arg(long)]
    group: String,
    /// Source certificate: folner or free-ray.
    #[arg(long, default_value = "folner")]
    method: String,
    /// Resolution of the source certificate.
    #[arg(long, value_parser = parse_n_range)]
    n: NRange,
    /// Conversion chain to run (supported: mean,density,l2,coefficient).
    #[arg(long)]
    chain: String,
    /// Window radius the chain is re-checked on (default 4).
    #[arg(long)]
    window: Option<u64>,
    /// Boundary point rays aim at (default :a).
    #[arg(long)]
    omega: Option<String>,
}

#[derive(Args)]
struct FactorizeArgs {
    /// Group descriptor, e.g. z:1 or free:2.
    #[arg(long)]
    group: String,
    /// Input source: delta or random-coefficient.
    #[arg(long)]
    method: Option<String>,
    /// Kernel JSON file to factorize instead of a generated method.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Tube radius of the random generator (default 2).
    #[arg(long)]
    tube: Option<u64>,
    /// Inner window radius the factor rows are returned on (default 1).
    #[arg(long)]
    window_in: Option<u64>,
    /// Outer window radius the Gram matrix is assembled on
    /// (default: window_in + kernel tube + 1).
    #[arg(long)]
    window: Option<u64>,
    /// Eigenvalue tolerance separating indefiniteness from noise.
    #[arg(long, default_value_t = 1e-10)]
    psd_tol: f64,
    /// Row-normalization tolerance for loaded kernels.
    #[arg(long, default_value_t = 1e-12)]
    norm_tol: f64,
    /// Seed for the random generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EmbedArgs {
    /// Group descriptor, e.g. z:1 or free:2.
    #[arg(long)]
    group: String,
    /// Number of certificate levels.
    #[arg(long)]
    levels: u64,
    /// Window radius the distortion profile sweeps.
    #[arg(long)]
    window: u64,
    /// Boundary point rays aim at (default :a).
    #[arg(long)]
    omega: Option<String>,
}

#[derive(Args)]
struct PsdArgs {
    /// Group descriptor, e.g. z:1 or free:2.
    #[arg(long)]
    group: String,
    /// Kernel source: random-coefficient or boundary.
    #[arg(long)]
    method: Option<String>,
    /// Kernel JSON file to check instead of a generated method.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Resolution of the boundary mean family.
    #[arg(long, value_parser = parse_n_range)]
    n: Option<NRange>,
    /// Tube radius of the random generator (default 2).
    #[arg(long)]
    tube: Option<u64>,
    /// Sample radius: the check runs over the ball of this radius.
    #[arg(long)]
    window: u64,
    /// Eigenvalue tolerance separating indefiniteness from noise.
    #[arg(long, default_value_t = 1e-10)]
    psd_tol: f64,
    /// Row-normalization tolerance for loaded kernels.
    #[arg(long, default_value_t = 1e-12)]
    norm_tol: f64,
    /// Seed for the random generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Base boundary point of the action check (default :a).
    #[arg(long)]
    omega: Option<String>,
}

// ===========================================================================
// Flag → configuration
// ===========================================================================

fn blank(command: &str, group: String) -> RunConfig {
    RunConfig {
        command: command.into(),
        group,
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

impl Command {
    fn into_config(self) -> RunConfig {
        match self {
            Command::Certify(a) => {
                let mut c = blank("certify", a.group);
                c.method = Some(a.method);
                c.n = Some(a.n);
                c.tube = Some(a.tube);
                c.window = a.window;
                c.depth = a.depth;
                c.flavor = Some(a.flavor);
                c.omega = a.omega;
                c
            }
            Command::Convert(a) => {
                let mut c = blank("convert", a.group);
                c.method = Some(a.method);
                c.n = Some(a.n);
                c.chain = Some(a.chain);
                c.window = a.window;
                c.omega = a.omega;
                c
            }
            Command::Factorize(a) => {
                let mut c = blank("factorize", a.group);
                c.method = a.method;
                c.input = a.input;
                c.tube = a.tube;
                c.window_in = a.window_in;
                c.window = a.window;
                c.psd_tol = a.psd_tol;
                c.norm_tol = a.norm_tol;
                c.seed = a.seed;
                c
            }
            Command::Embed(a) => {
                let mut c = blank("embed", a.group);
                c.levels = Some(a.levels);
                c.window = Some(a.window);
                c.omega = a.omega;
                c
            }
            Command::Psd(a) => {
                let mut c = blank("psd", a.group);
                c.method = a.method;
                c.input = a.input;
                c.n = a.n;
                c.tube = a.tube;
                c.window = Some(a.window);
                c.psd_tol = a.psd_tol;
                c.norm_tol = a.norm_tol;
                c.seed = a.seed;
                c.omega = a.omega;
                c
            }
        }
    }
}

// ===========================================================================
// Entry point
// ===========================================================================

fn main() -> ExitCode {
    ExitCode::from(u8::try_from(real_main()).unwrap_or(70))
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            return 64;
        }
    };

    // Worker cap: sweeps are sequential and the linear algebra is
    // pinned to one thread for reproducibility, so any valid value
    // caps an already-single worker; invalid values are usage errors.
    if let Some(raw) = std::env::var_os("COARSECERT_THREADS") {
        let valid = raw
            .to_str()
            .and_then(|s| s.trim().parse::<u64>().ok())
            .is_some_and(|t| t >= 1);
        if !valid {
            eprintln!("COARSECERT_THREADS must be a positive integer, got {raw:?}");
            return 64;
        }
    }

    if cli.list_methods {
        print!("{}", commands::method_listing());
        return 0;
    }

    let config = match (cli.config, cli.command) {
        (Some(_), Some(_)) => {
            eprintln!("give either --config or a subcommand, not both");
            return 64;
        }
        (None, None) => {
            eprintln!("nothing to do: give a subcommand, --config, or --list-methods");
            eprintln!("(see --help; the supported chain for convert is {SUPPORTED_CHAIN})");
            return 64;
        }
        (Some(path), None) => {
            let text = match std::fs::read_to_string(&path) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("config {}: {e}", path.display());
                    return 64;
                }
            };
            match serde_json::from_str::<RunConfig>(&text) {
                Ok(config) => config,
                Err(e) => {
                    eprintln!("config {}: {e}", path.display());
                    return 64;
                }
            }
        }
        (None, Some(command)) => command.into_config(),
    };

    if let Err(e) = config.validate() {
        eprintln!("invalid configuration: {e}");
        return 64;
    }

    let dir = cli.out.join(config.dir_name());
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("creating {}: {e}", dir.display());
        return 74;
    }
    let mut config_json = config.canonical_json();
    config_json.push('\n');
    if let Err(e) = std::fs::write(dir.join("config.json"), config_json) {
        eprintln!("writing config.json: {e}");
        return 74;
    }

    match commands::run(&config, &dir) {
        Ok(outcome) => {
            println!("{}: {}", config.command, outcome.headline);
            println!("reports: {}", dir.display());
            outcome.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
