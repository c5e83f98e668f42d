//! Command-line front end: analyze, simulate, walk, corpus.
//!
//! All results go to stdout as JSON; diagnostics go to stderr. Exit codes:
//! 0 for a finite expected runtime, 2 when the analyzed input diverges,
//! 1 for any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qert::linalg::MatrixJson;
use qert::parser::pretty_print;
use qert::program::Layout;
use qert::report::{
    analyze_source, parse_ket, simulate_source, AnalysisOptions, McOptions, RhoSpec,
};
use qert::walks::{
    build_geo, build_qbf, build_walk, closed_form_q, numeric_q, verify_fixed_point, CoinSpec,
    QnMatrix, WalkSpec,
};
use qert::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qert",
    version,
    about = "Expected-runtime analysis for measurement-guarded quantum programs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Input-state selection: exactly one source.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct RhoArgs {
    /// Pure input state: `|k>`, `|+>`, `|->`, `L,k`, or `R,k`
    #[arg(long, value_name = "KET")]
    pure: Option<String>,

    /// JSON file holding a density matrix ({rows, cols, data: [[re,im],..]})
    #[arg(long, value_name = "FILE")]
    rho: Option<PathBuf>,

    /// Use the maximally mixed state I/d
    #[arg(long)]
    maximally_mixed: bool,
}

impl RhoArgs {
    fn to_spec(&self) -> Result<RhoSpec> {
        if let Some(ket) = &self.pure {
            return Ok(RhoSpec::Pure(ket.clone()));
        }
        if let Some(path) = &self.rho {
            let text = read_file(path)?;
            let mj: MatrixJson = serde_json::from_str(&text)
                .map_err(|e| Error::invalid(format!("{}: not a matrix JSON: {e}", path.display())))?;
            return Ok(RhoSpec::Matrix(mj));
        }
        Ok(RhoSpec::MaximallyMixed)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Static analysis: verdict, runtime observable, expected runtime
    Analyze {
        /// Program file
        file: PathBuf,
        #[command(flatten)]
        rho: RhoArgs,
        /// Also run the truncated loop-unfolding oracle for this many turns
        #[arg(long, value_name = "TERMS")]
        with_unfolding: Option<usize>,
        /// Also run the trajectory-sampling oracle with this many shots
        #[arg(long, value_name = "SHOTS")]
        with_monte_carlo: Option<u64>,
        /// Step cap per sampled trajectory
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
        /// Seed for the sampling oracle
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Trajectory sampling only: mean steps over many measured runs
    Simulate {
        /// Program file
        file: PathBuf,
        #[command(flatten)]
        rho: RhoArgs,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        /// Step cap per trajectory; exceeding it counts as a timeout
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Guard-count matrix of the cyclic walk, closed form and/or solver
    Walk {
        /// Circle size (positions 0..n−1; absorbing at 0)
        #[arg(long)]
        n: usize,
        /// Real coin amplitudes "a,b" with a²+b²=1 (default: balanced)
        #[arg(long, value_parser = parse_coin_pair, default_value = "0.7071067811865476,0.7071067811865476")]
        coin: (f64, f64),
        #[arg(long, value_enum, default_value_t = WalkMode::Both)]
        mode: WalkMode,
        /// Also evaluate the expected guard count from this starting state
        #[arg(long, value_name = "KET")]
        state: Option<String>,
    },
    /// Write the benchmark programs and their expected-results manifest
    Corpus {
        /// Output directory (created if missing)
        #[arg(long, value_name = "DIR")]
        emit: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WalkMode {
    Closed,
    Numeric,
    Both,
}

fn parse_coin_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated amplitudes, got `{s}`"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{t}` is not a number"))
    };
    Ok((parse(a)?, parse(b)?))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

/// Eigenvalue-classification margin, overridable via `QERT_EPS_SPEC`.
fn eps_spec_from_env() -> Result<f64> {
    match std::env::var("QERT_EPS_SPEC") {
        Ok(text) => {
            let v: f64 = text
                .parse()
                .map_err(|_| Error::invalid(format!("QERT_EPS_SPEC=`{text}` is not a number")))?;
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!(
                    "QERT_EPS_SPEC must lie strictly between 0 and 1, got {v}"
                )));
            }
            Ok(v)
        }
        Err(std::env::VarError::NotPresent) => Ok(qert::tol::EPS_SPEC),
        Err(e) => Err(Error::invalid(format!("QERT_EPS_SPEC: {e}"))),
    }
}

// ===================================================================
// walk subcommand
// ===================================================================

#[derive(Serialize)]
struct WalkReport {
    n: usize,
    /// Coin amplitudes as [re, im] pairs.
    coin: [[f64; 2]; 2],
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_q: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    numeric_q: Option<MatrixJson>,
    /// ‖closed − numeric‖_F, present in mode=both.
    #[serde(skip_serializing_if = "Option::is_none")]
    frobenius_discrepancy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_fixed_point_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    numeric_fixed_point_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<String>,
    /// ⟨ψ|Q|ψ⟩ for the requested state.
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_steps: Option<f64>,
}

fn run_walk(n: usize, coin: (f64, f64), mode: WalkMode, state: Option<String>) -> Result<String> {
    // Accept decimal-truncated amplitudes (e.g. 0.70710678): renormalize
    // when the deficit looks like rounding, reject anything worse.
    let norm2 = coin.0 * coin.0 + coin.1 * coin.1;
    if (norm2 - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "coin not normalized: a^2 + b^2 = {norm2} (must be 1 within 1e-6)"
        )));
    }
    let scale = norm2.sqrt();
    if (norm2 - 1.0).abs() > CoinSpec::TOL_NORM {
        eprintln!("note: coin renormalized by 1/{scale}");
    }
    let coin = CoinSpec::real(coin.0 / scale, coin.1 / scale)?;
    let spec = WalkSpec::new(n, coin.clone())?;
    let (mut closed, mut numeric) = (None, None);
    if mode != WalkMode::Numeric {
        closed = Some(closed_form_q(n, &coin)?);
    }
    if mode != WalkMode::Closed {
        numeric = Some(numeric_q(n, &coin)?);
    }
    let discrepancy = match (&closed, &numeric) {
        (Some(c), Some(s)) => Some((c.matrix() - s.matrix()).norm()),
        _ => None,
    };
    let residual_of = |q: &Option<QnMatrix>| -> Result<Option<f64>> {
        q.as_ref()
            .map(|q| verify_fixed_point(q, &spec))
            .transpose()
    };
    let closed_res = residual_of(&closed)?;
    let numeric_res = residual_of(&numeric)?;

    let (state_name, steps) = match state {
        Some(text) => {
            let psi = parse_ket(&text, 2 * n)?;
            let q = closed
                .as_ref()
                .or(numeric.as_ref())
                .expect("at least one mode is always computed");
            let val = (psi.adjoint() * q.matrix() * &psi)[(0, 0)].re;
            (Some(text), Some(val))
        }
        None => (None, None),
    };

    let report = WalkReport {
        n,
        coin: [[coin.a().re, coin.a().im], [coin.b().re, coin.b().im]],
        mode: match mode {
            WalkMode::Closed => "closed",
            WalkMode::Numeric => "numeric",
            WalkMode::Both => "both",
        },
        closed_q: closed.map(|q| MatrixJson::from_matrix(q.matrix())),
        numeric_q: numeric.map(|q| MatrixJson::from_matrix(q.matrix())),
        frobenius_discrepancy: discrepancy,
        closed_fixed_point_residual: closed_res,
        numeric_fixed_point_residual: numeric_res,
        state: state_name,
        expected_steps: steps,
    };
    Ok(serde_json::to_string_pretty(&report).expect("walk report serialization cannot fail"))
}

// ===================================================================
// corpus subcommand
// ===================================================================

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    /// Input-state argument understood by `analyze`/`simulate`.
    input: String,
    /// Which quantity the expectation refers to: full runtime, or the
    /// walk's guard-measurement count.
    metric: &'static str,
    expected: f64,
}

#[derive(Serialize)]
struct Manifest {
    programs: Vec<ManifestEntry>,
}

fn run_corpus(dir: &Path) -> Result<String> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::invalid(format!("{}: {e}", dir.display())))?;
    let mut entries = Vec::new();
    let mut emitted = Vec::new();
    let mut write = |name: String, text: String| -> Result<()> {
        let path = dir.join(&name);
        std::fs::write(&path, text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        emitted.push(path.display().to_string());
        Ok(())
    };
    let print = |p: &qert::program::Program| pretty_print(p, &Layout::of(p));

    write("geo.qw".into(), print(&build_geo()))?;
    entries.push(ManifestEntry {
        file: "geo.qw".into(),
        input: "|1>".into(),
        metric: "ert",
        expected: 5.0,
    });

    for i in 1..=9u32 {
        let p = f64::from(i) / 10.0;
        let name = format!("qbf_p0.{i}.qw");
        write(name.clone(), print(&build_qbf(p)?))?;
        entries.push(ManifestEntry {
            file: name,
            input: "maximally-mixed".into(),
            metric: "ert",
            expected: 17.0,
        });
    }

    for n in [3usize, 5, 10] {
        let spec = WalkSpec::new(n, CoinSpec::hadamard())?;
        let name = format!("walk_n{n}.qw");
        write(name.clone(), print(&build_walk(&spec)))?;
        entries.push(ManifestEntry {
            file: name,
            input: "L,1".into(),
            metric: "guard-count",
            expected: n as f64,
        });
    }

    let manifest = Manifest { programs: entries };
    let manifest_text = serde_json::to_string_pretty(&manifest)
        .expect("manifest serialization cannot fail");
    write("manifest.json".into(), manifest_text)?;

    #[derive(Serialize)]
    struct Emitted {
        emitted: Vec<String>,
    }
    Ok(serde_json::to_string_pretty(&Emitted { emitted }).expect("listing cannot fail"))
}

// ===================================================================

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Analyze {
            file,
            rho,
            with_unfolding,
            with_monte_carlo,
            max_steps,
            seed,
        } => {
            let source = read_file(&file)?;
            let opts = AnalysisOptions {
                eps_spec: eps_spec_from_env()?,
                unfolding_terms: with_unfolding,
                monte_carlo: with_monte_carlo.map(|shots| McOptions { shots, max_steps, seed }),
            };
            let report = analyze_source(&source, &rho.to_spec()?, &opts)?;
            println!("{}", report.to_json());
            Ok(report.exit_code())
        }
        Cmd::Simulate { file, rho, shots, max_steps, seed } => {
            let source = read_file(&file)?;
            let summary =
                simulate_source(&source, &rho.to_spec()?, &McOptions { shots, max_steps, seed })?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail")
            );
            Ok(0)
        }
        Cmd::Walk { n, coin, mode, state } => {
            println!("{}", run_walk(n, coin, mode, state)?);
            Ok(0)
        }
        Cmd::Corpus { emit } => {
            println!("{}", run_corpus(&emit)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(u8::try_from(code).unwrap_or(1)),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
