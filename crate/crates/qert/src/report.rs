//! End-to-end analysis orchestration with a JSON-serializable report.
//!
//! This layer glues source text, input-state selection, the static
//! analysis, and the optional cross-checking oracles into one
//! [`AnalysisReport`]. Both the command-line front end and the C ABI go
//! through here so they cannot drift apart.

use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analyzer::{ert_observable_with, termination_projector_with, Observable};
use crate::error::{Error, Result};
use crate::linalg::{c64, CVector, MatrixJson};
use crate::oracles::{ert_truncated, monte_carlo_ert, TrajectoryStats, UnfoldingSeries};
use crate::parser::parse;
use crate::semantics::DensityMatrix;
use crate::tol;

// ===================================================================
// Input-state specification
// ===================================================================

/// Where the input density matrix comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum RhoSpec {
    /// A ket string: `|k>`, `|+>`, `|->`, or `L,k` / `R,k` (coin ⊗ position).
    Pure(String),
    /// An explicit density matrix.
    Matrix(MatrixJson),
    /// `I/d`.
    MaximallyMixed,
}

/// Parses the bounded ket syntax into a normalized state vector.
///
/// Accepted forms: `|k>` with a basis index `k < dim`; `|+>` / `|->`
/// (qubits only); `L,k` / `R,k` addressing a coin ⊗ position space of
/// total dimension `dim = 2n` with position `k < n`.
pub fn parse_ket(text: &str, dim: usize) -> Result<CVector> {
    let text = text.trim();
    let bad = |msg: String| Error::InvalidState { reason: msg };

    if let Some(rest) = text.strip_prefix('|') {
        let Some(inner) = rest.strip_suffix('>') else {
            return Err(bad(format!("ket `{text}` is missing the closing `>`")));
        };
        match inner {
            "+" | "-" if dim == 2 => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let second = if inner == "+" { s } else { -s };
                return Ok(CVector::from_row_slice(&[c64(s, 0.0), c64(second, 0.0)]));
            }
            "+" | "-" => {
                return Err(bad(format!(
                    "ket `|{inner}>` needs a 2-dimensional space, this one has {dim}"
                )));
            }
            _ => {}
        }
        let k: usize = inner
            .parse()
            .map_err(|_| bad(format!("ket `{text}`: `{inner}` is not a basis index")))?;
        if k >= dim {
            return Err(bad(format!("basis index {k} out of range (dimension {dim})")));
        }
        let mut v = CVector::zeros(dim);
        v[k] = num_complex::Complex64::ONE;
        return Ok(v);
    }

    if let Some((side, pos)) = text.split_once(',') {
        let side = side.trim();
        let pos = pos.trim();
        if side == "L" || side == "R" {
            if dim % 2 != 0 {
                return Err(bad(format!(
                    "state `{text}` needs a coin ⊗ position space of even dimension, got {dim}"
                )));
            }
            let n = dim / 2;
            let k: usize = pos
                .parse()
                .map_err(|_| bad(format!("state `{text}`: `{pos}` is not a position")))?;
            if k >= n {
                return Err(bad(format!("position {k} out of range (circle size {n})")));
            }
            let mut v = CVector::zeros(dim);
            v[if side == "L" { k } else { n + k }] = num_complex::Complex64::ONE;
            return Ok(v);
        }
    }

    Err(bad(format!(
        "cannot read state `{text}`; use `|k>`, `|+>`, `|->`, `L,k`, or `R,k`"
    )))
}

/// Maps a one-string input-state description to a [`RhoSpec`]: inline JSON
/// (anything starting with `{`) is a density matrix, `maximally-mixed`
/// selects I/d, and everything else is read as a ket string.
pub fn rho_spec_from_text(text: &str) -> Result<RhoSpec> {
    let t = text.trim();
    if t == "maximally-mixed" {
        return Ok(RhoSpec::MaximallyMixed);
    }
    if t.starts_with('{') {
        let mj: MatrixJson = serde_json::from_str(t)
            .map_err(|e| Error::invalid(format!("density-matrix JSON: {e}")))?;
        return Ok(RhoSpec::Matrix(mj));
    }
    Ok(RhoSpec::Pure(t.to_string()))
}

/// Materializes the input state for a `dim`-dimensional program.
pub fn build_rho(spec: &RhoSpec, dim: usize) -> Result<DensityMatrix> {
    match spec {
        RhoSpec::Pure(ket) => DensityMatrix::pure(&parse_ket(ket, dim)?),
        RhoSpec::Matrix(mj) => {
            let m = mj.to_matrix()?;
            if m.nrows() != dim {
                return Err(Error::Dimension {
                    context: "input density matrix",
                    expected: dim,
                    found: m.nrows(),
                });
            }
            DensityMatrix::new(m)
        }
        RhoSpec::MaximallyMixed => DensityMatrix::maximally_mixed(dim),
    }
}

// ===================================================================
// Options
// ===================================================================

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub shots: u64,
    pub max_steps: u64,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { shots: 10_000, max_steps: 1_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    /// Eigenvalue-classification margin for the loop analysis.
    pub eps_spec: f64,
    /// Run the truncated-unfolding oracle up to this many loop turns.
    pub unfolding_terms: Option<usize>,
    /// Run the trajectory-sampling oracle with these settings.
    pub monte_carlo: Option<McOptions>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            eps_spec: tol::EPS_SPEC,
            unfolding_terms: None,
            monte_carlo: None,
        }
    }
}

// ===================================================================
// Report schema
// ===================================================================

/// Termination classification of (program, input) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Terminates almost surely from every input.
    #[serde(rename = "a.s.-terminating")]
    AsTerminating,
    /// The given input diverges: expected runtime is infinite.
    #[serde(rename = "divergent-on-input")]
    DivergentOnInput,
    /// The given input terminates, but some other state diverges.
    #[serde(rename = "divergent-somewhere")]
    DivergentSomewhere,
}

impl Verdict {
    /// Process exit code: 0 when the runtime is finite, 2 when infinite.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::AsTerminating | Verdict::DivergentSomewhere => 0,
            Verdict::DivergentOnInput => 2,
        }
    }
}

/// A finite runtime, or the string `"infinity"` (JSON has no Inf literal).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ReportValue {
    Finite(f64),
    Infinite(&'static str),
}

impl ReportValue {
    pub const INFINITY: ReportValue = ReportValue::Infinite("infinity");

    pub fn finite(&self) -> Option<f64> {
        match self {
            ReportValue::Finite(v) => Some(*v),
            ReportValue::Infinite(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnfoldingJson {
    /// Partial runtimes after 0, 1, 2, … allowed loop turns.
    pub terms: Vec<f64>,
    /// Whether the last two terms agree to a relative 1e-9.
    pub converged: bool,
}

impl From<&UnfoldingSeries> for UnfoldingJson {
    fn from(s: &UnfoldingSeries) -> Self {
        UnfoldingJson { terms: s.terms.clone(), converged: s.converged }
    }
}

/// Stable CLI-facing trajectory summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    /// Mean steps over completed shots (`null` when every shot timed out).
    pub mean: f64,
    pub stderr: f64,
    pub shots: u64,
    pub timeouts: u64,
    pub seed: u64,
}

impl From<&TrajectoryStats> for McSummary {
    fn from(s: &TrajectoryStats) -> Self {
        McSummary {
            mean: s.mean_steps,
            stderr: s.stderr,
            shots: s.shots,
            timeouts: s.timeouts,
            seed: s.seed,
        }
    }
}

impl McSummary {
    /// Pretty-printed JSON rendering of the summary.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingsMs {
    pub parse: f64,
    pub analysis: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracles: Option<f64>,
}

/// Everything the analysis concluded about one (program, input) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    /// SHA-256 of the exact source text.
    pub source_sha256: String,
    pub dimension: usize,
    pub verdict: Verdict,
    /// Dimension of the subspace from which termination is almost sure.
    pub termination_dim: usize,
    /// The runtime observable: expected runtime is its quadratic form.
    pub ert_matrix: MatrixJson,
    /// Largest eigenvalue of the observable: a uniform runtime bound over
    /// all almost-surely-terminating inputs.
    pub ert_norm: f64,
    /// Expected runtime on the given input, or `"infinity"`.
    pub value: ReportValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unfolding: Option<UnfoldingJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McSummary>,
    pub timings_ms: TimingsMs,
}

impl AnalysisReport {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Hex SHA-256 of source text.
pub fn source_hash(source: &str) -> String {
    hex::encode(Sha256::digest(source.as_bytes()))
}

// ===================================================================
// Orchestration
// ===================================================================

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Parses, validates, and analyzes a program against an input state,
/// optionally running the independent oracles.
pub fn analyze_source(
    source: &str,
    rho_spec: &RhoSpec,
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let t_parse = Instant::now();
    let (program, layout) = parse(source)?;
    let parse_ms = ms_since(t_parse);
    let d = layout.total_dim();
    let rho = build_rho(rho_spec, d)?;

    let t_analysis = Instant::now();
    let info = termination_projector_with(&program, &layout, opts.eps_spec)?;
    let ert: Observable = ert_observable_with(&program, &layout, opts.eps_spec)?;
    let diverges_here = info.b.expectation(&rho)? < rho.trace() - tol::TOL_AST;
    let verdict = if diverges_here {
        Verdict::DivergentOnInput
    } else if info.as_dim == d {
        Verdict::AsTerminating
    } else {
        Verdict::DivergentSomewhere
    };
    let value = if diverges_here {
        ReportValue::INFINITY
    } else {
        ReportValue::Finite(ert.expectation(&rho)?.max(0.0))
    };
    let (_, hi) = ert.eigen_range()?;
    let analysis_ms = ms_since(t_analysis);

    let mut unfolding = None;
    let mut monte_carlo = None;
    let mut oracle_ms = None;
    if opts.unfolding_terms.is_some() || opts.monte_carlo.is_some() {
        let t_oracles = Instant::now();
        if let Some(k) = opts.unfolding_terms {
            let series = ert_truncated(&program, &layout, &rho, k)?;
            unfolding = Some(UnfoldingJson::from(&series));
        }
        if let Some(mc) = &opts.monte_carlo {
            let stats =
                monte_carlo_ert(&program, &layout, &rho, mc.shots, mc.max_steps, mc.seed)?;
            monte_carlo = Some(McSummary::from(&stats));
        }
        oracle_ms = Some(ms_since(t_oracles));
    }

    Ok(AnalysisReport {
        source_sha256: source_hash(source),
        dimension: d,
        verdict,
        termination_dim: info.as_dim,
        ert_matrix: MatrixJson::from_matrix(ert.matrix()),
        ert_norm: hi.max(0.0),
        value,
        unfolding,
        monte_carlo,
        timings_ms: TimingsMs { parse: parse_ms, analysis: analysis_ms, oracles: oracle_ms },
    })
}

/// Parses and runs only the trajectory oracle (no static analysis).
pub fn simulate_source(source: &str, rho_spec: &RhoSpec, mc: &McOptions) -> Result<McSummary> {
    let (program, layout) = parse(source)?;
    let rho = build_rho(rho_spec, layout.total_dim())?;
    let stats = monte_carlo_ert(&program, &layout, &rho, mc.shots, mc.max_steps, mc.seed)?;
    Ok(McSummary::from(&stats))
}

// ===================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::pretty_print;
    use crate::program::Layout;
    use crate::walks::build_geo;

    fn geo_source() -> String {
        let p = build_geo();
        pretty_print(&p, &Layout::of(&p))
    }

    #[test]
    fn ket_parsing_covers_the_surface_syntax() {
        let v = parse_ket("|1>", 2).unwrap();
        assert_eq!(v[1], num_complex::Complex64::ONE);
        let v = parse_ket("|+>", 2).unwrap();
        assert!((v[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((v[1].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let v = parse_ket("|->", 2).unwrap();
        assert!(v[1].re < 0.0);
        let v = parse_ket("L,1", 10).unwrap();
        assert_eq!(v[1], num_complex::Complex64::ONE);
        let v = parse_ket("R,3", 10).unwrap();
        assert_eq!(v[8], num_complex::Complex64::ONE);
        assert_eq!(v.iter().filter(|z| z.norm() > 0.0).count(), 1);

        assert!(parse_ket("|5>", 4).is_err());
        assert!(parse_ket("|+>", 4).is_err());
        assert!(parse_ket("L,5", 10).is_err());
        assert!(parse_ket("L,1", 5).is_err());
        assert!(parse_ket("garbage", 2).is_err());
        assert!(parse_ket("|1", 2).is_err());
    }

    #[test]
    fn geo_report_from_excited_state() {
        let report = analyze_source(
            &geo_source(),
            &RhoSpec::Pure("|1>".into()),
            &AnalysisOptions::default(),
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::AsTerminating);
        assert_eq!(report.exit_code(), 0);
        assert_eq!(report.dimension, 2);
        assert_eq!(report.termination_dim, 2);
        let v = report.value.finite().unwrap();
        assert!((v - 5.0).abs() < 1e-9);
        assert!((report.ert_norm - 5.0).abs() < 1e-9);
        assert!(report.unfolding.is_none());
        assert!(report.monte_carlo.is_none());
        assert_eq!(report.source_sha256.len(), 64);

        // identical input ⇒ identical hash; different input ⇒ different
        let again = analyze_source(
            &geo_source(),
            &RhoSpec::Pure("|1>".into()),
            &AnalysisOptions::default(),
        )
        .unwrap();
        assert_eq!(report.source_sha256, again.source_sha256);
        assert_ne!(report.source_sha256, source_hash("something else"));
    }

    #[test]
    fn report_value_serializes_number_or_sentinel() {
        let fin = serde_json::to_value(ReportValue::Finite(5.0)).unwrap();
        assert_eq!(fin, serde_json::json!(5.0));
        let inf = serde_json::to_value(ReportValue::INFINITY).unwrap();
        assert_eq!(inf, serde_json::json!("infinity"));
    }

    #[test]
    fn divergent_skip_loop_report() {
        let src = "var q : 2;\nprog {\n  while std[q] == 1 do\n    skip\n  od\n}\n";
        let report = analyze_source(
            src,
            &RhoSpec::Pure("|1>".into()),
            &AnalysisOptions::default(),
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::DivergentOnInput);
        assert_eq!(report.exit_code(), 2);
        assert_eq!(report.value, ReportValue::INFINITY);
        assert_eq!(report.termination_dim, 1);

        // ground state terminates immediately, but the other axis diverges
        let report0 = analyze_source(
            src,
            &RhoSpec::Pure("|0>".into()),
            &AnalysisOptions::default(),
        )
        .unwrap();
        assert_eq!(report0.verdict, Verdict::DivergentSomewhere);
        assert_eq!(report0.exit_code(), 0);
        assert_eq!(report0.value.finite(), Some(1.0));
    }

    #[test]
    fn oracles_attach_when_requested() {
        let opts = AnalysisOptions {
            unfolding_terms: Some(40),
            monte_carlo: Some(McOptions { shots: 2000, max_steps: 10_000, seed: 7 }),
            ..AnalysisOptions::default()
        };
        let report =
            analyze_source(&geo_source(), &RhoSpec::Pure("|1>".into()), &opts).unwrap();
        let unf = report.unfolding.as_ref().unwrap();
        assert_eq!(unf.terms.len(), 41);
        assert!(unf.converged);
        assert!((unf.terms.last().unwrap() - 5.0).abs() < 1e-6);
        let mc = report.monte_carlo.as_ref().unwrap();
        assert_eq!(mc.shots, 2000);
        assert_eq!(mc.timeouts, 0);
        assert!((mc.mean - 5.0).abs() < 5.0 * mc.stderr.max(1e-3));
        assert!(report.timings_ms.oracles.is_some());

        // same options ⇒ byte-identical JSON apart from timings
        let again =
            analyze_source(&geo_source(), &RhoSpec::Pure("|1>".into()), &opts).unwrap();
        assert_eq!(report.monte_carlo, again.monte_carlo);
        assert_eq!(report.unfolding, again.unfolding);
    }

    #[test]
    fn mixed_and_matrix_inputs_agree() {
        let src = geo_source();
        let mixed = analyze_source(&src, &RhoSpec::MaximallyMixed, &AnalysisOptions::default())
            .unwrap();
        // ERT(I/2) = (1 + 5)/2 = 3
        assert!((mixed.value.finite().unwrap() - 3.0).abs() < 1e-9);

        let mut m = crate::linalg::CMatrix::zeros(2, 2);
        m[(0, 0)] = c64(0.5, 0.0);
        m[(1, 1)] = c64(0.5, 0.0);
        let explicit = analyze_source(
            &src,
            &RhoSpec::Matrix(MatrixJson::from_matrix(&m)),
            &AnalysisOptions::default(),
        )
        .unwrap();
        assert_eq!(explicit.value, mixed.value);

        let wrong_dim = crate::linalg::CMatrix::identity(3, 3);
        assert!(analyze_source(
            &src,
            &RhoSpec::Matrix(MatrixJson::from_matrix(&wrong_dim)),
            &AnalysisOptions::default(),
        )
        .is_err());
    }

    #[test]
    fn simulate_source_matches_direct_oracle_call() {
        let mc = McOptions { shots: 500, max_steps: 10_000, seed: 11 };
        let a = simulate_source(&geo_source(), &RhoSpec::Pure("|1>".into()), &mc).unwrap();
        let b = simulate_source(&geo_source(), &RhoSpec::Pure("|1>".into()), &mc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shots, 500);
        assert_eq!(a.seed, 11);
        let text = serde_json::to_string(&a).unwrap();
        let posn = |k: &str| text.find(&format!("\"{k}\"")).expect(k);
        assert!(posn("mean") < posn("stderr"));
        assert!(posn("stderr") < posn("shots"));
        assert!(posn("shots") < posn("timeouts"));
        assert!(posn("timeouts") < posn("seed"));
    }

    #[test]
    fn timed_out_mean_serializes_as_null() {
        let src = "var q : 2;\nprog {\n  while std[q] == 1 do\n    skip\n  od\n}\n";
        let mc = McOptions { shots: 20, max_steps: 50, seed: 1 };
        let s = simulate_source(src, &RhoSpec::Pure("|1>".into()), &mc).unwrap();
        assert_eq!(s.timeouts, 20);
        let js = serde_json::to_value(&s).unwrap();
        assert!(js["mean"].is_null());
    }

    #[test]
    fn parse_errors_surface() {
        let err = analyze_source(
            "var q : 2;\nprog { while std[q] == 0 do skip od }",
            &RhoSpec::MaximallyMixed,
            &AnalysisOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn rho_spec_text_forms() {
        assert!(matches!(
            rho_spec_from_text("maximally-mixed"),
            Ok(RhoSpec::MaximallyMixed)
        ));
        assert!(matches!(
            rho_spec_from_text(" |1> "),
            Ok(RhoSpec::Pure(k)) if k == "|1>"
        ));
        let json = r#"{"rows":2,"cols":2,"data":[[1,0],[0,0],[0,0],[0,0]]}"#;
        match rho_spec_from_text(json) {
            Ok(RhoSpec::Matrix(m)) => {
                assert_eq!(m.rows, 2);
                assert_eq!(m.cols, 2);
            }
            other => panic!("expected matrix spec, got {other:?}"),
        }
        assert!(rho_spec_from_text("{not json").is_err());
    }
}
