//! Independent ground truth for the analyzer: truncated unfolding of the
//! runtime definition, Monte-Carlo simulation of the small-step operational
//! semantics, and exhaustive path enumeration.
//!
//! None of these routes touch the transfer-matrix machinery (vectorization,
//! spectral splitting, Neumann inversion); they work directly with Kraus
//! operators and state vectors, so agreement with the analyzer is a real
//! cross-check, not a tautology.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::program::{Layout, Program, Stmt};
use crate::semantics::{guard_ops, init_kraus, unitary_kraus, DensityMatrix};

// ----- Truncated unfolding -----

/// Partial expected runtimes with every loop unrolled `k` times, `k = 0..K`.
#[derive(Debug, Clone)]
pub struct UnfoldingSeries {
    /// `terms[k]` = expected runtime of the `k`-fold unrolling
    /// (nondecreasing in `k`; converges to the true value from below).
    pub terms: Vec<f64>,
    /// Last two terms agree within `1e-9·max(1, |last|)`.
    pub converged: bool,
}

/// Evaluates the runtime definition directly, with loops cut off after `k`
/// turns (the leftover mass aborts: it contributes no further cost and no
/// output state), for every cutoff up to `k_max`.
pub fn ert_truncated(
    program: &Program,
    layout: &Layout,
    rho: &DensityMatrix,
    k_max: usize,
) -> Result<UnfoldingSeries> {
    if rho.dim() != layout.total_dim() {
        return Err(Error::Dimension {
            context: "ert_truncated",
            expected: layout.total_dim(),
            found: rho.dim(),
        });
    }
    let mut terms = Vec::with_capacity(k_max + 1);
    for n in 0..=k_max {
        let (cost, _) = cutoff_run(program, layout, &program.body, rho.matrix().clone(), n)?;
        terms.push(cost);
    }
    let converged = match terms.as_slice() {
        [.., a, b] => (b - a).abs() < 1e-9 * b.abs().max(1.0),
        _ => false,
    };
    Ok(UnfoldingSeries { terms, converged })
}

/// Expected cost and output partial density of `stmt` on `rho`, all loops
/// unrolled at most `n` times.
fn cutoff_run(
    program: &Program,
    layout: &Layout,
    stmt: &Stmt,
    rho: CMatrix,
    n: usize,
) -> Result<(f64, CMatrix)> {
    match stmt {
        Stmt::Skip => Ok((0.0, rho)),
        Stmt::Init { var } => {
            let k = init_kraus(layout, *var)?;
            Ok((rho.trace().re, k.apply(&rho)?))
        }
        Stmt::Unitary { gate, targets } => {
            let k = unitary_kraus(program, layout, *gate, targets)?;
            Ok((rho.trace().re, k.apply(&rho)?))
        }
        Stmt::Seq(a, b) => {
            let (c1, mid) = cutoff_run(program, layout, a, rho, n)?;
            let (c2, out) = cutoff_run(program, layout, b, mid, n)?;
            Ok((c1 + c2, out))
        }
        Stmt::Case { meas, targets, branches } => {
            let guards = guard_ops(&program.measurements[*meas], targets, layout)?;
            let mut cost = rho.trace().re;
            let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
            for (label, branch) in branches {
                let e = guards
                    .outcome(*label)
                    .ok_or_else(|| Error::invalid(format!("no outcome {label} in guard")))?;
                let selected = e.kraus.apply(&rho)?;
                let (c, r) = cutoff_run(program, layout, branch, selected, n)?;
                cost += c;
                out += r;
            }
            Ok((cost, out))
        }
        Stmt::While { meas, targets, body } => {
            let guards = guard_ops(&program.measurements[*meas], targets, layout)?;
            let e0 = guards.e0()?;
            let e1 = guards.e1()?;
            let mut cost = 0.0;
            let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
            let mut live = rho;
            for _ in 0..n {
                cost += live.trace().re; // the guard measurement
                out += e0.kraus.apply(&live)?;
                let inside = e1.kraus.apply(&live)?;
                let (c, after) = cutoff_run(program, layout, body, inside, n)?;
                cost += c;
                live = after;
            }
            // Remaining mass aborts: zero further cost, no output.
            Ok((cost, out))
        }
    }
}

// ----- Operational simulation -----

/// Result of one sampled run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Steps(u64),
    Timeout,
}

/// Program lowered to embedded operators for fast repeated execution.
enum Compiled {
    Skip,
    /// Initialization: Kraus branches sampled like a measurement that
    /// discards its outcome.
    Channel(Vec<CMatrix>),
    Unitary(CMatrix),
    Seq(Box<Compiled>, Box<Compiled>),
    Case(Vec<(CMatrix, Compiled)>),
    While {
        m0: CMatrix,
        m1: CMatrix,
        body: Box<Compiled>,
    },
}

fn compile(program: &Program, layout: &Layout, stmt: &Stmt) -> Result<Compiled> {
    Ok(match stmt {
        Stmt::Skip => Compiled::Skip,
        Stmt::Init { var } => {
            Compiled::Channel(init_kraus(layout, *var)?.operators().to_vec())
        }
        Stmt::Unitary { gate, targets } => {
            let k = unitary_kraus(program, layout, *gate, targets)?;
            Compiled::Unitary(k.operators()[0].clone())
        }
        Stmt::Seq(a, b) => Compiled::Seq(
            Box::new(compile(program, layout, a)?),
            Box::new(compile(program, layout, b)?),
        ),
        Stmt::Case { meas, targets, branches } => {
            let guards = guard_ops(&program.measurements[*meas], targets, layout)?;
            let mut arms = Vec::with_capacity(branches.len());
            for (label, branch) in branches {
                let e = guards
                    .outcome(*label)
                    .ok_or_else(|| Error::invalid(format!("no outcome {label} in guard")))?;
                arms.push((e.kraus.operators()[0].clone(), compile(program, layout, branch)?));
            }
            Compiled::Case(arms)
        }
        Stmt::While { meas, targets, body } => {
            let guards = guard_ops(&program.measurements[*meas], targets, layout)?;
            Compiled::While {
                m0: guards.e0()?.kraus.operators()[0].clone(),
                m1: guards.e1()?.kraus.operators()[0].clone(),
                body: Box::new(compile(program, layout, body)?),
            }
        }
    })
}

/// Samples an index with probability `weights[i]/Σ weights`.
fn sample_index(rng: &mut impl Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

fn simulate_compiled(
    compiled: &Compiled,
    psi: &CVector,
    rng: &mut impl Rng,
    max_steps: u64,
) -> RunOutcome {
    let mut psi = psi.clone();
    let mut steps = 0u64;
    let mut stack: Vec<&Compiled> = vec![compiled];
    macro_rules! tick {
        () => {
            steps += 1;
            if steps > max_steps {
                return RunOutcome::Timeout;
            }
        };
    }
    while let Some(top) = stack.pop() {
        match top {
            Compiled::Skip => {}
            Compiled::Channel(ops) => {
                tick!();
                let weights: Vec<f64> = ops.iter().map(|m| (m * &psi).norm_squared()).collect();
                let i = sample_index(rng, &weights);
                let collapsed = &ops[i] * &psi;
                psi = collapsed.unscale(collapsed.norm());
            }
            Compiled::Unitary(u) => {
                tick!();
                psi = u * &psi;
            }
            Compiled::Seq(a, b) => {
                stack.push(b);
                stack.push(a);
            }
            Compiled::Case(arms) => {
                tick!();
                let weights: Vec<f64> =
                    arms.iter().map(|(m, _)| (m * &psi).norm_squared()).collect();
                let i = sample_index(rng, &weights);
                let collapsed = &arms[i].0 * &psi;
                psi = collapsed.unscale(collapsed.norm());
                stack.push(&arms[i].1);
            }
            w @ Compiled::While { m0, m1, body } => {
                tick!();
                let w0 = (m0 * &psi).norm_squared();
                let w1 = (m1 * &psi).norm_squared();
                if sample_index(rng, &[w0, w1]) == 0 {
                    let collapsed = m0 * &psi;
                    psi = collapsed.unscale(collapsed.norm());
                } else {
                    let collapsed = m1 * &psi;
                    psi = collapsed.unscale(collapsed.norm());
                    stack.push(w);
                    stack.push(body);
                }
            }
        }
    }
    RunOutcome::Steps(steps)
}

/// Runs the small-step operational semantics once from a pure state,
/// sampling measurement outcomes with Born probabilities.
pub fn simulate_run(
    program: &Program,
    layout: &Layout,
    psi: &CVector,
    rng_seed: u64,
    max_steps: u64,
) -> Result<RunOutcome> {
    if (psi.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState {
            reason: format!("simulation needs a unit vector, got norm {:.12}", psi.norm()),
        });
    }
    if psi.len() != layout.total_dim() {
        return Err(Error::Dimension {
            context: "simulate_run",
            expected: layout.total_dim(),
            found: psi.len(),
        });
    }
    let compiled = compile(program, layout, &program.body)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(simulate_compiled(&compiled, psi, &mut rng, max_steps))
}

// ----- Monte-Carlo aggregation -----

/// Sample statistics of many simulated runs.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrajectoryStats {
    pub shots: u64,
    /// Mean steps over completed runs (NaN when every run timed out).
    pub mean_steps: f64,
    /// Sample standard deviation of completed runs divided by √completed.
    pub stderr: f64,
    pub timeouts: u64,
    pub max_steps: u64,
    pub seed: u64,
}

/// Estimates the expected runtime by sampling.
///
/// The state is eigendecomposed and each shot first draws an eigenvector
/// with probability eigenvalue/tr(ρ), then runs the operational semantics.
/// Shot `i` uses stream `i` of a counter-based generator seeded with
/// `seed`, so results are identical for a given (seed, shots) regardless of
/// thread schedule.
pub fn monte_carlo_ert(
    program: &Program,
    layout: &Layout,
    rho: &DensityMatrix,
    shots: u64,
    max_steps: u64,
    seed: u64,
) -> Result<TrajectoryStats> {
    if shots == 0 {
        return Err(Error::invalid("monte_carlo_ert: shots must be ≥ 1"));
    }
    if rho.dim() != layout.total_dim() {
        return Err(Error::Dimension {
            context: "monte_carlo_ert",
            expected: layout.total_dim(),
            found: rho.dim(),
        });
    }
    let compiled = compile(program, layout, &program.body)?;
    let ensemble = rho.eigen_ensemble()?;
    if ensemble.is_empty() {
        return Err(Error::InvalidDensity {
            reason: "state has no mass to sample".into(),
        });
    }
    let weights: Vec<f64> = ensemble.iter().map(|(w, _)| *w).collect();

    let outcomes: Vec<RunOutcome> = (0..shots)
        .into_par_iter()
        .map(|shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shot);
            let i = sample_index(&mut rng, &weights);
            simulate_compiled(&compiled, &ensemble[i].1, &mut rng, max_steps)
        })
        .collect();

    let completed: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| match o {
            RunOutcome::Steps(s) => Some(*s as f64),
            RunOutcome::Timeout => None,
        })
        .collect();
    let timeouts = shots - completed.len() as u64;
    let (mean_steps, stderr) = if completed.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let n = completed.len() as f64;
        let mean = completed.iter().sum::<f64>() / n;
        let var = if completed.len() > 1 {
            completed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, (var / n).sqrt())
    };
    Ok(TrajectoryStats {
        shots,
        mean_steps,
        stderr,
        timeouts,
        max_steps,
        seed,
    })
}

// ----- Exhaustive path enumeration -----

/// All transition-rule paths up to a step budget, with exact branch weights.
#[derive(Debug, Clone)]
pub struct PathEnumeration {
    /// Sum of the partial densities of all fully terminated paths.
    pub terminated: CMatrix,
    /// `Σ_paths steps·weight` over terminated paths.
    pub expected_steps: f64,
    /// Probability mass still running when the budget ran out.
    pub live_mass: f64,
}

/// Composes the transition rules over every measurement branch (breadth
/// does not explode for step budgets ≤ 6), carrying unnormalized partial
/// densities instead of sampling.
pub fn enumerate_paths(
    program: &Program,
    layout: &Layout,
    rho: &DensityMatrix,
    max_steps: u64,
) -> Result<PathEnumeration> {
    if rho.dim() != layout.total_dim() {
        return Err(Error::Dimension {
            context: "enumerate_paths",
            expected: layout.total_dim(),
            found: rho.dim(),
        });
    }
    let compiled = compile(program, layout, &program.body)?;
    let d = layout.total_dim();

    struct Config<'a> {
        stack: Vec<&'a Compiled>,
        rho: CMatrix,
        steps: u64,
    }

    let mut queue = vec![Config {
        stack: vec![&compiled],
        rho: rho.matrix().clone(),
        steps: 0,
    }];
    let mut terminated = CMatrix::zeros(d, d);
    let mut expected_steps = 0.0;
    let mut live_mass = 0.0;
    const MASS_FLOOR: f64 = 1e-15;

    while let Some(mut cfg) = queue.pop() {
        let Some(top) = cfg.stack.pop() else {
            expected_steps += cfg.steps as f64 * cfg.rho.trace().re;
            terminated += cfg.rho;
            continue;
        };
        if matches!(top, Compiled::Skip | Compiled::Seq(..)) {
            // Cost-free control steps.
            match top {
                Compiled::Skip => {}
                Compiled::Seq(a, b) => {
                    cfg.stack.push(b);
                    cfg.stack.push(a);
                }
                _ => unreachable!(),
            }
            queue.push(cfg);
            continue;
        }
        if cfg.steps + 1 > max_steps {
            live_mass += cfg.rho.trace().re;
            continue;
        }
        let steps = cfg.steps + 1;
        match top {
            Compiled::Channel(ops) => {
                let mut next = CMatrix::zeros(d, d);
                for m in ops {
                    next += m * &cfg.rho * m.adjoint();
                }
                queue.push(Config { stack: cfg.stack, rho: next, steps });
            }
            Compiled::Unitary(u) => {
                let next = u * &cfg.rho * u.adjoint();
                queue.push(Config { stack: cfg.stack, rho: next, steps });
            }
            Compiled::Case(arms) => {
                for (m, branch) in arms {
                    let selected = m * &cfg.rho * m.adjoint();
                    if selected.trace().re < MASS_FLOOR {
                        continue;
                    }
                    let mut stack = cfg.stack.clone();
                    stack.push(branch);
                    queue.push(Config { stack, rho: selected, steps });
                }
            }
            w @ Compiled::While { m0, m1, body } => {
                let exited = m0 * &cfg.rho * m0.adjoint();
                if exited.trace().re >= MASS_FLOOR {
                    queue.push(Config {
                        stack: cfg.stack.clone(),
                        rho: exited,
                        steps,
                    });
                }
                let looping = m1 * &cfg.rho * m1.adjoint();
                if looping.trace().re >= MASS_FLOOR {
                    let mut stack = cfg.stack;
                    stack.push(w);
                    stack.push(body);
                    queue.push(Config { stack, rho: looping, steps });
                }
            }
            Compiled::Skip | Compiled::Seq(..) => unreachable!(),
        }
    }
    Ok(PathEnumeration {
        terminated,
        expected_steps,
        live_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::{ert_observable, ErtValue};
    use crate::linalg::{c64, max_abs_diff};
    use crate::parser::parse;
    use crate::semantics::{apply, denote};

    const GEO: &str = "var q:2; prog { while std[q] == 1 do q := H[q] od }";
    const DIVERGENT: &str = "var q:2; prog { while std[q] == 1 do skip od }";

    #[test]
    fn unfolding_matches_geometric_series() {
        let (p, layout) = parse(GEO).unwrap();
        let rho = DensityMatrix::basis_state(2, 1).unwrap();
        let series = ert_truncated(&p, &layout, &rho, 41).unwrap();
        assert_eq!(series.terms[0], 0.0);
        assert!((series.terms[1] - 2.0).abs() < 1e-12);
        // terms[k+1] = 2 + Σ_{j=1..k} 3/2^j.
        for k in 1..=40 {
            let expected = 2.0 + (1..=k).map(|j| 3.0 / 2f64.powi(j as i32)).sum::<f64>();
            assert!(
                (series.terms[k + 1] - expected).abs() < 1e-12,
                "k={k}: {} vs {expected}",
                series.terms[k + 1]
            );
        }
        assert!(series.terms[41] >= 5.0 - 1e-6);
        for w in series.terms.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        assert!(series.converged);
    }

    #[test]
    fn unfolding_of_skip_is_zero() {
        let (p, layout) = parse("var q:2; prog { skip }").unwrap();
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let series = ert_truncated(&p, &layout, &rho, 5).unwrap();
        assert!(series.terms.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn deterministic_program_always_takes_two_steps() {
        let (p, layout) = parse("var q:2; prog { q := |0>; q := H[q] }").unwrap();
        let psi = CVector::from_iterator(2, [c64(0.0, 0.0), c64(1.0, 0.0)]);
        for seed in 0..20 {
            assert_eq!(
                simulate_run(&p, &layout, &psi, seed, 1000).unwrap(),
                RunOutcome::Steps(2)
            );
        }
    }

    #[test]
    fn skip_takes_zero_steps() {
        let (p, layout) = parse("var q:2; prog { skip }").unwrap();
        let psi = CVector::from_iterator(2, [c64(1.0, 0.0), c64(0.0, 0.0)]);
        assert_eq!(
            simulate_run(&p, &layout, &psi, 7, 1000).unwrap(),
            RunOutcome::Steps(0)
        );
    }

    #[test]
    fn simulation_rejects_unnormalized_states() {
        let (p, layout) = parse("var q:2; prog { skip }").unwrap();
        let psi = CVector::from_iterator(2, [c64(0.5, 0.0), c64(0.0, 0.0)]);
        assert!(simulate_run(&p, &layout, &psi, 0, 10).is_err());
    }

    #[test]
    fn monte_carlo_estimates_coin_loop_runtime() {
        let (p, layout) = parse(GEO).unwrap();
        let rho = DensityMatrix::basis_state(2, 1).unwrap();
        let stats = monte_carlo_ert(&p, &layout, &rho, 4000, 100_000, 11).unwrap();
        assert_eq!(stats.timeouts, 0);
        assert!(
            (stats.mean_steps - 5.0).abs() < 5.0 * stats.stderr,
            "mean {} stderr {}",
            stats.mean_steps,
            stats.stderr
        );
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let (p, layout) = parse(GEO).unwrap();
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let a = monte_carlo_ert(&p, &layout, &rho, 500, 1000, 42).unwrap();
        let b = monte_carlo_ert(&p, &layout, &rho, 500, 1000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergent_loop_times_out_every_shot() {
        let (p, layout) = parse(DIVERGENT).unwrap();
        let rho = DensityMatrix::basis_state(2, 1).unwrap();
        let stats = monte_carlo_ert(&p, &layout, &rho, 200, 500, 3).unwrap();
        assert_eq!(stats.timeouts, 200);
        assert!(stats.mean_steps.is_nan());
    }

    #[test]
    fn enumeration_equals_denotation_on_loop_free_programs() {
        let src = "var q:2; var r:2; prog { q := H[q]; if std[q] { 0 -> r := |0>, 1 -> r := H[r] } }";
        let (p, layout) = parse(src).unwrap();
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        let paths = enumerate_paths(&p, &layout, &rho, 6).unwrap();
        assert!(paths.live_mass < 1e-12);
        let denoted = apply(&denote(&p, &layout).unwrap(), &rho).unwrap();
        assert!(max_abs_diff(&paths.terminated, denoted.matrix()) < 1e-12);
        let ert = ert_observable(&p, &layout).unwrap();
        assert!((paths.expected_steps - ert.expectation(&rho).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn enumeration_tracks_partial_loop_mass() {
        let (p, layout) = parse(GEO).unwrap();
        let rho = DensityMatrix::basis_state(2, 1).unwrap();
        let paths = enumerate_paths(&p, &layout, &rho, 6).unwrap();
        // From |1⟩ the loop exits after 3 steps (mass 1/2) or 5 steps (1/4);
        // a quarter of the mass is still alive within a 6-step budget.
        assert!((paths.live_mass - 0.25).abs() < 1e-12);
        assert!((paths.expected_steps - (3.0 * 0.5 + 5.0 * 0.25)).abs() < 1e-12);
        assert!((paths.terminated.trace().re - 0.75).abs() < 1e-12);
    }

    #[test]
    fn truncated_value_is_sandwiched_by_analyzer_value() {
        let (p, layout) = parse(GEO).unwrap();
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let series = ert_truncated(&p, &layout, &rho, 60).unwrap();
        let exact = crate::analyzer::expected_runtime(&p, &layout, &rho).unwrap();
        let ErtValue::Finite(v) = exact else { panic!("expected finite") };
        let last = *series.terms.last().unwrap();
        assert!(last <= v + 1e-9);
        assert!(v - last < 1e-9);
    }
}
