//! Program AST, declarations, tensor layout, and validation.
//!
//! A program owns three declaration tables (variables, gates, measurements)
//! and a statement tree referencing them by index. The tensor [`Layout`] is
//! the declaration order of the variables; composite basis states index
//! row-major over that order (earlier variables are more significant).

use std::fmt;

use crate::linalg::{self, hermiticity_defect, max_abs, CMatrix};
use crate::tol;

pub type VarId = usize;
pub type GateId = usize;
pub type MeasId = usize;

// ----- Declarations -----

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumVariable {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryDecl {
    pub name: String,
    /// Dimensions of the target factors, in application order.
    pub dims: Vec<usize>,
    pub matrix: CMatrix,
    /// Built-ins (H, X, I) are resolved by the parser and not printed.
    pub builtin: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDecl {
    pub name: String,
    pub dims: Vec<usize>,
    /// Ordered (outcome label, Kraus operator) pairs.
    pub outcomes: Vec<(usize, CMatrix)>,
    pub builtin: bool,
}

impl MeasurementDecl {
    pub fn labels(&self) -> Vec<usize> {
        self.outcomes.iter().map(|(l, _)| *l).collect()
    }

    pub fn outcome(&self, label: usize) -> Option<&CMatrix> {
        self.outcomes
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, m)| m)
    }
}

// ----- Statements -----

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Skip,
    /// `q := |0>`: collapse the variable to its ground basis state.
    Init { var: VarId },
    /// `q̄ := U[q̄]`.
    Unitary { gate: GateId, targets: Vec<VarId> },
    Seq(Box<Stmt>, Box<Stmt>),
    /// `if M[q̄] { m -> S_m, … }`: one branch per outcome.
    Case {
        meas: MeasId,
        targets: Vec<VarId>,
        branches: Vec<(usize, Stmt)>,
    },
    /// `while M[q̄] == 1 do S od`: guard labels must be exactly {0, 1}.
    While {
        meas: MeasId,
        targets: Vec<VarId>,
        body: Box<Stmt>,
    },
}

impl Stmt {
    pub fn seq(first: Stmt, second: Stmt) -> Stmt {
        Stmt::Seq(Box::new(first), Box::new(second))
    }

    /// Right-nested sequence of several statements; `skip` for none.
    pub fn seq_all(stmts: Vec<Stmt>) -> Stmt {
        let mut iter = stmts.into_iter().rev();
        let Some(last) = iter.next() else {
            return Stmt::Skip;
        };
        iter.fold(last, |acc, s| Stmt::seq(s, acc))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub vars: Vec<QuantumVariable>,
    pub gates: Vec<UnitaryDecl>,
    pub measurements: Vec<MeasurementDecl>,
    pub body: Stmt,
}

// ----- Layout -----

/// Tensor-factor layout: the declared variables in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    dims: Vec<usize>,
    names: Vec<String>,
    total_dim: usize,
}

impl Layout {
    pub fn of(program: &Program) -> Layout {
        let dims: Vec<usize> = program.vars.iter().map(|v| v.dim).collect();
        let names = program.vars.iter().map(|v| v.name.clone()).collect();
        let total_dim = dims.iter().product();
        Layout {
            dims,
            names,
            total_dim,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Product of all factor dimensions (1 for the empty layout).
    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name)
    }

    /// Lifts an operator on the listed variables to the full space.
    pub fn embed(&self, a: &CMatrix, targets: &[VarId]) -> crate::Result<CMatrix> {
        linalg::embed(a, targets, &self.dims)
    }

    /// Full-space basis index of the state assigning `coords[k]` to factor k.
    pub fn basis_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dims.len());
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &d)| acc * d + c)
    }
}

// ----- Validation -----

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateVariable { name: String },
    BadVariableDim { name: String, dim: usize },
    NonUnitaryGate { name: String, residual: f64 },
    IncompleteMeasurement { name: String, residual: f64 },
    NonHermitianOutcomeSum { name: String },
    MatrixShape { name: String, expected: usize, rows: usize, cols: usize },
    DuplicateOutcomeLabel { name: String, label: usize },
    UndeclaredReference { context: &'static str, id: usize },
    TargetDimensionMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    DuplicateTargets { name: String },
    MissingBranch { meas: String, label: usize },
    UnknownBranch { meas: String, label: usize },
    BadWhileGuardLabels { meas: String, labels: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVariable { name } => write!(f, "duplicate variable `{name}`"),
            Violation::BadVariableDim { name, dim } => {
                write!(f, "variable `{name}` has invalid dimension {dim}")
            }
            Violation::NonUnitaryGate { name, residual } => {
                write!(f, "gate `{name}` is not unitary (max |UU† − I| = {residual:.3e})")
            }
            Violation::IncompleteMeasurement { name, residual } => {
                write!(f, "incomplete measurement `{name}` (max |ΣM†M − I| = {residual:.3e})")
            }
            Violation::NonHermitianOutcomeSum { name } => {
                write!(f, "measurement `{name}` has a non-Hermitian completeness sum")
            }
            Violation::MatrixShape { name, expected, rows, cols } => {
                write!(f, "`{name}`: matrix must be {expected}x{expected}, got {rows}x{cols}")
            }
            Violation::DuplicateOutcomeLabel { name, label } => {
                write!(f, "measurement `{name}` repeats outcome label {label}")
            }
            Violation::UndeclaredReference { context, id } => {
                write!(f, "undeclared {context} (index {id})")
            }
            Violation::TargetDimensionMismatch { name, expected, found } => {
                write!(f, "`{name}` expects target dims {expected:?}, got {found:?}")
            }
            Violation::DuplicateTargets { name } => {
                write!(f, "`{name}` applied to repeated target variables")
            }
            Violation::MissingBranch { meas, label } => {
                write!(f, "missing branch for outcome {label} of measurement `{meas}`")
            }
            Violation::UnknownBranch { meas, label } => {
                write!(f, "branch label {label} is not an outcome of measurement `{meas}`")
            }
            Violation::BadWhileGuardLabels { meas, labels } => {
                write!(f, "while guard `{meas}` must have outcomes {{0, 1}}, found {labels:?}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Structural and numeric validation of a program against its layout.
///
/// Report-style: collects all violations instead of failing on the first.
pub fn validate(program: &Program, layout: &Layout) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen = std::collections::HashSet::new();
    for v in &program.vars {
        if !seen.insert(v.name.clone()) {
            violations.push(Violation::DuplicateVariable { name: v.name.clone() });
        }
        if v.dim == 0 {
            violations.push(Violation::BadVariableDim { name: v.name.clone(), dim: v.dim });
        }
    }

    for g in &program.gates {
        let d: usize = g.dims.iter().product();
        if g.matrix.shape() != (d, d) {
            violations.push(Violation::MatrixShape {
                name: g.name.clone(),
                expected: d,
                rows: g.matrix.nrows(),
                cols: g.matrix.ncols(),
            });
            continue;
        }
        let residual = max_abs(&(&g.matrix * g.matrix.adjoint() - CMatrix::identity(d, d)));
        if residual > tol::TOL_UNITARY {
            violations.push(Violation::NonUnitaryGate { name: g.name.clone(), residual });
        }
    }

    for m in &program.measurements {
        let d: usize = m.dims.iter().product();
        let mut labels = std::collections::HashSet::new();
        let mut shapes_ok = true;
        for (label, op) in &m.outcomes {
            if !labels.insert(*label) {
                violations.push(Violation::DuplicateOutcomeLabel {
                    name: m.name.clone(),
                    label: *label,
                });
            }
            if op.shape() != (d, d) {
                violations.push(Violation::MatrixShape {
                    name: m.name.clone(),
                    expected: d,
                    rows: op.nrows(),
                    cols: op.ncols(),
                });
                shapes_ok = false;
            }
        }
        if shapes_ok {
            let mut sum = CMatrix::zeros(d, d);
            for (_, op) in &m.outcomes {
                sum += op.adjoint() * op;
            }
            if hermiticity_defect(&sum) > tol::TOL_HERMITIAN {
                violations.push(Violation::NonHermitianOutcomeSum { name: m.name.clone() });
            }
            let residual = max_abs(&(&sum - CMatrix::identity(d, d)));
            if residual > tol::TOL_COMPLETE {
                violations.push(Violation::IncompleteMeasurement { name: m.name.clone(), residual });
            }
        }
    }

    check_stmt(program, layout, &program.body, &mut violations);
    ValidationReport { violations }
}

fn check_stmt(program: &Program, layout: &Layout, stmt: &Stmt, out: &mut Vec<Violation>) {
    let target_dims = |targets: &[VarId]| -> Option<Vec<usize>> {
        targets.iter().map(|&t| layout.dims().get(t).copied()).collect()
    };
    let distinct = |targets: &[VarId]| {
        let mut s = std::collections::HashSet::new();
        targets.iter().all(|t| s.insert(*t))
    };
    match stmt {
        Stmt::Skip => {}
        Stmt::Init { var } => {
            if *var >= program.vars.len() {
                out.push(Violation::UndeclaredReference { context: "variable", id: *var });
            }
        }
        Stmt::Unitary { gate, targets } => {
            let Some(g) = program.gates.get(*gate) else {
                out.push(Violation::UndeclaredReference { context: "gate", id: *gate });
                return;
            };
            match target_dims(targets) {
                Some(found) if found == g.dims => {}
                Some(found) => out.push(Violation::TargetDimensionMismatch {
                    name: g.name.clone(),
                    expected: g.dims.clone(),
                    found,
                }),
                None => out.push(Violation::UndeclaredReference {
                    context: "variable",
                    id: *targets.iter().max().unwrap_or(&0),
                }),
            }
            if !distinct(targets) {
                out.push(Violation::DuplicateTargets { name: g.name.clone() });
            }
        }
        Stmt::Seq(a, b) => {
            check_stmt(program, layout, a, out);
            check_stmt(program, layout, b, out);
        }
        Stmt::Case { meas, targets, branches } => {
            let Some(m) = program.measurements.get(*meas) else {
                out.push(Violation::UndeclaredReference { context: "measurement", id: *meas });
                return;
            };
            check_meas_targets(m, targets, &target_dims, &distinct, out);
            let decl_labels = m.labels();
            for (label, _) in branches {
                if !decl_labels.contains(label) {
                    out.push(Violation::UnknownBranch { meas: m.name.clone(), label: *label });
                }
            }
            for label in &decl_labels {
                if !branches.iter().any(|(l, _)| l == label) {
                    out.push(Violation::MissingBranch { meas: m.name.clone(), label: *label });
                }
            }
            for (_, branch) in branches {
                check_stmt(program, layout, branch, out);
            }
        }
        Stmt::While { meas, targets, body } => {
            let Some(m) = program.measurements.get(*meas) else {
                out.push(Violation::UndeclaredReference { context: "measurement", id: *meas });
                return;
            };
            check_meas_targets(m, targets, &target_dims, &distinct, out);
            let mut labels = m.labels();
            labels.sort_unstable();
            if labels != vec![0, 1] {
                out.push(Violation::BadWhileGuardLabels { meas: m.name.clone(), labels });
            }
            check_stmt(program, layout, body, out);
        }
    }
}

fn check_meas_targets(
    m: &MeasurementDecl,
    targets: &[VarId],
    target_dims: &dyn Fn(&[VarId]) -> Option<Vec<usize>>,
    distinct: &dyn Fn(&[VarId]) -> bool,
    out: &mut Vec<Violation>,
) {
    match target_dims(targets) {
        Some(found) if found == m.dims => {}
        Some(found) => out.push(Violation::TargetDimensionMismatch {
            name: m.name.clone(),
            expected: m.dims.clone(),
            found,
        }),
        None => out.push(Violation::UndeclaredReference {
            context: "variable",
            id: *targets.iter().max().unwrap_or(&0),
        }),
    }
    if !distinct(targets) {
        out.push(Violation::DuplicateTargets { name: m.name.clone() });
    }
}

/// Dimension of the program's composite space.
pub fn total_dimension(program: &Program) -> usize {
    Layout::of(program).total_dim()
}

// ----- Built-in gates and measurements -----

/// Resolves a built-in gate name for the given target dims.
///
/// `H` and `X` are qubit gates; `I` is the identity of any arity.
pub fn builtin_gate(name: &str, dims: &[usize]) -> Option<UnitaryDecl> {
    let c = linalg::c64;
    let matrix = match name {
        "H" if dims == [2] => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
        }
        "X" if dims == [2] => {
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
        }
        "I" => {
            let d: usize = dims.iter().product();
            CMatrix::identity(d, d)
        }
        _ => return None,
    };
    Some(UnitaryDecl {
        name: name.to_string(),
        dims: dims.to_vec(),
        matrix,
        builtin: true,
    })
}

/// Resolves a built-in measurement name for the given target dims.
///
/// `std` is the computational-basis measurement with outcomes 0..D−1.
pub fn builtin_measurement(name: &str, dims: &[usize]) -> Option<MeasurementDecl> {
    if name != "std" {
        return None;
    }
    let d: usize = dims.iter().product();
    let outcomes = (0..d)
        .map(|m| {
            let mut p = CMatrix::zeros(d, d);
            p[(m, m)] = num_complex::Complex64::ONE;
            (m, p)
        })
        .collect();
    Some(MeasurementDecl {
        name: name.to_string(),
        dims: dims.to_vec(),
        outcomes,
        builtin: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    /// One-qubit program `while std[q] == 1 do q := H[q] od`, built by hand.
    pub fn geo_program() -> Program {
        Program {
            vars: vec![QuantumVariable { name: "q".into(), dim: 2 }],
            gates: vec![builtin_gate("H", &[2]).unwrap()],
            measurements: vec![builtin_measurement("std", &[2]).unwrap()],
            body: Stmt::While {
                meas: 0,
                targets: vec![0],
                body: Box::new(Stmt::Unitary { gate: 0, targets: vec![0] }),
            },
        }
    }

    #[test]
    fn geo_program_is_valid() {
        let p = geo_program();
        let layout = Layout::of(&p);
        let report = validate(&p, &layout);
        assert!(report.is_valid(), "{report}");
        assert_eq!(total_dimension(&p), 2);
        assert_eq!(layout.total_dim(), 2);
    }

    #[test]
    fn empty_program_has_unit_dimension() {
        let p = Program {
            vars: vec![],
            gates: vec![],
            measurements: vec![],
            body: Stmt::Skip,
        };
        assert_eq!(total_dimension(&p), 1);
        assert!(validate(&p, &Layout::of(&p)).is_valid());
    }

    #[test]
    fn incomplete_measurement_is_reported() {
        let mut p = geo_program();
        p.measurements[0].outcomes.pop();
        let report = validate(&p, &Layout::of(&p));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::IncompleteMeasurement { .. })));
    }

    #[test]
    fn non_unitary_gate_is_reported() {
        let mut p = geo_program();
        p.gates[0].matrix[(0, 0)] = c64(0.9, 0.0);
        let report = validate(&p, &Layout::of(&p));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonUnitaryGate { .. })));
    }

    #[test]
    fn while_guard_needs_binary_labels() {
        let mut p = geo_program();
        p.vars[0].dim = 3;
        p.gates[0] = builtin_gate("I", &[3]).unwrap();
        p.measurements[0] = builtin_measurement("std", &[3]).unwrap();
        let report = validate(&p, &Layout::of(&p));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::BadWhileGuardLabels { .. })));
    }

    #[test]
    fn case_branch_labels_must_match() {
        let p = Program {
            vars: vec![QuantumVariable { name: "q".into(), dim: 2 }],
            gates: vec![],
            measurements: vec![builtin_measurement("std", &[2]).unwrap()],
            body: Stmt::Case {
                meas: 0,
                targets: vec![0],
                branches: vec![(0, Stmt::Skip), (2, Stmt::Skip)],
            },
        };
        let report = validate(&p, &Layout::of(&p));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::MissingBranch { label: 1, .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::UnknownBranch { label: 2, .. })));
    }

    #[test]
    fn duplicate_targets_reported() {
        let cnotish = builtin_gate("I", &[2, 2]).unwrap();
        let p = Program {
            vars: vec![
                QuantumVariable { name: "a".into(), dim: 2 },
                QuantumVariable { name: "b".into(), dim: 2 },
            ],
            gates: vec![cnotish],
            measurements: vec![],
            body: Stmt::Unitary { gate: 0, targets: vec![0, 0] },
        };
        let report = validate(&p, &Layout::of(&p));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateTargets { .. })));
    }

    #[test]
    fn layout_basis_index_is_row_major() {
        let p = Program {
            vars: vec![
                QuantumVariable { name: "c".into(), dim: 2 },
                QuantumVariable { name: "p".into(), dim: 5 },
            ],
            gates: vec![],
            measurements: vec![],
            body: Stmt::Skip,
        };
        let layout = Layout::of(&p);
        assert_eq!(layout.total_dim(), 10);
        assert_eq!(layout.basis_index(&[0, 3]), 3);
        assert_eq!(layout.basis_index(&[1, 2]), 7);
        assert_eq!(layout.var_index("p"), Some(1));
    }

    #[test]
    fn seq_all_nests_right() {
        let s = Stmt::seq_all(vec![Stmt::Skip, Stmt::Skip, Stmt::Skip]);
        assert_eq!(
            s,
            Stmt::seq(Stmt::Skip, Stmt::seq(Stmt::Skip, Stmt::Skip))
        );
        assert_eq!(Stmt::seq_all(vec![]), Stmt::Skip);
    }
}
