//! Surface syntax for quantum while-programs.
//!
//! ```text
//! file  := decl* "prog" "{" stmt "}"
//! decl  := "var" id ":" int ";"
//!        | "gate" id "(" dims ")" "=" matrix ";"
//!        | "meas" id "(" dims ")" "{" (label ":" matrix ";")+ "}" [";"]
//! stmt  := simple (";" simple)*
//! simple:= "skip"
//!        | id ":=" "|0>"
//!        | ids ":=" id "[" ids "]"
//!        | "if" id "[" ids "]" "{" label "->" stmt ("," label "->" stmt)* [","] "}"
//!        | "while" id "[" ids "]" "==" "1" "do" stmt "od"
//! ```
//!
//! Matrices are written row-major as `[[entry, …], …]` with complex entries
//! `a`, `bi`, `a+bi`, or `a-bi`. `#` starts a line comment; whitespace is
//! otherwise insignificant. The gate names `H`, `X`, `I` and the
//! computational-basis measurement `std` resolve without declaration; they
//! are registered in the declaration tables in order of first use.
//!
//! Sequencing is right-associative: `a; b; c` parses as `a; (b; c)`.
//! [`pretty_print`] emits a canonical text whose re-parse is structurally
//! identical to any program whose sequences are right-nested (the form both
//! the parser and the program builders in this crate produce).

use std::fmt;

use num_complex::Complex64;

use crate::linalg::CMatrix;
use crate::program::{
    builtin_gate, builtin_measurement, validate, Layout, MeasurementDecl, Program, Stmt,
    UnitaryDecl, VarId,
};

// ----- Errors -----

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// 1-based line of the offending token.
    pub line: usize,
    /// 1-based column of the offending token.
    pub column: usize,
    pub message: String,
    /// Hint naming the token class the parser was looking for.
    pub expected: Option<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at line {}, column {}: {}",
            self.line, self.column, self.message
        )?;
        if let Some(e) = &self.expected {
            write!(f, " (expected {e})")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

// ----- Lexer -----

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    /// A number with an `i` suffix, e.g. `0.5i`.
    Imag(f64),
    Ket0,
    Assign,
    Eq,
    EqEq,
    Arrow,
    Colon,
    Semi,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Plus,
    Minus,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(v) => format!("`{v}`"),
            Tok::Imag(v) => format!("`{v}i`"),
            Tok::Ket0 => "`|0>`".into(),
            Tok::Assign => "`:=`".into(),
            Tok::Eq => "`=`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let err = |line: usize, col: usize, msg: String| ParseError {
        line,
        column: col,
        message: msg,
        expected: None,
    };
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let mut push = |tok: Tok| {
            out.push(Token { tok, line: tline, column: tcol });
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' | ')' | '[' | ']' | '{' | '}' | ',' | ';' | '+' => {
                push(match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    _ => Tok::Plus,
                });
                i += 1;
                col += 1;
            }
            ':' => {
                if chars.get(i + 1) == Some(&'=') {
                    push(Tok::Assign);
                    i += 2;
                    col += 2;
                } else {
                    push(Tok::Colon);
                    i += 1;
                    col += 1;
                }
            }
            '=' => {
                if chars.get(i + 1) == Some(&'=') {
                    push(Tok::EqEq);
                    i += 2;
                    col += 2;
                } else {
                    push(Tok::Eq);
                    i += 1;
                    col += 1;
                }
            }
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    push(Tok::Arrow);
                    i += 2;
                    col += 2;
                } else {
                    push(Tok::Minus);
                    i += 1;
                    col += 1;
                }
            }
            '|' => {
                if chars.get(i + 1) == Some(&'0') && chars.get(i + 2) == Some(&'>') {
                    push(Tok::Ket0);
                    i += 3;
                    col += 3;
                } else {
                    return Err(err(line, col, "malformed ket (only `|0>` is valid here)".into()));
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    if i >= chars.len() || !chars[i].is_ascii_digit() {
                        return Err(err(line, col, "digits must follow a decimal point".into()));
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| err(line, col, format!("invalid number `{text}`")))?;
                // An `i` suffix (not starting an identifier) marks an
                // imaginary literal.
                let imag = chars.get(i) == Some(&'i')
                    && !chars
                        .get(i + 1)
                        .is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_');
                if imag {
                    i += 1;
                    push(Tok::Imag(value));
                } else {
                    push(Tok::Number(value));
                }
                col += i - start;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                push(Tok::Ident(text));
                col += i - start;
            }
            other => {
                return Err(err(line, col, format!("unexpected character `{other}`")));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

// ----- Parser -----

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    vars: Vec<crate::program::QuantumVariable>,
    gates: Vec<UnitaryDecl>,
    measurements: Vec<MeasurementDecl>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.column)
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>, expected: Option<&str>) -> ParseError {
        let (line, column) = self.here();
        ParseError {
            line,
            column,
            message: message.into(),
            expected: expected.map(str::to_string),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(
                format!("found {}", self.peek().describe()),
                Some(expected),
            ))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("found {}", other.describe()), Some(what))),
        }
    }

    fn expect_integer(&mut self, what: &str) -> Result<usize, ParseError> {
        match *self.peek() {
            Tok::Number(v) if v.fract() == 0.0 && v >= 0.0 && v <= usize::MAX as f64 => {
                self.bump();
                Ok(v as usize)
            }
            ref other => Err(self.error(format!("found {}", other.describe()), Some(what))),
        }
    }

    // --- declarations ---

    fn parse_dims(&mut self) -> Result<Vec<usize>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut dims = vec![self.expect_integer("a dimension")?];
        while *self.peek() == Tok::Comma {
            self.bump();
            dims.push(self.expect_integer("a dimension")?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(dims)
    }

    fn parse_signed_part(&mut self) -> Result<(bool, f64), ParseError> {
        let sign = match self.peek() {
            Tok::Minus => {
                self.bump();
                -1.0
            }
            Tok::Plus => {
                self.bump();
                1.0
            }
            _ => 1.0,
        };
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok((false, sign * v))
            }
            Tok::Imag(v) => {
                self.bump();
                Ok((true, sign * v))
            }
            other => Err(self.error(
                format!("found {}", other.describe()),
                Some("a complex number like `0.5`, `1i`, or `0.5-0.5i`"),
            )),
        }
    }

    fn parse_complex(&mut self) -> Result<Complex64, ParseError> {
        let (first_imag, first) = self.parse_signed_part()?;
        let (mut re, mut im) = if first_imag { (0.0, first) } else { (first, 0.0) };
        if matches!(self.peek(), Tok::Plus | Tok::Minus) {
            let (second_imag, second) = self.parse_signed_part()?;
            if second_imag == first_imag {
                return Err(self.error(
                    "malformed complex literal (two parts of the same kind)".to_string(),
                    None,
                ));
            }
            if second_imag {
                im = second;
            } else {
                re = second;
            }
        }
        Ok(Complex64::new(re, im))
    }

    fn parse_matrix(&mut self) -> Result<CMatrix, ParseError> {
        let (mline, mcol) = self.here();
        self.expect(Tok::LBracket, "`[` starting a matrix")?;
        let mut rows: Vec<Vec<Complex64>> = Vec::new();
        loop {
            self.expect(Tok::LBracket, "`[` starting a row")?;
            let mut row = vec![self.parse_complex()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                row.push(self.parse_complex()?);
            }
            self.expect(Tok::RBracket, "`]` closing a row")?;
            rows.push(row);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RBracket, "`]` closing the matrix")?;
        let ncols = rows[0].len();
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(ParseError {
                line: mline,
                column: mcol,
                message: "matrix rows have unequal lengths".into(),
                expected: None,
            });
        }
        let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
        Ok(CMatrix::from_row_slice(flat.len() / ncols, ncols, &flat))
    }

    fn parse_decl(&mut self) -> Result<(), ParseError> {
        match self.bump() {
            Tok::Ident(kw) if kw == "var" => {
                let name = self.expect_ident("a variable name")?;
                if self.vars.iter().any(|v| v.name == name) {
                    return Err(self.error(format!("duplicate variable `{name}`"), None));
                }
                self.expect(Tok::Colon, "`:`")?;
                let dim = self.expect_integer("a dimension")?;
                self.expect(Tok::Semi, "`;`")?;
                self.vars.push(crate::program::QuantumVariable { name, dim });
            }
            Tok::Ident(kw) if kw == "gate" => {
                let name = self.expect_ident("a gate name")?;
                if self.gates.iter().any(|g| g.name == name) {
                    return Err(self.error(format!("duplicate gate `{name}`"), None));
                }
                let dims = self.parse_dims()?;
                self.expect(Tok::Eq, "`=`")?;
                let matrix = self.parse_matrix()?;
                self.expect(Tok::Semi, "`;`")?;
                self.gates.push(UnitaryDecl { name, dims, matrix, builtin: false });
            }
            Tok::Ident(kw) if kw == "meas" => {
                let name = self.expect_ident("a measurement name")?;
                if self.measurements.iter().any(|m| m.name == name) {
                    return Err(self.error(format!("duplicate measurement `{name}`"), None));
                }
                let dims = self.parse_dims()?;
                self.expect(Tok::LBrace, "`{`")?;
                let mut outcomes = Vec::new();
                loop {
                    let label = self.expect_integer("an outcome label")?;
                    self.expect(Tok::Colon, "`:`")?;
                    let matrix = self.parse_matrix()?;
                    self.expect(Tok::Semi, "`;`")?;
                    outcomes.push((label, matrix));
                    if *self.peek() == Tok::RBrace {
                        break;
                    }
                }
                self.expect(Tok::RBrace, "`}`")?;
                if *self.peek() == Tok::Semi {
                    self.bump();
                }
                self.measurements.push(MeasurementDecl { name, dims, outcomes, builtin: false });
            }
            other => {
                return Err(ParseError {
                    line: self.tokens[self.pos - 1].line,
                    column: self.tokens[self.pos - 1].column,
                    message: format!("found {}", other.describe()),
                    expected: Some("`var`, `gate`, `meas`, or `prog`".into()),
                })
            }
        }
        Ok(())
    }

    // --- statements ---

    fn var_id(&mut self, name: &str) -> Result<VarId, ParseError> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| self.error(format!("unknown variable `{name}`"), None))
    }

    fn parse_target_list(&mut self) -> Result<Vec<VarId>, ParseError> {
        let first = self.expect_ident("a variable name")?;
        let mut ids = vec![self.var_id(&first)?];
        while *self.peek() == Tok::Comma {
            self.bump();
            let name = self.expect_ident("a variable name")?;
            ids.push(self.var_id(&name)?);
        }
        Ok(ids)
    }

    fn target_dims(&self, targets: &[VarId]) -> Vec<usize> {
        targets.iter().map(|&t| self.vars[t].dim).collect()
    }

    /// Finds a gate by name, registering a built-in sized for `targets` on
    /// first use.
    fn resolve_gate(&mut self, name: &str, targets: &[VarId]) -> Result<usize, ParseError> {
        if let Some(id) = self.gates.iter().position(|g| g.name == name) {
            return Ok(id);
        }
        let dims = self.target_dims(targets);
        if let Some(decl) = builtin_gate(name, &dims) {
            if let Some(id) = self
                .gates
                .iter()
                .position(|g| g.builtin && g.name == name && g.dims == dims)
            {
                return Ok(id);
            }
            self.gates.push(decl);
            return Ok(self.gates.len() - 1);
        }
        Err(self.error(format!("unknown gate `{name}`"), None))
    }

    fn resolve_measurement(&mut self, name: &str, targets: &[VarId]) -> Result<usize, ParseError> {
        if let Some(id) = self.measurements.iter().position(|m| m.name == name) {
            return Ok(id);
        }
        let dims = self.target_dims(targets);
        if let Some(decl) = builtin_measurement(name, &dims) {
            if let Some(id) = self
                .measurements
                .iter()
                .position(|m| m.builtin && m.name == name && m.dims == dims)
            {
                return Ok(id);
            }
            self.measurements.push(decl);
            return Ok(self.measurements.len() - 1);
        }
        Err(self.error(format!("unknown measurement `{name}`"), None))
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let mut parts = vec![self.parse_simple()?];
        while *self.peek() == Tok::Semi {
            self.bump();
            parts.push(self.parse_simple()?);
        }
        Ok(Stmt::seq_all(parts))
    }

    fn parse_simple(&mut self) -> Result<Stmt, ParseError> {
        match self.peek().clone() {
            Tok::Ident(kw) if kw == "skip" => {
                self.bump();
                Ok(Stmt::Skip)
            }
            Tok::Ident(kw) if kw == "if" => {
                self.bump();
                let meas_name = self.expect_ident("a measurement name")?;
                self.expect(Tok::LBracket, "`[`")?;
                let targets = self.parse_target_list()?;
                self.expect(Tok::RBracket, "`]`")?;
                let meas = self.resolve_measurement(&meas_name, &targets)?;
                self.expect(Tok::LBrace, "`{`")?;
                let mut branches = Vec::new();
                loop {
                    let label = self.expect_integer("an outcome label")?;
                    self.expect(Tok::Arrow, "`->`")?;
                    let stmt = self.parse_stmt()?;
                    branches.push((label, stmt));
                    if *self.peek() == Tok::Comma {
                        self.bump();
                        if *self.peek() == Tok::RBrace {
                            break;
                        }
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RBrace, "`}`")?;
                Ok(Stmt::Case { meas, targets, branches })
            }
            Tok::Ident(kw) if kw == "while" => {
                self.bump();
                let meas_name = self.expect_ident("a measurement name")?;
                self.expect(Tok::LBracket, "`[`")?;
                let targets = self.parse_target_list()?;
                self.expect(Tok::RBracket, "`]`")?;
                let meas = self.resolve_measurement(&meas_name, &targets)?;
                self.expect(Tok::EqEq, "`==`")?;
                let one = self.expect_integer("`1`")?;
                if one != 1 {
                    return Err(self.error(
                        format!("loop guards compare against outcome 1, found {one}"),
                        None,
                    ));
                }
                self.expect_keyword("do")?;
                let body = self.parse_stmt()?;
                self.expect_keyword("od")?;
                Ok(Stmt::While { meas, targets, body: Box::new(body) })
            }
            Tok::Ident(_) => {
                let lhs_names = self.parse_lhs_names()?;
                self.expect(Tok::Assign, "`:=`")?;
                if *self.peek() == Tok::Ket0 {
                    self.bump();
                    if lhs_names.len() != 1 {
                        return Err(self.error(
                            "initialization targets a single variable".to_string(),
                            None,
                        ));
                    }
                    let var = self.var_id(&lhs_names[0])?;
                    Ok(Stmt::Init { var })
                } else {
                    let gate_name = self.expect_ident("a gate name or `|0>`")?;
                    self.expect(Tok::LBracket, "`[`")?;
                    let targets = self.parse_target_list()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    let lhs: Vec<VarId> = {
                        let mut ids = Vec::new();
                        for n in &lhs_names {
                            ids.push(self.var_id(n)?);
                        }
                        ids
                    };
                    if lhs != targets {
                        return Err(self.error(
                            "the assigned variables must repeat the gate's target list"
                                .to_string(),
                            None,
                        ));
                    }
                    let gate = self.resolve_gate(&gate_name, &targets)?;
                    Ok(Stmt::Unitary { gate, targets })
                }
            }
            other => Err(self.error(
                format!("found {}", other.describe()),
                Some("a statement"),
            )),
        }
    }

    fn parse_lhs_names(&mut self) -> Result<Vec<String>, ParseError> {
        let mut names = vec![self.expect_ident("a variable name")?];
        while *self.peek() == Tok::Comma {
            self.bump();
            names.push(self.expect_ident("a variable name")?);
        }
        Ok(names)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            other => Err(self.error(
                format!("found {}", other.describe()),
                Some(&format!("`{kw}`")),
            )),
        }
    }

    fn parse_file(&mut self) -> Result<Stmt, ParseError> {
        loop {
            match self.peek().clone() {
                Tok::Ident(kw) if kw == "prog" => {
                    self.bump();
                    break;
                }
                Tok::Ident(kw) if kw == "var" || kw == "gate" || kw == "meas" => {
                    self.parse_decl()?;
                }
                other => {
                    return Err(self.error(
                        format!("found {}", other.describe()),
                        Some("`var`, `gate`, `meas`, or `prog`"),
                    ))
                }
            }
        }
        self.expect(Tok::LBrace, "`{`")?;
        let body = self.parse_stmt()?;
        self.expect(Tok::RBrace, "`}`")?;
        if *self.peek() != Tok::Eof {
            return Err(self.error(
                format!("found {} after the program block", self.peek().describe()),
                Some("end of input"),
            ));
        }
        Ok(body)
    }
}

/// Parses source text into a validated program and its layout.
///
/// Syntax problems surface as [`ParseError`]; a well-formed file whose
/// matrices fail the unitarity/completeness checks (or whose statements
/// misuse declarations) surfaces the full validation report instead.
pub fn parse(source: &str) -> crate::Result<(Program, Layout)> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        vars: Vec::new(),
        gates: Vec::new(),
        measurements: Vec::new(),
    };
    let body = parser.parse_file()?;
    let program = Program {
        vars: parser.vars,
        gates: parser.gates,
        measurements: parser.measurements,
        body,
    };
    let layout = Layout::of(&program);
    let report = validate(&program, &layout);
    if !report.is_valid() {
        return Err(crate::Error::Validation(report));
    }
    Ok((program, layout))
}

// ----- Pretty-printer -----

fn fmt_f64(v: f64) -> String {
    // `{}` on f64 prints the shortest decimal that parses back exactly and
    // never uses exponent notation, so the lexer round-trips it bit-for-bit.
    format!("{v}")
}

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else if z.re == 0.0 {
        format!("{}i", fmt_f64(z.im))
    } else if z.im < 0.0 {
        format!("{}-{}i", fmt_f64(z.re), fmt_f64(-z.im))
    } else {
        format!("{}+{}i", fmt_f64(z.re), fmt_f64(z.im))
    }
}

fn fmt_matrix(m: &CMatrix, indent: &str) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|r| {
            let entries: Vec<String> = (0..m.ncols()).map(|c| fmt_complex(m[(r, c)])).collect();
            format!("[{}]", entries.join(", "))
        })
        .collect();
    if m.nrows() <= 4 && m.ncols() <= 4 {
        format!("[{}]", rows.join(", "))
    } else {
        let sep = format!(",\n{indent}  ");
        format!("[\n{indent}  {}\n{indent}]", rows.join(&sep))
    }
}

fn fmt_dims(dims: &[usize]) -> String {
    let parts: Vec<String> = dims.iter().map(usize::to_string).collect();
    parts.join(", ")
}

fn fmt_stmt(program: &Program, layout: &Layout, stmt: &Stmt, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let names = |targets: &[VarId]| -> String {
        let parts: Vec<&str> = targets.iter().map(|&t| layout.names()[t].as_str()).collect();
        parts.join(", ")
    };
    match stmt {
        Stmt::Skip => out.push_str(&format!("{pad}skip")),
        Stmt::Init { var } => {
            out.push_str(&format!("{pad}{} := |0>", layout.names()[*var]));
        }
        Stmt::Unitary { gate, targets } => {
            let g = &program.gates[*gate];
            out.push_str(&format!("{pad}{} := {}[{}]", names(targets), g.name, names(targets)));
        }
        Stmt::Seq(a, b) => {
            fmt_stmt(program, layout, a, indent, out);
            out.push_str(";\n");
            fmt_stmt(program, layout, b, indent, out);
        }
        Stmt::Case { meas, targets, branches } => {
            let m = &program.measurements[*meas];
            out.push_str(&format!("{pad}if {}[{}] {{\n", m.name, names(targets)));
            for (i, (label, branch)) in branches.iter().enumerate() {
                out.push_str(&format!("{pad}  {label} ->\n"));
                fmt_stmt(program, layout, branch, indent + 2, out);
                if i + 1 < branches.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&format!("{pad}}}"));
        }
        Stmt::While { meas, targets, body } => {
            let m = &program.measurements[*meas];
            out.push_str(&format!("{pad}while {}[{}] == 1 do\n", m.name, names(targets)));
            fmt_stmt(program, layout, body, indent + 1, out);
            out.push_str(&format!("\n{pad}od"));
        }
    }
}

/// Canonical text form; re-parsing it reproduces the program structurally.
///
/// Built-in declarations are omitted (the parser re-registers them in first
/// use order, which matches the table order the parser produced).
pub fn pretty_print(program: &Program, layout: &Layout) -> String {
    let mut out = String::new();
    for v in &program.vars {
        out.push_str(&format!("var {}:{};\n", v.name, v.dim));
    }
    for g in program.gates.iter().filter(|g| !g.builtin) {
        out.push_str(&format!(
            "gate {}({}) = {};\n",
            g.name,
            fmt_dims(&g.dims),
            fmt_matrix(&g.matrix, "")
        ));
    }
    for m in program.measurements.iter().filter(|m| !m.builtin) {
        out.push_str(&format!("meas {}({}) {{\n", m.name, fmt_dims(&m.dims)));
        for (label, op) in &m.outcomes {
            out.push_str(&format!("  {label}: {};\n", fmt_matrix(op, "  ")));
        }
        out.push_str("}\n");
    }
    out.push_str("prog {\n");
    fmt_stmt(program, layout, &program.body, 1, &mut out);
    out.push_str("\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::total_dimension;

    const GEO: &str = "var q:2; prog { while std[q] == 1 do q := H[q] od }";

    #[test]
    fn parses_coin_loop() {
        let (program, layout) = parse(GEO).unwrap();
        assert_eq!(layout.total_dim(), 2);
        assert_eq!(program.gates.len(), 1);
        assert!(program.gates[0].builtin);
        assert_eq!(program.measurements[0].name, "std");
        assert!(matches!(program.body, Stmt::While { .. }));
    }

    #[test]
    fn parses_empty_skip_program() {
        let (program, layout) = parse("prog { skip }").unwrap();
        assert_eq!(layout.total_dim(), 1);
        assert_eq!(total_dimension(&program), 1);
        assert_eq!(program.body, Stmt::Skip);
    }

    #[test]
    fn missing_branch_is_a_validation_error() {
        let err = parse("var q:2; prog { if std[q] { 0 -> skip } }").unwrap_err();
        let text = err.to_string();
        assert!(
            text.contains("missing branch for outcome 1"),
            "unexpected message: {text}"
        );
    }

    #[test]
    fn round_trips_coin_loop() {
        let (program, layout) = parse(GEO).unwrap();
        let text = pretty_print(&program, &layout);
        let (reparsed, _) = parse(&text).unwrap();
        assert_eq!(program, reparsed);
    }

    #[test]
    fn round_trips_declarations_and_cases() {
        let src = "
            var a:2;
            var b:3;
            gate G(2) = [[0.6, 0.8], [0.8, -0.6]];
            meas M(3) {
              0: [[1, 0, 0], [0, 0, 0], [0, 0, 0]];
              1: [[0, 0, 0], [0, 1, 0], [0, 0, 1]];
            }
            prog {
              a := |0>;
              if M[b] {
                0 -> a := G[a]; skip,
                1 -> while M[b] == 1 do b := I[b] od
              }
            }
        ";
        let (program, layout) = parse(src).unwrap();
        let text = pretty_print(&program, &layout);
        let (reparsed, relayout) = parse(&text).unwrap();
        assert_eq!(program, reparsed);
        assert_eq!(layout, relayout);
    }

    #[test]
    fn complex_literals_parse_in_all_forms() {
        let src = "
            var q:2;
            gate P(2) = [[0.5+0.8660254037844386i, 0], [0, 0.5-0.8660254037844386i]];
            prog { q := P[q] }
        ";
        let (program, _) = parse(src).unwrap();
        let m = &program.gates[0].matrix;
        assert_eq!(m[(0, 0)], Complex64::new(0.5, 0.8660254037844386));
        assert_eq!(m[(1, 1)], Complex64::new(0.5, -0.8660254037844386));
    }

    #[test]
    fn pure_imaginary_and_negative_entries() {
        let src = "
            var q:2;
            gate Y(2) = [[0, -1i], [1i, 0]];
            prog { q := Y[q] }
        ";
        let (program, _) = parse(src).unwrap();
        let m = &program.gates[0].matrix;
        assert_eq!(m[(0, 1)], Complex64::new(0.0, -1.0));
        assert_eq!(m[(1, 0)], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn sequencing_is_right_nested() {
        let (program, _) = parse("var q:2; prog { skip; q := |0>; skip }").unwrap();
        assert_eq!(
            program.body,
            Stmt::seq(
                Stmt::Skip,
                Stmt::seq(Stmt::Init { var: 0 }, Stmt::Skip)
            )
        );
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse("var q:2;\nprog { q := }").unwrap_err();
        let crate::Error::Parse(p) = err else {
            panic!("expected a parse error, got {err}");
        };
        assert_eq!(p.line, 2);
        assert!(p.column > 1);
        assert!(p.expected.is_some());
    }

    #[test]
    fn unknown_variable_is_reported_at_use() {
        let err = parse("prog { q := |0> }").unwrap_err();
        assert!(err.to_string().contains("unknown variable `q`"));
    }

    #[test]
    fn lhs_must_match_gate_targets() {
        let err = parse("var a:2; var b:2; prog { a := I[b] }").unwrap_err();
        assert!(err.to_string().contains("must repeat"));
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let src = "# intro\nvar q:2; # coin\nprog {\n  skip # noop\n}\n";
        let (program, _) = parse(src).unwrap();
        assert_eq!(program.body, Stmt::Skip);
    }

    #[test]
    fn builtin_identity_sizes_to_targets() {
        let (program, _) =
            parse("var a:2; var b:3; prog { a,b := I[a,b] }").unwrap();
        let g = &program.gates[0];
        assert_eq!(g.dims, vec![2, 3]);
        assert_eq!(g.matrix.nrows(), 6);
    }

    #[test]
    fn non_unitary_gate_is_rejected_with_report() {
        let err = parse("var q:2; gate B(2) = [[1, 0], [0, 2]]; prog { q := B[q] }")
            .unwrap_err();
        assert!(matches!(err, crate::Error::Validation(_)));
        assert!(err.to_string().contains("not unitary"));
    }

    #[test]
    fn while_guard_must_compare_to_one() {
        let err = parse("var q:2; prog { while std[q] == 0 do skip od }").unwrap_err();
        assert!(err.to_string().contains("outcome 1"));
    }
}
