//! Text, JSON and QASM forms of a [`Circuit`].
//!
//! Text form: a `qubits <main> <ancilla>` header, then one gate per line as
//! `KIND q<i> ... [params] [label=..|tag=..]`. `#` starts a comment. Floats
//! are written in shortest round-trip form so text → circuit → text is
//! bit-exact.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Circuit, CircuitError, Gate, Matrix2, Qubit};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError { line, column, message: message.into() }
    }
}

pub fn to_text(circuit: &Circuit) -> String {
    let mut out = format!("qubits {} {}\n", circuit.num_main(), circuit.num_ancilla());
    for gate in circuit.gates() {
        out.push_str(gate.kind());
        for q in gate.qubits() {
            write!(out, " {q}").unwrap();
        }
        match gate {
            Gate::Ry { angle, .. } => write!(out, " {angle}").unwrap(),
            Gate::OneQubit { matrix, label, .. } => {
                for v in matrix.iter().flatten() {
                    write!(out, " {} {}", v.re, v.im).unwrap();
                }
                write!(out, " label={label}").unwrap();
            }
            Gate::OracleCall { tag, .. } => write!(out, " tag={tag}").unwrap(),
            _ => {}
        }
        out.push('\n');
    }
    out
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let line = line.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                tokens.push(Token { text: &line[s..i], column: line[..s].chars().count() + 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(Token { text: &line[s..], column: line[..s].chars().count() + 1 });
    }
    tokens
}

pub fn parse_text(text: &str) -> Result<Circuit, ParseError> {
    let mut circuit: Option<Circuit> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens = tokenize(raw);
        let Some(head) = tokens.first() else { continue };
        let Some(c) = circuit.as_mut() else {
            if head.text != "qubits" || tokens.len() != 3 {
                return Err(ParseError::new(line, head.column, "expected header `qubits <main> <ancilla>`"));
            }
            let main = parse_num::<usize>(&tokens[1], line)?;
            let anc = parse_num::<usize>(&tokens[2], line)?;
            circuit = Some(Circuit::new(main, anc));
            continue;
        };
        let gate = parse_gate(&tokens, line)?;
        c.try_push(gate).map_err(|e| ParseError::new(line, head.column, e.to_string()))?;
    }
    circuit.ok_or_else(|| ParseError::new(1, 1, "missing `qubits` header"))
}

fn parse_num<T: std::str::FromStr>(tok: &Token<'_>, line: usize) -> Result<T, ParseError> {
    tok.text.parse().map_err(|_| ParseError::new(line, tok.column, format!("invalid number {:?}", tok.text)))
}

fn parse_qubit(tok: &Token<'_>, line: usize) -> Result<Qubit, ParseError> {
    tok.text
        .strip_prefix('q')
        .and_then(|s| s.parse().ok())
        .map(Qubit)
        .ok_or_else(|| ParseError::new(line, tok.column, format!("expected qubit like q3, found {:?}", tok.text)))
}

fn parse_gate(tokens: &[Token<'_>], line: usize) -> Result<Gate, ParseError> {
    let head = &tokens[0];
    let rest = &tokens[1..];
    let qubit_count = rest.iter().take_while(|t| t.text.starts_with('q')).count();
    let (qtoks, params) = rest.split_at(qubit_count);
    let qubits = qtoks.iter().map(|t| parse_qubit(t, line)).collect::<Result<Vec<_>, _>>()?;
    let end_column = tokens.last().map(|t| t.column + t.text.len()).unwrap_or(1);

    let arity = |n: usize| -> Result<(), ParseError> {
        if qubits.len() != n {
            return Err(ParseError::new(
                line,
                head.column,
                format!("{} takes {n} qubit(s), found {}", head.text, qubits.len()),
            ));
        }
        Ok(())
    };
    let no_params = || -> Result<(), ParseError> {
        match params.first() {
            Some(t) => Err(ParseError::new(line, t.column, format!("unexpected token {:?}", t.text))),
            None => Ok(()),
        }
    };
    let keyed = |key: &str| -> Result<String, ParseError> {
        let prefix = format!("{key}=");
        match params {
            [t] => t
                .text
                .strip_prefix(&prefix)
                .map(str::to_string)
                .ok_or_else(|| ParseError::new(line, t.column, format!("expected {prefix}<name>"))),
            [] => Err(ParseError::new(line, end_column, format!("missing {prefix}<name>"))),
            [_, t, ..] => Err(ParseError::new(line, t.column, format!("unexpected token {:?}", t.text))),
        }
    };

    let gate = match head.text {
        "X" | "Z" | "H" => {
            arity(1)?;
            no_params()?;
            match head.text {
                "X" => Gate::X(qubits[0]),
                "Z" => Gate::Z(qubits[0]),
                _ => Gate::H(qubits[0]),
            }
        }
        "CX" => {
            arity(2)?;
            no_params()?;
            Gate::cx(qubits[0], qubits[1])
        }
        "CCX" => {
            arity(3)?;
            no_params()?;
            Gate::ccx(qubits[0], qubits[1], qubits[2])
        }
        "DIFF" => {
            no_params()?;
            Gate::Diffuser(qubits)
        }
        "MCZ" => {
            no_params()?;
            Gate::MultiControlledZ(qubits)
        }
        "RY" => {
            arity(1)?;
            match params {
                [t] => Gate::ry(qubits[0], parse_num(t, line)?),
                _ => return Err(ParseError::new(line, end_column, "RY takes exactly one angle")),
            }
        }
        "U" => {
            arity(1)?;
            if params.len() != 9 {
                return Err(ParseError::new(line, end_column, "U takes 8 floats and label=<name>"));
            }
            let mut vals = [0.0f64; 8];
            for (v, t) in vals.iter_mut().zip(&params[..8]) {
                *v = parse_num(t, line)?;
            }
            let label = keyed_single(&params[8], "label", line)?;
            let m: Matrix2 = [
                [Complex64::new(vals[0], vals[1]), Complex64::new(vals[2], vals[3])],
                [Complex64::new(vals[4], vals[5]), Complex64::new(vals[6], vals[7])],
            ];
            Gate::one_qubit(qubits[0], m, label)
        }
        "ORACLE" => Gate::oracle(keyed("tag")?, qubits),
        other => return Err(ParseError::new(line, head.column, format!("unknown gate {other:?}"))),
    };
    Ok(gate)
}

fn keyed_single(tok: &Token<'_>, key: &str, line: usize) -> Result<String, ParseError> {
    tok.text
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .map(str::to_string)
        .ok_or_else(|| ParseError::new(line, tok.column, format!("expected {key}=<name>")))
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    num_main: usize,
    num_ancilla: usize,
    gates: Vec<GateJson>,
}

#[derive(Serialize, Deserialize)]
struct GateJson {
    kind: String,
    qubits: Vec<usize>,
    #[serde(default)]
    params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tag: Option<String>,
}

pub fn to_json(circuit: &Circuit) -> String {
    let gates = circuit
        .gates()
        .iter()
        .map(|g| {
            let (params, label, tag) = match g {
                Gate::Ry { angle, .. } => (vec![*angle], None, None),
                Gate::OneQubit { matrix, label, .. } => {
                    (matrix.iter().flatten().flat_map(|v| [v.re, v.im]).collect(), Some(label.clone()), None)
                }
                Gate::OracleCall { tag, .. } => (vec![], None, Some(tag.clone())),
                _ => (vec![], None, None),
            };
            GateJson { kind: g.kind().to_string(), qubits: g.qubits().iter().map(|q| q.0).collect(), params, label, tag }
        })
        .collect();
    let doc = CircuitJson { num_main: circuit.num_main(), num_ancilla: circuit.num_ancilla(), gates };
    serde_json::to_string_pretty(&doc).expect("circuit JSON serialization cannot fail")
}

/// Parses the JSON form. Syntax errors carry the document position; invalid
/// gates are reported at 1:1 with the gate index in the message.
pub fn parse_json(text: &str) -> Result<Circuit, ParseError> {
    let doc: CircuitJson =
        serde_json::from_str(text).map_err(|e| ParseError::new(e.line(), e.column(), e.to_string()))?;
    let mut c = Circuit::new(doc.num_main, doc.num_ancilla);
    for (i, g) in doc.gates.into_iter().enumerate() {
        let fail = |msg: String| ParseError::new(1, 1, format!("gate {i}: {msg}"));
        let qs: Vec<Qubit> = g.qubits.iter().copied().map(Qubit).collect();
        let need = |n: usize| if qs.len() == n { Ok(()) } else { Err(fail(format!("{} takes {n} qubit(s)", g.kind))) };
        let gate = match g.kind.as_str() {
            "X" => need(1).map(|_| Gate::X(qs[0]))?,
            "Z" => need(1).map(|_| Gate::Z(qs[0]))?,
            "H" => need(1).map(|_| Gate::H(qs[0]))?,
            "CX" => need(2).map(|_| Gate::cx(qs[0], qs[1]))?,
            "CCX" => need(3).map(|_| Gate::ccx(qs[0], qs[1], qs[2]))?,
            "DIFF" => Gate::Diffuser(qs),
            "MCZ" => Gate::MultiControlledZ(qs),
            "RY" => {
                need(1)?;
                match g.params.as_slice() {
                    [a] => Gate::ry(qs[0], *a),
                    _ => return Err(fail("RY takes one param".into())),
                }
            }
            "U" => {
                need(1)?;
                let p = &g.params;
                if p.len() != 8 {
                    return Err(fail("U takes 8 params".into()));
                }
                let m: Matrix2 = [
                    [Complex64::new(p[0], p[1]), Complex64::new(p[2], p[3])],
                    [Complex64::new(p[4], p[5]), Complex64::new(p[6], p[7])],
                ];
                Gate::one_qubit(qs[0], m, g.label.unwrap_or_else(|| "U".into()))
            }
            "ORACLE" => Gate::oracle(g.tag.ok_or_else(|| fail("ORACLE needs a tag".into()))?, qs),
            other => return Err(fail(format!("unknown gate kind {other:?}"))),
        };
        c.try_push(gate).map_err(|e| fail(e.to_string()))?;
    }
    Ok(c)
}

/// OpenQASM 2.0 export of a basic-tier circuit. Generic one-qubit gates are
/// emitted as `u3` (global phase dropped).
pub fn to_qasm(circuit: &Circuit) -> Result<String, CircuitError> {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    writeln!(out, "qreg q[{}];", circuit.num_qubits()).unwrap();
    for g in circuit.gates() {
        match g {
            Gate::X(q) => writeln!(out, "x q[{}];", q.0),
            Gate::Z(q) => writeln!(out, "z q[{}];", q.0),
            Gate::H(q) => writeln!(out, "h q[{}];", q.0),
            Gate::Ry { target, angle } => writeln!(out, "ry({angle}) q[{}];", target.0),
            Gate::Cx { control, target } => writeln!(out, "cx q[{}],q[{}];", control.0, target.0),
            Gate::OneQubit { target, matrix, .. } => {
                let (theta, phi, lambda) = zyz_angles(matrix);
                writeln!(out, "u3({theta},{phi},{lambda}) q[{}];", target.0)
            }
            other => return Err(CircuitError::NotBasic(other.kind())),
        }
        .unwrap();
    }
    Ok(out)
}

/// (θ, φ, λ) with `m = e^{iα} U3(θ, φ, λ)` for some α.
pub(crate) fn zyz_angles(m: &Matrix2) -> (f64, f64, f64) {
    const EPS: f64 = 1e-12;
    let theta = 2.0 * m[1][0].norm().atan2(m[0][0].norm());
    if m[1][0].norm() < EPS {
        (theta, 0.0, m[1][1].arg() - m[0][0].arg())
    } else if m[0][0].norm() < EPS {
        let alpha = (-m[0][1]).arg();
        (theta, m[1][0].arg() - alpha, 0.0)
    } else {
        let alpha = m[0][0].arg();
        (theta, m[1][0].arg() - alpha, (-m[0][1]).arg() - alpha)
    }
}
