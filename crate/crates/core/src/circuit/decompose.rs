//! Lowering of logical gates to CX + one-qubit gates.
//!
//! * CCX uses the standard 6-CX, 9-single-qubit (H/T/T†) circuit.
//! * An `k`-qubit multi-controlled Z uses a CCX ladder that ANDs the first
//!   `k − 2` qubits into `k − 3` clean ancillas, then an H-conjugated CCX
//!   onto the last qubit, then uncomputes the ladder.
//! * A `k`-qubit diffuser is `−(XH)^{⊗k} · MCZ · (HX)^{⊗k}`; the sign is
//!   folded into the first one-qubit gate so the lowering is exact, not just
//!   equal up to global phase.

use num_complex::Complex64;

use super::{mat_mul, Circuit, CircuitError, Gate, Matrix2, Qubit};

/// Where the lowering takes clean ancillas from.
#[derive(Clone, Debug, PartialEq)]
pub enum AncillaPolicy {
    /// Append fresh ancillas to the register (shared by all gates, since each
    /// lowered gate returns them to |0⟩).
    Allocate,
    /// Use these qubits, which the caller certifies are |0⟩ whenever a
    /// lowered gate runs.
    Borrow(Vec<Qubit>),
}

pub(crate) fn mcz_ancillas(k: usize) -> usize {
    k.saturating_sub(3)
}

fn mcz_size(k: usize) -> usize {
    match k {
        0 => 0,
        1 => 1,
        2 => 3,
        _ => 15 * (2 * k - 5) + 2,
    }
}

pub(crate) fn mcz_cx_count(k: usize) -> usize {
    match k {
        0 | 1 => 0,
        2 => 1,
        _ => 6 * (2 * k - 5),
    }
}

/// Number of basic gates `gate` lowers to. Oracle calls count 0; they are
/// accounted separately as queries.
pub fn basic_size(gate: &Gate) -> usize {
    match gate {
        Gate::OneQubit { .. } | Gate::X(_) | Gate::Z(_) | Gate::H(_) | Gate::Ry { .. } | Gate::Cx { .. } => 1,
        Gate::Ccx { .. } => 15,
        Gate::MultiControlledZ(qs) => mcz_size(qs.len()),
        Gate::Diffuser(qs) if qs.len() == 1 => 1,
        Gate::Diffuser(qs) => 2 * qs.len() + mcz_size(qs.len()),
        Gate::OracleCall { .. } => 0,
    }
}

fn ancillas_needed(gate: &Gate) -> usize {
    match gate {
        Gate::MultiControlledZ(qs) | Gate::Diffuser(qs) => mcz_ancillas(qs.len()),
        _ => 0,
    }
}

/// Lowers every logical gate to the basic tier. Oracle calls are kept.
///
/// The output is unitarily equivalent to the input on the input's register
/// with all added or borrowed ancillas starting in |0⟩.
pub fn decompose_to_basic(circuit: &Circuit, policy: &AncillaPolicy) -> Result<Circuit, CircuitError> {
    let needed = circuit.gates().iter().map(ancillas_needed).max().unwrap_or(0);
    let (mut out, pool) = match policy {
        AncillaPolicy::Allocate => {
            let base = circuit.num_qubits();
            let out = Circuit::new(circuit.num_main(), circuit.num_ancilla() + needed);
            (out, (base..base + needed).map(Qubit).collect::<Vec<_>>())
        }
        AncillaPolicy::Borrow(list) => {
            for q in list {
                if q.0 >= circuit.num_qubits() {
                    return Err(CircuitError::QubitOutOfRange { qubit: q.0, size: circuit.num_qubits() });
                }
            }
            (Circuit::new(circuit.num_main(), circuit.num_ancilla()), list.clone())
        }
    };
    for gate in circuit.gates() {
        let need = ancillas_needed(gate);
        let own = gate.qubits();
        let free: Vec<Qubit> = pool.iter().copied().filter(|q| !own.contains(q)).take(need).collect();
        if free.len() < need {
            return Err(CircuitError::AncillaBudget { needed: need, available: free.len() });
        }
        lower(gate, &free, &mut out);
    }
    Ok(out)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn t_matrix(dagger: bool) -> Matrix2 {
    let phase = Complex64::from_polar(1.0, if dagger { -1.0 } else { 1.0 } * std::f64::consts::FRAC_PI_4);
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), phase]]
}

fn t(q: Qubit) -> Gate {
    Gate::one_qubit(q, t_matrix(false), "T")
}

fn tdg(q: Qubit) -> Gate {
    Gate::one_qubit(q, t_matrix(true), "T_dg")
}

fn lower(gate: &Gate, ancillas: &[Qubit], out: &mut Circuit) {
    match gate {
        Gate::Ccx { c1, c2, target } => lower_ccx(*c1, *c2, *target, out),
        Gate::MultiControlledZ(qs) => lower_mcz(qs, ancillas, out),
        Gate::Diffuser(qs) if qs.len() == 1 => out.push(Gate::X(qs[0])),
        Gate::Diffuser(qs) => {
            let x = Gate::X(Qubit(0)).one_qubit_matrix().unwrap();
            let h = Gate::H(Qubit(0)).one_qubit_matrix().unwrap();
            let mut pre = mat_mul(&x, &h);
            let post = mat_mul(&h, &x);
            for (i, q) in qs.iter().enumerate() {
                if i == 0 {
                    for row in pre.iter_mut() {
                        for v in row.iter_mut() {
                            *v = -*v;
                        }
                    }
                    out.push(Gate::one_qubit(*q, pre, "mXH"));
                } else {
                    out.push(Gate::one_qubit(*q, mat_mul(&x, &h), "XH"));
                }
            }
            lower_mcz(qs, ancillas, out);
            for q in qs {
                out.push(Gate::one_qubit(*q, post, "HX"));
            }
        }
        other => out.push(other.clone()),
    }
}

fn lower_ccx(c1: Qubit, c2: Qubit, target: Qubit, out: &mut Circuit) {
    out.push(Gate::H(target));
    out.push(Gate::cx(c2, target));
    out.push(tdg(target));
    out.push(Gate::cx(c1, target));
    out.push(t(target));
    out.push(Gate::cx(c2, target));
    out.push(tdg(target));
    out.push(Gate::cx(c1, target));
    out.push(t(c2));
    out.push(t(target));
    out.push(Gate::H(target));
    out.push(Gate::cx(c1, c2));
    out.push(t(c1));
    out.push(tdg(c2));
    out.push(Gate::cx(c1, c2));
}

fn lower_mcz(qs: &[Qubit], ancillas: &[Qubit], out: &mut Circuit) {
    let k = qs.len();
    match k {
        0 => {}
        1 => out.push(Gate::Z(qs[0])),
        2 => {
            out.push(Gate::H(qs[1]));
            out.push(Gate::cx(qs[0], qs[1]));
            out.push(Gate::H(qs[1]));
        }
        _ => {
            let target = qs[k - 1];
            // ladder[i] holds the AND of qs[0..=i+1]
            let ladder = &ancillas[..k - 3];
            let mut steps = Vec::with_capacity(k - 3);
            for (i, &anc) in ladder.iter().enumerate() {
                let first = if i == 0 { qs[0] } else { ladder[i - 1] };
                steps.push((first, qs[i + 1], anc));
            }
            for &(a, b, anc) in &steps {
                lower_ccx(a, b, anc, out);
            }
            let last = if ladder.is_empty() { qs[0] } else { ladder[ladder.len() - 1] };
            out.push(Gate::H(target));
            lower_ccx(last, qs[k - 2], target, out);
            out.push(Gate::H(target));
            for &(a, b, anc) in steps.iter().rev() {
                lower_ccx(a, b, anc, out);
            }
        }
    }
}
