use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{OracleBindings, SimError, Statevector};
use crate::circuit::Circuit;

/// Registers up to this many qubits are checked on every basis state.
pub const EXHAUSTIVE_LIMIT: usize = 14;
const RANDOM_INPUTS: u64 = 64;
const RANDOM_SEED: u64 = 0x5eed;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum EquivMode {
    Exact,
    /// One global phase, fixed on the first input, is allowed.
    GlobalPhase,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum EquivDomain {
    /// Every state of the (shared) register.
    Full,
    /// Main-register inputs with every ancilla |0⟩. The circuits may have
    /// different ancilla counts; the narrower output is padded with |0⟩
    /// ancillas, so leftover ancilla garbage counts as deviation.
    ZeroAncilla,
}

#[derive(Copy, Clone, Debug)]
pub struct EquivOptions {
    pub tol: f64,
    pub mode: EquivMode,
    pub domain: EquivDomain,
}

impl Default for EquivOptions {
    fn default() -> Self {
        EquivOptions { tol: 1e-9, mode: EquivMode::Exact, domain: EquivDomain::Full }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivReport {
    pub equivalent: bool,
    /// Largest ℓ2 distance between the two outputs over the checked inputs.
    pub max_deviation: f64,
    pub inputs_checked: usize,
    pub exhaustive: bool,
}

/// Compares two circuits by simulating both on a set of inputs: every basis
/// state when the input register has at most 14 qubits, otherwise 64 fixed
/// pseudo-random states.
pub fn unitary_equiv(
    a: &Circuit,
    b: &Circuit,
    oracles: &OracleBindings,
    opts: EquivOptions,
) -> Result<EquivReport, SimError> {
    if a.num_main() != b.num_main() {
        return Err(SimError::RegisterMismatch(format!("{} vs {} main qubits", a.num_main(), b.num_main())));
    }
    let input_width = match opts.domain {
        EquivDomain::Full => {
            if a.num_qubits() != b.num_qubits() {
                return Err(SimError::RegisterMismatch(format!(
                    "{} vs {} qubits",
                    a.num_qubits(),
                    b.num_qubits()
                )));
            }
            a.num_qubits()
        }
        EquivDomain::ZeroAncilla => a.num_main(),
    };
    let exhaustive = input_width <= EXHAUSTIVE_LIMIT;
    let count = if exhaustive { 1u64 << input_width } else { RANDOM_INPUTS };

    let make_input = |i: u64| -> Result<Statevector, SimError> {
        if exhaustive {
            Statevector::basis(input_width, i as usize)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SEED);
            rng.set_stream(i);
            Statevector::random(input_width, &mut rng)
        }
    };
    let run = |input: &Statevector, c: &Circuit| -> Result<Statevector, SimError> {
        let mut s = input.with_zero_ancillas(c.num_qubits() - input_width)?;
        s.apply_circuit(c, oracles)?;
        Ok(s)
    };
    let width = a.num_qubits().max(b.num_qubits());
    let outputs = |i: u64| -> Result<(Statevector, Statevector), SimError> {
        let input = make_input(i)?;
        let oa = run(&input, a)?.with_zero_ancillas(width - a.num_qubits())?;
        let ob = run(&input, b)?.with_zero_ancillas(width - b.num_qubits())?;
        Ok((oa, ob))
    };

    let phase = match opts.mode {
        EquivMode::Exact => Complex64::new(1.0, 0.0),
        EquivMode::GlobalPhase => {
            let (oa, ob) = outputs(0)?;
            let overlap = ob.inner(&oa);
            if overlap.norm() < 1e-12 {
                Complex64::new(1.0, 0.0)
            } else {
                overlap / overlap.norm()
            }
        }
    };
    let deviations: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (oa, ob) = outputs(i)?;
            Ok(oa.amplitudes().iter().zip(ob.amplitudes()).map(|(x, y)| (x - phase * y).norm_sqr()).sum::<f64>().sqrt())
        })
        .collect::<Result<_, SimError>>()?;
    let max_deviation = deviations.into_iter().fold(0.0, f64::max);
    Ok(EquivReport { equivalent: max_deviation <= opts.tol, max_deviation, inputs_checked: count as usize, exhaustive })
}
