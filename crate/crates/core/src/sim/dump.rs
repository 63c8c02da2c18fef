use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Statevector;

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    num_qubits: usize,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<stem>.bin` (little-endian interleaved re/im f64) and
/// `<stem>.json` (`{"num_qubits": n}`).
pub fn write_dump(state: &Statevector, stem: &Path) -> io::Result<()> {
    let mut bytes = Vec::with_capacity(16 * state.amplitudes().len());
    for a in state.amplitudes() {
        bytes.extend_from_slice(&a.re.to_le_bytes());
        bytes.extend_from_slice(&a.im.to_le_bytes());
    }
    fs::write(with_ext(stem, "bin"), bytes)?;
    let header = serde_json::to_string(&DumpHeader { num_qubits: state.num_qubits() })?;
    fs::write(with_ext(stem, "json"), header)
}

pub fn read_dump(stem: &Path) -> io::Result<Statevector> {
    let header: DumpHeader = serde_json::from_str(&fs::read_to_string(with_ext(stem, "json"))?)?;
    let bytes = fs::read(with_ext(stem, "bin"))?;
    if bytes.len() != 16 << header.num_qubits {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "amplitude file length does not match header"));
    }
    let amps = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Statevector::from_amplitudes(amps).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// `index,bits,probability` rows for every basis state.
pub fn probability_csv(state: &Statevector) -> String {
    let n = state.num_qubits();
    let mut out = String::from("index,bits,probability\n");
    for (i, a) in state.amplitudes().iter().enumerate() {
        writeln!(out, "{i},{:0width$b},{}", i, a.norm_sqr(), width = n).unwrap();
    }
    out
}
