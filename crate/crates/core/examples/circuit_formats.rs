//! Text, JSON and QASM forms of a circuit, gate counts and lowering.

use searchkit::circuit::{
    count_gates, decompose_to_basic, parse_text, to_json, to_qasm, to_text, AncillaPolicy, Circuit, CountLevel, Gate,
    Qubit,
};

fn main() {
    let mut c = Circuit::new(3, 0);
    c.push(Gate::H(Qubit(0)));
    c.push(Gate::ccx(Qubit(0), Qubit(1), Qubit(2)));
    c.push(Gate::Diffuser(vec![Qubit(0), Qubit(1), Qubit(2)]));
    let text = to_text(&c);
    print!("{text}");
    assert_eq!(parse_text(&text).unwrap(), c);
    println!("{}", to_json(&c));

    for level in [CountLevel::Logical, CountLevel::Basic] {
        let r = count_gates(&c, level);
        println!("{level:?}: {:?} (basic equivalent {})", r.per_kind, r.basic_equivalent);
    }
    let basic = decompose_to_basic(&c, &AncillaPolicy::Allocate).unwrap();
    println!("lowered to {} basic gates on {} qubits", basic.len(), basic.num_qubits());
    print!("{}", to_qasm(&basic).unwrap());
}
