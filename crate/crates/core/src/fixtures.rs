//! Built-in problem fixtures.

use crate::dpi::{encode_circuit_to_dpi, parse_circuit_dsl, CircuitSpec, Dpi};

/// The classic faulty full adder: inputs (1,0,1), observed sum 1 and carry 0.
pub const FULL_ADDER_DSL: &str = "\
circuit fulladder
inputs a b cin
outputs sum carry
gate X1 xor a b
gate X2 xor X1 cin
gate A1 and a b
gate A2 and X1 cin
gate O1 or A1 A2
wire sum = X2
wire carry = O1
obs a=1 b=0 cin=1 sum=1 carry=0
";

pub fn full_adder_circuit() -> CircuitSpec {
    parse_circuit_dsl(FULL_ADDER_DSL).expect("full adder fixture parses")
}

pub fn full_adder() -> Dpi {
    encode_circuit_to_dpi(&full_adder_circuit()).expect("full adder fixture encodes")
}
