//! Model-based diagnosis under the weak fault model.
//!
//! - [`dpi`]: problem instances, the circuit DSL, JSON I/O and brute-force oracles
//! - [`reasoner`]: DPLL consistency checking with call accounting
//! - [`msmp`]: minimal conflict / minimal diagnosis extraction
//! - [`hitting_set`]: best-first diagnosis search, sampling and randomized optimization
//! - [`sequential`]: query-based sequential diagnosis sessions

pub mod dpi;
pub mod fixtures;
pub mod hitting_set;
pub mod msmp;
pub mod reasoner;
pub mod sequential;

pub use dpi::{ComponentId, Dpi, WireValue};
pub use msmp::{Conflict, Diagnosis};
