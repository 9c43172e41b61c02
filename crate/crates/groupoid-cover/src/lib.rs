//! Finite groupoids, simplicial groupoids over a finite base, binding groupoids of
//! finite covers, and the functors relating the two sides.

pub mod binding;
pub mod cli;
pub mod error;
pub mod exact_seq;
pub mod fixtures;
pub mod functors;
pub mod groupoid;
pub mod io;
pub mod map;
pub mod name;
pub mod report;
pub mod simplicial;
pub mod structure;

pub use error::{Error, Result};
pub use groupoid::{ConcreteGroupoid, GroupoidMorphismSet};
pub use map::{Arrow, ArrowSet, FnMap};
pub use name::{Elem, Label, Name};
pub use report::ValidationReport;

/// Relation lattices over machine integers and over big integers.
pub type Lattice = exact_seq::RelationLattice<i64>;
pub type BigLattice = exact_seq::RelationLattice<num_bigint::BigInt>;
pub type Presentation = exact_seq::AbelianPresentation<i64>;
