//! Property directed reachability for generalized Petri nets.
//!
//! The engine decides (semi-decides) whether a linear predicate over place
//! markings is an invariant of a marked net. It answers with an inductive
//! linear certificate, a replayable counter-example trace, or an honest
//! "unknown" when a budget runs out.

pub mod encoding;
pub mod formula;
pub mod generate;
pub mod io;
pub mod oracle;
pub mod pdr;
pub mod petri;
pub mod smt;

pub use formula::{Atom, Clause, Cube, FormulaError, LinearExpr, Predicate, Rel, Var};
pub use petri::{Delta, FiringSequence, Marking, Net, PetriError, TransitionId};
