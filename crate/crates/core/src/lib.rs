//! Sealing calculus toolkit: security lattices, finite presheaf models of the
//! transparency and sealing modalities, a typechecker for a call-by-push-value
//! language with level-indexed seals, a stage-indexed interpreter, and a
//! property-test harness for noninterference and adequacy.

pub mod harness;
pub mod lattice;
pub mod presheaf;
pub mod semantics;
pub mod syntax;
pub mod typecheck;
