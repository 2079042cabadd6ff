//! Lattices and programs compiled into the binary, so `demo` and the default
//! adequacy corpus work without a checkout.

use std::sync::Arc;

use sealc_core::harness::CorpusEntry;
use sealc_core::lattice::Lattice;
use sealc_core::syntax::read_program;

pub const CHAIN4: &str = include_str!("../../core/corpus/chain4.lat");
pub const DIAMOND: &str = include_str!("../../core/corpus/diamond.lat");

pub const C: &str = include_str!("../../core/corpus/c.dcc");
pub const CX: &str = include_str!("../../core/corpus/cx.dcc");
pub const CY: &str = include_str!("../../core/corpus/cy.dcc");
pub const INTRO_F: &str = include_str!("../../core/corpus/intro_f.dcc");
pub const INTRO_F_MIRROR: &str = include_str!("../../core/corpus/rejected/intro_f_mirror.dcc");

const PROGRAMS: [(&str, &str); 11] = [
    ("c.dcc", C),
    ("cx.dcc", CX),
    ("cy.dcc", CY),
    (
        "diamond_c.dcc",
        include_str!("../../core/corpus/diamond_c.dcc"),
    ),
    (
        "diamond_cross.dcc",
        include_str!("../../core/corpus/diamond_cross.dcc"),
    ),
    ("intro_f.dcc", INTRO_F),
    (
        "pcf_case.dcc",
        include_str!("../../core/corpus/pcf_case.dcc"),
    ),
    (
        "pcf_diverge.dcc",
        include_str!("../../core/corpus/pcf_diverge.dcc"),
    ),
    (
        "pcf_loop_exit.dcc",
        include_str!("../../core/corpus/pcf_loop_exit.dcc"),
    ),
    ("pcf_not.dcc", include_str!("../../core/corpus/pcf_not.dcc")),
    (
        "pcf_pair.dcc",
        include_str!("../../core/corpus/pcf_pair.dcc"),
    ),
];

pub fn chain4() -> Arc<Lattice> {
    Arc::new(Lattice::from_toml(CHAIN4).expect("bundled chain lattice is valid"))
}

pub fn diamond() -> Arc<Lattice> {
    Arc::new(Lattice::from_toml(DIAMOND).expect("bundled diamond lattice is valid"))
}

/// The bundled lattice a program header names, by file name.
pub fn lattice_named(path: &str) -> Option<Arc<Lattice>> {
    match path.rsplit('/').next()? {
        "chain4.lat" => Some(chain4()),
        "diamond.lat" => Some(diamond()),
        _ => None,
    }
}

/// Every bundled well-typed program, each with the lattice its header names.
pub fn corpus() -> Vec<CorpusEntry> {
    PROGRAMS
        .iter()
        .map(|(name, source)| {
            let header = read_program(source).lattice_path;
            let lattice = header
                .as_deref()
                .and_then(lattice_named)
                .unwrap_or_else(chain4);
            CorpusEntry {
                name: name.to_string(),
                lattice,
                source: source.to_string(),
            }
        })
        .collect()
}
