#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use sealc_core::lattice::{Lattice, Level, Open};
use sealc_core::presheaf::{
    closed_map, closed_modality, open_map, open_modality, stabilizer_action, Limits, NatTrans,
    PartialElement, Presheaf,
};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus_file(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap()
}

pub fn chain() -> Arc<Lattice> {
    Arc::new(Lattice::from_toml(&corpus_file("chain4.lat")).unwrap())
}

pub fn diamond() -> Arc<Lattice> {
    Arc::new(Lattice::from_toml(&corpus_file("diamond.lat")).unwrap())
}

/// Pairs `(l, k)` with `k` immediately below `l`.
pub fn covers(lat: &Lattice) -> Vec<(Level, Level)> {
    let mut out = Vec::new();
    for l in lat.levels() {
        for k in lat.levels().filter(|&k| k != l && lat.leq(k, l)) {
            let between = lat
                .levels()
                .any(|m| m != l && m != k && lat.leq(k, m) && lat.leq(m, l));
            if !between {
                out.push((l, k));
            }
        }
    }
    out
}

/// A random presheaf with carriers of size `1..=max`, built from random maps
/// along covering pairs and retried until the composites agree.
pub fn random_presheaf(lat: &Arc<Lattice>, rng: &mut impl Rng, max: usize) -> Presheaf {
    let edges = covers(lat);
    loop {
        let sizes: Vec<usize> = lat.levels().map(|_| rng.random_range(1..=max)).collect();
        let names = sizes
            .iter()
            .map(|&n| (0..n).map(|i| format!("e{i}")).collect())
            .collect();
        let maps = edges
            .iter()
            .map(|&(l, k)| {
                let img = (0..sizes[l.index()])
                    .map(|_| rng.random_range(0..sizes[k.index()]))
                    .collect();
                (l, k, img)
            })
            .collect();
        if let Ok(p) = Presheaf::from_maps(lat.clone(), names, maps) {
            return p;
        }
    }
}

pub fn random_open(lat: &Lattice, rng: &mut impl Rng) -> Open {
    let opens = lat.enumerate_opens(1 << 20).unwrap();
    opens[rng.random_range(0..opens.len())]
}

/// Every law of the two idempotent monads at `(u, a)`, plus naturality of
/// their units along `f : a → b`. Returns the names of violated laws.
pub fn modal_law_violations(
    u: Open,
    a: &Presheaf,
    f: Option<(&NatTrans, &Presheaf)>,
) -> Vec<&'static str> {
    let limits = Limits::default();
    let mut bad = Vec::new();

    let oa = open_modality(u, a, &limits).unwrap();
    let ooa = open_modality(u, &oa.presheaf, &limits).unwrap();
    let oooa = open_modality(u, &ooa.presheaf, &limits).unwrap();
    if !ooa.unit.is_levelwise_bijection(&oa.presheaf, &ooa.presheaf) {
        bad.push("open idempotence");
    } else {
        let mu = ooa.unit.inverse().unwrap();
        let mu_o = oooa.unit.inverse().unwrap();
        let id = NatTrans::identity(&oa.presheaf);
        if !mu.is_natural(&ooa.presheaf, &oa.presheaf) {
            bad.push("open multiplication natural");
        }
        let o_eta = open_map(u, &oa.unit, a, &oa.presheaf, &limits).unwrap();
        if o_eta.compose(&mu) != id || ooa.unit.compose(&mu) != id {
            bad.push("open unit laws");
        }
        let o_mu = open_map(u, &mu, &ooa.presheaf, &oa.presheaf, &limits).unwrap();
        if o_mu.compose(&mu) != mu_o.compose(&mu) {
            bad.push("open associativity");
        }
    }

    let ca = closed_modality(u, a);
    let cca = closed_modality(u, &ca.presheaf);
    let ccca = closed_modality(u, &cca.presheaf);
    if !cca.unit.is_levelwise_bijection(&ca.presheaf, &cca.presheaf) {
        bad.push("closed idempotence");
    } else {
        let mu = cca.unit.inverse().unwrap();
        let mu_c = ccca.unit.inverse().unwrap();
        let id = NatTrans::identity(&ca.presheaf);
        let c_eta = closed_map(u, &ca.unit, a);
        if c_eta.compose(&mu) != id || cca.unit.compose(&mu) != id {
            bad.push("closed unit laws");
        }
        let c_mu = closed_map(u, &mu, &cca.presheaf);
        if c_mu.compose(&mu) != mu_c.compose(&mu) {
            bad.push("closed associativity");
        }
    }

    let oca = open_modality(u, &ca.presheaf, &limits).unwrap();
    if oca.presheaf.sizes().iter().any(|&n| n != 1) {
        bad.push("transparent part of a sealed presheaf is trivial");
    }

    if let Some((f, b)) = f {
        let ob = open_modality(u, b, &limits).unwrap();
        let of = open_map(u, f, a, b, &limits).unwrap();
        if oa.unit.compose(&of) != f.compose(&ob.unit) {
            bad.push("open unit natural");
        }
        let cb = closed_modality(u, b);
        let cf = closed_map(u, f, a);
        if ca.unit.compose(&cf) != f.compose(&cb.unit) {
            bad.push("closed unit natural");
        }
    }
    bad
}

/// The two action laws for `phi`, `psi` on a random partial element of a
/// presheaf sealed on `phi ∨ psi`.
pub fn action_law_violations(
    lat: &Arc<Lattice>,
    base: &Presheaf,
    phi: Open,
    psi: Open,
    rng: &mut impl Rng,
) -> Vec<&'static str> {
    let limits = Limits::default();
    let sealed = closed_modality(phi.join(psi), base).presheaf;
    let support = random_open(lat, rng);
    let families = sealed.matching_families(support, &limits).unwrap();
    if families.is_empty() {
        return vec![];
    }
    let a = PartialElement {
        support,
        family: families[rng.random_range(0..families.len())].clone(),
    };
    let mut bad = Vec::new();
    if stabilizer_action(Open::EMPTY, &a, &sealed).unwrap() != a {
        bad.push("empty action");
    }
    let joint = stabilizer_action(phi.join(psi), &a, &sealed).unwrap();
    let inner = stabilizer_action(psi, &a, &sealed).unwrap();
    let stepwise = stabilizer_action(phi, &inner, &sealed).unwrap();
    if joint != stepwise {
        bad.push("join action");
    }
    bad
}
