//! Lattice laws on random finite lattices.
//!
//! A family of subsets of a small set that is closed under intersection and
//! contains the whole set is a lattice under inclusion, with intersection as
//! meet. That gives both the random input and an independent oracle.

use proptest::prelude::*;

use sealc_core::lattice::{open_meet, permits, Lattice, Level};

#[derive(Debug)]
struct Model {
    lat: Lattice,
    sets: Vec<u8>,
}

impl Model {
    fn leq(&self, a: Level, b: Level) -> bool {
        let (x, y) = (self.sets[a.index()], self.sets[b.index()]);
        x & !y == 0
    }
}

fn build(seeds: Vec<u8>) -> Model {
    let mut sets: Vec<u8> = vec![0x1f];
    sets.extend(seeds.iter().map(|s| s & 0x1f));
    sets.sort_unstable();
    sets.dedup();
    loop {
        let mut grown = sets.clone();
        for &a in &sets {
            for &b in &sets {
                grown.push(a & b);
            }
        }
        grown.sort_unstable();
        grown.dedup();
        if grown.len() == sets.len() {
            break;
        }
        sets = grown;
    }
    let name = |s: u8| format!("s{s}");
    let elements: Vec<String> = sets.iter().map(|&s| name(s)).collect();
    let mut order = Vec::new();
    for &a in &sets {
        for &b in &sets {
            if a != b && a & !b == 0 {
                order.push(format!("[\"{}\", \"{}\"]", name(a), name(b)));
            }
        }
    }
    let text = format!(
        "elements = [{}]\norder = [{}]\n",
        elements
            .iter()
            .map(|e| format!("\"{e}\""))
            .collect::<Vec<_>>()
            .join(", "),
        order.join(", ")
    );
    let lat = Lattice::from_toml(&text).expect("intersection-closed families are lattices");
    // the lattice keeps the element order of the file
    Model { lat, sets }
}

fn model() -> impl Strategy<Value = Model> {
    proptest::collection::vec(any::<u8>(), 0..5).prop_map(build)
}

proptest! {
    #[test]
    fn meet_is_intersection(m in model()) {
        for a in m.lat.levels() {
            for b in m.lat.levels() {
                let meet = m.lat.meet(a, b);
                prop_assert_eq!(m.sets[meet.index()], m.sets[a.index()] & m.sets[b.index()]);
                prop_assert_eq!(m.lat.leq(a, b), m.leq(a, b));
            }
        }
    }

    #[test]
    fn principal_policy_preserves_meets(m in model()) {
        let lat = &m.lat;
        for l in lat.levels() {
            for k in lat.levels() {
                prop_assert_eq!(
                    lat.principal_policy(lat.meet(l, k)),
                    open_meet(lat.principal_policy(l), lat.principal_policy(k))
                );
            }
        }
    }

    #[test]
    fn principal_policy_permits_exactly_the_levels_below(m in model()) {
        let lat = &m.lat;
        for l in lat.levels() {
            for k in lat.levels() {
                let up_k = lat.principal_filter(k);
                prop_assert_eq!(permits(lat.principal_policy(l), up_k), m.leq(k, l));
            }
        }
    }

    #[test]
    fn filter_enumeration_matches_rescan(m in model()) {
        let lat = &m.lat;
        let n = lat.len();
        let found: Vec<u64> = lat.enumerate_filters(1 << 20).unwrap().iter().map(|f| f.bits()).collect();
        let levels: Vec<Level> = lat.levels().collect();
        for bits in 0u64..(1 << n) {
            let has = |l: Level| bits & (1 << l.index()) != 0;
            let nonempty = bits != 0;
            let upward = levels.iter().all(|&a| !has(a) || levels.iter().all(|&b| !m.leq(a, b) || has(b)));
            let meets = levels.iter().all(|&a| levels.iter().all(|&b| {
                !(has(a) && has(b)) || levels.iter().any(|&c| has(c) && m.sets[c.index()] == m.sets[a.index()] & m.sets[b.index()])
            }));
            prop_assert_eq!(found.contains(&bits), nonempty && upward && meets, "subset {:b}", bits);
        }
    }

    #[test]
    fn every_returned_open_is_downward_closed(m in model(), picks in proptest::collection::vec(any::<prop::sample::Index>(), 0..4)) {
        let lat = &m.lat;
        let levels: Vec<Level> = lat.levels().collect();
        let chosen: Vec<Level> = picks.iter().map(|i| levels[i.index(levels.len())]).collect();
        let mut opens = lat.enumerate_opens(1 << 20).unwrap();
        opens.push(lat.lower_closure(chosen).unwrap());
        opens.extend(levels.iter().map(|&l| lat.principal_policy(l)));
        let within = *opens.last().unwrap();
        opens.extend(lat.opens_below(within));
        for u in opens {
            for a in u.members() {
                for &b in &levels {
                    prop_assert!(!m.leq(b, a) || u.contains(b));
                }
            }
        }
    }
}
