//! Modal and action laws on random small presheaves over the chain and the
//! diamond.

mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sealc_core::lattice::Lattice;
use sealc_core::presheaf::{
    closed_modality, constant_presheaf, enumerate_nat_trans, fracture_check, lift_presheaf, Limits,
    Presheaf,
};

use common::*;

fn setup(seed: u64, diamond_side: bool, max: usize) -> (Arc<Lattice>, ChaCha8Rng, Presheaf) {
    let lat = if diamond_side { diamond() } else { chain() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_presheaf(&lat, &mut rng, max);
    (lat, rng, a)
}

fn is_functorial(p: &Presheaf) -> bool {
    let lat = p.lattice();
    lat.levels().all(|l| {
        (0..p.size(l)).all(|x| p.restrict(l, l, x) == x)
            && lat.levels().filter(|&k| lat.leq(k, l)).all(|k| {
                lat.levels().filter(|&j| lat.leq(j, k)).all(|j| {
                    (0..p.size(l))
                        .all(|x| p.restrict(k, j, p.restrict(l, k, x)) == p.restrict(l, j, x))
                })
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monad_laws_hold(seed in any::<u64>(), d in any::<bool>()) {
        let (lat, mut rng, a) = setup(seed, d, 3);
        let b = random_presheaf(&lat, &mut rng, 3);
        let u = random_open(&lat, &mut rng);
        let maps = enumerate_nat_trans(&a, &b, &Limits::default()).unwrap();
        let f = (!maps.is_empty()).then(|| &maps[rng.random_range(0..maps.len())]);
        let bad = modal_law_violations(u, &a, f.map(|f| (f, &b)));
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }

    #[test]
    fn fracture_always_holds(seed in any::<u64>(), d in any::<bool>()) {
        let (lat, _, a) = setup(seed, d, 4);
        for u in lat.enumerate_opens(1 << 10).unwrap() {
            prop_assert!(fracture_check(u, &a, &Limits::default()).unwrap(), "U = {}", lat.show_open(u));
        }
    }

    #[test]
    fn stabilizer_is_a_monoid_action(seed in any::<u64>(), d in any::<bool>()) {
        let (lat, mut rng, a) = setup(seed, d, 3);
        let (phi, psi) = (random_open(&lat, &mut rng), random_open(&lat, &mut rng));
        let bad = action_law_violations(&lat, &a, phi, psi, &mut rng);
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }

    #[test]
    fn lift_is_a_presheaf(seed in any::<u64>(), d in any::<bool>()) {
        let (_, _, a) = setup(seed, d, 2);
        let lifted = lift_presheaf(&a, &Limits::default()).unwrap();
        prop_assert!(is_functorial(&lifted));
    }

    #[test]
    fn maps_out_of_sealed_presheaves_are_constant_on_the_diamond(seed in any::<u64>()) {
        let (lat, _, a) = setup(seed, true, 3);
        let two = constant_presheaf(&lat, 2);
        let limits = Limits::default();
        for l in lat.levels() {
            let sealed = closed_modality(lat.principal_policy(l), &a).presheaf;
            for f in enumerate_nat_trans(&sealed, &two, &limits).unwrap() {
                prop_assert!(f.factors_through_terminal(&sealed, &two, &limits).unwrap());
            }
        }
    }
}
