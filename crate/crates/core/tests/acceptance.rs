//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sealc_core::harness::{
    check_adequacy, check_invariants, check_law, check_naturality, check_tini, load_corpus,
    GenConfig, Verdict, LAWS,
};
use sealc_core::lattice::Lattice;
use sealc_core::presheaf::{
    closed_modality, constant_presheaf, enumerate_nat_trans, fracture_check, lift_presheaf,
    open_modality, terminal, validate_presheaf, Limits, Presheaf, RawPresheaf,
};
use sealc_core::semantics::{eval_operational, support, Outcome};
use sealc_core::syntax::{parse_term, parse_type, read_program};
use sealc_core::typecheck::{check_closed, TypeError};

use common::*;

struct Check {
    ok: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Check {
    Check {
        ok: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Check {
    Check {
        ok: false,
        detail: detail.into(),
    }
}

fn program(name: &str) -> (Arc<Lattice>, sealc_core::syntax::Tm) {
    let text = corpus_file(name);
    let src = read_program(&text);
    let lat_name = src
        .lattice_path
        .expect("corpus programs name their lattice");
    let lat = Arc::new(Lattice::from_toml(&corpus_file(&lat_name)).unwrap());
    let t = parse_term(&src.body, &lat).unwrap();
    (lat, t)
}

fn termination_example() -> Check {
    let (lat, cx) = program("cx.dcc");
    let (_, cy) = program("cy.dcc");
    let sx = support(&lat, &cx, 100).unwrap();
    let sy = support(&lat, &cy, 100).unwrap();
    let expected_y = lat.lower_closure_of_names(&["L", "M"]).unwrap();
    let op = eval_operational(&lat, &cy, 10_000).unwrap();
    let detail = format!(
        "support(c x)={} support(c y)={} operational(c y)={}",
        lat.show_open(sx.open),
        lat.show_open(sy.open),
        op.outcome.describe(&lat)
    );
    if sx.open == lat.full_open()
        && sy.open == expected_y
        && matches!(op.outcome, Outcome::OutOfFuel)
    {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn staircase() -> Check {
    let lat = chain();
    let raw = RawPresheaf::from_toml(&corpus_file("staircase.psh")).unwrap();
    let a = validate_presheaf(lat.clone(), &raw).unwrap();
    let u = lat.lower_closure_of_names(&["M"]).unwrap();
    let limits = Limits::default();
    let open = open_modality(u, &a, &limits).unwrap();
    let closed = closed_modality(u, &a);
    let open_closed = open_modality(u, &closed.presheaf, &limits).unwrap();
    let fracture = fracture_check(u, &a, &limits).unwrap();
    let detail = format!(
        "A={:?} ○A={:?} •A={:?} ○•A={:?} fracture={fracture}",
        a.sizes(),
        open.presheaf.sizes(),
        closed.presheaf.sizes(),
        open_closed.presheaf.sizes()
    );
    let ok = a.sizes() == [1, 2, 3, 4]
        && open.presheaf.sizes() == [1, 2, 2, 2]
        && closed.presheaf.sizes() == [1, 1, 3, 4]
        && open_closed.presheaf.sizes() == [1, 1, 1, 1]
        && fracture;
    if ok {
        pass(detail)
    } else {
        fail(detail)
    }
}

/// Every function `0..n → 0..m`, as image vectors.
fn functions(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|f| {
                (0..m).map(move |v| {
                    let mut g = f.clone();
                    g.push(v);
                    g
                })
            })
            .collect();
    }
    out
}

fn all_small_chain_presheaves(lat: &Arc<Lattice>, max: usize) -> Vec<Presheaf> {
    let lv = |n: &str| lat.level(n).unwrap();
    let (l, m, h, g) = (lv("L"), lv("M"), lv("H"), lv("G"));
    let mut out = Vec::new();
    for nl in 0..=max {
        for nm in 0..=max {
            for nh in 0..=max {
                for ng in 0..=max {
                    let mut sizes = [0; 4];
                    sizes[l.index()] = nl;
                    sizes[m.index()] = nm;
                    sizes[h.index()] = nh;
                    sizes[g.index()] = ng;
                    let names: Vec<Vec<String>> = sizes
                        .iter()
                        .map(|&n| (0..n).map(|i| format!("e{i}")).collect())
                        .collect();
                    for gh in functions(ng, nh) {
                        for hm in functions(nh, nm) {
                            for ml in functions(nm, nl) {
                                let maps = vec![(g, h, gh.clone()), (h, m, hm.clone()), (m, l, ml)];
                                out.push(
                                    Presheaf::from_maps(lat.clone(), names.clone(), maps).unwrap(),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn constancy_by_enumeration() -> Check {
    let lat = chain();
    let limits = Limits::default();
    let two = constant_presheaf(&lat, 2);
    let all = all_small_chain_presheaves(&lat, 3);
    let mut maps = 0usize;
    let mut nonconstant = 0usize;
    for l in lat.levels() {
        let u = lat.principal_policy(l);
        for a in &all {
            let sealed = closed_modality(u, a).presheaf;
            for f in enumerate_nat_trans(&sealed, &two, &limits).unwrap() {
                maps += 1;
                if !f.factors_through_terminal(&sealed, &two, &limits).unwrap() {
                    nonconstant += 1;
                }
            }
        }
    }
    let detail = format!(
        "{} presheaves x 4 principal policies, {maps} maps into 2, {nonconstant} nonconstant",
        all.len()
    );
    if nonconstant == 0 && all.len() == 50_018 {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn modal_laws() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x006D_6F64_616C);
    let limits = Limits::default();
    let mut instances = 0;
    let mut violations = Vec::new();
    for lat in [chain(), diamond()] {
        for _ in 0..150 {
            let a = random_presheaf(&lat, &mut rng, 3);
            let b = random_presheaf(&lat, &mut rng, 3);
            let u = random_open(&lat, &mut rng);
            let maps = enumerate_nat_trans(&a, &b, &limits).unwrap_or_default();
            let f =
                (!maps.is_empty()).then(|| &maps[rand::Rng::random_range(&mut rng, 0..maps.len())]);
            violations.extend(modal_law_violations(u, &a, f.map(|f| (f, &b))));
            let (phi, psi) = (random_open(&lat, &mut rng), random_open(&lat, &mut rng));
            violations.extend(action_law_violations(&lat, &a, phi, psi, &mut rng));
            instances += 1;
        }
    }
    let detail = format!(
        "{instances} random (presheaf, open) instances, {} violations",
        violations.len()
    );
    if violations.is_empty() && instances >= 200 {
        pass(detail)
    } else {
        violations.sort();
        violations.dedup();
        fail(format!("{detail}: {}", violations.join(", ")))
    }
}

fn dominance_points() -> Check {
    let lat = chain();
    let sigma = lift_presheaf(&terminal(&lat), &Limits::default()).unwrap();
    let at_top = sigma.size(lat.top());
    let detail = format!("Σ at top has {at_top} elements, lattice has {}", lat.len());
    if at_top == 5 && at_top > lat.len() {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn typechecker_goldens() -> Check {
    let (lat, f) = program("intro_f.dcc");
    let f_ty = parse_type("(U (fn (seal M bool) (F (seal H bool))))", &lat).unwrap();
    let intro = check_closed(&lat, &f, &f_ty, true).is_ok();

    let text = corpus_file("rejected/intro_f_mirror.dcc");
    let mirror = parse_term(&read_program(&text).body, &lat).unwrap();
    let mirror_ty = parse_type("(U (fn (seal H bool) (F (seal M bool))))", &lat).unwrap();
    let rejected = matches!(
        check_closed(&lat, &mirror, &mirror_ty, true),
        Err(TypeError::NotSealed { .. })
    );

    let (_, c) = program("c.dcc");
    let c_ty = parse_type("(U (fn (seal M bool) (F unit)))", &lat).unwrap();
    let c_ok = check_closed(&lat, &c, &c_ty, true).is_ok();

    let detail =
        format!("intro f accepted={intro} mirror rejected NotSealed={rejected} c accepted={c_ok}");
    if intro && rejected && c_ok {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn config(lat: Arc<Lattice>, trials: usize, fuel: u64) -> GenConfig {
    let mut cfg = GenConfig::new(lat);
    cfg.trials = trials;
    cfg.fuel = fuel;
    cfg
}

fn describe(vs: &[Verdict]) -> String {
    vs.iter()
        .map(|v| {
            format!(
                "{}[{}] n={} fail={} conv={:.1}%{}",
                v.property,
                v.lattice,
                v.trials,
                v.failures.len(),
                100.0 * v.stats.convergence_rate,
                if v.inconclusive { " inconclusive" } else { "" }
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn verdicts(vs: Vec<Verdict>) -> Check {
    for v in &vs {
        for f in &v.failures {
            eprintln!(
                "  {} trial {}: {} :: {}",
                v.property, f.trial, f.message, f.term
            );
        }
    }
    let detail = describe(&vs);
    if vs.iter().all(|v| v.passed) {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn tini_suite() -> Check {
    let mut vs = Vec::new();
    for lat in [chain(), diamond()] {
        let cfg = config(lat.clone(), 1000, 1000);
        for l in lat.levels().filter(|&l| l != lat.top()) {
            vs.push(check_tini(&cfg, l).unwrap());
        }
    }
    verdicts(vs)
}

fn adequacy_suite() -> Check {
    let lat = chain();
    let corpus = load_corpus(&corpus_dir(), &lat).unwrap();
    let mut vs = vec![check_adequacy(&config(lat, 1000, 1000), &corpus).unwrap()];
    vs.push(check_adequacy(&config(diamond(), 1000, 1000), &[]).unwrap());
    let corpus_count = corpus.len();
    let mut out = verdicts(vs);
    out.detail = format!("corpus of {corpus_count} programs; {}", out.detail);
    out
}

fn invariant_suite() -> Check {
    let mut vs = Vec::new();
    for lat in [chain(), diamond()] {
        let cfg = config(lat, 1000, 1000);
        vs.push(check_invariants(&cfg).unwrap());
        vs.push(check_naturality(&cfg).unwrap());
    }
    verdicts(vs)
}

fn law_suite() -> Check {
    let mut vs = Vec::new();
    for lat in [chain(), diamond()] {
        let cfg = config(lat, 200, 1000);
        for law in LAWS {
            vs.push(check_law(&cfg, law).unwrap());
        }
    }
    let failed: Vec<String> = vs
        .iter()
        .filter(|v| !v.passed)
        .map(|v| format!("{}[{}]", v.property, v.lattice))
        .collect();
    let ok = failed.is_empty();
    for v in &vs {
        for f in &v.failures {
            eprintln!(
                "  {} trial {}: {} :: {}",
                v.property, f.trial, f.message, f.term
            );
        }
    }
    let detail = format!(
        "{} laws x 2 lattices x 200 instances; failing: {}",
        LAWS.len(),
        if ok {
            "none".to_string()
        } else {
            failed.join(", ")
        }
    );
    if ok {
        pass(detail)
    } else {
        fail(detail)
    }
}

type Criterion = (u32, &'static str, Duration, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            1,
            "termination example",
            Duration::from_secs(1),
            termination_example,
        ),
        (2, "modality shapes", Duration::from_secs(1), staircase),
        (
            3,
            "constancy by enumeration",
            Duration::from_secs(30),
            constancy_by_enumeration,
        ),
        (4, "modal laws", Duration::MAX, modal_laws),
        (5, "dominance cardinality", Duration::MAX, dominance_points),
        (6, "typechecker goldens", Duration::MAX, typechecker_goldens),
        (7, "noninterference", Duration::from_secs(300), tini_suite),
        (8, "adequacy", Duration::MAX, adequacy_suite),
        (9, "interpreter invariants", Duration::MAX, invariant_suite),
        (10, "equational laws", Duration::MAX, law_suite),
    ];
    let mut failed = 0;
    for (n, name, budget, run) in criteria {
        let start = Instant::now();
        let mut out = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            fail(format!("aborted: {msg}"))
        });
        let took = start.elapsed();
        if took > budget {
            out.ok = false;
            out.detail = format!("{} (over the {:?} budget)", out.detail, budget);
        }
        if !out.ok {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {:<4} {name} ({:.2}s): {}",
            if out.ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
