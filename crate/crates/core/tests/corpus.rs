//! Golden results for every bundled program.

mod common;

use std::sync::Arc;

use sealc_core::harness::load_corpus;
use sealc_core::lattice::Lattice;
use sealc_core::semantics::{
    apply_stage, eval_operational, eval_stage, restrict_value, support, Outcome, Value,
};
use sealc_core::syntax::{alpha_eq, parse_term, print_term, read_program, Tm};
use sealc_core::typecheck::infer_closed;

use common::*;

const FUEL: u64 = 500;

fn load(name: &str) -> (Arc<Lattice>, Tm) {
    let src = read_program(&corpus_file(name));
    let lat = match src.lattice_path.as_deref() {
        Some("diamond.lat") => diamond(),
        _ => chain(),
    };
    let t = parse_term(&src.body, &lat).unwrap();
    (lat, t)
}

/// Displayed result at each stage, in lattice order; `None` for out of fuel.
fn stage_results(lat: &Lattice, t: &Tm) -> Vec<Option<String>> {
    lat.levels()
        .map(|k| match eval_stage(lat, t, k, FUEL).unwrap().outcome {
            Outcome::Converged(v) => Some(v.display(lat).to_string()),
            Outcome::OutOfFuel => None,
        })
        .collect()
}

fn some(xs: &[&str]) -> Vec<Option<String>> {
    xs.iter().map(|s| Some(s.to_string())).collect()
}

#[test]
fn every_program_parses_prints_and_typechecks() {
    let entries = load_corpus(&corpus_dir(), &chain()).unwrap();
    assert_eq!(entries.len(), 11);
    for e in entries {
        let t = parse_term(&read_program(&e.source).body, &e.lattice).unwrap();
        let printed = print_term(&t, &e.lattice);
        let back = parse_term(&printed, &e.lattice).unwrap();
        assert!(alpha_eq(&t, &back), "{}: {printed}", e.name);
        // the bare function c only checks; everything else infers
        if e.name != "c.dcc" {
            infer_closed(&e.lattice, &t, true).unwrap_or_else(|err| panic!("{}: {err}", e.name));
        }
    }
}

#[test]
fn termination_example_goldens() {
    let (lat, cx) = load("cx.dcc");
    let (_, cy) = load("cy.dcc");
    assert_eq!(stage_results(&lat, &cx), some(&["()", "()", "()", "()"]));
    assert_eq!(
        stage_results(&lat, &cy),
        vec![Some("()".into()), Some("()".into()), None, None]
    );
    let op = eval_operational(&lat, &cx, FUEL).unwrap();
    assert_eq!(
        op.outcome.converged().map(|v| v.display(&lat).to_string()),
        Some("()".into())
    );
}

#[test]
fn diamond_termination_support_is_bottom_and_a() {
    let (lat, t) = load("diamond_c.dcc");
    let s = support(&lat, &t, FUEL).unwrap();
    assert_eq!(s.open, lat.lower_closure_of_names(&["a"]).unwrap());
    assert!(!eval_operational(&lat, &t, FUEL)
        .unwrap()
        .outcome
        .is_converged());
}

#[test]
fn incomparable_seal_is_visible_across() {
    let (lat, t) = load("diamond_cross.dcc");
    // redacted exactly at the stages below b
    assert_eq!(
        stage_results(&lat, &t),
        some(&["(seal b ★)", "(seal b ())", "(seal b ★)", "(seal b ())"])
    );
}

#[test]
fn pure_programs_are_stage_independent() {
    let cases = [
        ("pcf_not.dcc", Some("ff")),
        ("pcf_case.dcc", Some("tt")),
        ("pcf_pair.dcc", Some("(pair ff tt)")),
        ("pcf_loop_exit.dcc", Some("ff")),
        ("pcf_diverge.dcc", None),
    ];
    for (name, expected) in cases {
        let (lat, t) = load(name);
        let expected = expected.map(str::to_string);
        assert_eq!(stage_results(&lat, &t), vec![expected.clone(); 4], "{name}");
        let op = eval_operational(&lat, &t, FUEL).unwrap();
        assert_eq!(
            op.outcome.converged().map(|v| v.display(&lat).to_string()),
            expected,
            "{name}"
        );
    }
}

#[test]
fn loop_exit_spends_fuel_only_on_unrolling() {
    let (lat, t) = load("pcf_loop_exit.dcc");
    for k in lat.levels() {
        assert_eq!(eval_stage(&lat, &t, k, FUEL).unwrap().fuel_used, 2);
    }
    assert_eq!(eval_operational(&lat, &t, FUEL).unwrap().fuel_used, 2);
    let starved = eval_stage(&lat, &t, lat.top(), 1).unwrap();
    assert!(!starved.outcome.is_converged());
}

#[test]
fn intro_function_is_noninterfering_below_high() {
    let (lat, f) = load("intro_f.dcc");
    let m = lat.level("M").unwrap();
    let results = |input: bool| -> Vec<String> {
        let whole = Value::sealed(m, if input { Value::tt() } else { Value::ff() });
        lat.levels()
            .map(|k| {
                let arg = restrict_value(&lat, &whole, k).unwrap();
                let run = apply_stage(&lat, &f, arg, k, FUEL).unwrap();
                run.outcome.converged().unwrap().display(&lat).to_string()
            })
            .collect()
    };
    assert_eq!(
        results(true),
        ["(seal H ★)", "(seal H ★)", "(seal H ★)", "(seal H ff)"]
    );
    assert_eq!(
        results(false),
        ["(seal H ★)", "(seal H ★)", "(seal H ★)", "(seal H tt)"]
    );
}
