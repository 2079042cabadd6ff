//! Property-test engine.
//!
//! Programs are generated type-directed, so every generated term typechecks
//! by construction (and is re-checked before use). Each trial draws from its
//! own ChaCha8 stream selected by the trial index, so a verdict depends only
//! on the configuration and seed, never on how rayon schedules trials.

use std::path::Path;
use std::rc::Rc;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{Lattice, LatticeError, Level};
use crate::presheaf::{self, Limits};
use crate::semantics::{
    apply_stage, enumerate_values, eval_open_value, eval_operational, eval_stage, restrict_value,
    support, type_presheaf, value_eq, EvalError, Outcome, Value,
};
use crate::syntax::{
    parse_term, print_term, print_type, read_program, shift, subst_top, CompType, Name, ParseError,
    Term, Tm, ValueType,
};
use crate::typecheck::{check_closed, infer_closed, sealed_judgement};

pub const DEFAULT_SEED: u64 = 0x5EA1_C0DE;

/// Fuel added to one side of an equation before declaring a mismatch.
pub const LAW_FUEL_SLACK: u64 = 4;

/// Converging-pair rate below which a noninterference run is inconclusive.
pub const MIN_CONVERGENCE_RATE: f64 = 0.05;

pub const BANNER: &str = "Equality here is interpreter equality at first-order \
observations. It stands in for the equational theory only at F bool and F unit, \
where adequacy relates the two.";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot generate a term of type {target} within {size} nodes")]
    GenerationExhausted { target: String, size: usize },
    #[error("no transparent result type available at level {0}")]
    NoTransparentType(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {source}")]
    Lattice {
        path: String,
        #[source]
        source: LatticeError,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Relative frequencies of the generator's productions.
#[derive(Debug, Clone, Serialize)]
pub struct Weights {
    pub var: u32,
    pub intro: u32,
    pub bind: u32,
    pub fix: u32,
    pub app: u32,
    pub case: u32,
    pub seal: u32,
    pub unseal: u32,
    pub tdcl: u32,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            var: 6,
            intro: 4,
            bind: 3,
            fix: 2,
            app: 2,
            case: 3,
            seal: 3,
            unseal: 4,
            tdcl: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    /// Upper bound on AST nodes per generated term.
    pub size: usize,
    pub fuel: u64,
    pub trials: usize,
    pub lattice: Arc<Lattice>,
    /// Levels the generator may put on seal, unseal and tdcl.
    pub levels: Vec<Level>,
    pub weights: Weights,
}

impl GenConfig {
    /// Defaults: 1000 trials of at most 40 nodes at fuel 1000, sealing at
    /// every level except top.
    pub fn new(lattice: Arc<Lattice>) -> GenConfig {
        let top = lattice.top();
        let levels = lattice.levels().filter(|&l| l != top).collect();
        GenConfig {
            seed: DEFAULT_SEED,
            size: 40,
            fuel: 1000,
            trials: 1000,
            lattice,
            levels,
            weights: Weights::default(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.size == 0 {
            return bad("size must be positive");
        }
        if self.fuel == 0 {
            return bad("fuel must be positive");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if self.levels.iter().any(|l| l.index() >= self.lattice.len()) {
            return bad("seal level outside the lattice");
        }
        Ok(())
    }

    fn non_top(&self) -> Vec<Level> {
        let top = self.lattice.top();
        self.lattice.levels().filter(|&l| l != top).collect()
    }
}

// ---------------------------------------------------------------------------
// Generation

fn min_size(ty: &ValueType) -> usize {
    match ty {
        ValueType::Unit => 1,
        ValueType::Prod(a, b) => 1 + min_size(a) + min_size(b),
        ValueType::Sum(a, b) => 1 + min_size(a).min(min_size(b)),
        ValueType::Seal(_, a) => 1 + min_size(a),
        ValueType::U(c) => match &**c {
            CompType::F(a) => 1 + min_size(a),
            CompType::Fn(_, x) => 1 + min_size(&ValueType::U(x.clone())),
        },
    }
}

#[derive(Debug, Clone)]
enum Choice {
    Var(usize),
    Proj(usize, bool),
    Intro,
    Case(ValueType, Option<usize>),
    Unseal(Level, ValueType, Option<usize>),
    Bind(ValueType, Option<usize>),
    Fix,
    App(ValueType, Option<usize>),
    Tdcl(Level, ValueType),
}

/// Type-directed term generator over one ChaCha8 stream.
pub struct Generator<'a> {
    lat: &'a Lattice,
    levels: &'a [Level],
    weights: &'a Weights,
    rng: ChaCha8Rng,
}

impl<'a> Generator<'a> {
    /// The generator for trial `trial` of a run seeded with `cfg.seed`.
    pub fn for_trial(cfg: &'a GenConfig, trial: u64) -> Generator<'a> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(trial);
        Generator {
            lat: &cfg.lattice,
            levels: &cfg.levels,
            weights: &cfg.weights,
            rng,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn pick_level(&mut self) -> Option<Level> {
        self.levels.choose(&mut self.rng).copied()
    }

    /// A random first-order type; bool is the most common.
    pub fn gen_type(&mut self, depth: usize) -> ValueType {
        let roll = self.rng.random_range(0..10);
        match roll {
            0..=3 => ValueType::bool(),
            4 | 5 => ValueType::Unit,
            6 if depth > 0 => ValueType::prod(self.gen_type(depth - 1), self.gen_type(depth - 1)),
            7 if depth > 0 => ValueType::sum(self.gen_type(depth - 1), self.gen_type(depth - 1)),
            _ => match self.pick_level() {
                Some(l) if depth > 0 => ValueType::seal(l, self.gen_type(depth - 1)),
                _ => ValueType::bool(),
            },
        }
    }

    /// A first-order type `A` with `▲_l A`.
    pub fn gen_sealed_type(&mut self, l: Level, depth: usize) -> ValueType {
        let above: Vec<Level> = self
            .levels
            .iter()
            .copied()
            .filter(|&l2| self.lat.leq(l, l2))
            .collect();
        let roll = self.rng.random_range(0..10);
        match roll {
            0..=4 => ValueType::seal(l, ValueType::bool()),
            5 => ValueType::Unit,
            6 if depth > 0 => ValueType::prod(
                self.gen_sealed_type(l, depth - 1),
                self.gen_sealed_type(l, depth - 1),
            ),
            7 if depth > 0 && !above.is_empty() => {
                let l2 = *above.choose(&mut self.rng).unwrap();
                ValueType::seal(l2, self.gen_type(depth - 1))
            }
            8 if depth > 0 => {
                let l2 = self.pick_level().unwrap_or(l);
                ValueType::seal(l2, self.gen_sealed_type(l, depth - 1))
            }
            _ => ValueType::seal(l, self.gen_type(depth.saturating_sub(1))),
        }
    }

    /// A term of type `ty` in context `ctx` (outermost first) with at most
    /// `size` nodes.
    pub fn gen_term(
        &mut self,
        ctx: &[ValueType],
        ty: &ValueType,
        size: usize,
    ) -> Result<Tm, HarnessError> {
        if min_size(ty) > size {
            return Err(HarnessError::GenerationExhausted {
                target: print_type(ty, self.lat),
                size,
            });
        }
        let mut ctx = ctx.to_vec();
        Ok(self.gen(&mut ctx, ty, size))
    }

    fn var_of(&self, ctx: &[ValueType], ty: &ValueType) -> Vec<usize> {
        ctx.iter()
            .rev()
            .enumerate()
            .filter(|(_, t)| *t == ty)
            .map(|(i, _)| i)
            .collect()
    }

    fn pick_var(&mut self, ctx: &[ValueType], ty: &ValueType) -> Option<usize> {
        self.var_of(ctx, ty).choose(&mut self.rng).copied()
    }

    fn split(&mut self, total: usize, mins: &[usize]) -> Vec<usize> {
        let mut sizes = mins.to_vec();
        let extra = total - mins.iter().sum::<usize>();
        for _ in 0..extra {
            let i = self.rng.random_range(0..sizes.len());
            sizes[i] += 1;
        }
        sizes
    }

    fn name(ctx: &[ValueType]) -> Name {
        Name::new(&format!("x{}", ctx.len()))
    }

    /// Generates `ty` and wraps it so it can sit in an inferring position.
    fn inferable(
        &mut self,
        ctx: &mut Vec<ValueType>,
        ty: &ValueType,
        var: Option<usize>,
        size: usize,
    ) -> Tm {
        match var {
            Some(i) => Rc::new(Term::Var(i)),
            None => Rc::new(Term::Ann(self.gen(ctx, ty, size - 1), ty.clone())),
        }
    }

    fn scrutinee_cost(var: Option<usize>, ty: &ValueType) -> usize {
        if var.is_some() {
            1
        } else {
            1 + min_size(ty)
        }
    }

    fn choices(&mut self, ctx: &[ValueType], ty: &ValueType, size: usize) -> Vec<(Choice, u32)> {
        let w = self.weights.clone();
        let min = min_size(ty);
        let mut opts = Vec::new();
        for (i, t) in ctx.iter().rev().enumerate() {
            if t == ty {
                opts.push((Choice::Var(i), w.var));
            }
            if let ValueType::Prod(a, b) = t {
                if size >= 2 && **a == *ty {
                    opts.push((Choice::Proj(i, true), w.var));
                }
                if size >= 2 && **b == *ty {
                    opts.push((Choice::Proj(i, false), w.var));
                }
            }
        }
        let intro_w = match ty {
            ValueType::Seal(..) => w.seal,
            _ => w.intro,
        };
        opts.push((Choice::Intro, intro_w.max(1)));
        if size <= min {
            return opts;
        }
        let spare = size - 1;

        let sum = if self.rng.random_bool(0.7) {
            ValueType::bool()
        } else {
            ValueType::sum(self.gen_type(1), self.gen_type(1))
        };
        let var = self.pick_var(ctx, &sum);
        if spare >= Self::scrutinee_cost(var, &sum) + 2 * min {
            opts.push((Choice::Case(sum, var), w.case));
        }

        let sealing: Vec<Level> = self
            .levels
            .iter()
            .copied()
            .filter(|&l| sealed_judgement(self.lat, l, ty).is_ok())
            .collect();
        if let Some(&l) = sealing.choose(&mut self.rng) {
            let in_scope: Vec<(usize, ValueType)> = ctx
                .iter()
                .rev()
                .enumerate()
                .filter_map(|(i, t)| match t {
                    ValueType::Seal(l2, inner) if *l2 == l => Some((i, (**inner).clone())),
                    _ => None,
                })
                .collect();
            let (inner, var) = match in_scope.choose(&mut self.rng) {
                Some((i, inner)) => (inner.clone(), Some(*i)),
                None => (self.gen_type(1), None),
            };
            let sealed = ValueType::seal(l, inner.clone());
            if spare >= Self::scrutinee_cost(var, &sealed) + min {
                opts.push((Choice::Unseal(l, inner, var), w.unseal));
            }
        }

        if let ValueType::U(c) = ty {
            opts.push((Choice::Fix, w.fix));
            let b = self.gen_type(1);
            let m_ty = ValueType::comp(b.clone());
            let var = self.pick_var(ctx, &m_ty);
            if spare >= Self::scrutinee_cost(var, &m_ty) + min {
                opts.push((Choice::Bind(b, var), w.bind));
            }
            let b = self.gen_type(1);
            let f_ty = ValueType::func(b.clone(), (**c).clone());
            let var = self.pick_var(ctx, &f_ty);
            if spare >= Self::scrutinee_cost(var, &f_ty) + min_size(&b) {
                opts.push((Choice::App(b, var), w.app));
            }
            if let CompType::F(a) = &**c {
                let tdcl: Vec<Level> = self
                    .levels
                    .iter()
                    .copied()
                    .filter(|&l| sealed_judgement(self.lat, l, a).is_ok())
                    .collect();
                if let Some(&l) = tdcl.choose(&mut self.rng) {
                    let u_ty = ValueType::seal(l, ty.clone());
                    if spare >= min_size(&u_ty) {
                        opts.push((Choice::Tdcl(l, (**a).clone()), w.tdcl));
                    }
                }
            }
        }
        opts.retain(|(_, w)| *w > 0);
        opts
    }

    fn gen(&mut self, ctx: &mut Vec<ValueType>, ty: &ValueType, size: usize) -> Tm {
        let opts = self.choices(ctx, ty, size);
        let choice = opts
            .choose_weighted(&mut self.rng, |o| o.1)
            .map(|o| o.0.clone())
            .unwrap_or(Choice::Intro);
        let node = match choice {
            Choice::Var(i) => Term::Var(i),
            Choice::Proj(i, first) => {
                let v = Rc::new(Term::Var(i));
                if first {
                    Term::Fst(v)
                } else {
                    Term::Snd(v)
                }
            }
            Choice::Intro => return self.intro(ctx, ty, size),
            Choice::Case(sum, var) => {
                let ValueType::Sum(a, b) = &sum else {
                    unreachable!()
                };
                let cost = Self::scrutinee_cost(var, &sum);
                let min = min_size(ty);
                let sizes = self.split(size - 1, &[cost, min, min]);
                let scrut = self.inferable(ctx, &sum, var, sizes[0]);
                let x = Self::name(ctx);
                ctx.push((**a).clone());
                let left = self.gen(ctx, ty, sizes[1]);
                ctx.pop();
                ctx.push((**b).clone());
                let right = self.gen(ctx, ty, sizes[2]);
                ctx.pop();
                Term::Case(scrut, x.clone(), left, x, right)
            }
            Choice::Unseal(l, inner, var) => {
                let sealed = ValueType::seal(l, inner.clone());
                let cost = Self::scrutinee_cost(var, &sealed);
                let sizes = self.split(size - 1, &[cost, min_size(ty)]);
                let scrut = self.inferable(ctx, &sealed, var, sizes[0]);
                let x = Self::name(ctx);
                ctx.push(inner);
                let body = self.gen(ctx, ty, sizes[1]);
                ctx.pop();
                Term::Unseal(l, scrut, x, body, ty.clone())
            }
            Choice::Bind(b, var) => {
                let m_ty = ValueType::comp(b.clone());
                let cost = Self::scrutinee_cost(var, &m_ty);
                let sizes = self.split(size - 1, &[cost, min_size(ty)]);
                let m = self.inferable(ctx, &m_ty, var, sizes[0]);
                let x = Self::name(ctx);
                ctx.push(b);
                let body = self.gen(ctx, ty, sizes[1]);
                ctx.pop();
                Term::Bind(m, x, body)
            }
            Choice::Fix => {
                let z = Self::name(ctx);
                ctx.push(ty.clone());
                let body = self.gen(ctx, ty, size - 1);
                ctx.pop();
                Term::Fix(z, body)
            }
            Choice::App(b, var) => {
                let ValueType::U(c) = ty else { unreachable!() };
                let f_ty = ValueType::func(b.clone(), (**c).clone());
                let cost = Self::scrutinee_cost(var, &f_ty);
                let sizes = self.split(size - 1, &[cost, min_size(&b)]);
                let f = self.inferable(ctx, &f_ty, var, sizes[0]);
                let arg = self.gen(ctx, &b, sizes[1]);
                Term::App(f, arg)
            }
            Choice::Tdcl(l, a) => {
                let u = self.gen(ctx, &ValueType::seal(l, ty.clone()), size - 1);
                Term::Tdcl(l, u, a)
            }
        };
        Rc::new(node)
    }

    fn intro(&mut self, ctx: &mut Vec<ValueType>, ty: &ValueType, size: usize) -> Tm {
        let node = match ty {
            ValueType::Unit => Term::Triv,
            ValueType::Prod(a, b) => {
                let sizes = self.split(size - 1, &[min_size(a), min_size(b)]);
                Term::Pair(self.gen(ctx, a, sizes[0]), self.gen(ctx, b, sizes[1]))
            }
            ValueType::Sum(a, b) => {
                let left_ok = min_size(a) < size;
                let right_ok = min_size(b) < size;
                let go_left = if left_ok && right_ok {
                    self.rng.random_bool(0.5)
                } else {
                    left_ok
                };
                if go_left {
                    Term::Inl(self.gen(ctx, a, size - 1))
                } else {
                    Term::Inr(self.gen(ctx, b, size - 1))
                }
            }
            ValueType::Seal(l, a) => Term::Seal(*l, self.gen(ctx, a, size - 1)),
            ValueType::U(c) => match &**c {
                CompType::F(a) => Term::Ret(self.gen(ctx, a, size - 1)),
                CompType::Fn(a, x) => {
                    let name = Self::name(ctx);
                    ctx.push((**a).clone());
                    let body = self.gen(ctx, &ValueType::U(x.clone()), size - 1);
                    ctx.pop();
                    Term::Lam(name, body)
                }
            },
        };
        Rc::new(node)
    }

    /// A size budget between half of `max` (or the type's minimum, if
    /// larger) and `max`.
    pub fn budget(&mut self, ty: &ValueType, max: usize) -> usize {
        let min = min_size(ty).max(max / 2);
        if min >= max {
            max.max(min_size(ty))
        } else {
            self.rng.random_range(min..=max)
        }
    }
}

/// Generates a closed term of `ty` for trial `trial` of `cfg`.
pub fn gen_typed_term(cfg: &GenConfig, trial: u64, ty: &ValueType) -> Result<Tm, HarnessError> {
    let mut g = Generator::for_trial(cfg, trial);
    g.gen_term(&[], ty, cfg.size)
}

// ---------------------------------------------------------------------------
// Verdicts

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub trial: u64,
    pub message: String,
    pub term: String,
    pub inputs: Vec<String>,
    pub stages: Vec<String>,
    pub outcomes: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Stats {
    pub generated: usize,
    pub discarded: usize,
    pub excluded: usize,
    pub observations: usize,
    pub converged: usize,
    pub convergence_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub property: String,
    pub lattice: String,
    pub passed: bool,
    pub inconclusive: bool,
    pub seed: u64,
    pub trials: usize,
    pub fuel: u64,
    pub failures: Vec<Failure>,
    pub stats: Stats,
}

impl Verdict {
    pub fn summary(&self) -> String {
        let status = if self.passed {
            "PASS"
        } else if self.inconclusive {
            "INCONCLUSIVE"
        } else {
            "FAIL"
        };
        format!(
            "{status:<12} {:<28} trials={} failures={} converged={:.1}% discarded={} excluded={}",
            self.property,
            self.trials,
            self.failures.len(),
            100.0 * self.stats.convergence_rate,
            self.stats.discarded,
            self.stats.excluded,
        )
    }
}

#[derive(Debug, Default)]
struct Trial {
    discarded: bool,
    excluded: bool,
    observations: usize,
    converged: usize,
    failure: Option<Failure>,
}

impl Trial {
    fn discarded() -> Trial {
        Trial {
            discarded: true,
            ..Trial::default()
        }
    }

    fn excluded() -> Trial {
        Trial {
            excluded: true,
            ..Trial::default()
        }
    }
}

/// Keeps this many counterexamples per verdict; the rest are only counted.
const MAX_REPORTED_FAILURES: usize = 5;

fn aggregate(
    property: &str,
    cfg: &GenConfig,
    trials: Vec<Trial>,
    min_rate: Option<f64>,
) -> Verdict {
    let mut stats = Stats::default();
    let mut failures = Vec::new();
    let mut failed = 0;
    let count = trials.len();
    for t in trials {
        if t.discarded {
            stats.discarded += 1;
            continue;
        }
        if t.excluded {
            stats.excluded += 1;
            continue;
        }
        stats.generated += 1;
        stats.observations += t.observations;
        stats.converged += t.converged;
        if let Some(f) = t.failure {
            failed += 1;
            if failures.len() < MAX_REPORTED_FAILURES {
                failures.push(f);
            }
        }
    }
    stats.convergence_rate = if stats.observations == 0 {
        0.0
    } else {
        stats.converged as f64 / stats.observations as f64
    };
    let inconclusive = failed == 0
        && min_rate.is_some_and(|r| stats.convergence_rate < r || stats.observations == 0);
    Verdict {
        property: property.to_string(),
        lattice: cfg.lattice.names().join(","),
        passed: failed == 0 && !inconclusive,
        inconclusive,
        seed: cfg.seed,
        trials: count,
        fuel: cfg.fuel,
        failures,
        stats,
    }
}

fn run_trials<F>(cfg: &GenConfig, f: F) -> Vec<Trial>
where
    F: Fn(u64) -> Result<Trial, HarnessError> + Sync,
{
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| match f(i) {
            Ok(t) => t,
            Err(HarnessError::GenerationExhausted { .. }) => Trial::discarded(),
            Err(e) => Trial {
                failure: Some(Failure {
                    trial: i,
                    message: e.to_string(),
                    term: String::new(),
                    inputs: vec![],
                    stages: vec![],
                    outcomes: vec![],
                }),
                ..Trial::default()
            },
        })
        .collect()
}

fn ill_typed(lat: &Lattice, trial: u64, t: &Tm, ty: &ValueType) -> Option<Trial> {
    check_closed(lat, t, ty, false).err().map(|e| Trial {
        failure: Some(Failure {
            trial,
            message: format!("generated term does not typecheck: {e}"),
            term: print_term(t, lat),
            inputs: vec![],
            stages: vec![],
            outcomes: vec![],
        }),
        ..Trial::default()
    })
}

fn annotate(t: &Tm, ty: &ValueType) -> Tm {
    Rc::new(Term::Ann(t.clone(), ty.clone()))
}

fn app(f: &Tm, a: &Tm) -> Tm {
    Rc::new(Term::App(f.clone(), a.clone()))
}

// ---------------------------------------------------------------------------
// Shrinking

fn subterms(t: &Tm, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(path.clone());
    for (i, c) in t.children().into_iter().enumerate() {
        path.push(i);
        subterms(c, path, out);
        path.pop();
    }
}

fn at<'t>(t: &'t Tm, path: &[usize]) -> &'t Tm {
    path.iter().fold(t, |t, &i| t.children()[i])
}

fn replace(t: &Tm, path: &[usize], new: &Tm) -> Tm {
    match path.split_first() {
        None => new.clone(),
        Some((&i, rest)) => {
            let mut kids: Vec<Tm> = t.children().into_iter().cloned().collect();
            kids[i] = replace(&kids[i], rest, new);
            Rc::new(t.with_children(kids))
        }
    }
}

/// Descendants that can stand in for `t`: lifted out of binders when they
/// do not mention the bound variables.
fn liftable(t: &Tm, depth: usize, out: &mut Vec<Tm>) {
    for (c, b) in t.children().into_iter().zip(t.binders()) {
        let d = depth + b;
        if free_vars_at_least(c, d) {
            out.push(shift(c, -(d as isize), 0));
        }
        liftable(c, d, out);
    }
}

fn free_vars_at_least(t: &Term, depth: usize) -> bool {
    fn go(t: &Term, bound: usize, depth: usize) -> bool {
        if let Term::Var(i) = t {
            return *i < bound || *i >= bound + depth;
        }
        t.children()
            .into_iter()
            .zip(t.binders())
            .all(|(c, b)| go(c, bound + b, depth))
    }
    go(t, 0, depth)
}

fn atoms() -> Vec<Tm> {
    let unit = Rc::new(Term::Triv);
    vec![
        unit.clone(),
        crate::syntax::tt(),
        crate::syntax::ff(),
        Rc::new(Term::Ret(unit)),
        Rc::new(Term::Ret(crate::syntax::tt())),
        Rc::new(Term::Ret(crate::syntax::ff())),
    ]
}

/// Greedy shrinking: repeatedly replaces a subterm by a smaller descendant or
/// an atom while the term still typechecks at `ty` and still fails.
pub fn shrink(lat: &Lattice, term: &Tm, ty: &ValueType, still_fails: impl Fn(&Tm) -> bool) -> Tm {
    let mut best = term.clone();
    'outer: for _ in 0..200 {
        let mut paths = Vec::new();
        subterms(&best, &mut Vec::new(), &mut paths);
        for path in &paths {
            let sub = at(&best, path);
            let mut cands = Vec::new();
            liftable(sub, 0, &mut cands);
            cands.extend(atoms());
            for cand in cands {
                if cand.size() >= sub.size() {
                    continue;
                }
                let next = replace(&best, path, &cand);
                if check_closed(lat, &next, ty, false).is_ok() && still_fails(&next) {
                    best = next;
                    continue 'outer;
                }
            }
        }
        break;
    }
    best
}

// ---------------------------------------------------------------------------
// Checks

fn bool_result(o: &Outcome) -> Option<Option<bool>> {
    o.converged().map(Value::as_bool)
}

/// Termination-insensitive noninterference at seal level `l`: for generated
/// `c : U (A → F bool)` with `▲_l A` and closed `x, y : A`, whenever `c x` and
/// `c y` both converge at a stage they return the same boolean.
pub fn check_tini(cfg: &GenConfig, l: Level) -> Result<Verdict, HarnessError> {
    cfg.validate()?;
    let lat = &*cfg.lattice;
    let trials = run_trials(cfg, |trial| {
        let mut g = Generator::for_trial(cfg, trial);
        let a = g.gen_sealed_type(l, 2);
        let result = ValueType::comp(ValueType::bool());
        let c_ty = ValueType::func(a.clone(), CompType::free(ValueType::bool()));
        let budget = g.budget(&result, cfg.size);
        let body = g.gen_term(std::slice::from_ref(&a), &result, budget)?;
        let c = Rc::new(Term::Lam(Name::new("u"), body));
        let x = g.gen_term(&[], &a, 8.max(min_size(&a)))?;
        let y = g.gen_term(&[], &a, 8.max(min_size(&a)))?;
        for (t, ty) in [(&c, &c_ty), (&x, &a), (&y, &a)] {
            if let Some(bad) = ill_typed(lat, trial, t, ty) {
                return Ok(bad);
            }
        }
        let violation = |c: &Tm| -> Result<Option<(Level, Outcome, Outcome)>, HarnessError> {
            let f = annotate(c, &c_ty);
            for k in lat.levels() {
                let ox = eval_stage(lat, &app(&f, &x), k, cfg.fuel)?.outcome;
                let oy = eval_stage(lat, &app(&f, &y), k, cfg.fuel)?.outcome;
                let (bx, by) = (bool_result(&ox), bool_result(&oy));
                let bad_value = matches!(bx, Some(None)) || matches!(by, Some(None));
                let differ = matches!((bx, by), (Some(p), Some(q)) if p != q);
                if bad_value || differ {
                    return Ok(Some((k, ox, oy)));
                }
            }
            Ok(None)
        };
        let mut out = Trial::default();
        let f = annotate(&c, &c_ty);
        for k in lat.levels() {
            let ox = eval_stage(lat, &app(&f, &x), k, cfg.fuel)?.outcome;
            let oy = eval_stage(lat, &app(&f, &y), k, cfg.fuel)?.outcome;
            out.observations += 1;
            if ox.is_converged() && oy.is_converged() {
                out.converged += 1;
            }
        }
        if let Some((k, ox, oy)) = violation(&c)? {
            let small = shrink(lat, &c, &c_ty, |c| matches!(violation(c), Ok(Some(_))));
            let (k, ox, oy) = violation(&small)?.unwrap_or((k, ox, oy));
            out.failure = Some(Failure {
                trial,
                message: "converging observations of sealed inputs differ".into(),
                term: print_term(&small, lat),
                inputs: vec![print_term(&x, lat), print_term(&y, lat)],
                stages: vec![lat.name(k).to_string()],
                outcomes: vec![ox.describe(lat), oy.describe(lat)],
            });
        }
        Ok(out)
    });
    Ok(aggregate(
        &format!("tini@{}", lat.name(l)),
        cfg,
        trials,
        Some(MIN_CONVERGENCE_RATE),
    ))
}

/// Result types the constancy check may use at `l`, each certified
/// transparent for `↓l` on its denotation.
pub fn transparent_results(lat: &Arc<Lattice>, l: Level) -> Result<Vec<ValueType>, HarnessError> {
    let candidates = [
        ValueType::bool(),
        ValueType::Unit,
        ValueType::prod(ValueType::bool(), ValueType::Unit),
        ValueType::prod(ValueType::bool(), ValueType::bool()),
    ];
    let u = lat.principal_policy(l);
    let mut out = Vec::new();
    for ty in candidates {
        let Some(psh) = type_presheaf(lat, &ty) else {
            continue;
        };
        if presheaf::is_transparent(u, &psh, &Limits::default()).unwrap_or(false) {
            out.push(ty);
        }
    }
    if out.is_empty() {
        return Err(HarnessError::NoTransparentType(lat.name(l).to_string()));
    }
    Ok(out)
}

/// Constancy at seal level `l`: generated total functions `A → B` (open value
/// terms) and partial functions `U (A → F B)`, with `▲_l A` and `B`
/// transparent, agree on every input of `A` enumerated at each stage.
pub fn check_constancy(cfg: &GenConfig, l: Level) -> Result<Verdict, HarnessError> {
    cfg.validate()?;
    let lat = &*cfg.lattice;
    let results = transparent_results(&cfg.lattice, l)?;
    let trials = run_trials(cfg, |trial| {
        let mut g = Generator::for_trial(cfg, trial);
        let a = g.gen_sealed_type(l, 2);
        let b = results.choose(g.rng()).unwrap().clone();
        let budget = g.budget(&b, cfg.size / 2);
        let total = g.gen_term(std::slice::from_ref(&a), &b, budget)?;
        let partial_ty = ValueType::func(a.clone(), CompType::free(b.clone()));
        let budget = g.budget(&partial_ty, cfg.size);
        let partial = g.gen_term(&[], &partial_ty, budget)?;
        if let Some(bad) = ill_typed(lat, trial, &partial, &partial_ty) {
            return Ok(bad);
        }
        let total_closed = Rc::new(Term::Lam(Name::new("u"), Rc::new(Term::Ret(total.clone()))));
        let total_ty = ValueType::func(a.clone(), CompType::free(b.clone()));
        if let Some(bad) = ill_typed(lat, trial, &total_closed, &total_ty) {
            return Ok(bad);
        }
        let mut out = Trial::default();
        let f = annotate(&partial, &partial_ty);
        for k in lat.levels() {
            let inputs = enumerate_values(lat, &a, k);
            let mut seen_total: Option<Value> = None;
            let mut seen_partial: Option<Value> = None;
            for x in &inputs {
                out.observations += 1;
                let v = eval_open_value(lat, &total, std::slice::from_ref(x), k)?;
                let run = apply_stage(lat, &f, x.clone(), k, cfg.fuel)?;
                let mut clash = |seen: &mut Option<Value>, v: Value, what: &str| match seen {
                    Some(prev) if !value_eq(prev, &v) => {
                        out.failure.get_or_insert_with(|| Failure {
                            trial,
                            message: format!("{what} function is not constant"),
                            term: if what == "total" {
                                print_term(&total_closed, lat)
                            } else {
                                print_term(&partial, lat)
                            },
                            inputs: inputs.iter().map(|i| i.display(lat).to_string()).collect(),
                            stages: vec![lat.name(k).to_string()],
                            outcomes: vec![
                                prev.display(lat).to_string(),
                                v.display(lat).to_string(),
                            ],
                        });
                    }
                    Some(_) => {}
                    None => *seen = Some(v),
                };
                clash(&mut seen_total, v, "total");
                if let Outcome::Converged(w) = run.outcome {
                    out.converged += 1;
                    clash(&mut seen_partial, w, "partial");
                }
            }
        }
        Ok(out)
    });
    Ok(aggregate(
        &format!("constancy@{}", lat.name(l)),
        cfg,
        trials,
        None,
    ))
}

/// A parsed program from the corpus directory.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub lattice: Arc<Lattice>,
    pub source: String,
}

/// Loads every `.dcc` file in `dir`, resolving each `;! lattice:` header
/// relative to the directory. Files without a header use `default`.
pub fn load_corpus(dir: &Path, default: &Arc<Lattice>) -> Result<Vec<CorpusEntry>, HarnessError> {
    let io = |path: &Path, e: std::io::Error| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "dcc"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| io(&path, e))?;
        let program = read_program(&text);
        let lattice = match &program.lattice_path {
            None => default.clone(),
            Some(rel) => {
                let lat_path = dir.join(rel);
                let src = std::fs::read_to_string(&lat_path).map_err(|e| io(&lat_path, e))?;
                Arc::new(
                    Lattice::from_toml(&src).map_err(|source| HarnessError::Lattice {
                        path: lat_path.display().to_string(),
                        source,
                    })?,
                )
            }
        };
        out.push(CorpusEntry {
            name: path.file_name().unwrap().to_string_lossy().into_owned(),
            lattice,
            source: program.body,
        });
    }
    Ok(out)
}

fn adequacy_trial(
    lat: &Lattice,
    t: &Tm,
    known: Option<&ValueType>,
    fuel: u64,
    trial: u64,
    name: &str,
) -> Result<Trial, HarnessError> {
    if t.seal_sites().contains(&lat.top()) {
        return Ok(Trial::excluded());
    }
    let typed = match known {
        Some(ty) => check_closed(lat, t, ty, false).map(|_| ty.clone()),
        None => infer_closed(lat, t, false).map(|(ty, _)| ty),
    };
    let ty = match typed {
        Ok(ty) => ty,
        Err(e) => {
            return Ok(Trial {
                failure: Some(Failure {
                    trial,
                    message: format!("{name}: does not typecheck: {e}"),
                    term: print_term(t, lat),
                    inputs: vec![],
                    stages: vec![],
                    outcomes: vec![],
                }),
                ..Trial::default()
            })
        }
    };
    let returns_bool =
        matches!(&ty, ValueType::U(c) if matches!(&**c, CompType::F(a) if a.is_bool()));
    let op = eval_operational(lat, t, fuel)?.outcome;
    let den = eval_stage(lat, t, lat.top(), fuel)?.outcome;
    let mut out = Trial {
        observations: 1,
        converged: usize::from(op.is_converged()),
        ..Trial::default()
    };
    let mut problem = None;
    if !op.agrees_with(&den) {
        problem = Some("operational and top-stage outcomes differ".to_string());
    } else if returns_bool {
        for k in lat.levels() {
            let o = eval_stage(lat, t, k, fuel)?.outcome;
            if matches!(bool_result(&o), Some(None)) {
                problem = Some(format!(
                    "bool computation returned a non-boolean at {}",
                    lat.name(k)
                ));
            }
        }
    }
    if let Some(message) = problem {
        out.failure = Some(Failure {
            trial,
            message: format!("{name}: {message}"),
            term: print_term(t, lat),
            inputs: vec![],
            stages: vec![lat.name(lat.top()).to_string()],
            outcomes: vec![op.describe(lat), den.describe(lat)],
        });
    }
    Ok(out)
}

/// Adequacy: the level-blind machine and the top-stage interpreter agree on
/// convergence and first-order result, for the corpus and for generated
/// programs. Programs with seal sites at the top level are excluded.
pub fn check_adequacy(cfg: &GenConfig, corpus: &[CorpusEntry]) -> Result<Verdict, HarnessError> {
    cfg.validate()?;
    let mut trials = Vec::new();
    for (i, entry) in corpus.iter().enumerate() {
        let t =
            parse_term(&entry.source, &entry.lattice).map_err(|source| HarnessError::Parse {
                path: entry.name.clone(),
                source,
            })?;
        trials.push(adequacy_trial(
            &entry.lattice,
            &t,
            None,
            cfg.fuel,
            i as u64,
            &entry.name,
        )?);
    }
    let lat = &*cfg.lattice;
    trials.extend(run_trials(cfg, |trial| {
        let mut g = Generator::for_trial(cfg, trial);
        let a = g.gen_type(2);
        let ty = ValueType::comp(a);
        let budget = g.budget(&ty, cfg.size);
        let t = g.gen_term(&[], &ty, budget)?;
        if let Some(bad) = ill_typed(lat, trial, &t, &ty) {
            return Ok(bad);
        }
        adequacy_trial(lat, &t, Some(&ty), cfg.fuel, trial, "generated")
    }));
    Ok(aggregate("adequacy", cfg, trials, None))
}

fn generated_program(cfg: &GenConfig, trial: u64) -> Result<(Tm, ValueType), HarnessError> {
    let mut g = Generator::for_trial(cfg, trial);
    let a = g.gen_type(2);
    let ty = ValueType::comp(a);
    let budget = g.budget(&ty, cfg.size);
    Ok((g.gen_term(&[], &ty, budget)?, ty))
}

fn naturality_failure(
    lat: &Lattice,
    t: &Tm,
    fuel: u64,
) -> Result<Option<(Level, Level, Outcome, Outcome)>, HarnessError> {
    let runs: Vec<Outcome> = lat
        .levels()
        .map(|k| eval_stage(lat, t, k, fuel).map(|r| r.outcome))
        .collect::<Result<_, _>>()?;
    for k in lat.levels() {
        let Outcome::Converged(v) = &runs[k.index()] else {
            continue;
        };
        for j in lat.levels().filter(|&j| lat.leq(j, k)) {
            let expected = restrict_value(lat, v, j)?;
            let ok = matches!(&runs[j.index()], Outcome::Converged(w) if value_eq(w, &expected));
            if !ok {
                return Ok(Some((
                    k,
                    j,
                    runs[k.index()].clone(),
                    runs[j.index()].clone(),
                )));
            }
        }
    }
    Ok(None)
}

/// Naturality: for `j ⊑ k`, a stage-`k` result restricts to the stage-`j`
/// result. Generated programs may seal at any level, top included.
pub fn check_naturality(cfg: &GenConfig) -> Result<Verdict, HarnessError> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.levels = cfg.lattice.levels().collect();
    let lat = &*cfg.lattice;
    let trials = run_trials(&cfg, |trial| {
        let (t, ty) = generated_program(&cfg, trial)?;
        if let Some(bad) = ill_typed(lat, trial, &t, &ty) {
            return Ok(bad);
        }
        let mut out = Trial {
            observations: lat.len(),
            ..Trial::default()
        };
        out.converged = lat
            .levels()
            .filter(|&k| eval_stage(lat, &t, k, cfg.fuel).is_ok_and(|r| r.outcome.is_converged()))
            .count();
        if let Some((k, j, ok, oj)) = naturality_failure(lat, &t, cfg.fuel)? {
            let small = shrink(lat, &t, &ty, |c| {
                matches!(naturality_failure(lat, c, cfg.fuel), Ok(Some(_)))
            });
            out.failure = Some(Failure {
                trial,
                message: "restriction square does not commute".into(),
                term: print_term(&small, lat),
                inputs: vec![],
                stages: vec![lat.name(k).to_string(), lat.name(j).to_string()],
                outcomes: vec![ok.describe(lat), oj.describe(lat)],
            });
        }
        Ok(out)
    });
    Ok(aggregate("naturality", &cfg, trials, None))
}

fn invariant_failure(lat: &Lattice, t: &Tm, fuel: u64) -> Result<Option<String>, HarnessError> {
    for k in lat.levels() {
        let a = eval_stage(lat, t, k, fuel)?;
        let b = eval_stage(lat, t, k, fuel)?;
        if !a.outcome.agrees_with(&b.outcome) || a.fuel_used != b.fuel_used {
            return Ok(Some(format!("nondeterministic at {}", lat.name(k))));
        }
        if a.fuel_used > fuel {
            return Ok(Some(format!("overspent fuel at {}", lat.name(k))));
        }
        if a.outcome.is_converged() {
            for more in [fuel + 1, fuel + 17, 2 * fuel] {
                let c = eval_stage(lat, t, k, more)?;
                if !a.outcome.agrees_with(&c.outcome) || c.fuel_used != a.fuel_used {
                    return Ok(Some(format!(
                        "fuel monotonicity fails at {} between {fuel} and {more}",
                        lat.name(k)
                    )));
                }
            }
        }
    }
    let op1 = eval_operational(lat, t, fuel)?;
    let op2 = eval_operational(lat, t, fuel)?;
    if !op1.outcome.agrees_with(&op2.outcome) || op1.fuel_used != op2.fuel_used {
        return Ok(Some("operational machine is nondeterministic".into()));
    }
    if let Err(e) = support(lat, t, fuel) {
        return Ok(Some(e.to_string()));
    }
    if naturality_failure(lat, t, fuel)?.is_some() {
        return Ok(Some("restriction square does not commute".into()));
    }
    Ok(None)
}

/// Interpreter invariants on generated programs: determinism, fuel
/// monotonicity, downward-closed supports and naturality.
pub fn check_invariants(cfg: &GenConfig) -> Result<Verdict, HarnessError> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.levels = cfg.lattice.levels().collect();
    let lat = &*cfg.lattice;
    let trials = run_trials(&cfg, |trial| {
        let (t, ty) = generated_program(&cfg, trial)?;
        if let Some(bad) = ill_typed(lat, trial, &t, &ty) {
            return Ok(bad);
        }
        let s = support(lat, &t, cfg.fuel);
        let mut out = Trial {
            observations: lat.len(),
            converged: s.as_ref().map_or(0, |s| s.open.len()),
            ..Trial::default()
        };
        if let Some(message) = invariant_failure(lat, &t, cfg.fuel)? {
            let small = shrink(lat, &t, &ty, |c| {
                matches!(invariant_failure(lat, c, cfg.fuel), Ok(Some(_)))
            });
            out.failure = Some(Failure {
                trial,
                message,
                term: print_term(&small, lat),
                inputs: vec![],
                stages: vec![],
                outcomes: vec![],
            });
        }
        Ok(out)
    });
    Ok(aggregate("interpreter-invariants", &cfg, trials, None))
}

/// The equations checked by [`check_law`].
pub const LAWS: [&str; 8] = [
    "bind-beta",
    "bind-eta",
    "bind-assoc",
    "fix-unroll",
    "unseal-beta",
    "tdcl-beta",
    "case-beta",
    "case-eta",
];

/// Builds one closed instance `(lhs, rhs, type)` of a law.
fn law_instance(
    g: &mut Generator<'_>,
    law: &str,
    size: usize,
) -> Result<(Tm, Tm, ValueType), HarnessError> {
    let small = (size / 3).max(4);
    let var0 = || Rc::new(Term::Var(0));
    let x = || Name::new("x");
    Ok(match law {
        "bind-beta" => {
            let a = g.gen_type(1);
            let res = ValueType::comp(g.gen_type(1));
            let u = g.gen_term(&[], &a, small.max(min_size(&a)))?;
            let m = g.gen_term(std::slice::from_ref(&a), &res, size.max(min_size(&res)))?;
            let a_ty = a.clone();
            let lhs = Term::Bind(
                annotate(&Rc::new(Term::Ret(u.clone())), &ValueType::comp(a)),
                x(),
                m.clone(),
            );
            (Rc::new(lhs), subst_top(&m, &annotate(&u, &a_ty)), res)
        }
        "bind-eta" => {
            let res = ValueType::comp(g.gen_type(1));
            let m = g.gen_term(&[], &res, size.max(min_size(&res)))?;
            let lhs = Term::Bind(annotate(&m, &res), x(), Rc::new(Term::Ret(var0())));
            (Rc::new(lhs), m, res)
        }
        "bind-assoc" => {
            let (a, b) = (g.gen_type(1), g.gen_type(1));
            let (ma, mb) = (ValueType::comp(a.clone()), ValueType::comp(b.clone()));
            let res = ValueType::comp(g.gen_type(1));
            let m = g.gen_term(&[], &ma, small.max(min_size(&ma)))?;
            let n = g.gen_term(std::slice::from_ref(&a), &mb, small.max(min_size(&mb)))?;
            let p = g.gen_term(std::slice::from_ref(&b), &res, small.max(min_size(&res)))?;
            let inner = Rc::new(Term::Bind(annotate(&m, &ma), x(), n.clone()));
            let lhs = Term::Bind(annotate(&inner, &mb), Name::new("y"), p.clone());
            let rhs = Term::Bind(
                annotate(&m, &ma),
                x(),
                Rc::new(Term::Bind(
                    annotate(&n, &mb),
                    Name::new("y"),
                    shift(&p, 1, 1),
                )),
            );
            (Rc::new(lhs), Rc::new(rhs), res)
        }
        "fix-unroll" => {
            let res = ValueType::comp(g.gen_type(1));
            let body = g.gen_term(std::slice::from_ref(&res), &res, size.max(min_size(&res)))?;
            let fix = Rc::new(Term::Fix(Name::new("z"), body.clone()));
            (fix.clone(), subst_top(&body, &annotate(&fix, &res)), res)
        }
        "unseal-beta" => {
            let l = g.pick_level().unwrap_or(g.lat.top());
            let a = g.gen_type(1);
            let b = g.gen_sealed_type(l, 2);
            let u = g.gen_term(&[], &a, small.max(min_size(&a)))?;
            let body = g.gen_term(std::slice::from_ref(&a), &b, size.max(min_size(&b)))?;
            let scrut = annotate(
                &Rc::new(Term::Seal(l, u.clone())),
                &ValueType::seal(l, a.clone()),
            );
            let lhs = Term::Unseal(l, scrut, x(), body.clone(), b.clone());
            let rhs = subst_top(&body, &annotate(&u, &a));
            (
                Rc::new(Term::Ret(Rc::new(lhs))),
                Rc::new(Term::Ret(rhs)),
                ValueType::comp(b),
            )
        }
        "tdcl-beta" => {
            let l = g.pick_level().unwrap_or(g.lat.top());
            let a = g.gen_sealed_type(l, 2);
            let u = g.gen_term(&[], &a, size.max(min_size(&a)))?;
            let ret = Rc::new(Term::Ret(u));
            let lhs = Term::Tdcl(l, Rc::new(Term::Seal(l, ret.clone())), a.clone());
            (Rc::new(lhs), ret, ValueType::comp(a))
        }
        "case-beta" => {
            let (a, b) = (g.gen_type(1), g.gen_type(1));
            let sum = ValueType::sum(a.clone(), b.clone());
            let res = ValueType::comp(g.gen_type(1));
            let left = g.gen_term(std::slice::from_ref(&a), &res, small.max(min_size(&res)))?;
            let right = g.gen_term(std::slice::from_ref(&b), &res, small.max(min_size(&res)))?;
            let (inj, v, branch) = if g.rng.random_bool(0.5) {
                let v = g.gen_term(&[], &a, small.max(min_size(&a)))?;
                (Term::Inl(v.clone()), annotate(&v, &a), left.clone())
            } else {
                let v = g.gen_term(&[], &b, small.max(min_size(&b)))?;
                (Term::Inr(v.clone()), annotate(&v, &b), right.clone())
            };
            let lhs = Term::Case(
                annotate(&Rc::new(inj), &sum),
                x(),
                left,
                Name::new("y"),
                right,
            );
            (Rc::new(lhs), subst_top(&branch, &v), res)
        }
        "case-eta" => {
            let (a, b) = (g.gen_type(1), g.gen_type(1));
            let sum = ValueType::sum(a, b);
            let res = ValueType::comp(g.gen_type(1));
            let e = g.gen_term(&[], &sum, small.max(min_size(&sum)))?;
            let t = g.gen_term(std::slice::from_ref(&sum), &res, size.max(min_size(&res)))?;
            let lifted = shift(&t, 1, 1);
            let rhs = Term::Case(
                annotate(&e, &sum),
                x(),
                subst_top(&lifted, &annotate(&Rc::new(Term::Inl(var0())), &sum)),
                Name::new("y"),
                subst_top(&lifted, &annotate(&Rc::new(Term::Inr(var0())), &sum)),
            );
            (subst_top(&t, &annotate(&e, &sum)), Rc::new(rhs), res)
        }
        other => return Err(HarnessError::InvalidConfig(format!("unknown law {other}"))),
    })
}

fn side_mismatch(
    run: &dyn Fn(&Tm, u64) -> Result<Outcome, HarnessError>,
    lhs: &Tm,
    rhs: &Tm,
    fuel: u64,
) -> Result<Option<(Outcome, Outcome)>, HarnessError> {
    let (l, r) = (run(lhs, fuel)?, run(rhs, fuel)?);
    if l.agrees_with(&r) {
        return Ok(None);
    }
    let covered = |a: &Outcome, other: &Tm| -> Result<bool, HarnessError> {
        match a {
            Outcome::OutOfFuel => Ok(true),
            Outcome::Converged(_) => Ok(a.agrees_with(&run(other, fuel + LAW_FUEL_SLACK)?)),
        }
    };
    if covered(&l, rhs)? && covered(&r, lhs)? {
        Ok(None)
    } else {
        Ok(Some((l, r)))
    }
}

fn law_failure(
    lat: &Lattice,
    lhs: &Tm,
    rhs: &Tm,
    fuel: u64,
) -> Result<Option<(String, Outcome, Outcome)>, HarnessError> {
    for k in lat.levels() {
        let run = |t: &Tm, n: u64| -> Result<Outcome, HarnessError> {
            Ok(eval_stage(lat, t, k, n)?.outcome)
        };
        if let Some((l, r)) = side_mismatch(&run, lhs, rhs, fuel)? {
            return Ok(Some((lat.name(k).to_string(), l, r)));
        }
    }
    let run = |t: &Tm, n: u64| -> Result<Outcome, HarnessError> {
        Ok(eval_operational(lat, t, n)?.outcome)
    };
    Ok(side_mismatch(&run, lhs, rhs, fuel)?.map(|(l, r)| ("operational".to_string(), l, r)))
}

/// One equational law on `cfg.trials` generated closed instances, at every
/// stage and on the operational machine. Both sides must agree at equal
/// fuel, up to [`LAW_FUEL_SLACK`] extra unrollings on either side.
pub fn check_law(cfg: &GenConfig, law: &str) -> Result<Verdict, HarnessError> {
    cfg.validate()?;
    if !LAWS.contains(&law) {
        return Err(HarnessError::InvalidConfig(format!("unknown law {law}")));
    }
    let lat = &*cfg.lattice;
    let size = (cfg.size / 2).max(4);
    let trials = run_trials(cfg, |trial| {
        let mut g = Generator::for_trial(cfg, trial);
        let (lhs, rhs, ty) = law_instance(&mut g, law, size)?;
        for side in [&lhs, &rhs] {
            if let Some(bad) = ill_typed(lat, trial, side, &ty) {
                return Ok(bad);
            }
        }
        let mut out = Trial {
            observations: lat.len() + 1,
            ..Trial::default()
        };
        out.converged = lat
            .levels()
            .filter(|&k| eval_stage(lat, &lhs, k, cfg.fuel).is_ok_and(|r| r.outcome.is_converged()))
            .count();
        if let Some((stage, l, r)) = law_failure(lat, &lhs, &rhs, cfg.fuel)? {
            out.failure = Some(Failure {
                trial,
                message: format!("{law} sides disagree"),
                term: format!("{}  ≡  {}", print_term(&lhs, lat), print_term(&rhs, lat)),
                inputs: vec![],
                stages: vec![stage],
                outcomes: vec![l.describe(lat), r.describe(lat)],
            });
        }
        Ok(out)
    });
    Ok(aggregate(&format!("law:{law}"), cfg, trials, None))
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub banner: String,
    pub seed: u64,
    pub lattice: String,
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
}

impl SuiteReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "{}\nseed {}  lattice {}\n",
            self.banner, self.seed, self.lattice
        );
        for v in &self.verdicts {
            s.push_str(&v.summary());
            s.push('\n');
            for f in &v.failures {
                s.push_str(&format!(
                    "    trial {}: {}\n      {}\n",
                    f.trial, f.message, f.term
                ));
            }
        }
        s.push_str(if self.passed {
            "suite passed\n"
        } else {
            "suite FAILED\n"
        });
        s
    }
}

/// Runs every check: noninterference and constancy at each non-top level,
/// adequacy over `corpus` plus generated programs, naturality, interpreter
/// invariants and the equational laws.
pub fn run_suite(cfg: &GenConfig, corpus: &[CorpusEntry]) -> Result<SuiteReport, HarnessError> {
    cfg.validate()?;
    let mut verdicts = Vec::new();
    for l in cfg.non_top() {
        verdicts.push(check_tini(cfg, l)?);
        verdicts.push(check_constancy(cfg, l)?);
    }
    verdicts.push(check_adequacy(cfg, corpus)?);
    verdicts.push(check_naturality(cfg)?);
    verdicts.push(check_invariants(cfg)?);
    for law in LAWS {
        verdicts.push(check_law(cfg, law)?);
    }
    Ok(SuiteReport {
        banner: BANNER.to_string(),
        seed: cfg.seed,
        lattice: cfg.lattice.names().join(","),
        passed: verdicts.iter().all(|v| v.passed),
        verdicts,
    })
}
