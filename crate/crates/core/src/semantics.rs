//! Evaluation.
//!
//! [`eval_stage`] interprets a closed term as seen by an observer at a given
//! level (the *stage*). Sealed data is redacted at stages `k ⊑ l` by
//! construction: the payload of a `seal_l` value at such a stage is
//! [`Payload::Redacted`] and holds nothing. `unseal_l` of a redacted value
//! answers with the canonical point of its (sealed) result type, and `tdcl_l`
//! returns without forcing its argument whenever `gl(l)` holds at the stage.
//!
//! [`eval_operational`] is an independent small-step machine over terms. It
//! never looks at levels; it is the reference for convergence.
//!
//! Both evaluators spend one unit of fuel per unrolling of `fix` and nothing
//! else, so their budgets are directly comparable.

use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{Lattice, Level, Open};
use crate::presheaf::{self, Presheaf};
use crate::syntax::{subst_top, Printer, Term, Tm, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("evaluation is stuck at `{0}`")]
    StuckTerm(String),
    #[error("fuel must be non-negative, got {0}")]
    FuelMustBeNonNegative(i64),
    #[error("type has no canonical point at this stage: {0}")]
    NoCanonicalPoint(String),
    #[error("restriction of a higher-order value")]
    HigherOrderValue,
    #[error("termination support is not downward closed: {0}")]
    NotDownwardClosed(String),
}

/// Validates a signed fuel budget from user input.
pub fn fuel_from_i64(n: i64) -> Result<u64, EvalError> {
    u64::try_from(n).map_err(|_| EvalError::FuelMustBeNonNegative(n))
}

#[derive(Debug, Clone)]
pub enum Payload {
    Present(Value),
    Redacted,
}

#[derive(Debug, Clone)]
pub enum Value {
    Unit,
    Pair(Rc<Value>, Rc<Value>),
    Inl(Rc<Value>),
    Inr(Rc<Value>),
    Sealed(Level, Rc<Payload>),
    Thunk(Closure),
}

#[derive(Debug, Clone)]
pub struct Closure {
    pub env: Env,
    pub term: Tm,
}

/// Persistent environment; index 0 is the innermost binding.
#[derive(Debug, Clone, Default)]
pub struct Env(Option<Rc<(Value, Env)>>);

impl Env {
    pub fn empty() -> Env {
        Env(None)
    }

    pub fn push(&self, v: Value) -> Env {
        Env(Some(Rc::new((v, self.clone()))))
    }

    pub fn lookup(&self, mut i: usize) -> Option<&Value> {
        let mut cur = self;
        loop {
            let (v, next) = cur.0.as_deref()?;
            if i == 0 {
                return Some(v);
            }
            i -= 1;
            cur = next;
        }
    }
}

impl Value {
    pub fn tt() -> Value {
        Value::Inl(Rc::new(Value::Unit))
    }

    pub fn ff() -> Value {
        Value::Inr(Rc::new(Value::Unit))
    }

    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Rc::new(a), Rc::new(b))
    }

    pub fn sealed(l: Level, v: Value) -> Value {
        Value::Sealed(l, Rc::new(Payload::Present(v)))
    }

    pub fn redacted(l: Level) -> Value {
        Value::Sealed(l, Rc::new(Payload::Redacted))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Inl(v) if matches!(**v, Value::Unit) => Some(true),
            Value::Inr(v) if matches!(**v, Value::Unit) => Some(false),
            _ => None,
        }
    }

    pub fn is_first_order(&self) -> bool {
        match self {
            Value::Unit => true,
            Value::Pair(a, b) => a.is_first_order() && b.is_first_order(),
            Value::Inl(a) | Value::Inr(a) => a.is_first_order(),
            Value::Sealed(_, p) => match &**p {
                Payload::Present(v) => v.is_first_order(),
                Payload::Redacted => true,
            },
            Value::Thunk(_) => false,
        }
    }

    pub fn display<'a>(&'a self, lat: &'a Lattice) -> ValueDisplay<'a> {
        ValueDisplay { value: self, lat }
    }
}

pub struct ValueDisplay<'a> {
    value: &'a Value,
    lat: &'a Lattice,
}

impl fmt::Display for ValueDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |v: &'_ Value| {
            ValueDisplay {
                value: v,
                lat: self.lat,
            }
            .to_string()
        };
        match self.value {
            Value::Unit => write!(f, "()"),
            v if v.as_bool() == Some(true) => write!(f, "tt"),
            v if v.as_bool() == Some(false) => write!(f, "ff"),
            Value::Pair(a, b) => write!(f, "(pair {} {})", sub(a), sub(b)),
            Value::Inl(a) => write!(f, "(inl {})", sub(a)),
            Value::Inr(a) => write!(f, "(inr {})", sub(a)),
            Value::Sealed(l, p) => match &**p {
                Payload::Present(v) => write!(f, "(seal {} {})", self.lat.name(*l), sub(v)),
                Payload::Redacted => write!(f, "(seal {} ★)", self.lat.name(*l)),
            },
            Value::Thunk(c) => write!(f, "<thunk {}>", Printer::new(self.lat).term(&c.term)),
        }
    }
}

/// Structural equality of first-order values; thunks are never equal.
pub fn value_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Unit, Value::Unit) => true,
        (Value::Pair(a1, a2), Value::Pair(b1, b2)) => value_eq(a1, b1) && value_eq(a2, b2),
        (Value::Inl(x), Value::Inl(y)) | (Value::Inr(x), Value::Inr(y)) => value_eq(x, y),
        (Value::Sealed(l, p), Value::Sealed(k, q)) if l == k => match (&**p, &**q) {
            (Payload::Redacted, Payload::Redacted) => true,
            (Payload::Present(x), Payload::Present(y)) => value_eq(x, y),
            _ => false,
        },
        _ => false,
    }
}

/// Redacts a first-order value from its stage down to stage `j`.
pub fn restrict_value(lat: &Lattice, v: &Value, j: Level) -> Result<Value, EvalError> {
    Ok(match v {
        Value::Unit => Value::Unit,
        Value::Pair(a, b) => Value::pair(restrict_value(lat, a, j)?, restrict_value(lat, b, j)?),
        Value::Inl(a) => Value::Inl(Rc::new(restrict_value(lat, a, j)?)),
        Value::Inr(a) => Value::Inr(Rc::new(restrict_value(lat, a, j)?)),
        Value::Sealed(l, p) => match &**p {
            _ if lat.leq(j, *l) => Value::redacted(*l),
            Payload::Redacted => Value::redacted(*l),
            Payload::Present(w) => Value::sealed(*l, restrict_value(lat, w, j)?),
        },
        Value::Thunk(_) => return Err(EvalError::HigherOrderValue),
    })
}

/// The unique value a sealed type has at a stage where its seal holds.
/// Defined for unit, products and seals; whether the payload of a seal is
/// redacted depends only on the stage, so the derivation is not needed.
pub fn canonical_point(lat: &Lattice, ty: &ValueType, stage: Level) -> Result<Value, EvalError> {
    match ty {
        ValueType::Unit => Ok(Value::Unit),
        ValueType::Prod(a, b) => Ok(Value::pair(
            canonical_point(lat, a, stage)?,
            canonical_point(lat, b, stage)?,
        )),
        ValueType::Seal(l, _) if lat.leq(stage, *l) => Ok(Value::redacted(*l)),
        ValueType::Seal(l, inner) => Ok(Value::sealed(*l, canonical_point(lat, inner, stage)?)),
        ValueType::Sum(..) | ValueType::U(_) => Err(EvalError::NoCanonicalPoint(
            crate::syntax::print_type(ty, lat),
        )),
    }
}

/// All values of a first-order type as they exist at `stage`.
pub fn enumerate_values(lat: &Lattice, ty: &ValueType, stage: Level) -> Vec<Value> {
    match ty {
        ValueType::Unit => vec![Value::Unit],
        ValueType::Prod(a, b) => {
            let bs = enumerate_values(lat, b, stage);
            enumerate_values(lat, a, stage)
                .into_iter()
                .flat_map(|x| bs.iter().map(move |y| Value::pair(x.clone(), y.clone())))
                .collect()
        }
        ValueType::Sum(a, b) => {
            let left = enumerate_values(lat, a, stage)
                .into_iter()
                .map(|v| Value::Inl(Rc::new(v)));
            let right = enumerate_values(lat, b, stage)
                .into_iter()
                .map(|v| Value::Inr(Rc::new(v)));
            left.chain(right).collect()
        }
        ValueType::Seal(l, _) if lat.leq(stage, *l) => vec![Value::redacted(*l)],
        ValueType::Seal(l, inner) => enumerate_values(lat, inner, stage)
            .into_iter()
            .map(|v| Value::sealed(*l, v))
            .collect(),
        ValueType::U(_) => vec![],
    }
}

/// The presheaf denoted by a first-order type: unit is terminal, products and
/// sums are levelwise, `seal_l` is the sealing modality at `↓l`.
pub fn type_presheaf(lat: &Arc<Lattice>, ty: &ValueType) -> Option<Presheaf> {
    Some(match ty {
        ValueType::Unit => presheaf::terminal(lat),
        ValueType::Prod(a, b) => {
            presheaf::product(&type_presheaf(lat, a)?, &type_presheaf(lat, b)?).ok()?
        }
        ValueType::Sum(a, b) => {
            presheaf::coproduct(&type_presheaf(lat, a)?, &type_presheaf(lat, b)?).ok()?
        }
        ValueType::Seal(l, a) => {
            presheaf::closed_modality(lat.principal_policy(*l), &type_presheaf(lat, a)?).presheaf
        }
        ValueType::U(_) => return None,
    })
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Converged(Value),
    OutOfFuel,
}

impl Outcome {
    pub fn converged(&self) -> Option<&Value> {
        match self {
            Outcome::Converged(v) => Some(v),
            Outcome::OutOfFuel => None,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, Outcome::Converged(_))
    }

    /// Same convergence, and equal values when both are first-order.
    pub fn agrees_with(&self, other: &Outcome) -> bool {
        match (self, other) {
            (Outcome::OutOfFuel, Outcome::OutOfFuel) => true,
            (Outcome::Converged(a), Outcome::Converged(b)) => {
                if a.is_first_order() && b.is_first_order() {
                    value_eq(a, b)
                } else {
                    !a.is_first_order() && !b.is_first_order()
                }
            }
            _ => false,
        }
    }

    pub fn describe(&self, lat: &Lattice) -> String {
        match self {
            Outcome::Converged(v) => format!("converged {}", v.display(lat)),
            Outcome::OutOfFuel => "out of fuel".to_string(),
        }
    }
}

/// Result of one evaluation together with the fuel it used.
#[derive(Debug, Clone)]
pub struct Run {
    pub outcome: Outcome,
    pub fuel_used: u64,
    pub trace: Vec<String>,
}

enum Stop {
    OutOfFuel,
    Error(EvalError),
}

impl From<EvalError> for Stop {
    fn from(e: EvalError) -> Self {
        Stop::Error(e)
    }
}

enum Cont {
    Bind(Env, Tm),
    Arg(Value),
}

enum Terminal {
    Returned(Value),
    Lambda(Env, Tm),
}

struct StageEval<'a> {
    lat: &'a Lattice,
    stage: Level,
    fuel: u64,
    used: u64,
    trace: Option<Vec<String>>,
}

impl StageEval<'_> {
    fn stuck(&self, t: &Term) -> Stop {
        Stop::Error(EvalError::StuckTerm(Printer::new(self.lat).term(t)))
    }

    fn note(&mut self, msg: impl FnOnce() -> String) {
        if let Some(trace) = &mut self.trace {
            trace.push(msg());
        }
    }

    fn tick(&mut self) -> Result<(), Stop> {
        if self.fuel == 0 {
            return Err(Stop::OutOfFuel);
        }
        self.fuel -= 1;
        self.used += 1;
        Ok(())
    }

    fn eval(&mut self, env: &Env, t: &Tm) -> Result<Value, Stop> {
        Ok(match &**t {
            Term::Var(i) => env.lookup(*i).cloned().ok_or_else(|| self.stuck(t))?,
            Term::Triv => Value::Unit,
            Term::Pair(a, b) => Value::pair(self.eval(env, a)?, self.eval(env, b)?),
            Term::Fst(e) | Term::Snd(e) => match self.eval(env, e)? {
                Value::Pair(a, b) => {
                    let v = if matches!(**t, Term::Fst(_)) { a } else { b };
                    (*v).clone()
                }
                _ => return Err(self.stuck(t)),
            },
            Term::Inl(e) => Value::Inl(Rc::new(self.eval(env, e)?)),
            Term::Inr(e) => Value::Inr(Rc::new(self.eval(env, e)?)),
            Term::Case(e, _, l, _, r) => match self.eval(env, e)? {
                Value::Inl(v) => self.eval(&env.push((*v).clone()), l)?,
                Value::Inr(v) => self.eval(&env.push((*v).clone()), r)?,
                _ => return Err(self.stuck(t)),
            },
            Term::Seal(l, e) => {
                // The body is evaluated even when the stage redacts it.
                let v = self.eval(env, e)?;
                if self.lat.leq(self.stage, *l) {
                    Value::redacted(*l)
                } else {
                    Value::sealed(*l, v)
                }
            }
            Term::Unseal(l, u, _, body, target) => match self.eval(env, u)? {
                Value::Sealed(l2, p) if l2 == *l => match &*p {
                    Payload::Present(v) => self.eval(&env.push(v.clone()), body)?,
                    Payload::Redacted => {
                        self.note(|| "unseal of redacted payload: canonical point".into());
                        canonical_point(self.lat, target, self.stage)?
                    }
                },
                _ => return Err(self.stuck(t)),
            },
            Term::Ann(e, _) => self.eval(env, e)?,
            Term::Lam(..)
            | Term::Ret(_)
            | Term::Bind(..)
            | Term::Fix(..)
            | Term::App(..)
            | Term::Tdcl(..) => Value::Thunk(Closure {
                env: env.clone(),
                term: t.clone(),
            }),
        })
    }

    fn force(&mut self, mut thunk: Value) -> Result<Terminal, Stop> {
        let mut stack: Vec<Cont> = Vec::new();
        loop {
            let Value::Thunk(Closure { env, term }) = thunk else {
                return Err(Stop::Error(EvalError::StuckTerm(
                    "forcing a non-thunk".to_string(),
                )));
            };
            let returned = match &*term {
                Term::Lam(_, body) => match stack.pop() {
                    None => return Ok(Terminal::Lambda(env, body.clone())),
                    Some(Cont::Arg(v)) => {
                        thunk = self.eval(&env.push(v), body)?;
                        continue;
                    }
                    Some(Cont::Bind(..)) => return Err(self.stuck(&term)),
                },
                Term::Ret(e) => self.eval(&env, e)?,
                Term::Bind(m, _, body) => {
                    stack.push(Cont::Bind(env.clone(), body.clone()));
                    thunk = self.eval(&env, m)?;
                    continue;
                }
                Term::Fix(_, body) => {
                    self.tick()?;
                    self.note(|| "unroll fix".into());
                    let me = Value::Thunk(Closure {
                        env: env.clone(),
                        term: term.clone(),
                    });
                    thunk = self.eval(&env.push(me), body)?;
                    continue;
                }
                Term::App(f, a) => {
                    stack.push(Cont::Arg(self.eval(&env, a)?));
                    thunk = self.eval(&env, f)?;
                    continue;
                }
                Term::Tdcl(l, u, ty) => {
                    if self.lat.leq(self.stage, *l) {
                        self.note(|| {
                            format!(
                                "tdcl {}: observer below the seal, short-circuit",
                                self.lat.name(*l)
                            )
                        });
                        canonical_point(self.lat, ty, self.stage)?
                    } else {
                        match self.eval(&env, u)? {
                            Value::Sealed(l2, p) if l2 == *l => match &*p {
                                Payload::Present(inner) => {
                                    self.note(|| format!("tdcl {}: force", self.lat.name(*l)));
                                    thunk = inner.clone();
                                    continue;
                                }
                                Payload::Redacted => return Err(self.stuck(&term)),
                            },
                            _ => return Err(self.stuck(&term)),
                        }
                    }
                }
                _ => return Err(self.stuck(&term)),
            };
            match stack.pop() {
                None => return Ok(Terminal::Returned(returned)),
                Some(Cont::Bind(benv, body)) => thunk = self.eval(&benv.push(returned), &body)?,
                Some(Cont::Arg(_)) => return Err(self.stuck(&term)),
            }
        }
    }

    fn finish(self, r: Result<Value, Stop>) -> Result<Run, EvalError> {
        let outcome = match r {
            Ok(v) => Outcome::Converged(v),
            Err(Stop::OutOfFuel) => Outcome::OutOfFuel,
            Err(Stop::Error(e)) => return Err(e),
        };
        Ok(Run {
            outcome,
            fuel_used: self.used,
            trace: self.trace.unwrap_or_default(),
        })
    }

    /// Runs a value: thunks are forced, a returned value or a λ is the result.
    fn run_value(&mut self, v: Value) -> Result<Value, Stop> {
        match v {
            Value::Thunk(_) => match self.force(v)? {
                Terminal::Returned(r) => Ok(r),
                Terminal::Lambda(env, body) => Ok(Value::Thunk(Closure {
                    env,
                    term: Rc::new(Term::Lam(Default::default(), body)),
                })),
            },
            other => Ok(other),
        }
    }
}

/// Options for a single stage evaluation.
#[derive(Debug, Clone, Copy)]
pub struct StageOptions {
    pub fuel: u64,
    pub trace: bool,
}

fn evaluator(lat: &Lattice, stage: Level, opts: StageOptions) -> StageEval<'_> {
    StageEval {
        lat,
        stage,
        fuel: opts.fuel,
        used: 0,
        trace: opts.trace.then(Vec::new),
    }
}

/// Evaluates a closed term at `stage`. A thunk is forced; its returned value
/// is the result.
pub fn eval_stage(lat: &Lattice, t: &Tm, stage: Level, fuel: u64) -> Result<Run, EvalError> {
    eval_stage_with(lat, t, stage, StageOptions { fuel, trace: false })
}

pub fn eval_stage_with(
    lat: &Lattice,
    t: &Tm,
    stage: Level,
    opts: StageOptions,
) -> Result<Run, EvalError> {
    let mut ev = evaluator(lat, stage, opts);
    let r = ev.eval(&Env::empty(), t).and_then(|v| ev.run_value(v));
    ev.finish(r)
}

/// Applies a closed function term to a stage value and runs the result.
pub fn apply_stage(
    lat: &Lattice,
    f: &Tm,
    arg: Value,
    stage: Level,
    fuel: u64,
) -> Result<Run, EvalError> {
    let mut ev = evaluator(lat, stage, StageOptions { fuel, trace: false });
    let r = (|| {
        let fv = ev.eval(&Env::empty(), f)?;
        match ev.force(fv)? {
            Terminal::Lambda(env, body) => {
                let v = ev.eval(&env.push(arg), &body)?;
                ev.run_value(v)
            }
            Terminal::Returned(_) => Err(ev.stuck(f)),
        }
    })();
    ev.finish(r)
}

/// Evaluates an open value term whose free variables are bound to `inputs`
/// (outermost first).
pub fn eval_open_value(
    lat: &Lattice,
    t: &Tm,
    inputs: &[Value],
    stage: Level,
) -> Result<Value, EvalError> {
    let env = inputs
        .iter()
        .fold(Env::empty(), |env, v| env.push(v.clone()));
    let mut ev = evaluator(
        lat,
        stage,
        StageOptions {
            fuel: 0,
            trace: false,
        },
    );
    match ev.eval(&env, t) {
        Ok(v) => Ok(v),
        Err(Stop::Error(e)) => Err(e),
        Err(Stop::OutOfFuel) => unreachable!("value evaluation spends no fuel"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub converged: bool,
    pub fuel_used: u64,
}

/// Stages at which a computation converges within the budget.
#[derive(Debug, Clone)]
pub struct Support {
    pub open: Open,
    pub stages: Vec<StageReport>,
    pub outcomes: Vec<Outcome>,
}

pub fn support(lat: &Lattice, t: &Tm, fuel: u64) -> Result<Support, EvalError> {
    let mut bits = 0u64;
    let mut stages = Vec::with_capacity(lat.len());
    let mut outcomes = Vec::with_capacity(lat.len());
    for k in lat.levels() {
        let run = eval_stage(lat, t, k, fuel)?;
        if run.outcome.is_converged() {
            bits |= 1 << k.index();
        }
        stages.push(StageReport {
            stage: lat.name(k).to_string(),
            converged: run.outcome.is_converged(),
            fuel_used: run.fuel_used,
        });
        outcomes.push(run.outcome);
    }
    let open = lat.open_from_bits(bits).map_err(|_| {
        let per_stage: Vec<String> = stages
            .iter()
            .map(|s| format!("{}={}", s.stage, if s.converged { "↓" } else { "⊥" }))
            .collect();
        EvalError::NotDownwardClosed(format!(
            "{} at fuel {fuel} for `{}`",
            per_stage.join(" "),
            Printer::new(lat).term(t)
        ))
    })?;
    Ok(Support {
        open,
        stages,
        outcomes,
    })
}

// ---------------------------------------------------------------------------
// Operational machine

enum Frame {
    Bind(Tm),
    Arg(Tm),
    Tdcl,
}

struct Machine<'a> {
    lat: &'a Lattice,
    fuel: u64,
    used: u64,
}

impl Machine<'_> {
    fn stuck(&self, t: &Term) -> EvalError {
        EvalError::StuckTerm(Printer::new(self.lat).term(t))
    }

    /// Reduces value-level eliminations until the head is an introduction
    /// form or a computation; computations are left untouched.
    fn normalize(&self, t: &Tm) -> Result<Tm, EvalError> {
        Ok(match &**t {
            Term::Triv
            | Term::Lam(..)
            | Term::Ret(_)
            | Term::Bind(..)
            | Term::Fix(..)
            | Term::App(..)
            | Term::Tdcl(..) => t.clone(),
            Term::Var(_) => return Err(self.stuck(t)),
            Term::Pair(a, b) => Rc::new(Term::Pair(self.normalize(a)?, self.normalize(b)?)),
            Term::Inl(a) => Rc::new(Term::Inl(self.normalize(a)?)),
            Term::Inr(a) => Rc::new(Term::Inr(self.normalize(a)?)),
            Term::Seal(l, a) => Rc::new(Term::Seal(*l, self.normalize(a)?)),
            Term::Ann(a, _) => self.normalize(a)?,
            Term::Fst(e) | Term::Snd(e) => match &*self.normalize(e)? {
                Term::Pair(a, b) => {
                    if matches!(**t, Term::Fst(_)) {
                        a.clone()
                    } else {
                        b.clone()
                    }
                }
                _ => return Err(self.stuck(t)),
            },
            Term::Case(e, _, l, _, r) => match &*self.normalize(e)? {
                Term::Inl(v) => self.normalize(&subst_top(l, v))?,
                Term::Inr(v) => self.normalize(&subst_top(r, v))?,
                _ => return Err(self.stuck(t)),
            },
            Term::Unseal(l, u, _, body, _) => match &*self.normalize(u)? {
                Term::Seal(l2, v) if l2 == l => self.normalize(&subst_top(body, v))?,
                _ => return Err(self.stuck(t)),
            },
        })
    }

    fn run(&mut self, t: &Tm) -> Result<Option<Tm>, EvalError> {
        let mut stack: Vec<Frame> = Vec::new();
        let mut c = self.normalize(t)?;
        loop {
            c = match &*c {
                Term::Ret(e) => {
                    let v = self.normalize(e)?;
                    match stack.pop() {
                        None => return Ok(Some(v)),
                        Some(Frame::Bind(body)) => self.normalize(&subst_top(&body, &v))?,
                        Some(Frame::Tdcl) => Rc::new(Term::Ret(v)),
                        Some(Frame::Arg(_)) => return Err(self.stuck(&c)),
                    }
                }
                Term::Lam(_, body) => match stack.pop() {
                    Some(Frame::Arg(v)) => self.normalize(&subst_top(body, &v))?,
                    None => return Ok(Some(c)),
                    Some(_) => return Err(self.stuck(&c)),
                },
                Term::Bind(m, _, body) => {
                    stack.push(Frame::Bind(body.clone()));
                    self.normalize(m)?
                }
                Term::App(f, a) => {
                    stack.push(Frame::Arg(self.normalize(a)?));
                    self.normalize(f)?
                }
                Term::Fix(_, body) => {
                    if self.fuel == 0 {
                        return Ok(None);
                    }
                    self.fuel -= 1;
                    self.used += 1;
                    self.normalize(&subst_top(body, &c))?
                }
                Term::Tdcl(l, u, _) => match &*self.normalize(u)? {
                    Term::Seal(l2, m) if l2 == l => {
                        stack.push(Frame::Tdcl);
                        self.normalize(m)?
                    }
                    _ => return Err(self.stuck(&c)),
                },
                _ => return Err(self.stuck(&c)),
            };
        }
    }
}

/// Reads a closed normal value term back as a [`Value`] with every seal
/// present; computations become closures over the empty environment.
pub fn value_of_term(t: &Tm) -> Value {
    match &**t {
        Term::Triv => Value::Unit,
        Term::Pair(a, b) => Value::pair(value_of_term(a), value_of_term(b)),
        Term::Inl(a) => Value::Inl(Rc::new(value_of_term(a))),
        Term::Inr(a) => Value::Inr(Rc::new(value_of_term(a))),
        Term::Seal(l, a) => Value::sealed(*l, value_of_term(a)),
        Term::Ann(a, _) => value_of_term(a),
        _ => Value::Thunk(Closure {
            env: Env::empty(),
            term: t.clone(),
        }),
    }
}

/// Runs a closed term on the level-blind machine.
pub fn eval_operational(lat: &Lattice, t: &Tm, fuel: u64) -> Result<Run, EvalError> {
    let mut m = Machine { lat, fuel, used: 0 };
    let normal = m.normalize(t)?;
    let is_computation = matches!(
        &*normal,
        Term::Ret(_) | Term::Bind(..) | Term::Fix(..) | Term::App(..) | Term::Tdcl(..)
    );
    let result = if is_computation {
        m.run(&normal)?
    } else {
        Some(normal)
    };
    Ok(Run {
        outcome: match result {
            Some(v) => Outcome::Converged(value_of_term(&v)),
            None => Outcome::OutOfFuel,
        },
        fuel_used: m.used,
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn lat() -> Lattice {
        Lattice::chain4()
    }

    fn lv(lat: &Lattice, n: &str) -> Level {
        lat.level(n).unwrap()
    }

    const C: &str = "(the (U (fn (seal M bool) (F unit))) (lam u (tdcl M (unseal M u (b) (seal M (if b (ret ()) (fix z z))) (seal M (U (F unit)))) unit)))";

    fn c_applied(lat: &Lattice, arg: &str) -> Tm {
        parse_term(&format!("(app {C} (seal M {arg}))"), lat).unwrap()
    }

    #[test]
    fn termination_example_per_stage() {
        let lat = lat();
        let cx = c_applied(&lat, "tt");
        let cy = c_applied(&lat, "ff");
        let g = lv(&lat, "G");
        let m = lv(&lat, "M");
        let run = eval_stage(&lat, &cx, g, 100).unwrap();
        assert!(matches!(run.outcome, Outcome::Converged(Value::Unit)));
        assert!(!eval_stage(&lat, &cy, g, 100)
            .unwrap()
            .outcome
            .is_converged());
        assert!(eval_stage(&lat, &cy, m, 100)
            .unwrap()
            .outcome
            .is_converged());

        let s = support(&lat, &cx, 100).unwrap();
        assert_eq!(s.open, lat.full_open());
        let s = support(&lat, &cy, 100).unwrap();
        assert_eq!(s.open, lat.principal_policy(m));
        let bot = parse_term("(the (U (F unit)) (fix z z))", &lat).unwrap();
        assert!(support(&lat, &bot, 100).unwrap().open.is_empty());
    }

    #[test]
    fn termination_example_operationally() {
        let lat = lat();
        let cx = eval_operational(&lat, &c_applied(&lat, "tt"), 100).unwrap();
        assert!(matches!(cx.outcome, Outcome::Converged(Value::Unit)));
        let cy = eval_operational(&lat, &c_applied(&lat, "ff"), 100).unwrap();
        assert!(!cy.outcome.is_converged());
        assert_eq!(cy.fuel_used, 100);
        let beta = parse_term("(tdcl M (seal M (ret ())) unit)", &lat).unwrap();
        let run = eval_operational(&lat, &beta, 0).unwrap();
        assert!(matches!(run.outcome, Outcome::Converged(Value::Unit)));
    }

    #[test]
    fn bind_of_return_needs_no_fuel() {
        let lat = lat();
        let t = parse_term("(bind (ret tt) (x) (ret x))", &lat).unwrap();
        for k in lat.levels() {
            let run = eval_stage(&lat, &t, k, 0).unwrap();
            assert_eq!(run.outcome.converged().and_then(Value::as_bool), Some(true));
        }
    }

    #[test]
    fn canonical_points() {
        let lat = lat();
        let m = lv(&lat, "M");
        for k in lat.levels() {
            assert!(value_eq(
                &canonical_point(&lat, &ValueType::Unit, k).unwrap(),
                &Value::Unit
            ));
        }
        let ty = ValueType::seal(m, ValueType::bool());
        assert!(value_eq(
            &canonical_point(&lat, &ty, lv(&lat, "L")).unwrap(),
            &Value::redacted(m)
        ));
        let d = Lattice::diamond();
        let ty = ValueType::seal(lv(&d, "b"), ValueType::Unit);
        assert!(value_eq(
            &canonical_point(&d, &ty, lv(&d, "a")).unwrap(),
            &Value::sealed(lv(&d, "b"), Value::Unit)
        ));
        assert!(canonical_point(&lat, &ValueType::bool(), m).is_err());
    }

    #[test]
    fn restriction_examples() {
        let lat = lat();
        let (m, h) = (lv(&lat, "M"), lv(&lat, "H"));
        let v = Value::sealed(m, Value::tt());
        assert!(value_eq(
            &restrict_value(&lat, &v, lv(&lat, "L")).unwrap(),
            &Value::redacted(m)
        ));
        let p = Value::pair(Value::tt(), Value::sealed(h, Value::ff()));
        assert!(value_eq(
            &restrict_value(&lat, &p, h).unwrap(),
            &Value::pair(Value::tt(), Value::redacted(h))
        ));
        for k in lat.levels() {
            let v = Value::pair(Value::ff(), Value::Unit);
            assert!(value_eq(&restrict_value(&lat, &v, k).unwrap(), &v));
        }
        let thunk = Value::Thunk(Closure {
            env: Env::empty(),
            term: parse_term("(ret ())", &lat).unwrap(),
        });
        assert_eq!(
            restrict_value(&lat, &thunk, m).unwrap_err(),
            EvalError::HigherOrderValue
        );
    }

    #[test]
    fn value_equality() {
        let lat = lat();
        let (m, h) = (lv(&lat, "M"), lv(&lat, "H"));
        assert!(value_eq(&Value::tt(), &Value::tt()));
        assert!(!value_eq(&Value::redacted(m), &Value::redacted(h)));
        assert!(!value_eq(&Value::tt(), &Value::ff()));
    }

    #[test]
    fn values_match_type_presheaf_carriers() {
        let lat = Arc::new(lat());
        let m = lv(&lat, "M");
        let ty = ValueType::prod(
            ValueType::seal(m, ValueType::bool()),
            ValueType::sum(ValueType::Unit, ValueType::bool()),
        );
        let psh = type_presheaf(&lat, &ty).unwrap();
        for k in lat.levels() {
            assert_eq!(enumerate_values(&lat, &ty, k).len(), psh.size(k));
        }
    }

    #[test]
    fn fuel_is_only_spent_on_fix() {
        let lat = lat();
        let t = parse_term(
            "(the (U (F bool)) (bind (fix f (ret tt)) (x) (ret (not x))))",
            &lat,
        )
        .unwrap();
        let run = eval_stage(&lat, &t, lat.top(), 1).unwrap();
        assert_eq!(run.fuel_used, 1);
        assert_eq!(
            run.outcome.converged().and_then(Value::as_bool),
            Some(false)
        );
        assert!(!eval_stage(&lat, &t, lat.top(), 0)
            .unwrap()
            .outcome
            .is_converged());
        let op = eval_operational(&lat, &t, 1).unwrap();
        assert_eq!(op.fuel_used, 1);
        assert!(op.outcome.agrees_with(&run.outcome));
    }

    #[test]
    fn trace_records_short_circuit() {
        let lat = lat();
        let t = c_applied(&lat, "ff");
        let run = eval_stage_with(
            &lat,
            &t,
            lv(&lat, "L"),
            StageOptions {
                fuel: 10,
                trace: true,
            },
        )
        .unwrap();
        assert!(run.trace.iter().any(|e| e.contains("short-circuit")));
    }

    #[test]
    fn deep_divergence_does_not_overflow() {
        let lat = lat();
        for src in [
            "(the (U (F unit)) (fix z z))",
            "(the (U (F unit)) (fix z (bind z (x) (ret x))))",
        ] {
            let t = parse_term(src, &lat).unwrap();
            let run = eval_stage(&lat, &t, lat.top(), 200_000).unwrap();
            assert_eq!(run.fuel_used, 200_000);
            let run = eval_operational(&lat, &t, 200_000).unwrap();
            assert_eq!(run.fuel_used, 200_000);
        }
    }

    fn first_order_types(lat: &Lattice, max: usize) -> Vec<ValueType> {
        let mut by_size: Vec<Vec<ValueType>> = vec![vec![], vec![ValueType::Unit]];
        for n in 2..=max {
            let mut here = Vec::new();
            for l in lat.levels() {
                for a in &by_size[n - 1] {
                    here.push(ValueType::seal(l, a.clone()));
                }
            }
            for i in 1..n - 1 {
                for a in &by_size[i] {
                    for b in &by_size[n - 1 - i] {
                        here.push(ValueType::prod(a.clone(), b.clone()));
                        here.push(ValueType::sum(a.clone(), b.clone()));
                    }
                }
            }
            by_size.push(here);
        }
        by_size.concat()
    }

    fn sealed_judgement_is_sound_on(lat: Lattice) {
        let lat = Arc::new(lat);
        let mut derived = 0;
        for ty in first_order_types(&lat, 4) {
            let psh = type_presheaf(&lat, &ty).unwrap();
            for l in lat.levels() {
                if crate::typecheck::sealed_judgement(&lat, l, &ty).is_ok() {
                    derived += 1;
                    assert!(
                        presheaf::is_sealed(lat.principal_policy(l), &psh),
                        "{} at {}",
                        crate::syntax::print_type(&ty, &lat),
                        lat.name(l)
                    );
                    for k in lat.levels().filter(|&k| lat.leq(k, l)) {
                        let pts = enumerate_values(&lat, &ty, k);
                        assert_eq!(pts.len(), 1);
                        assert!(value_eq(&pts[0], &canonical_point(&lat, &ty, k).unwrap()));
                    }
                }
            }
        }
        assert!(derived > 0);
    }

    #[test]
    fn sealed_judgement_is_sound_on_chain() {
        sealed_judgement_is_sound_on(Lattice::chain4());
    }

    #[test]
    fn sealed_judgement_is_sound_on_diamond() {
        sealed_judgement_is_sound_on(Lattice::diamond());
    }

    #[test]
    fn sealed_judgement_is_antitone_in_level() {
        for lat in [Lattice::chain4(), Lattice::diamond()] {
            for ty in first_order_types(&lat, 4) {
                for l in lat.levels() {
                    if crate::typecheck::sealed_judgement(&lat, l, &ty).is_err() {
                        continue;
                    }
                    for j in lat.levels().filter(|&j| lat.leq(j, l)) {
                        assert!(crate::typecheck::sealed_judgement(&lat, j, &ty).is_ok());
                    }
                }
            }
        }
    }

    fn arb_type() -> impl proptest::strategy::Strategy<Value = ValueType> {
        use proptest::prelude::*;
        let leaf = Just(ValueType::Unit);
        leaf.prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ValueType::prod(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ValueType::sum(a, b)),
                (0usize..4, inner).prop_map(|(l, a)| ValueType::seal(Level(l), a)),
            ]
        })
    }

    proptest::proptest! {
        #[test]
        fn restriction_is_functorial(ty in arb_type(), k in 0usize..4, j in 0usize..4, i in 0usize..4) {
            let lat = Lattice::chain4();
            let mut ks = [Level(k), Level(j), Level(i)];
            ks.sort_by_key(|l| std::cmp::Reverse(l.index()));
            let [k, j, i] = ks;
            for v in enumerate_values(&lat, &ty, k) {
                proptest::prop_assert!(value_eq(&restrict_value(&lat, &v, k).unwrap(), &v));
                let vj = restrict_value(&lat, &v, j).unwrap();
                proptest::prop_assert!(enumerate_values(&lat, &ty, j).iter().any(|w| value_eq(w, &vj)));
                let direct = restrict_value(&lat, &v, i).unwrap();
                let staged = restrict_value(&lat, &vj, i).unwrap();
                proptest::prop_assert!(value_eq(&direct, &staged));
            }
        }

        #[test]
        fn value_counts_match_denotation(ty in arb_type()) {
            let lat = Arc::new(Lattice::diamond());
            let psh = type_presheaf(&lat, &ty).unwrap();
            for k in lat.levels() {
                proptest::prop_assert_eq!(enumerate_values(&lat, &ty, k).len(), psh.size(k));
            }
        }
    }

    #[test]
    fn fuel_parsing() {
        assert_eq!(fuel_from_i64(5), Ok(5));
        assert_eq!(fuel_from_i64(-1), Err(EvalError::FuelMustBeNonNegative(-1)));
    }
}
