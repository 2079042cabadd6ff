//! Bidirectional typechecking.
//!
//! Introduction forms are checked against a type, eliminations infer one;
//! `the`, `unseal` and `tdcl` carry the annotations needed to switch modes.
//! `unseal_l` and `tdcl_l` additionally require their target to be sealed at
//! `l`, decided by the syntactic judgement [`sealed_judgement`]:
//!
//! ```text
//! S-Unit       ▲_l unit
//! S-Prod       ▲_l A, ▲_l B        ⟹  ▲_l (* A B)
//! S-SealAbove  l ⊑ l'              ⟹  ▲_l (seal l' A)
//! S-SealInner  ▲_l A               ⟹  ▲_l (seal l' A)
//! ```
//!
//! Sums and thunks are never sealed: a sum can always be split, and every
//! thunk bottoms out in an `F`, whose termination is observable.

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{Lattice, Level};
use crate::syntax::{CompType, Printer, Term, ValueType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SealedDerivation {
    Unit,
    Prod(Box<SealedDerivation>, Box<SealedDerivation>),
    SealAbove(Level),
    SealInner(Level, Box<SealedDerivation>),
}

impl SealedDerivation {
    pub fn rule(&self) -> &'static str {
        match self {
            SealedDerivation::Unit => "S-Unit",
            SealedDerivation::Prod(..) => "S-Prod",
            SealedDerivation::SealAbove(_) => "S-SealAbove",
            SealedDerivation::SealInner(..) => "S-SealInner",
        }
    }
}

/// Why `▲_l A` could not be derived: the smallest subformula on which every
/// rule failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotSealed {
    pub level: Level,
    pub failing: ValueType,
}

pub fn sealed_judgement(
    lat: &Lattice,
    l: Level,
    ty: &ValueType,
) -> Result<SealedDerivation, NotSealed> {
    match ty {
        ValueType::Unit => Ok(SealedDerivation::Unit),
        ValueType::Prod(a, b) => Ok(SealedDerivation::Prod(
            Box::new(sealed_judgement(lat, l, a)?),
            Box::new(sealed_judgement(lat, l, b)?),
        )),
        ValueType::Seal(l2, inner) => {
            if lat.leq(l, *l2) {
                return Ok(SealedDerivation::SealAbove(*l2));
            }
            match sealed_judgement(lat, l, inner) {
                Ok(d) => Ok(SealedDerivation::SealInner(*l2, Box::new(d))),
                Err(_) => Err(NotSealed {
                    level: l,
                    failing: ty.clone(),
                }),
            }
        }
        ValueType::Sum(..) | ValueType::U(_) => Err(NotSealed {
            level: l,
            failing: ty.clone(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind")]
pub enum TypeError {
    #[error("type mismatch at `{term}`: expected {expected}, found {got}")]
    TypeMismatch {
        expected: String,
        got: String,
        term: String,
    },
    #[error("`{target}` is not sealed at {level}: no rule applies to `{failing}` (in `{term}`)")]
    NotSealed {
        level: String,
        target: String,
        failing: String,
        term: String,
    },
    #[error("unbound variable #{index}")]
    UnboundVariable { index: usize },
    #[error("cannot infer a type for `{term}`; add an annotation with `the`")]
    CannotInfer { term: String },
    #[error("`{term}` is a {construct} at the top level {level}")]
    TopLevelSeal {
        level: String,
        construct: String,
        term: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: &'static str,
    pub message: String,
    #[serde(flatten)]
    pub error: TypeError,
}

impl From<TypeError> for Diagnostic {
    fn from(error: TypeError) -> Self {
        Diagnostic {
            severity: "error",
            message: error.to_string(),
            error,
        }
    }
}

/// Ordered bindings; index 0 of a de Bruijn variable is the last entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    types: Vec<ValueType>,
    names: Vec<String>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, ty: ValueType) {
        self.names.push(name.to_string());
        self.types.push(ty);
    }

    pub fn pop(&mut self) {
        self.names.pop();
        self.types.pop();
    }

    pub fn lookup(&self, index: usize) -> Option<&ValueType> {
        self.types
            .len()
            .checked_sub(index + 1)
            .map(|i| &self.types[i])
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn types(&self) -> &[ValueType] {
        &self.types
    }
}

pub struct Checker<'a> {
    lat: &'a Lattice,
    strict: bool,
    warnings: Vec<TypeError>,
}

impl<'a> Checker<'a> {
    pub fn new(lat: &'a Lattice) -> Self {
        Checker {
            lat,
            strict: false,
            warnings: Vec::new(),
        }
    }

    /// Treat seal annotations at the top level as errors.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn warnings(&self) -> &[TypeError] {
        &self.warnings
    }

    pub fn take_warnings(&mut self) -> Vec<TypeError> {
        std::mem::take(&mut self.warnings)
    }

    fn show_ty(&self, ty: &ValueType) -> String {
        Printer::new(self.lat).value_type(ty)
    }

    fn show(&self, ctx: &Context, t: &Term) -> String {
        let mut scope = ctx.names.clone();
        let s = Printer::new(self.lat).term_in(t, &mut scope);
        if s.chars().count() > 80 {
            let cut: String = s.chars().take(77).collect();
            format!("{cut}...")
        } else {
            s
        }
    }

    fn mismatch(&self, ctx: &Context, t: &Term, expected: &str, got: &str) -> TypeError {
        TypeError::TypeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
            term: self.show(ctx, t),
        }
    }

    fn require_sealed(
        &self,
        ctx: &Context,
        t: &Term,
        l: Level,
        ty: &ValueType,
    ) -> Result<SealedDerivation, TypeError> {
        sealed_judgement(self.lat, l, ty).map_err(|e| TypeError::NotSealed {
            level: self.lat.name(l).to_string(),
            target: self.show_ty(ty),
            failing: self.show_ty(&e.failing),
            term: self.show(ctx, t),
        })
    }

    fn top_level_site(&mut self, ctx: &Context, t: &Term, l: Level) -> Result<(), TypeError> {
        if l != self.lat.top() {
            return Ok(());
        }
        let construct = match t {
            Term::Seal(..) => "seal",
            Term::Unseal(..) => "unseal",
            _ => "tdcl",
        };
        let w = TypeError::TopLevelSeal {
            level: self.lat.name(l).to_string(),
            construct: construct.to_string(),
            term: self.show(ctx, t),
        };
        if self.strict {
            return Err(w);
        }
        self.warnings.push(w);
        Ok(())
    }

    fn under<T>(
        &mut self,
        ctx: &mut Context,
        name: &str,
        ty: ValueType,
        f: impl FnOnce(&mut Self, &mut Context) -> Result<T, TypeError>,
    ) -> Result<T, TypeError> {
        ctx.push(name, ty);
        let r = f(self, ctx);
        ctx.pop();
        r
    }

    pub fn check(&mut self, ctx: &mut Context, t: &Term, ty: &ValueType) -> Result<(), TypeError> {
        match (t, ty) {
            (Term::Triv, ValueType::Unit) => Ok(()),
            (Term::Pair(a, b), ValueType::Prod(ta, tb)) => {
                self.check(ctx, a, ta)?;
                self.check(ctx, b, tb)
            }
            (Term::Inl(a), ValueType::Sum(ta, _)) => self.check(ctx, a, ta),
            (Term::Inr(b), ValueType::Sum(_, tb)) => self.check(ctx, b, tb),
            (Term::Seal(l, a), ValueType::Seal(l2, ta)) if l == l2 => {
                self.top_level_site(ctx, t, *l)?;
                self.check(ctx, a, ta)
            }
            (Term::Lam(x, body), ValueType::U(c)) => match &**c {
                CompType::Fn(arg, res) => {
                    let res = ValueType::U(res.clone());
                    self.under(ctx, &x.0, (**arg).clone(), |me, ctx| {
                        me.check(ctx, body, &res)
                    })
                }
                CompType::F(_) => Err(self.mismatch(ctx, t, &self.show_ty(ty), "a function")),
            },
            (Term::Ret(a), ValueType::U(c)) => match &**c {
                CompType::F(ta) => self.check(ctx, a, ta),
                CompType::Fn(..) => Err(self.mismatch(ctx, t, &self.show_ty(ty), "(U (F _))")),
            },
            (Term::Fix(x, body), ValueType::U(_)) => {
                self.under(ctx, &x.0, ty.clone(), |me, ctx| me.check(ctx, body, ty))
            }
            (Term::Bind(m, x, body), ValueType::U(_)) => {
                let a = self.infer_returned(ctx, m)?;
                self.under(ctx, &x.0, a, |me, ctx| me.check(ctx, body, ty))
            }
            (Term::Case(e, x, l, y, r), _) => {
                let (ta, tb) = self.infer_sum(ctx, e)?;
                self.under(ctx, &x.0, ta, |me, ctx| me.check(ctx, l, ty))?;
                self.under(ctx, &y.0, tb, |me, ctx| me.check(ctx, r, ty))
            }
            (
                Term::Triv
                | Term::Pair(..)
                | Term::Inl(_)
                | Term::Inr(_)
                | Term::Lam(..)
                | Term::Ret(_)
                | Term::Fix(..),
                _,
            ) => Err(self.mismatch(ctx, t, &self.show_ty(ty), intro_shape(t))),
            _ => {
                let got = self.infer(ctx, t)?;
                if &got == ty {
                    Ok(())
                } else {
                    Err(self.mismatch(ctx, t, &self.show_ty(ty), &self.show_ty(&got)))
                }
            }
        }
    }

    fn infer_returned(&mut self, ctx: &mut Context, m: &Term) -> Result<ValueType, TypeError> {
        match self.infer(ctx, m)? {
            ValueType::U(c) => match *c {
                CompType::F(a) => Ok(*a),
                other => Err(self.mismatch(
                    ctx,
                    m,
                    "(U (F _))",
                    &self.show_ty(&ValueType::U(Box::new(other))),
                )),
            },
            other => Err(self.mismatch(ctx, m, "(U (F _))", &self.show_ty(&other))),
        }
    }

    fn infer_sum(
        &mut self,
        ctx: &mut Context,
        e: &Term,
    ) -> Result<(ValueType, ValueType), TypeError> {
        match self.infer(ctx, e)? {
            ValueType::Sum(a, b) => Ok((*a, *b)),
            other => Err(self.mismatch(ctx, e, "(+ _ _)", &self.show_ty(&other))),
        }
    }

    pub fn infer(&mut self, ctx: &mut Context, t: &Term) -> Result<ValueType, TypeError> {
        match t {
            Term::Var(i) => ctx
                .lookup(*i)
                .cloned()
                .ok_or(TypeError::UnboundVariable { index: *i }),
            Term::Triv => Ok(ValueType::Unit),
            Term::Ann(e, ty) => {
                self.check(ctx, e, ty)?;
                Ok(ty.clone())
            }
            Term::Pair(a, b) => Ok(ValueType::prod(self.infer(ctx, a)?, self.infer(ctx, b)?)),
            Term::Fst(e) | Term::Snd(e) => match self.infer(ctx, e)? {
                ValueType::Prod(a, b) => Ok(if matches!(t, Term::Fst(_)) { *a } else { *b }),
                other => Err(self.mismatch(ctx, e, "(* _ _)", &self.show_ty(&other))),
            },
            Term::Seal(l, e) => {
                self.top_level_site(ctx, t, *l)?;
                Ok(ValueType::seal(*l, self.infer(ctx, e)?))
            }
            Term::Ret(e) => Ok(ValueType::comp(self.infer(ctx, e)?)),
            Term::App(f, a) => match self.infer(ctx, f)? {
                ValueType::U(c) => match *c {
                    CompType::Fn(arg, res) => {
                        self.check(ctx, a, &arg)?;
                        Ok(ValueType::U(res))
                    }
                    other => Err(self.mismatch(
                        ctx,
                        f,
                        "(U (fn _ _))",
                        &self.show_ty(&ValueType::U(Box::new(other))),
                    )),
                },
                other => Err(self.mismatch(ctx, f, "(U (fn _ _))", &self.show_ty(&other))),
            },
            Term::Bind(m, x, body) => {
                let a = self.infer_returned(ctx, m)?;
                let res = self.under(ctx, &x.0, a, |me, ctx| me.infer(ctx, body))?;
                match res {
                    ValueType::U(_) => Ok(res),
                    other => Err(self.mismatch(ctx, body, "(U _)", &self.show_ty(&other))),
                }
            }
            Term::Case(e, x, l, y, r) => {
                let (ta, tb) = self.infer_sum(ctx, e)?;
                let res = self.under(ctx, &x.0, ta, |me, ctx| me.infer(ctx, l))?;
                self.under(ctx, &y.0, tb, |me, ctx| me.check(ctx, r, &res))?;
                Ok(res)
            }
            Term::Unseal(l, u, x, body, target) => {
                self.top_level_site(ctx, t, *l)?;
                let inner = match self.infer(ctx, u)? {
                    ValueType::Seal(l2, inner) if l2 == *l => *inner,
                    other => {
                        let expected = format!("(seal {} _)", self.lat.name(*l));
                        return Err(self.mismatch(ctx, u, &expected, &self.show_ty(&other)));
                    }
                };
                self.require_sealed(ctx, t, *l, target)?;
                self.under(ctx, &x.0, inner, |me, ctx| me.check(ctx, body, target))?;
                Ok(target.clone())
            }
            Term::Tdcl(l, u, a) => {
                self.top_level_site(ctx, t, *l)?;
                self.require_sealed(ctx, t, *l, a)?;
                self.check(ctx, u, &ValueType::seal(*l, ValueType::comp(a.clone())))?;
                Ok(ValueType::comp(a.clone()))
            }
            Term::Inl(_) | Term::Inr(_) | Term::Lam(..) | Term::Fix(..) => {
                Err(TypeError::CannotInfer {
                    term: self.show(ctx, t),
                })
            }
        }
    }
}

fn intro_shape(t: &Term) -> &'static str {
    match t {
        Term::Triv => "unit",
        Term::Pair(..) => "a pair",
        Term::Inl(_) | Term::Inr(_) => "an injection",
        Term::Lam(..) => "a function",
        Term::Ret(_) => "a returner",
        _ => "a computation",
    }
}

/// Checks a closed term against `ty`, returning any warnings.
pub fn check_closed(
    lat: &Lattice,
    t: &Term,
    ty: &ValueType,
    strict: bool,
) -> Result<Vec<TypeError>, TypeError> {
    let mut checker = Checker::new(lat).strict(strict);
    checker.check(&mut Context::new(), t, ty)?;
    Ok(checker.take_warnings())
}

/// Infers the type of a closed term, returning any warnings alongside.
pub fn infer_closed(
    lat: &Lattice,
    t: &Term,
    strict: bool,
) -> Result<(ValueType, Vec<TypeError>), TypeError> {
    let mut checker = Checker::new(lat).strict(strict);
    let ty = checker.infer(&mut Context::new(), t)?;
    Ok((ty, checker.take_warnings()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_term, parse_type};

    fn lat() -> Lattice {
        Lattice::chain4()
    }

    fn lv(lat: &Lattice, n: &str) -> Level {
        lat.level(n).unwrap()
    }

    #[test]
    fn sealed_examples() {
        let lat = lat();
        let sm_bool = parse_type("(seal M bool)", &lat).unwrap();
        assert_eq!(
            sealed_judgement(&lat, lv(&lat, "M"), &sm_bool),
            Ok(SealedDerivation::SealAbove(lv(&lat, "M")))
        );
        assert_eq!(
            sealed_judgement(&lat, lv(&lat, "H"), &sm_bool),
            Err(NotSealed {
                level: lv(&lat, "H"),
                failing: sm_bool.clone()
            })
        );
        for l in lat.levels() {
            assert_eq!(
                sealed_judgement(&lat, l, &ValueType::Unit),
                Ok(SealedDerivation::Unit)
            );
        }
    }

    #[test]
    fn sealed_inner_rule_on_diamond() {
        let d = Lattice::diamond();
        let ty = parse_type("(seal b unit)", &d).unwrap();
        let der = sealed_judgement(&d, lv(&d, "a"), &ty).unwrap();
        assert_eq!(
            der,
            SealedDerivation::SealInner(lv(&d, "b"), Box::new(SealedDerivation::Unit))
        );
        assert_eq!(der.rule(), "S-SealInner");
    }

    #[test]
    fn sums_and_thunks_are_not_sealed() {
        let lat = lat();
        for src in [
            "bool",
            "(U (F unit))",
            "(U (fn unit (F unit)))",
            "(* unit bool)",
        ] {
            let ty = parse_type(src, &lat).unwrap();
            assert!(sealed_judgement(&lat, lv(&lat, "L"), &ty).is_err(), "{src}");
        }
    }

    const INTRO_F: &str = "(lam u (unseal M u (x) (seal H (not x)) (seal H bool)))";

    #[test]
    fn intro_program_is_accepted() {
        let lat = lat();
        let f = parse_term(INTRO_F, &lat).unwrap();
        let ty = parse_type("(U (fn (seal M bool) (F (seal H bool))))", &lat).unwrap();
        // the body is a value, so the function needs a returner around it
        assert!(check_closed(&lat, &f, &ty, false).is_err());
        let f = parse_term(
            "(lam u (ret (unseal M u (x) (seal H (not x)) (seal H bool))))",
            &lat,
        )
        .unwrap();
        assert_eq!(check_closed(&lat, &f, &ty, false), Ok(vec![]));
    }

    #[test]
    fn mirrored_program_is_rejected() {
        let lat = lat();
        let f = parse_term(
            "(lam u (ret (unseal H u (x) (seal M (not x)) (seal M bool))))",
            &lat,
        )
        .unwrap();
        let ty = parse_type("(U (fn (seal H bool) (F (seal M bool))))", &lat).unwrap();
        match check_closed(&lat, &f, &ty, false) {
            Err(TypeError::NotSealed { level, failing, .. }) => {
                assert_eq!(level, "H");
                assert_eq!(failing, "(seal M bool)");
            }
            other => panic!("{other:?}"),
        }
        // a constant function of that type is fine
        let k = parse_term("(lam u (ret (seal M tt)))", &lat).unwrap();
        assert_eq!(check_closed(&lat, &k, &ty, false), Ok(vec![]));
    }

    pub(crate) const SECTION6_C: &str = "(lam u (tdcl M (unseal M u (b) (seal M (if b (ret ()) (fix z z))) (seal M (U (F unit)))) unit))";

    #[test]
    fn termination_example_is_accepted() {
        let lat = lat();
        let c = parse_term(SECTION6_C, &lat).unwrap();
        let ty = parse_type("(U (fn (seal M bool) (F unit)))", &lat).unwrap();
        assert_eq!(check_closed(&lat, &c, &ty, false), Ok(vec![]));
    }

    #[test]
    fn unseal_into_unsealed_target_is_rejected() {
        let lat = lat();
        let t = parse_term("(lam u (ret (unseal M u (x) x bool)))", &lat).unwrap();
        let ty = parse_type("(U (fn (seal M bool) (F bool)))", &lat).unwrap();
        assert!(matches!(
            check_closed(&lat, &t, &ty, false),
            Err(TypeError::NotSealed { .. })
        ));
    }

    #[test]
    fn top_level_seal_warns_or_fails() {
        let lat = lat();
        let t = parse_term("(seal G tt)", &lat).unwrap();
        let ty = parse_type("(seal G bool)", &lat).unwrap();
        let warnings = check_closed(&lat, &t, &ty, false).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(matches!(
            check_closed(&lat, &t, &ty, true),
            Err(TypeError::TopLevelSeal { .. })
        ));
    }

    #[test]
    fn inference_and_errors() {
        let lat = lat();
        let p = |s| parse_term(s, &lat).unwrap();
        let (ty, _) = infer_closed(
            &lat,
            &p("(bind (ret (the bool tt)) (x) (ret (pair x ())))"),
            false,
        )
        .unwrap();
        assert_eq!(ty, parse_type("(U (F (* bool unit)))", &lat).unwrap());
        assert!(matches!(
            infer_closed(&lat, &p("(lam x x)"), false),
            Err(TypeError::CannotInfer { .. })
        ));
        assert!(matches!(
            infer_closed(&lat, &p("(fst ())"), false),
            Err(TypeError::TypeMismatch { .. })
        ));
        let mut ctx = Context::new();
        assert_eq!(
            Checker::new(&lat).infer(&mut ctx, &Term::Var(0)),
            Err(TypeError::UnboundVariable { index: 0 })
        );
    }

    #[test]
    fn tdcl_requires_sealed_result() {
        let lat = lat();
        let t = parse_term("(tdcl M (seal M (ret tt)) bool)", &lat).unwrap();
        assert!(matches!(
            infer_closed(&lat, &t, false),
            Err(TypeError::NotSealed { .. })
        ));
        let t = parse_term("(tdcl M (seal M (ret ())) unit)", &lat).unwrap();
        assert_eq!(
            infer_closed(&lat, &t, false).unwrap().0,
            ValueType::comp(ValueType::Unit)
        );
    }
}
