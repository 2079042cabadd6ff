//! Abstract and concrete syntax.
//!
//! Terms are stored nameless (de Bruijn indices); binder names survive only as
//! printing hints and never take part in equality, so `==` on [`Term`] is
//! alpha-equivalence.
//!
//! Grammar (S-expressions, `;` starts a comment):
//!
//! ```text
//! type  ::= unit | bool | (* type type) | (+ type type) | (seal LEVEL type) | (U ctype)
//! ctype ::= (F type) | (fn type ctype)
//! term  ::= x | () | triv | tt | ff
//!         | (lam x term) | (app term term ...) | (fix x term)
//!         | (pair term term) | (fst term) | (snd term)
//!         | (inl term) | (inr term) | (case term (x) term (y) term)
//!         | (ret term) | (bind term (x) term)
//!         | (seal LEVEL term) | (unseal LEVEL term (x) term type)
//!         | (tdcl LEVEL term type) | (the type term)
//!         | (if term term term) | (not term)
//! ```
//!
//! `bool` is `(+ unit unit)` with `tt = (inl ())` and `ff = (inr ())`; `if`
//! and `not` expand to `case`.

use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::lattice::{Lattice, Level};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueType {
    Unit,
    Prod(Box<ValueType>, Box<ValueType>),
    Sum(Box<ValueType>, Box<ValueType>),
    Seal(Level, Box<ValueType>),
    /// Thunks of a computation type.
    U(Box<CompType>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CompType {
    F(Box<ValueType>),
    Fn(Box<ValueType>, Box<CompType>),
}

impl ValueType {
    pub fn bool() -> ValueType {
        ValueType::Sum(Box::new(ValueType::Unit), Box::new(ValueType::Unit))
    }

    pub fn prod(a: ValueType, b: ValueType) -> ValueType {
        ValueType::Prod(Box::new(a), Box::new(b))
    }

    pub fn sum(a: ValueType, b: ValueType) -> ValueType {
        ValueType::Sum(Box::new(a), Box::new(b))
    }

    pub fn seal(l: Level, a: ValueType) -> ValueType {
        ValueType::Seal(l, Box::new(a))
    }

    /// `U (F a)`.
    pub fn comp(a: ValueType) -> ValueType {
        ValueType::U(Box::new(CompType::F(Box::new(a))))
    }

    /// `U (fn a x)`.
    pub fn func(a: ValueType, x: CompType) -> ValueType {
        ValueType::U(Box::new(CompType::Fn(Box::new(a), Box::new(x))))
    }

    pub fn is_bool(&self) -> bool {
        *self == ValueType::bool()
    }

    /// No thunks anywhere inside.
    pub fn is_first_order(&self) -> bool {
        match self {
            ValueType::Unit => true,
            ValueType::Prod(a, b) | ValueType::Sum(a, b) => {
                a.is_first_order() && b.is_first_order()
            }
            ValueType::Seal(_, a) => a.is_first_order(),
            ValueType::U(_) => false,
        }
    }

    /// Number of type constructors.
    pub fn size(&self) -> usize {
        match self {
            ValueType::Unit => 1,
            ValueType::Prod(a, b) | ValueType::Sum(a, b) => 1 + a.size() + b.size(),
            ValueType::Seal(_, a) => 1 + a.size(),
            ValueType::U(x) => 1 + x.size(),
        }
    }

    pub fn levels(&self, out: &mut Vec<Level>) {
        match self {
            ValueType::Unit => {}
            ValueType::Prod(a, b) | ValueType::Sum(a, b) => {
                a.levels(out);
                b.levels(out);
            }
            ValueType::Seal(l, a) => {
                out.push(*l);
                a.levels(out);
            }
            ValueType::U(x) => x.levels(out),
        }
    }
}

impl CompType {
    pub fn free(a: ValueType) -> CompType {
        CompType::F(Box::new(a))
    }

    pub fn func(a: ValueType, x: CompType) -> CompType {
        CompType::Fn(Box::new(a), Box::new(x))
    }

    fn size(&self) -> usize {
        match self {
            CompType::F(a) => 1 + a.size(),
            CompType::Fn(a, x) => 1 + a.size() + x.size(),
        }
    }

    fn levels(&self, out: &mut Vec<Level>) {
        match self {
            CompType::F(a) => a.levels(out),
            CompType::Fn(a, x) => {
                a.levels(out);
                x.levels(out);
            }
        }
    }
}

/// A binder name kept for printing. All names compare equal.
#[derive(Debug, Clone, Default)]
pub struct Name(pub Rc<str>);

impl Name {
    pub fn new(s: &str) -> Name {
        Name(Rc::from(s))
    }
}

impl PartialEq for Name {
    fn eq(&self, _: &Name) -> bool {
        true
    }
}

impl Eq for Name {}

impl std::hash::Hash for Name {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

pub type Tm = Rc<Term>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(usize),
    Lam(Name, Tm),
    App(Tm, Tm),
    Pair(Tm, Tm),
    Fst(Tm),
    Snd(Tm),
    Triv,
    Inl(Tm),
    Inr(Tm),
    Case(Tm, Name, Tm, Name, Tm),
    Ret(Tm),
    Bind(Tm, Name, Tm),
    Fix(Name, Tm),
    Seal(Level, Tm),
    /// `unseal_l u (x. body)` at result type `B`.
    Unseal(Level, Tm, Name, Tm, ValueType),
    /// `tdcl_l u` where `u : seal_l (U (F A))`; carries `A`.
    Tdcl(Level, Tm, ValueType),
    Ann(Tm, ValueType),
}

pub fn tt() -> Tm {
    Rc::new(Term::Inl(Rc::new(Term::Triv)))
}

pub fn ff() -> Tm {
    Rc::new(Term::Inr(Rc::new(Term::Triv)))
}

/// `if c t e` as a case whose binders are unused.
pub fn if_then_else(c: Tm, t: Tm, e: Tm) -> Tm {
    Rc::new(Term::Case(
        c,
        Name::new("_"),
        shift(&t, 1, 0),
        Name::new("_"),
        shift(&e, 1, 0),
    ))
}

pub fn not(c: Tm) -> Tm {
    Rc::new(Term::Case(c, Name::new("_"), ff(), Name::new("_"), tt()))
}

impl Term {
    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn children(&self) -> Vec<&Tm> {
        use Term::*;
        match self {
            Var(_) | Triv => vec![],
            Lam(_, a)
            | Fst(a)
            | Snd(a)
            | Inl(a)
            | Inr(a)
            | Ret(a)
            | Fix(_, a)
            | Seal(_, a)
            | Tdcl(_, a, _)
            | Ann(a, _) => vec![a],
            App(a, b) | Pair(a, b) | Bind(a, _, b) | Unseal(_, a, _, b, _) => vec![a, b],
            Case(a, _, b, _, c) => vec![a, b, c],
        }
    }

    /// Rebuilds this node with new children, in `children()` order.
    pub fn with_children(&self, mut kids: Vec<Tm>) -> Term {
        use Term::*;
        let mut next = || kids.remove(0);
        match self {
            Var(_) | Triv => self.clone(),
            Lam(x, _) => Lam(x.clone(), next()),
            Fst(_) => Fst(next()),
            Snd(_) => Snd(next()),
            Inl(_) => Inl(next()),
            Inr(_) => Inr(next()),
            Ret(_) => Ret(next()),
            Fix(x, _) => Fix(x.clone(), next()),
            Seal(l, _) => Seal(*l, next()),
            Tdcl(l, _, t) => Tdcl(*l, next(), t.clone()),
            Ann(_, t) => Ann(next(), t.clone()),
            App(..) => App(next(), next()),
            Pair(..) => Pair(next(), next()),
            Bind(_, x, _) => Bind(next(), x.clone(), next()),
            Unseal(l, _, x, _, t) => Unseal(*l, next(), x.clone(), next(), t.clone()),
            Case(_, x, _, y, _) => Case(next(), x.clone(), next(), y.clone(), next()),
        }
    }

    /// How many binders each child sits under, relative to this node.
    pub(crate) fn binders(&self) -> Vec<usize> {
        use Term::*;
        match self {
            Lam(..) | Fix(..) => vec![1],
            Bind(..) | Unseal(..) => vec![0, 1],
            Case(..) => vec![0, 1, 1],
            _ => vec![0; self.children().len()],
        }
    }

    /// Every level annotation in the term, including those inside types.
    pub fn levels(&self) -> Vec<Level> {
        let mut out = Vec::new();
        self.collect_levels(&mut out);
        out
    }

    fn collect_levels(&self, out: &mut Vec<Level>) {
        match self {
            Term::Seal(l, _) => out.push(*l),
            Term::Unseal(l, _, _, _, ty) | Term::Tdcl(l, _, ty) => {
                out.push(*l);
                ty.levels(out);
            }
            Term::Ann(_, ty) => ty.levels(out),
            _ => {}
        }
        for c in self.children() {
            c.collect_levels(out);
        }
    }

    /// Levels on `seal`, `unseal` and `tdcl` nodes only.
    pub fn seal_sites(&self) -> Vec<Level> {
        let mut out = Vec::new();
        self.collect_seal_sites(&mut out);
        out
    }

    fn collect_seal_sites(&self, out: &mut Vec<Level>) {
        if let Term::Seal(l, _) | Term::Unseal(l, ..) | Term::Tdcl(l, ..) = self {
            out.push(*l);
        }
        for c in self.children() {
            c.collect_seal_sites(out);
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_below(0)
    }

    fn free_below(&self, depth: usize) -> bool {
        if let Term::Var(i) = self {
            return *i < depth;
        }
        self.children()
            .into_iter()
            .zip(self.binders())
            .all(|(c, b)| c.free_below(depth + b))
    }
}

/// Adds `by` to every variable at or above `cutoff`.
pub fn shift(t: &Tm, by: isize, cutoff: usize) -> Tm {
    match &**t {
        Term::Var(i) if *i >= cutoff => Rc::new(Term::Var((*i as isize + by) as usize)),
        Term::Var(_) | Term::Triv => t.clone(),
        node => {
            let kids = node
                .children()
                .into_iter()
                .zip(node.binders())
                .map(|(c, b)| shift(c, by, cutoff + b))
                .collect();
            Rc::new(node.with_children(kids))
        }
    }
}

fn subst_at(t: &Tm, depth: usize, s: &Tm) -> Tm {
    match &**t {
        Term::Var(i) if *i == depth => shift(s, depth as isize, 0),
        Term::Var(i) if *i > depth => Rc::new(Term::Var(i - 1)),
        Term::Var(_) | Term::Triv => t.clone(),
        node => {
            let kids = node
                .children()
                .into_iter()
                .zip(node.binders())
                .map(|(c, b)| subst_at(c, depth + b, s))
                .collect();
            Rc::new(node.with_children(kids))
        }
    }
}

/// `body[s/0]`, removing the binder.
pub fn subst_top(body: &Tm, s: &Tm) -> Tm {
    subst_at(body, 0, s)
}

pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    a == b
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: expected {expected}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
    },
    #[error("{line}:{col}: unknown level `{level}`")]
    UnknownLevel {
        line: usize,
        col: usize,
        level: String,
    },
    #[error("{line}:{col}: unbound variable `{name}`")]
    Unbound {
        line: usize,
        col: usize,
        name: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn syntax_err(p: Pos, expected: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line: p.line,
        col: p.col,
        expected: expected.into(),
    }
}

struct Reader<'s> {
    chars: std::iter::Peekable<std::str::Chars<'s>>,
    pos: Pos,
}

impl Reader<'_> {
    fn new(text: &str) -> Reader<'_> {
        Reader {
            chars: text.chars().peekable(),
            pos: Pos { line: 1, col: 1 },
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == ';' {
                while self.bump().is_some_and(|c| c != '\n') {}
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, ParseError> {
        self.skip_trivia();
        let start = self.pos;
        match self.chars.peek() {
            None => Err(syntax_err(start, "an expression")),
            Some(')') => Err(syntax_err(start, "an expression, found `)`")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek() {
                        None => return Err(syntax_err(self.pos, "`)`")),
                        Some(')') => {
                            self.bump();
                            return Ok(Sexp::List(items, start));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(_) => {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Ok(Sexp::Atom(s, start))
            }
        }
    }

    fn read_one(mut self) -> Result<Sexp, ParseError> {
        let e = self.read()?;
        self.skip_trivia();
        if self.chars.peek().is_some() {
            return Err(syntax_err(self.pos, "end of input"));
        }
        Ok(e)
    }
}

const KEYWORDS: &[&str] = &[
    "lam", "app", "fix", "pair", "fst", "snd", "inl", "inr", "case", "ret", "bind", "seal",
    "unseal", "tdcl", "the", "if", "not", "triv", "tt", "ff",
];

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || c == '_' || c == '\'' || c == '-')
        && !KEYWORDS.contains(&s)
}

struct Elaborator<'a> {
    lat: &'a Lattice,
    scope: Vec<String>,
}

impl Elaborator<'_> {
    fn level(&self, e: &Sexp) -> Result<Level, ParseError> {
        match e {
            Sexp::Atom(s, p) => self.lat.level(s).map_err(|_| ParseError::UnknownLevel {
                line: p.line,
                col: p.col,
                level: s.clone(),
            }),
            Sexp::List(_, p) => Err(syntax_err(*p, "a level name")),
        }
    }

    fn binder(&self, e: &Sexp, parenthesised: bool) -> Result<String, ParseError> {
        let atom = match (e, parenthesised) {
            (Sexp::Atom(s, p), false) => Some((s, p)),
            (Sexp::List(items, _), true) if items.len() == 1 => match &items[0] {
                Sexp::Atom(s, p) => Some((s, p)),
                _ => None,
            },
            _ => None,
        };
        match atom {
            Some((s, _)) if is_ident(s) => Ok(s.clone()),
            _ => Err(syntax_err(
                e.pos(),
                if parenthesised {
                    "a binder `(x)`"
                } else {
                    "a variable name"
                },
            )),
        }
    }

    fn value_type(&self, e: &Sexp) -> Result<ValueType, ParseError> {
        match e {
            Sexp::Atom(s, p) => match s.as_str() {
                "unit" => Ok(ValueType::Unit),
                "bool" => Ok(ValueType::bool()),
                _ => Err(syntax_err(*p, "a value type")),
            },
            Sexp::List(items, p) => {
                let head = match items.first() {
                    Some(Sexp::Atom(h, _)) => h.as_str(),
                    _ => return Err(syntax_err(*p, "a value type")),
                };
                match (head, items.len()) {
                    ("*", 3) => Ok(ValueType::prod(
                        self.value_type(&items[1])?,
                        self.value_type(&items[2])?,
                    )),
                    ("+", 3) => Ok(ValueType::sum(
                        self.value_type(&items[1])?,
                        self.value_type(&items[2])?,
                    )),
                    ("seal", 3) => Ok(ValueType::seal(
                        self.level(&items[1])?,
                        self.value_type(&items[2])?,
                    )),
                    ("U", 2) => Ok(ValueType::U(Box::new(self.comp_type(&items[1])?))),
                    _ => Err(syntax_err(*p, "a value type")),
                }
            }
        }
    }

    fn comp_type(&self, e: &Sexp) -> Result<CompType, ParseError> {
        if let Sexp::List(items, _) = e {
            if let Some(Sexp::Atom(h, _)) = items.first() {
                match (h.as_str(), items.len()) {
                    ("F", 2) => return Ok(CompType::free(self.value_type(&items[1])?)),
                    ("fn" | "->", 3) => {
                        return Ok(CompType::func(
                            self.value_type(&items[1])?,
                            self.comp_type(&items[2])?,
                        ))
                    }
                    _ => {}
                }
            }
        }
        Err(syntax_err(
            e.pos(),
            "a computation type `(F A)` or `(fn A X)`",
        ))
    }

    fn under(&mut self, name: String, e: &Sexp) -> Result<Tm, ParseError> {
        self.scope.push(name);
        let t = self.term(e);
        self.scope.pop();
        t
    }

    fn term(&mut self, e: &Sexp) -> Result<Tm, ParseError> {
        let (items, p) = match e {
            Sexp::Atom(s, p) => {
                return match s.as_str() {
                    "triv" => Ok(Rc::new(Term::Triv)),
                    "tt" => Ok(tt()),
                    "ff" => Ok(ff()),
                    _ if is_ident(s) => match self.scope.iter().rev().position(|n| n == s) {
                        Some(i) => Ok(Rc::new(Term::Var(i))),
                        None => Err(ParseError::Unbound {
                            line: p.line,
                            col: p.col,
                            name: s.clone(),
                        }),
                    },
                    _ => Err(syntax_err(*p, "a term")),
                }
            }
            Sexp::List(items, p) => (items, *p),
        };
        if items.is_empty() {
            return Ok(Rc::new(Term::Triv));
        }
        let head = match &items[0] {
            Sexp::Atom(h, _) => h.as_str(),
            Sexp::List(..) => return Err(syntax_err(p, "a keyword after `(`")),
        };
        let arity = |n: usize, shape: &str| {
            if items.len() == n + 1 {
                Ok(())
            } else {
                Err(syntax_err(p, format!("`({head} {shape})`")))
            }
        };
        let t = match head {
            "lam" => {
                arity(2, "x body")?;
                let x = self.binder(&items[1], false)?;
                Term::Lam(Name::new(&x), self.under(x, &items[2])?)
            }
            "fix" => {
                arity(2, "x body")?;
                let x = self.binder(&items[1], false)?;
                Term::Fix(Name::new(&x), self.under(x, &items[2])?)
            }
            "app" => {
                if items.len() < 3 {
                    return Err(syntax_err(p, "`(app f arg ...)`"));
                }
                let mut f = self.term(&items[1])?;
                for a in &items[2..] {
                    f = Rc::new(Term::App(f, self.term(a)?));
                }
                return Ok(f);
            }
            "pair" => {
                arity(2, "a b")?;
                Term::Pair(self.term(&items[1])?, self.term(&items[2])?)
            }
            "fst" | "snd" | "inl" | "inr" | "ret" | "not" => {
                arity(1, "e")?;
                let a = self.term(&items[1])?;
                match head {
                    "fst" => Term::Fst(a),
                    "snd" => Term::Snd(a),
                    "inl" => Term::Inl(a),
                    "inr" => Term::Inr(a),
                    "ret" => Term::Ret(a),
                    _ => return Ok(not(a)),
                }
            }
            "case" => {
                arity(5, "e (x) l (y) r")?;
                let scrut = self.term(&items[1])?;
                let x = self.binder(&items[2], true)?;
                let y = self.binder(&items[4], true)?;
                let l = self.under(x.clone(), &items[3])?;
                let r = self.under(y.clone(), &items[5])?;
                Term::Case(scrut, Name::new(&x), l, Name::new(&y), r)
            }
            "if" => {
                arity(3, "c t e")?;
                let c = self.term(&items[1])?;
                let t = self.under(String::new(), &items[2])?;
                let f = self.under(String::new(), &items[3])?;
                Term::Case(c, Name::new("_"), t, Name::new("_"), f)
            }
            "bind" => {
                arity(3, "m (x) body")?;
                let m = self.term(&items[1])?;
                let x = self.binder(&items[2], true)?;
                Term::Bind(m, Name::new(&x), self.under(x, &items[3])?)
            }
            "seal" => {
                arity(2, "LEVEL e")?;
                Term::Seal(self.level(&items[1])?, self.term(&items[2])?)
            }
            "unseal" => {
                arity(5, "LEVEL e (x) body TYPE")?;
                let l = self.level(&items[1])?;
                let u = self.term(&items[2])?;
                let x = self.binder(&items[3], true)?;
                let body = self.under(x.clone(), &items[4])?;
                Term::Unseal(l, u, Name::new(&x), body, self.value_type(&items[5])?)
            }
            "tdcl" => {
                arity(3, "LEVEL e TYPE")?;
                Term::Tdcl(
                    self.level(&items[1])?,
                    self.term(&items[2])?,
                    self.value_type(&items[3])?,
                )
            }
            "the" => {
                arity(2, "TYPE e")?;
                let ty = self.value_type(&items[1])?;
                Term::Ann(self.term(&items[2])?, ty)
            }
            _ => return Err(syntax_err(p, "a term keyword")),
        };
        Ok(Rc::new(t))
    }
}

pub fn parse_term(text: &str, lat: &Lattice) -> Result<Tm, ParseError> {
    let sexp = Reader::new(text).read_one()?;
    Elaborator {
        lat,
        scope: Vec::new(),
    }
    .term(&sexp)
}

pub fn parse_type(text: &str, lat: &Lattice) -> Result<ValueType, ParseError> {
    let sexp = Reader::new(text).read_one()?;
    Elaborator {
        lat,
        scope: Vec::new(),
    }
    .value_type(&sexp)
}

/// A `.dcc` program: one term, optionally preceded by a `;! lattice: PATH`
/// header naming the lattice file (relative to the program file).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramSource {
    pub lattice_path: Option<String>,
    pub body: String,
}

pub fn read_program(text: &str) -> ProgramSource {
    let lattice_path = text.lines().find_map(|line| {
        line.trim()
            .strip_prefix(";!")
            .and_then(|rest| rest.trim().strip_prefix("lattice:"))
            .map(|p| p.trim().to_string())
    });
    ProgramSource {
        lattice_path,
        body: text.to_string(),
    }
}

pub struct Printer<'a> {
    lat: &'a Lattice,
}

impl<'a> Printer<'a> {
    pub fn new(lat: &'a Lattice) -> Self {
        Printer { lat }
    }

    pub fn value_type(&self, ty: &ValueType) -> String {
        match ty {
            ValueType::Unit => "unit".into(),
            _ if ty.is_bool() => "bool".into(),
            ValueType::Prod(a, b) => format!("(* {} {})", self.value_type(a), self.value_type(b)),
            ValueType::Sum(a, b) => format!("(+ {} {})", self.value_type(a), self.value_type(b)),
            ValueType::Seal(l, a) => format!("(seal {} {})", self.lat.name(*l), self.value_type(a)),
            ValueType::U(x) => format!("(U {})", self.comp_type(x)),
        }
    }

    pub fn comp_type(&self, x: &CompType) -> String {
        match x {
            CompType::F(a) => format!("(F {})", self.value_type(a)),
            CompType::Fn(a, x) => format!("(fn {} {})", self.value_type(a), self.comp_type(x)),
        }
    }

    pub fn term(&self, t: &Term) -> String {
        self.term_in(t, &mut Vec::new())
    }

    /// Prints a term whose free variables are named by `scope` (innermost last).
    pub fn term_in(&self, t: &Term, scope: &mut Vec<String>) -> String {
        let mut out = String::new();
        self.write(t, scope, &mut out);
        out
    }

    fn fresh(scope: &[String], hint: &Name) -> String {
        let base = if is_ident(&hint.0) {
            hint.0.to_string()
        } else {
            "x".to_string()
        };
        if !scope.contains(&base) {
            return base;
        }
        (1..)
            .map(|i| format!("{base}{i}"))
            .find(|c| !scope.contains(c))
            .unwrap()
    }

    fn bound(&self, hint: &Name, body: &Term, scope: &mut Vec<String>) -> (String, String) {
        let x = Self::fresh(scope, hint);
        scope.push(x.clone());
        let b = self.term_in(body, scope);
        scope.pop();
        (x, b)
    }

    fn write(&self, t: &Term, scope: &mut Vec<String>, out: &mut String) {
        use Term::*;
        let s = match t {
            Var(i) => match scope.len().checked_sub(i + 1) {
                Some(j) => scope[j].clone(),
                None => format!("#{i}"),
            },
            Triv => "()".into(),
            Inl(a) if **a == Triv => "tt".into(),
            Inr(a) if **a == Triv => "ff".into(),
            Lam(x, b) => {
                let (x, b) = self.bound(x, b, scope);
                format!("(lam {x} {b})")
            }
            Fix(x, b) => {
                let (x, b) = self.bound(x, b, scope);
                format!("(fix {x} {b})")
            }
            App(f, a) => format!(
                "(app {} {})",
                self.term_in(f, scope),
                self.term_in(a, scope)
            ),
            Pair(a, b) => format!(
                "(pair {} {})",
                self.term_in(a, scope),
                self.term_in(b, scope)
            ),
            Fst(a) => format!("(fst {})", self.term_in(a, scope)),
            Snd(a) => format!("(snd {})", self.term_in(a, scope)),
            Inl(a) => format!("(inl {})", self.term_in(a, scope)),
            Inr(a) => format!("(inr {})", self.term_in(a, scope)),
            Ret(a) => format!("(ret {})", self.term_in(a, scope)),
            Case(e, x, l, y, r) => {
                let e = self.term_in(e, scope);
                let (x, l) = self.bound(x, l, scope);
                let (y, r) = self.bound(y, r, scope);
                format!("(case {e} ({x}) {l} ({y}) {r})")
            }
            Bind(m, x, b) => {
                let m = self.term_in(m, scope);
                let (x, b) = self.bound(x, b, scope);
                format!("(bind {m} ({x}) {b})")
            }
            Seal(l, a) => format!("(seal {} {})", self.lat.name(*l), self.term_in(a, scope)),
            Unseal(l, u, x, b, ty) => {
                let u = self.term_in(u, scope);
                let (x, b) = self.bound(x, b, scope);
                format!(
                    "(unseal {} {u} ({x}) {b} {})",
                    self.lat.name(*l),
                    self.value_type(ty)
                )
            }
            Tdcl(l, u, ty) => format!(
                "(tdcl {} {} {})",
                self.lat.name(*l),
                self.term_in(u, scope),
                self.value_type(ty)
            ),
            Ann(a, ty) => format!("(the {} {})", self.value_type(ty), self.term_in(a, scope)),
        };
        out.push_str(&s);
    }
}

pub fn print_term(t: &Term, lat: &Lattice) -> String {
    Printer::new(lat).term(t)
}

pub fn print_type(ty: &ValueType, lat: &Lattice) -> String {
    Printer::new(lat).value_type(ty)
}

/// Prints with level indices; for debugging without a lattice at hand.
impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Unit => write!(f, "unit"),
            _ if self.is_bool() => write!(f, "bool"),
            ValueType::Prod(a, b) => write!(f, "(* {a} {b})"),
            ValueType::Sum(a, b) => write!(f, "(+ {a} {b})"),
            ValueType::Seal(l, a) => write!(f, "(seal {l} {a})"),
            ValueType::U(x) => write!(f, "(U {x})"),
        }
    }
}

impl fmt::Display for CompType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompType::F(a) => write!(f, "(F {a})"),
            CompType::Fn(a, x) => write!(f, "(fn {a} {x})"),
        }
    }
}
