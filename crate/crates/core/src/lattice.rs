//! Finite meet-semilattices of security levels.
//!
//! A [`Lattice`] is validated from a list of elements and order pairs. Its
//! lower sets are the security policies ([`Open`]) and its filters are the
//! abstract behaviours ([`Filter`]); a policy permits a behaviour when the two
//! sets meet. Sets of levels are bitmasks, which caps a lattice at 64 levels.

use std::collections::HashMap;
use std::fmt;

use serde::Deserialize;
use thiserror::Error;

/// Largest number of levels a lattice may declare.
pub const MAX_LEVELS: usize = 64;

/// Default bound on the number of subsets scanned by the brute-force
/// enumerations (`2^|elements|` must not exceed it).
pub const DEFAULT_SUBSET_BOUND: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("lattice has no elements")]
    Empty,
    #[error("lattice declares {0} elements; at most {MAX_LEVELS} are supported")]
    TooManyElements(usize),
    #[error("duplicate element `{0}`")]
    DuplicateElement(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("order is not antisymmetric: `{0}` and `{1}` lie below each other")]
    NotAPoset(String, String),
    #[error("no greatest element")]
    NoTopElement,
    #[error("`{0}` and `{1}` have no greatest lower bound")]
    MissingMeet(String, String),
    #[error("meet table says {0} ∧ {1} = {2}, but the greatest lower bound is {3}")]
    MeetMismatch(String, String, String, String),
    #[error("set {0} is not downward closed")]
    NotDownwardClosed(String),
    #[error("enumeration needs {needed} candidates, bound is {bound}")]
    SizeLimitExceeded { needed: u128, bound: u64 },
    #[error("lattice file: {0}")]
    Parse(String),
}

/// A level of a particular lattice, by position in its element list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(pub(crate) usize);

impl Level {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Unvalidated lattice description, as read from a lattice file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLattice {
    pub elements: Vec<String>,
    /// `[a, b]` means `a ⊑ b`.
    #[serde(default)]
    pub order: Vec<[String; 2]>,
    /// Optional `[a, b, a ∧ b]` triples, cross-checked against the order.
    #[serde(default)]
    pub meets: Option<Vec<[String; 3]>>,
}

impl RawLattice {
    pub fn from_toml(text: &str) -> Result<Self, LatticeError> {
        toml::from_str(text).map_err(|e| LatticeError::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    names: Vec<String>,
    index: HashMap<String, usize>,
    // up[a] = { b | a ⊑ b }, down[a] = { b | b ⊑ a }
    up: Vec<u64>,
    down: Vec<u64>,
    meet: Vec<Vec<usize>>,
    top: usize,
}

fn bit(i: usize) -> u64 {
    1u64 << i
}

fn iter_bits(mut bits: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if bits == 0 {
            None
        } else {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        }
    })
}

/// Checks a raw description and computes order closure, meets and top.
pub fn validate_lattice(raw: &RawLattice) -> Result<Lattice, LatticeError> {
    let n = raw.elements.len();
    if n == 0 {
        return Err(LatticeError::Empty);
    }
    if n > MAX_LEVELS {
        return Err(LatticeError::TooManyElements(n));
    }
    let mut index = HashMap::new();
    for (i, name) in raw.elements.iter().enumerate() {
        if index.insert(name.clone(), i).is_some() {
            return Err(LatticeError::DuplicateElement(name.clone()));
        }
    }
    let lookup = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| LatticeError::UnknownElement(name.to_string()))
    };

    let mut up: Vec<u64> = (0..n).map(bit).collect();
    for [lo, hi] in &raw.order {
        let (a, b) = (lookup(lo)?, lookup(hi)?);
        up[a] |= bit(b);
    }
    // Warshall on bit rows.
    for k in 0..n {
        for i in 0..n {
            if up[i] & bit(k) != 0 {
                up[i] |= up[k];
            }
        }
    }
    for a in 0..n {
        for b in iter_bits(up[a]) {
            if b != a && up[b] & bit(a) != 0 {
                let (x, y) = if a < b { (a, b) } else { (b, a) };
                return Err(LatticeError::NotAPoset(
                    raw.elements[x].clone(),
                    raw.elements[y].clone(),
                ));
            }
        }
    }
    let mut down = vec![0u64; n];
    for (a, &ups) in up.iter().enumerate() {
        for b in iter_bits(ups) {
            down[b] |= bit(a);
        }
    }

    let everything = if n == 64 { u64::MAX } else { bit(n) - 1 };
    let top = (0..n)
        .find(|&t| down[t] == everything)
        .ok_or(LatticeError::NoTopElement)?;

    let mut meet = vec![vec![0usize; n]; n];
    for a in 0..n {
        for b in a..n {
            let lower = down[a] & down[b];
            let glb = iter_bits(lower)
                .find(|&m| down[m] == lower)
                .ok_or_else(|| {
                    LatticeError::MissingMeet(raw.elements[a].clone(), raw.elements[b].clone())
                })?;
            meet[a][b] = glb;
            meet[b][a] = glb;
        }
    }

    if let Some(table) = &raw.meets {
        for [a, b, m] in table {
            let (ia, ib, im) = (lookup(a)?, lookup(b)?, lookup(m)?);
            if meet[ia][ib] != im {
                return Err(LatticeError::MeetMismatch(
                    a.clone(),
                    b.clone(),
                    m.clone(),
                    raw.elements[meet[ia][ib]].clone(),
                ));
            }
        }
    }

    Ok(Lattice {
        names: raw.elements.clone(),
        index,
        up,
        down,
        meet,
        top,
    })
}

impl Lattice {
    pub fn from_toml(text: &str) -> Result<Self, LatticeError> {
        validate_lattice(&RawLattice::from_toml(text)?)
    }

    /// The chain `L ⊏ M ⊏ H ⊏ G`.
    pub fn chain4() -> Self {
        Self::chain(&["L", "M", "H", "G"])
    }

    /// A total order, least element first.
    pub fn chain(names: &[&str]) -> Self {
        let raw = RawLattice {
            elements: names.iter().map(|s| s.to_string()).collect(),
            order: names
                .windows(2)
                .map(|w| [w[0].to_string(), w[1].to_string()])
                .collect(),
            meets: None,
        };
        validate_lattice(&raw).expect("a chain is a lattice")
    }

    /// `bot ⊑ a, b ⊑ top` with `a`, `b` incomparable.
    pub fn diamond() -> Self {
        let s = |x: &str| x.to_string();
        let raw = RawLattice {
            elements: vec![s("bot"), s("a"), s("b"), s("top")],
            order: vec![
                [s("bot"), s("a")],
                [s("bot"), s("b")],
                [s("a"), s("top")],
                [s("b"), s("top")],
            ],
            meets: None,
        };
        validate_lattice(&raw).expect("the diamond is a lattice")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn levels(&self) -> impl DoubleEndedIterator<Item = Level> + ExactSizeIterator {
        (0..self.names.len()).map(Level)
    }

    pub fn level(&self, name: &str) -> Result<Level, LatticeError> {
        self.index
            .get(name)
            .map(|&i| Level(i))
            .ok_or_else(|| LatticeError::UnknownElement(name.to_string()))
    }

    pub fn name(&self, l: Level) -> &str {
        &self.names[l.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn top(&self) -> Level {
        Level(self.top)
    }

    pub fn leq(&self, a: Level, b: Level) -> bool {
        self.up[a.0] & bit(b.0) != 0
    }

    pub fn meet(&self, a: Level, b: Level) -> Level {
        Level(self.meet[a.0][b.0])
    }

    fn all_bits(&self) -> u64 {
        if self.len() == 64 {
            u64::MAX
        } else {
            bit(self.len()) - 1
        }
    }

    fn check_level(&self, l: Level) -> Result<(), LatticeError> {
        if l.0 < self.len() {
            Ok(())
        } else {
            Err(LatticeError::UnknownElement(format!("#{}", l.0)))
        }
    }

    fn is_down_closed(&self, bits: u64) -> bool {
        iter_bits(bits).all(|l| self.down[l] & !bits == 0)
    }

    /// Wraps a raw member mask as an open, rejecting sets that are not lower sets.
    pub fn open_from_bits(&self, bits: u64) -> Result<Open, LatticeError> {
        if bits & !self.all_bits() != 0 || !self.is_down_closed(bits) {
            return Err(LatticeError::NotDownwardClosed(format!("{bits:#b}")));
        }
        Ok(Open(bits))
    }

    /// Smallest lower set containing every level in `levels`.
    pub fn lower_closure(
        &self,
        levels: impl IntoIterator<Item = Level>,
    ) -> Result<Open, LatticeError> {
        let mut bits = 0;
        for l in levels {
            self.check_level(l)?;
            bits |= self.down[l.0];
        }
        debug_assert!(self.is_down_closed(bits));
        Ok(Open(bits))
    }

    pub fn lower_closure_of_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Open, LatticeError> {
        let levels = names
            .iter()
            .map(|n| self.level(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        self.lower_closure(levels)
    }

    /// `↓l`, the policy admitting observers at clearance at most `l`.
    pub fn principal_policy(&self, l: Level) -> Open {
        Open(self.down[l.0])
    }

    pub fn principal_filter(&self, l: Level) -> Filter {
        Filter(self.up[l.0])
    }

    pub fn full_open(&self) -> Open {
        Open(self.all_bits())
    }

    fn is_filter(&self, bits: u64) -> bool {
        if bits & bit(self.top) == 0 {
            return false;
        }
        iter_bits(bits).all(|a| {
            self.up[a] & !bits == 0 && iter_bits(bits).all(|b| bits & bit(self.meet[a][b]) != 0)
        })
    }

    fn subset_count_check(&self, bound: u64) -> Result<(), LatticeError> {
        let needed = 1u128 << self.len();
        if needed > bound as u128 {
            return Err(LatticeError::SizeLimitExceeded { needed, bound });
        }
        Ok(())
    }

    /// Every filter of the lattice, found by scanning all subsets. Output is
    /// ordered by member mask.
    pub fn enumerate_filters(&self, bound: u64) -> Result<Vec<Filter>, LatticeError> {
        self.subset_count_check(bound)?;
        Ok((0..=self.all_bits())
            .filter(|&bits| self.is_filter(bits))
            .map(Filter)
            .collect())
    }

    /// Every lower set of the lattice, by scanning all subsets.
    pub fn enumerate_opens(&self, bound: u64) -> Result<Vec<Open>, LatticeError> {
        self.subset_count_check(bound)?;
        Ok((0..=self.all_bits())
            .filter(|&bits| self.is_down_closed(bits))
            .map(Open)
            .collect())
    }

    /// Lower sets contained in `within`, found by walking submasks of it.
    pub fn opens_below(&self, within: Open) -> Vec<Open> {
        let mut out = Vec::new();
        let mut sub = within.0;
        loop {
            if self.is_down_closed(sub) {
                out.push(Open(sub));
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & within.0;
        }
        out.reverse();
        out
    }

    pub fn show_levels(&self, bits: u64) -> String {
        let names: Vec<&str> = iter_bits(bits).map(|i| self.names[i].as_str()).collect();
        format!("{{{}}}", names.join(","))
    }

    pub fn show_open(&self, u: Open) -> String {
        self.show_levels(u.0)
    }

    pub fn show_filter(&self, x: Filter) -> String {
        self.show_levels(x.0)
    }
}

/// A security policy: a downward-closed set of levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Open(u64);

impl Open {
    pub const EMPTY: Open = Open(0);

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, l: Level) -> bool {
        self.0 & bit(l.0) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn members(self) -> impl Iterator<Item = Level> {
        iter_bits(self.0).map(Level)
    }

    pub fn is_subset(self, other: Open) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn join(self, other: Open) -> Open {
        Open(self.0 | other.0)
    }

    pub fn meet(self, other: Open) -> Open {
        Open(self.0 & other.0)
    }
}

/// An abstract behaviour: an upward-closed, meet-closed set of levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Filter(u64);

impl Filter {
    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, l: Level) -> bool {
        self.0 & bit(l.0) != 0
    }

    pub fn members(self) -> impl Iterator<Item = Level> {
        iter_bits(self.0).map(Level)
    }
}

pub fn open_join(u: Open, v: Open) -> Open {
    u.join(v)
}

pub fn open_meet(u: Open, v: Open) -> Open {
    u.meet(v)
}

/// `U` permits `x` when some level lies in both.
pub fn permits(u: Open, x: Filter) -> bool {
    u.0 & x.0 != 0
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}
