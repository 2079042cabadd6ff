//! Finite presheaves on a security lattice and the two modalities a policy
//! induces on them.
//!
//! A presheaf assigns each level a finite carrier and each pair `k ⊑ l` a
//! restriction (redaction) function from the carrier at `l` to the carrier at
//! `k`. Everything here is computed levelwise by brute force; element names
//! are labels only, all comparisons go through indices and explicit
//! bijections.
//!
//! Levelwise formulas. Limits and colimits of presheaves over a poset are
//! computed pointwise, and the policy `U` is the subterminal presheaf that is a
//! singleton on `U` and empty elsewhere.
//!
//! * Transparency `○_U A` is the exponential `A^U`. At `k` a map `y(k) × U → A`
//!   is a family indexed by the levels of `U ∩ ↓k`, compatible with
//!   restriction: a matching family over the lower set `U ∩ ↓k`. Restriction
//!   from `k` to `j` forgets the entries outside `↓j`.
//! * Sealing `•_U A` is the pushout `U ⊔_{U × A} A`. Pointwise, at `k ∈ U` it
//!   is `1 ⊔_{A_k} A_k = {★}`; at `k ∉ U` it is `∅ ⊔_∅ A_k = A_k`. Since `U` is
//!   downward closed, `l ∉ U` whenever `k ∉ U` and `k ⊑ l`, so restrictions are
//!   those of `A` off `U` and collapse to `★` on `U`.
//! * The lift `L A` at `k` is a lower subset `V ⊆ ↓k` (the termination
//!   support) with a matching family over `V`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::lattice::{Lattice, LatticeError, Level, Open};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PresheafError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("no carrier given for level `{0}`")]
    MissingCarrier(String),
    #[error("duplicate element `{1}` at level `{0}`")]
    DuplicateElement(String, String),
    #[error("restriction {0} → {1} goes upward")]
    NotDownward(String, String),
    #[error("restriction {from} → {to}: {detail}")]
    BadRestriction {
        from: String,
        to: String,
        detail: String,
    },
    #[error("no restriction map from `{0}` to `{1}`")]
    MissingRestriction(String, String),
    #[error("restrictions {0} → {1} → {2} do not compose to {0} → {2}")]
    NonFunctorial(String, String, String),
    #[error("enumeration needs {needed} candidates, bound is {bound}")]
    SizeLimitExceeded { needed: u128, bound: u128 },
    #[error("policy is not in the stabilizer: the presheaf is not sealed on it")]
    NotInStabilizer,
    #[error("not a matching family over its support")]
    NotMatching,
    #[error("presheaves live over different lattices")]
    LatticeMismatch,
    #[error("presheaf file: {0}")]
    Parse(String),
}

/// Budgets for the brute-force enumerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest carrier any constructed presheaf may have at one level.
    pub max_carrier: usize,
    /// Largest raw search space for natural-transformation enumeration.
    pub max_candidates: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_carrier: 1 << 16,
            max_candidates: 1 << 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Presheaf {
    lattice: Arc<Lattice>,
    names: Vec<Vec<String>>,
    // maps[l][k] is the restriction A_l → A_k, present exactly when k ⊑ l
    maps: Vec<Vec<Option<Vec<usize>>>>,
}

/// One entry per level; `None` off the support.
pub type Family = Vec<Option<usize>>;

/// Restriction data as read from a presheaf literal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPresheaf {
    pub carriers: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub maps: Vec<RawMap>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMap {
    pub from: String,
    pub to: String,
    /// Image of each element of the source carrier, in order.
    pub image: Vec<String>,
}

impl RawPresheaf {
    pub fn from_toml(text: &str) -> Result<Self, PresheafError> {
        toml::from_str(text).map_err(|e| PresheafError::Parse(e.to_string()))
    }
}

/// Levels of `lat` ordered so that every level comes before those below it.
fn top_down(lat: &Lattice) -> Vec<Level> {
    let mut order: Vec<Level> = lat.levels().collect();
    order.sort_by_key(|&l| (lat.levels().filter(|&m| lat.leq(l, m)).count(), l));
    order
}

/// Validates a raw literal. Maps between non-adjacent levels may be omitted
/// when they can be obtained by composing given ones.
pub fn validate_presheaf(lat: Arc<Lattice>, raw: &RawPresheaf) -> Result<Presheaf, PresheafError> {
    let mut names = Vec::with_capacity(lat.len());
    for l in lat.levels() {
        let name = lat.name(l);
        let carrier = raw
            .carriers
            .get(name)
            .ok_or_else(|| PresheafError::MissingCarrier(name.to_string()))?;
        names.push(carrier.clone());
    }
    for key in raw.carriers.keys() {
        lat.level(key)?;
    }
    let mut given = Vec::new();
    for m in &raw.maps {
        let from = lat.level(&m.from)?;
        let to = lat.level(&m.to)?;
        let bad = |detail: String| PresheafError::BadRestriction {
            from: m.from.clone(),
            to: m.to.clone(),
            detail,
        };
        if m.image.len() != names[from.index()].len() {
            return Err(bad(format!(
                "{} images for {} elements",
                m.image.len(),
                names[from.index()].len()
            )));
        }
        let target = &names[to.index()];
        let image = m
            .image
            .iter()
            .map(|e| {
                target
                    .iter()
                    .position(|t| t == e)
                    .ok_or_else(|| bad(format!("`{e}` is not in the carrier at `{}`", m.to)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        given.push((from, to, image));
    }
    Presheaf::from_maps(lat, names, given)
}

impl Presheaf {
    /// Builds a presheaf from carriers and restriction maps on some pairs
    /// `k ⊑ l`; the remaining maps are composed, then every law is checked.
    pub fn from_maps(
        lat: Arc<Lattice>,
        names: Vec<Vec<String>>,
        given: Vec<(Level, Level, Vec<usize>)>,
    ) -> Result<Presheaf, PresheafError> {
        let n = lat.len();
        for (l, carrier) in lat.levels().zip(&names) {
            for (i, e) in carrier.iter().enumerate() {
                if carrier[..i].contains(e) {
                    return Err(PresheafError::DuplicateElement(
                        lat.name(l).to_string(),
                        e.clone(),
                    ));
                }
            }
        }
        let mut maps: Vec<Vec<Option<Vec<usize>>>> = vec![vec![None; n]; n];
        for (from, to, image) in given {
            if !lat.leq(to, from) {
                return Err(PresheafError::NotDownward(
                    lat.name(from).to_string(),
                    lat.name(to).to_string(),
                ));
            }
            let bad = |detail: String| PresheafError::BadRestriction {
                from: lat.name(from).to_string(),
                to: lat.name(to).to_string(),
                detail,
            };
            if image.len() != names[from.index()].len() {
                return Err(bad("wrong number of images".into()));
            }
            if image.iter().any(|&i| i >= names[to.index()].len()) {
                return Err(bad("image outside the target carrier".into()));
            }
            maps[from.index()][to.index()] = Some(image);
        }
        for l in 0..n {
            if maps[l][l].is_none() {
                maps[l][l] = Some((0..names[l].len()).collect());
            }
        }
        // Fill in missing maps by composition until nothing changes.
        loop {
            let mut changed = false;
            for l in lat.levels() {
                for k in lat.levels() {
                    if !lat.leq(k, l) || maps[l.index()][k.index()].is_some() {
                        continue;
                    }
                    let via = lat.levels().find(|&m| {
                        lat.leq(k, m)
                            && lat.leq(m, l)
                            && maps[l.index()][m.index()].is_some()
                            && maps[m.index()][k.index()].is_some()
                    });
                    if let Some(m) = via {
                        let first = maps[l.index()][m.index()].as_ref().unwrap();
                        let second = maps[m.index()][k.index()].as_ref().unwrap();
                        let composed = first.iter().map(|&a| second[a]).collect();
                        maps[l.index()][k.index()] = Some(composed);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for l in lat.levels() {
            for k in lat.levels() {
                if lat.leq(k, l) && maps[l.index()][k.index()].is_none() {
                    return Err(PresheafError::MissingRestriction(
                        lat.name(l).to_string(),
                        lat.name(k).to_string(),
                    ));
                }
            }
        }
        let psh = Presheaf {
            lattice: lat,
            names,
            maps,
        };
        psh.check_laws()?;
        Ok(psh)
    }

    fn check_laws(&self) -> Result<(), PresheafError> {
        let lat = &*self.lattice;
        for l in lat.levels() {
            let id = self.map(l, l);
            if id.iter().enumerate().any(|(i, &j)| i != j) {
                let name = lat.name(l).to_string();
                return Err(PresheafError::NonFunctorial(
                    name.clone(),
                    name.clone(),
                    name,
                ));
            }
        }
        for l in lat.levels() {
            for k in lat.levels().filter(|&k| lat.leq(k, l)) {
                for j in lat.levels().filter(|&j| lat.leq(j, k)) {
                    let direct = self.map(l, j);
                    let (lk, kj) = (self.map(l, k), self.map(k, j));
                    if (0..self.size(l)).any(|a| kj[lk[a]] != direct[a]) {
                        return Err(PresheafError::NonFunctorial(
                            lat.name(l).to_string(),
                            lat.name(k).to_string(),
                            lat.name(j).to_string(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn size(&self, l: Level) -> usize {
        self.names[l.index()].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.names.iter().map(Vec::len).collect()
    }

    pub fn element_names(&self, l: Level) -> &[String] {
        &self.names[l.index()]
    }

    fn map(&self, from: Level, to: Level) -> &[usize] {
        self.maps[from.index()][to.index()]
            .as_deref()
            .expect("restriction requested along k ⊑ l only")
    }

    /// Restriction of element `a` at `from` down to `to`.
    ///
    /// Panics unless `to ⊑ from`.
    pub fn restrict(&self, from: Level, to: Level, a: usize) -> usize {
        self.map(from, to)[a]
    }

    pub fn same_lattice(&self, other: &Presheaf) -> Result<(), PresheafError> {
        if Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice == other.lattice {
            Ok(())
        } else {
            Err(PresheafError::LatticeMismatch)
        }
    }

    /// Builds a presheaf from per-level element lists and a restriction
    /// function on element indices, skipping validation of the laws.
    fn build(
        lat: &Arc<Lattice>,
        names: Vec<Vec<String>>,
        restrict: impl Fn(Level, Level, usize) -> usize,
    ) -> Presheaf {
        let n = lat.len();
        let mut maps = vec![vec![None; n]; n];
        for l in lat.levels() {
            for k in lat.levels().filter(|&k| lat.leq(k, l)) {
                maps[l.index()][k.index()] = Some(
                    (0..names[l.index()].len())
                        .map(|a| restrict(l, k, a))
                        .collect(),
                );
            }
        }
        let psh = Presheaf {
            lattice: lat.clone(),
            names,
            maps,
        };
        debug_assert_eq!(psh.check_laws(), Ok(()));
        psh
    }

    fn check_size(&self, size: usize, limits: &Limits) -> Result<(), PresheafError> {
        if size > limits.max_carrier {
            return Err(PresheafError::SizeLimitExceeded {
                needed: size as u128,
                bound: limits.max_carrier as u128,
            });
        }
        Ok(())
    }

    /// Does `family` (one optional entry per level) match over `support`?
    pub fn is_matching_family(&self, support: Open, family: &[Option<usize>]) -> bool {
        let lat = &*self.lattice;
        if family.len() != lat.len() {
            return false;
        }
        for l in lat.levels() {
            match (support.contains(l), family[l.index()]) {
                (true, Some(a)) if a < self.size(l) => {}
                (false, None) => {}
                _ => return false,
            }
        }
        support.members().all(|l| {
            support.members().filter(|&k| lat.leq(k, l)).all(|k| {
                self.restrict(l, k, family[l.index()].unwrap()) == family[k.index()].unwrap()
            })
        })
    }

    /// Every matching family over the lower set `support`, in a fixed order.
    pub fn matching_families(
        &self,
        support: Open,
        limits: &Limits,
    ) -> Result<Vec<Family>, PresheafError> {
        let lat = &*self.lattice;
        let order: Vec<Level> = top_down(lat)
            .into_iter()
            .filter(|&l| support.contains(l))
            .collect();
        let mut out = Vec::new();
        let mut current: Family = vec![None; lat.len()];
        self.extend_family(&order, 0, &mut current, &mut out, limits)?;
        Ok(out)
    }

    fn extend_family(
        &self,
        order: &[Level],
        depth: usize,
        current: &mut Family,
        out: &mut Vec<Family>,
        limits: &Limits,
    ) -> Result<(), PresheafError> {
        let Some(&k) = order.get(depth) else {
            self.check_size(out.len() + 1, limits)?;
            out.push(current.clone());
            return Ok(());
        };
        let lat = &*self.lattice;
        // Anything assigned above k forces the entry at k.
        let forced: Vec<usize> = order[..depth]
            .iter()
            .filter(|&&l| lat.leq(k, l))
            .map(|&l| self.restrict(l, k, current[l.index()].unwrap()))
            .collect();
        let candidates: Vec<usize> = match forced.first() {
            Some(&v) if forced.iter().all(|&w| w == v) => vec![v],
            Some(_) => vec![],
            None => (0..self.size(k)).collect(),
        };
        for a in candidates {
            current[k.index()] = Some(a);
            self.extend_family(order, depth + 1, current, out, limits)?;
        }
        current[k.index()] = None;
        Ok(())
    }

    /// Rows, top level first: `level | size | elements`.
    pub fn render_rows(&self) -> String {
        let lat = &*self.lattice;
        let width = lat
            .names()
            .iter()
            .map(|n| n.chars().count())
            .max()
            .unwrap_or(1);
        let mut rows = Vec::new();
        for l in top_down(lat) {
            rows.push(format!(
                "{:<width$} | {:>3} | {}",
                lat.name(l),
                self.size(l),
                self.element_names(l).join(" "),
            ));
        }
        rows.join("\n")
    }
}

/// `n` elements at every level, identity restrictions.
pub fn constant_presheaf(lat: &Arc<Lattice>, n: usize) -> Presheaf {
    let names = lat
        .levels()
        .map(|_| (0..n).map(|i| i.to_string()).collect())
        .collect();
    Presheaf::build(lat, names, |_, _, a| a)
}

pub fn terminal(lat: &Arc<Lattice>) -> Presheaf {
    let names = lat.levels().map(|_| vec!["★".to_string()]).collect();
    Presheaf::build(lat, names, |_, _, _| 0)
}

pub fn product(a: &Presheaf, b: &Presheaf) -> Result<Presheaf, PresheafError> {
    a.same_lattice(b)?;
    let lat = a.lattice.clone();
    let names = lat
        .levels()
        .map(|l| {
            let mut v = Vec::new();
            for x in a.element_names(l) {
                for y in b.element_names(l) {
                    v.push(format!("({x},{y})"));
                }
            }
            v
        })
        .collect();
    Ok(Presheaf::build(&lat, names, |l, k, p| {
        let (x, y) = (p / b.size(l), p % b.size(l));
        a.restrict(l, k, x) * b.size(k) + b.restrict(l, k, y)
    }))
}

pub fn coproduct(a: &Presheaf, b: &Presheaf) -> Result<Presheaf, PresheafError> {
    a.same_lattice(b)?;
    let lat = a.lattice.clone();
    let names = lat
        .levels()
        .map(|l| {
            let left = a.element_names(l).iter().map(|x| format!("inl {x}"));
            let right = b.element_names(l).iter().map(|y| format!("inr {y}"));
            left.chain(right).collect()
        })
        .collect();
    Ok(Presheaf::build(&lat, names, |l, k, e| {
        if e < a.size(l) {
            a.restrict(l, k, e)
        } else {
            a.size(k) + b.restrict(l, k, e - a.size(l))
        }
    }))
}

/// A morphism of presheaves, one function per level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NatTrans {
    pub components: Vec<Vec<usize>>,
}

impl NatTrans {
    pub fn identity(a: &Presheaf) -> NatTrans {
        NatTrans {
            components: a.sizes().into_iter().map(|n| (0..n).collect()).collect(),
        }
    }

    pub fn apply(&self, l: Level, a: usize) -> usize {
        self.components[l.index()][a]
    }

    /// Checks shapes and that every naturality square commutes.
    pub fn is_natural(&self, src: &Presheaf, dst: &Presheaf) -> bool {
        let lat = &*src.lattice;
        if self.components.len() != lat.len() {
            return false;
        }
        for l in lat.levels() {
            let f = &self.components[l.index()];
            if f.len() != src.size(l) || f.iter().any(|&b| b >= dst.size(l)) {
                return false;
            }
        }
        lat.levels().all(|l| {
            lat.levels().filter(|&k| lat.leq(k, l)).all(|k| {
                (0..src.size(l)).all(|a| {
                    dst.restrict(l, k, self.apply(l, a)) == self.apply(k, src.restrict(l, k, a))
                })
            })
        })
    }

    pub fn is_levelwise_bijection(&self, src: &Presheaf, dst: &Presheaf) -> bool {
        src.lattice.levels().all(|l| {
            let f = &self.components[l.index()];
            if f.len() != dst.size(l) {
                return false;
            }
            let mut seen = vec![false; dst.size(l)];
            f.iter().all(|&b| !std::mem::replace(&mut seen[b], true))
        })
    }

    pub fn compose(&self, after: &NatTrans) -> NatTrans {
        NatTrans {
            components: self
                .components
                .iter()
                .zip(&after.components)
                .map(|(f, g)| f.iter().map(|&b| g[b]).collect())
                .collect(),
        }
    }

    /// Inverse of a levelwise bijection.
    pub fn inverse(&self) -> Option<NatTrans> {
        let mut components = Vec::with_capacity(self.components.len());
        for f in &self.components {
            let mut inv = vec![usize::MAX; f.len()];
            for (a, &b) in f.iter().enumerate() {
                if b >= inv.len() || inv[b] != usize::MAX {
                    return None;
                }
                inv[b] = a;
            }
            components.push(inv);
        }
        Some(NatTrans { components })
    }

    /// Whether this map `src → dst` equals `g ∘ !` for some global point `g` of `dst`.
    pub fn factors_through_terminal(
        &self,
        src: &Presheaf,
        dst: &Presheaf,
        limits: &Limits,
    ) -> Result<bool, PresheafError> {
        let one = terminal(src.lattice());
        let points = enumerate_nat_trans(&one, dst, limits)?;
        Ok(points.iter().any(|g| {
            src.lattice.levels().all(|l| {
                self.components[l.index()]
                    .iter()
                    .all(|&b| b == g.apply(l, 0))
            })
        }))
    }
}

/// A presheaf together with the unit of a modality into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WithUnit {
    pub presheaf: Presheaf,
    pub unit: NatTrans,
}

fn show_family(lat: &Lattice, names: &[Vec<String>], fam: &[Option<usize>]) -> String {
    let parts: Vec<String> = lat
        .levels()
        .filter_map(|l| fam[l.index()].map(|a| format!("{}:{}", lat.name(l), names[l.index()][a])))
        .collect();
    format!("({})", parts.join(","))
}

/// `○_U A`: matching families over `U ∩ ↓k`.
pub fn open_modality(u: Open, a: &Presheaf, limits: &Limits) -> Result<WithUnit, PresheafError> {
    let lat = a.lattice.clone();
    let mut fams = Vec::with_capacity(lat.len());
    let mut index: Vec<HashMap<Family, usize>> = Vec::with_capacity(lat.len());
    for k in lat.levels() {
        let support = u.meet(lat.principal_policy(k));
        let fs = a.matching_families(support, limits)?;
        index.push(
            fs.iter()
                .cloned()
                .enumerate()
                .map(|(i, f)| (f, i))
                .collect(),
        );
        fams.push(fs);
    }
    let names = fams
        .iter()
        .map(|fs| fs.iter().map(|f| show_family(&lat, &a.names, f)).collect())
        .collect();
    let truncate = |k: Level, fam: &Family| -> Family {
        lat.levels()
            .map(|j| fam[j.index()].filter(|_| lat.leq(j, k)))
            .collect()
    };
    let presheaf = Presheaf::build(&lat, names, |l, k, i| {
        index[k.index()][&truncate(k, &fams[l.index()][i])]
    });
    let unit = NatTrans {
        components: lat
            .levels()
            .map(|k| {
                let support = u.meet(lat.principal_policy(k));
                (0..a.size(k))
                    .map(|x| {
                        let fam: Family = lat
                            .levels()
                            .map(|j| support.contains(j).then(|| a.restrict(k, j, x)))
                            .collect();
                        index[k.index()][&fam]
                    })
                    .collect()
            })
            .collect(),
    };
    debug_assert!(unit.is_natural(a, &presheaf));
    Ok(WithUnit { presheaf, unit })
}

/// `○_U f : ○_U A → ○_U B` for `f : A → B`, acting on matching families
/// pointwise.
pub fn open_map(
    u: Open,
    f: &NatTrans,
    a: &Presheaf,
    b: &Presheaf,
    limits: &Limits,
) -> Result<NatTrans, PresheafError> {
    a.same_lattice(b)?;
    let lat = a.lattice.clone();
    let mut components = Vec::with_capacity(lat.len());
    for k in lat.levels() {
        let support = u.meet(lat.principal_policy(k));
        let index: HashMap<Family, usize> = b
            .matching_families(support, limits)?
            .into_iter()
            .enumerate()
            .map(|(i, fam)| (fam, i))
            .collect();
        let component = a
            .matching_families(support, limits)?
            .iter()
            .map(|fam| {
                let image: Family = lat
                    .levels()
                    .map(|j| fam[j.index()].map(|x| f.apply(j, x)))
                    .collect();
                index[&image]
            })
            .collect();
        components.push(component);
    }
    Ok(NatTrans { components })
}

/// `•_U A`: a point on `U`, `A` elsewhere.
pub fn closed_modality(u: Open, a: &Presheaf) -> WithUnit {
    let lat = a.lattice.clone();
    let names = lat
        .levels()
        .map(|k| {
            if u.contains(k) {
                vec!["★".to_string()]
            } else {
                a.names[k.index()].clone()
            }
        })
        .collect();
    let presheaf = Presheaf::build(&lat, names, |l, k, x| {
        if u.contains(k) {
            0
        } else {
            a.restrict(l, k, x)
        }
    });
    let unit = NatTrans {
        components: lat
            .levels()
            .map(|k| {
                (0..a.size(k))
                    .map(|x| if u.contains(k) { 0 } else { x })
                    .collect()
            })
            .collect(),
    };
    debug_assert!(unit.is_natural(a, &presheaf));
    WithUnit { presheaf, unit }
}

/// `•_U f : •_U A → •_U B` for `f : A → B`.
pub fn closed_map(u: Open, f: &NatTrans, a: &Presheaf) -> NatTrans {
    NatTrans {
        components: a
            .lattice
            .levels()
            .map(|k| {
                if u.contains(k) {
                    vec![0]
                } else {
                    f.components[k.index()].clone()
                }
            })
            .collect(),
    }
}

/// The unit `A → ○_U A` is a levelwise bijection.
pub fn is_transparent(u: Open, a: &Presheaf, limits: &Limits) -> Result<bool, PresheafError> {
    let o = open_modality(u, a, limits)?;
    Ok(o.unit.is_levelwise_bijection(a, &o.presheaf))
}

/// `A` is a singleton at every level of `U`.
pub fn is_sealed(u: Open, a: &Presheaf) -> bool {
    u.members().all(|k| a.size(k) == 1)
}

/// Rebuilds `A` as the pullback `○A ×_{•○A} •A` and checks that the
/// canonical comparison map is a bijection at every level.
pub fn fracture_check(u: Open, a: &Presheaf, limits: &Limits) -> Result<bool, PresheafError> {
    let lat = a.lattice.clone();
    let open = open_modality(u, a, limits)?;
    let closed = closed_modality(u, a);
    let closed_open = closed_modality(u, &open.presheaf);
    // ○A → •○A is the unit of •; •A → •○A is • applied to the unit of ○.
    let left = &closed_open.unit;
    let right = closed_map(u, &open.unit, a);
    for k in lat.levels() {
        let mut pullback = Vec::new();
        for o in 0..open.presheaf.size(k) {
            for c in 0..closed.presheaf.size(k) {
                if left.apply(k, o) == right.apply(k, c) {
                    pullback.push((o, c));
                }
            }
        }
        let mut hit = vec![false; pullback.len()];
        for x in 0..a.size(k) {
            let pair = (open.unit.apply(k, x), closed.unit.apply(k, x));
            match pullback.iter().position(|&p| p == pair) {
                Some(i) if !hit[i] => hit[i] = true,
                _ => return Ok(false),
            }
        }
        if hit.iter().any(|h| !h) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every natural transformation `A → B`, in a fixed order.
pub fn enumerate_nat_trans(
    a: &Presheaf,
    b: &Presheaf,
    limits: &Limits,
) -> Result<Vec<NatTrans>, PresheafError> {
    a.same_lattice(b)?;
    let lat = a.lattice.clone();
    let mut needed: u128 = 1;
    for l in lat.levels() {
        for _ in 0..a.size(l) {
            needed = needed.saturating_mul(b.size(l) as u128);
        }
    }
    if needed > limits.max_candidates {
        return Err(PresheafError::SizeLimitExceeded {
            needed,
            bound: limits.max_candidates,
        });
    }
    let slots: Vec<(Level, usize)> = top_down(&lat)
        .into_iter()
        .flat_map(|l| (0..a.size(l)).map(move |x| (l, x)))
        .collect();
    let mut current = NatTrans {
        components: lat.levels().map(|l| vec![usize::MAX; a.size(l)]).collect(),
    };
    let mut out = Vec::new();
    search_nat(a, b, &slots, 0, &mut current, &mut out);
    Ok(out)
}

fn search_nat(
    a: &Presheaf,
    b: &Presheaf,
    slots: &[(Level, usize)],
    depth: usize,
    current: &mut NatTrans,
    out: &mut Vec<NatTrans>,
) {
    let Some(&(k, x)) = slots.get(depth) else {
        out.push(current.clone());
        return;
    };
    let lat = &*a.lattice;
    // Levels above k are already assigned; naturality pins the value.
    let mut forced = None;
    for l in lat.levels().filter(|&l| l != k && lat.leq(k, l)) {
        for y in (0..a.size(l)).filter(|&y| a.restrict(l, k, y) == x) {
            let v = b.restrict(l, k, current.apply(l, y));
            match forced {
                None => forced = Some(v),
                Some(w) if w != v => return,
                _ => {}
            }
        }
    }
    let candidates: Vec<usize> = match forced {
        Some(v) => vec![v],
        None => (0..b.size(k)).collect(),
    };
    for v in candidates {
        current.components[k.index()][x] = v;
        search_nat(a, b, slots, depth + 1, current, out);
    }
    current.components[k.index()][x] = usize::MAX;
}

/// Searches for a natural isomorphism `A ≅ B`.
pub fn find_isomorphism(
    a: &Presheaf,
    b: &Presheaf,
    limits: &Limits,
) -> Result<Option<NatTrans>, PresheafError> {
    if a.sizes() != b.sizes() {
        return Ok(None);
    }
    Ok(enumerate_nat_trans(a, b, limits)?
        .into_iter()
        .find(|f| f.is_levelwise_bijection(a, b)))
}

/// An element of `L A` at some level: a support and a matching family on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialElement {
    pub support: Open,
    pub family: Family,
}

impl PartialElement {
    pub fn bottom(lat: &Lattice) -> PartialElement {
        PartialElement {
            support: Open::EMPTY,
            family: vec![None; lat.len()],
        }
    }

    /// Total element given by a global section.
    pub fn total(a: &Presheaf, family: Family) -> Result<PartialElement, PresheafError> {
        let pe = PartialElement {
            support: a.lattice.full_open(),
            family,
        };
        pe.validate(a)?;
        Ok(pe)
    }

    pub fn validate(&self, a: &Presheaf) -> Result<(), PresheafError> {
        if a.is_matching_family(self.support, &self.family) {
            Ok(())
        } else {
            Err(PresheafError::NotMatching)
        }
    }

    /// Restriction to the policy `↓k`.
    pub fn restrict_to(&self, lat: &Lattice, k: Level) -> PartialElement {
        let down = lat.principal_policy(k);
        PartialElement {
            support: self.support.meet(down),
            family: lat
                .levels()
                .map(|j| self.family[j.index()].filter(|_| down.contains(j)))
                .collect(),
        }
    }
}

/// `L A`: at `k`, pairs of a lower subset `V ⊆ ↓k` and a matching family on `V`.
pub fn lift_presheaf(a: &Presheaf, limits: &Limits) -> Result<Presheaf, PresheafError> {
    let lat = a.lattice.clone();
    let mut elems: Vec<Vec<PartialElement>> = Vec::with_capacity(lat.len());
    for k in lat.levels() {
        let mut here = Vec::new();
        for v in lat.opens_below(lat.principal_policy(k)) {
            for family in a.matching_families(v, limits)? {
                here.push(PartialElement { support: v, family });
                a.check_size(here.len(), limits)?;
            }
        }
        elems.push(here);
    }
    let index: Vec<HashMap<&PartialElement, usize>> = elems
        .iter()
        .map(|es| es.iter().enumerate().map(|(i, e)| (e, i)).collect())
        .collect();
    let names = elems
        .iter()
        .map(|es| {
            es.iter()
                .map(|e| {
                    if e.support.is_empty() {
                        "⊥".to_string()
                    } else {
                        format!(
                            "{}{}",
                            lat.show_open(e.support),
                            show_family(&lat, &a.names, &e.family)
                        )
                    }
                })
                .collect()
        })
        .collect();
    let lifted = Presheaf::build(&lat, names, |l, k, i| {
        index[k.index()][&elems[l.index()][i].restrict_to(&lat, k)]
    });
    lifted.check_laws()?;
    Ok(lifted)
}

/// `φ ∥ a`: extends the support of `a` by `φ`, filling `φ` with the unique
/// element that a `φ`-sealed presheaf has there.
pub fn stabilizer_action(
    phi: Open,
    a: &PartialElement,
    over: &Presheaf,
) -> Result<PartialElement, PresheafError> {
    if !is_sealed(phi, over) {
        return Err(PresheafError::NotInStabilizer);
    }
    a.validate(over)?;
    let lat = over.lattice();
    let family = lat
        .levels()
        .map(|k| {
            if phi.contains(k) {
                Some(0)
            } else {
                a.family[k.index()]
            }
        })
        .collect();
    let out = PartialElement {
        support: phi.join(a.support),
        family,
    };
    debug_assert!(out.validate(over).is_ok());
    Ok(out)
}
