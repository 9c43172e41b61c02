use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::name::{Elem, ObjId};

/// Finite function stored as key-sorted pairs.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FnMap {
    pairs: Vec<(Elem, Elem)>,
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (x, y)) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}->{y}")?;
        }
        f.write_str("}")
    }
}

impl FnMap {
    /// Builds from pairs; returns None if a key repeats with different values.
    pub fn from_pairs<I>(it: I) -> Option<Self>
    where
        I: IntoIterator<Item = (Elem, Elem)>,
    {
        let mut pairs: Vec<(Elem, Elem)> = it.into_iter().collect();
        pairs.sort();
        pairs.dedup();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return None;
            }
        }
        Some(FnMap { pairs })
    }

    pub fn from_btree(m: &BTreeMap<Elem, Elem>) -> Self {
        FnMap { pairs: m.iter().map(|(a, b)| (a.clone(), b.clone())).collect() }
    }

    pub fn identity<'a, I: IntoIterator<Item = &'a Elem>>(dom: I) -> Self {
        let mut pairs: Vec<(Elem, Elem)> = dom.into_iter().map(|x| (x.clone(), x.clone())).collect();
        pairs.sort();
        pairs.dedup();
        FnMap { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(Elem, Elem)] {
        &self.pairs
    }

    pub fn get(&self, x: &str) -> Option<&Elem> {
        self.pairs
            .binary_search_by(|(k, _)| k.as_str().cmp(x))
            .ok()
            .map(|i| &self.pairs[i].1)
    }

    pub fn domain(&self) -> impl Iterator<Item = &Elem> {
        self.pairs.iter().map(|(k, _)| k)
    }

    pub fn image(&self) -> BTreeSet<Elem> {
        self.pairs.iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn is_injective(&self) -> bool {
        self.image().len() == self.pairs.len()
    }

    pub fn is_identity(&self) -> bool {
        self.pairs.iter().all(|(a, b)| a == b)
    }

    /// `self ∘ inner`: apply `inner` first. None if some image of `inner` is outside our domain.
    pub fn after(&self, inner: &FnMap) -> Option<FnMap> {
        let mut pairs = Vec::with_capacity(inner.pairs.len());
        for (x, y) in &inner.pairs {
            pairs.push((x.clone(), self.get(y)?.clone()));
        }
        Some(FnMap { pairs })
    }

    pub fn inverse(&self) -> Option<FnMap> {
        FnMap::from_pairs(self.pairs.iter().map(|(a, b)| (b.clone(), a.clone())))
            .filter(|m| m.len() == self.len())
    }

    pub fn restrict<'a, I: IntoIterator<Item = &'a Elem>>(&self, dom: I) -> Option<FnMap> {
        let mut pairs = Vec::new();
        for x in dom {
            pairs.push((x.clone(), self.get(x)?.clone()));
        }
        pairs.sort();
        pairs.dedup();
        Some(FnMap { pairs })
    }

    /// Union of two maps; None if they disagree on a shared key.
    pub fn union(&self, other: &FnMap) -> Option<FnMap> {
        FnMap::from_pairs(self.pairs.iter().chain(other.pairs.iter()).cloned())
    }

    pub fn agrees_with(&self, other: &FnMap) -> bool {
        other.pairs.iter().all(|(x, y)| self.get(x).map_or(true, |z| z == y))
    }

    pub fn map_names(&self, f: impl Fn(&Elem) -> Elem, g: impl Fn(&Elem) -> Elem) -> FnMap {
        let mut pairs: Vec<(Elem, Elem)> = self.pairs.iter().map(|(a, b)| (f(a), g(b))).collect();
        pairs.sort();
        FnMap { pairs }
    }
}

/// A map between two named objects.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Arrow {
    pub source: ObjId,
    pub target: ObjId,
    pub map: FnMap,
}

impl Arrow {
    pub fn new(source: impl Into<ObjId>, target: impl Into<ObjId>, map: FnMap) -> Self {
        Arrow { source: source.into(), target: target.into(), map }
    }

    /// `self ∘ inner`, requiring inner.target == self.source.
    pub fn after(&self, inner: &Arrow) -> Option<Arrow> {
        if inner.target != self.source {
            return None;
        }
        Some(Arrow {
            source: inner.source.clone(),
            target: self.target.clone(),
            map: self.map.after(&inner.map)?,
        })
    }

    pub fn inverse(&self) -> Option<Arrow> {
        Some(Arrow { source: self.target.clone(), target: self.source.clone(), map: self.map.inverse()? })
    }
}

/// Sorted, duplicate-free set of arrows; arrows between a fixed pair form a contiguous run.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ArrowSet {
    arrows: Vec<Arrow>,
}

impl ArrowSet {
    pub fn new(mut arrows: Vec<Arrow>) -> Self {
        arrows.sort();
        arrows.dedup();
        ArrowSet { arrows }
    }

    pub fn len(&self) -> usize {
        self.arrows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrows.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Arrow> {
        self.arrows.iter()
    }

    pub fn as_slice(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn get(&self, i: usize) -> Option<&Arrow> {
        self.arrows.get(i)
    }

    fn range(&self, s: &str, t: &str) -> std::ops::Range<usize> {
        let lo = self
            .arrows
            .partition_point(|a| (a.source.as_str(), a.target.as_str()) < (s, t));
        let hi = self
            .arrows
            .partition_point(|a| (a.source.as_str(), a.target.as_str()) <= (s, t));
        lo..hi
    }

    pub fn between(&self, s: &str, t: &str) -> &[Arrow] {
        let r = self.range(s, t);
        &self.arrows[r]
    }

    pub fn between_ids(&self, s: &str, t: &str) -> std::ops::Range<usize> {
        self.range(s, t)
    }

    pub fn contains(&self, a: &Arrow) -> bool {
        self.arrows.binary_search(a).is_ok()
    }

    pub fn position(&self, a: &Arrow) -> Option<usize> {
        self.arrows.binary_search(a).ok()
    }

    pub fn from_source<'a>(&'a self, s: &'a str) -> impl Iterator<Item = &'a Arrow> + 'a {
        let lo = self.arrows.partition_point(|a| a.source.as_str() < s);
        self.arrows[lo..].iter().take_while(move |a| a.source.as_str() == s)
    }

    /// Distinct (source, target) pairs in order.
    pub fn pairs(&self) -> Vec<(ObjId, ObjId)> {
        let mut out: Vec<(ObjId, ObjId)> = Vec::new();
        for a in &self.arrows {
            if out.last().map_or(true, |(s, t)| s != &a.source || t != &a.target) {
                out.push((a.source.clone(), a.target.clone()));
            }
        }
        out
    }

    pub fn into_vec(self) -> Vec<Arrow> {
        self.arrows
    }
}

impl FromIterator<Arrow> for ArrowSet {
    fn from_iter<T: IntoIterator<Item = Arrow>>(iter: T) -> Self {
        ArrowSet::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a ArrowSet {
    type Item = &'a Arrow;
    type IntoIter = std::slice::Iter<'a, Arrow>;
    fn into_iter(self) -> Self::IntoIter {
        self.arrows.iter()
    }
}


/// Closure of permutations of `domain` under composition (identity included).
pub fn close_group(gens: &[FnMap], domain: &[Elem]) -> Vec<FnMap> {
    let id = FnMap::identity(domain);
    let mut seen: BTreeSet<FnMap> = BTreeSet::new();
    seen.insert(id.clone());
    let mut frontier = vec![id];
    while let Some(x) = frontier.pop() {
        for g in gens {
            if let Some(y) = g.after(&x) {
                if seen.insert(y.clone()) {
                    frontier.push(y);
                }
            }
        }
    }
    seen.into_iter().collect()
}
