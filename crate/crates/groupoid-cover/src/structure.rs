//! Finite multi-sorted relational structures and their automorphisms.
//!
//! Automorphisms and isomorphisms are found by a backtracking search over element
//! images: colour refinement gives the initial domains, forward checking on relation
//! tuples prunes, and singleton domains propagate.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::hash::{Hash, Hasher};

use num_bigint::BigUint;

use crate::error::{pre, Error, Result};
use crate::map::FnMap;
use crate::name::{Elem, Name};
use crate::report::ValidationReport;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Relation {
    pub signature: Vec<Name>,
    pub tuples: BTreeSet<Vec<Elem>>,
}

/// f : S → A with A inside one base sort.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberMap {
    pub s_sort: Name,
    pub a_sort: Name,
    pub a_set: Vec<Elem>,
    pub map: BTreeMap<Elem, Elem>,
}

impl FiberMap {
    pub fn fiber(&self, a: &str) -> Vec<Elem> {
        self.map.iter().filter(|(_, v)| v.as_str() == a).map(|(k, _)| k.clone()).collect()
    }

    pub fn fiber_over(&self, c: &[Name]) -> Vec<Elem> {
        self.map.iter().filter(|(_, v)| c.contains(v)).map(|(k, _)| k.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MultiSortedStructure {
    /// Sorts in declared order; element names are unique across sorts.
    pub sorts: Vec<(Name, Vec<Elem>)>,
    pub relations: BTreeMap<Name, Relation>,
    pub base_sorts: BTreeSet<Name>,
    pub fiber: Option<FiberMap>,
}

pub const FIBER_RELATION: &str = "__fiber";

impl MultiSortedStructure {
    pub fn sort(&self, name: &str) -> Option<&Vec<Elem>> {
        self.sorts.iter().find(|(n, _)| n.as_str() == name).map(|(_, e)| e)
    }

    pub fn sort_mut(&mut self, name: &str) -> Option<&mut Vec<Elem>> {
        self.sorts.iter_mut().find(|(n, _)| n.as_str() == name).map(|(_, e)| e)
    }

    pub fn sort_of(&self) -> HashMap<Elem, Name> {
        let mut m = HashMap::new();
        for (s, es) in &self.sorts {
            for e in es {
                m.insert(e.clone(), s.clone());
            }
        }
        m
    }

    pub fn elements(&self) -> impl Iterator<Item = &Elem> {
        self.sorts.iter().flat_map(|(_, e)| e.iter())
    }

    pub fn size(&self) -> usize {
        self.sorts.iter().map(|(_, e)| e.len()).sum()
    }

    pub fn base_elements(&self) -> Vec<Elem> {
        self.sorts
            .iter()
            .filter(|(s, _)| self.base_sorts.contains(s))
            .flat_map(|(_, e)| e.iter().cloned())
            .collect()
    }

    pub fn add_sort(&mut self, name: &str, elems: Vec<Elem>) {
        match self.sort_mut(name) {
            Some(v) => {
                for e in elems {
                    if !v.contains(&e) {
                        v.push(e);
                    }
                }
            }
            None => self.sorts.push((Name::from(name), elems)),
        }
    }

    pub fn add_relation(&mut self, name: &str, signature: &[&str], tuples: impl IntoIterator<Item = Vec<Elem>>) {
        let r = self.relations.entry(Name::from(name)).or_insert_with(|| Relation {
            signature: signature.iter().map(|s| Name::from(*s)).collect(),
            tuples: BTreeSet::new(),
        });
        r.tuples.extend(tuples);
    }

    /// Named relations plus the fibre map as a binary relation.
    fn all_relations(&self) -> Vec<(Name, Relation)> {
        let mut v: Vec<(Name, Relation)> = self.relations.iter().map(|(k, r)| (k.clone(), r.clone())).collect();
        if let Some(f) = &self.fiber {
            v.push((
                Name::from(FIBER_RELATION),
                Relation {
                    signature: vec![f.s_sort.clone(), f.a_sort.clone()],
                    tuples: f.map.iter().map(|(s, a)| vec![s.clone(), a.clone()]).collect(),
                },
            ));
        }
        v
    }

    /// Union of two structures; sorts with the same name are merged, relations united.
    pub fn merge(&self, other: &MultiSortedStructure) -> Result<MultiSortedStructure> {
        let mut out = self.clone();
        let mine = self.sort_of();
        for (s, es) in &other.sorts {
            for e in es {
                if let Some(t) = mine.get(e) {
                    if t != s {
                        return Err(pre(format!("element {e} is in sort {t} and sort {s}")));
                    }
                }
            }
            out.add_sort(s, es.clone());
        }
        for (n, r) in &other.relations {
            match out.relations.get_mut(n) {
                Some(x) => {
                    if x.signature != r.signature {
                        return Err(pre(format!("relation {n} has two signatures")));
                    }
                    x.tuples.extend(r.tuples.iter().cloned());
                }
                None => {
                    out.relations.insert(n.clone(), r.clone());
                }
            }
        }
        out.base_sorts.extend(other.base_sorts.iter().cloned());
        Ok(out)
    }

    /// Renames every non-base sort, its elements and relations mentioning only
    /// non-base sorts... by appending `suffix`. Returns the element renaming.
    pub fn rename_non_base(&self, suffix: &str) -> (MultiSortedStructure, BTreeMap<Elem, Elem>) {
        let mut ren: BTreeMap<Elem, Elem> = BTreeMap::new();
        let mut out = MultiSortedStructure { base_sorts: self.base_sorts.clone(), ..Default::default() };
        let sort_ren = |s: &Name| -> Name {
            if self.base_sorts.contains(s) {
                s.clone()
            } else {
                Name::from(format!("{s}{suffix}"))
            }
        };
        for (s, es) in &self.sorts {
            let ns = sort_ren(s);
            let nes: Vec<Elem> = es
                .iter()
                .map(|e| {
                    let ne = if self.base_sorts.contains(s) { e.clone() } else { Name::from(format!("{e}{suffix}")) };
                    ren.insert(e.clone(), ne.clone());
                    ne
                })
                .collect();
            out.sorts.push((ns, nes));
        }
        for (n, r) in &self.relations {
            let touches = r.signature.iter().any(|s| !self.base_sorts.contains(s));
            let nn = if touches { Name::from(format!("{n}{suffix}")) } else { n.clone() };
            out.relations.insert(
                nn,
                Relation {
                    signature: r.signature.iter().map(sort_ren).collect(),
                    tuples: r.tuples.iter().map(|t| t.iter().map(|e| ren[e].clone()).collect()).collect(),
                },
            );
        }
        out.fiber = self.fiber.as_ref().map(|f| FiberMap {
            s_sort: sort_ren(&f.s_sort),
            a_sort: f.a_sort.clone(),
            a_set: f.a_set.clone(),
            map: f.map.iter().map(|(s, a)| (ren[s].clone(), a.clone())).collect(),
        });
        (out, ren)
    }
}

pub fn validate_structure(m: &MultiSortedStructure) -> ValidationReport {
    let mut r = ValidationReport::default();
    let mut seen: HashMap<&Elem, &Name> = HashMap::new();
    let mut names: HashSet<&Name> = HashSet::new();
    for (s, es) in &m.sorts {
        if !names.insert(s) {
            r.push("duplicate sort", s.to_string());
        }
        for e in es {
            if let Some(t) = seen.insert(e, s) {
                r.push("duplicate element", format!("{e} in {t} and {s}"));
            }
        }
    }
    for b in &m.base_sorts {
        if m.sort(b).is_none() {
            r.push("unknown sort", format!("base sort {b}"));
        }
    }
    let sort_of = m.sort_of();
    for (n, rel) in &m.relations {
        for s in &rel.signature {
            if m.sort(s).is_none() {
                r.push("unknown sort", format!("{s} in signature of {n}"));
            }
        }
        for t in &rel.tuples {
            if t.len() != rel.signature.len() {
                r.push("arity", format!("tuple {t:?} of {n}"));
                continue;
            }
            for (e, s) in t.iter().zip(&rel.signature) {
                if sort_of.get(e) != Some(s) {
                    r.push("signature", format!("{e} in {n} is not of sort {s}"));
                }
            }
        }
    }
    if let Some(f) = &m.fiber {
        if !m.base_sorts.contains(&f.a_sort) {
            r.push("fiber", format!("A-sort {} is not a base sort", f.a_sort));
        }
        let Some(s) = m.sort(&f.s_sort) else {
            r.push("fiber", format!("unknown S-sort {}", f.s_sort));
            return r;
        };
        for e in s {
            match f.map.get(e) {
                Some(a) if f.a_set.contains(a) => {}
                _ => r.push("fiber", format!("{e} has no image in A")),
            }
        }
        if f.map.len() != s.len() {
            r.push("fiber", "map has keys outside the S-sort".to_string());
        }
        let img: BTreeSet<&Elem> = f.map.values().collect();
        for a in &f.a_set {
            if sort_of.get(a) != Some(&f.a_sort) {
                r.push("fiber", format!("{a} is not in sort {}", f.a_sort));
            }
            if !img.contains(a) {
                r.push("fiber", format!("fibre over {a} is empty"));
            }
        }
    }
    r
}

/// Search restrictions. Prescribed pairs map a source element to a target element.
#[derive(Clone, Debug, Default)]
pub struct Constraints {
    pub fix_sorts: BTreeSet<Name>,
    pub fix_elements: BTreeSet<Elem>,
    pub setwise: Vec<BTreeSet<Elem>>,
    pub prescribed: BTreeMap<Elem, Elem>,
    pub limit: Option<usize>,
}

impl Constraints {
    pub fn fix_base(m: &MultiSortedStructure) -> Self {
        Constraints { fix_sorts: m.base_sorts.clone(), ..Default::default() }
    }

    pub fn fixing_sorts<I: IntoIterator<Item = S>, S: Into<Name>>(sorts: I) -> Self {
        Constraints { fix_sorts: sorts.into_iter().map(Into::into).collect(), ..Default::default() }
    }
}

struct IRel {
    tuples: Vec<Vec<u32>>,
    set: HashSet<Box<[u32]>>,
    index: HashMap<(u8, u32), Vec<u32>>,
}

struct Indexed {
    names: Vec<Elem>,
    pos: HashMap<Elem, u32>,
    sort_of: Vec<u32>,
    sort_names: Vec<Name>,
    rels: Vec<IRel>,
    rel_names: Vec<Name>,
    occ: Vec<Vec<(u32, u32)>>,
}

fn index_structure(m: &MultiSortedStructure) -> Indexed {
    let mut names = Vec::new();
    let mut sort_of = Vec::new();
    let mut sort_names = Vec::new();
    for (si, (s, es)) in m.sorts.iter().enumerate() {
        sort_names.push(s.clone());
        for e in es {
            names.push(e.clone());
            sort_of.push(si as u32);
        }
    }
    let pos: HashMap<Elem, u32> = names.iter().enumerate().map(|(i, e)| (e.clone(), i as u32)).collect();
    let mut occ = vec![Vec::new(); names.len()];
    let mut rels = Vec::new();
    let mut rel_names = Vec::new();
    for (ri, (n, r)) in m.all_relations().into_iter().enumerate() {
        let mut tuples = Vec::new();
        let mut set = HashSet::new();
        let mut index: HashMap<(u8, u32), Vec<u32>> = HashMap::new();
        for t in &r.tuples {
            let Some(it): Option<Vec<u32>> = t.iter().map(|e| pos.get(e).copied()).collect() else { continue };
            let ti = tuples.len() as u32;
            for (p, &x) in it.iter().enumerate() {
                index.entry((p as u8, x)).or_default().push(ti);
                if !occ[x as usize].contains(&(ri as u32, ti)) {
                    occ[x as usize].push((ri as u32, ti));
                }
            }
            set.insert(it.clone().into_boxed_slice());
            tuples.push(it);
        }
        rels.push(IRel { tuples, set, index });
        rel_names.push(n);
    }
    Indexed { names, pos, sort_of, sort_names, rels, rel_names, occ }
}

fn h64<T: Hash>(x: &T) -> u64 {
    let mut h = DefaultHasher::new();
    x.hash(&mut h);
    h.finish()
}

/// Colour refinement run in lockstep on both structures so colours are comparable.
fn refine(a: &Indexed, ca: &mut [u64], b: &Indexed, cb: &mut [u64]) {
    let rel_key_a: Vec<u64> = a.rel_names.iter().map(h64).collect();
    let rel_key_b: Vec<u64> = b.rel_names.iter().map(h64).collect();
    let count = |c: &[u64]| c.iter().collect::<HashSet<_>>().len();
    let mut classes = (count(ca), count(cb));
    for _ in 0..64 {
        let step = |m: &Indexed, c: &[u64], keys: &[u64]| -> Vec<u64> {
            let mut out = Vec::with_capacity(c.len());
            for x in 0..m.names.len() {
                let mut sig: Vec<u64> = m.occ[x]
                    .iter()
                    .map(|&(r, t)| {
                        let tup = &m.rels[r as usize].tuples[t as usize];
                        let mut hh = DefaultHasher::new();
                        keys[r as usize].hash(&mut hh);
                        for (p, &y) in tup.iter().enumerate() {
                            (y as usize == x).hash(&mut hh);
                            c[y as usize].hash(&mut hh);
                            p.hash(&mut hh);
                        }
                        hh.finish()
                    })
                    .collect();
                sig.sort_unstable();
                out.push(h64(&(c[x], sig)));
            }
            out
        };
        let na = step(a, ca, &rel_key_a);
        let nb = step(b, cb, &rel_key_b);
        ca.copy_from_slice(&na);
        cb.copy_from_slice(&nb);
        let now = (count(ca), count(cb));
        if now == classes {
            break;
        }
        classes = now;
    }
}

enum Trail {
    Dom(u32, Vec<u32>),
    Assign(u32),
}

struct Solver<'a> {
    a: &'a Indexed,
    b: &'a Indexed,
    dom: Vec<Vec<u32>>,
    val: Vec<u32>,
    used: Vec<bool>,
    trail: Vec<Trail>,
    limit: usize,
    out: Vec<Vec<u32>>,
}

const UNSET: u32 = u32::MAX;

impl<'a> Solver<'a> {
    fn assign(&mut self, v: u32, x: u32, queue: &mut Vec<u32>) -> bool {
        if self.val[v as usize] != UNSET {
            return self.val[v as usize] == x;
        }
        if self.used[x as usize] {
            return false;
        }
        self.val[v as usize] = x;
        self.used[x as usize] = true;
        self.trail.push(Trail::Assign(v));
        queue.push(v);
        true
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().expect("len") {
                Trail::Dom(v, old) => self.dom[v as usize] = old,
                Trail::Assign(v) => {
                    let x = self.val[v as usize];
                    self.used[x as usize] = false;
                    self.val[v as usize] = UNSET;
                }
            }
        }
    }

    fn propagate(&mut self, mut queue: Vec<u32>) -> bool {
        while let Some(v) = queue.pop() {
            let occ = self.a.occ[v as usize].clone();
            for (r, t) in occ {
                let tup = &self.a.rels[r as usize].tuples[t as usize];
                let rb = &self.b.rels[r as usize];
                let mut unassigned: Vec<(usize, u32)> = Vec::new();
                let mut img: Vec<u32> = Vec::with_capacity(tup.len());
                for (p, &y) in tup.iter().enumerate() {
                    let x = self.val[y as usize];
                    img.push(x);
                    if x == UNSET {
                        unassigned.push((p, y));
                    }
                }
                if unassigned.is_empty() {
                    if !rb.set.contains(&img[..]) {
                        return false;
                    }
                    continue;
                }
                // supports: tuples of b agreeing on assigned positions
                let mut best: Option<&Vec<u32>> = None;
                for (p, &x) in img.iter().enumerate() {
                    if x == UNSET {
                        continue;
                    }
                    let list = match rb.index.get(&(p as u8, x)) {
                        Some(l) => l,
                        None => return false,
                    };
                    if best.map_or(true, |b| list.len() < b.len()) {
                        best = Some(list);
                    }
                }
                let best = best.expect("v is assigned");
                let mut allowed: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); unassigned.len()];
                'cand: for &ti in best {
                    let u = &rb.tuples[ti as usize];
                    for (p, &x) in img.iter().enumerate() {
                        if x != UNSET && u[p] != x {
                            continue 'cand;
                        }
                    }
                    for i in 0..unassigned.len() {
                        for j in i + 1..unassigned.len() {
                            if unassigned[i].1 == unassigned[j].1 && u[unassigned[i].0] != u[unassigned[j].0] {
                                continue 'cand;
                            }
                        }
                    }
                    for (i, &(p, _)) in unassigned.iter().enumerate() {
                        allowed[i].insert(u[p]);
                    }
                }
                for (i, &(_, w)) in unassigned.iter().enumerate() {
                    if self.val[w as usize] != UNSET {
                        if !allowed[i].contains(&self.val[w as usize]) {
                            return false;
                        }
                        continue;
                    }
                    let cur = &self.dom[w as usize];
                    let next: Vec<u32> =
                        cur.iter().copied().filter(|x| allowed[i].contains(x) && !self.used[*x as usize]).collect();
                    if next.is_empty() {
                        return false;
                    }
                    if next.len() < cur.len() {
                        let old = std::mem::replace(&mut self.dom[w as usize], next);
                        self.trail.push(Trail::Dom(w, old));
                    }
                    if self.dom[w as usize].len() == 1 {
                        let x = self.dom[w as usize][0];
                        if !self.assign(w, x, &mut queue) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn search(&mut self) {
        if self.out.len() >= self.limit {
            return;
        }
        let mut pick: Option<(usize, u32)> = None;
        for v in 0..self.val.len() {
            if self.val[v] != UNSET {
                continue;
            }
            let n = self.dom[v].len();
            if pick.map_or(true, |(m, _)| n < m) {
                pick = Some((n, v as u32));
                if n <= 1 {
                    break;
                }
            }
        }
        let Some((_, v)) = pick else {
            self.out.push(self.val.clone());
            return;
        };
        let cands = self.dom[v as usize].clone();
        for x in cands {
            if self.used[x as usize] {
                continue;
            }
            let mark = self.trail.len();
            let mut q = Vec::new();
            if self.assign(v, x, &mut q) && self.propagate(q) {
                self.search();
            }
            self.undo_to(mark);
            if self.out.len() >= self.limit {
                return;
            }
        }
    }
}

fn check_compatible(a: &Indexed, b: &Indexed) -> Result<()> {
    if a.sort_names != b.sort_names {
        return Err(pre("structures have different sorts"));
    }
    if a.rel_names != b.rel_names {
        return Err(pre("structures have different relations"));
    }
    Ok(())
}

/// Core search: all (or up to `limit`) isomorphisms a → b respecting the constraints.
fn solve(a: &Indexed, b: &Indexed, c: &Constraints, same: bool) -> Result<Vec<Vec<u32>>> {
    check_compatible(a, b)?;
    let mut ca: Vec<u64> = a.sort_of.iter().map(|s| h64(&("sort", *s))).collect();
    let mut cb: Vec<u64> = b.sort_of.iter().map(|s| h64(&("sort", *s))).collect();
    for (k, set) in c.setwise.iter().enumerate() {
        for (i, e) in a.names.iter().enumerate() {
            ca[i] = h64(&(ca[i], k, set.contains(e)));
        }
        for (i, e) in b.names.iter().enumerate() {
            cb[i] = h64(&(cb[i], k, set.contains(e)));
        }
    }
    let mut pins: Vec<(u32, u32)> = Vec::new();
    for (i, e) in a.names.iter().enumerate() {
        let s = &a.sort_names[a.sort_of[i] as usize];
        if c.fix_sorts.contains(s) || c.fix_elements.contains(e) {
            let j = *b.pos.get(e).ok_or_else(|| pre(format!("fixed element {e} missing from target")))?;
            pins.push((i as u32, j));
        }
    }
    for (x, y) in &c.prescribed {
        let i = *a.pos.get(x).ok_or_else(|| Error::UnknownId(x.to_string()))?;
        let j = *b.pos.get(y).ok_or_else(|| Error::UnknownId(y.to_string()))?;
        pins.push((i, j));
    }
    for (k, &(i, j)) in pins.iter().enumerate() {
        if a.sort_of[i as usize] != b.sort_of[j as usize] {
            return Ok(vec![]);
        }
        ca[i as usize] = h64(&("pin", k));
        cb[j as usize] = h64(&("pin", k));
    }
    refine(a, &mut ca, b, &mut cb);
    let mut by_colour: HashMap<u64, Vec<u32>> = HashMap::new();
    for (j, col) in cb.iter().enumerate() {
        by_colour.entry(*col).or_default().push(j as u32);
    }
    let mut dom = Vec::with_capacity(a.names.len());
    for col in &ca {
        match by_colour.get(col) {
            Some(v) => dom.push(v.clone()),
            None => return Ok(vec![]),
        }
    }
    if same {
        let mut ka: HashMap<u64, usize> = HashMap::new();
        for col in &ca {
            *ka.entry(*col).or_default() += 1;
        }
        if ka.iter().any(|(col, n)| by_colour.get(col).map(|v| v.len()) != Some(*n)) {
            return Ok(vec![]);
        }
    }
    let mut s = Solver {
        a,
        b,
        dom,
        val: vec![UNSET; a.names.len()],
        used: vec![false; b.names.len()],
        trail: Vec::new(),
        limit: c.limit.unwrap_or(usize::MAX),
        out: Vec::new(),
    };
    let mut q = Vec::new();
    for &(i, j) in &pins {
        if !s.assign(i, j, &mut q) {
            return Ok(vec![]);
        }
    }
    for v in 0..a.names.len() {
        if s.dom[v].len() == 1 && s.val[v] == UNSET {
            let x = s.dom[v][0];
            if !s.assign(v as u32, x, &mut q) {
                return Ok(vec![]);
            }
        }
    }
    if !s.propagate(q) {
        return Ok(vec![]);
    }
    s.search();
    Ok(s.out)
}

fn to_map(a: &Indexed, b: &Indexed, sol: &[u32]) -> FnMap {
    FnMap::from_pairs(sol.iter().enumerate().map(|(i, &j)| (a.names[i].clone(), b.names[j as usize].clone())))
        .expect("bijection")
}

/// An automorphism as one map on all elements (per-sort bijections glued).
pub type Automorphism = FnMap;

/// All automorphisms satisfying the constraints, sorted.
pub fn automorphism_group(m: &MultiSortedStructure, c: &Constraints) -> Result<Vec<Automorphism>> {
    for s in &c.fix_sorts {
        if m.sort(s).is_none() {
            return Err(Error::UnknownId(s.to_string()));
        }
    }
    let ix = index_structure(m);
    let sols = solve(&ix, &ix, c, true)?;
    let mut out: Vec<FnMap> = sols.iter().map(|s| to_map(&ix, &ix, s)).collect();
    out.sort();
    Ok(out)
}

/// Isomorphisms m1 → m2 (sorts and relations matched by name).
pub fn isomorphisms(m1: &MultiSortedStructure, m2: &MultiSortedStructure, c: &Constraints) -> Result<Vec<FnMap>> {
    let (a, b) = (index_structure(m1), index_structure(m2));
    let sols = solve(&a, &b, c, true)?;
    let mut out: Vec<FnMap> = sols.iter().map(|s| to_map(&a, &b, s)).collect();
    out.sort();
    Ok(out)
}

/// One automorphism extending `partial`, if any.
pub fn extend_automorphism(m: &MultiSortedStructure, partial: &FnMap, base: &Constraints) -> Result<Option<Automorphism>> {
    let mut c = base.clone();
    for (x, y) in partial.pairs() {
        c.prescribed.insert(x.clone(), y.clone());
    }
    c.limit = Some(1);
    Ok(automorphism_group(m, &c)?.into_iter().next())
}

/// Strong generating set from a point-stabiliser chain, with the group order.
#[derive(Clone, Debug)]
pub struct AutChain {
    pub base_points: Vec<Elem>,
    pub orbit_sizes: Vec<usize>,
    pub generators: Vec<Automorphism>,
    pub order: BigUint,
}

pub fn automorphism_chain(m: &MultiSortedStructure, c: &Constraints) -> Result<AutChain> {
    let ix = index_structure(m);
    let mut fixed: BTreeSet<Elem> = c.fix_elements.clone();
    let mut base_points = Vec::new();
    let mut orbit_sizes = Vec::new();
    let mut generators = Vec::new();
    loop {
        let cc = Constraints { fix_elements: fixed.clone(), limit: None, ..c.clone() };
        // domains after refinement; the first non-singleton one gives the next base point
        let doms = refined_domains(&ix, &cc)?;
        let Some(doms) = doms else { break };
        let Some(b) = (0..ix.names.len()).find(|&v| doms[v].len() > 1) else { break };
        let bname = ix.names[b].clone();
        let mut orbit = 1usize;
        for &y in &doms[b] {
            if y as usize == b {
                continue;
            }
            let mut probe = cc.clone();
            probe.prescribed.insert(bname.clone(), ix.names[y as usize].clone());
            probe.limit = Some(1);
            let sols = solve(&ix, &ix, &probe, true)?;
            if let Some(s) = sols.first() {
                generators.push(to_map(&ix, &ix, s));
                orbit += 1;
            }
        }
        base_points.push(bname.clone());
        orbit_sizes.push(orbit);
        fixed.insert(bname);
    }
    let order = orbit_sizes.iter().fold(BigUint::from(1u32), |acc, &k| acc * BigUint::from(k));
    Ok(AutChain { base_points, orbit_sizes, generators, order })
}

fn refined_domains(ix: &Indexed, c: &Constraints) -> Result<Option<Vec<Vec<u32>>>> {
    let mut ca: Vec<u64> = ix.sort_of.iter().map(|s| h64(&("sort", *s))).collect();
    for (k, set) in c.setwise.iter().enumerate() {
        for (i, e) in ix.names.iter().enumerate() {
            ca[i] = h64(&(ca[i], k, set.contains(e)));
        }
    }
    let mut k = 0usize;
    for (i, e) in ix.names.iter().enumerate() {
        let s = &ix.sort_names[ix.sort_of[i] as usize];
        if c.fix_sorts.contains(s) || c.fix_elements.contains(e) {
            ca[i] = h64(&("pin", k));
            k += 1;
        }
    }
    let mut cb = ca.clone();
    refine(ix, &mut ca, ix, &mut cb);
    let mut by_colour: HashMap<u64, Vec<u32>> = HashMap::new();
    for (j, col) in ca.iter().enumerate() {
        by_colour.entry(*col).or_default().push(j as u32);
    }
    Ok(Some(ca.iter().map(|col| by_colour[col].clone()).collect()))
}

/// Orbits of the group generated by `gens` on tuples of distinct elements of `pool`,
/// lengths 1..=arity. Each orbit is returned sorted, orbits ordered by their least tuple.
pub fn tuple_orbits(pool: &[Elem], gens: &[FnMap], arity: usize) -> Vec<Vec<Vec<Elem>>> {
    let mut out = Vec::new();
    for k in 1..=arity.min(pool.len()) {
        let mut tuples: Vec<Vec<Elem>> = Vec::new();
        let mut cur = Vec::new();
        fn rec(pool: &[Elem], k: usize, cur: &mut Vec<Elem>, out: &mut Vec<Vec<Elem>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for e in pool {
                if !cur.contains(e) {
                    cur.push(e.clone());
                    rec(pool, k, cur, out);
                    cur.pop();
                }
            }
        }
        rec(pool, k, &mut cur, &mut tuples);
        tuples.sort();
        let idx: HashMap<&Vec<Elem>, usize> = tuples.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let mut parent: Vec<usize> = (0..tuples.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let n = p[y];
                p[y] = r;
                y = n;
            }
            r
        }
        for (i, t) in tuples.iter().enumerate() {
            for g in gens {
                let img: Option<Vec<Elem>> = t.iter().map(|e| g.get(e).cloned()).collect();
                if let Some(j) = img.as_ref().and_then(|u| idx.get(u)) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, *j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut classes: BTreeMap<usize, Vec<Vec<Elem>>> = BTreeMap::new();
        for i in 0..tuples.len() {
            let r = find(&mut parent, i);
            classes.entry(r).or_default().push(tuples[i].clone());
        }
        out.extend(classes.into_values());
    }
    out
}

/// What to keep when restricting a structure.
#[derive(Clone, Debug, Default)]
pub struct RestrictSpec {
    pub sorts: Vec<Name>,
    /// Keep only these elements of non-base sorts (all if None).
    pub elements: Option<BTreeSet<Elem>>,
    pub params: Vec<Elem>,
    pub orbit_arity: usize,
}

/// Induced structure on the kept elements, with fibre predicates for A-parameters and
/// the orbit relations of Aut(M / params) up to the arity bound.
pub fn restrict_structure(m: &MultiSortedStructure, spec: &RestrictSpec) -> Result<MultiSortedStructure> {
    let sort_of = m.sort_of();
    for p in &spec.params {
        if !sort_of.contains_key(p) {
            return Err(Error::UnknownId(p.to_string()));
        }
    }
    for b in &m.base_sorts {
        if !spec.sorts.contains(b) {
            return Err(pre(format!("restriction must keep base sort {b}")));
        }
    }
    let mut out = MultiSortedStructure { base_sorts: m.base_sorts.clone(), ..Default::default() };
    let mut kept: BTreeSet<Elem> = BTreeSet::new();
    for (s, es) in &m.sorts {
        if !spec.sorts.contains(s) {
            continue;
        }
        let keep: Vec<Elem> = es
            .iter()
            .filter(|e| m.base_sorts.contains(s) || spec.elements.as_ref().map_or(true, |k| k.contains(*e)))
            .cloned()
            .collect();
        kept.extend(keep.iter().cloned());
        out.sorts.push((s.clone(), keep));
    }
    for (n, r) in &m.relations {
        if !r.signature.iter().all(|s| spec.sorts.contains(s)) {
            continue;
        }
        let tuples: BTreeSet<Vec<Elem>> = r.tuples.iter().filter(|t| t.iter().all(|e| kept.contains(e))).cloned().collect();
        out.relations.insert(n.clone(), Relation { signature: r.signature.clone(), tuples });
    }
    if let Some(f) = &m.fiber {
        if spec.sorts.contains(&f.s_sort) {
            let map: BTreeMap<Elem, Elem> =
                f.map.iter().filter(|(s, _)| kept.contains(*s)).map(|(s, a)| (s.clone(), a.clone())).collect();
            let img: BTreeSet<Elem> = map.values().cloned().collect();
            let a_set: Vec<Elem> = f.a_set.iter().filter(|a| img.contains(*a)).cloned().collect();
            for p in &spec.params {
                if f.a_set.contains(p) {
                    let tuples = map.iter().filter(|(_, a)| *a == p).map(|(s, _)| vec![s.clone()]).collect();
                    out.relations.insert(
                        Name::from(format!("fiber:{p}")),
                        Relation { signature: vec![f.s_sort.clone()], tuples },
                    );
                }
            }
            out.fiber = Some(FiberMap { s_sort: f.s_sort.clone(), a_sort: f.a_sort.clone(), a_set, map });
        }
    }
    if spec.orbit_arity > 0 {
        let c = Constraints { fix_elements: spec.params.iter().cloned().collect(), ..Default::default() };
        let chain = automorphism_chain(m, &c)?;
        let pool: Vec<Elem> = out.elements().cloned().collect();
        for (i, orbit) in tuple_orbits(&pool, &chain.generators, spec.orbit_arity).into_iter().enumerate() {
            let signature = orbit[0].iter().map(|e| sort_of[e].clone()).collect();
            out.relations.insert(
                Name::from(format!("orbit{}:{i}", orbit[0].len())),
                Relation { signature, tuples: orbit.into_iter().collect() },
            );
        }
    }
    Ok(out)
}

/// Result of a lifting check. In generator mode only a generating set of Aut(sub) is lifted,
/// which suffices because lifts of generators generate lifts of the whole group.
#[derive(Clone, Debug)]
pub struct EmbeddingReport {
    pub embedded: bool,
    pub witness: Option<Automorphism>,
    pub checked: usize,
    pub generator_mode: bool,
    pub sub_order: BigUint,
}

pub const FULL_LIFT_LIMIT: u64 = 2000;

/// Every automorphism of `sub` extends to `m`.
pub fn check_stable_embedding(m: &MultiSortedStructure, sub: &MultiSortedStructure) -> Result<EmbeddingReport> {
    check_stable_embedding_with(m, sub, &Constraints::default(), &Constraints::default())
}

/// As [`check_stable_embedding`], with constraints on Aut(sub) and on the lifts.
pub fn check_stable_embedding_with(
    m: &MultiSortedStructure,
    sub: &MultiSortedStructure,
    sub_constraints: &Constraints,
    lift_constraints: &Constraints,
) -> Result<EmbeddingReport> {
    let ms = m.sort_of();
    for (s, es) in &sub.sorts {
        for e in es {
            if ms.get(e) != Some(s) {
                return Err(pre(format!("{e} is not an element of sort {s} of the ambient structure")));
            }
        }
    }
    let chain = automorphism_chain(sub, sub_constraints)?;
    let small = chain.order <= BigUint::from(FULL_LIFT_LIMIT);
    let candidates = if small { automorphism_group(sub, sub_constraints)? } else { chain.generators.clone() };
    let mut checked = 0;
    for g in &candidates {
        checked += 1;
        if g.is_identity() {
            continue;
        }
        if extend_automorphism(m, g, lift_constraints)?.is_none() {
            return Ok(EmbeddingReport {
                embedded: false,
                witness: Some(g.clone()),
                checked,
                generator_mode: !small,
                sub_order: chain.order,
            });
        }
    }
    Ok(EmbeddingReport { embedded: true, witness: None, checked, generator_mode: !small, sub_order: chain.order })
}

/// Both code paths of the local-to-global criterion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalGlobalReport {
    pub global: bool,
    pub local: bool,
    pub failing_subset: Option<Vec<Elem>>,
}

/// τ ∪ id_base is an automorphism, compared with: every restriction of τ to S_c̄ is an
/// automorphism of the structure restricted to base ∪ S_c̄ with parameters c̄.
pub fn local_global_check(m: &MultiSortedStructure, tau: &FnMap, orbit_arity: usize) -> Result<LocalGlobalReport> {
    let f = m.fiber.as_ref().ok_or_else(|| pre("structure has no fibre map"))?;
    let s = m.sort(&f.s_sort).ok_or_else(|| Error::UnknownId(f.s_sort.to_string()))?;
    for x in s {
        let y = tau.get(x).ok_or_else(|| pre(format!("τ undefined at {x}")))?;
        if f.map.get(x) != f.map.get(y) {
            return Err(pre(format!("τ moves {x} to another fibre")));
        }
    }
    if !tau.is_injective() || tau.len() != s.len() {
        return Err(pre("τ is not a permutation of S"));
    }
    let base = m.base_elements();
    let full = tau.union(&FnMap::identity(&base)).ok_or_else(|| pre("τ overlaps the base"))?;
    let global = if m.size() == full.len() {
        preserves_relations(m, &full)
    } else {
        extend_automorphism(m, &full, &Constraints::default())?.is_some()
    };
    let mut local = true;
    let mut failing = None;
    let a = f.a_set.clone();
    let n = a.len();
    let mut sort_names: Vec<Name> = m.base_sorts.iter().cloned().collect();
    sort_names.push(f.s_sort.clone());
    for mask in 1u64..(1u64 << n) {
        let c: Vec<Elem> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| a[i].clone()).collect();
        let sc: BTreeSet<Elem> = f.fiber_over(&c).into_iter().collect();
        let spec = RestrictSpec { sorts: sort_names.clone(), elements: Some(sc.clone()), params: c.clone(), orbit_arity };
        let r = restrict_structure(m, &spec)?;
        let local_map = tau.restrict(sc.iter()).expect("τ total").union(&FnMap::identity(&base)).expect("disjoint");
        if !preserves_relations(&r, &local_map) {
            local = false;
            failing = Some(c);
            break;
        }
    }
    Ok(LocalGlobalReport { global, local, failing_subset: failing })
}

/// Direct relation scan: g is a bijection of all elements mapping each relation onto itself.
pub fn preserves_relations(m: &MultiSortedStructure, g: &FnMap) -> bool {
    if g.len() != m.size() || !g.is_injective() {
        return false;
    }
    for (_, r) in m.all_relations() {
        for t in &r.tuples {
            let img: Option<Vec<Elem>> = t.iter().map(|e| g.get(e).cloned()).collect();
            match img {
                Some(u) if r.tuples.contains(&u) => {}
                _ => return false,
            }
        }
    }
    true
}

/// Per-sort view of an automorphism.
pub fn per_sort(m: &MultiSortedStructure, g: &FnMap) -> BTreeMap<Name, FnMap> {
    m.sorts
        .iter()
        .map(|(s, es)| (s.clone(), g.restrict(es.iter()).unwrap_or_default()))
        .collect()
}

/// Substructure on `keep`: sorts shrink, tuples touching dropped elements are dropped.
pub fn induced(m: &MultiSortedStructure, keep: &BTreeSet<Elem>) -> MultiSortedStructure {
    let mut out = MultiSortedStructure { base_sorts: m.base_sorts.clone(), ..Default::default() };
    for (s, es) in &m.sorts {
        out.sorts.push((s.clone(), es.iter().filter(|e| keep.contains(*e)).cloned().collect()));
    }
    for (n, r) in &m.relations {
        out.relations.insert(
            n.clone(),
            Relation {
                signature: r.signature.clone(),
                tuples: r.tuples.iter().filter(|t| t.iter().all(|e| keep.contains(e))).cloned().collect(),
            },
        );
    }
    out.fiber = m.fiber.as_ref().map(|f| {
        let map: BTreeMap<Elem, Elem> = f.map.iter().filter(|(s, _)| keep.contains(*s)).map(|(a, b)| (a.clone(), b.clone())).collect();
        let img: BTreeSet<&Elem> = map.values().collect();
        FiberMap {
            s_sort: f.s_sort.clone(),
            a_sort: f.a_sort.clone(),
            a_set: f.a_set.iter().filter(|a| img.contains(a)).cloned().collect(),
            map,
        }
    });
    out
}

/// Drops the listed sorts and every relation that mentions one of them.
pub fn drop_sorts(m: &MultiSortedStructure, sorts: &BTreeSet<Name>) -> MultiSortedStructure {
    let mut out = m.clone();
    out.sorts.retain(|(s, _)| !sorts.contains(s));
    out.relations.retain(|_, r| r.signature.iter().all(|s| !sorts.contains(s)));
    if out.fiber.as_ref().map_or(false, |f| sorts.contains(&f.s_sort) || sorts.contains(&f.a_sort)) {
        out.fiber = None;
    }
    out.base_sorts.retain(|s| !sorts.contains(s));
    out
}

/// Renames a sort (elements unchanged) in the sort list, signatures and fibre map.
pub fn rename_sort(m: &MultiSortedStructure, from: &str, to: &str) -> MultiSortedStructure {
    let ren = |s: &Name| if s.as_str() == from { Name::from(to) } else { s.clone() };
    let mut out = MultiSortedStructure::default();
    for (s, es) in &m.sorts {
        out.add_sort(&ren(s), es.clone());
    }
    out.relations = m
        .relations
        .iter()
        .map(|(n, r)| (n.clone(), Relation { signature: r.signature.iter().map(ren).collect(), tuples: r.tuples.clone() }))
        .collect();
    out.base_sorts = m.base_sorts.iter().map(ren).collect();
    out.fiber = m.fiber.as_ref().map(|f| FiberMap { s_sort: ren(&f.s_sort), a_sort: ren(&f.a_sort), ..f.clone() });
    out
}
