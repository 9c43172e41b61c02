//! Concrete finite groupoids and morphism sets between them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::{pre, Error, Result};
use crate::map::{Arrow, ArrowSet, FnMap};
use crate::name::{label_string, CompId, Elem, Label, Name, ObjId};
use crate::report::ValidationReport;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteGroupoid {
    objects: BTreeMap<ObjId, Vec<Elem>>,
    component_of: BTreeMap<ObjId, CompId>,
    component_label: BTreeMap<CompId, Label>,
    morphisms: ArrowSet,
    owner: HashMap<Elem, ObjId>,
    by_label: BTreeMap<Label, CompId>,
}

impl ConcreteGroupoid {
    /// Assembles a groupoid. Only dangling references are errors; use
    /// [`validate_groupoid`] for the algebraic invariants.
    pub fn from_parts(
        objects: BTreeMap<ObjId, Vec<Elem>>,
        component_of: BTreeMap<ObjId, CompId>,
        component_label: BTreeMap<CompId, Label>,
        morphisms: Vec<Arrow>,
    ) -> Result<Self> {
        let mut objects = objects;
        for elems in objects.values_mut() {
            elems.sort();
            elems.dedup();
        }
        for o in objects.keys() {
            let c = component_of
                .get(o)
                .ok_or_else(|| Error::UnknownId(format!("component of object {o}")))?;
            if !component_label.contains_key(c) {
                return Err(Error::UnknownId(format!("component {c}")));
            }
        }
        for o in component_of.keys() {
            if !objects.contains_key(o) {
                return Err(Error::UnknownId(o.to_string()));
            }
        }
        for a in &morphisms {
            for o in [&a.source, &a.target] {
                if !objects.contains_key(o) {
                    return Err(Error::UnknownId(o.to_string()));
                }
            }
        }
        let mut owner = HashMap::new();
        for (o, es) in &objects {
            for e in es {
                owner.entry(e.clone()).or_insert_with(|| o.clone());
            }
        }
        let mut by_label = BTreeMap::new();
        for (c, l) in &component_label {
            by_label.entry(l.clone()).or_insert_with(|| c.clone());
        }
        Ok(ConcreteGroupoid {
            objects,
            component_of,
            component_label,
            morphisms: ArrowSet::new(morphisms),
            owner,
            by_label,
        })
    }

    /// Closes `generators` under identities, inverses and composition.
    pub fn generated(
        objects: BTreeMap<ObjId, Vec<Elem>>,
        component_of: BTreeMap<ObjId, CompId>,
        component_label: BTreeMap<CompId, Label>,
        generators: Vec<Arrow>,
    ) -> Result<Self> {
        let mut all: BTreeSet<Arrow> = BTreeSet::new();
        for (o, es) in &objects {
            all.insert(Arrow::new(o.clone(), o.clone(), FnMap::identity(es)));
        }
        for g in generators {
            let inv = g
                .inverse()
                .ok_or_else(|| pre(format!("generator {}->{} is not injective", g.source, g.target)))?;
            all.insert(g);
            all.insert(inv);
        }
        let mut queue: Vec<Arrow> = all.iter().cloned().collect();
        while let Some(x) = queue.pop() {
            let snapshot: Vec<Arrow> = all.iter().cloned().collect();
            for y in &snapshot {
                for z in [y.after(&x), x.after(y)].into_iter().flatten() {
                    if all.insert(z.clone()) {
                        queue.push(z);
                    }
                }
            }
        }
        ConcreteGroupoid::from_parts(objects, component_of, component_label, all.into_iter().collect())
    }

    pub fn objects(&self) -> &BTreeMap<ObjId, Vec<Elem>> {
        &self.objects
    }

    pub fn object_ids(&self) -> impl Iterator<Item = &ObjId> {
        self.objects.keys()
    }

    pub fn elements(&self, o: &str) -> Result<&[Elem]> {
        self.objects
            .get(o)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownId(o.to_string()))
    }

    pub fn has_object(&self, o: &str) -> bool {
        self.objects.contains_key(o)
    }

    pub fn component_of(&self, o: &str) -> Result<&CompId> {
        self.component_of.get(o).ok_or_else(|| Error::UnknownId(o.to_string()))
    }

    pub fn component_map(&self) -> &BTreeMap<ObjId, CompId> {
        &self.component_of
    }

    pub fn components(&self) -> &BTreeMap<CompId, Label> {
        &self.component_label
    }

    pub fn label(&self, c: &str) -> Result<&Label> {
        self.component_label.get(c).ok_or_else(|| Error::UnknownId(c.to_string()))
    }

    pub fn component_with_label(&self, l: &[Name]) -> Option<&CompId> {
        self.by_label.get(l)
    }

    pub fn objects_in(&self, c: &str) -> Vec<ObjId> {
        self.component_of
            .iter()
            .filter(|(_, k)| k.as_str() == c)
            .map(|(o, _)| o.clone())
            .collect()
    }

    pub fn objects_over(&self, l: &[Name]) -> Vec<ObjId> {
        match self.by_label.get(l) {
            Some(c) => self.objects_in(c),
            None => Vec::new(),
        }
    }

    pub fn owner_of(&self, e: &str) -> Option<&ObjId> {
        self.owner.get(e)
    }

    pub fn morphisms(&self) -> &ArrowSet {
        &self.morphisms
    }

    /// Morphism ids are positions in the canonical (source, target, graph) order.
    pub fn morphism(&self, id: usize) -> Option<&Arrow> {
        self.morphisms.get(id)
    }

    pub fn hom(&self, o1: &str, o2: &str) -> Result<&[Arrow]> {
        self.elements(o1)?;
        self.elements(o2)?;
        Ok(self.morphisms.between(o1, o2))
    }

    pub fn hom_set(&self, o1: &str, o2: &str) -> Result<Vec<usize>> {
        self.elements(o1)?;
        self.elements(o2)?;
        Ok(self.morphisms.between_ids(o1, o2).collect())
    }

    pub fn hom_maps(&self, o1: &str, o2: &str) -> Result<Vec<FnMap>> {
        Ok(self.hom(o1, o2)?.iter().map(|a| a.map.clone()).collect())
    }

    pub fn identity(&self, o: &str) -> Result<Arrow> {
        let es = self.elements(o)?;
        Ok(Arrow::new(o, o, FnMap::identity(es)))
    }

    /// Hom(O,O), checked to be a group.
    pub fn aut_group(&self, o: &str) -> Result<Vec<FnMap>> {
        let g = self.hom_maps(o, o)?;
        let set: BTreeSet<&FnMap> = g.iter().collect();
        let id = FnMap::identity(self.elements(o)?);
        if !set.contains(&id) {
            return Err(Error::Invariant(format!("Aut({o}) lacks the identity")));
        }
        for x in &g {
            let inv = x.inverse().ok_or_else(|| Error::Invariant(format!("Aut({o}) has a non-bijection")))?;
            if !set.contains(&inv) {
                return Err(Error::Invariant(format!("Aut({o}) not closed under inverse")));
            }
            for y in &g {
                match x.after(y) {
                    Some(z) if set.contains(&z) => {}
                    _ => return Err(Error::Invariant(format!("Aut({o}) not closed under composition"))),
                }
            }
        }
        Ok(g)
    }

    /// Every component has exactly one object.
    pub fn is_canonical(&self) -> bool {
        let mut count: BTreeMap<&CompId, usize> = BTreeMap::new();
        for c in self.component_of.values() {
            *count.entry(c).or_default() += 1;
        }
        self.component_label.keys().all(|c| count.get(c) == Some(&1))
    }

    pub fn is_finitely_faithful(&self) -> FaithfulnessReport {
        let mut witnesses = BTreeMap::new();
        let mut ok = true;
        for o in self.objects.keys() {
            match self.aut_group(o) {
                Ok(g) => {
                    let es = &self.objects[o];
                    witnesses.insert(o.clone(), minimal_base(es, &g));
                }
                Err(_) => ok = false,
            }
        }
        FaithfulnessReport { faithful: ok, witnesses }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaithfulnessReport {
    pub faithful: bool,
    /// Per object, the lex-least shortest tuple with trivial pointwise stabiliser.
    pub witnesses: BTreeMap<ObjId, Vec<Elem>>,
}

fn minimal_base(es: &[Elem], group: &[FnMap]) -> Vec<Elem> {
    fn search(es: &[Elem], group: &[FnMap], k: usize, from: usize, chosen: &mut Vec<usize>) -> bool {
        if chosen.len() == k {
            let fixing = group
                .iter()
                .filter(|g| chosen.iter().all(|&i| g.get(&es[i]) == Some(&es[i])))
                .count();
            return fixing == 1;
        }
        for i in from..es.len() {
            chosen.push(i);
            if search(es, group, k, i + 1, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    for k in 0..=es.len() {
        let mut chosen = Vec::new();
        if search(es, group, k, 0, &mut chosen) {
            return chosen.iter().map(|&i| es[i].clone()).collect();
        }
    }
    es.to_vec()
}

pub fn validate_groupoid(g: &ConcreteGroupoid) -> ValidationReport {
    let mut r = ValidationReport::default();
    let mut seen: BTreeMap<&Elem, &ObjId> = BTreeMap::new();
    for (o, es) in &g.objects {
        for e in es {
            if let Some(p) = seen.insert(e, o) {
                r.push("disjointness", format!("element {e} in objects {p} and {o}"));
            }
        }
    }
    for a in g.morphisms.iter() {
        let src = &g.objects[&a.source];
        let tgt = &g.objects[&a.target];
        let dom: Vec<&Elem> = a.map.domain().collect();
        if dom.len() != src.len() || dom.iter().zip(src).any(|(x, y)| *x != y) {
            r.push("domain", format!("morphism {}->{} {:?} has wrong domain", a.source, a.target, a.map));
            continue;
        }
        let img = a.map.image();
        if img.len() != tgt.len() || img.iter().zip(tgt).any(|(x, y)| x != y) {
            r.push("bijection", format!("morphism {}->{} {:?} is not a bijection onto target", a.source, a.target, a.map));
        }
        if g.component_of[&a.source] != g.component_of[&a.target] {
            r.push("cross-component", format!("morphism {}->{} joins different components", a.source, a.target));
        }
    }
    for o in g.objects.keys() {
        let id = g.identity(o).expect("object exists");
        if !g.morphisms.contains(&id) {
            r.push("identity missing", format!("object {o}"));
        }
    }
    for a in g.morphisms.iter() {
        if let Some(inv) = a.inverse() {
            if !g.morphisms.contains(&inv) {
                r.push("inverse missing", format!("inverse of {}->{} {:?}", a.source, a.target, a.map));
            }
        }
    }
    for a in g.morphisms.iter() {
        for b in g.morphisms.from_source(&a.target) {
            if let Some(c) = b.after(a) {
                if !g.morphisms.contains(&c) {
                    r.push(
                        "composition missing",
                        format!("{:?} after {:?} ({}->{}->{})", b.map, a.map, a.source, a.target, b.target),
                    );
                }
            }
        }
    }
    for (c, _) in &g.component_label {
        let objs = g.objects_in(c);
        for x in &objs {
            for y in &objs {
                if g.morphisms.between(x, y).is_empty() {
                    r.push("disconnected", format!("no morphism {x}->{y} in component {c}"));
                }
            }
        }
    }
    r
}

/// A family of maps between objects of two groupoids, with the component relation it claims.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupoidMorphismSet {
    pub source: Arc<ConcreteGroupoid>,
    pub target: Arc<ConcreteGroupoid>,
    pub maps: ArrowSet,
    pub relation: BTreeSet<(CompId, CompId)>,
}

/// Failure witness for condition (A).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionACounterexample {
    pub h_p: Arrow,
    pub h_m: Arrow,
    /// A function in exactly one of the two compared sets.
    pub difference: FnMap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionBReport {
    pub b_prime: bool,
    pub b: bool,
    /// A composite that should be in the set but is not.
    pub missing: Option<Arrow>,
}

impl GroupoidMorphismSet {
    pub fn new(
        source: Arc<ConcreteGroupoid>,
        target: Arc<ConcreteGroupoid>,
        maps: ArrowSet,
        relation: BTreeSet<(CompId, CompId)>,
    ) -> Result<Self> {
        if maps.is_empty() {
            return Err(pre("morphism set is empty"));
        }
        for a in maps.iter() {
            let dom = source.elements(&a.source)?;
            let cod = target.elements(&a.target)?;
            let d: Vec<&Elem> = a.map.domain().collect();
            if d.len() != dom.len() || d.iter().zip(dom).any(|(x, y)| *x != y) {
                return Err(pre(format!("map {}->{} has the wrong domain", a.source, a.target)));
            }
            let cod: BTreeSet<&Elem> = cod.iter().collect();
            if a.map.pairs().iter().any(|(_, y)| !cod.contains(y)) {
                return Err(pre(format!("map {}->{} leaves its codomain", a.source, a.target)));
            }
        }
        for (c1, c2) in &relation {
            source.label(c1)?;
            target.label(c2)?;
        }
        Ok(GroupoidMorphismSet { source, target, maps, relation })
    }

    /// Relation pairs actually realised by maps.
    pub fn realised_relation(&self) -> BTreeSet<(CompId, CompId)> {
        self.maps
            .pairs()
            .into_iter()
            .map(|(s, t)| (self.source.component_of[&s].clone(), self.target.component_of[&t].clone()))
            .collect()
    }

    /// All maps of the source groupoid, viewed as a morphism to itself.
    pub fn identity(g: Arc<ConcreteGroupoid>) -> Self {
        let relation = g.components().keys().map(|c| (c.clone(), c.clone())).collect();
        GroupoidMorphismSet { source: g.clone(), target: g.clone(), maps: g.morphisms().clone(), relation }
    }

    pub fn all_injective(&self) -> bool {
        self.maps.iter().all(|a| a.map.is_injective())
    }

    pub fn all_bijective(&self) -> bool {
        self.maps.iter().all(|a| {
            a.map.is_injective() && self.target.elements(&a.target).map(|t| t.len()) == Ok(a.map.len())
        })
    }

    /// Composite `other ∘ self` as a set of maps.
    pub fn then(&self, other: &GroupoidMorphismSet) -> Result<GroupoidMorphismSet> {
        let mut out = Vec::new();
        for a in self.maps.iter() {
            for b in other.maps.from_source(&a.target) {
                out.push(b.after(a).expect("targets match"));
            }
        }
        let maps = ArrowSet::new(out);
        let mut rel = BTreeSet::new();
        for (x, y) in &self.relation {
            for (y2, z) in &other.relation {
                if y == y2 {
                    rel.insert((x.clone(), z.clone()));
                }
            }
        }
        if maps.is_empty() {
            return Err(pre("composite morphism set is empty"));
        }
        Ok(GroupoidMorphismSet { source: self.source.clone(), target: other.target.clone(), maps, relation: rel })
    }
}

fn sorted_maps(it: impl Iterator<Item = FnMap>) -> Vec<FnMap> {
    let mut v: Vec<FnMap> = it.collect();
    v.sort();
    v.dedup();
    v
}

fn first_difference(a: &[FnMap], b: &[FnMap]) -> Option<FnMap> {
    let sa: BTreeSet<&FnMap> = a.iter().collect();
    let sb: BTreeSet<&FnMap> = b.iter().collect();
    sa.symmetric_difference(&sb).next().map(|m| (*m).clone())
}

/// Condition (A), compared within each pair of (source, target) components.
/// Pairs of maps landing in different components are not compared; see the crate README.
pub fn check_condition_a(h: &GroupoidMorphismSet) -> std::result::Result<(), ConditionACounterexample> {
    let mut groups: BTreeMap<(CompId, CompId), Vec<&Arrow>> = BTreeMap::new();
    for a in h.maps.iter() {
        let k = (h.source.component_of[&a.source].clone(), h.target.component_of[&a.target].clone());
        groups.entry(k).or_default().push(a);
    }
    for arrows in groups.values() {
        for hp in arrows {
            for hm in arrows {
                let lhs = sorted_maps(
                    h.source
                        .morphisms()
                        .between(&hm.source, &hp.source)
                        .iter()
                        .filter_map(|g| hp.map.after(&g.map)),
                );
                let rhs = sorted_maps(
                    h.target
                        .morphisms()
                        .between(&hm.target, &hp.target)
                        .iter()
                        .filter_map(|k| k.map.after(&hm.map)),
                );
                if lhs != rhs {
                    return Err(ConditionACounterexample {
                        h_p: (*hp).clone(),
                        h_m: (*hm).clone(),
                        difference: first_difference(&lhs, &rhs).expect("sets differ"),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Closure under pre- and postcomposition (B'), and under postcomposition only (B).
pub fn check_condition_bprime(h: &GroupoidMorphismSet) -> ConditionBReport {
    let mut missing_post = None;
    let mut missing_pre = None;
    'outer: for a in h.maps.iter() {
        for k in h.target.morphisms().from_source(&a.target) {
            let c = k.after(a).expect("composable");
            if !h.maps.contains(&c) {
                missing_post = Some(c);
                break 'outer;
            }
        }
    }
    'outer2: for a in h.maps.iter() {
        for g in h.source.morphisms().iter().filter(|g| g.target == a.source) {
            let c = a.after(g).expect("composable");
            if !h.maps.contains(&c) {
                missing_pre = Some(c);
                break 'outer2;
            }
        }
    }
    let b = missing_post.is_none();
    ConditionBReport { b_prime: b && missing_pre.is_none(), b, missing: missing_post.or(missing_pre) }
}

/// Maps exist from component a to component b exactly when (a,b) ∈ R.
pub fn check_relation_compatibility(h: &GroupoidMorphismSet, r: &BTreeSet<(CompId, CompId)>) -> bool {
    !h.maps.is_empty() && &h.realised_relation() == r
}

/// The equality relation on labels: pairs of components with equal labels.
pub fn label_equality_relation(g1: &ConcreteGroupoid, g2: &ConcreteGroupoid) -> BTreeSet<(CompId, CompId)> {
    let mut r = BTreeSet::new();
    for (c1, l1) in g1.components() {
        if let Some(c2) = g2.component_with_label(l1) {
            r.insert((c1.clone(), c2.clone()));
        }
    }
    r
}

/// Glues source and target along a bijective morphism satisfying (A) and (B').
pub fn glue_isomorphism(h: &GroupoidMorphismSet) -> Result<ConcreteGroupoid> {
    if !h.all_bijective() {
        return Err(pre("glue_isomorphism needs bijective maps"));
    }
    if let Err(cx) = check_condition_a(h) {
        return Err(pre(format!("condition (A) fails at {}->{} / {}->{}", cx.h_p.source, cx.h_p.target, cx.h_m.source, cx.h_m.target)));
    }
    if !check_condition_bprime(h).b_prime {
        return Err(pre("condition (B') fails"));
    }
    let (g1, g2) = (&*h.source, &*h.target);
    let mut objects = g1.objects.clone();
    for (o, es) in &g2.objects {
        if objects.insert(o.clone(), es.clone()).is_some() {
            return Err(pre(format!("object id {o} occurs on both sides")));
        }
    }
    // union-find over (side, component)
    let keys: Vec<(u8, CompId)> = g1
        .component_label
        .keys()
        .map(|c| (1u8, c.clone()))
        .chain(g2.component_label.keys().map(|c| (2u8, c.clone())))
        .collect();
    let index: BTreeMap<(u8, CompId), usize> = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let mut parent: Vec<usize> = (0..keys.len()).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for a in h.maps.iter() {
        let x = index[&(1, g1.component_of[&a.source].clone())];
        let y = index[&(2, g2.component_of[&a.target].clone())];
        let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
        parent[ry] = rx;
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..keys.len() {
        let r = find(&mut parent, i);
        classes.entry(r).or_default().push(i);
    }
    let g1_ids: BTreeSet<&CompId> = g1.component_label.keys().collect();
    let mut new_id: BTreeMap<usize, CompId> = BTreeMap::new();
    let mut component_label = BTreeMap::new();
    for (root, members) in &classes {
        let mut names: Vec<String> = members.iter().map(|&i| keys[i].1.to_string()).collect();
        names.sort();
        names.dedup();
        let only_g2 = members.iter().all(|&i| keys[i].0 == 2);
        let mut id = names.join("+");
        if only_g2 && g1_ids.iter().any(|c| c.as_str() == id) {
            id = format!("2:{id}");
        }
        let id = Name::from(id);
        let first = members[0];
        let lab = if keys[first].0 == 1 { g1.label(&keys[first].1)? } else { g2.label(&keys[first].1)? };
        component_label.insert(id.clone(), lab.clone());
        new_id.insert(*root, id);
    }
    let mut component_of = BTreeMap::new();
    for (side, g) in [(1u8, g1), (2u8, g2)] {
        for (o, c) in &g.component_of {
            let r = find(&mut parent, index[&(side, c.clone())]);
            component_of.insert(o.clone(), new_id[&r].clone());
        }
    }
    let mut morphisms: Vec<Arrow> = g1.morphisms.iter().cloned().collect();
    morphisms.extend(g2.morphisms.iter().cloned());
    for a in h.maps.iter() {
        morphisms.push(a.clone());
        morphisms.push(a.inverse().expect("bijective"));
    }
    let glued = ConcreteGroupoid::from_parts(objects, component_of, component_label, morphisms)?;
    let rep = validate_groupoid(&glued);
    if !rep.is_valid() {
        return Err(Error::Invariant(format!("glued groupoid invalid: {:?}", rep.violations.first())));
    }
    Ok(glued)
}

pub fn describe_label(l: &[Name]) -> String {
    format!("{{{}}}", label_string(l))
}
