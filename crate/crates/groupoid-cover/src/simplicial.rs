//! Simplicial groupoids over a finite base, commuting inclusion systems and coherent families.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::{pre, Error, Result};
use crate::groupoid::{
    check_condition_a, check_condition_bprime, validate_groupoid, ConcreteGroupoid, GroupoidMorphismSet,
};
use crate::map::{Arrow, ArrowSet, FnMap};
use crate::name::{is_sublabel, label_string, CompId, Label, Name, ObjId};
use crate::report::ValidationReport;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplicialGroupoid {
    base: Vec<Name>,
    degrees: BTreeMap<usize, Arc<ConcreteGroupoid>>,
    inclusions: BTreeMap<(usize, usize), ArrowSet>,
    /// object → (degree, component)
    index: BTreeMap<ObjId, (usize, CompId)>,
}

impl SimplicialGroupoid {
    pub fn new(
        base: Vec<Name>,
        degrees: BTreeMap<usize, Arc<ConcreteGroupoid>>,
        inclusions: BTreeMap<(usize, usize), ArrowSet>,
    ) -> Result<Self> {
        let mut base = base;
        base.sort();
        base.dedup();
        let mut index = BTreeMap::new();
        for (&n, g) in &degrees {
            for (o, c) in g.component_map() {
                if index.insert(o.clone(), (n, c.clone())).is_some() {
                    return Err(pre(format!("object id {o} occurs in two degrees")));
                }
            }
        }
        for (&(n, m), set) in &inclusions {
            if n >= m {
                return Err(pre(format!("inclusion set ({n},{m}) must go up in degree")));
            }
            let (gn, gm) = match (degrees.get(&n), degrees.get(&m)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::UnknownId(format!("degree pair ({n},{m})"))),
            };
            for a in set.iter() {
                gn.elements(&a.source)?;
                gm.elements(&a.target)?;
            }
        }
        Ok(SimplicialGroupoid { base, degrees, inclusions, index })
    }

    pub fn base(&self) -> &[Name] {
        &self.base
    }

    pub fn degrees(&self) -> &BTreeMap<usize, Arc<ConcreteGroupoid>> {
        &self.degrees
    }

    pub fn degree(&self, n: usize) -> Option<&Arc<ConcreteGroupoid>> {
        self.degrees.get(&n)
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.keys().next_back().copied().unwrap_or(0)
    }

    pub fn inclusions(&self) -> &BTreeMap<(usize, usize), ArrowSet> {
        &self.inclusions
    }

    pub fn inclusion_set(&self, n: usize, m: usize) -> Option<&ArrowSet> {
        self.inclusions.get(&(n, m))
    }

    pub fn degree_of(&self, o: &str) -> Result<usize> {
        self.index.get(o).map(|x| x.0).ok_or_else(|| Error::UnknownId(o.to_string()))
    }

    pub fn label_of(&self, o: &str) -> Result<&Label> {
        let (n, c) = self.index.get(o).ok_or_else(|| Error::UnknownId(o.to_string()))?;
        self.degrees[n].label(c)
    }

    pub fn elements(&self, o: &str) -> Result<&[crate::name::Elem]> {
        let n = self.degree_of(o)?;
        self.degrees[&n].elements(o)
    }

    /// All component labels, ordered by size then lexicographically.
    pub fn labels(&self) -> Vec<Label> {
        let mut v: Vec<Label> = self
            .degrees
            .values()
            .flat_map(|g| g.components().values().cloned())
            .collect();
        v.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        v.dedup();
        v
    }

    pub fn has_label(&self, l: &[Name]) -> bool {
        self.degrees.get(&l.len()).map_or(false, |g| g.component_with_label(l).is_some())
    }

    pub fn objects_over(&self, l: &[Name]) -> Vec<ObjId> {
        self.degrees.get(&l.len()).map(|g| g.objects_over(l)).unwrap_or_default()
    }

    /// Every map of the simplicial groupoid from o1 to o2 (groupoid morphisms or inclusions).
    pub fn maps(&self, o1: &str, o2: &str) -> Result<&[Arrow]> {
        let (n, m) = (self.degree_of(o1)?, self.degree_of(o2)?);
        if n == m {
            return self.degrees[&n].hom(o1, o2);
        }
        if n > m {
            return Ok(&[]);
        }
        Ok(self.inclusions.get(&(n, m)).map(|s| s.between(o1, o2)).unwrap_or(&[]))
    }

    pub fn contains_map(&self, a: &Arrow) -> bool {
        self.maps(&a.source, &a.target).map_or(false, |s| s.binary_search(a).is_ok())
    }

    /// ι_{n,m} packaged with the ⊆ relation on labels.
    pub fn inclusion_morphism(&self, n: usize, m: usize) -> Result<GroupoidMorphismSet> {
        let gn = self.degrees.get(&n).ok_or_else(|| Error::UnknownId(format!("degree {n}")))?;
        let gm = self.degrees.get(&m).ok_or_else(|| Error::UnknownId(format!("degree {m}")))?;
        let maps = self.inclusions.get(&(n, m)).cloned().unwrap_or_default();
        Ok(GroupoidMorphismSet {
            source: gn.clone(),
            target: gm.clone(),
            maps,
            relation: subset_relation(gn, gm),
        })
    }

    /// The simplicial groupoid over a subset of the base.
    pub fn restrict_to(&self, points: &[Name]) -> Result<SimplicialGroupoid> {
        let pts: Label = crate::name::label(points.iter().cloned());
        for p in &pts {
            if self.base.binary_search(p).is_err() {
                return Err(Error::UnknownId(p.to_string()));
            }
        }
        let sub = self.filter_labels(|l| is_sublabel(l, &pts))?;
        SimplicialGroupoid::new(pts, sub.degrees, sub.inclusions)
    }

    /// Drops every component whose label fails `keep`, with all maps touching it.
    pub fn filter_labels(&self, keep: impl Fn(&Label) -> bool) -> Result<SimplicialGroupoid> {
        let mut degrees = BTreeMap::new();
        for (&n, g) in &self.degrees {
            let kept: BTreeSet<CompId> =
                g.components().iter().filter(|(_, l)| keep(l)).map(|(c, _)| c.clone()).collect();
            if kept.is_empty() {
                continue;
            }
            let objects: BTreeMap<_, _> = g
                .objects()
                .iter()
                .filter(|(o, _)| kept.contains(&g.component_map()[*o]))
                .map(|(o, e)| (o.clone(), e.clone()))
                .collect();
            let component_of = g
                .component_map()
                .iter()
                .filter(|(_, c)| kept.contains(*c))
                .map(|(o, c)| (o.clone(), c.clone()))
                .collect();
            let labels = g
                .components()
                .iter()
                .filter(|(c, _)| kept.contains(*c))
                .map(|(c, l)| (c.clone(), l.clone()))
                .collect();
            let morphisms = g.morphisms().iter().filter(|a| objects.contains_key(&a.source)).cloned().collect();
            degrees.insert(n, Arc::new(ConcreteGroupoid::from_parts(objects, component_of, labels, morphisms)?));
        }
        let mut inclusions = BTreeMap::new();
        for (&(n, m), set) in &self.inclusions {
            if let (Some(gn), Some(gm)) = (degrees.get(&n), degrees.get(&m)) {
                let kept: Vec<Arrow> = set
                    .iter()
                    .filter(|a| gn.has_object(&a.source) && gm.has_object(&a.target))
                    .cloned()
                    .collect();
                inclusions.insert((n, m), ArrowSet::new(kept));
            }
        }
        SimplicialGroupoid::new(self.base.clone(), degrees, inclusions)
    }
}

fn subset_relation(gn: &ConcreteGroupoid, gm: &ConcreteGroupoid) -> BTreeSet<(CompId, CompId)> {
    let mut rel = BTreeSet::new();
    for (c, lc) in gn.components() {
        for (d, ld) in gm.components() {
            if is_sublabel(lc, ld) {
                rel.insert((c.clone(), d.clone()));
            }
        }
    }
    rel
}

pub fn validate_simplicial(sg: &SimplicialGroupoid) -> ValidationReport {
    let mut r = ValidationReport::default();
    for (&n, g) in &sg.degrees {
        r.extend(validate_groupoid(g).prefixed(&format!("degree {n}")));
        for (c, l) in g.components() {
            if l.len() != n {
                r.push("label size", format!("component {c} in degree {n} has label of size {}", l.len()));
            }
            if !is_sublabel(l, &sg.base) {
                r.push("label outside base", format!("component {c}"));
            }
        }
    }
    for p in &sg.base {
        if !sg.has_label(std::slice::from_ref(p)) {
            r.push("missing degree-1 component", format!("point {p}"));
        }
    }
    let degs: Vec<usize> = sg.degrees.keys().copied().collect();
    for (i, &n) in degs.iter().enumerate() {
        for &m in &degs[i + 1..] {
            let h = sg.inclusion_morphism(n, m).expect("degrees exist");
            for a in h.maps.iter() {
                if !a.map.is_injective() {
                    r.push("injectivity", format!("inclusion {}->{} {:?}", a.source, a.target, a.map));
                }
            }
            if h.realised_relation() != h.relation {
                let missing: Vec<String> = h
                    .relation
                    .symmetric_difference(&h.realised_relation())
                    .map(|(c, d)| format!("({c},{d})"))
                    .collect();
                r.push("relation", format!("ι_{{{n},{m}}} not compatible with ⊆ at {}", missing.join(" ")));
            }
            if h.maps.is_empty() {
                continue;
            }
            if let Err(cx) = check_condition_a(&h) {
                r.push(
                    "condition A",
                    format!("ι_{{{n},{m}}} at {}->{} vs {}->{}", cx.h_p.source, cx.h_p.target, cx.h_m.source, cx.h_m.target),
                );
            }
            let b = check_condition_bprime(&h);
            if !b.b_prime {
                r.push("condition B'", format!("ι_{{{n},{m}}} misses {:?}", b.missing.map(|a| (a.source, a.target, a.map))));
            }
        }
    }
    // ι_{n,m} ∘ ι_{k,n} = ι_{k,m}
    for (i, &k) in degs.iter().enumerate() {
        for (j, &n) in degs.iter().enumerate().skip(i + 1) {
            for &m in &degs[j + 1..] {
                let (Some(a), Some(b), Some(c)) =
                    (sg.inclusions.get(&(k, n)), sg.inclusions.get(&(n, m)), sg.inclusions.get(&(k, m)))
                else {
                    continue;
                };
                let mut comp = Vec::new();
                for x in a.iter() {
                    for y in b.from_source(&x.target) {
                        if let Some(z) = y.after(x) {
                            comp.push(z);
                        }
                    }
                }
                let comp = ArrowSet::new(comp);
                if &comp != c {
                    r.push("composition law", format!("ι_{{{n},{m}}}∘ι_{{{k},{n}}} ≠ ι_{{{k},{m}}}"));
                }
            }
        }
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DupCounterexample {
    pub target: ObjId,
    pub legs: Vec<Arrow>,
    pub reason: String,
}

fn set_partitions(items: &[Name]) -> Vec<Vec<Label>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let first = items[0].clone();
    let mut out = Vec::new();
    for p in set_partitions(&items[1..]) {
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i].insert(0, first.clone());
            out.push(q);
        }
        let mut q = p.clone();
        q.insert(0, vec![first.clone()]);
        out.push(q);
    }
    out
}

/// Every choice of legs from a partition of a label must give a bijection onto the target.
/// Pairwise disjointness plus the cardinality count is equivalent to checking every full choice.
pub fn check_disjoint_union_property(sg: &SimplicialGroupoid) -> std::result::Result<(), DupCounterexample> {
    for d in sg.labels() {
        if d.len() < 2 {
            continue;
        }
        for part in set_partitions(&d) {
            if part.len() < 2 || part.iter().any(|b| !sg.has_label(b)) {
                continue;
            }
            for t in sg.objects_over(&d) {
                let size = sg.elements(&t).expect("object").len();
                // legs per block: every map from every object over the block
                let legs: Vec<Vec<Arrow>> = part
                    .iter()
                    .map(|b| {
                        sg.objects_over(b)
                            .iter()
                            .flat_map(|o| sg.maps(o, &t).expect("objects").to_vec())
                            .collect()
                    })
                    .collect();
                if legs.iter().any(|l| l.is_empty()) {
                    return Err(DupCounterexample { target: t.clone(), legs: vec![], reason: "missing leg".into() });
                }
                let first: Vec<Arrow> = legs.iter().map(|l| l[0].clone()).collect();
                let total: usize = first.iter().map(|a| a.map.len()).sum();
                if total != size {
                    return Err(DupCounterexample { target: t.clone(), legs: first, reason: "cardinality".into() });
                }
                for i in 0..legs.len() {
                    for j in i + 1..legs.len() {
                        for x in &legs[i] {
                            let ix = x.map.image();
                            for y in &legs[j] {
                                if y.map.pairs().iter().any(|(_, v)| ix.contains(v)) {
                                    let mut choice = first.clone();
                                    choice[i] = x.clone();
                                    choice[j] = y.clone();
                                    return Err(DupCounterexample {
                                        target: t.clone(),
                                        legs: choice,
                                        reason: "overlapping images".into(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// The unique x with ι3 ∘ x = ι1, located by scanning the hom-set.
pub fn fill_square(sg: &SimplicialGroupoid, i1: &Arrow, i3: &Arrow) -> Result<Arrow> {
    if !sg.contains_map(i1) || !sg.contains_map(i3) {
        return Err(pre("fill_square inputs must be maps of the simplicial groupoid"));
    }
    if i1.target != i3.target {
        return Err(pre("fill_square inputs must share their target"));
    }
    let (la, lm) = (sg.label_of(&i1.source)?, sg.label_of(&i3.source)?);
    if !is_sublabel(la, lm) {
        return Err(pre(format!("label {{{}}} not inside {{{}}}", label_string(la), label_string(lm))));
    }
    let mut found: Option<&Arrow> = None;
    for x in sg.maps(&i1.source, &i3.source)? {
        if i3.map.after(&x.map).as_ref() == Some(&i1.map) {
            if found.is_some() {
                return Err(Error::Invariant("fill_square has two solutions".into()));
            }
            found = Some(x);
        }
    }
    found
        .cloned()
        .ok_or_else(|| Error::Invariant(format!("fill_square: no solution for {}->{}", i1.source, i3.source)))
}

/// One object per label and one map per strict label inclusion.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct InclusionSystem {
    pub points: Vec<Name>,
    pub chosen: BTreeMap<Label, ObjId>,
    pub maps: BTreeMap<(Label, Label), Arrow>,
    pub free_choices: Vec<FreeChoice>,
}

/// A point where more than one consistent candidate existed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeChoice {
    pub source: Label,
    pub target: Label,
    pub index: usize,
    pub candidates: usize,
}

/// Partial data to extend; `choices` replays free-choice indices in order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SystemSeed {
    pub chosen: BTreeMap<Label, ObjId>,
    pub maps: BTreeMap<(Label, Label), Arrow>,
    pub choices: Vec<usize>,
}

impl SystemSeed {
    pub fn from_system(sys: &InclusionSystem) -> Self {
        SystemSeed { chosen: sys.chosen.clone(), maps: sys.maps.clone(), choices: vec![] }
    }
}

impl InclusionSystem {
    pub fn object(&self, l: &[Name]) -> Option<&ObjId> {
        self.chosen.get(l)
    }

    pub fn map(&self, c: &[Name], d: &[Name]) -> Option<&Arrow> {
        self.maps.get(&(c.to_vec(), d.to_vec()))
    }

    /// First triple c ⊂ d ⊂ e with ι_{d,e} ∘ ι_{c,d} ≠ ι_{c,e}.
    pub fn commutativity_violation(&self) -> Option<(Label, Label, Label)> {
        for ((c, d), x) in &self.maps {
            for ((d2, e), y) in self.maps.range((d.clone(), Vec::new())..) {
                if d2 != d {
                    break;
                }
                let z = self.maps.get(&(c.clone(), e.clone()));
                if z.map(|z| y.after(x).as_ref() == Some(z)) != Some(true) {
                    return Some((c.clone(), d.clone(), e.clone()));
                }
            }
        }
        None
    }

    pub fn triple_count(&self) -> usize {
        let mut n = 0;
        for (c, d) in self.maps.keys() {
            n += self.maps.keys().filter(|(d2, _)| d2 == d).count();
            let _ = c;
        }
        n
    }

    /// Pairs where the two systems choose different maps or objects.
    pub fn diff(&self, other: &InclusionSystem) -> Vec<(Label, Label)> {
        let mut out = Vec::new();
        for (l, o) in &self.chosen {
            if other.chosen.get(l) != Some(o) {
                out.push((l.clone(), l.clone()));
            }
        }
        for (k, a) in &self.maps {
            if other.maps.get(k) != Some(a) {
                out.push(k.clone());
            }
        }
        out
    }

    pub fn restrict_to(&self, points: &[Name]) -> InclusionSystem {
        let pts = crate::name::label(points.iter().cloned());
        InclusionSystem {
            points: pts.clone(),
            chosen: self.chosen.iter().filter(|(l, _)| is_sublabel(l, &pts)).map(|(l, o)| (l.clone(), o.clone())).collect(),
            maps: self.maps.iter().filter(|((_, d), _)| is_sublabel(d, &pts)).map(|(k, a)| (k.clone(), a.clone())).collect(),
            free_choices: vec![],
        }
    }
}

fn factor(outer: &FnMap, total: &FnMap) -> Option<FnMap> {
    outer.inverse()?.after(total)
}

/// Checks the inclusion system against the simplicial groupoid: objects lie over their labels,
/// maps are inclusions of the groupoid, every label pair is present, and triples commute.
pub fn validate_inclusion_system(sg: &SimplicialGroupoid, sys: &InclusionSystem) -> ValidationReport {
    let mut r = ValidationReport::default();
    let labels: Vec<Label> = sg.labels().into_iter().filter(|l| is_sublabel(l, &sys.points)).collect();
    for l in &labels {
        match sys.chosen.get(l) {
            Some(o) if sg.label_of(o).ok() == Some(l) => {}
            Some(o) => r.push("chosen object", format!("{o} is not over {{{}}}", label_string(l))),
            None => r.push("chosen object", format!("no object for {{{}}}", label_string(l))),
        }
    }
    for c in &labels {
        for d in &labels {
            if c.len() < d.len() && is_sublabel(c, d) {
                match sys.maps.get(&(c.clone(), d.clone())) {
                    Some(a) => {
                        if Some(&a.source) != sys.chosen.get(c) || Some(&a.target) != sys.chosen.get(d) {
                            r.push("endpoints", format!("map {{{}}}⊂{{{}}}", label_string(c), label_string(d)));
                        } else if !sg.contains_map(a) {
                            r.push("not an inclusion", format!("map {}->{}", a.source, a.target));
                        }
                    }
                    None => r.push("missing map", format!("{{{}}}⊂{{{}}}", label_string(c), label_string(d))),
                }
            }
        }
    }
    if let Some((c, d, e)) = sys.commutativity_violation() {
        r.push(
            "commutativity",
            format!("{{{}}}⊂{{{}}}⊂{{{}}}", label_string(&c), label_string(&d), label_string(&e)),
        );
    }
    r
}

struct Extender<'a> {
    sg: &'a SimplicialGroupoid,
    fixed: BTreeMap<(Label, Label), Arrow>,
    seed: &'a SystemSeed,
    chosen: BTreeMap<Label, ObjId>,
    vars: Vec<(Label, Label)>,
    tops: Vec<Label>,
    new_labels: Vec<Label>,
    labels: Vec<Label>,
}

impl<'a> Extender<'a> {
    fn candidates(&self, c: &Label, m: &Label) -> Result<Vec<Arrow>> {
        let (s, t) = (&self.chosen[c], &self.chosen[m]);
        let all = self.sg.maps(s, t)?.to_vec();
        if let Some(a) = self.seed.maps.get(&(c.clone(), m.clone())) {
            if !all.contains(a) {
                return Err(Error::InconsistentSeed(format!(
                    "seed map {{{}}}⊂{{{}}} is not an inclusion between the chosen objects",
                    label_string(c),
                    label_string(m)
                )));
            }
            return Ok(vec![a.clone()]);
        }
        Ok(all)
    }

    fn consistent(&self, c: &Label, m: &Label, x: &Arrow, asg: &BTreeMap<(Label, Label), Arrow>) -> bool {
        for ((c2, m2), y) in asg {
            if m2 != m {
                continue;
            }
            if c.len() < c2.len() && is_sublabel(c, c2) {
                if let Some(f) = self.fixed.get(&(c.clone(), c2.clone())) {
                    if y.after(f).as_ref() != Some(x) {
                        return false;
                    }
                }
            }
            if c2.len() < c.len() && is_sublabel(c2, c) {
                if let Some(f) = self.fixed.get(&(c2.clone(), c.clone())) {
                    if x.after(f).as_ref() != Some(y) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Derives the maps into non-top new labels; None on disagreement.
    fn complete(&self, asg: &BTreeMap<(Label, Label), Arrow>) -> Option<BTreeMap<(Label, Label), Arrow>> {
        let mut out = asg.clone();
        for e in &self.new_labels {
            if self.tops.contains(e) {
                continue;
            }
            for c in &self.labels {
                if !(c.len() < e.len() && is_sublabel(c, e)) {
                    continue;
                }
                let mut val: Option<Arrow> = None;
                for m in &self.tops {
                    if !(e.len() < m.len() && is_sublabel(e, m)) {
                        continue;
                    }
                    let outer = &asg[&(e.clone(), m.clone())];
                    let total = &asg[&(c.clone(), m.clone())];
                    let f = factor(&outer.map, &total.map)?;
                    let a = Arrow::new(self.chosen[c].clone(), self.chosen[e].clone(), f);
                    if !self.sg.contains_map(&a) {
                        return None;
                    }
                    match &val {
                        Some(v) if v != &a => return None,
                        _ => val = Some(a),
                    }
                }
                let a = val?;
                if let Some(s) = self.fixed.get(&(c.clone(), e.clone())) {
                    if s != &a {
                        return None;
                    }
                }
                out.insert((c.clone(), e.clone()), a);
            }
        }
        Some(out)
    }

    fn search(
        &self,
        k: usize,
        asg: &mut BTreeMap<(Label, Label), Arrow>,
        log: &mut Vec<FreeChoice>,
        replay: &mut std::slice::Iter<'_, usize>,
        base: &BTreeMap<(Label, Label), Arrow>,
    ) -> Result<Option<BTreeMap<(Label, Label), Arrow>>> {
        if k == self.vars.len() {
            let Some(done) = self.complete(asg) else { return Ok(None) };
            let mut maps = base.clone();
            maps.extend(done);
            let probe = InclusionSystem { points: vec![], chosen: BTreeMap::new(), maps: maps.clone(), free_choices: vec![] };
            if probe.commutativity_violation().is_some() {
                return Ok(None);
            }
            return Ok(Some(maps));
        }
        let (c, m) = self.vars[k].clone();
        let cands: Vec<Arrow> = self
            .candidates(&c, &m)?
            .into_iter()
            .filter(|x| self.consistent(&c, &m, x, asg))
            .collect();
        let n = cands.len();
        let start = if n > 1 { replay.next().map(|i| i % n).unwrap_or(0) } else { 0 };
        for off in 0..n {
            let i = (start + off) % n;
            asg.insert((c.clone(), m.clone()), cands[i].clone());
            if n > 1 {
                log.push(FreeChoice { source: c.clone(), target: m.clone(), index: i, candidates: n });
            }
            if let Some(res) = self.search(k + 1, asg, log, replay, base)? {
                return Ok(Some(res));
            }
            if n > 1 {
                log.pop();
            }
            asg.remove(&(c.clone(), m.clone()));
        }
        Ok(None)
    }
}

fn extend_with(
    sg: &SimplicialGroupoid,
    sys: &InclusionSystem,
    p: &Name,
    seed: &SystemSeed,
    replay: &mut std::slice::Iter<'_, usize>,
) -> Result<InclusionSystem> {
    if sys.points.contains(p) {
        return Err(pre(format!("point {p} already in the system")));
    }
    if sg.base.binary_search(p).is_err() {
        return Err(Error::UnknownId(p.to_string()));
    }
    let points = crate::name::label(sys.points.iter().cloned().chain([p.clone()]));
    let labels: Vec<Label> = sg.labels().into_iter().filter(|l| is_sublabel(l, &points)).collect();
    let new_labels: Vec<Label> = labels.iter().filter(|l| l.contains(p)).cloned().collect();
    let mut chosen = sys.chosen.clone();
    for l in &new_labels {
        let over = sg.objects_over(l);
        let o = match seed.chosen.get(l) {
            Some(o) if over.contains(o) => o.clone(),
            Some(o) => {
                return Err(Error::InconsistentSeed(format!("seed object {o} is not over {{{}}}", label_string(l))))
            }
            None => over.first().cloned().ok_or_else(|| Error::Invariant("component without objects".into()))?,
        };
        chosen.insert(l.clone(), o);
    }
    let tops: Vec<Label> = new_labels
        .iter()
        .filter(|l| !new_labels.iter().any(|m| m.len() > l.len() && is_sublabel(l, m)))
        .cloned()
        .collect();
    let mut vars = Vec::new();
    for m in &tops {
        let mut subs: Vec<&Label> = labels.iter().filter(|c| c.len() < m.len() && is_sublabel(c, m)).collect();
        subs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        for c in subs {
            vars.push((c.clone(), m.clone()));
        }
    }
    let mut fixed = sys.maps.clone();
    for (k, a) in &seed.maps {
        if is_sublabel(&k.1, &points) {
            fixed.insert(k.clone(), a.clone());
        }
    }
    let ext = Extender { sg, fixed, seed, chosen: chosen.clone(), vars, tops, new_labels, labels };
    let mut log = Vec::new();
    let mut asg = BTreeMap::new();
    let maps = ext
        .search(0, &mut asg, &mut log, replay, &sys.maps)?
        .ok_or_else(|| Error::InconsistentSeed(format!("no commuting extension by {p}")))?;
    let mut free_choices = sys.free_choices.clone();
    free_choices.extend(log);
    Ok(InclusionSystem { points, chosen, maps, free_choices })
}

/// Adds one point to a commuting system; the remaining maps are forced or chosen lex-least.
pub fn extend_inclusion_system(sg: &SimplicialGroupoid, sys: &InclusionSystem, p: &Name) -> Result<InclusionSystem> {
    let seed = SystemSeed::default();
    extend_with(sg, sys, p, &seed, &mut [].iter())
}

pub fn extend_inclusion_system_seeded(
    sg: &SimplicialGroupoid,
    sys: &InclusionSystem,
    p: &Name,
    seed: &SystemSeed,
) -> Result<InclusionSystem> {
    extend_with(sg, sys, p, seed, &mut seed.choices.iter())
}

/// Builds a commuting system over the whole base, one point at a time in lexicographic order.
pub fn build_inclusion_system(sg: &SimplicialGroupoid, seed: &SystemSeed) -> Result<InclusionSystem> {
    for ((c, d), a) in &seed.maps {
        if !sg.contains_map(a) || sg.label_of(&a.source).ok() != Some(c) || sg.label_of(&a.target).ok() != Some(d) {
            return Err(Error::InconsistentSeed(format!(
                "seed map {{{}}}⊂{{{}}} is not an inclusion of the groupoid",
                label_string(c),
                label_string(d)
            )));
        }
        for l in [c, d] {
            if let Some(o) = seed.chosen.get(l) {
                let end = if l == c { &a.source } else { &a.target };
                if o != end {
                    return Err(Error::InconsistentSeed(format!("seed map and seed object disagree over {{{}}}", label_string(l))));
                }
            }
        }
    }
    let probe = InclusionSystem { maps: seed.maps.clone(), ..Default::default() };
    if let Some((c, d, e)) = probe.commutativity_violation() {
        let full = seed.maps.contains_key(&(c.clone(), d.clone()))
            && seed.maps.contains_key(&(d.clone(), e.clone()))
            && seed.maps.contains_key(&(c.clone(), e.clone()));
        if full {
            return Err(Error::InconsistentSeed(format!(
                "seed maps do not commute on {{{}}}⊂{{{}}}⊂{{{}}}",
                label_string(&c),
                label_string(&d),
                label_string(&e)
            )));
        }
    }
    let mut seed_full = seed.clone();
    for ((c, d), a) in &seed.maps {
        seed_full.chosen.entry(c.clone()).or_insert_with(|| a.source.clone());
        seed_full.chosen.entry(d.clone()).or_insert_with(|| a.target.clone());
    }
    let mut sys = InclusionSystem::default();
    let mut replay = seed.choices.iter();
    for p in sg.base() {
        sys = extend_with(sg, &sys, p, &seed_full, &mut replay)?;
    }
    Ok(sys)
}

/// Backtracking search for maps g_c : O1_c → O2_c (c over all labels) with
/// g_d ∘ ι1_{c,d} = ι2_{c,d} ∘ g_c. Candidates come from the groupoid's own hom-sets.
pub fn connect_systems(
    sg: &SimplicialGroupoid,
    s1: &InclusionSystem,
    s2: &InclusionSystem,
) -> Result<Option<BTreeMap<Label, Arrow>>> {
    let labels: Vec<Label> = s1.chosen.keys().cloned().collect();
    let mut order = labels.clone();
    order.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut cands = Vec::new();
    for l in &order {
        let (o1, o2) = (
            s1.chosen.get(l).ok_or_else(|| Error::UnknownId(label_string(l)))?,
            s2.chosen.get(l).ok_or_else(|| Error::UnknownId(label_string(l)))?,
        );
        cands.push(sg.maps(o1, o2)?.to_vec());
    }
    fn go(
        k: usize,
        order: &[Label],
        cands: &[Vec<Arrow>],
        s1: &InclusionSystem,
        s2: &InclusionSystem,
        cur: &mut BTreeMap<Label, Arrow>,
    ) -> bool {
        if k == order.len() {
            return true;
        }
        let d = &order[k];
        for g in &cands[k] {
            let ok = cur.iter().all(|(c, gc)| {
                if !(c.len() < d.len() && is_sublabel(c, d)) {
                    return true;
                }
                let (Some(i1), Some(i2)) = (s1.map(c, d), s2.map(c, d)) else { return false };
                g.after(i1) == i2.after(gc)
            });
            if ok {
                cur.insert(d.clone(), g.clone());
                if go(k + 1, order, cands, s1, s2, cur) {
                    return true;
                }
                cur.remove(d);
            }
        }
        false
    }
    let mut cur = BTreeMap::new();
    Ok(go(0, &order, &cands, s1, s2, &mut cur).then_some(cur))
}

/// Degree-wise morphism sets between two simplicial groupoids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplicialMorphism {
    pub source: Arc<SimplicialGroupoid>,
    pub target: Arc<SimplicialGroupoid>,
    pub degrees: BTreeMap<usize, ArrowSet>,
}

impl SimplicialMorphism {
    pub fn new(
        source: Arc<SimplicialGroupoid>,
        target: Arc<SimplicialGroupoid>,
        degrees: BTreeMap<usize, ArrowSet>,
    ) -> Result<Self> {
        for (&n, set) in &degrees {
            let (Some(g1), Some(g2)) = (source.degree(n), target.degree(n)) else {
                return Err(Error::UnknownId(format!("degree {n}")));
            };
            for a in set.iter() {
                g1.elements(&a.source)?;
                g2.elements(&a.target)?;
            }
        }
        Ok(SimplicialMorphism { source, target, degrees })
    }

    pub fn identity(sg: Arc<SimplicialGroupoid>) -> Self {
        let degrees = sg.degrees().iter().map(|(&n, g)| (n, g.morphisms().clone())).collect();
        SimplicialMorphism { source: sg.clone(), target: sg, degrees }
    }

    pub fn degree_morphism(&self, n: usize) -> Result<GroupoidMorphismSet> {
        let g1 = self.source.degree(n).ok_or_else(|| Error::UnknownId(format!("degree {n}")))?;
        let g2 = self.target.degree(n).ok_or_else(|| Error::UnknownId(format!("degree {n}")))?;
        Ok(GroupoidMorphismSet {
            source: g1.clone(),
            target: g2.clone(),
            maps: self.degrees.get(&n).cloned().unwrap_or_default(),
            relation: crate::groupoid::label_equality_relation(g1, g2),
        })
    }

    pub fn maps(&self, o1: &str, o2: &str) -> &[Arrow] {
        match self.source.degree_of(o1) {
            Ok(n) => self.degrees.get(&n).map(|s| s.between(o1, o2)).unwrap_or(&[]),
            Err(_) => &[],
        }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &SimplicialMorphism) -> Result<SimplicialMorphism> {
        if self.target != other.source {
            return Err(pre("morphisms are not composable"));
        }
        let mut degrees = BTreeMap::new();
        for (&n, s) in &self.degrees {
            let Some(t) = other.degrees.get(&n) else { continue };
            let mut out = Vec::new();
            for a in s.iter() {
                for b in t.from_source(&a.target) {
                    out.push(b.after(a).expect("composable"));
                }
            }
            degrees.insert(n, ArrowSet::new(out));
        }
        Ok(SimplicialMorphism { source: self.source.clone(), target: other.target.clone(), degrees })
    }

    pub fn is_isomorphism(&self) -> bool {
        self.degrees.values().all(|s| {
            s.iter().all(|a| {
                a.map.is_injective()
                    && self.target.elements(&a.target).map(|e| e.len()).ok() == Some(a.map.len())
            })
        })
    }

    pub fn inverse(&self) -> Result<SimplicialMorphism> {
        let mut degrees = BTreeMap::new();
        for (&n, s) in &self.degrees {
            let inv: Option<Vec<Arrow>> = s.iter().map(|a| a.inverse()).collect();
            degrees.insert(n, ArrowSet::new(inv.ok_or_else(|| pre("not invertible"))?));
        }
        Ok(SimplicialMorphism { source: self.target.clone(), target: self.source.clone(), degrees })
    }
}

pub fn validate_simplicial_morphism(h: &SimplicialMorphism) -> ValidationReport {
    let mut r = ValidationReport::default();
    for &n in h.source.degrees().keys() {
        let Ok(hm) = h.degree_morphism(n) else {
            r.push("degree", format!("target lacks degree {n}"));
            continue;
        };
        if hm.maps.is_empty() {
            r.push("empty", format!("degree {n}"));
            continue;
        }
        if let Err(cx) = check_condition_a(&hm) {
            r.push("condition A", format!("degree {n} at {}->{}", cx.h_p.source, cx.h_m.source));
        }
        if !check_condition_bprime(&hm).b_prime {
            r.push("condition B'", format!("degree {n}"));
        }
        if hm.realised_relation() != hm.relation {
            r.push("relation", format!("degree {n} is not compatible with equality of labels"));
        }
    }
    let degs: Vec<usize> = h.source.degrees().keys().copied().collect();
    for (i, &n) in degs.iter().enumerate() {
        for &m in &degs[i + 1..] {
            let (Some(i1), Some(i2)) = (h.source.inclusion_set(n, m), h.target.inclusion_set(n, m)) else {
                continue;
            };
            let (Some(hn), Some(hm)) = (h.degrees.get(&n), h.degrees.get(&m)) else { continue };
            let mut lhs = Vec::new();
            for a in hn.iter() {
                for b in i2.from_source(&a.target) {
                    lhs.push(b.after(a).expect("composable"));
                }
            }
            let mut rhs = Vec::new();
            for a in i1.iter() {
                for b in hm.from_source(&a.target) {
                    rhs.push(b.after(a).expect("composable"));
                }
            }
            if ArrowSet::new(lhs) != ArrowSet::new(rhs) {
                r.push("square", format!("degrees {n}→{m}: ι2∘H_{n} ≠ H_{m}∘ι1"));
            }
        }
    }
    r
}

/// Degree-1 maps m_a with witnesses h_c̄ making ι2∘m_a = h_c̄∘ι1 for every a ∈ c̄.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CoherentFamily {
    pub maps: BTreeMap<Name, Arrow>,
    pub witnesses: BTreeMap<Label, Arrow>,
}

/// The map on O1_c̄ glued from the legs: on the image of ι1_{a,c̄} it is ι2_{a,c̄}∘m_a∘ι1⁻¹.
/// Errors unless the glued map is total and a member of H.
pub fn coherence_witness(
    h: &SimplicialMorphism,
    i1: &InclusionSystem,
    i2: &InclusionSystem,
    maps: &BTreeMap<Name, Arrow>,
    c: &[Name],
) -> Result<Arrow> {
    let cl: Label = c.to_vec();
    let o1 = i1.object(&cl).ok_or_else(|| Error::UnknownId(format!("{{{}}} in ι1", label_string(&cl))))?;
    let o2 = i2.object(&cl).ok_or_else(|| Error::UnknownId(format!("{{{}}} in ι2", label_string(&cl))))?;
    if cl.len() == 1 {
        return maps.get(&cl[0]).cloned().ok_or_else(|| Error::UnknownId(cl[0].to_string()));
    }
    let mut pairs = Vec::new();
    for a in &cl {
        let m = maps.get(a).ok_or_else(|| Error::UnknownId(format!("family map at {a}")))?;
        let s = vec![a.clone()];
        let (l1, l2) = (
            i1.map(&s, &cl).ok_or_else(|| Error::UnknownId(format!("ι1 {{{a}}}⊂{{{}}}", label_string(&cl))))?,
            i2.map(&s, &cl).ok_or_else(|| Error::UnknownId(format!("ι2 {{{a}}}⊂{{{}}}", label_string(&cl))))?,
        );
        let leg = l2.after(m).ok_or_else(|| pre("family map endpoints do not match the systems"))?;
        let inv = l1.inverse().ok_or_else(|| Error::Invariant("inclusion not injective".into()))?;
        let part = leg.map.after(&inv.map).ok_or_else(|| Error::Invariant("leg composition".into()))?;
        pairs.extend(part.pairs().iter().cloned());
    }
    let map = FnMap::from_pairs(pairs)
        .ok_or_else(|| Error::NoSolution(format!("legs overlap over {{{}}}", label_string(&cl))))?;
    let dom = h.source.elements(o1)?;
    if map.len() != dom.len() {
        return Err(Error::NoSolution(format!("glued map over {{{}}} is not total", label_string(&cl))));
    }
    let a = Arrow::new(o1.clone(), o2.clone(), map);
    if !h.maps(o1, o2).contains(&a) {
        return Err(Error::NoSolution(format!("family is not coherent at {{{}}}", label_string(&cl))));
    }
    Ok(a)
}

/// Extends a coherent partial family to all points, one point at a time: points of the
/// partial family first, then the rest in lexicographic order.
pub fn find_coherent_family(
    h: &SimplicialMorphism,
    i1: &InclusionSystem,
    i2: &InclusionSystem,
    partial: &CoherentFamily,
) -> Result<CoherentFamily> {
    let labels = h.source.labels();
    let mut fam = CoherentFamily { maps: partial.maps.clone(), witnesses: BTreeMap::new() };
    let done_pts: Vec<Name> = partial.maps.keys().cloned().collect();
    for l in labels.iter().filter(|l| l.len() > 1 && is_sublabel(l, &done_pts)) {
        let w = coherence_witness(h, i1, i2, &fam.maps, l)
            .map_err(|e| Error::NoSolution(format!("partial family not coherent: {e}")))?;
        if let Some(given) = partial.witnesses.get(l) {
            if given != &w {
                return Err(Error::NoSolution(format!("given witness over {{{}}} is wrong", label_string(l))));
            }
        }
        fam.witnesses.insert(l.clone(), w);
    }
    let mut done = done_pts.clone();
    let rest: Vec<Name> = h.source.base().iter().filter(|p| !done_pts.contains(p)).cloned().collect();
    for d in rest {
        let sd = vec![d.clone()];
        let (o1, o2) = (
            i1.object(&sd).ok_or_else(|| Error::UnknownId(format!("{d} in ι1")))?,
            i2.object(&sd).ok_or_else(|| Error::UnknownId(format!("{d} in ι2")))?,
        );
        let mut next = done.clone();
        next.push(d.clone());
        next.sort();
        let new_labels: Vec<&Label> =
            labels.iter().filter(|l| l.len() > 1 && l.contains(&d) && is_sublabel(l, &next)).collect();
        let mut accepted = None;
        for cand in h.maps(o1, o2) {
            fam.maps.insert(d.clone(), cand.clone());
            let ws: Result<Vec<(Label, Arrow)>> = new_labels
                .iter()
                .map(|l| coherence_witness(h, i1, i2, &fam.maps, l).map(|w| ((*l).clone(), w)))
                .collect();
            if let Ok(ws) = ws {
                accepted = Some(ws);
                break;
            }
        }
        let ws = accepted.ok_or_else(|| Error::Invariant(format!("no coherent extension at point {d}")))?;
        fam.witnesses.extend(ws);
        done = next;
    }
    Ok(fam)
}

/// Checks every coherence square of a family.
pub fn validate_coherent_family(
    h: &SimplicialMorphism,
    i1: &InclusionSystem,
    i2: &InclusionSystem,
    fam: &CoherentFamily,
) -> ValidationReport {
    let mut r = ValidationReport::default();
    for (a, m) in &fam.maps {
        if !h.maps(&m.source, &m.target).contains(m) {
            r.push("membership", format!("m_{a} is not in H_1"));
        }
    }
    for (c, w) in &fam.witnesses {
        if !h.maps(&w.source, &w.target).contains(w) {
            r.push("membership", format!("witness over {{{}}} is not in H", label_string(c)));
        }
        for a in c {
            let s = vec![a.clone()];
            let ok = match (fam.maps.get(a), i1.map(&s, c), i2.map(&s, c)) {
                (Some(m), Some(l1), Some(l2)) => l2.after(m).map(|x| x.map) == w.after(l1).map(|x| x.map),
                _ => false,
            };
            if !ok {
                r.push("square", format!("{{{a}}} ⊂ {{{}}}", label_string(c)));
            }
        }
    }
    r
}

/// Level groupoids over a finite index poset with join, and structure maps downwards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectiveGroupoidSystem {
    pub levels: BTreeMap<Name, Arc<ConcreteGroupoid>>,
    /// Pairs (i, j) with i ≤ j; reflexive pairs may be omitted.
    pub order: BTreeSet<(Name, Name)>,
    /// (i, j) with i < j: the structure map from level j onto level i.
    pub projections: BTreeMap<(Name, Name), Projection>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Projection {
    pub objects: BTreeMap<ObjId, ObjId>,
    pub elements: FnMap,
}

impl ProjectiveGroupoidSystem {
    pub fn leq(&self, i: &Name, j: &Name) -> bool {
        i == j || self.order.contains(&(i.clone(), j.clone()))
    }

    pub fn join(&self, i: &Name, j: &Name) -> Option<Name> {
        let ubs: Vec<&Name> = self.levels.keys().filter(|k| self.leq(i, k) && self.leq(j, k)).collect();
        ubs.iter().find(|k| ubs.iter().all(|u| self.leq(k, u))).map(|k| (*k).clone())
    }
}

pub fn project_system(p: &ProjectiveGroupoidSystem, i: &str) -> Result<Arc<ConcreteGroupoid>> {
    p.levels.get(i).cloned().ok_or_else(|| Error::UnknownId(i.to_string()))
}

/// Image of a level-j morphism under the structure map to level i, if well defined.
fn push_arrow(pr: &Projection, a: &Arrow) -> Option<Arrow> {
    let mut pairs = Vec::new();
    for (x, y) in a.map.pairs() {
        pairs.push((pr.elements.get(x)?.clone(), pr.elements.get(y)?.clone()));
    }
    Some(Arrow::new(pr.objects.get(&a.source)?.clone(), pr.objects.get(&a.target)?.clone(), FnMap::from_pairs(pairs)?))
}

pub fn validate_system(p: &ProjectiveGroupoidSystem) -> ValidationReport {
    let mut r = ValidationReport::default();
    let idx: Vec<&Name> = p.levels.keys().collect();
    for (i, j) in &p.order {
        if !p.levels.contains_key(i) || !p.levels.contains_key(j) {
            r.push("unknown index", format!("({i},{j})"));
        }
    }
    for a in &idx {
        for b in &idx {
            if a != b && p.leq(a, b) && p.leq(b, a) {
                r.push("order", format!("{a} and {b} are mutually below each other"));
            }
            for c in &idx {
                if p.leq(a, b) && p.leq(b, c) && !p.leq(a, c) {
                    r.push("order", format!("{a} ≤ {b} ≤ {c} but not {a} ≤ {c}"));
                }
            }
            if p.join(a, b).is_none() {
                r.push("join", format!("{a} ∨ {b} missing"));
            }
        }
    }
    for (i, j) in &p.order {
        if i == j {
            continue;
        }
        let Some(pr) = p.projections.get(&(i.clone(), j.clone())) else {
            r.push("projection missing", format!("{j} → {i}"));
            continue;
        };
        let (Some(li), Some(lj)) = (p.levels.get(i), p.levels.get(j)) else { continue };
        let img = pr.elements.image();
        let all_i: BTreeSet<_> = li.objects().values().flatten().cloned().collect();
        if img != all_i {
            r.push("surjectivity", format!("{j} → {i} does not cover the elements"));
        }
        for a in lj.morphisms().iter() {
            match push_arrow(pr, a) {
                Some(b) if li.morphisms().contains(&b) => {}
                _ => {
                    r.push("functoriality", format!("{j} → {i} does not carry {}->{} to a morphism", a.source, a.target));
                    break;
                }
            }
        }
    }
    for (i, j) in &p.order {
        for (j2, k) in &p.order {
            if j2 != j || i == j || j == k {
                continue;
            }
            let (Some(a), Some(b), Some(c)) = (
                p.projections.get(&(i.clone(), j.clone())),
                p.projections.get(&(j.clone(), k.clone())),
                p.projections.get(&(i.clone(), k.clone())),
            ) else {
                continue;
            };
            if a.elements.after(&b.elements).as_ref() != Some(&c.elements) {
                r.push("composition", format!("π_{i},{j} ∘ π_{j},{k} ≠ π_{i},{k}"));
            }
        }
    }
    r
}
