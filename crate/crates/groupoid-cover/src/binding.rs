//! From a finite 1-analysable cover to its binding simplicial groupoid, and back: the
//! cover C(𝒢) built over an encoding of 𝒢.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigUint;

use crate::error::{pre, Error, Result};
use crate::fixtures::{default_copy, subsets_up_to};
use crate::groupoid::ConcreteGroupoid;
use crate::map::{close_group, Arrow, ArrowSet, FnMap};
use crate::name::{is_sublabel, label_string, Elem, Label, Name, ObjId};
use crate::simplicial::{
    build_inclusion_system, check_disjoint_union_property, find_coherent_family, validate_simplicial, CoherentFamily,
    InclusionSystem, SimplicialGroupoid, SimplicialMorphism, SystemSeed,
};
use crate::structure::{
    automorphism_chain, check_stable_embedding, check_stable_embedding_with, induced, preserves_relations, restrict_structure, Constraints,
    EmbeddingReport, FiberMap, MultiSortedStructure, RestrictSpec,
};

/// How Γ_c̄ is computed from a cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GammaMode {
    /// Restriction of Aut(M/𝕌) to S_c̄.
    #[default]
    Projected,
    /// Aut over 𝕌 of the structure induced on 𝕌 ∪ S_c̄ with parameters c̄ and orbit relations.
    Restricted,
}

/// Γ_c̄ ≤ Sym(S_c̄) for every c̄ up to `max_degree`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberGroups {
    pub points: Vec<Name>,
    pub fibers: BTreeMap<Name, Vec<Elem>>,
    pub groups: BTreeMap<Label, Vec<FnMap>>,
    pub max_degree: usize,
}

impl FiberGroups {
    pub fn fiber_over(&self, c: &[Name]) -> Vec<Elem> {
        let mut v: Vec<Elem> = c.iter().flat_map(|a| self.fibers[a].iter().cloned()).collect();
        v.sort();
        v
    }

    pub fn labels(&self) -> Vec<Label> {
        subsets_up_to(&self.points, self.max_degree)
    }
}

pub fn fiber_groups(m: &MultiSortedStructure, max_degree: usize, mode: GammaMode, orbit_arity: usize) -> Result<FiberGroups> {
    let f = m.fiber.as_ref().ok_or_else(|| pre("structure has no fibre map"))?;
    let points = f.a_set.clone();
    if max_degree == 0 {
        return Err(pre("max degree must be at least 1"));
    }
    let max_degree = max_degree.min(points.len());
    let fibers: BTreeMap<Name, Vec<Elem>> = points.iter().map(|a| (a.clone(), f.fiber(a))).collect();
    let mut fg = FiberGroups { points: points.clone(), fibers, groups: BTreeMap::new(), max_degree };
    let labels = fg.labels();
    match mode {
        GammaMode::Projected => {
            let chain = automorphism_chain(m, &Constraints::fix_base(m))?;
            for l in labels {
                let s = fg.fiber_over(&l);
                let gens: Vec<FnMap> = chain.generators.iter().map(|g| g.restrict(&s).expect("total")).collect();
                fg.groups.insert(l, close_group(&gens, &s));
            }
        }
        GammaMode::Restricted => {
            let mut sorts: Vec<Name> = m.base_sorts.iter().cloned().collect();
            sorts.push(f.s_sort.clone());
            for l in labels {
                let s = fg.fiber_over(&l);
                let spec = RestrictSpec {
                    sorts: sorts.clone(),
                    elements: Some(s.iter().cloned().collect()),
                    params: l.clone(),
                    orbit_arity,
                };
                let r = restrict_structure(m, &spec)?;
                let chain = automorphism_chain(&r, &Constraints::fix_base(&r))?;
                let gens: Vec<FnMap> = chain.generators.iter().map(|g| g.restrict(&s).expect("total")).collect();
                fg.groups.insert(l, close_group(&gens, &s));
            }
        }
    }
    Ok(fg)
}

/// A σ ∈ Γ_c̄ that is not the restriction of any element of Γ_d̄ (c̄ ⊂ d̄, one point more).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalEmbeddingFailure {
    pub small: Label,
    pub large: Label,
    pub witness: FnMap,
}

pub fn check_local_embeddedness(fg: &FiberGroups) -> Option<LocalEmbeddingFailure> {
    for (d, gd) in &fg.groups {
        for a in d {
            if d.len() < 2 {
                continue;
            }
            let c: Label = d.iter().filter(|x| *x != a).cloned().collect();
            let s = fg.fiber_over(&c);
            let image: BTreeSet<FnMap> = gd.iter().map(|g| g.restrict(&s).expect("total")).collect();
            if let Some(w) = fg.groups[&c].iter().find(|g| !image.contains(*g)) {
                return Some(LocalEmbeddingFailure { small: c, large: d.clone(), witness: w.clone() });
            }
        }
    }
    None
}

/// Families (σ_a) with ∪_{a∈c̄} σ_a ∈ Γ_c̄ for every |c̄| ≤ k, glued into maps on S.
pub fn compatible_families(fg: &FiberGroups, k: usize) -> Result<Vec<FnMap>> {
    let k = k.min(fg.points.len());
    if k == 0 || k > fg.max_degree {
        return Err(pre(format!("depth {k} outside 1..={}", fg.max_degree)));
    }
    let sets: BTreeMap<&Label, BTreeSet<&FnMap>> = fg.groups.iter().map(|(l, g)| (l, g.iter().collect())).collect();
    let mut out = Vec::new();
    let mut chosen: Vec<FnMap> = Vec::new();
    fn go(
        fg: &FiberGroups,
        sets: &BTreeMap<&Label, BTreeSet<&FnMap>>,
        k: usize,
        i: usize,
        chosen: &mut Vec<FnMap>,
        out: &mut Vec<FnMap>,
    ) {
        if i == fg.points.len() {
            let all = chosen.iter().fold(FnMap::default(), |acc, m| acc.union(m).expect("disjoint fibres"));
            out.push(all);
            return;
        }
        let p = &fg.points[i];
        for cand in &fg.groups[&vec![p.clone()]] {
            chosen.push(cand.clone());
            let mut ok = true;
            // every c̄ ⊆ points[..=i] containing p with |c̄| ≤ k
            let n = i;
            'sub: for mask in 0u64..(1u64 << n) {
                if mask.count_ones() as usize + 1 > k {
                    continue;
                }
                if mask == 0 {
                    continue;
                }
                let mut idx: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
                idx.push(i);
                let l = crate::name::label(idx.iter().map(|&j| fg.points[j].clone()));
                let m = idx.iter().fold(FnMap::default(), |acc, &j| acc.union(&chosen[j]).expect("disjoint"));
                if !sets[&l].contains(&m) {
                    ok = false;
                    break 'sub;
                }
            }
            if ok {
                go(fg, sets, k, i + 1, chosen, out);
            }
            chosen.pop();
        }
    }
    go(fg, &sets, k, 0, &mut chosen, &mut out);
    out.sort();
    Ok(out)
}

/// The group of compatible families up to depth k, composed into maps on S.
#[derive(Clone, Debug)]
pub struct ProjectiveLimit {
    pub depth: usize,
    pub elements: Vec<FnMap>,
}

impl ProjectiveLimit {
    pub fn order(&self) -> usize {
        self.elements.len()
    }
}

pub fn projective_limit_aut(e: &BindingExtraction, k: usize) -> Result<ProjectiveLimit> {
    if k == 0 {
        return Err(pre("depth must be at least 1"));
    }
    let fg = if k <= e.fiber_groups.max_degree {
        e.fiber_groups.clone()
    } else {
        fiber_groups(&e.cover, k, e.mode, e.orbit_arity)?
    };
    let k = k.min(fg.points.len());
    Ok(ProjectiveLimit { depth: k, elements: compatible_families(&fg, k)? })
}

/// Aut(M/𝕌) on S, by enumeration.
pub fn global_fiber_group(m: &MultiSortedStructure) -> Result<Vec<FnMap>> {
    let f = m.fiber.as_ref().ok_or_else(|| pre("structure has no fibre map"))?;
    let s = m.sort(&f.s_sort).cloned().unwrap_or_default();
    let chain = automorphism_chain(m, &Constraints::fix_base(m))?;
    let gens: Vec<FnMap> = chain.generators.iter().map(|g| g.restrict(&s).expect("total")).collect();
    Ok(close_group(&gens, &s))
}

/// One formal copy O_c̄ per label with Aut(O_c̄) = ρ Γ_c̄ ρ⁻¹ and inclusions
/// ρ_d̄ γ|S_c̄ ρ_c̄⁻¹ (γ ∈ Γ_d̄). Returns the copy maps ρ_c̄ : S_c̄ → O_c̄.
pub fn simplicial_from_fiber_groups(fg: &FiberGroups) -> Result<(SimplicialGroupoid, BTreeMap<Label, (ObjId, FnMap)>)> {
    let labels = fg.labels();
    let copies: BTreeMap<Label, (ObjId, FnMap)> =
        labels.iter().map(|l| (l.clone(), default_copy(l, &fg.fiber_over(l)))).collect();
    let mut degrees = BTreeMap::new();
    for n in 1..=fg.max_degree {
        let mut objects = BTreeMap::new();
        let mut component_of = BTreeMap::new();
        let mut component_label = BTreeMap::new();
        let mut morphisms = Vec::new();
        for l in labels.iter().filter(|l| l.len() == n) {
            let cid = Name::from(label_string(l));
            let (o, rho) = &copies[l];
            let inv = rho.inverse().expect("copy is injective");
            objects.insert(o.clone(), rho.image().into_iter().collect::<Vec<_>>());
            component_of.insert(o.clone(), cid.clone());
            component_label.insert(cid, l.clone());
            for g in &fg.groups[l] {
                morphisms.push(Arrow::new(o.clone(), o.clone(), rho.after(&g.after(&inv).expect("total")).expect("total")));
            }
        }
        degrees.insert(n, Arc::new(ConcreteGroupoid::from_parts(objects, component_of, component_label, morphisms)?));
    }
    let mut inclusions: BTreeMap<(usize, usize), Vec<Arrow>> = BTreeMap::new();
    for c in &labels {
        let sc = fg.fiber_over(c);
        let (oc, rc) = &copies[c];
        let rc_inv = rc.inverse().expect("injective");
        for d in labels.iter().filter(|d| d.len() > c.len() && is_sublabel(c, d)) {
            let (od, rd) = &copies[d];
            for g in &fg.groups[d] {
                let gc = g.restrict(&sc).expect("total");
                let m = rd.after(&gc.after(&rc_inv).expect("total")).expect("total");
                inclusions.entry((c.len(), d.len())).or_default().push(Arrow::new(oc.clone(), od.clone(), m));
            }
        }
    }
    let inclusions = inclusions.into_iter().map(|(k, v)| (k, ArrowSet::new(v))).collect();
    Ok((SimplicialGroupoid::new(fg.points.clone(), degrees, inclusions)?, copies))
}

/// A new object X with representative R_X and a bijection t_X : X → R_X.
#[derive(Clone, Debug)]
pub struct Transported {
    pub id: ObjId,
    pub rep: ObjId,
    pub transport: FnMap,
}

/// Adds objects carried along bijections: Hom'(X,Y) = t_Y⁻¹ Hom(R_X,R_Y) t_X, and the same
/// for inclusions, with t the identity on old objects.
pub fn extend_transported(sg: &SimplicialGroupoid, new: &[Transported]) -> Result<SimplicialGroupoid> {
    let mut rep: BTreeMap<ObjId, (ObjId, Option<FnMap>)> = BTreeMap::new();
    for g in sg.degrees().values() {
        for o in g.object_ids() {
            rep.insert(o.clone(), (o.clone(), None));
        }
    }
    for t in new {
        if rep.contains_key(&t.id) {
            return Err(pre(format!("object {} already exists", t.id)));
        }
        let re = sg.elements(&t.rep)?;
        let img = t.transport.image();
        if img.len() != re.len() || !re.iter().all(|e| img.contains(e)) || !t.transport.is_injective() {
            return Err(pre(format!("transport of {} is not a bijection onto {}", t.id, t.rep)));
        }
        rep.insert(t.id.clone(), (t.rep.clone(), Some(t.transport.clone())));
    }
    let conj = |x: &ObjId, y: &ObjId, m: &FnMap| -> FnMap {
        let (_, tx) = &rep[x];
        let (_, ty) = &rep[y];
        let inner = match tx {
            Some(t) => m.after(t).expect("transport total"),
            None => m.clone(),
        };
        match ty {
            Some(t) => t.inverse().expect("bijection").after(&inner).expect("total"),
            None => inner,
        }
    };
    let mut by_rep: BTreeMap<ObjId, Vec<ObjId>> = BTreeMap::new();
    for (o, (r, _)) in &rep {
        by_rep.entry(r.clone()).or_default().push(o.clone());
    }
    let mut degrees = BTreeMap::new();
    for (&n, g) in sg.degrees() {
        let mut objects = g.objects().clone();
        let mut component_of = g.component_map().clone();
        for t in new.iter().filter(|t| g.has_object(&t.rep)) {
            objects.insert(t.id.clone(), t.transport.domain().cloned().collect());
            component_of.insert(t.id.clone(), g.component_of(&t.rep)?.clone());
        }
        let mut morphisms = Vec::new();
        for a in g.morphisms().iter() {
            for x in &by_rep[&a.source] {
                for y in &by_rep[&a.target] {
                    morphisms.push(Arrow::new(x.clone(), y.clone(), conj(x, y, &a.map)));
                }
            }
        }
        degrees.insert(n, Arc::new(ConcreteGroupoid::from_parts(objects, component_of, g.components().clone(), morphisms)?));
    }
    let mut inclusions = BTreeMap::new();
    for (&k, set) in sg.inclusions() {
        let mut out = Vec::new();
        for a in set.iter() {
            for x in &by_rep[&a.source] {
                for y in &by_rep[&a.target] {
                    out.push(Arrow::new(x.clone(), y.clone(), conj(x, y, &a.map)));
                }
            }
        }
        inclusions.insert(k, ArrowSet::new(out));
    }
    SimplicialGroupoid::new(sg.base().to_vec(), degrees, inclusions)
}

#[derive(Clone, Copy, Debug)]
pub struct ExtractOptions {
    pub max_degree: Option<usize>,
    pub mode: GammaMode,
    pub orbit_arity: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { max_degree: None, mode: GammaMode::Projected, orbit_arity: 2 }
    }
}

/// The binding simplicial groupoid of a cover and its extension by the S_c̄.
#[derive(Clone, Debug)]
pub struct BindingExtraction {
    pub cover: MultiSortedStructure,
    pub mode: GammaMode,
    pub orbit_arity: usize,
    pub fiber_groups: FiberGroups,
    pub groupoid_in_u: Arc<SimplicialGroupoid>,
    pub extension: Arc<SimplicialGroupoid>,
    /// ρ_c̄ : S_c̄ → O_c̄.
    pub copies: BTreeMap<Label, (ObjId, FnMap)>,
    pub s_objects: BTreeMap<Label, ObjId>,
    /// Hom(O_c̄, S_c̄) in the extension (images tagged, see [`untag_map`]).
    pub embedding_family: BTreeMap<Label, Vec<Arrow>>,
}

impl BindingExtraction {
    /// The set-theoretic system on the S_c̄ objects of the extension.
    pub fn set_system(&self) -> InclusionSystem {
        let mut sys = InclusionSystem { points: self.fiber_groups.points.clone(), ..Default::default() };
        sys.points.sort();
        for (l, o) in &self.s_objects {
            sys.chosen.insert(l.clone(), o.clone());
        }
        for (c, oc) in &self.s_objects {
            let sc = self.fiber_groups.fiber_over(c);
            for (d, od) in &self.s_objects {
                if d.len() > c.len() && is_sublabel(c, d) {
                    let m = FnMap::from_pairs(sc.iter().map(|x| (tag_elem(c, x), tag_elem(d, x)))).expect("distinct");
                    sys.maps.insert((c.clone(), d.clone()), Arrow::new(oc.clone(), od.clone(), m));
                }
            }
        }
        sys
    }
}

/// Element of the extra object over c̄ standing for e; extra objects over different labels
/// overlap as sets, and groupoid objects must be disjoint.
pub fn tag_elem(l: &[Name], e: &str) -> Elem {
    Name::from(format!("{}@{e}", label_string(l)))
}

pub fn untag_elem(e: &str) -> Elem {
    Name::from(e.split_once('@').map_or(e, |(_, x)| x))
}

/// `m` with every domain and image element untagged.
pub fn untag_map(m: &FnMap) -> FnMap {
    m.map_names(|x| untag_elem(x), |y| untag_elem(y))
}

/// t(tag(x)) = m(x).
fn tagged_transport(l: &[Name], m: &FnMap) -> FnMap {
    FnMap::from_pairs(m.pairs().iter().map(|(x, y)| (tag_elem(l, x), y.clone()))).expect("distinct")
}

pub fn s_object_id(l: &[Name]) -> ObjId {
    Name::from(format!("S[{}]", label_string(l)))
}

pub fn extract_binding_simplicial_groupoid(m: &MultiSortedStructure, opts: &ExtractOptions) -> Result<BindingExtraction> {
    let rep = crate::structure::validate_structure(m);
    if !rep.is_valid() {
        return Err(pre(format!("invalid structure: {:?}", rep.violations.first())));
    }
    let f = m.fiber.as_ref().ok_or_else(|| pre("structure has no fibre map"))?;
    let k = opts.max_degree.unwrap_or(f.a_set.len());
    let fg = fiber_groups(m, k, opts.mode, opts.orbit_arity)?;
    if let Some(x) = check_local_embeddedness(&fg) {
        return Err(pre(format!(
            "local stable embeddedness fails: {:?} on S over {{{}}} does not lift to {{{}}}",
            x.witness.pairs(),
            label_string(&x.small),
            label_string(&x.large)
        )));
    }
    let (sg, copies) = simplicial_from_fiber_groups(&fg)?;
    let new: Vec<Transported> = copies
        .iter()
        .map(|(l, (o, rho))| Transported { id: s_object_id(l), rep: o.clone(), transport: tagged_transport(l, rho) })
        .collect();
    let ext = extend_transported(&sg, &new)?;
    let r = validate_simplicial(&ext);
    if !r.is_valid() {
        return Err(Error::Invariant(format!("extension is not a simplicial groupoid: {:?}", r.violations.first())));
    }
    let s_objects: BTreeMap<Label, ObjId> = copies.keys().map(|l| (l.clone(), s_object_id(l))).collect();
    let mut embedding_family = BTreeMap::new();
    for (l, (o, _)) in &copies {
        embedding_family.insert(l.clone(), ext.maps(o, &s_objects[l])?.to_vec());
    }
    Ok(BindingExtraction {
        cover: m.clone(),
        mode: opts.mode,
        orbit_arity: opts.orbit_arity,
        fiber_groups: fg,
        groupoid_in_u: Arc::new(sg),
        extension: Arc::new(ext),
        copies,
        s_objects,
        embedding_family,
    })
}

// ---------------------------------------------------------------- encoding of 𝒢 in 𝕌

pub const SORT_POINT: &str = "gA";
pub const SORT_ELEM: &str = "gE";
pub const SORT_OBJ: &str = "gOb";
pub const SORT_MOR: &str = "gMor";
pub const SORT_INC: &str = "gInc";

pub fn obj_code(o: &str) -> Elem {
    Name::from(format!("ob:{o}"))
}

/// The simplicial groupoid as a structure: points, elements, objects, morphisms, inclusions.
pub fn encode_simplicial(sg: &SimplicialGroupoid, point_sort: &str) -> MultiSortedStructure {
    let mut m = MultiSortedStructure::default();
    m.add_sort(point_sort, sg.base().to_vec());
    let mut elems = Vec::new();
    let mut objs = Vec::new();
    let mut elem_t = Vec::new();
    let mut over_t = Vec::new();
    let mut same_t = Vec::new();
    let mut deg: BTreeMap<usize, Vec<Vec<Elem>>> = BTreeMap::new();
    for (&n, g) in sg.degrees() {
        for (o, es) in g.objects() {
            let oc = obj_code(o);
            objs.push(oc.clone());
            deg.entry(n).or_default().push(vec![oc.clone()]);
            for e in es {
                elems.push(e.clone());
                elem_t.push(vec![e.clone(), oc.clone()]);
            }
            let c = g.component_of(o).expect("object has a component");
            for a in g.label(c).expect("labelled") {
                over_t.push(vec![oc.clone(), a.clone()]);
            }
            for o2 in g.objects_in(c) {
                same_t.push(vec![oc.clone(), obj_code(&o2)]);
            }
        }
    }
    m.add_sort(SORT_ELEM, elems);
    m.add_sort(SORT_OBJ, objs);
    let mut mors = Vec::new();
    let (mut src, mut tgt, mut graph) = (Vec::new(), Vec::new(), Vec::new());
    for g in sg.degrees().values() {
        for (s, t) in g.morphisms().pairs() {
            for (k, a) in g.morphisms().between(&s, &t).iter().enumerate() {
                let code = Name::from(format!("mor:{s}>{t}#{k}"));
                mors.push(code.clone());
                src.push(vec![code.clone(), obj_code(&s)]);
                tgt.push(vec![code.clone(), obj_code(&t)]);
                for (x, y) in a.map.pairs() {
                    graph.push(vec![code.clone(), x.clone(), y.clone()]);
                }
            }
        }
    }
    let mut incs = Vec::new();
    let (mut isrc, mut itgt, mut igraph) = (Vec::new(), Vec::new(), Vec::new());
    for set in sg.inclusions().values() {
        for (s, t) in set.pairs() {
            for (k, a) in set.between(&s, &t).iter().enumerate() {
                let code = Name::from(format!("inc:{s}>{t}#{k}"));
                incs.push(code.clone());
                isrc.push(vec![code.clone(), obj_code(&s)]);
                itgt.push(vec![code.clone(), obj_code(&t)]);
                for (x, y) in a.map.pairs() {
                    igraph.push(vec![code.clone(), x.clone(), y.clone()]);
                }
            }
        }
    }
    m.add_sort(SORT_MOR, mors);
    m.add_sort(SORT_INC, incs);
    m.add_relation("elem", &[SORT_ELEM, SORT_OBJ], elem_t);
    m.add_relation("over", &[SORT_OBJ, point_sort], over_t);
    m.add_relation("same", &[SORT_OBJ, SORT_OBJ], same_t);
    for (n, t) in deg {
        m.add_relation(&format!("deg{n}"), &[SORT_OBJ], t);
    }
    m.add_relation("src", &[SORT_MOR, SORT_OBJ], src);
    m.add_relation("tgt", &[SORT_MOR, SORT_OBJ], tgt);
    m.add_relation("graph", &[SORT_MOR, SORT_ELEM, SORT_ELEM], graph);
    m.add_relation("isrc", &[SORT_INC, SORT_OBJ], isrc);
    m.add_relation("itgt", &[SORT_INC, SORT_OBJ], itgt);
    m.add_relation("igraph", &[SORT_INC, SORT_ELEM, SORT_ELEM], igraph);
    for s in [point_sort, SORT_ELEM, SORT_OBJ, SORT_MOR, SORT_INC] {
        m.base_sorts.insert(Name::from(s));
    }
    m
}

// ---------------------------------------------------------------- the cover C(𝒢)

/// Result of building C(𝒢): O_* fibred over the points, morphism sorts M_*^{(n)} (both
/// directions) and inclusion sorts N_*^{(i,j)}, over the encoding of 𝒢.
#[derive(Clone, Debug)]
pub struct CoverConstruction {
    pub source_groupoid: Arc<SimplicialGroupoid>,
    pub inclusion_system: InclusionSystem,
    pub tag: String,
    pub point_sort: Name,
    /// c̄ ↦ (o_c̄, f_c̄ : O_{*,c̄} → o_c̄).
    pub copies: BTreeMap<Label, (ObjId, FnMap)>,
    pub result: MultiSortedStructure,
    pub base_elements: BTreeSet<Elem>,
    /// 𝒢 extended by the objects O_{*,c̄}.
    pub extension: Arc<SimplicialGroupoid>,
    pub ostar_objects: BTreeMap<Label, ObjId>,
}

impl CoverConstruction {
    pub fn ostar_sort(&self) -> Name {
        Name::from(format!("Ostar{}", self.tag))
    }

    pub fn ostar(&self, c: &[Name]) -> Vec<Elem> {
        let mut v: Vec<Elem> = self.copies[c].1.domain().cloned().collect();
        v.sort();
        v
    }

    pub fn non_base_sorts(&self) -> BTreeSet<Name> {
        self.result.sorts.iter().map(|(s, _)| s.clone()).filter(|s| !self.result.base_sorts.contains(s)).collect()
    }

    /// Elements of base ∪ O_{*,c̄} ∪ the map codes whose O_*-elements all lie in O_{*,c̄}.
    pub fn elements_over(&self, c: &[Name]) -> BTreeSet<Elem> {
        let os: BTreeSet<Elem> = self.ostar(c).into_iter().collect();
        let all_os: BTreeSet<Elem> = self.result.sort(&self.ostar_sort()).cloned().unwrap_or_default().into_iter().collect();
        let mut keep: BTreeSet<Elem> = self.base_elements.clone();
        keep.extend(os.iter().cloned());
        let mut bad: BTreeSet<Elem> = BTreeSet::new();
        let mut codes: BTreeSet<Elem> = BTreeSet::new();
        for (n, r) in &self.result.relations {
            if !is_code_relation(n) {
                continue;
            }
            for t in &r.tuples {
                codes.insert(t[0].clone());
                if t[1..].iter().any(|e| all_os.contains(e) && !os.contains(e)) {
                    bad.insert(t[0].clone());
                }
            }
        }
        keep.extend(codes.difference(&bad).cloned());
        keep
    }
}

fn is_code_relation(n: &str) -> bool {
    n.starts_with("m") || n.starts_with("n")
}

pub fn ostar_object_id(tag: &str, l: &[Name]) -> ObjId {
    Name::from(format!("O*{tag}[{}]", label_string(l)))
}

/// Checks the hypotheses of the construction.
pub fn cover_preconditions(sg: &SimplicialGroupoid) -> Result<()> {
    let r = validate_simplicial(sg);
    if !r.is_valid() {
        return Err(pre(format!("invalid simplicial groupoid: {:?}", r.violations.first())));
    }
    if let Err(cx) = check_disjoint_union_property(sg) {
        return Err(pre(format!("disjoint union property fails at {} ({})", cx.target, cx.reason)));
    }
    for g in sg.degrees().values() {
        let f = g.is_finitely_faithful();
        if !f.faithful {
            return Err(pre("groupoid is not finitely faithful"));
        }
    }
    Ok(())
}

pub fn build_cover_from_simplicial(sg: Arc<SimplicialGroupoid>, seed: &SystemSeed, tag: &str) -> Result<CoverConstruction> {
    build_cover_with(sg, seed, tag, SORT_POINT)
}

/// As [`build_cover_from_simplicial`], naming the sort of points (to share it with another cover).
/// Non-base sorts and O_* elements carry `tag`.
pub fn build_cover_with(
    sg: Arc<SimplicialGroupoid>,
    seed: &SystemSeed,
    tag: &str,
    point_sort: &str,
) -> Result<CoverConstruction> {
    cover_preconditions(&sg)?;
    let sys = build_inclusion_system(&sg, seed)?;
    let star = |x: &Elem| Name::from(format!("*{tag}:{x}"));
    let mut f_point: BTreeMap<Name, FnMap> = BTreeMap::new();
    for a in sg.base() {
        let o = sys.object(&[a.clone()]).ok_or_else(|| Error::Invariant(format!("no object over {a}")))?;
        let es = sg.elements(o)?;
        f_point.insert(a.clone(), FnMap::from_pairs(es.iter().map(|x| (star(x), x.clone()))).expect("distinct"));
    }
    let mut copies = BTreeMap::new();
    for l in sg.labels() {
        let o = sys.object(&l).ok_or_else(|| Error::Invariant(format!("no object over {{{}}}", label_string(&l))))?;
        let mut pairs = Vec::new();
        for a in &l {
            let fa = &f_point[a];
            let leg = if l.len() == 1 {
                fa.clone()
            } else {
                let i = sys.map(&[a.clone()], &l).ok_or_else(|| Error::Invariant("missing inclusion".into()))?;
                i.map.after(fa).ok_or_else(|| Error::Invariant("inclusion leg".into()))?
            };
            pairs.extend(leg.pairs().iter().cloned());
        }
        let f = FnMap::from_pairs(pairs).ok_or_else(|| Error::Invariant("legs overlap".into()))?;
        let es = sg.elements(o)?;
        if f.len() != es.len() || !f.is_injective() {
            return Err(Error::Invariant(format!("f over {{{}}} is not a bijection", label_string(&l))));
        }
        copies.insert(l, (o.clone(), f));
    }
    let base = encode_simplicial(&sg, point_sort);
    let mut m = base.clone();
    let ostar_sort = format!("Ostar{tag}");
    let all_star: Vec<Elem> = f_point.values().flat_map(|f| f.domain().cloned()).collect();
    m.add_sort(&ostar_sort, all_star);
    m.fiber = Some(FiberMap {
        s_sort: Name::from(ostar_sort.as_str()),
        a_sort: Name::from(point_sort),
        a_set: sg.base().to_vec(),
        map: f_point.iter().flat_map(|(a, f)| f.domain().map(move |x| (x.clone(), a.clone()))).collect(),
    });
    let mut msorts: BTreeMap<String, Vec<Elem>> = BTreeMap::new();
    let mut rels: BTreeMap<(String, bool), Vec<Vec<Elem>>> = BTreeMap::new();
    for (l, (o, f)) in &copies {
        let n = l.len();
        let g = sg.degree(n).ok_or_else(|| Error::Invariant(format!("degree {n}")))?;
        let comp = g.component_of(o)?;
        let ls = label_string(l);
        for x in g.objects_in(comp) {
            for (k, mu) in g.hom(o, &x)?.iter().enumerate() {
                let phi = mu.map.after(f).expect("total");
                let fwd = Name::from(format!("m{tag}:{ls}>{x}#{k}"));
                let back = Name::from(format!("mi{tag}:{ls}>{x}#{k}"));
                let sort = format!("M{n}{tag}");
                msorts.entry(sort.clone()).or_default().extend([fwd.clone(), back.clone()]);
                let r = rels.entry((format!("m{n}{tag}"), false)).or_default();
                r.extend(phi.pairs().iter().map(|(s, e)| vec![fwd.clone(), s.clone(), e.clone()]));
                let r = rels.entry((format!("mi{n}{tag}"), true)).or_default();
                r.extend(phi.pairs().iter().map(|(s, e)| vec![back.clone(), e.clone(), s.clone()]));
            }
        }
        for (d, (od, _)) in &copies {
            if !(d.len() > n && is_sublabel(l, d)) {
                continue;
            }
            let gd = sg.degree(d.len()).expect("degree");
            let cd = gd.component_of(od)?;
            for x in gd.objects_in(cd) {
                for (k, kappa) in sg.maps(o, &x)?.iter().enumerate() {
                    let phi = kappa.map.after(f).expect("total");
                    let code = Name::from(format!("n{tag}:{ls}>{x}#{k}"));
                    let sort = format!("N{n}.{}{tag}", d.len());
                    msorts.entry(sort).or_default().push(code.clone());
                    let r = rels.entry((format!("n{n}.{}{tag}", d.len()), false)).or_default();
                    r.extend(phi.pairs().iter().map(|(s, e)| vec![code.clone(), s.clone(), e.clone()]));
                }
            }
        }
    }
    for (s, mut es) in msorts {
        es.sort();
        es.dedup();
        m.add_sort(&s, es);
    }
    for ((r, back), tuples) in rels {
        let sort = if let Some(rest) = r.strip_prefix("mi") {
            format!("M{rest}")
        } else if let Some(rest) = r.strip_prefix('m') {
            format!("M{rest}")
        } else {
            format!("N{}", &r[1..])
        };
        let sig: Vec<&str> =
            if back { vec![sort.as_str(), SORT_ELEM, ostar_sort.as_str()] } else { vec![sort.as_str(), ostar_sort.as_str(), SORT_ELEM] };
        m.add_relation(&r, &sig, tuples);
    }
    let new: Vec<Transported> = copies
        .iter()
        .map(|(l, (o, f))| Transported { id: ostar_object_id(tag, l), rep: o.clone(), transport: tagged_transport(l, f) })
        .collect();
    let extension = extend_transported(&sg, &new)?;
    let ostar_objects = copies.keys().map(|l| (l.clone(), ostar_object_id(tag, l))).collect();
    let base_elements: BTreeSet<Elem> = base.elements().cloned().collect();
    Ok(CoverConstruction {
        source_groupoid: sg,
        inclusion_system: sys,
        tag: tag.to_string(),
        point_sort: Name::from(point_sort),
        copies,
        result: m,
        base_elements,
        extension: Arc::new(extension),
        ostar_objects,
    })
}

/// Aut(M/𝕌) restricted to a set of S-elements, as a permutation group.
pub fn projected_group(m: &MultiSortedStructure, on: &[Elem]) -> Result<Vec<FnMap>> {
    let chain = automorphism_chain(m, &Constraints::fix_base(m))?;
    let gens: Vec<FnMap> = chain.generators.iter().map(|g| g.restrict(on).expect("total")).collect();
    Ok(close_group(&gens, on))
}

#[derive(Clone, Debug)]
pub struct BindingCheck {
    pub label: Label,
    pub groupoid_group: Vec<FnMap>,
    pub structure_group: Vec<FnMap>,
    pub equal: bool,
}

/// Aut_{𝒢′}(O_{*,c̄}) against Aut(O_{*,c̄}/𝕌) computed on the cover.
pub fn verify_binding_statement(c: &CoverConstruction, l: &[Name]) -> Result<BindingCheck> {
    let lab: Label = crate::name::label(l.iter().cloned());
    let o = c.ostar_objects.get(&lab).ok_or_else(|| Error::UnknownId(format!("{{{}}}", label_string(&lab))))?;
    let mut gg: Vec<FnMap> = c.extension.degree(lab.len()).expect("degree").aut_group(o)?.iter().map(untag_map).collect();
    gg.sort();
    let sg = projected_group(&c.result, &c.ostar(&lab))?;
    Ok(BindingCheck { label: lab, equal: gg == sg, groupoid_group: gg, structure_group: sg })
}

#[derive(Clone, Debug)]
pub struct CoverCheck {
    pub base_order: BigUint,
    /// Exhaustive or generator lift search on the whole structure.
    pub lifts: EmbeddingReport,
    /// Lifts built from coherent families, one per generator of Aut(𝕌-part).
    pub coherent_lifts: usize,
    pub coherent_failures: usize,
    pub ok: bool,
}

/// Automorphisms of the 𝕌-part lift: by search, and by the coherent-family construction.
pub fn verify_cover(c: &CoverConstruction) -> Result<CoverCheck> {
    let base = induced(&c.result, &c.base_elements);
    let base = crate::structure::drop_sorts(
        &base,
        &base.sorts.iter().map(|(s, _)| s.clone()).filter(|s| !c.result.base_sorts.contains(s)).collect(),
    );
    let lifts = check_stable_embedding(&c.result, &base)?;
    let chain = automorphism_chain(&base, &Constraints::default())?;
    let mut fails = 0;
    for g in &chain.generators {
        match lift_via_coherent_family(c, g) {
            Ok(l) if preserves_relations(&c.result, &l) => {}
            _ => fails += 1,
        }
    }
    Ok(CoverCheck {
        base_order: chain.order.clone(),
        ok: lifts.embedded && fails == 0,
        lifts,
        coherent_lifts: chain.generators.len(),
        coherent_failures: fails,
    })
}

/// The simplicial automorphism induced by an automorphism σ of the encoding: all μ ∘ σ|_X.
pub fn induced_simplicial_morphism(sg: &Arc<SimplicialGroupoid>, sigma: &FnMap) -> Result<SimplicialMorphism> {
    let mut degrees = BTreeMap::new();
    for (&n, g) in sg.degrees() {
        let mut out = Vec::new();
        for (x, es) in g.objects() {
            let y = sigma
                .get(&obj_code(x))
                .and_then(|c| c.strip_prefix("ob:"))
                .ok_or_else(|| pre(format!("σ does not move object {x}")))?;
            let sx = sigma.restrict(es).ok_or_else(|| pre("σ undefined on an element"))?;
            let sx = Arrow::new(x.clone(), Name::from(y), sx);
            let comp = g.component_of(y)?;
            for z in g.objects_in(comp) {
                for mu in g.hom(y, &z)? {
                    out.push(mu.after(&sx).ok_or_else(|| pre("σ does not carry X onto σX"))?);
                }
            }
        }
        degrees.insert(n, ArrowSet::new(out));
    }
    SimplicialMorphism::new(sg.clone(), sg.clone(), degrees)
}

/// Lift of σ ∈ Aut(𝕌-part): ∪ f_a⁻¹ h_a f_a on O_* from a coherent family for H_σ, and the
/// induced action on map codes.
pub fn lift_via_coherent_family(c: &CoverConstruction, sigma: &FnMap) -> Result<FnMap> {
    let sg = &c.source_groupoid;
    let h = induced_simplicial_morphism(sg, sigma)?;
    let pi = |a: &Name| -> Result<Name> { sigma.get(a).cloned().ok_or_else(|| pre(format!("σ undefined at point {a}"))) };
    let pl = |l: &Label| -> Result<Label> { Ok(crate::name::label(l.iter().map(pi).collect::<Result<Vec<_>>>()?)) };
    // target system read along σ: object over c̄ is o_{σc̄}
    let sys = &c.inclusion_system;
    let mut moved = InclusionSystem { points: sys.points.clone(), ..Default::default() };
    for l in sys.chosen.keys() {
        moved.chosen.insert(l.clone(), sys.chosen[&pl(l)?].clone());
    }
    for (cd, _) in &sys.maps {
        let a = sys.maps.get(&(pl(&cd.0)?, pl(&cd.1)?)).ok_or_else(|| Error::Invariant("σ breaks the label poset".into()))?;
        moved.maps.insert(cd.clone(), a.clone());
    }
    let fam = find_coherent_family(&h, sys, &moved, &CoherentFamily::default())?;
    let mut lift = sigma.restrict(c.base_elements.iter()).ok_or_else(|| pre("σ is not total on 𝕌"))?;
    let mut on_star = FnMap::default();
    for (a, ha) in &fam.maps {
        let fa = &c.copies[&vec![a.clone()]].1;
        let fb = &c.copies[&vec![pi(a)?]].1;
        let part = fb.inverse().expect("bijection").after(&ha.map.after(fa).expect("total")).expect("total");
        on_star = on_star.union(&part).ok_or_else(|| Error::Invariant("fibre lifts overlap".into()))?;
    }
    let inv = on_star.inverse().ok_or_else(|| Error::Invariant("lift not injective".into()))?;
    lift = lift.union(&on_star).ok_or_else(|| Error::Invariant("lift overlaps 𝕌".into()))?;
    // codes: graph φ ↦ σ ∘ φ ∘ L⁻¹ (forward), or its mirror for inverse codes
    for (name, r) in &c.result.relations {
        if !is_code_relation(name) {
            continue;
        }
        let mut graphs: BTreeMap<Elem, Vec<(Elem, Elem)>> = BTreeMap::new();
        for t in &r.tuples {
            graphs.entry(t[0].clone()).or_default().push((t[1].clone(), t[2].clone()));
        }
        let by_graph: BTreeMap<Vec<(Elem, Elem)>, Elem> = graphs.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
        for (code, g) in &graphs {
            let mut img: Vec<(Elem, Elem)> = g
                .iter()
                .map(|(x, y)| {
                    let m = |e: &Elem| sigma.get(e).or_else(|| on_star.get(e)).cloned();
                    Some((m(x)?, m(y)?))
                })
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Invariant("code graph outside the lift".into()))?;
            img.sort();
            let target = by_graph
                .get(&img)
                .ok_or_else(|| Error::NoSolution(format!("no code for the image of {code}")))?;
            lift = lift.union(&FnMap::from_pairs([(code.clone(), target.clone())]).expect("pair")).ok_or_else(|| {
                Error::Invariant("code assigned twice".into())
            })?;
        }
    }
    let _ = inv;
    Ok(lift)
}

/// (𝕌, O_{*,c̄}) is stably embedded in (𝕌, O_{*,d̄}), both with the points of d̄ named:
/// the part over d̄ is only d̄-definable.
pub fn verify_local_embeddedness(c: &CoverConstruction, small: &[Name], large: &[Name]) -> Result<EmbeddingReport> {
    if !is_sublabel(small, large) {
        return Err(pre("c̄ must be contained in d̄"));
    }
    let sub = induced(&c.result, &c.elements_over(small));
    let amb = induced(&c.result, &c.elements_over(large));
    let named = Constraints { fix_elements: large.iter().cloned().collect(), ..Default::default() };
    check_stable_embedding_with(&amb, &sub, &named, &named)
}
