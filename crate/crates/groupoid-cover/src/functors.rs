//! Morphisms of covers, the functors G and C on isomorphisms, the natural isomorphisms
//! η and ε, and law checks.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigUint;

use crate::binding::{
    build_cover_with, extract_binding_simplicial_groupoid, tag_elem, BindingExtraction, CoverConstruction,
    ExtractOptions,
};
use crate::error::{pre, Error, Result};
use crate::map::{Arrow, ArrowSet, FnMap};
use crate::name::{label_string, Elem, Name};
use crate::report::ValidationReport;
use crate::simplicial::{
    find_coherent_family, validate_simplicial_morphism, CoherentFamily, SimplicialGroupoid, SimplicialMorphism,
    SystemSeed,
};
use crate::structure::{
    automorphism_chain, check_stable_embedding_with, isomorphisms, Constraints, EmbeddingReport, MultiSortedStructure,
    Relation,
};

pub const H_RELATION: &str = "h";

/// Two covers over a common 𝕌 joined by the graph of h : S₁ → S₂.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverMorphism {
    pub cover1: MultiSortedStructure,
    pub cover2: MultiSortedStructure,
    pub combined: MultiSortedStructure,
    pub h: FnMap,
}

impl CoverMorphism {
    pub fn new(cover1: MultiSortedStructure, cover2: MultiSortedStructure, h: FnMap) -> Result<Self> {
        let f1 = cover1.fiber.as_ref().ok_or_else(|| pre("first cover has no fibre map"))?;
        let f2 = cover2.fiber.as_ref().ok_or_else(|| pre("second cover has no fibre map"))?;
        let s1 = cover1.sort(&f1.s_sort).cloned().unwrap_or_default();
        let s2: BTreeSet<Elem> = cover2.sort(&f2.s_sort).cloned().unwrap_or_default().into_iter().collect();
        if h.len() != s1.len() || s1.iter().any(|x| h.get(x).is_none()) {
            return Err(pre("h is not defined on all of S₁"));
        }
        if !h.is_injective() || h.image() != s2 {
            return Err(pre("h is not a bijection S₁ → S₂"));
        }
        for (x, y) in h.pairs() {
            if f1.map.get(x) != f2.map.get(y) {
                return Err(pre(format!("h moves {x} to another fibre")));
            }
        }
        let mut combined = if cover1 == cover2 { cover1.clone() } else { cover1.merge(&cover2)? };
        combined.fiber = None;
        combined.relations.insert(
            Name::from(H_RELATION),
            Relation {
                signature: vec![f1.s_sort.clone(), f2.s_sort.clone()],
                tuples: h.pairs().iter().map(|(x, y)| vec![x.clone(), y.clone()]).collect(),
            },
        );
        Ok(CoverMorphism { cover1, cover2, combined, h })
    }

    pub fn identity(cover: &MultiSortedStructure) -> Result<Self> {
        let f = cover.fiber.as_ref().ok_or_else(|| pre("cover has no fibre map"))?;
        let s = cover.sort(&f.s_sort).cloned().unwrap_or_default();
        CoverMorphism::new(cover.clone(), cover.clone(), FnMap::identity(&s))
    }

    pub fn s1(&self) -> &[Elem] {
        let f = self.cover1.fiber.as_ref().expect("checked");
        self.cover1.sort(&f.s_sort).expect("sort")
    }
}

#[derive(Clone, Debug)]
pub struct CoverMorphismCheck {
    pub embedded1: EmbeddingReport,
    pub embedded2: EmbeddingReport,
    pub ok: bool,
}

/// Aut(cover_i / 𝕌_i) lifts to the combined structure over 𝕌₁ ∪ 𝕌₂, for i = 1, 2.
pub fn check_cover_morphism(cm: &CoverMorphism) -> Result<CoverMorphismCheck> {
    let lift = Constraints::fix_base(&cm.combined);
    let e1 = check_stable_embedding_with(&cm.combined, &cm.cover1, &Constraints::fix_base(&cm.cover1), &lift)?;
    let e2 = check_stable_embedding_with(&cm.combined, &cm.cover2, &Constraints::fix_base(&cm.cover2), &lift)?;
    Ok(CoverMorphismCheck { ok: e1.embedded && e2.embedded, embedded1: e1, embedded2: e2 })
}

/// `second ∘ first`; the middle covers must coincide.
pub fn compose(first: &CoverMorphism, second: &CoverMorphism) -> Result<CoverMorphism> {
    if first.cover2 != second.cover1 {
        return Err(pre("cover morphisms are not composable"));
    }
    let h = second.h.after(&first.h).ok_or_else(|| pre("maps are not composable"))?;
    CoverMorphism::new(first.cover1.clone(), second.cover2.clone(), h)
}

/// An isomorphism of the combined structures fixing 𝕌 pointwise and carrying h to h′.
#[derive(Clone, Debug)]
pub struct MorphismEquivalence {
    pub witness: FnMap,
}

pub fn morphism_equivalence(a: &CoverMorphism, b: &CoverMorphism) -> Result<Option<MorphismEquivalence>> {
    if a.combined.base_sorts != b.combined.base_sorts {
        return Ok(None);
    }
    let mut c = Constraints::fix_base(&a.combined);
    c.limit = Some(1);
    Ok(isomorphisms(&a.combined, &b.combined, &c).ok().and_then(|v| v.into_iter().next()).map(|w| MorphismEquivalence { witness: w }))
}

// ---------------------------------------------------------------- G

/// G(h)_n = {α₂ ∘ h_c̄ ∘ α₁}, α₁ ∈ Hom(O₁, S₁,c̄), α₂ ∈ Hom(S₂,c̄, O₂).
pub fn functor_g_on_morphism(cm: &CoverMorphism, e1: &BindingExtraction, e2: &BindingExtraction) -> Result<SimplicialMorphism> {
    if e1.cover != cm.cover1 || e2.cover != cm.cover2 {
        return Err(pre("extractions do not belong to the covers of the morphism"));
    }
    let mut degrees: BTreeMap<usize, Vec<Arrow>> = BTreeMap::new();
    for (l, s1) in &e1.s_objects {
        let Some(s2) = e2.s_objects.get(l) else { continue };
        let n = l.len();
        let g1 = e1.groupoid_in_u.degree(n).expect("degree");
        let g2 = e2.groupoid_in_u.degree(n).expect("degree");
        let hc = tagged_h(&cm.h, l, &e1.fiber_groups.fiber_over(l))?;
        for o1 in g1.objects_over(l) {
            for o2 in g2.objects_over(l) {
                for a1 in e1.extension.maps(&o1, s1)? {
                    let mid = Arrow::new(o1.clone(), s2.clone(), hc.after(&a1.map).expect("total"));
                    for a2 in e2.extension.maps(s2, &o2)? {
                        degrees.entry(n).or_default().push(a2.after(&mid).expect("composable"));
                    }
                }
            }
        }
    }
    let degrees = degrees.into_iter().map(|(n, v)| (n, ArrowSet::new(v))).collect();
    SimplicialMorphism::new(e1.groupoid_in_u.clone(), e2.groupoid_in_u.clone(), degrees)
}

fn tagged_h(h: &FnMap, l: &[Name], s: &[Elem]) -> Result<FnMap> {
    FnMap::from_pairs(
        s.iter()
            .map(|x| Ok((tag_elem(l, x), tag_elem(l, h.get(x).ok_or_else(|| pre(format!("h undefined at {x}")))?))))
            .collect::<Result<Vec<_>>>()?,
    )
    .ok_or_else(|| pre("h is not a function"))
}

// ---------------------------------------------------------------- C

/// C(H) for an isomorphism H : 𝒢₁ → 𝒢₂: h = ∪ f2_a⁻¹ h_a f1_a from a coherent family.
pub fn functor_c_on_morphism(h: &SimplicialMorphism, c1: &CoverConstruction, c2: &CoverConstruction) -> Result<CoverMorphism> {
    if !h.is_isomorphism() {
        return Err(pre("H is not an isomorphism"));
    }
    if *h.source != *c1.source_groupoid || *h.target != *c2.source_groupoid {
        return Err(pre("covers are not built from the source and target of H"));
    }
    let same = c1.result == c2.result;
    if !same && !c1.non_base_sorts().is_disjoint(&c2.non_base_sorts()) {
        return Err(pre("the two covers share sort names; build them with different tags"));
    }
    let fam = find_coherent_family(h, &c1.inclusion_system, &c2.inclusion_system, &CoherentFamily::default())?;
    let map = glue_family(&fam, c1, c2)?;
    CoverMorphism::new(c1.result.clone(), c2.result.clone(), map)
}

fn glue_family(fam: &CoherentFamily, c1: &CoverConstruction, c2: &CoverConstruction) -> Result<FnMap> {
    let mut out = FnMap::default();
    for (a, ha) in &fam.maps {
        let f1 = &c1.copies[&vec![a.clone()]].1;
        let f2 = &c2.copies[&vec![a.clone()]].1;
        let part = f2.inverse().expect("bijection").after(&ha.map.after(f1).expect("total")).expect("total");
        out = out.union(&part).ok_or_else(|| Error::Invariant("family maps overlap".into()))?;
    }
    Ok(out)
}

// ---------------------------------------------------------------- η and ε

#[derive(Clone, Debug)]
pub struct Eta {
    pub morphism: CoverMorphism,
    pub family: CoherentFamily,
    pub check: CoverMorphismCheck,
    pub aut_order: BigUint,
}

/// The cover C(E) with its point sort shared with M, as η needs.
pub fn cover_for_eta(e: &BindingExtraction, seed: &SystemSeed, tag: &str) -> Result<CoverConstruction> {
    let f = e.cover.fiber.as_ref().ok_or_else(|| pre("cover has no fibre map"))?;
    build_cover_with(e.groupoid_in_u.clone(), seed, tag, &f.a_sort)
}

/// η : M → C(E): coherent g_a : S_a → o_a against the copy system, η = f_a⁻¹ g_a.
pub fn build_eta(m: &MultiSortedStructure, e: &BindingExtraction, c: &CoverConstruction) -> Result<Eta> {
    if e.cover != *m {
        return Err(pre("extraction is not of this cover"));
    }
    if *c.source_groupoid != *e.groupoid_in_u {
        return Err(pre("cover is not built from the extracted groupoid"));
    }
    let h = SimplicialMorphism::identity(e.extension.clone());
    let fam = find_coherent_family(&h, &e.set_system(), &c.inclusion_system, &CoherentFamily::default())
        .map_err(|x| Error::Invariant(format!("no coherent family for η: {x}")))?;
    let mut eta = FnMap::default();
    for (a, ga) in &fam.maps {
        let fa = &c.copies[&vec![a.clone()]].1;
        let g = untag_domain(&ga.map);
        let part = fa.inverse().expect("bijection").after(&g).ok_or_else(|| Error::Invariant("η leg".into()))?;
        eta = eta.union(&part).ok_or_else(|| Error::Invariant("η legs overlap".into()))?;
    }
    let morphism = CoverMorphism::new(m.clone(), c.result.clone(), eta)?;
    let check = check_cover_morphism(&morphism)?;
    let aut_order = automorphism_chain(&morphism.combined, &Constraints::fix_base(&morphism.combined))?.order;
    Ok(Eta { morphism, family: fam, check, aut_order })
}

fn untag_domain(m: &FnMap) -> FnMap {
    m.map_names(|x| crate::binding::untag_elem(x), |y| y.clone())
}

#[derive(Clone, Debug)]
pub struct Epsilon {
    pub morphism: SimplicialMorphism,
    pub report: ValidationReport,
    pub isomorphism: bool,
}

/// ε : 𝒢 → E(C(𝒢)), ε_n = {g ∘ f}, f ∈ Hom_{𝒢′}(O₁, O_{*,c̄}), g ∈ Hom_{𝒢″}(S_c̄, O₂).
pub fn build_epsilon(sg: &Arc<SimplicialGroupoid>, c: &CoverConstruction, e: &BindingExtraction) -> Result<Epsilon> {
    if **sg != *c.source_groupoid || e.cover != c.result {
        return Err(pre("inputs are not a groupoid, its cover and the cover's extraction"));
    }
    let mut degrees: BTreeMap<usize, Vec<Arrow>> = BTreeMap::new();
    for (l, ostar) in &c.ostar_objects {
        let s = e.s_objects.get(l).ok_or_else(|| Error::UnknownId(format!("{{{}}} in extraction", label_string(l))))?;
        let n = l.len();
        for o1 in sg.objects_over(l) {
            for o2 in e.groupoid_in_u.objects_over(l) {
                for f in c.extension.maps(&o1, ostar)? {
                    let f = Arrow::new(o1.clone(), s.clone(), f.map.clone());
                    for g in e.extension.maps(s, &o2)? {
                        degrees.entry(n).or_default().push(g.after(&f).ok_or_else(|| Error::Invariant("ε legs".into()))?);
                    }
                }
            }
        }
    }
    let degrees = degrees.into_iter().map(|(n, v)| (n, ArrowSet::new(v))).collect();
    let morphism = SimplicialMorphism::new(sg.clone(), e.groupoid_in_u.clone(), degrees)?;
    let report = validate_simplicial_morphism(&morphism);
    let isomorphism = report.is_valid() && morphism.is_isomorphism() && all_objects_hit(&morphism);
    Ok(Epsilon { morphism, report, isomorphism })
}

fn all_objects_hit(h: &SimplicialMorphism) -> bool {
    h.source.degrees().iter().all(|(n, g)| {
        let set = h.degrees.get(n);
        g.object_ids().all(|o| set.map_or(false, |s| s.from_source(o).next().is_some()))
            && h.target.degree(*n).map_or(false, |t| t.object_ids().all(|o| set.map_or(false, |s| s.iter().any(|a| &a.target == o))))
    })
}

/// Conjugation by η carries Aut(S/𝕌) onto Aut(O_*/𝕌) elementwise.
pub fn eta_transports_groups(eta: &Eta) -> Result<bool> {
    let m1 = &eta.morphism.cover1;
    let m2 = &eta.morphism.cover2;
    let g1 = crate::binding::global_fiber_group(m1)?;
    let g2: BTreeSet<FnMap> = crate::binding::global_fiber_group(m2)?.into_iter().collect();
    let h = &eta.morphism.h;
    let inv = h.inverse().expect("bijection");
    let conj: BTreeSet<FnMap> = g1.iter().map(|g| h.after(&g.after(&inv).expect("total")).expect("total")).collect();
    Ok(conj == g2)
}

// ---------------------------------------------------------------- laws

/// A composable pair of simplicial isomorphisms 𝒢₁ → 𝒢₂ → 𝒢₃.
#[derive(Clone, Debug)]
pub struct LawCase {
    pub name: String,
    pub first: SimplicialMorphism,
    pub second: SimplicialMorphism,
}

#[derive(Clone, Debug, Default)]
pub struct LawReport {
    pub cases: usize,
    pub c_identity: usize,
    pub g_identity: usize,
    pub c_composition: usize,
    pub g_composition: usize,
    pub eta_naturality: usize,
    pub epsilon_naturality: usize,
    pub failures: Vec<String>,
}

impl LawReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn extract(m: &MultiSortedStructure) -> Result<BindingExtraction> {
    extract_binding_simplicial_groupoid(m, &ExtractOptions::default())
}

/// C(id) ≅ id, G(id) = id, both composition laws, and naturality of η and ε, per case.
pub fn check_functor_laws(corpus: &[LawCase]) -> Result<LawReport> {
    let mut r = LawReport { cases: corpus.len(), ..Default::default() };
    for case in corpus {
        let fail = |r: &mut LawReport, what: &str| r.failures.push(format!("{}: {what}", case.name));
        let g1 = case.first.source.clone();
        let g2 = case.first.target.clone();
        let g3 = case.second.target.clone();
        let seed = SystemSeed::default();
        let c1 = crate::binding::build_cover_from_simplicial(g1.clone(), &seed, "1")?;
        let c2 = crate::binding::build_cover_from_simplicial(g2.clone(), &seed, "2")?;
        let c3 = crate::binding::build_cover_from_simplicial(g3.clone(), &seed, "3")?;

        // C(id) ≅ id
        let cid = functor_c_on_morphism(&SimplicialMorphism::identity(g1.clone()), &c1, &c1)?;
        let id = CoverMorphism::identity(&c1.result)?;
        if morphism_equivalence(&cid, &id)?.is_some() {
            r.c_identity += 1;
        } else {
            fail(&mut r, "C(id) is not equivalent to id");
        }

        // G(id) = id
        let e1 = extract(&c1.result)?;
        let gid = functor_g_on_morphism(&id, &e1, &e1)?;
        if gid == SimplicialMorphism::identity(e1.groupoid_in_u.clone()) {
            r.g_identity += 1;
        } else {
            fail(&mut r, "G(id) ≠ id");
        }

        // C(h₂∘h₁) ≅ C(h₂)∘C(h₁)
        let k1 = functor_c_on_morphism(&case.first, &c1, &c2)?;
        let k2 = functor_c_on_morphism(&case.second, &c2, &c3)?;
        let k12 = compose(&k1, &k2)?;
        let both = case.first.then(&case.second)?;
        let c12 = functor_c_on_morphism(&both, &c1, &c3)?;
        if morphism_equivalence(&c12, &k12)?.is_some() {
            r.c_composition += 1;
        } else {
            fail(&mut r, "C(h₂∘h₁) is not equivalent to C(h₂)∘C(h₁)");
        }

        // G(k₂∘k₁) = G(k₂)∘G(k₁)
        let e2 = extract(&c2.result)?;
        let e3 = extract(&c3.result)?;
        let gk1 = functor_g_on_morphism(&k1, &e1, &e2)?;
        let gk2 = functor_g_on_morphism(&k2, &e2, &e3)?;
        let gk12 = functor_g_on_morphism(&k12, &e1, &e3)?;
        if gk12 == gk1.then(&gk2)? {
            r.g_composition += 1;
        } else {
            fail(&mut r, "G(k₂∘k₁) ≠ G(k₂)∘G(k₁)");
        }

        // η naturality along k₁ : C1 → C2
        let ce1 = cover_for_eta(&e1, &seed, "e1")?;
        let ce2 = cover_for_eta(&e2, &seed, "e2")?;
        let eta1 = build_eta(&c1.result, &e1, &ce1)?;
        let eta2 = build_eta(&c2.result, &e2, &ce2)?;
        let cgk1 = functor_c_on_morphism(&gk1, &ce1, &ce2)?;
        let lhs = compose(&k1, &eta2.morphism)?;
        let rhs = compose(&eta1.morphism, &cgk1)?;
        if morphism_equivalence(&lhs, &rhs)?.is_some() {
            r.eta_naturality += 1;
        } else {
            fail(&mut r, "η square does not commute up to equivalence");
        }

        // ε naturality along H₁ : 𝒢₁ → 𝒢₂
        let eps1 = build_epsilon(&g1, &c1, &e1)?;
        let eps2 = build_epsilon(&g2, &c2, &e2)?;
        if case.first.then(&eps2.morphism)? == eps1.morphism.then(&gk1)? {
            r.epsilon_naturality += 1;
        } else {
            fail(&mut r, "ε square does not commute");
        }
    }
    Ok(r)
}

/// Composable pairs built from relabelled copies of the given groupoids.
pub fn law_corpus(sources: &[(String, SimplicialGroupoid)]) -> Result<Vec<LawCase>> {
    let mut out = Vec::new();
    for (name, sg) in sources {
        let g1 = Arc::new(sg.clone());
        for (t1, t2) in [(false, false), (true, false), (false, true), (true, true)] {
            let (_, h1) = crate::fixtures::relabeled_copy(&g1, &format!("x{}", out.len()), t1)?;
            let (_, h13) = crate::fixtures::relabeled_copy(&g1, &format!("y{}", out.len()), t2)?;
            let h2 = h1.inverse()?.then(&h13)?;
            out.push(LawCase { name: format!("{name}/{}{}", t1 as u8, t2 as u8), first: h1, second: h2 });
        }
    }
    Ok(out)
}
