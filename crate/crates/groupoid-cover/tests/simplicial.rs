use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use groupoid_cover::fixtures::{fuzz_simplicial, relabeled_copy, sg_toy, sg_toy3, trivial_sg};
use groupoid_cover::groupoid::ConcreteGroupoid;
use groupoid_cover::name::{is_sublabel, label};
use groupoid_cover::simplicial::*;
use groupoid_cover::{Arrow, ArrowSet, Elem, FnMap, Label, Name};
use proptest::prelude::*;

fn fm(p: &[(&str, &str)]) -> FnMap {
    FnMap::from_pairs(p.iter().map(|(a, b)| (Elem::from(*a), Elem::from(*b)))).unwrap()
}

fn l(xs: &[&str]) -> Label {
    label(xs.iter().copied())
}

/// Independent commutativity oracle: every triple c ⊂ d ⊂ e, pointwise.
fn triples_commute(sys: &InclusionSystem) -> (bool, usize) {
    let mut count = 0;
    let labels: Vec<&Label> = sys.chosen.keys().collect();
    for c in &labels {
        for d in &labels {
            for e in &labels {
                if c.len() < d.len() && d.len() < e.len() && is_sublabel(c, d) && is_sublabel(d, e) {
                    count += 1;
                    let (x, y, z) = (sys.map(c, d).unwrap(), sys.map(d, e).unwrap(), sys.map(c, e).unwrap());
                    for (p, _) in x.map.pairs() {
                        if y.map.get(x.map.get(p).unwrap()) != z.map.get(p) {
                            return (false, count);
                        }
                    }
                }
            }
        }
    }
    (true, count)
}

#[test]
fn fixtures_are_valid() {
    assert!(validate_simplicial(&sg_toy()).is_valid());
    assert!(validate_simplicial(&sg_toy3()).is_valid());
    let single = trivial_sg(&["a"]);
    assert!(validate_simplicial(&single).is_valid());
    assert!(single.inclusions().is_empty());
}

#[test]
fn non_injective_inclusion_is_reported() {
    let sg = sg_toy();
    let mut degrees = sg.degrees().clone();
    let _ = &mut degrees;
    let mut incl: Vec<Arrow> = sg.inclusion_set(1, 2).unwrap().iter().cloned().collect();
    incl[0].map = fm(&[("p1", "r1"), ("p2", "r1")]);
    let bad = SimplicialGroupoid::new(
        sg.base().to_vec(),
        degrees,
        [((1, 2), ArrowSet::new(incl))].into_iter().collect(),
    )
    .unwrap();
    assert!(validate_simplicial(&bad).has("injectivity"));
}

#[test]
fn dup_holds_on_toy_and_fails_on_oversized_object() {
    assert!(check_disjoint_union_property(&sg_toy()).is_ok());
    // degree-2 object with a fifth element that no leg reaches
    let sg = sg_toy();
    let g2 = sg.degree(2).unwrap();
    let mut objects = g2.objects().clone();
    objects.get_mut(&Name::from("Pab")).unwrap().push(Elem::from("r5"));
    let morphisms = g2
        .morphisms()
        .iter()
        .map(|a| Arrow::new(a.source.clone(), a.target.clone(), a.map.union(&fm(&[("r5", "r5")])).unwrap()))
        .collect();
    let g2b = ConcreteGroupoid::from_parts(objects, g2.component_map().clone(), g2.components().clone(), morphisms).unwrap();
    let mut degrees = sg.degrees().clone();
    degrees.insert(2, Arc::new(g2b));
    let big = SimplicialGroupoid::new(sg.base().to_vec(), degrees, sg.inclusions().clone()).unwrap();
    let cx = check_disjoint_union_property(&big).unwrap_err();
    assert_eq!(cx.reason, "cardinality");
}

fn canonical(sg: &SimplicialGroupoid, s: &str, t: &str) -> Arrow {
    // the lex-least inclusion, which for the toy fixtures is the order-preserving one
    sg.maps(s, t).unwrap()[0].clone()
}

#[test]
fn fill_square_on_toy3() {
    let sg = sg_toy3();
    let i1 = canonical(&sg, "Pa", "Pabc");
    let i3 = canonical(&sg, "Pac", "Pabc");
    let i4 = fill_square(&sg, &i1, &i3).unwrap();
    let hom = sg.maps("Pa", "Pac").unwrap();
    assert_eq!(hom.len(), 2);
    let sols: Vec<&Arrow> = hom.iter().filter(|x| i3.after(x).as_ref() == Some(&i1)).collect();
    assert_eq!(sols, vec![&i4]);
    assert_eq!(i4.map, fm(&[("p1", "t1"), ("p2", "t2")]));
    // twisting ι3 by the swap on its a-fibre flips the answer
    let swap_a = sg.maps("Pabc", "Pabc").unwrap().iter().find(|g| g.map.get("w1").map(|x| x.as_str()) == Some("w2") && g.map.get("w3").map(|x| x.as_str()) == Some("w3") && g.map.get("w5").map(|x| x.as_str()) == Some("w5")).unwrap().clone();
    let i3b = swap_a.after(&i3).unwrap();
    let i4b = fill_square(&sg, &i1, &i3b).unwrap();
    assert_eq!(i4b.map, fm(&[("p1", "t2"), ("p2", "t1")]));
}

#[test]
fn fill_square_degenerate_identity_system() {
    let sg = trivial_sg(&["a", "b", "c"]);
    let i1 = canonical(&sg, "O[a]", "O[a,b,c]");
    let i3 = canonical(&sg, "O[a,c]", "O[a,b,c]");
    let i4 = fill_square(&sg, &i1, &i3).unwrap();
    assert_eq!(i4, canonical(&sg, "O[a]", "O[a,c]"));
    let bogus = Arrow::new("O[a]", "O[a,b,c]", fm(&[("a|ta", "a,b,c|tb")]));
    assert!(fill_square(&sg, &bogus, &i3).is_err());
}

#[test]
fn inclusion_systems_on_toys() {
    let toy = sg_toy();
    let s = build_inclusion_system(&toy, &SystemSeed::default()).unwrap();
    assert_eq!(s.chosen.len(), 3);
    assert_eq!(s.maps.len(), 2);
    assert!(validate_inclusion_system(&toy, &s).is_valid());

    let toy3 = sg_toy3();
    let s3 = build_inclusion_system(&toy3, &SystemSeed::default()).unwrap();
    assert_eq!(s3.chosen.len(), 7);
    assert_eq!(s3.maps.len(), 12);
    assert_eq!(triples_commute(&s3), (true, 6));
}

#[test]
fn twisted_seed_propagates() {
    let toy3 = sg_toy3();
    let plain = build_inclusion_system(&toy3, &SystemSeed::default()).unwrap();
    let twisted = sg_toy3().maps("Pa", "Pabc").unwrap()[1].clone();
    assert_ne!(&twisted, plain.map(&l(&["a"]), &l(&["a", "b", "c"])).unwrap());
    let mut seed = SystemSeed::default();
    seed.maps.insert((l(&["a"]), l(&["a", "b", "c"])), twisted.clone());
    let s = build_inclusion_system(&toy3, &seed).unwrap();
    assert_eq!(s.map(&l(&["a"]), &l(&["a", "b", "c"])).unwrap(), &twisted);
    assert!(triples_commute(&s).0);
    assert!(!s.diff(&plain).is_empty());
    let conn = connect_systems(&toy3, &plain, &s).unwrap();
    assert!(conn.is_some());
}

#[test]
fn inconsistent_seed_is_rejected() {
    let toy3 = sg_toy3();
    let plain = build_inclusion_system(&toy3, &SystemSeed::default()).unwrap();
    let mut seed = SystemSeed::from_system(&plain);
    let (a, ab, abc) = (l(&["a"]), l(&["a", "b"]), l(&["a", "b", "c"]));
    let other = toy3.maps("Pa", "Pabc").unwrap().iter().find(|x| Some(*x) != plain.map(&a, &abc)).unwrap().clone();
    seed.maps.insert((a.clone(), abc.clone()), other);
    let _ = ab;
    assert!(matches!(build_inclusion_system(&toy3, &seed), Err(groupoid_cover::Error::InconsistentSeed(_))));
}

#[test]
fn extension_by_third_point_matches_fresh_build() {
    let toy = sg_toy();
    let toy3 = sg_toy3();
    let s = build_inclusion_system(&toy, &SystemSeed::default()).unwrap();
    let ext = extend_inclusion_system(&toy3, &s, &Name::from("c")).unwrap();
    assert_eq!(ext.restrict_to(&[Name::from("a"), Name::from("b")]).maps, s.maps);
    let fresh = build_inclusion_system(&toy3, &SystemSeed::default()).unwrap();
    assert_eq!(ext.maps, fresh.maps);
    assert_eq!(ext.chosen, fresh.chosen);
    assert!(extend_inclusion_system(&toy3, &ext, &Name::from("a")).is_err());
}

#[test]
fn isolated_point_adds_only_its_object() {
    let toy3 = sg_toy3();
    let sg = toy3.filter_labels(|lab| lab.len() == 1 || !lab.contains(&Name::from("c"))).unwrap();
    assert!(validate_simplicial(&sg).is_valid());
    let s = build_inclusion_system(&sg.restrict_to(&[Name::from("a"), Name::from("b")]).unwrap(), &SystemSeed::default()).unwrap();
    let ext = extend_inclusion_system(&sg, &s, &Name::from("c")).unwrap();
    assert_eq!(ext.chosen.len(), s.chosen.len() + 1);
    assert_eq!(ext.maps, s.maps);
}

#[test]
fn successive_extensions_differ_only_at_free_choices() {
    let sg = fuzz_like_four_points();
    let base: Vec<Name> = sg.base().to_vec();
    let start = build_inclusion_system(&sg.restrict_to(&base[..2]).unwrap(), &SystemSeed::default()).unwrap();
    let x = extend_inclusion_system(&sg, &extend_inclusion_system(&sg, &start, &base[2]).unwrap(), &base[3]).unwrap();
    let y = extend_inclusion_system(&sg, &extend_inclusion_system(&sg, &start, &base[3]).unwrap(), &base[2]).unwrap();
    assert!(triples_commute(&x).0 && triples_commute(&y).0);
    assert_eq!(x.restrict_to(&base[..2]), y.restrict_to(&base[..2]));
    // whatever the diff, the two systems are connected by a family of groupoid maps
    let _diff = x.diff(&y);
    assert!(connect_systems(&sg, &x, &y).unwrap().is_some());
}

fn fuzz_like_four_points() -> SimplicialGroupoid {
    (0..).map(fuzz_simplicial).find(|s| s.base().len() == 4 && s.max_degree() == 4).unwrap()
}

#[test]
fn replayed_choices_give_a_different_commuting_system() {
    let toy3 = sg_toy3();
    let plain = build_inclusion_system(&toy3, &SystemSeed::default()).unwrap();
    assert!(!plain.free_choices.is_empty());
    let seed = SystemSeed { choices: vec![1; plain.free_choices.len()], ..Default::default() };
    let alt = build_inclusion_system(&toy3, &seed).unwrap();
    assert!(triples_commute(&alt).0);
    assert_ne!(alt.maps, plain.maps);
    assert!(connect_systems(&toy3, &plain, &alt).unwrap().is_some());
    let again = build_inclusion_system(&toy3, &SystemSeed { choices: alt.free_choices.iter().map(|c| c.index).collect(), ..Default::default() }).unwrap();
    assert_eq!(again.maps, alt.maps);
}

#[test]
fn coherent_family_identity_case() {
    let sg = Arc::new(sg_toy3());
    let s = build_inclusion_system(&sg, &SystemSeed::default()).unwrap();
    let h = SimplicialMorphism::identity(sg.clone());
    let fam = find_coherent_family(&h, &s, &s, &CoherentFamily::default()).unwrap();
    assert!(fam.maps.values().all(|a| a.map.is_identity()));
    assert!(fam.witnesses.values().all(|a| a.map.is_identity()));
    assert_eq!(fam.witnesses.len(), 4);
    assert!(validate_coherent_family(&h, &s, &s, &fam).is_valid());
}

#[test]
fn coherent_family_against_twisted_system() {
    let sg = Arc::new(sg_toy());
    let s1 = build_inclusion_system(&sg, &SystemSeed::default()).unwrap();
    let sigma = sg.maps("Pab", "Pab").unwrap().iter().find(|g| g.map.get("r1").unwrap().as_str() == "r2" && g.map.get("r3").unwrap().as_str() == "r4").unwrap().clone();
    let mut s2 = s1.clone();
    for ((_, d), a) in s2.maps.iter_mut() {
        if d.len() == 2 {
            *a = sigma.after(a).unwrap();
        }
    }
    assert!(validate_inclusion_system(&sg, &s2).is_valid());
    let h = SimplicialMorphism::identity(sg.clone());
    // lex-least degree-1 choices are the identities; the witness is then σ itself
    let fam = find_coherent_family(&h, &s1, &s2, &CoherentFamily::default()).unwrap();
    assert!(fam.maps.values().all(|a| a.map.is_identity()));
    assert_eq!(fam.witnesses[&l(&["a", "b"])], sigma);
    // seeding the swaps instead forces the identity witness
    let swaps: BTreeMap<Name, Arrow> = [("a", "Pa"), ("b", "Pb")]
        .iter()
        .map(|(p, o)| (Name::from(*p), sg.maps(o, o).unwrap().iter().find(|g| !g.map.is_identity()).unwrap().clone()))
        .collect();
    let fam2 = find_coherent_family(&h, &s1, &s2, &CoherentFamily { maps: swaps.clone(), witnesses: BTreeMap::new() }).unwrap();
    assert_eq!(fam2.maps, swaps);
    assert!(fam2.witnesses[&l(&["a", "b"])].map.is_identity());
}

#[test]
fn coherence_witness_glues_legs() {
    let sg = Arc::new(sg_toy());
    let s = build_inclusion_system(&sg, &SystemSeed::default()).unwrap();
    let h = SimplicialMorphism::identity(sg.clone());
    let id = |o: &str| sg.maps(o, o).unwrap().iter().find(|g| g.map.is_identity()).unwrap().clone();
    let sw = |o: &str| sg.maps(o, o).unwrap().iter().find(|g| !g.map.is_identity()).unwrap().clone();
    let ab = l(&["a", "b"]);
    let m1: BTreeMap<Name, Arrow> = [(Name::from("a"), sw("Pa")), (Name::from("b"), id("Pb"))].into_iter().collect();
    let w1 = coherence_witness(&h, &s, &s, &m1, &ab).unwrap();
    assert_eq!(w1.map, fm(&[("r1", "r2"), ("r2", "r1"), ("r3", "r3"), ("r4", "r4")]));
    let m2: BTreeMap<Name, Arrow> = [(Name::from("a"), sw("Pa")), (Name::from("b"), sw("Pb"))].into_iter().collect();
    let w2 = coherence_witness(&h, &s, &s, &m2, &ab).unwrap();
    assert_eq!(w2.map, fm(&[("r1", "r2"), ("r2", "r1"), ("r3", "r4"), ("r4", "r3")]));
    let m0: BTreeMap<Name, Arrow> = [(Name::from("a"), id("Pa")), (Name::from("b"), id("Pb"))].into_iter().collect();
    assert!(coherence_witness(&h, &s, &s, &m0, &ab).unwrap().map.is_identity());
}

#[test]
fn projective_system_single_level() {
    let g = sg_toy().degree(1).unwrap().clone();
    let p = ProjectiveGroupoidSystem {
        levels: [(Name::from("0"), g.clone())].into_iter().collect(),
        order: BTreeSet::new(),
        projections: BTreeMap::new(),
    };
    assert!(validate_system(&p).is_valid());
    assert_eq!(project_system(&p, "0").unwrap(), g);
    assert!(project_system(&p, "1").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fuzz_instances_are_valid_with_dup(seed in any::<u64>()) {
        let sg = fuzz_simplicial(seed);
        prop_assert!(validate_simplicial(&sg).is_valid());
        prop_assert!(check_disjoint_union_property(&sg).is_ok());
    }

    #[test]
    fn restriction_preserves_validity(seed in any::<u64>(), mask in 1u8..16) {
        let sg = fuzz_simplicial(seed);
        let pts: Vec<Name> = sg.base().iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, p)| p.clone()).collect();
        prop_assume!(!pts.is_empty());
        let sub = sg.restrict_to(&pts).unwrap();
        prop_assert!(validate_simplicial(&sub).is_valid());
    }

    #[test]
    fn fill_square_is_the_unique_solution(seed in any::<u64>()) {
        let sg = fuzz_simplicial(seed);
        let labels = sg.labels();
        for a in &labels {
            for m in &labels {
                for t in &labels {
                    if !(a.len() < m.len() && m.len() < t.len() && is_sublabel(a, m) && is_sublabel(m, t)) { continue; }
                    let (oa, om, ot) = (&sg.objects_over(a)[0], &sg.objects_over(m)[0], &sg.objects_over(t)[0]);
                    let i1 = sg.maps(oa, ot).unwrap()[0].clone();
                    for i3 in sg.maps(om, ot).unwrap().iter().take(3) {
                        let x = fill_square(&sg, &i1, i3).unwrap();
                        // oracle: set-theoretic factorisation ι3⁻¹∘ι1
                        let direct = i3.map.inverse().unwrap().after(&i1.map).unwrap();
                        prop_assert_eq!(&x.map, &direct);
                        let n = sg.maps(oa, om).unwrap().iter().filter(|y| i3.after(y).as_ref() == Some(&i1)).count();
                        prop_assert_eq!(n, 1);
                    }
                }
            }
        }
    }

    #[test]
    fn built_systems_commute(seed in any::<u64>(), replay in prop::collection::vec(0usize..5, 0..6)) {
        let sg = fuzz_simplicial(seed);
        let s = build_inclusion_system(&sg, &SystemSeed { choices: replay, ..Default::default() }).unwrap();
        prop_assert!(triples_commute(&s).0);
        prop_assert!(validate_inclusion_system(&sg, &s).is_valid());
    }

    #[test]
    fn coherent_families_extend_partials(seed in any::<u64>(), twist in any::<bool>(), k in 0usize..3) {
        let sg = Arc::new(fuzz_simplicial(seed));
        let (copy, h) = relabeled_copy(&sg, "'", twist).unwrap();
        let s1 = build_inclusion_system(&sg, &SystemSeed::default()).unwrap();
        let s2 = build_inclusion_system(&copy, &SystemSeed { choices: vec![1, 0, 1], ..Default::default() }).unwrap();
        let full = find_coherent_family(&h, &s1, &s2, &CoherentFamily::default()).unwrap();
        prop_assert!(validate_coherent_family(&h, &s1, &s2, &full).is_valid());
        // restart from a prefix of the family: the result restricts to it
        let pts: Vec<Name> = sg.base().iter().take(k).cloned().collect();
        let partial = CoherentFamily { maps: full.maps.iter().filter(|(p, _)| pts.contains(p)).map(|(p, a)| (p.clone(), a.clone())).collect(), witnesses: BTreeMap::new() };
        let again = find_coherent_family(&h, &s1, &s2, &partial).unwrap();
        for (p, a) in &partial.maps {
            prop_assert_eq!(&again.maps[p], a);
        }
        // every witness restricts along each leg to the degree-1 map
        for (c, w) in &again.witnesses {
            for a in c {
                let leg = vec![a.clone()];
                prop_assert_eq!(w.after(s1.map(&leg, c).unwrap()), s2.map(&leg, c).unwrap().after(&again.maps[a]));
            }
        }
    }
}
