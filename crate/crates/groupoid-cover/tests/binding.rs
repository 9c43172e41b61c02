mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use common::{brute_force_cover_group, brute_force_fiber_group};
use groupoid_cover::binding::*;
use groupoid_cover::exact_seq::build_z4_example;
use groupoid_cover::fixtures::{fuzz_simplicial, sg_toy, sg_toy3, trivial_sg};
use groupoid_cover::name::label;
use groupoid_cover::simplicial::{build_inclusion_system, validate_simplicial, SystemSeed};
use groupoid_cover::structure::{induced, isomorphisms, validate_structure, Constraints};
use groupoid_cover::{FnMap, Label};
use proptest::prelude::*;

fn l(xs: &[&str]) -> Label {
    label(xs.iter().copied())
}

fn toy_cover() -> CoverConstruction {
    build_cover_from_simplicial(Arc::new(sg_toy()), &SystemSeed::default(), "").unwrap()
}

/// Aut(O_{*,c̄}/𝕌) by brute force on the part of the cover over c̄.
fn oracle_over(c: &CoverConstruction, lab: &Label) -> Vec<FnMap> {
    let sub = induced(&c.result, &c.elements_over(lab));
    brute_force_cover_group(&sub).into_iter().collect()
}

#[test]
fn toy_cover_shape() {
    let c = toy_cover();
    assert!(validate_structure(&c.result).is_valid());
    let size = |s: &str| c.result.sort(s).map(|v| v.len());
    assert_eq!(size("gA"), Some(2));
    assert_eq!(size("gE"), Some(8));
    assert_eq!(size("gOb"), Some(3));
    assert_eq!(size("gMor"), Some(8));
    assert_eq!(size("gInc"), Some(4));
    assert_eq!(size("Ostar"), Some(4));
    assert_eq!(c.ostar(&l(&["a", "b"])).len(), 4);
    assert_eq!(c.ostar(&l(&["a"])).len(), 2);
    let whole = brute_force_cover_group(&c.result);
    assert_eq!(whole.len(), 4);
}

#[test]
fn binding_statement_on_toy() {
    let c = toy_cover();
    for (lab, order) in [(l(&["a", "b"]), 4), (l(&["a"]), 2), (l(&["b"]), 2)] {
        let b = verify_binding_statement(&c, &lab).unwrap();
        assert!(b.equal);
        assert_eq!(b.groupoid_group.len(), order);
        assert_eq!(b.groupoid_group, oracle_over(&c, &lab));
    }
    assert!(verify_binding_statement(&c, &l(&["z"])).is_err());
}

#[test]
fn trivial_groupoid_gives_trivial_groups() {
    let c = build_cover_from_simplicial(Arc::new(trivial_sg(&["p", "q"])), &SystemSeed::default(), "").unwrap();
    for lab in c.ostar_objects.keys() {
        let b = verify_binding_statement(&c, lab).unwrap();
        assert!(b.equal && b.groupoid_group.len() == 1);
    }
}

#[test]
fn toy_cover_is_a_cover_and_locally_embedded() {
    let c = toy_cover();
    let v = verify_cover(&c).unwrap();
    assert!(v.ok && v.lifts.embedded && v.coherent_failures == 0);
    assert!(verify_local_embeddedness(&c, &l(&["a"]), &l(&["a", "b"])).unwrap().embedded);
    assert!(verify_local_embeddedness(&c, &l(&["a", "b"]), &l(&["a"])).is_err());
}

#[test]
fn toy3_cover_binding_and_embedding() {
    let c = build_cover_from_simplicial(Arc::new(sg_toy3()), &SystemSeed::default(), "").unwrap();
    for lab in c.ostar_objects.keys() {
        let b = verify_binding_statement(&c, lab).unwrap();
        assert!(b.equal, "{lab:?}");
        assert_eq!(b.groupoid_group, oracle_over(&c, lab));
    }
    assert!(verify_cover(&c).unwrap().ok);
    assert!(verify_local_embeddedness(&c, &l(&["a", "c"]), &l(&["a", "b", "c"])).unwrap().embedded);
    // b and c are interchangeable in the base; naming the points of {a,b} rules that out
    assert!(verify_local_embeddedness(&c, &l(&["a"]), &l(&["a", "b"])).unwrap().embedded);
}

#[test]
fn choices_do_not_change_the_cover_up_to_isomorphism() {
    let sg = Arc::new(sg_toy3());
    let plain = build_inclusion_system(&sg, &SystemSeed::default()).unwrap();
    let alt = SystemSeed { choices: vec![1; plain.free_choices.len()], ..Default::default() };
    let c1 = build_cover_from_simplicial(sg.clone(), &SystemSeed::default(), "").unwrap();
    let c2 = build_cover_from_simplicial(sg, &alt, "").unwrap();
    assert_ne!(c1.inclusion_system.maps, c2.inclusion_system.maps);
    let mut cons = Constraints::fix_base(&c1.result);
    cons.limit = Some(1);
    assert_eq!(isomorphisms(&c1.result, &c2.result, &cons).unwrap().len(), 1);
}

#[test]
fn preconditions_are_checked() {
    let sg = sg_toy();
    assert!(cover_preconditions(&sg).is_ok());
    // degree one alone still satisfies the hypotheses
    let sg = sg.filter_labels(|lab| lab.len() == 1).unwrap();
    assert!(validate_simplicial(&sg).is_valid());
    assert!(cover_preconditions(&sg).is_ok());
}

#[test]
fn z4_one_extraction() {
    let z = build_z4_example(1).unwrap();
    let e = extract_binding_simplicial_groupoid(&z.structure, &ExtractOptions::default()).unwrap();
    let g = &e.fiber_groups.groups;
    assert_eq!(g[&l(&["u0"])].len(), 1);
    assert_eq!(g[&l(&["u1"])].len(), 2);
    assert_eq!(g[&l(&["u0", "u1"])].len(), 2);
    let global = global_fiber_group(&z.structure).unwrap();
    assert_eq!(global.len(), brute_force_fiber_group(&z.structure).len());
    for k in 1..=2 {
        assert_eq!(projective_limit_aut(&e, k).unwrap().order(), 2);
    }
    assert_eq!(projective_limit_aut(&e, 3).unwrap().order(), 2);
    assert!(projective_limit_aut(&e, 0).is_err());
    assert!(validate_simplicial(&e.extension).is_valid());
}

#[test]
fn z4_two_limits() {
    let z = build_z4_example(2).unwrap();
    let e = extract_binding_simplicial_groupoid(&z.structure, &ExtractOptions::default()).unwrap();
    let global: BTreeSet<FnMap> = global_fiber_group(&z.structure).unwrap().into_iter().collect();
    assert_eq!(global.len(), 16);
    assert_eq!(brute_force_fiber_group(&z.structure).len(), 16);
    assert_eq!(projective_limit_aut(&e, 1).unwrap().order(), 64);
    let top: BTreeSet<FnMap> = projective_limit_aut(&e, 4).unwrap().elements.into_iter().collect();
    assert_eq!(top, global);
    assert_eq!(projective_limit_aut(&e, 3).unwrap().order(), 16);
    let three = l(&["u00", "u01", "u10"]);
    assert_eq!(e.fiber_groups.groups[&three].len(), 16);
}

#[test]
fn restricted_mode_needs_larger_orbits() {
    let z = build_z4_example(2).unwrap();
    let opts = ExtractOptions { max_degree: Some(2), mode: GammaMode::Restricted, orbit_arity: 3 };
    let e = extract_binding_simplicial_groupoid(&z.structure, &opts).unwrap();
    let p = extract_binding_simplicial_groupoid(&z.structure, &ExtractOptions { max_degree: Some(2), ..Default::default() })
        .unwrap();
    assert_eq!(e.fiber_groups.groups, p.fiber_groups.groups);
}

#[test]
fn extraction_of_a_cover_round_trips_the_groups() {
    let c = toy_cover();
    let e = extract_binding_simplicial_groupoid(&c.result, &ExtractOptions::default()).unwrap();
    assert_eq!(e.fiber_groups.groups[&l(&["a", "b"])].len(), 4);
    assert_eq!(e.fiber_groups.groups[&l(&["a"])].len(), 2);
    assert!(check_local_embeddedness(&e.fiber_groups).is_none());
    let limit = projective_limit_aut(&e, 2).unwrap();
    assert_eq!(limit.order(), global_fiber_group(&c.result).unwrap().len());
}

#[test]
fn tags_round_trip() {
    let lab = l(&["a", "b"]);
    let t = tag_elem(&lab, "x1");
    assert_eq!(untag_elem(&t).as_str(), "x1");
}

#[test]
fn z4_timings_are_desk_scale() {
    let t = Instant::now();
    let z = build_z4_example(2).unwrap();
    extract_binding_simplicial_groupoid(&z.structure, &ExtractOptions::default()).unwrap();
    assert!(t.elapsed().as_secs() < 30);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fuzz_covers_bind(seed in any::<u64>()) {
        let sg = fuzz_simplicial(seed);
        prop_assume!(sg.base().len() <= 3);
        let c = build_cover_from_simplicial(Arc::new(sg), &SystemSeed::default(), "").unwrap();
        for lab in c.ostar_objects.keys() {
            let b = verify_binding_statement(&c, lab).unwrap();
            prop_assert!(b.equal);
            prop_assert_eq!(&b.groupoid_group, &oracle_over(&c, lab));
        }
        prop_assert!(verify_cover(&c).unwrap().ok);
    }
}
