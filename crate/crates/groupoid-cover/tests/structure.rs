use std::collections::{BTreeMap, BTreeSet};

use groupoid_cover::exact_seq::{build_z4_example, Z4Cover};
use groupoid_cover::structure::*;
use groupoid_cover::{Elem, FnMap, Name};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn e(s: &str) -> Elem {
    Elem::from(s)
}

fn perms(xs: &[Elem]) -> Vec<Vec<Elem>> {
    if xs.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let x = rest.remove(i);
        for mut p in perms(&rest) {
            p.insert(0, x.clone());
            out.push(p);
        }
    }
    out
}

/// Independent scan: every relation tuple (and the fibre map) is carried into the relation.
fn preserves(m: &MultiSortedStructure, g: &BTreeMap<Elem, Elem>) -> bool {
    let img = |x: &Elem| g.get(x).cloned().unwrap_or_else(|| x.clone());
    for r in m.relations.values() {
        for t in &r.tuples {
            let u: Vec<Elem> = t.iter().map(img).collect();
            if !r.tuples.contains(&u) {
                return false;
            }
        }
    }
    if let Some(f) = &m.fiber {
        for (s, a) in &f.map {
            if f.map.get(&img(s)) != Some(&img(a)) {
                return false;
            }
        }
    }
    true
}

/// All sort-preserving permutations, optionally fixing the base sorts, that preserve M.
fn brute_force_group(m: &MultiSortedStructure, fix_base: bool) -> BTreeSet<BTreeMap<Elem, Elem>> {
    let mut partial: Vec<BTreeMap<Elem, Elem>> = vec![BTreeMap::new()];
    for (s, es) in &m.sorts {
        let options: Vec<Vec<Elem>> =
            if fix_base && m.base_sorts.contains(s) { vec![es.clone()] } else { perms(es) };
        partial = partial
            .into_iter()
            .flat_map(|g| {
                options.iter().map(move |p| {
                    let mut g = g.clone();
                    g.extend(es.iter().cloned().zip(p.iter().cloned()));
                    g
                })
            })
            .collect();
    }
    partial.into_iter().filter(|g| preserves(m, g)).collect()
}

/// Fibre-preserving permutations of S (base fixed) that preserve M; the z4 oracle.
fn brute_force_fiber_group(m: &MultiSortedStructure) -> usize {
    let f = m.fiber.as_ref().unwrap();
    let mut partial: Vec<BTreeMap<Elem, Elem>> = vec![BTreeMap::new()];
    for a in &f.a_set {
        let fib = f.fiber(a);
        let ps = perms(&fib);
        partial = partial
            .into_iter()
            .flat_map(|g| {
                ps.iter().map({
                    let fib = fib.clone();
                    move |p| {
                        let mut g = g.clone();
                        g.extend(fib.iter().cloned().zip(p.iter().cloned()));
                        g
                    }
                })
            })
            .collect();
    }
    partial.into_iter().filter(|g| preserves(m, g)).count()
}

fn as_btree(g: &FnMap) -> BTreeMap<Elem, Elem> {
    g.pairs().iter().filter(|(x, y)| x != y).cloned().collect()
}

fn assert_group(gs: &[FnMap]) {
    let set: BTreeSet<&FnMap> = gs.iter().collect();
    assert!(gs.iter().any(|g| g.is_identity()), "identity missing");
    for g in gs {
        assert!(set.contains(&g.inverse().unwrap()), "not closed under inverse");
        for h in gs {
            assert!(set.contains(&g.after(h).unwrap()), "not closed under composition");
        }
    }
}

fn two_point() -> MultiSortedStructure {
    let mut m = MultiSortedStructure::default();
    m.add_sort("U", vec![e("u")]);
    m.add_sort("S", vec![e("s1"), e("s2")]);
    m.base_sorts.insert(Name::from("U"));
    m
}

#[test]
fn free_two_element_sort_has_two_automorphisms() {
    let m = two_point();
    let g = automorphism_group(&m, &Constraints::fix_base(&m)).unwrap();
    assert_eq!(g.len(), 2);
    assert_group(&g);
}

#[test]
fn z4_groups_match_the_fibre_enumeration() {
    for (n, expected) in [(1usize, 2usize), (2, 16)] {
        let z = build_z4_example(n).unwrap();
        let m = &z.structure;
        let g = automorphism_group(m, &Constraints::fix_base(m)).unwrap();
        assert_group(&g);
        assert_eq!(g.len(), expected);
        assert_eq!(brute_force_fiber_group(m), expected);
        assert_eq!(automorphism_chain(m, &Constraints::fix_base(m)).unwrap().order, (expected as u64).into());
        for x in &g {
            assert!(preserves(m, &as_btree(x)));
        }
    }
}

fn fibre_names(z: &Z4Cover, a: &[u8]) -> BTreeSet<Elem> {
    z.fiber(a).into_iter().collect()
}

fn restricted(z: &Z4Cover, points: &[&[u8]], params: &[&[u8]], arity: usize) -> MultiSortedStructure {
    let mut elements = BTreeSet::new();
    for p in points {
        elements.extend(fibre_names(z, p));
    }
    let spec = RestrictSpec {
        sorts: vec![Name::from("U"), Name::from("S")],
        elements: Some(elements),
        params: params.iter().map(|p| Z4Cover::u(p)).collect(),
        orbit_arity: arity,
    };
    restrict_structure(&z.structure, &spec).unwrap()
}

#[test]
fn z4_one_fibre_groups() {
    let z = build_z4_example(1).unwrap();
    // S_0 contains ι(0) = 0, which addition pins; the translation by ι(1) lives on S_1.
    let r0 = restricted(&z, &[&[0]], &[&[0]], 2);
    assert_eq!(automorphism_group(&r0, &Constraints::fix_base(&r0)).unwrap().len(), 1);
    assert_eq!(brute_force_group(&r0, true).len(), 1);
    let r1 = restricted(&z, &[&[1]], &[&[1]], 2);
    let g1 = automorphism_group(&r1, &Constraints::fix_base(&r1)).unwrap();
    assert_eq!(g1.len(), 2);
    assert_eq!(brute_force_group(&r1, true).len(), 2);
    let swap = g1.iter().find(|g| !g.is_identity()).unwrap();
    assert_eq!(swap.get("s1").unwrap().as_str(), "s3");
}

#[test]
fn z4_two_independent_fibres() {
    let z = build_z4_example(2).unwrap();
    for arity in [2, 3] {
        let r = restricted(&z, &[&[0, 1], &[1, 0]], &[&[0, 1], &[1, 0]], arity);
        let g = automorphism_group(&r, &Constraints::fix_base(&r)).unwrap();
        assert_group(&g);
        // A translation may be chosen independently on each of the two fibres: 4 · 4.
        assert_eq!(g.len(), 16);
        assert_eq!(brute_force_group(&r, true).len(), 16);
    }
}

#[test]
fn full_restriction_without_parameters_keeps_the_group() {
    let z = build_z4_example(1).unwrap();
    let m = &z.structure;
    let spec = RestrictSpec {
        sorts: m.sorts.iter().map(|(s, _)| s.clone()).collect(),
        elements: None,
        params: vec![],
        orbit_arity: 2,
    };
    let r = restrict_structure(m, &spec).unwrap();
    assert_eq!(r.size(), m.size());
    let g1 = automorphism_group(m, &Constraints::default()).unwrap();
    let g2 = automorphism_group(&r, &Constraints::default()).unwrap();
    assert_eq!(g1, g2);
}

#[test]
fn restriction_rejects_unknown_parameters_and_dropped_base() {
    let z = build_z4_example(1).unwrap();
    let bad = RestrictSpec { sorts: vec![Name::from("U"), Name::from("S")], params: vec![e("nope")], ..Default::default() };
    assert!(restrict_structure(&z.structure, &bad).is_err());
    let no_base = RestrictSpec { sorts: vec![Name::from("S")], ..Default::default() };
    assert!(restrict_structure(&z.structure, &no_base).is_err());
}

#[test]
fn stable_embedding_of_the_base_and_of_fibres() {
    for n in 1..=2 {
        let z = build_z4_example(n).unwrap();
        let m = &z.structure;
        let base = induced(m, &m.base_elements().into_iter().collect());
        let base = drop_sorts(&base, &BTreeSet::from([Name::from("S")]));
        assert!(check_stable_embedding(m, &base).unwrap().embedded);
        assert!(check_stable_embedding(m, m).unwrap().embedded);
    }
    let z = build_z4_example(2).unwrap();
    let us = z.u_vectors();
    for i in 0..us.len() {
        for j in i..us.len() {
            let pts: Vec<&[u8]> = if i == j { vec![&us[i]] } else { vec![&us[i], &us[j]] };
            let sub = restricted(&z, &pts, &pts, 3);
            let r = check_stable_embedding_with(
                &z.structure,
                &sub,
                &Constraints::fix_base(&sub),
                &Constraints::fix_base(&z.structure),
            )
            .unwrap();
            assert!(r.embedded, "fibres over {pts:?}");
        }
    }
    // Pair orbits cannot see s' - s = ι(u); a single fibre then has non-lifting symmetries.
    let sub = restricted(&z, &[&[0, 1]], &[&[0, 1]], 2);
    let r = check_stable_embedding_with(&z.structure, &sub, &Constraints::fix_base(&sub), &Constraints::fix_base(&z.structure))
        .unwrap();
    assert!(!r.embedded);
}

#[test]
fn naming_an_element_breaks_the_lift() {
    let mut m = two_point();
    m.add_relation("named", &["S"], [vec![e("s1")]]);
    let sub = two_point();
    let r = check_stable_embedding(&m, &sub).unwrap();
    assert!(!r.embedded);
    let w = r.witness.unwrap();
    assert_eq!(w.get("s1").unwrap().as_str(), "s2");
    assert_eq!(w.get("s2").unwrap().as_str(), "s1");
}

fn translation(z: &Z4Cover, shifts: &[(&[u8], u8)]) -> FnMap {
    let x: BTreeMap<Vec<u8>, Vec<u8>> = z
        .u_vectors()
        .into_iter()
        .map(|u| {
            let t = shifts.iter().find(|(a, _)| *a == u.as_slice()).map_or(0, |(_, t)| *t);
            (u, vec![t])
        })
        .collect();
    z.translation(&x)
}

#[test]
fn local_global_on_z4_one() {
    let z = build_z4_example(1).unwrap();
    let m = &z.structure;
    let s: Vec<Elem> = m.sort("S").unwrap().clone();
    let id = FnMap::identity(&s);
    let r = local_global_check(m, &id, 2).unwrap();
    assert!(r.global && r.local);
    // Shifting S_0 moves ι(0) = 0 and breaks addition.
    let both = translation(&z, &[(&[0], 1), (&[1], 1)]);
    let r = local_global_check(m, &both, 2).unwrap();
    assert!(!r.global && !r.local);
    // x_0 = 0, x_1 = 2 is additive.
    let one = translation(&z, &[(&[1], 1)]);
    let r = local_global_check(m, &one, 2).unwrap();
    assert!(r.global && r.local);
}

#[test]
fn local_global_rejects_fibre_moving_maps() {
    let z = build_z4_example(1).unwrap();
    let tau = FnMap::from_pairs(vec![(e("s0"), e("s1")), (e("s1"), e("s0")), (e("s2"), e("s2")), (e("s3"), e("s3"))]).unwrap();
    assert!(local_global_check(&z.structure, &tau, 2).is_err());
}

#[test]
fn validation_codes() {
    let mut m = two_point();
    m.add_sort("T", vec![]);
    m.sorts.push((Name::from("T"), vec![]));
    m.sorts.push((Name::from("V"), vec![e("s1")]));
    m.add_relation("r", &["S", "W"], [vec![e("s1"), e("s2")], vec![e("s1")]]);
    m.fiber = Some(FiberMap {
        s_sort: Name::from("S"),
        a_sort: Name::from("U"),
        a_set: vec![e("u")],
        map: BTreeMap::from([(e("s1"), e("u"))]),
    });
    let r = validate_structure(&m);
    for code in ["duplicate sort", "duplicate element", "unknown sort", "arity", "signature", "fiber"] {
        assert!(r.has(code), "missing {code}: {r:?}");
    }
    assert!(validate_structure(&build_z4_example(2).unwrap().structure).is_valid());
}

#[test]
fn renamed_copy_is_isomorphic_over_the_base() {
    let z = build_z4_example(1).unwrap();
    let (copy, ren) = rename_elements(&z.structure, "'");
    let isos = isomorphisms(&z.structure, &copy, &Constraints::fix_base(&z.structure)).unwrap();
    assert_eq!(isos.len(), 2);
    assert!(isos.iter().any(|g| ren.iter().all(|(x, y)| g.get(x) == Some(y))));
}

/// Same sorts and relation names; non-base elements renamed.
fn rename_elements(m: &MultiSortedStructure, suffix: &str) -> (MultiSortedStructure, BTreeMap<Elem, Elem>) {
    let mut ren = BTreeMap::new();
    for (s, es) in &m.sorts {
        for x in es {
            let y = if m.base_sorts.contains(s) { x.clone() } else { Elem::from(format!("{x}{suffix}")) };
            ren.insert(x.clone(), y);
        }
    }
    let mut out = m.clone();
    for (_, es) in out.sorts.iter_mut() {
        for x in es.iter_mut() {
            *x = ren[x].clone();
        }
    }
    for r in out.relations.values_mut() {
        r.tuples = r.tuples.iter().map(|t| t.iter().map(|x| ren[x].clone()).collect()).collect();
    }
    if let Some(f) = out.fiber.as_mut() {
        f.map = f.map.iter().map(|(s, a)| (ren[s].clone(), a.clone())).collect();
    }
    (out, ren)
}

fn random_structure(seed: u64) -> MultiSortedStructure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MultiSortedStructure::default();
    let nb = rng.gen_range(1..=2);
    let ns = rng.gen_range(2..=4);
    let b: Vec<Elem> = (0..nb).map(|i| Elem::from(format!("b{i}"))).collect();
    let s: Vec<Elem> = (0..ns).map(|i| Elem::from(format!("x{i}"))).collect();
    m.add_sort("B", b.clone());
    m.add_sort("S", s.clone());
    m.base_sorts.insert(Name::from("B"));
    let mut binary = Vec::new();
    for x in &s {
        for y in &s {
            if rng.gen_bool(0.3) {
                binary.push(vec![x.clone(), y.clone()]);
            }
        }
    }
    m.add_relation("r", &["S", "S"], binary);
    let unary: Vec<Vec<Elem>> = s.iter().filter(|_| rng.gen_bool(0.3)).map(|x| vec![x.clone()]).collect();
    m.add_relation("p", &["S"], unary);
    if rng.gen_bool(0.5) {
        let map: BTreeMap<Elem, Elem> = s.iter().enumerate().map(|(i, x)| (x.clone(), b[i % nb].clone())).collect();
        m.fiber = Some(FiberMap { s_sort: Name::from("S"), a_sort: Name::from("B"), a_set: b.clone(), map });
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn search_matches_enumeration(seed in any::<u64>(), fix in any::<bool>()) {
        let m = random_structure(seed);
        let c = if fix { Constraints::fix_base(&m) } else { Constraints::default() };
        let g = automorphism_group(&m, &c).unwrap();
        assert_group(&g);
        let found: BTreeSet<BTreeMap<Elem, Elem>> = g.iter().map(as_btree).collect();
        let oracle: BTreeSet<BTreeMap<Elem, Elem>> =
            brute_force_group(&m, fix).into_iter().map(|g| g.into_iter().filter(|(x, y)| x != y).collect()).collect();
        prop_assert_eq!(&found, &oracle);
        prop_assert_eq!(automorphism_chain(&m, &c).unwrap().order, (g.len() as u64).into());
    }

    #[test]
    fn structures_embed_in_themselves(seed in any::<u64>()) {
        let m = random_structure(seed);
        prop_assert!(check_stable_embedding(&m, &m).unwrap().embedded);
    }

    #[test]
    fn local_global_agrees_with_membership(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let m = random_structure(seed);
        prop_assume!(m.fiber.is_some());
        let f = m.fiber.clone().unwrap();
        // a random fibre-preserving permutation
        let mut pairs = Vec::new();
        let mut k = pick.index(1 << 12);
        for a in &f.a_set {
            let fib = f.fiber(a);
            let ps = perms(&fib);
            let p = &ps[k % ps.len()];
            k /= ps.len();
            pairs.extend(fib.iter().cloned().zip(p.iter().cloned()));
        }
        let tau = FnMap::from_pairs(pairs).unwrap();
        let r = local_global_check(&m, &tau, 2).unwrap();
        let full = tau.union(&FnMap::identity(&m.base_elements())).unwrap();
        let member = automorphism_group(&m, &Constraints::fix_base(&m)).unwrap().contains(&full);
        prop_assert_eq!(r.global, member);
        prop_assert_eq!(r.local, r.global);
    }

    #[test]
    fn isomorphisms_of_shuffled_copies(seed in any::<u64>()) {
        let m = random_structure(seed);
        let (copy, ren) = rename_elements(&m, "~");
        let isos = isomorphisms(&m, &copy, &Constraints::fix_base(&m)).unwrap();
        prop_assert!(!isos.is_empty());
        prop_assert_eq!(isos.len(), automorphism_group(&m, &Constraints::fix_base(&m)).unwrap().len());
        let ren = FnMap::from_pairs(ren.into_iter()).unwrap();
        prop_assert!(isos.iter().any(|g| ren.pairs().iter().all(|(x, y)| g.get(x) == Some(y))));
    }
}
