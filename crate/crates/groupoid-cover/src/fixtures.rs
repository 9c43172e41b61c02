//! Named instances and a seeded generator of simplicial groupoids built from a group
//! acting fibrewise on a finite family of fibres.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{pre, Result};
use crate::groupoid::ConcreteGroupoid;
use crate::map::{close_group, Arrow, ArrowSet, FnMap};
use crate::name::{label, label_string, Elem, Label, Name, ObjId};
use crate::simplicial::{SimplicialGroupoid, SimplicialMorphism};

/// Data for [`fibered_simplicial`]: a group generated by fibre-preserving permutations,
/// and for each label a list of object copies (id, bijection from the abstract fibres).
#[derive(Clone, Debug)]
pub struct FiberedSpec {
    pub fibers: BTreeMap<Name, Vec<Elem>>,
    pub generators: Vec<FnMap>,
    pub max_degree: usize,
    pub copies: BTreeMap<Label, Vec<(ObjId, FnMap)>>,
}

pub fn subsets_up_to(points: &[Name], max: usize) -> Vec<Label> {
    let mut out = Vec::new();
    let n = points.len();
    for mask in 1u32..(1u32 << n) {
        if (mask.count_ones() as usize) <= max {
            out.push(label((0..n).filter(|i| mask & (1 << i) != 0).map(|i| points[i].clone())));
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn fiber_union(spec: &FiberedSpec, l: &[Name]) -> Vec<Elem> {
    let mut v: Vec<Elem> = l.iter().flat_map(|a| spec.fibers[a].iter().cloned()).collect();
    v.sort();
    v
}

/// Default copy naming: one object `O[label]` whose elements are `label|x`.
pub fn default_copy(l: &[Name], fib: &[Elem]) -> (ObjId, FnMap) {
    let ls = label_string(l);
    let map = FnMap::from_pairs(fib.iter().map(|x| (x.clone(), Name::from(format!("{ls}|{x}"))))).expect("distinct");
    (Name::from(format!("O[{ls}]")), map)
}

pub fn fibered_simplicial(spec: &FiberedSpec) -> Result<SimplicialGroupoid> {
    let base: Vec<Name> = spec.fibers.keys().cloned().collect();
    let all: Vec<Elem> = fiber_union(spec, &base);
    for g in &spec.generators {
        for (a, f) in &spec.fibers {
            let img: Vec<Elem> = f.iter().filter_map(|x| g.get(x).cloned()).collect();
            let mut s = img.clone();
            s.sort();
            if s != *f {
                return Err(pre(format!("generator does not preserve the fibre over {a}")));
            }
        }
    }
    let group = close_group(&spec.generators, &all);
    let labels = subsets_up_to(&base, spec.max_degree);
    let mut copies: BTreeMap<Label, Vec<(ObjId, FnMap)>> = BTreeMap::new();
    let mut gamma: BTreeMap<Label, Vec<FnMap>> = BTreeMap::new();
    for l in &labels {
        let f = fiber_union(spec, l);
        let mut g: Vec<FnMap> = group.iter().map(|x| x.restrict(&f).expect("total")).collect();
        g.sort();
        g.dedup();
        gamma.insert(l.clone(), g);
        let cs = spec.copies.get(l).cloned().unwrap_or_else(|| vec![default_copy(l, &f)]);
        copies.insert(l.clone(), cs);
    }
    let mut degrees = BTreeMap::new();
    for n in 1..=spec.max_degree.min(base.len()) {
        let mut objects = BTreeMap::new();
        let mut component_of = BTreeMap::new();
        let mut component_label = BTreeMap::new();
        let mut morphisms = Vec::new();
        for l in labels.iter().filter(|l| l.len() == n) {
            let cid = Name::from(label_string(l));
            component_label.insert(cid.clone(), l.clone());
            let cs = &copies[l];
            for (id, rho) in cs {
                objects.insert(id.clone(), rho.image().into_iter().collect::<Vec<_>>());
                component_of.insert(id.clone(), cid.clone());
            }
            for (j, rj) in cs {
                let rj_inv = rj.inverse().ok_or_else(|| pre("copy map not injective"))?;
                for (k, rk) in cs {
                    for g in &gamma[l] {
                        let m = rk.after(&g.after(&rj_inv).expect("total")).expect("total");
                        morphisms.push(Arrow::new(j.clone(), k.clone(), m));
                    }
                }
            }
        }
        let g = ConcreteGroupoid::from_parts(objects, component_of, component_label, morphisms)?;
        degrees.insert(n, Arc::new(g));
    }
    let mut inclusions: BTreeMap<(usize, usize), Vec<Arrow>> = BTreeMap::new();
    for c in &labels {
        for d in &labels {
            if !(c.len() < d.len() && crate::name::is_sublabel(c, d)) {
                continue;
            }
            let fc = fiber_union(spec, c);
            for (j, rj) in &copies[c] {
                let rj_inv = rj.inverse().expect("injective");
                for (k, rk) in &copies[d] {
                    for g in &gamma[d] {
                        let gc = g.restrict(&fc).expect("total");
                        let m = rk.after(&gc.after(&rj_inv).expect("total")).expect("total");
                        inclusions.entry((c.len(), d.len())).or_default().push(Arrow::new(j.clone(), k.clone(), m));
                    }
                }
            }
        }
    }
    let inclusions = inclusions.into_iter().map(|(k, v)| (k, ArrowSet::new(v))).collect();
    SimplicialGroupoid::new(base, degrees, inclusions)
}

fn names(xs: &[&str]) -> Vec<Elem> {
    xs.iter().map(|x| Elem::from(*x)).collect()
}

fn swap(x: &str, y: &str, rest: &[&str]) -> FnMap {
    let mut pairs = vec![(Elem::from(x), Elem::from(y)), (Elem::from(y), Elem::from(x))];
    pairs.extend(rest.iter().map(|z| (Elem::from(*z), Elem::from(*z))));
    FnMap::from_pairs(pairs).expect("perm")
}

fn copy(id: &str, from: &[&str], to: &[&str]) -> (ObjId, FnMap) {
    (Name::from(id), FnMap::from_pairs(names(from).into_iter().zip(names(to))).expect("bijection"))
}

fn toy_spec(three: bool) -> FiberedSpec {
    let pts: &[&str] = if three { &["a", "b", "c"] } else { &["a", "b"] };
    let mut fibers = BTreeMap::new();
    for p in pts {
        fibers.insert(Name::from(*p), names(&[&format!("{p}1"), &format!("{p}2")]));
    }
    let all: Vec<String> = pts.iter().flat_map(|p| [format!("{p}1"), format!("{p}2")]).collect();
    let gens = pts
        .iter()
        .map(|p| {
            let (x, y) = (format!("{p}1"), format!("{p}2"));
            let rest: Vec<&str> = all.iter().filter(|z| **z != x && **z != y).map(|s| s.as_str()).collect();
            swap(&x, &y, &rest)
        })
        .collect();
    let mut copies = BTreeMap::new();
    copies.insert(label(["a"]), vec![copy("Pa", &["a1", "a2"], &["p1", "p2"])]);
    copies.insert(label(["b"]), vec![copy("Pb", &["b1", "b2"], &["q1", "q2"])]);
    copies.insert(label(["a", "b"]), vec![copy("Pab", &["a1", "a2", "b1", "b2"], &["r1", "r2", "r3", "r4"])]);
    if three {
        copies.insert(label(["c"]), vec![copy("Pc", &["c1", "c2"], &["s1", "s2"])]);
        copies.insert(label(["a", "c"]), vec![copy("Pac", &["a1", "a2", "c1", "c2"], &["t1", "t2", "t3", "t4"])]);
        copies.insert(label(["b", "c"]), vec![copy("Pbc", &["b1", "b2", "c1", "c2"], &["v1", "v2", "v3", "v4"])]);
        copies.insert(
            label(["a", "b", "c"]),
            vec![copy("Pabc", &["a1", "a2", "b1", "b2", "c1", "c2"], &["w1", "w2", "w3", "w4", "w5", "w6"])],
        );
    }
    FiberedSpec { fibers, generators: gens, max_degree: pts.len(), copies }
}

/// Base {a,b}; Pa={p1,p2}, Pb={q1,q2} with swaps; Pab={r1..r4} with fibrewise swaps.
pub fn sg_toy() -> SimplicialGroupoid {
    fibered_simplicial(&toy_spec(false)).expect("fixture")
}

/// Three-point version of [`sg_toy`]; its restriction to {a,b} is `sg_toy`.
pub fn sg_toy3() -> SimplicialGroupoid {
    fibered_simplicial(&toy_spec(true)).expect("fixture")
}

/// One single-element object per label, only identities.
pub fn trivial_sg(points: &[&str]) -> SimplicialGroupoid {
    let fibers = points.iter().map(|p| (Name::from(*p), vec![Elem::from(format!("t{p}"))])).collect();
    fibered_simplicial(&FiberedSpec { fibers, generators: vec![], max_degree: points.len(), copies: BTreeMap::new() })
        .expect("fixture")
}

/// Seeded random fibred spec: |A| ≤ 4, objects of size ≤ 4, one to three copies per label.
pub fn random_fibered_spec(rng: &mut impl Rng, tag: &str) -> FiberedSpec {
    let npts = rng.gen_range(1..=4usize);
    let pts: Vec<Name> = (0..npts).map(|i| Name::from(format!("{tag}a{i}"))).collect();
    let mut sizes: Vec<usize> = (0..npts).map(|_| rng.gen_range(1..=2usize)).collect();
    if npts == 1 {
        sizes[0] = rng.gen_range(1..=4);
    }
    let mut fibers = BTreeMap::new();
    for (p, &s) in pts.iter().zip(&sizes) {
        fibers.insert(p.clone(), (0..s).map(|i| Elem::from(format!("{p}x{i}"))).collect::<Vec<_>>());
    }
    let mut sorted = sizes.clone();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut max_degree = 0;
    let mut acc = 0;
    for s in sorted {
        acc += s;
        if acc > 4 {
            break;
        }
        max_degree += 1;
    }
    let ngens = rng.gen_range(0..=3usize);
    let mut generators = Vec::new();
    for _ in 0..ngens {
        let mut pairs = Vec::new();
        for f in fibers.values() {
            let mut img = f.clone();
            img.shuffle(rng);
            pairs.extend(f.iter().cloned().zip(img));
        }
        generators.push(FnMap::from_pairs(pairs).expect("perm"));
    }
    let spec0 = FiberedSpec { fibers: fibers.clone(), generators: generators.clone(), max_degree, copies: BTreeMap::new() };
    let mut copies = BTreeMap::new();
    for l in subsets_up_to(&pts, max_degree) {
        let f = fiber_union(&spec0, &l);
        let ncopies = rng.gen_range(1..=3usize);
        let ls = label_string(&l);
        let mut cs = Vec::new();
        for j in 0..ncopies {
            let mut targets: Vec<Elem> = (0..f.len()).map(|i| Elem::from(format!("{ls}#{j}.{i}"))).collect();
            targets.shuffle(rng);
            let map = FnMap::from_pairs(f.iter().cloned().zip(targets)).expect("bijection");
            cs.push((Name::from(format!("O[{ls}]#{j}")), map));
        }
        copies.insert(l, cs);
    }
    FiberedSpec { fibers, generators, max_degree, copies }
}

pub fn fuzz_simplicial(seed: u64) -> SimplicialGroupoid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fibered_simplicial(&random_fibered_spec(&mut rng, "")).expect("generated spec is valid")
}

pub fn fuzz_corpus(count: usize, seed: u64) -> Vec<SimplicialGroupoid> {
    (0..count as u64).map(|i| fuzz_simplicial(seed.wrapping_mul(1_000_003).wrapping_add(i))).collect()
}

/// A renamed copy of `sg` and the isomorphism onto it. With `twist`, each object is
/// additionally relabelled by a cyclic shift, so the isomorphism is not a plain renaming.
pub fn relabeled_copy(sg: &Arc<SimplicialGroupoid>, tag: &str, twist: bool) -> Result<(Arc<SimplicialGroupoid>, SimplicialMorphism)> {
    let mut rho: BTreeMap<ObjId, (ObjId, FnMap)> = BTreeMap::new();
    for g in sg.degrees().values() {
        for (o, es) in g.objects() {
            let mut tgt: Vec<Elem> = es.iter().map(|e| Elem::from(format!("{e}{tag}"))).collect();
            if twist && tgt.len() > 1 {
                tgt.rotate_left(1);
            }
            let m = FnMap::from_pairs(es.iter().cloned().zip(tgt)).expect("bijection");
            rho.insert(o.clone(), (Name::from(format!("{o}{tag}")), m));
        }
    }
    let conj = |a: &Arrow| -> Arrow {
        let (s, rs) = &rho[&a.source];
        let (t, rt) = &rho[&a.target];
        let m = rt.after(&a.map.after(&rs.inverse().expect("bij")).expect("total")).expect("total");
        Arrow::new(s.clone(), t.clone(), m)
    };
    let mut degrees = BTreeMap::new();
    for (&n, g) in sg.degrees() {
        let objects = g.objects().keys().map(|o| (rho[o].0.clone(), rho[o].1.image().into_iter().collect())).collect();
        let component_of = g.component_map().iter().map(|(o, c)| (rho[o].0.clone(), c.clone())).collect();
        let morphisms = g.morphisms().iter().map(conj).collect();
        degrees.insert(n, Arc::new(ConcreteGroupoid::from_parts(objects, component_of, g.components().clone(), morphisms)?));
    }
    let inclusions = sg
        .inclusions()
        .iter()
        .map(|(k, s)| (*k, s.iter().map(conj).collect::<ArrowSet>()))
        .collect();
    let copy = Arc::new(SimplicialGroupoid::new(sg.base().to_vec(), degrees, inclusions)?);
    let mut hdeg = BTreeMap::new();
    for (&n, g) in sg.degrees() {
        let mut maps = Vec::new();
        for a in g.morphisms().iter() {
            let (t, rt) = &rho[&a.target];
            maps.push(Arrow::new(a.source.clone(), t.clone(), rt.after(&a.map).expect("total")));
        }
        hdeg.insert(n, ArrowSet::new(maps));
    }
    let h = SimplicialMorphism::new(sg.clone(), copy.clone(), hdeg)?;
    Ok((copy, h))
}
