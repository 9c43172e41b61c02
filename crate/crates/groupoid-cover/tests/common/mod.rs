//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use groupoid_cover::name::is_sublabel;
use groupoid_cover::simplicial::InclusionSystem;
use groupoid_cover::structure::MultiSortedStructure;
use groupoid_cover::{Elem, FnMap, Label, Presentation};

pub fn perms(xs: &[Elem]) -> Vec<Vec<Elem>> {
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

/// Every relation tuple and the fibre map are carried into themselves.
pub fn preserves(m: &MultiSortedStructure, g: &BTreeMap<Elem, Elem>) -> bool {
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

/// Fibre-preserving permutations of the fibred sort, base fixed, that preserve M.
pub fn brute_force_fiber_group(m: &MultiSortedStructure) -> BTreeSet<BTreeMap<Elem, Elem>> {
    fibre_perms(m).into_iter().filter(|g| preserves(m, g)).collect()
}

fn fibre_perms(m: &MultiSortedStructure) -> Vec<BTreeMap<Elem, Elem>> {
    let f = m.fiber.as_ref().expect("fibred structure");
    let mut partial: Vec<BTreeMap<Elem, Elem>> = vec![BTreeMap::new()];
    for a in &f.a_set {
        let fib = f.fiber(a);
        let ps = perms(&fib);
        partial = partial
            .into_iter()
            .flat_map(|g| {
                ps.iter()
                    .map(|p| {
                        let mut g = g.clone();
                        g.extend(fib.iter().cloned().zip(p.iter().cloned()));
                        g
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    partial
}

/// Aut(M/𝕌) of a cover whose extra sorts are the fibred sort and "map code" sorts: each
/// code c in a relation named m…/n… stands for the graph {(x, y) : (c, x, y)}. A fibre
/// permutation σ extends iff σ carries every graph onto a graph, and then uniquely.
/// Returned restricted to the fibred sort.
pub fn brute_force_cover_group(m: &MultiSortedStructure) -> BTreeSet<FnMap> {
    let mut graphs: Vec<BTreeMap<Elem, BTreeSet<(Elem, Elem)>>> = Vec::new();
    for (n, r) in &m.relations {
        if !(n.starts_with('m') || n.starts_with('n')) {
            continue;
        }
        let mut g: BTreeMap<Elem, BTreeSet<(Elem, Elem)>> = BTreeMap::new();
        for t in &r.tuples {
            g.entry(t[0].clone()).or_default().insert((t[1].clone(), t[2].clone()));
        }
        graphs.push(g);
    }
    let mut out = BTreeSet::new();
    'perm: for sigma in fibre_perms(m) {
        let img = |x: &Elem| sigma.get(x).cloned().unwrap_or_else(|| x.clone());
        let mut full = sigma.clone();
        for g in &graphs {
            let back: BTreeMap<&BTreeSet<(Elem, Elem)>, &Elem> = g.iter().map(|(c, gr)| (gr, c)).collect();
            for (c, gr) in g {
                let moved: BTreeSet<(Elem, Elem)> = gr.iter().map(|(x, y)| (img(x), img(y))).collect();
                match back.get(&moved) {
                    Some(d) => {
                        full.insert(c.clone(), (*d).clone());
                    }
                    None => continue 'perm,
                }
            }
        }
        if preserves(m, &full) {
            out.insert(FnMap::from_pairs(sigma).unwrap());
        }
    }
    out
}

/// Independent commutativity oracle: every triple c ⊂ d ⊂ e, pointwise.
pub fn triples_commute(sys: &InclusionSystem) -> bool {
    let labels: Vec<&Label> = sys.chosen.keys().collect();
    for c in &labels {
        for d in &labels {
            for e in &labels {
                if c.len() < d.len() && d.len() < e.len() && is_sublabel(c, d) && is_sublabel(d, e) {
                    let (x, y, z) = (sys.map(c, d).unwrap(), sys.map(d, e).unwrap(), sys.map(c, e).unwrap());
                    for (p, _) in x.map.pairs() {
                        if y.map.get(x.map.get(p).unwrap()) != z.map.get(p) {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

/// Row echelon basis of the subgroup of ℤ^m generated by `vs`, by Euclid on columns.
pub fn span_basis(vs: &[Vec<i64>], m: usize) -> Vec<Vec<i64>> {
    let mut rows: Vec<Vec<i64>> = vs.iter().filter(|v| v.iter().any(|x| *x != 0)).cloned().collect();
    let mut basis = Vec::new();
    for col in 0..m {
        loop {
            let nz: Vec<usize> = (0..rows.len()).filter(|&i| rows[i][col] != 0).collect();
            if nz.len() <= 1 {
                break;
            }
            let p = *nz.iter().min_by_key(|&&i| rows[i][col].abs()).unwrap();
            for &i in &nz {
                if i != p {
                    let q = rows[i][col].div_euclid(rows[p][col]);
                    let pr = rows[p].clone();
                    for (a, b) in rows[i].iter_mut().zip(&pr) {
                        *a -= q * b;
                    }
                }
            }
        }
        if let Some(p) = (0..rows.len()).find(|&i| rows[i][col] != 0) {
            basis.push(rows.remove(p));
        }
        rows.retain(|v| v.iter().any(|x| *x != 0));
    }
    basis
}

/// Coordinates of v in an echelon basis, if v lies in the span.
pub fn coords(basis: &[Vec<i64>], v: &[i64]) -> Option<Vec<i64>> {
    let mut rest = v.to_vec();
    let mut out = Vec::new();
    for b in basis {
        let col = b.iter().position(|x| *x != 0).unwrap();
        if rest[col] % b[col] != 0 {
            return None;
        }
        let c = rest[col] / b[col];
        for (r, x) in rest.iter_mut().zip(b) {
            *r -= c * x;
        }
        out.push(c);
    }
    rest.iter().all(|x| *x == 0).then_some(out)
}

/// Exhaustive: is there a homomorphism ⟨B⟩ → K (K finite) with b_i ↦ f_i?
pub fn hom_exists(p: &Presentation, b: &[Vec<i64>], f: &[Vec<i64>]) -> bool {
    let basis = span_basis(b, p.base_rank);
    let cs: Vec<Vec<i64>> = b.iter().map(|v| coords(&basis, v).unwrap()).collect();
    let ks = p.elements().unwrap();
    let mut assign: Vec<Vec<Vec<i64>>> = vec![vec![]];
    for _ in 0..basis.len() {
        assign = assign.into_iter().flat_map(|a| ks.iter().map(move |k| [a.clone(), vec![k.clone()]].concat())).collect();
    }
    assign.iter().any(|phi| cs.iter().zip(f).all(|(c, fi)| p.is_zero(&p.add(&p.combine(c, phi), &p.scale(&-1, fi)))))
}
