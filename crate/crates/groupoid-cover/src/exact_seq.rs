//! The (ℤ/4)^n cover of (ℤ/2)^n and the abelian toolkit: relation lattices, extension
//! checks for partial morphisms, sections with formal roots, and bounded-relation levels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::sync::Arc;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{pre, Result};
use crate::groupoid::ConcreteGroupoid;
use crate::map::{Arrow, FnMap};
use crate::name::{Elem, Name};
use crate::simplicial::{ProjectiveGroupoidSystem, Projection};
use crate::structure::{FiberMap, MultiSortedStructure};

/// Integer scalars usable by the lattice toolkit.
pub trait Int: Integer + Signed + Clone + Debug + Display + Hash + FromPrimitive + ToPrimitive {}
impl<T: Integer + Signed + Clone + Debug + Display + Hash + FromPrimitive + ToPrimitive> Int for T {}

fn int<T: Int>(x: i64) -> T {
    T::from_i64(x).expect("small integer")
}

// ---------------------------------------------------------------- z4 cover

#[derive(Clone, Debug)]
pub struct Z4Cover {
    pub n: usize,
    pub structure: MultiSortedStructure,
}

pub const Z4_MAX_N: usize = 3;

fn digits(v: &[u8]) -> String {
    v.iter().map(|d| char::from(b'0' + d)).collect()
}

fn vectors(n: usize, q: u8) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out.into_iter().flat_map(|v| (0..q).map(move |d| [v.clone(), vec![d]].concat())).collect();
    }
    out
}

impl Z4Cover {
    pub fn u(v: &[u8]) -> Elem {
        Name::from(format!("u{}", digits(v)))
    }

    pub fn s(v: &[u8]) -> Elem {
        Name::from(format!("s{}", digits(v)))
    }

    pub fn u_vectors(&self) -> Vec<Vec<u8>> {
        vectors(self.n, 2)
    }

    pub fn s_vectors(&self) -> Vec<Vec<u8>> {
        vectors(self.n, 4)
    }

    pub fn fiber(&self, a: &[u8]) -> Vec<Elem> {
        self.structure.fiber.as_ref().expect("fibre map").fiber(&Self::u(a))
    }

    /// Fibrewise translation: on S_a add ι(x_a). Missing fibres are left fixed.
    pub fn translation(&self, x: &BTreeMap<Vec<u8>, Vec<u8>>) -> FnMap {
        FnMap::from_pairs(self.s_vectors().into_iter().map(|s| {
            let a: Vec<u8> = s.iter().map(|d| d % 2).collect();
            let t = x.get(&a).cloned().unwrap_or_else(|| vec![0; self.n]);
            let img: Vec<u8> = s.iter().zip(&t).map(|(d, e)| (d + 2 * e) % 4).collect();
            (Self::s(&s), Self::s(&img))
        }))
        .expect("translation is a function")
    }

    /// 0 → U →ι S →π U → 0 is exact (checked on the relations by enumeration).
    pub fn check_exact(&self) -> bool {
        let m = &self.structure;
        let graph = |r: &str| -> BTreeMap<Elem, Elem> {
            m.relations[r].tuples.iter().map(|t| (t[0].clone(), t[1].clone())).collect()
        };
        let iota = graph("iota");
        let pi = graph("pi");
        let add_s: BTreeSet<&Vec<Elem>> = m.relations["addS"].tuples.iter().collect();
        let add_u: BTreeSet<&Vec<Elem>> = m.relations["addU"].tuples.iter().collect();
        let zero_s = Self::s(&vec![0; self.n]);
        let zero_u = Self::u(&vec![0; self.n]);
        let injective = iota.values().collect::<BTreeSet<_>>().len() == iota.len();
        let iota_hom = add_u.iter().all(|t| add_s.contains(&vec![iota[&t[0]].clone(), iota[&t[1]].clone(), iota[&t[2]].clone()]));
        let pi_hom = add_s.iter().all(|t| add_u.contains(&vec![pi[&t[0]].clone(), pi[&t[1]].clone(), pi[&t[2]].clone()]));
        let surjective = pi.values().collect::<BTreeSet<_>>().len() == self.u_vectors().len();
        let image: BTreeSet<&Elem> = iota.values().collect();
        let kernel: BTreeSet<&Elem> = pi.iter().filter(|(_, v)| **v == zero_u).map(|(k, _)| k).collect();
        injective && iota_hom && pi_hom && surjective && image == kernel && iota[&zero_u] == zero_s
    }
}

pub fn build_z4_example(n: usize) -> Result<Z4Cover> {
    if n == 0 || n > Z4_MAX_N {
        return Err(pre(format!("n must be in 1..={Z4_MAX_N}, got {n}")));
    }
    let us = vectors(n, 2);
    let ss = vectors(n, 4);
    let add = |a: &[u8], b: &[u8], q: u8| -> Vec<u8> { a.iter().zip(b).map(|(x, y)| (x + y) % q).collect() };
    let mut m = MultiSortedStructure::default();
    m.add_sort("U", us.iter().map(|v| Z4Cover::u(v)).collect());
    m.add_sort("S", ss.iter().map(|v| Z4Cover::s(v)).collect());
    m.base_sorts.insert(Name::from("U"));
    let mut t = Vec::new();
    for a in &us {
        for b in &us {
            t.push(vec![Z4Cover::u(a), Z4Cover::u(b), Z4Cover::u(&add(a, b, 2))]);
        }
    }
    m.add_relation("addU", &["U", "U", "U"], t);
    let mut t = Vec::new();
    for a in &ss {
        for b in &ss {
            t.push(vec![Z4Cover::s(a), Z4Cover::s(b), Z4Cover::s(&add(a, b, 4))]);
        }
    }
    m.add_relation("addS", &["S", "S", "S"], t);
    let iota = |a: &[u8]| -> Vec<u8> { a.iter().map(|d| 2 * d).collect() };
    let pi = |s: &[u8]| -> Vec<u8> { s.iter().map(|d| d % 2).collect() };
    m.add_relation("iota", &["U", "S"], us.iter().map(|a| vec![Z4Cover::u(a), Z4Cover::s(&iota(a))]));
    m.add_relation("pi", &["S", "U"], ss.iter().map(|s| vec![Z4Cover::s(s), Z4Cover::u(&pi(s))]));
    m.fiber = Some(FiberMap {
        s_sort: Name::from("S"),
        a_sort: Name::from("U"),
        a_set: us.iter().map(|v| Z4Cover::u(v)).collect(),
        map: ss.iter().map(|s| (Z4Cover::s(s), Z4Cover::u(&pi(s)))).collect(),
    });
    let z = Z4Cover { n, structure: m };
    if !z.check_exact() {
        return Err(crate::error::Error::Invariant("z4 sequence is not exact".into()));
    }
    Ok(z)
}

/// Outcome of the depth-k determinacy check.
#[derive(Clone, Debug)]
pub struct DeterminacyReport {
    pub depth: usize,
    pub families: usize,
    pub extending: usize,
    /// Every family is fibrewise translation by some x_a with x_0 = 0 and x_{a+b} = x_a + x_b.
    pub additive: bool,
    pub holds: bool,
}

/// Enumerates the compatible families (σ_c̄)_{|c̄|≤depth} and checks that each extends.
pub fn z4_depth_determinacy(z: &Z4Cover, depth: usize) -> Result<DeterminacyReport> {
    let fg = crate::binding::fiber_groups(&z.structure, depth, crate::binding::GammaMode::Projected, 0)?;
    let families = crate::binding::compatible_families(&fg, depth)?;
    let base = FnMap::identity(&z.structure.base_elements());
    let mut extending = 0;
    let mut additive = true;
    for fam in &families {
        let full = fam.union(&base).expect("disjoint sorts");
        if crate::structure::preserves_relations(&z.structure, &full) {
            extending += 1;
        }
        match translation_vector(z, fam) {
            Some(x) => {
                let zero = vec![0u8; z.n];
                if x[&zero] != zero {
                    additive = false;
                }
                for a in z.u_vectors() {
                    for b in z.u_vectors() {
                        let ab: Vec<u8> = a.iter().zip(&b).map(|(p, q)| (p + q) % 2).collect();
                        let sum: Vec<u8> = x[&a].iter().zip(&x[&b]).map(|(p, q)| (p + q) % 2).collect();
                        if x[&ab] != sum {
                            additive = false;
                        }
                    }
                }
            }
            None => additive = false,
        }
    }
    Ok(DeterminacyReport {
        depth,
        families: families.len(),
        extending,
        additive,
        holds: extending == families.len(),
    })
}

pub fn z4_depth3_determinacy(z: &Z4Cover) -> Result<DeterminacyReport> {
    z4_depth_determinacy(z, 3)
}

/// x_a with σ|S_a = translation by ι(x_a), when σ has that shape on every fibre.
pub fn translation_vector(z: &Z4Cover, sigma: &FnMap) -> Option<BTreeMap<Vec<u8>, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for a in z.u_vectors() {
        let rep: Vec<u8> = a.clone();
        let img = sigma.get(&Z4Cover::s(&rep))?;
        let img: Vec<u8> = img[1..].bytes().map(|b| b - b'0').collect();
        let x: Vec<u8> = img.iter().zip(&rep).map(|(i, r)| ((i + 4 - r) % 4) / 2).collect();
        out.insert(a, x);
    }
    if z.translation(&out).pairs().iter().all(|(s, t)| sigma.get(s).map_or(true, |v| v == t)) {
        Some(out)
    } else {
        None
    }
}

// ---------------------------------------------------------------- lattices

/// Hermite basis of the lattice spanned by `vectors` (rows), canonical for the lattice:
/// positive pivots, entries above each pivot reduced into [0, pivot).
pub fn hermite_basis<T: Int>(vectors: &[Vec<T>]) -> Vec<Vec<T>> {
    let width = vectors.first().map_or(0, |v| v.len());
    let mut rows: Vec<Vec<T>> = vectors.iter().filter(|v| v.iter().any(|x| !x.is_zero())).cloned().collect();
    let piv = echelon(&mut rows, 0, width);
    rows.truncate(piv.len());
    for (r, &c) in piv.iter().enumerate() {
        if rows[r][c].is_negative() {
            rows[r] = rows[r].iter().map(|x| -x.clone()).collect();
        }
        for above in 0..r {
            let q = rows[above][c].div_floor(&rows[r][c]);
            if !q.is_zero() {
                let sub: Vec<T> = rows[r].iter().map(|x| x.clone() * q.clone()).collect();
                for (x, s) in rows[above].iter_mut().zip(sub) {
                    *x = x.clone() - s;
                }
            }
        }
    }
    rows
}

/// Integer row echelon on columns [from, to); returns pivot columns, pivot rows first.
fn echelon<T: Int>(rows: &mut [Vec<T>], from: usize, to: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in from..to {
        loop {
            let mut best: Option<usize> = None;
            for i in r..rows.len() {
                if !rows[i][c].is_zero() && best.map_or(true, |b| rows[i][c].abs() < rows[b][c].abs()) {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            rows.swap(r, b);
            let mut done = true;
            for i in r + 1..rows.len() {
                if rows[i][c].is_zero() {
                    continue;
                }
                let q = rows[i][c].div_floor(&rows[r][c]);
                let sub: Vec<T> = rows[r].iter().map(|x| x.clone() * q.clone()).collect();
                for (x, s) in rows[i].iter_mut().zip(sub) {
                    *x = x.clone() - s;
                }
                if !rows[i][c].is_zero() {
                    done = false;
                }
            }
            if done {
                pivots.push(c);
                r += 1;
                break;
            }
        }
        if r == rows.len() {
            break;
        }
    }
    pivots
}

fn reduce_by<T: Int>(basis: &[Vec<T>], v: &[T]) -> Vec<T> {
    let mut v = v.to_vec();
    for row in basis {
        let Some(c) = row.iter().position(|x| !x.is_zero()) else { continue };
        let (q, _) = v[c].div_mod_floor(&row[c]);
        for (x, b) in v.iter_mut().zip(row) {
            *x = x.clone() - q.clone() * b.clone();
        }
    }
    v
}

/// {k ∈ ℤⁿ : Σ k_i c_i = 0} for a tuple c̄ of vectors in ℤ^m.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationLattice<T> {
    pub tuple: Vec<Vec<T>>,
    pub basis: Vec<Vec<T>>,
}

impl<T: Int> RelationLattice<T> {
    pub fn n(&self) -> usize {
        self.tuple.len()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn is_relation(&self, k: &[T]) -> bool {
        let m = self.tuple.first().map_or(0, |v| v.len());
        (0..m).all(|j| {
            let mut s = T::zero();
            for (ki, ci) in k.iter().zip(&self.tuple) {
                s = s + ki.clone() * ci[j].clone();
            }
            s.is_zero()
        })
    }

    pub fn contains(&self, k: &[T]) -> bool {
        reduce_by(&self.basis, k).iter().all(|x| x.is_zero())
    }

    pub fn contains_lattice(&self, other: &[Vec<T>]) -> bool {
        other.iter().all(|v| self.contains(v))
    }
}

pub fn relation_lattice<T: Int>(tuple: &[Vec<T>]) -> Result<RelationLattice<T>> {
    let m = tuple.first().map_or(0, |v| v.len());
    if tuple.iter().any(|v| v.len() != m) {
        return Err(pre("tuple entries have different dimensions"));
    }
    let n = tuple.len();
    let mut rows: Vec<Vec<T>> = tuple
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut r = c.clone();
            r.extend((0..n).map(|j| if i == j { T::one() } else { T::zero() }));
            r
        })
        .collect();
    let piv = echelon(&mut rows, 0, m);
    let kernel: Vec<Vec<T>> = rows[piv.len()..].iter().map(|r| r[m..].to_vec()).collect();
    Ok(RelationLattice { tuple: tuple.to_vec(), basis: hermite_basis(&kernel) })
}

/// Coefficients k with Σ k_i b_i = x, if x ∈ ⟨B⟩.
pub fn solve_combination<T: Int>(b: &[Vec<T>], x: &[T]) -> Option<Vec<T>> {
    let m = x.len();
    let n = b.len();
    let mut rows: Vec<Vec<T>> = b
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut r = c.clone();
            r.extend((0..n).map(|j| if i == j { T::one() } else { T::zero() }));
            r
        })
        .collect();
    let piv = echelon(&mut rows, 0, m);
    let mut v: Vec<T> = x.to_vec();
    v.extend((0..n).map(|_| T::zero()));
    for (r, &c) in piv.iter().enumerate() {
        let (q, rem) = v[c].div_mod_floor(&rows[r][c]);
        if !rem.is_zero() {
            return None;
        }
        for (a, bb) in v.iter_mut().zip(&rows[r]) {
            *a = a.clone() - q.clone() * bb.clone();
        }
    }
    if v[..m].iter().any(|a| !a.is_zero()) {
        return None;
    }
    Some(v[m..].iter().map(|a| -a.clone()).collect())
}

/// K = ℤ^d ⊕ ⊕ ℤ/t_j; the lattice side lives in ℤ^m.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbelianPresentation<T> {
    pub base_rank: usize,
    pub free_rank: usize,
    pub torsion: Vec<T>,
}

impl<T: Int> AbelianPresentation<T> {
    pub fn finite(base_rank: usize, torsion: Vec<T>) -> Result<Self> {
        let p = AbelianPresentation { base_rank, free_rank: 0, torsion };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if self.torsion.iter().any(|t| !t.is_positive()) {
            return Err(pre("torsion orders must be positive"));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.free_rank + self.torsion.len()
    }

    pub fn normalize(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .enumerate()
            .map(|(i, v)| if i < self.free_rank { v.clone() } else { v.mod_floor(&self.torsion[i - self.free_rank]) })
            .collect()
    }

    pub fn add(&self, x: &[T], y: &[T]) -> Vec<T> {
        self.normalize(&x.iter().zip(y).map(|(a, b)| a.clone() + b.clone()).collect::<Vec<_>>())
    }

    pub fn scale(&self, k: &T, x: &[T]) -> Vec<T> {
        self.normalize(&x.iter().map(|a| a.clone() * k.clone()).collect::<Vec<_>>())
    }

    pub fn zero(&self) -> Vec<T> {
        vec![T::zero(); self.width()]
    }

    pub fn is_zero(&self, x: &[T]) -> bool {
        self.normalize(x).iter().all(|v| v.is_zero())
    }

    pub fn combine(&self, k: &[T], f: &[Vec<T>]) -> Vec<T> {
        k.iter().zip(f).fold(self.zero(), |acc, (ki, fi)| self.add(&acc, &self.scale(ki, fi)))
    }

    /// All elements when K is finite.
    pub fn elements(&self) -> Option<Vec<Vec<T>>> {
        if self.free_rank > 0 {
            return None;
        }
        let mut out = vec![vec![]];
        for t in &self.torsion {
            let k = t.to_i64()?;
            out = out
                .into_iter()
                .flat_map(|v: Vec<T>| (0..k).map(move |x| [v.clone(), vec![int::<T>(x)]].concat()))
                .collect();
        }
        Some(out)
    }
}

#[derive(Clone, Debug)]
pub struct ExtensionCheck<T> {
    pub extends: bool,
    pub lattice: RelationLattice<T>,
    /// A basis relation n̄ with Σ n_i f(b_i) ≠ 0.
    pub violated: Option<Vec<T>>,
}

/// Does b_i ↦ f(b_i) extend to a morphism ⟨B⟩ → K?
pub fn morphism_extension_check<T: Int>(
    p: &AbelianPresentation<T>,
    b: &[Vec<T>],
    f: &[Vec<T>],
) -> Result<ExtensionCheck<T>> {
    p.check()?;
    if b.len() != f.len() {
        return Err(pre("B and f have different lengths"));
    }
    if b.iter().any(|v| v.len() != p.base_rank) || f.iter().any(|v| v.len() != p.width()) {
        return Err(pre("element dimensions do not match the presentation"));
    }
    let lattice = relation_lattice(b)?;
    let violated = lattice.basis.iter().find(|k| !p.is_zero(&p.combine(k, f))).cloned();
    Ok(ExtensionCheck { extends: violated.is_none(), lattice, violated })
}

/// The extension rule Σ n_i b_i ↦ Σ n_i f(b_i) at x; None if x ∉ ⟨B⟩.
pub fn extension_value<T: Int>(p: &AbelianPresentation<T>, b: &[Vec<T>], f: &[Vec<T>], x: &[T]) -> Option<Vec<T>> {
    solve_combination(b, x).map(|k| p.combine(&k, f))
}

// ---------------------------------------------------------------- sections

/// A word in formal roots: each term (i, b, a) is h_{i,1/b}^a, with (h_{i,1/kb})^k = h_{i,1/b}.
#[derive(Clone, Debug)]
pub struct RootWord<T> {
    pub terms: Vec<(usize, T, T)>,
}

impl<T: Int> RootWord<T> {
    pub fn identity() -> Self {
        RootWord { terms: vec![] }
    }

    pub fn root(i: usize, b: T, a: T) -> Self {
        RootWord { terms: vec![(i, b, a)] }
    }

    pub fn mul(&self, other: &RootWord<T>) -> RootWord<T> {
        RootWord { terms: self.terms.iter().chain(&other.terms).cloned().collect() }
    }

    /// One term per generator over the least common root, exponent reduced.
    pub fn normal_form(&self) -> BTreeMap<usize, (T, T)> {
        let mut acc: BTreeMap<usize, (T, T)> = BTreeMap::new();
        for (i, b, a) in &self.terms {
            let e = acc.entry(*i).or_insert((T::one(), T::zero()));
            let l = e.0.lcm(b);
            let exp = e.1.clone() * (l.clone() / e.0.clone()) + a.clone() * (l.clone() / b.clone());
            *e = (l, exp);
        }
        acc.into_iter()
            .filter(|(_, (_, a))| !a.is_zero())
            .map(|(i, (b, a))| {
                let g = b.gcd(&a);
                (i, (b / g.clone(), a / g))
            })
            .collect()
    }

    /// Exponent of h_{i,1/b} expressing the i-th part, if b is a multiple of its root.
    pub fn exponent_at(&self, i: usize, b: &T) -> Option<T> {
        match self.normal_form().get(&i) {
            None => Some(T::zero()),
            Some((d, a)) if b.is_multiple_of(d) => Some(a.clone() * (b.clone() / d.clone())),
            _ => None,
        }
    }
}

impl<T: Int> PartialEq for RootWord<T> {
    fn eq(&self, other: &Self) -> bool {
        self.normal_form() == other.normal_form()
    }
}

/// s on the ℚ-span of a ℤ-basis g_i ⊂ ℚ^m, via s(Σ (a_i/b_i) g_i) = Π h_{i,1/b_i}^{a_i}.
#[derive(Clone, Debug)]
pub struct Section<T> {
    pub generators: Vec<Vec<Ratio<T>>>,
}

pub fn extend_section<T: Int>(generators: Vec<Vec<Ratio<T>>>, values: Vec<Vec<Ratio<T>>>) -> Result<Section<T>> {
    if generators.len() != values.len() {
        return Err(pre("one section value per generator is required"));
    }
    for (i, (g, v)) in generators.iter().zip(&values).enumerate() {
        if g != v {
            return Err(pre(format!("π(s(g_{i})) ≠ g_{i}: not a section on generators")));
        }
    }
    if rational_rank(&generators) != generators.len() {
        return Err(pre("generators are not linearly independent"));
    }
    Ok(Section { generators })
}

fn rational_rank<T: Int>(rows: &[Vec<Ratio<T>>]) -> usize {
    let mut rows = rows.to_vec();
    let width = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..width {
        let Some(p) = (rank..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(rank, p);
        for i in 0..rows.len() {
            if i != rank && !rows[i][c].is_zero() {
                let f = rows[i][c].clone() / rows[rank][c].clone();
                let sub: Vec<Ratio<T>> = rows[rank].iter().map(|x| x.clone() * f.clone()).collect();
                for (x, s) in rows[i].iter_mut().zip(sub) {
                    *x = x.clone() - s;
                }
            }
        }
        rank += 1;
    }
    rank
}

impl<T: Int> Section<T> {
    /// s at Σ q_i g_i, each q_i given as an unreduced fraction (a_i, b_i), b_i > 0.
    pub fn eval_fractions(&self, q: &[(T, T)]) -> Result<RootWord<T>> {
        if q.len() != self.generators.len() {
            return Err(pre("coordinate count differs from the number of generators"));
        }
        let mut w = RootWord::identity();
        for (i, (a, b)) in q.iter().enumerate() {
            if !b.is_positive() {
                return Err(pre("denominators must be positive"));
            }
            w = w.mul(&RootWord::root(i, b.clone(), a.clone()));
        }
        Ok(w)
    }

    pub fn eval(&self, q: &[Ratio<T>]) -> Result<RootWord<T>> {
        let fr: Vec<(T, T)> = q.iter().map(|r| (r.numer().clone(), r.denom().clone())).collect();
        self.eval_fractions(&fr)
    }

    /// π of a root word: Σ (a/b) g_i.
    pub fn project(&self, w: &RootWord<T>) -> Vec<Ratio<T>> {
        let m = self.generators.first().map_or(0, |g| g.len());
        let mut out = vec![Ratio::from_integer(T::zero()); m];
        for (i, (b, a)) in w.normal_form() {
            let q = Ratio::new(a, b);
            for (o, g) in out.iter_mut().zip(&self.generators[i]) {
                *o = o.clone() + q.clone() * g.clone();
            }
        }
        out
    }

    pub fn point(&self, q: &[Ratio<T>]) -> Vec<Ratio<T>> {
        let m = self.generators.first().map_or(0, |g| g.len());
        let mut out = vec![Ratio::from_integer(T::zero()); m];
        for (qi, g) in q.iter().zip(&self.generators) {
            for (o, x) in out.iter_mut().zip(g) {
                *o = o.clone() + qi.clone() * x.clone();
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SectionLawReport {
    pub samples: usize,
    pub morphism_failures: usize,
    pub section_failures: usize,
    pub well_defined_failures: usize,
}

impl SectionLawReport {
    pub fn ok(&self) -> bool {
        self.morphism_failures == 0 && self.section_failures == 0 && self.well_defined_failures == 0
    }
}

/// s(x+y) = s(x)s(y), π∘s = id and independence of the fraction representative,
/// on random rational coordinates.
pub fn verify_section_laws<T: Int>(s: &Section<T>, rng: &mut impl Rng, samples: usize) -> Result<SectionLawReport> {
    let r = s.generators.len();
    let mut rep = SectionLawReport { samples, ..Default::default() };
    let draw = |rng: &mut dyn rand::RngCore| -> (i64, i64) { (rng.gen_range(-30..=30), rng.gen_range(1..=12)) };
    for _ in 0..samples {
        let x: Vec<(i64, i64)> = (0..r).map(|_| draw(rng)).collect();
        let y: Vec<(i64, i64)> = (0..r).map(|_| draw(rng)).collect();
        let k: i64 = rng.gen_range(2..=5);
        let xr: Vec<Ratio<T>> = x.iter().map(|(a, b)| Ratio::new(int(*a), int(*b))).collect();
        let yr: Vec<Ratio<T>> = y.iter().map(|(a, b)| Ratio::new(int(*a), int(*b))).collect();
        let sum: Vec<Ratio<T>> = xr.iter().zip(&yr).map(|(a, b)| a.clone() + b.clone()).collect();
        let sx = s.eval(&xr)?;
        let sy = s.eval(&yr)?;
        // s(x+y) through the cross-multiplied representative (a d + b c)/(b d)
        let cross: Vec<(T, T)> =
            x.iter().zip(&y).map(|((a, b), (c, d))| (int(a * d + b * c), int(b * d))).collect();
        if s.eval_fractions(&cross)? != sx.mul(&sy) || s.eval(&sum)? != sx.mul(&sy) {
            rep.morphism_failures += 1;
        }
        if s.project(&sx) != s.point(&xr) {
            rep.section_failures += 1;
        }
        let scaled: Vec<(T, T)> = x.iter().map(|(a, b)| (int(a * k), int(b * k))).collect();
        let plain: Vec<(T, T)> = x.iter().map(|(a, b)| (int(*a), int(*b))).collect();
        if s.eval_fractions(&scaled)? != s.eval_fractions(&plain)? {
            rep.well_defined_failures += 1;
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------- bounded relations

/// A character x : ℤⁿ → ℤ/q killing the bounded lattice but not `broken`; read as the
/// fibrewise translation m_{λ,μ} that respects every bounded relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationWitness<T> {
    pub modulus: T,
    pub translation: Vec<T>,
    pub broken: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct BoundedLattice<T> {
    pub bound: u32,
    pub full: RelationLattice<T>,
    pub bounded: Vec<Vec<T>>,
    pub strict: bool,
    pub witness: Option<TranslationWitness<T>>,
}

pub const BOX_LIMIT: u64 = 5_000_000;

fn box_vectors<T: Int>(n: usize, bound: i64) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| (-bound..=bound).map(move |x| [v.clone(), vec![int::<T>(x)]].concat()))
            .collect();
    }
    out
}

pub fn bounded_relation_lattice<T: Int>(tuple: &[Vec<T>], bound: u32) -> Result<BoundedLattice<T>> {
    if bound == 0 {
        return Err(pre("bound must be at least 1"));
    }
    let n = tuple.len();
    if (2 * bound as u64 + 1).checked_pow(n as u32).map_or(true, |s| s > BOX_LIMIT) {
        return Err(pre("coefficient box too large"));
    }
    let full = relation_lattice(tuple)?;
    let rels: Vec<Vec<T>> =
        box_vectors::<T>(n, bound as i64).into_iter().filter(|k| k.iter().any(|x| !x.is_zero()) && full.is_relation(k)).collect();
    let bounded = hermite_basis(&rels);
    let bl = RelationLattice { tuple: tuple.to_vec(), basis: bounded.clone() };
    let broken = full.basis.iter().find(|v| !bl.contains(v)).cloned();
    let witness = match &broken {
        Some(v) => find_character(&bounded, v, n),
        None => None,
    };
    Ok(BoundedLattice { bound, full, bounded, strict: broken.is_some(), witness })
}

fn find_character<T: Int>(kill: &[Vec<T>], keep: &[T], n: usize) -> Option<TranslationWitness<T>> {
    for q in 2i64..=64 {
        if (q as u64).checked_pow(n as u32).map_or(true, |s| s > 200_000) {
            break;
        }
        let qt: T = int(q);
        let mut xs: Vec<Vec<T>> = vec![vec![]];
        for _ in 0..n {
            xs = xs.into_iter().flat_map(|v| (0..q).map(move |x| [v.clone(), vec![int::<T>(x)]].concat())).collect();
        }
        let pair = |k: &[T], x: &[T]| -> T {
            k.iter().zip(x).fold(T::zero(), |a, (u, v)| a + u.clone() * v.clone()).mod_floor(&qt)
        };
        for x in xs {
            if kill.iter().all(|k| pair(k, &x).is_zero()) && !pair(keep, &x).is_zero() {
                return Some(TranslationWitness { modulus: qt, translation: x, broken: keep.to_vec() });
            }
        }
    }
    None
}

// ---------------------------------------------------------------- bounded-relation levels

pub fn dcf_element(i: usize, v: i64) -> Elem {
    Name::from(format!("k{v}@c{}", i + 1))
}

/// One level: a single object ⋃ K × {c_i} with K = ℤ/q, morphisms the fibrewise translations
/// x ∈ Kⁿ satisfying every relation of the bounded lattice at `bound`.
pub fn canonical_dcf_groupoid(tuple: &[Vec<i64>], q: i64, bound: u32) -> Result<ConcreteGroupoid> {
    if q <= 0 {
        return Err(pre("the coefficient group must be finite (q ≥ 1)"));
    }
    let n = tuple.len();
    let distinct: BTreeSet<&Vec<i64>> = tuple.iter().collect();
    if distinct.len() != n {
        return Err(pre("tuple entries must be distinct"));
    }
    if (q as u64).checked_pow(n as u32).map_or(true, |s| s > 100_000) {
        return Err(pre("level too large to materialise"));
    }
    let bl = bounded_relation_lattice(tuple, bound)?;
    let elems: Vec<Elem> = (0..n).flat_map(|i| (0..q).map(move |v| dcf_element(i, v))).collect();
    let mut xs: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..n {
        xs = xs.into_iter().flat_map(|v| (0..q).map(move |x| [v.clone(), vec![x]].concat())).collect();
    }
    let obj = Name::from("O");
    let arrows: Vec<Arrow> = xs
        .into_iter()
        .filter(|x| bl.bounded.iter().all(|k| k.iter().zip(x).map(|(a, b)| a * b).sum::<i64>().rem_euclid(q) == 0))
        .map(|x| {
            let map = FnMap::from_pairs(
                (0..n).flat_map(|i| (0..q).map(move |v| (i, v))).map(|(i, v)| (dcf_element(i, v), dcf_element(i, (v + x[i]).rem_euclid(q)))),
            )
            .expect("translation");
            Arrow::new(obj.clone(), obj.clone(), map)
        })
        .collect();
    let points: Vec<Name> = (0..n).map(|i| Name::from(format!("c{}", i + 1))).collect();
    let comp = Name::from("C");
    ConcreteGroupoid::from_parts(
        [(obj.clone(), elems)].into_iter().collect(),
        [(obj, comp.clone())].into_iter().collect(),
        [(comp, crate::name::label(points.iter().map(|p| p.as_str())))].into_iter().collect(),
        arrows,
    )
}

/// Levels at the given bounds; a higher bound projects onto a lower one by the identity on
/// elements, carrying its (smaller) morphism group into the lower level's.
pub fn dcf_projective_system(tuple: &[Vec<i64>], q: i64, bounds: &[u32]) -> Result<ProjectiveGroupoidSystem> {
    let mut levels = BTreeMap::new();
    let names: Vec<(u32, Name)> = bounds.iter().map(|b| (*b, Name::from(format!("N{b:03}")))).collect();
    for (b, nm) in &names {
        levels.insert(nm.clone(), Arc::new(canonical_dcf_groupoid(tuple, q, *b)?));
    }
    let mut order = BTreeSet::new();
    let mut projections = BTreeMap::new();
    for (bi, i) in &names {
        for (bj, j) in &names {
            if bi < bj {
                order.insert((i.clone(), j.clone()));
                let lj = &levels[j];
                let elems: Vec<Elem> = lj.objects().values().flatten().cloned().collect();
                projections.insert(
                    (i.clone(), j.clone()),
                    Projection {
                        objects: lj.object_ids().map(|o| (o.clone(), o.clone())).collect(),
                        elements: FnMap::identity(&elems),
                    },
                );
            }
        }
    }
    Ok(ProjectiveGroupoidSystem { levels, order, projections })
}
