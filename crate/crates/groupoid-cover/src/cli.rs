//! The `gcover` command line: one verb per operation, JSON documents in and out.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::binding::{
    build_cover_with, extract_binding_simplicial_groupoid, global_fiber_group, projective_limit_aut,
    verify_binding_statement, BindingExtraction, ExtractOptions, GammaMode, SORT_POINT,
};
use crate::error::{Error, Result};
use crate::exact_seq::{
    bounded_relation_lattice, build_z4_example, canonical_dcf_groupoid, dcf_projective_system, extend_section,
    morphism_extension_check, relation_lattice, verify_section_laws, z4_depth3_determinacy, AbelianPresentation,
};
use crate::fixtures::{fuzz_corpus, relabeled_copy, sg_toy, sg_toy3, trivial_sg};
use crate::functors::{
    build_epsilon, build_eta, check_cover_morphism, check_functor_laws, cover_for_eta, eta_transports_groups,
    functor_c_on_morphism, functor_g_on_morphism, law_corpus,
};
use crate::groupoid::validate_groupoid;
use crate::io::{read_document, write_atomic, write_document, Document, InputDigest, MorphismDoc, Provenance, Report, StructureDoc};
use crate::map::FnMap;
use crate::name::{label, label_string, Label, Name};
use crate::simplicial::{
    build_inclusion_system, find_coherent_family, validate_coherent_family, validate_inclusion_system,
    validate_simplicial, validate_simplicial_morphism, validate_system, CoherentFamily, SimplicialGroupoid,
    SimplicialMorphism, SystemSeed,
};
use crate::structure::{
    automorphism_chain, check_stable_embedding, restrict_structure, validate_structure, Constraints,
    RestrictSpec,
};

#[derive(Parser, Debug)]
#[command(name = "gcover", version, about = "Groupoids, simplicial groupoids and covers of finite structures")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Io {
    /// Input document
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Write the report here (atomically)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the produced document (groupoid, structure, morphism, ...) here
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ExtractArgs {
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub orbit_arity: usize,
    /// projected | restricted
    #[arg(long, default_value = "projected")]
    pub mode: String,
}

#[derive(Subcommand, Debug)]
pub enum Verb {
    /// Check the invariants of any document
    Validate {
        #[command(flatten)]
        io: Io,
    },
    /// Automorphism group of a structure
    Aut {
        #[command(flatten)]
        io: Io,
        /// Fix the base sorts pointwise
        #[arg(long)]
        over_base: bool,
    },
    /// Does every automorphism of --sub extend to --in?
    StabEmbed {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        sub: PathBuf,
    },
    /// Induced structure on some sorts, with parameters and orbit relations
    Restrict {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        sorts: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        params: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        elements: Option<Vec<String>>,
        #[arg(long, default_value_t = 2)]
        orbit_arity: usize,
    },
    /// Binding simplicial groupoid of a cover
    Extract {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        ex: ExtractArgs,
    },
    /// Cover built from a simplicial groupoid
    BuildCover {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        seed_choices: Vec<usize>,
        #[arg(long, default_value = "")]
        tag: String,
        #[arg(long, default_value = SORT_POINT)]
        point_sort: String,
    },
    /// Compare groupoid and structure automorphism groups of the O_* objects
    VerifyBinding {
        #[command(flatten)]
        io: Io,
        /// Comma-separated points of one component; all components of size ≤ 3 if absent
        #[arg(long)]
        component: Option<String>,
        #[arg(long, value_delimiter = ',')]
        seed_choices: Vec<usize>,
    },
    /// Projective limit of the binding groups at depth k against the global group
    ProjectiveLimit {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        ex: ExtractArgs,
    },
    /// Commuting system of inclusions
    InclusionSystem {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        seed_choices: Vec<usize>,
    },
    /// Coherent family for a simplicial isomorphism
    CoherentFamily {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        seed_choices: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        target_choices: Vec<usize>,
    },
    /// G on a cover morphism
    FunctorG {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        ex: ExtractArgs,
    },
    /// C on a simplicial isomorphism
    FunctorC {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        seed_choices: Vec<usize>,
    },
    /// η : M → C(G(M))
    Eta {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        seed_choices: Vec<usize>,
    },
    /// ε : 𝒢 → G(C(𝒢))
    Epsilon {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        seed_choices: Vec<usize>,
    },
    /// Functor laws and naturality on relabelled copies
    Laws {
        #[command(flatten)]
        io: Io,
    },
    /// The (ℤ/4)^n cover of (ℤ/2)^n
    Z4 {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        n: usize,
    },
    /// Does b_i ↦ f_i extend to a morphism ⟨B⟩ → K?
    ExtCheck {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        base_rank: usize,
        #[arg(long, default_value_t = 0)]
        free_rank: usize,
        #[arg(long, value_delimiter = ',')]
        torsion: Vec<i64>,
        /// Vectors separated by `;`, entries by `,`
        #[arg(long)]
        b: String,
        #[arg(long)]
        f: String,
    },
    /// Relation lattice of a tuple, optionally its bounded sublattice
    RelLattice {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        tuple: String,
        #[arg(long)]
        bound: Option<u32>,
    },
    /// Canonical groupoid of one bounded-relation level, or a system of levels
    DcfLevel {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        tuple: String,
        #[arg(long)]
        q: i64,
        #[arg(long, value_delimiter = ',')]
        bound: Vec<u32>,
    },
    /// Section with formal roots; checks the morphism and section laws on random inputs
    ExtendSection {
        #[command(flatten)]
        io: Io,
        /// Rational vectors, e.g. `1/2,0;0,1`
        #[arg(long)]
        generators: String,
        #[arg(long)]
        values: Option<String>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the fixture documents into a directory
    Fixtures {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        fuzz: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

pub struct Outcome {
    pub report: Report,
    pub artifact: Option<Document>,
}

/// Parses the command line, runs it, prints the report, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let io = cli.verb.io().clone();
    match execute(&cli.verb) {
        Ok(o) => {
            let text = crate::io::serialize(&Document::Report(o.report.clone()));
            print!("{text}");
            let write = || -> Result<()> {
                if let Some(p) = &io.out {
                    write_atomic(p, &text)?;
                }
                if let (Some(p), Some(d)) = (&io.emit, &o.artifact) {
                    write_document(p, d)?;
                }
                Ok(())
            };
            if let Err(e) = write() {
                eprintln!("error: {e}");
                return 2;
            }
            if o.report.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

impl Verb {
    pub fn io(&self) -> &Io {
        match self {
            Verb::Validate { io }
            | Verb::Aut { io, .. }
            | Verb::StabEmbed { io, .. }
            | Verb::Restrict { io, .. }
            | Verb::Extract { io, .. }
            | Verb::BuildCover { io, .. }
            | Verb::VerifyBinding { io, .. }
            | Verb::ProjectiveLimit { io, .. }
            | Verb::InclusionSystem { io, .. }
            | Verb::CoherentFamily { io, .. }
            | Verb::FunctorG { io, .. }
            | Verb::FunctorC { io, .. }
            | Verb::Eta { io, .. }
            | Verb::Epsilon { io, .. }
            | Verb::Laws { io }
            | Verb::Z4 { io, .. }
            | Verb::ExtCheck { io, .. }
            | Verb::RelLattice { io, .. }
            | Verb::DcfLevel { io, .. }
            | Verb::ExtendSection { io, .. }
            | Verb::Fixtures { io, .. } => io,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Verb::Validate { .. } => "validate",
            Verb::Aut { .. } => "aut",
            Verb::StabEmbed { .. } => "stab-embed",
            Verb::Restrict { .. } => "restrict",
            Verb::Extract { .. } => "extract",
            Verb::BuildCover { .. } => "build-cover",
            Verb::VerifyBinding { .. } => "verify-binding",
            Verb::ProjectiveLimit { .. } => "projective-limit",
            Verb::InclusionSystem { .. } => "inclusion-system",
            Verb::CoherentFamily { .. } => "coherent-family",
            Verb::FunctorG { .. } => "functor-g",
            Verb::FunctorC { .. } => "functor-c",
            Verb::Eta { .. } => "eta",
            Verb::Epsilon { .. } => "epsilon",
            Verb::Laws { .. } => "laws",
            Verb::Z4 { .. } => "z4",
            Verb::ExtCheck { .. } => "ext-check",
            Verb::RelLattice { .. } => "rel-lattice",
            Verb::DcfLevel { .. } => "dcf-level",
            Verb::ExtendSection { .. } => "extend-section",
            Verb::Fixtures { .. } => "fixtures",
        }
    }
}

// ---------------------------------------------------------------- helpers

fn usage(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

struct Inputs(Vec<InputDigest>);

impl Inputs {
    fn read(&mut self, p: &Option<PathBuf>) -> Result<Document> {
        let p = p.as_ref().ok_or_else(|| usage("--in is required"))?;
        self.read_path(p)
    }

    fn read_path(&mut self, p: &Path) -> Result<Document> {
        let (d, dig) = read_document(p)?;
        self.0.push(dig);
        Ok(d)
    }
}

fn want_structure(d: Document) -> Result<StructureDoc> {
    match d {
        Document::Structure(s) => Ok(s),
        d => Err(usage(format!("expected a structure document, got {}", d.kind()))),
    }
}

fn want_simplicial(d: Document) -> Result<SimplicialGroupoid> {
    match d {
        Document::Simplicial(s) => Ok(s),
        d => Err(usage(format!("expected a simplicial-groupoid document, got {}", d.kind()))),
    }
}

fn want_simplicial_morphism(d: Document) -> Result<SimplicialMorphism> {
    match d {
        Document::Morphism(MorphismDoc::Simplicial(h)) => Ok(h),
        d => Err(usage(format!("expected a simplicial morphism document, got {}", d.kind()))),
    }
}

fn seed(choices: &[usize]) -> SystemSeed {
    SystemSeed { choices: choices.to_vec(), ..Default::default() }
}

fn extract_options(ex: &ExtractArgs) -> Result<ExtractOptions> {
    let mode = match ex.mode.as_str() {
        "projected" => GammaMode::Projected,
        "restricted" => GammaMode::Restricted,
        m => return Err(usage(format!("unknown mode {m:?}"))),
    };
    Ok(ExtractOptions { max_degree: ex.max_degree, mode, orbit_arity: ex.orbit_arity })
}

fn ints(s: &str) -> Result<Vec<Vec<i64>>> {
    s.split(';')
        .map(|v| {
            v.split(',')
                .map(|x| x.trim().parse::<i64>().map_err(|e| usage(format!("bad integer {x:?}: {e}"))))
                .collect()
        })
        .collect()
}

fn rationals(s: &str) -> Result<Vec<Vec<Ratio<i64>>>> {
    s.split(';')
        .map(|v| {
            v.split(',')
                .map(|x| {
                    let x = x.trim();
                    let (a, b) = x.split_once('/').unwrap_or((x, "1"));
                    let a: i64 = a.parse().map_err(|e| usage(format!("bad rational {x:?}: {e}")))?;
                    let b: i64 = b.parse().map_err(|e| usage(format!("bad rational {x:?}: {e}")))?;
                    if b == 0 {
                        return Err(usage(format!("zero denominator in {x:?}")));
                    }
                    Ok(Ratio::new(a, b))
                })
                .collect()
        })
        .collect()
}

fn map_json(m: &FnMap) -> Value {
    json!(m.pairs())
}

fn lab(l: &Label) -> String {
    label_string(l)
}

/// Rebuilds a cover from its recorded source, or builds one from a simplicial groupoid.
fn cover_of(doc: Document, choices: &[usize]) -> Result<crate::binding::CoverConstruction> {
    match doc {
        Document::Simplicial(sg) => build_cover_with(Arc::new(sg), &seed(choices), "", SORT_POINT),
        Document::Structure(s) => {
            let p = s.provenance.ok_or_else(|| usage("structure has no provenance; produce it with build-cover"))?;
            let c = build_cover_with(Arc::new(p.groupoid), &seed(&p.choices), &p.tag, &p.point_sort)?;
            if c.result != s.structure {
                return Err(usage("structure does not match the cover rebuilt from its provenance"));
            }
            Ok(c)
        }
        d => Err(usage(format!("expected a structure or simplicial-groupoid document, got {}", d.kind()))),
    }
}

fn cover_doc(c: &crate::binding::CoverConstruction, choices: &[usize]) -> Document {
    Document::Structure(StructureDoc {
        structure: c.result.clone(),
        provenance: Some(Provenance {
            groupoid: (*c.source_groupoid).clone(),
            tag: c.tag.clone(),
            point_sort: c.point_sort.clone(),
            choices: choices.to_vec(),
        }),
    })
}

fn groups_json(e: &BindingExtraction) -> Value {
    json!(e
        .fiber_groups
        .groups
        .iter()
        .map(|(l, g)| json!({"component": lab(l), "order": g.len()}))
        .collect::<Vec<_>>())
}

// ---------------------------------------------------------------- verbs

pub fn execute(verb: &Verb) -> Result<Outcome> {
    let mut inp = Inputs(Vec::new());
    let (ok, result, artifact) = dispatch(verb, &mut inp)?;
    Ok(Outcome { report: Report { command: verb.name().into(), inputs: inp.0, ok, result }, artifact })
}

type Dispatched = (bool, Value, Option<Document>);

fn dispatch(verb: &Verb, inp: &mut Inputs) -> Result<Dispatched> {
    match verb {
        Verb::Validate { io } => {
            let d = inp.read(&io.input)?;
            let (report, extra) = match &d {
                Document::Groupoid(g) => (validate_groupoid(g), Value::Null),
                Document::Simplicial(s) => (validate_simplicial(s), Value::Null),
                Document::Structure(s) => (validate_structure(&s.structure), Value::Null),
                Document::Morphism(MorphismDoc::Simplicial(h)) => (validate_simplicial_morphism(h), Value::Null),
                Document::Morphism(MorphismDoc::Cover(c)) => {
                    let chk = check_cover_morphism(c)?;
                    let mut r = crate::report::ValidationReport::default();
                    if !chk.embedded1.embedded {
                        r.push("stable-embedding", "first cover is not stably embedded in the combined structure");
                    }
                    if !chk.embedded2.embedded {
                        r.push("stable-embedding", "second cover is not stably embedded in the combined structure");
                    }
                    (r, Value::Null)
                }
                Document::InclusionSystem(s) => {
                    let mut r = crate::report::ValidationReport::default();
                    if let Some((c, d2, e)) = s.commutativity_violation() {
                        r.push("commute", format!("{{{}}} ⊂ {{{}}} ⊂ {{{}}}", lab(&c), lab(&d2), lab(&e)));
                    }
                    (r, json!({"triples": s.triple_count()}))
                }
                Document::CoherentFamily(f) => {
                    (crate::report::ValidationReport::default(), json!({"maps": f.maps.len(), "witnesses": f.witnesses.len()}))
                }
                Document::ProjectiveSystem(p) => (validate_system(p), Value::Null),
                Document::Report(_) => (crate::report::ValidationReport::default(), Value::Null),
            };
            Ok((report.is_valid(), json!({"kind": d.kind(), "violations": report.violations, "details": extra}), None))
        }
        Verb::Aut { io, over_base } => {
            let s = want_structure(inp.read(&io.input)?)?;
            let c = if *over_base { Constraints::fix_base(&s.structure) } else { Constraints::default() };
            let ch = automorphism_chain(&s.structure, &c)?;
            Ok((
                true,
                json!({
                    "order": ch.order.to_string(),
                    "over_base": over_base,
                    "base_points": ch.base_points,
                    "orbit_sizes": ch.orbit_sizes,
                    "generators": ch.generators.iter().map(map_json).collect::<Vec<_>>(),
                }),
                None,
            ))
        }
        Verb::StabEmbed { io, sub } => {
            let m = want_structure(inp.read(&io.input)?)?.structure;
            let s = want_structure(inp.read_path(sub)?)?.structure;
            let r = check_stable_embedding(&m, &s)?;
            Ok((
                r.embedded,
                json!({
                    "embedded": r.embedded,
                    "checked": r.checked,
                    "generator_mode": r.generator_mode,
                    "sub_order": r.sub_order.to_string(),
                    "witness": r.witness.as_ref().map(map_json),
                }),
                None,
            ))
        }
        Verb::Restrict { io, sorts, params, elements, orbit_arity } => {
            let m = want_structure(inp.read(&io.input)?)?.structure;
            let spec = RestrictSpec {
                sorts: sorts.iter().map(|s| Name::from(s.as_str())).collect(),
                elements: elements.as_ref().map(|v| v.iter().map(|e| Name::from(e.as_str())).collect()),
                params: params.iter().map(|s| Name::from(s.as_str())).collect(),
                orbit_arity: *orbit_arity,
            };
            let r = restrict_structure(&m, &spec)?;
            let order = automorphism_chain(&r, &Constraints::fix_base(&r))?.order;
            Ok((
                true,
                json!({"size": r.size(), "relations": r.relations.len(), "aut_over_base": order.to_string()}),
                Some(Document::Structure(StructureDoc { structure: r, provenance: None })),
            ))
        }
        Verb::Extract { io, ex } => {
            let m = want_structure(inp.read(&io.input)?)?.structure;
            let e = extract_binding_simplicial_groupoid(&m, &extract_options(ex)?)?;
            let local = crate::binding::check_local_embeddedness(&e.fiber_groups);
            let report = validate_simplicial(&e.groupoid_in_u);
            Ok((
                report.is_valid(),
                json!({
                    "groups": groups_json(&e),
                    "locally_embedded": local.is_none(),
                    "violations": report.violations,
                }),
                Some(Document::Simplicial((*e.groupoid_in_u).clone())),
            ))
        }
        Verb::BuildCover { io, seed_choices, tag, point_sort } => {
            let sg = want_simplicial(inp.read(&io.input)?)?;
            let c = build_cover_with(Arc::new(sg), &seed(seed_choices), tag, point_sort)?;
            let report = validate_structure(&c.result);
            Ok((
                report.is_valid(),
                json!({
                    "size": c.result.size(),
                    "sorts": c.result.sorts.iter().map(|(s, e)| json!({"sort": s, "size": e.len()})).collect::<Vec<_>>(),
                    "free_choices": c.inclusion_system.free_choices.len(),
                    "violations": report.violations,
                }),
                Some(cover_doc(&c, seed_choices)),
            ))
        }
        Verb::VerifyBinding { io, component, seed_choices } => {
            let c = cover_of(inp.read(&io.input)?, seed_choices)?;
            let labels: Vec<Label> = match component {
                Some(s) => vec![label(s.split(',').map(|x| Name::from(x.trim())))],
                None => c.ostar_objects.keys().filter(|l| l.len() <= 3).cloned().collect(),
            };
            let mut all = true;
            let mut rows = Vec::new();
            for l in &labels {
                let b = verify_binding_statement(&c, l)?;
                all &= b.equal;
                rows.push(json!({
                    "component": lab(l),
                    "groupoid_order": b.groupoid_group.len(),
                    "structure_order": b.structure_group.len(),
                    "equal": b.equal,
                }));
            }
            Ok((all, json!({"components": rows}), None))
        }
        Verb::ProjectiveLimit { io, k, ex } => {
            let m = want_structure(inp.read(&io.input)?)?.structure;
            let e = extract_binding_simplicial_groupoid(&m, &extract_options(ex)?)?;
            let npts = e.fiber_groups.points.len();
            let k = k.unwrap_or(npts);
            let lim = projective_limit_aut(&e, k)?;
            let global: BTreeSet<FnMap> = global_fiber_group(&m)?.into_iter().collect();
            let limit: BTreeSet<FnMap> = lim.elements.iter().cloned().collect();
            let equal = limit == global;
            Ok((
                equal || lim.depth < npts,
                json!({"depth": lim.depth, "order": lim.order(), "global_order": global.len(), "equal": equal}),
                None,
            ))
        }
        Verb::InclusionSystem { io, seed_choices } => {
            let sg = want_simplicial(inp.read(&io.input)?)?;
            let sys = build_inclusion_system(&sg, &seed(seed_choices))?;
            let report = validate_inclusion_system(&sg, &sys);
            Ok((
                report.is_valid(),
                json!({
                    "objects": sys.chosen.len(),
                    "maps": sys.maps.len(),
                    "triples": sys.triple_count(),
                    "free_choices": sys.free_choices.iter().map(|f| json!({
                        "source": lab(&f.source), "target": lab(&f.target), "index": f.index, "candidates": f.candidates,
                    })).collect::<Vec<_>>(),
                    "violations": report.violations,
                }),
                Some(Document::InclusionSystem(sys)),
            ))
        }
        Verb::CoherentFamily { io, seed_choices, target_choices } => {
            let h = want_simplicial_morphism(inp.read(&io.input)?)?;
            let i1 = build_inclusion_system(&h.source, &seed(seed_choices))?;
            let i2 = build_inclusion_system(&h.target, &seed(target_choices))?;
            let fam = find_coherent_family(&h, &i1, &i2, &CoherentFamily::default())?;
            let report = validate_coherent_family(&h, &i1, &i2, &fam);
            Ok((
                report.is_valid(),
                json!({"maps": fam.maps.len(), "witnesses": fam.witnesses.len(), "violations": report.violations}),
                Some(Document::CoherentFamily(fam)),
            ))
        }
        Verb::FunctorG { io, ex } => {
            let cm = match inp.read(&io.input)? {
                Document::Morphism(MorphismDoc::Cover(c)) => c,
                d => return Err(usage(format!("expected a cover morphism document, got {}", d.kind()))),
            };
            let opts = extract_options(ex)?;
            let e1 = extract_binding_simplicial_groupoid(&cm.cover1, &opts)?;
            let e2 = extract_binding_simplicial_groupoid(&cm.cover2, &opts)?;
            let g = functor_g_on_morphism(&cm, &e1, &e2)?;
            let report = validate_simplicial_morphism(&g);
            Ok((
                report.is_valid() && g.is_isomorphism(),
                json!({"isomorphism": g.is_isomorphism(), "violations": report.violations}),
                Some(Document::Morphism(MorphismDoc::Simplicial(g))),
            ))
        }
        Verb::FunctorC { io, seed_choices } => {
            let h = want_simplicial_morphism(inp.read(&io.input)?)?;
            let c1 = build_cover_with(h.source.clone(), &seed(seed_choices), "1", SORT_POINT)?;
            let c2 = build_cover_with(h.target.clone(), &seed(seed_choices), "2", SORT_POINT)?;
            let cm = functor_c_on_morphism(&h, &c1, &c2)?;
            let chk = check_cover_morphism(&cm)?;
            Ok((
                chk.ok,
                json!({"embedded1": chk.embedded1.embedded, "embedded2": chk.embedded2.embedded, "size": cm.combined.size()}),
                Some(Document::Morphism(MorphismDoc::Cover(cm))),
            ))
        }
        Verb::Eta { io, seed_choices } => {
            let m = want_structure(inp.read(&io.input)?)?.structure;
            let e = extract_binding_simplicial_groupoid(&m, &ExtractOptions::default())?;
            let c = cover_for_eta(&e, &seed(seed_choices), "eta")?;
            let eta = build_eta(&m, &e, &c)?;
            let transports = eta_transports_groups(&eta)?;
            Ok((
                eta.check.ok && transports,
                json!({
                    "embedded1": eta.check.embedded1.embedded,
                    "embedded2": eta.check.embedded2.embedded,
                    "transports_groups": transports,
                    "combined_aut_over_base": eta.aut_order.to_string(),
                }),
                Some(Document::Morphism(MorphismDoc::Cover(eta.morphism))),
            ))
        }
        Verb::Epsilon { io, seed_choices } => {
            let sg = Arc::new(want_simplicial(inp.read(&io.input)?)?);
            let c = build_cover_with(sg.clone(), &seed(seed_choices), "", SORT_POINT)?;
            let e = extract_binding_simplicial_groupoid(&c.result, &ExtractOptions::default())?;
            let eps = build_epsilon(&sg, &c, &e)?;
            Ok((
                eps.isomorphism,
                json!({"isomorphism": eps.isomorphism, "violations": eps.report.violations}),
                Some(Document::Morphism(MorphismDoc::Simplicial(eps.morphism))),
            ))
        }
        Verb::Laws { io } => {
            let sources = match &io.input {
                Some(_) => vec![("input".to_string(), want_simplicial(inp.read(&io.input)?)?)],
                None => vec![("toy".to_string(), sg_toy()), ("trivial".to_string(), trivial_sg(&["p", "q"]))],
            };
            let corpus = law_corpus(&sources)?;
            let r = check_functor_laws(&corpus)?;
            Ok((
                r.ok(),
                json!({
                    "cases": r.cases,
                    "c_identity": r.c_identity,
                    "g_identity": r.g_identity,
                    "c_composition": r.c_composition,
                    "g_composition": r.g_composition,
                    "eta_naturality": r.eta_naturality,
                    "epsilon_naturality": r.epsilon_naturality,
                    "failures": r.failures,
                }),
                None,
            ))
        }
        Verb::Z4 { n, .. } => {
            let z = build_z4_example(*n)?;
            let m = &z.structure;
            let aut = automorphism_chain(m, &Constraints::fix_base(m))?.order;
            let expected = num_bigint::BigUint::from(2u32).pow((*n * *n) as u32);
            let det = z4_depth3_determinacy(&z)?;
            let exact = z.check_exact();
            Ok((
                exact && aut == expected && det.holds,
                json!({
                    "n": n,
                    "aut_count": num_traits::ToPrimitive::to_u64(&aut),
                    "expected": expected.to_string(),
                    "exact": exact,
                    "depth3": {"families": det.families, "extending": det.extending, "additive": det.additive, "holds": det.holds},
                }),
                Some(Document::Structure(StructureDoc { structure: z.structure.clone(), provenance: None })),
            ))
        }
        Verb::ExtCheck { base_rank, free_rank, torsion, b, f, .. } => {
            let p = AbelianPresentation { base_rank: *base_rank, free_rank: *free_rank, torsion: torsion.clone() };
            let r = morphism_extension_check(&p, &ints(b)?, &ints(f)?)?;
            Ok((
                r.extends,
                json!({"extends": r.extends, "relations": r.lattice.basis, "violated": r.violated}),
                None,
            ))
        }
        Verb::RelLattice { tuple, bound, .. } => {
            let t = ints(tuple)?;
            let full = relation_lattice(&t)?;
            let mut out = json!({"rank": full.rank(), "basis": full.basis});
            if let Some(nb) = bound {
                let bl = bounded_relation_lattice(&t, *nb)?;
                out["bound"] = json!(nb);
                out["bounded_basis"] = json!(bl.bounded);
                out["strict"] = json!(bl.strict);
                out["witness"] = json!(bl.witness.map(|w| json!({
                    "modulus": w.modulus, "translation": w.translation, "broken": w.broken,
                })));
            }
            Ok((true, out, None))
        }
        Verb::DcfLevel { tuple, q, bound, .. } => {
            let t = ints(tuple)?;
            match bound.as_slice() {
                [] => Err(usage("--bound is required")),
                [nb] => {
                    let g = canonical_dcf_groupoid(&t, *q, *nb)?;
                    let order = g.aut_group("O")?.len();
                    let report = validate_groupoid(&g);
                    Ok((
                        report.is_valid(),
                        json!({"bound": nb, "order": order, "violations": report.violations}),
                        Some(Document::Groupoid(g)),
                    ))
                }
                bs => {
                    let p = dcf_projective_system(&t, *q, bs)?;
                    let report = validate_system(&p);
                    let orders: Vec<Value> = p
                        .levels
                        .iter()
                        .map(|(n, g)| json!({"level": n, "order": g.aut_group("O").map(|v| v.len()).unwrap_or(0)}))
                        .collect();
                    Ok((report.is_valid(), json!({"levels": orders, "violations": report.violations}), Some(Document::ProjectiveSystem(p))))
                }
            }
        }
        Verb::ExtendSection { generators, values, samples, seed, .. } => {
            let g = rationals(generators)?;
            let v = match values {
                Some(v) => rationals(v)?,
                None => g.clone(),
            };
            let s = extend_section(g, v)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let r = verify_section_laws(&s, &mut rng, *samples)?;
            Ok((
                r.ok(),
                json!({
                    "samples": r.samples,
                    "morphism_failures": r.morphism_failures,
                    "section_failures": r.section_failures,
                    "well_defined_failures": r.well_defined_failures,
                }),
                None,
            ))
        }
        Verb::Fixtures { out_dir, fuzz, seed, .. } => {
            std::fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
            let mut files = Vec::new();
            let mut put = |name: &str, d: &Document| -> Result<()> {
                let p = out_dir.join(name);
                write_document(&p, d)?;
                files.push(json!({"file": name, "kind": d.kind(), "sha256": crate::io::digest(crate::io::serialize(d).as_bytes())}));
                Ok(())
            };
            let toy = Arc::new(sg_toy());
            put("sg_toy.json", &Document::Simplicial((*toy).clone()))?;
            put("sg_toy3.json", &Document::Simplicial(sg_toy3()))?;
            let c = build_cover_with(toy.clone(), &SystemSeed::default(), "", SORT_POINT)?;
            put("toy_cover.json", &cover_doc(&c, &[]))?;
            let (_, h) = relabeled_copy(&toy, "'", true)?;
            put("toy_iso.json", &Document::Morphism(MorphismDoc::Simplicial(h)))?;
            for n in 1..=2 {
                let z = build_z4_example(n)?;
                put(&format!("z4_{n}.json"), &Document::Structure(StructureDoc { structure: z.structure, provenance: None }))?;
            }
            for (i, sg) in fuzz_corpus(*fuzz, *seed).into_iter().enumerate() {
                put(&format!("fuzz_{i:03}.json"), &Document::Simplicial(sg))?;
            }
            Ok((true, json!({"files": files}), None))
        }
    }
}
