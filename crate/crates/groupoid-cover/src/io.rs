//! JSON documents: an envelope `{format_version, kind, payload}` around typed payloads.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::functors::CoverMorphism;
use crate::groupoid::ConcreteGroupoid;
use crate::map::{Arrow, ArrowSet, FnMap};
use crate::name::{label, CompId, Elem, Label, Name, ObjId};
use crate::simplicial::{
    CoherentFamily, FreeChoice, InclusionSystem, Projection, ProjectiveGroupoidSystem, SimplicialGroupoid,
    SimplicialMorphism,
};
use crate::structure::{FiberMap, MultiSortedStructure, Relation};

pub const FORMAT_VERSION: &str = "1";

pub const KINDS: [&str; 8] = [
    "groupoid",
    "simplicial-groupoid",
    "structure",
    "morphism",
    "inclusion-system",
    "coherent-family",
    "projective-system",
    "report",
];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    format_version: String,
    kind: String,
    payload: serde_json::Value,
}

/// How a cover was built, so that its construction can be replayed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub groupoid: SimplicialGroupoid,
    pub tag: String,
    pub point_sort: Name,
    pub choices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureDoc {
    pub structure: MultiSortedStructure,
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MorphismDoc {
    Simplicial(SimplicialMorphism),
    Cover(CoverMorphism),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub ok: bool,
    pub result: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Groupoid(ConcreteGroupoid),
    Simplicial(SimplicialGroupoid),
    Structure(StructureDoc),
    Morphism(MorphismDoc),
    InclusionSystem(InclusionSystem),
    CoherentFamily(CoherentFamily),
    ProjectiveSystem(ProjectiveGroupoidSystem),
    Report(Report),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Groupoid(_) => "groupoid",
            Document::Simplicial(_) => "simplicial-groupoid",
            Document::Structure(_) => "structure",
            Document::Morphism(_) => "morphism",
            Document::InclusionSystem(_) => "inclusion-system",
            Document::CoherentFamily(_) => "coherent-family",
            Document::ProjectiveSystem(_) => "projective-system",
            Document::Report(_) => "report",
        }
    }
}

// ---------------------------------------------------------------- wire types

type Pairs = Vec<(Name, Name)>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrowDto {
    source: ObjId,
    target: ObjId,
    map: Pairs,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDto {
    id: ObjId,
    component: CompId,
    elements: Vec<Elem>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDto {
    id: CompId,
    label: Vec<Name>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupoidDto {
    objects: Vec<ObjectDto>,
    components: Vec<ComponentDto>,
    morphisms: Vec<ArrowDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DegreeDto {
    degree: usize,
    groupoid: GroupoidDto,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InclusionDto {
    from: usize,
    to: usize,
    maps: Vec<ArrowDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimplicialDto {
    base: Vec<Name>,
    degrees: Vec<DegreeDto>,
    inclusions: Vec<InclusionDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SortDto {
    name: Name,
    #[serde(default)]
    base: bool,
    elements: Vec<Elem>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationDto {
    name: Name,
    signature: Vec<Name>,
    tuples: Vec<Vec<Elem>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiberDto {
    s_sort: Name,
    a_sort: Name,
    a_set: Vec<Elem>,
    map: Pairs,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProvenanceDto {
    groupoid: SimplicialDto,
    tag: String,
    point_sort: Name,
    #[serde(default)]
    choices: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureDto {
    sorts: Vec<SortDto>,
    relations: Vec<RelationDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fiber: Option<FiberDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<ProvenanceDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DegreeMapsDto {
    degree: usize,
    maps: Vec<ArrowDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
enum MorphismDto {
    Simplicial { source: SimplicialDto, target: SimplicialDto, degrees: Vec<DegreeMapsDto> },
    Cover { cover1: StructureDto, cover2: StructureDto, h: Pairs },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChosenDto {
    label: Vec<Name>,
    object: ObjId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemMapDto {
    source_label: Vec<Name>,
    target_label: Vec<Name>,
    arrow: ArrowDto,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FreeChoiceDto {
    source: Vec<Name>,
    target: Vec<Name>,
    index: usize,
    candidates: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InclusionSystemDto {
    points: Vec<Name>,
    chosen: Vec<ChosenDto>,
    maps: Vec<SystemMapDto>,
    #[serde(default)]
    free_choices: Vec<FreeChoiceDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointMapDto {
    point: Name,
    arrow: ArrowDto,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WitnessDto {
    label: Vec<Name>,
    arrow: ArrowDto,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoherentFamilyDto {
    maps: Vec<PointMapDto>,
    witnesses: Vec<WitnessDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelDto {
    name: Name,
    groupoid: GroupoidDto,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectionDto {
    lower: Name,
    upper: Name,
    objects: Pairs,
    elements: Pairs,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectiveDto {
    levels: Vec<LevelDto>,
    order: Pairs,
    projections: Vec<ProjectionDto>,
}

// ---------------------------------------------------------------- to wire

fn pairs(m: &FnMap) -> Pairs {
    m.pairs().to_vec()
}

fn arrow_dto(a: &Arrow) -> ArrowDto {
    ArrowDto { source: a.source.clone(), target: a.target.clone(), map: pairs(&a.map) }
}

fn groupoid_dto(g: &ConcreteGroupoid) -> GroupoidDto {
    GroupoidDto {
        objects: g
            .objects()
            .iter()
            .map(|(o, es)| ObjectDto { id: o.clone(), component: g.component_map()[o].clone(), elements: es.clone() })
            .collect(),
        components: g.components().iter().map(|(c, l)| ComponentDto { id: c.clone(), label: l.clone() }).collect(),
        morphisms: g.morphisms().iter().map(arrow_dto).collect(),
    }
}

fn simplicial_dto(sg: &SimplicialGroupoid) -> SimplicialDto {
    SimplicialDto {
        base: sg.base().to_vec(),
        degrees: sg.degrees().iter().map(|(&n, g)| DegreeDto { degree: n, groupoid: groupoid_dto(g) }).collect(),
        inclusions: sg
            .inclusions()
            .iter()
            .map(|(&(n, m), s)| InclusionDto { from: n, to: m, maps: s.iter().map(arrow_dto).collect() })
            .collect(),
    }
}

fn structure_dto(m: &MultiSortedStructure, prov: Option<&Provenance>) -> StructureDto {
    StructureDto {
        sorts: m
            .sorts
            .iter()
            .map(|(n, es)| SortDto { name: n.clone(), base: m.base_sorts.contains(n), elements: es.clone() })
            .collect(),
        relations: m
            .relations
            .iter()
            .map(|(n, r)| RelationDto {
                name: n.clone(),
                signature: r.signature.clone(),
                tuples: r.tuples.iter().cloned().collect(),
            })
            .collect(),
        fiber: m.fiber.as_ref().map(|f| FiberDto {
            s_sort: f.s_sort.clone(),
            a_sort: f.a_sort.clone(),
            a_set: f.a_set.clone(),
            map: f.map.iter().map(|(s, a)| (s.clone(), a.clone())).collect(),
        }),
        provenance: prov.map(|p| ProvenanceDto {
            groupoid: simplicial_dto(&p.groupoid),
            tag: p.tag.clone(),
            point_sort: p.point_sort.clone(),
            choices: p.choices.clone(),
        }),
    }
}

fn morphism_dto(m: &MorphismDoc) -> MorphismDto {
    match m {
        MorphismDoc::Simplicial(h) => MorphismDto::Simplicial {
            source: simplicial_dto(&h.source),
            target: simplicial_dto(&h.target),
            degrees: h
                .degrees
                .iter()
                .map(|(&n, s)| DegreeMapsDto { degree: n, maps: s.iter().map(arrow_dto).collect() })
                .collect(),
        },
        MorphismDoc::Cover(c) => MorphismDto::Cover {
            cover1: structure_dto(&c.cover1, None),
            cover2: structure_dto(&c.cover2, None),
            h: pairs(&c.h),
        },
    }
}

fn system_dto(s: &InclusionSystem) -> InclusionSystemDto {
    InclusionSystemDto {
        points: s.points.clone(),
        chosen: s.chosen.iter().map(|(l, o)| ChosenDto { label: l.clone(), object: o.clone() }).collect(),
        maps: s
            .maps
            .iter()
            .map(|((c, d), a)| SystemMapDto { source_label: c.clone(), target_label: d.clone(), arrow: arrow_dto(a) })
            .collect(),
        free_choices: s
            .free_choices
            .iter()
            .map(|f| FreeChoiceDto {
                source: f.source.clone(),
                target: f.target.clone(),
                index: f.index,
                candidates: f.candidates,
            })
            .collect(),
    }
}

fn family_dto(f: &CoherentFamily) -> CoherentFamilyDto {
    CoherentFamilyDto {
        maps: f.maps.iter().map(|(p, a)| PointMapDto { point: p.clone(), arrow: arrow_dto(a) }).collect(),
        witnesses: f.witnesses.iter().map(|(l, a)| WitnessDto { label: l.clone(), arrow: arrow_dto(a) }).collect(),
    }
}

fn projective_dto(p: &ProjectiveGroupoidSystem) -> ProjectiveDto {
    ProjectiveDto {
        levels: p.levels.iter().map(|(n, g)| LevelDto { name: n.clone(), groupoid: groupoid_dto(g) }).collect(),
        order: p.order.iter().cloned().collect(),
        projections: p
            .projections
            .iter()
            .map(|((i, j), pr)| ProjectionDto {
                lower: i.clone(),
                upper: j.clone(),
                objects: pr.objects.iter().map(|(a, b)| (a.clone(), b.clone())).collect(),
                elements: pairs(&pr.elements),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------- from wire

fn schema(path: &str, msg: impl Into<String>) -> Error {
    Error::Schema { path: path.to_string(), msg: msg.into() }
}

fn fnmap(p: Pairs, path: &str) -> Result<FnMap> {
    FnMap::from_pairs(p).ok_or_else(|| schema(path, "pairs do not form a function"))
}

fn arrow(a: ArrowDto, path: &str) -> Result<Arrow> {
    Ok(Arrow::new(a.source, a.target, fnmap(a.map, &format!("{path}.map"))?))
}

fn arrows(v: Vec<ArrowDto>, path: &str) -> Result<Vec<Arrow>> {
    v.into_iter().enumerate().map(|(i, a)| arrow(a, &format!("{path}[{i}]"))).collect()
}

fn groupoid(g: GroupoidDto, path: &str) -> Result<ConcreteGroupoid> {
    let mut objects = BTreeMap::new();
    let mut component_of = BTreeMap::new();
    for o in g.objects {
        component_of.insert(o.id.clone(), o.component);
        if objects.insert(o.id.clone(), o.elements).is_some() {
            return Err(schema(&format!("{path}.objects"), format!("duplicate object {}", o.id)));
        }
    }
    let component_label = g.components.into_iter().map(|c| (c.id, label(c.label))).collect();
    ConcreteGroupoid::from_parts(objects, component_of, component_label, arrows(g.morphisms, &format!("{path}.morphisms"))?)
}

fn simplicial(s: SimplicialDto, path: &str) -> Result<SimplicialGroupoid> {
    let mut degrees = BTreeMap::new();
    for (i, d) in s.degrees.into_iter().enumerate() {
        degrees.insert(d.degree, Arc::new(groupoid(d.groupoid, &format!("{path}.degrees[{i}].groupoid"))?));
    }
    let mut inclusions = BTreeMap::new();
    for (i, inc) in s.inclusions.into_iter().enumerate() {
        inclusions.insert((inc.from, inc.to), ArrowSet::new(arrows(inc.maps, &format!("{path}.inclusions[{i}].maps"))?));
    }
    SimplicialGroupoid::new(s.base, degrees, inclusions)
}

fn structure(s: StructureDto, path: &str) -> Result<StructureDoc> {
    let mut m = MultiSortedStructure::default();
    let mut seen = BTreeSet::new();
    for srt in s.sorts {
        if !seen.insert(srt.name.clone()) {
            return Err(schema(&format!("{path}.sorts"), format!("duplicate sort {}", srt.name)));
        }
        if srt.base {
            m.base_sorts.insert(srt.name.clone());
        }
        m.sorts.push((srt.name, srt.elements));
    }
    for (i, r) in s.relations.into_iter().enumerate() {
        if let Some(x) = r.signature.iter().find(|x| !seen.contains(*x)) {
            return Err(Error::UnknownId(format!("sort {x} in {path}.relations[{i}]")));
        }
        if let Some(t) = r.tuples.iter().find(|t| t.len() != r.signature.len()) {
            return Err(schema(&format!("{path}.relations[{i}].tuples"), format!("tuple {t:?} has the wrong arity")));
        }
        m.relations.insert(r.name, Relation { signature: r.signature, tuples: r.tuples.into_iter().collect() });
    }
    if let Some(f) = s.fiber {
        for x in [&f.s_sort, &f.a_sort] {
            if !seen.contains(x) {
                return Err(Error::UnknownId(format!("sort {x} in {path}.fiber")));
            }
        }
        m.fiber = Some(FiberMap { s_sort: f.s_sort, a_sort: f.a_sort, a_set: f.a_set, map: f.map.into_iter().collect() });
    }
    let provenance = match s.provenance {
        Some(p) => Some(Provenance {
            groupoid: simplicial(p.groupoid, &format!("{path}.provenance.groupoid"))?,
            tag: p.tag,
            point_sort: p.point_sort,
            choices: p.choices,
        }),
        None => None,
    };
    Ok(StructureDoc { structure: m, provenance })
}

fn morphism(m: MorphismDto, path: &str) -> Result<MorphismDoc> {
    match m {
        MorphismDto::Simplicial { source, target, degrees } => {
            let s = Arc::new(simplicial(source, &format!("{path}.source"))?);
            let t = Arc::new(simplicial(target, &format!("{path}.target"))?);
            let mut d = BTreeMap::new();
            for (i, x) in degrees.into_iter().enumerate() {
                d.insert(x.degree, ArrowSet::new(arrows(x.maps, &format!("{path}.degrees[{i}].maps"))?));
            }
            Ok(MorphismDoc::Simplicial(SimplicialMorphism::new(s, t, d)?))
        }
        MorphismDto::Cover { cover1, cover2, h } => {
            let c1 = structure(cover1, &format!("{path}.cover1"))?.structure;
            let c2 = structure(cover2, &format!("{path}.cover2"))?.structure;
            Ok(MorphismDoc::Cover(CoverMorphism::new(c1, c2, fnmap(h, &format!("{path}.h"))?)?))
        }
    }
}

fn system(s: InclusionSystemDto, path: &str) -> Result<InclusionSystem> {
    let chosen: BTreeMap<Label, ObjId> = s.chosen.into_iter().map(|c| (label(c.label), c.object)).collect();
    let mut maps = BTreeMap::new();
    for (i, m) in s.maps.into_iter().enumerate() {
        let (c, d) = (label(m.source_label), label(m.target_label));
        let a = arrow(m.arrow, &format!("{path}.maps[{i}].arrow"))?;
        if chosen.get(&c) != Some(&a.source) || chosen.get(&d) != Some(&a.target) {
            return Err(Error::UnknownId(format!("{path}.maps[{i}]: arrow {}→{} does not join chosen objects", a.source, a.target)));
        }
        maps.insert((c, d), a);
    }
    Ok(InclusionSystem {
        points: s.points,
        chosen,
        maps,
        free_choices: s
            .free_choices
            .into_iter()
            .map(|f| FreeChoice { source: label(f.source), target: label(f.target), index: f.index, candidates: f.candidates })
            .collect(),
    })
}

fn family(f: CoherentFamilyDto, path: &str) -> Result<CoherentFamily> {
    let mut out = CoherentFamily::default();
    for (i, m) in f.maps.into_iter().enumerate() {
        out.maps.insert(m.point, arrow(m.arrow, &format!("{path}.maps[{i}].arrow"))?);
    }
    for (i, w) in f.witnesses.into_iter().enumerate() {
        out.witnesses.insert(label(w.label), arrow(w.arrow, &format!("{path}.witnesses[{i}].arrow"))?);
    }
    Ok(out)
}

fn projective(p: ProjectiveDto, path: &str) -> Result<ProjectiveGroupoidSystem> {
    let mut levels = BTreeMap::new();
    for (i, l) in p.levels.into_iter().enumerate() {
        levels.insert(l.name, Arc::new(groupoid(l.groupoid, &format!("{path}.levels[{i}].groupoid"))?));
    }
    for (i, j) in &p.order {
        for x in [i, j] {
            if !levels.contains_key(x) {
                return Err(Error::UnknownId(format!("level {x} in {path}.order")));
            }
        }
    }
    let mut projections = BTreeMap::new();
    for (k, pr) in p.projections.into_iter().enumerate() {
        for x in [&pr.lower, &pr.upper] {
            if !levels.contains_key(x) {
                return Err(Error::UnknownId(format!("level {x} in {path}.projections[{k}]")));
            }
        }
        let elements = fnmap(pr.elements, &format!("{path}.projections[{k}].elements"))?;
        projections.insert((pr.lower, pr.upper), Projection { objects: pr.objects.into_iter().collect(), elements });
    }
    Ok(ProjectiveGroupoidSystem { levels, order: p.order.into_iter().collect(), projections })
}

// ---------------------------------------------------------------- entry points

fn typed<T: DeserializeOwned>(v: serde_json::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let p = e.path().to_string();
        let path = if p == "." { prefix.to_string() } else { format!("{prefix}.{p}") };
        schema(&path, e.into_inner().to_string())
    })
}

fn value<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).expect("serialisable")
}

pub fn to_value(doc: &Document) -> serde_json::Value {
    let payload = match doc {
        Document::Groupoid(g) => value(&groupoid_dto(g)),
        Document::Simplicial(s) => value(&simplicial_dto(s)),
        Document::Structure(s) => value(&structure_dto(&s.structure, s.provenance.as_ref())),
        Document::Morphism(m) => value(&morphism_dto(m)),
        Document::InclusionSystem(s) => value(&system_dto(s)),
        Document::CoherentFamily(f) => value(&family_dto(f)),
        Document::ProjectiveSystem(p) => value(&projective_dto(p)),
        Document::Report(r) => value(r),
    };
    value(&Envelope { format_version: FORMAT_VERSION.into(), kind: doc.kind().into(), payload })
}

pub fn serialize(doc: &Document) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(doc)).expect("serialisable");
    s.push('\n');
    s
}

pub fn parse(text: &str) -> Result<Document> {
    let mut de = serde_json::Deserializer::from_str(text);
    let env: Envelope = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let p = e.path().to_string();
        schema(&p, e.into_inner().to_string())
    })?;
    if env.format_version != FORMAT_VERSION {
        return Err(schema("format_version", format!("unsupported version {:?}, expected {FORMAT_VERSION:?}", env.format_version)));
    }
    let p = env.payload;
    Ok(match env.kind.as_str() {
        "groupoid" => Document::Groupoid(groupoid(typed(p, "payload")?, "payload")?),
        "simplicial-groupoid" => Document::Simplicial(simplicial(typed(p, "payload")?, "payload")?),
        "structure" => Document::Structure(structure(typed(p, "payload")?, "payload")?),
        "morphism" => Document::Morphism(morphism(typed(p, "payload")?, "payload")?),
        "inclusion-system" => Document::InclusionSystem(system(typed(p, "payload")?, "payload")?),
        "coherent-family" => Document::CoherentFamily(family(typed(p, "payload")?, "payload")?),
        "projective-system" => Document::ProjectiveSystem(projective(typed(p, "payload")?, "payload")?),
        "report" => Document::Report(typed(p, "payload")?),
        k => return Err(schema("kind", format!("unknown kind {k:?}"))),
    })
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads and parses a document, returning it with the digest of its bytes.
pub fn read_document(path: &Path) -> Result<(Document, InputDigest)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| schema("", format!("not UTF-8: {e}")))?;
    let doc = parse(text)?;
    Ok((doc, InputDigest { path: path.display().to_string(), sha256: digest(&bytes) }))
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_document(path: &Path, doc: &Document) -> Result<()> {
    write_atomic(path, &serialize(doc))
}
