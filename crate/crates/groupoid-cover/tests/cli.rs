use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use groupoid_cover::binding::build_cover_from_simplicial;
use groupoid_cover::cli::run;
use groupoid_cover::error::Error;
use groupoid_cover::exact_seq::{build_z4_example, dcf_projective_system};
use groupoid_cover::fixtures::{fuzz_simplicial, relabeled_copy, sg_toy};
use groupoid_cover::functors::functor_c_on_morphism;
use groupoid_cover::io::*;
use groupoid_cover::simplicial::{build_inclusion_system, find_coherent_family, CoherentFamily, SystemSeed};
use proptest::prelude::*;
use serde_json::Value;
use tempfile::TempDir;

// ---------------------------------------------------------------- a small JSON Schema checker

/// The subset of draft 2020-12 the document schema uses.
fn check(schema: &Value, v: &Value, root: &Value, path: &str, errs: &mut Vec<String>) {
    let s = match schema {
        Value::Bool(true) => return,
        Value::Bool(false) => return errs.push(format!("{path}: schema false")),
        Value::Object(s) => s,
        _ => panic!("bad schema at {path}"),
    };
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        let mut t = root;
        for part in r.trim_start_matches("#/").split('/') {
            t = &t[part];
        }
        assert!(!t.is_null(), "dangling $ref {r}");
        check(t, v, root, path, errs);
    }
    if let Some(c) = s.get("const") {
        if c != v {
            errs.push(format!("{path}: expected {c}"));
        }
    }
    if let Some(t) = s.get("type") {
        let types: Vec<&str> = match t {
            Value::String(x) => vec![x.as_str()],
            Value::Array(xs) => xs.iter().filter_map(Value::as_str).collect(),
            _ => panic!("bad type"),
        };
        let ok = types.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            "integer" => v.is_i64() || v.is_u64(),
            "number" => v.is_number(),
            other => panic!("type {other}"),
        });
        if !ok {
            return errs.push(format!("{path}: not {types:?}"));
        }
    }
    if let Some(m) = s.get("minimum").and_then(Value::as_f64) {
        if v.as_f64().is_some_and(|x| x < m) {
            errs.push(format!("{path}: below {m}"));
        }
    }
    if let Some(p) = s.get("pattern").and_then(Value::as_str) {
        assert_eq!(p, "^[0-9a-f]{64}$", "unsupported pattern");
        let x = v.as_str().unwrap_or("");
        if x.len() != 64 || !x.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            errs.push(format!("{path}: not a sha256 digest"));
        }
    }
    if let Some(Value::Object(o)) = Some(v) {
        let props = s.get("properties").and_then(Value::as_object);
        for r in s.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !o.contains_key(r.as_str().unwrap()) {
                errs.push(format!("{path}: missing {r}"));
            }
        }
        for (k, x) in o {
            let sub = format!("{path}.{k}");
            match props.and_then(|p| p.get(k)) {
                Some(ps) => check(ps, x, root, &sub, errs),
                None => {
                    if let Some(ap) = s.get("additionalProperties") {
                        check(ap, x, root, &sub, errs);
                    }
                }
            }
        }
    }
    if let Value::Array(a) = v {
        if let Some(n) = s.get("minItems").and_then(Value::as_u64) {
            if (a.len() as u64) < n {
                errs.push(format!("{path}: fewer than {n} items"));
            }
        }
        if let Some(n) = s.get("maxItems").and_then(Value::as_u64) {
            if (a.len() as u64) > n {
                errs.push(format!("{path}: more than {n} items"));
            }
        }
        let prefix = s.get("prefixItems").and_then(Value::as_array).map(|p| p.len()).unwrap_or(0);
        for (i, x) in a.iter().enumerate() {
            let sub = format!("{path}[{i}]");
            if i < prefix {
                check(&s["prefixItems"][i], x, root, &sub, errs);
            } else if let Some(it) = s.get("items") {
                check(it, x, root, &sub, errs);
            }
        }
    }
    if let Some(alts) = s.get("oneOf").and_then(Value::as_array) {
        let passing = alts
            .iter()
            .filter(|a| {
                let mut e = Vec::new();
                check(a, v, root, path, &mut e);
                e.is_empty()
            })
            .count();
        if passing != 1 {
            errs.push(format!("{path}: {passing} oneOf branches match"));
        }
    }
}

fn schema() -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/document.schema.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn schema_errors(v: &Value) -> Vec<String> {
    let s = schema();
    let mut errs = Vec::new();
    check(&s, v, &s, "$", &mut errs);
    errs
}

// ---------------------------------------------------------------- helpers

fn gcover(args: &[&str]) -> i32 {
    run(std::iter::once("gcover").chain(args.iter().copied()))
}

fn fixtures() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let p = dir.path().to_path_buf();
    assert_eq!(gcover(&["fixtures", "--out-dir", p.to_str().unwrap(), "--fuzz", "3"]), 0);
    (dir, p)
}

fn report(p: &Path) -> Report {
    match read_document(p).unwrap().0 {
        Document::Report(r) => r,
        d => panic!("expected a report, got {}", d.kind()),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

// ---------------------------------------------------------------- tests

#[test]
fn fixtures_are_schema_valid_and_validate() {
    let (_d, dir) = fixtures();
    let mut names: Vec<String> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    for n in ["sg_toy.json", "sg_toy3.json", "toy_cover.json", "toy_iso.json", "z4_1.json", "z4_2.json", "fuzz_000.json"] {
        assert!(names.iter().any(|x| x == n), "{n} missing");
    }
    for n in &names {
        let p = dir.join(n);
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(schema_errors(&v), Vec::<String>::new(), "{n}");
        let out = dir.join(format!("{n}.report"));
        assert_eq!(gcover(&["validate", "--in", s(&p), "--out", s(&out)]), 0, "{n}");
        let r = report(&out);
        assert!(r.ok);
        assert_eq!(r.inputs[0].sha256, digest(&std::fs::read(&p).unwrap()));
    }
}

#[test]
fn z4_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(gcover(&["z4", "--n", "1", "--out", s(&out)]), 0);
    let r = report(&out);
    assert_eq!(r.result["aut_count"], 2);
    assert_eq!(gcover(&["z4", "--n", "9"]), 2);
    assert_eq!(gcover(&["no-such-verb"]), 2);
    assert_eq!(gcover(&["--help"]), 0);
}

#[test]
fn failing_checks_exit_one() {
    let code = gcover(&["ext-check", "--base-rank", "1", "--torsion", "8", "--b", "1;2", "--f", "1;3"]);
    assert_eq!(code, 1);
    assert_eq!(gcover(&["ext-check", "--base-rank", "1", "--torsion", "8", "--b", "1;2", "--f", "1;2"]), 0);
}

#[test]
fn verify_binding_on_the_toy_cover() {
    let (_d, dir) = fixtures();
    let out = dir.join("vb.json");
    let code = gcover(&["verify-binding", "--in", s(&dir.join("toy_cover.json")), "--component", "a,b", "--out", s(&out)]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(schema_errors(&serde_json::from_str(&text).unwrap()).is_empty());
    assert!(report(&out).ok);
    // a simplicial groupoid input builds the cover itself
    assert_eq!(gcover(&["verify-binding", "--in", s(&dir.join("sg_toy.json"))]), 0);
}

#[test]
fn tampered_cover_is_rejected() {
    let (_d, dir) = fixtures();
    let p = dir.join("toy_cover.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    let rels = v["payload"]["relations"].as_array_mut().unwrap();
    let r = rels.iter_mut().find(|r| r["tuples"].as_array().is_some_and(|t| t.len() > 1)).unwrap();
    r["tuples"].as_array_mut().unwrap().pop();
    std::fs::write(&p, v.to_string()).unwrap();
    assert_ne!(gcover(&["verify-binding", "--in", s(&p)]), 0);
}

#[test]
fn emitted_artifacts_are_schema_valid_and_deterministic() {
    let (_d, dir) = fixtures();
    let toy = dir.join("sg_toy.json");
    let cases: Vec<(Vec<String>, &str)> = vec![
        (vec!["build-cover".into(), "--in".into(), s(&toy).into()], "cover"),
        (vec!["inclusion-system".into(), "--in".into(), s(&toy).into()], "sys"),
        (vec!["coherent-family".into(), "--in".into(), s(&dir.join("toy_iso.json")).into()], "fam"),
        (vec!["functor-c".into(), "--in".into(), s(&dir.join("toy_iso.json")).into()], "fc"),
        (vec!["extract".into(), "--in".into(), s(&dir.join("z4_1.json")).into()], "ext"),
        (vec!["epsilon".into(), "--in".into(), s(&toy).into()], "eps"),
        (vec!["eta".into(), "--in".into(), s(&dir.join("z4_1.json")).into()], "eta"),
        (vec!["dcf-level".into(), "--tuple".into(), "1;2".into(), "--q".into(), "4".into(), "--bound".into(), "1,2".into()], "dcf"),
    ];
    for (args, name) in cases {
        let mut texts = Vec::new();
        for round in 0..2 {
            let emit = dir.join(format!("{name}{round}.json"));
            let out = dir.join(format!("{name}{round}.report.json"));
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            a.extend(["--emit", s(&emit), "--out", s(&out)]);
            assert_eq!(gcover(&a), 0, "{name}");
            let text = std::fs::read_to_string(&emit).unwrap();
            let v: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(schema_errors(&v), Vec::<String>::new(), "{name}");
            assert!(schema_errors(&serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap()).is_empty());
            parse(&text).unwrap();
            texts.push(text);
        }
        assert_eq!(texts[0], texts[1], "{name} is not deterministic");
    }
}

#[test]
fn schema_errors_carry_a_path() {
    let doc = serialize(&Document::Groupoid((**sg_toy().degree(1).unwrap()).clone()));
    let mut v: Value = serde_json::from_str(&doc).unwrap();
    v["payload"]["objects"][0]["elements"][0] = Value::from(3);
    match parse(&v.to_string()) {
        Err(Error::Schema { path, .. }) => assert!(path.contains("objects[0].elements[0]"), "{path}"),
        x => panic!("{x:?}"),
    }
    assert!(!schema_errors(&v).is_empty());

    let mut v: Value = serde_json::from_str(&doc).unwrap();
    v["payload"]["extra"] = Value::from(1);
    assert!(matches!(parse(&v.to_string()), Err(Error::Schema { .. })));
    assert!(!schema_errors(&v).is_empty());

    let mut v: Value = serde_json::from_str(&doc).unwrap();
    v["format_version"] = Value::from("2");
    assert!(parse(&v.to_string()).is_err());

    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format_version\":\"1\",\"kind\":\"groupoid\",\"payload\":{\"objects\":7}}").unwrap();
    assert_eq!(gcover(&["validate", "--in", s(&bad)]), 2);
}

#[test]
fn dangling_identifiers_are_named() {
    let doc = serialize(&Document::Groupoid((**sg_toy().degree(1).unwrap()).clone()));
    let mut v: Value = serde_json::from_str(&doc).unwrap();
    v["payload"]["morphisms"][0]["target"] = Value::from("Nowhere");
    match parse(&v.to_string()) {
        Err(e @ Error::UnknownId(_)) => assert!(e.to_string().contains("Nowhere")),
        x => panic!("{x:?}"),
    }
}

#[test]
fn other_kinds_round_trip() {
    let sg = Arc::new(sg_toy());
    let sys = build_inclusion_system(&sg, &SystemSeed::default()).unwrap();
    let (copy, h) = relabeled_copy(&sg, "'", true).unwrap();
    let sys2 = build_inclusion_system(&copy, &SystemSeed::default()).unwrap();
    let fam = find_coherent_family(&h, &sys, &sys2, &CoherentFamily::default()).unwrap();
    let c1 = build_cover_from_simplicial(sg.clone(), &SystemSeed::default(), "1").unwrap();
    let c2 = build_cover_from_simplicial(copy, &SystemSeed::default(), "2").unwrap();
    let k = functor_c_on_morphism(&h, &c1, &c2).unwrap();
    let z = build_z4_example(1).unwrap();
    let docs = vec![
        Document::InclusionSystem(sys),
        Document::CoherentFamily(fam),
        Document::Morphism(MorphismDoc::Simplicial(h)),
        Document::Morphism(MorphismDoc::Cover(k)),
        Document::Structure(StructureDoc { structure: z.structure, provenance: None }),
        Document::ProjectiveSystem(dcf_projective_system(&[vec![1], vec![2]], 4, &[1, 2]).unwrap()),
        Document::Report(Report { command: "x".into(), inputs: vec![], ok: true, result: Value::Null }),
    ];
    for d in docs {
        let text = serialize(&d);
        assert_eq!(parse(&text).unwrap(), d, "{}", d.kind());
        assert!(schema_errors(&to_value(&d)).is_empty(), "{}", d.kind());
    }
}

#[test]
fn atomic_write_replaces_content() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("x.json");
    write_atomic(&p, "one").unwrap();
    write_atomic(&p, "two").unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
    let names: BTreeMap<_, _> = std::fs::read_dir(dir.path()).unwrap().map(|e| (e.unwrap().file_name(), ())).collect();
    assert_eq!(names.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn simplicial_groupoids_round_trip(seed in any::<u64>()) {
        let d = Document::Simplicial(fuzz_simplicial(seed));
        let text = serialize(&d);
        prop_assert_eq!(&parse(&text).unwrap(), &d);
        prop_assert!(schema_errors(&serde_json::from_str(&text).unwrap()).is_empty());
        prop_assert_eq!(digest(text.as_bytes()), digest(serialize(&parse(&text).unwrap()).as_bytes()));
    }
}

#[test]
fn command_definition_is_consistent() {
    use clap::CommandFactory;
    groupoid_cover::cli::Cli::command().debug_assert();
}
