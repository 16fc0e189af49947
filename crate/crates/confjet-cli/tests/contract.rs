//! Exit codes, validation messages and cross-checks of the printed JSON.

use std::path::PathBuf;
use std::process::Command;

use confjet::Scalar;
use confjet_io::format::AmbientJson;
use confjet_io::input::SpecFile;
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_confjet")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn obstructed_expansion_exits_3_with_partial_result() {
    let spec = data("generic4.json");
    let (code, out, err) = run(&["expand", "--spec", &spec, "--order", "3"]);
    assert_eq!(code, 3);
    assert!(err.contains("obstruction"));
    let e: AmbientJson = serde_json::from_str(&out).unwrap();
    assert_eq!(e.status, "obstructed");
    assert_eq!(e.orders.len(), 1);
    assert!(e.trace_at_half_n.is_some());
    let o = e.obstruction.expect("obstruction printed").to_tensor().unwrap();
    assert!(!o.is_zero());

    let (code, out, _) = run(&["obstruction", "--spec", &spec]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["zero"], Value::Bool(false));
    let direct: confjet_io::format::TensorJson = serde_json::from_value(v["obstruction"].clone()).unwrap();
    assert_eq!(direct.to_tensor().unwrap().comps(), o.comps());

    // asking only for the determined part is fine
    let (code, out, err) = run(&["expand", "--spec", &spec, "--order", "1"]);
    assert_eq!((code, err.as_str()), (0, ""));
    assert_eq!(serde_json::from_str::<AmbientJson>(&out).unwrap().status, "determined");
}

#[test]
fn flat_obstruction_is_zero() {
    let (code, out, _) = run(&["obstruction", "--spec", &data("flat4.json")]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["zero"], Value::Bool(true));
}

#[test]
fn einstein_expansion_is_quadratic() {
    let path = data("sphere3.json");
    let g = SpecFile::parse(&std::fs::read_to_string(&path).unwrap()).unwrap().load().unwrap().metric;
    let (code, out, _) = run(&["expand", "--spec", &path, "--order", "4"]);
    assert_eq!(code, 0);
    let e: AmbientJson = serde_json::from_str(&out).unwrap();
    // unit sphere: λ = 1/2, (1 + ρ/2)² g
    let want = [Scalar::one(), Scalar::ratio(1, 2), Scalar::zero(), Scalar::zero()];
    assert_eq!(e.orders.len(), 4);
    for (o, c) in e.orders.iter().zip(&want) {
        let t = o.tensor.to_tensor().unwrap();
        for (a, b) in t.comps().iter().zip(g.g().comps()) {
            assert_eq!(*a, b.scale(c).truncate(a.order()), "m = {}", o.m);
        }
    }
}

#[test]
fn gjms_paths_agree_on_the_sphere() {
    let spec = data("sphere3.json");
    let value = |path: &str| {
        let (code, out, _) = run(&["gjms", "--spec", &spec, "--k", "2", "--f", "x^2*y - z^3/2 + x*z", "--path", path]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["path"], path);
        v["value"].clone()
    };
    assert_eq!(value("generic"), value("einstein"));
}

#[test]
fn validation_errors_exit_2() {
    let cases: Vec<Vec<String>> = vec![
        vec!["obstruction".into(), "--spec".into(), data("bad_spec.json")],
        vec!["obstruction".into(), "--spec".into(), data("missing.json")],
        vec!["obstruction".into()],
        vec!["obstruction".into(), "--spec".into(), data("generic3.json")],
        vec!["selfdual".into(), "--spec".into(), data("generic3.json"), "--sign".into(), "both".into(), "--order".into(), "4".into()],
        vec!["selfdual".into(), "--spec".into(), data("generic4.json"), "--sign".into(), "plus".into(), "--order".into(), "4".into()],
        vec!["transform".into(), "--spec".into(), data("generic3.json"), "--upsilon".into(), "1+x".into()],
        vec!["gjms".into(), "--spec".into(), data("generic3.json"), "--k".into(), "2".into(), "--f".into(), "x+".into()],
        vec!["curvature".into(), "--spec".into(), data("generic3.json"), "--key".into(), "1,2,9,1".into()],
        vec!["expand".into(), "--spec".into(), data("generic3.json"), "--order".into(), "9".into()],
        vec!["frobnicate".into()],
    ];
    for args in cases {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, out, err) = run(&refs);
        assert_eq!(code, 2, "{:?}", args);
        assert!(out.is_empty(), "{:?}", args);
        assert!(!err.trim().is_empty(), "{:?}", args);
    }
}

#[test]
fn help_documents_every_flag() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for s in [
        "expand",
        "poincare",
        "obstruction",
        "curvature",
        "identities",
        "transform",
        "invariant",
        "gjms",
        "selfdual",
        "ktensor",
        "straightD",
        "--spec",
        "--json-indent",
    ] {
        assert!(out.contains(s), "top-level help lacks {}", s);
    }
    for (sub, flags) in [
        ("expand", &["--order", "--h"][..]),
        ("transform", &["--upsilon"]),
        ("invariant", &["--contraction"]),
        ("gjms", &["--k", "--f"]),
        ("selfdual", &["--sign", "--order"]),
    ] {
        let (code, out, _) = run(&[sub, "--help"]);
        assert_eq!(code, 0);
        for f in flags {
            assert!(out.contains(f), "{} help lacks {}", sub, f);
        }
    }
}

#[test]
fn indentation_only_changes_whitespace() {
    let spec = data("generic3.json");
    let (_, a, _) = run(&["ktensor", "--spec", &data("generic4.json"), "--json-indent", "0"]);
    let (_, b, _) = run(&["ktensor", "--spec", &data("generic4.json"), "--json-indent", "4"]);
    assert_eq!(a.lines().count(), 1);
    assert_eq!(serde_json::from_str::<Value>(&a).unwrap(), serde_json::from_str::<Value>(&b).unwrap());
    let (_, c, _) = run(&["selfdual", "--spec", &spec, "--sign", "minus", "--order", "4", "--json-indent", "1"]);
    assert!(c.lines().nth(1).unwrap().starts_with(" \""));
}
