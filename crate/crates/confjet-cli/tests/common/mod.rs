//! Golden cases shared by the golden and acceptance targets.

use std::path::PathBuf;
use std::process::Command;

pub fn dir(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(sub)
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(args: &[&str]) -> Run {
    let data = dir("data");
    let args: Vec<String> = args.iter().map(|a| a.replace("@", &format!("{}/", data.display()))).collect();
    let out = Command::new(env!("CARGO_BIN_EXE_confjet")).args(&args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub const CASES: &[(&str, &[&str], i32)] = &[
    ("expand_sphere3", &["expand", "--spec", "@sphere3.json", "--order", "4"], 0),
    ("expand_flat4_h", &["expand", "--spec", "@flat4.json", "--order", "3", "--h", "@h4.json"], 0),
    ("expand_generic4_obstructed", &["expand", "--spec", "@generic4.json", "--order", "3"], 3),
    ("poincare_generic3", &["poincare", "--spec", "@generic3.json", "--order", "6"], 0),
    ("poincare_generic4_obstructed", &["poincare", "--spec", "@generic4.json", "--order", "5"], 3),
    ("obstruction_flat4", &["obstruction", "--spec", "@flat4.json"], 0),
    ("obstruction_generic4", &["obstruction", "--spec", "@generic4.json"], 0),
    ("curvature_generic3", &["curvature", "--spec", "@generic3.json", "--order", "1"], 0),
    ("curvature_keys_generic4", &["curvature", "--spec", "@generic4.json", "--key", "1,2,1,2", "--key", "inf,1,2,0"], 0),
    ("curvature_ambiguous_generic4", &["curvature", "--spec", "@generic4.json", "--key", "inf,1,1,inf"], 3),
    ("identities_generic3", &["identities", "--spec", "@generic3.json", "--order", "1"], 0),
    ("transform_generic3", &["transform", "--spec", "@generic3.json", "--upsilon", "x*y/2 + z/3 - x^2", "--order", "1"], 0),
    ("invariant_generic3", &["invariant", "--spec", "@generic3.json", "--contraction", "@norm_grad.json"], 0),
    ("gjms_generic3", &["gjms", "--spec", "@generic3.json", "--k", "2", "--f", "x^2 + y*z"], 0),
    ("gjms_sphere3", &["gjms", "--spec", "@sphere3.json", "--k", "3", "--f", "x^2*y^2 + z"], 0),
    ("selfdual_generic3", &["selfdual", "--spec", "@generic3.json", "--sign", "plus", "--order", "5"], 0),
    ("selfdual_lorentz3", &["selfdual", "--spec", "@lorentz3.json", "--sign", "minus", "--order", "5", "--orientation", "-1"], 0),
    ("ktensor_generic4", &["ktensor", "--spec", "@generic4.json"], 0),
    ("straightD_generic4", &["straightD", "--spec", "@generic4.json", "--json-indent", "0"], 0),
];

/// Reruns every case and compares with the golden files; returns the names that differ.
#[allow(dead_code)]
pub fn golden_mismatches() -> Vec<&'static str> {
    let golden = dir("golden");
    let mut failed = Vec::new();
    for (name, args, code) in CASES {
        let r = run(args);
        let want = std::fs::read_to_string(golden.join(format!("{}.json", name))).unwrap_or_default();
        if r.code != *code || r.stdout != want || r.stderr.is_empty() != (*code == 0) {
            failed.push(*name);
        }
    }
    failed
}
