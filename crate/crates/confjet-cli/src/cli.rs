//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use confjet::ambient::{expand_ambient, k_tensor, obstruction, straightness_d, to_poincare};
use confjet::ambient_curvature::{conformal_transform, verify_identities, AmbientIndex, ComponentKey, CurvatureTable};
use confjet::gjms::{gjms_apply, HarmonicPath};
use confjet::selfdual3::{selfdual_check, selfdual_expand, Duality};
use confjet::TensorJet;
use serde::Serialize;
use serde_json::{json, Value};

use crate::format::{poincare_orders, scalar_str, to_json, vanishing_json, AmbientJson, JetJson, TensorJson};
use crate::input::{load_symmetric, ContractionFile, LoadedSpec, SpecFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BEYOND: i32 = 3;

/// Exact conformal-geometry computations on jets of metrics.
///
/// Every command reads a metric spec (JSON) and prints one JSON document.
/// Exit status: 0 on success, 2 on invalid input (message on stderr), 3 when
/// the request goes past what the metric determines, e.g. expanding beyond a
/// nonzero obstruction or asking for an ambiguous curvature component; the
/// partial result is still printed.
#[derive(Debug, Parser)]
#[command(name = "confjet", version, max_term_width = 100)]
pub struct Cli {
    /// Metric spec: {dim, signature, coords, base, order, components | jets}
    #[arg(long, global = true, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// Spaces per indentation level of the JSON output; 0 prints one line
    #[arg(long, global = true, value_name = "N", default_value_t = 2)]
    json_indent: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PathArg {
    Generic,
    Einstein,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ambient metric expansion: ρ-derivatives g^(m) at ρ = 0 for m = 1..N
    Expand {
        /// Number of ρ-derivatives
        #[arg(long, value_name = "N")]
        order: usize,
        /// Trace-free part of g^(n/2) for even n (tensor JSON or {"components": {"ij": expr}}); zero if absent
        #[arg(long, value_name = "PATH")]
        h: Option<PathBuf>,
    },
    /// Poincaré metric expansion: r-derivatives of g_r at r = 0 for k = 1..N
    Poincare {
        /// Number of r-derivatives
        #[arg(long, value_name = "N")]
        order: usize,
        /// Trace-free part of g^(n/2) for even n, as for expand
        #[arg(long, value_name = "PATH")]
        h: Option<PathBuf>,
    },
    /// Obstruction tensor (n even, at least 4)
    Obstruction,
    /// Ambient curvature components R̃_{IJKL,M..} at the base point
    Curvature {
        /// Number of covariant derivatives to tabulate
        #[arg(long, value_name = "R", default_value_t = 0)]
        order: usize,
        /// Component key such as "1,2,1,2" or "inf,1,2,inf,inf"; repeatable. Without keys, every
        /// stored component with a nonzero base-point value is listed
        #[arg(long, value_name = "KEY")]
        key: Vec<String>,
    },
    /// Check the ambient curvature identities on a table through R derivatives
    Identities {
        /// Number of covariant derivatives
        #[arg(long, value_name = "R", default_value_t = 2)]
        order: usize,
    },
    /// Compare curvature tables of g and e^{2Υ}g under the p-matrix law
    Transform {
        /// Conformal factor Υ, an expression vanishing at the base point
        #[arg(long, value_name = "EXPR")]
        upsilon: String,
        /// Number of covariant derivatives to compare
        #[arg(long, value_name = "R", default_value_t = 1)]
        order: usize,
    },
    /// Evaluate a complete contraction of ambient curvature at the base point
    Invariant {
        /// Contraction file: {factors: [{kind, derivatives, slots}], pairs?, orientation?}
        #[arg(long, value_name = "PATH")]
        contraction: PathBuf,
    },
    /// Apply the GJMS operator of order 2k to a function at the base point
    Gjms {
        /// Half the order of the operator
        #[arg(long, value_name = "K")]
        k: usize,
        /// The function, as an expression in the spec's coordinates
        #[arg(long, value_name = "EXPR")]
        f: String,
        /// Force the harmonic-extension path; by default Einstein metrics use the Einstein path
        #[arg(long, value_enum)]
        path: Option<PathArg>,
    },
    /// Self-dual Poincaré expansion of a 3-metric and its self-duality check
    Selfdual {
        /// Self-dual (plus) or anti-self-dual (minus)
        #[arg(long, value_enum)]
        sign: Sign,
        /// Number of r-derivatives
        #[arg(long, value_name = "N")]
        order: usize,
        /// Orientation of the coordinate frame, 1 or -1
        #[arg(long, value_name = "O", default_value_t = 1, allow_negative_numbers = true)]
        orientation: i32,
    },
    /// Trace-free tensor K relating the all-∞ curvature derivative to g^(n/2) (n even)
    Ktensor,
    /// The 1-form D that the divergence of g^(n/2) must match for a straight continuation (n even)
    #[command(name = "straightD")]
    StraightD,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Done {
    json: Value,
    /// Set when the request went past the determined range.
    beyond: Option<String>,
}

fn ok(json: Value) -> Result<Done, String> {
    Ok(Done { json, beyond: None })
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {}", path.display(), e))
}

fn tensor(t: &TensorJet) -> Value {
    value(&TensorJson::from_tensor(t))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: EXIT_INVALID, stdout: String::new(), stderr: text }
            } else {
                Outcome { code: EXIT_OK, stdout: text, stderr: String::new() }
            };
        }
    };
    match dispatch(&cli) {
        Ok(done) => {
            let stdout = to_json(&done.json, cli.json_indent);
            match done.beyond {
                None => Outcome { code: EXIT_OK, stdout, stderr: String::new() },
                Some(why) => Outcome { code: EXIT_BEYOND, stdout, stderr: format!("confjet: {}\n", why) },
            }
        }
        Err(msg) => Outcome { code: EXIT_INVALID, stdout: String::new(), stderr: format!("confjet: {}\n", msg) },
    }
}

fn load_spec(cli: &Cli) -> Result<LoadedSpec, String> {
    let path = cli.spec.as_ref().ok_or("--spec is required")?;
    SpecFile::parse(&read(path)?)?.load()
}

fn dispatch(cli: &Cli) -> Result<Done, String> {
    let spec = load_spec(cli)?;
    let g = &spec.metric;
    let n = g.dim();
    let h = |p: &Option<PathBuf>| -> Result<Option<TensorJet>, String> { p.as_ref().map(|p| load_symmetric(&read(p)?, &spec)).transpose() };
    match &cli.command {
        Command::Expand { order, h: hp } => {
            let e = expand_ambient(g, *order, h(hp)?.as_ref()).map_err(|e| e.to_string())?;
            let beyond = (e.is_obstructed() && *order >= n / 2)
                .then(|| format!("obstruction tensor is nonzero; expansion stops at m = {} of {}", e.orders().len(), order));
            Ok(Done { json: value(&AmbientJson::from_expansion(&e)), beyond })
        }
        Command::Poincare { order, h: hp } => {
            let e = expand_ambient(g, *order / 2, h(hp)?.as_ref()).map_err(|e| e.to_string())?;
            let reach = if e.is_obstructed() { (2 * e.orders().len() + 1).min(*order) } else { *order };
            let p = to_poincare(&e, reach).map_err(|e| e.to_string())?;
            let mut json = json!({ "n": n, "orders": poincare_orders(&p) });
            let mut beyond = None;
            if reach < *order {
                json["obstruction"] = tensor(e.obstruction().expect("obstructed"));
                beyond = Some(format!("obstruction tensor is nonzero; expansion stops at k = {} of {}", reach, order));
            }
            Ok(Done { json, beyond })
        }
        Command::Obstruction => {
            let o = obstruction(g).map_err(|e| e.to_string())?;
            ok(json!({ "n": n, "obstruction": tensor(&o), "zero": o.is_zero() }))
        }
        Command::Curvature { order, key } => curvature(g, *order, key),
        Command::Identities { order } => {
            let t = CurvatureTable::for_metric(g, *order, 0).map_err(|e| e.to_string())?;
            let rep = verify_identities(&t);
            let checks: Vec<Value> =
                rep.checks.iter().map(|c| json!({ "name": c.name, "checked": c.checked, "passed": c.passed(), "failures": c.failures })).collect();
            ok(json!({ "n": n, "derivatives": order, "checks": checks, "all_passed": rep.all_passed() }))
        }
        Command::Transform { upsilon, order } => {
            let u = spec.expr_jet(upsilon)?;
            let rep = conformal_transform(g, &u, *order).map_err(|e| e.to_string())?;
            let ix = ambient_indices(n);
            let p: Vec<Vec<String>> = ix.iter().map(|&a| ix.iter().map(|&i| scalar_str(rep.p.get(a, i))).collect()).collect();
            ok(json!({
                "n": n,
                "derivatives": order,
                "p": p,
                "compared": rep.compared,
                "skipped": rep.skipped,
                "mismatches": rep.mismatches,
                "passed": rep.passed(),
            }))
        }
        Command::Invariant { contraction } => {
            let file = ContractionFile::parse(&read(contraction)?)?;
            let c = file.to_contraction(n)?;
            let v = confjet::ambient_curvature::eval_invariant(&c, g, file.orientation()?).map_err(|e| e.to_string())?;
            ok(json!({ "value": scalar_str(&v.value), "weight": v.weight }))
        }
        Command::Gjms { k, f, path } => {
            let fj = spec.expr_jet(f)?;
            let path = path.map(|p| match p {
                PathArg::Generic => HarmonicPath::Generic,
                PathArg::Einstein => HarmonicPath::Einstein,
            });
            let v = gjms_apply(g, *k, &fj, path).map_err(|e| e.to_string())?;
            ok(json!({ "value": scalar_str(&v.value), "weight": scalar_str(&v.weight), "path": v.path.name() }))
        }
        Command::Selfdual { sign, order, orientation } => {
            let d = match sign {
                Sign::Plus => Duality::Plus,
                Sign::Minus => Duality::Minus,
            };
            let p = selfdual_expand(g, d, *orientation, *order).map_err(|e| e.to_string())?;
            let rep = selfdual_check(&p, d, *orientation, *order as u32).map_err(|e| e.to_string())?;
            ok(json!({
                "n": n,
                "sign": d.name(),
                "orientation": orientation,
                "orders": poincare_orders(&p),
                "checked_order": rep.order,
                "vanishing_order": vanishing_json(rep.vanishing),
                "full_vanishing_order": vanishing_json(rep.full_vanishing),
                "certificate": {
                    "holds": rep.certificate_holds,
                    "first_derivative": tensor(&rep.certificate),
                },
                "star_involution": rep.star_involution,
                "s_injective": rep.s_injective,
            }))
        }
        Command::Ktensor => {
            let k = k_tensor(g).map_err(|e| e.to_string())?;
            ok(json!({ "n": n, "k": tensor(&k) }))
        }
        Command::StraightD => {
            let d = straightness_d(g).map_err(|e| e.to_string())?;
            ok(json!({ "n": n, "d": tensor(&d) }))
        }
    }
}

/// `0, 1, …, n, ∞`.
fn ambient_indices(n: usize) -> Vec<AmbientIndex> {
    let mut v = vec![AmbientIndex::Zero];
    v.extend((1..=n).map(AmbientIndex::Base));
    v.push(AmbientIndex::Infinity);
    v
}

fn curvature(g: &confjet::MetricJet, order: usize, keys: &[String]) -> Result<Done, String> {
    let n = g.dim();
    let t = CurvatureTable::for_metric(g, order, 0).map_err(|e| e.to_string())?;
    if keys.is_empty() {
        let mut out = Vec::new();
        for s in 0..=order {
            for key in t.stored_keys(s) {
                let v = t.base_point_value(&key).map_err(|e| e.to_string())?;
                if !v.is_zero() {
                    let c = t.component(&key).map_err(|e| e.to_string())?;
                    out.push(json!({ "key": key.to_string(), "value": scalar_str(&v), "strength": c.strength, "ambiguous": c.ambiguous }));
                }
            }
        }
        return ok(json!({ "n": n, "derivatives": order, "components": out }));
    }
    let mut out = Vec::new();
    let mut ambiguous = Vec::new();
    for k in keys {
        let key = ComponentKey::parse(k, n).map_err(|e| e.to_string())?;
        let c = t.component(&key).map_err(|e| e.to_string())?;
        if c.ambiguous {
            ambiguous.push(key.to_string());
        }
        out.push(json!({
            "key": key.to_string(),
            "value": value(&JetJson::from_jet(&c.value)),
            "strength": c.strength,
            "t_degree": c.t_degree,
            "ambiguous": c.ambiguous,
        }));
    }
    let beyond = (!ambiguous.is_empty()).then(|| format!("components depend on the choice of ambient metric: {}", ambiguous.join(" ")));
    Ok(Done { json: json!({ "n": n, "derivatives": order, "components": out }), beyond })
}
