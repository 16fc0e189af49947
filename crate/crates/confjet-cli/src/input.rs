//! Metric spec files, tensor files and contraction files.

use std::collections::BTreeMap;

use confjet::ambient_curvature::{Contraction, Factor};
use confjet::metric::ComponentSource;
use confjet::{Expr, Jet, MetricJet, MetricSpec, Scalar, Slot, SymTag, TensorJet};
use serde::Deserialize;

use crate::format::{parse_scalar, JetJson, TensorJson};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarIn {
    Int(i64),
    Text(String),
}

impl ScalarIn {
    pub fn value(&self) -> Result<Scalar, String> {
        match self {
            ScalarIn::Int(k) => Ok(Scalar::from_int(*k)),
            ScalarIn::Text(s) => parse_scalar(s),
        }
    }
}

/// A component given as a bare coefficient list or as a full jet object.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum JetIn {
    Coeffs(Vec<(Vec<u32>, ScalarIn)>),
    Full(JetJson),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub dim: usize,
    pub signature: (usize, usize),
    pub coords: Vec<String>,
    #[serde(default)]
    pub base: Vec<ScalarIn>,
    pub order: u32,
    #[serde(default)]
    pub components: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub jets: Option<BTreeMap<String, JetIn>>,
}

/// `"ij"` with one-based single digits, or `"i,j"`.
pub fn parse_pair(key: &str, n: usize) -> Result<(usize, usize), String> {
    let bad = || format!("bad component key \"{}\" for dimension {}", key, n);
    let parts: Vec<&str> = if key.contains(',') {
        key.split(',').map(str::trim).collect()
    } else if key.chars().count() == 2 && key.is_ascii() {
        vec![&key[..1], &key[1..]]
    } else {
        return Err(bad());
    };
    if parts.len() != 2 {
        return Err(bad());
    }
    let mut ix = [0usize; 2];
    for (k, p) in parts.iter().enumerate() {
        match p.parse::<usize>() {
            Ok(i) if (1..=n).contains(&i) => ix[k] = i - 1,
            _ => return Err(bad()),
        }
    }
    Ok((ix[0], ix[1]))
}

/// A loaded spec: the metric jet plus the base point its expressions are expanded about.
#[derive(Debug, Clone)]
pub struct LoadedSpec {
    pub metric: MetricJet,
    pub base: Vec<Scalar>,
}

impl LoadedSpec {
    /// Expands an expression in the spec's coordinates about its base point.
    pub fn expr_jet(&self, src: &str) -> Result<Jet, String> {
        let e = Expr::parse(src).map_err(|e| format!("expression \"{}\": {}", src, e))?;
        e.to_jet(self.metric.vars(), &self.base, self.metric.order()).map_err(|e| format!("expression \"{}\": {}", src, e))
    }
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("spec file: {}", e))
    }

    pub fn to_spec(&self) -> Result<MetricSpec, String> {
        let n = self.dim;
        let base = self.base.iter().map(ScalarIn::value).collect::<Result<Vec<_>, _>>()?;
        let components = match (&self.components, &self.jets) {
            (Some(map), None) => {
                let mut out = BTreeMap::new();
                for (k, v) in map {
                    out.insert(parse_pair(k, n)?, v.clone());
                }
                ComponentSource::Expressions(out)
            }
            (None, Some(map)) => {
                let mut out = BTreeMap::new();
                for (k, v) in map {
                    let coeffs = match v {
                        JetIn::Coeffs(c) => c.iter().map(|(e, s)| Ok((e.clone(), s.value()?))).collect::<Result<Vec<_>, String>>()?,
                        JetIn::Full(j) => {
                            if j.vars != self.coords {
                                return Err(format!("component {}: jet variables differ from coords", k));
                            }
                            j.coeffs.iter().map(|(e, s)| Ok((e.clone(), parse_scalar(s)?))).collect::<Result<Vec<_>, String>>()?
                        }
                    };
                    out.insert(parse_pair(k, n)?, coeffs);
                }
                ComponentSource::Jets(out)
            }
            _ => return Err("spec file needs exactly one of \"components\" and \"jets\"".into()),
        };
        Ok(MetricSpec { dim: n, signature: self.signature, coords: self.coords.clone(), base, order: self.order, components })
    }

    pub fn load(&self) -> Result<LoadedSpec, String> {
        let spec = self.to_spec()?;
        let metric = spec.load().map_err(|e| e.to_string())?;
        let base = if spec.base.is_empty() { vec![Scalar::zero(); spec.dim] } else { spec.base };
        Ok(LoadedSpec { metric, base })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum TensorIn {
    Canonical(TensorJson),
    Expressions { components: BTreeMap<String, String> },
}

/// Reads a symmetric 2-tensor in the spec's variables: either canonical
/// tensor JSON or `{"components": {"ij": expr}}` (missing entries are zero).
pub fn load_symmetric(text: &str, spec: &LoadedSpec) -> Result<TensorJet, String> {
    let g = &spec.metric;
    let n = g.dim();
    let parsed: TensorIn = serde_json::from_str(text).map_err(|e| format!("tensor file: {}", e))?;
    let t = match parsed {
        TensorIn::Canonical(t) => {
            let t = t.to_tensor_in(Some(g.vars()))?;
            if t.dim() != n || t.valence() != [Slot::Down, Slot::Down] || t.comps().iter().any(|c| c.vars() != g.vars()) {
                return Err("tensor file: expected a covariant 2-tensor in the spec's coordinates".into());
            }
            t
        }
        TensorIn::Expressions { components } => {
            let mut entries = vec![Jet::zero(g.vars(), g.order()); n * n];
            let mut set = vec![false; n * n];
            for (k, src) in &components {
                let (i, j) = parse_pair(k, n)?;
                let v = spec.expr_jet(src)?;
                for (a, b) in [(i, j), (j, i)] {
                    if set[a * n + b] && entries[a * n + b] != v {
                        return Err(format!("tensor file: component {} given twice with different values", k));
                    }
                    entries[a * n + b] = v.clone();
                    set[a * n + b] = true;
                }
            }
            TensorJet::from_matrix(n, entries)
        }
    };
    if t.transpose(0, 1).comps() != t.comps() {
        return Err("tensor file: tensor is not symmetric".into());
    }
    t.with_symmetry(&[SymTag::Sym(0, 1)]).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct FactorIn {
    pub kind: String,
    #[serde(default)]
    pub derivatives: usize,
    pub slots: Vec<String>,
}

/// Factors with named slots. Pairs name the contracted slots; without
/// `pairs`, every name must occur exactly twice and those occurrences pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionFile {
    pub factors: Vec<FactorIn>,
    #[serde(default)]
    pub pairs: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub orientation: Option<i32>,
}

impl ContractionFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("contraction file: {}", e))
    }

    pub fn orientation(&self) -> Result<i32, String> {
        match self.orientation.unwrap_or(1) {
            o @ (1 | -1) => Ok(o),
            o => Err(format!("contraction file: orientation must be 1 or -1, got {}", o)),
        }
    }

    pub fn to_contraction(&self, n: usize) -> Result<Contraction, String> {
        let mut factors = Vec::new();
        let mut names: Vec<&str> = Vec::new();
        for f in &self.factors {
            let factor = match f.kind.as_str() {
                "curvature" => Factor::Curvature(f.derivatives),
                "volume" => Factor::Volume,
                "volume_t" => Factor::VolumeT,
                k => return Err(format!("contraction file: unknown factor kind \"{}\"", k)),
            };
            if f.kind != "curvature" && f.derivatives != 0 {
                return Err(format!("contraction file: \"{}\" takes no derivatives", f.kind));
            }
            if f.slots.len() != factor.slots(n) {
                return Err(format!("contraction file: {} factor needs {} slots, got {}", f.kind, factor.slots(n), f.slots.len()));
            }
            factors.push(factor);
            names.extend(f.slots.iter().map(String::as_str));
        }
        let mut pairs = Vec::new();
        match &self.pairs {
            Some(list) => {
                let mut index = BTreeMap::new();
                for (k, s) in names.iter().enumerate() {
                    if index.insert(*s, k).is_some() {
                        return Err(format!("contraction file: slot name \"{}\" repeated while pairs are given", s));
                    }
                }
                for (a, b) in list {
                    let find = |s: &str| index.get(s).copied().ok_or_else(|| format!("contraction file: unknown slot \"{}\"", s));
                    pairs.push((find(a)?, find(b)?));
                }
            }
            None => {
                let mut seen: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
                for (k, s) in names.iter().enumerate() {
                    seen.entry(s).or_default().push(k);
                }
                for (s, at) in seen {
                    if at.len() != 2 {
                        return Err(format!("contraction file: slot name \"{}\" occurs {} times, expected 2", s, at.len()));
                    }
                    pairs.push((at[0], at[1]));
                }
                pairs.sort();
            }
        }
        Ok(Contraction { factors, pairs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_keys() {
        assert_eq!(parse_pair("12", 3), Ok((0, 1)));
        assert_eq!(parse_pair("3, 1", 3), Ok((2, 0)));
        assert_eq!(parse_pair("10,2", 12), Ok((9, 1)));
        assert!(parse_pair("14", 3).is_err());
        assert!(parse_pair("1", 3).is_err());
    }

    #[test]
    fn expression_and_jet_specs_agree() {
        let a = SpecFile::parse(r#"{"dim":2,"signature":[2,0],"coords":["x","y"],"order":3,"components":{"11":"1+x^2","12":"0","22":"1-x*y/2"}}"#)
            .unwrap();
        let b = SpecFile::parse(
            r#"{"dim":2,"signature":[2,0],"coords":["x","y"],"order":3,
                "jets":{"11":[[[0,0],1],[[2,0],"1/1"]],"12":[],"22":{"vars":["x","y"],"order":3,"coeffs":[[[0,0],"1"],[[1,1],"-1/2"]]}}}"#,
        )
        .unwrap();
        assert_eq!(a.load().unwrap().metric.g().comps(), b.load().unwrap().metric.g().comps());
        let both = r#"{"dim":1,"signature":[1,0],"coords":["x"],"order":2,"components":{"11":"1"},"jets":{}}"#;
        assert!(SpecFile::parse(both).unwrap().load().is_err());
    }

    #[test]
    fn norm_squared_from_repeated_names() {
        let c = ContractionFile::parse(
            r#"{"factors":[{"kind":"curvature","derivatives":1,"slots":["a","b","c","d","e"]},
                           {"kind":"curvature","derivatives":1,"slots":["a","b","c","d","e"]}]}"#,
        )
        .unwrap();
        assert_eq!(c.to_contraction(5).unwrap(), Contraction::norm_squared(1));
        let explicit = ContractionFile::parse(
            r#"{"factors":[{"kind":"curvature","slots":["a","b","c","d"]},{"kind":"curvature","slots":["p","q","r","s"]}],
                "pairs":[["a","p"],["b","q"],["c","r"],["d","s"]]}"#,
        )
        .unwrap();
        assert_eq!(explicit.to_contraction(3).unwrap(), Contraction::norm_squared(0));
        let short = ContractionFile::parse(r#"{"factors":[{"kind":"volume","slots":["a","a"]}]}"#).unwrap();
        assert!(short.to_contraction(3).is_err());
    }
}
