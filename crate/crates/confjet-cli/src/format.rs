//! Canonical JSON forms for scalars, jets, tensors and expansions.

use std::sync::Arc;

use confjet::ambient::{AmbientExpansion, AmbiguityChoice, PoincareExpansion, Status};
use confjet::jet::{mono_exps, mono_from_exps};
use confjet::{Jet, Scalar, Slot, TensorJet, Vanishing, VarSet};
use serde::{Deserialize, Serialize};

/// Scalars are always written `p/q`, integers included (`3/1`).
pub fn scalar_str(c: &Scalar) -> String {
    c.to_string()
}

pub fn parse_scalar(s: &str) -> Result<Scalar, String> {
    s.parse().map_err(|_| format!("bad rational \"{}\"", s))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JetJson {
    pub vars: Vec<String>,
    /// Omitted when every variable has weight 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<u32>>,
    pub order: u32,
    pub coeffs: Vec<(Vec<u32>, String)>,
}

impl JetJson {
    pub fn from_jet(j: &Jet) -> Self {
        let vars = j.vars();
        let n = vars.len();
        let mut coeffs: Vec<(Vec<u32>, String)> = j.terms().iter().map(|(m, c)| (mono_exps(*m, n), scalar_str(c))).collect();
        coeffs.sort();
        let weights = vars.weights();
        JetJson {
            vars: vars.names().to_vec(),
            weights: if weights.iter().all(|&w| w == 1) { None } else { Some(weights.to_vec()) },
            order: j.order(),
            coeffs,
        }
    }

    fn var_set(&self) -> Result<Arc<VarSet>, String> {
        let r = match &self.weights {
            None => VarSet::new(self.vars.iter().cloned()),
            Some(w) => VarSet::weighted(self.vars.clone(), w.clone()),
        };
        r.map_err(|e| e.to_string())
    }

    /// Rebuilds the jet, reusing `vars` when the names and weights match.
    pub fn to_jet_in(&self, vars: Option<&Arc<VarSet>>) -> Result<Jet, String> {
        let fresh = self.var_set()?;
        let vars = match vars {
            Some(v) if **v == *fresh => v.clone(),
            _ => fresh,
        };
        let n = vars.len();
        let mut terms = Vec::with_capacity(self.coeffs.len());
        for (e, c) in &self.coeffs {
            if e.len() != n || e.iter().any(|&x| x > 255) {
                return Err(format!("exponent vector {:?} does not fit {} variables", e, n));
            }
            terms.push((mono_from_exps(e), parse_scalar(c)?));
        }
        Ok(Jet::from_terms(&vars, self.order, terms))
    }

    pub fn to_jet(&self) -> Result<Jet, String> {
        self.to_jet_in(None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorJson {
    pub dim: usize,
    pub valence: Vec<String>,
    pub comps: Vec<JetJson>,
}

fn slot_name(s: Slot) -> &'static str {
    match s {
        Slot::Up => "up",
        Slot::Down => "down",
    }
}

impl TensorJson {
    pub fn from_tensor(t: &TensorJet) -> Self {
        TensorJson {
            dim: t.dim(),
            valence: t.valence().iter().map(|s| slot_name(*s).to_string()).collect(),
            comps: t.comps().iter().map(JetJson::from_jet).collect(),
        }
    }

    pub fn to_tensor_in(&self, vars: Option<&Arc<VarSet>>) -> Result<TensorJet, String> {
        let valence: Vec<Slot> = self
            .valence
            .iter()
            .map(|s| match s.as_str() {
                "up" => Ok(Slot::Up),
                "down" => Ok(Slot::Down),
                _ => Err(format!("bad valence entry \"{}\"", s)),
            })
            .collect::<Result<_, _>>()?;
        let mut shared = vars.cloned();
        let mut comps = Vec::with_capacity(self.comps.len());
        for c in &self.comps {
            let j = c.to_jet_in(shared.as_ref())?;
            shared.get_or_insert_with(|| j.vars().clone());
            comps.push(j);
        }
        TensorJet::from_comps(self.dim, &valence, comps).map_err(|e| e.to_string())
    }

    pub fn to_tensor(&self) -> Result<TensorJet, String> {
        self.to_tensor_in(None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderJson {
    pub m: usize,
    pub tensor: TensorJson,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbientJson {
    pub n: usize,
    pub orders: Vec<OrderJson>,
    pub trace_at_half_n: Option<JetJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<TensorJson>,
    pub status: String,
    /// How the trace-free part at `m = n/2` was fixed, for even `n` once reached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguity: Option<String>,
}

impl AmbientJson {
    pub fn from_expansion(e: &AmbientExpansion) -> Self {
        AmbientJson {
            n: e.n(),
            orders: e.orders().iter().enumerate().map(|(k, t)| OrderJson { m: k + 1, tensor: TensorJson::from_tensor(t) }).collect(),
            trace_at_half_n: e.trace_at_half_n().map(JetJson::from_jet),
            obstruction: e.obstruction().map(TensorJson::from_tensor),
            status: match e.status() {
                Status::Determined => "determined",
                Status::Obstructed => "obstructed",
            }
            .to_string(),
            ambiguity: e.half_order().map(|h| {
                match h.choice {
                    AmbiguityChoice::Zero => "zero",
                    AmbiguityChoice::Supplied => "supplied",
                }
                .to_string()
            }),
        }
    }
}

/// `∂_r^k g_r` at `r = 0`, `k = 1..`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadialOrderJson {
    pub k: usize,
    pub tensor: TensorJson,
}

pub fn poincare_orders(p: &PoincareExpansion) -> Vec<RadialOrderJson> {
    p.orders().iter().enumerate().map(|(i, t)| RadialOrderJson { k: i + 1, tensor: TensorJson::from_tensor(t) }).collect()
}

/// A vanishing order, or `"truncation"` when nothing below the truncation order survives.
pub fn vanishing_json(v: Vanishing) -> serde_json::Value {
    match v {
        Vanishing::Exactly(k) => serde_json::Value::from(k),
        Vanishing::AtLeastTruncation => serde_json::Value::from("truncation"),
    }
}

/// Serializes with `indent` spaces per level, or compactly for `0`; ends with a newline.
pub fn to_json<T: Serialize>(v: &T, indent: usize) -> String {
    let mut out = if indent == 0 {
        serde_json::to_string(v).expect("serializable")
    } else {
        let pad = vec![b' '; indent];
        let mut buf = Vec::new();
        let fmt = serde_json::ser::PrettyFormatter::with_indent(&pad);
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
        v.serialize(&mut ser).expect("serializable");
        String::from_utf8(buf).expect("utf-8")
    };
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use confjet::ambient::expand_ambient;
    use confjet::MetricSpec;

    fn metric() -> confjet::MetricJet {
        let comps = [((0, 0), "1+x^2*y/3"), ((0, 1), "-x*y/7"), ((1, 1), "1-2*x+y^3"), ((2, 2), "1+x*y"), ((0, 2), "0"), ((1, 2), "y^2/5")];
        MetricSpec::from_expressions(&["x", "y", "z"], (3, 0), 5, &comps).load().unwrap()
    }

    #[test]
    fn integers_keep_a_denominator() {
        assert_eq!(scalar_str(&Scalar::from_int(3)), "3/1");
        assert_eq!(scalar_str(&Scalar::ratio(-6, 4)), "-3/2");
        assert_eq!(parse_scalar("-3/2").unwrap(), Scalar::ratio(-3, 2));
        assert!(parse_scalar("1/0").is_err());
    }

    #[test]
    fn jet_coefficients_sorted_by_exponent() {
        let g = metric();
        let j = JetJson::from_jet(g.lower(1, 1));
        assert_eq!(j.coeffs, vec![(vec![0, 0, 0], "1/1".into()), (vec![0, 3, 0], "1/1".into()), (vec![1, 0, 0], "-2/1".into())]);
        assert_eq!(j.to_jet().unwrap(), *g.lower(1, 1));
        let text = to_json(&j, 0);
        assert_eq!(text, "{\"vars\":[\"x\",\"y\",\"z\"],\"order\":5,\"coeffs\":[[[0,0,0],\"1/1\"],[[0,3,0],\"1/1\"],[[1,0,0],\"-2/1\"]]}\n");
    }

    #[test]
    fn expansion_round_trip() {
        let e = expand_ambient(&metric(), 2, None).unwrap();
        let j = AmbientJson::from_expansion(&e);
        let text = to_json(&j, 2);
        let back: AmbientJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back, j);
        for (o, t) in back.orders.iter().zip(e.orders()) {
            assert_eq!(o.tensor.to_tensor().unwrap().comps(), t.comps());
        }
        assert_eq!(to_json(&back, 2), text);
        assert_eq!(back.status, "determined");
        assert!(back.obstruction.is_none() && back.trace_at_half_n.is_none());
    }

    #[test]
    fn weighted_vars_round_trip() {
        let v = VarSet::weighted(vec!["x".into(), "rho".into()], vec![1, 2]).unwrap();
        let j = &Jet::var(&v, 4, 1) + &Jet::var(&v, 4, 0);
        let js = JetJson::from_jet(&j);
        assert_eq!(js.weights, Some(vec![1, 2]));
        assert_eq!(js.to_jet().unwrap(), j);
    }
}
