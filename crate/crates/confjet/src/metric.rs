//! Metric jets: a symmetric (0,2) tensor plus its cached inverse.
//!
//! The first `dim` variables of the jets are the coordinates; any further
//! variables are parameters that are never differentiated by the tensor
//! calculus.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{EvalError, Expr, ParseError};
use crate::jet::{mono_from_exps, Jet, JetError, VarSet};
use crate::scalar::Scalar;
use crate::tensor::{Slot, SymTag, TensorJet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricError {
    Degenerate,
    WrongSignature { expected: (usize, usize), found: (usize, usize) },
    Asymmetric(usize, usize),
    MissingComponent(usize, usize),
    Parse { component: (usize, usize), error: ParseError },
    Eval { component: (usize, usize), error: EvalError },
    NotOrthonormal,
    BadSpec(String),
    Jet(JetError),
}

impl From<JetError> for MetricError {
    fn from(e: JetError) -> Self {
        MetricError::Jet(e)
    }
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::Degenerate => write!(f, "metric is degenerate at the base point"),
            MetricError::WrongSignature { expected, found } => {
                write!(f, "signature {:?} expected, found {:?}", expected, found)
            }
            MetricError::Asymmetric(i, j) => write!(f, "components {}{} and {}{} differ", i + 1, j + 1, j + 1, i + 1),
            MetricError::MissingComponent(i, j) => write!(f, "component {}{} missing", i + 1, j + 1),
            MetricError::Parse { component: (i, j), error } => write!(f, "component {}{}: {}", i + 1, j + 1, error),
            MetricError::Eval { component: (i, j), error } => write!(f, "component {}{}: {}", i + 1, j + 1, error),
            MetricError::NotOrthonormal => write!(f, "metric must equal the standard diagonal form at the base point"),
            MetricError::BadSpec(s) => write!(f, "{}", s),
            MetricError::Jet(e) => write!(f, "{}", e),
        }
    }
}

/// Inverse of a square matrix of jets by Gauss-Jordan elimination,
/// pivoting on entries with nonzero constant term.
pub fn invert_matrix(m: &[Jet], n: usize) -> Result<Vec<Jet>, JetError> {
    assert_eq!(m.len(), n * n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let vars = m[0].vars().clone();
    let order = m.iter().map(Jet::order).min().unwrap();
    let mut a: Vec<Vec<Jet>> = (0..n).map(|i| m[i * n..(i + 1) * n].to_vec()).collect();
    let mut inv: Vec<Vec<Jet>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { Jet::one(&vars, order) } else { Jet::zero(&vars, order) }).collect()).collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].constant_term().is_zero()).ok_or(JetError::NotUnit)?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].invert()?;
        for j in 0..n {
            a[col][j] = &a[col][j] * &p;
            inv[col][j] = &inv[col][j] * &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                if !a[col][j].is_zero() {
                    a[r][j] = &a[r][j] - &(&f * &a[col][j]);
                }
                if !inv[col][j].is_zero() {
                    inv[r][j] = &inv[r][j] - &(&f * &inv[col][j]);
                }
            }
        }
    }
    Ok(inv.into_iter().flatten().collect())
}

/// Determinant of a square matrix of jets by cofactor-free elimination
/// (requires an invertible constant part).
pub fn det_matrix(m: &[Jet], n: usize) -> Result<Jet, JetError> {
    let vars = m[0].vars().clone();
    let order = m.iter().map(Jet::order).min().unwrap();
    let mut a: Vec<Vec<Jet>> = (0..n).map(|i| m[i * n..(i + 1) * n].to_vec()).collect();
    let mut det = Jet::one(&vars, order);
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].constant_term().is_zero()).ok_or(JetError::NotUnit)?;
        if piv != col {
            a.swap(col, piv);
            det = -det;
        }
        det = &det * &a[col][col];
        let p = a[col][col].invert()?;
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] * &p;
            for j in col..n {
                a[r][j] = &a[r][j] - &(&f * &a[col][j]);
            }
        }
    }
    Ok(det)
}

/// Signature `(p, q)` of a symmetric rational matrix, or `None` if singular.
pub fn signature_of(m: &[Scalar], n: usize) -> Option<(usize, usize)> {
    let mut a: Vec<Vec<Scalar>> = (0..n).map(|i| m[i * n..(i + 1) * n].to_vec()).collect();
    let (mut p, mut q) = (0, 0);
    for k in 0..n {
        // bring a nonzero diagonal entry to position k by congruence
        if a[k][k].is_zero() {
            if let Some(j) = (k + 1..n).find(|&j| !a[j][j].is_zero()) {
                a.swap(k, j);
                for row in a.iter_mut() {
                    row.swap(k, j);
                }
            } else {
                let j = (k + 1..n).find(|&j| !a[k][j].is_zero())?;
                for c in 0..n {
                    let v = a[j][c].clone();
                    a[k][c] += v;
                }
                for r in 0..n {
                    let v = a[r][j].clone();
                    a[r][k] += v;
                }
            }
        }
        let d = a[k][k].clone();
        if d.is_negative() {
            q += 1;
        } else {
            p += 1;
        }
        let dinv = d.recip().unwrap();
        for r in k + 1..n {
            if a[r][k].is_zero() {
                continue;
            }
            let f = &a[r][k] * &dinv;
            for c in k..n {
                let v = &f * &a[k][c];
                a[r][c] -= &v;
            }
        }
    }
    Some((p, q))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricJet {
    g: TensorJet,
    ginv: TensorJet,
    signature: (usize, usize),
}

impl MetricJet {
    /// Validates symmetry and nondegeneracy at the origin, then inverts.
    pub fn new(g: TensorJet) -> Result<Self, MetricError> {
        let n = g.dim();
        for i in 0..n {
            for j in i + 1..n {
                if g.get(&[i, j]) != g.get(&[j, i]) {
                    return Err(MetricError::Asymmetric(i, j));
                }
            }
        }
        let signature = signature_of(&g.at_origin(), n).ok_or(MetricError::Degenerate)?;
        let ginv = invert_matrix(g.comps(), n).map_err(|_| MetricError::Degenerate)?;
        let ginv = TensorJet::from_comps(n, &[Slot::Up, Slot::Up], ginv).unwrap();
        let g = g.with_valence(&[Slot::Down, Slot::Down]).with_symmetry(&[SymTag::Sym(0, 1)]).unwrap();
        Ok(MetricJet { g, ginv, signature })
    }

    pub fn with_signature(g: TensorJet, signature: (usize, usize)) -> Result<Self, MetricError> {
        let m = Self::new(g)?;
        if m.signature != signature {
            return Err(MetricError::WrongSignature { expected: signature, found: m.signature });
        }
        Ok(m)
    }

    /// The constant metric `diag(+1 x p, -1 x q)`.
    pub fn flat(vars: &Arc<VarSet>, order: u32, signature: (usize, usize)) -> Self {
        let n = signature.0 + signature.1;
        let g = TensorJet::from_fn(n, &[Slot::Down, Slot::Down], |i| {
            if i[0] == i[1] {
                Jet::constant(vars, order, Scalar::from_int(if i[0] < signature.0 { 1 } else { -1 }))
            } else {
                Jet::zero(vars, order)
            }
        });
        Self::new(g).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        self.g.vars()
    }

    pub fn order(&self) -> u32 {
        self.g.order()
    }

    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    pub fn g(&self) -> &TensorJet {
        &self.g
    }

    pub fn ginv(&self) -> &TensorJet {
        &self.ginv
    }

    pub fn lower(&self, i: usize, j: usize) -> &Jet {
        self.g.get(&[i, j])
    }

    pub fn upper(&self, i: usize, j: usize) -> &Jet {
        self.ginv.get(&[i, j])
    }

    /// `h = diag(+1 x p, -1 x q)` at the origin.
    pub fn is_orthonormal_at_origin(&self) -> bool {
        let n = self.dim();
        self.g.at_origin().iter().enumerate().all(|(k, v)| {
            let (i, j) = (k / n, k % n);
            let want = if i != j {
                0
            } else if i < self.signature.0 {
                1
            } else {
                -1
            };
            *v == Scalar::from_int(want)
        })
    }

    pub fn det(&self) -> Jet {
        det_matrix(self.g.comps(), self.dim()).expect("metric is nondegenerate")
    }

    /// `sqrt|det g|`, available when the metric is orthonormal at the origin.
    pub fn volume_density(&self) -> Result<Jet, MetricError> {
        if !self.is_orthonormal_at_origin() {
            return Err(MetricError::NotOrthonormal);
        }
        let d = self.det();
        let d = if self.signature.1 % 2 == 1 { -d } else { d };
        Ok(d.pow1(&Scalar::ratio(1, 2))?)
    }

    pub fn truncate(&self, order: u32) -> Self {
        MetricJet { g: self.g.truncate(order), ginv: self.ginv.truncate(order), signature: self.signature }
    }

    /// Pointwise rescaling by a unit jet.
    pub fn conformal(&self, factor: &Jet) -> Result<Self, MetricError> {
        let inv = factor.invert()?;
        Ok(MetricJet { g: self.g.mul_jet(factor), ginv: self.ginv.mul_jet(&inv), signature: self.signature })
    }
}

/// How the components of a metric are supplied.
/// Taylor coefficients as `(exponents, coefficient)` pairs.
pub type RawTerms = Vec<(Vec<u32>, Scalar)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComponentSource {
    /// Rational expressions in the coordinates, keyed by `(i, j)`, `i <= j`.
    Expressions(BTreeMap<(usize, usize), String>),
    /// Raw Taylor coefficients in displacement coordinates.
    Jets(BTreeMap<(usize, usize), RawTerms>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSpec {
    pub dim: usize,
    pub signature: (usize, usize),
    pub coords: Vec<String>,
    pub base: Vec<Scalar>,
    pub order: u32,
    pub components: ComponentSource,
}

impl MetricSpec {
    pub fn from_expressions(coords: &[&str], signature: (usize, usize), order: u32, comps: &[((usize, usize), &str)]) -> Self {
        let n = coords.len();
        MetricSpec {
            dim: n,
            signature,
            coords: coords.iter().map(|s| String::from(*s)).collect(),
            base: vec![Scalar::zero(); n],
            order,
            components: ComponentSource::Expressions(comps.iter().map(|(k, v)| (*k, String::from(*v))).collect()),
        }
    }

    pub fn load(&self) -> Result<MetricJet, MetricError> {
        let n = self.dim;
        if n == 0 || self.coords.len() != n {
            return Err(MetricError::BadSpec(alloc::format!("expected {} coordinate names", n)));
        }
        if self.signature.0 + self.signature.1 != n {
            return Err(MetricError::BadSpec(String::from("signature does not sum to the dimension")));
        }
        if !self.base.is_empty() && self.base.len() != n {
            return Err(MetricError::BadSpec(String::from("base point has the wrong length")));
        }
        let vars = VarSet::new(self.coords.iter().cloned())?;
        let base = if self.base.is_empty() { vec![Scalar::zero(); n] } else { self.base.clone() };
        let mut entries: Vec<Option<Jet>> = vec![None; n * n];
        let mut put = |i: usize, j: usize, jet: Jet| -> Result<(), MetricError> {
            if i >= n || j >= n {
                return Err(MetricError::BadSpec(alloc::format!("component index {}{} out of range", i + 1, j + 1)));
            }
            let (a, b) = (i.min(j), i.max(j));
            if let Some(prev) = &entries[a * n + b] {
                if *prev != jet {
                    return Err(MetricError::Asymmetric(a, b));
                }
            }
            entries[a * n + b] = Some(jet.clone());
            entries[b * n + a] = Some(jet);
            Ok(())
        };
        match &self.components {
            ComponentSource::Expressions(map) => {
                for (&(i, j), src) in map {
                    let e = Expr::parse(src).map_err(|error| MetricError::Parse { component: (i, j), error })?;
                    let jet = e.to_jet(&vars, &base, self.order).map_err(|error| MetricError::Eval { component: (i, j), error })?;
                    put(i, j, jet)?;
                }
            }
            ComponentSource::Jets(map) => {
                for (&(i, j), coeffs) in map {
                    let mut terms = Vec::with_capacity(coeffs.len());
                    for (e, c) in coeffs {
                        if e.len() != n || e.iter().any(|&x| x > 255) {
                            return Err(MetricError::BadSpec(alloc::format!("bad exponent vector in component {}{}", i + 1, j + 1)));
                        }
                        terms.push((mono_from_exps(e), c.clone()));
                    }
                    put(i, j, Jet::from_terms(&vars, self.order, terms))?;
                }
            }
        }
        let mut comps = Vec::with_capacity(n * n);
        for (k, e) in entries.into_iter().enumerate() {
            comps.push(e.ok_or(MetricError::MissingComponent(k / n, k % n))?);
        }
        MetricJet::with_signature(TensorJet::from_matrix(n, comps), self.signature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(n: usize, order: u32) -> MetricSpec {
        let names = ["x", "y", "z", "w", "u", "v"];
        let s: Vec<String> = names[..n].iter().map(|c| alloc::format!("{}^2", c)).collect();
        let conf = alloc::format!("4/(1+{})^2", s.join("+"));
        let comps: Vec<((usize, usize), &str)> =
            (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| ((i, j), if i == j { conf.as_str() } else { "0" })).collect();
        MetricSpec::from_expressions(&names[..n], (n, 0), order, &comps)
    }

    #[test]
    fn flat_inverse_is_itself() {
        let v = VarSet::new(["x", "y", "z"]).unwrap();
        let m = MetricJet::flat(&v, 3, (2, 1));
        assert_eq!(m.g(), &m.ginv().clone().with_valence(&[Slot::Down, Slot::Down]).with_symmetry(&[SymTag::Sym(0, 1)]).unwrap());
        assert!(m.is_orthonormal_at_origin());
    }

    #[test]
    fn sphere_constant_term() {
        let m = sphere(3, 2).load().unwrap();
        let c = m.g().at_origin();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c[i * 3 + j], Scalar::from_int(if i == j { 4 } else { 0 }));
            }
        }
        // the inverse multiplies back to the identity
        for i in 0..3 {
            for j in 0..3 {
                let mut s = Jet::zero(m.vars(), 2);
                for k in 0..3 {
                    s = &s + &(m.lower(i, k) * m.upper(k, j));
                }
                assert_eq!(s, Jet::constant(m.vars(), 2, Scalar::from_int((i == j) as i64)));
            }
        }
    }

    #[test]
    fn rejects_degenerate_and_wrong_signature() {
        let spec = MetricSpec::from_expressions(&["x", "y"], (2, 0), 2, &[((0, 0), "1"), ((0, 1), "0"), ((1, 1), "0")]);
        assert_eq!(spec.load().unwrap_err(), MetricError::Degenerate);
        let spec = MetricSpec::from_expressions(&["x", "y"], (2, 0), 2, &[((0, 0), "1"), ((0, 1), "0"), ((1, 1), "-1")]);
        assert!(matches!(spec.load().unwrap_err(), MetricError::WrongSignature { .. }));
        let spec = MetricSpec::from_expressions(&["x", "y"], (2, 0), 2, &[((0, 0), "1"), ((1, 1), "1")]);
        assert_eq!(spec.load().unwrap_err(), MetricError::MissingComponent(0, 1));
    }

    #[test]
    fn signature_with_zero_diagonal() {
        let m = [0, 1, 1, 0].map(Scalar::from_int);
        assert_eq!(signature_of(&m, 2), Some((1, 1)));
        let m = [1, 2, 2, 4].map(Scalar::from_int);
        assert_eq!(signature_of(&m, 2), None);
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let v = VarSet::new(["x"]).unwrap();
        let x = Jet::var(&v, 3, 0);
        let one = Jet::one(&v, 3);
        let a = &one + &x;
        let m = vec![a.clone(), x.clone(), x.clone(), one.clone()];
        assert_eq!(det_matrix(&m, 2).unwrap(), &a - &(&x * &x));
    }
}
