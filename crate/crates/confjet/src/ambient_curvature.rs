//! Covariant derivatives of the ambient curvature tensor and the tensors
//! and scalar invariants they induce on the base at `ρ = 0, t = 1`.
//!
//! Ambient indices run over `0, 1..n, ∞`. Components are joint `(x, ρ)`
//! jets with `ρ` unweighted, stored at `t = 1`; a component with `z` zero
//! indices is homogeneous of degree `2 - z` in `t`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ambient::{expand_ambient_continued, AmbientError, AmbientExpansion, RhoSeries};
use crate::jet::{Jet, VarSet};
use crate::metric::MetricJet;
use crate::riemann::{self, LeviCivita};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableError {
    Ambient(AmbientError),
    BadKey(String),
    /// Key refers to more derivatives than the table holds.
    UnknownKey(String),
    UpsilonNotZeroAtOrigin,
    BadContraction(String),
    /// Contraction outside the range where it is independent of the ambient ambiguity.
    WeightBound(String),
    NotOrthonormal,
}

impl From<AmbientError> for TableError {
    fn from(e: AmbientError) -> Self {
        TableError::Ambient(e)
    }
}

impl From<crate::jet::JetError> for TableError {
    fn from(e: crate::jet::JetError) -> Self {
        TableError::Ambient(e.into())
    }
}

impl From<crate::metric::MetricError> for TableError {
    fn from(e: crate::metric::MetricError) -> Self {
        TableError::Ambient(e.into())
    }
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableError::Ambient(e) => write!(f, "{}", e),
            TableError::BadKey(s) => write!(f, "malformed component key: {}", s),
            TableError::UnknownKey(s) => write!(f, "component not in table: {}", s),
            TableError::UpsilonNotZeroAtOrigin => write!(f, "conformal factor exponent must vanish at the origin"),
            TableError::BadContraction(s) => write!(f, "invalid contraction: {}", s),
            TableError::WeightBound(s) => write!(f, "weight bound violated: {}", s),
            TableError::NotOrthonormal => write!(f, "volume form needs a metric orthonormal at the origin"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AmbientIndex {
    Zero,
    /// Base direction, numbered from 1.
    Base(usize),
    Infinity,
}

impl AmbientIndex {
    pub fn strength(self) -> usize {
        match self {
            AmbientIndex::Zero => 0,
            AmbientIndex::Base(_) => 1,
            AmbientIndex::Infinity => 2,
        }
    }

    fn code(self, n: usize) -> usize {
        match self {
            AmbientIndex::Zero => 0,
            AmbientIndex::Base(i) => i,
            AmbientIndex::Infinity => n + 1,
        }
    }

    fn from_code(c: usize, n: usize) -> Self {
        if c == 0 {
            AmbientIndex::Zero
        } else if c == n + 1 {
            AmbientIndex::Infinity
        } else {
            AmbientIndex::Base(c)
        }
    }
}

impl fmt::Display for AmbientIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AmbientIndex::Zero => write!(f, "0"),
            AmbientIndex::Base(i) => write!(f, "{}", i),
            AmbientIndex::Infinity => write!(f, "inf"),
        }
    }
}

/// `IJKL` followed by the derivative indices `M_1..M_r`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComponentKey(pub Vec<AmbientIndex>);

impl ComponentKey {
    /// Comma separated, e.g. `inf,1,2,inf,inf`; the first four entries are `IJKL`.
    pub fn parse(s: &str, n: usize) -> Result<Self, TableError> {
        let mut out = Vec::new();
        for tok in s.split(',') {
            let tok = tok.trim();
            let ix = match tok {
                "0" => AmbientIndex::Zero,
                "inf" | "∞" => AmbientIndex::Infinity,
                _ => match tok.parse::<usize>() {
                    Ok(i) if (1..=n).contains(&i) => AmbientIndex::Base(i),
                    _ => return Err(TableError::BadKey(String::from(s))),
                },
            };
            out.push(ix);
        }
        if out.len() < 4 {
            return Err(TableError::BadKey(String::from(s)));
        }
        Ok(ComponentKey(out))
    }

    fn from_codes(codes: &[usize], n: usize) -> Self {
        ComponentKey(codes.iter().map(|&c| AmbientIndex::from_code(c, n)).collect())
    }

    fn codes(&self, n: usize) -> Vec<usize> {
        self.0.iter().map(|i| i.code(n)).collect()
    }

    pub fn derivatives(&self) -> usize {
        self.0.len().saturating_sub(4)
    }

    pub fn strength(&self) -> usize {
        self.0.iter().map(|i| i.strength()).sum()
    }

    /// Homogeneity degree in `t`.
    pub fn t_degree(&self) -> i64 {
        2 - self.0.iter().filter(|i| **i == AmbientIndex::Zero).count() as i64
    }
}

impl fmt::Display for ComponentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i)?;
        }
        Ok(())
    }
}

fn zeros(idx: &[usize]) -> usize {
    idx.iter().filter(|&&c| c == 0).count()
}

fn strength_of(idx: &[usize], n: usize) -> usize {
    idx.iter().map(|&c| AmbientIndex::from_code(c, n).strength()).sum()
}

/// Unweighted joint series `Σ a_m ρ^m` through `ρ^order`.
fn joint_series(e: &AmbientExpansion, order: u32) -> Result<RhoSeries, TableError> {
    let coeffs = e.taylor_coefficients(true);
    let need = order as usize + 1;
    if !e.is_polynomial() && coeffs.len() < need {
        return Err(AmbientError::OrderExhausted { needed: order, available: coeffs.len() as u32 - 1 }.into());
    }
    let take = coeffs.len().min(need);
    Ok(RhoSeries::from_taylor_weighted(e.base(), &coeffs[..take], order, 1)?)
}

/// `Γ̃^K_IJ` at `t = 1`; index codes `0, 1..n, n+1 = ∞`.
#[derive(Debug, Clone)]
pub struct AmbientChristoffel {
    n: usize,
    comps: Vec<Jet>,
}

impl AmbientChristoffel {
    fn from_series(s: &RhoSeries) -> Result<Self, TableError> {
        let g = &s.metric;
        let n = g.dim();
        let big = n + 2;
        let inf = n + 1;
        let vars = g.vars().clone();
        let order = s.order().saturating_sub(1);
        let lc = LeviCivita::new(g)?;
        let d1 = s.d_rho(g.g())?;
        let a = riemann::raise(g, &d1, 0);
        let half = Scalar::ratio(1, 2);
        let one = Jet::one(&vars, order);
        let rho = Jet::var(&vars, order, s.rho);
        let mut comps = vec![Jet::zero(&vars, order); big * big * big];
        let at = |k: usize, i: usize, j: usize| (k * big + i) * big + j;
        for j in 1..=n {
            comps[at(j, 0, j)] = one.clone();
            comps[at(j, j, 0)] = one.clone();
        }
        comps[at(inf, 0, inf)] = one.clone();
        comps[at(inf, inf, 0)] = one;
        for i in 1..=n {
            for j in 1..=n {
                comps[at(0, i, j)] = d1.get(&[i - 1, j - 1]).scale(&-half.clone()).truncate(order);
                comps[at(inf, i, j)] = (&(&rho * d1.get(&[i - 1, j - 1])) - g.lower(i - 1, j - 1)).truncate(order);
                for k in 1..=n {
                    comps[at(k, i, j)] = lc.gamma(k - 1, i - 1, j - 1).truncate(order);
                }
                // Γ̃^i_{j∞} = ½ g^{il} g'_lj
                let v = a.get(&[i - 1, j - 1]).scale(&half).truncate(order);
                comps[at(i, j, inf)] = v.clone();
                comps[at(i, inf, j)] = v;
            }
        }
        Ok(AmbientChristoffel { n, comps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: AmbientIndex, i: AmbientIndex, j: AmbientIndex) -> &Jet {
        let big = self.n + 2;
        &self.comps[(k.code(self.n) * big + i.code(self.n)) * big + j.code(self.n)]
    }

    /// Degree in `t` of `Γ̃^K_IJ`.
    pub fn t_degree(k: AmbientIndex, i: AmbientIndex, j: AmbientIndex) -> i64 {
        let up = if k == AmbientIndex::Zero { 1 } else { 0 };
        up - [i, j].iter().filter(|x| **x == AmbientIndex::Zero).count() as i64
    }

    /// Nonzero `(K, Γ̃^K_PB)` for each `(P, B)`.
    fn sparse(&self, order: u32) -> Vec<Vec<(usize, Jet)>> {
        let big = self.n + 2;
        let mut out = vec![Vec::new(); big * big];
        for p in 0..big {
            for b in 0..big {
                for k in 0..big {
                    let c = &self.comps[(k * big + p) * big + b];
                    if !c.is_zero() {
                        out[p * big + b].push((k, c.truncate(order)));
                    }
                }
            }
        }
        out
    }
}

/// Christoffel symbols of the ambient metric, as joint jets of the given order.
pub fn ambient_christoffel(e: &AmbientExpansion, order: u32) -> Result<AmbientChristoffel, TableError> {
    AmbientChristoffel::from_series(&joint_series(e, order + 1)?)
}

/// A component at `ρ = 0, t = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub value: Jet,
    pub strength: usize,
    pub t_degree: i64,
    /// For even `n`, strength above `n + 1`: the value depends on the chosen ambient metric.
    pub ambiguous: bool,
}

/// Components of `R̃_{IJKL,M_1..M_r}` for `r ≤ r_max`.
///
/// One representative per orbit of the pair symmetries is stored, with every
/// derivative list. Level `s` carries joint order `capacity - s`.
#[derive(Debug, Clone)]
pub struct CurvatureTable {
    n: usize,
    capacity: usize,
    vars: Arc<VarSet>,
    base_vars: Arc<VarSet>,
    rho: usize,
    /// `g^ij` at `ρ = 0`, in joint variables.
    inv_at_zero: Vec<Jet>,
    gamma: AmbientChristoffel,
    reps: Vec<[usize; 4]>,
    levels: Vec<Vec<Jet>>,
}

fn pair_index(a: usize, b: usize, big: usize) -> usize {
    a * big - a * (a + 1) / 2 + (b - a - 1)
}

impl CurvatureTable {
    /// Level 0 from the closed formulas, with enough order for `capacity`
    /// further derivatives.
    pub fn level_zero(e: &AmbientExpansion, capacity: usize) -> Result<Self, TableError> {
        let s = joint_series(e, capacity as u32 + 2)?;
        let g = &s.metric;
        let n = g.dim();
        let big = n + 2;
        let inf = n + 1;
        let vars = g.vars().clone();
        let order = capacity as u32;
        let gamma = AmbientChristoffel::from_series(&s)?;
        let lc = LeviCivita::new(g)?;
        let riem = lc.riemann()?;
        let d1 = s.d_rho(g.g())?;
        let d2 = s.d_rho(&d1)?;
        let dd1 = lc.cov_deriv(&d1)?;
        let a = riemann::raise(g, &d1, 0);
        let rho = Jet::var(&vars, order, s.rho);
        let half = Scalar::ratio(1, 2);
        let gl = |i: usize, j: usize| g.lower(i, j);
        let p = |i: usize, j: usize| d1.get(&[i, j]);

        let base4 = |i: usize, j: usize, k: usize, l: usize| -> Jet {
            let lin = &(&(gl(i, l) * p(j, k)) + &(gl(j, k) * p(i, l))) - &(&(gl(i, k) * p(j, l)) + &(gl(j, l) * p(i, k)));
            let quad = &(p(i, k) * p(j, l)) - &(p(i, l) * p(j, k));
            let v = &(riem.get(&[i, j, k, l]) + &lin.scale(&half)) + &(&rho * &quad).scale(&half);
            v.truncate(order)
        };
        let one_inf = |j: usize, k: usize, l: usize| -> Jet { (dd1.get(&[j, k, l]) - dd1.get(&[j, l, k])).scale(&half).truncate(order) };
        let two_inf = |j: usize, k: usize| -> Jet {
            let mut q = Jet::zero(&vars, order);
            for m in 0..n {
                q = &q + &(p(j, m) * a.get(&[m, k]));
            }
            (d2.get(&[j, k]) - &q.scale(&half)).scale(&half).truncate(order)
        };
        // `R̃_abcd` from the blocks, using the curvature symmetries
        let value = |idx: [usize; 4]| -> Jet {
            let [mut a, mut b, mut c, mut d] = idx;
            if a == 0 || b == 0 || c == 0 || d == 0 || a == b || c == d {
                return Jet::zero(&vars, order);
            }
            let mut neg = false;
            if b == inf {
                core::mem::swap(&mut a, &mut b);
                neg = !neg;
            }
            if d == inf {
                core::mem::swap(&mut c, &mut d);
                neg = !neg;
            }
            if a != inf && c == inf {
                core::mem::swap(&mut a, &mut c);
                core::mem::swap(&mut b, &mut d);
            }
            let v = match (a == inf, c == inf) {
                (false, false) => base4(a - 1, b - 1, c - 1, d - 1),
                (true, false) => one_inf(b - 1, c - 1, d - 1),
                // R̃_∞b∞d = -R̃_∞bd∞
                _ => -two_inf(b - 1, d - 1),
            };
            if neg {
                -v
            } else {
                v
            }
        };

        let mut pairs = Vec::new();
        for x in 0..big {
            for y in x + 1..big {
                pairs.push((x, y));
            }
        }
        let mut reps = Vec::new();
        for (u, &(a, b)) in pairs.iter().enumerate() {
            for &(c, d) in &pairs[u..] {
                reps.push([a, b, c, d]);
            }
        }
        let level0: Vec<Jet> = reps.iter().map(|r| value(*r)).collect();
        let inv_at_zero = (0..n * n).map(|k| g.upper(k / n, k % n).at_zero(s.rho).truncate(order)).collect();
        Ok(CurvatureTable { n, capacity, vars, base_vars: s.base_vars.clone(), rho: s.rho, inv_at_zero, gamma, reps, levels: vec![level0] })
    }

    /// Table through `r_max` derivatives whose top level keeps joint order `spare`.
    pub fn build(e: &AmbientExpansion, r_max: usize, spare: usize) -> Result<Self, TableError> {
        let mut t = Self::level_zero(e, r_max + spare)?;
        for _ in 0..r_max {
            t.extend()?;
        }
        Ok(t)
    }

    /// Table for `g` from its continued ambient expansion (ambiguity zero for even `n`).
    pub fn for_metric(g: &MetricJet, r_max: usize, spare: usize) -> Result<Self, TableError> {
        let e = expand_ambient_continued(g, r_max + spare + 2, None)?;
        Self::build(&e, r_max, spare)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> usize {
        self.levels.len() - 1
    }

    /// Joint variables `(base vars…, rho)`.
    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    pub fn christoffel(&self) -> &AmbientChristoffel {
        &self.gamma
    }

    fn level_order(&self, s: usize) -> u32 {
        (self.capacity - s) as u32
    }

    /// Storage slot and sign of a full index list.
    fn locate(&self, idx: &[usize]) -> Option<(bool, usize)> {
        let big = self.n + 2;
        let (mut a, mut b, mut c, mut d) = (idx[0], idx[1], idx[2], idx[3]);
        if a == b || c == d {
            return None;
        }
        let mut neg = false;
        if a > b {
            core::mem::swap(&mut a, &mut b);
            neg = !neg;
        }
        if c > d {
            core::mem::swap(&mut c, &mut d);
            neg = !neg;
        }
        let mut p1 = pair_index(a, b, big);
        let mut p2 = pair_index(c, d, big);
        if p1 > p2 {
            core::mem::swap(&mut p1, &mut p2);
        }
        let np = big * (big - 1) / 2;
        let pp = p1 * np - p1 * p1.saturating_sub(1) / 2 + (p2 - p1);
        let mut m = 0;
        for &x in &idx[4..] {
            m = m * big + x;
        }
        Some((neg, pp * big.pow((idx.len() - 4) as u32) + m))
    }

    fn value(&self, idx: &[usize]) -> Option<(bool, &Jet)> {
        let s = idx.len() - 4;
        let (neg, pos) = self.locate(idx)?;
        Some((neg, &self.levels[s][pos]))
    }

    /// Signed copy of a stored component, truncated to `order`.
    fn get(&self, idx: &[usize], order: u32) -> Jet {
        match self.value(idx) {
            Some((neg, v)) => {
                let v = v.truncate(order);
                if neg {
                    -v
                } else {
                    v
                }
            }
            None => Jet::zero(&self.vars, order),
        }
    }

    /// One more ambient covariant derivative of the top level.
    pub fn extend(&mut self) -> Result<(), TableError> {
        let s = self.levels.len() - 1;
        if s >= self.capacity {
            return Err(AmbientError::OrderExhausted { needed: s as u32 + 1, available: self.capacity as u32 }.into());
        }
        let big = self.n + 2;
        let inf = self.n + 1;
        let order = self.level_order(s + 1);
        let gamma = self.gamma.sparse(order);
        let count = big.pow(s as u32);
        let mut next = Vec::with_capacity(self.reps.len() * count * big);
        let mut idx = vec![0usize; 5 + s];
        for (u, rep) in self.reps.iter().enumerate() {
            idx[..4].copy_from_slice(rep);
            for m in 0..count {
                let mut r = m;
                for q in (0..s).rev() {
                    idx[4 + q] = r % big;
                    r /= big;
                }
                let here = &self.levels[s][u * count + m];
                let deg = Scalar::from_int(2 - zeros(&idx[..4 + s]) as i64);
                for p in 0..big {
                    let mut v = if here.is_zero() {
                        Jet::zero(&self.vars, order)
                    } else if p == 0 {
                        here.scale(&deg).truncate(order)
                    } else if p == inf {
                        here.diff(self.rho)?.truncate(order)
                    } else {
                        here.diff(p - 1)?.truncate(order)
                    };
                    for slot in 0..4 + s {
                        let b = idx[slot];
                        for (k, c) in &gamma[p * big + b] {
                            idx[slot] = *k;
                            if let Some((neg, t)) = self.value(&idx[..4 + s]) {
                                if !t.is_zero() {
                                    let prod = c * &t.truncate(order);
                                    v = if neg { &v + &prod } else { &v - &prod };
                                }
                            }
                            idx[slot] = b;
                        }
                    }
                    next.push(v);
                }
            }
        }
        self.levels.push(next);
        Ok(())
    }

    fn check_key(&self, key: &ComponentKey) -> Result<Vec<usize>, TableError> {
        if key.0.len() < 4 || key.derivatives() > self.r_max() {
            return Err(TableError::UnknownKey(key.to_string()));
        }
        if key.0.iter().any(|i| matches!(i, AmbientIndex::Base(k) if *k == 0 || *k > self.n)) {
            return Err(TableError::BadKey(key.to_string()));
        }
        Ok(key.codes(self.n))
    }

    /// The component as a joint `(x, ρ)` jet at `t = 1`.
    pub fn joint_component(&self, key: &ComponentKey) -> Result<Jet, TableError> {
        let idx = self.check_key(key)?;
        Ok(self.get(&idx, self.level_order(key.derivatives())))
    }

    /// The component at `ρ = 0, t = 1`, as a jet in the base variables.
    pub fn component(&self, key: &ComponentKey) -> Result<Component, TableError> {
        let j = self.joint_component(key)?;
        let map: Vec<Option<usize>> = (0..self.vars.len()).map(|i| if i == self.rho { None } else { Some(i) }).collect();
        let value = j.at_zero(self.rho).remap(&self.base_vars, &map, j.order())?;
        let strength = key.strength();
        Ok(Component { value, strength, t_degree: key.t_degree(), ambiguous: self.n.is_multiple_of(2) && strength > self.n + 1 })
    }

    /// Value of a component at the base point.
    pub fn base_point_value(&self, key: &ComponentKey) -> Result<Scalar, TableError> {
        let idx = self.check_key(key)?;
        Ok(self.point(&idx))
    }

    fn point(&self, idx: &[usize]) -> Scalar {
        match self.value(idx) {
            Some((neg, v)) => {
                let c = v.constant_term();
                if neg {
                    -c
                } else {
                    c
                }
            }
            None => Scalar::zero(),
        }
    }

    /// Adds `delta` (joint variables) to the stored representative of `key`;
    /// all entries related to it by symmetry change with it.
    pub fn perturb(&mut self, key: &ComponentKey, delta: &Jet) -> Result<(), TableError> {
        let idx = self.check_key(key)?;
        let s = key.derivatives();
        let order = self.level_order(s);
        let (neg, pos) = self.locate(&idx).ok_or_else(|| TableError::BadKey(key.to_string()))?;
        let d = delta.truncate(order);
        let slot = &mut self.levels[s][pos];
        *slot = if neg { &*slot - &d } else { &*slot + &d };
        Ok(())
    }

    /// Every stored key of a level, one per symmetry orbit of `IJKL`.
    pub fn stored_keys(&self, s: usize) -> Vec<ComponentKey> {
        let big = self.n + 2;
        let count = big.pow(s as u32);
        let mut out = Vec::with_capacity(self.reps.len() * count);
        for rep in &self.reps {
            for m in 0..count {
                let mut idx = rep.to_vec();
                idx.extend(digits(m, s, big));
                out.push(ComponentKey::from_codes(&idx, self.n));
            }
        }
        out
    }
}

fn digits(mut m: usize, len: usize, big: usize) -> Vec<usize> {
    let mut d = vec![0; len];
    for q in (0..len).rev() {
        d[q] = m % big;
        m /= big;
    }
    d
}

/// Level 0 only, with order reserved for `capacity` derivatives.
pub fn ambient_curv0(e: &AmbientExpansion, capacity: usize) -> Result<CurvatureTable, TableError> {
    CurvatureTable::level_zero(e, capacity)
}

/// Adds one derivative level.
pub fn ambient_cov_deriv(mut t: CurvatureTable) -> Result<CurvatureTable, TableError> {
    t.extend()?;
    Ok(t)
}

pub fn conformal_component(t: &CurvatureTable, key: &ComponentKey) -> Result<Component, TableError> {
    t.component(key)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub checked: usize,
    /// Offending keys, capped.
    pub failures: Vec<String>,
}

impl IdentityCheck {
    fn new(name: &'static str) -> Self {
        IdentityCheck { name, checked: 0, failures: Vec::new() }
    }

    fn record(&mut self, ok: bool, idx: &[usize], n: usize) {
        self.checked += 1;
        if !ok && self.failures.len() < 32 {
            self.failures.push(ComponentKey::from_codes(idx, n).to_string());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }

    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks the first Bianchi identity, the two contraction identities for
/// the dilation field `T = t∂_t`, and the ambient trace identity at `ρ = 0`
/// (for even `n` only where `‖J L M…‖ ≤ n - 1`).
pub fn verify_identities(t: &CurvatureTable) -> IdentityReport {
    let n = t.n;
    let big = n + 2;
    let mut bianchi = IdentityCheck::new("bianchi");
    let mut first = IdentityCheck::new("t-contraction");
    let mut second = IdentityCheck::new("t-insertion");
    let mut trace = IdentityCheck::new("trace");
    for r in 0..=t.r_max() {
        let order = t.level_order(r);
        let count = big.pow(r as u32);
        for m in 0..count {
            let ms = digits(m, r, big);
            let with = |head: &[usize]| -> Vec<usize> {
                let mut v = head.to_vec();
                v.extend_from_slice(&ms);
                v
            };
            for a in 0..big {
                for b in 0..big {
                    for c in b + 1..big {
                        for d in c + 1..big {
                            let x = with(&[a, b, c, d]);
                            let sum = &(&t.get(&x, order) + &t.get(&with(&[a, c, d, b]), order)) + &t.get(&with(&[a, d, b, c]), order);
                            bianchi.record(sum.is_zero(), &x, n);
                        }
                    }
                }
            }
            // T^L R̃_{IJKL,M…} = -Σ_s R̃_{IJK M_s, M…without M_s}
            for a in 0..big {
                for b in 0..big {
                    for c in 0..big {
                        let x = with(&[a, b, c, 0]);
                        let mut v = t.get(&x, order);
                        for q in 0..r {
                            let mut y = vec![a, b, c, ms[q]];
                            y.extend(ms.iter().enumerate().filter(|(k, _)| *k != q).map(|(_, v)| *v));
                            v = &v + &t.get(&y, order);
                        }
                        first.record(v.is_zero(), &x, n);
                    }
                }
            }
            if r < t.r_max() {
                let low = t.level_order(r + 1);
                for rep in &t.reps {
                    for s in 0..=r {
                        let mut x = rep.to_vec();
                        x.extend_from_slice(&ms[..s]);
                        x.push(0);
                        x.extend_from_slice(&ms[s..]);
                        let mut v = &t.get(&x, low) + &t.get(&with(rep), low).scale(&Scalar::from_int(s as i64 + 2));
                        for q in s..r {
                            let mut y = rep.to_vec();
                            y.extend_from_slice(&ms[..s]);
                            y.push(ms[q]);
                            y.extend(ms[s..].iter().enumerate().filter(|(k, _)| *k + s != q).map(|(_, v)| *v));
                            v = &v + &t.get(&y, low);
                        }
                        second.record(v.is_zero(), &x, n);
                    }
                }
            }
            let rest = strength_of(&ms, n);
            for j in 0..big {
                for l in 0..big {
                    if n.is_multiple_of(2) && rest + strength_of(&[j, l], n) > n - 1 {
                        continue;
                    }
                    let mut v = &t.get(&with(&[0, j, big - 1, l]), order) + &t.get(&with(&[big - 1, j, 0, l]), order);
                    for i in 1..=n {
                        for k in 1..=n {
                            let w = &t.inv_at_zero[(i - 1) * n + k - 1];
                            if !w.is_zero() {
                                v = &v + &(w * &t.get(&with(&[i, j, k, l]), order));
                            }
                        }
                    }
                    let ok = v.at_zero(t.rho).is_zero();
                    trace.record(ok, &with(&[0, j, big - 1, l]), n);
                }
            }
        }
    }
    IdentityReport { checks: vec![bianchi, first, second, trace] }
}

/// `p^A_I` acting on ambient indices at the base point, for `ĝ = e^{2Υ} g`
/// with `Υ(0) = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PMatrix {
    n: usize,
    entries: Vec<Scalar>,
}

impl PMatrix {
    /// From `Υ_i = ∂_iΥ(0)` and `g^ij(0)`.
    pub fn new(upsilon: &[Scalar], ginv0: &[Scalar]) -> Self {
        let n = upsilon.len();
        let big = n + 2;
        let inf = n + 1;
        let up: Vec<Scalar> = (0..n).map(|a| (0..n).fold(Scalar::zero(), |acc, b| acc + &ginv0[a * n + b] * &upsilon[b])).collect();
        let sq = (0..n).fold(Scalar::zero(), |acc, k| acc + &upsilon[k] * &up[k]);
        let mut e = vec![Scalar::zero(); big * big];
        e[0] = Scalar::one();
        e[inf * big + inf] = Scalar::one();
        e[inf] = -(&sq * &Scalar::ratio(1, 2));
        for i in 1..=n {
            e[i] = upsilon[i - 1].clone();
            e[i * big + i] = Scalar::one();
            e[i * big + inf] = -up[i - 1].clone();
        }
        PMatrix { n, entries: e }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `p^A_I`.
    pub fn get(&self, a: AmbientIndex, i: AmbientIndex) -> &Scalar {
        &self.entries[a.code(self.n) * (self.n + 2) + i.code(self.n)]
    }

    fn at(&self, a: usize, i: usize) -> &Scalar {
        &self.entries[a * (self.n + 2) + i]
    }

    /// `pᵀ h̃ p = h̃` for the ambient metric `h̃` at the base point built from `g(0)`.
    pub fn is_orthogonal(&self, g0: &[Scalar]) -> bool {
        let n = self.n;
        let big = n + 2;
        let h = |a: usize, b: usize| -> Scalar {
            if (a == 0 && b == n + 1) || (a == n + 1 && b == 0) {
                Scalar::one()
            } else if (1..=n).contains(&a) && (1..=n).contains(&b) {
                g0[(a - 1) * n + b - 1].clone()
            } else {
                Scalar::zero()
            }
        };
        for i in 0..big {
            for j in 0..big {
                let mut v = Scalar::zero();
                for a in 0..big {
                    for b in 0..big {
                        let x = h(a, b);
                        if !x.is_zero() {
                            v += &(&(self.at(a, i) * &x) * self.at(b, j));
                        }
                    }
                }
                if v != h(i, j) {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformReport {
    pub p: PMatrix,
    pub compared: usize,
    /// Components left out for even `n` because their strength exceeds `n + 1`.
    pub skipped: usize,
    pub mismatches: Vec<String>,
}

impl TransformReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// All components of level `s` at the base point, densely indexed.
fn dense_level(t: &CurvatureTable, s: usize) -> Vec<Scalar> {
    let big = t.n + 2;
    let len = 4 + s;
    (0..big.pow(len as u32)).map(|m| t.point(&digits(m, len, big))).collect()
}

/// Applies `p` in every slot: `Σ R_{AB…} p^A_I p^B_J …`.
fn transform_dense(mut v: Vec<Scalar>, len: usize, p: &PMatrix) -> Vec<Scalar> {
    let big = p.n + 2;
    for slot in 0..len {
        let stride = big.pow((len - 1 - slot) as u32);
        let mut out = vec![Scalar::zero(); v.len()];
        for (m, o) in out.iter_mut().enumerate() {
            let i = (m / stride) % big;
            let base = m - i * stride;
            let mut acc = Scalar::zero();
            // p^A_I vanishes unless A precedes I
            for a in 0..=i {
                let c = p.at(a, i);
                let x = &v[base + a * stride];
                if !c.is_zero() && !x.is_zero() {
                    acc += &(x * c);
                }
            }
            *o = acc;
        }
        v = out;
    }
    v
}

/// Compares the tables of `g` and `e^{2Υ} g` at the base point through
/// `r_max` derivatives under the `p`-matrix law.
pub fn conformal_transform(g: &MetricJet, upsilon: &Jet, r_max: usize) -> Result<TransformReport, TableError> {
    if !upsilon.constant_term().is_zero() {
        return Err(TableError::UpsilonNotZeroAtOrigin);
    }
    let n = g.dim();
    let big = n + 2;
    let factor = upsilon.scale(&Scalar::from_int(2)).exp0()?;
    let gh = g.conformal(&factor)?;
    let t = CurvatureTable::for_metric(g, r_max, 0)?;
    let th = CurvatureTable::for_metric(&gh, r_max, 0)?;
    let du: Vec<Scalar> = (0..n).map(|i| upsilon.diff(i).map(|d| d.constant_term())).collect::<Result<_, _>>()?;
    let ginv0: Vec<Scalar> = (0..n * n).map(|k| g.upper(k / n, k % n).constant_term()).collect();
    let p = PMatrix::new(&du, &ginv0);
    let mut report = TransformReport { p: p.clone(), compared: 0, skipped: 0, mismatches: Vec::new() };
    for s in 0..=r_max {
        let len = 4 + s;
        let moved = transform_dense(dense_level(&t, s), len, &p);
        for (m, want) in moved.iter().enumerate() {
            let idx = digits(m, len, big);
            if n.is_multiple_of(2) && strength_of(&idx, n) > n + 1 {
                report.skipped += 1;
                continue;
            }
            report.compared += 1;
            if th.point(&idx) != *want && report.mismatches.len() < 32 {
                report.mismatches.push(ComponentKey::from_codes(&idx, n).to_string());
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    /// `∇̃^r R̃`, with `4 + r` slots.
    Curvature(usize),
    /// Ambient volume form, `n + 2` slots.
    Volume,
    /// `T ⌟` volume form, `n + 1` slots.
    VolumeT,
}

impl Factor {
    pub fn slots(&self, n: usize) -> usize {
        match self {
            Factor::Curvature(r) => 4 + r,
            Factor::Volume => n + 2,
            Factor::VolumeT => n + 1,
        }
    }
}

/// Complete contraction: factors in order, slots numbered consecutively
/// across factors, and a perfect pairing of the slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contraction {
    pub factors: Vec<Factor>,
    pub pairs: Vec<(usize, usize)>,
}

impl Contraction {
    /// `‖∇̃^r R̃‖²`.
    pub fn norm_squared(r: usize) -> Self {
        let k = 4 + r;
        Contraction { factors: vec![Factor::Curvature(r); 2], pairs: (0..k).map(|i| (i, i + k)).collect() }
    }

    /// `-w = 2L + Σ r_i`, less one with `T ⌟` volume form.
    pub fn minus_weight(&self) -> i64 {
        let mut w = 0;
        for f in &self.factors {
            match f {
                Factor::Curvature(r) => w += 2 + *r as i64,
                Factor::VolumeT => w -= 1,
                Factor::Volume => {}
            }
        }
        w
    }

    fn validate(&self, n: usize) -> Result<(), TableError> {
        let total: usize = self.factors.iter().map(|f| f.slots(n)).sum();
        let vols = self.factors.iter().filter(|f| !matches!(f, Factor::Curvature(_))).count();
        if vols > 1 {
            return Err(TableError::BadContraction(String::from("at most one volume factor")));
        }
        if !total.is_multiple_of(2) {
            return Err(TableError::BadContraction(format!("odd number of slots ({})", total)));
        }
        let mut seen = vec![false; total];
        for &(a, b) in &self.pairs {
            for x in [a, b] {
                if x >= total || seen[x] {
                    return Err(TableError::BadContraction(format!("slot {} out of range or paired twice", x)));
                }
                seen[x] = true;
            }
        }
        if let Some(x) = seen.iter().position(|s| !s) {
            return Err(TableError::BadContraction(format!("slot {} unpaired", x)));
        }
        if n.is_multiple_of(2) {
            let w = self.minus_weight();
            let curv = self.factors.len() - vols;
            if vols == 0 && (curv < 2 || w > n as i64 + 2) {
                return Err(TableError::WeightBound(format!("need L >= 2 and -w <= {}, got L = {}, -w = {}", n + 2, curv, w)));
            }
            if vols == 1 && w > 2 * n as i64 - 2 {
                return Err(TableError::WeightBound(format!("need -w <= {}, got {}", 2 * n - 2, w)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantValue {
    pub value: Scalar,
    /// The weight `w` (negative).
    pub weight: i64,
}

pub(crate) fn permutation_sign(codes: &[usize]) -> i32 {
    let mut seen = vec![false; codes.len()];
    for &c in codes {
        if c >= codes.len() || seen[c] {
            return 0;
        }
        seen[c] = true;
    }
    let mut sign = 1;
    let mut v = codes.to_vec();
    for i in 0..v.len() {
        while v[i] != i {
            let j = v[i];
            v.swap(i, j);
            sign = -sign;
        }
    }
    sign
}

struct Evaluator<'a> {
    t: &'a CurvatureTable,
    factors: Vec<(Factor, usize)>,
    pairs: Vec<(usize, usize)>,
    done_after: Vec<Vec<usize>>,
    inverse: Vec<(usize, usize, Scalar)>,
    orientation: i32,
    assign: Vec<usize>,
}

impl Evaluator<'_> {
    fn factor_value(&self, f: usize) -> Scalar {
        let (kind, start) = self.factors[f];
        let n = self.t.n;
        let slots = &self.assign[start..start + kind.slots(n)];
        match kind {
            Factor::Curvature(_) => self.t.point(slots),
            Factor::Volume => Scalar::from_int((permutation_sign(slots) * self.orientation) as i64),
            Factor::VolumeT => {
                let mut c = vec![0];
                c.extend_from_slice(slots);
                Scalar::from_int((permutation_sign(&c) * self.orientation) as i64)
            }
        }
    }

    fn run(&mut self, k: usize, acc: &Scalar) -> Scalar {
        if k == self.pairs.len() {
            return acc.clone();
        }
        let (x, y) = self.pairs[k];
        let mut total = Scalar::zero();
        for q in 0..self.inverse.len() {
            let (a, b) = (self.inverse[q].0, self.inverse[q].1);
            self.assign[x] = a;
            self.assign[y] = b;
            let mut v = acc * &self.inverse[q].2;
            for f in self.done_after[k].clone() {
                if v.is_zero() {
                    break;
                }
                v = &v * &self.factor_value(f);
            }
            if !v.is_zero() {
                total += &self.run(k + 1, &v);
            }
        }
        total
    }
}

/// Evaluates a complete contraction at the base point using `t`.
pub fn eval_invariant_with(c: &Contraction, t: &CurvatureTable, g: &MetricJet, orientation: i32) -> Result<InvariantValue, TableError> {
    let n = t.n;
    c.validate(n)?;
    let need = c.factors.iter().map(|f| if let Factor::Curvature(r) = f { *r } else { 0 }).max().unwrap_or(0);
    if need > t.r_max() {
        return Err(TableError::UnknownKey(format!("{} derivatives", need)));
    }
    let vol = c.factors.iter().any(|f| !matches!(f, Factor::Curvature(_)));
    if vol {
        if orientation != 1 && orientation != -1 {
            return Err(TableError::BadContraction(String::from("orientation must be +1 or -1")));
        }
        if !g.is_orthonormal_at_origin() {
            return Err(TableError::NotOrthonormal);
        }
    }
    let mut factors = Vec::new();
    let mut owner = Vec::new();
    let mut start = 0;
    for (k, f) in c.factors.iter().enumerate() {
        factors.push((*f, start));
        owner.extend(std::iter::repeat_n(k, f.slots(n)));
        start += f.slots(n);
    }
    let mut pairs = c.pairs.clone();
    pairs.sort_by_key(|&(a, b)| owner[a].max(owner[b]));
    let mut last = vec![0usize; factors.len()];
    for (k, &(a, b)) in pairs.iter().enumerate() {
        last[owner[a]] = k;
        last[owner[b]] = k;
    }
    let mut done_after = vec![Vec::new(); pairs.len()];
    for (f, &k) in last.iter().enumerate() {
        done_after[k].push(f);
    }
    let inf = n + 1;
    let mut inverse = vec![(0, inf, Scalar::one()), (inf, 0, Scalar::one())];
    for i in 0..n {
        for j in 0..n {
            let v = g.upper(i, j).constant_term();
            if !v.is_zero() {
                inverse.push((i + 1, j + 1, v));
            }
        }
    }
    let mut ev = Evaluator { t, factors, pairs, done_after, inverse, orientation, assign: vec![0; start] };
    let value = ev.run(0, &Scalar::one());
    Ok(InvariantValue { value, weight: -c.minus_weight() })
}

/// Evaluates a complete contraction for `g` at the origin.
pub fn eval_invariant(c: &Contraction, g: &MetricJet, orientation: i32) -> Result<InvariantValue, TableError> {
    c.validate(g.dim())?;
    let r = c.factors.iter().map(|f| if let Factor::Curvature(r) = f { *r } else { 0 }).max().unwrap_or(0);
    let t = CurvatureTable::for_metric(g, r, 0)?;
    eval_invariant_with(c, &t, g, orientation)
}
