//! Truncated multivariate power series with exact coefficients.
//!
//! Monomials are packed into a `u64`, one byte per variable, with variable 0
//! in the most significant byte so that integer order equals lexicographic
//! order of exponent vectors. Each variable carries a positive weight; the
//! truncation order bounds the weighted degree.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;

pub const MAX_VARS: usize = 8;

/// Packed exponent vector.
pub type Mono = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JetError {
    VarMismatch,
    UnknownVar(String),
    NotUnit,
    NonzeroConstant,
    NotOne,
    OrderExhausted,
    TooManyVars,
}

impl fmt::Display for JetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetError::VarMismatch => write!(f, "jets are over different variable sets"),
            JetError::UnknownVar(v) => write!(f, "unknown variable `{}`", v),
            JetError::NotUnit => write!(f, "constant term is zero"),
            JetError::NonzeroConstant => write!(f, "constant term must vanish"),
            JetError::NotOne => write!(f, "constant term must be 1"),
            JetError::OrderExhausted => write!(f, "truncation order exhausted"),
            JetError::TooManyVars => write!(f, "at most {} variables are supported", MAX_VARS),
        }
    }
}

/// Ordered variable names with truncation weights.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarSet {
    names: Vec<String>,
    weights: Vec<u32>,
}

impl VarSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Arc<VarSet>, JetError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let weights = vec![1; names.len()];
        Self::weighted(names, weights)
    }

    pub fn weighted(names: Vec<String>, weights: Vec<u32>) -> Result<Arc<VarSet>, JetError> {
        if names.len() > MAX_VARS || names.len() != weights.len() {
            return Err(JetError::TooManyVars);
        }
        assert!(weights.iter().all(|w| *w > 0), "weights must be positive");
        Ok(Arc::new(VarSet { names, weights }))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> u32 {
        self.weights[i]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    #[inline]
    pub fn degree(&self, m: Mono) -> u32 {
        let mut d = 0;
        for (i, w) in self.weights.iter().enumerate() {
            d += mono_exp(m, i) * w;
        }
        d
    }

    fn total_degree(&self, m: Mono) -> u32 {
        (0..self.len()).map(|i| mono_exp(m, i)).sum()
    }
}

#[inline]
fn shift(i: usize) -> u32 {
    8 * (7 - i as u32)
}

#[inline]
pub fn mono_exp(m: Mono, i: usize) -> u32 {
    ((m >> shift(i)) & 0xff) as u32
}

#[inline]
pub fn mono_unit(i: usize) -> Mono {
    1u64 << shift(i)
}

pub fn mono_from_exps(exps: &[u32]) -> Mono {
    assert!(exps.len() <= MAX_VARS);
    exps.iter().enumerate().fold(0, |m, (i, e)| {
        assert!(*e < 256, "exponent too large");
        m | ((*e as u64) << shift(i))
    })
}

pub fn mono_exps(m: Mono, nvars: usize) -> Vec<u32> {
    (0..nvars).map(|i| mono_exp(m, i)).collect()
}

/// Result of [`Jet::vanishing_order`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Vanishing {
    Exactly(u32),
    /// No nonzero coefficient below the truncation order.
    AtLeastTruncation,
}

/// A truncated power series: all monomials of weighted degree ≤ `order`
/// are exact, everything above is unknown.
#[derive(Clone)]
pub struct Jet {
    vars: Arc<VarSet>,
    order: u32,
    terms: Vec<(Mono, Scalar)>,
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.same_vars(other) && self.terms == other.terms
    }
}

impl Eq for Jet {}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0 + O({})", self.order);
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{:?}", c)?;
            for i in 0..self.vars.len() {
                let e = mono_exp(*m, i);
                if e > 0 {
                    write!(f, "*{}", self.vars.names[i])?;
                    if e > 1 {
                        write!(f, "^{}", e)?;
                    }
                }
            }
        }
        write!(f, " + O({})", self.order)
    }
}

/// Open-addressing accumulator for monomial/coefficient pairs.
struct Acc {
    keys: Vec<Mono>,
    vals: Vec<Scalar>,
    len: usize,
    shift: u32,
}

const EMPTY: Mono = u64::MAX;

impl Acc {
    fn with_capacity(n: usize) -> Acc {
        let cap = (2 * n.max(4)).next_power_of_two();
        Acc { keys: vec![EMPTY; cap], vals: vec![Scalar::zero(); cap], len: 0, shift: 64 - cap.trailing_zeros() }
    }

    #[inline]
    fn home(&self, key: Mono) -> usize {
        (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> self.shift) as usize
    }

    fn grow(&mut self) {
        let cap = self.keys.len() * 2;
        let keys = core::mem::replace(&mut self.keys, vec![EMPTY; cap]);
        let vals = core::mem::replace(&mut self.vals, vec![Scalar::zero(); cap]);
        self.shift -= 1;
        let mask = cap - 1;
        for (k, v) in keys.into_iter().zip(vals) {
            if k == EMPTY {
                continue;
            }
            let mut h = self.home(k);
            while self.keys[h] != EMPTY {
                h = (h + 1) & mask;
            }
            self.keys[h] = k;
            self.vals[h] = v;
        }
    }

    #[inline]
    fn slot(&mut self, key: Mono) -> usize {
        let mask = self.keys.len() - 1;
        let mut h = self.home(key);
        loop {
            let k = self.keys[h];
            if k == key {
                return h;
            }
            if k == EMPTY {
                if 2 * (self.len + 1) > self.keys.len() {
                    self.grow();
                    return self.slot(key);
                }
                self.keys[h] = key;
                self.len += 1;
                return h;
            }
            h = (h + 1) & mask;
        }
    }

    #[inline]
    fn add(&mut self, key: Mono, v: Scalar) {
        let h = self.slot(key);
        self.vals[h] += v;
    }

    fn finish(self) -> Vec<(Mono, Scalar)> {
        let mut out: Vec<(Mono, Scalar)> = self.keys.into_iter().zip(self.vals).filter(|(k, v)| *k != EMPTY && !v.is_zero()).collect();
        out.sort_unstable_by_key(|(k, _)| *k);
        out
    }
}

fn binom_u64(n: u64, k: u64) -> u64 {
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

impl Jet {
    pub fn zero(vars: &Arc<VarSet>, order: u32) -> Jet {
        Jet { vars: vars.clone(), order, terms: Vec::new() }
    }

    pub fn constant(vars: &Arc<VarSet>, order: u32, c: Scalar) -> Jet {
        let terms = if c.is_zero() { Vec::new() } else { vec![(0, c)] };
        Jet { vars: vars.clone(), order, terms }
    }

    pub fn one(vars: &Arc<VarSet>, order: u32) -> Jet {
        Self::constant(vars, order, Scalar::one())
    }

    /// The coordinate function of variable `i`.
    pub fn var(vars: &Arc<VarSet>, order: u32, i: usize) -> Jet {
        Self::monomial(vars, order, mono_unit(i), Scalar::one())
    }

    pub fn monomial(vars: &Arc<VarSet>, order: u32, m: Mono, c: Scalar) -> Jet {
        let terms = if c.is_zero() || vars.degree(m) > order { Vec::new() } else { vec![(m, c)] };
        Jet { vars: vars.clone(), order, terms }
    }

    /// Builds a jet from arbitrary terms: merges duplicates, drops zeros and
    /// anything above the truncation order.
    pub fn from_terms(vars: &Arc<VarSet>, order: u32, terms: impl IntoIterator<Item = (Mono, Scalar)>) -> Jet {
        let mut t: Vec<(Mono, Scalar)> = terms.into_iter().filter(|(m, _)| vars.degree(*m) <= order).collect();
        t.sort_by_key(|(m, _)| *m);
        let mut out: Vec<(Mono, Scalar)> = Vec::with_capacity(t.len());
        for (m, c) in t {
            match out.last_mut() {
                Some((lm, lc)) if *lm == m => *lc += c,
                _ => out.push((m, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        Jet { vars: vars.clone(), order, terms: out }
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn terms(&self) -> &[(Mono, Scalar)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn same_vars(&self, other: &Jet) -> bool {
        Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars
    }

    pub fn coeff(&self, m: Mono) -> Scalar {
        match self.terms.binary_search_by_key(&m, |(k, _)| *k) {
            Ok(i) => self.terms[i].1.clone(),
            Err(_) => Scalar::zero(),
        }
    }

    pub fn constant_term(&self) -> Scalar {
        self.coeff(0)
    }

    /// Lowers the truncation order (never raises it).
    pub fn truncate(&self, order: u32) -> Jet {
        let order = order.min(self.order);
        let terms = self.terms.iter().filter(|(m, _)| self.vars.degree(*m) <= order).cloned().collect();
        Jet { vars: self.vars.clone(), order, terms }
    }

    /// Claims a higher order; only sound when the jet is known to be exact
    /// (e.g. a polynomial identity).
    pub fn with_order_unchecked(&self, order: u32) -> Jet {
        let mut j = self.truncate(order.min(self.order));
        j.order = order;
        j
    }

    fn check(&self, other: &Jet) -> Result<(), JetError> {
        if self.same_vars(other) {
            Ok(())
        } else {
            Err(JetError::VarMismatch)
        }
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        Ok(self.combine(other, false))
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        Ok(self.combine(other, true))
    }

    fn combine(&self, other: &Jet, negate: bool) -> Jet {
        let order = self.order.min(other.order);
        let keep_a = self.order == order;
        let keep_b = other.order == order;
        let vs = &self.vars;
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let a = &self.terms;
        let b = &other.terms;
        let push = |out: &mut Vec<(Mono, Scalar)>, m: Mono, c: Scalar, exact: bool| {
            if !c.is_zero() && (exact || vs.degree(m) <= order) {
                out.push((m, c));
            }
        };
        while i < a.len() || j < b.len() {
            if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
                push(&mut out, a[i].0, a[i].1.clone(), keep_a);
                i += 1;
            } else if i >= a.len() || b[j].0 < a[i].0 {
                let c = if negate { -&b[j].1 } else { b[j].1.clone() };
                push(&mut out, b[j].0, c, keep_b);
                j += 1;
            } else {
                let c = if negate { &a[i].1 - &b[j].1 } else { &a[i].1 + &b[j].1 };
                push(&mut out, a[i].0, c, keep_a && keep_b);
                i += 1;
                j += 1;
            }
        }
        Jet { vars: self.vars.clone(), order, terms: out }
    }

    pub fn scale(&self, c: &Scalar) -> Jet {
        if c.is_zero() {
            return Jet::zero(&self.vars, self.order);
        }
        let terms = self.terms.iter().map(|(m, v)| (*m, v * c)).collect();
        Jet { vars: self.vars.clone(), order: self.order, terms }
    }

    pub fn try_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let (a, b) = if self.terms.len() <= other.terms.len() { (self, other) } else { (other, self) };
        if a.terms.is_empty() {
            return Jet::zero(&self.vars, order);
        }
        if a.terms.len() == 1 {
            let (ma, ca) = &a.terms[0];
            let da = self.vars.degree(*ma);
            if da > order {
                return Jet::zero(&self.vars, order);
            }
            let terms = b.terms.iter().filter(|(mb, _)| da + self.vars.degree(*mb) <= order).map(|(mb, cb)| (ma + mb, ca * cb)).collect();
            return Jet { vars: self.vars.clone(), order, terms };
        }
        let vs = &self.vars;
        let mut bd: Vec<(u32, usize)> = b.terms.iter().enumerate().map(|(k, (m, _))| (vs.degree(*m), k)).collect();
        bd.sort_unstable();
        let cut = bd.partition_point(|(d, _)| *d <= order);
        bd.truncate(cut);
        let maxdeg = order / vs.weights.iter().copied().min().unwrap_or(1);
        let bound = binom_u64(maxdeg as u64 + vs.len() as u64, vs.len() as u64);
        let pairs = a.terms.len() as u64 * bd.len() as u64;
        let mut acc = Acc::with_capacity(pairs.min(bound) as usize);
        for (ma, ca) in &a.terms {
            let da = vs.degree(*ma);
            if da > order {
                continue;
            }
            let room = order - da;
            for (db, k) in &bd {
                if *db > room {
                    break;
                }
                let (mb, cb) = &b.terms[*k];
                acc.add(ma + mb, ca * cb);
            }
        }
        Jet { vars: self.vars.clone(), order, terms: acc.finish() }
    }

    /// Partial derivative in variable `i`; the order drops by its weight.
    pub fn diff(&self, i: usize) -> Result<Jet, JetError> {
        if i >= self.vars.len() {
            return Err(JetError::UnknownVar(alloc::format!("#{}", i)));
        }
        let w = self.vars.weights[i];
        if self.order < w {
            return Err(JetError::OrderExhausted);
        }
        let u = mono_unit(i);
        let terms = self
            .terms
            .iter()
            .filter_map(|(m, c)| {
                let e = mono_exp(*m, i);
                (e > 0).then(|| (m - u, c * &Scalar::from_int(e as i64)))
            })
            .collect();
        Ok(Jet { vars: self.vars.clone(), order: self.order - w, terms })
    }

    pub fn diff_by_name(&self, name: &str) -> Result<Jet, JetError> {
        let i = self.vars.index(name).ok_or_else(|| JetError::UnknownVar(String::from(name)))?;
        self.diff(i)
    }

    /// Least exponent of variable `i` among nonzero coefficients.
    pub fn vanishing_order(&self, i: usize) -> Vanishing {
        match self.terms.iter().map(|(m, _)| mono_exp(*m, i)).min() {
            Some(k) => Vanishing::Exactly(k),
            None => Vanishing::AtLeastTruncation,
        }
    }

    /// Coefficient of `v_i^k`, as a jet in the same variables (with the
    /// exponent of `v_i` removed).
    pub fn coeff_of_power(&self, i: usize, k: u32) -> Jet {
        let drop = k * self.vars.weights[i];
        if drop > self.order {
            return Jet::zero(&self.vars, 0);
        }
        let sub = (k as u64) << shift(i);
        let terms = self.terms.iter().filter(|(m, _)| mono_exp(*m, i) == k).map(|(m, c)| (m - sub, c.clone())).collect();
        Jet { vars: self.vars.clone(), order: self.order - drop, terms }
    }

    /// Multiplies by `v_i^k`; the order rises by `k` times the weight.
    pub fn shift_up(&self, i: usize, k: u32) -> Jet {
        let add = (k as u64) << shift(i);
        let terms = self.terms.iter().map(|(m, c)| (m + add, c.clone())).collect();
        Jet { vars: self.vars.clone(), order: self.order + k * self.vars.weights[i], terms }
    }

    /// Exact division by `v_i^k`; fails unless every term is divisible.
    pub fn shift_down(&self, i: usize, k: u32) -> Result<Jet, JetError> {
        let drop = k * self.vars.weights[i];
        if self.terms.iter().any(|(m, _)| mono_exp(*m, i) < k) {
            return Err(JetError::NonzeroConstant);
        }
        if drop > self.order {
            return Err(JetError::OrderExhausted);
        }
        let sub = (k as u64) << shift(i);
        let terms = self.terms.iter().map(|(m, c)| (m - sub, c.clone())).collect();
        Ok(Jet { vars: self.vars.clone(), order: self.order - drop, terms })
    }

    /// Sets variable `i` to zero.
    pub fn at_zero(&self, i: usize) -> Jet {
        let terms = self.terms.iter().filter(|(m, _)| mono_exp(*m, i) == 0).cloned().collect();
        Jet { vars: self.vars.clone(), order: self.order, terms }
    }

    /// Re-expresses the jet over another variable set. `map[i]` gives the
    /// target index of source variable `i` (None: the variable must not
    /// occur). The new order must be covered by the old one.
    pub fn remap(&self, target: &Arc<VarSet>, map: &[Option<usize>], order: u32) -> Result<Jet, JetError> {
        // worst case old degree of a monomial with new degree <= order
        let mut worst = 0u32;
        for (i, t) in map.iter().enumerate() {
            if let Some(t) = t {
                let wn = target.weights[*t];
                let wo = self.vars.weights[i];
                worst = worst.max((order / wn) * wo);
            }
        }
        if worst > self.order {
            return Err(JetError::OrderExhausted);
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let mut nm: Mono = 0;
            for (i, t) in map.iter().enumerate() {
                let e = mono_exp(*m, i);
                if e == 0 {
                    continue;
                }
                match t {
                    Some(t) => nm += (e as u64) << shift(*t),
                    None => return Err(JetError::VarMismatch),
                }
            }
            terms.push((nm, c.clone()));
        }
        Ok(Jet::from_terms(target, order, terms))
    }

    /// Splits into weighted-homogeneous parts by degree.
    fn graded(&self) -> Vec<Vec<(Mono, Scalar)>> {
        let mut parts = vec![Vec::new(); self.order as usize + 1];
        for (m, c) in &self.terms {
            parts[self.vars.degree(*m) as usize].push((*m, c.clone()));
        }
        parts
    }

    fn from_graded(vars: &Arc<VarSet>, order: u32, parts: Vec<Vec<(Mono, Scalar)>>) -> Jet {
        Jet::from_terms(vars, order, parts.into_iter().flatten())
    }

    fn graded_product(a: &[(Mono, Scalar)], b: &[(Mono, Scalar)], acc: &mut Acc) {
        for (ma, ca) in a {
            for (mb, cb) in b {
                acc.add(ma + mb, ca * cb);
            }
        }
    }

    /// Multiplicative inverse of a jet with nonzero constant term.
    pub fn invert(&self) -> Result<Jet, JetError> {
        let c0 = self.constant_term();
        let c0inv = c0.recip().ok_or(JetError::NotUnit)?;
        let u = self.graded();
        let n = self.order as usize;
        let mut v: Vec<Vec<(Mono, Scalar)>> = vec![Vec::new(); n + 1];
        v[0] = vec![(0, c0inv.clone())];
        let neg = -&c0inv;
        for d in 1..=n {
            let mut acc = Acc::with_capacity(16);
            for k in 1..=d {
                if u[k].is_empty() || v[d - k].is_empty() {
                    continue;
                }
                Self::graded_product(&u[k], &v[d - k], &mut acc);
            }
            v[d] = acc.finish().into_iter().map(|(m, c)| (m, &c * &neg)).collect();
        }
        Ok(Self::from_graded(&self.vars, self.order, v))
    }

    /// `exp(a)` for `a` with zero constant term.
    pub fn exp0(&self) -> Result<Jet, JetError> {
        if !self.constant_term().is_zero() {
            return Err(JetError::NonzeroConstant);
        }
        // weighted Euler operator E: E(exp a) = exp(a) E(a)
        let a = self.graded();
        let n = self.order as usize;
        let mut y: Vec<Vec<(Mono, Scalar)>> = vec![Vec::new(); n + 1];
        y[0] = vec![(0, Scalar::one())];
        for d in 1..=n {
            let mut acc = Acc::with_capacity(16);
            for k in 1..=d {
                if a[k].is_empty() || y[d - k].is_empty() {
                    continue;
                }
                let ka: Vec<(Mono, Scalar)> = a[k].iter().map(|(m, c)| (*m, c * &Scalar::from_int(k as i64))).collect();
                Self::graded_product(&ka, &y[d - k], &mut acc);
            }
            let inv = Scalar::ratio(1, d as i64);
            y[d] = acc.finish().into_iter().map(|(m, c)| (m, &c * &inv)).collect();
        }
        Ok(Self::from_graded(&self.vars, self.order, y))
    }

    /// `log(u)` for `u` with constant term 1.
    pub fn log1(&self) -> Result<Jet, JetError> {
        if !self.constant_term().is_one() {
            return Err(JetError::NotOne);
        }
        // E(u) = u E(L):  d u_d = d L_d + sum_{k<d} k L_k u_{d-k}
        let u = self.graded();
        let n = self.order as usize;
        let mut l: Vec<Vec<(Mono, Scalar)>> = vec![Vec::new(); n + 1];
        for d in 1..=n {
            let mut acc = Acc::with_capacity(16);
            for (m, c) in &u[d] {
                acc.add(*m, c * &Scalar::from_int(d as i64));
            }
            for k in 1..d {
                if l[k].is_empty() || u[d - k].is_empty() {
                    continue;
                }
                let kl: Vec<(Mono, Scalar)> = l[k].iter().map(|(m, c)| (*m, c * &Scalar::from_int(-(k as i64)))).collect();
                Self::graded_product(&kl, &u[d - k], &mut acc);
            }
            let inv = Scalar::ratio(1, d as i64);
            l[d] = acc.finish().into_iter().map(|(m, c)| (m, &c * &inv)).collect();
        }
        Ok(Self::from_graded(&self.vars, self.order, l))
    }

    /// `u^s` for rational `s` and `u` with constant term 1.
    pub fn pow1(&self, s: &Scalar) -> Result<Jet, JetError> {
        self.log1()?.scale(s).exp0()
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, e: u32) -> Jet {
        let mut acc = Jet::one(&self.vars, self.order);
        let mut b = self.clone();
        let mut k = e;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &b;
            }
            k >>= 1;
            if k > 0 {
                b = &b * &b;
            }
        }
        acc
    }

    /// Maximum total (unweighted) degree of a stored term.
    pub fn max_total_degree(&self) -> u32 {
        self.terms.iter().map(|(m, _)| self.vars.total_degree(*m)).max().unwrap_or(0)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.try_add(rhs).expect("variable mismatch")
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.try_sub(rhs).expect("variable mismatch")
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.try_mul(rhs).expect("variable mismatch")
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let terms = self.terms.iter().map(|(m, c)| (*m, -c)).collect();
        Jet { vars: self.vars.clone(), order: self.order, terms }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}
