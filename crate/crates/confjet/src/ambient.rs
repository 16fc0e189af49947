//! Normal-form ambient metric `2ρ dt² + 2t dt dρ + t² g_ij(x,ρ)`, solved
//! order by order in `ρ`, with the Poincaré form `r⁻²(dr² + g_r)`.
//!
//! Expansions store `g^(m) = ∂_ρ^m g_ij |ρ=0` as jets in the base variables.
//! Series in `(x, ρ)` use a weighted truncation with `ρ` of weight 2, so a
//! base jet of order `X` yields a joint jet of order `X`.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::jet::{Jet, JetError, Vanishing, VarSet};
use crate::metric::{invert_matrix, MetricError, MetricJet};
use crate::riemann::{self, conformal_base_tensors, curvature, CurvatureError, LeviCivita};
use crate::scalar::{factorial, Scalar};
use crate::tensor::{Slot, SymTag, TensorJet};

use Slot::Down;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AmbientError {
    /// Operation not defined in this dimension.
    Dimension(usize),
    /// Ambiguity tensor has the wrong shape, is not symmetric, or is given for odd `n`.
    BadAmbiguity(String),
    AmbiguityNotTraceFree,
    OrderExhausted {
        needed: u32,
        available: u32,
    },
    NotEinstein,
    NotConformallyFlat,
    /// A supplied Schouten-type tensor fails its defining conditions.
    BadSchouten(String),
    Jet(JetError),
    Metric(MetricError),
}

impl From<JetError> for AmbientError {
    fn from(e: JetError) -> Self {
        match e {
            JetError::OrderExhausted => AmbientError::OrderExhausted { needed: 0, available: 0 },
            e => AmbientError::Jet(e),
        }
    }
}

impl From<MetricError> for AmbientError {
    fn from(e: MetricError) -> Self {
        AmbientError::Metric(e)
    }
}

impl From<CurvatureError> for AmbientError {
    fn from(e: CurvatureError) -> Self {
        match e {
            CurvatureError::Dimension(n) => AmbientError::Dimension(n),
            CurvatureError::Jet(e) => e.into(),
        }
    }
}

impl fmt::Display for AmbientError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AmbientError::Dimension(n) => write!(f, "not available in dimension {}", n),
            AmbientError::BadAmbiguity(s) => write!(f, "bad ambiguity tensor: {}", s),
            AmbientError::AmbiguityNotTraceFree => write!(f, "ambiguity tensor is not trace-free"),
            AmbientError::OrderExhausted { needed, available } if *needed > 0 => {
                write!(f, "jet order {} is too small, need {}", available, needed)
            }
            AmbientError::OrderExhausted { .. } => write!(f, "jet order exhausted"),
            AmbientError::NotEinstein => write!(f, "metric is not Einstein to jet order"),
            AmbientError::NotConformallyFlat => write!(f, "metric is not locally conformally flat to jet order"),
            AmbientError::BadSchouten(s) => write!(f, "{}", s),
            AmbientError::Jet(e) => write!(f, "{}", e),
            AmbientError::Metric(e) => write!(f, "{}", e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Every stored order is determined (given the ambiguity choice for even `n`).
    Determined,
    /// `n` even and the obstruction tensor is nonzero: orders stop below `n/2`.
    Obstructed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbiguityChoice {
    Zero,
    Supplied,
}

/// Data at `m = n/2` for even `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfOrder {
    /// `g^ij g^(n/2)_ij`, always determined.
    pub trace: Jet,
    /// Trace-free part of `g^(n/2)`, a free choice.
    pub ambiguity: TensorJet,
    pub choice: AmbiguityChoice,
}

#[derive(Debug, Clone)]
pub struct AmbientExpansion {
    n: usize,
    base: MetricJet,
    derivs: Vec<TensorJet>,
    continued: Vec<TensorJet>,
    half: Option<HalfOrder>,
    obstruction: Option<TensorJet>,
    status: Status,
    polynomial: bool,
}

impl AmbientExpansion {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &MetricJet {
        &self.base
    }

    /// `g^(1), g^(2), ...` as far as determined.
    pub fn orders(&self) -> &[TensorJet] {
        &self.derivs
    }

    /// `g^(m)`; `m = 0` is the base metric. Closed forms report zero past
    /// their last nonzero order.
    pub fn derivative(&self, m: usize) -> Option<TensorJet> {
        if m == 0 {
            return Some(self.base.g().clone());
        }
        match self.derivs.get(m - 1) {
            Some(t) => Some(t.clone()),
            None if self.polynomial => Some(self.base.g().map(|c| Jet::zero(c.vars(), c.order()))),
            None => None,
        }
    }

    /// Orders including the forced continuation past an obstruction.
    pub fn continued(&self) -> &[TensorJet] {
        &self.continued
    }

    pub fn half_order(&self) -> Option<&HalfOrder> {
        self.half.as_ref()
    }

    pub fn trace_at_half_n(&self) -> Option<&Jet> {
        self.half.as_ref().map(|h| &h.trace)
    }

    pub fn obstruction(&self) -> Option<&TensorJet> {
        self.obstruction.as_ref()
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_obstructed(&self) -> bool {
        self.status == Status::Obstructed
    }

    /// True for closed forms, whose `ρ`-dependence is a finite polynomial.
    pub fn is_polynomial(&self) -> bool {
        self.polynomial
    }

    /// Taylor coefficients `a_m = g^(m)/m!` in `ρ`, starting with `a_0 = g`.
    pub fn taylor_coefficients(&self, continued: bool) -> Vec<TensorJet> {
        let mut a = vec![self.base.g().clone()];
        let src = if continued { &self.continued } else { &self.derivs };
        for (k, d) in src.iter().enumerate() {
            a.push(d.scale(&factorial(k as u32 + 1).recip().unwrap()));
        }
        if !continued && self.is_obstructed() {
            if let Some(h) = &self.half {
                let m = self.n / 2;
                let g = self.base.g();
                let t = h.trace.scale(&Scalar::ratio(1, self.n as i64));
                let full = h.ambiguity.zip_with(g, |a, b| a + &(&t * b));
                a.push(full.scale(&factorial(m as u32).recip().unwrap()));
            }
        }
        a
    }

    /// `g_ij(x,ρ)` as a joint series. With `continued`, the forced
    /// continuation past an obstruction is used.
    pub fn series(&self, continued: bool) -> Result<RhoSeries, AmbientError> {
        let coeffs = self.taylor_coefficients(continued);
        let x = self.base.order();
        let order = if self.polynomial { x } else { x.min(2 * (coeffs.len() as u32 - 1) + 1) };
        RhoSeries::from_taylor(&self.base, &coeffs, order)
    }
}

/// `g_ij(x,ρ)` over the joint variables `(base vars…, rho)`.
#[derive(Debug, Clone)]
pub struct RhoSeries {
    pub metric: MetricJet,
    pub rho: usize,
    pub base_vars: Arc<VarSet>,
}

/// Base variables with `rho` of the given weight appended.
pub fn joint_vars(base: &Arc<VarSet>, rho_weight: u32) -> Result<Arc<VarSet>, JetError> {
    let mut names: Vec<String> = base.names().to_vec();
    let mut weights: Vec<u32> = base.weights().to_vec();
    names.push(String::from("rho"));
    weights.push(rho_weight);
    VarSet::weighted(names, weights)
}

fn lift(j: &Jet, joint: &Arc<VarSet>) -> Result<Jet, JetError> {
    let map: Vec<Option<usize>> = (0..j.vars().len()).map(Some).collect();
    j.remap(joint, &map, j.order())
}

impl RhoSeries {
    /// `Σ a_m ρ^m` with `ρ` of weight 2.
    pub fn from_taylor(base: &MetricJet, coeffs: &[TensorJet], order: u32) -> Result<Self, AmbientError> {
        Self::from_taylor_weighted(base, coeffs, order, 2)
    }

    pub fn from_taylor_weighted(base: &MetricJet, coeffs: &[TensorJet], order: u32, rho_weight: u32) -> Result<Self, AmbientError> {
        let joint = joint_vars(base.vars(), rho_weight)?;
        let rho = base.vars().len();
        let n = base.dim();
        let mut comps = vec![Jet::zero(&joint, order); n * n];
        for (m, a) in coeffs.iter().enumerate() {
            let used = rho_weight * m as u32;
            if used > order {
                break;
            }
            for (k, c) in a.comps().iter().enumerate() {
                if c.order() + used < order {
                    return Err(AmbientError::OrderExhausted { needed: order - used, available: c.order() });
                }
                comps[k] = &comps[k] + &lift(c, &joint)?.shift_up(rho, m as u32).truncate(order);
            }
        }
        let metric = MetricJet::new(TensorJet::from_matrix(n, comps))?;
        Ok(RhoSeries { metric, rho, base_vars: base.vars().clone() })
    }

    pub fn n(&self) -> usize {
        self.metric.dim()
    }

    pub fn order(&self) -> u32 {
        self.metric.order()
    }

    /// Coefficient of `ρ^k` as a base jet.
    pub fn coeff(&self, j: &Jet, k: u32) -> Result<Jet, JetError> {
        coeff_in_base(j, self.rho, k, &self.base_vars)
    }

    pub fn coeff_tensor(&self, t: &TensorJet, k: u32) -> Result<TensorJet, JetError> {
        t.try_map(|c| self.coeff(c, k))
    }

    /// `∂_ρ g_ij`.
    pub fn d_rho(&self, t: &TensorJet) -> Result<TensorJet, JetError> {
        t.try_map(|c| c.diff(self.rho))
    }
}

fn coeff_in_base(j: &Jet, rho: usize, k: u32, base: &Arc<VarSet>) -> Result<Jet, JetError> {
    let c = j.coeff_of_power(rho, k);
    let map: Vec<Option<usize>> = (0..j.vars().len()).map(|i| if i == rho { None } else { Some(i) }).collect();
    c.remap(base, &map, c.order())
}

fn sum(vars: &Arc<VarSet>, order: u32, it: impl IntoIterator<Item = Jet>) -> Jet {
    it.into_iter().fold(Jet::zero(vars, order), |a, b| &a + &b)
}

/// `g^ij t_ij`.
pub fn trace(g: &MetricJet, t: &TensorJet) -> Jet {
    riemann::metric_trace(g, t, 0, 1).comps()[0].clone()
}

/// Trace-free part of a symmetric 2-tensor.
pub fn trace_free(g: &MetricJet, t: &TensorJet) -> TensorJet {
    let tr = trace(g, t).scale(&Scalar::ratio(1, g.dim() as i64));
    let order = t.order().min(g.order());
    TensorJet::from_fn(g.dim(), &[Down, Down], |i| (t.get(i) - &(&tr * g.lower(i[0], i[1]))).truncate(order))
}

/// `(g⁻¹ t)^a_b = g^ac t_cb`.
fn mixed(g: &MetricJet, t: &TensorJet) -> TensorJet {
    riemann::raise(g, t, 0)
}

/// The three independent blocks of the ambient Ricci tensor of a
/// normal-form metric, at `t = 1`.
#[derive(Debug, Clone)]
pub struct RicciBlocks {
    pub ij: TensorJet,
    pub i_inf: TensorJet,
    pub inf_inf: Jet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Want {
    i_inf: bool,
    inf_inf: bool,
}

/// Ricci blocks from the `ρ`-evolution form of the equations.
fn evolution_blocks(s: &RhoSeries, want: Want) -> Result<RicciBlocks, JetError> {
    let g = &s.metric;
    let n = g.dim();
    let vars = g.vars().clone();
    let rho = s.rho;
    let d1 = s.d_rho(g.g())?;
    let d2 = s.d_rho(&d1)?;
    let a = mixed(g, &d1);
    let tr1 = sum(&vars, a.order(), (0..n).map(|k| a.get(&[k, k]).clone()));
    let lc = LeviCivita::new(g)?;
    let ric = lc.ricci()?;
    let half = Scalar::ratio(1, 2);
    let lin = Scalar::ratio(n as i64 - 2, 2);
    let order = g.order().saturating_sub(2);
    let ij = TensorJet::from_fn(n, &[Down, Down], |x| {
        let (i, j) = (x[0], x[1]);
        let q = sum(&vars, a.order(), (0..n).map(|k| d1.get(&[i, k]) * a.get(&[k, j])));
        let inner = &(d2.get(x) - &q) + &(&tr1 * d1.get(x)).scale(&half);
        let v = &(&inner.shift_up(rho, 1) - &d1.get(x).scale(&lin)) - &(&tr1 * g.lower(i, j)).scale(&half);
        (&v + ric.get(x)).truncate(order)
    });
    let i_inf = if want.i_inf {
        let nd = lc.cov_deriv(&d1)?;
        TensorJet::from_fn(n, &[Down], |x| {
            let i = x[0];
            let mut v = Jet::zero(&vars, nd.order());
            for k in 0..n {
                for l in 0..n {
                    let gkl = g.upper(k, l);
                    if gkl.is_zero() {
                        continue;
                    }
                    v = &v + &(gkl * &(nd.get(&[i, l, k]) - nd.get(&[k, l, i])));
                }
            }
            v.scale(&half)
        })
    } else {
        TensorJet::zeros(&vars, 0, n, &[Down])
    };
    let inf_inf = if want.inf_inf {
        let tr2 = trace(g, &d2);
        let sq = sum(&vars, a.order(), (0..n).flat_map(|k| (0..n).map(move |p| (k, p))).map(|(k, p)| a.get(&[k, p]) * a.get(&[p, k])));
        &tr2.scale(&Scalar::ratio(-1, 2)) + &sq.scale(&Scalar::ratio(1, 4))
    } else {
        Jet::zero(&vars, 0)
    };
    Ok(RicciBlocks { ij, i_inf, inf_inf })
}

/// Full ambient Ricci tensor `R̃_IJ` at `t = 1` from the general coordinate
/// formula, in index order `0, x_1..x_n, ∞`.
pub fn general_ricci(s: &RhoSeries) -> Result<TensorJet, JetError> {
    let g = &s.metric;
    let n = g.dim();
    let dim = n + 2;
    let inf = n + 1;
    let vars = g.vars().clone();
    let w = g.order();
    let rho = s.rho;
    let zero = Jet::zero(&vars, w);
    let mut gt = vec![zero.clone(); dim * dim];
    gt[0] = Jet::var(&vars, w, rho).scale(&Scalar::from_int(2));
    gt[inf] = Jet::one(&vars, w);
    gt[inf * dim] = Jet::one(&vars, w);
    for i in 0..n {
        for j in 0..n {
            gt[(i + 1) * dim + j + 1] = g.lower(i, j).clone();
        }
    }
    let zeros = |idx: &[usize]| idx.iter().filter(|&&i| i == 0).count() as i64;
    // D_0 acts on a t-homogeneous component of degree d as multiplication by d.
    let d = |a: usize, f: &Jet, deg: i64| -> Result<Jet, JetError> {
        if f.is_zero() {
            return Ok(if a == 0 { f.clone() } else { Jet::zero(&vars, f.order().saturating_sub(if a == inf { 2 } else { 1 })) });
        }
        match a {
            0 => Ok(f.scale(&Scalar::from_int(deg))),
            a if a == inf => f.diff(rho),
            a => f.diff(a - 1),
        }
    };
    let ginv = invert_matrix(&gt, dim)?;
    // dg[a][j][k] = D_a g̃_jk
    let mut dg = vec![zero.clone(); dim * dim * dim];
    for a in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                dg[(a * dim + j) * dim + k] = d(a, &gt[j * dim + k], 2 - zeros(&[j, k]))?;
            }
        }
    }
    let dgi = |a: usize, j: usize, k: usize| &dg[(a * dim + j) * dim + k];
    let half = Scalar::ratio(1, 2);
    // Γ̃_ijk lowered on k
    let mut gam = vec![zero.clone(); dim * dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                gam[(i * dim + j) * dim + k] = (&(dgi(i, j, k) + dgi(j, i, k)) - dgi(k, i, j)).scale(&half);
            }
        }
    }
    let gl = |i: usize, j: usize, k: usize| &gam[(i * dim + j) * dim + k];
    let gu = |i: usize, j: usize| &ginv[i * dim + j];
    // Γ̃^p_jk
    let mut up = vec![zero.clone(); dim * dim * dim];
    for p in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                let mut v = zero.clone();
                for q in 0..dim {
                    if !gu(p, q).is_zero() && !gl(j, k, q).is_zero() {
                        v = &v + &(gu(p, q) * gl(j, k, q));
                    }
                }
                up[(p * dim + j) * dim + k] = v;
            }
        }
    }
    let gup = |p: usize, j: usize, k: usize| &up[(p * dim + j) * dim + k];
    // X_j^{pl} = g̃^{kl} Γ̃^p_jk
    let mut xx = vec![zero.clone(); dim * dim * dim];
    for j in 0..dim {
        for p in 0..dim {
            for l in 0..dim {
                let mut v = zero.clone();
                for k in 0..dim {
                    if !gu(k, l).is_zero() && !gup(p, j, k).is_zero() {
                        v = &v + &(gu(k, l) * gup(p, j, k));
                    }
                }
                xx[(j * dim + p) * dim + l] = v;
            }
        }
    }
    // Y^p = g̃^{kl} Γ̃^p_kl
    let yy: Vec<Jet> = (0..dim)
        .map(|p| {
            let mut v = zero.clone();
            for k in 0..dim {
                for l in 0..dim {
                    if !gu(k, l).is_zero() && !gup(p, k, l).is_zero() {
                        v = &v + &(gu(k, l) * gup(p, k, l));
                    }
                }
            }
            v
        })
        .collect();
    let d2 = |a: usize, b: usize, j: usize, k: usize| -> Result<Jet, JetError> { d(a, dgi(b, j, k), 2 - zeros(&[b, j, k])) };
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut v = zero.clone();
            for k in 0..dim {
                for l in 0..dim {
                    let gkl = gu(k, l);
                    if gkl.is_zero() {
                        continue;
                    }
                    let s = &(&d2(i, l, j, k)? + &d2(j, k, i, l)?) - &(&d2(k, l, i, j)? + &d2(i, j, k, l)?);
                    v = &v + &(gkl * &s).scale(&half);
                }
            }
            for l in 0..dim {
                for p in 0..dim {
                    let a = gl(i, l, p);
                    let b = &xx[(j * dim + p) * dim + l];
                    if !a.is_zero() && !b.is_zero() {
                        v = &v + &(a * b);
                    }
                }
            }
            for p in 0..dim {
                if !gl(i, j, p).is_zero() && !yy[p].is_zero() {
                    v = &v - &(gl(i, j, p) * &yy[p]);
                }
            }
            out.push(v);
        }
    }
    Ok(TensorJet::from_comps(dim, &[Down, Down], out).unwrap())
}

fn check_dim(n: usize) -> Result<(), AmbientError> {
    if n < 3 {
        Err(AmbientError::Dimension(n))
    } else {
        Ok(())
    }
}

fn even_at_least_four(n: usize) -> Result<(), AmbientError> {
    if n < 4 || n % 2 == 1 {
        Err(AmbientError::Dimension(n))
    } else {
        Ok(())
    }
}

/// `c_n = (-1)^(n/2-1) 2^(n-2) ((n/2-1)!)² / (n-2)`.
pub fn obstruction_constant(n: usize) -> Scalar {
    let h = (n / 2 - 1) as u32;
    let sign = if h.is_multiple_of(2) { 1 } else { -1 };
    let f = factorial(h);
    Scalar::from_int(sign) * Scalar::from_int(2).pow(n as i32 - 2) * (&f * &f) * Scalar::ratio(1, n as i64 - 2)
}

fn validate_ambiguity(g: &MetricJet, h: &TensorJet) -> Result<(), AmbientError> {
    let n = g.dim();
    if h.dim() != n || h.rank() != 2 {
        return Err(AmbientError::BadAmbiguity(String::from("expected a 2-tensor of the base dimension")));
    }
    if !Arc::ptr_eq(h.vars(), g.vars()) && h.vars() != g.vars() {
        return Err(AmbientError::BadAmbiguity(String::from("variables differ from the metric")));
    }
    for i in 0..n {
        for j in i + 1..n {
            if h.get(&[i, j]) != h.get(&[j, i]) {
                return Err(AmbientError::BadAmbiguity(String::from("not symmetric")));
            }
        }
    }
    if !trace(g, h).is_zero() {
        return Err(AmbientError::AmbiguityNotTraceFree);
    }
    Ok(())
}

struct Solved {
    coeffs: Vec<TensorJet>,
    half: Option<HalfOrder>,
    obstruction: Option<TensorJet>,
    stop: Option<usize>,
}

/// Solves for `a_m = g^(m)/m!`, `m = 1..=steps`.
fn solve(g: &MetricJet, steps: usize, h: Option<&TensorJet>, keep_going: bool) -> Result<Solved, AmbientError> {
    let n = g.dim();
    let x = g.order();
    if 2 * steps as u32 > x {
        return Err(AmbientError::OrderExhausted { needed: 2 * steps as u32, available: x });
    }
    let even = n.is_multiple_of(2);
    let mut coeffs = vec![g.g().clone()];
    let mut half = None;
    let mut obstruction = None;
    let mut stop = None;
    let nn = Scalar::from_int(n as i64);
    for m in 1..=steps {
        let s = RhoSeries::from_taylor(g, &coeffs, x)?;
        let need_ff = m == n;
        let blocks = evolution_blocks(&s, Want { i_inf: false, inf_inf: need_ff })?;
        let target = x - 2 * m as u32;
        let e = s.coeff_tensor(&blocks.ij, m as u32 - 1)?.truncate(target);
        let mm = Scalar::from_int(m as i64);
        let tr_e = trace(g, &e).truncate(target);
        let t = if m != n {
            tr_e.scale(&(-(&mm * &Scalar::from_int(m as i64 - n as i64))).recip().unwrap())
        } else {
            let f = s.coeff(&blocks.inf_inf, m as u32 - 2)?.truncate(target);
            f.scale(&Scalar::ratio(2, (m * (m - 1)) as i64))
        };
        let tf_e = trace_free(g, &e);
        let tf = if !(even && 2 * m == n) {
            let k = &mm * &(&mm - &Scalar::ratio(n as i64, 2));
            tf_e.scale(&(-k).recip().unwrap())
        } else {
            let hh = match h {
                Some(h) => h.truncate(target),
                None => tf_e.map(|c| Jet::zero(c.vars(), target)),
            };
            let scale = Scalar::from_int(2).pow(1 - (n / 2) as i32) * obstruction_constant(n);
            let ob = tf_e.scale(&scale).with_symmetry(&[SymTag::Sym(0, 1)]).expect("symmetric");
            half = Some(HalfOrder {
                trace: t.scale(&factorial(m as u32)),
                ambiguity: hh.clone(),
                choice: if h.is_some() { AmbiguityChoice::Supplied } else { AmbiguityChoice::Zero },
            });
            if !ob.is_zero() {
                stop = Some(m);
            }
            obstruction = Some(ob);
            hh.scale(&factorial(m as u32).recip().unwrap())
        };
        if stop.is_some() && !keep_going {
            break;
        }
        let tn = t.scale(&nn.recip().unwrap());
        let am = TensorJet::from_fn(n, &[Down, Down], |i| (tf.get(i) + &(&tn * g.lower(i[0], i[1]))).truncate(target));
        coeffs.push(am.with_symmetry(&[SymTag::Sym(0, 1)]).expect("symmetric"));
    }
    Ok(Solved { coeffs, half, obstruction, stop })
}

fn derivs_from(coeffs: &[TensorJet]) -> Vec<TensorJet> {
    coeffs.iter().enumerate().skip(1).map(|(m, a)| a.scale(&factorial(m as u32))).collect()
}

fn expand(g: &MetricJet, steps: usize, h: Option<&TensorJet>, keep_going: bool) -> Result<AmbientExpansion, AmbientError> {
    let n = g.dim();
    check_dim(n)?;
    if let Some(h) = h {
        if n % 2 == 1 {
            return Err(AmbientError::BadAmbiguity(String::from("no ambiguity in odd dimension")));
        }
        validate_ambiguity(g, h)?;
    }
    let solved = solve(g, steps, h, keep_going)?;
    let all = derivs_from(&solved.coeffs);
    let (derivs, status) = match solved.stop {
        Some(m) => (all[..m - 1].to_vec(), Status::Obstructed),
        None => (all.clone(), Status::Determined),
    };
    Ok(AmbientExpansion { n, base: g.clone(), derivs, continued: all, half: solved.half, obstruction: solved.obstruction, status, polynomial: false })
}

/// Normal-form ambient expansion through `∂_ρ^steps g`. For even `n`, `h`
/// is the trace-free part of `g^(n/2)` (zero by default). A nonzero
/// obstruction halts the expansion below `n/2`.
pub fn expand_ambient(g: &MetricJet, steps: usize, h: Option<&TensorJet>) -> Result<AmbientExpansion, AmbientError> {
    expand(g, steps, h, false)
}

/// As [`expand_ambient`], but past a nonzero obstruction the trace-free
/// equation is still solved, giving a definite (non-Ricci-flat) continuation
/// in [`AmbientExpansion::continued`].
pub fn expand_ambient_continued(g: &MetricJet, steps: usize, h: Option<&TensorJet>) -> Result<AmbientExpansion, AmbientError> {
    expand(g, steps, h, true)
}

/// Obstruction tensor, `n` even and at least 4. Needs jet order `n`.
pub fn obstruction(g: &MetricJet) -> Result<TensorJet, AmbientError> {
    let n = g.dim();
    even_at_least_four(n)?;
    let e = expand(g, n / 2, None, false)?;
    Ok(e.obstruction.expect("solver reached n/2"))
}

/// Per-block `ρ`-vanishing of the ambient Ricci tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RicciReport {
    /// Joint order of the reconstructed series.
    pub order: u32,
    pub ij: Vanishing,
    pub i_inf: Vanishing,
    pub inf_inf: Vanishing,
    /// `R̃_0I = 0` from the general formula.
    pub zero_row_vanishes: bool,
    /// The general formula agrees with the evolution form on every block.
    pub general_agrees: bool,
}

fn tensor_vanishing(t: &TensorJet, rho: usize) -> Vanishing {
    t.comps().iter().map(|c| c.vanishing_order(rho)).fold(Vanishing::AtLeastTruncation, min_vanishing)
}

fn min_vanishing(a: Vanishing, b: Vanishing) -> Vanishing {
    match (a, b) {
        (Vanishing::Exactly(x), Vanishing::Exactly(y)) => Vanishing::Exactly(x.min(y)),
        (Vanishing::Exactly(x), _) | (_, Vanishing::Exactly(x)) => Vanishing::Exactly(x),
        _ => Vanishing::AtLeastTruncation,
    }
}

fn agree(a: &Jet, b: &Jet) -> bool {
    let o = a.order().min(b.order());
    a.truncate(o) == b.truncate(o)
}

/// Reconstructs `g_ij(x,ρ)` and evaluates the ambient Ricci tensor both from
/// the evolution form and from the general coordinate formula.
pub fn ricci_report(s: &RhoSeries) -> Result<RicciReport, AmbientError> {
    let n = s.n();
    let ev = evolution_blocks(s, Want { i_inf: true, inf_inf: true })?;
    let gen = general_ricci(s)?;
    let inf = n + 1;
    let zero_row_vanishes = (0..n + 2).all(|j| gen.get(&[0, j]).is_zero());
    let mut general_agrees = true;
    for i in 0..n {
        for j in 0..n {
            general_agrees &= agree(gen.get(&[i + 1, j + 1]), ev.ij.get(&[i, j]));
        }
        general_agrees &= agree(gen.get(&[i + 1, inf]), ev.i_inf.get(&[i]));
        general_agrees &= agree(gen.get(&[inf, i + 1]), ev.i_inf.get(&[i]));
    }
    general_agrees &= agree(gen.get(&[inf, inf]), &ev.inf_inf);
    Ok(RicciReport {
        order: s.order(),
        ij: tensor_vanishing(&ev.ij, s.rho),
        i_inf: tensor_vanishing(&ev.i_inf, s.rho),
        inf_inf: ev.inf_inf.vanishing_order(s.rho),
        zero_row_vanishes,
        general_agrees,
    })
}

pub fn ricci_vanishing_order(e: &AmbientExpansion) -> Result<RicciReport, AmbientError> {
    ricci_report(&e.series(false)?)
}

fn closed_form(g: &MetricJet, derivs: Vec<TensorJet>) -> AmbientExpansion {
    let n = g.dim();
    let half = if n.is_multiple_of(2) && n >= 4 {
        let m = n / 2;
        let d = derivs.get(m - 1).cloned().unwrap_or_else(|| g.g().map(|c| Jet::zero(c.vars(), c.order())));
        Some(HalfOrder { trace: trace(g, &d), ambiguity: trace_free(g, &d), choice: AmbiguityChoice::Zero })
    } else {
        None
    };
    let obstruction = if n.is_multiple_of(2) && n >= 4 { Some(g.g().map(|c| Jet::zero(c.vars(), c.order().saturating_sub(n as u32)))) } else { None };
    AmbientExpansion { n, base: g.clone(), continued: derivs.clone(), derivs, half, obstruction, status: Status::Determined, polynomial: true }
}

/// The constant `λ` with `Ric = 2λ(n-1)g`, if the metric is Einstein to jet order.
pub fn einstein_constant(g: &MetricJet) -> Result<Scalar, AmbientError> {
    let n = g.dim();
    if n < 2 {
        return Err(AmbientError::Dimension(n));
    }
    let curv = curvature(g)?;
    let lambda = curv.scalar.constant_term() * Scalar::ratio(1, 2 * (n * (n - 1)) as i64);
    let k = &lambda * &Scalar::from_int(2 * (n as i64 - 1));
    for i in 0..n {
        for j in 0..n {
            if !agree(curv.ricci.get(&[i, j]), &g.lower(i, j).scale(&k)) {
                return Err(AmbientError::NotEinstein);
            }
        }
    }
    Ok(lambda)
}

/// `g_ρ = (1 + λρ)² g` for an Einstein metric.
pub fn einstein_ambient(g: &MetricJet) -> Result<AmbientExpansion, AmbientError> {
    let lambda = einstein_constant(g)?;
    let two = Scalar::from_int(2);
    let g1 = g.g().scale(&(&two * &lambda));
    let g2 = g.g().scale(&(&two * &(&lambda * &lambda)));
    Ok(closed_form(g, vec![g1, g2]))
}

/// `g_ρ = γ + 2Pρ + P_ik P^k_j ρ²` for a locally conformally flat metric.
/// In dimension 2 the tensor `P` must be supplied, with `tr P = R/2` and
/// `div P = dR/2`.
pub fn flat_ambient(g: &MetricJet, p: Option<&TensorJet>) -> Result<AmbientExpansion, AmbientError> {
    let n = g.dim();
    let p = match n {
        0 | 1 => return Err(AmbientError::Dimension(n)),
        2 => {
            let p = p.ok_or_else(|| AmbientError::BadSchouten(String::from("a Schouten-type tensor is required in dimension 2")))?;
            check_two_dim(g, p)?;
            p.clone()
        }
        _ => {
            let base = conformal_base_tensors(g)?;
            let flat = if n == 3 { base.c.is_zero() } else { base.w.is_zero() };
            if !flat {
                return Err(AmbientError::NotConformallyFlat);
            }
            if let Some(q) = p {
                if q.dim() != n || q.rank() != 2 || !q.comps().iter().zip(base.p.comps()).all(|(a, b)| agree(a, b)) {
                    return Err(AmbientError::BadSchouten(String::from("supplied tensor is not the Schouten tensor")));
                }
            }
            base.p
        }
    };
    let pm = mixed(g, &p);
    let vars = g.vars().clone();
    let two = Scalar::from_int(2);
    let pp = TensorJet::from_fn(n, &[Down, Down], |x| sum(&vars, pm.order(), (0..n).map(|k| p.get(&[x[0], k]) * pm.get(&[k, x[1]]))).scale(&two));
    Ok(closed_form(g, vec![p.scale(&two), pp]))
}

fn check_two_dim(g: &MetricJet, p: &TensorJet) -> Result<(), AmbientError> {
    if p.dim() != 2 || p.rank() != 2 || p.get(&[0, 1]) != p.get(&[1, 0]) {
        return Err(AmbientError::BadSchouten(String::from("expected a symmetric 2-tensor")));
    }
    let curv = curvature(g)?;
    let half = Scalar::ratio(1, 2);
    let r = curv.scalar.scale(&half);
    if !agree(&trace(g, p), &r) {
        return Err(AmbientError::BadSchouten(String::from("trace differs from half the scalar curvature")));
    }
    let lc = LeviCivita::new(g)?;
    let div = lc.trace(&lc.cov_deriv(p)?, 1, 2);
    for i in 0..2 {
        if !agree(div.get(&[i]), &r.diff(i)?) {
            return Err(AmbientError::BadSchouten(String::from("divergence differs from half the scalar gradient")));
        }
    }
    Ok(())
}

/// Taylor polynomial through order `n/2 - 1`, with all higher terms zero.
fn truncated_series(g: &MetricJet) -> Result<(RhoSeries, Vec<TensorJet>), AmbientError> {
    let n = g.dim();
    even_at_least_four(n)?;
    let solved = solve(g, n / 2 - 1, None, false)?;
    let s = RhoSeries::from_taylor(g, &solved.coeffs, g.order())?;
    Ok((s, solved.coeffs))
}

/// The 1-form `D_i` whose equality with `h_ij,^j` makes the even-dimensional
/// continuation straight. Needs jet order `n + 1`.
pub fn straightness_d(g: &MetricJet) -> Result<TensorJet, AmbientError> {
    let n = g.dim();
    even_at_least_four(n)?;
    if g.order() < n as u32 + 1 {
        return Err(AmbientError::OrderExhausted { needed: n as u32 + 1, available: g.order() });
    }
    let (s, _) = truncated_series(g)?;
    let b = evolution_blocks(&s, Want { i_inf: true, inf_inf: false })?;
    let k = n as u32 / 2 - 1;
    let f = factorial(k);
    let r = s.coeff_tensor(&b.ij, k)?.scale(&f);
    let ri = s.coeff_tensor(&b.i_inf, k)?.scale(&f);
    let tr = trace(g, &r);
    let c = Scalar::ratio(n as i64 - 1, (n * n) as i64);
    let two = Scalar::from_int(2);
    let comps = (0..n).map(|i| Ok((&tr.diff(i)?.scale(&c) - ri.get(&[i])).scale(&two))).collect::<Result<Vec<_>, JetError>>()?;
    Ok(TensorJet::from_comps(n, &[Down], comps).unwrap())
}

/// `2t⁻² R̃_{∞ij∞,∞…∞}` with `m` trailing `∞` indices, as a joint series.
pub fn infinity_derivatives(s: &RhoSeries, m: usize) -> Result<TensorJet, JetError> {
    let g = &s.metric;
    let n = g.dim();
    let vars = g.vars().clone();
    let d1 = s.d_rho(g.g())?;
    let d2 = s.d_rho(&d1)?;
    let a = mixed(g, &d1);
    let half = Scalar::ratio(1, 2);
    let mut cur = TensorJet::from_fn(n, &[Down, Down], |x| {
        let q = sum(&vars, a.order(), (0..n).map(|k| d1.get(&[x[0], k]) * a.get(&[k, x[1]])));
        d2.get(x) - &q.scale(&half)
    });
    for _ in 0..m {
        let d = s.d_rho(&cur)?;
        // Γ̃^k_{∞i} = ½ g^kl g'_il = ½ a^k_i
        cur = TensorJet::from_fn(n, &[Down, Down], |x| {
            let (i, j) = (x[0], x[1]);
            let mut v = d.get(x).clone();
            for k in 0..n {
                v = &v - &(a.get(&[k, i]) * cur.get(&[k, j])).scale(&half);
                v = &v - &(a.get(&[k, j]) * cur.get(&[i, k])).scale(&half);
            }
            v
        });
    }
    Ok(cur)
}

/// Natural trace-free tensor `K` with
/// `2R̃_{∞ij∞,∞…∞} = tf(∂_ρ^(n/2) g) + K` at `ρ = 0`. Needs jet order `n`.
pub fn k_tensor(g: &MetricJet) -> Result<TensorJet, AmbientError> {
    let n = g.dim();
    even_at_least_four(n)?;
    if g.order() < n as u32 {
        return Err(AmbientError::OrderExhausted { needed: n as u32, available: g.order() });
    }
    let (s, _) = truncated_series(g)?;
    let v = infinity_derivatives(&s, n / 2 - 2)?;
    let v0 = s.coeff_tensor(&v, 0)?;
    Ok(trace_free(g, &v0))
}

/// `g_r = g_{-r²/2}` as `r`-derivatives at `r = 0`.
#[derive(Debug, Clone)]
pub struct PoincareExpansion {
    n: usize,
    base: MetricJet,
    derivs: Vec<TensorJet>,
}

impl PoincareExpansion {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &MetricJet {
        &self.base
    }

    /// `∂_r^k g_r` at `r = 0`, `k = 1..`.
    pub fn orders(&self) -> &[TensorJet] {
        &self.derivs
    }

    pub fn derivative(&self, k: usize) -> Option<&TensorJet> {
        if k == 0 {
            Some(self.base.g())
        } else {
            self.derivs.get(k - 1)
        }
    }

    /// Builds `r⁻²(dr² + g_r)` from supplied `r`-derivatives.
    pub fn from_derivatives(base: &MetricJet, derivs: Vec<TensorJet>) -> Self {
        PoincareExpansion { n: base.dim(), base: base.clone(), derivs }
    }

    /// Variables `(r, base vars…)` and the compactified metric `dr² + g_r`
    /// on them, to the given order.
    pub fn compactified(&self, order: u32) -> Result<MetricJet, AmbientError> {
        let n = self.n;
        let mut names = vec![String::from("r")];
        names.extend(self.base.vars().names().iter().cloned());
        let vars = VarSet::new(names)?;
        let map: Vec<Option<usize>> = (0..self.base.vars().len()).map(|i| Some(i + 1)).collect();
        let mut comps = vec![Jet::zero(&vars, order); (n + 1) * (n + 1)];
        comps[0] = Jet::one(&vars, order);
        for k in 0..=order as usize {
            let Some(d) = self.derivative(k) else {
                return Err(AmbientError::OrderExhausted { needed: order, available: self.derivs.len() as u32 });
            };
            let c = factorial(k as u32).recip().unwrap();
            for i in 0..n {
                for j in 0..n {
                    let e = d.get(&[i, j]);
                    if e.is_zero() {
                        continue;
                    }
                    if e.order() + (k as u32) < order {
                        return Err(AmbientError::OrderExhausted { needed: order - k as u32, available: e.order() });
                    }
                    let t = e.remap(&vars, &map, order - k as u32)?.shift_up(0, k as u32).scale(&c);
                    let slot = &mut comps[(i + 1) * (n + 1) + j + 1];
                    *slot = &*slot + &t;
                }
            }
        }
        Ok(MetricJet::new(TensorJet::from_matrix(n + 1, comps))?)
    }

    /// `Ric(g₊) + n g₊` for `g₊ = r⁻²(dr² + g_r)`, expressed through the
    /// compactified metric `ḡ` as `Ric(ḡ) + ((n-1)∇̄²r + (Δ̄r) ḡ)/r`.
    pub fn einstein_residual(&self, order: u32) -> Result<TensorJet, AmbientError> {
        let n = self.n;
        let gb = self.compactified(order)?;
        let lc = LeviCivita::new(&gb)?;
        let ric = lc.ricci()?;
        let half = Scalar::ratio(1, 2);
        // ∇̄²r = ½ ∂_r ḡ, Δ̄r = ½ ḡ^ij ∂_r ḡ_ij
        let hess = gb.g().try_map(|c| Ok::<_, JetError>(c.diff(0)?.scale(&half)))?;
        let lap = trace(&gb, &hess);
        let k = Scalar::from_int(n as i64 - 1);
        let mut out = Vec::with_capacity((n + 1) * (n + 1));
        for a in 0..=n {
            for b in 0..=n {
                let num = &hess.get(&[a, b]).scale(&k) + &(&lap * gb.lower(a, b));
                let q = num.shift_down(0, 1).map_err(|_| AmbientError::Jet(JetError::NonzeroConstant))?;
                out.push(ric.get(&[a, b]) + &q);
            }
        }
        Ok(TensorJet::from_comps(n + 1, &[Down, Down], out).unwrap())
    }

    /// Vanishing order in `r` of the Einstein residual.
    pub fn residual_vanishing(&self, order: u32) -> Result<Vanishing, AmbientError> {
        let e = self.einstein_residual(order)?;
        Ok(tensor_vanishing(&e, 0))
    }
}

/// Substitutes `ρ = -r²/2`: `∂_r^(2m) g_r = (2m)!/m! (-½)^m g^(m)`, odd
/// orders zero.
pub fn to_poincare(e: &AmbientExpansion, order: usize) -> Result<PoincareExpansion, AmbientError> {
    let g = e.base.g();
    let mut derivs = Vec::with_capacity(order);
    for k in 1..=order {
        if k % 2 == 1 {
            derivs.push(g.map(|c| Jet::zero(c.vars(), c.order().saturating_sub(k as u32))));
            continue;
        }
        let m = k / 2;
        let d = e.derivative(m).ok_or(AmbientError::OrderExhausted { needed: 2 * m as u32, available: 2 * e.derivs.len() as u32 })?;
        let c = factorial(k as u32) * factorial(m as u32).recip().unwrap() * Scalar::ratio(-1, 2).pow(m as i32);
        derivs.push(d.scale(&c));
    }
    Ok(PoincareExpansion { n: e.n, base: e.base.clone(), derivs })
}
