//! Three-dimensional self-dual Poincaré metrics: the symmetric Cotton
//! tensor, the `r`-side Einstein recursion with prescribed third-order data,
//! and the check that the opposite-duality Weyl tensor of `dr² + g_r`
//! vanishes.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ambient::{trace, trace_free, AmbientError, PoincareExpansion};
use crate::ambient_curvature::permutation_sign;
use crate::jet::{Jet, JetError, Vanishing, VarSet};
use crate::metric::{MetricError, MetricJet};
use crate::riemann::{conformal_base_tensors, curvature, raise, schouten, weyl, CurvatureError, LeviCivita};
use crate::scalar::{factorial, Scalar};
use crate::tensor::{Slot, SymTag, TensorJet};

use Slot::Down;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelfDualError {
    Dimension(usize),
    /// The number of negative directions is odd, so `*² = -1`.
    OddSignature((usize, usize)),
    NotOrthonormal,
    /// Third-order data that is not trace-free and divergence-free.
    Inadmissible,
    /// The linear solve at this `r`-order has no solution.
    Inconsistent(usize),
    Ambient(AmbientError),
}

impl From<AmbientError> for SelfDualError {
    fn from(e: AmbientError) -> Self {
        SelfDualError::Ambient(e)
    }
}

impl From<JetError> for SelfDualError {
    fn from(e: JetError) -> Self {
        SelfDualError::Ambient(e.into())
    }
}

impl From<MetricError> for SelfDualError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::NotOrthonormal => SelfDualError::NotOrthonormal,
            e => SelfDualError::Ambient(e.into()),
        }
    }
}

impl From<CurvatureError> for SelfDualError {
    fn from(e: CurvatureError) -> Self {
        match e {
            CurvatureError::Dimension(n) => SelfDualError::Dimension(n),
            CurvatureError::Jet(e) => e.into(),
        }
    }
}

impl fmt::Display for SelfDualError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelfDualError::Dimension(n) => write!(f, "self-duality needs n = 3, got {}", n),
            SelfDualError::OddSignature((p, q)) => write!(f, "signature ({}, {}) has an odd number of negative directions", p, q),
            SelfDualError::NotOrthonormal => write!(f, "g(0) is not orthonormal"),
            SelfDualError::Inadmissible => write!(f, "third-order data must be trace-free and divergence-free"),
            SelfDualError::Inconsistent(k) => write!(f, "no solution at r-order {}", k),
            SelfDualError::Ambient(e) => write!(f, "{}", e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duality {
    Plus,
    Minus,
}

impl Duality {
    pub fn sign(self) -> i64 {
        match self {
            Duality::Plus => 1,
            Duality::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Duality::Plus => Duality::Minus,
            Duality::Minus => Duality::Plus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Duality::Plus => "plus",
            Duality::Minus => "minus",
        }
    }
}

fn check_base(g: &MetricJet) -> Result<(), SelfDualError> {
    if g.dim() != 3 {
        return Err(SelfDualError::Dimension(g.dim()));
    }
    if g.signature().1 % 2 == 1 {
        return Err(SelfDualError::OddSignature(g.signature()));
    }
    if !g.is_orthonormal_at_origin() {
        return Err(SelfDualError::NotOrthonormal);
    }
    Ok(())
}

/// `μ_{i…} = orientation · sqrt|det g| · sgn(i…)`, all slots covariant.
pub fn volume_form(g: &MetricJet, orientation: i32) -> Result<TensorJet, SelfDualError> {
    let n = g.dim();
    let vol = g.volume_density()?;
    let vol = if orientation < 0 { -vol } else { vol };
    let zero = Jet::zero(g.vars(), vol.order());
    let valence = vec![Down; n];
    Ok(TensorJet::from_fn(n, &valence, |idx| match permutation_sign(idx) {
        0 => zero.clone(),
        1 => vol.clone(),
        _ => -vol.clone(),
    }))
}

/// `𝒞_ij = μ_i^kl C_jkl` with the orientation it was built for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cotton2Tensor {
    pub tensor: TensorJet,
    pub orientation: i32,
}

impl Cotton2Tensor {
    pub fn trace(&self, g: &MetricJet) -> Jet {
        trace(g, &self.tensor)
    }

    pub fn is_symmetric(&self) -> bool {
        let t = &self.tensor;
        (0..3).all(|i| (0..3).all(|j| t.get(&[i, j]) == t.get(&[j, i])))
    }

    /// `∇^j 𝒞_ij`.
    pub fn divergence(&self, g: &MetricJet) -> Result<TensorJet, SelfDualError> {
        let lc = LeviCivita::new(g)?;
        Ok(lc.trace(&lc.cov_deriv(&self.tensor)?, 1, 2))
    }
}

pub fn cotton2(g: &MetricJet, orientation: i32) -> Result<Cotton2Tensor, SelfDualError> {
    check_base(g)?;
    let c = conformal_base_tensors(g)?.c;
    let mu = volume_form(g, orientation)?;
    let mu_up = raise(g, &raise(g, &mu, 1), 2);
    let order = c.order().min(mu_up.order());
    let t = TensorJet::from_fn(3, &[Down, Down], |x| {
        let mut acc = Jet::zero(g.vars(), order);
        for k in 0..3 {
            for l in 0..3 {
                let m = mu_up.get(&[x[0], k, l]);
                let cc = c.get(&[x[1], k, l]);
                if !m.is_zero() && !cc.is_zero() {
                    acc = &acc + &(m * cc);
                }
            }
        }
        acc
    });
    Ok(Cotton2Tensor { tensor: t, orientation: if orientation < 0 { -1 } else { 1 } })
}

fn tensor_agree(a: &TensorJet, b: &TensorJet) -> bool {
    let o = a.order().min(b.order());
    a.comps().len() == b.comps().len() && a.comps().iter().zip(b.comps()).all(|(x, y)| x.truncate(o) == y.truncate(o))
}

/// The `r^k` coefficient of a jet in `(r, x…)` as a jet in `x`.
fn r_coeff(j: &Jet, k: u32, base: &Arc<VarSet>) -> Result<Jet, JetError> {
    let c = j.coeff_of_power(0, k);
    let map: Vec<Option<usize>> = (0..j.vars().len()).map(|i| i.checked_sub(1)).collect();
    c.remap(base, &map, c.order())
}

/// Poincaré expansion through `∂_r^orders g_r` with `∂_r³ g_r|₀ = third`,
/// solving `Ric(g₊) + 3g₊ = 0` one `r`-order at a time.
pub fn poincare_with_third(g: &MetricJet, third: &TensorJet, orders: usize) -> Result<PoincareExpansion, SelfDualError> {
    let n = g.dim();
    if n != 3 {
        return Err(SelfDualError::Dimension(n));
    }
    let x = g.order();
    if (orders as u32) > x {
        return Err(AmbientError::OrderExhausted { needed: orders as u32, available: x }.into());
    }
    if orders >= n {
        let tr = trace(g, third);
        let lc = LeviCivita::new(g)?;
        let div = lc.trace(&lc.cov_deriv(third)?, 1, 2);
        if !tr.truncate(x.saturating_sub(3)).is_zero() || !div.truncate(x.saturating_sub(4)).is_zero() {
            return Err(SelfDualError::Inadmissible);
        }
    }
    let base = g.vars();
    let zero_at = |k: usize| g.g().map(|c| Jet::zero(c.vars(), x - k as u32));
    let mut derivs: Vec<TensorJet> = (1..=orders).map(zero_at).collect();
    let nn = Scalar::from_int(n as i64);
    for k in 2..=orders {
        let target = x - k as u32;
        let p = PoincareExpansion::from_derivatives(g, derivs.clone());
        let res = p.einstein_residual(orders as u32)?;
        let kk = k as u32 - 2;
        let fact = Scalar::from_int(2) * factorial(k as u32 - 1);
        let b =
            TensorJet::from_fn(n, &[Down, Down], |i| r_coeff(res.get(&[i[0] + 1, i[1] + 1]), kk, base).expect("remap").scale(&fact).truncate(target));
        let tf_b = trace_free(g, &b);
        let tf = if k == n {
            if !tf_b.is_zero() {
                return Err(SelfDualError::Inconsistent(k));
            }
            third.truncate(target)
        } else {
            tf_b.scale(&Scalar::from_int(k as i64 - n as i64).recip().unwrap())
        };
        let t = if k != 2 * n {
            trace(g, &b).scale(&Scalar::from_int(k as i64 - 2 * n as i64).recip().unwrap())
        } else {
            if !trace(g, &b).is_zero() {
                return Err(SelfDualError::Inconsistent(k));
            }
            // ∂_r² block: -½ tr(g'') + ¼|g'|² + ½ tr(g')/r
            let c00 = r_coeff(res.get(&[0, 0]), kk, base)?.scale(&fact).truncate(target);
            c00.scale(&Scalar::from_int(k as i64 - 2).recip().unwrap())
        };
        let tn = t.scale(&nn.recip().unwrap());
        let d = TensorJet::from_fn(n, &[Down, Down], |i| (tf.get(i) + &(&tn * g.lower(i[0], i[1]))).truncate(target));
        derivs[k - 1] = d.with_symmetry(&[SymTag::Sym(0, 1)]).expect("symmetric");
    }
    Ok(PoincareExpansion::from_derivatives(g, derivs))
}

/// The `±` self-dual Poincaré expansion: third-order data `±2𝒞`.
pub fn selfdual_expand(g: &MetricJet, duality: Duality, orientation: i32, orders: usize) -> Result<PoincareExpansion, SelfDualError> {
    let c = cotton2(g, orientation)?;
    let third = c.tensor.scale(&Scalar::from_int(2 * duality.sign()));
    poincare_with_third(g, &third, orders)
}

/// `(*W)_abcd = ½ μ_ab^ρσ W_ρσcd`.
pub fn hodge_star(gb: &MetricJet, mu: &TensorJet, w: &TensorJet) -> TensorJet {
    let d = gb.dim();
    let mu_up = raise(gb, &raise(gb, mu, 2), 3);
    let half = Scalar::ratio(1, 2);
    let order = mu_up.order().min(w.order());
    TensorJet::from_fn(d, &[Down, Down, Down, Down], |x| {
        let mut acc = Jet::zero(gb.vars(), order);
        for p in 0..d {
            for q in 0..d {
                let m = mu_up.get(&[x[0], x[1], p, q]);
                let ww = w.get(&[p, q, x[2], x[3]]);
                if !m.is_zero() && !ww.is_zero() {
                    acc = &acc + &(m * ww);
                }
            }
        }
        acc.scale(&half)
    })
}

/// `s(W)_ij = W_0i0j`.
fn s_map(w: &TensorJet) -> TensorJet {
    TensorJet::from_fn(3, &[Down, Down], |i| w.get(&[0, i[0] + 1, 0, i[1] + 1]).clone())
}

fn r_vanishing(t: &TensorJet) -> Vanishing {
    t.comps().iter().map(|c| c.vanishing_order(0)).fold(Vanishing::AtLeastTruncation, |a, b| match (a, b) {
        (Vanishing::Exactly(x), Vanishing::Exactly(y)) => Vanishing::Exactly(x.min(y)),
        (Vanishing::Exactly(x), _) | (_, Vanishing::Exactly(x)) => Vanishing::Exactly(x),
        _ => Vanishing::AtLeastTruncation,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfDualReport {
    /// Joint order of `ḡ = dr² + g_r`; the Weyl tensor is known to two less.
    pub order: u32,
    /// `r`-vanishing of `s(W̄^∓)`.
    pub vanishing: Vanishing,
    /// `r`-vanishing of every component of `W̄^∓`.
    pub full_vanishing: Vanishing,
    /// `∂_r s(W̄^∓)` at `r = 0`.
    pub certificate: TensorJet,
    /// `-⅛ tf(∂_r³g_r) ± ¼𝒞` at `r = 0`.
    pub predicted: TensorJet,
    pub certificate_holds: bool,
    /// `** = 1` on `W̄`.
    pub star_involution: bool,
    /// At every `r`-order, `s(W̄^±) = 0` forces `W̄^± = 0`, for both signs.
    pub s_injective: bool,
}

impl SelfDualReport {
    /// `s(W̄^∓)` vanishes below the truncation and the certificate holds.
    pub fn passed(&self) -> bool {
        self.vanishing == Vanishing::AtLeastTruncation && self.certificate_holds
    }
}

fn half_sum(a: &TensorJet, b: &TensorJet, sign: i64) -> TensorJet {
    let half = Scalar::ratio(1, 2);
    let s = Scalar::from_int(sign);
    a.zip_with(b, |x, y| (x + &y.scale(&s)).scale(&half))
}

/// Checks that `W̄^∓ = ½(W̄ ∓ *W̄)` of `ḡ = dr² + g_r` vanishes, for the
/// `±` duality, using `ḡ` to joint order `order`.
pub fn selfdual_check(p: &PoincareExpansion, duality: Duality, orientation: i32, order: u32) -> Result<SelfDualReport, SelfDualError> {
    let g = p.base();
    check_base(g)?;
    let base = g.vars();
    let gb = p.compactified(order)?;
    let curv = curvature(&gb)?;
    let pb = schouten(&gb, &curv)?;
    let w = weyl(&gb, &curv.riemann, &pb);
    let mu = volume_form(&gb, orientation)?;
    let star = hodge_star(&gb, &mu, &w);
    let star_involution = tensor_agree(&hodge_star(&gb, &mu, &star), &w);
    let wm = half_sum(&w, &star, -duality.sign());
    let wp = half_sum(&w, &star, duality.sign());
    let sm = s_map(&wm);
    let vanishing = r_vanishing(&sm);
    let full_vanishing = r_vanishing(&wm);
    let top = w.order();
    let mut s_injective = true;
    for part in [&wm, &wp] {
        let s = s_map(part);
        for k in 0..=top {
            let s_zero = s.comps().iter().all(|c| c.coeff_of_power(0, k).is_zero());
            if s_zero && !part.comps().iter().all(|c| c.coeff_of_power(0, k).is_zero()) {
                s_injective = false;
            }
        }
    }
    let certificate = sm.try_map(|c| r_coeff(c, 1, base))?;
    let third = p.derivative(3).ok_or(AmbientError::OrderExhausted { needed: 3, available: p.orders().len() as u32 })?;
    let c2 = cotton2(g, orientation)?;
    let predicted = trace_free(g, third).scale(&Scalar::ratio(-1, 8)).add(&c2.tensor.scale(&Scalar::ratio(duality.sign(), 4)));
    let certificate_holds = tensor_agree(&certificate, &predicted);
    Ok(SelfDualReport { order, vanishing, full_vanishing, certificate, predicted, certificate_holds, star_involution, s_injective })
}

/// Which of the three curvature blocks of `dr² + g_r` match the
/// tangential, mixed and normal formulas in terms of `g_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussCodazzi {
    pub tangential: bool,
    pub mixed: bool,
    pub normal: bool,
}

impl GaussCodazzi {
    pub fn all(&self) -> bool {
        self.tangential && self.mixed && self.normal
    }
}

pub fn gauss_codazzi_check(p: &PoincareExpansion, order: u32) -> Result<GaussCodazzi, SelfDualError> {
    let n = p.n();
    let gb = p.compactified(order)?;
    let rb = curvature(&gb)?.riemann;
    // the slice metric on (x…, r) so that index i differentiates x^i
    let mut names: Vec<_> = p.base().vars().names().to_vec();
    names.push(alloc::string::String::from("r"));
    let vars = VarSet::new(names)?;
    let map: Vec<Option<usize>> = (0..=n).map(|i| Some(if i == 0 { n } else { i - 1 })).collect();
    let mv = |j: &Jet| j.remap(&vars, &map, j.order()).expect("same variables");
    let gr = MetricJet::new(TensorJet::from_fn(n, &[Down, Down], |i| mv(gb.lower(i[0] + 1, i[1] + 1))))?;
    let lc = LeviCivita::new(&gr)?;
    let r = lc.riemann()?;
    let g1 = gr.g().try_map(|c| c.diff(n))?;
    let g2 = g1.try_map(|c| c.diff(n))?;
    let dg1 = lc.cov_deriv(&g1)?;
    let quarter = Scalar::ratio(1, 4);
    let half = Scalar::ratio(1, 2);
    let rbar = |idx: [usize; 4]| mv(rb.get(&idx));
    let same = |a: &Jet, b: &Jet| {
        let o = a.order().min(b.order());
        a.truncate(o) == b.truncate(o)
    };
    let mut out = GaussCodazzi { tangential: true, mixed: true, normal: true };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let extra = (&(g1.get(&[i, l]) * g1.get(&[j, k])) - &(g1.get(&[i, k]) * g1.get(&[j, l]))).scale(&quarter);
                    let want = r.get(&[i, j, k, l]) + &extra;
                    out.tangential &= same(&rbar([i + 1, j + 1, k + 1, l + 1]), &want);
                }
                let want = (dg1.get(&[j, k, i]) - dg1.get(&[j, i, k])).scale(&half);
                // R̄_0jki with the free pair (k, i) as (k, l)
                out.mixed &= same(&rbar([0, j + 1, k + 1, i + 1]), &want);
            }
            let mut q = g2.get(&[i, j]).scale(&-half.clone());
            for a in 0..n {
                for b in 0..n {
                    q = &q + &(&(gr.upper(a, b) * g1.get(&[i, a])) * g1.get(&[j, b])).scale(&quarter);
                }
            }
            out.normal &= same(&rbar([0, i + 1, 0, j + 1]), &q);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
