//! Conformally invariant powers of the Laplacian from formal harmonic
//! extension of densities off `ρ = 0`, their closed form on Einstein
//! metrics, and the polynomials behind it.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ambient::{
    einstein_ambient, einstein_constant, expand_ambient, expand_ambient_continued, flat_ambient, AmbientError, AmbientExpansion, RhoSeries,
};
use crate::jet::Jet;
use crate::metric::MetricJet;
use crate::riemann::LeviCivita;
use crate::scalar::{binomial, factorial, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GjmsError {
    /// `k = 0`, or `k > n/2` for even `n` on a metric that is neither Einstein nor conformally flat.
    KOutOfRange {
        k: usize,
        n: usize,
    },
    /// Odd `n` where an even dimension is required, or `n < 3`.
    Dimension(usize),
    NotEinstein,
    /// Recursion and closed form of a Hahn polynomial disagree.
    HahnMismatch {
        m: usize,
        k: usize,
        n: usize,
    },
    Ambient(AmbientError),
}

impl From<AmbientError> for GjmsError {
    fn from(e: AmbientError) -> Self {
        GjmsError::Ambient(e)
    }
}

impl From<crate::jet::JetError> for GjmsError {
    fn from(e: crate::jet::JetError) -> Self {
        GjmsError::Ambient(e.into())
    }
}

impl fmt::Display for GjmsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GjmsError::KOutOfRange { k, n } => write!(f, "k = {} is outside the determined range for n = {}", k, n),
            GjmsError::Dimension(n) => write!(f, "not available in dimension {}", n),
            GjmsError::NotEinstein => write!(f, "metric is not Einstein"),
            GjmsError::HahnMismatch { m, k, n } => write!(f, "Hahn recursion and closed form disagree at m = {}, k = {}, n = {}", m, k, n),
            GjmsError::Ambient(e) => write!(f, "{}", e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicPath {
    /// Order-by-order solve against the ambient expansion.
    Generic,
    /// Three-term recursion in `Δ` for `g_ρ = (1 + λρ)² g`.
    Einstein,
}

impl HarmonicPath {
    pub fn name(self) -> &'static str {
        match self {
            HarmonicPath::Generic => "generic",
            HarmonicPath::Einstein => "einstein",
        }
    }
}

/// `∂_ρ^m f|ρ=0` for `m < k` and the obstruction `∂_ρ^(k-1)` of the
/// equation, for a density of weight `w = k - n/2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarmonicExtension {
    pub k: usize,
    pub weight: Scalar,
    pub coeffs: Vec<Jet>,
    pub obstruction: Jet,
    pub path: HarmonicPath,
}

fn check_k(g: &MetricJet, k: usize) -> Result<usize, GjmsError> {
    let n = g.dim();
    if n < 3 {
        return Err(GjmsError::Dimension(n));
    }
    if k == 0 {
        return Err(GjmsError::KOutOfRange { k, n });
    }
    Ok(n)
}

fn density_weight(n: usize, k: usize) -> Scalar {
    Scalar::ratio(2 * k as i64 - n as i64, 2)
}

/// Ambient expansion good through `ρ^k`.
fn expansion_for(g: &MetricJet, k: usize) -> Result<AmbientExpansion, GjmsError> {
    let n = g.dim();
    if n % 2 == 1 {
        return Ok(expand_ambient(g, k, None)?);
    }
    if k <= n / 2 {
        return Ok(expand_ambient_continued(g, k, None)?);
    }
    if let Ok(e) = einstein_ambient(g) {
        return Ok(e);
    }
    flat_ambient(g, None).map_err(|_| GjmsError::KOutOfRange { k, n })
}

/// Solves the harmonic extension equation order by order in `ρ`.
pub fn harmonic_coeffs_generic(g: &MetricJet, k: usize, f: &Jet) -> Result<HarmonicExtension, GjmsError> {
    let n = check_k(g, k)?;
    let x = g.order().min(f.order());
    if x < 2 * k as u32 {
        return Err(AmbientError::OrderExhausted { needed: 2 * k as u32, available: x }.into());
    }
    let e = expansion_for(g, k)?;
    let coeffs = e.taylor_coefficients(true);
    let take = coeffs.len().min(k + 1);
    let base = g.truncate(x);
    let trimmed: Vec<_> = coeffs[..take].iter().map(|c| c.truncate(x)).collect();
    let s = RhoSeries::from_taylor(&base, &trimmed, x)?;
    let m = &s.metric;
    let vars = m.vars().clone();
    let lc = LeviCivita::new(m)?;
    let d1 = s.d_rho(m.g())?;
    let mut tr = Jet::zero(&vars, d1.order());
    for i in 0..n {
        for j in 0..n {
            tr = &tr + &(m.upper(i, j) * d1.get(&[i, j]));
        }
    }
    let w = density_weight(n, k);
    let half_w = &w * &Scalar::ratio(1, 2);
    let lin = Scalar::from_int(2 * k as i64 - 2);
    let map: Vec<Option<usize>> = (0..n).map(Some).collect();
    let mut out = vec![f.truncate(x)];
    loop {
        let step = out.len() - 1;
        let mut big = Jet::zero(&vars, x);
        for (j, c) in out.iter().enumerate() {
            let lifted = c.remap(&vars, &map, c.order())?.shift_up(s.rho, j as u32);
            big = &big + &lifted.scale(&factorial(j as u32).recip().unwrap()).truncate(x);
        }
        let f1 = big.diff(s.rho)?;
        // ρ f'' vanishes below the weight of ρ
        let rho_f2 = if f1.order() < 2 { Jet::zero(&vars, f1.order()) } else { f1.diff(s.rho)?.shift_up(s.rho, 1) };
        let eq = &(&(&(&rho_f2.scale(&Scalar::from_int(-2)) + &f1.scale(&lin)) - &(&tr * &f1).shift_up(s.rho, 1)) + &lc.laplacian(&big)?)
            + &(&tr * &big).scale(&half_w);
        let c = s.coeff(&eq, step as u32)?.scale(&factorial(step as u32));
        if step == k - 1 {
            return Ok(HarmonicExtension { k, weight: w, coeffs: out, obstruction: c, path: HarmonicPath::Generic });
        }
        let denom = Scalar::from_int(-2 * (k as i64 - 1 - step as i64));
        out.push(c.scale(&denom.recip().unwrap()));
    }
}

/// The same extension for an Einstein metric from the recursion
/// `2(k-m-1) f^(m+1) + (Δ + λa_m) f^(m) + λ² b_m f^(m-1) = 0`.
pub fn harmonic_coeffs_einstein(g: &MetricJet, k: usize, f: &Jet) -> Result<HarmonicExtension, GjmsError> {
    let n = check_k(g, k)?;
    let lambda = einstein_constant(g).map_err(|_| GjmsError::NotEinstein)?;
    let lc = LeviCivita::new(g)?;
    let half_n = Scalar::ratio(n as i64, 2);
    let kk = Scalar::from_int(k as i64);
    let nn = Scalar::from_int(n as i64);
    let lambda2 = &lambda * &lambda;
    let tail = &nn * &(&kk - &half_n);
    let mut out = vec![f.truncate(f.order().min(g.order()))];
    let mut prev: Option<Jet> = None;
    for step in 0..k {
        let ms = Scalar::from_int(step as i64);
        let cur = out[step].clone();
        let a = &(&Scalar::from_int(4) * &(&ms * &(&(&kk - &ms) - &half_n))) + &tail;
        let mut v = &lc.laplacian(&cur)? + &cur.scale(&(&lambda * &a));
        if let Some(p) = &prev {
            let b = &ms * &(&(&Scalar::from_int(2 * (step as i64 - 1)) * &(&(&kk - &ms) + &Scalar::from_int(1 - n as i64))) + &tail);
            v = &v + &p.scale(&(&lambda2 * &b));
        }
        if step == k - 1 {
            return Ok(HarmonicExtension { k, weight: density_weight(n, k), coeffs: out, obstruction: v, path: HarmonicPath::Einstein });
        }
        prev = Some(cur);
        let denom = Scalar::from_int(-2 * (k as i64 - 1 - step as i64));
        out.push(v.scale(&denom.recip().unwrap()));
    }
    unreachable!("k >= 1")
}

/// Einstein metrics take the closed recursion, all others the generic solve.
pub fn harmonic_coeffs(g: &MetricJet, k: usize, f: &Jet) -> Result<HarmonicExtension, GjmsError> {
    check_k(g, k)?;
    if einstein_constant(g).is_ok() {
        harmonic_coeffs_einstein(g, k, f)
    } else {
        harmonic_coeffs_generic(g, k, f)
    }
}

/// `P_2k f = -2^(k-1) (k-1)! · obstruction`, normalized so the flat metric gives `(-Δ)^k f`.
pub fn calibration(k: usize) -> Scalar {
    -(&Scalar::from_int(2).pow(k as i32 - 1) * &factorial(k as u32 - 1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GjmsValue {
    /// `(P_2k f)(0)`.
    pub value: Scalar,
    pub jet: Jet,
    /// Weight of the input density; the output has weight `-n/2 - k`.
    pub weight: Scalar,
    pub path: HarmonicPath,
}

/// `P_2k f` at the origin. `path = None` picks the Einstein recursion when it applies.
pub fn gjms_apply(g: &MetricJet, k: usize, f: &Jet, path: Option<HarmonicPath>) -> Result<GjmsValue, GjmsError> {
    let h = match path {
        None => harmonic_coeffs(g, k, f)?,
        Some(HarmonicPath::Generic) => harmonic_coeffs_generic(g, k, f)?,
        Some(HarmonicPath::Einstein) => harmonic_coeffs_einstein(g, k, f)?,
    };
    let jet = h.obstruction.scale(&calibration(k));
    Ok(GjmsValue { value: jet.constant_term(), jet, weight: h.weight, path: h.path })
}

fn poly_mul(a: &[Scalar], b: &[Scalar]) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += &(x * y);
        }
    }
    out
}

fn poly_add(a: &[Scalar], b: &[Scalar]) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(); a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

fn poly_scale(a: &[Scalar], c: &Scalar) -> Vec<Scalar> {
    a.iter().map(|x| x * c).collect()
}

fn trim(mut p: Vec<Scalar>) -> Vec<Scalar> {
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

/// `c_j = (n/2 + j - 1)(n/2 - j)`.
pub fn branson_constant(n: usize, j: usize) -> Scalar {
    let h = Scalar::ratio(n as i64, 2);
    &(&h + &Scalar::from_int(j as i64 - 1)) * &(&h - &Scalar::from_int(j as i64))
}

/// Coefficients in ascending powers of `Δ` of `∏_{j=1}^k (-Δ + 2λc_j)`.
pub fn gjms_einstein_poly(lambda: &Scalar, n: usize, k: usize) -> Result<Vec<Scalar>, GjmsError> {
    if n < 3 {
        return Err(GjmsError::Dimension(n));
    }
    let two_l = &Scalar::from_int(2) * lambda;
    let mut p = vec![Scalar::one()];
    for j in 1..=k {
        p = poly_mul(&p, &[&two_l * &branson_constant(n, j), -Scalar::one()]);
    }
    Ok(p)
}

/// Applies a polynomial in `Δ` to `f`.
pub fn apply_laplacian_poly(g: &MetricJet, poly: &[Scalar], f: &Jet) -> Result<Jet, GjmsError> {
    let lc = LeviCivita::new(g)?;
    let mut power = f.clone();
    let mut acc = f.scale(&poly[0]);
    for c in &poly[1..] {
        power = lc.laplacian(&power)?;
        acc = &acc.truncate(power.order()) + &power.scale(c);
    }
    Ok(acc)
}

/// `(a)_m = a(a+1)…(a+m-1)`.
pub fn pochhammer(a: &Scalar, m: usize) -> Scalar {
    (0..m).fold(Scalar::one(), |acc, i| &acc * &(a + &Scalar::from_int(i as i64)))
}

/// `q_m(y)` for parameters `k, n`, ascending coefficients in `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HahnPoly {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub coeffs: Vec<Scalar>,
}

fn hahn_recursion(m: usize, k: usize, n: usize) -> Vec<Scalar> {
    let h = Scalar::ratio(n as i64, 2);
    let kk = Scalar::from_int(k as i64);
    let mut prev: Vec<Scalar> = vec![Scalar::zero()];
    let mut cur: Vec<Scalar> = vec![Scalar::one()];
    for j in 0..m {
        let js = Scalar::from_int(j as i64);
        let shift = &(&Scalar::from_int(2) * &(&js * &(&(&kk - &js) - &h))) + &(&Scalar::ratio(n as i64, 2) * &Scalar::from_int(k as i64 - 1));
        let a = poly_mul(&cur, &[-shift, Scalar::one()]);
        let c = &(&js * &(&js - &kk)) * &(&(&js - &Scalar::one() + &h) * &(&(&js - &Scalar::one() + &h) - &kk));
        let next = poly_add(&a, &poly_scale(&prev, &-c));
        prev = cur;
        cur = trim(next);
    }
    cur
}

fn hahn_closed(m: usize, k: usize, n: usize) -> Vec<Scalar> {
    let h = Scalar::ratio(n as i64, 2);
    let mut out = vec![Scalar::zero()];
    let mut prod = vec![Scalar::one()];
    for l in 0..=m {
        if l > 0 {
            prod = poly_mul(&prod, &[-Scalar::from_int((l * (l - 1)) as i64), Scalar::one()]);
        }
        let sign = if (m - l).is_multiple_of(2) { Scalar::one() } else { -Scalar::one() };
        let c = &(&(&sign * &pochhammer(&(&h + &Scalar::from_int(l as i64)), m - l)) * &pochhammer(&Scalar::from_int(k as i64 - m as i64), m - l))
            * &binomial(m as u32, l as u32);
        out = poly_add(&out, &poly_scale(&prod, &c));
    }
    trim(out)
}

/// `q_m` from the three-term recursion, checked against the dual Hahn closed form.
pub fn hahn_q(m: usize, k: usize, n: usize) -> Result<HahnPoly, GjmsError> {
    if m > k {
        return Err(GjmsError::KOutOfRange { k: m, n });
    }
    let r = hahn_recursion(m, k, n);
    if r != hahn_closed(m, k, n) {
        return Err(GjmsError::HahnMismatch { m, k, n });
    }
    Ok(HahnPoly { m, k, n, coeffs: r })
}

/// `2^k q_k(y)` rewritten in powers of `Δ` with `y = -(Δ - n(n/2 - 1))/2`.
pub fn hahn_in_laplacian(k: usize, n: usize) -> Result<Vec<Scalar>, GjmsError> {
    let q = hahn_q(k, k, n)?;
    let y = [&Scalar::ratio(n as i64, 2) * &Scalar::ratio(n as i64 - 2, 2), Scalar::ratio(-1, 2)];
    let mut out = vec![Scalar::zero()];
    let mut power = vec![Scalar::one()];
    for c in &q.coeffs {
        out = poly_add(&out, &poly_scale(&power, c));
        power = poly_mul(&power, &y);
    }
    Ok(trim(poly_scale(&out, &Scalar::from_int(2).pow(k as i32))))
}

/// Q-curvature of an Einstein metric with `Ric = 2λ(n-1)g`, `n` even.
pub fn q_curvature_einstein(lambda: &Scalar, n: usize) -> Result<Scalar, GjmsError> {
    if n % 2 == 1 || n < 4 {
        return Err(GjmsError::Dimension(n));
    }
    let two_l = &Scalar::from_int(2) * lambda;
    let prod = (1..n / 2).fold(Scalar::one(), |acc, j| &acc * &branson_constant(n, j));
    Ok(&(&two_l.pow(n as i32 / 2) * &Scalar::from_int(n as i64 - 1)) * &prod)
}

#[cfg(test)]
mod tests;
