//! Random rational jets with small coefficients.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::jet::{mono_from_exps, Jet, Mono, VarSet};
use crate::metric::MetricJet;
use crate::scalar::Scalar;
use crate::tensor::TensorJet;

/// Monomials in the first `nvars` variables with total degree in `lo..=hi`.
pub fn monomials(nvars: usize, lo: u32, hi: u32) -> Vec<Mono> {
    fn rec(k: usize, nvars: usize, left: u32, cur: &mut Vec<u32>, lo: u32, hi: u32, out: &mut Vec<Mono>) {
        if k == nvars {
            let d: u32 = cur.iter().sum();
            if d >= lo && d <= hi {
                out.push(mono_from_exps(cur));
            }
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(k + 1, nvars, left - e, cur, lo, hi, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, nvars, hi, &mut Vec::new(), lo, hi, &mut out);
    out.sort_unstable();
    out
}

pub fn small_scalar<R: Rng + ?Sized>(rng: &mut R) -> Scalar {
    Scalar::ratio(rng.gen_range(-2..=2), [1, 1, 2][rng.gen_range(0..3)])
}

/// Random jet in the first `nvars` variables, degrees `lo..=order`, each
/// monomial present with probability `density`.
pub fn random_jet<R: Rng + ?Sized>(rng: &mut R, vars: &Arc<VarSet>, nvars: usize, lo: u32, order: u32, density: f64) -> Jet {
    let mut terms: Vec<(Mono, Scalar)> = Vec::new();
    for m in monomials(nvars, lo, order) {
        if rng.gen_bool(density) {
            terms.push((m, small_scalar(rng)));
        }
    }
    Jet::from_terms(vars, order, terms)
}

/// `h + (random terms of degree >= lo)` with `h` the standard diagonal form.
pub fn random_metric_from<R: Rng + ?Sized>(
    rng: &mut R,
    vars: &Arc<VarSet>,
    signature: (usize, usize),
    lo: u32,
    order: u32,
    density: f64,
) -> MetricJet {
    let n = signature.0 + signature.1;
    let mut comps = alloc::vec![Jet::zero(vars, order); n * n];
    for i in 0..n {
        for j in i..n {
            let mut e = random_jet(rng, vars, n, lo.max(1), order, density);
            if i == j {
                let s = if i < signature.0 { 1 } else { -1 };
                e = &e + &Jet::constant(vars, order, Scalar::from_int(s));
            }
            comps[i * n + j] = e.clone();
            comps[j * n + i] = e;
        }
    }
    MetricJet::with_signature(TensorJet::from_matrix(n, comps), signature).expect("orthonormal at the origin")
}

/// Riemannian metric jet in coordinates `x1..xn`.
pub fn random_metric<R: Rng + ?Sized>(rng: &mut R, n: usize, order: u32, density: f64) -> MetricJet {
    let vars = coords(n);
    random_metric_from(rng, &vars, (n, 0), 1, order, density)
}

/// Variable set `x1..xn`.
pub fn coords(n: usize) -> Arc<VarSet> {
    VarSet::new((1..=n).map(|i| alloc::format!("x{}", i))).unwrap()
}
