//! Levi-Civita connection, curvature, and the conformal base tensors.
//!
//! Conventions: `R_ijkl = K(g_ik g_jl - g_il g_jk)` on a space of constant
//! curvature `K`, `Ric_jl = g^ik R_ijkl`, `Δ = ∇^k∇_k`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::jet::{Jet, JetError};
use crate::metric::MetricJet;
use crate::scalar::Scalar;
use crate::tensor::{Slot, SymTag, TensorJet};

use Slot::{Down, Up};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CurvatureError {
    Dimension(usize),
    Jet(JetError),
}

impl From<JetError> for CurvatureError {
    fn from(e: JetError) -> Self {
        CurvatureError::Jet(e)
    }
}

impl fmt::Display for CurvatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvatureError::Dimension(n) => write!(f, "not defined in dimension {}", n),
            CurvatureError::Jet(e) => write!(f, "{}", e),
        }
    }
}

fn sum(vars: &alloc::sync::Arc<crate::jet::VarSet>, order: u32, it: impl IntoIterator<Item = Jet>) -> Jet {
    it.into_iter().fold(Jet::zero(vars, order), |a, b| &a + &b)
}

/// First derivatives `∂_a g_ij`, indexed `[a][i*n+j]`.
fn metric_derivatives(m: &MetricJet) -> Result<Vec<Vec<Jet>>, JetError> {
    let n = m.dim();
    let mut out = Vec::with_capacity(n);
    for a in 0..n {
        let mut row = vec![Jet::zero(m.vars(), 0); n * n];
        for i in 0..n {
            for j in i..n {
                let d = m.lower(i, j).diff(a)?;
                row[i * n + j] = d.clone();
                row[j * n + i] = d;
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// The Levi-Civita connection of a metric jet, with cached symbols.
#[derive(Debug, Clone)]
pub struct LeviCivita {
    metric: MetricJet,
    dg: Vec<Vec<Jet>>,
    /// `Γ_ijk = ½(∂_i g_jk + ∂_j g_ik - ∂_k g_ij)`, lowered on `k`.
    lower: TensorJet,
    /// `Γ^k_ij`, stored with index order `[k, i, j]`.
    upper: TensorJet,
}

impl LeviCivita {
    pub fn new(m: &MetricJet) -> Result<Self, JetError> {
        let n = m.dim();
        let dg = metric_derivatives(m)?;
        let half = Scalar::ratio(1, 2);
        let order = m.order().checked_sub(1).ok_or(JetError::OrderExhausted)?;
        let mut lower = TensorJet::zeros(m.vars(), order, n, &[Down, Down, Down]);
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let v = (&(&dg[i][j * n + k] + &dg[j][i * n + k]) - &dg[k][i * n + j]).scale(&half);
                    lower.set(&[i, j, k], v.clone());
                    lower.set(&[j, i, k], v);
                }
            }
        }
        let mut upper = TensorJet::zeros(m.vars(), order, n, &[Up, Down, Down]);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = sum(m.vars(), order, (0..n).map(|l| m.upper(k, l) * lower.get(&[i, j, l])));
                    upper.set(&[k, i, j], v.clone());
                    upper.set(&[k, j, i], v);
                }
            }
        }
        Ok(LeviCivita { metric: m.clone(), dg, lower, upper })
    }

    pub fn metric(&self) -> &MetricJet {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// `Γ^k_ij` with index order `[k, i, j]`.
    pub fn christoffel(&self) -> &TensorJet {
        &self.upper
    }

    pub fn christoffel_lower(&self) -> &TensorJet {
        &self.lower
    }

    pub fn gamma(&self, k: usize, i: usize, j: usize) -> &Jet {
        self.upper.get(&[k, i, j])
    }

    /// Riemann tensor `R_ijkl`.
    pub fn riemann(&self) -> Result<TensorJet, JetError> {
        let n = self.dim();
        let m = &self.metric;
        let order = m.order().checked_sub(2).ok_or(JetError::OrderExhausted)?;
        // second derivatives ∂_a ∂_b g_ij
        let d2 = |i: usize, j: usize, a: usize, b: usize| -> Result<Jet, JetError> { self.dg[a][i * n + j].diff(b) };
        let half = Scalar::ratio(1, 2);
        let mut r = TensorJet::zeros(m.vars(), order, n, &[Down, Down, Down, Down]);
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for (p1, &(i, j)) in pairs.iter().enumerate() {
            for &(k, l) in &pairs[p1..] {
                let lin = &(&(&d2(i, l, j, k)? + &d2(j, k, i, l)?) - &d2(i, k, j, l)?) - &d2(j, l, i, k)?;
                let mut v = lin.scale(&half);
                for p in 0..n {
                    let a = self.lower.get(&[j, k, p]) * self.upper.get(&[p, i, l]);
                    let b = self.lower.get(&[j, l, p]) * self.upper.get(&[p, i, k]);
                    v = &v + &(&a - &b);
                }
                let nv = -&v;
                for (idx, val) in [
                    ([i, j, k, l], &v),
                    ([j, i, k, l], &nv),
                    ([i, j, l, k], &nv),
                    ([j, i, l, k], &v),
                    ([k, l, i, j], &v),
                    ([l, k, i, j], &nv),
                    ([k, l, j, i], &nv),
                    ([l, k, j, i], &v),
                ] {
                    r.set(&idx, val.clone());
                }
            }
        }
        Ok(r)
    }

    /// Ricci tensor from `∂Γ + ΓΓ`, without forming the Riemann tensor.
    pub fn ricci(&self) -> Result<TensorJet, JetError> {
        let n = self.dim();
        let vars = self.metric.vars();
        let order = self.metric.order().checked_sub(2).ok_or(JetError::OrderExhausted)?;
        // contracted symbols Γ^k_kp
        let trace: Vec<Jet> = (0..n).map(|p| sum(vars, order + 1, (0..n).map(|k| self.gamma(k, k, p).clone()))).collect();
        let mut ric = TensorJet::zeros(vars, order, n, &[Down, Down]);
        for j in 0..n {
            for l in j..n {
                let mut v = Jet::zero(vars, order);
                for k in 0..n {
                    v = &v + &self.gamma(k, j, l).diff(k)?;
                }
                v = &v - &trace[j].diff(l)?;
                for p in 0..n {
                    v = &v + &(&trace[p] * self.gamma(p, j, l));
                    for k in 0..n {
                        v = &v - &(self.gamma(k, l, p) * self.gamma(p, j, k));
                    }
                }
                ric.set(&[j, l], v.clone());
                ric.set(&[l, j], v);
            }
        }
        Ok(ric)
    }

    /// Covariant derivative; the new covariant slot is appended last.
    pub fn cov_deriv(&self, t: &TensorJet) -> Result<TensorJet, JetError> {
        let n = self.dim();
        let rank = t.rank();
        let mut valence = t.valence().to_vec();
        valence.push(Down);
        let mut out = Vec::with_capacity(n.pow(rank as u32 + 1));
        for idx in crate::tensor::MultiIndex::new(n, rank) {
            for m in 0..n {
                let mut v = t.get(&idx).diff(m)?;
                for (a, slot) in t.valence().iter().enumerate() {
                    let mut moved = idx.clone();
                    for p in 0..n {
                        moved[a] = p;
                        let comp = t.get(&moved);
                        if comp.is_zero() {
                            continue;
                        }
                        match slot {
                            Down => {
                                let g = self.gamma(p, m, idx[a]);
                                if !g.is_zero() {
                                    v = &v - &(g * comp);
                                }
                            }
                            Up => {
                                let g = self.gamma(idx[a], m, p);
                                if !g.is_zero() {
                                    v = &v + &(g * comp);
                                }
                            }
                        }
                    }
                }
                out.push(v);
            }
        }
        Ok(TensorJet::from_comps(n, &valence, out).unwrap())
    }

    /// Gradient of a scalar jet as a (0,1) tensor.
    pub fn gradient(&self, f: &Jet) -> Result<TensorJet, JetError> {
        let n = self.dim();
        let comps = (0..n).map(|i| f.diff(i)).collect::<Result<Vec<_>, _>>()?;
        Ok(TensorJet::from_comps(n, &[Down], comps).unwrap())
    }

    /// `Δf = g^ij (∂_i∂_j f - Γ^k_ij ∂_k f)`.
    pub fn laplacian(&self, f: &Jet) -> Result<Jet, JetError> {
        let n = self.dim();
        let df: Vec<Jet> = (0..n).map(|i| f.diff(i)).collect::<Result<_, _>>()?;
        let order = f.order().min(self.metric.order()).checked_sub(2).ok_or(JetError::OrderExhausted)?;
        let mut out = Jet::zero(f.vars(), order);
        for i in 0..n {
            for j in 0..n {
                let gij = self.metric.upper(i, j);
                if gij.is_zero() {
                    continue;
                }
                let mut h = df[i].diff(j)?;
                for k in 0..n {
                    h = &h - &(self.gamma(k, i, j) * &df[k]);
                }
                out = &out + &(gij * &h);
            }
        }
        Ok(out)
    }

    /// Contraction `g^ab T_{..a..b..}` of two covariant slots.
    pub fn trace(&self, t: &TensorJet, a: usize, b: usize) -> TensorJet {
        metric_trace(&self.metric, t, a, b)
    }

    /// Raises slot `a` with `g^-1`.
    pub fn raise(&self, t: &TensorJet, a: usize) -> TensorJet {
        raise(&self.metric, t, a)
    }
}

/// Contraction `g^ab T_{..a..b..}`; the two slots are removed.
pub fn metric_trace(m: &MetricJet, t: &TensorJet, a: usize, b: usize) -> TensorJet {
    let n = m.dim();
    let (a, b) = (a.min(b), a.max(b));
    let valence: Vec<Slot> = t.valence().iter().enumerate().filter(|(k, _)| *k != a && *k != b).map(|(_, s)| *s).collect();
    let order = t.order().min(m.order());
    TensorJet::from_fn(n, &valence, |rest| {
        let mut full: Vec<usize> = Vec::with_capacity(rest.len() + 2);
        let mut acc = Jet::zero(m.vars(), order);
        for p in 0..n {
            for q in 0..n {
                let gpq = m.upper(p, q);
                if gpq.is_zero() {
                    continue;
                }
                full.clear();
                let mut it = rest.iter();
                for k in 0..rest.len() + 2 {
                    full.push(if k == a {
                        p
                    } else if k == b {
                        q
                    } else {
                        *it.next().unwrap()
                    });
                }
                let c = t.get(&full);
                if !c.is_zero() {
                    acc = &acc + &(gpq * c);
                }
            }
        }
        acc
    })
}

/// Raises slot `a` of a tensor with `g^-1`.
pub fn raise(m: &MetricJet, t: &TensorJet, a: usize) -> TensorJet {
    let n = m.dim();
    let mut valence = t.valence().to_vec();
    valence[a] = Up;
    let order = t.order().min(m.order());
    TensorJet::from_fn(n, &valence, |idx| {
        let mut moved = idx.to_vec();
        let mut acc = Jet::zero(m.vars(), order);
        for p in 0..n {
            moved[a] = p;
            let c = t.get(&moved);
            let g = m.upper(idx[a], p);
            if !c.is_zero() && !g.is_zero() {
                acc = &acc + &(g * c);
            }
        }
        acc
    })
}

/// Riemann tensor, Ricci tensor and scalar curvature.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub riemann: TensorJet,
    pub ricci: TensorJet,
    pub scalar: Jet,
}

pub fn christoffel(m: &MetricJet) -> Result<TensorJet, JetError> {
    Ok(LeviCivita::new(m)?.upper)
}

pub fn curvature(m: &MetricJet) -> Result<Curvature, JetError> {
    let lc = LeviCivita::new(m)?;
    let riemann = lc.riemann()?;
    let ricci = metric_trace(m, &riemann, 0, 2).with_symmetry(&[SymTag::Sym(0, 1)]).expect("Ricci is symmetric");
    let scalar = metric_trace(m, &ricci, 0, 1).comps()[0].clone();
    Ok(Curvature { riemann, ricci, scalar })
}

/// Schouten `P`, Cotton `C_ijk = P_ij,k - P_ik,j`, Weyl `W`, Bach
/// `B_ij = C_ijk,^k - P^kl W_kijl`.
#[derive(Debug, Clone)]
pub struct BaseTensors {
    pub p: TensorJet,
    pub c: TensorJet,
    pub w: TensorJet,
    pub b: TensorJet,
}

pub fn schouten(m: &MetricJet, curv: &Curvature) -> Result<TensorJet, CurvatureError> {
    let n = m.dim();
    if n < 3 {
        return Err(CurvatureError::Dimension(n));
    }
    let k = Scalar::ratio(1, 2 * (n as i64 - 1));
    let inv = Scalar::ratio(1, n as i64 - 2);
    let sg = curv.scalar.scale(&k);
    Ok(TensorJet::from_fn(n, &[Down, Down], |i| (curv.ricci.get(i) - &(&sg * m.lower(i[0], i[1]))).scale(&inv)))
}

/// `W = R - (P ⊙ g)` with `(P ⊙ g)_ijkl = P_ik g_jl + P_jl g_ik - P_il g_jk - P_jk g_il`.
pub fn weyl(m: &MetricJet, riemann: &TensorJet, p: &TensorJet) -> TensorJet {
    let n = m.dim();
    TensorJet::from_fn(n, &[Down, Down, Down, Down], |x| {
        let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
        let pg = &(&(p.get(&[i, k]) * m.lower(j, l)) + &(p.get(&[j, l]) * m.lower(i, k)))
            - &(&(p.get(&[i, l]) * m.lower(j, k)) + &(p.get(&[j, k]) * m.lower(i, l)));
        riemann.get(x) - &pg
    })
}

pub fn conformal_base_tensors(m: &MetricJet) -> Result<BaseTensors, CurvatureError> {
    let n = m.dim();
    if n < 3 {
        return Err(CurvatureError::Dimension(n));
    }
    let lc = LeviCivita::new(m)?;
    let curv = curvature(m)?;
    let p = schouten(m, &curv)?;
    let dp = lc.cov_deriv(&p)?;
    let c = TensorJet::from_fn(n, &[Down, Down, Down], |x| dp.get(&[x[0], x[1], x[2]]) - dp.get(&[x[0], x[2], x[1]]));
    let w = weyl(m, &curv.riemann, &p);
    let divc = lc.trace(&lc.cov_deriv(&c)?, 2, 3);
    let pup = lc.raise(&lc.raise(&p, 0), 1);
    let b = TensorJet::from_fn(n, &[Down, Down], |x| {
        let (i, j) = (x[0], x[1]);
        let mut v = divc.get(&[i, j]).clone();
        for k in 0..n {
            for l in 0..n {
                let a = pup.get(&[k, l]);
                let ww = w.get(&[k, i, j, l]);
                if !a.is_zero() && !ww.is_zero() {
                    v = &v - &(a * ww);
                }
            }
        }
        v
    });
    Ok(BaseTensors { p, c, w, b })
}

pub fn laplacian(f: &Jet, m: &MetricJet) -> Result<Jet, JetError> {
    LeviCivita::new(m)?.laplacian(f)
}

pub fn cov_deriv(t: &TensorJet, m: &MetricJet) -> Result<TensorJet, JetError> {
    LeviCivita::new(m)?.cov_deriv(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricSpec;
    use crate::sample::{coords, random_jet, random_metric};
    use crate::tensor::MultiIndex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere3(order: u32) -> MetricJet {
        let c = "4/(1+x^2+y^2+z^2)^2";
        MetricSpec::from_expressions(
            &["x", "y", "z"],
            (3, 0),
            order,
            &[((0, 0), c), ((1, 1), c), ((2, 2), c), ((0, 1), "0"), ((0, 2), "0"), ((1, 2), "0")],
        )
        .load()
        .unwrap()
    }

    fn zero_upto(t: &TensorJet) -> bool {
        t.is_zero()
    }

    #[test]
    fn flat_is_flat() {
        let v = coords(3);
        let m = MetricJet::flat(&v, 4, (2, 1));
        let lc = LeviCivita::new(&m).unwrap();
        assert!(lc.christoffel().is_zero());
        assert!(lc.riemann().unwrap().is_zero());
        let bt = conformal_base_tensors(&m).unwrap();
        assert!(bt.p.is_zero() && bt.c.is_zero() && bt.w.is_zero() && bt.b.is_zero());
    }

    #[test]
    fn conformally_flat_plane_symbols() {
        // g = e^{2x} δ: Γ^k_ij = δ^k_i φ_j + δ^k_j φ_i - δ_ij φ^k with φ = x
        let v = coords(2);
        let e = Jet::var(&v, 5, 0).scale(&Scalar::from_int(2)).exp0().unwrap();
        let z = Jet::zero(&v, 5);
        let m = MetricJet::new(TensorJet::from_matrix(2, vec![e.clone(), z.clone(), z, e])).unwrap();
        let gam = christoffel(&m).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let phi = |a: usize| (a == 0) as i64;
                    let want = (k == i) as i64 * phi(j) + (k == j) as i64 * phi(i) - (i == j) as i64 * phi(k);
                    assert_eq!(gam.get(&[k, i, j]), &Jet::constant(&v, 4, Scalar::from_int(want)), "{} {} {}", k, i, j);
                }
            }
        }
    }

    #[test]
    fn quadratic_metric_has_vanishing_symbols_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = coords(3);
        let m = crate::sample::random_metric_from(&mut rng, &v, (3, 0), 2, 4, 0.5);
        assert!(christoffel(&m).unwrap().at_origin().iter().all(Scalar::is_zero));
    }

    #[test]
    fn round_sphere_is_einstein() {
        let m = sphere3(5);
        let curv = curvature(&m).unwrap();
        let two_g = m.g().scale(&Scalar::from_int(2)).truncate(3);
        assert!(zero_upto(&curv.ricci.sub(&two_g)));
        assert_eq!(curv.scalar, Jet::constant(m.vars(), 3, Scalar::from_int(6)));
        // R_ijkl = g_ik g_jl - g_il g_jk
        for x in MultiIndex::new(3, 4) {
            let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
            let want = &(m.lower(i, k) * m.lower(j, l)) - &(m.lower(i, l) * m.lower(j, k));
            assert_eq!(curv.riemann.get(&x), &want.truncate(3));
        }
        let bt = conformal_base_tensors(&m).unwrap();
        assert_eq!(bt.p.comps(), m.g().scale(&Scalar::ratio(1, 2)).truncate(3).comps());
    }

    #[test]
    fn algebraic_and_differential_bianchi() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 4] {
            let m = random_metric(&mut rng, n, 5, 0.4);
            let lc = LeviCivita::new(&m).unwrap();
            let r = lc.riemann().unwrap();
            for x in MultiIndex::new(n, 4) {
                let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
                assert!((r.get(&[i, j, k, l]) + r.get(&[j, i, k, l])).is_zero());
                assert_eq!(r.get(&[i, j, k, l]), r.get(&[k, l, i, j]));
                let cyc = &(r.get(&[i, j, k, l]) + r.get(&[i, k, l, j])) + r.get(&[i, l, j, k]);
                assert!(cyc.is_zero());
            }
            let dr = lc.cov_deriv(&r).unwrap();
            for x in MultiIndex::new(n, 5) {
                let (i, j, k, l, mm) = (x[0], x[1], x[2], x[3], x[4]);
                let s = &(dr.get(&[i, j, k, l, mm]) + dr.get(&[j, mm, k, l, i])) + dr.get(&[mm, i, k, l, j]);
                assert!(s.is_zero());
            }
            // Ricci two ways, contracted Bianchi
            let curv = curvature(&m).unwrap();
            assert_eq!(curv.ricci.comps(), lc.ricci().unwrap().comps());
            let div = lc.trace(&lc.cov_deriv(&curv.ricci).unwrap(), 1, 2);
            let ds = lc.gradient(&curv.scalar).unwrap().scale(&Scalar::ratio(1, 2));
            assert!(div.sub(&ds).is_zero());
        }
    }

    #[test]
    fn weyl_bach_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_metric(&mut rng, 4, 5, 0.3);
        let bt = conformal_base_tensors(&m).unwrap();
        let lc = LeviCivita::new(&m).unwrap();
        for (a, b) in [(0, 2), (0, 3), (1, 2), (1, 3), (0, 1)] {
            assert!(lc.trace(&bt.w, a, b).is_zero());
        }
        assert_eq!(bt.b, bt.b.transpose(0, 1));
        assert!(lc.trace(&bt.b, 0, 1).is_zero());
        assert!(!bt.b.is_zero());
        let m3 = random_metric(&mut rng, 3, 4, 0.5);
        let bt3 = conformal_base_tensors(&m3).unwrap();
        assert!(bt3.w.is_zero());
        assert!(!bt3.c.is_zero());
        let m2 = random_metric(&mut rng, 2, 3, 0.5);
        assert_eq!(conformal_base_tensors(&m2).unwrap_err(), CurvatureError::Dimension(2));
    }

    #[test]
    fn covariant_derivative_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_metric(&mut rng, 3, 4, 0.5);
        let lc = LeviCivita::new(&m).unwrap();
        assert!(lc.cov_deriv(m.g()).unwrap().is_zero());
        let f = random_jet(&mut rng, m.vars(), 3, 0, 4, 0.6);
        let grad = lc.gradient(&f).unwrap();
        for i in 0..3 {
            assert_eq!(grad.get(&[i]), &f.diff(i).unwrap());
        }
        let hess = lc.cov_deriv(&grad).unwrap();
        assert_eq!(hess, hess.transpose(0, 1));
    }

    #[test]
    fn laplacian_examples_and_divergence_form() {
        let v = coords(3);
        let m = MetricJet::flat(&v, 4, (3, 0));
        let x = Jet::var(&v, 4, 0);
        assert_eq!(laplacian(&(&x * &x), &m).unwrap(), Jet::constant(&v, 2, Scalar::from_int(2)));
        let r2 = (0..3).map(|i| Jet::var(&v, 4, i)).fold(Jet::zero(&v, 4), |a, b| &a + &(&b * &b));
        assert_eq!(laplacian(&r2, &m).unwrap(), Jet::constant(&v, 2, Scalar::from_int(6)));

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_metric(&mut rng, 3, 5, 0.4);
        let f = random_jet(&mut rng, m.vars(), 3, 0, 5, 0.5);
        let vol = m.volume_density().unwrap();
        let volinv = vol.invert().unwrap();
        let mut div = Jet::zero(m.vars(), 3);
        for i in 0..3 {
            let mut flux = Jet::zero(m.vars(), 4);
            for j in 0..3 {
                flux = &flux + &(&(&vol * m.upper(i, j)) * &f.diff(j).unwrap());
            }
            div = &div + &flux.diff(i).unwrap();
        }
        assert_eq!(laplacian(&f, &m).unwrap(), &volinv * &div);
    }
}
