use super::*;
use crate::metric::MetricSpec;
use crate::riemann::curvature;
use crate::sample::{coords, random_jet, random_metric};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn s(a: i64) -> Scalar {
    Scalar::from_int(a)
}

fn agree(a: &Jet, b: &Jet) -> bool {
    let o = a.order().min(b.order());
    a.truncate(o) == b.truncate(o)
}

fn sphere(n: usize, order: u32) -> MetricJet {
    let names: Vec<alloc::string::String> = (1..=n).map(|i| alloc::format!("x{}", i)).collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let r2 = names.iter().map(|s| alloc::format!("{}^2", s)).collect::<Vec<_>>().join("+");
    let c = alloc::format!("4/(1+{})^2", r2);
    let mut comps = Vec::new();
    for i in 0..n {
        for j in i..n {
            comps.push(((i, j), if i == j { c.clone() } else { alloc::string::String::from("0") }));
        }
    }
    let comps: Vec<((usize, usize), &str)> = comps.iter().map(|(k, v)| (*k, v.as_str())).collect();
    MetricSpec::from_expressions(&refs, (n, 0), order, &comps).load().unwrap()
}

/// `S²(1) × S²(1)`: Einstein, not conformally flat.
fn sphere_pair(order: u32) -> MetricJet {
    let a = "4/(1+x1^2+x2^2)^2";
    let b = "4/(1+x3^2+x4^2)^2";
    let mut comps = Vec::new();
    for i in 0..4 {
        for j in i..4 {
            comps.push((
                (i, j),
                if i != j {
                    "0"
                } else if i < 2 {
                    a
                } else {
                    b
                },
            ));
        }
    }
    MetricSpec::from_expressions(&["x1", "x2", "x3", "x4"], (4, 0), order, &comps).load().unwrap()
}

fn flat(n: usize, order: u32) -> MetricJet {
    MetricJet::flat(&coords(n), order, (n, 0))
}

fn poly(n: usize, order: u32, seed: u64) -> Jet {
    random_jet(&mut rng(seed), &coords(n), n, 0, order, 0.5)
}

#[test]
fn constants_extend_trivially_on_flat_space() {
    let g = flat(3, 8);
    let f = Jet::constant(g.vars(), 8, s(5));
    let h = harmonic_coeffs_generic(&g, 4, &f).unwrap();
    assert_eq!(h.coeffs.len(), 4);
    assert!(h.coeffs[1..].iter().all(|c| c.is_zero()));
    assert!(h.obstruction.is_zero());
    assert_eq!(h.weight, Scalar::ratio(5, 2));
}

#[test]
fn first_order_obstruction_is_laplacian_on_flat_space() {
    let g = flat(4, 6);
    let f = poly(4, 6, 1);
    let h = harmonic_coeffs_generic(&g, 1, &f).unwrap();
    let lap = LeviCivita::new(&g).unwrap().laplacian(&f).unwrap();
    assert!(agree(&h.obstruction, &lap));
    assert_eq!(h.coeffs.len(), 1);
}

#[test]
fn laplacian_of_squared_radius() {
    for n in [3usize, 4, 6] {
        let g = flat(n, 4);
        let vars = g.vars().clone();
        let f = (0..n).fold(Jet::zero(&vars, 4), |a, i| &a + &(&Jet::var(&vars, 4, i) * &Jet::var(&vars, 4, i)));
        for path in [HarmonicPath::Generic, HarmonicPath::Einstein] {
            assert_eq!(gjms_apply(&g, 1, &f, Some(path)).unwrap().value, s(-2 * n as i64));
        }
    }
}

#[test]
fn flat_calibration_gives_powers_of_laplacian() {
    let g = flat(3, 9);
    let lc = LeviCivita::new(&g).unwrap();
    for k in 1..=4 {
        let f = poly(3, 9, 10 + k as u64);
        let mut want = f.clone();
        for _ in 0..k {
            want = -lc.laplacian(&want).unwrap();
        }
        let got = gjms_apply(&g, k, &f, Some(HarmonicPath::Generic)).unwrap();
        assert!(agree(&got.jet, &want), "k = {}", k);
        assert_eq!(got.path, HarmonicPath::Generic);
    }
}

#[test]
fn yamabe_operator_at_first_order() {
    for (n, seed) in [(3usize, 21u64), (4, 22), (5, 23)] {
        let g = random_metric(&mut rng(seed), n, 4, 0.4);
        let f = poly(n, 4, seed + 100);
        let got = gjms_apply(&g, 1, &f, None).unwrap();
        assert_eq!(got.path, HarmonicPath::Generic);
        let lap = LeviCivita::new(&g).unwrap().laplacian(&f).unwrap();
        let scal = curvature(&g).unwrap().scalar;
        let c = Scalar::ratio(n as i64 - 2, 4 * (n as i64 - 1));
        let want = &-lap + &(&scal * &f).scale(&c);
        assert!(agree(&got.jet, &want));
    }
}

#[test]
fn einstein_paths_agree_and_match_product_formula() {
    for (g, k) in [(sphere(3, 7), 3usize), (sphere(4, 7), 3), (sphere_pair(7), 3), (sphere_pair(7), 2)] {
        let n = g.dim();
        let f = poly(n, 7, 31 + k as u64);
        let lambda = einstein_constant(&g).unwrap();
        let e = gjms_apply(&g, k, &f, None).unwrap();
        assert_eq!(e.path, HarmonicPath::Einstein);
        let gen = gjms_apply(&g, k, &f, Some(HarmonicPath::Generic)).unwrap();
        assert!(agree(&e.jet, &gen.jet), "n = {}, k = {}", n, k);
        let p = gjms_einstein_poly(&lambda, n, k).unwrap();
        assert!(agree(&e.jet, &apply_laplacian_poly(&g, &p, &f).unwrap()));
        let he = harmonic_coeffs_einstein(&g, k, &f).unwrap();
        let hg = harmonic_coeffs_generic(&g, k, &f).unwrap();
        for (a, b) in he.coeffs.iter().zip(&hg.coeffs) {
            assert!(agree(a, b));
        }
    }
}

#[test]
fn range_restrictions() {
    let g = random_metric(&mut rng(41), 4, 8, 0.3);
    let f = poly(4, 8, 42);
    assert_eq!(harmonic_coeffs(&g, 3, &f), Err(GjmsError::KOutOfRange { k: 3, n: 4 }));
    assert_eq!(harmonic_coeffs(&g, 0, &f), Err(GjmsError::KOutOfRange { k: 0, n: 4 }));
    assert!(harmonic_coeffs(&g, 2, &f).is_ok());
    assert_eq!(harmonic_coeffs_einstein(&g, 1, &f), Err(GjmsError::NotEinstein));
    let short = random_metric(&mut rng(43), 3, 3, 0.3);
    assert!(matches!(harmonic_coeffs(&short, 2, &poly(3, 3, 44)), Err(GjmsError::Ambient(AmbientError::OrderExhausted { .. }))));
}

/// `P(e^{2Υ}g)(e^{wΥ} f)(0) = P(g)f(0)` when `Υ(0) = 0`.
fn covariant_at_origin(n: usize, k: usize, seed: u64) {
    let order = 2 * k as u32 + 3;
    let g = random_metric(&mut rng(seed), n, order, 0.4);
    let u = random_jet(&mut rng(seed + 1), g.vars(), n, 1, order, 0.5);
    let f = poly(n, order, seed + 2);
    let w = density_weight(n, k);
    let gh = g.conformal(&u.scale(&s(2)).exp0().unwrap()).unwrap();
    let fh = &f * &u.scale(&w).exp0().unwrap();
    let a = gjms_apply(&g, k, &f, None).unwrap().value;
    let b = gjms_apply(&gh, k, &fh, None).unwrap().value;
    assert_eq!(a, b, "n = {}, k = {}", n, k);
}

#[test]
fn conformal_covariance_at_a_point() {
    covariant_at_origin(3, 1, 51);
    covariant_at_origin(3, 2, 52);
    covariant_at_origin(4, 2, 53);
    covariant_at_origin(5, 1, 54);
}

#[test]
fn constant_rescaling() {
    let g = random_metric(&mut rng(61), 3, 5, 0.4);
    let f = poly(3, 5, 62);
    let a = s(3);
    let gs = g.conformal(&Jet::constant(g.vars(), 5, &a * &a)).unwrap();
    let k = 2;
    let p = gjms_apply(&g, k, &f, None).unwrap().value;
    let ps = gjms_apply(&gs, k, &f, None).unwrap().value;
    assert_eq!(ps, &p * &a.pow(-2 * k as i32));
}

#[test]
fn einstein_polynomial_examples() {
    assert_eq!(gjms_einstein_poly(&Scalar::zero(), 5, 3).unwrap(), vec![s(0), s(0), s(0), s(-1)]);
    assert_eq!(gjms_einstein_poly(&Scalar::ratio(1, 2), 4, 2).unwrap(), vec![s(0), s(-2), s(1)]);
    let l = Scalar::ratio(3, 5);
    for (n, k) in [(3usize, 4usize), (6, 2), (7, 3)] {
        let p = gjms_einstein_poly(&l, n, k).unwrap();
        let want = (1..=k).fold((&s(2) * &l).pow(k as i32), |acc, j| &acc * &branson_constant(n, j));
        assert_eq!(p[0], want);
        assert_eq!(p.len(), k + 1);
    }
    assert_eq!(gjms_einstein_poly(&l, 2, 1), Err(GjmsError::Dimension(2)));
}

#[test]
fn hahn_boundary_cases() {
    assert_eq!(hahn_q(0, 3, 5).unwrap().coeffs, vec![s(1)]);
    for (k, n) in [(1usize, 3usize), (3, 4), (4, 7)] {
        let q = hahn_q(k, k, n).unwrap();
        let want = (1..=k).fold(vec![s(1)], |acc, j| poly_mul(&acc, &[s(-((j * (j - 1)) as i64)), s(1)]));
        assert_eq!(q.coeffs, want);
    }
    assert!(matches!(hahn_q(4, 3, 5), Err(GjmsError::KOutOfRange { .. })));
}

#[test]
fn hahn_bridge_to_einstein_polynomial() {
    for n in 3..=8 {
        for k in 1..=5 {
            assert_eq!(hahn_in_laplacian(k, n).unwrap(), gjms_einstein_poly(&Scalar::one(), n, k).unwrap(), "n = {}, k = {}", n, k);
        }
    }
}

#[test]
fn q_curvature_values() {
    assert_eq!(q_curvature_einstein(&Scalar::zero(), 4).unwrap(), s(0));
    assert_eq!(q_curvature_einstein(&Scalar::ratio(1, 2), 4).unwrap(), s(6));
    assert_eq!(q_curvature_einstein(&Scalar::ratio(1, 2), 6).unwrap(), s(120));
    assert_eq!(q_curvature_einstein(&Scalar::one(), 5), Err(GjmsError::Dimension(5)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hahn_recursion_matches_closed_form(k in 1usize..8, m in 0usize..8, n in 3usize..12) {
        let m = m % (k + 1);
        prop_assert!(hahn_q(m, k, n).is_ok());
    }
}
