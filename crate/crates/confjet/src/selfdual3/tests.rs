use super::*;
use crate::ambient::{expand_ambient, flat_ambient, to_poincare};
use crate::sample::{coords, random_jet, random_metric, random_metric_from};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn conformally_flat(order: u32, seed: u64) -> MetricJet {
    let vars = coords(3);
    let u = random_jet(&mut rng(seed), &vars, 3, 1, order, 0.5);
    MetricJet::flat(&vars, order, (3, 0)).conformal(&u.scale(&Scalar::from_int(2)).exp0().unwrap()).unwrap()
}

fn lorentzian(order: u32, seed: u64) -> MetricJet {
    random_metric_from(&mut rng(seed), &coords(3), (1, 2), 1, order, 0.4)
}

fn same_expansion(a: &PoincareExpansion, b: &PoincareExpansion, upto: usize) -> bool {
    (1..=upto).all(|k| tensor_agree(a.derivative(k).unwrap(), b.derivative(k).unwrap()))
}

#[test]
fn cotton2_vanishes_when_conformally_flat() {
    let g = conformally_flat(5, 1);
    assert!(cotton2(&g, 1).unwrap().tensor.is_zero());
}

#[test]
fn cotton2_identities() {
    for g in [random_metric(&mut rng(2), 3, 5, 0.5), lorentzian(5, 3)] {
        let c = cotton2(&g, 1).unwrap();
        assert!(!c.tensor.is_zero());
        assert!(c.is_symmetric());
        assert!(c.trace(&g).is_zero());
        assert!(c.divergence(&g).unwrap().is_zero());
        let flipped = cotton2(&g, -1).unwrap();
        assert_eq!(flipped.tensor, c.tensor.scale(&Scalar::from_int(-1)));
        assert_eq!(flipped.orientation, -1);
    }
}

#[test]
fn cotton2_preconditions() {
    assert_eq!(cotton2(&random_metric(&mut rng(4), 4, 4, 0.3), 1), Err(SelfDualError::Dimension(4)));
    let odd = random_metric_from(&mut rng(5), &coords(3), (2, 1), 1, 4, 0.3);
    assert_eq!(cotton2(&odd, 1), Err(SelfDualError::OddSignature((2, 1))));
    let g = random_metric(&mut rng(6), 3, 4, 0.3);
    let scaled = g.conformal(&Jet::constant(g.vars(), 4, Scalar::from_int(4))).unwrap();
    assert_eq!(cotton2(&scaled, 1), Err(SelfDualError::NotOrthonormal));
}

#[test]
fn expansion_low_orders() {
    let g = random_metric(&mut rng(7), 3, 5, 0.4);
    let p = selfdual_expand(&g, Duality::Plus, 1, 5).unwrap();
    assert!(p.derivative(1).unwrap().is_zero());
    let curv = curvature(&g).unwrap();
    let schouten_g = schouten(&g, &curv).unwrap();
    assert!(tensor_agree(p.derivative(2).unwrap(), &schouten_g.scale(&Scalar::from_int(-2))));
    let c = cotton2(&g, 1).unwrap().tensor;
    assert!(tensor_agree(p.derivative(3).unwrap(), &c.scale(&Scalar::from_int(2))));
    assert_eq!(p.residual_vanishing(5).unwrap(), Vanishing::AtLeastTruncation);
}

#[test]
fn duality_flip_changes_only_odd_orders() {
    let g = random_metric(&mut rng(8), 3, 6, 0.4);
    let a = selfdual_expand(&g, Duality::Plus, 1, 6).unwrap();
    let b = selfdual_expand(&g, Duality::Minus, 1, 6).unwrap();
    for k in 1..=6 {
        let x = a.derivative(k).unwrap();
        let y = b.derivative(k).unwrap();
        if k % 2 == 0 {
            assert!(tensor_agree(x, y), "k = {}", k);
        } else {
            assert!(tensor_agree(x, &y.scale(&Scalar::from_int(-1))), "k = {}", k);
        }
    }
    let c = selfdual_expand(&g, Duality::Minus, -1, 6).unwrap();
    assert!(same_expansion(&a, &c, 6));
}

#[test]
fn zero_third_order_matches_even_expansion() {
    let g = random_metric(&mut rng(9), 3, 6, 0.4);
    let zero = g.g().map(|c| Jet::zero(c.vars(), 3));
    let p = poincare_with_third(&g, &zero, 6).unwrap();
    let q = to_poincare(&expand_ambient(&g, 3, None).unwrap(), 6).unwrap();
    for k in [1, 2, 4, 5, 6] {
        assert!(tensor_agree(p.derivative(k).unwrap(), q.derivative(k).unwrap()), "k = {}", k);
    }
    assert!(p.derivative(3).unwrap().is_zero());
    assert_eq!(p.residual_vanishing(6).unwrap(), Vanishing::AtLeastTruncation);
}

#[test]
fn inadmissible_third_order_rejected() {
    let g = random_metric(&mut rng(10), 3, 5, 0.4);
    let bad = TensorJet::from_fn(3, &[Down, Down], |i| if i[0] == i[1] { Jet::one(g.vars(), 3) } else { Jet::zero(g.vars(), 3) });
    assert_eq!(poincare_with_third(&g, &bad, 5).unwrap_err(), SelfDualError::Inadmissible);
}

#[test]
fn conformally_flat_matches_closed_form() {
    let g = conformally_flat(6, 11);
    let closed = to_poincare(&flat_ambient(&g, None).unwrap(), 6).unwrap();
    for d in [Duality::Plus, Duality::Minus] {
        let p = selfdual_expand(&g, d, 1, 6).unwrap();
        assert!(same_expansion(&p, &closed, 6));
    }
}

#[test]
fn selfdual_output_passes_check() {
    for (g, d) in [(random_metric(&mut rng(12), 3, 6, 0.4), Duality::Plus), (lorentzian(6, 13), Duality::Minus)] {
        let p = selfdual_expand(&g, d, 1, 6).unwrap();
        let rep = selfdual_check(&p, d, 1, 6).unwrap();
        assert!(rep.passed(), "{:?}", rep.vanishing);
        assert_eq!(rep.full_vanishing, Vanishing::AtLeastTruncation);
        assert!(rep.predicted.is_zero());
        assert!(!cotton2(&g, 1).unwrap().tensor.is_zero());
        assert!(rep.star_involution);
        assert!(rep.s_injective);
        // the other duality is not self-dual
        let other = selfdual_check(&p, d.flip(), 1, 6).unwrap();
        assert_eq!(other.vanishing, Vanishing::Exactly(1));
        assert!(other.certificate_holds);
    }
}

#[test]
fn missing_cotton_data_leaves_first_order_weyl() {
    let g = random_metric(&mut rng(14), 3, 5, 0.4);
    let zero = g.g().map(|c| Jet::zero(c.vars(), 2));
    let p = poincare_with_third(&g, &zero, 5).unwrap();
    let c = cotton2(&g, 1).unwrap().tensor;
    for d in [Duality::Plus, Duality::Minus] {
        let rep = selfdual_check(&p, d, 1, 5).unwrap();
        assert_eq!(rep.vanishing, Vanishing::Exactly(1));
        assert_eq!(rep.full_vanishing, Vanishing::Exactly(1));
        assert!(rep.certificate_holds);
        assert!(tensor_agree(&rep.certificate, &c.scale(&Scalar::ratio(d.sign(), 4))));
        assert!(rep.s_injective);
    }
}

#[test]
fn gauss_codazzi_blocks() {
    let g = random_metric(&mut rng(15), 3, 5, 0.4);
    let p = selfdual_expand(&g, Duality::Plus, 1, 5).unwrap();
    assert!(gauss_codazzi_check(&p, 5).unwrap().all());
    let q = poincare_with_third(&g, &g.g().map(|c| Jet::zero(c.vars(), 2)), 5).unwrap();
    assert!(gauss_codazzi_check(&q, 5).unwrap().all());
}

#[test]
fn star_squares_to_one_on_lorentzian_slices() {
    let g = lorentzian(5, 16);
    let p = selfdual_expand(&g, Duality::Plus, -1, 5).unwrap();
    let rep = selfdual_check(&p, Duality::Plus, -1, 5).unwrap();
    assert!(rep.star_involution);
    assert!(rep.passed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cotton2_symmetric_trace_free_divergence_free(seed in 0u64..1000) {
        let g = random_metric(&mut rng(seed), 3, 4, 0.4);
        let c = cotton2(&g, 1).unwrap();
        prop_assert!(c.is_symmetric());
        prop_assert!(c.trace(&g).is_zero());
        prop_assert!(c.divergence(&g).unwrap().is_zero());
    }
}
