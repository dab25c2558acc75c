use lace_core::counterfactual::{self, interpolate, interpolate_raw, weight_histogram, ChannelFamily};
use lace_core::estimate::correlation_matrix;
use lace_core::prob::{wht_forward, xor_convolve_raw};
use lace_core::surface::CodeLayout;
use lace_core::{synthetic, EigenvalueVector, ProbDist};
use proptest::prelude::*;

fn reference() -> ProbDist {
    synthetic::correlated_reference(&CodeLayout::new(4, 5).unwrap()).unwrap()
}

fn high_weight_mass(p: &ProbDist) -> f64 {
    weight_histogram(p).iter().skip(3).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn powers_compose_by_convolution(
        rates in proptest::collection::vec(0.005f64..0.2, 5),
        s in 0.1f64..1.5,
        t in 0.1f64..1.5,
    ) {
        let l = wht_forward(&ProbDist::product(&rates).unwrap()).unwrap();
        let (a, fa) = interpolate_raw(&l, s).unwrap();
        let (b, fb) = interpolate_raw(&l, t).unwrap();
        let (ab, fab) = interpolate_raw(&l, s + t).unwrap();
        prop_assert_eq!(fa + fb + fab, 0);
        let composed = xor_convolve_raw(&a, &b).unwrap();
        for (x, y) in composed.iter().zip(&ab) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn fewer_high_weight_errors_at_smaller_t() {
    let l = wht_forward(&reference()).unwrap();
    let ts = [0.125, 0.25, 0.5, 0.75, 1.0];
    let masses: Vec<f64> = ts.iter().map(|&t| high_weight_mass(&interpolate(&l, t).unwrap().distribution)).collect();
    for w in masses.windows(2) {
        assert!(w[0] < w[1], "{masses:?}");
    }
}

#[test]
fn correlation_signs_are_kept() {
    let p = reference();
    let l = wht_forward(&p).unwrap();
    let base = correlation_matrix(&p).unwrap();
    let n = p.num_sites();
    for t in [0.25, 0.5, 0.75, 1.0] {
        let q = interpolate(&l, t).unwrap().distribution;
        let c = correlation_matrix(&q).unwrap();
        for i in 0..n {
            for j in 0..i {
                assert_eq!(
                    base.rho(i, j).signum(),
                    c.rho(i, j).signum(),
                    "t={t} ({i},{j}): {} vs {}",
                    base.rho(i, j),
                    c.rho(i, j)
                );
            }
        }
    }
}

#[test]
fn family_endpoints() {
    let p = ProbDist::product(&[0.02, 0.05, 0.1]).unwrap();
    let l = wht_forward(&p).unwrap();
    let family = ChannelFamily::build(&l, &[0.0, 1.0]).unwrap();
    assert_eq!(family.get(0.0).unwrap().distribution, ProbDist::delta(3, 0).unwrap());
    assert!(family.get(1.0).unwrap().distribution.tvd(&p).unwrap() < 1e-9);
}

#[test]
fn rate_targeting_inverts_average_rate() {
    let l = wht_forward(&reference()).unwrap();
    for target in [0.01, 0.03, 0.05] {
        let t = counterfactual::t_for_average_rate(&l, target).unwrap();
        let got = interpolate(&l, t).unwrap().distribution.mean_site_rate();
        assert!((got - target).abs() < 1e-6, "{target}: t={t} gives {got}");
    }
}

#[test]
fn negative_eigenvalues_are_floored_and_projected() {
    // eigenvalues of a non-physical "channel" with a negative entry
    let l = EigenvalueVector::new(2, vec![1.0, 0.8, -0.1, 0.5]).unwrap();
    let m = interpolate(&l, 0.5).unwrap();
    assert_eq!(m.log.floored, 1);
    assert!(m.distribution.values().iter().all(|&v| v >= 0.0));
    assert!((m.distribution.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
