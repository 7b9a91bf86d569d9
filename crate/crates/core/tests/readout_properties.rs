use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use softdec_core::numeric::std_normal_cdf;
use softdec_core::readout::{IqSample, ReadoutModel, States};
use softdec_core::rng::substream;

fn mixed_model() -> ReadoutModel {
    let mut m = ReadoutModel::synthetic("Z2", 3.0, 0.8);
    m.mix1d.r0 = 0.02;
    m.mix1d.r1 = 0.93;
    m.priors = [0.3, 0.5, 0.2];
    m
}

proptest! {
    #[test]
    fn posteriors_are_distributions(i in -50.0f64..50.0, q in -50.0f64..50.0) {
        let m = mixed_model();
        for states in [States::Two, States::Three] {
            let p = m.posterior(IqSample::new(i, q), states).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn symmetric_defect_probability_agrees_with_hard_defect(a in -3.0f64..7.0, b in -3.0f64..7.0) {
        let m = ReadoutModel::synthetic("Z1", 4.0, 1.0);
        let (za, zb) = (IqSample::new(a, 0.0), IqSample::new(b, 0.0));
        // Exact ties at the midpoint are excluded.
        prop_assume!((a - 2.0).abs() > 1e-9 && (b - 2.0).abs() > 1e-9);
        let hard = m.harden(za, States::Two).unwrap() ^ m.harden(zb, States::Two).unwrap();
        prop_assert_eq!(m.defect_probability(za, zb) > 0.5, hard == 1);
    }
}

#[test]
fn harden_is_argmax_of_posterior() {
    let m = mixed_model();
    let mut rng = substream(1, "fuzz", 0);
    for _ in 0..100_000 {
        let z = IqSample::new(rng.random_range(-6.0..9.0), rng.random_range(-8.0..4.0));
        for states in [States::Two, States::Three] {
            let p = m.posterior(z, states).unwrap();
            let mut best = 0;
            for j in 1..p.len() {
                if p[j] > p[best] {
                    best = j;
                }
            }
            assert_eq!(m.harden(z, states).unwrap() as usize, best, "{z:?}");
        }
    }
}

#[test]
fn assignment_error_matches_gaussian_tail() {
    for d in [2.0, 3.0] {
        let m = ReadoutModel::synthetic("Z1", d, 1.0);
        let mut rng = substream(2, "assign", d as u64);
        let n = 200_000;
        let mut wrong = 0u32;
        for k in 0..n {
            let state = (k % 2) as u8;
            let x: f64 = StandardNormal.sample(&mut rng);
            let z = IqSample::new(state as f64 * d + x, 0.0);
            wrong += (m.harden(z, States::Two).unwrap() != state) as u32;
        }
        let expected = std_normal_cdf(-d / 2.0);
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        let got = wrong as f64 / n as f64;
        assert!((got - expected).abs() < 3.0 * se, "d={d}: {got} vs {expected}");
    }
}
