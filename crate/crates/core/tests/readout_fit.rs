//! Generator-recovery tests for the readout fits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use softdec_core::readout::{
    fit_amplitude_damping, fit_three_state, fit_two_state, fit_two_state_with, FitBackend, IqSample, States,
};
use softdec_core::rng::substream;
use softdec_core::Error;
use softdec_oracles::simpson;

fn cloud(rng: &mut ChaCha8Rng, n: usize, centers: &[([f64; 2], f64)], sigma: f64) -> Vec<IqSample> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut c = centers.last().unwrap().0;
            for &(mu, w) in centers {
                acc += w;
                if u < acc {
                    c = mu;
                    break;
                }
            }
            let x: f64 = StandardNormal.sample(rng);
            let y: f64 = StandardNormal.sample(rng);
            IqSample::new(c[0] + sigma * x, c[1] + sigma * y)
        })
        .collect()
}

#[test]
fn separated_clouds_are_recovered() {
    let mut rng = substream(1, "fit", 0);
    let c0 = cloud(&mut rng, 5000, &[([0.0, 0.0], 1.0)], 1.0);
    let c1 = cloud(&mut rng, 5000, &[([4.0, 0.0], 1.0)], 1.0);
    for backend in [FitBackend::Em, FitBackend::Histogram] {
        let m = fit_two_state_with("Z1", &c0, &c1, backend).unwrap();
        let g = m.mix1d;
        assert!(g.mu0.abs() < 0.05, "{backend:?} {g:?}");
        assert!((g.mu1 - 4.0).abs() < 0.05, "{backend:?} {g:?}");
        assert!((g.sigma - 1.0).abs() < 0.03, "{backend:?} {g:?}");
        assert!(g.r0 < 0.01 && g.r1 > 0.99, "{backend:?} {g:?}");
    }
}

#[test]
fn excited_state_mixing_is_recovered() {
    let mut rng = substream(2, "fit", 0);
    let c0 = cloud(&mut rng, 20_000, &[([0.0, 0.0], 1.0)], 1.0);
    let c1 = cloud(&mut rng, 20_000, &[([0.0, 0.0], 0.1), ([4.0, 0.0], 0.9)], 1.0);
    let g = fit_two_state("Z1", &c0, &c1).unwrap().mix1d;
    // Binomial standard error of the weight is about 0.002.
    assert!((g.r1 - 0.9).abs() < 0.01, "{g:?}");
}

#[test]
fn fit_is_rotation_invariant() {
    let mut rng = substream(3, "fit", 0);
    let c0 = cloud(&mut rng, 2000, &[([0.0, 0.0], 1.0)], 1.0);
    let c1 = cloud(&mut rng, 2000, &[([0.5, 0.0], 0.05), ([3.0, 1.0], 0.95)], 1.0);
    let base = fit_two_state("Z1", &c0, &c1).unwrap().mix1d;
    for angle in [0.3f64, 1.7, -2.5] {
        let (s, c) = angle.sin_cos();
        let rot = |v: &[IqSample]| -> Vec<IqSample> {
            v.iter()
                .map(|z| IqSample::new(c * z.i_volt - s * z.q_volt + 7.0, s * z.i_volt + c * z.q_volt - 2.0))
                .collect()
        };
        let g = fit_two_state("Z1", &rot(&c0), &rot(&c1)).unwrap().mix1d;
        let tol = 1e-6;
        assert!(((g.mu1 - g.mu0) - (base.mu1 - base.mu0)).abs() < tol, "{angle}");
        assert!((g.sigma - base.sigma).abs() < tol);
        assert!((g.r0 - base.r0).abs() < tol && (g.r1 - base.r1).abs() < tol);
    }
}

#[test]
fn identical_clouds_are_inseparable() {
    let mut rng = substream(4, "fit", 0);
    let c0 = cloud(&mut rng, 1000, &[([1.0, 1.0], 1.0)], 1.0);
    assert!(matches!(fit_two_state("Z1", &c0, &c0), Err(Error::InseparableStates(_))));
}

#[test]
fn three_state_amplitudes_are_recovered() {
    let mu = [[0.0, 0.0], [4.0, 0.0], [2.0, -4.0]];
    let amps = [[1.0, 0.0, 0.0], [0.05, 0.95, 0.0], [0.05, 0.15, 0.80]];
    let mut rng = substream(5, "fit3", 0);
    let clouds: Vec<Vec<IqSample>> = amps
        .iter()
        .map(|row| {
            let centers: Vec<([f64; 2], f64)> = mu.iter().copied().zip(row.iter().copied()).collect();
            cloud(&mut rng, 20_000, &centers, 1.0)
        })
        .collect();
    let m = fit_three_state("Z1", &clouds[0], &clouds[1], &clouds[2]).unwrap();
    let m2 = m.mix2d.unwrap();
    for j in 0..3 {
        for k in 0..3 {
            assert!((m2.amps[j][k] - amps[j][k]).abs() < 0.01, "{:?}", m2.amps);
        }
        assert!((m2.mu[j][0] - mu[j][0]).abs() < 0.05 && (m2.mu[j][1] - mu[j][1]).abs() < 0.05);
    }
    assert!((m2.sigma - 1.0).abs() < 0.02);

    // Pure clouds give the identity.
    let pure: Vec<Vec<IqSample>> = mu.iter().map(|&c| cloud(&mut rng, 5000, &[(c, 1.0)], 1.0)).collect();
    let m2 = fit_three_state("Z1", &pure[0], &pure[1], &pure[2]).unwrap().mix2d.unwrap();
    for j in 0..3 {
        assert!(m2.amps[j][j] > 0.995, "{:?}", m2.amps);
    }
    let z2 = IqSample::new(m2.mu[2][0], m2.mu[2][1]);
    let fitted = fit_three_state("Z1", &pure[0], &pure[1], &pure[2]).unwrap();
    assert!(fitted.posterior(z2, States::Three).unwrap()[2] > 0.99);
    assert_eq!(fitted.harden(z2, States::Three).unwrap(), 2);
    assert!(fitted.leakage_flag(z2).unwrap());
}

#[test]
fn coincident_second_excited_cloud_is_rejected() {
    let mut rng = substream(6, "fit3", 0);
    let c0 = cloud(&mut rng, 1000, &[([0.0, 0.0], 1.0)], 1.0);
    let c1 = cloud(&mut rng, 1000, &[([4.0, 0.0], 1.0)], 1.0);
    let c2 = cloud(&mut rng, 1000, &[([4.0, 0.0], 1.0)], 1.0);
    assert!(matches!(fit_three_state("Z1", &c0, &c1, &c2), Err(Error::InseparableStates(_))));
}

/// Integrated signal of a qubit that starts in |1> and decays after an
/// exponentially distributed time, sampled along the I axis.
fn decaying_cloud(rng: &mut ChaCha8Rng, n: usize, excited: bool, beta: f64) -> Vec<IqSample> {
    let (mu0, mu1, sigma, window) = (0.0, 4.0, 1.0, 1.0);
    (0..n)
        .map(|_| {
            let level = if !excited {
                mu0
            } else if beta == 0.0 {
                mu1
            } else {
                let t: f64 = Exp::new(beta / window).unwrap().sample(rng);
                let on = t.min(window);
                (mu1 * on + mu0 * (window - on)) / window
            };
            let x: f64 = StandardNormal.sample(rng);
            let y: f64 = StandardNormal.sample(rng);
            IqSample::new(level + sigma * x, sigma * y)
        })
        .collect()
}

#[test]
fn amplitude_damping_strength_is_recovered() {
    let mut rng = substream(7, "ampdamp", 0);
    let c0 = decaying_cloud(&mut rng, 20_000, false, 0.0);
    let c1 = decaying_cloud(&mut rng, 20_000, true, 0.2);
    let m = fit_amplitude_damping(&c0, &c1).unwrap();
    assert!((m.beta - 0.2).abs() < 0.03, "{m:?}");
    assert!((m.mu1 - m.mu0 - 4.0).abs() < 0.05, "{m:?}");
    for state in 0..2 {
        let total = simpson(|z| m.pdf(z, state), m.mu0 - 12.0, m.mu1 + 12.0, 20_000);
        assert!((total - 1.0).abs() < 1e-6, "state {state}: {total}");
    }

    let c1 = decaying_cloud(&mut rng, 20_000, true, 0.0);
    let m = fit_amplitude_damping(&c0, &c1).unwrap();
    assert!(m.beta < 0.05, "{m:?}");
}
