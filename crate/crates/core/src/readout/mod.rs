//! Readout models: IQ projection, one- and two-dimensional Gaussian mixtures,
//! the amplitude-damping readout model, and the classification quantities
//! derived from them (posteriors, hardened outcomes, defect probabilities).

mod ampdamp;
mod fit;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, invalid, io, Error, Result};
use crate::numeric::{log_sum_exp, normal2_ln_pdf, normal_ln_pdf};

pub use ampdamp::{decay_fraction, fit_amplitude_damping, AmplitudeDampingModel};
pub use fit::{fit_three_state, fit_two_state, fit_two_state_with, FitBackend, MIN_CALIBRATION_SAMPLES};

/// One integrated readout voltage, serialized as `[I, Q]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct IqSample {
    pub i_volt: f64,
    pub q_volt: f64,
}

impl IqSample {
    pub fn new(i_volt: f64, q_volt: f64) -> Self {
        Self { i_volt, q_volt }
    }

    pub fn is_finite(&self) -> bool {
        self.i_volt.is_finite() && self.q_volt.is_finite()
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.i_volt, self.q_volt]
    }
}

impl From<[f64; 2]> for IqSample {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<IqSample> for [f64; 2] {
    fn from(z: IqSample) -> Self {
        z.as_array()
    }
}

/// Number of classes used when classifying a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum States {
    Two,
    Three,
}

impl States {
    pub fn count(self) -> usize {
        match self {
            States::Two => 2,
            States::Three => 3,
        }
    }
}

impl TryFrom<u8> for States {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            2 => Ok(States::Two),
            3 => Ok(States::Three),
            _ => Err(invalid(format!("state count must be 2 or 3, got {n}"))),
        }
    }
}

/// Projection of the IQ plane onto the axis joining the |0> and |1> centroids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// Unit vector pointing from the |0> centroid towards the |1> centroid.
    pub axis: [f64; 2],
    /// Subtracted after the dot product, so the |0> calibration centroid maps to 0.
    pub offset: f64,
}

impl Projection {
    pub fn project(&self, z: IqSample) -> f64 {
        self.axis[0] * z.i_volt + self.axis[1] * z.q_volt - self.offset
    }
}

/// Two-state mixture along the projection axis:
/// `P(z|j) = (1 - r_j) N(z; mu0, sigma) + r_j N(z; mu1, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture1D {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
    pub r0: f64,
    pub r1: f64,
}

fn ln_weighted(weight: f64, ln_density: f64) -> f64 {
    if weight <= 0.0 {
        f64::NEG_INFINITY
    } else {
        weight.ln() + ln_density
    }
}

impl GaussianMixture1D {
    fn weight_of_one(&self, state: usize) -> f64 {
        match state {
            0 => self.r0,
            1 => self.r1,
            _ => panic!("one-dimensional mixture has no state {state}"),
        }
    }

    /// `ln P(z|state)` with the fitted mixing weights.
    pub fn ln_pdf(&self, z: f64, state: usize) -> f64 {
        let r = self.weight_of_one(state);
        log_sum_exp(&[
            ln_weighted(1.0 - r, normal_ln_pdf(z, self.mu0, self.sigma)),
            ln_weighted(r, normal_ln_pdf(z, self.mu1, self.sigma)),
        ])
    }

    /// `ln P'(z|state)`: only the dominant peak of each state (r0 = 0, r1 = 1).
    pub fn dominant_ln_pdf(&self, z: f64, state: usize) -> f64 {
        let mean = if state == 0 { self.mu0 } else { self.mu1 };
        normal_ln_pdf(z, mean, self.sigma)
    }

    /// `P'(z|1 - s) / P'(z|s)`, the likelihood ratio of the opposite label.
    pub fn dominant_flip_ratio(&self, z: f64, assigned: u8) -> f64 {
        let s = assigned as usize;
        (self.dominant_ln_pdf(z, 1 - s) - self.dominant_ln_pdf(z, s)).exp()
    }
}

/// Three-state mixture in the IQ plane with a shared isotropic width:
/// `P(z|j) = sum_k amps[j][k] N(z; mu[k], sigma^2 I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture2D {
    pub mu: [[f64; 2]; 3],
    pub sigma: f64,
    pub amps: [[f64; 3]; 3],
}

impl GaussianMixture2D {
    pub fn ln_pdf(&self, z: IqSample, state: usize) -> f64 {
        let terms: Vec<f64> = (0..3)
            .map(|k| ln_weighted(self.amps[state][k], normal2_ln_pdf(z.as_array(), self.mu[k], self.sigma)))
            .collect();
        log_sum_exp(&terms)
    }
}

/// Fitted readout description of one qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub qubit_id: String,
    pub projection: Projection,
    pub mix1d: GaussianMixture1D,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix2d: Option<GaussianMixture2D>,
    /// When present, replaces `mix1d` as the two-state likelihood.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp_damp: Option<AmplitudeDampingModel>,
    /// Prior probabilities of |0>, |1>, |2>. Two-state classification
    /// renormalizes the first two entries.
    pub priors: [f64; 3],
}

pub const UNIFORM_PRIORS: [f64; 3] = [1.0 / 3.0; 3];

impl ReadoutModel {
    /// Ideal model with clouds at `(0,0)`, `(separation,0)` and
    /// `(separation/2, -separation)`, no state mixing and uniform priors.
    pub fn synthetic(qubit_id: impl Into<String>, separation: f64, sigma: f64) -> Self {
        let mu = [[0.0, 0.0], [separation, 0.0], [separation / 2.0, -separation]];
        Self {
            qubit_id: qubit_id.into(),
            projection: Projection {
                axis: [1.0, 0.0],
                offset: 0.0,
            },
            mix1d: GaussianMixture1D {
                mu0: 0.0,
                mu1: separation,
                sigma,
                r0: 0.0,
                r1: 1.0,
            },
            mix2d: Some(GaussianMixture2D {
                mu,
                sigma,
                amps: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            }),
            amp_damp: None,
            priors: UNIFORM_PRIORS,
        }
    }

    pub fn project(&self, z: IqSample) -> f64 {
        self.projection.project(z)
    }

    fn require_mix2d(&self) -> Result<&GaussianMixture2D> {
        self.mix2d
            .as_ref()
            .ok_or_else(|| invalid(format!("qubit {} has no three-state model", self.qubit_id)))
    }

    /// Log of the unnormalized joint `P(z|j) P(j)` for each class.
    fn ln_joint(&self, z: IqSample, states: States) -> Result<Vec<f64>> {
        match states {
            States::Two => {
                let zt = self.project(z);
                let norm = self.priors[0] + self.priors[1];
                Ok((0..2)
                    .map(|j| {
                        let ln_pdf = match &self.amp_damp {
                            Some(a) => a.ln_pdf(zt, j),
                            None => self.mix1d.ln_pdf(zt, j),
                        };
                        ln_weighted(self.priors[j] / norm, ln_pdf)
                    })
                    .collect())
            }
            States::Three => {
                let m = self.require_mix2d()?;
                Ok((0..3).map(|j| ln_weighted(self.priors[j], m.ln_pdf(z, j))).collect())
            }
        }
    }

    /// Posterior `P(j|z)` for each class; the result sums to one.
    pub fn posterior(&self, z: IqSample, states: States) -> Result<Vec<f64>> {
        let lj = self.ln_joint(z, states)?;
        let total = log_sum_exp(&lj);
        if !total.is_finite() {
            // Every class has vanishing likelihood: fall back to the priors.
            let norm: f64 = self.priors[..states.count()].iter().sum();
            return Ok(self.priors[..states.count()].iter().map(|p| p / norm).collect());
        }
        // 1 / sum_k exp(l_k - l_j) keeps exact ties at exactly 1/n.
        Ok(lj
            .iter()
            .map(|&l| {
                if l == f64::NEG_INFINITY {
                    0.0
                } else {
                    1.0 / lj.iter().map(|&k| (k - l).exp()).sum::<f64>()
                }
            })
            .collect())
    }

    /// Maximum-likelihood class; exact ties go to the lower index.
    pub fn harden(&self, z: IqSample, states: States) -> Result<u8> {
        let lj = self.ln_joint(z, states)?;
        let mut best = 0;
        for (j, &l) in lj.iter().enumerate().skip(1) {
            if l > lj[best] {
                best = j;
            }
        }
        Ok(best as u8)
    }

    /// True when the three-state classifier assigns |2>.
    pub fn leakage_flag(&self, z: IqSample) -> Result<bool> {
        Ok(self.harden(z, States::Three)? == 2)
    }

    /// Probability that the detector formed from `z_now` and `z_prev2` fires.
    pub fn defect_probability(&self, z_now: IqSample, z_prev2: IqSample) -> f64 {
        let a = self.posterior(z_now, States::Two).expect("two-state posterior");
        let b = self.posterior(z_prev2, States::Two).expect("two-state posterior");
        a[0] * b[1] + a[1] * b[0]
    }

    /// Draw an IQ sample for a qubit in `state` from the three-state mixture.
    pub fn sample_iq<R: Rng + ?Sized>(&self, state: u8, rng: &mut R) -> Result<IqSample> {
        let m = self.require_mix2d()?;
        let row = &m.amps[state as usize];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = 2;
        for (idx, &a) in row.iter().enumerate() {
            acc += a;
            if u < acc {
                k = idx;
                break;
            }
        }
        let nx: f64 = StandardNormal.sample(rng);
        let ny: f64 = StandardNormal.sample(rng);
        Ok(IqSample::new(m.mu[k][0] + m.sigma * nx, m.mu[k][1] + m.sigma * ny))
    }

    pub fn validate(&self) -> Result<()> {
        let ax = self.projection.axis;
        if ((ax[0] * ax[0] + ax[1] * ax[1]).sqrt() - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("{}: projection axis is not a unit vector", self.qubit_id)));
        }
        let psum: f64 = self.priors.iter().sum();
        if (psum - 1.0).abs() > 1e-9 || self.priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid(format!("{}: priors must be probabilities summing to 1", self.qubit_id)));
        }
        let m = &self.mix1d;
        if !(m.sigma > 0.0) || !(0.0..=1.0).contains(&m.r0) || !(0.0..=1.0).contains(&m.r1) {
            return Err(invalid(format!("{}: invalid one-dimensional mixture", self.qubit_id)));
        }
        if let Some(m2) = &self.mix2d {
            if !(m2.sigma > 0.0) {
                return Err(invalid(format!("{}: invalid two-dimensional mixture", self.qubit_id)));
            }
            for row in &m2.amps {
                if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 || row.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    return Err(invalid(format!("{}: amplitude rows must be normalized", self.qubit_id)));
                }
            }
        }
        Ok(())
    }
}

/// Calibration data: qubit id -> prepared state ("0", "1", "2") -> samples.
pub type Calibration = BTreeMap<String, BTreeMap<String, Vec<IqSample>>>;

pub fn read_calibration(path: &Path) -> Result<Calibration> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    from_json_str(path, &text)
}

pub fn write_calibration(path: &Path, calibration: &Calibration) -> Result<()> {
    let text = serde_json::to_string(calibration)?;
    std::fs::write(path, text).map_err(|e| io(path, e))
}

/// A set of per-qubit readout models as stored on disk.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSet {
    #[serde(default)]
    pub config_hash: String,
    pub models: BTreeMap<String, ReadoutModel>,
}

impl ModelSet {
    pub fn get(&self, qubit: &str) -> Result<&ReadoutModel> {
        self.models
            .get(qubit)
            .ok_or_else(|| invalid(format!("no readout model for qubit {qubit}")))
    }

    /// The same synthetic model for every listed qubit.
    pub fn synthetic<'a>(qubits: impl IntoIterator<Item = &'a str>, separation: f64, sigma: f64) -> Self {
        Self {
            config_hash: String::new(),
            models: qubits
                .into_iter()
                .map(|q| (q.to_string(), ReadoutModel::synthetic(q, separation, sigma)))
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        let set: ModelSet = from_json_str(path, &text)?;
        for m in set.models.values() {
            m.validate()?;
        }
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric() -> ReadoutModel {
        let mut m = ReadoutModel::synthetic("Z1", 2.0, 1.0);
        m.projection.offset = 1.0;
        m.mix1d.mu0 = -1.0;
        m.mix1d.mu1 = 1.0;
        m
    }

    #[test]
    fn posterior_at_mean_matches_density_ratio() {
        let m = symmetric();
        // z = 0 projects to -1, the |0> mean.
        let p = m.posterior(IqSample::new(0.0, 0.0), States::Two).unwrap();
        assert!((p[0] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn midpoint_is_a_tie_broken_low() {
        let m = symmetric();
        let z = IqSample::new(1.0, 5.0);
        let p = m.posterior(z, States::Two).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert_eq!(m.harden(z, States::Two).unwrap(), 0);
    }

    #[test]
    fn far_samples_do_not_underflow() {
        let m = symmetric();
        let p = m.posterior(IqSample::new(1e4, 0.0), States::Two).unwrap();
        assert_eq!(p[1], 1.0);
        let p3 = m.posterior(IqSample::new(-1e5, 3e5), States::Three).unwrap();
        assert!((p3.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leaked_cloud_is_flagged() {
        let m = ReadoutModel::synthetic("Z1", 6.0, 1.0);
        let z = IqSample::new(3.0, -6.0);
        assert!(m.posterior(z, States::Three).unwrap()[2] > 0.99);
        assert!(m.leakage_flag(z).unwrap());
        assert_eq!(m.harden(IqSample::new(8.0 * 1.0, 0.0), States::Two).unwrap(), 1);
    }

    #[test]
    fn defect_probability_fixtures() {
        let m = ReadoutModel::synthetic("Z1", 40.0, 1.0);
        let one = IqSample::new(40.0, 0.0);
        let zero = IqSample::new(0.0, 0.0);
        assert_eq!(m.defect_probability(one, zero), 1.0);
        let mid = IqSample::new(20.0, 0.0);
        assert_eq!(m.defect_probability(mid, mid), 0.5);
    }

    #[test]
    fn undamped_amplitude_model_matches_the_gaussian_posterior() {
        let gauss = symmetric();
        let mut damped = symmetric();
        damped.amp_damp = Some(AmplitudeDampingModel {
            mu0: -1.0,
            mu1: 1.0,
            alpha: 1.0,
            beta: 0.0,
        });
        for x in [-3.0, -0.4, 0.0, 0.7, 2.5] {
            let z = IqSample::new(x + 1.0, 0.3);
            let (a, b) = (gauss.posterior(z, States::Two).unwrap(), damped.posterior(z, States::Two).unwrap());
            assert!((a[0] - b[0]).abs() < 1e-12, "{x}: {a:?} vs {b:?}");
        }
        // Damping moves weight from |1> towards |0>-side samples.
        damped.amp_damp.as_mut().unwrap().beta = 0.5;
        let z = IqSample::new(1.0, 0.0);
        assert!(damped.posterior(z, States::Two).unwrap()[1] > gauss.posterior(z, States::Two).unwrap()[1]);
    }

    #[test]
    fn iq_sample_serializes_as_pair() {
        let z = IqSample::new(0.1, -2.5);
        assert_eq!(serde_json::to_string(&z).unwrap(), "[0.1,-2.5]");
    }

    #[test]
    fn model_json_round_trips_exactly() {
        let mut m = ReadoutModel::synthetic("Z3", 4.653, 0.987_654_321_123_456_7);
        m.mix1d.r0 = 1.0 / 3.0;
        m.amp_damp = Some(AmplitudeDampingModel {
            mu0: 0.1,
            mu1: std::f64::consts::PI,
            alpha: 1.0 / 7.0,
            beta: 0.2,
        });
        let text = serde_json::to_string(&m).unwrap();
        let back: ReadoutModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
