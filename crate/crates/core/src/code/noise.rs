//! Circuit-level noise parameters and the Pauli channels derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Error probabilities, coherence times (microseconds) and operation
/// durations (nanoseconds) of the circuit noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p_1q: f64,
    pub p_2q: f64,
    pub p_reset: f64,
    pub p_meas_qubit: f64,
    pub p_meas_class: f64,
    pub t1_us: f64,
    pub t2_us: f64,
    pub t_1q_ns: f64,
    pub t_2q_ns: f64,
    pub t_meas_ns: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::lower_bound()
    }
}

impl NoiseParams {
    /// Lower-bound parameters used for the noise-floor graph.
    pub fn lower_bound() -> Self {
        Self {
            p_1q: 0.5e-3,
            p_2q: 5e-3,
            p_reset: 0.0,
            p_meas_qubit: 1e-3,
            p_meas_class: 1e-3,
            t1_us: 30.0,
            t2_us: 30.0,
            t_1q_ns: 20.0,
            t_2q_ns: 60.0,
            t_meas_ns: 420.0,
        }
    }

    /// No gate, idle or measurement errors at all.
    pub fn noiseless() -> Self {
        Self {
            p_1q: 0.0,
            p_2q: 0.0,
            p_reset: 0.0,
            p_meas_qubit: 0.0,
            p_meas_class: 0.0,
            t1_us: f64::MAX,
            t2_us: f64::MAX,
            ..Self::lower_bound()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_1q", self.p_1q),
            ("p_2q", self.p_2q),
            ("p_reset", self.p_reset),
            ("p_meas_qubit", self.p_meas_qubit),
            ("p_meas_class", self.p_meas_class),
        ];
        for (name, p) in probs {
            if !(0.0..0.5).contains(&p) {
                return Err(invalid(format!("{name} = {p} is not in [0, 0.5)")));
            }
        }
        let times = [
            ("t1_us", self.t1_us),
            ("t2_us", self.t2_us),
            ("t_1q_ns", self.t_1q_ns),
            ("t_2q_ns", self.t_2q_ns),
            ("t_meas_ns", self.t_meas_ns),
        ];
        for (name, t) in times {
            if !(t > 0.0) {
                return Err(invalid(format!("{name} = {t} must be positive")));
            }
        }
        Ok(())
    }

    /// Pauli-twirled amplitude and phase damping over an idle of `t_ns`:
    /// probabilities of X, Y and Z.
    pub fn idle_twirl(&self, t_ns: f64) -> [f64; 3] {
        let t_us = t_ns * 1e-3;
        let damp = 1.0 - (-t_us / self.t1_us).exp();
        let dephase = 1.0 - (-t_us / self.t2_us).exp();
        let pxy = damp / 4.0;
        [pxy, pxy, dephase / 2.0 - damp / 4.0]
    }

    /// Duration of one parity-check round in nanoseconds.
    pub fn round_time_ns(&self, cz_layers: usize) -> f64 {
        2.0 * self.t_1q_ns + cz_layers as f64 * self.t_2q_ns + self.t_meas_ns
    }
}
