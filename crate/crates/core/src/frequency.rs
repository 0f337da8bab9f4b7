//! A Laplace-Fourier point (tau, gamma, eta) with gamma >= 0; parametrizes
//! every boundary and interior symbol.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub tau: f64,
    pub gamma: f64,
    pub eta: Vec<f64>,
}

impl Frequency {
    pub fn new(tau: f64, gamma: f64, eta: Vec<f64>) -> Result<Self> {
        if gamma.is_nan() || gamma < 0.0 || !tau.is_finite() || !eta.iter().all(|x| x.is_finite()) {
            return Err(CoreError::Other(format!(
                "invalid frequency (tau = {tau}, gamma = {gamma})"
            )));
        }
        Ok(Self { tau, gamma, eta })
    }

    /// Convenience constructor for d = 2 (single tangential frequency).
    pub fn d2(tau: f64, gamma: f64, eta: f64) -> Self {
        Self::new(tau, gamma, vec![eta]).expect("finite frequency")
    }

    /// d = 1: no tangential frequencies.
    pub fn d1(tau: f64, gamma: f64) -> Self {
        Self::new(tau, gamma, vec![]).expect("finite frequency")
    }

    pub fn rho(&self) -> f64 {
        let e2: f64 = self.eta.iter().map(|x| x * x).sum();
        (self.tau * self.tau + self.gamma * self.gamma + e2).sqrt()
    }

    pub fn eta_norm(&self) -> f64 {
        self.eta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Unit vector zeta / |zeta|; None at the origin.
    pub fn hat(&self) -> Option<Frequency> {
        let r = self.rho();
        if r == 0.0 {
            return None;
        }
        Some(Frequency {
            tau: self.tau / r,
            gamma: self.gamma / r,
            eta: self.eta.iter().map(|x| x / r).collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Frequency {
        Frequency {
            tau: self.tau * s,
            gamma: self.gamma * s,
            eta: self.eta.iter().map(|x| x * s).collect(),
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Frequency {
        Frequency {
            tau: self.tau,
            gamma,
            eta: self.eta.clone(),
        }
    }
}
