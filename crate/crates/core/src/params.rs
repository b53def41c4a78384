//! Physical scenario and solved attack parameters.

use std::hash::{DefaultHasher, Hash, Hasher};

use crate::error::{Error, Result};

/// The physical scenario: source, channel, detector and block size.
///
/// Fields are validated once at construction; every formula downstream
/// assumes they are in range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    mu: f64,
    alpha: f64,
    eta: f64,
    r_c: f64,
    m: u64,
}

impl SystemParams {
    pub fn new(mu: f64, alpha: f64, eta: f64, r_c: f64, m: u64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParam { name: "mu", value: mu, reason: "must be > 0" });
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParam { name: "alpha", value: alpha, reason: "must lie in (0, 1]" });
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParam { name: "eta", value: eta, reason: "must lie in (0, 1]" });
        }
        if !(0.0..1.0).contains(&r_c) {
            return Err(Error::InvalidParam { name: "r_c", value: r_c, reason: "must lie in [0, 1)" });
        }
        if m == 0 {
            return Err(Error::InvalidParam { name: "m", value: 0.0, reason: "must be >= 1" });
        }
        Ok(Self { mu, alpha, eta, r_c, m })
    }

    /// Mean photons per pulse.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Channel transmittivity.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Detector quantum efficiency.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Intrinsic error probability per sifted bit.
    pub fn r_c(&self) -> f64 {
        self.r_c
    }

    /// Pulses per block.
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Mean number of photons reaching and registering at Bob, `eta * mu * alpha`.
    pub fn detected_mean(&self) -> f64 {
        self.eta * self.mu * self.alpha
    }

    pub fn with_mu(self, mu: f64) -> Result<Self> {
        Self::new(mu, self.alpha, self.eta, self.r_c, self.m)
    }

    pub fn with_m(self, m: u64) -> Result<Self> {
        Self::new(self.mu, self.alpha, self.eta, self.r_c, m)
    }

    /// Stable identity of the scenario, used to refuse comparisons between
    /// results computed for different parameters.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.mu.to_bits().hash(&mut h);
        self.alpha.to_bits().hash(&mut h);
        self.eta.to_bits().hash(&mut h);
        self.r_c.to_bits().hash(&mut h);
        self.m.hash(&mut h);
        h.finish()
    }
}

/// Eve's blocking and measuring probabilities, stored raw.
///
/// Values outside `[0, 1]` are kept as computed so that feasibility maps
/// show how far a constraint is violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackPlan {
    pub p_b: f64,
    pub p_m: f64,
    pub feasible_pb: bool,
    pub feasible_pm: bool,
}

impl AttackPlan {
    pub fn new(p_b: f64, p_m: f64) -> Self {
        Self { p_b, p_m, feasible_pb: is_probability(p_b), feasible_pm: is_probability(p_m) }
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible_pb && self.feasible_pm
    }
}

fn is_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}
