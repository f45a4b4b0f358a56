use serde::{Deserialize, Serialize};

/// Model constants that only shift intercepts of the scaling laws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    /// Prefactor of the closed-form `SNR_tot` bounds.
    pub k1: f64,
    /// Interference-to-noise factor of nearest-neighbour multihop.
    pub k2: f64,
    /// Hierarchical-cooperation efficiency constant.
    pub k3: f64,
    /// Relay-rate constant of the hybrid scheme.
    pub k4: f64,
    /// Cooperation-overhead exponent.
    pub epsilon: f64,
    /// Minimum-separation slack in the degrees-of-freedom bound.
    pub delta: f64,
    /// Percolation cell side, in units of the nearest-neighbour distance.
    pub c: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
            k4: 0.25,
            epsilon: 0.05,
            delta: 0.05,
            c: 0.25,
        }
    }
}

impl Constants {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("epsilon", self.epsilon),
            ("delta", self.delta),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(crate::Error::invalid(format!("c must lie in (0, 1), got {}", self.c)));
        }
        Ok(())
    }
}
