use serde::{Deserialize, Serialize};

use crate::CtmError;

/// Construction tolerance for the derived quantities `w` and `q_m`.
const DERIVED_TOL: f64 = 1e-12;

/// User-facing parameters from which a [`FundamentalDiagram`] is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSpec {
    /// Freeflow speed.
    pub v_m: f64,
    /// Maximum (jam) density.
    pub rho_m: f64,
    /// Critical density.
    pub rho_c: f64,
}

/// Triangular fundamental diagram.
///
/// The congestion wave speed and the capacity are derived from the other
/// three parameters: `w = rho_c·v_m/(rho_m − rho_c)` and `q_m = v_m·rho_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FdSpec")]
pub struct FundamentalDiagram {
    /// Freeflow speed.
    pub v_m: f64,
    /// Congestion wave speed.
    pub w: f64,
    /// Maximum density.
    pub rho_m: f64,
    /// Critical density.
    pub rho_c: f64,
    /// Capacity (maximum flow).
    pub q_m: f64,
}

impl FundamentalDiagram {
    /// Builds a diagram from freeflow speed, maximum and critical density.
    pub fn new(v_m: f64, rho_m: f64, rho_c: f64) -> Result<Self, CtmError> {
        if !(v_m.is_finite() && v_m > 0.0) {
            return Err(CtmError::InvalidDiagram(format!("v_m must be positive, got {v_m}")));
        }
        if !(rho_c.is_finite() && rho_m.is_finite() && 0.0 < rho_c && rho_c < rho_m) {
            return Err(CtmError::InvalidDiagram(format!(
                "need 0 < rho_c < rho_m, got rho_c = {rho_c}, rho_m = {rho_m}"
            )));
        }
        let w = rho_c * v_m / (rho_m - rho_c);
        Ok(Self { v_m, w, rho_m, rho_c, q_m: v_m * rho_c })
    }

    /// Normalized defaults: `rho_m = 1`, `v_m = 1`, `rho_c = 0.25`.
    pub fn normalized() -> Self {
        Self::new(1.0, 1.0, 0.25).expect("normalized parameters are valid")
    }

    /// Returns the parameter triple this diagram was built from.
    pub fn spec(&self) -> FdSpec {
        FdSpec { v_m: self.v_m, rho_m: self.rho_m, rho_c: self.rho_c }
    }

    /// Sending (demand) function `min{v_m·rho, q_m}`.
    pub fn demand(&self, rho: f64) -> f64 {
        (self.v_m * rho).min(self.q_m)
    }

    /// Receiving (supply) function `min{w·(rho_m − rho), q_m}`.
    pub fn supply(&self, rho: f64) -> f64 {
        (self.w * (self.rho_m - rho)).min(self.q_m)
    }

    /// Equilibrium flow `F(rho) = min{v_m·rho, w·(rho_m − rho)}`.
    pub fn equilibrium_flow(&self, rho: f64) -> f64 {
        (self.v_m * rho).min(self.w * (self.rho_m - rho))
    }

    /// True when `rho` lies strictly above the critical density.
    pub fn is_congested(&self, rho: f64) -> bool {
        rho > self.rho_c
    }

    /// Checks the derived-quantity invariants to construction tolerance.
    pub fn check_invariants(&self) -> Result<(), CtmError> {
        let w = self.rho_c * self.v_m / (self.rho_m - self.rho_c);
        let scale = 1.0 + self.w.abs() + self.q_m.abs();
        if (w - self.w).abs() > DERIVED_TOL * scale || (self.v_m * self.rho_c - self.q_m).abs() > DERIVED_TOL * scale {
            return Err(CtmError::InvalidDiagram("derived w or q_m inconsistent".into()));
        }
        Ok(())
    }
}

impl TryFrom<FdSpec> for FundamentalDiagram {
    type Error = CtmError;

    fn try_from(spec: FdSpec) -> Result<Self, Self::Error> {
        Self::new(spec.v_m, spec.rho_m, spec.rho_c)
    }
}

impl Default for FundamentalDiagram {
    fn default() -> Self {
        Self::normalized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_derived_quantities() {
        let fd = FundamentalDiagram::normalized();
        assert!((fd.w - 1.0 / 3.0).abs() < 1e-15);
        assert!((fd.q_m - 0.25).abs() < 1e-15);
        fd.check_invariants().unwrap();
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FundamentalDiagram::new(1.0, 1.0, 1.0).is_err());
        assert!(FundamentalDiagram::new(1.0, 1.0, 0.0).is_err());
        assert!(FundamentalDiagram::new(-1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn equilibrium_flow_peaks_at_critical_density() {
        let fd = FundamentalDiagram::new(2.0, 3.0, 1.0).unwrap();
        assert!((fd.equilibrium_flow(fd.rho_c) - fd.q_m).abs() < 1e-14);
        assert!(fd.equilibrium_flow(0.5) < fd.q_m);
        assert!(fd.equilibrium_flow(2.0) < fd.q_m);
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let fd = FundamentalDiagram::new(1.5, 2.0, 0.4).unwrap();
        let json = serde_json::to_string(&fd).unwrap();
        let back: FundamentalDiagram = serde_json::from_str(&json).unwrap();
        assert_eq!(fd, back);
        let bad = r#"{"v_m": 1.0, "rho_m": 1.0, "rho_c": 2.0}"#;
        assert!(serde_json::from_str::<FundamentalDiagram>(bad).is_err());
    }
}
