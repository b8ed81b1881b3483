//! Run configuration with embedded defaults.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Spatial dimension.
    pub s: usize,
    /// Particle mass.
    pub m: f64,
    /// Momentum cutoff of the grid box.
    pub p_max: f64,
    /// Grid nodes per axis.
    pub n_nodes: usize,
    /// Radius of the localization ball.
    pub r: f64,
    /// Number of test functions spanning the local subspaces.
    pub family_count: usize,
    /// Energy cutoff `E`.
    pub energy: f64,
    /// Gaussian damping parameter.
    pub beta: f64,
    /// Clustering parameter in (0, 1).
    pub epsilon: f64,
    /// Retained T-eigenmodes for the mode-basis Fock space.
    pub modes: usize,
    /// Particle cutoff of the mode-basis Fock space.
    pub n_max: usize,
    /// Exponents used for nuclear p-norm sums.
    pub p_list: Vec<f64>,
    /// Separations δ (in units of 1/m) for the N-point checks.
    pub separations: Vec<f64>,
    /// Numbers of translated regions for the N-point checks.
    pub n_points: Vec<usize>,
    /// Number of sampled functionals.
    pub net_size: usize,
    /// Number of sampled local observables.
    pub observable_count: usize,
    pub seed: u64,
    /// Largest one-particle deviation allowed at the end of the timelike scan.
    pub timelike_threshold: f64,
    /// Multiplies every comparison tolerance.
    pub tol_scale: f64,
    pub lub_tol: f64,
    pub lub_max_iter: usize,
    /// Largest tolerated Weyl truncation defect in the mode-basis space.
    pub weyl_defect_cap: f64,
    /// Largest Fock dimension that will be built.
    pub fock_dim_limit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            s: 1,
            m: 1.0,
            p_max: 20.0,
            n_nodes: 512,
            r: 1.0,
            family_count: 8,
            energy: 2.5,
            beta: 0.2,
            epsilon: 0.5,
            modes: 6,
            n_max: 4,
            p_list: vec![0.5, 1.0],
            separations: vec![5.0, 20.0],
            n_points: vec![2, 4],
            net_size: 200,
            observable_count: 24,
            seed: 20_240_917,
            timelike_threshold: 0.05,
            tol_scale: 1.0,
            lub_tol: 1e-10,
            lub_max_iter: 30,
            weyl_defect_cap: 1e-6,
            fock_dim_limit: 20_000,
        }
    }
}

impl RunConfig {
    /// `M_E = E/m`.
    pub fn m_e(&self) -> f64 {
        self.energy / self.m
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("p_max", self.p_max),
            ("r", self.r),
            ("energy", self.energy),
            ("beta", self.beta),
            ("tol_scale", self.tol_scale),
            ("timelike_threshold", self.timelike_threshold),
            ("lub_tol", self.lub_tol),
            ("weyl_defect_cap", self.weyl_defect_cap),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.s != 1 {
            return invalid(format!("s: only s = 1 pipelines are supported, got {}", self.s));
        }
        let counts = [
            ("family_count", self.family_count),
            ("modes", self.modes),
            ("n_max", self.n_max),
            ("net_size", self.net_size),
            ("observable_count", self.observable_count),
            ("lub_max_iter", self.lub_max_iter),
        ];
        for (name, v) in counts {
            if v == 0 {
                return invalid(format!("{name} must be at least 1"));
            }
        }
        if self.n_nodes < 8 || self.n_nodes % 2 == 1 {
            return invalid(format!("n_nodes must be even and at least 8, got {}", self.n_nodes));
        }
        if self.p_list.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return invalid("p_list entries must lie in (0, 1]");
        }
        if self.separations.iter().any(|&d| !(d > 0.0)) {
            return invalid("separations must be positive");
        }
        if self.n_points.iter().any(|&n| n == 0) {
            return invalid("n_points entries must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        assert!((RunConfig::default().m_e() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn bad_epsilon_names_field() {
        let cfg = RunConfig { epsilon: 1.5, ..RunConfig::default() };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("epsilon"), "{msg}");
    }
}
