//! Scenario files: the single source of numeric parameters, thresholds and
//! suite selections. JSON with a published schema; bundled examples cover a
//! nowhere-step-1 system (Heisenberg), a variable-rank system (Grushin), a
//! deeper nesting (step-3 polynomial) and Euclidean reduction sanity.

use crate::ballbox::BallBoxConstants;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::flows::IntegratorConfig;
use crate::metric::MetricConfig;
use crate::vf::{enumerate_basis, CommutatorBasis, VectorField};
use crate::MAX_DIM;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const KNOWN_SUITES: &[&str] = &[
    "heisenberg_identity",
    "anisotropic",
    "commutator_directional",
    "sup_holder",
    "ballbox",
    "volume",
    "convergence",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Counts {
    /// Proposals per dyadic shell in the pair sampler.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_shells")]
    pub shells: usize,
    #[serde(default = "default_t_points")]
    pub t_points: usize,
    /// Monte Carlo x-samples for directional seminorms.
    #[serde(default = "default_x_count")]
    pub x_count: usize,
    /// Samples per radius in Monte Carlo ball volumes.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Base points / parameter samples in grid-style suites.
    #[serde(default = "default_sample_points")]
    pub sample_points: usize,
}

fn default_pairs() -> usize {
    2000
}
fn default_shells() -> usize {
    12
}
fn default_t_points() -> usize {
    48
}
fn default_x_count() -> usize {
    400
}
fn default_mc_samples() -> usize {
    20_000
}
fn default_sample_points() -> usize {
    20
}

impl Default for Counts {
    fn default() -> Self {
        Counts {
            pairs: default_pairs(),
            shells: default_shells(),
            t_points: default_t_points(),
            x_count: default_x_count(),
            mc_samples: default_mc_samples(),
            sample_points: default_sample_points(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default = "default_integrator_tol")]
    pub integrator: f64,
    #[serde(default = "default_endpoint_tol")]
    pub endpoint: f64,
    #[serde(default = "default_newton_tol")]
    pub newton: f64,
}

fn default_integrator_tol() -> f64 {
    1e-10
}
fn default_endpoint_tol() -> f64 {
    1e-3
}
fn default_newton_tol() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            integrator: default_integrator_tol(),
            endpoint: default_endpoint_tol(),
            newton: default_newton_tol(),
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    /// Generator coefficient expressions, one row of `dimension` strings per
    /// generator; variables are x1..xn.
    pub generators: Vec<Vec<String>>,
    /// Hörmander step κ.
    pub step: usize,
    pub omega: Domain,
    pub omega0: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega2: Option<Domain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega3: Option<Domain>,
    /// Test function expression.
    pub f: String,
    pub s_values: Vec<f64>,
    pub p_values: Vec<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub eps_hat: f64,
    pub c_hat: f64,
    pub r0: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub counts: Counts,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default)]
    pub suites: Vec<String>,
}

fn default_eta() -> f64 {
    0.5
}
fn default_segments() -> usize {
    8
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        let sc: Scenario = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("invalid scenario json: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let sc: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("invalid scenario json: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n == 0 || n > MAX_DIM {
            return Err(Error::Schema(format!(
                "dimension must be in 1..={MAX_DIM}, got {n}"
            )));
        }
        if self.generators.is_empty() {
            return Err(Error::Schema("at least one generator required".into()));
        }
        for (gi, row) in self.generators.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Schema(format!(
                    "generator {} has {} coefficients, expected {}",
                    gi + 1,
                    row.len(),
                    n
                )));
            }
            for c in row {
                parse_expr(c, n).map_err(|e| {
                    Error::Schema(format!("generator {} coefficient `{c}`: {e}", gi + 1))
                })?;
            }
        }
        if self.step == 0 {
            return Err(Error::Schema("step must be at least 1".into()));
        }
        if self.omega.dim() != n || self.omega0.dim() != n {
            return Err(Error::Schema("domain dimension mismatch".into()));
        }
        if !self.omega.subset_of(&self.omega0) {
            return Err(Error::Schema("omega must be contained in omega0".into()));
        }
        if let (Some(o2), Some(o3)) = (&self.omega2, &self.omega3) {
            if !self.omega.subset_of(o2) || !o2.subset_of(o3) {
                return Err(Error::Schema("need omega ⊆ omega2 ⊆ omega3".into()));
            }
        }
        parse_expr(&self.f, n).map_err(|e| Error::Schema(format!("function f: {e}")))?;
        for &s in &self.s_values {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::Schema(format!("s must be in (0,1), got {s}")));
            }
        }
        for &p in &self.p_values {
            if !(p >= 1.0) {
                return Err(Error::Schema(format!("p must be >= 1, got {p}")));
            }
        }
        BallBoxConstants::new(self.eta, self.eps_hat, self.c_hat, self.r0)?;
        for suite in &self.suites {
            if !KNOWN_SUITES.contains(&suite.as_str()) {
                return Err(Error::Schema(format!(
                    "unknown suite `{suite}`; known: {KNOWN_SUITES:?}"
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding (struct field order is fixed,
    /// maps are sorted), hex-encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn generator_fields(&self) -> Result<Vec<VectorField>> {
        self.generators
            .iter()
            .map(|row| {
                let refs: Vec<&str> = row.iter().map(|s| s.as_str()).collect();
                VectorField::parse(self.dimension, &refs)
            })
            .collect()
    }

    pub fn basis(&self) -> Result<CommutatorBasis> {
        enumerate_basis(&self.generator_fields()?, self.step, true)
    }

    pub fn f_expr(&self) -> Result<Expr> {
        parse_expr(&self.f, self.dimension)
    }

    pub fn consts(&self) -> Result<BallBoxConstants> {
        BallBoxConstants::new(self.eta, self.eps_hat, self.c_hat, self.r0)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::with_tol(self.tolerances.integrator)
    }

    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig {
            segments: self.segments,
            endpoint_tol: self.tolerances.endpoint,
            integrator: IntegratorConfig::with_tol(self.tolerances.newton.min(1e-9)),
            ballbox: self.consts().ok(),
            ..Default::default()
        }
    }

    /// Threshold lookup with a documented default.
    pub fn threshold(&self, key: &str, default: f64) -> f64 {
        self.thresholds.get(key).copied().unwrap_or(default)
    }
}

/// Scenarios compiled into the library.
pub fn bundled(name: &str) -> Option<Scenario> {
    let text = match name {
        "heisenberg" => include_str!("../scenarios/heisenberg.json"),
        "grushin" => include_str!("../scenarios/grushin.json"),
        "step3" => include_str!("../scenarios/step3.json"),
        "euclidean1" => include_str!("../scenarios/euclidean1.json"),
        "euclidean2" => include_str!("../scenarios/euclidean2.json"),
        "euclidean3" => include_str!("../scenarios/euclidean3.json"),
        _ => return None,
    };
    Some(Scenario::from_json(text).expect("bundled scenarios are valid"))
}

pub fn bundled_names() -> &'static [&'static str] {
    &[
        "heisenberg",
        "grushin",
        "step3",
        "euclidean1",
        "euclidean2",
        "euclidean3",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_validate() {
        for name in bundled_names() {
            let sc = bundled(name).unwrap();
            assert_eq!(&sc.name, name);
            sc.validate().unwrap();
            assert!(!sc.basis().unwrap().is_empty());
        }
        assert!(bundled("nope").is_none());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = bundled("heisenberg").unwrap();
        let b = bundled("heisenberg").unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = bundled("heisenberg").unwrap();
        c.seed += 1;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let mut sc = bundled("heisenberg").unwrap();
        sc.s_values = vec![1.5];
        assert!(sc.validate().is_err());

        let mut sc = bundled("heisenberg").unwrap();
        sc.generators[0][0] = "x9".into();
        assert!(sc.validate().is_err());

        let mut sc = bundled("heisenberg").unwrap();
        sc.omega0 = Domain::cube(3, 0.5);
        assert!(sc.validate().is_err());

        let mut sc = bundled("heisenberg").unwrap();
        sc.suites = vec!["bogus".into()];
        assert!(sc.validate().is_err());
    }

    #[test]
    fn heisenberg_scenario_builds_expected_basis() {
        let sc = bundled("heisenberg").unwrap();
        let basis = sc.basis().unwrap();
        assert_eq!(basis.dim(), 3);
        assert_eq!(basis.len(), 4); // X, Y, [X,Y], [Y,X]
        assert_eq!(basis.ell(3), 2);
    }
}
