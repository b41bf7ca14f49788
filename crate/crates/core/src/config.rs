//! JSON run configuration. Unknown keys are rejected everywhere: a typo in
//! a hypothesis-critical field must not silently fall back to a default.

use std::path::Path;

use serde::Deserialize;

use crate::coefficient::{CoefficientSpec, PsiSpec};
use crate::criterion::ProblemParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub coefficient: CoefficientBlock,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientBlock {
    pub k: f64,
    pub a1: f64,
    pub psi: PsiBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiBlock {
    Constant { value: f64 },
    SmoothBump { c: f64, d: f64, beta: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub n: u32,
    pub p: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsBlock {
    pub s_max: f64,
    pub ode_tol: f64,
    pub grid_points: usize,
    /// Radial integration range; defaults to 50 over the linearization rate.
    pub r_max: Option<f64>,
    pub alpha_grid: usize,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self { s_max: 1e8, ode_tol: 1e-12, grid_points: 4096, r_max: None, alpha_grid: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub format: Option<OutputFormat>,
    pub path: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let nm = &self.numerics;
        if !(nm.s_max > 0.0) || !(nm.ode_tol > 0.0) {
            return Err(Error::Config("numerics.s_max and numerics.ode_tol must be positive".into()));
        }
        if nm.grid_points < 16 || nm.alpha_grid < 2 {
            return Err(Error::Config(
                "numerics.grid_points must be >= 16 and numerics.alpha_grid >= 2".into(),
            ));
        }
        if let Some(r) = nm.r_max {
            if !(r > 0.0) {
                return Err(Error::Config("numerics.r_max must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn coefficient_spec(&self) -> Result<CoefficientSpec> {
        let psi = match self.coefficient.psi {
            PsiBlock::Constant { value } => PsiSpec::Constant(value),
            PsiBlock::SmoothBump { c, d, beta } => PsiSpec::SmoothBump { c, d, beta },
        };
        CoefficientSpec::new(self.coefficient.k, self.coefficient.a1, psi)
    }

    pub fn problem_params(&self) -> Result<ProblemParams> {
        ProblemParams::new(self.problem.n, self.problem.p, self.problem.m, self.coefficient_spec()?)
    }

    /// Same data at a different frequency, for `--m-sweep`.
    pub fn problem_params_at(&self, m: f64) -> Result<ProblemParams> {
        ProblemParams::new(self.problem.n, self.problem.p, m, self.coefficient_spec()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = r#"{
        "coefficient": {"k": 2.0, "a1": 2.0, "psi": {"type": "constant", "value": 1.0}},
        "problem": {"n": 3, "p": 3.0, "m": 4.0}
    }"#;

    #[test]
    fn parses_minimal_config() {
        let cfg: RunConfig = serde_json::from_str(CANONICAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.numerics.s_max, 1e8);
        assert_eq!(cfg.numerics.alpha_grid, 200);
        assert!(cfg.output.path.is_none());
        cfg.problem_params().unwrap();
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = r#"{
            "coefficient": {"k": 2.0, "a1": 2.0, "psi": {"type": "constant", "value": 1.0}},
            "problem": {"n": 3, "p": 3.0, "m": 4.0},
            "numerics": {"s_mxa": 1e6}
        }"#;
        assert!(serde_json::from_str::<RunConfig>(bad).is_err());
    }

    #[test]
    fn rejects_bad_numerics() {
        let bad = r#"{
            "coefficient": {"k": 2.0, "a1": 2.0, "psi": {"type": "constant", "value": 1.0}},
            "problem": {"n": 3, "p": 3.0, "m": 4.0},
            "numerics": {"grid_points": 4}
        }"#;
        let cfg: RunConfig = serde_json::from_str(bad).unwrap();
        assert!(cfg.validate().is_err());
    }
}
