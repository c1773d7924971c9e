//! Curve fits used by the analysis paths.
//!
//! Standard errors are the square roots of the diagonal of `s²·(JᵀJ)⁻¹`, with
//! `s²` the residual variance `‖r‖²/(m − n)`.

use std::fmt::Write as _;

pub mod lm;
mod lorentzian;
mod power_law;
mod sinusoid;

pub use lm::{levenberg_marquardt, LeastSquaresProblem, LmOptions, LmOutcome};
pub use lorentzian::{fit_lorentzian, LorentzianGuess, LorentzianProblem};
pub use power_law::fit_power_law;
pub use sinusoid::{fit_sinusoid, SinusoidFit};

#[derive(Debug, Clone, PartialEq)]
pub struct FitParam {
    pub name: &'static str,
    pub value: f64,
    pub stderr: f64,
}

/// Parameter estimates of one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Non-fatal conditions, e.g. an undetermined phase.
    pub warnings: Vec<&'static str>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Value of parameter `name`. Panics if the fit has no such parameter.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("no fit parameter `{name}`")).value
    }

    pub fn stderr(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("no fit parameter `{name}`")).stderr
    }

    /// One `name=value±stderr` line per parameter.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for p in &self.params {
            let _ = writeln!(out, "{}={}±{}", p.name, p.value, p.stderr);
        }
        out
    }
}

pub(crate) fn residual_variance(rss: f64, m: usize, n: usize) -> f64 {
    if m > n {
        rss / (m - n) as f64
    } else {
        0.0
    }
}
