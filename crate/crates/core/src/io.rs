//! JSON exchange format for loops and result documents.
//!
//! A loop is stored as
//! `{"params": {n, r, d, k1, k2}, "main": [[m, re, im], ...], "triple": [...]}`.
//! Floats are written by `serde_json` in shortest round-trip form, so a
//! written loop reads back bit for bit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::loops::{GeneratorSpectrum, LoopError, SystemLoop};
use crate::solver::MinimizeResult;
use crate::symmetry::{Role, SymmetryParams};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed loop document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("frequency {0} is not an integer")]
    NonIntegerFrequency(f64),
    #[error("duplicate frequency {m} in the {role} spectrum")]
    DuplicateFrequency { role: Role, m: i64 },
    #[error(transparent)]
    Loop(#[from] LoopError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopDocument {
    pub params: SymmetryParams,
    pub main: Vec<[f64; 3]>,
    pub triple: Vec<[f64; 3]>,
}

fn rows(spec: &GeneratorSpectrum) -> Vec<[f64; 3]> {
    spec.coefficients.iter().map(|(&m, c)| [m as f64, c.re, c.im]).collect()
}

fn spectrum(role: Role, rows: &[[f64; 3]]) -> Result<GeneratorSpectrum, IoError> {
    let mut spec = GeneratorSpectrum::new(role);
    for &[m, re, im] in rows {
        if m.fract() != 0.0 || !m.is_finite() {
            return Err(IoError::NonIntegerFrequency(m));
        }
        let m = m as i64;
        if spec.coefficients.insert(m, Complex64::new(re, im)).is_some() {
            return Err(IoError::DuplicateFrequency { role, m });
        }
    }
    Ok(spec)
}

impl LoopDocument {
    pub fn from_system(system: &SystemLoop) -> Self {
        Self { params: system.params, main: rows(&system.main), triple: rows(&system.triple) }
    }

    pub fn to_system(&self) -> Result<SystemLoop, IoError> {
        let params = SymmetryParams::new(self.params.n, self.params.r, self.params.d, self.params.k1, self.params.k2);
        Ok(SystemLoop::new(params, spectrum(Role::Main, &self.main)?, spectrum(Role::Triple, &self.triple)?)?)
    }
}

pub fn loop_to_json(system: &SystemLoop) -> Value {
    serde_json::to_value(LoopDocument::from_system(system)).expect("loop document serializes")
}

/// Reads a bare loop document or any document with a `"loop"` field.
pub fn loop_from_json(text: &str) -> Result<SystemLoop, IoError> {
    let value: Value = serde_json::from_str(text)?;
    let inner = match value.get("loop") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value::<LoopDocument>(inner)?.to_system()
}

/// Full result document: diagnostics plus the final loop under `"loop"`.
pub fn minimize_result_json(result: &MinimizeResult) -> Value {
    let mut value = serde_json::to_value(result).expect("result serializes");
    value["loop"] = loop_to_json(&result.system);
    value["note"] = json!("interior critical point of the discretized action; boundary of the weak closure not represented");
    value
}

pub fn to_pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}
