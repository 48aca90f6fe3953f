//! JSON documents written by the command-line tool.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::model::{FittedModel, ModelFit};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a report came from: enough to rerun it and check the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance<C> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub input: String,
    pub input_sha256: String,
    pub config: C,
}

impl<C> Provenance<C> {
    pub fn new(command: &str, seed: u64, input: &Path, input_sha256: String, config: C) -> Self {
        Self {
            tool: "mmw".into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            input: input.display().to_string(),
            input_sha256,
            config,
        }
    }
}

pub fn sha256_hex(mut source: impl Read) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = source.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// A fitted model with its fit diagnostics, tagged by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument<T> {
    #[serde(flatten)]
    pub model: FittedModel<T>,
    pub g: usize,
    pub loglik: T,
    pub bic: T,
    pub n_params: usize,
    pub n_obs: usize,
    pub n_iter: usize,
    pub converged: bool,
    pub clamped_solves: usize,
}

impl<T: crate::real::Real> From<&ModelFit<T>> for ModelDocument<T> {
    fn from(fit: &ModelFit<T>) -> Self {
        Self {
            g: fit.model.g(),
            model: fit.model.clone(),
            loglik: fit.loglik,
            bic: fit.bic,
            n_params: fit.n_params,
            n_obs: fit.n_obs,
            n_iter: fit.n_iter,
            converged: fit.converged,
            clamped_solves: fit.clamped_solves,
        }
    }
}

/// A report body with its provenance block appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<B, C> {
    #[serde(flatten)]
    pub body: B,
    pub provenance: Provenance<C>,
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::GaussianMixture;
    use crate::em::FitResult;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(&b"abc"[..]).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn document_layout() {
        let fit: ModelFit<f64> = FitResult {
            model: FittedModel::Gmm(GaussianMixture::new(vec![1.0], vec![0.5], vec![2.0]).unwrap()),
            loglik_trace: vec![-10.0],
            n_iter: 1,
            converged: true,
            loglik: -10.0,
            bic: 24.0,
            n_params: 2,
            n_obs: 10,
            start: 0,
            clamped_solves: 0,
        };
        let doc = ModelDocument::from(&fit);
        let s = serde_json::to_string(&doc).unwrap();
        assert!(s.starts_with(r#"{"family":"gmm","weights":[1.0],"means":[0.5],"variances":[2.0],"g":1,"loglik":-10.0"#), "{s}");
        let back: ModelDocument<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, doc);
    }
}
