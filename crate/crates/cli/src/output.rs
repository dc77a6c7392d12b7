//! CSV formatting, artifact bookkeeping and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_OUT_ROOT: &str = "runs";
pub const OUT_ENV: &str = "DUALGAN_OUT";

/// Formats a float with 9 significant digits, switching to exponent notation
/// only for very large or very small magnitudes. Trailing zeros are dropped.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Output directory of one run. Owns the list of files written so far.
pub struct RunDir {
    pub path: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.path.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Hashes every artifact and writes the manifest next to them.
    pub fn finish(self, config: &RunConfig) -> Result<Manifest> {
        let mut artifacts = BTreeMap::new();
        for name in &self.artifacts {
            artifacts.insert(name.clone(), sha256_file(&self.path.join(name))?);
        }
        let manifest = Manifest {
            subcommand: config.subcommand().to_string(),
            seed: config.seed(),
            output_dir: self.path.clone(),
            config: config.clone(),
            artifacts,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let body = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(self.path.join(MANIFEST_FILE), body)?;
        Ok(manifest)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// Fully resolved configuration; enough to replay the run.
    pub config: RunConfig,
    /// File name to SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
    pub version: String,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// `--out` if given, else `$DUALGAN_OUT/<name>`, else `runs/<name>`.
pub fn resolve_out(out: Option<&Path>, default_name: &str) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
            root.join(default_name)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(-2.0 / 3.0), "-0.666666667");
        assert_eq!(fmt_num(123456.789012), "123456.789");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(1.23456789123e-7), "1.23456789e-7");
        assert_eq!(fmt_num(2.5e12), "2.5e12");
        assert_eq!(fmt_num(100.0), "100");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(9.9999999999), "10");
    }

    #[test]
    fn formatted_values_round_trip_to_nine_digits() {
        for v in [std::f64::consts::PI, -1e-4 / 7.0, 6.02214076e23, 0.1 + 0.2] {
            let back: f64 = fmt_num(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 5e-9, "{v} -> {back}");
        }
    }
}
