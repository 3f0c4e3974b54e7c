//! Result serialization: pretty JSON with the struct field order, CSV with
//! 17 significant digits, and output paths derived from the config path so
//! repeated runs overwrite their own artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use varmin::discrete::{BoundsCertificate, DiscretePath, MomentumPath};
use varmin::solve::SolveResult;

use crate::RunArgs;

/// Base path for artifacts: `-o` with any known extension stripped, else the
/// config path with `.out` in place of its extension (never the config
/// itself).
pub fn out_base(args: &RunArgs) -> PathBuf {
    match &args.out {
        Some(path) => {
            let mut p = path.clone();
            if matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("json" | "csv" | "txt")
            ) {
                p.set_extension("");
            }
            p
        }
        None => args.config.with_extension("out"),
    }
}

pub fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
pub struct SolveArtifact<'a> {
    pub action: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certificate: Option<&'a BoundsCertificate>,
    pub nodes: Vec<&'a [f64]>,
    pub momenta: Vec<&'a [f64]>,
}

impl<'a> SolveArtifact<'a> {
    pub fn new(result: &'a SolveResult) -> Self {
        let k = result.path.grid().k();
        Self {
            action: result.action,
            grad_norm: result.grad_norm,
            iterations: result.iterations,
            converged: result.converged,
            certificate: result.certificate.as_ref(),
            nodes: (0..=k).map(|j| result.path.node(j)).collect(),
            momenta: (0..k).map(|j| result.momenta.node(j)).collect(),
        }
    }
}

/// Node table as CSV: k, t_k, position columns, momentum columns. The
/// terminal momentum row repeats z_{K-1}, matching the polygon extension.
pub fn path_csv(path: &DiscretePath, momenta: &MomentumPath) -> String {
    let grid = path.grid();
    let d = path.dim();
    let mut out = String::from("k,t_k");
    for c in 0..d {
        out.push_str(&format!(",y{c}"));
    }
    for c in 0..d {
        out.push_str(&format!(",z{c}"));
    }
    out.push('\n');
    for node in 0..=grid.k() {
        out.push_str(&format!("{node},{:.16e}", grid.node_time(node)));
        for v in path.node(node) {
            out.push_str(&format!(",{v:.16e}"));
        }
        for v in momenta.node(node.min(grid.k() - 1)) {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}
