//! JSON run config: one top-level document with an explicit schema version.
//! Unknown fields are rejected everywhere so a typo cannot silently change
//! an experiment.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use varmin::model::{catalog, LagrangianModel, ParamValue, TerminalCost};
use varmin::nalgebra::DMatrix;
use varmin::solve::{InitStrategy, Method, Problem, SolveOpts};

pub const SCHEMA: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub model: ModelSpec,
    pub problem: Option<ProblemSpec>,
    pub solver: Option<SolverSpec>,
    pub study: Option<StudySpec>,
    pub mollify: Option<MollifySpec>,
    pub verify: Option<VerifySpec>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            bail!("unsupported schema version {} (expected {SCHEMA})", self.schema);
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<LagrangianModel> {
        self.model.build()
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let model = self.build_model()?;
        let spec = self
            .problem
            .as_ref()
            .context("config needs a \"problem\" section")?;
        let problem = match spec {
            ProblemSpec::TwoPoint { t, start, end } => {
                Problem::two_point(model, start.clone(), end.clone(), *t)?
            }
            ProblemSpec::Bolza {
                t,
                end,
                terminal_cost,
            } => Problem::bolza(model, end.clone(), terminal_cost.build()?, *t)?,
        };
        Ok(problem)
    }

    pub fn solve_opts(&self) -> SolveOpts {
        let defaults = SolveOpts::default();
        match &self.solver {
            None => defaults,
            Some(s) => SolveOpts {
                tol_grad: s.tol_grad.unwrap_or(defaults.tol_grad),
                max_iter: s.max_iter.unwrap_or(defaults.max_iter),
                method: match s.method {
                    MethodSpec::Newton => Method::Newton,
                    MethodSpec::GradientDescent => Method::GradientDescent,
                },
            },
        }
    }

    pub fn init_strategy(&self) -> InitStrategy {
        match self.solver.as_ref().map(|s| s.init).unwrap_or_default() {
            InitSpec::StraightLine => InitStrategy::StraightLine,
            InitSpec::Constant => InitStrategy::Constant,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub params: BTreeMap<String, ParamJson>,
}

/// Parameter values as they appear in JSON. Matrices are only meaningful for
/// `quadratic_form`, which bypasses the catalog lookup.
#[derive(Deserialize, Clone)]
#[serde(untagged)]
pub enum ParamJson {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl ModelSpec {
    fn build(&self) -> Result<LagrangianModel> {
        if self.name == "quadratic_form" {
            return self.build_quadratic_form();
        }
        let mut params = BTreeMap::new();
        for (key, value) in &self.params {
            let value = match value {
                ParamJson::Scalar(v) => ParamValue::Scalar(*v),
                ParamJson::Vector(v) => ParamValue::Vector(v.clone()),
                ParamJson::Matrix(_) => {
                    bail!("parameter '{key}' is a matrix, which only quadratic_form accepts")
                }
            };
            params.insert(key.clone(), value);
        }
        Ok(catalog::lookup(&self.name, &params, self.dim)?)
    }

    fn build_quadratic_form(&self) -> Result<LagrangianModel> {
        let d = self.dim;
        let mut matrix = None;
        for (key, value) in &self.params {
            match (key.as_str(), value) {
                ("matrix", ParamJson::Matrix(rows)) => matrix = Some(rows),
                ("matrix", _) => bail!("quadratic_form 'matrix' must be an array of rows"),
                _ => bail!("unknown parameter '{key}' (quadratic_form takes 'matrix')"),
            }
        }
        let rows = matrix.context("quadratic_form needs a 'matrix' parameter")?;
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            bail!("quadratic_form matrix must be {d}x{d}");
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Ok(catalog::quadratic_form(DMatrix::from_row_slice(d, d, &flat))?)
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    TwoPoint {
        t: f64,
        start: Vec<f64>,
        end: Vec<f64>,
    },
    Bolza {
        t: f64,
        end: Vec<f64>,
        #[serde(default)]
        terminal_cost: CostSpec,
    },
}

#[derive(Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    #[default]
    Zero,
    Quadratic {
        weight: f64,
    },
    Linear {
        gradient: Vec<f64>,
        offset: f64,
    },
}

impl CostSpec {
    pub fn build(&self) -> Result<TerminalCost> {
        Ok(match self {
            CostSpec::Zero => TerminalCost::zero(),
            CostSpec::Quadratic { weight } => TerminalCost::quadratic(*weight)?,
            CostSpec::Linear { gradient, offset } => {
                TerminalCost::linear(gradient.clone(), *offset)?
            }
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub k: Option<usize>,
    pub tol_grad: Option<f64>,
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub method: MethodSpec,
}

#[derive(Deserialize, Clone, Copy, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    #[default]
    StraightLine,
    Constant,
}

#[derive(Deserialize, Clone, Copy, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    #[default]
    Newton,
    GradientDescent,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub k0: usize,
    pub levels: usize,
    pub n_probe: Option<usize>,
    pub oracle_refine: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifySpec {
    /// Curve CSV, resolved relative to the config file.
    pub curve: PathBuf,
    /// Smoothing radii, strictly decreasing.
    pub eps: Vec<f64>,
    pub minimizer_action: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub n_samples: Option<usize>,
    pub half_width: Option<f64>,
}
