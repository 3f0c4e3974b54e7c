//! Lagrangian models, terminal costs, and checks of the standing assumptions.
//!
//! A model is a black-box evaluator of L(x, t, xi) together with its first
//! derivatives and the velocity Hessian. The conditions required of it are
//! only checkable by sampling: C^2 smoothness (derivatives match finite
//! differences), strict convexity in xi (positive definite Hessian), and
//! uniform superlinearity L >= a|xi| + b_a for the declared bounds b_a.
//! Flow completeness has no finite certificate and is not checked here.

pub mod catalog;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Symmetry slack allowed in the velocity Hessian, relative to entry scale.
const SYMMETRY_TOL: f64 = 1e-12;

/// Slack allowed in sampled inequality checks, to absorb rounding.
const SLACK_TOL: f64 = 1e-12;

/// Relative tolerance for derivative vs finite-difference agreement.
const FD_TOL: f64 = 1e-6;

/// Fixed seed for condition sampling; checks are deterministic by design.
const SAMPLE_SEED: u64 = 0x5eed;

/// Output buffer for one Lagrangian evaluation.
#[derive(Debug, Clone)]
pub struct LagrangianEval {
    pub value: f64,
    /// dL/dx.
    pub grad_x: Vec<f64>,
    /// dL/dxi.
    pub grad_xi: Vec<f64>,
    /// d2L/dxi2, symmetric.
    pub hess_xi: DMatrix<f64>,
}

impl LagrangianEval {
    pub fn zeros(dim: usize) -> Self {
        Self {
            value: 0.0,
            grad_x: vec![0.0; dim],
            grad_xi: vec![0.0; dim],
            hess_xi: DMatrix::zeros(dim, dim),
        }
    }
}

/// Evaluator signature: fills `out` from (x, t, xi). Must be pure.
pub type EvalFn = dyn Fn(&[f64], f64, &[f64], &mut LagrangianEval) + Send + Sync;

/// Parameter value accepted by the catalog.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// How the superlinearity offsets b_a in L >= a|xi| + b_a are obtained.
#[derive(Debug, Clone)]
pub enum Superlinearity {
    /// Kinetic part (1/2) xi^T M xi with lambda_min(M) = `min_mass`, and a
    /// potential part bounded above by `potential_sup`. Then
    /// b_a = -a^2 / (2 min_mass) - potential_sup, exact for every a >= 0.
    ///
    /// `kinetic_only` marks models whose potential is unbounded below (the
    /// harmonic oscillator): the bound is declared for the kinetic part alone
    /// and sampled checks evaluate that part, not the full L.
    Quadratic {
        min_mass: f64,
        potential_sup: f64,
        kinetic_only: bool,
    },
    /// Sampled (a, b_a) pairs, flagged approximate. Empty means no bound
    /// is available at all.
    Estimated { table: Vec<(f64, f64)> },
}

/// A superlinearity offset together with its provenance.
#[derive(Debug, Clone, Copy)]
pub struct BoundValue {
    pub value: f64,
    pub exact: bool,
}

/// Black-box Tonelli Lagrangian of dimension d.
#[derive(Clone)]
pub struct LagrangianModel {
    name: String,
    params: BTreeMap<String, ParamValue>,
    dim: usize,
    superlinearity: Superlinearity,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for LagrangianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianModel")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("dim", &self.dim)
            .field("superlinearity", &self.superlinearity)
            .finish_non_exhaustive()
    }
}

impl LagrangianModel {
    pub fn new(
        name: impl Into<String>,
        params: BTreeMap<String, ParamValue>,
        dim: usize,
        superlinearity: Superlinearity,
        eval: Arc<EvalFn>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("model dimension must be at least 1".into()));
        }
        Ok(Self {
            name: name.into(),
            params,
            dim,
            superlinearity,
            eval,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, ParamValue> {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superlinearity(&self) -> &Superlinearity {
        &self.superlinearity
    }

    /// Returns b_a for the requested slope, or None if the model cannot
    /// provide one (sampled metadata without a matching entry).
    pub fn superlinearity_bound(&self, a: f64) -> Option<BoundValue> {
        match &self.superlinearity {
            Superlinearity::Quadratic {
                min_mass,
                potential_sup,
                ..
            } => Some(BoundValue {
                value: -a * a / (2.0 * min_mass) - potential_sup,
                exact: true,
            }),
            Superlinearity::Estimated { table } => table
                .iter()
                .find(|(pa, _)| (pa - a).abs() <= 1e-12)
                .map(|&(_, b)| BoundValue {
                    value: b,
                    exact: false,
                }),
        }
    }

    /// Evaluates L and its derivatives into a caller-owned buffer.
    pub fn eval_into(&self, x: &[f64], t: f64, xi: &[f64], out: &mut LagrangianEval) -> Result<()> {
        self.check_input("x", x)?;
        self.check_input("xi", xi)?;
        if !t.is_finite() {
            return Err(Error::Invalid(format!("non-finite time t = {t}")));
        }
        debug_assert_eq!(out.grad_x.len(), self.dim);
        debug_assert_eq!(out.grad_xi.len(), self.dim);
        (self.eval)(x, t, xi, out);
        self.check_output(x, t, xi, out)
    }

    /// Allocating variant of [`eval_into`](Self::eval_into).
    pub fn eval(&self, x: &[f64], t: f64, xi: &[f64]) -> Result<LagrangianEval> {
        let mut out = LagrangianEval::zeros(self.dim);
        self.eval_into(x, t, xi, &mut out)?;
        Ok(out)
    }

    fn check_input(&self, what: &'static str, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Dimension {
                what: "model input",
                expected: self.dim,
                got: v.len(),
            });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid(format!("non-finite {what} input: {v:?}")));
        }
        Ok(())
    }

    fn check_output(&self, x: &[f64], t: f64, xi: &[f64], out: &LagrangianEval) -> Result<()> {
        let bad = |what: &'static str| Error::NonFinite {
            what,
            x: x.to_vec(),
            t,
            xi: xi.to_vec(),
        };
        if !out.value.is_finite() {
            return Err(bad("value"));
        }
        if out.grad_x.iter().any(|c| !c.is_finite()) {
            return Err(bad("x-gradient"));
        }
        if out.grad_xi.iter().any(|c| !c.is_finite()) {
            return Err(bad("xi-gradient"));
        }
        if out.hess_xi.iter().any(|c| !c.is_finite()) {
            return Err(bad("velocity Hessian"));
        }
        let scale = out.hess_xi.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let skew = linalg::max_skew(&out.hess_xi);
        if skew > SYMMETRY_TOL * scale {
            return Err(Error::AsymmetricHessian { skew });
        }
        Ok(())
    }

    /// Value of the declared kinetic part (1/2) xi^T M xi, where M is the
    /// velocity Hessian at the sample. Valid for `Superlinearity::Quadratic`
    /// models, whose Hessian equals the kinetic mass matrix everywhere.
    fn kinetic_value(ev: &LagrangianEval, xi: &[f64]) -> f64 {
        let d = xi.len();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += xi[i] * ev.hess_xi[(i, j)] * xi[j];
            }
        }
        0.5 * acc
    }
}

/// Terminal cost w with the growth bound w(x) >= -alpha |x| + beta.
#[derive(Clone)]
pub struct TerminalCost {
    kind: String,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    grad: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    alpha: f64,
    beta: f64,
}

impl fmt::Debug for TerminalCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalCost")
            .field("kind", &self.kind)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .finish_non_exhaustive()
    }
}

impl TerminalCost {
    /// w = 0 with alpha = 0, beta = 0.
    pub fn zero() -> Self {
        Self {
            kind: "zero".into(),
            eval: Arc::new(|_| 0.0),
            grad: Arc::new(|_, out| out.fill(0.0)),
            alpha: 0.0,
            beta: 0.0,
        }
    }

    /// w(x) = (weight/2) |x|^2; requires weight >= 0 so that w >= 0.
    pub fn quadratic(weight: f64) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::Invalid(format!(
                "quadratic terminal cost needs weight >= 0, got {weight}"
            )));
        }
        Ok(Self {
            kind: "quadratic".into(),
            eval: Arc::new(move |x| 0.5 * weight * linalg::dot(x, x)),
            grad: Arc::new(move |x, out| {
                for (o, c) in out.iter_mut().zip(x) {
                    *o = weight * c;
                }
            }),
            alpha: 0.0,
            beta: 0.0,
        })
    }

    /// w(x) = g . x + offset, so alpha = |g| and beta = offset.
    pub fn linear(gradient: Vec<f64>, offset: f64) -> Result<Self> {
        if gradient.iter().any(|c| !c.is_finite()) || !offset.is_finite() {
            return Err(Error::Invalid("non-finite linear terminal cost".into()));
        }
        let alpha = linalg::norm2(&gradient);
        let g = gradient.clone();
        let g2 = gradient;
        Ok(Self {
            kind: "linear".into(),
            eval: Arc::new(move |x| linalg::dot(&g, x) + offset),
            grad: Arc::new(move |_, out| out.copy_from_slice(&g2)),
            alpha,
            beta: offset,
        })
    }

    /// Arbitrary C^1 cost with declared growth constants.
    pub fn custom(
        kind: impl Into<String>,
        eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        grad: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 || !beta.is_finite() {
            return Err(Error::Invalid(format!(
                "terminal cost growth constants must satisfy alpha >= 0, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self {
            kind: kind.into(),
            eval,
            grad,
            alpha,
            beta,
        })
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Sampling box over (x, t, xi).
#[derive(Debug, Clone)]
pub struct SampleBox {
    pub x: Vec<[f64; 2]>,
    pub t: [f64; 2],
    pub xi: Vec<[f64; 2]>,
}

impl SampleBox {
    /// Box [-w, w] in every coordinate of x, t, and xi.
    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self {
            x: vec![[-half_width, half_width]; dim],
            t: [-half_width, half_width],
            xi: vec![[-half_width, half_width]; dim],
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.x.len() != dim || self.xi.len() != dim {
            return Err(Error::Dimension {
                what: "sample box",
                expected: dim,
                got: self.x.len().min(self.xi.len()),
            });
        }
        let degenerate = |iv: &[f64; 2]| !(iv[0] < iv[1]) || !iv[0].is_finite() || !iv[1].is_finite();
        if self.x.iter().any(degenerate) || self.xi.iter().any(degenerate) || degenerate(&self.t) {
            return Err(Error::Invalid("sample box must be nondegenerate".into()));
        }
        Ok(())
    }
}

/// One sampled point, used as a witness for the worst slack.
#[derive(Debug, Clone, Serialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub t: f64,
    pub xi: Vec<f64>,
}

/// Outcome of one condition check. `violation` is zero whenever `pass` holds.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub pass: bool,
    pub violation: f64,
    pub witness: Option<SamplePoint>,
}

impl Check {
    fn passed() -> Self {
        Self {
            pass: true,
            violation: 0.0,
            witness: None,
        }
    }
}

/// Sampled verdicts on the standing assumptions.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// Derivatives agree with central finite differences of the value.
    pub smoothness: Check,
    /// Velocity Hessian has a strictly positive minimum eigenvalue.
    pub convexity: Check,
    /// L - a|xi| - b_a >= 0 for every declared slope a.
    pub superlinearity: Check,
    /// w + alpha|x| - beta >= 0; absent when no terminal cost was given.
    pub terminal_growth: Option<Check>,
    /// Minimum Hessian eigenvalue seen over all samples.
    pub min_eigenvalue: f64,
    /// Worst superlinearity slack min(L - a|xi| - b_a) over samples and slopes.
    pub superlinearity_slack: f64,
    /// Worst terminal-cost slack min(w + alpha|x| - beta).
    pub terminal_slack: Option<f64>,
    /// Worst relative derivative error against finite differences.
    pub derivative_error: f64,
    pub samples: usize,
    pub pass: bool,
}

struct SampleMetrics {
    min_eig: f64,
    slack: f64,
    w_slack: f64,
    fd_err: f64,
}

/// Checks smoothness, convexity, superlinearity and the terminal-cost growth
/// bound on a sampled box.
///
/// Sampling is deterministic (fixed seed). An asymmetric Hessian is a model
/// definition error, not a failed check.
pub fn check_conditions(
    model: &LagrangianModel,
    w: Option<&TerminalCost>,
    bx: &SampleBox,
    n_samples: usize,
) -> Result<ConditionReport> {
    if n_samples == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    bx.validate(model.dim())?;

    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let draw = |rng: &mut ChaCha8Rng, iv: &[f64; 2]| rng.gen_range(iv[0]..iv[1]);
    let points: Vec<SamplePoint> = (0..n_samples)
        .map(|_| SamplePoint {
            x: bx.x.iter().map(|iv| draw(&mut rng, iv)).collect(),
            t: draw(&mut rng, &bx.t),
            xi: bx.xi.iter().map(|iv| draw(&mut rng, iv)).collect(),
        })
        .collect();

    let slopes: Vec<f64> = match model.superlinearity() {
        Superlinearity::Quadratic { .. } => vec![0.0, 1.0, 2.0],
        Superlinearity::Estimated { table } => table.iter().map(|&(a, _)| a).collect(),
    };
    // Finite differences are the expensive part; a fixed prefix suffices.
    let n_fd = n_samples.min(32);

    let metrics: Vec<Result<SampleMetrics>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| sample_metrics(model, w, p, &slopes, i < n_fd))
        .collect();

    let mut min_eig = f64::INFINITY;
    let mut eig_witness = 0usize;
    let mut slack = f64::INFINITY;
    let mut slack_witness = 0usize;
    let mut w_slack = f64::INFINITY;
    let mut w_witness = 0usize;
    let mut fd_err = 0.0f64;
    let mut fd_witness = 0usize;
    for (i, m) in metrics.into_iter().enumerate() {
        let m = m?;
        if m.min_eig < min_eig {
            min_eig = m.min_eig;
            eig_witness = i;
        }
        if m.slack < slack {
            slack = m.slack;
            slack_witness = i;
        }
        if m.w_slack < w_slack {
            w_slack = m.w_slack;
            w_witness = i;
        }
        if m.fd_err > fd_err {
            fd_err = m.fd_err;
            fd_witness = i;
        }
    }

    let witness = |i: usize| Some(points[i].clone());
    let convexity = if min_eig > 0.0 {
        Check::passed()
    } else {
        Check {
            pass: false,
            violation: -min_eig.min(0.0),
            witness: witness(eig_witness),
        }
    };
    let superlinearity = if slopes.is_empty() || slack >= -SLACK_TOL {
        Check::passed()
    } else {
        Check {
            pass: false,
            violation: -slack,
            witness: witness(slack_witness),
        }
    };
    let smoothness = if fd_err <= FD_TOL {
        Check::passed()
    } else {
        Check {
            pass: false,
            violation: fd_err,
            witness: witness(fd_witness),
        }
    };
    let terminal_growth = w.map(|_| {
        if w_slack >= -SLACK_TOL {
            Check::passed()
        } else {
            Check {
                pass: false,
                violation: -w_slack,
                witness: witness(w_witness),
            }
        }
    });

    let pass = convexity.pass
        && superlinearity.pass
        && smoothness.pass
        && terminal_growth.as_ref().is_none_or(|c| c.pass);
    Ok(ConditionReport {
        smoothness,
        convexity,
        superlinearity,
        terminal_growth,
        min_eigenvalue: min_eig,
        superlinearity_slack: if slopes.is_empty() { f64::INFINITY } else { slack },
        terminal_slack: w.map(|_| w_slack),
        derivative_error: fd_err,
        samples: n_samples,
        pass,
    })
}

fn sample_metrics(
    model: &LagrangianModel,
    w: Option<&TerminalCost>,
    p: &SamplePoint,
    slopes: &[f64],
    with_fd: bool,
) -> Result<SampleMetrics> {
    let ev = model.eval(&p.x, p.t, &p.xi)?;
    let min_eig = linalg::min_symmetric_eigenvalue(&ev.hess_xi);

    let speed = linalg::norm2(&p.xi);
    let mut slack = f64::INFINITY;
    for &a in slopes {
        let b = model
            .superlinearity_bound(a)
            .ok_or(Error::MissingBound { a })?;
        let checked_value = match model.superlinearity() {
            Superlinearity::Quadratic {
                kinetic_only: true, ..
            } => LagrangianModel::kinetic_value(&ev, &p.xi),
            _ => ev.value,
        };
        slack = slack.min(checked_value - a * speed - b.value);
    }

    let w_slack = match w {
        Some(cost) => {
            cost.value(&p.x) + cost.alpha() * linalg::norm2(&p.x) - cost.beta()
        }
        None => f64::INFINITY,
    };

    let fd_err = if with_fd {
        derivative_fd_error(model, p)?
    } else {
        0.0
    };

    Ok(SampleMetrics {
        min_eig,
        slack,
        w_slack,
        fd_err,
    })
}

/// Worst relative error of grad_x and grad_xi against central differences.
fn derivative_fd_error(model: &LagrangianModel, p: &SamplePoint) -> Result<f64> {
    let d = model.dim();
    let ev = model.eval(&p.x, p.t, &p.xi)?;
    let mut worst = 0.0f64;
    let mut xp = p.x.clone();
    let mut xip = p.xi.clone();
    for i in 0..d {
        let step = 1e-6 * (1.0 + p.x[i].abs());
        xp[i] = p.x[i] + step;
        let fp = model.eval(&xp, p.t, &p.xi)?.value;
        xp[i] = p.x[i] - step;
        let fm = model.eval(&xp, p.t, &p.xi)?.value;
        xp[i] = p.x[i];
        let fd = (fp - fm) / (2.0 * step);
        worst = worst.max((fd - ev.grad_x[i]).abs() / ev.grad_x[i].abs().max(1.0));

        let step = 1e-6 * (1.0 + p.xi[i].abs());
        xip[i] = p.xi[i] + step;
        let fp = model.eval(&p.x, p.t, &xip)?.value;
        xip[i] = p.xi[i] - step;
        let fm = model.eval(&p.x, p.t, &xip)?.value;
        xip[i] = p.xi[i];
        let fd = (fp - fm) / (2.0 * step);
        worst = worst.max((fd - ev.grad_xi[i]).abs() / ev.grad_xi[i].abs().max(1.0));
    }
    Ok(worst)
}

/// Estimates b_a = min over samples of L - a|xi| for each requested slope,
/// for user models without exact superlinearity data. The result is
/// approximate by construction.
pub fn estimate_superlinearity(
    model: &LagrangianModel,
    bx: &SampleBox,
    slopes: &[f64],
    n_samples: usize,
) -> Result<Superlinearity> {
    if n_samples == 0 || slopes.is_empty() {
        return Err(Error::Invalid(
            "superlinearity estimation needs samples and slopes".into(),
        ));
    }
    bx.validate(model.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let draw = |rng: &mut ChaCha8Rng, iv: &[f64; 2]| rng.gen_range(iv[0]..iv[1]);
    let mut table: Vec<(f64, f64)> = slopes.iter().map(|&a| (a, f64::INFINITY)).collect();
    let mut ev = LagrangianEval::zeros(model.dim());
    for _ in 0..n_samples {
        let x: Vec<f64> = bx.x.iter().map(|iv| draw(&mut rng, iv)).collect();
        let t = draw(&mut rng, &bx.t);
        let xi: Vec<f64> = bx.xi.iter().map(|iv| draw(&mut rng, iv)).collect();
        model.eval_into(&x, t, &xi, &mut ev)?;
        let speed = linalg::norm2(&xi);
        for (a, b) in table.iter_mut() {
            *b = b.min(ev.value - *a * speed);
        }
    }
    Ok(Superlinearity::Estimated { table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog;

    #[test]
    fn free_particle_eval_examples() {
        let m = catalog::free_particle(1).unwrap();
        let ev = m.eval(&[0.0], 0.0, &[0.0]).unwrap();
        assert_eq!(ev.value, 0.0);
        assert_eq!(ev.grad_x[0], 0.0);
        assert_eq!(ev.grad_xi[0], 0.0);
        assert_eq!(ev.hess_xi[(0, 0)], 1.0);

        let ev = m.eval(&[0.0], 0.0, &[2.0]).unwrap();
        assert_eq!(ev.value, 2.0);
        assert_eq!(ev.grad_xi[0], 2.0);
    }

    #[test]
    fn harmonic_oscillator_eval_example() {
        let m = catalog::harmonic_oscillator(1, 1.0).unwrap();
        let ev = m.eval(&[1.0], 0.0, &[1.0]).unwrap();
        assert!((ev.value - 0.0).abs() < 1e-15);
        assert!((ev.grad_x[0] + 1.0).abs() < 1e-15);
        assert!((ev.grad_xi[0] - 1.0).abs() < 1e-15);
        assert_eq!(ev.hess_xi[(0, 0)], 1.0);
    }

    #[test]
    fn eval_rejects_wrong_dimension() {
        let m = catalog::free_particle(2).unwrap();
        assert!(m.eval(&[0.0], 0.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn eval_reports_nonfinite_output() {
        let eval: Arc<EvalFn> = Arc::new(|x, _, _, out| {
            out.value = 1.0 / x[0];
            out.hess_xi[(0, 0)] = 1.0;
        });
        let m = LagrangianModel::new(
            "bad",
            BTreeMap::new(),
            1,
            Superlinearity::Estimated { table: vec![] },
            eval,
        )
        .unwrap();
        let err = m.eval(&[0.0], 0.0, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn check_conditions_free_particle_passes() {
        let m = catalog::free_particle(1).unwrap();
        let report = check_conditions(&m, None, &SampleBox::cube(1, 1.0), 100).unwrap();
        assert!(report.pass);
        assert!((report.min_eigenvalue - 1.0).abs() < 1e-15);
        assert!(report.superlinearity.pass);
    }

    #[test]
    fn check_conditions_oscillator_kinetic_bound_passes() {
        // The full L = xi^2/2 - x^2/2 is not >= |xi| - 1/2 globally; the
        // declared bound covers the kinetic part, which satisfies it.
        let m = catalog::harmonic_oscillator(1, 1.0).unwrap();
        let report = check_conditions(&m, None, &SampleBox::cube(1, 5.0), 500).unwrap();
        assert!(report.pass, "report: {report:?}");
    }

    #[test]
    fn check_conditions_degenerate_hessian_fails() {
        let m = catalog::quadratic_form(DMatrix::from_row_slice(1, 1, &[0.0])).unwrap();
        let report = check_conditions(&m, None, &SampleBox::cube(1, 1.0), 50).unwrap();
        assert!(!report.convexity.pass);
        assert_eq!(report.convexity.violation, 0.0);
        assert!(!report.pass);
    }

    #[test]
    fn check_conditions_flags_terminal_cost_violation() {
        let m = catalog::free_particle(1).unwrap();
        // Claimed growth bound w >= 1 is false for w = 0.
        let w = TerminalCost::custom(
            "custom",
            Arc::new(|_| 0.0),
            Arc::new(|_, out| out.fill(0.0)),
            0.0,
            1.0,
        )
        .unwrap();
        let report = check_conditions(&m, Some(&w), &SampleBox::cube(1, 1.0), 50).unwrap();
        let tg = report.terminal_growth.unwrap();
        assert!(!tg.pass);
        assert!((tg.violation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimated_superlinearity_is_flagged_approximate() {
        let m = catalog::free_particle(1).unwrap();
        let est = estimate_superlinearity(&m, &SampleBox::cube(1, 3.0), &[0.0, 1.0], 200).unwrap();
        let m2 = LagrangianModel::new(
            "fp_est",
            BTreeMap::new(),
            1,
            est,
            Arc::new(|_x: &[f64], _t: f64, xi: &[f64], out: &mut LagrangianEval| {
                out.value = 0.5 * xi[0] * xi[0];
                out.grad_x[0] = 0.0;
                out.grad_xi[0] = xi[0];
                out.hess_xi[(0, 0)] = 1.0;
            }),
        )
        .unwrap();
        let b = m2.superlinearity_bound(1.0).unwrap();
        assert!(!b.exact);
        // The sampled offset can never undercut the exact one.
        assert!(b.value >= -0.5 - 1e-12);
        assert!(m2.superlinearity_bound(0.5).is_none());
    }

    #[test]
    fn linear_terminal_cost_growth_constants() {
        let w = TerminalCost::linear(vec![3.0, 4.0], -1.0).unwrap();
        assert!((w.alpha() - 5.0).abs() < 1e-15);
        assert_eq!(w.beta(), -1.0);
        let mut g = [0.0; 2];
        w.grad_into(&[9.0, 9.0], &mut g);
        assert_eq!(g, [3.0, 4.0]);
    }
}
