//! Minimization of the discrete action over the free nodes.
//!
//! The Hessian of the discrete action couples node k only to its neighbors
//! through the forward slopes, so Newton systems are block tridiagonal and
//! solvable in O(K). Only the velocity Hessian is available from the model;
//! the assembled blocks are the Gauss-Newton part (1/h) L_xixi plus, in Bolza
//! mode, a finite-difference Hessian of the terminal cost at y_0. That matrix
//! is positive definite for strictly convex models, is the exact Hessian for kinetic
//! quadratic models, and otherwise yields a linearly convergent method with
//! contraction of order h * |L_xx|, safeguarded by an Armijo line search with
//! gradient-descent fallback.

use nalgebra::DMatrix;

use crate::discrete::{
    bounds_certificate, discrete_action, discrete_momenta, BoundsCertificate, DiscretePath, Grid,
    MomentumPath,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LagrangianEval, LagrangianModel, TerminalCost};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Endpoint data: either both ends fixed, or a free initial end with a cost.
#[derive(Debug, Clone)]
pub enum ProblemKind {
    TwoPoint { start: Vec<f64>, end: Vec<f64> },
    Bolza { end: Vec<f64>, cost: TerminalCost },
}

/// A minimization problem: model, endpoint data, horizon.
#[derive(Debug, Clone)]
pub struct Problem {
    model: LagrangianModel,
    kind: ProblemKind,
    t: f64,
}

impl Problem {
    pub fn two_point(
        model: LagrangianModel,
        start: Vec<f64>,
        end: Vec<f64>,
        t: f64,
    ) -> Result<Self> {
        check_endpoint(&model, "start endpoint", &start)?;
        check_endpoint(&model, "terminal endpoint", &end)?;
        check_horizon(t)?;
        Ok(Self {
            model,
            kind: ProblemKind::TwoPoint { start, end },
            t,
        })
    }

    pub fn bolza(model: LagrangianModel, end: Vec<f64>, cost: TerminalCost, t: f64) -> Result<Self> {
        check_endpoint(&model, "terminal endpoint", &end)?;
        check_horizon(t)?;
        Ok(Self {
            model,
            kind: ProblemKind::Bolza { end, cost },
        t,
        })
    }

    pub fn model(&self) -> &LagrangianModel {
        &self.model
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn end(&self) -> &[f64] {
        match &self.kind {
            ProblemKind::TwoPoint { end, .. } => end,
            ProblemKind::Bolza { end, .. } => end,
        }
    }

    pub fn start(&self) -> Option<&[f64]> {
        match &self.kind {
            ProblemKind::TwoPoint { start, .. } => Some(start),
            ProblemKind::Bolza { .. } => None,
        }
    }

    pub fn terminal_cost(&self) -> Option<&TerminalCost> {
        match &self.kind {
            ProblemKind::TwoPoint { .. } => None,
            ProblemKind::Bolza { cost, .. } => Some(cost),
        }
    }

    /// Growth constants of the terminal cost; (0, 0) in two-point mode.
    pub fn alpha_beta(&self) -> (f64, f64) {
        match self.terminal_cost() {
            Some(w) => (w.alpha(), w.beta()),
            None => (0.0, 0.0),
        }
    }

    fn first_free(&self) -> usize {
        match self.kind {
            ProblemKind::TwoPoint { .. } => 1,
            ProblemKind::Bolza { .. } => 0,
        }
    }

    /// Builds a path from the free nodes (node-major), pinning the fixed ones.
    pub fn path_with_free_nodes(&self, k: usize, free: &[f64]) -> Result<DiscretePath> {
        let grid = Grid::new(self.t, k)?;
        let d = self.dim();
        let first = self.first_free();
        if free.len() != (k - first) * d {
            return Err(Error::Dimension {
                what: "free nodes",
                expected: (k - first) * d,
                got: free.len(),
            });
        }
        let mut nodes = vec![0.0; (k + 1) * d];
        if let Some(start) = self.start() {
            nodes[..d].copy_from_slice(start);
        }
        nodes[first * d..k * d].copy_from_slice(free);
        nodes[k * d..].copy_from_slice(self.end());
        Ok(DiscretePath::from_nodes(grid, d, first, nodes))
    }

    /// The comparison path behind C_x: constant at x for Bolza problems, the
    /// straight line for two-point problems.
    pub fn comparison_path(&self, k: usize) -> Result<DiscretePath> {
        let strategy = match self.kind {
            ProblemKind::TwoPoint { .. } => InitStrategy::StraightLine,
            ProblemKind::Bolza { .. } => InitStrategy::Constant,
        };
        initial_guess(self, k, strategy)
    }

    /// Verifies that a path belongs to this problem: same horizon, dimension,
    /// free-node layout, and bit-equal fixed endpoints.
    pub fn check_path(&self, path: &DiscretePath) -> Result<()> {
        if path.dim() != self.dim() {
            return Err(Error::Dimension {
                what: "path",
                expected: self.dim(),
                got: path.dim(),
            });
        }
        if path.grid().horizon() != self.t {
            return Err(Error::EndpointMismatch {
                what: "horizon differs",
            });
        }
        if path.first_free() != self.first_free() {
            return Err(Error::EndpointMismatch {
                what: "free-node layout differs from the problem kind",
            });
        }
        if path.terminal() != self.end() {
            return Err(Error::EndpointMismatch {
                what: "terminal node differs from x",
            });
        }
        if let Some(start) = self.start() {
            if path.node(0) != start {
                return Err(Error::EndpointMismatch {
                    what: "initial node differs from the fixed start",
                });
            }
        }
        Ok(())
    }
}

fn check_endpoint(model: &LagrangianModel, what: &'static str, v: &[f64]) -> Result<()> {
    if v.len() != model.dim() {
        return Err(Error::Dimension {
            what: "endpoint",
            expected: model.dim(),
            got: v.len(),
        });
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::Invalid(format!("{what} must be finite, got {v:?}")));
    }
    Ok(())
}

fn check_horizon(t: f64) -> Result<()> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Invalid(format!(
            "horizon must be positive and finite, got {t}"
        )));
    }
    Ok(())
}

/// Initial path layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// All free nodes at the terminal endpoint; Bolza only.
    Constant,
    /// Nodes on the segment from the initial point to x. For Bolza problems
    /// both ends of the segment are x, so this coincides with `Constant`.
    StraightLine,
}

/// Builds the deterministic initial guess.
pub fn initial_guess(problem: &Problem, k: usize, strategy: InitStrategy) -> Result<DiscretePath> {
    let grid = Grid::new(problem.horizon(), k)?;
    let d = problem.dim();
    let end = problem.end();
    let from: &[f64] = match (strategy, problem.start()) {
        (InitStrategy::Constant, Some(_)) => {
            return Err(Error::Invalid(
                "constant initial guess is only valid for a free initial endpoint".into(),
            ))
        }
        (InitStrategy::Constant, None) => end,
        (InitStrategy::StraightLine, Some(start)) => start,
        (InitStrategy::StraightLine, None) => end,
    };
    let t = grid.horizon();
    let mut nodes = vec![0.0; (k + 1) * d];
    for node in 0..=k {
        let tau = grid.node_time(node) / t;
        for i in 0..d {
            nodes[node * d + i] = from[i] + (end[i] - from[i]) * tau;
        }
    }
    // Fixed nodes must match the problem data bit-exactly.
    nodes[k * d..].copy_from_slice(end);
    if problem.start().is_some() {
        nodes[..d].copy_from_slice(from);
    }
    Ok(DiscretePath::from_nodes(grid, d, problem.first_free(), nodes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Newton,
    GradientDescent,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOpts {
    /// Max-norm gradient tolerance.
    pub tol_grad: f64,
    pub max_iter: usize,
    pub method: Method,
}

impl Default for SolveOpts {
    fn default() -> Self {
        Self {
            tol_grad: 1e-10,
            max_iter: 200,
            method: Method::Newton,
        }
    }
}

/// Outcome of a discrete minimization.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub path: DiscretePath,
    pub momenta: MomentumPath,
    /// discrete_action at `path`, bit-identical to calling it directly.
    pub action: f64,
    /// Max-norm of the discrete gradient at `path`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Present when the model exposes b_a for a in {alpha, 1 + alpha}.
    pub certificate: Option<BoundsCertificate>,
    /// Iterations that used the Newton direction.
    pub newton_steps: usize,
    /// Iterations that fell back to the negative gradient.
    pub fallback_steps: usize,
    /// Action after the initial point and after every accepted step;
    /// non-increasing by the line-search contract.
    pub action_trace: Vec<f64>,
}

struct Blocks {
    diag: Vec<DMatrix<f64>>,
    off: Vec<DMatrix<f64>>,
}

/// One sweep over the terms: discrete gradient plus, on request, the
/// Gauss-Newton block-tridiagonal Hessian approximation.
fn gradient_and_blocks(
    problem: &Problem,
    path: &DiscretePath,
    want_blocks: bool,
) -> Result<(Vec<f64>, Option<Blocks>)> {
    let model = problem.model();
    let d = model.dim();
    let grid = path.grid();
    let h = grid.h();
    let first = path.first_free();
    let n = grid.k() - first;

    let mut grad = vec![0.0; n * d];
    let mut blocks = want_blocks.then(|| Blocks {
        diag: vec![DMatrix::zeros(d, d); n],
        off: vec![DMatrix::zeros(d, d); n.saturating_sub(1)],
    });

    let mut ev = LagrangianEval::zeros(d);
    let mut slope = vec![0.0; d];
    let mut prev_grad_xi = vec![0.0; d];
    for k in 0..grid.k() {
        path.slope_into(k, &mut slope);
        model.eval_into(path.node(k), grid.node_time(k), &slope, &mut ev)?;
        if k >= first {
            let g = &mut grad[(k - first) * d..(k - first + 1) * d];
            for i in 0..d {
                g[i] = ev.grad_x[i] * h - ev.grad_xi[i];
                if k > 0 {
                    g[i] += prev_grad_xi[i];
                }
            }
        }
        prev_grad_xi.copy_from_slice(&ev.grad_xi);

        if let Some(b) = blocks.as_mut() {
            // Term k touches nodes k and k+1 through the slope.
            let scaled = &ev.hess_xi / h;
            if k >= first {
                b.diag[k - first] += &scaled;
                if k + 1 < grid.k() {
                    b.off[k - first] -= &scaled;
                }
            }
            if k + 1 < grid.k() {
                b.diag[k + 1 - first] += &scaled;
            }
        }
    }

    if first == 0 {
        let w = problem
            .terminal_cost()
            .expect("Bolza problems carry a terminal cost");
        let mut gw = vec![0.0; d];
        w.grad_into(path.node(0), &mut gw);
        for i in 0..d {
            grad[i] += gw[i];
        }
        if let Some(b) = blocks.as_mut() {
            // Without the cost curvature the Gauss-Newton model loses the
            // only y_0 stiffness beyond 1/h and the iteration can stall.
            b.diag[0] += terminal_cost_hessian(w, path.node(0));
        }
    }

    Ok((grad, blocks))
}

/// Central-difference Hessian of the terminal cost, symmetrized. Exact for
/// quadratic costs up to rounding.
fn terminal_cost_hessian(w: &TerminalCost, y0: &[f64]) -> DMatrix<f64> {
    let d = y0.len();
    let mut m = DMatrix::zeros(d, d);
    let mut x = y0.to_vec();
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    for i in 0..d {
        let step = 1e-4 * (1.0 + y0[i].abs());
        x[i] = y0[i] + step;
        w.grad_into(&x, &mut gp);
        x[i] = y0[i] - step;
        w.grad_into(&x, &mut gm);
        x[i] = y0[i];
        for j in 0..d {
            m[(j, i)] = (gp[j] - gm[j]) / (2.0 * step);
        }
    }
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Minimizes the discrete action over the free nodes of `init`.
///
/// Returns a non-converged result (not an error) when the iteration budget
/// runs out or the line search cannot make progress; model evaluation
/// failures still surface as errors.
pub fn minimize_discrete(
    problem: &Problem,
    k: usize,
    init: &DiscretePath,
    opts: &SolveOpts,
) -> Result<SolveResult> {
    if init.grid().k() != k {
        return Err(Error::Invalid(format!(
            "initial path has K = {}, expected {k}",
            init.grid().k()
        )));
    }
    problem.check_path(init)?;
    if !(opts.tol_grad > 0.0) {
        return Err(Error::Invalid(format!(
            "gradient tolerance must be positive, got {}",
            opts.tol_grad
        )));
    }

    let mut path = init.clone();
    let mut trial = path.clone();
    let mut action = discrete_action(problem, &path)?;
    let want_blocks = opts.method == Method::Newton;
    let (mut grad, mut blocks) = gradient_and_blocks(problem, &path, want_blocks)?;

    let mut action_trace = vec![action];
    let mut iterations = 0;
    let mut newton_steps = 0;
    let mut fallback_steps = 0;
    let mut converged = false;

    loop {
        let grad_norm = linalg::norm_inf(&grad);
        if grad_norm <= opts.tol_grad {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut is_newton = false;
        let mut dir = match blocks.take() {
            Some(b) => match linalg::solve_block_tridiag(b.diag, &b.off, &neg_grad) {
                Ok(d) => {
                    is_newton = true;
                    d
                }
                // Indefinite pivot far from a minimizer: take a plain
                // gradient step this iteration.
                Err(_) => neg_grad.clone(),
            },
            None => neg_grad.clone(),
        };
        let mut slope_dot = linalg::dot(&grad, &dir);
        if slope_dot >= 0.0 {
            dir = neg_grad.clone();
            slope_dot = linalg::dot(&grad, &dir);
            is_newton = false;
        }

        // Backtracking Armijo line search.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let free: Vec<f64> = path
                .free()
                .iter()
                .zip(&dir)
                .map(|(y, d)| y + step * d)
                .collect();
            trial.set_free(&free);
            let trial_action = discrete_action(problem, &trial)?;
            if trial_action <= action + ARMIJO_C * step * slope_dot {
                accepted = Some(trial_action);
                break;
            }
            step *= 0.5;
        }
        let Some(new_action) = accepted else {
            // No decrease at machine-level steps; report the best iterate.
            break;
        };

        path.set_free(trial.free());
        action = new_action;
        action_trace.push(action);
        iterations += 1;
        if is_newton {
            newton_steps += 1;
        } else {
            fallback_steps += 1;
        }

        let (g, b) = gradient_and_blocks(problem, &path, want_blocks)?;
        grad = g;
        blocks = b;
    }

    let momenta = discrete_momenta(problem.model(), &path)?;
    let (alpha, _) = problem.alpha_beta();
    let model = problem.model();
    let certificate = if model.superlinearity_bound(alpha).is_some()
        && model.superlinearity_bound(1.0 + alpha).is_some()
    {
        Some(bounds_certificate(problem, &path, None)?)
    } else {
        None
    };
    let grad_norm = linalg::norm_inf(&grad);
    Ok(SolveResult {
        path,
        momenta,
        action,
        grad_norm,
        iterations,
        converged,
        certificate,
        newton_steps,
        fallback_steps,
        action_trace,
    })
}

/// |z_0 - grad w(y_0)| in max-norm: the discrete transversality defect at the
/// free initial endpoint. At a converged minimizer it is bounded by the
/// component-0 gradient identity, |L_x(0)| h + tol_grad.
pub fn transversality_residual(problem: &Problem, result: &SolveResult) -> Result<f64> {
    let Some(w) = problem.terminal_cost() else {
        return Err(Error::Invalid(
            "transversality residual requires a free initial endpoint".into(),
        ));
    };
    let y0 = result.path.node(0);
    let mut gw = vec![0.0; problem.dim()];
    w.grad_into(y0, &mut gw);
    Ok(linalg::dist_inf(result.momenta.node(0), &gw))
}
