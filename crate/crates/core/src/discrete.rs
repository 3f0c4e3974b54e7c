//! Grids, the discrete action, its gradient, discrete momenta and Hamilton
//! residuals, and the a-priori bounds certificate.
//!
//! Everything here is exact finite-dimensional calculus: for a grid with
//! h = t/K and nodes y_0..y_K (y_K fixed, y_0 fixed too in two-point mode),
//! the action is sum_k L(y_k, t_k, y'_k) h + w(y_0) with forward slopes
//! y'_k = (y_{k+1} - y_k)/h, and its gradient is the discrete Euler-Lagrange
//! system. The certificate reproduces the comparison-path bounds that confine
//! minimizers to a compact set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::legendre;
use crate::linalg;
use crate::model::LagrangianModel;
use crate::solve::Problem;

/// Uniform grid on [0, t] with K segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t: f64,
    k: usize,
}

impl Grid {
    pub fn new(t: f64, k: usize) -> Result<Self> {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Invalid(format!(
                "horizon must be positive and finite, got {t}"
            )));
        }
        if k < 2 {
            return Err(Error::Invalid(format!("grid needs K >= 2, got {k}")));
        }
        Ok(Self { t, k })
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> f64 {
        self.t / self.k as f64
    }

    /// t_k = h k, with the final node pinned to t exactly.
    pub fn node_time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.k);
        if k == self.k {
            self.t
        } else {
            self.h() * k as f64
        }
    }
}

/// Node values of a discrete path. The terminal node y_K is always fixed;
/// `first_free` is 0 for Bolza paths and 1 when y_0 is fixed too.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    grid: Grid,
    dim: usize,
    first_free: usize,
    /// (K+1) * dim values, node-major.
    nodes: Vec<f64>,
}

impl DiscretePath {
    pub(crate) fn from_nodes(
        grid: Grid,
        dim: usize,
        first_free: usize,
        nodes: Vec<f64>,
    ) -> Self {
        debug_assert!(first_free <= 1);
        debug_assert_eq!(nodes.len(), (grid.k() + 1) * dim);
        Self {
            grid,
            dim,
            first_free,
            nodes,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Index of the first node the optimizer may move.
    pub fn first_free(&self) -> usize {
        self.first_free
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.node(self.grid.k())
    }

    /// Forward slope y'_k = (y_{k+1} - y_k)/h, k in 0..K.
    pub fn slope_into(&self, k: usize, out: &mut [f64]) {
        debug_assert!(k < self.grid.k());
        let h = self.grid.h();
        let a = self.node(k);
        let b = &self.nodes[(k + 1) * self.dim..(k + 2) * self.dim];
        for i in 0..self.dim {
            out[i] = (b[i] - a[i]) / h;
        }
    }

    /// Number of free scalar unknowns.
    pub fn free_dof(&self) -> usize {
        (self.grid.k() - self.first_free) * self.dim
    }

    /// The free nodes as one contiguous slice (node-major).
    pub fn free(&self) -> &[f64] {
        &self.nodes[self.first_free * self.dim..self.grid.k() * self.dim]
    }

    pub fn set_free(&mut self, vals: &[f64]) {
        let lo = self.first_free * self.dim;
        let hi = self.grid.k() * self.dim;
        assert_eq!(vals.len(), hi - lo, "free node count mismatch");
        self.nodes[lo..hi].copy_from_slice(vals);
    }

    pub fn with_free(&self, vals: &[f64]) -> Self {
        let mut out = self.clone();
        out.set_free(vals);
        out
    }

    /// Index of the smallest |y'_k| (Euclidean), ties broken by smallest k.
    pub fn k_star(&self) -> usize {
        let mut best = 0usize;
        let mut best_speed = f64::INFINITY;
        let mut slope = vec![0.0; self.dim];
        for k in 0..self.grid.k() {
            self.slope_into(k, &mut slope);
            let speed = linalg::norm2(&slope);
            if speed < best_speed {
                best_speed = speed;
                best = k;
            }
        }
        best
    }
}

/// Discrete momenta z_k = dL/dxi(y_k, t_k, y'_k), k in 0..K.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumPath {
    grid: Grid,
    dim: usize,
    /// K * dim values, node-major.
    z: Vec<f64>,
}

impl MomentumPath {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.k()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.z[k * self.dim..(k + 1) * self.dim]
    }
}

/// A-priori bounds for a candidate path.
///
/// `c_x` is the action of the comparison path at this K (constant at x for
/// Bolza, the straight line for two-point). `holds` records whether the
/// candidate beats it; for any such path, every node satisfies |y_l| <= r1
/// and the slowest slope satisfies |y'_{k_star}| <= r2, provided the declared
/// superlinearity bound is global (`kinetic_only` false).
#[derive(Debug, Clone, Serialize)]
pub struct BoundsCertificate {
    pub c_x: f64,
    pub r1: f64,
    pub r2: f64,
    pub k_star: usize,
    pub holds: bool,
    /// Action of the certified path, as computed.
    pub action: f64,
    /// Global lower bound -alpha |x| + b_alpha t + beta on the action.
    pub lower_bound: f64,
    /// Whether both b_a offsets were exact.
    pub exact: bool,
    /// True when the superlinearity bound covers the kinetic part only; the
    /// node bounds are then heuristic, not certified.
    pub kinetic_only: bool,
    /// Grid size at which c_x was evaluated.
    pub k: usize,
}

/// Riemann-sum action of a path, plus the terminal cost in Bolza mode.
pub fn discrete_action(problem: &Problem, path: &DiscretePath) -> Result<f64> {
    problem.check_path(path)?;
    let model = problem.model();
    let d = model.dim();
    let grid = path.grid();
    let h = grid.h();
    let mut ev = crate::model::LagrangianEval::zeros(d);
    let mut slope = vec![0.0; d];
    let mut acc = 0.0;
    for k in 0..grid.k() {
        path.slope_into(k, &mut slope);
        model.eval_into(path.node(k), grid.node_time(k), &slope, &mut ev)?;
        acc += ev.value * h;
    }
    if let Some(w) = problem.terminal_cost() {
        acc += w.value(path.node(0));
    }
    Ok(acc)
}

/// Gradient of the discrete action with respect to the free nodes, node-major.
///
/// Component k (k >= 1) is dL/dx(k) h - (dL/dxi(k) - dL/dxi(k-1)); the Bolza
/// component 0 is dL/dx(0) h - dL/dxi(0) + grad w(y_0). A zero gradient is
/// the discrete Euler-Lagrange system.
pub fn discrete_gradient(problem: &Problem, path: &DiscretePath) -> Result<Vec<f64>> {
    problem.check_path(path)?;
    let model = problem.model();
    let d = model.dim();
    let grid = path.grid();
    let h = grid.h();
    let first = path.first_free();
    let mut grad = vec![0.0; path.free_dof()];
    let mut ev = crate::model::LagrangianEval::zeros(d);
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
    }
    Ok(grad)
}

/// z_k = dL/dxi(y_k, t_k, y'_k) for k in 0..K.
pub fn discrete_momenta(model: &LagrangianModel, path: &DiscretePath) -> Result<MomentumPath> {
    let d = model.dim();
    if d != path.dim() {
        return Err(Error::Dimension {
            what: "path",
            expected: d,
            got: path.dim(),
        });
    }
    let grid = path.grid();
    let mut z = Vec::with_capacity(grid.k() * d);
    let mut ev = crate::model::LagrangianEval::zeros(d);
    let mut slope = vec![0.0; d];
    for k in 0..grid.k() {
        path.slope_into(k, &mut slope);
        model.eval_into(path.node(k), grid.node_time(k), &slope, &mut ev)?;
        z.extend_from_slice(&ev.grad_xi);
    }
    Ok(MomentumPath {
        grid,
        dim: d,
        z,
    })
}

/// Max-norm residual of the discrete Hamilton system at (path, momenta):
/// |y'_k - dH/dp(y_k, t_k, z_k)| over k in 0..K, and
/// |z'_k + dH/dx(y_k, t_k, z_k)| with z'_k = (z_k - z_{k-1})/h over k in 1..K.
///
/// The second family equals gradient_k / h up to the conjugate tolerance, so
/// it vanishes exactly when the discrete Euler-Lagrange system does. It is
/// returned unconditionally as a diagnostic.
pub fn discrete_hamilton_residual(
    model: &LagrangianModel,
    path: &DiscretePath,
    momenta: &MomentumPath,
) -> Result<f64> {
    if momenta.grid() != path.grid() || momenta.dim() != path.dim() {
        return Err(Error::EndpointMismatch {
            what: "momenta were built on a different grid",
        });
    }
    let d = model.dim();
    let grid = path.grid();
    let h = grid.h();
    let mut worst = 0.0f64;
    let mut slope = vec![0.0; d];
    let mut warm: Option<Vec<f64>> = None;
    for k in 0..grid.k() {
        path.slope_into(k, &mut slope);
        let tk = grid.node_time(k);
        let conj = legendre::conjugate_velocity(
            model,
            path.node(k),
            tk,
            momenta.node(k),
            warm.as_deref().or(Some(&slope)),
            legendre::DEFAULT_TOL,
        )?;
        worst = worst.max(linalg::dist_inf(&conj.dh_dp, &slope));
        if k > 0 {
            let zk = momenta.node(k);
            let zp = momenta.node(k - 1);
            for i in 0..d {
                let zdot = (zk[i] - zp[i]) / h;
                worst = worst.max((zdot + conj.dh_dx[i]).abs());
            }
        }
        warm = Some(conj.xi);
    }
    Ok(worst)
}

/// Builds the bounds certificate for a candidate path.
///
/// Requires b_a for a = alpha and a = 1 + alpha. `c_x_override` substitutes
/// an externally computed comparison value (e.g. a supremum over grids);
/// otherwise the comparison path at this path's K is used.
pub fn bounds_certificate(
    problem: &Problem,
    path: &DiscretePath,
    c_x_override: Option<f64>,
) -> Result<BoundsCertificate> {
    problem.check_path(path)?;
    let (alpha, beta) = problem.alpha_beta();
    let model = problem.model();
    let b_alpha = model
        .superlinearity_bound(alpha)
        .ok_or(Error::MissingBound { a: alpha })?;
    let b_steep = model
        .superlinearity_bound(1.0 + alpha)
        .ok_or(Error::MissingBound { a: 1.0 + alpha })?;

    let t = problem.horizon();
    let k = path.grid().k();
    let c_x = match c_x_override {
        Some(v) => v,
        None => discrete_action(problem, &problem.comparison_path(k)?)?,
    };
    let action = discrete_action(problem, path)?;
    let x_norm = linalg::norm2(problem.end());

    let r1 = c_x + (1.0 + alpha) * x_norm - b_steep.value * t - beta;
    let r2 = (c_x + alpha * x_norm - b_steep.value * t - beta) / t;
    let lower_bound = -alpha * x_norm + b_alpha.value * t + beta;
    let kinetic_only = matches!(
        model.superlinearity(),
        crate::model::Superlinearity::Quadratic {
            kinetic_only: true,
            ..
        }
    );

    Ok(BoundsCertificate {
        c_x,
        r1,
        r2,
        k_star: path.k_star(),
        holds: action <= c_x,
        action,
        lower_bound,
        exact: b_alpha.exact && b_steep.exact,
        kinetic_only,
        k,
    })
}
