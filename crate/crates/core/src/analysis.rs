//! The continuous side: phase polygons, quadrature of the action along
//! sampled curves, Euler-Lagrange residuals, the reference Hamiltonian flow,
//! refinement studies, and mollified approximants.

pub mod curves;
pub mod flow;
pub mod mollify;
pub mod refine;

use crate::discrete::{DiscretePath, MomentumPath};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LagrangianEval, LagrangianModel};
use crate::solve::Problem;

/// Relative slack when checking uniform sample spacing.
const UNIFORM_TOL: f64 = 1e-9;
/// Endpoint value tolerance for admissible comparison curves.
const ENDPOINT_TOL: f64 = 1e-9;

/// A curve sampled on a uniform time grid, optionally with derivatives.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    times: Vec<f64>,
    dim: usize,
    values: Vec<f64>,
    derivs: Option<Vec<f64>>,
}

impl SampledCurve {
    pub fn new(
        times: Vec<f64>,
        dim: usize,
        values: Vec<f64>,
        derivs: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("curve dimension must be positive".into()));
        }
        let n = times.len();
        if n < 2 {
            return Err(Error::Invalid(format!(
                "a sampled curve needs at least 2 samples, got {n}"
            )));
        }
        if times.iter().any(|s| !s.is_finite()) {
            return Err(Error::Invalid("sample times must be finite".into()));
        }
        let h = (times[n - 1] - times[0]) / (n - 1) as f64;
        if h <= 0.0 {
            return Err(Error::Invalid("sample times must increase".into()));
        }
        for w in times.windows(2) {
            let step = w[1] - w[0];
            if step <= 0.0 || (step - h).abs() > UNIFORM_TOL * h {
                return Err(Error::Invalid(format!(
                    "sample times must be uniform: step {} differs from mean {h}",
                    step
                )));
            }
        }
        if values.len() != n * dim {
            return Err(Error::Dimension {
                what: "curve values",
                expected: n * dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("curve values must be finite".into()));
        }
        if let Some(d) = &derivs {
            if d.len() != n * dim {
                return Err(Error::Dimension {
                    what: "curve derivatives",
                    expected: n * dim,
                    got: d.len(),
                });
            }
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("curve derivatives must be finite".into()));
            }
        }
        Ok(Self {
            times,
            dim,
            values,
            derivs,
        })
    }

    pub fn samples(&self) -> usize {
        self.times.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Mean sample spacing; the constructor pins every step to it.
    pub fn step(&self) -> f64 {
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn deriv(&self, i: usize) -> Option<&[f64]> {
        self.derivs
            .as_ref()
            .map(|d| &d[i * self.dim..(i + 1) * self.dim])
    }

    pub fn has_derivs(&self) -> bool {
        self.derivs.is_some()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> Option<&[f64]> {
        self.derivs.as_deref()
    }
}

/// Piecewise-linear interpolant of position and momentum nodes over a common
/// strictly increasing time grid. Node times need not be uniform, so stitched
/// integrator output fits too.
#[derive(Debug, Clone)]
pub struct PhasePolygon {
    times: Vec<f64>,
    dim: usize,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl PhasePolygon {
    pub fn new(times: Vec<f64>, dim: usize, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("polygon dimension must be positive".into()));
        }
        let n = times.len();
        if n < 2 {
            return Err(Error::Invalid(format!(
                "a polygon needs at least 2 nodes, got {n}"
            )));
        }
        if times.iter().any(|s| !s.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(
                "polygon node times must be finite and strictly increasing".into(),
            ));
        }
        for (what, v) in [("polygon positions", &y), ("polygon momenta", &z)] {
            if v.len() != n * dim {
                return Err(Error::Dimension {
                    what,
                    expected: n * dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Invalid(format!("{what} must be finite")));
            }
        }
        Ok(Self { times, dim, y, z })
    }

    pub fn nodes(&self) -> usize {
        self.times.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn y_node(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim..(i + 1) * self.dim]
    }

    pub fn z_node(&self, i: usize) -> &[f64] {
        &self.z[i * self.dim..(i + 1) * self.dim]
    }

    /// Evaluates both components at s. Node times reproduce node values
    /// bit-exactly; between nodes the interpolation is linear.
    pub fn eval_into(&self, s: f64, y_out: &mut [f64], z_out: &mut [f64]) -> Result<()> {
        let n = self.times.len();
        if !(s >= self.times[0] && s <= self.times[n - 1]) {
            return Err(Error::Invalid(format!(
                "evaluation time {s} outside [{}, {}]",
                self.times[0],
                self.times[n - 1]
            )));
        }
        let idx = self.times.partition_point(|&tk| tk <= s);
        let i = idx.saturating_sub(1).min(n - 2);
        if s == self.times[i] {
            y_out.copy_from_slice(self.y_node(i));
            z_out.copy_from_slice(self.z_node(i));
            return Ok(());
        }
        if s == self.times[i + 1] {
            y_out.copy_from_slice(self.y_node(i + 1));
            z_out.copy_from_slice(self.z_node(i + 1));
            return Ok(());
        }
        let theta = (s - self.times[i]) / (self.times[i + 1] - self.times[i]);
        let (ya, yb) = (self.y_node(i), self.y_node(i + 1));
        let (za, zb) = (self.z_node(i), self.z_node(i + 1));
        for c in 0..self.dim {
            y_out[c] = ya[c] + (yb[c] - ya[c]) * theta;
            z_out[c] = za[c] + (zb[c] - za[c]) * theta;
        }
        Ok(())
    }

    /// Lipschitz constant of the interpolant: the largest per-segment slope
    /// of either component in max-norm.
    pub fn max_slope(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.times.len() - 1 {
            let dt = self.times[i + 1] - self.times[i];
            let dy = linalg::dist_inf(self.y_node(i + 1), self.y_node(i));
            let dz = linalg::dist_inf(self.z_node(i + 1), self.z_node(i));
            worst = worst.max(dy.max(dz) / dt);
        }
        worst
    }

    /// Writes the node table as CSV with header `s,y0..,z0..` and one row
    /// per node. Values carry 17 significant digits so a reader recovers
    /// every f64 bit-exactly.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "s")?;
        for c in 0..self.dim {
            write!(out, ",y{c}")?;
        }
        for c in 0..self.dim {
            write!(out, ",z{c}")?;
        }
        writeln!(out)?;
        for i in 0..self.times.len() {
            write!(out, "{:.16e}", self.times[i])?;
            for v in self.y_node(i) {
                write!(out, ",{v:.16e}")?;
            }
            for v in self.z_node(i) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Position component as a sampled curve with forward-difference slopes.
    ///
    /// The terminal node is dropped: the forward slope there is undefined,
    /// and a padded value would break the O(h) decay of the EL residual at
    /// the last interior sample. Requires uniform node times.
    pub fn position_curve(&self) -> Result<SampledCurve> {
        let n = self.times.len();
        if n < 3 {
            return Err(Error::Invalid(
                "position curve needs at least 3 polygon nodes".into(),
            ));
        }
        let d = self.dim;
        let mut derivs = vec![0.0; (n - 1) * d];
        for i in 0..n - 1 {
            let dt = self.times[i + 1] - self.times[i];
            let (a, b) = (self.y_node(i), self.y_node(i + 1));
            for c in 0..d {
                derivs[i * d + c] = (b[c] - a[c]) / dt;
            }
        }
        SampledCurve::new(
            self.times[..n - 1].to_vec(),
            d,
            self.y[..(n - 1) * d].to_vec(),
            Some(derivs),
        )
    }
}

/// Right-aligns rows into a two-space-separated table, header first.
pub(crate) fn align_rows<const N: usize>(rows: &[[String; N]]) -> String {
    let mut widths = [0usize; N];
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (w, cell) in widths.iter().zip(row) {
            if !line.is_empty() {
                line.push_str("  ");
            }
            line.push_str(&" ".repeat(w - cell.len()));
            line.push_str(cell);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Euler-Cauchy polygon of a discrete path and its momenta; the momentum at
/// t_K is extended by z_{K-1}.
pub fn polygonal_interpolant(path: &DiscretePath, momenta: &MomentumPath) -> Result<PhasePolygon> {
    if momenta.grid() != path.grid() || momenta.dim() != path.dim() {
        return Err(Error::EndpointMismatch {
            what: "momenta were built on a different grid",
        });
    }
    let grid = path.grid();
    let d = path.dim();
    let k = grid.k();
    let times: Vec<f64> = (0..=k).map(|j| grid.node_time(j)).collect();
    let mut z = Vec::with_capacity((k + 1) * d);
    for j in 0..k {
        z.extend_from_slice(momenta.node(j));
    }
    z.extend_from_slice(momenta.node(k - 1));
    let mut y = Vec::with_capacity((k + 1) * d);
    for j in 0..=k {
        y.extend_from_slice(path.node(j));
    }
    PhasePolygon::new(times, d, y, z)
}

/// Uniform distance between two polygons over the same time window: the
/// phase-space max-norm gap at n_probe uniform times plus both node sets.
pub fn polygon_distance(a: &PhasePolygon, b: &PhasePolygon, n_probe: usize) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            what: "polygon",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.start() != b.start() || a.horizon() != b.horizon() {
        return Err(Error::EndpointMismatch {
            what: "polygons cover different time windows",
        });
    }
    if n_probe < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 probe points, got {n_probe}"
        )));
    }
    let d = a.dim();
    let (mut ya, mut za, mut yb, mut zb) = (
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
    );
    let (t0, t1) = (a.start(), a.horizon());
    let mut worst = 0.0f64;
    let measure = |s: f64,
                       ya: &mut [f64],
                       za: &mut [f64],
                       yb: &mut [f64],
                       zb: &mut [f64]|
     -> Result<f64> {
        a.eval_into(s, ya, za)?;
        b.eval_into(s, yb, zb)?;
        Ok(linalg::dist_inf(ya, yb).max(linalg::dist_inf(za, zb)))
    };
    for q in 0..n_probe {
        let s = t0 + (t1 - t0) * (q as f64 / (n_probe - 1) as f64);
        worst = worst.max(measure(s, &mut ya, &mut za, &mut yb, &mut zb)?);
    }
    for &s in a.times().iter().chain(b.times()) {
        worst = worst.max(measure(s, &mut ya, &mut za, &mut yb, &mut zb)?);
    }
    Ok(worst)
}

/// Composite Simpson value of the action along a sampled curve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ActionQuadrature {
    pub value: f64,
    /// Richardson half-sampling estimate of the quadrature error; absent when
    /// the sample count leaves no usable half grid (even or < 5 samples).
    pub error_estimate: Option<f64>,
    /// Set when an odd interval count forced a trapezoid on the last one.
    pub trapezoid_fallback: bool,
}

/// Simpson weights over samples f_0..f_{n-1} with step h; odd interval counts
/// get a trapezoid on the final interval.
fn simpson(f: &[f64], h: f64) -> (f64, bool) {
    let n = f.len();
    let intervals = n - 1;
    let even = intervals.is_multiple_of(2);
    let m = if even { intervals } else { intervals - 1 };
    let mut acc = 0.0;
    if m > 0 {
        acc += f[0] + f[m];
        let mut odd_sum = 0.0;
        let mut even_sum = 0.0;
        for (i, &fi) in f.iter().enumerate().take(m).skip(1) {
            if i % 2 == 1 {
                odd_sum += fi;
            } else {
                even_sum += fi;
            }
        }
        acc = (acc + 4.0 * odd_sum + 2.0 * even_sum) * h / 3.0;
    }
    if !even {
        acc += 0.5 * h * (f[n - 2] + f[n - 1]);
    }
    (acc, !even)
}

/// Action of a sampled curve with derivatives: Simpson quadrature of the
/// Lagrangian plus the terminal cost at the initial point for Bolza problems.
///
/// The curve must cover [0, t] exactly and its endpoint values must agree
/// with the problem data to 1e-9, so that comparisons against discrete
/// minimizers are meaningful.
pub fn continuous_action(problem: &Problem, curve: &SampledCurve) -> Result<ActionQuadrature> {
    let model = problem.model();
    let d = model.dim();
    if curve.dim() != d {
        return Err(Error::Dimension {
            what: "curve",
            expected: d,
            got: curve.dim(),
        });
    }
    if !curve.has_derivs() {
        return Err(Error::Invalid(
            "action quadrature needs curve derivatives".into(),
        ));
    }
    let n = curve.samples();
    if n < 3 {
        return Err(Error::Invalid(format!(
            "action quadrature needs at least 3 samples, got {n}"
        )));
    }
    if curve.start_time() != 0.0 || curve.end_time() != problem.horizon() {
        return Err(Error::EndpointMismatch {
            what: "curve samples do not cover [0, t]",
        });
    }
    if linalg::dist_inf(curve.value(n - 1), problem.end()) > ENDPOINT_TOL {
        return Err(Error::EndpointMismatch {
            what: "curve terminal value differs from x",
        });
    }
    if let Some(start) = problem.start() {
        if linalg::dist_inf(curve.value(0), start) > ENDPOINT_TOL {
            return Err(Error::EndpointMismatch {
                what: "curve initial value differs from the fixed start",
            });
        }
    }

    let mut f = Vec::with_capacity(n);
    let mut ev = LagrangianEval::zeros(d);
    for i in 0..n {
        model.eval_into(
            curve.value(i),
            curve.times()[i],
            curve.deriv(i).expect("derivatives checked above"),
            &mut ev,
        )?;
        f.push(ev.value);
    }
    let h = curve.step();
    let (mut value, fallback) = simpson(&f, h);

    // Half-sampling Richardson difference; needs the coarse grid to end on
    // the last sample.
    let error_estimate = if n >= 5 && n % 2 == 1 {
        let coarse: Vec<f64> = f.iter().step_by(2).copied().collect();
        let (coarse_value, _) = simpson(&coarse, 2.0 * h);
        Some((value - coarse_value).abs() / 15.0)
    } else {
        None
    };

    if let Some(w) = problem.terminal_cost() {
        value += w.value(curve.value(0));
    }
    Ok(ActionQuadrature {
        value,
        error_estimate,
        trapezoid_fallback: fallback,
    })
}

/// Max-norm Euler-Lagrange defect along a sampled curve: central differences
/// of the velocity gradient of L against its position gradient, over interior
/// samples.
pub fn el_residual(model: &LagrangianModel, curve: &SampledCurve) -> Result<f64> {
    let d = model.dim();
    if curve.dim() != d {
        return Err(Error::Dimension {
            what: "curve",
            expected: d,
            got: curve.dim(),
        });
    }
    if !curve.has_derivs() {
        return Err(Error::Invalid("EL residual needs curve derivatives".into()));
    }
    let n = curve.samples();
    if n < 3 {
        return Err(Error::Invalid(format!(
            "EL residual needs at least 3 samples, got {n}"
        )));
    }
    let mut ev = LagrangianEval::zeros(d);
    let mut momenta = Vec::with_capacity(n * d);
    let mut grad_x = Vec::with_capacity(n * d);
    for i in 0..n {
        model.eval_into(
            curve.value(i),
            curve.times()[i],
            curve.deriv(i).expect("derivatives checked above"),
            &mut ev,
        )?;
        momenta.extend_from_slice(&ev.grad_xi);
        grad_x.extend_from_slice(&ev.grad_x);
    }
    let mut worst = 0.0f64;
    for i in 1..n - 1 {
        let ds = curve.times()[i + 1] - curve.times()[i - 1];
        for c in 0..d {
            let rate = (momenta[(i + 1) * d + c] - momenta[(i - 1) * d + c]) / ds;
            worst = worst.max((rate - grad_x[i * d + c]).abs());
        }
    }
    Ok(worst)
}
