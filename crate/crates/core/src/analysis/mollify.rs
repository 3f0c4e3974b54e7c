//! Smooth approximation of Lipschitz candidate curves: discrete convolution
//! with the standard bump kernel plus an affine correction that restores the
//! prescribed endpoints exactly.

use serde::Serialize;

use super::{continuous_action, SampledCurve};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LagrangianEval;
use crate::solve::Problem;

/// Actions may undershoot the smooth-class minimizer by at most this much
/// before the domination check fails; covers quadrature rounding only.
pub const DOMINATION_SLACK: f64 = 1e-9;

/// Kernel size limits: at least MIN_KERNEL offsets per side, at most
/// MAX_KERNEL regardless of how fine the sample grid is.
const MIN_KERNEL: usize = 16;
const MAX_KERNEL: usize = 1024;

/// What the corrected curve must hit at s = 0.
#[derive(Debug, Clone)]
pub enum LeftEnd {
    /// Keep the raw curve's initial value (free initial endpoint).
    Free,
    /// Pin to a prescribed start (two-point problems).
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct MollifyEndpoints {
    pub left: LeftEnd,
    pub right: Vec<f64>,
}

impl MollifyEndpoints {
    /// Endpoint policy matching a problem: fixed start for two-point, free
    /// for Bolza; the right end is always x.
    pub fn for_problem(problem: &Problem) -> Self {
        let left = match problem.start() {
            Some(s) => LeftEnd::Fixed(s.to_vec()),
            None => LeftEnd::Free,
        };
        Self {
            left,
            right: problem.end().to_vec(),
        }
    }
}

/// The standard bump exp(-1/(1-u^2)) on (-1, 1), unnormalized.
fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Piecewise-linear evaluation of the raw curve, extended affinely beyond
/// both ends with the end-segment slopes.
///
/// A constant extension would drag the smoothed curve off every straight
/// line near the boundary by O(eps) and the endpoint correction would then
/// tilt the whole curve; the affine extension keeps all affine inputs exact
/// so the correction only repairs genuine boundary curvature.
struct Extended<'a> {
    curve: &'a SampledCurve,
    first_slope: Vec<f64>,
    last_slope: Vec<f64>,
}

impl<'a> Extended<'a> {
    fn new(curve: &'a SampledCurve) -> Self {
        let d = curve.dim();
        let n = curve.samples();
        let h = curve.step();
        let mut first_slope = vec![0.0; d];
        let mut last_slope = vec![0.0; d];
        for c in 0..d {
            first_slope[c] = (curve.value(1)[c] - curve.value(0)[c]) / h;
            last_slope[c] = (curve.value(n - 1)[c] - curve.value(n - 2)[c]) / h;
        }
        Self {
            curve,
            first_slope,
            last_slope,
        }
    }

    fn value_into(&self, u: f64, out: &mut [f64]) {
        let n = self.curve.samples();
        let d = self.curve.dim();
        let times = self.curve.times();
        if u <= times[0] {
            let dt = u - times[0];
            let v = self.curve.value(0);
            for c in 0..d {
                out[c] = v[c] + self.first_slope[c] * dt;
            }
            return;
        }
        if u >= times[n - 1] {
            let dt = u - times[n - 1];
            let v = self.curve.value(n - 1);
            for c in 0..d {
                out[c] = v[c] + self.last_slope[c] * dt;
            }
            return;
        }
        let h = self.curve.step();
        let seg = (((u - times[0]) / h) as usize).min(n - 2);
        let theta = (u - times[seg]) / (times[seg + 1] - times[seg]);
        let (a, b) = (self.curve.value(seg), self.curve.value(seg + 1));
        for c in 0..d {
            out[c] = a[c] + (b[c] - a[c]) * theta;
        }
    }

    /// Right-continuous slope, so the sampled derivative is the exact
    /// right-derivative of the smoothed polyline.
    fn slope_into(&self, u: f64, out: &mut [f64]) {
        let n = self.curve.samples();
        let times = self.curve.times();
        if u < times[0] {
            out.copy_from_slice(&self.first_slope);
            return;
        }
        if u >= times[n - 1] {
            out.copy_from_slice(&self.last_slope);
            return;
        }
        let h = self.curve.step();
        let seg = (((u - times[0]) / h) as usize).min(n - 2);
        let d = self.curve.dim();
        let (a, b) = (self.curve.value(seg), self.curve.value(seg + 1));
        let dt = times[seg + 1] - times[seg];
        for c in 0..d {
            out[c] = (b[c] - a[c]) / dt;
        }
    }
}

/// Smooths the curve by discrete convolution with the bump kernel of radius
/// eps, then applies the affine correction pinning s = t to `right` and
/// s = 0 to the raw initial value (or the fixed start). Output samples sit on
/// the input grid and carry derivatives.
///
/// Preserved exactly (to rounding): constants, affine curves, both endpoint
/// targets. The max slope grows by at most twice the correction slope.
pub fn mollify_curve(
    curve: &SampledCurve,
    eps: f64,
    endpoints: &MollifyEndpoints,
) -> Result<SampledCurve> {
    let d = curve.dim();
    let n = curve.samples();
    let t = curve.end_time();
    if curve.start_time() != 0.0 {
        return Err(Error::Invalid(
            "mollification expects a curve on [0, t]".into(),
        ));
    }
    if !(eps > 0.0) || !eps.is_finite() || eps >= t / 4.0 {
        return Err(Error::Invalid(format!(
            "mollification radius must lie in (0, t/4) = (0, {}), got {eps}",
            t / 4.0
        )));
    }
    if endpoints.right.len() != d {
        return Err(Error::Dimension {
            what: "right endpoint",
            expected: d,
            got: endpoints.right.len(),
        });
    }
    if let LeftEnd::Fixed(v) = &endpoints.left {
        if v.len() != d {
            return Err(Error::Dimension {
                what: "left endpoint",
                expected: d,
                got: v.len(),
            });
        }
    }

    let ext = Extended::new(curve);
    let m = ((eps / curve.step()).ceil() as usize).clamp(MIN_KERNEL, MAX_KERNEL);
    // Offsets j/m for j = 0..m-1; j = m sits on the bump's zero boundary.
    let kernel: Vec<f64> = (0..m).map(|j| bump(j as f64 / m as f64)).collect();
    let total: f64 = kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>();

    let mut values = vec![0.0; n * d];
    let mut derivs = vec![0.0; n * d];
    let mut buf_a = vec![0.0; d];
    let mut buf_b = vec![0.0; d];
    for i in 0..n {
        let s = curve.times()[i];
        let out_v = &mut values[i * d..(i + 1) * d];
        ext.value_into(s, &mut buf_a);
        for c in 0..d {
            out_v[c] = kernel[0] * buf_a[c];
        }
        for (j, &w) in kernel.iter().enumerate().skip(1) {
            let r = eps * j as f64 / m as f64;
            ext.value_into(s - r, &mut buf_a);
            ext.value_into(s + r, &mut buf_b);
            // Symmetric pairing keeps affine curves exact.
            for c in 0..d {
                out_v[c] += w * (buf_a[c] + buf_b[c]);
            }
        }
        for v in out_v.iter_mut() {
            *v /= total;
        }

        let out_g = &mut derivs[i * d..(i + 1) * d];
        ext.slope_into(s, &mut buf_a);
        for c in 0..d {
            out_g[c] = kernel[0] * buf_a[c];
        }
        for (j, &w) in kernel.iter().enumerate().skip(1) {
            let r = eps * j as f64 / m as f64;
            ext.slope_into(s - r, &mut buf_a);
            ext.slope_into(s + r, &mut buf_b);
            for c in 0..d {
                out_g[c] += w * (buf_a[c] + buf_b[c]);
            }
        }
        for g in out_g.iter_mut() {
            *g /= total;
        }
    }

    // Affine correction: pin both ends without disturbing interior slopes by
    // more than the two correction rates.
    let left_target: &[f64] = match &endpoints.left {
        LeftEnd::Fixed(v) => v,
        LeftEnd::Free => curve.value(0),
    };
    let mut right_gap = vec![0.0; d];
    let mut left_gap = vec![0.0; d];
    for c in 0..d {
        right_gap[c] = endpoints.right[c] - values[(n - 1) * d + c];
        left_gap[c] = left_target[c] - values[c];
    }
    for i in 0..n {
        let s = curve.times()[i];
        let (wr, wl) = (s / t, (t - s) / t);
        for c in 0..d {
            values[i * d + c] += right_gap[c] * wr + left_gap[c] * wl;
            derivs[i * d + c] += (right_gap[c] - left_gap[c]) / t;
        }
    }

    SampledCurve::new(curve.times().to_vec(), d, values, Some(derivs))
}

/// One mollification level.
#[derive(Debug, Clone, Serialize)]
pub struct MollifyRow {
    pub eps: f64,
    pub action: f64,
    /// Richardson estimate of the quadrature error, when available.
    pub quad_error: Option<f64>,
    pub action_minus_raw: f64,
    /// minimizer_action <= action + DOMINATION_SLACK.
    pub dominates: bool,
    /// Worst max-norm gap between the corrected endpoints and their targets.
    pub endpoint_err: f64,
    /// du Bois-Reymond defect: deviation of dL/dxi - cumulative integral of
    /// dL/dx from its best constant, along the smoothed curve.
    pub first_variation_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MollificationStudy {
    pub raw_action: f64,
    pub minimizer_action: f64,
    pub rows: Vec<MollifyRow>,
    pub all_dominate: bool,
}

impl MollificationStudy {
    /// Plain-text aligned table, one row per radius, coarsest first.
    pub fn render_table(&self) -> String {
        let mut rows = vec![[
            "eps".to_string(),
            "action".into(),
            "action-raw".into(),
            "quad_err".into(),
            "endpoint_err".into(),
            "dbr_defect".into(),
            "dominates".into(),
        ]];
        for r in &self.rows {
            rows.push([
                format!("{:.6e}", r.eps),
                format!("{:.12e}", r.action),
                format!("{:+.6e}", r.action_minus_raw),
                r.quad_error
                    .map_or_else(|| "-".into(), |e| format!("{e:.3e}")),
                format!("{:.3e}", r.endpoint_err),
                format!("{:.3e}", r.first_variation_defect),
                if r.dominates { "yes" } else { "NO" }.into(),
            ]);
        }

        let mut out = crate::analysis::align_rows(&rows);
        out.push_str(&format!(
            "raw action: {:.12e}  minimizer: {:.12e}  all dominate: {}\n",
            self.raw_action, self.minimizer_action, self.all_dominate
        ));
        out
    }
}

/// Constancy defect of dL/dxi - integral of dL/dx along the curve; vanishes
/// on solutions of the EL equation, stays O(1) away from them.
fn first_variation_defect(problem: &Problem, curve: &SampledCurve) -> Result<f64> {
    let model = problem.model();
    let d = model.dim();
    let n = curve.samples();
    let h = curve.step();
    let mut ev = LagrangianEval::zeros(d);
    let mut momenta = vec![0.0; n * d];
    let mut gx = vec![0.0; n * d];
    for i in 0..n {
        model.eval_into(
            curve.value(i),
            curve.times()[i],
            curve.deriv(i).expect("mollified curves carry derivatives"),
            &mut ev,
        )?;
        momenta[i * d..(i + 1) * d].copy_from_slice(&ev.grad_xi);
        gx[i * d..(i + 1) * d].copy_from_slice(&ev.grad_x);
    }
    let mut worst = 0.0f64;
    let mut c = vec![0.0; n];
    for comp in 0..d {
        let mut integral = 0.0;
        for i in 0..n {
            if i > 0 {
                integral += 0.5 * h * (gx[(i - 1) * d + comp] + gx[i * d + comp]);
            }
            c[i] = momenta[i * d + comp] - integral;
        }
        let mean = c.iter().sum::<f64>() / n as f64;
        for v in &c {
            worst = worst.max((v - mean).abs());
        }
    }
    Ok(worst)
}

/// Runs mollify_curve for every radius in the strictly decreasing eps_list
/// and compares the resulting actions against the raw curve and the
/// smooth-class minimizer value.
pub fn mollification_study(
    problem: &Problem,
    curve: &SampledCurve,
    eps_list: &[f64],
    minimizer_action: f64,
) -> Result<MollificationStudy> {
    if eps_list.is_empty() {
        return Err(Error::Invalid("need at least one radius".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid(
            "radii must be strictly decreasing".into(),
        ));
    }
    if !minimizer_action.is_finite() {
        return Err(Error::Invalid("minimizer action must be finite".into()));
    }
    if !curve.has_derivs() {
        return Err(Error::Invalid(
            "the raw curve needs derivatives for its own action".into(),
        ));
    }
    let endpoints = MollifyEndpoints::for_problem(problem);
    let raw_action = continuous_action(problem, curve)?.value;

    let n = curve.samples();
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let smooth = mollify_curve(curve, eps, &endpoints)?;
        let quad = continuous_action(problem, &smooth)?;
        let left_target: &[f64] = match &endpoints.left {
            LeftEnd::Fixed(v) => v,
            LeftEnd::Free => curve.value(0),
        };
        let endpoint_err = linalg::dist_inf(smooth.value(0), left_target)
            .max(linalg::dist_inf(smooth.value(n - 1), &endpoints.right));
        rows.push(MollifyRow {
            eps,
            action: quad.value,
            quad_error: quad.error_estimate,
            action_minus_raw: quad.value - raw_action,
            dominates: quad.value + DOMINATION_SLACK >= minimizer_action,
            endpoint_err,
            first_variation_defect: first_variation_defect(problem, &smooth)?,
        });
    }
    let all_dominate = rows.iter().all(|r| r.dominates);
    Ok(MollificationStudy {
        raw_action,
        minimizer_action,
        rows,
        all_dominate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::curves::piecewise_linear;
    use crate::model::{catalog, TerminalCost};

    fn uniform_times(n: usize, t: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    t
                } else {
                    t * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    #[test]
    fn constant_curve_is_untouched() {
        let n = 257;
        let times = uniform_times(n, 1.0);
        let curve = SampledCurve::new(times, 1, vec![0.7; n], Some(vec![0.0; n])).unwrap();
        let out = mollify_curve(
            &curve,
            0.1,
            &MollifyEndpoints {
                left: LeftEnd::Free,
                right: vec![0.7],
            },
        )
        .unwrap();
        for i in 0..n {
            assert!((out.value(i)[0] - 0.7).abs() < 1e-13);
            assert!(out.deriv(i).unwrap()[0].abs() < 1e-13);
        }
    }

    #[test]
    fn affine_curves_are_fixed_points() {
        let n = 513;
        let times = uniform_times(n, 1.0);
        let values: Vec<f64> = times.iter().map(|s| -0.3 + 1.7 * s).collect();
        let curve = SampledCurve::new(times, 1, values, Some(vec![1.7; n])).unwrap();
        let out = mollify_curve(
            &curve,
            0.2,
            &MollifyEndpoints {
                left: LeftEnd::Fixed(vec![-0.3]),
                right: vec![1.4],
            },
        )
        .unwrap();
        for i in 0..n {
            assert!(
                (out.value(i)[0] - curve.value(i)[0]).abs() < 1e-12,
                "sample {i}: {} vs {}",
                out.value(i)[0],
                curve.value(i)[0]
            );
            assert!((out.deriv(i).unwrap()[0] - 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn zigzag_endpoints_and_slope_bound() {
        let curve = piecewise_linear(
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            &[0.0, 0.75, 0.0, 0.75, 1.0],
            1,
            4097,
        )
        .unwrap();
        let max_slope = 3.0;
        let out = mollify_curve(
            &curve,
            0.125,
            &MollifyEndpoints {
                left: LeftEnd::Fixed(vec![0.0]),
                right: vec![1.0],
            },
        )
        .unwrap();
        assert!((out.value(0)[0]).abs() <= 1e-12);
        assert!((out.value(4096)[0] - 1.0).abs() <= 1e-12);
        for i in 0..out.samples() {
            assert!(out.deriv(i).unwrap()[0].abs() <= max_slope + 1e-9);
        }
    }

    #[test]
    fn radius_contract_is_enforced() {
        let n = 65;
        let times = uniform_times(n, 1.0);
        let curve = SampledCurve::new(times, 1, vec![0.0; n], Some(vec![0.0; n])).unwrap();
        let ep = MollifyEndpoints {
            left: LeftEnd::Free,
            right: vec![0.0],
        };
        assert!(mollify_curve(&curve, 0.25, &ep).is_err());
        assert!(mollify_curve(&curve, 0.0, &ep).is_err());
        assert!(mollify_curve(&curve, 0.2499, &ep).is_ok());
    }

    #[test]
    fn study_on_straight_line_is_flat() {
        let m = catalog::free_particle(1).unwrap();
        let p = crate::solve::Problem::two_point(m, vec![0.0], vec![1.0], 1.0).unwrap();
        let n = 2049;
        let times = uniform_times(n, 1.0);
        let values = times.clone();
        let curve = SampledCurve::new(times, 1, values, Some(vec![1.0; n])).unwrap();
        let study = mollification_study(&p, &curve, &[0.125, 0.0625], 0.5).unwrap();
        assert!(study.all_dominate);
        for row in &study.rows {
            assert!((row.action - 0.5).abs() <= 1e-10, "action {}", row.action);
            assert!(row.action_minus_raw.abs() <= 1e-10);
            assert!(row.endpoint_err <= 1e-12);
        }
    }

    #[test]
    fn study_on_zigzag_dominates_and_settles() {
        let m = catalog::free_particle(1).unwrap();
        let w = TerminalCost::zero();
        let p = crate::solve::Problem::bolza(m, vec![1.0], w, 1.0).unwrap();
        let curve = piecewise_linear(
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            &[0.0, 0.75, 0.0, 0.75, 1.0],
            1,
            4097,
        )
        .unwrap();
        let eps: Vec<f64> = (0..5).map(|j| 0.125 / (1 << j) as f64).collect();
        let study = mollification_study(&p, &curve, &eps, 0.5).unwrap();
        assert!(study.all_dominate);
        let diffs: Vec<f64> = study
            .rows
            .iter()
            .map(|r| r.action_minus_raw.abs())
            .collect();
        for pair in diffs.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-10,
                "differences should settle: {diffs:?}"
            );
        }
    }

    #[test]
    fn study_rejects_unsorted_radii() {
        let m = catalog::free_particle(1).unwrap();
        let p = crate::solve::Problem::two_point(m, vec![0.0], vec![1.0], 1.0).unwrap();
        let n = 129;
        let times = uniform_times(n, 1.0);
        let curve = SampledCurve::new(times.clone(), 1, times, Some(vec![1.0; n])).unwrap();
        assert!(mollification_study(&p, &curve, &[0.05, 0.1], 0.5).is_err());
        assert!(mollification_study(&p, &curve, &[], 0.5).is_err());
    }
}
