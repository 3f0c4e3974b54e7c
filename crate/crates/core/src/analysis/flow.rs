//! Reference integration of the Hamilton system. Oracle only: the minimizer
//! never sees this code, so refinement studies that agree with it are
//! evidence, not circular reasoning.

use super::SampledCurve;
use crate::error::{Error, Result};
use crate::legendre::{self, conjugate_velocity};
use crate::model::LagrangianModel;

/// One vector-field evaluation: xdot = dH/dp, pdot = -dH/dx at (x, s, p).
/// The Newton guess is warm-started from the previous conjugate velocity.
fn hamilton_rhs(
    model: &LagrangianModel,
    x: &[f64],
    s: f64,
    p: &[f64],
    guess: &mut [f64],
    xdot: &mut [f64],
    pdot: &mut [f64],
) -> Result<()> {
    let conj = conjugate_velocity(model, x, s, p, Some(guess), legendre::DEFAULT_TOL)?;
    xdot.copy_from_slice(&conj.dh_dp);
    for (o, v) in pdot.iter_mut().zip(&conj.dh_dx) {
        *o = -v;
    }
    guess.copy_from_slice(&conj.xi);
    Ok(())
}

/// Classical 4th-order one-step integration of the Hamilton system from
/// (x0, p0) at t0 to t1, with `steps` uniform steps. t1 < t0 integrates
/// backward; the returned curves always have increasing times. Both returned
/// curves carry derivatives (the vector field along the trajectory).
///
/// Non-finite states abort with a completeness failure at the offending time.
pub fn reference_flow(
    model: &LagrangianModel,
    x0: &[f64],
    p0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<(SampledCurve, SampledCurve)> {
    let d = model.dim();
    if x0.len() != d || p0.len() != d {
        return Err(Error::Dimension {
            what: "flow initial state",
            expected: d,
            got: x0.len().max(p0.len()),
        });
    }
    if steps == 0 {
        return Err(Error::Invalid("flow needs at least one step".into()));
    }
    if !t0.is_finite() || !t1.is_finite() || t0 == t1 {
        return Err(Error::Invalid(format!(
            "flow needs a nondegenerate finite time window, got [{t0}, {t1}]"
        )));
    }

    let dt = (t1 - t0) / steps as f64;
    let mut x = x0.to_vec();
    let mut p = p0.to_vec();
    let mut guess = p0.to_vec();

    let mut times = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity((steps + 1) * d);
    let mut ps = Vec::with_capacity((steps + 1) * d);
    let mut xdots = Vec::with_capacity((steps + 1) * d);
    let mut pdots = Vec::with_capacity((steps + 1) * d);

    let mut k1x = vec![0.0; d];
    let mut k1p = vec![0.0; d];
    let mut k2x = vec![0.0; d];
    let mut k2p = vec![0.0; d];
    let mut k3x = vec![0.0; d];
    let mut k3p = vec![0.0; d];
    let mut k4x = vec![0.0; d];
    let mut k4p = vec![0.0; d];
    let mut xt = vec![0.0; d];
    let mut pt = vec![0.0; d];

    for n in 0..=steps {
        let s = if n == steps { t1 } else { t0 + n as f64 * dt };
        if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::FlowDiverged { s });
        }
        hamilton_rhs(model, &x, s, &p, &mut guess, &mut k1x, &mut k1p)?;
        times.push(s);
        xs.extend_from_slice(&x);
        ps.extend_from_slice(&p);
        xdots.extend_from_slice(&k1x);
        pdots.extend_from_slice(&k1p);
        if n == steps {
            break;
        }

        let half = 0.5 * dt;
        for i in 0..d {
            xt[i] = x[i] + half * k1x[i];
            pt[i] = p[i] + half * k1p[i];
        }
        hamilton_rhs(model, &xt, s + half, &pt, &mut guess, &mut k2x, &mut k2p)?;
        for i in 0..d {
            xt[i] = x[i] + half * k2x[i];
            pt[i] = p[i] + half * k2p[i];
        }
        hamilton_rhs(model, &xt, s + half, &pt, &mut guess, &mut k3x, &mut k3p)?;
        for i in 0..d {
            xt[i] = x[i] + dt * k3x[i];
            pt[i] = p[i] + dt * k3p[i];
        }
        hamilton_rhs(model, &xt, s + dt, &pt, &mut guess, &mut k4x, &mut k4p)?;
        for i in 0..d {
            x[i] += dt * (k1x[i] + 2.0 * (k2x[i] + k3x[i]) + k4x[i]) / 6.0;
            p[i] += dt * (k1p[i] + 2.0 * (k2p[i] + k3p[i]) + k4p[i]) / 6.0;
        }
    }

    if t1 < t0 {
        times.reverse();
        reverse_blocks(&mut xs, d);
        reverse_blocks(&mut ps, d);
        reverse_blocks(&mut xdots, d);
        reverse_blocks(&mut pdots, d);
    }
    let gamma = SampledCurve::new(times.clone(), d, xs, Some(xdots))?;
    let momentum = SampledCurve::new(times, d, ps, Some(pdots))?;
    Ok((gamma, momentum))
}

fn reverse_blocks(v: &mut [f64], d: usize) {
    let n = v.len() / d;
    for i in 0..n / 2 {
        for c in 0..d {
            v.swap(i * d + c, (n - 1 - i) * d + c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog;

    #[test]
    fn free_particle_flow_is_exact() {
        let m = catalog::free_particle(1).unwrap();
        let (g, p) = reference_flow(&m, &[0.0], &[1.0], 0.0, 1.0, 16).unwrap();
        let last = g.samples() - 1;
        assert_eq!(g.value(last)[0], 1.0);
        assert_eq!(p.value(last)[0], 1.0);
        assert_eq!(g.deriv(0).unwrap()[0], 1.0);
        assert_eq!(p.deriv(0).unwrap()[0], 0.0);
    }

    #[test]
    fn oscillator_flow_matches_closed_form() {
        let m = catalog::harmonic_oscillator(1, 1.0).unwrap();
        let t = std::f64::consts::FRAC_PI_2;
        let (g, p) = reference_flow(&m, &[0.0], &[1.0], 0.0, t, 1000).unwrap();
        let last = g.samples() - 1;
        assert!((g.value(last)[0] - 1.0).abs() < 1e-9);
        assert!(p.value(last)[0].abs() < 1e-9);
    }

    #[test]
    fn backward_flow_returns_increasing_times() {
        let m = catalog::harmonic_oscillator(1, 1.0).unwrap();
        let (g, p) = reference_flow(&m, &[1.0], &[0.0], 1.0, 0.0, 64).unwrap();
        assert_eq!(g.start_time(), 0.0);
        assert_eq!(g.end_time(), 1.0);
        // State at the end of the ascending curve is the launch state.
        let last = g.samples() - 1;
        assert_eq!(g.value(last)[0], 1.0);
        assert_eq!(p.value(last)[0], 0.0);
        // cos(1), -sin(1) scaled: x(s) = cos(s-1) => x(0) = cos(1).
        assert!((g.value(0)[0] - 1.0f64.cos()).abs() < 1e-9);
        assert!((p.value(0)[0] - 1.0f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn zero_steps_is_an_error() {
        let m = catalog::free_particle(1).unwrap();
        assert!(reference_flow(&m, &[0.0], &[1.0], 0.0, 1.0, 0).is_err());
    }
}
