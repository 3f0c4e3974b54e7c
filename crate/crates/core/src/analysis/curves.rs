//! Parametric candidate curves: piecewise-linear polylines and natural cubic
//! splines through waypoints. Both carry analytic derivatives, so quadrature
//! sees no finite-difference noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SampledCurve;
use crate::error::{Error, Result};

/// Samples the polyline through (kink_times[i], kink_values[i*dim..]) on a
/// uniform grid. Derivatives are the segment slopes, right-continuous at the
/// kinks.
pub fn piecewise_linear(
    kink_times: &[f64],
    kink_values: &[f64],
    dim: usize,
    n_samples: usize,
) -> Result<SampledCurve> {
    let m = kink_times.len();
    if m < 2 {
        return Err(Error::Invalid("a polyline needs at least 2 kinks".into()));
    }
    if kink_times.windows(2).any(|w| w[1] <= w[0]) || kink_times.iter().any(|s| !s.is_finite()) {
        return Err(Error::Invalid(
            "kink times must be finite and strictly increasing".into(),
        ));
    }
    if kink_values.len() != m * dim {
        return Err(Error::Dimension {
            what: "kink values",
            expected: m * dim,
            got: kink_values.len(),
        });
    }
    if n_samples < 2 {
        return Err(Error::Invalid("need at least 2 samples".into()));
    }
    let (s0, s1) = (kink_times[0], kink_times[m - 1]);
    let mut times = Vec::with_capacity(n_samples);
    let mut values = vec![0.0; n_samples * dim];
    let mut derivs = vec![0.0; n_samples * dim];
    for i in 0..n_samples {
        let u = if i == n_samples - 1 {
            s1
        } else {
            s0 + (s1 - s0) * (i as f64 / (n_samples - 1) as f64)
        };
        times.push(u);
        let seg = kink_times.partition_point(|&tk| tk <= u).saturating_sub(1).min(m - 2);
        let h = kink_times[seg + 1] - kink_times[seg];
        let theta = (u - kink_times[seg]) / h;
        for c in 0..dim {
            let a = kink_values[seg * dim + c];
            let b = kink_values[(seg + 1) * dim + c];
            values[i * dim + c] = a + (b - a) * theta;
            derivs[i * dim + c] = (b - a) / h;
        }
    }
    SampledCurve::new(times, dim, values, Some(derivs))
}

/// Natural cubic spline through the waypoints, sampled uniformly with exact
/// polynomial derivatives. Second derivatives vanish at both ends.
pub fn natural_cubic_spline(
    waypoint_times: &[f64],
    waypoint_values: &[f64],
    dim: usize,
    n_samples: usize,
) -> Result<SampledCurve> {
    let m = waypoint_times.len();
    if m < 3 {
        return Err(Error::Invalid("a spline needs at least 3 waypoints".into()));
    }
    if waypoint_times.windows(2).any(|w| w[1] <= w[0])
        || waypoint_times.iter().any(|s| !s.is_finite())
    {
        return Err(Error::Invalid(
            "waypoint times must be finite and strictly increasing".into(),
        ));
    }
    if waypoint_values.len() != m * dim {
        return Err(Error::Dimension {
            what: "waypoint values",
            expected: m * dim,
            got: waypoint_values.len(),
        });
    }
    if n_samples < 2 {
        return Err(Error::Invalid("need at least 2 samples".into()));
    }

    // Second derivatives M_i per component, natural ends M_0 = M_{m-1} = 0,
    // via the scalar tridiagonal system.
    let mut moments = vec![0.0; m * dim];
    let interior = m - 2;
    if interior > 0 {
        let mut diag = vec![0.0; interior];
        let mut sub = vec![0.0; interior];
        let mut sup = vec![0.0; interior];
        for i in 0..interior {
            let h0 = waypoint_times[i + 1] - waypoint_times[i];
            let h1 = waypoint_times[i + 2] - waypoint_times[i + 1];
            sub[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            sup[i] = h1 / 6.0;
        }
        for c in 0..dim {
            let mut rhs = vec![0.0; interior];
            for i in 0..interior {
                let h0 = waypoint_times[i + 1] - waypoint_times[i];
                let h1 = waypoint_times[i + 2] - waypoint_times[i + 1];
                let v0 = waypoint_values[i * dim + c];
                let v1 = waypoint_values[(i + 1) * dim + c];
                let v2 = waypoint_values[(i + 2) * dim + c];
                rhs[i] = (v2 - v1) / h1 - (v1 - v0) / h0;
            }
            // Thomas sweep; the system is strictly diagonally dominant.
            let mut c_prime = vec![0.0; interior];
            let mut d_prime = vec![0.0; interior];
            c_prime[0] = sup[0] / diag[0];
            d_prime[0] = rhs[0] / diag[0];
            for i in 1..interior {
                let denom = diag[i] - sub[i] * c_prime[i - 1];
                c_prime[i] = sup[i] / denom;
                d_prime[i] = (rhs[i] - sub[i] * d_prime[i - 1]) / denom;
            }
            let mut x = d_prime;
            for i in (0..interior - 1).rev() {
                x[i] -= c_prime[i] * x[i + 1];
            }
            for i in 0..interior {
                moments[(i + 1) * dim + c] = x[i];
            }
        }
    }

    let (s0, s1) = (waypoint_times[0], waypoint_times[m - 1]);
    let mut times = Vec::with_capacity(n_samples);
    let mut values = vec![0.0; n_samples * dim];
    let mut derivs = vec![0.0; n_samples * dim];
    for i in 0..n_samples {
        let u = if i == n_samples - 1 {
            s1
        } else {
            s0 + (s1 - s0) * (i as f64 / (n_samples - 1) as f64)
        };
        times.push(u);
        let seg = waypoint_times
            .partition_point(|&tk| tk <= u)
            .saturating_sub(1)
            .min(m - 2);
        let h = waypoint_times[seg + 1] - waypoint_times[seg];
        let a = (waypoint_times[seg + 1] - u) / h;
        let b = (u - waypoint_times[seg]) / h;
        for c in 0..dim {
            let v0 = waypoint_values[seg * dim + c];
            let v1 = waypoint_values[(seg + 1) * dim + c];
            let m0 = moments[seg * dim + c];
            let m1 = moments[(seg + 1) * dim + c];
            values[i * dim + c] = a * v0
                + b * v1
                + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
            derivs[i * dim + c] = (v1 - v0) / h
                + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        }
    }
    SampledCurve::new(times, dim, values, Some(derivs))
}

/// Deterministic family of comparison curves: natural splines through
/// `waypoints` interior points at uniform times, values jittered around the
/// straight line from `start` to `end` by up to `amplitude` per component.
pub fn random_spline_family(
    start: &[f64],
    end: &[f64],
    t: f64,
    count: usize,
    waypoints: usize,
    amplitude: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<SampledCurve>> {
    let dim = start.len();
    if end.len() != dim {
        return Err(Error::Dimension {
            what: "spline family endpoints",
            expected: dim,
            got: end.len(),
        });
    }
    if !(t > 0.0 && t.is_finite()) || waypoints == 0 {
        return Err(Error::Invalid(
            "spline family needs a positive horizon and at least one waypoint".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = waypoints + 2;
    let times: Vec<f64> = (0..m).map(|i| t * i as f64 / (m - 1) as f64).collect();
    let mut family = Vec::with_capacity(count);
    for _ in 0..count {
        let mut values = vec![0.0; m * dim];
        values[..dim].copy_from_slice(start);
        values[(m - 1) * dim..].copy_from_slice(end);
        for i in 1..m - 1 {
            let tau = times[i] / t;
            for c in 0..dim {
                let line = start[c] + (end[c] - start[c]) * tau;
                values[i * dim + c] = line + rng.gen_range(-amplitude..=amplitude);
            }
        }
        family.push(natural_cubic_spline(&times, &values, dim, n_samples)?);
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_hits_kinks_and_slopes() {
        let c = piecewise_linear(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0], 1, 5).unwrap();
        assert_eq!(c.value(0)[0], 0.0);
        assert_eq!(c.value(2)[0], 1.0);
        assert_eq!(c.value(4)[0], 0.0);
        assert_eq!(c.deriv(1).unwrap()[0], 2.0);
        assert_eq!(c.deriv(2).unwrap()[0], -2.0);
        assert_eq!(c.deriv(3).unwrap()[0], -2.0);
    }

    #[test]
    fn spline_interpolates_waypoints() {
        let times = [0.0, 0.25, 0.5, 0.75, 1.0];
        let vals = [0.0, 0.4, -0.2, 0.9, 1.0];
        let c = natural_cubic_spline(&times, &vals, 1, 101).unwrap();
        for (wt, wv) in times.iter().zip(vals.iter()) {
            let i = (wt * 100.0).round() as usize;
            assert!((c.value(i)[0] - wv).abs() < 1e-12, "waypoint at {wt}");
        }
        // Derivatives are consistent with values at second order.
        let h = c.step();
        for i in 1..c.samples() - 1 {
            let fd = (c.value(i + 1)[0] - c.value(i - 1)[0]) / (2.0 * h);
            assert!((fd - c.deriv(i).unwrap()[0]).abs() < 1e-2);
        }
    }

    #[test]
    fn spline_family_is_deterministic_with_matching_endpoints() {
        let a = random_spline_family(&[0.0], &[1.0], 1.0, 3, 4, 0.5, 33, 7).unwrap();
        let b = random_spline_family(&[0.0], &[1.0], 1.0, 3, 4, 0.5, 33, 7).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            assert_eq!(ca.values(), cb.values());
            assert_eq!(ca.value(0)[0], 0.0);
            assert_eq!(ca.value(32)[0], 1.0);
        }
        let c = random_spline_family(&[0.0], &[1.0], 1.0, 3, 4, 0.5, 33, 8).unwrap();
        assert_ne!(a[0].values(), c[0].values());
    }
}
