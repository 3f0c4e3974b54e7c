//! Numerical Legendre transform in the velocity variable.
//!
//! H(x, t, p) = sup_xi { p . xi - L(x, t, xi) }. Under strict convexity the
//! supremum is attained at the unique root of dL/dxi = p, found here by a
//! damped Newton iteration with the velocity Hessian as Jacobian. The
//! derivative identities dH/dp = xi and dH/dx = -dL/dx come for free.

use nalgebra::{Cholesky, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LagrangianEval, LagrangianModel};

/// Default residual tolerance on |dL/dxi - p|.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Newton iteration cap; strict convexity makes this generous.
pub const MAX_ITERS: usize = 50;

/// Maximizer of p . xi - L and the Hamiltonian data at it.
#[derive(Debug, Clone)]
pub struct ConjugateResult {
    /// The conjugate velocity xi(x, t, p).
    pub xi: Vec<f64>,
    /// H(x, t, p) = p . xi - L(x, t, xi).
    pub h: f64,
    /// dH/dp, equal to xi by construction.
    pub dh_dp: Vec<f64>,
    /// dH/dx = -dL/dx evaluated at the maximizer.
    pub dh_dx: Vec<f64>,
    pub newton_iters: usize,
    /// Final max-norm of dL/dxi - p.
    pub residual: f64,
}

/// Solves dL/dxi(x, t, xi) = p for xi.
///
/// `guess` defaults to xi = p, exact for unit-mass kinetic terms; callers on
/// a grid should pass the previous node's velocity as a warm start. Steps are
/// halved while the residual fails to decrease, which cannot change the fixed
/// point but guards against poor guesses far from the root.
pub fn conjugate_velocity(
    model: &LagrangianModel,
    x: &[f64],
    t: f64,
    p: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
) -> Result<ConjugateResult> {
    let d = model.dim();
    if p.len() != d {
        return Err(Error::Dimension {
            what: "momentum",
            expected: d,
            got: p.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }

    let mut xi = match guess {
        Some(g) => {
            if g.len() != d {
                return Err(Error::Dimension {
                    what: "conjugate guess",
                    expected: d,
                    got: g.len(),
                });
            }
            g.to_vec()
        }
        None => p.to_vec(),
    };

    let mut ev = LagrangianEval::zeros(d);
    model.eval_into(x, t, &xi, &mut ev)?;
    let residual_of = |ev: &LagrangianEval| {
        ev.grad_xi
            .iter()
            .zip(p)
            .fold(0.0f64, |m, (g, pc)| m.max((g - pc).abs()))
    };
    let mut residual = residual_of(&ev);
    let mut iters = 0;

    while residual > tol {
        if iters >= MAX_ITERS {
            return Err(Error::ConjugateStalled {
                iters,
                residual,
                tol,
            });
        }
        let chol = Cholesky::new(ev.hess_xi.clone()).ok_or_else(|| Error::IndefiniteHessian {
            x: x.to_vec(),
            t,
            xi: xi.clone(),
        })?;
        let f = DVector::from_iterator(d, ev.grad_xi.iter().zip(p).map(|(g, pc)| g - pc));
        let delta = chol.solve(&f);

        // Damped update: halve until the residual actually drops.
        let mut step = 1.0;
        let mut trial = vec![0.0; d];
        let mut accepted = false;
        for _ in 0..30 {
            for i in 0..d {
                trial[i] = xi[i] - step * delta[i];
            }
            model.eval_into(x, t, &trial, &mut ev)?;
            let r = residual_of(&ev);
            if r < residual {
                xi.copy_from_slice(&trial);
                residual = r;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iters += 1;
        if !accepted {
            return Err(Error::ConjugateStalled {
                iters,
                residual,
                tol,
            });
        }
    }

    // Invariant: `ev` was produced at the current `xi`, both on the
    // zero-iteration path and after every accepted damping trial.
    let h = linalg::dot(p, &xi) - ev.value;
    Ok(ConjugateResult {
        dh_dp: xi.clone(),
        dh_dx: ev.grad_x.iter().map(|g| -g).collect(),
        xi,
        h,
        newton_iters: iters,
        residual,
    })
}

/// |xi_back - xi| in max-norm, where xi_back is the conjugate velocity of
/// p = dL/dxi(x, t, xi). Zero for an exact transform pair.
pub fn roundtrip_residual(model: &LagrangianModel, x: &[f64], t: f64, xi: &[f64]) -> Result<f64> {
    let ev = model.eval(x, t, xi)?;
    let back = conjugate_velocity(model, x, t, &ev.grad_xi, None, DEFAULT_TOL)?;
    Ok(linalg::dist_inf(&back.xi, xi))
}
