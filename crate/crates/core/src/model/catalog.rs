//! Built-in models with exact superlinearity data and complete flows.
//!
//! Every entry has a quadratic kinetic part, so b_a = -a^2/(2 m_min) - sup V
//! is exact. The harmonic oscillator's potential is unbounded below; its
//! bound is declared kinetic-only (see [`Superlinearity::Quadratic`]) and it
//! stays in the catalog because its two-point problem has a closed-form
//! solution, which the convergence studies lean on.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{EvalFn, LagrangianEval, LagrangianModel, ParamValue, Superlinearity};
use crate::error::{Error, Result};
use crate::linalg;

pub const NAMES: [&str; 4] = [
    "free_particle",
    "harmonic_oscillator",
    "anisotropic_quadratic",
    "mechanical",
];

/// L = (1/2) |xi|^2.
pub fn free_particle(dim: usize) -> Result<LagrangianModel> {
    let eval: Arc<EvalFn> = Arc::new(move |_x, _t, xi, out| {
        out.value = 0.5 * linalg::dot(xi, xi);
        out.grad_x.fill(0.0);
        out.grad_xi.copy_from_slice(xi);
        out.hess_xi.fill_with_identity();
    });
    LagrangianModel::new(
        "free_particle",
        BTreeMap::new(),
        dim,
        Superlinearity::Quadratic {
            min_mass: 1.0,
            potential_sup: 0.0,
            kinetic_only: false,
        },
        eval,
    )
}

/// L = (1/2) |xi|^2 - (omega^2/2) |x|^2.
pub fn harmonic_oscillator(dim: usize, omega: f64) -> Result<LagrangianModel> {
    if !omega.is_finite() || omega < 0.0 {
        return Err(Error::Invalid(format!(
            "harmonic_oscillator needs omega >= 0, got {omega}"
        )));
    }
    let om2 = omega * omega;
    let eval: Arc<EvalFn> = Arc::new(move |x, _t, xi, out| {
        out.value = 0.5 * linalg::dot(xi, xi) - 0.5 * om2 * linalg::dot(x, x);
        for (g, c) in out.grad_x.iter_mut().zip(x) {
            *g = -om2 * c;
        }
        out.grad_xi.copy_from_slice(xi);
        out.hess_xi.fill_with_identity();
    });
    let mut params = BTreeMap::new();
    params.insert("omega".into(), ParamValue::Scalar(omega));
    LagrangianModel::new(
        "harmonic_oscillator",
        params,
        dim,
        Superlinearity::Quadratic {
            min_mass: 1.0,
            potential_sup: 0.0,
            kinetic_only: true,
        },
        eval,
    )
}

/// L = (1/2) sum_i m_i xi_i^2 with all masses positive.
pub fn anisotropic_quadratic(masses: Vec<f64>) -> Result<LagrangianModel> {
    if masses.is_empty() {
        return Err(Error::Invalid("anisotropic_quadratic needs masses".into()));
    }
    if masses.iter().any(|m| !m.is_finite() || *m <= 0.0) {
        return Err(Error::Invalid(format!(
            "anisotropic_quadratic masses must be positive, got {masses:?}"
        )));
    }
    let dim = masses.len();
    let min_mass = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let m = masses.clone();
    let eval: Arc<EvalFn> = Arc::new(move |_x, _t, xi, out| {
        let mut acc = 0.0;
        for i in 0..xi.len() {
            acc += m[i] * xi[i] * xi[i];
            out.grad_xi[i] = m[i] * xi[i];
        }
        out.value = 0.5 * acc;
        out.grad_x.fill(0.0);
        out.hess_xi.fill(0.0);
        for (i, &mi) in m.iter().enumerate() {
            out.hess_xi[(i, i)] = mi;
        }
    });
    let mut params = BTreeMap::new();
    params.insert("masses".into(), ParamValue::Vector(masses));
    LagrangianModel::new(
        "anisotropic_quadratic",
        params,
        dim,
        Superlinearity::Quadratic {
            min_mass,
            potential_sup: 0.0,
            kinetic_only: false,
        },
        eval,
    )
}

/// L = (1/2) |xi|^2 - V(x) with V(x) = A sum_i cos(omega x_i), so |V| <= |A| d.
pub fn mechanical(dim: usize, amplitude: f64, frequency: f64) -> Result<LagrangianModel> {
    if !amplitude.is_finite() || !frequency.is_finite() {
        return Err(Error::Invalid(
            "mechanical needs finite amplitude and frequency".into(),
        ));
    }
    let eval: Arc<EvalFn> = Arc::new(move |x, _t, xi, out| {
        let mut v = 0.0;
        for (g, c) in out.grad_x.iter_mut().zip(x) {
            v += (frequency * c).cos();
            *g = amplitude * frequency * (frequency * c).sin();
        }
        out.value = 0.5 * linalg::dot(xi, xi) - amplitude * v;
        out.grad_xi.copy_from_slice(xi);
        out.hess_xi.fill_with_identity();
    });
    let mut params = BTreeMap::new();
    params.insert("amplitude".into(), ParamValue::Scalar(amplitude));
    params.insert("frequency".into(), ParamValue::Scalar(frequency));
    LagrangianModel::new(
        "mechanical",
        params,
        dim,
        Superlinearity::Quadratic {
            min_mass: 1.0,
            potential_sup: amplitude.abs() * dim as f64,
            kinetic_only: false,
        },
        eval,
    )
}

/// L = (1/2) xi^T M xi for a user-supplied symmetric matrix, the stand-in for
/// externally defined models. Not part of the catalog: M may be degenerate,
/// in which case no superlinearity bound exists and condition checks fail.
pub fn quadratic_form(matrix: DMatrix<f64>) -> Result<LagrangianModel> {
    let dim = matrix.nrows();
    if dim == 0 || matrix.ncols() != dim {
        return Err(Error::Invalid(format!(
            "quadratic_form needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|c| !c.is_finite()) {
        return Err(Error::Invalid("quadratic_form matrix must be finite".into()));
    }
    if linalg::max_skew(&matrix) > 1e-12 {
        return Err(Error::Invalid("quadratic_form matrix must be symmetric".into()));
    }
    let min_eig = linalg::min_symmetric_eigenvalue(&matrix);
    let superlinearity = if min_eig > 0.0 {
        Superlinearity::Quadratic {
            min_mass: min_eig,
            potential_sup: 0.0,
            kinetic_only: false,
        }
    } else {
        Superlinearity::Estimated { table: vec![] }
    };
    let mut params = BTreeMap::new();
    params.insert(
        "matrix".into(),
        ParamValue::Vector(matrix.transpose().as_slice().to_vec()),
    );
    let m = matrix;
    let eval: Arc<EvalFn> = Arc::new(move |_x, _t, xi: &[f64], out: &mut LagrangianEval| {
        let d = xi.len();
        let mut acc = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += m[(i, j)] * xi[j];
            }
            out.grad_xi[i] = row;
            acc += xi[i] * row;
        }
        out.value = 0.5 * acc;
        out.grad_x.fill(0.0);
        out.hess_xi.copy_from(&m);
    });
    LagrangianModel::new("quadratic_form", params, dim, superlinearity, eval)
}

/// Resolves a catalog name with its parameter map.
pub fn lookup(
    name: &str,
    params: &BTreeMap<String, ParamValue>,
    dim: usize,
) -> Result<LagrangianModel> {
    if dim == 0 {
        return Err(Error::Invalid("model dimension must be at least 1".into()));
    }
    match name {
        "free_particle" => {
            reject_unknown(params, &[])?;
            free_particle(dim)
        }
        "harmonic_oscillator" => {
            reject_unknown(params, &["omega"])?;
            harmonic_oscillator(dim, scalar(params, "omega")?.unwrap_or(1.0))
        }
        "anisotropic_quadratic" => {
            reject_unknown(params, &["mass", "masses"])?;
            let masses = match (scalar(params, "mass")?, vector(params, "masses")?) {
                (Some(_), Some(_)) => {
                    return Err(Error::Invalid(
                        "anisotropic_quadratic takes either 'mass' or 'masses', not both".into(),
                    ))
                }
                (Some(m), None) => vec![m; dim],
                (None, Some(v)) => {
                    if v.len() != dim {
                        return Err(Error::Dimension {
                            what: "masses parameter",
                            expected: dim,
                            got: v.len(),
                        });
                    }
                    v
                }
                (None, None) => vec![1.0; dim],
            };
            anisotropic_quadratic(masses)
        }
        "mechanical" => {
            reject_unknown(params, &["amplitude", "frequency"])?;
            mechanical(
                dim,
                scalar(params, "amplitude")?.unwrap_or(1.0),
                scalar(params, "frequency")?.unwrap_or(1.0),
            )
        }
        _ => Err(Error::UnknownModel {
            name: name.into(),
            available: NAMES.join(", "),
        }),
    }
}

fn reject_unknown(params: &BTreeMap<String, ParamValue>, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Invalid(format!(
                "unknown parameter '{key}' (allowed: {})",
                if allowed.is_empty() {
                    "none".to_string()
                } else {
                    allowed.join(", ")
                }
            )));
        }
    }
    Ok(())
}

fn scalar(params: &BTreeMap<String, ParamValue>, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None => Ok(None),
        Some(ParamValue::Scalar(v)) => Ok(Some(*v)),
        Some(ParamValue::Vector(_)) => Err(Error::Invalid(format!(
            "parameter '{key}' must be a scalar"
        ))),
    }
}

fn vector(params: &BTreeMap<String, ParamValue>, key: &str) -> Result<Option<Vec<f64>>> {
    match params.get(key) {
        None => Ok(None),
        Some(ParamValue::Vector(v)) => Ok(Some(v.clone())),
        Some(ParamValue::Scalar(_)) => Err(Error::Invalid(format!(
            "parameter '{key}' must be a vector"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_resolves_catalog_names() {
        let m = lookup("free_particle", &BTreeMap::new(), 1).unwrap();
        assert_eq!(m.name(), "free_particle");

        let mut params = BTreeMap::new();
        params.insert("omega".into(), ParamValue::Scalar(1.0));
        let m = lookup("harmonic_oscillator", &params, 1).unwrap();
        let ev = m.eval(&[1.0], 0.0, &[0.0]).unwrap();
        assert!((ev.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn lookup_rejects_unknown_name_and_zero_dim() {
        let err = lookup("nope", &BTreeMap::new(), 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("free_particle"), "should list catalog: {msg}");
        assert!(lookup("free_particle", &BTreeMap::new(), 0).is_err());
    }

    #[test]
    fn lookup_rejects_unknown_parameter() {
        let mut params = BTreeMap::new();
        params.insert("mass".into(), ParamValue::Scalar(2.0));
        assert!(lookup("free_particle", &params, 1).is_err());
    }

    #[test]
    fn anisotropic_masses_from_scalar_or_vector() {
        let mut params = BTreeMap::new();
        params.insert("mass".into(), ParamValue::Scalar(2.0));
        let m = lookup("anisotropic_quadratic", &params, 2).unwrap();
        let ev = m.eval(&[0.0, 0.0], 0.0, &[1.0, 1.0]).unwrap();
        assert!((ev.value - 2.0).abs() < 1e-15);

        let mut params = BTreeMap::new();
        params.insert("masses".into(), ParamValue::Vector(vec![1.0, 3.0]));
        let m = lookup("anisotropic_quadratic", &params, 2).unwrap();
        assert!((m.superlinearity_bound(2.0).unwrap().value + 2.0).abs() < 1e-15);

        params.insert("mass".into(), ParamValue::Scalar(1.0));
        assert!(lookup("anisotropic_quadratic", &params, 2).is_err());
    }

    #[test]
    fn anisotropic_rejects_nonpositive_mass() {
        assert!(anisotropic_quadratic(vec![1.0, 0.0]).is_err());
        assert!(anisotropic_quadratic(vec![-1.0]).is_err());
    }

    #[test]
    fn mechanical_superlinearity_is_global() {
        let m = mechanical(2, 0.3, 2.0).unwrap();
        // b_a = -a^2/2 - |A| d.
        let b = m.superlinearity_bound(1.0).unwrap();
        assert!(b.exact);
        assert!((b.value - (-0.5 - 0.6)).abs() < 1e-15);
        // Gradient of -A cos(w x) is A w sin(w x).
        let ev = m.eval(&[0.25, -0.5], 0.0, &[0.0, 0.0]).unwrap();
        assert!((ev.grad_x[0] - 0.3 * 2.0 * (2.0 * 0.25f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn quadratic_form_requires_symmetry() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(quadratic_form(asym).is_err());
        let ok = quadratic_form(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let b = ok.superlinearity_bound(1.0).unwrap();
        assert!(b.exact);
        assert!(b.value < 0.0);
    }
}
