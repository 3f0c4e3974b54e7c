//! Discrete minimization of Tonelli action functionals.
//!
//! The library minimizes the Riemann-sum discretization of
//! `integral of L(y, s, y') ds + w(y(0))` over piecewise-linear paths with a
//! fixed terminal endpoint, where the initial endpoint is either fixed
//! (two-point problem) or free and penalized by a terminal cost w (Bolza
//! problem). On top of the finite-dimensional solver it provides the
//! machinery to study the limit: Legendre transforms, discrete Hamilton
//! residuals, Euler-Cauchy phase polygons with refinement studies against a
//! reference Hamiltonian flow, and mollified smooth approximants of Lipschitz
//! candidate curves.

pub mod analysis;
pub mod discrete;
pub mod error;
pub mod legendre;
pub mod linalg;
pub mod model;
pub mod solve;

pub use nalgebra;

pub use analysis::curves::{natural_cubic_spline, piecewise_linear, random_spline_family};
pub use analysis::flow::reference_flow;
pub use analysis::mollify::{
    mollification_study, mollify_curve, LeftEnd, MollificationStudy, MollifyEndpoints, MollifyRow,
};
pub use analysis::refine::{
    refine_study, ConvergenceReport, LevelRecord, OracleInfo, RefineOpts, Verdict,
};
pub use analysis::{
    continuous_action, el_residual, polygon_distance, polygonal_interpolant, ActionQuadrature,
    PhasePolygon, SampledCurve,
};
pub use discrete::{
    bounds_certificate, discrete_action, discrete_gradient, discrete_hamilton_residual,
    discrete_momenta, BoundsCertificate, DiscretePath, Grid, MomentumPath,
};
pub use error::{Error, Result};
pub use legendre::{conjugate_velocity, roundtrip_residual, ConjugateResult};
pub use solve::{
    initial_guess, minimize_discrete, transversality_residual, InitStrategy, Method, Problem,
    ProblemKind, SolveOpts, SolveResult,
};
pub use model::{
    catalog, check_conditions, estimate_superlinearity, Check, ConditionReport, LagrangianEval,
    LagrangianModel, ParamValue, SampleBox, SamplePoint, Superlinearity, TerminalCost,
};
