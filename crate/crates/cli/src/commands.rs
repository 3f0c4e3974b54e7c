//! The four pipelines. Each returns the process exit code; anything that
//! prevents a run from being set up bubbles out as an error and exits 2,
//! while numerical verdicts land in the result file and exit 1.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use serde::Serialize;

use varmin::{
    check_conditions, discrete_action, discrete_gradient, initial_guess, minimize_discrete,
    mollification_study, polygonal_interpolant, refine_study, roundtrip_residual,
    ConditionReport, LagrangianModel, Problem, RefineOpts, SampleBox, SampledCurve, Verdict,
};

use crate::config::{ProblemSpec, RunConfig};
use crate::output::{self, SolveArtifact};
use crate::{Format, RunArgs};

const LEGENDRE_TOL: f64 = 1e-9;
const GRADIENT_TOL: f64 = 1e-6;

pub fn solve(config: &RunConfig, args: &RunArgs) -> Result<u8> {
    let problem = config.build_problem()?;
    let k = config
        .solver
        .as_ref()
        .and_then(|s| s.k)
        .context("config needs solver.k")?;
    let opts = config.solve_opts();
    let init = initial_guess(&problem, k, config.init_strategy())?;
    let result = minimize_discrete(&problem, k, &init, &opts)?;

    let base = output::out_base(args);
    if args.format.json() {
        let path = output::with_suffix(&base, ".json");
        output::write_json(&path, &SolveArtifact::new(&result))?;
    }
    if args.format.csv() {
        let path = output::with_suffix(&base, ".csv");
        output::write_bytes(&path, output::path_csv(&result.path, &result.momenta).as_bytes())?;
    }
    if !args.quiet {
        eprintln!(
            "action {:.12e}  grad {:.3e}  iterations {}  {}",
            result.action,
            result.grad_norm,
            result.iterations,
            if result.converged { "converged" } else { "NOT converged" },
        );
    }
    Ok(u8::from(!result.converged))
}

pub fn converge(config: &RunConfig, args: &RunArgs) -> Result<u8> {
    let problem = config.build_problem()?;
    let study = config
        .study
        .as_ref()
        .context("config needs a \"study\" section")?;
    let defaults = RefineOpts::default();
    let opts = RefineOpts {
        solve: config.solve_opts(),
        init: config.init_strategy(),
        n_probe: study.n_probe.unwrap_or(defaults.n_probe),
        oracle_refine: study.oracle_refine.unwrap_or(defaults.oracle_refine),
    };
    let report = refine_study(&problem, study.k0, study.levels, &opts)?;

    let base = output::out_base(args);
    if args.format.json() {
        output::write_json(&output::with_suffix(&base, ".json"), &report)?;
    }
    if args.format.csv() {
        // The finest converged level's polygon; the solve is deterministic,
        // so this reproduces the study's own polygon bit for bit.
        if let Some(last) = report.levels.last() {
            let init = initial_guess(&problem, last.k, opts.init)?;
            let result = minimize_discrete(&problem, last.k, &init, &opts.solve)?;
            let poly = polygonal_interpolant(&result.path, &result.momenta)?;
            let mut buf = Vec::new();
            poly.write_csv(&mut buf)?;
            output::write_bytes(&output::with_suffix(&base, ".polygon.csv"), &buf)?;
        }
    }
    if !args.quiet {
        print!("{}", report.render_table());
    }
    Ok(u8::from(!matches!(
        report.verdict,
        Verdict::Exact | Verdict::FirstOrder
    )))
}

#[derive(Serialize)]
struct SweepReport {
    samples: usize,
    worst: f64,
    tol: f64,
    pass: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct VerifyReport {
    model: String,
    dim: usize,
    conditions: ConditionReport,
    legendre: SweepReport,
    gradient: SweepReport,
    pass: bool,
}

pub fn verify(config: &RunConfig, args: &RunArgs) -> Result<u8> {
    if args.format != Format::Json {
        bail!("verify writes a JSON report only; drop --format");
    }
    let model = config.build_model()?;
    let spec = config.verify.as_ref();
    let n_samples = spec.and_then(|s| s.n_samples).unwrap_or(512);
    let half_width = spec.and_then(|s| s.half_width).unwrap_or(2.0);
    let bx = SampleBox::cube(model.dim(), half_width);

    let cost = match &config.problem {
        Some(ProblemSpec::Bolza { terminal_cost, .. }) => Some(terminal_cost.build()?),
        _ => None,
    };
    let conditions = check_conditions(&model, cost.as_ref(), &bx, n_samples)?;
    let legendre = legendre_sweep(&model, half_width, n_samples);
    let gradient = gradient_sweep(config, &model, half_width)?;

    let pass = conditions.pass && legendre.pass && gradient.pass;
    let report = VerifyReport {
        model: model.name().to_string(),
        dim: model.dim(),
        conditions,
        legendre,
        gradient,
        pass,
    };
    let base = output::out_base(args);
    output::write_json(&output::with_suffix(&base, ".json"), &report)?;
    if !args.quiet {
        eprintln!(
            "conditions {}  legendre {}  gradient {}",
            verdict(report.conditions.pass),
            verdict(report.legendre.pass),
            verdict(report.gradient.pass),
        );
    }
    Ok(u8::from(!report.pass))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "ok"
    } else {
        "FAILED"
    }
}

/// Transform round-trip xi -> p -> xi over a deterministic sample cloud.
fn legendre_sweep(model: &LagrangianModel, half_width: f64, n: usize) -> SweepReport {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let d = model.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-half_width..half_width)).collect();
        let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-half_width..half_width)).collect();
        let t = rng.gen_range(-half_width..half_width);
        match roundtrip_residual(model, &x, t, &xi) {
            Ok(r) => worst = worst.max(r),
            Err(err) => {
                return SweepReport {
                    samples: i,
                    worst,
                    tol: LEGENDRE_TOL,
                    pass: false,
                    error: Some(err.to_string()),
                }
            }
        }
    }
    SweepReport {
        samples: n,
        worst,
        tol: LEGENDRE_TOL,
        pass: worst <= LEGENDRE_TOL,
        error: None,
    }
}

/// Discrete gradient against central differences on random paths of the
/// configured problem, or a synthetic two-point problem when none is given.
fn gradient_sweep(config: &RunConfig, model: &LagrangianModel, half_width: f64) -> Result<SweepReport> {
    let problem = if config.problem.is_some() {
        config.build_problem()?
    } else {
        let d = model.dim();
        Problem::two_point(model.clone(), vec![0.0; d], vec![1.0; d], 1.0)?
    };
    let k = 8;
    let n_paths = 16;
    let first = usize::from(problem.start().is_some());
    let free_dof = (k - first) * problem.dim();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut run = || -> varmin::Result<f64> {
        let mut worst = 0.0f64;
        for _ in 0..n_paths {
            let free: Vec<f64> = (0..free_dof)
                .map(|_| rng.gen_range(-half_width..half_width))
                .collect();
            let path = problem.path_with_free_nodes(k, &free)?;
            let grad = discrete_gradient(&problem, &path)?;
            let scale = grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
            let mut bumped = free.clone();
            for i in 0..free.len() {
                let step = 1e-6 * (1.0 + free[i].abs());
                bumped[i] = free[i] + step;
                let up = discrete_action(&problem, &problem.path_with_free_nodes(k, &bumped)?)?;
                bumped[i] = free[i] - step;
                let down = discrete_action(&problem, &problem.path_with_free_nodes(k, &bumped)?)?;
                bumped[i] = free[i];
                let fd = (up - down) / (2.0 * step);
                worst = worst.max((grad[i] - fd).abs() / scale);
            }
        }
        Ok(worst)
    };
    let error = match run() {
        Ok(w) => {
            worst = w;
            None
        }
        Err(err) => Some(err.to_string()),
    };
    Ok(SweepReport {
        samples: n_paths,
        worst,
        tol: GRADIENT_TOL,
        pass: error.is_none() && worst <= GRADIENT_TOL,
        error,
    })
}

pub fn mollify(config: &RunConfig, args: &RunArgs) -> Result<u8> {
    if args.format != Format::Json {
        bail!("mollify writes a JSON report and a text table; drop --format");
    }
    let problem = config.build_problem()?;
    let spec = config
        .mollify
        .as_ref()
        .context("config needs a \"mollify\" section")?;
    let curve_path = if spec.curve.is_absolute() {
        spec.curve.clone()
    } else {
        args.config
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&spec.curve)
    };
    let curve = read_curve_csv(&curve_path, problem.dim())?;
    let study = mollification_study(&problem, &curve, &spec.eps, spec.minimizer_action)?;

    let base = output::out_base(args);
    output::write_json(&output::with_suffix(&base, ".json"), &study)?;
    let table = study.render_table();
    output::write_bytes(&output::with_suffix(&base, ".txt"), table.as_bytes())?;
    if !args.quiet {
        print!("{table}");
    }
    Ok(u8::from(!study.all_dominate))
}

/// Reads a sampled curve with velocities: header `s,y0..,v0..`, one row per
/// uniform sample.
fn read_curve_csv(path: &Path, dim: usize) -> Result<SampledCurve> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading curve {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("curve file is empty")?;
    let mut expected = String::from("s");
    for c in 0..dim {
        expected.push_str(&format!(",y{c}"));
    }
    for c in 0..dim {
        expected.push_str(&format!(",v{c}"));
    }
    if header.trim() != expected {
        bail!(
            "curve header mismatch in {}: expected '{expected}', got '{}'",
            path.display(),
            header.trim()
        );
    }

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("curve row {} in {}", row + 2, path.display()))?;
        if cells.len() != 1 + 2 * dim {
            bail!(
                "curve row {} in {} has {} columns, expected {}",
                row + 2,
                path.display(),
                cells.len(),
                1 + 2 * dim
            );
        }
        times.push(cells[0]);
        values.extend_from_slice(&cells[1..1 + dim]);
        derivs.extend_from_slice(&cells[1 + dim..]);
    }
    SampledCurve::new(times, dim, values, Some(derivs))
        .with_context(|| format!("validating curve {}", path.display()))
}
