//! Refinement studies: solve on grids K0 * 2^j, compare the Euler-Cauchy
//! polygons across levels and against the reference flow, and read off the
//! empirical convergence order.

use rayon::prelude::*;
use serde::Serialize;

use super::flow::reference_flow;
use super::{el_residual, polygon_distance, polygonal_interpolant, PhasePolygon};
use crate::discrete::discrete_hamilton_residual;
use crate::error::{Error, Result};
use crate::solve::{initial_guess, minimize_discrete, InitStrategy, Problem, SolveOpts, SolveResult};

/// Levels whose successive polygon distances stay below this are treated as
/// exact rather than as an order measurement.
const EXACT_DIST: f64 = 1e-10;
const MAX_K: usize = 1 << 26;

#[derive(Debug, Clone, Copy)]
pub struct RefineOpts {
    pub solve: SolveOpts,
    pub init: InitStrategy,
    /// Probe count for polygon distances.
    pub n_probe: usize,
    /// The oracle integrates with step <= h_finest / oracle_refine.
    pub oracle_refine: usize,
}

impl Default for RefineOpts {
    fn default() -> Self {
        Self {
            solve: SolveOpts::default(),
            init: InitStrategy::StraightLine,
            n_probe: 1025,
            oracle_refine: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelRecord {
    pub k: usize,
    pub h: f64,
    pub action: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub hamilton_residual: f64,
    /// EL defect of the polygon's position component at its own nodes;
    /// absent on K = 2 grids (too few interior samples).
    pub el_residual: Option<f64>,
    /// Polygon distance to the next finer level; absent on the finest level.
    pub distance_to_next: Option<f64>,
    /// Polygon distance to the reference flow; absent when the oracle could
    /// not be integrated.
    pub distance_to_oracle: Option<f64>,
}

/// Where the reference flow was launched.
#[derive(Debug, Clone, Serialize)]
pub struct OracleInfo {
    /// Finest converged level.
    pub k: usize,
    /// Minimal-velocity node index on that level.
    pub k_star: usize,
    pub t_anchor: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// All successive distances at rounding level; nothing to measure.
    Exact,
    /// Observed order compatible with first-order polygon convergence.
    FirstOrder,
    /// Distances stopped decaying.
    OrderCollapse,
    Inconclusive,
}

impl Verdict {
    /// Stable lowercase name, identical to the serialized form.
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Exact => "exact",
            Verdict::FirstOrder => "first_order",
            Verdict::OrderCollapse => "order_collapse",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelRecord>,
    /// log2 ratios of successive polygon distances; entry j compares levels
    /// (j, j+1) against (j+1, j+2).
    pub observed_orders: Vec<Option<f64>>,
    /// Same construction applied to the EL residuals.
    pub el_orders: Vec<Option<f64>>,
    pub verdict: Verdict,
    pub oracle: Option<OracleInfo>,
}

impl ConvergenceReport {
    /// Plain-text aligned table, one row per level. Missing entries render
    /// as "-"; orders are attached to the coarser of the two compared rows.
    pub fn render_table(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "-".into(), |x| format!("{x:.3e}"))
        }
        fn ord(v: Option<&Option<f64>>) -> String {
            match v {
                Some(&Some(x)) => format!("{x:.2}"),
                _ => "-".into(),
            }
        }

        let mut rows = vec![[
            "K".to_string(),
            "h".into(),
            "action".into(),
            "grad_norm".into(),
            "iters".into(),
            "hamilton".into(),
            "el_resid".into(),
            "dist_next".into(),
            "order".into(),
            "dist_oracle".into(),
        ]];
        for (j, lv) in self.levels.iter().enumerate() {
            rows.push([
                lv.k.to_string(),
                format!("{:.3e}", lv.h),
                format!("{:.12e}", lv.action),
                format!("{:.3e}", lv.grad_norm),
                lv.iterations.to_string(),
                format!("{:.3e}", lv.hamilton_residual),
                opt(lv.el_residual),
                opt(lv.distance_to_next),
                ord(self.observed_orders.get(j)),
                opt(lv.distance_to_oracle),
            ]);
        }

        let mut out = crate::analysis::align_rows(&rows);
        out.push_str(&format!("verdict: {}\n", self.verdict.as_str()));
        if let Some(o) = &self.oracle {
            out.push_str(&format!(
                "oracle: K={} k*={} t*={:.6} x={:?} p={:?}\n",
                o.k, o.k_star, o.t_anchor, o.x, o.p
            ));
        }
        out
    }
}

fn order_between(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0).then(|| (coarse / fine).log2())
}

/// Solves the problem on grids K0 * 2^j for j = 0..levels-1 and measures how
/// fast the phase polygons converge. Levels after the first non-converged
/// solve are dropped and the verdict is inconclusive.
pub fn refine_study(
    problem: &Problem,
    k0: usize,
    levels: usize,
    opts: &RefineOpts,
) -> Result<ConvergenceReport> {
    if k0 < 2 {
        return Err(Error::Invalid(format!("K0 must be at least 2, got {k0}")));
    }
    if levels < 2 {
        return Err(Error::Invalid(format!(
            "a refinement study needs at least 2 levels, got {levels}"
        )));
    }
    let mut ks = Vec::with_capacity(levels);
    let mut k = k0;
    for _ in 0..levels {
        if k > MAX_K {
            return Err(Error::Invalid(format!(
                "refinement level K = {k} exceeds the supported maximum {MAX_K}"
            )));
        }
        ks.push(k);
        k *= 2;
    }

    let solves: Vec<Result<SolveResult>> = ks
        .par_iter()
        .map(|&k| {
            let init = initial_guess(problem, k, opts.init)?;
            minimize_discrete(problem, k, &init, &opts.solve)
        })
        .collect();

    // Keep the converged prefix. A hard error on the coarsest level is a
    // contract problem and surfaces as such.
    let mut kept: Vec<SolveResult> = Vec::new();
    let mut truncated = false;
    for (j, s) in solves.into_iter().enumerate() {
        match s {
            Ok(r) if r.converged => kept.push(r),
            Ok(_) => {
                truncated = true;
                break;
            }
            Err(e) if j == 0 => return Err(e),
            Err(_) => {
                truncated = true;
                break;
            }
        }
    }
    truncated |= kept.len() < levels;

    let model = problem.model();
    let polygons: Vec<PhasePolygon> = kept
        .iter()
        .map(|r| polygonal_interpolant(&r.path, &r.momenta))
        .collect::<Result<_>>()?;

    // Reference flow launched from the finest level's minimal-velocity node,
    // integrated backward to 0 and forward to t, then stitched.
    let mut oracle = None;
    let mut oracle_polygon = None;
    if let Some(finest) = kept.last() {
        let grid = finest.path.grid();
        let k_star = finest.path.k_star();
        let t_anchor = grid.node_time(k_star);
        let x_a = finest.path.node(k_star).to_vec();
        let p_a = finest.momenta.node(k_star).to_vec();
        let max_step = grid.h() / opts.oracle_refine.max(1) as f64;
        let t = grid.horizon();

        let legs = build_oracle_legs(model, &x_a, &p_a, t_anchor, t, max_step);
        if let Ok(poly) = legs {
            oracle_polygon = Some(poly);
            oracle = Some(OracleInfo {
                k: grid.k(),
                k_star,
                t_anchor,
                x: x_a,
                p: p_a,
            });
        }
    }

    let mut records = Vec::with_capacity(kept.len());
    for (j, r) in kept.iter().enumerate() {
        let grid = r.path.grid();
        let hamilton_residual = discrete_hamilton_residual(model, &r.path, &r.momenta)?;
        let el = if grid.k() >= 3 {
            Some(el_residual(model, &polygons[j].position_curve()?)?)
        } else {
            None
        };
        let distance_to_next = if j + 1 < polygons.len() {
            Some(polygon_distance(&polygons[j], &polygons[j + 1], opts.n_probe)?)
        } else {
            None
        };
        let distance_to_oracle = match &oracle_polygon {
            Some(o) => Some(polygon_distance(&polygons[j], o, opts.n_probe)?),
            None => None,
        };
        records.push(LevelRecord {
            k: grid.k(),
            h: grid.h(),
            action: r.action,
            grad_norm: r.grad_norm,
            iterations: r.iterations,
            converged: r.converged,
            hamilton_residual,
            el_residual: el,
            distance_to_next,
            distance_to_oracle,
        });
    }

    let dists: Vec<f64> = records
        .iter()
        .filter_map(|r| r.distance_to_next)
        .collect();
    let observed_orders: Vec<Option<f64>> = dists
        .windows(2)
        .map(|w| order_between(w[0], w[1]))
        .collect();
    let els: Vec<Option<f64>> = records.iter().map(|r| r.el_residual).collect();
    let el_orders: Vec<Option<f64>> = els
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => order_between(a, b),
            _ => None,
        })
        .collect();

    let verdict = if truncated {
        Verdict::Inconclusive
    } else if !dists.is_empty() && dists.iter().all(|&d| d <= EXACT_DIST) {
        Verdict::Exact
    } else {
        match observed_orders.last().copied().flatten() {
            Some(o) if (0.8..=1.2).contains(&o) => Verdict::FirstOrder,
            Some(o) if o < 0.2 => Verdict::OrderCollapse,
            _ => Verdict::Inconclusive,
        }
    };

    Ok(ConvergenceReport {
        levels: records,
        observed_orders,
        el_orders,
        verdict,
        oracle,
    })
}

fn build_oracle_legs(
    model: &crate::model::LagrangianModel,
    x_a: &[f64],
    p_a: &[f64],
    t_anchor: f64,
    t: f64,
    max_step: f64,
) -> Result<PhasePolygon> {
    let d = model.dim();
    let steps_fwd = ((t - t_anchor) / max_step).ceil().max(1.0) as usize;
    let (gf, pf) = reference_flow(model, x_a, p_a, t_anchor, t, steps_fwd)?;
    let (mut times, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
    if t_anchor > 0.0 {
        let steps_back = (t_anchor / max_step).ceil().max(1.0) as usize;
        let (gb, pb) = reference_flow(model, x_a, p_a, t_anchor, 0.0, steps_back)?;
        times.extend_from_slice(gb.times());
        y.extend_from_slice(gb.values());
        z.extend_from_slice(pb.values());
        // Drop the duplicated anchor node of the forward leg.
        times.extend_from_slice(&gf.times()[1..]);
        y.extend_from_slice(&gf.values()[d..]);
        z.extend_from_slice(&pf.values()[d..]);
    } else {
        times.extend_from_slice(gf.times());
        y.extend_from_slice(gf.values());
        z.extend_from_slice(pf.values());
    }
    PhasePolygon::new(times, d, y, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog;
    use crate::solve::Problem;

    #[test]
    fn free_particle_study_is_exact() {
        let m = catalog::free_particle(1).unwrap();
        let p = Problem::two_point(m, vec![0.0], vec![1.0], 1.0).unwrap();
        let rep = refine_study(&p, 2, 4, &RefineOpts::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Exact);
        assert_eq!(rep.levels.len(), 4);
        for rec in &rep.levels {
            assert!((rec.action - 0.5).abs() < 1e-12);
            assert!(rec.distance_to_oracle.unwrap() <= 1e-10);
            if let Some(d) = rec.distance_to_next {
                assert!(d <= 1e-10);
            }
        }

        let table = rep.render_table();
        let lines: Vec<&str> = table.lines().collect();
        // Header, one row per level, verdict, oracle.
        assert_eq!(lines.len(), 4 + 3);
        assert!(lines[0].trim_start().starts_with('K'));
        assert_eq!(lines[5], "verdict: exact");
        assert!(lines[6].starts_with("oracle: K=16"));
    }

    #[test]
    fn oscillator_study_observes_first_order() {
        let m = catalog::harmonic_oscillator(1, 1.0).unwrap();
        let p = Problem::two_point(m, vec![0.0], vec![1.0], 1.0).unwrap();
        let rep = refine_study(&p, 8, 4, &RefineOpts::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::FirstOrder, "orders {:?}", rep.observed_orders);
        let last = rep.observed_orders.last().copied().flatten().unwrap();
        assert!((0.8..=1.2).contains(&last), "order {last}");
        // Oracle distance must itself shrink like h.
        let d: Vec<f64> = rep
            .levels
            .iter()
            .map(|r| r.distance_to_oracle.unwrap())
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "oracle distances {d:?}");
    }

    #[test]
    fn invalid_study_shapes_are_errors() {
        let m = catalog::free_particle(1).unwrap();
        let p = Problem::two_point(m, vec![0.0], vec![1.0], 1.0).unwrap();
        assert!(refine_study(&p, 2, 1, &RefineOpts::default()).is_err());
        assert!(refine_study(&p, 1, 3, &RefineOpts::default()).is_err());
    }

    #[test]
    fn non_convergence_truncates_with_inconclusive_verdict() {
        let m = catalog::harmonic_oscillator(1, 1.0).unwrap();
        let p = Problem::two_point(m, vec![0.0], vec![1.0], 1.0).unwrap();
        let opts = RefineOpts {
            solve: crate::solve::SolveOpts {
                max_iter: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let rep = refine_study(&p, 8, 3, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        assert!(rep.levels.is_empty());
    }
}
