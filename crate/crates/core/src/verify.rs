//! Self-checks against closed forms, identities and known table values.

use std::f64::consts::PI;

use crate::error::Result;
use crate::fem::{ControlSamples, NodalField};
use crate::mesh::{build_time_grid, compute_tc, trapezoid_stats, MovingDomainSpec, Segment, TimeGrid};
use crate::stackelberg::{fixed_point_solve, SNConfig};
use crate::wave::{duality_residual, solve_backward, solve_forward, BackwardProblem, ForwardProblem, Trajectory};

/// Result of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Discrete `L2(Q)` error of the scheme against `sin(pi x) cos(pi t)` on `(0,1) x (0,1)`
/// with `n` cells and `m` steps.
pub fn manufactured_error(n: usize, m: usize) -> Result<f64> {
    let spec = MovingDomainSpec::new(0.0, 1.0)?;
    let grid = build_time_grid(1.0, m)?;
    let zero = Trajectory::zeros(&spec, &grid, n)?;
    let mesh0 = zero.frames[0].mesh.clone();
    let problem = ForwardProblem {
        ic0: NodalField::from_fn(mesh0.clone(), 0, |x| (PI * x).sin()),
        ic1: NodalField::zeros(mesh0, 0),
        left_boundary: vec![0.0; grid.n_levels()],
        source: None,
    };
    let u = solve_forward(&problem, &spec, &grid, n)?;
    let exact = Trajectory::from_fn(&spec, &grid, n, |x, t| (PI * x).sin() * (PI * t).cos())?;
    Ok(u.l2_distance(&exact))
}

/// Smooth space-time source used by the identity checks.
fn smooth_source(x: f64, t: f64) -> f64 {
    (PI * x).sin() * (1.0 + t) + 0.5 * (2.0 * PI * x).sin() * (3.0 * t).cos()
}

/// Largest nodal gap between the backward solve with source `s(x,t)` and the frame-reversed
/// forward solve with source `s(x,T-t)`, on `(0,1) x (0,1)` with `n` cells and steps.
pub fn reversal_gap(n: usize) -> Result<f64> {
    let spec = MovingDomainSpec::new(0.0, 1.0)?;
    let grid = build_time_grid(1.0, n)?;
    let source = Trajectory::from_fn(&spec, &grid, n, smooth_source)?;
    let back = solve_backward(&BackwardProblem::with_source(source.frames.clone())?, &spec, &grid, n)?;

    let reversed = Trajectory::from_fn(&spec, &grid, n, |x, t| smooth_source(x, 1.0 - t))?;
    let mesh0 = reversed.frames[0].mesh.clone();
    let fwd = solve_forward(
        &ForwardProblem {
            ic0: NodalField::zeros(mesh0.clone(), 0),
            ic1: NodalField::zeros(mesh0, 0),
            left_boundary: vec![0.0; grid.n_levels()],
            source: Some(reversed.frames),
        },
        &spec,
        &grid,
        n,
    )?;

    let m = grid.steps();
    let mut gap: f64 = 0.0;
    for j in 0..=m {
        for (a, b) in back.frames[j].values.iter().zip(&fwd.frames[m - j].values) {
            gap = gap.max((a - b).abs());
        }
    }
    Ok(gap)
}

/// Duality residual on the unit square for `n` cells and steps with smooth data.
pub fn duality_at(n: usize) -> Result<f64> {
    let spec = MovingDomainSpec::new(0.0, 1.0)?;
    let grid: TimeGrid = build_time_grid(1.0, n)?;
    let source = Trajectory::from_fn(&spec, &grid, n, smooth_source)?;
    let seg = Segment { start: 0.0, end: 1.0 };
    let bdata = ControlSamples::from_fn(seg, &grid, |_, t| (PI * t).sin() + t * t);
    duality_residual(&bdata, &source.frames, &spec, &grid, n)
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Runs the quick suite behind the `verify` command.
pub fn run_all() -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let tc = compute_tc(0.25)?;
    let oracle = 17.597_834_287_066_33;
    out.push(check(
        "critical time k=1/4",
        (tc - oracle).abs() < 1e-9,
        format!("T_c = {tc:.15e}, reference {oracle:.15e}"),
    ));

    for (mult, reference) in [(1.0, 41.936), (5.0, 202.484), (10.0, 403.167)] {
        let spec = MovingDomainSpec::new(0.25, mult * tc)?;
        let b = trapezoid_stats(&spec, spec.horizon() / 100.0)?.border_length;
        let rel = (b - reference).abs() / reference;
        out.push(check(
            "trapezoid border length",
            rel <= 0.01,
            format!("T = {mult} T_c: {b:.6} vs {reference} ({:.3}%)", 100.0 * rel),
        ));
    }

    let errs = [
        manufactured_error(50, 50)?,
        manufactured_error(100, 100)?,
        manufactured_error(200, 200)?,
    ];
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    out.push(check(
        "manufactured solution refinement",
        ratios.iter().all(|&r| r >= 1.7),
        format!(
            "errors {:.3e} {:.3e} {:.3e}, ratios {:.3} {:.3}",
            errs[0], errs[1], errs[2], ratios[0], ratios[1]
        ),
    ));

    let gap = reversal_gap(64)?;
    out.push(check(
        "backward equals reversed forward",
        gap <= 1e-10,
        format!("max gap {gap:.3e}"),
    ));

    let d = [duality_at(50)?, duality_at(100)?, duality_at(200)?];
    out.push(check(
        "duality residual",
        d[2] <= 0.05 && d[0] > d[1] && d[1] > d[2],
        format!("N=M=50,100,200: {:.3e} {:.3e} {:.3e}", d[0], d[1], d[2]),
    ));

    let spec = MovingDomainSpec::new(0.25, tc)?;
    let grid = build_time_grid(tc, 40)?;
    let r = fixed_point_solve(&SNConfig::default(), &spec, &grid, 40)?;
    out.push(check(
        "leader subsystem stays zero",
        r.leader_subsystem_zero,
        format!("{} sweeps", r.iterations),
    ));

    let zero_target = SNConfig {
        target: crate::stackelberg::Target::Constant(0.0),
        ..SNConfig::default()
    };
    let r = fixed_point_solve(&zero_target, &spec, &grid, 40)?;
    out.push(check(
        "homogeneous problem is a fixed point",
        r.converged && r.iterations == 1 && r.u.max_abs() == 0.0,
        format!("{} sweeps, max |u| = {:e}", r.iterations, r.u.max_abs()),
    ));

    Ok(out)
}
