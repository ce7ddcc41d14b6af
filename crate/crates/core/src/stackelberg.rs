//! Fixed-point computation of the Stackelberg-Nash boundary controls.
//!
//! Each sweep solves, in order, the state `u` (forward), its adjoint `p` (backward,
//! driven by `u - u2`), the auxiliary state `psi` (forward, driven on the follower
//! segment by the previous sweep's `phi` flux) and its adjoint `phi` (backward, driven by
//! `psi`). The leader is then `-dphi/dnu` on `sigma1` and the follower `dp/dnu / sigma` on
//! `sigma2`, where `d/dnu = -d/dx` is the outward normal derivative at `x = 0`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{control_l2_norm, ControlSamples, NodalField};
use crate::mesh::{level_meshes, BoundarySegments, MovingDomainSpec, Segment, SegmentMode, TimeGrid};
use crate::wave::{
    consistent_normal_flux, normal_flux_left, solve_backward, solve_backward_consistent, solve_forward, AdjointScheme,
    BackwardProblem, FluxMethod, ForwardProblem, Trajectory,
};

/// A scalar function of space and time.
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// A scalar function of one variable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tracking target `u2` of the follower.
#[derive(Clone)]
pub enum Target {
    Constant(f64),
    Field(SpaceTimeFn),
}

impl Target {
    pub fn value(&self, x: f64, t: f64) -> f64 {
        match self {
            Target::Constant(c) => *c,
            Target::Field(f) => f(x, t),
        }
    }

    /// `u - u2` frame by frame.
    pub fn residual(&self, u: &Trajectory) -> Trajectory {
        let frames = u
            .frames
            .iter()
            .enumerate()
            .map(|(m, f)| {
                let t = u.grid.time(m);
                let nodes = f.mesh.nodes();
                NodalField {
                    mesh: f.mesh.clone(),
                    values: f.values.iter().zip(nodes).map(|(v, x)| v - self.value(x, t)).collect(),
                    level: m,
                }
            })
            .collect();
        Trajectory {
            grid: u.grid.clone(),
            frames,
        }
    }
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Constant(c) => write!(f, "Constant({c})"),
            Target::Field(_) => f.write_str("Field(..)"),
        }
    }
}

/// Data `(f0, f1)` for `phi(T)` and `phi_t(T)`.
#[derive(Clone)]
pub struct PhiTerminal {
    pub f0: ScalarFn,
    pub f1: ScalarFn,
}

impl fmt::Debug for PhiTerminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PhiTerminal(..)")
    }
}

/// Parameters of the fixed-point driver.
#[derive(Clone)]
pub struct SNConfig {
    /// Follower penalty.
    pub sigma: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub target: Target,
    /// `None` means zero terminal data.
    pub phi_terminal: Option<PhiTerminal>,
    /// Starting leader `w1_0(t)`; zero when absent.
    pub initial_w1: Option<ScalarFn>,
    /// Starting follower `w2_0(t)`; zero when absent.
    pub initial_w2: Option<ScalarFn>,
    /// Initial displacement and velocity of `u`; zero when absent.
    pub u0: Option<ScalarFn>,
    pub u1: Option<ScalarFn>,
    pub segment_mode: SegmentMode,
    /// Boundary derivative recovery for the printed adjoint scheme.
    pub flux: FluxMethod,
    pub adjoint: AdjointScheme,
}

impl fmt::Debug for SNConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set = |o: bool| if o { "set" } else { "zero" };
        f.debug_struct("SNConfig")
            .field("sigma", &self.sigma)
            .field("epsilon", &self.epsilon)
            .field("max_iter", &self.max_iter)
            .field("target", &self.target)
            .field("phi_terminal", &set(self.phi_terminal.is_some()))
            .field("initial_w1", &set(self.initial_w1.is_some()))
            .field("initial_w2", &set(self.initial_w2.is_some()))
            .field("u0", &set(self.u0.is_some()))
            .field("u1", &set(self.u1.is_some()))
            .field("segment_mode", &self.segment_mode)
            .field("flux", &self.flux)
            .field("adjoint", &self.adjoint)
            .finish()
    }
}

impl Default for SNConfig {
    fn default() -> Self {
        Self {
            sigma: 1e2,
            epsilon: 1e-5,
            max_iter: 100,
            target: Target::Constant(10.0),
            phi_terminal: None,
            initial_w1: None,
            initial_w2: None,
            u0: None,
            u1: None,
            segment_mode: SegmentMode::DisjointHalves,
            flux: FluxMethod::OneSided,
            adjoint: AdjointScheme::Printed,
        }
    }
}

impl SNConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Usage {
                key: "sigma".into(),
                reason: format!("must be positive, got {}", self.sigma),
            });
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Usage {
                key: "epsilon".into(),
                reason: format!("must be positive, got {}", self.epsilon),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::Usage {
                key: "max_iter".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Quantities recorded after sweep `n`, all describing the new iterate `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based sweep count.
    pub n: usize,
    pub stop_qty: f64,
    /// `||u^n - u^{n-1}||_{L2(Q)}`.
    pub du_l2: f64,
    /// `sum_i ||w_i^n - w_i^{n-1}||_{L2(Sigma_i)}`.
    pub dw_l2: f64,
    /// Leader functional at `w1^n`.
    pub j: f64,
    /// Follower functional at `(u^n, w2^n)`.
    pub j2: f64,
    /// `||u^n - u_final||_{L2(Q)}`.
    pub du_to_final: f64,
    /// `sum_i ||w_i^n - w_i_final||_{L2(Sigma_i)}`.
    pub dw_to_final: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
}

impl IterationLog {
    pub const CSV_HEADER: &'static str = "n,stop_qty,du_L2,dw_L2,J,J2,du_to_final,dw_to_final";

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.n, r.stop_qty, r.du_l2, r.dw_l2, r.j, r.j2, r.du_to_final, r.dw_to_final
            )?;
        }
        Ok(())
    }
}

/// Outcome of [`fixed_point_solve`].
#[derive(Debug, Clone)]
pub struct SNResult {
    pub converged: bool,
    pub iterations: usize,
    pub w1: ControlSamples,
    pub w2: ControlSamples,
    /// State driven by the final controls.
    pub u: Trajectory,
    /// Adjoint of the final state.
    pub p: Trajectory,
    pub psi: Trajectory,
    pub phi: Trajectory,
    pub log: IterationLog,
    /// `psi`, `phi` and `w1` were bit-exactly zero at every sweep.
    pub leader_subsystem_zero: bool,
}

impl SNResult {
    pub fn final_stop_qty(&self) -> f64 {
        self.log.records.last().map_or(f64::INFINITY, |r| r.stop_qty)
    }
}

/// `w2^m = (dp/dnu)^m / sigma` on the follower levels, from precomputed normal derivatives.
pub fn follower_from_flux(normal_flux: &[f64], sigma: f64, segment: Segment, grid: &TimeGrid) -> ControlSamples {
    ControlSamples::from_fn(segment, grid, |m, _| normal_flux[m] / sigma)
}

/// `w1^m = -(dphi/dnu)^m` on the leader levels, from precomputed normal derivatives.
pub fn leader_from_flux(normal_flux: &[f64], segment: Segment, grid: &TimeGrid) -> ControlSamples {
    ControlSamples::from_fn(segment, grid, |m, _| -normal_flux[m])
}

/// Follower response to an adjoint `p`, with the one-sided boundary derivative.
pub fn follower_update(
    p: &Trajectory,
    sigma: f64,
    segments: &BoundarySegments,
    grid: &TimeGrid,
) -> Result<ControlSamples> {
    let flux = normal_flux_left(p, &[], FluxMethod::OneSided)?;
    Ok(follower_from_flux(&flux, sigma, segments.sigma2, grid))
}

/// Leader from the adjoint `phi`, with the one-sided boundary derivative.
pub fn leader_update(phi: &Trajectory, segments: &BoundarySegments, grid: &TimeGrid) -> Result<ControlSamples> {
    let flux = normal_flux_left(phi, &[], FluxMethod::OneSided)?;
    Ok(leader_from_flux(&flux, segments.sigma1, grid))
}

const DEGENERATE_NORM: f64 = 1e-14;

/// Relative change `||(w1,w2)_new - (w1,w2)_old|| / ||(w1,w2)_new||` in `L2(Sigma)`.
///
/// With a vanishing denominator the result is 0 if the change also vanishes and
/// `f64::INFINITY` otherwise.
pub fn stopping_quantity(
    new: (&ControlSamples, &ControlSamples),
    old: (&ControlSamples, &ControlSamples),
    grid: &TimeGrid,
) -> Result<f64> {
    let d1 = control_l2_norm(&new.0.axpy(-1.0, old.0), grid)?;
    let d2 = control_l2_norm(&new.1.axpy(-1.0, old.1), grid)?;
    let n1 = control_l2_norm(new.0, grid)?;
    let n2 = control_l2_norm(new.1, grid)?;
    let num = d1.hypot(d2);
    let den = n1.hypot(n2);
    if den < DEGENERATE_NORM {
        return Ok(if num < DEGENERATE_NORM { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

/// Follower cost `1/2 ||u - u2||^2_{L2(Q)} + sigma/2 ||w2||^2_{L2(Sigma2)}`.
pub fn evaluate_j2(u: &Trajectory, w2: &ControlSamples, target: &Target, sigma: f64, grid: &TimeGrid) -> Result<f64> {
    let misfit = target.residual(u).l2_norm();
    let w = control_l2_norm(w2, grid)?;
    Ok(0.5 * misfit * misfit + 0.5 * sigma * w * w)
}

/// Leader cost `1/2 ||w1||^2_{L2(Sigma1)}`.
pub fn evaluate_j(w1: &ControlSamples, grid: &TimeGrid) -> Result<f64> {
    let w = control_l2_norm(w1, grid)?;
    Ok(0.5 * w * w)
}

fn initial_fields(config: &SNConfig, mesh0: &crate::mesh::SpatialMesh) -> (NodalField, NodalField) {
    let build = |f: &Option<ScalarFn>| match f {
        Some(f) => NodalField::from_fn(mesh0.clone(), 0, |x| f(x)),
        None => NodalField::zeros(mesh0.clone(), 0),
    };
    (build(&config.u0), build(&config.u1))
}

/// Everything needed to run the four solves of one sweep.
struct Problem<'a> {
    config: &'a SNConfig,
    spec: &'a MovingDomainSpec,
    grid: &'a TimeGrid,
    cells: usize,
    segments: BoundarySegments,
    ic0: NodalField,
    ic1: NodalField,
    phi_terminal: (NodalField, NodalField),
}

impl<'a> Problem<'a> {
    fn new(config: &'a SNConfig, spec: &'a MovingDomainSpec, grid: &'a TimeGrid, cells: usize) -> Result<Self> {
        config.validate()?;
        let meshes = level_meshes(spec, grid, cells)?;
        let segments = BoundarySegments::new(config.segment_mode, grid.horizon())?;
        let (ic0, ic1) = initial_fields(config, &meshes[0]);
        let mesh_t = meshes[grid.steps()].clone();
        let phi_terminal = match &config.phi_terminal {
            Some(pt) => (
                NodalField::from_fn(mesh_t.clone(), grid.steps(), |x| (pt.f0)(x)),
                NodalField::from_fn(mesh_t, grid.steps(), |x| (pt.f1)(x)),
            ),
            None => (
                NodalField::zeros(mesh_t.clone(), grid.steps()),
                NodalField::zeros(mesh_t, grid.steps()),
            ),
        };
        Ok(Self {
            config,
            spec,
            grid,
            cells,
            segments,
            ic0,
            ic1,
            phi_terminal,
        })
    }

    fn state(&self, w1: &ControlSamples, w2: &ControlSamples) -> Result<Trajectory> {
        let mut fp = ForwardProblem::from_controls(self.spec, self.grid, self.cells, &[w1, w2])?;
        fp.ic0 = self.ic0.clone();
        fp.ic1 = self.ic1.clone();
        solve_forward(&fp, self.spec, self.grid, self.cells)
    }

    /// Backward solve with the configured scheme, plus the normal derivative at `x = 0`.
    fn backward(&self, problem: &BackwardProblem) -> Result<(Trajectory, Vec<f64>)> {
        match self.config.adjoint {
            AdjointScheme::Printed => {
                let traj = solve_backward(problem, self.spec, self.grid, self.cells)?;
                let flux = normal_flux_left(&traj, &problem.source, self.config.flux)?;
                Ok((traj, flux))
            }
            AdjointScheme::Consistent => {
                let traj = solve_backward_consistent(problem, self.spec, self.grid, self.cells)?;
                let flux = consistent_normal_flux(&traj, &problem.source)?;
                Ok((traj, flux))
            }
        }
    }

    /// Adjoint `p` of a state and its normal derivative at `x = 0`.
    fn adjoint(&self, u: &Trajectory) -> Result<(Trajectory, Vec<f64>)> {
        let source = self.config.target.residual(u).frames;
        self.backward(&BackwardProblem::with_source(source)?)
    }

    fn auxiliary(&self, psi_boundary: &ControlSamples) -> Result<Trajectory> {
        let fp = ForwardProblem::from_controls(self.spec, self.grid, self.cells, &[psi_boundary])?;
        solve_forward(&fp, self.spec, self.grid, self.cells)
    }

    fn auxiliary_adjoint(&self, psi: &Trajectory) -> Result<(Trajectory, Vec<f64>)> {
        let problem = BackwardProblem {
            source: psi.frames.clone(),
            terminal0: self.phi_terminal.0.clone(),
            terminal1: self.phi_terminal.1.clone(),
        };
        self.backward(&problem)
    }

    fn initial_control(&self, f: &Option<ScalarFn>, segment: Segment) -> ControlSamples {
        match f {
            Some(f) => ControlSamples::from_fn(segment, self.grid, |_, t| f(t)),
            None => ControlSamples::zeros(segment, self.grid),
        }
    }
}

fn ensure_finite(traj: &Trajectory, iteration: usize, field: &str) -> Result<()> {
    if traj.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            iteration,
            field: field.into(),
        })
    }
}

fn all_zero(values: &[f64]) -> bool {
    values.iter().all(|&v| v == 0.0)
}

fn trajectory_zero(t: &Trajectory) -> bool {
    t.frames.iter().all(|f| all_zero(&f.values))
}

/// Runs the fixed-point sweeps until the relative control change drops below
/// `config.epsilon` or `config.max_iter` sweeps have run.
pub fn fixed_point_solve(
    config: &SNConfig,
    spec: &MovingDomainSpec,
    grid: &TimeGrid,
    cells: usize,
) -> Result<SNResult> {
    let problem = Problem::new(config, spec, grid, cells)?;
    let segs = problem.segments;

    let mut w1 = problem.initial_control(&config.initial_w1, segs.sigma1);
    let mut w2 = problem.initial_control(&config.initial_w2, segs.sigma2);
    let mut phi_flux_prev = vec![0.0; grid.n_levels()];
    let mut leader_subsystem_zero = all_zero(&w1.values);

    let mut u = problem.state(&w1, &w2)?;
    ensure_finite(&u, 0, "u")?;

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut history: Vec<(ControlSamples, ControlSamples, Trajectory)> = Vec::new();
    let mut psi;
    let mut phi;
    let mut converged = false;
    let mut n = 0;

    loop {
        n += 1;
        let (_, p_flux) = problem.adjoint(&u)?;
        if p_flux.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: n,
                field: "p".into(),
            });
        }

        let psi_boundary = ControlSamples::from_fn(segs.sigma2, grid, |m, _| phi_flux_prev[m] / config.sigma);
        psi = problem.auxiliary(&psi_boundary)?;
        ensure_finite(&psi, n, "psi")?;
        let (phi_n, phi_flux) = problem.auxiliary_adjoint(&psi)?;
        ensure_finite(&phi_n, n, "phi")?;
        phi = phi_n;

        let w1_new = leader_from_flux(&phi_flux, segs.sigma1, grid);
        let w2_new = follower_from_flux(&p_flux, config.sigma, segs.sigma2, grid);
        leader_subsystem_zero &= trajectory_zero(&psi) && trajectory_zero(&phi) && all_zero(&w1_new.values);

        let stop = stopping_quantity((&w1_new, &w2_new), (&w1, &w2), grid)?;
        let dw = control_l2_norm(&w1_new.axpy(-1.0, &w1), grid)? + control_l2_norm(&w2_new.axpy(-1.0, &w2), grid)?;

        let u_new = problem.state(&w1_new, &w2_new)?;
        ensure_finite(&u_new, n, "u")?;
        records.push(IterationRecord {
            n,
            stop_qty: stop,
            du_l2: u_new.l2_distance(&u),
            dw_l2: dw,
            j: evaluate_j(&w1_new, grid)?,
            j2: evaluate_j2(&u_new, &w2_new, &config.target, config.sigma, grid)?,
            du_to_final: 0.0,
            dw_to_final: 0.0,
        });

        w1 = w1_new;
        w2 = w2_new;
        u = u_new;
        phi_flux_prev = phi_flux;
        history.push((w1.clone(), w2.clone(), u.clone()));

        if stop <= config.epsilon {
            converged = true;
            break;
        }
        if n >= config.max_iter {
            break;
        }
    }

    for (rec, (hw1, hw2, hu)) in records.iter_mut().zip(&history) {
        rec.du_to_final = hu.l2_distance(&u);
        rec.dw_to_final = control_l2_norm(&hw1.axpy(-1.0, &w1), grid)? + control_l2_norm(&hw2.axpy(-1.0, &w2), grid)?;
    }

    let (p, _) = problem.adjoint(&u)?;
    Ok(SNResult {
        converged,
        iterations: n,
        w1,
        w2,
        u,
        p,
        psi,
        phi,
        log: IterationLog { records },
        leader_subsystem_zero,
    })
}

/// Outcome of [`nash_gradient_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashCheck {
    /// Largest `|fd - analytic| / max(|fd|, |analytic|, sigma ||w2|| ||dir||)` over directions.
    pub max_rel_discrepancy: f64,
    /// Largest `|analytic| / (sigma ||w2|| ||dir||)` over directions.
    pub max_rel_analytic: f64,
    /// `||sigma w2 - dp/dnu||_{L2(Sigma2)} / (sigma ||w2||)`.
    pub follower_residual: f64,
}

/// Random smooth direction on `segment`: four sine modes with uniform amplitudes.
pub fn smooth_direction(segment: Segment, grid: &TimeGrid, rng: &mut impl Rng) -> ControlSamples {
    let amps: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ControlSamples::from_fn(segment, grid, |_, t| {
        let s = (t - segment.start) / segment.length();
        amps.iter()
            .enumerate()
            .map(|(j, a)| a * ((j + 1) as f64 * std::f64::consts::PI * s).sin())
            .sum()
    })
}

/// Checks the follower's optimality at `(w1, w2)` two ways: centered finite differences
/// of `J2` along random smooth directions on `sigma2`, and the adjoint pairing
/// `sum dt (sigma w2 - dp/dnu) dir`.
#[allow(clippy::too_many_arguments)]
pub fn nash_gradient_check(
    w1: &ControlSamples,
    w2: &ControlSamples,
    config: &SNConfig,
    spec: &MovingDomainSpec,
    grid: &TimeGrid,
    cells: usize,
    n_directions: usize,
    seed: u64,
) -> Result<NashCheck> {
    let problem = Problem::new(config, spec, grid, cells)?;
    let sigma = config.sigma;
    let u = problem.state(w1, w2)?;
    let (_, flux) = problem.adjoint(&u)?;

    let gradient = ControlSamples::from_fn(w2.segment, grid, |m, _| sigma * w2.values[m] - flux[m]);
    let w2_norm = control_l2_norm(w2, grid)?;
    let follower_residual = if w2_norm > 0.0 {
        control_l2_norm(&gradient, grid)? / (sigma * w2_norm)
    } else {
        control_l2_norm(&gradient, grid)?
    };

    let delta = 1e-4 * w2_norm.max(1.0);
    let j2_at = |w: &ControlSamples| -> Result<f64> {
        let u = problem.state(w1, w)?;
        evaluate_j2(&u, w, &config.target, sigma, grid)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_discrepancy: f64 = 0.0;
    let mut max_rel_analytic: f64 = 0.0;
    for _ in 0..n_directions {
        let dir = smooth_direction(w2.segment, grid, &mut rng);
        let dir_norm = control_l2_norm(&dir, grid)?;
        let fd = (j2_at(&w2.axpy(delta, &dir))? - j2_at(&w2.axpy(-delta, &dir))?) / (2.0 * delta);
        let analytic = gradient.dot(&dir, grid);
        let scale = sigma * w2_norm * dir_norm;
        let denom = fd.abs().max(analytic.abs()).max(scale);
        if denom > 0.0 {
            max_rel_discrepancy = max_rel_discrepancy.max((fd - analytic).abs() / denom);
        }
        if scale > 0.0 {
            max_rel_analytic = max_rel_analytic.max(analytic.abs() / scale);
        }
    }
    Ok(NashCheck {
        max_rel_discrepancy,
        max_rel_analytic,
        follower_residual,
    })
}
