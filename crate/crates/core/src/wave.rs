//! Implicit three-level time marching for the wave equation on the moving domain.
//!
//! Forward problems (`u`, `psi`) march up from `t = 0`, backward problems (`p`, `phi`)
//! march down from `t = T`. Every level is solved on its own mesh: mass and stiffness
//! are assembled at the level of the unknown and the known frames are interpolated onto
//! that mesh before they enter the right-hand side.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, boundary_flux_left, interpolate, interpolate_transpose, mass_inner,
    solve_dirichlet, ControlSamples, NodalField,
};
use crate::mesh::{level_meshes, MovingDomainSpec, SpatialMesh, TimeGrid};

/// How the boundary derivative at `x = 0` is recovered from a discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxMethod {
    /// Three-point one-sided difference.
    #[default]
    OneSided,
    /// Reaction of the discrete equation at the boundary row.
    Variational,
}

impl std::str::FromStr for FluxMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-sided" | "onesided" => Ok(Self::OneSided),
            "variational" => Ok(Self::Variational),
            other => Err(Error::Usage {
                key: "flux".into(),
                reason: format!("unknown flux method `{other}` (expected one-sided or variational)"),
            }),
        }
    }
}

impl std::fmt::Display for FluxMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::OneSided => "one-sided",
            Self::Variational => "variational",
        })
    }
}

/// Which backward scheme produces the adjoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointScheme {
    /// Two zero terminal frames, later frames interpolated onto the unknown's mesh
    /// ([`solve_backward`]).
    #[default]
    Printed,
    /// Exact transpose of the forward recurrence ([`solve_backward_consistent`]).
    Consistent,
}

impl std::str::FromStr for AdjointScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" => Ok(Self::Printed),
            "consistent" => Ok(Self::Consistent),
            other => Err(Error::Usage {
                key: "adjoint".into(),
                reason: format!("unknown adjoint scheme `{other}` (expected printed or consistent)"),
            }),
        }
    }
}

impl std::fmt::Display for AdjointScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Printed => "printed",
            Self::Consistent => "consistent",
        })
    }
}

/// One nodal field per time level `m = 0..=M`, frame `m` on the mesh of `Omega_{t^m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub frames: Vec<NodalField>,
}

impl Trajectory {
    pub fn zeros(spec: &MovingDomainSpec, grid: &TimeGrid, cells: usize) -> Result<Self> {
        let frames = level_meshes(spec, grid, cells)?
            .into_iter()
            .enumerate()
            .map(|(m, mesh)| NodalField::zeros(mesh, m))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            frames,
        })
    }

    /// Builds frames from `f(x, t)`.
    pub fn from_fn(
        spec: &MovingDomainSpec,
        grid: &TimeGrid,
        cells: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let frames = level_meshes(spec, grid, cells)?
            .into_iter()
            .enumerate()
            .map(|(m, mesh)| {
                let t = grid.time(m);
                NodalField::from_fn(mesh, m, |x| f(x, t))
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            frames,
        })
    }

    pub fn frame(&self, m: usize) -> &NodalField {
        &self.frames[m]
    }

    pub fn last(&self) -> &NodalField {
        self.frames.last().expect("trajectory has frames")
    }

    pub fn is_finite(&self) -> bool {
        self.frames.iter().all(|f| f.values.iter().all(|v| v.is_finite()))
    }

    /// Frame-wise `self + c * other`; both trajectories must share meshes.
    pub fn axpy(&self, c: f64, other: &Trajectory) -> Trajectory {
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| NodalField {
                mesh: a.mesh.clone(),
                values: a.values.iter().zip(&b.values).map(|(x, y)| x + c * y).collect(),
                level: a.level,
            })
            .collect();
        Trajectory {
            grid: self.grid.clone(),
            frames,
        }
    }

    /// Space-time pairing `sum_{m=1..M} dt <a^m, b^m>_M`.
    pub fn inner(&self, other: &Trajectory) -> f64 {
        let dt = self.grid.dt();
        (1..self.frames.len())
            .map(|m| dt * self.frames[m].mass_inner(&other.frames[m]))
            .sum()
    }

    /// Discrete `L2(Q)` norm.
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Discrete `L2(Q)` distance to another trajectory on the same meshes.
    pub fn l2_distance(&self, other: &Trajectory) -> f64 {
        self.axpy(-1.0, other).l2_norm()
    }

    /// Largest absolute nodal value over all frames.
    pub fn max_abs(&self) -> f64 {
        self.frames
            .iter()
            .flat_map(|f| f.values.iter())
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    /// One-sided `d/dx` at `x = 0` for every level.
    pub fn left_derivatives(&self) -> Result<Vec<f64>> {
        self.frames.iter().map(boundary_flux_left).collect()
    }

    /// CSV with columns `m,t,x,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "m,t,x,value")?;
        for (m, frame) in self.frames.iter().enumerate() {
            let t = self.grid.time(m);
            for (x, v) in frame.mesh.nodes().iter().zip(&frame.values) {
                writeln!(out, "{m},{t:.17e},{x:.17e},{v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Data for `u_tt - u_xx = f` with `u = g` at `x = 0` and `u = 0` at `x = alpha(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardProblem {
    /// Initial displacement on the `t = 0` mesh.
    pub ic0: NodalField,
    /// Initial velocity on the `t = 0` mesh.
    pub ic1: NodalField,
    /// Dirichlet value at `x = 0` for each level `0..=M` (level 0 is not imposed).
    pub left_boundary: Vec<f64>,
    /// Optional forcing, one frame per level.
    pub source: Option<Vec<NodalField>>,
}

impl ForwardProblem {
    /// Zero initial data, no forcing and left boundary equal to the sum of `controls`.
    pub fn from_controls(
        spec: &MovingDomainSpec,
        grid: &TimeGrid,
        cells: usize,
        controls: &[&ControlSamples],
    ) -> Result<Self> {
        let mesh0 = level_meshes(spec, grid, cells)?.swap_remove(0);
        let mut left_boundary = vec![0.0; grid.n_levels()];
        for c in controls {
            c.check_aligned(grid)?;
            for (acc, v) in left_boundary.iter_mut().zip(&c.values) {
                *acc += v;
            }
        }
        Ok(Self {
            ic0: NodalField::zeros(mesh0.clone(), 0),
            ic1: NodalField::zeros(mesh0, 0),
            left_boundary,
            source: None,
        })
    }
}

/// Data for `p_tt - p_xx = s` backward from `t = T`, homogeneous Dirichlet at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardProblem {
    /// Right-hand side, one frame per level.
    pub source: Vec<NodalField>,
    /// `p(T)` on the `t = T` mesh.
    pub terminal0: NodalField,
    /// `p_t(T)` on the `t = T` mesh.
    pub terminal1: NodalField,
}

impl BackwardProblem {
    /// Zero terminal data.
    pub fn with_source(source: Vec<NodalField>) -> Result<Self> {
        let mesh = source
            .last()
            .ok_or_else(|| Error::Config("backward problem needs a source".into()))?
            .mesh
            .clone();
        Ok(Self {
            source,
            terminal0: NodalField::zeros(mesh.clone(), 0),
            terminal1: NodalField::zeros(mesh, 0),
        })
    }
}

fn check_levels(what: &str, got: usize, grid: &TimeGrid) -> Result<()> {
    if got != grid.n_levels() {
        return Err(Error::Config(format!(
            "{what} has {got} levels, grid has {}",
            grid.n_levels()
        )));
    }
    Ok(())
}

fn check_mesh(what: &str, field: &NodalField, mesh: &SpatialMesh) -> Result<()> {
    if field.mesh.n_nodes() != mesh.n_nodes() || (field.mesh.length() - mesh.length()).abs() > 1e-12 * mesh.length() {
        return Err(Error::Config(format!(
            "{what} lives on a mesh of length {} with {} nodes, expected {} with {}",
            field.mesh.length(),
            field.mesh.n_nodes(),
            mesh.length(),
            mesh.n_nodes()
        )));
    }
    Ok(())
}

/// Marches `M (u^{m+1} - 2u^m + u^{m-1}) / dt^2 + K u^{m+1} = M f^{m+1}` forward.
///
/// Frame 0 is `ic0`; frame 1 is `ic0 + dt ic1` carried to the level-1 mesh.
pub fn solve_forward(
    problem: &ForwardProblem,
    spec: &MovingDomainSpec,
    grid: &TimeGrid,
    cells: usize,
) -> Result<Trajectory> {
    let meshes = level_meshes(spec, grid, cells)?;
    check_levels("left boundary", problem.left_boundary.len(), grid)?;
    check_mesh("ic0", &problem.ic0, &meshes[0])?;
    check_mesh("ic1", &problem.ic1, &meshes[0])?;
    if let Some(src) = &problem.source {
        check_levels("forward source", src.len(), grid)?;
    }
    let dt = grid.dt();
    let dt2 = dt * dt;

    let mut frames = Vec::with_capacity(grid.n_levels());
    frames.push(NodalField {
        mesh: meshes[0].clone(),
        values: problem.ic0.values.clone(),
        level: 0,
    });

    let start: Vec<f64> = problem
        .ic0
        .values
        .iter()
        .zip(&problem.ic1.values)
        .map(|(a, b)| a + dt * b)
        .collect();
    let mut first = interpolate(&NodalField::new(meshes[0].clone(), start, 1)?, &meshes[1]);
    first.level = 1;
    let n = first.values.len();
    first.values[0] = problem.left_boundary[1];
    first.values[n - 1] = 0.0;
    frames.push(first);

    for m in 1..grid.steps() {
        let mesh = &meshes[m + 1];
        let mass = assemble_mass(mesh);
        let system = mass.add_scaled(dt2, &assemble_stiffness(mesh));
        let cur = interpolate(&frames[m], mesh);
        let prev = interpolate(&frames[m - 1], mesh);
        let mut combo: Vec<f64> = cur.values.iter().zip(&prev.values).map(|(c, p)| 2.0 * c - p).collect();
        if let Some(src) = &problem.source {
            let f = interpolate(&src[m + 1], mesh);
            for (c, s) in combo.iter_mut().zip(&f.values) {
                *c += dt2 * s;
            }
        }
        let rhs = mass.mul_vec(&combo);
        let values = solve_dirichlet(&system, &rhs, problem.left_boundary[m + 1], 0.0)?;
        frames.push(NodalField {
            mesh: mesh.clone(),
            values,
            level: m + 1,
        });
    }
    Ok(Trajectory {
        grid: grid.clone(),
        frames,
    })
}

/// Marches `M (p^{m+1} - 2p^m + p^{m-1}) / dt^2 + K p^{m-1} = M s^{m-1}` backward for
/// `m = M-1, ..., 1`.
///
/// Frame `M` is `terminal0` and frame `M-1` is `terminal0 - dt terminal1`, both with
/// zero boundary values.
pub fn solve_backward(
    problem: &BackwardProblem,
    spec: &MovingDomainSpec,
    grid: &TimeGrid,
    cells: usize,
) -> Result<Trajectory> {
    let meshes = level_meshes(spec, grid, cells)?;
    let steps = grid.steps();
    check_levels("backward source", problem.source.len(), grid)?;
    check_mesh("terminal0", &problem.terminal0, &meshes[steps])?;
    check_mesh("terminal1", &problem.terminal1, &meshes[steps])?;
    let dt = grid.dt();
    let dt2 = dt * dt;

    let mut frames: Vec<Option<NodalField>> = vec![None; grid.n_levels()];

    let mut last = NodalField {
        mesh: meshes[steps].clone(),
        values: problem.terminal0.values.clone(),
        level: steps,
    };
    let n = last.values.len();
    last.values[0] = 0.0;
    last.values[n - 1] = 0.0;

    let before: Vec<f64> = problem
        .terminal0
        .values
        .iter()
        .zip(&problem.terminal1.values)
        .map(|(a, b)| a - dt * b)
        .collect();
    let mut second = interpolate(
        &NodalField::new(meshes[steps].clone(), before, steps - 1)?,
        &meshes[steps - 1],
    );
    second.level = steps - 1;
    second.values[0] = 0.0;
    second.values[n - 1] = 0.0;

    frames[steps] = Some(last);
    frames[steps - 1] = Some(second);

    for m in (1..steps).rev() {
        let mesh = &meshes[m - 1];
        let mass = assemble_mass(mesh);
        let system = mass.add_scaled(dt2, &assemble_stiffness(mesh));
        let cur = interpolate(frames[m].as_ref().expect("frame solved"), mesh);
        let next = interpolate(frames[m + 1].as_ref().expect("frame solved"), mesh);
        let src = interpolate(&problem.source[m - 1], mesh);
        let combo: Vec<f64> = cur
            .values
            .iter()
            .zip(&next.values)
            .zip(&src.values)
            .map(|((c, x), s)| 2.0 * c - x + dt2 * s)
            .collect();
        let rhs = mass.mul_vec(&combo);
        let values = solve_dirichlet(&system, &rhs, 0.0, 0.0)?;
        frames[m - 1] = Some(NodalField {
            mesh: mesh.clone(),
            values,
            level: m - 1,
        });
    }
    Ok(Trajectory {
        grid: grid.clone(),
        frames: frames.into_iter().map(|f| f.expect("all levels solved")).collect(),
    })
}

/// Discrete adjoint of [`solve_forward`] for the objective `1/2 sum_{m>=1} dt |u^m|^2_M`
/// paired with `source`.
///
/// Solves, for `j = M, ..., 0`,
/// `A_j p^j = 2 I_{j,j+1}^T M_{j+1} p^{j+1} - I_{j,j+2}^T M_{j+2} p^{j+2} + dt^2 M_j s^j`
/// with homogeneous Dirichlet rows, where `I_{a,b}` is the interpolation from the level-`a`
/// mesh to the level-`b` mesh. The virtual frames `M+1` and `M+2` live on the `t = T`
/// mesh and hold `terminal0` and `terminal0 + dt terminal1`. On a fixed mesh with zero
/// terminal data this is the printed recurrence started two levels later.
pub fn solve_backward_consistent(
    problem: &BackwardProblem,
    spec: &MovingDomainSpec,
    grid: &TimeGrid,
    cells: usize,
) -> Result<Trajectory> {
    let meshes = level_meshes(spec, grid, cells)?;
    let steps = grid.steps();
    check_levels("backward source", problem.source.len(), grid)?;
    check_mesh("terminal0", &problem.terminal0, &meshes[steps])?;
    check_mesh("terminal1", &problem.terminal1, &meshes[steps])?;
    let dt = grid.dt();
    let dt2 = dt * dt;
    let mesh_t = &meshes[steps];
    let mass_t = assemble_mass(mesh_t);

    let clamp = |mut v: Vec<f64>| {
        let n = v.len();
        v[0] = 0.0;
        v[n - 1] = 0.0;
        v
    };
    let virt1 = clamp(problem.terminal0.values.clone());
    let virt2 = clamp(
        problem
            .terminal0
            .values
            .iter()
            .zip(&problem.terminal1.values)
            .map(|(a, b)| a + dt * b)
            .collect(),
    );
    // M_{j} p^{j} for the two levels above the one being solved, on their own meshes
    let mut weighted_next = mass_t.mul_vec(&virt1);
    let mut weighted_after = mass_t.mul_vec(&virt2);
    let mut mesh_next = mesh_t.clone();
    let mut mesh_after = mesh_t.clone();

    let mut frames: Vec<NodalField> = Vec::with_capacity(grid.n_levels());
    for j in (0..=steps).rev() {
        let mesh = &meshes[j];
        let mass = assemble_mass(mesh);
        let system = mass.add_scaled(dt2, &assemble_stiffness(mesh));
        let src = interpolate(&problem.source[j], mesh);
        let ms = mass.mul_vec(&src.values);
        let from_next = interpolate_transpose(&weighted_next, mesh, &mesh_next);
        let from_after = interpolate_transpose(&weighted_after, mesh, &mesh_after);
        let rhs: Vec<f64> = (0..mesh.n_nodes())
            .map(|i| 2.0 * from_next[i] - from_after[i] + dt2 * ms[i])
            .collect();
        let values = solve_dirichlet(&system, &rhs, 0.0, 0.0)?;
        weighted_after = std::mem::replace(&mut weighted_next, mass.mul_vec(&values));
        mesh_after = std::mem::replace(&mut mesh_next, mesh.clone());
        frames.push(NodalField {
            mesh: mesh.clone(),
            values,
            level: j,
        });
    }
    frames.reverse();
    Ok(Trajectory {
        grid: grid.clone(),
        frames,
    })
}

/// Sensitivity of the forward Lagrangian to the Dirichlet value at `x = 0`, per level,
/// for a trajectory from [`solve_backward_consistent`]. With `J = 1/2 sum dt |u|^2_M`
/// paired with `source`, `dJ/dg^j = -dt * flux[j]`; level 0 carries no control and is 0.
pub fn consistent_normal_flux(traj: &Trajectory, source: &[NodalField]) -> Result<Vec<f64>> {
    let grid = &traj.grid;
    let steps = grid.steps();
    check_levels("flux source", source.len(), grid)?;
    let dt2 = grid.dt().powi(2);
    let mut out = vec![0.0; grid.n_levels()];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        let frame = &traj.frames[j];
        let mesh = &frame.mesh;
        let mass = assemble_mass(mesh);
        let mut row = 0.0;
        if j >= 2 {
            row += mass
                .add_scaled(dt2, &assemble_stiffness(mesh))
                .row_dot(0, &frame.values);
        }
        for (offset, weight) in [(1usize, -2.0), (2, 1.0)] {
            if j + offset <= steps {
                let other = &traj.frames[j + offset];
                let weighted = assemble_mass(&other.mesh).mul_vec(&other.values);
                row += weight * interpolate_transpose(&weighted, mesh, &other.mesh)[0];
            }
        }
        let src = interpolate(&source[j], mesh);
        *slot = row / dt2 - mass.row_dot(0, &src.values);
    }
    Ok(out)
}

/// Outward normal derivative `-d/dx` at `x = 0` of a backward solution, per level.
///
/// `source` must be the right-hand side that produced `traj` when `method` is
/// [`FluxMethod::Variational`]; it is ignored otherwise. The variational reaction is
/// only defined where the recurrence ran (levels `0..M-1`); the two terminal levels fall
/// back to the one-sided stencil.
pub fn normal_flux_left(traj: &Trajectory, source: &[NodalField], method: FluxMethod) -> Result<Vec<f64>> {
    let one_sided: Vec<f64> = traj.left_derivatives()?.into_iter().map(|d| -d).collect();
    if method == FluxMethod::OneSided {
        return Ok(one_sided);
    }
    let steps = traj.grid.steps();
    check_levels("flux source", source.len(), &traj.grid)?;
    let dt2 = traj.grid.dt().powi(2);
    let mut out = one_sided;
    for (j, slot) in out.iter_mut().enumerate().take(steps - 1) {
        let frame = &traj.frames[j];
        let mesh = &frame.mesh;
        let next = interpolate(&traj.frames[j + 1], mesh);
        let after = interpolate(&traj.frames[j + 2], mesh);
        let src = interpolate(&source[j], mesh);
        let accel: Vec<f64> = (0..mesh.n_nodes())
            .map(|i| (after.values[i] - 2.0 * next.values[i] + frame.values[i]) / dt2 - src.values[i])
            .collect();
        let reaction = assemble_mass(mesh).row_dot(0, &accel) + assemble_stiffness(mesh).row_dot(0, &frame.values);
        // reaction ~ -d/dx at the left end, which is the outward normal derivative
        *slot = reaction;
    }
    Ok(out)
}

/// Both sides of the discrete duality identity between a boundary-driven forward state
/// `w_hat` and the adjoint driven by `source`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityTerms {
    /// `sum_m dt <source^m, u_hat^m>_M`.
    pub interior: f64,
    /// `sum_{m in segment} dt dp/dnu(0, t^m) w_hat^m`.
    pub boundary: f64,
}

impl DualityTerms {
    /// `|interior + boundary| / max(|interior|, |boundary|)`, zero when both vanish.
    pub fn relative_residual(&self) -> f64 {
        let scale = self.interior.abs().max(self.boundary.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.interior + self.boundary).abs() / scale
        }
    }
}

pub fn duality_terms(
    forward_bdata: &ControlSamples,
    source: &[NodalField],
    spec: &MovingDomainSpec,
    grid: &TimeGrid,
    cells: usize,
    method: FluxMethod,
) -> Result<DualityTerms> {
    check_levels("duality source", source.len(), grid)?;
    let forward = ForwardProblem::from_controls(spec, grid, cells, &[forward_bdata])?;
    let u_hat = solve_forward(&forward, spec, grid, cells)?;
    let adjoint = solve_backward(&BackwardProblem::with_source(source.to_vec())?, spec, grid, cells)?;
    let dt = grid.dt();
    let interior = (1..grid.n_levels())
        .map(|m| {
            let s = interpolate(&source[m], &u_hat.frames[m].mesh);
            dt * mass_inner(&s.mesh, &s.values, &u_hat.frames[m].values)
        })
        .sum();
    let flux = normal_flux_left(&adjoint, source, method)?;
    let boundary = forward_bdata
        .segment
        .levels(grid)
        .into_iter()
        .map(|m| dt * flux[m] * forward_bdata.values[m])
        .sum();
    Ok(DualityTerms { interior, boundary })
}

/// Relative mismatch in the discrete analogue of
/// `int int (u - u2) u_hat + int dp/dnu w_hat = 0`, using the one-sided flux.
pub fn duality_residual(
    forward_bdata: &ControlSamples,
    source: &[NodalField],
    spec: &MovingDomainSpec,
    grid: &TimeGrid,
    cells: usize,
) -> Result<f64> {
    Ok(duality_terms(forward_bdata, source, spec, grid, cells, FluxMethod::OneSided)?.relative_residual())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_time_grid, Segment};

    fn setup(k: f64, horizon: f64, steps: usize) -> (MovingDomainSpec, TimeGrid) {
        (
            MovingDomainSpec::new(k, horizon).unwrap(),
            build_time_grid(horizon, steps).unwrap(),
        )
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let (spec, grid) = setup(0.25, 3.0, 20);
        let fp = ForwardProblem::from_controls(&spec, &grid, 10, &[]).unwrap();
        let u = solve_forward(&fp, &spec, &grid, 10).unwrap();
        assert!(u.frames.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
        let zero = Trajectory::zeros(&spec, &grid, 10).unwrap();
        let p = solve_backward(&BackwardProblem::with_source(zero.frames).unwrap(), &spec, &grid, 10).unwrap();
        assert!(p.frames.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn dirichlet_value_imposed_every_level() {
        let (spec, grid) = setup(0.25, 2.0, 16);
        let seg = Segment::new(0.0, 2.0).unwrap();
        let w = ControlSamples::from_fn(seg, &grid, |_, _| 1.0);
        let fp = ForwardProblem::from_controls(&spec, &grid, 12, &[&w]).unwrap();
        let u = solve_forward(&fp, &spec, &grid, 12).unwrap();
        for (m, f) in u.frames.iter().enumerate().skip(1) {
            assert_eq!(f.values[0], 1.0, "level {m}");
            assert_eq!(*f.values.last().unwrap(), 0.0);
            assert_eq!(f.mesh.length(), spec.alpha(grid.time(m)).unwrap());
        }
    }

    #[test]
    fn terminal_frames_hold_terminal_data() {
        let (spec, grid) = setup(0.0, 1.0, 10);
        let zero = Trajectory::zeros(&spec, &grid, 8).unwrap();
        let mut bp = BackwardProblem::with_source(zero.frames).unwrap();
        bp.terminal0 = NodalField::from_fn(bp.terminal0.mesh.clone(), 10, |x| x * (1.0 - x));
        let p = solve_backward(&bp, &spec, &grid, 8).unwrap();
        assert_eq!(p.frames[10].values, bp.terminal0.values);
        assert_eq!(p.frames[9].values, bp.terminal0.values);
    }

    #[test]
    fn level_mismatch_is_config_error() {
        let (spec, grid) = setup(0.25, 1.0, 10);
        let mut fp = ForwardProblem::from_controls(&spec, &grid, 6, &[]).unwrap();
        fp.left_boundary.pop();
        assert!(matches!(solve_forward(&fp, &spec, &grid, 6), Err(Error::Config(_))));
        let other = build_time_grid(1.0, 12).unwrap();
        let fp = ForwardProblem::from_controls(&spec, &grid, 6, &[]).unwrap();
        assert!(matches!(solve_forward(&fp, &spec, &other, 6), Err(Error::Config(_))));
    }

    #[test]
    fn variational_flux_of_zero_is_zero() {
        let (spec, grid) = setup(0.25, 1.0, 10);
        let zero = Trajectory::zeros(&spec, &grid, 6).unwrap();
        let f = normal_flux_left(&zero, &zero.frames, FluxMethod::Variational).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duality_zero_source() {
        let (spec, grid) = setup(0.0, 1.0, 20);
        let zero = Trajectory::zeros(&spec, &grid, 10).unwrap();
        let seg = Segment::new(0.0, 0.5).unwrap();
        let w = ControlSamples::from_fn(seg, &grid, |_, t| t.sin());
        assert_eq!(duality_residual(&w, &zero.frames, &spec, &grid, 10).unwrap(), 0.0);
    }

    #[test]
    fn csv_dump_shape() {
        let (spec, grid) = setup(0.25, 1.0, 4);
        let u = Trajectory::zeros(&spec, &grid, 3).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 * 4);
        assert!(text.starts_with("m,t,x,value\n"));
    }
}
