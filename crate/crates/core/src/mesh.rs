//! Geometry of the non-cylindrical domain `Q = {(x, t) : 0 < x < 1 + k t, 0 < t < T}`.
//!
//! The spatial cross-section at time `t` is `(0, alpha(t))` with `alpha(t) = 1 + k t`.
//! Each time level carries its own uniform P1 mesh with a fixed node count, so node
//! identities are stable across levels and only the spacing changes.

use crate::error::{Error, Result};

/// Relative slack used when comparing times against segment ends.
const TIME_TOL: f64 = 1e-12;

/// Boundary speed `k` and horizon `T` of the moving domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingDomainSpec {
    k: f64,
    horizon: f64,
}

impl MovingDomainSpec {
    /// Accepts `0 <= k < 1` and `T > 0`. `k = 0` is the cylindrical special case, which is
    /// outside the controllability hypothesis; see [`MovingDomainSpec::satisfies_speed_condition`].
    pub fn new(k: f64, horizon: f64) -> Result<Self> {
        if !(k.is_finite() && (0.0..1.0).contains(&k)) {
            return Err(Error::Domain(format!("boundary speed k = {k} must lie in [0, 1)")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon T = {horizon} must be positive")));
        }
        Ok(Self { k, horizon })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// True when `0 < k < 1`.
    pub fn satisfies_speed_condition(&self) -> bool {
        self.k > 0.0 && self.k < 1.0
    }

    /// Right endpoint `alpha(t) = 1 + k t` of the cross-section at time `t`.
    pub fn alpha(&self, t: f64) -> Result<f64> {
        let slack = TIME_TOL * self.horizon.max(1.0);
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        Ok(1.0 + self.k * t)
    }
}

/// Control-time constant `exp(2k(1+k)/(1-k)^3) / k`, used as the base horizon.
pub fn compute_tc(k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Domain(format!("T_c needs 0 < k < 1, got {k}")));
    }
    Ok(tc_exponent(k).exp() / k)
}

/// Lower bound `(exp(2k(1+k)/(1-k)^3) - 1) / k` on admissible horizons.
pub fn controllability_lower_bound(k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Domain(format!("bound needs 0 < k < 1, got {k}")));
    }
    Ok(tc_exponent(k).exp_m1() / k)
}

fn tc_exponent(k: f64) -> f64 {
    2.0 * k * (1.0 + k) / (1.0 - k).powi(3)
}

/// Uniform time grid `t^m = m dt`, `m = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    steps: usize,
    dt: f64,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Config(format!("time grid needs M >= 2 steps, got {steps}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon T = {horizon} must be positive")));
        }
        Ok(Self {
            steps,
            dt: horizon / steps as f64,
            horizon,
        })
    }

    /// Number of steps `M`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_levels(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `t^m`; the last level is returned as `T` exactly.
    pub fn time(&self, m: usize) -> f64 {
        if m == self.steps {
            self.horizon
        } else {
            m as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|m| self.time(m)).collect()
    }
}

pub fn build_time_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, steps)
}

/// Uniform P1 mesh on `[0, length]` with `N + 1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    length: f64,
    cells: usize,
}

impl SpatialMesh {
    pub fn uniform(length: f64, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::Config(format!("spatial mesh needs N >= 2 cells, got {cells}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Domain(format!("mesh length {length} must be positive")));
        }
        Ok(Self { length, cells })
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn n_nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Node coordinate; the last node sits at `length` exactly.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.cells {
            self.length
        } else {
            j as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|j| self.node(j)).collect()
    }
}

/// Mesh of the cross-section `(0, alpha(t))`.
pub fn build_spatial_mesh(spec: &MovingDomainSpec, t: f64, cells: usize) -> Result<SpatialMesh> {
    SpatialMesh::uniform(spec.alpha(t)?, cells)
}

/// One mesh per level of `grid`.
pub fn level_meshes(spec: &MovingDomainSpec, grid: &TimeGrid, cells: usize) -> Result<Vec<SpatialMesh>> {
    check_grid(spec, grid)?;
    grid.times()
        .into_iter()
        .map(|t| build_spatial_mesh(spec, t, cells))
        .collect()
}

pub(crate) fn check_grid(spec: &MovingDomainSpec, grid: &TimeGrid) -> Result<()> {
    let (a, b) = (spec.horizon(), grid.horizon());
    if (a - b).abs() > TIME_TOL * a.max(1.0) {
        return Err(Error::Config(format!(
            "time grid horizon {b} does not match domain horizon {a}"
        )));
    }
    Ok(())
}

/// Open time interval `(start, end)` of the left boundary `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::Domain(format!("empty segment ({start}, {end})")));
        }
        Ok(Self { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    /// Whether level `m` carries a control value on this segment.
    ///
    /// Controls are piecewise constant in time and act as Dirichlet data at the level
    /// being solved, so level `m >= 1` belongs to the segment iff `start < t^m <= end`.
    /// Level 0 holds the initial data and never carries a control.
    pub fn contains_level(&self, grid: &TimeGrid, m: usize) -> bool {
        if m == 0 || m > grid.steps() {
            return false;
        }
        let t = grid.time(m);
        let slack = TIME_TOL * grid.horizon().max(1.0);
        t > self.start + slack && t <= self.end + slack
    }

    pub fn levels(&self, grid: &TimeGrid) -> Vec<usize> {
        (1..=grid.steps()).filter(|&m| self.contains_level(grid, m)).collect()
    }
}

/// How the control window `(0, T)` is shared between leader and follower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SegmentMode {
    /// Leader on `(T/2, T)`, follower on `(0, T/2)`.
    #[default]
    DisjointHalves,
    /// Both controls act on all of `(0, T)` and add up.
    AdditiveOverlap,
}

impl std::str::FromStr for SegmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disjoint" | "disjoint-halves" => Ok(Self::DisjointHalves),
            "overlap" | "additive-overlap" => Ok(Self::AdditiveOverlap),
            other => Err(Error::Usage {
                key: "segments".into(),
                reason: format!("unknown mode `{other}` (expected disjoint-halves or additive-overlap)"),
            }),
        }
    }
}

impl std::fmt::Display for SegmentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::DisjointHalves => "disjoint-halves",
            Self::AdditiveOverlap => "additive-overlap",
        })
    }
}

/// Leader segment `sigma1` and follower segment `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegments {
    pub sigma1: Segment,
    pub sigma2: Segment,
    pub mode: SegmentMode,
}

impl BoundarySegments {
    pub fn new(mode: SegmentMode, horizon: f64) -> Result<Self> {
        let (sigma1, sigma2) = match mode {
            SegmentMode::DisjointHalves => (Segment::new(horizon / 2.0, horizon)?, Segment::new(0.0, horizon / 2.0)?),
            SegmentMode::AdditiveOverlap => {
                let all = Segment::new(0.0, horizon)?;
                (all, all)
            }
        };
        Ok(Self { sigma1, sigma2, mode })
    }
}

/// Vertex/triangle counts and border length of a triangulated space-time trapezoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeMeshStats {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub border_length: f64,
}

/// Perimeter `2 + T (1 + k + sqrt(1 + k^2))` of the trapezoid `(0,0),(1,0),(alpha(T),T),(0,T)`.
pub fn analytic_perimeter(spec: &MovingDomainSpec) -> f64 {
    let k = spec.k();
    2.0 + spec.horizon() * (1.0 + k + (1.0 + k * k).sqrt())
}

/// Structured triangulation of the space-time trapezoid.
///
/// Rows follow the time levels (`ceil(T / edge)` of them) and each row is split into
/// `ceil(alpha(T) / edge)` cells mapped onto `[0, alpha(t)]`; every quadrilateral is cut
/// into two triangles. The border length is summed over the boundary edges.
pub fn trapezoid_stats(spec: &MovingDomainSpec, target_edge: f64) -> Result<SpaceTimeMeshStats> {
    if !(target_edge.is_finite() && target_edge > 0.0) {
        return Err(Error::Domain(format!("target edge {target_edge} must be positive")));
    }
    let horizon = spec.horizon();
    let top = spec.alpha(horizon)?;
    let rows = (horizon / target_edge).ceil().max(1.0) as usize;
    let cols = (top / target_edge).ceil().max(1.0) as usize;

    let t_at = |i: usize| horizon * i as f64 / rows as f64;
    let x_at = |i: usize, j: usize| (1.0 + spec.k() * t_at(i)) * j as f64 / cols as f64;
    let dist = |(x0, t0): (f64, f64), (x1, t1): (f64, f64)| ((x1 - x0).powi(2) + (t1 - t0).powi(2)).sqrt();

    let mut border = 0.0;
    for j in 0..cols {
        border += dist((x_at(0, j), 0.0), (x_at(0, j + 1), 0.0));
        border += dist((x_at(rows, j), horizon), (x_at(rows, j + 1), horizon));
    }
    for i in 0..rows {
        border += dist((0.0, t_at(i)), (0.0, t_at(i + 1)));
        border += dist((x_at(i, cols), t_at(i)), (x_at(i + 1, cols), t_at(i + 1)));
    }

    Ok(SpaceTimeMeshStats {
        n_vertices: (rows + 1) * (cols + 1),
        n_triangles: 2 * rows * cols,
        border_length: border,
    })
}
