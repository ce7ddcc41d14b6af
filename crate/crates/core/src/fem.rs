//! P1 finite-element building blocks on a uniform 1D mesh.

use crate::error::{Error, Result};
use crate::mesh::{Segment, SpatialMesh, TimeGrid};

/// Tridiagonal matrix of size `n`: `lower[i]` couples row `i + 1` to column `i`,
/// `upper[i]` couples row `i` to column `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiagMatrix {
    pub lower: Vec<f64>,
    pub diagonal: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TriDiagMatrix {
    pub fn new(lower: Vec<f64>, diagonal: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diagonal.len();
        if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n {
            return Err(Error::Config(format!(
                "inconsistent tridiagonal sizes: lower {}, diagonal {}, upper {}",
                lower.len(),
                n,
                upper.len()
            )));
        }
        Ok(Self { lower, diagonal, upper })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            diagonal: vec![1.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diagonal[i]
        } else if j + 1 == i {
            self.lower[j]
        } else if i + 1 == j {
            self.upper[i]
        } else {
            0.0
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        assert_eq!(x.len(), n, "dimension mismatch in tridiagonal product");
        (0..n)
            .map(|i| {
                let mut s = self.diagonal[i] * x[i];
                if i > 0 {
                    s += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Row `i` of `A x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let n = self.size();
        let mut s = self.diagonal[i] * x[i];
        if i > 0 {
            s += self.lower[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += self.upper[i] * x[i + 1];
        }
        s
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &Self) -> Self {
        assert_eq!(self.size(), other.size());
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + scale * y).collect();
        Self {
            lower: zip(&self.lower, &other.lower),
            diagonal: zip(&self.diagonal, &other.diagonal),
            upper: zip(&self.upper, &other.upper),
        }
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut s = self.diagonal[i].abs();
                if i > 0 {
                    s += self.lower[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.upper[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Principal submatrix on rows/columns `1..n-1` (interior nodes).
    pub fn interior(&self) -> Self {
        let n = self.size();
        assert!(n >= 3, "interior block needs at least three rows");
        Self {
            lower: self.lower[1..n - 2].to_vec(),
            diagonal: self.diagonal[1..n - 1].to_vec(),
            upper: self.upper[1..n - 2].to_vec(),
        }
    }
}

/// P1 mass matrix.
pub fn assemble_mass(mesh: &SpatialMesh) -> TriDiagMatrix {
    let n = mesh.n_nodes();
    let h = mesh.h();
    let mut diagonal = vec![2.0 * h / 3.0; n];
    diagonal[0] = h / 3.0;
    diagonal[n - 1] = h / 3.0;
    TriDiagMatrix {
        lower: vec![h / 6.0; n - 1],
        diagonal,
        upper: vec![h / 6.0; n - 1],
    }
}

/// P1 stiffness matrix for `d/dx u d/dx v`.
pub fn assemble_stiffness(mesh: &SpatialMesh) -> TriDiagMatrix {
    let n = mesh.n_nodes();
    let h = mesh.h();
    let mut diagonal = vec![2.0 / h; n];
    diagonal[0] = 1.0 / h;
    diagonal[n - 1] = 1.0 / h;
    TriDiagMatrix {
        lower: vec![-1.0 / h; n - 1],
        diagonal,
        upper: vec![-1.0 / h; n - 1],
    }
}

/// Thomas algorithm without pivoting.
pub fn solve_tridiagonal(a: &TriDiagMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.size();
    if rhs.len() != n {
        return Err(Error::Config(format!(
            "right-hand side has length {}, matrix has size {n}",
            rhs.len()
        )));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = a.diagonal[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::Singular { index: 0 });
    }
    if n > 1 {
        c[0] = a.upper[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = a.diagonal[i] - a.lower[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Singular { index: i });
        }
        if i + 1 < n {
            c[i] = a.upper[i] / pivot;
        }
        d[i] = (rhs[i] - a.lower[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Solves `A x = b` on the interior nodes with prescribed end values `x[0] = left`,
/// `x[n-1] = right`. The boundary columns are moved to the right-hand side, which keeps
/// the reduced system symmetric. Only the interior rows of `rhs` are read.
pub fn solve_dirichlet(a: &TriDiagMatrix, rhs: &[f64], left: f64, right: f64) -> Result<Vec<f64>> {
    let n = a.size();
    if n < 3 || rhs.len() != n {
        return Err(Error::Config(format!(
            "Dirichlet solve needs >= 3 nodes and matching rhs (size {n}, rhs {})",
            rhs.len()
        )));
    }
    let mut reduced: Vec<f64> = rhs[1..n - 1].to_vec();
    reduced[0] -= a.lower[0] * left;
    let last = reduced.len() - 1;
    reduced[last] -= a.upper[n - 2] * right;
    let interior = solve_tridiagonal(&a.interior(), &reduced).map_err(|e| match e {
        Error::Singular { index } => Error::Singular { index: index + 1 },
        other => other,
    })?;
    let mut x = Vec::with_capacity(n);
    x.push(left);
    x.extend(interior);
    x.push(right);
    Ok(x)
}

/// Nodal values of a P1 function on one time level's mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub mesh: SpatialMesh,
    pub values: Vec<f64>,
    pub level: usize,
}

impl NodalField {
    pub fn new(mesh: SpatialMesh, values: Vec<f64>, level: usize) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::Config(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        Ok(Self { mesh, values, level })
    }

    pub fn zeros(mesh: SpatialMesh, level: usize) -> Self {
        let values = vec![0.0; mesh.n_nodes()];
        Self { mesh, values, level }
    }

    pub fn from_fn(mesh: SpatialMesh, level: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = mesh.nodes().into_iter().map(f).collect();
        Self { mesh, values, level }
    }

    /// Evaluates the P1 interpolant at `x`; zero beyond the right endpoint.
    pub fn eval(&self, x: f64) -> f64 {
        let len = self.mesh.length();
        if x < 0.0 || x > len * (1.0 + 1e-14) {
            return 0.0;
        }
        let h = self.mesh.h();
        let n = self.mesh.cells();
        let j = ((x / h).floor() as usize).min(n - 1);
        let s = ((x - self.mesh.node(j)) / h).clamp(0.0, 1.0);
        (1.0 - s) * self.values[j] + s * self.values[j + 1]
    }

    /// `u^T M v` with the mass matrix of this field's mesh.
    pub fn mass_inner(&self, other: &NodalField) -> f64 {
        mass_inner(&self.mesh, &self.values, &other.values)
    }
}

/// `u^T M v` on `mesh`.
pub fn mass_inner(mesh: &SpatialMesh, u: &[f64], v: &[f64]) -> f64 {
    let mv = assemble_mass(mesh).mul_vec(v);
    u.iter().zip(&mv).map(|(a, b)| a * b).sum()
}

/// Transfers a P1 field onto another mesh by linear interpolation; target nodes beyond
/// the source's right endpoint receive 0.
pub fn interpolate(field: &NodalField, target: &SpatialMesh) -> NodalField {
    if *target == field.mesh {
        return field.clone();
    }
    let values = target.nodes().into_iter().map(|x| field.eval(x)).collect();
    NodalField {
        mesh: target.clone(),
        values,
        level: field.level,
    }
}

/// Applies the transpose of the interpolation operator `source -> target` to `values`
/// given on the target mesh, returning a vector on the source mesh.
pub fn interpolate_transpose(values: &[f64], source: &SpatialMesh, target: &SpatialMesh) -> Vec<f64> {
    if source == target {
        return values.to_vec();
    }
    let mut out = vec![0.0; source.n_nodes()];
    let len = source.length();
    let h = source.h();
    let n = source.cells();
    for (x, v) in target.nodes().into_iter().zip(values) {
        if x < 0.0 || x > len * (1.0 + 1e-14) {
            continue;
        }
        let j = ((x / h).floor() as usize).min(n - 1);
        let s = ((x - source.node(j)) / h).clamp(0.0, 1.0);
        out[j] += (1.0 - s) * v;
        out[j + 1] += s * v;
    }
    out
}

/// Second-order one-sided estimate of `d/dx` at `x = 0`.
pub fn boundary_flux_left(field: &NodalField) -> Result<f64> {
    let v = &field.values;
    if v.len() < 3 {
        return Err(Error::Config(format!(
            "boundary flux needs at least 3 nodes, got {}",
            v.len()
        )));
    }
    Ok((-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * field.mesh.h()))
}

/// Piecewise-constant-in-time boundary control on one segment. Values are stored for
/// every level `0..=M` and are zero at levels outside the segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSamples {
    pub segment: Segment,
    pub values: Vec<f64>,
}

impl ControlSamples {
    pub fn zeros(segment: Segment, grid: &TimeGrid) -> Self {
        Self {
            segment,
            values: vec![0.0; grid.n_levels()],
        }
    }

    /// Samples `f(m, t^m)` at the levels inside the segment.
    pub fn from_fn(segment: Segment, grid: &TimeGrid, f: impl Fn(usize, f64) -> f64) -> Self {
        let values = (0..grid.n_levels())
            .map(|m| {
                if segment.contains_level(grid, m) {
                    f(m, grid.time(m))
                } else {
                    0.0
                }
            })
            .collect();
        Self { segment, values }
    }

    pub fn check_aligned(&self, grid: &TimeGrid) -> Result<()> {
        if self.values.len() != grid.n_levels() {
            return Err(Error::Config(format!(
                "control has {} samples, grid has {} levels",
                self.values.len(),
                grid.n_levels()
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            segment: self.segment,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `self + c * other`, keeping this control's segment.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self {
            segment: self.segment,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
        }
    }

    /// Sum over the segment's levels of `dt * self^m * other^m`.
    pub fn dot(&self, other: &Self, grid: &TimeGrid) -> f64 {
        self.segment
            .levels(grid)
            .into_iter()
            .map(|m| grid.dt() * self.values[m] * other.values[m])
            .sum()
    }
}

/// `sqrt(sum_m dt c_m^2)` over the levels inside the control's segment.
pub fn control_l2_norm(c: &ControlSamples, grid: &TimeGrid) -> Result<f64> {
    c.check_aligned(grid)?;
    Ok(c.dot(c, grid).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_time_grid, SpatialMesh};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mass_three_nodes() {
        let mesh = SpatialMesh::uniform(1.0, 2).unwrap();
        let m = assemble_mass(&mesh);
        let h = 0.5;
        assert_eq!(m.diagonal, vec![h / 3.0, 2.0 * h / 3.0, h / 3.0]);
        assert_eq!(m.lower, vec![h / 6.0; 2]);
        assert_eq!(m.upper, m.lower);
    }

    #[test]
    fn mass_total_is_length() {
        let mesh = SpatialMesh::uniform(1.75, 13).unwrap();
        let m = assemble_mass(&mesh);
        let ones = vec![1.0; mesh.n_nodes()];
        let total: f64 = m.mul_vec(&ones).iter().sum();
        assert!(close(total, 1.75, 1e-13));
        let c = vec![3.0; mesh.n_nodes()];
        assert!(close(mass_inner(&mesh, &ones, &c), 3.0 * 1.75, 1e-12));
    }

    #[test]
    fn stiffness_rows() {
        let mesh = SpatialMesh::uniform(1.0, 4).unwrap();
        let k = assemble_stiffness(&mesh);
        let h = 0.25;
        assert_eq!((k.get(2, 1), k.get(2, 2), k.get(2, 3)), (-1.0 / h, 2.0 / h, -1.0 / h));
        let ones = vec![1.0; 5];
        assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        let x = mesh.nodes();
        let kx = k.mul_vec(&x);
        assert!(kx[1..4].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn tridiagonal_small_cases() {
        let a = TriDiagMatrix::identity(4);
        let rhs = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(solve_tridiagonal(&a, &rhs).unwrap(), rhs);
        let one = TriDiagMatrix::new(vec![], vec![4.0], vec![]).unwrap();
        assert_eq!(solve_tridiagonal(&one, &[2.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = TriDiagMatrix::new(vec![1.0, 1.0], vec![1.0, 1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            solve_tridiagonal(&a, &[1.0, 1.0, 1.0]),
            Err(Error::Singular { index: 1 })
        );
        let z = TriDiagMatrix::new(vec![], vec![0.0], vec![]).unwrap();
        assert_eq!(solve_tridiagonal(&z, &[1.0]), Err(Error::Singular { index: 0 }));
    }

    #[test]
    fn inconsistent_sizes_rejected() {
        assert!(TriDiagMatrix::new(vec![1.0], vec![1.0], vec![]).is_err());
        let a = TriDiagMatrix::identity(3);
        assert!(matches!(solve_tridiagonal(&a, &[1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn dirichlet_solve_keeps_boundary_values() {
        let mesh = SpatialMesh::uniform(1.0, 8).unwrap();
        let a = assemble_stiffness(&mesh);
        let x = solve_dirichlet(&a, &[0.0; 9], 2.0, -1.0).unwrap();
        assert_eq!(x[0], 2.0);
        assert_eq!(x[8], -1.0);
        for (j, xj) in mesh.nodes().iter().enumerate() {
            assert!(close(x[j], 2.0 - 3.0 * xj, 1e-12));
        }
    }

    #[test]
    fn interpolation_identity_and_linears() {
        let src = SpatialMesh::uniform(1.0, 5).unwrap();
        let f = NodalField::from_fn(src.clone(), 0, |x| x);
        assert_eq!(interpolate(&f, &src), f);
        let dst = SpatialMesh::uniform(1.0, 7).unwrap();
        let g = interpolate(&f, &dst);
        for (v, x) in g.values.iter().zip(dst.nodes()) {
            assert!(close(*v, x, 1e-14));
        }
        let z = NodalField::zeros(src, 0);
        assert!(interpolate(&z, &SpatialMesh::uniform(1.3, 9).unwrap())
            .values
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn interpolation_extends_by_zero() {
        let src = SpatialMesh::uniform(1.0, 4).unwrap();
        let f = NodalField::from_fn(src, 0, |x| 1.0 - x);
        let g = interpolate(&f, &SpatialMesh::uniform(2.0, 4).unwrap());
        assert_eq!(g.values[3], 0.0);
        assert_eq!(g.values[4], 0.0);
        assert!(close(g.values[1], 0.5, 1e-15));
    }

    #[test]
    fn transpose_matches_pairing() {
        let src = SpatialMesh::uniform(1.0, 7).unwrap();
        let dst = SpatialMesh::uniform(1.3, 9).unwrap();
        let u: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let v: Vec<f64> = (0..10).map(|i| (i as f64 * 1.3).cos()).collect();
        let iu = interpolate(&NodalField::new(src.clone(), u.clone(), 0).unwrap(), &dst).values;
        let lhs: f64 = iu.iter().zip(&v).map(|(a, b)| a * b).sum();
        let itv = interpolate_transpose(&v, &src, &dst);
        let rhs: f64 = u.iter().zip(&itv).map(|(a, b)| a * b).sum();
        assert!(close(lhs, rhs, 1e-13));
    }

    #[test]
    fn flux_examples() {
        let mesh = SpatialMesh::uniform(1.3, 6).unwrap();
        let lin = NodalField::from_fn(mesh.clone(), 0, |x| -2.5 * x);
        assert!(close(boundary_flux_left(&lin).unwrap(), -2.5, 1e-12));
        let quad = NodalField::from_fn(mesh.clone(), 0, |x| x * x);
        assert!(boundary_flux_left(&quad).unwrap().abs() < 1e-12);
        let c = NodalField::from_fn(mesh, 0, |_| 4.0);
        assert_eq!(boundary_flux_left(&c).unwrap(), 0.0);
    }

    #[test]
    fn control_norm_examples() {
        let grid = build_time_grid(2.0, 10).unwrap();
        let seg = Segment::new(0.0, 1.0).unwrap();
        let zero = ControlSamples::zeros(seg, &grid);
        assert_eq!(control_l2_norm(&zero, &grid).unwrap(), 0.0);
        let one = ControlSamples::from_fn(seg, &grid, |_, _| 1.0);
        assert!(close(control_l2_norm(&one, &grid).unwrap(), 1.0, 1e-14));
        let two = one.scaled(2.0);
        assert!(close(control_l2_norm(&two, &grid).unwrap(), 2.0, 1e-14));
        let other = build_time_grid(2.0, 20).unwrap();
        assert!(matches!(control_l2_norm(&one, &other), Err(Error::Config(_))));
    }
}
