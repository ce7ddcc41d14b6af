use proptest::prelude::*;
use snwave::fem::{assemble_mass, assemble_stiffness, interpolate, NodalField};
use snwave::mesh::{
    analytic_perimeter, build_spatial_mesh, build_time_grid, compute_tc, controllability_lower_bound, level_meshes,
    trapezoid_stats, BoundarySegments, MovingDomainSpec, SegmentMode,
};

/// `exp(x) / k` with `exp` summed as a Taylor series.
fn tc_series(k: f64) -> f64 {
    let x = 2.0 * k * (1.0 + k) / (1.0 - k).powi(3);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..400 {
        term *= x / n as f64;
        sum += term;
    }
    sum / k
}

#[test]
fn critical_time_values() {
    let tc = compute_tc(0.25).unwrap();
    assert!((tc - 17.597_834_287_066_33).abs() < 1e-12);
    assert!((tc - 17.5978).abs() < 1e-3);
    assert!((compute_tc(0.5).unwrap() - 325_509.582_838_007_84).abs() < 1e-6);
    assert!((controllability_lower_bound(0.25).unwrap() - 13.597_834_287_066_33).abs() < 1e-12);
    assert!(compute_tc(0.0).is_err());
    assert!(compute_tc(1.0).is_err());
}

#[test]
fn border_lengths_near_table_values() {
    let tc = compute_tc(0.25).unwrap();
    for (mult, reference) in [(1.0, 41.936), (5.0, 202.484), (10.0, 403.167)] {
        let spec = MovingDomainSpec::new(0.25, mult * tc).unwrap();
        let stats = trapezoid_stats(&spec, spec.horizon() / 100.0).unwrap();
        assert!((stats.border_length - reference).abs() / reference <= 0.01);
        assert!((stats.border_length - analytic_perimeter(&spec)).abs() < 1e-9);
    }
}

#[test]
fn vertex_counts_within_band() {
    let tc = compute_tc(0.25).unwrap();
    let reference = [2916, 2580, 2411, 2365, 2319, 2309, 2316, 2273, 2246, 2236];
    for (i, &p) in reference.iter().enumerate() {
        let spec = MovingDomainSpec::new(0.25, (i + 1) as f64 * tc).unwrap();
        let v = trapezoid_stats(&spec, spec.horizon() / 100.0).unwrap().n_vertices as f64;
        assert!((v - p as f64).abs() / p as f64 <= 0.3, "{}Tc: {v} vs {p}", i + 1);
    }
}

proptest! {
    #[test]
    fn tc_matches_series(k in 0.01f64..0.6) {
        let a = compute_tc(k).unwrap();
        let b = tc_series(k);
        prop_assert!((a - b).abs() <= 1e-11 * b);
    }

    #[test]
    fn level_meshes_follow_the_boundary(k in 0.0f64..0.95, t in 0.1f64..50.0, steps in 2usize..60, cells in 2usize..40) {
        let spec = MovingDomainSpec::new(k, t).unwrap();
        let grid = build_time_grid(t, steps).unwrap();
        prop_assert_eq!(grid.time(steps), t);
        let meshes = level_meshes(&spec, &grid, cells).unwrap();
        prop_assert_eq!(meshes.len(), steps + 1);
        for (m, mesh) in meshes.iter().enumerate() {
            prop_assert_eq!(mesh.n_nodes(), cells + 1);
            prop_assert_eq!(mesh.node(0), 0.0);
            let top = spec.alpha(grid.time(m)).unwrap();
            prop_assert!((mesh.node(cells) - top).abs() <= 1e-12 * top);
        }
    }

    #[test]
    fn mass_and_stiffness_invariants(len in 0.1f64..50.0, cells in 2usize..80) {
        let mesh = snwave::mesh::SpatialMesh::uniform(len, cells).unwrap();
        let ones = vec![1.0; mesh.n_nodes()];
        let total: f64 = assemble_mass(&mesh).mul_vec(&ones).iter().sum();
        prop_assert!((total - len).abs() <= 1e-12 * len);
        let k1 = assemble_stiffness(&mesh).mul_vec(&ones);
        prop_assert!(k1.iter().all(|v| v.abs() <= 1e-9 / mesh.h()));
    }

    #[test]
    fn interpolation_reproduces_linears(a in -5.0f64..5.0, b in -5.0f64..5.0, k in 0.0f64..0.9, t in 0.0f64..3.0) {
        let spec = MovingDomainSpec::new(k, 3.0).unwrap();
        let small = build_spatial_mesh(&spec, 0.0, 13).unwrap();
        let big = build_spatial_mesh(&spec, t, 17).unwrap();
        let f = NodalField::from_fn(big.clone(), 0, |x| a + b * x);
        let g = interpolate(&f, &small);
        for (x, v) in small.nodes().iter().zip(&g.values) {
            prop_assert!((v - (a + b * x)).abs() <= 1e-10 * (1.0 + a.abs() + b.abs() * x));
        }
    }

    #[test]
    fn disjoint_halves_partition_levels(t in 0.5f64..100.0, steps in 2usize..200) {
        let grid = build_time_grid(t, steps).unwrap();
        let segs = BoundarySegments::new(SegmentMode::DisjointHalves, t).unwrap();
        prop_assert!(!segs.sigma1.contains_level(&grid, 0) && !segs.sigma2.contains_level(&grid, 0));
        for m in 1..=steps {
            prop_assert!(segs.sigma1.contains_level(&grid, m) != segs.sigma2.contains_level(&grid, m));
        }
    }
}
