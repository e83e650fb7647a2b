//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use exterior_core::{AnnularMesh, BoundaryData, Coefficient, OperatorSpec, SourceTerm};

/// A bump-coefficient operator, so `phi_inverse` cannot take the power shortcut.
pub fn bump_spec(p: f64, n: usize) -> OperatorSpec {
    OperatorSpec::with_natural_bounds(p, n, Coefficient::SmoothBump { lo: 1.0, hi: 2.0 }).expect("valid operator")
}

/// Polar annulus `1 < r < 4` with `u = 1 + cos(theta)/2` inside and 0 outside.
pub fn polar_problem(per_doubling: usize, angles: usize) -> (Arc<AnnularMesh>, BoundaryData) {
    let mesh = Arc::new(AnnularMesh::polar_dyadic(1.0, 4.0, per_doubling, angles).expect("valid mesh"));
    let bc = BoundaryData::from_fn(&mesh, |t| 1.0 + 0.5 * t.cos(), |_| 0.0);
    (mesh, bc)
}

pub fn decaying_source(p: f64) -> SourceTerm {
    SourceTerm::power_decay(1.0, 1.0, p)
}
