//! Structured annular meshes (1D radial or 2D polar) and nodal functions on them.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{precondition, Result};
use crate::special::unit_ball_volume;

/// Radii `r_0 < ... < r_M`, with `angles` nodes per ring in 2D polar mode
/// (`angles == 0` means a 1D radial mesh in dimension `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct AnnularMesh {
    pub n: usize,
    pub radii: Vec<f64>,
    pub angles: usize,
}

/// `2^(j / c)`, exact whenever `c` divides `j`.
fn lattice(j: i64, c: usize) -> f64 {
    let c = c as i64;
    let k = j.div_euclid(c);
    let rem = j.rem_euclid(c);
    2f64.powi(k as i32) * (rem as f64 / c as f64).exp2()
}

impl AnnularMesh {
    /// Radial mesh from explicit radii. Successive ratios must lie in `[1, 2]`
    /// except for the first cell of a mesh starting at the origin.
    pub fn radial(n: usize, radii: Vec<f64>) -> Result<Self> {
        let m = AnnularMesh { n, radii, angles: 0 };
        m.validate()?;
        Ok(m)
    }

    pub fn polar(radii: Vec<f64>, angles: usize) -> Result<Self> {
        if angles < 3 {
            return Err(precondition("polar mesh needs at least 3 angular nodes"));
        }
        let m = AnnularMesh { n: 2, radii, angles };
        m.validate()?;
        if m.radii[0] <= 0.0 {
            return Err(precondition("polar mesh needs R_in > 0"));
        }
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(precondition("dimension must be at least 2"));
        }
        if self.radii.len() < 2 {
            return Err(precondition("mesh needs at least two radii"));
        }
        if !(self.radii[0] >= 0.0) || self.radii.iter().any(|r| !r.is_finite()) {
            return Err(precondition("radii must be finite and nonnegative"));
        }
        for w in self.radii.windows(2) {
            if !(w[1] > w[0]) {
                return Err(precondition("radii must be strictly increasing"));
            }
            if w[0] > 0.0 && w[1] / w[0] > 2.0 * (1.0 + 1e-12) {
                return Err(precondition(format!("grading ratio {} exceeds 2", w[1] / w[0])));
            }
        }
        Ok(())
    }

    /// `cells` geometric cells on `[r_in, r_out]`.
    pub fn geometric(n: usize, r_in: f64, r_out: f64, cells: usize) -> Result<Self> {
        if !(r_in > 0.0 && r_out > r_in) || cells == 0 {
            return Err(precondition("need 0 < R_in < R_out and cells >= 1"));
        }
        let q = (r_out / r_in).ln() / cells as f64;
        let mut radii: Vec<f64> = (0..=cells).map(|k| r_in * (q * k as f64).exp()).collect();
        radii[cells] = r_out;
        Self::radial(n, radii)
    }

    fn lattice_radii(r_in: f64, r_out: f64, per_doubling: usize) -> Result<Vec<f64>> {
        if per_doubling == 0 || !(r_in > 0.0 && r_out > r_in) {
            return Err(precondition("need 0 < R_in < R_out and per_doubling >= 1"));
        }
        let c = per_doubling as f64;
        let j0 = (r_in.log2() * c).floor() as i64;
        let j1 = (r_out.log2() * c).ceil() as i64;
        let mut radii = vec![r_in];
        for j in j0..=j1 {
            let r = lattice(j, per_doubling);
            let last = *radii.last().unwrap();
            if r > last * (1.0 + 1e-9) && r < r_out * (1.0 - 1e-9) {
                radii.push(r);
            }
        }
        radii.push(r_out);
        Ok(radii)
    }

    /// Nodes on the lattice `2^(j/c)` plus the two endpoints. Meshes with the
    /// same `c` share every lattice node, so exhaustion iterates compare nodewise.
    pub fn dyadic(n: usize, r_in: f64, r_out: f64, per_doubling: usize) -> Result<Self> {
        Self::radial(n, Self::lattice_radii(r_in, r_out, per_doubling)?)
    }

    pub fn polar_dyadic(r_in: f64, r_out: f64, per_doubling: usize, angles: usize) -> Result<Self> {
        Self::polar(Self::lattice_radii(r_in, r_out, per_doubling)?, angles)
    }

    /// Mesh of the punctured ball `B_{r_out}` with the point `K = {0}` as inner
    /// boundary: node 0 at the origin, then the lattice from `h_min` up.
    pub fn point(n: usize, r_out: f64, h_min: f64, per_doubling: usize) -> Result<Self> {
        if !(h_min > 0.0 && h_min < r_out) {
            return Err(precondition("need 0 < h_min < R_out"));
        }
        let mut radii = vec![0.0];
        radii.extend(Self::lattice_radii(h_min, r_out, per_doubling)?);
        Self::radial(n, radii)
    }

    pub fn is_polar(&self) -> bool {
        self.angles > 0
    }

    /// Nodes per ring (1 for radial meshes).
    pub fn ring_size(&self) -> usize {
        self.angles.max(1)
    }

    pub fn rings(&self) -> usize {
        self.radii.len()
    }

    pub fn node_count(&self) -> usize {
        self.rings() * self.ring_size()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ring_size() + j
    }

    pub fn r_in(&self) -> f64 {
        self.radii[0]
    }

    pub fn r_out(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn theta(&self, j: usize) -> f64 {
        if self.angles == 0 {
            0.0
        } else {
            2.0 * PI * j as f64 / self.angles as f64
        }
    }

    pub fn d_theta(&self) -> f64 {
        2.0 * PI / self.ring_size() as f64
    }

    /// Measure of the shell `r_a < |x| < r_b` in `R^n`.
    pub fn shell_measure(&self, r_a: f64, r_b: f64) -> f64 {
        unit_ball_volume(self.n) * (r_b.powi(self.n as i32) - r_a.powi(self.n as i32))
    }

    /// Measure of the whole annulus.
    pub fn measure(&self) -> f64 {
        self.shell_measure(self.r_in(), self.r_out())
    }

    /// `n omega_n` in radial mode, `d_theta` in polar mode: the angular
    /// factor multiplying `int (.) r^(n-1) dr` for one node's share of a ring.
    pub fn angular_factor(&self) -> f64 {
        if self.is_polar() {
            self.d_theta()
        } else {
            self.n as f64 * unit_ball_volume(self.n)
        }
    }

    /// Lumped nodal measures `int hat_i dx`; they sum to the annulus measure.
    pub fn node_measures(&self) -> Vec<f64> {
        let t = self.ring_size();
        let n = self.n as i32;
        let a = self.angular_factor();
        let mut out = vec![0.0; self.node_count()];
        for i in 0..self.rings() - 1 {
            let (r0, r1) = (self.radii[i], self.radii[i + 1]);
            let (left, right) = hat_moments(r0, r1, n);
            for j in 0..t {
                out[self.index(i, j)] += a * left;
                out[self.index(i + 1, j)] += a * right;
            }
        }
        out
    }
}

/// `int_{r0}^{r1} hat(r) r^(n-1) dr` for the hats peaking at `r0` and `r1`.
fn hat_moments(r0: f64, r1: f64, n: i32) -> (f64, f64) {
    let (x, w) = crate::quadrature::gauss_legendre(8);
    let (c, h) = (0.5 * (r0 + r1), 0.5 * (r1 - r0));
    let mut left = 0.0;
    let mut right = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let r = c + h * xi;
        let s = 0.5 * (1.0 + xi);
        let m = wi * h * r.powi(n - 1);
        left += m * (1.0 - s);
        right += m * s;
    }
    (left, right)
}

/// Dirichlet data on the inner and outer rings (one value per angular node).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub inner: Vec<f64>,
    pub outer: Vec<f64>,
}

impl BoundaryData {
    pub fn constant(mesh: &AnnularMesh, inner: f64, outer: f64) -> Self {
        let t = mesh.ring_size();
        BoundaryData { inner: vec![inner; t], outer: vec![outer; t] }
    }

    pub fn from_fn(mesh: &AnnularMesh, inner: impl Fn(f64) -> f64, outer: impl Fn(f64) -> f64) -> Self {
        let t = mesh.ring_size();
        BoundaryData {
            inner: (0..t).map(|j| inner(mesh.theta(j))).collect(),
            outer: (0..t).map(|j| outer(mesh.theta(j))).collect(),
        }
    }

    pub fn check(&self, mesh: &AnnularMesh) -> Result<()> {
        let t = mesh.ring_size();
        if self.inner.len() != t || self.outer.len() != t {
            return Err(precondition(format!("boundary traces need {t} values per ring")));
        }
        if self.inner.iter().chain(&self.outer).any(|v| !v.is_finite()) {
            return Err(precondition("boundary data must be finite"));
        }
        Ok(())
    }

    pub fn inner_sup(&self) -> f64 {
        self.inner.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.inner.iter().chain(&self.outer).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Nodal values on a mesh, ring-major (`index = i * ring_size + j`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub mesh: Arc<AnnularMesh>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Arc<AnnularMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(precondition(format!("expected {} nodal values, got {}", mesh.node_count(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(precondition("nodal values must be finite"));
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn from_fn(mesh: Arc<AnnularMesh>, g: impl Fn(f64, f64) -> f64) -> Self {
        let t = mesh.ring_size();
        let mut values = Vec::with_capacity(mesh.node_count());
        for i in 0..mesh.rings() {
            for j in 0..t {
                values.push(g(mesh.radii[i], mesh.theta(j)));
            }
        }
        GridFunction { mesh, values }
    }

    pub fn ring(&self, i: usize) -> &[f64] {
        let t = self.mesh.ring_size();
        &self.values[i * t..(i + 1) * t]
    }

    pub fn inner_trace(&self) -> &[f64] {
        self.ring(0)
    }

    pub fn outer_trace(&self) -> &[f64] {
        self.ring(self.mesh.rings() - 1)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Cartesian coordinates of node `(i, j)` in the plane of the mesh.
    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        let r = self.mesh.radii[i];
        let t = self.mesh.theta(j);
        (r * t.cos(), r * t.sin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_meshes_nest() {
        let a = AnnularMesh::dyadic(2, 1.0, 8.0, 4).unwrap();
        let b = AnnularMesh::dyadic(2, 1.0, 16.0, 4).unwrap();
        assert_eq!(a.radii.len(), 13);
        assert_eq!(&b.radii[..13], &a.radii[..]);
        assert_eq!(a.radii[4], 2.0);
        assert_eq!(a.r_out(), 8.0);
    }

    #[test]
    fn measures_sum_to_volume() {
        for mesh in [
            AnnularMesh::geometric(3, 1.0, 3.0, 17).unwrap(),
            AnnularMesh::polar_dyadic(1.0, 4.0, 3, 12).unwrap(),
            AnnularMesh::point(2, 4.0, 1.0 / 64.0, 2).unwrap(),
        ] {
            let s: f64 = mesh.node_measures().iter().sum();
            assert!((s / mesh.measure() - 1.0).abs() < 1e-13, "{s} vs {}", mesh.measure());
        }
    }

    #[test]
    fn grading_enforced() {
        assert!(AnnularMesh::radial(2, vec![1.0, 3.0]).is_err());
        assert!(AnnularMesh::radial(2, vec![0.0, 0.1, 0.2]).is_ok());
        assert!(AnnularMesh::radial(2, vec![1.0, 1.0]).is_err());
        assert!(AnnularMesh::polar(vec![0.0, 1.0], 8).is_err());
    }
}
