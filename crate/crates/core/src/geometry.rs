//! Hyperboloid slice parametrization: weights, induced metric, volume
//! density, null coordinates and uniform tensor-product grids.
//!
//! A slice `Σ_τ = {t² − |x|² = τ², t > 0}` is parametrized by `x ∈ ℝ^d` via
//! `t = w_τ(x) = √(τ² + |x|²)`. The Lorentz boosts `L^i = x^i ∂_t + t ∂_{x^i}`
//! are tangent to every slice and act intrinsically as `w_τ ∂_{x^i}`.

use thiserror::Error;

use crate::MAX_DIM;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid slice parameters: {0}")]
    InvalidParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no grid node lies in the strip [{v_lo}, {v_hi}]")]
    EmptyStrip { v_lo: f64, v_hi: f64 },
}

/// One hyperboloid `Σ_τ` in ℝ^{1+d}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceParams {
    pub dim: usize,
    pub tau: f64,
}

impl SliceParams {
    pub fn new(dim: usize, tau: f64) -> Result<Self, GeometryError> {
        if dim < 2 || dim > MAX_DIM {
            return Err(GeometryError::InvalidParams(format!(
                "dim must lie in 2..={MAX_DIM}, got {dim}"
            )));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(GeometryError::InvalidParams(format!(
                "tau must be finite and positive, got {tau}"
            )));
        }
        Ok(SliceParams { dim, tau })
    }
}

/// The weight `w_τ(x) = √(τ² + |x|²)`; equals the `t` coordinate on `Σ_τ`.
pub fn weight(params: SliceParams, x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), params.dim);
    let r2: f64 = x.iter().map(|xi| xi * xi).sum();
    (params.tau * params.tau + r2).sqrt()
}

/// Volume density `τ / w_τ(x)` of `Σ_τ` relative to `dx¹ ∧ ⋯ ∧ dx^d`.
///
/// Equals `√det g` for the induced metric `g`.
pub fn volume_density(params: SliceParams, x: &[f64]) -> f64 {
    params.tau / weight(params, x)
}

/// Induced Riemannian metric `g_ij = δ_ij − x^i x^j / w_τ²`, row-major d×d.
pub fn induced_metric(params: SliceParams, x: &[f64]) -> SymMatrix {
    let d = params.dim;
    let w2 = {
        let w = weight(params, x);
        w * w
    };
    let mut a = [0.0; MAX_DIM * MAX_DIM];
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            a[i * d + j] = delta - x[i] * x[j] / w2;
        }
    }
    SymMatrix { dim: d, a }
}

/// Small dense symmetric matrix, up to 4×4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    pub dim: usize,
    a: [f64; MAX_DIM * MAX_DIM],
}

impl SymMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim + j]
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let d = self.dim;
        let mut m = self.a;
        let mut det = 1.0;
        for k in 0..d {
            let mut piv = k;
            for r in k + 1..d {
                if m[r * d + k].abs() > m[piv * d + k].abs() {
                    piv = r;
                }
            }
            if piv != k {
                for c in 0..d {
                    m.swap(k * d + c, piv * d + c);
                }
                det = -det;
            }
            let p = m[k * d + k];
            if p == 0.0 {
                return 0.0;
            }
            det *= p;
            for r in k + 1..d {
                let f = m[r * d + k] / p;
                for c in k..d {
                    m[r * d + c] -= f * m[k * d + c];
                }
            }
        }
        det
    }

    /// Cholesky factorization; `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<SymMatrix> {
        let d = self.dim;
        let mut l = [0.0; MAX_DIM * MAX_DIM];
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.a[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Some(SymMatrix { dim: d, a: l })
    }
}

/// Null coordinate `v = t − x¹`.
pub fn null_coordinate(t: f64, x: &[f64]) -> f64 {
    t - x[0]
}

/// Boost derivative of the null coordinate: `L¹ v = −v`, `L^i v = x^i` for
/// `i ≠ 1`. Axes are 0-based, so `axis == 0` is the distinguished direction.
pub fn null_coordinate_boost(axis: usize, t: f64, x: &[f64]) -> f64 {
    if axis == 0 {
        -(t - x[0])
    } else {
        x[axis]
    }
}

/// Membership in the forward region `{t > |x| + 1}`.
pub fn forward_cone(t: f64, x: &[f64]) -> bool {
    let r: f64 = x.iter().map(|xi| xi * xi).sum::<f64>().sqrt();
    t > r + 1.0
}

/// Support window `[v_<, v_>]` of the nonlinearity profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripSpec {
    pub v_lo: f64,
    pub v_hi: f64,
}

impl StripSpec {
    pub fn new(v_lo: f64, v_hi: f64) -> Result<Self, GeometryError> {
        if !(v_lo < v_hi) {
            return Err(GeometryError::InvalidParams(format!(
                "strip requires v_lo < v_hi, got [{v_lo}, {v_hi}]"
            )));
        }
        Ok(StripSpec { v_lo, v_hi })
    }

    /// Closed-interval membership, matching `supp Υ ⊂ [v_<, v_>]`.
    pub fn contains(&self, v: f64) -> bool {
        v >= self.v_lo && v <= self.v_hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.v_lo + self.v_hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.v_hi - self.v_lo)
    }
}

/// Uniform tensor-product grid on the ℝ^d chart of one slice, centered at the
/// origin with per-axis half-width `extent` and an odd number of nodes per
/// axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGrid {
    pub params: SliceParams,
    pub extent: f64,
    pub n: usize,
    pub spacing: f64,
}

impl SliceGrid {
    pub fn new(params: SliceParams, extent: f64, n: usize) -> Result<Self, GeometryError> {
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(GeometryError::InvalidGrid(format!(
                "extent must be finite and positive, got {extent}"
            )));
        }
        if n < 3 || n % 2 == 0 {
            return Err(GeometryError::InvalidGrid(format!(
                "node count must be odd and at least 3, got {n}"
            )));
        }
        let spacing = 2.0 * extent / (n - 1) as f64;
        Ok(SliceGrid { params, extent, n, spacing })
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing
    }

    /// Multi-index of a flat node index, slowest axis first.
    pub fn multi_index(&self, flat: usize, out: &mut [usize; MAX_DIM]) {
        let d = self.dim();
        let mut rem = flat;
        for ax in (0..d).rev() {
            out[ax] = rem % self.n;
            rem /= self.n;
        }
    }

    /// Coordinates of a node given its flat index.
    pub fn node(&self, flat: usize, out: &mut [f64; MAX_DIM]) {
        let d = self.dim();
        let mut idx = [0usize; MAX_DIM];
        self.multi_index(flat, &mut idx);
        for ax in 0..d {
            out[ax] = self.axis_coord(idx[ax]);
        }
    }

    /// Trapezoid quadrature weight of a node, including the `h^d` factor.
    /// Boundary faces carry the factor 1/2 per axis.
    pub fn quad_weight(&self, flat: usize) -> f64 {
        let d = self.dim();
        let mut idx = [0usize; MAX_DIM];
        self.multi_index(flat, &mut idx);
        let mut w = self.spacing.powi(d as i32);
        for ax in 0..d {
            if idx[ax] == 0 || idx[ax] == self.n - 1 {
                w *= 0.5;
            }
        }
        w
    }

    /// True when the node touches the outermost ring of the grid.
    pub fn is_boundary(&self, flat: usize) -> bool {
        let d = self.dim();
        let mut idx = [0usize; MAX_DIM];
        self.multi_index(flat, &mut idx);
        (0..d).any(|ax| idx[ax] == 0 || idx[ax] == self.n - 1)
    }
}

/// Measured bracket of `w_τ / τ²` over the grid nodes lying in the strip.
///
/// Strip membership is the closed condition `v = w_τ(x) − x¹ ∈ [v_<, v_>]`
/// evaluated on the slice. The comparison is only meaningful when the grid
/// covers part of the strip; with no qualifying node this returns
/// [`GeometryError::EmptyStrip`].
pub fn strip_comparison(
    params: SliceParams,
    strip: StripSpec,
    grid: &SliceGrid,
) -> Result<(f64, f64), GeometryError> {
    let tau2 = params.tau * params.tau;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut x = [0.0; MAX_DIM];
    for flat in 0..grid.num_nodes() {
        grid.node(flat, &mut x);
        let w = weight(params, &x[..params.dim]);
        let v = null_coordinate(w, &x[..params.dim]);
        if strip.contains(v) {
            let ratio = w / tau2;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    if lo.is_finite() {
        Ok((lo, hi))
    } else {
        Err(GeometryError::EmptyStrip { v_lo: strip.v_lo, v_hi: strip.v_hi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(dim: usize, tau: f64) -> SliceParams {
        SliceParams::new(dim, tau).unwrap()
    }

    #[test]
    fn weight_at_origin_is_tau() {
        assert_eq!(weight(params(2, 1.0), &[0.0, 0.0]), 1.0);
        assert_eq!(weight(params(3, 2.0), &[0.0, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn weight_hand_value() {
        // √(9 + 16) = 5
        assert_eq!(weight(params(2, 3.0), &[4.0, 0.0]), 5.0);
    }

    #[test]
    fn volume_density_values() {
        assert_eq!(volume_density(params(2, 1.0), &[0.0, 0.0]), 1.0);
        assert!((volume_density(params(2, 3.0), &[4.0, 0.0]) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn metric_at_origin_is_identity() {
        let g = induced_metric(params(3, 1.0), &[0.0, 0.0, 0.0]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn metric_hand_value_d2() {
        let g = induced_metric(params(2, 3.0), &[4.0, 0.0]);
        assert!((g.get(0, 0) - 9.0 / 25.0).abs() < 1e-15);
        assert_eq!(g.get(0, 1), 0.0);
        assert_eq!(g.get(1, 1), 1.0);
        // matrix determinant lemma: det = 1 − |x|²/w² = τ²/w²
        assert!((g.det() - 9.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn metric_determinant_matches_density() {
        let p = params(3, 1.7);
        for x in [[0.3, -1.2, 2.0], [5.0, 0.0, -0.1], [0.0, 0.0, 0.0]] {
            let g = induced_metric(p, &x);
            let dens = volume_density(p, &x);
            let rel = (g.det() - dens * dens).abs() / (dens * dens);
            assert!(rel < 1e-12, "rel err {rel}");
        }
    }

    #[test]
    fn metric_positive_definite_on_grid() {
        let p = params(2, 0.5);
        let grid = SliceGrid::new(p, 10.0, 21).unwrap();
        let mut x = [0.0; MAX_DIM];
        for flat in 0..grid.num_nodes() {
            grid.node(flat, &mut x);
            let g = induced_metric(p, &x[..2]);
            assert!(g.cholesky().is_some(), "not PD at {:?}", &x[..2]);
        }
    }

    #[test]
    fn null_coordinate_values() {
        assert_eq!(null_coordinate(5.0, &[5.0, 0.0]), 0.0);
        let p = params(2, 1.0);
        let x = [0.0, 1.0];
        let t = weight(p, &x);
        assert!((null_coordinate(t, &x) - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn null_coordinate_boosts() {
        let x = [2.0, -1.0];
        let t = 7.0;
        let v = null_coordinate(t, &x);
        assert_eq!(null_coordinate_boost(0, t, &x), -v);
        assert_eq!(null_coordinate_boost(1, t, &x), -1.0);
    }

    #[test]
    fn grid_spacing_and_weights() {
        let g = SliceGrid::new(params(2, 1.0), 2.0, 5).unwrap();
        assert_eq!(g.spacing, 1.0);
        assert_eq!(g.num_nodes(), 25);
        // corner, edge, interior trapezoid weights
        assert_eq!(g.quad_weight(0), 0.25);
        assert_eq!(g.quad_weight(2), 0.5);
        assert_eq!(g.quad_weight(12), 1.0);
        assert!(g.is_boundary(0));
        assert!(!g.is_boundary(12));
    }

    #[test]
    fn strip_comparison_bracket_tau10() {
        let p = params(2, 10.0);
        let grid = SliceGrid::new(p, 120.0, 241).unwrap();
        let strip = StripSpec::new(-1.0, 1.0).unwrap();
        let (lo, hi) = strip_comparison(p, strip, &grid).unwrap();
        assert!(lo > 0.0 && hi.is_finite());
        assert!(hi / lo < 5.0, "bracket too wide: [{lo}, {hi}]");
    }

    #[test]
    fn strip_comparison_empty() {
        // On Σ_τ the null coordinate is positive, so a negative window is
        // never hit.
        let p = params(2, 1.0);
        let grid = SliceGrid::new(p, 4.0, 17).unwrap();
        let strip = StripSpec::new(-3.0, -2.0).unwrap();
        match strip_comparison(p, strip, &grid) {
            Err(GeometryError::EmptyStrip { .. }) => {}
            other => panic!("expected EmptyStrip, got {other:?}"),
        }
    }

    #[test]
    fn strip_membership_is_closed() {
        // Build a grid with a node exactly on v = v_lo.
        let p = params(2, 1.0);
        // node x = (0, 0): v = 1. Use strip [1, 2]: boundary node counts.
        let grid = SliceGrid::new(p, 1.0, 3).unwrap();
        let strip = StripSpec::new(1.0, 1.0 + 1e-12).unwrap();
        assert!(strip_comparison(p, strip, &grid).is_ok());
    }

    #[test]
    fn forward_cone_predicate() {
        assert!(forward_cone(3.0, &[1.0, 0.0]));
        assert!(!forward_cone(2.0, &[1.0, 0.0]));
    }
}
