//! Leapfrog stepping of the semilinear model
//! `φ_tt = Δφ + Υ(t − x¹)(∂_t φ + ∂_{x¹} φ)²`
//! on a uniform box, with the prolonged (φ, ψ) system available as a
//! cross-check route.
//!
//! The time derivative inside the nonlinearity is centered across the levels
//! n ± 1 via a two-pass predictor: the first pass uses the backward
//! difference, the second re-evaluates the source with the centered
//! difference through the predicted level. The nonlinearity is supported in
//! the strip `t − x¹ ∈ [v_<, v_>]`, which touches only a narrow band of x¹
//! columns per step.

use crate::geometry::StripSpec;

/// Uniform tensor-product box `[−X, X]^d` with an odd node count per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
}

impl SpatialGrid {
    /// Build from a requested half-width; the realized half-width is
    /// `(n−1)/2 · h ≥ X`.
    pub fn with_half_width(dim: usize, half_width: f64, h: f64) -> SpatialGrid {
        let half_cells = (half_width / h).ceil() as usize;
        SpatialGrid { dim, n: 2 * half_cells + 1, h }
    }

    pub fn half_width(&self) -> f64 {
        (self.n - 1) as f64 / 2.0 * self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn coord(&self, idx: usize) -> f64 {
        -self.half_width() + idx as f64 * self.h
    }

    /// Index of the axis node closest to a coordinate.
    pub fn nearest_index(&self, x: f64) -> usize {
        (((x + self.half_width()) / self.h).round() as isize).clamp(0, self.n as isize - 1)
            as usize
    }
}

/// The nonlinearity profile: a single smooth bump supported on the strip.
#[derive(Debug, Clone, PartialEq)]
pub struct Upsilon {
    pub strip: StripSpec,
    pub amplitude: f64,
}

impl Upsilon {
    pub fn new(strip: StripSpec, amplitude: f64) -> Self {
        Upsilon { strip, amplitude }
    }

    /// Υ(v): vanishes with all derivatives at the strip endpoints.
    pub fn value(&self, v: f64) -> f64 {
        let s = (v - self.strip.mid()) / self.strip.half_width();
        if s.abs() >= 1.0 {
            return 0.0;
        }
        self.amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
    }

    /// Υ′(v).
    pub fn derivative(&self, v: f64) -> f64 {
        let hw = self.strip.half_width();
        let s = (v - self.strip.mid()) / hw;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let m = 1.0 / (1.0 - s * s);
        self.amplitude * (1.0 - m).exp() * (-2.0 * s * m * m) / hw
    }
}

/// The x¹ index range where `t − x¹` falls inside the strip (closed).
pub fn strip_columns(grid: &SpatialGrid, strip: &StripSpec, t: f64) -> (usize, usize) {
    // v ∈ [v_lo, v_hi] ⟺ x¹ ∈ [t − v_hi, t − v_lo]
    let x_lo = t - strip.v_hi;
    let x_hi = t - strip.v_lo;
    let half = grid.half_width();
    if x_hi < -half || x_lo > half {
        return (1, 1); // empty interior range
    }
    let lo = grid.nearest_index(x_lo).saturating_sub(1).max(1);
    let hi = (grid.nearest_index(x_hi) + 2).min(grid.n - 1);
    (lo, hi)
}

/// One leapfrog step of the φ equation (zero exterior boundary):
/// writes level n+1 given levels n and n−1 at time `t_n`.
pub fn step_phi(
    grid: &SpatialGrid,
    upsilon: Option<&Upsilon>,
    t_n: f64,
    dt: f64,
    prev: &[f64],
    curr: &[f64],
    next: &mut [f64],
) {
    let n = grid.n;
    let h = grid.h;
    let lam = (dt / h) * (dt / h);
    let dt2 = dt * dt;
    match grid.dim {
        2 => {
            // pass A: linear update on the interior
            for i2 in 1..n - 1 {
                let row = i2 * n;
                let up = row - n;
                let dn = row + n;
                for i1 in 1..n - 1 {
                    let c = curr[row + i1];
                    let lap = curr[row + i1 - 1] + curr[row + i1 + 1] + curr[up + i1]
                        + curr[dn + i1]
                        - 4.0 * c;
                    next[row + i1] = 2.0 * c - prev[row + i1] + lam * lap;
                }
            }
            // pass B: two-pass nonlinear correction on the strip columns
            if let Some(ups) = upsilon {
                let (lo, hi) = strip_columns(grid, &ups.strip, t_n);
                for i1 in lo..hi {
                    let x1 = grid.coord(i1);
                    let upsv = ups.value(t_n - x1);
                    if upsv == 0.0 {
                        continue;
                    }
                    for i2 in 1..n - 1 {
                        let at = i2 * n + i1;
                        let d1 = (curr[at + 1] - curr[at - 1]) / (2.0 * h);
                        // predictor with the backward time difference
                        let dt_b = (curr[at] - prev[at]) / dt;
                        let w_pred = dt_b + d1;
                        let pred = next[at] + dt2 * upsv * w_pred * w_pred;
                        // corrector with the centered difference
                        let dt_c = (pred - prev[at]) / (2.0 * dt);
                        let w_corr = dt_c + d1;
                        next[at] += dt2 * upsv * w_corr * w_corr;
                    }
                }
            }
        }
        3 => {
            for i3 in 1..n - 1 {
                for i2 in 1..n - 1 {
                    let row = (i3 * n + i2) * n;
                    let up = row - n;
                    let dn = row + n;
                    let back = row - n * n;
                    let front = row + n * n;
                    for i1 in 1..n - 1 {
                        let c = curr[row + i1];
                        let lap = curr[row + i1 - 1] + curr[row + i1 + 1] + curr[up + i1]
                            + curr[dn + i1]
                            + curr[back + i1]
                            + curr[front + i1]
                            - 6.0 * c;
                        next[row + i1] = 2.0 * c - prev[row + i1] + lam * lap;
                    }
                }
            }
            if let Some(ups) = upsilon {
                let (lo, hi) = strip_columns(grid, &ups.strip, t_n);
                for i1 in lo..hi {
                    let x1 = grid.coord(i1);
                    let upsv = ups.value(t_n - x1);
                    if upsv == 0.0 {
                        continue;
                    }
                    for i3 in 1..n - 1 {
                        for i2 in 1..n - 1 {
                            let at = (i3 * n + i2) * n + i1;
                            let d1 = (curr[at + 1] - curr[at - 1]) / (2.0 * h);
                            let dt_b = (curr[at] - prev[at]) / dt;
                            let w_pred = dt_b + d1;
                            let pred = next[at] + dt2 * upsv * w_pred * w_pred;
                            let dt_c = (pred - prev[at]) / (2.0 * dt);
                            let w_corr = dt_c + d1;
                            next[at] += dt2 * upsv * w_corr * w_corr;
                        }
                    }
                }
            }
        }
        d => panic!("unsupported dimension {d}"),
    }
}

/// One linear leapfrog step with periodic wrap-around; validation only
/// (dispersion checks on eigenmodes).
pub fn step_linear_periodic(
    grid: &SpatialGrid,
    dt: f64,
    prev: &[f64],
    curr: &[f64],
    next: &mut [f64],
) {
    assert_eq!(grid.dim, 2);
    let n = grid.n - 1; // wrap period: the last node duplicates the first
    let lam = (dt / grid.h) * (dt / grid.h);
    let idx = |i2: usize, i1: usize| (i2 % n) * grid.n + (i1 % n);
    for i2 in 0..n {
        for i1 in 0..n {
            let c = curr[idx(i2, i1)];
            let lap = curr[idx(i2, i1 + n - 1)] + curr[idx(i2, i1 + 1)] + curr[idx(i2 + n - 1, i1)]
                + curr[idx(i2 + 1, i1)]
                - 4.0 * c;
            next[idx(i2, i1)] = 2.0 * c - prev[idx(i2, i1)] + lam * lap;
        }
    }
    // copy the duplicated seam
    for i2 in 0..grid.n {
        let src = idx(i2, 0);
        next[i2 * grid.n + n] = next[src];
    }
    for i1 in 0..grid.n {
        next[n * grid.n + i1] = next[i1];
    }
}

/// One step of the prolonged (φ, ψ) system, ψ = L¹φ. Writing
/// `W = ∂_t φ + ∂_{x¹} φ`, the commuted source reads
/// `ψ_tt = Δψ − (vΥ′ + 2Υ) W² + 2ΥW (∂_t ψ + ∂_{x¹} ψ)`.
/// d = 2 only; used as a consistency route against `derive_psi`.
#[allow(clippy::too_many_arguments)]
pub fn step_prolonged(
    grid: &SpatialGrid,
    upsilon: Option<&Upsilon>,
    t_n: f64,
    dt: f64,
    phi_prev: &[f64],
    phi_curr: &[f64],
    phi_next: &mut [f64],
    psi_prev: &[f64],
    psi_curr: &[f64],
    psi_next: &mut [f64],
) {
    assert_eq!(grid.dim, 2);
    step_phi(grid, upsilon, t_n, dt, phi_prev, phi_curr, phi_next);
    // linear part of ψ
    step_phi(grid, None, t_n, dt, psi_prev, psi_curr, psi_next);
    let Some(ups) = upsilon else {
        return;
    };
    let n = grid.n;
    let h = grid.h;
    let dt2 = dt * dt;
    let (lo, hi) = strip_columns(grid, &ups.strip, t_n);
    for i1 in lo..hi {
        let x1 = grid.coord(i1);
        let v = t_n - x1;
        let upsv = ups.value(v);
        let upsd = ups.derivative(v);
        if upsv == 0.0 && upsd == 0.0 {
            continue;
        }
        let c0 = -(v * upsd + 2.0 * upsv);
        for i2 in 1..n - 1 {
            let at = i2 * n + i1;
            let d1_phi = (phi_curr[at + 1] - phi_curr[at - 1]) / (2.0 * h);
            let d1_psi = (psi_curr[at + 1] - psi_curr[at - 1]) / (2.0 * h);
            // predictor pass: backward time differences
            let w_b = (phi_curr[at] - phi_prev[at]) / dt + d1_phi;
            let st_b = (psi_curr[at] - psi_prev[at]) / dt + d1_psi;
            let n_pred = c0 * w_b * w_b + 2.0 * upsv * w_b * st_b;
            let pred = psi_next[at] + dt2 * n_pred;
            // corrector: centered differences through the predicted levels
            // (φ_next already carries its own corrected nonlinearity)
            let w_c = (phi_next[at] - phi_prev[at]) / (2.0 * dt) + d1_phi;
            let st_c = (pred - psi_prev[at]) / (2.0 * dt) + d1_psi;
            let n_corr = c0 * w_c * w_c + 2.0 * upsv * w_c * st_c;
            psi_next[at] += dt2 * n_corr;
        }
    }
}

/// Centered discrete flat energy
/// `½ Σ [((φ^{n+1} − φ^{n−1})/(2Δt))² + |∇_h φ^n|²] h^d`
/// over the interior nodes.
pub fn flat_energy(grid: &SpatialGrid, dt: f64, prev: &[f64], curr: &[f64], next: &[f64]) -> f64 {
    let n = grid.n;
    let h = grid.h;
    let mut sum = 0.0;
    match grid.dim {
        2 => {
            for i2 in 1..n - 1 {
                let row = i2 * n;
                for i1 in 1..n - 1 {
                    let at = row + i1;
                    let vt = (next[at] - prev[at]) / (2.0 * dt);
                    let g1 = (curr[at + 1] - curr[at - 1]) / (2.0 * h);
                    let g2 = (curr[at + n] - curr[at - n]) / (2.0 * h);
                    sum += vt * vt + g1 * g1 + g2 * g2;
                }
            }
        }
        3 => {
            let nn = n * n;
            for i3 in 1..n - 1 {
                for i2 in 1..n - 1 {
                    let row = (i3 * n + i2) * n;
                    for i1 in 1..n - 1 {
                        let at = row + i1;
                        let vt = (next[at] - prev[at]) / (2.0 * dt);
                        let g1 = (curr[at + 1] - curr[at - 1]) / (2.0 * h);
                        let g2 = (curr[at + n] - curr[at - n]) / (2.0 * h);
                        let g3 = (curr[at + nn] - curr[at - nn]) / (2.0 * h);
                        sum += vt * vt + g1 * g1 + g2 * g2 + g3 * g3;
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    0.5 * sum * h.powi(grid.dim as i32)
}

/// Largest |φ| on the two outermost rings: the domain-of-dependence
/// invariant keeps this at exactly zero until `t_end`.
pub fn boundary_max_abs(grid: &SpatialGrid, level: &[f64]) -> f64 {
    let n = grid.n;
    let mut m = 0.0f64;
    let mut consider = |flat: usize| {
        m = m.max(level[flat].abs());
    };
    match grid.dim {
        2 => {
            for ring in 0..2usize {
                let a = ring;
                let b = n - 1 - ring;
                for i in 0..n {
                    consider(a * n + i);
                    consider(b * n + i);
                    consider(i * n + a);
                    consider(i * n + b);
                }
            }
        }
        3 => {
            for i3 in 0..n {
                for i2 in 0..n {
                    for i1 in 0..n {
                        let edge = [i1, i2, i3].iter().any(|&i| i < 2 || i >= n - 2);
                        if edge {
                            consider((i3 * n + i2) * n + i1);
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = SpatialGrid::with_half_width(2, 3.0, 0.5);
        assert_eq!(g.n, 13);
        assert_eq!(g.half_width(), 3.0);
        assert_eq!(g.coord(0), -3.0);
        assert_eq!(g.coord(12), 3.0);
        assert_eq!(g.nearest_index(0.24), 6);
    }

    #[test]
    fn upsilon_support_and_peak() {
        let u = Upsilon::new(StripSpec::new(1.0, 3.0).unwrap(), 2.0);
        assert_eq!(u.value(0.99), 0.0);
        assert_eq!(u.value(3.01), 0.0);
        assert_eq!(u.value(2.0), 2.0);
        assert_eq!(u.derivative(2.0), 0.0);
        // finite difference check of the derivative
        let h = 1e-6;
        let fd = (u.value(1.7 + h) - u.value(1.7 - h)) / (2.0 * h);
        assert!((u.derivative(1.7) - fd).abs() < 1e-6, "{} vs {fd}", u.derivative(1.7));
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = SpatialGrid::with_half_width(2, 2.0, 0.25);
        let ups = Upsilon::new(StripSpec::new(1.0, 3.0).unwrap(), 1.0);
        let prev = vec![0.0; g.num_nodes()];
        let curr = vec![0.0; g.num_nodes()];
        let mut next = vec![0.0; g.num_nodes()];
        step_phi(&g, Some(&ups), 2.0, 0.1, &prev, &curr, &mut next);
        assert!(next.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_step_matches_reference_stencil() {
        // plain loop reference on a random-ish field
        let g = SpatialGrid::with_half_width(2, 1.0, 0.25);
        let n = g.n;
        let f = |i: usize| ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5;
        let prev: Vec<f64> = (0..g.num_nodes()).map(f).collect();
        let curr: Vec<f64> = (0..g.num_nodes()).map(|i| f(i + 13)).collect();
        let mut next = vec![0.0; g.num_nodes()];
        let dt = 0.1;
        step_phi(&g, None, 2.0, dt, &prev, &curr, &mut next);
        let lam = (dt / g.h) * (dt / g.h);
        for i2 in 1..n - 1 {
            for i1 in 1..n - 1 {
                let at = i2 * n + i1;
                let lap =
                    curr[at - 1] + curr[at + 1] + curr[at - n] + curr[at + n] - 4.0 * curr[at];
                let expect = 2.0 * curr[at] - prev[at] + lam * lap;
                assert!((next[at] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn periodic_plane_wave_dispersion() {
        // A discrete eigenmode cos(k·x) evolves with the exact discrete
        // frequency sin²(ωΔt/2) = λ Σ sin²(k_i h/2); against the continuum
        // ω = |k| the phase error must shrink at second order in h.
        let errs: Vec<f64> = [16usize, 32]
            .iter()
            .map(|&cells| {
                let h = 2.0 / cells as f64;
                let g = SpatialGrid { dim: 2, n: cells + 1, h };
                let dt = 0.25 * h;
                let k = std::f64::consts::PI; // one full period across [−1, 1]
                let mode = |x: f64, y: f64, t: f64, om: f64| (k * x).cos() * (k * y).cos() * (om * t).cos();
                let omega = (2.0f64).sqrt() * k;
                let coord = |i: usize| -1.0 + i as f64 * h;
                let mut prev: Vec<f64> = (0..g.num_nodes())
                    .map(|fl| mode(coord(fl % g.n), coord(fl / g.n), 0.0, omega))
                    .collect();
                // discrete-in-time second level from the exact discrete omega
                let sin2: f64 = (dt / h) * (dt / h) * (2.0 * (k * h / 2.0).sin().powi(2) * 2.0);
                let om_disc = 2.0 / dt * ((sin2 / 2.0f64).sqrt().asin());
                let mut curr: Vec<f64> = (0..g.num_nodes())
                    .map(|fl| mode(coord(fl % g.n), coord(fl / g.n), dt, om_disc))
                    .collect();
                let mut next = vec![0.0; g.num_nodes()];
                let steps = (1.0 / dt).round() as usize;
                for _ in 1..steps {
                    step_linear_periodic(&g, dt, &prev, &curr, &mut next);
                    std::mem::swap(&mut prev, &mut curr);
                    std::mem::swap(&mut curr, &mut next);
                }
                let t_final = steps as f64 * dt;
                // compare the phase against the continuum frequency
                let exact = mode(coord(0), coord(0), t_final, omega);
                (curr[0] - exact).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "dispersion convergence order {order}, errs {errs:?}");
    }
}
