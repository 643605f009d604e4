//! Hyperboloidal slice extraction from Cauchy evolutions.
//!
//! A slice node x on `Σ_τ` is read off at `t* = w_τ(x) = √(τ² + |x|²)` by
//! 4-point cubic interpolation in time; spatial derivatives use the grid
//! stencils around the node. The boost fields are assembled from the
//! spacetime form `L^i = x^i ∂_t + t ∂_{x^i}`.
//!
//! Two consumers share this machinery:
//! * [`extract_slice`] materializes the fields on an arbitrary slice grid
//!   from a full level history (cubic in time and in each spatial axis);
//! * [`SliceStream`] accumulates the energy sums on the fly from the short
//!   level ring, firing each node exactly when its stencil is complete, so
//!   long evolutions never retain more than six levels.

use crate::fields::{BoostIndex, ScalarField};
use crate::geometry::SliceGrid;
use crate::MAX_DIM;

use super::hierarchy::{row_from_sums, sums_len, EnergyTrace, TraceRow};
use super::stepper::SpatialGrid;
use super::{LevelRing, Observer, SimulatorError};

/// Full level retention: every time level from t0 onward.
#[derive(Debug, Clone)]
pub struct FullHistory {
    pub grid: SpatialGrid,
    pub t0: f64,
    pub dt: f64,
    pub levels: Vec<Vec<f64>>,
}

impl FullHistory {
    pub fn time(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt
    }

    pub fn last(&self) -> usize {
        self.levels.len() - 1
    }

    /// Build a history by sampling an analytic spacetime function; used by
    /// the interpolation validation seeds.
    pub fn from_function(
        grid: SpatialGrid,
        t0: f64,
        dt: f64,
        steps: usize,
        f: impl Fn(f64, &[f64]) -> f64,
    ) -> FullHistory {
        let n = grid.n;
        let mut levels = Vec::with_capacity(steps + 1);
        for m in 0..=steps {
            let t = t0 + m as f64 * dt;
            let mut level = vec![0.0; grid.num_nodes()];
            let mut x = vec![0.0; grid.dim];
            for (flat, slot) in level.iter_mut().enumerate() {
                let mut rem = flat;
                for ax in 0..grid.dim {
                    x[ax] = grid.coord(rem % n);
                    rem /= n;
                }
                *slot = f(t, &x);
            }
            levels.push(level);
        }
        FullHistory { grid, t0, dt, levels }
    }
}

/// ψ = L¹φ reconstructed on one time level by centered differences:
/// `ψ^m = x¹ (φ^{m+1} − φ^{m−1})/(2Δt) + t_m D₁ φ^m`.
pub fn derive_psi(history: &FullHistory, m: usize) -> Result<Vec<f64>, SimulatorError> {
    if m == 0 || m + 1 > history.last() {
        return Err(SimulatorError::HistoryGap(format!(
            "derive_psi needs levels {}..={} in 1..{}",
            m - 1,
            m + 1,
            history.last()
        )));
    }
    let grid = &history.grid;
    let n = grid.n;
    let t_m = history.time(m);
    let prev = &history.levels[m - 1];
    let curr = &history.levels[m];
    let next = &history.levels[m + 1];
    let mut psi = vec![0.0; grid.num_nodes()];
    let inv2dt = 1.0 / (2.0 * history.dt);
    let inv2h = 1.0 / (2.0 * grid.h);
    for (flat, slot) in psi.iter_mut().enumerate() {
        let i1 = flat % n;
        if i1 == 0 || i1 == n - 1 {
            continue;
        }
        let x1 = grid.coord(i1);
        let dt_phi = (next[flat] - prev[flat]) * inv2dt;
        let d1_phi = (curr[flat + 1] - curr[flat - 1]) * inv2h;
        *slot = x1 * dt_phi + t_m * d1_phi;
    }
    Ok(psi)
}

/// Cubic Lagrange basis on nodes {0, 1, 2, 3}: values, first and second
/// derivatives at ξ.
fn cubic_basis(xi: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let mut v = [0.0; 4];
    let mut dv = [0.0; 4];
    let mut ddv = [0.0; 4];
    for j in 0..4 {
        let mut roots = [0.0; 3];
        let mut denom = 1.0;
        let mut idx = 0;
        for m in 0..4 {
            if m != j {
                roots[idx] = m as f64;
                idx += 1;
                denom *= j as f64 - m as f64;
            }
        }
        let (a, b, c) = (roots[0], roots[1], roots[2]);
        v[j] = (xi - a) * (xi - b) * (xi - c) / denom;
        dv[j] = ((xi - b) * (xi - c) + (xi - a) * (xi - c) + (xi - a) * (xi - b)) / denom;
        ddv[j] = 2.0 * ((xi - a) + (xi - b) + (xi - c)) / denom;
    }
    (v, dv, ddv)
}

/// Time-interpolated point values at one spatial index: value, ∂_t, ∂_tt.
#[derive(Debug, Clone, Copy, Default)]
struct TimeColumn {
    v: f64,
    t: f64,
    tt: f64,
}

/// Spacetime derivative bundle of one field at a slice point.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PointDerivs {
    pub v: f64,
    pub t: f64,
    pub tt: f64,
    pub sp: [f64; MAX_DIM],
    pub sp_t: [f64; MAX_DIM],
    pub sp2: [[f64; MAX_DIM]; MAX_DIM],
}

impl PointDerivs {
    /// `L^i u = x^i u_t + t u_i`.
    pub fn boost1(&self, i: usize, x: &[f64], t: f64) -> f64 {
        x[i] * self.t + t * self.sp[i]
    }

    /// `L^j L^i u = x^j (x^i u_tt + u_i + t u_it) + t (δ_ij u_t + x^i u_tj + t u_ij)`.
    pub fn boost2(&self, i: usize, j: usize, x: &[f64], t: f64) -> f64 {
        let delta = if i == j { 1.0 } else { 0.0 };
        x[j] * (x[i] * self.tt + self.sp[i] + t * self.sp_t[i])
            + t * (delta * self.t + x[i] * self.sp_t[j] + t * self.sp2[i][j])
    }

    /// `L^i (u_t) = x^i u_tt + t u_ti`.
    pub fn boost1_of_ut(&self, i: usize, x: &[f64], t: f64) -> f64 {
        x[i] * self.tt + t * self.sp_t[i]
    }
}

/// Grid-aligned derivative bundle via time interpolation and centered
/// spatial differences. `read(level, flat)` supplies raw level values.
fn point_derivs_aligned(
    grid: &SpatialGrid,
    flat: usize,
    basis: &([f64; 4], [f64; 4], [f64; 4]),
    dt: f64,
    read: &mut dyn FnMut(usize, usize) -> f64,
    // the four level indices of the stencil
    lv: [usize; 4],
) -> PointDerivs {
    let n = grid.n;
    let h = grid.h;
    let dim = grid.dim;
    let col = |read: &mut dyn FnMut(usize, usize) -> f64, fl: usize| -> TimeColumn {
        let mut v = 0.0;
        let mut d = 0.0;
        let mut dd = 0.0;
        for a in 0..4 {
            let y = read(lv[a], fl);
            v += basis.0[a] * y;
            d += basis.1[a] * y;
            dd += basis.2[a] * y;
        }
        TimeColumn { v, t: d / dt, tt: dd / (dt * dt) }
    };
    let stride = |ax: usize| n.pow(ax as u32);
    let center = col(read, flat);
    let mut out = PointDerivs {
        v: center.v,
        t: center.t,
        tt: center.tt,
        ..Default::default()
    };
    let mut plus = [TimeColumn::default(); MAX_DIM];
    let mut minus = [TimeColumn::default(); MAX_DIM];
    for ax in 0..dim {
        let s = stride(ax);
        plus[ax] = col(read, flat + s);
        minus[ax] = col(read, flat - s);
        out.sp[ax] = (plus[ax].v - minus[ax].v) / (2.0 * h);
        out.sp_t[ax] = (plus[ax].t - minus[ax].t) / (2.0 * h);
        out.sp2[ax][ax] = (plus[ax].v - 2.0 * center.v + minus[ax].v) / (h * h);
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let si = stride(i);
            let sj = stride(j);
            let pp = col(read, flat + si + sj).v;
            let pm = col(read, flat + si - sj).v;
            let mp = col(read, flat - si + sj).v;
            let mm = col(read, flat - si - sj).v;
            let mixed = (pp - pm - mp + mm) / (4.0 * h * h);
            out.sp2[i][j] = mixed;
            out.sp2[j][i] = mixed;
        }
    }
    out
}

/// Extracted slice fields: φ, ∂_tφ and their boost derivatives up to order
/// K_sim + 1 = 2, together with the ψ = L¹φ route.
#[derive(Debug, Clone)]
pub struct SliceFields {
    pub tau: f64,
    pub grid: SliceGrid,
    pub phi: ScalarField,
    pub phi_t: ScalarField,
    /// Boost words of orders 1 and 2 applied to φ.
    pub phi_boosts: Vec<(BoostIndex, ScalarField)>,
    /// Order-1 boosts of ∂_tφ.
    pub phi_t_boosts: Vec<(BoostIndex, ScalarField)>,
    pub psi: ScalarField,
    pub psi_t: ScalarField,
    pub psi_boosts: Vec<(BoostIndex, ScalarField)>,
    pub psi_t_boosts: Vec<(BoostIndex, ScalarField)>,
}

/// Cubic axis stencil for a general (non-aligned) coordinate.
struct AxisStencil {
    base: usize,
    basis: ([f64; 4], [f64; 4], [f64; 4]),
}

fn axis_stencil(coord: f64, origin: f64, step: f64, count: usize) -> AxisStencil {
    let pos = (coord - origin) / step;
    let cell = pos.floor() as isize;
    let base = (cell - 1).clamp(0, count as isize - 4) as usize;
    let xi = pos - base as f64;
    AxisStencil { base, basis: cubic_basis(xi) }
}

/// Materialize the slice fields of one τ from a full history, cubic in time
/// and in each spatial axis. The slice grid may sit anywhere inside the
/// simulation box.
pub fn extract_slice(
    history: &FullHistory,
    tau: f64,
    slice_grid: &SliceGrid,
) -> Result<SliceFields, SimulatorError> {
    let sim = &history.grid;
    let dim = sim.dim;
    if slice_grid.dim() != dim {
        return Err(SimulatorError::InvalidConfig("slice grid dimension mismatch".into()));
    }
    if slice_grid.params.tau != tau {
        return Err(SimulatorError::InvalidConfig("slice grid τ mismatch".into()));
    }
    let t_max = (tau * tau + dim as f64 * slice_grid.extent * slice_grid.extent).sqrt();
    if tau < history.t0 || t_max > history.time(history.last()) {
        return Err(SimulatorError::HistoryGap(format!(
            "slice τ = {tau} needs t ∈ [{tau}, {t_max:.3}], history covers [{}, {}]",
            history.t0,
            history.time(history.last())
        )));
    }
    if slice_grid.extent + 2.0 * sim.h > sim.half_width() {
        return Err(SimulatorError::HistoryGap(
            "slice grid leaves the simulation box stencil range".into(),
        ));
    }
    if history.last() < 5 {
        return Err(SimulatorError::HistoryGap("history too short for ψ stencils".into()));
    }
    // ψ levels for the full needed time range
    let k_hi = (((t_max - history.t0) / history.dt).floor() as usize + 3).min(history.last() - 1);
    let psi_levels: Vec<Vec<f64>> =
        (1..=k_hi).map(|m| derive_psi(history, m)).collect::<Result<_, _>>()?;
    let psi_t0 = history.time(1);

    let n_nodes = slice_grid.num_nodes();
    let mut phi_v = vec![0.0; n_nodes];
    let mut phi_t_v = vec![0.0; n_nodes];
    let mut psi_v = vec![0.0; n_nodes];
    let mut psi_t_v = vec![0.0; n_nodes];
    let order1: Vec<BoostIndex> = (0..dim).map(|i| BoostIndex::from_axes(&[i])).collect();
    let order2: Vec<BoostIndex> = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| BoostIndex::from_axes(&[i, j])))
        .collect();
    let mut phi_b1 = vec![vec![0.0; n_nodes]; dim];
    let mut phi_b2 = vec![vec![0.0; n_nodes]; dim * dim];
    let mut phi_tb = vec![vec![0.0; n_nodes]; dim];
    let mut psi_b1 = vec![vec![0.0; n_nodes]; dim];
    let mut psi_b2 = vec![vec![0.0; n_nodes]; dim * dim];
    let mut psi_tb = vec![vec![0.0; n_nodes]; dim];

    let mut x = [0.0; MAX_DIM];
    for flat in 0..n_nodes {
        slice_grid.node(flat, &mut x);
        let xs = &x[..dim];
        let r2: f64 = xs.iter().map(|v| v * v).sum();
        let t_star = (tau * tau + r2).sqrt();
        // tensor stencils: time axis for φ and for ψ, plus the spatial axes
        let st_phi = axis_stencil(t_star, history.t0, history.dt, history.levels.len());
        let st_psi = axis_stencil(t_star, psi_t0, history.dt, psi_levels.len());
        let sp: Vec<AxisStencil> = (0..dim)
            .map(|ax| axis_stencil(xs[ax], -sim.half_width(), sim.h, sim.n))
            .collect();
        let bundle = |levels: &[Vec<f64>], st_t: &AxisStencil| -> PointDerivs {
            // contract time first at each spatial stencil point, then the
            // spatial axes with value/derivative weights
            let mut out = PointDerivs::default();
            // spatial tensor loop (4^d points)
            let mut idx = vec![0usize; dim];
            loop {
                let mut flat_sim = 0usize;
                let mut wv = 1.0;
                let mut wd = [0.0; MAX_DIM];
                let mut wdd = [0.0; MAX_DIM];
                let mut wmixed = [[0.0; MAX_DIM]; MAX_DIM];
                // per-axis weight products: value everywhere, one derivative
                // factor for first/second partials
                for ax in 0..dim {
                    flat_sim = flat_sim + (sp[ax].base + idx[ax]) * sim.n.pow(ax as u32);
                }
                for ax in 0..dim {
                    wv *= sp[ax].basis.0[idx[ax]];
                }
                for ax in 0..dim {
                    let mut prod_d = 1.0;
                    let mut prod_dd = 1.0;
                    for bx in 0..dim {
                        if bx == ax {
                            prod_d *= sp[bx].basis.1[idx[bx]];
                            prod_dd *= sp[bx].basis.2[idx[bx]];
                        } else {
                            prod_d *= sp[bx].basis.0[idx[bx]];
                            prod_dd *= sp[bx].basis.0[idx[bx]];
                        }
                    }
                    wd[ax] = prod_d;
                    wdd[ax] = prod_dd;
                }
                for i in 0..dim {
                    for j in i + 1..dim {
                        let mut prod = 1.0;
                        for bx in 0..dim {
                            if bx == i || bx == j {
                                prod *= sp[bx].basis.1[idx[bx]];
                            } else {
                                prod *= sp[bx].basis.0[idx[bx]];
                            }
                        }
                        wmixed[i][j] = prod;
                    }
                }
                // time contraction at this spatial point
                let mut tv = 0.0;
                let mut td = 0.0;
                let mut tdd = 0.0;
                for a in 0..4 {
                    let y = levels[st_t.base + a][flat_sim];
                    tv += st_t.basis.0[a] * y;
                    td += st_t.basis.1[a] * y;
                    tdd += st_t.basis.2[a] * y;
                }
                let td = td / history.dt;
                let tdd = tdd / (history.dt * history.dt);
                out.v += wv * tv;
                out.t += wv * td;
                out.tt += wv * tdd;
                for ax in 0..dim {
                    out.sp[ax] += wd[ax] / sim.h * tv;
                    out.sp_t[ax] += wd[ax] / sim.h * td;
                    out.sp2[ax][ax] += wdd[ax] / (sim.h * sim.h) * tv;
                }
                for i in 0..dim {
                    for j in i + 1..dim {
                        let m = wmixed[i][j] / (sim.h * sim.h) * tv;
                        out.sp2[i][j] += m;
                        out.sp2[j][i] += m;
                    }
                }
                // advance the tensor index
                let mut ax = 0;
                loop {
                    idx[ax] += 1;
                    if idx[ax] < 4 {
                        break;
                    }
                    idx[ax] = 0;
                    ax += 1;
                    if ax == dim {
                        return out;
                    }
                }
            }
        };
        let dphi = bundle(&history.levels, &st_phi);
        let dpsi = bundle(&psi_levels, &st_psi);
        phi_v[flat] = dphi.v;
        phi_t_v[flat] = dphi.t;
        psi_v[flat] = dpsi.v;
        psi_t_v[flat] = dpsi.t;
        for i in 0..dim {
            phi_b1[i][flat] = dphi.boost1(i, xs, t_star);
            phi_tb[i][flat] = dphi.boost1_of_ut(i, xs, t_star);
            psi_b1[i][flat] = dpsi.boost1(i, xs, t_star);
            psi_tb[i][flat] = dpsi.boost1_of_ut(i, xs, t_star);
            for j in 0..dim {
                phi_b2[i * dim + j][flat] = dphi.boost2(i, j, xs, t_star);
                psi_b2[i * dim + j][flat] = dpsi.boost2(i, j, xs, t_star);
            }
        }
    }

    let mk = |values: Vec<f64>| ScalarField {
        grid: slice_grid.clone(),
        values,
        source: None,
    };
    let pack = |b1: Vec<Vec<f64>>, b2: Vec<Vec<f64>>| -> Vec<(BoostIndex, ScalarField)> {
        let mut out = Vec::new();
        for (w, v) in order1.iter().zip(b1) {
            out.push((w.clone(), mk(v)));
        }
        for (w, v) in order2.iter().zip(b2) {
            out.push((w.clone(), mk(v)));
        }
        out
    };
    Ok(SliceFields {
        tau,
        grid: slice_grid.clone(),
        phi: mk(phi_v),
        phi_t: mk(phi_t_v),
        phi_boosts: pack(phi_b1, phi_b2),
        phi_t_boosts: order1.iter().cloned().zip(phi_tb.into_iter().map(&mk)).collect(),
        psi: mk(psi_v),
        psi_t: mk(psi_t_v),
        psi_boosts: pack(psi_b1, psi_b2),
        psi_t_boosts: order1.iter().cloned().zip(psi_tb.into_iter().map(&mk)).collect(),
    })
}

/// One slice node awaiting its stencil window.
struct SliceNode {
    t_star: f64,
    flat: u32,
}

struct SliceJob {
    tau: f64,
    stride: usize,
    nodes: Vec<SliceNode>,
    cursor: usize,
    sums: Vec<f64>,
}

/// Streaming slice-energy accumulator; an [`Observer`] for the evolution
/// driver.
pub struct SliceStream {
    dim: usize,
    /// Final level index of the planned run; stencil windows clamp to it.
    last_level: usize,
    jobs: Vec<SliceJob>,
}

/// Conservative domain demanded by a τ ladder: the slice of `τ_max` meets
/// the support boundary at radius `(τ_max² − 1)/2`, which pins both the
/// final time and (through the domain of dependence) the box half-width.
pub fn required_domain(tau_max: f64, h: f64, dt: f64) -> (f64, f64) {
    let r_sup = (tau_max * tau_max - 1.0) / 2.0 + 6.0 * h;
    let t_end = (tau_max * tau_max + r_sup * r_sup).sqrt() + 10.0 * dt;
    // one unit of standoff beyond the domain of dependence keeps the
    // boundary rings at evanescent-leakage level
    let half_width = t_end - super::DATA_TIME + 2.0;
    (half_width, t_end)
}

impl SliceStream {
    /// Plan the node sets of a τ ladder on a given grid. `node_budget` caps
    /// the per-slice node count by coarsening the sampling stride.
    pub fn plan(
        grid: &SpatialGrid,
        dt: f64,
        t_end: f64,
        taus: &[f64],
        node_budget: usize,
    ) -> Result<SliceStream, SimulatorError> {
        let dim = grid.dim;
        let mut jobs = Vec::new();
        for &tau in taus {
            if tau < super::DATA_TIME {
                return Err(SimulatorError::InvalidConfig(format!(
                    "slice τ = {tau} precedes the data time"
                )));
            }
            // support radius on the slice, capped by the box and by the
            // available time range
            let mut r_cut = (tau * tau - 1.0) / 2.0 + 4.0 * grid.h;
            r_cut = r_cut.min(grid.half_width() - 3.0 * grid.h);
            let t_cap = t_end - 6.0 * dt;
            if t_cap <= tau {
                return Err(SimulatorError::HistoryGap(format!(
                    "t_end = {t_end} cannot cover slice τ = {tau}"
                )));
            }
            r_cut = r_cut.min((t_cap * t_cap - tau * tau).sqrt());
            // stride so the node count stays within budget
            let est = |s: usize| -> f64 {
                let hs = s as f64 * grid.h;
                match dim {
                    2 => std::f64::consts::PI * r_cut * r_cut / (hs * hs),
                    _ => 4.19 * r_cut.powi(3) / hs.powi(3),
                }
            };
            let mut stride = 1usize;
            while est(stride) > node_budget as f64 {
                stride += 1;
            }
            let ic = (grid.n - 1) / 2;
            let mut nodes = Vec::new();
            let offsets: Vec<isize> = {
                let reach = (r_cut / (stride as f64 * grid.h)).floor() as isize;
                (-reach..=reach).map(|m| m * stride as isize).collect()
            };
            let r2_cut = r_cut * r_cut;
            match dim {
                2 => {
                    for &o2 in &offsets {
                        let x2 = o2 as f64 * grid.h;
                        for &o1 in &offsets {
                            let x1 = o1 as f64 * grid.h;
                            let r2 = x1 * x1 + x2 * x2;
                            if r2 <= r2_cut {
                                let i1 = (ic as isize + o1) as usize;
                                let i2 = (ic as isize + o2) as usize;
                                nodes.push(SliceNode {
                                    t_star: (tau * tau + r2).sqrt(),
                                    flat: (i2 * grid.n + i1) as u32,
                                });
                            }
                        }
                    }
                }
                3 => {
                    for &o3 in &offsets {
                        let x3 = o3 as f64 * grid.h;
                        for &o2 in &offsets {
                            let x2 = o2 as f64 * grid.h;
                            for &o1 in &offsets {
                                let x1 = o1 as f64 * grid.h;
                                let r2 = x1 * x1 + x2 * x2 + x3 * x3;
                                if r2 <= r2_cut {
                                    let i1 = (ic as isize + o1) as usize;
                                    let i2 = (ic as isize + o2) as usize;
                                    let i3 = (ic as isize + o3) as usize;
                                    nodes.push(SliceNode {
                                        t_star: (tau * tau + r2).sqrt(),
                                        flat: ((i3 * grid.n + i2) * grid.n + i1) as u32,
                                    });
                                }
                            }
                        }
                    }
                }
                d => {
                    return Err(SimulatorError::InvalidConfig(format!(
                        "slice streaming supports d = 2, 3; got {d}"
                    )))
                }
            }
            nodes.sort_by(|a, b| a.t_star.total_cmp(&b.t_star));
            jobs.push(SliceJob {
                tau,
                stride,
                nodes,
                cursor: 0,
                sums: vec![0.0; 2 * sums_len(dim)],
            });
        }
        jobs.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        let last_level = ((t_end - super::DATA_TIME) / dt).ceil() as usize;
        if last_level < 5 {
            return Err(SimulatorError::InvalidConfig(
                "run too short for slice stencils (needs ≥ 5 steps)".into(),
            ));
        }
        Ok(SliceStream { dim, last_level, jobs })
    }

    /// The energy trace accumulated so far (complete after the run).
    pub fn trace(&self) -> EnergyTrace {
        let rows: Vec<TraceRow> = self
            .jobs
            .iter()
            .map(|job| {
                let half = job.sums.len() / 2;
                row_from_sums(self.dim, job.tau, &job.sums[..half], &job.sums[half..])
            })
            .collect();
        EnergyTrace { dim: self.dim, rows }
    }

    pub fn nodes_planned(&self) -> usize {
        self.jobs.iter().map(|j| j.nodes.len()).sum()
    }

    fn fire_ready(&mut self, ring: &LevelRing) -> Result<(), SimulatorError> {
        let latest = ring.latest;
        let dim = self.dim;
        let last_level = self.last_level;
        for job in &mut self.jobs {
            let quad = (job.stride as f64 * ring.grid.h).powi(dim as i32);
            while job.cursor < job.nodes.len() {
                let node = &job.nodes[job.cursor];
                let k = ((node.t_star - ring.t0) / ring.dt).floor() as usize;
                let lo_phi = k.saturating_sub(1).min(last_level - 3);
                let lo_psi = k.saturating_sub(1).clamp(1, last_level - 4);
                let fire_at = (lo_phi + 3).max(lo_psi + 4);
                if fire_at > latest {
                    break;
                }
                fire_node(ring, dim, job.tau, node, lo_phi, lo_psi, quad, &mut job.sums)?;
                job.cursor += 1;
            }
        }
        Ok(())
    }
}

impl Observer for SliceStream {
    fn on_level(&mut self, ring: &LevelRing) -> Result<(), SimulatorError> {
        self.fire_ready(ring)
    }

    fn finish(&mut self, ring: &LevelRing) -> Result<(), SimulatorError> {
        self.fire_ready(ring)?;
        let unfired: usize = self.jobs.iter().map(|j| j.nodes.len() - j.cursor).sum();
        if unfired > 0 {
            return Err(SimulatorError::HistoryGap(format!(
                "{unfired} slice nodes never saw a complete stencil                  (run ended at level {}, planned {})",
                ring.latest, self.last_level
            )));
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn fire_node(
    ring: &LevelRing,
    dim: usize,
    tau: f64,
    node: &SliceNode,
    lo_phi: usize,
    lo_psi: usize,
    quad: f64,
    sums: &mut [f64],
) -> Result<(), SimulatorError> {
    let grid = &ring.grid;
    let n = grid.n;
    let flat = node.flat as usize;
    let mut x = [0.0; MAX_DIM];
    {
        let mut rem = flat;
        for slot in x.iter_mut().take(dim) {
            *slot = grid.coord(rem % n);
            rem /= n;
        }
    }
    let xs = &x[..dim];
    let t_star = node.t_star;
    let xi_phi = (t_star - ring.time_of(lo_phi)) / ring.dt;
    let xi_psi = (t_star - ring.time_of(lo_psi)) / ring.dt;
    let basis_phi = cubic_basis(xi_phi);
    let basis_psi = cubic_basis(xi_psi);
    let lv_phi = [lo_phi, lo_phi + 1, lo_phi + 2, lo_phi + 3];
    let lv_psi = [lo_psi, lo_psi + 1, lo_psi + 2, lo_psi + 3];

    let mut read_phi = |m: usize, fl: usize| ring.level(m)[fl];
    let dphi = point_derivs_aligned(grid, flat, &basis_phi, ring.dt, &mut read_phi, lv_phi);
    // ψ values reconstructed on demand from the φ ring
    let inv2dt = 1.0 / (2.0 * ring.dt);
    let inv2h = 1.0 / (2.0 * grid.h);
    let mut read_psi = |m: usize, fl: usize| -> f64 {
        let x1 = grid.coord(fl % n);
        let t_m = ring.time_of(m);
        (ring.level(m + 1)[fl] - ring.level(m - 1)[fl]) * inv2dt * x1
            + t_m * (ring.level(m)[fl + 1] - ring.level(m)[fl - 1]) * inv2h
    };
    let dpsi = point_derivs_aligned(grid, flat, &basis_psi, ring.dt, &mut read_psi, lv_psi);

    // accumulate Σ w^{−1} |·|² dvol with w = t* on the slice
    let w = t_star;
    let meas = (tau / w) / w * quad;
    let half = sums.len() / 2;
    accumulate_point(dim, xs, t_star, &dphi, meas, &mut sums[..half]);
    accumulate_point(dim, xs, t_star, &dpsi, meas, &mut sums[half..]);
    Ok(())
}

/// Sum layout per field: [u, L_i u (d), L_j L_i u (d²), u_t, L_i u_t (d)].
fn accumulate_point(
    dim: usize,
    xs: &[f64],
    t_star: f64,
    d: &PointDerivs,
    meas: f64,
    sums: &mut [f64],
) {
    let mut idx = 0;
    let push = |sums: &mut [f64], idx: &mut usize, v: f64| {
        sums[*idx] += v * v * meas;
        *idx += 1;
    };
    push(sums, &mut idx, d.v);
    for i in 0..dim {
        push(sums, &mut idx, d.boost1(i, xs, t_star));
    }
    for i in 0..dim {
        for j in 0..dim {
            push(sums, &mut idx, d.boost2(i, j, xs, t_star));
        }
    }
    push(sums, &mut idx, d.t);
    for i in 0..dim {
        push(sums, &mut idx, d.boost1_of_ut(i, xs, t_star));
    }
}
