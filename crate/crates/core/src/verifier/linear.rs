//! Linear-estimate variants for the wave and Klein-Gordon propositions.
//!
//! Every Klein-Gordon variant is generated from the (σ, μ, ν) enumeration:
//! the left-hand weight comes from the exponents module, the right-hand side
//! is assembled by chaining the borderline (or endpoint) interpolation with
//! per-factor energy bounds. The τ-powers fall out of the chain; tests check
//! them against the published tables. Wave variants are the same chains with
//! the wave energies substituted.
//!
//! Each estimate is evaluated as a pure norm statement about an independent
//! function triple (u, u_t, u_tt): the energies only use the norm structure,
//! so any designation of analytic families is admissible.

use crate::exponents::{
    rat_int, solve_theta, solve_weight_system, Endpoint, InterpolationSystem, Rational,
    WeightStyle, WeightSystem,
};
use crate::fields::{compile_word, CompiledWord, MultiIndexSet, PartialTable, TestFamily};
use crate::geometry::{weight, SliceGrid};
use crate::norms::{accumulate_chunks, words_of_order, EnergyFlavor};
use crate::MAX_DIM;

use num_traits::ToPrimitive;

/// Which function of the triple a norm refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Designation {
    U,
    Ut,
}

/// Reference to one slice energy `𝔈_m[u]` or `𝔈_m[u_t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRef {
    pub of: Designation,
    pub order: usize,
}

/// One right-hand factor `energy^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    pub energy: EnergyRef,
    pub exponent: f64,
}

/// One left-hand term `τ^{tau_shift} ‖field‖_{𝒲̊^{order,r}_weight}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhsTerm {
    pub field: Designation,
    pub order: usize,
    pub tau_shift: f64,
}

/// One displayed estimate `τ^{tau_pow} Σ lhs_terms ≲ Π factors`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimate {
    pub label: String,
    pub lhs_terms: Vec<LhsTerm>,
    pub lhs_weight: f64,
    pub tau_pow: f64,
    pub r: f64,
    pub flavor: EnergyFlavor,
    pub factors: Vec<Factor>,
}

impl LinearEstimate {
    /// Highest energy order on the right.
    pub fn max_energy_order(&self) -> usize {
        self.factors.iter().map(|f| f.energy.order).max().unwrap_or(0)
    }
}

fn ratf(x: &Rational) -> f64 {
    x.to_f64().expect("rational out of f64 range")
}

/// Bound of `‖L^α v‖_{ℒ²_weight}` (word order `o`) by one energy:
/// returns the τ-power and the energy reference.
fn l2_bound(weight_sign: i32, desig: Designation, o: usize) -> (f64, EnergyRef) {
    match (desig, weight_sign) {
        // mass term ‖u‖_{𝒲^{m,2}_1} needs m = o
        (Designation::U, 1) => (0.5, EnergyRef { of: Designation::U, order: o }),
        // ‖u‖_{𝒲^{m+1,2}_{−1}} covers order o with m = o−1
        (Designation::U, -1) => (0.5, EnergyRef { of: Designation::U, order: o.saturating_sub(1) }),
        (Designation::Ut, 1) => (0.5, EnergyRef { of: Designation::Ut, order: o }),
        // the u_t part of 𝔈_m[u] carries τ^{1/2}, so the bound costs τ^{−1/2}
        (Designation::Ut, -1) => (-0.5, EnergyRef { of: Designation::U, order: o }),
        _ => unreachable!("weight sign must be ±1"),
    }
}

/// Bound of `‖L^α v‖_{𝒲^{1,2}_ν}` (word order `o`, so derivative orders
/// `o..o+1`) by one energy.
fn sobolev12_bound(nu: i32, desig: Designation, o: usize) -> (f64, EnergyRef) {
    match (desig, nu) {
        (Designation::U, -1) => (0.5, EnergyRef { of: Designation::U, order: o }),
        (Designation::U, 1) => (0.5, EnergyRef { of: Designation::U, order: o + 1 }),
        (Designation::Ut, -1) => (-0.5, EnergyRef { of: Designation::U, order: o + 1 }),
        (Designation::Ut, 1) => (0.5, EnergyRef { of: Designation::Ut, order: o + 1 }),
        _ => unreachable!("weight sign must be ±1"),
    }
}

struct NonBorderlineData {
    tau_pow: f64,
    lhs_order: usize,
    lhs_weight: Rational,
    factors: Vec<Factor>,
}

/// One Klein-Gordon interpolation estimate for `r ∈ [2, p*]`, `d ≥ 3`.
fn nonborderline_data(
    d: u32,
    k: usize,
    r: &Rational,
    mu: i32,
    nu: i32,
    desig: Designation,
) -> NonBorderlineData {
    // The first factor is ‖L^α v‖_{ℒ²_μ}; matching it to an energy term
    // requires v = L^i u when (u, μ = −1), which bumps the LHS order.
    let bump = if desig == Designation::U && mu == -1 { 1 } else { 0 };
    let o = k + bump;
    let theta = ratf(
        &solve_theta(&InterpolationSystem {
            d,
            q: rat_int(2),
            r: r.clone(),
            endpoint: Endpoint::SobolevConjugate { p: rat_int(2) },
        })
        .expect("θ for the interpolation range"),
    );
    let sol = solve_weight_system(&WeightSystem {
        d,
        q: rat_int(2),
        r: r.clone(),
        sigma: 1,
        mu,
        nu,
        style: WeightStyle::KgNonBorderline,
    })
    .expect("non-borderline weight system");
    let (s1, e1) = l2_bound(mu, desig, o);
    let (s2, e2) = sobolev12_bound(nu, desig, o);
    let rf = ratf(r);
    let tau_pow = (0.5 - 1.0 / rf) - (theta * s1 + (1.0 - theta) * s2);
    NonBorderlineData {
        tau_pow,
        lhs_order: o,
        lhs_weight: sol.lhs_weight,
        factors: vec![
            Factor { energy: e1, exponent: theta },
            Factor { energy: e2, exponent: 1.0 - theta },
        ],
    }
}

struct BorderlineData {
    tau_pow: f64,
    lhs_order: usize,
    lhs_weight: Rational,
    factors: Vec<Factor>,
}

/// One Klein-Gordon borderline estimate for `r > p*` (`r > 2` when d = 2),
/// generated from (σ, μ, ν). Returns `None` when a factor would need an
/// energy order above `max_energy`.
fn borderline_data(
    d: u32,
    k: usize,
    r: &Rational,
    sigma: i32,
    mu: i32,
    nu: i32,
    desig: Designation,
    max_energy: usize,
) -> Option<BorderlineData> {
    let first_sign = if d == 2 { mu } else { sigma };
    let bump = if desig == Designation::U && first_sign == -1 { 1 } else { 0 };
    let o = k + bump;
    let (s1, e1) = l2_bound(first_sign, desig, o);
    // Second factor ‖L^α v‖_{𝒲^{1,d}_{ρ_pqd(μ,ν)}}: bound the order-(o+1)
    // piece through the endpoint interpolation at r = d (d ≥ 3), or directly
    // through the energy terms when d = 2.
    let (g2, combo): (f64, Vec<Factor>) = if d == 2 {
        let (s, e) = sobolev12_bound(nu, desig, o);
        (s, vec![Factor { energy: e, exponent: 1.0 }])
    } else {
        let inner = nonborderline_data(d, 0, &rat_int(d as i64), mu, nu, desig);
        // re-anchor the inner factors at word order o + 1
        let shift = o + 1 - inner.lhs_order;
        let combo = inner
            .factors
            .iter()
            .map(|f| Factor {
                energy: EnergyRef { of: f.energy.of, order: f.energy.order + shift },
                exponent: f.exponent,
            })
            .collect();
        (-inner.tau_pow, combo)
    };
    let rf = ratf(r);
    let outer = (rf - 2.0) / rf;
    let mut factors = vec![Factor { energy: e1, exponent: 2.0 / rf }];
    for f in combo {
        if f.exponent != 0.0 {
            factors.push(Factor { energy: f.energy, exponent: f.exponent * outer });
        }
    }
    if factors.iter().any(|f| f.energy.order > max_energy) {
        return None;
    }
    let sol = solve_weight_system(&WeightSystem {
        d,
        q: rat_int(2),
        r: r.clone(),
        sigma,
        mu,
        nu,
        style: WeightStyle::KgBorderline,
    })
    .expect("borderline weight system");
    let tau_pow = (rf - 2.0) / (d as f64 * rf) - 2.0 * s1 / rf - g2 * outer;
    Some(BorderlineData { tau_pow, lhs_order: o, lhs_weight: sol.lhs_weight, factors })
}

/// Enumeration order of the (μ, ν) pairs, matching the proposition displays.
const MU_NU: [(i32, i32); 4] = [(1, -1), (1, 1), (-1, -1), (-1, 1)];

/// All Klein-Gordon estimates of one dimension at given (k, r), filtered to
/// energies of order ≤ `max_energy`.
pub fn kg_variants(d: u32, k: usize, r: &Rational, max_energy: usize) -> Vec<LinearEstimate> {
    let rf = ratf(r);
    let mut out = Vec::new();
    let pstar = if d == 2 { 2.0 } else { 2.0 * d as f64 / (d as f64 - 2.0) };
    let nonborder = d >= 3 && rf <= pstar;
    if nonborder {
        for desig in [Designation::U, Designation::Ut] {
            for (mu, nu) in MU_NU {
                let data = nonborderline_data(d, k, r, mu, nu, desig);
                if data.factors.iter().any(|f| f.energy.order > max_energy) {
                    continue;
                }
                let tag = if desig == Designation::U { "u" } else { "ut" };
                out.push(LinearEstimate {
                    label: format!("kg d={d} {tag} ({mu:+},{nu:+})"),
                    lhs_terms: vec![LhsTerm { field: desig, order: data.lhs_order, tau_shift: 0.0 }],
                    lhs_weight: ratf(&data.lhs_weight),
                    tau_pow: data.tau_pow,
                    r: rf,
                    flavor: EnergyFlavor::KleinGordon,
                    factors: data.factors,
                });
            }
        }
    } else {
        let sigmas: &[i32] = if d == 2 { &[1] } else { &[1, -1] };
        for desig in [Designation::U, Designation::Ut] {
            for (mu, nu) in MU_NU {
                for &sigma in sigmas {
                    let Some(data) = borderline_data(d, k, r, sigma, mu, nu, desig, max_energy)
                    else {
                        continue;
                    };
                    let tag = if desig == Designation::U { "u" } else { "ut" };
                    let label = if d == 2 {
                        format!("kg d=2 {tag} ({mu:+},{nu:+})")
                    } else {
                        format!("kg d={d} {tag} ({sigma:+},{mu:+},{nu:+})")
                    };
                    out.push(LinearEstimate {
                        label,
                        lhs_terms: vec![LhsTerm {
                            field: desig,
                            order: data.lhs_order,
                            tau_shift: 0.0,
                        }],
                        lhs_weight: ratf(&data.lhs_weight),
                        tau_pow: data.tau_pow,
                        r: rf,
                        flavor: EnergyFlavor::KleinGordon,
                        factors: data.factors,
                    });
                }
            }
        }
    }
    out
}

fn eref(of: Designation, order: usize) -> EnergyRef {
    EnergyRef { of, order }
}

fn wave_weight(d: u32, r: &Rational) -> f64 {
    // All wave systems of one dimension share the weight polynomial.
    let sol = solve_weight_system(&WeightSystem {
        d,
        q: rat_int(2),
        r: r.clone(),
        sigma: -1,
        mu: -1,
        nu: -1,
        style: WeightStyle::Wave,
    })
    .expect("wave weight system");
    ratf(&sol.lhs_weight)
}

/// The wave estimates of one dimension at (k, r).
pub fn wave_variants(d: u32, k: usize, r: &Rational, max_energy: usize) -> Vec<LinearEstimate> {
    let rf = ratf(r);
    let u = Designation::U;
    let der_lhs = |order: usize| {
        vec![
            LhsTerm { field: Designation::U, order, tau_shift: 0.0 },
            LhsTerm { field: Designation::Ut, order: order - 1, tau_shift: 1.0 },
        ]
    };
    let mut out = Vec::new();
    let mut push = |label: String, lhs_terms: Vec<LhsTerm>, weight: f64, factors: Vec<Factor>| {
        let est = LinearEstimate {
            label,
            lhs_terms,
            lhs_weight: weight,
            tau_pow: -1.0 / rf,
            r: rf,
            flavor: EnergyFlavor::Wave,
            factors,
        };
        if est.max_energy_order() <= max_energy {
            out.push(est);
        }
    };
    match d {
        2 => {
            // single family of estimates, all r ∈ [2, ∞)
            let w = wave_weight(2, r);
            push(
                format!("wave d=2 der k={k}"),
                der_lhs(k + 1),
                w,
                vec![
                    Factor { energy: eref(u, k), exponent: 2.0 / rf },
                    Factor { energy: eref(u, k + 1), exponent: (rf - 2.0) / rf },
                ],
            );
        }
        3 => {
            let w = wave_weight(3, r);
            if rf <= 6.0 {
                let theta = (6.0 - rf) / (2.0 * rf);
                push(
                    "wave d=3 u".into(),
                    vec![LhsTerm { field: u, order: 0, tau_shift: 0.0 }],
                    w,
                    vec![Factor { energy: eref(u, 0), exponent: 1.0 }],
                );
                push(
                    format!("wave d=3 der k={k}"),
                    der_lhs(k + 1),
                    w,
                    vec![
                        Factor { energy: eref(u, k), exponent: theta },
                        Factor { energy: eref(u, k + 1), exponent: 1.0 - theta },
                    ],
                );
            } else {
                push(
                    "wave d=3 u ver1".into(),
                    vec![LhsTerm { field: u, order: 0, tau_shift: 0.0 }],
                    w,
                    vec![
                        Factor { energy: eref(u, 0), exponent: (rf + 6.0) / (2.0 * rf) },
                        Factor { energy: eref(u, 1), exponent: (rf - 6.0) / (2.0 * rf) },
                    ],
                );
                push(
                    format!("wave d=3 der ver1 k={k}"),
                    der_lhs(k + 1),
                    w,
                    vec![
                        Factor { energy: eref(u, k + 1), exponent: (rf + 6.0) / (2.0 * rf) },
                        Factor { energy: eref(u, k + 2), exponent: (rf - 6.0) / (2.0 * rf) },
                    ],
                );
                push(
                    format!("wave d=3 der ver2 k={k}"),
                    der_lhs(k + 1),
                    w,
                    vec![
                        Factor { energy: eref(u, k), exponent: 2.0 / rf },
                        Factor { energy: eref(u, k + 1), exponent: (rf - 2.0) / (2.0 * rf) },
                        Factor { energy: eref(u, k + 2), exponent: (rf - 2.0) / (2.0 * rf) },
                    ],
                );
            }
        }
        4 => {
            let w = wave_weight(4, r);
            if rf <= 4.0 {
                let theta = (4.0 - rf) / rf;
                push(
                    "wave d=4 u".into(),
                    vec![LhsTerm { field: u, order: 0, tau_shift: 0.0 }],
                    w,
                    vec![Factor { energy: eref(u, 0), exponent: 1.0 }],
                );
                push(
                    format!("wave d=4 der k={k}"),
                    der_lhs(k + 1),
                    w,
                    vec![
                        Factor { energy: eref(u, k), exponent: theta },
                        Factor { energy: eref(u, k + 1), exponent: 1.0 - theta },
                    ],
                );
            } else {
                push(
                    "wave d=4 u ver1".into(),
                    vec![LhsTerm { field: u, order: 0, tau_shift: 0.0 }],
                    w,
                    vec![
                        Factor { energy: eref(u, 0), exponent: 2.0 / rf },
                        Factor { energy: eref(u, 1), exponent: (rf - 2.0) / rf },
                    ],
                );
                push(
                    format!("wave d=4 der ver1 k={k}"),
                    der_lhs(k + 1),
                    w,
                    vec![
                        Factor { energy: eref(u, k), exponent: 2.0 / rf },
                        Factor { energy: eref(u, k + 2), exponent: (rf - 2.0) / rf },
                    ],
                );
                push(
                    "wave d=4 u ver2".into(),
                    vec![LhsTerm { field: u, order: 0, tau_shift: 0.0 }],
                    w,
                    vec![
                        Factor { energy: eref(u, 0), exponent: 4.0 / rf },
                        Factor { energy: eref(u, 1), exponent: (rf - 4.0) / rf },
                    ],
                );
                push(
                    format!("wave d=4 der ver2 k={k}"),
                    der_lhs(k + 1),
                    w,
                    vec![
                        Factor { energy: eref(u, k + 1), exponent: 4.0 / rf },
                        Factor { energy: eref(u, k + 2), exponent: (rf - 4.0) / rf },
                    ],
                );
            }
        }
        _ => {}
    }
    out
}

/// Per-word power sums of one family: `Σ w^α |L^word f|² dvol` for
/// α ∈ {−1, +1} (feeding the energies) plus any number of
/// (order, weight, p) requests for left-hand norms. One grid pass per family.
pub(crate) struct FamilyScan {
    pub word_offsets: Vec<usize>,
    pub sums_m1: Vec<f64>,
    pub sums_p1: Vec<f64>,
    pub requests: Vec<ScanRequest>,
    pub req_sums: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ScanRequest {
    pub order: usize,
    pub weight: f64,
    pub p: f64,
}

pub(crate) fn scan_family(
    family: &TestFamily,
    grid: &SliceGrid,
    max_order: usize,
    requests: Vec<ScanRequest>,
) -> FamilyScan {
    let dim = grid.dim();
    let set = MultiIndexSet::new(dim, max_order);
    let mut words: Vec<CompiledWord> = Vec::new();
    let mut word_offsets = vec![0usize];
    for order in 0..=max_order {
        for w in words_of_order(dim, order) {
            words.push(compile_word(&w, &set));
        }
        word_offsets.push(words.len());
    }
    let n_words = words.len();
    let req_word_ranges: Vec<(usize, usize)> = requests
        .iter()
        .map(|rq| (word_offsets[rq.order], word_offsets[rq.order + 1]))
        .collect();
    let params = grid.params;
    type Acc = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);
    let init = || -> Acc {
        (
            vec![0.0; n_words],
            vec![0.0; n_words],
            req_word_ranges.iter().map(|(lo, hi)| vec![0.0; hi - lo]).collect(),
        )
    };
    let (sums_m1, sums_p1, req_sums) = accumulate_chunks(
        grid.num_nodes(),
        init,
        |acc, range| {
            let mut x = [0.0; MAX_DIM];
            let mut vals = vec![0.0; n_words];
            for flat in range {
                grid.node(flat, &mut x);
                let xs = &x[..dim];
                let table = PartialTable::evaluate(&set, family, xs);
                let w = weight(params, xs);
                let dvol = (params.tau / w) * grid.quad_weight(flat);
                let mut any = false;
                for (i, word) in words.iter().enumerate() {
                    let v = word.eval(w, xs, &table);
                    vals[i] = v;
                    any |= v != 0.0;
                }
                if !any {
                    continue;
                }
                let wm1 = dvol / w;
                let wp1 = dvol * w;
                for i in 0..n_words {
                    let sq = vals[i] * vals[i];
                    acc.0[i] += wm1 * sq;
                    acc.1[i] += wp1 * sq;
                }
                for (ri, rq) in requests.iter().enumerate() {
                    let (lo, hi) = req_word_ranges[ri];
                    let wfac = w.powf(rq.weight) * dvol;
                    for i in lo..hi {
                        let v = vals[i].abs();
                        if v != 0.0 {
                            acc.2[ri][i - lo] += wfac * v.powf(rq.p);
                        }
                    }
                }
            }
        },
        |a, b| {
            for i in 0..n_words {
                a.0[i] += b.0[i];
                a.1[i] += b.1[i];
            }
            for (ra, rb) in a.2.iter_mut().zip(b.2) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
        },
    );
    FamilyScan { word_offsets, sums_m1, sums_p1, requests, req_sums }
}

impl FamilyScan {
    /// `Σ_{words of order} √sum` with the given weight sign: one homogeneous
    /// Sobolev norm at p = 2.
    fn homog_l2(&self, order: usize, plus: bool) -> f64 {
        let (lo, hi) = (self.word_offsets[order], self.word_offsets[order + 1]);
        let sums = if plus { &self.sums_p1 } else { &self.sums_m1 };
        sums[lo..hi].iter().map(|s| s.sqrt()).sum()
    }

    fn inhomog_l2(&self, order: usize, plus: bool) -> f64 {
        (0..=order).map(|j| self.homog_l2(j, plus)).sum()
    }

    /// Left-hand norm for a previously registered request.
    fn request_norm(&self, idx: usize) -> f64 {
        let p = self.requests[idx].p;
        self.req_sums[idx].iter().map(|s| s.powf(1.0 / p)).sum()
    }
}

/// Cached energies of the designated triple on one grid.
pub(crate) struct EnergyTableCtx<'a> {
    pub tau: f64,
    pub dim: usize,
    pub flavor: EnergyFlavor,
    pub u: &'a FamilyScan,
    pub ut: &'a FamilyScan,
    pub utt: Option<&'a FamilyScan>,
}

impl EnergyTableCtx<'_> {
    /// `𝔈_m[u]` (designation U) or `𝔈_m[u_t]` (designation Ut, requiring the
    /// u_tt scan).
    pub fn energy(&self, re: EnergyRef) -> f64 {
        let (f, ft) = match re.of {
            Designation::U => (self.u, self.ut),
            Designation::Ut => (self.ut, self.utt.expect("u_tt scan required")),
        };
        let m = re.order;
        let ts = self.tau.sqrt();
        let u_part = if self.flavor == EnergyFlavor::Wave && self.dim == 2 {
            (1..=m + 1).map(|j| f.homog_l2(j, false)).sum::<f64>()
        } else {
            f.inhomog_l2(m + 1, false)
        };
        let mut e = u_part / ts + ts * ft.inhomog_l2(m, false);
        if self.flavor == EnergyFlavor::KleinGordon {
            e += f.inhomog_l2(m, true) / ts;
        }
        e
    }
}

/// Evaluated estimate: both sides and their ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateValue {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Evaluate a batch of estimates sharing one designation triple on one grid.
/// The scans (three grid passes) are shared across all variants.
pub fn evaluate_estimates(
    estimates: &[LinearEstimate],
    u: &TestFamily,
    ut: &TestFamily,
    utt: &TestFamily,
    grid: &SliceGrid,
) -> Vec<EstimateValue> {
    if estimates.is_empty() {
        return Vec::new();
    }
    let max_e = estimates.iter().map(|e| e.max_energy_order()).max().unwrap();
    let needs_ut_energy = estimates
        .iter()
        .flat_map(|e| e.factors.iter())
        .any(|f| f.energy.of == Designation::Ut);
    // Collect LHS requests per designation.
    let mut req_u: Vec<ScanRequest> = Vec::new();
    let mut req_ut: Vec<ScanRequest> = Vec::new();
    let mut req_idx: Vec<Vec<(Designation, usize)>> = Vec::new();
    for est in estimates {
        let mut indices = Vec::new();
        for term in &est.lhs_terms {
            let rq = ScanRequest { order: term.order, weight: est.lhs_weight, p: est.r };
            let bucket = match term.field {
                Designation::U => &mut req_u,
                Designation::Ut => &mut req_ut,
            };
            let pos = match bucket.iter().position(|q| *q == rq) {
                Some(p) => p,
                None => {
                    bucket.push(rq);
                    bucket.len() - 1
                }
            };
            indices.push((term.field, pos));
        }
        req_idx.push(indices);
    }
    // 𝔈_m[u] reads u to order m+1 and u_t to order m; 𝔈_m[u_t] reads u_t to
    // order m+1 and u_tt to order m. LHS requests never exceed those depths
    // at the catalog's order cap.
    let scan_u = scan_family(u, grid, max_e + 1, req_u);
    let ut_depth = if needs_ut_energy { max_e + 1 } else { max_e.max(1) };
    let scan_ut = scan_family(ut, grid, ut_depth, req_ut);
    let scan_utt =
        if needs_ut_energy { Some(scan_family(utt, grid, max_e, Vec::new())) } else { None };
    let ctx = EnergyTableCtx {
        tau: grid.params.tau,
        dim: grid.dim(),
        flavor: estimates[0].flavor,
        u: &scan_u,
        ut: &scan_ut,
        utt: scan_utt.as_ref(),
    };
    estimates
        .iter()
        .zip(&req_idx)
        .map(|(est, indices)| {
            let tau = grid.params.tau;
            let mut lhs = 0.0;
            for (term, (field, pos)) in est.lhs_terms.iter().zip(indices) {
                let scan = match field {
                    Designation::U => &scan_u,
                    Designation::Ut => &scan_ut,
                };
                lhs += tau.powf(term.tau_shift) * scan.request_norm(*pos);
            }
            lhs *= tau.powf(est.tau_pow);
            let mut rhs = 1.0;
            for f in &est.factors {
                rhs *= ctx.energy(f.energy).powf(f.exponent);
            }
            EstimateValue {
                label: est.label.clone(),
                lhs,
                rhs,
                ratio: if rhs > 0.0 { lhs / rhs } else { f64::INFINITY },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::rat;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn kg_d2_variant_table() {
        // weights 1, r−1, −1, r−3; τ-powers −1/r (u-block) and
        // 1−3/r, −1/r, 1−1/r, 1/r (u_t-block)
        let r = rat_int(5);
        let rf = 5.0;
        let vars = kg_variants(2, 0, &r, 2);
        assert_eq!(vars.len(), 8);
        let expect: [(f64, f64, usize); 8] = [
            (1.0, -1.0 / rf, 0),
            (rf - 1.0, -1.0 / rf, 0),
            (-1.0, -1.0 / rf, 1),
            (rf - 3.0, -1.0 / rf, 1),
            (1.0, 1.0 - 3.0 / rf, 0),
            (rf - 1.0, -1.0 / rf, 0),
            (-1.0, 1.0 - 1.0 / rf, 0),
            (rf - 3.0, 1.0 / rf, 0),
        ];
        for (v, (w, tp, order)) in vars.iter().zip(expect) {
            assert!(close(v.lhs_weight, w), "{}: weight {} vs {w}", v.label, v.lhs_weight);
            assert!(close(v.tau_pow, tp), "{}: tau pow {} vs {tp}", v.label, v.tau_pow);
            assert_eq!(v.lhs_terms[0].order, order, "{}", v.label);
        }
        // spot-check RHS structures: (1,−1) u-case collapses onto 𝔈_k
        assert_eq!(vars[0].factors.len(), 2);
        let total: f64 = vars[0].factors.iter().map(|f| f.exponent).sum();
        assert!(close(total, 1.0));
        assert!(vars[0].factors.iter().all(|f| f.energy == eref(Designation::U, 0)));
        // (−1,+1) u-case reaches 𝔈_{k+2}
        assert_eq!(vars[3].max_energy_order(), 2);
    }

    #[test]
    fn kg_d3_nonborderline_tau_powers() {
        let r = rat_int(3);
        let rf = 3.0;
        let vars = kg_variants(3, 0, &r, 2);
        assert_eq!(vars.len(), 8);
        // u block: weights 1, 3r/2−2, r/2−2, 2r−5 at τ^{−1/r}
        let expect_w = [1.0, 1.5 * rf - 2.0, 0.5 * rf - 2.0, 2.0 * rf - 5.0];
        for (v, w) in vars[..4].iter().zip(expect_w) {
            assert!(close(v.lhs_weight, w), "{}: {} vs {w}", v.label, v.lhs_weight);
            assert!(close(v.tau_pow, -1.0 / rf));
        }
        // u_t block τ-powers: 3/2−4/r, −1/r, 1−1/r, −1/2+2/r
        let expect_ut = [1.5 - 4.0 / rf, -1.0 / rf, 1.0 - 1.0 / rf, -0.5 + 2.0 / rf];
        for (v, tp) in vars[4..].iter().zip(expect_ut) {
            assert!(close(v.tau_pow, tp), "{}: {} vs {tp}", v.label, v.tau_pow);
        }
    }

    #[test]
    fn kg_d3_borderline_matches_rho_table_and_excludes_deep_orders() {
        let r = rat_int(8);
        let rf = 8.0;
        let vars = kg_variants(3, 0, &r, 2);
        // 6 u-variants within the order cap (two need 𝔈_{k+3}) + 8 u_t
        assert_eq!(vars.len(), 14);
        let u_vars: Vec<_> =
            vars.iter().filter(|v| v.lhs_terms[0].field == Designation::U).collect();
        assert_eq!(u_vars.len(), 6);
        // weights from the ρ_{d=3} table
        let hit = |sigma: i32, mu: i32, nu: i32| {
            u_vars.iter().find(|v| v.label.contains(&format!("({sigma:+},{mu:+},{nu:+})")))
        };
        assert!(close(hit(1, 1, -1).unwrap().lhs_weight, rf - 1.0));
        assert!(close(hit(1, 1, 1).unwrap().lhs_weight, 1.5 * rf - 2.0));
        assert!(close(hit(1, -1, -1).unwrap().lhs_weight, 0.5 * rf));
        assert!(close(hit(1, -1, 1).unwrap().lhs_weight, rf - 1.0));
        assert!(close(hit(-1, 1, -1).unwrap().lhs_weight, rf - 3.0));
        assert!(close(hit(-1, -1, -1).unwrap().lhs_weight, 0.5 * rf - 2.0));
        assert!(hit(-1, 1, 1).is_none());
        assert!(hit(-1, -1, 1).is_none());
        // ver3-type exponent pattern: 𝔈_k^{(r+2)/2r} 𝔈_{k+1}^{(r−2)/2r}
        let v3 = hit(1, -1, -1).unwrap();
        let mut by_order = std::collections::BTreeMap::new();
        for f in &v3.factors {
            *by_order.entry(f.energy.order).or_insert(0.0) += f.exponent;
        }
        assert!(close(by_order[&0], (rf + 2.0) / (2.0 * rf)));
        assert!(close(by_order[&1], (rf - 2.0) / (2.0 * rf)));
        // u_t τ-powers include the distinctive τ^{1/2−2/r} row
        let ut1 = vars.iter().find(|v| v.label.contains("ut (+1,+1,-1)")).unwrap();
        assert!(close(ut1.tau_pow, 0.5 - 2.0 / rf), "{}", ut1.tau_pow);
    }

    #[test]
    fn kg_d4_borderline_endpoint_collapse() {
        // d=4 second factors are estimated at the endpoint r = 4 where θ = 0,
        // so single energies appear instead of geometric means.
        let r = rat_int(6);
        let rf = 6.0;
        let vars = kg_variants(4, 0, &r, 2);
        let v1 = vars.iter().find(|v| v.label == "kg d=4 u (+1,+1,-1)").expect("ver1 present");
        assert!(close(v1.lhs_weight, rf - 1.0));
        assert!(close(v1.tau_pow, -1.0 / rf));
        assert_eq!(v1.factors.len(), 2);
        assert!(close(v1.factors[0].exponent, 2.0 / rf));
        assert_eq!(v1.factors[0].energy, eref(Designation::U, 0));
        assert!(close(v1.factors[1].exponent, (rf - 2.0) / rf));
        assert_eq!(v1.factors[1].energy, eref(Designation::U, 1));
        // distinct weights at r=6: {r−3, r−1, 2r−5, 2r−3} = {3, 5, 7, 9}.
        // The u-designated 2r−5 rows need 𝔈_{k+3} and are excluded at the
        // order cap (as in the published ver4), but the u_t rows reach it.
        let mut weights: Vec<i64> = vars.iter().map(|v| v.lhs_weight.round() as i64).collect();
        weights.sort_unstable();
        weights.dedup();
        assert_eq!(weights, vec![3, 5, 7, 9]);
        let u_weights: Vec<i64> = {
            let mut w: Vec<i64> = vars
                .iter()
                .filter(|v| v.lhs_terms[0].field == Designation::U)
                .map(|v| v.lhs_weight.round() as i64)
                .collect();
            w.sort_unstable();
            w.dedup();
            w
        };
        assert_eq!(u_weights, vec![3, 5, 9]);
    }

    #[test]
    fn wave_endpoint_degenerations() {
        // r = 6 in d = 3: θ → 0 and the pair collapses onto 𝔈_{k+1}
        let vars = wave_variants(3, 0, &rat_int(6), 2);
        let der = vars.iter().find(|v| v.label.starts_with("wave d=3 der")).unwrap();
        assert!(close(der.factors[0].exponent, 0.0));
        assert!(close(der.factors[1].exponent, 1.0));
        assert_eq!(der.factors[1].energy, eref(Designation::U, 1));
        // r = 4 in d = 4: same collapse
        let vars = wave_variants(4, 0, &rat_int(4), 2);
        let der = vars.iter().find(|v| v.label.starts_with("wave d=4 der")).unwrap();
        assert!(close(der.factors[0].exponent, 0.0));
        assert!(close(der.factors[1].exponent, 1.0));
    }

    #[test]
    fn wave_weights_match_tables() {
        for (d, r, expect) in [(2u32, 5.0, -1.0), (3, 4.0, 0.0), (3, 9.0, 2.5), (4, 7.0, 4.0)] {
            let w = wave_weight(d, &rat(r as i64, 1));
            assert!(close(w, expect), "d={d} r={r}: {w} vs {expect}");
        }
    }

    #[test]
    fn estimates_hold_on_sample_triple() {
        // Each generated estimate is a proved inequality chain; desk-scale
        // fields must produce finite positive ratios.
        let params = crate::geometry::SliceParams::new(2, 2.0).unwrap();
        let grid = SliceGrid::new(params, 8.0, 65).unwrap();
        let u = TestFamily::bump(vec![0.0, 0.0], 1.3, 1.0);
        let ut = TestFamily::gaussian(vec![0.2, 0.0], 0.9, 0.7);
        let utt = TestFamily::bump(vec![-0.3, 0.1], 1.1, 0.5);
        let vars = kg_variants(2, 0, &rat_int(4), 2);
        let vals = evaluate_estimates(&vars, &u, &ut, &utt, &grid);
        for v in vals {
            assert!(v.lhs.is_finite() && v.rhs > 0.0, "{}: lhs {} rhs {}", v.label, v.lhs, v.rhs);
            assert!(v.ratio.is_finite());
        }
    }

    #[test]
    fn scan_matches_weighted_sobolev() {
        // FamilyScan's homogeneous L² norms agree with the norms module.
        use crate::norms::{weighted_sobolev, NormSpec};
        let params = crate::geometry::SliceParams::new(2, 1.4).unwrap();
        let grid = SliceGrid::new(params, 6.0, 49).unwrap();
        let fam = TestFamily::gaussian(vec![0.1, -0.2], 1.0, 1.0);
        let scan = scan_family(&fam, &grid, 2, Vec::new());
        for order in 0..=2usize {
            for plus in [false, true] {
                let direct = weighted_sobolev(
                    &fam,
                    &grid,
                    &NormSpec {
                        p: 2.0,
                        alpha: if plus { 1.0 } else { -1.0 },
                        order,
                        homogeneous: true,
                    },
                )
                .unwrap()
                .value;
                let from_scan = scan.homog_l2(order, plus);
                assert!(
                    (direct - from_scan).abs() <= 1e-12 * direct.max(1.0),
                    "order {order} plus {plus}: {direct} vs {from_scan}"
                );
            }
        }
    }
}
