//! Exact rational solver for the interpolation exponent θ and the (α, β)
//! weight systems behind the slice estimates.
//!
//! Every solve follows the same two-step shape: θ is determined first from
//! the Hölder relation `1/r = θ/q + (1−θ)/endpoint`, then (α, β) solve a
//! 2×2 linear system pinning the weights of the two right-hand factors. All
//! arithmetic is exact; solutions are back-substituted before they are
//! returned.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

/// Exact rational from an integer pair.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
}

/// Sobolev conjugate `p* = dp/(d − p)`, requiring `0 < p < d`.
pub fn sobolev_conjugate(p: &Rational, d: u32) -> Result<Rational, ExponentError> {
    let dd = rat_int(d as i64);
    if !p.is_positive() || *p >= dd {
        return Err(ExponentError::DomainError(format!(
            "sobolev conjugate needs 0 < p < d, got p = {p}, d = {d}"
        )));
    }
    Ok(&dd * p / (&dd - p))
}

/// The borderline conjugate `1* = d/(d−1)`.
pub fn one_star(d: u32) -> Rational {
    rat(d as i64, d as i64 - 1)
}

/// Which endpoint closes the interpolation relation.
#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    /// `1/r = θ/q + (1−θ)/p*` with `p < d`.
    SobolevConjugate { p: Rational },
    /// `1/r = θ/q + (1−θ)/(r + 1*)`, used when `p = d`.
    Borderline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSystem {
    pub d: u32,
    pub q: Rational,
    pub r: Rational,
    pub endpoint: Endpoint,
}

/// Exact θ of an interpolation system; θ ∈ (0, 1] on the valid range.
pub fn solve_theta(sys: &InterpolationSystem) -> Result<Rational, ExponentError> {
    if !sys.q.is_positive() || !sys.r.is_positive() {
        return Err(ExponentError::DomainError("q and r must be positive".into()));
    }
    let endpoint_inv = match &sys.endpoint {
        Endpoint::SobolevConjugate { p } => {
            let pstar = sobolev_conjugate(p, sys.d)?;
            if sys.r > pstar {
                return Err(ExponentError::DomainError(format!(
                    "need q ≤ r ≤ p*, got r = {} > p* = {pstar}",
                    sys.r
                )));
            }
            pstar.recip()
        }
        Endpoint::Borderline => (&sys.r + one_star(sys.d)).recip(),
    };
    let q_inv = sys.q.recip();
    if q_inv == endpoint_inv {
        return Err(ExponentError::NoSolution(
            "q coincides with the endpoint exponent; the interpolation is degenerate".into(),
        ));
    }
    let theta = (sys.r.recip() - &endpoint_inv) / (q_inv - endpoint_inv);
    Ok(theta)
}

/// Style selector for [`solve_weight_system`] and [`weight_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightStyle {
    /// Wave-energy systems: both factor weights target −1 (q = 2), or the
    /// `q = p*` variant with leading weight +1.
    Wave,
    /// Klein-Gordon interpolation against `𝒲^{1,2}` (valid for `r ≤ p*`,
    /// `d ≥ 3`); factor weights (μ, ν).
    KgNonBorderline,
    /// Klein-Gordon borderline interpolation against `𝒲^{1,d}`; factor
    /// weights (σ, ρ_pqd(μ, ν)).
    KgBorderline,
}

/// One weight system: the targets (σ, μ, ν) each take values ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSystem {
    pub d: u32,
    pub q: Rational,
    pub r: Rational,
    pub sigma: i32,
    pub mu: i32,
    pub nu: i32,
    pub style: WeightStyle,
}

/// Exact exponents, with the induced left-hand weight and the two factor
/// weights echoed back for cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSolution {
    pub theta: Rational,
    pub alpha: Rational,
    pub beta: Rational,
    /// Weight of the left-hand Lebesgue norm.
    pub lhs_weight: Rational,
    /// Weight of the Lebesgue factor on the right.
    pub lebesgue_weight: Rational,
    /// Weight of the Sobolev factor on the right.
    pub sobolev_weight: Rational,
}

fn sign_ok(s: i32) -> Result<Rational, ExponentError> {
    match s {
        1 | -1 => Ok(rat_int(s as i64)),
        _ => Err(ExponentError::DomainError(format!("weight target must be ±1, got {s}"))),
    }
}

/// Borderline system (`p = d`): solve
/// `1 + βq + αq = A` and `(1−d)(1 + θβr) + αd = B` after fixing θ from the
/// borderline relation. The left-hand weight is `1 + θβr + αr`.
pub fn solve_borderline(
    d: u32,
    q: &Rational,
    r: &Rational,
    lebesgue_target: &Rational,
    sobolev_target: &Rational,
) -> Result<ExponentSolution, ExponentError> {
    let theta = solve_theta(&InterpolationSystem {
        d,
        q: q.clone(),
        r: r.clone(),
        endpoint: Endpoint::Borderline,
    })?;
    if !theta.is_positive() || theta > Rational::one() {
        return Err(ExponentError::DomainError(format!(
            "borderline θ must lie in (0, 1], got {theta}"
        )));
    }
    // Linear system in (α, β):
    //   q α + q β            = A − 1
    //   d α + (1−d) θ r β    = B − (1−d)
    let one = Rational::one();
    let dd = rat_int(d as i64);
    let one_minus_d = &one - &dd;
    let a11 = q.clone();
    let a12 = q.clone();
    let a21 = dd.clone();
    let a22 = &one_minus_d * &theta * r;
    let b1 = lebesgue_target - &one;
    let b2 = sobolev_target - &one_minus_d;
    let det = &a11 * &a22 - &a12 * &a21;
    if det.is_zero() {
        return Err(ExponentError::SingularSystem(format!(
            "degenerate (α, β) system at d = {d}, q = {q}, r = {r}"
        )));
    }
    let alpha = (&b1 * &a22 - &a12 * &b2) / &det;
    let beta = (&a11 * &b2 - &b1 * &a21) / &det;
    // Substitution check: exact identities by construction.
    debug_assert_eq!(&one + &beta * q + &alpha * q, lebesgue_target.clone());
    debug_assert_eq!(
        &one_minus_d * (&one + &theta * &beta * r) + &alpha * &dd,
        sobolev_target.clone()
    );
    let lhs_weight = &one + &theta * &beta * r + &alpha * r;
    Ok(ExponentSolution {
        theta,
        alpha,
        beta,
        lhs_weight,
        lebesgue_weight: lebesgue_target.clone(),
        sobolev_weight: sobolev_target.clone(),
    })
}

/// Non-borderline system (`p < d`): θ from the `p*` endpoint, then
/// `1 + βq = μ` and `1 − p + αp = ν` decouple. The left-hand weight is
/// `1 + (θβ + (1−θ)α) r`.
pub fn solve_nonborderline(
    d: u32,
    q: &Rational,
    p: &Rational,
    r: &Rational,
    mu: &Rational,
    nu: &Rational,
) -> Result<ExponentSolution, ExponentError> {
    let theta = solve_theta(&InterpolationSystem {
        d,
        q: q.clone(),
        r: r.clone(),
        endpoint: Endpoint::SobolevConjugate { p: p.clone() },
    })?;
    let one = Rational::one();
    let beta = (mu - &one) / q;
    let alpha = (nu - &one + p) / p;
    let lhs_weight = &one + (&theta * &beta + (&one - &theta) * &alpha) * r;
    Ok(ExponentSolution {
        theta,
        alpha,
        beta,
        lhs_weight,
        lebesgue_weight: mu.clone(),
        sobolev_weight: nu.clone(),
    })
}

/// Weight `ρ_pqd(μ, ν)` of the non-borderline (q = p = 2) estimate,
/// evaluated at `r = d`; feeds the Sobolev-factor target of the borderline
/// systems for d ≥ 3.
fn rho_pq_at_d(d: u32, mu: i32, nu: i32) -> Result<Rational, ExponentError> {
    let two = rat_int(2);
    let rd = rat_int(d as i64);
    let sol = solve_nonborderline(d, &two, &two, &rd, &sign_ok(mu)?, &sign_ok(nu)?)?;
    Ok(sol.lhs_weight)
}

/// Solve one named weight system.
pub fn solve_weight_system(sys: &WeightSystem) -> Result<ExponentSolution, ExponentError> {
    match sys.style {
        WeightStyle::KgNonBorderline => {
            if sys.d < 3 {
                return Err(ExponentError::DomainError(
                    "non-borderline interpolation needs p = 2 < d".into(),
                ));
            }
            let two = rat_int(2);
            solve_nonborderline(sys.d, &two, &two, &sys.r, &sign_ok(sys.mu)?, &sign_ok(sys.nu)?)
        }
        WeightStyle::KgBorderline => {
            // In d = 2 the Lebesgue factor is the mass/energy term directly,
            // so its target is μ; in d ≥ 3 it is the σ-weighted L² factor
            // and the Sobolev factor inherits the non-borderline weight.
            let (a, b) = if sys.d == 2 {
                (sign_ok(sys.mu)?, sign_ok(sys.nu)?)
            } else {
                (sign_ok(sys.sigma)?, rho_pq_at_d(sys.d, sys.mu, sys.nu)?)
            };
            solve_borderline(sys.d, &sys.q, &sys.r, &a, &b)
        }
        WeightStyle::Wave => {
            // q selects the system: q = 2 pairs with the ℒ²_{−1} energy
            // factor, q = p* with the weight-one GNS_p factor.
            let a = if sys.q == rat_int(2) { rat_int(-1) } else { rat_int(1) };
            let b = if sys.d == 2 { rat_int(-1) } else { rho_pq_at_d(sys.d, -1, -1)? };
            solve_borderline(sys.d, &sys.q, &sys.r, &a, &b)
        }
    }
}

/// One table row: the left-hand weight as a linear polynomial
/// `slope·r + intercept` in the Lebesgue exponent r.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTableRow {
    pub label: String,
    pub sigma: Option<i32>,
    pub mu: i32,
    pub nu: i32,
    pub slope: Rational,
    pub intercept: Rational,
}

impl WeightTableRow {
    pub fn weight_at(&self, r: &Rational) -> Rational {
        &self.slope * r + &self.intercept
    }
}

fn fit_row(
    label: String,
    sigma: Option<i32>,
    mu: i32,
    nu: i32,
    samples: [Rational; 3],
    mut solve_at: impl FnMut(&Rational) -> Result<Rational, ExponentError>,
) -> Result<WeightTableRow, ExponentError> {
    // The weights are linear in r; interpolate through two admissible points
    // and verify on a third.
    let [r1, r2, r3] = samples;
    let w1 = solve_at(&r1)?;
    let w2 = solve_at(&r2)?;
    let slope = (&w2 - &w1) / (&r2 - &r1);
    let intercept = &w1 - &slope * &r1;
    let w3 = solve_at(&r3)?;
    if &slope * &r3 + &intercept != w3 {
        return Err(ExponentError::NoSolution(format!(
            "weight for {label} is not linear in r"
        )));
    }
    Ok(WeightTableRow { label, sigma, mu, nu, slope, intercept })
}

/// Enumeration order of the (μ, ν) pairs, matching the published tables.
pub const MU_NU_ORDER: [(i32, i32); 4] = [(1, -1), (1, 1), (-1, -1), (-1, 1)];

/// The full weight table of one style in one dimension.
///
/// Every row is produced by the generic solver; rows are additionally
/// validated against independent solves at random rational r.
pub fn weight_table(d: u32, style: WeightStyle) -> Result<Vec<WeightTableRow>, ExponentError> {
    // Sample exponents: interior of [2, p*] for the interpolation systems,
    // large r for the borderline ones.
    let interp_samples = || [rat(5, 2), rat(7, 2), rat(10, 3)];
    let border_samples = || [rat(17, 2), rat(23, 2), rat(31, 3)];
    let mut rows = Vec::new();
    match style {
        WeightStyle::KgNonBorderline => {
            for (mu, nu) in MU_NU_ORDER {
                rows.push(fit_row(
                    format!("rho_pqr({mu:+},{nu:+})"),
                    None,
                    mu,
                    nu,
                    interp_samples(),
                    |r| {
                        solve_weight_system(&WeightSystem {
                            d,
                            q: rat_int(2),
                            r: r.clone(),
                            sigma: 1,
                            mu,
                            nu,
                            style,
                        })
                        .map(|s| s.lhs_weight)
                    },
                )?);
            }
        }
        WeightStyle::KgBorderline => {
            if d == 2 {
                for (mu, nu) in MU_NU_ORDER {
                    rows.push(fit_row(
                        format!("rho({mu:+},{nu:+})"),
                        None,
                        mu,
                        nu,
                        border_samples(),
                        |r| {
                            solve_weight_system(&WeightSystem {
                                d,
                                q: rat_int(2),
                                r: r.clone(),
                                sigma: 1,
                                mu,
                                nu,
                                style,
                            })
                            .map(|s| s.lhs_weight)
                        },
                    )?);
                }
            } else {
                for (mu, nu) in MU_NU_ORDER {
                    for sigma in [1, -1] {
                        rows.push(fit_row(
                            format!("rho_d={d}({sigma:+},{mu:+},{nu:+})"),
                            Some(sigma),
                            mu,
                            nu,
                            border_samples(),
                            |r| {
                                solve_weight_system(&WeightSystem {
                                    d,
                                    q: rat_int(2),
                                    r: r.clone(),
                                    sigma,
                                    mu,
                                    nu,
                                    style,
                                })
                                .map(|s| s.lhs_weight)
                            },
                        )?);
                    }
                }
            }
        }
        WeightStyle::Wave => {
            if d == 2 {
                rows.push(fit_row(
                    "wave d=2 (q=2)".into(),
                    Some(-1),
                    -1,
                    -1,
                    border_samples(),
                    |r| {
                        solve_weight_system(&WeightSystem {
                            d,
                            q: rat_int(2),
                            r: r.clone(),
                            sigma: -1,
                            mu: -1,
                            nu: -1,
                            style,
                        })
                        .map(|s| s.lhs_weight)
                    },
                )?);
            } else {
                // Non-borderline block r ∈ [2, p*], then both borderline
                // systems; all share one weight polynomial.
                rows.push(fit_row(
                    format!("wave d={d} interpolation"),
                    None,
                    -1,
                    -1,
                    interp_samples(),
                    |r| {
                        solve_nonborderline(
                            d,
                            &rat_int(2),
                            &rat_int(2),
                            r,
                            &rat_int(-1),
                            &rat_int(-1),
                        )
                        .map(|s| s.lhs_weight)
                    },
                )?);
                let qstar = sobolev_conjugate(&rat_int(2), d)?;
                rows.push(fit_row(
                    format!("wave d={d} (q=p*)"),
                    Some(1),
                    -1,
                    -1,
                    border_samples(),
                    |r| {
                        solve_weight_system(&WeightSystem {
                            d,
                            q: qstar.clone(),
                            r: r.clone(),
                            sigma: 1,
                            mu: -1,
                            nu: -1,
                            style,
                        })
                        .map(|s| s.lhs_weight)
                    },
                )?);
                rows.push(fit_row(
                    format!("wave d={d} (q=2)"),
                    Some(-1),
                    -1,
                    -1,
                    border_samples(),
                    |r| {
                        solve_weight_system(&WeightSystem {
                            d,
                            q: rat_int(2),
                            r: r.clone(),
                            sigma: -1,
                            mu: -1,
                            nu: -1,
                            style,
                        })
                        .map(|s| s.lhs_weight)
                    },
                )?);
            }
        }
    }
    // Cross-validation at random rational r per row.
    validate_rows_randomly(d, style, &rows)?;
    Ok(rows)
}

fn validate_rows_randomly(
    d: u32,
    style: WeightStyle,
    rows: &[WeightTableRow],
) -> Result<(), ExponentError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_0001);
    // Non-borderline rows only exist for r in [2, p*]; borderline rows hold
    // for all larger r.
    let interpolation_row =
        |row: &WeightTableRow| style == WeightStyle::KgNonBorderline || row.sigma.is_none();
    for row in rows {
        for _ in 0..3 {
            let r = if interpolation_row(row) && style != WeightStyle::KgBorderline {
                let pstar = sobolev_conjugate(&rat_int(2), d)?;
                let den = rng.gen_range(3i64..12);
                rat_int(2) + (&pstar - rat_int(2)) * rat(rng.gen_range(1..den), den)
            } else {
                rat(rng.gen_range(60..600), rng.gen_range(2..12))
            };
            let expect = row.weight_at(&r);
            let got = match style {
                WeightStyle::KgNonBorderline => solve_weight_system(&WeightSystem {
                    d,
                    q: rat_int(2),
                    r: r.clone(),
                    sigma: 1,
                    mu: row.mu,
                    nu: row.nu,
                    style,
                })?
                .lhs_weight,
                WeightStyle::KgBorderline => solve_weight_system(&WeightSystem {
                    d,
                    q: rat_int(2),
                    r: r.clone(),
                    sigma: row.sigma.unwrap_or(1),
                    mu: row.mu,
                    nu: row.nu,
                    style,
                })?
                .lhs_weight,
                WeightStyle::Wave => {
                    if row.sigma.is_none() {
                        solve_nonborderline(
                            d,
                            &rat_int(2),
                            &rat_int(2),
                            &r,
                            &rat_int(-1),
                            &rat_int(-1),
                        )?
                        .lhs_weight
                    } else {
                        let q = if row.sigma == Some(1) && d > 2 {
                            sobolev_conjugate(&rat_int(2), d)?
                        } else {
                            rat_int(2)
                        };
                        solve_weight_system(&WeightSystem {
                            d,
                            q,
                            r: r.clone(),
                            sigma: row.sigma.unwrap(),
                            mu: -1,
                            nu: -1,
                            style,
                        })?
                        .lhs_weight
                    }
                }
            };
            if got != expect {
                return Err(ExponentError::NoSolution(format!(
                    "row {} fails validation at r = {r}: table {expect}, solver {got}",
                    row.label
                )));
            }
        }
    }
    Ok(())
}

/// Number of distinct weight polynomials in a table.
pub fn distinct_weight_count(rows: &[WeightTableRow]) -> usize {
    let mut seen: Vec<(Rational, Rational)> = Vec::new();
    for row in rows {
        let key = (row.slope.clone(), row.intercept.clone());
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    seen.len()
}

/// The triple of weights `(1 + θβr, 1 + βq, (1−d)(1 + βθr))` of the
/// borderline inequality for a given β, with θ solved from (d, q, r).
pub fn borderline_weight_triple(
    d: u32,
    q: &Rational,
    r: &Rational,
    beta: &Rational,
) -> Result<(Rational, Rational, Rational), ExponentError> {
    let theta = solve_theta(&InterpolationSystem {
        d,
        q: q.clone(),
        r: r.clone(),
        endpoint: Endpoint::Borderline,
    })?;
    let one = Rational::one();
    let lhs = &one + &theta * beta * r;
    let leb = &one + beta * q;
    let sob = (&one - rat_int(d as i64)) * &lhs;
    Ok((lhs, leb, sob))
}

/// Closed-form reference solutions, written out independently of the
/// generic solver; cross-checking the two paths is the primary oracle for
/// this module.
pub mod closed_forms {
    use super::*;

    /// Closed solution of one borderline system: (θ, α, β, lhs weight).
    pub struct ClosedSolution {
        pub theta: Rational,
        pub alpha: Rational,
        pub beta: Rational,
        pub weight: Rational,
    }

    /// d = 2 wave/Klein-Gordon (−1, −1) system:
    /// θ = 4/r², β = −r/(2+r), α = −2/(2+r), weight −1.
    pub fn wave_d2(r: &Rational) -> ClosedSolution {
        ClosedSolution {
            theta: rat_int(4) / (r * r),
            beta: -r / (rat_int(2) + r),
            alpha: rat_int(-2) / (rat_int(2) + r),
            weight: rat_int(-1),
        }
    }

    /// d = 3, q = 2 system: θ = 6/(r(2r−1)), β = −3(2r−1)/(2(3+2r)),
    /// α = (2r−9)/(2(3+2r)), weight r/2 − 2.
    pub fn wave_d3_q2(r: &Rational) -> ClosedSolution {
        let two_r = rat_int(2) * r;
        ClosedSolution {
            theta: rat_int(6) / (r * (&two_r - rat_int(1))),
            beta: rat_int(-3) * (&two_r - rat_int(1)) / (rat_int(2) * (rat_int(3) + &two_r)),
            alpha: (&two_r - rat_int(9)) / (rat_int(2) * (rat_int(3) + &two_r)),
            weight: r / rat_int(2) - rat_int(2),
        }
    }

    /// d = 3, q = 6 system: −α = β = −(3/2 + r − 6)/(3 + 2r), weight r/2 − 2.
    pub fn wave_d3_q6(r: &Rational) -> ClosedSolution {
        let beta = -(rat(3, 2) + r - rat_int(6)) / (rat_int(3) + rat_int(2) * r);
        ClosedSolution {
            theta: rat_int(9) / (r * (rat(3, 2) + r - rat_int(6))),
            alpha: -beta.clone(),
            beta,
            weight: r / rat_int(2) - rat_int(2),
        }
    }

    /// d = 4 first system (q = 2): θ = 8/(r(3r−2)), β = −2(3r−2)/(4+3r),
    /// α = (3r−8)/(4+3r), weight r − 3.
    pub fn wave_d4_q2(r: &Rational) -> ClosedSolution {
        let three_r = rat_int(3) * r;
        ClosedSolution {
            theta: rat_int(8) / (r * (&three_r - rat_int(2))),
            beta: rat_int(-2) * (&three_r - rat_int(2)) / (rat_int(4) + &three_r),
            alpha: (&three_r - rat_int(8)) / (rat_int(4) + &three_r),
            weight: r - rat_int(3),
        }
    }

    /// d = 4 second system (q = 4): θ = 16/(r(3r−8)), −β = α = (3r−8)/(4+3r),
    /// weight r − 3.
    pub fn wave_d4_q4(r: &Rational) -> ClosedSolution {
        let three_r = rat_int(3) * r;
        let alpha = (&three_r - rat_int(8)) / (rat_int(4) + &three_r);
        ClosedSolution {
            theta: rat_int(16) / (r * (&three_r - rat_int(8))),
            beta: -alpha.clone(),
            alpha,
            weight: r - rat_int(3),
        }
    }

    /// Published weight tables as (slope, intercept) rows in the
    /// enumeration order of [`MU_NU_ORDER`] (σ = +1 before σ = −1 within
    /// each pair for the triple-indexed tables).
    pub fn published_table(d: u32, style: WeightStyle) -> Vec<(Rational, Rational)> {
        let rows: &[(i64, i64, i64, i64)] = match (style, d) {
            // ρ(1,−1)=1, ρ(1,1)=r−1, ρ(−1,−1)=−1, ρ(−1,1)=r−3
            (WeightStyle::KgBorderline, 2) => {
                &[(0, 1, 1, 1), (1, -1, 1, 1), (0, -1, 1, 1), (1, -3, 1, 1)]
            }
            // ρ_pqr: 1, 3r/2−2, r/2−2, 2r−5
            (WeightStyle::KgNonBorderline, 3) => {
                &[(0, 1, 1, 1), (3, -2, 2, 1), (1, -2, 2, 1), (2, -5, 1, 1)]
            }
            // ρ_pqr: 1, 2r−3, r−3, 3r−7
            (WeightStyle::KgNonBorderline, 4) => {
                &[(0, 1, 1, 1), (2, -3, 1, 1), (1, -3, 1, 1), (3, -7, 1, 1)]
            }
            // ρ_{d=3}(σ,μ,ν) over (μ,ν) outer, σ ∈ {+1,−1} inner
            (WeightStyle::KgBorderline, 3) => &[
                (1, -1, 1, 1),
                (1, -3, 1, 1),
                (3, -2, 2, 1),
                (3, -4, 2, 1),
                (1, 0, 2, 1),
                (1, -2, 2, 1),
                (1, -1, 1, 1),
                (1, -3, 1, 1),
            ],
            // ρ_{d=4}(σ,μ,ν)
            (WeightStyle::KgBorderline, 4) => &[
                (1, -1, 1, 1),
                (1, -3, 1, 1),
                (2, -3, 1, 1),
                (2, -5, 1, 1),
                (1, -1, 1, 1),
                (1, -3, 1, 1),
                (2, -3, 1, 1),
                (2, -5, 1, 1),
            ],
            // all wave rows of one dimension share the weight polynomial
            (WeightStyle::Wave, 2) => &[(0, -1, 1, 1)],
            (WeightStyle::Wave, 3) => &[(1, -2, 2, 1); 3],
            (WeightStyle::Wave, 4) => &[(1, -3, 1, 1); 3],
            _ => &[],
        };
        rows.iter()
            .map(|(sn, in_, sd, id)| (rat(*sn, *sd), rat(*in_, *id)))
            .collect()
    }

    pub struct ClosedFormCheck {
        pub label: String,
        pub pass: bool,
    }

    fn check_system(
        label: String,
        sys: &WeightSystem,
        expect: &ClosedSolution,
        out: &mut Vec<ClosedFormCheck>,
    ) {
        let pass = match solve_weight_system(sys) {
            Ok(sol) => {
                sol.theta == expect.theta
                    && sol.alpha == expect.alpha
                    && sol.beta == expect.beta
                    && sol.lhs_weight == expect.weight
            }
            Err(_) => false,
        };
        out.push(ClosedFormCheck { label, pass });
    }

    /// Compare the generic solver against every quoted closed form at the
    /// given exponents (each form only where its r-range applies), plus the
    /// full weight tables and their distinct-weight counts.
    pub fn closed_form_checks(r_values: &[Rational]) -> Vec<ClosedFormCheck> {
        let mut out = Vec::new();
        for r in r_values {
            let sys = |d: u32, q: i64, sigma: i32| WeightSystem {
                d,
                q: rat_int(q),
                r: r.clone(),
                sigma,
                mu: -1,
                nu: -1,
                style: WeightStyle::Wave,
            };
            if *r > rat_int(2) {
                check_system(format!("wave d=2 closed form at r={r}"), &sys(2, 2, -1), &wave_d2(r), &mut out);
            }
            if *r > rat_int(6) {
                check_system(format!("wave d=3 q=2 closed form at r={r}"), &sys(3, 2, -1), &wave_d3_q2(r), &mut out);
                check_system(format!("wave d=3 q=6 closed form at r={r}"), &sys(3, 6, 1), &wave_d3_q6(r), &mut out);
            }
            if *r > rat_int(4) {
                check_system(format!("wave d=4 q=2 closed form at r={r}"), &sys(4, 2, -1), &wave_d4_q2(r), &mut out);
                check_system(format!("wave d=4 q=4 closed form at r={r}"), &sys(4, 4, 1), &wave_d4_q4(r), &mut out);
            }
        }
        // weight tables against their published polynomials
        for (d, style, expected_distinct) in [
            (2u32, WeightStyle::KgBorderline, 4usize),
            (3, WeightStyle::KgNonBorderline, 4),
            (4, WeightStyle::KgNonBorderline, 4),
            (3, WeightStyle::KgBorderline, 6),
            (4, WeightStyle::KgBorderline, 4),
            (2, WeightStyle::Wave, 1),
            (3, WeightStyle::Wave, 1),
            (4, WeightStyle::Wave, 1),
        ] {
            let label = format!("weight table d={d} {style:?}");
            match weight_table(d, style) {
                Ok(rows) => {
                    let published = published_table(d, style);
                    let rows_match = rows.len() == published.len()
                        && rows
                            .iter()
                            .zip(&published)
                            .all(|(row, (s, i))| &row.slope == s && &row.intercept == i);
                    out.push(ClosedFormCheck { label: label.clone(), pass: rows_match });
                    out.push(ClosedFormCheck {
                        label: format!("{label}: distinct weight count"),
                        pass: distinct_weight_count(&rows) == expected_distinct,
                    });
                }
                Err(_) => out.push(ClosedFormCheck { label, pass: false }),
            }
        }
        out
    }
}
