//! Energy-hierarchy traces `𝔈_k(τ)`, `𝔉_k(τ)` and growth-rate fitting.
//!
//! The d = 2 wave energies use the no-Hardy form (the φ sum starts at first
//! order); 𝔉 is the inhomogeneous ψ norm including order zero. The flux
//! energies `𝓔_τ` are carried along because they satisfy an exact
//! conservation identity for the linear equation, which makes them the
//! right yardstick for scheme validation.

use crate::norms::weighted_lebesgue;
use crate::report::{csv_row, CsvField, Json};

use super::slices::SliceFields;
use super::SimulatorError;

/// Energies of one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub tau: f64,
    pub e0: f64,
    pub e1: f64,
    pub f0: f64,
    pub f1: f64,
    /// `√𝓔_τ[φ]`: square root of the quadratic flux energy.
    pub flux_phi: f64,
    pub flux_psi: f64,
}

/// Per-τ energy records of one evolution.
#[derive(Debug, Clone)]
pub struct EnergyTrace {
    pub dim: usize,
    pub rows: Vec<TraceRow>,
}

impl EnergyTrace {
    /// CSV with the documented columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,E0,E1,F0,F1\n");
        for r in &self.rows {
            out.push_str(&csv_row(&[
                CsvField::Float(r.tau),
                CsvField::Float(r.e0),
                CsvField::Float(r.e1),
                CsvField::Float(r.f0),
                CsvField::Float(r.f1),
            ]));
        }
        out
    }

    pub fn to_json(&self) -> Json {
        let mut obj = Json::object();
        obj.push("dim", Json::Int(self.dim as i64));
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut row = Json::object();
                row.push("tau", Json::Float(r.tau));
                row.push("E0", Json::Float(r.e0));
                row.push("E1", Json::Float(r.e1));
                row.push("F0", Json::Float(r.f0));
                row.push("F1", Json::Float(r.f1));
                row.push("flux_phi", Json::Float(r.flux_phi));
                row.push("flux_psi", Json::Float(r.flux_psi));
                row
            })
            .collect();
        obj.push("rows", Json::Array(rows));
        obj
    }

    pub fn points(&self, select: impl Fn(&TraceRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.tau, select(r))).collect()
    }
}

/// Number of per-word sums of one field at K_sim = 1:
/// `[u, L_i u, L_j L_i u, u_t, L_i u_t]`.
pub(crate) fn sums_len(dim: usize) -> usize {
    1 + dim + dim * dim + 1 + dim
}

/// Assemble one trace row from streamed power sums
/// `S[word] = ∫ w^{−1} |L^word f|² dvol`.
pub(crate) fn row_from_sums(dim: usize, tau: f64, phi: &[f64], psi: &[f64]) -> TraceRow {
    let d = dim;
    let ts = tau.sqrt();
    let order0 = |s: &[f64]| s[0].sqrt();
    let order1 = |s: &[f64]| (1..=d).map(|i| s[i].sqrt()).sum::<f64>();
    let order2 = |s: &[f64]| (1 + d..1 + d + d * d).map(|i| s[i].sqrt()).sum::<f64>();
    let ut0 = |s: &[f64]| s[1 + d + d * d].sqrt();
    let ut1 = |s: &[f64]| (2 + d + d * d..2 + d + d * d + d).map(|i| s[i].sqrt()).sum::<f64>();
    // d = 2 wave energies drop the order-0 φ term (no Hardy inequality);
    // d ≥ 3 keeps the inhomogeneous norm.
    let phi_low = if d == 2 { 0.0 } else { order0(phi) };
    let e0 = (phi_low + order1(phi)) / ts + ts * ut0(phi);
    let e1 = (phi_low + order1(phi) + order2(phi)) / ts + ts * (ut0(phi) + ut1(phi));
    let f0 = (order0(psi) + order1(psi)) / ts + ts * ut0(psi);
    let f1 = (order0(psi) + order1(psi) + order2(psi)) / ts + ts * (ut0(psi) + ut1(psi));
    let flux = |s: &[f64]| ((1..=d).map(|i| s[i]).sum::<f64>() / tau + tau * s[1 + d + d * d]).sqrt();
    TraceRow { tau, e0, e1, f0, f1, flux_phi: flux(phi), flux_psi: flux(psi) }
}

/// Energies of one materialized slice, computed through the norms module.
pub fn hierarchy_from_slices(fields: &SliceFields, dim: usize) -> TraceRow {
    let tau = fields.tau;
    let ts = tau.sqrt();
    let l2 = |f: &crate::fields::ScalarField| weighted_lebesgue(f, 2.0, -1.0).value;
    let order1_phi: f64 =
        fields.phi_boosts.iter().filter(|(w, _)| w.len() == 1).map(|(_, f)| l2(f)).sum();
    let order2_phi: f64 =
        fields.phi_boosts.iter().filter(|(w, _)| w.len() == 2).map(|(_, f)| l2(f)).sum();
    let order1_psi: f64 =
        fields.psi_boosts.iter().filter(|(w, _)| w.len() == 1).map(|(_, f)| l2(f)).sum();
    let order2_psi: f64 =
        fields.psi_boosts.iter().filter(|(w, _)| w.len() == 2).map(|(_, f)| l2(f)).sum();
    let ut0_phi = l2(&fields.phi_t);
    let ut1_phi: f64 = fields.phi_t_boosts.iter().map(|(_, f)| l2(f)).sum();
    let ut0_psi = l2(&fields.psi_t);
    let ut1_psi: f64 = fields.psi_t_boosts.iter().map(|(_, f)| l2(f)).sum();
    let phi_low = if dim == 2 { 0.0 } else { l2(&fields.phi) };
    let psi_low = l2(&fields.psi);
    let e0 = (phi_low + order1_phi) / ts + ts * ut0_phi;
    let e1 = (phi_low + order1_phi + order2_phi) / ts + ts * (ut0_phi + ut1_phi);
    let f0 = (psi_low + order1_psi) / ts + ts * ut0_psi;
    let f1 = (psi_low + order1_psi + order2_psi) / ts + ts * (ut0_psi + ut1_psi);
    let flux = |b: &[(crate::fields::BoostIndex, crate::fields::ScalarField)],
                ut: &crate::fields::ScalarField|
     -> f64 {
        let s1: f64 = b
            .iter()
            .filter(|(w, _)| w.len() == 1)
            .map(|(_, f)| {
                let v = l2(f);
                v * v
            })
            .sum();
        let st = l2(ut);
        (s1 / tau + tau * st * st).sqrt()
    };
    TraceRow {
        tau,
        e0,
        e1,
        f0,
        f1,
        flux_phi: flux(&fields.phi_boosts, &fields.phi_t),
        flux_psi: flux(&fields.psi_boosts, &fields.psi_t),
    }
}

/// Growth-law models for the trace fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// `log E ~ a + b log τ`; returns the power b.
    Power,
    /// `log E ~ a + b log τ + c log log τ`; returns b (and c).
    PowerLog,
    /// `log E ~ a + b log log τ`: `E ∝ (ln τ)^b`; returns the log-power b.
    Log,
    /// `log E ~ a + 2 log log τ`: fixed `E ∝ ln²τ` shape; only a is fitted.
    LogSq,
}

impl FitModel {
    pub fn name(&self) -> &'static str {
        match self {
            FitModel::Power => "power",
            FitModel::PowerLog => "power_log",
            FitModel::Log => "log",
            FitModel::LogSq => "log_sq",
        }
    }

    pub fn parse(s: &str) -> Option<FitModel> {
        match s {
            "power" => Some(FitModel::Power),
            "power_log" => Some(FitModel::PowerLog),
            "log" => Some(FitModel::Log),
            "log_sq" => Some(FitModel::LogSq),
            _ => None,
        }
    }
}

/// Fit outcome: the leading exponent (or log-power), an optional secondary
/// coefficient, and the RMS residual in log of the fitted quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub exponent: f64,
    pub secondary: Option<f64>,
    pub residual: f64,
}

/// Least-squares fit of a trace column against a growth model.
pub fn fit_growth(points: &[(f64, f64)], model: FitModel) -> Result<FitResult, SimulatorError> {
    let usable: Vec<(f64, f64)> =
        points.iter().copied().filter(|(t, v)| *t > 1.0 && *v > 0.0).collect();
    if usable.len() < 8 {
        return Err(SimulatorError::InsufficientSpan(format!("{} usable points", usable.len())));
    }
    let t_min = usable.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = usable.iter().map(|p| p.0).fold(0.0f64, f64::max);
    if t_max / t_min < 8.0 {
        return Err(SimulatorError::InsufficientSpan(format!(
            "span factor {:.2}",
            t_max / t_min
        )));
    }
    let ys: Vec<f64> = usable.iter().map(|(_, v)| v.ln()).collect();
    let design: Vec<Vec<f64>> = match model {
        FitModel::Power => usable.iter().map(|(t, _)| vec![1.0, t.ln()]).collect(),
        FitModel::PowerLog => {
            usable.iter().map(|(t, _)| vec![1.0, t.ln(), t.ln().ln()]).collect()
        }
        FitModel::Log => usable.iter().map(|(t, _)| vec![1.0, t.ln().ln()]).collect(),
        FitModel::LogSq => usable.iter().map(|(_, _)| vec![1.0]).collect(),
    };
    // for the fixed-shape model, shift the data instead of adding a column
    let ys: Vec<f64> = match model {
        FitModel::LogSq => usable
            .iter()
            .zip(&ys)
            .map(|((t, _), y)| y - 2.0 * t.ln().ln())
            .collect(),
        _ => ys,
    };
    let coeffs = least_squares(&design, &ys)
        .ok_or_else(|| SimulatorError::Other("singular least-squares system".into()))?;
    let mut ss = 0.0;
    for (row, y) in design.iter().zip(&ys) {
        let fit: f64 = row.iter().zip(&coeffs).map(|(a, c)| a * c).sum();
        ss += (y - fit) * (y - fit);
    }
    let residual = (ss / ys.len() as f64).sqrt();
    let (exponent, secondary) = match model {
        FitModel::Power => (coeffs[1], None),
        FitModel::PowerLog => (coeffs[1], Some(coeffs[2])),
        FitModel::Log => (coeffs[1], None),
        FitModel::LogSq => (2.0, Some(coeffs[0])),
    };
    Ok(FitResult { model, exponent, secondary, residual })
}

/// Dense normal-equation solve for tiny systems (≤ 3 unknowns).
fn least_squares(design: &[Vec<f64>], ys: &[f64]) -> Option<Vec<f64>> {
    let m = design[0].len();
    let mut ata = vec![vec![0.0; m]; m];
    let mut atb = vec![0.0; m];
    for (row, y) in design.iter().zip(ys) {
        for i in 0..m {
            for j in 0..m {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting
    for k in 0..m {
        let piv = (k..m).max_by(|&a, &b| ata[a][k].abs().total_cmp(&ata[b][k].abs()))?;
        if ata[piv][k].abs() < 1e-300 {
            return None;
        }
        ata.swap(k, piv);
        atb.swap(k, piv);
        for r in k + 1..m {
            let f = ata[r][k] / ata[k][k];
            for c in k..m {
                ata[r][c] -= f * ata[k][c];
            }
            atb[r] -= f * atb[k];
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let mut s = atb[k];
        for c in k + 1..m {
            s -= ata[k][c] * x[c];
        }
        x[k] = s / ata[k][k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taus() -> Vec<f64> {
        vec![2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0]
    }

    #[test]
    fn pure_power_recovered() {
        let pts: Vec<(f64, f64)> = taus().iter().map(|&t| (t, 3.0 * t * t)).collect();
        let fit = fit_growth(&pts, FitModel::Power).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-6, "{}", fit.exponent);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn log_trace_discriminates_models() {
        let pts: Vec<(f64, f64)> = taus().iter().map(|&t| (t, t.ln())).collect();
        let log_fit = fit_growth(&pts, FitModel::Log).unwrap();
        assert!(log_fit.residual < 1e-10, "log residual {}", log_fit.residual);
        assert!((log_fit.exponent - 1.0).abs() < 1e-9);
        let pow_fit = fit_growth(&pts, FitModel::Power).unwrap();
        assert!(
            pow_fit.exponent > 0.0 && pow_fit.exponent < 0.5,
            "power exponent {}",
            pow_fit.exponent
        );
        assert!(pow_fit.residual > log_fit.residual);
    }

    #[test]
    fn constant_trace_has_zero_exponent() {
        let pts: Vec<(f64, f64)> = taus().iter().map(|&t| (t, 7.5)).collect();
        let fit = fit_growth(&pts, FitModel::Power).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
    }

    #[test]
    fn log_sq_shape() {
        let pts: Vec<(f64, f64)> = taus().iter().map(|&t| (t, 0.3 * t.ln().powi(2))).collect();
        let fit = fit_growth(&pts, FitModel::LogSq).unwrap();
        assert!(fit.residual < 1e-10);
        assert!((fit.secondary.unwrap() - 0.3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn insufficient_span_rejected() {
        let pts: Vec<(f64, f64)> = vec![(2.0, 1.0), (3.0, 1.0), (4.0, 1.0)];
        assert!(matches!(
            fit_growth(&pts, FitModel::Power),
            Err(SimulatorError::InsufficientSpan(_))
        ));
        let tight: Vec<(f64, f64)> = (0..10).map(|i| (2.0 + 0.1 * i as f64, 1.0)).collect();
        assert!(matches!(
            fit_growth(&tight, FitModel::Power),
            Err(SimulatorError::InsufficientSpan(_))
        ));
    }

    #[test]
    fn zero_sums_give_zero_row() {
        let phi = vec![0.0; sums_len(2)];
        let psi = vec![0.0; sums_len(2)];
        let row = row_from_sums(2, 4.0, &phi, &psi);
        assert_eq!(row.e0, 0.0);
        assert_eq!(row.f1, 0.0);
        assert_eq!(row.flux_phi, 0.0);
    }

    #[test]
    fn csv_columns() {
        let trace = EnergyTrace {
            dim: 2,
            rows: vec![TraceRow {
                tau: 2.0,
                e0: 1.0,
                e1: 2.0,
                f0: 3.0,
                f1: 4.0,
                flux_phi: 0.5,
                flux_psi: 0.25,
            }],
        };
        let csv = trace.to_csv();
        assert!(csv.starts_with("tau,E0,E1,F0,F1\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
