//! Clock period prediction and measurement.
//!
//! On the slow branches the driving signal obeys
//! `dy/dx = phi'(x)` and `dy/dt = eta1 (x - ell) y` with `y = phi(x)`, so
//! the branch transit times are
//!
//! ```text
//! T_low  = integral_1^2 phi'(x) / (eta1 (x - ell) phi(x)) dx
//! T_high = integral_5^4 phi'(x) / (eta1 (x - ell) phi(x)) dx
//! ```
//!
//! and the fast jumps contribute only O(eps1) corrections that are ignored.
//! The leading clock signal is high exactly while x transits a branch, so
//! the measured high-phase durations T1, T2 approximate T_low, T_high.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{high_phases, DynamicsError, Trace};
use crate::oscillator::CubicGeometry;

#[derive(Debug, Error)]
pub enum PeriodError {
    #[error("ell = {0} is outside the oscillatory range (2, 4); the integrand has a pole on the branch")]
    EllOutsideRange(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("quadrature did not reach tolerance {tol:.3e}; error estimate {err:.3e}")]
    QuadratureNoConvergence { tol: f64, err: f64 },
    #[error("insufficient oscillation: species `{species}` has {found} complete high phase(s) after dropping the first, need {needed}")]
    InsufficientOscillation {
        species: String,
        found: usize,
        needed: usize,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Branch transit predictions with the quadrature error estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PeriodPrediction {
    /// Low-amplitude branch transit time (x from 1 to 2).
    pub t_low: f64,
    /// High-amplitude branch transit time (x from 5 to 4).
    pub t_high: f64,
    /// Sum of the two absolute quadrature error estimates.
    pub quadrature_error: f64,
}

/// Prediction-versus-measurement summary for one trace.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PeriodReport {
    pub t_low_predicted: f64,
    pub t_high_predicted: f64,
    /// Mean duration of u-high phases (first one discarded).
    pub t1_measured: f64,
    /// Mean duration of v-high phases (first one discarded).
    pub t2_measured: f64,
    pub rel_err_low: f64,
    pub rel_err_high: f64,
    pub quadrature_error: f64,
}

/// Predict the branch transit times by adaptive quadrature to absolute
/// tolerance `quad_tol`. Requires `2 < ell < 4` so the integrand pole at
/// `x = ell` stays off both branches.
pub fn predict_periods(
    ell: f64,
    eta1: f64,
    quad_tol: f64,
) -> Result<PeriodPrediction, PeriodError> {
    if !(ell > 2.0 && ell < 4.0) {
        return Err(PeriodError::EllOutsideRange(ell));
    }
    if !(eta1 > 0.0) || !eta1.is_finite() {
        return Err(PeriodError::InvalidInput(format!(
            "eta1 must be positive, got {eta1}"
        )));
    }
    if !(quad_tol > 0.0) {
        return Err(PeriodError::InvalidInput(format!(
            "quad_tol must be positive, got {quad_tol}"
        )));
    }
    let geom = CubicGeometry::default();
    let integrand = move |x: f64| geom.phi_prime(x) / (eta1 * (x - ell) * geom.phi(x));

    let (t_low, e_low) = adaptive_gk15(&integrand, 1.0, 2.0, quad_tol)?;
    // The high branch runs from x = 5 down to x = 4.
    let (neg_t_high, e_high) = adaptive_gk15(&integrand, 4.0, 5.0, quad_tol)?;
    Ok(PeriodPrediction {
        t_low,
        t_high: -neg_t_high,
        quadrature_error: e_low + e_high,
    })
}

/// Half of the plateau value each clock signal holds at the fold, the
/// level separating its high phase from near-zero for 2 < p < 4.
pub fn phase_thresholds(p: f64) -> (f64, f64) {
    (0.5 * (p - 2.0), 0.5 * (4.0 - p))
}

/// Measure mean u-high and v-high durations from a trace. The first high
/// phase of each signal is discarded (the first period is anomalous) and
/// at least two complete phases must remain.
pub fn measure_periods(trace: &Trace, p: f64) -> Result<(f64, f64), PeriodError> {
    if !(p > 2.0 && p < 4.0) {
        return Err(PeriodError::InvalidInput(format!(
            "p must lie in (2, 4) to separate the plateaus, got {p}"
        )));
    }
    let (tau_u, tau_v) = phase_thresholds(p);
    let t1 = mean_high_duration(trace, "u", tau_u)?;
    let t2 = mean_high_duration(trace, "v", tau_v)?;
    Ok((t1, t2))
}

fn mean_high_duration(trace: &Trace, species: &str, tau: f64) -> Result<f64, PeriodError> {
    let phases = high_phases(trace, species, tau, 0.5 * tau)?;
    if phases.len() < 3 {
        return Err(PeriodError::InsufficientOscillation {
            species: species.into(),
            found: phases.len().saturating_sub(1),
            needed: 2,
        });
    }
    let durations: Vec<f64> = phases[1..].iter().map(|(a, b)| b - a).collect();
    Ok(durations.iter().sum::<f64>() / durations.len() as f64)
}

/// Predict and measure in one report.
pub fn period_report(
    trace: &Trace,
    ell: f64,
    eta1: f64,
    p: f64,
    quad_tol: f64,
) -> Result<PeriodReport, PeriodError> {
    let pred = predict_periods(ell, eta1, quad_tol)?;
    let (t1, t2) = measure_periods(trace, p)?;
    Ok(PeriodReport {
        t_low_predicted: pred.t_low,
        t_high_predicted: pred.t_high,
        t1_measured: t1,
        t2_measured: t2,
        rel_err_low: (t1 - pred.t_low).abs() / pred.t_low,
        rel_err_high: (t2 - pred.t_high).abs() / pred.t_high,
        quadrature_error: pred.quadrature_error,
    })
}

// 15-point Kronrod extension of 7-point Gauss on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// One G7/K15 panel: (kronrod value, |kronrod - gauss| error proxy).
fn gk15_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = WGK[7] * f(center);
    let mut gauss = WG[3] * f(center);
    for (i, &x) in XGK.iter().enumerate().take(7) {
        let lo = f(center - half * x);
        let hi = f(center + half * x);
        kronrod += WGK[i] * (lo + hi);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (lo + hi);
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Globally adaptive bisection on the panel error proxy, to absolute
/// tolerance `tol`.
pub fn adaptive_gk15(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(f64, f64), PeriodError> {
    const MAX_PANELS: usize = 4096;
    let (v, e) = gk15_panel(f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            let total: f64 = panels.iter().map(|p| p.2).sum();
            return Ok((total, total_err));
        }
        if panels.len() >= MAX_PANELS {
            return Err(PeriodError::QuadratureNoConvergence {
                tol,
                err: total_err,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15_panel(f, pa, mid);
        let (v2, e2) = gk15_panel(f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Trace;

    #[test]
    fn quadrature_exact_on_polynomials() {
        // degree <= 13 is exact for G7; x^4 over [0, 2] = 6.4.
        let (v, _) = adaptive_gk15(&|x: f64| x.powi(4), 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 6.4).abs() < 1e-12);
    }

    #[test]
    fn quadrature_handles_oscillatory_integrand() {
        // integral_0^pi sin = 2.
        let (v, e) = adaptive_gk15(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12, "value {v}, err est {e}");
    }

    #[test]
    fn reference_prediction_matches_reported_values() {
        let pred = predict_periods(3.0, 0.1, 1e-10).unwrap();
        assert!((pred.t_low - 10.470).abs() / 10.470 < 5e-3, "{}", pred.t_low);
        assert!((pred.t_high - 9.193).abs() / 9.193 < 5e-3, "{}", pred.t_high);
        assert!(pred.t_low > 0.0 && pred.t_high > 0.0);
    }

    #[test]
    fn period_scales_inversely_with_eta1() {
        let p1 = predict_periods(3.0, 0.1, 1e-11).unwrap();
        let p2 = predict_periods(3.0, 0.2, 1e-11).unwrap();
        assert!((p2.t_low - 0.5 * p1.t_low).abs() < 1e-8);
        assert!((p2.t_high - 0.5 * p1.t_high).abs() < 1e-8);
    }

    #[test]
    fn ell_outside_range_is_rejected() {
        assert!(matches!(
            predict_periods(1.5, 0.1, 1e-10),
            Err(PeriodError::EllOutsideRange(_))
        ));
        assert!(matches!(
            predict_periods(4.0, 0.1, 1e-10),
            Err(PeriodError::EllOutsideRange(_))
        ));
    }

    #[test]
    fn halving_tolerance_moves_result_less_than_error_estimate() {
        let geom = CubicGeometry::default();
        let f = |x: f64| geom.phi_prime(x) / (0.1 * (x - 2.5) * geom.phi(x));
        let (v1, e1) = adaptive_gk15(&f, 1.0, 2.0, 1e-6).unwrap();
        let (v2, _) = adaptive_gk15(&f, 1.0, 2.0, 5e-7).unwrap();
        assert!((v1 - v2).abs() <= e1.max(1e-12));
    }

    fn square_wave_trace(period: f64, duty: f64, horizon: f64) -> Trace {
        let dt = 0.01;
        let n = (horizon / dt) as usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let states = times
            .iter()
            .map(|&t| {
                let ph = (t / period).fract();
                let u = if ph < duty { 2.0 } else { 0.001 };
                let v = if ph < duty { 0.001 } else { 2.0 };
                vec![u, v]
            })
            .collect();
        Trace::new(vec!["u".into(), "v".into()], times, states)
    }

    #[test]
    fn square_wave_durations_recovered() {
        let trace = square_wave_trace(4.0, 0.5, 40.0);
        let (t1, t2) = measure_periods(&trace, 3.0).unwrap();
        assert!((t1 - 2.0).abs() <= 0.011, "t1 = {t1}");
        assert!((t2 - 2.0).abs() <= 0.011, "t2 = {t2}");
    }

    #[test]
    fn constant_trace_is_insufficient() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let states = times.iter().map(|_| vec![1.0, 1.0]).collect();
        let trace = Trace::new(vec!["u".into(), "v".into()], times, states);
        assert!(matches!(
            measure_periods(&trace, 3.0),
            Err(PeriodError::InsufficientOscillation { .. })
        ));
    }
}
