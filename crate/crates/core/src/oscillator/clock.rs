//! Clock-signal validation.
//!
//! A valid pair of clock signals must (1) switch abruptly, (2) sit near
//! zero on the low phase and well above it on the high phase, and (3) be
//! complementary: at most one of the two is ever appreciably positive.
//!
//! The high plateaus here are not flat: while x slides along a branch,
//! the leading signal ramps from 2 toward 1 (for p = 3). Transition
//! widths are therefore measured as the 10%-90% traversal of the step
//! relative to the *adjacent plateau minimum*, not the global amplitude,
//! and level/complementarity checks run on plateau samples outside the
//! transition windows: the plateau estimates only hold away from the
//! crossover x = p, and during a jump the lag of `u - v` behind `p - x`
//! is order one no matter how small the time scales are. The raw
//! all-sample maxima are reported alongside for inspection.

use serde::{Deserialize, Serialize};

use super::{OscillatorConfig, OscillatorError};
use crate::dynamics::{detect_crossings, CrossingEvent, Direction, Trace};

/// Pass/fail thresholds for [`validate_clock`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClockThresholds {
    /// Maximum transition width as a fraction of the period.
    pub abruptness_fraction: f64,
    /// Low-phase bound as a fraction of the high amplitude;
    /// `None` selects `max(10 * eps1, 1e-3)`.
    pub low_level_factor: Option<f64>,
    /// High-phase samples must stay above this fraction of the median
    /// high-phase level.
    pub high_phase_min_fraction: f64,
}

impl Default for ClockThresholds {
    fn default() -> Self {
        Self {
            abruptness_fraction: 0.02,
            low_level_factor: None,
            high_phase_min_fraction: 0.5,
        }
    }
}

/// Outcome of validating one trace against the three clock criteria.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClockReport {
    pub passes: bool,
    pub abruptness_pass: bool,
    pub levels_pass: bool,
    pub complementarity_pass: bool,
    /// Mean spacing of u rising edges after the transient.
    pub period: f64,
    pub high_amplitude_u: f64,
    pub high_amplitude_v: f64,
    /// Plateau-sample maxima of each signal on its low phase.
    pub low_phase_max_u: f64,
    pub low_phase_max_v: f64,
    pub high_phase_min_u: f64,
    pub high_phase_min_v: f64,
    /// Widest 10%-90% transition, absolute and as a period fraction.
    pub max_transition_width: f64,
    pub max_transition_fraction: f64,
    /// Plateau-sample maximum of min(u, v), and the raw all-sample value.
    pub complementarity_max: f64,
    pub complementarity_max_raw: f64,
    /// Absolute low-phase bound applied: factor times high amplitude.
    pub low_level_factor: f64,
    /// Fraction of post-transient samples excluded as transitions.
    pub excluded_fraction: f64,
}

/// Which clock signal is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClockSignal {
    U,
    V,
}

struct Transition {
    time: f64,
    width: f64,
    window: (f64, f64),
}

struct Analysis {
    u: Vec<f64>,
    v: Vec<f64>,
    u_events: Vec<CrossingEvent>,
    v_events: Vec<CrossingEvent>,
    t_cut: f64,
    period: f64,
    transitions: Vec<Transition>,
}

/// Merged transition exclusion windows of both clock signals over the
/// whole trace, for checks that only hold on the plateaus.
pub fn transition_windows(
    trace: &Trace,
    cfg: &OscillatorConfig,
) -> Result<Vec<(f64, f64)>, OscillatorError> {
    let analysis = analyze(trace, cfg)?;
    let mut windows: Vec<(f64, f64)> = analysis.transitions.iter().map(|t| t.window).collect();
    windows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(merge_windows(windows))
}

/// Validate the three clock criteria on a trace containing `u` and `v`.
///
/// The trace must hold at least two full periods after the transient
/// (everything before the second rising edge of u is discarded; the first
/// period is anomalous because the orbit still has to merge into the
/// relaxation cycle).
pub fn validate_clock(
    trace: &Trace,
    cfg: &OscillatorConfig,
    thresholds: &ClockThresholds,
) -> Result<ClockReport, OscillatorError> {
    let analysis = analyze(trace, cfg)?;
    let times = trace.times();
    let t_cut = analysis.t_cut;
    let period = analysis.period;

    let post_cut: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= t_cut).collect();
    let amp_u = post_cut.iter().map(|&i| analysis.u[i]).fold(0.0, f64::max);
    let amp_v = post_cut.iter().map(|&i| analysis.v[i]).fold(0.0, f64::max);

    // Abruptness over post-transient transitions.
    let mut max_width: f64 = 0.0;
    for tr in &analysis.transitions {
        if tr.time >= t_cut {
            max_width = max_width.max(tr.width);
        }
    }
    let abruptness_pass = max_width <= thresholds.abruptness_fraction * period;

    // Plateau sample set: post-transient, outside every transition window.
    let mut windows: Vec<(f64, f64)> = analysis.transitions.iter().map(|t| t.window).collect();
    windows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let windows = merge_windows(windows);
    let excluded = |t: f64| windows.iter().any(|&(a, b)| t >= a && t <= b);

    let low_factor = thresholds
        .low_level_factor
        .unwrap_or_else(|| (10.0 * cfg.eps1).max(1e-3));

    let mut low_max_u: f64 = 0.0;
    let mut low_max_v: f64 = 0.0;
    let mut high_min_u = f64::INFINITY;
    let mut high_min_v = f64::INFINITY;
    let mut highs_u = Vec::new();
    let mut highs_v = Vec::new();
    let mut comp_max: f64 = 0.0;
    let mut comp_max_raw: f64 = 0.0;
    let mut n_excluded = 0usize;

    for &i in &post_cut {
        let (t, ui, vi) = (times[i], analysis.u[i], analysis.v[i]);
        comp_max_raw = comp_max_raw.max(ui.min(vi));
        if excluded(t) {
            n_excluded += 1;
            continue;
        }
        comp_max = comp_max.max(ui.min(vi));
        if phase_is_high(&analysis.u_events, t) {
            high_min_u = high_min_u.min(ui);
            highs_u.push(ui);
        } else {
            low_max_u = low_max_u.max(ui);
        }
        if phase_is_high(&analysis.v_events, t) {
            high_min_v = high_min_v.min(vi);
            highs_v.push(vi);
        } else {
            low_max_v = low_max_v.max(vi);
        }
    }

    let median_u = median(&mut highs_u);
    let median_v = median(&mut highs_v);
    let levels_pass = low_max_u <= low_factor * amp_u
        && low_max_v <= low_factor * amp_v
        && high_min_u >= thresholds.high_phase_min_fraction * median_u
        && high_min_v >= thresholds.high_phase_min_fraction * median_v;
    let complementarity_pass = comp_max <= low_factor * amp_u.max(amp_v);

    Ok(ClockReport {
        passes: abruptness_pass && levels_pass && complementarity_pass,
        abruptness_pass,
        levels_pass,
        complementarity_pass,
        period,
        high_amplitude_u: amp_u,
        high_amplitude_v: amp_v,
        low_phase_max_u: low_max_u,
        low_phase_max_v: low_max_v,
        high_phase_min_u: high_min_u,
        high_phase_min_v: high_min_v,
        max_transition_width: max_width,
        max_transition_fraction: max_width / period,
        complementarity_max: comp_max,
        complementarity_max_raw: comp_max_raw,
        low_level_factor: low_factor,
        excluded_fraction: n_excluded as f64 / post_cut.len().max(1) as f64,
    })
}

/// The first clock signal to reach its high level *while the other one is
/// low*, or `None` when neither ever does. The qualifier matters: launched
/// off the manifold (say from u = v = 0) both species shoot up together
/// for a few milliseconds until the annihilation resolves the race, and
/// that startup spike must not count as a phase. A genuinely leading
/// signal always has a near-zero complement, however short its phase is
/// (merging right next to a fold makes the first phase arbitrarily brief).
pub fn first_clock_signal(
    trace: &Trace,
    cfg: &OscillatorConfig,
) -> Result<Option<ClockSignal>, OscillatorError> {
    let u = trace.series("u")?;
    let v = trace.series("v")?;
    // Half the fold-level plateau value; positive for 2 < p < 4.
    let (tau_u, tau_v) = if cfg.p > 2.0 && cfg.p < 4.0 {
        (0.5 * (cfg.p - 2.0), 0.5 * (4.0 - cfg.p))
    } else {
        let mid = |s: &[f64]| {
            let (lo, hi) = s
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
                    (l.min(x), h.max(x))
                });
            0.5 * (lo + hi)
        };
        (mid(&u), mid(&v))
    };
    for i in 0..u.len() {
        if u[i] > tau_u && v[i] < 0.1 * tau_v {
            return Ok(Some(ClockSignal::U));
        }
        if v[i] > tau_v && u[i] < 0.1 * tau_u {
            return Ok(Some(ClockSignal::V));
        }
    }
    Ok(None)
}

fn analyze(trace: &Trace, cfg: &OscillatorConfig) -> Result<Analysis, OscillatorError> {
    let u = trace.series("u")?;
    let v = trace.series("v")?;
    let times = trace.times();
    let dt = trace.sample_interval();

    let u_events = mid_range_events(trace, "u", &u)?;
    let v_events = mid_range_events(trace, "v", &v)?;

    let u_rises: Vec<f64> = u_events
        .iter()
        .filter(|e| e.direction == Direction::Rising)
        .map(|e| e.time)
        .collect();
    if u_rises.len() < 2 {
        return Err(OscillatorError::NoOscillation {
            edges: u_rises.len(),
            needed: 2,
        });
    }
    let t_cut = u_rises[1];
    let edges: Vec<f64> = u_rises.iter().copied().filter(|&t| t >= t_cut).collect();
    if edges.len() < 3 {
        return Err(OscillatorError::NoOscillation {
            edges: edges.len(),
            needed: 3,
        });
    }
    let period = (edges[edges.len() - 1] - edges[0]) / (edges.len() - 1) as f64;

    let mut transitions = Vec::new();
    for (values, events) in [(&u, &u_events), (&v, &v_events)] {
        for ev in events.iter() {
            transitions.push(measure_transition(times, values, ev, period, dt, cfg));
        }
    }

    Ok(Analysis {
        u,
        v,
        u_events,
        v_events,
        t_cut,
        period,
        transitions,
    })
}

fn mid_range_events(
    trace: &Trace,
    name: &str,
    values: &[f64],
) -> Result<Vec<CrossingEvent>, OscillatorError> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
            (l.min(x), h.max(x))
        });
    if !(hi > lo) {
        return Err(OscillatorError::NoOscillation { edges: 0, needed: 2 });
    }
    let tau = 0.5 * (lo + hi);
    let band = 0.2 * (hi - lo);
    Ok(detect_crossings(trace, name, tau, band)?)
}

/// Measure the 10%-90% width of one transition against the minimum of the
/// adjacent plateau (the plateau preceding a fall, following a rise), and
/// derive the exclusion window: the settling tail past a transition decays
/// at rate eta1/eps2, so the pad includes eight of those e-folds.
fn measure_transition(
    times: &[f64],
    values: &[f64],
    ev: &CrossingEvent,
    period: f64,
    dt: f64,
    cfg: &OscillatorConfig,
) -> Transition {
    let probe = 0.15 * period;
    let gap = (2.0 * dt).max(1e-3 * period);
    let (plateau_a, plateau_b) = match ev.direction {
        Direction::Rising => (ev.time + gap, ev.time + probe),
        Direction::Falling => (ev.time - probe, ev.time - gap),
    };
    let plateau_min = window_min(times, values, plateau_a, plateau_b);

    let width = plateau_min
        .and_then(|level| {
            let thr10 = 0.1 * level;
            let thr90 = 0.9 * level;
            let lo_t = ev.time - probe;
            let hi_t = ev.time + probe;
            let downward = ev.direction == Direction::Falling;
            let t_a = nearest_crossing(times, values, lo_t, hi_t, thr10, downward, ev.time)?;
            let t_b = nearest_crossing(times, values, lo_t, hi_t, thr90, downward, ev.time)?;
            Some((t_a - t_b).abs())
        })
        // No measurable step within the probe: treat as maximally sluggish.
        .unwrap_or(probe);

    let pad = (2.0 * width).max(8.0 * cfg.eps2 / cfg.eta1).max(2.0 * dt);
    // Cap so that a sluggish signal cannot blanket the whole trace with
    // exclusions and pass the plateau checks vacuously.
    let half = (width + pad).min(0.2 * period);
    Transition {
        time: ev.time,
        width,
        window: (ev.time - half, ev.time + half),
    }
}

fn window_min(times: &[f64], values: &[f64], a: f64, b: f64) -> Option<f64> {
    let lo = times.partition_point(|&t| t < a);
    let hi = times.partition_point(|&t| t <= b);
    values[lo..hi].iter().copied().reduce(f64::min)
}

/// Interpolated crossing of `thr` (downward or upward) nearest to
/// `anchor` within [lo_t, hi_t].
fn nearest_crossing(
    times: &[f64],
    values: &[f64],
    lo_t: f64,
    hi_t: f64,
    thr: f64,
    downward: bool,
    anchor: f64,
) -> Option<f64> {
    let lo = times.partition_point(|&t| t < lo_t).max(1);
    let hi = times.partition_point(|&t| t <= hi_t);
    let mut best: Option<f64> = None;
    for i in lo..hi {
        let (a, b) = (values[i - 1], values[i]);
        let crossed = if downward {
            a > thr && b <= thr
        } else {
            a < thr && b >= thr
        };
        if crossed {
            let frac = if a == b { 0.5 } else { (thr - a) / (b - a) };
            let t = times[i - 1] + frac * (times[i] - times[i - 1]);
            if best.is_none_or(|prev| (t - anchor).abs() < (prev - anchor).abs()) {
                best = Some(t);
            }
        }
    }
    best
}

fn merge_windows(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (a, b) in sorted {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
}

/// Phase of a signal at time `t` from its event history: high after a
/// rising edge, low after a falling one, and the opposite of the first
/// event before any event fired.
fn phase_is_high(events: &[CrossingEvent], t: f64) -> bool {
    let idx = events.partition_point(|e| e.time <= t);
    if idx == 0 {
        events
            .first()
            .map(|e| e.direction == Direction::Falling)
            .unwrap_or(false)
    } else {
        events[idx - 1].direction == Direction::Rising
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}
