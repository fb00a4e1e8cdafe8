//! Time series produced by integration runs, plus event extraction.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Time-ordered samples of all state components from one run.
/// Immutable; times are strictly increasing.
#[derive(Clone, Debug)]
pub struct Trace {
    species_names: Vec<String>,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    min_before_clamp: f64,
}

impl Trace {
    pub fn new(species_names: Vec<String>, times: Vec<f64>, states: Vec<Vec<f64>>) -> Self {
        Self::with_min_before_clamp(species_names, times, states, f64::INFINITY)
    }

    pub(crate) fn with_min_before_clamp(
        species_names: Vec<String>,
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        min_before_clamp: f64,
    ) -> Self {
        assert_eq!(times.len(), states.len(), "one state row per time");
        assert!(
            times.windows(2).all(|w| w[0] < w[1]),
            "times must be strictly increasing"
        );
        Self {
            species_names,
            times,
            states,
            min_before_clamp,
        }
    }

    pub fn species_names(&self) -> &[String] {
        &self.species_names
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn sample_interval(&self) -> f64 {
        if self.times.len() >= 2 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    /// Deepest pre-clamp value seen during integration (diagnostic for the
    /// nonnegativity guarantee). `INFINITY` for hand-built traces.
    pub fn min_before_clamp(&self) -> f64 {
        self.min_before_clamp
    }

    pub fn index_of(&self, species: &str) -> Result<usize, DynamicsError> {
        self.species_names
            .iter()
            .position(|n| n == species)
            .ok_or_else(|| DynamicsError::UnknownSpecies(species.into()))
    }

    /// Copy of one species column.
    pub fn series(&self, species: &str) -> Result<Vec<f64>, DynamicsError> {
        let i = self.index_of(species)?;
        Ok(self.states.iter().map(|row| row[i]).collect())
    }

    pub fn min_max(&self, species: &str) -> Result<(f64, f64), DynamicsError> {
        let i = self.index_of(species)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &self.states {
            lo = lo.min(row[i]);
            hi = hi.max(row[i]);
        }
        Ok((lo, hi))
    }

    /// CSV with header `t,<species...>`, one row per sample, 11 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for name in &self.species_names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (t, row) in self.times.iter().zip(&self.states) {
            write!(w, "{t:.10e}")?;
            for v in row {
                write!(w, ",{v:.10e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

// JSON mirrors the CSV content: {"header": ["t", names...], "rows": [[...]]}.
impl Serialize for Trace {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            header: Vec<&'a str>,
            rows: Vec<Vec<f64>>,
        }
        let mut header = vec!["t"];
        header.extend(self.species_names.iter().map(|s| s.as_str()));
        let rows = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(t, row)| {
                let mut r = Vec::with_capacity(row.len() + 1);
                r.push(*t);
                r.extend_from_slice(row);
                r
            })
            .collect();
        Repr { header, rows }.serialize(serializer)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
}

/// A threshold crossing located by linear interpolation between samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub time: f64,
    pub species: String,
    pub direction: Direction,
}

/// Hysteresis threshold detector: a rising event fires when the signal
/// passes above `threshold + band` having last been below
/// `threshold - band`; falling is symmetric. Event times interpolate the
/// crossing of `threshold` itself.
pub fn detect_crossings(
    trace: &Trace,
    species: &str,
    threshold: f64,
    band: f64,
) -> Result<Vec<CrossingEvent>, DynamicsError> {
    if band < 0.0 {
        return Err(DynamicsError::InvalidInput(format!(
            "hysteresis band must be nonnegative, got {band}"
        )));
    }
    let idx = trace.index_of(species)?;
    let values: Vec<f64> = trace.states().iter().map(|r| r[idx]).collect();
    let times = trace.times();

    // Initial arm state; samples inside the dead band leave it undecided.
    let mut state: Option<bool> = values.first().and_then(|&v| {
        if v > threshold + band {
            Some(true)
        } else if v < threshold - band {
            Some(false)
        } else {
            None
        }
    });

    let mut events = Vec::new();
    for i in 1..values.len() {
        let v = values[i];
        let fired = match state {
            Some(false) | None if v > threshold + band => Some(Direction::Rising),
            Some(true) | None if v < threshold - band => Some(Direction::Falling),
            _ => None,
        };
        match fired {
            Some(direction) => {
                // Only a LOW -> HIGH confirmation with a known prior state
                // is a real event; first decisions just arm the detector.
                if state.is_some() {
                    if let Some(time) =
                        interpolate_crossing(times, &values, i, threshold, direction)
                    {
                        events.push(CrossingEvent {
                            time,
                            species: species.into(),
                            direction,
                        });
                    }
                }
                state = Some(direction == Direction::Rising);
            }
            None => {}
        }
    }
    Ok(events)
}

/// Walk back from the confirming sample to the nearest pair bracketing the
/// threshold in the event direction and interpolate the crossing time.
fn interpolate_crossing(
    times: &[f64],
    values: &[f64],
    confirm: usize,
    threshold: f64,
    direction: Direction,
) -> Option<f64> {
    let crossed = |a: f64, b: f64| match direction {
        Direction::Rising => a < threshold && b >= threshold,
        Direction::Falling => a > threshold && b <= threshold,
    };
    let mut i = confirm;
    while i >= 1 {
        let (a, b) = (values[i - 1], values[i]);
        if crossed(a, b) {
            let frac = if b == a { 0.5 } else { (threshold - a) / (b - a) };
            return Some(times[i - 1] + frac * (times[i] - times[i - 1]));
        }
        i -= 1;
    }
    None
}

/// Complete high phases of one species: (rise time, fall time) pairs from
/// the hysteresis detector, discarding a leading fall and a trailing
/// unmatched rise.
pub fn high_phases(
    trace: &Trace,
    species: &str,
    threshold: f64,
    band: f64,
) -> Result<Vec<(f64, f64)>, DynamicsError> {
    let events = detect_crossings(trace, species, threshold, band)?;
    let mut phases = Vec::new();
    let mut rise: Option<f64> = None;
    for ev in events {
        match ev.direction {
            Direction::Rising => rise = Some(ev.time),
            Direction::Falling => {
                if let Some(r) = rise.take() {
                    phases.push((r, ev.time));
                }
            }
        }
    }
    Ok(phases)
}

/// Mean of the final `window` time units if the species deviates from that
/// mean by at most `tol` there; `None` when it has not settled.
pub fn settle_value(
    trace: &Trace,
    species: &str,
    window: f64,
    tol: f64,
) -> Result<Option<f64>, DynamicsError> {
    if !(window > 0.0) || window >= trace.duration() {
        return Err(DynamicsError::InvalidInput(format!(
            "window {window} must be positive and shorter than the trace duration {}",
            trace.duration()
        )));
    }
    let idx = trace.index_of(species)?;
    let t_start = trace.times().last().unwrap() - window;
    let tail: Vec<f64> = trace
        .times()
        .iter()
        .zip(trace.states())
        .filter(|(t, _)| **t >= t_start)
        .map(|(_, row)| row[idx])
        .collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let max_dev = tail
        .iter()
        .map(|v| (v - mean).abs())
        .fold(0.0f64, f64::max);
    Ok(if max_dev <= tol { Some(mean) } else { None })
}
