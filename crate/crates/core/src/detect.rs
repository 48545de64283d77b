//! Reduction and delocalization events on a sampled trajectory.
//!
//! A trajectory is *reduced* at `t_r` when one eigenstate population stays
//! above `1 − ε` at every stored sample of `[t_r, t_r + τ]`; it is later
//! *delocalized* at `t_d` when that same population stays below `1 − ε` for a
//! window of the same length. Windows must fit inside the record, and times are
//! always sample times.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::sde::TrajectoryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub epsilon: f64,
    pub tau: f64,
}

impl DetectorConfig {
    pub const DEFAULT_EPSILON: f64 = 0.01;

    /// `τ = 10·[π/2 − arcsin(1 − ε)]`: ten times the stay of a free Rabi
    /// oscillation above `1 − ε`.
    pub fn rabi_scaled_tau(epsilon: f64) -> f64 {
        10.0 * (FRAC_PI_2 - (1.0 - epsilon).asin())
    }

    pub fn with_epsilon(epsilon: f64) -> Self {
        Self { epsilon, tau: Self::rabi_scaled_tau(epsilon) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::invalid("detector.epsilon", format!("{} not in (0, 1/2)", self.epsilon)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid("detector.tau", format!("{} must be > 0", self.tau)));
        }
        Ok(())
    }

    fn threshold(&self) -> f64 {
        1.0 - self.epsilon
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::with_epsilon(Self::DEFAULT_EPSILON)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eigenstate {
    Plus,
    Minus,
}

impl Eigenstate {
    pub fn other(self) -> Self {
        match self {
            Eigenstate::Plus => Eigenstate::Minus,
            Eigenstate::Minus => Eigenstate::Plus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Eigenstate::Plus => "plus",
            Eigenstate::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionEvent {
    pub eigenstate: Eigenstate,
    pub t_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelocalizationEvent {
    pub from_eigenstate: Eigenstate,
    pub t_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Event {
    Reduction(ReductionEvent),
    Delocalization(DelocalizationEvent),
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::Reduction(r) => r.t_r,
            Event::Delocalization(d) => d.t_d,
        }
    }
}

/// Slack on window-edge comparisons, absorbing rounding in sample times.
const TIME_SLACK: f64 = 1e-9;

fn check_resolution(record: &TrajectoryRecord, config: &DetectorConfig) -> Result<()> {
    config.validate()?;
    let spacing = record.max_spacing();
    let limit = config.tau / 10.0;
    if spacing > limit + TIME_SLACK {
        return Err(Error::WindowUnresolvable { spacing, limit });
    }
    Ok(())
}

/// Earliest index `i ≥ first` such that `hold` is true at every sample of
/// `[times[i], times[i] + tau]`, with the window inside the record.
fn earliest_window(
    times: &[f64],
    first: usize,
    tau: f64,
    hold: impl Fn(usize) -> bool,
) -> Option<usize> {
    let horizon = *times.last()?;
    let n = times.len();
    let mut i = first;
    while i < n {
        if times[i] + tau > horizon + TIME_SLACK {
            return None;
        }
        if !hold(i) {
            i += 1;
            continue;
        }
        // `i` opens a run; find where it ends.
        let mut j = i;
        while j + 1 < n && hold(j + 1) {
            j += 1;
        }
        let covered = j + 1 == n || times[j + 1] > times[i] + tau + TIME_SLACK;
        if covered {
            return Some(i);
        }
        // Any later start inside this run needs the run to reach even further.
        i = j + 1;
    }
    None
}

fn first_index_at_or_after(times: &[f64], t: f64) -> usize {
    times.partition_point(|&s| s < t - TIME_SLACK)
}

/// Earliest reduction starting at or after `search_start`.
pub fn detect_reduction(
    record: &TrajectoryRecord,
    config: &DetectorConfig,
    search_start: f64,
) -> Result<Option<ReductionEvent>> {
    check_resolution(record, config)?;
    let times = &record.sample_times;
    let first = first_index_at_or_after(times, search_start);
    let thr = config.threshold();
    let find = |e: Eigenstate| {
        earliest_window(times, first, config.tau, |i| population(record, i, e) > thr)
    };
    // Both populations cannot exceed 1 − ε at once (ε < ½), so the two runs
    // never overlap and the earlier one wins outright.
    let hit = match (find(Eigenstate::Plus), find(Eigenstate::Minus)) {
        (Some(p), Some(m)) if m < p => Some((Eigenstate::Minus, m)),
        (Some(p), _) => Some((Eigenstate::Plus, p)),
        (None, Some(m)) => Some((Eigenstate::Minus, m)),
        (None, None) => None,
    };
    Ok(hit.map(|(eigenstate, i)| ReductionEvent { eigenstate, t_r: times[i] }))
}

/// Earliest `t_d > t_r` at which the reduced eigenstate's population stays
/// below `1 − ε` for a full window.
pub fn detect_delocalization(
    record: &TrajectoryRecord,
    reduction: &ReductionEvent,
    config: &DetectorConfig,
) -> Result<Option<DelocalizationEvent>> {
    check_resolution(record, config)?;
    let times = &record.sample_times;
    let first = times.partition_point(|&s| s <= reduction.t_r);
    let thr = config.threshold();
    let e = reduction.eigenstate;
    Ok(earliest_window(times, first, config.tau, |i| population(record, i, e) < thr)
        .map(|i| DelocalizationEvent { from_eigenstate: e, t_d: times[i] }))
}

/// Alternating reductions and delocalizations over the whole record.
///
/// Each delocalization search starts after the preceding reduction, and each
/// new reduction search starts at the preceding delocalization time.
pub fn event_history(record: &TrajectoryRecord, config: &DetectorConfig) -> Result<Vec<Event>> {
    check_resolution(record, config)?;
    let mut events = Vec::new();
    let mut start = 0.0;
    while let Some(red) = detect_reduction(record, config, start)? {
        events.push(Event::Reduction(red));
        match detect_delocalization(record, &red, config)? {
            Some(del) => {
                events.push(Event::Delocalization(del));
                start = del.t_d;
            }
            None => break,
        }
    }
    Ok(events)
}

#[inline]
fn population(record: &TrajectoryRecord, i: usize, e: Eigenstate) -> f64 {
    match e {
        Eigenstate::Plus => record.samples[i].pop_plus(),
        Eigenstate::Minus => record.samples[i].pop_minus(),
    }
}
