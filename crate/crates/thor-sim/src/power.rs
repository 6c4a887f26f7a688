//! Relative power accounting for the countermeasure study.
//!
//! Traces are sequences of (kind, duration) segments. Powers are unitless,
//! normalized so active TMUL work draws 1.0; what matters downstream is the
//! energy ratio between a keeper-protected trace and its baseline.

use crate::error::{Result, ThorError};
use crate::sim::{PerformanceState, TimingModelConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind {
    /// The unit is executing TMUL work.
    Active,
    /// The unit is idle and has decayed to the given state.
    Idle(PerformanceState),
    /// The unit is idle but pinned warm by the keeper thread. The draw
    /// includes the keeper's own touch instructions.
    WarmKept,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSegment {
    pub kind: SegmentKind,
    pub duration_ns: f64,
}

/// Idle draw per power state, relative to active work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePower {
    pub warm: f64,
    pub cold1: f64,
    pub cold2: f64,
    pub cold3: f64,
    pub cold4: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerModel {
    pub active_power: f64,
    pub state_power: StatePower,
    /// If positive, used as the baseline energy instead of integrating the
    /// baseline trace (lets reports compare against a fixed reference).
    pub baseline_trace_energy: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            active_power: 1.0,
            state_power: StatePower {
                warm: 1.0795,
                cold1: 0.99,
                cold2: 0.97,
                cold3: 0.954,
                cold4: 0.93,
            },
            baseline_trace_energy: 0.0,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        let p = &self.state_power;
        let ordered =
            p.warm > p.cold1 && p.cold1 >= p.cold2 && p.cold2 >= p.cold3 && p.cold3 > p.cold4;
        if !(self.active_power > 0.0 && p.cold4 > 0.0 && ordered) {
            return Err(ThorError::Config(
                "state powers must be positive and decrease from warm to cold4".into(),
            ));
        }
        Ok(())
    }

    fn power(&self, kind: SegmentKind) -> f64 {
        match kind {
            SegmentKind::Active => self.active_power,
            SegmentKind::WarmKept => self.state_power.warm,
            SegmentKind::Idle(s) => match s {
                PerformanceState::Warm => self.state_power.warm,
                PerformanceState::Cold1 => self.state_power.cold1,
                PerformanceState::Cold2 => self.state_power.cold2,
                PerformanceState::Cold3 => self.state_power.cold3,
                PerformanceState::Cold4 => self.state_power.cold4,
            },
        }
    }

    /// Integrates power over a trace; energy in (relative power) * ns.
    pub fn trace_energy(&self, trace: &[TraceSegment]) -> f64 {
        trace
            .iter()
            .map(|seg| self.power(seg.kind) * seg.duration_ns)
            .sum()
    }
}

/// Percentage energy overhead of a protected trace over its baseline.
pub fn power_overhead(
    protected: &[TraceSegment],
    baseline: &[TraceSegment],
    model: &PowerModel,
) -> Result<f64> {
    let base = if model.baseline_trace_energy > 0.0 {
        model.baseline_trace_energy
    } else {
        model.trace_energy(baseline)
    };
    if base <= 0.0 {
        return Err(ThorError::Argument(
            "baseline trace has zero energy".into(),
        ));
    }
    Ok((model.trace_energy(protected) / base - 1.0) * 100.0)
}

/// Splits an idle interval into decay-state segments. `gap_start_ns` is how
/// long the unit had already been idle when the interval began, so that
/// consecutive idle intervals compose correctly.
pub fn idle_segments(
    cfg: &TimingModelConfig,
    gap_start_ns: f64,
    duration_ns: f64,
) -> Vec<TraceSegment> {
    let d = &cfg.state_decay_intervals;
    let bounds = [0.0, d.cold1, d.cold2, d.cold3, d.cold4, f64::INFINITY];
    let states = [
        PerformanceState::Warm,
        PerformanceState::Cold1,
        PerformanceState::Cold2,
        PerformanceState::Cold3,
        PerformanceState::Cold4,
    ];
    let start = gap_start_ns.max(0.0);
    let end = start + duration_ns;
    let mut out = Vec::new();
    for (i, &state) in states.iter().enumerate() {
        let lo = start.max(bounds[i]);
        let hi = end.min(bounds[i + 1]);
        if hi > lo {
            out.push(TraceSegment {
                kind: SegmentKind::Idle(state),
                duration_ns: hi - lo,
            });
        }
    }
    out
}
