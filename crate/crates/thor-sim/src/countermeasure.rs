//! Warm-keeper countermeasure.
//!
//! A keeper thread issues a dense TMUL every `keep_interval_ns`, which must
//! be shorter than the Warm -> Cold1 decay interval. The unit therefore
//! never leaves the warm state and, once the frequency ramp saturates,
//! every query runs entirely at the top ladder level where per-instruction
//! cost is data-independent — the timing channel carries no signal. The
//! price is that idle time draws kept-warm power instead of decaying.

use crate::error::{Result, ThorError};
use crate::power::{SegmentKind, TraceSegment};
use crate::tile::TilePattern;
use crate::victim::{TimedEndpoint, TimingSample, Victim};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeeperConfig {
    /// Period of the keeper's touch instructions, ns.
    pub keep_interval_ns: f64,
    /// Disabled keeper = passthrough to the bare victim, bit for bit.
    pub enabled: bool,
}

impl Default for KeeperConfig {
    fn default() -> Self {
        KeeperConfig {
            keep_interval_ns: 500.0,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtectedVictim {
    inner: Victim,
    keeper: KeeperConfig,
}

/// Wraps a victim with the keeper. Errors if the keep interval could not
/// actually keep the unit warm.
pub fn wrap_victim(mut victim: Victim, keeper: KeeperConfig) -> Result<ProtectedVictim> {
    if keeper.enabled {
        let decay = victim.sim.model().cfg.state_decay_intervals.cold1;
        if !(keeper.keep_interval_ns > 0.0 && keeper.keep_interval_ns < decay) {
            return Err(ThorError::Config(format!(
                "keep_interval_ns ({}) must be positive and below the warm decay interval ({decay})",
                keeper.keep_interval_ns
            )));
        }
        // The keeper has been running since boot: ramp the unit to the top
        // level with real dense touches before the victim goes live.
        let top = victim.sim.model().levels.len() - 1;
        while victim.sim.state().ladder_index < top {
            victim.sim.tmul_step(0.0)?;
        }
    }
    Ok(ProtectedVictim { inner: victim, keeper })
}

impl ProtectedVictim {
    pub fn keeper(&self) -> &KeeperConfig {
        &self.keeper
    }

    pub fn inner(&self) -> &Victim {
        &self.inner
    }
}

impl TimedEndpoint for ProtectedVictim {
    fn query(&mut self, input: &TilePattern) -> TimingSample {
        self.inner.query(input)
    }

    fn wait(&mut self, duration_ns: f64) -> Result<()> {
        if !self.keeper.enabled {
            return self.inner.wait(duration_ns);
        }
        if !(duration_ns >= 0.0) {
            return Err(ThorError::Argument(format!(
                "idle duration must be non-negative, got {duration_ns}"
            )));
        }
        let ops = (duration_ns / self.keeper.keep_interval_ns).floor() as u64 + 1;
        if let Some(trace) = self.inner.trace.as_mut() {
            trace.push(TraceSegment {
                kind: SegmentKind::WarmKept,
                duration_ns,
            });
        }
        self.inner.sim.keeper_touch(ops, duration_ns);
        Ok(())
    }

    fn now_ns(&self) -> f64 {
        self.inner.now_ns()
    }
}
