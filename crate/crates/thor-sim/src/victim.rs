//! The victim: a matmul service with a secret weight sparsity mask.
//!
//! Each query multiplies the attacker-chosen input row against the secret
//! weight row for a fixed number of TMUL instructions and reports how long
//! that took on the reference clock, plus Gaussian measurement noise. Only
//! the zero/non-zero mask of the weights influences timing; the weight
//! values themselves are irrelevant to the channel.

use crate::error::{Result, ThorError};
use crate::power::{idle_segments, SegmentKind, TraceSegment};
use crate::sim::{AmxSim, PerformanceState, TimingModel};
use crate::tile::{effective_sparsity, TilePattern, TILE_ELEMS};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Secret weight row: mask plus concrete int8 values (non-zero exactly at
/// masked positions).
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub mask: TilePattern,
    pub values: [i8; TILE_ELEMS],
}

impl WeightVector {
    pub fn generate<R: RngCore>(mask: TilePattern, rng: &mut R) -> Self {
        let mut values = [0i8; TILE_ELEMS];
        for (i, v) in values.iter_mut().enumerate() {
            if mask.get(i) {
                // Uniform over non-zero int8.
                let mut x = 0i8;
                while x == 0 {
                    x = rng.gen::<i8>();
                }
                *v = x;
            }
        }
        WeightVector { mask, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VictimConfig {
    /// TMUL instructions executed per query.
    pub m_multiplications: u64,
    pub rng_seed: u64,
    /// Record a power trace of queries and idle gaps (off by default; the
    /// attack loops don't need it).
    pub record_power_trace: bool,
}

impl Default for VictimConfig {
    fn default() -> Self {
        VictimConfig {
            m_multiplications: 40,
            rng_seed: 0,
            record_power_trace: false,
        }
    }
}

/// One timed query response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSample {
    /// Measured latency in reference cycles, noise included.
    pub latency_ref_cycles: f64,
    /// Simulated-clock time the query consumed, ns (noiseless).
    pub clock_cost_ns: f64,
}

/// Anything an attacker can probe: a timed query interface plus the ability
/// to let simulated time pass.
pub trait TimedEndpoint {
    fn query(&mut self, input: &TilePattern) -> TimingSample;
    fn wait(&mut self, duration_ns: f64) -> Result<()>;
    fn now_ns(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct Victim {
    pub(crate) sim: AmxSim,
    weights: WeightVector,
    m: u64,
    sigma: f64,
    rng: ChaCha12Rng,
    pub(crate) trace: Option<Vec<TraceSegment>>,
}

impl Victim {
    pub fn new(mask: TilePattern, cfg: &VictimConfig, model: &TimingModel) -> Result<Self> {
        if cfg.m_multiplications == 0 {
            return Err(ThorError::Config(
                "m_multiplications must be >= 1".into(),
            ));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
        let weights = WeightVector::generate(mask, &mut rng);
        Ok(Victim {
            sim: AmxSim::new(model),
            weights,
            m: cfg.m_multiplications,
            sigma: model.cfg.noise_sigma,
            rng,
            trace: cfg.record_power_trace.then(Vec::new),
        })
    }

    pub fn current_state(&self) -> PerformanceState {
        self.sim.current_state()
    }

    pub fn power_trace(&self) -> Option<&[TraceSegment]> {
        self.trace.as_deref()
    }

    /// Gap-aware idle bookkeeping shared with the protected wrapper.
    fn record_idle(&mut self, duration_ns: f64) {
        if let Some(trace) = self.trace.as_mut() {
            let gap = self.sim.now_ns() - self.sim.state().last_active_ns;
            trace.extend(idle_segments(&self.sim.model().cfg, gap, duration_ns));
        }
    }
}

impl TimedEndpoint for Victim {
    fn query(&mut self, input: &TilePattern) -> TimingSample {
        let s = effective_sparsity(&self.weights.mask, input);
        let start = self.sim.now_ns();
        let total = self
            .sim
            .run_sequence(self.m, s)
            .expect("victim config validated at construction");
        let elapsed = self.sim.now_ns() - start;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceSegment {
                kind: SegmentKind::Active,
                duration_ns: elapsed,
            });
        }
        let latency = if self.sigma > 0.0 {
            (total + self.sigma * standard_normal(&mut self.rng)).max(0.0)
        } else {
            total
        };
        TimingSample {
            latency_ref_cycles: latency,
            clock_cost_ns: elapsed,
        }
    }

    fn wait(&mut self, duration_ns: f64) -> Result<()> {
        self.record_idle(duration_ns);
        self.sim.advance_idle(duration_ns)
    }

    fn now_ns(&self) -> f64 {
        self.sim.now_ns()
    }
}

/// Box-Muller standard normal draw.
pub(crate) fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    let to_unit = |x: u64| (x >> 11) as f64 / (1u64 << 53) as f64; // [0, 1)
    let u1 = to_unit(rng.next_u64());
    let u2 = to_unit(rng.next_u64());
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    r * (std::f64::consts::TAU * u2).cos()
}
