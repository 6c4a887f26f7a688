//! Mask recovery from query timing alone.
//!
//! The attacker never sees weights or outputs. Each trial times a random
//! candidate input pattern against its bitwise complement; if the trimmed
//! means differ by more than a calibrated threshold, the slower pattern
//! overlapped the secret non-zero weights more, and every one of its bit
//! positions receives one vote. After many accepted trials, position `i`
//! of the mask is called non-zero when slow-side ones outnumber slow-side
//! zeros by more than the decision ratio `gamma`.

use crate::error::{Result, ThorError};
use crate::tile::{TilePattern, TILE_ELEMS};
use crate::victim::TimedEndpoint;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AttackParams {
    /// Maximum candidate pairs per attack.
    pub n_trials: u64,
    /// Timing samples per measurement.
    pub l_repeats: usize,
    /// Largest samples discarded from each measurement.
    pub k_trim: usize,
    /// Threshold scale relative to the calibrated per-lane gap.
    pub alpha: f64,
    /// Slow-side ones/zeros ratio above which a bit is called non-zero.
    pub gamma: f64,
    /// Idle gap before every query; at least the cold reset interval, so
    /// each measurement starts from Cold4.
    pub cooldown_ns: f64,
    pub rng_seed: u64,
    /// Simulated-time budget for the whole attack, calibration included.
    pub time_budget_ns: Option<f64>,
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            n_trials: 10_000,
            l_repeats: 20,
            k_trim: 3,
            alpha: 0.9,
            gamma: 1.13,
            cooldown_ns: 25_000_000.0,
            rng_seed: 0,
            time_budget_ns: None,
        }
    }
}

impl AttackParams {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(ThorError::Config(m.into()));
        if self.n_trials == 0 {
            return err("n_trials must be >= 1");
        }
        if self.l_repeats == 0 || self.k_trim >= self.l_repeats {
            return err("need l_repeats >= 1 and k_trim < l_repeats");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return err("alpha must be in (0, 1]");
        }
        if !(self.gamma > 1.0) {
            return err("gamma must exceed 1");
        }
        if !(self.cooldown_ns > 0.0) {
            return err("cooldown_ns must be positive");
        }
        if let Some(b) = self.time_budget_ns {
            if !(b > 0.0) {
                return err("time_budget_ns must be positive");
            }
        }
        Ok(())
    }
}

/// A candidate pattern and its complement; exactly one of them holds each
/// bit position, so a vote for the slower side is a vote per position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePair {
    pub candidate: TilePattern,
    pub complement: TilePattern,
}

impl CandidatePair {
    pub fn new(candidate: TilePattern) -> Self {
        CandidatePair {
            candidate,
            complement: candidate.complement(),
        }
    }
}

/// Per-position slow-side vote counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    /// Accepted slow patterns with a zero at this position.
    pub score_z: [u64; TILE_ELEMS],
    /// Accepted slow patterns with a one at this position.
    pub score_n: [u64; TILE_ELEMS],
}

impl ScoreTable {
    pub fn new() -> Self {
        ScoreTable {
            score_z: [0; TILE_ELEMS],
            score_n: [0; TILE_ELEMS],
        }
    }

    /// Records one accepted slow pattern.
    pub fn update(&mut self, slow: &TilePattern) {
        for i in 0..TILE_ELEMS {
            if slow.get(i) {
                self.score_n[i] += 1;
            } else {
                self.score_z[i] += 1;
            }
        }
    }

    pub fn total_accepted(&self) -> u64 {
        self.score_z[0] + self.score_n[0]
    }
}

impl Default for ScoreTable {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Zero,
    NonZero,
    /// No accepted evidence at this position at all.
    Undecidable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub decisions: [Decision; TILE_ELEMS],
}

impl Prediction {
    /// The predicted mask, if every position was decidable.
    pub fn as_pattern(&self) -> Option<TilePattern> {
        let mut mask = TilePattern::all_clear();
        for (i, d) in self.decisions.iter().enumerate() {
            match d {
                Decision::NonZero => mask.set(i, true),
                Decision::Zero => {}
                Decision::Undecidable => return None,
            }
        }
        Some(mask)
    }

    /// Positions matching the true mask; undecidable counts as wrong.
    pub fn bits_correct(&self, truth: &TilePattern) -> u32 {
        self.decisions
            .iter()
            .enumerate()
            .filter(|(i, d)| match d {
                Decision::NonZero => truth.get(*i),
                Decision::Zero => !truth.get(*i),
                Decision::Undecidable => false,
            })
            .count() as u32
    }
}

/// Calls each position from the score table: non-zero iff
/// `score_n / score_z > gamma` (a zero denominator with non-zero evidence
/// counts as an infinite ratio). Raising `gamma` can only move positions
/// from non-zero toward zero.
pub fn infer_weights(table: &ScoreTable, gamma: f64) -> Prediction {
    let mut decisions = [Decision::Zero; TILE_ELEMS];
    for i in 0..TILE_ELEMS {
        let z = table.score_z[i];
        let n = table.score_n[i];
        decisions[i] = if z == 0 && n == 0 {
            Decision::Undecidable
        } else if z == 0 {
            Decision::NonZero
        } else if n as f64 / z as f64 > gamma {
            Decision::NonZero
        } else {
            Decision::Zero
        };
    }
    Prediction { decisions }
}

/// Per-position `score_n / score_z` ratios for reporting (infinite when
/// only ones were seen, NaN when the position has no evidence).
pub fn score_ratios(table: &ScoreTable) -> [f64; TILE_ELEMS] {
    let mut out = [0.0; TILE_ELEMS];
    for i in 0..TILE_ELEMS {
        out[i] = table.score_n[i] as f64 / table.score_z[i] as f64;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackStats {
    pub threshold: f64,
    pub trials_attempted: u64,
    pub accepted: u64,
    /// Simulated time the whole attack consumed, ns.
    pub duration_ns: f64,
    /// Portion of `duration_ns` spent in cooldown gaps.
    pub cooldown_ns: f64,
    /// Portion spent inside timed queries.
    pub query_ns: f64,
    pub ratios: [f64; TILE_ELEMS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub prediction: Prediction,
    pub stats: AttackStats,
}

/// Cooldown-then-query, `l_repeats` times; returns the mean of the samples
/// that survive dropping the `k_trim` largest, plus (cooldown, query) time.
pub fn measure<E: TimedEndpoint>(
    endpoint: &mut E,
    input: &TilePattern,
    params: &AttackParams,
) -> Result<(f64, f64, f64)> {
    let mut samples = Vec::with_capacity(params.l_repeats);
    let mut query_ns = 0.0;
    for _ in 0..params.l_repeats {
        endpoint.wait(params.cooldown_ns)?;
        let s = endpoint.query(input);
        samples.push(s.latency_ref_cycles);
        query_ns += s.clock_cost_ns;
    }
    samples.sort_by(|a, b| a.partial_cmp(b).expect("latencies are finite"));
    let keep = params.l_repeats - params.k_trim;
    let mean = samples[..keep].iter().sum::<f64>() / keep as f64;
    let cooldown_ns = params.cooldown_ns * params.l_repeats as f64;
    Ok((mean, cooldown_ns, query_ns))
}

/// Measures the all-non-zero / all-zero gap and scales it down to a
/// per-lane acceptance threshold. Fails when the victim shows no gap
/// (all-zero mask, or a warm-kept unit).
pub fn calibrate_threshold<E: TimedEndpoint>(
    endpoint: &mut E,
    params: &AttackParams,
) -> Result<(f64, f64, f64)> {
    let (t_nz, c1, q1) = measure(endpoint, &TilePattern::all_set(), params)?;
    let (t_z, c2, q2) = measure(endpoint, &TilePattern::all_clear(), params)?;
    if t_nz <= t_z {
        return Err(ThorError::Calibration(format!(
            "no exploitable timing gap: all-ones {t_nz:.1} <= all-zeros {t_z:.1} ref cycles"
        )));
    }
    let thr = params.alpha * (t_nz - t_z) / 2.0 / TILE_ELEMS as f64;
    Ok((thr, c1 + c2, q1 + q2))
}

/// Runs the full attack against an endpoint. Stops at `n_trials` pairs or
/// when the simulated time budget is spent, whichever comes first.
pub fn run_attack<E: TimedEndpoint>(
    endpoint: &mut E,
    params: &AttackParams,
) -> Result<AttackOutcome> {
    params.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(params.rng_seed);
    let start = endpoint.now_ns();
    let mut cooldown_ns;
    let mut query_ns;
    let threshold;
    match calibrate_threshold(endpoint, params) {
        Ok((thr, c, q)) => {
            threshold = thr;
            cooldown_ns = c;
            query_ns = q;
        }
        Err(e) => return Err(e),
    }

    let mut table = ScoreTable::new();
    let mut trials = 0u64;
    while trials < params.n_trials {
        if let Some(budget) = params.time_budget_ns {
            if endpoint.now_ns() - start >= budget {
                break;
            }
        }
        let pair = CandidatePair::new(TilePattern::random(&mut rng));
        let (t_c, c1, q1) = measure(endpoint, &pair.candidate, params)?;
        let (t_r, c2, q2) = measure(endpoint, &pair.complement, params)?;
        cooldown_ns += c1 + c2;
        query_ns += q1 + q2;
        if (t_c - t_r).abs() > threshold {
            let slow = if t_c > t_r { pair.candidate } else { pair.complement };
            table.update(&slow);
        }
        trials += 1;
    }

    let prediction = infer_weights(&table, params.gamma);
    Ok(AttackOutcome {
        prediction,
        stats: AttackStats {
            threshold,
            trials_attempted: trials,
            accepted: table.total_accepted(),
            duration_ns: endpoint.now_ns() - start,
            cooldown_ns,
            query_ns,
            ratios: score_ratios(&table),
        },
    })
}
