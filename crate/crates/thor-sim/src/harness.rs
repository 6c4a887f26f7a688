//! Experiment harness: repeatable attack campaigns and report generation.
//!
//! Every experiment is driven by one base seed. Per-trial seeds are derived
//! with a splitmix step, so trials are independent of each other and of
//! execution order, and a report is a pure function of (config, seed).

use crate::attacker::{run_attack, AttackOutcome, AttackParams, Decision, Prediction};
use crate::countermeasure::{wrap_victim, KeeperConfig};
use crate::error::{Result, ThorError};
use crate::power::{idle_segments, power_overhead, PowerModel, SegmentKind, TraceSegment};
use crate::sim::{frequency_trajectory, AmxSim, TimingModel, TrajectoryPoint, ANCHOR_STEPS};
use crate::tile::{TilePattern, TILE_ELEMS};
use crate::victim::{Victim, VictimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Splitmix64 finalizer over (base, stream); the harness's only seed math.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub const MINUTE_NS: f64 = 60.0e9;

/// One end-to-end attack against a fresh unprotected victim.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub seed: u64,
    pub mask: TilePattern,
    pub outcome: AttackOutcome,
    /// Exact mask recovery.
    pub success: bool,
    pub bits_correct: u32,
}

/// Runs one attack trial. The mask (when not fixed), victim randomness and
/// attacker randomness all derive from `seed`.
pub fn run_trial(
    model: &TimingModel,
    vcfg: &VictimConfig,
    params: &AttackParams,
    mask: Option<TilePattern>,
    seed: u64,
) -> Result<TrialOutcome> {
    let mask = mask.unwrap_or_else(|| {
        TilePattern::random(&mut ChaCha12Rng::seed_from_u64(derive_seed(seed, 0)))
    });
    let mut vcfg = vcfg.clone();
    vcfg.rng_seed = derive_seed(seed, 1);
    let mut params = params.clone();
    params.rng_seed = derive_seed(seed, 2);
    let mut victim = Victim::new(mask, &vcfg, model)?;
    let outcome = run_attack(&mut victim, &params)?;
    let success = outcome.prediction.as_pattern() == Some(mask);
    let bits_correct = outcome.prediction.bits_correct(&mask);
    Ok(TrialOutcome {
        seed,
        mask,
        outcome,
        success,
        bits_correct,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub durations_min: Vec<f64>,
    pub trials_per_point: u64,
    pub base_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            durations_min: vec![5.0, 10.0, 20.0, 30.0, 50.0],
            trials_per_point: 20,
            base_seed: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub duration_min: f64,
    pub success_rate: f64,
    pub mean_bits_correct: f64,
    pub leakage_bits_per_hour: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub base_seed: u64,
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialOutcome>,
}

/// Attack success rate as a function of the simulated time budget.
/// Rows come out sorted by duration.
pub fn success_sweep(
    model: &TimingModel,
    vcfg: &VictimConfig,
    params: &AttackParams,
    spec: &SweepSpec,
    config_hash: &str,
) -> Result<ExperimentReport> {
    if spec.durations_min.is_empty() || spec.trials_per_point == 0 {
        return Err(ThorError::Config("sweep needs durations and trials".into()));
    }
    let mut durations = spec.durations_min.clone();
    durations.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for (di, &duration) in durations.iter().enumerate() {
        if !(duration > 0.0) {
            return Err(ThorError::Config("sweep durations must be positive".into()));
        }
        let mut params = params.clone();
        params.time_budget_ns = Some(duration * MINUTE_NS);
        let mut successes = 0u64;
        let mut bits_sum = 0u64;
        for t in 0..spec.trials_per_point {
            let seed = derive_seed(spec.base_seed, (di as u64) << 32 | t);
            let trial = run_trial(model, vcfg, &params, None, seed)?;
            successes += trial.success as u64;
            bits_sum += trial.bits_correct as u64;
            trials.push(trial);
        }
        let rate = successes as f64 / spec.trials_per_point as f64;
        rows.push(SweepRow {
            duration_min: duration,
            success_rate: rate,
            mean_bits_correct: bits_sum as f64 / spec.trials_per_point as f64,
            leakage_bits_per_hour: thor_leakage_bph(rate, duration),
        });
    }
    Ok(ExperimentReport {
        config_hash: config_hash.to_string(),
        base_seed: spec.base_seed,
        rows,
        trials,
    })
}

/// Bits per hour an attack leaks when it recovers a 64-bit mask with the
/// given success rate inside the given budget.
pub fn thor_leakage_bph(success_rate: f64, duration_min: f64) -> f64 {
    success_rate * TILE_ELEMS as f64 / (duration_min / 60.0)
}

/// Published leakage rates (bits/hour) of prior timing/power attacks.
pub const LEAKAGE_BASELINES: [(&str, f64); 4] = [
    ("collide+power (meltdown)", 0.136),
    ("collide+power (mds)", 4.82),
    ("hertzbleed", 10.5),
    ("platypus", 144.7),
];

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageRow {
    pub attack: String,
    pub bits_per_hour: f64,
    /// How much faster this simulator's attack is, in percent
    /// (None on its own row).
    pub thor_speedup_pct: Option<f64>,
}

/// Side-by-side leakage table, sorted by rate, with the measured attack
/// rate inserted among the published baselines.
pub fn leakage_comparison(thor_bph: f64) -> Vec<LeakageRow> {
    let mut rows: Vec<LeakageRow> = LEAKAGE_BASELINES
        .iter()
        .map(|&(name, bph)| LeakageRow {
            attack: name.to_string(),
            bits_per_hour: bph,
            thor_speedup_pct: Some((thor_bph - bph) / bph * 100.0),
        })
        .collect();
    rows.push(LeakageRow {
        attack: "thor (this work)".to_string(),
        bits_per_hour: thor_bph,
        thor_speedup_pct: None,
    });
    rows.sort_by(|a, b| {
        a.bits_per_hour
            .partial_cmp(&b.bits_per_hour)
            .expect("rates are finite")
    });
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCalibration {
    pub target_duration_min: f64,
    pub target_success_rate: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub trials_per_probe: u64,
    /// Accept when |rate - target| is within this.
    pub tolerance: f64,
    pub max_iterations: u32,
    pub base_seed: u64,
}

impl Default for NoiseCalibration {
    fn default() -> Self {
        NoiseCalibration {
            target_duration_min: 5.0,
            target_success_rate: 0.60,
            sigma_lo: 0.0,
            sigma_hi: 50.0,
            trials_per_probe: 200,
            tolerance: 0.05,
            max_iterations: 24,
            base_seed: 42,
        }
    }
}

/// Finds, by bisection, a noise sigma at which the attack hits the target
/// success rate at the target duration. Success is monotone non-increasing
/// in sigma, so the bracket must straddle the target; if even the bracket
/// endpoints cannot reach it the error reports the measured rates.
pub fn calibrate_noise(
    base_model_cfg: &crate::sim::TimingModelConfig,
    vcfg: &VictimConfig,
    params: &AttackParams,
    spec: &NoiseCalibration,
) -> Result<f64> {
    if !(spec.sigma_lo >= 0.0 && spec.sigma_hi > spec.sigma_lo) {
        return Err(ThorError::Config("need 0 <= sigma_lo < sigma_hi".into()));
    }
    if spec.trials_per_probe == 0 {
        return Err(ThorError::Config("trials_per_probe must be >= 1".into()));
    }
    let probe = |sigma: f64| -> Result<f64> {
        let mut cfg = base_model_cfg.clone();
        cfg.noise_sigma = sigma;
        let model = TimingModel::new(cfg)?;
        let mut params = params.clone();
        params.time_budget_ns = Some(spec.target_duration_min * MINUTE_NS);
        let mut successes = 0u64;
        for t in 0..spec.trials_per_probe {
            let seed = derive_seed(spec.base_seed, 0xca11_0000 | t);
            successes += run_trial(&model, vcfg, &params, None, seed)?.success as u64;
        }
        Ok(successes as f64 / spec.trials_per_probe as f64)
    };

    let target = spec.target_success_rate;
    let rate_lo = probe(spec.sigma_lo)?;
    if (rate_lo - target).abs() <= spec.tolerance {
        return Ok(spec.sigma_lo);
    }
    if rate_lo < target {
        return Err(ThorError::Calibration(format!(
            "target success rate {target:.2} at {:.1} simulated minutes is unreachable: \
             even sigma={} gives rate {rate_lo:.3} (success only degrades with more noise)",
            spec.target_duration_min, spec.sigma_lo
        )));
    }
    let rate_hi = probe(spec.sigma_hi)?;
    if (rate_hi - target).abs() <= spec.tolerance {
        return Ok(spec.sigma_hi);
    }
    if rate_hi > target {
        return Err(ThorError::Calibration(format!(
            "bracket does not straddle the target rate {target:.2}: rates {rate_lo:.3} at \
             sigma={} and {rate_hi:.3} at sigma={}",
            spec.sigma_lo, spec.sigma_hi
        )));
    }
    let (mut lo, mut hi) = (spec.sigma_lo, spec.sigma_hi);
    for _ in 0..spec.max_iterations {
        let mid = 0.5 * (lo + hi);
        let rate = probe(mid)?;
        if (rate - target).abs() <= spec.tolerance {
            return Ok(mid);
        }
        if rate > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(ThorError::Calibration(format!(
        "noise calibration did not converge to rate {target:.2} within {} bisection steps",
        spec.max_iterations
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefendSpec {
    pub duration_min: f64,
    pub trials: u64,
    pub idle_fractions: Vec<f64>,
    /// Idle gap length used in the synthetic duty-cycle workloads.
    pub idle_gap_ns: f64,
    pub base_seed: u64,
}

impl Default for DefendSpec {
    fn default() -> Self {
        DefendSpec {
            duration_min: 50.0,
            trials: 20,
            idle_fractions: vec![0.2, 0.35, 0.5, 0.65, 0.8, 0.9],
            idle_gap_ns: 25_000_000.0,
            base_seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtectedTrialRow {
    pub seed: u64,
    /// Threshold calibration found no gap (the expected outcome).
    pub calibration_failed: bool,
    pub success: bool,
    pub bit_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct CountermeasureReport {
    pub trials: Vec<ProtectedTrialRow>,
    pub exact_success_rate: f64,
    pub mean_bit_accuracy: f64,
    /// (idle fraction, energy overhead percent).
    pub overhead: Vec<(f64, f64)>,
}

/// Full countermeasure evaluation: the attack against keeper-protected
/// victims, plus the keeper's energy overhead across duty cycles.
pub fn countermeasure_eval(
    model: &TimingModel,
    vcfg: &VictimConfig,
    params: &AttackParams,
    keeper: &KeeperConfig,
    power: &PowerModel,
    spec: &DefendSpec,
) -> Result<CountermeasureReport> {
    power.validate()?;
    let mut trials = Vec::new();
    let mut successes = 0u64;
    let mut acc_sum = 0.0;
    for t in 0..spec.trials.max(1) {
        let seed = derive_seed(spec.base_seed, 0xdef0_0000 | t);
        let mask =
            TilePattern::random(&mut ChaCha12Rng::seed_from_u64(derive_seed(seed, 0)));
        let mut vcfg = vcfg.clone();
        vcfg.rng_seed = derive_seed(seed, 1);
        let mut params = params.clone();
        params.rng_seed = derive_seed(seed, 2);
        params.time_budget_ns = Some(spec.duration_min * MINUTE_NS);
        let victim = Victim::new(mask, &vcfg, model)?;
        let mut protected = wrap_victim(victim, *keeper)?;
        let (prediction, calibration_failed) = match run_attack(&mut protected, &params) {
            Ok(outcome) => (outcome.prediction, false),
            // With no measurable gap the attacker learns nothing; score it
            // as the all-zero guess.
            Err(ThorError::Calibration(_)) => (
                Prediction {
                    decisions: [Decision::Zero; TILE_ELEMS],
                },
                true,
            ),
            Err(e) => return Err(e),
        };
        let success = prediction.as_pattern() == Some(mask);
        let bit_accuracy = prediction.bits_correct(&mask) as f64 / TILE_ELEMS as f64;
        successes += success as u64;
        acc_sum += bit_accuracy;
        trials.push(ProtectedTrialRow {
            seed,
            calibration_failed,
            success,
            bit_accuracy,
        });
    }

    let mut overhead = Vec::new();
    for &phi in &spec.idle_fractions {
        overhead.push((phi, keeper_overhead_pct(model, power, phi, spec.idle_gap_ns)?));
    }

    let n = trials.len() as f64;
    Ok(CountermeasureReport {
        exact_success_rate: successes as f64 / n,
        mean_bit_accuracy: acc_sum / n,
        trials,
        overhead,
    })
}

/// Energy overhead of keeping the unit warm for a duty-cycled workload
/// that is idle `idle_fraction` of the time, in gaps of `idle_gap_ns`.
pub fn keeper_overhead_pct(
    model: &TimingModel,
    power: &PowerModel,
    idle_fraction: f64,
    idle_gap_ns: f64,
) -> Result<f64> {
    if !(idle_fraction > 0.0 && idle_fraction < 1.0) {
        return Err(ThorError::Argument(format!(
            "idle fraction must be in (0, 1), got {idle_fraction}"
        )));
    }
    if !(idle_gap_ns > 0.0) {
        return Err(ThorError::Argument("idle gap must be positive".into()));
    }
    let active_ns = idle_gap_ns * (1.0 - idle_fraction) / idle_fraction;
    let active = TraceSegment {
        kind: SegmentKind::Active,
        duration_ns: active_ns,
    };
    let mut baseline = vec![active];
    baseline.extend(idle_segments(&model.cfg, 0.0, idle_gap_ns));
    let protected = vec![
        active,
        TraceSegment {
            kind: SegmentKind::WarmKept,
            duration_ns: idle_gap_ns,
        },
    ];
    power_overhead(&protected, &baseline, power)
}

/// Summary statistics of repeated noisy cold-start anchor runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorStats {
    pub sparsity: f64,
    pub noiseless_total: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct TimingDemo {
    pub anchors: Vec<AnchorStats>,
    /// (cpu GHz, sparsity, per-step series).
    pub trajectories: Vec<(f64, f64, Vec<TrajectoryPoint>)>,
}

/// The headline timing artifacts: noisy distributions of the three anchor
/// runs, and cold-start frequency ramps at two core clocks.
pub fn timing_demo(model: &TimingModel, repeats: u64, seed: u64) -> Result<TimingDemo> {
    let mut anchors = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for &(s, _) in &model.cfg.sparsity_anchor_times {
        let noiseless = AmxSim::new(model).run_sequence(ANCHOR_STEPS, s)?;
        let mut samples = Vec::with_capacity(repeats.max(1) as usize);
        for _ in 0..repeats.max(1) {
            let noise = model.cfg.noise_sigma * crate::victim::standard_normal(&mut rng);
            samples.push((noiseless + noise).max(0.0));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        anchors.push(AnchorStats {
            sparsity: s,
            noiseless_total: noiseless,
            mean,
            std_dev: var.sqrt(),
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let mut trajectories = Vec::new();
    for cpu in [2.0, 1.2] {
        trajectories.push((cpu, 0.5, frequency_trajectory(&model.cfg, cpu, 0.5, 4000)?));
    }
    Ok(TimingDemo {
        anchors,
        trajectories,
    })
}
