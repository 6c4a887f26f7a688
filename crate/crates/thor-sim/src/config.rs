//! Flat key=value configuration covering every tunable in the workspace.
//!
//! Files are line-oriented: `section.key = value`, `#` comments, blank
//! lines ignored. Unknown keys and malformed values are hard errors. The
//! canonical serialization (every key, fixed order) is what gets hashed
//! into report provenance.

use crate::attacker::AttackParams;
use crate::countermeasure::KeeperConfig;
use crate::error::{Result, ThorError};
use crate::harness::{DefendSpec, NoiseCalibration, SweepSpec, MINUTE_NS};
use crate::power::PowerModel;
use crate::sim::TimingModelConfig;
use crate::victim::VictimConfig;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FullConfig {
    pub timing: TimingModelConfig,
    pub victim: VictimConfig,
    pub attack: AttackParams,
    pub keeper: KeeperConfig,
    pub power: PowerModel,
    pub sweep: SweepSpec,
    pub defend: DefendSpec,
    pub calibrate: NoiseCalibration,
}

impl FullConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ThorError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Defaults overridden by the given key=value text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = FullConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ThorError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| ThorError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        self.attack.validate()?;
        self.power.validate()?;
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.timing;
        let a = &mut self.attack;
        match key {
            "timing.warm_latency_cycles" => t.warm_latency_cycles = num(value)?,
            "timing.warm_throughput_cycles" => t.warm_throughput_cycles = num(value)?,
            "timing.cold_cost.cold1" => t.cold_state_costs.cold1 = num(value)?,
            "timing.cold_cost.cold2" => t.cold_state_costs.cold2 = num(value)?,
            "timing.cold_cost.cold3" => t.cold_state_costs.cold3 = num(value)?,
            "timing.cold_cost.cold4" => t.cold_state_costs.cold4 = num(value)?,
            "timing.decay_ns.cold1" => t.state_decay_intervals.cold1 = num(value)?,
            "timing.decay_ns.cold2" => t.state_decay_intervals.cold2 = num(value)?,
            "timing.decay_ns.cold3" => t.state_decay_intervals.cold3 = num(value)?,
            "timing.decay_ns.cold4" => t.state_decay_intervals.cold4 = num(value)?,
            "timing.cold_reset_interval_ns" => t.cold_reset_interval_ns = num(value)?,
            "timing.ramp_units_per_level" => t.ramp_units_per_level = num(value)?,
            "timing.sparsity_ramp_factor" => t.sparsity_ramp_factor = num(value)?,
            "timing.anchor.s000" => t.sparsity_anchor_times[0].1 = num(value)?,
            "timing.anchor.s050" => t.sparsity_anchor_times[1].1 = num(value)?,
            "timing.anchor.s100" => t.sparsity_anchor_times[2].1 = num(value)?,
            "timing.noise_sigma" => t.noise_sigma = num(value)?,
            "timing.cpu_frequency_ghz" => t.cpu_frequency_ghz = num(value)?,
            "victim.m_multiplications" => self.victim.m_multiplications = int(value)?,
            "victim.rng_seed" => self.victim.rng_seed = int(value)?,
            "victim.record_power_trace" => self.victim.record_power_trace = boolean(value)?,
            "attack.n_trials" => a.n_trials = int(value)?,
            "attack.l_repeats" => a.l_repeats = int(value)? as usize,
            "attack.k_trim" => a.k_trim = int(value)? as usize,
            "attack.alpha" => a.alpha = num(value)?,
            "attack.gamma" => a.gamma = num(value)?,
            "attack.cooldown_ns" => a.cooldown_ns = num(value)?,
            "attack.rng_seed" => a.rng_seed = int(value)?,
            "attack.time_budget_min" => {
                a.time_budget_ns = if value == "none" {
                    None
                } else {
                    Some(num(value)? * MINUTE_NS)
                }
            }
            "keeper.keep_interval_ns" => self.keeper.keep_interval_ns = num(value)?,
            "keeper.enabled" => self.keeper.enabled = boolean(value)?,
            "power.active" => self.power.active_power = num(value)?,
            "power.warm" => self.power.state_power.warm = num(value)?,
            "power.cold1" => self.power.state_power.cold1 = num(value)?,
            "power.cold2" => self.power.state_power.cold2 = num(value)?,
            "power.cold3" => self.power.state_power.cold3 = num(value)?,
            "power.cold4" => self.power.state_power.cold4 = num(value)?,
            "power.baseline_trace_energy" => self.power.baseline_trace_energy = num(value)?,
            "sweep.durations_min" => self.sweep.durations_min = num_list(value)?,
            "sweep.trials_per_point" => self.sweep.trials_per_point = int(value)?,
            "sweep.base_seed" => self.sweep.base_seed = int(value)?,
            "defend.duration_min" => self.defend.duration_min = num(value)?,
            "defend.trials" => self.defend.trials = int(value)?,
            "defend.idle_fractions" => self.defend.idle_fractions = num_list(value)?,
            "defend.idle_gap_ns" => self.defend.idle_gap_ns = num(value)?,
            "defend.base_seed" => self.defend.base_seed = int(value)?,
            "calibrate.target_duration_min" => self.calibrate.target_duration_min = num(value)?,
            "calibrate.target_success_rate" => self.calibrate.target_success_rate = num(value)?,
            "calibrate.sigma_lo" => self.calibrate.sigma_lo = num(value)?,
            "calibrate.sigma_hi" => self.calibrate.sigma_hi = num(value)?,
            "calibrate.trials_per_probe" => self.calibrate.trials_per_probe = int(value)?,
            "calibrate.tolerance" => self.calibrate.tolerance = num(value)?,
            "calibrate.max_iterations" => self.calibrate.max_iterations = int(value)? as u32,
            "calibrate.base_seed" => self.calibrate.base_seed = int(value)?,
            _ => return Err(ThorError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Every key in fixed order; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let t = &self.timing;
        let a = &self.attack;
        let budget = match a.time_budget_ns {
            None => "none".to_string(),
            Some(ns) => fmt_num(ns / MINUTE_NS),
        };
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("timing.warm_latency_cycles", fmt_num(t.warm_latency_cycles));
        kv("timing.warm_throughput_cycles", fmt_num(t.warm_throughput_cycles));
        kv("timing.cold_cost.cold1", fmt_num(t.cold_state_costs.cold1));
        kv("timing.cold_cost.cold2", fmt_num(t.cold_state_costs.cold2));
        kv("timing.cold_cost.cold3", fmt_num(t.cold_state_costs.cold3));
        kv("timing.cold_cost.cold4", fmt_num(t.cold_state_costs.cold4));
        kv("timing.decay_ns.cold1", fmt_num(t.state_decay_intervals.cold1));
        kv("timing.decay_ns.cold2", fmt_num(t.state_decay_intervals.cold2));
        kv("timing.decay_ns.cold3", fmt_num(t.state_decay_intervals.cold3));
        kv("timing.decay_ns.cold4", fmt_num(t.state_decay_intervals.cold4));
        kv("timing.cold_reset_interval_ns", fmt_num(t.cold_reset_interval_ns));
        kv("timing.ramp_units_per_level", fmt_num(t.ramp_units_per_level));
        kv("timing.sparsity_ramp_factor", fmt_num(t.sparsity_ramp_factor));
        kv("timing.anchor.s000", fmt_num(t.sparsity_anchor_times[0].1));
        kv("timing.anchor.s050", fmt_num(t.sparsity_anchor_times[1].1));
        kv("timing.anchor.s100", fmt_num(t.sparsity_anchor_times[2].1));
        kv("timing.noise_sigma", fmt_num(t.noise_sigma));
        kv("timing.cpu_frequency_ghz", fmt_num(t.cpu_frequency_ghz));
        kv("victim.m_multiplications", self.victim.m_multiplications.to_string());
        kv("victim.rng_seed", self.victim.rng_seed.to_string());
        kv("victim.record_power_trace", self.victim.record_power_trace.to_string());
        kv("attack.n_trials", a.n_trials.to_string());
        kv("attack.l_repeats", a.l_repeats.to_string());
        kv("attack.k_trim", a.k_trim.to_string());
        kv("attack.alpha", fmt_num(a.alpha));
        kv("attack.gamma", fmt_num(a.gamma));
        kv("attack.cooldown_ns", fmt_num(a.cooldown_ns));
        kv("attack.rng_seed", a.rng_seed.to_string());
        kv("attack.time_budget_min", budget);
        kv("keeper.keep_interval_ns", fmt_num(self.keeper.keep_interval_ns));
        kv("keeper.enabled", self.keeper.enabled.to_string());
        kv("power.active", fmt_num(self.power.active_power));
        kv("power.warm", fmt_num(self.power.state_power.warm));
        kv("power.cold1", fmt_num(self.power.state_power.cold1));
        kv("power.cold2", fmt_num(self.power.state_power.cold2));
        kv("power.cold3", fmt_num(self.power.state_power.cold3));
        kv("power.cold4", fmt_num(self.power.state_power.cold4));
        kv("power.baseline_trace_energy", fmt_num(self.power.baseline_trace_energy));
        kv("sweep.durations_min", fmt_list(&self.sweep.durations_min));
        kv("sweep.trials_per_point", self.sweep.trials_per_point.to_string());
        kv("sweep.base_seed", self.sweep.base_seed.to_string());
        kv("defend.duration_min", fmt_num(self.defend.duration_min));
        kv("defend.trials", self.defend.trials.to_string());
        kv("defend.idle_fractions", fmt_list(&self.defend.idle_fractions));
        kv("defend.idle_gap_ns", fmt_num(self.defend.idle_gap_ns));
        kv("defend.base_seed", self.defend.base_seed.to_string());
        kv("calibrate.target_duration_min", fmt_num(self.calibrate.target_duration_min));
        kv("calibrate.target_success_rate", fmt_num(self.calibrate.target_success_rate));
        kv("calibrate.sigma_lo", fmt_num(self.calibrate.sigma_lo));
        kv("calibrate.sigma_hi", fmt_num(self.calibrate.sigma_hi));
        kv("calibrate.trials_per_probe", self.calibrate.trials_per_probe.to_string());
        kv("calibrate.tolerance", fmt_num(self.calibrate.tolerance));
        kv("calibrate.max_iterations", self.calibrate.max_iterations.to_string());
        kv("calibrate.base_seed", self.calibrate.base_seed.to_string());
        out
    }

    /// SHA-256 of the canonical serialization, hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.serialize().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn num(v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| ThorError::Config(format!("expected a number, got '{v}'")))?;
    if !x.is_finite() {
        return Err(ThorError::Config(format!("expected a finite number, got '{v}'")));
    }
    Ok(x)
}

fn int(v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| ThorError::Config(format!("expected an unsigned integer, got '{v}'")))
}

fn boolean(v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ThorError::Config(format!("expected true/false, got '{v}'"))),
    }
}

fn num_list(v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|p| num(p.trim())).collect()
}

fn fmt_num(x: f64) -> String {
    // Round-trippable and stable across runs.
    format!("{x:?}")
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",")
}
