//! CSV/TSV rendering of harness results.
//!
//! All numbers are printed with six decimal places so that output is
//! byte-stable across runs of the same config and seed.

use crate::harness::{
    CountermeasureReport, ExperimentReport, LeakageRow, TimingDemo, TrialOutcome,
};

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.6}")
    }
}

fn line(fields: &[String], sep: char) -> String {
    let mut s = fields.join(&sep.to_string());
    s.push('\n');
    s
}

/// Sweep summary: one row per duration, sorted ascending.
pub fn sweep_csv(report: &ExperimentReport, sep: char) -> String {
    let mut out = format!("# config_hash={} base_seed={}\n", report.config_hash, report.base_seed);
    out.push_str(&line(
        &["duration_min", "success_rate", "bits_correct", "leakage_bph"]
            .map(String::from),
        sep,
    ));
    for r in &report.rows {
        out.push_str(&line(
            &[
                num(r.duration_min),
                num(r.success_rate),
                num(r.mean_bits_correct),
                num(r.leakage_bits_per_hour),
            ],
            sep,
        ));
    }
    out
}

/// One attack trial: outcome summary plus the 64 per-position score ratios.
pub fn attack_csv(trial: &TrialOutcome, sep: char) -> String {
    let mut header: Vec<String> = [
        "seed",
        "mask",
        "duration_ns",
        "trials",
        "accepted",
        "success",
        "bits_correct",
        "threshold",
        "cooldown_ns",
        "query_ns",
    ]
    .map(String::from)
    .to_vec();
    for i in 0..trial.outcome.stats.ratios.len() {
        header.push(format!("ratio_{i:02}"));
    }
    let s = &trial.outcome.stats;
    let mut row = vec![
        trial.seed.to_string(),
        format!("{:016x}", trial.mask.bits()),
        num(s.duration_ns),
        s.trials_attempted.to_string(),
        s.accepted.to_string(),
        (trial.success as u8).to_string(),
        trial.bits_correct.to_string(),
        num(s.threshold),
        num(s.cooldown_ns),
        num(s.query_ns),
    ];
    row.extend(s.ratios.iter().map(|r| num(*r)));
    let mut out = line(&header, sep);
    out.push_str(&line(&row, sep));
    out
}

/// Leakage comparison table.
pub fn leakage_csv(rows: &[LeakageRow], sep: char) -> String {
    let mut out = line(
        &["attack", "bits_per_hour", "thor_speedup_pct"].map(String::from),
        sep,
    );
    for r in rows {
        out.push_str(&line(
            &[
                r.attack.clone(),
                num(r.bits_per_hour),
                r.thor_speedup_pct.map(num).unwrap_or_else(|| "-".into()),
            ],
            sep,
        ));
    }
    out
}

/// Countermeasure evaluation: generic record/param/value rows covering the
/// protected-attack trials and the overhead sweep.
pub fn defend_csv(report: &CountermeasureReport, sep: char) -> String {
    let mut out = line(&["record", "param", "value"].map(String::from), sep);
    for (i, t) in report.trials.iter().enumerate() {
        out.push_str(&line(
            &["trial_bit_accuracy".into(), i.to_string(), num(t.bit_accuracy)],
            sep,
        ));
        out.push_str(&line(
            &[
                "trial_calibration_failed".into(),
                i.to_string(),
                (t.calibration_failed as u8).to_string(),
            ],
            sep,
        ));
    }
    out.push_str(&line(
        &["exact_success_rate".into(), "-".into(), num(report.exact_success_rate)],
        sep,
    ));
    out.push_str(&line(
        &["mean_bit_accuracy".into(), "-".into(), num(report.mean_bit_accuracy)],
        sep,
    ));
    for &(phi, pct) in &report.overhead {
        out.push_str(&line(
            &["overhead_pct".into(), num(phi), num(pct)],
            sep,
        ));
    }
    out
}

/// Timing demo: anchor distributions followed by ramp trajectories.
pub fn timing_demo_csv(demo: &TimingDemo, sep: char) -> String {
    let mut out = line(
        &["record", "cpu_ghz", "sparsity", "step", "value_a", "value_b"].map(String::from),
        sep,
    );
    for a in &demo.anchors {
        for (name, v) in [
            ("anchor_noiseless", a.noiseless_total),
            ("anchor_mean", a.mean),
            ("anchor_std", a.std_dev),
            ("anchor_min", a.min),
            ("anchor_max", a.max),
        ] {
            out.push_str(&line(
                &[name.into(), "-".into(), num(a.sparsity), "-".into(), num(v), "-".into()],
                sep,
            ));
        }
    }
    for (cpu, s, series) in &demo.trajectories {
        for (i, p) in series.iter().enumerate() {
            out.push_str(&line(
                &[
                    "trajectory".into(),
                    num(*cpu),
                    num(*s),
                    i.to_string(),
                    num(p.cost_ref_cycles),
                    num(p.amx_frequency_ghz),
                ],
                sep,
            ));
        }
    }
    out
}
