use proptest::prelude::*;
use thor_sim::sim::*;

fn model() -> TimingModel {
    TimingModel::new(TimingModelConfig::default()).unwrap()
}

#[test]
fn calibration_hits_all_three_anchors_exactly() {
    let m = model();
    for &(s, target) in &m.cfg.sparsity_anchor_times {
        let total = AmxSim::new(&m).run_sequence(ANCHOR_STEPS, s).unwrap();
        let rel = (total - target).abs() / target;
        assert!(rel < 5e-3, "anchor s={s}: {total} vs {target}");
    }
}

#[test]
fn calibrated_laws_are_frozen() {
    // Oracle: closed-form fit of the default config (cold4 wake 19,500,
    // lane factor f = (anchor - unscaled mass) / scaled mass per anchor,
    // ramp rates 0.9 / 1000/422 / geometric extension).
    let m = model();
    let f_expect = [1.0769350811485643, 1.0003884081045893, 0.9159605465871771];
    let u_expect = [0.9, 1000.0 / 422.0, 6.239252886902311];
    for i in 0..3 {
        assert!((m.law.f_anchors[i] - f_expect[i]).abs() < 1e-12);
        assert!((m.law.u_anchors[i] - u_expect[i]).abs() < 1e-12);
    }
}

#[test]
fn sparse_speedup_ratios_match_measurements() {
    // 100% sparsity runs 39.4% faster, 50% runs 17.5% faster.
    let m = model();
    let t0 = AmxSim::new(&m).run_sequence(ANCHOR_STEPS, 0.0).unwrap();
    let t05 = AmxSim::new(&m).run_sequence(ANCHOR_STEPS, 0.5).unwrap();
    let t1 = AmxSim::new(&m).run_sequence(ANCHOR_STEPS, 1.0).unwrap();
    assert!((t1 / t0 - 1.0 / 1.394).abs() < 0.01, "t1/t0 = {}", t1 / t0);
    assert!((t05 / t0 - 1.0 / 1.175).abs() < 0.01, "t05/t0 = {}", t05 / t0);
}

#[test]
fn fresh_unit_wakes_in_cold4() {
    let m = model();
    let mut sim = AmxSim::new(&m);
    assert_eq!(sim.current_state(), PerformanceState::Cold4);
    assert_eq!(sim.tmul_step(0.5).unwrap(), m.cfg.cold_state_costs.cold4);
    assert_eq!(sim.current_state(), PerformanceState::Warm);
}

#[test]
fn decay_gap_selects_the_wake_cost() {
    let m = model();
    let c = &m.cfg.cold_state_costs;
    // (idle gap ns, expected cost of the next step)
    // A warm wake at the bottom level pays latency cycles scaled by the
    // clock ratio and the dense lane factor.
    let warm_wake = m.cfg.warm_latency_cycles * 2.0 * m.law.f_anchors[0];
    let cases = [
        (500.0, warm_wake), // still warm
        (50_000.0, c.cold1),
        (500_000.0, c.cold2),           // between cold2 and cold3 intervals
        (5_000_000.0, c.cold3),
        (20_000_001.0, c.cold4),        // just past the cold reset interval
        (3.6e12, c.cold4),              // an hour: still cold4 (idempotent)
    ];
    for (gap, expected) in cases {
        let mut sim = AmxSim::new(&m);
        sim.tmul_step(0.0).unwrap(); // wake once so the gap is measured
        sim.advance_idle(gap).unwrap();
        assert_eq!(sim.tmul_step(0.0).unwrap(), expected, "gap {gap}");
    }
}

#[test]
fn idle_gaps_compose() {
    let m = model();
    let mut a = AmxSim::new(&m);
    let mut b = AmxSim::new(&m);
    a.tmul_step(0.0).unwrap();
    b.tmul_step(0.0).unwrap();
    a.advance_idle(30_000_000.0).unwrap();
    for _ in 0..3 {
        b.advance_idle(10_000_000.0).unwrap();
    }
    assert_eq!(a.current_state(), b.current_state());
    assert_eq!(a.tmul_step(0.3).unwrap(), b.tmul_step(0.3).unwrap());
}

#[test]
fn run_sequence_equals_repeated_steps() {
    let m = model();
    for s in [0.0, 0.33, 0.5, 0.77, 1.0] {
        let mut a = AmxSim::new(&m);
        let total_a = a.run_sequence(3000, s).unwrap();
        let mut b = AmxSim::new(&m);
        let mut total_b = 0.0;
        for _ in 0..3000 {
            total_b += b.tmul_step(s).unwrap();
        }
        assert_eq!(total_a, total_b, "s={s}");
        assert_eq!(a.state().ladder_index, b.state().ladder_index);
        assert!((a.now_ns() - b.now_ns()).abs() < 1e-6 * b.now_ns());
    }
}

#[test]
fn totals_decrease_monotonically_with_sparsity() {
    let m = model();
    let mut prev = f64::INFINITY;
    for i in 0..=64 {
        let s = i as f64 / 64.0;
        let total = AmxSim::new(&m).run_sequence(ANCHOR_STEPS, s).unwrap();
        assert!(total < prev, "s={s}: {total} !< {prev}");
        prev = total;
    }
}

#[test]
fn query_length_runs_leak_per_lane_deltas() {
    // A 40-instruction query from cold stays below the top level, so each
    // additional active lane costs extra cycles (frozen oracle values).
    let m = model();
    let q = |a: u32| {
        AmxSim::new(&m)
            .run_sequence(40, 1.0 - a as f64 / 64.0)
            .unwrap()
    };
    assert!((q(0) - 20709.067921495032).abs() < 1e-6);
    assert!((q(1) - 20712.550570782674).abs() < 1e-6);
    assert!((q(64) - 20921.55430711612).abs() < 1e-6);
    for a in 1..=64u32 {
        assert!(q(a) > q(a - 1));
    }
}

#[test]
fn trajectory_has_three_plateaus_at_2ghz_in_frequency_ratio() {
    let traj = frequency_trajectory(&TimingModelConfig::default(), 2.0, 0.5, 4000).unwrap();
    // Skip the cold wake and the latency step; collect the distinct
    // steady-state throughput costs in order.
    let mut plateaus: Vec<f64> = Vec::new();
    for p in &traj[2..] {
        if plateaus
            .last()
            .map_or(true, |&c| (c - p.cost_ref_cycles).abs() > 1e-9)
        {
            plateaus.push(p.cost_ref_cycles);
        }
    }
    assert_eq!(plateaus.len(), 3, "plateaus: {plateaus:?}");
    let r01 = plateaus[0] / plateaus[1];
    let r02 = plateaus[0] / plateaus[2];
    assert!((r01 - 1.3).abs() / 1.3 < 5e-3, "1.0->1.3 ratio {r01}");
    assert!((r02 - 2.0).abs() / 2.0 < 5e-3, "1.0->2.0 ratio {r02}");
}

#[test]
fn trajectory_has_two_plateaus_at_1_2ghz() {
    let traj = frequency_trajectory(&TimingModelConfig::default(), 1.2, 0.5, 1200).unwrap();
    let mut freqs: Vec<f64> = Vec::new();
    for p in &traj {
        if freqs.last().map_or(true, |&f| f != p.amx_frequency_ghz) {
            freqs.push(p.amx_frequency_ghz);
        }
    }
    assert_eq!(freqs, vec![1.0, 1.2]);
}

#[test]
fn sparser_work_reaches_the_top_level_strictly_earlier() {
    let first_top = |s: f64| {
        let traj = frequency_trajectory(&TimingModelConfig::default(), 2.0, s, 4000).unwrap();
        traj.iter()
            .position(|p| p.amx_frequency_ghz == 2.0)
            .expect("must reach the top level")
    };
    assert!(first_top(1.0) < first_top(0.0));
}

#[test]
fn top_level_cost_is_data_independent() {
    let m = model();
    let steady = |s: f64| {
        let mut sim = AmxSim::new(&m);
        sim.run_sequence(3000, s).unwrap(); // well past both crossings
        sim.tmul_step(s).unwrap()
    };
    let c = steady(0.0);
    for s in [0.1, 0.5, 0.9, 1.0] {
        assert_eq!(steady(s), c, "top-level cost must not depend on s={s}");
    }
    assert_eq!(c, 16.0); // throughput cycles at full clock
}

#[test]
fn cold_wake_costs_do_not_scale_with_cpu_frequency() {
    for cpu in [0.8, 1.2, 2.0] {
        let mut cfg = TimingModelConfig::default();
        cfg.cpu_frequency_ghz = cpu;
        let m = TimingModel::new(cfg).unwrap();
        assert_eq!(
            AmxSim::new(&m).tmul_step(0.5).unwrap(),
            m.cfg.cold_state_costs.cold4,
            "cpu {cpu}"
        );
    }
}

#[test]
fn argument_errors() {
    let m = model();
    let mut sim = AmxSim::new(&m);
    assert!(sim.tmul_step(-0.1).is_err());
    assert!(sim.tmul_step(1.1).is_err());
    assert!(sim.tmul_step(f64::NAN).is_err());
    assert!(sim.run_sequence(0, 0.5).is_err());
    assert!(sim.advance_idle(-1.0).is_err());
    assert!(frequency_trajectory(&TimingModelConfig::default(), 2.0, 0.5, 0).is_err());
}

#[test]
fn config_validation_rejects_inconsistencies() {
    let bad = |f: fn(&mut TimingModelConfig)| {
        let mut cfg = TimingModelConfig::default();
        f(&mut cfg);
        TimingModel::new(cfg).is_err()
    };
    assert!(bad(|c| c.cpu_frequency_ghz = 2.5));
    assert!(bad(|c| c.cpu_frequency_ghz = 1.25));
    assert!(bad(|c| c.cold_reset_interval_ns = 10_000_000.0));
    assert!(bad(|c| c.cold_state_costs.cold2 = 9_000.0)); // > cold3
    assert!(bad(|c| c.state_decay_intervals.cold1 = 0.0));
    assert!(bad(|c| c.noise_sigma = -1.0));
    assert!(bad(|c| c.sparsity_anchor_times[2].1 = 60_000.0)); // not decreasing
    assert!(bad(|c| c.cold_state_costs.cold4 = 60_000.0)); // above the dense anchor
}

#[test]
fn supported_cpu_ladders() {
    assert_eq!(ladder_levels(2.0).unwrap(), vec![1.0, 1.3, 2.0]);
    assert_eq!(ladder_levels(1.2).unwrap(), vec![1.0, 1.2]);
    assert_eq!(ladder_levels(1.0).unwrap(), vec![1.0]);
    assert_eq!(ladder_levels(0.8).unwrap(), vec![0.8]);
    assert_eq!(ladder_levels(1.4).unwrap(), vec![1.0, 1.3, 1.4]);
    assert!(ladder_levels(2.1).is_err());
    assert!(ladder_levels(0.75).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sequence_totals_monotone_under_random_lengths(
        n in 1u64..2000,
        a in 0u32..=64,
        b in 0u32..=64,
    ) {
        let m = model();
        let (lo, hi) = (a.min(b), a.max(b));
        let s_lo = 1.0 - hi as f64 / 64.0; // more lanes aligned = less sparse
        let s_hi = 1.0 - lo as f64 / 64.0;
        let t_dense = AmxSim::new(&m).run_sequence(n, s_lo).unwrap();
        let t_sparse = AmxSim::new(&m).run_sequence(n, s_hi).unwrap();
        prop_assert!(t_sparse <= t_dense);
    }

    #[test]
    fn clock_advances_by_cost_over_reference_clock(
        steps in 1u64..200,
        s in 0.0f64..=1.0,
        gap in 0.0f64..1e8,
    ) {
        let m = model();
        let mut sim = AmxSim::new(&m);
        sim.advance_idle(gap).unwrap();
        let before = sim.now_ns();
        let total = sim.run_sequence(steps, s).unwrap();
        let elapsed = sim.now_ns() - before;
        prop_assert!((elapsed - total / REFERENCE_GHZ).abs() < 1e-6 * total.max(1.0));
    }

    #[test]
    fn ladder_level_never_decreases_while_chained(
        n in 1u64..3000,
        s in 0.0f64..=1.0,
    ) {
        let m = model();
        let mut sim = AmxSim::new(&m);
        let mut prev = sim.state().ladder_index;
        sim.tmul_step(s).unwrap(); // cold wake
        for _ in 0..n {
            sim.tmul_step(s).unwrap();
            let idx = sim.state().ladder_index;
            prop_assert!(idx >= prev);
            prev = idx;
        }
    }
}
