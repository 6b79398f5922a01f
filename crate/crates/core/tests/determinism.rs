use refim_core::config::config_hash;
use refim_core::engine::{run, Algorithm, NetworkSpec, RunResult, Scenario};
use refim_core::report;

fn small(algorithm: Algorithm, seed: u64) -> Scenario {
    let mut sc = Scenario::preset("hetnet5").unwrap();
    if let NetworkSpec::Hetnet { rings, .. } = &mut sc.network {
        *rings = 1;
    }
    sc.algorithm = algorithm;
    sc.seed = seed;
    sc.slots = 120;
    sc.warmup_slots = 20;
    sc.feedback.period_slots = 10;
    sc.trace.powers = true;
    sc.trace.schedule = true;
    sc.trace.protocol = true;
    sc
}

fn bytes(result: &RunResult, sc: &Scenario) -> Vec<u8> {
    let mut out = Vec::new();
    report::write_summary(&mut out, result, sc, &config_hash(sc)).unwrap();
    report::write_users(&mut out, result).unwrap();
    report::write_powers(&mut out, result).unwrap();
    report::write_schedule(&mut out, result).unwrap();
    result.protocol.write_csv(&mut out).unwrap();
    out
}

#[test]
fn same_seed_same_bytes() {
    for algo in [Algorithm::Eq, Algorithm::Wf, Algorithm::Refim, Algorithm::General] {
        let sc = small(algo, 11);
        let a = bytes(&run(&sc).unwrap(), &sc);
        let b = bytes(&run(&sc).unwrap(), &sc);
        assert!(a == b, "{algo:?} output differs between identical runs");
    }
}

#[test]
fn different_seed_different_result() {
    let a = run(&small(Algorithm::Refim, 1)).unwrap();
    let b = run(&small(Algorithm::Refim, 2)).unwrap();
    assert_ne!(a.gat_bps, b.gat_bps);
}

#[test]
fn runs_are_constraint_safe_and_bounded() {
    for algo in [Algorithm::Eq, Algorithm::Wf, Algorithm::Refim, Algorithm::General] {
        let r = run(&small(algo, 3)).unwrap();
        let c = r.counters;
        assert_eq!(c.power_violations, 0, "{algo:?}");
        assert_eq!(c.schedule_violations, 0, "{algo:?}");
        assert_eq!(c.bisection_bound_violations, 0, "{algo:?}");
        assert!(c.max_bisection_iterations <= c.max_bisection_bound);
        assert!(r.gat_bps > 0.0 && r.gat_bps <= r.aat_bps);
    }
}

#[test]
fn protocol_traffic_only_for_refim() {
    let wf = run(&small(Algorithm::Wf, 4)).unwrap();
    assert_eq!(wf.protocol.index_messages + wf.protocol.table_messages, 0);
    let refim = run(&small(Algorithm::Refim, 4)).unwrap();
    assert!(refim.protocol.table_messages > 0);
    assert!(refim.protocol.index_bytes > 0);
}
