use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use refim_core::engine::{aat, gat, Scenario, SlotInstance};
use refim_core::oracle::{exhaustive_schedule, toy_instance, ToySpec};
use refim_core::power::{
    equal_power, initial_power, kkt_power, refim_step, solve_bs_problem, wf_step, BisectionSettings, BsProblem,
    InitialPower,
};
use refim_core::scheduling::{objective, schedule_all};

#[test]
fn refim_without_references_is_water_filling() {
    let mut sc = Scenario::preset("hex19").unwrap();
    // one ring keeps 100 instances cheap; the reduction is per BS anyway
    if let refim_core::engine::NetworkSpec::Hex { rings, .. } = &mut sc.network {
        *rings = 1;
    }
    let settings = BisectionSettings::default();
    let gap = sc.propagation.sinr_gap;
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let inst = SlotInstance::random(&sc, seed).unwrap();
        let ctx = inst.context(gap);
        let schedule = schedule_all(&inst.net, &inst.gains, &inst.prev, &inst.weights, gap);
        let none = vec![Vec::new(); inst.net.subchannels()];
        for n in 0..inst.net.bs_count() {
            let a = refim_step(&ctx, n, &schedule, &none, &inst.prev, &settings).unwrap();
            let b = wf_step(&ctx, n, &schedule, &inst.prev, &settings).unwrap();
            for (x, y) in a.powers.iter().zip(&b.powers) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    assert!(worst <= 1e-9, "max |p_refim - p_wf| = {worst} W");
}

#[test]
fn per_subchannel_argmax_matches_exhaustive_schedule() {
    for seed in 0..100u64 {
        let spec = ToySpec {
            bss: 1 + (seed % 2) as usize,
            subchannels: 1 + ((seed / 2) % 2) as usize,
            users_per_cell: 1 + ((seed / 4) % 3) as usize,
            random_weights: true,
            seed,
            ..ToySpec::default()
        };
        let inst = toy_instance(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let powers = initial_power(InitialPower::Random, &inst.template, None, &mut rng);
        let greedy = schedule_all(&inst.net, &inst.gains, &powers, &inst.weights, inst.gap);
        let h = objective(&inst.gains, &powers, &greedy, &inst.weights, inst.gap);
        let (best, _) = exhaustive_schedule(&inst.net, &inst.gains, &powers, &inst.weights, inst.gap);
        assert!(
            (h - best).abs() <= 1e-12 * best.abs().max(1.0),
            "seed {seed}: argmax {h} vs exhaustive {best}"
        );
        assert_eq!(greedy.violations(&inst.net), 0);
    }
}

fn problem() -> impl Strategy<Value = BsProblem> {
    (1usize..=16).prop_flat_map(|s| {
        (
            prop::collection::vec(0.0f64..10.0, s),
            prop::collection::vec(0.0f64..1e3, s),
            prop::collection::vec(1e-6f64..1e2, s),
            prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..20.0], s),
            0.1f64..40.0,
        )
            .prop_map(|(weights, taxes, x, masks, budget)| BsProblem {
                weights,
                taxes,
                inr_over_gain: x.clone(),
                noise_over_gain: x.iter().map(|v| v * 0.5).collect(),
                masks,
                budget,
            })
    })
}

proptest! {
    #[test]
    fn bisection_respects_budget_masks_and_bound(p in problem()) {
        let settings = BisectionSettings::default();
        let a = solve_bs_problem(0, &p, &settings).unwrap();
        let total: f64 = a.powers.iter().sum();
        prop_assert!(total <= p.budget * (1.0 + 1e-6));
        for (w, m) in a.powers.iter().zip(&p.masks) {
            prop_assert!(*w >= 0.0 && *w <= *m);
        }
        prop_assert!(a.within_bound());
    }

    #[test]
    fn kkt_power_is_clipped(w in 0.0f64..10.0, l in 0.0f64..10.0, t in 0.0f64..10.0, x in 0.0f64..10.0, m in 0.0f64..5.0) {
        let p = kkt_power(w, l, t, x, m);
        prop_assert!((0.0..=m).contains(&p));
    }

    #[test]
    fn equal_power_fills_usable_subchannels(masks in prop::collection::vec(prop_oneof![Just(0.0), 1.0f64..20.0], 1..16), budget in 0.1f64..40.0) {
        let p = equal_power(budget, &masks);
        prop_assert!(p.iter().sum::<f64>() <= budget * (1.0 + 1e-12));
        for (x, m) in p.iter().zip(&masks) {
            prop_assert!(*x <= *m);
            prop_assert_eq!(*m == 0.0, *x == 0.0);
        }
    }

    #[test]
    fn geometric_mean_never_exceeds_arithmetic(v in prop::collection::vec(0.0f64..1e7, 1..50)) {
        prop_assert!(gat(&v) <= aat(&v) * (1.0 + 1e-12));
    }
}
