mod common;

use common::{bessel_j0, fading_stats};
use refim_core::channel::{Link, PropagationConfig};
use refim_core::topology::Tier;

#[test]
fn j0_series_matches_known_values() {
    assert_eq!(bessel_j0(0.0), 1.0);
    assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-12);
    assert!((bessel_j0(5.0) + 0.177_596_771_314_338_3).abs() < 1e-12);
    // first zero
    assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-12);
}

#[test]
fn jakes_unit_mean_and_j0_autocorrelation() {
    // lags up to f_d·τ = 1.5, i.e. past the third zero of J0; beyond that an
    // eight-oscillator sum drifts from the Clarke spectrum by design
    let stats = fading_stats(4000, 16, 2000, 15, 7);
    println!("mean {:.4}, max |rho - J0| {:.4}", stats.mean_power, stats.max_j0_error());
    assert!((stats.mean_power - 1.0).abs() < 0.03, "mean power {}", stats.mean_power);
    assert!(stats.max_j0_error() < 0.02, "autocorrelation error {}", stats.max_j0_error());
}

#[test]
fn path_loss_spot_values() {
    let cfg = PropagationConfig::default();
    let outdoor = Link {
        bs_tier: Tier::Macro,
        crosses_wall: false,
    };
    let home = Link {
        bs_tier: Tier::Femto,
        crosses_wall: false,
    };
    assert!((cfg.path_loss_db(outdoor, 100.0) - 91.82).abs() < 0.01);
    assert!((cfg.path_loss_db(home, 10.0) - 69.0).abs() < 0.01);
}

#[test]
fn noise_floor_for_default_subchannel() {
    let w = PropagationConfig::default().noise_power_w(625e3);
    assert!((w - 1.977e-14).abs() / 1.977e-14 < 1e-3, "{w}");
}
