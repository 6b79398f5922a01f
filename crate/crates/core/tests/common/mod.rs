#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use refim_core::channel::FadingState;

/// Bessel J0 by its power series; accurate to ~1e-12 for |x| < 20.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum
}

pub struct FadingStats {
    /// E|h|² over links and time.
    pub mean_power: f64,
    /// Normalized Re E[h(t) h*(t+τ)] for τ = 0..lags slots.
    pub autocorr: Vec<f64>,
    pub doppler_hz: f64,
    pub dt: f64,
}

/// Monte Carlo over `links` independent (user, subchannel) processes.
pub fn fading_stats(links: usize, subchannels: usize, steps: usize, lags: usize, seed: u64) -> FadingStats {
    let doppler_hz = 100.0;
    let dt = 1e-3;
    let users = links / subchannels;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = FadingState::new(users, 1, subchannels, 8, vec![doppler_hz; users], &mut rng);
    let mut history = Vec::with_capacity(steps);
    for _ in 0..steps {
        let row: Vec<_> = (0..users)
            .flat_map(|u| (0..subchannels).map(move |s| (u, s)))
            .map(|(u, s)| f.coefficient(u, 0, s))
            .collect();
        history.push(row);
        f.advance(dt);
    }
    let n = (users * subchannels) as f64;
    let mean_power = history.iter().flatten().map(|h| h.norm_sqr()).sum::<f64>() / (n * steps as f64);
    let autocorr = (0..=lags)
        .map(|lag| {
            let mut acc = 0.0;
            let pairs = steps - lag;
            for t in 0..pairs {
                for (a, b) in history[t].iter().zip(&history[t + lag]) {
                    acc += (*a * b.conj()).re;
                }
            }
            acc / (n * pairs as f64) / mean_power
        })
        .collect();
    FadingStats {
        mean_power,
        autocorr,
        doppler_hz,
        dt,
    }
}

impl FadingStats {
    /// Largest |ρ̂(τ) − J0(2π f_d τ)| over the computed lags.
    pub fn max_j0_error(&self) -> f64 {
        self.autocorr
            .iter()
            .enumerate()
            .map(|(lag, r)| (r - bessel_j0(2.0 * std::f64::consts::PI * self.doppler_hz * self.dt * lag as f64)).abs())
            .fold(0.0, f64::max)
    }
}
