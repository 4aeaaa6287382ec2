#![allow(dead_code)]

use blindsearch::Dist;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Raw weights drawn from one of a few shapes: flat noise, sparse noise,
/// a noisy power law, or log-uniform over six decades. `mu(1)` is always
/// positive.
pub fn random_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let shape = rng.random_range(0..4);
    let alpha: f64 = rng.random_range(0.0..3.0);
    let mut w: Vec<f64> = (1..=n)
        .map(|d| {
            let u: f64 = rng.random();
            match shape {
                0 => u,
                1 => {
                    if rng.random_bool(0.6) {
                        0.0
                    } else {
                        u
                    }
                }
                2 => (d as f64).powf(-alpha) * (0.5 + u),
                _ => 10f64.powf(-6.0 * u),
            }
        })
        .collect();
    if w[0] == 0.0 {
        w[0] = rng.random_range(0.01..1.0);
    }
    w
}

pub fn random_dist<R: Rng>(rng: &mut R, n: usize) -> Dist {
    Dist::make_custom(n, &random_weights(rng, n)).unwrap()
}

pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
