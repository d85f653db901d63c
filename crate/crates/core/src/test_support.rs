use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::geometry::{Point, PolygonalCurve};

/// Star-shaped random polygon around the unit circle.
pub(crate) fn random_polygon(n: usize, seed: u64) -> PolygonalCurve {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices = (0..n)
        .map(|j| {
            let theta = 2.0 * PI * (j as f64 + rng.random_range(-0.3..0.3)) / n as f64;
            let r = 1.0 + rng.random_range(-0.2..0.2);
            Point::new(r * theta.cos(), r * theta.sin())
        })
        .collect();
    PolygonalCurve::new(vertices).unwrap()
}

/// Radial curve `1 + a₂cos(2θ + φ₂) + a₃cos(3θ + φ₃)` with random
/// amplitudes and phases, sampled at slightly jittered parameters.
pub(crate) fn random_smooth_polygon(n: usize, seed: u64) -> PolygonalCurve {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> = (2..=3)
        .map(|k| (k as f64, rng.random_range(0.0..0.1), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let vertices = (0..n)
        .map(|j| {
            let theta = 2.0 * PI * (j as f64 + rng.random_range(-0.1..0.1)) / n as f64;
            let r = 1.0 + modes.iter().map(|(k, a, p)| a * (k * theta + p).cos()).sum::<f64>();
            Point::new(r * theta.cos(), r * theta.sin())
        })
        .collect();
    PolygonalCurve::new(vertices).unwrap()
}

pub(crate) fn random_vector(n: usize, seed: u64) -> nalgebra::DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}
