//! Deterministic direction sets and seeded point clouds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base as u64) as f64;
        i /= base as u64;
        f *= inv;
    }
    r
}

/// `count` unit vectors in `n` dimensions.
///
/// In the plane these are evenly spaced angles starting at the x1 axis.
/// Higher dimensions use Halton points pushed through Box-Muller and
/// normalized, which is deterministic and low-discrepancy on the sphere.
pub fn unit_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        return (0..count).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
    }
    if n == 2 {
        return (0..count)
            .map(|j| {
                let t = std::f64::consts::TAU * j as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let dims = n.div_ceil(2) * 2;
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let u: Vec<f64> = (0..dims).map(|d| radical_inverse(i, PRIMES[d % PRIMES.len()])).collect();
        i += 1;
        let mut v = Vec::with_capacity(dims);
        for pair in u.chunks(2) {
            let r = (-2.0 * (1.0 - pair[0]).ln()).sqrt();
            let t = std::f64::consts::TAU * pair[1];
            v.push(r * t.cos());
            v.push(r * t.sin());
        }
        v.truncate(n);
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(v.iter().map(|c| c / norm).collect());
        }
    }
    out
}

/// Seeded uniform points in an axis-aligned box, kept only where `accept`
/// holds. Gives up after `100 * count` draws.
pub fn random_points(
    seed: u64,
    lo: &[f64],
    hi: &[f64],
    count: usize,
    mut accept: impl FnMut(&[f64]) -> bool,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 100 * count.max(1) {
        tries += 1;
        let p: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| rng.gen_range(*a..*b)).collect();
        if accept(&p) {
            out.push(p);
        }
    }
    out
}

/// Seeded random nonzero direction (not normalized, entries in [-1, 1]).
pub fn random_direction(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().map(|c| c * c).sum::<f64>() > 1e-4 {
            return v;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_directions_are_even() {
        let d = unit_directions(2, 4);
        assert!((d[1][0]).abs() < 1e-15 && (d[1][1] - 1.0).abs() < 1e-15);
        assert!((d[2][0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_directions_are_unit_and_deterministic() {
        let a = unit_directions(3, 32);
        assert_eq!(a, unit_directions(3, 32));
        for v in &a {
            assert!((v.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // roughly balanced: mean is small
        let mean: Vec<f64> = (0..3).map(|k| a.iter().map(|v| v[k]).sum::<f64>() / 32.0).collect();
        assert!(mean.iter().all(|m| m.abs() < 0.3), "{mean:?}");
    }

    #[test]
    fn seeded_points_reproduce() {
        let a = random_points(7, &[0.0, 0.0], &[1.0, 1.0], 5, |p| p[0] > 0.2);
        assert_eq!(a, random_points(7, &[0.0, 0.0], &[1.0, 1.0], 5, |p| p[0] > 0.2));
        assert_eq!(a.len(), 5);
        assert!(a.iter().all(|p| p[0] > 0.2));
    }
}
