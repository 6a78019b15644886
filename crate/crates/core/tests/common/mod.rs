#![allow(dead_code)]

use fimcorr::nifti::VolumeGrid4D;
use fimcorr::timeseries::IdealSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random series of length `n`. With probability `tie_rate` each element is
/// drawn from a pool of five integers, so ties are common.
pub fn series(rng: &mut impl Rng, n: usize, tie_rate: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.random_bool(tie_rate) {
                rng.random_range(0..5) as f64
            } else {
                rng.random_range(-100.0..100.0)
            }
        })
        .collect()
}

/// A series with at least two distinct values.
pub fn non_constant(rng: &mut impl Rng, n: usize, tie_rate: f64) -> Vec<f64> {
    loop {
        let s = series(rng, n, tie_rate);
        if s.iter().any(|&v| v != s[0]) {
            return s;
        }
    }
}

/// Alternating blocks of `half` zeros and `half` ones.
pub fn square_wave(nt: usize, half: usize) -> Vec<f64> {
    (0..nt).map(|t| ((t / half) % 2) as f64).collect()
}

pub fn ideal(label: &str, values: Vec<f64>) -> IdealSeries {
    IdealSeries::new(label, values).unwrap()
}

/// Positive background: `baseline + N(0, sigma)` everywhere, then each
/// planted voxel overwritten with `offset + scale * ideal + N(0, noise)`.
pub fn planted_volume(
    dims: (usize, usize, usize, usize),
    ideal: &[f64],
    planted: &[((usize, usize, usize), f64, f64)],
    noise: f64,
    seed: u64,
) -> VolumeGrid4D {
    let (nx, ny, nz, nt) = dims;
    let mut rng = rng(seed);
    let background = Normal::new(0.0, 5.0).unwrap();
    let voxels = nx * ny * nz;
    let mut samples: Vec<f64> = (0..voxels * nt)
        .map(|_| 100.0 + background.sample(&mut rng))
        .collect();
    let jitter = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).unwrap();
    for &((i, j, k), scale, offset) in planted {
        let v = i + nx * (j + ny * k);
        for t in 0..nt {
            let n = if noise > 0.0 { jitter.sample(&mut rng) } else { 0.0 };
            samples[v + voxels * t] = offset + scale * ideal[t] + n;
        }
    }
    VolumeGrid4D::new(dims, samples)
}

/// Uniform positive volume with no planted structure.
pub fn random_volume(dims: (usize, usize, usize, usize), seed: u64) -> VolumeGrid4D {
    let (nx, ny, nz, nt) = dims;
    let mut rng = rng(seed);
    let samples = (0..nx * ny * nz * nt)
        .map(|_| rng.random_range(1.0..1000.0))
        .collect();
    VolumeGrid4D::new(dims, samples)
}
