//! Plant a scaled copy of a square-wave stimulus in one voxel of a
//! 64x64x28x180 volume and find it again.
//!
//!     cargo run --release --example planted_signal

use std::time::Instant;

use fimcorr::{analyze, check_inputs, extrema, IdealSeries, Statistic, VolumeGrid4D, Workers};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let (nx, ny, nz, nt) = (64, 64, 28, 180);
    let target = (23, 27, 22);
    let wave: Vec<f64> = (0..nt).map(|t| ((t / 15) % 2) as f64).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let background = Normal::new(100.0, 5.0).unwrap();
    let voxels = nx * ny * nz;
    let mut samples: Vec<f64> = (0..voxels * nt).map(|_| background.sample(&mut rng)).collect();

    // 3 * wave + 100, with noise at 1% of the signal amplitude.
    let noise = Normal::new(0.0, 0.03).unwrap();
    let v = target.0 + nx * (target.1 + ny * target.2);
    for t in 0..nt {
        samples[v + voxels * t] = 100.0 + 3.0 * wave[t] + noise.sample(&mut rng);
    }
    let volume = VolumeGrid4D::new((nx, ny, nz, nt), samples);
    let ideals = [IdealSeries::new("square", wave).unwrap()];

    let guard = check_inputs(&volume, &ideals, true);
    println!("guard verdict: {:?}", guard.verdict);

    let start = Instant::now();
    let maps = analyze(&volume, &ideals, &Statistic::ALL, &guard, Workers::Auto).unwrap();
    println!("{} voxels x {} statistics in {:.2?}", voxels, maps.len(), start.elapsed());

    for map in &maps {
        print!("{}", extrema(map).unwrap());
    }
    println!("planted at {target:?}; pearson there = {:.6}", maps[0].value_at(target).unwrap());
}
