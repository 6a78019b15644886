//! Check the engine against the independent double-double oracle, then
//! show that a single corrupted voxel is caught.
//!
//!     cargo run --release --example pseudo_oracle

use fimcorr::oracle::{compare_map, oracle_map, oracle_pearson};
use fimcorr::stats::pearson;
use fimcorr::{analyze, check_inputs, IdealSeries, Statistic, VolumeGrid4D, Workers};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOLERANCE: f64 = 1e-12;

fn main() {
    // Two-pass mean-centred arithmetic against compensated single-pass sums.
    let a = [1e8 + 1.0, 1e8 + 2.0, 1e8 + 4.0, 1e8 + 3.0];
    let b = [1.0, 2.0, 3.0, 4.0];
    println!("pearson        {:?}", pearson(&a, &b).unwrap());
    println!("oracle_pearson {:?}\n", oracle_pearson(&a, &b).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = (16, 16, 8, 40);
    let samples = (0..16 * 16 * 8 * 40).map(|_| rng.random_range(1.0..500.0)).collect();
    let volume = VolumeGrid4D::new(dims, samples);
    let ideals: Vec<IdealSeries> = (0..2)
        .map(|e| IdealSeries::new(format!("ideal{e}"), (0..40).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap())
        .collect();
    let guard = check_inputs(&volume, &ideals, true);
    let mut maps = analyze(&volume, &ideals, &Statistic::ALL, &guard, Workers::Auto).unwrap();

    for map in &maps {
        let expected = oracle_map(&volume, &ideals, map.statistic).unwrap();
        let d = compare_map(map, &expected, TOLERANCE, |_| 0.0);
        println!("{:>8}: max discrepancy {:e}, passes: {}", map.statistic, d.max_discrepancy, d.passes());
    }

    let v = 5 + 16 * (9 + 16 * 3);
    maps[0].values[v] += 1e-9;
    let expected = oracle_map(&volume, &ideals, Statistic::Pearson).unwrap();
    let d = compare_map(&maps[0], &expected, TOLERANCE, |_| 0.0);
    println!("\nafter nudging one voxel by 1e-9: passes {}, first offender {:?}", d.passes(), d.first_offender);
}
