//! Write a small planted-signal volume and its ideal series to a directory,
//! ready for the command-line tool.
//!
//!     cargo run --example make_fixture -- /tmp/fim
//!     cargo run -- analyze --input /tmp/fim/run.nii --ideal /tmp/fim/wave.1D \
//!         --out all --prefix /tmp/fim/fim --ack-assumptions

use std::fs;
use std::path::PathBuf;

use fimcorr::nifti::write_volume;
use fimcorr::VolumeGrid4D;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixture".into()));
    fs::create_dir_all(&dir).unwrap();

    let (nx, ny, nz, nt) = (16, 16, 8, 60);
    let wave: Vec<f64> = (0..nt).map(|t| ((t / 6) % 2) as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let background = Normal::new(100.0, 5.0).unwrap();
    let voxels = nx * ny * nz;
    let mut samples: Vec<f64> = (0..voxels * nt).map(|_| background.sample(&mut rng)).collect();
    for (i, j, k, scale) in [(10, 4, 3, 4.0), (2, 13, 6, -4.0)] {
        let v = i + nx * (j + ny * k);
        for t in 0..nt {
            samples[v + voxels * t] = 100.0 + scale * wave[t] + background.sample(&mut rng) * 0.1;
        }
    }
    write_volume(&VolumeGrid4D::new((nx, ny, nz, nt), samples), dir.join("run.nii")).unwrap();

    let mut text = String::from("# block design, 6 frames on / 6 off\n");
    for v in &wave {
        text.push_str(&format!("{v}\n"));
    }
    fs::write(dir.join("wave.1D"), text).unwrap();
    println!("wrote {}/run.nii ({nx}x{ny}x{nz}x{nt}) and {}/wave.1D", dir.display(), dir.display());
    println!("planted +signal at (10,4,3) and -signal at (2,13,6)");
}
