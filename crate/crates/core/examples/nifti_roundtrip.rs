//! Write a 4D volume, read it back, and write a correlation map with its
//! undefined-voxel sidecar.
//!
//!     cargo run --example nifti_roundtrip

use std::fs;

use fimcorr::nifti::{self, Endianness, NiftiHeader};
use fimcorr::{analyze, check_inputs, read_volume, write_map, IdealSeries, Statistic, VolumeGrid4D, Workers};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let (nx, ny, nz, nt) = (5, 4, 3, 8);
    let wave: Vec<f64> = (0..nt).map(|t| (t % 2) as f64).collect();
    let mut samples = Vec::new();
    for t in 0..nt {
        for v in 0..nx * ny * nz {
            // voxel 7 never changes, so its correlation is undefined
            samples.push(if v == 7 { 50.0 } else { 10.0 + v as f64 + (v % 3) as f64 * wave[t] + 0.1 * t as f64 });
        }
    }
    let volume = VolumeGrid4D::new((nx, ny, nz, nt), samples);

    let path = dir.path().join("run.nii");
    nifti::write_volume(&volume, &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    let header = nifti::parse_header(&bytes).unwrap();
    println!("wrote {} bytes; dim = {:?}, datatype {:?}", bytes.len(), header.dim, header.datatype);

    let back = read_volume(&path).unwrap();
    let worst = volume
        .samples()
        .iter()
        .zip(back.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    // Samples are stored as float32, so expect rounding at the 1e-6 level.
    println!("read back {:?}, largest change {worst:e}", back.dims());
    println!("orientation: {}", back.orientation());

    let big = nifti::encode_volume(&volume, Endianness::Big);
    let from_big = nifti::decode_volume(&big).unwrap();
    println!("big-endian copy decodes to the same samples: {}", from_big == back);

    let ideals = [IdealSeries::new("alt", wave).unwrap()];
    let guard = check_inputs(&back, &ideals, true);
    let maps = analyze(&back, &ideals, &[Statistic::Pearson], &guard, Workers::Auto).unwrap();
    let template = NiftiHeader::for_grid(&[nx, ny, nz, nt], header.datatype);
    let map_path = dir.path().join("fim_pearson.nii");
    let sidecar = write_map(&maps[0], &template, &map_path).unwrap();
    println!("\nmap -> {}", map_path.file_name().unwrap().to_string_lossy());
    println!("sidecar {}:", sidecar.file_name().unwrap().to_string_lossy());
    print!("{}", fs::read_to_string(&sidecar).unwrap());

    for ijk in [(0, 0, 0), (4, 3, 2), (2, 1, 0)] {
        println!("{ijk:?}: {}", nifti::voxel_to_anatomical(ijk, (nx, ny, nz)).unwrap());
    }
}
