//! The input guard: machine checks plus the user's acknowledgment of A1-A3.
//!
//!     cargo run --example assumption_guard

use fimcorr::{analyze, check_inputs, warning_text, IdealSeries, Statistic, VolumeGrid4D, Workers};

fn main() {
    print!("{}", warning_text());

    let dims = (3, 3, 2, 6);
    let wave = IdealSeries::new("wave", vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
    let clean: Vec<f64> = (0..3 * 3 * 2 * 6).map(|n| 20.0 + (n % 7) as f64).collect();
    let volume = VolumeGrid4D::new(dims, clean.clone());

    println!("\n--- valid input, not acknowledged");
    let report = check_inputs(&volume, std::slice::from_ref(&wave), false);
    print!("{report}");
    match analyze(&volume, std::slice::from_ref(&wave), &[Statistic::Pearson], &report, Workers::Auto) {
        Ok(_) => println!("analysis ran"),
        Err(e) => println!("analysis refused: {e}"),
    }

    println!("\n--- a negative sample, acknowledged");
    let mut bad = clean.clone();
    bad[2 + 3 * (1 + 3 * 1) + 18 * 4] = -3.0;
    let report = check_inputs(&VolumeGrid4D::new(dims, bad), std::slice::from_ref(&wave), true);
    print!("{report}");

    println!("\n--- ideal of the wrong length");
    let short = IdealSeries::new("short", vec![1.0, 2.0, 3.0]).unwrap();
    print!("{}", check_inputs(&volume, &[short], true));

    println!("\n--- valid and acknowledged");
    let report = check_inputs(&volume, std::slice::from_ref(&wave), true);
    print!("{report}");
    let maps = analyze(&volume, &[wave], &[Statistic::Pearson], &report, Workers::Auto).unwrap();
    println!("{} of {} voxels defined", maps[0].defined_count(), maps[0].values.len());
    for (key, outcome) in report.evidence() {
        println!("  {key}: {outcome:?}");
    }
}
