//! Ranks with ties, and how the three coefficients treat them.
//!
//!     cargo run --example rank_ties

use fimcorr::stats::{pearson, quadrant, rank, ranks, spearman};

fn main() {
    let a = [1.0, 2.0, 2.0, 3.0];
    println!("ranks({a:?}) = {:?}", ranks(&a).as_slice());
    println!("rank(2, {a:?}) = {}", rank(2.0, &a).unwrap());

    let x = [3.1, 0.4, 0.4, 7.0, 2.2, 2.2, 2.2, 9.5];
    let y = [10.0, 1.0, 2.0, 40.0, 4.0, 3.0, 5.0, 90.0];
    println!("\nx = {x:?}\ny = {y:?}");
    println!("pearson  = {:?}", pearson(&x, &y).unwrap());
    println!("spearman = {:?}", spearman(&x, &y).unwrap());
    println!("quadrant = {:?}", quadrant(&x, &y).unwrap());

    // A monotone transform leaves ranks, and so Spearman, untouched.
    let cubed: Vec<f64> = x.iter().map(|v| v * v * v).collect();
    println!("\nspearman(x^3, y) = {:?}", spearman(&cubed, &y).unwrap());
    println!("pearson(x^3, y)  = {:?}", pearson(&cubed, &y).unwrap());

    // Undefined cases are values, not errors.
    println!("\nconstant series: {:?}", pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]).unwrap());
    println!("all signs zero:  {:?}", quadrant(&[1.0, 4.0, 2.0, 2.0], &[2.0, 2.0, 1.0, 3.0]).unwrap());
    println!("length mismatch: {:?}", pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]));
}
