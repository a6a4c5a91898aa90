//! Regenerates `src/statcompare/q_table.rs`.
//!
//! The Nemenyi critical value is the upper-α quantile of the studentized
//! range of m standard normals with infinite degrees of freedom, divided by
//! √2. The range CDF m∫φ(z)[Φ(z) − Φ(z − q)]^(m−1) dz is integrated with
//! composite Simpson on [−12, 12] and inverted by bisection.
//!
//! cargo run -p imbapipe-core --example gen_q_table > crates/core/src/statcompare/q_table.rs

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const MAX_M: usize = 50;

fn range_cdf(q: f64, m: usize, normal: &Normal) -> f64 {
    let (lo, hi, steps) = (-12.0, 12.0, 24_000);
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| normal.pdf(z) * (normal.cdf(z) - normal.cdf(z - q)).powi(m as i32 - 1);
    let mut sum = f(lo) + f(hi);
    for i in 1..steps {
        let z = lo + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 * f(z) } else { 2.0 * f(z) };
    }
    m as f64 * sum * h / 3.0
}

fn quantile(p: f64, m: usize, normal: &Normal) -> f64 {
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if range_cdf(mid, m, normal) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn main() {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    println!("//! Nemenyi critical values q_α = studentized-range quantile / √2 (infinite df).");
    println!("//! Generated by `examples/gen_q_table.rs`; do not edit by hand.");
    println!();
    println!("/// Largest pipeline count covered by the table.");
    println!("pub const MAX_PIPELINES: usize = {MAX_M};");
    for (name, alpha) in [("Q_05", 0.05), ("Q_10", 0.10)] {
        println!();
        println!("/// α = {alpha}; entry i is m = i + 2.");
        println!("pub const {name}: [f64; {}] = [", MAX_M - 1);
        for m in 2..=MAX_M {
            let q = quantile(1.0 - alpha, m, &normal) / std::f64::consts::SQRT_2;
            println!("    {q:.6},");
        }
        println!("];");
    }
}
