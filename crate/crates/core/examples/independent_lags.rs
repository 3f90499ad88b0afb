//! Independent per-lag regressions; on standardized data each slope is
//! the lagged correlation.

use lagged_ehr::lagreg::{fit_independent, simple_regression};
use lagged_ehr::timeline::{AlignedTimeline, Parameterization};
use lagged_ehr::transform::zscore;

fn main() {
    let n = 120;
    let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 17) as f64).sin()).collect();
    let y: Vec<f64> = (0..n).map(|i| if i >= 2 { 0.8 * x[i - 2] } else { 0.0 } + 0.2 * ((i * 13 % 7) as f64 - 3.0)).collect();
    let tl = AlignedTimeline {
        patient_id: "p".into(),
        parameterization: Parameterization::Sequence,
        times: (0..n).map(|i| i as f64).collect(),
        z: vec![0.0; n],
        x: x.clone(),
        y: y.clone(),
    };
    let fit = fit_independent(&[tl], 4);
    for (tau, b) in fit.beta.iter().enumerate() {
        println!("lag {}: slope {:+.3} on {} rows", tau + 1, b, fit.rows_used[tau]);
    }

    // Jointly standardized lag-2 samples: slope equals Pearson r.
    let (mut xs, mut ys) = (x[..n - 2].to_vec(), y[2..].to_vec());
    zscore(&mut xs);
    zscore(&mut ys);
    let slope = simple_regression(&xs, &ys).expect("non-constant").slope;
    let r = xs.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / (xs.len() - 1) as f64;
    println!("standardized slope {slope:.12} correlation {r:.12}");
}
