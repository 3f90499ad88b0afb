//! Rank-revealing QR least squares, checked against the normal equations.

use lagged_ehr::lagreg::{least_squares, Design};
use nalgebra::{DMatrix, DVector};

fn main() -> lagged_ehr::Result<()> {
    let mut d = Design::new(3);
    for i in 0..50 {
        let t = i as f64 / 10.0;
        d.push_row(&[1.0, t, (t * 1.3).sin()], 2.0 - 0.5 * t + 0.8 * (t * 1.3).sin() + 0.01 * ((i * 7 % 11) as f64 - 5.0));
    }
    let fit = least_squares(&d)?;
    println!("coef {:?} rank {} rss {:.3e}", fit.coef, fit.rank, fit.rss());

    let x = DMatrix::from_row_slice(d.rows(), d.cols, &d.data);
    let y = DVector::from_vec(d.target.clone());
    let normal = (x.transpose() * &x).lu().solve(&(x.transpose() * y)).expect("well conditioned");
    println!("normal equations {:?}", normal.as_slice());

    // A duplicated column is detected, not inverted.
    let mut dup = Design::new(3);
    for i in 0..10 {
        let t = i as f64;
        dup.push_row(&[1.0, t, t], 3.0 * t);
    }
    println!("collinear design rank {}", least_squares(&dup)?.rank);
    Ok(())
}
