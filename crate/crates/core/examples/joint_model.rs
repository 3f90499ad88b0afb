//! Joint autoregressive fit with exogenous drug lags on a simulated panel
//! where y_t = 0.5 y_{t-1} + 1.0 x_{t-3} + noise.

use lagged_ehr::lagreg::{fit_joint, LagSpec, Model};
use lagged_ehr::timeline::{AlignedTimeline, Parameterization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> lagged_ehr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let panel: Vec<AlignedTimeline> = (0..200)
        .map(|p| {
            let x: Vec<f64> = (0..60).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let mut y = vec![0.0; 60];
            for t in 1..60 {
                let drug = if t >= 3 { x[t - 3] } else { 0.0 };
                y[t] = 0.5 * y[t - 1] + drug + 0.3 * rng.sample::<f64, _>(StandardNormal);
            }
            AlignedTimeline {
                patient_id: format!("p{p}"),
                parameterization: Parameterization::Sequence,
                times: (0..60).map(f64::from).collect(),
                z: vec![0.0; 60],
                x,
                y,
            }
        })
        .collect();
    let fit = fit_joint(&panel, &LagSpec::new(5, Model::Joint, false))?;
    let alpha = fit.alpha.as_ref().expect("joint fit has AR terms");
    println!("rows {} rank {}", fit.rows_used[0], fit.effective_rank[0]);
    for tau in 1..=5 {
        println!("lag {tau}: drug {:+.3}  outcome {:+.3}", fit.beta[tau - 1], alpha[tau - 1]);
    }
    Ok(())
}
