//! Checks shared by the acceptance harness and the integration tests. Each
//! returns a one-line summary on success and the reason on failure.

#![allow(dead_code)]

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lagged_ehr::cohort::{Direction, GoldEntry, GoldStandard, PairId};
use lagged_ehr::evaluate::{gold_auroc, gold_kappa, pearson_fisher, FoldScheme, KappaWeighting, Predictions, KAPPA_RESAMPLES};
use lagged_ehr::inference::{classify_run, sigma_from_samples};
use lagged_ehr::lagreg::{fit_independent, fit_joint, fit_joint_pooled, least_squares, Design, LagSpec, Model};
use lagged_ehr::reference::{expert_gold, knowledge_base_gold, published_grid};
use lagged_ehr::timeline::{AlignedTimeline, Parameterization};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn gold_agreement() -> Check {
    let start = Instant::now();
    let k = gold_kappa(&knowledge_base_gold(), &expert_gold(), KappaWeighting::Unweighted, KAPPA_RESAMPLES, 1)
        .map_err(|e| e.to_string())?;
    let agree = (k.observed_agreement * k.items as f64).round() as usize;
    let secs = start.elapsed().as_secs_f64();
    ensure(k.items == 28 && agree == 19, || format!("agreement {agree}/{}", k.items))?;
    ensure((k.kappa - 0.525).abs() <= 0.005, || format!("kappa {:.4}", k.kappa))?;
    ensure(k.ci.0 <= 0.78 && k.ci.1 >= 0.27, || format!("CI {:?} misses [0.27, 0.78]", k.ci))?;
    ensure(secs < 1.0, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "agreement {agree}/28, kappa {:.4}, CI [{:.3}, {:.3}], {secs:.3}s",
        k.kappa, k.ci.0, k.ci.1
    ))
}

pub fn published_correlation() -> Check {
    let start = Instant::now();
    let (labels, rows) = published_grid();
    ensure(labels == ["expert", "kb"] && rows.len() == 64, || format!("unexpected table {labels:?} x {}", rows.len()))?;
    let col = |i: usize| rows.iter().map(|r| r.scores[i].0).collect::<Vec<_>>();
    let c = pearson_fisher(&col(0), &col(1)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let near = |a: f64, b: f64| (a - b).abs() <= 0.005;
    ensure(near(c.r, 0.759), || format!("r {:.4}", c.r))?;
    ensure(near(c.ci.0, 0.631) && near(c.ci.1, 0.847), || format!("CI [{:.4}, {:.4}]", c.ci.0, c.ci.1))?;
    ensure(secs < 1.0, || format!("took {secs:.2}s"))?;
    Ok(format!("r {:.4}, CI [{:.4}, {:.4}], {secs:.3}s", c.r, c.ci.0, c.ci.1))
}

fn constant(gold: &GoldStandard, f: impl Fn(Direction) -> Direction) -> Predictions {
    gold.entries.iter().map(|e| (e.pair.clone(), f(e.direction))).collect()
}

/// Mann-Whitney statistic with ties counted half.
pub fn rank_statistic(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for p in pos {
        for n in neg {
            s += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    s / (pos.len() * neg.len()) as f64
}

/// Rank-statistic oracle for both fold schemes.
pub fn oracle_auroc(gold: &[i8], pred: &[i8], scheme: FoldScheme) -> f64 {
    match scheme {
        FoldScheme::Folded => {
            let pos: Vec<f64> = gold.iter().zip(pred).filter(|(g, _)| **g != 0).map(|(g, p)| (g * p) as f64).collect();
            let neg: Vec<f64> = gold.iter().zip(pred).filter(|(g, _)| **g == 0).map(|(_, p)| p.abs() as f64).collect();
            rank_statistic(&pos, &neg)
        }
        FoldScheme::Ordinal => {
            let task = |sign: i8| {
                let pos: Vec<f64> = gold.iter().zip(pred).filter(|(g, _)| **g == sign).map(|(_, p)| (sign * p) as f64).collect();
                let neg: Vec<f64> = gold.iter().zip(pred).filter(|(g, _)| **g != sign).map(|(_, p)| (sign * p) as f64).collect();
                rank_statistic(&pos, &neg)
            };
            (task(1) + task(-1)) / 2.0
        }
    }
}

pub fn auroc_anchors() -> Check {
    for gold in [expert_gold(), knowledge_base_gold()] {
        for scheme in [FoldScheme::Folded, FoldScheme::Ordinal] {
            let zero = gold_auroc(&gold, &constant(&gold, |_| Direction::NoEffect), scheme).map_err(|e| e.to_string())?;
            let perfect = gold_auroc(&gold, &constant(&gold, |d| d), scheme).map_err(|e| e.to_string())?;
            ensure(zero == 0.5 && perfect == 1.0, || {
                format!("{} {scheme:?}: zero {zero}, perfect {perfect}", gold.label)
            })?;
        }
    }
    let truth = [-1i8, -1, 0, 0, 1, 1];
    let gold = GoldStandard::new(
        "six",
        truth
            .iter()
            .enumerate()
            .map(|(i, &d)| GoldEntry {
                pair: PairId::new(format!("d{i}"), "lab"),
                direction: Direction::from_i8(d).unwrap(),
            })
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for code in 0..729usize {
        let pred: Vec<i8> = (0..6).map(|k| ((code / 3usize.pow(k)) % 3) as i8 - 1).collect();
        let preds: Predictions = gold
            .entries
            .iter()
            .zip(&pred)
            .map(|(e, &p)| (e.pair.clone(), Direction::from_i8(p).unwrap()))
            .collect();
        for scheme in [FoldScheme::Folded, FoldScheme::Ordinal] {
            let got = gold_auroc(&gold, &preds, scheme).map_err(|e| e.to_string())?;
            worst = worst.max((got - oracle_auroc(&truth, &pred, scheme)).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("trapezoid vs rank statistic differs by {worst:e}"))?;
    Ok(format!("zero 0.500, perfect 1.000, 729 patterns x 2 schemes max deviation {worst:.1e}"))
}

/// Random well-conditioned `rows x cols` design: intercept plus Gaussian
/// columns.
pub fn random_design(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Design {
    let coef: Vec<f64> = (0..cols).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut d = Design::new(cols);
    let mut row = vec![0.0; cols];
    for _ in 0..rows {
        row[0] = 1.0;
        for v in row.iter_mut().skip(1) {
            *v = rng.sample(StandardNormal);
        }
        let noise: f64 = rng.sample(StandardNormal);
        let y = row.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>() + 0.5 * noise;
        d.push_row(&row, y);
    }
    d
}

pub fn normal_equations(d: &Design) -> Vec<f64> {
    let x = DMatrix::from_row_slice(d.rows(), d.cols, &d.data);
    let y = DVector::from_vec(d.target.clone());
    let xtx = x.transpose() * &x;
    xtx.cholesky().expect("positive definite").solve(&(x.transpose() * y)).as_slice().to_vec()
}

pub fn least_squares_oracle(instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_rel, mut worst_orth) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let cols = rng.random_range(2..=10);
        let rows = rng.random_range(cols * 3..=200);
        let d = random_design(&mut rng, rows, cols);
        let fit = least_squares(&d).map_err(|e| e.to_string())?;
        ensure(fit.rank == cols, || format!("rank {} of {cols}", fit.rank))?;
        let oracle = normal_equations(&d);
        let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let rel = fit.coef.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        let xnorm = d.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ynorm = d.target.iter().map(|v| v * v).sum::<f64>().sqrt();
        let orth = (0..cols)
            .map(|j| (0..rows).map(|i| d.row(i)[j] * fit.residuals[i]).sum::<f64>().abs())
            .fold(0.0, f64::max)
            / (xnorm * ynorm);
        worst_rel = worst_rel.max(rel);
        worst_orth = worst_orth.max(orth);
    }
    ensure(worst_rel <= 1e-8, || format!("relative coefficient error {worst_rel:e}"))?;
    ensure(worst_orth <= 1e-6, || format!("scaled |X'e| {worst_orth:e}"))?;
    Ok(format!("{instances} instances, max relative error {worst_rel:.1e}, max scaled |X'e| {worst_orth:.1e}"))
}

fn seq_timeline(id: String, x: Vec<f64>, y: Vec<f64>) -> AlignedTimeline {
    let n = x.len();
    AlignedTimeline {
        patient_id: id,
        parameterization: Parameterization::Sequence,
        times: (0..n).map(|i| i as f64).collect(),
        z: vec![0.0; n],
        x,
        y,
    }
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    v.iter_mut().for_each(|x| *x = (*x - m) / sd);
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Each lag's aligned samples are standardized, then laid out as
/// two-point patients so the independent model at that lag sees exactly
/// those pairs.
pub fn slope_correlation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for tau in 1..=5 {
        let n = 150;
        let mut xs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut ys: Vec<f64> = xs.iter().map(|x| 0.6 * x + rng.sample::<f64, _>(StandardNormal)).collect();
        standardize(&mut xs);
        standardize(&mut ys);
        let panel: Vec<AlignedTimeline> = (0..n)
            .map(|i| {
                let mut x = vec![0.0; tau + 1];
                let mut y = vec![0.0; tau + 1];
                x[0] = xs[i];
                y[tau] = ys[i];
                seq_timeline(format!("p{i}"), x, y)
            })
            .collect();
        let fit = fit_independent(&panel, tau);
        let beta = fit.beta[tau - 1];
        let r = pearson(&xs, &ys);
        ensure(fit.rows_used[tau - 1] == n, || format!("lag {tau}: {} rows", fit.rows_used[tau - 1]))?;
        worst = worst.max((beta - r).abs());
    }
    ensure(worst <= 1e-10, || format!("|beta - r| up to {worst:e}"))?;
    Ok(format!("lags 1-5, max |beta - r| {worst:.1e}"))
}

pub fn simulate_arx(seed: u64, patients: usize, points: usize) -> Vec<AlignedTimeline> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..patients)
        .map(|p| {
            let x: Vec<f64> = (0..points).map(|_| rng.sample(StandardNormal)).collect();
            let mut y = vec![0.0; points];
            y[0] = rng.sample(StandardNormal);
            for t in 1..points {
                let drug = if t >= 3 { x[t - 3] } else { 0.0 };
                y[t] = 0.5 * y[t - 1] + drug + rng.sample::<f64, _>(StandardNormal);
            }
            seq_timeline(format!("p{p}"), x, y)
        })
        .collect()
}

pub fn joint_recovery() -> Check {
    let start = Instant::now();
    let spec = LagSpec::new(5, Model::Joint, false);
    let mut summary = Vec::new();
    for seed in 1..=5 {
        let panel = simulate_arx(seed, 200, 60);
        for (name, fit) in [("qr", fit_joint(&panel, &spec)), ("pooled", fit_joint_pooled(&panel, &spec))] {
            let fit = fit.map_err(|e| e.to_string())?;
            let a1 = fit.alpha.as_ref().unwrap()[0];
            let b3 = fit.beta[2];
            ensure((0.4..=0.6).contains(&a1) && (0.9..=1.1).contains(&b3), || {
                format!("seed {seed} {name}: alpha1 {a1:.3}, beta3 {b3:.3}")
            })?;
            if name == "qr" {
                summary.push(format!("{a1:.3}/{b3:.3}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1}s"))?;
    Ok(format!("alpha1/beta3 per seed {}, {secs:.2}s", summary.join(" ")))
}

fn classify(beta: &[f64], sigma: &[f64]) -> i8 {
    classify_run(beta, sigma).as_i8()
}

/// Profile generator biased towards long same-sign stretches so every
/// branch of the run rule is exercised.
fn random_profile(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let level: f64 = rng.random_range(-2.0..2.0);
    let beta = (0..30).map(|_| level + rng.random_range(-1.0..1.0)).collect();
    let sigma = (0..30).map(|_| rng.random_range(0.0..0.6)).collect();
    (beta, sigma)
}

pub fn classification_properties(cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let samples: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..30).map(|t| if t == 7 && rng.random::<f64>() < 0.2 { f64::NAN } else { rng.sample(StandardNormal) }).collect())
        .collect();
    let sigma = sigma_from_samples(&samples, 30);
    for t in 0..30 {
        let v: Vec<f64> = samples.iter().map(|s| s[t]).filter(|v| v.is_finite()).collect();
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        ensure((sigma[t] - sd).abs() <= 1e-12, || format!("sigma[{t}] {} vs oracle {sd}", sigma[t]))?;
    }
    let mut calls = [0usize; 3];
    for case in 0..cases {
        let (b, s) = random_profile(&mut rng);
        let c = classify(&b, &s);
        calls[(c + 1) as usize] += 1;
        let neg: Vec<f64> = b.iter().map(|v| -v).collect();
        ensure(classify(&neg, &s) == -c, || format!("case {case}: sign antisymmetry"))?;
        let k = 10f64.powf(rng.random_range(-2.0..2.0));
        let bk: Vec<f64> = b.iter().map(|v| v * k).collect();
        let sk: Vec<f64> = s.iter().map(|v| v * k).collect();
        ensure(classify(&bk, &sk) == c, || format!("case {case}: scale {k}"))?;
        if c == 0 {
            let wide: Vec<f64> = s.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
            ensure(classify(&b, &wide) == 0, || format!("case {case}: wider interval created a call"))?;
        }
    }
    ensure(calls.iter().all(|&n| n > cases / 20), || format!("unbalanced cases {calls:?}"))?;
    Ok(format!("sigma oracle ok; {cases} profiles (calls -/0/+ {calls:?})"))
}

/// Small synthetic study used by the determinism and resumability checks.
pub const SMALL_STUDY: &str = r#"
max_lag = 30
replicates = 8
seed = 3
grid = "all"

[synth]
seed = 4
patients = 30
"#;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lagged-ehr")
}

pub fn run_cli(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(bin()).args(args).env("RUST_LOG", "warn").output().map_err(|e| e.to_string())
}

/// Every file below `dir` as `(relative path, bytes)`, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// `run` + `report` through the binary with each worker count, twice over
/// for the first, and compare every output byte.
pub fn end_to_end_determinism(study_text: &str, workers: &[usize]) -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let study = tmp.path().join("study.toml");
    std::fs::write(&study, study_text).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    let mut plan: Vec<usize> = workers.to_vec();
    plan.insert(1, workers[0]);
    for (i, w) in plan.iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let out_s = out.to_string_lossy().into_owned();
        let study_s = study.to_string_lossy().into_owned();
        let w_s = w.to_string();
        for args in [
            vec!["run", "--study", &study_s, "--out", &out_s, "--workers", &w_s],
            vec!["report", "--out", &out_s],
        ] {
            let o = run_cli(&args)?;
            ensure(o.status.success(), || {
                format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr))
            })?;
        }
        runs.push(snapshot(&out));
    }
    let files = runs[0].len();
    ensure(files > 0, || "no outputs".into())?;
    for (i, r) in runs.iter().enumerate().skip(1) {
        if r != &runs[0] {
            let names: Vec<&String> = r.iter().map(|f| &f.0).collect();
            let diff = runs[0]
                .iter()
                .find(|f| !r.contains(f))
                .map(|f| f.0.clone())
                .unwrap_or_else(|| format!("file sets differ ({} vs {})", files, names.len()));
            return Err(format!("run {i} (workers {}) differs at {diff}", plan[i]));
        }
    }
    Ok(format!("{} runs (workers {plan:?}) byte-identical over {files} files", plan.len()))
}

/// Configurations the grid criterion speaks about: the preferred sequence
/// set plus every mismatched differencing/model pairing.
pub const RELEVANT_GRID: &str = "time=seq,diff=yes,model=joint | time=seq,diff=no,model=indep | diff=no,model=joint | diff=yes,model=indep";

/// One seed of the default synthetic study at `replicates`; returns the
/// lowest preferred AUROC and the highest mismatched AUROC.
pub fn grid_seed(seed: u64, replicates: usize, out: &Path) -> Result<(f64, f64), String> {
    use lagged_ehr::store::{run_grid, Store};
    use lagged_ehr::study::{Study, StudyInput, DEFAULT_STUDY};
    let mut study = Study::parse(DEFAULT_STUDY, out).map_err(|e| e.to_string())?;
    study.out_dir = out.to_path_buf();
    study.replicates = replicates;
    study.seed = seed;
    study.grid = RELEVANT_GRID.into();
    if let StudyInput::Synthetic { data_seed, .. } = &mut study.input {
        *data_seed = seed;
    }
    run_grid(&study).map_err(|e| e.to_string())?;
    let reports = Store::open(out).and_then(|s| s.evaluate()).map_err(|e| e.to_string())?;
    let (mut good, mut bad) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &reports[0] {
        let c = r.config;
        if c.is_preferred() {
            good = good.min(r.auroc);
        } else {
            bad = bad.max(r.auroc);
        }
    }
    Ok((good, bad))
}

pub fn grid_reproduction(seeds: &[u64], replicates: usize) -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut passed = 0;
    let mut detail = Vec::new();
    for &seed in seeds {
        let (good, bad) = grid_seed(seed, replicates, &tmp.path().join(seed.to_string()))?;
        let ok = good >= 0.75 && bad <= 0.55;
        passed += ok as usize;
        detail.push(format!("seed {seed}: min preferred {good:.3}, max mismatched {bad:.3}{}", if ok { "" } else { " (fail)" }));
    }
    let secs = start.elapsed().as_secs_f64();
    let need = seeds.len().saturating_sub(1).max(1);
    let summary = format!("{passed}/{} seeds; {}; {secs:.0}s", seeds.len(), detail.join("; "));
    if passed >= need {
        Ok(summary)
    } else {
        Err(summary)
    }
}
