//! Patient-level bootstrap of lag coefficients and trajectory
//! classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cohort::Direction;
use crate::error::{Error, Result};
use crate::evaluate::sample_sd;
use crate::lagreg::PooledStats;

pub const DEFAULT_REPLICATES: usize = 200;
/// Consecutive significant lags needed for a directional call.
pub const RUN_LENGTH: usize = 15;
/// Half-width multiplier of the per-lag confidence interval.
pub const CI_MULTIPLIER: f64 = 1.96;

/// Which estimate the profile reports as `beta_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointEstimate {
    #[default]
    FullCohort,
    BootstrapMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapSpec {
    pub replicates: usize,
    pub seed: u64,
    pub point: PointEstimate,
}

impl BootstrapSpec {
    pub fn new(replicates: usize, seed: u64) -> Result<Self> {
        if replicates < 2 {
            return Err(Error::Invalid(format!("need at least 2 replicates, got {replicates}")));
        }
        Ok(BootstrapSpec {
            replicates,
            seed,
            point: PointEstimate::FullCohort,
        })
    }
}

/// Patient multiplicities for replicate `b`. They depend only on
/// `(seed, b, patients)`, so every configuration fitted on the same cohort
/// sees the same resamples.
pub fn resample_weights(patients: usize, seed: u64, b: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    let mut w = vec![0u32; patients];
    for _ in 0..patients {
        w[rng.random_range(0..patients)] += 1;
    }
    w
}

/// Point estimates, bootstrap spread and stored replicate coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LagProfile {
    pub beta_hat: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `samples[b][tau-1]`; NaN where the replicate left the lag undefined.
    pub samples: Vec<Vec<f64>>,
    pub undefined: Vec<bool>,
    /// Replicates whose pooled design had no rows.
    pub empty_replicates: Vec<bool>,
}

/// Per-lag sample sd over the defined replicate values; NaN when fewer
/// than two are defined.
pub fn sigma_from_samples(samples: &[Vec<f64>], lags: usize) -> Vec<f64> {
    (0..lags)
        .map(|t| {
            let vals: Vec<f64> = samples.iter().map(|s| s[t]).filter(|v| v.is_finite()).collect();
            if vals.len() < 2 {
                f64::NAN
            } else {
                sample_sd(&vals)
            }
        })
        .collect()
}

impl LagProfile {
    pub fn max_lag(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn replicates(&self) -> usize {
        self.samples.len()
    }

    /// Assemble from a point fit and replicate fits.
    pub fn from_parts(beta: Vec<f64>, samples: Vec<Vec<f64>>, empty: Vec<bool>, point: PointEstimate) -> Self {
        let l = beta.len();
        let sigma = sigma_from_samples(&samples, l);
        let beta_hat = match point {
            PointEstimate::FullCohort => beta,
            PointEstimate::BootstrapMean => (0..l)
                .map(|t| {
                    let vals: Vec<f64> = samples.iter().map(|s| s[t]).filter(|v| v.is_finite()).collect();
                    if vals.is_empty() {
                        f64::NAN
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    }
                })
                .collect(),
        };
        let undefined = beta_hat.iter().zip(&sigma).map(|(b, s)| !b.is_finite() || !s.is_finite()).collect();
        LagProfile {
            beta_hat,
            sigma,
            samples,
            undefined,
            empty_replicates: empty,
        }
    }

    /// Text form: `#` header, `tau,beta_hat,sigma` rows, then optionally a
    /// `# samples` block with one comma-separated replicate per line.
    /// Undefined values are written as empty fields.
    pub fn to_text(&self, config_digest: &str, seed: u64, with_samples: bool) -> String {
        let f = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
        let mut out = format!(
            "# config {config_digest}\n# replicates {}\n# seed {seed}\ntau,beta_hat,sigma\n",
            self.replicates()
        );
        for t in 0..self.max_lag() {
            out.push_str(&format!("{},{},{}\n", t + 1, f(self.beta_hat[t]), f(self.sigma[t])));
        }
        if with_samples {
            out.push_str("# samples\n");
            for (s, empty) in self.samples.iter().zip(&self.empty_replicates) {
                if *empty {
                    out.push('!');
                }
                out.push_str(&s.iter().map(|v| f(*v)).collect::<Vec<_>>().join(","));
                out.push('\n');
            }
        }
        out
    }

    /// Parse [`LagProfile::to_text`] output; returns the profile, the
    /// config digest and the seed.
    pub fn from_text(text: &str) -> Result<(LagProfile, String, u64)> {
        let mut digest = None;
        let mut seed = None;
        let mut replicates = None;
        let mut beta_hat = Vec::new();
        let mut sigma = Vec::new();
        let mut samples = Vec::new();
        let mut empty = Vec::new();
        let mut in_samples = false;
        let num = |line: usize, s: &str| -> Result<f64> {
            if s.is_empty() {
                return Ok(f64::NAN);
            }
            s.parse().map_err(|_| Error::parse(line, format!("bad number {s:?}")))
        };
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if let Some(rest) = line.strip_prefix("# ") {
                let (key, val) = rest.split_once(' ').unwrap_or((rest, ""));
                match key {
                    "config" => digest = Some(val.to_string()),
                    "replicates" => {
                        replicates = Some(val.parse::<usize>().map_err(|_| Error::parse(ln, "bad replicate count"))?)
                    }
                    "seed" => seed = Some(val.parse::<u64>().map_err(|_| Error::parse(ln, "bad seed"))?),
                    "samples" => in_samples = true,
                    _ => return Err(Error::parse(ln, format!("unknown header {key:?}"))),
                }
            } else if line == "tau,beta_hat,sigma" {
                continue;
            } else if in_samples {
                let (flag, body) = match line.strip_prefix('!') {
                    Some(b) => (true, b),
                    None => (false, line),
                };
                empty.push(flag);
                samples.push(body.split(',').map(|s| num(ln, s)).collect::<Result<Vec<_>>>()?);
            } else {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 3 {
                    return Err(Error::parse(ln, "expected tau,beta_hat,sigma"));
                }
                let tau: usize = f[0].parse().map_err(|_| Error::parse(ln, "bad lag"))?;
                if tau != beta_hat.len() + 1 {
                    return Err(Error::parse(ln, format!("lag {tau} out of order")));
                }
                beta_hat.push(num(ln, f[1])?);
                sigma.push(num(ln, f[2])?);
            }
        }
        let digest = digest.ok_or_else(|| Error::parse(1, "missing config header"))?;
        let seed = seed.ok_or_else(|| Error::parse(1, "missing seed header"))?;
        let replicates = replicates.ok_or_else(|| Error::parse(1, "missing replicates header"))?;
        if in_samples && samples.len() != replicates {
            return Err(Error::Invalid(format!("expected {replicates} samples, found {}", samples.len())));
        }
        if samples.iter().any(|s| s.len() != beta_hat.len()) {
            return Err(Error::Invalid("sample width differs from lag count".into()));
        }
        let undefined = beta_hat.iter().zip(&sigma).map(|(b, s)| !b.is_finite() || !s.is_finite()).collect();
        Ok((
            LagProfile {
                beta_hat,
                sigma,
                samples,
                undefined,
                empty_replicates: empty,
            },
            digest,
            seed,
        ))
    }
}

/// Full-cohort fit plus `replicates` resampled fits from precomputed
/// per-patient statistics.
pub fn bootstrap_stats(stats: &PooledStats, spec: &BootstrapSpec) -> Result<LagProfile> {
    let l = stats.spec().max_lag;
    let full = stats.fit(None)?;
    let n = stats.patients();
    let replicate = |b: usize| -> (Vec<f64>, bool) {
        let w = resample_weights(n, spec.seed, b);
        match stats.fit(Some(&w)) {
            Ok(fit) => {
                let empty = fit.rows_used.iter().all(|&r| r == 0);
                (fit.beta, empty)
            }
            Err(Error::InsufficientData(_)) => (vec![f64::NAN; l], true),
            Err(e) => panic!("unexpected replicate failure: {e}"),
        }
    };
    // indexed collect keeps replicate order independent of scheduling
    let (samples, empty): (Vec<_>, Vec<_>) = (0..spec.replicates).into_par_iter().map(replicate).unzip();
    Ok(LagProfile::from_parts(full.beta, samples, empty, spec.point))
}

/// Direction of the first run of [`RUN_LENGTH`] consecutive lags whose
/// whole interval lies on one side of zero. Undefined lags break runs.
pub fn classify_run(beta: &[f64], sigma: &[f64]) -> Direction {
    let mut sign = 0i8;
    let mut len = 0usize;
    for (b, s) in beta.iter().zip(sigma) {
        let here = if !b.is_finite() || !s.is_finite() {
            0
        } else if b - CI_MULTIPLIER * s > 0.0 {
            1
        } else if b + CI_MULTIPLIER * s < 0.0 {
            -1
        } else {
            0
        };
        if here != 0 && here == sign {
            len += 1;
        } else {
            sign = here;
            len = (here != 0) as usize;
        }
        if len >= RUN_LENGTH {
            return Direction::from_i8(sign).unwrap();
        }
    }
    Direction::NoEffect
}

pub fn classify_profile(profile: &LagProfile) -> Direction {
    classify_run(&profile.beta_hat, &profile.sigma)
}

/// Classify every stored replicate with the profile's fixed sigma.
pub fn classify_samples(profile: &LagProfile) -> Vec<Direction> {
    profile.samples.iter().map(|s| classify_run(s, &profile.sigma)).collect()
}
