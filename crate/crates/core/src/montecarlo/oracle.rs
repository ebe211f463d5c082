use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use rayon::prelude::*;

use super::blocks;
use super::streams;
use crate::error::{ensure_non_negative, Error, Result};
use crate::estimate::{propagate, Estimate};

const TRIALS_PER_BLOCK: u64 = 1 << 20;

/// Number-resolving HBT measurement of a beam with mean signal photon number
/// `signal` and intrinsic `g2_true >= 1`, mixed with poissonian noise of mean
/// `noise` and split on a balanced beam splitter. Returns the estimate of
/// `<n1 n2> / (<n1> <n2>)` over `trials` windows.
///
/// Signal photon numbers are gamma-mixed poissonian (negative binomial) with
/// shape `1 / (g2_true - 1)`, the pure poissonian law when `g2_true = 1`.
pub fn unheralded_g2_mc(
    signal: f64,
    noise: f64,
    g2_true: f64,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    ensure_non_negative("signal", signal)?;
    ensure_non_negative("noise", noise)?;
    if !(g2_true >= 1.0) || !g2_true.is_finite() {
        return Err(Error::invalid("g2_true", "the oracle needs g2_true >= 1"));
    }
    if signal + noise == 0.0 {
        return Err(Error::Undefined("no light".into()));
    }
    if trials < 2 {
        return Err(Error::invalid("trials", "need at least 2"));
    }
    let gamma = if g2_true > 1.0 && signal > 0.0 {
        let shape = 1.0 / (g2_true - 1.0);
        Some(
            Gamma::new(shape, signal / shape)
                .map_err(|e| Error::invalid("g2_true", e.to_string()))?,
        )
    } else {
        None
    };
    let ranges: Vec<_> = blocks(trials, TRIALS_PER_BLOCK).collect();
    let parts: Vec<[f64; 9]> = ranges
        .into_par_iter()
        .map(|(b, _, len)| {
            let mut rng = streams::stream(seed, b, streams::ORACLE);
            let poisson = |mean: f64, rng: &mut _| -> u64 {
                if mean > 0.0 {
                    Poisson::new(mean).expect("positive mean").sample(rng) as u64
                } else {
                    0
                }
            };
            let mut acc = [0.0; 9];
            for _ in 0..len {
                let mean_s = match &gamma {
                    Some(g) => g.sample(&mut rng),
                    None => signal,
                };
                let n = poisson(mean_s, &mut rng) + poisson(noise, &mut rng);
                let n1 = Binomial::new(n, 0.5).expect("valid").sample(&mut rng);
                let (a, c) = (n1 as f64, (n - n1) as f64);
                let x = a * c;
                for (k, v) in [x, a, c, x * x, a * a, c * c, x * a, x * c, a * c]
                    .into_iter()
                    .enumerate()
                {
                    acc[k] += v;
                }
            }
            acc
        })
        .collect();
    let mut s = [0.0; 9];
    for p in parts {
        for k in 0..9 {
            s[k] += p[k];
        }
    }
    let n = trials as f64;
    let [x, a, c] = [s[0] / n, s[1] / n, s[2] / n];
    if a == 0.0 || c == 0.0 {
        return Err(Error::Undefined("no photons detected in an arm".into()));
    }
    let var = |sq: f64, m1: f64, m2: f64| (sq / n - m1 * m2) * n / (n - 1.0) / n;
    let cov = [
        [var(s[3], x, x), var(s[6], x, a), var(s[7], x, c)],
        [var(s[6], x, a), var(s[4], a, a), var(s[8], a, c)],
        [var(s[7], x, c), var(s[8], a, c), var(s[5], c, c)],
    ];
    let g = x / (a * c);
    Ok(Estimate::new(
        g,
        propagate(&[1.0 / (a * c), -g / a, -g / c], &cov).sqrt(),
    ))
}
