//! Conditional Monte Carlo: the pair number of every pulse is sampled, and
//! each pulse contributes its exact click probabilities given that number.
//!
//! Detector noise is independent of the pairs, so averaging the conditional
//! probabilities over sampled pair numbers is an unbiased estimate of the
//! per-pulse probabilities, with far smaller variance than counting the rare
//! coincidences themselves.

use rayon::prelude::*;
use serde::Serialize;

use super::streams::{self, bernoulli_hits};
use super::{blocks, ExperimentConfig, Resolved};
use crate::error::{Error, Result};
use crate::estimate::{propagate, Estimate};
use crate::photon_statistics::PhotonNumberDistribution;

/// How many pulses carried `n` pairs, for each `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairHistogram {
    counts: Vec<u64>,
    pulses: u64,
}

impl PairHistogram {
    pub fn sample(
        dist: &PhotonNumberDistribution<f64>,
        pulses: u64,
        seed: u64,
        block_pulses: u64,
    ) -> Result<Self> {
        if pulses == 0 || block_pulses == 0 {
            return Err(Error::invalid("pulses", "must be at least 1"));
        }
        let q = dist.prob_nonzero();
        let ranges: Vec<_> = blocks(pulses, block_pulses).collect();
        let parts: Vec<Vec<u64>> = ranges
            .into_par_iter()
            .map(|(b, start, len)| {
                let mut rng = streams::stream(seed, b, streams::PAIR_NUMBER);
                let mut hits = Vec::new();
                bernoulli_hits(&mut rng, q, start, len, &mut hits);
                let mut counts = vec![len - hits.len() as u64];
                for _ in &hits {
                    let n = dist.sample_nonzero(&mut rng) as usize;
                    if counts.len() <= n {
                        counts.resize(n + 1, 0);
                    }
                    counts[n] += 1;
                }
                counts
            })
            .collect();
        let mut counts = vec![0u64];
        for p in parts {
            if counts.len() < p.len() {
                counts.resize(p.len(), 0);
            }
            for (c, v) in counts.iter_mut().zip(p) {
                *c += v;
            }
        }
        Ok(Self { counts, pulses })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn pulses(&self) -> u64 {
        self.pulses
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(n, &c)| n as f64 * c as f64)
            .sum();
        s / self.pulses as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeraldedEstimates {
    pub p_1i: Estimate,
    pub p_2i: Estimate,
    pub p_12i: Estimate,
    pub g2h: Estimate,
}

/// Per-pulse probabilities estimated by conditional Monte Carlo. `p_s`
/// counts a click on either signal detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalEstimates {
    pub pulses: u64,
    pub p_i: Estimate,
    pub p_s: Estimate,
    pub p_si_raw: Estimate,
    pub p_acc: Estimate,
    /// Net coincidences, `p_si_raw - p_acc`.
    pub p_si: Estimate,
    /// `p_si / p_acc`.
    pub car: Estimate,
    pub heralded: Option<HeraldedEstimates>,
}

const K: usize = 6;

/// `[p_i, p_s, p_is, p_1i, p_2i, p_12i]` given `n` pairs.
fn conditional(r: &Resolved, n: u64) -> [f64; K] {
    let n = n as f64;
    let [ei, e1, e2] = r.eta;
    let [di, d1, d2] = r.noise;
    // probability that nothing clicks, as an exponent, for stable 1 - exp(x)
    let silent_i = (-di).ln_1p() + n * (-ei).ln_1p();
    let silent_1 = (-d1).ln_1p() + n * (-e1).ln_1p();
    let silent_2 = (-d2).ln_1p() + n * (-e2).ln_1p();
    let silent_12 = (-d1).ln_1p() + (-d2).ln_1p() + n * (-(e1 + e2)).ln_1p();
    let p_i = r.nd * -silent_i.exp_m1();
    let p_s = -silent_12.exp_m1();
    let p_1 = -silent_1.exp_m1();
    let p_2 = -silent_2.exp_m1();
    // P(1 and 2) = (1 - a1)(1 - a2) + (c12 - a1 a2), a signal photon takes one arm
    let a1a2 = (silent_1 + silent_2).exp();
    let excess = if (1.0 - e1) * (1.0 - e2) > 0.0 {
        a1a2 * (n * (-(e1 * e2) / ((1.0 - e1) * (1.0 - e2))).ln_1p()).exp_m1()
    } else {
        silent_12.exp() - a1a2
    };
    let p_12 = (p_1 * p_2 + excess).max(0.0);
    [p_i, p_s, p_i * p_s, p_i * p_1, p_i * p_2, p_i * p_12]
}

/// Evaluates the estimator on a sampled histogram for `cfg`'s detectors.
pub fn conditional_estimates(
    cfg: &ExperimentConfig,
    hist: &PairHistogram,
) -> Result<ConditionalEstimates> {
    let r = cfg.resolve()?;
    let total = hist.pulses as f64;
    if hist.pulses < 2 {
        return Err(Error::invalid("pulses", "need at least 2 for a variance"));
    }
    let rows: Vec<(f64, [f64; K])> = hist
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(n, &c)| (c as f64, conditional(&r, n as u64)))
        .collect();
    let mut mean = [0.0; K];
    for (w, f) in &rows {
        for k in 0..K {
            mean[k] += w * f[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    // covariance of the sample means
    let mut cov = [[0.0; K]; K];
    for (w, f) in &rows {
        for a in 0..K {
            for b in 0..K {
                cov[a][b] += w * (f[a] - mean[a]) * (f[b] - mean[b]);
            }
        }
    }
    let norm = (total - 1.0) * total;
    cov.iter_mut().flatten().for_each(|c| *c /= norm);

    let est = |value: f64, grad: [f64; K]| Estimate::new(value, propagate(&grad, &cov).sqrt());
    let [p_i, p_s, p_is, p_1i, p_2i, p_12i] = mean;
    let acc = p_i * p_s;
    if acc <= 0.0 {
        return Err(Error::Undefined(
            "conditional estimate: no accidental coincidences".into(),
        ));
    }
    let unit = |k: usize| {
        let mut g = [0.0; K];
        g[k] = 1.0;
        g
    };
    let heralded = if cfg.hbt.is_some() {
        if p_1i <= 0.0 || p_2i <= 0.0 {
            return Err(Error::Undefined(
                "heralded g2: a two-fold probability is zero".into(),
            ));
        }
        let g = p_12i * p_i / (p_1i * p_2i);
        Some(HeraldedEstimates {
            p_1i: est(p_1i, unit(3)),
            p_2i: est(p_2i, unit(4)),
            p_12i: est(p_12i, unit(5)),
            g2h: est(g, [g / p_i, 0.0, 0.0, -g / p_1i, -g / p_2i, g / p_12i]),
        })
    } else {
        None
    };
    Ok(ConditionalEstimates {
        pulses: hist.pulses,
        p_i: est(p_i, unit(0)),
        p_s: est(p_s, unit(1)),
        p_si_raw: est(p_is, unit(2)),
        p_acc: est(acc, [p_s, p_i, 0.0, 0.0, 0.0, 0.0]),
        p_si: est(p_is - acc, [-p_s, -p_i, 1.0, 0.0, 0.0, 0.0]),
        car: est(
            p_is / acc - 1.0,
            [
                -p_is / (acc * p_i),
                -p_is / (acc * p_s),
                1.0 / acc,
                0.0,
                0.0,
                0.0,
            ],
        ),
        heralded,
    })
}

/// Samples `cfg.pulses` pair numbers and evaluates the conditional estimator.
pub fn simulate_conditional(cfg: &ExperimentConfig) -> Result<ConditionalEstimates> {
    let r = cfg.resolve()?;
    let hist = PairHistogram::sample(&r.dist, cfg.pulses, cfg.seed, cfg.block_pulses)?;
    conditional_estimates(cfg, &hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{ChannelModel, HbtSplit, SourceParams};
    use crate::photon_statistics::Statistics;

    fn resolved(eta: [f64; 3], noise: [f64; 3]) -> Resolved {
        Resolved {
            dist: PhotonNumberDistribution::poisson(0.1).unwrap(),
            eta,
            noise,
            nd: 1.0,
            channels: [None, None, None],
        }
    }

    /// Direct enumeration over each pair's outcome for small `n`.
    fn brute(eta: [f64; 3], noise: [f64; 3], n: u32) -> [f64; K] {
        let [ei, e1, e2] = eta;
        // per pair: (idler?, arm) with arm 0 = lost, 1, 2
        let outcomes = [
            (true, 1, ei * e1),
            (true, 2, ei * e2),
            (true, 0, ei * (1.0 - e1 - e2)),
            (false, 1, (1.0 - ei) * e1),
            (false, 2, (1.0 - ei) * e2),
            (false, 0, (1.0 - ei) * (1.0 - e1 - e2)),
        ];
        let mut out = [0.0; K];
        let combos = 6usize.pow(n);
        for mut code in 0..combos {
            let (mut i, mut a1, mut a2, mut w) = (false, false, false, 1.0);
            for _ in 0..n {
                let (oi, arm, p) = outcomes[code % 6];
                code /= 6;
                i |= oi;
                a1 |= arm == 1;
                a2 |= arm == 2;
                w *= p;
            }
            for di in [false, true] {
                for d1 in [false, true] {
                    for d2 in [false, true] {
                        let pw = w
                            * if di { noise[0] } else { 1.0 - noise[0] }
                            * if d1 { noise[1] } else { 1.0 - noise[1] }
                            * if d2 { noise[2] } else { 1.0 - noise[2] };
                        let (ci, c1, c2) = (i || di, a1 || d1, a2 || d2);
                        let flags = [
                            ci,
                            c1 || c2,
                            ci && (c1 || c2),
                            ci && c1,
                            ci && c2,
                            ci && c1 && c2,
                        ];
                        for k in 0..K {
                            if flags[k] {
                                out[k] += pw;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conditional_probabilities_match_enumeration() {
        let eta = [0.3, 0.25, 0.15];
        let noise = [0.01, 0.02, 0.03];
        let r = resolved(eta, noise);
        for n in 0..5 {
            let a = conditional(&r, n);
            let b = brute(eta, noise, n as u32);
            for k in 0..K {
                assert!(
                    (a[k] - b[k]).abs() < 1e-13,
                    "n={n} k={k}: {} vs {}",
                    a[k],
                    b[k]
                );
            }
        }
    }

    #[test]
    fn tiny_efficiencies_stay_accurate() {
        let r = resolved([1e-9, 1e-9, 1e-9], [0.0, 0.0, 0.0]);
        let [p_i, _, _, _, _, p_12i] = conditional(&r, 3);
        assert!((p_i / 3e-9 - 1.0).abs() < 1e-8);
        // three pairs: 3*2 ordered ways to place photons in both arms, idler from any
        assert!((p_12i / (6.0 * 1e-18 * 3e-9) - 1.0).abs() < 1e-6, "{p_12i}");
    }

    #[test]
    fn histogram_mean_and_block_independence() {
        let d = PhotonNumberDistribution::thermal(0.05).unwrap();
        let h = PairHistogram::sample(&d, 10_000_000, 4, 1 << 20).unwrap();
        assert_eq!(h.counts().iter().sum::<u64>(), 10_000_000);
        let sigma = (0.05f64 * 1.05 / 1e7).sqrt();
        assert!((h.mean() - 0.05).abs() < 4.0 * sigma);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| PairHistogram::sample(&d, 10_000_000, 4, 1 << 20).unwrap());
        assert_eq!(h, serial);
    }

    #[test]
    fn darks_only_car_is_zero_and_g2h_is_one() {
        let src = SourceParams::new(0.0, 80e6, Statistics::Poisson).unwrap();
        let idler = ChannelModel::gated(1.0, 1e-3, 620.0, 1.9e-9);
        let signal = ChannelModel::free_running(1.0, 1e-4, 2150.0, 1.1e-9);
        let cfg = ExperimentConfig::new(src, 1.0, idler, signal, 1000, 1)
            .with_hbt(HbtSplit::default(), signal);
        let e = simulate_conditional(&cfg).unwrap();
        assert!(e.car.value.abs() < 1e-9);
        assert!((e.heralded.unwrap().g2h.value - 1.0).abs() < 1e-9);
    }
}
