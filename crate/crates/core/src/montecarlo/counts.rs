use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::streams::{self, bernoulli_hits, channel_purpose};
use super::{blocks, ExperimentConfig, Resolved};
use crate::error::Result;

pub(crate) const IDLER: u8 = 1;
pub(crate) const SIG1: u8 = 2;
pub(crate) const SIG2: u8 = 4;
pub(crate) const SIGNAL: u8 = SIG1 | SIG2;
pub(crate) const FLAGS: [u8; 3] = [IDLER, SIG1, SIG2];

/// Pulses in `[start, start + len)` in which at least one pair reaches a
/// detector, with the detectors it reaches.
pub(crate) fn pair_events(
    r: &Resolved,
    seed: u64,
    block: u64,
    start: u64,
    len: u64,
) -> Vec<(u64, u8)> {
    let h = r.detectable();
    if h <= 0.0 || r.dist.mean() <= 0.0 {
        return Vec::new();
    }
    let active = r.dist.thinned(h).expect("detectable fraction in [0, 1]");
    let q = active.prob_nonzero();
    let [ei, e1, e2] = r.eta;
    // cumulative weights of the five outcomes of a detectable pair
    let c = [ei * e1, ei * (e1 + e2), ei, ei + (1.0 - ei) * e1];
    const OUTCOME: [u8; 5] = [IDLER | SIG1, IDLER | SIG2, IDLER, SIG1, SIG2];

    let mut rng = streams::stream(seed, block, streams::PAIRS);
    let mut pulses = Vec::new();
    bernoulli_hits(&mut rng, q, start, len, &mut pulses);
    pulses
        .into_iter()
        .map(|k| {
            let m = active.sample_nonzero(&mut rng);
            let mut flags = 0u8;
            for _ in 0..m {
                let u = rng.random::<f64>() * h;
                let idx = c.iter().position(|&x| u < x).unwrap_or(4);
                flags |= OUTCOME[idx];
            }
            (k, flags)
        })
        .collect()
}

/// Folds `(pulse, flags)` records into one record per pulse, sorted.
pub(crate) fn merge_flags(mut events: Vec<(u64, u8)>) -> Vec<(u64, u8)> {
    events.sort_unstable_by_key(|e| e.0);
    let mut out: Vec<(u64, u8)> = Vec::with_capacity(events.len());
    for (k, f) in events {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 |= f,
            _ => out.push((k, f)),
        }
    }
    out
}

/// Clears the idler flag with probability `1 - nd`, in pulse order.
pub(crate) fn apply_response(events: &mut [(u64, u8)], nd: f64, seed: u64, block: u64) {
    if nd >= 1.0 {
        return;
    }
    let mut rng = streams::stream(seed, block, streams::RESPONSE);
    for e in events.iter_mut().filter(|e| e.1 & IDLER != 0) {
        if rng.random::<f64>() >= nd {
            e.1 &= !IDLER;
        }
    }
}

/// Event counts of a counting run. Each channel registers at most one click
/// per pulse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CountSummary {
    pub pulses: u64,
    pub n_i: u64,
    /// Pulses with a click on either signal detector.
    pub n_s: u64,
    pub n_1: u64,
    pub n_2: u64,
    pub n_1i: u64,
    pub n_2i: u64,
    pub n_12i: u64,
    /// Idler and signal in the same pulse.
    pub n_si_raw: u64,
    /// Idler in pulse `k` and signal in pulse `k + 1`, estimating the
    /// accidental coincidences of `n_si_raw`.
    pub n_acc: u64,
}

impl CountSummary {
    fn tally(&mut self, f: u8) {
        let i = f & IDLER != 0;
        let s1 = f & SIG1 != 0;
        let s2 = f & SIG2 != 0;
        self.n_i += i as u64;
        self.n_1 += s1 as u64;
        self.n_2 += s2 as u64;
        self.n_s += (s1 || s2) as u64;
        self.n_1i += (i && s1) as u64;
        self.n_2i += (i && s2) as u64;
        self.n_12i += (i && s1 && s2) as u64;
        self.n_si_raw += (i && (s1 || s2)) as u64;
    }

    fn add(&mut self, o: &CountSummary) {
        self.pulses += o.pulses;
        self.n_i += o.n_i;
        self.n_s += o.n_s;
        self.n_1 += o.n_1;
        self.n_2 += o.n_2;
        self.n_1i += o.n_1i;
        self.n_2i += o.n_2i;
        self.n_12i += o.n_12i;
        self.n_si_raw += o.n_si_raw;
        self.n_acc += o.n_acc;
    }

    /// `count / pulses`.
    pub fn rate(&self, count: u64) -> f64 {
        count as f64 / self.pulses as f64
    }

    /// Binomial 1σ of `count / pulses`.
    pub fn rate_sigma(&self, count: u64) -> f64 {
        let p = self.rate(count);
        (p * (1.0 - p) / self.pulses as f64).sqrt()
    }
}

struct BlockCounts {
    counts: CountSummary,
    first: u8,
    last: u8,
}

fn block_counts(
    cfg: &ExperimentConfig,
    r: &Resolved,
    block: u64,
    start: u64,
    len: u64,
) -> BlockCounts {
    let mut events = pair_events(r, cfg.seed, block, start, len);
    for (ch, &flag) in FLAGS.iter().enumerate() {
        let mut rng = streams::stream(cfg.seed, block, channel_purpose(streams::NOISE, ch));
        let mut hits = Vec::new();
        bernoulli_hits(&mut rng, r.noise[ch], start, len, &mut hits);
        events.extend(hits.into_iter().map(|k| (k, flag)));
    }
    let mut events = merge_flags(events);
    apply_response(&mut events, r.nd, cfg.seed, block);

    let mut counts = CountSummary {
        pulses: len,
        ..Default::default()
    };
    for w in events.windows(2) {
        if w[1].0 == w[0].0 + 1 && w[0].1 & IDLER != 0 && w[1].1 & SIGNAL != 0 {
            counts.n_acc += 1;
        }
    }
    for &(_, f) in &events {
        counts.tally(f);
    }
    let flag_at = |k: u64| events.iter().find(|e| e.0 == k).map_or(0, |e| e.1);
    BlockCounts {
        counts,
        first: events.first().filter(|e| e.0 == start).map_or(0, |e| e.1),
        last: flag_at(start + len - 1),
    }
}

/// Simulates `cfg.pulses` pulses and counts singles, two- and three-fold
/// coincidences.
pub fn simulate_counts(cfg: &ExperimentConfig) -> Result<CountSummary> {
    let r = cfg.resolve()?;
    let ranges: Vec<_> = blocks(cfg.pulses, cfg.block_pulses).collect();
    let parts: Vec<BlockCounts> = ranges
        .into_par_iter()
        .map(|(b, start, len)| block_counts(cfg, &r, b, start, len))
        .collect();
    let mut total = CountSummary::default();
    let mut prev_last = 0u8;
    for p in &parts {
        total.add(&p.counts);
        if prev_last & IDLER != 0 && p.first & SIGNAL != 0 {
            total.n_acc += 1;
        }
        prev_last = p.last;
    }
    Ok(total)
}
