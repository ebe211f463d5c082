use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::counts::{pair_events, FLAGS, IDLER};
use super::streams::{self, bernoulli_hits, channel_purpose};
use super::{blocks, ExperimentConfig, Resolved};
use crate::error::Result;
use crate::tags::{Channel, Tag, TagStream};

const PS: f64 = 1e12;

/// Simulates a time-tagger record of `cfg.pulses` pulses.
///
/// Pulse `k` puts photon tags at `k * rep_period + offset + jitter`. Gated
/// detectors (the idler) draw a dark count per gate, placed uniformly in the
/// gate, and register only the earliest click of a gate. Free-running
/// detectors see a continuous poissonian dark process at their dark rate.
pub fn simulate_timetags(cfg: &ExperimentConfig) -> Result<TagStream> {
    let r = cfg.resolve()?;
    let ranges: Vec<_> = blocks(cfg.pulses, cfg.block_pulses).collect();
    let parts: Vec<Vec<Tag>> = ranges
        .into_par_iter()
        .map(|(b, start, len)| block_tags(cfg, &r, b, start, len))
        .collect();
    let mut tags: Vec<Tag> = parts.into_iter().flatten().collect();
    // blocks are time-ordered except for jitter across their boundaries
    tags.sort_unstable();
    Ok(TagStream::from_unsorted(tags))
}

fn block_tags(cfg: &ExperimentConfig, r: &Resolved, block: u64, start: u64, len: u64) -> Vec<Tag> {
    let period_ps = cfg.rep_period() * PS;
    let offsets = [
        cfg.timing.idler_offset,
        cfg.timing.signal_delay[0],
        cfg.timing.signal_delay[1],
    ];
    let jitter = Normal::new(0.0, cfg.timing.jitter_sigma * PS).expect("validated jitter");
    let pairs = pair_events(r, cfg.seed, block, start, len);
    let mut out = Vec::new();

    for (ch, model) in r.channels.iter().enumerate() {
        let Some(model) = model else { continue };
        let channel = Channel::ALL[ch];
        let mut noise_rng = streams::stream(cfg.seed, block, channel_purpose(streams::NOISE, ch));
        let mut time_rng = streams::stream(cfg.seed, block, channel_purpose(streams::TIMING, ch));
        let photon_pulses = pairs.iter().filter(|e| e.1 & FLAGS[ch] != 0).map(|e| e.0);
        let base = |k: u64| k as f64 * period_ps + offsets[ch] * PS;
        let mut times = Vec::new();

        if model.gated {
            let mut noise = Vec::new();
            bernoulli_hits(&mut noise_rng, r.noise[ch], start, len, &mut noise);
            let mut merged: Vec<(u64, bool)> = photon_pulses
                .map(|k| (k, true))
                .chain(noise.into_iter().map(|k| (k, false)))
                .collect();
            merged.sort_unstable();
            // a photon and a dark count in the same gate: earliest wins
            let mut k = 0;
            while k < merged.len() {
                let pulse = merged[k].0;
                let mut t = f64::INFINITY;
                while k < merged.len() && merged[k].0 == pulse {
                    let dt = if merged[k].1 {
                        jitter.sample(&mut time_rng)
                    } else {
                        (time_rng.random::<f64>() - 0.5) * model.window * PS
                    };
                    t = t.min(base(pulse) + dt);
                    k += 1;
                }
                times.push(t);
            }
        } else {
            let mut pulsed = photon_pulses.collect::<Vec<_>>();
            let mut extra = Vec::new();
            let mut lin_rng = streams::stream(
                cfg.seed,
                block,
                channel_purpose(streams::NOISE, ch + FLAGS.len()),
            );
            bernoulli_hits(
                &mut lin_rng,
                model.linear_noise * cfg.pbar,
                start,
                len,
                &mut extra,
            );
            pulsed.extend(extra);
            pulsed.sort_unstable();
            pulsed.dedup();
            times.extend(
                pulsed
                    .into_iter()
                    .map(|k| base(k) + jitter.sample(&mut time_rng)),
            );
            if model.dark_rate > 0.0 {
                let end = (start + len) as f64 * period_ps;
                let mean_gap = PS / model.dark_rate;
                let mut t = start as f64 * period_ps;
                loop {
                    t += -mean_gap * (1.0 - noise_rng.random::<f64>()).ln();
                    if t >= end {
                        break;
                    }
                    times.push(t);
                }
            }
        }

        if FLAGS[ch] == IDLER && r.nd < 1.0 {
            let mut rng = streams::stream(cfg.seed, block, streams::RESPONSE);
            times.retain(|_| rng.random::<f64>() < r.nd);
        }
        out.extend(
            times
                .into_iter()
                .map(|t| Tag::new(t.round() as i64, channel)),
        );
    }
    out.sort_unstable();
    out
}
