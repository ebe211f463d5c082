use std::io::BufWriter;
use std::path::{Path, PathBuf};

use herald_core::analytic::{car, detection_probabilities, g2h_band};
use herald_core::config::TagFormat;
use herald_core::montecarlo::{simulate_counts, simulate_timetags, CountSummary};
use herald_core::tags::Channel;
use serde::Serialize;

use super::{load, output_root};
use crate::error::{at, Result};
use crate::output::{Meta, OutputDir};

#[derive(Serialize)]
struct TagCounts {
    idler: usize,
    sig1: usize,
    sig2: usize,
}

#[derive(Serialize)]
struct Predicted {
    p_i: f64,
    p_s: f64,
    p_si: f64,
    car: Option<f64>,
}

#[derive(Serialize)]
struct Measured {
    p_i: f64,
    p_s: f64,
    /// Same-pulse minus next-pulse coincidences.
    p_si_net: f64,
    car: Option<f64>,
    g2h: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    /// On-chip peak power, W.
    power: f64,
    /// Effective pump power, W.
    pbar: f64,
    eta_on_idler: f64,
    eta_on_signal: f64,
    mu: f64,
    pulses: u64,
    tag_file: String,
    tags: TagCounts,
    counts: CountSummary,
    measured: Measured,
    /// Closed-form values for a single signal detector; absent with a beam
    /// splitter.
    predicted: Option<Predicted>,
    /// `[poissonian, thermal]` heralded g2, with a beam splitter only.
    predicted_g2h_band: Option<[f64; 2]>,
}

fn measured(c: &CountSummary) -> Measured {
    let net = c.n_si_raw as f64 - c.n_acc as f64;
    let g2h = (c.n_1i > 0 && c.n_2i > 0)
        .then(|| c.n_12i as f64 * c.n_i as f64 / (c.n_1i as f64 * c.n_2i as f64));
    Measured {
        p_i: c.rate(c.n_i),
        p_s: c.rate(c.n_s),
        p_si_net: net / c.pulses as f64,
        car: (c.n_acc > 0).then(|| net / c.n_acc as f64),
        g2h,
    }
}

pub fn simulate(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let l = load(config, seed)?;
    let cfg = &l.cfg;
    let power = cfg.montecarlo.power;
    let op = cfg.operating_point(power)?;
    let exp = cfg.experiment(power)?;
    let meta = Meta::new("simulate", &l.text, Some(exp.seed));

    log::info!(
        "simulating {} pulses at {power} W (pbar {:.4} W)",
        exp.pulses,
        op.pbar
    );
    let tags = simulate_timetags(&exp)?;
    let counts = simulate_counts(&exp)?;

    let mut dir = OutputDir::create(&output_root(cfg, out))?;
    let tag_file = match cfg.io.tag_format {
        TagFormat::Csv => {
            let path = dir.path("tags.csv");
            let f = std::fs::File::create(&path).map_err(at(&path))?;
            tags.write_csv(BufWriter::new(f), &meta.comments())?;
            "tags.csv"
        }
        TagFormat::Binary => {
            let path = dir.path("tags.bin");
            let f = std::fs::File::create(&path).map_err(at(&path))?;
            tags.write_binary(BufWriter::new(f))?;
            // the binary format has no room for a header
            dir.json(
                "tags.bin.json",
                &meta,
                &serde_json::json!({ "format": "i64 le time_ps + u8 channel" }),
            )?;
            "tags.bin"
        }
    };

    let (predicted, band) = match exp.hbt {
        None => {
            let p = detection_probabilities(&cfg.source, op.pbar, &op.idler, &op.signal)?;
            let car = car(&cfg.source, op.pbar, &op.idler, &op.signal).ok();
            (
                Some(Predicted {
                    p_i: p.p_i,
                    p_s: p.p_s,
                    p_si: p.p_si,
                    car,
                }),
                None,
            )
        }
        Some(h) => {
            let (gp, gt) = g2h_band(
                &cfg.source,
                op.pbar,
                &op.signal,
                &h.arm2,
                &op.idler,
                &h.split,
            )?;
            (None, Some([gp.value, gt.value]))
        }
    };

    let summary = Summary {
        power,
        pbar: op.pbar,
        eta_on_idler: op.eta_on_idler,
        eta_on_signal: op.eta_on_signal,
        mu: cfg.source.mean_pairs(op.pbar)?,
        pulses: exp.pulses,
        tag_file: tag_file.to_string(),
        tags: TagCounts {
            idler: tags.count(Channel::Idler),
            sig1: tags.count(Channel::Sig1),
            sig2: tags.count(Channel::Sig2),
        },
        counts,
        measured: measured(&counts),
        predicted,
        predicted_g2h_band: band,
    };
    dir.json("counts.json", &meta, &summary)?;
    let mut written = vec![dir.path(tag_file)];
    written.extend_from_slice(dir.written());
    Ok(written)
}
