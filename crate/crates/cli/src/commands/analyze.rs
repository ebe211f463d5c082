use std::path::{Path, PathBuf};

use herald_core::analysis::{
    car_from_histogram, g2h_from_counts, hbt_histograms, histogram, CarResult,
    CoincidenceHistogram, G2hResult,
};
use herald_core::tags::{Channel, TagStream};
use herald_core::Estimate;
use serde::Serialize;

use super::{load, output_root};
use crate::error::{at, Result};
use crate::output::{opt, sha256_hex, window_label, Meta, OutputDir};

#[derive(Serialize)]
struct ChannelCar {
    stop: Channel,
    /// Raw idler-to-signal delay taken as zero, s.
    origin: f64,
    result: Option<CarResult>,
    error: Option<String>,
}

#[derive(Serialize)]
struct CarSummary {
    /// s
    window: f64,
    channels: Vec<ChannelCar>,
}

#[derive(Serialize)]
struct G2hZero {
    zero: Estimate,
    single_photon: bool,
    mean_n_12i: f64,
    mean_n_2i: f64,
    excluded_bins: usize,
}

#[derive(Serialize)]
struct G2hSummary {
    /// Bin width and three-fold window, s.
    window: f64,
    exclusion: usize,
    result: Option<G2hZero>,
    error: Option<String>,
}

fn write_g2h_table(
    dir: &mut OutputDir,
    meta: &Meta,
    g: &G2hResult,
    n_12i: &CoincidenceHistogram,
    n_2i: &CoincidenceHistogram,
) -> Result<()> {
    let rows: Vec<Vec<String>> = g
        .delays
        .iter()
        .zip(&g.g2h)
        .zip(n_12i.counts.iter().zip(&n_2i.counts))
        .map(|((d, e), (a, b))| {
            vec![
                ((d * 1e12).round() as i64).to_string(),
                a.to_string(),
                b.to_string(),
                opt(e.map(|e| e.value)),
                opt(e.map(|e| e.sigma)),
            ]
        })
        .collect();
    dir.csv(
        "g2h.csv",
        meta,
        &["delay_ps", "n_12i", "n_2i", "g2h", "sigma"],
        &rows,
    )
}

fn read_tags(path: &Path, bytes: &[u8]) -> herald_core::Result<TagStream> {
    if path.extension().is_some_and(|e| e == "bin") {
        TagStream::read_binary(bytes)
    } else {
        TagStream::read_csv(bytes)
    }
}

fn write_histogram(
    dir: &mut OutputDir,
    name: &str,
    meta: &Meta,
    h: &CoincidenceHistogram,
) -> Result<()> {
    let path = dir.path(name);
    let f = std::fs::File::create(&path).map_err(at(&path))?;
    h.write_csv(std::io::BufWriter::new(f), &meta.comments())?;
    Ok(())
}

pub fn analyze(tags_path: &Path, config: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let l = load(config, None)?;
    let cfg = &l.cfg;
    let a = &cfg.analysis;
    let rep_period = 1.0 / cfg.source.rep_rate;
    let bytes = std::fs::read(tags_path).map_err(at(tags_path))?;
    let tags = read_tags(tags_path, &bytes)?;
    let mut meta = Meta::new("analyze", &l.text, None);
    meta.input_sha256 = Some(sha256_hex(&bytes));

    let mut dir = OutputDir::create(&output_root(cfg, out))?;
    let mut names = Vec::new();
    let stops: Vec<Channel> = [Channel::Sig1, Channel::Sig2]
        .into_iter()
        .filter(|&c| tags.count(c) > 0)
        .collect();
    let mut hists = Vec::new();
    for &stop in &stops {
        let h = histogram(&tags, Channel::Idler, stop, a.bin_width, a.span, rep_period)?;
        let name = format!("histogram_idler_{stop}.csv");
        write_histogram(&mut dir, &name, &meta, &h)?;
        names.push(name);
        hists.push((stop, h));
    }

    let mut first_error = None;
    let mut any_car = false;
    for &w in &a.windows {
        let channels = hists
            .iter()
            .map(|(stop, h)| {
                let r = car_from_histogram(h, w, a.min_accidental_peaks);
                any_car |= r.is_ok();
                let error = r.as_ref().err().map(|e| e.to_string());
                if let Err(e) = &r {
                    log::warn!("CAR idler-{stop} at {}: {e}", window_label(w));
                }
                if let (Err(e), None) = (&r, &first_error) {
                    first_error = Some(e.to_string());
                }
                ChannelCar {
                    stop: *stop,
                    origin: h.origin,
                    result: r.ok(),
                    error,
                }
            })
            .collect();
        dir.json(
            &format!("car_{}.json", window_label(w)),
            &meta,
            &CarSummary {
                window: w,
                channels,
            },
        )?;
    }
    if !hists.is_empty() && !any_car {
        return Err(herald_core::Error::Undefined(format!(
            "no CAR could be evaluated: {}",
            first_error.unwrap_or_default()
        ))
        .into());
    }

    if stops.len() == 2 {
        let w = a.g2h_window;
        let hbt = hbt_histograms(&tags, w, a.span, rep_period, w)?;
        for (name, h) in [
            ("histogram_n_1i.csv", &hbt.n_1i),
            ("histogram_n_2i.csv", &hbt.n_2i),
            ("histogram_n_12i.csv", &hbt.n_12i),
        ] {
            write_histogram(&mut dir, name, &meta, h)?;
            names.push(name.to_string());
        }
        match g2h_from_counts(&hbt.n_12i, &hbt.n_2i, a.exclusion) {
            Ok(g) => {
                write_g2h_table(&mut dir, &meta, &g, &hbt.n_12i, &hbt.n_2i)?;
                let summary = G2hSummary {
                    window: w,
                    exclusion: a.exclusion,
                    result: Some(G2hZero {
                        zero: g.zero,
                        single_photon: g.zero.value < 0.5,
                        mean_n_12i: g.mean_n_12i,
                        mean_n_2i: g.mean_n_2i,
                        excluded_bins: g.excluded_bins,
                    }),
                    error: None,
                };
                dir.json("g2h.json", &meta, &summary)?;
            }
            Err(e) => {
                log::warn!("g2h not evaluated: {e}");
                let summary = G2hSummary {
                    window: w,
                    exclusion: a.exclusion,
                    result: None,
                    error: Some(e.to_string()),
                };
                dir.json("g2h.json", &meta, &summary)?;
            }
        }
    }
    let mut written: Vec<PathBuf> = names.iter().map(|n| dir.path(n)).collect();
    written.extend_from_slice(dir.written());
    Ok(written)
}
