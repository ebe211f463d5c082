use std::path::{Path, PathBuf};

use herald_core::analytic::{car, detection_probabilities, g2_unheralded, g2h_band};
use herald_core::config::{OperatingPoint, RunConfig};
use rayon::prelude::*;
use serde::Serialize;

use super::{load, output_root};
use crate::error::Result;
use crate::output::{opt, window_label, Meta, OutputDir};

struct Point {
    op: OperatingPoint,
    mu: f64,
    /// One per analysis window.
    car: Vec<Option<f64>>,
    rates: (f64, f64, f64),
    acc: Vec<f64>,
    g2h: Option<(f64, f64)>,
    signal: f64,
    noise: f64,
    g2: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct CarMax {
    window: f64,
    power: f64,
    pbar: f64,
    car: f64,
    /// False when the largest value sits at either end of the grid.
    interior: bool,
}

#[derive(Serialize)]
struct CurvesSummary {
    powers: usize,
    car_max: Vec<CarMax>,
}

fn evaluate(cfg: &RunConfig, power: f64) -> Result<Point> {
    let op = cfg.operating_point(power)?;
    let src = &cfg.source;
    let mu = src.mean_pairs(op.pbar)?;
    let mut cars = Vec::new();
    let mut acc = Vec::new();
    for &w in &cfg.analysis.windows {
        let mut signal = op.signal;
        signal.window = w;
        cars.push(car(src, op.pbar, &op.idler, &signal).ok());
        acc.push(detection_probabilities(src, op.pbar, &op.idler, &signal)?.p_acc * src.rep_rate);
    }
    let p = detection_probabilities(src, op.pbar, &op.idler, &op.signal)?;
    let (ri, rs, rsi, _) = p.rates(src.rep_rate);
    let g2h = g2h_band(
        src,
        op.pbar,
        &op.signal,
        &op.arm2,
        &op.idler,
        &cfg.hbt_split(),
    )
    .ok()
    .map(|(a, b)| (a.value, b.value));
    let signal = mu * op.signal.eta_bar();
    let noise = op.signal.noise_probability(src.rep_rate, op.pbar)?;
    let g2 = match (
        g2_unheralded(signal, noise, 1.0),
        g2_unheralded(signal, noise, 2.0),
    ) {
        (Ok(a), Ok(b)) => Some((a, b)),
        _ => None,
    };
    Ok(Point {
        op,
        mu,
        car: cars,
        rates: (ri, rs, rsi),
        acc,
        g2h,
        signal,
        noise,
        g2,
    })
}

pub fn curves(config: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let l = load(config, None)?;
    let cfg = &l.cfg;
    let meta = Meta::new("curves", &l.text, None);
    let points: Vec<Point> = cfg
        .sweep
        .powers
        .par_iter()
        .map(|&p| evaluate(cfg, p))
        .collect::<Result<_>>()?;
    let labels: Vec<String> = cfg
        .analysis
        .windows
        .iter()
        .map(|&w| window_label(w))
        .collect();
    let mut dir = OutputDir::create(&output_root(cfg, out))?;
    let base = |p: &Point| vec![p.op.power.to_string(), p.op.pbar.to_string()];

    let mut header: Vec<String> = ["power_w", "pbar_w", "mu"].map(String::from).to_vec();
    header.extend(labels.iter().map(|l| format!("car_{l}")));
    header.push("inv_mu".into());
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r = base(p);
            r.push(p.mu.to_string());
            r.extend(p.car.iter().map(|&c| opt(c)));
            r.push(opt((p.mu > 0.0).then(|| 1.0 / p.mu)));
            r
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.csv("car.csv", &meta, &header_refs, &rows)?;

    let mut header: Vec<String> = ["power_w", "pbar_w", "rate_i_cps", "rate_s_cps", "net_cps"]
        .map(String::from)
        .to_vec();
    header.extend(labels.iter().map(|l| format!("acc_{l}_cps")));
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r = base(p);
            let (ri, rs, rsi) = p.rates;
            r.extend([ri, rs, rsi].map(|v| v.to_string()));
            r.extend(p.acc.iter().map(|v| v.to_string()));
            r
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.csv("rates.csv", &meta, &header_refs, &rows)?;

    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r = base(p);
            r.push(p.mu.to_string());
            r.push(opt(p.g2h.map(|g| g.0)));
            r.push(opt(p.g2h.map(|g| g.1)));
            r
        })
        .collect();
    dir.csv(
        "g2h.csv",
        &meta,
        &["power_w", "pbar_w", "mu", "g2h_poisson", "g2h_thermal"],
        &rows,
    )?;

    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r = base(p);
            r.push(p.signal.to_string());
            r.push(p.noise.to_string());
            r.push(opt(p.g2.map(|g| g.0)));
            r.push(opt(p.g2.map(|g| g.1)));
            r
        })
        .collect();
    dir.csv(
        "g2.csv",
        &meta,
        &[
            "power_w",
            "pbar_w",
            "signal_prob",
            "noise_prob",
            "g2_poisson",
            "g2_thermal",
        ],
        &rows,
    )?;

    let car_max = cfg
        .analysis
        .windows
        .iter()
        .enumerate()
        .filter_map(|(k, &w)| {
            let (idx, p, c) = points
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.car[k].map(|c| (i, p, c)))
                .max_by(|a, b| a.2.total_cmp(&b.2))?;
            Some(CarMax {
                window: w,
                power: p.op.power,
                pbar: p.op.pbar,
                car: c,
                interior: idx > 0 && idx + 1 < points.len(),
            })
        })
        .collect();
    dir.json(
        "curves.json",
        &meta,
        &CurvesSummary {
            powers: points.len(),
            car_max,
        },
    )?;
    Ok(dir.written().to_vec())
}
