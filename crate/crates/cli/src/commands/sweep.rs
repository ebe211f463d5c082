use std::path::{Path, PathBuf};

use herald_core::analysis::{
    extract_source_params, intrinsic_heralding, quadratic_fit, reduce_observables, Observables,
    PowerSweepFit, PowerSweepPoint, QuadraticFit, Reduction,
};
use herald_core::analytic::detection_probabilities;
use herald_core::config::{OperatingPoint, RunConfig, SweepModel};
use herald_core::montecarlo::simulate_counts;
use rayon::prelude::*;
use serde::Serialize;

use super::{load, output_root};
use crate::error::Result;
use crate::output::{opt, Meta, OutputDir};

struct Row {
    op: OperatingPoint,
    point: PowerSweepPoint<f64>,
    obs: Observables<f64>,
    included: bool,
}

#[derive(Serialize)]
struct Fits {
    idler: QuadraticFit<f64>,
    signal: QuadraticFit<f64>,
    coincidence: QuadraticFit<f64>,
}

#[derive(Serialize)]
struct Configured {
    xi: f64,
    eta_i_off: f64,
    eta_s_off: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    model: SweepModel,
    /// On-chip peak power cutoff of the fit, W.
    fit_max_power: Option<f64>,
    included_powers: Vec<f64>,
    excluded_powers: Vec<f64>,
    fit: PowerSweepFit<f64>,
    fits: Fits,
    configured: Configured,
}

/// Rates and their 1σ at one power, cps.
fn measure(cfg: &RunConfig, op: &OperatingPoint, index: usize) -> Result<PowerSweepPoint<f64>> {
    let rep = cfg.source.rep_rate;
    match cfg.sweep.model {
        SweepModel::Analytic => {
            let p = detection_probabilities(&cfg.source, op.pbar, &op.idler, &op.signal)?;
            let t = cfg.sweep.integration_time;
            let (ri, rs, rsi, racc) = p.rates(rep);
            Ok(PowerSweepPoint {
                pbar: op.pbar,
                rate_i: ri,
                rate_s: rs,
                rate_si_net: rsi,
                sigma: Some([
                    (ri / t).sqrt(),
                    (rs / t).sqrt(),
                    ((rsi + 2.0 * racc) / t).sqrt(),
                ]),
            })
        }
        SweepModel::Montecarlo => {
            let mut exp = cfg.experiment(op.power)?;
            exp.hbt = None;
            exp.seed = cfg.montecarlo.seed.wrapping_add(index as u64);
            let c = simulate_counts(&exp)?;
            let scale = rep / c.pulses as f64;
            let net = c.n_si_raw as f64 - c.n_acc as f64;
            Ok(PowerSweepPoint {
                pbar: op.pbar,
                rate_i: c.n_i as f64 * scale,
                rate_s: c.n_s as f64 * scale,
                rate_si_net: net * scale,
                sigma: Some([
                    (c.n_i as f64).sqrt() * scale,
                    (c.n_s as f64).sqrt() * scale,
                    ((c.n_si_raw + c.n_acc) as f64).sqrt() * scale,
                ]),
            })
        }
    }
}

fn reduction(cfg: &RunConfig, op: &OperatingPoint) -> Result<Reduction<f64>> {
    let rep = cfg.source.rep_rate;
    let d_i = op.idler.dark_probability(rep)?;
    let mu = cfg.source.mean_pairs(op.pbar)?;
    Ok(Reduction {
        eta_on_i: op.eta_on_idler,
        eta_on_s: op.eta_on_signal,
        eta_nd: op.idler.eta_nd.factor(mu * op.idler.eta_bar() + d_i),
        d_i,
        d_s: op.signal.dark_probability(rep)?,
        rep_rate: rep,
    })
}

fn fit(rows: &[Row]) -> Result<(PowerSweepFit<f64>, Fits)> {
    let used: Vec<&Observables<f64>> = rows.iter().filter(|r| r.included).map(|r| &r.obs).collect();
    let x: Vec<f64> = used.iter().map(|o| o.pbar).collect();
    let one = |k: usize| {
        let y: Vec<f64> = used.iter().map(|o| [o.y_i, o.y_s, o.y_si][k]).collect();
        let s: Option<Vec<f64>> = used
            .iter()
            .map(|o| o.sigma.map(|s| s[k]).filter(|&v| v > 0.0))
            .collect();
        if s.is_none() {
            log::info!("unweighted fit: some points carry no uncertainty");
        }
        quadratic_fit(&x, &y, s.as_deref())
    };
    let fits = Fits {
        idler: one(0)?,
        signal: one(1)?,
        coincidence: one(2)?,
    };
    Ok((
        extract_source_params(&fits.idler, &fits.signal, &fits.coincidence)?,
        fits,
    ))
}

pub fn sweep(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let l = load(config, seed)?;
    let cfg = &l.cfg;
    let model = cfg.sweep.model;
    let meta = Meta::new(
        "sweep",
        &l.text,
        (model == SweepModel::Montecarlo).then_some(cfg.montecarlo.seed),
    );
    let cutoff = cfg.sweep.fit_max_power;

    let rows: Vec<Row> = cfg
        .sweep
        .powers
        .par_iter()
        .enumerate()
        .map(|(k, &power)| -> Result<Row> {
            let op = cfg.operating_point(power)?;
            let point = measure(cfg, &op, k)?;
            let obs = reduce_observables(&point, &reduction(cfg, &op)?)?;
            Ok(Row {
                op,
                point,
                obs,
                included: cutoff.is_none_or(|m| power < m),
            })
        })
        .collect::<Result<_>>()?;

    let (result, fits) = fit(&rows)?;
    let mut dir = OutputDir::create(&output_root(cfg, out))?;
    let header = [
        "power_w",
        "pbar_w",
        "eta_on_idler",
        "eta_on_signal",
        "rate_i_cps",
        "rate_s_cps",
        "rate_si_net_cps",
        "sigma_i_cps",
        "sigma_s_cps",
        "sigma_si_cps",
        "y_i",
        "y_s",
        "y_si",
        "eta_intrinsic",
        "included",
    ];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let p = &r.point;
            let s = p.sigma.unwrap_or([0.0; 3]);
            let eta_int = intrinsic_heralding(
                p.rate_si_net,
                p.rate_i,
                r.op.idler.dark_rate,
                result.eta_s_off.value,
            )
            .ok();
            [
                r.op.power,
                p.pbar,
                r.op.eta_on_idler,
                r.op.eta_on_signal,
                p.rate_i,
                p.rate_s,
                p.rate_si_net,
            ]
            .into_iter()
            .chain(s)
            .chain([r.obs.y_i, r.obs.y_s, r.obs.y_si])
            .map(|v| v.to_string())
            .chain([opt(eta_int), r.included.to_string()])
            .collect()
        })
        .collect();
    dir.csv("sweep.csv", &meta, &header, &table)?;

    let (inc, exc): (Vec<&Row>, Vec<&Row>) = rows.iter().partition(|r| r.included);
    let summary = SweepSummary {
        model,
        fit_max_power: cutoff,
        included_powers: inc.iter().map(|r| r.op.power).collect(),
        excluded_powers: exc.iter().map(|r| r.op.power).collect(),
        fit: result,
        fits,
        configured: Configured {
            xi: cfg.source.xi,
            eta_i_off: cfg.channels.idler.eta_off,
            eta_s_off: cfg.channels.signal.eta_off,
        },
    };
    dir.json("fit.json", &meta, &summary)?;
    Ok(dir.written().to_vec())
}
