//! Monte Carlo data pushed through the full analysis chain.

use herald_core::analysis::{
    fit_power_sweep, g2h_from_counts, hbt_histograms, PowerSweepPoint, Reduction,
};
use herald_core::analytic::g2h_predicted;
use herald_core::montecarlo::{
    simulate_conditional, simulate_counts, simulate_timetags, ExperimentConfig,
};
use herald_core::{ChannelModel, HbtSplit, SourceParams, Statistics};

const REP_RATE: f64 = 80e6;
const ETA_ON: f64 = 0.8;

fn sweep_point(
    src: &SourceParams,
    pbar: f64,
    idler: &ChannelModel,
    signal: &ChannelModel,
    seed: u64,
) -> PowerSweepPoint<f64> {
    let cfg = ExperimentConfig::new(*src, pbar, *idler, *signal, 500_000_000, seed);
    let c = simulate_counts(&cfg).unwrap();
    let scale = REP_RATE / c.pulses as f64;
    let n = |k: u64| k as f64;
    PowerSweepPoint {
        pbar,
        rate_i: n(c.n_i) * scale,
        rate_s: n(c.n_s) * scale,
        rate_si_net: (n(c.n_si_raw) - n(c.n_acc)) * scale,
        sigma: Some([
            n(c.n_i).sqrt() * scale,
            n(c.n_s).sqrt() * scale,
            n(c.n_si_raw + c.n_acc).sqrt() * scale,
        ]),
    }
}

#[test]
fn simulated_power_sweep_recovers_the_source() {
    let src = SourceParams::new(0.72, REP_RATE, Statistics::Poisson).unwrap();
    let idler = ChannelModel::gated(ETA_ON, 0.02, 620.0, 1.9e-9);
    let signal = ChannelModel::free_running(ETA_ON, 0.01, 2150.0, 1.1e-9);
    let pbars = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4];
    let points: Vec<_> = pbars
        .iter()
        .enumerate()
        .map(|(k, &p)| sweep_point(&src, p, &idler, &signal, 500 + k as u64))
        .collect();
    let reduction = Reduction {
        eta_on_i: ETA_ON,
        eta_on_s: ETA_ON,
        eta_nd: 1.0,
        d_i: idler.dark_probability(REP_RATE).unwrap(),
        d_s: signal.dark_probability(REP_RATE).unwrap(),
        rep_rate: REP_RATE,
    };
    let (fit, obs) = fit_power_sweep(&points, &reduction, None).unwrap();
    assert_eq!(obs.len(), pbars.len());
    assert!(fit.xi.within(0.72, 2.0), "xi {}", fit.xi);
    assert!(fit.eta_i_off.within(0.02, 3.0), "eta_i {}", fit.eta_i_off);
    assert!(fit.eta_s_off.within(0.01, 3.0), "eta_s {}", fit.eta_s_off);
    assert!(fit.xi.sigma < 0.05 * 0.72);

    // the cutoff drops the top points and leaves the estimate consistent
    let (cut, obs) = fit_power_sweep(&points, &reduction, Some(0.3)).unwrap();
    assert_eq!(obs.len(), 5);
    assert!(cut.xi.sigma > fit.xi.sigma);
    assert!(cut.xi.within(0.72, 2.0), "xi {}", cut.xi);
}

fn hbt_experiment(eta_i: f64, pulses: u64, seed: u64) -> ExperimentConfig {
    let src = SourceParams::new(0.72, REP_RATE, Statistics::Thermal).unwrap();
    let pbar = (0.05f64 / 0.72).sqrt();
    let idler = ChannelModel::gated(1.0, eta_i, 620.0, 1.9e-9);
    let signal = ChannelModel::free_running(1.0, 0.2, 2150.0, 2e-9);
    ExperimentConfig::new(src, pbar, idler, signal, pulses, seed)
        .with_hbt(HbtSplit::default(), signal)
}

fn closed_form(cfg: &ExperimentConfig) -> f64 {
    let hbt = cfg.hbt.unwrap();
    g2h_predicted(
        &cfg.source,
        cfg.pbar,
        &cfg.signal,
        &hbt.arm2,
        &cfg.idler,
        &hbt.split,
    )
    .unwrap()
    .value
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let cfg = hbt_experiment(0.1, 20_000_000, 7);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            (
                simulate_counts(&cfg).unwrap(),
                simulate_timetags(&cfg).unwrap(),
                simulate_conditional(&cfg).unwrap(),
            )
        })
    };
    let (c1, t1, e1) = run(1);
    let (c3, t3, e3) = run(3);
    assert_eq!(c1, c3);
    assert_eq!(t1, t3);
    assert_eq!(e1, e3);
}

#[test]
fn tag_based_heralded_g2_matches_the_exact_estimator() {
    let cfg = hbt_experiment(0.1, 400_000_000, 8);
    let tags = simulate_timetags(&cfg).unwrap();
    let window = 2e-9;
    let h = hbt_histograms(&tags, window, 60e-9, cfg.rep_period(), window).unwrap();
    let r = g2h_from_counts(&h.n_12i, &h.n_2i, 1).unwrap();
    let exact = simulate_conditional(&cfg).unwrap().heralded.unwrap().g2h;
    let sigma = r.zero.sigma.hypot(exact.sigma);
    assert!(
        (r.zero.value - exact.value).abs() < 4.0 * sigma,
        "tags {} vs {exact}",
        r.zero
    );
    assert!(r.zero.value + 3.0 * r.zero.sigma < 0.5);
}

#[test]
fn closed_form_g2h_linearises_the_herald_click() {
    // two pairs herald with 1 - (1 - eta)^2, the closed form uses 2 eta
    let small = hbt_experiment(1e-3, 400_000_000, 9);
    let mc = simulate_conditional(&small).unwrap().heralded.unwrap().g2h;
    assert!(
        mc.within(closed_form(&small), 4.0),
        "{mc} vs {}",
        closed_form(&small)
    );

    let large = hbt_experiment(0.1, 400_000_000, 9);
    let mc = simulate_conditional(&large).unwrap().heralded.unwrap().g2h;
    let ratio = mc.value / closed_form(&large);
    assert!((ratio - 0.95).abs() < 0.01, "ratio {ratio}");
}
