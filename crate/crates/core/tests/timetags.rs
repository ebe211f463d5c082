//! Statistical checks of synthetic tag streams and the histogram estimators
//! applied to them.

use herald_core::analysis::{car_from_histogram, histogram};
use herald_core::analytic::car;
use herald_core::montecarlo::{simulate_timetags, ExperimentConfig, Timing};
use herald_core::tags::Channel;
use herald_core::{ChannelModel, SourceParams, Statistics};
use statrs::distribution::{ChiSquared, ContinuousCDF, Exp};

const REP_RATE: f64 = 80e6;

fn quiet_timing() -> Timing {
    Timing {
        idler_offset: 0.0,
        signal_delay: [4e-9, 6e-9],
        jitter_sigma: 0.0,
    }
}

fn darks_only(idler_dark: f64, signal_dark: f64, pulses: u64, seed: u64) -> ExperimentConfig {
    let src = SourceParams::new(0.0, REP_RATE, Statistics::Poisson).unwrap();
    let idler = ChannelModel::gated(1.0, 0.1, idler_dark, 1.9e-9);
    let signal = ChannelModel::free_running(1.0, 0.1, signal_dark, 2e-9);
    let mut cfg = ExperimentConfig::new(src, 0.0, idler, signal, pulses, seed);
    cfg.timing = quiet_timing();
    cfg
}

#[test]
fn free_running_darks_have_exponential_gaps() {
    let rate = 1e5;
    let cfg = darks_only(0.0, rate, 200_000_000, 11);
    let t = simulate_timetags(&cfg).unwrap().times(Channel::Sig1);
    let mut gaps: Vec<f64> = t.windows(2).map(|w| (w[1] - w[0]) as f64 * 1e-12).collect();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len() as f64;
    assert!(n > 2e5, "{n}");
    let exp = Exp::new(rate).unwrap();
    let d = gaps
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let f = exp.cdf(g);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the Kolmogorov distribution
    assert!(d < 1.628 / n.sqrt(), "KS distance {d}");
}

#[test]
fn gated_darks_fill_the_gate_uniformly() {
    let cfg = darks_only(1e6, 0.0, 10_000_000, 12);
    let period_ps = 1e12 / REP_RATE;
    let times = simulate_timetags(&cfg).unwrap().times(Channel::Idler);
    let bins = 19;
    let mut counts = vec![0f64; bins];
    for t in &times {
        let rel = *t as f64 - (*t as f64 / period_ps).round() * period_ps;
        assert!(rel.abs() <= 950.0, "tag outside the gate: {rel} ps");
        // tags are rounded to 1 ps, so the closing edge belongs to the last bin
        let k = (((rel + 950.0) / 100.0).floor() as usize).min(bins - 1);
        counts[k] += 1.0;
    }
    let expected = times.len() as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|c| (c - expected).powi(2) / expected)
        .sum();
    let critical = ChiSquared::new((bins - 1) as f64)
        .unwrap()
        .inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} vs {critical}");
    // one click per gate at most
    let mut pulses: Vec<i64> = times
        .iter()
        .map(|&t| (t as f64 / period_ps).round() as i64)
        .collect();
    pulses.dedup();
    assert_eq!(pulses.len(), times.len());
}

#[test]
fn histogram_shows_the_pulse_comb_and_matches_the_model_car() {
    let src = SourceParams::new(0.72, REP_RATE, Statistics::Poisson).unwrap();
    let pbar = (0.02f64 / 0.72).sqrt();
    let window = 2e-9;
    let idler = ChannelModel::gated(1.0, 0.05, 0.0, 1.9e-9);
    let signal = ChannelModel::free_running(1.0, 0.05, 1e5, window);
    let mut cfg = ExperimentConfig::new(src, pbar, idler, signal, 1_000_000_000, 13);
    cfg.timing = Timing {
        jitter_sigma: 50e-12,
        ..quiet_timing()
    };
    let tags = simulate_timetags(&cfg).unwrap();
    let period = cfg.rep_period();
    let h = histogram(&tags, Channel::Idler, Channel::Sig1, 50e-12, 80e-9, period).unwrap();
    assert!((h.origin - 4e-9).abs() <= 50e-12, "origin {}", h.origin);

    // every accidental peak carries the same expected count
    let peaks: Vec<f64> = (1..=6)
        .flat_map(|m| [m as f64, -(m as f64)])
        .map(|m| h.integrate(m * period, window))
        .collect();
    let mean = peaks.iter().sum::<f64>() / peaks.len() as f64;
    assert!(
        peaks.iter().all(|p| (p - mean).abs() < 5.0 * mean.sqrt()),
        "{peaks:?}"
    );
    // halfway between peaks only signal darks remain
    let floor = h.integrate(period / 2.0, window);
    assert!(floor < 0.5 * mean, "floor {floor} vs peak {mean}");

    let r = car_from_histogram(&h, window, 4).unwrap();
    let expected = car(&src, pbar, &idler, &signal).unwrap();
    assert!(r.car.within(expected, 4.0), "CAR {} vs {expected}", r.car);
    let tight = car_from_histogram(&h, 0.5e-9, 4).unwrap();
    assert!(tight.car.value > r.car.value);
    assert!(tight.n_net.within(r.n_net.value, 2.0 * 2f64.sqrt()));
}

#[test]
fn histogram_car_converges_with_pulses() {
    let src = SourceParams::new(0.72, REP_RATE, Statistics::Thermal).unwrap();
    let pbar = (0.01f64 / 0.72).sqrt();
    let idler = ChannelModel::gated(1.0, 0.02, 0.0, 1.9e-9);
    let signal = ChannelModel::free_running(1.0, 0.02, 2e4, 1.1e-9);
    let expected = car(&src, pbar, &idler, &signal).unwrap();
    let mut sigmas = Vec::new();
    for pulses in [100_000_000u64, 1_000_000_000] {
        let mut cfg = ExperimentConfig::new(src, pbar, idler, signal, pulses, 14);
        cfg.timing = quiet_timing();
        let tags = simulate_timetags(&cfg).unwrap();
        let h = histogram(
            &tags,
            Channel::Idler,
            Channel::Sig1,
            50e-12,
            80e-9,
            cfg.rep_period(),
        )
        .unwrap();
        let r = car_from_histogram(&h, 1.1e-9, 4).unwrap();
        assert!(
            r.car.within(expected, 4.0),
            "{pulses}: CAR {} vs {expected}",
            r.car
        );
        sigmas.push(r.car.sigma);
    }
    assert!(sigmas[1] < 0.5 * sigmas[0], "{sigmas:?}");
}
