use serde::Serialize;

use super::histogram::{histogram_from_times, CoincidenceHistogram};
use crate::error::{ensure_positive, Error, Result};
use crate::estimate::Estimate;
use crate::tags::{Channel, TagStream};

/// Idler times that have a first-signal tag within `±window/2` of
/// `idler + offset` (ps). These are the starts of the three-fold histogram.
pub fn three_fold_starts(idler: &[i64], sig1: &[i64], offset: f64, window: f64) -> Vec<i64> {
    let half = window * 1e12 / 2.0;
    let off = offset * 1e12;
    let mut out = Vec::new();
    let mut k = 0usize;
    for &t in idler {
        let lo = t as f64 + off - half;
        let hi = t as f64 + off + half;
        while k < sig1.len() && (sig1[k] as f64) < lo {
            k += 1;
        }
        if k < sig1.len() && sig1[k] as f64 <= hi {
            out.push(t);
        }
    }
    out
}

/// The two histograms entering the heralded g2 and the idler-to-first-signal
/// histogram used to time the three-fold starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HbtHistograms {
    pub n_1i: CoincidenceHistogram,
    pub n_2i: CoincidenceHistogram,
    pub n_12i: CoincidenceHistogram,
}

/// Builds the `N_1i`, `N_2i` and `N_12i` histograms from a three-channel
/// stream. The start coincidence uses `window` around the calibrated
/// idler-to-first-signal delay, and the three-fold histogram shares the
/// zero delay of `N_2i`.
pub fn hbt_histograms(
    tags: &TagStream,
    bin_width: f64,
    span: f64,
    rep_period: f64,
    window: f64,
) -> Result<HbtHistograms> {
    ensure_positive("window", window)?;
    let idler = tags.times(Channel::Idler);
    let sig1 = tags.times(Channel::Sig1);
    let sig2 = tags.times(Channel::Sig2);
    let n_1i = histogram_from_times(&idler, &sig1, bin_width, span, rep_period, None)?;
    let n_2i = histogram_from_times(&idler, &sig2, bin_width, span, rep_period, None)?;
    let starts = three_fold_starts(&idler, &sig1, n_1i.origin, window);
    let n_12i = histogram_from_times(
        &starts,
        &sig2,
        bin_width,
        span,
        rep_period,
        Some(n_2i.origin),
    )?;
    Ok(HbtHistograms { n_1i, n_2i, n_12i })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2hResult {
    /// Bin centres relative to zero delay, s.
    pub delays: Vec<f64>,
    /// `None` where `N_2i(δt) = 0`.
    pub g2h: Vec<Option<Estimate>>,
    pub zero: Estimate,
    pub mean_n_12i: f64,
    pub mean_n_2i: f64,
    pub excluded_bins: usize,
}

/// `g2_h(δt) = [N_12i(δt) / <N_12i>] [<N_2i> / N_2i(δt)]`, the averages
/// running over all bins except zero and its `exclusion` neighbours on each
/// side.
pub fn g2h_from_counts(
    n_12i: &CoincidenceHistogram,
    n_2i: &CoincidenceHistogram,
    exclusion: usize,
) -> Result<G2hResult> {
    if n_12i.counts.len() != n_2i.counts.len() || n_12i.bin_width != n_2i.bin_width {
        return Err(Error::invalid(
            "histograms",
            "N_12i and N_2i must share their binning",
        ));
    }
    let half = n_2i.half_bins() as i64;
    let keep = |j: i64| j.unsigned_abs() as usize > exclusion;
    let (mut s12, mut s2, mut used) = (0u64, 0u64, 0usize);
    for j in (-half..=half).filter(|&j| keep(j)) {
        s12 += n_12i.bin(j);
        s2 += n_2i.bin(j);
        used += 1;
    }
    if used == 0 || s12 == 0 || s2 == 0 {
        return Err(Error::Undefined("heralded g2: empty normalisation".into()));
    }
    let m12 = s12 as f64 / used as f64;
    let m2 = s2 as f64 / used as f64;
    let rel_norm = 1.0 / s12 as f64 + 1.0 / s2 as f64;
    let at = |j: i64| -> Option<Estimate> {
        let a = n_12i.bin(j) as f64;
        let b = n_2i.bin(j) as f64;
        if b == 0.0 {
            return None;
        }
        let g = (a / m12) * (m2 / b);
        // poisson errors; an empty three-fold bin still carries one count of uncertainty
        let sigma =
            (a.max(1.0) / (m12 * m12) * (m2 / b).powi(2) + g * g * (1.0 / b + rel_norm)).sqrt();
        Some(Estimate::new(g, sigma))
    };
    let zero = at(0).ok_or_else(|| Error::Undefined("heralded g2: N_2i(0) = 0".into()))?;
    Ok(G2hResult {
        delays: n_2i.delays(),
        g2h: (-half..=half).map(at).collect(),
        zero,
        mean_n_12i: m12,
        mean_n_2i: m2,
        excluded_bins: 2 * exclusion + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(counts: Vec<u64>) -> CoincidenceHistogram {
        CoincidenceHistogram {
            bin_width: 1.0,
            origin: 0.0,
            rep_period: 10.0,
            counts,
        }
    }

    #[test]
    fn flat_histograms_give_one() {
        let r = g2h_from_counts(&hist(vec![7; 21]), &hist(vec![30; 21]), 1).unwrap();
        assert!(r.g2h.iter().all(|g| (g.unwrap().value - 1.0).abs() < 1e-12));
        assert_eq!(r.excluded_bins, 3);
    }

    #[test]
    fn zero_bin_arithmetic() {
        let mut a = vec![1u64; 11];
        let mut b = vec![50u64; 11];
        a[5] = 2;
        b[5] = 100;
        let r = g2h_from_counts(&hist(a), &hist(b), 1).unwrap();
        assert!((r.zero.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn excluded_neighbours_do_not_enter_averages() {
        let mut a = vec![4u64; 11];
        a[4] = 1000;
        a[6] = 1000;
        let r = g2h_from_counts(&hist(a.clone()), &hist(vec![10; 11]), 1).unwrap();
        assert!((r.mean_n_12i - 4.0).abs() < 1e-12);
        let r0 = g2h_from_counts(&hist(a), &hist(vec![10; 11]), 0).unwrap();
        assert!(r0.mean_n_12i > 4.0);
    }

    #[test]
    fn scale_invariance_and_errors() {
        let a: Vec<u64> = (0..11).map(|k| 3 + k % 4).collect();
        let b: Vec<u64> = (0..11).map(|k| 20 + 3 * (k % 5)).collect();
        let r1 = g2h_from_counts(&hist(a.clone()), &hist(b.clone()), 1).unwrap();
        let r2 = g2h_from_counts(
            &hist(a.iter().map(|x| 7 * x).collect()),
            &hist(b.iter().map(|x| 7 * x).collect()),
            1,
        )
        .unwrap();
        for (x, y) in r1.g2h.iter().zip(&r2.g2h) {
            assert!((x.unwrap().value - y.unwrap().value).abs() < 1e-12);
        }
        let mut z = b.clone();
        z[5] = 0;
        assert!(g2h_from_counts(&hist(a.clone()), &hist(z), 1).is_err());
        assert!(g2h_from_counts(&hist(a), &hist(vec![1; 9]), 1).is_err());
    }

    #[test]
    fn three_fold_start_selection() {
        let idler = [0, 10_000, 20_000];
        let sig1 = [1_000, 15_000, 21_900];
        assert_eq!(
            three_fold_starts(&idler, &sig1, 1e-9, 2e-9),
            vec![0, 20_000]
        );
    }
}
