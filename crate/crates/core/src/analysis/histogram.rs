use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};
use crate::estimate::Estimate;
use crate::tags::{Channel, TagStream};

const PS: f64 = 1e12;

/// Default minimum number of accidental peaks averaged by [`car_from_histogram`].
pub const DEFAULT_MIN_ACCIDENTAL_PEAKS: usize = 4;

/// Start-stop delay histogram. Bin `j` (for `j` in `-half..=half`) covers
/// delays `origin + [(j - 1/2) w, (j + 1/2) w)`, so bin 0 is centred on the
/// zero delay `origin`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceHistogram {
    /// s
    pub bin_width: f64,
    /// Raw delay taken as zero, s.
    pub origin: f64,
    /// s
    pub rep_period: f64,
    pub counts: Vec<u64>,
}

impl CoincidenceHistogram {
    pub fn half_bins(&self) -> usize {
        self.counts.len() / 2
    }

    /// Count in bin `j`, zero outside the histogram.
    pub fn bin(&self, j: i64) -> u64 {
        let k = j + self.half_bins() as i64;
        if k < 0 {
            return 0;
        }
        self.counts.get(k as usize).copied().unwrap_or(0)
    }

    /// Bin centres relative to the zero delay, s.
    pub fn delays(&self) -> Vec<f64> {
        let half = self.half_bins() as i64;
        (-half..=half).map(|j| j as f64 * self.bin_width).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Delay range covered, `(low, high)` edges relative to zero, s.
    pub fn range(&self) -> (f64, f64) {
        let edge = (self.half_bins() as f64 + 0.5) * self.bin_width;
        (-edge, edge)
    }

    /// Counts within `[centre - width/2, centre + width/2]`, weighting each
    /// bin by its overlap with the interval.
    pub fn integrate(&self, centre: f64, width: f64) -> f64 {
        let w = self.bin_width;
        let lo = centre - width / 2.0;
        let hi = centre + width / 2.0;
        let half = self.half_bins() as i64;
        let j_lo = ((lo / w + 0.5).floor() as i64).max(-half);
        let j_hi = ((hi / w + 0.5).floor() as i64).min(half);
        let mut s = 0.0;
        for j in j_lo..=j_hi {
            let b_lo = (j as f64 - 0.5) * w;
            let b_hi = b_lo + w;
            let overlap = (hi.min(b_hi) - lo.max(b_lo)).max(0.0);
            s += self.bin(j) as f64 * overlap / w;
        }
        s
    }

    /// Writes `delay_ps,counts` rows preceded by `# ` comment lines.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "delay_ps,counts")?;
        for (d, c) in self.delays().into_iter().zip(&self.counts) {
            writeln!(w, "{},{}", (d * PS).round() as i64, c)?;
        }
        Ok(())
    }
}

fn check_sorted(times: &[i64], what: &str) -> Result<()> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(
            "tags",
            format!("{what} times are not sorted"),
        ));
    }
    Ok(())
}

/// Histogram of `stop - start - origin` for every stop within the span of
/// every start. `origin` and the widths are in ps.
fn bin_delays(starts: &[i64], stops: &[i64], w: f64, half: usize, origin: f64) -> Vec<u64> {
    let mut counts = vec![0u64; 2 * half + 1];
    let reach = (half as f64 + 0.5) * w;
    let lo_off = (origin - reach).floor() as i64 - 1;
    let hi_off = (origin + reach).ceil() as i64 + 1;
    let mut first = 0usize;
    for &s in starts {
        while first < stops.len() && stops[first] < s + lo_off {
            first += 1;
        }
        let mut k = first;
        while k < stops.len() && stops[k] <= s + hi_off {
            let rel = (stops[k] - s) as f64 - origin;
            let j = (rel / w + 0.5).floor() as i64 + half as i64;
            if (0..counts.len() as i64).contains(&j) {
                counts[j as usize] += 1;
            }
            k += 1;
        }
    }
    counts
}

/// Delay histogram between two sorted time lists (ps).
///
/// With `origin = None` the zero delay is calibrated to the centre of the
/// most populated bin (ties go to the smallest delay magnitude).
pub fn histogram_from_times(
    starts: &[i64],
    stops: &[i64],
    bin_width: f64,
    span: f64,
    rep_period: f64,
    origin: Option<f64>,
) -> Result<CoincidenceHistogram> {
    ensure_positive("bin_width", bin_width)?;
    ensure_positive("span", span)?;
    ensure_positive("rep_period", rep_period)?;
    check_sorted(starts, "start")?;
    check_sorted(stops, "stop")?;
    let w = bin_width * PS;
    let half = (span / bin_width).round().max(0.0) as usize;
    let origin_ps = match origin {
        Some(o) => o * PS,
        None => {
            let raw = bin_delays(starts, stops, w, half, 0.0);
            let best = raw
                .iter()
                .enumerate()
                .max_by(|a, b| {
                    a.1.cmp(b.1).then_with(|| {
                        (b.0 as i64 - half as i64)
                            .abs()
                            .cmp(&(a.0 as i64 - half as i64).abs())
                    })
                })
                .map(|(k, _)| k as i64 - half as i64)
                .unwrap_or(0);
            best as f64 * w
        }
    };
    Ok(CoincidenceHistogram {
        bin_width,
        origin: origin_ps / PS,
        rep_period,
        counts: bin_delays(starts, stops, w, half, origin_ps),
    })
}

/// Start-stop histogram of `stop` tags relative to `start` tags, over
/// `±span`, with the zero delay calibrated to the global maximum.
pub fn histogram(
    tags: &TagStream,
    start: Channel,
    stop: Channel,
    bin_width: f64,
    span: f64,
    rep_period: f64,
) -> Result<CoincidenceHistogram> {
    histogram_from_times(
        &tags.times(start),
        &tags.times(stop),
        bin_width,
        span,
        rep_period,
        None,
    )
}

/// Coincidence-to-accidental ratio from one histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarResult {
    /// s
    pub window: f64,
    pub n_raw: f64,
    /// Mean over the accidental peaks.
    pub n_acc: Estimate,
    pub n_net: Estimate,
    pub car: Estimate,
    pub accidental_peaks: usize,
}

/// Integrates `±window/2` around zero delay and around every non-zero
/// multiple of the repetition period that fits inside the histogram.
pub fn car_from_histogram(
    hist: &CoincidenceHistogram,
    window: f64,
    min_peaks: usize,
) -> Result<CarResult> {
    ensure_positive("window", window)?;
    if window > hist.rep_period / 2.0 {
        return Err(Error::invalid(
            "window",
            "must not exceed half the repetition period",
        ));
    }
    let (_, high) = hist.range();
    let max_m = ((high - window / 2.0) / hist.rep_period).floor() as i64;
    let peaks: Vec<f64> = (1..=max_m.max(0))
        .flat_map(|m| [m, -m])
        .map(|m| hist.integrate(m as f64 * hist.rep_period, window))
        .collect();
    if peaks.len() < min_peaks {
        return Err(Error::invalid(
            "span",
            format!(
                "histogram holds {} accidental peaks, need {min_peaks}",
                peaks.len()
            ),
        ));
    }
    let n = peaks.len() as f64;
    let sum: f64 = peaks.iter().sum();
    let n_acc = Estimate::new(sum / n, sum.sqrt() / n);
    let n_raw = hist.integrate(0.0, window);
    if n_acc.value <= 0.0 {
        return Err(Error::Undefined("CAR: no accidental coincidences".into()));
    }
    let n_net = Estimate::new(n_raw - n_acc.value, (n_raw + n_acc.sigma.powi(2)).sqrt());
    let a = n_acc.value;
    let car_sigma = (n_raw / (a * a) + (n_raw / (a * a)).powi(2) * n_acc.sigma.powi(2)).sqrt();
    Ok(CarResult {
        window,
        n_raw,
        n_acc,
        n_net,
        car: Estimate::new(n_net.value / a, car_sigma),
        accidental_peaks: peaks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(counts: Vec<u64>, w: f64, period: f64) -> CoincidenceHistogram {
        CoincidenceHistogram {
            bin_width: w,
            origin: 0.0,
            rep_period: period,
            counts,
        }
    }

    #[test]
    fn single_pair_lands_in_zero_bin() {
        let h = histogram_from_times(&[0], &[0], 50e-12, 1e-9, 12.5e-9, None).unwrap();
        assert_eq!(h.bin(0), 1);
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts.len(), 41);
    }

    #[test]
    fn origin_follows_the_maximum() {
        let starts: Vec<i64> = (0..100).map(|k| k * 12_500).collect();
        let stops: Vec<i64> = starts.iter().map(|s| s + 3_000).collect();
        let h = histogram_from_times(&starts, &stops, 100e-12, 40e-9, 12.5e-9, None).unwrap();
        assert!((h.origin - 3e-9).abs() < 1e-15);
        assert_eq!(h.bin(0), 100);
        // next pulse's stop sits one period later
        assert_eq!(h.bin(125), 99);
        assert_eq!(h.bin(-125), 99);
    }

    #[test]
    fn fractional_window_integration() {
        let h = hist(vec![10, 10, 10, 10, 10], 1.0, 100.0);
        assert!((h.integrate(0.0, 1.0) - 10.0).abs() < 1e-12);
        assert!((h.integrate(0.25, 1.0) - 10.0).abs() < 1e-12);
        assert!((h.integrate(0.0, 2.0) - 20.0).abs() < 1e-12);
        assert!((h.integrate(0.0, 100.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn car_arithmetic() {
        // bins of 1 unit, period 10, peaks at multiples of 10
        let mut counts = vec![0u64; 61];
        let centre = 30;
        counts[centre] = 100;
        for m in [-3i64, -2, -1, 1, 2, 3] {
            counts[(centre as i64 + 10 * m) as usize] = 10;
        }
        let r = car_from_histogram(&hist(counts, 1.0, 10.0), 1.0, 4).unwrap();
        assert_eq!(r.accidental_peaks, 6);
        assert!((r.n_raw - 100.0).abs() < 1e-12);
        assert!((r.n_acc.value - 10.0).abs() < 1e-12);
        assert!((r.car.value - 9.0).abs() < 1e-12);
        assert!((r.n_net.value - 90.0).abs() < 1e-12);
    }

    #[test]
    fn car_errors() {
        let h = hist(vec![0; 61], 1.0, 10.0);
        assert!(matches!(
            car_from_histogram(&h, 1.0, 4),
            Err(Error::Undefined(_))
        ));
        assert!(car_from_histogram(&h, 6.0, 4).is_err());
        assert!(car_from_histogram(&h, 1.0, 8).is_err());
        assert!(histogram_from_times(&[5, 1], &[0], 1e-12, 1e-9, 1e-9, None).is_err());
    }
}
