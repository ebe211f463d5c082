//! Pair-number statistics of the source: poissonian (many-mode) and
//! thermal (single-mode) emission with mean `mu` pairs per pulse.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, Error, Result};
use crate::scalar::{from_u64, lit, to_f64, Scalar};

/// Relative size below which series terms are dropped.
const SERIES_CUTOFF: f64 = 1e-18;

/// Hard cap on series length; reached only for absurd means.
const SERIES_MAX_TERMS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Poisson,
    Thermal,
}

impl Statistics {
    pub const ALL: [Statistics; 2] = [Statistics::Poisson, Statistics::Thermal];

    pub fn name(self) -> &'static str {
        match self {
            Statistics::Poisson => "poisson",
            Statistics::Thermal => "thermal",
        }
    }
}

/// Distribution of the number of pairs emitted in one pump pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonNumberDistribution<T> {
    kind: Statistics,
    mu: T,
}

impl<T: Scalar> PhotonNumberDistribution<T> {
    pub fn new(kind: Statistics, mu: T) -> Result<Self> {
        ensure_non_negative("mu", mu)?;
        Ok(Self { kind, mu })
    }

    pub fn poisson(mu: T) -> Result<Self> {
        Self::new(Statistics::Poisson, mu)
    }

    pub fn thermal(mu: T) -> Result<Self> {
        Self::new(Statistics::Thermal, mu)
    }

    pub fn kind(&self) -> Statistics {
        self.kind
    }

    pub fn mean(&self) -> T {
        self.mu
    }

    /// Probability of emitting exactly `n` pairs.
    pub fn pmf(&self, n: u64) -> T {
        let mu = self.mu;
        if mu == T::zero() {
            return if n == 0 { T::one() } else { T::zero() };
        }
        let nf = from_u64::<T>(n);
        let log_p = match self.kind {
            Statistics::Poisson => nf * mu.ln() - mu - ln_factorial::<T>(n),
            Statistics::Thermal => nf * (mu / (T::one() + mu)).ln() - mu.ln_1p(),
        };
        log_p.exp()
    }

    /// Probability of at least one pair, computed without cancellation.
    pub fn prob_nonzero(&self) -> T {
        let mu = self.mu;
        match self.kind {
            Statistics::Poisson => -(-mu).exp_m1(),
            Statistics::Thermal => mu / (T::one() + mu),
        }
    }

    /// Probability generating function `E[s^n]`.
    pub fn pgf(&self, s: T) -> T {
        let mu = self.mu;
        match self.kind {
            Statistics::Poisson => (-(mu * (T::one() - s))).exp(),
            Statistics::Thermal => T::one() / (T::one() + mu * (T::one() - s)),
        }
    }

    /// Distribution of the pairs that survive independent thinning with
    /// probability `keep`. Both families are closed under thinning.
    pub fn thinned(&self, keep: T) -> Result<Self> {
        crate::error::ensure_unit_interval("keep", keep)?;
        Self::new(self.kind, self.mu * keep)
    }

    /// Factorial moment `E[n (n-1) ... (n-order+1)]` for order 1..=3.
    pub fn factorial_moment(&self, order: u32) -> Result<T> {
        if !(1..=3).contains(&order) {
            return Err(Error::invalid("order", format!("{order} not in 1..=3")));
        }
        let mu_k = self.mu.powi(order as i32);
        let scale = match self.kind {
            Statistics::Poisson => T::one(),
            // k! for the single-mode thermal law.
            Statistics::Thermal => from_u64((1..=order as u64).product()),
        };
        Ok(scale * mu_k)
    }

    /// `E[n^2]`.
    pub fn second_moment(&self) -> T {
        self.fm(2) + self.fm(1)
    }

    /// `E[n^2 (n-1)]`, the pair-multiplicity weight of a three-fold event.
    pub fn triple_weight(&self) -> T {
        self.fm(3) + lit::<T>(2.0) * self.fm(2)
    }

    fn fm(&self, order: u32) -> T {
        self.factorial_moment(order).expect("order within 1..=3")
    }

    /// Pmf values `wp(0..=N)` with `N` chosen where terms fall below
    /// `1e-18` of the largest term (past the mode).
    pub fn series(&self) -> Vec<T> {
        let mu = self.mu;
        let cutoff = lit::<T>(SERIES_CUTOFF);
        let mut terms = Vec::new();
        let mut term = self.pmf(0);
        let mut max_term = term;
        for n in 0..SERIES_MAX_TERMS {
            terms.push(term);
            max_term = max_term.max(term);
            let past_mode = from_u64::<T>(n as u64) >= mu;
            if past_mode && term <= cutoff * max_term {
                break;
            }
            let next = from_u64::<T>(n as u64 + 1);
            term = match self.kind {
                Statistics::Poisson => term * mu / next,
                Statistics::Thermal => term * mu / (T::one() + mu),
            };
            if term == T::zero() && past_mode {
                break;
            }
        }
        terms
    }

    /// Draws a pair number.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let mu = to_f64(self.mu);
        if mu == 0.0 {
            return 0;
        }
        match self.kind {
            Statistics::Poisson => sample_poisson(mu, rng),
            Statistics::Thermal => sample_geometric(mu / (1.0 + mu), rng),
        }
    }

    /// Draws a pair number conditioned on `n >= 1`. Returns 1 if the mean is 0.
    pub fn sample_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let mu = to_f64(self.mu);
        if mu == 0.0 {
            return 1;
        }
        match self.kind {
            Statistics::Poisson => {
                if mu > 30.0 {
                    // P(n = 0) < 1e-13: plain rejection is exact and cheap.
                    loop {
                        let n = sample_poisson(mu, rng);
                        if n > 0 {
                            return n;
                        }
                    }
                }
                let target = rng.random::<f64>() * (-(-mu).exp_m1());
                let mut n = 1u64;
                let mut p = mu * (-mu).exp();
                let mut cdf = p;
                while target > cdf && p > 0.0 {
                    n += 1;
                    p *= mu / n as f64;
                    cdf += p;
                }
                n
            }
            Statistics::Thermal => 1 + sample_geometric(mu / (1.0 + mu), rng),
        }
    }
}

fn sample_poisson<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    if mu > 30.0 {
        use rand_distr::Distribution;
        let d = rand_distr::Poisson::new(mu).expect("positive finite mean");
        return d.sample(rng) as u64;
    }
    let u = rng.random::<f64>();
    let mut n = 0u64;
    let mut p = (-mu).exp();
    let mut cdf = p;
    while u > cdf && p > 0.0 {
        n += 1;
        p *= mu / n as f64;
        cdf += p;
    }
    n
}

/// Number of failures before the first success, `P(n >= k) = ratio^k`.
fn sample_geometric<R: Rng + ?Sized>(ratio: f64, rng: &mut R) -> u64 {
    if ratio <= 0.0 {
        return 0;
    }
    let u = 1.0 - rng.random::<f64>();
    (u.ln() / ratio.ln()).floor() as u64
}

/// `ln(n!)`, exact summation for small `n`, Stirling series beyond.
pub(crate) fn ln_factorial<T: Scalar>(n: u64) -> T {
    if n < 2 {
        return T::zero();
    }
    if n < 256 {
        return (2..=n)
            .map(|k| from_u64::<T>(k).ln())
            .fold(T::zero(), |a, b| a + b);
    }
    let x = from_u64::<T>(n);
    let two_pi = lit::<T>(2.0) * T::PI();
    x * x.ln() - x + lit::<T>(0.5) * (two_pi * x).ln() + T::one() / (lit::<T>(12.0) * x)
        - T::one() / (lit::<T>(360.0) * x.powi(3))
}
