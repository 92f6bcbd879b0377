//! Closed-form reference quantities and their sampling audits.
//!
//! `Z = max_r Z_r / min_r Z_r` for `R` independent unit-rate exponential
//! variates has CDF `F_Z(z) = ∏_{r=1}^{R−1} r / (r + R/(z−1))` for `z > 1`.
//! The audits compare that and the other bounds here against independent
//! sampling, and never depend on the Monte Carlo SER code.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{received_snr, sample_channel, BeamformingVector, ChannelState, NetworkConfig, PowerLevel};
use crate::montecarlo::gaussian_tail;
use crate::rng::{RandomStream, StreamFamily};
use crate::structure::RelaySet;
use crate::{Error, Result};

/// Law of the max/min ratio of `R ≥ 2` unit-rate exponential variates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RatioDistribution {
    relays: usize,
}

impl RatioDistribution {
    pub fn new(relays: usize) -> Result<Self> {
        if relays < 2 {
            return Err(Error::InvalidNetwork(format!("ratio distribution needs R >= 2, got {relays}")));
        }
        Ok(Self { relays })
    }

    pub fn relays(&self) -> usize {
        self.relays
    }

    /// One draw of `max/min`.
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..self.relays {
            let e = rng.exp1();
            lo = lo.min(e);
            hi = hi.max(e);
        }
        hi / lo
    }
}

pub fn ratio_cdf(dist: RatioDistribution, z: f64) -> f64 {
    if !(z > 1.0) {
        return 0.0;
    }
    let c = dist.relays as f64 / (z - 1.0);
    (1..dist.relays).map(|r| r as f64 / (r as f64 + c)).product()
}

pub fn ratio_pdf(dist: RatioDistribution, z: f64) -> f64 {
    if !(z > 1.0) || z.is_infinite() {
        return 0.0;
    }
    let big_r = dist.relays as f64;
    let c = big_r / (z - 1.0);
    let harmonic: f64 = (1..dist.relays).map(|r| 1.0 / (r as f64 + c)).sum();
    ratio_cdf(dist, z) * harmonic * big_r / ((z - 1.0) * (z - 1.0))
}

/// `((R−1) R! / R^R) (z−1)^{R−2} / z^R`, a lower bound on the density for `z > 1`.
pub fn ratio_pdf_lower_bound(dist: RatioDistribution, z: f64) -> f64 {
    if !(z > 1.0) {
        return 0.0;
    }
    let r = dist.relays as f64;
    let factorial = libm::tgamma(r + 1.0);
    (r - 1.0) * factorial / r.powf(r) * (z - 1.0).powf(r - 2.0) / z.powf(r)
}

/// `(1/√2π) · x/(1+x²) · e^{−x²/2}`, a lower bound on `Q(x)` for `x ≥ 0`.
pub fn q_lower_bound(x: f64) -> f64 {
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    inv_sqrt_2pi * x / (1.0 + x * x) * (-0.5 * x * x).exp()
}

/// The high-SNR upper bound `SNR ≤ C₅ · P · Y · Z` for a single vector `x`
/// and an index set `rset` meeting its support, where
///
/// * `C₆ = R² max{1, p₀ max σ²_f} · max_r(p_r σ²_g) / min_r(p_r σ²_g)`,
/// * `C₅ = C₆ / ξ` with `ξ = max_{r∈rset} |x_r|²`,
/// * `Y = 1/P + Σ_{r∈rset} |f_r|² / σ²_{f_r}`,
/// * `Z = max_r(|g_r|²/σ²_{g_r}) / min_r(|g_r|²/σ²_{g_r})`.
///
/// Returns `true` when the bound holds (trivially so if `x` vanishes on `rset`).
pub fn snr_upper_bound_check(
    h: &ChannelState,
    x: &BeamformingVector,
    rset: RelaySet,
    config: &NetworkConfig,
    power: PowerLevel,
) -> bool {
    let relays = config.relay_count();
    let vf = config.variance_f();
    let vg = config.variance_g();
    let xi = rset
        .indices()
        .into_iter()
        .filter(|&r| r < relays)
        .map(|r| x.gains()[r] * x.gains()[r])
        .fold(0.0, f64::max);
    let snr = received_snr(x, h, config, power);
    if xi == 0.0 {
        return true;
    }
    let max_vf = vf.iter().cloned().fold(0.0, f64::max);
    let relay_g: Vec<f64> = (0..relays).map(|r| config.relay_scaler(r) * vg[r]).collect();
    let c6 = (relays * relays) as f64
        * (config.source_scaler() * max_vf).max(1.0)
        * relay_g.iter().cloned().fold(0.0, f64::max)
        / relay_g.iter().cloned().fold(f64::INFINITY, f64::min);
    let c5 = c6 / xi;
    let p = power.linear();
    let y = 1.0 / p
        + rset
            .indices()
            .into_iter()
            .filter(|&r| r < relays)
            .map(|r| h.f()[r].norm_sqr() / vf[r])
            .sum::<f64>();
    let normalized_g: Vec<f64> = (0..relays).map(|r| h.g()[r].norm_sqr() / vg[r]).collect();
    let z = normalized_g.iter().cloned().fold(0.0, f64::max)
        / normalized_g.iter().cloned().fold(f64::INFINITY, f64::min);
    snr <= c5 * p * y * z
}

/// Outcome of one audit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditResult {
    pub name: String,
    pub passed: bool,
    /// Observed value of the audited statistic.
    pub statistic: f64,
    /// Value the statistic is compared against.
    pub threshold: f64,
}

/// Dvoretzky–Kiefer–Wolfowitz band half-width at confidence `1 − alpha`.
pub fn dkw_band(samples: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * samples as f64)).sqrt()
}

fn ratio_samples(dist: RatioDistribution, samples: usize, family: &StreamFamily, stream: u64) -> Vec<f64> {
    (0..samples as u64)
        .into_par_iter()
        .map(|t| dist.sample(&mut family.at(stream, t)))
        .collect()
}

/// Kolmogorov distance between sampled ratios and `cdf`, against the 99%
/// DKW band.
pub fn cdf_audit<F>(dist: RatioDistribution, samples: usize, seed: u64, cdf: F) -> AuditResult
where
    F: Fn(f64) -> f64,
{
    let family = StreamFamily::new(seed);
    let mut z = ratio_samples(dist, samples, &family, dist.relays as u64);
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let distance = z
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    let band = dkw_band(samples, 0.01);
    AuditResult {
        name: format!("ratio_cdf R={} vs empirical CDF (DKW 99%)", dist.relays),
        passed: distance <= band,
        statistic: distance,
        threshold: band,
    }
}

/// Histogram density estimates at `points` against the density lower bound;
/// the bound may not exceed the estimate plus three standard errors.
pub fn pdf_bound_audit(dist: RatioDistribution, samples: usize, seed: u64, points: &[f64], width: f64) -> AuditResult {
    let family = StreamFamily::new(seed);
    let z = ratio_samples(dist, samples, &family, 100 + dist.relays as u64);
    let n = samples as f64;
    let mut worst = f64::NEG_INFINITY;
    for &p in points {
        let count = z.iter().filter(|&&v| (v - p).abs() < width / 2.0).count() as f64;
        let density = count / (n * width);
        let sigma = count.max(1.0).sqrt() / (n * width);
        worst = worst.max(ratio_pdf_lower_bound(dist, p) - density - 3.0 * sigma);
    }
    AuditResult {
        name: format!("ratio_pdf_lower_bound R={} <= histogram + 3 sigma", dist.relays),
        passed: worst <= 0.0,
        statistic: worst,
        threshold: 0.0,
    }
}

/// Empirical `P(Z ≤ z)` against `ratio_cdf` within three standard errors.
pub fn cdf_point_audit(dist: RatioDistribution, z: f64, samples: usize, seed: u64) -> AuditResult {
    let family = StreamFamily::new(seed);
    let hits = ratio_samples(dist, samples, &family, 200 + dist.relays as u64)
        .into_iter()
        .filter(|&v| v <= z)
        .count() as f64;
    let n = samples as f64;
    let f = ratio_cdf(dist, z);
    let se = (f * (1.0 - f) / n).sqrt();
    let deviation = (hits / n - f).abs();
    AuditResult {
        name: format!("ratio_cdf R={} at z={} vs sampled frequency (3 se)", dist.relays, z),
        passed: deviation <= 3.0 * se,
        statistic: deviation,
        threshold: 3.0 * se,
    }
}

/// `q_lower_bound ≤ Q` on `points` evenly spaced values in `[0, 10]`.
pub fn q_bound_audit(points: usize) -> AuditResult {
    let steps = points.max(2) - 1;
    let worst = (0..=steps)
        .map(|k| {
            let x = 10.0 * k as f64 / steps as f64;
            q_lower_bound(x) - gaussian_tail(x)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    AuditResult {
        name: format!("q_lower_bound <= Q on {} grid points", steps + 1),
        passed: worst <= 0.0,
        statistic: worst,
        threshold: 0.0,
    }
}

fn random_network(rng: &mut RandomStream, relays: usize) -> NetworkConfig {
    let mut draw = |n| (0..n).map(|_| 0.2 + 2.8 * rng.uniform()).collect::<Vec<_>>();
    let scalers = draw(relays + 1);
    let vf = draw(relays);
    let vg = draw(relays);
    NetworkConfig::new(scalers, vf, vg).expect("positive parameters")
}

/// Randomized audit of [`snr_upper_bound_check`] over networks with one to
/// four relays, random vectors with random zero patterns, index sets meeting
/// the vector's support and powers in `[−10, 60]` dB.
pub fn snr_bound_audit(audits: usize, seed: u64) -> AuditResult {
    let family = StreamFamily::new(seed);
    let failures = (0..audits as u64)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = family.at(0, t);
            let relays = 1 + (rng.uniform() * 4.0) as usize;
            let network = random_network(&mut rng, relays);
            let h = sample_channel(&network, &mut rng);
            let gains: Vec<f64> = (0..relays)
                .map(|_| if rng.uniform() < 0.3 { 0.0 } else { rng.uniform() })
                .collect();
            let phases = (0..relays).map(|_| rng.phase()).collect();
            let x = BeamformingVector::from_polar(gains, phases).expect("gains within [0, 1)");
            let mut bits = 1 + (rng.uniform() * ((1u32 << relays) - 1) as f64) as u32;
            if let Some(r) = x.gains().iter().position(|&m| m > 0.0) {
                if (0..relays).all(|q| bits >> q & 1 == 0 || x.gains()[q] == 0.0) {
                    bits |= 1 << r;
                }
            }
            let power = PowerLevel::from_db(-10.0 + 70.0 * rng.uniform()).expect("finite power");
            !snr_upper_bound_check(&h, &x, RelaySet::from_bits(bits), &network, power)
        })
        .count();
    AuditResult {
        name: format!("snr_upper_bound_check on {audits} random audits"),
        passed: failures == 0,
        statistic: failures as f64,
        threshold: 0.0,
    }
}

/// Audit points for the density lower bound.
const PDF_POINTS: [f64; 5] = [1.5, 2.0, 3.0, 5.0, 10.0];

/// Runs every audit with `samples` draws per sampling audit.
pub fn run_oracle_suite(samples: usize, seed: u64) -> Vec<AuditResult> {
    let mut results = Vec::new();
    for relays in [2, 3, 4] {
        let dist = RatioDistribution::new(relays).expect("R >= 2");
        results.push(cdf_audit(dist, samples, seed, |z| ratio_cdf(dist, z)));
    }
    let r3 = RatioDistribution::new(3).expect("R >= 2");
    results.push(cdf_point_audit(r3, 2.0, samples, seed));
    for relays in [2, 3, 4] {
        let dist = RatioDistribution::new(relays).expect("R >= 2");
        results.push(pdf_bound_audit(dist, samples, seed, &PDF_POINTS, 0.1));
    }
    results.push(q_bound_audit(1000));
    results.push(snr_bound_audit(100_000, seed));
    results
}
