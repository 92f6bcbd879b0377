//! Network model: configuration, channel realizations, received SNR and the
//! SNR-maximizing encoder.
//!
//! Relays are indexed from 0 in the API. Noise at every relay and at the
//! receiver is unit-variance circularly symmetric complex Gaussian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::rng::RandomStream;
use crate::{Error, Result};

/// Slack allowed above unit magnitude for beamforming entries read from files
/// or produced by floating-point products.
pub const MAGNITUDE_TOLERANCE: f64 = 1e-9;

/// Fixed network parameters: power scalers `p_0..p_R` (transmitter first) and
/// per-relay channel variances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkConfigRepr", into = "NetworkConfigRepr")]
pub struct NetworkConfig {
    power_scalers: Vec<f64>,
    variance_f: Vec<f64>,
    variance_g: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkConfigRepr {
    power_scalers: Vec<f64>,
    variance_f: Vec<f64>,
    variance_g: Vec<f64>,
}

impl TryFrom<NetworkConfigRepr> for NetworkConfig {
    type Error = Error;

    fn try_from(r: NetworkConfigRepr) -> Result<Self> {
        NetworkConfig::new(r.power_scalers, r.variance_f, r.variance_g)
    }
}

impl From<NetworkConfig> for NetworkConfigRepr {
    fn from(c: NetworkConfig) -> Self {
        Self {
            power_scalers: c.power_scalers,
            variance_f: c.variance_f,
            variance_g: c.variance_g,
        }
    }
}

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        Some(i) => Err(Error::InvalidNetwork(format!(
            "{name}[{i}] = {} must be positive and finite",
            values[i]
        ))),
        None => Ok(()),
    }
}

impl NetworkConfig {
    pub fn new(power_scalers: Vec<f64>, variance_f: Vec<f64>, variance_g: Vec<f64>) -> Result<Self> {
        let relays = variance_f.len();
        if relays == 0 {
            return Err(Error::InvalidNetwork("at least one relay is required".into()));
        }
        if variance_g.len() != relays {
            return Err(Error::InvalidNetwork(format!(
                "variance_g has {} entries, variance_f has {relays}",
                variance_g.len()
            )));
        }
        if power_scalers.len() != relays + 1 {
            return Err(Error::InvalidNetwork(format!(
                "power_scalers needs {} entries (transmitter plus {relays} relays), got {}",
                relays + 1,
                power_scalers.len()
            )));
        }
        check_positive("power_scalers", &power_scalers)?;
        check_positive("variance_f", &variance_f)?;
        check_positive("variance_g", &variance_g)?;
        Ok(Self {
            power_scalers,
            variance_f,
            variance_g,
        })
    }

    /// All scalers and variances equal to one.
    pub fn unity(relays: usize) -> Result<Self> {
        Self::new(vec![1.0; relays + 1], vec![1.0; relays], vec![1.0; relays])
    }

    pub fn relay_count(&self) -> usize {
        self.variance_f.len()
    }

    /// Transmitter scaler `p_0`.
    pub fn source_scaler(&self) -> f64 {
        self.power_scalers[0]
    }

    /// Scaler `p_r` of relay `r` (0-based).
    pub fn relay_scaler(&self, r: usize) -> f64 {
        self.power_scalers[r + 1]
    }

    pub fn power_scalers(&self) -> &[f64] {
        &self.power_scalers
    }

    pub fn variance_f(&self) -> &[f64] {
        &self.variance_f
    }

    pub fn variance_g(&self) -> &[f64] {
        &self.variance_g
    }
}

/// Common power constraint `P` in linear scale.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct PowerLevel(f64);

impl PowerLevel {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 {
            Ok(Self(p))
        } else {
            Err(Error::InvalidPower(p))
        }
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(10f64.powf(db / 10.0))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

/// One channel realization: transmitter-to-relay gains `f` and relay-to-receiver
/// gains `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelState {
    f: Vec<Complex64>,
    g: Vec<Complex64>,
}

impl ChannelState {
    pub fn new(f: Vec<Complex64>, g: Vec<Complex64>) -> Result<Self> {
        if f.len() != g.len() || f.is_empty() {
            return Err(Error::InvalidChannel(format!(
                "f has {} entries and g has {}",
                f.len(),
                g.len()
            )));
        }
        if f.iter().chain(&g).any(|z| !z.is_finite()) {
            return Err(Error::InvalidChannel("non-finite gain".into()));
        }
        Ok(Self { f, g })
    }

    pub fn relay_count(&self) -> usize {
        self.f.len()
    }

    pub fn f(&self) -> &[Complex64] {
        &self.f
    }

    pub fn g(&self) -> &[Complex64] {
        &self.g
    }
}

/// Relay weights stored as per-relay gains `|x_r|` and phases `arg x_r`.
///
/// Keeping the polar form makes the global-phase invariance of the SNR exact
/// for single-relay vectors: `e_r(θ)` has gain exactly one for every `θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformingVector {
    gains: Vec<f64>,
    phases: Vec<f64>,
}

impl BeamformingVector {
    pub fn from_polar(gains: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if gains.len() != phases.len() {
            return Err(Error::DimensionMismatch {
                expected: gains.len(),
                found: phases.len(),
            });
        }
        for (index, (&m, &phi)) in gains.iter().zip(&phases).enumerate() {
            if !(m.is_finite() && phi.is_finite()) || m < 0.0 {
                return Err(Error::NonFiniteEntry(index));
            }
            if m > 1.0 + MAGNITUDE_TOLERANCE {
                return Err(Error::MagnitudeBound { index, magnitude: m });
            }
        }
        Ok(Self { gains, phases })
    }

    pub fn from_complex(entries: &[Complex64]) -> Result<Self> {
        let gains = entries.iter().map(|z| z.norm()).collect();
        let phases = entries
            .iter()
            .map(|z| if *z == Complex64::new(0.0, 0.0) { 0.0 } else { z.arg() })
            .collect();
        Self::from_polar(gains, phases)
    }

    /// Real, nonnegative weights.
    pub fn from_gains(gains: Vec<f64>) -> Result<Self> {
        let phases = vec![0.0; gains.len()];
        Self::from_polar(gains, phases)
    }

    pub fn zeros(relays: usize) -> Self {
        Self {
            gains: vec![0.0; relays],
            phases: vec![0.0; relays],
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn entry(&self, r: usize) -> Complex64 {
        Complex64::from_polar(self.gains[r], self.phases[r])
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        (0..self.len()).map(|r| self.entry(r)).collect()
    }

    /// `‖x‖_∞`.
    pub fn max_gain(&self) -> f64 {
        self.gains.iter().copied().fold(0.0, f64::max)
    }

    /// `e^{jθ} x`.
    pub fn rotated(&self, theta: f64) -> Self {
        Self {
            gains: self.gains.clone(),
            phases: self.phases.iter().map(|p| p + theta).collect(),
        }
    }

    /// Precomputes the weights used by [`EffectiveChannel::snr`].
    pub fn prepare(&self) -> PreparedVector {
        let pivot = (0..self.len())
            .fold(0, |best, r| if self.gains[r] > self.gains[best] { r } else { best });
        let reference = self.phases.get(pivot).copied().unwrap_or(0.0);
        let weights = (0..self.len())
            .map(|r| {
                if r == pivot {
                    Complex64::new(self.gains[r], 0.0)
                } else if self.gains[r] == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(self.gains[r], self.phases[r] - reference)
                }
            })
            .collect();
        PreparedVector {
            weights,
            powers: self.gains.iter().map(|m| m * m).collect(),
        }
    }
}

impl Serialize for BeamformingVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::serde_complex::vec::serialize(&self.to_complex(), s)
    }
}

impl<'de> Deserialize<'de> for BeamformingVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = crate::serde_complex::vec::deserialize(d)?;
        Self::from_complex(&entries).map_err(serde::de::Error::custom)
    }
}

/// A beamforming vector with its global phase referenced to its largest entry.
#[derive(Clone, Debug)]
pub struct PreparedVector {
    weights: Vec<Complex64>,
    powers: Vec<f64>,
}

/// Quantities of one `(h, P)` pair shared by every candidate vector:
/// `P_0`, the couplings `f_r g_r √ρ_r` and the relay noise gains `|g_r|² ρ_r`.
#[derive(Clone, Debug)]
pub struct EffectiveChannel {
    source_power: f64,
    coupling: Vec<Complex64>,
    noise_gain: Vec<f64>,
}

impl EffectiveChannel {
    pub fn new(h: &ChannelState, config: &NetworkConfig, power: PowerLevel) -> Self {
        assert_eq!(h.relay_count(), config.relay_count(), "channel/config relay count");
        let source_power = config.source_scaler() * power.linear();
        let mut coupling = Vec::with_capacity(h.relay_count());
        let mut noise_gain = Vec::with_capacity(h.relay_count());
        for r in 0..h.relay_count() {
            let rho = relay_gain(r, h, config, power);
            coupling.push(h.f[r] * h.g[r] * rho.sqrt());
            noise_gain.push(h.g[r].norm_sqr() * rho);
        }
        Self {
            source_power,
            coupling,
            noise_gain,
        }
    }

    pub fn source_power(&self) -> f64 {
        self.source_power
    }

    pub fn coupling(&self) -> &[Complex64] {
        &self.coupling
    }

    pub fn noise_gain(&self) -> &[f64] {
        &self.noise_gain
    }

    pub fn snr(&self, x: &PreparedVector) -> f64 {
        assert_eq!(x.weights.len(), self.coupling.len(), "vector/channel relay count");
        let mut signal = Complex64::new(0.0, 0.0);
        let mut noise = 1.0;
        for r in 0..self.coupling.len() {
            signal += x.weights[r] * self.coupling[r];
            noise += x.powers[r] * self.noise_gain[r];
        }
        self.source_power * signal.norm_sqr() / noise
    }

    /// Best entry of a prepared codebook; ties go to the lowest index.
    pub fn best(&self, codebook: &[PreparedVector]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, x) in codebook.iter().enumerate() {
            let snr = self.snr(x);
            if snr > best.1 {
                best = (i, snr);
            }
        }
        best
    }
}

/// Draws `f_r ~ CN(0, σ²_{f_r})` and `g_r ~ CN(0, σ²_{g_r})`, all independent.
pub fn sample_channel(config: &NetworkConfig, rng: &mut RandomStream) -> ChannelState {
    let relays = config.relay_count();
    let mut f = Vec::with_capacity(relays);
    let mut g = Vec::with_capacity(relays);
    for r in 0..relays {
        f.push(rng.complex_gaussian(config.variance_f[r]));
        g.push(rng.complex_gaussian(config.variance_g[r]));
    }
    ChannelState { f, g }
}

/// Relay normalization `ρ_r = P_r / (1 + |f_r|² P_0)`.
pub fn relay_gain(r: usize, h: &ChannelState, config: &NetworkConfig, power: PowerLevel) -> f64 {
    let p = power.linear();
    config.relay_scaler(r) * p / (1.0 + h.f[r].norm_sqr() * config.source_scaler() * p)
}

/// Received SNR `P_0 |Σ x_r f_r g_r √ρ_r|² / (1 + Σ |x_r|² |g_r|² ρ_r)`.
pub fn received_snr(
    x: &BeamformingVector,
    h: &ChannelState,
    config: &NetworkConfig,
    power: PowerLevel,
) -> f64 {
    EffectiveChannel::new(h, config, power).snr(&x.prepare())
}

/// Outcome of the SNR-maximizing encoder.
#[derive(Clone, Debug)]
pub struct EncoderChoice<'a> {
    pub index: usize,
    pub vector: &'a BeamformingVector,
    pub snr: f64,
}

/// Picks the codebook entry with the largest received SNR, lowest index on ties.
pub fn optimal_encoder<'a>(
    codebook: &'a [BeamformingVector],
    h: &ChannelState,
    config: &NetworkConfig,
    power: PowerLevel,
) -> Result<EncoderChoice<'a>> {
    if codebook.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    let channel = EffectiveChannel::new(h, config, power);
    let prepared: Vec<_> = codebook.iter().map(BeamformingVector::prepare).collect();
    let (index, snr) = channel.best(&prepared);
    Ok(EncoderChoice {
        index,
        vector: &codebook[index],
        snr,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop, clippy::type_complexity)]
mod tests {
    use super::*;
    use crate::rng::StreamFamily;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fig2_network() -> NetworkConfig {
        NetworkConfig::new(
            vec![1.0, 0.5, 2.0, 2.0],
            vec![1.2, 0.8, 1.0],
            vec![1.5, 1.7, 0.7],
        )
        .unwrap()
    }

    /// Independent term-by-term evaluation of the SNR expression in Cartesian form.
    fn snr_oracle(x: &[Complex64], h: &ChannelState, cfg: &NetworkConfig, p: f64) -> f64 {
        let p0 = cfg.power_scalers()[0] * p;
        let mut num = c(0.0, 0.0);
        let mut den = 1.0;
        for r in 0..x.len() {
            let pr = cfg.power_scalers()[r + 1] * p;
            let f2 = h.f()[r].re * h.f()[r].re + h.f()[r].im * h.f()[r].im;
            let g2 = h.g()[r].re * h.g()[r].re + h.g()[r].im * h.g()[r].im;
            let rho = pr / (1.0 + f2 * p0);
            num += x[r] * h.f()[r] * h.g()[r] * rho.sqrt();
            den += (x[r].re * x[r].re + x[r].im * x[r].im) * g2 * rho;
        }
        p0 * (num.re * num.re + num.im * num.im) / den
    }

    #[test]
    fn zero_variance_is_rejected_at_construction() {
        let err = NetworkConfig::new(vec![1.0, 1.0], vec![0.0], vec![1.0]).unwrap_err();
        assert!(err.to_string().contains("variance_f"));
        assert!(NetworkConfig::new(vec![1.0], vec![1.0], vec![1.0]).is_err());
        assert!(NetworkConfig::new(vec![1.0, f64::INFINITY], vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn channel_sample_second_moments_match_variances() {
        let cfg = fig2_network();
        let family = StreamFamily::new(2024);
        let n = 100_000;
        let mut sums = [(0.0, 0.0); 3];
        let mut sq = [(0.0, 0.0); 3];
        for t in 0..n {
            let h = sample_channel(&cfg, &mut family.at(0, t));
            for r in 0..3 {
                let (a, b) = (h.f()[r].norm_sqr(), h.g()[r].norm_sqr());
                sums[r].0 += a;
                sums[r].1 += b;
                sq[r].0 += a * a;
                sq[r].1 += b * b;
            }
        }
        let n = n as f64;
        for r in 0..3 {
            for (sum, sumsq, target) in [
                (sums[r].0, sq[r].0, cfg.variance_f()[r]),
                (sums[r].1, sq[r].1, cfg.variance_g()[r]),
            ] {
                let mean = sum / n;
                let se = ((sumsq / n - mean * mean) / n).sqrt();
                assert!((mean - target).abs() < 5.0 * se, "mean {mean} vs {target} (se {se})");
            }
        }
    }

    #[test]
    fn same_counter_same_channel() {
        let cfg = fig2_network();
        let a = sample_channel(&cfg, &mut RandomStream::new(5, 1, 42));
        let b = sample_channel(&cfg, &mut RandomStream::new(5, 1, 42));
        assert_eq!(a, b);
    }

    #[test]
    fn relay_gain_hand_values() {
        let cfg = NetworkConfig::unity(1).unwrap();
        let p = PowerLevel::new(1.0).unwrap();
        let h = ChannelState::new(vec![c(1.0, 0.0)], vec![c(0.3, 0.1)]).unwrap();
        assert_eq!(relay_gain(0, &h, &cfg, p), 0.5);
        let h0 = ChannelState::new(vec![c(0.0, 0.0)], vec![c(0.3, 0.1)]).unwrap();
        let p = PowerLevel::new(7.5).unwrap();
        assert_eq!(relay_gain(0, &h0, &cfg, p), 7.5);
    }

    #[test]
    fn zero_vector_has_zero_snr() {
        let cfg = fig2_network();
        let h = sample_channel(&cfg, &mut RandomStream::new(1, 0, 0));
        let p = PowerLevel::from_db(20.0).unwrap();
        assert_eq!(received_snr(&BeamformingVector::zeros(3), &h, &cfg, p), 0.0);
    }

    #[test]
    fn single_relay_reduction() {
        let cfg = NetworkConfig::new(vec![1.3, 0.7], vec![1.0], vec![1.0]).unwrap();
        let p = PowerLevel::new(12.0).unwrap();
        let h = ChannelState::new(vec![c(0.4, -0.9)], vec![c(1.1, 0.2)]).unwrap();
        let (f2, g2) = (h.f()[0].norm_sqr(), h.g()[0].norm_sqr());
        let (p0, p1) = (1.3 * 12.0, 0.7 * 12.0);
        let expected = f2 * g2 * p0 * p1 / (1.0 + f2 * p0 + g2 * p1);
        let x = BeamformingVector::from_gains(vec![1.0]).unwrap();
        let got = received_snr(&x, &h, &cfg, p);
        assert!((got - expected).abs() <= 1e-13 * expected);
    }

    #[test]
    fn singleton_codebook_selects_index_zero() {
        let cfg = fig2_network();
        let cb = vec![BeamformingVector::from_gains(vec![0.0, 1.0, 1.0]).unwrap()];
        let p = PowerLevel::from_db(10.0).unwrap();
        for t in 0..20 {
            let h = sample_channel(&cfg, &mut RandomStream::new(3, 0, t));
            assert_eq!(optimal_encoder(&cb, &h, &cfg, p).unwrap().index, 0);
        }
    }

    #[test]
    fn empty_codebook_is_an_error() {
        let cfg = fig2_network();
        let h = sample_channel(&cfg, &mut RandomStream::new(3, 0, 0));
        let p = PowerLevel::new(1.0).unwrap();
        let err = optimal_encoder(&[], &h, &cfg, p).unwrap_err();
        assert_eq!(err.to_string(), "empty codebook");
    }

    #[test]
    fn srs_picks_the_only_connected_relay() {
        let cfg = fig2_network();
        let zero = c(0.0, 0.0);
        let h = ChannelState::new(
            vec![zero, c(0.5, 0.5), zero],
            vec![zero, c(-0.3, 1.0), zero],
        )
        .unwrap();
        let srs: Vec<_> = (0..3)
            .map(|r| {
                let mut g = vec![0.0; 3];
                g[r] = 1.0;
                BeamformingVector::from_gains(g).unwrap()
            })
            .collect();
        let p = PowerLevel::from_db(10.0).unwrap();
        assert_eq!(optimal_encoder(&srs, &h, &cfg, p).unwrap().index, 1);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let cfg = fig2_network();
        let h = sample_channel(&cfg, &mut RandomStream::new(8, 0, 1));
        let x = BeamformingVector::from_gains(vec![1.0, 0.2, 0.0]).unwrap();
        let cb = vec![x.rotated(0.3), x.clone(), x.rotated(-1.0)];
        let p = PowerLevel::from_db(5.0).unwrap();
        // rotations reproduce the same prepared weights exactly
        assert_eq!(optimal_encoder(&cb, &h, &cfg, p).unwrap().index, 0);
    }

    #[test]
    fn encoder_dominates_random_codebooks() {
        let cfg = fig2_network();
        let family = StreamFamily::new(77);
        for t in 0..200 {
            let mut rng = family.at(1, t);
            let cb: Vec<_> = (0..8)
                .map(|_| {
                    let gains = (0..3).map(|_| rng.uniform()).collect();
                    let phases = (0..3).map(|_| rng.phase()).collect();
                    BeamformingVector::from_polar(gains, phases).unwrap()
                })
                .collect();
            let h = sample_channel(&cfg, &mut rng);
            let p = PowerLevel::from_db(30.0 * rng.uniform()).unwrap();
            let choice = optimal_encoder(&cb, &h, &cfg, p).unwrap();
            let brute = cb
                .iter()
                .map(|x| snr_oracle(&x.to_complex(), &h, &cfg, p.linear()))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(choice.snr >= brute * (1.0 - 1e-12));
            for x in &cb {
                assert!(choice.snr >= received_snr(x, &h, &cfg, p));
            }
        }
    }

    fn arb_case() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<(f64, f64, f64, f64)>, f64, f64)> {
        let relays = 1usize..=4;
        relays.prop_flat_map(|r| {
            (
                prop::collection::vec((0.0f64..=1.0, -7.0f64..7.0), r),
                prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), r),
                -10.0f64..50.0,
                -7.0f64..7.0,
            )
        })
    }

    fn build(
        x: &[(f64, f64)],
        h: &[(f64, f64, f64, f64)],
    ) -> (BeamformingVector, ChannelState, NetworkConfig) {
        let r = x.len();
        let bv = BeamformingVector::from_polar(
            x.iter().map(|v| v.0).collect(),
            x.iter().map(|v| v.1).collect(),
        )
        .unwrap();
        let h = ChannelState::new(
            h.iter().map(|v| c(v.0, v.1)).collect(),
            h.iter().map(|v| c(v.2, v.3)).collect(),
        )
        .unwrap();
        let scalers = (0..=r).map(|i| 0.5 + 0.25 * i as f64).collect();
        let var_f = (0..r).map(|i| 1.0 + 0.1 * i as f64).collect();
        let var_g = (0..r).map(|i| 0.8 + 0.3 * i as f64).collect();
        (bv, h, NetworkConfig::new(scalers, var_f, var_g).unwrap())
    }

    proptest! {
        #[test]
        fn snr_matches_duplicate_formula((x, h, db, _) in arb_case()) {
            let (bv, h, cfg) = build(&x, &h);
            let p = PowerLevel::from_db(db).unwrap();
            let got = received_snr(&bv, &h, &cfg, p);
            let expected = snr_oracle(&bv.to_complex(), &h, &cfg, p.linear());
            prop_assert!(got >= 0.0 && got.is_finite());
            prop_assert!((got - expected).abs() <= 1e-10 * expected.max(1e-300));
        }

        #[test]
        fn snr_is_phase_invariant((x, h, db, theta) in arb_case()) {
            let (bv, h, cfg) = build(&x, &h);
            let p = PowerLevel::from_db(db).unwrap();
            let a = received_snr(&bv, &h, &cfg, p);
            let b = received_snr(&bv.rotated(theta), &h, &cfg, p);
            // relative to the cancellation-free magnitude of the same expression
            let channel = EffectiveChannel::new(&h, &cfg, p);
            let (mut amp, mut den) = (0.0, 1.0);
            for r in 0..bv.len() {
                amp += bv.gains()[r] * channel.coupling()[r].norm();
                den += bv.gains()[r].powi(2) * channel.noise_gain()[r];
            }
            let scale = channel.source_power() * amp * amp / den;
            prop_assert!((a - b).abs() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn relay_gain_bounds_and_monotonicity(
            f in (-3.0f64..3.0, -3.0f64..3.0),
            shrink in 0.0f64..1.0,
            db in -10.0f64..50.0,
            step in 0.0f64..10.0,
        ) {
            let cfg = NetworkConfig::new(vec![1.3, 0.6], vec![1.0], vec![1.0]).unwrap();
            let g = vec![c(1.0, 0.0)];
            let h = ChannelState::new(vec![c(f.0, f.1)], g.clone()).unwrap();
            let weaker = ChannelState::new(vec![c(f.0 * shrink, f.1 * shrink)], g).unwrap();
            let p = PowerLevel::from_db(db).unwrap();
            let higher = PowerLevel::from_db(db + step).unwrap();
            let rho = relay_gain(0, &h, &cfg, p);
            prop_assert!(rho > 0.0 && rho <= 0.6 * p.linear());
            prop_assert!(relay_gain(0, &weaker, &cfg, p) >= rho);
            prop_assert!(relay_gain(0, &h, &cfg, higher) >= rho);
        }

        #[test]
        fn encoder_phase_class_invariance(
            (x, h, db, theta) in arb_case(),
            which in 0usize..3,
        ) {
            let (bv, h, cfg) = build(&x, &h);
            let r = bv.len();
            let others: Vec<_> = (0..2)
                .map(|k| {
                    let g = (0..r).map(|i| if (i + k) % r == 0 { 1.0 } else { 0.3 }).collect();
                    BeamformingVector::from_gains(g).unwrap()
                })
                .collect();
            let cb = vec![bv.clone(), others[0].clone(), others[1].clone()];
            let mut rotated = cb.clone();
            rotated[which] = rotated[which].rotated(theta);
            let p = PowerLevel::from_db(db).unwrap();
            let a = optimal_encoder(&cb, &h, &cfg, p).unwrap().snr;
            let b = optimal_encoder(&rotated, &h, &cfg, p).unwrap().snr;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }
}
