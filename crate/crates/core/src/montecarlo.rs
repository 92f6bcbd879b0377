//! Symbol error rate curves and diversity slopes.
//!
//! Each trial draws its channel from a stream addressed by
//! `(seed, point index, trial index)`. Trials are grouped into fixed-size
//! blocks, each block is summarized sequentially, and block summaries are
//! merged in block order, so the result does not depend on how rayon
//! schedules the blocks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{default_grid_resolution, CodebookSpec, Evaluator};
use crate::model::{sample_channel, EffectiveChannel, NetworkConfig, PowerLevel};
use crate::rng::{RandomStream, StreamFamily};
use crate::{Error, Result};

/// Trials per reduction block.
const BLOCK: u64 = 4096;

/// Gaussian tail `Q(x) = ½ erfc(x/√2)`.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Conditional symbol error probability `Q(√(2·SNR))`.
pub fn conditional_ser(snr: f64) -> f64 {
    gaussian_tail((2.0 * snr).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationPlan {
    pub network: NetworkConfig,
    pub codebook: CodebookSpec,
    pub p_grid_db: Vec<f64>,
    pub trials_per_point: u64,
    pub seed: u64,
    /// Magnitude grid for constrained families; defaults by relay count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.p_grid_db)?;
        if self.trials_per_point == 0 {
            return Err(Error::InvalidPlan("trials_per_point must be at least 1".into()));
        }
        if let Some(g) = self.grid_resolution {
            if g < 2 {
                return Err(Error::GridResolution(g));
            }
        }
        self.codebook.validate(self.network.relay_count())
    }

    pub fn grid(&self) -> usize {
        self.grid_resolution
            .unwrap_or_else(|| default_grid_resolution(self.network.relay_count()))
    }
}

/// Checks that a power grid is non-empty, finite and strictly ascending.
pub fn validate_grid(p_grid_db: &[f64]) -> Result<()> {
    if p_grid_db.is_empty() {
        return Err(Error::InvalidPlan("p_grid_db is empty".into()));
    }
    if p_grid_db.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidPlan("p_grid_db has a non-finite entry".into()));
    }
    if p_grid_db.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidPlan("p_grid_db must be strictly ascending".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerPoint {
    pub p_db: f64,
    pub ser: f64,
    pub std_err: f64,
    pub trials: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SerCurve {
    pub rows: Vec<SerPoint>,
}

/// Running count, mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    /// Pairwise merge of two disjoint summaries.
    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let weight = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + delta * weight,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * weight,
        }
    }

    /// Sample standard deviation over `√n`.
    pub fn std_err(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        (self.m2 / (n - 1.0)).sqrt() / n.sqrt()
    }
}

/// Mean of `sample` over `trials` streams `(point, 0..trials)` of `family`.
pub fn average_over_trials<F>(family: &StreamFamily, point: u64, trials: u64, sample: F) -> Moments
where
    F: Fn(&mut RandomStream) -> f64 + Sync,
{
    let blocks = trials.div_ceil(BLOCK);
    let summaries: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut m = Moments::default();
            for t in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                m.push(sample(&mut family.at(point, t)));
            }
            m
        })
        .collect();
    summaries.into_iter().fold(Moments::default(), Moments::merge)
}

/// SER at one power level for an already-resolved codebook.
pub fn estimate_point(
    network: &NetworkConfig,
    evaluator: &Evaluator,
    power: PowerLevel,
    family: &StreamFamily,
    point: u64,
    trials: u64,
) -> Moments {
    average_over_trials(family, point, trials, |rng| {
        let h = sample_channel(network, rng);
        conditional_ser(evaluator.best_snr(&EffectiveChannel::new(&h, network, power)))
    })
}

pub fn estimate_ser(plan: &SimulationPlan) -> Result<SerCurve> {
    plan.validate()?;
    let relays = plan.network.relay_count();
    let family = StreamFamily::new(plan.seed);
    let grid = plan.grid();
    let rows = plan
        .p_grid_db
        .iter()
        .enumerate()
        .map(|(point, &p_db)| {
            let power = PowerLevel::from_db(p_db)?;
            let evaluator = plan.codebook.resolve(relays, power, grid)?;
            let m = estimate_point(&plan.network, &evaluator, power, &family, point as u64, plan.trials_per_point);
            Ok(SerPoint {
                p_db,
                ser: m.mean,
                std_err: m.std_err(),
                trials: m.count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SerCurve { rows })
}

/// High-P log-log fit of a SER curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// Largest absolute fit residual, in decades.
    pub residual: f64,
}

/// The top three grid points of a curve.
pub fn default_window(curve: &SerCurve) -> Result<(f64, f64)> {
    let n = curve.rows.len();
    if n < 3 {
        return Err(Error::WindowTooSmall(n));
    }
    Ok((curve.rows[n - 3].p_db, curve.rows[n - 1].p_db))
}

/// Least-squares fit of `−log₁₀ SER` against `log₁₀ P` over `window` (dB,
/// inclusive).
pub fn estimate_diversity(curve: &SerCurve, window: (f64, f64)) -> Result<DiversityEstimate> {
    const EDGE: f64 = 1e-9;
    let inside: Vec<&SerPoint> = curve
        .rows
        .iter()
        .filter(|r| r.p_db >= window.0 - EDGE && r.p_db <= window.1 + EDGE)
        .collect();
    if inside.len() < 3 {
        return Err(Error::WindowTooSmall(inside.len()));
    }
    if inside.iter().any(|r| !(r.ser > 0.0)) {
        return Err(Error::InsufficientTrials);
    }
    let xs: Vec<f64> = inside.iter().map(|r| r.p_db / 10.0).collect();
    let ys: Vec<f64> = inside.iter().map(|r| -r.ser.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(DiversityEstimate {
        slope,
        intercept,
        window,
        residual,
    })
}
