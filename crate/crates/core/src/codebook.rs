//! Codebook families: single-relay selection, explicit lists, unitary
//! transforms and the constrained continuous families `C̃(ε, r)`.
//!
//! Relay indices are 0-based in the Rust API. The JSON spec objects use the
//! 1-based relay labels of the usual notation (`"relay": 1` is the first
//! relay).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{
    BeamformingVector, ChannelState, EffectiveChannel, NetworkConfig, PowerLevel, PreparedVector,
};
use crate::{Error, Result};

/// Tolerance on `‖U U^H − I‖_max` accepted for unitary matrices.
pub const UNITARY_TOLERANCE: f64 = 1e-10;

/// Entrywise tolerance used when comparing codebooks up to global phase.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;

/// Number of step halvings in the local refinement after the magnitude grid.
const REFINEMENT_HALVINGS: usize = 10;

/// A non-empty list of beamforming vectors of equal length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteCodebookRepr", into = "FiniteCodebookRepr")]
pub struct FiniteCodebook {
    label: String,
    vectors: Vec<BeamformingVector>,
    admissible: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiniteCodebookRepr {
    #[serde(default)]
    label: String,
    vectors: Vec<BeamformingVector>,
}

impl TryFrom<FiniteCodebookRepr> for FiniteCodebook {
    type Error = Error;

    fn try_from(r: FiniteCodebookRepr) -> Result<Self> {
        FiniteCodebook::new(r.label, r.vectors)
    }
}

impl From<FiniteCodebook> for FiniteCodebookRepr {
    fn from(c: FiniteCodebook) -> Self {
        Self {
            label: c.label,
            vectors: c.vectors,
        }
    }
}

impl FiniteCodebook {
    pub fn new(label: impl Into<String>, vectors: Vec<BeamformingVector>) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyCodebook)?;
        let relays = first.len();
        if relays == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if let Some(bad) = vectors.iter().find(|v| v.len() != relays) {
            return Err(Error::DimensionMismatch {
                expected: relays,
                found: bad.len(),
            });
        }
        let admissible = vectors
            .iter()
            .all(|v| (v.max_gain() - 1.0).abs() <= EQUALITY_TOLERANCE);
        Ok(Self {
            label: label.into(),
            vectors,
            admissible,
        })
    }

    /// Builds a codebook from nonnegative real gain rows, e.g. `[[0, 1, 1]]`.
    pub fn from_gain_rows(label: impl Into<String>, rows: &[&[f64]]) -> Result<Self> {
        let vectors = rows
            .iter()
            .map(|row| BeamformingVector::from_gains(row.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(label, vectors)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn vectors(&self) -> &[BeamformingVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn relay_count(&self) -> usize {
        self.vectors[0].len()
    }

    /// Whether every vector had `‖x‖_∞ = 1` (to 1e-12) at construction.
    pub fn is_admissible(&self) -> bool {
        self.admissible
    }

    pub fn prepared(&self) -> Vec<PreparedVector> {
        self.vectors.iter().map(BeamformingVector::prepare).collect()
    }
}

/// The single-relay selection codebook `{e_r(θ_r)}`.
pub fn make_srs(relays: usize, theta: &[f64]) -> Result<FiniteCodebook> {
    if theta.len() != relays {
        return Err(Error::DimensionMismatch {
            expected: relays,
            found: theta.len(),
        });
    }
    let vectors = (0..relays)
        .map(|r| {
            let mut gains = vec![0.0; relays];
            let mut phases = vec![0.0; relays];
            gains[r] = 1.0;
            phases[r] = theta[r];
            BeamformingVector::from_polar(gains, phases)
        })
        .collect::<Result<Vec<_>>>()?;
    FiniteCodebook::new("srs", vectors)
}

/// A square complex matrix checked for unitarity on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    rows: Vec<Vec<Complex64>>,
}

impl UnitaryMatrix {
    pub fn new(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let deviation = unitarity_deviation(&rows);
        if n == 0 || !(deviation <= UNITARY_TOLERANCE) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    /// `diag(e^{jθ_r})`.
    pub fn diagonal_phases(theta: &[f64]) -> Self {
        let n = theta.len();
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            Complex64::from_polar(1.0, theta[i])
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.rows
    }

    /// Row vector times matrix, `x U`.
    pub fn left_multiply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|col| (0..n).map(|k| x[k] * self.rows[k][col]).sum())
            .collect()
    }
}

/// `max |(U U^H − I)_{ij}|`.
pub fn unitarity_deviation(rows: &[Vec<Complex64>]) -> f64 {
    let n = rows.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dot: Complex64 = (0..n).map(|k| rows[i][k] * rows[j][k].conj()).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (dot - target).norm();
            if dev.is_nan() {
                return f64::NAN;
            }
            worst = worst.max(dev);
        }
    }
    worst
}

/// `C · U = {x U : x ∈ C}`.
pub fn apply_unitary(cb: &FiniteCodebook, u: &UnitaryMatrix) -> Result<FiniteCodebook> {
    if u.dim() != cb.relay_count() {
        return Err(Error::DimensionMismatch {
            expected: cb.relay_count(),
            found: u.dim(),
        });
    }
    let vectors = cb
        .vectors()
        .iter()
        .map(|x| BeamformingVector::from_complex(&u.left_multiply(&x.to_complex())))
        .collect::<Result<Vec<_>>>()?;
    FiniteCodebook::new(format!("{}*U", cb.label()), vectors)
}

/// How `ε` is chosen for a constrained family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsilonRule {
    Fixed(f64),
    /// `ε = 1 / ln P`.
    InverseLogPower,
}

/// `C̃(ε, r) = {x : ‖x‖_∞ = 1, |x_r|² ≥ ε}`, or the whole of `X` when no
/// relay is pinned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstrainedCodebook {
    epsilon: EpsilonRule,
    pinned: Option<usize>,
}

impl ConstrainedCodebook {
    pub fn fixed(epsilon: f64, relay: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(Self {
            epsilon: EpsilonRule::Fixed(epsilon),
            pinned: Some(relay),
        })
    }

    pub fn full_csi() -> Self {
        Self {
            epsilon: EpsilonRule::Fixed(0.0),
            pinned: None,
        }
    }

    pub fn power_dependent(relay: usize) -> Self {
        Self {
            epsilon: EpsilonRule::InverseLogPower,
            pinned: Some(relay),
        }
    }

    pub fn epsilon_rule(&self) -> EpsilonRule {
        self.epsilon
    }

    pub fn pinned_relay(&self) -> Option<usize> {
        self.pinned
    }

    pub fn is_power_dependent(&self) -> bool {
        self.epsilon == EpsilonRule::InverseLogPower
    }

    pub fn resolve_epsilon(&self, power: PowerLevel) -> Result<f64> {
        match self.epsilon {
            EpsilonRule::Fixed(e) => Ok(e),
            EpsilonRule::InverseLogPower => {
                let eps = 1.0 / power.linear().ln();
                if !(eps > 0.0 && eps <= 1.0) {
                    return Err(Error::PowerTooLow(power.linear()));
                }
                Ok(eps)
            }
        }
    }

    fn check_relays(&self, relays: usize) -> Result<()> {
        match self.pinned {
            Some(index) if index >= relays => Err(Error::RelayIndex { index: index + 1, relays }),
            _ => Ok(()),
        }
    }
}

/// Per-relay lower bounds on `|x_q|` for a resolved constrained family.
fn lower_bounds(relays: usize, epsilon: f64, pinned: Option<usize>) -> Vec<f64> {
    let mut lower = vec![0.0; relays];
    if let Some(r) = pinned {
        lower[r] = epsilon.sqrt();
    }
    lower
}

/// Grid search for `max (Σ a_q m_q)² / (1 + Σ b_q m_q²)` over the box
/// `m_q ∈ [lower_q, 1]`, followed by coordinate refinement.
fn search_magnitudes(amplitude: &[f64], noise: &[f64], lower: &[f64], grid: usize) -> (Vec<f64>, f64) {
    let relays = amplitude.len();
    let spacing = 1.0 / (grid - 1) as f64;
    let axes: Vec<Vec<f64>> = lower
        .iter()
        .map(|&lo| {
            let mut axis = Vec::with_capacity(grid + 1);
            if lo > 0.0 {
                axis.push(lo);
            }
            axis.extend((0..grid).map(|k| k as f64 * spacing).filter(|&m| m > lo || (lo == 0.0 && m == 0.0)));
            axis
        })
        .collect();

    let mut best_value = f64::NEG_INFINITY;
    let mut best_index = vec![0usize; relays];
    let mut current = vec![0usize; relays];
    scan_grid(
        &axes,
        amplitude,
        noise,
        0,
        0.0,
        1.0,
        &mut current,
        &mut best_value,
        &mut best_index,
    );
    let mut m: Vec<f64> = best_index.iter().zip(&axes).map(|(&i, axis)| axis[i]).collect();

    let objective = |m: &[f64]| {
        let mut lin = 0.0;
        let mut den = 1.0;
        for q in 0..relays {
            lin += amplitude[q] * m[q];
            den += noise[q] * m[q] * m[q];
        }
        lin * lin / den
    };
    let mut value = objective(&m);
    let mut step = spacing;
    for _ in 0..REFINEMENT_HALVINGS {
        step *= 0.5;
        for q in 0..relays {
            for delta in [-step, step] {
                let old = m[q];
                let candidate = (old + delta).clamp(lower[q], 1.0);
                if candidate == old {
                    continue;
                }
                m[q] = candidate;
                let v = objective(&m);
                if v > value {
                    value = v;
                } else {
                    m[q] = old;
                }
            }
        }
    }
    (m, value)
}

#[allow(clippy::too_many_arguments)]
fn scan_grid(
    axes: &[Vec<f64>],
    amplitude: &[f64],
    noise: &[f64],
    depth: usize,
    lin: f64,
    den: f64,
    current: &mut [usize],
    best_value: &mut f64,
    best_index: &mut [usize],
) {
    let last = axes.len() - 1;
    if depth == last {
        let (a, b) = (amplitude[depth], noise[depth]);
        for (i, &m) in axes[depth].iter().enumerate() {
            let l = lin + a * m;
            let v = l * l / (den + b * m * m);
            if v > *best_value {
                *best_value = v;
                current[depth] = i;
                best_index.copy_from_slice(current);
            }
        }
        return;
    }
    for (i, &m) in axes[depth].iter().enumerate() {
        current[depth] = i;
        scan_grid(
            axes,
            amplitude,
            noise,
            depth + 1,
            lin + amplitude[depth] * m,
            den + noise[depth] * m * m,
            current,
            best_value,
            best_index,
        );
    }
}

/// Magnitude profile and SNR of the co-phased optimum over a resolved family.
fn constrained_optimum(
    channel: &EffectiveChannel,
    epsilon: f64,
    pinned: Option<usize>,
    grid: usize,
) -> (Vec<f64>, f64) {
    let scale = channel.source_power().sqrt();
    let amplitude: Vec<f64> = channel.coupling().iter().map(|c| scale * c.norm()).collect();
    let lower = lower_bounds(amplitude.len(), epsilon, pinned);
    search_magnitudes(&amplitude, channel.noise_gain(), &lower, grid)
}

fn cophased_vector(channel: &EffectiveChannel, gains: Vec<f64>) -> Result<BeamformingVector> {
    let phases = channel
        .coupling()
        .iter()
        .map(|c| if *c == Complex64::new(0.0, 0.0) { 0.0 } else { -c.arg() })
        .collect();
    BeamformingVector::from_polar(gains, phases)
}

/// Approximate SNR maximizer over `C̃(ε, r)` at `(h, P)`.
///
/// Phases are co-phased exactly (`arg x_q = −arg(f_q g_q)`); magnitudes come
/// from a `grid`-point-per-axis search with the pinned coordinate restricted
/// to `[√ε, 1]`, then a coordinate refinement that halves its step ten times.
pub fn constrained_best_vector(
    cb: &ConstrainedCodebook,
    h: &ChannelState,
    config: &NetworkConfig,
    power: PowerLevel,
    grid: usize,
) -> Result<(BeamformingVector, f64)> {
    if grid < 2 {
        return Err(Error::GridResolution(grid));
    }
    cb.check_relays(config.relay_count())?;
    let epsilon = cb.resolve_epsilon(power)?;
    let channel = EffectiveChannel::new(h, config, power);
    let (gains, _) = constrained_optimum(&channel, epsilon, cb.pinned, grid);
    let x = cophased_vector(&channel, gains)?;
    let snr = channel.snr(&x.prepare());
    Ok((x, snr))
}

/// Default magnitude-grid resolution for a network size.
pub fn default_grid_resolution(relays: usize) -> usize {
    match relays {
        0..=2 => 64,
        3 => 32,
        _ => 16,
    }
}

/// Serializable description of any codebook family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodebookSpec {
    Srs {
        theta: Vec<f64>,
    },
    Explicit {
        vectors: Vec<BeamformingVector>,
    },
    Unitary {
        base: Box<CodebookSpec>,
        #[serde(with = "crate::serde_complex::matrix")]
        matrix: Vec<Vec<Complex64>>,
    },
    /// `C̃(ε, relay)`, relay 1-based.
    Constrained {
        epsilon: f64,
        relay: usize,
    },
    FullCsi,
    /// `C̃(1 / ln P, relay)`, relay 1-based.
    PowerDepConstrained {
        relay: usize,
    },
}

fn relay_from_label(relay: usize, relays: usize) -> Result<usize> {
    if relay == 0 || relay > relays {
        return Err(Error::RelayIndex { index: relay, relays });
    }
    Ok(relay - 1)
}

impl CodebookSpec {
    /// The explicit vector list for power-independent finite families.
    pub fn finite(&self, relays: usize) -> Result<Option<FiniteCodebook>> {
        let cb = match self {
            CodebookSpec::Srs { theta } => make_srs(relays, theta)?,
            CodebookSpec::Explicit { vectors } => {
                let cb = FiniteCodebook::new("explicit", vectors.clone())?;
                if cb.relay_count() != relays {
                    return Err(Error::DimensionMismatch {
                        expected: relays,
                        found: cb.relay_count(),
                    });
                }
                cb
            }
            CodebookSpec::Unitary { base, matrix } => {
                let base = base.finite(relays)?.ok_or_else(|| {
                    Error::InvalidPlan("unitary transforms need a finite base codebook".into())
                })?;
                apply_unitary(&base, &UnitaryMatrix::new(matrix.clone())?)?
            }
            _ => return Ok(None),
        };
        Ok(Some(cb))
    }

    /// The continuous family for constrained specs, with the relay made 0-based.
    pub fn constrained(&self, relays: usize) -> Result<Option<ConstrainedCodebook>> {
        let cb = match *self {
            CodebookSpec::Constrained { epsilon, relay } => {
                ConstrainedCodebook::fixed(epsilon, relay_from_label(relay, relays)?)?
            }
            CodebookSpec::FullCsi => ConstrainedCodebook::full_csi(),
            CodebookSpec::PowerDepConstrained { relay } => {
                ConstrainedCodebook::power_dependent(relay_from_label(relay, relays)?)
            }
            _ => return Ok(None),
        };
        Ok(Some(cb))
    }

    pub fn is_power_dependent(&self) -> bool {
        matches!(self, CodebookSpec::PowerDepConstrained { .. })
    }

    /// Checks the spec against a network size without resolving `ε(P)`.
    pub fn validate(&self, relays: usize) -> Result<()> {
        if self.finite(relays)?.is_none() {
            self.constrained(relays)?;
        }
        Ok(())
    }

    /// Per-channel-state evaluator `D_P` at power `P`.
    pub fn resolve(&self, relays: usize, power: PowerLevel, grid: usize) -> Result<Evaluator> {
        if let Some(cb) = self.finite(relays)? {
            return Ok(Evaluator::finite(cb));
        }
        let cb = self
            .constrained(relays)?
            .expect("every spec is either finite or constrained");
        if grid < 2 {
            return Err(Error::GridResolution(grid));
        }
        Ok(Evaluator::Constrained {
            epsilon: cb.resolve_epsilon(power)?,
            pinned: cb.pinned,
            grid,
        })
    }
}

/// A codebook resolved at one power level, ready to pick vectors per channel.
#[derive(Clone, Debug)]
pub enum Evaluator {
    Finite {
        codebook: FiniteCodebook,
        prepared: Vec<PreparedVector>,
    },
    Constrained {
        epsilon: f64,
        pinned: Option<usize>,
        grid: usize,
    },
}

impl Evaluator {
    pub fn finite(codebook: FiniteCodebook) -> Self {
        let prepared = codebook.prepared();
        Evaluator::Finite { codebook, prepared }
    }

    /// SNR of the vector the optimal encoder would select.
    pub fn best_snr(&self, channel: &EffectiveChannel) -> f64 {
        match self {
            Evaluator::Finite { prepared, .. } => channel.best(prepared).1,
            Evaluator::Constrained {
                epsilon,
                pinned,
                grid,
            } => constrained_optimum(channel, *epsilon, *pinned, *grid).1,
        }
    }

    /// The selected vector and its SNR.
    pub fn choose(
        &self,
        h: &ChannelState,
        config: &NetworkConfig,
        power: PowerLevel,
    ) -> Result<(BeamformingVector, f64)> {
        let channel = EffectiveChannel::new(h, config, power);
        match self {
            Evaluator::Finite { codebook, prepared } => {
                let (i, snr) = channel.best(prepared);
                Ok((codebook.vectors()[i].clone(), snr))
            }
            Evaluator::Constrained {
                epsilon,
                pinned,
                grid,
            } => {
                let (gains, _) = constrained_optimum(&channel, *epsilon, *pinned, *grid);
                let x = cophased_vector(&channel, gains)?;
                let snr = channel.snr(&x.prepare());
                Ok((x, snr))
            }
        }
    }

    /// Resolved `ε` for constrained evaluators.
    pub fn epsilon(&self) -> Option<f64> {
        match self {
            Evaluator::Finite { .. } => None,
            Evaluator::Constrained { epsilon, .. } => Some(*epsilon),
        }
    }
}

/// Whether `y = e^{jθ} x` for some `θ`, entrywise within `tol`.
pub fn same_up_to_phase(x: &BeamformingVector, y: &BeamformingVector, tol: f64) -> bool {
    if x.len() != y.len() {
        return false;
    }
    let pivot = (0..x.len()).fold(0, |b, r| if x.gains()[r] > x.gains()[b] { r } else { b });
    if x.gains()[pivot] <= tol {
        return y.gains().iter().all(|&m| m <= tol);
    }
    let shift = Complex64::from_polar(1.0, y.phases()[pivot] - x.phases()[pivot]);
    (0..x.len()).all(|r| (y.entry(r) - x.entry(r) * shift).norm() <= tol)
}

/// Multiset equality of two codebooks, each vector compared up to global phase.
pub fn same_codebook_up_to_phase(a: &FiniteCodebook, b: &FiniteCodebook, tol: f64) -> bool {
    if a.len() != b.len() || a.relay_count() != b.relay_count() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.vectors().iter().all(|x| {
        let hit = b
            .vectors()
            .iter()
            .enumerate()
            .position(|(j, y)| !used[j] && same_up_to_phase(x, y, tol));
        match hit {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        }
    })
}

/// Drops vectors that repeat an earlier one up to global phase.
pub fn dedup_phase_classes(vectors: &[BeamformingVector], tol: f64) -> Vec<BeamformingVector> {
    let mut out: Vec<BeamformingVector> = Vec::with_capacity(vectors.len());
    for x in vectors {
        if !out.iter().any(|y| same_up_to_phase(y, x, tol)) {
            out.push(x.clone());
        }
    }
    out
}

/// The 3×3 unitary `U₁` of the MISO comparison example.
pub fn example_unitary_u1() -> UnitaryMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = Complex64::new;
    UnitaryMatrix::new(vec![
        vec![c(s, 0.0), c(s, 0.0), c(0.0, 0.0)],
        vec![c(0.0, -s), c(0.0, s), c(0.0, 0.0)],
        vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
    ])
    .expect("U1 is unitary")
}

/// The 3×3 unitary `U₂` of the MISO comparison example.
pub fn example_unitary_u2() -> UnitaryMatrix {
    let r2 = std::f64::consts::SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re / 4.0, im / 4.0);
    UnitaryMatrix::new(vec![
        vec![c(1.0, 1.0), c(1.0, -3.0), c(-r2, r2)],
        vec![c(-3.0, -1.0), c(1.0, -1.0), c(r2, r2)],
        vec![c(r2, r2), c(r2, r2), c(2.0, 2.0)],
    ])
    .expect("U2 is unitary")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{received_snr, sample_channel};
    use crate::rng::{RandomStream, StreamFamily};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

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

    #[test]
    fn srs_with_zero_phases() {
        let srs = make_srs(3, &[0.0; 3]).unwrap();
        let expected = FiniteCodebook::from_gain_rows(
            "paper",
            &[&[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0]],
        )
        .unwrap();
        assert!(same_codebook_up_to_phase(&srs, &expected, EQUALITY_TOLERANCE));
        assert!(srs.is_admissible());
    }

    #[test]
    fn srs_with_explicit_phases() {
        let theta = [FRAC_PI_4, FRAC_PI_2, 2.0 * PI / 3.0];
        let srs = make_srs(3, &theta).unwrap();
        let z = c(0.0, 0.0);
        let rows = [
            vec![Complex64::from_polar(1.0, FRAC_PI_4), z, z],
            vec![z, c(0.0, 1.0), z],
            vec![z, z, Complex64::from_polar(1.0, 2.0 * PI / 3.0)],
        ];
        for (x, row) in srs.vectors().iter().zip(&rows) {
            for (a, b) in x.to_complex().iter().zip(row) {
                assert!((a - b).norm() <= 1e-15);
            }
        }
        assert!(make_srs(3, &[0.0; 2]).is_err());
    }

    #[test]
    fn identity_transform_is_a_no_op() {
        let cb = FiniteCodebook::from_gain_rows("c3", &[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0]]).unwrap();
        let out = apply_unitary(&cb, &UnitaryMatrix::identity(3)).unwrap();
        assert!(same_codebook_up_to_phase(&cb, &out, EQUALITY_TOLERANCE));
    }

    #[test]
    fn srs_times_u1_gives_rows_of_u1() {
        let u1 = example_unitary_u1();
        let out = apply_unitary(&make_srs(3, &[0.0; 3]).unwrap(), &u1).unwrap();
        let rows = FiniteCodebook::new(
            "rows",
            u1.rows()
                .iter()
                .map(|r| BeamformingVector::from_complex(r).unwrap())
                .collect(),
        )
        .unwrap();
        assert!(same_codebook_up_to_phase(&out, &rows, EQUALITY_TOLERANCE));
        assert!(unitarity_deviation(example_unitary_u2().rows()) <= UNITARY_TOLERANCE);
    }

    #[test]
    fn non_unitary_matrix_reports_deviation() {
        let err = UnitaryMatrix::new(vec![vec![c(1.0, 0.0), c(0.1, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]])
            .unwrap_err();
        match err {
            Error::NotUnitary { deviation } => assert!((deviation - 0.1).abs() < 1e-12),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unitary_transform_preserves_norms() {
        let u2 = example_unitary_u2();
        let family = StreamFamily::new(3);
        for t in 0..200 {
            let mut rng = family.at(0, t);
            let x: Vec<_> = (0..3)
                .map(|_| Complex64::from_polar(rng.uniform() / 2.0, rng.phase()))
                .collect();
            let y = u2.left_multiply(&x);
            let nx: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((nx - ny).abs() <= 1e-10);
        }
    }

    #[test]
    fn diagonal_unitary_maps_srs_to_srs() {
        let theta = [0.3, -1.2, 2.5];
        let out = apply_unitary(&make_srs(3, &[0.0; 3]).unwrap(), &UnitaryMatrix::diagonal_phases(&theta)).unwrap();
        let srs = make_srs(3, &theta).unwrap();
        assert!(same_codebook_up_to_phase(&out, &srs, 1e-12));
    }

    #[test]
    fn pinned_unit_epsilon_single_relay_is_cophased() {
        let cfg = NetworkConfig::unity(1).unwrap();
        let h = ChannelState::new(vec![c(0.3, -0.8)], vec![c(-1.1, 0.4)]).unwrap();
        let p = PowerLevel::from_db(12.0).unwrap();
        let cb = ConstrainedCodebook::fixed(1.0, 0).unwrap();
        let (x, snr) = constrained_best_vector(&cb, &h, &cfg, p, 8).unwrap();
        assert_eq!(x.gains(), &[1.0]);
        let expected_phase = -(h.f()[0] * h.g()[0]).arg();
        assert!((x.phases()[0] - expected_phase).abs() <= 1e-15);
        assert!((snr - received_snr(&x, &h, &cfg, p)).abs() <= 1e-12 * snr);
    }

    #[test]
    fn constrained_optimum_beats_random_feasible_points() {
        let cfg = fig2_network();
        let family = StreamFamily::new(11);
        for (case, (eps, relay)) in [(0.25, 0usize), (1.0 / 16.0, 2), (0.0, 1), (1.0, 1)].into_iter().enumerate() {
            let cb = ConstrainedCodebook::fixed(eps, relay).unwrap();
            for t in 0..4 {
                let mut rng = family.at(case as u64, t);
                let h = sample_channel(&cfg, &mut rng);
                let p = PowerLevel::from_db(40.0 * rng.uniform() - 5.0).unwrap();
                let (_, best) = constrained_best_vector(&cb, &h, &cfg, p, 32).unwrap();
                let lo = eps.sqrt();
                for _ in 0..10_000 {
                    let mut gains: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
                    gains[relay] = lo + (1.0 - lo) * rng.uniform();
                    let phases = (0..3).map(|_| rng.phase()).collect();
                    let x = BeamformingVector::from_polar(gains, phases).unwrap();
                    assert!(best >= received_snr(&x, &h, &cfg, p) * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn full_csi_dominates_srs_vectors() {
        let cfg = NetworkConfig::unity(2).unwrap();
        let srs = make_srs(2, &[0.0, 0.0]).unwrap();
        for t in 0..50 {
            let h = sample_channel(&cfg, &mut RandomStream::new(4, 0, t));
            let p = PowerLevel::from_db(15.0).unwrap();
            let (_, best) =
                constrained_best_vector(&ConstrainedCodebook::full_csi(), &h, &cfg, p, 64).unwrap();
            for x in srs.vectors() {
                assert!(best >= received_snr(x, &h, &cfg, p));
            }
        }
    }

    #[test]
    fn looser_constraint_never_loses() {
        // grid of 5 points contains both sqrt(1/4) and sqrt(1/16)
        let cfg = NetworkConfig::unity(3).unwrap();
        let family = StreamFamily::new(21);
        for t in 0..300 {
            let mut rng = family.at(0, t);
            let h = sample_channel(&cfg, &mut rng);
            let p = PowerLevel::from_db(30.0 * rng.uniform()).unwrap();
            let snr = |eps: f64| {
                constrained_best_vector(&ConstrainedCodebook::fixed(eps, 1).unwrap(), &h, &cfg, p, 5)
                    .unwrap()
                    .1
            };
            let (s1, s4, s16, s0) = (snr(1.0), snr(0.25), snr(1.0 / 16.0), snr(0.0));
            assert!(s4 >= s1 * (1.0 - 1e-6), "{s4} < {s1}");
            assert!(s16 >= s4 * (1.0 - 1e-6), "{s16} < {s4}");
            assert!(s0 >= s16 * (1.0 - 1e-6), "{s0} < {s16}");
        }
    }

    #[test]
    fn cophasing_dominates_random_phases() {
        let cfg = fig2_network();
        let family = StreamFamily::new(5);
        for t in 0..100 {
            let mut rng = family.at(0, t);
            let h = sample_channel(&cfg, &mut rng);
            let p = PowerLevel::from_db(20.0).unwrap();
            let channel = EffectiveChannel::new(&h, &cfg, p);
            let gains: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
            let cophased = cophased_vector(&channel, gains.clone()).unwrap();
            let best = received_snr(&cophased, &h, &cfg, p);
            for _ in 0..100 {
                let phases = (0..3).map(|_| rng.phase()).collect();
                let x = BeamformingVector::from_polar(gains.clone(), phases).unwrap();
                assert!(best >= received_snr(&x, &h, &cfg, p) * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn power_dependent_epsilon() {
        let cb = CodebookSpec::PowerDepConstrained { relay: 1 };
        let p = PowerLevel::new(std::f64::consts::E.powi(2)).unwrap();
        let ev = cb.resolve(2, p, 8).unwrap();
        assert!((ev.epsilon().unwrap() - 0.5).abs() < 1e-15);
        let low = PowerLevel::new(2.0).unwrap();
        assert!(matches!(cb.resolve(2, low, 8), Err(Error::PowerTooLow(_))));
    }

    #[test]
    fn srs_spec_is_power_independent() {
        let spec = CodebookSpec::Srs { theta: vec![0.1, 0.2, 0.3] };
        let a = spec.resolve(3, PowerLevel::from_db(0.0).unwrap(), 8).unwrap();
        let b = spec.resolve(3, PowerLevel::from_db(40.0).unwrap(), 8).unwrap();
        match (a, b) {
            (Evaluator::Finite { codebook: a, .. }, Evaluator::Finite { codebook: b, .. }) => {
                assert_eq!(a, b)
            }
            _ => panic!("srs must resolve to a finite evaluator"),
        }
    }

    #[test]
    fn explicit_evaluator_matches_brute_force() {
        let cfg = fig2_network();
        let c3 = FiniteCodebook::from_gain_rows(
            "c3",
            &[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]],
        )
        .unwrap();
        let spec = CodebookSpec::Explicit { vectors: c3.vectors().to_vec() };
        let p = PowerLevel::from_db(17.0).unwrap();
        let ev = spec.resolve(3, p, 8).unwrap();
        for t in 0..500 {
            let h = sample_channel(&cfg, &mut RandomStream::new(6, 0, t));
            let (x, snr) = ev.choose(&h, &cfg, p).unwrap();
            let brute = c3
                .vectors()
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
                    let s = received_snr(v, &h, &cfg, p);
                    if s > best.1 { (i, s) } else { best }
                });
            assert_eq!(&x, &c3.vectors()[brute.0]);
            assert_eq!(snr, brute.1);
        }
    }

    #[test]
    fn spec_json_round_trip_and_relay_labels() {
        let json = r#"[
            {"type": "srs", "theta": [0, 0, 0]},
            {"type": "explicit", "vectors": [[[0, 0], [1, 0], [1, 0]]]},
            {"type": "unitary", "base": {"type": "srs", "theta": [0, 0]},
             "matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]]},
            {"type": "constrained", "epsilon": 0.25, "relay": 2},
            {"type": "full_csi"},
            {"type": "power_dep_constrained", "relay": 1}
        ]"#;
        let specs: Vec<CodebookSpec> = serde_json::from_str(json).unwrap();
        let again: Vec<CodebookSpec> =
            serde_json::from_str(&serde_json::to_string(&specs).unwrap()).unwrap();
        assert_eq!(specs, again);
        let cb = specs[3].constrained(3).unwrap().unwrap();
        assert_eq!(cb.pinned_relay(), Some(1));
        assert!(specs[3].constrained(1).is_err());
        let bad = serde_json::from_str::<CodebookSpec>(r#"{"type": "grassmannian"}"#).unwrap_err();
        assert!(bad.to_string().contains("grassmannian"));
    }

    #[test]
    fn dedup_and_phase_equality() {
        let x = BeamformingVector::from_gains(vec![1.0, 0.5, 0.0]).unwrap();
        let y = x.rotated(1.3);
        assert!(same_up_to_phase(&x, &y, 1e-12));
        let z = BeamformingVector::from_polar(vec![1.0, 0.5, 0.0], vec![0.0, 0.4, 0.0]).unwrap();
        assert!(!same_up_to_phase(&x, &z, 1e-12));
        assert_eq!(dedup_phase_classes(&[x.clone(), y, z.clone()], 1e-12), vec![x, z]);
    }
}
