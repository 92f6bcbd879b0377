//! Exact combinatorial analysis of finite codebooks.
//!
//! Relay sets are bitmasks over 0-based relay indices; they serialize and
//! display as ascending 1-based lists, e.g. `[1, 3]`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codebook::{
    dedup_phase_classes, CodebookSpec, Evaluator, FiniteCodebook, EQUALITY_TOLERANCE,
};
use crate::model::{sample_channel, BeamformingVector, NetworkConfig, PowerLevel};
use crate::rng::StreamFamily;
use crate::{Error, Result};

/// Default threshold below which an entry magnitude counts as zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// Largest relay count accepted by the exhaustive subset enumeration.
pub const MAX_ENUMERATED_RELAYS: usize = 20;

/// A non-empty subset of relays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelaySet(u32);

impl RelaySet {
    pub fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    /// From 0-based relay indices.
    pub fn from_indices(indices: &[usize]) -> Self {
        Self(indices.iter().fold(0, |acc, &r| acc | (1 << r)))
    }

    /// From 1-based relay labels.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut bits = 0u32;
        for &l in labels {
            if l == 0 || l > MAX_ENUMERATED_RELAYS {
                return Err(Error::RelayIndex {
                    index: l,
                    relays: MAX_ENUMERATED_RELAYS,
                });
            }
            bits |= 1 << (l - 1);
        }
        Ok(Self(bits))
    }

    pub fn full(relays: usize) -> Self {
        Self(((1u64 << relays) - 1) as u32)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, r: usize) -> bool {
        self.0 >> r & 1 == 1
    }

    pub fn is_subset_of(self, other: RelaySet) -> bool {
        self.0 & !other.0 == 0
    }

    /// 0-based indices in ascending order.
    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|&r| self.contains(r)).collect()
    }

    /// 1-based labels in ascending order.
    pub fn labels(self) -> Vec<usize> {
        self.indices().into_iter().map(|r| r + 1).collect()
    }
}

impl fmt::Display for RelaySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.labels().iter().map(usize::to_string).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

impl Serialize for RelaySet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RelaySet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(deserializer)?;
        RelaySet::from_labels(&labels).map_err(serde::de::Error::custom)
    }
}

/// `ℛ(C)`: every relay set that meets the support of every codebook vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexSetCollection {
    pub relays: usize,
    /// Ordered by cardinality, then lexicographically on the 1-based labels.
    pub sets: Vec<RelaySet>,
}

impl IndexSetCollection {
    pub fn contains(&self, set: RelaySet) -> bool {
        self.sets.contains(&set)
    }

    /// Smallest member; ties go to the first in the canonical order.
    pub fn min_set(&self) -> Option<RelaySet> {
        self.sets.first().copied()
    }
}

fn support(x: &BeamformingVector, zero_tol: f64) -> u32 {
    x.gains()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > zero_tol)
        .fold(0, |acc, (r, _)| acc | (1 << r))
}

fn canonical_order(sets: &mut [RelaySet]) {
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.labels().cmp(&b.labels())));
}

pub fn index_set_collection(cb: &FiniteCodebook, zero_tol: f64) -> Result<IndexSetCollection> {
    let relays = cb.relay_count();
    if relays > MAX_ENUMERATED_RELAYS {
        return Err(Error::TooManyRelays(relays));
    }
    let supports: Vec<u32> = cb.vectors().iter().map(|x| support(x, zero_tol)).collect();
    let mut sets: Vec<RelaySet> = (1u32..(1 << relays))
        .filter(|&s| supports.iter().all(|&sup| sup & s != 0))
        .map(RelaySet)
        .collect();
    canonical_order(&mut sets);
    Ok(IndexSetCollection { relays, sets })
}

/// `ξ(C, ℛ) = min_{x∈C} max_{r∈ℛ} |x_r|²`.
pub fn xi(cb: &FiniteCodebook, rset: RelaySet) -> f64 {
    xi_vectors(cb.vectors(), rset)
}

fn xi_vectors(vectors: &[BeamformingVector], rset: RelaySet) -> f64 {
    vectors
        .iter()
        .map(|x| {
            rset.indices()
                .into_iter()
                .filter(|&r| r < x.len())
                .map(|r| x.gains()[r] * x.gains()[r])
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Which upper bound on the diversity order is the tighter one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingBound {
    /// `min{|ℛ| : ℛ ∈ ℛ(C)}`.
    IndexSet,
    /// `min{R, |C|}` with phase duplicates merged.
    Cardinality,
    /// Both bounds coincide.
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityCap {
    pub cap: usize,
    pub witness: RelaySet,
    pub index_set_cap: usize,
    pub cardinality_cap: usize,
    pub binding: BindingBound,
}

pub fn diversity_cap(cb: &FiniteCodebook) -> Result<DiversityCap> {
    diversity_cap_with(cb, ZERO_TOLERANCE)
}

pub fn diversity_cap_with(cb: &FiniteCodebook, zero_tol: f64) -> Result<DiversityCap> {
    if cb.vectors().iter().any(|x| support(x, zero_tol) == 0) {
        return Err(Error::ZeroVector);
    }
    let collection = index_set_collection(cb, zero_tol)?;
    let witness = collection
        .min_set()
        .expect("the full relay set meets every non-zero vector");
    let index_set_cap = witness.len();
    let distinct = dedup_phase_classes(cb.vectors(), EQUALITY_TOLERANCE).len();
    let cardinality_cap = cb.relay_count().min(distinct);
    let binding = match index_set_cap.cmp(&cardinality_cap) {
        std::cmp::Ordering::Less => BindingBound::IndexSet,
        std::cmp::Ordering::Greater => BindingBound::Cardinality,
        std::cmp::Ordering::Equal => BindingBound::Both,
    };
    Ok(DiversityCap {
        cap: index_set_cap.min(cardinality_cap),
        witness,
        index_set_cap,
        cardinality_cap,
        binding,
    })
}

fn overlap(x: &BeamformingVector, y: &BeamformingVector) -> f64 {
    x.gains().iter().zip(y.gains()).map(|(a, b)| a * b).sum()
}

/// Orthogonal multiple-relay selection: a singleton, or pairwise
/// `Σ_r |x_r||y_r| ≤ tol` between distinct phase classes.
pub fn omrs_check(cb: &FiniteCodebook, tol: f64) -> bool {
    let classes = dedup_phase_classes(cb.vectors(), EQUALITY_TOLERANCE);
    classes.len() == 1
        || classes
            .iter()
            .enumerate()
            .all(|(i, x)| classes[i + 1..].iter().all(|y| overlap(x, y) <= tol))
}

/// Single-relay selection: `R` pairwise-distinct vectors, each with one unit
/// entry and zeros elsewhere, with disjoint supports.
pub fn srs_check(cb: &FiniteCodebook, tol: f64) -> bool {
    let relays = cb.relay_count();
    if cb.len() != relays || dedup_phase_classes(cb.vectors(), EQUALITY_TOLERANCE).len() != relays {
        return false;
    }
    let one_hot = cb.vectors().iter().all(|x| {
        let units = x.gains().iter().filter(|&&m| (m - 1.0).abs() <= tol).count();
        let zeros = x.gains().iter().filter(|&&m| m <= tol).count();
        units == 1 && zeros == relays - 1
    });
    one_hot && omrs_check(cb, tol)
}

/// Every vector has `‖x‖_∞` within `tol` of 1.
pub fn prop2_admissible(cb: &FiniteCodebook, tol: f64) -> bool {
    cb.vectors().iter().all(|x| (x.max_gain() - 1.0).abs() <= tol)
}

/// `max_{x≠y} Σ_r |x_r||y_r|` over pairs of codebook positions.
pub fn overlap_statistic(cb: &FiniteCodebook) -> Result<f64> {
    overlap_vectors(cb.vectors())
}

fn overlap_vectors(vectors: &[BeamformingVector]) -> Result<f64> {
    if vectors.len() < 2 {
        return Err(Error::TooFewVectors);
    }
    let mut worst: f64 = 0.0;
    for (i, x) in vectors.iter().enumerate() {
        for y in &vectors[i + 1..] {
            worst = worst.max(overlap(x, y));
        }
    }
    Ok(worst)
}

/// Whether some `R`-element sub-codebook is a single-relay selection codebook.
pub fn contains_srs(cb: &FiniteCodebook, tol: f64) -> bool {
    let relays = cb.relay_count();
    (0..relays).all(|q| {
        cb.vectors().iter().any(|x| {
            x.gains()
                .iter()
                .enumerate()
                .all(|(r, &m)| if r == q { (m - 1.0).abs() <= tol } else { m <= tol })
        })
    })
}

/// Everything `analyze` reports about a finite codebook.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub label: String,
    pub relays: usize,
    pub size: usize,
    pub diversity_cap: usize,
    pub min_witness_set: RelaySet,
    pub index_set_cap: usize,
    pub cardinality_cap: usize,
    pub binding_bound: BindingBound,
    pub index_sets: Vec<RelaySet>,
    /// Keyed by the set in `{1,3}` notation.
    pub xi_values: BTreeMap<String, f64>,
    pub is_omrs: bool,
    pub is_srs: bool,
    pub prop2_admissible: bool,
    /// Zero for single-vector codebooks.
    pub max_pairwise_overlap: f64,
}

/// Relay counts up to this size get `ξ` for every non-empty subset.
const XI_EXHAUSTIVE_RELAYS: usize = 6;

pub fn structural_report(cb: &FiniteCodebook) -> Result<StructuralReport> {
    let cap = diversity_cap(cb)?;
    let collection = index_set_collection(cb, ZERO_TOLERANCE)?;
    let relays = cb.relay_count();
    let queried: Vec<RelaySet> = if relays <= XI_EXHAUSTIVE_RELAYS {
        let mut all: Vec<RelaySet> = (1u32..(1 << relays)).map(RelaySet).collect();
        canonical_order(&mut all);
        all
    } else {
        vec![cap.witness, RelaySet::full(relays)]
    };
    let xi_values = queried.into_iter().map(|s| (s.to_string(), xi(cb, s))).collect();
    Ok(StructuralReport {
        label: cb.label().to_string(),
        relays,
        size: cb.len(),
        diversity_cap: cap.cap,
        min_witness_set: cap.witness,
        index_set_cap: cap.index_set_cap,
        cardinality_cap: cap.cardinality_cap,
        binding_bound: cap.binding,
        index_sets: collection.sets,
        xi_values,
        is_omrs: omrs_check(cb, ZERO_TOLERANCE),
        is_srs: srs_check(cb, ZERO_TOLERANCE),
        prop2_admissible: prop2_admissible(cb, ZERO_TOLERANCE),
        max_pairwise_overlap: if cb.len() < 2 { 0.0 } else { overlap_statistic(cb)? },
    })
}

/// One row of the finite-P decay table for power-dependent codebooks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub power: f64,
    pub overlap: f64,
    /// `max_q ξ(D_P, [R] \ {q})`: how far the best vector for each relay
    /// leaks onto the other relays.
    pub off_support_max: f64,
}

fn off_support_max(vectors: &[BeamformingVector], relays: usize) -> f64 {
    let full = RelaySet::full(relays);
    (0..relays)
        .map(|q| xi_vectors(vectors, RelaySet(full.0 & !(1 << q))))
        .fold(0.0, f64::max)
}

/// Decay statistics for an explicit sequence of codebooks `D_P`.
pub fn convergence_diagnostic<F>(powers: &[f64], mut codebook_at: F) -> Result<Vec<ConvergenceRow>>
where
    F: FnMut(f64) -> Result<FiniteCodebook>,
{
    powers
        .iter()
        .map(|&p| {
            let cb = codebook_at(p)?;
            Ok(ConvergenceRow {
                power: p,
                overlap: overlap_statistic(&cb)?,
                off_support_max: if cb.relay_count() < 2 {
                    0.0
                } else {
                    off_support_max(cb.vectors(), cb.relay_count())
                },
            })
        })
        .collect()
}

/// Sampling settings used when a continuous family has to be reduced to a
/// finite codebook of optimizer outputs.
#[derive(Clone, Debug)]
pub struct SamplingOptions {
    pub network: NetworkConfig,
    pub samples: usize,
    pub seed: u64,
    pub grid_resolution: usize,
}

/// Decay statistics for a codebook spec.
///
/// Finite specs are analyzed directly. Constrained families contribute the
/// overlap of optimizer outputs over `samples` channel draws, and their
/// constraint level `ε(P)` as the off-support value (zero without a pinned
/// relay).
pub fn convergence_diagnostic_spec(
    spec: &CodebookSpec,
    powers: &[f64],
    options: &SamplingOptions,
) -> Result<Vec<ConvergenceRow>> {
    let relays = options.network.relay_count();
    let family = StreamFamily::new(options.seed);
    powers
        .iter()
        .enumerate()
        .map(|(point, &p)| {
            let power = PowerLevel::new(p)?;
            let evaluator = spec.resolve(relays, power, options.grid_resolution)?;
            match &evaluator {
                Evaluator::Finite { codebook, .. } => Ok(ConvergenceRow {
                    power: p,
                    overlap: overlap_statistic(codebook)?,
                    off_support_max: off_support_max(codebook.vectors(), relays),
                }),
                Evaluator::Constrained { epsilon, pinned, .. } => {
                    let vectors = (0..options.samples as u64)
                        .into_par_iter()
                        .map(|t| {
                            let mut rng = family.at(point as u64, t);
                            let h = sample_channel(&options.network, &mut rng);
                            evaluator.choose(&h, &options.network, power).map(|(x, _)| x)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(ConvergenceRow {
                        power: p,
                        overlap: overlap_vectors(&vectors)?,
                        off_support_max: if pinned.is_some() { *epsilon } else { 0.0 },
                    })
                }
            }
        })
        .collect()
}

/// Least-squares `c` in `value ≈ c / ln P`, with the fit's worst relative
/// residual.
pub fn fit_log_decay(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::InvalidCurve("no points to fit".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(p, v) in points {
        if !(p > 1.0) {
            return Err(Error::InvalidPower(p));
        }
        let u = 1.0 / p.ln();
        num += u * v;
        den += u * u;
    }
    let c = num / den;
    let residual = points
        .iter()
        .map(|&(p, v)| {
            let fit = c / p.ln();
            if fit == 0.0 {
                v.abs()
            } else {
                ((v - fit) / fit).abs()
            }
        })
        .fold(0.0, f64::max);
    Ok((c, residual))
}
