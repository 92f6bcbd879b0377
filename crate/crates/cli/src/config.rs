use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use relayquant::codebook::{CodebookSpec, FiniteCodebook};
use relayquant::model::{BeamformingVector, NetworkConfig};
use relayquant::montecarlo::{validate_grid, SimulationPlan};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledCodebook {
    pub label: String,
    pub spec: CodebookSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub codebooks: Vec<LabeledCodebook>,
    pub p_grid_db: Vec<f64>,
    pub trials_per_point: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

/// What `simulate` writes next to the CSVs; it can be fed back in as a config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub created_unix: u64,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

fn label_is_safe(label: &str) -> bool {
    !label.is_empty()
        && !label.starts_with('.')
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.codebooks.is_empty() {
            bail!("config lists no codebooks");
        }
        let mut seen = HashSet::new();
        for cb in &self.codebooks {
            if !label_is_safe(&cb.label) {
                bail!("codebook label {:?} must be non-empty and use only [A-Za-z0-9_.-]", cb.label);
            }
            if !seen.insert(cb.label.as_str()) {
                bail!("duplicate codebook label {:?}", cb.label);
            }
        }
        validate_grid(&self.p_grid_db)?;
        for plan in self.plans() {
            plan.validate()
                .with_context(|| format!("codebook {:?}", self.label_of(&plan)))?;
        }
        Ok(())
    }

    fn label_of(&self, plan: &SimulationPlan) -> &str {
        self.codebooks
            .iter()
            .find(|c| c.spec == plan.codebook)
            .map(|c| c.label.as_str())
            .unwrap_or("?")
    }

    pub fn plans(&self) -> Vec<SimulationPlan> {
        self.codebooks
            .iter()
            .map(|cb| SimulationPlan {
                network: self.network.clone(),
                codebook: cb.spec.clone(),
                p_grid_db: self.p_grid_db.clone(),
                trials_per_point: self.trials_per_point,
                seed: self.seed,
                grid_resolution: self.grid_resolution,
            })
            .collect()
    }
}

/// Deserializes with the failing field path and line/column in the message.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("at `{}`: {}", path, e.into_inner())
    })
}

/// Accepts a bare config or a manifest written by an earlier run.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text).context("config is not valid JSON")?;
    let config = if value.get("config").is_some() && value.get("network").is_none() {
        parse_json::<Manifest>(text)?.config
    } else {
        parse_json::<ExperimentConfig>(text)?
    };
    config.validate()?;
    Ok(config)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabeledVectors {
    #[serde(default)]
    label: Option<String>,
    vectors: Vec<BeamformingVector>,
}

/// Relay count implied by a finite codebook spec, when it has one.
fn relay_hint(spec: &CodebookSpec) -> Option<usize> {
    match spec {
        CodebookSpec::Srs { theta } => Some(theta.len()),
        CodebookSpec::Explicit { vectors } => vectors.first().map(|v| v.len()),
        CodebookSpec::Unitary { matrix, .. } => Some(matrix.len()),
        _ => None,
    }
}

/// Reads a codebook for `analyze`: `{"label", "vectors"}`, a bare list of
/// vectors, or a finite codebook spec with a `"type"` tag.
pub fn parse_codebook(text: &str, fallback_label: &str) -> Result<FiniteCodebook> {
    let value: serde_json::Value = serde_json::from_str(text).context("codebook is not valid JSON")?;
    if value.is_array() {
        let vectors: Vec<BeamformingVector> = parse_json(text)?;
        return Ok(FiniteCodebook::new(fallback_label, vectors)?);
    }
    if value.get("type").is_some() {
        let spec: CodebookSpec = parse_json(text)?;
        let relays = relay_hint(&spec)
            .with_context(|| "analyze needs a finite codebook (srs, explicit or unitary)")?;
        let cb = spec
            .finite(relays)?
            .with_context(|| "analyze needs a finite codebook (srs, explicit or unitary)")?;
        return Ok(cb.with_label(fallback_label));
    }
    let lv: LabeledVectors = parse_json(text)?;
    let label = lv.label.unwrap_or_else(|| fallback_label.to_string());
    Ok(FiniteCodebook::new(label, lv.vectors)?)
}
