use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AlignError;

pub const BUNDLED_TAXONOMY: &str = include_str!("../../resources/taxonomy.toml");
pub const BUNDLED_EMERGENT_OVERLAY: &str = include_str!("../../resources/taxonomy_emergent.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrincipleSource {
    Known,
    Emergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EthicsPrinciple {
    pub id: String,
    pub label: String,
    /// The text that gets embedded.
    pub definition: String,
    pub source: PrincipleSource,
    #[serde(default)]
    pub framework_refs: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    #[serde(default)]
    principle: Vec<EthicsPrinciple>,
}

fn valid_slug(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
}

pub(crate) fn validate_principle(p: &EthicsPrinciple) -> Result<(), AlignError> {
    if !valid_slug(&p.id) {
        return Err(AlignError::Schema(format!(
            "principle id {:?} must be a lowercase slug",
            p.id
        )));
    }
    if p.definition.trim().is_empty() {
        return Err(AlignError::Schema(format!("principle {} has an empty definition", p.id)));
    }
    if p.label.trim().is_empty() {
        return Err(AlignError::Schema(format!("principle {} has an empty label", p.id)));
    }
    Ok(())
}

/// Parses a TOML taxonomy: one `[[principle]]` table per entry.
pub fn parse_taxonomy(text: &str) -> Result<Vec<EthicsPrinciple>, AlignError> {
    let file: TaxonomyFile = toml::from_str(text).map_err(|e| AlignError::Schema(e.message().to_string()))?;
    if file.principle.is_empty() {
        return Err(AlignError::Schema("taxonomy has no principles".into()));
    }
    let mut seen = HashSet::new();
    for p in &file.principle {
        validate_principle(p)?;
        if !seen.insert(p.id.clone()) {
            return Err(AlignError::DuplicateId(p.id.clone()));
        }
    }
    Ok(file.principle)
}

pub fn load_taxonomy(path: &Path) -> Result<Vec<EthicsPrinciple>, AlignError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => AlignError::FileNotFound(path.display().to_string()),
        _ => AlignError::Io(e),
    })?;
    parse_taxonomy(&text)
}

/// The eleven known principles.
pub fn default_taxonomy() -> Vec<EthicsPrinciple> {
    parse_taxonomy(BUNDLED_TAXONOMY).expect("bundled taxonomy is valid")
}

/// The eleven emergent concerns, for use as an overlay.
pub fn emergent_overlay() -> Vec<EthicsPrinciple> {
    parse_taxonomy(BUNDLED_EMERGENT_OVERLAY).expect("bundled overlay is valid")
}

/// Appends `overlay` to `base`, rejecting ids present in both.
pub fn with_overlay(
    mut base: Vec<EthicsPrinciple>,
    overlay: Vec<EthicsPrinciple>,
) -> Result<Vec<EthicsPrinciple>, AlignError> {
    let ids: HashSet<String> = base.iter().map(|p| p.id.clone()).collect();
    for p in overlay {
        if ids.contains(&p.id) {
            return Err(AlignError::DuplicateId(p.id));
        }
        base.push(p);
    }
    Ok(base)
}
