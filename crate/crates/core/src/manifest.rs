//! Suite manifest: what was generated, from what, with which seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::editor::EditSpec;
use crate::error::{Error, Result};
use crate::grid::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub source: String,
    pub mask: String,
    pub label: usize,
    pub seed: u64,
    pub variants: Vec<VariantRecord>,
    /// Why the entry has no variants, when it failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantRecord {
    pub name: String,
    pub spec: EditSpec,
    pub output: String,
    /// Hex SHA-256 of the output file.
    pub sha256: String,
}

impl SuiteManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Resolves a manifest path against the manifest's directory.
pub fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

const DRAFT: &str = "https://json-schema.org/draft/2020-12/schema";

fn edit_spec_def() -> serde_json::Value {
    let size = serde_json::json!({
        "type": "object",
        "required": ["mode"],
        "properties": {
            "mode": {"enum": ["scale", "rate", "full"]},
            "scale": {"type": "number", "exclusiveMinimum": 0},
            "rate": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
        },
        "additionalProperties": false
    });
    let background = serde_json::json!({
        "type": "object",
        "required": ["mode"],
        "properties": {
            "mode": {"enum": ["invert", "guided", "adversarial", "random", "template"]},
            "lambda": {"type": "number"},
            "pattern": {"enum": ["checker", "stripe-vertical", "stripe-horizontal"]},
            "period": {"type": "integer", "minimum": 1}
        },
        "additionalProperties": false
    });
    let position = serde_json::json!({
        "type": "object",
        "required": ["mode"],
        "properties": {
            "mode": {"enum": ["offset", "random"]},
            "x": {"type": "integer", "minimum": 0},
            "y": {"type": "integer", "minimum": 0}
        },
        "additionalProperties": false
    });
    let angle = serde_json::json!({
        "type": "object",
        "required": ["mode"],
        "properties": {
            "mode": {"enum": ["degrees", "random"]},
            "degrees": {"type": "number"}
        },
        "additionalProperties": false
    });
    serde_json::json!({
        "type": "object",
        "required": ["edit", "t0", "seed"],
        "additionalProperties": false,
        "properties": {
            "t0": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
            "edit": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["background", "size", "position", "direction"]},
                    "background": background,
                    "size": size,
                    "pre_size": size,
                    "position": position,
                    "angle": angle
                },
                "additionalProperties": false
            }
        }
    })
}

/// Hand-written JSON Schema (draft 2020-12) for [`EditSpec`].
pub fn spec_schema() -> serde_json::Value {
    let mut s = edit_spec_def();
    s["$schema"] = DRAFT.into();
    s["title"] = "attr-forge edit spec".into();
    s
}

/// Hand-written JSON Schema (draft 2020-12) for [`SuiteManifest`].
pub fn manifest_schema() -> serde_json::Value {
    let variant = serde_json::json!({
        "type": "object",
        "required": ["name", "spec", "output", "sha256"],
        "additionalProperties": false,
        "properties": {
            "name": {"type": "string"},
            "output": {"type": "string"},
            "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
            "spec": edit_spec_def()
        }
    });
    serde_json::json!({
        "$schema": DRAFT,
        "title": "attr-forge suite manifest",
        "type": "object",
        "required": ["seed", "entries"],
        "additionalProperties": false,
        "properties": {
            "seed": {"type": "integer", "minimum": 0},
            "entries": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["source", "mask", "label", "seed", "variants"],
                    "additionalProperties": false,
                    "properties": {
                        "source": {"type": "string"},
                        "mask": {"type": "string"},
                        "label": {"type": "integer", "minimum": 0},
                        "seed": {"type": "integer", "minimum": 0},
                        "error": {"type": "string"},
                        "variants": {"type": "array", "items": variant}
                    }
                }
            }
        }
    })
}

/// Hand-written JSON Schema (draft 2020-12) for the evaluation report.
pub fn report_schema() -> serde_json::Value {
    let row = serde_json::json!({
        "type": "object",
        "required": ["variant", "n", "top1", "top1_se", "da", "da_se", "per_class_da"],
        "additionalProperties": false,
        "properties": {
            "variant": {"type": "string"},
            "n": {"type": "integer", "minimum": 0},
            "top1": {"type": "number", "minimum": 0, "maximum": 1},
            "top1_se": {"type": ["number", "null"]},
            "da": {"type": "number", "minimum": -1, "maximum": 1},
            "da_se": {"type": ["number", "null"]},
            "per_class_da": {
                "type": "object",
                "additionalProperties": {"type": ["number", "null"]}
            }
        }
    });
    serde_json::json!({
        "$schema": DRAFT,
        "title": "attr-forge attribute report",
        "type": "object",
        "required": ["tencrop", "classes", "rows", "average_da", "skipped"],
        "additionalProperties": false,
        "properties": {
            "tencrop": {"type": "boolean"},
            "classes": {"type": "array", "items": {"type": "string"}, "minItems": 2},
            "rows": {"type": "array", "items": row, "minItems": 1},
            "average_da": {"type": ["number", "null"]},
            "skipped": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["source", "reason"],
                    "additionalProperties": false,
                    "properties": {
                        "source": {"type": "string"},
                        "reason": {"type": "string"}
                    }
                }
            }
        }
    })
}
