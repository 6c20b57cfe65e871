//! Model JSON round-trip.
//!
//! Layout:
//!
//! ```json
//! {
//!   "svs": [{"id": 0, "role": "input"}, {"id": 4, "role": "target"}],
//!   "csvs": [{"id": 5, "xp": [0], "xn": [2], "y": [4],
//!             "negatives_formed": true, "created_step": 0}],
//!   "config": {"upstream_depth": 1, "refine_mode": "discard",
//!              "closed_world": true},
//!   "step": 4
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Csv, CsvConfig, CsvError, CsvModel, RefineMode, SvId, SvRole};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    svs: Vec<SvDoc>,
    csvs: Vec<CsvDoc>,
    config: ConfigDoc,
    #[serde(default)]
    step: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvDoc {
    id: u64,
    role: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvDoc {
    id: u64,
    xp: Vec<u64>,
    xn: Vec<u64>,
    y: Vec<u64>,
    negatives_formed: bool,
    #[serde(default)]
    created_step: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    upstream_depth: u32,
    refine_mode: String,
    closed_world: bool,
}

pub fn model_to_json(model: &CsvModel) -> String {
    let doc = ModelDoc {
        svs: model
            .svs
            .iter()
            .map(|(&id, role)| SvDoc { id: id.0, role: role.name().to_string() })
            .collect(),
        csvs: model
            .csvs
            .values()
            .map(|c| CsvDoc {
                id: c.id.0,
                xp: c.positive.iter().map(|s| s.0).collect(),
                xn: c.negative.iter().map(|s| s.0).collect(),
                y: c.targets.iter().map(|s| s.0).collect(),
                negatives_formed: c.negatives_formed,
                created_step: c.created_step,
            })
            .collect(),
        config: ConfigDoc {
            upstream_depth: model.config.upstream_depth,
            refine_mode: match model.config.refine_mode {
                RefineMode::Discard => "discard".to_string(),
                RefineMode::Archive => "archive".to_string(),
            },
            closed_world: model.config.closed_world,
        },
        step: model.step(),
    };
    serde_json::to_string_pretty(&doc).expect("model document serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<CsvModel, CsvError> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| CsvError::InvalidDocument(e.to_string()))?;
    let invalid = CsvError::InvalidDocument;

    let mut svs: BTreeMap<SvId, SvRole> = BTreeMap::new();
    for sv in &doc.svs {
        let role = match sv.role.as_str() {
            "input" => SvRole::Input,
            "target" => SvRole::Target,
            "csv" => SvRole::Csv,
            other => return Err(invalid(format!("unknown role {other:?}"))),
        };
        if svs.insert(SvId(sv.id), role).is_some() {
            return Err(invalid(format!("duplicate sv id {}", sv.id)));
        }
    }

    let mut csvs: BTreeMap<SvId, Csv> = BTreeMap::new();
    for c in &doc.csvs {
        let id = SvId(c.id);
        if svs.get(&id) != Some(&SvRole::Csv) {
            return Err(invalid(format!("csv {} has no csv-role sv entry", c.id)));
        }
        let positive: BTreeSet<SvId> = c.xp.iter().map(|&s| SvId(s)).collect();
        let negative: BTreeSet<SvId> = c.xn.iter().map(|&s| SvId(s)).collect();
        let targets: BTreeSet<SvId> = c.y.iter().map(|&s| SvId(s)).collect();
        if targets.is_empty() {
            return Err(invalid(format!("csv {} has no targets", c.id)));
        }
        if positive.intersection(&negative).next().is_some() {
            return Err(invalid(format!(
                "csv {} has overlapping positive and negative sources",
                c.id
            )));
        }
        for &s in positive.iter().chain(&negative) {
            match svs.get(&s) {
                Some(SvRole::Input) => {}
                Some(_) => return Err(invalid(format!("csv {} source {} is not an input", c.id, s))),
                None => return Err(invalid(format!("csv {} references missing source {}", c.id, s))),
            }
        }
        for &t in &targets {
            match svs.get(&t) {
                Some(SvRole::Target) | Some(SvRole::Csv) => {
                    if t == id {
                        return Err(invalid(format!("csv {} targets itself", c.id)));
                    }
                }
                Some(SvRole::Input) => {
                    return Err(invalid(format!("csv {} targets input {}", c.id, t)))
                }
                None => return Err(invalid(format!("csv {} references missing target {}", c.id, t))),
            }
        }
        let placeholder = Csv {
            id,
            positive,
            negative,
            targets,
            negatives_formed: c.negatives_formed,
            created_step: c.created_step,
            level: 0,
        };
        if csvs.insert(id, placeholder).is_some() {
            return Err(invalid(format!("duplicate csv id {}", c.id)));
        }
    }

    // Assign levels; a cycle in the target relation leaves some level
    // unresolvable.
    let mut levels: BTreeMap<SvId, u32> = BTreeMap::new();
    let mut remaining: Vec<SvId> = csvs.keys().copied().collect();
    while !remaining.is_empty() {
        let before = remaining.len();
        remaining.retain(|&id| {
            let csv = &csvs[&id];
            let mut level = 0;
            for &t in &csv.targets {
                if csvs.contains_key(&t) {
                    match levels.get(&t) {
                        Some(&l) => level = level.max(l + 1),
                        None => return true,
                    }
                }
            }
            levels.insert(id, level);
            false
        });
        if remaining.len() == before {
            return Err(invalid("csv target relation contains a cycle".into()));
        }
    }
    for (id, level) in levels {
        csvs.get_mut(&id).unwrap().level = level;
    }

    let config = CsvConfig {
        upstream_depth: doc.config.upstream_depth,
        refine_mode: match doc.config.refine_mode.as_str() {
            "discard" => RefineMode::Discard,
            "archive" => RefineMode::Archive,
            other => return Err(invalid(format!("unknown refine mode {other:?}"))),
        },
        closed_world: doc.config.closed_world,
    };

    let next_id = svs.keys().map(|s| s.0 + 1).max().unwrap_or(0);
    let mut model = CsvModel::new(config);
    model.svs = svs;
    model.csvs = csvs;
    model.restore_counters(next_id, doc.step);
    Ok(model)
}
