//! Ternary state variables and conditioning state variables.
//!
//! A state variable (SV) is active (1), inactive (-1), or unobserved (0).
//! A conditioning state variable (CSV) relates a set of positive and
//! negative source SVs to a set of target SVs: its sources are *satisfied*
//! when every positive source is active and no negative source is; a
//! satisfied CSV is active or inactive with its targets, unobserved
//! otherwise. CSVs are not feedforward units — targets are observed, not
//! computed — except during prediction.
//!
//! Learning is single-pass local variation and selection: a CSV is born
//! hypothesizing every active input as a positive source, captures active
//! inputs as negative sources once, at its first satisfied-but-inactive
//! observation, and afterwards only ever sheds sources. Source sets never
//! regain members.

mod observe;
mod predict;
mod replay;
mod serial;

pub use observe::{LearnEvent, LearnEventKind};
pub use predict::predict;
pub use replay::{replay_stream, ReplayAuditor, ReplayReport, ReplayViolation};
pub use serial::{model_from_json, model_to_json};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Ternary state of an SV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StateValue {
    Active,
    Inactive,
    Unobserved,
}

impl StateValue {
    pub fn from_i8(v: i8) -> Option<StateValue> {
        match v {
            1 => Some(StateValue::Active),
            -1 => Some(StateValue::Inactive),
            0 => Some(StateValue::Unobserved),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            StateValue::Active => 1,
            StateValue::Inactive => -1,
            StateValue::Unobserved => 0,
        }
    }

    pub fn is_active(self) -> bool {
        self == StateValue::Active
    }
}

/// Shared id space for external SVs and CSVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SvId(pub u64);

impl fmt::Display for SvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvRole {
    /// Externally provided information source.
    Input,
    /// Externally observed prediction target.
    Target,
    /// Internal conditioning state variable.
    Csv,
}

impl SvRole {
    pub fn name(self) -> &'static str {
        match self {
            SvRole::Input => "input",
            SvRole::Target => "target",
            SvRole::Csv => "csv",
        }
    }
}

/// A conditioning state variable. `positive` and `negative` hold input SV
/// ids; `targets` holds target SVs (level 0) or CSVs one level down.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    pub id: SvId,
    pub positive: BTreeSet<SvId>,
    pub negative: BTreeSet<SvId>,
    pub targets: BTreeSet<SvId>,
    pub negatives_formed: bool,
    pub created_step: u64,
    /// 0 when targets are external SVs, k when targets are level k-1 CSVs.
    pub level: u32,
}

/// How refined (removed) positive sources are disposed of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefineMode {
    /// Dropped outright; past responses are preserved.
    #[default]
    Discard,
    /// Reorganized as the positive sources of a new upstream CSV
    /// conditioning the refined one; past knowledge is kept in structure.
    Archive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvConfig {
    /// Levels of CSV-over-CSV conditioning. 0 disables upstream learning;
    /// 1 (default) lets CSVs explain other CSVs.
    pub upstream_depth: u32,
    pub refine_mode: RefineMode,
    /// When set, prediction reports targets with no satisfied explainer as
    /// inactive rather than unobserved.
    pub closed_world: bool,
}

impl Default for CsvConfig {
    fn default() -> Self {
        CsvConfig { upstream_depth: 1, refine_mode: RefineMode::Discard, closed_world: true }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("unknown state variable {0}")]
    UnknownSv(SvId),
    #[error("{0} is not an input state variable")]
    NotAnInput(SvId),
    #[error("instance is missing a state for {0}")]
    IncompleteInstance(SvId),
    #[error("instance assigns a state to internal variable {0}")]
    InternalInInstance(SvId),
    #[error("invalid model document: {0}")]
    InvalidDocument(String),
}

/// A total assignment of states to the model's input and target SVs at one
/// step.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub states: BTreeMap<SvId, StateValue>,
}

impl Instance {
    pub fn new(states: BTreeMap<SvId, StateValue>) -> Self {
        Instance { states }
    }

    pub fn state(&self, id: SvId) -> StateValue {
        self.states.get(&id).copied().unwrap_or(StateValue::Unobserved)
    }
}

/// The learner: external SVs, learned CSVs, and the event log.
#[derive(Debug, Clone)]
pub struct CsvModel {
    pub(crate) svs: BTreeMap<SvId, SvRole>,
    pub(crate) csvs: BTreeMap<SvId, Csv>,
    pub config: CsvConfig,
    next_id: u64,
    step: u64,
    pub(crate) events: Vec<LearnEvent>,
}

impl CsvModel {
    pub fn new(config: CsvConfig) -> Self {
        CsvModel {
            svs: BTreeMap::new(),
            csvs: BTreeMap::new(),
            config,
            next_id: 0,
            step: 0,
            events: Vec::new(),
        }
    }

    pub(crate) fn alloc_id(&mut self) -> SvId {
        let id = SvId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn add_input(&mut self) -> SvId {
        let id = self.alloc_id();
        self.svs.insert(id, SvRole::Input);
        id
    }

    pub fn add_target(&mut self) -> SvId {
        let id = self.alloc_id();
        self.svs.insert(id, SvRole::Target);
        id
    }

    pub fn role(&self, id: SvId) -> Option<SvRole> {
        self.svs.get(&id).copied()
    }

    pub fn inputs(&self) -> Vec<SvId> {
        self.svs.iter().filter(|(_, r)| **r == SvRole::Input).map(|(&id, _)| id).collect()
    }

    pub fn targets(&self) -> Vec<SvId> {
        self.svs.iter().filter(|(_, r)| **r == SvRole::Target).map(|(&id, _)| id).collect()
    }

    pub fn csvs(&self) -> impl Iterator<Item = &Csv> {
        self.csvs.values()
    }

    pub fn csv(&self, id: SvId) -> Option<&Csv> {
        self.csvs.get(&id)
    }

    pub fn num_csvs(&self) -> usize {
        self.csvs.len()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn advance_step(&mut self) -> u64 {
        let s = self.step;
        self.step += 1;
        s
    }

    pub(crate) fn restore_counters(&mut self, next_id: u64, step: u64) {
        self.next_id = next_id;
        self.step = step;
    }

    pub fn events(&self) -> &[LearnEvent] {
        &self.events
    }

    /// Every input and target SV must carry a state; internal ids must not.
    pub fn validate_instance(&self, instance: &Instance) -> Result<(), CsvError> {
        for (&id, role) in &self.svs {
            match role {
                SvRole::Input | SvRole::Target => {
                    if !instance.states.contains_key(&id) {
                        return Err(CsvError::IncompleteInstance(id));
                    }
                }
                SvRole::Csv => {}
            }
        }
        for &id in instance.states.keys() {
            match self.svs.get(&id) {
                None => return Err(CsvError::UnknownSv(id)),
                Some(SvRole::Csv) => return Err(CsvError::InternalInInstance(id)),
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// State of any entity (external SV or CSV) under an instance.
    pub fn entity_state(&self, id: SvId, instance: &Instance) -> Result<StateValue, CsvError> {
        match self.svs.get(&id) {
            None => Err(CsvError::UnknownSv(id)),
            Some(SvRole::Csv) => self.csv_state(id, instance),
            Some(_) => Ok(instance.state(id)),
        }
    }

    /// Definition of a CSV's state: satisfied iff all positive sources are
    /// active and no negative source is; then active/inactive with its
    /// targets, unobserved on any mixed or unsettled reading.
    pub fn csv_state(&self, id: SvId, instance: &Instance) -> Result<StateValue, CsvError> {
        let csv = self.csvs.get(&id).ok_or(CsvError::UnknownSv(id))?;
        for &s in csv.positive.iter().chain(&csv.negative) {
            if !self.svs.contains_key(&s) {
                return Err(CsvError::UnknownSv(s));
            }
        }
        if csv.positive.iter().any(|&s| instance.state(s) != StateValue::Active)
            || csv.negative.iter().any(|&s| instance.state(s) == StateValue::Active)
        {
            return Ok(StateValue::Unobserved);
        }
        let mut all_active = true;
        let mut all_inactive = true;
        for &t in &csv.targets {
            match self.entity_state(t, instance)? {
                StateValue::Active => all_inactive = false,
                StateValue::Inactive => all_active = false,
                StateValue::Unobserved => {
                    all_active = false;
                    all_inactive = false;
                }
            }
        }
        Ok(if all_active {
            StateValue::Active
        } else if all_inactive {
            StateValue::Inactive
        } else {
            StateValue::Unobserved
        })
    }
}
