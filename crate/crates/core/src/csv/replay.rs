//! Replay-invariance instrumentation.
//!
//! The learner's guarantee: a CSV's *determined* response (active or
//! inactive) to any archived instance is never altered by later learning,
//! except across the CSV's single negative-formation event and target-set
//! changes (target sets are fixed at creation here, so only the former
//! occurs).
//!
//! An instance, for a given CSV, includes the states of its sources and of
//! its conditioning targets. The auditor therefore freezes each archived
//! instance's entity states — external SVs from the observation itself,
//! CSV states as first recorded — and replays every CSV *locally* against
//! that frozen assignment. Evaluating recursively through current
//! downstream structure would instead re-attribute a target CSV's own
//! (exempt) negative-formation change to every CSV conditioned on it.
//!
//! Source removals can lift an archived response from unobserved to a
//! determined state — whatever blocked satisfaction is gone — which
//! extends coverage rather than destroying knowledge; those transitions
//! are counted separately.

use std::collections::{BTreeMap, BTreeSet};

use super::{Csv, CsvError, CsvModel, Instance, LearnEvent, LearnEventKind, StateValue, SvId};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayViolation {
    pub step: u64,
    pub csv: SvId,
    pub instance_index: usize,
    pub before: StateValue,
    pub after: StateValue,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    /// Determined states that changed outside the exemptions. The guarantee
    /// says this stays empty.
    pub violations: Vec<ReplayViolation>,
    /// Changes across a negative-formation event, the guarantee's stated
    /// exclusion; informational.
    pub exempted: usize,
    /// Unobserved responses that became determined; informational.
    pub coverage_gains: usize,
    /// Total (csv, archived instance) comparisons.
    pub checks: usize,
}

struct ArchivedInstance {
    instance: Instance,
    /// CSV states on this instance as first recorded; never rewritten.
    recorded: BTreeMap<SvId, StateValue>,
}

/// Observes instances through a model while diffing every CSV's response
/// to every archived instance before and after each step.
#[derive(Default)]
pub struct ReplayAuditor {
    archive: Vec<ArchivedInstance>,
    report: ReplayReport,
}

/// A CSV's state with target-CSV states taken from a frozen assignment
/// rather than recomputed.
fn local_state(csv: &Csv, instance: &Instance, recorded: &BTreeMap<SvId, StateValue>) -> StateValue {
    let entity = |id: SvId| recorded.get(&id).copied().unwrap_or_else(|| instance.state(id));
    if csv.positive.iter().any(|&s| instance.state(s) != StateValue::Active)
        || csv.negative.iter().any(|&s| instance.state(s) == StateValue::Active)
    {
        return StateValue::Unobserved;
    }
    let mut all_active = true;
    let mut all_inactive = true;
    for &t in &csv.targets {
        match entity(t) {
            StateValue::Active => all_inactive = false,
            StateValue::Inactive => all_active = false,
            StateValue::Unobserved => {
                all_active = false;
                all_inactive = false;
            }
        }
    }
    if all_active {
        StateValue::Active
    } else if all_inactive {
        StateValue::Inactive
    } else {
        StateValue::Unobserved
    }
}

impl ReplayAuditor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn archive_len(&self) -> usize {
        self.archive.len()
    }

    pub fn archived_instances(&self) -> impl Iterator<Item = &Instance> {
        self.archive.iter().map(|a| &a.instance)
    }

    pub fn report(&self) -> &ReplayReport {
        &self.report
    }

    pub fn into_report(self) -> ReplayReport {
        self.report
    }

    /// Record states for CSVs that do not yet have one on some archived
    /// instance, in level order so target states freeze before dependents.
    fn freeze_new(&mut self, model: &CsvModel) {
        let mut csvs: Vec<&Csv> = model.csvs().collect();
        csvs.sort_by_key(|c| (c.level, c.id));
        for entry in &mut self.archive {
            for csv in &csvs {
                if !entry.recorded.contains_key(&csv.id) {
                    let v = local_state(csv, &entry.instance, &entry.recorded);
                    entry.recorded.insert(csv.id, v);
                }
            }
        }
    }

    fn evaluate(&self, model: &CsvModel) -> BTreeMap<(SvId, usize), StateValue> {
        let mut states = BTreeMap::new();
        for (idx, entry) in self.archive.iter().enumerate() {
            for csv in model.csvs() {
                states.insert((csv.id, idx), local_state(csv, &entry.instance, &entry.recorded));
            }
        }
        states
    }

    /// Observe one instance, then archive it. The instance itself becomes
    /// checkable only from the next step on.
    pub fn observe_checked(
        &mut self,
        model: &mut CsvModel,
        instance: Instance,
    ) -> Result<Vec<LearnEvent>, CsvError> {
        self.freeze_new(model);
        let before = self.evaluate(model);
        let step = model.step();
        let events = model.observe(&instance)?;
        let after = self.evaluate(model);

        let formed_negatives: BTreeSet<SvId> = events
            .iter()
            .filter(|e| matches!(e.kind, LearnEventKind::NegativesFormed { .. }))
            .map(|e| e.csv)
            .collect();

        for (key, &old) in &before {
            let new = match after.get(key) {
                Some(&v) => v,
                None => continue,
            };
            self.report.checks += 1;
            if new == old {
                continue;
            }
            if formed_negatives.contains(&key.0) {
                self.report.exempted += 1;
            } else if old == StateValue::Unobserved {
                self.report.coverage_gains += 1;
            } else {
                self.report.violations.push(ReplayViolation {
                    step,
                    csv: key.0,
                    instance_index: key.1,
                    before: old,
                    after: new,
                });
            }
        }

        self.archive.push(ArchivedInstance { instance, recorded: BTreeMap::new() });
        Ok(events)
    }
}

/// Run a whole stream through the model under the auditor.
pub fn replay_stream(model: &mut CsvModel, stream: Vec<Instance>) -> Result<ReplayReport, CsvError> {
    let mut auditor = ReplayAuditor::new();
    for instance in stream {
        auditor.observe_checked(model, instance)?;
    }
    Ok(auditor.into_report())
}
