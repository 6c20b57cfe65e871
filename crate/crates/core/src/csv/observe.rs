//! The observation step: refinement, negative formation, and formation.

use std::collections::BTreeSet;

use super::{Csv, CsvError, CsvModel, Instance, RefineMode, StateValue, SvId, SvRole};

#[derive(Debug, Clone, PartialEq)]
pub enum LearnEventKind {
    /// A new CSV hypothesizing every active input for the step's
    /// unexplained targets.
    Formed { targets: Vec<SvId>, positives: Vec<SvId> },
    /// Nonactive positive sources dropped.
    PositivesRemoved { removed: Vec<SvId> },
    /// One-time capture of active non-positive inputs as negative sources.
    NegativesFormed { negatives: Vec<SvId> },
    /// Negative sources dropped: active ones when the targets turned out
    /// active anyway, inactive ones when suppression was accounted for by
    /// an active co-source.
    NegativesRemoved { removed: Vec<SvId> },
    /// Archive refine mode: refined positives reorganized upstream.
    ArchiveFormed { conditioned: SvId, positives: Vec<SvId> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnEvent {
    pub step: u64,
    pub csv: SvId,
    pub kind: LearnEventKind,
}

impl CsvModel {
    fn level_csv_ids(&self, level: u32) -> Vec<SvId> {
        self.csvs.values().filter(|c| c.level == level).map(|c| c.id).collect()
    }

    fn targets_all(&self, csv: &Csv, instance: &Instance, want: StateValue) -> Result<bool, CsvError> {
        for &t in &csv.targets {
            if self.entity_state(t, instance)? != want {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Process one instance: per level, refinement, negative formation,
    /// symmetric negative refinement, then formation for whatever active
    /// entities remain unexplained. Every instance is processable; the
    /// returned events say what changed.
    pub fn observe(&mut self, instance: &Instance) -> Result<Vec<LearnEvent>, CsvError> {
        self.validate_instance(instance)?;
        let step = self.advance_step();
        let mut events = Vec::new();

        for level in 0..=self.config.upstream_depth {
            self.refine(level, instance, step, &mut events)?;
            self.form_negatives(level, instance, step, &mut events)?;
            self.refine_negatives(level, instance, step, &mut events)?;
            self.form(level, instance, step, &mut events)?;
        }

        self.events.extend(events.iter().cloned());
        Ok(events)
    }

    /// Active targets with at least one active positive source: nonactive
    /// positives and active negatives are deduced unnecessary.
    fn refine(
        &mut self,
        level: u32,
        instance: &Instance,
        step: u64,
        events: &mut Vec<LearnEvent>,
    ) -> Result<(), CsvError> {
        for id in self.level_csv_ids(level) {
            let csv = &self.csvs[&id];
            if !self.targets_all(csv, instance, StateValue::Active)? {
                continue;
            }
            let any_active_pos = csv.positive.iter().any(|&s| instance.state(s).is_active());
            if !any_active_pos {
                continue;
            }
            let removed_pos: Vec<SvId> = csv
                .positive
                .iter()
                .copied()
                .filter(|&s| !instance.state(s).is_active())
                .collect();
            let removed_neg: Vec<SvId> = csv
                .negative
                .iter()
                .copied()
                .filter(|&s| instance.state(s).is_active())
                .collect();
            if !removed_pos.is_empty() {
                let csv = self.csvs.get_mut(&id).unwrap();
                for s in &removed_pos {
                    csv.positive.remove(s);
                }
                events.push(LearnEvent {
                    step,
                    csv: id,
                    kind: LearnEventKind::PositivesRemoved { removed: removed_pos.clone() },
                });
                if self.config.refine_mode == RefineMode::Archive {
                    self.archive_refined(id, &removed_pos, step, events);
                }
            }
            if !removed_neg.is_empty() {
                let csv = self.csvs.get_mut(&id).unwrap();
                for s in &removed_neg {
                    csv.negative.remove(s);
                }
                events.push(LearnEvent {
                    step,
                    csv: id,
                    kind: LearnEventKind::NegativesRemoved { removed: removed_neg },
                });
            }
        }
        Ok(())
    }

    /// First satisfied-but-inactive observation: capture every active
    /// input outside the positive set as a negative source, once ever.
    /// Capturing only at this point avoids exhaustive negative connections
    /// to everything that merely happened to be inactive at creation.
    fn form_negatives(
        &mut self,
        level: u32,
        instance: &Instance,
        step: u64,
        events: &mut Vec<LearnEvent>,
    ) -> Result<(), CsvError> {
        for id in self.level_csv_ids(level) {
            let csv = &self.csvs[&id];
            if csv.negatives_formed {
                continue;
            }
            if self.csv_state(id, instance)? != StateValue::Inactive {
                continue;
            }
            let captured: BTreeSet<SvId> = self
                .svs
                .iter()
                .filter(|(_, r)| **r == SvRole::Input)
                .map(|(&s, _)| s)
                .filter(|&s| instance.state(s).is_active())
                .filter(|s| !self.csvs[&id].positive.contains(s))
                .collect();
            let csv = self.csvs.get_mut(&id).unwrap();
            csv.negative = captured.clone();
            csv.negatives_formed = true;
            events.push(LearnEvent {
                step,
                csv: id,
                kind: LearnEventKind::NegativesFormed { negatives: captured.into_iter().collect() },
            });
        }
        Ok(())
    }

    /// Suppression confirmed by an active negative source while the
    /// positives are satisfied: inactive co-negatives are deduced
    /// unnecessary for the suppression.
    fn refine_negatives(
        &mut self,
        level: u32,
        instance: &Instance,
        step: u64,
        events: &mut Vec<LearnEvent>,
    ) -> Result<(), CsvError> {
        for id in self.level_csv_ids(level) {
            let csv = &self.csvs[&id];
            if !self.targets_all(csv, instance, StateValue::Inactive)? {
                continue;
            }
            if !csv.positive.iter().all(|&s| instance.state(s).is_active()) {
                continue;
            }
            if !csv.negative.iter().any(|&s| instance.state(s).is_active()) {
                continue;
            }
            let removed: Vec<SvId> = csv
                .negative
                .iter()
                .copied()
                .filter(|&s| instance.state(s) == StateValue::Inactive)
                .collect();
            if removed.is_empty() {
                continue;
            }
            let csv = self.csvs.get_mut(&id).unwrap();
            for s in &removed {
                csv.negative.remove(s);
            }
            events.push(LearnEvent {
                step,
                csv: id,
                kind: LearnEventKind::NegativesRemoved { removed },
            });
        }
        Ok(())
    }

    /// Active entities with no active explainer get one: a new CSV whose
    /// positive sources are every currently active input. Entities
    /// unexplained at the same step share one CSV, so target sets move
    /// together by construction.
    fn form(
        &mut self,
        level: u32,
        instance: &Instance,
        step: u64,
        events: &mut Vec<LearnEvent>,
    ) -> Result<(), CsvError> {
        let explananda: Vec<SvId> = if level == 0 {
            self.svs
                .iter()
                .filter(|(_, r)| **r == SvRole::Target)
                .map(|(&s, _)| s)
                .filter(|&s| instance.state(s).is_active())
                .collect()
        } else {
            let mut ids = Vec::new();
            for id in self.level_csv_ids(level - 1) {
                if self.csv_state(id, instance)? == StateValue::Active {
                    ids.push(id);
                }
            }
            ids
        };
        let mut unexplained = Vec::new();
        'entity: for e in explananda {
            for csv in self.csvs.values() {
                if csv.targets.contains(&e) && self.csv_state(csv.id, instance)? == StateValue::Active {
                    continue 'entity;
                }
            }
            unexplained.push(e);
        }
        if unexplained.is_empty() {
            return Ok(());
        }
        let positives: BTreeSet<SvId> = self
            .svs
            .iter()
            .filter(|(_, r)| **r == SvRole::Input)
            .map(|(&s, _)| s)
            .filter(|&s| instance.state(s).is_active())
            .collect();
        let id = self.alloc_id();
        self.svs.insert(id, SvRole::Csv);
        self.csvs.insert(
            id,
            Csv {
                id,
                positive: positives.clone(),
                negative: BTreeSet::new(),
                targets: unexplained.iter().copied().collect(),
                negatives_formed: false,
                created_step: step,
                level,
            },
        );
        events.push(LearnEvent {
            step,
            csv: id,
            kind: LearnEventKind::Formed {
                targets: unexplained,
                positives: positives.into_iter().collect(),
            },
        });
        Ok(())
    }

    /// Archive refine mode: the dropped positives become the sources of a
    /// new CSV conditioning the refined one, preserving the knowledge as
    /// an upstream pathway instead of discarding it.
    fn archive_refined(&mut self, conditioned: SvId, removed: &[SvId], step: u64, events: &mut Vec<LearnEvent>) {
        let level = self.csvs[&conditioned].level + 1;
        if level > self.config.upstream_depth {
            return;
        }
        let id = self.alloc_id();
        self.svs.insert(id, SvRole::Csv);
        self.csvs.insert(
            id,
            Csv {
                id,
                positive: removed.iter().copied().collect(),
                negative: BTreeSet::new(),
                targets: [conditioned].into_iter().collect(),
                negatives_formed: false,
                created_step: step,
                level,
            },
        );
        events.push(LearnEvent {
            step,
            csv: id,
            kind: LearnEventKind::ArchiveFormed { conditioned, positives: removed.to_vec() },
        });
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{fig5_model, instance};
    use super::*;

    /// The four-observation trace: formation with both actives, positive
    /// refinement, negative formation, negative refinement.
    #[test]
    fn four_step_trace_converges_to_the_true_structure() {
        let (mut model, xs, y) = fig5_model();

        // X0, X1 -> Y: a CSV hypothesizing both is formed.
        let events = model
            .observe(&instance(&[(xs[0], 1), (xs[1], 1), (xs[2], -1), (xs[3], -1), (y, 1)]))
            .unwrap();
        assert_eq!(events.len(), 1);
        let c = events[0].csv;
        assert_eq!(
            events[0].kind,
            LearnEventKind::Formed { targets: vec![y], positives: vec![xs[0], xs[1]] }
        );

        // X0 -> Y: X1 deduced unnecessary.
        let events = model
            .observe(&instance(&[(xs[0], 1), (xs[1], -1), (xs[2], -1), (xs[3], -1), (y, 1)]))
            .unwrap();
        assert_eq!(events, vec![LearnEvent {
            step: 1,
            csv: c,
            kind: LearnEventKind::PositivesRemoved { removed: vec![xs[1]] },
        }]);
        assert_eq!(model.csv(c).unwrap().positive, [xs[0]].into_iter().collect());

        // X0, X2, X3 -> not Y: suppression hypothesized on X2 and X3.
        let events = model
            .observe(&instance(&[(xs[0], 1), (xs[1], -1), (xs[2], 1), (xs[3], 1), (y, -1)]))
            .unwrap();
        assert_eq!(events, vec![LearnEvent {
            step: 2,
            csv: c,
            kind: LearnEventKind::NegativesFormed { negatives: vec![xs[2], xs[3]] },
        }]);

        // X0, X2 -> not Y: X3 deduced unnecessary for the suppression.
        let events = model
            .observe(&instance(&[(xs[0], 1), (xs[1], -1), (xs[2], 1), (xs[3], -1), (y, -1)]))
            .unwrap();
        assert_eq!(events, vec![LearnEvent {
            step: 3,
            csv: c,
            kind: LearnEventKind::NegativesRemoved { removed: vec![xs[3]] },
        }]);

        let csv = model.csv(c).unwrap();
        assert_eq!(csv.positive, [xs[0]].into_iter().collect());
        assert_eq!(csv.negative, [xs[2]].into_iter().collect());
        assert_eq!(model.num_csvs(), 1);
    }

    #[test]
    fn second_inactive_observation_forms_no_more_negatives() {
        let (mut model, xs, y) = fig5_model();
        model.observe(&instance(&[(xs[0], 1), (xs[1], -1), (xs[2], -1), (xs[3], -1), (y, 1)])).unwrap();
        let events =
            model.observe(&instance(&[(xs[0], 1), (xs[1], -1), (xs[2], 1), (xs[3], -1), (y, -1)])).unwrap();
        let c = events[0].csv;
        assert!(matches!(events[0].kind, LearnEventKind::NegativesFormed { .. }));
        // A later unexplained suppression (negatives all inactive) changes
        // nothing: capture happens exactly once.
        let events =
            model.observe(&instance(&[(xs[0], 1), (xs[1], 1), (xs[2], -1), (xs[3], -1), (y, -1)])).unwrap();
        assert!(events.is_empty(), "{events:?}");
        assert_eq!(model.csv(c).unwrap().negative, [xs[2]].into_iter().collect());
    }

    #[test]
    fn unobserved_inputs_are_not_captured_as_positives() {
        let (mut model, xs, y) = fig5_model();
        let events =
            model.observe(&instance(&[(xs[0], 1), (xs[1], 0), (xs[2], 0), (xs[3], -1), (y, 1)])).unwrap();
        let c = events[0].csv;
        assert_eq!(model.csv(c).unwrap().positive, [xs[0]].into_iter().collect());
    }

    #[test]
    fn inactive_target_needs_no_explanation() {
        let (mut model, xs, y) = fig5_model();
        let events =
            model.observe(&instance(&[(xs[0], 1), (xs[1], 1), (xs[2], 1), (xs[3], 1), (y, -1)])).unwrap();
        assert!(events.is_empty());
        assert_eq!(model.num_csvs(), 0);
    }

    #[test]
    fn unexplained_reactivation_forms_a_fresh_csv() {
        let (mut model, xs, y) = fig5_model();
        model.observe(&instance(&[(xs[0], 1), (xs[1], -1), (xs[2], -1), (xs[3], -1), (y, 1)])).unwrap();
        // A context where the first CSV is unsatisfied but Y is active
        // regenerates variation instead of editing the old hypothesis.
        let events =
            model.observe(&instance(&[(xs[0], -1), (xs[1], 1), (xs[2], -1), (xs[3], -1), (y, 1)])).unwrap();
        assert_eq!(events.len(), 1);
        assert!(matches!(events[0].kind, LearnEventKind::Formed { .. }));
        assert_eq!(model.num_csvs(), 2);
    }

    #[test]
    fn upstream_level_explains_active_csvs() {
        let (mut model, xs, y) = {
            let mut model = CsvModel::new(super::super::CsvConfig::default());
            let xs: Vec<SvId> = (0..2).map(|_| model.add_input()).collect();
            let y = model.add_target();
            (model, xs, y)
        };
        let events = model.observe(&instance(&[(xs[0], 1), (xs[1], -1), (y, 1)])).unwrap();
        // Base formation plus one upstream CSV explaining the new active CSV.
        assert_eq!(events.len(), 2);
        let base = events[0].csv;
        let upstream = events[1].csv;
        let up = model.csv(upstream).unwrap();
        assert_eq!(up.level, 1);
        assert_eq!(up.targets, [base].into_iter().collect());
        // The next consistent observation leaves the structure alone.
        let events = model.observe(&instance(&[(xs[0], 1), (xs[1], -1), (y, 1)])).unwrap();
        assert!(events.is_empty(), "{events:?}");
    }
}
