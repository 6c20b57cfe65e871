//! Feedforward use of the learned structure.

use std::collections::BTreeMap;

use super::{CsvModel, StateValue, SvId, SvRole};

/// Predict target states from an input assignment alone. A target is
/// active iff some CSV targeting it has every positive source active and
/// no negative source active; with no satisfied explainer the closed-world
/// reading reports inactive, otherwise unobserved. Missing inputs count as
/// unobserved.
pub fn predict(model: &CsvModel, inputs: &BTreeMap<SvId, StateValue>) -> BTreeMap<SvId, StateValue> {
    let state = |id: SvId| inputs.get(&id).copied().unwrap_or(StateValue::Unobserved);
    let mut out = BTreeMap::new();
    for (&target, role) in &model.svs {
        if *role != SvRole::Target {
            continue;
        }
        let explained = model.csvs.values().any(|csv| {
            csv.targets.contains(&target)
                && csv.positive.iter().all(|&s| state(s).is_active())
                && !csv.negative.iter().any(|&s| state(s).is_active())
        });
        let value = if explained {
            StateValue::Active
        } else if model.config.closed_world {
            StateValue::Inactive
        } else {
            StateValue::Unobserved
        };
        out.insert(target, value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::{fig5_model, instance};
    use super::*;

    fn learned() -> (CsvModel, Vec<SvId>, SvId) {
        let (mut model, xs, y) = fig5_model();
        for obs in [
            instance(&[(xs[0], 1), (xs[1], 1), (xs[2], -1), (xs[3], -1), (y, 1)]),
            instance(&[(xs[0], 1), (xs[1], -1), (xs[2], -1), (xs[3], -1), (y, 1)]),
            instance(&[(xs[0], 1), (xs[1], -1), (xs[2], 1), (xs[3], 1), (y, -1)]),
            instance(&[(xs[0], 1), (xs[1], -1), (xs[2], 1), (xs[3], -1), (y, -1)]),
        ] {
            model.observe(&obs).unwrap();
        }
        (model, xs, y)
    }

    #[test]
    fn learned_structure_predicts_its_rule() {
        let (model, xs, y) = learned();
        let inputs: BTreeMap<SvId, StateValue> =
            [(xs[0], StateValue::Active), (xs[2], StateValue::Inactive)].into_iter().collect();
        assert_eq!(predict(&model, &inputs)[&y], StateValue::Active);
    }

    #[test]
    fn closed_world_defaults_to_inactive() {
        let (model, xs, y) = learned();
        let inputs: BTreeMap<SvId, StateValue> = [(xs[0], StateValue::Inactive)].into_iter().collect();
        assert_eq!(predict(&model, &inputs)[&y], StateValue::Inactive);
    }

    #[test]
    fn truth_table_matches_conjunction_with_negation() {
        let (model, xs, y) = learned();
        for x0 in [-1i8, 1] {
            for x2 in [-1i8, 1] {
                let inputs: BTreeMap<SvId, StateValue> = [
                    (xs[0], StateValue::from_i8(x0).unwrap()),
                    (xs[1], StateValue::Inactive),
                    (xs[2], StateValue::from_i8(x2).unwrap()),
                    (xs[3], StateValue::Inactive),
                ]
                .into_iter()
                .collect();
                let expected = x0 == 1 && x2 == -1;
                let got = predict(&model, &inputs)[&y] == StateValue::Active;
                assert_eq!(got, expected, "x0={x0} x2={x2}");
            }
        }
    }
}
