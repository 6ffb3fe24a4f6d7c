//! Design points as name -> value JSON maps.
//!
//! Persisted files spell points out by variable name, with categorical
//! levels as their strings, so histories stay readable without the space
//! definition at hand. Conversion back recomputes the activity mask from
//! the space's rules, which is exact for corrected points.

use archbo_core::design_space::{DesignPoint, DesignSpace, Value, VariableKind};
use serde_json::{Map, Value as Json};

use crate::CliError;

pub fn to_named(space: &DesignSpace, point: &DesignPoint) -> Map<String, Json> {
    let mut map = Map::new();
    for (spec, value) in space.variables.iter().zip(&point.values) {
        let json = match (&spec.kind, value) {
            (VariableKind::Continuous { .. }, Value::Continuous(x)) => Json::from(*x),
            (VariableKind::Integer { .. }, Value::Integer(i)) => Json::from(*i),
            (VariableKind::Categorical { levels }, Value::Categorical(level)) => {
                Json::from(levels[*level].as_str())
            }
            _ => unreachable!("corrected points type-match their space"),
        };
        map.insert(spec.name.clone(), json);
    }
    map
}

pub fn from_named(space: &DesignSpace, map: &Map<String, Json>) -> Result<DesignPoint, CliError> {
    if map.len() != space.variables.len() {
        return Err(CliError::Config(format!(
            "point has {} variables, the space has {}",
            map.len(),
            space.variables.len()
        )));
    }
    let mut values = Vec::with_capacity(space.variables.len());
    for spec in &space.variables {
        let json = map.get(&spec.name).ok_or_else(|| {
            CliError::Config(format!("point is missing variable {:?}", spec.name))
        })?;
        let value = match &spec.kind {
            VariableKind::Continuous { .. } => Value::Continuous(json.as_f64().ok_or_else(
                || CliError::Config(format!("variable {:?} is not a number", spec.name)),
            )?),
            VariableKind::Integer { .. } => Value::Integer(json.as_i64().ok_or_else(|| {
                CliError::Config(format!("variable {:?} is not an integer", spec.name))
            })?),
            VariableKind::Categorical { levels } => {
                let label = json.as_str().ok_or_else(|| {
                    CliError::Config(format!("variable {:?} is not a string", spec.name))
                })?;
                let level = levels.iter().position(|l| l == label).ok_or_else(|| {
                    CliError::Config(format!(
                        "variable {:?} has no level {label:?}",
                        spec.name
                    ))
                })?;
                Value::Categorical(level)
            }
        };
        values.push(value);
    }
    let active = space.compute_activity(&values);
    Ok(DesignPoint { values, active })
}

#[cfg(test)]
mod tests {
    use super::*;
    use archbo_core::rng::substream;
    use archbo_core::turbofan::simple_turbofan_space;

    #[test]
    fn corrected_points_round_trip_exactly() {
        let space = simple_turbofan_space();
        let mut rng = substream(31, "doe");
        for point in space.sample_doe(25, &mut rng) {
            let named = to_named(&space, &point);
            let back = from_named(&space, &named).unwrap();
            assert_eq!(point, back);
        }
    }

    #[test]
    fn categorical_values_appear_as_their_level_strings() {
        let space = simple_turbofan_space();
        let mut rng = substream(32, "doe");
        let point = &space.sample_doe(1, &mut rng)[0];
        let named = to_named(&space, point);
        let fan = named.get("IncludeFan").unwrap();
        assert!(fan == "True" || fan == "False", "got {fan}");
        assert!(named.get("BPR").unwrap().is_f64());
        assert!(named.get("n_shafts").unwrap().is_i64());
    }

    #[test]
    fn missing_and_mistyped_variables_are_rejected() {
        let space = simple_turbofan_space();
        let mut rng = substream(33, "doe");
        let named = to_named(&space, &space.sample_doe(1, &mut rng)[0]);

        let mut missing = named.clone();
        missing.remove("OPR");
        assert!(from_named(&space, &missing).is_err());

        let mut mistyped = named.clone();
        mistyped.insert("IncludeFan".to_string(), Json::from(1));
        assert!(from_named(&space, &mistyped).is_err());

        let mut bad_level = named.clone();
        bad_level.insert("IncludeFan".to_string(), Json::from("Maybe"));
        assert!(from_named(&space, &bad_level).is_err());

        let mut extra = named;
        extra.insert("thrust".to_string(), Json::from(1.0));
        assert!(from_named(&space, &extra).is_err());
    }
}
