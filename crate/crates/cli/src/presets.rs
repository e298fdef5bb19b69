//! Scenarios shipped with the binary.

use crate::scenario::{Scenario, ScenarioError};

pub const PRESETS: &[(&str, &str)] = &[
    ("example1-uniform", include_str!("../presets/example1-uniform.scn")),
    ("example1-linear", include_str!("../presets/example1-linear.scn")),
    ("1d-two-stations", include_str!("../presets/1d-two-stations.scn")),
    ("1d-non-homogeneous", include_str!("../presets/1d-non-homogeneous.scn")),
    ("1d-three-stations", include_str!("../presets/1d-three-stations.scn")),
    ("2d-five-stations", include_str!("../presets/2d-five-stations.scn")),
    ("2d-five-stations-radial", include_str!("../presets/2d-five-stations-radial.scn")),
    ("poa-toy", include_str!("../presets/poa-toy.scn")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// First comment line of a preset.
pub fn description(text: &str) -> &str {
    text.lines().find_map(|l| l.strip_prefix('#')).map(str::trim).unwrap_or("")
}

pub fn load_preset(name: &str) -> Option<Result<Scenario, ScenarioError>> {
    preset_text(name).map(Scenario::parse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_round_trip() {
        for (name, text) in PRESETS {
            let s = Scenario::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&s.name, name);
            assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s, "{name}");
            assert!(!description(text).is_empty());
        }
    }
}
