//! Scenario files shipped with the crate.

use super::config::{ConfigError, ScenarioConfig};

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        /// `(name, json)` for every bundled scenario.
        pub const BUNDLED: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../scenarios/", $name, ".json")))),*
        ];
    };
}

bundled!(
    "baseline_perfect",
    "jitter_only",
    "heavy_tail_jitter",
    "nse_sequential_feed",
    "nse_randomized_feed",
    "cme_gateway_broadcast",
    "switch_truncation",
    "optimistic_messaging",
    "ebs_fast_link",
    "ebs_fast_link_speedbump",
    "batch_window",
    "port_offset_1ms",
);

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_json(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, j)| *j)
}

pub fn bundled(name: &str) -> Option<Result<ScenarioConfig, ConfigError>> {
    bundled_json(name).map(ScenarioConfig::from_json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_scenario_validates_under_its_name() {
        for (name, json) in BUNDLED {
            let cfg = ScenarioConfig::from_json(json).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, *name);
        }
    }
}
