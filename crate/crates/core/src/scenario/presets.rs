//! Scenario files shipped with the crate.

const PRESETS: &[(&str, &str)] = &[
    ("micro_dumbbell_100g", include_str!("../../presets/micro_dumbbell_100g.toml")),
    ("micro_dumbbell_200g", include_str!("../../presets/micro_dumbbell_200g.toml")),
    ("micro_dumbbell_400g", include_str!("../../presets/micro_dumbbell_400g.toml")),
    ("fairness_4flow", include_str!("../../presets/fairness_4flow.toml")),
    ("congestion_firsthop", include_str!("../../presets/congestion_firsthop.toml")),
    ("congestion_middlehop", include_str!("../../presets/congestion_middlehop.toml")),
    ("congestion_lasthop", include_str!("../../presets/congestion_lasthop.toml")),
    ("fattree_k4_load50", include_str!("../../presets/fattree_k4_load50.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// First comment line of a preset, used as its description.
pub fn describe(text: &str) -> &str {
    text.lines()
        .find_map(|l| l.strip_prefix('#'))
        .map(str::trim)
        .unwrap_or("")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::{Scenario, TopologyKind};
    use std::path::Path;

    #[test]
    fn every_preset_parses_and_names_match() {
        for name in preset_names() {
            let s = Scenario::parse(preset(name).unwrap(), Path::new("."), &[])
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.config.name, name);
            assert!(!describe(preset(name).unwrap()).is_empty(), "{name}");
        }
    }

    #[test]
    fn micro_dumbbell_parameters() {
        let c = Scenario::parse(preset("micro_dumbbell_100g").unwrap(), Path::new("."), &[])
            .unwrap()
            .config;
        assert_eq!(c.topology.kind, TopologyKind::Dumbbell);
        assert_eq!(c.topology.switches, Some(3));
        assert_eq!(c.topology.senders, Some(2));
        assert_eq!(c.topology.rate, 100_000_000_000);
        assert_eq!(c.topology.delay.as_ns(), 1500);
        assert!(c.pfc.enabled);
        assert_eq!(c.pfc.pause_threshold, 500_000);
        assert_eq!(c.workload.flows[1].start.as_ns(), 300_000);
    }
}
