//! Scenario files shipped with the binary.

use crate::config::{ConfigError, Scenario};

pub const SCENARIOS: &[(&str, &str)] = &[
    ("wnv_spreading", include_str!("../scenarios/wnv_spreading.json")),
    ("wnv_vanishing", include_str!("../scenarios/wnv_vanishing.json")),
    ("fb_wnv_powerlaw15", include_str!("../scenarios/fb_wnv_powerlaw15.json")),
    ("fb_wnv_powerlaw2", include_str!("../scenarios/fb_wnv_powerlaw2.json")),
    ("cauchy_wnv_laplace", include_str!("../scenarios/cauchy_wnv_laplace.json")),
    ("cauchy_wnv_powerlaw15", include_str!("../scenarios/cauchy_wnv_powerlaw15.json")),
    ("speeds_wnv_laplace", include_str!("../scenarios/speeds_wnv_laplace.json")),
    ("speeds_wnv_powerlaw", include_str!("../scenarios/speeds_wnv_powerlaw.json")),
];

pub const FB_SCENARIOS: &[&str] = &["wnv_spreading", "wnv_vanishing", "fb_wnv_powerlaw15", "fb_wnv_powerlaw2"];
pub const CAUCHY_SCENARIOS: &[&str] = &["cauchy_wnv_laplace", "cauchy_wnv_powerlaw15"];

pub fn text(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn scenario(name: &str) -> Result<Scenario, ConfigError> {
    let t = text(name).ok_or_else(|| ConfigError::at("", format!("no bundled scenario '{name}'")))?;
    Scenario::from_str(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_scenarios_parse_and_build() {
        for (name, _) in SCENARIOS {
            let s = scenario(name).unwrap();
            assert_eq!(&s.name, name);
            if FB_SCENARIOS.contains(name) {
                s.fb_config().unwrap();
            } else if CAUCHY_SCENARIOS.contains(name) {
                s.cauchy_config().unwrap();
            } else {
                let m = s.build_model().unwrap();
                s.build_kernels(m.m0()).unwrap();
                s.speed_mus(m.m0()).unwrap();
            }
        }
    }
}
