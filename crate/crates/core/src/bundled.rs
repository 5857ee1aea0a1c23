//! Scenario files shipped with the crate: the two- and three-mode example
//! networks under each routing family.

use crate::scenario_file::{parse_scenario, ScenarioFile};

pub const TWOMODE_MODE_RESPONSIVE: &str = include_str!("../scenarios/twomode_mode_responsive.scn");
pub const TWOMODE_PWA: &str = include_str!("../scenarios/twomode_pwa.scn");
pub const TWOMODE_LOGIT: &str = include_str!("../scenarios/twomode_logit.scn");
pub const THREEMODE_MODE_RESPONSIVE: &str =
    include_str!("../scenarios/threemode_mode_responsive.scn");
pub const THREEMODE_PWA: &str = include_str!("../scenarios/threemode_pwa.scn");
pub const THREEMODE_LOGIT: &str = include_str!("../scenarios/threemode_logit.scn");

/// `(name, text)` for every bundled file; names omit the `.scn` suffix.
pub const ALL: &[(&str, &str)] = &[
    ("twomode_mode_responsive", TWOMODE_MODE_RESPONSIVE),
    ("twomode_pwa", TWOMODE_PWA),
    ("twomode_logit", TWOMODE_LOGIT),
    ("threemode_mode_responsive", THREEMODE_MODE_RESPONSIVE),
    ("threemode_pwa", THREEMODE_PWA),
    ("threemode_logit", THREEMODE_LOGIT),
];

pub fn text(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".scn").unwrap_or(name);
    ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a bundled file. Panics on an unknown name; the files themselves
/// are checked by the test suite.
pub fn load(name: &str) -> ScenarioFile {
    let text = text(name).unwrap_or_else(|| panic!("no bundled scenario `{name}`"));
    parse_scenario(text).expect("bundled scenario parses")
}
