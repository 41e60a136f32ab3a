//! Sweep configurations shipped with the binary.

use clap::ValueEnum;

pub const NAMES: [&str; 3] = ["fig3", "fig4", "fig5"];

/// `desk`: 100 nodes, seconds per sweep. `full`: 500 nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Desk,
    Full,
}

pub fn preset(name: &str, scale: Scale) -> Option<&'static str> {
    Some(match (name, scale) {
        ("fig3", Scale::Desk) => include_str!("../presets/fig3-desk.toml"),
        ("fig4", Scale::Desk) => include_str!("../presets/fig4-desk.toml"),
        ("fig5", Scale::Desk) => include_str!("../presets/fig5-desk.toml"),
        ("fig3", Scale::Full) => include_str!("../presets/fig3-full.toml"),
        ("fig4", Scale::Full) => include_str!("../presets/fig4-full.toml"),
        ("fig5", Scale::Full) => include_str!("../presets/fig5-full.toml"),
        _ => return None,
    })
}
