//! Shipped experiment presets.

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: [Preset; 6] = [
    Preset {
        name: "desitter_u1_small",
        description: "u(1) toy model, de Sitter, small data; constraints, energy, decay, refinement",
        toml: include_str!("../presets/desitter_u1_small.toml"),
    },
    Preset {
        name: "desitter_su2_small",
        description: "su(2) electroweak toy model, de Sitter, small data; constraints, energy, decay, refinement",
        toml: include_str!("../presets/desitter_su2_small.toml"),
    },
    Preset {
        name: "bianchi1_su2",
        description: "su(2) on an exponential background with anisotropic Bianchi I slices",
        toml: include_str!("../presets/bianchi1_su2.toml"),
    },
    Preset {
        name: "gauge_invariance",
        description: "energies of data and of a gauge transform of it along two runs",
        toml: include_str!("../presets/gauge_invariance.toml"),
    },
    Preset {
        name: "automorphism_check",
        description: "temporal coefficient of the connection transformed by g built from α",
        toml: include_str!("../presets/automorphism_check.toml"),
    },
    Preset {
        name: "convergence_study",
        description: "wave-system oracles and conformal residual under refinement",
        toml: include_str!("../presets/convergence_study.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    pub fn config(&self) -> Result<RunConfig, CliError> {
        RunConfig::from_toml_str(self.toml)
    }
}
