//! Scenario files shipped with the binary.

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: [Preset; 4] = [
    Preset {
        name: "fig2",
        summary: "asymmetric rotor in a ring trap, exact against effective dynamics",
        text: include_str!("../presets/fig2.toml"),
    },
    Preset {
        name: "fig4",
        summary: "point charge in a ring trap with gas damping, 32 members",
        text: include_str!("../presets/fig4.toml"),
    },
    Preset {
        name: "fig5",
        summary: "staged circuit cooling of a rod in a linear trap",
        text: include_str!("../presets/fig5.toml"),
    },
    Preset {
        name: "fig6",
        summary: "fig2 rotor sampled finely enough to resolve micromotion",
        text: include_str!("../presets/fig6.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
