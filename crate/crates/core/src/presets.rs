//! Bundled example families.

use crate::model::{Mode, SpecDocument, TransitionRecord};

#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub file: &'static str,
    pub description: &'static str,
    build: fn() -> SpecDocument,
}

impl Preset {
    pub fn document(&self) -> SpecDocument {
        (self.build)()
    }
}

pub const PRESETS: [Preset; 4] = [
    Preset {
        name: "twowell",
        file: "twowell.json",
        description: "two wells {1,2} and {3,4} with polynomial leaks eps, eps^2, eps^3",
        build: two_well,
    },
    Preset {
        name: "twowell-exp",
        file: "twowell_exp.json",
        description: "two wells with exponential barriers exp(-V/eps^2)",
        build: two_well_exp,
    },
    Preset {
        name: "heteroclinic",
        file: "heteroclinic.json",
        description: "three saddles with log-corrected, target-dependent passage times",
        build: heteroclinic,
    },
    Preset {
        name: "renewal",
        file: "renewal.json",
        description: "alternating renewal process with mean sojourns 1 and eps",
        build: renewal,
    },
];

pub fn preset(name: &str) -> Option<Preset> {
    PRESETS.iter().copied().find(|p| p.name == name)
}

fn edge(from: &str, to: &str, p: &str, tau: &str) -> TransitionRecord {
    TransitionRecord {
        from: from.into(),
        to: to.into(),
        p: p.into(),
        tau: Some(tau.into()),
        sojourn: None,
    }
}

fn document(states: &[&str], transitions: Vec<TransitionRecord>, mode: Mode) -> SpecDocument {
    SpecDocument {
        basis: None,
        states: states.iter().map(|s| s.to_string()).collect(),
        transitions,
        mode,
        origin: None,
    }
}

pub fn two_well() -> SpecDocument {
    document(
        &["1", "2", "3", "4"],
        vec![
            edge("1", "2", "1", "1"),
            edge("1", "3", "eps", "1"),
            edge("2", "1", "1", "1"),
            edge("2", "4", "eps^2", "1"),
            edge("3", "1", "eps^2", "1"),
            edge("3", "4", "1", "1"),
            edge("4", "2", "eps^3", "1"),
            edge("4", "3", "1", "1"),
        ],
        Mode::Reduced,
    )
}

pub fn two_well_exp() -> SpecDocument {
    document(
        &["1", "2", "3", "4"],
        vec![
            edge("1", "2", "1", "1"),
            edge("1", "3", "exp_inv_eps_sq^-1", "1"),
            edge("2", "1", "1", "1"),
            edge("2", "4", "exp_inv_eps_sq^-2", "1"),
            edge("3", "1", "exp_inv_eps_sq^-2", "1"),
            edge("3", "4", "1", "1"),
            edge("4", "2", "exp_inv_eps_sq^-3", "1"),
            edge("4", "3", "1", "1"),
        ],
        Mode::Reduced,
    )
}

pub fn heteroclinic() -> SpecDocument {
    document(
        &["a", "b", "c"],
        vec![
            edge("a", "b", "1", "log_inv_eps"),
            edge("a", "c", "eps", "2*log_inv_eps"),
            edge("b", "a", "1/2", "log_inv_eps"),
            edge("b", "c", "1/2", "3*log_inv_eps*inv_eps^1/2"),
            edge("c", "a", "eps^2", "log_inv_eps*inv_eps"),
            edge("c", "b", "1", "2*log_inv_eps*inv_eps^1/2"),
        ],
        Mode::Raw,
    )
}

pub fn renewal() -> SpecDocument {
    document(
        &["1", "2"],
        vec![edge("1", "2", "1", "1"), edge("2", "1", "1", "eps")],
        Mode::Reduced,
    )
}
