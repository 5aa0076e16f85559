//! The four simulated testbeds with victim-side capture.
//!
//! Each scenario drives protocol endpoints as small state machines over a
//! virtual-tick LAN, captures packets at the victim, and records enough
//! session metadata for the per-scenario success oracles. Iterations are
//! independent simulations seeded per index, so generation parallelizes
//! without changing output.

pub mod arp;
pub mod commands;
pub mod dns;
pub mod label;
pub mod lan;
pub mod pth;
pub mod session;
pub mod telnet;

pub use label::{label_sessions, LabeledCapture, LabeledSession};
pub use session::{CapturedPacket, Direction, Label, Mode, PacketRole, Scenario, Session};

use rayon::prelude::*;
use thiserror::Error;

use crate::fuzz::{FuzzError, FuzzPlan, SuccessOracle};
use crate::packet::{FieldPath, LayerKind, PacketError};
use crate::rng::{derive_seed_indexed, rng_from, Rng};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("plan field {field} does not apply to scenario {scenario}")]
    InvalidPlanForScenario { scenario: Scenario, field: String },
    #[error("session {0} has no packets")]
    IncompleteSession(u64),
    #[error("sessions from mixed scenarios: {0} and {1}")]
    MixedScenario(Scenario, Scenario),
    #[error(transparent)]
    Fuzz(#[from] FuzzError),
    #[error(transparent)]
    Packet(#[from] PacketError),
}

/// Layers a scenario's packets may carry, for plan validation.
fn scenario_layers(kind: Scenario) -> &'static [LayerKind] {
    match kind {
        Scenario::Pth => &[LayerKind::Eth, LayerKind::Ip, LayerKind::Tcp, LayerKind::Authp],
        Scenario::Arp => &[LayerKind::Eth, LayerKind::Arp],
        Scenario::Dns => &[LayerKind::Eth, LayerKind::Ip, LayerKind::Udp, LayerKind::Dns],
        Scenario::Telnet => &[LayerKind::Eth, LayerKind::Ip, LayerKind::Tcp, LayerKind::Telnet],
    }
}

fn validate_plan(kind: Scenario, plan: &FuzzPlan) -> Result<(), SimError> {
    let layers = scenario_layers(kind);
    for f in &plan.fields {
        if !layers.contains(&f.layer) {
            return Err(SimError::InvalidPlanForScenario {
                scenario: kind,
                field: f.to_string(),
            });
        }
    }
    Ok(())
}

/// Runs `iterations` independent sessions. Per-iteration seeds derive from
/// (seed, scenario, iteration index); the rayon fan-out keeps output
/// identical for any worker count.
pub fn run_scenario(
    kind: Scenario,
    mode: Mode,
    iterations: u64,
    plan: &FuzzPlan,
    seed: u64,
) -> Result<Vec<Session>, SimError> {
    validate_plan(kind, plan)?;
    let label = format!("sim-{kind}");
    (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(derive_seed_indexed(seed, &label, i));
            run_one(kind, mode, i, plan, &mut rng)
        })
        .collect()
}

fn run_one(
    kind: Scenario,
    mode: Mode,
    id: u64,
    plan: &FuzzPlan,
    rng: &mut Rng,
) -> Result<Session, SimError> {
    match kind {
        Scenario::Pth => pth::run_session(mode, id, plan, rng),
        Scenario::Arp => arp::run_session(mode, id, plan, rng),
        Scenario::Dns => dns::run_session(mode, id, plan, rng),
        Scenario::Telnet => telnet::run_session(mode, id, plan, rng),
    }
}

/// Recomputes the scenario's success verdict from session contents and
/// metadata alone.
pub fn attack_success(session: &Session) -> Result<bool, SimError> {
    if session.packets.is_empty() {
        return Err(SimError::IncompleteSession(session.id));
    }
    Ok(match session.scenario {
        Scenario::Pth | Scenario::Telnet => {
            session.meta.get("reverse_shell").map(String::as_str) == Some("true")
        }
        Scenario::Arp => {
            let owned: Vec<&str> = session
                .meta
                .get("owned_macs")
                .map(|s| s.split(',').collect())
                .unwrap_or_default();
            session
                .meta
                .get("victim_cache")
                .map(|cache| {
                    cache
                        .split(',')
                        .filter(|e| !e.is_empty())
                        .any(|entry| match entry.split_once(':') {
                            Some((_ip, mac)) => !owned.contains(&mac),
                            None => false,
                        })
                })
                .unwrap_or(false)
        }
        Scenario::Dns => {
            let user = session.meta.get("user_result_ip");
            let truth = session.meta.get("truth_ip");
            matches!((user, truth), (Some(u), Some(t)) if u != t)
        }
    })
}

/// Candidate fuzz fields for a scenario, in schema order.
pub fn scenario_alist(kind: Scenario) -> Vec<FieldPath> {
    match kind {
        Scenario::Pth => pth::alist(),
        Scenario::Arp => arp::alist(),
        Scenario::Dns => dns::alist(),
        Scenario::Telnet => telnet::alist(),
    }
}

/// The fields the selection accepts for a scenario, shipped as the default
/// plan. `select-fields` reproduces these from the candidate list.
pub fn default_plan(kind: Scenario, seed: u64) -> FuzzPlan {
    let fields = match kind {
        Scenario::Pth => pth::accepted_fields(),
        Scenario::Arp => arp::accepted_fields(),
        Scenario::Dns => dns::accepted_fields(),
        Scenario::Telnet => telnet::accepted_fields(),
    };
    FuzzPlan::new(fields, seed).expect("default plan fields are fuzzable")
}

/// Success oracle that launches one malicious iteration with the candidate
/// field set fuzzed.
pub struct ScenarioOracle {
    kind: Scenario,
}

impl ScenarioOracle {
    pub fn new(kind: Scenario) -> ScenarioOracle {
        ScenarioOracle { kind }
    }
}

impl SuccessOracle for ScenarioOracle {
    fn trial(&self, fuzzed: &[FieldPath], rng: &mut Rng) -> bool {
        use rand::Rng as _;
        let plan = FuzzPlan {
            fields: fuzzed.to_vec(),
            seed: rng.gen(),
        };
        run_one(self.kind, Mode::Malicious, 0, &plan, rng)
            .map(|s| s.success)
            .unwrap_or(false)
    }
}
