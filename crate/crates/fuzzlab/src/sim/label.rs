//! Labeling rules.
//!
//! PtH, ARP, and DNS label at session granularity: benign sessions stay
//! benign even when the operation failed, failed malicious sessions are
//! dropped because they caused no real malicious impact. TELNET labels per
//! packet: client commands are benign, the injected command is malicious,
//! server responses and post-shell TCP traffic are excluded.

use super::session::{Label, Mode, PacketRole, Scenario, Session};
use super::SimError;

#[derive(Debug, Clone)]
pub struct LabeledSession {
    pub session: Session,
    /// One label per captured packet.
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone)]
pub struct LabeledCapture {
    pub scenario: Scenario,
    pub sessions: Vec<LabeledSession>,
    /// Failed malicious sessions removed by the session-level rules.
    pub dropped: usize,
}

pub fn label_sessions(sessions: &[Session]) -> Result<LabeledCapture, SimError> {
    let scenario = match sessions.first() {
        Some(s) => s.scenario,
        None => {
            return Ok(LabeledCapture {
                scenario: Scenario::Pth,
                sessions: Vec::new(),
                dropped: 0,
            })
        }
    };
    if let Some(other) = sessions.iter().find(|s| s.scenario != scenario) {
        return Err(SimError::MixedScenario(scenario, other.scenario));
    }

    let mut out = Vec::with_capacity(sessions.len());
    let mut dropped = 0;
    for session in sessions {
        let labels = match scenario {
            Scenario::Telnet => per_packet_labels(session),
            _ => match (session.mode, session.success) {
                (Mode::Benign, _) => vec![Label::Benign; session.packets.len()],
                (Mode::Malicious, true) => vec![Label::Malicious; session.packets.len()],
                (Mode::Malicious, false) => {
                    dropped += 1;
                    continue;
                }
            },
        };
        out.push(LabeledSession {
            session: session.clone(),
            labels,
        });
    }
    Ok(LabeledCapture {
        scenario,
        sessions: out,
        dropped,
    })
}

fn per_packet_labels(session: &Session) -> Vec<Label> {
    session
        .packets
        .iter()
        .map(|p| match p.role {
            PacketRole::Client | PacketRole::Background => Label::Benign,
            PacketRole::Injected => Label::Malicious,
            PacketRole::Server | PacketRole::PostShell => Label::Excluded,
        })
        .collect()
}
