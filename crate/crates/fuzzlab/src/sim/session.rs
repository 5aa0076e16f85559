//! Captured sessions: ordered labeled packet sequences recorded at the
//! victim, with the attack-success verdict and scenario metadata.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::packet::Packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Pth,
    Arp,
    Dns,
    Telnet,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Pth, Scenario::Arp, Scenario::Dns, Scenario::Telnet];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Pth => "pth",
            Scenario::Arp => "arp",
            Scenario::Dns => "dns",
            Scenario::Telnet => "telnet",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scenario: {s}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Benign,
    Malicious,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Benign => "benign",
            Mode::Malicious => "malicious",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benign" => Ok(Mode::Benign),
            "malicious" => Ok(Mode::Malicious),
            other => Err(format!("unknown mode: {other}")),
        }
    }
}

/// Who sent the packet toward whom, as seen at the victim. c = client/user,
/// s = the victim server (or the user host for ARP), a = attacker,
/// g = upstream/global service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "c2s")]
    C2s,
    #[serde(rename = "s2c")]
    S2c,
    #[serde(rename = "a2s")]
    A2s,
    #[serde(rename = "s2a")]
    S2a,
    #[serde(rename = "s2g")]
    S2g,
    #[serde(rename = "g2s")]
    G2s,
}

/// Ground-truth role the driver assigned when emitting the packet. Used by
/// the per-packet labeling rules; not serialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketRole {
    /// Victim-side or client-side ordinary traffic.
    Client,
    /// Passive responses from the victim server.
    Server,
    /// Attacker packet carrying the attack content.
    Injected,
    /// Traffic after a reverse shell came up.
    PostShell,
    /// Testbed background chatter.
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malicious,
    Excluded,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malicious => "malicious",
            Label::Excluded => "excluded",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CapturedPacket {
    pub dir: Direction,
    pub packet: Packet,
    pub tick: u64,
    pub role: PacketRole,
}

/// One generation iteration as captured at the victim.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: u64,
    pub scenario: Scenario,
    pub mode: Mode,
    pub packets: Vec<CapturedPacket>,
    pub success: bool,
    pub meta: BTreeMap<String, String>,
}

impl Session {
    pub fn new(id: u64, scenario: Scenario, mode: Mode) -> Session {
        Session {
            id,
            scenario,
            mode,
            packets: Vec::new(),
            success: false,
            meta: BTreeMap::new(),
        }
    }

    pub fn capture(&mut self, dir: Direction, packet: Packet, tick: u64, role: PacketRole) {
        debug_assert!(packet.finalized(), "victims record only wire packets");
        self.packets.push(CapturedPacket {
            dir,
            packet,
            tick,
            role,
        });
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }
}
