//! Pass-the-hash testbed over AUTHP, the lab's stateful challenge-response
//! protocol. The benign client logs in with a password proof; the attacker
//! replays a dumped hash through the hash-only mechanism and, once
//! authenticated, establishes a reverse shell. Capture happens at the
//! server.

use rand::Rng as _;

use crate::fuzz::{fuzz_packet, FuzzPlan};
use crate::packet::layers::{authp_mech, authp_stage};
use crate::packet::{FieldPath, LayerKind, Packet};
use crate::rng::{keyed_hash, Rng};
use crate::sim::commands::{cmd_class, pick_command};
use crate::sim::lan::{lab_mac, pool_ip, HostRole, Lan};
use crate::sim::session::{Direction, Mode, PacketRole, Scenario, Session};
use crate::sim::SimError;

const PASSWORD: &[u8] = b"correct-staple-battery";
const HASH_KEY: u64 = 0x50a55;
/// Exploit phase runs this long before the shell check (the foreground wait).
const EXPLOIT_WAIT_TICKS: u64 = 25;
/// Benign logins mistype the password at this rate.
const TYPO_RATE: f64 = 0.10;

fn stored_hash() -> u64 {
    keyed_hash(HASH_KEY, PASSWORD)
}

fn proof(challenge: u64, secret: u64) -> u64 {
    let mut data = challenge.to_be_bytes().to_vec();
    data.extend_from_slice(&secret.to_be_bytes());
    keyed_hash(HASH_KEY, &data)
}

/// Secret for the password route: the password itself, not its hash, so the
/// two mechanisms verify along genuinely different routes.
fn password_secret() -> u64 {
    keyed_hash(HASH_KEY ^ 1, PASSWORD)
}

pub fn alist() -> Vec<FieldPath> {
    [
        "stage",
        "mechanism",
        "command",
        "dialect",
        "credit",
        "flags",
        "capabilities",
        "session_token",
        "reserved0",
        "reserved1",
        "reserved2",
        "reserved3",
        "reserved4",
        "reserved5",
        "reserved6",
        "reserved7",
        "reserved8",
        "reserved9",
        "reserved10",
        "reserved11",
    ]
    .iter()
    .map(|f| FieldPath::new(LayerKind::Authp, f))
    .collect()
}

/// The selection rejects stage, mechanism, and command: fuzzing any of them
/// drives the success rate under the threshold.
pub fn accepted_fields() -> Vec<FieldPath> {
    alist()
        .into_iter()
        .filter(|f| !matches!(f.field.as_str(), "stage" | "mechanism" | "command"))
        .collect()
}

struct Testbed {
    lan: Lan,
    server: usize,
    actor: usize,
}

fn testbed(mode: Mode, rng: &mut Rng) -> Testbed {
    let mut lan = Lan::new(2, 254);
    let server = lan.add_external_host(HostRole::Server, lab_mac(1), pool_ip(2));
    let client = lan.add_external_host(HostRole::Client, lab_mac(2), pool_ip(3));
    let attacker = lan.add_external_host(HostRole::Attacker, lab_mac(3), pool_ip(4));
    let _ = rng;
    Testbed {
        lan,
        server,
        actor: match mode {
            Mode::Benign => client,
            Mode::Malicious => attacker,
        },
    }
}

struct Flow<'a> {
    bed: &'a Testbed,
    plan: &'a FuzzPlan,
    token: u64,
    src_port: u64,
    actor_seq: u64,
    server_seq: u64,
    actor_ip_id: u64,
    server_ip_id: u64,
}

impl<'a> Flow<'a> {
    fn base_packet(&mut self, from_actor: bool) -> Packet {
        let (src, dst) = if from_actor {
            (self.bed.lan.host(self.bed.actor), self.bed.lan.host(self.bed.server))
        } else {
            (self.bed.lan.host(self.bed.server), self.bed.lan.host(self.bed.actor))
        };
        let (sport, dport) = if from_actor {
            (self.src_port, 445)
        } else {
            (445, self.src_port)
        };
        let (seq, ack, ip_id) = if from_actor {
            self.actor_ip_id += 1;
            (self.actor_seq, self.server_seq, self.actor_ip_id - 1)
        } else {
            self.server_ip_id += 1;
            (self.server_seq, self.actor_seq, self.server_ip_id - 1)
        };
        Packet::new(&[LayerKind::Eth, LayerKind::Ip, LayerKind::Tcp, LayerKind::Authp])
            .unwrap()
            .set_int(LayerKind::Eth, "dst_mac", dst.mac)
            .unwrap()
            .set_int(LayerKind::Eth, "src_mac", src.mac)
            .unwrap()
            .set_int(LayerKind::Ip, "tos", 0)
            .unwrap()
            .set_int(LayerKind::Ip, "id", ip_id)
            .unwrap()
            .set_int(LayerKind::Ip, "flags", 2)
            .unwrap()
            .set_int(LayerKind::Ip, "ttl", 64)
            .unwrap()
            .set_int(LayerKind::Ip, "src_ip", src.ip)
            .unwrap()
            .set_int(LayerKind::Ip, "dst_ip", dst.ip)
            .unwrap()
            .set_int(LayerKind::Tcp, "src_port", sport)
            .unwrap()
            .set_int(LayerKind::Tcp, "dst_port", dport)
            .unwrap()
            .set_int(LayerKind::Tcp, "seq", seq)
            .unwrap()
            .set_int(LayerKind::Tcp, "ack", ack)
            .unwrap()
            .set_int(LayerKind::Tcp, "flags", 0x18)
            .unwrap()
            .set_int(LayerKind::Tcp, "window", 4096)
            .unwrap()
            .set_int(LayerKind::Tcp, "urgent_ptr", 0)
            .unwrap()
    }

    fn authp(&mut self, from_actor: bool, stage: u64, mech: u64, command: u64, payload: &[u8]) -> Packet {
        let p = self
            .base_packet(from_actor)
            .set_int(LayerKind::Authp, "stage", stage)
            .unwrap()
            .set_int(LayerKind::Authp, "mechanism", mech)
            .unwrap()
            .set_int(LayerKind::Authp, "command", command)
            .unwrap()
            .set_int(LayerKind::Authp, "dialect", 2)
            .unwrap()
            .set_int(LayerKind::Authp, "credit", 64)
            .unwrap()
            .set_int(LayerKind::Authp, "flags", 0)
            .unwrap()
            .set_int(LayerKind::Authp, "capabilities", 0)
            .unwrap()
            .set_int(LayerKind::Authp, "session_token", self.token)
            .unwrap();
        let mut p = p;
        for i in 0..12 {
            p = p.set_int(LayerKind::Authp, &format!("reserved{i}"), 0).unwrap();
        }
        p.set_bytes(LayerKind::Authp, "payload", payload.to_vec()).unwrap()
    }

    /// Client-side packets go through the fuzzer before they hit the wire.
    fn send_actor(&mut self, stage: u64, mech: u64, command: u64, payload: &[u8], rng: &mut Rng) -> Result<Packet, SimError> {
        let p = self.authp(true, stage, mech, command, payload);
        let fuzzed = fuzz_packet(&p, self.plan, rng)?;
        let done = fuzzed.finalize()?;
        self.actor_seq = (self.actor_seq + payload.len().max(1) as u64) & 0xffff_ffff;
        Ok(done)
    }

    fn send_server(&mut self, stage: u64, mech: u64, payload: &[u8]) -> Result<Packet, SimError> {
        let p = self.authp(false, stage, mech, cmd_class::NONE, payload);
        let done = p.finalize()?;
        self.server_seq = (self.server_seq + payload.len().max(1) as u64) & 0xffff_ffff;
        Ok(done)
    }
}

pub fn run_session(mode: Mode, id: u64, plan: &FuzzPlan, rng: &mut Rng) -> Result<Session, SimError> {
    let bed = testbed(mode, rng);
    let mut session = Session::new(id, Scenario::Pth, mode);
    let (to_srv, from_srv, actor_role) = match mode {
        Mode::Benign => (Direction::C2s, Direction::S2c, PacketRole::Client),
        Mode::Malicious => (Direction::A2s, Direction::S2a, PacketRole::Injected),
    };

    let mut flow = Flow {
        bed: &bed,
        plan,
        token: rng.gen::<u32>() as u64,
        src_port: rng.gen_range(49152..65536),
        actor_seq: rng.gen::<u32>() as u64,
        server_seq: rng.gen::<u32>() as u64,
        actor_ip_id: 0,
        server_ip_id: 0,
    };

    let true_mech = match mode {
        Mode::Benign => authp_mech::PASSWORD_PROOF,
        Mode::Malicious => authp_mech::HASH_ONLY,
    };
    let typo = mode == Mode::Benign && rng.gen_bool(TYPO_RATE);
    let (command_str, command_class) = match mode {
        Mode::Benign => pick_command(rng),
        Mode::Malicious => ("spawn-agent", cmd_class::SHELL),
    };

    let mut tick = 0u64;
    let cap = |session: &mut Session, dir, p: Packet, role, t: &mut u64| {
        session.capture(dir, p, *t, role);
        *t += 1;
    };

    // Stage 1: negotiation.
    let p = flow.send_actor(authp_stage::NEGOTIATE, true_mech, cmd_class::NONE, b"", rng)?;
    let negotiate_ok = p.get_int(LayerKind::Authp, "stage") == Some(authp_stage::NEGOTIATE);
    cap(&mut session, to_srv, p, actor_role, &mut tick);
    let p = flow.send_server(authp_stage::NEGOTIATE, true_mech, b"")?;
    cap(&mut session, from_srv, p, PacketRole::Server, &mut tick);

    // Stage 2: authentication.
    let p = flow.send_actor(authp_stage::AUTH_REQUEST, true_mech, cmd_class::NONE, b"operator", rng)?;
    let request_ok = p.get_int(LayerKind::Authp, "stage") == Some(authp_stage::AUTH_REQUEST);
    cap(&mut session, to_srv, p, actor_role, &mut tick);

    let challenge: u64 = rng.gen();
    let p = flow.send_server(authp_stage::CHALLENGE, true_mech, &challenge.to_be_bytes())?;
    cap(&mut session, from_srv, p, PacketRole::Server, &mut tick);

    let true_secret = match (mode, typo) {
        (Mode::Benign, false) => password_secret(),
        (Mode::Benign, true) => password_secret() ^ 0x5a5a, // mistyped password
        (Mode::Malicious, _) => stored_hash(),
    };
    let response = proof(challenge, true_secret);
    let p = flow.send_actor(
        authp_stage::CHALLENGE_RESPONSE,
        true_mech,
        cmd_class::NONE,
        &response.to_be_bytes(),
        rng,
    )?;
    // The server verifies the claimed mechanism as it appears on the wire.
    let claimed_mech = p.get_int(LayerKind::Authp, "mechanism").unwrap();
    let response_ok = p.get_int(LayerKind::Authp, "stage") == Some(authp_stage::CHALLENGE_RESPONSE);
    cap(&mut session, to_srv, p, actor_role, &mut tick);

    let expected = match claimed_mech {
        authp_mech::PASSWORD_PROOF => Some(proof(challenge, password_secret())),
        authp_mech::HASH_ONLY => Some(proof(challenge, stored_hash())),
        _ => None,
    };
    let auth_ok =
        negotiate_ok && request_ok && response_ok && expected == Some(response);
    let p = flow.send_server(authp_stage::AUTH_RESPONSE, claimed_mech, &[u8::from(auth_ok)])?;
    cap(&mut session, from_srv, p, PacketRole::Server, &mut tick);
    session.set_meta("auth_ok", auth_ok);
    session.set_meta("mechanism", claimed_mech);

    let mut shell = false;
    if auth_ok {
        if mode == Mode::Malicious {
            tick += EXPLOIT_WAIT_TICKS;
        }
        // Stage 3: task execution.
        let p = flow.send_actor(authp_stage::TASK, true_mech, command_class, command_str.as_bytes(), rng)?;
        let wire_stage = p.get_int(LayerKind::Authp, "stage");
        let wire_command = p.get_int(LayerKind::Authp, "command");
        cap(&mut session, to_srv, p, actor_role, &mut tick);
        let executed = wire_stage == Some(authp_stage::TASK);
        let output: &[u8] = if executed { b"ok" } else { b"err" };
        let p = flow.send_server(authp_stage::TASK, claimed_mech, output)?;
        cap(&mut session, from_srv, p, PacketRole::Server, &mut tick);

        shell = mode == Mode::Malicious && executed && wire_command == Some(cmd_class::SHELL);
        if shell {
            // Reverse shell control traffic: plain TCP, captured but never
            // part of the AUTHP detection data.
            for (dir, payload) in [(from_srv, &b"shell ready"[..]), (to_srv, &b"id"[..])] {
                let template = flow.base_packet(dir == to_srv);
                let p = rebuild_as_tcp(&template, payload)?;
                cap(&mut session, dir, p, PacketRole::PostShell, &mut tick);
            }
        }
    }

    session.set_meta("reverse_shell", shell);
    session.success = match mode {
        Mode::Benign => auth_ok,
        Mode::Malicious => shell,
    };
    Ok(session)
}

fn rebuild_as_tcp(authp_packet: &Packet, payload: &[u8]) -> Result<Packet, SimError> {
    let mut p = Packet::new(&[LayerKind::Eth, LayerKind::Ip, LayerKind::Tcp])?;
    for layer in [LayerKind::Eth, LayerKind::Ip, LayerKind::Tcp] {
        let schema = crate::packet::LayerSchema::get(layer);
        for f in schema.fields {
            if f.is_computed() || f.is_variable() {
                continue;
            }
            if let Some(v) = authp_packet.get(&FieldPath::new(layer, f.name)) {
                p = p.set_field(&FieldPath::new(layer, f.name), v.clone())?;
            }
        }
    }
    Ok(p.set_bytes(LayerKind::Tcp, "payload", payload.to_vec())?.finalize()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::sim::attack_success;

    #[test]
    fn unfuzzed_attack_always_succeeds() {
        let plan = FuzzPlan::empty(0);
        for i in 0..50 {
            let mut rng = rng_from(1000 + i);
            let s = run_session(Mode::Malicious, i, &plan, &mut rng).unwrap();
            assert!(s.success, "iteration {i}");
            assert!(attack_success(&s).unwrap());
        }
    }

    #[test]
    fn benign_sessions_use_the_password_mechanism() {
        let plan = FuzzPlan::empty(0);
        let mut rng = rng_from(7);
        let s = run_session(Mode::Benign, 0, &plan, &mut rng).unwrap();
        assert_eq!(s.meta["mechanism"], authp_mech::PASSWORD_PROOF.to_string());
        assert!(!attack_success(&s).unwrap(), "no reverse shell in benign runs");
    }

    #[test]
    fn benign_typos_fail_but_sessions_complete() {
        let plan = FuzzPlan::empty(0);
        let mut failures = 0;
        for i in 0..200 {
            let mut rng = rng_from(i);
            let s = run_session(Mode::Benign, i, &plan, &mut rng).unwrap();
            if !s.success {
                failures += 1;
                assert!(!s.packets.is_empty());
            }
        }
        // TYPO_RATE = 0.1 over 200 seeded runs.
        assert!((10..=35).contains(&failures), "{failures} failed logins");
    }

    #[test]
    fn fuzzing_the_accepted_fields_keeps_the_attack_alive() {
        let plan = FuzzPlan::new(accepted_fields(), 3).unwrap();
        let mut ok = 0;
        for i in 0..100 {
            let mut rng = rng_from(2000 + i);
            let s = run_session(Mode::Malicious, i, &plan, &mut rng).unwrap();
            ok += u32::from(s.success);
        }
        assert_eq!(ok, 100);
    }

    #[test]
    fn fuzzing_the_mechanism_breaks_most_attacks() {
        let plan = FuzzPlan::new(vec![FieldPath::new(LayerKind::Authp, "mechanism")], 4).unwrap();
        let mut ok = 0;
        for i in 0..300 {
            let mut rng = rng_from(3000 + i);
            let s = run_session(Mode::Malicious, i, &plan, &mut rng).unwrap();
            ok += u32::from(s.success);
        }
        // Only the hash_only draw (1 of 3) authenticates.
        let rate = f64::from(ok) / 300.0;
        assert!(rate < 0.5, "rate {rate}");
    }

    #[test]
    fn sessions_are_deterministic_per_seed() {
        let plan = FuzzPlan::new(accepted_fields(), 5).unwrap();
        let a = run_session(Mode::Malicious, 9, &plan, &mut rng_from(99)).unwrap();
        let b = run_session(Mode::Malicious, 9, &plan, &mut rng_from(99)).unwrap();
        assert_eq!(a.packets.len(), b.packets.len());
        for (x, y) in a.packets.iter().zip(&b.packets) {
            assert_eq!(x.packet.raw(), y.packet.raw());
        }
    }
}
