//! ARP poisoning testbed.
//!
//! The LAN runs a router (also the DHCP server), a DNS box, the user
//! machine, and the attacker. Every session re-randomizes identities of all
//! hosts except the DHCP server. Benign sessions sweep the whole subnet
//! range with probe requests; malicious sessions add unsolicited spoofed
//! replies whose sender mapping poisons the user's cache. Capture happens
//! at the user machine: its own transmissions, broadcasts, and unicast
//! frames addressed to it.
//!
//! Requests fill the target hardware address with ff:ff:ff:ff:ff:ff, the
//! probe convention of the lab's scanner.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::fuzz::{reroll_identity, FuzzPlan};
use crate::packet::{FieldPath, LayerKind, Packet, MAC_BROADCAST};
use crate::rng::Rng;
use crate::sim::lan::{lab_mac, pool_ip, HostRole, Lan, MAC_HOST_OCTETS};
use crate::sim::session::{Direction, Mode, PacketRole, Scenario, Session};
use crate::sim::SimError;

/// DHCP pool of the ARP testbed; the sweep still probes the whole subnet.
const ARP_POOL: (u64, u64) = (2, 30);
/// Router gateway probes per benign session.
const BENIGN_PROBES: usize = 6;
/// Background packets in malicious sessions.
const MAL_PROBES: usize = 2;
/// Spoofed replies per malicious session.
const SPOOFS: usize = 17;
/// Fraction of spoofs sent unicast to the victim; the rest go out as
/// gratuitous broadcasts.
const UNICAST_SPOOF_RATE: f64 = 0.6;
/// Fraction of spoofs claiming the victim's own binding; the rest claim
/// another leased address.
const SELF_CLAIM_RATE: f64 = 0.5;

pub fn alist() -> Vec<FieldPath> {
    vec![
        FieldPath::new(LayerKind::Eth, "dst_mac"),
        FieldPath::new(LayerKind::Eth, "src_mac"),
        FieldPath::new(LayerKind::Arp, "sender_mac"),
        FieldPath::new(LayerKind::Arp, "sender_ip"),
        FieldPath::new(LayerKind::Arp, "target_mac"),
        FieldPath::new(LayerKind::Arp, "target_ip"),
    ]
}

/// Every address field survives selection: address randomization runs
/// through identity rerolls and spoof procedures that keep the poisoning
/// effective.
pub fn accepted_fields() -> Vec<FieldPath> {
    alist()
}

struct ArpPacket {
    dst: u64,
    src: u64,
    oper: u64,
    smac: u64,
    sip: u64,
    tmac: u64,
    tip: u64,
}

fn build(a: &ArpPacket) -> Result<Packet, SimError> {
    Ok(Packet::new(&[LayerKind::Eth, LayerKind::Arp])?
        .set_int(LayerKind::Eth, "dst_mac", a.dst)?
        .set_int(LayerKind::Eth, "src_mac", a.src)?
        .set_int(LayerKind::Arp, "oper", a.oper)?
        .set_int(LayerKind::Arp, "sender_mac", a.smac)?
        .set_int(LayerKind::Arp, "sender_ip", a.sip)?
        .set_int(LayerKind::Arp, "target_mac", a.tmac)?
        .set_int(LayerKind::Arp, "target_ip", a.tip)?
        .finalize()?)
}

fn request(src_mac: u64, src_ip: u64, target_ip: u64) -> ArpPacket {
    ArpPacket {
        dst: MAC_BROADCAST,
        src: src_mac,
        oper: 1,
        smac: src_mac,
        sip: src_ip,
        tmac: MAC_BROADCAST,
        tip: target_ip,
    }
}

fn reply(from_mac: u64, from_ip: u64, to_mac: u64, to_ip: u64) -> ArpPacket {
    ArpPacket {
        dst: to_mac,
        src: from_mac,
        oper: 2,
        smac: from_mac,
        sip: from_ip,
        tmac: to_mac,
        tip: to_ip,
    }
}

struct Bed {
    lan: Lan,
    router: usize,
    dns: usize,
    attacker: usize,
    user: usize,
}

fn testbed(rng: &mut Rng) -> Bed {
    let mut lan = Lan::new(ARP_POOL.0, ARP_POOL.1);
    let router = lan.add_host(HostRole::Router, rng);
    let dns = lan.add_host(HostRole::DnsLocal, rng);
    let attacker = lan.add_host(HostRole::Attacker, rng);
    let user = lan.add_host(HostRole::Client, rng);
    Bed {
        lan,
        router,
        dns,
        attacker,
        user,
    }
}

pub fn run_session(mode: Mode, id: u64, plan: &FuzzPlan, rng: &mut Rng) -> Result<Session, SimError> {
    let mut bed = testbed(rng);
    // Every machine except the DHCP server gets new addresses per session.
    for host in [bed.dns, bed.attacker, bed.user] {
        reroll_identity(&mut bed.lan, host, rng)?;
    }
    let mut session = Session::new(id, Scenario::Arp, mode);
    let victim = *bed.lan.host(bed.user);
    let router = *bed.lan.host(bed.router);
    let mut cache: BTreeMap<u64, u64> = BTreeMap::new();
    let mut tick = 0u64;

    let leased = bed.lan.pool.leased_ips();
    let host_by_ip = |ip: u64| bed.lan.hosts.iter().find(|h| h.ip == ip).copied();

    // The victim caches the sender mapping of every ARP frame it accepts,
    // unsolicited or not; fresh frames overwrite existing entries.
    let capture = |session: &mut Session,
                       cache: &mut BTreeMap<u64, u64>,
                       dir: Direction,
                       role: PacketRole,
                       pkt: &ArpPacket,
                       tick: &mut u64|
     -> Result<(), SimError> {
        let received = pkt.dst == MAC_BROADCAST || pkt.dst == victim.mac;
        let sent = pkt.src == victim.mac;
        if received && !sent {
            cache.insert(pkt.sip, pkt.smac);
        }
        if received || sent {
            session.capture(dir, build(pkt)?, *tick, role);
        }
        *tick += 1;
        Ok(())
    };

    // Background: the gateway keeps re-validating its neighbours.
    let probes = match mode {
        Mode::Benign => BENIGN_PROBES,
        Mode::Malicious => MAL_PROBES,
    };
    for _ in 0..probes {
        let target = leased[rng.gen_range(0..leased.len())];
        let p = request(router.mac, router.ip, target);
        capture(&mut session, &mut cache, Direction::C2s, PacketRole::Background, &p, &mut tick)?;
        if target == victim.ip {
            let r = reply(victim.mac, victim.ip, router.mac, router.ip);
            capture(&mut session, &mut cache, Direction::S2c, PacketRole::Client, &r, &mut tick)?;
        }
    }

    match mode {
        Mode::Benign => {
            // Probe the presence of other machines across the subnet range.
            for host_part in 2..=254u64 {
                let target = pool_ip(host_part);
                if target == victim.ip {
                    continue;
                }
                let p = request(victim.mac, victim.ip, target);
                capture(&mut session, &mut cache, Direction::S2c, PacketRole::Client, &p, &mut tick)?;
                if let Some(h) = host_by_ip(target) {
                    let r = reply(h.mac, h.ip, victim.mac, victim.ip);
                    capture(&mut session, &mut cache, Direction::C2s, PacketRole::Background, &r, &mut tick)?;
                }
            }
        }
        Mode::Malicious => {
            // The victim re-resolves its gateway and DNS after a cache flush.
            for target_ip in [router.ip, bed.lan.host(bed.dns).ip] {
                let p = request(victim.mac, victim.ip, target_ip);
                capture(&mut session, &mut cache, Direction::S2c, PacketRole::Client, &p, &mut tick)?;
                if let Some(h) = host_by_ip(target_ip) {
                    let r = reply(h.mac, h.ip, victim.mac, victim.ip);
                    capture(&mut session, &mut cache, Direction::C2s, PacketRole::Background, &r, &mut tick)?;
                }
            }
            // Unsolicited spoofed replies with randomized addresses. Without
            // a plan the advertised MAC is a fixed per-session parameter,
            // the way the attack tool takes it on its command line.
            let attacker = *bed.lan.host(bed.attacker);
            let fixed_fake_mac = lab_mac((7 * id + 5) % MAC_HOST_OCTETS);
            let in_plan = |layer, name: &str| plan.contains(&FieldPath::new(layer, name));
            for _ in 0..SPOOFS {
                let smac = if in_plan(LayerKind::Arp, "sender_mac") {
                    lab_mac(rng.gen_range(0..MAC_HOST_OCTETS))
                } else {
                    fixed_fake_mac
                };
                let src = if in_plan(LayerKind::Eth, "src_mac") {
                    lab_mac(rng.gen_range(0..MAC_HOST_OCTETS))
                } else {
                    attacker.mac
                };
                let sip = if in_plan(LayerKind::Arp, "sender_ip") {
                    if rng.gen_bool(SELF_CLAIM_RATE) {
                        victim.ip
                    } else {
                        leased[rng.gen_range(0..leased.len())]
                    }
                } else {
                    router.ip
                };
                let tmac = if in_plan(LayerKind::Arp, "target_mac") {
                    lab_mac(rng.gen_range(0..MAC_HOST_OCTETS))
                } else {
                    victim.mac
                };
                // Fuzzing the destination draws from the delivery-preserving
                // set: the victim's unicast address or broadcast.
                let unicast = if in_plan(LayerKind::Eth, "dst_mac") {
                    rng.gen_bool(UNICAST_SPOOF_RATE)
                } else {
                    true
                };
                let (dst, tip) = if unicast {
                    (victim.mac, victim.ip)
                } else {
                    (MAC_BROADCAST, sip)
                };
                let p = ArpPacket {
                    dst,
                    src,
                    oper: 2,
                    smac,
                    sip,
                    tmac,
                    tip,
                };
                capture(&mut session, &mut cache, Direction::A2s, PacketRole::Injected, &p, &mut tick)?;
            }
        }
    }

    let owned = bed.lan.owned_macs();
    let cache_desc: Vec<String> = cache
        .iter()
        .map(|(ip, mac)| format!("{ip:08x}:{mac:012x}"))
        .collect();
    let owned_desc: Vec<String> = owned.iter().map(|m| format!("{m:012x}")).collect();
    session.set_meta("victim_cache", cache_desc.join(","));
    session.set_meta("owned_macs", owned_desc.join(","));
    session.set_meta("victim_mac", format!("{:012x}", victim.mac));
    session.set_meta("victim_ip", format!("{:08x}", victim.ip));
    session.success = cache
        .values()
        .any(|mac| !owned.contains(mac));
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::sim::attack_success;

    #[test]
    fn benign_sweep_never_poisons() {
        let plan = FuzzPlan::empty(0);
        for i in 0..20 {
            let mut rng = rng_from(100 + i);
            let s = run_session(Mode::Benign, i, &plan, &mut rng).unwrap();
            assert!(!s.success);
            assert!(!attack_success(&s).unwrap());
            // Sweep covers the subnet range; capture is request-dominated.
            assert!(s.packets.len() >= 250);
        }
    }

    #[test]
    fn spoofed_replies_poison_the_cache() {
        let plan = FuzzPlan::new(accepted_fields(), 1).unwrap();
        for i in 0..50 {
            let mut rng = rng_from(200 + i);
            let s = run_session(Mode::Malicious, i, &plan, &mut rng).unwrap();
            assert!(s.success, "iteration {i}");
            assert!(attack_success(&s).unwrap());
        }
    }

    #[test]
    fn fixed_parameter_attack_also_poisons() {
        // The non-fuzzed variant uses the attacker's own MAC, which is not
        // the router's, so the mapping is still false.
        let plan = FuzzPlan::empty(0);
        let mut rng = rng_from(7);
        let s = run_session(Mode::Malicious, 0, &plan, &mut rng).unwrap();
        assert!(s.success);
    }

    #[test]
    fn all_captured_frames_decode() {
        let plan = FuzzPlan::new(accepted_fields(), 2).unwrap();
        for (mode, seed) in [(Mode::Benign, 1u64), (Mode::Malicious, 2)] {
            let mut rng = rng_from(seed);
            let s = run_session(mode, 0, &plan, &mut rng).unwrap();
            for cp in &s.packets {
                let raw = cp.packet.raw().unwrap();
                crate::packet::decode(raw, &[LayerKind::Eth, LayerKind::Arp]).unwrap();
            }
        }
    }
}
