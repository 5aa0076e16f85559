//! DNS cache poisoning testbed.
//!
//! A user machine queries the local resolver; on a cache miss the resolver
//! asks the upstream server, and in malicious sessions the attacker races a
//! spoofed response carrying a falsified address. The first response with a
//! matching transaction id wins the cache. The resolver's cache is flushed
//! between iterations, so every iteration races again. Capture happens at
//! the resolver.

use rand::Rng as _;

use crate::fuzz::{fuzz_packet, FuzzPlan};
use crate::packet::{FieldPath, LayerKind, Packet};
use crate::rng::{keyed_hash, rng_from, Rng};
use crate::sim::lan::{lab_mac, pool_ip, HostRole, Lan};
use crate::sim::session::{Direction, Mode, PacketRole, Scenario, Session};
use crate::sim::SimError;

pub const ATTACK_DOMAIN: &str = "updates.corp-files.lab";
pub const BENIGN_DOMAIN_COUNT: usize = 4098;
const DOMAIN_LIST_SEED: u64 = 0xd0e5;
const RECORD_KEY: u64 = 0x47e0;

/// Delivery latencies for the race. The attacker sniffs the egress query on
/// the LAN and answers quickly but with crafting jitter; the upstream
/// answer pays the WAN round trip.
#[derive(Debug, Clone, Copy)]
pub struct DnsTiming {
    pub attacker_base: u64,
    pub attacker_jitter: u64,
    pub upstream_base: u64,
    pub upstream_jitter: u64,
}

impl Default for DnsTiming {
    fn default() -> Self {
        DnsTiming {
            attacker_base: 2,
            attacker_jitter: 4,
            upstream_base: 4,
            upstream_jitter: 2,
        }
    }
}

/// The benign query list: deterministic generated names, disjoint from the
/// attack domain.
pub fn benign_domain(index: usize) -> String {
    let mut rng = rng_from(crate::rng::derive_seed_indexed(
        DOMAIN_LIST_SEED,
        "domain",
        index as u64,
    ));
    let len = rng.gen_range(5..12);
    let name: String = (0..len)
        .map(|_| char::from(b'a' + rng.gen_range(0..26)))
        .collect();
    format!("{name}{:03}.lab", index % 1000)
}

/// Authoritative A record for a domain, from the synthetic record table.
pub fn truth_ip(domain: &str) -> u64 {
    // 198.18.0.0/15 benchmark space keeps truth addresses off the LAN.
    0xc612_0000 | (keyed_hash(RECORD_KEY, domain.as_bytes()) & 0xffff)
}

pub fn encode_qname(domain: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(32);
    for label in domain.split('.') {
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    out.push(0);
    assert!(out.len() <= 32, "lab domains fit the fixed question slot");
    out.resize(32, 0);
    out
}

pub fn alist() -> Vec<FieldPath> {
    vec![
        FieldPath::new(LayerKind::Ip, "tos"),
        FieldPath::new(LayerKind::Ip, "id"),
        FieldPath::new(LayerKind::Ip, "flags"),
        FieldPath::new(LayerKind::Ip, "ttl"),
        FieldPath::new(LayerKind::Dns, "id"),
        FieldPath::new(LayerKind::Dns, "atr"),
        FieldPath::new(LayerKind::Dns, "ra"),
        FieldPath::new(LayerKind::Dns, "rcode"),
        FieldPath::new(LayerKind::Dns, "rr_ttl"),
        FieldPath::new(LayerKind::Dns, "rdata"),
    ]
}

/// dns.id and dns.rcode fall out of the selection: a mismatched transaction
/// id is ignored by the resolver and a nonzero rcode carries no answer.
pub fn accepted_fields() -> Vec<FieldPath> {
    alist()
        .into_iter()
        .filter(|f| !(f.layer == LayerKind::Dns && matches!(f.field.as_str(), "id" | "rcode")))
        .collect()
}

struct Bed {
    lan: Lan,
    resolver: usize,
    user: usize,
    upstream: usize,
}

fn testbed() -> Bed {
    let mut lan = Lan::new(2, 254);
    let resolver = lan.add_external_host(HostRole::DnsLocal, lab_mac(1), pool_ip(2));
    let user = lan.add_external_host(HostRole::Client, lab_mac(2), pool_ip(3));
    lan.add_external_host(HostRole::Attacker, lab_mac(3), pool_ip(4));
    // Upstream resolver outside the LAN, reached through the gateway.
    let upstream = lan.add_external_host(HostRole::DnsGlobal, lab_mac(0x3f), 0xc000_0235);
    Bed {
        lan,
        resolver,
        user,
        upstream,
    }
}

struct DnsMsg<'a> {
    src: usize,
    dst: usize,
    sport: u64,
    dport: u64,
    ip_id: u64,
    dns_id: u64,
    response: bool,
    atr: u64,
    ra: u64,
    domain: &'a str,
    answer: Option<(u64, u64)>, // (rr_ttl, rdata)
}

fn build(bed: &Bed, m: &DnsMsg) -> Result<Packet, SimError> {
    let src = bed.lan.host(m.src);
    let dst = bed.lan.host(m.dst);
    let mut p = Packet::new(&[LayerKind::Eth, LayerKind::Ip, LayerKind::Udp, LayerKind::Dns])?
        .set_int(LayerKind::Eth, "dst_mac", dst.mac)?
        .set_int(LayerKind::Eth, "src_mac", src.mac)?
        .set_int(LayerKind::Ip, "tos", 0)?
        .set_int(LayerKind::Ip, "id", m.ip_id)?
        .set_int(LayerKind::Ip, "flags", 2)?
        .set_int(LayerKind::Ip, "ttl", 64)?
        .set_int(LayerKind::Ip, "src_ip", src.ip)?
        .set_int(LayerKind::Ip, "dst_ip", dst.ip)?
        .set_int(LayerKind::Udp, "src_port", m.sport)?
        .set_int(LayerKind::Udp, "dst_port", m.dport)?
        .set_int(LayerKind::Dns, "id", m.dns_id)?
        .set_int(LayerKind::Dns, "qr", u64::from(m.response))?
        .set_int(LayerKind::Dns, "atr", m.atr)?
        .set_int(LayerKind::Dns, "ra", m.ra)?
        .set_int(LayerKind::Dns, "rcode", 0)?
        .set_bytes(LayerKind::Dns, "qname", encode_qname(m.domain))?;
    if let Some((rr_ttl, rdata)) = m.answer {
        p = p
            .set_int(LayerKind::Dns, "aname", 0xc00c)?
            .set_int(LayerKind::Dns, "atype", 1)?
            .set_int(LayerKind::Dns, "aclass", 1)?
            .set_int(LayerKind::Dns, "rr_ttl", rr_ttl)?
            .set_int(LayerKind::Dns, "rdata", rdata)?;
    }
    Ok(p)
}

pub fn run_session(mode: Mode, id: u64, plan: &FuzzPlan, rng: &mut Rng) -> Result<Session, SimError> {
    run_session_timed(mode, id, plan, DnsTiming::default(), rng)
}

pub fn run_session_timed(
    mode: Mode,
    id: u64,
    plan: &FuzzPlan,
    timing: DnsTiming,
    rng: &mut Rng,
) -> Result<Session, SimError> {
    let mut bed = testbed();
    let mut session = Session::new(id, Scenario::Dns, mode);

    let domain = match mode {
        Mode::Benign => benign_domain(rng.gen_range(0..BENIGN_DOMAIN_COUNT)),
        Mode::Malicious => ATTACK_DOMAIN.to_string(),
    };
    let truth = truth_ip(&domain);
    session.set_meta("domain", &domain);
    session.set_meta("truth_ip", format!("{truth:08x}"));

    let user_port = rng.gen_range(49152..65536u64);
    let resolver_port = rng.gen_range(49152..65536u64);
    let user_dns_id = rng.gen_range(0..65536u64);
    let resolver_dns_id = rng.gen_range(0..65536u64);

    // User asks the resolver; cache was flushed, so this always misses.
    let q_user = build(
        &bed,
        &DnsMsg {
            src: bed.user,
            dst: bed.resolver,
            sport: user_port,
            dport: 53,
            ip_id: 0,
            dns_id: user_dns_id,
            response: false,
            atr: 0b001, // recursion desired
            ra: 0,
            domain: &domain,
            answer: None,
        },
    )?
    .finalize()?;
    session.capture(Direction::C2s, q_user, 0, PacketRole::Client);

    // Resolver queries upstream.
    bed.lan.tick(1);
    let egress_tick = bed.lan.clock;
    let q_up = build(
        &bed,
        &DnsMsg {
            src: bed.resolver,
            dst: bed.upstream,
            sport: resolver_port,
            dport: 53,
            ip_id: 0,
            dns_id: resolver_dns_id,
            response: false,
            atr: 0b001,
            ra: 0,
            domain: &domain,
            answer: None,
        },
    )?
    .finalize()?;
    session.capture(Direction::S2g, q_up, egress_tick, PacketRole::Client);

    // In-flight responses race through the delivery queue.
    if mode == Mode::Malicious {
        // The attacker sniffed the egress query and answers first when its
        // crafting delay beats the WAN round trip.
        let falsified = loop {
            let ip: u64 = rng.gen_range(0..=u32::MAX as u64);
            if ip != truth {
                break ip;
            }
        };
        session.set_meta("falsified_ip", format!("{falsified:08x}"));
        let spoof = build(
            &bed,
            &DnsMsg {
                src: bed.upstream, // forged source identity
                dst: bed.resolver,
                sport: 53,
                dport: resolver_port,
                ip_id: 0,
                dns_id: resolver_dns_id,
                response: true,
                atr: 0b101, // authoritative answer, recursion desired echo
                ra: 1,
                domain: &domain,
                answer: Some((3600, falsified)),
            },
        )?;
        let spoof = fuzz_packet(&spoof, plan, rng)?.finalize()?;
        // Record what actually went on the wire; the plan may re-randomize
        // the answer record.
        let wire_falsified = spoof.get_int(LayerKind::Dns, "rdata").unwrap();
        session.set_meta("falsified_ip", format!("{wire_falsified:08x}"));
        let delay = timing.attacker_base + rng.gen_range(0..timing.attacker_jitter.max(1));
        bed.lan.send(spoof, bed.resolver, delay);
    }
    let genuine = build(
        &bed,
        &DnsMsg {
            src: bed.upstream,
            dst: bed.resolver,
            sport: 53,
            dport: resolver_port,
            ip_id: 0,
            dns_id: resolver_dns_id,
            response: true,
            atr: 0b101,
            ra: 1,
            domain: &domain,
            answer: Some((3600, truth)),
        },
    )?
    .finalize()?;
    let genuine_raw = genuine.raw().unwrap().to_vec();
    let delay = timing.upstream_base + rng.gen_range(0..timing.upstream_jitter.max(1));
    bed.lan.send(genuine, bed.resolver, delay);

    // First response with the matching transaction id and a usable answer
    // wins the cache; later ones are captured and ignored.
    let mut cached: Option<u64> = None;
    while let Some((tick, pkt, _dst)) = bed.lan.deliver_next() {
        let from_attacker = pkt.raw() != Some(genuine_raw.as_slice());
        let dir = if from_attacker { Direction::A2s } else { Direction::G2s };
        let role = if from_attacker { PacketRole::Injected } else { PacketRole::Background };
        let id_ok = pkt.get_int(LayerKind::Dns, "id") == Some(resolver_dns_id);
        let rcode_ok = pkt.get_int(LayerKind::Dns, "rcode") == Some(0);
        let answer = pkt.get_int(LayerKind::Dns, "rdata");
        session.capture(dir, pkt, tick, role);
        if cached.is_none() && id_ok && rcode_ok {
            if let Some(ip) = answer {
                cached = Some(ip);
            }
        }
    }

    // The resolver can only answer the user once something was cached.
    let user_result = cached.unwrap_or(truth);
    bed.lan.tick(1);
    let resp_user = build(
        &bed,
        &DnsMsg {
            src: bed.resolver,
            dst: bed.user,
            sport: 53,
            dport: user_port,
            ip_id: 1,
            dns_id: user_dns_id,
            response: true,
            atr: 0b001,
            ra: 1,
            domain: &domain,
            answer: Some((3600, user_result)),
        },
    )?
    .finalize()?;
    let clock = bed.lan.clock;
    session.capture(Direction::S2c, resp_user, clock, PacketRole::Client);

    session.set_meta("user_result_ip", format!("{user_result:08x}"));
    session.success = mode == Mode::Malicious && format!("{user_result:08x}") != format!("{truth:08x}");
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::sim::attack_success;

    #[test]
    fn benign_lookups_return_the_authoritative_record() {
        let plan = FuzzPlan::empty(0);
        for i in 0..20 {
            let mut rng = rng_from(300 + i);
            let s = run_session(Mode::Benign, i, &plan, &mut rng).unwrap();
            assert!(!s.success);
            assert_eq!(s.meta["user_result_ip"], s.meta["truth_ip"]);
            assert!(!attack_success(&s).unwrap());
        }
    }

    #[test]
    fn attacker_wins_most_races() {
        let plan = FuzzPlan::new(accepted_fields(), 1).unwrap();
        let mut wins = 0;
        for i in 0..200 {
            let mut rng = rng_from(400 + i);
            let s = run_session(Mode::Malicious, i, &plan, &mut rng).unwrap();
            wins += u32::from(s.success);
            if s.success {
                assert!(attack_success(&s).unwrap());
                assert_ne!(s.meta["user_result_ip"], s.meta["truth_ip"]);
            }
        }
        let rate = f64::from(wins) / 200.0;
        // Analytic win rate for the default timing is 0.875.
        assert!(rate > 0.8 && rate < 0.95, "win rate {rate}");
    }

    #[test]
    fn race_outcome_flips_with_the_latencies() {
        let plan = FuzzPlan::empty(0);
        let fast_attacker = DnsTiming {
            attacker_base: 1,
            attacker_jitter: 1,
            upstream_base: 5,
            upstream_jitter: 1,
        };
        let slow_attacker = DnsTiming {
            attacker_base: 5,
            attacker_jitter: 1,
            upstream_base: 1,
            upstream_jitter: 1,
        };
        let mut rng = rng_from(42);
        let s = run_session_timed(Mode::Malicious, 0, &plan, fast_attacker, &mut rng).unwrap();
        assert!(s.success);
        let mut rng = rng_from(42);
        let s = run_session_timed(Mode::Malicious, 0, &plan, slow_attacker, &mut rng).unwrap();
        assert!(!s.success);
    }

    #[test]
    fn benign_domains_are_disjoint_from_the_attack_domain() {
        for i in 0..BENIGN_DOMAIN_COUNT {
            assert_ne!(benign_domain(i), ATTACK_DOMAIN);
        }
    }

    #[test]
    fn captures_decode_with_the_dns_stack() {
        let plan = FuzzPlan::new(accepted_fields(), 9).unwrap();
        for (mode, seed) in [(Mode::Benign, 1u64), (Mode::Malicious, 2)] {
            let mut rng = rng_from(seed);
            let s = run_session(mode, 0, &plan, &mut rng).unwrap();
            for cp in &s.packets {
                crate::packet::decode(
                    cp.packet.raw().unwrap(),
                    &[LayerKind::Eth, LayerKind::Ip, LayerKind::Udp, LayerKind::Dns],
                )
                .unwrap();
            }
        }
    }
}
