//! Hosts, DHCP leases, the virtual clock, and in-flight delivery.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::packet::Packet;
use crate::rng::Rng;

/// Locally-administered lab MAC space: fe:ff:ff:ff:ff:XX with the host
/// octet below [`MAC_HOST_OCTETS`]. First octet 0xfe has the
/// locally-administered bit set and the multicast bit clear.
pub const LAB_MAC_PREFIX: u64 = 0xfe_ff_ff_ff_ff_00;
pub const MAC_HOST_OCTETS: u64 = 64;

pub fn lab_mac(host_octet: u64) -> u64 {
    debug_assert!(host_octet < MAC_HOST_OCTETS);
    LAB_MAC_PREFIX | host_octet
}

/// 10.0.0.0/24 lab subnet. The DHCP pool leases from a sub-range of it;
/// probes may still sweep the whole subnet host range.
pub const POOL_BASE: u64 = 0x0a00_0000;
pub const POOL_FIRST_HOST: u64 = 2;
pub const POOL_LAST_HOST: u64 = 254;

pub fn pool_ip(host_part: u64) -> u64 {
    POOL_BASE | host_part
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostRole {
    Server,
    Client,
    Attacker,
    Router,
    DnsLocal,
    DnsGlobal,
    Dhcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Host {
    pub id: usize,
    pub role: HostRole,
    pub mac: u64,
    pub ip: u64,
}

/// Address pool with random-free allocation.
#[derive(Debug, Clone)]
pub struct DhcpPool {
    first: u64,
    last: u64,
    leased: BTreeMap<u64, usize>,
}

impl DhcpPool {
    pub fn new(first: u64, last: u64) -> DhcpPool {
        DhcpPool {
            first,
            last,
            leased: BTreeMap::new(),
        }
    }

    pub fn lease(&mut self, host_id: usize, rng: &mut Rng) -> Option<u64> {
        let free: Vec<u64> = (self.first..=self.last)
            .filter(|h| !self.leased.contains_key(h))
            .collect();
        if free.is_empty() {
            return None;
        }
        let part = free[rng.gen_range(0..free.len())];
        self.leased.insert(part, host_id);
        Some(pool_ip(part))
    }

    pub fn release(&mut self, ip: u64) {
        self.leased.remove(&(ip & 0xff));
    }

    pub fn leased_ips(&self) -> Vec<u64> {
        self.leased.keys().map(|h| pool_ip(*h)).collect()
    }
}

#[derive(Debug)]
struct InFlight {
    deliver_at: u64,
    seq: u64,
    packet: Packet,
    dst_host: usize,
}

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        (self.deliver_at, self.seq) == (other.deliver_at, other.seq)
    }
}
impl Eq for InFlight {}
impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for InFlight {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.deliver_at, self.seq).cmp(&(other.deliver_at, other.seq))
    }
}

/// One simulated LAN: hosts, the DHCP pool, a virtual clock, and the
/// in-flight queue. Delivery order is (deliver_at, enqueue sequence).
#[derive(Debug)]
pub struct Lan {
    pub hosts: Vec<Host>,
    pub pool: DhcpPool,
    pub clock: u64,
    queue: BinaryHeap<Reverse<InFlight>>,
    next_seq: u64,
}

impl Lan {
    pub fn new(pool_first: u64, pool_last: u64) -> Lan {
        Lan {
            hosts: Vec::new(),
            pool: DhcpPool::new(pool_first, pool_last),
            clock: 0,
            queue: BinaryHeap::new(),
            next_seq: 0,
        }
    }

    /// Adds a host with a fresh lab MAC and a pool lease.
    pub fn add_host(&mut self, role: HostRole, rng: &mut Rng) -> usize {
        let id = self.hosts.len();
        let mac = self.unused_mac(rng);
        let ip = self
            .pool
            .lease(id, rng)
            .expect("testbed pool sized for its hosts");
        self.hosts.push(Host { id, role, mac, ip });
        id
    }

    /// Adds a host with a fixed off-pool identity (upstream services).
    pub fn add_external_host(&mut self, role: HostRole, mac: u64, ip: u64) -> usize {
        let id = self.hosts.len();
        self.hosts.push(Host { id, role, mac, ip });
        id
    }

    pub fn unused_mac(&self, rng: &mut Rng) -> u64 {
        loop {
            let mac = lab_mac(rng.gen_range(0..MAC_HOST_OCTETS));
            if !self.hosts.iter().any(|h| h.mac == mac) {
                return mac;
            }
        }
    }

    pub fn host(&self, id: usize) -> &Host {
        &self.hosts[id]
    }

    pub fn owned_macs(&self) -> Vec<u64> {
        self.hosts.iter().map(|h| h.mac).collect()
    }

    pub fn send(&mut self, packet: Packet, dst_host: usize, latency: u64) {
        let entry = InFlight {
            deliver_at: self.clock + latency,
            seq: self.next_seq,
            packet,
            dst_host,
        };
        self.next_seq += 1;
        self.queue.push(Reverse(entry));
    }

    /// Pops the next delivery and advances the clock to it.
    pub fn deliver_next(&mut self) -> Option<(u64, Packet, usize)> {
        let Reverse(entry) = self.queue.pop()?;
        self.clock = self.clock.max(entry.deliver_at);
        Some((entry.deliver_at, entry.packet, entry.dst_host))
    }

    pub fn tick(&mut self, amount: u64) {
        self.clock += amount;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::LayerKind;
    use crate::rng::rng_from;

    #[test]
    fn delivery_order_is_deliver_at_then_enqueue_seq() {
        let mut lan = Lan::new(2, 10);
        let mut rng = rng_from(5);
        let a = lan.add_host(HostRole::Server, &mut rng);
        let p = || Packet::new(&[LayerKind::Eth, LayerKind::Arp]).unwrap();
        lan.send(p(), a, 5);
        lan.send(p(), a, 2);
        lan.send(p(), a, 2);
        let t1 = lan.deliver_next().unwrap().0;
        let t2 = lan.deliver_next().unwrap().0;
        let t3 = lan.deliver_next().unwrap().0;
        assert_eq!((t1, t2, t3), (2, 2, 5));
        assert!(lan.deliver_next().is_none());
        assert_eq!(lan.clock, 5);
    }

    #[test]
    fn pool_leases_are_unique_and_release_frees_them() {
        let mut pool = DhcpPool::new(2, 4);
        let mut rng = rng_from(1);
        let a = pool.lease(0, &mut rng).unwrap();
        let b = pool.lease(1, &mut rng).unwrap();
        let c = pool.lease(2, &mut rng).unwrap();
        assert_eq!(pool.lease(3, &mut rng), None);
        let mut ips = [a, b, c];
        ips.sort_unstable();
        assert_eq!(ips, [pool_ip(2), pool_ip(3), pool_ip(4)]);
        pool.release(b);
        assert!(pool.lease(3, &mut rng).is_some());
    }

    #[test]
    fn lab_macs_are_locally_administered_unicast() {
        for octet in 0..MAC_HOST_OCTETS {
            let mac = lab_mac(octet);
            let first = (mac >> 40) as u8;
            assert_eq!(first & 0x01, 0, "multicast bit clear");
            assert_eq!(first & 0x02, 2, "locally-administered bit set");
        }
    }
}
