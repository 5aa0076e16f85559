//! Session-level MAC/IP identity re-randomization, the lab's stand-in for
//! interface re-initialization plus a DHCP re-lease.

use crate::rng::Rng;
use crate::sim::lan::{Host, Lan};

use super::FuzzError;

/// Gives a host a fresh locally-administered unicast MAC and a fresh lease.
/// The new lease is taken before the old one is released, so the address
/// always changes while the pool still rotates addresses over time.
pub fn reroll_identity(lan: &mut Lan, host_id: usize, rng: &mut Rng) -> Result<Host, FuzzError> {
    let old_ip = lan.hosts[host_id].ip;
    let new_ip = lan
        .pool
        .lease(host_id, rng)
        .ok_or(FuzzError::PoolExhausted)?;
    lan.pool.release(old_ip);
    let new_mac = lan.unused_mac(rng);
    let host = &mut lan.hosts[host_id];
    host.ip = new_ip;
    host.mac = new_mac;
    Ok(*host)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::sim::lan::{pool_ip, HostRole, MAC_HOST_OCTETS};
    use std::collections::BTreeSet;

    #[test]
    fn reroll_stays_inside_pool_and_mac_space() {
        let mut lan = Lan::new(2, 254);
        let mut rng = rng_from(21);
        let id = lan.add_host(HostRole::Client, &mut rng);
        let host = reroll_identity(&mut lan, id, &mut rng).unwrap();
        assert!(host.ip >= pool_ip(2) && host.ip <= pool_ip(254));
        let first_octet = (host.mac >> 40) as u8;
        assert_eq!(first_octet & 0x03, 0x02, "locally-administered unicast");
        assert!((host.mac & 0xff) < MAC_HOST_OCTETS);
    }

    #[test]
    fn hundred_rerolls_yield_mostly_distinct_identities() {
        // Birthday bound on (mac, ip) pairs over a 253-address pool.
        let mut lan = Lan::new(2, 254);
        let mut rng = rng_from(22);
        let id = lan.add_host(HostRole::Client, &mut rng);
        let mut seen: BTreeSet<(u64, u64)> = BTreeSet::new();
        for _ in 0..100 {
            let host = reroll_identity(&mut lan, id, &mut rng).unwrap();
            seen.insert((host.mac, host.ip));
        }
        assert!(seen.len() >= 95, "{} distinct identities", seen.len());
    }

    #[test]
    fn reroll_always_changes_the_address() {
        let mut lan = Lan::new(2, 254);
        let mut rng = rng_from(23);
        let id = lan.add_host(HostRole::Client, &mut rng);
        for _ in 0..50 {
            let before = lan.hosts[id].ip;
            let after = reroll_identity(&mut lan, id, &mut rng).unwrap().ip;
            assert_ne!(before, after);
        }
    }

    #[test]
    fn exhausted_pool_errors() {
        let mut lan = Lan::new(2, 2);
        let mut rng = rng_from(24);
        let id = lan.add_host(HostRole::Client, &mut rng);
        let err = reroll_identity(&mut lan, id, &mut rng).unwrap_err();
        assert!(matches!(err, FuzzError::PoolExhausted));
    }
}
