//! Random valid-value assignment and success-rate-driven field selection.
//!
//! Double insurance: computed checksum/length fields can never enter a plan
//! (their schemas are not fuzzable and the selection rejects them up front),
//! and a field only stays selected while the measured attack success rate
//! stays above the threshold.

mod reroll;
mod select;

pub use reroll::reroll_identity;
pub use select::{select_fields, ProductOracle, SuccessOracle};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::{AddrKind, FieldKind, FieldPath, FieldSchema, FieldValue, Packet, PacketError};
use crate::rng::Rng;
use crate::sim::lan::{lab_mac, pool_ip, MAC_HOST_OCTETS, POOL_FIRST_HOST, POOL_LAST_HOST};

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("field is not fuzzable: {0}")]
    NotFuzzable(String),
    #[error("computed field in candidate list: {0}")]
    ComputedFieldInAList(String),
    #[error("DHCP pool exhausted")]
    PoolExhausted,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Packet(#[from] PacketError),
}

/// The accepted fuzz-field list plus the seed that drives value assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzPlan {
    pub fields: Vec<FieldPath>,
    pub seed: u64,
}

impl FuzzPlan {
    /// Validates that every field is fuzzable and listed once.
    pub fn new(fields: Vec<FieldPath>, seed: u64) -> Result<FuzzPlan, FuzzError> {
        for (i, f) in fields.iter().enumerate() {
            let schema = f.schema()?;
            if !schema.fuzzable {
                return Err(FuzzError::NotFuzzable(f.to_string()));
            }
            if fields[..i].contains(f) {
                return Err(FuzzError::InvalidPlan(format!("duplicate field {f}")));
            }
        }
        Ok(FuzzPlan { fields, seed })
    }

    pub fn empty(seed: u64) -> FuzzPlan {
        FuzzPlan { fields: Vec::new(), seed }
    }

    pub fn contains(&self, path: &FieldPath) -> bool {
        self.fields.contains(path)
    }
}

/// Uniform draw from the field's valid set.
///
/// Address fields use the lab procedures instead of raw bit randomness: MACs
/// come from the locally-administered lab space and IPv4 values from the
/// DHCP pool's subnet.
pub fn fuzz_value(schema: &FieldSchema, rng: &mut Rng) -> Result<FieldValue, FuzzError> {
    let name = || format!("{}.{}", schema.layer, schema.name);
    if !schema.fuzzable {
        return Err(FuzzError::NotFuzzable(name()));
    }
    let v = match schema.kind {
        FieldKind::Range { lo, hi } => rng.gen_range(lo..=hi),
        FieldKind::EnumSet(set) => set[rng.gen_range(0..set.len())],
        FieldKind::Address(AddrKind::Mac) => lab_mac(rng.gen_range(0..MAC_HOST_OCTETS)),
        FieldKind::Address(AddrKind::Ipv4) => {
            pool_ip(rng.gen_range(POOL_FIRST_HOST..=POOL_LAST_HOST))
        }
        FieldKind::Computed(_) | FieldKind::OpaqueBytes => {
            return Err(FuzzError::NotFuzzable(name()))
        }
    };
    Ok(FieldValue::Int(v))
}

/// Reassigns every plan field present in the packet; all other fields are
/// untouched, and fields absent from the packet's stack are skipped.
pub fn fuzz_packet(packet: &Packet, plan: &FuzzPlan, rng: &mut Rng) -> Result<Packet, FuzzError> {
    if packet.finalized() {
        return Err(FuzzError::Packet(PacketError::FinalizedPacket));
    }
    let mut out = packet.clone();
    for path in &plan.fields {
        if !out.has_layer(path.layer) {
            continue;
        }
        let schema = path.schema()?;
        let value = fuzz_value(schema, rng)?;
        out = out.set_field(path, value)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::LayerKind;
    use crate::rng::rng_from;
    use std::collections::BTreeSet;

    fn schema_of(path: &str) -> &'static FieldSchema {
        path.parse::<FieldPath>().unwrap().schema().unwrap()
    }

    #[test]
    fn ttl_draws_cover_the_full_byte_range() {
        let schema = schema_of("ip.ttl");
        let mut rng = rng_from(1);
        let mut lo = u64::MAX;
        let mut hi = 0;
        for _ in 0..10_000 {
            let v = fuzz_value(schema, &mut rng).unwrap().as_int().unwrap();
            assert!(v <= 255);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert_eq!((lo, hi), (0, 255));
    }

    #[test]
    fn ip_flags_draws_stay_in_the_valid_set() {
        let schema = schema_of("ip.flags");
        let mut rng = rng_from(2);
        for _ in 0..1_000 {
            let v = fuzz_value(schema, &mut rng).unwrap().as_int().unwrap();
            assert!([0, 2, 4, 6].contains(&v));
        }
    }

    #[test]
    fn binary_flag_draws_cover_both_values() {
        let schema = schema_of("dns.ra");
        let mut rng = rng_from(3);
        let seen: BTreeSet<u64> = (0..100)
            .map(|_| fuzz_value(schema, &mut rng).unwrap().as_int().unwrap())
            .collect();
        assert_eq!(seen, BTreeSet::from([0, 1]));
    }

    #[test]
    fn enum_draws_collect_every_member() {
        // Coupon-collector check over an enum_set of size <= 8.
        let schema = schema_of("authp.stage");
        let mut rng = rng_from(4);
        let seen: BTreeSet<u64> = (0..10_000)
            .map(|_| fuzz_value(schema, &mut rng).unwrap().as_int().unwrap())
            .collect();
        assert_eq!(seen, BTreeSet::from([1, 2, 3, 4, 5, 6]));
    }

    #[test]
    fn non_fuzzable_fields_are_rejected() {
        let err = fuzz_value(schema_of("ip.header_checksum"), &mut rng_from(0)).unwrap_err();
        assert!(matches!(err, FuzzError::NotFuzzable(_)));
        let err = fuzz_value(schema_of("eth.ethertype"), &mut rng_from(0)).unwrap_err();
        assert!(matches!(err, FuzzError::NotFuzzable(_)));
    }

    #[test]
    fn plan_rejects_non_fuzzable_and_duplicate_fields() {
        assert!(FuzzPlan::new(vec![FieldPath::new(LayerKind::Ip, "ihl")], 0).is_err());
        let ttl = FieldPath::new(LayerKind::Ip, "ttl");
        assert!(FuzzPlan::new(vec![ttl.clone(), ttl], 0).is_err());
    }

    #[test]
    fn plan_serialization_shape() {
        let plan = FuzzPlan::new(
            vec![
                FieldPath::new(LayerKind::Ip, "ttl"),
                FieldPath::new(LayerKind::Ip, "tos"),
            ],
            9,
        )
        .unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        assert_eq!(json, r#"{"fields":["ip.ttl","ip.tos"],"seed":9}"#);
        let back: FuzzPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
    }

    fn telnet_template() -> Packet {
        Packet::new(&[LayerKind::Eth, LayerKind::Ip, LayerKind::Tcp, LayerKind::Telnet])
            .unwrap()
            .set_int(LayerKind::Eth, "dst_mac", 0xfeff_ffff_ff01)
            .unwrap()
            .set_int(LayerKind::Eth, "src_mac", 0xfeff_ffff_ff02)
            .unwrap()
            .set_int(LayerKind::Ip, "tos", 0)
            .unwrap()
            .set_int(LayerKind::Ip, "id", 1)
            .unwrap()
            .set_int(LayerKind::Ip, "flags", 2)
            .unwrap()
            .set_int(LayerKind::Ip, "ttl", 64)
            .unwrap()
            .set_int(LayerKind::Ip, "src_ip", 0x0a000003)
            .unwrap()
            .set_int(LayerKind::Ip, "dst_ip", 0x0a000002)
            .unwrap()
            .set_int(LayerKind::Tcp, "src_port", 50000)
            .unwrap()
            .set_int(LayerKind::Tcp, "dst_port", 23)
            .unwrap()
            .set_int(LayerKind::Tcp, "seq", 1)
            .unwrap()
            .set_int(LayerKind::Tcp, "ack", 1)
            .unwrap()
            .set_int(LayerKind::Tcp, "flags", 0x18)
            .unwrap()
            .set_int(LayerKind::Tcp, "window", 4096)
            .unwrap()
            .set_int(LayerKind::Tcp, "urgent_ptr", 0)
            .unwrap()
    }

    #[test]
    fn empty_plan_leaves_packet_unchanged() {
        let p = telnet_template();
        let out = fuzz_packet(&p, &FuzzPlan::empty(5), &mut rng_from(5)).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn single_field_plan_changes_only_that_field() {
        let p = telnet_template();
        let plan = FuzzPlan::new(vec![FieldPath::new(LayerKind::Ip, "ttl")], 6).unwrap();
        let out = fuzz_packet(&p, &plan, &mut rng_from(8)).unwrap();
        let mut diffs = 0;
        for (a, b) in p.field_maps().iter().zip(out.field_maps()) {
            for (name, v) in a {
                if b.get(name) != Some(v) {
                    assert_eq!(*name, "ttl");
                    diffs += 1;
                }
            }
        }
        assert_eq!(diffs, 1);
    }

    #[test]
    fn fields_absent_from_the_stack_are_skipped() {
        let p = telnet_template();
        let plan = FuzzPlan::new(vec![FieldPath::new(LayerKind::Arp, "oper")], 7).unwrap();
        let out = fuzz_packet(&p, &plan, &mut rng_from(7)).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn fuzzing_is_deterministic_per_seed() {
        let p = telnet_template();
        let plan = FuzzPlan::new(
            vec![
                FieldPath::new(LayerKind::Ip, "ttl"),
                FieldPath::new(LayerKind::Ip, "tos"),
                FieldPath::new(LayerKind::Tcp, "window"),
            ],
            11,
        )
        .unwrap();
        let a = fuzz_packet(&p, &plan, &mut rng_from(11)).unwrap().finalize().unwrap();
        let b = fuzz_packet(&p, &plan, &mut rng_from(11)).unwrap().finalize().unwrap();
        assert_eq!(a.raw(), b.raw());
    }

    #[test]
    fn fuzzed_packets_always_finalize() {
        // Packet-level half of the double insurance.
        let p = telnet_template();
        let fuzzable: Vec<FieldPath> = [
            "ip.tos", "ip.id", "ip.flags", "ip.ttl", "tcp.flags", "tcp.window", "tcp.urgent_ptr",
        ]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
        for seed in 0..200 {
            let plan = FuzzPlan::new(fuzzable.clone(), seed).unwrap();
            let fuzzed = fuzz_packet(&p, &plan, &mut rng_from(seed)).unwrap();
            let f = fuzzed.finalize().unwrap();
            assert!(f.raw().is_some());
        }
    }
}
