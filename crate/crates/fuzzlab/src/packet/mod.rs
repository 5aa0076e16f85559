//! Layered packet model: schemas, field access by name, and finalization
//! that computes checksums and lengths last so fuzzing never breaks packet
//! integrity.

pub mod checksum;
pub mod layers;
#[allow(clippy::module_inception)]
mod packet;
pub mod schema;

pub use packet::{decode, FieldValue, Packet};
pub use schema::{
    dump_schemas, AddrKind, ComputedKind, FieldKind, FieldPath, FieldSchema, LayerKind,
    LayerSchema,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PacketError {
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("value out of range for {field}: {detail}")]
    ValueOutOfRange { field: String, detail: String },
    #[error("write to computed field: {0}")]
    ComputedFieldWrite(String),
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("truncated packet: need {needed} bytes, got {got}")]
    TruncatedPacket { needed: usize, got: usize },
    #[error("unknown layer stack: {0}")]
    UnknownLayerStack(String),
    #[error("packet is finalized")]
    FinalizedPacket,
    #[error("malformed packet: {0}")]
    MalformedPacket(String),
}

/// 6-byte MAC as the 48-bit integer stored in address fields.
pub fn mac_to_int(mac: [u8; 6]) -> u64 {
    mac.iter().fold(0u64, |acc, b| (acc << 8) | u64::from(*b))
}

pub fn int_to_mac(v: u64) -> [u8; 6] {
    let b = v.to_be_bytes();
    [b[2], b[3], b[4], b[5], b[6], b[7]]
}

/// Dotted-quad IPv4 as the 32-bit integer stored in address fields.
pub fn ipv4_to_int(ip: [u8; 4]) -> u64 {
    u64::from(u32::from_be_bytes(ip))
}

pub fn int_to_ipv4(v: u64) -> [u8; 4] {
    (v as u32).to_be_bytes()
}

pub const MAC_BROADCAST: u64 = 0xffff_ffff_ffff;
pub const MAC_ZERO: u64 = 0;
