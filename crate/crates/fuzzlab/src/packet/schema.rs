//! Layer and field schema definitions.
//!
//! A layer is a fixed bit layout of named fields plus, for application
//! layers, an optional variable-length payload tail. Field kinds carry the
//! valid-value metadata that fuzzing draws from; computed fields (checksums,
//! lengths) are never fuzzable and are filled in last, at finalize time.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::PacketError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Eth,
    Arp,
    Ip,
    Udp,
    Tcp,
    Dns,
    Telnet,
    Authp,
}

impl LayerKind {
    pub const ALL: [LayerKind; 8] = [
        LayerKind::Eth,
        LayerKind::Arp,
        LayerKind::Ip,
        LayerKind::Udp,
        LayerKind::Tcp,
        LayerKind::Dns,
        LayerKind::Telnet,
        LayerKind::Authp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Eth => "eth",
            LayerKind::Arp => "arp",
            LayerKind::Ip => "ip",
            LayerKind::Udp => "udp",
            LayerKind::Tcp => "tcp",
            LayerKind::Dns => "dns",
            LayerKind::Telnet => "telnet",
            LayerKind::Authp => "authp",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayerKind {
    type Err = PacketError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PacketError::UnknownLayerStack(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AddrKind {
    Mac,
    Ipv4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComputedKind {
    Checksum,
    Length,
}

/// Valid-value metadata for one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Integer in the closed range `[lo, hi]`.
    Range { lo: u64, hi: u64 },
    /// Integer drawn from an explicit value set.
    EnumSet(&'static [u64]),
    /// MAC or IPv4 address; fuzzed through the address-specific procedures.
    Address(AddrKind),
    /// Checksum or length, filled by `finalize`; never fuzzable.
    Computed(ComputedKind),
    /// Raw bytes. `bit_width == 0` marks a variable-length trailing payload.
    OpaqueBytes,
}

#[derive(Debug, Clone, Copy)]
pub struct FieldSchema {
    pub name: &'static str,
    pub layer: LayerKind,
    pub bit_offset: usize,
    pub bit_width: usize,
    pub kind: FieldKind,
    pub fuzzable: bool,
    /// Present only when the layer's optional section is present (DNS answer).
    pub optional: bool,
}

impl FieldSchema {
    pub fn is_computed(&self) -> bool {
        matches!(self.kind, FieldKind::Computed(_))
    }

    pub fn is_variable(&self) -> bool {
        matches!(self.kind, FieldKind::OpaqueBytes) && self.bit_width == 0
    }

    /// Bytes this field touches, relative to the layer start.
    pub fn byte_span(&self) -> (usize, usize) {
        (self.bit_offset / 8, (self.bit_offset + self.bit_width + 7) / 8)
    }

    /// Checks an integer value against the kind constraint.
    pub fn validate_int(&self, v: u64) -> bool {
        if self.bit_width < 64 && v >= (1u64 << self.bit_width) {
            return false;
        }
        match self.kind {
            FieldKind::Range { lo, hi } => v >= lo && v <= hi,
            FieldKind::EnumSet(set) => set.contains(&v),
            FieldKind::Address(_) => true,
            FieldKind::Computed(_) => true,
            FieldKind::OpaqueBytes => false,
        }
    }
}

pub struct LayerSchema {
    pub kind: LayerKind,
    /// Bits in the fixed mandatory part (optional section and payload excluded).
    pub bit_length: usize,
    /// Bits in the optional section, 0 if the layer has none.
    pub optional_bits: usize,
    pub fields: &'static [FieldSchema],
}

impl LayerSchema {
    pub fn get(kind: LayerKind) -> &'static LayerSchema {
        super::layers::layer_schema(kind)
    }

    pub fn field(&self, name: &str) -> Option<&'static FieldSchema> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn fixed_bytes(&self) -> usize {
        self.bit_length / 8
    }

    pub fn optional_bytes(&self) -> usize {
        self.optional_bits / 8
    }

    pub fn has_variable_tail(&self) -> bool {
        self.fields.iter().any(|f| f.is_variable())
    }
}

/// A `layer.field` reference, e.g. `ip.ttl`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldPath {
    pub layer: LayerKind,
    pub field: String,
}

impl FieldPath {
    pub fn new(layer: LayerKind, field: &str) -> Self {
        FieldPath {
            layer,
            field: field.to_string(),
        }
    }

    pub fn schema(&self) -> Result<&'static FieldSchema, PacketError> {
        LayerSchema::get(self.layer)
            .field(&self.field)
            .ok_or_else(|| PacketError::UnknownField(self.to_string()))
    }
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.layer, self.field)
    }
}

impl FromStr for FieldPath {
    type Err = PacketError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (layer, field) = s
            .split_once('.')
            .ok_or_else(|| PacketError::UnknownField(s.to_string()))?;
        let layer = LayerKind::from_str(&layer.to_ascii_lowercase())
            .map_err(|_| PacketError::UnknownField(s.to_string()))?;
        let path = FieldPath::new(layer, field);
        path.schema()?;
        Ok(path)
    }
}

impl Serialize for FieldPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FieldPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        FieldPath::from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Row of the `schema` debug dump.
#[derive(Debug, Serialize)]
pub struct SchemaDumpRow {
    pub name: String,
    pub layer: String,
    pub bit_offset: usize,
    pub bit_width: usize,
    pub kind: String,
    pub fuzzable: bool,
}

pub fn dump_schemas() -> Vec<SchemaDumpRow> {
    let mut rows = Vec::new();
    for kind in LayerKind::ALL {
        let layer = LayerSchema::get(kind);
        for f in layer.fields {
            let kind_desc = match f.kind {
                FieldKind::Range { lo, hi } => format!("range({lo},{hi})"),
                FieldKind::EnumSet(set) => {
                    let vals: Vec<String> = set.iter().map(|v| v.to_string()).collect();
                    format!("enum_set({})", vals.join(","))
                }
                FieldKind::Address(AddrKind::Mac) => "address(mac)".to_string(),
                FieldKind::Address(AddrKind::Ipv4) => "address(ipv4)".to_string(),
                FieldKind::Computed(ComputedKind::Checksum) => "computed(checksum)".to_string(),
                FieldKind::Computed(ComputedKind::Length) => "computed(length)".to_string(),
                FieldKind::OpaqueBytes => format!("opaque_bytes({})", f.bit_width / 8),
            };
            rows.push(SchemaDumpRow {
                name: f.name.to_string(),
                layer: kind.as_str().to_string(),
                bit_offset: f.bit_offset,
                bit_width: f.bit_width,
                kind: kind_desc,
                fuzzable: f.fuzzable,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_paths_roundtrip() {
        let p: FieldPath = "ip.ttl".parse().unwrap();
        assert_eq!(p.layer, LayerKind::Ip);
        assert_eq!(p.to_string(), "ip.ttl");
        assert!("ip.bogus".parse::<FieldPath>().is_err());
        assert!("nolayer".parse::<FieldPath>().is_err());
    }

    #[test]
    fn schema_invariants_hold() {
        // Fields fit inside the layer, do not overlap, and computed fields
        // are never fuzzable (first insurance).
        for kind in LayerKind::ALL {
            let layer = LayerSchema::get(kind);
            let total = layer.bit_length + layer.optional_bits;
            let mut spans: Vec<(usize, usize)> = Vec::new();
            for f in layer.fields {
                if f.is_variable() {
                    assert_eq!(f.bit_offset, total, "{kind} variable tail offset");
                    continue;
                }
                assert!(f.bit_offset + f.bit_width <= total, "{kind}.{}", f.name);
                if f.is_computed() {
                    assert!(!f.fuzzable, "{kind}.{} computed but fuzzable", f.name);
                }
                if let FieldKind::EnumSet(set) = f.kind {
                    for v in set {
                        assert!(
                            f.bit_width == 64 || *v < (1u64 << f.bit_width),
                            "{kind}.{} enum value too wide",
                            f.name
                        );
                    }
                }
                if let FieldKind::Range { lo, hi } = f.kind {
                    assert!(lo <= hi);
                    assert!(f.bit_width == 64 || hi < (1u64 << f.bit_width));
                }
                spans.push((f.bit_offset, f.bit_offset + f.bit_width));
            }
            spans.sort_unstable();
            for w in spans.windows(2) {
                assert!(w[0].1 <= w[1].0, "{kind} fields overlap");
            }
        }
    }
}
