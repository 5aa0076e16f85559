//! The packet value store, wire encoding, and decoding.

use std::collections::BTreeMap;

use super::checksum::{internet_checksum, pseudo_header_checksum};
use super::layers::{layer_schema, may_follow};
use super::schema::{FieldKind, FieldPath, FieldSchema, LayerKind};
use super::PacketError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldValue {
    Int(u64),
    Bytes(Vec<u8>),
}

impl FieldValue {
    pub fn as_int(&self) -> Option<u64> {
        match self {
            FieldValue::Int(v) => Some(*v),
            FieldValue::Bytes(_) => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            FieldValue::Bytes(b) => Some(b),
            FieldValue::Int(_) => None,
        }
    }
}

/// An ordered layer stack with per-layer field values. Immutable: mutating
/// operations return a new packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    stack: Vec<LayerKind>,
    values: Vec<BTreeMap<&'static str, FieldValue>>,
    finalized: bool,
    raw: Option<Vec<u8>>,
}

fn validate_stack(stack: &[LayerKind]) -> Result<(), PacketError> {
    if stack.is_empty() {
        return Err(PacketError::UnknownLayerStack("empty".into()));
    }
    let mut prev = None;
    for kind in stack {
        if !may_follow(prev, *kind) {
            let desc: Vec<&str> = stack.iter().map(|k| k.as_str()).collect();
            return Err(PacketError::UnknownLayerStack(desc.join("+")));
        }
        prev = Some(*kind);
    }
    Ok(())
}

fn check_value(schema: &FieldSchema, value: &FieldValue) -> Result<(), PacketError> {
    let field = format!("{}.{}", schema.layer, schema.name);
    match (schema.kind, value) {
        (FieldKind::OpaqueBytes, FieldValue::Bytes(b)) => {
            if !schema.is_variable() && b.len() != schema.bit_width / 8 {
                return Err(PacketError::ValueOutOfRange {
                    field,
                    detail: format!("expected {} bytes, got {}", schema.bit_width / 8, b.len()),
                });
            }
            Ok(())
        }
        (FieldKind::OpaqueBytes, FieldValue::Int(_)) => Err(PacketError::ValueOutOfRange {
            field,
            detail: "byte field assigned an integer".into(),
        }),
        (_, FieldValue::Bytes(_)) => Err(PacketError::ValueOutOfRange {
            field,
            detail: "integer field assigned bytes".into(),
        }),
        (_, FieldValue::Int(v)) => {
            if schema.validate_int(*v) {
                Ok(())
            } else {
                Err(PacketError::ValueOutOfRange {
                    field,
                    detail: format!("value {v} outside the valid set"),
                })
            }
        }
    }
}

impl Packet {
    /// New unfinalized packet. Fields whose valid set has exactly one value
    /// are pre-filled; everything else starts unset.
    pub fn new(stack: &[LayerKind]) -> Result<Packet, PacketError> {
        validate_stack(stack)?;
        let mut values = Vec::with_capacity(stack.len());
        for kind in stack {
            let mut map = BTreeMap::new();
            for f in layer_schema(*kind).fields {
                if f.optional {
                    continue;
                }
                if let FieldKind::EnumSet(set) = f.kind {
                    if set.len() == 1 {
                        map.insert(f.name, FieldValue::Int(set[0]));
                    }
                }
            }
            values.push(map);
        }
        let mut p = Packet {
            stack: stack.to_vec(),
            values,
            finalized: false,
            raw: None,
        };
        // ethertype and ip.protocol follow from the stack.
        if let Some(i) = p.layer_index(LayerKind::Eth) {
            let ethertype = match stack.get(i + 1) {
                Some(LayerKind::Arp) => 0x0806,
                _ => 0x0800,
            };
            p.values[i].insert("ethertype", FieldValue::Int(ethertype));
        }
        if let Some(i) = p.layer_index(LayerKind::Ip) {
            let proto = match stack.get(i + 1) {
                Some(LayerKind::Udp) => 17,
                _ => 6,
            };
            p.values[i].insert("protocol", FieldValue::Int(proto));
        }
        Ok(p)
    }

    pub fn stack(&self) -> &[LayerKind] {
        &self.stack
    }

    pub fn finalized(&self) -> bool {
        self.finalized
    }

    /// Wire bytes; populated only on finalized packets.
    pub fn raw(&self) -> Option<&[u8]> {
        self.raw.as_deref()
    }

    pub fn layer_index(&self, kind: LayerKind) -> Option<usize> {
        self.stack.iter().position(|k| *k == kind)
    }

    pub fn has_layer(&self, kind: LayerKind) -> bool {
        self.layer_index(kind).is_some()
    }

    pub fn get(&self, path: &FieldPath) -> Option<&FieldValue> {
        let idx = self.layer_index(path.layer)?;
        self.values[idx].get(path.field.as_str())
    }

    pub fn get_int(&self, layer: LayerKind, field: &str) -> Option<u64> {
        let idx = self.layer_index(layer)?;
        self.values[idx].get(field).and_then(FieldValue::as_int)
    }

    pub fn get_bytes(&self, layer: LayerKind, field: &str) -> Option<&[u8]> {
        let idx = self.layer_index(layer)?;
        self.values[idx].get(field).and_then(FieldValue::as_bytes)
    }

    /// Stores a value. Errors: the field does not exist in this packet's
    /// stack, the value violates the field kind, the field is computed, or
    /// the packet is already finalized.
    pub fn set_field(&self, path: &FieldPath, value: FieldValue) -> Result<Packet, PacketError> {
        if self.finalized {
            return Err(PacketError::FinalizedPacket);
        }
        let schema = path.schema()?;
        let idx = self
            .layer_index(path.layer)
            .ok_or_else(|| PacketError::UnknownField(path.to_string()))?;
        if schema.is_computed() {
            return Err(PacketError::ComputedFieldWrite(path.to_string()));
        }
        check_value(schema, &value)?;
        let mut next = self.clone();
        next.values[idx].insert(schema.name, value);
        Ok(next)
    }

    pub fn set_int(&self, layer: LayerKind, field: &str, v: u64) -> Result<Packet, PacketError> {
        self.set_field(&FieldPath::new(layer, field), FieldValue::Int(v))
    }

    pub fn set_bytes(
        &self,
        layer: LayerKind,
        field: &str,
        b: Vec<u8>,
    ) -> Result<Packet, PacketError> {
        self.set_field(&FieldPath::new(layer, field), FieldValue::Bytes(b))
    }

    /// Field maps, for equality checks and serialization.
    pub fn field_maps(&self) -> &[BTreeMap<&'static str, FieldValue>] {
        &self.values
    }

    fn answer_present(&self, idx: usize) -> bool {
        self.values[idx].contains_key("rr_ttl")
            || self.values[idx].contains_key("rdata")
            || self.values[idx].contains_key("aname")
    }

    /// Bytes this layer occupies on the wire.
    fn layer_size(&self, idx: usize, is_last: bool) -> usize {
        let schema = layer_schema(self.stack[idx]);
        let mut size = schema.fixed_bytes();
        if schema.optional_bits > 0 && self.answer_present(idx) {
            size += schema.optional_bytes();
        }
        if is_last && schema.has_variable_tail() {
            if let Some(FieldValue::Bytes(b)) = self.values[idx].get("payload") {
                size += b.len();
            }
        }
        size
    }

    /// Computes length fields, encodes all layers, computes checksums from
    /// the innermost layer outward, and returns the finalized packet.
    /// Idempotent: finalizing a finalized packet reproduces the same bytes.
    pub fn finalize(&self) -> Result<Packet, PacketError> {
        let mut p = self.clone();
        p.finalized = false;
        p.raw = None;

        let last = p.stack.len() - 1;
        // Presence checks.
        for (idx, kind) in p.stack.iter().enumerate() {
            let schema = layer_schema(*kind);
            let answer = p.answer_present(idx);
            for f in schema.fields {
                if f.is_computed() || f.is_variable() {
                    continue;
                }
                let present = p.values[idx].contains_key(f.name);
                if f.optional {
                    if answer && !present {
                        return Err(PacketError::MissingField(format!("{kind}.{}", f.name)));
                    }
                } else if !present {
                    return Err(PacketError::MissingField(format!("{kind}.{}", f.name)));
                }
            }
            if schema.has_variable_tail() {
                if idx != last {
                    if p.values[idx].contains_key("payload") {
                        return Err(PacketError::MalformedPacket(format!(
                            "{kind} payload on a non-terminal layer"
                        )));
                    }
                } else {
                    p.values[idx]
                        .entry("payload")
                        .or_insert_with(|| FieldValue::Bytes(Vec::new()));
                }
            }
        }

        // Sizes and length fields.
        let sizes: Vec<usize> = (0..p.stack.len())
            .map(|i| p.layer_size(i, i == last))
            .collect();
        let tail_size = |from: usize| sizes[from..].iter().sum::<usize>() as u64;
        for (idx, kind) in p.stack.clone().into_iter().enumerate() {
            match kind {
                LayerKind::Ip => {
                    p.values[idx].insert("ihl", FieldValue::Int(5));
                    p.values[idx].insert("total_length", FieldValue::Int(tail_size(idx)));
                }
                LayerKind::Udp => {
                    p.values[idx].insert("length", FieldValue::Int(tail_size(idx)));
                }
                LayerKind::Tcp => {
                    p.values[idx].insert("data_offset", FieldValue::Int(5));
                }
                LayerKind::Dns => {
                    let answer = p.answer_present(idx);
                    p.values[idx].insert("qdcount", FieldValue::Int(1));
                    p.values[idx].insert("ancount", FieldValue::Int(u64::from(answer)));
                    if answer {
                        p.values[idx].insert("rdlength", FieldValue::Int(4));
                    }
                }
                LayerKind::Authp => {
                    let plen = p.values[idx]
                        .get("payload")
                        .and_then(FieldValue::as_bytes)
                        .map_or(0, <[u8]>::len);
                    p.values[idx].insert("payload_len", FieldValue::Int(plen as u64));
                }
                _ => {}
            }
        }

        // Encode with zeroed checksums.
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0usize, |acc, s| {
                let off = *acc;
                *acc += s;
                Some(off)
            })
            .collect();
        let total: usize = sizes.iter().sum();
        let mut buf = vec![0u8; total];
        for idx in 0..p.stack.len() {
            p.encode_layer(idx, &mut buf[offsets[idx]..offsets[idx] + sizes[idx]])?;
        }

        // Checksums, innermost first so outer coverage sees final bytes.
        for idx in (0..p.stack.len()).rev() {
            let kind = p.stack[idx];
            let region = offsets[idx];
            match kind {
                LayerKind::Authp => {
                    let ck = internet_checksum(&buf[region..]);
                    p.values[idx].insert("checksum", FieldValue::Int(u64::from(ck)));
                    let at = region + 120 / 8;
                    buf[at..at + 2].copy_from_slice(&ck.to_be_bytes());
                }
                LayerKind::Tcp | LayerKind::Udp => {
                    let ip_idx = p
                        .layer_index(LayerKind::Ip)
                        .ok_or_else(|| PacketError::MalformedPacket("transport without ip".into()))?;
                    let src = p.values[ip_idx]["src_ip"].as_int().unwrap() as u32;
                    let dst = p.values[ip_idx]["dst_ip"].as_int().unwrap() as u32;
                    let proto = if kind == LayerKind::Tcp { 6 } else { 17 };
                    let ck = pseudo_header_checksum(src, dst, proto, &buf[region..]);
                    p.values[idx].insert("checksum", FieldValue::Int(u64::from(ck)));
                    let at = region + if kind == LayerKind::Tcp { 16 } else { 6 };
                    buf[at..at + 2].copy_from_slice(&ck.to_be_bytes());
                }
                LayerKind::Ip => {
                    let ck = internet_checksum(&buf[region..region + 20]);
                    p.values[idx].insert("header_checksum", FieldValue::Int(u64::from(ck)));
                    let at = region + 10;
                    buf[at..at + 2].copy_from_slice(&ck.to_be_bytes());
                }
                _ => {}
            }
        }

        p.finalized = true;
        p.raw = Some(buf);
        Ok(p)
    }

    fn encode_layer(&self, idx: usize, out: &mut [u8]) -> Result<(), PacketError> {
        let kind = self.stack[idx];
        let schema = layer_schema(kind);
        let answer = self.answer_present(idx);
        for f in schema.fields {
            if f.optional && !answer {
                continue;
            }
            if f.is_variable() {
                if let Some(FieldValue::Bytes(b)) = self.values[idx].get("payload") {
                    let start = f.bit_offset / 8;
                    out[start..start + b.len()].copy_from_slice(b);
                }
                continue;
            }
            match self.values[idx].get(f.name) {
                Some(FieldValue::Int(v)) => write_bits(out, f.bit_offset, f.bit_width, *v),
                Some(FieldValue::Bytes(b)) => {
                    let start = f.bit_offset / 8;
                    out[start..start + b.len()].copy_from_slice(b);
                }
                // Computed checksums encode as zero on the first pass.
                None if f.is_computed() => {}
                None => return Err(PacketError::MissingField(format!("{kind}.{}", f.name))),
            }
        }
        Ok(())
    }
}

fn read_bits(buf: &[u8], bit_offset: usize, width: usize) -> u64 {
    let mut v = 0u64;
    for i in 0..width {
        let pos = bit_offset + i;
        let bit = (buf[pos / 8] >> (7 - pos % 8)) & 1;
        v = (v << 1) | u64::from(bit);
    }
    v
}

fn write_bits(buf: &mut [u8], bit_offset: usize, width: usize, v: u64) {
    for i in 0..width {
        let pos = bit_offset + i;
        let bit = (v >> (width - 1 - i)) & 1;
        let mask = 1u8 << (7 - pos % 8);
        if bit == 1 {
            buf[pos / 8] |= mask;
        } else {
            buf[pos / 8] &= !mask;
        }
    }
}

/// Extracts field values per the layer schemas. Trailing zero bytes after
/// the last layer are tolerated (minimum-frame padding); any nonzero
/// remainder is malformed.
pub fn decode(bytes: &[u8], stack: &[LayerKind]) -> Result<Packet, PacketError> {
    validate_stack(stack)?;
    let mut values = Vec::with_capacity(stack.len());
    let mut cursor = 0usize;
    let last = stack.len() - 1;

    for (idx, kind) in stack.iter().enumerate() {
        let schema = layer_schema(*kind);
        let region = &bytes[cursor..];
        let fixed = schema.fixed_bytes();
        if region.len() < fixed {
            return Err(PacketError::TruncatedPacket {
                needed: cursor + fixed,
                got: bytes.len(),
            });
        }
        let mut answer = false;
        if schema.optional_bits > 0 {
            let ancount = schema
                .field("ancount")
                .map(|f| read_bits(region, f.bit_offset, f.bit_width))
                .unwrap_or(0);
            answer = ancount == 1;
            if answer && region.len() < fixed + schema.optional_bytes() {
                return Err(PacketError::TruncatedPacket {
                    needed: cursor + fixed + schema.optional_bytes(),
                    got: bytes.len(),
                });
            }
        }
        let mut size = fixed + if answer { schema.optional_bytes() } else { 0 };
        let mut map = BTreeMap::new();
        for f in schema.fields {
            if f.optional && !answer {
                continue;
            }
            if f.is_variable() {
                continue;
            }
            if matches!(f.kind, FieldKind::OpaqueBytes) {
                let start = f.bit_offset / 8;
                let len = f.bit_width / 8;
                map.insert(f.name, FieldValue::Bytes(region[start..start + len].to_vec()));
                continue;
            }
            let v = read_bits(region, f.bit_offset, f.bit_width);
            if !f.is_computed() && !f.validate_int(v) {
                return Err(PacketError::MalformedPacket(format!(
                    "{kind}.{} holds invalid value {v}",
                    f.name
                )));
            }
            map.insert(f.name, FieldValue::Int(v));
        }
        if schema.has_variable_tail() && idx == last {
            let avail = &region[size..];
            let payload = if *kind == LayerKind::Authp {
                let plen = map
                    .get("payload_len")
                    .and_then(FieldValue::as_int)
                    .unwrap_or(0) as usize;
                if avail.len() < plen {
                    return Err(PacketError::TruncatedPacket {
                        needed: cursor + size + plen,
                        got: bytes.len(),
                    });
                }
                avail[..plen].to_vec()
            } else {
                avail.to_vec()
            };
            size += payload.len();
            map.insert("payload", FieldValue::Bytes(payload));
        }
        values.push(map);
        cursor += size;
    }

    if bytes[cursor..].iter().any(|b| *b != 0) {
        return Err(PacketError::MalformedPacket(
            "nonzero bytes after the last layer".into(),
        ));
    }

    Ok(Packet {
        stack: stack.to_vec(),
        values,
        finalized: true,
        raw: Some(bytes.to_vec()),
    })
}
