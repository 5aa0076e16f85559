//! Packet-type numbering: packets sharing identical values on the fields of
//! interest share a type id. Ids are assigned by first appearance starting
//! at 1; id 0 is reserved for tuples never seen when the table was built.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::packet::{FieldPath, FieldValue, Packet};

use super::DataError;

pub type FieldTuple = Vec<FieldValue>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeTable {
    /// Tuples in first-appearance order; index + 1 is the type id.
    entries: Vec<TableEntry>,
    #[serde(skip)]
    index: HashMap<FieldTuple, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableEntry {
    key: Vec<String>,
    id: u32,
}

fn value_to_string(v: &FieldValue) -> String {
    match v {
        FieldValue::Int(n) => n.to_string(),
        FieldValue::Bytes(b) => format!("x{}", hex::encode(b)),
    }
}

fn value_from_string(s: &str) -> FieldValue {
    match s.strip_prefix('x') {
        Some(hexpart) => FieldValue::Bytes(hex::decode(hexpart).unwrap_or_default()),
        None => FieldValue::Int(s.parse().unwrap_or(0)),
    }
}

impl TypeTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest assigned id; the embedding vocabulary is this plus one for
    /// the reserved unseen id 0.
    pub fn max_id(&self) -> u32 {
        self.entries.len() as u32
    }

    fn insert(&mut self, tuple: FieldTuple) -> u32 {
        if let Some(id) = self.index.get(&tuple) {
            return *id;
        }
        let id = self.entries.len() as u32 + 1;
        self.entries.push(TableEntry {
            key: tuple.iter().map(value_to_string).collect(),
            id,
        });
        self.index.insert(tuple, id);
        id
    }

    /// Id for a tuple, or 0 when the table never saw it.
    pub fn lookup(&self, tuple: &FieldTuple) -> u32 {
        self.index.get(tuple).copied().unwrap_or(0)
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .entries
            .iter()
            .map(|e| (e.key.iter().map(|s| value_from_string(s)).collect(), e.id))
            .collect();
    }
}

pub fn field_tuple(packet: &Packet, fields: &[FieldPath]) -> Result<FieldTuple, DataError> {
    fields
        .iter()
        .map(|f| {
            packet
                .get(f)
                .cloned()
                .ok_or_else(|| DataError::UnknownField(f.to_string()))
        })
        .collect()
}

/// Assigns type ids over a packet sequence and returns the table built from
/// it.
pub fn packet_type_map(
    packets: &[&Packet],
    fields: &[FieldPath],
) -> Result<(Vec<u32>, TypeTable), DataError> {
    let mut table = TypeTable::default();
    let mut ids = Vec::with_capacity(packets.len());
    for p in packets {
        let tuple = field_tuple(p, fields)?;
        ids.push(table.insert(tuple));
    }
    Ok((ids, table))
}

/// Builds a table from training tuples only.
pub fn table_from_tuples(tuples: impl Iterator<Item = FieldTuple>) -> TypeTable {
    let mut table = TypeTable::default();
    for t in tuples {
        table.insert(t);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::layers::{authp_mech, authp_stage};
    use crate::packet::LayerKind;

    fn authp_packet(stage: u64, mech: u64, flags: u64) -> Packet {
        let mut p = Packet::new(&[LayerKind::Eth, LayerKind::Ip, LayerKind::Tcp, LayerKind::Authp])
            .unwrap()
            .set_int(LayerKind::Authp, "stage", stage)
            .unwrap()
            .set_int(LayerKind::Authp, "mechanism", mech)
            .unwrap()
            .set_int(LayerKind::Authp, "command", 0)
            .unwrap()
            .set_int(LayerKind::Authp, "flags", flags)
            .unwrap()
            .set_int(LayerKind::Authp, "capabilities", 0)
            .unwrap();
        p = p.set_int(LayerKind::Authp, "dialect", 1).unwrap();
        p
    }

    fn foi() -> Vec<FieldPath> {
        ["stage", "mechanism", "flags"]
            .iter()
            .map(|f| FieldPath::new(LayerKind::Authp, f))
            .collect()
    }

    #[test]
    fn identical_tuples_share_an_id() {
        let a = authp_packet(authp_stage::NEGOTIATE, authp_mech::PASSWORD_PROOF, 0);
        let b = authp_packet(authp_stage::NEGOTIATE, authp_mech::PASSWORD_PROOF, 0);
        let (ids, _) = packet_type_map(&[&a, &b], &foi()).unwrap();
        assert_eq!(ids, vec![1, 1]);
    }

    #[test]
    fn ids_follow_first_appearance() {
        let a = authp_packet(1, 1, 0);
        let b = authp_packet(2, 1, 0);
        let (ids, table) = packet_type_map(&[&a, &b, &a], &foi()).unwrap();
        assert_eq!(ids, vec![1, 2, 1]);
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn unknown_fields_error() {
        let a = authp_packet(1, 1, 0);
        let err = packet_type_map(&[&a], &[FieldPath::new(LayerKind::Dns, "id")]).unwrap_err();
        assert!(matches!(err, DataError::UnknownField(_)));
    }

    #[test]
    fn mapping_is_injective_on_tuples() {
        use rand::Rng as _;
        let mut rng = crate::rng::rng_from(101);
        let packets: Vec<Packet> = (0..1000)
            .map(|_| {
                authp_packet(
                    rng.gen_range(1..=6),
                    rng.gen_range(1..=3),
                    rng.gen_range(0..8),
                )
            })
            .collect();
        let refs: Vec<&Packet> = packets.iter().collect();
        let fields = foi();
        let (ids, _) = packet_type_map(&refs, &fields).unwrap();
        // Brute-force tuple comparison oracle.
        for i in 0..packets.len() {
            for j in (i + 1)..packets.len() {
                let ti = field_tuple(&packets[i], &fields).unwrap();
                let tj = field_tuple(&packets[j], &fields).unwrap();
                assert_eq!(ti == tj, ids[i] == ids[j], "packets {i},{j}");
            }
        }
    }

    #[test]
    fn unseen_tuples_map_to_zero_after_reindex() {
        let a = authp_packet(1, 1, 0);
        let (_, mut table) = packet_type_map(&[&a], &foi()).unwrap();
        let json = serde_json::to_string(&table).unwrap();
        let mut back: TypeTable = serde_json::from_str(&json).unwrap();
        back.reindex();
        table.reindex();
        let seen = field_tuple(&a, &foi()).unwrap();
        assert_eq!(back.lookup(&seen), 1);
        let unseen = field_tuple(&authp_packet(2, 2, 3), &foi()).unwrap();
        assert_eq!(back.lookup(&unseen), 0);
    }
}
