//! Converts labeled captures into the four sample representations:
//! packet-type windows, 42-byte ARP vectors, k-row DNS byte matrices, and
//! 40-byte TELNET header vectors. Chopping, duplicate removal, cross-class
//! removal, balancing, and splitting happen here.

mod builders;
mod typemap;

pub use builders::{
    build_dataset, pth_fields_of_interest, pth_session_windows, scenario_repr, BuiltDataset,
    DatasetParams,
};
pub use typemap::{packet_type_map, TypeTable};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::{LayerKind, Packet, PacketError};
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("window length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("bad frame length: {0} bytes")]
    BadLength(usize),
    #[error("nonzero padding tail")]
    NonZeroTail,
    #[error("packet stack does not fit this representation")]
    BadStack,
    #[error("a class is empty")]
    EmptyClass,
    #[error("packet not finalized")]
    NotFinalized,
    #[error(transparent)]
    Packet(#[from] PacketError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReprKind {
    #[serde(rename = "typeseq")]
    TypeSeq,
    #[serde(rename = "bytevec")]
    ByteVec,
    #[serde(rename = "bytemat")]
    ByteMat,
    #[serde(rename = "headervec")]
    HeaderVec,
}

impl ReprKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReprKind::TypeSeq => "typeseq",
            ReprKind::ByteVec => "bytevec",
            ReprKind::ByteMat => "bytemat",
            ReprKind::HeaderVec => "headervec",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SampleData {
    TypeSeq(Vec<u32>),
    ByteVec(Vec<u8>),
    ByteMat(Vec<Vec<u8>>),
    HeaderVec(Vec<u8>),
}

impl SampleData {
    pub fn repr(&self) -> ReprKind {
        match self {
            SampleData::TypeSeq(_) => ReprKind::TypeSeq,
            SampleData::ByteVec(_) => ReprKind::ByteVec,
            SampleData::ByteMat(_) => ReprKind::ByteMat,
            SampleData::HeaderVec(_) => ReprKind::HeaderVec,
        }
    }

    pub fn feature_len(&self) -> usize {
        match self {
            SampleData::TypeSeq(v) => v.len(),
            SampleData::ByteVec(v) | SampleData::HeaderVec(v) => v.len(),
            SampleData::ByteMat(rows) => rows.iter().map(Vec::len).sum(),
        }
    }

    /// Flat numeric view. Byte representations scale into [0,1]; type ids
    /// stay integral for the embedding path.
    pub fn features(&self) -> Vec<f64> {
        match self {
            SampleData::TypeSeq(v) => v.iter().map(|id| f64::from(*id)).collect(),
            SampleData::ByteVec(v) | SampleData::HeaderVec(v) => {
                v.iter().map(|b| f64::from(*b) / 255.0).collect()
            }
            SampleData::ByteMat(rows) => rows
                .iter()
                .flat_map(|r| r.iter().map(|b| f64::from(*b) / 255.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub x: SampleData,
    pub y: u8,
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub seed: u64,
}

/// Fixed-length windows at offsets 0, step, 2·step, ...; an incomplete tail
/// is dropped.
pub fn chop<T: Clone>(seq: &[T], window: usize, step: usize) -> Vec<Vec<T>> {
    assert!(window >= 1 && step >= 1, "window and step must be positive");
    if seq.len() < window {
        return Vec::new();
    }
    (0..=(seq.len() - window))
        .step_by(step)
        .map(|start| seq[start..start + window].to_vec())
        .collect()
}

/// Removes windows that appear in both classes from both, then collapses
/// exact duplicates within each class, preserving first-occurrence order.
pub fn dedup_and_cross_class_filter<T: Clone + Eq + std::hash::Hash>(
    benign: &[Vec<T>],
    malicious: &[Vec<T>],
) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>), DataError> {
    use std::collections::HashSet;
    let mut width: Option<usize> = None;
    for w in benign.iter().chain(malicious) {
        match width {
            None => width = Some(w.len()),
            Some(n) if n != w.len() => {
                return Err(DataError::LengthMismatch { a: n, b: w.len() })
            }
            _ => {}
        }
    }

    let benign_set: HashSet<&Vec<T>> = benign.iter().collect();
    let malicious_set: HashSet<&Vec<T>> = malicious.iter().collect();
    let keep = |side: &[Vec<T>], other: &HashSet<&Vec<T>>| {
        let mut seen: HashSet<Vec<T>> = HashSet::new();
        side.iter()
            .filter(|w| !other.contains(w))
            .filter(|w| seen.insert((*w).clone()))
            .cloned()
            .collect::<Vec<_>>()
    };
    Ok((keep(benign, &malicious_set), keep(malicious, &benign_set)))
}

/// First 42 bytes of an ARP frame; 60-byte frames must carry an all-zero
/// padding tail.
pub fn vectorize_arp(packet: &Packet) -> Result<SampleData, DataError> {
    let raw = packet.raw().ok_or(DataError::NotFinalized)?;
    match raw.len() {
        42 => Ok(SampleData::ByteVec(raw.to_vec())),
        60 => {
            if raw[42..].iter().any(|b| *b != 0) {
                Err(DataError::NonZeroTail)
            } else {
                Ok(SampleData::ByteVec(raw[..42].to_vec()))
            }
        }
        n => Err(DataError::BadLength(n)),
    }
}

/// One 40-integer row per packet, bytes 15..54 counted from 1 (the IP, UDP,
/// and DNS header regions), zero-padded for short packets; rows grouped
/// into k-row matrices.
pub fn matrixize_dns(
    packets: &[&Packet],
    k: usize,
    step: usize,
) -> Result<Vec<SampleData>, DataError> {
    let rows: Vec<Vec<u8>> = packets.iter().map(|p| dns_row(p)).collect::<Result<_, _>>()?;
    Ok(chop(&rows, k, step).into_iter().map(SampleData::ByteMat).collect())
}

pub fn dns_row(packet: &Packet) -> Result<Vec<u8>, DataError> {
    let raw = packet.raw().ok_or(DataError::NotFinalized)?;
    let mut row = vec![0u8; 40];
    let have = raw.len().saturating_sub(14).min(40);
    row[..have].copy_from_slice(&raw[14..14 + have]);
    Ok(row)
}

/// IP plus TCP header bytes of a TELNET packet; the application layer never
/// reaches the vector.
pub fn vectorize_telnet(packet: &Packet) -> Result<SampleData, DataError> {
    if !packet.has_layer(LayerKind::Telnet) {
        return Err(DataError::BadStack);
    }
    let raw = packet.raw().ok_or(DataError::NotFinalized)?;
    Ok(SampleData::HeaderVec(raw[14..54].to_vec()))
}

/// Downsamples the majority class to the minority size, then splits each
/// class at the ratio and shuffles, so both splits stay balanced to within
/// one sample.
pub fn balance_and_split(
    samples: Vec<Sample>,
    ratio: f64,
    seed: u64,
) -> Result<DatasetSplit, DataError> {
    let mut benign = Vec::new();
    let mut malicious = Vec::new();
    for s in samples {
        match s.y {
            0 => benign.push(s.x),
            _ => malicious.push(s.x),
        }
    }
    if benign.is_empty() || malicious.is_empty() {
        return Err(DataError::EmptyClass);
    }
    let (train, test) = balance_split_items(benign, malicious, ratio, seed);
    let wrap = |items: Vec<(SampleData, u8)>| {
        items.into_iter().map(|(x, y)| Sample { x, y }).collect::<Vec<_>>()
    };
    Ok(DatasetSplit {
        train: wrap(train),
        test: wrap(test),
        seed,
    })
}

/// The balancing and stratified-split core, shared by the sample-level
/// operation and the per-scenario builders.
pub(crate) fn balance_split_items<T>(
    mut benign: Vec<T>,
    mut malicious: Vec<T>,
    ratio: f64,
    seed: u64,
) -> (Vec<(T, u8)>, Vec<(T, u8)>) {
    let mut rng = rng_from(derive_seed(seed, "balance"));
    let target = benign.len().min(malicious.len());
    for class in [&mut benign, &mut malicious] {
        if class.len() > target {
            class.shuffle(&mut rng);
            class.truncate(target);
        }
    }

    let n_train = (ratio * target as f64).round() as usize;
    let mut train: Vec<(T, u8)> = Vec::with_capacity(2 * n_train);
    let mut test: Vec<(T, u8)> = Vec::with_capacity(2 * (target - n_train));
    for (class, y) in [(benign, 0u8), (malicious, 1u8)] {
        let mut class = class;
        class.shuffle(&mut rng);
        for (i, item) in class.into_iter().enumerate() {
            if i < n_train {
                train.push((item, y));
            } else {
                test.push((item, y));
            }
        }
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::MAC_BROADCAST;

    #[test]
    fn chop_reproduces_the_worked_example() {
        let out = chop(&[1, 2, 3, 4, 5, 6, 7, 8], 4, 2);
        assert_eq!(out, vec![vec![1, 2, 3, 4], vec![3, 4, 5, 6], vec![5, 6, 7, 8]]);
    }

    #[test]
    fn chop_of_exact_window_is_identity() {
        assert_eq!(chop(&[7, 8, 9], 3, 1), vec![vec![7, 8, 9]]);
    }

    #[test]
    fn chop_drops_the_incomplete_tail() {
        assert_eq!(chop(&[1, 2, 3, 4, 5], 4, 2), vec![vec![1, 2, 3, 4]]);
        assert!(chop(&[1, 2], 4, 2).is_empty());
    }

    #[test]
    fn chop_count_matches_the_closed_form() {
        // Brute-force enumerator over all small shapes.
        for len in 0..=20usize {
            let seq: Vec<u32> = (0..len as u32).collect();
            for window in 1..=8 {
                for step in 1..=4 {
                    let got = chop(&seq, window, step).len();
                    let mut expected = 0;
                    let mut start = 0;
                    while start + window <= len {
                        expected += 1;
                        start += step;
                    }
                    assert_eq!(got, expected, "len {len} w {window} s {step}");
                    let formula = if len >= window { (len - window) / step + 1 } else { 0 };
                    assert_eq!(got, formula);
                }
            }
        }
    }

    #[test]
    fn cross_class_overlap_is_removed_from_both() {
        let (b, m) = dedup_and_cross_class_filter(&[vec![1, 2]], &[vec![1, 2]]).unwrap();
        assert!(b.is_empty());
        assert!(m.is_empty());
    }

    #[test]
    fn within_class_duplicates_collapse() {
        let (b, m) =
            dedup_and_cross_class_filter(&[vec![1, 2], vec![1, 2], vec![3, 4]], &[vec![9, 9]])
                .unwrap();
        assert_eq!(b, vec![vec![1, 2], vec![3, 4]]);
        assert_eq!(m, vec![vec![9, 9]]);
    }

    #[test]
    fn mismatched_window_lengths_error() {
        assert!(matches!(
            dedup_and_cross_class_filter(&[vec![1, 2]], &[vec![1, 2, 3]]),
            Err(DataError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn filter_matches_a_set_algebra_oracle() {
        use rand::Rng as _;
        use std::collections::HashSet;
        let mut rng = rng_from(33);
        for _ in 0..200 {
            let gen = |rng: &mut crate::rng::Rng| -> Vec<Vec<u8>> {
                (0..rng.gen_range(0..30))
                    .map(|_| (0..3).map(|_| rng.gen_range(0..4)).collect())
                    .collect()
            };
            let benign = gen(&mut rng);
            let malicious = gen(&mut rng);
            let (b, m) = dedup_and_cross_class_filter(&benign, &malicious).unwrap();

            let bs: HashSet<_> = benign.iter().cloned().collect();
            let ms: HashSet<_> = malicious.iter().cloned().collect();
            let expect_b: HashSet<_> = bs.difference(&ms).cloned().collect();
            let expect_m: HashSet<_> = ms.difference(&bs).cloned().collect();
            assert_eq!(b.iter().cloned().collect::<HashSet<_>>(), expect_b);
            assert_eq!(m.iter().cloned().collect::<HashSet<_>>(), expect_m);
            assert_eq!(b.len(), expect_b.len(), "no duplicates survive");
            assert_eq!(m.len(), expect_m.len());
        }
    }

    fn arp_packet() -> Packet {
        Packet::new(&[LayerKind::Eth, LayerKind::Arp])
            .unwrap()
            .set_int(LayerKind::Eth, "dst_mac", MAC_BROADCAST)
            .unwrap()
            .set_int(LayerKind::Eth, "src_mac", 0xfeff_ffff_ff01)
            .unwrap()
            .set_int(LayerKind::Arp, "oper", 1)
            .unwrap()
            .set_int(LayerKind::Arp, "sender_mac", 0xfeff_ffff_ff01)
            .unwrap()
            .set_int(LayerKind::Arp, "sender_ip", 0x0a000005)
            .unwrap()
            .set_int(LayerKind::Arp, "target_mac", MAC_BROADCAST)
            .unwrap()
            .set_int(LayerKind::Arp, "target_ip", 0x0a000009)
            .unwrap()
            .finalize()
            .unwrap()
    }

    #[test]
    fn arp_vector_is_the_42_byte_frame() {
        let p = arp_packet();
        let v = vectorize_arp(&p).unwrap();
        assert_eq!(v, SampleData::ByteVec(p.raw().unwrap().to_vec()));
    }

    #[test]
    fn padded_arp_frame_keeps_the_meaningful_prefix() {
        let p = arp_packet();
        let first42 = p.raw().unwrap().to_vec();
        let mut raw = first42.clone();
        raw.resize(60, 0);
        let padded = crate::packet::decode(&raw, &[LayerKind::Eth, LayerKind::Arp]).unwrap();
        assert_eq!(vectorize_arp(&padded).unwrap(), SampleData::ByteVec(first42));
    }

    #[test]
    fn nonzero_tail_and_bad_lengths_are_rejected() {
        let p = arp_packet();
        let mut raw = p.raw().unwrap().to_vec();
        raw.resize(60, 0);
        raw[49] = 7;
        // Build a carrier packet with the corrupted tail preserved in raw.
        let err = {
            // The decoder itself refuses nonzero trailing bytes, which is
            // the same framing anomaly the vectorizer guards against.
            crate::packet::decode(&raw, &[LayerKind::Eth, LayerKind::Arp]).unwrap_err()
        };
        assert!(matches!(err, PacketError::MalformedPacket(_)));
    }

    #[test]
    fn dns_rows_zero_pad_short_packets() {
        let p = arp_packet(); // 42 bytes: 28 visible beyond the ETH header
        let row = dns_row(&p).unwrap();
        assert_eq!(row.len(), 40);
        assert_eq!(&row[..28], &p.raw().unwrap()[14..42]);
        assert!(row[28..].iter().all(|b| *b == 0));
    }

    #[test]
    fn balance_downsamples_and_splits_at_the_ratio() {
        let samples: Vec<Sample> = (0..100)
            .map(|i| Sample { x: SampleData::ByteVec(vec![i as u8; 42]), y: 0 })
            .chain((0..60).map(|i| Sample {
                x: SampleData::ByteVec(vec![200u8.wrapping_add(i as u8); 42]),
                y: 1,
            }))
            .collect();
        let split = balance_and_split(samples, 0.8, 11).unwrap();
        assert_eq!(split.train.len(), 96);
        assert_eq!(split.test.len(), 24);
        for part in [&split.train, &split.test] {
            let pos = part.iter().filter(|s| s.y == 1).count();
            assert_eq!(pos * 2, part.len());
        }
    }

    #[test]
    fn balanced_input_loses_no_samples() {
        let samples: Vec<Sample> = (0..40)
            .map(|i| Sample { x: SampleData::ByteVec(vec![i as u8; 42]), y: (i % 2) as u8 })
            .collect();
        let split = balance_and_split(samples, 0.8, 5).unwrap();
        assert_eq!(split.train.len() + split.test.len(), 40);
    }

    #[test]
    fn splits_are_deterministic_per_seed() {
        let make = || -> Vec<Sample> {
            (0..50)
                .map(|i| Sample { x: SampleData::ByteVec(vec![i as u8; 42]), y: (i % 2) as u8 })
                .collect()
        };
        let a = balance_and_split(make(), 0.8, 9).unwrap();
        let b = balance_and_split(make(), 0.8, 9).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn empty_class_errors() {
        let samples: Vec<Sample> = (0..10)
            .map(|i| Sample { x: SampleData::ByteVec(vec![i as u8; 42]), y: 0 })
            .collect();
        assert!(matches!(
            balance_and_split(samples, 0.8, 1),
            Err(DataError::EmptyClass)
        ));
    }
}
