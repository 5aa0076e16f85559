//! Per-scenario dataset construction from labeled captures.

use serde::{Deserialize, Serialize};

use crate::packet::{FieldPath, LayerKind};
use crate::sim::{Label, LabeledCapture, Scenario};

use super::typemap::{field_tuple, table_from_tuples, FieldTuple, TypeTable};
use super::{
    balance_split_items, chop, dedup_and_cross_class_filter, dns_row, vectorize_arp,
    vectorize_telnet, DataError, DatasetSplit, ReprKind, Sample, SampleData,
};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DatasetParams {
    /// Window length for type sequences.
    pub window: usize,
    /// Stride for both type-sequence and matrix chopping.
    pub step: usize,
    /// Rows per DNS byte matrix.
    pub k: usize,
    /// Train fraction.
    pub ratio: f64,
    pub seed: u64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            window: 8,
            step: 4,
            k: 8,
            ratio: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltDataset {
    pub scenario: Scenario,
    pub repr: ReprKind,
    pub split: DatasetSplit,
    /// Present for the type-sequence representation; built from training
    /// windows only, unseen test tuples map to the reserved id 0.
    pub type_table: Option<TypeTable>,
    pub params: DatasetParams,
}

/// The AUTHP fields whose value tuple defines a packet type.
pub fn pth_fields_of_interest() -> Vec<FieldPath> {
    ["stage", "mechanism", "flags", "capabilities", "command"]
        .iter()
        .map(|f| FieldPath::new(LayerKind::Authp, f))
        .collect()
}

pub fn scenario_repr(scenario: Scenario) -> ReprKind {
    match scenario {
        Scenario::Pth => ReprKind::TypeSeq,
        Scenario::Arp => ReprKind::ByteVec,
        Scenario::Dns => ReprKind::ByteMat,
        Scenario::Telnet => ReprKind::HeaderVec,
    }
}

pub fn build_dataset(
    capture: &LabeledCapture,
    params: &DatasetParams,
) -> Result<BuiltDataset, DataError> {
    match capture.scenario {
        Scenario::Pth => build_pth(capture, params),
        Scenario::Arp => build_bytes(capture, params, Scenario::Arp),
        Scenario::Dns => build_dns(capture, params),
        Scenario::Telnet => build_bytes(capture, params, Scenario::Telnet),
    }
}

fn split_from_windows<T, F>(
    benign: Vec<Vec<T>>,
    malicious: Vec<Vec<T>>,
    params: &DatasetParams,
    into_sample: F,
) -> Result<(DatasetSplit, Vec<(Vec<T>, u8)>), DataError>
where
    T: Clone + Eq + std::hash::Hash,
    F: Fn(&Vec<T>) -> SampleData,
{
    let (benign, malicious) = dedup_and_cross_class_filter(&benign, &malicious)?;
    if benign.is_empty() || malicious.is_empty() {
        return Err(DataError::EmptyClass);
    }
    let (train, test) = balance_split_items(benign, malicious, params.ratio, params.seed);
    let to_samples = |items: &[(Vec<T>, u8)]| {
        items
            .iter()
            .map(|(w, y)| Sample {
                x: into_sample(w),
                y: *y,
            })
            .collect::<Vec<_>>()
    };
    let split = DatasetSplit {
        train: to_samples(&train),
        test: to_samples(&test),
        seed: params.seed,
    };
    Ok((split, train))
}

/// Type-sequence windows per session; the table comes from training windows
/// only, so the split happens on raw tuples first.
fn build_pth(capture: &LabeledCapture, params: &DatasetParams) -> Result<BuiltDataset, DataError> {
    let fields = pth_fields_of_interest();
    let mut benign: Vec<Vec<FieldTuple>> = Vec::new();
    let mut malicious: Vec<Vec<FieldTuple>> = Vec::new();
    for ls in &capture.sessions {
        let tuples: Vec<FieldTuple> = ls
            .session
            .packets
            .iter()
            .filter(|cp| cp.packet.has_layer(LayerKind::Authp))
            .map(|cp| field_tuple(&cp.packet, &fields))
            .collect::<Result<_, _>>()?;
        let windows = chop(&tuples, params.window, params.step);
        match ls.labels.first() {
            Some(Label::Malicious) => malicious.extend(windows),
            _ => benign.extend(windows),
        }
    }

    let (benign, malicious) = dedup_and_cross_class_filter(&benign, &malicious)?;
    if benign.is_empty() || malicious.is_empty() {
        return Err(DataError::EmptyClass);
    }
    let (train, test) = balance_split_items(benign, malicious, params.ratio, params.seed);
    let mut table = table_from_tuples(train.iter().flat_map(|(w, _)| w.iter().cloned()));
    table.reindex();
    let map_windows = |items: &[(Vec<FieldTuple>, u8)]| {
        items
            .iter()
            .map(|(w, y)| Sample {
                x: SampleData::TypeSeq(w.iter().map(|t| table.lookup(t)).collect()),
                y: *y,
            })
            .collect::<Vec<_>>()
    };
    let split = DatasetSplit {
        train: map_windows(&train),
        test: map_windows(&test),
        seed: params.seed,
    };
    Ok(BuiltDataset {
        scenario: Scenario::Pth,
        repr: ReprKind::TypeSeq,
        split,
        type_table: Some(table),
        params: *params,
    })
}

/// Per-packet byte vectors (ARP frames or TELNET headers).
fn build_bytes(
    capture: &LabeledCapture,
    params: &DatasetParams,
    scenario: Scenario,
) -> Result<BuiltDataset, DataError> {
    let mut benign: Vec<Vec<u8>> = Vec::new();
    let mut malicious: Vec<Vec<u8>> = Vec::new();
    for ls in &capture.sessions {
        for (cp, label) in ls.session.packets.iter().zip(&ls.labels) {
            let data = match (scenario, label) {
                (_, Label::Excluded) => continue,
                (Scenario::Arp, _) => vectorize_arp(&cp.packet)?,
                (Scenario::Telnet, _) => vectorize_telnet(&cp.packet)?,
                _ => unreachable!("byte representations cover arp and telnet"),
            };
            let bytes = match data {
                SampleData::ByteVec(b) | SampleData::HeaderVec(b) => b,
                _ => unreachable!(),
            };
            match label {
                Label::Benign => benign.push(bytes),
                Label::Malicious => malicious.push(bytes),
                Label::Excluded => {}
            }
        }
    }
    let repr = scenario_repr(scenario);
    let into = |w: &Vec<u8>| match repr {
        ReprKind::ByteVec => SampleData::ByteVec(w.clone()),
        _ => SampleData::HeaderVec(w.clone()),
    };
    let (split, _) = split_from_windows(benign, malicious, params, into)?;
    Ok(BuiltDataset {
        scenario,
        repr,
        split,
        type_table: None,
        params: *params,
    })
}

/// k-row matrices over the mode-ordered row streams.
fn build_dns(capture: &LabeledCapture, params: &DatasetParams) -> Result<BuiltDataset, DataError> {
    let mut benign_rows: Vec<Vec<u8>> = Vec::new();
    let mut malicious_rows: Vec<Vec<u8>> = Vec::new();
    for ls in &capture.sessions {
        let rows: Vec<Vec<u8>> = ls
            .session
            .packets
            .iter()
            .map(|cp| dns_row(&cp.packet))
            .collect::<Result<_, _>>()?;
        match ls.labels.first() {
            Some(Label::Malicious) => malicious_rows.extend(rows),
            _ => benign_rows.extend(rows),
        }
    }
    let benign = chop(&benign_rows, params.k, params.step);
    let malicious = chop(&malicious_rows, params.k, params.step);
    let (split, _) = split_from_windows(benign, malicious, params, |w| {
        SampleData::ByteMat(w.clone())
    })?;
    Ok(BuiltDataset {
        scenario: Scenario::Dns,
        repr: ReprKind::ByteMat,
        split,
        type_table: None,
        params: *params,
    })
}

/// Per-session type-sequence windows mapped through an existing table, for
/// session-level threshold evaluation.
pub fn pth_session_windows(
    capture: &LabeledCapture,
    params: &DatasetParams,
    table: &TypeTable,
) -> Result<Vec<(u64, Vec<SampleData>)>, DataError> {
    let fields = pth_fields_of_interest();
    let mut out = Vec::new();
    for ls in &capture.sessions {
        let tuples: Vec<FieldTuple> = ls
            .session
            .packets
            .iter()
            .filter(|cp| cp.packet.has_layer(LayerKind::Authp))
            .map(|cp| field_tuple(&cp.packet, &fields))
            .collect::<Result<_, _>>()?;
        let windows: Vec<SampleData> = chop(&tuples, params.window, params.step)
            .into_iter()
            .map(|w| SampleData::TypeSeq(w.iter().map(|t| table.lookup(t)).collect()))
            .collect();
        out.push((ls.session.id, windows));
    }
    Ok(out)
}
