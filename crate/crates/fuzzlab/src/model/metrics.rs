//! Confusion-matrix metrics.
//!
//! Two false-positive-rate conventions are computed side by side: the
//! fp/(fp+tp) ratio that matches the reported result tables, and the
//! standard fp/(fp+tn). Degenerate denominators surface as absent values
//! rather than errors.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl Confusion {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Confusion {
        Confusion { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn record(&mut self, truth: u8, predicted: u8) {
        match (truth, predicted) {
            (0, 0) => self.tn += 1,
            (0, _) => self.fp += 1,
            (_, 0) => self.fn_ += 1,
            (_, _) => self.tp += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    /// fp/(fp+tp), the convention behind the reported tables.
    pub fpr_paper: Option<f64>,
    /// fp/(fp+tn).
    pub fpr_standard: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

pub fn compute_metrics(confusion: Confusion) -> Metrics {
    let Confusion { tn, fp, fn_, tp } = confusion;
    let accuracy = ratio(tn + tp, tn + fp + fn_ + tp);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Metrics {
        confusion,
        accuracy,
        f1,
        fpr_paper: ratio(fp, fp + tp),
        fpr_standard: ratio(fp, fp + tn),
    }
}

/// Session verdicts from per-session malicious sample fractions: a session
/// is malicious when its fraction meets or exceeds the threshold.
pub fn session_threshold(fractions: &[f64], threshold: f64) -> Vec<bool> {
    fractions.iter().map(|f| *f >= threshold).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Option<f64>, b: f64) -> bool {
        a.map(|v| (v - b).abs() < 1e-4).unwrap_or(false)
    }

    #[test]
    fn arp_table_numbers_reproduce() {
        let m = compute_metrics(Confusion::new(1188, 5, 1, 1206));
        assert!(close(m.accuracy, 0.9975));
        assert!(close(m.f1, 0.9975));
        assert!(close(m.fpr_paper, 0.0041));
    }

    #[test]
    fn telnet_table_numbers_reproduce() {
        let m = compute_metrics(Confusion::new(1296, 1, 1, 1324));
        assert!(close(m.accuracy, 0.9992));
        assert!(close(m.f1, 0.9992));
        assert!(close(m.fpr_paper, 0.0008));
    }

    #[test]
    fn dns_table_numbers_reproduce() {
        let m = compute_metrics(Confusion::new(3878, 11, 10, 3833));
        assert!(close(m.accuracy, 0.9973));
        assert!(close(m.f1, 0.9973));
        assert!(close(m.fpr_paper, 0.0028));
    }

    #[test]
    fn pth_table_accuracy_reproduces_and_f1_follows_the_formula() {
        // The standard positive-class formula gives 0.9928 here; the
        // originally reported 0.9916 is inconsistent with its own matrix.
        let m = compute_metrics(Confusion::new(289, 3, 2, 345));
        assert!(close(m.accuracy, 0.9922));
        assert!(close(m.f1, 0.9928));
        assert!(close(m.fpr_paper, 0.0086));
    }

    #[test]
    fn perfect_classifier_is_clean() {
        let m = compute_metrics(Confusion::new(10, 0, 0, 10));
        assert_eq!(m.accuracy, Some(1.0));
        assert_eq!(m.f1, Some(1.0));
        assert_eq!(m.fpr_paper, Some(0.0));
        assert_eq!(m.fpr_standard, Some(0.0));
    }

    #[test]
    fn degenerate_denominators_are_undefined() {
        let m = compute_metrics(Confusion::new(5, 0, 0, 0));
        assert_eq!(m.f1, None);
        assert_eq!(m.fpr_paper, None);
        assert!(close(m.accuracy, 1.0));
    }

    #[test]
    fn fpr_conventions_differ() {
        let m = compute_metrics(Confusion::new(100, 10, 0, 40));
        assert!(close(m.fpr_paper, 0.2));
        assert!(close(m.fpr_standard, 10.0 / 110.0));
    }

    #[test]
    fn threshold_verdicts_follow_the_at_least_rule() {
        assert_eq!(session_threshold(&[0.6, 0.2], 0.5), vec![true, false]);
        // Fraction exactly at the threshold counts as malicious.
        assert_eq!(session_threshold(&[0.5], 0.5), vec![true]);
    }

    #[test]
    fn raising_the_threshold_never_detects_more() {
        let fractions = [0.1, 0.33, 0.5, 0.62, 0.9, 0.45, 0.7];
        let mut last = usize::MAX;
        for thr in [0.3, 0.4, 0.5, 0.6, 0.7] {
            let detected = session_threshold(&fractions, thr).iter().filter(|d| **d).count();
            assert!(detected <= last);
            last = detected;
        }
    }

    #[test]
    fn confusion_serializes_with_the_short_keys() {
        let c = Confusion::new(1, 2, 3, 4);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"tn":1,"fp":2,"fn":3,"tp":4}"#);
    }
}
