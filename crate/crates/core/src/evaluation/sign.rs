//! Sign prediction: classify the year-over-year earnings change as
//! negative / neutral / positive and score predictions with macro metrics.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Neutral,
    Positive,
}

impl Sign {
    pub fn index(self) -> usize {
        match self {
            Sign::Negative => 0,
            Sign::Neutral => 1,
            Sign::Positive => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Negative => "negative",
            Sign::Neutral => "neutral",
            Sign::Positive => "positive",
        }
    }
}

/// Neutral when the absolute relative change |(eps − prev)/prev| is
/// strictly below the threshold; otherwise the sign of the raw change
/// eps − prev. Rows with prev = 0 are excluded (None).
pub fn sign_classify(eps: f64, prev: f64, threshold: f64) -> Option<Sign> {
    if prev == 0.0 {
        return None;
    }
    let delta = eps - prev;
    Some(if (delta / prev).abs() < threshold {
        Sign::Neutral
    } else if delta > 0.0 {
        Sign::Positive
    } else {
        Sign::Negative
    })
}

/// 3×3 confusion matrix; rows = actual class, columns = predicted class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SignConfusion {
    pub counts: [[usize; 3]; 3],
}

impl SignConfusion {
    pub fn add(&mut self, actual: Sign, predicted: Sign) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Macro-averaged classification metrics. Classes with no predicted (or
/// actual) instances contribute 0 to the corresponding mean.
#[derive(Clone, Debug, PartialEq)]
pub struct SignReport {
    pub confusion: SignConfusion,
    pub n: usize,
    /// Mean over classes of (TP + TN) / n.
    pub average_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Mean of the per-class F1 scores.
    pub macro_f1: f64,
    /// Harmonic mean of macro precision and macro recall (alternative
    /// definition, reported alongside).
    pub macro_f1_harmonic: f64,
}

pub fn macro_metrics(confusion: &SignConfusion) -> Result<SignReport, SignError> {
    let n = confusion.total();
    if n == 0 {
        return Err(SignError::EmptyMatrix);
    }
    let nf = n as f64;
    let mut acc_sum = 0.0;
    let mut prec_sum = 0.0;
    let mut rec_sum = 0.0;
    let mut f1_sum = 0.0;
    for c in 0..3 {
        let tp = confusion.counts[c][c] as f64;
        let fp: f64 = (0..3).filter(|&r| r != c).map(|r| confusion.counts[r][c] as f64).sum();
        let fn_: f64 = (0..3).filter(|&p| p != c).map(|p| confusion.counts[c][p] as f64).sum();
        let tn = nf - tp - fp - fn_;
        acc_sum += (tp + tn) / nf;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        prec_sum += precision;
        rec_sum += recall;
        f1_sum += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    let macro_precision = prec_sum / 3.0;
    let macro_recall = rec_sum / 3.0;
    Ok(SignReport {
        confusion: confusion.clone(),
        n,
        average_accuracy: acc_sum / 3.0,
        macro_precision,
        macro_recall,
        macro_f1: f1_sum / 3.0,
        macro_f1_harmonic: if macro_precision + macro_recall > 0.0 {
            2.0 * macro_precision * macro_recall / (macro_precision + macro_recall)
        } else {
            0.0
        },
    })
}
