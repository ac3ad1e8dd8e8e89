use crate::error::{Error, Result};

/// Probability clamp applied before taking logs.
pub const BCE_EPSILON: f64 = 1e-15;

/// Binary cross-entropy of a single prediction.
pub fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Utterance-level and mean position-level BCE terms of the matcher loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLoss {
    pub utterance: f64,
    pub phoneme: f64,
}

impl JointLoss {
    pub fn total(&self) -> f64 {
        self.utterance + self.phoneme
    }
}

pub fn joint_loss(p_utt: f64, y_utt: f64, p_phon: &[f64], y_phon: &[f64]) -> Result<JointLoss> {
    if p_phon.len() != y_phon.len() {
        return Err(Error::Dimension(format!(
            "{} phoneme predictions for {} labels",
            p_phon.len(),
            y_phon.len()
        )));
    }
    if p_phon.is_empty() {
        return Err(Error::Empty("phoneme labels"));
    }
    let phoneme = p_phon.iter().zip(y_phon).map(|(&p, &y)| bce(p, y)).sum::<f64>()
        / p_phon.len() as f64;
    Ok(JointLoss {
        utterance: bce(p_utt, y_utt),
        phoneme,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed() {
        let l = joint_loss(0.5, 1.0, &[0.5, 0.5], &[1.0, 0.0]).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((l.utterance - ln2).abs() < 1e-15);
        assert!((l.phoneme - ln2).abs() < 1e-15);
        assert!((l.total() - 2.0 * ln2).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_saturated() {
        let l = joint_loss(1.0, 1.0, &[0.0], &[0.0]).unwrap();
        assert!(l.total() < 1e-12);
        let worst = joint_loss(0.0, 1.0, &[1.0], &[0.0]).unwrap();
        assert!(worst.utterance.is_finite() && worst.utterance > 30.0);
        assert!(worst.phoneme.is_finite());
    }

    #[test]
    fn length_mismatch() {
        assert!(joint_loss(0.5, 1.0, &[0.5], &[1.0, 0.0]).is_err());
        assert!(joint_loss(0.5, 1.0, &[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn non_negative(
            p_utt in 0.0f64..=1.0,
            y_utt in prop::bool::ANY,
            pairs in prop::collection::vec((0.0f64..=1.0, prop::bool::ANY), 1..8),
        ) {
            let (p, y): (Vec<f64>, Vec<f64>) =
                pairs.into_iter().map(|(p, y)| (p, if y { 1.0 } else { 0.0 })).unzip();
            let l = joint_loss(p_utt, if y_utt { 1.0 } else { 0.0 }, &p, &y).unwrap();
            prop_assert!(l.utterance >= 0.0 && l.phoneme >= 0.0);
        }
    }
}
