//! Byzantine message generation: Gaussian, sample-duplicating, ALIE,
//! sign-flipping.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    Gaussian,
    SampleDup,
    Alie,
    SignFlip,
}

/// Which attack the Byzantine agents mount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// ALIE scale factor.
    pub alie_scale: f64,
    /// Honest agent whose messages the sample-duplicating attack replays.
    pub dup_target: Option<usize>,
}

impl AttackSpec {
    pub fn none() -> Self {
        AttackSpec {
            kind: AttackKind::None,
            alie_scale: 0.3,
            dup_target: None,
        }
    }
}

/// Coordinate-wise mean and population standard deviation (divide by the
/// count, not count - 1, so a single visible message has zero deviation).
fn mean_and_std(msgs: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let dim = msgs[0].len();
    let count = msgs.len() as f64;
    let mut mean = vec![0.0; dim];
    for m in msgs {
        linalg::axpy(&mut mean, 1.0, m);
    }
    linalg::scale(&mut mean, 1.0 / count);
    let mut var = vec![0.0; dim];
    for m in msgs {
        for d in 0..dim {
            let diff = m[d] - mean[d];
            var[d] += diff * diff;
        }
    }
    let std = var.iter().map(|&v| (v / count).sqrt()).collect();
    (mean, std)
}

/// Messages the Byzantine neighbors of `recipient` send at one step.
///
/// `honest_visible` holds the half-step messages of the recipient's honest
/// neighbors (sender index, message), ascending — the recipient's own
/// message is excluded. `dup_message` is the duplication target's current
/// half-step message, supplied by the caller for the sample-duplicating
/// attack. The rng must be a substream dedicated to `(recipient, step)`.
pub fn attack_messages(
    spec: &AttackSpec,
    recipient: usize,
    honest_visible: &[(usize, &[f64])],
    dup_message: Option<&[f64]>,
    byz_count: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    assert!(byz_count >= 1, "no byzantine neighbors to speak for");
    let needs_visible = matches!(
        spec.kind,
        AttackKind::Alie | AttackKind::SignFlip | AttackKind::SampleDup
    );
    if needs_visible && honest_visible.is_empty() && dup_message.is_none() {
        return Err(SimError::NoVisibleHonest { recipient });
    }
    match spec.kind {
        AttackKind::None => Ok(vec![vec![0.0; dim]; byz_count]),
        AttackKind::Gaussian => Ok((0..byz_count)
            .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()),
        AttackKind::SampleDup => {
            let msg = dup_message.ok_or(SimError::NoVisibleHonest { recipient })?;
            Ok(vec![msg.to_vec(); byz_count])
        }
        AttackKind::Alie => {
            if honest_visible.is_empty() {
                return Err(SimError::NoVisibleHonest { recipient });
            }
            let msgs: Vec<&[f64]> = honest_visible.iter().map(|&(_, m)| m).collect();
            let (mean, std) = mean_and_std(&msgs);
            let mut out = mean;
            linalg::axpy(&mut out, spec.alie_scale, &std);
            Ok(vec![out; byz_count])
        }
        AttackKind::SignFlip => {
            if honest_visible.is_empty() {
                return Err(SimError::NoVisibleHonest { recipient });
            }
            let msgs: Vec<&[f64]> = honest_visible.iter().map(|&(_, m)| m).collect();
            let (mean, _) = mean_and_std(&msgs);
            let mut out = mean;
            linalg::scale(&mut out, -1.0);
            Ok(vec![out; byz_count])
        }
    }
}
