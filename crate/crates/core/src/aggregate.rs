//! Aggregation rules and the empirical contraction certifier.
//!
//! Every aggregator consumes the recipient's own message together with the
//! neighbors' messages, ordered by ascending sender index. Mean, IOS and
//! SCC additionally take the mixing weights aligned with that order.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::graph::{metropolis_weights, MixingMatrix, Topology};
use crate::linalg;
use crate::rng::substream;

/// Clipping threshold for self-centered clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClipTau {
    Fixed(f64),
    /// Distance-quantile threshold derived from the presumed Byzantine
    /// budget at aggregation time.
    Adaptive(String),
}

impl ClipTau {
    pub fn adaptive() -> Self {
        ClipTau::Adaptive("adaptive".to_string())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClipTau::Fixed(v) if *v >= 0.0 => Ok(()),
            ClipTau::Fixed(v) => Err(SimError::ConfigInvalid(format!(
                "clip_tau must be nonnegative, got {v}"
            ))),
            ClipTau::Adaptive(s) if s == "adaptive" => Ok(()),
            ClipTau::Adaptive(s) => Err(SimError::ConfigInvalid(format!(
                "unknown clip_tau value \"{s}\" (use a number or \"adaptive\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorKind {
    Mean,
    Tm,
    Ios,
    Scc,
}

/// Which rule to run and its robustness budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorSpec {
    pub kind: AggregatorKind,
    /// Presumed Byzantine budget per neighborhood (TM/IOS trim count,
    /// SCC adaptive quantile).
    pub trim_b: usize,
    pub clip_tau: ClipTau,
}

impl AggregatorSpec {
    pub fn mean() -> Self {
        AggregatorSpec {
            kind: AggregatorKind::Mean,
            trim_b: 0,
            clip_tau: ClipTau::adaptive(),
        }
    }

    /// Cap the trim budget at what a neighborhood of `count` received
    /// messages can afford: TM needs `count > 2 trim_b`, IOS and the SCC
    /// quantile need `count > trim_b`.
    pub fn capped_for(&self, count: usize) -> AggregatorSpec {
        let cap = match self.kind {
            AggregatorKind::Tm => count.saturating_sub(1) / 2,
            _ => count.saturating_sub(1),
        };
        AggregatorSpec {
            kind: self.kind,
            trim_b: self.trim_b.min(cap),
            clip_tau: self.clip_tau.clone(),
        }
    }
}

fn check_weights(msgs: usize, weights: &[f64]) -> Result<()> {
    if weights.len() != msgs {
        return Err(SimError::WeightMismatch(format!(
            "{} weights for {} messages",
            weights.len(),
            msgs
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SimError::WeightMismatch(format!("weights sum to {sum}")));
    }
    Ok(())
}

/// Weighted mean with fixed index-order summation. `msgs` includes the
/// recipient's own message; `weights` are aligned and sum to 1.
pub fn aggregate_mean(msgs: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
    check_weights(msgs.len(), weights)?;
    let dim = msgs[0].len();
    let mut out = vec![0.0; dim];
    for (m, &w) in msgs.iter().zip(weights) {
        linalg::axpy(&mut out, w, m);
    }
    Ok(out)
}

/// Coordinate-wise trimmed mean: drop the `trim_b` largest and smallest
/// values per coordinate (self included), average the rest uniformly.
pub fn aggregate_tm(msgs: &[&[f64]], trim_b: usize) -> Result<Vec<f64>> {
    let count = msgs.len();
    if count <= 2 * trim_b {
        return Err(SimError::TooFewMessages {
            received: count,
            min_required: 2 * trim_b,
        });
    }
    let dim = msgs[0].len();
    let keep = count - 2 * trim_b;
    let mut out = vec![0.0; dim];
    let mut column = vec![0.0; count];
    for d in 0..dim {
        for (i, m) in msgs.iter().enumerate() {
            column[i] = m[d];
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut s = 0.0;
        for &v in &column[trim_b..count - trim_b] {
            s += v;
        }
        out[d] = s / keep as f64;
    }
    Ok(out)
}

/// Iterative outlier scissor: starting from the full trust set, repeat
/// `trim_b` times — form the weight-renormalized average of the trusted
/// messages, then distrust the message farthest from it (ties broken by
/// lowest position, i.e. lowest sender index). Returns the final
/// renormalized weighted average.
pub fn aggregate_ios(msgs: &[&[f64]], weights: &[f64], trim_b: usize) -> Result<Vec<f64>> {
    check_weights(msgs.len(), weights)?;
    if msgs.len() <= trim_b {
        return Err(SimError::TooFewMessages {
            received: msgs.len(),
            min_required: trim_b,
        });
    }
    let mut trusted: Vec<usize> = (0..msgs.len()).collect();
    let renorm_avg = |trusted: &[usize]| -> Vec<f64> {
        let wsum: f64 = trusted.iter().map(|&i| weights[i]).sum();
        let mut avg = vec![0.0; msgs[0].len()];
        for &i in trusted {
            linalg::axpy(&mut avg, weights[i] / wsum, msgs[i]);
        }
        avg
    };
    for _ in 0..trim_b {
        let avg = renorm_avg(&trusted);
        let mut worst = 0usize;
        let mut worst_d = f64::NEG_INFINITY;
        for (pos, &i) in trusted.iter().enumerate() {
            let d = linalg::dist_sq(msgs[i], &avg);
            if d > worst_d {
                worst_d = d;
                worst = pos;
            }
        }
        trusted.remove(worst);
    }
    Ok(renorm_avg(&trusted))
}

/// `clip(v, tau) = v * min(1, tau / ||v||)`.
fn clip_to(v: &mut [f64], tau: f64) {
    let n = linalg::norm(v);
    if n > tau {
        let s = if n > 0.0 { tau / n } else { 0.0 };
        linalg::scale(v, s);
    }
}

/// Self-centered clipping: `self + sum_m w_m * clip(msg_m - self, tau)`.
/// `neighbor_msgs`/`neighbor_weights` exclude the recipient's own message.
pub fn aggregate_scc(
    self_msg: &[f64],
    neighbor_msgs: &[&[f64]],
    neighbor_weights: &[f64],
    clip_tau: f64,
) -> Result<Vec<f64>> {
    if neighbor_msgs.len() != neighbor_weights.len() {
        return Err(SimError::WeightMismatch(format!(
            "{} weights for {} neighbor messages",
            neighbor_weights.len(),
            neighbor_msgs.len()
        )));
    }
    let mut out = self_msg.to_vec();
    for (m, &w) in neighbor_msgs.iter().zip(neighbor_weights) {
        let mut inc: Vec<f64> = m.iter().zip(self_msg).map(|(a, b)| a - b).collect();
        clip_to(&mut inc, clip_tau);
        linalg::axpy(&mut out, w, &inc);
    }
    Ok(out)
}

/// Adaptive clipping threshold: with `count` received messages (self
/// included), the `count - trim_b`-th smallest distance to the recipient's
/// own message, i.e. the `ceil((1 - trim_b/count) * count)`-th order
/// statistic.
pub fn adaptive_clip_tau(self_msg: &[f64], msgs: &[&[f64]], trim_b: usize) -> f64 {
    let count = msgs.len();
    let mut dists: Vec<f64> = msgs
        .iter()
        .map(|m| linalg::dist_sq(m, self_msg).sqrt())
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let frac = trim_b as f64 / count as f64;
    let idx = ((1.0 - frac) * count as f64).ceil() as usize;
    dists[idx.clamp(1, count) - 1]
}

/// Dispatch one aggregation. `msgs` are ordered by ascending sender index
/// with the recipient's own message at `self_pos`; `weights` are aligned
/// and sum to 1.
pub fn apply_aggregator(
    spec: &AggregatorSpec,
    msgs: &[Vec<f64>],
    self_pos: usize,
    weights: &[f64],
) -> Result<Vec<f64>> {
    let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
    match spec.kind {
        AggregatorKind::Mean => aggregate_mean(&refs, weights),
        AggregatorKind::Tm => aggregate_tm(&refs, spec.trim_b),
        AggregatorKind::Ios => aggregate_ios(&refs, weights, spec.trim_b),
        AggregatorKind::Scc => {
            let tau = match spec.clip_tau {
                ClipTau::Fixed(t) => t,
                ClipTau::Adaptive(_) => adaptive_clip_tau(&refs[self_pos], &refs, spec.trim_b),
            };
            let neighbors: Vec<&[f64]> = refs
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != self_pos)
                .map(|(_, m)| *m)
                .collect();
            let nw: Vec<f64> = weights
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != self_pos)
                .map(|(_, &w)| w)
                .collect();
            aggregate_scc(&refs[self_pos], &neighbors, &nw, tau)
        }
    }
}

/// Outcome of an empirical contraction check against a reference virtual
/// mixing matrix. The certificate is an observed lower bound on the true
/// worst-case contraction constant, never a proof.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregatorCertificate {
    /// Largest observed ratio `||A_n(..) - xhat_n|| / max_m ||x_m - xhat_n||`.
    pub rho_hat: f64,
    /// Admissible threshold `lambda / (8 sqrt(N))` of the reference matrix.
    pub rho_star: f64,
    /// `lambda - 8 * rho_hat * sqrt(N)`.
    pub w_margin: f64,
    pub trials: usize,
    /// Trials skipped because all honest messages coincided.
    pub skipped: usize,
    pub seed: u64,
    pub virtual_w: MixingMatrix,
}

impl AggregatorCertificate {
    pub fn passes(&self) -> bool {
        self.rho_hat < self.rho_star
    }
}

/// Threshold `lambda / (8 sqrt(N))`.
pub fn rho_star(lambda: f64, n_honest: usize) -> f64 {
    lambda / (8.0 * (n_honest as f64).sqrt())
}

/// Contraction margin `w = lambda - 8 rho sqrt(N)`.
pub fn contraction_margin(lambda: f64, rho: f64, n_honest: usize) -> f64 {
    lambda - 8.0 * rho * (n_honest as f64).sqrt()
}

fn unit_direction(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = linalg::norm(&v);
        if n > 1e-12 {
            let mut v = v;
            linalg::scale(&mut v, 1.0 / n);
            return v;
        }
    }
}

fn sample_in_ball(dim: usize, radius: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut v = unit_direction(dim, rng);
    let u: f64 = rng.random_range(0.0..1.0);
    linalg::scale(&mut v, radius * u.powf(1.0 / dim as f64));
    v
}

/// Empirically certify the contraction property of an aggregation rule on
/// a topology, measuring per-node ratios against the reference virtual
/// mixing matrix over randomized honest configurations and adversarial
/// Byzantine heuristics (far-point, mean-shift, sign-flip).
pub fn certify_contraction(
    spec: &AggregatorSpec,
    t: &Topology,
    w_virtual: &MixingMatrix,
    trials: usize,
    radius: f64,
    dim: usize,
    seed: u64,
) -> Result<AggregatorCertificate> {
    assert!(trials >= 1);
    assert!(radius > 0.0);
    let honest = t.honest();
    let n_honest = honest.len();
    assert_eq!(w_virtual.n(), n_honest, "virtual matrix must index honest agents");
    let full = metropolis_weights(t)?;
    let honest_pos: Vec<Option<usize>> = {
        let mut map = vec![None; t.n_total];
        for (pos, &h) in honest.iter().enumerate() {
            map[h] = Some(pos);
        }
        map
    };

    let mut rho_hat = 0.0f64;
    let mut skipped = 0usize;
    let mut used = 0usize;
    for trial in 0..trials {
        let mut rng = substream(seed, "certify", trial as u64, 0);
        let honest_msgs: Vec<Vec<f64>> = (0..n_honest)
            .map(|_| sample_in_ball(dim, radius, &mut rng))
            .collect();
        let honest_mean = linalg::mean_rows(&honest_msgs);

        // One broadcast message per Byzantine agent per trial.
        let mut byz_msgs: Vec<Vec<f64>> = Vec::new();
        for _ in &t.byzantine {
            let msg = match trial % 3 {
                0 => {
                    let mut v = unit_direction(dim, &mut rng);
                    linalg::scale(&mut v, 1000.0 * radius);
                    v
                }
                1 => {
                    let mut v = honest_mean.clone();
                    let dir = unit_direction(dim, &mut rng);
                    linalg::axpy(&mut v, 10.0 * radius, &dir);
                    v
                }
                _ => {
                    let mut v = honest_mean.clone();
                    linalg::scale(&mut v, -1.0);
                    v
                }
            };
            byz_msgs.push(msg);
        }
        let byz_index: Vec<usize> = t.byzantine.iter().copied().collect();

        for (pos, &n) in honest.iter().enumerate() {
            // Received messages, ascending sender index, self included.
            let mut senders: Vec<usize> = t.neighbors(n);
            senders.push(n);
            senders.sort_unstable();
            let mut msgs: Vec<Vec<f64>> = Vec::with_capacity(senders.len());
            let mut weights: Vec<f64> = Vec::with_capacity(senders.len());
            let mut self_pos = 0;
            for (i, &s) in senders.iter().enumerate() {
                if s == n {
                    self_pos = i;
                }
                let msg = match honest_pos[s] {
                    Some(h) => honest_msgs[h].clone(),
                    None => {
                        let b = byz_index.iter().position(|&x| x == s).unwrap();
                        byz_msgs[b].clone()
                    }
                };
                msgs.push(msg);
                weights.push(full.weights[n][s]);
            }
            let wsum: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= wsum;
            }

            let out =
                apply_aggregator(&spec.capped_for(msgs.len()), &msgs, self_pos, &weights)?;

            // Reference point from the virtual matrix over honest senders.
            let mut ref_senders: Vec<usize> = Vec::new();
            let mut ref_msgs: Vec<&[f64]> = Vec::new();
            let mut ref_weights: Vec<f64> = Vec::new();
            for &s in &senders {
                if let Some(h) = honest_pos[s] {
                    ref_senders.push(s);
                    ref_msgs.push(&honest_msgs[h]);
                    ref_weights.push(w_virtual.weights[pos][h]);
                }
            }
            let hat = aggregate_mean(&ref_msgs, &ref_weights)?;
            let spread = ref_msgs
                .iter()
                .map(|m| linalg::dist_sq(m, &hat).sqrt())
                .fold(0.0f64, f64::max);
            if spread <= 1e-15 * radius {
                skipped += 1;
                continue;
            }
            used += 1;
            let ratio = linalg::dist_sq(&out, &hat).sqrt() / spread;
            rho_hat = rho_hat.max(ratio);
        }
    }
    if used == 0 {
        return Err(SimError::DegenerateTrial);
    }
    Ok(AggregatorCertificate {
        rho_hat,
        rho_star: rho_star(w_virtual.lambda, n_honest),
        w_margin: contraction_margin(w_virtual.lambda, rho_hat, n_honest),
        trials,
        skipped,
        seed,
        virtual_w: w_virtual.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalars(vals: &[f64]) -> Vec<Vec<f64>> {
        vals.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn mean_examples() {
        let msgs = scalars(&[0.0, 1.0]);
        let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
        assert_eq!(aggregate_mean(&refs, &[0.5, 0.5]).unwrap(), vec![0.5]);

        let same = scalars(&[3.0, 3.0, 3.0]);
        let refs: Vec<&[f64]> = same.iter().map(Vec::as_slice).collect();
        assert_eq!(
            aggregate_mean(&refs, &[0.2, 0.5, 0.3]).unwrap(),
            vec![3.0]
        );

        assert!(matches!(
            aggregate_mean(&refs, &[0.2, 0.5]),
            Err(SimError::WeightMismatch(_))
        ));
        assert!(matches!(
            aggregate_mean(&refs, &[0.2, 0.5, 0.4]),
            Err(SimError::WeightMismatch(_))
        ));
    }

    #[test]
    fn mean_matches_coordinatewise_oracle() {
        let mut rng = substream(31, "agg-test", 0, 0);
        for _ in 0..20 {
            let msgs: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let raw: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..1.0)).collect();
            let tot: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / tot).collect();
            let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
            let out = aggregate_mean(&refs, &weights).unwrap();
            for d in 0..3 {
                let mut oracle = 0.0;
                for i in 0..4 {
                    oracle += weights[i] * msgs[i][d];
                }
                assert_abs_diff_eq!(out[d], oracle, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tm_examples() {
        let msgs = scalars(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
        assert_eq!(aggregate_tm(&refs, 1).unwrap(), vec![3.0]);
        // trim_b = 0 is the unweighted mean
        assert_eq!(aggregate_tm(&refs, 0).unwrap(), vec![3.0]);
        let uneven = scalars(&[1.0, 2.0, 7.0]);
        let refs: Vec<&[f64]> = uneven.iter().map(Vec::as_slice).collect();
        assert_abs_diff_eq!(aggregate_tm(&refs, 0).unwrap()[0], 10.0 / 3.0, epsilon = 1e-15);
        assert!(matches!(
            aggregate_tm(&refs, 1),
            Ok(_)
        ));
        assert!(matches!(
            aggregate_tm(&refs, 2),
            Err(SimError::TooFewMessages { .. })
        ));
    }

    #[test]
    fn tm_ignores_extreme_outlier() {
        let base = scalars(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut poisoned = base.clone();
        poisoned[4][0] = 1e9;
        let rb: Vec<&[f64]> = base.iter().map(Vec::as_slice).collect();
        let rp: Vec<&[f64]> = poisoned.iter().map(Vec::as_slice).collect();
        // outlier is always trimmed; output independent of its value
        assert_eq!(aggregate_tm(&rp, 1).unwrap(), aggregate_tm(&rb, 1).unwrap());
    }

    #[test]
    fn ios_examples() {
        let msgs = scalars(&[0.0, 0.1, 10.0]);
        let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
        let w = [1.0 / 3.0; 3];
        let out = aggregate_ios(&refs, &w, 1).unwrap();
        assert_abs_diff_eq!(out[0], 0.05, epsilon = 1e-12);

        // trim_b = 0 equals the weighted mean
        let out0 = aggregate_ios(&refs, &w, 0).unwrap();
        let mean = aggregate_mean(&refs, &w).unwrap();
        assert_eq!(out0, mean);

        // all identical: any trim_b below the count returns the message
        let same = scalars(&[2.5, 2.5, 2.5, 2.5]);
        let refs: Vec<&[f64]> = same.iter().map(Vec::as_slice).collect();
        let out = aggregate_ios(&refs, &[0.25; 4], 3).unwrap();
        assert_eq!(out, vec![2.5]);

        assert!(matches!(
            aggregate_ios(&refs, &[0.25; 4], 4),
            Err(SimError::TooFewMessages { .. })
        ));
    }

    #[test]
    fn scc_examples() {
        let neighbors = scalars(&[10.0]);
        let refs: Vec<&[f64]> = neighbors.iter().map(Vec::as_slice).collect();
        let out = aggregate_scc(&[0.0], &refs, &[0.5], 1.0).unwrap();
        assert_abs_diff_eq!(out[0], 0.5, epsilon = 1e-15);

        // tau = 0 returns self
        let out = aggregate_scc(&[0.0], &refs, &[0.5], 0.0).unwrap();
        assert_eq!(out, vec![0.0]);

        // tau = inf equals the mean with self weight absorbing the rest
        let msgs = scalars(&[1.0, 4.0, -2.0]);
        let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
        let weights = [0.5, 0.3, 0.2];
        let mean = aggregate_mean(&refs, &weights).unwrap();
        let neighbor_refs: Vec<&[f64]> = vec![&msgs[1], &msgs[2]];
        let scc =
            aggregate_scc(&msgs[0], &neighbor_refs, &weights[1..], f64::INFINITY).unwrap();
        assert_abs_diff_eq!(scc[0], mean[0], epsilon = 1e-12);
    }

    #[test]
    fn adaptive_tau_is_the_right_order_statistic() {
        let msgs = scalars(&[0.0, 1.0, 2.0, 50.0]);
        let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
        // distances to self=0: [0, 1, 2, 50]; count=4, trim_b=1 -> 3rd smallest = 2
        assert_abs_diff_eq!(adaptive_clip_tau(&[0.0], &refs, 1), 2.0, epsilon = 1e-15);
        // trim_b=0 -> largest distance
        assert_abs_diff_eq!(adaptive_clip_tau(&[0.0], &refs, 0), 50.0, epsilon = 1e-15);
    }

    #[test]
    fn certificate_for_mean_without_byzantine_is_zero() {
        let t = Topology::complete(6).unwrap();
        let w = metropolis_weights(&t).unwrap();
        let cert =
            certify_contraction(&AggregatorSpec::mean(), &t, &w, 50, 1.0, 8, 7).unwrap();
        assert!(cert.rho_hat <= 1e-12, "rho_hat {}", cert.rho_hat);
        assert!(cert.passes());
    }

    #[test]
    fn certificate_is_reproducible() {
        let t = {
            let base = crate::graph::generate_erdos_renyi(10, 0.7, 3).unwrap();
            let mut rng = substream(3, "byzantine", 0, 0);
            crate::graph::assign_byzantine(&base, 2, &mut rng).unwrap()
        };
        let full = metropolis_weights(&t).unwrap();
        let virt = crate::graph::induced_nonbyzantine_matrix(&t, &full).unwrap();
        let spec = AggregatorSpec {
            kind: AggregatorKind::Ios,
            trim_b: 2,
            clip_tau: ClipTau::adaptive(),
        };
        let a = certify_contraction(&spec, &t, &virt, 200, 1.0, 8, 11).unwrap();
        let b = certify_contraction(&spec, &t, &virt, 200, 1.0, 8, 11).unwrap();
        assert_eq!(a.rho_hat, b.rho_hat);
        assert!(a.rho_hat >= 0.0 && a.rho_hat.is_finite());
        assert_abs_diff_eq!(
            a.rho_star,
            rho_star(virt.lambda, 8),
            epsilon = 1e-15
        );
    }

    #[test]
    fn robust_rules_stay_near_honest_mean_under_budgeted_attack() {
        // honest messages in a ball of radius r, byzantine count <= trim_b:
        // TM and IOS land within 2r of the honest mean
        let mut rng = substream(41, "agg-test", 0, 0);
        let r = 0.5;
        for _ in 0..50 {
            let honest: Vec<Vec<f64>> = (0..5).map(|_| sample_in_ball(3, r, &mut rng)).collect();
            let hmean = linalg::mean_rows(&honest);
            let mut all = honest.clone();
            all.push(vec![1e6, -1e6, 1e6]);
            let refs: Vec<&[f64]> = all.iter().map(Vec::as_slice).collect();
            let w = vec![1.0 / 6.0; 6];
            let tm = aggregate_tm(&refs, 1).unwrap();
            let ios = aggregate_ios(&refs, &w, 1).unwrap();
            assert!(linalg::dist_sq(&tm, &hmean).sqrt() <= 2.0 * r);
            assert!(linalg::dist_sq(&ios, &hmean).sqrt() <= 2.0 * r);
        }
    }
}
