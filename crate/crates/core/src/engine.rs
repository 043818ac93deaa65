//! Synchronous execution of the decentralized SGD loops, metric
//! collection, and the coupled-trajectory stability experiment.
//!
//! Rounds are barriered: within a step, per-agent gradient work and
//! per-recipient aggregation may run in parallel, but every cross-agent
//! read sees the previous half-step only, and every reduction runs in
//! fixed agent order, so traces are byte-identical under any thread count.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::{apply_aggregator, AggregatorSpec};
use crate::attack::{attack_messages, AttackKind, AttackSpec};
use crate::config::{DataSource, ResolvedSchedule, RunConfig};
use crate::data::{
    dirichlet_partition, load_idx, perturb, synth_gaussian_classes_shaped, PartitionedDataset,
    PerturbationIndex, Sample,
};
use crate::error::{Result, SimError};
use crate::graph::{
    assign_byzantine, generate_erdos_renyi, induced_nonbyzantine_matrix, metropolis_weights,
    MixingMatrix, Topology,
};
use crate::linalg;
use crate::loss::{batch_loss, grad, smoothness_bound, solve_empirical_minimizer, LossProfile, ModelState};
use crate::rng::substream;

/// One evaluated point of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub alpha: f64,
    /// Consensus error `H_k = (1/N) sum ||x_n - xbar||^2` over honest agents.
    pub consensus: f64,
    /// `F_S(xbar)` over the honest agents' training data.
    pub train_loss: f64,
    /// `F_S(xbar) - F_S(x*_S)`.
    pub opt_error: f64,
    pub test_loss: f64,
    /// Generalization-gap estimate `test - train`.
    pub gap: f64,
}

/// Per-eval-step records of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTrace {
    pub records: Vec<MetricsRecord>,
    /// Loss on the agent's local holdout split (no-cooperation runs only).
    pub local_test_loss: Option<Vec<f64>>,
    /// Per-record, per-agent train accuracy of each local model, when
    /// requested.
    pub per_agent_accuracy: Option<Vec<Vec<f64>>>,
    /// Honest-average model at each eval step, for bound probes.
    pub checkpoints: Vec<(u64, ModelState)>,
}

impl MetricsTrace {
    /// Fixed-header CSV; '.' decimal, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,alpha,H_k,train_loss,opt_error,test_loss,gap\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.step, r.alpha, r.consensus, r.train_loss, r.opt_error, r.test_loss, r.gap
            ));
        }
        out
    }

    pub fn final_record(&self) -> &MetricsRecord {
        self.records.last().expect("trace has at least one record")
    }

    /// Up to `count` evenly spaced checkpoint models, always including the
    /// last.
    pub fn probe_points(&self, count: usize) -> Vec<ModelState> {
        let n = self.checkpoints.len();
        if n == 0 {
            return Vec::new();
        }
        if n <= count {
            return self.checkpoints.iter().map(|(_, m)| m.clone()).collect();
        }
        (0..count)
            .map(|i| {
                let idx = (i * (n - 1)) / (count - 1);
                self.checkpoints[idx].1.clone()
            })
            .collect()
    }
}

/// Monte-Carlo estimate of the on-average stability trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityEstimate {
    pub steps: Vec<u64>,
    /// `(1/|P|) sum ||xbar_k - xbar'_k||^2` over the sampled pairs.
    pub mean_sq_dist: Vec<f64>,
    pub pairs: usize,
}

impl StabilityEstimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mean_sq_dist\n");
        for (k, d) in self.steps.iter().zip(&self.mean_sq_dist) {
            out.push_str(&format!("{k},{d}\n"));
        }
        out
    }

    pub fn final_value(&self) -> f64 {
        *self.mean_sq_dist.last().expect("nonempty estimate")
    }
}

/// Everything a recipient needs to aggregate one round, precomputed.
struct RecipientPlan {
    /// Global agent id of the recipient.
    id: usize,
    /// Sender ids ascending (self included).
    senders: Vec<usize>,
    self_pos: usize,
    /// Mixing weights aligned with `senders`.
    weights: Vec<f64>,
    /// `(position in senders, honest slot)` for honest senders.
    honest_senders: Vec<(usize, usize)>,
    /// Positions in `senders` held by Byzantine neighbors.
    byz_positions: Vec<usize>,
    /// Honest neighbors visible to the attacker: `(global id, honest slot)`,
    /// recipient excluded.
    visible: Vec<(usize, usize)>,
    /// Aggregator with the trim budget capped to this neighborhood's size.
    spec: AggregatorSpec,
}

/// A fully prepared experiment: topology, data, curvature, schedule.
pub struct Experiment {
    pub cfg: RunConfig,
    pub topology: Topology,
    pub full_matrix: MixingMatrix,
    /// Honest-restricted reference matrix (Byzantine setups only).
    pub virtual_matrix: Option<MixingMatrix>,
    pub dataset: PartitionedDataset,
    pub profile: LossProfile,
    pub schedule: ResolvedSchedule,
    pub attack: AttackSpec,
    pub aggregator: AggregatorSpec,
    /// Honest agent ids, ascending; position = dataset slot.
    honest: Vec<usize>,
    plans: Vec<RecipientPlan>,
    minimizer: OnceLock<(ModelState, f64)>,
}

impl Experiment {
    pub fn prepare(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let master = cfg.run.master_seed;
        let base = if cfg.topology.n_agents == 1 {
            Topology::new(1, Default::default(), Default::default())?
        } else {
            generate_erdos_renyi(cfg.topology.n_agents, cfg.topology.edge_prob, master)?
        };
        let mut byz_rng = substream(master, "byzantine", 0, 0);
        let topology = assign_byzantine(&base, cfg.topology.n_byzantine, &mut byz_rng)?;
        let full_matrix = metropolis_weights(&topology)?;
        let virtual_matrix = if topology.byzantine.is_empty() {
            None
        } else {
            Some(induced_nonbyzantine_matrix(&topology, &full_matrix)?)
        };
        let honest = topology.honest();

        let (pool, test_set) = match cfg.data.source {
            DataSource::Synthetic => synth_gaussian_classes_shaped(
                cfg.data.classes,
                cfg.data.dim,
                cfg.data.separation,
                cfg.data.offset,
                cfg.data.noise,
                cfg.data.train_pool,
                cfg.data.test_size,
                master,
            ),
            DataSource::Idx => {
                let resolve = |name: &Option<String>| -> String {
                    let name = name.as_deref().expect("validated");
                    if std::path::Path::new(name).is_absolute() {
                        name.to_string()
                    } else {
                        let root = std::env::var("BYZSIM_DATA_DIR").unwrap_or_default();
                        std::path::Path::new(&root).join(name).to_string_lossy().into_owned()
                    }
                };
                let train = load_idx(
                    &resolve(&cfg.data.train_images),
                    &resolve(&cfg.data.train_labels),
                )?;
                let test = load_idx(
                    &resolve(&cfg.data.test_images),
                    &resolve(&cfg.data.test_labels),
                )?;
                (train, test.samples)
            }
        };
        let mut dataset =
            dirichlet_partition(&pool, honest.len(), cfg.data.z_per_agent, cfg.data.beta, master)?;
        dataset.test_set = test_set;

        let profile = smoothness_bound(&pool.samples, cfg.loss.reg);
        let schedule = ResolvedSchedule::resolve(&cfg.schedule, profile.mu, profile.l_smooth)?;

        let mut attack = cfg.attack_spec();
        if attack.kind == AttackKind::SampleDup {
            match attack.dup_target {
                Some(t) if !topology.is_byzantine(t) && t < topology.n_total => {}
                Some(t) => {
                    return Err(SimError::ConfigInvalid(format!(
                        "dup_target {t} is not an honest agent"
                    )));
                }
                None => {
                    let mut rng = substream(master, "dup-target", 0, 0);
                    attack.dup_target = Some(honest[rng.random_range(0..honest.len())]);
                }
            }
        }

        let honest_slot: Vec<Option<usize>> = {
            let mut map = vec![None; topology.n_total];
            for (slot, &h) in honest.iter().enumerate() {
                map[h] = Some(slot);
            }
            map
        };
        let plans = honest
            .iter()
            .map(|&n| {
                let mut senders = topology.neighbors(n);
                senders.push(n);
                senders.sort_unstable();
                let self_pos = senders.iter().position(|&s| s == n).unwrap();
                let weights: Vec<f64> =
                    senders.iter().map(|&s| full_matrix.weights[n][s]).collect();
                let honest_senders: Vec<(usize, usize)> = senders
                    .iter()
                    .enumerate()
                    .filter_map(|(pos, &s)| honest_slot[s].map(|slot| (pos, slot)))
                    .collect();
                let byz_positions: Vec<usize> = senders
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| topology.is_byzantine(s))
                    .map(|(pos, _)| pos)
                    .collect();
                let visible: Vec<(usize, usize)> = senders
                    .iter()
                    .filter(|&&s| s != n)
                    .filter_map(|&s| honest_slot[s].map(|slot| (s, slot)))
                    .collect();
                let spec = cfg.aggregator_spec().capped_for(senders.len());
                RecipientPlan {
                    id: n,
                    senders,
                    self_pos,
                    weights,
                    honest_senders,
                    byz_positions,
                    visible,
                    spec,
                }
            })
            .collect();

        Ok(Experiment {
            cfg: cfg.clone(),
            topology,
            full_matrix,
            virtual_matrix,
            dataset,
            profile,
            schedule,
            attack,
            aggregator: cfg.aggregator_spec(),
            honest,
            plans,
            minimizer: OnceLock::new(),
        })
    }

    pub fn n_honest(&self) -> usize {
        self.honest.len()
    }

    pub fn honest_agents(&self) -> &[usize] {
        &self.honest
    }

    pub fn model_dim(&self) -> usize {
        self.dataset.n_classes * (self.dataset.d_in + 1)
    }

    fn initial_model(&self) -> ModelState {
        ModelState::constant(self.dataset.n_classes, self.dataset.d_in, self.cfg.run.init)
    }

    /// Reference minimizer `x*_S` of the global empirical loss and its
    /// value, computed once on demand.
    pub fn empirical_minimizer(&self) -> Result<(&ModelState, f64)> {
        if self.minimizer.get().is_none() {
            let union: Vec<Sample> = self
                .dataset
                .per_agent
                .iter()
                .flat_map(|l| l.iter().cloned())
                .collect();
            let xs = solve_empirical_minimizer(
                &union,
                self.dataset.n_classes,
                self.dataset.d_in,
                self.profile.reg,
                self.cfg.run.minimizer_tol,
            )?;
            let f_star = self.global_train_loss(&xs)?;
            let _ = self.minimizer.set((xs, f_star));
        }
        let (xs, f) = self.minimizer.get().unwrap();
        Ok((xs, *f))
    }

    /// `F_S(x)`: mean over agents of the local empirical losses.
    pub fn global_train_loss(&self, x: &ModelState) -> Result<f64> {
        let per_agent: Vec<f64> = self
            .dataset
            .per_agent
            .par_iter()
            .map(|list| batch_loss(x, list, self.profile.reg))
            .collect::<Result<_>>()?;
        Ok(per_agent.iter().sum::<f64>() / per_agent.len() as f64)
    }

    /// One synchronous round on `models` (honest slots), drawing sample
    /// indices from `rngs`.
    fn step(
        &self,
        k: u64,
        ds: &PartitionedDataset,
        models: &mut Vec<Vec<f64>>,
        rngs: &mut [ChaCha8Rng],
    ) -> Result<()> {
        let alpha = self.schedule.alpha(k);
        let reg = self.profile.reg;
        let z = ds.z_per_agent();
        let n_classes = ds.n_classes;
        let d_in = ds.d_in;
        let dim = self.model_dim();
        let master = self.cfg.run.master_seed;

        // Model update: local stochastic gradient step.
        let half: Vec<Vec<f64>> = models
            .par_iter()
            .zip(rngs.par_iter_mut())
            .zip(ds.per_agent.par_iter())
            .map(|((m, rng), samples)| {
                let idx = rng.random_range(0..z);
                let state = ModelState {
                    params: m.clone(),
                    n_classes,
                    d_in,
                };
                let g = grad(&state, &samples[idx], reg)?;
                let mut out = m.clone();
                linalg::axpy(&mut out, -alpha, &g);
                Ok(out)
            })
            .collect::<Result<_>>()?;

        // Communication and aggregation.
        let dup_msg: Option<&[f64]> = match (self.attack.kind, self.attack.dup_target) {
            (AttackKind::SampleDup, Some(t)) => {
                let slot = self.honest.iter().position(|&h| h == t).unwrap();
                Some(half[slot].as_slice())
            }
            _ => None,
        };
        let next: Vec<Vec<f64>> = self
            .plans
            .par_iter()
            .map(|plan| {
                let mut msgs: Vec<Vec<f64>> = vec![Vec::new(); plan.senders.len()];
                for &(pos, slot) in &plan.honest_senders {
                    msgs[pos] = half[slot].clone();
                }
                if !plan.byz_positions.is_empty() {
                    let visible: Vec<(usize, &[f64])> = plan
                        .visible
                        .iter()
                        .map(|&(id, slot)| (id, half[slot].as_slice()))
                        .collect();
                    let mut rng = substream(master, "attack", plan.id as u64, k);
                    let byz = attack_messages(
                        &self.attack,
                        plan.id,
                        &visible,
                        dup_msg,
                        plan.byz_positions.len(),
                        dim,
                        &mut rng,
                    )?;
                    for (pos, msg) in plan.byz_positions.iter().zip(byz) {
                        msgs[*pos] = msg;
                    }
                }
                apply_aggregator(&plan.spec, &msgs, plan.self_pos, &plan.weights)
            })
            .collect::<Result<_>>()?;
        *models = next;
        Ok(())
    }

    /// Drive the loop, invoking the observer at every eval step (and the
    /// final step) with the honest local models.
    pub fn run_observed<F>(&self, ds: &PartitionedDataset, mut observe: F) -> Result<()>
    where
        F: FnMut(u64, &[Vec<f64>]) -> Result<()>,
    {
        let steps = self.cfg.run.steps;
        let every = self.cfg.run.eval_every;
        let init = self.initial_model();
        let mut models: Vec<Vec<f64>> = vec![init.params; self.n_honest()];
        let mut rngs: Vec<ChaCha8Rng> = self
            .honest
            .iter()
            .map(|&n| substream(self.cfg.run.master_seed, "draw", n as u64, 0))
            .collect();
        for k in 0..=steps {
            if k == steps || k % every == 0 {
                observe(k, &models)?;
            }
            if k < steps {
                self.step(k, ds, &mut models, &mut rngs)?;
            }
        }
        Ok(())
    }

    fn honest_average(models: &[Vec<f64>]) -> Vec<f64> {
        linalg::mean_rows(models)
    }

    fn evaluate(
        &self,
        k: u64,
        models: &[Vec<f64>],
        f_star: f64,
    ) -> Result<(MetricsRecord, ModelState)> {
        let xbar = Self::honest_average(models);
        let consensus = models
            .iter()
            .map(|m| linalg::dist_sq(m, &xbar))
            .sum::<f64>()
            / models.len() as f64;
        let state = ModelState {
            params: xbar,
            n_classes: self.dataset.n_classes,
            d_in: self.dataset.d_in,
        };
        let train_loss = self.global_train_loss(&state)?;
        let test_loss = batch_loss(&state, &self.dataset.test_set, self.profile.reg)?;
        Ok((
            MetricsRecord {
                step: k,
                alpha: self.schedule.alpha(k),
                consensus,
                train_loss,
                opt_error: train_loss - f_star,
                test_loss,
                gap: test_loss - train_loss,
            },
            state,
        ))
    }

    /// Execute the configured run and collect the metric trace.
    pub fn run_trace(&self) -> Result<MetricsTrace> {
        let (_, f_star) = self.empirical_minimizer()?;
        let mut records = Vec::new();
        let mut checkpoints = Vec::new();
        let mut accuracy: Vec<Vec<f64>> = Vec::new();
        let record_acc = self.cfg.run.record_accuracy;
        self.run_observed(&self.dataset, |k, models| {
            let (rec, xbar) = self.evaluate(k, models, f_star)?;
            records.push(rec);
            if record_acc {
                accuracy.push(self.per_agent_accuracy(models)?);
            }
            checkpoints.push((k, xbar));
            Ok(())
        })?;
        Ok(MetricsTrace {
            records,
            local_test_loss: None,
            per_agent_accuracy: record_acc.then_some(accuracy),
            checkpoints,
        })
    }

    fn per_agent_accuracy(&self, models: &[Vec<f64>]) -> Result<Vec<f64>> {
        models
            .iter()
            .zip(&self.dataset.per_agent)
            .map(|(m, samples)| {
                let state = ModelState {
                    params: m.clone(),
                    n_classes: self.dataset.n_classes,
                    d_in: self.dataset.d_in,
                };
                let mut correct = 0usize;
                for s in samples {
                    if predict(&state, s) == s.label {
                        correct += 1;
                    }
                }
                Ok(correct as f64 / samples.len() as f64)
            })
            .collect()
    }

    /// Honest-average checkpoints at eval steps, without metric
    /// evaluation; the workhorse for coupled runs and oracles.
    pub fn run_trajectory(&self, ds: &PartitionedDataset) -> Result<Vec<(u64, Vec<f64>)>> {
        let mut out = Vec::new();
        self.run_observed(ds, |k, models| {
            out.push((k, Self::honest_average(models)));
            Ok(())
        })?;
        Ok(out)
    }

    /// Monte-Carlo estimate of on-average stability: run the base
    /// trajectory, then `pairs` perturbed trajectories that share every
    /// rng substream, and average the squared honest-average distances.
    pub fn run_coupled_stability(&self, pairs: usize) -> Result<StabilityEstimate> {
        assert!(pairs >= 1);
        let base = self.run_trajectory(&self.dataset)?;
        let mut rng = substream(self.cfg.run.master_seed, "stability", 0, 0);
        let picks: Vec<PerturbationIndex> = (0..pairs)
            .map(|_| {
                let agent = rng.random_range(0..self.n_honest());
                let position = rng.random_range(0..self.dataset.z_per_agent());
                let replacement = self.dataset.draw_replacement(agent, &mut rng);
                PerturbationIndex {
                    agent,
                    position,
                    replacement,
                }
            })
            .collect();

        let trajectories: Vec<Vec<(u64, Vec<f64>)>> = picks
            .par_iter()
            .map(|idx| {
                let ds = perturb(&self.dataset, idx)?;
                self.run_trajectory(&ds)
            })
            .collect::<Result<_>>()?;

        let steps: Vec<u64> = base.iter().map(|(k, _)| *k).collect();
        let mut mean_sq_dist = vec![0.0; base.len()];
        for traj in &trajectories {
            for (i, ((_, xb), (_, xp))) in base.iter().zip(traj).enumerate() {
                mean_sq_dist[i] += linalg::dist_sq(xb, xp);
            }
        }
        for v in mean_sq_dist.iter_mut() {
            *v /= pairs as f64;
        }
        Ok(StabilityEstimate {
            steps,
            mean_sq_dist,
            pairs,
        })
    }

    /// Single-agent SGD on one honest agent's dataset, without
    /// cooperation. `agent` is the global agent id. The gap is evaluated
    /// against the global test set; the agent's holdout surplus provides a
    /// local-distribution split when available.
    pub fn run_no_cooperation(&self, agent: usize) -> Result<MetricsTrace> {
        let slot = self
            .honest
            .iter()
            .position(|&h| h == agent)
            .ok_or_else(|| SimError::ConfigInvalid(format!("agent {agent} is not honest")))?;
        let samples = &self.dataset.per_agent[slot];
        let local_split = &self.dataset.surplus[slot];
        let reg = self.profile.reg;
        let n_classes = self.dataset.n_classes;
        let d_in = self.dataset.d_in;

        let xs = solve_empirical_minimizer(
            samples,
            n_classes,
            d_in,
            reg,
            self.cfg.run.minimizer_tol,
        )?;
        let f_star = batch_loss(&xs, samples, reg)?;

        let mut model = self.initial_model().params;
        // keyed like a single-agent run so the N = 1 reduction holds
        let mut rng = substream(self.cfg.run.master_seed, "draw", 0, 0);
        let steps = self.cfg.run.steps;
        let every = self.cfg.run.eval_every;
        let mut records = Vec::new();
        let mut checkpoints = Vec::new();
        let mut local = Vec::new();
        for k in 0..=steps {
            if k == steps || k % every == 0 {
                let state = ModelState {
                    params: model.clone(),
                    n_classes,
                    d_in,
                };
                let train_loss = batch_loss(&state, samples, reg)?;
                let test_loss = batch_loss(&state, &self.dataset.test_set, reg)?;
                records.push(MetricsRecord {
                    step: k,
                    alpha: self.schedule.alpha(k),
                    consensus: 0.0,
                    train_loss,
                    opt_error: train_loss - f_star,
                    test_loss,
                    gap: test_loss - train_loss,
                });
                if !local_split.is_empty() {
                    local.push(batch_loss(&state, local_split, reg)?);
                }
                checkpoints.push((k, state));
            }
            if k < steps {
                let alpha = self.schedule.alpha(k);
                let idx = rng.random_range(0..samples.len());
                let state = ModelState {
                    params: model.clone(),
                    n_classes,
                    d_in,
                };
                let g = grad(&state, &samples[idx], reg)?;
                linalg::axpy(&mut model, -alpha, &g);
            }
        }
        Ok(MetricsTrace {
            records,
            local_test_loss: (!local.is_empty()).then_some(local),
            per_agent_accuracy: None,
            checkpoints,
        })
    }
}

/// Predicted class under a model.
pub fn predict(x: &ModelState, s: &Sample) -> usize {
    let stride = x.d_in + 1;
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for c in 0..x.n_classes {
        let row = &x.params[c * stride..(c + 1) * stride];
        let v = linalg::dot(&row[..x.d_in], &s.features) + row[x.d_in];
        if v > best_v {
            best_v = v;
            best = c;
        }
    }
    best
}

/// Run the attack-free loop (Byzantine set empty, mean aggregation allowed
/// to be any configured rule, attack must be `none`).
pub fn run_attack_free(cfg: &RunConfig) -> Result<MetricsTrace> {
    if cfg.attack.kind != AttackKind::None {
        return Err(SimError::ConfigInvalid(
            "attack-free run requires attack.kind = \"none\"".into(),
        ));
    }
    Experiment::prepare(cfg)?.run_trace()
}

/// Run the Byzantine-resilient loop.
pub fn run_byzantine(cfg: &RunConfig) -> Result<MetricsTrace> {
    Experiment::prepare(cfg)?.run_trace()
}

/// Coupled-trajectory stability estimate for a config.
pub fn run_coupled_stability(cfg: &RunConfig, pairs: usize) -> Result<StabilityEstimate> {
    Experiment::prepare(cfg)?.run_coupled_stability(pairs)
}

/// No-cooperation baseline for one honest agent.
pub fn run_no_cooperation(cfg: &RunConfig, agent: usize) -> Result<MetricsTrace> {
    Experiment::prepare(cfg)?.run_no_cooperation(agent)
}

/// Empirical lower-bound proxy for the local-vs-global distribution
/// discrepancy: the largest absolute difference between the local-holdout
/// loss and the global test loss over the given checkpoints.
pub fn estimate_discrepancy_proxy(
    ds: &PartitionedDataset,
    reg: f64,
    checkpoints: &[ModelState],
    agent: usize,
) -> Result<f64> {
    assert!(!checkpoints.is_empty(), "need at least one checkpoint");
    let local = &ds.surplus[agent];
    if local.is_empty() {
        return Err(SimError::ConfigInvalid(format!(
            "agent {agent} has no holdout surplus for a local test split"
        )));
    }
    let mut proxy = 0.0f64;
    for x in checkpoints {
        let l = batch_loss(x, local, reg)?;
        let g = batch_loss(x, &ds.test_set, reg)?;
        proxy = proxy.max((l - g).abs());
    }
    Ok(proxy)
}

/// Expose the loss profile for a prepared config without running it.
pub fn profile_for(cfg: &RunConfig) -> Result<LossProfile> {
    Ok(Experiment::prepare(cfg)?.profile)
}
