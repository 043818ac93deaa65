//! Sweep plans: a cartesian grid of config cells, each run over a seed
//! list, aggregated into one sweep.csv.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use byzsim_core::aggregate::AggregatorKind;
use byzsim_core::attack::AttackKind;
use byzsim_core::config::RunConfig;
use byzsim_core::engine::Experiment;

use crate::{config_err, runtime_err, write_file, CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub z_per_agent: Vec<usize>,
    #[serde(default)]
    pub attack: Vec<AttackKind>,
    #[serde(default)]
    pub aggregator: Vec<AggregatorKind>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Refuse plans whose cartesian size exceeds this cap.
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
    /// Per-cell coupled-stability estimate with this many pairs (0 = off).
    #[serde(default)]
    pub stability_pairs: usize,
}

fn default_max_cells() -> usize {
    512
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub output: OutputSection,
    pub sweep: SweepAxes,
    pub base: RunConfig,
}

/// One grid cell: everything but the seed.
#[derive(Debug, Clone)]
struct Cell {
    index: usize,
    beta: f64,
    z_per_agent: usize,
    attack: AttackKind,
    aggregator: AggregatorKind,
}

impl Cell {
    fn apply(&self, base: &RunConfig, seed: u64) -> RunConfig {
        let mut cfg = base.clone();
        cfg.data.beta = self.beta;
        cfg.data.z_per_agent = self.z_per_agent;
        cfg.attack.kind = self.attack;
        cfg.aggregator.kind = self.aggregator;
        cfg.run.master_seed = seed;
        cfg
    }
}

/// FNV-1a over the canonical cell config (seed zeroed), so rows can be
/// matched to the configs serialized next to their traces.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.run.master_seed = 0;
    let text = canonical.to_toml();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

struct CellOutcome {
    gap: Vec<f64>,
    opt_error: Vec<f64>,
    consensus: Vec<f64>,
    stability: Vec<f64>,
    hash: String,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn attack_name(kind: AttackKind) -> &'static str {
    match kind {
        AttackKind::None => "none",
        AttackKind::Gaussian => "gaussian",
        AttackKind::SampleDup => "sample_dup",
        AttackKind::Alie => "alie",
        AttackKind::SignFlip => "sign_flip",
    }
}

fn aggregator_name(kind: AggregatorKind) -> &'static str {
    match kind {
        AggregatorKind::Mean => "mean",
        AggregatorKind::Tm => "tm",
        AggregatorKind::Ios => "ios",
        AggregatorKind::Scc => "scc",
    }
}

fn run_cell(
    plan: &ExperimentPlan,
    cell: &Cell,
    seeds: &[u64],
) -> Result<CellOutcome, CliError> {
    let mut outcome = CellOutcome {
        gap: Vec::new(),
        opt_error: Vec::new(),
        consensus: Vec::new(),
        stability: Vec::new(),
        hash: String::new(),
    };
    for &seed in seeds {
        let cfg = cell.apply(&plan.base, seed);
        cfg.validate().map_err(config_err)?;
        outcome.hash = config_hash(&cfg);
        let exp = Experiment::prepare(&cfg).map_err(runtime_err)?;
        let trace = exp.run_trace().map_err(runtime_err)?;
        let cell_dir = plan
            .output
            .dir
            .join(format!("cell_{:03}", cell.index))
            .join(format!("seed_{seed}"));
        write_file(&cell_dir.join("trace.csv"), &trace.to_csv())?;
        write_file(&cell_dir.join("config.toml"), &cfg.to_toml())?;
        let last = trace.final_record();
        outcome.gap.push(last.gap);
        outcome.opt_error.push(last.opt_error);
        outcome.consensus.push(last.consensus);
        if plan.sweep.stability_pairs > 0 {
            let est = exp
                .run_coupled_stability(plan.sweep.stability_pairs)
                .map_err(runtime_err)?;
            write_file(&cell_dir.join("stability.csv"), &est.to_csv())?;
            outcome.stability.push(est.final_value());
        }
    }
    Ok(outcome)
}

pub fn cmd_sweep(plan_path: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(plan_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", plan_path.display())))?;
    let plan: ExperimentPlan = toml::from_str(&text).map_err(config_err)?;
    plan.base.validate().map_err(config_err)?;

    let one_or = |xs: &[f64], fallback: f64| -> Vec<f64> {
        if xs.is_empty() {
            vec![fallback]
        } else {
            xs.to_vec()
        }
    };
    let betas = one_or(&plan.sweep.beta, plan.base.data.beta);
    let zs = if plan.sweep.z_per_agent.is_empty() {
        vec![plan.base.data.z_per_agent]
    } else {
        plan.sweep.z_per_agent.clone()
    };
    let attacks = if plan.sweep.attack.is_empty() {
        vec![plan.base.attack.kind]
    } else {
        plan.sweep.attack.clone()
    };
    let aggregators = if plan.sweep.aggregator.is_empty() {
        vec![plan.base.aggregator.kind]
    } else {
        plan.sweep.aggregator.clone()
    };
    let seeds = if plan.sweep.seeds.is_empty() {
        vec![plan.base.run.master_seed]
    } else {
        plan.sweep.seeds.clone()
    };

    let mut cells = Vec::new();
    for &beta in &betas {
        for &z in &zs {
            for &attack in &attacks {
                for &aggregator in &aggregators {
                    cells.push(Cell {
                        index: cells.len(),
                        beta,
                        z_per_agent: z,
                        attack,
                        aggregator,
                    });
                }
            }
        }
    }
    if cells.len() > plan.sweep.max_cells {
        return Err(CliError::Config(format!(
            "sweep has {} cells, above the cap of {}",
            cells.len(),
            plan.sweep.max_cells
        )));
    }

    // Cells are independent; each writes only to its own subdirectory.
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|cell| run_cell(&plan, cell, &seeds))
        .collect::<Result<_, CliError>>()?;

    let mut csv = String::from(
        "cell,beta,z_per_agent,attack,aggregator,n_seeds,config_hash,\
         final_gap_mean,final_gap_std,final_opt_error_mean,final_opt_error_std,\
         final_H_mean,final_H_std,stability_mean,stability_std\n",
    );
    for (cell, o) in cells.iter().zip(&outcomes) {
        let (st_mean, st_std) = if o.stability.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (mean(&o.stability), sample_std(&o.stability))
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            cell.index,
            cell.beta,
            cell.z_per_agent,
            attack_name(cell.attack),
            aggregator_name(cell.aggregator),
            seeds.len(),
            o.hash,
            mean(&o.gap),
            sample_std(&o.gap),
            mean(&o.opt_error),
            sample_std(&o.opt_error),
            mean(&o.consensus),
            sample_std(&o.consensus),
            st_mean,
            st_std,
        ));
    }
    write_file(&plan.output.dir.join("sweep.csv"), &csv)?;
    write_file(&plan.output.dir.join("plan.toml"), &text)?;
    println!(
        "sweep complete: {} cells x {} seeds -> {}",
        cells.len(),
        seeds.len(),
        plan.output.dir.join("sweep.csv").display()
    );
    Ok(())
}
