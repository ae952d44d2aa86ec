//! Benchmark harness: scenario expansion, parallel trial execution, and
//! metrics emission.

pub mod config;
pub mod emit;
pub mod verify;

use rayon::prelude::*;

pub use config::{load_config, parse_config, Config, ResolvedRun, ScenarioName, TEMPLATE};
pub use emit::{aggregate, sort_records, MetricsRecord, SummaryRecord};

use crate::error::Error;
use crate::problems::{generate_instance, subgradient_baseline, ProblemInstance};
use crate::simulator::{run, RunConfig, Trace};
use crate::stream::{derive_rng, Purpose};

/// Stable variant labels so output files are reproducible.
pub fn km_variant(k_m: usize) -> String {
    format!("km={k_m}")
}

pub fn pc_variant(p_c: f64) -> String {
    format!("pc={p_c}")
}

fn trace_to_records(
    scenario: &str,
    trial: u64,
    method: &str,
    variant: &str,
    trace: &Trace,
    iter_of_k0: impl Fn(u64) -> Option<u64>,
) -> Vec<MetricsRecord> {
    trace
        .records
        .iter()
        .filter_map(|r| {
            iter_of_k0(r.k0).map(|global_iter| MetricsRecord {
                scenario: scenario.to_string(),
                trial,
                method: method.to_string(),
                variant: variant.to_string(),
                global_iter,
                cumulative_updates: r.cumulative_client_updates,
                relative_error: r.relative_error,
                client_gap: r.max_client_gap,
                cluster_gap: r.max_cluster_gap,
            })
        })
        .collect()
}

/// Generates the instance for one trial from the dedicated data stream.
pub fn trial_instance(cfg: &Config, trial: u64) -> Result<ProblemInstance, Error> {
    let mut rng = derive_rng(cfg.seed, trial, 0, Purpose::Data);
    generate_instance(&cfg.n_per_cluster(), cfg.m, &cfg.gen_params(), &mut rng)
}

/// Shared Gaussian starting point for one trial, used by both methods. The
/// origin is a stationary point of the phase-retrieval loss, so starting
/// there stalls every method; a common random start keeps the comparison
/// fair.
pub fn trial_init(cfg: &Config, trial: u64) -> Vec<f64> {
    let mut rng = derive_rng(cfg.seed, trial, 0, Purpose::Baseline);
    (0..cfg.m)
        .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
        .collect()
}

fn run_variant(
    run_cfg: &RunConfig,
    instance: &ProblemInstance,
    scenario: &str,
    trial: u64,
    variant: &str,
) -> Result<Vec<MetricsRecord>, Error> {
    let trace = run(run_cfg, instance, trial)?;
    Ok(trace_to_records(
        scenario, trial, "hfsad", variant, &trace, Some,
    ))
}

/// All records of one trial under the configured scenario.
pub fn run_one_trial(cfg: &Config, trial: u64) -> Result<Vec<MetricsRecord>, Error> {
    let instance = trial_instance(cfg, trial)?;
    let mut resolved = cfg.resolve(&instance);
    let init = trial_init(cfg, trial);
    resolved.run.w_init = Some(init.clone());
    let scenario = cfg.scenario.name.to_string();
    let mut records = Vec::new();
    match cfg.scenario.name {
        ScenarioName::VsBaseline => {
            records.extend(run_variant(
                &resolved.run,
                &instance,
                &scenario,
                trial,
                &km_variant(cfg.k_m),
            )?);
            // The baseline runs one centralized step per inner round and is
            // sampled every k_m steps so both curves share the same
            // global-iteration axis (and, at full participation, the same
            // cumulative-update axis). Both methods start from the same
            // random point.
            let trace = subgradient_baseline(
                &instance,
                &resolved.baseline,
                &resolved.run.rw_cluster,
                &resolved.run.rw_global,
                &init,
            );
            let k_m = cfg.k_m as u64;
            records.extend(trace_to_records(
                &scenario,
                trial,
                "subgradient",
                "baseline",
                &trace,
                |k0| (k0 % k_m == 0).then_some(k0 / k_m),
            ));
        }
        ScenarioName::VaryKm => {
            for &k_m in &cfg.scenario.k_m_list {
                let mut rc = resolved.run.clone();
                rc.k_m = k_m;
                records.extend(run_variant(
                    &rc,
                    &instance,
                    &scenario,
                    trial,
                    &km_variant(k_m),
                )?);
            }
        }
        ScenarioName::VaryPc => {
            for &p_c in &cfg.scenario.p_c_list {
                let mut rc = resolved.run.clone();
                rc.p_c = p_c;
                records.extend(run_variant(
                    &rc,
                    &instance,
                    &scenario,
                    trial,
                    &pc_variant(p_c),
                )?);
            }
        }
        ScenarioName::Custom => {
            let variant = format!("km={} pc={}", cfg.k_m, cfg.p_c);
            records.extend(run_variant(
                &resolved.run,
                &instance,
                &scenario,
                trial,
                &variant,
            )?);
        }
    }
    Ok(records)
}

/// Runs every trial of the configured scenario across the worker pool and
/// returns the rows in canonical order.
pub fn run_trials(cfg: &Config) -> Result<Vec<MetricsRecord>, Error> {
    cfg.validate()?;
    let per_trial: Result<Vec<Vec<MetricsRecord>>, Error> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_one_trial(cfg, t))
        .collect();
    let mut records: Vec<MetricsRecord> = per_trial?.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}
