//! User-facing configuration: a flat TOML file with sections, every value
//! optional with benchmark defaults. Values marked "auto" are derived from
//! the generated instance at run time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{ConsensusWeights, GammaSign};
use crate::error::Error;
use crate::problems::{BaselineConfig, GenParams, ProblemInstance, StepRule};
use crate::prox::{PenaltyKind, PenaltySpec};
use crate::simulator::RunConfig;
use crate::smoothing::{ScheduleParams, ConvergenceBounds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Number of clusters.
    pub l: usize,
    /// Clients per cluster (uniform); `n_per_cluster` overrides.
    pub n: usize,
    pub n_per_cluster: Option<Vec<usize>>,
    /// Parameter dimension.
    pub m: usize,
    /// Global iterations.
    pub k_z: usize,
    /// Inner rounds per global iteration.
    pub k_m: usize,
    /// Staleness bound.
    pub k_a: usize,
    /// Participation probability.
    pub p_c: f64,
    pub seed: u64,
    pub trials: usize,
    /// Flip the sign the server applies to cluster duals (A/B knob).
    pub gamma_sign_flip: bool,
    pub penalty: PenaltySection,
    pub consensus: ConsensusSection,
    pub schedule: ScheduleSection,
    pub generation: GenerationSection,
    pub baseline: BaselineSection,
    pub scenario: ScenarioSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            l: 5,
            n: 50,
            n_per_cluster: None,
            m: 25,
            k_z: 1000,
            k_m: 10,
            k_a: 20,
            p_c: 1.0,
            seed: 42,
            trials: 100,
            gamma_sign_flip: false,
            penalty: PenaltySection::default(),
            consensus: ConsensusSection::default(),
            schedule: ScheduleSection::default(),
            generation: GenerationSection::default(),
            baseline: BaselineSection::default(),
            scenario: ScenarioSection::default(),
        }
    }
}

/// The sparsity prior applied at cluster heads and the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySection {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub gamma: f64,
    /// Cluster prior weight; auto = N_l - 1/L.
    pub eta_cluster: Option<f64>,
    pub eta_global: f64,
}

impl Default for PenaltySection {
    fn default() -> Self {
        PenaltySection {
            kind: PenaltyKind::Scad,
            lambda: 0.1,
            gamma: 2.4,
            eta_cluster: None,
            eta_global: 1.0,
        }
    }
}

/// Consensus coupling between hierarchy levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusSection {
    /// Client-level TV weight; auto = 5 * max measurement norm.
    pub omega: Option<f64>,
    /// Cluster-level TV weight; auto = max_l N_l * omega + eta * lambda * gamma.
    pub omega0: Option<f64>,
    /// Penalty shape of the coupling; `l1` gives total-variation consensus,
    /// `scad`/`mcp` give personalization.
    pub kind: PenaltyKind,
    pub kind_lambda: f64,
    pub kind_gamma: f64,
}

impl Default for ConsensusSection {
    fn default() -> Self {
        ConsensusSection {
            omega: None,
            omega0: None,
            kind: PenaltyKind::L1,
            kind_lambda: 1.0,
            kind_gamma: 2.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ScheduleSection {
    /// Client penalty growth; auto = omega.
    pub c: Option<f64>,
    /// Cluster penalty growth; auto = omega0 / 25.
    pub d: Option<f64>,
    /// Client smoothing decay; default sqrt(20).
    pub alpha: Option<f64>,
    /// Cluster smoothing decay; default 25 * sqrt(20).
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub p: f64,
    pub s: f64,
    pub snr_db: f64,
    pub c1: f64,
    pub c2: f64,
    pub m_per_client: usize,
}

impl Default for GenerationSection {
    fn default() -> Self {
        let g = GenParams::default();
        GenerationSection {
            p: g.p,
            s: g.s,
            snr_db: g.snr_db,
            c1: g.c1,
            c2: g.c2,
            m_per_client: g.m_per_client,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    /// Initial step; auto = 1 / sqrt(total clients).
    pub eta0: Option<f64>,
    /// Geometric decay per step.
    pub rho: f64,
    /// Normalize the subgradient so eta0 is a step length.
    pub normalize: bool,
    /// Include the prior penalties and box in the baseline objective.
    pub include_penalty: bool,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            eta0: None,
            rho: 0.998,
            normalize: false,
            include_penalty: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    VsBaseline,
    VaryKm,
    VaryPc,
    Custom,
}

impl std::str::FromStr for ScenarioName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "vs_baseline" => Ok(ScenarioName::VsBaseline),
            "vary_km" => Ok(ScenarioName::VaryKm),
            "vary_pc" => Ok(ScenarioName::VaryPc),
            "custom" => Ok(ScenarioName::Custom),
            other => Err(Error::InvalidConfig(format!("unknown scenario {other:?}"))),
        }
    }
}

impl std::fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScenarioName::VsBaseline => "vs_baseline",
            ScenarioName::VaryKm => "vary_km",
            ScenarioName::VaryPc => "vary_pc",
            ScenarioName::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: ScenarioName,
    pub k_m_list: Vec<usize>,
    pub p_c_list: Vec<f64>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            name: ScenarioName::VsBaseline,
            k_m_list: vec![1, 5, 10, 20],
            p_c_list: vec![0.3, 0.5, 0.7, 1.0],
        }
    }
}

impl Config {
    pub fn n_per_cluster(&self) -> Vec<usize> {
        self.n_per_cluster
            .clone()
            .unwrap_or_else(|| vec![self.n; self.l])
    }

    pub fn total_clients(&self) -> usize {
        self.n_per_cluster().iter().sum()
    }

    pub fn gen_params(&self) -> GenParams {
        GenParams {
            p: self.generation.p,
            s: self.generation.s,
            snr_db: self.generation.snr_db,
            c1: self.generation.c1,
            c2: self.generation.c2,
            m_per_client: self.generation.m_per_client,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let n_per_cluster = self.n_per_cluster();
        if n_per_cluster.is_empty() || n_per_cluster.contains(&0) {
            return Err(Error::InvalidConfig(
                "every cluster needs at least one client".into(),
            ));
        }
        if self.m == 0 || self.k_z == 0 || self.k_m == 0 || self.k_a == 0 || self.trials == 0 {
            return Err(Error::InvalidConfig("all counts must be >= 1".into()));
        }
        if !(self.p_c > 0.0 && self.p_c <= 1.0) {
            return Err(Error::InvalidConfig("p_c must lie in (0, 1]".into()));
        }
        if !(self.generation.p > 0.0 && self.generation.p <= 1.0)
            || !(self.generation.s > 0.0 && self.generation.s <= 1.0)
        {
            return Err(Error::InvalidConfig(
                "mask densities must lie in (0, 1]".into(),
            ));
        }
        if (self.generation.c1 + self.generation.c2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig("noise weights must sum to 1".into()));
        }
        if self.generation.m_per_client == 0 {
            return Err(Error::InvalidConfig("m_per_client must be >= 1".into()));
        }
        if self.scenario.k_m_list.is_empty() || self.scenario.p_c_list.is_empty() {
            return Err(Error::InvalidConfig(
                "scenario lists must be nonempty".into(),
            ));
        }
        if self
            .scenario
            .p_c_list
            .iter()
            .any(|&p| !(p > 0.0 && p <= 1.0))
        {
            return Err(Error::InvalidConfig(
                "scenario p_c values must lie in (0, 1]".into(),
            ));
        }
        if self.scenario.k_m_list.contains(&0) {
            return Err(Error::InvalidConfig(
                "scenario k_m values must be >= 1".into(),
            ));
        }
        PenaltySpec {
            kind: self.penalty.kind,
            lambda: self.penalty.lambda,
            gamma: self.penalty.gamma,
            weight: self.penalty.eta_global,
        }
        .validate()?;
        for v in [self.baseline.rho, 1.0] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig("baseline rho must be positive".into()));
            }
        }
        Ok(())
    }

    /// Fills every auto value from the realized instance and produces the
    /// solver-facing run parameters.
    pub fn resolve(&self, instance: &ProblemInstance) -> ResolvedRun {
        let n_per_cluster = self.n_per_cluster();
        let l = n_per_cluster.len() as f64;
        let max_n = *n_per_cluster.iter().max().expect("nonempty") as f64;

        let omega = self
            .consensus
            .omega
            .unwrap_or_else(|| 5.0 * instance.max_measurement_norm());
        let eta_max = self.penalty.eta_cluster.unwrap_or(max_n - 1.0 / l).max(0.0);
        let omega0 = self
            .consensus
            .omega0
            .unwrap_or(max_n * omega + eta_max * self.penalty.lambda * self.penalty.gamma);

        let schedules = ScheduleParams {
            c: self.schedule.c.unwrap_or(omega),
            d: self.schedule.d.unwrap_or(omega0 / 25.0),
            alpha: self.schedule.alpha.unwrap_or_else(|| 20f64.sqrt()),
            beta: self.schedule.beta.unwrap_or_else(|| 25.0 * 20f64.sqrt()),
        };

        let rc_kind = PenaltySpec {
            kind: self.consensus.kind,
            lambda: self.consensus.kind_lambda,
            gamma: self.consensus.kind_gamma,
            weight: 1.0,
        };
        let weights = ConsensusWeights {
            omega_client: omega,
            omega_cluster: omega0,
            client_rc_kind: rc_kind,
            cluster_rc_kind: rc_kind,
        };

        let rw_cluster: Vec<PenaltySpec> = n_per_cluster
            .iter()
            .map(|&n| {
                let eta = self
                    .penalty
                    .eta_cluster
                    .unwrap_or(n as f64 - 1.0 / l)
                    .max(0.0);
                PenaltySpec {
                    kind: self.penalty.kind,
                    lambda: self.penalty.lambda,
                    gamma: self.penalty.gamma,
                    weight: eta,
                }
            })
            .collect();
        let rw_global = PenaltySpec {
            kind: self.penalty.kind,
            lambda: self.penalty.lambda,
            gamma: self.penalty.gamma,
            weight: self.penalty.eta_global,
        };

        let run = RunConfig {
            n_per_cluster,
            m: self.m,
            k_z: self.k_z,
            k_m: self.k_m,
            k_a: self.k_a,
            p_c: self.p_c,
            schedules,
            weights,
            rw_cluster,
            rw_global,
            gamma_sign: if self.gamma_sign_flip {
                GammaSign::Plus
            } else {
                GammaSign::Minus
            },
            seed: self.seed,
            trials: self.trials,
            w_init: None,
        };

        let nu_f = omega;
        let nu_r = eta_max * self.penalty.lambda;
        let bounds = ConvergenceBounds {
            nu_f,
            nu_r,
            omega: max_n * nu_f + nu_r,
            omega0,
        };

        let baseline = BaselineConfig {
            steps: self.k_z * self.k_m,
            step_rule: StepRule {
                eta0: self
                    .baseline
                    .eta0
                    .unwrap_or_else(|| 1.0 / (self.total_clients() as f64).sqrt()),
                rho: self.baseline.rho,
                normalize: self.baseline.normalize,
            },
            include_penalty: self.baseline.include_penalty,
        };

        ResolvedRun {
            run,
            bounds,
            baseline,
        }
    }
}

/// A run config with all auto values filled from one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub run: RunConfig,
    pub bounds: ConvergenceBounds,
    pub baseline: BaselineConfig,
}

/// Loads a TOML config; an empty or missing-keys file yields pure defaults.
pub fn load_config(path: &Path) -> Result<Config, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Config, Error> {
    let cfg: Config =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("parse error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// The annotated default config emitted by `hfsad template`.
pub const TEMPLATE: &str = r#"# Benchmark configuration. Every key is optional; omitted keys take the
# defaults shown here. Keys documented as "auto" are derived from the
# generated instance at run time.

l = 5            # clusters
n = 50           # clients per cluster (uniform); use n_per_cluster = [..] to vary
m = 25           # parameter dimension
k_z = 1000       # global iterations
k_m = 10         # inner rounds per global iteration
k_a = 20         # staleness bound: max rounds a node may skip
p_c = 1.0        # per-round participation probability, in (0, 1]
seed = 42
trials = 100
gamma_sign_flip = false   # A/B knob for the server-side dual sign

[penalty]        # sparsity prior at cluster heads and server
kind = "scad"    # none | l1 | scad | mcp
lambda = 0.1
gamma = 2.4
# eta_cluster = 49.8     # auto: N_l - 1/L
eta_global = 1.0

[consensus]      # coupling between hierarchy levels
# omega = 22.0           # auto: 5 * max measurement norm
# omega0 = 1100.0        # auto: max_l N_l * omega + eta * lambda * gamma
kind = "l1"      # l1 gives total-variation consensus; scad/mcp personalize
kind_lambda = 1.0
kind_gamma = 2.4

[schedule]       # sqrt-law growth/decay constants
# c = 22.0               # auto: omega
# d = 44.0               # auto: omega0 / 25
# alpha = 4.47213595     # default: sqrt(20)
# beta = 111.80339887    # default: 25 * sqrt(20)

[generation]     # benchmark instance family
p = 0.8          # measurement mask density
s = 0.3          # ground-truth support density
snr_db = -20.0
c1 = 0.9         # main noise component weight
c2 = 0.1         # heavy noise component weight (rate lambda1 / 10)
m_per_client = 1

[baseline]       # centralized subgradient reference
# eta0 = 0.0632          # auto: 1 / sqrt(total clients)
rho = 0.998      # geometric step decay
normalize = false        # true: eta0 becomes a step length (g / ||g||)
include_penalty = true

[scenario]
name = "vs_baseline"     # vs_baseline | vary_km | vary_pc | custom
k_m_list = [1, 5, 10, 20]
p_c_list = [0.3, 0.5, 0.7, 1.0]
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.n_per_cluster(), vec![50; 5]);
    }

    #[test]
    fn template_parses_to_defaults() {
        let cfg = parse_config(TEMPLATE).unwrap();
        assert_eq!(cfg, Config::default());
    }

    #[test]
    fn invalid_pc_rejected() {
        assert!(parse_config("p_c = 0.0").is_err());
        assert!(parse_config("p_c = 1.5").is_err());
    }

    #[test]
    fn overrides_reflected() {
        let cfg = parse_config("trials = 10\nk_m = 20").unwrap();
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.k_m, 20);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_config("bogus_key = 3").is_err());
    }

    #[test]
    fn resolve_uses_benchmark_formulas() {
        use crate::problems::generate_instance;
        use crate::stream::{derive_rng, Purpose};
        let cfg = Config {
            l: 2,
            n: 3,
            m: 8,
            ..Config::default()
        };
        let mut rng = derive_rng(1, 0, 0, Purpose::Data);
        let inst =
            generate_instance(&cfg.n_per_cluster(), cfg.m, &cfg.gen_params(), &mut rng).unwrap();
        let resolved = cfg.resolve(&inst);
        let omega = 5.0 * inst.max_measurement_norm();
        let eta = 3.0 - 0.5;
        let omega0 = 3.0 * omega + eta * 0.1 * 2.4;
        assert!((resolved.run.schedules.c - omega).abs() < 1e-12);
        assert!((resolved.run.schedules.d - omega0 / 25.0).abs() < 1e-12);
        assert!((resolved.run.schedules.alpha - 20f64.sqrt()).abs() < 1e-12);
        assert!((resolved.run.schedules.beta - 25.0 * 20f64.sqrt()).abs() < 1e-12);
        assert!((resolved.run.weights.omega_client - omega).abs() < 1e-12);
        assert!((resolved.run.weights.omega_cluster - omega0).abs() < 1e-12);
        assert!((resolved.run.rw_cluster[0].weight - eta).abs() < 1e-12);
        assert_eq!(resolved.run.rw_global.weight, 1.0);
        // the resolved schedules satisfy the consensus preconditions
        let report = crate::smoothing::check_convergence_conditions(&resolved.run.schedules, &resolved.bounds);
        assert!(report.client_ok && report.cluster_ok);
    }
}
