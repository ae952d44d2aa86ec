//! Discrete-round orchestration: asynchronous participation, multiple inner
//! rounds per global iteration, the staleness bound, and the barrier
//! between local work and the server update.
//!
//! Asynchrony is modeled as random per-round participation with a forcing
//! rule, not wall-clock delay, so every run is exactly reproducible from
//! its seed. Clusters are independent within a global iteration (the global
//! parameter only changes at the barrier), so they are processed by a
//! worker pool with results merged in cluster order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    client_round, cluster_round, consensus_residuals, server_update, ClientState, ClusterState,
    ConsensusWeights, GammaSign, NodeMsg, ServerState,
};
use crate::error::Error;
use crate::problems::{centralized_objective, relative_error, PhaseRetrievalLoss, ProblemInstance};
use crate::prox::PenaltySpec;
use crate::smoothing::ScheduleParams;
use crate::stream::{client_node_id, cluster_node_id, derive_rng, Purpose};

/// Fully-resolved run parameters: topology, loop counts, schedules, and
/// penalties. Weight/schedule values that the benchmark derives from the
/// instance are already filled in here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_per_cluster: Vec<usize>,
    pub m: usize,
    /// Global iterations.
    pub k_z: usize,
    /// Inner rounds per global iteration.
    pub k_m: usize,
    /// Staleness bound: max rounds any node may skip.
    pub k_a: usize,
    /// Per-round participation probability.
    pub p_c: f64,
    pub schedules: ScheduleParams,
    pub weights: ConsensusWeights,
    pub rw_cluster: Vec<PenaltySpec>,
    pub rw_global: PenaltySpec,
    pub gamma_sign: GammaSign,
    pub seed: u64,
    pub trials: usize,
    /// Common starting point for every node's primal and auxiliary
    /// variables (`None` = origin). The phase-retrieval loss has a zero
    /// subgradient at the origin, so benchmark runs start from a shared
    /// random point instead.
    #[serde(default)]
    pub w_init: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn num_clusters(&self) -> usize {
        self.n_per_cluster.len()
    }

    pub fn total_clients(&self) -> usize {
        self.n_per_cluster.iter().sum()
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n_per_cluster.is_empty() || self.n_per_cluster.contains(&0) {
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
        self.schedules.validate()?;
        for rw in &self.rw_cluster {
            rw.validate()?;
        }
        if self.rw_cluster.len() != self.n_per_cluster.len() {
            return Err(Error::InvalidConfig(
                "need one cluster prior penalty per cluster".into(),
            ));
        }
        if let Some(w) = &self.w_init {
            if w.len() != self.m {
                return Err(Error::DimensionMismatch {
                    expected: self.m,
                    got: w.len(),
                });
            }
        }
        self.rw_global.validate()?;
        self.weights.client_rc_kind.validate()?;
        self.weights.cluster_rc_kind.validate()?;
        if self.weights.omega_client < 0.0 || self.weights.omega_cluster < 0.0 {
            return Err(Error::InvalidConfig(
                "TV weights must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the convergence curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k0: u64,
    pub cumulative_client_updates: u64,
    pub relative_error: f64,
    pub max_client_gap: f64,
    pub max_cluster_gap: f64,
    pub max_primal_aux_gap: f64,
    pub objective: f64,
    /// Rounds each node performed during this global iteration, clients
    /// first (cluster-major), then cluster heads.
    pub node_updates: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn final_relative_error(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.relative_error)
            .unwrap_or(f64::NAN)
    }
}

/// Decides whether a node runs this round: forced after `k_a - 1`
/// consecutive skips, otherwise a Bernoulli draw. A certain participation
/// (`p_c >= 1` or forced) consumes no randomness.
pub fn sample_participation<R: Rng>(rng: &mut R, p_c: f64, skipped: u64, k_a: usize) -> bool {
    debug_assert!(p_c > 0.0 && p_c <= 1.0);
    if p_c >= 1.0 || skipped + 1 >= k_a as u64 {
        return true;
    }
    rng.random::<f64>() < p_c
}

struct ClusterSim {
    state: ClusterState,
    clients: Vec<ClientState>,
    losses: Vec<PhaseRetrievalLoss>,
    client_rngs: Vec<ChaCha8Rng>,
    head_rng: ChaCha8Rng,
}

/// All mutable state of one simulated system plus its per-node RNG streams.
pub struct SystemState {
    clusters: Vec<ClusterSim>,
    server: ServerState,
    cumulative_client_updates: u64,
}

impl SystemState {
    pub fn new(cfg: &RunConfig, instance: &ProblemInstance, trial: u64) -> Result<Self, Error> {
        cfg.validate()?;
        if instance.dim() != cfg.m {
            return Err(Error::DimensionMismatch {
                expected: cfg.m,
                got: instance.dim(),
            });
        }
        if instance.num_clusters() != cfg.num_clusters()
            || instance
                .clients
                .iter()
                .zip(&cfg.n_per_cluster)
                .any(|(c, &n)| c.len() != n)
        {
            return Err(Error::InvalidConfig(
                "instance topology does not match the run config".into(),
            ));
        }
        let client_sigma1 = cfg.schedules.client(1).0;
        let cluster_sigma1 = cfg.schedules.cluster(1).0;
        let box_dom = instance.box_domain();
        let init = cfg.w_init.clone().unwrap_or_else(|| vec![0.0; cfg.m]);
        let seed_node = |w: &mut Vec<f64>, z: &mut Vec<f64>, q: &mut Vec<f64>| {
            w.copy_from_slice(&init);
            z.copy_from_slice(&init);
            q.copy_from_slice(&init);
        };
        let clusters = instance
            .clients
            .iter()
            .enumerate()
            .map(|(l, members)| ClusterSim {
                state: {
                    let mut cs = ClusterState::zeros(cfg.m, members.len(), client_sigma1);
                    seed_node(&mut cs.w, &mut cs.z, &mut cs.q);
                    for msg in &mut cs.mailbox {
                        msg.q.copy_from_slice(&init);
                    }
                    cs
                },
                clients: members
                    .iter()
                    .map(|_| {
                        let mut c = ClientState::zeros(cfg.m);
                        seed_node(&mut c.w, &mut c.z, &mut c.q);
                        c
                    })
                    .collect(),
                losses: members
                    .iter()
                    .map(|d| PhaseRetrievalLoss::from_data(d.clone(), box_dom))
                    .collect(),
                client_rngs: (0..members.len())
                    .map(|j| {
                        derive_rng(
                            cfg.seed,
                            trial,
                            client_node_id(l, j),
                            Purpose::Participation,
                        )
                    })
                    .collect(),
                head_rng: derive_rng(cfg.seed, trial, cluster_node_id(l), Purpose::Participation),
            })
            .collect();
        let mut server = ServerState::zeros(cfg.m, cfg.num_clusters(), cluster_sigma1);
        server.w0.copy_from_slice(&init);
        for msg in &mut server.mailbox {
            msg.q.copy_from_slice(&init);
        }
        Ok(SystemState {
            clusters,
            server,
            cumulative_client_updates: 0,
        })
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn client_states(&self) -> Vec<Vec<ClientState>> {
        self.clusters.iter().map(|c| c.clients.clone()).collect()
    }

    pub fn cluster_states(&self) -> Vec<ClusterState> {
        self.clusters.iter().map(|c| c.state.clone()).collect()
    }
}

fn run_cluster_inner_rounds(
    sim: &mut ClusterSim,
    w0: &[f64],
    cfg: &RunConfig,
    l: usize,
) -> (Vec<u32>, u32, Option<NodeMsg>) {
    let mut client_updates = vec![0u32; sim.clients.len()];
    let mut head_updates = 0u32;
    let mut server_msg = None;
    for _ in 0..cfg.k_m {
        let mut any_member = false;
        // indexed loop: the body borrows several parallel fields of `sim`
        #[allow(clippy::needless_range_loop)]
        for j in 0..sim.clients.len() {
            let participate = sample_participation(
                &mut sim.client_rngs[j],
                cfg.p_c,
                sim.clients[j].skipped,
                cfg.k_a,
            );
            if !participate {
                sim.clients[j].skipped += 1;
                continue;
            }
            any_member = true;
            let (mut next, msg) = client_round(
                &sim.clients[j],
                &sim.losses[j],
                &sim.state.w,
                &cfg.schedules,
                &cfg.weights,
            );
            next.skipped = 0;
            sim.clients[j] = next;
            sim.state.mailbox[j] = msg;
            client_updates[j] += 1;
        }
        // The head refreshes whenever it received anything this round;
        // otherwise it joins with the same probability as a client.
        let head_participates = any_member
            || sample_participation(&mut sim.head_rng, cfg.p_c, sim.state.skipped, cfg.k_a);
        if head_participates {
            let (mut next, msg, _broadcast) = cluster_round(
                &sim.state,
                w0,
                &cfg.schedules,
                &cfg.weights,
                &cfg.rw_cluster[l],
            )
            .expect("mailbox is never empty after initialization");
            next.skipped = 0;
            sim.state = next;
            server_msg = Some(msg);
            head_updates += 1;
        } else {
            sim.state.skipped += 1;
        }
    }
    (client_updates, head_updates, server_msg)
}

/// Runs one global iteration: `k_m` inner rounds of client and cluster-head
/// work, then the synchronized server update.
pub fn run_global_iteration(
    state: &mut SystemState,
    cfg: &RunConfig,
    instance: &ProblemInstance,
) -> Result<TraceRecord, Error> {
    let w0 = state.server.w0.clone();
    let results: Vec<(Vec<u32>, u32, Option<NodeMsg>)> = state
        .clusters
        .par_iter_mut()
        .enumerate()
        .map(|(l, sim)| run_cluster_inner_rounds(sim, &w0, cfg, l))
        .collect();

    // Barrier: local rounds are done; the server reads the freshest message
    // from each cluster and refreshes the global parameter.
    let mut node_updates = Vec::with_capacity(cfg.total_clients() + cfg.num_clusters());
    for counts in results.iter() {
        node_updates.extend_from_slice(&counts.0);
    }
    for (l, (_, head_count, msg)) in results.into_iter().enumerate() {
        node_updates.push(head_count);
        if let Some(msg) = msg {
            state.server.mailbox[l] = msg;
        }
    }
    state.server.w0 = server_update(&state.server, &cfg.rw_global, cfg.gamma_sign)?;
    state.server.k0 += 1;

    let client_updates_this_iter: u64 = node_updates[..cfg.total_clients()]
        .iter()
        .map(|&c| c as u64)
        .sum();
    state.cumulative_client_updates += client_updates_this_iter;

    let clients = state.client_states();
    let clusters = state.cluster_states();
    let residuals = consensus_residuals(&clients, &clusters, &state.server);
    Ok(TraceRecord {
        k0: state.server.k0,
        cumulative_client_updates: state.cumulative_client_updates,
        relative_error: relative_error(&state.server.w0, &instance.w_true),
        max_client_gap: residuals.max_client_gap,
        max_cluster_gap: residuals.max_cluster_gap,
        max_primal_aux_gap: residuals.max_primal_aux_gap,
        objective: centralized_objective(
            instance,
            &state.server.w0,
            &cfg.rw_cluster,
            &cfg.rw_global,
        ),
        node_updates,
    })
}

/// Runs `k_z` global iterations for one trial. Bit-identical across calls
/// with the same (config, instance, trial).
pub fn run(cfg: &RunConfig, instance: &ProblemInstance, trial: u64) -> Result<Trace, Error> {
    let mut state = SystemState::new(cfg, instance, trial)?;
    let mut records = Vec::with_capacity(cfg.k_z);
    for _ in 0..cfg.k_z {
        records.push(run_global_iteration(&mut state, cfg, instance)?);
    }
    Ok(Trace { records })
}

/// Checks that every node updated at least once within every window of
/// `k_a` consecutive global iterations.
pub fn audit_staleness(trace: &Trace, k_a: usize) -> bool {
    let records = &trace.records;
    if records.is_empty() {
        return true;
    }
    let nodes = records[0].node_updates.len();
    for window in records.windows(k_a.min(records.len())) {
        for node in 0..nodes {
            let total: u32 = window.iter().map(|r| r.node_updates[node]).sum();
            if window.len() == k_a && total == 0 {
                return false;
            }
        }
    }
    true
}
