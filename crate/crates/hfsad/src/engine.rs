//! Deterministic state-transition rules for clients, cluster heads, and the
//! server.
//!
//! Each round is a pure function from the previous state and the freshest
//! messages to a new state plus outgoing messages; nothing here owns a
//! clock, RNG, or thread. The orchestration (who runs when) lives in the
//! simulator.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::prox::{
    penalty_value, prox_penalty_vec, prox_smoothed_penalty, PenaltyKind, PenaltySpec,
};
use crate::smoothing::{smoothed_abs, ScheduleParams};
use crate::vecops::{add_scaled, dist2, dot, sq_norm, sub};

/// Loss handled through its proximal operator; the engine never needs
/// gradients of the data-fit term.
pub trait LossProx {
    /// `argmin_w loss(w) + (1/(2*step)) ||w - v||^2`
    fn prox(&self, v: &[f64], step: f64) -> Vec<f64>;
    fn value(&self, w: &[f64]) -> f64;
}

/// One client's primal/auxiliary/dual variables and update counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub q: Vec<f64>,
    pub lambda_dual: Vec<f64>,
    pub gamma_dual: Vec<f64>,
    pub k: u64,
    /// Consecutive inner rounds this client sat out.
    pub skipped: u64,
}

impl ClientState {
    pub fn zeros(m: usize) -> Self {
        ClientState {
            w: vec![0.0; m],
            z: vec![0.0; m],
            q: vec![0.0; m],
            lambda_dual: vec![0.0; m],
            gamma_dual: vec![0.0; m],
            k: 0,
            skipped: 0,
        }
    }
}

/// Message a node sends up the hierarchy after finishing a round. Carries
/// the next-step penalty parameter so the receiver never re-derives the
/// sender's counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMsg {
    pub q: Vec<f64>,
    pub gamma_dual: Vec<f64>,
    pub sigma_next: f64,
    pub k: u64,
}

impl NodeMsg {
    /// Warm-start value standing in for a sender that has not reported yet.
    pub fn initial(m: usize, sigma1: f64) -> Self {
        NodeMsg {
            q: vec![0.0; m],
            gamma_dual: vec![0.0; m],
            sigma_next: sigma1,
            k: 0,
        }
    }
}

/// A cluster head's variables plus the latest message from each member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub q: Vec<f64>,
    pub lambda_dual: Vec<f64>,
    pub gamma_dual: Vec<f64>,
    pub k: u64,
    pub mailbox: Vec<NodeMsg>,
    pub skipped: u64,
}

impl ClusterState {
    pub fn zeros(m: usize, members: usize, member_sigma1: f64) -> Self {
        ClusterState {
            w: vec![0.0; m],
            z: vec![0.0; m],
            q: vec![0.0; m],
            lambda_dual: vec![0.0; m],
            gamma_dual: vec![0.0; m],
            k: 0,
            mailbox: (0..members)
                .map(|_| NodeMsg::initial(m, member_sigma1))
                .collect(),
            skipped: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerState {
    pub w0: Vec<f64>,
    pub k0: u64,
    pub mailbox: Vec<NodeMsg>,
}

impl ServerState {
    pub fn zeros(m: usize, clusters: usize, cluster_sigma1: f64) -> Self {
        ServerState {
            w0: vec![0.0; m],
            k0: 0,
            mailbox: (0..clusters)
                .map(|_| NodeMsg::initial(m, cluster_sigma1))
                .collect(),
        }
    }
}

/// Consensus-penalty configuration for both hierarchy levels. The TV
/// weights multiply the base penalty shape, which defaults to `l1` with
/// unit threshold; SCAD/MCP shapes switch the coupling to personalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusWeights {
    pub omega_client: f64,
    pub omega_cluster: f64,
    pub client_rc_kind: PenaltySpec,
    pub cluster_rc_kind: PenaltySpec,
}

impl ConsensusWeights {
    pub fn tv(omega_client: f64, omega_cluster: f64) -> Self {
        ConsensusWeights {
            omega_client,
            omega_cluster,
            client_rc_kind: PenaltySpec::l1(1.0, 1.0),
            cluster_rc_kind: PenaltySpec::l1(1.0, 1.0),
        }
    }

    pub fn client_spec(&self) -> PenaltySpec {
        self.client_rc_kind
            .with_weight(self.client_rc_kind.weight * self.omega_client)
    }

    pub fn cluster_spec(&self) -> PenaltySpec {
        self.cluster_rc_kind
            .with_weight(self.cluster_rc_kind.weight * self.omega_cluster)
    }
}

/// Which sign the server applies to the cluster duals in its aggregate.
/// `Minus` is the stationarity-consistent choice; `Plus` reproduces the
/// alternative for A/B comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[derive(Default)]
pub enum GammaSign {
    #[default]
    Minus,
    Plus,
}

/// Local primal step: prox of the loss at `z - lambda/sigma` with step
/// `1/sigma`.
pub fn client_primal_update<L: LossProx>(s: &ClientState, sigma: f64, loss: &L) -> Vec<f64> {
    assert!(sigma > 0.0);
    let iota = add_scaled(&s.z, -1.0 / sigma, &s.lambda_dual);
    loss.prox(&iota, 1.0 / sigma)
}

/// Joint update of an (inner, outer) auxiliary pair. With
/// `e = prox of the smoothed coupling at (b - a) with step 2/sigma`,
/// returns `z = (a+b)/2 - e/2` and `q = (a+b)/2 + e/2`, so `z + q = a + b`
/// exactly.
pub fn joint_zq_update(
    a: &[f64],
    b: &[f64],
    rc: &PenaltySpec,
    mu: f64,
    sigma: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert!(mu > 0.0 && sigma > 0.0);
    assert_eq!(a.len(), b.len());
    if rc.weight == 0.0 || rc.kind == PenaltyKind::None {
        // no coupling: the pair decouples exactly
        return (a.to_vec(), b.to_vec());
    }
    let step = 2.0 / sigma;
    let mut z = Vec::with_capacity(a.len());
    let mut q = Vec::with_capacity(a.len());
    for (&ai, &bi) in a.iter().zip(b) {
        let e = prox_smoothed_penalty(bi - ai, rc, mu, step);
        let mid = 0.5 * (ai + bi);
        z.push(mid - 0.5 * e);
        q.push(mid + 0.5 * e);
    }
    (z, q)
}

/// `dual + sigma * (primal - aux)`
pub fn dual_ascent(dual: &[f64], sigma: f64, primal: &[f64], aux: &[f64]) -> Vec<f64> {
    assert!(sigma > 0.0);
    debug_assert_eq!(dual.len(), primal.len());
    debug_assert_eq!(dual.len(), aux.len());
    dual.iter()
        .zip(primal.iter().zip(aux))
        .map(|(&d, (&p, &x))| d + sigma * (p - x))
        .collect()
}

/// The weighted-average point and its step used by the cluster primal
/// update, exposed separately so tests can check the arithmetic.
pub fn cluster_aggregate(cs: &ClusterState, sigma_l: f64) -> Result<(f64, Vec<f64>), Error> {
    if cs.mailbox.is_empty() {
        return Err(Error::ProtocolViolation(
            "cluster head has no member messages".into(),
        ));
    }
    let m = cs.w.len();
    let sigma_sum: f64 = sigma_l + cs.mailbox.iter().map(|msg| msg.sigma_next).sum::<f64>();
    let upsilon = 1.0 / sigma_sum;
    let mut r: Vec<f64> =
        cs.z.iter()
            .zip(&cs.lambda_dual)
            .map(|(&z, &l)| sigma_l * z - l)
            .collect();
    for msg in &cs.mailbox {
        if msg.q.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: msg.q.len(),
            });
        }
        for ((ri, &qi), &gi) in r.iter_mut().zip(&msg.q).zip(&msg.gamma_dual) {
            *ri += msg.sigma_next * qi - gi;
        }
    }
    for v in &mut r {
        *v *= upsilon;
    }
    Ok((upsilon, r))
}

/// Cluster primal step: prox of the prior penalty at the sigma-weighted
/// average of the head's own state and its members' latest reports.
pub fn cluster_head_primal_update(
    cs: &ClusterState,
    sigma_l: f64,
    rw: &PenaltySpec,
) -> Result<Vec<f64>, Error> {
    let (upsilon, r_bar) = cluster_aggregate(cs, sigma_l)?;
    Ok(prox_penalty_vec(rw, &r_bar, upsilon))
}

/// Global step: prox of the global prior at the sigma-weighted average of
/// cluster reports.
pub fn server_update(
    ss: &ServerState,
    rw0: &PenaltySpec,
    gamma_sign: GammaSign,
) -> Result<Vec<f64>, Error> {
    if ss.mailbox.is_empty() {
        return Err(Error::ProtocolViolation(
            "server has no cluster messages".into(),
        ));
    }
    let m = ss.w0.len();
    let xi = 1.0 / ss.mailbox.iter().map(|msg| msg.sigma_next).sum::<f64>();
    let sign = match gamma_sign {
        GammaSign::Minus => -1.0,
        GammaSign::Plus => 1.0,
    };
    let mut arg = vec![0.0; m];
    for msg in &ss.mailbox {
        if msg.q.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: msg.q.len(),
            });
        }
        for ((ai, &qi), &gi) in arg.iter_mut().zip(&msg.q).zip(&msg.gamma_dual) {
            *ai += msg.sigma_next * qi + sign * gi;
        }
    }
    for v in &mut arg {
        *v *= xi;
    }
    Ok(prox_penalty_vec(rw0, &arg, xi))
}

/// One full client round: schedule step, primal prox, joint (z, q) update,
/// then both dual ascents, in that order. Returns the new state and the
/// message for the cluster head.
pub fn client_round<L: LossProx>(
    s: &ClientState,
    loss: &L,
    cluster_w: &[f64],
    sched: &ScheduleParams,
    weights: &ConsensusWeights,
) -> (ClientState, NodeMsg) {
    let k = s.k + 1;
    let (sigma, mu) = sched.client(k);
    let mut next = s.clone();
    next.k = k;
    next.w = client_primal_update(&next, sigma, loss);

    let a = add_scaled(&next.w, 1.0 / sigma, &next.lambda_dual);
    let b = add_scaled(cluster_w, 1.0 / sigma, &next.gamma_dual);
    let rc = weights.client_spec();
    let (z, q) = joint_zq_update(&a, &b, &rc, mu, sigma);
    next.z = z;
    next.q = q;

    next.lambda_dual = dual_ascent(&next.lambda_dual, sigma, &next.w, &next.z);
    next.gamma_dual = dual_ascent(&next.gamma_dual, sigma, cluster_w, &next.q);

    let msg = NodeMsg {
        q: next.q.clone(),
        gamma_dual: next.gamma_dual.clone(),
        sigma_next: sched.client(k + 1).0,
        k,
    };
    (next, msg)
}

/// One full cluster-head round. Returns the new state, the message for the
/// server, and the fresh `w_l` broadcast for the member clients.
pub fn cluster_round(
    cs: &ClusterState,
    w0: &[f64],
    sched: &ScheduleParams,
    weights: &ConsensusWeights,
    rw: &PenaltySpec,
) -> Result<(ClusterState, NodeMsg, Vec<f64>), Error> {
    let k = cs.k + 1;
    let (sigma, mu) = sched.cluster(k);
    let mut next = cs.clone();
    next.k = k;
    next.w = cluster_head_primal_update(cs, sigma, rw)?;

    let a = add_scaled(&next.w, 1.0 / sigma, &next.lambda_dual);
    let b = add_scaled(w0, 1.0 / sigma, &next.gamma_dual);
    let rc = weights.cluster_spec();
    let (z, q) = joint_zq_update(&a, &b, &rc, mu, sigma);
    next.z = z;
    next.q = q;

    next.lambda_dual = dual_ascent(&next.lambda_dual, sigma, &next.w, &next.z);
    next.gamma_dual = dual_ascent(&next.gamma_dual, sigma, w0, &next.q);

    let msg = NodeMsg {
        q: next.q.clone(),
        gamma_dual: next.gamma_dual.clone(),
        sigma_next: sched.cluster(k + 1).0,
        k,
    };
    let broadcast = next.w.clone();
    Ok((next, msg, broadcast))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResiduals {
    /// max over (l, j) of ||w_l^j - w_l||_2
    pub max_client_gap: f64,
    /// max over l of ||w_l - w_0||_2
    pub max_cluster_gap: f64,
    /// max constraint residual over all primal/auxiliary pairs
    pub max_primal_aux_gap: f64,
}

pub fn consensus_residuals(
    clients: &[Vec<ClientState>],
    clusters: &[ClusterState],
    server: &ServerState,
) -> ConsensusResiduals {
    let mut max_client_gap: f64 = 0.0;
    let mut max_cluster_gap: f64 = 0.0;
    let mut max_primal_aux: f64 = 0.0;
    for (cluster, members) in clusters.iter().zip(clients) {
        for c in members {
            max_client_gap = max_client_gap.max(dist2(&c.w, &cluster.w));
            max_primal_aux = max_primal_aux
                .max(dist2(&c.w, &c.z))
                .max(dist2(&cluster.w, &c.q));
        }
        max_cluster_gap = max_cluster_gap.max(dist2(&cluster.w, &server.w0));
        max_primal_aux = max_primal_aux
            .max(dist2(&cluster.w, &cluster.z))
            .max(dist2(&server.w0, &cluster.q));
    }
    ConsensusResiduals {
        max_client_gap,
        max_cluster_gap,
        max_primal_aux_gap: max_primal_aux,
    }
}

/// Smoothed coupling value `weight * sum_m p(sqrt(d_m^2 + mu^2))` between an
/// (inner, outer) pair.
pub fn smoothed_coupling_value(rc: &PenaltySpec, inner: &[f64], outer: &[f64], mu: f64) -> f64 {
    if rc.weight == 0.0 || rc.kind == PenaltyKind::None {
        return 0.0;
    }
    let diff = sub(outer, inner);
    let sum: f64 = diff
        .iter()
        .map(|&d| {
            let t = smoothed_abs(d, mu);
            match rc.kind {
                PenaltyKind::None => 0.0,
                PenaltyKind::L1 => rc.lambda * t,
                PenaltyKind::Scad => crate::prox::scad_value(t, rc.lambda, rc.gamma),
                PenaltyKind::Mcp => crate::prox::mcp_value(t, rc.lambda, rc.gamma),
            }
        })
        .sum();
    rc.weight * sum
}

/// Explicit evaluation of the smoothed augmented Lagrangian over the whole
/// system, for diagnostics. Nodes that have never updated use their k = 1
/// schedule values.
#[allow(clippy::too_many_arguments)]
pub fn augmented_lagrangian<L: LossProx>(
    clients: &[Vec<ClientState>],
    losses: &[Vec<L>],
    clusters: &[ClusterState],
    server: &ServerState,
    sched: &ScheduleParams,
    weights: &ConsensusWeights,
    rw_cluster: &[PenaltySpec],
    rw_global: &PenaltySpec,
) -> f64 {
    let rc_client = weights.client_spec();
    let rc_cluster = weights.cluster_spec();
    let mut total = penalty_value(rw_global, &server.w0);
    for (l, cluster) in clusters.iter().enumerate() {
        let (sigma_l, mu_l) = sched.cluster(cluster.k.max(1));
        total += penalty_value(&rw_cluster[l], &cluster.w);
        total += smoothed_coupling_value(&rc_cluster, &cluster.z, &cluster.q, mu_l);
        total += dot(&cluster.lambda_dual, &sub(&cluster.w, &cluster.z));
        total += 0.5 * sigma_l * sq_norm(&sub(&cluster.w, &cluster.z));
        total += dot(&cluster.gamma_dual, &sub(&server.w0, &cluster.q));
        total += 0.5 * sigma_l * sq_norm(&sub(&server.w0, &cluster.q));
        for (c, loss) in clients[l].iter().zip(&losses[l]) {
            let (sigma, mu) = sched.client(c.k.max(1));
            total += loss.value(&c.w);
            total += smoothed_coupling_value(&rc_client, &c.z, &c.q, mu);
            total += dot(&c.lambda_dual, &sub(&c.w, &c.z));
            total += 0.5 * sigma * sq_norm(&sub(&c.w, &c.z));
            total += dot(&c.gamma_dual, &sub(&cluster.w, &c.q));
            total += 0.5 * sigma * sq_norm(&sub(&cluster.w, &c.q));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::BoxDomain;

    struct QuadLoss {
        target: Vec<f64>,
    }

    impl LossProx for QuadLoss {
        fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
            // loss = 1/2 ||w - target||^2, prox = (v + step*target) / (1 + step)
            v.iter()
                .zip(&self.target)
                .map(|(&vi, &ti)| (vi + step * ti) / (1.0 + step))
                .collect()
        }
        fn value(&self, w: &[f64]) -> f64 {
            0.5 * crate::vecops::sq_norm(&sub(w, &self.target))
        }
    }

    fn sched() -> ScheduleParams {
        ScheduleParams {
            c: 2.0,
            d: 3.0,
            alpha: 0.5,
            beta: 0.7,
        }
    }

    #[test]
    fn primal_update_fixed_point() {
        let target = vec![0.4, -0.2];
        let loss = QuadLoss {
            target: target.clone(),
        };
        let mut s = ClientState::zeros(2);
        s.z = target.clone();
        let w = client_primal_update(&s, 1e8, &loss);
        for (wi, ti) in w.iter().zip(&target) {
            assert!((wi - ti).abs() < 1e-7);
        }
    }

    #[test]
    fn primal_update_large_sigma_limit() {
        let loss = QuadLoss {
            target: vec![3.0, 3.0],
        };
        let mut s = ClientState::zeros(2);
        s.z = vec![1.0, -1.0];
        s.lambda_dual = vec![0.5, 0.5];
        let w = client_primal_update(&s, 1e8, &loss);
        for (wi, zi) in w.iter().zip(&s.z) {
            assert!((wi - zi).abs() < 1e-4);
        }
    }

    #[test]
    fn joint_update_symmetric_fixed_point() {
        let a = vec![1.0, -2.0, 0.5];
        let rc = PenaltySpec::l1(1.0, 3.0);
        let (z, q) = joint_zq_update(&a, &a, &rc, 1e-3, 2.0);
        for i in 0..a.len() {
            assert!((z[i] - a[i]).abs() < 1e-12);
            assert!((q[i] - a[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_update_zero_weight_decouples() {
        let a = vec![1.0, -2.0];
        let b = vec![0.3, 4.0];
        let rc = PenaltySpec::l1(1.0, 0.0);
        let (z, q) = joint_zq_update(&a, &b, &rc, 1e-3, 2.0);
        assert_eq!(z, a);
        assert_eq!(q, b);
    }

    #[test]
    fn joint_update_conservation_and_shrinkage() {
        let a = vec![0.7, -1.3, 2.2, 0.0];
        let b = vec![-0.5, 1.1, 2.0, 3.0];
        let rc = PenaltySpec::l1(1.0, 0.8);
        let (z, q) = joint_zq_update(&a, &b, &rc, 1e-3, 1.7);
        for i in 0..a.len() {
            assert!((z[i] + q[i] - a[i] - b[i]).abs() < 1e-12);
        }
        let gap: f64 = crate::vecops::norm1(&sub(&q, &z));
        let orig: f64 = crate::vecops::norm1(&sub(&b, &a));
        assert!(gap <= orig + 1e-12);
    }

    #[test]
    fn dual_ascent_arithmetic() {
        let d = dual_ascent(&[0.0, 0.0], 2.0, &[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(d, vec![2.0, 0.0]);
        let unchanged = dual_ascent(&[1.0, -1.0], 5.0, &[0.3, 0.4], &[0.3, 0.4]);
        assert_eq!(unchanged, vec![1.0, -1.0]);
    }

    #[test]
    fn cluster_update_average_of_identical() {
        let m = 3;
        let v = vec![0.5, -1.0, 2.0];
        let mut cs = ClusterState::zeros(m, 2, 1.0);
        cs.z = v.clone();
        for msg in &mut cs.mailbox {
            msg.q = v.clone();
        }
        let w = cluster_head_primal_update(&cs, 2.0, &PenaltySpec::none()).unwrap();
        for (wi, vi) in w.iter().zip(&v) {
            assert!((wi - vi).abs() < 1e-12);
        }
    }

    #[test]
    fn cluster_aggregate_two_client_arithmetic() {
        let m = 1;
        let mut cs = ClusterState::zeros(m, 2, 1.0);
        cs.z = vec![1.0];
        cs.lambda_dual = vec![0.5];
        cs.mailbox[0] = NodeMsg {
            q: vec![2.0],
            gamma_dual: vec![0.1],
            sigma_next: 3.0,
            k: 1,
        };
        cs.mailbox[1] = NodeMsg {
            q: vec![-1.0],
            gamma_dual: vec![-0.2],
            sigma_next: 4.0,
            k: 1,
        };
        let sigma_l = 2.0;
        let (upsilon, r) = cluster_aggregate(&cs, sigma_l).unwrap();
        // upsilon = 1/(2+3+4), r = upsilon*(2*1 - 0.5 + 3*2 - 0.1 + 4*(-1) + 0.2)
        assert!((upsilon - 1.0 / 9.0).abs() < 1e-15);
        assert!((r[0] - (2.0 - 0.5 + 6.0 - 0.1 - 4.0 + 0.2) / 9.0).abs() < 1e-14);
    }

    #[test]
    fn cluster_update_scad_composes_with_prox() {
        let m = 2;
        let mut cs = ClusterState::zeros(m, 1, 1.5);
        cs.mailbox[0].q = vec![0.05, 1.0];
        let rw = PenaltySpec::scad(0.1, 2.4, 2.0);
        let sigma_l = 2.0;
        let (upsilon, r) = cluster_aggregate(&cs, sigma_l).unwrap();
        let w = cluster_head_primal_update(&cs, sigma_l, &rw).unwrap();
        for i in 0..m {
            let expect = crate::prox::prox_scad(r[i], 0.1, 2.4, upsilon * rw.weight);
            assert_eq!(w[i], expect);
        }
    }

    #[test]
    fn empty_mailbox_is_protocol_violation() {
        let mut cs = ClusterState::zeros(2, 0, 1.0);
        cs.mailbox.clear();
        assert!(cluster_head_primal_update(&cs, 1.0, &PenaltySpec::none()).is_err());
        let ss = ServerState {
            w0: vec![0.0; 2],
            k0: 0,
            mailbox: vec![],
        };
        assert!(server_update(&ss, &PenaltySpec::none(), GammaSign::Minus).is_err());
    }

    #[test]
    fn server_weighted_average() {
        let m = 2;
        let mut ss = ServerState::zeros(m, 2, 1.0);
        ss.mailbox[0] = NodeMsg {
            q: vec![1.0, 0.0],
            gamma_dual: vec![0.0, 0.0],
            sigma_next: 1.0,
            k: 1,
        };
        ss.mailbox[1] = NodeMsg {
            q: vec![4.0, 2.0],
            gamma_dual: vec![0.0, 0.0],
            sigma_next: 3.0,
            k: 1,
        };
        let w0 = server_update(&ss, &PenaltySpec::none(), GammaSign::Minus).unwrap();
        assert!((w0[0] - (1.0 + 12.0) / 4.0).abs() < 1e-14);
        assert!((w0[1] - 6.0 / 4.0).abs() < 1e-14);

        // identical q with zero duals: returns that value for any sign choice
        for msg in &mut ss.mailbox {
            msg.q = vec![0.7, -0.3];
        }
        for sign in [GammaSign::Minus, GammaSign::Plus] {
            let w0 = server_update(&ss, &PenaltySpec::none(), sign).unwrap();
            assert!((w0[0] - 0.7).abs() < 1e-14 && (w0[1] + 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn server_update_scad_composes_with_prox() {
        let mut ss = ServerState::zeros(1, 2, 1.0);
        ss.mailbox[0].q = vec![0.4];
        ss.mailbox[1].q = vec![0.2];
        let rw0 = PenaltySpec::scad(0.1, 2.4, 1.0);
        let w0 = server_update(&ss, &rw0, GammaSign::Minus).unwrap();
        let xi = 0.5;
        let avg = (0.4 + 0.2) / 2.0;
        assert_eq!(w0[0], crate::prox::prox_scad(avg, 0.1, 2.4, xi));
    }

    #[test]
    fn client_round_matches_hand_trace() {
        let m = 2;
        let loss = QuadLoss {
            target: vec![1.0, -1.0],
        };
        let s = ClientState::zeros(m);
        let cluster_w = vec![0.2, 0.1];
        let weights = ConsensusWeights::tv(0.3, 0.3);
        let sc = sched();
        let (next, msg) = client_round(&s, &loss, &cluster_w, &sc, &weights);

        // hand trace of the four sub-ops
        let k = 1;
        let (sigma, mu) = sc.client(k);
        let w = client_primal_update(&s, sigma, &loss);
        let a = add_scaled(&w, 1.0 / sigma, &s.lambda_dual);
        let b = add_scaled(&cluster_w, 1.0 / sigma, &s.gamma_dual);
        let (z, q) = joint_zq_update(&a, &b, &weights.client_spec(), mu, sigma);
        let lambda = dual_ascent(&s.lambda_dual, sigma, &w, &z);
        let gamma = dual_ascent(&s.gamma_dual, sigma, &cluster_w, &q);

        assert_eq!(next.k, 1);
        assert_eq!(next.w, w);
        assert_eq!(next.z, z);
        assert_eq!(next.q, q);
        assert_eq!(next.lambda_dual, lambda);
        assert_eq!(next.gamma_dual, gamma);
        assert_eq!(msg.q, q);
        assert_eq!(msg.gamma_dual, gamma);
        assert_eq!(msg.sigma_next, sc.client(2).0);
        assert_eq!(msg.k, 1);
    }

    #[test]
    fn client_round_schedule_advances() {
        let loss = QuadLoss { target: vec![1.0] };
        let s = ClientState::zeros(1);
        let weights = ConsensusWeights::tv(0.1, 0.1);
        let sc = sched();
        let (s1, m1) = client_round(&s, &loss, &[0.0], &sc, &weights);
        let (_, m2) = client_round(&s1, &loss, &[0.0], &sc, &weights);
        assert!(m2.sigma_next > m1.sigma_next);
    }

    #[test]
    fn residuals_on_perturbed_state() {
        let m = 2;
        let clusters = vec![ClusterState::zeros(m, 1, 1.0)];
        let server = ServerState::zeros(m, 1, 1.0);
        let mut clients = vec![vec![ClientState::zeros(m)]];
        let r = consensus_residuals(&clients, &clusters, &server);
        assert_eq!(
            (r.max_client_gap, r.max_cluster_gap, r.max_primal_aux_gap),
            (0.0, 0.0, 0.0)
        );
        clients[0][0].w[0] = 0.25;
        let r = consensus_residuals(&clients, &clusters, &server);
        assert_eq!(r.max_client_gap, 0.25);
    }

    #[test]
    fn plain_averaging_without_penalties() {
        // no penalties, zero duals, one client per cluster: after one sweep
        // the server output is the sigma-weighted mean of cluster q values.
        let m = 1;
        let sc = ScheduleParams {
            c: 1.0,
            d: 2.0,
            alpha: 1.0,
            beta: 1.0,
        };
        let weights = ConsensusWeights::tv(0.0, 0.0);
        let rw = PenaltySpec::none();
        let targets = [2.0, -4.0];
        let mut server = ServerState::zeros(m, 2, sc.cluster(1).0);
        for (l, &t) in targets.iter().enumerate() {
            let loss = QuadLoss { target: vec![t] };
            let client = ClientState::zeros(m);
            let mut cluster = ClusterState::zeros(m, 1, sc.client(1).0);
            let (_, cmsg) = client_round(&client, &loss, &cluster.w, &sc, &weights);
            cluster.mailbox[0] = cmsg;
            let (_, smsg, _) = cluster_round(&cluster, &server.w0, &sc, &weights, &rw).unwrap();
            server.mailbox[l] = smsg;
        }
        let w0 = server_update(&server, &rw, GammaSign::Minus).unwrap();
        let num: f64 = server
            .mailbox
            .iter()
            .map(|msg| msg.sigma_next * msg.q[0])
            .sum();
        let den: f64 = server.mailbox.iter().map(|msg| msg.sigma_next).sum();
        assert!((w0[0] - num / den).abs() < 1e-14);
    }

    #[test]
    fn augmented_lagrangian_hand_value() {
        // one cluster, one client, everything zero except w0: only the
        // quadratic coupling on (w0 - q_l) and the global prior remain.
        let m = 1;
        let clients = vec![vec![ClientState::zeros(m)]];
        let losses = vec![vec![QuadLoss { target: vec![0.0] }]];
        let clusters = vec![ClusterState::zeros(m, 1, 1.0)];
        let mut server = ServerState::zeros(m, 1, 1.0);
        server.w0 = vec![2.0];
        let sc = ScheduleParams {
            c: 1.0,
            d: 3.0,
            alpha: 1.0,
            beta: 1.0,
        };
        let weights = ConsensusWeights::tv(0.0, 0.0);
        let val = augmented_lagrangian(
            &clients,
            &losses,
            &clusters,
            &server,
            &sc,
            &weights,
            &[PenaltySpec::none()],
            &PenaltySpec::none(),
        );
        // client loss at w=0: 0; cluster sigma = 3, 0.5*3*(2-0)^2 = 6
        assert!((val - 6.0).abs() < 1e-12);
    }

    #[test]
    fn phase_retrieval_iterates_stay_in_box() {
        use crate::problems::PhaseRetrievalLoss;
        let b = BoxDomain::new(5.0).unwrap();
        let loss = PhaseRetrievalLoss::single(vec![0.9, -0.4], 2.0, b);
        let mut s = ClientState::zeros(2);
        s.z = vec![4.9, -4.9];
        s.lambda_dual = vec![-3.0, 3.0];
        let weights = ConsensusWeights::tv(0.5, 0.5);
        let sc = sched();
        for _ in 0..50 {
            let (next, _) = client_round(&s, &loss, &[0.0, 0.0], &sc, &weights);
            assert!(b.contains(&next.w));
            s = next;
        }
    }
}
