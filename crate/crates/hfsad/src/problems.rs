//! Benchmark problem generation: sparse robust phase retrieval with
//! mixture-exponential noise, plus the centralized subgradient baseline.

use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::LossProx;
use crate::error::Error;
use crate::prox::{
    penalty_value, project_box, prox_phase_retrieval_loss, scad_derivative, BoxDomain, PenaltySpec,
};
use crate::simulator::{Trace, TraceRecord};
use crate::vecops::{dot, sq_norm};

/// Second moment of the mixture-exponential noise equals
/// `MIXTURE_SECOND_MOMENT / lambda1^2` under the rate convention with
/// `lambda2 = lambda1 / 10`: `0.9 * 2 + 0.1 * 2 * 10^2 = 21.8`.
pub const MIXTURE_SECOND_MOMENT: f64 = 21.8;

/// Two-component exponential mixture, parameterized by rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub c1: f64,
    pub c2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl NoiseSpec {
    pub fn benchmark_mixture(lambda1: f64) -> Self {
        NoiseSpec {
            c1: 0.9,
            c2: 0.1,
            lambda1,
            lambda2: lambda1 / 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if (self.c1 + self.c2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig("noise weights must sum to 1".into()));
        }
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return Err(Error::InvalidConfig("noise rates must be positive".into()));
        }
        Ok(())
    }

    /// `E[eps^2] = c1 * 2/lambda1^2 + c2 * 2/lambda2^2`
    pub fn second_moment(&self) -> f64 {
        self.c1 * 2.0 / (self.lambda1 * self.lambda1)
            + self.c2 * 2.0 / (self.lambda2 * self.lambda2)
    }
}

/// One draw of the nonnegative mixture-exponential noise.
pub fn sample_noise<R: Rng>(spec: &NoiseSpec, rng: &mut R) -> f64 {
    let rate = if rng.random::<f64>() < spec.c1 {
        spec.lambda1
    } else {
        spec.lambda2
    };
    Exp::new(rate).expect("positive rate").sample(rng)
}

/// Noise rate implied by a target SNR (dB) and the realized signal energy:
/// `lambda1 = sqrt(total_clients * 21.8 * 10^(snr/10) / signal_sq_sum)`.
pub fn compute_lambda1(
    snr_db: f64,
    signal_sq_sum: f64,
    total_clients: usize,
) -> Result<f64, Error> {
    if !(signal_sq_sum > 0.0) {
        return Err(Error::DegenerateInstance(
            "nonpositive signal energy".into(),
        ));
    }
    let num = total_clients as f64 * MIXTURE_SECOND_MOMENT * 10f64.powf(snr_db / 10.0);
    Ok((num / signal_sq_sum).sqrt())
}

/// Data of one client: one or more (measurement vector, intensity) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientData {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

/// Generation knobs for the benchmark family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Density of the per-cluster measurement masks.
    pub p: f64,
    /// Density of the ground-truth support mask.
    pub s: f64,
    pub snr_db: f64,
    pub c1: f64,
    pub c2: f64,
    /// Measurements per client; the benchmark scenarios use 1.
    pub m_per_client: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            p: 0.8,
            s: 0.3,
            snr_db: -20.0,
            c1: 0.9,
            c2: 0.1,
            m_per_client: 1,
        }
    }
}

/// A fully-realized benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub w_true: Vec<f64>,
    /// clients[l][j]
    pub clients: Vec<Vec<ClientData>>,
    pub mask_s: Vec<u8>,
    pub masks_h: Vec<Vec<u8>>,
    pub lambda1: f64,
    pub snr_db: f64,
    pub box_bound: f64,
}

impl ProblemInstance {
    pub fn num_clusters(&self) -> usize {
        self.clients.len()
    }

    pub fn total_clients(&self) -> usize {
        self.clients.iter().map(|c| c.len()).sum()
    }

    pub fn dim(&self) -> usize {
        self.w_true.len()
    }

    pub fn box_domain(&self) -> BoxDomain {
        BoxDomain {
            bound: self.box_bound,
        }
    }

    /// Largest Euclidean measurement norm, the quantity the TV weight is
    /// derived from.
    pub fn max_measurement_norm(&self) -> f64 {
        self.clients
            .iter()
            .flatten()
            .flat_map(|c| c.xs.iter())
            .map(|x| sq_norm(x).sqrt())
            .fold(0.0, f64::max)
    }
}

fn draw_mask<R: Rng>(m: usize, density: f64, rng: &mut R) -> Vec<u8> {
    (0..m)
        .map(|_| u8::from(rng.random::<f64>() < density))
        .collect()
}

fn binomial_3sigma_ok(mask: &[u8], density: f64) -> bool {
    let m = mask.len() as f64;
    let count = mask.iter().map(|&b| b as f64).sum::<f64>();
    let sd = (m * density * (1.0 - density)).sqrt();
    (count - m * density).abs() <= 3.0 * sd
}

/// Draws a mask whose realized density is within the 3-sigma binomial band
/// and which is not all-zero. Errors after too many redraws (degenerate
/// density).
fn draw_mask_checked<R: Rng>(m: usize, density: f64, rng: &mut R) -> Result<Vec<u8>, Error> {
    for _ in 0..1000 {
        let mask = draw_mask(m, density, rng);
        if mask.iter().any(|&b| b != 0) && binomial_3sigma_ok(&mask, density) {
            return Ok(mask);
        }
    }
    Err(Error::DegenerateInstance(format!(
        "could not draw a usable mask at density {density}"
    )))
}

fn masked_gaussian<R: Rng>(mask: &[u8], rng: &mut R) -> Vec<f64> {
    mask.iter()
        .map(|&b| {
            let g: f64 = StandardNormal.sample(rng);
            if b != 0 {
                g
            } else {
                0.0
            }
        })
        .collect()
}

/// Generates a benchmark instance: sparse Gaussian ground truth, masked
/// Gaussian measurements per cluster, and intensities corrupted by
/// mixture-exponential noise calibrated to the target SNR.
pub fn generate_instance<R: Rng>(
    n_per_cluster: &[usize],
    m: usize,
    gen: &GenParams,
    rng: &mut R,
) -> Result<ProblemInstance, Error> {
    if !(gen.s > 0.0 && gen.s <= 1.0) || !(gen.p > 0.0 && gen.p <= 1.0) {
        return Err(Error::InvalidConfig(
            "mask densities must lie in (0, 1]".into(),
        ));
    }
    if gen.m_per_client == 0 {
        return Err(Error::InvalidConfig("m_per_client must be >= 1".into()));
    }
    let mask_s = draw_mask_checked(m, gen.s, rng)?;
    let w_true = masked_gaussian(&mask_s, rng);

    let mut masks_h = Vec::with_capacity(n_per_cluster.len());
    // clusters -> clients -> measurements -> coordinates
    let mut xs_all: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(n_per_cluster.len());
    let mut signal_sq_sum = 0.0;
    for &n in n_per_cluster {
        let mask_h = draw_mask_checked(m, gen.p, rng)?;
        let mut cluster_xs = Vec::with_capacity(n);
        for _ in 0..n {
            let mut xs = Vec::with_capacity(gen.m_per_client);
            for _ in 0..gen.m_per_client {
                let x = masked_gaussian(&mask_h, rng);
                signal_sq_sum += dot(&x, &w_true).powi(2);
                xs.push(x);
            }
            cluster_xs.push(xs);
        }
        masks_h.push(mask_h);
        xs_all.push(cluster_xs);
    }

    let total: usize = n_per_cluster.iter().sum::<usize>() * gen.m_per_client;
    let lambda1 = compute_lambda1(gen.snr_db, signal_sq_sum, total)?;
    let noise = NoiseSpec {
        c1: gen.c1,
        c2: gen.c2,
        lambda1,
        lambda2: lambda1 / 10.0,
    };
    noise.validate()?;

    let clients = xs_all
        .into_iter()
        .map(|cluster_xs| {
            cluster_xs
                .into_iter()
                .map(|xs| {
                    let ys = xs
                        .iter()
                        .map(|x| dot(x, &w_true).powi(2) + sample_noise(&noise, rng))
                        .collect();
                    ClientData { xs, ys }
                })
                .collect()
        })
        .collect();

    Ok(ProblemInstance {
        w_true,
        clients,
        mask_s,
        masks_h,
        lambda1,
        snr_db: gen.snr_db,
        box_bound: 5.0,
    })
}

/// `min(||w_hat - w||^2, ||w_hat + w||^2) / ||w||^2`; the global sign
/// ambiguity of phase retrieval is quotiented out.
pub fn relative_error(w_hat: &[f64], w_true: &[f64]) -> f64 {
    let denom = sq_norm(w_true);
    assert!(
        denom > 0.0,
        "relative error undefined for zero ground truth"
    );
    let minus: f64 = w_hat
        .iter()
        .zip(w_true)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    let plus: f64 = w_hat
        .iter()
        .zip(w_true)
        .map(|(&a, &b)| (a + b) * (a + b))
        .sum();
    minus.min(plus) / denom
}

/// The per-client loss `sum_i |y_i - (x_i' w)^2|` restricted to the box,
/// accessed through its prox.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRetrievalLoss {
    pub data: ClientData,
    pub box_dom: BoxDomain,
}

impl PhaseRetrievalLoss {
    pub fn single(x: Vec<f64>, y: f64, box_dom: BoxDomain) -> Self {
        PhaseRetrievalLoss {
            data: ClientData {
                xs: vec![x],
                ys: vec![y],
            },
            box_dom,
        }
    }

    pub fn from_data(data: ClientData, box_dom: BoxDomain) -> Self {
        PhaseRetrievalLoss { data, box_dom }
    }
}

impl LossProx for PhaseRetrievalLoss {
    fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        if self.data.xs.len() == 1 {
            return prox_phase_retrieval_loss(
                v,
                &self.data.xs[0],
                self.data.ys[0],
                step,
                self.box_dom,
            );
        }
        // Multiple measurements have no scalar reduction; run a few
        // projected subgradient steps on the prox objective instead.
        let mut w = v.to_vec();
        for t in 0..20 {
            let mut g = vec![0.0; w.len()];
            for (x, &y) in self.data.xs.iter().zip(&self.data.ys) {
                let u = dot(x, &w);
                let s = (u * u - y).signum() * 2.0 * u;
                for (gi, &xi) in g.iter_mut().zip(x) {
                    *gi += s * xi;
                }
            }
            for ((gi, &wi), &vi) in g.iter_mut().zip(&w).zip(v) {
                *gi += (wi - vi) / step;
            }
            let eta = step / (t + 1) as f64;
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= eta * gi;
            }
            w = project_box(&w, self.box_dom);
        }
        w
    }

    fn value(&self, w: &[f64]) -> f64 {
        if !self.box_dom.contains(w) {
            return f64::INFINITY;
        }
        self.data
            .xs
            .iter()
            .zip(&self.data.ys)
            .map(|(x, &y)| (y - dot(x, w).powi(2)).abs())
            .sum()
    }
}

/// Centralized objective the baseline minimizes:
/// `sum_{l,j} |y - (x'w)^2| + sum_l eta_l P(w) + P(w)` on the box.
pub fn centralized_objective(
    instance: &ProblemInstance,
    w: &[f64],
    rw_cluster: &[PenaltySpec],
    rw_global: &PenaltySpec,
) -> f64 {
    let mut total = 0.0;
    for cluster in &instance.clients {
        for client in cluster {
            for (x, &y) in client.xs.iter().zip(&client.ys) {
                total += (y - dot(x, w).powi(2)).abs();
            }
        }
    }
    for rw in rw_cluster {
        total += penalty_value(rw, w);
    }
    total + penalty_value(rw_global, w)
}

/// Step-size policy for the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRule {
    pub eta0: f64,
    /// Geometric decay factor per step.
    pub rho: f64,
    /// When set, divide the subgradient by its norm so `eta` becomes a step
    /// *length* rather than a step *size*. Off by default: the plain rule is
    /// `w <- Proj(w - eta_k * g)`.
    pub normalize: bool,
}

impl StepRule {
    pub fn default_for(total_clients: usize) -> Self {
        StepRule {
            eta0: 1.0 / (total_clients as f64).sqrt(),
            rho: 0.998,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub steps: usize,
    pub step_rule: StepRule,
    /// Include the SCAD penalties and box projection in the baseline
    /// objective (the fair same-objective comparison).
    pub include_penalty: bool,
}

/// Centralized subgradient method on the full objective, with geometric
/// step decay and box projection each step. Cumulative update count is
/// `step * total_clients` so curves align with the federated solver on a
/// shared x-axis.
///
/// `w_init` must be nonzero: the origin is a stationary point of the
/// phase-retrieval loss (zero subgradient), so a zero start never moves.
pub fn subgradient_baseline(
    instance: &ProblemInstance,
    cfg: &BaselineConfig,
    rw_cluster: &[PenaltySpec],
    rw_global: &PenaltySpec,
    w_init: &[f64],
) -> Trace {
    let m = instance.dim();
    assert_eq!(w_init.len(), m, "init dimension");
    let total_clients = instance.total_clients();
    let box_dom = instance.box_domain();
    let mut w = project_box(w_init, box_dom);
    let mut eta = cfg.step_rule.eta0;
    let mut records = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        let mut g = vec![0.0; m];
        for cluster in &instance.clients {
            for client in cluster {
                for (x, &y) in client.xs.iter().zip(&client.ys) {
                    let u = dot(x, &w);
                    let s = (u * u - y).signum() * 2.0 * u;
                    for (gi, &xi) in g.iter_mut().zip(x) {
                        *gi += s * xi;
                    }
                }
            }
        }
        if cfg.include_penalty {
            for (i, gi) in g.iter_mut().enumerate() {
                let t = w[i].abs();
                let mut d = 0.0;
                for rw in rw_cluster {
                    d += rw.weight * scad_derivative(t, rw.lambda, rw.gamma);
                }
                d += rw_global.weight * scad_derivative(t, rw_global.lambda, rw_global.gamma);
                *gi += w[i].signum() * d;
            }
        }
        // Optionally treat eta as a step *length* (scale-free variant); the
        // default applies eta directly to the raw subgradient.
        let scale = if cfg.step_rule.normalize {
            let gn = sq_norm(&g).sqrt();
            if gn > 0.0 {
                eta / gn
            } else {
                0.0
            }
        } else {
            eta
        };
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= scale * gi;
        }
        w = project_box(&w, box_dom);
        eta *= cfg.step_rule.rho;

        records.push(TraceRecord {
            k0: step as u64,
            cumulative_client_updates: (step * total_clients) as u64,
            relative_error: relative_error(&w, &instance.w_true),
            max_client_gap: 0.0,
            max_cluster_gap: 0.0,
            max_primal_aux_gap: 0.0,
            objective: centralized_objective(instance, &w, rw_cluster, rw_global),
            node_updates: Vec::new(),
        });
    }
    Trace { records }
}

const INSTANCE_FORMAT: &str = "hfsad-instance";
const INSTANCE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    version: u32,
    instance: ProblemInstance,
}

/// Writes the instance as versioned JSON so failing trials can be replayed
/// bit-exactly.
pub fn save_instance(instance: &ProblemInstance, path: &Path) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    let envelope = InstanceFile {
        format: INSTANCE_FORMAT.to_string(),
        version: INSTANCE_VERSION,
        instance: instance.clone(),
    };
    serde_json::to_writer(BufWriter::new(file), &envelope)
        .map_err(|e| Error::Serialization(e.to_string()))
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance, Error> {
    let file = std::fs::File::open(path)?;
    let envelope: InstanceFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Serialization(e.to_string()))?;
    if envelope.format != INSTANCE_FORMAT {
        return Err(Error::Serialization(format!(
            "unknown instance format {:?}",
            envelope.format
        )));
    }
    if envelope.version != INSTANCE_VERSION {
        return Err(Error::Serialization(format!(
            "unsupported instance version {}",
            envelope.version
        )));
    }
    Ok(envelope.instance)
}
