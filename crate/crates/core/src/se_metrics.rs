//! Spectral-efficiency metrics: the effective-noise budget behind the
//! optimization surrogate, the per-user lower bound the BBU can evaluate
//! from its degraded CSI, the true SINR evaluated on the actual channels,
//! and the Monte Carlo ergodic average over topology drops and fading
//! realizations.
//!
//! The surrogate treats the aggregate of estimation error, CSI quantization,
//! forwarded data-quantization noise, and thermal noise as one Gaussian with
//! matched variance. Links never forwarded to the BBU contribute neither
//! signal nor statistics to the surrogate, but the true SINR still counts
//! their interference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::fronthaul::{data_quant_noise_cov, QuantizationPlan};
use crate::linalg::CMat;
use crate::net_model::{generate_topology, ChannelSet, CsitView, Topology};
use crate::spca_core::StackedPrecoder;

/// Decomposition of one user's effective noise variance.
#[derive(Debug, Clone, Copy)]
pub struct NoiseBudget {
    pub sigma_tilde_sq: f64,
    pub estimation: f64,
    pub csi_quant: f64,
    pub data_quant: f64,
    pub thermal: f64,
}

fn check_dims(f: &StackedPrecoder, l: usize, n: usize, k: usize) -> Result<()> {
    if (f.l, f.n, f.k) != (l, n, k) {
        return Err(Error::DimensionMismatch {
            context: "precoder vs channel dimensions",
            expected: l * n * k,
            got: f.f.len(),
        });
    }
    Ok(())
}

/// Per-RRH data-quantization noise diagonals `V_l` for a given precoder.
fn v_diagonals(f: &StackedPrecoder, eta: f64, p: f64) -> Vec<nalgebra::DVector<f64>> {
    (0..f.l)
        .map(|li| {
            let mut block = CMat::zeros(f.n, f.k);
            for ki in 0..f.k {
                block.set_column(ki, &f.block(li, ki));
            }
            data_quant_noise_cov(&block, eta, p)
        })
        .collect()
}

/// Effective noise variance of user `k`:
/// `P sum_l sum_i f_{l,i}^H (Phi + Q) f_{l,i} + sum_l beta Tr(R V_l) + sigma^2`,
/// with the error statistics zeroed on links the BBU never received.
pub fn effective_noise_var(
    f: &StackedPrecoder,
    view: &CsitView,
    plan: &QuantizationPlan,
    cfg: &NetworkConfig,
    k: usize,
) -> Result<NoiseBudget> {
    check_dims(f, view.l, view.n, view.k)?;
    let p = cfg.p();
    let mut estimation = 0.0;
    let mut csi_quant = 0.0;
    for li in 0..view.l {
        if !view.is_selected(li, k) {
            continue;
        }
        let idx = view.idx(li, k);
        for i in 0..view.k {
            let fi = f.block(li, i);
            estimation += p * (fi.adjoint() * &view.phi[idx] * &fi)[(0, 0)].re;
            csi_quant += p * (fi.adjoint() * &view.q[idx] * &fi)[(0, 0)].re;
        }
    }
    let v = v_diagonals(f, plan.eta, p);
    let mut data_quant = 0.0;
    for li in 0..view.l {
        let idx = view.idx(li, k);
        for ni in 0..view.n {
            data_quant += view.beta[li][k] * view.r[idx][(ni, ni)].re * v[li][ni];
        }
    }
    let thermal = cfg.sigma2();
    Ok(NoiseBudget {
        sigma_tilde_sq: estimation + csi_quant + data_quant + thermal,
        estimation,
        csi_quant,
        data_quant,
        thermal,
    })
}

/// Per-user spectral-efficiency lower bound
/// `log2(1 + |hbar_k^H f_k|^2 / (sum_{i!=k} |hbar_k^H f_i|^2 + sigma_tilde^2/P))`
/// and its sum, evaluated purely from the BBU-visible view.
pub fn se_lower_bound(
    f: &StackedPrecoder,
    view: &CsitView,
    plan: &QuantizationPlan,
    cfg: &NetworkConfig,
) -> Result<(Vec<f64>, f64)> {
    check_dims(f, view.l, view.n, view.k)?;
    let p = cfg.p();
    let ln = view.l * view.n;
    let mut rates = Vec::with_capacity(view.k);
    for ki in 0..view.k {
        let hb = view.stacked_h_bar(ki);
        let mut signal = 0.0;
        let mut interference = 0.0;
        for i in 0..view.k {
            let fi = f.f.rows(i * ln, ln);
            let s = hb.dotc(&fi.clone_owned()).norm_sqr();
            if i == ki {
                signal = s;
            } else {
                interference += s;
            }
        }
        let budget = effective_noise_var(f, view, plan, cfg, ki)?;
        rates.push((1.0 + signal / (interference + budget.sigma_tilde_sq / p)).log2());
    }
    let sum = rates.iter().sum();
    Ok((rates, sum))
}

/// True per-user SINR and spectral efficiency, using the actual channels and
/// counting the forwarded quantization noise through every link:
/// `SINR_k = |sum_l h_{l,k}^H f_{l,k}|^2 / (sum_{i!=k} |...|^2 +
/// sum_l h^H V_l h / P + sigma^2 / P)`.
pub fn sinr_true(
    channels: &ChannelSet,
    f: &StackedPrecoder,
    plan: &QuantizationPlan,
    cfg: &NetworkConfig,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    check_dims(f, channels.l, channels.n, channels.k)?;
    let p = cfg.p();
    let sigma2 = cfg.sigma2();
    let v = v_diagonals(f, plan.eta, p);
    let mut sinrs = Vec::with_capacity(channels.k);
    let mut rates = Vec::with_capacity(channels.k);
    for ki in 0..channels.k {
        let mut signal = num_complex::Complex64::new(0.0, 0.0);
        let mut cross = vec![num_complex::Complex64::new(0.0, 0.0); channels.k];
        let mut forwarded = 0.0;
        for li in 0..channels.l {
            let h = &channels.h_true[channels.idx(li, ki)];
            for i in 0..channels.k {
                let c = h.dotc(&f.block(li, i));
                cross[i] += c;
            }
            for ni in 0..channels.n {
                forwarded += h[ni].norm_sqr() * v[li][ni];
            }
        }
        signal += cross[ki];
        let interference: f64 = (0..channels.k)
            .filter(|&i| i != ki)
            .map(|i| cross[i].norm_sqr())
            .sum();
        let sinr = signal.norm_sqr() / (interference + forwarded / p + sigma2 / p);
        sinrs.push(sinr);
        rates.push((1.0 + sinr).log2());
    }
    let sum = rates.iter().sum();
    Ok((sinrs, rates, sum))
}

/// A precoding strategy: sees only the BBU-visible channel view and the
/// plan, never the true channels.
pub trait PrecoderStrategy: Sync {
    fn name(&self) -> &'static str;
    fn precode(
        &self,
        view: &CsitView,
        plan: &QuantizationPlan,
        cfg: &NetworkConfig,
    ) -> Result<StackedPrecoder>;
}

/// One Monte Carlo realization: a topology drop plus a fading draw on it.
#[derive(Debug, Clone)]
pub struct Realization {
    pub topology: Topology,
    pub channels: ChannelSet,
}

/// RNG substream for a topology drop.
pub fn topology_rng(seed: u64, drop: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((drop as u64) << 32) | 0xFFFF_FFFF);
    rng
}

/// RNG substream for a fading realization within a drop.
pub fn fade_rng(seed: u64, drop: usize, fade: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((drop as u64) << 32) | fade as u64);
    rng
}

impl Realization {
    /// Deterministically generates drop `drop`, fade `fade` under the
    /// config's master seed via counter-split RNG substreams.
    pub fn generate(
        cfg: &NetworkConfig,
        plan: &QuantizationPlan,
        drop: usize,
        fade: usize,
    ) -> Result<Self> {
        let topology = generate_topology(cfg, &mut topology_rng(cfg.seed, drop));
        let channels = ChannelSet::generate(cfg, &topology, plan, &mut fade_rng(cfg.seed, drop, fade))?;
        Ok(Self { topology, channels })
    }
}

/// Ergodic sum-SE estimate with its uncertainty.
#[derive(Debug, Clone)]
pub struct ErgodicSe {
    /// Mean of the overhead-discounted true sum spectral efficiency.
    pub mean: f64,
    /// Standard error of the mean over realizations.
    pub std_err: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub prefactor: f64,
}

/// Averages the true-SINR sum SE of `strategy` over `n_drops x n_fades`
/// realizations, scaled by the training-overhead prefactor. Realizations run
/// in parallel on deterministic RNG substreams; strategy failures are
/// counted and skipped.
pub fn ergodic_se(
    cfg: &NetworkConfig,
    plan: &QuantizationPlan,
    strategy: &dyn PrecoderStrategy,
    n_drops: usize,
    n_fades: usize,
) -> Result<ErgodicSe> {
    if n_drops == 0 || n_fades == 0 {
        return Err(Error::InvalidConfig("n_drops and n_fades must be >= 1".into()));
    }
    let prefactor = cfg.overhead_prefactor();
    let tasks: Vec<(usize, usize)> = (0..n_drops)
        .flat_map(|d| (0..n_fades).map(move |f| (d, f)))
        .collect();
    let samples: Vec<Option<f64>> = tasks
        .par_iter()
        .map(|&(drop, fade)| {
            let real = match Realization::generate(cfg, plan, drop, fade) {
                Ok(r) => r,
                Err(_) => return None,
            };
            let view = real.channels.view();
            let f = match strategy.precode(&view, plan, cfg) {
                Ok(f) => f,
                Err(_) => return None,
            };
            match sinr_true(&real.channels, &f, plan, cfg) {
                Ok((_, _, sum)) => Some(prefactor * sum),
                Err(_) => None,
            }
        })
        .collect();
    let ok: Vec<f64> = samples.iter().flatten().cloned().collect();
    let n_ok = ok.len();
    let n_failed = samples.len() - n_ok;
    if n_ok == 0 {
        return Err(Error::InvalidConfig("every realization failed".into()));
    }
    let mean = ok.iter().sum::<f64>() / n_ok as f64;
    let var = if n_ok > 1 {
        ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_ok as f64 - 1.0)
    } else {
        0.0
    };
    Ok(ErgodicSe {
        mean,
        std_err: (var / n_ok as f64).sqrt(),
        n_ok,
        n_failed,
        prefactor,
    })
}
