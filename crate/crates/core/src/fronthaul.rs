//! Fronthaul compression models: CSI selection and quantization on the
//! uplink, precoded-signal quantization on the downlink, and the
//! capacity-driven bit-allocation formulas tying both to the per-RRH
//! fronthaul budget `C` (bits per channel use).
//!
//! Quantization noise follows the Gaussian rate-distortion model: a `b`-bit
//! uniform scalar quantizer per real component contributes noise with
//! variance `(pi*sqrt(3)/2) * 2^(-2b)` times the input variance. The
//! statistical model is what the optimization pipeline consumes; an actual
//! scalar quantizer is provided purely to calibrate that model.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::linalg::{sample_cn, CMat, CVec};

/// Distortion constant of the optimal scalar quantizer for Gaussian inputs.
pub const QUANT_COEFF: f64 = 2.720699046351327; // pi * sqrt(3) / 2

/// `log2(2^x - 1)` without overflow for large `x`.
fn log2_exp2_minus_one(x: f64) -> f64 {
    if x > 64.0 {
        // 2^x - 1 == 2^x to double precision.
        x
    } else {
        (x.exp2() - 1.0).log2()
    }
}

/// Quantization-noise scale `eta(b) = (pi*sqrt(3)/2) * 2^(-2b)`.
pub fn eta_of(bits: u32) -> f64 {
    QUANT_COEFF * (-2.0 * bits as f64).exp2()
}

/// Largest per-component CSI bit depth whose feedback rate fits in `c`
/// bits/use when `u` users' `n`-antenna channels are shared.
pub fn plan_csi_bits(c: f64, u: usize, n: usize) -> Result<u32> {
    let per_coeff = c / (u as f64 * n as f64);
    let b = (0.5 * (QUANT_COEFF.log2() + log2_exp2_minus_one(per_coeff))).floor();
    if b < 1.0 {
        return Err(Error::CapacityTooSmall { capacity: c, context: "csi bit allocation" });
    }
    Ok(b as u32)
}

/// Largest user count whose CSI fits in `c` bits/use at fixed bit depth `b`,
/// clamped to the `k` users present.
pub fn plan_csi_users(c: f64, b: u32, n: usize, k: usize) -> Result<usize> {
    let rate_per_user = n as f64 * (1.0 + (2.0 * b as f64).exp2() / QUANT_COEFF).log2();
    let u = (c / rate_per_user).floor() as usize;
    let u = u.min(k);
    if u == 0 {
        return Err(Error::CapacityTooSmall { capacity: c, context: "csi user selection" });
    }
    Ok(u)
}

/// Largest data-path bit depth whose forwarding rate fits in `c` bits/use.
pub fn plan_data_bits(c: f64, n: usize) -> Result<u32> {
    let per_coeff = c / n as f64;
    let b = (0.5 * (QUANT_COEFF.log2() + log2_exp2_minus_one(per_coeff))).floor();
    if b < 1.0 {
        return Err(Error::CapacityTooSmall { capacity: c, context: "data bit allocation" });
    }
    Ok(b as u32)
}

/// Fronthaul rates (bits/use) implied by a `(u, b)` CSI allocation and a
/// `b_bar` data allocation: `rate_csi = u*n*log2(1 + (2/(pi*sqrt(3)))*2^(2b))`
/// and `rate_data = n*log2(1 + 1/eta(b_bar))`.
pub fn fronthaul_rates(u: usize, n: usize, b: u32, b_bar: u32) -> (f64, f64) {
    let rate_csi = u as f64 * n as f64 * (1.0 + (2.0 * b as f64).exp2() / QUANT_COEFF).log2();
    let rate_data = n as f64 * (1.0 + eta_of(b_bar).recip()).log2();
    (rate_csi, rate_data)
}

/// Indices of the `u` largest gains, descending, ties broken by lower index.
pub fn select_channels(gains: &[f64], u: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    order.truncate(u.min(gains.len()));
    order
}

/// Diagonal covariance of the CSI quantization noise for one (RRH, user)
/// pair: `(pi*sqrt(3)/2) * 2^(-2b)` times the diagonal of the estimate
/// covariance `beta^2 R (beta R + (sigma^2/(tau p)) I)^(-1) R`.
pub fn csi_quant_noise_cov(
    beta: f64,
    r: &CMat,
    tau: usize,
    p_ul: f64,
    sigma2: f64,
    b: u32,
) -> CMat {
    let est_cov = crate::net_model::estimate_cov(beta, r, sigma2 / (tau as f64 * p_ul));
    let scale = eta_of(b);
    let n = r.nrows();
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(scale * est_cov[(i, i)].re, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// How `quantize_csi` degrades the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantMode {
    /// Additive Gaussian noise with the model covariance (default everywhere).
    Statistical,
    /// Per-component scalar quantizer on a uniform lattice whose step is
    /// calibrated to the component's standard deviation so that the granular
    /// error matches the statistical model. Points beyond the nominal bit
    /// range are not clamped; the lattice exists to validate the model's
    /// variance scale law, not to emulate saturation.
    Uniform,
}

/// Applies CSI quantization to an estimate given the model covariance `q`
/// (diagonal). In `Uniform` mode the per-real-component step is
/// `sqrt(6 * q_nn)`, which makes the lattice's granular error variance equal
/// the model variance `q_nn` per complex component.
pub fn quantize_csi<R: Rng + ?Sized>(h_est: &CVec, q: &CMat, rng: &mut R, mode: QuantMode) -> CVec {
    match mode {
        QuantMode::Statistical => h_est + sample_cn(&q.map(|z| Complex64::new(z.re.max(0.0).sqrt(), 0.0)), rng),
        QuantMode::Uniform => CVec::from_fn(h_est.len(), |i, _| {
            let step = (6.0 * q[(i, i)].re).sqrt();
            if step == 0.0 {
                h_est[i]
            } else {
                let re = (h_est[i].re / step).round() * step;
                let im = (h_est[i].im / step).round() * step;
                Complex64::new(re, im)
            }
        }),
    }
}

/// Diagonal of the precoded-signal quantization covariance
/// `V_l = P * eta * diag(sum_k |f_{l,k}^1|^2, ..., sum_k |f_{l,k}^N|^2)`
/// for one RRH's `N x K` precoder block.
pub fn data_quant_noise_cov(f_block: &CMat, eta: f64, p: f64) -> DVector<f64> {
    DVector::from_fn(f_block.nrows(), |n, _| {
        p * eta * f_block.row(n).iter().map(|z| z.norm_sqr()).sum::<f64>()
    })
}

/// Per-RRH fronthaul allocation: user count `u`, CSI bit depth `b_csi`,
/// data bit depth `b_data`, the induced noise scale `eta`, and the realized
/// rates. Capacities are uniform across RRHs, so one plan serves all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationPlan {
    pub u: usize,
    pub b_csi: u32,
    pub b_data: u32,
    pub eta: f64,
    pub rate_csi: f64,
    pub rate_data: f64,
}

impl QuantizationPlan {
    /// Derives the allocation from the configured capacity: the widest CSI
    /// sharing (largest `u <= K`) that still leaves at least one bit per
    /// coefficient, and the largest feasible data bit depth. Figure-style
    /// parameter tuples go through [`QuantizationPlan::with_allocation`]
    /// instead.
    pub fn from_capacity(cfg: &NetworkConfig) -> Result<Self> {
        let c = cfg.c_bits_per_use;
        let b_data = plan_data_bits(c, cfg.n)?;
        let mut choice = None;
        for u in (1..=cfg.k).rev() {
            if let Ok(b) = plan_csi_bits(c, u, cfg.n) {
                choice = Some((u, b));
                break;
            }
        }
        let (u, b_csi) = choice.ok_or(Error::CapacityTooSmall {
            capacity: c,
            context: "no feasible (u, b) pair",
        })?;
        Ok(Self::with_allocation(cfg, u, b_csi, b_data)?)
    }

    /// Builds a plan from an explicit `(u, b_csi, b_data)` tuple. The rates
    /// are recorded as realized; callers overriding the capacity-derived plan
    /// are responsible for the tuple's feasibility.
    pub fn with_allocation(cfg: &NetworkConfig, u: usize, b_csi: u32, b_data: u32) -> Result<Self> {
        if u == 0 || u > cfg.k {
            return Err(Error::InvalidConfig(format!("plan u={u} out of range 1..={}", cfg.k)));
        }
        if b_csi < 1 || b_data < 1 {
            return Err(Error::InvalidConfig("plan bit depths must be >= 1".into()));
        }
        let (rate_csi, rate_data) = fronthaul_rates(u, cfg.n, b_csi, b_data);
        Ok(Self { u, b_csi, b_data, eta: eta_of(b_data), rate_csi, rate_data })
    }

    /// Per-RRH power budget `(1 + eta)^(-1)` under unit-normalized symbols.
    pub fn budget(&self) -> f64 {
        (1.0 + self.eta).recip()
    }

    /// Sum of all `l` per-RRH budgets; the pinned norm of the in-loop
    /// precoder normalization.
    pub fn budget_sum(&self, l: usize) -> f64 {
        l as f64 * self.budget()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_cn;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn csi_bits_match_reference_tuple() {
        // 3 Gbps over 10 MHz -> 300 bits/use; 6 users, 4 antennas -> 6 bits.
        assert_eq!(plan_csi_bits(300.0, 6, 4).unwrap(), 6);
    }

    #[test]
    fn csi_bits_asymptote() {
        // For large C/(U N) the bit depth approaches C/(2 U N).
        let b = plan_csi_bits(4000.0, 1, 1).unwrap();
        assert!((b as f64 - 4000.0 / 2.0).abs() <= 1.0, "b={b}");
    }

    #[test]
    fn csi_bits_capacity_too_small() {
        assert!(matches!(
            plan_csi_bits(10.0, 6, 4),
            Err(Error::CapacityTooSmall { .. })
        ));
    }

    #[test]
    fn csi_users_match_hand_value() {
        // denominator: 4*log2(1 + (2/(pi sqrt 3)) * 2^12) = 42.229 -> floor(300/42.229) = 7
        assert_eq!(plan_csi_users(300.0, 6, 4, 12).unwrap(), 7);
        assert_eq!(plan_csi_users(300.0, 6, 4, 1).unwrap(), 1);
        assert!(plan_csi_users(300.0, 40, 4, 12).is_err());
    }

    #[test]
    fn data_bits_match_hand_values() {
        assert_eq!(plan_data_bits(300.0, 4).unwrap(), 38);
        // C/N = 2: 0.5*log2(2.7207*3) = 1.51 -> 1
        assert_eq!(plan_data_bits(8.0, 4).unwrap(), 1);
        // Doubling N at fixed C cannot increase the depth.
        assert!(plan_data_bits(300.0, 8).unwrap() < plan_data_bits(300.0, 4).unwrap());
    }

    #[test]
    fn selection_orders_and_breaks_ties() {
        assert_eq!(select_channels(&[3.0, 1.0, 2.0], 2), vec![0, 2]);
        assert_eq!(select_channels(&[1.0, 1.0, 1.0], 2), vec![0, 1]);
        let all = select_channels(&[0.5, 2.0, 1.0], 3);
        assert_eq!(all, vec![1, 2, 0]);
    }

    #[test]
    fn quant_noise_scalar_case() {
        // N=1, beta=1, R=1, sigma^2/(tau p)=0.1, B=6 -> 2.7207*2^-12*0.9091
        let r = CMat::identity(1, 1);
        let q = csi_quant_noise_cov(1.0, &r, 10, 1.0, 1.0, 6);
        assert!((q[(0, 0)].re - 6.0385e-4).abs() < 1e-7, "q={}", q[(0, 0)].re);
    }

    #[test]
    fn quant_noise_quadruples_per_lost_bit() {
        let r = CMat::identity(2, 2);
        let q6 = csi_quant_noise_cov(2.0, &r, 10, 1.0, 1.0, 6);
        let q5 = csi_quant_noise_cov(2.0, &r, 10, 1.0, 1.0, 5);
        for i in 0..2 {
            assert!((q5[(i, i)].re / q6[(i, i)].re - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn statistical_quantizer_matches_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n_samples = 100_000;
        let q_var = 0.03;
        let q = CMat::identity(1, 1).scale(q_var);
        let h = CVec::zeros(1);
        let mut acc = 0.0;
        for _ in 0..n_samples {
            let hb = quantize_csi(&h, &q, &mut rng, QuantMode::Statistical);
            acc += hb[0].norm_sqr();
        }
        let emp = acc / n_samples as f64;
        assert!((emp / q_var - 1.0).abs() < 0.05, "ratio={}", emp / q_var);
    }

    #[test]
    fn uniform_quantizer_calibrates_to_model() {
        // The empirical error variance of the lattice quantizer must sit
        // within 15% of the statistical model at B = 6 (and B = 8).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &b in &[6u32, 8] {
            let s = 1.7; // complex input variance
            let model = eta_of(b) * s;
            let q = CMat::identity(1, 1).scale(model);
            let n_samples = 100_000;
            let mut acc = 0.0;
            for _ in 0..n_samples {
                let h = standard_cn(1, &mut rng).scale(s.sqrt());
                let hb = quantize_csi(&h, &q, &mut rng, QuantMode::Uniform);
                acc += (hb[0] - h[0]).norm_sqr();
            }
            let emp = acc / n_samples as f64;
            assert!((emp / model - 1.0).abs() < 0.15, "B={b}: ratio={}", emp / model);
        }
    }

    #[test]
    fn zero_covariance_is_identity_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = standard_cn(4, &mut rng);
        let q = CMat::zeros(4, 4);
        let hb = quantize_csi(&h, &q, &mut rng, QuantMode::Statistical);
        assert_eq!(h, hb);
        let hb = quantize_csi(&h, &q, &mut rng, QuantMode::Uniform);
        assert_eq!(h, hb);
    }

    #[test]
    fn data_quant_cov_cases() {
        // N=1, K=2, |f1|^2=0.3, |f2|^2=0.2, P=1, eta=0.01 -> 0.005
        let f = CMat::from_row_slice(1, 2, &[
            Complex64::new(0.3f64.sqrt(), 0.0),
            Complex64::new(0.2f64.sqrt(), 0.0),
        ]);
        let v = data_quant_noise_cov(&f, 0.01, 1.0);
        assert!((v[0] - 0.005).abs() < 1e-15);

        let zero = CMat::zeros(3, 2);
        assert_eq!(data_quant_noise_cov(&zero, 0.3, 5.0), DVector::zeros(3));

        // trace(V) = P * eta * ||F||_F^2
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = CMat::from_fn(4, 3, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let v = data_quant_noise_cov(&f, 0.2, 3.0);
        assert!((v.sum() - 3.0 * 0.2 * f.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn rates_match_high_rate_approximation() {
        let (rate_csi, _) = fronthaul_rates(6, 4, 6, 12);
        assert!((rate_csi - 253.37).abs() < 0.01, "rate={rate_csi}");
        let approx = 6.0 * 4.0 * (2.0 * 6.0 - 1.444);
        assert!((rate_csi - approx).abs() < 0.1);
        let (low, _) = fronthaul_rates(6, 4, 0, 12);
        assert!((low - 0.45163 * 24.0).abs() < 0.01);
    }

    #[test]
    fn planned_rates_fit_capacity() {
        let mut cfg = NetworkConfig::default();
        for &c in &[20.0, 50.0, 100.0, 300.0, 1000.0] {
            cfg.c_bits_per_use = c;
            cfg.k = 12;
            cfg.n = 4;
            if let Ok(plan) = QuantizationPlan::from_capacity(&cfg) {
                assert!(plan.rate_csi <= c + 1e-9, "C={c}: rate_csi={}", plan.rate_csi);
                assert!(plan.rate_data <= c + 1e-9, "C={c}: rate_data={}", plan.rate_data);
            }
            // The standalone data plan is feasible by construction.
            if let Ok(b_bar) = plan_data_bits(c, cfg.n) {
                let (_, rate_data) = fronthaul_rates(1, cfg.n, 1, b_bar);
                assert!(rate_data <= c + 1e-9);
            }
        }
    }

    #[test]
    fn plan_budget_sums() {
        let cfg = NetworkConfig::default();
        let plan = QuantizationPlan::with_allocation(&cfg, 3, 6, 12).unwrap();
        let budget = (1.0 + eta_of(12)).recip();
        assert!((plan.budget() - budget).abs() < 1e-15);
        assert!((plan.budget_sum(4) - 4.0 * budget).abs() < 1e-12);
    }
}
