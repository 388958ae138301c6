//! Topology, large-scale fading, spatially correlated small-scale channels,
//! and the MMSE channel-estimation error model.
//!
//! Path loss uses the COST-231 Hata extension (medium-city correction term
//! of 0 dB), which is the variant valid at the 2 GHz carrier and the 32 m /
//! 1.5 m antenna heights configured here; the classic Okumura-Hata range
//! stops at 1.5 GHz. Distances are floored at 10 m so co-located endpoints
//! keep a finite gain.
//!
//! Channel pairs are sampled so that the estimate and the estimation error
//! are statistically independent: `h_est ~ CN(0, beta R - Phi)`,
//! `e ~ CN(0, Phi)`, and `h_true = h_est - e`, which reproduces
//! `h_est = h_true + e` with the MMSE error covariance
//! `Phi = beta R - beta^2 R (beta R + (sigma^2/(tau p)) I)^(-1) R`.

use num_complex::Complex64;
use rand::Rng;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::fronthaul::{csi_quant_noise_cov, quantize_csi, select_channels, QuantMode, QuantizationPlan};
use crate::linalg::{cholesky, psd_sqrt, sample_cn, CMat, CVec};

/// Distance floor (m) for the path-loss evaluation.
pub const D_MIN_M: f64 = 10.0;

/// RRH and user placement with the induced large-scale gains.
#[derive(Debug, Clone)]
pub struct Topology {
    pub rrh_xy: Vec<[f64; 2]>,
    pub user_xy: Vec<[f64; 2]>,
    /// Linear large-scale gain per (RRH, user), indexed `beta[l][k]`.
    pub beta: Vec<Vec<f64>>,
}

/// COST-231 Hata path loss in dB at distance `d_m` meters, clamped below at
/// [`D_MIN_M`].
pub fn pathloss_db(d_m: f64, cfg: &NetworkConfig) -> f64 {
    let f = cfg.carrier_mhz;
    let hb = cfg.h_rrh_m;
    let hm = cfg.h_user_m;
    let d_km = d_m.max(D_MIN_M) / 1000.0;
    let a_hm = (1.1 * f.log10() - 0.7) * hm - (1.56 * f.log10() - 0.8);
    46.3 + 33.9 * f.log10() - 13.82 * hb.log10() - a_hm + (44.9 - 6.55 * hb.log10()) * d_km.log10()
}

/// Places RRHs and users i.i.d. uniformly in the configured square and fills
/// in the linear large-scale gains. Deterministic given the RNG state.
pub fn generate_topology<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Topology {
    let point = |rng: &mut R| {
        let x: f64 = rng.random::<f64>() * cfg.area_m;
        let y: f64 = rng.random::<f64>() * cfg.area_m;
        [x, y]
    };
    let rrh_xy: Vec<[f64; 2]> = (0..cfg.l).map(|_| point(rng)).collect();
    let user_xy: Vec<[f64; 2]> = (0..cfg.k).map(|_| point(rng)).collect();
    let beta = rrh_xy
        .iter()
        .map(|r| {
            user_xy
                .iter()
                .map(|u| {
                    let d = ((r[0] - u[0]).powi(2) + (r[1] - u[1]).powi(2)).sqrt();
                    10f64.powf(-pathloss_db(d, cfg) / 10.0)
                })
                .collect()
        })
        .collect();
    Topology { rrh_xy, user_xy, beta }
}

/// Exponential spatial correlation: `R[m][n] = corr_r^|m - n|`. Hermitian
/// PSD with unit diagonal for `0 <= corr_r < 1`.
pub fn spatial_covariance(n: usize, corr_r: f64) -> CMat {
    CMat::from_fn(n, n, |i, j| {
        Complex64::new(corr_r.powi((i as i32 - j as i32).abs()), 0.0)
    })
}

/// Covariance of the MMSE estimate, `beta R - Phi =
/// beta^2 R (beta R + c I)^(-1) R` with `c = sigma^2 / (tau p_ul)`.
pub fn estimate_cov(beta: f64, r: &CMat, est_noise: f64) -> CMat {
    let n = r.nrows();
    let m = r.scale(beta) + CMat::identity(n, n).scale(est_noise);
    let inv_times_r = m.lu().solve(r).expect("beta R + c I is positive definite for c > 0");
    (r * inv_times_r).scale(beta * beta)
}

/// MMSE estimation-error covariance `Phi = beta R - estimate_cov`.
pub fn mmse_error_cov(beta: f64, r: &CMat, est_noise: f64) -> CMat {
    let phi = r.scale(beta) - estimate_cov(beta, r, est_noise);
    // Symmetrize away the solve's roundoff so downstream PSD handling is clean.
    (&phi + phi.adjoint()).scale(0.5)
}

/// Samples one (true channel, MMSE estimate, error covariance) triple.
/// The estimation noise scale `sigma^2 / (tau p_ul)` must be positive.
pub fn sample_channel_and_estimate<R: Rng + ?Sized>(
    beta: f64,
    r: &CMat,
    cfg: &NetworkConfig,
    rng: &mut R,
) -> Result<(CVec, CVec, CMat)> {
    let est_noise = cfg.estimation_noise();
    if est_noise <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "estimation noise scale must be positive (got {est_noise})"
        )));
    }
    let phi = mmse_error_cov(beta, r, est_noise);
    let est_sqrt = psd_sqrt(&estimate_cov(beta, r, est_noise));
    let phi_sqrt = psd_sqrt(&phi);
    let h_est = sample_cn(&est_sqrt, rng);
    let e = sample_cn(&phi_sqrt, rng);
    let h_true = &h_est - &e;
    Ok((h_true, h_est, phi))
}

/// One fading realization of every (RRH, user) link together with the BBU's
/// degraded view of it: estimates, selections, quantized estimates, and the
/// error covariances feeding the optimization surrogate.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub l: usize,
    pub n: usize,
    pub k: usize,
    /// Spatial covariance per (RRH, user), indexed `l * k_total + k`.
    pub r: Vec<CMat>,
    pub h_true: Vec<CVec>,
    pub h_est: Vec<CVec>,
    /// Quantized estimates; the zero vector for unselected pairs.
    pub h_bar: Vec<CVec>,
    /// MMSE error covariance per pair.
    pub phi: Vec<CMat>,
    /// CSI quantization covariance (diagonal); zero for unselected pairs.
    pub q: Vec<CMat>,
    /// Selected user indices per RRH, descending estimated gain.
    pub selected: Vec<Vec<usize>>,
    /// Large-scale gains, `beta[l][k]`.
    pub beta: Vec<Vec<f64>>,
}

impl ChannelSet {
    #[inline]
    pub fn idx(&self, l: usize, k: usize) -> usize {
        l * self.k + k
    }

    pub fn is_selected(&self, l: usize, k: usize) -> bool {
        self.selected[l].contains(&k)
    }

    /// RRHs that forwarded user `k`'s channel (the set `L_k`).
    pub fn rrhs_knowing(&self, k: usize) -> Vec<usize> {
        (0..self.l).filter(|&l| self.is_selected(l, k)).collect()
    }

    /// Generates a full realization: sample channels and estimates for every
    /// pair, select the strongest `u` users per RRH, and quantize the
    /// selected estimates. Draw order is fixed, so equal RNG state gives an
    /// identical set.
    pub fn generate<R: Rng + ?Sized>(
        cfg: &NetworkConfig,
        topo: &Topology,
        plan: &QuantizationPlan,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let (l, n, k) = (cfg.l, cfg.n, cfg.k);
        let r_common = spatial_covariance(n, cfg.corr_r);
        let mut r = Vec::with_capacity(l * k);
        let mut h_true = Vec::with_capacity(l * k);
        let mut h_est = Vec::with_capacity(l * k);
        let mut phi = Vec::with_capacity(l * k);
        for li in 0..l {
            for ki in 0..k {
                let (ht, he, ph) =
                    sample_channel_and_estimate(topo.beta[li][ki], &r_common, cfg, rng)?;
                r.push(r_common.clone());
                h_true.push(ht);
                h_est.push(he);
                phi.push(ph);
            }
        }
        let mut h_bar = vec![CVec::zeros(n); l * k];
        let mut q = vec![CMat::zeros(n, n); l * k];
        let mut selected = Vec::with_capacity(l);
        for li in 0..l {
            let gains: Vec<f64> = (0..k).map(|ki| h_est[li * k + ki].norm_squared()).collect();
            let sel = select_channels(&gains, plan.u);
            for &ki in &sel {
                let idx = li * k + ki;
                let qm = csi_quant_noise_cov(
                    topo.beta[li][ki],
                    &r_common,
                    cfg.tau,
                    cfg.p_ul(),
                    cfg.sigma2(),
                    plan.b_csi,
                );
                h_bar[idx] = quantize_csi(&h_est[idx], &qm, rng, QuantMode::Statistical);
                q[idx] = qm;
            }
            selected.push(sel);
        }
        Ok(Self {
            l,
            n,
            k,
            r,
            h_true,
            h_est,
            h_bar,
            phi,
            q,
            selected,
            beta: topo.beta.clone(),
        })
    }
}

/// Verifies that `beta R + c I` admits a Cholesky factorization; used by
/// validation suites rather than the sampling path (which shares the LU).
pub fn check_estimation_system(beta: f64, r: &CMat, est_noise: f64) -> Result<()> {
    let n = r.nrows();
    let m = r.scale(beta) + CMat::identity(n, n).scale(est_noise);
    cholesky(&m, "beta R + c I").map(|_| ())
}

/// The BBU-visible slice of a [`ChannelSet`]: quantized estimates, error
/// statistics, selections, and long-term statistics, but never the true or
/// unquantized channels. Precoding strategies take this view, which makes
/// blindness to the true channel a property of the interface rather than a
/// convention.
#[derive(Debug, Clone, Copy)]
pub struct CsitView<'a> {
    pub l: usize,
    pub n: usize,
    pub k: usize,
    pub h_bar: &'a [CVec],
    pub phi: &'a [CMat],
    pub q: &'a [CMat],
    pub r: &'a [CMat],
    pub selected: &'a [Vec<usize>],
    pub beta: &'a [Vec<f64>],
}

impl ChannelSet {
    pub fn view(&self) -> CsitView<'_> {
        CsitView {
            l: self.l,
            n: self.n,
            k: self.k,
            h_bar: &self.h_bar,
            phi: &self.phi,
            q: &self.q,
            r: &self.r,
            selected: &self.selected,
            beta: &self.beta,
        }
    }
}

impl<'a> CsitView<'a> {
    #[inline]
    pub fn idx(&self, l: usize, k: usize) -> usize {
        l * self.k + k
    }

    pub fn is_selected(&self, l: usize, k: usize) -> bool {
        self.selected[l].contains(&k)
    }

    pub fn rrhs_knowing(&self, k: usize) -> Vec<usize> {
        (0..self.l).filter(|&l| self.is_selected(l, k)).collect()
    }

    /// User `k`'s quantized channel stacked over all RRHs (length L*N, zero
    /// blocks where the BBU has no CSI).
    pub fn stacked_h_bar(&self, k: usize) -> CVec {
        let mut out = CVec::zeros(self.l * self.n);
        for li in 0..self.l {
            if self.is_selected(li, k) {
                out.rows_mut(li * self.n, self.n)
                    .copy_from(&self.h_bar[self.idx(li, k)]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> NetworkConfig {
        NetworkConfig::default()
    }

    #[test]
    fn pathloss_hand_value_at_1km() {
        // 46.3 + 33.9 log10(2000) - 13.82 log10(32) - a(1.5) at d = 1 km.
        let pl = pathloss_db(1000.0, &cfg());
        assert!((pl - 137.3567).abs() < 1e-3, "pl={pl}");
    }

    #[test]
    fn pathloss_clamps_below_floor() {
        let c = cfg();
        assert_eq!(pathloss_db(D_MIN_M, &c), pathloss_db(D_MIN_M / 2.0, &c));
        assert_eq!(pathloss_db(D_MIN_M, &c), pathloss_db(0.0, &c));
    }

    #[test]
    fn pathloss_strictly_increasing_beyond_floor() {
        let c = cfg();
        let mut prev = pathloss_db(D_MIN_M, &c);
        for i in 1..50 {
            let d = D_MIN_M + 40.0 * i as f64;
            let pl = pathloss_db(d, &c);
            assert!(pl > prev);
            prev = pl;
        }
    }

    #[test]
    fn topology_is_deterministic_and_in_bounds() {
        let mut c = cfg();
        c.l = 30;
        c.k = 12;
        c.tau = 12;
        let t1 = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(5));
        let t2 = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(t1.rrh_xy, t2.rrh_xy);
        assert_eq!(t1.beta, t2.beta);
        assert_eq!(t1.rrh_xy.len(), 30);
        assert_eq!(t1.user_xy.len(), 12);
        for p in t1.rrh_xy.iter().chain(t1.user_xy.iter()) {
            assert!(p[0] >= 0.0 && p[0] <= c.area_m && p[1] >= 0.0 && p[1] <= c.area_m);
        }
        for row in &t1.beta {
            for &b in row {
                assert!(b > 0.0);
            }
        }
    }

    #[test]
    fn degenerate_area_hits_distance_floor() {
        let mut c = cfg();
        c.l = 1;
        c.k = 1;
        c.tau = 1;
        c.area_m = 0.0;
        let t = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(1));
        let expected = 10f64.powf(-pathloss_db(D_MIN_M, &c) / 10.0);
        assert!((t.beta[0][0] - expected).abs() < 1e-18 * expected.max(1.0));
    }

    #[test]
    fn spatial_covariance_cases() {
        let r0 = spatial_covariance(3, 0.0);
        assert_eq!(r0, CMat::identity(3, 3));
        let r = spatial_covariance(2, 0.5);
        assert!((r[(0, 1)].re - 0.5).abs() < 1e-15);
        assert!((r[(0, 0)].re - 1.0).abs() < 1e-15);
        // PSD at strong correlation.
        let big = spatial_covariance(8, 0.9);
        let ev = hermitian_eigenvalues(&big);
        assert!(ev[0] >= -1e-12, "min eig {}", ev[0]);
    }

    #[test]
    fn mmse_error_scalar_closed_form() {
        // N=1, beta=1, R=1, sigma^2/(tau p) = 0.1: Phi = 1 - 1/1.1
        let r = CMat::identity(1, 1);
        let phi = mmse_error_cov(1.0, &r, 0.1);
        assert!((phi[(0, 0)].re - (1.0 - 1.0 / 1.1)).abs() < 1e-12);
    }

    #[test]
    fn perfect_estimation_limit() {
        let r = spatial_covariance(3, 0.4);
        let phi = mmse_error_cov(2.0, &r, 1e-12);
        assert!(phi.norm() < 1e-9, "phi norm {}", phi.norm());
    }

    #[test]
    fn phi_below_beta_r_in_loewner_order() {
        for &corr in &[0.0, 0.5, 0.9] {
            let r = spatial_covariance(4, corr);
            let beta = 3.0;
            let phi = mmse_error_cov(beta, &r, 0.2);
            let gap = r.scale(beta) - &phi;
            let ev = hermitian_eigenvalues(&gap);
            assert!(ev[0] >= -1e-10, "min eig {}", ev[0]);
            let ev_phi = hermitian_eigenvalues(&phi);
            assert!(ev_phi[0] >= -1e-10);
        }
    }

    #[test]
    fn error_trace_decreases_with_better_pilots() {
        let r = spatial_covariance(4, 0.5);
        let mut prev = f64::INFINITY;
        for &noise in &[1.0, 0.3, 0.1, 0.03, 0.01] {
            let tr: f64 = mmse_error_cov(1.5, &r, noise).trace().re;
            assert!(tr < prev, "trace {tr} not below {prev}");
            prev = tr;
        }
    }

    #[test]
    fn sampled_estimate_plus_error_has_channel_covariance() {
        // Empirical covariance of h_true over many draws must match beta R.
        let mut c = cfg();
        c.tau = 8;
        let r = spatial_covariance(2, 0.6);
        let beta = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n_samples = 100_000;
        let mut acc = CMat::zeros(2, 2);
        for _ in 0..n_samples {
            let (h, _, _) = sample_channel_and_estimate(beta, &r, &c, &mut rng).unwrap();
            acc += &h * h.adjoint();
        }
        let emp = acc.unscale(n_samples as f64);
        let target = r.scale(beta);
        // Entrywise within 3 standard errors (std error of each entry is
        // roughly beta / sqrt(n)).
        let tol = 3.0 * beta / (n_samples as f64).sqrt() * 2.0;
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (emp[(i, j)] - target[(i, j)]).norm() < tol,
                    "entry ({i},{j}): emp {} target {}",
                    emp[(i, j)],
                    target[(i, j)]
                );
            }
        }
    }

    #[test]
    fn estimate_error_independence_decomposition() {
        // cov(h_est) + Phi = beta R within sampling tolerance.
        let mut c = cfg();
        c.tau = 8;
        let r = spatial_covariance(2, 0.5);
        let beta = 1.3;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n_samples = 100_000;
        let mut acc = CMat::zeros(2, 2);
        let mut phi_out = CMat::zeros(2, 2);
        for _ in 0..n_samples {
            let (_, he, phi) = sample_channel_and_estimate(beta, &r, &c, &mut rng).unwrap();
            acc += &he * he.adjoint();
            phi_out = phi;
        }
        let emp = acc.unscale(n_samples as f64) + phi_out;
        let target = r.scale(beta);
        let tol = 3.0 * beta / (n_samples as f64).sqrt() * 2.0;
        assert!((emp - target).norm() < 2.0 * tol);
    }

    #[test]
    fn channel_set_generation_selects_and_quantizes() {
        let mut c = cfg();
        c.l = 3;
        c.n = 2;
        c.k = 4;
        c.tau = 4;
        let plan = QuantizationPlan::with_allocation(&c, 2, 6, 12).unwrap();
        let topo = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(2));
        let cs = ChannelSet::generate(&c, &topo, &plan, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for l in 0..c.l {
            assert_eq!(cs.selected[l].len(), 2);
            // Descending gain order.
            let g0 = cs.h_est[cs.idx(l, cs.selected[l][0])].norm_squared();
            let g1 = cs.h_est[cs.idx(l, cs.selected[l][1])].norm_squared();
            assert!(g0 >= g1);
            for k in 0..c.k {
                let idx = cs.idx(l, k);
                if cs.is_selected(l, k) {
                    assert!(cs.h_bar[idx].norm() > 0.0);
                    assert!(cs.q[idx].trace().re > 0.0);
                } else {
                    assert_eq!(cs.h_bar[idx].norm(), 0.0);
                    assert_eq!(cs.q[idx].norm(), 0.0);
                }
            }
        }
    }
}
