//! Scenario configuration.
//!
//! All powers are stored in dBm as configured and converted to linear watts
//! on access, so `sigma2`, `p`, and `p_ul` share one unit system. The
//! fronthaul capacity is normalized to bits per channel use; a bit-per-second
//! budget divided by the bandwidth gives the value to configure here
//! (3 Gbps over 10 MHz -> 300 bits/use).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Number of RRHs.
    pub l: usize,
    /// Antennas per RRH.
    pub n: usize,
    /// Single-antenna users.
    pub k: usize,
    /// Side length of the square deployment area (m).
    pub area_m: f64,
    /// Per-RRH transmit power (dBm).
    pub p_dbm: f64,
    /// Noise power over the full bandwidth (dBm).
    pub noise_dbm: f64,
    /// System bandwidth (Hz).
    pub bandwidth_hz: f64,
    /// Carrier frequency (MHz).
    pub carrier_mhz: f64,
    /// RRH antenna height (m).
    pub h_rrh_m: f64,
    /// User antenna height (m).
    pub h_user_m: f64,
    /// Uplink pilot length (symbols); must be >= k for orthogonal pilots.
    pub tau: usize,
    /// Uplink pilot power (dBm).
    pub p_ul_dbm: f64,
    /// Uplink training length (symbols) for the overhead prefactor.
    pub tau_u: f64,
    /// Downlink training length (symbols) for the overhead prefactor.
    pub tau_d: f64,
    /// Coherence block length (symbols).
    pub tau_c: f64,
    /// Per-RRH fronthaul capacity (bits per channel use).
    pub c_bits_per_use: f64,
    /// Maximum number of active RRHs.
    pub s: usize,
    /// Sparsity relaxation parameter (epsilon in the group-sparsity surrogate).
    pub epsilon_sparse: f64,
    /// Exponential spatial correlation coefficient, 0 <= corr_r < 1.
    pub corr_r: f64,
    /// Master RNG seed.
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            l: 4,
            n: 2,
            k: 3,
            area_m: 2000.0,
            p_dbm: 40.0,
            noise_dbm: -113.0,
            bandwidth_hz: 10.0e6,
            carrier_mhz: 2000.0,
            h_rrh_m: 32.0,
            h_user_m: 1.5,
            tau: 3,
            p_ul_dbm: 23.0,
            tau_u: 0.0,
            tau_d: 0.0,
            tau_c: 200.0,
            c_bits_per_use: 100.0,
            s: 2,
            epsilon_sparse: 1e-2,
            corr_r: 0.5,
            seed: 1,
        }
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl NetworkConfig {
    /// The dense-deployment scenario used by the larger sweeps:
    /// 30 RRHs with 4 antennas each serving 12 users, 300 bits/use fronthaul.
    pub fn dense30() -> Self {
        Self {
            l: 30,
            n: 4,
            k: 12,
            tau: 12,
            c_bits_per_use: 300.0,
            s: 30,
            ..Self::default()
        }
    }

    /// Per-RRH transmit power in watts.
    pub fn p(&self) -> f64 {
        dbm_to_watts(self.p_dbm)
    }

    /// Noise power in watts over the full bandwidth.
    pub fn sigma2(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Uplink pilot power in watts.
    pub fn p_ul(&self) -> f64 {
        dbm_to_watts(self.p_ul_dbm)
    }

    /// Estimation-noise scale sigma^2 / (tau * p_ul).
    pub fn estimation_noise(&self) -> f64 {
        self.sigma2() / (self.tau as f64 * self.p_ul())
    }

    /// Training overhead prefactor 1 - (tau_u + tau_d) / tau_c.
    pub fn overhead_prefactor(&self) -> f64 {
        1.0 - (self.tau_u + self.tau_d) / self.tau_c
    }

    /// Total precoder dimension L*N*K.
    pub fn dim(&self) -> usize {
        self.l * self.n * self.k
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.l < 1 || self.n < 1 || self.k < 1 {
            return fail(format!("L, N, K must all be >= 1 (got {}, {}, {})", self.l, self.n, self.k));
        }
        if self.s < 1 || self.s > self.l {
            return fail(format!("S must lie in [1, L] (got S={}, L={})", self.s, self.l));
        }
        if !(0.0..1.0).contains(&self.corr_r) {
            return fail(format!("corr_r must lie in [0, 1) (got {})", self.corr_r));
        }
        if self.tau < self.k {
            return fail(format!("tau must be >= K for orthogonal pilots (got tau={}, K={})", self.tau, self.k));
        }
        if self.epsilon_sparse <= 0.0 {
            return fail(format!("epsilon_sparse must be > 0 (got {})", self.epsilon_sparse));
        }
        if self.area_m < 0.0 {
            return fail(format!("area_m must be >= 0 (got {})", self.area_m));
        }
        if self.c_bits_per_use <= 0.0 {
            return fail(format!("c_bits_per_use must be > 0 (got {})", self.c_bits_per_use));
        }
        if self.bandwidth_hz <= 0.0 || self.carrier_mhz <= 0.0 {
            return fail("bandwidth_hz and carrier_mhz must be > 0".to_string());
        }
        if self.tau_c <= 0.0 || self.tau_u < 0.0 || self.tau_d < 0.0 {
            return fail("training lengths must be nonnegative with tau_c > 0".to_string());
        }
        if self.tau_u + self.tau_d >= self.tau_c {
            return fail("tau_u + tau_d must be < tau_c".to_string());
        }
        Ok(())
    }

    /// Sets one configuration key from its textual value. Returns false when
    /// the key is not a `NetworkConfig` key (the caller may own more keys).
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<bool> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::InvalidConfig(format!("cannot parse value '{value}' for key '{key}'"))
            })
        }
        match key {
            "L" => self.l = parse(key, value)?,
            "N" => self.n = parse(key, value)?,
            "K" => self.k = parse(key, value)?,
            "area_m" => self.area_m = parse(key, value)?,
            "P_dbm" => self.p_dbm = parse(key, value)?,
            "noise_dbm" => self.noise_dbm = parse(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = parse(key, value)?,
            "carrier_mhz" => self.carrier_mhz = parse(key, value)?,
            "h_rrh_m" => self.h_rrh_m = parse(key, value)?,
            "h_user_m" => self.h_user_m = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "p_ul_dbm" => self.p_ul_dbm = parse(key, value)?,
            "tau_u" => self.tau_u = parse(key, value)?,
            "tau_d" => self.tau_d = parse(key, value)?,
            "tau_c" => self.tau_c = parse(key, value)?,
            "C_bits_per_use" => self.c_bits_per_use = parse(key, value)?,
            "S" => self.s = parse(key, value)?,
            "epsilon_sparse" => self.epsilon_sparse = parse(key, value)?,
            "corr_r" => self.corr_r = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// All recognized keys with their current values, in a fixed order.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("L", self.l.to_string()),
            ("N", self.n.to_string()),
            ("K", self.k.to_string()),
            ("area_m", self.area_m.to_string()),
            ("P_dbm", self.p_dbm.to_string()),
            ("noise_dbm", self.noise_dbm.to_string()),
            ("bandwidth_hz", self.bandwidth_hz.to_string()),
            ("carrier_mhz", self.carrier_mhz.to_string()),
            ("h_rrh_m", self.h_rrh_m.to_string()),
            ("h_user_m", self.h_user_m.to_string()),
            ("tau", self.tau.to_string()),
            ("p_ul_dbm", self.p_ul_dbm.to_string()),
            ("tau_u", self.tau_u.to_string()),
            ("tau_d", self.tau_d.to_string()),
            ("tau_c", self.tau_c.to_string()),
            ("C_bits_per_use", self.c_bits_per_use.to_string()),
            ("S", self.s.to_string()),
            ("epsilon_sparse", self.epsilon_sparse.to_string()),
            ("corr_r", self.corr_r.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        NetworkConfig::default().validate().unwrap();
        NetworkConfig::dense30().validate().unwrap();
    }

    #[test]
    fn dbm_conversions() {
        let cfg = NetworkConfig { p_dbm: 40.0, noise_dbm: -113.0, ..Default::default() };
        assert!((cfg.p() - 10.0).abs() < 1e-12);
        assert!((cfg.sigma2() - 10f64.powf(-14.3)).abs() < 1e-20);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = NetworkConfig::default();
        cfg.s = cfg.l + 1;
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::default();
        cfg.corr_r = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::default();
        cfg.tau = cfg.k - 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn key_value_round_trip_all_keys() {
        let cfg = NetworkConfig::dense30();
        let mut rebuilt = NetworkConfig::default();
        for (key, value) in cfg.key_values() {
            assert!(rebuilt.set_key(key, &value).unwrap(), "unrecognized key {key}");
        }
        assert_eq!(cfg, rebuilt);
    }

    #[test]
    fn unknown_key_is_reported() {
        let mut cfg = NetworkConfig::default();
        assert!(!cfg.set_key("no_such_key", "1").unwrap());
        assert!(cfg.set_key("L", "not_a_number").is_err());
    }
}
