//! [`PrecoderStrategy`] adapters for the solver and the zero-forcing
//! baselines, plus hooks for plugging in external schemes.

use crate::baselines::{rcc_zf, sc_zf};
use crate::config::NetworkConfig;
use crate::error::Result;
use crate::fronthaul::QuantizationPlan;
use crate::net_model::CsitView;
use crate::se_metrics::PrecoderStrategy;
use crate::solver::{solve, SolverOptions};
use crate::spca_core::StackedPrecoder;

/// Sparse joint transmission via the full solver.
#[derive(Debug, Clone, Default)]
pub struct SparseJtStrategy {
    pub opts: SolverOptions,
}

impl PrecoderStrategy for SparseJtStrategy {
    fn name(&self) -> &'static str {
        "sparse_jt"
    }

    fn precode(&self, view: &CsitView, plan: &QuantizationPlan, cfg: &NetworkConfig) -> Result<StackedPrecoder> {
        Ok(solve(view, plan, cfg, &self.opts)?.f)
    }
}

/// RRH-centric clustering with zero forcing at the configured budget `S`.
#[derive(Debug, Clone, Default)]
pub struct RccZfStrategy;

impl PrecoderStrategy for RccZfStrategy {
    fn name(&self) -> &'static str {
        "rcc_zf"
    }

    fn precode(&self, view: &CsitView, plan: &QuantizationPlan, cfg: &NetworkConfig) -> Result<StackedPrecoder> {
        Ok(rcc_zf(view, plan, cfg, cfg.s)?.f)
    }
}

/// Zero forcing on the support pattern found by a fresh sparse-JT solve.
#[derive(Debug, Clone, Default)]
pub struct ScZfStrategy {
    pub opts: SolverOptions,
}

impl PrecoderStrategy for ScZfStrategy {
    fn name(&self) -> &'static str {
        "sc_zf"
    }

    fn precode(&self, view: &CsitView, plan: &QuantizationPlan, cfg: &NetworkConfig) -> Result<StackedPrecoder> {
        let jt = solve(view, plan, cfg, &self.opts)?;
        Ok(sc_zf(&jt.f, view, plan, cfg)?.f)
    }
}

/// All-zero precoder; only useful for exercising the Monte Carlo plumbing.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroStrategy;

impl PrecoderStrategy for ZeroStrategy {
    fn name(&self) -> &'static str {
        "zero"
    }

    fn precode(&self, view: &CsitView, _plan: &QuantizationPlan, _cfg: &NetworkConfig) -> Result<StackedPrecoder> {
        Ok(StackedPrecoder::zeros(view.l, view.n, view.k))
    }
}
