//! The sparse joint transmission solver: a generalized power iteration on
//! the functional eigenproblem `M_A(f) f = c M_B(f, lambda) f`, wrapped in a
//! bisection on the multiplier `lambda` that steers the group-sparsity
//! surrogate to the active-RRH budget `S`, started from zero forcing and
//! finished with a projection onto the per-RRH power caps.
//!
//! Inside the loop the iterate is held on the sphere
//! `||f||^2 = sum_l (1 + eta_l)^(-1)`, where the sparsity surrogate tracks
//! the count of active RRHs. The published listing instead renormalizes by
//! the worst per-RRH power each step; both leave the objective unchanged
//! (it is scale invariant) but only the sphere keeps the surrogate aligned
//! with the budget, so the max-power rescale is applied once at the end as
//! the power projection.

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::fronthaul::QuantizationPlan;
use crate::linalg::{cholesky, CMat, CVec};
use crate::net_model::CsitView;
use crate::spca_core::{LiftedProblem, SecondOrderMode, StackedPrecoder, VTermMode};

/// Solver knobs. Defaults follow the documented tolerances: inner tolerance
/// 1e-8, at most 500 inner iterations, sparsity tolerance 0.05.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative objective-change tolerance of the inner power iteration.
    pub inner_tol: f64,
    /// Inner iteration cap per multiplier evaluation.
    pub max_inner_iters: usize,
    /// Sparsity tolerance: accept when |measure - S| falls below this.
    pub sparsity_tol: f64,
    /// Bisection stops (stalled) when the bracket shrinks below this width.
    pub bracket_tol: f64,
    /// Cap on bracket-expansion doublings of `lambda_+`.
    pub max_bracket_doublings: u32,
    /// Reuse the previous multiplier's solution as the next starting point.
    pub warm_start: bool,
    /// Stationarity-residual threshold for a solve to count as successful.
    pub residual_tol: f64,
    pub v_mode: VTermMode,
    /// Solve the L*N*K-dimensional systems densely (small-size cross-checks).
    pub dense_reference: bool,
    pub second_order: SecondOrderPolicy,
    pub second_order_mode: SecondOrderMode,
    /// Active-set threshold as a fraction of the largest per-RRH power.
    pub active_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            inner_tol: 1e-8,
            max_inner_iters: 500,
            sparsity_tol: 0.05,
            bracket_tol: 1e-8,
            max_bracket_doublings: 60,
            warm_start: true,
            residual_tol: 1e-5,
            v_mode: VTermMode::default(),
            dense_reference: false,
            second_order: SecondOrderPolicy::Auto,
            second_order_mode: SecondOrderMode::default(),
            active_threshold: 1e-3,
        }
    }
}

/// When to run the curvature test on the converged solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondOrderPolicy {
    /// Run it when the problem dimension is at most 600.
    Auto,
    Always,
    Never,
}

/// Outcome of the curvature test attached to a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriState {
    Pass,
    Fail,
    NotChecked,
}

impl std::fmt::Display for TriState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TriState::Pass => write!(f, "pass"),
            TriState::Fail => write!(f, "fail"),
            TriState::NotChecked => write!(f, "not_checked"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// Bisection hit the sparsity budget within tolerance.
    Converged,
    /// The budget was already slack at `lambda = 0`; no multiplier needed.
    ConstraintInactive,
    /// No multiplier made the surrogate drop below the budget.
    BracketFailure,
    /// The bracket collapsed without meeting the sparsity tolerance.
    BisectionStalled,
    /// The inner iteration ran out of iterations on the accepted solution.
    MaxIterExceeded,
}

impl SolverStatus {
    pub fn is_success(self) -> bool {
        matches!(self, SolverStatus::Converged | SolverStatus::ConstraintInactive)
    }
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverStatus::Converged => "converged",
            SolverStatus::ConstraintInactive => "constraint_inactive",
            SolverStatus::BracketFailure => "bracket_failure",
            SolverStatus::BisectionStalled => "bisection_stalled",
            SolverStatus::MaxIterExceeded => "max_iter_exceeded",
        };
        write!(f, "{s}")
    }
}

/// Converged sparse-JT solution and its diagnostics.
#[derive(Debug, Clone)]
pub struct SolverResult {
    /// Final precoder, projected onto the per-RRH power caps.
    pub f: StackedPrecoder,
    pub lambda: f64,
    /// Sum-SE surrogate `log2 gamma(f, 0)` in bits.
    pub objective_bits: f64,
    /// Group-sparsity surrogate at the pinned normalization.
    pub sparsity: f64,
    pub active: Vec<usize>,
    pub inner_iters: usize,
    pub outer_iters: usize,
    /// Relative defect of the functional generalized eigenproblem.
    pub kkt_residual: f64,
    pub second_order: TriState,
    pub second_order_margin: Option<f64>,
    pub status: SolverStatus,
}

impl SolverResult {
    pub fn is_success(&self) -> bool {
        self.status.is_success()
    }
}

/// Regularized zero-forcing columns `F = H (H^H H + delta I)^{-1}` with
/// `delta = 1e-6 trace(H^H H) / K`.
pub(crate) fn regularized_zf(h: &CMat) -> Result<CMat> {
    let k = h.ncols();
    let gram = h.adjoint() * h;
    let tr: f64 = gram.trace().re;
    if tr <= 0.0 {
        return Err(Error::SingularSystem("zero aggregate channel in zero forcing"));
    }
    let delta = 1e-6 * tr / k as f64;
    let reg = &gram + CMat::identity(k, k).scale(delta);
    let chol = cholesky(&reg, "zf gram")?;
    // F = H G^{-1}  <=>  F^H = G^{-1} H^H (G is Hermitian).
    let fh = chol.solve(&h.adjoint());
    Ok(fh.adjoint())
}

/// Zero-forcing initial point over the BBU's aggregate quantized channel
/// (zero rows where CSI is missing), normalized to the in-loop sphere.
pub fn zf_init(view: &CsitView, plan: &QuantizationPlan) -> Result<StackedPrecoder> {
    let ln = view.l * view.n;
    if view.k > ln {
        return Err(Error::RankDeficient { users: view.k, dims: ln });
    }
    let mut h = CMat::zeros(ln, view.k);
    for ki in 0..view.k {
        h.set_column(ki, &view.stacked_h_bar(ki));
    }
    let f_cols = regularized_zf(&h)?;
    let mut f = StackedPrecoder::zeros(view.l, view.n, view.k);
    for ki in 0..view.k {
        for li in 0..view.l {
            let block: CVec = f_cols.column(ki).rows(li * view.n, view.n).into_owned();
            f.set_block(li, ki, &block);
        }
    }
    f.normalized_to(plan.budget_sum(view.l))
}

/// One inner run of the generalized power iteration at fixed `lambda`.
#[derive(Debug, Clone)]
pub struct GpiRun {
    pub f: StackedPrecoder,
    pub iters: usize,
    pub converged: bool,
    pub gamma_log2: f64,
}

/// Iterates `f <- M_B(f, lambda)^{-1} M_A(f) f` with renormalization to the
/// pinned sphere until both the relative objective change and the iterate
/// difference settle below `tol` (and ten times `tol` respectively), or
/// `max_iter` is reached, in which case the best iterate seen is returned
/// flagged as unconverged.
pub fn gpi_inner(
    lifted: &LiftedProblem,
    f0: &StackedPrecoder,
    lambda: f64,
    tol: f64,
    max_iter: usize,
    dense: bool,
) -> Result<GpiRun> {
    let target = lifted.budget_sum;
    let mut f = f0.normalized_to(target)?;
    let mut glog = lifted.gamma_log2(&f, lambda)?;
    let mut best_glog = glog;
    let mut best_f = f.clone();
    for t in 1..=max_iter {
        let mut next = lifted.gpi_step(&f, lambda, dense)?.normalized_to(target)?;
        // Remove the arbitrary global phase before measuring the step size.
        let c = f.f.dotc(&next.f);
        if c.norm() > 0.0 {
            let phase = c.conj() / c.norm();
            next.f *= phase;
        }
        let glog_next = lifted.gamma_log2(&next, lambda)?;
        let vec_diff = (&next.f - &f.f).norm() / target.sqrt();
        let rel_change = (std::f64::consts::LN_2 * (glog_next - glog)).abs();
        f = next;
        glog = glog_next;
        if glog > best_glog {
            best_glog = glog;
            best_f = f.clone();
        }
        if rel_change <= tol && vec_diff <= 10.0 * tol {
            return Ok(GpiRun { f, iters: t, converged: true, gamma_log2: glog });
        }
    }
    Ok(GpiRun { f: best_f, iters: max_iter, converged: false, gamma_log2: best_glog })
}

/// RRH indices whose transmit power exceeds `threshold_frac` times the
/// largest per-RRH power.
pub fn active_set(f: &StackedPrecoder, threshold_frac: f64) -> Vec<usize> {
    let powers = f.rrh_powers();
    let max = powers.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    powers
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > threshold_frac * max)
        .map(|(l, _)| l)
        .collect()
}

/// Uniformly rescales so the most-loaded RRH meets the (uniform) budget
/// exactly: `max_l sum_k ||f_{l,k}||^2 = min_l budget_l`. Leaves the
/// direction, hence the objective, unchanged.
pub fn project_per_rrh_power(f: &StackedPrecoder, budgets: &[f64]) -> Result<StackedPrecoder> {
    let max_power = f.rrh_powers().into_iter().fold(0.0, f64::max);
    if max_power <= 0.0 {
        return Err(Error::ZeroVector("per-RRH power projection"));
    }
    let budget = budgets.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = f.clone();
    out.f.scale_mut((budget / max_power).sqrt());
    Ok(out)
}

struct Evaluation {
    run: GpiRun,
    measure: f64,
    lambda: f64,
}

/// Full sparse-JT solve: ZF start, bisection on `lambda` against the
/// sparsity budget, stationarity residual, optional curvature test, active
/// set, and the final per-RRH power projection. Deterministic in its inputs.
pub fn solve(
    view: &CsitView,
    plan: &QuantizationPlan,
    cfg: &NetworkConfig,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    if cfg.s > cfg.l {
        return Err(Error::InvalidConfig(format!("S={} exceeds L={}", cfg.s, cfg.l)));
    }
    let lifted = LiftedProblem::with_mode(view, plan, cfg, opts.v_mode);
    let f0 = zf_init(view, plan)?;
    let s_target = cfg.s as f64;
    let mut inner_total = 0usize;
    let mut outer = 0usize;

    let evaluate = |lambda: f64, start: &StackedPrecoder| -> Result<Evaluation> {
        let run = gpi_inner(&lifted, start, lambda, opts.inner_tol, opts.max_inner_iters, opts.dense_reference)?;
        let measure = lifted.sparsity_measure(&run.f)?;
        Ok(Evaluation { run, measure, lambda })
    };

    let base = evaluate(0.0, &f0)?;
    inner_total += base.run.iters;
    outer += 1;
    let g0 = base.measure - s_target;

    let mut status;
    let mut accepted;
    if g0.abs() <= opts.sparsity_tol {
        status = SolverStatus::Converged;
        accepted = base;
    } else if g0 < 0.0 {
        // Even the unconstrained solution is at or below the budget; the
        // inequality is slack and lambda = 0 is the multiplier.
        status = SolverStatus::ConstraintInactive;
        accepted = base;
    } else {
        status = SolverStatus::BisectionStalled;
        accepted = Evaluation { run: base.run.clone(), measure: base.measure, lambda: 0.0 };
        let mut best_gap = g0.abs();
        let track_best = |ev: &Evaluation, best_gap: &mut f64, slot: &mut Evaluation| {
            let gap = (ev.measure - s_target).abs();
            if gap < *best_gap {
                *best_gap = gap;
                *slot = Evaluation { run: ev.run.clone(), measure: ev.measure, lambda: ev.lambda };
            }
        };

        // Expand lambda_+ until the surrogate drops below the budget. The
        // warm-started continuation can cling to a symmetric fixed point
        // that no multiplier sparsifies, so a failed expansion is retried
        // once cold from the zero-forcing start.
        let mut bracket = None;
        let mut converged_eval = None;
        'expansion: for cold_retry in [false, true] {
            let mut warm = if opts.warm_start && !cold_retry { base.run.f.clone() } else { f0.clone() };
            let mut lam_lo = 0.0;
            let mut lam_hi = 1.0;
            for _ in 0..=opts.max_bracket_doublings {
                let ev = evaluate(lam_hi, &warm)?;
                inner_total += ev.run.iters;
                outer += 1;
                if opts.warm_start {
                    warm = ev.run.f.clone();
                }
                let g = ev.measure - s_target;
                track_best(&ev, &mut best_gap, &mut accepted);
                if g.abs() <= opts.sparsity_tol {
                    converged_eval = Some(ev);
                    break 'expansion;
                }
                if g < 0.0 {
                    bracket = Some((lam_lo, lam_hi, warm.clone()));
                    break 'expansion;
                }
                lam_lo = lam_hi;
                lam_hi *= 2.0;
            }
            if !opts.warm_start {
                break;
            }
        }

        if let Some(ev) = converged_eval {
            status = SolverStatus::Converged;
            accepted = ev;
        } else if let Some((mut lam_lo, mut lam_hi, mut warm)) = bracket {
            // Bisect; g(lam_lo) > 0 > g(lam_hi).
            while lam_hi - lam_lo > opts.bracket_tol {
                let mid = 0.5 * (lam_lo + lam_hi);
                let ev = evaluate(mid, &warm)?;
                inner_total += ev.run.iters;
                outer += 1;
                if opts.warm_start {
                    warm = ev.run.f.clone();
                }
                let g = ev.measure - s_target;
                track_best(&ev, &mut best_gap, &mut accepted);
                if g.abs() <= opts.sparsity_tol {
                    accepted = ev;
                    status = SolverStatus::Converged;
                    break;
                }
                if g > 0.0 {
                    lam_lo = mid;
                } else {
                    lam_hi = mid;
                }
            }
        } else {
            // No sign change found; report the unconstrained solution.
            status = SolverStatus::BracketFailure;
            accepted = Evaluation { run: base.run, measure: base.measure, lambda: 0.0 };
        }
    }

    // Residual polish: if the accepted iterate's stationarity defect is
    // still above the success threshold, continue the inner iteration once
    // from where it stopped.
    let mut f = accepted.run.f.normalized_to(lifted.budget_sum)?;
    let lambda = accepted.lambda;
    let mut converged = accepted.run.converged;
    let mut residual = lifted.eigen_residual(&f, lambda)?;
    if residual > opts.residual_tol {
        let polish = gpi_inner(&lifted, &f, lambda, opts.inner_tol, opts.max_inner_iters, opts.dense_reference)?;
        inner_total += polish.iters;
        f = polish.f.normalized_to(lifted.budget_sum)?;
        converged = polish.converged;
        residual = lifted.eigen_residual(&f, lambda)?;
    }
    let measure = lifted.sparsity_measure(&f)?;
    if status.is_success() && (!converged || residual > opts.residual_tol) {
        status = SolverStatus::MaxIterExceeded;
    }

    // The per-block pencil test is cheap at any scale; only the dense
    // diagnostic mode needs the dimension gate.
    let check_dim = opts.second_order_mode != SecondOrderMode::LiteralDense || lifted.dim() <= 600;
    let do_check = match opts.second_order {
        SecondOrderPolicy::Always => true,
        SecondOrderPolicy::Never => false,
        SecondOrderPolicy::Auto => check_dim,
    };
    let (second_order, second_order_margin) = if do_check {
        match lifted.second_order_check(&f, lambda, opts.residual_tol, opts.second_order_mode) {
            Ok(chk) => (
                if chk.pass { TriState::Pass } else { TriState::Fail },
                Some(chk.margin),
            ),
            Err(Error::NotStationary { .. }) => (TriState::NotChecked, None),
            Err(e) => return Err(e),
        }
    } else {
        (TriState::NotChecked, None)
    };

    let objective_bits = lifted.objective_bits(&f)?;
    let active = active_set(&f, opts.active_threshold);
    let projected = project_per_rrh_power(&f, &lifted.budgets)?;

    Ok(SolverResult {
        f: projected,
        lambda,
        objective_bits,
        sparsity: measure,
        active,
        inner_iters: inner_total,
        outer_iters: outer,
        kkt_residual: residual,
        second_order,
        second_order_margin,
        status,
    })
}
