//! Zero-forcing comparison schemes.
//!
//! RCC-ZF clusters by raw aggregate channel gain: keep the `S` strongest
//! RRHs and zero-force over them. SC-ZF reuses the support pattern a
//! sparse-JT solve discovered and zero-forces on it, isolating how much of
//! sparse-JT's gain comes from clustering versus beamforming and power
//! allocation. Both consume only the BBU-visible view.

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::fronthaul::QuantizationPlan;
use crate::linalg::{CMat, CVec};
use crate::net_model::CsitView;
use crate::solver::{project_per_rrh_power, regularized_zf};
use crate::spca_core::StackedPrecoder;

/// A baseline's precoder with its active-RRH set and scheme tag.
#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub f: StackedPrecoder,
    pub active: Vec<usize>,
    pub scheme: &'static str,
}

/// Block-support threshold used by SC-ZF, as a fraction of the largest
/// per-(RRH, user) block power.
pub const SUPPORT_THRESHOLD_FRAC: f64 = 1e-3;

/// RRH-centric clustering with zero forcing: activate the `S` RRHs with the
/// largest aggregated quantized-channel gains (ties to the lower index),
/// zero-force over the restricted antennas, and project onto the power caps.
/// When the restricted dimensions cannot support all `K` users, the excess
/// users with the smallest aggregate gains over the active set are dropped.
pub fn rcc_zf(
    view: &CsitView,
    plan: &QuantizationPlan,
    _cfg: &NetworkConfig,
    s: usize,
) -> Result<BaselineResult> {
    if s == 0 {
        return Err(Error::InvalidConfig("rcc_zf needs S >= 1".into()));
    }
    let s = s.min(view.l);
    let gains: Vec<f64> = (0..view.l)
        .map(|li| (0..view.k).map(|ki| view.h_bar[view.idx(li, ki)].norm_squared()).sum())
        .collect();
    let mut order: Vec<usize> = (0..view.l).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut active: Vec<usize> = order.into_iter().take(s).collect();
    active.sort_unstable();

    let dims = s * view.n;
    let served: Vec<usize> = if view.k > dims {
        let user_gain = |ki: usize| -> f64 {
            active.iter().map(|&li| view.h_bar[view.idx(li, ki)].norm_squared()).sum()
        };
        let mut users: Vec<usize> = (0..view.k).collect();
        users.sort_by(|&a, &b| {
            user_gain(b).partial_cmp(&user_gain(a)).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let mut kept: Vec<usize> = users.into_iter().take(dims).collect();
        kept.sort_unstable();
        kept
    } else {
        (0..view.k).collect()
    };

    let mut h = CMat::zeros(dims, served.len());
    for (col, &ki) in served.iter().enumerate() {
        for (row_block, &li) in active.iter().enumerate() {
            if view.is_selected(li, ki) {
                let hb = &view.h_bar[view.idx(li, ki)];
                for ni in 0..view.n {
                    h[(row_block * view.n + ni, col)] = hb[ni];
                }
            }
        }
    }
    let f_cols = regularized_zf(&h)?;
    let mut f = StackedPrecoder::zeros(view.l, view.n, view.k);
    for (col, &ki) in served.iter().enumerate() {
        for (row_block, &li) in active.iter().enumerate() {
            let block: CVec = f_cols.column(col).rows(row_block * view.n, view.n).into_owned();
            f.set_block(li, ki, &block);
        }
    }
    let budgets = vec![plan.budget(); view.l];
    let f = project_per_rrh_power(&f, &budgets)?;
    Ok(BaselineResult { f, active, scheme: "rcc_zf" })
}

/// Sparse-JT clustering with zero forcing: take the (RRH, user) support of a
/// sparse-JT solution, zero-force each user over its supporting RRHs, and
/// project onto the power caps. Users with empty support keep the zero
/// precoder.
pub fn sc_zf(
    sparse_jt: &StackedPrecoder,
    view: &CsitView,
    plan: &QuantizationPlan,
    _cfg: &NetworkConfig,
) -> Result<BaselineResult> {
    let mut max_block = 0.0f64;
    for li in 0..view.l {
        for ki in 0..view.k {
            max_block = max_block.max(sparse_jt.block(li, ki).norm_squared());
        }
    }
    if max_block <= 0.0 {
        return Err(Error::EmptySupport);
    }
    let threshold = SUPPORT_THRESHOLD_FRAC * max_block;
    let support: Vec<Vec<usize>> = (0..view.k)
        .map(|ki| {
            (0..view.l)
                .filter(|&li| sparse_jt.block(li, ki).norm_squared() > threshold)
                .collect()
        })
        .collect();
    if support.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptySupport);
    }

    let mut f = StackedPrecoder::zeros(view.l, view.n, view.k);
    for ki in 0..view.k {
        let rrhs = &support[ki];
        if rrhs.is_empty() {
            continue;
        }
        let rows = rrhs.len() * view.n;
        // All users' channels restricted to user k's supporting antennas;
        // zero forcing on this sub-channel nulls the interference user k's
        // precoder creates at every user the BBU knows about there.
        let mut h = CMat::zeros(rows, view.k);
        for col in 0..view.k {
            for (row_block, &li) in rrhs.iter().enumerate() {
                if view.is_selected(li, col) {
                    let hb = &view.h_bar[view.idx(li, col)];
                    for ni in 0..view.n {
                        h[(row_block * view.n + ni, col)] = hb[ni];
                    }
                }
            }
        }
        let f_cols = regularized_zf(&h)?;
        for (row_block, &li) in rrhs.iter().enumerate() {
            let block: CVec = f_cols.column(ki).rows(row_block * view.n, view.n).into_owned();
            f.set_block(li, ki, &block);
        }
    }

    let active: Vec<usize> = (0..view.l).filter(|&li| f.rrh_power(li) > 0.0).collect();
    if active.is_empty() {
        return Err(Error::EmptySupport);
    }
    let budgets = vec![plan.budget(); view.l];
    let f = project_per_rrh_power(&f, &budgets)?;
    Ok(BaselineResult { f, active, scheme: "sc_zf" })
}
