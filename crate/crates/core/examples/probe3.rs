//! Convergence-rate and certificate probe across epsilon and S choices.

use sparsejt_core::se_metrics::Realization;
use sparsejt_core::solver::{solve, SolverOptions};
use sparsejt_core::{NetworkConfig, QuantizationPlan, TriState};

fn audit(eps: f64, s: usize, n_inst: usize) {
    let mut cfg = NetworkConfig::default();
    cfg.s = s;
    cfg.epsilon_sparse = eps;
    let plan = QuantizationPlan::from_capacity(&cfg).unwrap();
    let opts = SolverOptions::default();
    let mut n_succ = 0;
    let mut n_pass = 0;
    let mut n_checked = 0;
    let mut n_res_ok = 0;
    let mut worst_gap = 0.0f64;
    let mut stall_measures = Vec::new();
    for inst in 0..n_inst {
        cfg.seed = 5000 + inst as u64;
        let real = Realization::generate(&cfg, &plan, 0, 0).unwrap();
        let view = real.channels.view();
        match solve(&view, &plan, &cfg, &opts) {
            Ok(r) => {
                if r.is_success() {
                    n_succ += 1;
                    if r.kkt_residual < 1e-5 {
                        n_res_ok += 1;
                    }
                    worst_gap = worst_gap.max((r.sparsity - s as f64).abs());
                    match r.second_order {
                        TriState::Pass => {
                            n_pass += 1;
                            n_checked += 1;
                        }
                        TriState::Fail => n_checked += 1,
                        TriState::NotChecked => {}
                    }
                } else {
                    stall_measures.push((format!("{}", r.status), r.sparsity));
                }
            }
            Err(e) => stall_measures.push((format!("err {e}"), f64::NAN)),
        }
    }
    println!(
        "eps={eps:<6} S={s}: success={n_succ}/{n_inst} residual_ok={n_res_ok} worst|g|={worst_gap:.4} so_pass={n_pass}/{n_checked}"
    );
    if !stall_measures.is_empty() {
        let sample: Vec<String> = stall_measures
            .iter()
            .take(8)
            .map(|(st, m)| format!("{st}@{m:.3}"))
            .collect();
        println!("   non-success: {}", sample.join(", "));
    }
}

fn main() {
    for &eps in &[1e-2, 0.05, 0.1, 0.2] {
        for &s in &[2usize, 3] {
            audit(eps, s, 30);
        }
    }
}
