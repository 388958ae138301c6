//! Scratch probe for solver behavior on small random instances.

use sparsejt_core::se_metrics::Realization;
use sparsejt_core::solver::{gpi_inner, solve, zf_init, SolverOptions};
use sparsejt_core::spca_core::{LiftedProblem, SecondOrderMode};
use sparsejt_core::{NetworkConfig, QuantizationPlan};

fn main() {
    let mut cfg = NetworkConfig::default();
    cfg.s = 2;
    let plan = QuantizationPlan::from_capacity(&cfg).unwrap();
    println!("plan: u={} b={} bbar={} eta={:.3e}", plan.u, plan.b_csi, plan.b_data, plan.eta);

    let mut pass_rr = 0;
    let mut pass_lit = 0;
    let mut n_ok = 0;
    for inst in 0..20 {
        cfg.seed = 1000 + inst;
        let real = Realization::generate(&cfg, &plan, 0, 0).unwrap();
        let view = real.channels.view();
        let opts = SolverOptions::default();
        match solve(&view, &plan, &cfg, &opts) {
            Ok(res) => {
                let lifted = LiftedProblem::new(&view, &plan, &cfg);
                let (_, raw_res) = lifted.kkt_gradient(&res.f.normalized_to(lifted.budget_sum).unwrap(), res.lambda).unwrap();
                let so_rr = lifted.second_order_check(&res.f, res.lambda, 1e-5, SecondOrderMode::RangeRestricted);
                let so_lit = lifted.second_order_check(&res.f, res.lambda, 1e-5, SecondOrderMode::LiteralDense);
                println!(
                    "inst {inst}: status={} lam={:.4} meas={:.4} obj={:.3} eig_res={:.2e} raw_grad_res={:.2e} in={} out={}",
                    res.status, res.lambda, res.sparsity, res.objective_bits, res.kkt_residual, raw_res,
                    res.inner_iters, res.outer_iters
                );
                match (&so_rr, &so_lit) {
                    (Ok(rr), Ok(lit)) => {
                        println!(
                            "   so_rr: pass={} margin={:.3e} (min={:.3e} max={:.3e}) | so_lit: pass={} margin={:.3e} (min={:.3e})",
                            rr.pass, rr.margin, rr.rho_min, rr.rho_max, lit.pass, lit.margin, lit.rho_min
                        );
                        if res.is_success() {
                            n_ok += 1;
                            if rr.pass {
                                pass_rr += 1;
                            }
                            if lit.pass {
                                pass_lit += 1;
                            }
                        }
                    }
                    _ => println!("   so err: rr={so_rr:?}"),
                }
            }
            Err(e) => println!("inst {inst}: solve error {e}"),
        }
    }
    println!("\nsuccess={n_ok}/20 second-order pass: range-restricted={pass_rr} literal={pass_lit}");

    // GPI vs dense eigensolver at lambda=0, K=1.
    let mut cfg1 = NetworkConfig { l: 4, n: 2, k: 1, tau: 1, s: 4, ..NetworkConfig::default() };
    cfg1.c_bits_per_use = 200.0;
    let plan1 = QuantizationPlan::from_capacity(&cfg1).unwrap();
    for inst in 0..3 {
        cfg1.seed = inst;
        let real = Realization::generate(&cfg1, &plan1, 0, 0).unwrap();
        let view = real.channels.view();
        let lifted = LiftedProblem::new(&view, &plan1, &cfg1);
        let f0 = zf_init(&view, &plan1).unwrap();
        let run = gpi_inner(&lifted, &f0, 0.0, 1e-8, 500, false).unwrap();
        let q = lifted.forms(&run.f).unwrap();
        let a = lifted.build_a_dense(0, &run.f).unwrap();
        let b = lifted.build_b_dense(0, &run.f).unwrap();
        let (val, _) = sparsejt_core::linalg::generalized_hermitian_eig_max(&a, &b).unwrap();
        let gpi_val = q.alpha[0] / q.beta[0];
        println!(
            "K=1 inst {inst}: gpi={gpi_val:.9} dense={val:.9} rel={:.2e} iters={} conv={}",
            (gpi_val - val).abs() / val,
            run.iters,
            run.converged
        );
    }
}
