//! Landscape probe: sparsity-measure continuation in lambda, branch folds,
//! and pencil-top optimality at fixed points.

use sparsejt_core::linalg::CMat;
use sparsejt_core::se_metrics::Realization;
use sparsejt_core::solver::{gpi_inner, zf_init};
use sparsejt_core::spca_core::LiftedProblem;
use sparsejt_core::{NetworkConfig, QuantizationPlan};

fn pencil_eigs(lifted: &LiftedProblem, f: &sparsejt_core::StackedPrecoder, lambda: f64) -> (f64, Vec<f64>) {
    let q = lifted.forms(f).unwrap();
    let ma = lifted.m_a_dense(&q).unwrap();
    let mb = lifted.m_b_dense(&q, lambda).unwrap();
    // theta_self
    let fa = (f.f.adjoint() * &ma * &f.f)[(0, 0)].re;
    let fb = (f.f.adjoint() * &mb * &f.f)[(0, 0)].re;
    let theta_self = fa / fb;
    // all generalized eigenvalues via Cholesky reduction
    let chol = sparsejt_core::linalg::cholesky(&mb, "probe").unwrap();
    let l = chol.l();
    let mut m = ma.clone();
    l.solve_lower_triangular_mut(&mut m);
    let mut mt: CMat = m.adjoint();
    l.solve_lower_triangular_mut(&mut mt);
    let m = (mt.adjoint() + mt.adjoint().adjoint().adjoint()).scale(0.5);
    let mut ev: Vec<f64> = sparsejt_core::linalg::hermitian_eigenvalues(&m).iter().cloned().collect();
    ev.reverse();
    (theta_self, ev)
}

fn main() {
    let mut cfg = NetworkConfig::default();
    cfg.seed = 1000;
    let plan = QuantizationPlan::from_capacity(&cfg).unwrap();
    let real = Realization::generate(&cfg, &plan, 0, 0).unwrap();
    let view = real.channels.view();
    let lifted = LiftedProblem::new(&view, &plan, &cfg);
    let f0 = zf_init(&view, &plan).unwrap();

    println!("== warm continuation, increasing lambda ==");
    let mut f = f0.clone();
    let mut lam = 0.0;
    while lam <= 3.0 {
        let run = gpi_inner(&lifted, &f, lam, 1e-8, 500, false).unwrap();
        f = run.f.clone();
        let m = lifted.sparsity_measure(&f).unwrap();
        let powers: Vec<String> = f.rrh_powers().iter().map(|p| format!("{p:.3}")).collect();
        if (lam * 20.0).round() as i64 % 4 == 0 {
            println!("lam={lam:.2} meas={m:.4} iters={} conv={} powers=[{}]", run.iters, run.converged, powers.join(","));
        }
        lam += 0.05;
    }

    println!("\n== cold starts at the same lambdas ==");
    for i in 0..=15 {
        let lam = 0.2 * i as f64;
        let run = gpi_inner(&lifted, &f0, lam, 1e-8, 500, false).unwrap();
        let m = lifted.sparsity_measure(&run.f).unwrap();
        println!("lam={lam:.2} meas={m:.4} iters={} conv={}", run.iters, run.converged);
    }

    println!("\n== pencil-top check at converged fixed points ==");
    for &lam in &[0.0, 0.5, 1.0, 2.0] {
        let run = gpi_inner(&lifted, &f0, lam, 1e-8, 500, false).unwrap();
        let (theta_self, ev) = pencil_eigs(&lifted, &run.f, lam);
        println!(
            "lam={lam}: theta_self={theta_self:.6} top3={:?} rel_gap_top={:.2e}",
            &ev[..3.min(ev.len())],
            (ev[0] - theta_self) / ev[0]
        );
    }

    // Does S=3 bisection work, and does a cold restart rescue bracket failures?
    println!("\n== solve at S=3 across instances ==");
    let mut cfg3 = NetworkConfig::default();
    cfg3.s = 3;
    let mut ok = 0;
    for inst in 0..20 {
        cfg3.seed = 1000 + inst;
        let real = Realization::generate(&cfg3, &plan, 0, 0).unwrap();
        let view = real.channels.view();
        let opts = sparsejt_core::SolverOptions::default();
        match sparsejt_core::solve(&view, &plan, &cfg3, &opts) {
            Ok(r) => {
                if r.is_success() {
                    ok += 1;
                }
                println!(
                    "inst {inst}: status={} lam={:.4} meas={:.4} res={:.1e} in={}",
                    r.status, r.lambda, r.sparsity, r.kkt_residual, r.inner_iters
                );
            }
            Err(e) => println!("inst {inst}: err {e}"),
        }
    }
    println!("S=3 success {ok}/20");
}
