//! Small complex linear-algebra layer on top of nalgebra.
//!
//! Everything downstream works with dynamically sized complex matrices and
//! vectors (`CMat`, `CVec`). This module wraps the handful of dense kernels
//! the rest of the crate needs: Hermitian eigendecomposition, PSD square
//! roots, positive-definite solves with a rank-one downdate, a dense
//! generalized Hermitian eigensolver used as a reference oracle, and
//! circularly-symmetric complex Gaussian sampling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Real part of a Hermitian quadratic form `x^H M x`.
pub fn quad_form(m: &CMat, x: &CVec) -> f64 {
    (x.adjoint() * m * x)[(0, 0)].re
}

/// Hermitian inner product `x^H y`.
pub fn inner(x: &CVec, y: &CVec) -> Complex64 {
    x.dotc(y)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> DVector<f64> {
    let mut ev = m.clone().symmetric_eigenvalues();
    ev.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Full Hermitian eigendecomposition; returns (eigenvalues ascending, eigenvectors as columns).
pub fn hermitian_eig(m: &CMat) -> (DVector<f64>, CMat) {
    let se = m.clone().symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &se.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Hermitian PSD square root. Slightly negative eigenvalues from roundoff are
/// clamped to zero so near-singular covariances stay sampleable.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eig(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = vals[j].max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= Complex64::new(s, 0.0);
        }
    }
    &scaled * vecs.adjoint()
}

/// Cholesky factorization of a Hermitian positive-definite matrix.
pub fn cholesky(m: &CMat, context: &'static str) -> Result<Cholesky<Complex64, Dyn>> {
    Cholesky::new(m.clone()).ok_or(Error::SingularSystem(context))
}

/// All eigenvalues (ascending) of the Hermitian-definite pencil `(A, B)`
/// with `B > 0`, via the Cholesky reduction `L^{-1} A L^{-H}`.
pub fn generalized_hermitian_eigenvalues(a: &CMat, b: &CMat) -> Result<DVector<f64>> {
    let chol = cholesky(b, "generalized eigenvalues B factor")?;
    let l = chol.l();
    let mut m = a.clone();
    l.solve_lower_triangular_mut(&mut m);
    let mut mt = m.adjoint();
    l.solve_lower_triangular_mut(&mut mt);
    let m = mt.adjoint();
    let m = (&m + m.adjoint()).scale(0.5);
    Ok(hermitian_eigenvalues(&m))
}

/// Top eigenpair of the Hermitian-definite pencil `(A, B)` with `B > 0`,
/// computed densely via the Cholesky reduction `L^{-1} A L^{-H}`.
///
/// Reference path only: the production solver never forms this problem
/// densely at network scale.
pub fn generalized_hermitian_eig_max(a: &CMat, b: &CMat) -> Result<(f64, CVec)> {
    let chol = cholesky(b, "generalized eigensolver B factor")?;
    let l = chol.l();
    // M = L^{-1} A L^{-H}
    let mut m = a.clone();
    l.solve_lower_triangular_mut(&mut m);
    let mut mt = m.adjoint();
    l.solve_lower_triangular_mut(&mut mt);
    let m = mt.adjoint();
    // Enforce exact Hermitian symmetry before the eigensolver.
    let m = (&m + m.adjoint()).scale(0.5);
    let (vals, vecs) = hermitian_eig(&m);
    let top = vals.len() - 1;
    let y: CVec = vecs.column(top).into_owned();
    // x = L^{-H} y
    let mut x = y;
    l.adjoint().solve_upper_triangular_mut(&mut x);
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::SingularSystem("generalized eigenvector"));
    }
    Ok((vals[top], x.unscale(norm)))
}

/// Draws `n` i.i.d. entries of a circularly-symmetric complex Gaussian with
/// unit variance per complex entry (real and imaginary parts each N(0, 1/2)).
pub fn standard_cn<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// Samples `x ~ CN(0, S)` given a square root `S^{1/2}` of the covariance.
pub fn sample_cn<R: Rng + ?Sized>(cov_sqrt: &CMat, rng: &mut R) -> CVec {
    cov_sqrt * standard_cn(cov_sqrt.ncols(), rng)
}

/// Solves `(W - u u^H / beta) x = y` for each right-hand side, given the
/// Cholesky factor of `W`, via the Sherman-Morrison downdate. Requires
/// `W - u u^H / beta` positive definite, which holds for the solver's
/// interference matrices by construction.
pub struct RankOneDowndate<'a> {
    chol: &'a Cholesky<Complex64, Dyn>,
    w_inv_u: CVec,
    denom: f64,
}

impl<'a> RankOneDowndate<'a> {
    pub fn new(chol: &'a Cholesky<Complex64, Dyn>, u: &CVec, beta: f64) -> Result<Self> {
        let w_inv_u = chol.solve(u);
        let denom = beta - inner(u, &w_inv_u).re;
        if denom <= 0.0 {
            return Err(Error::SingularSystem("rank-one downdate lost definiteness"));
        }
        Ok(Self { chol, w_inv_u, denom })
    }

    pub fn solve(&self, y: &CVec) -> CVec {
        let w_inv_y = self.chol.solve(y);
        let coeff = inner(&self.w_inv_u, y) / Complex64::new(self.denom, 0.0);
        &w_inv_y + &self.w_inv_u * coeff
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let g = CMat::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        &g + g.adjoint()
    }

    fn random_hpd(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let g = CMat::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        &g * g.adjoint() + CMat::identity(n, n).scale(0.5)
    }

    #[test]
    fn hermitian_eig_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_hermitian(6, &mut rng);
        let (vals, vecs) = hermitian_eig(&m);
        let lambda = CMat::from_diagonal(&vals.map(|v| Complex64::new(v, 0.0)));
        let back = &vecs * lambda * vecs.adjoint();
        assert!((&m - back).norm() < 1e-10 * m.norm());
        for i in 1..vals.len() {
            assert!(vals[i] >= vals[i - 1]);
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_hpd(5, &mut rng);
        let s = psd_sqrt(&g);
        assert!((&s * s.adjoint() - &g).norm() < 1e-10 * g.norm());
    }

    #[test]
    fn generalized_eig_solves_pencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_hpd(5, &mut rng);
        let b = random_hpd(5, &mut rng);
        let (val, vec) = generalized_hermitian_eig_max(&a, &b).unwrap();
        let lhs = &a * &vec;
        let rhs = (&b * &vec).scale(val);
        assert!((lhs - rhs).norm() < 1e-8 * a.norm());
        // It is the maximum: Rayleigh quotient at the eigenvector dominates random probes.
        for _ in 0..10 {
            let x = standard_cn(5, &mut rng);
            let q = quad_form(&a, &x) / quad_form(&b, &x);
            assert!(q <= val + 1e-8);
        }
    }

    #[test]
    fn standard_cn_has_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 200_000;
        let x = standard_cn(n, &mut rng);
        let var = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.02, "var={var}");
    }

    #[test]
    fn rank_one_downdate_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_hpd(6, &mut rng);
        let u = standard_cn(6, &mut rng);
        let beta = 4.0 * u.norm_squared(); // keeps W - uu^H/beta positive definite
        let chol = cholesky(&w, "test").unwrap();
        let down = RankOneDowndate::new(&chol, &u, beta).unwrap();
        let y = standard_cn(6, &mut rng);
        let x = down.solve(&y);
        let m = &w - (&u * u.adjoint()).unscale(beta);
        assert!((m * &x - &y).norm() < 1e-9 * y.norm());
    }
}
