//! Dense Hermitian helpers shared by every module.

use crate::{CMat, CVec, C64};
use nalgebra::linalg::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermEig {
    pub fn new(m: &CMat) -> Self {
        let sym = (m + m.adjoint()).scale(0.5);
        let n = sym.nrows();
        if n == 0 {
            return HermEig { values: vec![], vectors: CMat::zeros(0, 0) };
        }
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        HermEig { values, vectors }
    }

    /// `V diag(f(μ)) V*`.
    pub fn map<F: Fn(f64) -> C64>(&self, f: F) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (c, &mu) in self.values.iter().enumerate() {
            let w = f(mu);
            for r in 0..n {
                scaled[(r, c)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn map_real<F: Fn(f64) -> f64>(&self, f: F) -> CMat {
        self.map(|x| C64::new(f(x), 0.0))
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vnorm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    HermEig::new(&(m.adjoint() * m)).max().max(0.0).sqrt()
}

pub fn unitarity_defect(m: &CMat) -> f64 {
    frob(&(m.adjoint() * m - identity(m.nrows())))
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    frob(&(m - m.adjoint()))
}

pub fn max_imag(m: &CMat) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// Haar-distributed element of `O(r)` (real) or `U(r)` (complex): QR of a
/// Gaussian matrix with the diagonal phases of `R` pushed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(r: usize, complex: bool, rng: &mut R) -> CMat {
    let z = CMat::from_fn(r, r, |_, _| {
        if complex {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            C64::new(a, b)
        } else {
            C64::new(rng.sample(StandardNormal), 0.0)
        }
    });
    let qr = z.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..r {
        let d = rr[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..r {
            q[(i, j)] *= phase;
        }
    }
    if !complex {
        q.iter_mut().for_each(|z| z.im = 0.0);
    }
    q
}

/// Random Hermitian matrix with spectrum in `[lo, hi]`.
pub fn random_hermitian<R: Rng + ?Sized>(r: usize, complex: bool, lo: f64, hi: f64, rng: &mut R) -> CMat {
    let u = haar_unitary(r, complex, rng);
    let d = CMat::from_fn(r, r, |i, j| if i == j { c(lo + (hi - lo) * rng.random::<f64>()) } else { c(0.0) });
    let m = &u * d * u.adjoint();
    (m.clone() + m.adjoint()).scale(0.5)
}

/// A factor `A` with `A A* = g` for a positive semi-definite Hermitian `g`:
/// lower Cholesky, falling back to a clipped eigendecomposition.
pub fn psd_factor(g: &CMat) -> CMat {
    let sym = (g + g.adjoint()).scale(0.5);
    if let Some(ch) = sym.clone().cholesky() {
        return ch.l();
    }
    let eig = HermEig::new(&sym);
    let n = sym.nrows();
    let mut a = eig.vectors.clone();
    for (j, &mu) in eig.values.iter().enumerate() {
        let s = if mu > 1e-14 { mu.sqrt() } else { 0.0 };
        for i in 0..n {
            a[(i, j)] *= s;
        }
    }
    a
}

/// Standard inner product, antilinear in the first slot.
pub fn dot(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn block(v: &CVec, x: usize, r: usize) -> CVec {
    v.rows(x * r, r).into_owned()
}

pub fn set_block(v: &mut CVec, x: usize, r: usize, b: &CVec) {
    v.rows_mut(x * r, r).copy_from(b);
}

pub fn mat_block(m: &CMat, x: usize, y: usize, r: usize) -> CMat {
    m.view((x * r, y * r), (r, r)).into_owned()
}

/// Block-diagonal matrix from equally sized square blocks.
pub fn block_diag(blocks: &[CMat]) -> CMat {
    let r = blocks.first().map_or(0, |b| b.nrows());
    let n = blocks.len() * r;
    let mut m = CMat::zeros(n, n);
    for (k, b) in blocks.iter().enumerate() {
        m.view_mut((k * r, k * r), (r, r)).copy_from(b);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_is_unitary_and_real_when_asked() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in 1..5 {
            let u = haar_unitary(r, true, &mut rng);
            assert!(unitarity_defect(&u) < 1e-12);
            let o = haar_unitary(r, false, &mut rng);
            assert!(unitarity_defect(&o) < 1e-12);
            assert_eq!(max_imag(&o), 0.0);
        }
    }

    #[test]
    fn eig_map_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(4, true, -1.0, 2.0, &mut rng);
        let e = HermEig::new(&h);
        assert!(frob(&(e.map_real(|x| x) - &h)) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(e.min() >= -1.0 - 1e-12 && e.max() <= 2.0 + 1e-12);
    }

    #[test]
    fn psd_factor_falls_back_on_singular_input() {
        let v = CVec::from_vec(vec![c(1.0), C64::new(0.0, 1.0), c(2.0)]);
        let g = &v * v.adjoint();
        let a = psd_factor(&g);
        assert!(frob(&(&a * a.adjoint() - g)) < 1e-10);
    }
}
