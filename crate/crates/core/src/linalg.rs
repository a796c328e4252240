//! Small numerical kernels shared by the solvers: deterministic vector
//! arithmetic, dense Hermitian eigendecomposition and matrix sign functions.
//!
//! All reductions here run sequentially in index order so that results are
//! bit-reproducible across runs and thread counts.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// A linear map on `C^dim`, applied matrix-free.
pub trait LinearMap: Sync {
    fn dim(&self) -> usize;
    /// Writes `A x` into `y` (overwriting it).
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// Closure-backed linear map.
pub struct FnMap<F> {
    dim: usize,
    f: F,
}

impl<F> FnMap<F>
where
    F: Fn(&[C64], &mut [C64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearMap for FnMap<F>
where
    F: Fn(&[C64], &mut [C64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        (self.f)(x, y)
    }
}

/// `<a, b>` with the first argument conjugated.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Normalizes in place and returns the previous norm.
pub fn normalize(x: &mut [C64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        scale(C64::new(1.0 / n, 0.0), x);
    }
    n
}

/// Two passes of classical Gram-Schmidt against an orthonormal set.
pub fn orthogonalize(x: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, x);
            axpy(-c, b, x);
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian-ish complex vector from a seeded generator, unit norm.
pub fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    normalize(&mut v);
    v
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Matrices with vanishing imaginary parts take the real symmetric path.
pub fn eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh needs a square matrix");
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let real = m.iter().all(|z| z.im == 0.0);
    let (vals, vecs) = if real {
        let r = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
        let e = r.symmetric_eigen();
        (
            e.eigenvalues.iter().copied().collect::<Vec<f64>>(),
            e.eigenvectors.map(|x| C64::new(x, 0.0)),
        )
    } else {
        let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let e = h.symmetric_eigen();
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    (sorted_vals, sorted_vecs)
}

pub fn eigvalsh(m: &DMatrix<C64>) -> Vec<f64> {
    eigh(m).0
}

/// Matrix sign of a Hermitian matrix; zero eigenvalues map to +1.
pub fn hermitian_sign(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (vals, vecs) = eigh(m);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let signs: Vec<f64> = vals
        .iter()
        .map(|&v| if v >= -1e-14 * scale { 1.0 } else { -1.0 })
        .collect();
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, s) in signs.iter().enumerate() {
        let col = vecs.column(k);
        out += (col * col.adjoint()) * C64::new(*s, 0.0);
    }
    out
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &DMatrix<C64>) -> f64 {
    eigvalsh(m).iter().map(|v| v.abs()).sum()
}

/// Spectral norm of a dense matrix via its singular values.
pub fn spectral_norm_dense(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    eigvalsh(&gram).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Von Neumann entropy in bits of a spectrum; entries below 1e-14 count as zero.
pub fn entropy_bits(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&p| p > 1e-14)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Kronecker product `a ⊗ b` with `a` on the more significant index.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Ordinary least squares `y = intercept + slope x`; returns (slope, intercept, r²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Some((slope, intercept, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let mut rng = seeded_rng(3);
        let h = random_hermitian(6, &mut rng);
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            6,
            vals.iter().map(|v| C64::new(*v, 0.0)),
        ));
        let back = &vecs * d * vecs.adjoint();
        assert!((back - h).norm() < 1e-10);
    }

    #[test]
    fn sign_squares_to_identity() {
        let mut rng = seeded_rng(9);
        let h = random_hermitian(5, &mut rng);
        let s = hermitian_sign(&h);
        let id = DMatrix::<C64>::identity(5, 5);
        assert!((&s * &s - id).norm() < 1e-10);
        // zero matrix goes to +1
        let z = hermitian_sign(&DMatrix::zeros(3, 3));
        assert!((z - DMatrix::<C64>::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let (s, b, r2) = linear_fit(&x, &y).unwrap();
        assert!((s + 2.0).abs() < 1e-12 && (b - 0.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
