//! Krylov-subspace solvers on matrix-free Hermitian maps: a restarted block
//! Lanczos eigensolver and a Lanczos propagator for `exp(-itA) ψ`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, LinearMap, C64, ZERO};

#[derive(Debug, Clone)]
pub struct EigOptions {
    /// Absolute bound on `‖A y − θ y‖` for every returned pair.
    pub tol: f64,
    /// Largest subspace kept before a restart; `None` picks from `k`.
    pub max_basis: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_basis: None,
            max_restarts: 3000,
            seed: 0x5151_7a3d,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

struct Subspace<'a> {
    map: &'a dyn LinearMap,
    v: Vec<Vec<C64>>,
    w: Vec<Vec<C64>>,
    t: DMatrix<C64>,
    matvecs: usize,
}

impl<'a> Subspace<'a> {
    fn new(map: &'a dyn LinearMap, cap: usize) -> Self {
        Self {
            map,
            v: Vec::with_capacity(cap),
            w: Vec::with_capacity(cap),
            t: DMatrix::zeros(cap, cap),
            matvecs: 0,
        }
    }

    /// Orthogonalizes `q` against the basis and appends it unless it is
    /// numerically dependent. Returns whether it was added.
    fn push(&mut self, mut q: Vec<C64>) -> bool {
        let before = linalg::norm(&q);
        if before == 0.0 {
            return false;
        }
        linalg::orthogonalize(&mut q, &self.v);
        let after = linalg::norm(&q);
        if after <= 1e-12 * before || after < 1e-300 {
            return false;
        }
        linalg::scale(C64::new(1.0 / after, 0.0), &mut q);
        let mut aq = vec![ZERO; q.len()];
        self.map.apply(&q, &mut aq);
        self.matvecs += 1;
        let n = self.v.len();
        for i in 0..n {
            let x = linalg::dot(&self.v[i], &aq);
            self.t[(i, n)] = x;
            self.t[(n, i)] = x.conj();
        }
        self.t[(n, n)] = C64::new(linalg::dot(&q, &aq).re, 0.0);
        self.v.push(q);
        self.w.push(aq);
        true
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    fn combine(basis: &[Vec<C64>], coeffs: impl Iterator<Item = C64>, dim: usize) -> Vec<C64> {
        let mut out = vec![ZERO; dim];
        for (b, c) in basis.iter().zip(coeffs) {
            linalg::axpy(c, b, &mut out);
        }
        out
    }
}

/// The `k` lowest eigenpairs of a Hermitian map.
///
/// The search space starts from `k` seeded random vectors, grows by images
/// of existing basis vectors with two-pass Gram-Schmidt, and is compressed
/// onto its lowest Ritz vectors when full.
pub fn lowest_eigenpairs(map: &dyn LinearMap, k: usize, opts: &EigOptions) -> Result<Eigenpairs> {
    let n = map.dim();
    if k == 0 || n == 0 {
        return Ok(Eigenpairs { values: vec![], vectors: vec![], residuals: vec![], matvecs: 0 });
    }
    let k = k.min(n);
    let m_max = opts.max_basis.unwrap_or((3 * k + 24).max(48)).max(k + 4).min(n);
    let keep = (m_max / 2).max(k + 2).min(m_max.saturating_sub(1)).max(k);
    let mut rng = linalg::seeded_rng(opts.seed);
    let mut sub = Subspace::new(map, m_max);
    while sub.len() < k {
        let r = linalg::random_unit_vector(n, &mut rng);
        sub.push(r);
    }
    let mut ptr = 0usize;
    let mut worst = f64::INFINITY;
    for _cycle in 0..=opts.max_restarts {
        while sub.len() < m_max {
            let cand = if ptr < sub.len() {
                ptr += 1;
                sub.w[ptr - 1].clone()
            } else {
                linalg::random_unit_vector(n, &mut rng)
            };
            sub.push(cand);
        }
        let m = sub.len();
        let proj = sub.t.view((0, 0), (m, m)).into_owned();
        let (theta, s) = linalg::eigh(&proj);
        let ritz = |i: usize, basis: &[Vec<C64>]| Subspace::combine(basis, s.column(i).iter().copied(), n);
        let mut residuals = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        for i in 0..k {
            let y = ritz(i, &sub.v);
            let mut r = ritz(i, &sub.w);
            linalg::axpy(C64::new(-theta[i], 0.0), &y, &mut r);
            residuals.push(linalg::norm(&r));
            vectors.push(y);
        }
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= opts.tol || m == n {
            for y in vectors.iter_mut() {
                linalg::normalize(y);
            }
            return Ok(Eigenpairs {
                values: theta[..k].to_vec(),
                vectors,
                residuals,
                matvecs: sub.matvecs,
            });
        }
        // thick restart on the lowest `keep` Ritz vectors
        let new_v: Vec<Vec<C64>> = (0..keep).map(|i| ritz(i, &sub.v)).collect();
        let new_w: Vec<Vec<C64>> = (0..keep).map(|i| ritz(i, &sub.w)).collect();
        sub.t.fill(ZERO);
        for (i, th) in theta.iter().take(keep).enumerate() {
            sub.t[(i, i)] = C64::new(*th, 0.0);
        }
        sub.v = new_v;
        sub.w = new_w;
        ptr = 0;
    }
    Err(Error::NonConvergence {
        what: "lanczos eigensolver",
        iterations: opts.max_restarts,
        residual: worst,
    })
}

/// Extreme eigenvalues of a Hermitian map.
#[derive(Debug, Clone, Copy)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
    /// Residual-norm bounds for the two Ritz values.
    pub residual: f64,
    pub matvecs: usize,
}

impl Extremes {
    pub fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

/// Smallest and largest eigenvalue from one Lanczos run with full
/// reorthogonalization, stopped when both Ritz residuals fall below `tol`.
pub fn extreme_eigenvalues(map: &dyn LinearMap, tol: f64, max_dim: usize, seed: u64) -> Result<Extremes> {
    extreme_eigenvalues_by(map, &|_| tol, max_dim, seed)
}

/// Like [`extreme_eigenvalues`], with a stopping tolerance recomputed from the
/// current Ritz estimates after every step.
pub fn extreme_eigenvalues_by(
    map: &dyn LinearMap,
    tol: &dyn Fn(&Extremes) -> f64,
    max_dim: usize,
    seed: u64,
) -> Result<Extremes> {
    let n = map.dim();
    if n == 0 {
        return Ok(Extremes { min: 0.0, max: 0.0, residual: 0.0, matvecs: 0 });
    }
    let cap = max_dim.min(n).max(1);
    let mut rng = linalg::seeded_rng(seed);
    let mut q: Vec<Vec<C64>> = vec![linalg::random_unit_vector(n, &mut rng)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![ZERO; n];
    let mut last = Extremes { min: 0.0, max: 0.0, residual: f64::INFINITY, matvecs: 0 };
    loop {
        let j = q.len() - 1;
        map.apply(&q[j], &mut w);
        last.matvecs += 1;
        alpha.push(linalg::dot(&q[j], &w).re);
        linalg::orthogonalize(&mut w, &q);
        let b = linalg::norm(&w);
        let m = alpha.len();
        let tri = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = tri.symmetric_eigen();
        let (mut imin, mut imax) = (0, 0);
        for i in 0..m {
            if eig.eigenvalues[i] < eig.eigenvalues[imin] {
                imin = i;
            }
            if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                imax = i;
            }
        }
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let exhausted = b <= 1e-12 * scale.max(1e-300) || m == n;
        let res = if exhausted {
            0.0
        } else {
            b * eig.eigenvectors[(m - 1, imin)].abs().max(eig.eigenvectors[(m - 1, imax)].abs())
        };
        last.min = eig.eigenvalues[imin];
        last.max = eig.eigenvalues[imax];
        last.residual = res;
        if res <= tol(&last) || exhausted {
            return Ok(last);
        }
        if m == cap {
            return Err(Error::NonConvergence { what: "extreme eigenvalue lanczos", iterations: m, residual: res });
        }
        beta.push(b);
        let mut next = w.clone();
        linalg::scale(C64::new(1.0 / b, 0.0), &mut next);
        q.push(next);
    }
}

/// Result of a Krylov propagation.
#[derive(Debug, Clone)]
pub struct Propagated {
    pub state: Vec<C64>,
    /// Sum of the per-step truncation estimates.
    pub error_bound: f64,
    pub steps: usize,
}

pub const KRYLOV_DIM: usize = 30;

/// `exp(-i t A) ψ` for Hermitian `A`, with the accumulated truncation
/// estimate kept below `tol`.
pub fn expm_apply(map: &dyn LinearMap, psi: &[C64], t: f64, tol: f64) -> Result<Propagated> {
    if tol <= 0.0 {
        return Err(Error::Precondition("propagation tolerance must be positive".into()));
    }
    let n = map.dim();
    let mut state = psi.to_vec();
    if t == 0.0 || linalg::norm(psi) == 0.0 {
        return Ok(Propagated { state, error_bound: 0.0, steps: 0 });
    }
    let total = t.abs();
    let dir = t.signum();
    let mut done = 0.0f64;
    let mut error_bound = 0.0;
    let mut steps = 0usize;
    let m_cap = KRYLOV_DIM.min(n);
    while total - done > 1e-15 * total {
        let nrm = linalg::norm(&state);
        let mut q: Vec<Vec<C64>> = Vec::with_capacity(m_cap);
        let mut alpha: Vec<f64> = Vec::with_capacity(m_cap);
        let mut beta: Vec<f64> = Vec::with_capacity(m_cap);
        let mut v0 = state.clone();
        linalg::scale(C64::new(1.0 / nrm, 0.0), &mut v0);
        q.push(v0);
        let mut w = vec![ZERO; n];
        let mut last_beta = 0.0;
        let mut exact = false;
        loop {
            let j = q.len() - 1;
            map.apply(&q[j], &mut w);
            let a = linalg::dot(&q[j], &w).re;
            alpha.push(a);
            linalg::orthogonalize(&mut w, &q);
            let b = linalg::norm(&w);
            let scale = alpha.iter().fold(1e-300f64, |acc, x| acc.max(x.abs())).max(beta.iter().fold(0.0, |acc, x| acc.max(*x)));
            if b <= 1e-13 * scale {
                exact = true;
                break;
            }
            if q.len() == m_cap {
                last_beta = b;
                break;
            }
            beta.push(b);
            let mut next = w.clone();
            linalg::scale(C64::new(1.0 / b, 0.0), &mut next);
            q.push(next);
        }
        let m = alpha.len();
        let tri = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = tri.symmetric_eigen();
        let propagate = |tau: f64| -> Vec<C64> {
            (0..m)
                .map(|r| {
                    (0..m)
                        .map(|c| {
                            let s0 = eig.eigenvectors[(0, c)];
                            let phase = C64::from_polar(1.0, -tau * eig.eigenvalues[c]);
                            phase * (eig.eigenvectors[(r, c)] * s0)
                        })
                        .sum()
                })
                .collect()
        };
        let remaining = total - done;
        let mut tau = remaining;
        let (y, err) = loop {
            let y = propagate(dir * tau);
            let err = if exact { 0.0 } else { last_beta * y[m - 1].norm() * nrm };
            let budget = tol * tau / total;
            if err <= budget {
                break (y, err);
            }
            let shrink = 0.9 * (budget / err).powf(1.0 / m as f64);
            tau *= shrink.clamp(0.1, 0.5);
            if tau < 1e-13 * total.max(1.0) {
                return Err(Error::StepUnderflow(dir * done));
            }
        };
        let mut next = vec![ZERO; n];
        for (qi, yi) in q.iter().zip(&y) {
            linalg::axpy(yi * nrm, qi, &mut next);
        }
        state = next;
        error_bound += err;
        done += tau;
        steps += 1;
    }
    Ok(Propagated { state, error_bound, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_hermitian, seeded_rng, FnMap};

    fn dense_map(m: &DMatrix<C64>) -> FnMap<impl Fn(&[C64], &mut [C64]) + Sync + '_> {
        FnMap::new(m.nrows(), move |x: &[C64], y: &mut [C64]| {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = (0..x.len()).map(|c| m[(r, c)] * x[c]).sum();
            }
        })
    }

    #[test]
    fn lanczos_matches_dense_on_random_matrix() {
        let mut rng = seeded_rng(11);
        let h = random_hermitian(300, &mut rng);
        let dense = linalg::eigvalsh(&h);
        let map = dense_map(&h);
        let res = lowest_eigenpairs(&map, 4, &EigOptions::default()).unwrap();
        for i in 0..4 {
            assert!((res.values[i] - dense[i]).abs() < 1e-9, "{i}");
            assert!(res.residuals[i] <= 1e-9);
        }
    }

    #[test]
    fn lanczos_resolves_exact_degeneracy() {
        let diag: Vec<f64> = (0..200).map(|i| if i < 3 { -1.0 } else { i as f64 / 10.0 }).collect();
        let m = DMatrix::from_fn(200, 200, |r, c| if r == c { C64::new(diag[r], 0.0) } else { ZERO });
        let res = lowest_eigenpairs(&dense_map(&m), 4, &EigOptions::default()).unwrap();
        assert!(res.values[..3].iter().all(|v| (v + 1.0).abs() < 1e-10));
        assert!((res.values[3] - 0.3).abs() < 1e-10);
    }

    #[test]
    fn extremes_match_dense() {
        let mut rng = seeded_rng(21);
        let h = random_hermitian(150, &mut rng);
        let vals = linalg::eigvalsh(&h);
        let ex = extreme_eigenvalues(&dense_map(&h), 1e-10, 150, 1).unwrap();
        assert!((ex.min - vals[0]).abs() < 1e-9);
        assert!((ex.max - vals[149]).abs() < 1e-9);
        let zero = DMatrix::<C64>::zeros(10, 10);
        assert_eq!(extreme_eigenvalues(&dense_map(&zero), 1e-10, 10, 1).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn propagation_preserves_norm_and_phases() {
        let mut rng = seeded_rng(5);
        let h = random_hermitian(120, &mut rng) * C64::new(4.0, 0.0);
        let (vals, vecs) = linalg::eigh(&h);
        let map = dense_map(&h);
        let v: Vec<C64> = vecs.column(7).iter().copied().collect();
        let out = expm_apply(&map, &v, 3.0, 1e-12).unwrap();
        let phase = C64::from_polar(1.0, -3.0 * vals[7]);
        let diff: f64 = out.state.iter().zip(&v).map(|(a, b)| (a - phase * b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
        let psi = linalg::random_unit_vector(120, &mut rng);
        let out = expm_apply(&map, &psi, 10.0, 1e-12).unwrap();
        assert!((linalg::norm(&out.state) - 1.0).abs() < 1e-12);
        let back = expm_apply(&map, &out.state, -10.0, 1e-12).unwrap();
        let err: f64 = back.state.iter().zip(&psi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }
}
