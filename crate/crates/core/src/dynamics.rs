//! Real-time evolution and light-cone measurements.
//!
//! Commutator norms are never formed from a dense `Q(t)`. The map
//! `x ↦ [Q(t), R] x` is applied through four Krylov propagations and its
//! norm comes from a Lanczos run on that map (or on `C†C` when the
//! commutator is not normal).

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{self, Propagated};
use crate::linalg::{self, FnMap, C64, ZERO};
use crate::ops::local::LocalOperator;
use crate::ops::sparse::{embed_in, GlobalOperator};
use crate::ops::symmetry::parity_transform;

/// Largest dimension accepted by [`heisenberg_operator`].
pub const DENSE_EVOLUTION_CAP: usize = 4096;

/// Default front threshold, relative to `‖Q‖‖R‖`.
pub const DEFAULT_FRONT_THRESHOLD: f64 = 0.2;

/// Norms below this fraction of `‖Q‖‖R‖` are treated as numerical zeros in
/// the decay fit.
pub const NOISE_FLOOR: f64 = 1e-13;

/// `exp(-iHt) ψ` for a unit vector `ψ`.
pub fn evolve_state(h: &GlobalOperator, psi: &[C64], t: f64, tol: f64) -> Result<Propagated> {
    if psi.len() != h.dimension() {
        return Err(Error::Precondition("state length does not match the operator".into()));
    }
    if (linalg::norm(psi) - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition("state must be normalized".into()));
    }
    krylov::expm_apply(h, psi, t, tol)
}

/// `e^{iHt} Q e^{-iHt}` by dense diagonalization.
pub fn heisenberg_operator(h: &GlobalOperator, q: &GlobalOperator, t: f64) -> Result<GlobalOperator> {
    let n = h.dimension();
    if n > DENSE_EVOLUTION_CAP {
        return Err(Error::DimensionCap { dim: n, cap: DENSE_EVOLUTION_CAP });
    }
    if h.tag() != q.tag() {
        return Err(Error::BasisMismatch { left: h.tag().to_string(), right: q.tag().to_string() });
    }
    let (vals, vecs) = linalg::eigh(&h.to_dense());
    let phases = DMatrix::from_fn(n, n, |r, c| if r == c { C64::from_polar(1.0, -vals[r] * t) } else { ZERO });
    let u = &vecs * phases * vecs.adjoint();
    let qt = u.adjoint() * q.to_dense() * &u;
    GlobalOperator::from_dense(h.basis().clone(), &qt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightConeSample {
    pub distance: usize,
    pub time: f64,
    pub norm_value: f64,
    pub method_error: f64,
    /// `‖Q‖‖R‖`, the natural unit of `norm_value`.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrOptions {
    /// Target accuracy of the norm.
    pub tol: f64,
    pub max_lanczos: usize,
    pub seed: u64,
}

impl Default for LrOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_lanczos: 150, seed: 0x11c0_2e55 }
    }
}

fn is_odd(op: &LocalOperator) -> bool {
    let flipped = parity_transform(op);
    flipped.approx_eq(&op.scaled(-linalg::ONE), 1e-12) && op.matrix().iter().any(|z| z.norm() > 1e-12)
}

/// Distance between the supports of `Q` and `R`. For odd (fermionic)
/// operators the Jordan-Wigner string is ignored and the operators are
/// located by their highest site.
fn support_distance(q: &LocalOperator, r: &LocalOperator, twisted: bool) -> usize {
    if twisted {
        let a = q.max_site().unwrap_or(0);
        let b = r.max_site().unwrap_or(0);
        return a.abs_diff(b);
    }
    let mut best = usize::MAX;
    for &x in q.support() {
        for &y in r.support() {
            best = best.min(x.abs_diff(y));
        }
    }
    if best == usize::MAX {
        0
    } else {
        best
    }
}

/// `‖[Q(t), R]‖`, or `‖{Q(t), R}‖` when `twisted`.
pub fn lr_norm(
    h: &GlobalOperator,
    q: &LocalOperator,
    r: &LocalOperator,
    t: f64,
    twisted: bool,
    opts: &LrOptions,
) -> Result<LightConeSample> {
    if twisted && !(is_odd(q) && is_odd(r)) {
        return Err(Error::Precondition("twisted commutators need odd fermionic Q and R".into()));
    }
    let n = h.dimension();
    let qg = embed_in(q, h.basis().clone())?;
    let rg = embed_in(r, h.basis().clone())?;
    let qn = q.norm();
    let rn = r.norm();
    let scale = qn * rn;
    let distance = support_distance(q, r, twisted);
    if scale == 0.0 {
        return Ok(LightConeSample { distance, time: t, norm_value: 0.0, method_error: 0.0, scale });
    }
    let sign = if twisted { 1.0 } else { -1.0 };
    let etol = opts.tol * 1e-1;
    let errors = std::sync::Mutex::new(0.0f64);
    let failure = std::sync::Mutex::new(None::<Error>);
    let evolve = |x: &[C64], time: f64| -> Vec<C64> {
        match krylov::expm_apply(h, x, time, etol * linalg::norm(x).max(1e-300)) {
            Ok(p) => {
                *errors.lock().expect("error accumulator") += p.error_bound;
                p.state
            }
            Err(e) => {
                failure.lock().expect("failure slot").get_or_insert(e);
                vec![ZERO; x.len()]
            }
        }
    };
    // Q(t) x = e^{iHt} Q e^{-iHt} x
    let qt = |x: &[C64], op: &GlobalOperator| -> Vec<C64> {
        let u = evolve(x, t);
        let qu = op.apply_vec(&u);
        evolve(&qu, -t)
    };
    // C x = Q(t) R x + sign R Q(t) x
    let apply_c = |x: &[C64], qop: &GlobalOperator, rop: &GlobalOperator| -> Vec<C64> {
        let a = qt(&rop.apply_vec(x), qop);
        let b = rop.apply_vec(&qt(x, qop));
        a.iter().zip(&b).map(|(u, v)| u + v * sign).collect()
    };
    let hermitian_pair = q.is_hermitian(1e-12) && r.is_hermitian(1e-12);
    let lanczos_tol = opts.tol * scale;
    let norm_value = if hermitian_pair {
        // [A, B] is anti-Hermitian and {A, B} Hermitian for Hermitian A, B
        let phase = if twisted { linalg::ONE } else { linalg::I };
        let map = FnMap::new(n, |x: &[C64], y: &mut [C64]| {
            let c = apply_c(x, &qg, &rg);
            for (yi, ci) in y.iter_mut().zip(c) {
                *yi = phase * ci;
            }
        });
        krylov::extreme_eigenvalues(&map, lanczos_tol, opts.max_lanczos, opts.seed)?.max_abs()
    } else {
        let qd = qg.adjoint();
        let rd = rg.adjoint();
        let map = FnMap::new(n, |x: &[C64], y: &mut [C64]| {
            let c = apply_c(x, &qg, &rg);
            // C† = R† Q(t)† + sign Q(t)† R†, with Q(t)† = e^{iHt} Q† e^{-iHt}
            let a = rd.apply_vec(&qt(&c, &qd));
            let b = qt(&rd.apply_vec(&c), &qd);
            let alt: Vec<C64> = a.iter().zip(&b).map(|(u, v)| u + v * sign).collect();
            y.copy_from_slice(&alt);
        });
        // an error δ in ‖C‖² moves ‖C‖ by at most min(√δ, δ / 2‖C‖)
        let target = |ex: &krylov::Extremes| lanczos_tol * (2.0 * ex.max.max(0.0).sqrt() + lanczos_tol);
        let ex = krylov::extreme_eigenvalues_by(&map, &target, opts.max_lanczos, opts.seed)?;
        ex.max.max(0.0).sqrt()
    };
    if let Some(e) = failure.into_inner().expect("failure slot") {
        return Err(e);
    }
    let accumulated = errors.into_inner().expect("error accumulator");
    Ok(LightConeSample {
        distance,
        time: t,
        norm_value: norm_value.min(2.0 * scale),
        method_error: 2.0 * scale * accumulated + lanczos_tol,
        scale,
    })
}

/// Distances and times for a light-cone surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrGrid {
    pub distances: Vec<usize>,
    pub times: Vec<f64>,
}

impl LrGrid {
    /// `t ∈ {0.25, 0.5, …, 4.0}` and `j ∈ [1, L/2 − 1]`.
    pub fn default_for(length: usize) -> Self {
        Self {
            distances: (1..(length / 2).max(2)).collect(),
            times: (1..=16).map(|i| i as f64 * 0.25).collect(),
        }
    }
}

/// Samples of `‖[Q(t), τ_j(R)]‖` over a grid, with `R` given on site 0 and
/// translated to each distance by `place`.
///
/// With `stop_at_front`, each distance is scanned in increasing time only
/// until the norm first reaches `threshold · ‖Q‖‖R‖`; later times inside the
/// cone carry no information for the front or the decay fit.
pub fn lr_surface(
    h: &GlobalOperator,
    q: &LocalOperator,
    place: &(dyn Fn(usize) -> Result<LocalOperator> + Sync),
    grid: &LrGrid,
    twisted: bool,
    stop_at_front: Option<f64>,
    opts: &LrOptions,
) -> Result<Vec<LightConeSample>> {
    let mut times = grid.times.clone();
    times.sort_by(f64::total_cmp);
    let per_distance: Vec<Result<Vec<LightConeSample>>> = grid
        .distances
        .par_iter()
        .map(|&j| {
            let r = place(j)?;
            let mut out = Vec::new();
            for &t in &times {
                let s = lr_norm(h, q, &r, t, twisted, opts)?;
                let reached = stop_at_front.is_some_and(|th| s.norm_value >= th * s.scale);
                out.push(s);
                if reached {
                    break;
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_distance {
        all.extend(r?);
    }
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightConeFit {
    /// Spatial decay rate outside the cone.
    pub a: f64,
    /// Front velocity.
    pub v: f64,
    /// Prefactor in `C e^{-a (j - v t)}`.
    pub c: f64,
    /// R² of the log-linear decay fit.
    pub fit_quality: f64,
    /// R² of the front fit.
    pub front_quality: f64,
    /// Time at which the decay was fitted.
    pub fit_time: f64,
    /// Distance offset of the front, `j ≈ v t + front_offset`.
    pub front_offset: f64,
}

/// Fits the front velocity from arrival times and the decay rate from the
/// spatial profile outside the cone.
pub fn light_cone_fit(samples: &[LightConeSample], threshold: f64) -> Result<LightConeFit> {
    if samples.is_empty() {
        return Err(Error::Fit("no samples".into()));
    }
    let mut distances: Vec<usize> = samples.iter().map(|s| s.distance).collect();
    distances.sort_unstable();
    distances.dedup();
    // arrival time per distance, interpolated in log norm
    let mut arr_j = Vec::new();
    let mut arr_t = Vec::new();
    for &j in &distances {
        let mut row: Vec<&LightConeSample> = samples.iter().filter(|s| s.distance == j).collect();
        row.sort_by(|a, b| a.time.total_cmp(&b.time));
        let Some(k) = row.iter().position(|s| s.norm_value >= threshold * s.scale) else {
            continue;
        };
        if k == 0 {
            // already inside the cone at the first time; arrival unresolved
            continue;
        }
        let hit = row[k];
        let level = threshold * hit.scale;
        let t_arr = if row[k - 1].norm_value > 0.0 {
            let prev = row[k - 1];
            let (l0, l1) = (prev.norm_value.ln(), hit.norm_value.ln());
            if l1 > l0 {
                prev.time + (level.ln() - l0) / (l1 - l0) * (hit.time - prev.time)
            } else {
                hit.time
            }
        } else {
            hit.time
        };
        arr_j.push(j as f64);
        arr_t.push(t_arr);
    }
    if arr_j.is_empty() {
        return Err(Error::Fit("no front: no sample reaches the threshold".into()));
    }
    if arr_j.len() < 2 {
        return Err(Error::Fit("front reached at fewer than two distances".into()));
    }
    let (v, offset, front_r2) =
        linalg::linear_fit(&arr_t, &arr_j).ok_or_else(|| Error::Fit("degenerate arrival times".into()))?;
    if v <= 0.0 {
        return Err(Error::Fit(format!("non-positive front velocity {v}")));
    }
    // latest time with at least three usable points beyond the front
    let mut times: Vec<f64> = samples.iter().map(|s| s.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let outside = |t: f64| -> Vec<&LightConeSample> {
        samples
            .iter()
            .filter(|s| {
                s.time == t
                    && (s.distance as f64) > v * t + offset
                    && s.norm_value < threshold * s.scale
                    && s.norm_value > NOISE_FLOOR * s.scale
            })
            .collect()
    };
    let (fit_time, pts) = times
        .iter()
        .rev()
        .map(|&t| (t, outside(t)))
        .find(|(_, p)| p.len() >= 3)
        .ok_or_else(|| Error::Fit("fewer than three out-of-cone samples at every time".into()))?;
    let xs: Vec<f64> = pts.iter().map(|s| s.distance as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|s| s.norm_value.ln()).collect();
    let (slope, intercept, r2) = linalg::linear_fit(&xs, &ys).ok_or_else(|| Error::Fit("degenerate decay window".into()))?;
    let a = -slope;
    // ln norm = ln C − a j + a v t
    let c = (intercept - a * v * fit_time).exp();
    Ok(LightConeFit { a, v, c, fit_quality: r2, front_quality: front_r2, fit_time, front_offset: offset })
}

/// Writes `j,t,norm,method_error` rows.
pub fn write_light_cone_csv<W: Write>(samples: &[LightConeSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "t", "norm", "method_error"])?;
    for s in samples {
        w.write_record(&[
            s.distance.to_string(),
            s.time.to_string(),
            format!("{:e}", s.norm_value),
            format!("{:e}", s.method_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}
