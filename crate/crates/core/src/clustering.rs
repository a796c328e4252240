//! Connected correlators of pure states, decay-law classification and the
//! windowed bracket on the uniform correlation supremum `C_j`.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::ops::local::{LocalOperator, Pauli};
use crate::ops::symmetry::{translate, Boundary};
use crate::split_diag::reduced_density;

/// Correlator magnitudes at or below this value carry no decay information.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Minimum number of usable points for [`decay_fit`].
pub const MIN_FIT_POINTS: usize = 4;

/// Number of seesaw restarts used by [`cj_bracket`].
pub const DEFAULT_RESTARTS: usize = 6;

const SEESAW_MAX_ITERS: usize = 200;
const SEESAW_TOL: f64 = 1e-12;

/// `⟨Q τ_j(R)⟩ − ⟨Q⟩⟨τ_j(R)⟩` for a normalized full-basis state. `R` is
/// shifted by `j` sites without wrapping.
pub fn connected_correlator(psi: &[C64], q: &LocalOperator, r: &LocalOperator, j: usize) -> Result<C64> {
    let l = psi.len().trailing_zeros() as usize;
    let rj = translate(r, j as i64, l, Boundary::Open)?;
    if let Some(&s) = q.support().iter().find(|s| rj.support().contains(s)) {
        return Err(Error::OverlappingSupports(s));
    }
    let joint = q.mul(&rj).expectation(psi)?;
    Ok(joint - q.expectation(psi)? * rj.expectation(psi)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub j: usize,
    pub re: f64,
    pub im: f64,
}

impl CorrelationPoint {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationSeries {
    #[serde(skip)]
    pub observable_pair: (LocalOperator, LocalOperator),
    pub points: Vec<CorrelationPoint>,
    pub state_tag: String,
}

impl CorrelationSeries {
    /// Builds a series from raw `(j, value)` data, e.g. for synthetic fits.
    pub fn from_values(values: &[(usize, f64)], state_tag: &str) -> Self {
        let id = LocalOperator::pauli(0, Pauli::I);
        Self {
            observable_pair: (id.clone(), id),
            points: values.iter().map(|&(j, v)| CorrelationPoint { j, re: v, im: 0.0 }).collect(),
            state_tag: state_tag.to_string(),
        }
    }

    /// CSV with columns `j,re,im,abs`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "re", "im", "abs"])?;
        for p in &self.points {
            w.write_record(&[
                p.j.to_string(),
                format!("{:e}", p.re),
                format!("{:e}", p.im),
                format!("{:e}", p.value().norm()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Connected correlators for every `j` in `js`.
pub fn correlation_profile(
    psi: &[C64],
    q: &LocalOperator,
    r: &LocalOperator,
    js: impl IntoIterator<Item = usize>,
    state_tag: &str,
) -> Result<CorrelationSeries> {
    let points = js
        .into_iter()
        .map(|j| {
            let v = connected_correlator(psi, q, r, j)?;
            Ok(CorrelationPoint { j, re: v.re, im: v.im })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationSeries { observable_pair: (q.clone(), r.clone()), points, state_tag: state_tag.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayModel {
    Exponential,
    Powerlaw,
}

/// `|v| ≈ C e^{−K j}` or `|v| ≈ C j^{−α}`; `rate` is `K` or `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub c: f64,
    pub rate: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub c: f64,
    pub rate: f64,
    pub r2: f64,
    pub window: (usize, usize),
    pub points_used: usize,
    pub exponential: ModelFit,
    pub powerlaw: ModelFit,
}

impl DecayFit {
    /// Rate `K` of the exponential model regardless of which model won.
    pub fn forced_exponential_rate(&self) -> f64 {
        self.exponential.rate
    }
}

/// Default fit window `[2, L/2 − 2]`, widened to at least four sites.
pub fn default_window(length: usize) -> (usize, usize) {
    let hi = (length / 2).saturating_sub(2).max(5);
    (2, hi)
}

/// Log-linear fits of `|value|` against `j` and `ln j` over `window`.
pub fn decay_fit(series: &CorrelationSeries, window: (usize, usize)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .points
        .iter()
        .filter(|p| p.j >= window.0 && p.j <= window.1 && p.j > 0)
        .map(|p| (p.j as f64, p.value().norm()))
        .collect();
    let usable: Vec<(f64, f64)> = pts.iter().copied().filter(|&(_, v)| v > NOISE_FLOOR).collect();
    if usable.is_empty() {
        return Err(Error::Fit(format!("all values in window {window:?} are below the noise floor {NOISE_FLOOR:e}")));
    }
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "only {} points above the noise floor in window {window:?}; need {MIN_FIT_POINTS}",
            usable.len()
        )));
    }
    let js: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let ljs: Vec<f64> = js.iter().map(|j| j.ln()).collect();
    let lv: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    let fit = |x: &[f64]| -> Result<ModelFit> {
        let (slope, intercept, r2) =
            linalg::linear_fit(x, &lv).ok_or_else(|| Error::Fit("degenerate abscissae".into()))?;
        Ok(ModelFit { c: intercept.exp(), rate: -slope, r2: r2.clamp(0.0, 1.0) })
    };
    let exponential = fit(&js)?;
    let powerlaw = fit(&ljs)?;
    let (model, best) = if powerlaw.r2 > exponential.r2 {
        (DecayModel::Powerlaw, powerlaw)
    } else {
        (DecayModel::Exponential, exponential)
    };
    Ok(DecayFit {
        model,
        c: best.c,
        rate: best.rate,
        r2: best.r2,
        window,
        points_used: usable.len(),
        exponential,
        powerlaw,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CjBracket {
    pub j: usize,
    pub window_width: usize,
    pub cut: usize,
    pub lower: f64,
    pub upper: f64,
    /// Best value after each seesaw half-step, per restart.
    pub history: Vec<Vec<f64>>,
}

/// Seesaw state for maximizing `|tr(Δ (R ⊗ Q))|` with `Q` on the low
/// (left) window and `R` on the high (right) window.
struct Seesaw<'a> {
    delta: &'a DMatrix<C64>,
    da: usize,
    db: usize,
}

impl Seesaw<'_> {
    fn idx(&self, a: usize, b: usize) -> usize {
        a + self.da * b
    }

    /// `M[a,a'] = Σ_{b,b'} Δ[(a,b),(a',b')] R[b',b]`
    fn contract_right(&self, r: &DMatrix<C64>) -> DMatrix<C64> {
        DMatrix::from_fn(self.da, self.da, |a, a2| {
            let mut s = ZERO;
            for b in 0..self.db {
                for b2 in 0..self.db {
                    s += self.delta[(self.idx(a, b), self.idx(a2, b2))] * r[(b2, b)];
                }
            }
            s
        })
    }

    /// `N[b,b'] = Σ_{a,a'} Δ[(a,b),(a',b')] Q[a',a]`
    fn contract_left(&self, q: &DMatrix<C64>) -> DMatrix<C64> {
        DMatrix::from_fn(self.db, self.db, |b, b2| {
            let mut s = ZERO;
            for a in 0..self.da {
                for a2 in 0..self.da {
                    s += self.delta[(self.idx(a, b), self.idx(a2, b2))] * q[(a2, a)];
                }
            }
            s
        })
    }

    fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Alternating exact maximizations starting from `r`.
    fn run(&self, mut r: DMatrix<C64>) -> Vec<f64> {
        let mut history = Vec::new();
        let mut best = 0.0f64;
        for _ in 0..SEESAW_MAX_ITERS {
            let m = Self::hermitize(self.contract_right(&r));
            let q = linalg::hermitian_sign(&m);
            let after_q = linalg::trace_norm_hermitian(&m);
            best = best.max(after_q);
            history.push(best);
            let n = Self::hermitize(self.contract_left(&q));
            r = linalg::hermitian_sign(&n);
            let after_r = linalg::trace_norm_hermitian(&n);
            let improved = after_r - best;
            best = best.max(after_r);
            history.push(best);
            if improved < SEESAW_TOL {
                break;
            }
        }
        history
    }
}

fn pauli_on_first(p: Pauli, width: usize) -> DMatrix<C64> {
    let mut m = DMatrix::identity(1, 1);
    for k in (0..width).rev() {
        let f = if k == 0 { crate::ops::local::mat2_to_dense(&p.matrix()) } else { DMatrix::identity(2, 2) };
        m = linalg::kron(&m, &f);
    }
    m
}

/// Lower and upper bounds on the correlation supremum between the windows
/// `[cut−w+1, cut]` and `[cut+j, cut+j+w−1]`.
pub fn cj_bracket(psi: &[C64], cut: usize, j: usize, w: usize, restarts: usize, seed: u64) -> Result<CjBracket> {
    let l = psi.len().trailing_zeros() as usize;
    if w == 0 || cut + 1 < w {
        return Err(Error::Precondition(format!("left window of width {w} ending at {cut} leaves the chain")));
    }
    if j == 0 {
        return Err(Error::OverlappingSupports(cut));
    }
    if cut + j + w > l {
        return Err(Error::SupportOutOfRange { site: cut + j + w - 1, len: l });
    }
    let a: Vec<usize> = (cut + 1 - w..=cut).collect();
    let b: Vec<usize> = (cut + j..cut + j + w).collect();
    let ab: Vec<usize> = a.iter().chain(&b).copied().collect();
    let rho_ab = reduced_density(psi, &ab)?.matrix;
    let rho_a = reduced_density(psi, &a)?.matrix;
    let rho_b = reduced_density(psi, &b)?.matrix;
    let delta = rho_ab - linalg::kron(&rho_b, &rho_a);
    let upper = linalg::trace_norm_hermitian(&delta);

    let d = 1usize << w;
    let seesaw = Seesaw { delta: &delta, da: d, db: d };
    let mut inits = vec![pauli_on_first(Pauli::Z, w), pauli_on_first(Pauli::X, w), pauli_on_first(Pauli::Y, w)];
    for k in 0..restarts.saturating_sub(inits.len()).max(2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        inits.push(linalg::hermitian_sign(&linalg::random_hermitian(d, &mut rng)));
    }
    let history: Vec<Vec<f64>> = inits.into_iter().map(|r| seesaw.run(r)).collect();
    let lower = history.iter().filter_map(|h| h.last().copied()).fold(0.0f64, f64::max).min(upper);
    Ok(CjBracket { j, window_width: w, cut, lower, upper, history })
}

/// Brackets for every `(j, w)` cell, computed concurrently.
pub fn cj_scan(psi: &[C64], cut: usize, js: &[usize], widths: &[usize], seed: u64) -> Result<Vec<CjBracket>> {
    let cells: Vec<(usize, usize)> = widths.iter().flat_map(|&w| js.iter().map(move |&j| (j, w))).collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(i, &(j, w))| cj_bracket(psi, cut, j, w, DEFAULT_RESTARTS, seed.wrapping_add(1000 * i as u64)))
        .collect()
}

/// CSV with columns `j,w,lower,upper`.
pub fn write_brackets_csv<W: Write>(brackets: &[CjBracket], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "w", "lower", "upper"])?;
    for b in brackets {
        w.write_record(&[
            b.j.to_string(),
            b.window_width.to_string(),
            format!("{:e}", b.lower),
            format!("{:e}", b.upper),
        ])?;
    }
    w.flush()?;
    Ok(())
}
