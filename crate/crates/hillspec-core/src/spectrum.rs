//! Whole-line diagnostics built on the fiber computations: spectral arcs
//! `Gamma_n = {lambda_n(t) : t in [0, pi]}`, gap functions, spectral
//! singularity detection and classification, band projections, and
//! uniform projection-norm sweeps.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::discriminant::{monodromy_with, solve_characteristic};
use crate::error::{Error, Result};
use crate::linalg::inner;
use crate::oracle::{
    self, fiber_solve, pair_and_alpha_from, spectrum_raw, FiberSolve, ALPHA_FLOOR,
    CANDIDATE_MATCH_RADIUS,
};
use crate::potential::{PotentialEvaluator, PotentialSpec};

/// How an eigenvalue estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Oracle,
    DiscriminantRoot,
    Asymptotic(usize),
}

/// One labeled eigenvalue of a fiber operator.
#[derive(Debug, Clone, Copy)]
pub struct EigenRecord {
    /// Index pair: `j = 1` is the branch paired to `-n`, `j = 2` to `+n`.
    pub n: i64,
    pub j: u8,
    pub t: f64,
    pub lambda: Complex64,
    pub provenance: Provenance,
    pub simple: Option<bool>,
}

/// Both branch eigenvalues at `(n, t)` from the certified oracle.
pub fn branch_pair(p: &PotentialSpec, n: i64, t: f64, m: i64) -> Result<(EigenRecord, EigenRecord)> {
    let spec = oracle::oracle_spectrum(p, t, m)?;
    let mk = |idx: i64, j: u8| -> Result<EigenRecord> {
        let lambda = spec.eigenvalue(idx)?;
        Ok(EigenRecord {
            n,
            j,
            t,
            lambda,
            provenance: Provenance::Oracle,
            simple: Some(spec.is_simple(idx)?),
        })
    };
    Ok((mk(-n, 1)?, mk(n, 2)?))
}

/// Gap function `d_n(t) = |lambda_{n,1}(t) - lambda_{n,2}(t)|`.
pub fn gap(p: &PotentialSpec, n: i64, t: f64, m: i64) -> Result<f64> {
    let (a, b) = branch_pair(p, n, t, m)?;
    Ok((a.lambda - b.lambda).norm())
}

/// A sampled spectral arc.
#[derive(Debug, Clone)]
pub struct SpectralArc {
    pub n: i64,
    /// `(t, lambda_n(t))` on a uniform grid over `[0, pi]`.
    pub samples: Vec<(f64, Complex64)>,
    /// `dF/dlambda` at each sample, from the polishing pass.
    pub df_values: Vec<Complex64>,
    pub endpoints: (Complex64, Complex64),
    pub injective: bool,
    pub min_self_distance: f64,
    /// Worst relative mismatch of the finite-difference arc velocity
    /// against `-(dF/dlambda)^{-1} 2 sin t` at interior samples.
    pub derivative_mismatch: f64,
    /// First grid `t` at which the continuity pairing collided with a
    /// different label, when any.
    pub colliding_t: Option<f64>,
}

/// Floor under which two arc samples count as coincident.
fn self_distance_floor(scale: f64) -> f64 {
    1e-8 * (1.0 + scale)
}

/// Traces `lambda_n(t)` over a uniform `t`-grid by oracle pairing with a
/// Newton polish on the characteristic equation at every sample.
pub fn trace_arc(
    p: &PotentialSpec,
    n: i64,
    grid_size: usize,
    m: i64,
    ode_tol: f64,
) -> Result<SpectralArc> {
    if grid_size < 3 {
        return Err(Error::InvalidParameter("arc grid needs at least 3 points".into()));
    }
    let ts: Vec<f64> = (0..grid_size).map(|i| PI * i as f64 / (grid_size - 1) as f64).collect();

    // Oracle sweep with continuity pairing.
    let mut samples = Vec::with_capacity(grid_size);
    let mut colliding_t = None;
    let mut prev: Option<Complex64> = None;
    for &t in &ts {
        let spec = spectrum_raw(p, t, m)?;
        let labeled = spec.eigenvalue(n)?;
        let value = match prev {
            None => labeled,
            Some(last) => {
                // Continuity choice: nearest eigenvalue to the previous
                // sample; a mismatch with the labeled one marks a collision.
                let nearest = spec
                    .eigen
                    .iter()
                    .map(|e| e.value)
                    .min_by(|a, b| (a - last).norm().partial_cmp(&(b - last).norm()).unwrap())
                    .unwrap();
                if (nearest - labeled).norm() > 1e-6 * (1.0 + labeled.norm()) && colliding_t.is_none()
                {
                    colliding_t = Some(t);
                }
                nearest
            }
        };
        prev = Some(value);
        samples.push((t, value));
    }

    // Newton polish against the characteristic equation.
    let polished: Vec<(Complex64, Complex64)> = samples
        .par_iter()
        .map(|&(t, seed)| {
            let root = solve_characteristic(p, t, seed, 1e-9)?;
            let s = crate::discriminant::monodromy(p, root.lambda, ode_tol)?;
            Ok((root.lambda, s.df))
        })
        .collect::<Result<_>>()?;
    let df_values: Vec<Complex64> = polished.iter().map(|&(_, df)| df).collect();
    for (slot, &(lambda, _)) in samples.iter_mut().zip(&polished) {
        slot.1 = lambda;
    }

    // Derivative identity along the arc, interior points only and away
    // from the degenerate endpoints where both sides vanish.
    let h = PI / (grid_size - 1) as f64;
    let mut derivative_mismatch: f64 = 0.0;
    for i in 1..grid_size - 1 {
        let (t, _) = samples[i];
        let df = df_values[i];
        if df.norm() < 1e-6 {
            continue;
        }
        let fd = (samples[i + 1].1 - samples[i - 1].1) / (2.0 * h);
        let analytic = -2.0 * t.sin() / df;
        let scale = fd.norm().max(analytic.norm()).max(1e-12);
        derivative_mismatch = derivative_mismatch.max((fd - analytic).norm() / scale);
    }

    let scale = samples.iter().map(|s| s.1.norm()).fold(0.0, f64::max);
    let mut min_self_distance = f64::INFINITY;
    for i in 0..grid_size {
        for j in i + 1..grid_size {
            min_self_distance = min_self_distance.min((samples[i].1 - samples[j].1).norm());
        }
    }
    let injective = colliding_t.is_none() && min_self_distance > self_distance_floor(scale);

    Ok(SpectralArc {
        n,
        endpoints: (samples[0].1, samples[grid_size - 1].1),
        injective,
        min_self_distance,
        derivative_mismatch,
        colliding_t,
        df_values,
        samples,
    })
}

/// Minimum distance between the sample sets of two arcs.
pub fn arc_distance(a: &SpectralArc, b: &SpectralArc) -> f64 {
    let mut d = f64::INFINITY;
    for &(_, x) in &a.samples {
        for &(_, y) in &b.samples {
            d = d.min((x - y).norm());
        }
    }
    d
}

/// Classification of a candidate spectral point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    SpectralSingularity,
    DiagonalizableDouble,
    Simple,
    Unresolved,
}

/// A point where `dF/dlambda` vanishes on (or numerically near) the
/// spectrum.
#[derive(Debug, Clone, Copy)]
pub struct SingularityCandidate {
    pub lambda: Complex64,
    /// Quasimomentum with `F(lambda) = 2 cos t`, in `[0, pi]`.
    pub t_value: f64,
    /// `|dF/dlambda|` after polishing.
    pub df_residual: f64,
    pub classification: Classification,
    pub evidence: Option<oracle::DefectReport>,
}

/// On-spectrum test: `|Im t(lambda)|` with `cos t = F/2` must fall below
/// this. Band-edge points carry a square-root sensitivity to the
/// discriminant error, so the floor sits well above the noise scale
/// `sqrt(F_err)` and well below the value produced by the narrowest
/// spectral gaps under study.
pub const ON_SPECTRUM_IM_TOL: f64 = 1e-6;

/// `|dF|` below this (at the polished point) counts as a critical point.
fn df_small(lambda: Complex64) -> f64 {
    1e-8 * (1.0 + lambda.norm())
}

/// Scans a real window for critical points of `F` lying on the spectrum.
/// Returned candidates are unclassified; see [`classify_singularity`].
/// Extra starting points (for instance samples of traced arcs) can be
/// supplied to extend the scan off the real axis.
pub fn find_singularity_candidates(
    p: &PotentialSpec,
    window: (f64, f64),
    refine_tol: f64,
    extra_seeds: &[Complex64],
) -> Result<Vec<SingularityCandidate>> {
    let (w0, w1) = window;
    if !(w1 > w0) || !w0.is_finite() || !w1.is_finite() {
        return Err(Error::InvalidParameter("window must be a finite interval".into()));
    }
    let ev = PotentialEvaluator::new(p);
    let ode_tol = 1e-12;
    let n_samples = (((w1 - w0) / 1.0).ceil() as usize).clamp(64, 4000);

    let grid: Vec<(Complex64, Complex64)> = (0..=n_samples)
        .into_par_iter()
        .map(|i| {
            let x = w0 + (w1 - w0) * i as f64 / n_samples as f64;
            let s = monodromy_with(&ev, Complex64::new(x, 0.0), ode_tol)?;
            Ok((s.lambda, s.df))
        })
        .collect::<Result<_>>()?;

    // Seeds: local minima of |dF| along the grid plus the caller's points.
    let mut seeds: Vec<Complex64> = Vec::new();
    for i in 1..grid.len() - 1 {
        let (l, d) = grid[i];
        if d.norm() <= grid[i - 1].1.norm() && d.norm() <= grid[i + 1].1.norm() {
            seeds.push(l);
        }
    }
    seeds.extend_from_slice(extra_seeds);

    let polished: Vec<Option<SingularityCandidate>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut lambda = seed;
            let mut sample = match monodromy_with(&ev, lambda, ode_tol) {
                Ok(s) => s,
                Err(_) => return None,
            };
            for _ in 0..40 {
                if sample.d2f.norm() < 1e-18 * (1.0 + lambda.norm().powi(2)) {
                    return None;
                }
                let step = sample.df / sample.d2f;
                lambda -= step;
                sample = match monodromy_with(&ev, lambda, ode_tol) {
                    Ok(s) => s,
                    Err(_) => return None,
                };
                if step.norm() < refine_tol * (1.0 + lambda.norm()) {
                    break;
                }
            }
            if sample.df.norm() > df_small(lambda) {
                return None;
            }
            // On-spectrum test through the quasimomentum map.
            let tc = (sample.f / 2.0).acos();
            if tc.im.abs() > ON_SPECTRUM_IM_TOL {
                return None;
            }
            if lambda.re < w0 || lambda.re > w1 {
                return None;
            }
            Some(SingularityCandidate {
                lambda,
                t_value: tc.re.clamp(0.0, PI),
                df_residual: sample.df.norm(),
                classification: Classification::Unresolved,
                evidence: None,
            })
        })
        .collect();

    // Deduplicate (several seeds converge to the same critical point).
    let mut out: Vec<SingularityCandidate> = Vec::new();
    for cand in polished.into_iter().flatten() {
        let dup = out
            .iter()
            .any(|c| (c.lambda - cand.lambda).norm() < 1e-6 * (1.0 + cand.lambda.norm()));
        if !dup {
            out.push(cand);
        }
    }
    out.sort_by(|a, b| a.lambda.re.partial_cmp(&b.lambda.re).unwrap());
    Ok(out)
}

/// Minimum `|dF/dlambda|` along a traced arc; a strictly positive value
/// certifies the absence of critical points on the sampled arc.
pub fn arc_min_df(arc: &SpectralArc) -> f64 {
    arc.df_values.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min)
}

/// Runs the matrix-side multiplicity test at the candidate and upgrades
/// its classification. A spectral singularity requires both signals: a
/// vanishing discriminant derivative and a Jordan defect of the fiber.
pub fn classify_singularity(
    p: &PotentialSpec,
    cand: &SingularityCandidate,
    m: i64,
) -> Result<SingularityCandidate> {
    let fiber = fiber_solve(p, cand.t_value, m)?;
    let rep = fiber.defect_report(p, cand.lambda, CANDIDATE_MATCH_RADIUS)?;
    let mut out = *cand;
    out.evidence = Some(rep);

    // Threshold-ambiguity guard: a singular value within an order of
    // magnitude of the kernel cut is not a verdict.
    let tol = oracle::SIGMA_TOL * (1.0 + cand.lambda.norm());
    let ambiguous = {
        let mut shifted = oracle::hamiltonian(p, cand.t_value, m);
        for i in 0..shifted.n {
            let d = shifted.get(i, i) - cand.lambda;
            shifted.set(i, i, d);
        }
        crate::linalg::singular_values(&shifted)?
            .iter()
            .any(|&s| s > 0.1 * tol && s < 10.0 * tol)
    };

    out.classification = if rep.algebraic == 0 || ambiguous {
        Classification::Unresolved
    } else if rep.algebraic == 1 {
        Classification::Simple
    } else if rep.is_defective() && cand.df_residual <= df_small(cand.lambda) {
        Classification::SpectralSingularity
    } else if rep.geometric == rep.algebraic {
        Classification::DiagonalizableDouble
    } else {
        Classification::Unresolved
    };
    Ok(out)
}

/// A function sampled on a uniform grid over whole periods
/// `[period_start, period_start + periods)`, `samples_per_period` points
/// per period, left endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub period_start: i64,
    pub samples_per_period: usize,
    pub values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn from_fn(
        period_start: i64,
        periods: usize,
        samples_per_period: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Self {
        let values = (0..periods * samples_per_period)
            .map(|i| f(period_start as f64 + i as f64 / samples_per_period as f64))
            .collect();
        Self { period_start, samples_per_period, values }
    }

    pub fn periods(&self) -> usize {
        self.values.len() / self.samples_per_period
    }

    pub fn x(&self, i: usize) -> f64 {
        self.period_start as f64 + i as f64 / self.samples_per_period as f64
    }

    pub fn norm_l2(&self) -> f64 {
        let h = 1.0 / self.samples_per_period as f64;
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h).sqrt()
    }

    /// Maximum pointwise distance to another function on the same grid.
    pub fn distance_linf(&self, other: &SampledFunction) -> f64 {
        assert_eq!(self.period_start, other.period_start);
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn distance_l2(&self, other: &SampledFunction) -> f64 {
        assert_eq!(self.period_start, other.period_start);
        assert_eq!(self.values.len(), other.values.len());
        let h = 1.0 / self.samples_per_period as f64;
        (self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * h)
            .sqrt()
    }
}

/// Band projection `P(gamma) f` for the arc section of index `n` over a
/// quasimomentum interval.
///
/// The quasimomentum is quantized on a torus of `J ~ 2 pi * quad_points`
/// periods, which realizes the projection integral as a Riemann sum whose
/// fibers are exactly orthogonal: the discretized operator is itself a
/// projection, so repeated application is idempotent to quadrature
/// accuracy. The input must be supported inside one torus window.
pub fn apply_projection(
    p: &PotentialSpec,
    n: i64,
    t_interval: (f64, f64),
    f: &SampledFunction,
    quad_points: usize,
    m: i64,
    output_window: Option<(i64, usize)>,
) -> Result<SampledFunction> {
    let (t0, t1) = t_interval;
    if !(t1 >= t0) || t0 <= -PI || t1 > PI {
        return Err(Error::InvalidParameter(
            "t interval must be a subset of (-pi, pi]".into(),
        ));
    }
    let spp = f.samples_per_period;
    let torus: i64 = ((2.0 * PI * quad_points as f64).round() as i64).max(f.periods() as i64);
    // Quantized quasimomenta in (t0, t1]: t_k = 2 pi k / J.
    let k_min = (torus as f64 * t0 / (2.0 * PI)).floor() as i64 + 1;
    let k_max = (torus as f64 * t1 / (2.0 * PI)).floor() as i64;

    let (out_start, out_periods) =
        output_window.unwrap_or((f.period_start, f.periods()));
    let mut out = SampledFunction {
        period_start: out_start,
        samples_per_period: spp,
        values: vec![Complex64::default(); out_periods * spp],
    };
    if k_min > k_max {
        return Ok(out);
    }

    let h = 1.0 / spp as f64;
    let nodes: Vec<i64> = (k_min..=k_max).collect();
    let contributions: Vec<Vec<Complex64>> = nodes
        .par_iter()
        .map(|&k| {
            let t = 2.0 * PI * k as f64 / torus as f64;
            let fiber = fiber_solve(p, t, m)?;
            let b = pair_and_alpha_from(p, &fiber, n)?;
            if b.defect {
                return Err(Error::SingularArcPoint { t });
            }
            if b.alpha.norm() < ALPHA_FLOOR {
                return Err(Error::AlphaFloor { index: n, t, alpha: b.alpha.norm() });
            }
            // Values of Psi and Psi* on one period grid.
            let mm = m;
            let psi = |x: f64, coeffs: &[Complex64]| -> Complex64 {
                let mut acc = Complex64::default();
                for kk in -mm..=mm {
                    let freq = 2.0 * PI * kk as f64 + t;
                    acc += coeffs[(kk + mm) as usize] * Complex64::from_polar(1.0, freq * x);
                }
                acc
            };
            let psi_vals: Vec<Complex64> =
                (0..spp).map(|i| psi(i as f64 * h, &b.eigenvector)).collect();
            let chi_conj_vals: Vec<Complex64> = (0..spp)
                .map(|i| (psi(i as f64 * h, &b.adjoint_vector) / b.alpha.conj()).conj())
                .collect();

            // (f, chi)_R over the support window, Bloch phases per period.
            let mut coeff = Complex64::default();
            for j in 0..f.periods() {
                let phase = Complex64::from_polar(1.0, -t * (f.period_start + j as i64) as f64);
                let mut per = Complex64::default();
                for i in 0..spp {
                    per += f.values[j * spp + i] * chi_conj_vals[i];
                }
                coeff += per * phase * h;
            }

            // Contribution (1/J) * coeff * Psi on the output window.
            let weight = coeff / torus as f64;
            let mut vals = vec![Complex64::default(); out_periods * spp];
            for j in 0..out_periods {
                let phase = Complex64::from_polar(1.0, t * (out_start + j as i64) as f64) * weight;
                for i in 0..spp {
                    vals[j * spp + i] = phase * psi_vals[i];
                }
            }
            Ok(vals)
        })
        .collect::<Result<_>>()?;

    for vals in contributions {
        for (o, v) in out.values.iter_mut().zip(vals) {
            *o += v;
        }
    }
    Ok(out)
}

/// One row of the uniform-bound sweep.
#[derive(Debug, Clone, Copy)]
pub struct BoundRow {
    pub n: i64,
    pub t: f64,
    pub inv_alpha: f64,
    /// Projection norms at the three rectangle scales (1, 2 and 4
    /// enclosed eigenvalues).
    pub proj_norms: [f64; 3],
    pub defect: bool,
}

/// Aggregate report of the `alpha` and projection-norm sweeps.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub sup_inv_alpha: f64,
    pub sup_proj_norm: f64,
    pub argmax_inv_alpha: (i64, f64),
    pub argmax_proj_norm: (i64, f64),
    pub rows: Vec<BoundRow>,
    /// Same suprema over the midpoint-refined grid.
    pub refined_sup_inv_alpha: f64,
    pub refined_sup_proj_norm: f64,
    pub defect_location: Option<(i64, f64)>,
    /// Both suprema finite and stable under the grid refinement.
    pub consistent: bool,
}

/// Relative change admitted between the coarse and refined suprema.
pub const REFINEMENT_STABILITY: f64 = 0.05;

/// Sweeps `1/|alpha_n(t)|` and the three-scale rectangle projection norms
/// over signed indices `+-[n_min, n_max]` and the quasimomentum grid, then
/// repeats on the midpoint refinement and compares suprema.
pub fn uniform_bound_report(
    p: &PotentialSpec,
    n_range: (i64, i64),
    t_grid: &[f64],
    m: i64,
) -> Result<BoundReport> {
    let refined = refine_grid(t_grid);
    let rows = sweep_bounds(p, n_range, &refined, m)?;

    let coarse: Vec<&BoundRow> =
        rows.iter().filter(|r| t_grid.iter().any(|&t| (t - r.t).abs() < 1e-15)).collect();
    let sup = |set: &[&BoundRow]| -> (f64, f64, (i64, f64), (i64, f64)) {
        let mut sa = 0.0f64;
        let mut sn = 0.0f64;
        let mut aa = (0i64, 0.0f64);
        let mut an = (0i64, 0.0f64);
        for r in set {
            if r.inv_alpha > sa {
                sa = r.inv_alpha;
                aa = (r.n, r.t);
            }
            for &v in &r.proj_norms {
                if v > sn {
                    sn = v;
                    an = (r.n, r.t);
                }
            }
        }
        (sa, sn, aa, an)
    };
    let all: Vec<&BoundRow> = rows.iter().collect();
    let (sup_inv_alpha, sup_proj_norm, argmax_inv_alpha, argmax_proj_norm) = sup(&coarse);
    let (refined_sup_inv_alpha, refined_sup_proj_norm, _, _) = sup(&all);

    let defect_location = rows.iter().find(|r| r.defect).map(|r| (r.n, r.t));
    let stable = |a: f64, b: f64| {
        a.is_finite() && b.is_finite() && (b - a).abs() <= REFINEMENT_STABILITY * a.max(1e-300)
    };
    let consistent = defect_location.is_none()
        && stable(sup_inv_alpha, refined_sup_inv_alpha)
        && stable(sup_proj_norm, refined_sup_proj_norm);

    Ok(BoundReport {
        sup_inv_alpha,
        sup_proj_norm,
        argmax_inv_alpha,
        argmax_proj_norm,
        rows,
        refined_sup_inv_alpha,
        refined_sup_proj_norm,
        defect_location,
        consistent,
    })
}

fn refine_grid(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len() * 2);
    for w in grid.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    if let Some(&last) = grid.last() {
        out.push(last);
    }
    out
}

fn sweep_bounds(
    p: &PotentialSpec,
    n_range: (i64, i64),
    t_grid: &[f64],
    m: i64,
) -> Result<Vec<BoundRow>> {
    let (n_min, n_max) = n_range;
    if n_min < 1 || n_max < n_min {
        return Err(Error::InvalidParameter("need 1 <= n_min <= n_max".into()));
    }
    if n_max > m / 2 {
        return Err(Error::IndexOutsideCertified { index: n_max, max: m / 2 });
    }
    t_grid
        .par_iter()
        .map(|&t| -> Result<Vec<BoundRow>> {
            let fiber = fiber_solve(p, t, m)?;
            let mut rows = Vec::new();
            for n_abs in n_min..=n_max {
                for n in [n_abs, -n_abs] {
                    let b = pair_and_alpha_from(p, &fiber, n)?;
                    let inv_alpha =
                        if b.defect { f64::INFINITY } else { 1.0 / b.alpha.norm() };
                    let proj_norms = rectangle_norms(&fiber, n)?;
                    rows.push(BoundRow { n, t, inv_alpha, proj_norms, defect: b.defect });
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

/// Projection norms over rectangles isolating one, two and four
/// eigenvalues around `lambda_n(t)`, via the rank-factored norm.
fn rectangle_norms(fiber: &FiberSolve, n: i64) -> Result<[f64; 3]> {
    let spec = &fiber.spectrum;
    let lam = spec.eigenvalue(n)?;
    let partner = spec.eigenvalue(-n)?;
    let next = spec.eigenvalue(if n >= 0 { n + 1 } else { n - 1 }).unwrap_or(lam);
    let next_partner = spec.eigenvalue(if n >= 0 { -(n + 1) } else { -(n - 1) }).unwrap_or(lam);

    let singles = [vec![lam], vec![lam, partner], vec![lam, partner, next, next_partner]];
    let mut out = [0.0f64; 3];
    for (slot, members) in out.iter_mut().zip(singles) {
        *slot = low_rank_projection_norm(fiber, &members)?;
    }
    Ok(out)
}

/// `|| sum v_i w_i^H / alpha_i ||_2` via the r x r Gram reduction.
fn low_rank_projection_norm(fiber: &FiberSolve, members: &[Complex64]) -> Result<f64> {
    // Deduplicate member eigenvalues (double points appear twice).
    let mut vs: Vec<&[Complex64]> = Vec::new();
    let mut ws: Vec<&[Complex64]> = Vec::new();
    let mut alphas: Vec<Complex64> = Vec::new();
    let mut used: Vec<Complex64> = Vec::new();
    for &lam in members {
        if used.iter().any(|&u| (u - lam).norm() < 1e-12 * (1.0 + lam.norm())) {
            continue;
        }
        used.push(lam);
        let e = fiber
            .spectrum
            .eigen
            .iter()
            .min_by(|a, b| (a.value - lam).norm().partial_cmp(&(b.value - lam).norm()).unwrap())
            .unwrap();
        let adj = fiber.adjoint_pair_for(e.value);
        let alpha = inner(&e.vector, &adj.vector);
        if alpha.norm() < ALPHA_FLOOR {
            return Ok(f64::INFINITY);
        }
        vs.push(&e.vector);
        ws.push(&adj.vector);
        alphas.push(alpha);
    }
    let r = vs.len();
    if r == 0 {
        return Ok(0.0);
    }
    // P = V D W^H with D = diag(1/alpha). The nonzero spectrum of P^H P
    // equals that of (D^H (V^H V) D)(W^H W).
    let mut gv = vec![Complex64::default(); r * r];
    let mut gw = vec![Complex64::default(); r * r];
    for i in 0..r {
        for j in 0..r {
            gv[i * r + j] = inner(vs[j], vs[i]); // (V^H V)_{ij} = <v_j, v_i>
            gw[i * r + j] = inner(ws[j], ws[i]);
        }
    }
    let mut small = crate::linalg::CMatrix::zeros(r);
    for i in 0..r {
        for j in 0..r {
            let mut acc = Complex64::default();
            for k in 0..r {
                acc += gv[i * r + k] * gw[k * r + j] / (alphas[i].conj() * alphas[k]);
            }
            small.set(i, j, acc);
        }
    }
    let eigvals = crate::linalg::eigen_decompose(&small)?;
    let max = eigvals.iter().map(|p| p.value.norm()).fold(0.0, f64::max);
    Ok(max.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Rectangle;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn free_arc_is_a_real_segment() {
        let p = PotentialSpec::free();
        let arc = trace_arc(&p, 3, 33, 12, 1e-12).unwrap();
        assert!((arc.endpoints.0 - c((6.0 * PI).powi(2), 0.0)).norm() < 1e-6);
        assert!((arc.endpoints.1 - c((7.0 * PI).powi(2), 0.0)).norm() < 1e-6);
        assert!(arc.injective);
        for &(t, l) in &arc.samples {
            assert!((l - c((6.0 * PI + t).powi(2), 0.0)).norm() < 1e-6 * (1.0 + l.norm()));
            assert!(l.im.abs() < 1e-8);
        }
        assert!(arc.derivative_mismatch < 5e-3, "mismatch {}", arc.derivative_mismatch);
    }

    #[test]
    fn free_gap_is_8_pi_n_t() {
        let p = PotentialSpec::free();
        let g = gap(&p, 3, 0.1, 12).unwrap();
        assert!((g - 8.0 * PI * 3.0 * 0.1).abs() < 1e-8, "gap = {g}");
    }

    #[test]
    fn decay_gap_at_t0_is_twice_p() {
        let p = PotentialSpec::decay(1.0, 2.0, 24);
        let g = gap(&p, 5, 0.0, 24).unwrap();
        assert!((g - 0.02).abs() < 2e-3, "gap = {g}");
    }

    #[test]
    fn free_candidates_are_pi_k_squared() {
        let p = PotentialSpec::free();
        let cands = find_singularity_candidates(&p, (1.0, 400.0), 1e-10, &[]).unwrap();
        let expect: Vec<f64> = (1..=6).map(|k| (PI * k as f64).powi(2)).collect();
        assert_eq!(cands.len(), expect.len(), "{cands:?}");
        for (cand, e) in cands.iter().zip(&expect) {
            assert!((cand.lambda - c(*e, 0.0)).norm() < 1e-6, "{} vs {e}", cand.lambda);
        }
    }

    #[test]
    fn classify_free_and_gasymov() {
        let free = PotentialSpec::free();
        let cands = find_singularity_candidates(&free, (1.0, 50.0), 1e-10, &[]).unwrap();
        assert_eq!(cands.len(), 2);
        for cand in &cands {
            let done = classify_singularity(&free, cand, 16).unwrap();
            assert_eq!(done.classification, Classification::DiagonalizableDouble);
        }
        let g = PotentialSpec::gasymov(c(1.0, 0.0));
        let cands = find_singularity_candidates(&g, (1.0, 50.0), 1e-10, &[]).unwrap();
        assert_eq!(cands.len(), 2);
        for cand in &cands {
            let done = classify_singularity(&g, cand, 16).unwrap();
            assert_eq!(done.classification, Classification::SpectralSingularity);
        }
    }

    #[test]
    fn projection_empty_interval_is_zero() {
        let p = PotentialSpec::free();
        let f = SampledFunction::from_fn(-1, 2, 64, |x| c((-x * x).exp(), 0.0));
        let out = apply_projection(&p, 2, (0.4, 0.4), &f, 16, 4, None).unwrap();
        assert!(out.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn uniform_bounds_free_are_one() {
        let p = PotentialSpec::free();
        let grid: Vec<f64> = (0..5).map(|i| 0.3 + 0.5 * i as f64 / 4.0).collect();
        let rep = uniform_bound_report(&p, (2, 5), &grid, 12).unwrap();
        assert!(rep.consistent);
        assert!((rep.sup_inv_alpha - 1.0).abs() < 1e-9, "{}", rep.sup_inv_alpha);
        assert!((rep.sup_proj_norm - 1.0).abs() < 1e-8, "{}", rep.sup_proj_norm);
    }

    #[test]
    fn low_rank_norm_matches_full_matrix_norm() {
        let p = PotentialSpec::from_fourier(
            [(1, c(0.4, 0.2)), (-1, c(0.3, -0.1)), (2, c(0.2, 0.0)), (-2, c(0.25, 0.05))],
            0,
        )
        .unwrap();
        let fiber = fiber_solve(&p, 0.6, 12).unwrap();
        let lam = fiber.spectrum.eigenvalue(2).unwrap();
        let partner = fiber.spectrum.eigenvalue(-2).unwrap();
        let fast = low_rank_projection_norm(&fiber, &[lam, partner]).unwrap();

        let pad = 1.0;
        let rect = Rectangle {
            re0: lam.re.min(partner.re) - pad,
            re1: lam.re.max(partner.re) + pad,
            im0: lam.im.min(partner.im) - pad,
            im1: lam.im.max(partner.im) + pad,
        };
        let full = oracle::projection_norm_from(&p, &fiber, &[rect]).unwrap();
        assert!(
            (fast - full.norm).abs() < 1e-9 * (1.0 + full.norm),
            "fast {fast} vs full {}",
            full.norm
        );
    }
}
