//! Monodromy data of `-y'' + q y = lambda y` on `[0, 1]`, the Hill
//! discriminant `F(lambda) = theta(1) + phi'(1)`, Newton solution of the
//! characteristic equation `F(lambda) = 2 cos t`, and argument-principle
//! root counting on disks.
//!
//! The integrator advances the two fundamental solutions together with
//! their first and second lambda-derivatives (variational systems), so
//! `dF/dlambda` and `d^2F/dlambda^2` come out of the same pass as `F`
//! rather than from finite differences.

use num_complex::Complex64;
use ode_solvers::dop_shared::{IntegrationError, OutputType};
use ode_solvers::{Dop853, SVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::{PotentialEvaluator, PotentialSpec};

/// Monodromy data of the fiber equation at one spectral parameter.
#[derive(Debug, Clone, Copy)]
pub struct DiscriminantSample {
    pub lambda: Complex64,
    /// `theta(1, lambda)` with `theta(0) = 1, theta'(0) = 0`.
    pub theta1: Complex64,
    /// `phi(1, lambda)` with `phi(0) = 0, phi'(0) = 1`.
    pub phi1: Complex64,
    pub dtheta1: Complex64,
    pub dphi1: Complex64,
    /// `F(lambda) = phi'(1) + theta(1)`.
    pub f: Complex64,
    /// `dF/dlambda` from the first variational system.
    pub df: Complex64,
    /// `d^2F/dlambda^2` from the second variational system.
    pub d2f: Complex64,
    pub ode_tolerance: f64,
}

impl DiscriminantSample {
    /// `|theta(1) phi'(1) - theta'(1) phi(1) - 1|`; the exact flow has
    /// Wronskian identically one.
    pub fn wronskian_defect(&self) -> f64 {
        (self.theta1 * self.dphi1 - self.dtheta1 * self.phi1 - 1.0).norm()
    }
}

/// Result of solving `F(lambda) = 2 cos t`.
#[derive(Debug, Clone, Copy)]
pub struct RootResult {
    pub lambda: Complex64,
    pub multiplicity_flag: MultiplicityFlag,
    /// `|F(lambda) - 2 cos t|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplicityFlag {
    Simple,
    DoubleSuspected,
}

/// 12 complex components — (theta, theta', phi, phi') and their first and
/// second lambda-derivatives — plus the abscissa itself as component 24.
/// Carrying x in the state makes the system autonomous, so the stage
/// abscissae come from the tableau row sums and the integrator's published
/// c-coefficients never enter.
type State = SVector<f64, 25>;

struct MonodromyOde<'a> {
    q: &'a PotentialEvaluator,
    lambda: Complex64,
}

#[inline]
fn get(y: &State, i: usize) -> Complex64 {
    Complex64::new(y[2 * i], y[2 * i + 1])
}

#[inline]
fn set(y: &mut State, i: usize, v: Complex64) {
    y[2 * i] = v.re;
    y[2 * i + 1] = v.im;
}

impl ode_solvers::System<f64, State> for MonodromyOde<'_> {
    fn system(&self, _x: f64, y: &State, dy: &mut State) {
        let x = y[24];
        let w = self.q.eval(x) - self.lambda; // y'' = (q - lambda) y
        for pair in 0..2 {
            // pair 0: theta-chain, pair 1: phi-chain
            let base = 6 * pair;
            let u = get(y, base);
            let du = get(y, base + 1);
            let v = get(y, base + 2);
            let dv = get(y, base + 3);
            let s = get(y, base + 4);
            let ds = get(y, base + 5);
            set(dy, base, du);
            set(dy, base + 1, w * u);
            set(dy, base + 2, dv);
            set(dy, base + 3, w * v - u);
            set(dy, base + 4, ds);
            set(dy, base + 5, w * s - 2.0 * v);
        }
        dy[24] = 1.0;
    }
}

/// Integrates the monodromy and variational systems across one period.
pub fn monodromy(p: &PotentialSpec, lambda: Complex64, tol: f64) -> Result<DiscriminantSample> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("ode tolerance must be positive".into()));
    }
    let ev = PotentialEvaluator::new(p);
    monodromy_with(&ev, lambda, tol)
}

/// Same as [`monodromy`] with a prebuilt evaluator, for hot loops.
pub fn monodromy_with(
    ev: &PotentialEvaluator,
    lambda: Complex64,
    tol: f64,
) -> Result<DiscriminantSample> {
    let mut y0 = State::zeros();
    set(&mut y0, 0, Complex64::new(1.0, 0.0)); // theta(0) = 1
    set(&mut y0, 7, Complex64::new(1.0, 0.0)); // phi'(0) = 1

    let system = MonodromyOde { q: ev, lambda };
    let mut stepper = Dop853::from_param(
        system,
        0.0,
        1.0,
        1.0,
        y0,
        tol,
        tol,
        0.9,
        0.0,
        0.333,
        6.0,
        1.0,
        0.0,
        4_000_000,
        u32::MAX,
        OutputType::Sparse,
    );
    match stepper.integrate() {
        Ok(_) => {}
        Err(IntegrationError::StepSizeUnderflow { x }) => {
            return Err(Error::StepSizeUnderflow { x })
        }
        Err(IntegrationError::MaxNumStepReached { x, .. }) => {
            return Err(Error::OdeFailure { x, msg: "maximum step count reached".into() })
        }
        Err(IntegrationError::StiffnessDetected { x }) => {
            return Err(Error::OdeFailure { x, msg: "stiffness detected".into() })
        }
    }
    let y = *stepper
        .y_out()
        .last()
        .ok_or(Error::OdeFailure { x: 0.0, msg: "integrator produced no output".into() })?;

    let theta1 = get(&y, 0);
    let dtheta1 = get(&y, 1);
    let theta_l = get(&y, 2);
    let theta_ll = get(&y, 4);
    let phi1 = get(&y, 6);
    let dphi1 = get(&y, 7);
    let dphi_l = get(&y, 9);
    let dphi_ll = get(&y, 11);

    let sample = DiscriminantSample {
        lambda,
        theta1,
        phi1,
        dtheta1,
        dphi1,
        f: dphi1 + theta1,
        df: dphi_l + theta_l,
        d2f: dphi_ll + theta_ll,
        ode_tolerance: tol,
    };
    // Solution magnitudes grow like e^{|Im sqrt(lambda)|}; scale the
    // Wronskian check accordingly.
    let scale = 1.0
        + [theta1, dtheta1, phi1, dphi1]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .powi(2);
    if sample.wronskian_defect() > 1e3 * tol * scale {
        return Err(Error::OdeFailure {
            x: 1.0,
            msg: format!(
                "Wronskian defect {:.3e} exceeds {:.3e}",
                sample.wronskian_defect(),
                1e3 * tol * scale
            ),
        });
    }
    Ok(sample)
}

/// Inferred distance to the paired root under the local quadratic model of
/// `F - 2 cos t`; small values mean the root pair is unresolved.
fn inferred_gap(df: Complex64, d2f: Complex64, lambda: Complex64) -> f64 {
    let curv = d2f.norm();
    if curv < 1e-18 * (1.0 + lambda.norm().powi(2)) {
        return f64::INFINITY;
    }
    2.0 * df.norm() / curv
}

fn double_floor_lo(lambda: Complex64) -> f64 {
    5e-6 * (1.0 + lambda.norm().sqrt())
}

fn double_floor_hi(lambda: Complex64) -> f64 {
    1e-4 * (1.0 + lambda.norm().sqrt())
}

const MAX_NEWTON_ITER: usize = 60;
/// Extra polishing steps after the residual tolerance is first met, so the
/// iterate settles on a root instead of the rim of the tolerance basin.
const EXTRA_NEWTON_STEPS: usize = 8;

/// Newton iteration for `F(lambda) = 2 cos t` starting from `seed`.
///
/// Near-degenerate pairs are classified by the curvature of `F`: the
/// quadratic model around the critical point of `F - 2 cos t` either
/// separates two resolvable roots (simple) or does not (double-suspected,
/// in which case the critical point itself is returned — it is the best
/// available localization of the double eigenvalue).
pub fn solve_characteristic(
    p: &PotentialSpec,
    t: f64,
    seed: Complex64,
    tol: f64,
) -> Result<RootResult> {
    if !(tol > 0.0) || !seed.is_finite() {
        return Err(Error::InvalidParameter("need finite seed and tol > 0".into()));
    }
    let ev = PotentialEvaluator::new(p);
    let target = Complex64::new(2.0 * t.cos(), 0.0);
    let ode_tol = (tol * 1e-3).clamp(5e-14, 1e-12);

    let mut lambda = seed;
    let mut converged_at = None;
    let mut extra = 0usize;
    let mut best: Option<(Complex64, f64)> = None;
    let mut iterations = 0;

    for k in 0..MAX_NEWTON_ITER {
        iterations = k + 1;
        let s = monodromy_with(&ev, lambda, ode_tol)?;
        let g = s.f - target;
        let r = g.norm();
        if best.map(|(_, br)| r < br).unwrap_or(true) {
            best = Some((lambda, r));
        }
        if r < tol {
            converged_at.get_or_insert(k);
            extra += 1;
        }
        let df = s.df;
        if df.norm() < 1e-16 * (1.0 + lambda.norm()) {
            if r < tol {
                break;
            }
            return Err(Error::DerivativeBreakdown { lambda, df: df.norm() });
        }
        let step = g / df;
        lambda -= step;
        if converged_at.is_some()
            && (extra >= EXTRA_NEWTON_STEPS || step.norm() < 1e-15 * (1.0 + lambda.norm()))
        {
            break;
        }
    }

    let (mut root, _) = best.ok_or(Error::NoConvergence { iterations, residual: f64::NAN })?;
    if converged_at.is_none() {
        let (_, r) = best.unwrap();
        return Err(Error::NoConvergence { iterations, residual: r });
    }

    // Classification pass at a tight tolerance.
    let cls_tol = ode_tol.min(1e-13);
    let s = monodromy_with(&ev, root, cls_tol)?;
    let mut residual = (s.f - target).norm();
    let mut flag = MultiplicityFlag::Simple;

    if inferred_gap(s.df, s.d2f, root) < double_floor_hi(root) {
        // Polish the critical point of F - 2 cos t with Newton on dF.
        let mut lc = root;
        let mut sc = s;
        for _ in 0..30 {
            if sc.d2f.norm() < 1e-18 * (1.0 + lc.norm().powi(2)) {
                break;
            }
            let step = sc.df / sc.d2f;
            lc -= step;
            sc = monodromy_with(&ev, lc, cls_tol)?;
            if step.norm() < 1e-15 * (1.0 + lc.norm()) {
                break;
            }
        }
        let rc = (sc.f - target).norm();
        let gap_model = if sc.d2f.norm() > 0.0 {
            2.0 * (2.0 * rc / sc.d2f.norm()).sqrt()
        } else {
            f64::INFINITY
        };
        if gap_model < double_floor_lo(lc) {
            flag = MultiplicityFlag::DoubleSuspected;
            root = lc;
            residual = rc;
        }
    }

    Ok(RootResult { lambda: root, multiplicity_flag: flag, residual, iterations })
}

/// Minimum admissible `|F - 2 cos t|` on a counting contour.
pub const CONTOUR_FLOOR: f64 = 1e-8;

/// Number of roots of `F(lambda) = 2 cos t` inside the disk of the given
/// center and radius, counted with multiplicity by the argument principle.
pub fn count_roots_in_disk(
    p: &PotentialSpec,
    t: f64,
    center: Complex64,
    radius: f64,
    quad_points: usize,
) -> Result<i64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let n_pts = quad_points.max(256);
    let ev = PotentialEvaluator::new(p);
    let target = Complex64::new(2.0 * t.cos(), 0.0);
    let tol = 1e-12;

    let samples: Vec<(Complex64, DiscriminantSample)> = (0..n_pts)
        .into_par_iter()
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n_pts as f64;
            let dir = Complex64::from_polar(1.0, theta);
            let lambda = center + radius * dir;
            monodromy_with(&ev, lambda, tol).map(|s| (dir, s))
        })
        .collect::<Result<_>>()?;

    let min_mod = samples
        .iter()
        .map(|(_, s)| (s.f - target).norm())
        .fold(f64::INFINITY, f64::min);
    if min_mod < CONTOUR_FLOOR {
        return Err(Error::ContourNearRoot { min_modulus: min_mod, floor: CONTOUR_FLOOR });
    }

    // (1 / 2 pi i) * integral of F' / (F - w) dlambda, trapezoid in the
    // contour angle; dlambda = i r e^{i theta} dtheta.
    let acc: Complex64 = samples
        .iter()
        .map(|(dir, s)| s.df / (s.f - target) * dir)
        .sum();
    let winding = acc * radius / n_pts as f64;
    let rounded = winding.re.round();
    if (winding.re - rounded).abs() > 0.1 || winding.im.abs() > 0.1 {
        return Err(Error::WindingNotInteger { value: winding.re });
    }
    Ok(rounded as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Closed form for the zero potential: F = 2 cos(sqrt(lambda)).
    fn free_f(lambda: Complex64) -> Complex64 {
        2.0 * lambda.sqrt().cos()
    }

    fn free_df(lambda: Complex64) -> Complex64 {
        // dF/dlambda = -sin(sqrt(lambda)) / sqrt(lambda)
        let xi = lambda.sqrt();
        if xi.norm() < 1e-12 {
            // series: -1 + lambda/6 ...
            return c(-1.0, 0.0) + lambda / 6.0;
        }
        -xi.sin() / xi
    }

    #[test]
    fn free_examples() {
        let p = PotentialSpec::free();
        let s = monodromy(&p, c(PI * PI, 0.0), 1e-12).unwrap();
        assert!((s.f - c(-2.0, 0.0)).norm() < 1e-10);
        assert!(s.df.norm() < 1e-10);
        let s0 = monodromy(&p, c(0.0, 0.0), 1e-12).unwrap();
        assert!((s0.f - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn free_discriminant_matches_closed_form_at_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let p = PotentialSpec::free();
        for _ in 0..50 {
            let lambda = c(rng.gen_range(1.0..400.0), rng.gen_range(-3.0..3.0));
            let s = monodromy(&p, lambda, 1e-12).unwrap();
            assert!(
                (s.f - free_f(lambda)).norm() < 1e-9,
                "F mismatch at {lambda}: {} vs {}",
                s.f,
                free_f(lambda)
            );
            assert!((s.df - free_df(lambda)).norm() < 1e-9);
        }
    }

    #[test]
    fn gasymov_discriminant_equals_free_discriminant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let p = PotentialSpec::gasymov(c(1.0, 0.0));
        for _ in 0..50 {
            let lambda = c(rng.gen_range(1.0..400.0), rng.gen_range(-3.0..3.0));
            let s = monodromy(&p, lambda, 1e-12).unwrap();
            assert!((s.f - free_f(lambda)).norm() < 1e-9, "lambda = {lambda}");
        }
        let s = monodromy(&p, c(10.0, 3.0), 1e-12).unwrap();
        assert!((s.f - free_f(c(10.0, 3.0))).norm() < 1e-10);
    }

    #[test]
    fn wronskian_invariant() {
        for p in [
            PotentialSpec::free(),
            PotentialSpec::decay(1.0, 2.0, 64),
            PotentialSpec::gasymov(c(2.0, 0.5)),
        ] {
            for lambda in [c(1.0, 0.0), c(100.0, 5.0), c(1600.0, -20.0), c(15800.0, 0.0)] {
                let s = monodromy(&p, lambda, 1e-12).unwrap();
                assert!(
                    s.wronskian_defect() < 1e-8,
                    "{} at {lambda}: defect {:.3e}",
                    p.label(),
                    s.wronskian_defect()
                );
            }
        }
    }

    #[test]
    fn growth_estimate_trend() {
        // |F - 2 cos sqrt(lambda)| decays along real lambda -> +inf.
        let p = PotentialSpec::decay(1.0, 2.0, 64);
        let vals: Vec<f64> = [100.0, 400.0, 1600.0, 6400.0]
            .iter()
            .map(|&l| {
                let s = monodromy(&p, c(l, 0.0), 1e-12).unwrap();
                (s.f - free_f(c(l, 0.0))).norm()
            })
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] < w[0], "no decay: {vals:?}");
        }
    }

    #[test]
    fn solve_free_simple_root() {
        let p = PotentialSpec::free();
        let r = solve_characteristic(&p, 1.0, c(52.0, 0.0), 1e-10).unwrap();
        let expect = (2.0 * PI + 1.0).powi(2);
        assert_eq!(r.multiplicity_flag, MultiplicityFlag::Simple);
        assert!((r.lambda - c(expect, 0.0)).norm() < 1e-8 * expect);
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn solve_free_double_root() {
        let p = PotentialSpec::free();
        let r = solve_characteristic(&p, 0.0, c(39.0, 0.0), 1e-10).unwrap();
        let expect = (2.0 * PI).powi(2);
        assert_eq!(r.multiplicity_flag, MultiplicityFlag::DoubleSuspected);
        assert!(
            (r.lambda - c(expect, 0.0)).norm() < 1e-9 * expect,
            "got {} want {expect}",
            r.lambda
        );
    }

    #[test]
    fn solve_idempotent_and_symmetric_in_t() {
        let p = PotentialSpec::decay(1.0, 2.0, 64);
        let seed = c((10.0 * PI + 0.05).powi(2), 0.0);
        let r1 = solve_characteristic(&p, 0.05, seed, 1e-10).unwrap();
        let r2 = solve_characteristic(&p, 0.05, r1.lambda, 1e-10).unwrap();
        assert!((r1.lambda - r2.lambda).norm() < 1e-10 * (1.0 + r1.lambda.norm()));
        let rm = solve_characteristic(&p, -0.05, seed, 1e-10).unwrap();
        assert!((r1.lambda - rm.lambda).norm() < 1e-9 * (1.0 + r1.lambda.norm()));
    }

    #[test]
    fn decay_simple_roots_not_flagged_at_t0() {
        // Smallest gaps the classifier must resolve: the n = 20 pair at t = 0.
        let p = PotentialSpec::decay(1.0, 2.0, 64);
        for n in [8i64, 20] {
            let nf = n as f64;
            let base = (2.0 * PI * nf).powi(2);
            let p2n = (2.0 * nf).powi(-2);
            for sign in [-1.0, 1.0] {
                let r = solve_characteristic(&p, 0.0, c(base + sign * p2n, 0.0), 1e-9).unwrap();
                assert_eq!(
                    r.multiplicity_flag,
                    MultiplicityFlag::Simple,
                    "n = {n}, sign = {sign}, lambda = {}",
                    r.lambda
                );
            }
        }
    }

    #[test]
    fn winding_free_disks() {
        let p = PotentialSpec::free();
        // Both roots (10 pi +- 0.05)^2 inside.
        let center = c((10.0 * PI + 0.05).powi(2), 0.0);
        let n = count_roots_in_disk(&p, 0.05, center, 15.0 * PI * 5.0 * 0.1, 256).unwrap();
        assert_eq!(n, 2);
        // Single simple root.
        let center = c((2.0 * PI + 1.0).powi(2), 0.0);
        let n = count_roots_in_disk(&p, 1.0, center, 1.0, 256).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn winding_rejects_contour_through_root() {
        let p = PotentialSpec::free();
        // Root (2 pi + 1)^2 sits exactly on a radius-0 contour; use a center
        // offset by the radius so the root lies on the circle.
        let root = (2.0 * PI + 1.0).powi(2);
        let out = count_roots_in_disk(&p, 1.0, c(root - 1.0, 0.0), 1.0, 256);
        assert!(matches!(out, Err(Error::ContourNearRoot { .. })));
    }
}
