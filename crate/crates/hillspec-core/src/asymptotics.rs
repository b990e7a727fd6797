//! Perturbation-series eigenvalue and eigenfunction asymptotics for the
//! fiber operators near the periodic (`t ~ 0`) and antiperiodic (`t ~ pi`)
//! edges, to arbitrary order.
//!
//! The machinery is a family of multi-index coefficient sums. A chain
//! `n_1, ..., n_k` over the support of the potential, with every partial
//! sum `P_s = n_1 + ... + n_s` avoiding the resonant index set, contributes
//!
//! ```text
//! q_{n_1} ... q_{n_k} q_{trail(P_k)} / prod_s [lambda - mu(P_s)^2]
//! ```
//!
//! where `mu(P) = 2 pi (n - P) + t` on the unprimed side and
//! `2 pi (n + P) - t` on the primed side. Summed over chains of length `k`
//! these give the terms `a_k, b_k, a'_k, b'_k` (trailing coefficient at
//! `-P_k` for the a-family and at `+-2n - P_k` for the b-family), and the
//! closed system they satisfy collapses to a quadratic whose two branches
//! drive the fixed-point iteration producing the eigenvalue to any order.
//! The antiperiodic edge uses the same chains with resonant set
//! `{0, +-(2n+1)}` and trailing offsets `+-(2n+1)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::discriminant::{solve_characteristic, MultiplicityFlag};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// Resonance floor: every chain denominator must exceed
/// `RESONANCE_FLOOR * (1 + |lambda|)` in modulus.
pub const RESONANCE_FLOOR: f64 = 1e-6;

/// Hard cap on the number of enumerated index chains per series term.
pub const CHAIN_BUDGET: u64 = 10_000_000;

/// Eigenvalue branch label; `J2` carries the `+sqrt(D)` branch near `t = 0`
/// and the leading `+n` frequency on both edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    J1,
    J2,
}

impl Branch {
    pub fn index(self) -> u8 {
        match self {
            Branch::J1 => 1,
            Branch::J2 => 2,
        }
    }
}

/// Which edge machinery a series evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `q_{2n}` machinery for quasimomenta near zero.
    Even,
    /// `q_{2n+1}` machinery (tilde functions) for quasimomenta near pi.
    Odd,
}

/// Quasimomentum regime relative to the configured edge width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    NearZero,
    Middle,
    NearPi,
}

pub fn region_of(t: f64, rho: f64) -> Region {
    if t <= rho {
        Region::NearZero
    } else if t < PI - rho {
        Region::Middle
    } else {
        Region::NearPi
    }
}

/// One of the eight series term families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    A,
    B,
    APrime,
    BPrime,
}

/// Tuning shared by the asymptotic operations.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticsConfig {
    /// Edge width separating near-zero / middle / near-pi.
    pub rho: f64,
    /// Series truncation depth.
    pub k_max: usize,
    /// Residual tolerance for the characteristic-equation delegate in the
    /// middle region.
    pub newton_tol: f64,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        Self { rho: crate::DEFAULT_RHO, k_max: 3, newton_tol: 1e-10 }
    }
}

/// Coefficient table flattened to a dense vector for O(1) chain lookups.
struct DenseCoeffs {
    offset: i64,
    values: Vec<Complex64>,
}

impl DenseCoeffs {
    fn new(p: &PotentialSpec, radius: i64) -> Self {
        let values = (-radius..=radius).map(|i| p.coeff(i)).collect();
        Self { offset: radius, values }
    }

    #[inline]
    fn get(&self, i: i64) -> Complex64 {
        let idx = i + self.offset;
        if idx < 0 || idx >= self.values.len() as i64 {
            Complex64::default()
        } else {
            self.values[idx as usize]
        }
    }
}

/// The resonant partial sums a side excludes: `{0, 2n}` for the unprimed
/// even chains, `{0, -2n}` primed; the antiperiodic side excludes
/// `{0, +-(2n+1)}` throughout.
fn excluded_sums(side: Side, primed: bool, n: i64) -> Vec<i64> {
    match side {
        Side::Even => {
            if primed {
                vec![0, -2 * n]
            } else {
                vec![0, 2 * n]
            }
        }
        Side::Odd => vec![0, 2 * n + 1, -(2 * n + 1)],
    }
}

/// All depths of the paired (a, b) chain sums (or their primed versions)
/// in a single tree traversal; the two families share chains and differ
/// only in the trailing coefficient.
///
/// In star mode the first potential factor is replaced by one and every
/// contribution is bucketed by the chain's output frequency `n - n_1`
/// into the supplied tables instead of being summed.
#[allow(clippy::too_many_arguments)]
fn chain_sums(
    p: &PotentialSpec,
    side: Side,
    primed: bool,
    n: i64,
    lambda: Complex64,
    t: f64,
    k_max: usize,
    mut star: Option<(&mut BTreeMap<i64, Complex64>, &mut BTreeMap<i64, Complex64>)>,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let support = p.support();
    let s = support.len() as u64;
    let leaves: u64 = (1..=k_max as u32).map(|k| s.saturating_pow(k)).fold(0, u64::saturating_add);
    if leaves > CHAIN_BUDGET {
        return Err(Error::BudgetExceeded { tuples: leaves, budget: CHAIN_BUDGET });
    }

    let trail_a = 0i64;
    let trail_b = match side {
        Side::Even => {
            if primed {
                -2 * n
            } else {
                2 * n
            }
        }
        Side::Odd => {
            if primed {
                -(2 * n + 1)
            } else {
                2 * n + 1
            }
        }
    };
    let excluded = excluded_sums(side, primed, n);
    let radius = p.support_bound() * (k_max as i64 + 1) + trail_b.abs() + 1;
    let dense = DenseCoeffs::new(p, radius);
    let floor = RESONANCE_FLOOR * (1.0 + lambda.norm());
    let denom = |partial: i64| -> Result<Complex64> {
        let freq = if primed {
            2.0 * PI * (n + partial) as f64 - t
        } else {
            2.0 * PI * (n - partial) as f64 + t
        };
        let d = lambda - freq * freq;
        if d.norm() < floor {
            return Err(Error::ResonantDenominator { partial_sum: partial, modulus: d.norm(), floor });
        }
        Ok(d)
    };

    let mut a_out = vec![Complex64::default(); k_max];
    let mut b_out = vec![Complex64::default(); k_max];
    // Explicit DFS frames: depth, partial sum, chain weight
    // q_{n_1}...q_{n_s} / prod denom, and the first index for star mode.
    let mut stack: Vec<(usize, i64, Complex64, i64)> = Vec::new();
    for &n1 in &support {
        if excluded.contains(&n1) {
            continue;
        }
        let d = denom(n1)?;
        let factor = if star.is_some() { Complex64::new(1.0, 0.0) } else { dense.get(n1) };
        stack.push((1, n1, factor / d, n1));
    }
    while let Some((depth, partial, weight, first)) = stack.pop() {
        let ta = weight * dense.get(trail_a - partial);
        let tb = weight * dense.get(trail_b - partial);
        match &mut star {
            Some((a_tbl, b_tbl)) => {
                let f = n - first;
                if ta.norm() > 0.0 {
                    *a_tbl.entry(f).or_default() += ta;
                }
                if tb.norm() > 0.0 {
                    *b_tbl.entry(f).or_default() += tb;
                }
            }
            None => {
                a_out[depth - 1] += ta;
                b_out[depth - 1] += tb;
            }
        }
        if depth < k_max {
            for &ns in &support {
                let next = partial + ns;
                if excluded.contains(&next) {
                    continue;
                }
                let d = denom(next)?;
                stack.push((depth + 1, next, weight * dense.get(ns) / d, first));
            }
        }
    }
    Ok((a_out, b_out))
}

/// One series term `a_k`, `b_k`, `a'_k`, `b'_k` (tilde analogues on the
/// antiperiodic side) as an exact finite sum over index chains.
pub fn series_term(
    p: &PotentialSpec,
    kind: TermKind,
    side: Side,
    k: usize,
    n: i64,
    lambda: Complex64,
    t: f64,
) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::InvalidParameter("series order k must be >= 1".into()));
    }
    let primed = matches!(kind, TermKind::APrime | TermKind::BPrime);
    let (a, b) = chain_sums(p, side, primed, n, lambda, t, k, None)?;
    Ok(match kind {
        TermKind::A | TermKind::APrime => a[k - 1],
        TermKind::B | TermKind::BPrime => b[k - 1],
    })
}

/// Per-depth values of the four series.
#[derive(Debug, Clone, Copy)]
pub struct TermRow {
    pub k: usize,
    pub a: Complex64,
    pub b: Complex64,
    pub a_prime: Complex64,
    pub b_prime: Complex64,
}

/// The assembled series data at one `(n, lambda, t)`.
#[derive(Debug, Clone)]
pub struct SeriesEvaluation {
    pub n: i64,
    pub t: f64,
    pub lambda: Complex64,
    pub k_max: usize,
    pub side: Side,
    pub a: Complex64,
    pub a_prime: Complex64,
    pub b: Complex64,
    pub b_prime: Complex64,
    /// `(A - A') / 2`.
    pub c: Complex64,
    /// `2 w C + C^2` with the edge frequency `w`.
    pub d1: Complex64,
    /// `q_+ B' + q_- B + B B'`.
    pub d2: Complex64,
    /// `w^2 + q_+ q_- + D1 + D2`.
    pub d: Complex64,
    pub term_table: Vec<TermRow>,
}

/// Edge frequency: `4 pi n t` on the even side, `2 pi (2n+1)(t - pi)` on
/// the odd side.
pub fn edge_frequency(side: Side, n: i64, t: f64) -> f64 {
    match side {
        Side::Even => 4.0 * PI * n as f64 * t,
        Side::Odd => 2.0 * PI * (2 * n + 1) as f64 * (t - PI),
    }
}

/// Leading coefficient pair `(q_+, q_-)` of the edge: `(q_{2n}, q_{-2n})`
/// or `(q_{2n+1}, q_{-2n-1})`.
pub fn edge_coeffs(p: &PotentialSpec, side: Side, n: i64) -> (Complex64, Complex64) {
    match side {
        Side::Even => (p.coeff(2 * n), p.coeff(-2 * n)),
        Side::Odd => (p.coeff(2 * n + 1), p.coeff(-2 * n - 1)),
    }
}

/// Evaluates `A, A', B, B'` up to depth `k_max` and assembles `C`, `D1`,
/// `D2`, `D`.
pub fn eval_series(
    p: &PotentialSpec,
    n: i64,
    lambda: Complex64,
    t: f64,
    k_max: usize,
    side: Side,
) -> Result<SeriesEvaluation> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    let (a_terms, b_terms) = chain_sums(p, side, false, n, lambda, t, k_max, None)?;
    let (ap_terms, bp_terms) = chain_sums(p, side, true, n, lambda, t, k_max, None)?;
    let mut term_table = Vec::with_capacity(k_max);
    let mut a = Complex64::default();
    let mut b = Complex64::default();
    let mut a_prime = Complex64::default();
    let mut b_prime = Complex64::default();
    for k in 1..=k_max {
        let row = TermRow {
            k,
            a: a_terms[k - 1],
            b: b_terms[k - 1],
            a_prime: ap_terms[k - 1],
            b_prime: bp_terms[k - 1],
        };
        a += row.a;
        b += row.b;
        a_prime += row.a_prime;
        b_prime += row.b_prime;
        term_table.push(row);
    }
    let c = (a - a_prime) / 2.0;
    let w = edge_frequency(side, n, t);
    let (qp, qm) = edge_coeffs(p, side, n);
    let d1 = 2.0 * w * c + c * c;
    let d2 = qp * b_prime + qm * b + b * b_prime;
    let d = w * w + qp * qm + d1 + d2;
    Ok(SeriesEvaluation { n, t, lambda, k_max, side, a, a_prime, b, b_prime, c, d1, d2, d, term_table })
}

/// Principal square root (nonnegative real part; on the branch cut the
/// root with nonnegative imaginary part). The flag reports a vanishing
/// real part to machine precision.
pub fn branch_sqrt(d: Complex64) -> (Complex64, bool) {
    let s = d.sqrt();
    let ambiguous = s.norm() > 0.0 && s.re.abs() < 1e-12 * s.norm();
    (s, ambiguous)
}

/// Sign in front of the principal `sqrt(D)` for a branch on a side. Near
/// zero `J2` takes `+`; near pi the antiperiodic labeling puts the leading
/// `+n` frequency on `J2`, which is the `-` root there.
fn sqrt_sign(side: Side, j: Branch) -> f64 {
    let base = match j {
        Branch::J1 => -1.0,
        Branch::J2 => 1.0,
    };
    match side {
        Side::Even => base,
        Side::Odd => -base,
    }
}

/// Principal asymptotic term of the eigenvalue in each regime.
pub fn first_order_eigenvalue(
    p: &PotentialSpec,
    n: i64,
    j: Branch,
    t: f64,
    rho: f64,
) -> Complex64 {
    let base = {
        let f = 2.0 * PI * n as f64 + t;
        Complex64::new(f * f, 0.0)
    };
    match region_of(t, rho) {
        Region::Middle => match j {
            Branch::J2 => base,
            Branch::J1 => {
                let f = 2.0 * PI * n as f64 - t;
                Complex64::new(f * f, 0.0)
            }
        },
        region => {
            let side = if region == Region::NearZero { Side::Even } else { Side::Odd };
            let w = edge_frequency(side, n, t);
            let (qp, qm) = edge_coeffs(p, side, n);
            let (s, _) = branch_sqrt(Complex64::new(w * w, 0.0) + qp * qm);
            base - w + sqrt_sign(side, j) * s
        }
    }
}

/// Eigenvalue (and later eigenfunction) data from the fixed-point
/// iteration of a given order.
#[derive(Debug, Clone)]
pub struct AsymptoticEigenpair {
    pub n: i64,
    pub j: Branch,
    pub t: f64,
    pub order: usize,
    pub region: Region,
    pub lambda: Complex64,
    /// Successive iterates, first-order value first.
    pub iterates: Vec<Complex64>,
    /// `Re sqrt(D)` vanished to machine precision somewhere along the way.
    pub branch_ambiguous: bool,
    /// Partner-frequency amplitude; only from [`eigenfunction_profile`].
    pub alpha: Option<Complex64>,
    /// Eigenfunction coefficient table over basis frequency indices;
    /// only from [`eigenfunction_profile`].
    pub profile: Option<Vec<(i64, Complex64)>>,
}

/// Runs the order-`m` fixed-point recursion for the eigenvalue. Exactly
/// `m - 1` series evaluations are performed (the recursion is an order
/// statement, not a contraction, so there is no early exit). In the middle
/// region the characteristic equation is solved directly instead, seeded
/// by the principal term.
pub fn fixed_point_eigenvalue(
    p: &PotentialSpec,
    n: i64,
    j: Branch,
    t: f64,
    m: usize,
    cfg: &AsymptoticsConfig,
) -> Result<AsymptoticEigenpair> {
    if m == 0 {
        return Err(Error::InvalidParameter("order m must be >= 1".into()));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("index n must be >= 1".into()));
    }
    let region = region_of(t, cfg.rho);
    if region == Region::Middle {
        let seed = first_order_eigenvalue(p, n, j, t, cfg.rho);
        let root = solve_characteristic(p, t, seed, cfg.newton_tol)?;
        return Ok(AsymptoticEigenpair {
            n,
            j,
            t,
            order: m,
            region,
            lambda: root.lambda,
            iterates: vec![root.lambda],
            branch_ambiguous: root.multiplicity_flag == MultiplicityFlag::DoubleSuspected,
            alpha: None,
            profile: None,
        });
    }

    let side = if region == Region::NearZero { Side::Even } else { Side::Odd };
    let base = {
        let f = 2.0 * PI * n as f64 + t;
        Complex64::new(f * f, 0.0)
    };
    let w = edge_frequency(side, n, t);
    let sign = sqrt_sign(side, j);

    let mut lambda = first_order_eigenvalue(p, n, j, t, cfg.rho);
    let mut iterates = vec![lambda];
    let mut ambiguous = false;
    for _ in 1..m {
        let ev = eval_series(p, n, lambda, t, cfg.k_max, side)?;
        let (s, amb) = branch_sqrt(ev.d);
        ambiguous |= amb;
        lambda = base + (ev.a + ev.a_prime) / 2.0 - w + sign * s;
        iterates.push(lambda);
    }
    Ok(AsymptoticEigenpair {
        n,
        j,
        t,
        order: m,
        region,
        lambda,
        iterates,
        branch_ambiguous: ambiguous,
        alpha: None,
        profile: None,
    })
}

/// Star series: the a/b chains with the first potential factor replaced by
/// the basis exponential, producing one coefficient per reachable
/// frequency `n - n_1`. Returns the pair of tables (A*, B*).
fn star_tables(
    p: &PotentialSpec,
    side: Side,
    n: i64,
    lambda: Complex64,
    t: f64,
    k_max: usize,
) -> Result<(BTreeMap<i64, Complex64>, BTreeMap<i64, Complex64>)> {
    let mut a_tbl = BTreeMap::new();
    let mut b_tbl = BTreeMap::new();
    chain_sums(p, side, false, n, lambda, t, k_max, Some((&mut a_tbl, &mut b_tbl)))?;
    Ok((a_tbl, b_tbl))
}

/// Floor for the alpha denominators `q_{+-2n} + B` (`q_{+-(2n+1)}` near pi).
pub const PROFILE_DENOMINATOR_FLOOR: f64 = 1e-12;

/// Order-`m` eigenfunction profile with the partner amplitude `alpha`.
///
/// `J2` is normalized to unit coefficient at frequency index `+n`; `J1` at
/// `-n` near zero and `-(n+1)` near pi.
pub fn eigenfunction_profile(
    p: &PotentialSpec,
    n: i64,
    j: Branch,
    t: f64,
    m: usize,
    cfg: &AsymptoticsConfig,
) -> Result<AsymptoticEigenpair> {
    let mut pair = fixed_point_eigenvalue(p, n, j, t, m, cfg)?;
    if pair.region == Region::Middle {
        return Err(Error::InvalidParameter(
            "eigenfunction profiles are defined in the edge regions only".into(),
        ));
    }
    let side = if pair.region == Region::NearZero { Side::Even } else { Side::Odd };
    let lambda = pair.lambda;
    let ev = eval_series(p, n, lambda, t, cfg.k_max, side)?;
    let (s, amb) = branch_sqrt(ev.d);
    pair.branch_ambiguous |= amb;
    let w = edge_frequency(side, n, t);
    let (qp, qm) = edge_coeffs(p, side, n);
    let sigma = sqrt_sign(side, j);

    let partner = match side {
        Side::Even => -n,
        Side::Odd => -(n + 1),
    };
    let (alpha, leading) = match j {
        Branch::J2 => {
            let denom = qp + ev.b;
            if denom.norm() < PROFILE_DENOMINATOR_FLOOR {
                return Err(Error::DenominatorFloor { index: n, modulus: denom.norm() });
            }
            ((-ev.c - w + sigma * s) / denom, n)
        }
        Branch::J1 => {
            let denom = qm + ev.b_prime;
            if denom.norm() < PROFILE_DENOMINATOR_FLOOR {
                return Err(Error::DenominatorFloor { index: n, modulus: denom.norm() });
            }
            ((ev.c + w + sigma * s) / denom, partner)
        }
    };

    let (a_star, b_star) = star_tables(p, side, n, lambda, t, cfg.k_max)?;

    // Unit coefficient at the leading frequency, alpha at the partner; the
    // u-terminated chains carry the u-normalization weight and the
    // v-terminated chains the v-weight.
    let (u_weight, v_weight) = match j {
        Branch::J2 => (Complex64::new(1.0, 0.0), alpha),
        Branch::J1 => (alpha, Complex64::new(1.0, 0.0)),
    };
    let mut profile: BTreeMap<i64, Complex64> = BTreeMap::new();
    profile.insert(leading, Complex64::new(1.0, 0.0));
    profile.insert(if j == Branch::J2 { partner } else { n }, alpha);
    for (f, val) in &a_star {
        *profile.entry(*f).or_default() += u_weight * val;
    }
    for (f, val) in &b_star {
        *profile.entry(*f).or_default() += v_weight * val;
    }

    pair.alpha = Some(alpha);
    pair.profile = Some(profile.into_iter().collect());
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn free_terms_vanish() {
        let p = PotentialSpec::free();
        for kind in [TermKind::A, TermKind::B, TermKind::APrime, TermKind::BPrime] {
            for side in [Side::Even, Side::Odd] {
                let v = series_term(&p, kind, side, 2, 5, c(1000.0, 1.0), 0.05).unwrap();
                assert_eq!(v, c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn cosine_first_order_a_term_matches_two_term_sum() {
        // Support {+-1}: a_1 at n = 4 is exactly
        // 1/(lambda - (6 pi + t)^2) + 1/(lambda - (10 pi + t)^2).
        let p = PotentialSpec::cosine(1, c(1.0, 0.0));
        let t = 0.05;
        let lambda = c((8.0 * PI + t).powi(2), 0.0);
        let got = series_term(&p, TermKind::A, Side::Even, 1, 4, lambda, t).unwrap();
        let expect = 1.0 / (lambda - (6.0 * PI + t).powi(2)) + 1.0 / (lambda - (10.0 * PI + t).powi(2));
        assert!((got - expect).norm() < 1e-15);
        assert!((got.re - 8.007e-4).abs() < 5e-7, "a_1 = {got}");
    }

    #[test]
    fn cosine_b_term_needs_reachable_trailing_index() {
        // q_k q_{2n-k} requires k and 2n-k in the support simultaneously;
        // impossible for support {+-1} at n = 4.
        let p = PotentialSpec::cosine(1, c(1.0, 0.0));
        let got = series_term(&p, TermKind::B, Side::Even, 1, 4, c(620.0, 0.0), 0.01).unwrap();
        assert_eq!(got, c(0.0, 0.0));
    }

    #[test]
    fn eval_series_free_gives_pure_edge_frequency() {
        let p = PotentialSpec::free();
        let t = 0.1;
        let lambda = c((6.0 * PI + t).powi(2), 0.0);
        let ev = eval_series(&p, 3, lambda, t, 3, Side::Even).unwrap();
        assert_eq!(ev.a, c(0.0, 0.0));
        assert_eq!(ev.b, c(0.0, 0.0));
        assert_eq!(ev.c, c(0.0, 0.0));
        let expect = (4.0 * PI * 3.0 * 0.1).powi(2);
        assert!((ev.d - c(expect, 0.0)).norm() < 1e-12);
        assert!((expect - 14.212230337568677).abs() < 1e-12);
    }

    #[test]
    fn eval_series_cosine2_at_t0() {
        // Symmetric potential at t = 0: C = 0 exactly, so D1 = 0 and
        // D = q_2 q_{-2} + D2 = 1 + o(1).
        let p = PotentialSpec::cosine(2, c(1.0, 0.0));
        let lambda = c((2.0 * PI).powi(2) + 1.0, 0.0);
        let ev = eval_series(&p, 1, lambda, 0.0, 2, Side::Even).unwrap();
        assert_eq!(ev.d1, c(0.0, 0.0));
        assert!((ev.c).norm() < 1e-15);
        assert!((ev.d - c(1.0, 0.0)).norm() < 0.05, "D = {}", ev.d);
    }

    #[test]
    fn resonant_denominator_is_reported() {
        let p = PotentialSpec::cosine(1, c(1.0, 0.0));
        // lambda exactly at the n_1 = 1 resonance (2 pi (n-1) + t)^2.
        let t = 0.05;
        let lambda = c((2.0 * PI * 3.0 + t).powi(2), 0.0);
        let out = series_term(&p, TermKind::A, Side::Even, 1, 4, lambda, t);
        assert!(matches!(out, Err(Error::ResonantDenominator { .. })));
    }

    #[test]
    fn chain_budget_is_enforced() {
        let p = PotentialSpec::decay(1.0, 2.0, 64);
        let lambda = c((10.0 * PI).powi(2), 0.0);
        let out = series_term(&p, TermKind::A, Side::Even, 4, 5, lambda, 0.0);
        assert!(matches!(out, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn first_order_free_collapses_to_squares() {
        let p = PotentialSpec::free();
        let rho = 0.1;
        let l1 = first_order_eigenvalue(&p, 3, Branch::J1, 0.1, rho);
        let l2 = first_order_eigenvalue(&p, 3, Branch::J2, 0.1, rho);
        assert!((l1 - c((6.0 * PI - 0.1).powi(2), 0.0)).norm() < 1e-10);
        assert!((l2 - c((6.0 * PI + 0.1).powi(2), 0.0)).norm() < 1e-10);
        // Near pi with the antiperiodic indexing: J2 keeps +n, J1 takes -(n+1).
        let t = PI - 0.05;
        let l1 = first_order_eigenvalue(&p, 3, Branch::J1, t, rho);
        let l2 = first_order_eigenvalue(&p, 3, Branch::J2, t, rho);
        assert!((l2 - c((6.0 * PI + t).powi(2), 0.0)).norm() < 1e-9);
        assert!((l1 - c((8.0 * PI - t).powi(2), 0.0)).norm() < 1e-9);
    }

    #[test]
    fn first_order_decay_at_t0_splits_by_p2n() {
        let p = PotentialSpec::decay(1.0, 2.0, 64);
        let base = (10.0 * PI).powi(2);
        let l1 = first_order_eigenvalue(&p, 5, Branch::J1, 0.0, 0.1);
        let l2 = first_order_eigenvalue(&p, 5, Branch::J2, 0.0, 0.1);
        assert!((l1 - c(base - 0.01, 0.0)).norm() < 1e-12);
        assert!((l2 - c(base + 0.01, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fixed_point_free_is_exact_at_every_order() {
        let p = PotentialSpec::free();
        let cfg = AsymptoticsConfig::default();
        let expect = (8.0 * PI + 0.07).powi(2);
        let pair = fixed_point_eigenvalue(&p, 4, Branch::J2, 0.07, 3, &cfg).unwrap();
        for it in &pair.iterates {
            assert!((it - c(expect, 0.0)).norm() < 1e-10 * expect);
        }
    }

    #[test]
    fn fixed_point_gasymov_double_point() {
        // q_{2n} q_{-2n} = 0 and t = 0: both branches collapse to (4 pi)^2.
        let p = PotentialSpec::gasymov(c(1.0, 0.0));
        let cfg = AsymptoticsConfig::default();
        let expect = (4.0 * PI).powi(2);
        for j in [Branch::J1, Branch::J2] {
            let pair = fixed_point_eigenvalue(&p, 2, j, 0.0, 1, &cfg).unwrap();
            assert!((pair.lambda - c(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn branch_signs_are_exact_opposites_at_first_order() {
        let p = PotentialSpec::decay(1.0, 2.0, 64);
        let (n, t) = (6, 0.04);
        let l1 = first_order_eigenvalue(&p, n, Branch::J1, t, 0.1);
        let l2 = first_order_eigenvalue(&p, n, Branch::J2, t, 0.1);
        let base = (2.0 * PI * n as f64 + t).powi(2) - 4.0 * PI * n as f64 * t;
        assert!(((l1 + l2) / 2.0 - c(base, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn term_magnitudes_decay_with_depth() {
        let p = PotentialSpec::decay(1.0, 2.0, 64);
        let n = 16;
        let t = 0.02;
        let lambda = first_order_eigenvalue(&p, n, Branch::J2, t, 0.1);
        let ev = eval_series(&p, n, lambda, t, 3, Side::Even).unwrap();
        let mags: Vec<f64> = ev.term_table.iter().map(|r| r.a.norm()).collect();
        assert!(mags[1] < mags[0], "{mags:?}");
        assert!(mags[2] < mags[1], "{mags:?}");
    }

    #[test]
    fn profile_free_hits_denominator_floor() {
        let p = PotentialSpec::free();
        let cfg = AsymptoticsConfig::default();
        let out = eigenfunction_profile(&p, 5, Branch::J2, 0.05, 1, &cfg);
        assert!(matches!(out, Err(Error::DenominatorFloor { .. })));
    }

    #[test]
    fn profile_cosine2_alpha_near_plus_minus_one() {
        let p = PotentialSpec::cosine(2, c(1.0, 0.0));
        let cfg = AsymptoticsConfig::default();
        let p1 = eigenfunction_profile(&p, 1, Branch::J1, 0.0, 2, &cfg).unwrap();
        let p2 = eigenfunction_profile(&p, 1, Branch::J2, 0.0, 2, &cfg).unwrap();
        let a1 = p1.alpha.unwrap();
        let a2 = p2.alpha.unwrap();
        assert!(a1.re > -1.2 && a1.re < -0.8, "alpha_11 = {a1}");
        assert!(a2.re > 0.8 && a2.re < 1.2, "alpha_12 = {a2}");
        assert!(a1.im.abs() < 1e-9);
        assert!(a2.im.abs() < 1e-9);
        // Unit normalization at the leading frequency.
        let lead = p2.profile.as_ref().unwrap().iter().find(|(f, _)| *f == 1).unwrap();
        assert_eq!(lead.1, c(1.0, 0.0));
    }
}
