//! Projections onto the per-user feasible set and the waterfilling operator.
//!
//! The feasible set of each user is a capped simplex
//! `{x : 0 <= x_k <= cap_k, (1/n) sum_k x_k = 1}`. The Euclidean projection
//! of `-x0` onto it has the closed form `x_k = clamp(mu - x0_k, 0, cap_k)`
//! with the water level `mu` fixed by the budget; the waterfilling best
//! response is exactly this projection applied to the per-carrier
//! interference-plus-noise-to-signal vector. The water level is found by an
//! exact breakpoint walk: sort the `2n` knots `{x0_k, x0_k + cap_k}`, sweep
//! the piecewise-linear budget function segment by segment, and solve the
//! linear segment containing the target. `O(n log n)`, bit-reproducible. A
//! safeguarded bisection is kept as an independent cross-check path.
//!
//! Entries of `x0` and caps may be `+inf`: an infinite `x0_k` marks a dead
//! carrier that never loads, an infinite cap an unmasked carrier.

use crate::model::{PowerProfile, Scenario};
use crate::{Error, Result};

/// The per-user feasible set: box `[0, caps]` intersected with the
/// mean-`target_mean` hyperplane.
#[derive(Debug, Clone, PartialEq)]
pub struct CappedSimplex {
    pub n: usize,
    pub caps: Vec<f64>,
    pub target_mean: f64,
}

impl CappedSimplex {
    /// Strictly feasible set with unit target mean.
    pub fn new(caps: Vec<f64>) -> Result<Self> {
        Self::with_target_mean(caps, 1.0)
    }

    pub fn with_target_mean(caps: Vec<f64>, target_mean: f64) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::Domain("capped simplex needs n >= 1".into()));
        }
        if !(target_mean > 0.0) {
            return Err(Error::Domain("target mean must be positive".into()));
        }
        if caps.iter().any(|c| c.is_nan() || *c < 0.0) {
            return Err(Error::Domain("caps must be nonnegative".into()));
        }
        let n = caps.len();
        let mean: f64 = caps.iter().sum::<f64>() / n as f64; // +inf caps make this +inf
        if !(mean > target_mean) {
            return Err(Error::Feasibility(format!(
                "cap mean {mean} does not strictly exceed target mean {target_mean}"
            )));
        }
        Ok(CappedSimplex {
            n,
            caps,
            target_mean,
        })
    }

    fn target_sum(&self) -> f64 {
        self.target_mean * self.n as f64
    }
}

/// Result of a projection onto a [`CappedSimplex`]: the allocation, its water
/// level, and the index sets clamped at zero, interior, and clamped at cap.
#[derive(Debug, Clone)]
pub struct WaterfillingResult {
    pub allocation: Vec<f64>,
    pub water_level: f64,
    pub zero_set: Vec<usize>,
    pub interior_set: Vec<usize>,
    pub capped_set: Vec<usize>,
}

/// Solves `sum_k clamp(theta / w_k - a_k, 0, caps_k) = target` for the
/// left-most `theta`. Entries with `a_k = +inf` or `caps_k = 0` never load.
/// Weights must be positive and finite.
fn weighted_level(a: &[f64], inv_w: &[f64], caps: &[f64], target: f64) -> Result<f64> {
    // Breakpoints in theta: carrier k starts loading at a_k * w_k and
    // saturates at (a_k + caps_k) * w_k; between them it adds slope 1/w_k.
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * a.len());
    for k in 0..a.len() {
        if a[k].is_nan() || a[k] == f64::NEG_INFINITY {
            return Err(Error::Domain(
                "projection input entries must be finite or +inf".into(),
            ));
        }
        if a[k] == f64::INFINITY || caps[k] == 0.0 {
            continue;
        }
        let w = 1.0 / inv_w[k];
        events.push((a[k] * w, inv_w[k]));
        if caps[k].is_finite() {
            events.push(((a[k] + caps[k]) * w, -inv_w[k]));
        }
    }
    if events.is_empty() {
        return Err(Error::Feasibility(
            "no carrier can load: all caps zero or offsets infinite".into(),
        ));
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut theta = events[0].0;
    let mut filled = 0.0_f64;
    let mut slope = 0.0_f64;
    for &(v, ds) in &events {
        if v > theta {
            let reach = filled + slope * (v - theta);
            if reach >= target && slope > 0.0 {
                return Ok(theta + (target - filled) / slope);
            }
            filled = reach;
            theta = v;
        }
        slope += ds;
    }
    if slope > 0.0 {
        // Some caps are infinite; extend the last segment.
        return Ok(theta + (target - filled) / slope);
    }
    if filled >= target {
        return Ok(theta);
    }
    Err(Error::Feasibility(format!(
        "budget {target} exceeds total capacity {filled}"
    )))
}

/// Euclidean projection of `-x0` onto the capped simplex: the unique
/// minimizer of `||x - (-x0)||_2` over the set, in the closed form
/// `x_k = clamp(mu - x0_k, 0, caps_k)` with `mu` solving the budget
/// constraint exactly. `x0` may be any real vector (entries `+inf` mark
/// carriers that never load).
pub fn project_capped_simplex(x0: &[f64], set: &CappedSimplex) -> Result<WaterfillingResult> {
    let mu = water_level(x0, set)?;
    let mut allocation = vec![0.0; set.n];
    let (mut zero_set, mut interior_set, mut capped_set) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..set.n {
        let raw = mu - x0[k];
        let v = if raw <= 0.0 {
            0.0
        } else if raw >= set.caps[k] {
            set.caps[k]
        } else {
            raw
        };
        allocation[k] = v;
        if v == 0.0 {
            zero_set.push(k);
        } else if v == set.caps[k] {
            capped_set.push(k);
        } else {
            interior_set.push(k);
        }
    }
    Ok(WaterfillingResult {
        allocation,
        water_level: mu,
        zero_set,
        interior_set,
        capped_set,
    })
}

/// The water level `mu` with `(1/n) sum_k clamp(mu - x0_k, 0, caps_k)` equal
/// to the target mean; left-most solution on flat segments.
pub fn water_level(x0: &[f64], set: &CappedSimplex) -> Result<f64> {
    if x0.len() != set.n {
        return Err(Error::Domain(
            "x0 length must match the set dimension".into(),
        ));
    }
    let ones = vec![1.0; set.n];
    weighted_level(x0, &ones, &set.caps, set.target_sum())
}

/// Safeguarded-bisection water level, kept as an independent cross-check of
/// the breakpoint walk. Agrees with [`water_level`] to the given tolerance.
pub fn water_level_bisection(x0: &[f64], set: &CappedSimplex, tol: f64) -> Result<f64> {
    let target = set.target_sum();
    let f = |mu: f64| -> f64 {
        (0..set.n)
            .map(|k| {
                if x0[k] == f64::INFINITY {
                    0.0
                } else {
                    (mu - x0[k]).clamp(0.0, set.caps[k])
                }
            })
            .sum()
    };
    let finite_min = x0
        .iter()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if finite_min == f64::INFINITY {
        return Err(Error::Feasibility("all carriers dead".into()));
    }
    let mut lo = finite_min;
    let mut hi = finite_min + 1.0;
    let mut guard = 0;
    while f(hi) < target {
        hi = finite_min + (hi - finite_min) * 2.0;
        guard += 1;
        if guard > 4096 {
            return Err(Error::Feasibility("budget unreachable".into()));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Per-carrier interference-plus-noise to signal ratio of user `q`:
/// `insr_k = Gamma_q (1 + sum_{r != q} |H_rq(k)|^2 p_r(k)) / |H_qq(k)|^2`,
/// with `+inf` where the direct gain vanishes.
pub fn insr_vector(s: &Scenario, q: usize, p_others: &PowerProfile) -> Vec<f64> {
    let mut out = vec![0.0; s.num_carriers];
    for k in 0..s.num_carriers {
        let direct = s.gain_sq[q][q][k];
        if direct == 0.0 {
            out[k] = f64::INFINITY;
            continue;
        }
        let mut interference = 0.0;
        for r in 0..s.num_users {
            if r != q {
                interference += s.gain_sq[r][q][k] * p_others.powers[r][k];
            }
        }
        out[k] = s.snr_gap[q] * (1.0 + interference) / direct;
    }
    out
}

/// The feasible set of user `q` as defined by its spectral mask.
pub fn user_simplex(s: &Scenario, q: usize) -> Result<CappedSimplex> {
    CappedSimplex::new(s.mask[q].clone())
}

/// The effective feasible set of user `q`: mask caps with the carriers
/// outside `D_q` forced to zero.
pub fn effective_simplex(s: &Scenario, q: usize) -> Result<CappedSimplex> {
    let caps = (0..s.num_carriers)
        .map(|k| {
            if s.usable_carriers[q][k] {
                s.mask[q][k]
            } else {
                0.0
            }
        })
        .collect();
    CappedSimplex::new(caps)
}

/// Waterfilling best response of user `q` against `p_others`: the projection
/// of `-insr_q` onto the user's feasible set.
pub fn waterfill_response(s: &Scenario, q: usize, p_others: &PowerProfile) -> Result<Vec<f64>> {
    let insr = insr_vector(s, q, p_others);
    let set = user_simplex(s, q)?;
    Ok(project_capped_simplex(&insr, &set)?.allocation)
}

/// Projection of `x0` onto the set in the metric `||.||_G`: the unique
/// minimizer of `(x - x0)^T G (x - x0)`. `G` must be symmetric positive
/// definite (checked by attempted Cholesky factorization). Identity reduces
/// to the Euclidean projection, diagonal `G` to a weighted water level in
/// closed form; a general `G` is handled by projected gradient descent with
/// Armijo backtracking, terminating on a KKT residual below `1e-10`.
pub fn project_metric(x0: &[f64], set: &CappedSimplex, g: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = set.n;
    if x0.len() != n || g.len() != n || g.iter().any(|row| row.len() != n) {
        return Err(Error::Matrix("G must be n x n matching the set".into()));
    }
    let scale = g.iter().flatten().fold(0.0_f64, |a, &b| a.max(b.abs()));
    for i in 0..n {
        for j in 0..i {
            if (g[i][j] - g[j][i]).abs() > 1e-9 * scale.max(1.0) {
                return Err(Error::Matrix("G is not symmetric".into()));
            }
        }
    }
    if cholesky(g).is_none() {
        return Err(Error::Matrix("G is not positive definite".into()));
    }

    if g.iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, &v)| i == j || v == 0.0))
    {
        let w: Vec<f64> = (0..n).map(|k| g[k][k]).collect();
        return project_weighted(x0, set, &w);
    }

    // Projected gradient on h(x) = (x - x0)^T G (x - x0).
    let lam_max = sym_spectral_norm(g);
    let step = 1.0 / (2.0 * lam_max);

    let euclid = |v: &[f64]| -> Result<Vec<f64>> {
        let neg: Vec<f64> = v.iter().map(|&t| -t).collect();
        Ok(project_capped_simplex(&neg, set)?.allocation)
    };

    let h = |x: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            let mut gi = 0.0;
            for j in 0..n {
                gi += g[i][j] * (x[j] - x0[j]);
            }
            acc += (x[i] - x0[i]) * gi;
        }
        acc
    };
    let grad = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 2.0 * (0..n).map(|j| g[i][j] * (x[j] - x0[j])).sum::<f64>())
            .collect()
    };

    let mut x = euclid(x0)?;
    for _ in 0..1_000_000 {
        let gr = grad(&x);
        let trial: Vec<f64> = x.iter().zip(&gr).map(|(&xi, &gi)| xi - step * gi).collect();
        let proj = euclid(&trial)?;
        let residual = x
            .iter()
            .zip(&proj)
            .fold(0.0_f64, |a, (&xi, &pi)| a.max((xi - pi).abs()));
        if residual < 1e-10 {
            return Ok(proj);
        }
        // Armijo backtracking on the prox-gradient sufficient decrease.
        let mut s = step;
        let hx = h(&x);
        let mut next = proj;
        loop {
            let lin: f64 = gr
                .iter()
                .zip(next.iter().zip(&x))
                .map(|(&gi, (&ni, &xi))| gi * (ni - xi))
                .sum();
            let quad: f64 = next
                .iter()
                .zip(&x)
                .map(|(&ni, &xi)| (ni - xi) * (ni - xi))
                .sum();
            if h(&next) <= hx + lin + quad / (2.0 * s) + 1e-15 {
                break;
            }
            s *= 0.5;
            let trial: Vec<f64> = x.iter().zip(&gr).map(|(&xi, &gi)| xi - s * gi).collect();
            next = euclid(&trial)?;
        }
        x = next;
    }
    Ok(x)
}

/// Closed-form projection in a diagonal metric `G = diag(w)`:
/// `x_k = clamp(x0_k + theta / w_k, 0, caps_k)` with `theta` from the
/// weighted breakpoint walk.
pub fn project_weighted(x0: &[f64], set: &CappedSimplex, w: &[f64]) -> Result<Vec<f64>> {
    if w.iter().any(|&wk| !(wk > 0.0) || !wk.is_finite()) {
        return Err(Error::Matrix(
            "diagonal metric weights must be positive".into(),
        ));
    }
    let a: Vec<f64> = x0.iter().map(|&v| -v).collect();
    let inv_w: Vec<f64> = w.iter().map(|&wk| 1.0 / wk).collect();
    let theta = weighted_level(&a, &inv_w, &set.caps, set.target_sum())?;
    Ok((0..set.n)
        .map(|k| {
            if x0[k] == f64::NEG_INFINITY {
                0.0
            } else {
                (x0[k] + theta / w[k]).clamp(0.0, set.caps[k])
            }
        })
        .collect())
}

/// Cholesky factor (lower triangular) of a symmetric matrix, `None` when the
/// matrix is not positive definite.
pub(crate) fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `A x = b` given the Cholesky factor `L` of `A`.
pub(crate) fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Largest eigenvalue magnitude of a symmetric matrix by power iteration.
pub(crate) fn sym_spectral_norm(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut lam = 0.0;
    for _ in 0..10_000 {
        let mut y = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                y[i] += a[i][j] * x[j];
            }
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for v in &mut y {
            *v /= norm;
        }
        let next = norm;
        if (next - lam).abs() <= 1e-13 * next.max(1.0) {
            return next;
        }
        lam = next;
        x = y;
    }
    lam
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::scenario_from_gains;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_projection() {
        let set = CappedSimplex::new(vec![2.0, 2.0]).unwrap();
        let r = project_capped_simplex(&[0.0, 0.0], &set).unwrap();
        assert_relative_eq!(r.allocation[0], 1.0);
        assert_relative_eq!(r.allocation[1], 1.0);
        assert_relative_eq!(r.water_level, 1.0);
        assert_eq!(r.interior_set, vec![0, 1]);
    }

    #[test]
    fn cap_binds() {
        // x0=(0,1), caps=(1.2,2) -> allocation (1.2, 0.8), mu = 1.8
        let set = CappedSimplex::new(vec![1.2, 2.0]).unwrap();
        let r = project_capped_simplex(&[0.0, 1.0], &set).unwrap();
        assert_relative_eq!(r.allocation[0], 1.2, max_relative = 1e-12);
        assert_relative_eq!(r.allocation[1], 0.8, max_relative = 1e-12);
        assert_relative_eq!(r.water_level, 1.8, max_relative = 1e-12);
        assert_eq!(r.capped_set, vec![0]);
        assert_eq!(r.interior_set, vec![1]);
    }

    #[test]
    fn three_carrier_interior() {
        let set = CappedSimplex::new(vec![1.5, 1.5, 1.5]).unwrap();
        let r = project_capped_simplex(&[0.2, 0.5, 1.0], &set).unwrap();
        let mu = 1.7 / 3.0 + 1.0;
        assert_relative_eq!(r.water_level, mu, max_relative = 1e-12);
        assert_relative_eq!(r.allocation[0], mu - 0.2, max_relative = 1e-12);
        assert_relative_eq!(r.allocation[1], mu - 0.5, max_relative = 1e-12);
        assert_relative_eq!(r.allocation[2], mu - 1.0, max_relative = 1e-12);
    }

    #[test]
    fn water_level_uncapped_uniform() {
        let set = CappedSimplex::new(vec![f64::INFINITY, f64::INFINITY]).unwrap();
        let a = 0.7;
        let mu = water_level(&[a, a], &set).unwrap();
        assert_relative_eq!(mu, 1.0 + a, max_relative = 1e-12);
    }

    #[test]
    fn water_level_matches_bisection() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = 5;
            let caps: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
            if caps.iter().sum::<f64>() <= n as f64 {
                continue;
            }
            let set = CappedSimplex::new(caps).unwrap();
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..3.0)).collect();
            let walk = water_level(&x0, &set).unwrap();
            let bis = water_level_bisection(&x0, &set, 1e-13).unwrap();
            assert!((walk - bis).abs() < 1e-12, "walk {walk} vs bisection {bis}");
        }
    }

    #[test]
    fn dead_and_capped_carriers() {
        // Strong insr on carrier 2 pushes all power to carrier 1 at its cap.
        let set = CappedSimplex::new(vec![2.0, 2.0]).unwrap();
        let r = project_capped_simplex(&[0.1, 10.0], &set).unwrap();
        assert_eq!(r.allocation, vec![2.0, 0.0]);
        assert_relative_eq!(r.water_level, 2.1, max_relative = 1e-12);

        let r = project_capped_simplex(&[0.5, f64::INFINITY], &set).unwrap();
        assert_eq!(r.allocation, vec![2.0, 0.0]);
    }

    #[test]
    fn infeasible_set_rejected() {
        assert!(CappedSimplex::new(vec![0.5, 0.5]).is_err());
        assert!(CappedSimplex::new(vec![1.0, 1.0]).is_err());
        assert!(CappedSimplex::new(vec![-0.1, 3.0]).is_err());
    }

    #[test]
    fn insr_vector_cases() {
        let s = scenario_from_gains(vec![vec![vec![1.0, 1.0]]], 1.0, 3.0).unwrap();
        let p = PowerProfile::uniform(1, 2);
        assert_eq!(insr_vector(&s, 0, &p), vec![1.0, 1.0]);

        let g = vec![vec![vec![0.0, 1.0]]];
        let s = scenario_from_gains(g, 1.0, 3.0).unwrap();
        let v = insr_vector(&s, 0, &p);
        assert_eq!(v[0], f64::INFINITY);
        assert_eq!(v[1], 1.0);
    }

    #[test]
    fn insr_matches_recomputation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (q_n, n) = (2, 4);
        let gains: Vec<Vec<Vec<f64>>> = (0..q_n)
            .map(|_| {
                (0..q_n)
                    .map(|_| (0..n).map(|_| rng.random_range(0.1..2.0)).collect())
                    .collect()
            })
            .collect();
        let s = scenario_from_gains(gains.clone(), 1.3, 3.0).unwrap();
        let p = PowerProfile {
            powers: (0..q_n)
                .map(|_| (0..n).map(|_| rng.random_range(0.0..2.0)).collect())
                .collect(),
        };
        let v = insr_vector(&s, 1, &p);
        for k in 0..n {
            let expect = 1.3 * (1.0 + gains[0][1][k] * p.powers[0][k]) / gains[1][1][k];
            assert_relative_eq!(v[k], expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn flat_no_interference_uniform_response() {
        let s = scenario_from_gains(vec![vec![vec![1.0; 4]]], 1.0, 5.0).unwrap();
        let p = PowerProfile::uniform(1, 4);
        let r = waterfill_response(&s, 0, &p).unwrap();
        for v in r {
            assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn project_metric_identity_matches_euclidean() {
        let set = CappedSimplex::new(vec![1.5, 2.0, 1.2]).unwrap();
        let x0 = [0.3, -0.7, 1.4];
        let eye = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let via_metric = project_metric(&x0, &set, &eye).unwrap();
        let neg: Vec<f64> = x0.iter().map(|&v| -v).collect();
        let direct = project_capped_simplex(&neg, &set).unwrap().allocation;
        for (a, b) in via_metric.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn project_metric_diagonal_closed_form() {
        // Weighted waterfilling: p_k = clamp(mu / w_k - insr_k, 0, cap).
        let set = CappedSimplex::new(vec![3.0, 3.0, 3.0]).unwrap();
        let insr = [0.4, 0.9, 1.6];
        let w = [2.0, 1.0, 0.5];
        let x0: Vec<f64> = insr.iter().map(|&v| -v).collect();
        let g: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { w[i] } else { 0.0 }).collect())
            .collect();
        let got = project_metric(&x0, &set, &g).unwrap();
        // Solve for mu by bisection on the closed form.
        let f = |mu: f64| -> f64 {
            (0..3)
                .map(|k| (mu / w[k] - insr[k]).clamp(0.0, 3.0))
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0, 20.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 3.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        for k in 0..3 {
            let expect = (hi / w[k] - insr[k]).clamp(0.0, 3.0);
            assert!(
                (got[k] - expect).abs() < 1e-9,
                "k={k}: {} vs {expect}",
                got[k]
            );
        }
    }

    #[test]
    fn project_metric_rejects_bad_g() {
        let set = CappedSimplex::new(vec![2.0, 2.0]).unwrap();
        let asym = vec![vec![1.0, 0.5], vec![-0.5, 1.0]];
        assert!(matches!(
            project_metric(&[0.0, 0.0], &set, &asym),
            Err(Error::Matrix(_))
        ));
        let indef = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(
            project_metric(&[0.0, 0.0], &set, &indef),
            Err(Error::Matrix(_))
        ));
    }

    #[test]
    fn projection_is_idempotent_on_feasible_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.random_range(2..6usize);
            let caps: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
            if caps.iter().sum::<f64>() <= n as f64 {
                continue;
            }
            let set = CappedSimplex::new(caps).unwrap();
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
            let y = project_capped_simplex(&raw, &set).unwrap().allocation;
            let neg: Vec<f64> = y.iter().map(|&v| -v).collect();
            let again = project_capped_simplex(&neg, &set).unwrap().allocation;
            for (a, b) in y.iter().zip(&again) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
