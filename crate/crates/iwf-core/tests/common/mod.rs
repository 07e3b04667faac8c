//! Shared helpers for the integration suites: an exhaustive active-set QP
//! oracle for projections, a small dense linear solver, and random scenario
//! builders. Everything here is independent of the library's solver paths.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iwf_core::model::{scenario_from_gains, Scenario};

/// Gaussian elimination with partial pivoting. Returns `None` on a singular
/// system.
pub fn gaussian_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Exhaustive active-set oracle for
/// `minimize (x - y0)^T G (x - y0)  s.t.  0 <= x <= caps, sum x = target`:
/// enumerates all `3^n` clamp patterns, solves the equality-restricted
/// stationarity system of each, keeps the feasible candidates, and returns
/// the one with the smallest objective. `g = None` means the identity.
pub fn qp_oracle(
    y0: &[f64],
    caps: &[f64],
    g: Option<&[Vec<f64>]>,
    target_sum: f64,
) -> Option<Vec<f64>> {
    let n = y0.len();
    let eye: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let g = g.unwrap_or(&eye);
    let objective = |x: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (x[i] - y0[i]) * g[i][j] * (x[j] - y0[j]);
            }
        }
        acc
    };
    let feas_tol = 1e-7;
    let mut best: Option<(f64, Vec<f64>)> = None;

    for pattern in 0..3usize.pow(n as u32) {
        let mut kinds = vec![0u8; n]; // 0 = zero, 1 = interior, 2 = cap
        let mut m = pattern;
        for k in 0..n {
            kinds[k] = (m % 3) as u8;
            m /= 3;
        }
        if kinds
            .iter()
            .zip(caps)
            .any(|(&k, &c)| k == 2 && !c.is_finite())
        {
            continue;
        }
        let interior: Vec<usize> = (0..n).filter(|&k| kinds[k] == 1).collect();
        let mut x = vec![0.0; n];
        let mut fixed_sum = 0.0;
        for k in 0..n {
            if kinds[k] == 2 {
                x[k] = caps[k];
                fixed_sum += caps[k];
            }
        }
        let free_sum = target_sum - fixed_sum;

        if interior.is_empty() {
            if (free_sum).abs() > feas_tol {
                continue;
            }
        } else {
            // stationarity on interior coordinates:
            //   2 sum_j G_kj x_j - mu = 2 (G y0)_k  for k in interior,
            // plus the budget on the interior block.
            let m_sz = interior.len() + 1;
            let mut a = vec![vec![0.0; m_sz]; m_sz];
            let mut b = vec![0.0; m_sz];
            for (ri, &k) in interior.iter().enumerate() {
                for (ci, &j) in interior.iter().enumerate() {
                    a[ri][ci] = 2.0 * g[k][j];
                }
                a[ri][interior.len()] = -1.0;
                let mut rhs = 0.0;
                for j in 0..n {
                    rhs += 2.0 * g[k][j] * y0[j];
                    if kinds[j] == 2 {
                        rhs -= 2.0 * g[k][j] * caps[j];
                    }
                }
                b[ri] = rhs;
            }
            for (ci, _) in interior.iter().enumerate() {
                a[interior.len()][ci] = 1.0;
            }
            b[interior.len()] = free_sum;
            let Some(sol) = gaussian_solve(&a, &b) else {
                continue;
            };
            let mut ok = true;
            for (ri, &k) in interior.iter().enumerate() {
                x[k] = sol[ri];
                if x[k] < -feas_tol || x[k] > caps[k] + feas_tol {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
        }
        let sum: f64 = x.iter().sum();
        if (sum - target_sum).abs() > 1e-6 {
            continue;
        }
        let obj = objective(&x);
        match &best {
            Some((b_obj, _)) if *b_obj <= obj => {}
            _ => best = Some((obj, x)),
        }
    }
    best.map(|(_, x)| x)
}

/// Random normalized scenario with direct gains near one and cross gains up
/// to `coupling`, frequency-selective across `n` carriers.
pub fn random_gain_scenario(
    rng: &mut ChaCha8Rng,
    q_n: usize,
    n: usize,
    coupling: f64,
    mask_cap: f64,
) -> Scenario {
    let gains: Vec<Vec<Vec<f64>>> = (0..q_n)
        .map(|r| {
            (0..q_n)
                .map(|q| {
                    (0..n)
                        .map(|_| {
                            if r == q {
                                rng.random_range(0.4..2.0)
                            } else {
                                rng.random_range(0.0..coupling)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    scenario_from_gains(gains, 1.0, mask_cap).unwrap()
}

/// Random feasible caps for an `n`-dimensional capped simplex with unit
/// target mean.
pub fn random_feasible_caps(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let caps: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        if caps.iter().sum::<f64>() > n as f64 + 0.05 {
            return caps;
        }
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
