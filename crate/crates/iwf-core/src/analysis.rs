//! Post-run quantitative analysis: variational-inequality residuals,
//! convergence-exponent estimation against the theoretical lower bounds, and
//! empirical contraction probes of the best-response mapping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{self, rate_gradient, AlgorithmConfig, RunStatus, RunTrace};
use crate::conditions::{build_hmax, weighted_alpha_norm, WeightedDirection};
use crate::model::{PowerProfile, Scenario};
use crate::projection::{effective_simplex, insr_vector, project_capped_simplex};
use crate::{Error, Result};

/// Residual of the variational-inequality characterization of equilibrium,
/// evaluated through the projection fixed point with unit step:
/// `max_q || p_q - [p_q + grad_q R_q]_{P_q} ||_inf`. Zero exactly at Nash
/// equilibria.
pub fn vi_residual(s: &Scenario, p: &PowerProfile) -> f64 {
    let mut worst = 0.0_f64;
    for q in 0..s.num_users {
        let grad = rate_gradient(s, p, q);
        let set = crate::projection::user_simplex(s, q).expect("scenario mask must be feasible");
        let target: Vec<f64> = p.powers[q]
            .iter()
            .zip(&grad)
            .map(|(&pk, &gk)| -(pk + gk))
            .collect();
        let proj = project_capped_simplex(&target, &set)
            .expect("projection onto a feasible set cannot fail")
            .allocation;
        for k in 0..s.num_carriers {
            worst = worst.max((p.powers[q][k] - proj[k]).abs());
        }
    }
    worst
}

/// Norm used to measure iterate errors in exponent fits.
#[derive(Debug, Clone)]
pub enum ErrorNorm {
    /// Euclidean norm on the stacked profile (default).
    Euclidean,
    /// Block-maximum norm `max_q ||e_q||_2 / w_q`.
    BlockMax(Vec<f64>),
}

/// Fitted asymptotic convergence exponent of a run.
#[derive(Debug, Clone)]
pub struct ExponentEstimate {
    /// Per-iteration decay exponent `d` in `||e_n|| ~ C exp(-d n)`.
    pub exponent: f64,
    /// Records dropped as transient before the fit window.
    pub burn_in: usize,
    /// Root-mean-square residual of the least-squares fit on the log scale.
    pub fit_residual: f64,
    pub norm: String,
    pub points_used: usize,
}

fn profile_error(p: &PowerProfile, p_star: &PowerProfile, norm: &ErrorNorm) -> f64 {
    match norm {
        ErrorNorm::Euclidean => {
            let mut acc = 0.0;
            for (a, b) in p.powers.iter().zip(&p_star.powers) {
                for (x, y) in a.iter().zip(b) {
                    acc += (x - y) * (x - y);
                }
            }
            acc.sqrt()
        }
        ErrorNorm::BlockMax(w) => {
            let mut worst = 0.0_f64;
            for (q, (a, b)) in p.powers.iter().zip(&p_star.powers).enumerate() {
                let block: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(block / w[q]);
            }
            worst
        }
    }
}

/// Least-squares slope of `ln ||p^(n) - p*||` against the iteration index
/// over the geometric-decay window: iterates with error above half the
/// initial error (transient) or below `1e-12` (floor) are excluded. Requires
/// at least ten usable points.
pub fn estimate_exponent(
    trace: &RunTrace,
    p_star: &PowerProfile,
    norm: &ErrorNorm,
) -> Result<ExponentEstimate> {
    let e_init = profile_error(&trace.initial, p_star, norm);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut burn_in = 0usize;
    for rec in &trace.records {
        let e = profile_error(&rec.powers, p_star, norm);
        if e > 0.5 * e_init {
            burn_in += 1;
            continue;
        }
        if e < 1e-12 {
            continue;
        }
        xs.push(rec.iter as f64);
        ys.push(e.ln());
    }
    if xs.len() < 10 {
        return Err(Error::Estimation(format!(
            "only {} usable points in the decay window (need 10)",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = my + slope * (x - mx);
            (y - fit) * (y - fit)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentEstimate {
        exponent: -slope,
        burn_in,
        fit_residual: rms,
        norm: match norm {
            ErrorNorm::Euclidean => "euclidean".into(),
            ErrorNorm::BlockMax(_) => "block-max".into(),
        },
        points_used: xs.len(),
    })
}

/// Lower bounds on the convergence exponents of the smoothed sequential and
/// simultaneous waterfilling iterations.
#[derive(Debug, Clone, Copy)]
pub struct ExponentBounds {
    pub d_seq_low: f64,
    pub d_sim_low: f64,
    /// The weighted contraction modulus the bounds are derived from.
    pub modulus: f64,
}

/// Computes the exponent lower bounds
/// `d_seq_low = -ln( max_q [ alpha_q + (1 - alpha_q) (1/w_q) sum_r H_qr w_r ] )`
/// and `d_sim_low = Q d_seq_low`. Returns `None` when the weighted row-sum
/// condition fails for `w` (the bounds require it).
pub fn exponent_bounds(s: &Scenario, alphas: &[f64], w: &[f64]) -> Result<Option<ExponentBounds>> {
    if alphas.len() != s.num_users || w.len() != s.num_users {
        return Err(Error::Domain("alphas and w must have length Q".into()));
    }
    let c2 = crate::conditions::check_weighted(s, w, WeightedDirection::Row)?;
    if !c2.satisfied {
        return Ok(None);
    }
    let h = build_hmax(s);
    let modulus = weighted_alpha_norm(&h, alphas, w);
    if !(modulus < 1.0) {
        return Ok(None);
    }
    let d_seq_low = -modulus.ln();
    Ok(Some(ExponentBounds {
        d_seq_low,
        d_sim_low: s.num_users as f64 * d_seq_low,
        modulus,
    }))
}

/// Runs simultaneous waterfilling to a very tight residual to serve as the
/// reference equilibrium for exponent fits.
pub fn reference_equilibrium(s: &Scenario) -> Result<PowerProfile> {
    let cfg = AlgorithmConfig::sim_iwfa()
        .with_tol(1e-13)
        .with_max_sweeps(1_000_000);
    let p0 = PowerProfile::uniform(s.num_users, s.num_carriers);
    let trace = algorithms::run(s, &p0, &cfg)?;
    if trace.status == (RunStatus::Diverged { at_iter: 0 }) {
        return Err(Error::Estimation("reference run diverged".into()));
    }
    Ok(trace.final_profile().clone())
}

fn block_norm(diff: &[Vec<f64>], w: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for (q, row) in diff.iter().enumerate() {
        let n2: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(n2 / w[q]);
    }
    worst
}

/// Draws a random point of each user's effective feasible set (zero power
/// outside `D_q`) by projecting a random raw vector.
fn random_effective_profile(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<PowerProfile> {
    let mut powers = Vec::with_capacity(s.num_users);
    for q in 0..s.num_users {
        let set = effective_simplex(s, q)?;
        let scale: f64 = rng.random_range(0.5..3.0);
        let raw: Vec<f64> = (0..s.num_carriers)
            .map(|_| -rng.random_range(0.0..scale))
            .collect();
        powers.push(project_capped_simplex(&raw, &set)?.allocation);
    }
    Ok(PowerProfile { powers })
}

/// Empirical contraction probe of the smoothed simultaneous best-response
/// mapping on the effective strategy sets: draws `trials` random feasible
/// pairs and returns the largest observed ratio
/// `||T(p1) - T(p2)||_block / ||p1 - p2||_block` in the `w`-weighted
/// block-maximum norm. The theory bounds it by the weighted norm of the
/// smoothing-blended worst-ratio matrix.
pub fn contraction_probe(
    s: &Scenario,
    alphas: &[f64],
    w: &[f64],
    trials: usize,
    rng_seed: u64,
) -> Result<f64> {
    if alphas.len() != s.num_users || w.len() != s.num_users {
        return Err(Error::Domain("alphas and w must have length Q".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sets: Vec<_> = (0..s.num_users)
        .map(|q| effective_simplex(s, q))
        .collect::<Result<Vec<_>>>()?;

    let apply = |p: &PowerProfile| -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(s.num_users);
        for q in 0..s.num_users {
            let insr = insr_vector(s, q, p);
            let response = project_capped_simplex(&insr, &sets[q])?.allocation;
            out.push(
                p.powers[q]
                    .iter()
                    .zip(&response)
                    .map(|(&old, &new)| alphas[q] * old + (1.0 - alphas[q]) * new)
                    .collect(),
            );
        }
        Ok(out)
    };

    let mut max_ratio = 0.0_f64;
    for _ in 0..trials {
        let p1 = random_effective_profile(s, &mut rng)?;
        let p2 = random_effective_profile(s, &mut rng)?;
        let diff_in: Vec<Vec<f64>> = p1
            .powers
            .iter()
            .zip(&p2.powers)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let den = block_norm(&diff_in, w);
        if den < 1e-13 {
            continue;
        }
        let t1 = apply(&p1)?;
        let t2 = apply(&p2)?;
        let diff_out: Vec<Vec<f64>> = t1
            .iter()
            .zip(&t2)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        max_ratio = max_ratio.max(block_norm(&diff_out, w) / den);
    }
    Ok(max_ratio)
}
