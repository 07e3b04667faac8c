//! Random scenario generation and the two headline experiments: Monte Carlo
//! probability-of-condition curves over the interferer-distance ratio, and
//! aligned rate-versus-iteration traces comparing the solvers.
//!
//! Channels are multipath: each link draws `L` i.i.d. unit-variance complex
//! Gaussian taps and takes squared DFT magnitudes across the `N` carriers.
//! The direct-link budget (`P_q / sigma_q^2`, in dB) and the cross-link
//! budget at unit distance ratio are parameters; sweeping the distance ratio
//! `d_rq / d_qq` rescales every cross gain by `ratio^{-gamma}`. The cross
//! budget anchor sits at ratio 1.
//!
//! Determinism: all randomness flows through a counter-based generator
//! keyed by `(seed, trial)`. A trial reuses one channel draw across the
//! whole ratio grid (common random numbers), which makes each per-trial
//! satisfaction indicator monotone in the ratio and the aggregated curves
//! independent of scheduling order under any worker count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run, AlgorithmConfig, RunTrace};
use crate::conditions::{
    check_c1, check_c4_c5, check_c6, check_per_carrier, estimate_usable_carriers,
};
use crate::model::{PowerProfile, Scenario};
use crate::{Error, Result};

fn default_snr_gap() -> f64 {
    1.0
}
fn default_mask_cap() -> f64 {
    2.0
}
fn default_trace_eps() -> f64 {
    1e-6
}
fn default_carriers() -> usize {
    64
}
fn default_taps() -> usize {
    6
}

/// Parameters of the random-topology experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyParams {
    pub num_users: usize,
    #[serde(default = "default_carriers")]
    pub num_carriers: usize,
    /// Channel impulse-response length (number of taps).
    #[serde(default = "default_taps")]
    pub taps: usize,
    pub path_loss_exponent: f64,
    /// Grid of interferer-to-source distance ratios `d_rq / d_qq`.
    pub ratio_grid: Vec<f64>,
    /// Direct-link SNR `P_q / sigma_q^2` in dB.
    pub direct_snr_db: f64,
    /// Cross-link budget `P_r / (sigma_q^2 d_rq^gamma)` in dB at ratio 1.
    pub cross_budget_db: f64,
    #[serde(default = "default_snr_gap")]
    pub snr_gap: f64,
    /// Monte Carlo trials per grid point.
    pub trials: usize,
    pub seed: u64,
    /// Uniform normalized mask cap; `"inf"` recovers unmasked waterfilling.
    #[serde(default = "default_mask_cap", with = "crate::model::ext_f64")]
    pub mask_cap: f64,
    /// Residual level the trace experiment counts iterations down to.
    #[serde(default = "default_trace_eps")]
    pub trace_eps: f64,
}

impl TopologyParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_carriers == 0 {
            return Err(Error::Domain(
                "num_users and num_carriers must be >= 1".into(),
            ));
        }
        if self.taps == 0 || self.taps > self.num_carriers {
            return Err(Error::Domain("taps must satisfy 1 <= L <= N".into()));
        }
        if self.ratio_grid.is_empty() || self.ratio_grid.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Domain(
                "ratio_grid must be nonempty and positive".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::Domain("trials must be >= 1".into()));
        }
        if !(self.snr_gap >= 1.0) {
            return Err(Error::Domain("snr_gap must be >= 1".into()));
        }
        if !(self.mask_cap > 1.0) {
            return Err(Error::Feasibility(
                "mask_cap must strictly exceed 1 for a feasible budget".into(),
            ));
        }
        if !(self.trace_eps > 0.0) {
            return Err(Error::Domain("trace_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Complex impulse responses for every `(r, q)` link, indexed `[r][q][l]`.
pub type ChannelTaps = Vec<Vec<Vec<(f64, f64)>>>;

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws `L` i.i.d. standard complex Gaussian taps per link.
pub fn draw_taps(tp: &TopologyParams, rng: &mut ChaCha8Rng) -> ChannelTaps {
    let q_n = tp.num_users;
    (0..q_n)
        .map(|_| {
            (0..q_n)
                .map(|_| {
                    (0..tp.taps)
                        .map(|_| {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            (re / std::f64::consts::SQRT_2, im / std::f64::consts::SQRT_2)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Squared DFT magnitudes `|H(k)|^2` of an impulse response across `n` bins.
pub fn dft_power(taps: &[(f64, f64)], n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (l, &(tr, ti)) in taps.iter().enumerate() {
                let theta = -2.0 * std::f64::consts::PI * (k * l) as f64 / n as f64;
                let (c, s) = (theta.cos(), theta.sin());
                re += tr * c - ti * s;
                im += tr * s + ti * c;
            }
            re * re + im * im
        })
        .collect()
}

/// Builds the normalized scenario for one channel draw at one distance
/// ratio: direct links carry the direct budget, cross links the cross budget
/// damped by `ratio^{-gamma}`.
pub fn scenario_from_taps(tp: &TopologyParams, taps: &ChannelTaps, ratio: f64) -> Result<Scenario> {
    let q_n = tp.num_users;
    let n = tp.num_carriers;
    let direct = 10f64.powf(tp.direct_snr_db / 10.0);
    let cross = 10f64.powf(tp.cross_budget_db / 10.0) * ratio.powf(-tp.path_loss_exponent);
    let mut gain_sq = vec![vec![vec![0.0; n]; q_n]; q_n];
    for r in 0..q_n {
        for q in 0..q_n {
            let budget = if r == q { direct } else { cross };
            let power = dft_power(&taps[r][q], n);
            for k in 0..n {
                gain_sq[r][q][k] = power[k] * budget;
            }
        }
    }
    let s = Scenario {
        num_users: q_n,
        num_carriers: n,
        gain_sq,
        snr_gap: vec![tp.snr_gap; q_n],
        mask: vec![vec![tp.mask_cap; n]; q_n],
        usable_carriers: vec![vec![true; n]; q_n],
    };
    s.validate()?;
    Ok(s)
}

/// One random scenario at the given ratio, deterministic in `seed`.
pub fn random_scenario(tp: &TopologyParams, ratio: f64, seed: u64) -> Result<Scenario> {
    tp.validate()?;
    let taps = draw_taps(tp, &mut trial_rng(seed, 0));
    scenario_from_taps(tp, &taps, ratio)
}

/// Names of the conditions evaluated by the Monte Carlo sweep, in column
/// order.
pub const SWEEP_CONDITIONS: [&str; 5] = ["C1", "C4", "C5", "C6", "per-carrier"];

/// Empirical satisfaction probabilities per condition per grid ratio.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloCurve {
    pub conditions: Vec<String>,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub ratio: f64,
    /// Satisfaction probability per condition, ordered as `conditions`.
    pub probabilities: Vec<f64>,
    pub trials: usize,
}

impl MonteCarloCurve {
    /// Normal-approximation 95% half-width for a binomial proportion.
    pub fn ci_halfwidth(p: f64, trials: usize) -> f64 {
        1.96 * (p * (1.0 - p) / trials as f64).sqrt()
    }

    /// Smallest grid ratio whose empirical probability reaches `level`.
    pub fn threshold_ratio(&self, condition: &str, level: f64) -> Option<f64> {
        let idx = self.conditions.iter().position(|c| c == condition)?;
        self.points
            .iter()
            .find(|pt| pt.probabilities[idx] >= level)
            .map(|pt| pt.ratio)
    }

    /// CSV with columns `ratio,condition,probability,trials,ci_halfwidth`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ratio,condition,probability,trials,ci_halfwidth")?;
        for pt in &self.points {
            for (ci, cond) in self.conditions.iter().enumerate() {
                let p = pt.probabilities[ci];
                writeln!(
                    w,
                    "{:.16e},{},{:.16e},{},{:.16e}",
                    pt.ratio,
                    cond,
                    p,
                    pt.trials,
                    Self::ci_halfwidth(p, pt.trials)
                )?;
            }
        }
        Ok(())
    }
}

fn eval_trial_conditions(s: &mut Scenario) -> Result<[bool; 5]> {
    let sets = estimate_usable_carriers(s)?;
    s.set_usable_carriers(sets)?;
    let c1 = check_c1(s)?.satisfied;
    let (c4, c5) = check_c4_c5(s)?;
    let c6 = check_c6(s)?.satisfied;
    let pc = check_per_carrier(s, None)?.satisfied;
    Ok([c1, c4.satisfied, c5.satisfied, c6, pc])
}

/// Monte Carlo sweep of the convergence conditions over the ratio grid.
///
/// Trials parallelize over the ambient rayon pool; aggregation is keyed by
/// `(trial, ratio)` indices, so the output is byte-identical for any worker
/// count.
pub fn condition_probability_sweep(tp: &TopologyParams) -> Result<MonteCarloCurve> {
    tp.validate()?;
    let per_trial: Vec<Result<Vec<[bool; 5]>>> = (0..tp.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let taps = draw_taps(tp, &mut trial_rng(tp.seed, trial));
            tp.ratio_grid
                .iter()
                .map(|&ratio| {
                    let mut s = scenario_from_taps(tp, &taps, ratio)?;
                    eval_trial_conditions(&mut s)
                })
                .collect()
        })
        .collect();

    let mut counts = vec![[0usize; 5]; tp.ratio_grid.len()];
    for trial in per_trial {
        let rows = trial?;
        for (i, flags) in rows.iter().enumerate() {
            for (c, &ok) in flags.iter().enumerate() {
                if ok {
                    counts[i][c] += 1;
                }
            }
        }
    }
    let points = tp
        .ratio_grid
        .iter()
        .zip(&counts)
        .map(|(&ratio, cnt)| CurvePoint {
            ratio,
            probabilities: cnt.iter().map(|&c| c as f64 / tp.trials as f64).collect(),
            trials: tp.trials,
        })
        .collect();
    Ok(MonteCarloCurve {
        conditions: SWEEP_CONDITIONS.iter().map(|s| s.to_string()).collect(),
        points,
    })
}

/// Aligned multi-algorithm traces on one shared random scenario.
#[derive(Debug)]
pub struct TraceBundle {
    pub labels: Vec<String>,
    pub runs: Vec<RunTrace>,
    pub users_plotted: Vec<usize>,
    pub eps: f64,
    /// First iteration index at which each run's residual reached `eps`.
    pub iterations_to_eps: Vec<Option<usize>>,
}

impl TraceBundle {
    /// Aligned per-iteration CSV: `iter`, then per algorithm the plotted
    /// users' rates and the residual. Shorter traces leave cells empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "iter")?;
        for label in &self.labels {
            for &u in &self.users_plotted {
                write!(w, ",{label}_rate_{}", u + 1)?;
            }
            write!(w, ",{label}_residual")?;
        }
        writeln!(w)?;
        let max_len = self.runs.iter().map(|r| r.records.len()).max().unwrap_or(0);
        for i in 0..max_len {
            write!(w, "{}", i + 1)?;
            for run in &self.runs {
                match run.records.get(i) {
                    Some(rec) => {
                        for &u in &self.users_plotted {
                            write!(w, ",{:.16e}", rec.rates[u])?;
                        }
                        write!(w, ",{:.16e}", rec.residual)?;
                    }
                    None => {
                        for _ in 0..=self.users_plotted.len() {
                            write!(w, ",")?;
                        }
                    }
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Per-algorithm summary CSV: `algorithm,status,iterations_to_eps,sweeps,final_residual`.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "algorithm,status,iterations_to_eps,sweeps,final_residual"
        )?;
        for (i, run) in self.runs.iter().enumerate() {
            let its = self.iterations_to_eps[i]
                .map(|n| n.to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{:.16e}",
                self.labels[i],
                run.status.as_str(),
                its,
                run.sweeps(),
                run.final_residual()
            )?;
        }
        Ok(())
    }
}

/// Runs every configuration from the same initial profile on one scenario
/// drawn at the first grid ratio, and reports aligned traces plus
/// iterations-to-`trace_eps` counts.
pub fn rate_trace_experiment(
    tp: &TopologyParams,
    configs: &[AlgorithmConfig],
    users_to_plot: &[usize],
) -> Result<TraceBundle> {
    tp.validate()?;
    if configs.is_empty() {
        return Err(Error::Config("at least one algorithm is required".into()));
    }
    let ratio = tp.ratio_grid[0];
    let s = random_scenario(tp, ratio, tp.seed)?;
    if users_to_plot.iter().any(|&u| u >= s.num_users) {
        return Err(Error::Domain("plotted user index out of range".into()));
    }
    let p0 = PowerProfile::uniform(s.num_users, s.num_carriers);

    let mut labels: Vec<String> = configs.iter().map(|c| c.label()).collect();
    for i in 0..labels.len() {
        let dup = labels.iter().filter(|&l| *l == labels[i]).count() > 1;
        if dup {
            for (j, label) in labels.iter_mut().enumerate() {
                if configs[j].label() == configs[i].label() {
                    *label = format!("{}.{}", configs[j].label(), j + 1);
                }
            }
        }
    }

    let mut runs = Vec::with_capacity(configs.len());
    let mut iterations_to_eps = Vec::with_capacity(configs.len());
    for cfg in configs {
        let trace = run(&s, &p0, cfg)?;
        iterations_to_eps.push(trace.iterations_to_residual(tp.trace_eps));
        runs.push(trace);
    }
    Ok(TraceBundle {
        labels,
        runs,
        users_plotted: users_to_plot.to_vec(),
        eps: tp.trace_eps,
        iterations_to_eps,
    })
}
