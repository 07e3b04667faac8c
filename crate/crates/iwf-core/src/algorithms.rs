//! Iterative equilibrium solvers.
//!
//! One engine covers the six algorithms as a configuration space: the best
//! response is either exact waterfilling or a gradient-projection step, the
//! update schedule is either sequential (one user per iteration, cyclic
//! order) or simultaneous (all users per iteration from the previous joint
//! state), and the waterfilling family optionally blends each update with
//! the previous iterate through per-user smoothing factors.
//!
//! Iteration counting follows the update rules verbatim: the iteration index
//! `n` increments once per update event, so a sequential sweep over `Q`
//! users spends `Q` iterations while a simultaneous sweep spends one.
//! Stopping is checked once per sweep: successive-iterate distance and the
//! equilibrium residual must both fall below the configured tolerance.

use std::io::Write;

use crate::conditions::default_igpa_beta;
use crate::model::{rate, PowerProfile, Scenario};
use crate::projection::{
    cholesky, cholesky_solve, insr_vector, project_capped_simplex, project_metric, user_simplex,
};
use crate::{Error, Result};

/// Best-response family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Waterfilling,
    GradientProjection,
}

/// Update schedule: Gauss-Seidel (one user at a time) or Jacobi (all users
/// from the previous iterate).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Sequential,
    Simultaneous,
}

/// Projection metric of the gradient family.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Identity,
    Diagonal(Vec<f64>),
    Explicit(Vec<Vec<f64>>),
}

/// Configuration of one solver run.
#[derive(Debug, Clone)]
pub struct AlgorithmConfig {
    pub family: Family,
    pub schedule: Schedule,
    /// Per-user smoothing factors in `[0, 1)`; empty means no smoothing.
    /// Waterfilling family only.
    pub alphas: Vec<f64>,
    /// Gradient step size; `None` picks the safe default derived from the
    /// scenario's curvature extremes. Gradient family only.
    pub beta: Option<f64>,
    /// Per-user projection metrics; empty means identity for every user.
    /// Gradient family only.
    pub metrics: Vec<Metric>,
    /// Sweep budget (one sweep updates every user once).
    pub max_sweeps: usize,
    /// Stopping tolerance on both the sweep displacement and the
    /// equilibrium residual.
    pub tol: f64,
    /// Update order of the sequential schedule (a permutation of `0..Q`);
    /// `None` means natural order.
    pub update_order: Option<Vec<usize>>,
}

impl AlgorithmConfig {
    pub fn new(family: Family, schedule: Schedule) -> Self {
        AlgorithmConfig {
            family,
            schedule,
            alphas: Vec::new(),
            beta: None,
            metrics: Vec::new(),
            max_sweeps: 10_000,
            tol: 1e-8,
            update_order: None,
        }
    }

    pub fn seq_iwfa() -> Self {
        Self::new(Family::Waterfilling, Schedule::Sequential)
    }
    pub fn sim_iwfa() -> Self {
        Self::new(Family::Waterfilling, Schedule::Simultaneous)
    }
    pub fn seq_igpa() -> Self {
        Self::new(Family::GradientProjection, Schedule::Sequential)
    }
    pub fn sim_igpa() -> Self {
        Self::new(Family::GradientProjection, Schedule::Simultaneous)
    }

    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Self {
        self.alphas = alphas;
        self
    }
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
    pub fn with_max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = sweeps;
        self
    }
    pub fn with_update_order(mut self, order: Vec<usize>) -> Self {
        self.update_order = Some(order);
        self
    }
    pub fn with_metrics(mut self, metrics: Vec<Metric>) -> Self {
        self.metrics = metrics;
        self
    }

    pub fn label(&self) -> String {
        let base = match (self.schedule, self.family) {
            (Schedule::Sequential, Family::Waterfilling) => "seq-iwfa",
            (Schedule::Simultaneous, Family::Waterfilling) => "sim-iwfa",
            (Schedule::Sequential, Family::GradientProjection) => "seq-igpa",
            (Schedule::Simultaneous, Family::GradientProjection) => "sim-igpa",
        };
        if self.alphas.iter().any(|&a| a > 0.0) {
            let amax = self.alphas.iter().fold(0.0_f64, |x, &y| x.max(y));
            format!("{base}-smoothed{amax:.2}")
        } else {
            base.to_string()
        }
    }

    fn validate(&self, num_users: usize) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if !self.alphas.is_empty() {
            if self.alphas.len() != num_users {
                return Err(Error::Config("alphas must have length Q".into()));
            }
            if self.alphas.iter().any(|&a| !(0.0..1.0).contains(&a)) {
                return Err(Error::Config("smoothing factors must lie in [0,1)".into()));
            }
            if self.family == Family::GradientProjection && self.alphas.iter().any(|&a| a != 0.0) {
                return Err(Error::Config(
                    "smoothing applies to the waterfilling family only".into(),
                ));
            }
        }
        if let Some(beta) = self.beta {
            if self.family == Family::Waterfilling {
                return Err(Error::Config(
                    "step size applies to the gradient family only".into(),
                ));
            }
            if !(beta > 0.0) {
                return Err(Error::Config("step size must be positive".into()));
            }
        }
        if !self.metrics.is_empty() {
            if self.family == Family::Waterfilling {
                return Err(Error::Config(
                    "projection metrics apply to the gradient family only".into(),
                ));
            }
            if self.metrics.len() != num_users {
                return Err(Error::Config("metrics must have length Q".into()));
            }
        }
        if let Some(order) = &self.update_order {
            if self.schedule != Schedule::Sequential {
                return Err(Error::Config(
                    "update order applies to the sequential schedule only".into(),
                ));
            }
            let mut seen = vec![false; num_users];
            if order.len() != num_users || order.iter().any(|&q| q >= num_users) {
                return Err(Error::Config(
                    "update order must be a permutation of 0..Q".into(),
                ));
            }
            for &q in order {
                if seen[q] {
                    return Err(Error::Config("update order repeats a user".into()));
                }
                seen[q] = true;
            }
        }
        Ok(())
    }
}

/// Terminal status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIters,
    /// Non-finite iterate or residual blow-up at the given iteration.
    Diverged {
        at_iter: usize,
    },
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max-iters",
            RunStatus::Diverged { .. } => "diverged",
        }
    }
}

/// One per-iteration record of a run.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Update-event index, starting at 1.
    pub iter: usize,
    /// Sweep index, starting at 1 (equal to `iter` for simultaneous runs).
    pub sweep: usize,
    /// Users updated at this iteration.
    pub users: Vec<usize>,
    pub powers: PowerProfile,
    pub rates: Vec<f64>,
    pub residual: f64,
    /// Max-norm displacement of this update event.
    pub delta: f64,
}

/// Full record of one solver run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub initial: PowerProfile,
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    pub tol: f64,
}

impl RunTrace {
    pub fn final_profile(&self) -> &PowerProfile {
        self.records
            .last()
            .map(|r| &r.powers)
            .unwrap_or(&self.initial)
    }

    pub fn final_residual(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.residual)
            .unwrap_or(f64::INFINITY)
    }

    pub fn sweeps(&self) -> usize {
        self.records.last().map(|r| r.sweep).unwrap_or(0)
    }

    /// First iteration index whose equilibrium residual is at most `eps`.
    pub fn iterations_to_residual(&self, eps: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.residual <= eps)
            .map(|r| r.iter)
    }

    /// CSV with columns `iter,sweep,user,rate_1..rate_Q,residual,delta`.
    /// The user column is the 1-based updated user, or `all` for
    /// simultaneous updates. Floats carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let q_n = self.initial.num_users();
        write!(w, "iter,sweep,user")?;
        for q in 1..=q_n {
            write!(w, ",rate_{q}")?;
        }
        writeln!(w, ",residual,delta")?;
        for rec in &self.records {
            let user = if rec.users.len() == q_n && q_n > 1 {
                "all".to_string()
            } else {
                rec.users
                    .iter()
                    .map(|&u| (u + 1).to_string())
                    .collect::<Vec<_>>()
                    .join("+")
            };
            write!(w, "{},{},{}", rec.iter, rec.sweep, user)?;
            for r in &rec.rates {
                write!(w, ",{r:.16e}")?;
            }
            writeln!(w, ",{:.16e},{:.16e}", rec.residual, rec.delta)?;
        }
        Ok(())
    }
}

/// Gradient of user `q`'s rate with respect to its own powers:
/// component `k` is
/// `(1/N) |H_qq(k)|^2 / (Gamma_q (1 + I_k) + |H_qq(k)|^2 p_q(k))`.
pub fn rate_gradient(s: &Scenario, p: &PowerProfile, q: usize) -> Vec<f64> {
    let n = s.num_carriers;
    let mut out = vec![0.0; n];
    for k in 0..n {
        let g = s.gain_sq[q][q][k];
        if g == 0.0 {
            continue;
        }
        let mut interference = 0.0;
        for r in 0..s.num_users {
            if r != q {
                interference += s.gain_sq[r][q][k] * p.powers[r][k];
            }
        }
        out[k] = g / (n as f64 * (s.snr_gap[q] * (1.0 + interference) + g * p.powers[q][k]));
    }
    out
}

/// Equilibrium residual `max_q || p_q - WF_q(p_{-q}) ||_inf`; zero exactly at
/// Nash equilibria.
pub fn ne_residual(s: &Scenario, p: &PowerProfile) -> f64 {
    let mut worst = 0.0_f64;
    for q in 0..s.num_users {
        let insr = insr_vector(s, q, p);
        let set = user_simplex(s, q).expect("scenario mask must be feasible");
        let response = project_capped_simplex(&insr, &set)
            .expect("waterfilling of a feasible set cannot fail")
            .allocation;
        for k in 0..s.num_carriers {
            worst = worst.max((p.powers[q][k] - response[k]).abs());
        }
    }
    worst
}

struct ResolvedMetric {
    metric: Metric,
    /// Cholesky factor of an explicit metric.
    factor: Option<Vec<Vec<f64>>>,
}

/// Runs the configured algorithm from `p0` (projected onto the feasible set
/// first if necessary) and records every iterate.
pub fn run(s: &Scenario, p0: &PowerProfile, cfg: &AlgorithmConfig) -> Result<RunTrace> {
    cfg.validate(s.num_users)?;
    let q_n = s.num_users;
    if p0.powers.len() != q_n || p0.powers.iter().any(|p| p.len() != s.num_carriers) {
        return Err(Error::Config(
            "initial profile shape must match the scenario".into(),
        ));
    }

    let sets: Vec<_> = (0..q_n)
        .map(|q| user_simplex(s, q))
        .collect::<Result<Vec<_>>>()?;

    // Project the initial profile user by user.
    let mut current = p0.clone();
    for q in 0..q_n {
        let neg: Vec<f64> = current.powers[q].iter().map(|&v| -v).collect();
        current.powers[q] = project_capped_simplex(&neg, &sets[q])?.allocation;
    }

    let alphas = if cfg.alphas.is_empty() {
        vec![0.0; q_n]
    } else {
        cfg.alphas.clone()
    };
    let beta = match cfg.family {
        Family::GradientProjection => cfg.beta.unwrap_or_else(|| default_igpa_beta(s)),
        Family::Waterfilling => 0.0,
    };
    let metrics: Vec<ResolvedMetric> = if cfg.metrics.is_empty() {
        (0..q_n)
            .map(|_| ResolvedMetric {
                metric: Metric::Identity,
                factor: None,
            })
            .collect()
    } else {
        cfg.metrics
            .iter()
            .map(|m| {
                let factor =
                    match m {
                        Metric::Explicit(g) => Some(cholesky(g).ok_or_else(|| {
                            Error::Matrix("metric is not positive definite".into())
                        })?),
                        Metric::Diagonal(d) => {
                            if d.iter().any(|&v| !(v > 0.0)) {
                                return Err(Error::Matrix(
                                    "diagonal metric entries must be positive".into(),
                                ));
                            }
                            None
                        }
                        Metric::Identity => None,
                    };
                Ok(ResolvedMetric {
                    metric: m.clone(),
                    factor,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };

    let order: Vec<usize> = cfg
        .update_order
        .clone()
        .unwrap_or_else(|| (0..q_n).collect());

    let update_user = |q: usize, state: &PowerProfile| -> Result<Vec<f64>> {
        match cfg.family {
            Family::Waterfilling => {
                let insr = insr_vector(s, q, state);
                let response = project_capped_simplex(&insr, &sets[q])?.allocation;
                let a = alphas[q];
                Ok(state.powers[q]
                    .iter()
                    .zip(&response)
                    .map(|(&old, &new)| a * old + (1.0 - a) * new)
                    .collect())
            }
            Family::GradientProjection => {
                let grad = rate_gradient(s, state, q);
                let rm = &metrics[q];
                let step: Vec<f64> = match (&rm.metric, &rm.factor) {
                    (Metric::Identity, _) => grad.iter().map(|&g| beta * g).collect(),
                    (Metric::Diagonal(d), _) => {
                        grad.iter().zip(d).map(|(&g, &dk)| beta * g / dk).collect()
                    }
                    (Metric::Explicit(_), Some(l)) => {
                        cholesky_solve(l, &grad).iter().map(|&z| beta * z).collect()
                    }
                    (Metric::Explicit(_), None) => unreachable!("factor resolved above"),
                };
                let target: Vec<f64> = state.powers[q]
                    .iter()
                    .zip(&step)
                    .map(|(&p, &d)| p + d)
                    .collect();
                match &rm.metric {
                    Metric::Identity => {
                        let neg: Vec<f64> = target.iter().map(|&v| -v).collect();
                        Ok(project_capped_simplex(&neg, &sets[q])?.allocation)
                    }
                    Metric::Diagonal(d) => {
                        let g: Vec<Vec<f64>> = (0..d.len())
                            .map(|i| {
                                (0..d.len())
                                    .map(|j| if i == j { d[i] } else { 0.0 })
                                    .collect()
                            })
                            .collect();
                        project_metric(&target, &sets[q], &g)
                    }
                    Metric::Explicit(g) => project_metric(&target, &sets[q], g),
                }
            }
        }
    };

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut status = RunStatus::MaxIters;
    let mut iter = 0usize;

    'sweeps: for sweep in 1..=cfg.max_sweeps {
        let mut sweep_delta = 0.0_f64;
        let steps: usize = match cfg.schedule {
            Schedule::Sequential => q_n,
            Schedule::Simultaneous => 1,
        };
        for step in 0..steps {
            iter += 1;
            let (users, delta) = match cfg.schedule {
                Schedule::Sequential => {
                    let q = order[step];
                    let new_q = update_user(q, &current)?;
                    let delta = new_q
                        .iter()
                        .zip(&current.powers[q])
                        .fold(0.0_f64, |a, (&x, &y)| a.max((x - y).abs()));
                    current.powers[q] = new_q;
                    (vec![q], delta)
                }
                Schedule::Simultaneous => {
                    let previous = current.clone();
                    let mut delta = 0.0_f64;
                    for q in 0..q_n {
                        let new_q = update_user(q, &previous)?;
                        delta = new_q
                            .iter()
                            .zip(&previous.powers[q])
                            .fold(delta, |a, (&x, &y)| a.max((x - y).abs()));
                        current.powers[q] = new_q;
                    }
                    ((0..q_n).collect(), delta)
                }
            };
            sweep_delta = sweep_delta.max(delta);

            let finite = current
                .powers
                .iter()
                .all(|row| row.iter().all(|v| v.is_finite()));
            let residual = if finite {
                ne_residual(s, &current)
            } else {
                f64::INFINITY
            };
            let rates: Vec<f64> = (0..q_n).map(|q| rate(s, &current, q)).collect();
            records.push(IterationRecord {
                iter,
                sweep,
                users,
                powers: current.clone(),
                rates,
                residual,
                delta,
            });

            if !finite || residual > 1e6 {
                status = RunStatus::Diverged { at_iter: iter };
                break 'sweeps;
            }
        }
        let residual = records.last().map(|r| r.residual).unwrap_or(f64::INFINITY);
        if sweep_delta < cfg.tol && residual < cfg.tol {
            status = RunStatus::Converged;
            break;
        }
    }

    Ok(RunTrace {
        initial: p0.clone(),
        records,
        status,
        tol: cfg.tol,
    })
}
