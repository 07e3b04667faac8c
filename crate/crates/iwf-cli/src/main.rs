//! `iwf` — Nash-equilibrium power control on the frequency-selective
//! interference channel: condition checking, equilibrium solving, aligned
//! algorithm traces, Monte Carlo condition sweeps, scenario generation, and
//! a projection debugging tool.
//!
//! Exit codes: 0 on success (for `check`: the master convergence condition
//! C1 holds), 2 when C1 fails or a solve does not converge, 1 on input or
//! usage errors. Set `IWF_LOG=debug` for diagnostics.

mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use iwf_core::algorithms::{run, AlgorithmConfig, RunStatus};
use iwf_core::analysis::vi_residual;
use iwf_core::conditions::{estimate_usable_carriers, evaluate_all, jnum};
use iwf_core::experiments::{
    condition_probability_sweep, random_scenario, rate_trace_experiment, TopologyParams,
};
use iwf_core::model::{PowerProfile, Scenario};
use iwf_core::projection::{project_capped_simplex, CappedSimplex};

#[derive(Parser)]
#[command(
    name = "iwf",
    version,
    about = "Iterative waterfilling equilibrium toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    #[value(name = "seq-iwfa")]
    SeqIwfa,
    #[value(name = "sim-iwfa")]
    SimIwfa,
    #[value(name = "seq-igpa")]
    SeqIgpa,
    #[value(name = "sim-igpa")]
    SimIgpa,
}

impl Algorithm {
    fn config(self) -> AlgorithmConfig {
        match self {
            Algorithm::SeqIwfa => AlgorithmConfig::seq_iwfa(),
            Algorithm::SimIwfa => AlgorithmConfig::sim_iwfa(),
            Algorithm::SeqIgpa => AlgorithmConfig::seq_igpa(),
            Algorithm::SimIgpa => AlgorithmConfig::sim_igpa(),
        }
    }
    fn is_gradient(self) -> bool {
        matches!(self, Algorithm::SeqIgpa | Algorithm::SimIgpa)
    }
}

#[derive(Args, Clone)]
struct SolverOverrides {
    /// Smoothing factors, one value or a comma list of Q values.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Gradient-projection step size.
    #[arg(long)]
    beta: Option<f64>,
    /// Stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Sweep budget (one sweep updates every user once).
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
}

impl SolverOverrides {
    fn apply(
        &self,
        mut cfg: AlgorithmConfig,
        num_users: usize,
        is_gradient: bool,
    ) -> Result<AlgorithmConfig, String> {
        if !self.alpha.is_empty() {
            if is_gradient {
                return Err("--alpha applies to the waterfilling algorithms only".into());
            }
            cfg.alphas = match self.alpha.len() {
                1 => vec![self.alpha[0]; num_users],
                n if n == num_users => self.alpha.clone(),
                n => return Err(format!("--alpha needs 1 or {num_users} values, got {n}")),
            };
        }
        if let Some(beta) = self.beta {
            if !is_gradient {
                return Err("--beta applies to the gradient-projection algorithms only".into());
            }
            cfg.beta = Some(beta);
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if let Some(sweeps) = self.max_iters {
            cfg.max_sweeps = sweeps;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every convergence/uniqueness condition on a scenario.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        /// Evaluate C1/C2/C3 and the per-carrier test over full carrier sets
        /// instead of the estimated usable sets.
        #[arg(long = "full-carrier-sets")]
        full_carrier_sets: bool,
        /// Extra weight vector for C2/C3, comma separated.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one algorithm to the equilibrium and report the final profile.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "sim-iwfa")]
        algorithm: Algorithm,
        #[command(flatten)]
        overrides: SolverOverrides,
        /// Report rates in bits instead of nats.
        #[arg(long)]
        bits: bool,
        /// Write the run report (profile, rates, analysis) as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several algorithms on one scenario and emit aligned rate traces.
    Trace {
        /// Normalized or physical scenario file.
        #[arg(long, conflicts_with = "params")]
        scenario: Option<PathBuf>,
        /// Topology parameters for a generated random scenario.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Algorithms to compare; repeat the flag for several.
        #[arg(long, value_enum, required = true)]
        algorithm: Vec<Algorithm>,
        #[command(flatten)]
        overrides: SolverOverrides,
        /// Seed override for the generated scenario.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo sweep of condition satisfaction over the distance-ratio grid.
    Montecarlo {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the trial pool.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project a vector onto a capped simplex (debugging aid).
    Project {
        /// JSON file with fields `x0` and `caps` (cap entries may be "inf").
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a random scenario file from topology parameters.
    Gen {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IWF_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, String> {
    match cmd {
        Command::Check {
            scenario,
            full_carrier_sets,
            weights,
            out,
        } => cmd_check(&scenario, full_carrier_sets, &weights, out.as_deref()),
        Command::Solve {
            scenario,
            algorithm,
            overrides,
            bits,
            out,
        } => cmd_solve(&scenario, algorithm, &overrides, bits, out.as_deref()),
        Command::Trace {
            scenario,
            params,
            algorithm,
            overrides,
            seed,
            out,
        } => cmd_trace(
            scenario.as_deref(),
            params.as_deref(),
            &algorithm,
            &overrides,
            seed,
            &out,
        ),
        Command::Montecarlo {
            params,
            seed,
            jobs,
            out,
        } => cmd_montecarlo(&params, seed, jobs, &out),
        Command::Project { input, out } => cmd_project(&input, out.as_deref()),
        Command::Gen { params, seed, out } => cmd_gen(&params, seed, &out),
    }
}

fn prepare_scenario(path: &std::path::Path, full_sets: bool) -> Result<Scenario, String> {
    let mut s = io::load_scenario(path)?;
    if full_sets {
        s.use_full_carrier_sets();
    } else {
        let sets = estimate_usable_carriers(&s).map_err(|e| e.to_string())?;
        s.set_usable_carriers(sets).map_err(|e| e.to_string())?;
    }
    Ok(s)
}

fn cmd_check(
    path: &std::path::Path,
    full_sets: bool,
    weights: &[f64],
    out: Option<&std::path::Path>,
) -> Result<ExitCode, String> {
    let s = prepare_scenario(path, full_sets)?;
    let extra = if weights.is_empty() {
        None
    } else if weights.len() == s.num_users {
        Some(weights)
    } else {
        return Err(format!(
            "--weights needs {} values, got {}",
            s.num_users,
            weights.len()
        ));
    };
    let report = evaluate_all(&s, None, extra).map_err(|e| e.to_string())?;

    println!("{:<16} {:<10} margin", "condition", "satisfied");
    for rec in &report.records {
        let margin = match rec.margin {
            None => "n/a (inapplicable)".to_string(),
            Some(m) if m.is_finite() => format!("{m:.6}"),
            Some(m) if m > 0.0 => "inf".to_string(),
            Some(_) => "-inf".to_string(),
        };
        println!("{:<16} {:<10} {}", rec.name, rec.satisfied, margin);
    }
    if let Some(out) = out {
        let bytes = serde_json::to_vec_pretty(&report).map_err(|e| e.to_string())?;
        io::write_atomic(out, &bytes)?;
    }
    let c1_ok = report.get("C1").map(|r| r.satisfied).unwrap_or(false);
    Ok(ExitCode::from(if c1_ok { 0 } else { 2 }))
}

fn cmd_solve(
    path: &std::path::Path,
    algorithm: Algorithm,
    overrides: &SolverOverrides,
    bits: bool,
    out: Option<&std::path::Path>,
) -> Result<ExitCode, String> {
    let s = io::load_scenario(path)?;
    let cfg = overrides.apply(algorithm.config(), s.num_users, algorithm.is_gradient())?;
    let p0 = PowerProfile::uniform(s.num_users, s.num_carriers);
    let trace = run(&s, &p0, &cfg).map_err(|e| e.to_string())?;
    let p = trace.final_profile();
    let scale = if bits { std::f64::consts::LN_2 } else { 1.0 };
    let rates: Vec<f64> = trace
        .records
        .last()
        .map(|r| r.rates.iter().map(|v| v / scale).collect())
        .unwrap_or_default();
    let residual = trace.final_residual();
    let vi = vi_residual(&s, p);

    println!("algorithm:  {}", cfg.label());
    println!("status:     {}", trace.status.as_str());
    println!(
        "iterations: {} ({} sweeps)",
        trace.records.len(),
        trace.sweeps()
    );
    println!("residual:   {residual:.3e}");
    let unit = if bits { "bits" } else { "nats" };
    for (q, r) in rates.iter().enumerate() {
        println!("rate[{}] = {r:.6} {unit}/carrier-use", q + 1);
    }

    if let Some(out) = out {
        let report = json!({
            "algorithm": cfg.label(),
            "status": trace.status.as_str(),
            "iterations": trace.records.len(),
            "sweeps": trace.sweeps(),
            "residual": jnum(residual),
            "rate_units": unit,
            "rates": rates,
            "profile": p,
            "analysis": {
                "ne_residual": jnum(residual),
                "vi_residual": jnum(vi),
            },
        });
        let bytes = serde_json::to_vec_pretty(&report).map_err(|e| e.to_string())?;
        io::write_atomic(out, &bytes)?;
    }
    Ok(ExitCode::from(if trace.status == RunStatus::Converged {
        0
    } else {
        2
    }))
}

#[derive(Deserialize)]
struct ProjectionInput {
    x0: Vec<f64>,
    #[serde(with = "iwf_core::model::ext_f64_mat")]
    caps: Vec<Vec<f64>>,
}

fn cmd_project(input: &std::path::Path, out: Option<&std::path::Path>) -> Result<ExitCode, String> {
    // `caps` reuses the matrix adapter for "inf" support: accept either a
    // flat vector or a single-row matrix.
    let text = std::fs::read_to_string(input)
        .map_err(|e| format!("cannot read {}: {e}", input.display()))?;
    let parsed: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| format!("cannot parse {}: {e}", input.display()))?;
    let wrapped = json!({
        "x0": parsed.get("x0").cloned().ok_or("missing field x0")?,
        "caps": match parsed.get("caps") {
            Some(serde_json::Value::Array(items)) if !items.is_empty() && !items[0].is_array() =>
                json!([items]),
            Some(v) => v.clone(),
            None => return Err("missing field caps".into()),
        },
    });
    let input: ProjectionInput =
        serde_json::from_value(wrapped).map_err(|e| format!("invalid projection input: {e}"))?;
    let caps = input.caps.into_iter().flatten().collect::<Vec<_>>();
    let set = CappedSimplex::new(caps).map_err(|e| e.to_string())?;
    let result = project_capped_simplex(&input.x0, &set).map_err(|e| e.to_string())?;
    let report = json!({
        "allocation": result.allocation,
        "water_level": result.water_level,
        "zero_set": result.zero_set.iter().map(|k| k + 1).collect::<Vec<_>>(),
        "interior_set": result.interior_set.iter().map(|k| k + 1).collect::<Vec<_>>(),
        "capped_set": result.capped_set.iter().map(|k| k + 1).collect::<Vec<_>>(),
    });
    let pretty = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    println!("{pretty}");
    if let Some(out) = out {
        io::write_atomic(out, pretty.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace(
    scenario: Option<&std::path::Path>,
    params: Option<&std::path::Path>,
    algorithms: &[Algorithm],
    overrides: &SolverOverrides,
    seed: Option<u64>,
    out: &std::path::Path,
) -> Result<ExitCode, String> {
    let tp: TopologyParams = match (scenario, params) {
        (Some(_), _) => {
            return cmd_trace_on_scenario(scenario.unwrap(), algorithms, overrides, out);
        }
        (None, Some(p)) => {
            let mut tp: TopologyParams = io::load_json(p, "params")?;
            if let Some(seed) = seed {
                tp.seed = seed;
            }
            tp
        }
        (None, None) => return Err("trace needs --scenario or --params".into()),
    };
    let probe = random_scenario(&tp, tp.ratio_grid[0], tp.seed).map_err(|e| e.to_string())?;
    let configs = algorithms
        .iter()
        .map(|a| overrides.apply(a.config(), probe.num_users, a.is_gradient()))
        .collect::<Result<Vec<_>, _>>()?;
    let users: Vec<usize> = (0..probe.num_users).collect();
    let bundle = rate_trace_experiment(&tp, &configs, &users).map_err(|e| e.to_string())?;
    write_bundle(&bundle, out)
}

fn cmd_trace_on_scenario(
    path: &std::path::Path,
    algorithms: &[Algorithm],
    overrides: &SolverOverrides,
    out: &std::path::Path,
) -> Result<ExitCode, String> {
    let s = io::load_scenario(path)?;
    let p0 = PowerProfile::uniform(s.num_users, s.num_carriers);
    let mut labels = Vec::new();
    let mut runs = Vec::new();
    let mut iterations_to_eps = Vec::new();
    let eps = 1e-6;
    for (i, a) in algorithms.iter().enumerate() {
        let cfg = overrides.apply(a.config(), s.num_users, a.is_gradient())?;
        let trace = run(&s, &p0, &cfg).map_err(|e| e.to_string())?;
        let mut label = cfg.label();
        if algorithms.iter().filter(|b| **b == *a).count() > 1 {
            label = format!("{label}.{}", i + 1);
        }
        labels.push(label);
        iterations_to_eps.push(trace.iterations_to_residual(eps));
        runs.push(trace);
    }
    let bundle = iwf_core::experiments::TraceBundle {
        labels,
        runs,
        users_plotted: (0..s.num_users).collect(),
        eps,
        iterations_to_eps,
    };
    write_bundle(&bundle, out)
}

fn write_bundle(
    bundle: &iwf_core::experiments::TraceBundle,
    out: &std::path::Path,
) -> Result<ExitCode, String> {
    let mut csv = Vec::new();
    bundle.write_csv(&mut csv).map_err(|e| e.to_string())?;
    io::write_atomic(out, &csv)?;
    let mut summary = Vec::new();
    bundle
        .write_summary_csv(&mut summary)
        .map_err(|e| e.to_string())?;
    let summary_path = io::with_suffix(out, "_summary");
    io::write_atomic(&summary_path, &summary)?;
    print!("{}", String::from_utf8_lossy(&summary));
    let diverged = bundle
        .runs
        .iter()
        .any(|r| matches!(r.status, RunStatus::Diverged { .. }));
    Ok(ExitCode::from(if diverged { 2 } else { 0 }))
}

fn cmd_montecarlo(
    params: &std::path::Path,
    seed: Option<u64>,
    jobs: usize,
    out: &std::path::Path,
) -> Result<ExitCode, String> {
    let mut tp: TopologyParams = io::load_json(params, "params")?;
    if let Some(seed) = seed {
        tp.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| e.to_string())?;
    let curve = pool
        .install(|| condition_probability_sweep(&tp))
        .map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    curve.write_csv(&mut csv).map_err(|e| e.to_string())?;
    io::write_atomic(out, &csv)?;
    log::info!(
        "wrote {} grid points x {} conditions to {}",
        curve.points.len(),
        curve.conditions.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(
    params: &std::path::Path,
    seed: Option<u64>,
    out: &std::path::Path,
) -> Result<ExitCode, String> {
    let mut tp: TopologyParams = io::load_json(params, "params")?;
    if let Some(seed) = seed {
        tp.seed = seed;
    }
    let s = random_scenario(&tp, tp.ratio_grid[0], tp.seed).map_err(|e| e.to_string())?;
    let bytes = serde_json::to_vec_pretty(&s).map_err(|e| e.to_string())?;
    io::write_atomic(out, &bytes)?;
    Ok(ExitCode::SUCCESS)
}
