//! Command-line front end: configuration, subcommand dispatch, parallel
//! task orchestration and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dynamics::{
    adiabaticity_bound, branch_state, channel_phase, gate_path_energy, propagate, speed_scan, AdiabaticityReport,
    PropagationResult,
};
use crate::error::{Error, Result};
use crate::gate::{
    apply_gate, bell_scheme, bell_separation_check, gate_from_phases, tunability_gamma, wrap_pi,
    BellSchemeReport, BellSeparation, GatePhases, GateReport,
};
use crate::grid::{Grid1D, Wavefunction2D};
use crate::io::{columns_csv, magnitudes_csv, time_series_csv, OutputEntry, OutputSink};
use crate::potential::{ChannelId, TrajectorySpec};
use crate::spectra::{
    gate_path_branch, localized_basis, opposite_well_state, run_sweep, separation_grid, solve_single, spectrum_csv,
    BranchRole, Crossing, SweepOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tweezer", version, about = "Two-boson optical-tweezer exchange gate simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (overrides parallelism.workers).
    #[arg(long, global = true, env = "TWEEZER_WORKERS")]
    pub workers: Option<usize>,

    /// With `adiabaticity`: also run the speed scan.
    #[arg(long, global = true)]
    pub scan: bool,

    /// With `gate`: cross-check the integrated phases by propagation.
    #[arg(long, global = true)]
    pub verify_propagation: bool,

    /// `key=value` overrides of config fields, dotted paths allowed.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Single-particle eigenfunctions and tracked pair branches over d.
    Spectrum,
    /// Propagate the opposite-well state along the trajectory at each speed.
    Evolve,
    /// Channel phases, the entangling unitary and its controlled-phase angle.
    Gate,
    /// Selective-excitation Bell-pair scheme.
    Bell,
    /// Speed bound from the gap, optionally with a speed scan.
    Adiabaticity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Gate => "gate",
            Command::Bell => "bell",
            Command::Adiabaticity => "adiabaticity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatus {
    pub task: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TaskStatus {
    fn ok(task: impl Into<String>) -> Self {
        TaskStatus { task: task.into(), ok: true, error: None }
    }

    fn failed(task: impl Into<String>, e: &Error) -> Self {
        TaskStatus { task: task.into(), ok: false, error: Some(e.to_string()) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub started: String,
    pub finished: String,
    pub exit_code: i32,
    pub tasks: Vec<TaskStatus>,
    pub outputs: Vec<OutputEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn exit_code_for(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

/// Parse the configuration, apply flag overrides and validate.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    cfg = cfg.with_overrides(&cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.output.directory = out.to_string_lossy().into_owned();
    }
    if let Some(w) = cli.workers {
        cfg.parallelism.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run one invocation and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return EXIT_VALIDATION;
        }
    };
    let started = chrono::Utc::now().to_rfc3339();
    let mut sink = match OutputSink::new(&cfg.output.directory) {
        Ok(s) => s,
        Err(e) => {
            log::error!("{e}");
            return EXIT_VALIDATION;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism.workers).build() {
        Ok(p) => p,
        Err(e) => {
            log::error!("cannot start worker pool: {e}");
            return EXIT_VALIDATION;
        }
    };
    log::info!("{} with {} worker(s), output in {}", cli.command.name(), pool.current_num_threads(), cfg.output.directory);
    let outcome = pool.install(|| match cli.command {
        Command::Spectrum => cmd_spectrum(&cfg, &mut sink),
        Command::Evolve => cmd_evolve(&cfg, &mut sink),
        Command::Gate => cmd_gate(&cfg, cli.verify_propagation, &mut sink),
        Command::Bell => cmd_bell(&cfg, &mut sink),
        Command::Adiabaticity => cmd_adiabaticity(&cfg, cli.scan, &mut sink),
    });
    let (tasks, code) = match outcome {
        Ok(tasks) => {
            let failed = tasks.iter().filter(|t| !t.ok).count();
            let code = if failed == 0 {
                EXIT_OK
            } else if failed == tasks.len() {
                EXIT_NUMERICAL
            } else {
                EXIT_PARTIAL
            };
            for t in tasks.iter().filter(|t| !t.ok) {
                log::warn!("task {} failed: {}", t.task, t.error.as_deref().unwrap_or(""));
            }
            (tasks, code)
        }
        Err(e) => {
            log::error!("{e}");
            (vec![TaskStatus::failed(cli.command.name(), &e)], exit_code_for(&e))
        }
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        config: cfg.clone(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        exit_code: code,
        tasks,
        outputs: sink.entries(),
    };
    let text = match serde_json::to_string_pretty(&manifest) {
        Ok(t) => t + "\n",
        Err(e) => {
            log::error!("{e}");
            return EXIT_NUMERICAL;
        }
    };
    if let Err(e) = crate::io::write_atomic(&sink.root().join(MANIFEST_NAME), text.as_bytes()) {
        log::error!("cannot write manifest: {e}");
        return EXIT_VALIDATION;
    }
    println!("{}", sink.root().join(MANIFEST_NAME).display());
    code
}

/// Speed reference `v₀`: the bound for channel `c00` on the configured
/// trajectory.
fn speed_unit(cfg: &RunConfig, grid: &Grid1D) -> Result<AdiabaticityReport> {
    let t = &cfg.trajectory;
    let template = TrajectorySpec::new(t.d_max, t.d_min, 1.0, t.hold_time, 1.0, t.profile)?;
    adiabaticity_bound(grid, &template, ChannelId::C00, &cfg.well)
}

fn fmt_speed(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

#[derive(Serialize)]
struct BranchSummary {
    name: String,
    sector: String,
    n: usize,
    exchange: &'static str,
    parity: &'static str,
    role: Option<BranchRole>,
    min_overlap: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    channel: ChannelId,
    branches: Vec<BranchSummary>,
    crossings: Vec<Crossing>,
    failures: Vec<(f64, String)>,
}

/// `(d, energy, parity)` of one single-particle level.
type SingleLevel = (f64, f64, &'static str);

pub fn cmd_spectrum(cfg: &RunConfig, sink: &mut OutputSink) -> Result<Vec<TaskStatus>> {
    let grid = cfg.grid()?;
    let well = &cfg.well;
    let mut tasks = Vec::new();

    let ds = separation_grid(0.0, cfg.numerics.d_sweep_max, cfg.numerics.d_step)?;
    let singles: Vec<Result<Vec<SingleLevel>>> = ds
        .par_iter()
        .map(|&d| {
            let s = solve_single(&grid, d, well, 3)?;
            Ok(s.iter().map(|e| (d, e.energy, e.label.parity_str())).collect())
        })
        .collect();
    let mut table = String::from("d,n,energy_hw0,parity\n");
    let mut single_failures = Vec::new();
    for (d, r) in ds.iter().zip(singles) {
        match r {
            Ok(rows) => {
                for (n, (d, e, p)) in rows.into_iter().enumerate() {
                    let _ = writeln!(table, "{d},{n},{},{p}", well.to_hw0(e));
                }
            }
            Err(e) => single_failures.push(format!("d = {d}: {e}")),
        }
    }
    sink.write_text("single_energies.csv", &table)?;
    tasks.push(if single_failures.is_empty() {
        TaskStatus::ok("single/sweep")
    } else {
        TaskStatus { task: "single/sweep".into(), ok: false, error: Some(single_failures.join("; ")) }
    });

    for &d in &cfg.output.eigenfunction_d {
        let name = format!("single/eigenfunctions/d={d}");
        match solve_single(&grid, d, well, 3) {
            Ok(states) => {
                let names = ["psi_A", "psi_B", "psi_C"].iter().map(|s| s.to_string()).collect::<Vec<_>>();
                let cols: Vec<Vec<f64>> =
                    states.iter().map(|s| s.state.amplitudes.iter().map(|c| c.re).collect()).collect();
                sink.write_text(&format!("eigenfunctions_d{}.csv", fmt_speed(d)), &columns_csv(&grid, &names, &cols))?;
                tasks.push(TaskStatus::ok(name));
            }
            Err(e) => tasks.push(TaskStatus::failed(name, &e)),
        }
    }

    let opts = SweepOptions { k: cfg.numerics.k_states, davidson: cfg.davidson_options(), ..SweepOptions::default() };
    for &channel in &cfg.channels {
        let name = format!("pair/{channel}");
        log::info!("sweeping {channel} over {} separations", ds.len());
        match run_sweep(&grid, &ds, channel, well, &opts) {
            Ok(sweep) => {
                sink.write_text(&format!("spectrum_{channel}.csv"), &spectrum_csv(&sweep.branches, well))?;
                let summary = SweepSummary {
                    channel,
                    branches: sweep
                        .branches
                        .iter()
                        .map(|b| BranchSummary {
                            name: b.name(),
                            sector: b.sector.short().into(),
                            n: b.n,
                            exchange: b.label.exchange_str(),
                            parity: b.label.parity_str(),
                            role: b.role,
                            min_overlap: b.min_overlap,
                        })
                        .collect(),
                    crossings: sweep.crossings.clone(),
                    failures: sweep.failures.iter().map(|(d, e)| (*d, e.to_string())).collect(),
                };
                sink.write_json(&format!("spectrum_{channel}.json"), &summary)?;
                if sweep.failures.is_empty() {
                    tasks.push(TaskStatus::ok(name));
                } else {
                    for (d, e) in &sweep.failures {
                        tasks.push(TaskStatus::failed(format!("{name}/d={d}"), e));
                    }
                    tasks.push(TaskStatus::ok(name));
                }
            }
            Err(e) => tasks.push(TaskStatus::failed(name, &e)),
        }
    }
    Ok(tasks)
}

fn opposite_state(cfg: &RunConfig, grid: &Grid1D, channel: ChannelId) -> Result<Wavefunction2D> {
    let lb = localized_basis(grid, cfg.trajectory.d_max, &cfg.well)?;
    opposite_well_state(&lb, channel.spatial_exchange())
}

fn evolve_row(out: &mut String, channel: ChannelId, v_units: f64, v: f64, r: &std::result::Result<PropagationResult, String>) {
    match r {
        Ok(r) => {
            let _ = writeln!(
                out,
                "{channel},{v_units},{v},{},{},{},{},{},{},{},{},{},ok",
                r.fidelity,
                r.overlap_phase,
                r.same_well_population,
                r.opposite_well_population,
                r.norm_drift,
                r.exchange_drift,
                r.parity_drift,
                r.leakage,
                r.steps
            );
        }
        Err(_) => {
            let _ = writeln!(out, "{channel},{v_units},{v},,,,,,,,,,failed");
        }
    }
}

const EVOLVE_HEADER: &str = "channel,v_v0,v,fidelity,overlap_phase,same_well,opposite_well,norm_drift,exchange_drift,parity_drift,leakage,steps,status\n";

pub fn cmd_evolve(cfg: &RunConfig, sink: &mut OutputSink) -> Result<Vec<TaskStatus>> {
    let grid = cfg.grid()?;
    let v0 = speed_unit(cfg, &grid)?.v_bound;
    log::info!("v0 = {v0}");
    let opts = cfg.propagation_options();
    let mut jobs = Vec::new();
    for &channel in &cfg.channels {
        let psi0 = opposite_state(cfg, &grid, channel)?;
        for &v in &cfg.evolve.speeds {
            jobs.push((channel, v, psi0.clone()));
        }
    }
    let results: Vec<std::result::Result<PropagationResult, Error>> = jobs
        .par_iter()
        .map(|(channel, v, psi0)| {
            let traj = cfg.trajectory(v0)?.with_speed_in_units(*v, *v, v0)?;
            log::info!("propagating {channel} at {v} v0 ({} time units)", traj.total_duration());
            propagate(psi0, &traj, *channel, &cfg.well, &opts)
        })
        .collect();

    let mut table = String::from(EVOLVE_HEADER);
    let mut tasks = Vec::new();
    for ((channel, v, _), r) in jobs.iter().zip(results) {
        let name = format!("evolve/{channel}/v={v}");
        let tag = format!("{channel}_v{}", fmt_speed(*v));
        let r = r.map_err(|e| {
            tasks.push(TaskStatus::failed(&name, &e));
            e.to_string()
        });
        evolve_row(&mut table, *channel, *v, v * v0, &r);
        if let Ok(r) = r {
            if let Some(series) = &r.time_series {
                sink.write_text(&format!("series_{tag}.csv"), &time_series_csv(series))?;
            }
            for (k, s) in r.snapshots.iter().enumerate() {
                sink.write_text(&format!("snapshot_{tag}_{k:04}.csv"), &magnitudes_csv(&grid, &s.magnitudes))?;
            }
            if cfg.output.wavefunctions {
                sink.write_wavefunction2d(&format!("final_{tag}"), &r.final_state)?;
            }
            tasks.push(TaskStatus::ok(name));
        }
    }
    sink.write_text("evolve.csv", &table)?;
    Ok(tasks)
}

#[derive(Serialize)]
struct ConcurrenceSample {
    input: &'static str,
    concurrence: f64,
}

#[derive(Serialize)]
struct PhaseCheck {
    channel: ChannelId,
    /// `arg⟨ψ(0)|ψ(T)⟩` from propagation.
    propagated: f64,
    /// `−φ` reduced to `(−π, π]`.
    integrated: f64,
    delta: f64,
    fidelity: f64,
}

#[derive(Serialize)]
struct GateOutputReport {
    v0: f64,
    trajectory: TrajectorySpec,
    gate: GateReport,
    concurrence: Vec<ConcurrenceSample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<Vec<PhaseCheck>>,
}

pub fn cmd_gate(cfg: &RunConfig, verify: bool, sink: &mut OutputSink) -> Result<Vec<TaskStatus>> {
    for c in [ChannelId::C00, ChannelId::CPsiPlus, ChannelId::C11, ChannelId::CPsiMinus] {
        if !cfg.channels.contains(&c) {
            return Err(Error::Config(format!("gate needs all four channels; {c} is missing")));
        }
    }
    let grid = cfg.grid()?;
    let v0 = speed_unit(cfg, &grid)?.v_bound;
    let traj = cfg.trajectory(v0)?;
    let popts = cfg.phase_options();
    let well = &cfg.well;

    // Channels with the same spatial symmetry and coupling share one integral.
    let key = |c: ChannelId| (c.spatial_exchange().sign() > 0.0, well.coupling(c).to_bits());
    let mut unique: BTreeMap<(bool, u64), ChannelId> = BTreeMap::new();
    for c in [ChannelId::C00, ChannelId::CPsiPlus, ChannelId::C11, ChannelId::CPsiMinus] {
        unique.entry(key(c)).or_insert(c);
    }
    let reps: Vec<ChannelId> = unique.values().copied().collect();
    let computed: Vec<Result<(f64, f64)>> = reps
        .par_iter()
        .map(|&c| {
            let phi = channel_phase(&grid, &traj, c, well, &popts)?;
            let e_min = gate_path_energy(&grid, &traj, c, well, &popts)?;
            Ok((phi, e_min))
        })
        .collect();
    let mut by_key = BTreeMap::new();
    for (c, r) in reps.iter().zip(computed) {
        by_key.insert(key(*c), r?);
    }
    let get = |c: ChannelId| by_key[&key(c)];
    let phases = GatePhases::new(
        get(ChannelId::C00).0,
        get(ChannelId::C11).0,
        get(ChannelId::CPsiPlus).0,
        get(ChannelId::CPsiMinus).0,
    );
    let rates = GatePhases::new(
        get(ChannelId::C00).1,
        get(ChannelId::C11).1,
        get(ChannelId::CPsiPlus).1,
        get(ChannelId::CPsiMinus).1,
    );
    let gate = gate_from_phases(phases)?;
    let u = gate.unitary_matrix();
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let concurrence = vec![
        ConcurrenceSample { input: "|+>|+>", concurrence: apply_gate(&u, [h, h], [h, h])?.concurrence },
        ConcurrenceSample { input: "|0>|1>", concurrence: apply_gate(&u, [o, z], [z, o])?.concurrence },
        ConcurrenceSample { input: "|+>|0>", concurrence: apply_gate(&u, [h, h], [o, z])?.concurrence },
    ];
    let mut tasks = vec![TaskStatus::ok("gate/phases")];

    let verification = if verify {
        let opts = cfg.propagation_options();
        let checks: Vec<Result<PhaseCheck>> = reps
            .par_iter()
            .map(|&c| {
                let branch = gate_path_branch(&grid, c, well, traj.d_max)?;
                let psi0 = branch_state(&grid, c, well, branch, traj.d_max)?;
                let r = propagate(&psi0, &traj, c, well, &opts)?;
                let integrated = wrap_pi(-get(c).0);
                Ok(PhaseCheck {
                    channel: c,
                    propagated: r.overlap_phase,
                    integrated,
                    delta: wrap_pi(r.overlap_phase - integrated),
                    fidelity: r.fidelity,
                })
            })
            .collect();
        let mut out = Vec::new();
        for (c, r) in reps.iter().zip(checks) {
            match r {
                Ok(p) => {
                    tasks.push(TaskStatus::ok(format!("gate/verify/{c}")));
                    out.push(p);
                }
                Err(e) => tasks.push(TaskStatus::failed(format!("gate/verify/{c}"), &e)),
            }
        }
        Some(out)
    } else {
        None
    };

    // Extra hold time at d_min adds E(d_min)·Δt to each phase.
    if !cfg.gate.hold_times.is_empty() {
        let mut table = String::from("hold_time,invariant_phase,gamma\n");
        for &hold in &cfg.gate.hold_times {
            let dt = hold - traj.hold_time;
            let p = GatePhases::new(
                phases.phi_00 + rates.phi_00 * dt,
                phases.phi_11 + rates.phi_11 * dt,
                phases.phi_plus + rates.phi_plus * dt,
                phases.phi_minus + rates.phi_minus * dt,
            );
            let t = tunability_gamma(&p);
            let _ = writeln!(table, "{hold},{},{}", t.invariant_phase, t.gamma);
        }
        sink.write_text("gate_hold_scan.csv", &table)?;
    }

    sink.write_json("gate.json", &GateOutputReport { v0, trajectory: traj, gate, concurrence, verification })?;
    Ok(tasks)
}

#[derive(Serialize)]
struct BellOutputReport {
    scheme: BellSchemeReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    separation: Option<BellSeparation>,
    v0: f64,
    separation_speed_v0: f64,
}

pub fn cmd_bell(cfg: &RunConfig, sink: &mut OutputSink) -> Result<Vec<TaskStatus>> {
    let grid = cfg.grid()?;
    let well = &cfg.well;
    let scheme = bell_scheme(&grid, well, cfg.bell.linewidth * well.omega0())?;
    let mut tasks = vec![TaskStatus::ok("bell/scheme")];
    let v0 = speed_unit(cfg, &grid)?.v_bound;
    let traj = cfg.trajectory(v0)?;
    let separation = match bell_separation_check(&grid, well, &traj, &cfg.propagation_options()) {
        Ok(s) => {
            tasks.push(TaskStatus::ok("bell/separation"));
            Some(s)
        }
        Err(e) => {
            tasks.push(TaskStatus::failed("bell/separation", &e));
            None
        }
    };
    sink.write_json(
        "bell.json",
        &BellOutputReport { scheme, separation, v0, separation_speed_v0: cfg.trajectory.v_out },
    )?;
    Ok(tasks)
}

pub fn cmd_adiabaticity(cfg: &RunConfig, scan: bool, sink: &mut OutputSink) -> Result<Vec<TaskStatus>> {
    let grid = cfg.grid()?;
    let t = &cfg.trajectory;
    let template = TrajectorySpec::new(t.d_max, t.d_min, 1.0, t.hold_time, 1.0, t.profile)?;
    let reports: Vec<Result<AdiabaticityReport>> =
        cfg.channels.par_iter().map(|&c| adiabaticity_bound(&grid, &template, c, &cfg.well)).collect();
    let mut tasks = Vec::new();
    let mut ok = Vec::new();
    for (c, r) in cfg.channels.iter().zip(reports) {
        match r {
            Ok(r) => {
                tasks.push(TaskStatus::ok(format!("bound/{c}")));
                ok.push(r);
            }
            Err(e) => tasks.push(TaskStatus::failed(format!("bound/{c}"), &e)),
        }
    }
    sink.write_json("adiabaticity.json", &ok)?;

    if scan {
        let channel = cfg.channels[0];
        let v0 = match ok.iter().find(|r| r.channel == ChannelId::C00) {
            Some(r) => r.v_bound,
            None => speed_unit(cfg, &grid)?.v_bound,
        };
        let psi0 = opposite_state(cfg, &grid, channel)?;
        let speeds = cfg.scan.speeds();
        let natural: Vec<f64> = speeds.iter().map(|v| v * v0).collect();
        let mut opts = cfg.propagation_options();
        opts.sample_every = 0;
        opts.snapshot_every = 0;
        let points = speed_scan(&psi0, &template.with_speed_in_units(1.0, 1.0, v0)?, &natural, v0, channel, &cfg.well, &opts)?;
        let mut table = String::from("channel,v_v0,v,fidelity,same_well,opposite_well,revival,status\n");
        for (vu, p) in speeds.iter().zip(&points) {
            match &p.result {
                Ok(r) => {
                    let _ = writeln!(
                        table,
                        "{channel},{vu},{},{},{},{},{},ok",
                        p.v, r.fidelity, r.same_well_population, r.opposite_well_population, p.revival
                    );
                    tasks.push(TaskStatus::ok(format!("scan/v={vu}")));
                }
                Err(e) => {
                    let _ = writeln!(table, "{channel},{vu},{},,,,false,failed", p.v);
                    tasks.push(TaskStatus::failed(format!("scan/v={vu}"), e));
                }
            }
        }
        sink.write_text("speed_scan.csv", &table)?;
    }
    Ok(tasks)
}
