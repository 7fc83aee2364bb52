//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any fails. Expensive propagations are
//! shared between criteria.
//!
//! Release mode is strongly recommended:
//! `cargo test --release --test acceptance`.

use std::path::Path;
use std::time::Instant;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tweezer::dynamics::{
    adiabaticity_bound, branch_state, channel_phase, propagate, PhaseOptions, PropagationOptions,
    PropagationResult,
};
use tweezer::gate::{
    bell_scheme, bell_separation_check, build_g, build_g_closed, build_u, build_u_explicit,
    local_equivalence_class, max_abs_diff, tunability_gamma, unitarity_residual, wrap_pi, GatePhases,
};
use tweezer::grid::{make_grid, Exchange, Grid1D, Parity};
use tweezer::potential::{ChannelId, WellSchedule, RampProfile, ScatteringLengths, TrajectorySpec, WellConfig};
use tweezer::spectra::{
    gate_path_branch, localized_basis, opposite_well_state, run_sweep, separation_grid, solve_lowest_pair,
    solve_single, BranchRole, Sector, Sweep, SweepOptions,
};

type Check = Result<(bool, String), String>;

/// Fidelity-trend calibration: wells start 8σ apart, merge completely,
/// hold briefly and separate along smoothstep ramps.
const D_MAX: f64 = 8.0;
const D_MIN: f64 = 0.0;
const HOLD: f64 = 0.15;

fn slow_grid() -> Grid1D {
    make_grid(10.0, 201).unwrap()
}

/// At `v ≳ v₀` the atoms are flung well past the trap centres.
fn fast_grid() -> Grid1D {
    make_grid(20.0, 401).unwrap()
}

fn template() -> TrajectorySpec {
    TrajectorySpec::new(D_MAX, D_MIN, 1.0, HOLD, 1.0, RampProfile::Smoothstep).unwrap()
}

fn opposite_pair(grid: &Grid1D, cfg: &WellConfig) -> tweezer::grid::Wavefunction2D {
    opposite_well_state(&localized_basis(grid, D_MAX, cfg).unwrap(), Exchange::Symmetric).unwrap()
}

struct Run {
    label: String,
    result: PropagationResult,
}

struct Shared {
    cfg: WellConfig,
    v0: f64,
    runs: Vec<Run>,
    /// Fidelities at 0.01, 0.1 and 1 v₀.
    trend: Option<[f64; 3]>,
}

impl Shared {
    fn run(&mut self, label: &str, psi0: &tweezer::grid::Wavefunction2D, v: f64, channel: ChannelId, dt: Option<f64>) -> Result<f64, String> {
        let traj = template().with_speed(v).map_err(|e| e.to_string())?;
        let mut opts = PropagationOptions::for_config(&self.cfg);
        if let Some(dt) = dt {
            opts = opts.with_dt(dt);
        }
        let t = Instant::now();
        let result = propagate(psi0, &traj, channel, &self.cfg, &opts).map_err(|e| format!("{label}: {e}"))?;
        eprintln!(
            "  {label}: f = {:.6}, {} steps, {:.0} s",
            result.fidelity,
            result.steps,
            t.elapsed().as_secs_f64()
        );
        let f = result.fidelity;
        self.runs.push(Run { label: label.into(), result });
        Ok(f)
    }
}

fn c1_fidelity_trend(s: &mut Shared) -> Check {
    let slow = slow_grid();
    let psi = opposite_pair(&slow, &s.cfg);
    let f_slow = s.run("0.01 v0", &psi, 0.01 * s.v0, ChannelId::C00, None)?;
    let f_mid = s.run("0.1 v0", &psi, 0.1 * s.v0, ChannelId::C00, None)?;
    let fast = fast_grid();
    let psi = opposite_pair(&fast, &s.cfg);
    let f_fast = s.run("1 v0", &psi, s.v0, ChannelId::C00, None)?;
    s.trend = Some([f_slow, f_mid, f_fast]);
    let ok = f_slow >= 0.99 && (0.2..=0.8).contains(&f_mid) && f_fast <= 0.05;
    Ok((ok, format!("v0 = {:.4}; f = {f_slow:.5} / {f_mid:.4} / {f_fast:.4} at 0.01 / 0.1 / 1 v0", s.v0)))
}

fn sweep_for(a: f64) -> Result<(WellConfig, Sweep), String> {
    let cfg = WellConfig::default().with_uniform_scattering_length(a);
    let grid = make_grid(11.0, 221).unwrap();
    let ds = separation_grid(0.0, 10.0, 0.1).map_err(|e| e.to_string())?;
    let sweep = run_sweep(&grid, &ds, ChannelId::C00, &cfg, &SweepOptions::default()).map_err(|e| e.to_string())?;
    if let Some((d, e)) = sweep.failures.first() {
        return Err(format!("a = {a}: sweep failed at d = {d}: {e}"));
    }
    Ok((cfg, sweep))
}

fn role_energy(sweep: &Sweep, role: BranchRole, d: f64) -> Result<f64, String> {
    sweep
        .branch(role)
        .and_then(|b| b.energy_at(d))
        .ok_or_else(|| format!("no {} branch at d = {d}", role.as_str()))
}

fn sector_counts(sweep: &Sweep) -> [usize; 4] {
    let mut c = [0; 4];
    for b in &sweep.branches {
        c[b.sector.index()] += 1;
    }
    c
}

fn c2_spectrum(sweeps: &[(f64, WellConfig, Sweep)]) -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (a, cfg, sweep) in sweeps {
        let w0 = cfg.omega0();
        let counts = sector_counts(sweep);
        let opp_s = role_energy(sweep, BranchRole::OppositeSymmetric, 10.0)?;
        let opp_a = role_energy(sweep, BranchRole::OppositeAntisymmetric, 10.0)?;
        let same_s = role_energy(sweep, BranchRole::SameWellSymmetric, 10.0)?;
        let same_o = role_energy(sweep, BranchRole::SameWellOdd, 10.0)?;
        let crossings = sweep.crossings.len();
        ok &= crossings >= 1;
        if *a > 0.0 {
            // Merged-well content of the six lowest: three symmetric-even,
            // one each of the other sectors.
            let labels = counts == [3, 1, 1, 1];
            let lowest_is_opposite = sweep.branches.iter().any(|b| {
                b.sector == Sector::SE && b.n == 0 && b.role == Some(BranchRole::OppositeSymmetric)
            });
            let odd_is_same = sweep
                .branches
                .iter()
                .any(|b| b.sector == Sector::SO && b.n == 0 && b.role == Some(BranchRole::SameWellOdd));
            let split = (opp_s - opp_a).abs() / w0;
            let penalty = (same_s - opp_a) / w0;
            ok &= labels && lowest_is_opposite && odd_is_same && split < 1e-3 && penalty > 0.0;
            notes.push(format!(
                "a=+{a}: sectors {counts:?}, |E(LR+RL)-E(LR-RL)| = {split:.1e}, on-site = {penalty:.3} hw0, {crossings} crossings"
            ));
        } else {
            let same_lowest = same_s.max(same_o) < opp_s.min(opp_a);
            let ground_is_same = sweep.branches.iter().any(|b| {
                b.sector == Sector::SE && b.n == 0 && b.role == Some(BranchRole::SameWellSymmetric)
            });
            ok &= same_lowest && ground_is_same;
            notes.push(format!(
                "a={a}: same-well lowest = {same_lowest}, ground connects to LL+RR = {ground_is_same}, {crossings} crossings"
            ));
        }
    }
    Ok((ok, notes.join("; ")))
}

/// Distance from `e` to the nearest noninteracting antisymmetric pair level
/// of the given parity, built from the one-body spectrum. Nearest rather
/// than n-th because such levels may cross exactly without interaction.
fn free_antisymmetric(grid: &Grid1D, d: f64, cfg: &WellConfig, parity: Parity, e: f64) -> Result<f64, String> {
    let single = solve_single(grid, d, cfg, 10).map_err(|e| e.to_string())?;
    let mut levels = Vec::new();
    for i in 0..single.len() {
        for j in i + 1..single.len() {
            let (pi, pj) = (single[i].label.parity, single[j].label.parity);
            let p = match (pi, pj) {
                (Some(a), Some(b)) => a.product(b),
                _ => return Err(format!("unlabelled one-body state at d = {d}")),
            };
            if p == parity {
                levels.push(single[i].energy + single[j].energy);
            }
        }
    }
    levels
        .iter()
        .map(|l| (l - e).abs())
        .min_by(f64::total_cmp)
        .ok_or_else(|| format!("no free levels at d = {d}"))
}

fn c3_antisymmetric(sweeps: &[(f64, WellConfig, Sweep)]) -> Check {
    let grid = make_grid(11.0, 221).unwrap();
    let mut worst = 0.0f64;
    let mut samples = 0;
    for (_, cfg, sweep) in sweeps {
        for b in sweep.branches.iter().filter(|b| b.sector.exchange == Exchange::Antisymmetric) {
            for &(d, e) in &b.samples {
                let gap = free_antisymmetric(&grid, d, cfg, b.sector.parity, e)?;
                worst = worst.max(gap / cfg.omega0());
                samples += 1;
            }
        }
    }
    Ok((samples > 0 && worst < 1e-6, format!("max |E - E(g=0)| = {worst:.2e} hw0 over {samples} samples")))
}

fn c4_perturbative() -> Check {
    let cfg = WellConfig::default().with_uniform_scattering_length(1e-3);
    let g = cfg.coupling(ChannelId::C00);
    let mut notes = Vec::new();
    let mut ok = true;
    for n in [161, 321] {
        let grid = make_grid(10.0, n).unwrap();
        let single = solve_single(&grid, 0.0, &cfg, 3).map_err(|e| e.to_string())?;
        let spacing = single[1].energy - single[0].energy;
        let free = 2.0 * single[0].energy;
        let dx = grid.dx();
        let overlap4: f64 = single[0].state.amplitudes.iter().map(|c| c.norm_sqr().powi(2)).sum::<f64>() * dx;
        let pair = solve_lowest_pair(&grid, 0.0, ChannelId::C00, &cfg, 1, &Default::default()).map_err(|e| e.to_string())?;
        let shift = pair.energy(Sector::SE, 0) - free;
        let predicted = g * overlap4;
        let rel = (shift - predicted).abs() / predicted.abs();
        let small = shift.abs() < 0.02 * spacing;
        ok &= small && rel < 0.05;
        notes.push(format!("n={n}: shift {shift:.5e}, g sum|phi|^4 dx {predicted:.5e}, rel {rel:.1e}"));
    }
    Ok((ok, notes.join("; ")))
}

fn c5_gate_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20240607);
    let (mut dual, mut closed, mut unit, mut gamma) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let mut r = || rng.gen_range(-20.0..20.0);
        let p = GatePhases::new(r(), r(), r(), r());
        let u = build_u(&p);
        let g = build_g(&p);
        dual = dual.max(max_abs_diff(&u, &build_u_explicit(&p)));
        closed = closed.max(max_abs_diff(&g, &build_g_closed(&p)));
        unit = unit.max(unitarity_residual(&u)).max(unitarity_residual(&g));
        let from_phases = tunability_gamma(&p).gamma;
        let class = local_equivalence_class(&g).map_err(|e| e.to_string())?;
        let from_class = class.gamma.ok_or("gate left the controlled-phase family")?;
        gamma = gamma.max((from_phases - from_class).abs());
    }
    let ok = dual < 1e-12 && closed < 1e-12 && unit < 1e-12 && gamma < 1e-9;
    Ok((ok, format!("dual {dual:.1e}, closed form {closed:.1e}, unitarity {unit:.1e}, gamma {gamma:.1e}")))
}

/// Phase a state picks up from being carried along with the wells,
/// `∫ 2·(ḋ/2)²/2 dt`; absent from the adiabatic energy integral.
fn transport_phase(traj: &TrajectorySpec) -> f64 {
    let m = 20_000;
    let dt = traj.total_duration() / m as f64;
    (0..m)
        .map(|k| {
            let t = k as f64 * dt;
            let v = (traj.d_at(t + dt).unwrap() - traj.d_at(t).unwrap()) / dt;
            0.25 * v * v * dt
        })
        .sum()
}

fn c6_phase_oracle(s: &mut Shared) -> Check {
    let grid = slow_grid();
    let v = 0.01 * s.v0;
    let traj = template().with_speed(v).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut deltas = Vec::new();
    let mut notes = Vec::new();
    for channel in [ChannelId::C00, ChannelId::CPsiMinus] {
        let branch = gate_path_branch(&grid, channel, &s.cfg, D_MAX).map_err(|e| e.to_string())?;
        let psi = branch_state(&grid, channel, &s.cfg, branch, D_MAX).map_err(|e| e.to_string())?;
        let phi = channel_phase(&grid, &traj, channel, &s.cfg, &PhaseOptions::default()).map_err(|e| e.to_string())?;
        s.run(&format!("phase {channel}"), &psi, v, channel, None)?;
        let r = &s.runs.last().unwrap().result;
        let delta = wrap_pi(r.overlap_phase + phi);
        worst = worst.max(delta.abs());
        deltas.push(delta);
        notes.push(format!("{channel}: phi = {phi:.3}, delta = {delta:+.3}"));
    }
    notes.push(format!(
        "channel difference {:.3}, free transport phase {:.3}",
        (deltas[0] - deltas[1]).abs(),
        transport_phase(&traj)
    ));
    Ok((worst < 0.05, notes.join("; ")))
}

fn c7_conservation(s: &mut Shared) -> Check {
    let grid = slow_grid();
    let psi = opposite_pair(&grid, &s.cfg);
    let dt = PropagationOptions::for_config(&s.cfg).dt;
    let f_half = s.run("0.1 v0, dt/2", &psi, 0.1 * s.v0, ChannelId::C00, Some(0.5 * dt))?;
    let f_full = s
        .runs
        .iter()
        .find(|r| r.label == "0.1 v0")
        .map(|r| r.result.fidelity)
        .ok_or("0.1 v0 run missing")?;
    let (mut norm, mut ex, mut par) = (0.0f64, 0.0f64, 0.0f64);
    for r in s.runs.iter().filter(|r| r.label != "0.1 v0, dt/2") {
        norm = norm.max(r.result.norm_drift);
        ex = ex.max(r.result.exchange_drift);
        par = par.max(r.result.parity_drift);
    }
    let df = (f_half - f_full).abs();
    let ok = norm < 1e-8 && ex < 1e-6 && par < 1e-6 && df < 1e-4;
    Ok((
        ok,
        format!("{} runs: norm {norm:.1e}, exchange {ex:.1e}, parity {par:.1e}; |f(dt) - f(dt/2)| = {df:.1e}", s.runs.len() - 1),
    ))
}

fn c8_speed_bound(s: &Shared) -> Check {
    let [f_slow, _, f_fast] = s.trend.ok_or("fidelity trend unavailable")?;
    Ok((f_slow >= 0.99 && f_fast < 0.5, format!("f(0.01 v_bound) = {f_slow:.5}, f(v_bound) = {f_fast:.4}")))
}

fn c9_bell(s: &Shared) -> Check {
    let grid = slow_grid();
    let mut cfg = s.cfg;
    cfg.scattering_lengths = ScatteringLengths { a00: 0.1, a01: 0.1, a11: 0.12 };
    let w0 = cfg.omega0();
    let probe = bell_scheme(&grid, &cfg, 0.0).map_err(|e| e.to_string())?;
    let linewidth = 0.5 * probe.detuning_11.abs();
    let report = bell_scheme(&grid, &cfg, linewidth).map_err(|e| e.to_string())?;
    let degenerate = bell_scheme(&grid, &s.cfg, 0.01 * w0).map_err(|e| e.to_string())?;
    let traj = template().with_speed(0.01 * s.v0).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let sep = bell_separation_check(&grid, &cfg, &traj, &PropagationOptions::for_config(&cfg))
        .map_err(|e| e.to_string())?;
    eprintln!("  separation: f = {:.6}, {} steps, {:.0} s", sep.fidelity, sep.steps, t.elapsed().as_secs_f64());
    let ok = report.resolvable && sep.fidelity >= 0.99 && !degenerate.resolvable;
    Ok((
        ok,
        format!(
            "detuning {:.4} hw0, resolvable {}, separation fidelity {:.5}, degenerate resolvable {}",
            report.detuning_11_hw0, report.resolvable, sep.fidelity, degenerate.resolvable
        ),
    ))
}

const TINY_CONFIG: &str = r#"{
  "grid": {"x_max": 10.0, "n_points": 61},
  "trajectory": {"d_max": 8.0, "d_min": 0.0, "hold_time": 0.1},
  "numerics": {"d_step": 0.5, "d_sweep_max": 8.0, "phase_nodes": 8, "dt": 0.1, "leakage_limit": 1.0},
  "output": {"eigenfunction_d": [0.0, 8.0]},
  "evolve": {"speeds": [0.5, 1.0]},
  "scan": {"v_min": 0.5, "v_max": 1.0, "count": 3},
  "gate": {"hold_times": [0.0, 0.1]}
}"#;

fn payloads(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let keep = (name.ends_with(".csv") || name.ends_with(".json")) && name != "manifest.json";
        if keep {
            out.push((name, std::fs::read(&path).map_err(|e| e.to_string())?));
        }
    }
    out.sort();
    Ok(out)
}

fn c10_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("config.json");
    std::fs::write(&config, TINY_CONFIG).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut ok = true;
    for cmd in ["spectrum", "evolve", "gate", "bell", "adiabaticity"] {
        let mut runs = Vec::new();
        for workers in [1, 2] {
            let out = tmp.path().join(format!("{cmd}-{workers}"));
            let args = [
                "tweezer",
                cmd,
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--workers",
                &workers.to_string(),
                "--scan",
            ];
            let code = tweezer::cli::run(tweezer::cli::Cli::try_parse_from(args).map_err(|e| e.to_string())?);
            runs.push((code, payloads(&out)?));
        }
        let same = runs[0] == runs[1] && !runs[0].1.is_empty();
        ok &= same;
        notes.push(format!("{cmd}: exit {}, {} files {}", runs[0].0, runs[0].1.len(), if same { "identical" } else { "DIFFER" }));
    }
    Ok((ok, notes.join("; ")))
}

fn report(name: &str, started: Instant, check: Check, failures: &mut usize) {
    let secs = started.elapsed().as_secs_f64();
    match check {
        Ok((true, detail)) => println!("PASS {name} ({secs:.0} s): {detail}"),
        Ok((false, detail)) => {
            *failures += 1;
            println!("FAIL {name} ({secs:.0} s): {detail}");
        }
        Err(e) => {
            *failures += 1;
            println!("FAIL {name} ({secs:.0} s): error: {e}");
        }
    }
}

fn main() {
    let mut failures = 0;
    let cfg = WellConfig::default();
    let traj = template().with_speed(1.0).unwrap();
    let v0 = adiabaticity_bound(&slow_grid(), &traj, ChannelId::C00, &cfg).expect("speed bound").v_bound;
    let mut shared = Shared { cfg, v0, runs: Vec::new(), trend: None };

    let t = Instant::now();
    let sweeps: Result<Vec<(f64, WellConfig, Sweep)>, String> = [0.1, -0.1]
        .into_iter()
        .map(|a| sweep_for(a).map(|(c, s)| (a, c, s)))
        .collect();
    match sweeps {
        Ok(sweeps) => {
            report("C2 spectrum structure", t, c2_spectrum(&sweeps), &mut failures);
            let t = Instant::now();
            report("C3 antisymmetric states ignore the interaction", t, c3_antisymmetric(&sweeps), &mut failures);
        }
        Err(e) => {
            report("C2 spectrum structure", t, Err(e.clone()), &mut failures);
            report("C3 antisymmetric states ignore the interaction", t, Err(e), &mut failures);
        }
    }
    let t = Instant::now();
    report("C4 first-order interaction shift", t, c4_perturbative(), &mut failures);
    let t = Instant::now();
    report("C5 gate algebra", t, c5_gate_algebra(), &mut failures);
    let t = Instant::now();
    report("C10 determinism across worker counts", t, c10_determinism(), &mut failures);
    let t = Instant::now();
    report("C9 Bell-pair scheme", t, c9_bell(&shared), &mut failures);
    let t = Instant::now();
    report("C1 fidelity versus well speed", t, c1_fidelity_trend(&mut shared), &mut failures);
    let t = Instant::now();
    report("C8 speed bound consistency", t, c8_speed_bound(&shared), &mut failures);
    let t = Instant::now();
    report("C6 propagated phase matches energy integral", t, c6_phase_oracle(&mut shared), &mut failures);
    let t = Instant::now();
    report("C7 conservation and time-step convergence", t, c7_conservation(&mut shared), &mut failures);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
