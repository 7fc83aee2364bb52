//! Time evolution of the pair state while the wells move.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{solve_sector, DavidsonOptions, ParityBasis};
use crate::error::{Error, Result};
use crate::gate::GatePhases;
use crate::grid::{overlap, Grid1D, Wavefunction2D};
use crate::potential::{
    build_pair_hamiltonian, build_single_hamiltonian, check_extent, interaction_profile, ChannelId,
    TrajectorySpec, WellConfig, WellSchedule,
};
use crate::spectra::{gate_path_branch, solve_pair_sectors, Sector};

/// Default step in units of `1/ω₀`.
pub const DEFAULT_DT_HW0: f64 = 0.02;

/// Rational approximation of `e^{-i(H - c)dt}` for the frozen midpoint `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    /// `(1 - iHdt/2) / (1 + iHdt/2)`.
    CrankNicolson,
    /// Diagonal (2,2) Padé form, applied as two Crank–Nicolson-type
    /// factors with complex-conjugate time steps. Each factor is unitary,
    /// and the phase error of states far from the shift drops from
    /// `(ΔE dt)³/12` to `(ΔE dt)⁵/720` per step.
    #[default]
    Pade,
}

impl Stepper {
    /// Complex half-steps `τ_k`; each substep solves
    /// `(1 + iτ_k(H - c)) x = (1 - i conj(τ_k)(H - c)) ψ`.
    fn half_steps(self, dt: f64) -> Vec<Complex64> {
        match self {
            Stepper::CrankNicolson => vec![Complex64::new(0.5 * dt, 0.0)],
            Stepper::Pade => {
                let a = dt / 4.0;
                let b = dt * 3f64.sqrt() / 12.0;
                vec![Complex64::new(a, -b), Complex64::new(a, b)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Time step in natural units.
    pub dt: f64,
    pub stepper: Stepper,
    /// Relative residual at which each implicit solve is accepted.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest tolerated probability within `leakage_band` of the walls.
    pub leakage_limit: f64,
    pub leakage_band: f64,
    /// Steps between time-series samples; 0 records only the endpoints.
    pub sample_every: usize,
    /// Steps between `|ψ|` snapshots; 0 disables them.
    pub snapshot_every: usize,
}

impl PropagationOptions {
    pub fn for_config(cfg: &WellConfig) -> Self {
        PropagationOptions {
            dt: DEFAULT_DT_HW0 / cfg.omega0(),
            stepper: Stepper::default(),
            tol: 1e-13,
            max_iter: 200,
            leakage_limit: 1e-6,
            leakage_band: 1.0,
            sample_every: 0,
            snapshot_every: 0,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSample {
    pub t: f64,
    pub d: f64,
    pub fidelity: f64,
    pub norm: f64,
    pub exchange: f64,
    pub parity: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub d: f64,
    pub magnitudes: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub final_state: Wavefunction2D,
    /// `|⟨ψ_init|ψ_final⟩|²`.
    pub fidelity: f64,
    /// `arg ⟨ψ_init|ψ_final⟩`.
    pub overlap_phase: f64,
    pub same_well_population: f64,
    pub opposite_well_population: f64,
    pub norm_drift: f64,
    pub exchange_drift: f64,
    pub parity_drift: f64,
    /// Largest probability found near the walls.
    pub leakage: f64,
    pub steps: usize,
    pub dt: f64,
    /// Most Crank–Nicolson iterations needed by a single step.
    pub max_iterations: usize,
    pub time_series: Option<Vec<TimeSample>>,
    pub snapshots: Vec<Snapshot>,
}

/// `y = H x` for the pair Hamiltonian with single-particle diagonal `diag`.
fn apply_h(diag: &[f64], off: f64, w: &[f64], x: &[Complex64], y: &mut [Complex64]) {
    let n = diag.len();
    for i in 0..n {
        let base = i * n;
        let hi = diag[i];
        let row = &x[base..base + n];
        let out = &mut y[base..base + n];
        let wr = &w[base..base + n];
        for j in 0..n {
            out[j] = (hi + diag[j] + wr[j]) * row[j];
        }
        for j in 1..n {
            out[j] += off * row[j - 1];
            out[j - 1] += off * row[j];
        }
        if i > 0 {
            let up = &x[base - n..base];
            for j in 0..n {
                out[j] += off * up[j];
            }
        }
        if i + 1 < n {
            let down = &x[base + n..base + 2 * n];
            for j in 0..n {
                out[j] += off * down[j];
            }
        }
    }
}

/// Thomas factors of `M = (1 + iτA)(1 + iτB)`, where `A` and `B` hold the
/// kinetic and trap terms of one atom each plus half of the interaction
/// and of the shift.
///
/// The interaction profile is symmetric under `x_a ↔ x_b`, so the factors
/// of the lines along `x_a` also serve the lines along `x_b` after a
/// transpose. Sweeping along `x_a` with whole rows at a time keeps the
/// recurrences vectorizable.
struct LineFactors {
    n: usize,
    o: Complex64,
    inv: Vec<Complex64>,
    sup: Vec<Complex64>,
}

impl LineFactors {
    fn new(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        LineFactors { n, o: z, inv: vec![z; n * n], sup: vec![z; n * n] }
    }

    fn factor(&mut self, diag: &[f64], off: f64, w: &[f64], tau: Complex64, shift: f64) {
        let n = self.n;
        let it = Complex64::i() * tau;
        let o = it * off;
        self.o = o;
        let half = 0.5 * shift;
        for i in 0..n {
            let base = i * n;
            let wr = &w[base..base + n];
            let di = diag[i];
            if i == 0 {
                for j in 0..n {
                    let inv = 1.0 / (1.0 + it * (di + 0.5 * wr[j] - half));
                    self.inv[j] = inv;
                    self.sup[j] = o * inv;
                }
            } else {
                let (done, rest) = self.sup.split_at_mut(base);
                let prev = &done[base - n..];
                let sup = &mut rest[..n];
                let inv = &mut self.inv[base..base + n];
                for j in 0..n {
                    let piv = 1.0 + it * (di + 0.5 * wr[j] - half) - o * prev[j];
                    inv[j] = 1.0 / piv;
                    sup[j] = o * inv[j];
                }
            }
        }
    }

    /// Solve along `x_a` for every `x_b` at once.
    fn sweep(&self, r: &mut [Complex64]) {
        let n = self.n;
        let o = self.o;
        for j in 0..n {
            r[j] *= self.inv[j];
        }
        for i in 1..n {
            let base = i * n;
            let (head, tail) = r.split_at_mut(base);
            let prev = &head[base - n..];
            let cur = &mut tail[..n];
            let inv = &self.inv[base..base + n];
            for j in 0..n {
                cur[j] = (cur[j] - o * prev[j]) * inv[j];
            }
        }
        for i in (0..n - 1).rev() {
            let base = i * n;
            let (head, tail) = r.split_at_mut(base + n);
            let cur = &mut head[base..];
            let next = &tail[..n];
            let sup = &self.sup[base..base + n];
            for j in 0..n {
                cur[j] -= sup[j] * next[j];
            }
        }
    }

    /// Solve along `x_b` inside each row. The factors are read transposed,
    /// and a block of rows is advanced together so that the independent
    /// recurrences overlap.
    fn sweep_rows(&self, r: &mut [Complex64]) {
        const G: usize = 8;
        let n = self.n;
        let o = self.o;
        let mut i0 = 0;
        while i0 < n {
            let g = G.min(n - i0);
            for k in 0..g {
                let i = i0 + k;
                r[i * n] *= self.inv[i];
            }
            for j in 1..n {
                let inv = &self.inv[j * n + i0..j * n + i0 + g];
                for k in 0..g {
                    let idx = (i0 + k) * n + j;
                    r[idx] = (r[idx] - o * r[idx - 1]) * inv[k];
                }
            }
            for j in (0..n - 1).rev() {
                let sup = &self.sup[j * n + i0..j * n + i0 + g];
                for k in 0..g {
                    let idx = (i0 + k) * n + j;
                    r[idx] -= sup[k] * r[idx + 1];
                }
            }
            i0 += g;
        }
    }

    /// In-place `r ← M⁻¹ r`.
    fn solve(&self, r: &mut [Complex64]) {
        self.sweep(r);
        self.sweep_rows(r);
    }
}

/// Steps between refreshes of the preconditioner factors; in between the
/// Richardson iteration absorbs the small change of `H`.
const REFACTOR_EVERY: usize = 8;

/// A solve that stops improving within this factor of the tolerance is
/// accepted.
const STALL_FACTOR: f64 = 100.0;

/// `K = 1 + iτ(H - c)` for one substep.
struct ShiftedOperator<'a> {
    diag: &'a [f64],
    off: f64,
    w: &'a [f64],
    it: Complex64,
    shift: f64,
}

impl ShiftedOperator<'_> {
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        apply_h(self.diag, self.off, self.w, x, y);
        for (yq, xq) in y.iter_mut().zip(x) {
            *yq = xq + self.it * (*yq - self.shift * xq);
        }
    }
}

const GMRES_RESTART: usize = 24;

/// Restarted GMRES, right-preconditioned with the line factors. Fallback
/// for the substeps where plain Richardson iteration does not contract.
struct Gmres {
    restart: usize,
    basis: Vec<Vec<Complex64>>,
    work: Vec<Complex64>,
}

impl Gmres {
    fn new(restart: usize) -> Self {
        Gmres { restart, basis: Vec::new(), work: Vec::new() }
    }

    /// Improve `x` in place; returns iterations used and the final
    /// relative residual.
    fn solve(
        &mut self,
        op: &ShiftedOperator,
        precond: &LineFactors,
        b: &[Complex64],
        x: &mut [Complex64],
        tol: f64,
        max_iter: usize,
    ) -> (usize, f64) {
        let len = b.len();
        let z = Complex64::new(0.0, 0.0);
        let m = self.restart;
        if self.basis.len() < m + 1 {
            self.basis.resize_with(m + 1, || vec![z; len]);
            self.work = vec![z; len];
        }
        let b_norm = norm_sq(b).sqrt();
        let mut total = 0;
        loop {
            op.apply(x, &mut self.work);
            for q in 0..len {
                self.basis[0][q] = b[q] - self.work[q];
            }
            let beta = norm_sq(&self.basis[0]).sqrt();
            let res = beta / b_norm;
            if res <= tol || total >= max_iter {
                return (total, res);
            }
            for v in self.basis[0].iter_mut() {
                *v /= beta;
            }
            let mut h = vec![vec![z; m]; m + 1];
            let mut g = vec![z; m + 1];
            g[0] = Complex64::new(beta, 0.0);
            let mut rot: Vec<(f64, Complex64)> = Vec::with_capacity(m);
            let mut used = 0;
            for j in 0..m {
                self.work.copy_from_slice(&self.basis[j]);
                precond.solve(&mut self.work);
                let (head, tail) = self.basis.split_at_mut(j + 1);
                let next = &mut tail[0];
                op.apply(&self.work, next);
                for (i, v) in head.iter().enumerate() {
                    let hij = inner(v, next);
                    h[i][j] = hij;
                    for q in 0..len {
                        next[q] -= hij * v[q];
                    }
                }
                let hn = norm_sq(next).sqrt();
                h[j + 1][j] = Complex64::new(hn, 0.0);
                if hn > 0.0 {
                    for v in next.iter_mut() {
                        *v /= hn;
                    }
                }
                for (i, &(c, s)) in rot.iter().enumerate() {
                    let (a, bb) = (h[i][j], h[i + 1][j]);
                    h[i][j] = c * a + s * bb;
                    h[i + 1][j] = -s.conj() * a + c * bb;
                }
                let (a, bb) = (h[j][j], h[j + 1][j]);
                let nu = (a.norm_sqr() + bb.norm_sqr()).sqrt();
                let (c, s) = if a.norm() == 0.0 {
                    (0.0, Complex64::new(1.0, 0.0))
                } else {
                    (a.norm() / nu, (a / a.norm()) * bb.conj() / nu)
                };
                rot.push((c, s));
                h[j][j] = c * a + s * bb;
                h[j + 1][j] = z;
                let gj = g[j];
                g[j] = c * gj;
                g[j + 1] = -s.conj() * gj;
                used = j + 1;
                total += 1;
                if g[j + 1].norm() / b_norm <= tol || hn == 0.0 || total >= max_iter {
                    break;
                }
            }
            let mut y = vec![z; used];
            for i in (0..used).rev() {
                let mut acc = g[i];
                for k in i + 1..used {
                    acc -= h[i][k] * y[k];
                }
                y[i] = acc / h[i][i];
            }
            self.work.iter_mut().for_each(|v| *v = z);
            for (i, yi) in y.iter().enumerate() {
                for q in 0..len {
                    self.work[q] += yi * self.basis[i][q];
                }
            }
            precond.solve(&mut self.work);
            for q in 0..len {
                x[q] += self.work[q];
            }
        }
    }
}

fn norm_sq(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn wall_mass(x: &[Complex64], n: usize, band: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        let edge_i = i < band || i + band >= n;
        for j in 0..n {
            if edge_i || j < band || j + band >= n {
                s += x[i * n + j].norm_sqr();
            }
        }
    }
    s
}

/// Implicit unitary evolution of `psi0` along `schedule`.
///
/// Each step freezes `H` at the midpoint separation and applies one or
/// more substeps `(1 + iτ(H - c)) ψ' = (1 - i conj(τ)(H - c)) ψ` (see
/// [`Stepper`]), where the shift `c = ⟨H⟩` keeps the rotation per step
/// small; the phase `e^{-icdt}` is restored exactly. Each linear system is
/// solved by Richardson iteration preconditioned with the product of its
/// two one-dimensional factors.
pub fn propagate(
    psi0: &Wavefunction2D,
    schedule: &dyn WellSchedule,
    channel: ChannelId,
    cfg: &WellConfig,
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    let grid = psi0.grid;
    grid.check_symmetric()?;
    cfg.validate()?;
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {}", opts.dt)));
    }
    let (d_lo, d_hi) = schedule.d_range();
    check_extent(&grid, d_lo.abs().max(d_hi.abs()), cfg)?;
    let dx2 = grid.dx() * grid.dx();
    let norm0 = psi0.norm_sq();
    if (norm0 - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(norm0));
    }

    let n = grid.n_points();
    let duration = schedule.duration();
    let steps = if duration > 0.0 { (duration / opts.dt).ceil() as usize } else { 0 };
    let dt = if steps > 0 { duration / steps as f64 } else { 0.0 };
    let band = ((opts.leakage_band / grid.dx()).round() as usize).max(1);
    let w = interaction_profile(&grid, cfg.coupling(channel), cfg.delta_mode);

    let ex0 = psi0.exchange_expectation();
    let par0 = psi0.parity_expectation();
    let mut psi: Vec<Complex64> = psi0.amplitudes.clone();
    let mut phase = 0.0f64;
    let mut norm_drift = 0.0f64;
    let mut exchange_drift = 0.0f64;
    let mut parity_drift = 0.0f64;
    let mut leakage = wall_mass(&psi, n, band) * dx2;
    let mut max_iterations = 0;
    let mut series = Vec::new();
    let mut snapshots = Vec::new();

    let record = |t: f64, state: &[Complex64], phase: f64, series: &mut Vec<TimeSample>| -> Result<(f64, f64, f64)> {
        let rot = Complex64::from_polar(1.0, -phase);
        let wf = Wavefunction2D::new(grid, state.iter().map(|c| c * rot).collect())?;
        let d = schedule.d_at(t)?;
        let sample = TimeSample {
            t,
            d,
            fidelity: overlap(psi0, &wf)?.norm_sqr(),
            norm: wf.norm_sq(),
            exchange: wf.exchange_expectation(),
            parity: wf.parity_expectation(),
        };
        series.push(sample);
        Ok((sample.norm, sample.exchange, sample.parity))
    };
    record(0.0, &psi, 0.0, &mut series)?;
    if opts.snapshot_every > 0 {
        snapshots.push(Snapshot { t: 0.0, d: schedule.d_at(0.0)?, magnitudes: psi0.magnitudes() });
    }

    let z = Complex64::new(0.0, 0.0);
    let mut hpsi = vec![z; n * n];
    let mut b = vec![z; n * n];
    let mut x = vec![z; n * n];
    let mut r = vec![z; n * n];
    let taus = opts.stepper.half_steps(dt);
    let mut factors: Vec<LineFactors> = taus.iter().map(|_| LineFactors::new(n)).collect();
    // Recent outputs of each substep, oldest first, for extrapolated guesses.
    let mut history: Vec<Vec<Vec<Complex64>>> = vec![Vec::with_capacity(3); taus.len()];
    let mut gmres = Gmres::new(GMRES_RESTART);
    for step in 0..steps {
        let t0 = step as f64 * dt;
        let d_mid = schedule.d_at(t0 + 0.5 * dt)?;
        let single = build_single_hamiltonian(&grid, d_mid, cfg)?;
        let diag = &single.diag;
        let off = single.off;

        apply_h(diag, off, &w, &psi, &mut hpsi);
        let shift = inner(&psi, &hpsi).re / norm_sq(&psi);
        for (k, &tau) in taus.iter().enumerate() {
            if k > 0 {
                apply_h(diag, off, &w, &psi, &mut hpsi);
            }
            if step % REFACTOR_EVERY == 0 {
                factors[k].factor(diag, off, &w, tau, shift);
            }
            let it = Complex64::i() * tau;
            let it_rhs = Complex64::i() * tau.conj();
            for q in 0..n * n {
                b[q] = psi[q] - it_rhs * (hpsi[q] - shift * psi[q]);
            }
            let h = &history[k];
            match h.len() {
                3 => {
                    for q in 0..n * n {
                        x[q] = 3.0 * (h[2][q] - h[1][q]) + h[0][q];
                    }
                }
                2 => {
                    for q in 0..n * n {
                        x[q] = 2.0 * h[1][q] - h[0][q];
                    }
                }
                1 => x.copy_from_slice(&h[0]),
                _ => x.copy_from_slice(&psi),
            }
            let b_norm = norm_sq(&b).sqrt();
            let mut converged = false;
            let mut res = f64::INFINITY;
            for iter in 0..opts.max_iter {
                apply_h(diag, off, &w, &x, &mut r);
                for q in 0..n * n {
                    r[q] = b[q] - x[q] - it * (r[q] - shift * x[q]);
                }
                let prev = res;
                res = norm_sq(&r).sqrt() / b_norm;
                // Near the tolerance the residual can stall at round-off.
                let stalled = res > 0.7 * prev && res <= STALL_FACTOR * opts.tol;
                if res <= opts.tol || stalled {
                    max_iterations = max_iterations.max(iter);
                    converged = true;
                    break;
                }
                // Richardson contracts only while `|τ|` times the stiffest
                // line eigenvalue stays below one; past that, or when it
                // slows down, hand over to GMRES.
                if iter >= 2 && res > 0.5 * prev {
                    break;
                }
                factors[k].solve(&mut r);
                for q in 0..n * n {
                    x[q] += r[q];
                }
            }
            if !converged {
                let op = ShiftedOperator { diag, off, w: &w, it, shift };
                let (iters, final_res) = gmres.solve(&op, &factors[k], &b, &mut x, opts.tol, opts.max_iter);
                res = final_res;
                max_iterations = max_iterations.max(iters);
                converged = res <= STALL_FACTOR * opts.tol;
            }
            if !converged {
                return Err(Error::LinearSolve { t: t0, residual: res });
            }
            let h = &mut history[k];
            let recycled = if h.len() == 3 { Some(h.remove(0)) } else { None };
            let mut out = recycled.unwrap_or_else(|| vec![z; n * n]);
            out.copy_from_slice(&x);
            h.push(out);
            std::mem::swap(&mut psi, &mut x);
        }
        phase += shift * dt;

        let t1 = (step + 1) as f64 * dt;
        let last = step + 1 == steps;
        if last || (step + 1) % 256 == 0 {
            leakage = leakage.max(wall_mass(&psi, n, band) * dx2);
            if leakage > opts.leakage_limit {
                return Err(Error::BoundaryLeakage { leakage, limit: opts.leakage_limit });
            }
        }
        if last || (opts.sample_every > 0 && (step + 1) % opts.sample_every == 0) {
            let (nrm, ex, par) = record(t1.min(duration), &psi, phase, &mut series)?;
            norm_drift = norm_drift.max((nrm - norm0).abs());
            exchange_drift = exchange_drift.max((ex - ex0).abs());
            parity_drift = parity_drift.max((par - par0).abs());
        }
        if opts.snapshot_every > 0 && (last || (step + 1) % opts.snapshot_every == 0) {
            let magnitudes = psi.iter().map(|c| c.norm()).collect();
            snapshots.push(Snapshot { t: t1.min(duration), d: schedule.d_at(t1.min(duration))?, magnitudes });
        }
    }

    let rot = Complex64::from_polar(1.0, -phase);
    let final_state = Wavefunction2D::new(grid, psi.iter().map(|c| c * rot).collect())?;
    let ov = overlap(psi0, &final_state)?;
    let (same, opposite) = final_state.well_populations();
    Ok(PropagationResult {
        fidelity: ov.norm_sqr(),
        overlap_phase: ov.arg(),
        same_well_population: same,
        opposite_well_population: opposite,
        norm_drift,
        exchange_drift,
        parity_drift,
        leakage,
        steps,
        dt,
        max_iterations,
        time_series: (opts.sample_every > 0).then_some(series),
        snapshots,
        final_state,
    })
}

/// Speed limit from the gap to the nearest state of equal symmetry and
/// parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    pub channel: ChannelId,
    /// Gap in natural units (`ħ = 1`).
    pub omega_ab: f64,
    /// `σ ω_ab² / V₀`.
    pub v_bound: f64,
    pub v_bound_in_v0_units: f64,
    /// Separation at which the gap was taken.
    pub d_gap: f64,
    pub sector: Sector,
    pub index: usize,
}

/// Gap of the gate-path branch to its nearest same-sector neighbour at the
/// closest approach of `traj`, and the speed bound it implies.
///
/// At the far end of the trajectory the branch couples to its neighbours
/// only through tunnelling, which vanishes there, so the closest approach
/// is where the gap controls adiabaticity.
pub fn adiabaticity_bound(
    grid: &Grid1D,
    traj: &TrajectorySpec,
    channel: ChannelId,
    cfg: &WellConfig,
) -> Result<AdiabaticityReport> {
    traj.validate()?;
    let (sector, index) = gate_path_branch(grid, channel, cfg, traj.d_max)?;
    let d = traj.d_min;
    let h = build_pair_hamiltonian(grid, d, channel, cfg)?;
    let basis = ParityBasis::new(&h.single)?;
    let states = solve_sector(&h, &basis, sector.exchange, sector.parity, index + 2, &[], &DavidsonOptions::default())?;
    let e = |k: usize| states[k].energy;
    let mut gap = e(index + 1) - e(index);
    if index > 0 {
        gap = gap.min(e(index) - e(index - 1));
    }
    if !(gap > 0.0) {
        return Err(Error::UnresolvedBranches(format!("no gap around {}#{index} at d = {d}", sector.short())));
    }
    Ok(AdiabaticityReport {
        channel,
        omega_ab: gap,
        v_bound: cfg.sigma * gap * gap / cfg.v0,
        v_bound_in_v0_units: 1.0,
        d_gap: d,
        sector,
        index,
    })
}

#[derive(Debug)]
pub struct ScanPoint {
    pub v: f64,
    pub result: std::result::Result<PropagationResult, Error>,
    pub revival: bool,
}

/// Propagate `psi0` at each speed in `v_values` (natural units), in
/// parallel. Local fidelity maxima above 0.8 at speeds beyond
/// `0.1 v_bound` are flagged as revivals.
pub fn speed_scan(
    psi0: &Wavefunction2D,
    template: &TrajectorySpec,
    v_values: &[f64],
    v_bound: f64,
    channel: ChannelId,
    cfg: &WellConfig,
    opts: &PropagationOptions,
) -> Result<Vec<ScanPoint>> {
    if v_values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("scan speeds must be positive".into()));
    }
    if v_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("scan speeds must be strictly increasing".into()));
    }
    let mut points: Vec<ScanPoint> = v_values
        .par_iter()
        .map(|&v| {
            let result = template.with_speed(v).and_then(|traj| propagate(psi0, &traj, channel, cfg, opts));
            ScanPoint { v, result, revival: false }
        })
        .collect();
    let f: Vec<Option<f64>> = points.iter().map(|p| p.result.as_ref().ok().map(|r| r.fidelity)).collect();
    for k in 0..points.len() {
        let Some(fk) = f[k] else { continue };
        let left = k.checked_sub(1).and_then(|j| f[j]);
        let right = f.get(k + 1).copied().flatten();
        let peak = left.is_none_or(|l| fk > l) && right.is_none_or(|r| fk > r) && (left.is_some() || right.is_some());
        points[k].revival = peak && fk > 0.8 && points[k].v > 0.1 * v_bound;
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy)]
pub struct PhaseOptions {
    /// Gauss–Legendre nodes per ramp.
    pub nodes: usize,
    pub davidson: DavidsonOptions,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions { nodes: 48, davidson: DavidsonOptions::default() }
    }
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for k in 0..m {
        // Newton from the Chebyshev-like estimate of the k-th root.
        let mut x = -(std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 0 { 1.0 } else if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * p - pm1) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Energies of in-sector state `index` along `ds`, warm-starting each
/// solve from the previous one.
fn branch_energies(
    grid: &Grid1D,
    channel: ChannelId,
    cfg: &WellConfig,
    sector: Sector,
    index: usize,
    ds: &[f64],
    opts: &DavidsonOptions,
) -> Result<Vec<f64>> {
    let mut guesses: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::with_capacity(ds.len());
    for &d in ds {
        let h = build_pair_hamiltonian(grid, d, channel, cfg)?;
        let basis = ParityBasis::new(&h.single)?;
        let states = solve_sector(&h, &basis, sector.exchange, sector.parity, index + 1, &guesses, opts)?;
        out.push(states[index].energy);
        guesses = states.into_iter().map(|s| s.vector).collect();
    }
    Ok(out)
}

/// Normalized eigenstate of in-sector index `branch.1` at separation `d`.
pub fn branch_state(
    grid: &Grid1D,
    channel: ChannelId,
    cfg: &WellConfig,
    branch: (Sector, usize),
    d: f64,
) -> Result<Wavefunction2D> {
    let h = build_pair_hamiltonian(grid, d, channel, cfg)?;
    let basis = ParityBasis::new(&h.single)?;
    let mut counts = [0; 4];
    counts[branch.0.index()] = branch.1 + 1;
    let sol = solve_pair_sectors(&h, &basis, grid, d, counts, None, &DavidsonOptions::default())?;
    Ok(sol.wavefunction(branch.0, branch.1))
}

/// Energy of the gate-path branch of `channel` at the closest approach of
/// `traj`; the rate at which each extra unit of hold time adds phase.
pub fn gate_path_energy(
    grid: &Grid1D,
    traj: &TrajectorySpec,
    channel: ChannelId,
    cfg: &WellConfig,
    opts: &PhaseOptions,
) -> Result<f64> {
    let branch = gate_path_branch(grid, channel, cfg, traj.d_max)?;
    Ok(branch_energies(grid, channel, cfg, branch.0, branch.1, &[traj.d_min], &opts.davidson)?[0])
}

/// `∫ E(d(t)) dt` over one ramp of `duration` from `d_from` to `d_to`.
#[allow(clippy::too_many_arguments)]
fn ramp_integral(
    grid: &Grid1D,
    channel: ChannelId,
    cfg: &WellConfig,
    branch: (Sector, usize),
    traj: &TrajectorySpec,
    d_from: f64,
    d_to: f64,
    duration: f64,
    opts: &PhaseOptions,
) -> Result<f64> {
    if duration == 0.0 {
        return Ok(0.0);
    }
    let (nodes, weights) = gauss_legendre(opts.nodes);
    let ds: Vec<f64> = nodes
        .iter()
        .map(|&xi| {
            let s = 0.5 * (1.0 + xi);
            d_from + (d_to - d_from) * traj.profile.shape(s)
        })
        .collect();
    let e = branch_energies(grid, channel, cfg, branch.0, branch.1, &ds, &opts.davidson)?;
    Ok(0.5 * duration * weights.iter().zip(&e).map(|(w, e)| w * e).sum::<f64>())
}

/// `∫ E(d(t)) dt` along `traj` for the gate-path branch of `channel`.
pub fn channel_phase(
    grid: &Grid1D,
    traj: &TrajectorySpec,
    channel: ChannelId,
    cfg: &WellConfig,
    opts: &PhaseOptions,
) -> Result<f64> {
    traj.validate()?;
    if traj.total_duration() == 0.0 {
        return Ok(0.0);
    }
    check_extent(grid, traj.d_max, cfg)?;
    let branch = gate_path_branch(grid, channel, cfg, traj.d_max)?;
    let t_in = traj.ramp_in_time();
    let t_out = traj.ramp_out_time();
    let ramp_in = ramp_integral(grid, channel, cfg, branch, traj, traj.d_max, traj.d_min, t_in, opts)?;
    // The outbound ramp retraces the inbound one when the timing matches.
    let ramp_out = if t_out == t_in {
        ramp_in
    } else {
        ramp_integral(grid, channel, cfg, branch, traj, traj.d_max, traj.d_min, t_out, opts)?
    };
    let hold = if traj.hold_time > 0.0 {
        let e = branch_energies(grid, channel, cfg, branch.0, branch.1, &[traj.d_min], &opts.davidson)?;
        e[0] * traj.hold_time
    } else {
        0.0
    };
    Ok(ramp_in + hold + ramp_out)
}

/// Phases `φ = ∫ E dt` of the four qubit channels along `traj`.
///
/// Channels with the same spatial symmetry and coupling share one
/// computation.
pub fn phase_accumulation(
    grid: &Grid1D,
    traj: &TrajectorySpec,
    cfg: &WellConfig,
    opts: &PhaseOptions,
) -> Result<GatePhases> {
    let mut cache: HashMap<(bool, u64), f64> = HashMap::new();
    let mut get = |channel: ChannelId| -> Result<f64> {
        let key = (channel.spatial_exchange().sign() > 0.0, cfg.coupling(channel).to_bits());
        if let Some(v) = cache.get(&key) {
            return Ok(*v);
        }
        let v = channel_phase(grid, traj, channel, cfg, opts)?;
        cache.insert(key, v);
        Ok(v)
    };
    Ok(GatePhases {
        phi_00: get(ChannelId::C00)?,
        phi_11: get(ChannelId::C11)?,
        phi_plus: get(ChannelId::CPsiPlus)?,
        phi_minus: get(ChannelId::CPsiMinus)?,
    })
}
