//! Single- and two-particle spectra, localized orbitals and adiabatic
//! branch tracking across a sweep of well separations.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{dot, solve_sector, DavidsonOptions, ParityBasis, SectorState};
use crate::error::{Error, Result};
use crate::grid::{overlap, Exchange, Grid1D, Parity, SymmetryLabel, Wavefunction1D, Wavefunction2D};
use crate::potential::{
    build_pair_hamiltonian, build_single_hamiltonian, check_extent, ChannelId, PairHamiltonian, WellConfig,
};

/// One (exchange, parity) block of the pair Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sector {
    pub exchange: Exchange,
    pub parity: Parity,
}

impl Sector {
    pub const SE: Sector = Sector { exchange: Exchange::Symmetric, parity: Parity::Even };
    pub const SO: Sector = Sector { exchange: Exchange::Symmetric, parity: Parity::Odd };
    pub const AE: Sector = Sector { exchange: Exchange::Antisymmetric, parity: Parity::Even };
    pub const AO: Sector = Sector { exchange: Exchange::Antisymmetric, parity: Parity::Odd };
    pub const ALL: [Sector; 4] = [Sector::SE, Sector::SO, Sector::AE, Sector::AO];

    pub fn index(self) -> usize {
        Sector::ALL.iter().position(|&s| s == self).unwrap()
    }

    pub fn label(self) -> SymmetryLabel {
        SymmetryLabel::new(self.exchange, self.parity)
    }

    pub fn short(self) -> &'static str {
        match (self.exchange, self.parity) {
            (Exchange::Symmetric, Parity::Even) => "Se",
            (Exchange::Symmetric, Parity::Odd) => "So",
            (Exchange::Antisymmetric, Parity::Even) => "Ae",
            (Exchange::Antisymmetric, Parity::Odd) => "Ao",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair<W> {
    /// Natural units.
    pub energy: f64,
    pub state: W,
    pub label: SymmetryLabel,
    /// Energy order within the symmetry sector.
    pub index: usize,
    /// `‖Hψ - Eψ‖ / ‖ψ‖`.
    pub residual: f64,
}

fn residual_1d(h: &crate::potential::SingleHamiltonian, v: &[f64], e: f64) -> f64 {
    let mut hv = vec![0.0; v.len()];
    h.apply(v, &mut hv);
    let r: f64 = hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum();
    (r / dot(v, v)).sqrt()
}

/// The `k` lowest single-particle eigenpairs, parity-resolved exactly.
pub fn solve_single(grid: &Grid1D, d: f64, cfg: &WellConfig, k: usize) -> Result<Vec<EigenPair<Wavefunction1D>>> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("need k >= 3 single-particle states, got {k}")));
    }
    grid.check_symmetric()?;
    let h = build_single_hamiltonian(grid, d, cfg)?;
    let basis = ParityBasis::new(&h)?;
    let scale = 1.0 / grid.dx().sqrt();
    let mut out = Vec::with_capacity(k);
    for (e, p, idx) in basis.lowest(k) {
        let v = basis.eigenvector(p, idx);
        let residual = residual_1d(&h, &v, e);
        if residual > 1e-8 {
            return Err(Error::NoConvergence { iterations: 0, residual });
        }
        let state = Wavefunction1D::from_real(*grid, &v.iter().map(|x| x * scale).collect::<Vec<_>>());
        let label = SymmetryLabel::classify(None, state.parity_expectation());
        out.push(EigenPair { energy: e, state, label, index: idx, residual });
    }
    Ok(out)
}

/// Converged states of one sector; `states[count..]` are guard vectors.
#[derive(Debug, Clone)]
pub struct SectorSolution {
    pub sector: Sector,
    pub count: usize,
    pub states: Vec<SectorState>,
}

/// Eigenstates of one pair Hamiltonian, sector by sector.
#[derive(Debug, Clone)]
pub struct PairSolution {
    pub grid: Grid1D,
    pub d: f64,
    pub channel: ChannelId,
    pub sectors: Vec<SectorSolution>,
}

impl PairSolution {
    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for s in &self.sectors {
            c[s.sector.index()] = s.count;
        }
        c
    }

    pub fn sector(&self, sector: Sector) -> &SectorSolution {
        &self.sectors[sector.index()]
    }

    pub fn energy(&self, sector: Sector, index: usize) -> f64 {
        self.sector(sector).states[index].energy
    }

    pub fn vector(&self, sector: Sector, index: usize) -> &[f64] {
        &self.sector(sector).states[index].vector
    }

    /// Normalized wavefunction of a solved state.
    pub fn wavefunction(&self, sector: Sector, index: usize) -> Wavefunction2D {
        let scale = 1.0 / self.grid.dx();
        let v: Vec<f64> = self.vector(sector, index).iter().map(|x| x * scale).collect();
        Wavefunction2D::from_real(self.grid, &v)
    }

    /// The `k` lowest converged states as `(energy, sector, index)`.
    pub fn lowest(&self, k: usize) -> Vec<(f64, Sector, usize)> {
        let mut all: Vec<(f64, Sector, usize)> = self
            .sectors
            .iter()
            .flat_map(|s| (0..s.count).map(move |i| (s.states[i].energy, s.sector, i)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        all.truncate(k);
        all
    }

    pub fn eigenpairs(&self, k: usize) -> Vec<EigenPair<Wavefunction2D>> {
        self.lowest(k)
            .into_iter()
            .map(|(energy, sector, index)| {
                let state = self.wavefunction(sector, index);
                let label = state.label();
                let residual = self.sector(sector).states[index].residual;
                EigenPair { energy, state, label, index, residual }
            })
            .collect()
    }
}

fn sector_guesses(prev: Option<&PairSolution>, sector: Sector) -> Vec<Vec<f64>> {
    prev.map(|p| p.sector(sector).states.iter().map(|s| s.vector.clone()).collect())
        .unwrap_or_default()
}

/// Solve every sector for a fixed number of states.
pub fn solve_pair_sectors(
    h: &PairHamiltonian,
    basis: &ParityBasis,
    grid: &Grid1D,
    d: f64,
    counts: [usize; 4],
    guesses: Option<&PairSolution>,
    opts: &DavidsonOptions,
) -> Result<PairSolution> {
    let mut sectors = Vec::with_capacity(4);
    for sector in Sector::ALL {
        let count = counts[sector.index()];
        let g = sector_guesses(guesses, sector);
        let states = solve_sector(h, basis, sector.exchange, sector.parity, count, &g, opts)?;
        sectors.push(SectorSolution { sector, count, states });
    }
    Ok(PairSolution { grid: *grid, d, channel: h.channel, sectors })
}

/// Solve for the `k` lowest pair states, growing per-sector counts until
/// no sector can hide a missing state below the `k`-th energy.
pub fn solve_lowest_pair(
    grid: &Grid1D,
    d: f64,
    channel: ChannelId,
    cfg: &WellConfig,
    k: usize,
    opts: &DavidsonOptions,
) -> Result<PairSolution> {
    grid.check_symmetric()?;
    let h = build_pair_hamiltonian(grid, d, channel, cfg)?;
    let basis = ParityBasis::new(&h.single)?;
    let mut guesses: Vec<(f64, Sector)> = Sector::ALL
        .iter()
        .flat_map(|&s| basis.product_guesses(s.exchange, s.parity, k).into_iter().map(move |(e, _)| (e, s)))
        .collect();
    guesses.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut counts = [1usize; 4];
    let mut tally = [0usize; 4];
    for (_, s) in guesses.iter().take(k) {
        tally[s.index()] += 1;
    }
    for i in 0..4 {
        counts[i] = counts[i].max(tally[i]);
    }
    let mut sol = solve_pair_sectors(&h, &basis, grid, d, counts, None, opts)?;
    for _ in 0..4 * k {
        let lowest = sol.lowest(k);
        let e_k = lowest.last().map(|x| x.0).unwrap_or(f64::INFINITY);
        let mut grew = false;
        for sector in Sector::ALL {
            let s = sol.sector(sector);
            let top = s.states[s.count - 1].energy;
            if lowest.len() >= k && top < e_k {
                let count = s.count + 1;
                let g: Vec<Vec<f64>> = s.states.iter().map(|x| x.vector.clone()).collect();
                let states = solve_sector(&h, &basis, sector.exchange, sector.parity, count, &g, opts)?;
                sol.sectors[sector.index()] = SectorSolution { sector, count, states };
                grew = true;
            }
        }
        if !grew {
            // The extra state that confirmed each sector stays on as a guard.
            let mut keep = [0usize; 4];
            for (_, s, _) in sol.lowest(k) {
                keep[s.index()] += 1;
            }
            for s in sol.sectors.iter_mut() {
                s.count = keep[s.sector.index()];
            }
            return Ok(sol);
        }
    }
    Err(Error::UnresolvedBranches(format!("could not isolate the {k} lowest states at d = {d}")))
}

/// The `k` lowest two-particle eigenpairs with exchange and parity labels.
pub fn solve_pair(
    grid: &Grid1D,
    d: f64,
    channel: ChannelId,
    cfg: &WellConfig,
    k: usize,
) -> Result<Vec<EigenPair<Wavefunction2D>>> {
    if k < 6 {
        return Err(Error::InvalidParameter(format!("need k >= 6 pair states, got {k}")));
    }
    let sol = solve_lowest_pair(grid, d, channel, cfg, k, &DavidsonOptions::default())?;
    let pairs = sol.eigenpairs(k);
    for p in &pairs {
        if p.label.exchange.is_none() || p.label.parity.is_none() {
            return Err(Error::Unclassifiable(format!("state at E = {} has no definite label", p.energy)));
        }
    }
    Ok(pairs)
}

/// Orbitals localized in the left and right wells.
#[derive(Debug, Clone)]
pub struct LocalizedBasis {
    pub psi_l: Wavefunction1D,
    pub psi_r: Wavefunction1D,
    pub d: f64,
}

/// Smallest separation at which the left/right construction is accepted.
pub const LOCALIZATION_MIN_D: f64 = 8.0;

pub fn localized_basis(grid: &Grid1D, d: f64, cfg: &WellConfig) -> Result<LocalizedBasis> {
    if d < LOCALIZATION_MIN_D * cfg.sigma {
        return Err(Error::InsufficientSeparation(format!(
            "d = {d} is below {LOCALIZATION_MIN_D} sigma"
        )));
    }
    let states = solve_single(grid, d, cfg, 3)?;
    let a = states.iter().find(|s| s.label.parity == Some(Parity::Even) && s.index == 0);
    let b = states.iter().find(|s| s.label.parity == Some(Parity::Odd) && s.index == 0);
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::UnresolvedBranches("lowest even/odd doublet not found".into())),
    };
    let i_left = grid_index_nearest(grid, -0.5 * d);
    let sa = a.state.amplitudes[i_left].re.signum();
    let sb = -b.state.amplitudes[i_left].re.signum();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let combine = |sign: f64| {
        let amps: Vec<Complex64> = a
            .state
            .amplitudes
            .iter()
            .zip(&b.state.amplitudes)
            .map(|(x, y)| (x * sa + sign * y * sb) * h)
            .collect();
        Wavefunction1D { grid: *grid, amplitudes: amps }
    };
    // With B negative on the left, A - B piles up on the left.
    let psi_l = combine(-1.0);
    let psi_r = combine(1.0);
    let left = psi_l.left_mass();
    if left < 0.99 || 1.0 - psi_r.left_mass() < 0.99 {
        return Err(Error::InsufficientSeparation(format!(
            "left orbital holds only {:.4} of its weight in the left well",
            left
        )));
    }
    Ok(LocalizedBasis { psi_l, psi_r, d })
}

fn grid_index_nearest(grid: &Grid1D, x: f64) -> usize {
    let i = ((x + grid.x_max()) / grid.dx()).round();
    (i.max(0.0) as usize).min(grid.n_points() - 1)
}

/// `(ψ_L ψ_R ± ψ_R ψ_L)/√2`.
pub fn opposite_well_state(basis: &LocalizedBasis, exchange: Exchange) -> Result<Wavefunction2D> {
    Wavefunction2D::symmetrized(&basis.psi_l, &basis.psi_r, exchange)
}

/// Identity of the six lowest branches in terms of their content at large
/// separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchRole {
    /// `(LR + RL)/√2`.
    OppositeSymmetric,
    /// `(LR - RL)/√2`.
    OppositeAntisymmetric,
    /// `(LL + RR)/√2`.
    SameWellSymmetric,
    /// `(LL - RR)/√2`.
    SameWellOdd,
    /// Exchange-symmetric state with one atom vibrationally excited.
    ExcitedSymmetric,
    /// Exchange-antisymmetric state with one atom vibrationally excited.
    ExcitedAntisymmetric,
}

impl BranchRole {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchRole::OppositeSymmetric => "opposite_symmetric",
            BranchRole::OppositeAntisymmetric => "opposite_antisymmetric",
            BranchRole::SameWellSymmetric => "same_well_symmetric",
            BranchRole::SameWellOdd => "same_well_odd",
            BranchRole::ExcitedSymmetric => "excited_symmetric",
            BranchRole::ExcitedAntisymmetric => "excited_antisymmetric",
        }
    }
}

/// Energy of the same-well symmetric state minus that of the
/// opposite-well antisymmetric state at separation `d`.
pub fn onsite_energy(grid: &Grid1D, channel: ChannelId, cfg: &WellConfig, d: f64) -> Result<f64> {
    if d < LOCALIZATION_MIN_D * cfg.sigma {
        return Err(Error::InsufficientSeparation(format!(
            "on-site energy needs d >= {LOCALIZATION_MIN_D} sigma, got {d}"
        )));
    }
    let local = localized_basis(grid, d, cfg)?;
    let target = same_well_state(&local, Parity::Even)?;
    let h = build_pair_hamiltonian(grid, d, channel, cfg)?;
    let basis = ParityBasis::new(&h.single)?;
    // Three symmetric states cover both orderings of the same-well and
    // opposite-well pairs plus the first vibrationally excited one.
    let sol = solve_pair_sectors(&h, &basis, grid, d, [3, 0, 0, 1], None, &DavidsonOptions::default())?;
    let w: Vec<f64> = (0..3)
        .map(|i| overlap(&sol.wavefunction(Sector::SE, i), &target).map(|c| c.norm_sqr()).unwrap_or(0.0))
        .collect();
    // Without interaction the same-well and opposite-well pairs are
    // degenerate and the solver may return any mixture of them.
    let tol = 1e-6 * cfg.omega0();
    let (best, weight) = (0..3)
        .map(|i| {
            let e = sol.energy(Sector::SE, i);
            (i, (0..3).filter(|&j| (sol.energy(Sector::SE, j) - e).abs() < tol).map(|j| w[j]).sum::<f64>())
        })
        .fold((0, 0.0), |a, b| if b.1 > a.1 + 1e-12 { b } else { a });
    if weight < 0.9 {
        return Err(Error::UnresolvedBranches(format!(
            "no symmetric state with dominant same-well weight (best {weight:.3})"
        )));
    }
    Ok(sol.energy(Sector::SE, best) - sol.energy(Sector::AO, 0))
}

/// Sector and in-sector index of the branch that connects to the
/// opposite-well state `(LR ± RL)/√2` of `channel` at separation `d`.
///
/// Crossings inside a sector are avoided, so an adiabatic evolution keeps
/// this index along the whole trajectory.
pub fn gate_path_branch(grid: &Grid1D, channel: ChannelId, cfg: &WellConfig, d: f64) -> Result<(Sector, usize)> {
    if channel.spatial_exchange() == Exchange::Antisymmetric {
        return Ok((Sector::AO, 0));
    }
    let local = localized_basis(grid, d, cfg)?;
    let target = opposite_well_state(&local, Exchange::Symmetric)?;
    let h = build_pair_hamiltonian(grid, d, channel, cfg)?;
    let basis = ParityBasis::new(&h.single)?;
    let sol = solve_pair_sectors(&h, &basis, grid, d, [3, 0, 0, 0], None, &DavidsonOptions::default())?;
    let tol = 1e-6 * cfg.omega0();
    let w: Vec<f64> = (0..3)
        .map(|i| overlap(&sol.wavefunction(Sector::SE, i), &target).map(|c| c.norm_sqr()).unwrap_or(0.0))
        .collect();
    // Degenerate partners share the weight; the lowest of them is taken.
    let (best, weight) = (0..3)
        .map(|i| {
            let e = sol.energy(Sector::SE, i);
            (i, (0..3).filter(|&j| (sol.energy(Sector::SE, j) - e).abs() < tol).map(|j| w[j]).sum::<f64>())
        })
        .fold((0, 0.0), |a, b| if b.1 > a.1 + 1e-12 { b } else { a });
    if weight < 0.9 {
        return Err(Error::UnresolvedBranches(format!(
            "no symmetric state at d = {d} is dominated by the opposite-well pair (best {weight:.3})"
        )));
    }
    Ok((Sector::SE, best))
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub k: usize,
    /// Consecutive separations solved with warm starts inside one task.
    pub chunk: usize,
    pub overlap_threshold: f64,
    /// States of one sector closer than this (in ħω₀) are tracked as a
    /// cluster rather than individually.
    pub cluster_tol_hw0: f64,
    /// Bisection levels allowed when a step falls below the threshold.
    pub refine_depth: usize,
    pub davidson: DavidsonOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            k: 6,
            chunk: 8,
            overlap_threshold: 0.9,
            cluster_tol_hw0: 1e-3,
            refine_depth: 6,
            davidson: DavidsonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumBranch {
    pub channel: ChannelId,
    pub n: usize,
    pub sector: Sector,
    pub label: SymmetryLabel,
    /// `(d, energy)` in natural units, `d` strictly increasing.
    pub samples: Vec<(f64, f64)>,
    /// Smallest continuation overlap seen along the branch.
    pub min_overlap: f64,
    pub role: Option<BranchRole>,
}

impl SpectrumBranch {
    pub fn energy_at(&self, d: f64) -> Option<f64> {
        self.samples.iter().find(|s| (s.0 - d).abs() < 1e-12).map(|s| s.1)
    }

    pub fn name(&self) -> String {
        format!("{}#{}", self.sector.short(), self.n)
    }
}

/// Interval in which a symmetric and an antisymmetric branch swap order.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Crossing {
    pub d_lo: f64,
    pub d_hi: f64,
    pub symmetric: usize,
    pub antisymmetric: usize,
}

#[derive(Debug)]
pub struct Sweep {
    pub channel: ChannelId,
    pub branches: Vec<SpectrumBranch>,
    pub crossings: Vec<Crossing>,
    /// Separations at which solving or tracking failed.
    pub failures: Vec<(f64, Error)>,
}

impl Sweep {
    pub fn branch(&self, role: BranchRole) -> Option<&SpectrumBranch> {
        self.branches.iter().find(|b| b.role == Some(role))
    }

    pub fn into_result(mut self) -> Result<Vec<SpectrumBranch>> {
        if self.failures.is_empty() {
            Ok(self.branches)
        } else {
            Err(self.failures.remove(0).1)
        }
    }
}

/// Continuation overlap of each counted state of `prev` onto the states of
/// `next`, summed over near-degenerate clusters.
fn continuation_overlaps(prev: &PairSolution, next: &PairSolution, cluster_tol: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for sector in Sector::ALL {
        let p = prev.sector(sector);
        let q = next.sector(sector);
        for i in 0..p.count {
            let ei = q.states[i].energy;
            let s: f64 = q
                .states
                .iter()
                .filter(|st| (st.energy - ei).abs() < cluster_tol)
                .map(|st| dot(&p.states[i].vector, &st.vector).powi(2))
                .sum();
            out.push(s.sqrt());
        }
    }
    out
}

/// Continuation overlaps from `prev` to `next`, bisecting the step while
/// any branch stays below the threshold. Each entry is the smallest overlap
/// met along the refined path.
#[allow(clippy::too_many_arguments)]
fn bridged_overlaps(
    grid: &Grid1D,
    channel: ChannelId,
    cfg: &WellConfig,
    opts: &SweepOptions,
    prev: &PairSolution,
    next: &PairSolution,
    depth: usize,
) -> Vec<f64> {
    let cluster_tol = opts.cluster_tol_hw0 * cfg.omega0();
    let direct = continuation_overlaps(prev, next, cluster_tol);
    let worst = direct.iter().cloned().fold(1.0f64, f64::min);
    if worst >= opts.overlap_threshold || depth == 0 {
        return direct;
    }
    let mid = 0.5 * (prev.d + next.d);
    let solved = build_pair_hamiltonian(grid, mid, channel, cfg).and_then(|h| {
        let basis = ParityBasis::new(&h.single)?;
        solve_pair_sectors(&h, &basis, grid, mid, prev.counts(), Some(prev), &opts.davidson)
    });
    let Ok(m) = solved else {
        return direct;
    };
    log::debug!("refining tracking step at d = {mid} (overlap {worst:.3})");
    let a = bridged_overlaps(grid, channel, cfg, opts, prev, &m, depth - 1);
    let b = bridged_overlaps(grid, channel, cfg, opts, &m, next, depth - 1);
    a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect()
}

struct ChunkResult {
    samples: Vec<(f64, Option<Vec<f64>>)>,
    overlaps: Vec<(f64, Vec<f64>)>,
    failures: Vec<(f64, Error)>,
    first: Option<PairSolution>,
    last: Option<PairSolution>,
}

fn counted_energies(sol: &PairSolution) -> Vec<f64> {
    sol.sectors.iter().flat_map(|s| s.states[..s.count].iter().map(|x| x.energy)).collect()
}

#[allow(clippy::too_many_arguments)]
fn run_chunk(
    grid: &Grid1D,
    ds: &[f64],
    channel: ChannelId,
    cfg: &WellConfig,
    counts: [usize; 4],
    seed: Option<&PairSolution>,
    opts: &SweepOptions,
) -> ChunkResult {
    let mut res = ChunkResult { samples: Vec::new(), overlaps: Vec::new(), failures: Vec::new(), first: None, last: None };
    let mut prev: Option<PairSolution> = None;
    for (idx, &d) in ds.iter().enumerate() {
        let solved = if idx == 0 && seed.is_some_and(|s| s.d == d) {
            Ok(seed.unwrap().clone())
        } else {
            build_pair_hamiltonian(grid, d, channel, cfg).and_then(|h| {
                let basis = ParityBasis::new(&h.single)?;
                solve_pair_sectors(&h, &basis, grid, d, counts, prev.as_ref(), &opts.davidson)
            })
        };
        match solved {
            Ok(sol) => {
                if let Some(p) = &prev {
                    res.overlaps.push((d, bridged_overlaps(grid, channel, cfg, opts, p, &sol, opts.refine_depth)));
                }
                res.samples.push((d, Some(counted_energies(&sol))));
                if res.first.is_none() && idx == 0 {
                    res.first = Some(sol.clone());
                }
                if idx + 1 == ds.len() {
                    res.last = Some(sol.clone());
                }
                prev = Some(sol);
            }
            Err(e) => {
                res.samples.push((d, None));
                res.failures.push((d, e));
                prev = None;
            }
        }
    }
    res
}

/// Track the `opts.k` lowest branches (as found at the first separation)
/// over `d_values`.
pub fn run_sweep(
    grid: &Grid1D,
    d_values: &[f64],
    channel: ChannelId,
    cfg: &WellConfig,
    opts: &SweepOptions,
) -> Result<Sweep> {
    if d_values.is_empty() {
        return Err(Error::InvalidParameter("empty separation list".into()));
    }
    if d_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("separations must be strictly increasing".into()));
    }
    if opts.k == 0 || opts.chunk == 0 {
        return Err(Error::InvalidParameter("k and chunk must be positive".into()));
    }
    let d_top = d_values.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    check_extent(grid, d_top, cfg)?;

    let first = solve_lowest_pair(grid, d_values[0], channel, cfg, opts.k, &opts.davidson)?;
    let counts = first.counts();
    let chunks: Vec<&[f64]> = d_values.chunks(opts.chunk).collect();
    let results: Vec<ChunkResult> = chunks
        .par_iter()
        .enumerate()
        .map(|(ci, ds)| run_chunk(grid, ds, channel, cfg, counts, (ci == 0).then_some(&first), opts))
        .collect();

    let mut failures = Vec::new();
    let mut overlaps: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut prev_last: Option<PairSolution> = None;
    let mut last_sol: Option<PairSolution> = None;
    for r in results {
        if let (Some(p), Some(f)) = (&prev_last, &r.first) {
            overlaps.push((f.d, bridged_overlaps(grid, channel, cfg, opts, p, f, opts.refine_depth)));
        }
        overlaps.extend(r.overlaps);
        failures.extend(r.failures);
        rows.extend(r.samples.into_iter().filter_map(|(d, e)| e.map(|e| (d, e))));
        if r.last.is_some() {
            last_sol = r.last.clone();
        }
        prev_last = r.last;
    }

    let mut branches = Vec::new();
    let mut flat = 0;
    for sector in Sector::ALL {
        for n in 0..counts[sector.index()] {
            let samples = rows.iter().map(|(d, e)| (*d, e[flat])).collect();
            let min_overlap = overlaps.iter().map(|(_, o)| o[flat]).fold(1.0f64, f64::min);
            branches.push(SpectrumBranch {
                channel,
                n,
                sector,
                label: sector.label(),
                samples,
                min_overlap,
                role: None,
            });
            flat += 1;
        }
    }
    for (d, o) in &overlaps {
        let worst = o.iter().cloned().fold(1.0f64, f64::min);
        if worst < opts.overlap_threshold {
            failures.push((*d, Error::TrackingAmbiguity { d: *d, overlap: worst }));
        }
    }
    failures.sort_by(|a, b| a.0.total_cmp(&b.0));

    assign_roles(&mut branches, last_sol.as_ref(), cfg, cfg.coupling(channel));
    let crossings = find_crossings(&branches, 1e-7 * cfg.omega0());
    Ok(Sweep { channel, branches, crossings, failures })
}

/// Strict form of [`run_sweep`]: any per-separation failure is an error.
pub fn sweep_spectrum(
    grid: &Grid1D,
    d_values: &[f64],
    channel: ChannelId,
    cfg: &WellConfig,
    k: usize,
) -> Result<Vec<SpectrumBranch>> {
    run_sweep(grid, d_values, channel, cfg, &SweepOptions { k, ..SweepOptions::default() })?.into_result()
}

/// `(LL ± RR)/√2`.
pub fn same_well_state(basis: &LocalizedBasis, parity: Parity) -> Result<Wavefunction2D> {
    let ll = Wavefunction2D::product(&basis.psi_l, &basis.psi_l)?;
    let rr = Wavefunction2D::product(&basis.psi_r, &basis.psi_r)?;
    let s = parity.sign();
    let amplitudes = ll.amplitudes.iter().zip(&rr.amplitudes).map(|(x, y)| x + s * y).collect();
    let mut psi = Wavefunction2D { grid: ll.grid, amplitudes };
    psi.normalize();
    Ok(psi)
}

/// Localized reference state for each of the four two-orbital roles.
fn role_targets(basis: &LocalizedBasis) -> Result<Vec<(BranchRole, Sector, Wavefunction2D)>> {
    Ok(vec![
        (BranchRole::OppositeSymmetric, Sector::SE, opposite_well_state(basis, Exchange::Symmetric)?),
        (BranchRole::OppositeAntisymmetric, Sector::AO, opposite_well_state(basis, Exchange::Antisymmetric)?),
        (BranchRole::SameWellSymmetric, Sector::SE, same_well_state(basis, Parity::Even)?),
        (BranchRole::SameWellOdd, Sector::SO, same_well_state(basis, Parity::Odd)?),
    ])
}

/// Name branches by their overlap with localized states at the far end of
/// the sweep. When the far end is too close for localized orbitals, the
/// repulsive or attractive ordering is assumed instead.
fn assign_roles(branches: &mut [SpectrumBranch], far: Option<&PairSolution>, cfg: &WellConfig, g: f64) {
    let located = far.and_then(|sol| {
        let basis = localized_basis(&sol.grid, sol.d, cfg).ok()?;
        Some((sol, role_targets(&basis).ok()?))
    });
    match located {
        Some((sol, targets)) => {
            for (role, sector, target) in targets {
                let mut best: Option<(usize, f64)> = None;
                for (bi, b) in branches.iter().enumerate() {
                    if b.sector != sector || b.role.is_some() {
                        continue;
                    }
                    let psi = sol.wavefunction(sector, b.n);
                    let w = overlap(&psi, &target).map(|c| c.norm_sqr()).unwrap_or(0.0);
                    if w > 0.5 && best.is_none_or(|(_, bw)| w > bw) {
                        best = Some((bi, w));
                    }
                }
                if let Some((bi, _)) = best {
                    branches[bi].role = Some(role);
                }
            }
        }
        None => {
            let mut set = |s: Sector, n: usize, role: BranchRole| {
                if let Some(b) = branches.iter_mut().find(|b| b.sector == s && b.n == n) {
                    b.role = Some(role);
                }
            };
            let (first, second) = if g < 0.0 {
                (BranchRole::SameWellSymmetric, BranchRole::OppositeSymmetric)
            } else {
                (BranchRole::OppositeSymmetric, BranchRole::SameWellSymmetric)
            };
            set(Sector::SE, 0, first);
            set(Sector::SE, 1, second);
            set(Sector::SO, 0, BranchRole::SameWellOdd);
            set(Sector::AO, 0, BranchRole::OppositeAntisymmetric);
        }
    }
    let lowest_free = |branches: &[SpectrumBranch], sectors: &[Sector]| {
        branches
            .iter()
            .enumerate()
            .filter(|(_, b)| b.role.is_none() && sectors.contains(&b.sector))
            .min_by(|a, b| a.1.samples.last().map(|s| s.1).unwrap_or(f64::INFINITY).total_cmp(
                &b.1.samples.last().map(|s| s.1).unwrap_or(f64::INFINITY),
            ))
            .map(|(i, _)| i)
    };
    if let Some(i) = lowest_free(branches, &[Sector::SE]) {
        branches[i].role = Some(BranchRole::ExcitedSymmetric);
    }
    if let Some(i) = lowest_free(branches, &[Sector::AE, Sector::AO]) {
        branches[i].role = Some(BranchRole::ExcitedAntisymmetric);
    }
}

/// Sign changes of `E_sym - E_anti` between consecutive common samples.
pub fn find_crossings(branches: &[SpectrumBranch], tol: f64) -> Vec<Crossing> {
    let mut out = Vec::new();
    for (i, s) in branches.iter().enumerate() {
        if s.sector.exchange != Exchange::Symmetric {
            continue;
        }
        for (j, a) in branches.iter().enumerate() {
            if a.sector.exchange != Exchange::Antisymmetric {
                continue;
            }
            let diffs: Vec<(f64, f64)> = s
                .samples
                .iter()
                .zip(&a.samples)
                .filter(|(x, y)| x.0 == y.0)
                .map(|(x, y)| (x.0, x.1 - y.1))
                .filter(|(_, v)| v.abs() > tol)
                .collect();
            for w in diffs.windows(2) {
                if w[0].1.signum() != w[1].1.signum() {
                    out.push(Crossing { d_lo: w[0].0, d_hi: w[1].0, symmetric: i, antisymmetric: j });
                }
            }
        }
    }
    out
}

/// Branch table with columns `d, channel, n, energy_hw0, exchange, parity`.
pub fn spectrum_csv(branches: &[SpectrumBranch], cfg: &WellConfig) -> String {
    let mut out = String::from("d,channel,n,energy_hw0,exchange,parity\n");
    let mut rows: Vec<(f64, usize, &SpectrumBranch, f64)> = Vec::new();
    for (bi, b) in branches.iter().enumerate() {
        for &(d, e) in &b.samples {
            rows.push((d, bi, b, e));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (d, _, b, e) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            d,
            b.channel,
            b.n,
            cfg.to_hw0(e),
            b.label.exchange_str(),
            b.label.parity_str()
        );
    }
    out
}

/// `d_min, d_min + step, ...` up to and including `d_max` (within round-off).
pub fn separation_grid(d_min: f64, d_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(d_max >= d_min) {
        return Err(Error::InvalidParameter(format!("bad separation range [{d_min}, {d_max}] step {step}")));
    }
    let n = ((d_max - d_min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| d_min + step * i as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn coarse() -> Grid1D {
        make_grid(11.0, 111).unwrap()
    }

    #[test]
    fn single_particle_parity_alternates() {
        let cfg = WellConfig::default();
        let s = solve_single(&coarse(), 2.0, &cfg, 3).unwrap();
        let p: Vec<_> = s.iter().map(|e| e.label.parity.unwrap()).collect();
        assert_eq!(p, vec![Parity::Even, Parity::Odd, Parity::Even]);
        assert!(s[0].energy < s[1].energy && s[1].energy < s[2].energy);
        assert!(solve_single(&coarse(), 2.0, &cfg, 2).is_err());
    }

    #[test]
    fn localized_orbitals() {
        let g = coarse();
        let cfg = WellConfig::default();
        let lb = localized_basis(&g, 10.0, &cfg).unwrap();
        assert!(lb.psi_l.overlap(&lb.psi_r).unwrap().norm() < 1e-8);
        assert!((lb.psi_l.norm_sq() - 1.0).abs() < 1e-10);
        assert!(lb.psi_l.left_mass() > 0.99);
        let i = grid_index_nearest(&g, -5.0);
        assert!(lb.psi_l.amplitudes[i].re > 0.0);
        let mirrored = lb.psi_l.parity_applied().unwrap();
        let diff: f64 = mirrored
            .amplitudes
            .iter()
            .zip(&lb.psi_r.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6);
        assert!(matches!(localized_basis(&g, 4.0, &cfg), Err(Error::InsufficientSeparation(_))));
    }

    #[test]
    fn separable_pair_spectrum_is_sum_of_single_energies() {
        let g = make_grid(8.0, 61).unwrap();
        let cfg = WellConfig::default().with_uniform_scattering_length(0.0);
        let single = solve_single(&g, 1.0, &cfg, 6).unwrap();
        let pairs = solve_pair(&g, 1.0, ChannelId::C00, &cfg, 6).unwrap();
        let mut sums = Vec::new();
        for i in 0..6 {
            for j in i..6 {
                sums.push((single[i].energy + single[j].energy, i == j));
            }
        }
        for p in &pairs {
            let hit = sums.iter().any(|(s, diag)| {
                (s - p.energy).abs() < 1e-9 && !(*diag && p.label.exchange == Some(Exchange::Antisymmetric))
            });
            assert!(hit, "{} has no matching sum", p.energy);
            assert!(p.residual < 1e-8);
        }
    }

    #[test]
    fn separation_grid_includes_endpoint() {
        let d = separation_grid(0.0, 10.0, 0.1).unwrap();
        assert_eq!(d.len(), 101);
        assert!((d[100] - 10.0).abs() < 1e-12);
    }
}
