//! Two-qubit gate built from the channel phases, its local-equivalence
//! class, and the selective-excitation Bell-pair scheme.
//!
//! Basis order is `|00⟩, |01⟩, |10⟩, |11⟩`, with the left qubit first.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{branch_state, phase_accumulation, propagate, PhaseOptions, PropagationOptions};
use crate::eigen::{DavidsonOptions, ParityBasis};
use crate::error::{Error, Result};
use crate::grid::{overlap, Exchange, Grid1D};
use crate::potential::{build_pair_hamiltonian, ChannelId, TrajectorySpec, WellConfig};
use crate::spectra::{gate_path_branch, localized_basis, opposite_well_state, solve_pair_sectors, Sector};

pub type TwoQubitUnitary = Matrix4<Complex64>;

/// Dynamical phases of the four qubit channels, unreduced.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GatePhases {
    pub phi_00: f64,
    pub phi_11: f64,
    pub phi_plus: f64,
    pub phi_minus: f64,
}

impl GatePhases {
    pub fn new(phi_00: f64, phi_11: f64, phi_plus: f64, phi_minus: f64) -> Self {
        GatePhases { phi_00, phi_11, phi_plus, phi_minus }
    }

    /// Each phase reduced to `[0, 2π)`.
    pub fn reduced(&self) -> GatePhases {
        GatePhases {
            phi_00: wrap_2pi(self.phi_00),
            phi_11: wrap_2pi(self.phi_11),
            phi_plus: wrap_2pi(self.phi_plus),
            phi_minus: wrap_2pi(self.phi_minus),
        }
    }

    /// `φ₀₀ + φ₁₁ − φ₊ − φ₋`, unreduced.
    pub fn invariant_combination(&self) -> f64 {
        self.phi_00 + self.phi_11 - self.phi_plus - self.phi_minus
    }
}

/// Reduce to `[0, 2π)`.
pub fn wrap_2pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduce to `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_2pi(x);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Distance of `x` from the nearest multiple of 2π, in `[0, π]`.
fn fold(x: f64) -> f64 {
    wrap_pi(x).abs()
}

fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

/// Bell-mixing matrix taking the partial Bell basis
/// `|00⟩, |Ψ⁺⟩, |Ψ⁻⟩, |11⟩` to computational coordinates.
pub fn bell_mixing() -> TwoQubitUnitary {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    Matrix4::new(
        one, z, z, z, //
        z, h, h, z, //
        z, h, -h, z, //
        z, z, z, one,
    )
}

/// `U = T diag(e^{−iφ₀₀}, e^{−iφ₊}, e^{−iφ₋}, e^{−iφ₁₁}) T†`.
pub fn build_u(phases: &GatePhases) -> TwoQubitUnitary {
    let t = bell_mixing();
    let d = Matrix4::from_diagonal(&Vector4::new(
        cis(-phases.phi_00),
        cis(-phases.phi_plus),
        cis(-phases.phi_minus),
        cis(-phases.phi_11),
    ));
    t * d * t.adjoint()
}

/// The same unitary written out element by element.
pub fn build_u_explicit(phases: &GatePhases) -> TwoQubitUnitary {
    let p = cis(-phases.phi_plus);
    let m = cis(-phases.phi_minus);
    let z = Complex64::new(0.0, 0.0);
    let s = 0.5 * (p + m);
    let a = 0.5 * (p - m);
    Matrix4::new(
        cis(-phases.phi_00), z, z, z, //
        z, s, a, z, //
        z, a, s, z, //
        z, z, z, cis(-phases.phi_11),
    )
}

/// Single-qubit phase gate `S(θ) = e^{−iθ|1⟩⟨1|}`.
pub fn phase_gate(theta: f64) -> nalgebra::Matrix2<Complex64> {
    nalgebra::Matrix2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), cis(-theta))
}

/// Kronecker product of two single-qubit operators, left qubit first.
pub fn kron(a: &nalgebra::Matrix2<Complex64>, b: &nalgebra::Matrix2<Complex64>) -> TwoQubitUnitary {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// `G = U (S(π) ⊗ S(0)) U`.
pub fn build_g(phases: &GatePhases) -> TwoQubitUnitary {
    let u = build_u(phases);
    u * kron(&phase_gate(PI), &phase_gate(0.0)) * u
}

/// Diagonal closed form of `build_g`.
pub fn build_g_closed(phases: &GatePhases) -> TwoQubitUnitary {
    let pm = cis(-(phases.phi_plus + phases.phi_minus));
    Matrix4::from_diagonal(&Vector4::new(cis(-2.0 * phases.phi_00), pm, -pm, -cis(-2.0 * phases.phi_11)))
}

/// Largest entry of `|U†U − I|`.
pub fn unitarity_residual(u: &TwoQubitUnitary) -> f64 {
    (u.adjoint() * u - TwoQubitUnitary::identity()).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Largest entry of the difference of two matrices.
pub fn max_abs_diff(a: &TwoQubitUnitary, b: &TwoQubitUnitary) -> f64 {
    (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Entanglement class of `G(phases)` read off the phases directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tunability {
    /// Controlled-phase angle in `[0, π]`.
    pub gamma: f64,
    /// `φ₀₀ + φ₁₁ − φ₊ − φ₋` reduced to `[0, 2π)`.
    pub invariant_phase: f64,
}

/// `G` is diagonal with phases whose controlled-phase combination is
/// `−2(φ₀₀ + φ₁₁ − φ₊ − φ₋)`, so `γ` is twice the invariant combination
/// folded into `[0, π]`.
pub fn tunability_gamma(phases: &GatePhases) -> Tunability {
    let phi = phases.invariant_combination();
    Tunability { gamma: fold(2.0 * phi), invariant_phase: wrap_2pi(phi) }
}

/// Local invariants of a two-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalClass {
    pub g1: Complex64,
    pub g2: f64,
    /// Angle of the equivalent controlled-phase gate, when there is one.
    pub gamma: Option<f64>,
}

/// Tolerance for membership of the controlled-phase family.
const FAMILY_TOL: f64 = 1e-8;

fn magic_basis() -> TwoQubitUnitary {
    let h = FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let r = Complex64::new(h, 0.0);
    let i = Complex64::new(0.0, h);
    Matrix4::new(
        r, z, z, i, //
        z, i, r, z, //
        z, i, -r, z, //
        r, z, z, -i,
    )
}

/// Makhlin invariants of `u` and, when `u` lies in the controlled-phase
/// family, the matching angle in `[0, π]`.
///
/// On the family `G1 = cos²(γ/2)` and `G2 = 1 + 2 G1`. The angle itself is
/// taken from the spectrum of `mᵀm` in the magic basis, which stays well
/// conditioned near `γ = 0` and `γ = π`.
pub fn local_equivalence_class(u: &TwoQubitUnitary) -> Result<LocalClass> {
    let res = unitarity_residual(u);
    if res > 1e-9 {
        return Err(Error::NotUnitary(res));
    }
    let q = magic_basis();
    let m = q.adjoint() * u * q;
    let big_m = m.transpose() * m;
    let det = u.determinant();
    let tr = big_m.trace();
    let tr2 = (big_m * big_m).trace();
    let g1 = tr * tr / (16.0 * det);
    let g2c = (tr * tr - tr2) / (4.0 * det);
    let on_family = g1.im.abs() < FAMILY_TOL
        && g2c.im.abs() < FAMILY_TOL
        && (g2c.re - 1.0 - 2.0 * g1.re).abs() < FAMILY_TOL
        && g1.re > -FAMILY_TOL
        && g1.re < 1.0 + FAMILY_TOL;
    let gamma = if on_family {
        // Normalize to unit determinant; the fourth-root ambiguity only
        // flips the sign of mᵀm and so leaves λ² unchanged.
        let scale = det.powf(-0.25);
        let eig = (big_m * (scale * scale)).schur().eigenvalues();
        let Some(eig) = eig else {
            return Err(Error::NoConvergence { iterations: 0, residual: f64::NAN });
        };
        // Eigenvalues come as ±e^{±iγ/2}; their squares are e^{±iγ}.
        let g = eig.iter().map(|l| (l * l).arg().abs()).sum::<f64>() / 4.0;
        Some(g)
    } else {
        None
    };
    Ok(LocalClass { g1, g2: g2c.re, gamma })
}

/// Phases, unitary and entangling angle for a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateReport {
    pub phases: GatePhases,
    pub phases_mod_2pi: GatePhases,
    pub invariant_phase: f64,
    pub gamma: f64,
    /// `γ` recomputed from the local invariants of `G`.
    pub gamma_oracle: Option<f64>,
    /// Rows of `U`, each entry as `[re, im]`.
    pub unitary: [[[f64; 2]; 4]; 4],
    pub unitarity_residual: f64,
}

impl GateReport {
    pub fn unitary_matrix(&self) -> TwoQubitUnitary {
        Matrix4::from_fn(|r, c| Complex64::new(self.unitary[r][c][0], self.unitary[r][c][1]))
    }
}

fn matrix_rows(u: &TwoQubitUnitary) -> [[[f64; 2]; 4]; 4] {
    let mut out = [[[0.0; 2]; 4]; 4];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, e) in row.iter_mut().enumerate() {
            *e = [u[(r, c)].re, u[(r, c)].im];
        }
    }
    out
}

pub fn gate_from_phases(phases: GatePhases) -> Result<GateReport> {
    let u = build_u(&phases);
    let tun = tunability_gamma(&phases);
    let class = local_equivalence_class(&build_g(&phases))?;
    Ok(GateReport {
        phases,
        phases_mod_2pi: phases.reduced(),
        invariant_phase: tun.invariant_phase,
        gamma: tun.gamma,
        gamma_oracle: class.gamma,
        unitarity_residual: unitarity_residual(&u),
        unitary: matrix_rows(&u),
    })
}

/// Phase integrals along `traj`, then `U` and `γ`.
pub fn gate_from_trajectory(
    grid: &Grid1D,
    traj: &TrajectorySpec,
    cfg: &WellConfig,
    opts: &PhaseOptions,
) -> Result<GateReport> {
    let phases = phase_accumulation(grid, traj, cfg, opts)?;
    gate_from_phases(phases)
}

/// A two-qubit pure state and its concurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOutput {
    pub state: [Complex64; 4],
    pub concurrence: f64,
}

/// `C = 2 |c₀₀ c₁₁ − c₀₁ c₁₀|` for a normalized pure state.
pub fn concurrence(s: &[Complex64; 4]) -> f64 {
    2.0 * (s[0] * s[3] - s[1] * s[2]).norm()
}

/// `U (α|0⟩ + β|1⟩) ⊗ (μ|0⟩ + ν|1⟩)`.
pub fn apply_gate(u: &TwoQubitUnitary, left: [Complex64; 2], right: [Complex64; 2]) -> Result<GateOutput> {
    for (name, q) in [("left", left), ("right", right)] {
        let n = q[0].norm_sqr() + q[1].norm_sqr();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("{name} qubit is not normalized (norm {n})")));
        }
    }
    let input = Vector4::new(left[0] * right[0], left[0] * right[1], left[1] * right[0], left[1] * right[1]);
    let out = u * input;
    let state = [out[0], out[1], out[2], out[3]];
    Ok(GateOutput { state, concurrence: concurrence(&state) })
}

/// Spectroscopic figures for exciting `|00⟩` to `|Ψ⁺⟩` in a merged well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellSchemeReport {
    /// `E⁰(Ψ⁺) − E⁰(00)` at `d = 0`.
    pub transition_energy: f64,
    /// `E⁰(11) − E⁰(Ψ⁺)`: how far the unwanted `|11⟩` line sits from the target.
    pub detuning_11: f64,
    /// Gap from the `Ψ⁺` ground state to its first symmetric excitation.
    pub vibrational_spacing: f64,
    /// Interaction shift of the `Ψ⁺` ground state.
    pub interaction_shift: f64,
    /// `vibrational_spacing / |interaction_shift|`.
    pub spacing_to_shift: f64,
    pub linewidth: f64,
    pub resolvable: bool,
    /// Energies above in units of ħω₀.
    pub transition_energy_hw0: f64,
    pub detuning_11_hw0: f64,
    pub vibrational_spacing_hw0: f64,
    pub interaction_shift_hw0: f64,
}

/// Lowest two symmetric levels (either parity) at `d = 0`, and the
/// noninteracting ground energy.
fn merged_levels(grid: &Grid1D, channel: ChannelId, cfg: &WellConfig) -> Result<(f64, f64, f64)> {
    let h = build_pair_hamiltonian(grid, 0.0, channel, cfg)?;
    let basis = ParityBasis::new(&h.single)?;
    let sol = solve_pair_sectors(&h, &basis, grid, 0.0, [2, 1, 0, 0], None, &DavidsonOptions::default())?;
    let e0 = sol.energy(Sector::SE, 0);
    let e1 = sol.energy(Sector::SE, 1).min(sol.energy(Sector::SO, 0));
    let free = 2.0 * basis.lowest(1)[0].0;
    Ok((e0, e1, free))
}

/// `linewidth` is in natural energy units.
pub fn bell_scheme(grid: &Grid1D, cfg: &WellConfig, linewidth: f64) -> Result<BellSchemeReport> {
    cfg.validate()?;
    if !(linewidth >= 0.0) {
        return Err(Error::InvalidParameter(format!("linewidth must be non-negative, got {linewidth}")));
    }
    let (e00, _, _) = merged_levels(grid, ChannelId::C00, cfg)?;
    let (ep, ep1, free) = merged_levels(grid, ChannelId::CPsiPlus, cfg)?;
    let degenerate = cfg.coupling(ChannelId::CPsiPlus) == cfg.coupling(ChannelId::C11);
    let detuning_11 = if degenerate {
        0.0
    } else {
        merged_levels(grid, ChannelId::C11, cfg)?.0 - ep
    };
    let spacing = ep1 - ep;
    let shift = ep - free;
    let resolvable = !degenerate && detuning_11.abs() > linewidth && spacing > linewidth;
    let w0 = cfg.omega0();
    Ok(BellSchemeReport {
        transition_energy: ep - e00,
        detuning_11,
        vibrational_spacing: spacing,
        interaction_shift: shift,
        spacing_to_shift: spacing / shift.abs(),
        linewidth,
        resolvable,
        transition_energy_hw0: (ep - e00) / w0,
        detuning_11_hw0: detuning_11 / w0,
        vibrational_spacing_hw0: spacing / w0,
        interaction_shift_hw0: shift / w0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellSeparation {
    /// `|⟨(LR + RL)/√2 | ψ_final⟩|²`.
    pub fidelity: f64,
    pub exchange: f64,
    pub norm_drift: f64,
    pub steps: usize,
}

/// Start in the merged-well `Ψ⁺` state that connects to the opposite-well
/// pair and separate the wells along the outbound leg of `traj`.
pub fn bell_separation_check(
    grid: &Grid1D,
    cfg: &WellConfig,
    traj: &TrajectorySpec,
    opts: &PropagationOptions,
) -> Result<BellSeparation> {
    traj.validate()?;
    let channel = ChannelId::CPsiPlus;
    let branch = gate_path_branch(grid, channel, cfg, traj.d_max)?;
    let psi0 = branch_state(grid, channel, cfg, branch, traj.d_min)?;
    let result = propagate(&psi0, &traj.separation_leg(), channel, cfg, opts)?;
    let target = opposite_well_state(&localized_basis(grid, traj.d_max, cfg)?, Exchange::Symmetric)?;
    Ok(BellSeparation {
        fidelity: overlap(&target, &result.final_state)?.norm_sqr(),
        exchange: result.final_state.exchange_expectation(),
        norm_drift: result.norm_drift,
        steps: result.steps,
    })
}
