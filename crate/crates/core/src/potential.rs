//! The physical model: Gaussian double well, per-channel contact
//! interaction and the time course of the well separation.
//!
//! Natural units ħ = m = σ = 1 are used throughout; `omega0()` converts
//! to the harmonic frequency of one well's quadratic bottom.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Exchange, Grid1D};

/// Distance in σ that the grid must extend beyond each well centre.
pub const GRID_MARGIN: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringLengths {
    #[serde(rename = "00")]
    pub a00: f64,
    #[serde(rename = "01sym")]
    pub a01: f64,
    #[serde(rename = "11")]
    pub a11: f64,
}

impl ScatteringLengths {
    pub fn uniform(a: f64) -> Self {
        ScatteringLengths { a00: a, a01: a, a11: a }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// Weight `1/dx` on coincident grid points.
    #[default]
    Kronecker,
    /// Normalized Gaussian of width `2 dx`; used for convergence cross-checks.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WellConfig {
    /// Depth of each Gaussian well, in ħ²/(mσ²).
    pub v0: f64,
    pub sigma: f64,
    pub scattering_lengths: ScatteringLengths,
    /// Transverse confinement frequency, in units of ω₀.
    pub omega_perp: f64,
    pub delta_mode: DeltaMode,
}

impl Default for WellConfig {
    fn default() -> Self {
        WellConfig {
            v0: 30.0,
            sigma: 1.0,
            scattering_lengths: ScatteringLengths::uniform(0.1),
            omega_perp: 5.0,
            delta_mode: DeltaMode::Kronecker,
        }
    }
}

impl WellConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0) {
            return Err(Error::InvalidParameter(format!("V0 must be positive, got {}", self.v0)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.omega_perp > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega_perp must be positive, got {}",
                self.omega_perp
            )));
        }
        let a = self.scattering_lengths;
        if ![a.a00, a.a01, a.a11].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("scattering lengths must be finite".into()));
        }
        Ok(())
    }

    /// ω₀ = sqrt(V₀ / (m σ²)).
    pub fn omega0(&self) -> f64 {
        (self.v0 / (self.sigma * self.sigma)).sqrt()
    }

    pub fn scattering_length(&self, channel: ChannelId) -> f64 {
        let a = self.scattering_lengths;
        match channel {
            ChannelId::C00 => a.a00,
            ChannelId::C11 => a.a11,
            ChannelId::CPsiPlus | ChannelId::CPsiMinus => a.a01,
        }
    }

    /// Contact strength `g = 2 a ħ ω⊥`.
    pub fn coupling(&self, channel: ChannelId) -> f64 {
        2.0 * self.scattering_length(channel) * self.omega_perp * self.omega0()
    }

    /// Energy in units of ħω₀.
    pub fn to_hw0(&self, energy: f64) -> f64 {
        energy / self.omega0()
    }

    pub fn with_uniform_scattering_length(mut self, a: f64) -> Self {
        self.scattering_lengths = ScatteringLengths::uniform(a);
        self
    }
}

/// Internal two-qubit channel of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    #[serde(rename = "c00")]
    C00,
    #[serde(rename = "cPsiPlus")]
    CPsiPlus,
    #[serde(rename = "c11")]
    C11,
    #[serde(rename = "cPsiMinus")]
    CPsiMinus,
}

impl ChannelId {
    pub const ALL: [ChannelId; 4] =
        [ChannelId::C00, ChannelId::CPsiPlus, ChannelId::C11, ChannelId::CPsiMinus];

    /// Spatial exchange symmetry that pairs with this internal state for
    /// identical bosons.
    pub fn spatial_exchange(self) -> Exchange {
        match self {
            ChannelId::CPsiMinus => Exchange::Antisymmetric,
            _ => Exchange::Symmetric,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelId::C00 => "c00",
            ChannelId::CPsiPlus => "cPsiPlus",
            ChannelId::C11 => "c11",
            ChannelId::CPsiMinus => "cPsiMinus",
        }
    }
}

impl std::str::FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown channel '{s}'")))
    }
}

impl std::fmt::Display for ChannelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `V(x, d) = -V₀ exp(-(x-d/2)²/2σ²) - V₀ exp(-(x+d/2)²/2σ²)`.
pub fn double_well(x: f64, d: f64, cfg: &WellConfig) -> f64 {
    let s2 = 2.0 * cfg.sigma * cfg.sigma;
    let l = x - 0.5 * d;
    let r = x + 0.5 * d;
    -cfg.v0 * ((-l * l / s2).exp() + (-r * r / s2).exp())
}

/// `∂V/∂d` at fixed x.
pub fn double_well_d_derivative(x: f64, d: f64, cfg: &WellConfig) -> f64 {
    let s2 = cfg.sigma * cfg.sigma;
    let l = x - 0.5 * d;
    let r = x + 0.5 * d;
    -cfg.v0 * (0.5 * l / s2 * (-l * l / (2.0 * s2)).exp() - 0.5 * r / s2 * (-r * r / (2.0 * s2)).exp())
}

pub fn check_extent(grid: &Grid1D, d: f64, cfg: &WellConfig) -> Result<()> {
    let required = 0.5 * d.abs() + GRID_MARGIN * cfg.sigma;
    if grid.x_max() < required {
        return Err(Error::GridTooSmall { x_max: grid.x_max(), d, required });
    }
    Ok(())
}

/// Single-particle Hamiltonian `p²/2m + V(x, d)` as a symmetric tridiagonal
/// matrix with hard walls at the grid ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleHamiltonian {
    pub grid: Grid1D,
    pub d: f64,
    /// Diagonal: `1/dx² + V(x_i)`.
    pub diag: Vec<f64>,
    /// Constant off-diagonal `-1/(2dx²)`.
    pub off: f64,
    pub potential: Vec<f64>,
}

impl SingleHamiltonian {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off * x[i - 1];
            }
            if i + 1 < n {
                s += self.off * x[i + 1];
            }
            y[i] = s;
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i.abs_diff(j) == 1 {
                self.off
            } else {
                0.0
            }
        })
    }
}

pub fn build_single_hamiltonian(grid: &Grid1D, d: f64, cfg: &WellConfig) -> Result<SingleHamiltonian> {
    cfg.validate()?;
    check_extent(grid, d, cfg)?;
    let dx = grid.dx();
    let kin = 1.0 / (dx * dx);
    let potential: Vec<f64> = grid.points().iter().map(|&x| double_well(x, d, cfg)).collect();
    let diag = potential.iter().map(|v| kin + v).collect();
    Ok(SingleHamiltonian { grid: *grid, d, diag, off: -0.5 * kin, potential })
}

/// Two-particle Hamiltonian `H₁⊗I + I⊗H₁ + g D` on the product grid.
///
/// The interaction is stored as a dense row-major array over `(x_a, x_b)`;
/// in Kronecker mode only its diagonal is non-zero.
#[derive(Debug, Clone)]
pub struct PairHamiltonian {
    pub single: SingleHamiltonian,
    pub channel: ChannelId,
    pub coupling: f64,
    pub interaction: Vec<f64>,
}

impl PairHamiltonian {
    pub fn n(&self) -> usize {
        self.single.n()
    }

    pub fn dim(&self) -> usize {
        self.n() * self.n()
    }

    /// Local potential `V(x_a) + V(x_b) + W(x_a, x_b)` plus both kinetic
    /// diagonals, row-major.
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.single.diag[i] + self.single.diag[j] + self.interaction[i * n + j];
            }
        }
        out
    }

    /// `y = H x` for a real row-major vector.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        let off = self.single.off;
        let h = &self.single.diag;
        for i in 0..n {
            let row = &x[i * n..(i + 1) * n];
            let out = &mut y[i * n..(i + 1) * n];
            let hi = h[i];
            let w = &self.interaction[i * n..(i + 1) * n];
            for j in 0..n {
                out[j] = (hi + h[j] + w[j]) * row[j];
            }
            for j in 1..n {
                out[j] += off * row[j - 1];
                out[j - 1] += off * row[j];
            }
            if i > 0 {
                let up = &x[(i - 1) * n..i * n];
                for j in 0..n {
                    out[j] += off * up[j];
                }
            }
            if i + 1 < n {
                let down = &x[(i + 1) * n..(i + 2) * n];
                for j in 0..n {
                    out[j] += off * down[j];
                }
            }
        }
    }

    pub fn expectation(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        let num: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().map(|a| a * a).sum();
        num / den
    }
}

/// Interaction profile `W(x_a, x_b)` for strength `g` on `grid`.
pub fn interaction_profile(grid: &Grid1D, g: f64, mode: DeltaMode) -> Vec<f64> {
    let n = grid.n_points();
    let dx = grid.dx();
    let mut w = vec![0.0; n * n];
    match mode {
        DeltaMode::Kronecker => {
            for i in 0..n {
                w[i * n + i] = g / dx;
            }
        }
        DeltaMode::Gaussian => {
            let width = 2.0 * dx;
            let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * width);
            let profile: Vec<f64> = (0..n)
                .map(|k| {
                    let r = k as f64 * dx;
                    g * norm * (-r * r / (2.0 * width * width)).exp()
                })
                .collect();
            for i in 0..n {
                for j in 0..n {
                    let v = profile[i.abs_diff(j)];
                    if v.abs() > 1e-300 {
                        w[i * n + j] = v;
                    }
                }
            }
        }
    }
    w
}

pub fn build_pair_hamiltonian(
    grid: &Grid1D,
    d: f64,
    channel: ChannelId,
    cfg: &WellConfig,
) -> Result<PairHamiltonian> {
    let single = build_single_hamiltonian(grid, d, cfg)?;
    let coupling = cfg.coupling(channel);
    let interaction = interaction_profile(grid, coupling, cfg.delta_mode);
    Ok(PairHamiltonian { single, channel, coupling, interaction })
}

/// Time dependence of the well separation.
pub trait WellSchedule: Send + Sync {
    fn duration(&self) -> f64;
    fn d_at(&self, t: f64) -> Result<f64>;
    fn d_range(&self) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RampProfile {
    Linear,
    #[default]
    Smoothstep,
}

impl RampProfile {
    /// Fraction of a ramp completed at normalized time `s ∈ [0, 1]`.
    pub fn shape(self, s: f64) -> f64 {
        match self {
            RampProfile::Linear => s,
            RampProfile::Smoothstep => s * s * (3.0 - 2.0 * s),
        }
    }
}

/// Approach at `v_in`, hold at `d_min`, separate at `v_out`.
///
/// Speeds are in natural units (σ ω₀ / sqrt(V₀) collapses to ħ/(mσ) when
/// σ = 1); `v_unit` records the reference speed v₀ the run used so the
/// speeds can be reported in units of v₀ as well. Each ramp takes
/// `(d_max - d_min) / v`, so `v` is the mean speed of the ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub d_max: f64,
    pub d_min: f64,
    pub v_in: f64,
    pub hold_time: f64,
    pub v_out: f64,
    pub profile: RampProfile,
    pub v_unit: f64,
}

impl TrajectorySpec {
    pub fn new(
        d_max: f64,
        d_min: f64,
        v_in: f64,
        hold_time: f64,
        v_out: f64,
        profile: RampProfile,
    ) -> Result<Self> {
        let t = TrajectorySpec { d_max, d_min, v_in, hold_time, v_out, profile, v_unit: 1.0 };
        t.validate()?;
        Ok(t)
    }

    /// Same trajectory with both speeds given in units of `v_unit`.
    pub fn with_speed_in_units(mut self, v_in: f64, v_out: f64, v_unit: f64) -> Result<Self> {
        self.v_in = v_in * v_unit;
        self.v_out = v_out * v_unit;
        self.v_unit = v_unit;
        self.validate()?;
        Ok(self)
    }

    pub fn with_speed(mut self, v: f64) -> Result<Self> {
        self.v_in = v;
        self.v_out = v;
        self.validate()?;
        Ok(self)
    }

    pub fn with_hold_time(mut self, hold_time: f64) -> Result<Self> {
        self.hold_time = hold_time;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.d_min >= 0.0) || !(self.d_max >= self.d_min) || !self.d_max.is_finite() {
            return bad(format!("need 0 <= d_min <= d_max, got d_min={} d_max={}", self.d_min, self.d_max));
        }
        if !(self.hold_time >= 0.0) || !self.hold_time.is_finite() {
            return bad(format!("hold_time must be non-negative, got {}", self.hold_time));
        }
        if self.d_max > self.d_min && !(self.v_in > 0.0 && self.v_out > 0.0) {
            return bad(format!("ramp speeds must be positive, got {} and {}", self.v_in, self.v_out));
        }
        if !(self.v_unit > 0.0) {
            return bad(format!("speed unit must be positive, got {}", self.v_unit));
        }
        Ok(())
    }

    pub fn ramp_in_time(&self) -> f64 {
        if self.d_max == self.d_min {
            0.0
        } else {
            (self.d_max - self.d_min) / self.v_in
        }
    }

    pub fn ramp_out_time(&self) -> f64 {
        if self.d_max == self.d_min {
            0.0
        } else {
            (self.d_max - self.d_min) / self.v_out
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.ramp_in_time() + self.hold_time + self.ramp_out_time()
    }

    pub fn v_in_units(&self) -> f64 {
        self.v_in / self.v_unit
    }

    pub fn v_out_units(&self) -> f64 {
        self.v_out / self.v_unit
    }

    /// The separation leg alone, starting from `d_min`.
    pub fn separation_leg(&self) -> SeparationRamp {
        SeparationRamp {
            d_start: self.d_min,
            d_end: self.d_max,
            speed: self.v_out,
            profile: self.profile,
        }
    }
}

pub fn trajectory_d(t: f64, traj: &TrajectorySpec) -> Result<f64> {
    let total = traj.total_duration();
    let slack = 1e-12 * total.max(1.0);
    if !(t >= -slack && t <= total + slack) {
        return Err(Error::TimeOutOfRange { t, duration: total });
    }
    let t = t.clamp(0.0, total);
    let span = traj.d_max - traj.d_min;
    let t_in = traj.ramp_in_time();
    let t_hold = t_in + traj.hold_time;
    if t < t_in {
        Ok(traj.d_max - span * traj.profile.shape(t / t_in))
    } else if t <= t_hold {
        Ok(traj.d_min)
    } else {
        let t_out = traj.ramp_out_time();
        let s = ((t - t_hold) / t_out).min(1.0);
        Ok(traj.d_min + span * traj.profile.shape(s))
    }
}

impl WellSchedule for TrajectorySpec {
    fn duration(&self) -> f64 {
        self.total_duration()
    }

    fn d_at(&self, t: f64) -> Result<f64> {
        trajectory_d(t, self)
    }

    fn d_range(&self) -> (f64, f64) {
        (self.d_min, self.d_max)
    }
}

/// A single ramp from `d_start` to `d_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationRamp {
    pub d_start: f64,
    pub d_end: f64,
    pub speed: f64,
    pub profile: RampProfile,
}

impl WellSchedule for SeparationRamp {
    fn duration(&self) -> f64 {
        if self.d_end == self.d_start {
            0.0
        } else {
            (self.d_end - self.d_start).abs() / self.speed
        }
    }

    fn d_at(&self, t: f64) -> Result<f64> {
        let total = self.duration();
        let slack = 1e-12 * total.max(1.0);
        if !(t >= -slack && t <= total + slack) {
            return Err(Error::TimeOutOfRange { t, duration: total });
        }
        if total == 0.0 {
            return Ok(self.d_end);
        }
        let s = (t / total).clamp(0.0, 1.0);
        Ok(self.d_start + (self.d_end - self.d_start) * self.profile.shape(s))
    }

    fn d_range(&self) -> (f64, f64) {
        (self.d_start.min(self.d_end), self.d_start.max(self.d_end))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;

    #[test]
    fn double_well_values() {
        let cfg = WellConfig::default();
        assert_relative_eq!(double_well(0.0, 0.0, &cfg), -2.0 * cfg.v0);
        for &x in &[0.3, 1.7, 4.2, 9.0] {
            assert_eq!(double_well(x, 3.3, &cfg), double_well(-x, 3.3, &cfg));
        }
        let d = 12.0;
        let err = (double_well(d / 2.0, d, &cfg) + cfg.v0).abs();
        assert!(err <= cfg.v0 * (-d * d / 2.0f64).exp());
    }

    #[test]
    fn d_derivative_matches_finite_difference() {
        let cfg = WellConfig::default();
        for &(x, d) in &[(0.4, 1.0), (-2.0, 3.5), (3.1, 6.0)] {
            let h = 1e-6;
            let fd = (double_well(x, d + h, &cfg) - double_well(x, d - h, &cfg)) / (2.0 * h);
            assert_relative_eq!(double_well_d_derivative(x, d, &cfg), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn coupling_sign_follows_scattering_length() {
        let cfg = WellConfig {
            scattering_lengths: ScatteringLengths { a00: 0.1, a01: -0.05, a11: 0.0 },
            ..WellConfig::default()
        };
        assert!(cfg.coupling(ChannelId::C00) > 0.0);
        assert!(cfg.coupling(ChannelId::CPsiPlus) < 0.0);
        assert_eq!(cfg.coupling(ChannelId::CPsiPlus), cfg.coupling(ChannelId::CPsiMinus));
        assert_eq!(cfg.coupling(ChannelId::C11), 0.0);
        assert_relative_eq!(cfg.coupling(ChannelId::C00), 2.0 * 0.1 * 5.0 * 30f64.sqrt());
    }

    #[test]
    fn single_hamiltonian_is_symmetric() {
        let g = make_grid(12.0, 241).unwrap();
        let h = build_single_hamiltonian(&g, 3.0, &WellConfig::default()).unwrap();
        let m = h.to_dense();
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn grid_too_small_rejected() {
        let g = make_grid(8.0, 161).unwrap();
        let err = build_single_hamiltonian(&g, 6.0, &WellConfig::default()).unwrap_err();
        assert!(matches!(err, Error::GridTooSmall { .. }));
    }

    #[test]
    fn kronecker_interaction_is_diagonal() {
        let g = make_grid(6.0, 31).unwrap();
        let w = interaction_profile(&g, 2.0, DeltaMode::Kronecker);
        let n = 31;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    assert_relative_eq!(w[i * n + j], 2.0 / g.dx());
                } else {
                    assert_eq!(w[i * n + j], 0.0);
                }
            }
        }
        let wg = interaction_profile(&g, 2.0, DeltaMode::Gaussian);
        let row_sum: f64 = (0..n).map(|j| wg[15 * n + j]).sum::<f64>() * g.dx();
        assert_relative_eq!(row_sum, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn trajectory_endpoints_and_hold() {
        for profile in [RampProfile::Linear, RampProfile::Smoothstep] {
            let t = TrajectorySpec::new(8.0, 0.5, 0.2, 3.0, 0.2, profile).unwrap();
            assert_eq!(trajectory_d(0.0, &t).unwrap(), 8.0);
            let mid = (8.0 - 0.5) / 0.2 + 1.5;
            assert_relative_eq!(trajectory_d(mid, &t).unwrap(), 0.5);
            assert_relative_eq!(trajectory_d(t.total_duration(), &t).unwrap(), 8.0, epsilon = 1e-12);
            let total = t.total_duration();
            for k in 0..=200 {
                let s = total * k as f64 / 200.0;
                let a = trajectory_d(s, &t).unwrap();
                let b = trajectory_d(total - s, &t).unwrap();
                assert_relative_eq!(a, b, epsilon = 1e-12);
                assert!((0.5 - 1e-12..=8.0 + 1e-12).contains(&a));
            }
            assert!(trajectory_d(total * 1.01, &t).is_err());
            assert!(trajectory_d(-0.1, &t).is_err());
        }
    }

    #[test]
    fn trajectory_asymmetric_speeds_duration() {
        let t = TrajectorySpec::new(8.0, 0.0, 0.4, 2.0, 0.1, RampProfile::Linear).unwrap();
        assert_relative_eq!(t.total_duration(), 20.0 + 2.0 + 80.0);
        assert_relative_eq!(trajectory_d(10.0, &t).unwrap(), 4.0);
        assert_relative_eq!(trajectory_d(62.0, &t).unwrap(), 4.0);
    }

    #[test]
    fn zero_length_trajectory() {
        let t = TrajectorySpec::new(8.0, 8.0, 0.0, 0.0, 0.0, RampProfile::Smoothstep).unwrap();
        assert_eq!(t.total_duration(), 0.0);
        assert_eq!(trajectory_d(0.0, &t).unwrap(), 8.0);
    }

    #[test]
    fn smoothstep_is_continuous_with_zero_end_slopes() {
        let p = RampProfile::Smoothstep;
        let h = 1e-7;
        assert!((p.shape(h) - p.shape(0.0)) / h < 1e-5);
        assert!((p.shape(1.0) - p.shape(1.0 - h)) / h < 1e-5);
        assert_eq!(p.shape(0.5), 0.5);
    }

    #[test]
    fn channel_parsing() {
        assert_eq!("cPsiMinus".parse::<ChannelId>().unwrap(), ChannelId::CPsiMinus);
        assert!("c01".parse::<ChannelId>().is_err());
        assert_eq!(ChannelId::CPsiMinus.spatial_exchange(), Exchange::Antisymmetric);
    }

    #[test]
    fn separation_ramp_runs_from_start_to_end() {
        let r = SeparationRamp { d_start: 0.0, d_end: 8.0, speed: 0.5, profile: RampProfile::Smoothstep };
        assert_relative_eq!(r.duration(), 16.0);
        assert_eq!(r.d_at(0.0).unwrap(), 0.0);
        assert_relative_eq!(r.d_at(16.0).unwrap(), 8.0);
    }
}
