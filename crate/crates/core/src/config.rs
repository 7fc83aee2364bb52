//! Run configuration for the command-line tool.
//!
//! Every field has a default, so an empty JSON object is a valid config.
//! Unknown keys are rejected at every level. Speeds are given in units of
//! `v₀`, the speed bound computed for channel `c00` on the configured
//! trajectory. Lengths are in `σ`, energies in `ħω₀`, the time step in
//! `1/ω₀`, and hold times in natural units (`mσ²/ħ`).

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{PhaseOptions, PropagationOptions, Stepper};
use crate::eigen::DavidsonOptions;
use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid1D};
use crate::potential::{ChannelId, RampProfile, TrajectorySpec, WellConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Half-width of the box; the grid spans `[-x_max, x_max]`.
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { x_max: 12.0, n_points: 241 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub d_max: f64,
    pub d_min: f64,
    /// Mean approach speed, in units of v₀.
    pub v_in: f64,
    /// Mean separation speed, in units of v₀.
    pub v_out: f64,
    /// Time spent at `d_min`, in natural units.
    pub hold_time: f64,
    pub profile: RampProfile,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            d_max: 8.0,
            d_min: 0.0,
            v_in: 0.01,
            v_out: 0.01,
            hold_time: 0.15,
            profile: RampProfile::Smoothstep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Time step, in units of `1/ω₀`.
    pub dt: f64,
    pub stepper: Stepper,
    /// Relative residual of each implicit time step.
    pub propagation_tol: f64,
    /// Largest allowed probability within 1σ of the box walls.
    pub leakage_limit: f64,
    /// Residual tolerance of the eigensolver.
    pub eigen_tol: f64,
    /// Branches tracked in spectrum sweeps.
    pub k_states: usize,
    /// Spacing of the separation samples in spectrum sweeps.
    pub d_step: f64,
    /// Largest separation of spectrum sweeps.
    pub d_sweep_max: f64,
    /// Quadrature nodes per ramp for the phase integrals.
    pub phase_nodes: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            dt: 0.02,
            stepper: Stepper::default(),
            propagation_tol: 1e-13,
            leakage_limit: 1e-6,
            eigen_tol: 1e-8,
            k_states: 6,
            d_step: 0.1,
            d_sweep_max: 10.0,
            phase_nodes: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    /// Steps between `|ψ|` snapshots; 0 disables them.
    pub snapshot_every: usize,
    /// Steps between time-series rows; 0 disables the time series.
    pub sample_every: usize,
    /// Also write final wavefunctions as binary with a JSON sidecar.
    pub wavefunctions: bool,
    /// Separations at which single-particle eigenfunctions are written.
    pub eigenfunction_d: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".into(),
            snapshot_every: 0,
            sample_every: 0,
            wavefunctions: false,
            eigenfunction_d: vec![0.0, 2.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    /// Speeds in units of v₀.
    pub speeds: Vec<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { speeds: vec![0.01, 0.1, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    /// Lowest and highest speed, in units of v₀; points are log-spaced.
    pub v_min: f64,
    pub v_max: f64,
    pub count: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { v_min: 0.05, v_max: 2.0, count: 30 }
    }
}

impl ScanConfig {
    pub fn speeds(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.v_min];
        }
        let (a, b) = (self.v_min.ln(), self.v_max.ln());
        (0..self.count).map(|i| (a + (b - a) * i as f64 / (self.count - 1) as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    /// Hold times (natural units) for the γ table; empty skips the table.
    pub hold_times: Vec<f64>,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { hold_times: vec![0.0, 0.05, 0.1, 0.15, 0.2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BellConfig {
    /// Spectroscopic linewidth, in ħω₀.
    pub linewidth: f64,
}

impl Default for BellConfig {
    fn default() -> Self {
        BellConfig { linewidth: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParallelismConfig {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
}

impl Default for ParallelismConfig {
    fn default() -> Self {
        ParallelismConfig { workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub well: WellConfig,
    pub grid: GridConfig,
    pub trajectory: TrajectoryConfig,
    pub channels: Vec<ChannelId>,
    pub numerics: NumericsConfig,
    pub output: OutputConfig,
    pub evolve: EvolveConfig,
    pub scan: ScanConfig,
    pub gate: GateConfig,
    pub bell: BellConfig,
    pub parallelism: ParallelismConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            well: WellConfig::default(),
            grid: GridConfig::default(),
            trajectory: TrajectoryConfig::default(),
            channels: vec![ChannelId::C00, ChannelId::CPsiPlus, ChannelId::C11, ChannelId::CPsiMinus],
            numerics: NumericsConfig::default(),
            output: OutputConfig::default(),
            evolve: EvolveConfig::default(),
            scan: ScanConfig::default(),
            gate: GateConfig::default(),
            bell: BellConfig::default(),
            parallelism: ParallelismConfig::default(),
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::Config(msg)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// Apply `key=value` overrides, where `key` is a dotted path such as
    /// `well.scattering_lengths.11`. Values are parsed as JSON, falling
    /// back to a plain string.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut root = serde_json::to_value(&self)?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| invalid(format!("override `{item}` is not of the form key=value")))?;
            let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut node = &mut root;
            let parts: Vec<&str> = key.split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let obj = node
                    .as_object_mut()
                    .ok_or_else(|| invalid(format!("override `{key}`: `{part}` is not inside an object")))?;
                if !obj.contains_key(*part) {
                    return Err(invalid(format!("override `{key}`: unknown key `{part}`")));
                }
                if i + 1 == parts.len() {
                    obj.insert(part.to_string(), value.clone());
                    break;
                }
                node = obj.get_mut(*part).expect("checked above");
            }
        }
        serde_json::from_value(root).map_err(|e| invalid(e.to_string()))
    }

    /// Check every field before any computation starts.
    pub fn validate(&self) -> Result<()> {
        self.well.validate().map_err(|e| invalid(e.to_string()))?;
        let grid = self.grid()?;
        let t = &self.trajectory;
        TrajectorySpec::new(t.d_max, t.d_min, t.v_in, t.hold_time, t.v_out, t.profile)
            .map_err(|e| invalid(format!("trajectory: {e}")))?;
        let need = 0.5 * t.d_max + crate::potential::GRID_MARGIN * self.well.sigma;
        if grid.x_max() < need {
            return Err(invalid(format!("grid.x_max = {} must be at least d_max/2 + 6 sigma = {need}", grid.x_max())));
        }
        if self.channels.is_empty() {
            return Err(invalid("channel list is empty".into()));
        }
        let n = &self.numerics;
        let positive = [
            ("numerics.dt", n.dt),
            ("numerics.propagation_tol", n.propagation_tol),
            ("numerics.leakage_limit", n.leakage_limit),
            ("numerics.eigen_tol", n.eigen_tol),
            ("numerics.d_step", n.d_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if n.k_states == 0 || n.phase_nodes == 0 {
            return Err(invalid("numerics.k_states and numerics.phase_nodes must be positive".into()));
        }
        if !(n.d_sweep_max >= 0.0) {
            return Err(invalid(format!("numerics.d_sweep_max must be non-negative, got {}", n.d_sweep_max)));
        }
        let sweep_need = 0.5 * n.d_sweep_max + crate::potential::GRID_MARGIN * self.well.sigma;
        if grid.x_max() < sweep_need {
            return Err(invalid(format!(
                "grid.x_max = {} must be at least d_sweep_max/2 + 6 sigma = {sweep_need}",
                grid.x_max()
            )));
        }
        if self.evolve.speeds.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("evolve.speeds must be positive".into()));
        }
        let s = &self.scan;
        if s.count == 0 || !(s.v_min > 0.0) || !(s.v_max >= s.v_min) {
            return Err(invalid(format!("scan needs 0 < v_min <= v_max and count > 0, got {s:?}")));
        }
        if self.gate.hold_times.iter().any(|h| !(*h >= 0.0)) {
            return Err(invalid("gate.hold_times must be non-negative".into()));
        }
        if !(self.bell.linewidth >= 0.0) {
            return Err(invalid(format!("bell.linewidth must be non-negative, got {}", self.bell.linewidth)));
        }
        if self.output.directory.is_empty() {
            return Err(invalid("output.directory is empty".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        make_grid(self.grid.x_max, self.grid.n_points).map_err(|e| invalid(e.to_string()))
    }

    /// Trajectory with speeds converted using `v_unit` (natural units).
    pub fn trajectory(&self, v_unit: f64) -> Result<TrajectorySpec> {
        let t = &self.trajectory;
        TrajectorySpec::new(t.d_max, t.d_min, 1.0, t.hold_time, 1.0, t.profile)?
            .with_speed_in_units(t.v_in, t.v_out, v_unit)
    }

    pub fn propagation_options(&self) -> PropagationOptions {
        let mut o = PropagationOptions::for_config(&self.well).with_dt(self.numerics.dt / self.well.omega0());
        o.stepper = self.numerics.stepper;
        o.tol = self.numerics.propagation_tol;
        o.leakage_limit = self.numerics.leakage_limit;
        o.sample_every = self.output.sample_every;
        o.snapshot_every = self.output.snapshot_every;
        o
    }

    pub fn davidson_options(&self) -> DavidsonOptions {
        DavidsonOptions { tol: self.numerics.eigen_tol, ..DavidsonOptions::default() }
    }

    pub fn phase_options(&self) -> PhaseOptions {
        PhaseOptions { nodes: self.numerics.phase_nodes, davidson: self.davidson_options() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"grid": {"x_max": 12, "bogus": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"extra": true}"#).is_err());
    }

    #[test]
    fn overrides_win_and_round_trip() {
        let cfg = RunConfig::default()
            .with_overrides(&["well.scattering_lengths.11=0.12".into(), "output.directory=res".into()])
            .unwrap();
        assert_eq!(cfg.well.scattering_lengths.a11, 0.12);
        assert_eq!(cfg.output.directory, "res");
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&echoed).unwrap(), cfg);
        assert!(RunConfig::default().with_overrides(&["grid.nope=1".into()]).is_err());
        assert!(RunConfig::default().with_overrides(&["grid".into()]).is_err());
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut cfg = RunConfig::default();
        cfg.channels.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.grid.x_max = 8.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.numerics.dt = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scan_speeds_are_log_spaced() {
        let s = ScanConfig { v_min: 0.1, v_max: 10.0, count: 3 }.speeds();
        assert!((s[1] - 1.0).abs() < 1e-12 && (s[2] - 10.0).abs() < 1e-12);
    }
}
