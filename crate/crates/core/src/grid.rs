//! Uniform spatial grids, one- and two-particle wavefunctions, and the
//! discrete exchange and parity operators.
//!
//! All lengths are in units of the well width σ. Inner products use a plain
//! Riemann sum with weight `dx` (one particle) or `dx²` (two particles).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest grid accepted by [`make_grid`].
pub const MIN_POINTS: usize = 16;

/// Threshold on |⟨P⟩| above which a state receives a definite symmetry label.
pub const LABEL_THRESHOLD: f64 = 0.999;

/// A uniform grid on `[-x_max, x_max]`.
///
/// Point `i` sits at `x_max * (2i - (n-1)) / (n-1)`, which makes the grid
/// exactly mirror-symmetric in floating point: `x(n-1-i) == -x(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_max: f64,
    n_points: usize,
}

pub fn make_grid(x_max: f64, n_points: usize) -> Result<Grid1D> {
    if !(x_max > 0.0) || !x_max.is_finite() {
        return Err(Error::InvalidGrid(format!("extent must be positive, got {x_max}")));
    }
    if n_points < MIN_POINTS {
        return Err(Error::InvalidGrid(format!(
            "need at least {MIN_POINTS} points, got {n_points}"
        )));
    }
    Ok(Grid1D { x_max, n_points })
}

impl Grid1D {
    pub fn x_min(&self) -> f64 {
        -self.x_max
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_max / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        let m = (self.n_points - 1) as f64;
        self.x_max * (2.0 * i as f64 - m) / m
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the grid point at `-x(i)`.
    #[inline]
    pub fn mirror(&self, i: usize) -> usize {
        self.n_points - 1 - i
    }

    /// Always true for grids built by [`make_grid`]; kept as an explicit
    /// check for grids deserialized from disk.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n_points).all(|i| self.x(self.mirror(i)) == -self.x(i))
    }

    pub fn check_symmetric(&self) -> Result<()> {
        if self.is_symmetric() {
            Ok(())
        } else {
            Err(Error::InvalidGrid("grid is not symmetric about 0".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exchange {
    Symmetric,
    Antisymmetric,
}

impl Exchange {
    pub fn sign(self) -> f64 {
        match self {
            Exchange::Symmetric => 1.0,
            Exchange::Antisymmetric => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Exchange::Symmetric => "symmetric",
            Exchange::Antisymmetric => "antisymmetric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }

    pub fn product(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Exchange and parity labels. `None` marks a state that is unclassified
/// (or, for one particle, an exchange label that does not apply).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymmetryLabel {
    pub exchange: Option<Exchange>,
    pub parity: Option<Parity>,
}

impl SymmetryLabel {
    pub fn new(exchange: Exchange, parity: Parity) -> Self {
        SymmetryLabel { exchange: Some(exchange), parity: Some(parity) }
    }

    /// Label from measured expectation values of the exchange and parity
    /// operators.
    pub fn classify(exchange_expectation: Option<f64>, parity_expectation: f64) -> Self {
        let exchange = exchange_expectation.and_then(|e| {
            if e > LABEL_THRESHOLD {
                Some(Exchange::Symmetric)
            } else if e < -LABEL_THRESHOLD {
                Some(Exchange::Antisymmetric)
            } else {
                None
            }
        });
        let parity = if parity_expectation > LABEL_THRESHOLD {
            Some(Parity::Even)
        } else if parity_expectation < -LABEL_THRESHOLD {
            Some(Parity::Odd)
        } else {
            None
        };
        SymmetryLabel { exchange, parity }
    }

    pub fn exchange_str(&self) -> &'static str {
        self.exchange.map_or("unclassified", Exchange::as_str)
    }

    pub fn parity_str(&self) -> &'static str {
        self.parity.map_or("unclassified", Parity::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction1D {
    pub grid: Grid1D,
    pub amplitudes: Vec<Complex64>,
}

impl Wavefunction1D {
    pub fn new(grid: Grid1D, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::InvalidGrid(format!(
                "expected {} amplitudes, got {}",
                grid.n_points(),
                amplitudes.len()
            )));
        }
        Ok(Wavefunction1D { grid, amplitudes })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = (0..grid.n_points()).map(|i| f(grid.x(i))).collect();
        Wavefunction1D { grid, amplitudes }
    }

    pub fn from_real(grid: Grid1D, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.n_points());
        let amplitudes = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Wavefunction1D { grid, amplitudes }
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sq().sqrt();
        if n > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn overlap(&self, other: &Wavefunction1D) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 =
            self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.dx())
    }

    pub fn parity_applied(&self) -> Result<Self> {
        self.grid.check_symmetric()?;
        let g = self.grid;
        let amplitudes = (0..g.n_points()).map(|i| self.amplitudes[g.mirror(i)]).collect();
        Ok(Wavefunction1D { grid: g, amplitudes })
    }

    pub fn parity_expectation(&self) -> f64 {
        let g = self.grid;
        let s: f64 = (0..g.n_points())
            .map(|i| (self.amplitudes[i].conj() * self.amplitudes[g.mirror(i)]).re)
            .sum();
        s * g.dx() / self.norm_sq()
    }

    /// Probability weight on `x < 0`, with the centre point split evenly.
    pub fn left_mass(&self) -> f64 {
        let g = self.grid;
        let mut m = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let x = g.x(i);
            if x < 0.0 {
                m += a.norm_sqr();
            } else if x == 0.0 {
                m += 0.5 * a.norm_sqr();
            }
        }
        m * g.dx() / self.norm_sq()
    }
}

/// Two-particle wavefunction, row-major with the first index for atom a.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction2D {
    pub grid: Grid1D,
    pub amplitudes: Vec<Complex64>,
}

impl Wavefunction2D {
    pub fn new(grid: Grid1D, amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = grid.n_points();
        if amplitudes.len() != n * n {
            return Err(Error::InvalidGrid(format!(
                "expected {}x{} amplitudes, got {}",
                n,
                n,
                amplitudes.len()
            )));
        }
        Ok(Wavefunction2D { grid, amplitudes })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let n = grid.n_points();
        let mut amplitudes = Vec::with_capacity(n * n);
        for i in 0..n {
            let xa = grid.x(i);
            for j in 0..n {
                amplitudes.push(f(xa, grid.x(j)));
            }
        }
        Wavefunction2D { grid, amplitudes }
    }

    /// Real amplitudes stored as a flat row-major vector.
    pub fn from_real(grid: Grid1D, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.n_points() * grid.n_points());
        let amplitudes = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Wavefunction2D { grid, amplitudes }
    }

    /// `a(x_a) b(x_b)`.
    pub fn product(a: &Wavefunction1D, b: &Wavefunction1D) -> Result<Self> {
        if a.grid != b.grid {
            return Err(Error::GridMismatch);
        }
        let n = a.grid.n_points();
        let mut amplitudes = Vec::with_capacity(n * n);
        for ai in &a.amplitudes {
            for bj in &b.amplitudes {
                amplitudes.push(ai * bj);
            }
        }
        Ok(Wavefunction2D { grid: a.grid, amplitudes })
    }

    /// `(a⊗b ± b⊗a)`, normalized.
    pub fn symmetrized(a: &Wavefunction1D, b: &Wavefunction1D, exchange: Exchange) -> Result<Self> {
        let ab = Self::product(a, b)?;
        let ba = Self::product(b, a)?;
        let s = exchange.sign();
        let amplitudes = ab.amplitudes.iter().zip(&ba.amplitudes).map(|(x, y)| x + s * y).collect();
        let mut psi = Wavefunction2D { grid: ab.grid, amplitudes };
        psi.normalize();
        Ok(psi)
    }

    pub fn n(&self) -> usize {
        self.grid.n_points()
    }

    pub fn at(&self, ia: usize, ib: usize) -> Complex64 {
        self.amplitudes[ia * self.n() + ib]
    }

    pub fn norm_sq(&self) -> f64 {
        let dx = self.grid.dx();
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx * dx
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sq().sqrt();
        if n > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
    }

    pub fn exchange_expectation(&self) -> f64 {
        exchange_expectation_raw(&self.amplitudes, self.n()) / norm_raw(&self.amplitudes)
    }

    pub fn parity_expectation(&self) -> f64 {
        let n = self.n();
        let len = n * n;
        let s: f64 = (0..len)
            .map(|k| (self.amplitudes[k].conj() * self.amplitudes[len - 1 - k]).re)
            .sum();
        s / norm_raw(&self.amplitudes)
    }

    pub fn label(&self) -> SymmetryLabel {
        SymmetryLabel::classify(Some(self.exchange_expectation()), self.parity_expectation())
    }

    /// Probability weight in `x_a x_b > 0` (same well) and `x_a x_b < 0`
    /// (opposite wells); cells on either axis are split evenly.
    pub fn well_populations(&self) -> (f64, f64) {
        let g = self.grid;
        let n = self.n();
        let (mut same, mut opposite) = (0.0, 0.0);
        for i in 0..n {
            let xa = g.x(i);
            for j in 0..n {
                let p = self.amplitudes[i * n + j].norm_sqr();
                let s = xa * g.x(j);
                if s > 0.0 {
                    same += p;
                } else if s < 0.0 {
                    opposite += p;
                } else {
                    same += 0.5 * p;
                    opposite += 0.5 * p;
                }
            }
        }
        let dx2 = g.dx() * g.dx();
        (same * dx2, opposite * dx2)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm()).collect()
    }
}

pub(crate) fn norm_raw(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

pub(crate) fn exchange_expectation_raw(v: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (v[i * n + j].conj() * v[j * n + i]).re;
        }
    }
    s
}

/// Swaps the roles of the two atoms: `ψ(x_a, x_b) → ψ(x_b, x_a)`.
pub fn exchange_apply(psi: &Wavefunction2D) -> Wavefunction2D {
    let n = psi.n();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = psi.amplitudes[i * n + j];
        }
    }
    Wavefunction2D { grid: psi.grid, amplitudes: out }
}

/// Spatial reflection `x → -x`, applied to every coordinate.
pub trait ParityApply: Sized {
    fn parity_apply(&self) -> Result<Self>;
}

impl ParityApply for Wavefunction1D {
    fn parity_apply(&self) -> Result<Self> {
        self.parity_applied()
    }
}

impl ParityApply for Wavefunction2D {
    fn parity_apply(&self) -> Result<Self> {
        self.grid.check_symmetric()?;
        // (i, j) -> (n-1-i, n-1-j) is a reversal of the flat row-major buffer.
        let mut amplitudes = self.amplitudes.clone();
        amplitudes.reverse();
        Ok(Wavefunction2D { grid: self.grid, amplitudes })
    }
}

pub fn parity_apply<W: ParityApply>(psi: &W) -> Result<W> {
    psi.parity_apply()
}

/// Discrete inner product `⟨a|b⟩ = Σ conj(a) b dx²`.
pub fn overlap(a: &Wavefunction2D, b: &Wavefunction2D) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let s: Complex64 = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum();
    let dx = a.grid.dx();
    Ok(s * dx * dx)
}
