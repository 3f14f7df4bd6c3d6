//! Warped product specification and initial-data families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil::{Grid1, Grid2};

/// Round sphere fiber `S^n` with Einstein constant `mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub n: usize,
    pub mu: f64,
}

impl FiberSpec {
    pub fn new(n: usize, mu: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!("fiber dimension {n} violates n_a ≥ 2")));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidConfig(format!("Einstein constant {mu} violates mu_a ≥ 0")));
        }
        Ok(Self { n, mu })
    }

    /// Unit round sphere, `mu = n - 1`.
    pub fn unit(n: usize) -> Self {
        Self { n, mu: (n - 1) as f64 }
    }

    /// Sectional curvature of the fiber metric.
    pub fn lambda_hat(&self) -> f64 {
        self.mu / (self.n - 1) as f64
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseKind {
    CircleS1,
    TorusT2,
}

impl BaseKind {
    pub fn dim(self) -> usize {
        match self {
            BaseKind::CircleS1 => 1,
            BaseKind::TorusT2 => 2,
        }
    }
}

/// Initial profile of a base scalar. The phase argument is `k·x`; on S¹ only `k[0]` is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Constant(f64),
    Cosine { a: f64, b: f64, k: [f64; 2] },
    Sine { a: f64, b: f64, k: [f64; 2] },
    /// `a + b sin(k₀x) cos(k₁y)`
    SinCos { a: f64, b: f64, k: [f64; 2] },
    Table(Vec<f64>),
}

impl Profile {
    pub fn at(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            Profile::Constant(c) => Some(*c),
            Profile::Cosine { a, b, k } => Some(a + b * (k[0] * x + k[1] * y).cos()),
            Profile::Sine { a, b, k } => Some(a + b * (k[0] * x + k[1] * y).sin()),
            Profile::SinCos { a, b, k } => Some(a + b * (k[0] * x).sin() * (k[1] * y).cos()),
            Profile::Table(_) => None,
        }
    }

    pub fn sample1(&self, grid: &Grid1) -> Result<Vec<f64>> {
        match self {
            Profile::Table(t) if t.len() == grid.m => Ok(t.clone()),
            Profile::Table(t) => Err(Error::InvalidConfig(format!(
                "table has {} entries, grid has {}",
                t.len(),
                grid.m
            ))),
            p => Ok((0..grid.m).map(|i| p.at(grid.coord(i), 0.0).unwrap()).collect()),
        }
    }

    pub fn sample2(&self, grid: &Grid2) -> Result<Vec<f64>> {
        match self {
            Profile::Table(t) if t.len() == grid.len() => Ok(t.clone()),
            Profile::Table(t) => Err(Error::InvalidConfig(format!(
                "table has {} entries, grid has {}",
                t.len(),
                grid.len()
            ))),
            p => Ok((0..grid.len())
                .map(|k| {
                    let (x, y) = grid.coord(k);
                    p.at(x, y).unwrap()
                })
                .collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpedProductSpec {
    pub base: BaseKind,
    pub fibers: Vec<FiberSpec>,
    pub initial_warpings: Vec<Profile>,
}

impl WarpedProductSpec {
    pub fn new(base: BaseKind, fibers: Vec<FiberSpec>, initial_warpings: Vec<Profile>) -> Result<Self> {
        if fibers.is_empty() {
            return Err(Error::InvalidConfig("at least one fiber is required".into()));
        }
        if fibers.len() != initial_warpings.len() {
            return Err(Error::InvalidConfig(format!(
                "{} fibers but {} initial warpings",
                fibers.len(),
                initial_warpings.len()
            )));
        }
        for f in &fibers {
            FiberSpec::new(f.n, f.mu)?;
        }
        Ok(Self { base, fibers, initial_warpings })
    }

    /// Total dimension `N = dim(base) + Σ nₐ`.
    pub fn total_dim(&self) -> usize {
        self.base.dim() + self.fibers.iter().map(|f| f.n).sum::<usize>()
    }
}
