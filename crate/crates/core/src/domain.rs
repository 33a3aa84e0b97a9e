//! Configuration, grids and the state types shared by every solver.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// Every physical and numerical parameter of a run.
///
/// Defaults are the reference parameter set (domain `[-50, 50]^2`, radii in
/// `[0.2, 1]`, `D = 0.01`, `g = 0.008`, maximal division rate `0.05`,
/// `alpha = 0.1`, `T = 100`, initial support `S = 2`) together with the grid
/// and solver controls that the reference set leaves open.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub n0: usize,
    pub diffusion_d: f64,
    pub growth_g: f64,
    pub beta_bar: f64,
    pub alpha: f64,
    pub t_final: f64,
    pub init_support_s: f64,
    pub eps: f64,
    pub nx: usize,
    pub nr: usize,
    pub delta_micro: f64,
    pub cfl_safety: f64,
    pub seed: u64,
    pub n_runs: usize,
    pub dim: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            x_min: -50.0,
            x_max: 50.0,
            r_min: 0.2,
            r_max: 1.0,
            n0: 2000,
            diffusion_d: 0.01,
            growth_g: 0.008,
            beta_bar: 0.05,
            alpha: 0.1,
            t_final: 100.0,
            init_support_s: 2.0,
            eps: 1.0,
            nx: 100,
            nr: 16,
            delta_micro: 0.02,
            cfl_safety: 0.4,
            seed: 42,
            n_runs: 6,
            dim: 2,
        }
    }
}

/// One failed configuration invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl SimConfig {
    /// Names of all fields, in file order.
    pub const FIELDS: [&'static str; 19] = [
        "x_min",
        "x_max",
        "r_min",
        "r_max",
        "n0",
        "diffusion_d",
        "growth_g",
        "beta_bar",
        "alpha",
        "t_final",
        "init_support_s",
        "eps",
        "nx",
        "nr",
        "delta_micro",
        "cfl_safety",
        "seed",
        "n_runs",
        "dim",
    ];

    /// Center of the square domain (both axes share the bounds).
    pub fn center(&self) -> [f64; 2] {
        let c = 0.5 * (self.x_min + self.x_max);
        [c, c]
    }

    /// Checks every invariant and reports all violations; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &'static str, message: String| out.push(Violation { field, message });

        let finite = [
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("r_min", self.r_min),
            ("r_max", self.r_max),
            ("diffusion_d", self.diffusion_d),
            ("growth_g", self.growth_g),
            ("beta_bar", self.beta_bar),
            ("alpha", self.alpha),
            ("t_final", self.t_final),
            ("init_support_s", self.init_support_s),
            ("eps", self.eps),
            ("delta_micro", self.delta_micro),
            ("cfl_safety", self.cfl_safety),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                bad(name, format!("must be finite, got {v}"));
            }
        }

        if !(self.x_min < self.x_max) {
            bad("x_min", format!("x_min ({}) must be < x_max ({})", self.x_min, self.x_max));
        }
        if !(self.r_min > 0.0) {
            bad("r_min", format!("r_min must be > 0, got {}", self.r_min));
        }
        if !(self.r_min < self.r_max) {
            bad("r_max", format!("r_min ({}) must be < r_max ({})", self.r_min, self.r_max));
        }
        if self.n0 < 1 {
            bad("n0", "n0 must be >= 1".into());
        }
        if !(self.diffusion_d >= 0.0) {
            bad("diffusion_d", format!("must be >= 0, got {}", self.diffusion_d));
        }
        if !(self.growth_g >= 0.0) {
            bad("growth_g", format!("must be >= 0, got {}", self.growth_g));
        }
        if !(self.beta_bar >= 0.0) {
            bad("beta_bar", format!("must be >= 0, got {}", self.beta_bar));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            bad("alpha", format!("must satisfy 0 <= alpha < 1, got {}", self.alpha));
        }
        if !(self.t_final > 0.0) {
            bad("t_final", format!("must be > 0, got {}", self.t_final));
        }
        if !(self.eps > 0.0) {
            bad("eps", format!("must be > 0, got {}", self.eps));
        }
        if self.nx < 2 {
            bad("nx", format!("must be >= 2, got {}", self.nx));
        }
        if self.nr < 2 {
            bad("nr", format!("must be >= 2, got {}", self.nr));
        }
        if !(self.delta_micro > 0.0) {
            bad("delta_micro", format!("must be > 0, got {}", self.delta_micro));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            bad("cfl_safety", format!("must lie in (0, 1], got {}", self.cfl_safety));
        }
        if self.n_runs < 1 {
            bad("n_runs", "n_runs must be >= 1".into());
        }
        if self.dim != 2 {
            bad("dim", format!("solvers support dim = 2 only, got {}", self.dim));
        }
        if !(self.init_support_s > 0.0) {
            bad("init_support_s", format!("must be > 0, got {}", self.init_support_s));
        } else if self.init_support_s > 0.5 * (self.x_max - self.x_min) {
            bad(
                "init_support_s",
                format!(
                    "initial ball of radius {} does not fit in [{}, {}]",
                    self.init_support_s, self.x_min, self.x_max
                ),
            );
        }
        out
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), DomainError> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, DomainError> {
            value.trim().parse().map_err(|_| DomainError::BadValue { key: key.to_string(), value: value.to_string() })
        }
        match key {
            "x_min" => self.x_min = parse(key, value)?,
            "x_max" => self.x_max = parse(key, value)?,
            "r_min" => self.r_min = parse(key, value)?,
            "r_max" => self.r_max = parse(key, value)?,
            "n0" => self.n0 = parse(key, value)?,
            "diffusion_d" => self.diffusion_d = parse(key, value)?,
            "growth_g" => self.growth_g = parse(key, value)?,
            "beta_bar" => self.beta_bar = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "t_final" => self.t_final = parse(key, value)?,
            "init_support_s" => self.init_support_s = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "nx" => self.nx = parse(key, value)?,
            "nr" => self.nr = parse(key, value)?,
            "delta_micro" => self.delta_micro = parse(key, value)?,
            "cfl_safety" => self.cfl_safety = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "n_runs" => self.n_runs = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            _ => return Err(DomainError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Textual value of one field, using the shortest round-tripping form.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "x_min" => self.x_min.to_string(),
            "x_max" => self.x_max.to_string(),
            "r_min" => self.r_min.to_string(),
            "r_max" => self.r_max.to_string(),
            "n0" => self.n0.to_string(),
            "diffusion_d" => self.diffusion_d.to_string(),
            "growth_g" => self.growth_g.to_string(),
            "beta_bar" => self.beta_bar.to_string(),
            "alpha" => self.alpha.to_string(),
            "t_final" => self.t_final.to_string(),
            "init_support_s" => self.init_support_s.to_string(),
            "eps" => self.eps.to_string(),
            "nx" => self.nx.to_string(),
            "nr" => self.nr.to_string(),
            "delta_micro" => self.delta_micro.to_string(),
            "cfl_safety" => self.cfl_safety.to_string(),
            "seed" => self.seed.to_string(),
            "n_runs" => self.n_runs.to_string(),
            "dim" => self.dim.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment;
    /// blank lines are ignored; unknown keys are rejected.
    pub fn apply_text(&mut self, text: &str) -> Result<(), DomainError> {
        for (n, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or(DomainError::Syntax { line: n + 1, text: raw.to_string() })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Parses a full config file on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self, DomainError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Renders the config as `key = value` lines, parseable by [`SimConfig::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in Self::FIELDS {
            s.push_str(key);
            s.push_str(" = ");
            s.push_str(&self.get(key).expect("known field"));
            s.push('\n');
        }
        s
    }
}

/// Uniform cell-centered grid over `[x_min, x_max]^2 x [r_min, r_max]`.
///
/// Cell values are stored radius-slice-major: index `(k * ny + j) * nx + i`,
/// so every radius bin is one contiguous `nx * ny` image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub x_min: f64,
    pub x_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub nr: usize,
    pub dx: f64,
    pub dy: f64,
    pub dr: f64,
}

impl Grid3 {
    pub fn new(x_min: f64, x_max: f64, nx: usize, r_min: f64, r_max: f64, nr: usize) -> Result<Self, DomainError> {
        if nx < 2 {
            return Err(DomainError::GridTooSmall { axis: "nx", n: nx });
        }
        if nr < 2 {
            return Err(DomainError::GridTooSmall { axis: "nr", n: nr });
        }
        if !(x_min < x_max) || !(r_min < r_max) {
            return Err(DomainError::EmptyInterval);
        }
        let dx = (x_max - x_min) / nx as f64;
        Ok(Self { x_min, x_max, r_min, r_max, nx, ny: nx, nr, dx, dy: dx, dr: (r_max - r_min) / nr as f64 })
    }

    /// Spatial cell center along x (0-based index).
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dy
    }

    #[inline]
    pub fn r(&self, k: usize) -> f64 {
        self.r_min + (k as f64 + 0.5) * self.dr
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.nr).map(|k| self.r(k)).collect()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nr
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dr
    }

    pub fn center(&self) -> [f64; 2] {
        let c = 0.5 * (self.x_min + self.x_max);
        [c, c]
    }

    /// Half-open bin lookup on `[lo, lo + n*h)`, with the top bin closed on the right.
    fn locate(v: f64, lo: f64, h: f64, n: usize) -> Option<usize> {
        let hi = lo + n as f64 * h;
        if !(v >= lo && v <= hi) {
            return None;
        }
        let b = ((v - lo) / h).floor();
        Some((b as usize).min(n - 1))
    }

    pub fn locate_x(&self, x: f64) -> Option<usize> {
        Self::locate(x, self.x_min, self.dx, self.nx)
    }

    pub fn locate_y(&self, y: f64) -> Option<usize> {
        Self::locate(y, self.x_min, self.dy, self.ny)
    }

    pub fn locate_r(&self, r: f64) -> Option<usize> {
        Self::locate(r, self.r_min, self.dr, self.nr)
    }
}

/// Builds the solver grid described by `config`.
pub fn build_grid(config: &SimConfig) -> Result<Grid3, DomainError> {
    Grid3::new(config.x_min, config.x_max, config.nx, config.r_min, config.r_max, config.nr)
}

/// The microscopic state: one entry per living particle.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub time: f64,
    pub positions: Vec<[f64; 2]>,
    pub radii: Vec<f64>,
    pub ids: Vec<u64>,
    /// Id handed to the next daughter.
    pub next_id: u64,
}

impl ParticleEnsemble {
    pub fn new(time: f64, positions: Vec<[f64; 2]>, radii: Vec<f64>) -> Self {
        assert_eq!(positions.len(), radii.len(), "positions and radii must have one length");
        let n = radii.len() as u64;
        Self { time, positions, radii, ids: (0..n).collect(), next_id: n }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Sum of squared radii, the quantity preserved by a division in 2-D.
    pub fn sum_sq_radii(&self) -> f64 {
        self.radii.iter().map(|r| r * r).sum()
    }
}

/// Cell averages of a density over a [`Grid3`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub grid: Grid3,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn zeros(grid: Grid3) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], time: 0.0 }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize, k: usize) -> &mut f64 {
        let idx = self.grid.index(i, j, k);
        &mut self.values[idx]
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.slice_len();
        &self.values[k * n..(k + 1) * n]
    }

    /// Discrete mass `sum(u) * dx * dy * dr`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &DensityField) -> bool {
        self.grid == other.grid
    }
}

/// One row of a run's diagnostic time series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub total_mass: f64,
    /// Number of particles; only defined for microscopic runs.
    pub particle_count: Option<usize>,
    pub shannon_entropy: f64,
    pub rao_functional: f64,
    pub second_moment: f64,
    pub e_tot: Option<f64>,
    pub e_spatial: Option<f64>,
    pub e_size: Option<f64>,
}
