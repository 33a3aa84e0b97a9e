//! Upwind finite-volume scheme shared by the nonlocal (meso) and local (macro) models.
//!
//! ```text
//! dū/dt = -(F^x_{i+1/2} - F^x_{i-1/2})/dx - (F^y_{j+1/2} - F^y_{j-1/2})/dy
//!         -(G_{k+1/2} - G_{k-1/2})/dr + gain_k - β(r_k) ū_k
//! ```
//!
//! advanced by forward Euler under an adaptive CFL step. The two models differ
//! only in how the potential `ξ` is computed.

use std::f64::consts::SQRT_2;

use crate::domain::{build_grid, DensityField, DiagnosticsRecord, Grid3, SimConfig};
use crate::error::{DomainError, FvError};
use crate::kernel::{build_stencil, xi_macro, xi_meso, Amplitude, ConvolutionStencil, KernelSpec};
use crate::micro::BetaRate;
use crate::observables;

/// Cells below this value after a step are a CFL violation.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

/// Discretisation of the division gain term `2^{3/2} β(√2 r) u(√2 r)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FragScheme {
    /// Each donor bin `m` sends `2 β(r_m) ū_m` to the bins `k` whose stretched
    /// interval `[√2 r_{k-1/2}, √2 r_{k+1/2}]` overlaps it, in proportion to the
    /// overlap. Discrete mass production equals `Σ β ū` exactly.
    #[default]
    Overlap,
    /// Bin `k` takes `2^{3/2} β(r_k̃) ū_k̃` from the single bin `k̃` holding `√2 r_k`.
    SingleBin,
}

/// Radial index maps for the gain term.
#[derive(Clone, Debug, PartialEq)]
pub struct FragMap {
    /// `k̃` per bin, `None` when `√2 r_k > r_max`.
    pub targets: Vec<Option<usize>>,
    /// Per receiving bin `k`: `(donor m, fraction of m's daughters landing in k)`.
    pub overlaps: Vec<Vec<(usize, f64)>>,
}

impl FragMap {
    pub fn new(grid: &Grid3) -> Self {
        let nr = grid.nr;
        let edge = |k: usize| grid.r_min + k as f64 * grid.dr;
        let targets = (0..nr)
            .map(|k| {
                let s = SQRT_2 * grid.r(k);
                (s <= grid.r_max).then(|| grid.locate_r(s)).flatten()
            })
            .collect();
        // raw[k][m] = |[√2 e_k, √2 e_{k+1}] ∩ [e_m, e_{m+1}]|
        let mut raw = vec![vec![0.0; nr]; nr];
        let mut cover = vec![0.0; nr];
        for (k, row) in raw.iter_mut().enumerate() {
            let (lo, hi) = (SQRT_2 * edge(k), SQRT_2 * edge(k + 1));
            for (m, cell) in row.iter_mut().enumerate() {
                let ov = (hi.min(edge(m + 1)) - lo.max(edge(m))).max(0.0);
                *cell = ov;
                cover[m] += ov;
            }
        }
        let overlaps = raw
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(m, &ov)| ov > 0.0 && cover[m] > 0.0)
                    .map(|(m, &ov)| (m, ov / cover[m]))
                    .collect()
            })
            .collect();
        Self { targets, overlaps }
    }
}

/// Face velocities `v = -Δξ/Δx`. Entry `idx(i,j,k)` of `vx` holds the face
/// `i+1/2`; the last face of each row is the boundary and is zero. Same for `vy` in `j`.
pub fn velocities(xi: &[f64], grid: &Grid3) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny, nr) = (grid.nx, grid.ny, grid.nr);
    let mut vx = vec![0.0; grid.len()];
    let mut vy = vec![0.0; grid.len()];
    for k in 0..nr {
        for j in 0..ny {
            for i in 0..nx {
                let n = grid.index(i, j, k);
                if i + 1 < nx {
                    vx[n] = -(xi[n + 1] - xi[n]) / grid.dx;
                }
                if j + 1 < ny {
                    vy[n] = -(xi[n + nx] - xi[n]) / grid.dy;
                }
            }
        }
    }
    (vx, vy)
}

/// Interface fluxes. `fx[idx(i,j,k)]` is `F^x_{i+1/2}`, `fy` is `F^y_{j+1/2}`
/// and `g` is `G_{k+1/2}`; boundary faces are zero and the low-side boundary
/// faces are implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub g: Vec<f64>,
}

pub fn upwind_fluxes(field: &DensityField, vx: &[f64], vy: &[f64], diffusion: f64, growth: f64) -> FluxField {
    let g = &field.grid;
    let u = &field.values;
    let (nx, ny, nr) = (g.nx, g.ny, g.nr);
    let n2 = g.slice_len();
    let mut fx = vec![0.0; g.len()];
    let mut fy = vec![0.0; g.len()];
    let mut fg = vec![0.0; g.len()];
    for k in 0..nr {
        for j in 0..ny {
            for i in 0..nx {
                let n = g.index(i, j, k);
                if i + 1 < nx {
                    let v = vx[n];
                    fx[n] = u[n] * v.max(0.0) + u[n + 1] * v.min(0.0) - diffusion * (u[n + 1] - u[n]) / g.dx;
                }
                if j + 1 < ny {
                    let v = vy[n];
                    fy[n] = u[n] * v.max(0.0) + u[n + nx] * v.min(0.0) - diffusion * (u[n + nx] - u[n]) / g.dy;
                }
                if k + 1 < nr {
                    fg[n] = growth * u[n];
                }
            }
        }
    }
    let _ = n2;
    FluxField { fx, fy, g: fg }
}

/// Division source `gain − β(r_k) ū_k` per cell.
pub fn frag_source(field: &DensityField, map: &FragMap, rate: &BetaRate, scheme: FragScheme) -> Vec<f64> {
    let g = &field.grid;
    let n2 = g.slice_len();
    let mut out = vec![0.0; g.len()];
    if rate.beta_bar == 0.0 {
        return out;
    }
    let beta: Vec<f64> = (0..g.nr).map(|k| rate.finite(g.r(k))).collect();
    for k in 0..g.nr {
        let dst = &mut out[k * n2..(k + 1) * n2];
        let own = field.slice(k);
        if beta[k] != 0.0 {
            for (d, &u) in dst.iter_mut().zip(own) {
                *d -= beta[k] * u;
            }
        }
        match scheme {
            FragScheme::SingleBin => {
                if let Some(t) = map.targets[k] {
                    let w = 2f64.powf(1.5) * beta[t];
                    if w != 0.0 {
                        for (d, &u) in dst.iter_mut().zip(field.slice(t)) {
                            *d += w * u;
                        }
                    }
                }
            }
            FragScheme::Overlap => {
                for &(m, frac) in &map.overlaps[k] {
                    let w = 2.0 * frac * beta[m];
                    if w != 0.0 {
                        for (d, &u) in dst.iter_mut().zip(field.slice(m)) {
                            *d += w * u;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Physical coefficients of the scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct FvParams {
    pub diffusion: f64,
    pub growth: f64,
    pub rate: BetaRate,
    pub map: FragMap,
    pub scheme: FragScheme,
    pub cfl_safety: f64,
    pub fallback_dt: f64,
}

impl FvParams {
    pub fn from_config(config: &SimConfig, grid: &Grid3) -> Self {
        Self {
            diffusion: config.diffusion_d,
            growth: config.growth_g,
            rate: BetaRate::from_config(config),
            map: FragMap::new(grid),
            scheme: FragScheme::default(),
            cfl_safety: config.cfl_safety,
            fallback_dt: config.t_final / 1000.0,
        }
    }
}

/// Semi-discrete right-hand side for a given potential.
pub fn rhs(field: &DensityField, xi: &[f64], params: &FvParams) -> Result<Vec<f64>, FvError> {
    if !field.is_finite() || xi.iter().any(|v| !v.is_finite()) {
        return Err(FvError::NonFinite);
    }
    let (vx, vy) = velocities(xi, &field.grid);
    Ok(rhs_from_velocities(field, &vx, &vy, params))
}

fn rhs_from_velocities(field: &DensityField, vx: &[f64], vy: &[f64], params: &FvParams) -> Vec<f64> {
    let g = &field.grid;
    let (nx, ny, nr) = (g.nx, g.ny, g.nr);
    let n2 = g.slice_len();
    let flux = upwind_fluxes(field, vx, vy, params.diffusion, params.growth);
    let mut out = frag_source(field, &params.map, &params.rate, params.scheme);
    for k in 0..nr {
        for j in 0..ny {
            for i in 0..nx {
                let n = g.index(i, j, k);
                let west = if i > 0 { flux.fx[n - 1] } else { 0.0 };
                let south = if j > 0 { flux.fy[n - nx] } else { 0.0 };
                let below = if k > 0 { flux.g[n - n2] } else { 0.0 };
                out[n] -= (flux.fx[n] - west) / g.dx + (flux.fy[n] - south) / g.dy + (flux.g[n] - below) / g.dr;
            }
        }
    }
    out
}

/// CFL-limited step `min(c·min(dx,dy)/‖v‖∞, c·dx·dy/(2D), c·dr/‖β‖₁, c·dr/(2g))`,
/// dropping candidates with a zero denominator, further capped by [`positivity_dt`].
pub fn cfl_dt(vx: &[f64], vy: &[f64], grid: &Grid3, params: &FvParams) -> f64 {
    let c = params.cfl_safety;
    let vmax = vx.iter().chain(vy).fold(0.0f64, |m, v| m.max(v.abs()));
    let beta = params.rate.l1_norm();
    let candidates = [
        (vmax, c * grid.dx.min(grid.dy) / vmax),
        (params.diffusion, c * grid.dx * grid.dy / (2.0 * params.diffusion)),
        (beta, c * grid.dr / beta),
        (params.growth, c * grid.dr / (2.0 * params.growth)),
    ];
    let dt = candidates.iter().filter(|(den, _)| *den > 0.0).map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let dt = if dt.is_finite() { dt } else { params.fallback_dt };
    dt.min(positivity_dt(vx, vy, grid, params))
}

/// Largest step keeping every cell's explicit update a convex combination:
/// `1 / max_cell(outflow rate)`, counting upwind outflow through all six faces
/// and the division loss.
pub fn positivity_dt(vx: &[f64], vy: &[f64], grid: &Grid3, params: &FvParams) -> f64 {
    let (nx, ny, nr) = (grid.nx, grid.ny, grid.nr);
    let diff = 2.0 * params.diffusion * (1.0 / (grid.dx * grid.dx) + 1.0 / (grid.dy * grid.dy));
    let mut worst = 0.0f64;
    for k in 0..nr {
        let base = diff + params.growth / grid.dr + params.rate.finite(grid.r(k));
        for j in 0..ny {
            for i in 0..nx {
                let n = grid.index(i, j, k);
                let mut out = vx[n].max(0.0) / grid.dx + vy[n].max(0.0) / grid.dy;
                if i > 0 {
                    out += (-vx[n - 1]).max(0.0) / grid.dx;
                }
                if j > 0 {
                    out += (-vy[n - nx]).max(0.0) / grid.dy;
                }
                worst = worst.max(base + out);
            }
        }
    }
    if worst > 0.0 {
        1.0 / worst
    } else {
        f64::INFINITY
    }
}

/// Applies `ū ← ū + Δt·rhs`, clipping round-off negatives and rejecting real ones.
pub fn apply_update(field: &mut DensityField, rate: &[f64], dt: f64) -> Result<(), FvError> {
    for (n, (u, r)) in field.values.iter_mut().zip(rate).enumerate() {
        let v = *u + dt * r;
        if v < -NEGATIVITY_TOLERANCE {
            return Err(FvError::Negative { index: n, value: v, time: field.time + dt });
        }
        *u = v.max(0.0);
    }
    field.time += dt;
    Ok(())
}

/// Initial density: uniform in size on the ball of radius `S`, rescaled to unit discrete mass.
/// When the ball covers no cell center, the spatial cell containing the domain
/// center carries all the mass.
pub fn init_density(config: &SimConfig, grid: &Grid3) -> Result<DensityField, FvError> {
    let c = config.center();
    let s = config.init_support_s;
    let u0 = 1.0 / (std::f64::consts::PI * s * s * (config.r_max - config.r_min));
    let mut field = DensityField::zeros(grid.clone());
    let mut cols = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if (grid.x(i) - c[0]).hypot(grid.y(j) - c[1]) <= s {
                cols.push((i, j));
            }
        }
    }
    if cols.is_empty() {
        match (grid.locate_x(c[0]), grid.locate_y(c[1])) {
            (Some(i), Some(j)) => cols.push((i, j)),
            _ => return Err(FvError::EmptySupport),
        }
    }
    for k in 0..grid.nr {
        for &(i, j) in &cols {
            *field.at_mut(i, j, k) = u0;
        }
    }
    let m = field.mass();
    field.values.iter_mut().for_each(|v| *v /= m);
    Ok(field)
}

/// How `ξ` is obtained from the density.
#[derive(Clone, Debug)]
pub enum Interaction {
    /// Nonlocal convolution with the `K_ε` stencil.
    Meso(Box<ConvolutionStencil>),
    /// Local coupling through `Γ`.
    Macro(KernelSpec),
}

impl Interaction {
    pub fn xi(&self, field: &DensityField) -> Result<Vec<f64>, FvError> {
        match self {
            Interaction::Meso(st) => Ok(xi_meso(field, st)?),
            Interaction::Macro(spec) => Ok(xi_macro(field, spec)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Meso,
    Macro,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FvOptions {
    /// Increasing snapshot times; the last one ends the run.
    pub output_times: Vec<f64>,
    pub amplitude: Amplitude,
    pub scheme: FragScheme,
    /// Record diagnostics before every step, not only at output times.
    pub record_every_step: bool,
}

impl FvOptions {
    pub fn new(output_times: Vec<f64>) -> Self {
        Self { output_times, amplitude: Amplitude::Linear, scheme: FragScheme::default(), record_every_step: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FvRun {
    pub snapshots: Vec<DensityField>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub steps: usize,
}

/// A configured solver: grid, coefficients and the ξ provider.
#[derive(Clone, Debug)]
pub struct FvSolver {
    pub grid: Grid3,
    pub params: FvParams,
    pub interaction: Interaction,
}

impl FvSolver {
    pub fn new(config: &SimConfig, scale: Scale, amplitude: Amplitude, scheme: FragScheme) -> Result<Self, FvError> {
        let violations = config.validate();
        if !violations.is_empty() {
            let msg = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
            return Err(DomainError::Invalid(msg).into());
        }
        let grid = build_grid(config)?;
        let spec = KernelSpec::new(amplitude, config.eps)?;
        let interaction = match scale {
            Scale::Meso => Interaction::Meso(Box::new(build_stencil(&grid, &spec))),
            Scale::Macro => Interaction::Macro(spec),
        };
        let mut params = FvParams::from_config(config, &grid);
        params.scheme = scheme;
        Ok(Self { grid, params, interaction })
    }

    /// One forward-Euler step of at most `max_dt`, using a potential `xi`
    /// already computed from `field`. Returns the step taken.
    pub fn step_with(&self, field: &mut DensityField, xi: &[f64], max_dt: f64) -> Result<f64, FvError> {
        if !field.is_finite() || xi.iter().any(|v| !v.is_finite()) {
            return Err(FvError::NonFinite);
        }
        let (vx, vy) = velocities(xi, &self.grid);
        let dt = cfl_dt(&vx, &vy, &self.grid, &self.params).min(max_dt);
        let rate = rhs_from_velocities(field, &vx, &vy, &self.params);
        apply_update(field, &rate, dt)?;
        Ok(dt)
    }

    pub fn step(&self, field: &mut DensityField, max_dt: f64) -> Result<f64, FvError> {
        let xi = self.interaction.xi(field)?;
        self.step_with(field, &xi, max_dt)
    }

    pub fn diagnostics(&self, field: &DensityField, xi: &[f64]) -> DiagnosticsRecord {
        DiagnosticsRecord {
            time: field.time,
            total_mass: field.mass(),
            particle_count: None,
            shannon_entropy: observables::shannon_entropy(field),
            rao_functional: observables::rao_functional(field, xi),
            second_moment: observables::second_moment_field(field, self.grid.center()),
            ..Default::default()
        }
    }

    /// Integrates from `field` through every output time.
    pub fn run(&self, mut field: DensityField, options: &FvOptions) -> Result<FvRun, FvError> {
        let mut out = FvRun { snapshots: Vec::new(), diagnostics: Vec::new(), steps: 0 };
        let mut next = 0;
        loop {
            let xi = self.interaction.xi(&field)?;
            let mut at_output = false;
            while next < options.output_times.len() && options.output_times[next] <= field.time {
                at_output = true;
                out.snapshots.push(field.clone());
                next += 1;
            }
            if at_output || options.record_every_step {
                out.diagnostics.push(self.diagnostics(&field, &xi));
            }
            let Some(&target) = options.output_times.get(next) else { break };
            let remaining = target - field.time;
            let dt = self.step_with(&mut field, &xi, remaining)?;
            if dt >= remaining {
                field.time = target;
            }
            out.steps += 1;
        }
        Ok(out)
    }
}

fn run_scale(config: &SimConfig, options: &FvOptions, scale: Scale) -> Result<FvRun, FvError> {
    let solver = FvSolver::new(config, scale, options.amplitude, options.scheme)?;
    let field = init_density(config, &solver.grid)?;
    solver.run(field, options)
}

/// Nonlocal model with `ξ` from the `K_ε` convolution.
pub fn run_meso(config: &SimConfig, options: &FvOptions) -> Result<FvRun, FvError> {
    run_scale(config, options, Scale::Meso)
}

/// Local model with `ξ = dr Σ Γ ū`.
pub fn run_macro(config: &SimConfig, options: &FvOptions) -> Result<FvRun, FvError> {
    run_scale(config, options, Scale::Macro)
}
