//! Browser bindings: a steppable density solver, a steppable particle system
//! and a kernel profile, for the static page in `www/`.

use multiscale::fvm::{init_density, FragScheme, FvSolver, Scale};
use multiscale::micro::{
    adaptive_dt_micro, compute_drift, init_ensemble, max_drift, step_division, step_growth, step_transport, BetaRate,
    RngStream,
};
use multiscale::observables::{size_marginal, spatial_marginal};
use multiscale::{Amplitude, DensityField, KernelSpec, ParticleEnsemble, Preset, SimConfig};
use wasm_bindgen::prelude::*;

/// Steps beyond this per call are left for the next call so the page stays responsive.
const MAX_STEPS_PER_CALL: usize = 5_000;

fn demo_config(preset: &str, half_width: f64, nx: usize, nr: usize, eps: f64) -> Result<SimConfig, String> {
    let preset: Preset = preset.parse().map_err(|e: multiscale::experiment::UnknownPreset| e.to_string())?;
    let config = SimConfig { x_min: -half_width, x_max: half_width, nx, nr, eps, ..preset.config() };
    let v = config.validate();
    if v.is_empty() {
        Ok(config)
    } else {
        Err(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "))
    }
}

/// Meso or macro density on a square grid.
#[wasm_bindgen]
pub struct FvSim {
    solver: FvSolver,
    field: DensityField,
}

#[wasm_bindgen]
impl FvSim {
    /// `scale` is `"meso"` or `"macro"`.
    #[wasm_bindgen(constructor)]
    pub fn new(scale: &str, preset: &str, half_width: f64, nx: usize, nr: usize, eps: f64) -> Result<FvSim, String> {
        let config = demo_config(preset, half_width, nx, nr, eps)?;
        let scale = match scale {
            "meso" => Scale::Meso,
            "macro" => Scale::Macro,
            other => return Err(format!("unknown scale `{other}`")),
        };
        let solver =
            FvSolver::new(&config, scale, Amplitude::Linear, FragScheme::default()).map_err(|e| e.to_string())?;
        let field = init_density(&config, &solver.grid).map_err(|e| e.to_string())?;
        Ok(FvSim { solver, field })
    }

    /// Advances to time `t` (or by at most the step budget); returns the steps taken.
    pub fn advance_to(&mut self, t: f64) -> Result<usize, String> {
        let mut steps = 0;
        while self.field.time < t && steps < MAX_STEPS_PER_CALL {
            let remaining = t - self.field.time;
            let dt = self.solver.step(&mut self.field, remaining).map_err(|e| e.to_string())?;
            if dt >= remaining {
                self.field.time = t;
            }
            steps += 1;
        }
        Ok(steps)
    }

    pub fn time(&self) -> f64 {
        self.field.time
    }

    pub fn mass(&self) -> f64 {
        self.field.mass()
    }

    pub fn nx(&self) -> usize {
        self.solver.grid.nx
    }

    /// Row-major `ny x nx` spatial density.
    pub fn spatial(&self) -> Vec<f64> {
        spatial_marginal(&self.field)
    }

    /// Mass per radius bin.
    pub fn size(&self) -> Vec<f64> {
        size_marginal(&self.field)
    }

    pub fn radii(&self) -> Vec<f64> {
        self.solver.grid.radii()
    }
}

/// One realisation of the particle system.
#[wasm_bindgen]
pub struct MicroSim {
    config: SimConfig,
    spec: KernelSpec,
    rate: BetaRate,
    rng: RngStream,
    ensemble: ParticleEnsemble,
    cap: usize,
}

#[wasm_bindgen]
impl MicroSim {
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str, n0: usize, seed: u64, half_width: f64, cap: usize) -> Result<MicroSim, String> {
        let mut config = demo_config(preset, half_width, 100, 16, 1.0)?;
        config.n0 = n0.max(1);
        config.seed = seed;
        let mut rng = RngStream::new(seed, 0);
        let ensemble = init_ensemble(&config, &mut rng);
        let spec = KernelSpec::from_config(&config).map_err(|e| e.to_string())?;
        Ok(MicroSim { rate: BetaRate::from_config(&config), spec, rng, ensemble, config, cap })
    }

    /// Advances to time `t`, stopping early at the particle cap or the step budget.
    pub fn advance_to(&mut self, t: f64) -> usize {
        let mut steps = 0;
        while self.ensemble.time < t && steps < MAX_STEPS_PER_CALL && !self.capped() {
            let drift = compute_drift(&self.ensemble, &self.spec, self.config.n0);
            let remaining = t - self.ensemble.time;
            let dt = adaptive_dt_micro(max_drift(&drift), &self.config).min(remaining);
            let c = &self.config;
            step_transport(&mut self.ensemble, &drift, dt, c.diffusion_d, &mut self.rng);
            step_growth(&mut self.ensemble, dt, c.growth_g, c.r_max);
            step_division(&mut self.ensemble, dt, &mut self.rng, &self.rate, c.alpha);
            self.ensemble.time = if dt >= remaining { t } else { self.ensemble.time + dt };
            steps += 1;
        }
        steps
    }

    pub fn capped(&self) -> bool {
        self.ensemble.len() > self.cap
    }

    pub fn time(&self) -> f64 {
        self.ensemble.time
    }

    pub fn count(&self) -> usize {
        self.ensemble.len()
    }

    /// Flat `[x0, y0, r0, x1, y1, r1, …]`.
    pub fn particles(&self) -> Vec<f64> {
        self.ensemble.positions.iter().zip(&self.ensemble.radii).flat_map(|(p, &r)| [p[0], p[1], r]).collect()
    }
}

/// `K_ε(r, s, (x, 0))` at `n` evenly spaced `x` in `[-extent, extent]`.
#[wasm_bindgen]
pub fn kernel_profile(r: f64, s: f64, eps: f64, extent: f64, n: usize) -> Result<Vec<f64>, String> {
    let spec = KernelSpec::new(Amplitude::Linear, eps).map_err(|e| e.to_string())?;
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let x = -extent + 2.0 * extent * i as f64 / (n - 1) as f64;
            spec.eval_eps(r, s, [x, 0.0]).map_err(|e| e.to_string())
        })
        .collect()
}
