//! Stochastic particle simulator.
//!
//! Each time step applies, in order: Euler–Maruyama transport under the
//! pairwise repulsion and Brownian noise, clamped radial growth, and binary
//! division decided by rejection sampling against `1 - exp(-β(R) Δt)`.
//!
//! Random numbers come from one ChaCha8 stream per run, seeded with
//! `seed + run_index`, and are consumed in a fixed order:
//!
//! * initialisation, per particle: position radius, position angle, particle radius;
//! * transport, per particle: two standard normals (x then y), only when `D > 0`;
//! * division, per particle present at the start of the step: one uniform for the
//!   decision, then one uniform angle if it divides.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{build_grid, DensityField, DiagnosticsRecord, Grid3, ParticleEnsemble, SimConfig};
use crate::error::MicroError;
use crate::kernel::{build_stencil, Amplitude, KernelSpec};
use crate::observables;

/// Per-run random stream with a draw counter.
#[derive(Clone, Debug)]
pub struct RngStream {
    pub seed: u64,
    pub run_index: u64,
    pub draws: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, run_index: u64) -> Self {
        Self { seed, run_index, draws: 0, rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(run_index)) }
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.draws += 1;
        self.rng.sample(StandardNormal)
    }
}

/// Division rate at a given radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DivisionRate {
    Finite(f64),
    /// `r >= r_max`: the particle divides with probability one.
    Forced,
}

/// Piecewise-linear division rate: zero below `√2 r_min`, a ramp up to
/// `beta_bar` on `[√2 r_min, r_max)`, and forced division at `r_max`.
/// `beta_bar = 0` switches division off, forced division included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaRate {
    pub beta_bar: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl BetaRate {
    pub fn from_config(config: &SimConfig) -> Self {
        Self { beta_bar: config.beta_bar, r_min: config.r_min, r_max: config.r_max }
    }

    #[inline]
    fn ramp_start(&self) -> f64 {
        SQRT_2 * self.r_min
    }

    pub fn rate(&self, r: f64) -> DivisionRate {
        if r >= self.r_max && self.beta_bar > 0.0 {
            DivisionRate::Forced
        } else {
            DivisionRate::Finite(self.finite(r))
        }
    }

    /// The ramp value, for radii below `r_max`.
    #[inline]
    pub fn finite(&self, r: f64) -> f64 {
        let lo = self.ramp_start();
        if r < lo || self.r_max <= lo {
            0.0
        } else {
            self.beta_bar * (r - lo) / (self.r_max - lo)
        }
    }

    /// Integral of the finite ramp over `[√2 r_min, r_max]`.
    pub fn l1_norm(&self) -> f64 {
        let lo = self.ramp_start();
        if self.r_max <= lo {
            0.0
        } else {
            0.5 * self.beta_bar * (self.r_max - lo)
        }
    }
}

/// Draws the initial ensemble: `n0` particles uniform on the disk of radius `S`
/// at the domain center, radii uniform on `[r_min, r_max]`.
pub fn init_ensemble(config: &SimConfig, rng: &mut RngStream) -> ParticleEnsemble {
    let c = config.center();
    let mut positions = Vec::with_capacity(config.n0);
    let mut radii = Vec::with_capacity(config.n0);
    for _ in 0..config.n0 {
        let rho = config.init_support_s * rng.uniform().sqrt();
        let theta = 2.0 * PI * rng.uniform();
        positions.push([c[0] + rho * theta.cos(), c[1] + rho * theta.sin()]);
        radii.push(config.r_min + (config.r_max - config.r_min) * rng.uniform());
    }
    ParticleEnsemble::new(0.0, positions, radii)
}

/// Drift `-(1/N) Σ_j ∇ₓK_ε(R_i, R_j, X_i - X_j)` of every particle, by direct
/// pairwise summation. The self term vanishes.
pub fn compute_drift(ensemble: &ParticleEnsemble, spec: &KernelSpec, n_scale: usize) -> Vec<[f64; 2]> {
    let n = ensemble.len();
    let mut drift = vec![[0.0; 2]; n];
    if n == 0 || spec.is_zero() {
        return drift;
    }
    let eps2 = spec.eps * spec.eps;
    let xs: Vec<f64> = ensemble.positions.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = ensemble.positions.iter().map(|p| p[1]).collect();
    let r2: Vec<f64> = ensemble.radii.iter().map(|r| eps2 * r * r).collect();
    let amp: Vec<f64> = ensemble.radii.iter().map(|&r| spec.gamma(r)).collect();
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    for i in 0..n {
        let (xi, yi, ri2, ai) = (xs[i], ys[i], r2[i], amp[i]);
        let (mut ax, mut ay) = (0.0, 0.0);
        for j in i + 1..n {
            let dx = xi - xs[j];
            let dy = yi - ys[j];
            let inv_var = 1.0 / (ri2 + r2[j]);
            let arg = 0.5 * (dx * dx + dy * dy) * inv_var;
            if arg > 700.0 {
                continue;
            }
            // -∇K(x) = x / var · K(x)
            let f = ai * amp[j] * inv_var * inv_var * (-arg).exp();
            ax += f * dx;
            ay += f * dy;
            fx[j] -= f * dx;
            fy[j] -= f * dy;
        }
        fx[i] += ax;
        fy[i] += ay;
    }
    let scale = 1.0 / (2.0 * PI * n_scale as f64);
    for (d, (x, y)) in drift.iter_mut().zip(fx.iter().zip(&fy)) {
        *d = [x * scale, y * scale];
    }
    drift
}

/// Largest drift magnitude.
pub fn max_drift(drift: &[[f64; 2]]) -> f64 {
    drift.iter().map(|d| d[0].hypot(d[1])).fold(0.0, f64::max)
}

/// Adaptive step `min(δ/max|drift|, δ²/(4D), 0.1 r_min/‖β‖₁, 0.1 r_min/(2g))`;
/// candidates with a zero denominator are dropped, and `t_final/1000` is used
/// when all four are.
pub fn adaptive_dt_micro(max_drift: f64, config: &SimConfig) -> f64 {
    let beta = BetaRate::from_config(config);
    let candidates = [
        (max_drift, config.delta_micro / max_drift),
        (config.diffusion_d, config.delta_micro.powi(2) / (4.0 * config.diffusion_d)),
        (beta.l1_norm(), 0.1 * config.r_min / beta.l1_norm()),
        (config.growth_g, 0.1 * config.r_min / (2.0 * config.growth_g)),
    ];
    let dt = candidates.iter().filter(|(den, _)| *den > 0.0).map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    if dt.is_finite() {
        dt
    } else {
        config.t_final / 1000.0
    }
}

/// Euler–Maruyama position update with precomputed drifts.
pub fn step_transport(
    ensemble: &mut ParticleEnsemble,
    drift: &[[f64; 2]],
    dt: f64,
    diffusion: f64,
    rng: &mut RngStream,
) {
    let noise = (2.0 * diffusion * dt).sqrt();
    for (p, d) in ensemble.positions.iter_mut().zip(drift) {
        p[0] += dt * d[0];
        p[1] += dt * d[1];
        if diffusion > 0.0 {
            p[0] += noise * rng.normal();
            p[1] += noise * rng.normal();
        }
    }
}

/// `R ← min(r_max, R + g Δt)`.
pub fn step_growth(ensemble: &mut ParticleEnsemble, dt: f64, growth: f64, r_max: f64) {
    if growth == 0.0 {
        return;
    }
    for r in &mut ensemble.radii {
        *r = r_max.min(*r + dt * growth);
    }
}

/// Division pass over the particles present at the start of the call.
/// Returns the number of divisions.
pub fn step_division(
    ensemble: &mut ParticleEnsemble,
    dt: f64,
    rng: &mut RngStream,
    rate: &BetaRate,
    alpha: f64,
) -> usize {
    let n = ensemble.len();
    let mut divisions = 0;
    for i in 0..n {
        let r = ensemble.radii[i];
        let u = rng.uniform();
        let divides = match rate.rate(r) {
            DivisionRate::Forced => true,
            DivisionRate::Finite(b) => b > 0.0 && u < 1.0 - (-b * dt).exp(),
        };
        if !divides {
            continue;
        }
        let theta = 2.0 * PI * rng.uniform();
        let child = r / SQRT_2;
        let off = [alpha * child * theta.cos(), alpha * child * theta.sin()];
        let p = ensemble.positions[i];
        ensemble.positions[i] = [p[0] - off[0], p[1] - off[1]];
        ensemble.radii[i] = child;
        ensemble.positions.push([p[0] + off[0], p[1] + off[1]]);
        ensemble.radii.push(child);
        ensemble.ids.push(ensemble.next_id);
        ensemble.next_id += 1;
        divisions += 1;
    }
    divisions
}

#[derive(Clone, Debug, PartialEq)]
pub struct MicroOptions {
    /// Increasing times at which snapshots are taken; the last one ends the run.
    pub output_times: Vec<f64>,
    pub particle_cap: usize,
    pub amplitude: Amplitude,
    /// Compute binned entropy/Rao diagnostics at each snapshot.
    pub field_diagnostics: bool,
}

impl MicroOptions {
    pub fn new(output_times: Vec<f64>) -> Self {
        Self { output_times, particle_cap: 10_000, amplitude: Amplitude::Linear, field_diagnostics: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MicroRun {
    pub run_index: u64,
    pub snapshots: Vec<ParticleEnsemble>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    /// Time at which the particle cap was exceeded, if it was.
    pub truncated_at: Option<f64>,
    /// State at the end of the run (or at truncation).
    pub final_state: ParticleEnsemble,
    pub steps: usize,
    pub divisions: usize,
    /// Largest number of particles found outside the domain at a snapshot.
    pub escaped: usize,
}

/// Runs one realisation up to the last output time.
pub fn run_micro(config: &SimConfig, run_index: u64, options: &MicroOptions) -> Result<MicroRun, MicroError> {
    let violations = config.validate();
    if !violations.is_empty() {
        let msg = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        return Err(crate::error::DomainError::Invalid(msg).into());
    }
    let grid = build_grid(config)?;
    let spec = KernelSpec { amplitude: options.amplitude, dim: 2, eps: config.eps };
    let rate = BetaRate::from_config(config);
    let mut rng = RngStream::new(config.seed, run_index);
    let mut ens = init_ensemble(config, &mut rng);
    let n_scale = config.n0;

    let stencil = options.field_diagnostics.then(|| build_stencil(&grid, &spec));
    let mut out = MicroRun {
        run_index,
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
        truncated_at: None,
        final_state: ens.clone(),
        steps: 0,
        divisions: 0,
        escaped: 0,
    };
    let record = |ens: &ParticleEnsemble, out: &mut MicroRun| {
        let binned = observables::bin_particles(ens, &grid, n_scale);
        out.escaped = out.escaped.max(binned.outside);
        let mut rec = DiagnosticsRecord {
            time: ens.time,
            total_mass: ens.len() as f64 / n_scale as f64,
            particle_count: Some(ens.len()),
            second_moment: observables::second_moment_particles(ens, grid.center(), n_scale),
            ..Default::default()
        };
        if let Some(st) = &stencil {
            rec.shannon_entropy = observables::shannon_entropy(&binned.field);
            let xi = crate::kernel::xi_meso(&binned.field, st).expect("grid matches");
            rec.rao_functional = observables::rao_functional(&binned.field, &xi);
        }
        out.diagnostics.push(rec);
        out.snapshots.push(ens.clone());
    };

    let mut next = 0;
    while next < options.output_times.len() && options.output_times[next] <= 0.0 {
        record(&ens, &mut out);
        next += 1;
    }
    while next < options.output_times.len() {
        let target = options.output_times[next];
        let drift = compute_drift(&ens, &spec, n_scale);
        let mut dt = adaptive_dt_micro(max_drift(&drift), config);
        let reached = dt >= target - ens.time;
        if reached {
            dt = target - ens.time;
        }
        step_transport(&mut ens, &drift, dt, config.diffusion_d, &mut rng);
        step_growth(&mut ens, dt, config.growth_g, config.r_max);
        out.divisions += step_division(&mut ens, dt, &mut rng, &rate, config.alpha);
        ens.time = if reached { target } else { ens.time + dt };
        out.steps += 1;
        if reached {
            record(&ens, &mut out);
            next += 1;
        }
        if ens.len() > options.particle_cap {
            out.truncated_at = Some(ens.time);
            log::info!("run {run_index}: {} particles exceed the cap at t = {}", ens.len(), ens.time);
            break;
        }
    }
    if out.escaped > 0 {
        log::warn!("run {run_index}: up to {} particles left the domain and were not binned", out.escaped);
    }
    out.final_state = ens;
    Ok(out)
}

/// Bins every run at every snapshot and averages the fields pointwise.
pub fn ensemble_average(
    runs: &[Vec<ParticleEnsemble>],
    grid: &Grid3,
    n_scale: usize,
) -> Result<Vec<DensityField>, MicroError> {
    let first = runs.first().ok_or(MicroError::NoRuns)?;
    let times: Vec<f64> = first.iter().map(|s| s.time).collect();
    for run in runs {
        if run.len() != times.len() || run.iter().zip(&times).any(|(s, &t)| s.time != t) {
            return Err(MicroError::MismatchedTimes);
        }
    }
    let inv = 1.0 / runs.len() as f64;
    let mut out = Vec::with_capacity(times.len());
    for (n, &t) in times.iter().enumerate() {
        let mut acc = DensityField::zeros(grid.clone());
        acc.time = t;
        for run in runs {
            let f = observables::bin_particles(&run[n], grid, n_scale).field;
            for (a, v) in acc.values.iter_mut().zip(&f.values) {
                *a += v;
            }
        }
        acc.values.iter_mut().for_each(|v| *v *= inv);
        out.push(acc);
    }
    Ok(out)
}
