use std::fmt;
use std::fs;
use std::io::{self as stdio, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::ValueEnum;
use multiscale::io::{self, ErrorRow};
use multiscale::kernel::{build_stencil, xi_meso};
use multiscale::observables::{self, bin_particles, radial_profile_micro, rel_l1_errors, ring_count, Marginals};
use multiscale::{
    build_grid, fvm, micro, DensityField, DiagnosticsRecord, FvOptions, Grid3, KernelSpec, MicroOptions,
    ParticleEnsemble, Preset, SimConfig, DEFAULT_OUTPUT_TIMES,
};

use crate::output::{self, Manifest, Status, AVERAGE_DIR, DIAGNOSTICS, SNAPSHOTS};
use crate::{CompareArgs, ReportArgs, RunArgs, ScaleArg, Setup, ValidateArgs};

/// A problem with the requested configuration or inputs, as opposed to a
/// failure while computing.
#[derive(Debug)]
pub struct ConfigViolation(pub String);

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigViolation {}

fn violation(msg: impl Into<String>) -> anyhow::Error {
    ConfigViolation(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.is::<ConfigViolation>()) {
        1
    } else {
        2
    }
}

fn check(config: &SimConfig) -> Result<()> {
    let v = config.validate();
    if v.is_empty() {
        return Ok(());
    }
    Err(violation(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")))
}

fn resolve(preset: Option<&str>, setup: &Setup) -> Result<(String, SimConfig)> {
    let (name, mut config) = match preset {
        Some(p) => {
            let preset: Preset =
                p.parse().map_err(|e: multiscale::experiment::UnknownPreset| violation(e.to_string()))?;
            (preset.name().to_string(), preset.config())
        }
        None => ("defaults".to_string(), SimConfig::default()),
    };
    if let Some(path) = &setup.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply_text(&text).map_err(|e| violation(format!("{}: {e}", path.display())))?;
    }
    for (key, value) in setup.overrides.pairs() {
        config.set(key, value).map_err(|e| violation(e.to_string()))?;
    }
    check(&config)?;
    Ok((name, config))
}

fn output_times(explicit: Option<Vec<f64>>, config: &SimConfig) -> Result<Vec<f64>> {
    let times = match explicit {
        Some(t) => t,
        None => {
            let mut t: Vec<f64> = DEFAULT_OUTPUT_TIMES.iter().copied().filter(|&t| t < config.t_final).collect();
            t.push(config.t_final);
            t
        }
    };
    if times.is_empty() || times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(violation("output times must be finite and non-negative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(violation("output times must be strictly increasing"));
    }
    if times[times.len() - 1] > config.t_final {
        return Err(violation(format!("output time {} exceeds t_final = {}", times[times.len() - 1], config.t_final)));
    }
    Ok(times)
}

fn load_manifest_arg(path: &Path) -> Result<Manifest> {
    if path.is_dir() {
        return Manifest::load(path);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn scale_of(m: &Manifest) -> Result<ScaleArg> {
    ScaleArg::from_str(&m.scale, true).map_err(|_| violation(format!("unknown scale `{}` in manifest", m.scale)))
}

pub fn run(args: RunArgs) -> Result<ExitCode> {
    let mut manifest = match &args.from_manifest {
        Some(path) => {
            let m = load_manifest_arg(path)?;
            check(&m.config)?;
            Manifest {
                output_dir: args.out.clone().unwrap_or_else(|| m.output_dir.clone()),
                status: Status::Running,
                started_unix: output::unix_now(),
                finished_unix: None,
                elapsed_seconds: None,
                truncated: false,
                truncation_times: Vec::new(),
                ..m
            }
        }
        None => {
            let scale = args.scale.expect("required by clap");
            let (preset, config) = resolve(args.preset.as_deref(), &args.setup)?;
            let times = output_times(args.output_times.clone(), &config)?;
            let seeds = match scale {
                ScaleArg::Micro => (0..config.n_runs as u64).map(|i| config.seed + i).collect(),
                _ => vec![config.seed],
            };
            let output_dir =
                args.out.clone().unwrap_or_else(|| args.output_root.join(format!("{preset}-{}", scale.name())));
            Manifest {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                scale: scale.name().to_string(),
                preset,
                config,
                seeds,
                output_times: times,
                particle_cap: args.particle_cap,
                output_dir,
                status: Status::Running,
                started_unix: output::unix_now(),
                finished_unix: None,
                elapsed_seconds: None,
                truncated: false,
                truncation_times: Vec::new(),
            }
        }
    };
    let scale = scale_of(&manifest)?;
    let dir = manifest.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    manifest.save(&dir)?;
    fs::write(dir.join("config.txt"), manifest.config.to_text())?;

    let clock = Instant::now();
    let result = match scale {
        ScaleArg::Micro => run_micro_scale(&mut manifest, &dir),
        ScaleArg::Meso | ScaleArg::Macro => run_fv_scale(&manifest, scale, &dir),
    };
    manifest.elapsed_seconds = Some(clock.elapsed().as_secs_f64());
    manifest.finished_unix = Some(output::unix_now());
    manifest.status = if result.is_ok() { Status::Complete } else { Status::Failed };
    manifest.save(&dir)?;
    result?;
    if manifest.truncated {
        eprintln!("note: particle cap reached; see truncation_times in the manifest");
    }
    println!("{}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn run_fv_scale(m: &Manifest, scale: ScaleArg, dir: &Path) -> Result<()> {
    let mut options = FvOptions::new(m.output_times.clone());
    options.record_every_step = true;
    let run = match scale {
        ScaleArg::Meso => fvm::run_meso(&m.config, &options),
        _ => fvm::run_macro(&m.config, &options),
    }
    .context("solver failed")?;
    log::info!("{} steps", run.steps);
    output::write_field_outputs(dir, &run.snapshots)?;
    let mut w = output::create(&dir.join(DIAGNOSTICS))?;
    io::write_diagnostics(&mut w, &run.diagnostics, false)?;
    w.flush()?;
    Ok(())
}

fn run_dir(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("run_{index:03}"))
}

fn run_micro_scale(m: &mut Manifest, dir: &Path) -> Result<()> {
    let config = m.config.clone();
    let grid = build_grid(&config)?;
    let mut options = MicroOptions::new(m.output_times.clone());
    options.particle_cap = m.particle_cap;
    let mut all = Vec::new();
    for index in 0..config.n_runs {
        let run = micro::run_micro(&config, index as u64, &options).context("micro run failed")?;
        log::info!("run {index}: {} steps, {} divisions", run.steps, run.divisions);
        let rd = run_dir(dir, index);
        let mut w = output::create(&rd.join(SNAPSHOTS))?;
        io::write_snapshots(&mut w, &run.snapshots)?;
        w.flush()?;
        let mut w = output::create(&rd.join(DIAGNOSTICS))?;
        io::write_diagnostics(&mut w, &run.diagnostics, true)?;
        w.flush()?;
        if run.truncated_at.is_some() {
            let mut w = output::create(&rd.join("final_state.csv"))?;
            io::write_snapshots(&mut w, std::slice::from_ref(&run.final_state))?;
            w.flush()?;
        }
        m.truncation_times.push(run.truncated_at);
        all.push(run.snapshots);
    }
    m.truncated = m.truncation_times.iter().any(Option::is_some);

    // truncated runs stop early; average over the snapshot times every run reached
    let common = all.iter().map(Vec::len).min().unwrap_or(0);
    let trimmed: Vec<Vec<ParticleEnsemble>> = all.iter().map(|r| r[..common].to_vec()).collect();
    let average = micro::ensemble_average(&trimmed, &grid, config.n0)?;
    let avg_dir = dir.join(AVERAGE_DIR);
    output::write_field_outputs(&avg_dir, &average)?;

    let stencil = build_stencil(&grid, &KernelSpec::from_config(&config)?);
    let diags: Vec<DiagnosticsRecord> = average
        .iter()
        .map(|f| {
            let xi = xi_meso(f, &stencil).expect("same grid");
            DiagnosticsRecord {
                time: f.time,
                total_mass: f.mass(),
                shannon_entropy: observables::shannon_entropy(f),
                rao_functional: observables::rao_functional(f, &xi),
                second_moment: observables::second_moment_field(f, grid.center()),
                ..Default::default()
            }
        })
        .collect();
    let mut w = output::create(&avg_dir.join(DIAGNOSTICS))?;
    io::write_diagnostics(&mut w, &diags, false)?;
    w.flush()?;

    let rings = ring_count(&grid);
    let cols: Vec<String> = (0..rings).flat_map(|i| (0..grid.nr).map(move |k| format!("ring{i}_k{k}"))).collect();
    let rows: Vec<(f64, Vec<f64>)> = (0..common)
        .map(|n| {
            let mut acc = vec![0.0; rings * grid.nr];
            for run in &trimmed {
                for (a, v) in acc.iter_mut().zip(radial_profile_micro(&run[n], &grid, config.n0)) {
                    *a += v / trimmed.len() as f64;
                }
            }
            (trimmed[0][n].time, acc)
        })
        .collect();
    let mut w = output::create(&avg_dir.join("radial_particles.csv"))?;
    io::write_wide(&mut w, &cols, &rows)?;
    w.flush()?;
    Ok(())
}

fn expect_scale(m: &Manifest, dir: &Path, scale: ScaleArg) -> Result<()> {
    if m.scale != scale.name() {
        return Err(violation(format!("{} holds a {} run, expected {}", dir.display(), m.scale, scale.name())));
    }
    if m.status != Status::Complete {
        return Err(violation(format!("{} is not a completed run", dir.display())));
    }
    Ok(())
}

fn same_grid(dir: &Path, m: &Manifest, grid: &Grid3) -> Result<()> {
    if &m.grid()? != grid {
        return Err(violation(format!("{} uses a different grid than the reference", dir.display())));
    }
    Ok(())
}

fn label(dir: &Path) -> String {
    dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string())
}

pub fn compare(args: CompareArgs) -> Result<ExitCode> {
    let meso = Manifest::load(&args.meso)?;
    expect_scale(&meso, &args.meso, ScaleArg::Meso)?;
    let grid = meso.grid()?;
    let reference = output::read_fields(&args.meso, &grid)?;
    let mut rows = Vec::new();
    let mut push = |comparand: String, fields: &[DensityField]| -> Result<()> {
        for f in fields {
            let r = reference
                .iter()
                .find(|r| (r.time - f.time).abs() <= 1e-9 * f.time.abs().max(1.0))
                .ok_or_else(|| violation(format!("{comparand}: the reference has no snapshot at t = {}", f.time)))?;
            let errors = rel_l1_errors(r, f).with_context(|| format!("{comparand} at t = {}", f.time))?;
            rows.push(ErrorRow { time: f.time, comparand: comparand.clone(), errors });
        }
        Ok(())
    };
    for dir in &args.micro {
        let m = Manifest::load(dir)?;
        expect_scale(&m, dir, ScaleArg::Micro)?;
        same_grid(dir, &m, &grid)?;
        let name = label(dir);
        push(format!("micro:{name}"), &output::read_fields(&dir.join(AVERAGE_DIR), &grid)?)?;
        for index in 0..m.config.n_runs {
            let snaps = io::read_snapshots(output::open(&run_dir(dir, index).join(SNAPSHOTS))?)?;
            let fields: Vec<DensityField> = snaps.iter().map(|s| bin_particles(s, &grid, m.config.n0).field).collect();
            push(format!("micro:{name}:run_{index:03}"), &fields)?;
        }
    }
    if let Some(dir) = &args.macro_dir {
        let m = Manifest::load(dir)?;
        // a meso run is accepted here too, which makes a self-comparison possible
        if m.scale != ScaleArg::Meso.name() {
            expect_scale(&m, dir, ScaleArg::Macro)?;
        }
        same_grid(dir, &m, &grid)?;
        push(m.scale.clone(), &output::read_fields(dir, &grid)?)?;
    }
    rows.sort_by(|a, b| a.time.total_cmp(&b.time));
    match &args.out {
        Some(path) => {
            let mut w = output::create(path)?;
            io::write_errors(&mut w, &rows)?;
            w.flush()?;
        }
        None => io::write_errors(stdio::stdout().lock(), &rows)?,
    }
    Ok(ExitCode::SUCCESS)
}

struct Checks(Vec<(String, bool)>);

impl Checks {
    fn add(&mut self, name: impl Into<String>, ok: bool) {
        self.0.push((name.into(), ok));
    }

    fn print(&self) -> bool {
        println!("\ninvariant checks");
        for (name, ok) in &self.0 {
            println!("  {name}: {}", if *ok { "PASS" } else { "FAIL" });
        }
        self.0.iter().all(|(_, ok)| *ok)
    }
}

fn non_increasing(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + tol)
}

fn at_output_times<'a>(records: &'a [DiagnosticsRecord], times: &[f64]) -> Vec<&'a DiagnosticsRecord> {
    records.iter().filter(|d| times.iter().any(|&t| (t - d.time).abs() <= 1e-9 * t.abs().max(1.0))).collect()
}

pub fn report(args: ReportArgs) -> Result<ExitCode> {
    let m = Manifest::load(&args.dir)?;
    if m.status != Status::Complete {
        return Err(violation(format!("{} is incomplete (status {:?})", args.dir.display(), m.status)));
    }
    let scale = scale_of(&m)?;
    let c = &m.config;
    println!("{} {} run in {}", m.preset, m.scale, args.dir.display());
    if let Some(s) = m.elapsed_seconds {
        println!("wall clock {s:.1} s");
    }
    let mut checks = Checks(Vec::new());
    let field_dir = match scale {
        ScaleArg::Micro => {
            report_micro(&m, &args.dir, &mut checks)?;
            args.dir.join(AVERAGE_DIR)
        }
        _ => {
            report_fv(&m, scale, &args.dir, &mut checks)?;
            args.dir.clone()
        }
    };
    let all_pass = checks.print();
    for (n, t) in m.truncation_times.iter().enumerate() {
        if let Some(t) = t {
            println!("FLAG: run {n} exceeded the particle cap of {} at t = {t}", m.particle_cap);
        }
    }
    if args.png {
        let grid = build_grid(c)?;
        let png_dir = args.dir.join("png");
        for f in output::read_fields(&field_dir, &grid)? {
            let mg = Marginals::of(&f);
            output::write_png(&png_dir.join(format!("spatial_t{}.png", f.time)), &mg.spatial, grid.nx, grid.ny)?;
            output::write_png(
                &png_dir.join(format!("radial_t{}.png", f.time)),
                &mg.radial,
                grid.nr,
                ring_count(&grid),
            )?;
        }
        println!("heatmaps written to {}", png_dir.display());
    }
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn report_fv(m: &Manifest, scale: ScaleArg, dir: &Path, checks: &mut Checks) -> Result<()> {
    let diags = io::read_diagnostics(output::open(&dir.join(DIAGNOSTICS))?)?;
    println!("\n{:>10} {:>14} {:>14} {:>14} {:>14}", "t", "mass", "shannon", "rao", "second_moment");
    for d in at_output_times(&diags, &m.output_times) {
        println!(
            "{:>10} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            d.time, d.total_mass, d.shannon_entropy, d.rao_functional, d.second_moment
        );
    }
    println!("{} recorded steps", diags.len());
    let mass: Vec<f64> = diags.iter().map(|d| d.total_mass).collect();
    let c = &m.config;
    checks.add("mass non-negative", mass.iter().all(|&v| v >= 0.0));
    checks.add("Rao functional non-negative", diags.iter().all(|d| d.rao_functional >= -1e-10));
    if c.beta_bar == 0.0 {
        let m0 = mass.first().copied().unwrap_or(0.0);
        checks.add("mass conserved", mass.iter().all(|&v| (v - m0).abs() <= 1e-10 * m0.max(1e-300)));
    } else {
        checks.add("mass non-decreasing", mass.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    }
    if c.beta_bar == 0.0 && c.growth_g == 0.0 {
        let shannon: Vec<f64> = diags.iter().map(|d| d.shannon_entropy).collect();
        checks.add("Shannon entropy non-increasing", non_increasing(&shannon, 1e-10));
        if scale == ScaleArg::Meso {
            let rao: Vec<f64> = diags.iter().map(|d| d.rao_functional).collect();
            checks.add("Rao functional non-increasing", non_increasing(&rao, 1e-8));
        }
    }
    Ok(())
}

fn report_micro(m: &Manifest, dir: &Path, checks: &mut Checks) -> Result<()> {
    let c = &m.config;
    let mut runs = Vec::new();
    for index in 0..c.n_runs {
        runs.push(io::read_diagnostics(output::open(&run_dir(dir, index).join(DIAGNOSTICS))?)?);
    }
    let common = runs.iter().map(Vec::len).min().unwrap_or(0);
    let n = runs.len() as f64;
    println!("\nrun average over {} runs", runs.len());
    println!("{:>10} {:>12} {:>14} {:>14} {:>14}", "t", "count", "mass", "shannon", "second_moment");
    for i in 0..common {
        let mean = |f: &dyn Fn(&DiagnosticsRecord) -> f64| runs.iter().map(|r| f(&r[i])).sum::<f64>() / n;
        println!(
            "{:>10} {:>12.1} {:>14.6e} {:>14.6e} {:>14.6e}",
            runs[0][i].time,
            mean(&|d| d.particle_count.unwrap_or(0) as f64),
            mean(&|d| d.total_mass),
            mean(&|d| d.shannon_entropy),
            mean(&|d| d.second_moment),
        );
    }
    let counts: Vec<Vec<usize>> =
        runs.iter().map(|r| r.iter().map(|d| d.particle_count.unwrap_or(0)).collect()).collect();
    checks.add("particle count non-decreasing", counts.iter().all(|c| c.windows(2).all(|w| w[1] >= w[0])));
    if c.beta_bar == 0.0 {
        checks.add("particle count constant", counts.iter().all(|c| c.iter().all(|&v| v == c[0])));
    }
    checks.add("Rao functional non-negative", runs.iter().flatten().all(|d| d.rao_functional >= -1e-10));
    if c.growth_g == 0.0 {
        let mut ok = true;
        for index in 0..c.n_runs {
            let snaps = io::read_snapshots(output::open(&run_dir(dir, index).join(SNAPSHOTS))?)?;
            let s: Vec<f64> = snaps.iter().map(ParticleEnsemble::sum_sq_radii).collect();
            ok &= s.iter().all(|&v| (v - s[0]).abs() <= 1e-10 * s[0]);
        }
        checks.add("sum of squared radii constant", ok);
    }
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<ExitCode> {
    let (name, config) = resolve(args.preset.as_deref(), &args.setup)?;
    println!("# {name}: configuration valid");
    print!("{}", config.to_text());
    Ok(ExitCode::SUCCESS)
}
