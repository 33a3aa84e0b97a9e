//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Positional arguments select criteria by id prefix (`1`, `6c`, ...).
//! Failures are reported without failing the process unless
//! `ACCEPTANCE_STRICT=1` is set.

use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Instant;

use multiscale::experiment::compare_series;
use multiscale::fvm::{init_density, rhs, FvParams};
use multiscale::kernel::{build_stencil, xi_macro, xi_meso};
use multiscale::micro::ensemble_average;
use multiscale::observables::{pair_particles, rel_l1_errors, second_moment_field, size_marginal};
use multiscale::{
    build_grid, run_macro, run_meso, run_micro, Amplitude, DensityField, FragScheme, FvOptions, FvRun, FvSolver,
    KernelSpec, MicroOptions, MicroRun, Preset, Scale, SimConfig, DEFAULT_OUTPUT_TIMES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: usize = 6;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

struct Suite {
    filters: Vec<String>,
    passed: usize,
    failed: Vec<&'static str>,
}

impl Suite {
    fn check(&mut self, id: &'static str, what: &str, f: impl FnOnce() -> Outcome) {
        if !self.filters.is_empty() && !self.filters.iter().any(|p| id.starts_with(p.as_str())) {
            return;
        }
        let start = Instant::now();
        let o = f();
        let tag = if o.ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:<3} {what} ({}; {:.1} s)", o.detail, start.elapsed().as_secs_f64());
        if o.ok {
            self.passed += 1;
        } else {
            self.failed.push(id);
        }
    }
}

fn times(step: f64, end: f64) -> Vec<f64> {
    let n = (end / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

fn fmt_series(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn micro_options(output_times: Vec<f64>) -> MicroOptions {
    MicroOptions { field_diagnostics: false, ..MicroOptions::new(output_times) }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn max_rel_drift(values: &[f64]) -> f64 {
    let v0 = values[0];
    values.iter().map(|v| ((v - v0) / v0).abs()).fold(0.0, f64::max)
}

fn case1_runs() -> &'static (FvRun, FvRun) {
    static RUNS: OnceLock<(FvRun, FvRun)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let c = Preset::Case1Growth.config();
        let opts = FvOptions::new(DEFAULT_OUTPUT_TIMES.to_vec());
        (run_meso(&c, &opts).expect("case 1 meso"), run_macro(&c, &opts).expect("case 1 macro"))
    })
}

fn case2_micro() -> &'static MicroRun {
    static RUN: OnceLock<MicroRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let c = SimConfig { n0: 200, ..Preset::Case2Frag.config() };
        run_micro(&c, 0, &micro_options(times(5.0, 100.0))).expect("case 2 micro")
    })
}

/// Ensemble average of `SEEDS` micro runs at the default output times.
fn micro_average(config: &SimConfig) -> Vec<DensityField> {
    let opts = micro_options(DEFAULT_OUTPUT_TIMES.to_vec());
    let runs: Vec<_> = (0..SEEDS as u64).map(|i| run_micro(config, i, &opts).expect("micro run").snapshots).collect();
    let grid = build_grid(config).expect("grid");
    ensemble_average(&runs, &grid, config.n0).expect("average")
}

fn conservation(suite: &mut Suite) {
    suite.check("1a", "micro without division keeps N_t constant", || {
        let c = SimConfig { n0: 500, t_final: 10.0, ..Preset::Case1Growth.config() };
        let run = run_micro(&c, 0, &micro_options(times(1.0, 10.0))).expect("run");
        let counts: Vec<usize> = run.snapshots.iter().map(|s| s.len()).collect();
        let ok = counts.iter().all(|&n| n == 500) && run.divisions == 0;
        outcome(ok, format!("N from {} to {} over {} snapshots", counts[0], counts[counts.len() - 1], counts.len()))
    });

    suite.check("1b", "micro division conserves the sum of squared radii", || {
        let run = case2_micro();
        let sums: Vec<f64> = run.snapshots.iter().map(|s| s.sum_sq_radii()).collect();
        let drift = max_rel_drift(&sums);
        let ok = run.divisions > 0 && drift <= 1e-12;
        outcome(ok, format!("{} divisions, max relative drift {drift:.2e}", run.divisions))
    });

    suite.check("1c", "meso and macro without division conserve mass per step over 500 steps", || {
        let c = Preset::Case1Growth.config();
        let mut worst = 0.0f64;
        for scale in [Scale::Meso, Scale::Macro] {
            let solver = FvSolver::new(&c, scale, Amplitude::Linear, FragScheme::default()).expect("solver");
            let mut field = init_density(&c, &solver.grid).expect("init");
            for _ in 0..500 {
                let before = field.mass();
                if solver.step(&mut field, f64::INFINITY).is_err() {
                    return outcome(false, format!("{scale:?} step failed"));
                }
                worst = worst.max(((field.mass() - before) / before).abs());
            }
        }
        outcome(worst <= 1e-12, format!("max relative change per step {worst:.2e}"))
    });

    suite.check("1d", "full Case 1 runs stay non-negative under the CFL step", || {
        let (meso, mac) = case1_runs();
        let min = meso
            .snapshots
            .iter()
            .chain(&mac.snapshots)
            .flat_map(|f| f.values.iter().copied())
            .fold(f64::INFINITY, f64::min);
        outcome(min >= 0.0, format!("{} + {} steps, min value {min:.3e}", meso.steps, mac.steps))
    });
}

fn heat(suite: &mut Suite) {
    suite.check("2a", "macro without interaction grows the second moment at 4D", || {
        let c = SimConfig { x_min: -25.0, x_max: 25.0, nx: 100, nr: 2, ..Preset::AppendixANone.config() };
        let solver = FvSolver::new(&c, Scale::Macro, Amplitude::Zero, FragScheme::default()).expect("solver");
        let field = init_density(&c, &solver.grid).expect("init");
        let ts = times(10.0, 100.0);
        let run = solver.run(field, &FvOptions::new(ts.clone())).expect("run");
        let m2: Vec<f64> = run.snapshots.iter().map(|f| second_moment_field(f, c.center())).collect();
        let rate = slope(&ts, &m2);
        let target = 4.0 * c.diffusion_d;
        let rel = (rate - target).abs() / target;
        outcome(rel <= 0.02, format!("slope {rate:.5} vs {target}, relative error {rel:.2e}"))
    });

    suite.check("2b", "micro without interaction grows the per-axis displacement variance at 2D", || {
        let c = SimConfig { n0: 5000, ..Preset::AppendixANone.config() };
        let ts = times(10.0, 100.0);
        let opts = MicroOptions { amplitude: Amplitude::Zero, ..micro_options(ts.clone()) };
        let run = run_micro(&c, 0, &opts).expect("run");
        let first = &run.snapshots[0];
        let start: HashMap<u64, [f64; 2]> = first.ids.iter().copied().zip(first.positions.iter().copied()).collect();
        let var: Vec<f64> = run
            .snapshots
            .iter()
            .map(|s| {
                let n = s.len() as f64;
                let disp: Vec<[f64; 2]> =
                    s.ids.iter().zip(&s.positions).map(|(id, p)| [p[0] - start[id][0], p[1] - start[id][1]]).collect();
                (0..2)
                    .map(|a| {
                        let mean = disp.iter().map(|d| d[a]).sum::<f64>() / n;
                        disp.iter().map(|d| (d[a] - mean).powi(2)).sum::<f64>() / n
                    })
                    .sum::<f64>()
                    / 2.0
            })
            .collect();
        let rate = slope(&ts, &var);
        let target = 2.0 * c.diffusion_d;
        let rel = (rate - target).abs() / target;
        outcome(rel <= 0.05, format!("slope {rate:.5} vs {target}, relative error {rel:.2e}"))
    });
}

fn kernel(suite: &mut Suite) {
    suite.check("3a", "kernel gradient matches central differences", || {
        let spec = KernelSpec::new(Amplitude::Linear, 1.0).expect("spec");
        let h = 1e-5;
        let mut worst = 0.0f64;
        for &(r, s) in &[(0.2, 0.2), (0.3, 0.9), (0.7, 0.5), (1.0, 1.0)] {
            for ix in -6..=6 {
                for iy in -6..=6 {
                    let x = [0.37 * ix as f64, 0.29 * iy as f64];
                    let g = spec.grad(r, s, x).expect("grad");
                    for a in 0..2 {
                        let (mut p, mut m) = (x, x);
                        p[a] += h;
                        m[a] -= h;
                        let fd = (spec.eval(r, s, p).unwrap() - spec.eval(r, s, m).unwrap()) / (2.0 * h);
                        worst = worst.max((fd - g[a]).abs());
                    }
                }
            }
        }
        outcome(worst <= 1e-6, format!("max abs difference {worst:.2e}"))
    });

    suite.check("3b", "K_eps integrates to rs", || {
        let pairs = [(0.2, 0.2), (0.5, 0.9), (1.0, 1.0)];
        let mut worst_quad = 0.0f64;
        let mut worst_stencil = 0.0f64;
        for eps in [0.25, 0.5, 1.0] {
            let spec = KernelSpec::new(Amplitude::Linear, eps).expect("spec");
            for &(r, s) in &pairs {
                let half = 8.0 * spec.sigma_eps(r, s);
                let n = 600;
                let h = 2.0 * half / n as f64;
                let mut sum = 0.0;
                for i in 0..n {
                    let x = -half + (i as f64 + 0.5) * h;
                    for j in 0..n {
                        let y = -half + (j as f64 + 0.5) * h;
                        sum += spec.eval_eps(r, s, [x, y]).unwrap();
                    }
                }
                worst_quad = worst_quad.max((sum * h * h - r * s).abs() / (r * s));
            }
            let c = SimConfig { eps, ..SimConfig::default() };
            let grid = build_grid(&c).expect("grid");
            let stencil = build_stencil(&grid, &spec);
            for k in 0..grid.nr {
                for l in 0..grid.nr {
                    let gamma = spec.gamma_big(grid.r(k), grid.r(l));
                    worst_stencil = worst_stencil.max((stencil.pair(k, l).weight_sum() - gamma).abs() / gamma);
                }
            }
        }
        let ok = worst_quad <= 1e-3 && worst_stencil <= 1e-3;
        outcome(ok, format!("quadrature {worst_quad:.2e}, stencil weight sums {worst_stencil:.2e}"))
    });

    suite.check("3c", "meso potential equals macro potential on uniform fields", || {
        let mut worst = 0.0f64;
        for eps in [0.25, 0.5, 1.0] {
            let c = SimConfig { eps, ..SimConfig::default() };
            let grid = build_grid(&c).expect("grid");
            let spec = KernelSpec::new(Amplitude::Linear, eps).expect("spec");
            let stencil = build_stencil(&grid, &spec);
            let field = DensityField { values: vec![0.3; grid.len()], ..DensityField::zeros(grid.clone()) };
            let meso = xi_meso(&field, &stencil).expect("xi");
            let mac = xi_macro(&field, &spec);
            let reach = (0..grid.nr)
                .flat_map(|k| (0..grid.nr).map(move |l| (k, l)))
                .map(|(k, l)| stencil.pair(k, l).half)
                .max()
                .unwrap_or(0);
            for k in 0..grid.nr {
                for j in reach..grid.ny - reach {
                    for i in reach..grid.nx - reach {
                        let n = grid.index(i, j, k);
                        worst = worst.max((meso[n] - mac[n]).abs() / mac[n].abs());
                    }
                }
            }
        }
        outcome(worst <= 1e-3, format!("max relative difference {worst:.2e}"))
    });
}

fn fragmentation(suite: &mut Suite) {
    suite.check("4a", "division source balances beta * u on random fields", || {
        let c = Preset::Case2Frag.config();
        let grid = build_grid(&c).expect("grid");
        let params = FvParams::from_config(&c, &grid);
        let spec = KernelSpec::from_config(&c).expect("spec");
        let stencil = build_stencil(&grid, &spec);
        let vol = grid.cell_volume();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for trial in 0..8 {
            let sparsity = [0.0, 0.5, 0.9, 0.99][trial % 4];
            let mut field = DensityField::zeros(grid.clone());
            for v in &mut field.values {
                if rng.random::<f64>() >= sparsity {
                    *v = rng.random::<f64>();
                }
            }
            let m = field.mass();
            field.values.iter_mut().for_each(|v| *v /= m);
            let xi = xi_meso(&field, &stencil).expect("xi");
            let total: f64 = rhs(&field, &xi, &params).expect("rhs").iter().sum::<f64>() * vol;
            let expected: f64 =
                (0..grid.nr).map(|k| params.rate.finite(grid.r(k)) * field.slice(k).iter().sum::<f64>()).sum::<f64>()
                    * vol;
            worst = worst.max((total - expected).abs() / expected.abs());
        }
        outcome(worst <= 1e-12, format!("max relative imbalance {worst:.2e} over 8 fields"))
    });

    suite.check("4b", "micro Case 2 pairing with r^2 is constant in time", || {
        let run = case2_micro();
        let pairs: Vec<f64> = run.snapshots.iter().map(|s| pair_particles(s, |r, _| r * r, 200)).collect();
        let drift = max_rel_drift(&pairs);
        outcome(drift <= 1e-10, format!("max relative drift {drift:.2e} over {} snapshots", pairs.len()))
    });
}

fn entropy(suite: &mut Suite) {
    suite.check("5", "Shannon entropy and Rao functional are non-increasing without growth or division", || {
        let c = Preset::AppendixANone.config();
        let opts = FvOptions { record_every_step: true, ..FvOptions::new(DEFAULT_OUTPUT_TIMES.to_vec()) };
        let mut rise_h = f64::NEG_INFINITY;
        let mut rise_rao = f64::NEG_INFINITY;
        let mut steps = 0;
        for run in [run_meso(&c, &opts).expect("meso"), run_macro(&c, &opts).expect("macro")] {
            steps += run.steps;
            for w in run.diagnostics.windows(2) {
                rise_h = rise_h.max(w[1].shannon_entropy - w[0].shannon_entropy);
                rise_rao = rise_rao.max(w[1].rao_functional - w[0].rao_functional);
            }
        }
        let ok = rise_h <= 1e-10 && rise_rao <= 1e-8;
        outcome(ok, format!("{steps} steps, largest rise: entropy {rise_h:.2e}, Rao {rise_rao:.2e}"))
    });
}

fn trends(suite: &mut Suite) {
    suite.check("6a", "Case 1 size marginal concentrates in the top radius bin at t = 100", || {
        let (meso, mac) = case1_runs();
        let frac = |run: &FvRun| {
            let size = size_marginal(run.snapshots.last().expect("snapshot"));
            size[size.len() - 1] / size.iter().sum::<f64>()
        };
        let (a, b) = (frac(meso), frac(mac));
        outcome(a >= 0.99 && b >= 0.99, format!("top-bin fraction meso {a:.4}, macro {b:.4}"))
    });

    suite.check("6b", "Case 2 size peak passes r_max/sqrt2 and then r_max/2", || {
        let c = Preset::Case2Frag.config();
        let grid = build_grid(&c).expect("grid");
        let opts = FvOptions::new(times(1.0, 100.0));
        let mut ok = true;
        let mut detail = Vec::new();
        for (name, run) in
            [("meso", run_meso(&c, &opts).expect("meso")), ("macro", run_macro(&c, &opts).expect("macro"))]
        {
            let peaks: Vec<(f64, f64)> = run
                .snapshots
                .iter()
                .map(|f| {
                    let size = size_marginal(f);
                    let k = (0..size.len()).fold(0, |best, k| if size[k] > size[best] { k } else { best });
                    (f.time, grid.r(k))
                })
                .collect();
            let near = |r: f64, target: f64| (r - target).abs() <= grid.dr + 1e-12;
            let first = peaks.iter().position(|&(_, r)| near(r, c.r_max / 2f64.sqrt()));
            let second =
                first.and_then(|i| peaks[i..].iter().position(|&(_, r)| near(r, c.r_max / 2.0)).map(|j| i + j));
            match (first, second) {
                (Some(i), Some(j)) => detail.push(format!(
                    "{name}: r = {:.3} at t = {}, r = {:.3} at t = {}",
                    peaks[i].1, peaks[i].0, peaks[j].1, peaks[j].0
                )),
                _ => {
                    ok = false;
                    detail.push(format!("{name}: sequence not found"));
                }
            }
        }
        outcome(ok, detail.join("; "))
    });

    suite.check("6c", "micro-vs-meso spatial error at t = 100 decreases with N0", || {
        let c = Preset::Case1Growth.config();
        let (meso, _) = case1_runs();
        let reference = meso.snapshots.last().expect("snapshot");
        let errors: Vec<f64> = [100, 500, 2000]
            .iter()
            .map(|&n0| {
                let avg = micro_average(&SimConfig { n0, ..c.clone() });
                rel_l1_errors(reference, avg.last().expect("snapshot")).expect("errors").e_spatial
            })
            .collect();
        let ok = errors.windows(2).all(|w| w[1] < w[0]);
        outcome(ok, format!("E_spatial for N0 = 100, 500, 2000: {}", fmt_series(&errors)))
    });

    suite.check("6d", "Case 1 meso-vs-macro total error is small at t = 60 and non-increasing after t = 20", || {
        let (meso, mac) = case1_runs();
        let series = compare_series(&meso.snapshots, &mac.snapshots).expect("series");
        let at = |t: f64| series.iter().find(|(s, _)| *s == t).map(|(_, e)| e.e_tot).expect("time");
        let late: Vec<f64> = series.iter().filter(|(t, _)| *t >= 20.0).map(|(_, e)| e.e_tot).collect();
        let small = at(60.0) < 0.05;
        let settling = late.windows(2).all(|w| w[1] <= w[0]);
        let all: Vec<f64> = series.iter().map(|(_, e)| e.e_tot).collect();
        outcome(
            small && settling,
            format!(
                "E_tot at t = 0, 4, 20, 60, 100: {}; below 0.05 at 60: {small}; non-increasing: {settling}",
                fmt_series(&all)
            ),
        )
    });

    suite.check("6e", "Case 2 micro-vs-meso total error shows no monotone increase", || {
        let c = SimConfig { n0: 500, ..Preset::Case2Frag.config() };
        let meso = run_meso(&c, &FvOptions::new(DEFAULT_OUTPUT_TIMES.to_vec())).expect("meso");
        let avg = micro_average(&c);
        let series: Vec<f64> =
            compare_series(&meso.snapshots, &avg).expect("series").iter().map(|(_, e)| e.e_tot).collect();
        let increasing = series.windows(2).all(|w| w[1] > w[0]);
        outcome(!increasing, format!("E_tot at t = 0, 4, 20, 60, 100: {}", fmt_series(&series)))
    });

    suite.check("6f", "Case 3 micro hits the particle cap while meso and macro carry more mass", || {
        let c = Preset::Case3Both.config();
        let run = run_micro(&c, 0, &micro_options(DEFAULT_OUTPUT_TIMES.to_vec())).expect("micro");
        let Some(t) = run.truncated_at else {
            return outcome(false, format!("no truncation, {} particles at t = 100", run.final_state.len()));
        };
        let micro_mass = run.final_state.len() as f64 / c.n0 as f64;
        let opts = FvOptions::new(vec![0.0, t]);
        let mass = |run: FvRun| run.snapshots.last().expect("snapshot").mass();
        let meso = mass(run_meso(&c, &opts).expect("meso"));
        let mac = mass(run_macro(&c, &opts).expect("macro"));
        outcome(
            meso > micro_mass && mac > micro_mass,
            format!("cap hit at t = {t:.2}; mass micro {micro_mass:.3}, meso {meso:.3}, macro {mac:.3}"),
        )
    });
}

fn localisation(suite: &mut Suite) {
    suite.check("7", "meso converges to macro as eps shrinks", || {
        // c = 0.4 leaves these runs at 4 to 11 steps, where the time error swamps the eps dependence
        let base = SimConfig {
            x_min: -8.0,
            x_max: 8.0,
            nx: 32,
            nr: 8,
            t_final: 20.0,
            cfl_safety: 0.1,
            ..Preset::AppendixANone.config()
        };
        let opts = FvOptions::new(vec![0.0, 20.0]);
        let mac = run_macro(&base, &opts).expect("macro");
        let reference = mac.snapshots.last().expect("snapshot");
        let errors: Vec<f64> = [1.0, 0.5, 0.25, 0.125]
            .iter()
            .map(|&eps| {
                let meso = run_meso(&SimConfig { eps, ..base.clone() }, &opts).expect("meso");
                rel_l1_errors(reference, meso.snapshots.last().expect("snapshot")).expect("errors").e_tot
            })
            .collect();
        let ok = errors.windows(2).all(|w| w[1] < w[0]);
        outcome(ok, format!("E_tot for eps = 1, 0.5, 0.25, 0.125: {}", fmt_series(&errors)))
    });
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut suite = Suite { filters, passed: 0, failed: Vec::new() };
    let start = Instant::now();
    conservation(&mut suite);
    heat(&mut suite);
    kernel(&mut suite);
    fragmentation(&mut suite);
    entropy(&mut suite);
    localisation(&mut suite);
    trends(&mut suite);
    println!(
        "acceptance: {} passed, {} failed{} in {:.0} s",
        suite.passed,
        suite.failed.len(),
        if suite.failed.is_empty() { String::new() } else { format!(" ({})", suite.failed.join(", ")) },
        start.elapsed().as_secs_f64()
    );
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !suite.failed.is_empty() {
        std::process::exit(1);
    }
}
