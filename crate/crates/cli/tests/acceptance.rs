//! Acceptance suite: one pass/fail line per criterion, exit status 1 if any
//! criterion fails. Criteria 4 to 8 run full desk-scale ensembles and take
//! on the order of two hours on one core.
//!
//! `XYFID_ACCEPTANCE_ONLY=1,2,9` restricts the run to the listed criteria.
//!
//! The disordered ensembles use the positive-coupling model (`rectify`):
//! every field and anisotropy is `|mean + sigma z|`.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use xyfid::ensemble::{run_point, EnsembleOptions, GridPoint};
use xyfid::model::{Boundary, ChainSpec};
use xyfid::oracle::clean_chain_chi;
use xyfid::oracle::gates::{estimator_comparison, fidelity_gate, ground_energy_gate, GateConfig};
use xyfid::scaling::{fit_scaling_dimension, linear_grid, local_maxima, peak, Peak};
use xyfid::spectral::DriveAxis;
use xyfid_cli::commands::cmd_sweep;
use xyfid_cli::config::RunConfig;

const SEED: u64 = 20130701;
/// Realizations for the anisotropy criteria, whose sample size is not pinned.
const N_ANISOTROPY: usize = 1000;

#[derive(Clone, Copy)]
struct Point {
    chi_ave: f64,
    chi_stderr: f64,
    ln_chi_sd: f64,
    n_failed: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    drive: DriveAxis,
    value_bits: u64,
    fixed_bits: u64,
    sigma_bits: u64,
    length: usize,
    n: usize,
}

/// Ensemble points shared between criteria, computed once.
#[derive(Default)]
struct Cache {
    points: HashMap<Key, Point>,
}

impl Cache {
    /// `fixed` is the mean of the parameter that is not driven; the other
    /// mean is `value`. Field drives hold gamma, anisotropy drives hold lambda.
    fn point(&mut self, drive: DriveAxis, value: f64, fixed: f64, sigma: f64, length: usize, n: usize) -> Point {
        let key = Key {
            drive,
            value_bits: value.to_bits(),
            fixed_bits: fixed.to_bits(),
            sigma_bits: sigma.to_bits(),
            length,
            n,
        };
        *self.points.entry(key).or_insert_with(|| {
            let (field, gamma) = match drive {
                DriveAxis::Field => (value, fixed),
                DriveAxis::Anisotropy => (fixed, value),
            };
            let gp = GridPoint {
                spec: ChainSpec::new(length, field, gamma, sigma, Boundary::PeriodicEvenSector).unwrap(),
                drive,
                n_realizations: n,
            };
            let opts = EnsembleOptions {
                rectify: true,
                ..Default::default()
            };
            let s = run_point(&gp, SEED, &opts).expect("ensemble point");
            Point {
                chi_ave: s.chi_ave,
                chi_stderr: s.chi_stderr,
                ln_chi_sd: s.ln_chi.sd,
                n_failed: s.n_failed,
            }
        })
    }

    fn curve(&mut self, drive: DriveAxis, xs: &[f64], fixed: f64, sigma: f64, length: usize, n: usize) -> Vec<Point> {
        xs.iter().map(|&x| self.point(drive, x, fixed, sigma, length, n)).collect()
    }

    fn delta_chi(&mut self, drive: DriveAxis, value: f64, fixed: f64, sigma: f64, sizes: &[usize], n: usize) -> f64 {
        let pts: Vec<_> = sizes
            .iter()
            .map(|&l| (l, self.point(drive, value, fixed, sigma, l, n).chi_ave))
            .collect();
        fit_scaling_dimension(&pts).expect("scaling fit").delta_chi
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn chi_values(points: &[Point]) -> Vec<f64> {
    points.iter().map(|p| p.chi_ave).collect()
}

fn failures(points: &[Point]) -> usize {
    points.iter().map(|p| p.n_failed).sum()
}

fn oracle_identity() -> Outcome {
    let start = Instant::now();
    let cfg = GateConfig::default();
    let energy = ground_energy_gate(&cfg, xyfid::model::build_quadratic_form).unwrap();
    let fidelity = fidelity_gate(&cfg, xyfid::model::build_quadratic_form).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        energy.measured <= 1e-10 && fidelity.measured <= 1e-8 && fidelity.checked >= 100 && secs < 120.0,
        format!(
            "L=8 sigma=0.3: energy err {:.2e} (<=1e-10, {} checked, {} odd-sector skipped), fidelity err {:.2e} (<=1e-8, {} checked, {} skipped), {secs:.1}s",
            energy.measured, energy.checked, energy.skipped, fidelity.measured, fidelity.checked, fidelity.skipped
        ),
    )
}

fn estimators_agree() -> Outcome {
    let start = Instant::now();
    let (gate, forward) = estimator_comparison(&GateConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        gate.measured <= 1e-3 && gate.checked >= 100 && secs < 60.0,
        format!(
            "L=64 dx=1e-4: worst rel diff {:.2e} (<=1e-3) over {} instances, {} gapless draws replaced; one-sided attribution {:.2e}; {secs:.1}s",
            gate.measured, gate.checked, gate.skipped, forward
        ),
    )
}

fn clean_scaling(cache: &mut Cache) -> Outcome {
    let start = Instant::now();
    let sizes = [64usize, 128, 256, 512];
    let mut worst_rel = 0.0f64;
    let mut deltas = Vec::new();
    for field in [1.0, 1.5] {
        let mut exact = Vec::new();
        for &l in &sizes {
            let oracle = clean_chain_chi(l, field, 1.0, DriveAxis::Field).unwrap();
            let stencil = cache.point(DriveAxis::Field, field, 1.0, 0.0, l, 1).chi_ave;
            worst_rel = worst_rel.max((stencil - oracle).abs() / oracle);
            exact.push((l, oracle));
        }
        deltas.push(fit_scaling_dimension(&exact).unwrap().delta_chi);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (deltas[0] - 2.0).abs() <= 0.05 && (deltas[1] - 1.0).abs() <= 0.05 && worst_rel <= 1e-6 && secs < 60.0,
        format!(
            "delta_chi(1.0) = {:.4} (2 +- 0.05), delta_chi(1.5) = {:.4} (1 +- 0.05), stencil vs closed form {:.2e} (<=1e-6), {secs:.1}s",
            deltas[0], deltas[1], worst_rel
        ),
    )
}

fn ising_grid() -> Vec<f64> {
    linear_grid(0.80, 1.30, 0.01).unwrap()
}

fn ising_peak(cache: &mut Cache) -> Outcome {
    let xs = ising_grid();
    let curve = cache.curve(DriveAxis::Field, &xs, 1.0, 0.1, 256, 2000);
    let top = peak(&xs, &chi_values(&curve)).unwrap();
    outcome(
        (0.95..=1.10).contains(&top.x_grid) && top.index > 0 && top.index + 1 < xs.len(),
        format!(
            "sigma=0.1 L=256 N=2000: argmax lambda = {:.2} in [0.95, 1.10] on grid [0.80, 1.30] step 0.01 (chi_ave {:.4e}, {} failed realizations)",
            top.x_grid,
            top.value,
            failures(&curve)
        ),
    )
}

fn reduced_scaling(cache: &mut Cache) -> Outcome {
    let sizes = [64usize, 128, 256];
    // Every point lies on the Ising-peak grid, so L=256 at sigma=0.1 is shared.
    let xs = linear_grid(0.80, 1.30, 0.05).unwrap();
    let mut best = Vec::new();
    let mut far = Vec::new();
    for sigma in [0.1, 0.3] {
        let deltas: Vec<f64> = xs
            .iter()
            .map(|&x| cache.delta_chi(DriveAxis::Field, x, 1.0, sigma, &sizes, 2000))
            .collect();
        let top = peak(&xs, &deltas).unwrap();
        best.push((top.x_grid, top.value));
        far.push(cache.delta_chi(DriveAxis::Field, 1.5, 1.0, sigma, &sizes, 2000));
    }
    let clean: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let pts: Vec<_> = sizes
                .iter()
                .map(|&l| (l, clean_chain_chi(l, x, 1.0, DriveAxis::Field).unwrap()))
                .collect();
            fit_scaling_dimension(&pts).unwrap().delta_chi
        })
        .collect();
    let clean_max = clean.iter().cloned().fold(f64::MIN, f64::max);
    let ordered = best[1].1 < best[0].1 && best[0].1 < clean_max;
    let extensive = far.iter().all(|d| (d - 1.0).abs() <= 0.15);
    outcome(
        ordered && extensive,
        format!(
            "max delta_chi: sigma=0.3 {:.3} (lambda {:.2}) < sigma=0.1 {:.3} (lambda {:.2}) < clean {:.3}; at lambda=1.5: {:.3}, {:.3} (1 +- 0.15); sizes 64,128,256 N=2000",
            best[1].1, best[1].0, best[0].1, best[0].0, clean_max, far[0], far[1]
        ),
    )
}

fn broadening(cache: &mut Cache) -> Outcome {
    let sizes = [64usize, 128, 256];
    let sd = |cache: &mut Cache, field: f64| -> Vec<f64> {
        sizes
            .iter()
            .map(|&l| cache.point(DriveAxis::Field, field, 1.0, 0.1, l, 2000).ln_chi_sd)
            .collect()
    };
    let critical = sd(cache, 1.0);
    let away = sd(cache, 1.5);
    let up = critical.windows(2).all(|w| w[1] > w[0]);
    let down = away.windows(2).all(|w| w[1] < w[0]);
    outcome(
        up && down,
        format!(
            "sd(ln chi) over L=64,128,256: lambda=1.0 {:.4} {:.4} {:.4} (increasing), lambda=1.5 {:.4} {:.4} {:.4} (decreasing)",
            critical[0], critical[1], critical[2], away[0], away[1], away[2]
        ),
    )
}

/// The highest local maximum on each side of zero.
fn twin_peaks(xs: &[f64], ys: &[f64]) -> Option<(Peak, Peak)> {
    let maxima = local_maxima(xs, ys);
    let best = |side: &dyn Fn(f64) -> bool| {
        maxima
            .iter()
            .filter(|p| side(p.x_refined))
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .cloned()
    };
    Some((best(&|x| x < 0.0)?, best(&|x| x > 0.0)?))
}

fn anisotropy_twin_peaks(cache: &mut Cache) -> Outcome {
    let xs = linear_grid(-0.15, 0.15, 0.005).unwrap();
    let curve = cache.curve(DriveAxis::Anisotropy, &xs, 0.2, 0.1, 256, N_ANISOTROPY);
    let ys = chi_values(&curve);
    let maxima = local_maxima(&xs, &ys);
    let delta0 = cache.delta_chi(DriveAxis::Anisotropy, 0.0, 0.2, 0.1, &[64, 128, 256], N_ANISOTROPY);
    let scaling_ok = (delta0 - 1.0).abs() <= 0.15;
    let detail_tail = format!(
        "delta_chi(0) = {delta0:.3} (1 +- 0.15), sizes 64,128,256, N={N_ANISOTROPY}, {} failed realizations",
        failures(&curve)
    );
    if maxima.len() != 2 || !(maxima[0].x_refined < 0.0 && maxima[1].x_refined > 0.0) {
        let at: Vec<String> = maxima.iter().map(|p| format!("{:.3}", p.x_refined)).collect();
        return outcome(false, format!("lambda=0.2 sigma=0.1 L=256: local maxima at [{}], expected two about 0; {detail_tail}", at.join(", ")));
    }
    let (l, r) = (&maxima[0], &maxima[1]);
    let (sl, sr) = (curve[l.index].chi_stderr, curve[r.index].chi_stderr);
    let combined = (sl * sl + sr * sr).sqrt();
    let inside = |p: &Peak| p.x_refined.abs() > 0.0 && p.x_refined.abs() < 0.1;
    let symmetric = (l.x_refined + r.x_refined).abs() <= 0.005;
    let equal = (l.value - r.value).abs() <= 3.0 * combined;
    outcome(
        inside(l) && inside(r) && symmetric && equal && scaling_ok,
        format!(
            "lambda=0.2 sigma=0.1 L=256: maxima at {:.4} and {:.4} (|gamma*| in (0, 0.1), mirrored within one grid step), heights {:.2} and {:.2} differ by {:.2} (<= 3 x {:.2}); {detail_tail}",
            l.x_refined,
            r.x_refined,
            l.value,
            r.value,
            (l.value - r.value).abs(),
            combined
        ),
    )
}

fn disorder_trend(cache: &mut Cache) -> Outcome {
    let xs = linear_grid(-0.4, 0.4, 0.02).unwrap();
    let clean = chi_values(&cache.curve(DriveAxis::Anisotropy, &xs, 0.5, 0.0, 200, 1));
    let clean_maxima = local_maxima(&xs, &clean);
    let clean_top = peak(&xs, &clean).unwrap();
    let clean_ok = clean_maxima.len() == 1 && clean_top.x_grid == 0.0;
    let mut parts = vec![format!(
        "sigma=0: {} maximum at {:.2}",
        clean_maxima.len(),
        clean_top.x_grid
    )];
    let mut seps = Vec::new();
    let mut heights = Vec::new();
    let mut all_twin = true;
    for sigma in [0.1, 0.2, 0.3] {
        let curve = cache.curve(DriveAxis::Anisotropy, &xs, 0.5, sigma, 200, N_ANISOTROPY);
        let ys = chi_values(&curve);
        match twin_peaks(&xs, &ys) {
            Some((l, r)) => {
                let sep = r.x_refined - l.x_refined;
                let height = 0.5 * (l.value + r.value);
                parts.push(format!("sigma={sigma}: separation {sep:.3}, height {height:.2}"));
                seps.push(sep);
                heights.push(height);
            }
            None => {
                all_twin = false;
                parts.push(format!("sigma={sigma}: no maximum on one side of 0"));
            }
        }
    }
    let trend = all_twin
        && seps.windows(2).all(|w| w[1] > w[0])
        && heights.windows(2).all(|w| w[1] < w[0]);
    outcome(
        clean_ok && trend,
        format!("lambda=0.5 L=200 N={N_ANISOTROPY}: {}", parts.join("; ")),
    )
}

fn sweep_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml_str(
        r#"
[model]
sizes = [16, 24, 32]
drive = "anisotropy"
fixed_mean = 0.5
sigmas = [0.0, 0.2]
grid = [-0.2, 0.0, 0.2]

[ensemble]
n_realizations = 40
rectify = true

[hist]
points = [0.0, "argmax"]
sizes = [32]
"#,
        Path::new("acceptance.toml"),
    )
    .unwrap();
    cfg.output.directory = out.to_path_buf();
    cfg
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = std::env::temp_dir().join(format!("xyfid-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&tmp);
    let mut trees = Vec::new();
    // Same output directory every time: it is part of the embedded config.
    let cfg = sweep_config(&tmp);
    for workers in [1usize, 4, 8, 1] {
        let _ = std::fs::remove_dir_all(&tmp);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        pool.install(|| {
            let mut quiet = |_: f64, _: f64, _: usize, _: &xyfid::ensemble::EnsembleStats| {};
            cmd_sweep(&cfg, &mut quiet).unwrap();
            xyfid_cli::commands::cmd_hist(&cfg, &mut quiet).unwrap();
        });
        trees.push(read_tree(&cfg.output.directory));
    }
    let _ = std::fs::remove_dir_all(&tmp);
    let files = trees[0].len();
    let same = trees.iter().all(|t| *t == trees[0]);
    outcome(
        same && files > 0,
        format!("sweep + hist with 1, 4, 8 workers and a rerun: {files} files per run, byte-identical: {same}"),
    )
}

fn main() {
    // `cargo test` forwards harness flags such as `--nocapture`; none apply here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut cache = Cache::default();
    type Check = Box<dyn FnOnce(&mut Cache) -> Outcome>;
    let criteria: Vec<(&str, Check)> = vec![
        ("oracle identity", Box::new(|_| oracle_identity())),
        ("estimator agreement", Box::new(|_| estimators_agree())),
        ("clean scaling", Box::new(clean_scaling)),
        ("Ising peak", Box::new(ising_peak)),
        ("reduced critical scaling", Box::new(reduced_scaling)),
        ("distribution broadening", Box::new(broadening)),
        ("anisotropy twin peaks", Box::new(anisotropy_twin_peaks)),
        ("disorder-strength trend", Box::new(disorder_trend)),
        ("determinism", Box::new(|_| determinism())),
    ];
    let only: Option<Vec<usize>> = std::env::var("XYFID_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let (mut failed, mut ran) = (0, 0);
    for (number, (name, check)) in criteria.into_iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(number + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let o = check(&mut cache);
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} [{:.0}s] {}",
            number + 1,
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
