use std::fs;
use std::path::{Path, PathBuf};

use floquet_decay::fit::{exponential_window, gamma_vs_r, power_law_tail, scan_exponential_windows, FitReport, WindowCriteria};
use floquet_decay::floquet::{invert_survival, stabilization_roots, stabilization_search, stabilizing_frequency, StabilizationPoint};
use floquet_decay::freeparticle::{trapped_evolution, LocalizationTrace, TrapOptions, WavePacket};
use floquet_decay::oracle::{evolve_pde_with, Initial, OracleOptions};
use floquet_decay::timedomain::volterra_survival;
use floquet_decay::trace::max_relative_gap;
use floquet_decay::validate::{run_validation, ValidateOptions};
use floquet_decay::{ModelConfig, Pipeline, SurvivalTrace};
use rayon::prelude::*;

use crate::manifest::{potential, PotentialKind, RunManifest, SweepParameter};
use crate::output::{line_plot, num, write_atomic, write_csv, write_theta, Series};
use crate::CliError;

pub fn run_pipeline(m: &RunManifest, p: Pipeline) -> Result<SurvivalTrace, CliError> {
    let cfg = &m.config;
    if !cfg.binding {
        return Err(CliError::Manifest("the free pair has no bound state to survive; use free-trap".into()));
    }
    let trace = match p {
        Pipeline::Laplace => invert_survival(cfg, &m.sample_times())?,
        Pipeline::Volterra => {
            let full = volterra_survival(cfg, m.tmax, m.dt)?;
            let stride = (m.sample / m.dt).round().max(1.0) as usize;
            let last = full.t_grid.len() - 1;
            let keep: Vec<usize> = (0..=last).filter(|i| i % stride == 0 || *i == last).collect();
            SurvivalTrace::new(keep.iter().map(|&i| full.t_grid[i]).collect(), keep.iter().map(|&i| full.theta[i]).collect(), Pipeline::Volterra, *cfg)?
        }
        Pipeline::Oracle => {
            let grid = m.oracle_grid()?;
            let stride = (m.sample / grid.dt).round().max(1.0) as usize;
            evolve_pde_with(cfg, &Initial::BoundState, &grid, m.tmax, &OracleOptions { stride, ..Default::default() })?.survival_trace()?
        }
        Pipeline::Asymptotic => return Err(CliError::Manifest("the asymptotic forms are not a survival pipeline".into())),
    };
    Ok(trace)
}

fn write_manifest(m: &RunManifest, dir: &Path) -> Result<(), CliError> {
    write_atomic(&dir.join("manifest.toml"), m.manifest_text().as_bytes())
}

fn curve_label(cfg: &ModelConfig) -> String {
    format!("{} a={} r={} w={}", cfg.potential.label(), cfg.a(), cfg.r, cfg.omega)
}

/// One survival run into `dir`; returns the traces in pipeline order.
fn survival_into(m: &RunManifest, dir: &Path) -> Result<Vec<SurvivalTrace>, CliError> {
    let pipelines = m.pipeline.pipelines();
    let traces: Vec<SurvivalTrace> = pipelines.iter().map(|&p| run_pipeline(m, p)).collect::<Result<_, _>>()?;
    fs::create_dir_all(dir)?;
    if let [only] = traces.as_slice() {
        write_theta(&dir.join("theta.csv"), only)?;
    } else {
        for tr in &traces {
            write_theta(&dir.join(format!("theta_{}.csv", tr.pipeline.label())), tr)?;
        }
        let mut rows = Vec::new();
        for i in 0..traces.len() {
            for j in i + 1..traces.len() {
                // compare on the coarser sampling
                let (a, b) = if traces[i].len() <= traces[j].len() { (&traces[i], &traces[j]) } else { (&traces[j], &traces[i]) };
                let (dev, at) = max_relative_gap(a, b, 1e-6);
                rows.push(vec![traces[i].pipeline.label().into(), traces[j].pipeline.label().into(), num(dev), num(at), (dev <= m.tol).to_string()]);
            }
        }
        write_csv(&dir.join("deviation.csv"), &["first", "second", "max_rel_dev", "t_at_max", "within_tol"], rows)?;
    }
    let series: Vec<Series> = traces.iter().map(|t| Series::log_survival(t.pipeline.label(), t)).collect();
    let svg = line_plot(&curve_label(&m.config), "t", "log10 |theta|^2", &series);
    write_atomic(&dir.join("theta.svg"), svg.as_bytes())?;
    write_manifest(m, dir)?;
    Ok(traces)
}

pub fn survival(m: &RunManifest) -> Result<(), CliError> {
    let traces = survival_into(m, &m.out)?;
    for tr in &traces {
        let s = tr.survival();
        println!("{:<9} |theta({})|^2 = {}", tr.pipeline.label(), m.tmax, num(*s.last().unwrap()));
    }
    if traces.len() > 1 {
        print!("{}", fs::read_to_string(m.out.join("deviation.csv"))?);
    }
    Ok(())
}

/// Sweep one parameter; each point runs in its own worker and directory.
pub fn sweep(m: &RunManifest, parameter: Option<SweepParameter>, values: &[f64]) -> Result<(), CliError> {
    let (parameter, values) = match (parameter, values.is_empty(), &m.sweep) {
        (Some(p), false, _) => (p, values.to_vec()),
        (None, true, Some(s)) => (s.parameter, s.values.clone()),
        _ => return Err(CliError::Manifest("a sweep needs --param with --values, or a [sweep] section".into())),
    };
    if values.is_empty() {
        return Err(CliError::Manifest("the sweep has no values".into()));
    }
    let points: Vec<RunManifest> = values.iter().map(|&v| m.with_parameter(parameter, v)).collect::<Result<_, _>>()?;
    let results: Vec<Vec<SurvivalTrace>> =
        points.par_iter().enumerate().map(|(i, pm)| survival_into(pm, &m.out.join(format!("point_{i:03}")))).collect::<Result<_, _>>()?;

    let criteria = WindowCriteria::default();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (i, (pm, traces)) in points.iter().zip(&results).enumerate() {
        let tr = &traces[0];
        let s = tr.survival();
        let (t, s): (Vec<f64>, Vec<f64>) = tr.t_grid.iter().zip(&s).filter(|(t, v)| **t > 0.0 && **v > 0.0).map(|(a, b)| (*a, *b)).unzip();
        let scan = scan_exponential_windows(&t, &s, pm.config.omega, &criteria)?;
        let gamma = scan.best.filter(|_| scan.found()).map_or(String::new(), |b| num(-b.slope));
        let c = &pm.config;
        rows.push(vec![i.to_string(), num(c.a()), num(c.r), num(c.omega), tr.pipeline.label().into(), num(*s.last().unwrap_or(&f64::NAN)), scan.passing.to_string(), gamma]);
        series.push(Series::log_survival(format!("{parameter:?}={}", values[i]).to_lowercase(), tr));
        println!("point {i:03}: {} |theta({})|^2 = {} windows = {}", curve_label(c), pm.tmax, num(*s.last().unwrap_or(&f64::NAN)), scan.passing);
    }
    write_csv(&m.out.join("sweep.csv"), &["index", "a", "r", "omega", "pipeline", "abs2_final", "exponential_windows", "gamma_window"], rows)?;
    write_atomic(&m.out.join("sweep.svg"), line_plot("sweep", "t", "log10 |theta|^2", &series).as_bytes())?;
    write_manifest(m, &m.out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StabilizeMode {
    /// For each omega on the grid, the amplitudes r_s that stabilize.
    Amplitude,
    /// At the manifest's r, the frequencies omega_s in the range.
    Frequency,
}

pub struct StabilizeRequest {
    pub a_values: Vec<f64>,
    pub omega_range: (f64, f64),
    pub omega_steps: usize,
    pub n: u32,
    pub mode: StabilizeMode,
}

pub fn stabilize(m: &RunManifest, req: &StabilizeRequest) -> Result<(), CliError> {
    let kind = match m.config.potential {
        floquet_decay::Potential::U1 { .. } => PotentialKind::U1,
        floquet_decay::Potential::U2 { .. } => PotentialKind::U2,
        floquet_decay::Potential::FreeTrap { .. } => PotentialKind::Free,
    };
    let a_values = if req.a_values.is_empty() { vec![m.config.a()] } else { req.a_values.clone() };
    let (lo, hi) = req.omega_range;
    if !(lo > 0.0 && hi >= lo) || req.n == 0 {
        return Err(CliError::Manifest(format!("need 0 < omega_min <= omega_max and N >= 1 (got [{lo}, {hi}], N = {})", req.n)));
    }
    let found: Vec<Vec<StabilizationPoint>> = match req.mode {
        StabilizeMode::Frequency => a_values
            .par_iter()
            .map(|&a| if hi > lo { stabilizing_frequency(potential(kind, a), m.config.r, req.n, (lo, hi)) } else { Err(floquet_decay::Error::Domain("a frequency search needs omega_min < omega_max".into())) })
            .collect::<Result<_, _>>()?,
        StabilizeMode::Amplitude => {
            let steps = if hi > lo { req.omega_steps.max(2) } else { 1 };
            let grid: Vec<(f64, f64)> = a_values.iter().flat_map(|&a| (0..steps).map(move |i| (a, if steps == 1 { lo } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 }))).collect();
            grid.par_iter().map(|&(a, w)| stabilization_roots(potential(kind, a), w, req.n)).collect::<Result<_, _>>()?
        }
    };
    let points: Vec<&StabilizationPoint> = found.iter().flatten().collect();
    let rows = points.iter().map(|p| vec![num(p.a), num(p.omega), num(p.r_s), num(p.g0), p.n.to_string(), num(p.residual), p.inequalities.to_string()]);
    write_csv(&m.out.join("manifold.csv"), &["a", "omega", "r_s", "g0", "n", "residual", "inequalities"], rows)?;
    if !points.is_empty() {
        // amplitude mode: the k-th root at each omega traces one branch of the manifold
        let mut series: Vec<Series> = Vec::new();
        for roots in &found {
            for (k, p) in roots.iter().enumerate() {
                let key = match req.mode {
                    StabilizeMode::Amplitude => format!("{} a={} N={} root {}", kind_label(kind), p.a, req.n, k + 1),
                    StabilizeMode::Frequency => format!("{} a={} N={}", kind_label(kind), p.a, req.n),
                };
                match series.iter_mut().find(|s| s.label == key) {
                    Some(s) => s.points.push((p.omega, p.r_s)),
                    None => series.push(Series { label: key, points: vec![(p.omega, p.r_s)] }),
                }
            }
        }
        write_atomic(&m.out.join("manifold.svg"), line_plot("stabilization manifold", "omega", "r_s", &series).as_bytes())?;
    }
    write_manifest(m, &m.out)?;
    println!("{} stabilization points", points.len());
    for p in points.iter().take(20) {
        println!("a = {} omega = {} r_s = {} g0 = {} residual = {:.2e}", p.a, p.omega, p.r_s, p.g0, p.residual);
    }
    Ok(())
}

fn kind_label(k: PotentialKind) -> &'static str {
    match k {
        PotentialKind::U1 => "u1",
        PotentialKind::U2 => "u2",
        PotentialKind::Free => "free",
    }
}

pub struct FitRequest {
    pub input: PathBuf,
    pub kind: FitKindArg,
    pub window: Option<(f64, f64)>,
    pub omega: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FitKindArg {
    ExponentialWindow,
    /// Every window of the trace; reports the first exponential one.
    WindowScan,
    PowerLawTail,
    GammaVsR,
}

fn read_columns(path: &Path, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let bad = |msg: String| CliError::Manifest(format!("{}: {msg}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| bad(format!("no column {name}")));
    let (ix, iy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| rec[i].trim().parse::<f64>().map_err(|e| bad(format!("{e} in {:?}", &rec[i])));
        xs.push(parse(ix)?);
        ys.push(parse(iy)?);
    }
    Ok((xs, ys))
}

pub fn fit(req: &FitRequest) -> Result<FitReport, CliError> {
    let need_omega = || req.omega.ok_or_else(|| CliError::Manifest("this fit needs --omega for its period count".into()));
    let report = match req.kind {
        FitKindArg::GammaVsR => {
            let (r, g) = read_columns(&req.input, "r", "gamma")?;
            gamma_vs_r(&r, &g)?
        }
        kind => {
            let (t, s) = read_columns(&req.input, "t", "abs2")?;
            let (t, s): (Vec<f64>, Vec<f64>) = t.into_iter().zip(s).filter(|(t, _)| *t > 0.0).unzip();
            match kind {
                FitKindArg::ExponentialWindow => {
                    let w = req.window.ok_or_else(|| CliError::Manifest("an exponential window needs --window t1,t2".into()))?;
                    exponential_window(&t, &s, need_omega()?, w, &WindowCriteria::default())?
                }
                FitKindArg::WindowScan => {
                    let scan = scan_exponential_windows(&t, &s, need_omega()?, &WindowCriteria::default())?;
                    println!("{} windows tested, {} exponential", scan.tested, scan.passing);
                    scan.best.ok_or_else(|| CliError::Manifest("the trace is shorter than three periods".into()))?
                }
                _ => {
                    let t_end = *t.last().ok_or_else(|| CliError::Manifest("empty trace".into()))?;
                    power_law_tail(&t, &s, req.window.unwrap_or((t_end / 10.0, t_end)))?
                }
            }
        }
    };
    let row = vec![report.kind.label().to_string(), num(report.window.0), num(report.window.1), num(report.slope), num(report.intercept), num(report.residual), report.verdict.to_string()];
    let header = ["kind", "lo", "hi", "slope", "intercept", "residual", "verdict"];
    print!("{}", String::from_utf8_lossy(&crate::output::csv_bytes(&header, [row.clone()])?));
    if let Some(dir) = &req.out {
        write_csv(&dir.join("fit.csv"), &header, [row])?;
    }
    Ok(report)
}

pub struct TrapRequest {
    pub n: u32,
    pub off_factor: f64,
    pub steps_per_period: usize,
    pub dx: f64,
}

fn write_localization(path: &Path, tr: &LocalizationTrace) -> Result<(), CliError> {
    let rows = (0..tr.t.len()).map(|i| vec![num(tr.t[i]), num(tr.probability[i]), num(tr.psi_plus[i].re), num(tr.psi_plus[i].im), num(tr.psi_minus[i].re), num(tr.psi_minus[i].im)]);
    write_csv(path, &["t", "probability", "re_psi_plus", "im_psi_plus", "re_psi_minus", "im_psi_minus"], rows)
}

/// Standard packet released into the driven free pair, on and off the manifold.
pub fn free_trap(m: &RunManifest, req: &TrapRequest) -> Result<(), CliError> {
    let cfg = m.config;
    if cfg.binding {
        return Err(CliError::Manifest("free-trap needs --potential free".into()));
    }
    let r_on = if m.r_given {
        cfg.r
    } else {
        let p = stabilization_search(cfg.potential, cfg.omega, req.n)?
            .ok_or_else(|| CliError::Solver(floquet_decay::Error::NonConvergence { what: format!("no stabilization point at a = {}, omega = {}, N = {}", cfg.a(), cfg.omega, req.n), residual: f64::NAN }))?;
        println!("stabilization point: r_s = {} g0 = {} inequalities = {}", p.r_s, p.g0, p.inequalities);
        p.r_s
    };
    let opts = TrapOptions { steps_per_period: req.steps_per_period, dx: req.dx, ..Default::default() };
    let packet = WavePacket::standard();
    let on = cfg.with_r(r_on);
    let off = cfg.with_r(req.off_factor * r_on);
    let (tr_on, tr_off) = rayon::join(|| trapped_evolution(&on, &packet, m.tmax, &opts), || trapped_evolution(&off, &packet, m.tmax, &opts));
    let (tr_on, tr_off) = (tr_on?, tr_off?);
    write_localization(&m.out.join("localization.csv"), &tr_on)?;
    write_localization(&m.out.join("localization_off.csv"), &tr_off)?;
    let series: Vec<Series> = [(&tr_on, format!("r = {r_on:.4}")), (&tr_off, format!("r = {:.4}", off.r))]
        .into_iter()
        .map(|(tr, label)| Series { label, points: tr.t.iter().zip(&tr.probability).filter(|(_, p)| **p > 0.0).map(|(t, p)| (*t, p.log10())).collect() })
        .collect();
    write_atomic(&m.out.join("localization.svg"), line_plot(&format!("free pair a={} w={}", cfg.a(), cfg.omega), "t", "log10 P(|x| <= L)", &series).as_bytes())?;
    write_manifest(m, &m.out)?;
    let (f_on, f_off) = (tr_on.floor(10.0), tr_off.floor(10.0));
    println!("window L = {}", tr_on.window);
    println!("floor (last 10 periods): {} on, {} off (ratio {:.3e})", num(f_on), num(f_off), f_on / f_off);
    if m.tmax >= 400.0 {
        println!("quasiperiodicity from t = 200: {:.5}", tr_on.quasiperiodicity(200.0)?);
    }
    Ok(())
}

pub fn validate(tol_scale: f64, oracle: bool, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let rep = run_validation(&ValidateOptions { tol_scale, seed, oracle })?;
    print!("{}", rep.table());
    if let Some(dir) = out {
        let rows = rep.checks.iter().map(|c| vec![c.name.to_string(), c.passed.to_string(), num(c.value), num(c.tolerance), c.detail.clone()]);
        write_csv(&dir.join("validate.csv"), &["invariant", "passed", "value", "tolerance", "worst_at"], rows)?;
    }
    let failed: Vec<String> = rep.failures().map(|c| format!("{} ({:.3e} > {:.3e} at {})", c.name, c.value, c.tolerance, c.detail)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join("; ")))
    }
}
