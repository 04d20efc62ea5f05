//! One pass/fail line per acceptance criterion, at the stated tolerances.
//! Run with `cargo test --test acceptance`.

use std::time::Instant;

use floquet_decay::fit::{gamma_vs_r, power_law_tail, scan_exponential_windows, WindowCriteria};
use floquet_decay::floquet::{find_pole, invert_survival, invert_survival_with, resonant_frequency, stabilization_search, stabilizing_frequency, Decomposition, InversionOptions};
use floquet_decay::freeparticle::{free_localization, trapped_evolution, trapping_config, TrapOptions, WavePacket};
use floquet_decay::oracle::{evolve_pde_with, GridSpec, Initial, OracleOptions};
use floquet_decay::timedomain::volterra_survival;
use floquet_decay::trace::max_relative_gap;
use floquet_decay::validate::{run_validation, ValidateOptions};
use floquet_decay::{Complex64 as C, ModelConfig, Potential, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String)>;

fn log_grid(t1: f64, t2: f64, per_decade: usize) -> Vec<f64> {
    let n = ((t2 / t1).log10() * per_decade as f64).round() as usize;
    (0..=n).map(|i| t1 * (t2 / t1).powf(i as f64 / n as f64)).collect()
}

fn windows_of(t: &[f64], s: &[f64], omega: f64) -> Result<usize> {
    Ok(scan_exponential_windows(t, s, omega, &WindowCriteria::default())?.passing)
}

/// The comparison curves of the Volterra pipeline, U1 at a = 0.59, r = 1.
fn criterion_1() -> Outcome {
    let mut lines = Vec::new();
    let mut finals = Vec::new();
    let mut ok = true;
    for (omega, want) in [(0.8, true), (1.12, false), (1.2, false), (1.25, true)] {
        let tr = volterra_survival(&ModelConfig::u1(0.59, 1.0, omega)?, 500.0, 0.02)?;
        let s = tr.survival();
        let (t, s): (Vec<f64>, Vec<f64>) = tr.t_grid.iter().zip(&s).skip(1).map(|(a, b)| (*a, *b)).unzip();
        let passing = windows_of(&t, &s, omega)?;
        if omega != 1.12 {
            ok &= (passing > 0) == want;
        }
        finals.push((omega, *s.last().unwrap()));
        lines.push(format!("w={omega}: |theta(500)|^2={:.3e} windows={passing}", s.last().unwrap()));
    }
    let top = finals.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    ok &= top == 1.12;
    Ok((ok, format!("largest at w={top}; {}", lines.join(", "))))
}

fn criterion_2() -> Outcome {
    let pts = stabilizing_frequency(Potential::U1 { a: 0.59 }, 1.0, 1, (0.95, 2.0))?;
    let Some(p) = pts.first() else { return Ok((false, "no root in [0.95, 2]".into())) };
    Ok(((p.omega - 1.089).abs() <= 0.010, format!("omega_s = {:.4} (roots found: {})", p.omega, pts.len())))
}

/// Decomposition trace extended by decades until the pole term is negligible
/// over the whole last decade.
fn criterion_3() -> Outcome {
    let cfg = ModelConfig::u1(0.59, 0.1, 1.5)?;
    let opts = InversionOptions::decomposition();
    let mut t_end = 1e3;
    loop {
        let dec = Decomposition::new(&cfg, &[t_end / 10.0], &opts)?;
        let (pole, cut) = dec.split(t_end / 10.0);
        if pole.norm_sqr() < 1e-10 * cut.norm_sqr() || t_end > 1e12 {
            break;
        }
        t_end *= 10.0;
    }
    let ts = log_grid(1.0, t_end, 40);
    let tr = invert_survival_with(&cfg, &ts, opts)?;
    let fit = power_law_tail(&ts, &tr.survival(), (t_end / 10.0, t_end))?;
    Ok(((fit.slope + 3.0).abs() <= 0.15, format!("slope {:.4} over [{:.0e}, {:.0e}]", fit.slope, t_end / 10.0, t_end)))
}

fn criterion_4() -> Outcome {
    let rs: Vec<f64> = log_grid(0.01, 0.1, 5);
    let mut gammas = Vec::new();
    for &r in &rs {
        let p = find_pole(&ModelConfig::u1(0.59, r, 1.5)?, C::new(0.0, 0.0))?;
        gammas.push(p.gamma);
    }
    let fit = gamma_vs_r(&rs, &gammas)?;
    let cfg = ModelConfig::u1(0.59, 0.1, 1.5)?;
    let tr = volterra_survival(&cfg, 3000.0, 0.05)?;
    let scan = scan_exponential_windows(&tr.t_grid[1..], &tr.survival()[1..], cfg.omega, &WindowCriteria::default())?;
    let best = scan.best.filter(|_| scan.found());
    let gamma = *gammas.last().unwrap();
    let rel = best.map_or(f64::INFINITY, |b| (-b.slope - gamma).abs() / gamma);
    Ok((
        (fit.slope - 2.0).abs() <= 0.1 && rel <= 0.1,
        format!("exponent {:.4}; Gamma(0.1) pole {gamma:.4e} vs window {:.4e} (rel {rel:.2e})", fit.slope, best.map_or(f64::NAN, |b| -b.slope)),
    ))
}

fn criterion_5() -> Outcome {
    let rs: Vec<f64> = log_grid(0.05, 0.3, 8);
    let mut gammas = Vec::new();
    for &r in &rs {
        gammas.push(find_pole(&ModelConfig::u1(0.59, r, 0.55)?, C::new(0.0, 0.0))?.gamma);
    }
    let fit = gamma_vs_r(&rs, &gammas)?;
    Ok(((fit.slope - 4.0).abs() <= 0.3, format!("exponent {:.4} over {} amplitudes", fit.slope, rs.len())))
}

fn criterion_6() -> Outcome {
    let base = ModelConfig::u1(0.59, 0.05, 1.0)?;
    let omega = resonant_frequency(&base, 1.0 + 0.05f64.powi(2) * 0.186)?;
    let cfg = base.with_omega(omega);
    let ts = log_grid(1.0, 1e13, 40);
    let tr = invert_survival_with(&cfg, &ts, InversionOptions::decomposition())?;
    let s = tr.survival();
    let scan = scan_exponential_windows(&ts, &s, omega, &WindowCriteria::default())?;
    let slopes: Vec<f64> = (9..13).map(|d| power_law_tail(&ts, &s, (10f64.powi(d), 10f64.powi(d + 1))).map(|f| f.slope)).collect::<Result<_>>()?;
    let last = *slopes.last().unwrap();
    let approaching = slopes.windows(2).all(|w| (w[1] + 3.0).abs() <= (w[0] + 3.0).abs());
    Ok((
        !scan.found() && (last + 3.0).abs() <= 0.15 && approaching,
        format!("omega = {omega:.10}; {} windows tested, {} exponential; decade slopes {:.3?}", scan.tested, scan.passing, slopes),
    ))
}

/// Random configurations; the oracle runs on its acceptance grid.
fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ok = true;
    let (mut worst_lv, mut worst_o) = (0.0f64, 0.0f64);
    let mut fails = Vec::new();
    let ts: Vec<f64> = (1..=100).map(|i| 0.5 * i as f64).collect();
    for _ in 0..10 {
        let (a, r, omega) = (rng.gen_range(0.2..2.0), rng.gen_range(0.05..1.0), rng.gen_range(0.5..2.0));
        let cfg = if rng.gen_bool(0.5) { ModelConfig::u1(a, r, omega)? } else { ModelConfig::u2(a, r, omega)? };
        let lap = invert_survival(&cfg, &ts)?;
        let vol = volterra_survival(&cfg, 50.0, 0.005)?;
        let (lv, _) = max_relative_gap(&lap, &vol, 1e-6);
        let grid = GridSpec::for_config(&cfg, 50.0)?;
        let run = evolve_pde_with(&cfg, &Initial::BoundState, &grid, 50.0, &OracleOptions { stride: 50, ..Default::default() })?.survival_trace()?;
        let (ol, _) = max_relative_gap(&run, &lap, 1e-6);
        let (ov, _) = max_relative_gap(&run, &vol, 1e-6);
        let o = ol.max(ov);
        if lv > 1e-3 || o > 1e-2 {
            ok = false;
            fails.push(format!("{} a={a:.3} r={r:.3} w={omega:.3}: {lv:.2e}/{o:.2e}", cfg.potential.label()));
        }
        worst_lv = worst_lv.max(lv);
        worst_o = worst_o.max(o);
    }
    Ok((ok, format!("worst Laplace-Volterra {worst_lv:.2e}, oracle {worst_o:.2e} {}", fails.join("; "))))
}

fn criterion_8() -> Outcome {
    let packet = WavePacket::standard();
    let opts = TrapOptions::default();
    let free = ModelConfig::free_trap(4.0, 0.0, 1.5)?;
    let tr = trapped_evolution(&free, &packet, 1000.0, &opts)?;
    let (t, p): (Vec<f64>, Vec<f64>) = tr.t.iter().zip(&tr.probability).filter(|(t, _)| **t >= 100.0).map(|(a, b)| (*a, *b)).unzip();
    let slope = power_law_tail(&t, &p, (t[0], t[t.len() - 1]))?.slope;
    let exact = free_localization(&packet, tr.window, 1000.0)?;
    let march_gap = (p.last().unwrap() - exact).abs() / exact;

    let point = stabilization_search(Potential::FreeTrap { a: 4.0 }, 1.5, 1)?.ok_or_else(|| floquet_decay::Error::Domain("no stabilization point".into()))?;
    let on = trapping_config(&point)?;
    let trace_on = trapped_evolution(&on, &packet, 1000.0, &opts)?;
    let trace_off = trapped_evolution(&on.with_r(0.8 * point.r_s), &packet, 1000.0, &opts)?;
    let (f_on, f_off) = (trace_on.floor(10.0), trace_off.floor(10.0));
    let q = trace_on.quasiperiodicity(200.0)?;
    Ok((
        (slope + 1.0).abs() <= 0.1 && f_on >= 10.0 * f_off && q > 0.99,
        format!(
            "(i) slope {slope:.4}, march vs closed form {march_gap:.1e}; (ii) r_s = {:.4}: floor {f_on:.3e} vs {f_off:.3e} off-manifold, quasiperiodicity {q:.4}",
            point.r_s
        ),
    ))
}

fn criterion_9() -> Outcome {
    let rep = run_validation(&ValidateOptions::default())?;
    print!("{}", rep.table());
    let failed: Vec<&str> = rep.failures().map(|c| c.name).collect();
    Ok((rep.all_passed(), format!("{} checks, failed: {:?}", rep.checks.len(), failed)))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "comparison curves", criterion_1),
        (2, "stabilizing frequency", criterion_2),
        (3, "power-law tail", criterion_3),
        (4, "golden-rule scaling", criterion_4),
        (5, "multiphoton scaling", criterion_5),
        (6, "resonance", criterion_6),
        (7, "cross-pipeline agreement", criterion_7),
        (8, "free particle and trapping", criterion_8),
        (9, "property suite", criterion_9),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (n, name, run) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("criterion {n} {name}: {} ({:.1} s) {detail}", if pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
