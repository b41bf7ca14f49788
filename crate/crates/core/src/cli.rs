//! Command-line frontend: config ingestion, pipeline orchestration, and
//! report emission. Exit codes compose in scripts: 0 pass/certified,
//! 1 violation, 2 inconclusive, 3 input/config error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::coefficient::{check_hypotheses, HypothesisMode, HypothesisReport, Verdict};
use crate::config::{NumericsBlock, OutputFormat, RunConfig};
use crate::criterion::{
    find_thresholds, s_zero, verify_criterion, CriterionVerdict, ProblemParams, SampleRow,
};
use crate::dual::{build_dual, DualTransform};
use crate::error::{Error, Result};
use crate::numerics::log_grid;
use crate::shooting::{
    decay_check, energy, find_ground_state, pullback_and_residual, uniqueness_scan, DecayCheck,
    EnergyReport, PullbackRow, ShootOptions,
};

#[derive(Parser)]
#[command(name = "qlsu", version, about = "Dual-transform uniqueness certification \
for quasi-linear Schrodinger ground states")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(short = 'c', long = "config", global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to the config's output.path, else stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format override for table-emitting subcommands.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Repeat criterion + uniqueness scan over a log-spaced frequency grid,
    /// written lo:hi:n.
    #[arg(long = "m-sweep", global = true)]
    m_sweep: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Audit the coefficient hypotheses (strict, plus relaxed for k < 2).
    CheckHypotheses,
    /// Tabulate the dual transform g and its first three derivatives.
    Dual,
    /// Sample the uniqueness criterion and certify K <= 0 past s0.
    Criterion,
    /// Report the persistence thresholds s1, s2, s_bar and m0.
    Thresholds,
    /// Shoot for the ground state and dump the profile with its pullback.
    Shoot,
    /// Full shooting verification: scan, bisect, residual, energy, decay.
    Verify,
    /// Run the whole chain and emit a single JSON summary.
    Report,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum FormatArg {
    Csv,
    Json,
}

pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("qlsu: {err}");
            match err {
                Error::IntegrationFailure { .. } => 2,
                _ => 3,
            }
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("missing -c/--config <file>".into()))?;
    let cfg = RunConfig::load(path)?;
    let format = match cli.format {
        Some(FormatArg::Csv) => Some(OutputFormat::Csv),
        Some(FormatArg::Json) => Some(OutputFormat::Json),
        None => cfg.output.format,
    };
    let sweep = match &cli.m_sweep {
        Some(text) => {
            if !matches!(cli.command, Cmd::Criterion | Cmd::Report) {
                return Err(Error::Config(
                    "--m-sweep applies only to the criterion and report subcommands".into(),
                ));
            }
            Some(parse_sweep(text)?)
        }
        None => None,
    };

    let (code, text) = match cli.command {
        Cmd::CheckHypotheses => cmd_check_hypotheses(&cfg)?,
        Cmd::Dual => cmd_dual(&cfg, format)?,
        Cmd::Criterion => match &sweep {
            Some(ms) => cmd_criterion_sweep(&cfg, ms)?,
            None => cmd_criterion(&cfg, format)?,
        },
        Cmd::Thresholds => cmd_thresholds(&cfg)?,
        Cmd::Shoot => cmd_shoot(&cfg, format)?,
        Cmd::Verify => cmd_verify(&cfg)?,
        Cmd::Report => match &sweep {
            Some(ms) => cmd_report_sweep(&cfg, ms)?,
            None => cmd_report(&cfg)?,
        },
    };
    let dest = cli
        .out
        .clone()
        .or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    match dest {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(code)
}

fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Config(format!("--m-sweep expects lo:hi:n, got '{text}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(bad());
    }
    Ok(log_grid(lo, hi, n))
}

fn verdict_exit(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 2,
    }
}

fn cmd_check_hypotheses(cfg: &RunConfig) -> Result<(i32, String)> {
    let spec = cfg.coefficient_spec()?;
    let grid = log_grid(1e-3, cfg.numerics.s_max.max(1e8), cfg.numerics.grid_points);
    let strict = check_hypotheses(&spec, &grid, HypothesisMode::Strict)?;
    let relaxed: Option<HypothesisReport> = if spec.k() < 2.0 {
        Some(check_hypotheses(&spec, &grid, HypothesisMode::Relaxed { p: cfg.problem.p })?)
    } else {
        None
    };
    // the relaxed set is an alternative sufficient condition: either passing
    // report clears the coefficient
    let verdicts: Vec<Verdict> = std::iter::once(strict.overall())
        .chain(relaxed.iter().map(|r| r.overall()))
        .collect();
    let overall = if verdicts.contains(&Verdict::Pass) {
        Verdict::Pass
    } else if verdicts.contains(&Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    };
    let doc = json!({
        "strict": strict,
        "relaxed": relaxed,
        "overall": overall,
    });
    Ok((verdict_exit(overall), pretty(&doc)))
}

fn cmd_dual(cfg: &RunConfig, format: Option<OutputFormat>) -> Result<(i32, String)> {
    let spec = cfg.coefficient_spec()?;
    let dt = build_dual(&spec, cfg.numerics.s_max, cfg.numerics.ode_tol)?;
    let grid = log_grid(1e-3, dt.s_max(), cfg.numerics.grid_points);
    let rows: Vec<(f64, f64, f64, f64, f64)> = grid
        .iter()
        .map(|&s| dt.eval_g(s).map(|(g, gp, gpp, gppp)| (s, g, gp, gpp, gppp)))
        .collect::<Result<_>>()?;
    let text = match format {
        Some(OutputFormat::Json) => {
            let objs: Vec<_> = rows
                .iter()
                .map(|r| json!({"s": r.0, "g": r.1, "gp": r.2, "gpp": r.3, "gppp": r.4}))
                .collect();
            pretty(&json!(objs))
        }
        _ => {
            let mut text = String::from("s,g,gp,gpp,gppp\n");
            for r in &rows {
                let _ = writeln!(text, "{},{},{},{},{}", r.0, r.1, r.2, r.3, r.4);
            }
            text
        }
    };
    Ok((0, text))
}

fn criterion_csv(samples: &[SampleRow]) -> String {
    let mut text = String::from("s,g,h,hp,hpp,K,Kh,H1,H2,G0,R1,R2\n");
    for r in samples {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.s, r.g, r.h, r.hp, r.hpp, r.k, r.kh, r.h1, r.h2, r.g0, r.r1, r.r2
        );
    }
    text
}

fn criterion_exit(verdict: &CriterionVerdict) -> i32 {
    match verdict {
        CriterionVerdict::Certified => 0,
        CriterionVerdict::Violated { .. } => 1,
        CriterionVerdict::Inconclusive { .. } => 2,
    }
}

fn cmd_criterion(cfg: &RunConfig, format: Option<OutputFormat>) -> Result<(i32, String)> {
    let params = cfg.problem_params()?;
    let dt = build_dual(&params.spec, cfg.numerics.s_max, cfg.numerics.ode_tol)?;
    let tgrid = log_grid(1e-2, dt.s_max(), cfg.numerics.grid_points);
    let rep = verify_criterion(&params, &dt, &tgrid, cfg.numerics.grid_points)?;
    match &rep.verdict {
        CriterionVerdict::Certified => eprintln!("criterion: certified (s0 = {})", rep.s0),
        CriterionVerdict::Violated { s, k } => {
            eprintln!("criterion: violated at s = {s} (K = {k})")
        }
        CriterionVerdict::Inconclusive { reason } => eprintln!("criterion: inconclusive: {reason}"),
    }
    let text = match format {
        Some(OutputFormat::Json) => pretty(&serde_json::to_value(&rep).expect("serializable")),
        _ => criterion_csv(&rep.samples),
    };
    Ok((criterion_exit(&rep.verdict), text))
}

fn cmd_criterion_sweep(cfg: &RunConfig, ms: &[f64]) -> Result<(i32, String)> {
    let spec = cfg.coefficient_spec()?;
    let dt = build_dual(&spec, cfg.numerics.s_max, cfg.numerics.ode_tol)?;
    let tgrid = log_grid(1e-2, dt.s_max(), cfg.numerics.grid_points);
    let mut worst = 0;
    let mut entries = Vec::new();
    for &m in ms {
        let params = cfg.problem_params_at(m)?;
        let rep = verify_criterion(&params, &dt, &tgrid, cfg.numerics.grid_points)?;
        worst = worst.max(criterion_exit(&rep.verdict));
        entries.push(json!({
            "m": m,
            "s0": rep.s0,
            "thresholds": rep.thresholds,
            "m_above_threshold": rep.m_above_threshold,
            "result": serde_json::to_value(&rep.verdict).expect("serializable"),
        }));
    }
    Ok((worst, pretty(&json!(entries))))
}

fn cmd_thresholds(cfg: &RunConfig) -> Result<(i32, String)> {
    let params = cfg.problem_params()?;
    let dt = build_dual(&params.spec, cfg.numerics.s_max, cfg.numerics.ode_tol)?;
    let tgrid = log_grid(1e-2, dt.s_max(), cfg.numerics.grid_points);
    let th = find_thresholds(&params, &dt, &tgrid)?;
    let found = th.s_bar.is_some();
    let doc = json!({
        "s1": th.s1,
        "s2": th.s2,
        "s_bar": th.s_bar,
        "m0_est": th.m0_est,
        "verdict": if found { "found" } else { "inconclusive" },
    });
    Ok((if found { 0 } else { 2 }, pretty(&doc)))
}

struct ShootRun {
    ground_state_count: usize,
    alpha_star: Option<f64>,
    rows: Vec<PullbackRow>,
    sup_residual: Option<f64>,
    energy: Option<EnergyReport>,
    decay: Option<DecayCheck>,
}

fn run_shooting(params: &ProblemParams, dt: &DualTransform, nm: &NumericsBlock) -> Result<ShootRun> {
    let mut opts = ShootOptions::for_params(params);
    opts.ode_tol = nm.ode_tol;
    if let Some(r) = nm.r_max {
        opts.r_max = r;
    }
    let s0 = s_zero(params, dt)?;
    let hi = (1e3 * s0).min(0.5 * dt.s_max());
    let grid = log_grid(1.001 * s0, hi, nm.alpha_grid);
    let scan = uniqueness_scan(params, dt, &grid, &opts)?;
    let mut run = ShootRun {
        ground_state_count: scan.count,
        alpha_star: None,
        rows: Vec::new(),
        sup_residual: None,
        energy: None,
        decay: None,
    };
    if let Some(&(lo, hi)) = scan.brackets.first() {
        let (alpha, profile) = find_ground_state(params, dt, (lo, hi), 1e-12 * hi, &opts)?;
        let (rows, sup) = pullback_and_residual(params, dt, &profile)?;
        run.alpha_star = Some(alpha);
        run.sup_residual = Some(sup);
        run.energy = Some(energy(params, dt, &profile)?);
        run.decay = Some(decay_check(&profile, params));
        run.rows = rows;
    }
    Ok(run)
}

fn cmd_shoot(cfg: &RunConfig, format: Option<OutputFormat>) -> Result<(i32, String)> {
    let params = cfg.problem_params()?;
    let dt = build_dual(&params.spec, cfg.numerics.s_max, cfg.numerics.ode_tol)?;
    let run = run_shooting(&params, &dt, &cfg.numerics)?;
    let Some(alpha) = run.alpha_star else {
        eprintln!("shoot: no ground-state bracket on the alpha grid");
        return Ok((2, String::new()));
    };
    eprintln!("shoot: alpha* = {alpha}");
    let text = match format {
        Some(OutputFormat::Json) => {
            pretty(&serde_json::to_value(&run.rows).expect("serializable"))
        }
        _ => {
            let mut text = String::from("r,v,vp,u,up\n");
            for r in &run.rows {
                let _ = writeln!(text, "{},{},{},{},{}", r.r, r.v, r.vp, r.u, r.up);
            }
            text
        }
    };
    Ok((0, text))
}

fn shooting_summary(run: &ShootRun) -> serde_json::Value {
    let (decay_rate, decay_expected) = match &run.decay {
        Some(DecayCheck::Estimate { rate, expected, .. }) => (Some(*rate), Some(*expected)),
        _ => (None, None),
    };
    json!({
        "alpha_star": run.alpha_star,
        "ground_state_count": run.ground_state_count,
        "sup_residual": run.sup_residual,
        "energy": run.energy.map(|e| e.dual),
        "energy_quasilinear": run.energy.map(|e| e.quasilinear),
        "decayed": run.energy.map(|e| e.decayed),
        "decay_rate": decay_rate,
        "decay_expected": decay_expected,
    })
}

/// 0 pass / 1 violation / 2 inconclusive for a completed shooting run.
fn shooting_exit(run: &ShootRun) -> i32 {
    if run.ground_state_count != 1 {
        return 1;
    }
    let (Some(sup), Some(e)) = (run.sup_residual, run.energy) else {
        return 2;
    };
    if sup > 1e-5 || (e.dual - e.quasilinear).abs() > 1e-8 * (1.0 + e.dual.abs()) {
        return 1;
    }
    match &run.decay {
        Some(DecayCheck::Estimate { rate, expected, .. }) => {
            if (rate - expected).abs() > 0.05 * expected {
                1
            } else {
                0
            }
        }
        _ => 2,
    }
}

fn cmd_verify(cfg: &RunConfig) -> Result<(i32, String)> {
    let params = cfg.problem_params()?;
    let dt = build_dual(&params.spec, cfg.numerics.s_max, cfg.numerics.ode_tol)?;
    let run = run_shooting(&params, &dt, &cfg.numerics)?;
    Ok((shooting_exit(&run), pretty(&shooting_summary(&run))))
}

fn cmd_report(cfg: &RunConfig) -> Result<(i32, String)> {
    let spec = cfg.coefficient_spec()?;
    let (hyp_code, hyp_text) = cmd_check_hypotheses(cfg)?;
    let hypotheses: serde_json::Value =
        serde_json::from_str(&hyp_text).expect("own JSON parses");

    let params = cfg.problem_params()?;
    let dt = build_dual(&spec, cfg.numerics.s_max, cfg.numerics.ode_tol)?;
    let asymptotics = dt.asymptotic_diagnostics().ok();
    let tgrid = log_grid(1e-2, dt.s_max(), cfg.numerics.grid_points);
    let crit = verify_criterion(&params, &dt, &tgrid, cfg.numerics.grid_points)?;
    let run = run_shooting(&params, &dt, &cfg.numerics)?;

    let crit_code = criterion_exit(&crit.verdict);
    let shoot_code = shooting_exit(&run);
    let code = if hyp_code == 1 || crit_code == 1 || shoot_code == 1 {
        1
    } else {
        hyp_code.max(crit_code).max(shoot_code)
    };
    let doc = json!({
        "hypotheses": hypotheses,
        "dual": {
            "c0": dt.c0(),
            "c1": dt.c1(),
            "s_max": dt.s_max(),
            "asymptotics": asymptotics,
        },
        "thresholds": crit.thresholds,
        "criterion": {
            "s0": crit.s0,
            "m_above_threshold": crit.m_above_threshold,
            "result": serde_json::to_value(&crit.verdict).expect("serializable"),
        },
        "shooting": shooting_summary(&run),
    });
    Ok((code, pretty(&doc)))
}

fn cmd_report_sweep(cfg: &RunConfig, ms: &[f64]) -> Result<(i32, String)> {
    let spec = cfg.coefficient_spec()?;
    let dt = build_dual(&spec, cfg.numerics.s_max, cfg.numerics.ode_tol)?;
    let tgrid = log_grid(1e-2, dt.s_max(), cfg.numerics.grid_points);
    let mut worst = 0;
    let mut entries = Vec::new();
    for &m in ms {
        let params = cfg.problem_params_at(m)?;
        let crit = verify_criterion(&params, &dt, &tgrid, cfg.numerics.grid_points)?;
        let run = run_shooting(&params, &dt, &cfg.numerics)?;
        let crit_code = criterion_exit(&crit.verdict);
        let shoot_code = shooting_exit(&run);
        worst = if crit_code == 1 || shoot_code == 1 {
            1.max(worst)
        } else {
            worst.max(crit_code).max(shoot_code)
        };
        entries.push(json!({
            "m": m,
            "s0": crit.s0,
            "m_above_threshold": crit.m_above_threshold,
            "result": serde_json::to_value(&crit.verdict).expect("serializable"),
            "shooting": shooting_summary(&run),
        }));
    }
    Ok((worst, pretty(&json!(entries))))
}

fn pretty(doc: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("JSON serialization");
    text.push('\n');
    text
}
