//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.
//!
//! Run with `cargo test -p oue-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use oue_core::cli::config::{Command, RunConfig};
use oue_core::cli::experiments::run_experiment;
use oue_core::cli::report::{Check, Outcome};
use oue_core::kernel::VorticityData;

/// Wall-clock budgets, one per criterion.
const BUDGET_HERMITE: Duration = Duration::from_secs(60);
const BUDGET_COEFFS: Duration = Duration::from_secs(300);
const BUDGET_FIELD: Duration = Duration::from_secs(300);
const BUDGET_MOMENTS: Duration = Duration::from_secs(120);
const BUDGET_DISPERSIVE: Duration = Duration::from_secs(600);
const BUDGET_FLOW: Duration = Duration::from_secs(120);
const BUDGET_QUASI_INVARIANCE: Duration = Duration::from_secs(1800);
const BUDGET_KERNEL: Duration = Duration::from_secs(600);
const BUDGET_TRANSPORT: Duration = Duration::from_secs(600);

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    runs: Vec<RunConfig>,
}

fn config(command: Command, edit: impl FnOnce(&mut RunConfig)) -> RunConfig {
    let mut cfg = RunConfig::for_command(command);
    edit(&mut cfg);
    cfg.validate().expect("acceptance configuration is valid");
    cfg
}

fn criteria() -> Vec<Criterion> {
    let hermite = [0.25, 0.5, 0.9].map(|c| {
        config(Command::VerifyHermite, |cfg| {
            cfg.n = 12;
            cfg.c = c;
        })
    });
    let kernel = [
        VorticityData::gaussian(1.0, 0.5),
        VorticityData::from_name("ring", 1.0, 0.5, 1.0).unwrap(),
        VorticityData::from_name("dipole", 1.0, 0.5, 1.0).unwrap(),
    ]
    .map(|data| config(Command::KernelBounds, |cfg| cfg.vorticity = data));
    vec![
        Criterion { id: 1, name: "hermite identities", budget: BUDGET_HERMITE, runs: hermite.to_vec() },
        Criterion { id: 2, name: "coefficient oracle", budget: BUDGET_COEFFS, runs: vec![config(Command::VerifyCoeffs, |c| c.n = 6)] },
        Criterion { id: 3, name: "field consistency", budget: BUDGET_FIELD, runs: vec![config(Command::VerifyField, |c| c.n = 4)] },
        Criterion { id: 4, name: "moments", budget: BUDGET_MOMENTS, runs: vec![config(Command::Moments, |c| c.m = 100_000)] },
        Criterion { id: 5, name: "dispersive bounds", budget: BUDGET_DISPERSIVE, runs: vec![config(Command::Dispersive, |c| c.n = 40)] },
        Criterion {
            id: 6,
            name: "flow suite",
            budget: BUDGET_FLOW,
            runs: vec![config(Command::Evolve, |c| {
                c.n = 4;
                c.tol = 1e-9;
                c.t_final = 1.0;
            })],
        },
        Criterion {
            id: 7,
            name: "quasi-invariance",
            budget: BUDGET_QUASI_INVARIANCE,
            runs: vec![config(Command::QuasiInvariance, |c| {
                c.n = 4;
                c.gamma = 1.0;
                c.c = 0.5;
                c.t_final = 0.1;
                c.m = 10_000;
            })],
        },
        Criterion { id: 8, name: "kernel bounds", budget: BUDGET_KERNEL, runs: kernel.to_vec() },
        Criterion {
            id: 9,
            name: "transport invariant",
            budget: BUDGET_TRANSPORT,
            runs: vec![config(Command::Particle, |c| {
                c.n = 8;
                c.t_final = 0.2;
            })],
        },
    ]
}

fn label(cfg: &RunConfig) -> String {
    match cfg.command {
        Command::VerifyHermite => format!("c = {}", cfg.c),
        Command::KernelBounds => cfg.vorticity.name().to_string(),
        _ => String::new(),
    }
}

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for crit in criteria().into_iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let mut checks: Vec<(String, Check)> = Vec::new();
        for cfg in &crit.runs {
            let tag = label(cfg);
            let outcome = run_experiment(cfg).unwrap_or_else(|e| Outcome {
                checks: vec![Check::at_most("experiment-completed", f64::INFINITY, 0.0).with_detail(e.to_string())],
                ..Default::default()
            });
            checks.extend(outcome.checks.into_iter().map(|c| (tag.clone(), c)));
        }
        let elapsed = start.elapsed();
        checks.push((String::new(), Check::at_most("runtime-seconds", elapsed.as_secs_f64(), crit.budget.as_secs_f64())));
        let passed = checks.iter().all(|(_, c)| c.passed);
        let failing: Vec<String> = checks
            .iter()
            .filter(|(_, c)| !c.passed)
            .map(|(t, c)| if t.is_empty() { c.line() } else { format!("[{t}] {}", c.line()) })
            .collect();
        println!(
            "{} criterion {}: {} ({} checks, {:.1} s){}",
            if passed { "PASS" } else { "FAIL" },
            crit.id,
            crit.name,
            checks.len(),
            elapsed.as_secs_f64(),
            if failing.is_empty() { String::new() } else { format!(": {}", failing.join("; ")) }
        );
        for (t, c) in &checks {
            if t.is_empty() {
                println!("    {}", c.line());
            } else {
                println!("    [{t}] {}", c.line());
            }
        }
        if !passed {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
