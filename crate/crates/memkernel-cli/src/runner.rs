//! Command implementations: run, verify, laplace-check.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use memkernel::gme::{laplace_identity_check, solve_semigroup_ansatz, solve_wform_r};
use memkernel::linalg::{self, CMat};
use memkernel::montecarlo::ensemble_average;
use memkernel::renewal::scalar_kernel;
use memkernel::series::{self, EvolutionResult, Ordering};

use crate::scenario::{from_cmat, JsonMatrix, Method, Prepared, Scenario};
use crate::CliError;

fn engine_err(e: memkernel::MemKernelError) -> CliError {
    CliError::Config(e.to_string())
}

/// States on the scenario grid for one method, plus optional standard errors.
struct MethodOutput {
    states: Vec<CMat>,
    stderr_max: Option<f64>,
}

fn run_series(p: &Prepared) -> Result<EvolutionResult, CliError> {
    series::propagate(&p.cfg).map_err(engine_err)
}

fn run_volterra(p: &Prepared) -> Result<Vec<CMat>, CliError> {
    let ordering = p.cfg.ordering;
    if ordering == Ordering::Modified {
        return Err(CliError::Config(
            "volterra method supports R and L orderings only".into(),
        ));
    }
    if p.scenario.family_g.is_some() {
        return Err(CliError::Config(
            "volterra method requires family_g = family_f".into(),
        ));
    }
    let gen = p.cfg.family_f.generator().ok_or_else(|| {
        CliError::Config("volterra method requires a semigroup family".into())
    })?;
    // the scalar-kernel reduction also needs a rational transform
    scalar_kernel(p.cfg.renewal.first_distribution()).map_err(engine_err)?;
    solve_semigroup_ansatz(
        gen,
        &p.cfg.channel,
        p.cfg.renewal.first_distribution(),
        &p.cfg.grid,
        ordering,
        &p.rho0,
    )
    .map_err(engine_err)
}

fn run_wform(p: &Prepared) -> Result<Vec<CMat>, CliError> {
    if p.cfg.ordering != Ordering::R {
        return Err(CliError::Config(
            "wform method supports the R ordering only".into(),
        ));
    }
    solve_wform_r(
        &p.cfg.channel,
        &p.cfg.family_f,
        &p.cfg.family_g,
        p.cfg.renewal.first_distribution(),
        &p.cfg.grid,
        &p.rho0,
    )
    .map_err(engine_err)
}

fn run_monte_carlo(p: &Prepared) -> Result<MethodOutput, CliError> {
    let mc = p.scenario.monte_carlo.as_ref().unwrap();
    let est = ensemble_average(&p.cfg, mc.trajectories, mc.seed, &p.rho0)
        .map_err(engine_err)?;
    let stderr_max = est
        .stderr
        .iter()
        .flat_map(|m| m.iter().copied())
        .fold(0.0f64, f64::max);
    Ok(MethodOutput {
        states: est.mean_states,
        stderr_max: Some(stderr_max),
    })
}

fn max_state_deviation(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| linalg::max_abs(&(x - y)))
        .fold(0.0, f64::max)
}

fn write_states_csv(
    path: &Path,
    grid: &memkernel::grid::Grid,
    states: &[CMat],
) -> Result<(), CliError> {
    let d = states[0].nrows();
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("rho_{i}_{j}_re"));
            header.push(format!("rho_{i}_{j}_im"));
        }
    }
    writeln!(w, "{}", header.join(",")).map_err(io_err)?;
    for (idx, s) in states.iter().enumerate() {
        let mut row = vec![format!("{:.12e}", grid.time(idx))];
        for i in 0..d {
            for j in 0..d {
                row.push(format!("{:.12e}", s[[i, j]].re));
                row.push(format!("{:.12e}", s[[i, j]].im));
            }
        }
        writeln!(w, "{}", row.join(",")).map_err(io_err)?;
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    let f = std::fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Config(format!("write error: {e}"))
}

#[derive(Serialize)]
struct MonteCarloDiag {
    trajectories: usize,
    seed: u64,
    max_stderr: f64,
    max_deviation_from_series: Option<f64>,
}

#[derive(Serialize)]
struct Diagnostics {
    scenario: String,
    ordering: String,
    methods: Vec<String>,
    truncation_order: usize,
    series_converged: bool,
    worst_trace_defect: f64,
    worst_choi_min: f64,
    flags: Vec<String>,
    /// max entrywise deviation of each non-series method from the series route
    deviations_from_series: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<MonteCarloDiag>,
    final_state: JsonMatrix,
}

fn scenario_stem(scenario: &Scenario, path: &Path) -> String {
    scenario.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    })
}

pub fn cmd_run(path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut scenario = Scenario::load(path)?;
    if let (Some(seed), Some(mc)) = (seed, scenario.monte_carlo.as_mut()) {
        mc.seed = seed;
    }
    let stem = scenario_stem(&scenario, path);
    let p = scenario.prepare()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    // the series route always runs: it carries the CPTP diagnostics
    let series_result = run_series(&p)?;
    let series_states = series_result.states(&p.rho0);

    let mut deviations = BTreeMap::new();
    let mut mc_diag = None;
    let mut outputs: Vec<(Method, Vec<CMat>)> = Vec::new();
    for method in &p.scenario.methods {
        let states = match method {
            Method::Series => series_states.clone(),
            Method::Volterra => run_volterra(&p)?,
            Method::Wform => run_wform(&p)?,
            Method::MonteCarlo => {
                let out = run_monte_carlo(&p)?;
                let dev = max_state_deviation(&out.states, &series_states);
                mc_diag = Some(MonteCarloDiag {
                    trajectories: p.scenario.monte_carlo.as_ref().unwrap().trajectories,
                    seed: p.scenario.monte_carlo.as_ref().unwrap().seed,
                    max_stderr: out.stderr_max.unwrap_or(0.0),
                    max_deviation_from_series: Some(dev),
                });
                out.states
            }
        };
        if *method != Method::Series && *method != Method::MonteCarlo {
            deviations.insert(
                method.label().to_string(),
                max_state_deviation(&states, &series_states),
            );
        }
        outputs.push((*method, states));
    }

    for (method, states) in &outputs {
        let csv_path = out_dir.join(format!("{stem}_{}.csv", method.label()));
        write_states_csv(&csv_path, &p.cfg.grid, states)?;
        println!("wrote {}", csv_path.display());
    }

    let diag = Diagnostics {
        scenario: stem.clone(),
        ordering: p.scenario.ordering.clone(),
        methods: p.scenario.methods.iter().map(|m| m.label().into()).collect(),
        truncation_order: series_result.truncation_order,
        series_converged: series_result.truncated,
        worst_trace_defect: series_result.worst_trace_defect(),
        worst_choi_min: series_result.worst_choi_min(),
        flags: series_result.flags.clone(),
        deviations_from_series: deviations,
        monte_carlo: mc_diag,
        final_state: from_cmat(series_states.last().unwrap()),
    };
    let diag_path = out_dir.join(format!("{stem}_diagnostics.json"));
    let text = serde_json::to_string_pretty(&diag)
        .map_err(|e| CliError::Config(format!("diagnostics serialization: {e}")))?;
    std::fs::write(&diag_path, text + "\n").map_err(io_err)?;
    println!("wrote {}", diag_path.display());

    if !series_result.truncated || !series_result.flags.is_empty() {
        eprintln!(
            "warning: numerical flags raised: converged={} flags={:?}",
            series_result.truncated, series_result.flags
        );
        return Err(CliError::Numerical("series diagnostics flagged".into()));
    }
    Ok(())
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(checks: &[Check]) -> Result<(), CliError> {
    let mut ok = true;
    for c in checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        ok &= c.passed;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Invariant("verification failed".into()))
    }
}

/// Presets shipped with the binary, used by `verify --all`.
const PRESETS: &[(&str, &str)] = &[
    (
        "dephasing-erlang2",
        include_str!("../presets/dephasing-erlang2.json"),
    ),
    ("markov-limit", include_str!("../presets/markov-limit.json")),
    (
        "modified-renewal",
        include_str!("../presets/modified-renewal.json"),
    ),
    ("micromaser", include_str!("../presets/micromaser.json")),
];

pub fn cmd_verify_all() -> Result<(), CliError> {
    let mut failed = Vec::new();
    for (name, text) in PRESETS {
        println!("== preset {name} ==");
        let scenario: Scenario = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("preset {name}: {e}")))?;
        if let Err(e) = verify_scenario(scenario) {
            failed.push(*name);
            // keep going so every preset gets reported
            let _ = e;
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!(
            "presets failed verification: {}",
            failed.join(", ")
        )))
    }
}

pub fn cmd_verify(path: &Path) -> Result<(), CliError> {
    verify_scenario(Scenario::load(path)?)
}

fn verify_scenario(scenario: Scenario) -> Result<(), CliError> {
    let p = scenario.prepare()?;
    let mut checks = Vec::new();

    // waiting-time law: normalization of the tabulated mass
    let law = p.cfg.renewal.first_distribution();
    let defect = law.mass_defect();
    checks.push(Check {
        name: "waiting-time-normalization",
        passed: defect <= 1e-6,
        detail: format!("mass defect {defect:.3e} (tolerance 1e-6)"),
    });

    // survival consistency g(t) = 1 - ∫₀ᵗ f  (trapezoid on the scenario grid)
    let grid = &p.cfg.grid;
    let h = grid.step();
    let mut acc = 0.0;
    let mut worst = 0.0f64;
    let mut prev = law.density(0.0).map_err(engine_err)?;
    for i in 1..grid.len() {
        let fi = law.density(grid.time(i)).map_err(engine_err)?;
        acc += 0.5 * h * (prev + fi);
        prev = fi;
        let g = law.survival(grid.time(i)).map_err(engine_err)?;
        worst = worst.max((g - (1.0 - acc)).abs());
    }
    checks.push(Check {
        name: "waiting-time-survival-consistency",
        passed: worst <= 1e-4,
        detail: format!("max |g - (1-∫f)| = {worst:.3e} (tolerance 1e-4)"),
    });

    // channel CPTP already enforced by construction; re-report the margins
    let diag = p.cfg.channel.is_cptp(1e-7);
    checks.push(Check {
        name: "channel-cptp",
        passed: diag.passes(),
        detail: format!(
            "min Choi eig {:.3e}, trace defect {:.3e}",
            diag.min_choi_eig, diag.trace_defect
        ),
    });

    // propagator CPTP along the series route
    let series_result = run_series(&p)?;
    let wt = series_result.worst_trace_defect();
    let wc = series_result.worst_choi_min();
    checks.push(Check {
        name: "propagator-trace-preservation",
        passed: wt <= 1e-6,
        detail: format!("worst trace defect {wt:.3e} (tolerance 1e-6)"),
    });
    checks.push(Check {
        name: "propagator-complete-positivity",
        passed: wc >= -1e-7,
        detail: format!("min Choi eigenvalue {wc:.3e} (floor -1e-7)"),
    });
    checks.push(Check {
        name: "series-convergence",
        passed: series_result.truncated,
        detail: format!(
            "converged at order {} (limit {})",
            series_result.truncation_order, p.cfg.max_order
        ),
    });

    // cross-method agreement against the series route
    let series_states = series_result.states(&p.rho0);
    for method in &p.scenario.methods {
        let (name, states): (&'static str, Vec<CMat>) = match method {
            Method::Series | Method::MonteCarlo => continue,
            Method::Volterra => ("cross-check-volterra", run_volterra(&p)?),
            Method::Wform => ("cross-check-wform", run_wform(&p)?),
        };
        let dev = max_state_deviation(&states, &series_states);
        checks.push(Check {
            name,
            passed: dev <= 1e-4,
            detail: format!("max deviation from series {dev:.3e} (tolerance 1e-4)"),
        });
    }

    if let Some(mc) = &p.scenario.monte_carlo {
        let out = run_monte_carlo(&p)?;
        let dev = max_state_deviation(&out.states, &series_states);
        let bound = 5.0 * out.stderr_max.unwrap_or(0.0) + 1e-3;
        checks.push(Check {
            name: "monte-carlo-agreement",
            passed: dev <= bound,
            detail: format!(
                "max deviation {dev:.3e} vs bound {bound:.3e} ({} trajectories)",
                mc.trajectories
            ),
        });
    }

    report(&checks)
}

pub fn cmd_laplace_check(path: &Path, u_points: &[Complex64], tol: f64) -> Result<(), CliError> {
    let scenario = Scenario::load(path)?;
    let p = scenario.prepare()?;
    if u_points.is_empty() {
        return Err(CliError::Config("no Laplace points given (use --u)".into()));
    }
    let series_result = run_series(&p)?;
    let residuals = match laplace_identity_check(&series_result, &p.cfg, u_points) {
        Ok(r) => r,
        Err(memkernel::MemKernelError::Inconclusive(msg)) => {
            println!("INCONCLUSIVE: {msg}");
            return Err(CliError::Numerical(msg));
        }
        Err(e) => return Err(engine_err(e)),
    };
    let mut ok = true;
    for (u, r) in u_points.iter().zip(&residuals) {
        let passed = *r <= tol;
        ok &= passed;
        println!(
            "{} laplace-identity u={:+.6}{:+.6}i: residual {:.3e} (tolerance {:.1e})",
            if passed { "PASS" } else { "FAIL" },
            u.re,
            u.im,
            r,
            tol
        );
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Invariant("Laplace identity residual too large".into()))
    }
}
