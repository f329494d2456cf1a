//! Acceptance gate: one test per acceptance criterion, each printing a
//! single pass/fail line. Tolerances are pinned; any change is a
//! regression.

use ndarray::{array, Array2};
use num_complex::Complex64;

use memkernel::gme::{
    laplace_identity_check, solve_semigroup_ansatz, solve_wform_r,
};
use memkernel::grid::Grid;
use memkernel::linalg::{self, CMat};
use memkernel::liouville::{
    annihilation, jc_collision_channel, qubit, LindbladSpec, SuperOperator,
};
use memkernel::montecarlo::ensemble_average;
use memkernel::rational::partial_fractions;
use memkernel::renewal::{scalar_kernel, RenewalSpec, WaitingTimeDistribution as Wtd};
use memkernel::semimarkov::{
    gillespie_sample, quantum_classical_embedding_check, solve_t, state_at, SemiMarkovSpec,
};
use memkernel::series::{self, EvolutionConfig, EvolutionResult, MapFamily, Ordering};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn report(criterion: usize, name: &str, passed: bool, detail: &str) {
    use std::io::Write;
    let line = format!(
        "ACCEPTANCE {criterion} {name}: {} ({detail})\n",
        if passed { "pass" } else { "FAIL" }
    );
    // write to the raw stderr handle so the line stays visible even under
    // the harness's per-test output capture
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "criterion {criterion} ({name}) failed: {detail}");
}

/// Lindblad generator that does not commute with σ_x conjugation:
/// H = 0.4 σ_z plus amplitude damping at rate 0.3.
fn noncommuting_generator() -> SuperOperator {
    let h = array![[c(0.4, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.4, 0.0)]];
    LindbladSpec::new(h, vec![(qubit::sigma_minus(), 0.3)])
        .unwrap()
        .generator()
}

fn sigma_x_channel() -> SuperOperator {
    SuperOperator::conjugation(&qubit::sigma_x(), &qubit::sigma_x())
}

fn mixed_rho0() -> CMat {
    array![
        [c(0.7, 0.0), c(0.2, 0.1)],
        [c(0.2, -0.1), c(0.3, 0.0)]
    ]
}

fn hyperexp() -> Wtd {
    Wtd::hyperexponential(&[(0.4, 3.0), (0.6, 1.0)]).unwrap()
}

fn semigroup_cfg(
    channel: SuperOperator,
    generator: SuperOperator,
    renewal: RenewalSpec,
    ordering: Ordering,
    grid: Grid,
) -> EvolutionConfig {
    EvolutionConfig::new(
        2,
        channel,
        MapFamily::semigroup(generator.clone()),
        MapFamily::semigroup(generator),
        renewal,
        ordering,
        grid,
    )
    .unwrap()
}

fn max_state_dev(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| linalg::max_abs(&(x - y)))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_cptp_suite() {
    let scenarios: Vec<(&str, Ordering, RenewalSpec)> = vec![
        ("R/exponential", Ordering::R, RenewalSpec::ordinary(Wtd::exponential(1.5).unwrap())),
        ("L/erlang-2", Ordering::L, RenewalSpec::ordinary(Wtd::erlang(2, 2.0).unwrap())),
        (
            "Modified/hyperexponential",
            Ordering::Modified,
            RenewalSpec::modified(hyperexp(), Wtd::exponential(2.0).unwrap()),
        ),
        (
            // support edge beyond t_max: the density jump at b would cost
            // the trapezoid rule an O(h) error inside the horizon
            "R/tabulated-uniform",
            Ordering::R,
            RenewalSpec::ordinary(Wtd::uniform(1.5, 3001).unwrap()),
        ),
        ("L/hyperexponential", Ordering::L, RenewalSpec::ordinary(hyperexp())),
        (
            "Modified/stationary-erlang-2",
            Ordering::Modified,
            RenewalSpec::stationary(Wtd::erlang(2, 2.0).unwrap()).unwrap(),
        ),
    ];
    let grid = Grid::new(1.2, 1200).unwrap();
    let mut worst_choi = 0.0f64;
    let mut worst_trace = 0.0f64;
    for (name, ordering, renewal) in scenarios {
        let start = std::time::Instant::now();
        let cfg = semigroup_cfg(
            sigma_x_channel(),
            noncommuting_generator(),
            renewal,
            ordering,
            grid,
        );
        let res = series::propagate(&cfg).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        let choi = res.worst_choi_min();
        let trace = res.worst_trace_defect();
        worst_choi = worst_choi.min(choi);
        worst_trace = worst_trace.max(trace);
        assert!(res.truncated, "{name}: series did not converge");
        assert!(choi >= -1e-7, "{name}: min Choi eigenvalue {choi:.3e}");
        assert!(trace <= 1e-6, "{name}: trace defect {trace:.3e}");
        assert!(elapsed < 120.0, "{name}: runtime {elapsed:.1}s exceeds 2 min");
    }
    report(
        1,
        "cp-tp-suite",
        true,
        &format!("6 scenarios, min Choi eig {worst_choi:.2e}, max trace defect {worst_trace:.2e}"),
    );
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_2_markov_limit() {
    let lambda = 1.0;
    let gen = noncommuting_generator();
    let channel = sigma_x_channel();
    let markov = gen.add(
        &channel
            .add(&SuperOperator::identity(2).scale(c(-1.0, 0.0)))
            .scale(c(lambda, 0.0)),
    );
    let wtd = Wtd::exponential(lambda).unwrap();
    let rho0 = mixed_rho0();

    // series route: propagator against the semigroup at every grid point
    let grid = Grid::new(5.0 / lambda, 4000).unwrap();
    let cfg = semigroup_cfg(
        channel.clone(),
        gen.clone(),
        RenewalSpec::ordinary(wtd.clone()),
        Ordering::R,
        grid,
    )
    .with_series_tol(1e-9);
    let res = series::propagate(&cfg).unwrap();
    let mut dev_series = 0.0f64;
    for (i, p) in res.propagators.iter().enumerate() {
        let oracle = markov.expm(grid.time(i));
        dev_series = dev_series.max(linalg::max_abs(&(p.matrix() - oracle.matrix())));
    }

    // Volterra semigroup-Ansatz route (delta kernel, fine grid is cheap)
    let vgrid = Grid::new(5.0 / lambda, 40000).unwrap();
    let states = solve_semigroup_ansatz(&gen, &channel, &wtd, &vgrid, Ordering::R, &rho0).unwrap();
    let mut dev_volterra = 0.0f64;
    for (i, s) in states.iter().enumerate().step_by(50) {
        let oracle = markov.expm(vgrid.time(i)).apply(&rho0);
        dev_volterra = dev_volterra.max(linalg::max_abs(&(s - &oracle)));
    }

    // W-form route
    let wgrid = Grid::new(5.0 / lambda, 8000).unwrap();
    let family = MapFamily::semigroup(gen.clone());
    let wstates = solve_wform_r(&channel, &family, &family, &wtd, &wgrid, &rho0).unwrap();
    let mut dev_wform = 0.0f64;
    for (i, s) in wstates.iter().enumerate().step_by(10) {
        let oracle = markov.expm(wgrid.time(i)).apply(&rho0);
        dev_wform = dev_wform.max(linalg::max_abs(&(s - &oracle)));
    }

    let pass = dev_series <= 1e-6 && dev_volterra <= 1e-6 && dev_wform <= 1e-6;
    report(
        2,
        "markov-limit",
        pass,
        &format!(
            "series {dev_series:.2e}, volterra {dev_volterra:.2e}, wform {dev_wform:.2e} (tol 1e-6)"
        ),
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_semigroup_reduction() {
    let gen = noncommuting_generator();
    let grid = Grid::new(0.4, 4000).unwrap();
    let laws: Vec<(&str, Wtd)> = vec![
        ("exponential", Wtd::exponential(2.0).unwrap()),
        ("erlang-2", Wtd::erlang(2, 3.0).unwrap()),
        ("tabulated-uniform", Wtd::uniform(0.8, 8001).unwrap()),
    ];
    let mut worst = 0.0f64;
    for (name, law) in laws {
        let cfg = semigroup_cfg(
            SuperOperator::identity(2),
            gen.clone(),
            RenewalSpec::ordinary(law),
            Ordering::R,
            grid,
        )
        .with_series_tol(1e-9);
        let res = series::propagate(&cfg).unwrap();
        let mut dev = 0.0f64;
        for (i, p) in res.propagators.iter().enumerate() {
            let oracle = gen.expm(grid.time(i));
            dev = dev.max(linalg::max_abs(&(p.matrix() - oracle.matrix())));
        }
        assert!(dev <= 1e-8, "{name}: deviation {dev:.3e} from semigroup");
        worst = worst.max(dev);
    }
    report(
        3,
        "semigroup-reduction",
        true,
        &format!("3 laws, worst deviation {worst:.2e} (tol 1e-8)"),
    );
}

// ---------------------------------------------------------------- 4

/// Gap between Φ_R and Φ_L for the designed noncommuting scenario,
/// recorded from this build's first verified run.
const PINNED_ORDERING_GAP: f64 = 1.369154178911e-1;

#[test]
fn criterion_4_ordering_gap() {
    // commuting design: σ_z conjugation with pure σ_z dephasing
    let dephasing = LindbladSpec::new(Array2::zeros((2, 2)), vec![(qubit::sigma_z(), 0.5)])
        .unwrap()
        .generator();
    let channel_z = SuperOperator::conjugation(&qubit::sigma_z(), &qubit::sigma_z());
    let grid = Grid::new(2.0, 1000).unwrap();
    let renewal = RenewalSpec::ordinary(Wtd::erlang(2, 2.0).unwrap());
    let cfg_r = semigroup_cfg(
        channel_z.clone(),
        dephasing.clone(),
        renewal.clone(),
        Ordering::R,
        grid,
    );
    let mut cfg_l = cfg_r.clone();
    cfg_l.ordering = Ordering::L;
    let res_r = series::propagate(&cfg_r).unwrap();
    let res_l = series::propagate(&cfg_l).unwrap();
    let commuting_gap = res_r.max_deviation(&res_l);
    assert!(
        commuting_gap <= 1e-8,
        "commuting scenario gap {commuting_gap:.3e}"
    );

    // noncommuting design: σ_x conjugation against H = 0.4 σ_z
    let cfg_r = semigroup_cfg(
        sigma_x_channel(),
        noncommuting_generator(),
        renewal.clone(),
        Ordering::R,
        grid,
    );
    let mut cfg_l = cfg_r.clone();
    cfg_l.ordering = Ordering::L;
    let res_r = series::propagate(&cfg_r).unwrap();
    let res_l = series::propagate(&cfg_l).unwrap();
    let gap = res_r.max_deviation(&res_l);
    assert!(gap > 1e-3, "noncommuting scenario gap {gap:.3e} too small");
    let pinned_ok = if PINNED_ORDERING_GAP > 0.0 {
        (gap - PINNED_ORDERING_GAP).abs() <= 1e-6
    } else {
        // first verified run: print the value to pin
        println!("PIN ordering gap: {gap:.12e}");
        false
    };
    report(
        4,
        "ordering-gap",
        pinned_ok,
        &format!(
            "commuting {commuting_gap:.2e} (tol 1e-8), noncommuting {gap:.6e} \
             (pinned {PINNED_ORDERING_GAP:.6e})"
        ),
    );
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_cross_method() {
    let gen = noncommuting_generator();
    let channel = sigma_x_channel();
    let rho0 = mixed_rho0();
    let grid = Grid::new(1.2, 1200).unwrap();

    // series vs Volterra on every scenario where the Ansatz applies
    // (R/L orderings, rational laws, shared semigroup family)
    let cases: Vec<(&str, Ordering, Wtd)> = vec![
        ("R/exponential", Ordering::R, Wtd::exponential(1.5).unwrap()),
        ("L/erlang-2", Ordering::L, Wtd::erlang(2, 2.0).unwrap()),
        ("L/hyperexponential", Ordering::L, hyperexp()),
    ];
    let mut worst_volterra = 0.0f64;
    for (name, ordering, law) in cases {
        let cfg = semigroup_cfg(
            channel.clone(),
            gen.clone(),
            RenewalSpec::ordinary(law.clone()),
            ordering,
            grid,
        );
        let series_states = series::propagate(&cfg).unwrap().states(&rho0);
        let volterra_states =
            solve_semigroup_ansatz(&gen, &channel, &law, &grid, ordering, &rho0).unwrap();
        let dev = max_state_dev(&series_states, &volterra_states);
        assert!(dev <= 1e-4, "{name}: series/Volterra deviation {dev:.3e}");
        worst_volterra = worst_volterra.max(dev);
    }

    // Monte Carlo: 1e5 trajectories, componentwise 4σ coverage ≥ 99%
    let mc_grid = Grid::new(1.2, 200).unwrap();
    let cfg_mc = semigroup_cfg(
        channel.clone(),
        gen.clone(),
        RenewalSpec::ordinary(Wtd::erlang(2, 2.0).unwrap()),
        Ordering::L,
        mc_grid,
    );
    let mut cfg_fine = cfg_mc.clone();
    cfg_fine.grid = grid;
    let series_states = series::propagate(&cfg_fine).unwrap().states(&rho0);
    let est = ensemble_average(&cfg_mc, 100_000, 20240, &rho0).unwrap();
    let mut total = 0usize;
    let mut within = 0usize;
    for (i, mean) in est.mean_states.iter().enumerate() {
        // fine grid has 6× the resolution of the MC grid
        let reference = &series_states[6 * i];
        for row in 0..2 {
            for col in 0..2 {
                let dev = (mean[[row, col]] - reference[[row, col]]).norm();
                let sigma = est.stderr[i][[row, col]];
                total += 1;
                if dev <= 4.0 * sigma + 1e-12 {
                    within += 1;
                }
            }
        }
    }
    let coverage = within as f64 / total as f64;
    let pass = coverage >= 0.99;
    report(
        5,
        "cross-method",
        pass,
        &format!(
            "series/Volterra worst {worst_volterra:.2e} (tol 1e-4), \
             MC 4σ coverage {coverage:.4} over {total} components (min 0.99)"
        ),
    );
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_laplace_identities() {
    let gen = noncommuting_generator();
    let channel = sigma_x_channel();
    let grid = Grid::new(10.0, 2000).unwrap();
    let u_points: Vec<Complex64> = vec![
        c(2.0, 0.0),
        c(2.0, 0.5),
        c(2.5, -0.5),
        c(2.5, 1.0),
        c(3.0, 0.0),
        c(3.0, -1.0),
        c(3.5, 0.5),
        c(3.5, -0.25),
    ];
    let scenarios: Vec<(&str, Ordering, RenewalSpec)> = vec![
        (
            "R/erlang-2",
            Ordering::R,
            RenewalSpec::ordinary(Wtd::erlang(2, 1.0).unwrap()),
        ),
        (
            "L/hyperexponential",
            Ordering::L,
            RenewalSpec::ordinary(Wtd::hyperexponential(&[(0.5, 2.0), (0.5, 0.8)]).unwrap()),
        ),
        (
            "Modified/stationary-erlang-2",
            Ordering::Modified,
            RenewalSpec::stationary(Wtd::erlang(2, 1.0).unwrap()).unwrap(),
        ),
    ];
    let mut worst = 0.0f64;
    for (name, ordering, renewal) in scenarios {
        let cfg = semigroup_cfg(channel.clone(), gen.clone(), renewal, ordering, grid)
            .with_series_tol(1e-9);
        let res = series::propagate(&cfg).unwrap();
        let residuals = laplace_identity_check(&res, &cfg, &u_points).unwrap();
        for (u, r) in u_points.iter().zip(&residuals) {
            assert!(*r <= 1e-4, "{name}: residual {r:.3e} at u = {u}");
            worst = worst.max(*r);
        }
    }
    report(
        6,
        "laplace-identities",
        true,
        &format!("3 scenarios × 8 points, worst residual {worst:.2e} (tol 1e-4)"),
    );
}

// ---------------------------------------------------------------- 7

/// Subtract polynomials in ascending-coefficient form.
fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
        .collect()
}

#[test]
fn criterion_7_renewal_analytics() {
    let lambda = 1.3;
    let w = Wtd::erlang(2, lambda).unwrap();

    // scalar kernel k(t) = λ² e^{−2λt}
    let kernel = scalar_kernel(&w).unwrap();
    let mut worst_k = kernel.delta_weight.abs();
    for k in 0..=60 {
        let t = 0.05 * k as f64;
        let exact = lambda * lambda * (-2.0 * lambda * t).exp();
        worst_k = worst_k.max((kernel.smooth(t) - exact).abs());
    }
    assert!(worst_k <= 1e-8, "kernel deviation {worst_k:.3e}");

    // sprinkling density S(t) = (λ/2)(1 − e^{−2λt}) via partial fractions
    // of f̂/(1−f̂)
    let (num, den) = w.rational_transform().unwrap();
    let (delta, terms) = partial_fractions(&num, &poly_sub(&den, &num)).unwrap();
    let mut worst_s = delta.abs();
    for k in 0..=60 {
        let t = 0.05 * k as f64;
        let s: Complex64 = terms.iter().map(|term| term.eval(t)).sum();
        let exact = 0.5 * lambda * (1.0 - (-2.0 * lambda * t).exp());
        worst_s = worst_s.max((s - c(exact, 0.0)).norm());
    }
    assert!(worst_s <= 1e-8, "sprinkling deviation {worst_s:.3e}");

    // exclusive-density normalization: Σ_{n≤12} ∫ pⁿ = 1 for λt ≤ 2
    let mut worst_norm = 0.0f64;
    for (law, t) in [
        (Wtd::exponential(1.0).unwrap(), 2.0),
        (Wtd::erlang(2, 1.0).unwrap(), 2.0),
    ] {
        let total =
            series::exclusive_density_norm(&RenewalSpec::ordinary(law), 12, t, 4000).unwrap();
        worst_norm = worst_norm.max((total - 1.0).abs());
    }
    let pass = worst_norm <= 1e-6;
    report(
        7,
        "renewal-analytics",
        pass,
        &format!(
            "kernel {worst_k:.2e}, sprinkling {worst_s:.2e} (tol 1e-8), \
             exclusive norm defect {worst_norm:.2e} (tol 1e-6)"
        ),
    );
}

// ---------------------------------------------------------------- 8

fn cyclic_3() -> Array2<f64> {
    // 0 → 1 → 2 → 0 (columns are source states)
    ndarray::arr2(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
}

#[test]
fn criterion_8_classical_embedding() {
    // 2-state symmetric flip, exponential sojourns
    let flip = ndarray::arr2(&[[0.0, 1.0], [1.0, 0.0]]);
    let spec2 = SemiMarkovSpec::with_shared_wtd(flip, Wtd::exponential(1.5).unwrap()).unwrap();
    let dev2 = quantum_classical_embedding_check(&spec2, &Grid::new(0.4, 4000).unwrap()).unwrap();
    assert!(dev2 <= 1e-6, "2-state embedding deviation {dev2:.3e}");

    // 3-state cycle, Erlang-2 sojourns
    let spec3 = SemiMarkovSpec::with_shared_wtd(cyclic_3(), Wtd::erlang(2, 2.0).unwrap()).unwrap();
    let dev3 = quantum_classical_embedding_check(&spec3, &Grid::new(2.0, 3000).unwrap()).unwrap();
    assert!(dev3 <= 1e-6, "3-state embedding deviation {dev3:.3e}");

    // Gillespie ensemble against the Volterra T(t) within 3σ
    use rand::SeedableRng;
    let t_grid = Grid::new(2.0, 4000).unwrap();
    let sol = solve_t(&spec3, &t_grid).unwrap();
    let n_paths = 20_000usize;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4242);
    let mut counts = vec![[0usize; 3]; 3]; // per checkpoint, per state
    let checkpoints = [0.7, 1.4, 2.0];
    for _ in 0..n_paths {
        let path = gillespie_sample(&spec3, 2.0, 0, &mut rng);
        for (ci, &t) in checkpoints.iter().enumerate() {
            counts[ci][state_at(&path, t)] += 1;
        }
    }
    let mut worst_z = 0.0f64;
    for (ci, &t) in checkpoints.iter().enumerate() {
        let idx = t_grid.nearest_index(t);
        for s in 0..3 {
            let p = sol.t_mats[idx][[s, 0]];
            let sigma = (p * (1.0 - p) / n_paths as f64).sqrt().max(1e-12);
            let freq = counts[ci][s] as f64 / n_paths as f64;
            worst_z = worst_z.max((freq - p).abs() / sigma);
        }
    }
    let pass = worst_z <= 3.0;
    report(
        8,
        "classical-embedding",
        pass,
        &format!(
            "embeddings {dev2:.2e}/{dev3:.2e} (tol 1e-6), Gillespie worst z {worst_z:.2} (max 3)"
        ),
    );
}

// ---------------------------------------------------------------- 9

fn micromaser_parts() -> (SuperOperator, SuperOperator) {
    let field_dim = 10;
    // trapping condition gτ√10 = π: no leakage out of the truncation
    let tau = std::f64::consts::PI / (field_dim as f64).sqrt();
    let excited = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    let (channel, leakage) = jc_collision_channel(1.0, tau, field_dim, &excited).unwrap();
    assert!(leakage < 1e-10, "trapping condition violated: {leakage:.3e}");
    let damping = LindbladSpec::new(
        CMat::zeros((field_dim, field_dim)),
        vec![(annihilation(field_dim), 0.4)],
    )
    .unwrap()
    .generator();
    (channel, damping)
}

fn mean_photon(rho: &CMat) -> f64 {
    (0..rho.nrows()).map(|k| k as f64 * rho[[k, k]].re).sum()
}

#[test]
fn criterion_9_micromaser() {
    let (channel, damping) = micromaser_parts();
    let field_dim = 10;

    // end-to-end stationary modified-renewal run at d = 10 with the
    // criterion-1 CPTP thresholds
    let grid = Grid::new(0.25, 240).unwrap();
    let cfg = EvolutionConfig::new(
        field_dim,
        channel.clone(),
        MapFamily::semigroup(damping.clone()),
        MapFamily::semigroup(damping.clone()),
        RenewalSpec::stationary(Wtd::erlang(2, 3.5).unwrap()).unwrap(),
        Ordering::Modified,
        grid,
    )
    .unwrap()
    .with_series_tol(1e-8);
    let res: EvolutionResult = series::propagate(&cfg).unwrap();
    let choi = res.worst_choi_min();
    let trace = res.worst_trace_defect();
    assert!(res.truncated, "micromaser series did not converge");
    assert!(choi >= -1e-7, "micromaser min Choi eigenvalue {choi:.3e}");
    assert!(trace <= 1e-6, "micromaser trace defect {trace:.3e}");

    // criterion-6 kernel identity on the same run; the short horizon
    // forces large Re u through the tail bound
    let u_points: Vec<Complex64> = vec![
        c(85.0, 0.0),
        c(85.0, 3.0),
        c(95.0, -3.0),
        c(95.0, 0.0),
        c(105.0, 3.0),
        c(105.0, -3.0),
        c(115.0, 0.0),
        c(115.0, 3.0),
    ];
    let residuals = laplace_identity_check(&res, &cfg, &u_points).unwrap();
    let worst_residual = residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    assert!(
        worst_residual <= 1e-4,
        "micromaser kernel identity residual {worst_residual:.3e}"
    );

    // Poissonian arrivals: mean photon number against the Markov
    // generator oracle
    let lambda = 2.0;
    let pgrid = Grid::new(1.5, 4000).unwrap();
    let wtd = Wtd::exponential(lambda).unwrap();
    let mut rho0 = CMat::zeros((field_dim, field_dim));
    rho0[[0, 0]] = c(1.0, 0.0);
    let states =
        solve_semigroup_ansatz(&damping, &channel, &wtd, &pgrid, Ordering::R, &rho0).unwrap();
    let markov = damping.add(
        &channel
            .add(&SuperOperator::identity(field_dim).scale(c(-1.0, 0.0)))
            .scale(c(lambda, 0.0)),
    );
    let step = markov.expm(pgrid.step());
    let mut vec_state = memkernel::liouville::vectorize(&rho0);
    let mut worst_photon = 0.0f64;
    for (i, s) in states.iter().enumerate() {
        let oracle = memkernel::liouville::devectorize(&vec_state);
        worst_photon = worst_photon.max((mean_photon(s) - mean_photon(&oracle)).abs());
        let _ = i;
        vec_state = step.apply_vec(&vec_state);
    }
    let pass = worst_photon <= 1e-4;
    report(
        9,
        "micromaser",
        pass,
        &format!(
            "Choi {choi:.2e}, trace {trace:.2e}, kernel residual {worst_residual:.2e}, \
             photon-number deviation {worst_photon:.2e} (tol 1e-4)"
        ),
    );
}
