use hesim::ckks::{CkksParams, RefreshPolicy};
use hesim::secure::{default_capacity, OpCounts, SecureArithmetic};
use hesim::solvers::{
    convergence_sweep, eoc, exact_solution, l2_error, l_step, refresh_schedule, run_simulation, step_upwind_1d,
    step_upwind_2d, AdvectionConfig, GridSpec, InitialCondition, PeriodicFn, Scheme, StepCoefficients,
};
use std::f64::consts::TAU;
use std::sync::Arc;

fn exact(capacity: usize) -> SecureArithmetic {
    SecureArithmetic::exact(capacity, 33, 25, RefreshPolicy::standard()).unwrap()
}

fn cfg(scheme: Scheme, t_end: f64) -> AdvectionConfig {
    AdvectionConfig {
        scheme,
        t_end,
        ..AdvectionConfig::default()
    }
}

fn counts(adds: u64, mults: u64, rotates: u64) -> OpCounts {
    OpCounts {
        adds,
        mults,
        rotates,
        bootstraps: 0,
    }
}

/// Direct stencil evaluation on plain arrays (column-major in 2D).
fn stencil_step(u: &[f64], grid: &GridSpec, scheme: Scheme, cx: f64, cy: f64) -> Vec<f64> {
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let at = |i: i64, j: i64| u[(i.rem_euclid(nx) + j.rem_euclid(ny) * nx) as usize];
    let mut out = vec![0.0; u.len()];
    for j in 0..ny {
        for i in 0..nx {
            let c = at(i, j);
            let v = match (scheme, grid.dim) {
                (Scheme::Upwind, 1) => c - cx * (c - at(i - 1, j)),
                (Scheme::LaxWendroff, 1) => {
                    let (l, r) = (at(i - 1, j), at(i + 1, j));
                    c - cx / 2.0 * (r - l) + cx * cx / 2.0 * (r - 2.0 * c + l)
                }
                (Scheme::Upwind, _) => c - cx * (c - at(i - 1, j)) - cy * (c - at(i, j - 1)),
                (Scheme::LaxWendroff, _) => {
                    let (l, r) = (at(i - 1, j), at(i + 1, j));
                    let (d, t) = (at(i, j - 1), at(i, j + 1));
                    let cross = at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1);
                    c - cx / 2.0 * (r - l) + cx * cx / 2.0 * (r - 2.0 * c + l) - cy / 2.0 * (t - d)
                        + cy * cy / 2.0 * (t - 2.0 * c + d)
                        + cx * cy / 4.0 * cross
                }
            };
            out[(i + j * nx) as usize] = v;
        }
    }
    out
}

fn one_step(scheme: Scheme, grid: GridSpec, capacity: usize, u0: &InitialCondition) -> (Vec<f64>, Vec<f64>, OpCounts) {
    let config = AdvectionConfig {
        scheme,
        u0: u0.clone(),
        ..AdvectionConfig::default()
    };
    let config = AdvectionConfig {
        t_end: config.dt(&grid),
        ..config
    };
    let sa = exact(capacity);
    let r = run_simulation(&config, &grid, &sa).unwrap();
    assert_eq!(r.steps, 1);
    let c = StepCoefficients::new(&config, &grid, r.dt);
    let init = exact_solution(&grid, &config, 0.0);
    (r.final_state, stencil_step(&init, &grid, scheme, c.cx, c.cy), r.counts[0])
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn per_step_counts_match_the_operation_table() {
    let sine = InitialCondition::default();
    // (scheme, dim, at capacity) -> (adds, mults, rotates)
    let table = [
        (Scheme::Upwind, 1, true, counts(2, 1, 1)),
        (Scheme::Upwind, 2, true, counts(5, 4, 3)),
        (Scheme::LaxWendroff, 1, true, counts(2, 3, 2)),
        (Scheme::LaxWendroff, 2, true, counts(14, 18, 14)),
        (Scheme::Upwind, 1, false, counts(3, 3, 2)),
        (Scheme::Upwind, 2, false, counts(6, 6, 4)),
        (Scheme::LaxWendroff, 1, false, counts(4, 7, 4)),
        (Scheme::LaxWendroff, 2, false, counts(24, 38, 24)),
    ];
    for (scheme, dim, full, want) in table {
        let grid = if dim == 1 { GridSpec::one_d(16) } else { GridSpec::two_d(8, 4) };
        let cap = if full { grid.len() } else { 2 * grid.len() };
        let (_, _, got) = one_step(scheme, grid, cap, &sine);
        assert_eq!(got, want, "{scheme} {dim}D at capacity: {full}");
    }
}

#[test]
fn one_step_matches_stencil_oracle() {
    let sine = InitialCondition::default();
    for scheme in [Scheme::Upwind, Scheme::LaxWendroff] {
        for (grid, cap) in [
            (GridSpec::one_d(8), 8),
            (GridSpec::one_d(8), 32),
            (GridSpec::one_d(12), 16),
            (GridSpec::two_d(8, 8), 64),
            (GridSpec::two_d(6, 5), 32),
        ] {
            let (got, want, _) = one_step(scheme, grid, cap, &sine);
            assert!(max_diff(&got, &want) < 1e-12, "{scheme} {grid:?}");
        }
    }
}

#[test]
fn constant_field_is_a_fixed_point_and_mean_is_conserved() {
    let constant = InitialCondition::Custom(PeriodicFn(Arc::new(|_, _| 0.75)));
    let bumpy = InitialCondition::Custom(PeriodicFn(Arc::new(|x, y| {
        (TAU * x).cos() + 0.3 * (2.0 * TAU * y).sin() + 0.1
    })));
    for scheme in [Scheme::Upwind, Scheme::LaxWendroff] {
        for grid in [GridSpec::one_d(16), GridSpec::two_d(8, 8)] {
            let config = AdvectionConfig {
                scheme,
                t_end: 0.25,
                u0: constant.clone(),
                ..AdvectionConfig::default()
            };
            let r = run_simulation(&config, &grid, &exact(2 * grid.len())).unwrap();
            assert!(r.final_state.iter().all(|&v| (v - 0.75).abs() < 1e-12));

            let config = AdvectionConfig {
                u0: bumpy.clone(),
                ..config
            };
            let r = run_simulation(&config, &grid, &exact(grid.len())).unwrap();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let m0 = mean(&exact_solution(&grid, &config, 0.0));
            assert!((mean(&r.final_state) - m0).abs() < 1e-12);
        }
    }
}

#[test]
fn two_d_upwind_without_y_speed_is_row_wise_one_d() {
    let grid2 = GridSpec::two_d(8, 4);
    let config = AdvectionConfig {
        scheme: Scheme::Upwind,
        ..AdvectionConfig::default()
    };
    let mut c2 = StepCoefficients::new(&config, &grid2, config.dt(&grid2));
    c2.cy = 0.0;
    let c1 = StepCoefficients { dim: 1, ..c2 };
    let sa = exact(32);
    let data: Vec<f64> = (0..32).map(|i| ((i * 7 % 11) as f64).sin()).collect();
    let m = sa.enc_matrix_packed(&data, 8, 4).unwrap();
    let out2 = sa.dec_matrix_packed(&step_upwind_2d(&sa, &m, &c2).unwrap()).unwrap();
    let sv = exact(8);
    for j in 0..4 {
        let col = &data[j * 8..(j + 1) * 8];
        let v = sv.enc_vector(col).unwrap();
        let out1 = sv.dec_vector(&step_upwind_1d(&sv, &v, &c1).unwrap()).unwrap();
        assert!(max_diff(&out1, &out2[j * 8..(j + 1) * 8]) < 1e-15);
    }
}

#[test]
fn exact_solution_examples() {
    let config = AdvectionConfig::default();
    let grid = GridSpec::one_d(32);
    let u0 = exact_solution(&grid, &config, 0.0);
    let expect: Vec<f64> = (0..32).map(|i| (TAU * i as f64 / 32.0).sin()).collect();
    assert_eq!(u0, expect);
    assert!(max_diff(&exact_solution(&grid, &config, 1.0), &u0) < 1e-12);
    let half = exact_solution(&grid, &config, 0.5);
    let neg: Vec<f64> = expect.iter().map(|v| -v).collect();
    assert!(max_diff(&half, &neg) < 1e-12);
    let g2 = GridSpec::two_d(8, 8);
    assert!(max_diff(&exact_solution(&g2, &config, 1.0), &exact_solution(&g2, &config, 0.0)) < 1e-12);
}

#[test]
fn error_norms_and_orders() {
    let v = vec![0.25, -1.0, 3.0];
    assert_eq!(l2_error(&v, &v).unwrap(), 0.0);
    assert!((l2_error(&[1.0, 1.0, 1.0, 1.0], &[0.0; 4]).unwrap() - 1.0).abs() < 1e-15);
    assert!(l2_error(&[1.0], &[1.0, 2.0]).is_err());
    assert!((eoc(0.4, 0.1) - 2.0).abs() < 1e-15);
    assert!(eoc(0.0, 0.0).is_nan());
    assert!(eoc(1.0, 0.0).is_nan());
}

#[test]
fn exact_convergence_table_1d() {
    let mk = |g: &GridSpec| SecureArithmetic::exact(default_capacity(g.len()), 33, 25, RefreshPolicy::standard());
    let lw = convergence_sweep(&cfg(Scheme::LaxWendroff, 0.5), 1, &[32, 64, 128, 256], mk, true).unwrap();
    assert!((lw[0].error / 1.07e-2 - 1.0).abs() < 0.02);
    assert!((lw[1].error / 2.67e-3 - 1.0).abs() < 0.02);
    for r in &lw[1..] {
        assert!((r.eoc.unwrap() - 2.0).abs() < 0.05);
    }
    let up = convergence_sweep(&cfg(Scheme::Upwind, 0.5), 1, &[32, 64, 128, 256], mk, true).unwrap();
    assert!((up[0].error / 1.01e-1 - 1.0).abs() < 0.02);
    for (r, want) in up[1..].iter().zip([0.95, 0.97, 0.99]) {
        assert!((r.eoc.unwrap() - want).abs() < 0.05, "{:?}", r);
    }
    assert!(convergence_sweep(&cfg(Scheme::Upwind, 0.5), 1, &[64, 32], mk, false).is_err());
}

#[test]
fn exact_runs_follow_the_refresh_schedule() {
    for (scheme, dim, n, full) in [
        (Scheme::LaxWendroff, 1, 32, true),
        (Scheme::LaxWendroff, 1, 32, false),
        (Scheme::Upwind, 2, 8, false),
        (Scheme::LaxWendroff, 2, 8, true),
    ] {
        let grid = GridSpec::square(dim, n);
        let cap = if full { grid.len() } else { 2 * grid.len() };
        let sa = exact(cap);
        let r = run_simulation(&cfg(scheme, 1.0), &grid, &sa).unwrap();
        let ls = l_step(scheme, dim, full);
        assert_eq!(r.l_step, ls);
        assert_eq!(r.bootstrap_steps, refresh_schedule(33, 25, ls, 1, r.steps));
        assert_eq!(r.counts.len(), r.steps);
        assert_eq!(r.gap.len(), r.steps);
        assert_eq!(r.step_seconds.len(), r.steps);
        let per_step = r.counts[0];
        let total = r.total_counts();
        assert_eq!(total.bootstraps, r.bootstrap_steps.len() as u64);
        assert_eq!(total.adds, per_step.adds * r.steps as u64);
        assert_eq!(total.mults, per_step.mults * r.steps as u64);
        assert_eq!(total.rotates, per_step.rotates * r.steps as u64);
        assert!(r.levels.iter().all(|&l| l >= 1));
    }
}

#[test]
fn final_partial_step_lands_on_t_end() {
    let grid = GridSpec::one_d(64);
    let config = cfg(Scheme::LaxWendroff, 0.1);
    let r = run_simulation(&config, &grid, &exact(64)).unwrap();
    // 0.1 / (1/128) = 12.8
    assert_eq!(r.steps, 13);
    assert!((r.t_final - 0.1).abs() < 1e-15);
    let mut u = exact_solution(&grid, &config, 0.0);
    let dt = config.dt(&grid);
    for n in 0..13 {
        let h = if n == 12 { 0.1 - 12.0 * dt } else { dt };
        u = stencil_step(&u, &grid, Scheme::LaxWendroff, h / grid.dx(), 0.0);
    }
    assert!(max_diff(&r.final_state, &u) < 1e-12);
}

#[test]
fn upwind_is_visibly_damped_against_lax_wendroff() {
    let grid = GridSpec::one_d(64);
    let amp = |s| {
        let r = run_simulation(&cfg(s, 1.0), &grid, &exact(64)).unwrap();
        r.final_state.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    };
    assert!(amp(Scheme::Upwind) / amp(Scheme::LaxWendroff) < 0.9);
}

#[test]
fn invalid_runs_are_rejected() {
    let grid = GridSpec::one_d(32);
    assert!(run_simulation(&cfg(Scheme::Upwind, 0.5), &grid, &exact(16)).is_err());
    // l_refresh too small to fit one sub-capacity step plus the margin
    let tiny = SecureArithmetic::exact(64, 4, 2, RefreshPolicy::standard()).unwrap();
    assert!(run_simulation(&cfg(Scheme::Upwind, 0.5), &grid, &tiny).is_err());
}

fn small_encrypted(batch: usize, l_max: usize, l_refresh: usize, scale_bits: u32) -> SecureArithmetic {
    let params = CkksParams {
        ring_dim: 4096,
        l_max,
        l_refresh,
        batch_size: batch,
        scale_bits,
        dnum: 2,
        ..CkksParams::default()
    };
    SecureArithmetic::encrypted(params, RefreshPolicy::standard(), 99).unwrap()
}

#[test]
fn encrypted_run_tracks_exact_twin() {
    for (scheme, grid, batch) in [
        (Scheme::LaxWendroff, GridSpec::one_d(16), 32),
        (Scheme::Upwind, GridSpec::two_d(4, 4), 16),
    ] {
        let sa = small_encrypted(batch, 8, 6, 40);
        let config = cfg(scheme, 0.5);
        let r = run_simulation(&config, &grid, &sa).unwrap();
        let twin = run_simulation(&config, &grid, &sa.exact_twin()).unwrap();
        assert_eq!(r.bootstrap_steps, twin.bootstrap_steps);
        assert_eq!(r.levels, twin.levels);
        assert_eq!(r.counts, twin.counts);
        assert!(!r.bootstrap_steps.is_empty());
        check_gap_budget(&r, sa.policy().eps_boot, f64::INFINITY);
        assert!(max_diff(&r.final_state, &twin.final_state) < 1e-4);
    }
}

fn check_gap_budget(r: &hesim::solvers::RunResult, eps: f64, fresh_bound: f64) {
    let mut since = 0usize;
    let mut refreshed = false;
    for (n, &g) in r.gap.iter().enumerate() {
        if r.bootstrap_steps.contains(&(n + 1)) {
            since = 0;
            refreshed = true;
        }
        since += 1;
        let bound = if refreshed { 10.0 * eps * since as f64 } else { fresh_bound };
        assert!(g < bound, "step {} gap {g:e} bound {bound:e}", n + 1);
    }
}

// Full ring and level chain with a 45-bit scale: at 40 bits a single key
// switch already rounds to about 5e-9 in the worst slot.
#[test]
fn desk_ring_gap_stays_within_noise_budget() {
    let grid = GridSpec::one_d(64);
    let params = CkksParams {
        batch_size: grid.len(),
        scale_bits: 45,
        ..CkksParams::default()
    };
    let sa = SecureArithmetic::encrypted(params, RefreshPolicy::standard(), 5).unwrap();
    let r = run_simulation(&cfg(Scheme::LaxWendroff, 0.5), &grid, &sa).unwrap();
    assert_eq!(r.bootstrap_steps, vec![33, 57]);
    check_gap_budget(&r, sa.policy().eps_boot, 1e-8);
}
