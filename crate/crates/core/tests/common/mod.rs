#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use svir_control::model::controlled_rhs;
use svir_control::pmp::costate_rhs;
use svir_control::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn baseline_grid() -> TimeGrid {
    TimeGrid::new(0.0, 240.0, 2400).unwrap()
}

pub fn endemic_grid() -> TimeGrid {
    TimeGrid::new(0.0, 720.0, 7200).unwrap()
}

/// Optimal solve that also accepts a non-converged iterate.
pub fn optimal(p: &ModelParams, spec: &CostSpec, grid: TimeGrid) -> SolutionPath {
    match solve(p, &SvirState::baseline_initial(), spec, &FbsConfig::new(grid)) {
        Ok(s) => s,
        Err(SvirError::NonConvergence { path, .. }) => *path,
        Err(e) => panic!("solve failed: {e}"),
    }
}

pub fn constant(p: &ModelParams, spec: &CostSpec, grid: TimeGrid, u: f64) -> CostBreakdown {
    evaluate_constant_policy(p, &SvirState::baseline_initial(), spec, &grid, u)
        .unwrap()
        .cost
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Point on the simplex with every compartment present.
pub fn random_state(r: &mut impl Rng) -> SvirState {
    let w: [f64; 4] = std::array::from_fn(|_| -r.random_range(1e-3f64..1.0).ln());
    let t: f64 = w.iter().sum();
    SvirState::new(w[0] / t, w[1] / t, w[2] / t, w[3] / t)
}

pub fn random_params(r: &mut impl Rng) -> ModelParams {
    let base = ModelParams::baseline();
    let mut f = || r.random_range(0.5..1.5);
    ModelParams {
        beta0: base.beta0 * f(),
        alpha: base.alpha * f(),
        gamma: base.gamma * f(),
        gamma1: base.gamma1 * f(),
        mu: 0.005 * f(),
        eps: base.eps * f(),
        u_bar: 1.0,
    }
}

pub fn random_costate(r: &mut impl Rng, lo: f64, hi: f64) -> CostateState {
    CostateState::new(r.random_range(lo..hi), r.random_range(lo..hi), r.random_range(lo..hi))
}

fn rk4_step<const N: usize>(y: [f64; N], h: f64, f: &impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| std::array::from_fn::<f64, N, _>(|k| a[k] + s * b[k]);
    let k1 = f(&y);
    let k2 = f(&add(&y, &k1, h / 2.0));
    let k3 = f(&add(&y, &k2, h / 2.0));
    let k4 = f(&add(&y, &k3, h));
    std::array::from_fn(|k| y[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]))
}

/// Advances the joint state/costate flow by `t` days (negative runs
/// backwards) under constant control `u`.
pub fn advance(
    x: &SvirState,
    l: &CostateState,
    u: f64,
    t: f64,
    p: &ModelParams,
    spec: &CostSpec,
) -> (SvirState, CostateState) {
    let f = |y: &[f64; 7]| {
        let x = SvirState::new(y[0], y[1], y[2], y[3]);
        let l = CostateState::new(y[4], y[5], y[6]);
        let dx = controlled_rhs(&x, u, p).unwrap();
        let dl = costate_rhs(&x, &l, u, p, spec).unwrap();
        [dx.s, dx.v, dx.i, dx.r, dl.lambda1, dl.lambda2, dl.lambda3]
    };
    let substeps = 20;
    let h = t / substeps as f64;
    let mut y = [x.s, x.v, x.i, x.r, l.lambda1, l.lambda2, l.lambda3];
    for _ in 0..substeps {
        y = rk4_step(y, h, &f);
    }
    (
        SvirState::new(y[0], y[1], y[2], y[3]),
        CostateState::new(y[4], y[5], y[6]),
    )
}

/// Central first and second differences, step `h`, of `g` along the flow.
pub fn flow_derivatives(
    x: &SvirState,
    l: &CostateState,
    u: f64,
    p: &ModelParams,
    spec: &CostSpec,
    h: f64,
    g: impl Fn(&SvirState, &CostateState) -> f64,
) -> (f64, f64) {
    let (xf, lf) = advance(x, l, u, h, p, spec);
    let (xb, lb) = advance(x, l, u, -h, p, spec);
    let (gf, g0, gb) = (g(&xf, &lf), g(x, l), g(&xb, &lb));
    ((gf - gb) / (2.0 * h), (gf - 2.0 * g0 + gb) / (h * h))
}
