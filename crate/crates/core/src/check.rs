//! Runtime oracle suite behind the `check` subcommand. Every check draws
//! from the CHECK stream and compares two independent routes to the same
//! number.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::baselines::zf_precoder;
use crate::channel::{coherence_time, noise_power, upa_response, UpaGeometry};
use crate::constants::SPEED_OF_LIGHT;
use crate::env::{compute_delay_steps, project_action};
use crate::linalg::{CMatrix, CVector, C64};
use crate::nn::{actor_layers, critic_layers, LayerSpec, Mlp};
use crate::orbits::LayerSpec as OrbitLayer;
use crate::rate::{lower_bound_identity_check, lower_bound_rate, rank_one_covariances, sum_rate};
use crate::rng::{stream, RngStreams, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

fn cgauss<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| cgauss(rng))
}

fn random_matrix<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| cgauss(rng))
}

/// `log2 det(I + h h^H F / g)` against `log2(1 + h^H F h / g)`.
pub fn determinant_identity(rng: &mut SimRng, trials: usize, m: usize) -> CheckResult {
    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..trials {
        let h = random_vector(rng, m);
        let rank = rng.random_range(1..=m);
        let a = random_matrix(rng, m, rank);
        let f = &a * a.adjoint();
        let gamma = 10f64.powf(rng.random_range(-2.0..1.0));
        match lower_bound_identity_check(&h, &f, gamma) {
            Ok(c) => worst = worst.max((c.lhs - c.rhs).abs()),
            Err(e) => failure = Some(e.to_string()),
        }
    }
    let passed = failure.is_none() && worst < 1e-9;
    CheckResult::new("determinant-identity", passed, failure.unwrap_or(format!("max abs error {worst:e} over {trials} draws")))
}

/// With rank-one covariances the lower bound is the closed-form rate.
pub fn rank_one_bound(rng: &mut SimRng, trials: usize, m: usize, k: usize) -> CheckResult {
    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..trials {
        let h = random_matrix(rng, m, k);
        let v = random_matrix(rng, m, k) * C64::new(rng.random_range(0.1..2.0), 0.0);
        let sigma2 = 10f64.powf(rng.random_range(-2.0..1.0));
        let closed = match sum_rate(&h, &v, sigma2) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e.to_string());
                continue;
            }
        };
        let f_all = rank_one_covariances(&v);
        for user in 0..k {
            match lower_bound_rate(&h.column(user).into_owned(), &f_all, user, sigma2) {
                Ok(lb) => {
                    let exact = closed.per_user_rate[user];
                    worst = worst.max((lb - exact).abs() / exact.abs().max(1e-300));
                }
                Err(e) => failure = Some(e.to_string()),
            }
        }
    }
    let passed = failure.is_none() && worst < 1e-10;
    CheckResult::new("rank-one-bound", passed, failure.unwrap_or(format!("max rel error {worst:e} over {trials} draws")))
}

/// Central differences of a random linear readout of `net` against
/// backprop on `coords` random parameters. Coordinates where the step
/// crosses a ReLU kink are redrawn.
pub fn network_gradient(rng: &mut SimRng, specs: &[LayerSpec], coords: usize) -> Result<(f64, usize), String> {
    let net = Mlp::new(specs, rng).map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..net.input_width()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let readout: Vec<f64> = (0..net.output_width()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cache = net.forward_cached(&x).map_err(|e| e.to_string())?;
    let pattern = cache.sign_pattern();
    let (grads, _) = net.backward(&cache, &readout).map_err(|e| e.to_string())?;
    let analytic = grads.flat();
    let value = |n: &Mlp| -> Result<(f64, Vec<bool>), String> {
        let c = n.forward_cached(&x).map_err(|e| e.to_string())?;
        Ok((c.output().iter().zip(&readout).map(|(y, w)| y * w).sum(), c.sign_pattern()))
    };
    let step = 1e-6;
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0usize, 0usize);
    while checked < coords {
        if skipped > 20 * coords {
            return Err(format!("only {checked} kink-free coordinates found"));
        }
        let idx = rng.random_range(0..net.param_count());
        let mut plus = net.clone();
        *plus.param_mut(idx) += step;
        let mut minus = net.clone();
        *minus.param_mut(idx) -= step;
        let ((fp, pp), (fm, pm)) = (value(&plus)?, value(&minus)?);
        if pp != pattern || pm != pattern {
            skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * step);
        let scale = analytic[idx].abs().max(numeric.abs());
        let err = (analytic[idx] - numeric).abs();
        if scale < 1e-8 {
            // Both vanish, so relative error is undefined; compare absolutely.
            if err >= 1e-8 {
                return Err(format!("coordinate {idx}: {} vs {numeric}", analytic[idx]));
            }
        } else {
            worst = worst.max(err / scale);
        }
        checked += 1;
    }
    Ok((worst, skipped))
}

fn gradient_result(name: &'static str, rng: &mut SimRng, specs: &[LayerSpec], coords: usize) -> CheckResult {
    match network_gradient(rng, specs, coords) {
        Ok((worst, skipped)) => CheckResult::new(
            name,
            worst < 1e-4,
            format!("max rel error {worst:e} on {coords} coordinates ({skipped} kink crossings redrawn)"),
        ),
        Err(e) => CheckResult::new(name, false, e),
    }
}

pub fn projection(rng: &mut SimRng, trials: usize) -> CheckResult {
    let mut bad = 0;
    for _ in 0..trials {
        let dim = rng.random_range(1..40);
        let radius = rng.random_range(0.1..3.0);
        let spread = rng.random_range(0.01..5.0);
        let x: Vec<f64> = (0..dim).map(|_| spread * rng.random_range(-1.0..1.0)).collect();
        let p = project_action(&x, radius);
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let twice = project_action(&p, radius);
        let inside_kept = xnorm > radius || p == x;
        let idempotent = twice.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-12 * radius);
        if norm > radius * (1.0 + 1e-12) || !inside_kept || !idempotent {
            bad += 1;
        }
    }
    CheckResult::new("projection", bad == 0, format!("{bad} of {trials} draws violated norm, interior or idempotency"))
}

pub fn zero_forcing(rng: &mut SimRng, trials: usize) -> CheckResult {
    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..trials {
        let h = random_matrix(rng, 9, 2);
        match zf_precoder(&h, 1.0) {
            Ok(v) => {
                let g = h.adjoint() * &v;
                for k in 0..2 {
                    for i in 0..2 {
                        if i != k {
                            worst = worst.max(g[(k, i)].norm() / g[(k, k)].norm());
                        }
                    }
                }
            }
            Err(e) => failure = Some(e.to_string()),
        }
    }
    let passed = failure.is_none() && worst < 1e-10;
    CheckResult::new("zero-forcing", passed, failure.unwrap_or(format!("max leakage ratio {worst:e}")))
}

pub fn array_response(rng: &mut SimRng, trials: usize) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let geom = match UpaGeometry::new(rng.random_range(1..6), rng.random_range(1..6)) {
            Ok(g) => g,
            Err(e) => return CheckResult::new("array-response", false, e.to_string()),
        };
        let u = upa_response(rng.random_range(0.0..std::f64::consts::PI), rng.random_range(0.0..std::f64::consts::PI), &geom);
        worst = worst.max((u.norm() - 1.0).abs());
    }
    CheckResult::new("array-response", worst < 1e-12, format!("max |norm - 1| {worst:e}"))
}

/// Reference figures of the scenario.
pub fn physics() -> CheckResult {
    let tc = coherence_time(2e9, 540e3, 80f64.to_radians());
    let steps = compute_delay_steps(1.9e-3 * SPEED_OF_LIGHT, 115e-6);
    let n = noise_power(280.0, 40e6);
    let period = OrbitLayer {
        plane_count: 1,
        sats_per_plane: 1,
        altitude: 550e3,
        inclination: 0.0,
        raan_offset: 0.0,
        phase_offset: 0.0,
        phasing: 0,
    }
    .period();
    match (tc, steps) {
        (Ok(tc), Ok(steps)) => {
            let passed = (tc - 115e-6).abs() <= 2e-6
                && steps == 16
                && (n - 1.547e-13).abs() <= 1.547e-16
                && (period - 5731.0).abs() <= 1.0;
            CheckResult::new(
                "physics",
                passed,
                format!("coherence {:.2} us, delay {steps} steps, noise {n:e} W, period {period:.2} s", tc * 1e6),
            )
        }
        (Err(e), _) | (_, Err(e)) => CheckResult::new("physics", false, e.to_string()),
    }
}

/// Runs every check. `states` and `actions` size the networks under test.
pub fn run_all(seed: u64, states: usize, actions: usize) -> Vec<CheckResult> {
    let streams = RngStreams::new(seed);
    let mut rng = streams.stream(stream::CHECK);
    vec![
        determinant_identity(&mut rng, 100, 9),
        rank_one_bound(&mut rng, 100, 9, 2),
        gradient_result("actor-gradient", &mut rng, &actor_layers(states, actions), 200),
        gradient_result("critic-gradient", &mut rng, &critic_layers(states, actions), 200),
        projection(&mut rng, 200),
        zero_forcing(&mut rng, 1000),
        array_response(&mut rng, 200),
        physics(),
    ]
}
