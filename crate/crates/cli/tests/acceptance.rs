//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use gpauli::dynmaps::{DecoherenceFunction, DensityMatrix, KrausSet, MixtureMap, Ramp};
use gpauli::invertibility::{
    numeric_singularity_scan, output_invertible, singular_time_exponential, threshold,
    Classification, ScanOptions,
};
use gpauli::linalg::{c, vectorize, CMatrix, C64};
use gpauli::measure::{delta_closed_form, delta_monte_carlo, delta_quadrature, prime_powers_in};
use gpauli::mub::{build_mub, build_unitaries, verify_mub, WeylUnitaries};

const MC_SAMPLES: u64 = 1_000_000;
const MC_SEED: u64 = 0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn unitaries(d: usize) -> Arc<WeylUnitaries> {
    Arc::new(build_unitaries(&build_mub(d).expect("prime power")))
}

fn simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

fn theorem_one_three_ways() -> Outcome {
    let mut worst_quad = 0.0f64;
    let mut worst_sigma = 0.0f64;
    let mut slowest = 0.0f64;
    for (d, n) in [(2usize, 1.5), (2, 1.9), (3, 1.2), (5, 1.1), (7, 1.03)] {
        let start = Instant::now();
        let closed = delta_closed_form(d, n).map_err(|e| e.to_string())?.delta;
        let quad = delta_quadrature(d, n).map_err(|e| e.to_string())?.delta;
        let mc = delta_monte_carlo(d, n, MC_SAMPLES, MC_SEED).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let stderr = mc.stderr.unwrap();
        check(
            (closed - quad).abs() <= 1e-9,
            format!("d={d} n={n}: |closed-quad| = {:e}", (closed - quad).abs()),
        )?;
        check(
            (closed - mc.delta).abs() <= 3.0 * stderr,
            format!(
                "d={d} n={n}: closed {closed} vs MC {} (stderr {stderr})",
                mc.delta
            ),
        )?;
        check(secs < 5.0, format!("d={d} n={n}: took {secs:.2} s"))?;
        worst_quad = worst_quad.max((closed - quad).abs());
        worst_sigma = worst_sigma.max((closed - mc.delta).abs() / stderr);
        slowest = slowest.max(secs);
    }
    Ok(format!(
        "max |closed-quad| {worst_quad:.1e}, max MC deviation {worst_sigma:.2} sigma, slowest point {slowest:.2} s"
    ))
}

fn boundary_exactness() -> Outcome {
    for d in [2usize, 3, 4, 5, 7, 8, 9] {
        let df = d as f64;
        let upper = df / (df - 1.0);
        let lower = df * df / (df * df - 1.0);
        for (n, want) in [(upper, 1.0), (lower, 0.0)] {
            let closed = delta_closed_form(d, n).map_err(|e| e.to_string())?.delta;
            let quad = delta_quadrature(d, n).map_err(|e| e.to_string())?.delta;
            check(
                (closed - want).abs() <= 1e-12,
                format!("closed Delta({d}, {n}) = {closed}"),
            )?;
            check(
                (quad - want).abs() <= 1e-12,
                format!("quadrature Delta({d}, {n}) = {quad}"),
            )?;
        }
    }
    Ok("Delta = 1 at d/(d-1) and 0 at d^2/(d^2-1) for d in {2,3,4,5,7,8,9}".into())
}

fn sweep_reproduction() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_gpauli"))
        .args([
            "sweep", "--lo", "7", "--hi", "32", "--n", "1.03", "--format", "csv",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        out.status.success(),
        format!("sweep exited with {}", out.status),
    )?;
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    check(
        lines.next() == Some("d,delta,log10_delta"),
        "missing CSV header",
    )?;
    let rows: Vec<(usize, f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect();
    let dims: Vec<usize> = rows.iter().map(|r| r.0).collect();
    check(
        dims == vec![7, 8, 9, 11, 13, 16, 17, 19, 23, 25, 27, 29, 31, 32],
        format!("dimensions {dims:?}"),
    )?;
    check(
        rows.windows(2).all(|w| w[1].1 > w[0].1),
        "Delta not strictly increasing",
    )?;
    check(
        rows.windows(2).all(|w| w[1].2 > w[0].2),
        "log10 Delta not monotone",
    )?;
    let (first, last) = (rows[0].1, rows[13].1);
    check(
        (first / 3.878e-9 - 1.0).abs() <= 1e-3,
        format!("Delta(7) = {first:e}"),
    )?;
    check(
        (last / 9.09e-2 - 1.0).abs() <= 1e-3,
        format!("Delta(32) = {last:e}"),
    )?;
    check(secs < 1.0, format!("sweep took {secs:.3} s"))?;
    Ok(format!(
        "14 rows, Delta(7) = {first:.4e}, Delta(32) = {last:.4e}, {secs:.3} s"
    ))
}

fn qubit_formula() -> Outcome {
    for k in 0..=40 {
        let n = 4.0 / 3.0 + (2.0 - 4.0 / 3.0) * k as f64 / 40.0;
        let closed = delta_closed_form(2, n).map_err(|e| e.to_string())?.delta;
        let qubit = (3.0 * n - 4.0).powi(2) / 4.0;
        check(
            (closed - qubit).abs() <= 1e-12,
            format!("n={n}: {closed} vs (3n-4)^2/4 = {qubit}"),
        )?;
    }
    let mc = delta_monte_carlo(2, 1.5, MC_SAMPLES, MC_SEED).map_err(|e| e.to_string())?;
    let sigma = mc.stderr.unwrap();
    let right = (3.0f64 * 1.5 - 4.0).powi(2) / 4.0;
    let wrong = (4.0f64 - 3.0 * 1.5).powi(2) / 8.0;
    check(
        (mc.delta - right).abs() <= 3.0 * sigma,
        format!("MC {} vs {right}", mc.delta),
    )?;
    check(
        (mc.delta - wrong).abs() > 3.0 * sigma,
        format!("MC {} also matches {wrong}", mc.delta),
    )?;
    let top = delta_closed_form(2, 2.0).map_err(|e| e.to_string())?.delta;
    check(top == 1.0, format!("Delta(2,2) = {top}"))?;
    Ok(format!(
        "MC {:.5} within {:.2} sigma of (3n-4)^2/4 = 0.0625, {:.0} sigma from (4-3n)^2/8 = 0.03125",
        mc.delta,
        (mc.delta - right).abs() / sigma,
        (mc.delta - wrong).abs() / sigma
    ))
}

fn exponential_singular_times() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dims = [2usize, 3, 5, 7];
    let maps: Vec<Arc<WeylUnitaries>> = dims.iter().map(|&d| unitaries(d)).collect();
    let mut worst = 0.0f64;
    let (mut roots, mut nones) = (0, 0);
    for draw in 0..200 {
        let which = rng.random_range(0..dims.len());
        let d = dims[which];
        let df = d as f64;
        let n = 1.0 + rng.random::<f64>() * (df / (df - 1.0) - 1.0);
        let c_rate = 0.2 + 2.0 * rng.random::<f64>();
        let w = simplex(&mut rng, d + 1);
        let pf = DecoherenceFunction::exponential(n, c_rate).map_err(|e| e.to_string())?;
        let m = MixtureMap::new(maps[which].clone(), w.clone(), pf).map_err(|e| e.to_string())?;
        let rep = numeric_singularity_scan(&m, ScanOptions::default_for(&pf))
            .map_err(|e| e.to_string())?;
        let g = threshold(d, n);
        for (i, st) in rep.singular_times.iter().enumerate() {
            let expected =
                singular_time_exponential(d, n, c_rate, w[i]).map_err(|e| e.to_string())?;
            match (st.t_star, expected) {
                (Some(a), Some(b)) => {
                    let rel = (a - b).abs() / b;
                    check(
                        rel <= 1e-9,
                        format!("draw {draw}: d={d} i={} t*={a} vs {b}", i + 1),
                    )?;
                    worst = worst.max(rel);
                    roots += 1;
                }
                (None, None) => nones += 1,
                other => return Err(format!("draw {draw}: d={d} i={} verdicts {other:?}", i + 1)),
            }
            check(
                st.t_star.is_none() == (w[i] >= g),
                format!("draw {draw}: verdict vs x_i >= g at i={}", i + 1),
            )?;
        }
        check(
            rep.is_invertible() == output_invertible(d, n, &w),
            format!("draw {draw}: map verdict disagrees with the threshold criterion"),
        )?;
    }
    Ok(format!("{roots} roots (max rel. error {worst:.1e}), {nones} none-verdicts, all consistent with x_i >= g"))
}

fn cosine_and_plateau() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = unitaries(2);
    for draw in 0..100 {
        let omega = 0.2 + 3.0 * rng.random::<f64>();
        let pf = DecoherenceFunction::cosine(omega).map_err(|e| e.to_string())?;
        let m = MixtureMap::new(u.clone(), simplex(&mut rng, 3), pf).map_err(|e| e.to_string())?;
        let rep = numeric_singularity_scan(&m, ScanOptions::default_for(&pf))
            .map_err(|e| e.to_string())?;
        match rep.classification {
            Classification::NoninvertibleAt { t_star } if t_star.is_finite() => {}
            other => return Err(format!("cosine draw {draw}: {other:?}")),
        }
    }
    let ramps = [Ramp::Linear, Ramp::Quadratic, Ramp::HalfSine];
    for draw in 0..100 {
        let t_sharp = 0.1 + 5.0 * rng.random::<f64>();
        let pf =
            DecoherenceFunction::plateau(ramps[draw % 3], t_sharp).map_err(|e| e.to_string())?;
        let m = MixtureMap::new(u.clone(), simplex(&mut rng, 3), pf).map_err(|e| e.to_string())?;
        let opts = ScanOptions {
            t_max: 100.0 * t_sharp,
            ..ScanOptions::default_for(&pf)
        };
        let rep = numeric_singularity_scan(&m, opts).map_err(|e| e.to_string())?;
        check(
            rep.classification == Classification::Invertible,
            format!("plateau draw {draw}: {:?}", rep.classification),
        )?;
    }
    Ok(
        "100 cosine draws all singular at finite t*, 100 plateau draws invertible on [0, 100 t#]"
            .into(),
    )
}

fn semigroup_point() -> Outcome {
    let c_rate = 0.8;
    let mut worst_lambda = 0.0f64;
    let mut worst_rate = 0.0f64;
    for d in [2usize, 3, 5] {
        let df = d as f64;
        let pf = DecoherenceFunction::exponential(df * df / (df * df - 1.0), c_rate)
            .map_err(|e| e.to_string())?;
        let u = unitaries(d);
        let m = MixtureMap::new(u.clone(), vec![1.0 / (df + 1.0); d + 1], pf)
            .map_err(|e| e.to_string())?;
        let mut first_rates: Option<Vec<f64>> = None;
        for k in 0..10 {
            let t = 0.05 + 0.4 * k as f64;
            let s = m.superoperator(t).map_err(|e| e.to_string())?;
            for i in 0..=d {
                for p in 1..d as i64 {
                    let v = vectorize(u.power(i, p));
                    let lambda = (v.adjoint() * s.matrix() * &v)[(0, 0)].re / df;
                    let err = (lambda - (-c_rate * t).exp()).abs();
                    check(err <= 1e-12, format!("d={d} t={t} i={i}: lambda {lambda}"))?;
                    worst_lambda = worst_lambda.max(err);
                }
            }
            let rates = m
                .numeric_generator(t, 1e-5 / c_rate)
                .map_err(|e| e.to_string())?
                .rates;
            match &first_rates {
                None => first_rates = Some(rates),
                Some(r0) => {
                    for (a, b) in rates.iter().zip(r0) {
                        check(
                            (a - b).abs() <= 1e-6,
                            format!("d={d} t={t}: rate {a} vs {b}"),
                        )?;
                        worst_rate = worst_rate.max((a - b).abs());
                    }
                }
            }
        }
    }
    Ok(format!(
        "max |lambda - e^-ct| {worst_lambda:.1e}, max rate drift {worst_rate:.1e}"
    ))
}

fn random_state(rng: &mut ChaCha8Rng, d: usize) -> DensityMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let rho = &g * g.adjoint();
    let tr = gpauli::linalg::trace(&rho).re;
    DensityMatrix::new(rho.unscale(tr)).expect("Ginibre state is valid")
}

fn random_family(rng: &mut ChaCha8Rng) -> (DecoherenceFunction, f64) {
    match rng.random_range(0..4) {
        0 => {
            let pf = DecoherenceFunction::exponential(
                1.0 + 2.0 * rng.random::<f64>(),
                0.1 + 2.0 * rng.random::<f64>(),
            )
            .unwrap();
            (pf, 10.0)
        }
        1 => (
            DecoherenceFunction::cosine(0.2 + 2.0 * rng.random::<f64>()).unwrap(),
            20.0,
        ),
        2 => {
            let omega = 0.2 + 2.0 * rng.random::<f64>();
            (
                DecoherenceFunction::sine(omega).unwrap(),
                std::f64::consts::PI / omega,
            )
        }
        _ => (
            DecoherenceFunction::plateau(Ramp::Linear, 0.1 + 2.0 * rng.random::<f64>()).unwrap(),
            10.0,
        ),
    }
}

fn mub_and_map_validity() -> Outcome {
    let dims = prime_powers_in(2, 32);
    for &d in &dims {
        let rep = verify_mub(&build_mub(d).map_err(|e| e.to_string())?, 1e-12);
        check(rep.passed, format!("MUB d={d}: {rep:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_trace = 0.0f64;
    let mut worst_state = f64::INFINITY;
    let mut worst_choi = f64::INFINITY;
    for d in prime_powers_in(2, 9) {
        let u = unitaries(d);
        for draw in 0..50 {
            let (pf, t_end) = random_family(&mut rng);
            let t = rng.random::<f64>() * t_end;
            let m = MixtureMap::new(u.clone(), simplex(&mut rng, d + 1), pf)
                .map_err(|e| e.to_string())?;
            let rho = random_state(&mut rng, d);
            let out = m.apply(t, &rho).map_err(|e| e.to_string())?;
            let tr_err = (gpauli::linalg::trace(out.matrix()) - C64::new(1.0, 0.0)).norm();
            let lmin = out.min_eigenvalue();
            let choi = m.superoperator(t).map_err(|e| e.to_string())?.to_choi();
            let verdict = choi.is_cp(1e-10).map_err(|e| e.to_string())?;
            check(
                tr_err <= 1e-12,
                format!("d={d} draw {draw}: trace error {tr_err:e}"),
            )?;
            check(
                lmin >= -1e-10,
                format!("d={d} draw {draw}: lambda_min {lmin:e}"),
            )?;
            check(
                verdict.completely_positive,
                format!(
                    "d={d} draw {draw}: Choi min eigenvalue {:e}",
                    verdict.min_eigenvalue
                ),
            )?;
            worst_trace = worst_trace.max(tr_err);
            worst_state = worst_state.min(lmin);
            worst_choi = worst_choi.min(verdict.min_eigenvalue);
        }
    }
    Ok(format!(
        "{} MUB sets pass at 1e-12; 350 map draws: max trace error {worst_trace:.1e}, min state eigenvalue {worst_state:.1e}, min Choi eigenvalue {worst_choi:.1e}",
        dims.len()
    ))
}

fn random_kraus(rng: &mut ChaCha8Rng, d: usize) -> KrausSet {
    // isometry V = G (G^dagger G)^{-1/2}, cut into d x d blocks
    let r = rng.random_range(1..=d * d);
    let g = CMatrix::from_fn(r * d, d, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let gram = g.adjoint() * &g;
    let eig = gram.clone().symmetric_eigen();
    let inv_sqrt = &eig.eigenvectors
        * CMatrix::from_diagonal(&eig.eigenvalues.map(|x| C64::new(1.0 / x.sqrt(), 0.0)))
        * eig.eigenvectors.adjoint();
    let v = g * inv_sqrt;
    KrausSet::new((0..r).map(|k| v.rows(k * d, d).into_owned()).collect()).expect("valid Kraus set")
}

fn replacement_kraus(rng: &mut ChaCha8Rng, d: usize) -> KrausSet {
    // rho -> tr(rho) sigma; rank-deficient superoperator
    let sigma = random_state(rng, d);
    let eig = sigma.matrix().clone().symmetric_eigen();
    let mut ops = Vec::new();
    for a in 0..d {
        let s = eig.eigenvalues[a].max(0.0).sqrt();
        for j in 0..d {
            let mut k = CMatrix::zeros(d, d);
            for r in 0..d {
                k[(r, j)] = eig.eigenvectors[(r, a)] * s;
            }
            ops.push(k);
        }
    }
    KrausSet::new(ops).expect("valid Kraus set")
}

fn dual_determinant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut singular = 0;
    for draw in 0..50 {
        let d = if draw % 2 == 0 { 2 } else { 3 };
        let kraus = if draw % 5 == 4 {
            replacement_kraus(&mut rng, d)
        } else {
            random_kraus(&mut rng, d)
        };
        let det = kraus.to_superoperator().determinant();
        let dual = kraus.dagger_dual(1e-10).dual.to_superoperator();
        let det_dual = dual.determinant();
        let err = (det_dual - det.conj()).norm();
        check(
            err <= 1e-10,
            format!(
                "draw {draw}: det dual {det_dual} vs conj det {}",
                det.conj()
            ),
        )?;
        worst = worst.max(err);
        if det.norm() <= 1e-12 {
            singular += 1;
            let smin = dual.matrix().singular_values().min();
            check(
                det_dual.norm() <= 1e-10 && smin <= 1e-10,
                format!(
                    "draw {draw}: noninvertible map has dual with det {det_dual}, s_min {smin:e}"
                ),
            )?;
        }
    }
    check(
        singular >= 10,
        format!("only {singular} noninvertible maps drawn"),
    )?;
    Ok(format!("max |det(dual) - conj det| {worst:.1e}; {singular} noninvertible maps have noninvertible duals"))
}

fn generator_extraction() -> Outcome {
    let u = unitaries(2);
    let mut worst = 0.0f64;
    for n in [2.0, 3.0] {
        for c_rate in [1.0, 2.5] {
            let pf = DecoherenceFunction::exponential(n, c_rate).map_err(|e| e.to_string())?;
            let m = MixtureMap::vertex(u.clone(), 0, pf).map_err(|e| e.to_string())?;
            for k in 0..10 {
                let t = 3.0 / c_rate * k as f64 / 9.0;
                let est = m
                    .numeric_generator(t, 1e-5 / c_rate)
                    .map_err(|e| e.to_string())?;
                let gamma = pf.decay_rate(t).map_err(|e| e.to_string())?;
                // rates on the two directions not fixed by sigma_z are -2 gamma
                for &r in &est.rates[1..] {
                    let rel = (-r / 2.0 - gamma).abs() / gamma;
                    check(
                        rel <= 1e-6,
                        format!("n={n} c={c_rate} t={t}: {} vs gamma {gamma}", -r / 2.0),
                    )?;
                    worst = worst.max(rel);
                }
            }
        }
    }
    Ok(format!(
        "max relative error {worst:.1e} over n in {{2,3}}, 10 times in [0, 3/c]"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "closed form, quadrature and Monte Carlo agree",
            theorem_one_three_ways,
        ),
        (
            "boundary values of the invertible measure",
            boundary_exactness,
        ),
        (
            "prime-power sweep at n = 1.03 via the CLI",
            sweep_reproduction,
        ),
        ("qubit measure is (3n-4)^2/4", qubit_formula),
        (
            "exponential singular times, scan vs closed form",
            exponential_singular_times,
        ),
        (
            "cosine always singular, plateau always invertible",
            cosine_and_plateau,
        ),
        ("equal-mix semigroup point", semigroup_point),
        ("MUB construction and map validity", mub_and_map_validity),
        ("dagger dual determinant", dual_determinant),
        ("qubit generator extraction", generator_extraction),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail}) [{secs:.2} s]", k + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {}: {name} ({detail}) [{secs:.2} s]", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
