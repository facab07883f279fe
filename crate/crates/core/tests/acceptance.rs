//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reported but do not fail the
//! target; any other failure does. Set `SPHMEAN_STRICT=1` to fail on every
//! FAIL line.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sphmean::analysis::{
    decay_check, gaussian_integral_oracle, isometry_check, oracle_grid, perturbation_sweep,
    probe_lattice, range_floor, range_leak, range_residual,
};
use sphmean::calculus::{abel_forward, apply_d, EvenProfile};
use sphmean::cli::{cmd_forward, cmd_phantom, RunConfig};
use sphmean::forward::{trace_difference, TraceData};
use sphmean::inversion::{
    invert_direct, invert_spectral, relative_error, route_difference, Compensation,
};
use sphmean::io::{read_field, write_field};
use sphmean::spectral::{
    apply_n, apply_n_periodic, frequency_grid, verify_multiplier, zconvert, zinvert,
    HalfSpaceField, Sign, ZGridSpec,
};
use sphmean::{Axis, AxisName, GridField, Parity};

use common::*;

type Check<'a> = (u32, &'static str, Box<dyn Fn() -> Outcome + 'a>);

const KNOWN_FAILURES: [u32; 2] = [2, 7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Reference {
    f_box: GridField,
    f_out: GridField,
    abel: TraceData,
    spectral: TraceData,
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let n = 256;
    let h = 0.05;
    let pa = Axis::new(AxisName::XPrime, -(n as f64) * h / 2.0, h, n).unwrap();
    let pn = Axis::new(AxisName::Pn, -(n as f64) * h / 2.0, h, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bumps: Vec<[f64; 4]> = (0..6)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(0.3..0.6),
            ]
        })
        .collect();
    let g = GridField::from_fn_2d(pa, pn, [Parity::None, Parity::None], |i, j| {
        let (x, y) = (pa.coord(i), pn.coord(j));
        bumps
            .iter()
            .map(|b| {
                b[0] * (-((x - b[1]).powi(2) + (y - b[2]).powi(2)) / (2.0 * b[3] * b[3])).exp()
            })
            .sum()
    })
    .unwrap();
    let norm = g.norm_sqr().sqrt();
    let mut worst_ratio: f64 = 0.0;
    for s in [Sign::Plus, Sign::Minus] {
        let out = apply_n(&g, s, 0.0).unwrap();
        worst_ratio = worst_ratio.max((out.field.norm_sqr().sqrt() / norm - 1.0).abs());
    }
    let fwd = apply_n(&g, Sign::Plus, 0.0).unwrap().field;
    let back = apply_n_periodic(&fwd, Sign::Minus, 0.0);
    let inv = match back {
        Ok(b) => b.field.lin_comb(1.0, &g, -1.0).unwrap().norm_sqr().sqrt() / norm,
        Err(e) => return outcome(false, format!("second application rejected: {e}")),
    };
    outcome(
        worst_ratio <= 1e-12 && inv <= 1e-12,
        format!(
            "| |N g|/|g| - 1 | = {worst_ratio:.2e}, involution residual = {inv:.2e} (tol 1e-12)"
        ),
    )
}

fn criterion_2() -> Outcome {
    let xi = frequency_grid(64, 1.0);
    let eps = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
    let rows = verify_multiplier(&xi, &xi, &eps);
    let monotone = rows
        .windows(2)
        .all(|w| w[1].max_abs_deviation <= w[0].max_abs_deviation);
    let last = rows.last().unwrap().max_abs_deviation;
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.0e}:{:.2e}", r.eps, r.max_abs_deviation))
        .collect();
    outcome(
        monotone && last <= 1e-6,
        format!(
            "max deviation at eps=1e-8 is {last:.3e} (tol 1e-6), monotone={monotone} [{}]",
            table.join(" ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for (w, tau) in oracle_grid() {
        let r = gaussian_integral_oracle(w, tau).unwrap();
        let direct = (std::f64::consts::PI / w).sqrt() * (-tau * tau / (4.0 * w)).exp();
        worst = worst
            .max(r.gaussian.abs_diff())
            .max(r.half_line.abs_diff())
            .max((r.gaussian.closed_form - direct).norm());
    }
    let w = Complex64::new(1.0, 2.0);
    let sample = gaussian_integral_oracle(w, 3.0)
        .unwrap()
        .gaussian
        .abs_diff();
    outcome(
        worst <= 1e-10,
        format!("max |numeric - closed form| over 5x5 grid = {worst:.2e}, at w=1+2i tau=3: {sample:.2e} (tol 1e-10)"),
    )
}

fn criterion_4(r: &Reference) -> Outcome {
    let d = trace_difference(&r.abel, &r.spectral).unwrap();
    outcome(
        d <= 0.01,
        format!("relative L2 route difference = {d:.4e} (tol 1e-2)"),
    )
}

fn criterion_5(r: &Reference) -> Outcome {
    let gaps: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&n| {
            isometry_check(&r.f_box, &leading_nodes(&r.abel, n))
                .unwrap()
                .rel_gap
        })
        .collect();
    let reference = gaps[2];
    let mono = strictly_decreasing(&gaps);
    outcome(
        reference <= 0.02 && mono,
        format!(
            "rel_gap at 128/256/512 t-nodes = {:.3e} / {:.3e} / {:.3e} (tol 2e-2, decreasing={mono})",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

fn criterion_6(r: &Reference) -> Outcome {
    let og = output_grid();
    let comp = Compensation::RangeReflection;
    let mut direct = Vec::new();
    let mut spectral = Vec::new();
    let mut agree = Vec::new();
    let mut times = (0.0, 0.0);
    for n in [128, 256, 512] {
        let tr = leading_nodes(&r.abel, n);
        let s = Instant::now();
        let d = invert_direct(&tr, &og, tr.t_axis().last(), comp).unwrap();
        times.0 = s.elapsed().as_secs_f64();
        let s = Instant::now();
        let z = invert_spectral(&tr, &og, &ZGridSpec::default(), comp, 0.0).unwrap();
        times.1 = s.elapsed().as_secs_f64();
        direct.push(relative_error(&d.field, &r.f_out).unwrap());
        spectral.push(relative_error(&z.field, &r.f_out).unwrap());
        agree.push(route_difference(&d.field, &z.field, &r.f_out).unwrap());
    }
    let pass = direct[2] <= 0.05
        && spectral[2] <= 0.05
        && agree[2] <= 0.03
        && strictly_decreasing(&direct)
        && strictly_decreasing(&spectral);
    outcome(
        pass,
        format!(
            "direct {:.3e}/{:.3e}/{:.3e}, spectral {:.3e}/{:.3e}/{:.3e} (tol 5e-2), routes differ {:.3e} (tol 3e-2); reference run {:.1}s direct, {:.1}s spectral",
            direct[0], direct[1], direct[2], spectral[0], spectral[1], spectral[2], agree[2], times.0, times.1
        ),
    )
}

fn criterion_7(r: &Reference) -> Outcome {
    let probes = probe_lattice(1.5);
    let spec = ZGridSpec::default();
    let res = range_residual(&r.abel, &probes).unwrap();
    let floor = range_floor(&r.abel, &probes).unwrap().floor;
    let leak = range_leak(&r.abel, &spec).unwrap();
    let sweep =
        perturbation_sweep(&r.abel, &probes, &spec, &[0.01, 0.03, 0.1, 0.3, 1.0], 7).unwrap();
    let top = sweep.rows.last().unwrap().leak;
    let residual_ok = res.max_normalized <= 10.0 * floor;
    let leak_ok = leak <= 1e-3;
    let linear_ok = sweep.fit.r_squared >= 0.99;
    let ratio_ok = top >= 10.0 * leak;
    outcome(
        residual_ok && leak_ok && linear_ok && ratio_ok,
        format!(
            "residual {:.3e} vs 10x floor {:.3e} [{}]; leak {leak:.3e} (tol 1e-3) [{}]; sweep R^2 {:.4} (tol 0.99) [{}], slope {:.3e} +- {:.1e}; perturbed/in-range leak {:.2} (tol 10) [{}]; rank corr {:.2}",
            res.max_normalized,
            10.0 * floor,
            ok(residual_ok),
            ok(leak_ok),
            sweep.fit.r_squared,
            ok(linear_ok),
            sweep.fit.slope,
            sweep.fit.slope_stderr,
            top / leak,
            ok(ratio_ok),
            sweep.rank_correlation,
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn criterion_8(r: &Reference) -> Outcome {
    let d = decay_check(&r.abel, 0.0, 1.0);
    let slope = d.slope.unwrap_or(f64::NAN);
    outcome(
        slope <= 0.05,
        format!(
            "log-log slope over [{}, {}] = {slope:.4} (tol 0.05)",
            d.t_lo, d.t_hi
        ),
    )
}

fn criterion_9() -> Outcome {
    let ta = Axis::spanning(AxisName::T, 0.0, 3.0, 61).unwrap();
    let d2 = apply_d(&EvenProfile::from_fn(ta, |t| t * t).unwrap()).unwrap();
    let d4 = apply_d(&EvenProfile::from_fn(ta, |t| t.powi(4)).unwrap()).unwrap();
    let e_d2 = max_rel(d2.values(), &vec![1.0; ta.count]);
    let want4: Vec<f64> = ta.coords().map(|t| 2.0 * t * t).collect();
    let e_d4 = max_rel(d4.values(), &want4);

    let a1 = abel_forward(&EvenProfile::from_fn(ta, |_| 1.0).unwrap(), 2).unwrap();
    let a2 = abel_forward(&EvenProfile::from_fn(ta, |r| r * r).unwrap(), 2).unwrap();
    let e_a1 = max_rel(&a1, &ta.coords().collect::<Vec<_>>());
    let e_a2 = max_rel(
        &a2,
        &ta.coords()
            .map(|t| 2.0 / 3.0 * t.powi(3))
            .collect::<Vec<_>>(),
    );

    let xa = Axis::new(AxisName::XPrime, -2.0, 0.1, 41).unwrap();
    let tz = Axis::new(AxisName::T, 0.0, 0.1, 31).unwrap();
    let f = GridField::from_fn_2d(xa, tz, [Parity::None, Parity::Even], |i, j| {
        let (x, t) = (xa.coord(i), tz.coord(j));
        t * t * (1.0 + x * t) * (-(x * x) - t * t).exp()
    })
    .unwrap();
    let spec = ZGridSpec {
        pn_step: 0.01,
        pn_extent: None,
        pad: 2,
    };
    let g: HalfSpaceField = zconvert(&f, &spec).unwrap();
    let xn = Axis::new(AxisName::Xn, 0.1, 0.1, 30).unwrap();
    let back = zinvert(&g, xa, xn).unwrap();
    let mut e_z: f64 = 0.0;
    for i in 0..xa.count {
        for j in 0..xn.count {
            e_z = e_z.max((back.get(i, j) - f.get(i, j + 1)).abs());
        }
    }
    let e_z = e_z / f.max_abs();
    outcome(
        e_d2 <= 1e-10 && e_d4 <= 1e-10 && e_a1 <= 1e-8 && e_a2 <= 1e-8 && e_z <= 1e-6,
        format!(
            "D t^2 {e_d2:.1e}, D t^4 {e_d4:.1e} (tol 1e-10); abel 1 {e_a1:.1e}, r^2 {e_a2:.1e} (tol 1e-8); zinvert(zconvert) {e_z:.1e} (tol 1e-6)"
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.grid.trace.x_count = 96;
    cfg.grid.trace.x_origin = -3.6;
    cfg.grid.trace.t_extent = 2.0;
    cfg.grid.trace.t_count = 64;
    cfg.tmax = 2.0;
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        cmd_phantom(&cfg, d.path()).unwrap();
        cmd_forward(&cfg, d.path()).unwrap();
    }
    let mut identical = true;
    let mut count = 0;
    for entry in std::fs::read_dir(dirs[0].path()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "bin") {
            let other = dirs[1].path().join(p.file_name().unwrap());
            identical &= std::fs::read(&p).unwrap() == std::fs::read(other).unwrap();
            count += 1;
        }
    }

    let xa = Axis::new(AxisName::XPrime, -1.0, 0.25, 9).unwrap();
    let ta = Axis::new(AxisName::T, 0.0, 0.5, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut f = GridField::from_fn_2d(xa, ta, [Parity::None, Parity::Even], |_, _| {
        rng.gen_range(-1e3..1e3) * 10f64.powi(rng.gen_range(-300..300))
    })
    .unwrap();
    f.set(2, 3, f64::NAN);
    f.set(4, 4, -0.0);
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("roundtrip");
    write_field(&f, &stem, None).unwrap();
    let back = read_field::<f64>(&stem).unwrap();
    let bit_exact = back
        .field
        .values()
        .iter()
        .zip(f.values())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && back.field.axes() == f.axes()
        && back.non_finite();
    outcome(
        identical && count >= 3 && bit_exact,
        format!("{count} payloads byte-identical across runs: {identical}; round trip bit-exact: {bit_exact}"),
    )
}

fn main() -> ExitCode {
    let strict = std::env::var("SPHMEAN_STRICT").is_ok_and(|v| v == "1");
    let start = Instant::now();
    let p = reference_phantom();
    let reference = Reference {
        f_box: sampled_box(&p),
        f_out: sampled_output(&p),
        abel: abel_trace(&p),
        spectral: spectral_trace(&p),
    };
    println!(
        "reference data ready in {:.1}s",
        start.elapsed().as_secs_f64()
    );

    let checks: Vec<Check> = vec![
        (
            1,
            "multiplier unitarity and involution",
            Box::new(criterion_1),
        ),
        (2, "multiplier limit", Box::new(criterion_2)),
        (3, "integral oracles", Box::new(criterion_3)),
        (
            4,
            "forward route agreement",
            Box::new(|| criterion_4(&reference)),
        ),
        (5, "isometry identity", Box::new(|| criterion_5(&reference))),
        (
            6,
            "reconstruction accuracy",
            Box::new(|| criterion_6(&reference)),
        ),
        (
            7,
            "range characterization",
            Box::new(|| criterion_7(&reference)),
        ),
        (8, "decay envelope", Box::new(|| criterion_8(&reference))),
        (9, "calculus unit suite", Box::new(criterion_9)),
        (10, "determinism and format", Box::new(criterion_10)),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in checks {
        let s = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {status} {name} ({:.1}s): {}",
            s.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass && (strict || !KNOWN_FAILURES.contains(&id)) {
            unexpected.push(id);
        }
        if o.pass && KNOWN_FAILURES.contains(&id) {
            println!("criterion {id:>2} now passes; remove it from KNOWN_FAILURES");
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures (known failures: {KNOWN_FAILURES:?})");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures in criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
