mod common;

use num_complex::Complex64;

use sphmean::analysis::{
    gaussian_integral_oracle, isometry_check, perturbation_sweep, probe_lattice, range_leak,
};
use sphmean::calculus::gauss_legendre;
use sphmean::forward::{Route, TraceData};
use sphmean::spectral::ZGridSpec;
use sphmean::{GridField, Parity};

use common::*;

#[test]
fn isometry_sides_scale_quadratically() {
    let p = reference_phantom();
    let f = sampled_box(&p);
    let tr = leading_nodes(&spectral_trace(&p), 256);
    let a = isometry_check(&f, &tr).unwrap();
    let f2 = f.scaled(2.0);
    let tr2 = TraceData::new(tr.field.scaled(2.0), tr.route).unwrap();
    let b = isometry_check(&f2, &tr2).unwrap();
    assert!((b.lhs / a.lhs - 4.0).abs() < 1e-12);
    assert!((b.rhs / a.rhs - 4.0).abs() < 1e-12);
    assert!((b.rel_gap - a.rel_gap).abs() < 1e-12);
}

#[test]
fn gaussian_oracle_against_composite_gauss_legendre() {
    let (x, w) = gauss_legendre(20);
    for (wc, tau) in [
        (Complex64::new(1.0, 2.0), 3.0),
        (Complex64::new(0.5, -0.25), 1.5),
    ] {
        let cut = (41.4 / wc.re).sqrt();
        let panels = 400;
        let h = 2.0 * cut / panels as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..panels {
            let mid = -cut + (k as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                let t = mid + 0.5 * h * xi;
                sum += 0.5 * h * wi * (-wc * t * t - Complex64::i() * t * tau).exp();
            }
        }
        let r = gaussian_integral_oracle(wc, tau).unwrap();
        assert!((r.gaussian.numeric - sum).norm() < 1e-11);
        assert!(r.gaussian.abs_diff() < 1e-10);
        assert!(r.half_line.abs_diff() < 1e-10);
    }
}

#[test]
fn generic_bump_leaks_far_more_than_forward_data() {
    let p = reference_phantom();
    let tr = abel_trace(&p);
    let spec = ZGridSpec::default();
    let in_range = range_leak(&tr, &spec).unwrap();
    let (xa, ta) = trace_axes();
    let bump = GridField::from_fn_2d(xa, ta, [Parity::None, Parity::Even], |i, j| {
        let (x, t) = (xa.coord(i), ta.coord(j));
        t * t * (-t * t - x * x).exp()
    })
    .unwrap();
    let out = range_leak(&TraceData::new(bump, Route::Abel).unwrap(), &spec).unwrap();
    assert!(
        out > 10.0 * in_range,
        "bump leak {out:.3e}, in-range {in_range:.3e}"
    );
}

#[test]
fn perturbation_slope_is_significant() {
    let p = reference_phantom();
    let tr = leading_nodes(&abel_trace(&p), 256);
    let sweep = perturbation_sweep(
        &tr,
        &probe_lattice(1.5),
        &ZGridSpec::default(),
        &[0.01, 0.03, 0.1, 0.3, 1.0],
        7,
    )
    .unwrap();
    assert_eq!(sweep.rows.len(), 6);
    assert!(
        sweep.fit.slope.abs() > 3.0 * sweep.fit.slope_stderr,
        "{:?}",
        sweep.fit
    );
}
