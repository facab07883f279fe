//! Verification checks: weighted isometry, range conditions, decay and the
//! Gaussian integral identities.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::RangeKernel;
use crate::error::{Error, Result};
use crate::forward::{decay_profile, DecayProfile, TraceData};
use crate::grid::{Axis, GridField, Parity};
use crate::inversion::{inverse_spectrum, precompute_w};
use crate::phantom::weighted_norm_sqr;
use crate::spectral::ZGridSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormReport {
    pub lhs: f64,
    pub rhs_quadrature: f64,
    pub rhs_tail: f64,
    pub rhs: f64,
    pub rel_gap: f64,
}

/// Both sides of `int |f|^2/|x_n| dx = int |U f|^2/|t| dx' dt`.
///
/// The right side is integrated over the stored window and extended past
/// `Tmax` with a `C/t^2` tail fitted on `[Tmax/2, Tmax]`.
pub fn isometry_check(f: &GridField, tr: &TraceData) -> Result<WeightedNormReport> {
    let lhs = weighted_norm_sqr(f)?;
    tr.field.ensure_finite()?;
    let (xa, ta) = (*tr.x_axis(), *tr.t_axis());
    let wx = xa.trapezoid_weights();
    let wt = ta.trapezoid_weights();
    let energy: Vec<f64> = (0..ta.count)
        .map(|j| {
            let t = ta.coord(j);
            if j == 0 {
                return 0.0;
            }
            (0..xa.count)
                .map(|i| {
                    let u = tr.field.get(i, j);
                    wx[i] * u * u
                })
                .sum::<f64>()
                / t
        })
        .collect();
    let quad: f64 = 2.0 * energy.iter().zip(&wt).map(|(e, w)| e * w).sum::<f64>();
    let tmax = ta.last();
    let tail_pts: Vec<f64> = (0..ta.count)
        .filter(|&j| ta.coord(j) >= 0.5 * tmax)
        .map(|j| ta.coord(j).powi(2) * energy[j])
        .collect();
    let c = if tail_pts.is_empty() {
        0.0
    } else {
        tail_pts.iter().sum::<f64>() / tail_pts.len() as f64
    };
    let tail = 2.0 * c / tmax;
    let rhs = quad + tail;
    let rel_gap = if lhs > 0.0 {
        (lhs - rhs).abs() / lhs
    } else if rhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(WeightedNormReport {
        lhs,
        rhs_quadrature: quad,
        rhs_tail: tail,
        rhs,
        rel_gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub probes: Vec<(f64, f64)>,
    pub residuals: Vec<f64>,
    pub normalization: f64,
    pub max_normalized: f64,
}

/// Probe lattice: five x' columns over `[-extent, extent]` and x_n at
/// `+-0.25, +-0.5, +-1` times `extent`.
pub fn probe_lattice(extent: f64) -> Vec<(f64, f64)> {
    let xs = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let ns = [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0];
    xs.iter()
        .flat_map(|x| ns.iter().map(move |n| (x * extent, n * extent)))
        .collect()
}

/// Range functional at each probe over the full stored time window.
pub fn range_residual(tr: &TraceData, probes: &[(f64, f64)]) -> Result<RangeReport> {
    range_residual_window(tr, probes, tr.t_axis().last())
}

pub fn range_residual_window(
    tr: &TraceData,
    probes: &[(f64, f64)],
    tmax: f64,
) -> Result<RangeReport> {
    if let Some(p) = probes.iter().find(|p| p.1 == 0.0 || !p.1.is_finite()) {
        return Err(Error::NonPositiveXn(p.1));
    }
    let w = precompute_w(tr, 2)?;
    let rk = RangeKernel::new(&w, tmax)?;
    let residuals: Vec<f64> = probes.par_iter().map(|&(x, n)| rk.point(x, n)).collect();
    let normalization = tr.field.max_abs();
    let peak = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(RangeReport {
        probes: probes.to_vec(),
        residuals,
        normalization,
        max_normalized: if normalization > 0.0 {
            peak / normalization
        } else {
            0.0
        },
    })
}

/// Every other node in both x' and t.
pub fn coarsen(tr: &TraceData) -> Result<TraceData> {
    let (xa, ta) = (*tr.x_axis(), *tr.t_axis());
    let cx = Axis::new(xa.name, xa.origin, 2.0 * xa.step, xa.count.div_ceil(2))?;
    let ct = Axis::new(ta.name, 0.0, 2.0 * ta.step, ta.count.div_ceil(2))?;
    let field = GridField::from_fn_2d(cx, ct, [Parity::None, Parity::Even], |i, j| {
        tr.field.get(2 * i, 2 * j)
    })?;
    TraceData::new(field, tr.route)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeFloor {
    pub per_probe: Vec<f64>,
    pub floor: f64,
}

/// Quadrature floor of the range functional: the change under halving the
/// resolution plus the change under halving the time window, normalized
/// like the residual and maximized over probes.
pub fn range_floor(tr: &TraceData, probes: &[(f64, f64)]) -> Result<RangeFloor> {
    let tmax = tr.t_axis().last();
    let fine = range_residual_window(tr, probes, tmax)?;
    let coarse_tr = coarsen(tr)?;
    let coarse = range_residual_window(&coarse_tr, probes, coarse_tr.t_axis().last())?;
    let half = range_residual_window(tr, probes, 0.5 * tmax)?;
    let norm = fine.normalization;
    let per_probe: Vec<f64> = (0..probes.len())
        .map(|k| {
            let d = (fine.residuals[k] - coarse.residuals[k]).abs()
                + (fine.residuals[k] - half.residuals[k]).abs();
            if norm > 0.0 {
                d / norm
            } else {
                d
            }
        })
        .collect();
    let floor = per_probe.iter().cloned().fold(0.0, f64::max);
    Ok(RangeFloor { per_probe, floor })
}

/// Fraction of the energy of `N^{-1} Z F` on `p_n < 0`.
pub fn range_leak(tr: &TraceData, spec: &ZGridSpec) -> Result<f64> {
    if tr.field.max_abs() == 0.0 {
        return Ok(0.0);
    }
    Ok(inverse_spectrum(tr, spec, 0.0)?.leak())
}

/// Smooth random profile `g(x') = sum_k a_k exp(-(x' - c_k)^2)`.
pub fn random_profile(seed: u64, xa: &Axis, terms: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = xa.origin + 0.25 * (xa.last() - xa.origin);
    let hi = xa.last() - 0.25 * (xa.last() - xa.origin);
    let bumps: Vec<(f64, f64)> = (0..terms)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(lo..hi)))
        .collect();
    xa.coords()
        .map(|x| {
            bumps
                .iter()
                .map(|(a, c)| a * (-(x - c) * (x - c)).exp())
                .sum()
        })
        .collect()
}

/// `F + eps * peak|F| * t^2 e^{-t^2} g(x')`.
pub fn perturb(tr: &TraceData, eps: f64, g: &[f64]) -> Result<TraceData> {
    let (xa, ta) = (*tr.x_axis(), *tr.t_axis());
    if g.len() != xa.count {
        return Err(Error::CountMismatch {
            expected: xa.count,
            got: g.len(),
        });
    }
    let scale = eps * tr.field.max_abs().max(f64::MIN_POSITIVE);
    let field = GridField::from_fn_2d(xa, ta, [Parity::None, Parity::Even], |i, j| {
        let t = ta.coord(j);
        tr.field.get(i, j) + scale * t * t * (-t * t).exp() * g[i]
    })?;
    TraceData::new(field, tr.route)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub residual: f64,
    pub leak: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut m = k;
        while m + 1 < idx.len() && v[idx[m + 1]] == v[idx[k]] {
            m += 1;
        }
        let avg = 0.5 * (k + m) as f64 + 1.0;
        for &i in &idx[k..=m] {
            r[i] = avg;
        }
        k = m + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub fit: LineFit,
    pub rank_correlation: f64,
}

/// Residual and leak over the perturbation family `perturb(F, eps, g)`.
/// The fit and rank correlation include `eps = 0`.
pub fn perturbation_sweep(
    tr: &TraceData,
    probes: &[(f64, f64)],
    spec: &ZGridSpec,
    eps_list: &[f64],
    seed: u64,
) -> Result<SweepReport> {
    let g = random_profile(seed, tr.x_axis(), 4);
    let mut all = vec![0.0];
    all.extend(eps_list.iter().copied().filter(|e| *e != 0.0));
    let rows = all
        .iter()
        .map(|&eps| {
            let p = perturb(tr, eps, &g)?;
            Ok(SweepRow {
                eps,
                residual: range_residual(&p, probes)?.max_normalized,
                leak: range_leak(&p, spec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let res: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    let leak: Vec<f64> = rows.iter().map(|r| r.leak).collect();
    Ok(SweepReport {
        seed,
        fit: fit_line(&e, &res),
        rank_correlation: spearman(&leak, &res),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OraclePair {
    pub numeric: Complex64,
    pub closed_form: Complex64,
}

impl OraclePair {
    pub fn abs_diff(&self) -> f64 {
        (self.numeric - self.closed_form).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub w: Complex64,
    pub tau: f64,
    pub gaussian: OraclePair,
    pub half_line: OraclePair,
}

fn integrate_complex(f: impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    use quadrature::double_exponential::integrate;
    let re = integrate(|t| f(t).re, a, b, tol).integral;
    let im = integrate(|t| f(t).im, a, b, tol).integral;
    Complex64::new(re, im)
}

/// `int e^{-w t^2} e^{-i t tau} dt` against `sqrt(pi/w) e^{-tau^2/(4w)}`,
/// and `int_0^inf e^{-w t} t^{-1/2} dt` against `sqrt(pi/w)`.
pub fn gaussian_integral_oracle(w: Complex64, tau: f64) -> Result<OracleReport> {
    if !(w.re > 0.0) {
        return Err(Error::NonPositiveRealPart(w.re));
    }
    let cut = (41.4 / w.re).sqrt();
    let root = (std::f64::consts::PI / w).sqrt();
    let tol = 1e-14;
    let gaussian = OraclePair {
        numeric: integrate_complex(
            |t| (-w * t * t - Complex64::i() * t * tau).exp(),
            -cut,
            cut,
            tol,
        ),
        closed_form: root * (-tau * tau / (4.0 * w)).exp(),
    };
    let half_line = OraclePair {
        numeric: 2.0 * integrate_complex(|s| (-w * s * s).exp(), 0.0, cut, tol),
        closed_form: root,
    };
    Ok(OracleReport {
        w,
        tau,
        gaussian,
        half_line,
    })
}

/// The 5x5 `(w, tau)` grid used by `verify`.
pub fn oracle_grid() -> Vec<(Complex64, f64)> {
    let ws = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(1.0, 2.0),
        Complex64::new(2.0, -1.0),
        Complex64::new(0.75, 0.5),
    ];
    let taus = [0.0, 0.5, 1.0, 2.0, 3.0];
    ws.iter()
        .flat_map(|w| taus.iter().map(move |t| (*w, *t)))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub t_lo: f64,
    pub t_hi: f64,
    pub slope: Option<f64>,
    pub profile: DecayProfile,
}

/// Log-log slope of the compensated envelope over `[2R, Tmax]`.
pub fn decay_check(tr: &TraceData, center: f64, radius: f64) -> DecayReport {
    let profile = decay_profile(tr, center);
    let t_lo = 2.0 * radius;
    let t_hi = tr.t_axis().last();
    DecayReport {
        t_lo,
        t_hi,
        slope: profile.slope(t_lo, t_hi),
        profile,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisName;

    #[test]
    fn spearman_of_monotone_pairs() {
        let a = [0.0, 1.0, 2.0, 5.0];
        assert!((spearman(&a, &[1.0, 3.0, 9.0, 27.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&a, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = fit_line(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_real_cases() {
        let r = gaussian_integral_oracle(Complex64::new(1.0, 0.0), 0.0).unwrap();
        assert!((r.gaussian.numeric.re - 1.7724539).abs() < 1e-7);
        let r = gaussian_integral_oracle(Complex64::new(1.0, 0.0), 2.0).unwrap();
        let want = std::f64::consts::PI.sqrt() * (-1.0f64).exp();
        assert!((r.gaussian.numeric.re - want).abs() < 1e-10);
        assert!(matches!(
            gaussian_integral_oracle(Complex64::new(0.0, 1.0), 0.0),
            Err(Error::NonPositiveRealPart(_))
        ));
    }

    #[test]
    fn zero_trace_has_zero_residual() {
        let xa = Axis::new(AxisName::XPrime, -3.0, 0.1, 61).unwrap();
        let ta = Axis::spanning(AxisName::T, 0.0, 2.0, 41).unwrap();
        let f = GridField::zeros(vec![xa, ta], vec![Parity::None, Parity::Even]).unwrap();
        let tr = TraceData::new(f, crate::forward::Route::Abel).unwrap();
        let r = range_residual(&tr, &probe_lattice(1.0)).unwrap();
        assert!(r.residuals.iter().all(|v| *v == 0.0));
        assert_eq!(r.max_normalized, 0.0);
    }
}
