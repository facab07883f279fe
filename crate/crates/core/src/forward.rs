//! Forward maps: circular means on the line x_n = 0 and the wave trace.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{abel_mean, require_even_t, EvenProfile, TauStencil};
use crate::error::{Error, Result};
use crate::fft::{angular_frequencies, fft2, Direction};
use crate::grid::{Axis, AxisName, GridField, Parity};
use crate::phantom::Phantom;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Abel,
    Spectral,
}

/// Circular means `(Mf)(x', t)` on an (x', t) grid, even in t.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanData(pub GridField);

/// Wave trace `u(x', 0, t)` on an (x', t) grid, even in t.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceData {
    pub field: GridField,
    pub route: Route,
}

impl TraceData {
    /// Wraps a field, checking that t is an even half axis.
    pub fn new(field: GridField, route: Route) -> Result<Self> {
        require_even_t(&field)?;
        Ok(TraceData { field, route })
    }

    pub fn x_axis(&self) -> &Axis {
        self.field.axis(0)
    }

    pub fn t_axis(&self) -> &Axis {
        self.field.axis(1)
    }
}

fn trace_axes(x_axis: Axis, t_axis: Axis) -> Result<(Axis, Axis)> {
    if t_axis.origin != 0.0 {
        return Err(Error::InvalidAxis {
            name: "t".into(),
            reason: "time axis must start at 0".into(),
        });
    }
    Ok((
        Axis {
            name: AxisName::XPrime,
            ..x_axis
        },
        Axis {
            name: AxisName::T,
            ..t_axis
        },
    ))
}

/// Number of equally spaced angles used for a circle of radius `t`.
pub fn circle_nodes(t: f64, a: f64) -> usize {
    32usize.max((16.0 * t * a.sqrt()).ceil() as usize)
}

/// Mean of the phantom over the circle of radius `t` about `(x1, 0)`.
pub fn circle_mean(p: &Phantom, x1: f64, t: f64) -> f64 {
    if t == 0.0 {
        return p.eval(x1, 0.0);
    }
    let d = (x1 - p.center).abs();
    if t >= d + p.radius || t <= d - p.radius {
        return 0.0;
    }
    let n = circle_nodes(t, p.a);
    let dth = std::f64::consts::TAU / n as f64;
    let mut s = 0.0;
    for k in 0..n {
        let (sn, cs) = (k as f64 * dth).sin_cos();
        s += p.eval(x1 + t * cs, t * sn);
    }
    s / n as f64
}

pub fn spherical_means(p: &Phantom, x_axis: Axis, t_axis: Axis) -> Result<MeanData> {
    p.validate()?;
    let (xa, ta) = trace_axes(x_axis, t_axis)?;
    let rows: Vec<Vec<f64>> = (0..xa.count)
        .into_par_iter()
        .map(|i| {
            ta.coords()
                .map(|t| circle_mean(p, xa.coord(i), t))
                .collect()
        })
        .collect();
    let field = GridField::new(
        vec![xa, ta],
        vec![Parity::None, Parity::Even],
        rows.concat(),
    )?;
    Ok(MeanData(field))
}

/// `u = 2 t D[ int_0^t r (t^2 - r^2)^{-1/2} Mf dr ]`, evaluated as
/// `B + 2 tau dB/dtau` with `B` the angular Abel mean.
pub fn mean_to_trace(m: &MeanData, n: usize) -> Result<TraceData> {
    if n != 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let (xa, ta) = require_even_t(&m.0)?;
    m.0.ensure_finite()?;
    let st = TauStencil::new(&ta, 5.min(ta.count))?;
    let rows: Vec<Vec<f64>> =
        m.0.rows()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|row| -> Result<Vec<f64>> {
                let b = abel_mean(&EvenProfile::new(ta, row.to_vec())?)?;
                let db = st.apply(b.values());
                Ok(b.values()
                    .iter()
                    .zip(&db)
                    .enumerate()
                    .map(|(j, (bv, d))| {
                        let t = ta.coord(j);
                        bv + 2.0 * t * t * d
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
    let field = GridField::new(
        vec![xa, ta],
        vec![Parity::None, Parity::Even],
        rows.concat(),
    )?;
    TraceData::new(field, Route::Abel)
}

/// Support extent of a spatial field: `(min x', max x', max |x_n|)` over
/// nonzero samples, or `None` for the zero field.
fn support_extent(f: &GridField) -> Option<(f64, f64, f64)> {
    let (xa, na) = (f.axis(0), f.axis(1));
    let mut ext: Option<(f64, f64, f64)> = None;
    for i in 0..xa.count {
        for j in 0..na.count {
            if f.get(i, j) != 0.0 {
                let (x, s) = (xa.coord(i), na.coord(j).abs());
                ext = Some(match ext {
                    None => (x, x, s),
                    Some((lo, hi, m)) => (lo.min(x), hi.max(x), m.max(s)),
                });
            }
        }
    }
    ext
}

/// Smallest distance from the output segment to a periodic image of the
/// support, or infinity for the zero field.
pub fn image_clearance(f: &GridField, out_x: &Axis) -> Result<f64> {
    let (xa, na) = require_even_t(f)?;
    let lx = xa.count as f64 * xa.step;
    let ln = 2.0 * (na.count - 1) as f64 * na.step;
    Ok(match support_extent(f) {
        None => f64::INFINITY,
        Some((lo, hi, sn)) => {
            let right = lo + lx - out_x.last();
            let left = out_x.origin - (hi - lx);
            right.min(left).min(ln - sn)
        }
    })
}

/// Periodic box with grid `step` that keeps images of a support of radius
/// `radius` about `center` farther than `tmax` from the output segment,
/// enlarged by `margin`.
pub fn auto_box(
    center: f64,
    radius: f64,
    out_x: &Axis,
    tmax: f64,
    step: f64,
    margin: f64,
) -> Result<(Axis, Axis)> {
    let reach = (out_x.origin - center)
        .abs()
        .max((out_x.last() - center).abs());
    let h_min = ((tmax + radius + reach) / 2.0).max((tmax + radius) / 2.0);
    let half = (margin * h_min / step).ceil() as usize;
    let xa = Axis::new(
        AxisName::XPrime,
        center - half as f64 * step,
        step,
        2 * half,
    )?;
    let na = Axis::new(AxisName::Xn, 0.0, step, half + 1)?;
    Ok((xa, na))
}

/// Exact solution of the wave equation on the periodized box, restricted to
/// `x_n = 0`. The x_n axis of `f` is an even half axis.
pub fn wave_trace_spectral(f: &GridField, t_axis: Axis, out_x: Axis) -> Result<TraceData> {
    let (xa, na) = require_even_t(f)?;
    f.ensure_finite()?;
    let (ox, ta) = trace_axes(out_x, t_axis)?;
    let clearance = image_clearance(f, &ox)?;
    if clearance <= ta.last() {
        return Err(Error::BoxTooSmall(format!(
            "nearest periodic image is {clearance:.4} from the output segment, tmax is {}",
            ta.last()
        )));
    }
    let n1 = xa.count;
    let m = na.count;
    let n2 = 2 * (m - 1);
    let mut buf = vec![Complex64::new(0.0, 0.0); n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let k = if j < m { j } else { n2 - j };
            buf[i * n2 + j] = Complex64::new(f.get(i, k), 0.0);
        }
    }
    fft2(&mut buf, n1, n2, Direction::Forward);
    let xi1 = angular_frequencies(n1, xa.step);
    let xin = angular_frequencies(n2, na.step);
    let norm = 1.0 / (n1 * n2) as f64;
    let kk: Vec<f64> = (0..n1 * n2)
        .map(|q| {
            let (i, j) = (q / n2, q % n2);
            (xi1[i] * xi1[i] + xin[j] * xin[j]).sqrt()
        })
        .collect();
    let phases: Vec<Complex64> = (0..ox.count)
        .flat_map(|o| {
            let dx = ox.coord(o) - xa.origin;
            xi1.iter()
                .map(move |k| Complex64::from_polar(1.0, k * dx))
                .collect::<Vec<_>>()
        })
        .collect();
    let cols: Vec<Vec<f64>> = (0..ta.count)
        .into_par_iter()
        .map(|jt| {
            let t = ta.coord(jt);
            let col: Vec<Complex64> = (0..n1)
                .map(|i| {
                    let mut s = Complex64::new(0.0, 0.0);
                    for j in 0..n2 {
                        s += buf[i * n2 + j] * (kk[i * n2 + j] * t).cos();
                    }
                    s * norm
                })
                .collect();
            (0..ox.count)
                .map(|o| {
                    let ph = &phases[o * n1..(o + 1) * n1];
                    col.iter().zip(ph).map(|(c, e)| (c * e).re).sum()
                })
                .collect()
        })
        .collect();
    let field = GridField::from_fn_2d(ox, ta, [Parity::None, Parity::Even], |i, j| cols[j][i])?;
    TraceData::new(field, Route::Spectral)
}

/// Relative L2 difference `||a - b|| / ||b||` with weight `1/t`.
pub fn trace_difference(a: &TraceData, b: &TraceData) -> Result<f64> {
    let ta = *a.t_axis();
    crate::grid::weighted_rel_diff(&a.field, &b.field, |_, j| {
        if j == 0 {
            0.0
        } else {
            1.0 / ta.coord(j)
        }
    })
}

/// Per-time sup of the trace and its decay-compensated version.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayProfile {
    pub t: Vec<f64>,
    pub sup: Vec<f64>,
    pub compensated: Vec<f64>,
}

impl DecayProfile {
    /// Least-squares slope of `log compensated` against `log t` over
    /// `[t_lo, t_hi]`, ignoring zero entries.
    pub fn slope(&self, t_lo: f64, t_hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .t
            .iter()
            .zip(&self.compensated)
            .filter(|(t, c)| **t >= t_lo && **t <= t_hi && **c > 0.0)
            .map(|(t, c)| (t.ln(), c.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.t.len())
            .map(|j| vec![self.t[j], self.sup[j], self.compensated[j]])
            .collect()
    }
}

/// Decay table for a trace; `center` is the x' origin used for `|x|`.
pub fn decay_profile(tr: &TraceData, center: f64) -> DecayProfile {
    let (xa, ta) = (*tr.x_axis(), *tr.t_axis());
    let mut out = DecayProfile {
        t: Vec::with_capacity(ta.count),
        sup: Vec::with_capacity(ta.count),
        compensated: Vec::with_capacity(ta.count),
    };
    for j in 0..ta.count {
        let t = ta.coord(j);
        let mut sup: f64 = 0.0;
        let mut comp: f64 = 0.0;
        for i in 0..xa.count {
            let u = tr.field.get(i, j).abs();
            let r = (xa.coord(i) - center).abs();
            sup = sup.max(u);
            comp = comp.max(u * ((1.0 + t) * (1.0 + (t - r).abs())).sqrt());
        }
        out.t.push(t);
        out.sup.push(sup);
        out.compensated.push(comp);
    }
    out
}
