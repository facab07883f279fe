//! The operator D = (1/2t) d/dt and Abel-type quadratures.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Axis, AxisName, GridField, Parity};
use crate::interp::{Spline, StartCondition};

/// Samples of an even function of t on a half grid starting at t = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct EvenProfile {
    axis: Axis,
    values: Vec<f64>,
}

impl EvenProfile {
    pub fn new(axis: Axis, values: Vec<f64>) -> Result<Self> {
        axis.validate()?;
        if axis.origin != 0.0 {
            return Err(Error::InvalidAxis {
                name: axis.name.label().into(),
                reason: "even profile must start at 0".into(),
            });
        }
        if values.len() != axis.count {
            return Err(Error::CountMismatch {
                expected: axis.count,
                got: values.len(),
            });
        }
        Ok(EvenProfile { axis, values })
    }

    pub fn from_fn(axis: Axis, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = axis.coords().map(f).collect();
        Self::new(axis, values)
    }

    pub fn axis(&self) -> &Axis {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spline(&self) -> Result<Spline> {
        Spline::new(
            0.0,
            self.axis.step,
            &self.values,
            StartCondition::Slope(0.0),
        )
    }
}

/// Finite-difference weights for derivatives `0..=order` at `z` from nodes `x`.
pub fn fornberg(z: f64, x: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First-derivative stencils in tau = t^2 on the nodes of a t axis.
#[derive(Clone, Debug)]
pub struct TauStencil {
    width: usize,
    starts: Vec<usize>,
    weights: Vec<f64>,
}

impl TauStencil {
    /// Stencils of `width` consecutive nodes, centred where possible.
    pub fn new(axis: &Axis, width: usize) -> Result<Self> {
        let n = axis.count;
        if n < width || width < 3 {
            return Err(Error::TooFewSamples {
                needed: width.max(3),
                got: n,
            });
        }
        let tau: Vec<f64> = axis.coords().map(|t| t * t).collect();
        let mut starts = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n * width);
        for j in 0..n {
            let s = j.saturating_sub(width / 2).min(n - width);
            let c = fornberg(tau[j], &tau[s..s + width], 1);
            starts.push(s);
            weights.extend_from_slice(&c[1]);
        }
        Ok(TauStencil {
            width,
            starts,
            weights,
        })
    }

    pub fn apply_into(&self, h: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let s = self.starts[j];
            let w = &self.weights[j * self.width..(j + 1) * self.width];
            *o = w
                .iter()
                .zip(&h[s..s + self.width])
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; h.len()];
        self.apply_into(h, &mut out);
        out
    }
}

const D_WIDTH: usize = 5;

/// `Dh = (1/2t) h'(t)`, computed as d/dtau on the tau = t^2 nodes.
pub fn apply_d(h: &EvenProfile) -> Result<EvenProfile> {
    apply_d_powers(h, 1)
}

/// `D^m h` by m-fold differentiation on the tau nodes.
pub fn apply_d_powers(h: &EvenProfile, m: usize) -> Result<EvenProfile> {
    let n = h.axis.count;
    if n < 4 || n < 2 * m + 2 {
        return Err(Error::TooFewSamples {
            needed: (2 * m + 2).max(4),
            got: n,
        });
    }
    let width = D_WIDTH.max(m + 1).min(n);
    let st = TauStencil::new(&h.axis, width)?;
    let mut v = h.values.clone();
    for _ in 0..m {
        v = st.apply(&v);
    }
    EvenProfile::new(h.axis, v)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const GL_NODES: usize = 6;

fn gl6() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_NODES))
}

/// Gauss-Legendre sum of `f` over `[a, b]`.
#[inline]
pub fn gl_interval(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gl6();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for k in 0..GL_NODES {
        s += w[k] * f(mid + half * x[k]);
    }
    s * half
}

fn require_n2(n: usize) -> Result<()> {
    if n != 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    Ok(())
}

/// `B(t) = int_0^{pi/2} sin(psi) phi(t sin psi) dpsi`, so that the Abel
/// integral for n = 2 equals `t B(t)`.
pub fn abel_mean(phi: &EvenProfile) -> Result<EvenProfile> {
    let sp = phi.spline()?;
    let ax = phi.axis;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut out = Vec::with_capacity(ax.count);
    for i in 0..ax.count {
        let t = ax.coord(i);
        if i == 0 {
            out.push(phi.values[0]);
            continue;
        }
        let f = |psi: f64| psi.sin() * sp.eval(t * psi.sin());
        let mut lo = 0.0;
        let mut s = 0.0;
        for j in 1..i {
            let hi = (ax.coord(j) / t).asin();
            s += gl_interval(lo, hi, f);
            lo = hi;
        }
        s += gl_interval(lo, half_pi, f);
        out.push(s);
    }
    EvenProfile::new(ax, out)
}

/// `t -> int_0^t r^{n-1} (t^2 - r^2)^{-1/2} phi(r) dr` for n = 2.
pub fn abel_forward(phi: &EvenProfile, n: usize) -> Result<Vec<f64>> {
    require_n2(n)?;
    let b = abel_mean(phi)?;
    Ok(b.values
        .iter()
        .enumerate()
        .map(|(i, v)| phi.axis.coord(i) * v)
        .collect())
}

/// Per-column splines of W(y', t), ready for kernel integrals.
#[derive(Clone, Debug)]
pub struct KernelColumns {
    y_axis: Axis,
    t_axis: Axis,
    tmax: f64,
    columns: Vec<Spline>,
}

impl KernelColumns {
    pub fn new(w: &GridField, tmax: f64) -> Result<Self> {
        let (ya, ta) = w.require_2d()?;
        if ta.origin != 0.0 {
            return Err(Error::AxisMismatch("t axis must start at 0".into()));
        }
        w.ensure_finite()?;
        if !(tmax > 0.0) || tmax > ta.last() * (1.0 + 1e-12) {
            return Err(Error::config(
                "tmax",
                format!("{tmax} must lie in (0, {}]", ta.last()),
            ));
        }
        let columns = w
            .rows()
            .map(|row| Spline::new(0.0, ta.step, row, StartCondition::Slope(0.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelColumns {
            y_axis: ya,
            t_axis: ta,
            tmax: tmax.min(ta.last()),
            columns,
        })
    }

    pub fn y_axis(&self) -> &Axis {
        &self.y_axis
    }

    pub fn t_axis(&self) -> &Axis {
        &self.t_axis
    }

    pub fn tmax(&self) -> f64 {
        self.tmax
    }

    /// `int H(t^2 - c2) (t^2 - c2)^{-1/2} W(y_i, t) dt` over `0 <= t <= tmax`,
    /// with `t^2 = sigma^2 + c2`.
    pub fn inner(&self, i: usize, c2: f64) -> f64 {
        let t_max = self.tmax;
        if c2 >= t_max * t_max {
            return 0.0;
        }
        let c2 = c2.max(0.0);
        let sp = &self.columns[i];
        let ta = &self.t_axis;
        let f = |s: f64| {
            let t = (s * s + c2).sqrt();
            if t > 0.0 {
                sp.eval(t) / t
            } else {
                0.0
            }
        };
        let mut lo = 0.0;
        let mut sum = 0.0;
        let mut j = (c2.sqrt() / ta.step).floor() as usize + 1;
        while j < ta.count && ta.coord(j) < t_max {
            let tj = ta.coord(j);
            let hi = (tj * tj - c2).max(0.0).sqrt();
            sum += gl_interval(lo, hi, f);
            lo = hi;
            j += 1;
        }
        sum + gl_interval(lo, (t_max * t_max - c2).sqrt(), f)
    }

    /// Full double integral at `(x1, xn)` with trapezoid weights in y'.
    pub fn point(&self, x1: f64, xn: f64) -> f64 {
        let ya = &self.y_axis;
        let mut sum = 0.0;
        for i in 0..ya.count {
            let dy = ya.coord(i) - x1;
            let c2 = xn * xn + dy * dy;
            if c2 >= self.tmax * self.tmax {
                continue;
            }
            let wt = if i == 0 || i + 1 == ya.count {
                0.5
            } else {
                1.0
            };
            sum += wt * self.inner(i, c2);
        }
        sum * ya.step
    }
}

/// `int int H(t^2 - x_n^2 - |y'|^2) (t^2 - x_n^2 - |y'|^2)^{-1/2} W(x' + y', t) dt dy'`.
pub fn backproject_kernel_integral(w: &GridField, x: (f64, f64), tmax: f64) -> Result<f64> {
    if !(x.1 > 0.0) {
        return Err(Error::NonPositiveXn(x.1));
    }
    let cols = KernelColumns::new(w, tmax)?;
    Ok(cols.point(x.0, x.1))
}

/// Kernel integrals tabulated in the hyperbola parameter, for fast
/// evaluation at many points.
#[derive(Clone, Debug)]
pub struct Backprojector {
    y_axis: Axis,
    tmax: f64,
    c_axis: Axis,
    table: Vec<Spline>,
}

impl Backprojector {
    /// Tables of the inner integral on `c in [0, tmax]` per y' column.
    pub fn new(cols: &KernelColumns) -> Result<Self> {
        let dt = cols.t_axis.step;
        let tmax = cols.tmax;
        let nc = ((tmax / dt).round() as usize + 1).max(4);
        let c_axis = Axis::spanning(AxisName::T, 0.0, tmax, nc)?;
        let table = (0..cols.y_axis.count)
            .into_par_iter()
            .map(|i| {
                let v: Vec<f64> = c_axis.coords().map(|c| cols.inner(i, c * c)).collect();
                Spline::new(0.0, c_axis.step, &v, StartCondition::Slope(0.0))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Backprojector {
            y_axis: cols.y_axis,
            tmax,
            c_axis,
            table,
        })
    }

    pub fn tmax(&self) -> f64 {
        self.tmax
    }

    pub fn y_axis(&self) -> &Axis {
        &self.y_axis
    }

    /// Same value as [`KernelColumns::point`], from the tables.
    pub fn point(&self, x1: f64, xn: f64) -> f64 {
        let ya = &self.y_axis;
        let cmax = self.c_axis.last();
        let mut sum = 0.0;
        for i in 0..ya.count {
            let dy = ya.coord(i) - x1;
            let c = (xn * xn + dy * dy).sqrt();
            if c >= cmax {
                continue;
            }
            let wt = if i == 0 || i + 1 == ya.count {
                0.5
            } else {
                1.0
            };
            sum += wt * self.table[i].eval(c);
        }
        sum * ya.step
    }
}

/// The range functional
/// `int int H(t^2 + x_n^2 - |y'|^2) (t^2 + x_n^2 - |y'|^2)^{-1/2} W(x' + y', t) dy' dt`
/// evaluated per time node with `y' = rho sin(theta)`, `rho^2 = t^2 + x_n^2`.
#[derive(Clone, Debug)]
pub struct RangeKernel {
    y_axis: Axis,
    t_axis: Axis,
    last: usize,
    rows: Vec<Spline>,
}

impl RangeKernel {
    pub fn new(w: &GridField, tmax: f64) -> Result<Self> {
        let (ya, ta) = w.require_2d()?;
        if ta.origin != 0.0 {
            return Err(Error::AxisMismatch("t axis must start at 0".into()));
        }
        w.ensure_finite()?;
        let last = (ta.position(tmax).round().max(1.0) as usize).min(ta.count - 1);
        let rows = (0..=last)
            .map(|j| {
                let col: Vec<f64> = (0..ya.count).map(|i| w.get(i, j)).collect();
                Spline::new(ya.origin, ya.step, &col, StartCondition::Natural)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RangeKernel {
            y_axis: ya,
            t_axis: ta,
            last,
            rows,
        })
    }

    pub fn tmax(&self) -> f64 {
        self.t_axis.coord(self.last)
    }

    /// `int_{|y'| < rho} W(x' + y', t_j) (rho^2 - |y'|^2)^{-1/2} dy'`.
    fn angular(&self, j: usize, x1: f64, rho: f64) -> f64 {
        let ya = &self.y_axis;
        let lo = (x1 - rho).max(ya.origin);
        let hi = (x1 + rho).min(ya.last());
        if lo >= hi {
            return 0.0;
        }
        let sp = &self.rows[j];
        let f = |th: f64| sp.eval(x1 + rho * th.sin());
        let theta = |y: f64| ((y - x1) / rho).clamp(-1.0, 1.0).asin();
        let mut a = theta(lo);
        let mut s = 0.0;
        let mut k = (ya.position(lo).floor() + 1.0).max(0.0) as usize;
        while k < ya.count && ya.coord(k) < hi {
            let b = theta(ya.coord(k));
            s += gl_interval(a, b, f);
            a = b;
            k += 1;
        }
        s + gl_interval(a, theta(hi), f)
    }

    pub fn point(&self, x1: f64, xn: f64) -> f64 {
        let ta = &self.t_axis;
        let mut sum = 0.0;
        for j in 0..=self.last {
            let t = ta.coord(j);
            let wt = if j == 0 || j == self.last { 0.5 } else { 1.0 };
            sum += wt * self.angular(j, x1, (t * t + xn * xn).sqrt());
        }
        sum * ta.step
    }
}

/// Evenness tag check shared by the profile-based operators.
pub(crate) fn require_even_t(f: &GridField) -> Result<(Axis, Axis)> {
    let (a0, a1) = f.require_2d()?;
    if a1.origin != 0.0 || f.parity()[1] != Parity::Even {
        return Err(Error::AxisMismatch(
            "second axis must be an even half axis starting at 0".into(),
        ));
    }
    Ok((a0, a1))
}
