//! Zero conversion and the unimodular multiplier `exp(i |xi'|^2 / (4 xi_n))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::require_even_t;
use crate::error::{Error, Result};
use crate::fft::{angular_frequencies, fft2, Direction};
use crate::grid::{Axis, AxisName, GridField, Parity};
use crate::interp::{Spline, StartCondition};

/// Layout of the (p', p_n) box used by the spectral route.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZGridSpec {
    /// Step of the p_n axis.
    pub pn_step: f64,
    /// Half extent P of the p_n axis; `None` means `2 * tmax^2`.
    #[serde(default)]
    pub pn_extent: Option<f64>,
    /// Zero-padding factor along p'.
    pub pad: usize,
}

impl Default for ZGridSpec {
    fn default() -> Self {
        ZGridSpec {
            pn_step: 0.05,
            pn_extent: None,
            pad: 2,
        }
    }
}

/// A field over (p', p_n) with p_n in [-P, P), zero for p_n <= 0 when it
/// comes from [`zconvert`].
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpaceField(pub GridField);

impl HalfSpaceField {
    pub fn p_axis(&self) -> &Axis {
        self.0.axis(0)
    }

    pub fn pn_axis(&self) -> &Axis {
        self.0.axis(1)
    }

    /// Index of the node p_n = 0.
    pub fn zero_index(&self) -> usize {
        self.pn_axis().count / 2
    }
}

fn pn_axis(spec: &ZGridSpec, tmax: f64) -> Result<Axis> {
    let p = spec.pn_extent.unwrap_or(2.0 * tmax * tmax);
    if !(spec.pn_step > 0.0) || !(p > 0.0) {
        return Err(Error::config(
            "zgrid",
            "pn_step and pn_extent must be positive",
        ));
    }
    let half = (p / spec.pn_step).round() as usize;
    Axis::new(
        AxisName::Pn,
        -(half as f64) * spec.pn_step,
        spec.pn_step,
        2 * half,
    )
}

/// Raises `VanishingOrderTooLow` when `F(., 0)` is not negligible.
pub fn check_vanishing(f: &GridField) -> Result<()> {
    let peak = f.max_abs();
    let edge = f.rows().fold(0.0f64, |m, r| m.max(r[0].abs()));
    if edge > 1e-6 * peak {
        return Err(Error::VanishingOrderTooLow { value: edge, peak });
    }
    Ok(())
}

/// `(Z F)(p', p_n) = F(p', sqrt(p_n)) / sqrt(p_n)` for `p_n > 0`, else 0.
///
/// The second axis of `f` (t or x_n) must be an even half axis. Values
/// beyond its last node are 0.
pub fn zconvert(f: &GridField, spec: &ZGridSpec) -> Result<HalfSpaceField> {
    let (xa, ta) = require_even_t(f)?;
    f.ensure_finite()?;
    check_vanishing(f)?;
    if spec.pad == 0 {
        return Err(Error::config("zgrid.pad", "must be at least 1"));
    }
    let tmax = ta.last();
    let pna = pn_axis(spec, tmax)?;
    let np = xa.count * spec.pad;
    let off = (np - xa.count) / 2;
    let pa = Axis::new(
        AxisName::XPrime,
        xa.origin - off as f64 * xa.step,
        xa.step,
        np,
    )?;
    let mut out = GridField::zeros(vec![pa, pna], vec![Parity::None, Parity::None])?;
    let mut q = vec![0.0; ta.count];
    let cols: Vec<(usize, f64)> = (0..pna.count)
        .filter_map(|k| {
            let p = pna.coord(k);
            (p > 0.0 && p <= tmax * tmax * (1.0 + 1e-12)).then(|| (k, p.sqrt().min(tmax)))
        })
        .collect();
    for (i, row) in f.rows().enumerate() {
        for j in 1..ta.count {
            q[j] = row[j] / ta.coord(j);
        }
        q[0] = 0.0;
        let sp = Spline::new(0.0, ta.step, &q, StartCondition::Natural)?;
        for &(k, s) in &cols {
            out.set(off + i, k, sp.eval(s));
        }
    }
    Ok(HalfSpaceField(out))
}

/// `f(x', x_n) = x_n g(x', x_n^2)` on the requested nodes, using only the
/// samples with `p_n >= 0`.
pub fn zinvert(g: &HalfSpaceField, out_x: Axis, out_xn: Axis) -> Result<GridField> {
    let (pa, pna) = g.0.require_2d()?;
    let k0 = pna
        .node_index(0.0, 1e-9)
        .ok_or_else(|| Error::AxisMismatch("p_n axis has no node at 0".into()))?;
    if out_x.origin < pa.origin - 1e-9 || out_x.last() > pa.last() + 1e-9 {
        return Err(Error::AxisMismatch(
            "output x' range exceeds the p' axis".into(),
        ));
    }
    if out_xn.origin < 0.0 || out_xn.last().powi(2) > pna.last() {
        return Err(Error::AxisMismatch(
            "output x_n range exceeds the p_n axis".into(),
        ));
    }
    let rows: Vec<Spline> =
        g.0.rows()
            .map(|r| Spline::new(0.0, pna.step, &r[k0..], StartCondition::Natural))
            .collect::<Result<_>>()?;
    let mut out = GridField::zeros(
        vec![
            Axis {
                name: AxisName::XPrime,
                ..out_x
            },
            Axis {
                name: AxisName::Xn,
                ..out_xn
            },
        ],
        vec![
            Parity::None,
            if out_xn.origin == 0.0 {
                Parity::Even
            } else {
                Parity::None
            },
        ],
    )?;
    for j in 0..out_xn.count {
        let xn = out_xn.coord(j);
        let col: Vec<f64> = rows.iter().map(|s| s.eval(xn * xn)).collect();
        let along = Spline::new(pa.origin, pa.step, &col, StartCondition::Natural)?;
        for i in 0..out_x.count {
            let x = out_x.coord(i);
            let v = match pa.node_index(x, 1e-9) {
                Some(ip) => col[ip],
                None => along.eval(x),
            };
            out.set(i, j, xn * v);
        }
    }
    Ok(out)
}

/// `exp(sign * i |xi'|^2 / (4 xi_n))`, and 1 on the plane `xi_n = 0`.
pub fn multiplier(xi1: f64, xin: f64, sign: i8) -> Complex64 {
    if xin == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let phase = f64::from(sign.signum()) * xi1 * xi1 / (4.0 * xin);
    Complex64::from_polar(1.0, phase)
}

/// Sign of the multiplier phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// Output of [`apply_n`].
#[derive(Clone, Debug)]
pub struct MultiplierOutput {
    pub field: GridField,
    /// `max |Im| / max |Re|` before the imaginary part was dropped.
    pub imag_residue: f64,
}

fn boundary_fraction(g: &GridField, cells: usize) -> f64 {
    let (a0, a1) = (g.axis(0).count, g.axis(1).count);
    let mut edge = 0.0;
    let mut total = 0.0;
    for i in 0..a0 {
        for j in 0..a1 {
            let v = g.get(i, j) * g.get(i, j);
            total += v;
            if i < cells || i + cells >= a0 || j < cells || j + cells >= a1 {
                edge += v;
            }
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

/// Smooth ramp from 0 to 1 on [0, 1].
fn ramp(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// DFT, multiply by `multiplier(., sign)`, inverse DFT.
///
/// `crossfade` (in frequency cells) scales the phase down smoothly near
/// `xi_n = 0`; 0 keeps the hard convention. The multiplier is also set to 1
/// on the xi_n Nyquist plane, whose DFT mirror is itself.
pub fn apply_n(g: &GridField, sign: Sign, crossfade: f64) -> Result<MultiplierOutput> {
    g.require_2d()?;
    g.ensure_finite()?;
    let leak = boundary_fraction(g, 3);
    if leak > 1e-8 {
        return Err(Error::SupportLeak { fraction: leak });
    }
    apply_n_periodic(g, sign, crossfade)
}

/// [`apply_n`] on the box as a torus, without the wraparound check. The
/// output of `apply_n` generally reaches the boundary, so composing the two
/// signs needs this form for the second step.
pub fn apply_n_periodic(g: &GridField, sign: Sign, crossfade: f64) -> Result<MultiplierOutput> {
    let (a0, a1) = g.require_2d()?;
    g.ensure_finite()?;
    let (n0, n1) = (a0.count, a1.count);
    let mut buf: Vec<Complex64> = g.values().iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft2(&mut buf, n0, n1, Direction::Forward);
    let xi1 = angular_frequencies(n0, a0.step);
    let xin = angular_frequencies(n1, a1.step);
    let dxn = 2.0 * std::f64::consts::PI / (n1 as f64 * a1.step);
    let s = f64::from(sign.as_i8());
    for i in 0..n0 {
        for j in 0..n1 {
            if n1 % 2 == 0 && j == n1 / 2 {
                continue;
            }
            let xn = xin[j];
            if xn == 0.0 {
                continue;
            }
            let mut phase = s * xi1[i] * xi1[i] / (4.0 * xn);
            if crossfade > 0.0 {
                phase *= ramp(xn.abs() / (crossfade * dxn));
            }
            buf[i * n1 + j] *= Complex64::from_polar(1.0, phase);
        }
    }
    fft2(&mut buf, n0, n1, Direction::Inverse);
    let re_max = buf.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
    let im_max = buf.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    let field = GridField::new(
        vec![a0, a1],
        g.parity().to_vec(),
        buf.iter().map(|v| v.re).collect(),
    )?;
    Ok(MultiplierOutput {
        field,
        imag_residue: if re_max > 0.0 { im_max / re_max } else { 0.0 },
    })
}

/// Centred DFT approximating the continuous transform (scaled by the cell
/// area), on frequency axes.
pub fn spectrum(g: &GridField) -> Result<GridField<Complex64>> {
    let (a0, a1) = g.require_2d()?;
    let (n0, n1) = (a0.count, a1.count);
    let mut buf: Vec<Complex64> = g.values().iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft2(&mut buf, n0, n1, Direction::Forward);
    let cell = a0.step * a1.step;
    let d0 = 2.0 * std::f64::consts::PI / (n0 as f64 * a0.step);
    let d1 = 2.0 * std::f64::consts::PI / (n1 as f64 * a1.step);
    let f0 = Axis::new(AxisName::Freq, -((n0 / 2) as f64) * d0, d0, n0)?;
    let f1 = Axis::new(AxisName::Freq, -((n1 / 2) as f64) * d1, d1, n1)?;
    GridField::from_fn_2d(f0, f1, [Parity::None, Parity::None], |i, j| {
        let si = (i + n0 - n0 / 2) % n0;
        let sj = (j + n1 - n1 / 2) % n1;
        buf[si * n1 + sj] * cell
    })
}

/// `pi^{-1} (i xi_n) F_eps(xi)` for n = 2, principal square roots.
pub fn regularized_symbol(xi1: f64, xin: f64, eps: f64) -> Complex64 {
    let pi = std::f64::consts::PI;
    let i_xn = Complex64::new(0.0, xin);
    let w1 = Complex64::new(eps * eps + eps, xin);
    let w2 = Complex64::new(eps, xin);
    let f_eps = pi.sqrt() / w1.sqrt() * (-(xi1 * xi1) / (4.0 * w1)).exp() * pi.sqrt() / w2.sqrt();
    f_eps * i_xn / pi
}

/// One row of the multiplier-limit table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MultiplierRow {
    pub eps: f64,
    pub max_abs_deviation: f64,
}

/// Max deviation of the regularized symbol from the multiplier over all
/// grid points with `xi_n != 0`, for each `eps`.
pub fn verify_multiplier(xi1: &[f64], xin: &[f64], eps_list: &[f64]) -> Vec<MultiplierRow> {
    eps_list
        .iter()
        .map(|&eps| {
            let mut dev: f64 = 0.0;
            for &a in xi1 {
                for &b in xin.iter().filter(|b| **b != 0.0) {
                    dev = dev.max((regularized_symbol(a, b, eps) - multiplier(a, b, 1)).norm());
                }
            }
            MultiplierRow {
                eps,
                max_abs_deviation: dev,
            }
        })
        .collect()
}

/// DFT frequencies `2 pi k / (n h)` in DFT order.
pub fn frequency_grid(n: usize, h: f64) -> Vec<f64> {
    angular_frequencies(n, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplier_values() {
        assert_eq!(multiplier(0.0, 3.0, 1), Complex64::new(1.0, 0.0));
        assert_eq!(multiplier(5.0, 0.0, -1), Complex64::new(1.0, 0.0));
        let m = multiplier(2.0, 1.0, 1);
        assert!((m - Complex64::new(1f64.cos(), 1f64.sin())).norm() < 1e-15);
        let p = multiplier(1.3, -0.7, 1) * multiplier(1.3, -0.7, -1);
        assert!((p - 1.0).norm() < 1e-15);
    }

    #[test]
    fn regularized_symbol_at_zero_xi_prime() {
        for xn in [-3.0, -0.5, 0.25, 2.0] {
            let v = regularized_symbol(0.0, xn, 1e-12);
            assert!((v - 1.0).norm() < 1e-10, "{v}");
        }
    }

    #[test]
    fn zconvert_of_t_squared_profile() {
        let xa = Axis::spanning(AxisName::XPrime, -1.0, 1.0, 9).unwrap();
        let ta = Axis::spanning(AxisName::T, 0.0, 2.0, 41).unwrap();
        let f = GridField::from_fn_2d(xa, ta, [Parity::None, Parity::Even], |i, j| {
            ta.coord(j).powi(2) * (1.0 + xa.coord(i))
        })
        .unwrap();
        let spec = ZGridSpec {
            pn_step: 0.01,
            pn_extent: Some(8.0),
            pad: 2,
        };
        let g = zconvert(&f, &spec).unwrap();
        let (pa, pna) = (*g.p_axis(), *g.pn_axis());
        for i in 0..pa.count {
            for k in 0..pna.count {
                let (p, pn) = (pa.coord(i), pna.coord(k));
                let expect = if pn > 0.0 && pn <= 4.0 + 1e-9 && p.abs() <= 1.0 + 1e-9 {
                    pn.sqrt() * (1.0 + p)
                } else {
                    0.0
                };
                assert!((g.0.get(i, k) - expect).abs() < 1e-12, "{p} {pn}");
            }
        }
    }

    #[test]
    fn rejects_nonvanishing_data() {
        let xa = Axis::spanning(AxisName::XPrime, -1.0, 1.0, 5).unwrap();
        let ta = Axis::spanning(AxisName::T, 0.0, 1.0, 9).unwrap();
        let f = GridField::from_fn_2d(xa, ta, [Parity::None, Parity::Even], |_, _| 1.0).unwrap();
        assert!(matches!(
            zconvert(&f, &ZGridSpec::default()),
            Err(Error::VanishingOrderTooLow { .. })
        ));
    }
}
