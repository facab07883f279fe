//! Reconstruction from wave traces: direct back-projection and the
//! zero-conversion/multiplier route.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{Backprojector, KernelColumns, RangeKernel, TauStencil};
use crate::error::{Error, Result};
use crate::forward::TraceData;
use crate::grid::{Axis, AxisName, GridField, Parity};
use crate::spectral::{
    apply_n, check_vanishing, zconvert, zinvert, HalfSpaceField, Sign, ZGridSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InversionRoute {
    Direct,
    Spectral,
}

/// Correction for the finite time window.
///
/// `RangeReflection` subtracts the mirror image in p_n of the recovered
/// half-space function (spectral route), or equivalently the range
/// functional at the same point (direct route). Both vanish for exact,
/// untruncated data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compensation {
    #[default]
    RangeReflection,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionMeta {
    pub route: InversionRoute,
    pub compensation: Compensation,
    pub tmax: f64,
    pub aperture: f64,
    pub x_step: f64,
    pub xn_step: f64,
    pub t_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_leak: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imag_residue: Option<f64>,
    pub aperture_warning: bool,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub field: GridField,
    pub meta: ReconstructionMeta,
}

/// Output grid of a reconstruction; x_n values must be positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutputGrid {
    pub x: Axis,
    pub xn: Axis,
}

impl OutputGrid {
    pub fn new(x: Axis, xn: Axis) -> Result<Self> {
        if !(xn.origin > 0.0) {
            return Err(Error::NonPositiveXn(xn.origin));
        }
        Ok(OutputGrid {
            x: Axis {
                name: AxisName::XPrime,
                ..x
            },
            xn: Axis {
                name: AxisName::Xn,
                ..xn
            },
        })
    }
}

/// `W(y', t) = t D(F/t)(t)` per column.
pub fn precompute_w(tr: &TraceData, n: usize) -> Result<GridField> {
    if n != 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let f = &tr.field;
    f.ensure_finite()?;
    check_vanishing(f)?;
    let (xa, ta) = (*tr.x_axis(), *tr.t_axis());
    let st = TauStencil::new(&ta, 5.min(ta.count))?;
    let mut values = Vec::with_capacity(f.values().len());
    let mut q = vec![0.0; ta.count];
    for row in f.rows() {
        for j in 1..ta.count {
            q[j] = row[j] / ta.coord(j);
        }
        q[0] = 0.0;
        let v = st.apply(&q);
        values.extend(v.iter().enumerate().map(|(j, d)| ta.coord(j) * d));
    }
    GridField::new(vec![xa, ta], vec![Parity::None, Parity::Even], values)
}

/// Rows of the trace with `|x' - center| <= aperture`.
pub fn restrict_aperture(tr: &TraceData, center: f64, aperture: f64) -> Result<TraceData> {
    let xa = *tr.x_axis();
    let keep: Vec<usize> = (0..xa.count)
        .filter(|&i| (xa.coord(i) - center).abs() <= aperture * (1.0 + 1e-12))
        .collect();
    if keep.len() == xa.count {
        return Ok(tr.clone());
    }
    if keep.len() < 2 {
        return Err(Error::config("aperture", "keeps fewer than two x' nodes"));
    }
    let sub = Axis::new(AxisName::XPrime, xa.coord(keep[0]), xa.step, keep.len())?;
    let ta = *tr.t_axis();
    let field = GridField::from_fn_2d(sub, ta, [Parity::None, Parity::Even], |i, j| {
        tr.field.get(keep[i], j)
    })?;
    TraceData::new(field, tr.route)
}

fn aperture_of(xa: &Axis) -> f64 {
    0.5 * (xa.last() - xa.origin)
}

fn meta(
    route: InversionRoute,
    compensation: Compensation,
    tr: &TraceData,
    out: &OutputGrid,
    tmax: f64,
) -> ReconstructionMeta {
    let ya = tr.x_axis();
    let warn = (0..out.x.count).any(|i| {
        let reach = (tmax * tmax - out.xn.origin * out.xn.origin)
            .max(0.0)
            .sqrt();
        let x = out.x.coord(i);
        x - reach < ya.origin - 1e-9 || x + reach > ya.last() + 1e-9
    });
    ReconstructionMeta {
        route,
        compensation,
        tmax,
        aperture: aperture_of(ya),
        x_step: out.x.step,
        xn_step: out.xn.step,
        t_step: tr.t_axis().step,
        range_leak: None,
        imag_residue: None,
        aperture_warning: warn,
    }
}

/// `f(x) = -(2 x_n / pi) int int H(...)(...)^{-1/2} W(x' + y', t) dt dy'`.
pub fn invert_direct(
    tr: &TraceData,
    out: &OutputGrid,
    tmax: f64,
    compensation: Compensation,
) -> Result<Reconstruction> {
    let w = precompute_w(tr, 2)?;
    let cols = KernelColumns::new(&w, tmax)?;
    let bp = Backprojector::new(&cols)?;
    let range = match compensation {
        Compensation::RangeReflection => Some(RangeKernel::new(&w, tmax)?),
        Compensation::None => None,
    };
    let (xa, na) = (out.x, out.xn);
    let rows: Vec<Vec<f64>> = (0..xa.count)
        .into_par_iter()
        .map(|i| {
            let x1 = xa.coord(i);
            na.coords()
                .map(|xn| {
                    let mut b = bp.point(x1, xn);
                    if let Some(r) = &range {
                        b -= r.point(x1, xn);
                    }
                    -2.0 * xn / std::f64::consts::PI * b
                })
                .collect()
        })
        .collect();
    let field = GridField::new(
        vec![xa, na],
        vec![Parity::None, Parity::None],
        rows.concat(),
    )?;
    Ok(Reconstruction {
        field,
        meta: meta(InversionRoute::Direct, compensation, tr, out, bp.tmax()),
    })
}

/// Result of applying the inverse multiplier to converted data.
#[derive(Clone, Debug)]
pub struct InverseSpectrum {
    pub field: HalfSpaceField,
    pub imag_residue: f64,
}

impl InverseSpectrum {
    /// Fraction of the energy on `p_n < 0`.
    pub fn leak(&self) -> f64 {
        let g = &self.field.0;
        let pna = g.axis(1);
        let mut neg = 0.0;
        let mut tot = 0.0;
        for row in g.rows() {
            for (k, v) in row.iter().enumerate() {
                tot += v * v;
                if pna.coord(k) < 0.0 {
                    neg += v * v;
                }
            }
        }
        if tot > 0.0 {
            neg / tot
        } else {
            0.0
        }
    }

    /// Restriction to `p_n > 0`, with the reflected part subtracted when
    /// compensating.
    pub fn restrict(&self, compensation: Compensation) -> Result<HalfSpaceField> {
        let g = &self.field.0;
        let (pa, pna) = g.require_2d()?;
        let k0 = self.field.zero_index();
        let n = pna.count;
        let out = GridField::from_fn_2d(pa, pna, [Parity::None, Parity::None], |i, k| {
            if k <= k0 {
                return 0.0;
            }
            let v = g.get(i, k);
            match compensation {
                Compensation::None => v,
                Compensation::RangeReflection => {
                    let m = 2 * k0 - k;
                    if m < n {
                        v - g.get(i, m)
                    } else {
                        v
                    }
                }
            }
        })?;
        Ok(HalfSpaceField(out))
    }
}

/// `N^{-1} Z F` on the spectral box.
pub fn inverse_spectrum(
    tr: &TraceData,
    spec: &ZGridSpec,
    crossfade: f64,
) -> Result<InverseSpectrum> {
    let g = zconvert(&tr.field, spec)?;
    let out = apply_n(&g.0, Sign::Minus, crossfade)?;
    Ok(InverseSpectrum {
        field: HalfSpaceField(out.field),
        imag_residue: out.imag_residue,
    })
}

/// `f = Z^{-1} restrict_{p_n > 0} N^{-1} Z F`.
pub fn invert_spectral(
    tr: &TraceData,
    out: &OutputGrid,
    spec: &ZGridSpec,
    compensation: Compensation,
    crossfade: f64,
) -> Result<Reconstruction> {
    let inv = inverse_spectrum(tr, spec, crossfade)?;
    let g = inv.restrict(compensation)?;
    let field = zinvert(&g, out.x, out.xn)?;
    let mut m = meta(
        InversionRoute::Spectral,
        compensation,
        tr,
        out,
        tr.t_axis().last(),
    );
    m.range_leak = Some(inv.leak());
    m.imag_residue = Some(inv.imag_residue);
    Ok(Reconstruction { field, meta: m })
}

/// Relative L2 error of a reconstruction against reference samples.
pub fn relative_error(rec: &GridField, reference: &GridField) -> Result<f64> {
    crate::grid::weighted_rel_diff(rec, reference, |_, _| 1.0)
}

/// `||a - b|| / ||reference||` over the common grid.
pub fn route_difference(a: &GridField, b: &GridField, reference: &GridField) -> Result<f64> {
    let d = a.lin_comb(1.0, b, -1.0)?;
    let num = d.norm_sqr().sqrt();
    let den = reference.norm_sqr().sqrt();
    Ok(if den > 0.0 { num / den } else { num })
}
