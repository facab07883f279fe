//! Uniform axes and sampled fields.
//!
//! Every field in the crate is a dense row-major array over a list of
//! uniform axes. An axis tagged [`Parity::Even`] starts at 0 and stores only
//! the non-negative half; the field is understood as its even extension.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisName {
    #[serde(rename = "x'")]
    XPrime,
    #[serde(rename = "xn")]
    Xn,
    #[serde(rename = "t")]
    T,
    #[serde(rename = "pn")]
    Pn,
    #[serde(rename = "freq")]
    Freq,
}

impl AxisName {
    pub fn label(self) -> &'static str {
        match self {
            AxisName::XPrime => "x'",
            AxisName::Xn => "xn",
            AxisName::T => "t",
            AxisName::Pn => "pn",
            AxisName::Freq => "freq",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    #[default]
    None,
}

/// A uniform sampling `origin + j * step`, `0 <= j < count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: AxisName,
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(name: AxisName, origin: f64, step: f64, count: usize) -> Result<Self> {
        let axis = Axis {
            name,
            origin,
            step,
            count,
        };
        axis.validate()?;
        Ok(axis)
    }

    /// Axis with `count` nodes spanning `[start, end]` inclusive.
    pub fn spanning(name: AxisName, start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidAxis {
                name: name.label().into(),
                reason: format!("count {count} < 2"),
            });
        }
        Axis::new(name, start, (end - start) / (count - 1) as f64, count)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidAxis {
            name: self.name.label().into(),
            reason,
        };
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(bad(format!("step {} must be positive", self.step)));
        }
        if self.count < 2 {
            return Err(bad(format!("count {} < 2", self.count)));
        }
        if !self.origin.is_finite() {
            return Err(bad("origin is not finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.coord(self.count - 1)
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |j| self.coord(j))
    }

    /// Fractional index of `x`.
    #[inline]
    pub fn position(&self, x: f64) -> f64 {
        (x - self.origin) / self.step
    }

    /// Index of the node equal to `x` within `tol` steps, if any.
    pub fn node_index(&self, x: f64, tol: f64) -> Option<usize> {
        let p = self.position(x);
        let r = p.round();
        if (p - r).abs() <= tol && r >= 0.0 && (r as usize) < self.count {
            Some(r as usize)
        } else {
            None
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let eps = 1e-9 * self.step;
        x >= self.origin - eps && x <= self.last() + eps
    }

    /// Composite trapezoid weights (step-scaled).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.step; self.count];
        w[0] *= 0.5;
        w[self.count - 1] *= 0.5;
        w
    }
}

/// Scalar types a field can hold.
pub trait Scalar: Copy + Send + Sync + PartialEq + std::fmt::Debug + 'static {
    const KIND: &'static str;
    const WIDTH: usize;
    fn zero() -> Self;
    fn is_finite_value(&self) -> bool;
    fn norm_sqr_value(&self) -> f64;
    fn write_le(&self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f64 {
    const KIND: &'static str = "real64";
    const WIDTH: usize = 8;
    fn zero() -> Self {
        0.0
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    fn norm_sqr_value(&self) -> f64 {
        self * self
    }
    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
    }
}

impl Scalar for Complex64 {
    const KIND: &'static str = "complex128";
    const WIDTH: usize = 16;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn norm_sqr_value(&self) -> f64 {
        self.norm_sqr()
    }
    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.re.to_le_bytes());
        out.extend_from_slice(&self.im.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        Complex64::new(f64::read_le(&bytes[..8]), f64::read_le(&bytes[8..16]))
    }
}

/// Dense samples over a list of axes, row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct GridField<T: Scalar = f64> {
    axes: Vec<Axis>,
    parity: Vec<Parity>,
    values: Vec<T>,
}

impl<T: Scalar> GridField<T> {
    pub fn new(axes: Vec<Axis>, parity: Vec<Parity>, values: Vec<T>) -> Result<Self> {
        for a in &axes {
            a.validate()?;
        }
        if parity.len() != axes.len() {
            return Err(Error::AxisMismatch(format!(
                "{} parity tags for {} axes",
                parity.len(),
                axes.len()
            )));
        }
        for (a, p) in axes.iter().zip(&parity) {
            if *p == Parity::Even && a.origin != 0.0 {
                return Err(Error::InvalidAxis {
                    name: a.name.label().into(),
                    reason: format!("even axis must start at 0, starts at {}", a.origin),
                });
            }
        }
        let expected: usize = axes.iter().map(|a| a.count).product();
        if values.len() != expected {
            return Err(Error::CountMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(GridField {
            axes,
            parity,
            values,
        })
    }

    pub fn zeros(axes: Vec<Axis>, parity: Vec<Parity>) -> Result<Self> {
        let n = axes.iter().map(|a| a.count).product();
        Self::new(axes, parity, vec![T::zero(); n])
    }

    /// Builds a 2D field by evaluating `f(i, j)` on every node.
    pub fn from_fn_2d(
        a0: Axis,
        a1: Axis,
        parity: [Parity; 2],
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(a0.count * a1.count);
        for i in 0..a0.count {
            for j in 0..a1.count {
                values.push(f(i, j));
            }
        }
        Self::new(vec![a0, a1], parity.to_vec(), values)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn parity(&self) -> &[Parity] {
        &self.parity
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn require_2d(&self) -> Result<(Axis, Axis)> {
        if self.axes.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: self.axes.len(),
            });
        }
        Ok((self.axes[0], self.axes[1]))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.axes[1].count + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let n = self.axes[1].count;
        self.values[i * n + j] = v;
    }

    /// Row `i` of a 2D field (all samples along the second axis).
    pub fn row(&self, i: usize) -> &[T] {
        let n = self.axes[1].count;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, T> {
        self.values.chunks(self.axes[1].count)
    }

    pub fn non_finite(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite_value())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.non_finite() {
            Err(Error::NonFinite)
        } else {
            Ok(())
        }
    }

    /// Plain sum of squared magnitudes (no cell volume).
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr_value()).sum()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> GridField<U> {
        GridField {
            axes: self.axes.clone(),
            parity: self.parity.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn with_axis_name(mut self, k: usize, name: AxisName) -> Self {
        self.axes[k].name = name;
        self
    }

    pub fn same_grid<U: Scalar>(&self, other: &GridField<U>) -> bool {
        self.axes == other.axes
    }
}

impl GridField<f64> {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `a * self + b * other` on identical grids.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::AxisMismatch("fields are on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(GridField {
            axes: self.axes.clone(),
            parity: self.parity.clone(),
            values,
        })
    }

    /// Materializes the even extension along axis 1 of a 2D field whose
    /// second axis is tagged even: samples at `-s_{m-1}, ..., s_{m-1}`.
    pub fn materialize_even(&self) -> Result<Self> {
        let (a0, a1) = self.require_2d()?;
        if self.parity[1] != Parity::Even {
            return Ok(self.clone());
        }
        let m = a1.count;
        let full = Axis::new(a1.name, -a1.last(), a1.step, 2 * m - 1)?;
        GridField::from_fn_2d(a0, full, [self.parity[0], Parity::None], |i, j| {
            let k = if j + 1 >= m { j + 1 - m } else { m - 1 - j };
            self.get(i, k)
        })
    }
}

/// Weighted relative L2 difference `||a - b|| / ||b||` over 2D fields on the
/// same grid, with per-node weight `w(i, j)`.
pub fn weighted_rel_diff(
    a: &GridField,
    b: &GridField,
    w: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::AxisMismatch("fields are on different grids".into()));
    }
    let (a0, a1) = a.require_2d()?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a0.count {
        for j in 0..a1.count {
            let wij = w(i, j);
            let d = a.get(i, j) - b.get(i, j);
            num += wij * d * d;
            den += wij * b.get(i, j) * b.get(i, j);
        }
    }
    Ok(if den > 0.0 {
        (num / den).sqrt()
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_rejects_bad_step_and_count() {
        assert!(Axis::new(AxisName::T, 0.0, 0.0, 10).is_err());
        assert!(Axis::new(AxisName::T, 0.0, -1.0, 10).is_err());
        assert!(Axis::new(AxisName::T, 0.0, 1.0, 1).is_err());
        let a = Axis::new(AxisName::T, 1.0, 0.5, 4).unwrap();
        assert_eq!(a.coord(3), 2.5);
        assert_eq!(a.node_index(2.0, 1e-9), Some(2));
        assert_eq!(a.node_index(2.2, 1e-9), None);
    }

    #[test]
    fn field_checks_count_and_even_origin() {
        let a = Axis::new(AxisName::XPrime, -1.0, 0.5, 5).unwrap();
        let t = Axis::new(AxisName::T, 0.0, 0.5, 3).unwrap();
        assert!(matches!(
            GridField::<f64>::new(vec![a, t], vec![Parity::None, Parity::Even], vec![0.0; 14]),
            Err(Error::CountMismatch {
                expected: 15,
                got: 14
            })
        ));
        assert!(GridField::<f64>::zeros(vec![t, a], vec![Parity::None, Parity::Even]).is_err());
    }

    #[test]
    fn materialize_even_mirrors() {
        let a = Axis::new(AxisName::XPrime, 0.0, 1.0, 2).unwrap();
        let t = Axis::new(AxisName::T, 0.0, 1.0, 3).unwrap();
        let f = GridField::from_fn_2d(a, t, [Parity::None, Parity::Even], |i, j| {
            (10 * i + j) as f64
        })
        .unwrap();
        let g = f.materialize_even().unwrap();
        assert_eq!(g.axis(1).origin, -2.0);
        assert_eq!(g.row(1), &[12.0, 11.0, 10.0, 11.0, 12.0]);
    }
}
