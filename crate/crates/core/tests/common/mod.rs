#![allow(dead_code)]

use sphmean::forward::{mean_to_trace, spherical_means, wave_trace_spectral, TraceData};
use sphmean::inversion::OutputGrid;
use sphmean::{Axis, AxisName, GridField, Parity, Phantom};

pub fn reference_phantom() -> Phantom {
    Phantom::gauss_poly(2, 4.0, 1.0)
}

pub fn trace_axes() -> (Axis, Axis) {
    (
        Axis::new(AxisName::XPrime, -9.6, 0.075, 256).unwrap(),
        Axis::spanning(AxisName::T, 0.0, 8.0, 512).unwrap(),
    )
}

pub fn box_axes() -> (Axis, Axis) {
    (
        Axis::new(AxisName::XPrime, -11.25, 0.075, 300).unwrap(),
        Axis::new(AxisName::Xn, 0.0, 0.075, 151).unwrap(),
    )
}

pub fn output_grid() -> OutputGrid {
    OutputGrid::new(
        Axis::spanning(AxisName::XPrime, -1.5, 1.5, 41).unwrap(),
        Axis::spanning(AxisName::Xn, 0.1, 1.5, 57).unwrap(),
    )
    .unwrap()
}

pub fn sampled_box(p: &Phantom) -> GridField {
    let (bx, bn) = box_axes();
    p.sample(bx, bn).unwrap()
}

pub fn sampled_output(p: &Phantom) -> GridField {
    let og = output_grid();
    GridField::from_fn_2d(og.x, og.xn, [Parity::None, Parity::None], |i, j| {
        p.eval(og.x.coord(i), og.xn.coord(j))
    })
    .unwrap()
}

pub fn abel_trace(p: &Phantom) -> TraceData {
    let (xa, ta) = trace_axes();
    mean_to_trace(&spherical_means(p, xa, ta).unwrap(), 2).unwrap()
}

pub fn spectral_trace(p: &Phantom) -> TraceData {
    let (xa, ta) = trace_axes();
    wave_trace_spectral(&sampled_box(p), ta, xa).unwrap()
}

/// First `n` time nodes of a trace, same step.
pub fn leading_nodes(tr: &TraceData, n: usize) -> TraceData {
    let (xa, ta) = (*tr.x_axis(), *tr.t_axis());
    let sub = Axis::new(ta.name, 0.0, ta.step, n).unwrap();
    let f = GridField::from_fn_2d(xa, sub, [Parity::None, Parity::Even], |i, j| {
        tr.field.get(i, j)
    })
    .unwrap();
    TraceData::new(f, tr.route).unwrap()
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}
