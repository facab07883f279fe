//! Pipeline stages driven by a JSON run configuration. Stages exchange data
//! only through files in the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{
    decay_check, gaussian_integral_oracle, isometry_check, oracle_grid, perturbation_sweep,
    probe_lattice, range_floor, range_leak, range_residual, SweepReport,
};
use crate::error::{Error, Result};
use crate::forward::{
    mean_to_trace, spherical_means, trace_difference, wave_trace_spectral, Route, TraceData,
};
use crate::grid::{Axis, AxisName, GridField, Parity};
use crate::inversion::{
    invert_direct, invert_spectral, relative_error, restrict_aperture, route_difference,
    Compensation, OutputGrid, Reconstruction,
};
use crate::io::{
    bin_path, json_path, read_field, sha256_file, sha256_hex, write_csv, write_field, write_table,
};
use crate::phantom::Phantom;
use crate::spectral::{frequency_grid, verify_multiplier, ZGridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardChoice {
    Abel,
    Spectral,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InversionChoice {
    Direct,
    Spectral,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceGrid {
    pub x_origin: f64,
    pub x_step: f64,
    pub x_count: usize,
    pub t_extent: f64,
    pub t_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxGrid {
    pub x_origin: f64,
    pub step: f64,
    pub x_count: usize,
    pub xn_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub x_count: usize,
    pub xn_min: f64,
    pub xn_max: f64,
    pub xn_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub trace: TraceGrid,
    #[serde(rename = "box")]
    pub sample_box: BoxGrid,
    pub output: OutputSpec,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            trace: TraceGrid {
                x_origin: -9.6,
                x_step: 0.075,
                x_count: 256,
                t_extent: 8.0,
                t_count: 512,
            },
            sample_box: BoxGrid {
                x_origin: -11.25,
                step: 0.075,
                x_count: 300,
                xn_count: 151,
            },
            output: OutputSpec {
                x_min: -1.5,
                x_max: 1.5,
                x_count: 41,
                xn_min: 0.1,
                xn_max: 1.5,
                xn_count: 57,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub forward_agreement: f64,
    pub reconstruction: f64,
    pub route_agreement: f64,
    pub isometry_gap: f64,
    pub range_floor_factor: f64,
    pub range_leak: f64,
    pub sweep_r_squared: f64,
    pub leak_ratio: f64,
    pub decay_slope: f64,
    pub oracle: f64,
    pub multiplier: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            forward_agreement: 0.01,
            reconstruction: 0.05,
            route_agreement: 0.03,
            isometry_gap: 0.02,
            range_floor_factor: 10.0,
            range_leak: 1e-3,
            sweep_r_squared: 0.99,
            leak_ratio: 10.0,
            decay_slope: 0.05,
            oracle: 1e-10,
            multiplier: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub phantom: Phantom,
    pub grid: GridConfig,
    pub forward_route: ForwardChoice,
    pub inversion_route: InversionChoice,
    /// Trace consumed by `invert` and `verify`.
    pub trace_source: Route,
    pub tmax: f64,
    pub aperture: Option<f64>,
    pub compensation: Compensation,
    pub zgrid: ZGridSpec,
    pub crossfade: f64,
    pub seed: u64,
    pub perturbation_eps: Vec<f64>,
    pub thresholds: Thresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            phantom: Phantom::gauss_poly(2, 4.0, 1.0),
            grid: GridConfig::default(),
            forward_route: ForwardChoice::Both,
            inversion_route: InversionChoice::Both,
            trace_source: Route::Abel,
            tmax: 8.0,
            aperture: None,
            compensation: Compensation::RangeReflection,
            zgrid: ZGridSpec::default(),
            crossfade: 0.0,
            seed: 7,
            perturbation_eps: vec![0.01, 0.03, 0.1, 0.3, 1.0],
            thresholds: Thresholds::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be at least {min}, got {v}"),
        ))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        let g = &self.grid;
        positive("grid.trace.x_step", g.trace.x_step)?;
        at_least("grid.trace.x_count", g.trace.x_count, 2)?;
        positive("grid.trace.t_extent", g.trace.t_extent)?;
        at_least("grid.trace.t_count", g.trace.t_count, 5)?;
        positive("grid.box.step", g.sample_box.step)?;
        at_least("grid.box.x_count", g.sample_box.x_count, 4)?;
        at_least("grid.box.xn_count", g.sample_box.xn_count, 4)?;
        positive("grid.output.xn_min", g.output.xn_min)?;
        at_least("grid.output.x_count", g.output.x_count, 2)?;
        at_least("grid.output.xn_count", g.output.xn_count, 2)?;
        if !(g.output.x_max > g.output.x_min) {
            return Err(Error::config("grid.output.x_max", "must exceed x_min"));
        }
        if !(g.output.xn_max > g.output.xn_min) {
            return Err(Error::config("grid.output.xn_max", "must exceed xn_min"));
        }
        positive("tmax", self.tmax)?;
        if self.tmax > g.trace.t_extent * (1.0 + 1e-12) {
            return Err(Error::config("tmax", "must not exceed grid.trace.t_extent"));
        }
        if let Some(l) = self.aperture {
            positive("aperture", l)?;
        }
        positive("zgrid.pn_step", self.zgrid.pn_step)?;
        if let Some(p) = self.zgrid.pn_extent {
            positive("zgrid.pn_extent", p)?;
        }
        at_least("zgrid.pad", self.zgrid.pad, 1)?;
        if !(0.0..=1.0).contains(&self.crossfade) {
            return Err(Error::config("crossfade", "must lie in [0, 1]"));
        }
        if self
            .perturbation_eps
            .iter()
            .any(|e| !(*e >= 0.0 && e.is_finite()))
        {
            return Err(Error::config(
                "perturbation_eps",
                "entries must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn trace_axes(&self) -> Result<(Axis, Axis)> {
        let t = &self.grid.trace;
        Ok((
            Axis::new(AxisName::XPrime, t.x_origin, t.x_step, t.x_count)?,
            Axis::spanning(AxisName::T, 0.0, t.t_extent, t.t_count)?,
        ))
    }

    pub fn box_axes(&self) -> Result<(Axis, Axis)> {
        let b = &self.grid.sample_box;
        Ok((
            Axis::new(AxisName::XPrime, b.x_origin, b.step, b.x_count)?,
            Axis::new(AxisName::Xn, 0.0, b.step, b.xn_count)?,
        ))
    }

    pub fn output_grid(&self) -> Result<OutputGrid> {
        let o = &self.grid.output;
        OutputGrid::new(
            Axis::spanning(AxisName::XPrime, o.x_min, o.x_max, o.x_count)?,
            Axis::spanning(AxisName::Xn, o.xn_min, o.xn_max, o.xn_count)?,
        )
    }
}

/// Applies `a.b.c=value` overrides to a JSON document. Values parse as JSON
/// when possible and as plain strings otherwise.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| {
            Error::config(item.as_str(), "override must look like key.path=value")
        })?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut *doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (k, part) in parts.iter().enumerate() {
            if !node.is_object() {
                *node = Value::Object(Default::default());
            }
            let map = node.as_object_mut().expect("object");
            if k + 1 == parts.len() {
                map.insert(part.to_string(), value.clone());
                break;
            }
            node = map
                .entry(part.to_string())
                .or_insert(Value::Object(Default::default()));
        }
    }
    Ok(())
}

/// Loads a configuration (defaults when `path` is `None`) and applies
/// dotted overrides before validation.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut doc = match path {
        Some(p) => {
            if !p.exists() {
                return Err(Error::MissingInput(p.to_path_buf()));
            }
            serde_json::from_str(&fs::read_to_string(p)?)?
        }
        None => serde_json::to_value(RunConfig::default())?,
    };
    apply_overrides(&mut doc, overrides)?;
    let cfg: RunConfig =
        serde_json::from_value(doc).map_err(|e| Error::config("config", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, Value>,
}

impl StageSummary {
    fn new(stage: &str) -> Self {
        StageSummary {
            stage: stage.into(),
            checks: Vec::new(),
            values: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn value(&mut self, key: &str, v: impl Serialize) -> Result<()> {
        self.values.insert(key.into(), serde_json::to_value(v)?);
        Ok(())
    }
}

struct Stage<'a> {
    name: &'static str,
    out: &'a Path,
    cfg: &'a RunConfig,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

impl<'a> Stage<'a> {
    fn new(name: &'static str, cfg: &'a RunConfig, out: &'a Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        Ok(Stage {
            name,
            out,
            cfg,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn stem(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn record(list: &mut Vec<FileHash>, out: &Path, path: &Path) -> Result<()> {
        let rel = path.strip_prefix(out).unwrap_or(path);
        list.push(FileHash {
            path: rel.to_string_lossy().into_owned(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    fn read(&mut self, name: &str) -> Result<crate::io::LoadedField<f64>> {
        let stem = self.stem(name);
        let loaded = read_field::<f64>(&stem)?;
        Self::record(&mut self.inputs, self.out, &json_path(&stem))?;
        Self::record(&mut self.inputs, self.out, &bin_path(&stem))?;
        Ok(loaded)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&mut self, name: &str) -> Result<T> {
        let path = self.out.join(name);
        if !path.exists() {
            return Err(Error::MissingInput(path));
        }
        let v = serde_json::from_str(&fs::read_to_string(&path)?)?;
        Self::record(&mut self.inputs, self.out, &path)?;
        Ok(v)
    }

    fn write(&mut self, f: &GridField, name: &str, meta: Option<Value>) -> Result<()> {
        let stem = self.stem(name);
        write_field(f, &stem, meta)?;
        Self::record(&mut self.outputs, self.out, &json_path(&stem))?;
        Self::record(&mut self.outputs, self.out, &bin_path(&stem))
    }

    fn write_json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let path = self.out.join(name);
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        fs::write(&path, text)?;
        Self::record(&mut self.outputs, self.out, &path)
    }

    fn write_table(&mut self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let path = self.out.join(name);
        write_table(&path, columns, rows)?;
        Self::record(&mut self.outputs, self.out, &path)
    }

    fn write_csv(&mut self, f: &GridField, name: &str) -> Result<()> {
        let path = self.out.join(name);
        write_csv(f, &path)?;
        Self::record(&mut self.outputs, self.out, &path)
    }

    fn finish(self, summary: Option<&StageSummary>) -> Result<bool> {
        let mut me = self;
        if let Some(s) = summary {
            let name = format!("{}_summary.json", me.name);
            me.write_json(&name, s)?;
        }
        let manifest = Manifest {
            stage: me.name.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: sha256_hex(serde_json::to_string(me.cfg)?.as_bytes()),
            seed: me.cfg.seed,
            inputs: me.inputs,
            outputs: me.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(me.out.join(format!("manifest_{}.json", me.name)), text)?;
        Ok(summary.is_none_or(|s| s.passed()))
    }
}

fn trace_name(route: Route) -> &'static str {
    match route {
        Route::Abel => "trace_abel",
        Route::Spectral => "trace_spectral",
    }
}

fn phantom_from(meta: &Option<Value>) -> Result<Phantom> {
    let v = meta
        .as_ref()
        .and_then(|m| m.get("phantom"))
        .ok_or_else(|| Error::config("phantom", "phantom file carries no phantom description"))?;
    Ok(serde_json::from_value(v.clone())?)
}

/// Samples the phantom on the spectral box and on the output grid.
pub fn cmd_phantom(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let mut st = Stage::new("phantom", cfg, out)?;
    let p = cfg.phantom;
    let (bx, bn) = cfg.box_axes()?;
    let meta = serde_json::json!({ "phantom": p });
    st.write(&p.sample(bx, bn)?, "phantom", Some(meta.clone()))?;
    let og = cfg.output_grid()?;
    let ref_field = GridField::from_fn_2d(og.x, og.xn, [Parity::None, Parity::None], |i, j| {
        p.eval(og.x.coord(i), og.xn.coord(j))
    })?;
    st.write(&ref_field, "phantom_out", Some(meta))?;
    st.write_csv(&ref_field, "phantom_out.csv")?;
    st.finish(None)
}

/// Circular means and wave traces for the configured routes.
pub fn cmd_forward(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let mut st = Stage::new("forward", cfg, out)?;
    let loaded = st.read("phantom")?;
    let p = phantom_from(&loaded.header.metadata)?;
    let f = loaded.into_finite()?;
    let (xa, ta) = cfg.trace_axes()?;
    let mut summary = StageSummary::new("forward");
    let mut traces = Vec::new();
    if cfg.forward_route != ForwardChoice::Spectral {
        let m = spherical_means(&p, xa, ta)?;
        st.write(&m.0, "means", None)?;
        let tr = mean_to_trace(&m, 2)?;
        st.write(
            &tr.field,
            trace_name(Route::Abel),
            Some(serde_json::json!({ "route": Route::Abel })),
        )?;
        traces.push(tr);
    }
    if cfg.forward_route != ForwardChoice::Abel {
        let tr = wave_trace_spectral(&f, ta, xa)?;
        st.write(
            &tr.field,
            trace_name(Route::Spectral),
            Some(serde_json::json!({ "route": Route::Spectral })),
        )?;
        traces.push(tr);
    }
    if let [a, b] = traces.as_slice() {
        let d = trace_difference(a, b)?;
        summary.value("route_difference", d)?;
        summary.checks.push(Check::at_most(
            "forward_route_agreement",
            d,
            cfg.thresholds.forward_agreement,
        ));
    }
    st.finish(Some(&summary))
}

fn read_trace(st: &mut Stage, route: Route) -> Result<TraceData> {
    let loaded = st.read(trace_name(route))?;
    TraceData::new(loaded.into_finite()?, route)
}

fn reconstruct(cfg: &RunConfig, tr: &TraceData, route: InversionChoice) -> Result<Reconstruction> {
    let og = cfg.output_grid()?;
    match route {
        InversionChoice::Direct => invert_direct(tr, &og, cfg.tmax, cfg.compensation),
        _ => {
            let window = window_trace(tr, cfg.tmax)?;
            invert_spectral(&window, &og, &cfg.zgrid, cfg.compensation, cfg.crossfade)
        }
    }
}

fn window_trace(tr: &TraceData, tmax: f64) -> Result<TraceData> {
    let (xa, ta) = (*tr.x_axis(), *tr.t_axis());
    let last = (ta.position(tmax).round() as usize).min(ta.count - 1);
    if last + 1 == ta.count {
        return Ok(tr.clone());
    }
    let sub = Axis::new(ta.name, 0.0, ta.step, last + 1)?;
    let field = GridField::from_fn_2d(xa, sub, [Parity::None, Parity::Even], |i, j| {
        tr.field.get(i, j)
    })?;
    TraceData::new(field, tr.route)
}

/// Reconstructions for the configured routes plus an error table.
pub fn cmd_invert(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let mut st = Stage::new("invert", cfg, out)?;
    let mut tr = read_trace(&mut st, cfg.trace_source)?;
    if let Some(l) = cfg.aperture {
        tr = restrict_aperture(&tr, cfg.phantom.center, l)?;
    }
    let reference = st.read("phantom_out")?.into_finite()?;
    let routes: &[InversionChoice] = match cfg.inversion_route {
        InversionChoice::Both => &[InversionChoice::Direct, InversionChoice::Spectral],
        InversionChoice::Direct => &[InversionChoice::Direct],
        InversionChoice::Spectral => &[InversionChoice::Spectral],
    };
    let mut summary = StageSummary::new("invert");
    let mut fields = Vec::new();
    for &r in routes {
        let rec = reconstruct(cfg, &tr, r)?;
        let name = match r {
            InversionChoice::Direct => "recon_direct",
            _ => "recon_spectral",
        };
        let err = relative_error(&rec.field, &reference)?;
        st.write(&rec.field, name, Some(serde_json::to_value(&rec.meta)?))?;
        st.write_csv(&rec.field, &format!("{name}.csv"))?;
        summary.value(&format!("{name}_meta"), &rec.meta)?;
        summary.checks.push(Check::at_most(
            &format!("{name}_relative_error"),
            err,
            cfg.thresholds.reconstruction,
        ));
        fields.push(rec.field);
    }
    if let [a, b] = fields.as_slice() {
        let d = route_difference(a, b, &reference)?;
        summary.checks.push(Check::at_most(
            "route_difference",
            d,
            cfg.thresholds.route_agreement,
        ));
    }
    let path = out.join("errors.csv");
    let mut text = String::from("quantity,value\n");
    for c in &summary.checks {
        text.push_str(&format!("{},{:.17e}\n", c.name, c.value));
    }
    fs::write(&path, text)?;
    Stage::record(&mut st.outputs, out, &path)?;
    st.finish(Some(&summary))
}

/// Multiplier frequency grid: `2 pi fftfreq(64, 1)` along both axes.
pub fn multiplier_grid() -> Vec<f64> {
    frequency_grid(64, 1.0)
}

pub const MULTIPLIER_EPS: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

/// Isometry, range, decay, multiplier and oracle reports.
pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let mut st = Stage::new("verify", cfg, out)?;
    let th = cfg.thresholds;
    let loaded = st.read("phantom")?;
    let p = phantom_from(&loaded.header.metadata)?;
    let f = loaded.into_finite()?;
    let tr = read_trace(&mut st, cfg.trace_source)?;
    let mut s = StageSummary::new("verify");

    let iso = isometry_check(&f, &tr)?;
    st.write_json("isometry.json", &iso)?;
    s.checks
        .push(Check::at_most("isometry_gap", iso.rel_gap, th.isometry_gap));

    let extent = cfg.grid.output.x_max.abs().max(cfg.grid.output.x_min.abs());
    let probes = probe_lattice(extent);
    let range = range_residual(&tr, &probes)?;
    let floor = range_floor(&tr, &probes)?;
    let rows: Vec<Vec<f64>> = range
        .probes
        .iter()
        .zip(&range.residuals)
        .zip(&floor.per_probe)
        .map(|((p, r), fl)| vec![p.0, p.1, *r, *fl])
        .collect();
    st.write_table("range.csv", &["x1", "xn", "residual", "floor"], &rows)?;
    s.value("range", &range)?;
    s.value("range_floor", floor.floor)?;
    s.checks.push(Check::at_most(
        "range_residual",
        range.max_normalized,
        th.range_floor_factor * floor.floor,
    ));
    let leak = range_leak(&tr, &cfg.zgrid)?;
    s.checks
        .push(Check::at_most("range_leak", leak, th.range_leak));

    if tr.field.max_abs() > 0.0 {
        let sweep = perturbation_sweep(&tr, &probes, &cfg.zgrid, &cfg.perturbation_eps, cfg.seed)?;
        write_sweep(&mut st, &sweep)?;
        s.checks.push(Check::at_least(
            "sweep_r_squared",
            sweep.fit.r_squared,
            th.sweep_r_squared,
        ));
        let last = sweep.rows.last().map_or(0.0, |r| r.leak);
        let ratio = if leak > 0.0 {
            last / leak
        } else {
            f64::INFINITY
        };
        s.checks
            .push(Check::at_least("sweep_leak_ratio", ratio, th.leak_ratio));
        s.value("sweep", &sweep)?;
    }

    let decay = decay_check(&tr, p.center, p.radius);
    st.write_table(
        "decay.csv",
        &["t", "sup", "compensated"],
        &decay.profile.rows(),
    )?;
    if let Some(slope) = decay.slope {
        s.checks
            .push(Check::at_most("decay_slope", slope, th.decay_slope));
    }
    s.value("decay_slope", decay.slope)?;

    let xi = multiplier_grid();
    let mrows = verify_multiplier(&xi, &xi, &MULTIPLIER_EPS);
    st.write_table(
        "multiplier.csv",
        &["eps", "max_abs_deviation"],
        &mrows
            .iter()
            .map(|r| vec![r.eps, r.max_abs_deviation])
            .collect::<Vec<_>>(),
    )?;
    let monotone = mrows
        .windows(2)
        .all(|w| w[1].max_abs_deviation <= w[0].max_abs_deviation);
    let smallest = mrows.last().map_or(f64::NAN, |r| r.max_abs_deviation);
    let mut m = Check::at_most("multiplier_limit", smallest, th.multiplier);
    m.passed &= monotone;
    s.checks.push(m);

    let mut orows = Vec::new();
    let mut worst: f64 = 0.0;
    for (w, tau) in oracle_grid() {
        let r = gaussian_integral_oracle(w, tau)?;
        worst = worst.max(r.gaussian.abs_diff()).max(r.half_line.abs_diff());
        orows.push(vec![
            w.re,
            w.im,
            tau,
            r.gaussian.abs_diff(),
            r.half_line.abs_diff(),
        ]);
    }
    st.write_table(
        "oracle.csv",
        &["w_re", "w_im", "tau", "gaussian_diff", "half_line_diff"],
        &orows,
    )?;
    s.checks.push(Check::at_most("oracle", worst, th.oracle));

    st.finish(Some(&s))
}

fn write_sweep(st: &mut Stage, sweep: &SweepReport) -> Result<()> {
    let rows: Vec<Vec<f64>> = sweep
        .rows
        .iter()
        .map(|r| vec![r.eps, r.residual, r.leak])
        .collect();
    st.write_table("sweep.csv", &["eps", "residual", "leak"], &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub stages: Vec<StageSummary>,
    pub passed: bool,
}

/// Aggregates the stage summaries found in the output directory.
pub fn cmd_report(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let mut st = Stage::new("report", cfg, out)?;
    let mut stages = Vec::new();
    for name in ["forward", "invert", "verify"] {
        let s: StageSummary = st.read_json(&format!("{name}_summary.json"))?;
        stages.push(s);
    }
    let passed = stages.iter().all(|s| s.passed());
    let report = Report {
        config: cfg.clone(),
        stages,
        passed,
    };
    st.write_json("report.json", &report)?;
    let path = out.join("report.csv");
    let mut text = String::from("stage,check,value,threshold,passed\n");
    for s in &report.stages {
        for c in &s.checks {
            text.push_str(&format!(
                "{},{},{:.17e},{:.17e},{}\n",
                s.stage, c.name, c.value, c.threshold, c.passed
            ));
        }
    }
    fs::write(&path, text)?;
    Stage::record(&mut st.outputs, out, &path)?;
    st.finish(None)?;
    Ok(passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_set_nested_keys() {
        let mut doc = serde_json::to_value(RunConfig::default()).unwrap();
        apply_overrides(
            &mut doc,
            &[
                "grid.trace.t_count=128".into(),
                "trace_source=spectral".into(),
            ],
        )
        .unwrap();
        let cfg: RunConfig = serde_json::from_value(doc).unwrap();
        assert_eq!(cfg.grid.trace.t_count, 128);
        assert_eq!(cfg.trace_source, Route::Spectral);
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = RunConfig {
            tmax: 9.0,
            ..Default::default()
        };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "tmax"),
            other => panic!("unexpected {other:?}"),
        }
        cfg.tmax = 8.0;
        cfg.grid.trace.x_step = 0.0;
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "grid.trace.x_step"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut doc = serde_json::to_value(RunConfig::default()).unwrap();
        apply_overrides(&mut doc, &["grid.trace.bogus=1".into()]).unwrap();
        assert!(matches!(
            serde_json::from_value::<RunConfig>(doc)
                .map_err(|e| Error::config("config", e.to_string())),
            Err(Error::Config { .. })
        ));
    }
}
