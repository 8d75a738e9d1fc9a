//! Reynolds and Favre averages over a finite, weighted series of flow samples.
//!
//! A series is a series: ensemble and time averaging share this code path and
//! stationarity is the caller's assertion. Weights are normalized on
//! construction.

use std::fs;
use std::path::Path;

use crate::calculus::{derivative, integrate_values};
use crate::error::{Error, Result};
use crate::exchange::{decode_binary, encode_binary, FieldData};
use crate::field::{same_grid, ScalarField, SymmetricTensorField, VectorField};
use crate::grid::Grid;
use crate::kvdoc::KvDocument;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSample {
    pub rho: ScalarField,
    pub v: VectorField,
    pub p: ScalarField,
    pub weight: f64,
    pub time: f64,
}

/// Averaging-window metadata. `samples_per_window` groups consecutive
/// samples for the windowed energy balance; `duration` records the physical
/// averaging time (e.g. the Compton time) for provenance only.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragingWindow {
    pub samples_per_window: usize,
    pub duration: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSeries {
    samples: Vec<FlowSample>,
    window: AveragingWindow,
    synthetic: bool,
}

impl FlowSeries {
    /// Checks grids, densities and weights, then normalizes the weights.
    pub fn new(mut samples: Vec<FlowSample>, window: AveragingWindow, synthetic: bool) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Series("empty series".into()))?;
        let grid = first.rho.grid().clone();
        let mut total = 0.0;
        for (i, s) in samples.iter().enumerate() {
            same_grid(&grid, s.rho.grid())?;
            same_grid(&grid, s.v.grid())?;
            same_grid(&grid, s.p.grid())?;
            if !(s.weight.is_finite() && s.weight > 0.0) {
                return Err(Error::Series(format!("sample {i}: weight must be positive")));
            }
            if !s.time.is_finite() {
                return Err(Error::Series(format!("sample {i}: non-finite time")));
            }
            if s.rho.min() < 0.0 {
                return Err(Error::Series(format!("sample {i}: negative density")));
            }
            total += s.weight;
        }
        if window.samples_per_window == 0 {
            return Err(Error::Series("window must hold at least one sample".into()));
        }
        for s in samples.iter_mut() {
            s.weight /= total;
        }
        Ok(FlowSeries {
            samples,
            window,
            synthetic,
        })
    }

    /// Single window covering every sample.
    pub fn single_window(samples: Vec<FlowSample>, synthetic: bool) -> Result<Self> {
        let n = samples.len().max(1);
        FlowSeries::new(
            samples,
            AveragingWindow {
                samples_per_window: n,
                duration: None,
            },
            synthetic,
        )
    }

    pub fn samples(&self) -> &[FlowSample] {
        &self.samples
    }

    pub fn window(&self) -> &AveragingWindow {
        &self.window
    }

    /// True when the series was generated rather than measured.
    pub fn is_synthetic(&self) -> bool {
        self.synthetic
    }

    pub fn grid(&self) -> &Grid {
        self.samples[0].rho.grid()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of complete windows; a trailing partial window is dropped.
    pub fn window_count(&self) -> usize {
        self.samples.len() / self.window.samples_per_window
    }

    /// The `i`-th window as its own series with renormalized weights.
    pub fn window_series(&self, i: usize) -> Result<FlowSeries> {
        let w = self.window.samples_per_window;
        if i >= self.window_count() {
            return Err(Error::Series(format!("window {i} out of range")));
        }
        FlowSeries::single_window(self.samples[i * w..(i + 1) * w].to_vec(), self.synthetic)
    }

    /// Weighted mean sample time.
    pub fn mean_time(&self) -> f64 {
        self.samples.iter().map(|s| s.weight * s.time).sum()
    }
}

/// Pointwise quantity extracted from a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Density,
    Pressure,
    Velocity(usize),
    /// `rho * v_k`
    Momentum(usize),
    /// `v_i * v_j`
    VelocityProduct(usize, usize),
}

impl Quantity {
    fn value(self, s: &FlowSample, idx: usize) -> f64 {
        match self {
            Quantity::Density => s.rho.values()[idx],
            Quantity::Pressure => s.p.values()[idx],
            Quantity::Velocity(k) => s.v.component(k)[idx],
            Quantity::Momentum(k) => s.rho.values()[idx] * s.v.component(k)[idx],
            Quantity::VelocityProduct(i, j) => s.v.component(i)[idx] * s.v.component(j)[idx],
        }
    }

    fn check(self, dim: usize) -> Result<()> {
        let ok = match self {
            Quantity::Velocity(k) | Quantity::Momentum(k) => k < dim,
            Quantity::VelocityProduct(i, j) => i < dim && j < dim,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{self:?} exceeds dimension {dim}")))
        }
    }
}

/// Weighted pointwise mean of an arbitrary per-sample quantity.
pub fn reynolds_mean_with(series: &FlowSeries, f: impl Fn(&FlowSample, usize) -> f64) -> ScalarField {
    let g = series.grid();
    let mut out = vec![0.0; g.len()];
    for s in series.samples() {
        for (i, o) in out.iter_mut().enumerate() {
            *o += s.weight * f(s, i);
        }
    }
    ScalarField::from_parts(g.clone(), out)
}

pub fn reynolds_mean(series: &FlowSeries, q: Quantity) -> Result<ScalarField> {
    q.check(series.grid().dim())?;
    Ok(reynolds_mean_with(series, |s, i| q.value(s, i)))
}

/// `mean(rho f) / mean(rho)`; requires a positive mean density everywhere.
pub fn favre_mean_with(series: &FlowSeries, f: impl Fn(&FlowSample, usize) -> f64) -> Result<ScalarField> {
    let rho = reynolds_mean_with(series, |s, i| s.rho.values()[i]);
    if let Some(i) = rho.values().iter().position(|&r| r <= 0.0) {
        return Err(Error::Series(format!("mean density vanishes at point {i}")));
    }
    let num = reynolds_mean_with(series, |s, i| s.rho.values()[i] * f(s, i));
    let values = num.values().iter().zip(rho.values()).map(|(n, r)| n / r).collect();
    ScalarField::new(series.grid().clone(), values)
}

pub fn favre_mean(series: &FlowSeries, q: Quantity) -> Result<ScalarField> {
    q.check(series.grid().dim())?;
    favre_mean_with(series, |s, i| q.value(s, i))
}

/// Favre-averaged velocity.
pub fn favre_velocity(series: &FlowSeries) -> Result<VectorField> {
    let d = series.grid().dim();
    let comps = (0..d)
        .map(|k| favre_mean(series, Quantity::Velocity(k)).map(ScalarField::into_values))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(series.grid().clone(), comps)
}

/// `tau = m (mean(rho v v) - mean(rho) v~ v~)`, accumulated as the weighted
/// mean of `m rho (v - v~)(v - v~)` so it is PSD by construction.
pub fn reynolds_stress_stat(series: &FlowSeries, mass: f64) -> Result<SymmetricTensorField> {
    let vt = favre_velocity(series)?;
    let g = series.grid();
    let d = g.dim();
    let mut tau = SymmetricTensorField::zeros(g);
    for i in 0..d {
        for j in i..d {
            let (vi, vj) = (vt.component(i), vt.component(j));
            let out = tau.component_mut(i, j);
            for s in series.samples() {
                let (si, sj) = (s.v.component(i), s.v.component(j));
                for (p, o) in out.iter_mut().enumerate() {
                    *o += s.weight * mass * s.rho.values()[p] * (si[p] - vi[p]) * (sj[p] - vj[p]);
                }
            }
        }
    }
    Ok(tau)
}

/// Turbulent heat flux `q = mean(m rho (v - v~) |v - v~|^2 / 2)`.
pub fn heat_flux_stat(series: &FlowSeries, mass: f64) -> Result<VectorField> {
    let vt = favre_velocity(series)?;
    Ok(fluctuation_mean(series, &vt, |s, p, dv| {
        let e: f64 = dv.iter().map(|x| x * x).sum();
        0.5 * mass * s.rho.values()[p] * e
    }))
}

/// Pressure-velocity correlation `C = mean(p (v - v~))`.
pub fn pressure_velocity_stat(series: &FlowSeries) -> Result<VectorField> {
    let vt = favre_velocity(series)?;
    Ok(fluctuation_mean(series, &vt, |s, p, _| s.p.values()[p]))
}

/// `mean(f(sample, point, dv) * dv)` with `dv = v - v~`.
fn fluctuation_mean(
    series: &FlowSeries,
    vt: &VectorField,
    f: impl Fn(&FlowSample, usize, &[f64]) -> f64,
) -> VectorField {
    let g = series.grid();
    let d = g.dim();
    let mut comps = vec![vec![0.0; g.len()]; d];
    let mut dv = vec![0.0; d];
    for s in series.samples() {
        for p in 0..g.len() {
            for k in 0..d {
                dv[k] = s.v.component(k)[p] - vt.component(k)[p];
            }
            let a = s.weight * f(s, p, &dv);
            for k in 0..d {
                comps[k][p] += a * dv[k];
            }
        }
    }
    VectorField::from_parts(g.clone(), comps)
}

/// Per-window statistics entering the turbulent energy balance.
#[derive(Clone, Debug)]
pub struct WindowStats {
    pub time: f64,
    pub rho: ScalarField,
    pub v: VectorField,
    pub p: ScalarField,
    pub tau: SymmetricTensorField,
    pub heat_flux: VectorField,
    pub correlation: VectorField,
    /// `rho_bar * eps~ = tr(tau) / 2`
    pub energy_density: ScalarField,
}

pub fn window_stats(series: &FlowSeries, mass: f64) -> Result<WindowStats> {
    let tau = reynolds_stress_stat(series, mass)?;
    let energy_density = ScalarField::from_parts(
        series.grid().clone(),
        tau.trace().values().iter().map(|t| 0.5 * t).collect(),
    );
    Ok(WindowStats {
        time: series.mean_time(),
        rho: reynolds_mean(series, Quantity::Density)?,
        v: favre_velocity(series)?,
        p: reynolds_mean(series, Quantity::Pressure)?,
        heat_flux: heat_flux_stat(series, mass)?,
        correlation: pressure_velocity_stat(series)?,
        tau,
        energy_density,
    })
}

#[derive(Clone, Debug)]
pub struct EnergyBalance {
    /// Centre times of the interior windows.
    pub times: Vec<f64>,
    pub residuals: Vec<ScalarField>,
    /// `sqrt(∫ r^2)` per interior window.
    pub l2_norms: Vec<f64>,
}

impl EnergyBalance {
    pub fn max_l2(&self) -> f64 {
        self.l2_norms.iter().fold(0.0, |m, &x| m.max(x))
    }
}

/// Residual of the windowed turbulent energy balance
///
/// `d_t(rho eps) + div(rho eps v~ + q + C) + p_bar div v~ + tau : grad v~`
///
/// evaluated at every interior window, with the time derivative taken by
/// centred differences of neighbouring window averages.
pub fn energy_balance_residual(series: &FlowSeries, mass: f64) -> Result<EnergyBalance> {
    let nw = series.window_count();
    if nw < 3 {
        return Err(Error::Series(format!("energy balance needs at least 3 windows, have {nw}")));
    }
    let stats = (0..nw)
        .map(|i| window_stats(&series.window_series(i)?, mass))
        .collect::<Result<Vec<_>>>()?;
    let g = series.grid();
    let d = g.dim();
    let mut balance = EnergyBalance {
        times: Vec::new(),
        residuals: Vec::new(),
        l2_norms: Vec::new(),
    };
    for w in 1..nw - 1 {
        let (prev, cur, next) = (&stats[w - 1], &stats[w], &stats[w + 1]);
        let dt = next.time - prev.time;
        if !(dt.abs() > 0.0) {
            return Err(Error::Series(format!("windows around {w} share a time")));
        }
        let mut r: Vec<f64> = next
            .energy_density
            .values()
            .iter()
            .zip(prev.energy_density.values())
            .map(|(a, b)| (a - b) / dt)
            .collect();
        let e = cur.energy_density.values();
        for k in 0..d {
            let vk = cur.v.component(k);
            let flux: Vec<f64> = (0..g.len())
                .map(|p| e[p] * vk[p] + cur.heat_flux.component(k)[p] + cur.correlation.component(k)[p])
                .collect();
            let dv = derivative(vk, g, k, 1);
            for (p, (o, df)) in r.iter_mut().zip(derivative(&flux, g, k, 1)).enumerate() {
                *o += df + cur.p.values()[p] * dv[p];
            }
            for i in 0..d {
                let dvi = derivative(cur.v.component(i), g, k, 1);
                let tik = cur.tau.component(i, k);
                for (p, o) in r.iter_mut().enumerate() {
                    *o += tik[p] * dvi[p];
                }
            }
        }
        let sq: Vec<f64> = r.iter().map(|x| x * x).collect();
        balance.l2_norms.push(integrate_values(g, &sq).sqrt());
        balance.times.push(cur.time);
        balance.residuals.push(ScalarField::new(g.clone(), r)?);
    }
    Ok(balance)
}

/// Parsed series index document.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesIndex {
    pub window: AveragingWindow,
    pub synthetic: bool,
    pub entries: Vec<SeriesEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesEntry {
    pub time: f64,
    pub weight: f64,
    pub rho: String,
    pub v: String,
    pub p: String,
}

pub const SERIES_INDEX_FILE: &str = "index";
const SERIES_FORMAT: &str = "QHDTURB-SERIES-01";
const MAX_SERIES_LEN: usize = 1_000_000;

fn safe_file_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl SeriesIndex {
    pub fn parse(text: &str) -> Result<Self> {
        let doc = KvDocument::parse(text)?;
        if doc.get("format") != Some(SERIES_FORMAT) {
            return Err(Error::Format(format!("series index must declare format = {SERIES_FORMAT}")));
        }
        let count: usize = doc.require("series.count")?;
        if count == 0 || count > MAX_SERIES_LEN {
            return Err(Error::Format(format!("series.count {count} out of range")));
        }
        let samples_per_window: usize = doc.require("window.samples")?;
        if samples_per_window == 0 {
            return Err(Error::Format("window.samples must be positive".into()));
        }
        let duration = doc.parse_value::<f64>("window.duration")?;
        let synthetic = doc.parse_value::<bool>("series.synthetic")?.unwrap_or(false);
        let mut entries = Vec::with_capacity(count.min(1024));
        for i in 0..count {
            let key = |f: &str| format!("sample.{i}.{f}");
            let file = |f: &str| -> Result<String> {
                let name: String = doc.require(&key(f))?;
                if !safe_file_name(&name) {
                    return Err(Error::Format(format!("{}: unsafe file name {name:?}", key(f))));
                }
                Ok(name)
            };
            let time: f64 = doc.require(&key("time"))?;
            let weight: f64 = doc.require(&key("weight"))?;
            if !time.is_finite() || !(weight.is_finite() && weight > 0.0) {
                return Err(Error::Format(format!("sample {i}: bad time or weight")));
            }
            entries.push(SeriesEntry {
                time,
                weight,
                rho: file("rho")?,
                v: file("v")?,
                p: file("p")?,
            });
        }
        Ok(SeriesIndex {
            window: AveragingWindow {
                samples_per_window,
                duration,
            },
            synthetic,
            entries,
        })
    }

    pub fn to_document(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        doc.set("format", SERIES_FORMAT);
        doc.set("series.count", self.entries.len());
        doc.set("series.synthetic", self.synthetic);
        doc.set("window.samples", self.window.samples_per_window);
        if let Some(t) = self.window.duration {
            doc.set("window.duration", format!("{t:e}"));
        }
        for (i, e) in self.entries.iter().enumerate() {
            doc.set(&format!("sample.{i}.time"), format!("{:e}", e.time));
            doc.set(&format!("sample.{i}.weight"), format!("{:e}", e.weight));
            doc.set(&format!("sample.{i}.rho"), &e.rho);
            doc.set(&format!("sample.{i}.v"), &e.v);
            doc.set(&format!("sample.{i}.p"), &e.p);
        }
        doc
    }
}

/// Writes `series` as binary exchange fields plus an `index` document.
pub fn write_series(dir: &Path, series: &FlowSeries) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(series.len());
    for (i, s) in series.samples().iter().enumerate() {
        let names = [
            format!("sample{i:05}_rho.bin"),
            format!("sample{i:05}_v.bin"),
            format!("sample{i:05}_p.bin"),
        ];
        fs::write(dir.join(&names[0]), encode_binary(&FieldData::from(s.rho.clone())))?;
        fs::write(dir.join(&names[1]), encode_binary(&FieldData::from(s.v.clone())))?;
        fs::write(dir.join(&names[2]), encode_binary(&FieldData::from(s.p.clone())))?;
        let [rho, v, p] = names;
        entries.push(SeriesEntry {
            time: s.time,
            weight: s.weight,
            rho,
            v,
            p,
        });
    }
    let index = SeriesIndex {
        window: series.window().clone(),
        synthetic: series.is_synthetic(),
        entries,
    };
    fs::write(dir.join(SERIES_INDEX_FILE), index.to_document().to_string())?;
    Ok(())
}

pub fn read_series(dir: &Path) -> Result<FlowSeries> {
    let index = SeriesIndex::parse(&fs::read_to_string(dir.join(SERIES_INDEX_FILE))?)?;
    let load = |name: &str| -> Result<FieldData> { decode_binary(&fs::read(dir.join(name))?) };
    let samples = index
        .entries
        .iter()
        .map(|e| {
            Ok(FlowSample {
                rho: load(&e.rho)?.into_scalar()?,
                v: load(&e.v)?.into_vector()?,
                p: load(&e.p)?.into_scalar()?,
                weight: e.weight,
                time: e.time,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FlowSeries::new(samples, index.window, index.synthetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn grid() -> Grid {
        Grid::periodic_cube(1, 16, 2.0 * std::f64::consts::PI).unwrap()
    }

    fn sample(g: &Grid, rho: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64, p: impl Fn(f64) -> f64, w: f64, t: f64) -> FlowSample {
        FlowSample {
            rho: ScalarField::from_fn(g, |x| rho(x[0])).unwrap(),
            v: VectorField::from_fn(g, |x| [v(x[0]), 0.0, 0.0]).unwrap(),
            p: ScalarField::from_fn(g, |x| p(x[0])).unwrap(),
            weight: w,
            time: t,
        }
    }

    #[test]
    fn two_sample_favre_mean() {
        let g = grid();
        let s = FlowSeries::single_window(
            vec![
                sample(&g, |_| 1.0, |_| 0.0, |_| 0.0, 1.0, 0.0),
                sample(&g, |_| 3.0, |_| 4.0, |_| 0.0, 1.0, 1.0),
            ],
            true,
        )
        .unwrap();
        let f = favre_mean(&s, Quantity::Velocity(0)).unwrap();
        assert!(f.values().iter().all(|&x| (x - 3.0).abs() < 1e-15));
        let r = reynolds_mean(&s, Quantity::Velocity(0)).unwrap();
        assert!(r.values().iter().all(|&x| (x - 2.0).abs() < 1e-15));
    }

    #[test]
    fn symmetric_fluctuations_carry_no_heat_flux() {
        let g = grid();
        let s = FlowSeries::single_window(
            vec![
                sample(&g, |x| 1.0 + 0.5 * x.cos(), |x| x.sin() + 0.3, |_| 1.0, 1.0, 0.0),
                sample(&g, |x| 1.0 + 0.5 * x.cos(), |x| -x.sin() + 0.3, |_| 2.0, 1.0, 1.0),
            ],
            true,
        )
        .unwrap();
        assert!(heat_flux_stat(&s, 2.0).unwrap().max_magnitude() < 1e-15);
    }

    #[test]
    fn stationary_balanced_series_has_zero_residual() {
        // Uniform density and pressure, zero mean flow: every term vanishes.
        let g = grid();
        let mut samples = Vec::new();
        for t in 0..6 {
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            samples.push(sample(&g, |_| 1.0, move |_| sign * 0.7, |_| 0.4, 1.0, t as f64));
        }
        let series = FlowSeries::new(
            samples,
            AveragingWindow {
                samples_per_window: 2,
                duration: None,
            },
            true,
        )
        .unwrap();
        let b = energy_balance_residual(&series, 1.0).unwrap();
        assert_eq!(b.residuals.len(), 1);
        assert!(b.max_l2() < 1e-13, "{}", b.max_l2());
    }

    #[test]
    fn too_few_windows_is_an_error() {
        let g = grid();
        let s = FlowSeries::single_window(vec![sample(&g, |_| 1.0, |_| 0.0, |_| 0.0, 1.0, 0.0)], true).unwrap();
        assert!(matches!(energy_balance_residual(&s, 1.0), Err(Error::Series(_))));
    }

    #[test]
    fn index_rejects_path_traversal() {
        let text = "format = QHDTURB-SERIES-01\n[series]\ncount = 1\n[window]\nsamples = 1\n\
                    [sample.0]\ntime = 0\nweight = 1\nrho = ../x\nv = a\np = b\n";
        assert!(SeriesIndex::parse(text).is_err());
        assert!(SeriesIndex::parse(&text.replace("../x", "x.bin")).is_ok());
    }
}
