use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fitted::{fitted_values, FittedMode};
use super::kde::{kde2d, log_likelihood_surface, map_estimate, GridSpec, KdeSurface, MapEstimate};
use super::{angle_deg, distance_draws, ecdf, rmse_table, ErrorSummary, Interval};
use crate::error::{Error, Result};
use crate::geom::{Coord, LOCAL_CENTER};
use crate::ingest::percentile_column;
use crate::model::ModelData;
use crate::samplers::ChainOutput;
use crate::stats::{mean, median};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummaryOptions {
    pub grid: GridSpec,
    /// Seed for the observation noise in fitted-value realizations.
    pub noise_seed: u64,
    /// Spacing of the distance grid in `ecdf.csv`, meters.
    pub ecdf_step: f64,
    /// Also write `<id>_loglik.csv` at posterior-mean adjustments.
    pub likelihood_surface: bool,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            grid: GridSpec::default(),
            noise_seed: 7,
            ecdf_step: 0.25,
            likelihood_surface: false,
        }
    }
}

impl SummaryOptions {
    pub fn validate(&self) -> std::result::Result<(), String> {
        self.grid.validate()?;
        if !(self.ecdf_step > 0.0) {
            return Err("ecdf_step must be > 0".into());
        }
        Ok(())
    }
}

/// A location posterior reduced to its mode and its offset from the
/// reported center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationSummary {
    pub map: MapEstimate,
    pub map_source: Coord,
    pub map_distance: f64,
    pub map_angle: f64,
    /// Componentwise posterior median.
    pub median_location: Coord,
    pub posterior: ErrorSummary,
    pub n_draws: usize,
}

impl LocationSummary {
    fn new(draws: &[Coord], surface: &KdeSurface, source_center: Coord) -> Self {
        let map = map_estimate(surface);
        let xs: Vec<f64> = draws.iter().map(|c| c.x).collect();
        let ys: Vec<f64> = draws.iter().map(|c| c.y).collect();
        LocationSummary {
            map,
            map_source: map.location - LOCAL_CENTER + source_center,
            map_distance: map.location.dist(LOCAL_CENTER),
            map_angle: angle_deg(map.location, LOCAL_CENTER),
            median_location: Coord::new(median(&xs), median(&ys)),
            posterior: ErrorSummary::from_draws(draws, LOCAL_CENTER),
            n_draws: draws.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSummary {
    pub id: String,
    pub reported_source: Coord,
    pub location: LocationSummary,
    pub acceptance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SystematicSummary {
    /// Shared offset from the submodel.
    pub ell_star: Option<LocationSummary>,
    /// Mode of all areas' location draws pooled (full model).
    pub pooled: Option<LocationSummary>,
    /// Spread over areas of the distance from each area's mode to its
    /// reported center (full model).
    pub area_map_distance: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryReport {
    pub areas: Vec<AreaSummary>,
    pub systematic: SystematicSummary,
    /// Per-metric RMSE keyed by fitted mode.
    pub rmse: BTreeMap<&'static str, Vec<f64>>,
    /// Fitted values keyed by mode; rows are areas.
    pub fitted: BTreeMap<&'static str, Vec<Vec<f64>>>,
    /// Files written, in write order.
    pub files: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_grid_csv(path: &Path, grid: &GridSpec, values: &Array2<f64>, column: &str) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let nodes = grid.nodes();
    writeln!(w, "x,y,{column}").map_err(io)?;
    for ((ix, iy), v) in values.indexed_iter() {
        writeln!(w, "{},{},{}", nodes[ix], nodes[iy], v).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn write_area_draws(path: &Path, out: &ChainOutput, i: usize) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "chain,draw,x,y,distance,angle").map_err(io)?;
    let kx = 3 * out.m + 2 * i;
    for (c, chain) in out.chains.iter().enumerate() {
        for (d, draw) in chain.iter().enumerate() {
            let p = Coord::new(draw[kx], draw[kx + 1]);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                c + 1,
                d + 1,
                p.x,
                p.y,
                p.dist(LOCAL_CENTER),
                angle_deg(p, LOCAL_CENTER)
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Posterior-mean `(alpha, beta, tau2)`.
fn plug_in(out: &ChainOutput) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let col = |k: usize| mean(&out.pooled_column(k));
    let m = out.m;
    (
        (0..m).map(col).collect(),
        (m..2 * m).map(col).collect(),
        (2 * m..3 * m).map(col).collect(),
    )
}

/// Writes every posterior product for a fit under `out_dir` and returns
/// the in-memory summary. Per-area files need the full model; systematic
/// and fit tables use whichever fits are given.
pub fn summarize(
    data: &ModelData,
    full: Option<&ChainOutput>,
    sub: Option<&ChainOutput>,
    opts: &SummaryOptions,
    out_dir: &Path,
) -> Result<SummaryReport> {
    opts.validate().map_err(Error::Config)?;
    if full.is_none() && sub.is_none() {
        return Err(Error::Config("nothing to summarize: no draws found".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();
    let n = data.n();

    let mut areas = Vec::new();
    let mut systematic = SystematicSummary::default();
    let mut area_draws: Vec<Vec<Coord>> = Vec::new();
    if let Some(out) = full {
        area_draws = (0..n).map(|i| out.ell_draws(i)).collect();
        let surfaces = area_draws
            .par_iter()
            .map(|d| kde2d(d, &opts.grid))
            .collect::<Result<Vec<_>>>()?;
        let plug = opts.likelihood_surface.then(|| plug_in(out));
        for i in 0..n {
            let id = &data.ids[i];
            let location = LocationSummary::new(&area_draws[i], &surfaces[i], data.source_centers[i]);
            let summary = AreaSummary {
                id: id.clone(),
                reported_source: data.source_centers[i],
                location,
                acceptance: out.diagnostics.area_acceptance.get(i).copied(),
            };
            let p = out_dir.join(format!("{id}_draws.csv"));
            write_area_draws(&p, out, i)?;
            files.push(p);
            let p = out_dir.join(format!("{id}_kde.csv"));
            write_grid_csv(&p, &opts.grid, &surfaces[i].density, "density")?;
            files.push(p);
            let p = out_dir.join(format!("{id}_summary.json"));
            write_json(&p, &summary)?;
            files.push(p);
            if let Some((a, b, t)) = &plug {
                let ll = log_likelihood_surface(i, data, a, b, t, &opts.grid);
                let p = out_dir.join(format!("{id}_loglik.csv"));
                write_grid_csv(&p, &opts.grid, &ll, "log_likelihood")?;
                files.push(p);
            }
            areas.push(summary);
        }
        let pooled: Vec<Coord> = area_draws.iter().flatten().copied().collect();
        let surface = kde2d(&pooled, &opts.grid)?;
        systematic.pooled = Some(LocationSummary::new(&pooled, &surface, LOCAL_CENTER));
        let map_d: Vec<f64> = areas.iter().map(|a| a.location.map_distance).collect();
        systematic.area_map_distance = Some(Interval::from_draws(&map_d));
    }
    let mut star_draws = Vec::new();
    if let Some(out) = sub {
        star_draws = out.ell_star_draws();
        let surface = kde2d(&star_draws, &opts.grid)?;
        systematic.ell_star = Some(LocationSummary::new(&star_draws, &surface, LOCAL_CENTER));
    }
    let p = out_dir.join("systematic.json");
    write_json(&p, &systematic)?;
    files.push(p);

    // distance ECDFs on a fixed grid
    let mut series: Vec<(&str, super::Ecdf)> = Vec::new();
    if full.is_some() {
        let pooled: Vec<f64> = area_draws.iter().flat_map(|d| distance_draws(d, LOCAL_CENTER)).collect();
        series.push(("d_ell", ecdf(&pooled)));
        let maps: Vec<f64> = areas.iter().map(|a| a.location.map_distance).collect();
        series.push(("d_area_map", ecdf(&maps)));
    }
    if sub.is_some() {
        series.push(("d_ell_star", ecdf(&distance_draws(&star_draws, LOCAL_CENTER))));
    }
    let p = out_dir.join("ecdf.csv");
    {
        let mut w = create(&p)?;
        let io = |e| Error::io(&p, e);
        let names: Vec<&str> = series.iter().map(|s| s.0).collect();
        writeln!(w, "distance,{}", names.join(",")).map_err(io)?;
        let max_d = 2.0f64.sqrt() * (opts.grid.hi - opts.grid.lo) / 2.0;
        let steps = (max_d / opts.ecdf_step).ceil() as usize;
        for k in 0..=steps {
            let d = k as f64 * opts.ecdf_step;
            write!(w, "{d}").map_err(io)?;
            for (_, e) in &series {
                write!(w, ",{}", e.eval(d)).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    files.push(p);

    // fitted values and RMSE
    let mut fitted = BTreeMap::new();
    for (mode, draws) in [(FittedMode::Full, full), (FittedMode::Sub, sub), (FittedMode::Center, None)] {
        if mode != FittedMode::Center && draws.is_none() {
            continue;
        }
        fitted.insert(mode.as_str(), fitted_values(mode, draws, data, opts.noise_seed)?);
    }
    let order: Vec<&'static str> = ["full", "sub", "center"].into_iter().filter(|k| fitted.contains_key(k)).collect();
    let rmse: BTreeMap<&'static str, Vec<f64>> = fitted
        .iter()
        .map(|(k, f)| (*k, rmse_table(&data.observed, f)))
        .collect();
    let percentiles = data.percentiles();
    let p = out_dir.join("fitted.csv");
    {
        let mut w = create(&p)?;
        let io = |e| Error::io(&p, e);
        writeln!(w, "id,metric,observed,{}", order.join(",")).map_err(io)?;
        for i in 0..n {
            for (j, &pc) in percentiles.iter().enumerate() {
                write!(w, "{},{},{}", data.ids[i], percentile_column(pc), data.observed[i][j]).map_err(io)?;
                for k in &order {
                    write!(w, ",{}", fitted[k][i][j]).map_err(io)?;
                }
                writeln!(w).map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
    }
    files.push(p);
    let p = out_dir.join("rmse.csv");
    {
        let mut w = create(&p)?;
        let io = |e| Error::io(&p, e);
        writeln!(w, "metric,{}", order.iter().map(|k| format!("rmse_{k}")).collect::<Vec<_>>().join(",")).map_err(io)?;
        for (j, &pc) in percentiles.iter().enumerate() {
            write!(w, "{}", percentile_column(pc)).map_err(io)?;
            for k in &order {
                write!(w, ",{}", rmse[k][j]).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    files.push(p);

    // corrected coordinates: each area's own mode when available, else
    // the shared offset applied to every area
    let p = out_dir.join("corrected.csv");
    {
        let mut w = create(&p)?;
        let io = |e| Error::io(&p, e);
        writeln!(w, "id,reported_easting,reported_northing,corrected_easting,corrected_northing,shift_distance,shift_angle,method")
            .map_err(io)?;
        for i in 0..n {
            let (local, method) = match (areas.get(i), &systematic.ell_star) {
                (Some(a), _) => (a.location.map.location, "area_map"),
                (None, Some(s)) => (s.map.location, "shared_offset_map"),
                (None, None) => unreachable!("at least one fit is present"),
            };
            let src = data.source_centers[i];
            let corrected = local - LOCAL_CENTER + src;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                data.ids[i],
                src.x,
                src.y,
                corrected.x,
                corrected.y,
                local.dist(LOCAL_CENTER),
                angle_deg(local, LOCAL_CENTER),
                method
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    files.push(p);

    Ok(SummaryReport {
        areas,
        systematic,
        rmse,
        fitted,
        files,
    })
}
