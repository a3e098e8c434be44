use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Coord;
use crate::model::{area_log_likelihood, ModelData};
use crate::stats::{iqr, sd};

/// Square lattice over `[lo, hi]` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lo: 12.5,
            hi: 57.5,
            n: 141,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            return Err("grid needs finite lo < hi".into());
        }
        if self.n < 2 {
            return Err("grid needs at least 2 nodes per axis".into());
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn nodes(&self) -> Array1<f64> {
        Array1::linspace(self.lo, self.hi, self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeSurface {
    pub grid: GridSpec,
    /// `density[[ix, iy]]` at `(nodes[ix], nodes[iy])`.
    pub density: Array2<f64>,
    pub bandwidth: [f64; 2],
}

impl KdeSurface {
    pub fn nodes(&self) -> Array1<f64> {
        self.grid.nodes()
    }

    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.density, self.grid.spacing())
    }
}

fn trapezoid(z: &Array2<f64>, h: f64) -> f64 {
    let n = z.nrows();
    let w = |i: usize| if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
    let mut total = 0.0;
    for ((ix, iy), v) in z.indexed_iter() {
        total += w(ix) * w(iy) * v;
    }
    total * h * h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapEstimate {
    pub location: Coord,
    pub density: f64,
}

const MIN_KDE_DRAWS: usize = 100;

fn bandwidth(xs: &[f64], m: usize, floor: f64) -> f64 {
    let spread = sd(xs).min(iqr(xs) / 1.34);
    let h = 1.06 * spread * (m as f64).powf(-0.2);
    if h.is_finite() && h > floor {
        h
    } else {
        floor
    }
}

/// Gaussian kernel matrix: entry `[g, l]` is `exp(-0.5 ((node_g - x_l)/h)^2)`.
fn kernel_matrix(nodes: &Array1<f64>, xs: &[f64], h: f64) -> Array2<f64> {
    Array2::from_shape_fn((nodes.len(), xs.len()), |(g, l)| {
        let u = (nodes[g] - xs[l]) / h;
        (-0.5 * u * u).exp()
    })
}

/// Product-Gaussian KDE on the grid with per-axis normal-reference
/// bandwidths, rescaled to integrate to one on the grid.
pub fn kde2d(draws: &[Coord], grid: &GridSpec) -> Result<KdeSurface> {
    grid.validate().map_err(Error::Config)?;
    if draws.len() < MIN_KDE_DRAWS {
        return Err(Error::Config(format!(
            "density estimate needs at least {MIN_KDE_DRAWS} draws, got {}",
            draws.len()
        )));
    }
    let xs: Vec<f64> = draws.iter().map(|c| c.x).collect();
    let ys: Vec<f64> = draws.iter().map(|c| c.y).collect();
    let floor = grid.spacing();
    let hx = bandwidth(&xs, draws.len(), floor);
    let hy = bandwidth(&ys, draws.len(), floor);
    let nodes = grid.nodes();
    let a = kernel_matrix(&nodes, &xs, hx);
    let b = kernel_matrix(&nodes, &ys, hy);
    let mut density = a.dot(&b.t());
    let mass = trapezoid(&density, floor);
    if mass > 0.0 {
        density /= mass;
    }
    Ok(KdeSurface {
        grid: *grid,
        density,
        bandwidth: [hx, hy],
    })
}

/// Grid node of highest density; ties go to the smallest easting, then
/// the smallest northing.
pub fn map_estimate(surface: &KdeSurface) -> MapEstimate {
    let nodes = surface.nodes();
    let mut best = (0, 0, f64::NEG_INFINITY);
    for (ix, row) in surface.density.axis_iter(Axis(0)).enumerate() {
        for (iy, &v) in row.iter().enumerate() {
            if v > best.2 {
                best = (ix, iy, v);
            }
        }
    }
    MapEstimate {
        location: Coord::new(nodes[best.0], nodes[best.1]),
        density: best.2,
    }
}

/// Mode of the density of all areas' location draws pooled together.
pub fn composite_map(per_area: &[Vec<Coord>], grid: &GridSpec) -> Result<(KdeSurface, MapEstimate)> {
    let pooled: Vec<Coord> = per_area.iter().flatten().copied().collect();
    let surface = kde2d(&pooled, grid)?;
    let map = map_estimate(&surface);
    Ok((surface, map))
}

/// Log likelihood of area `i` over the grid at plug-in adjustment values;
/// `-inf` where the footprint is empty.
pub fn log_likelihood_surface(
    i: usize,
    data: &ModelData,
    alpha: &[f64],
    beta: &[f64],
    tau2: &[f64],
    grid: &GridSpec,
) -> Array2<f64> {
    let nodes = grid.nodes();
    Array2::from_shape_fn((grid.n, grid.n), |(ix, iy)| {
        match data.g(i, Coord::new(nodes[ix], nodes[iy])) {
            Some(g) => area_log_likelihood(&data.observed[i], &g, alpha, beta, tau2),
            None => f64::NEG_INFINITY,
        }
    })
}
