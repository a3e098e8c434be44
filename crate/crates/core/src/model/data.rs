use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::footprint::{FootprintSimulator, SimSettings};
use crate::geom::Coord;
use crate::ingest::FocalArea;

/// Simulated RH vector at one center, `None` when the footprint is empty.
pub type Sim = Option<Arc<[f64]>>;

/// Memo of simulator output keyed by center snapped to a square lattice.
#[derive(Debug)]
pub struct SimCache {
    quantum: f64,
    map: Mutex<HashMap<(i64, i64), Sim>>,
}

impl SimCache {
    pub fn new(quantum: f64) -> Self {
        SimCache {
            quantum,
            map: Mutex::new(HashMap::new()),
        }
    }

    fn key(&self, c: Coord) -> (i64, i64) {
        ((c.x / self.quantum).round() as i64, (c.y / self.quantum).round() as i64)
    }

    /// The lattice point that `c` is evaluated at.
    pub fn snap(&self, c: Coord) -> Coord {
        let (kx, ky) = self.key(c);
        Coord::new(kx as f64 * self.quantum, ky as f64 * self.quantum)
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_compute(&self, c: Coord, compute: impl FnOnce(Coord) -> Sim) -> Sim {
        let key = self.key(c);
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return v.clone();
        }
        let v = compute(self.snap(c));
        self.map.lock().unwrap().entry(key).or_insert(v).clone()
    }
}

/// Focal areas prepared for repeated likelihood evaluation: observed
/// metrics as an n × m table plus one simulator (and optional cache) per
/// area.
#[derive(Debug)]
pub struct ModelData {
    pub ids: Vec<String>,
    pub source_centers: Vec<Coord>,
    pub observed: Vec<Vec<f64>>,
    pub settings: SimSettings,
    sims: Vec<FootprintSimulator>,
    caches: Option<Vec<SimCache>>,
}

impl ModelData {
    /// `quantum` enables memoization of simulator calls on a lattice of
    /// that spacing (meters); `None` evaluates every center exactly.
    pub fn new(areas: &[FocalArea], settings: SimSettings, quantum: Option<f64>) -> Result<Self> {
        for a in areas {
            if a.observed_rh.percentiles != settings.percentiles {
                return Err(Error::PercentileMismatch {
                    config: settings.percentiles.clone(),
                    header: a.observed_rh.percentiles.clone(),
                });
            }
        }
        if let Some(q) = quantum {
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::Config(format!("cache quantum must be > 0, got {q}")));
            }
        }
        Ok(ModelData {
            ids: areas.iter().map(|a| a.id.clone()).collect(),
            source_centers: areas.iter().map(|a| a.source_center).collect(),
            observed: areas.iter().map(|a| a.observed_rh.values.clone()).collect(),
            sims: areas.iter().map(|a| FootprintSimulator::new(&a.points)).collect(),
            caches: quantum.map(|q| areas.iter().map(|_| SimCache::new(q)).collect()),
            settings,
        })
    }

    pub fn n(&self) -> usize {
        self.observed.len()
    }

    pub fn m(&self) -> usize {
        self.settings.percentiles.len()
    }

    pub fn percentiles(&self) -> &[f64] {
        &self.settings.percentiles
    }

    /// Simulator output for area `i` at `center`.
    pub fn g(&self, i: usize, center: Coord) -> Sim {
        let compute = |c: Coord| self.sims[i].rh_at(c, &self.settings).ok().map(Arc::from);
        match &self.caches {
            Some(caches) => caches[i].get_or_compute(center, compute),
            None => compute(center),
        }
    }

    /// Total number of cached centers across areas.
    pub fn cache_entries(&self) -> usize {
        self.caches
            .as_ref()
            .map(|c| c.iter().map(SimCache::len).sum())
            .unwrap_or(0)
    }
}
