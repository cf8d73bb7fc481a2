//! Link eligibility, link budget and the stable inter-plane connectivity graph.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    build_walker, doppler_shift, los_distance, max_slant_range, ConstellationSpec,
    GeometryConstants, SatelliteState,
};

pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkBudgetParams {
    pub carrier_frequency_hz: f64,
    pub eirpg_dbw: f64,
    pub bandwidth_hz: f64,
    pub noise_temperature_k: f64,
    pub boltzmann_j_per_k: f64,
    pub max_doppler_hz: f64,
}

impl Default for LinkBudgetParams {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 2.4e9,
            eirpg_dbw: 10.0,
            bandwidth_hz: 32e6,
            noise_temperature_k: 290.0,
            boltzmann_j_per_k: BOLTZMANN,
            max_doppler_hz: 60e3,
        }
    }
}

impl LinkBudgetParams {
    /// `eirpg_dbw` is a level in dB and may be any finite value; `max_doppler_hz`
    /// may be zero (no relative motion tolerated).
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.carrier_frequency_hz)
            && pos(self.bandwidth_hz)
            && pos(self.noise_temperature_k)
            && pos(self.boltzmann_j_per_k)
            && self.eirpg_dbw.is_finite()
            && self.max_doppler_hz.is_finite()
            && self.max_doppler_hz >= 0.0)
        {
            return Err(Error::Config(format!(
                "invalid link budget parameters: {self:?}"
            )));
        }
        Ok(())
    }
}

/// How per-timestamp plane adjacency is combined into one edge set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    /// Edge kept only if an eligible pair exists at every sampled timestamp.
    #[default]
    Every,
    /// Edge kept if an eligible pair exists at some sampled timestamp.
    Any,
}

pub fn is_eligible_pair(
    u: &SatelliteState,
    v: &SatelliteState,
    params: &LinkBudgetParams,
    constants: &GeometryConstants,
) -> bool {
    let d = los_distance(u, v, constants);
    if d > max_slant_range(u.altitude_km, v.altitude_km, constants.earth_radius_km) {
        return false;
    }
    match doppler_shift(u, v, params.carrier_frequency_hz, constants) {
        Ok(f) => f <= params.max_doppler_hz,
        Err(_) => false,
    }
}

/// Free-space path loss (linear) over `distance_km` at `carrier_hz`.
pub fn free_space_path_loss(
    distance_km: f64,
    carrier_hz: f64,
    light_speed_km_s: f64,
) -> Result<f64> {
    if !(distance_km.is_finite() && distance_km > 0.0) {
        return Err(Error::Invalid(format!(
            "path loss needs a positive distance, got {distance_km} km"
        )));
    }
    let x = 4.0 * std::f64::consts::PI * distance_km * carrier_hz / light_speed_km_s;
    Ok(x * x)
}

/// Linear SNR of a link of length `distance_km`.
pub fn link_snr_linear(
    distance_km: f64,
    params: &LinkBudgetParams,
    constants: &GeometryConstants,
) -> Result<f64> {
    let loss = free_space_path_loss(
        distance_km,
        params.carrier_frequency_hz,
        constants.light_speed_km_s,
    )?;
    let eirpg = 10f64.powf(params.eirpg_dbw / 10.0);
    let noise = params.boltzmann_j_per_k * params.noise_temperature_k * params.bandwidth_hz;
    Ok(eirpg / (noise * loss))
}

pub fn link_snr_db(
    distance_km: f64,
    params: &LinkBudgetParams,
    constants: &GeometryConstants,
) -> Result<f64> {
    Ok(10.0 * link_snr_linear(distance_km, params, constants)?.log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    /// Mean linear SNR over every eligible (pair, timestamp) sample.
    pub xi: f64,
    pub weight: f64,
    /// Number of eligible pairs seen at each sampled timestamp.
    #[serde(default)]
    pub eligible_pairs: Vec<usize>,
}

/// Weighted undirected graph over orbit planes; edges are sorted by `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterPlaneGraph {
    pub vertices: usize,
    pub edges: Vec<GraphEdge>,
    pub xi_tilde: f64,
}

impl InterPlaneGraph {
    /// Builds a graph from `(a, b, ξ)` triples, assigning `w = ξ̃ + 1/ξ`.
    pub fn from_quality(vertices: usize, quality: &[(usize, usize, f64)]) -> Result<Self> {
        let mut edges: Vec<GraphEdge> = Vec::with_capacity(quality.len());
        for &(a, b, xi) in quality {
            if a == b || a >= vertices || b >= vertices {
                return Err(Error::Invalid(format!(
                    "bad edge ({a}, {b}) for {vertices} vertices"
                )));
            }
            if !(xi.is_finite() && xi > 0.0) {
                return Err(Error::Invalid(format!("edge ({a}, {b}) has quality {xi}")));
            }
            edges.push(GraphEdge {
                a: a.min(b),
                b: a.max(b),
                xi,
                weight: 0.0,
                eligible_pairs: Vec::new(),
            });
        }
        edges.sort_by_key(|e| (e.a, e.b));
        if edges
            .windows(2)
            .any(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b))
        {
            return Err(Error::Invalid("duplicate edge".into()));
        }
        let mut g = Self {
            vertices,
            edges,
            xi_tilde: 0.0,
        };
        g.assign_weights();
        Ok(g)
    }

    /// Graph with explicit weights (no link-quality semantics), e.g. unit weights.
    pub fn from_weights(vertices: usize, weighted: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::from_quality(
            vertices,
            &weighted
                .iter()
                .map(|&(a, b, _)| (a, b, 1.0))
                .collect::<Vec<_>>(),
        )?;
        for &(a, b, w) in weighted {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Invalid(format!("edge ({a}, {b}) has weight {w}")));
            }
            let idx = g.edge_index(a, b).expect("edge inserted above");
            g.edges[idx].weight = w;
        }
        g.xi_tilde = 0.0;
        Ok(g)
    }

    fn assign_weights(&mut self) {
        self.xi_tilde = self.edges.iter().map(|e| 1.0 / e.xi).sum();
        for e in &mut self.edges {
            e.weight = self.xi_tilde + 1.0 / e.xi;
        }
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search_by_key(&key, |e| (e.a, e.b)).ok()
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.edge_index(a, b).map(|i| self.edges[i].weight)
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        adj
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.vertices];
        let mut out = Vec::new();
        for start in 0..self.vertices {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                for &(w, _) in &adj[comp[i]] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.vertices <= 1 || self.components().len() == 1
    }

    pub fn ensure_connected(&self) -> Result<()> {
        if self.vertices == 0 {
            return Err(Error::Infeasible("graph has no vertices".into()));
        }
        let comps = self.components();
        if comps.len() > 1 {
            return Err(Error::Disconnected { components: comps });
        }
        Ok(())
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph interplane {\n");
        for v in 0..self.vertices {
            let _ = writeln!(out, "  p{v};");
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  p{} -- p{} [xi=\"{:e}\", weight=\"{:e}\"];",
                e.a, e.b, e.xi, e.weight
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    /// Parses and validates a graph document; never panics on malformed input.
    pub fn from_json(text: &str) -> Result<Self> {
        let g: InterPlaneGraph = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices > MAX_PLANES {
            return Err(Error::Invalid(format!(
                "{} vertices exceeds the supported {MAX_PLANES}",
                self.vertices
            )));
        }
        let mut prev: Option<(usize, usize)> = None;
        for e in &self.edges {
            if e.a >= e.b || e.b >= self.vertices {
                return Err(Error::Invalid(format!("bad edge ({}, {})", e.a, e.b)));
            }
            if prev.is_some_and(|p| p >= (e.a, e.b)) {
                return Err(Error::Invalid("edges must be sorted and unique".into()));
            }
            prev = Some((e.a, e.b));
            if !(e.weight.is_finite() && e.weight > 0.0) || !(e.xi.is_finite() && e.xi > 0.0) {
                return Err(Error::Invalid(format!(
                    "edge ({}, {}) needs positive xi and weight",
                    e.a, e.b
                )));
            }
        }
        Ok(())
    }
}

/// Upper bound on plane count accepted from external documents.
pub const MAX_PLANES: usize = 1024;

/// Builds the stable inter-plane graph sampled at `timestamps`.
///
/// Errors with [`Error::Disconnected`] when the planes do not form one component.
pub fn build_interplane_graph(
    spec: &ConstellationSpec,
    constants: &GeometryConstants,
    timestamps: &[f64],
    params: &LinkBudgetParams,
    stability: Stability,
) -> Result<InterPlaneGraph> {
    spec.validate()?;
    params.validate()?;
    if timestamps.is_empty() {
        return Err(Error::Config(
            "connectivity needs at least one timestamp".into(),
        ));
    }
    let planes = spec.planes;
    let pair_count = planes * planes.saturating_sub(1) / 2;

    // Per timestamp: for each plane pair, (eligible count, summed linear SNR).
    let per_time: Vec<Vec<(usize, f64)>> = timestamps
        .par_iter()
        .map(|&t| -> Result<Vec<(usize, f64)>> {
            let states = build_walker(spec, constants, t)?;
            let mut acc = vec![(0usize, 0.0f64); pair_count];
            for (x, u) in states.iter().enumerate() {
                for v in &states[x + 1..] {
                    if u.plane == v.plane || !is_eligible_pair(u, v, params, constants) {
                        continue;
                    }
                    let snr = link_snr_linear(los_distance(u, v, constants), params, constants)?;
                    let slot = &mut acc[pair_slot(u.plane, v.plane, planes)];
                    slot.0 += 1;
                    slot.1 += snr;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut quality = Vec::new();
    let mut counts = Vec::new();
    for a in 0..planes {
        for b in a + 1..planes {
            let idx = pair_slot(a, b, planes);
            let seen: Vec<usize> = per_time.iter().map(|row| row[idx].0).collect();
            let keep = match stability {
                Stability::Every => seen.iter().all(|&c| c > 0),
                Stability::Any => seen.iter().any(|&c| c > 0),
            };
            if !keep {
                continue;
            }
            let total: usize = seen.iter().sum();
            let snr_sum: f64 = per_time.iter().map(|row| row[idx].1).sum();
            quality.push((a, b, snr_sum / total as f64));
            counts.push(seen);
        }
    }
    let mut graph = InterPlaneGraph::from_quality(planes, &quality)?;
    for (edge, seen) in graph.edges.iter_mut().zip(counts) {
        edge.eligible_pairs = seen;
    }
    graph.ensure_connected()?;
    Ok(graph)
}

fn pair_slot(a: usize, b: usize, n: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    a * n - a * (a + 1) / 2 + (b - a - 1)
}
