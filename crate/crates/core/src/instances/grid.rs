//! Power-grid inspection instances: towers, cable segments, UAV teams.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::costmodels::{GridWeigher, UavKind, UavSpec};
use crate::error::{Error, Result};
use crate::model::*;
use crate::routes::Plan;

pub const TOWER_PREFIX: &str = "tower_";
pub const SEGMENT_PREFIX: &str = "seg_";

fn default_orbit() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub id: String,
    /// Meters, planar.
    pub position: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerGrid {
    pub towers: Vec<Tower>,
    pub segments: Vec<Segment>,
    pub bases: Vec<Base>,
    pub uavs: Vec<UavSpec>,
    /// m/s, the direction the air moves towards.
    pub wind: [f64; 2],
    #[serde(default = "default_orbit")]
    pub orbit_radius: f64,
    /// Longitude and latitude of the local origin, used for GeoJSON output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
}

impl PowerGrid {
    pub fn tower(&self, id: &str) -> Option<&Tower> {
        self.towers.iter().find(|t| t.id == id)
    }

    pub fn segment_ends(&self, id: &str) -> Option<([f64; 2], [f64; 2])> {
        let s = self.segments.iter().find(|s| s.id == id)?;
        Some((self.tower(&s.from)?.position, self.tower(&s.to)?.position))
    }

    pub fn base_position(&self, id: &str) -> Option<[f64; 2]> {
        self.bases.iter().find(|b| b.id == id)?.position
    }

    /// Structural problems, empty when the grid is usable.
    pub fn defects(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.segments {
            for end in [&s.from, &s.to] {
                if self.tower(end).is_none() {
                    out.push(format!("segment {} references unknown tower {end}", s.id));
                }
            }
        }
        let wind = self.wind[0].hypot(self.wind[1]);
        for u in &self.uavs {
            if !(u.nav_speed > 0.0 && u.insp_speed > 0.0 && u.endurance > 0.0) {
                out.push(format!("UAV {} needs positive speeds and endurance", u.id));
            }
            if wind >= u.nav_speed.min(u.insp_speed) {
                out.push(format!("wind exceeds airspeed of {}", u.id));
            }
            if u.kind == UavKind::Vtol && !u.turning_radius.is_some_and(|r| r > 0.0) {
                out.push(format!("VTOL {} has no turning radius", u.id));
            }
            if self.base_position(&u.base).is_none() {
                out.push(format!("UAV {} has no positioned base {}", u.id, u.base));
            }
        }
        if !(self.orbit_radius > 0.0) {
            out.push("orbit radius must be positive".into());
        }
        out
    }
}

/// Which towers and segments to inspect.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Selection {
    pub towers: Vec<String>,
    pub segments: Vec<String>,
}

impl Selection {
    pub fn all(g: &PowerGrid) -> Self {
        Selection {
            towers: g.towers.iter().map(|t| t.id.clone()).collect(),
            segments: g.segments.iter().map(|s| s.id.clone()).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.towers.is_empty() && self.segments.is_empty()
    }
}

/// One orbit task per tower, one two-direction task per segment. VTOLs
/// never get tower tasks. Energy budgets are switched on.
pub fn grid_to_instance(g: &PowerGrid, sel: &Selection) -> Result<(ProblemInstance, GridWeigher)> {
    if sel.is_empty() {
        return Err(Error::Instance("empty grid selection".into()));
    }
    let defects = g.defects();
    if !defects.is_empty() {
        return Err(Error::Instance(defects.join("; ")));
    }
    let mut tasks = Vec::new();
    for id in &sel.towers {
        if g.tower(id).is_none() {
            return Err(Error::Instance(format!("unknown tower {id}")));
        }
        tasks.push(Task { id: format!("{TOWER_PREFIX}{id}"), approaches: vec![Approach::named("orbit")], mandatory: true });
    }
    for id in &sel.segments {
        if g.segment_ends(id).is_none() {
            return Err(Error::Instance(format!("unknown segment {id}")));
        }
        tasks.push(Task {
            id: format!("{SEGMENT_PREFIX}{id}"),
            approaches: vec![Approach::named("fwd"), Approach::named("rev")],
            mandatory: true,
        });
    }
    let workers = g
        .uavs
        .iter()
        .map(|u| {
            let compatibility: BTreeSet<ApproachRef> = tasks
                .iter()
                .filter(|t| u.kind == UavKind::Multirotor || t.id.starts_with(SEGMENT_PREFIX))
                .flat_map(|t| t.approaches.iter().map(|a| ApproachRef::new(&t.id, &a.id)))
                .collect();
            Worker { id: u.id.clone(), base: u.base.clone(), compatibility, params: Default::default() }
        })
        .collect();
    let inst = ProblemInstance {
        name: "grid".into(),
        cost_types: vec![CostType::time(), CostType::energy()],
        bases: g.bases.clone(),
        tasks,
        workers,
        order: vec![],
        precedence: vec![],
        windows: vec![],
        waiting: false,
        energy_budget: true,
        costs: CostSpec::Grid { grid: g.clone() },
        seed: None,
    };
    Ok((inst, GridWeigher::new(g)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridParams {
    pub towers: usize,
    pub segments: usize,
    pub multirotors: usize,
    pub vtols: usize,
    /// Upper bound of the uniformly drawn wind speed, m/s.
    pub max_wind: f64,
    pub seed: u64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { towers: 6, segments: 5, multirotors: 2, vtols: 0, max_wind: 5.0, seed: 0 }
    }
}

/// A branchy synthetic line network: towers grow from the base as a random
/// tree whose edges are the candidate cable segments.
pub fn gen_grid(p: &GridParams) -> Result<PowerGrid> {
    if p.towers == 0 && p.segments == 0 {
        return Err(Error::Instance("empty grid selection: no towers and no segments".into()));
    }
    if p.segments >= p.towers.max(1) {
        return Err(Error::Instance(format!("{} towers support at most {} segments", p.towers, p.towers.saturating_sub(1))));
    }
    if p.multirotors + p.vtols == 0 {
        return Err(Error::Instance("grid needs at least one UAV".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let width = p.towers.to_string().len().max(2);
    let tid = |i: usize| format!("{:0width$}", i + 1);

    let mut pos: Vec<[f64; 2]> = Vec::new();
    let mut heading: Vec<f64> = Vec::new();
    let mut parent: Vec<usize> = Vec::new();
    for i in 0..p.towers {
        if i == 0 {
            let h = rng.gen_range(0.0..TAU);
            let d = rng.gen_range(100.0..250.0);
            pos.push([d * h.cos(), d * h.sin()]);
            heading.push(h);
            parent.push(0);
            continue;
        }
        let (from, h) = if rng.gen_bool(0.7) {
            (i - 1, heading[i - 1] + rng.gen_range(-0.35..0.35))
        } else {
            let j = rng.gen_range(0..i);
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (j, heading[j] + side * rng.gen_range(PI / 3.0..FRAC_PI_2))
        };
        let d = rng.gen_range(150.0..300.0);
        pos.push([pos[from][0] + d * h.cos(), pos[from][1] + d * h.sin()]);
        heading.push(h);
        parent.push(from);
    }
    let round = |v: f64| (v * 100.0).round() / 100.0;
    let towers = pos.iter().enumerate().map(|(i, q)| Tower { id: tid(i), position: [round(q[0]), round(q[1])] }).collect();
    let segments = (1..=p.segments)
        .map(|i| Segment { id: format!("{:0width$}", i), from: tid(parent[i]), to: tid(i) })
        .collect();

    let wh = rng.gen_range(0.0..TAU);
    let ws = rng.gen_range(0.0..=p.max_wind);
    let mut uavs = Vec::new();
    for k in 0..p.multirotors {
        uavs.push(UavSpec {
            id: format!("mr{}", k + 1),
            kind: UavKind::Multirotor,
            base: "base".into(),
            nav_speed: 12.0,
            insp_speed: 6.0,
            turning_radius: None,
            endurance: 1800.0,
        });
    }
    for k in 0..p.vtols {
        uavs.push(UavSpec {
            id: format!("vt{}", k + 1),
            kind: UavKind::Vtol,
            base: "base".into(),
            nav_speed: 20.0,
            insp_speed: 16.0,
            turning_radius: Some(60.0),
            endurance: 5400.0,
        });
    }
    Ok(PowerGrid {
        towers,
        segments,
        bases: vec![Base { id: "base".into(), site: None, position: Some([0.0, 0.0]) }],
        uavs,
        wind: [round(ws * wh.cos()), round(ws * wh.sin())],
        orbit_radius: 10.0,
        origin: None,
    })
}

/// Four towers at similar distances from the base, five identical
/// multirotors and a sixth that is half as fast in every respect.
pub fn toomany() -> PowerGrid {
    let quad = |id: &str, nav: f64, insp: f64| UavSpec {
        id: id.into(),
        kind: UavKind::Multirotor,
        base: "base".into(),
        nav_speed: nav,
        insp_speed: insp,
        turning_radius: None,
        endurance: 3600.0,
    };
    let mut uavs: Vec<UavSpec> = (1..=5).map(|k| quad(&format!("fast{k}"), 10.0, 5.0)).collect();
    uavs.push(quad("slow", 5.0, 2.5));
    let towers = [[200.0, 0.0], [0.0, 210.0], [-190.0, 0.0], [0.0, -205.0]]
        .iter()
        .enumerate()
        .map(|(i, p)| Tower { id: format!("{}", i + 1), position: *p })
        .collect();
    PowerGrid {
        towers,
        segments: vec![],
        bases: vec![Base { id: "base".into(), site: None, position: Some([0.0, 0.0]) }],
        uavs,
        wind: [0.0, 0.0],
        orbit_radius: 10.0,
        origin: None,
    }
}

const EARTH_RADIUS: f64 = 6_371_000.0;

fn coord(g: &PowerGrid, p: [f64; 2]) -> Value {
    match g.origin {
        Some([lon0, lat0]) => {
            let lat = lat0 + (p[1] / EARTH_RADIUS).to_degrees();
            let lon = lon0 + (p[0] / (EARTH_RADIUS * lat0.to_radians().cos())).to_degrees();
            json!([lon, lat])
        }
        None => json!([p[0], p[1]]),
    }
}

/// Towers, segments and bases as a GeoJSON feature collection. Without an
/// origin the coordinates stay in local meters.
pub fn grid_geojson(g: &PowerGrid) -> Value {
    let mut features = Vec::new();
    for b in &g.bases {
        if let Some(p) = b.position {
            features.push(json!({"type": "Feature", "geometry": {"type": "Point", "coordinates": coord(g, p)},
                "properties": {"kind": "base", "id": b.id}}));
        }
    }
    for t in &g.towers {
        features.push(json!({"type": "Feature", "geometry": {"type": "Point", "coordinates": coord(g, t.position)},
            "properties": {"kind": "tower", "id": t.id}}));
    }
    for s in &g.segments {
        if let Some((a, b)) = g.segment_ends(&s.id) {
            features.push(json!({"type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [coord(g, a), coord(g, b)]},
                "properties": {"kind": "segment", "id": s.id}}));
        }
    }
    json!({"type": "FeatureCollection", "features": features})
}

/// Each active worker's route as a LineString through base, inspection
/// entry and exit points, and back.
pub fn routes_geojson(g: &PowerGrid, plan: &Plan) -> Value {
    let mut features = Vec::new();
    for wp in plan.workers.iter().filter(|w| w.active) {
        let mut pts = Vec::new();
        for stop in &wp.route {
            match (&stop.task, &stop.approach) {
                (Some(task), Some(app)) => {
                    if let Some(id) = task.strip_prefix(TOWER_PREFIX) {
                        if let Some(t) = g.tower(id) {
                            pts.push(coord(g, t.position));
                        }
                    } else if let Some(id) = task.strip_prefix(SEGMENT_PREFIX) {
                        if let Some((a, b)) = g.segment_ends(id) {
                            let (a, b) = if app == "rev" { (b, a) } else { (a, b) };
                            pts.push(coord(g, a));
                            pts.push(coord(g, b));
                        }
                    }
                }
                _ => {
                    if let Some(p) = g.base_position(&stop.vertex) {
                        pts.push(coord(g, p));
                    }
                }
            }
        }
        features.push(json!({"type": "Feature", "geometry": {"type": "LineString", "coordinates": pts},
            "properties": {"kind": "route", "worker": wp.worker, "time": wp.time, "energy": wp.energy, "wait": wp.wait}}));
    }
    json!({"type": "FeatureCollection", "features": features})
}
