//! Timing and energy of UAV legs and inspections, and the grid weigher
//! built on them.
//!
//! Energy is a stand-in: each UAV burns a constant fraction `1 / endurance`
//! of its budget per second, so a budget of 1 lasts `endurance` seconds.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::dubins::{dubins_shortest, Pose2D};
use crate::error::{Error, Result};
use crate::graph::{CostPair, Vertex, VertexKind, Weigher, Weights};
use crate::instances::grid::{PowerGrid, SEGMENT_PREFIX, TOWER_PREFIX};
use crate::model::{CostType, Worker};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavKind {
    Multirotor,
    Vtol,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavSpec {
    pub id: String,
    pub kind: UavKind,
    pub base: String,
    /// Airspeed between inspections, m/s.
    pub nav_speed: f64,
    /// Airspeed while inspecting, m/s.
    pub insp_speed: f64,
    /// Minimum turning radius in meters; required for VTOLs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turning_radius: Option<f64>,
    /// Seconds of flight that exhaust the normalized budget of 1.
    pub endurance: f64,
}

impl UavSpec {
    pub fn power(&self) -> f64 {
        1.0 / self.endurance
    }
}

/// What is inspected when a vertex is executed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Element {
    /// Full orbit around a tower.
    Tower { orbit_radius: f64 },
    /// One pass along a cable segment.
    Segment { length: f64 },
}

fn check_wind(uav: &UavSpec, speed: f64, wind: [f64; 2]) -> Result<()> {
    if wind[0].hypot(wind[1]) >= speed {
        return Err(Error::Cost(format!("wind exceeds airspeed of {}", uav.id)));
    }
    Ok(())
}

/// Time and energy of flying from `from` to `to` at navigation speed.
///
/// Multirotors fly straight; their ground speed is the airspeed plus the
/// wind component along the leg. VTOLs fly the shortest Dubins path at
/// airspeed, with wind only shaping the takeoff and landing headings.
pub fn transit_cost(uav: &UavSpec, from: Pose2D, to: Pose2D, wind: [f64; 2]) -> Result<(f64, f64)> {
    let v = uav.nav_speed;
    if !(v > 0.0) {
        return Err(Error::Cost(format!("non-positive airspeed of {}", uav.id)));
    }
    check_wind(uav, v, wind)?;
    let time = match uav.kind {
        UavKind::Multirotor => {
            let d = from.distance(&to);
            if d == 0.0 {
                0.0
            } else {
                let (ux, uy) = ((to.x - from.x) / d, (to.y - from.y) / d);
                d / (v + wind[0] * ux + wind[1] * uy)
            }
        }
        UavKind::Vtol => {
            let r = uav
                .turning_radius
                .filter(|r| *r > 0.0)
                .ok_or_else(|| Error::Cost(format!("VTOL {} has no turning radius", uav.id)))?;
            dubins_shortest(from, to, r).length / v
        }
    };
    Ok((time, time * uav.power()))
}

/// Time and energy of inspecting one element.
pub fn inspection_cost(element: Element, uav: &UavSpec) -> (f64, f64) {
    let length = match element {
        Element::Tower { orbit_radius } => TAU * orbit_radius,
        Element::Segment { length } => length,
    };
    let time = length / uav.insp_speed;
    (time, time * uav.power())
}

/// Heading that faces into the wind; `fallback` when there is no wind.
fn into_wind(wind: [f64; 2], fallback: f64) -> f64 {
    if wind[0].hypot(wind[1]) < 1e-9 {
        fallback
    } else {
        wind[1].atan2(wind[0]) + PI
    }
}

#[derive(Clone, Copy, Debug)]
struct Site {
    entry: Pose2D,
    exit: Pose2D,
    element: Option<Element>,
}

/// Weighs edges of a grid instance from its geometry.
pub struct GridWeigher {
    grid: PowerGrid,
    uavs: BTreeMap<String, UavSpec>,
}

impl GridWeigher {
    pub fn new(grid: &PowerGrid) -> Self {
        let uavs = grid.uavs.iter().map(|u| (u.id.clone(), u.clone())).collect();
        GridWeigher { grid: grid.clone(), uavs }
    }

    fn site(&self, v: &Vertex) -> Result<Site> {
        match &v.kind {
            VertexKind::Base(id) => {
                let p = self.grid.base_position(id).ok_or_else(|| Error::Cost(format!("base {id} has no position")))?;
                let pose = Pose2D::new(p[0], p[1], 0.0);
                Ok(Site { entry: pose, exit: pose, element: None })
            }
            VertexKind::Approach(a) => {
                if let Some(id) = a.task.strip_prefix(TOWER_PREFIX) {
                    let t = self.grid.tower(id).ok_or_else(|| Error::Cost(format!("unknown tower {id}")))?;
                    let pose = Pose2D::new(t.position[0], t.position[1], 0.0);
                    let element = Element::Tower { orbit_radius: self.grid.orbit_radius };
                    Ok(Site { entry: pose, exit: pose, element: Some(element) })
                } else if let Some(id) = a.task.strip_prefix(SEGMENT_PREFIX) {
                    let (p, q) = self.grid.segment_ends(id).ok_or_else(|| Error::Cost(format!("unknown segment {id}")))?;
                    let (p, q) = if a.approach == "rev" { (q, p) } else { (p, q) };
                    let h = (q[1] - p[1]).atan2(q[0] - p[0]);
                    let length = (q[0] - p[0]).hypot(q[1] - p[1]);
                    Ok(Site {
                        entry: Pose2D::new(p[0], p[1], h),
                        exit: Pose2D::new(q[0], q[1], h),
                        element: Some(Element::Segment { length }),
                    })
                } else {
                    Err(Error::Cost(format!("task {} is not a grid element", a.task)))
                }
            }
        }
    }
}

impl Weigher for GridWeigher {
    fn weigh(&self, worker: &Worker, from: &Vertex, to: &Vertex) -> Result<Weights> {
        let uav = self.uavs.get(&worker.id).ok_or_else(|| Error::Cost(format!("no UAV spec for {}", worker.id)))?;
        let wind = self.grid.wind;
        let (a, b) = (self.site(from)?, self.site(to)?);
        let mut start = a.exit;
        let mut end = b.entry;
        let bearing = (end.y - start.y).atan2(end.x - start.x);
        if from.is_base() {
            start.heading = Pose2D::new(0.0, 0.0, into_wind(wind, bearing)).heading;
        }
        if to.is_base() {
            end.heading = Pose2D::new(0.0, 0.0, into_wind(wind, bearing)).heading;
        }
        let (t, e) = transit_cost(uav, start, end, wind)?;
        let (et, ee) = b.element.map_or((0.0, 0.0), |el| inspection_cost(el, uav));
        Ok([(CostType::time(), CostPair::new(t, et)), (CostType::energy(), CostPair::new(e, ee))].into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(speed: f64) -> UavSpec {
        UavSpec {
            id: "q".into(),
            kind: UavKind::Multirotor,
            base: "b".into(),
            nav_speed: speed,
            insp_speed: 5.0,
            turning_radius: None,
            endurance: 1000.0,
        }
    }

    #[test]
    fn still_air_leg() {
        let (t, e) = transit_cost(&quad(10.0), Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(100.0, 0.0, 0.0), [0.0, 0.0]).unwrap();
        assert!((t - 10.0).abs() < 1e-12);
        assert!((e - 0.01).abs() < 1e-12);
    }

    #[test]
    fn tailwind_and_headwind() {
        let a = Pose2D::new(0.0, 0.0, 0.0);
        let b = Pose2D::new(100.0, 0.0, 0.0);
        let (tail, _) = transit_cost(&quad(10.0), a, b, [2.0, 0.0]).unwrap();
        let (head, _) = transit_cost(&quad(10.0), b, a, [2.0, 0.0]).unwrap();
        assert!((tail - 100.0 / 12.0).abs() < 1e-12);
        assert!((head - 100.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn strong_wind_is_refused() {
        let err = transit_cost(&quad(3.0), Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(1.0, 0.0, 0.0), [3.0, 0.0]);
        assert!(err.unwrap_err().to_string().contains("wind exceeds airspeed"));
    }

    #[test]
    fn faster_is_quicker() {
        let a = Pose2D::new(0.0, 0.0, 0.0);
        let b = Pose2D::new(30.0, 40.0, 0.0);
        let mut last = f64::INFINITY;
        for s in [4.0, 5.0, 8.0, 13.0] {
            let (t, _) = transit_cost(&quad(s), a, b, [1.0, -2.0]).unwrap();
            assert!(t > 0.0 && t < last);
            last = t;
        }
    }

    #[test]
    fn inspections() {
        let (t, _) = inspection_cost(Element::Tower { orbit_radius: 10.0 }, &quad(10.0));
        assert!((t - 4.0 * PI).abs() < 1e-12);
        assert_eq!(inspection_cost(Element::Segment { length: 0.0 }, &quad(10.0)).0, 0.0);
        let mut fast = quad(10.0);
        fast.insp_speed = 10.0;
        let slow = inspection_cost(Element::Segment { length: 120.0 }, &quad(10.0)).0;
        assert!((inspection_cost(Element::Segment { length: 120.0 }, &fast).0 - slow / 2.0).abs() < 1e-12);
    }
}
