//! Shortest paths of bounded curvature between oriented planar poses.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Radians in [0, 2π).
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2D { x, y, heading: mod2pi(heading) }
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DubinsWord {
    LSL,
    RSR,
    LSR,
    RSL,
    RLR,
    LRL,
}

impl DubinsWord {
    /// Tie-break order.
    pub const ALL: [DubinsWord; 6] =
        [DubinsWord::LSL, DubinsWord::RSR, DubinsWord::LSR, DubinsWord::RSL, DubinsWord::RLR, DubinsWord::LRL];

    /// Segment kinds: +1 left turn, -1 right turn, 0 straight.
    pub fn segments(self) -> [i8; 3] {
        match self {
            DubinsWord::LSL => [1, 0, 1],
            DubinsWord::RSR => [-1, 0, -1],
            DubinsWord::LSR => [1, 0, -1],
            DubinsWord::RSL => [-1, 0, 1],
            DubinsWord::RLR => [-1, 1, -1],
            DubinsWord::LRL => [1, -1, 1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath {
    pub start: Pose2D,
    pub word: DubinsWord,
    /// Segment lengths normalized by the radius: arc angles in radians,
    /// straight length in radii.
    pub params: [f64; 3],
    pub radius: f64,
    pub length: f64,
}

impl DubinsPath {
    /// Pose after travelling `s` meters along the path.
    pub fn sample(&self, s: f64) -> Pose2D {
        let mut pose = self.start;
        let mut left = s.clamp(0.0, self.length) / self.radius;
        for (kind, &seg) in self.word.segments().iter().zip(&self.params) {
            let step = left.min(seg);
            pose = advance(pose, *kind, step, self.radius);
            left -= step;
            if left <= 0.0 {
                break;
            }
        }
        pose
    }

    pub fn end(&self) -> Pose2D {
        self.sample(self.length)
    }
}

/// Moves `pose` by `t` radii along a segment of the given kind.
fn advance(p: Pose2D, kind: i8, t: f64, r: f64) -> Pose2D {
    let h = p.heading;
    match kind {
        0 => Pose2D::new(p.x + r * t * h.cos(), p.y + r * t * h.sin(), h),
        1 => Pose2D::new(p.x + r * ((h + t).sin() - h.sin()), p.y - r * ((h + t).cos() - h.cos()), h + t),
        _ => Pose2D::new(p.x - r * ((h - t).sin() - h.sin()), p.y + r * ((h - t).cos() - h.cos()), h - t),
    }
}

pub fn mod2pi(a: f64) -> f64 {
    let m = a.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if m >= TAU - 1e-12 {
        0.0
    } else {
        m
    }
}

/// Normalized-frame parameters of one word, or `None` when it does not exist.
fn word_params(word: DubinsWord, alpha: f64, beta: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, sb, ca, cb) = (alpha.sin(), beta.sin(), alpha.cos(), beta.cos());
    let cab = (alpha - beta).cos();
    match word {
        DubinsWord::LSL => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (cb - ca).atan2(d + sa - sb);
            Some([mod2pi(tmp - alpha), p2.sqrt(), mod2pi(beta - tmp)])
        }
        DubinsWord::RSR => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (ca - cb).atan2(d - sa + sb);
            Some([mod2pi(alpha - tmp), p2.sqrt(), mod2pi(tmp - beta)])
        }
        DubinsWord::LSR => {
            let p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(tmp - alpha), p, mod2pi(tmp - beta)])
        }
        DubinsWord::RSL => {
            let p2 = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(alpha - tmp), p, mod2pi(beta - tmp)])
        }
        DubinsWord::RLR => {
            let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
            if c.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - c.acos());
            let t = mod2pi(alpha - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, mod2pi(alpha - beta - t + p)])
        }
        DubinsWord::LRL => {
            let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
            if c.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - c.acos());
            let t = mod2pi(-alpha - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, mod2pi(beta - alpha - t + p)])
        }
    }
}

/// Path of `word` from `start` to `end`, if that word is feasible.
pub fn dubins_word(start: Pose2D, end: Pose2D, r: f64, word: DubinsWord) -> Option<DubinsPath> {
    let (dx, dy) = (end.x - start.x, end.y - start.y);
    let d = dx.hypot(dy) / r;
    let phi = if d > 0.0 { dy.atan2(dx) } else { 0.0 };
    let alpha = mod2pi(start.heading - phi);
    let beta = mod2pi(end.heading - phi);
    word_params(word, alpha, beta, d).map(|params| DubinsPath {
        start,
        word,
        params,
        radius: r,
        length: r * params.iter().sum::<f64>(),
    })
}

/// Shortest of the six candidate words; exact ties go to the earlier word.
pub fn dubins_shortest(start: Pose2D, end: Pose2D, r: f64) -> DubinsPath {
    assert!(r > 0.0, "turning radius must be positive");
    if start.distance(&end) == 0.0 && heading_gap(start.heading, end.heading) == 0.0 {
        return DubinsPath { start, word: DubinsWord::LSL, params: [0.0; 3], radius: r, length: 0.0 };
    }
    let mut best: Option<DubinsPath> = None;
    for word in DubinsWord::ALL {
        if let Some(p) = dubins_word(start, end, r, word) {
            if best.as_ref().map_or(true, |b| p.length < b.length) {
                best = Some(p);
            }
        }
    }
    // LSL and RSR always exist when the poses differ.
    best.expect("no Dubins word admissible")
}

fn heading_gap(a: f64, b: f64) -> f64 {
    let g = mod2pi(a - b);
    g.min(TAU - g)
}
