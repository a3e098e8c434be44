use serde::{Deserialize, Serialize};

/// Side length of a focal area's square buffer, in meters.
pub const FOCAL_WIDTH: f64 = 70.0;
/// Half of [`FOCAL_WIDTH`].
pub const HALF_WIDTH: f64 = 35.0;
/// Every reported footprint center maps here in the local frame.
pub const LOCAL_CENTER: Coord = Coord { x: 35.0, y: 35.0 };
/// Maximum distance of a candidate location from the reported center:
/// 10 m nominal geolocation error plus the 12.5 m footprint radius.
pub const SEARCH_BOUND: f64 = 22.5;

/// A planar coordinate pair (easting, northing) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Coord {
    pub x: f64,
    pub y: f64,
}

impl Coord {
    pub const fn new(x: f64, y: f64) -> Self {
        Coord { x, y }
    }

    pub fn dist(self, other: Coord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist2(self, other: Coord) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl std::ops::Add for Coord {
    type Output = Coord;
    fn add(self, o: Coord) -> Coord {
        Coord::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Coord {
    type Output = Coord;
    fn sub(self, o: Coord) -> Coord {
        Coord::new(self.x - o.x, self.y - o.y)
    }
}

/// True when `c` lies within `bound` meters (inclusive) of [`LOCAL_CENTER`].
pub fn within_bound(c: Coord, bound: f64) -> bool {
    c.x.is_finite() && c.y.is_finite() && c.dist2(LOCAL_CENTER) <= bound * bound
}
