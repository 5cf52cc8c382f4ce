//! Waypoint tracks: geometry, progress measurement, and the on-disk format.
//!
//! A track is an ordered open polyline of waypoints with a corridor width.
//! Progress along the track is measured by projecting the car position onto
//! the polyline and reading off arc-length; a waypoint counts as passed once
//! the (high-water) projected arc-length strictly exceeds the waypoint's own
//! arc-length (the final waypoint, where the projection saturates, counts at
//! equality). Projection is windowed around the current progress so that on
//! closed courses the stretch near the finish cannot capture a car that is
//! still near the start.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// How far behind / ahead of the current progress the projection window
/// reaches, in meters. The car moves well under a meter per physics substep,
/// so these bounds are generous while still excluding far-away track pieces.
const WINDOW_BACK: f64 = 5.0;
const WINDOW_AHEAD: f64 = 15.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TrackSpec {
    pub waypoints: Vec<(f64, f64)>,
    pub corridor_half_width: f64,
    /// `(x, y, heading)`; derived as "at the first waypoint, facing the
    /// second" when built through [`TrackSpec::new`] or parsed from a file.
    pub start_pose: (f64, f64, f64),
    pub inner_dt: f64,
    /// Cumulative arc-length of each waypoint along the polyline; `arcs[0]`
    /// is 0 and `arcs[n-1]` is the total length.
    arcs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrackError {
    TooFewWaypoints,
    DuplicateWaypoint { index: usize },
    NonPositiveCorridor,
    NonPositiveInnerDt,
    BadHeader,
    BadLine { line: usize },
}

impl fmt::Display for TrackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackError::TooFewWaypoints => write!(f, "track needs at least 2 waypoints"),
            TrackError::DuplicateWaypoint { index } => {
                write!(f, "waypoints {} and {} coincide", index - 1, index)
            }
            TrackError::NonPositiveCorridor => write!(f, "corridor_half_width must be > 0"),
            TrackError::NonPositiveInnerDt => write!(f, "inner_dt must be > 0"),
            TrackError::BadHeader => {
                write!(f, "track file must start with \"track-v1 <corridor_half_width> <inner_dt>\"")
            }
            TrackError::BadLine { line } => write!(f, "track file line {line}: expected \"x y\""),
        }
    }
}

impl core::error::Error for TrackError {}

/// Result of projecting a point onto the (windowed) polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Arc-length of the nearest polyline point.
    pub arc: f64,
    /// Euclidean distance to that point.
    pub distance: f64,
    /// Signed lateral offset: positive on the left of the path direction.
    pub lateral: f64,
}

impl TrackSpec {
    pub fn new(
        waypoints: Vec<(f64, f64)>,
        corridor_half_width: f64,
        inner_dt: f64,
    ) -> Result<Self, TrackError> {
        if waypoints.len() < 2 {
            return Err(TrackError::TooFewWaypoints);
        }
        if !(corridor_half_width > 0.0) {
            return Err(TrackError::NonPositiveCorridor);
        }
        if !(inner_dt > 0.0) {
            return Err(TrackError::NonPositiveInnerDt);
        }
        let mut arcs = Vec::with_capacity(waypoints.len());
        arcs.push(0.0);
        for i in 1..waypoints.len() {
            let (ax, ay) = waypoints[i - 1];
            let (bx, by) = waypoints[i];
            let len = crate::math::sqrt((bx - ax) * (bx - ax) + (by - ay) * (by - ay));
            if len == 0.0 {
                return Err(TrackError::DuplicateWaypoint { index: i });
            }
            arcs.push(arcs[i - 1] + len);
        }
        let (x0, y0) = waypoints[0];
        let (x1, y1) = waypoints[1];
        let heading = crate::math::atan2(y1 - y0, x1 - x0);
        Ok(TrackSpec {
            waypoints,
            corridor_half_width,
            start_pose: (x0, y0, heading),
            inner_dt,
            arcs,
        })
    }

    pub fn waypoint_count(&self) -> usize {
        self.waypoints.len()
    }

    pub fn waypoint_arc(&self, i: usize) -> f64 {
        self.arcs[i]
    }

    pub fn total_length(&self) -> f64 {
        self.arcs[self.arcs.len() - 1]
    }

    /// Point on the polyline at arc-length `arc` (clamped to the ends),
    /// heading along the segment it falls on.
    pub fn pose_at(&self, arc: f64) -> (f64, f64, f64) {
        let arc = arc.clamp(0.0, self.total_length());
        let mut seg = self.waypoints.len() - 2;
        for i in 0..self.waypoints.len() - 1 {
            if arc <= self.arcs[i + 1] {
                seg = i;
                break;
            }
        }
        let (ax, ay) = self.waypoints[seg];
        let (bx, by) = self.waypoints[seg + 1];
        let t = (arc - self.arcs[seg]) / (self.arcs[seg + 1] - self.arcs[seg]);
        let heading = crate::math::atan2(by - ay, bx - ax);
        (ax + t * (bx - ax), ay + t * (by - ay), heading)
    }

    /// First waypoint whose arc-length strictly exceeds `arc`; the last
    /// waypoint once none remain. This is what "next waypoint" means for the
    /// observation features.
    pub fn target_index(&self, arc: f64) -> usize {
        for (i, &a) in self.arcs.iter().enumerate() {
            if a > arc {
                return i;
            }
        }
        self.waypoints.len() - 1
    }

    /// Nearest point on the polyline restricted to segments whose arc range
    /// intersects `[hint - 5 m, hint + 15 m]`. Ties (equal squared distance)
    /// resolve to the earlier segment. `hint` is the caller's current
    /// progress; the window keeps spatially-near but path-far pieces of a
    /// closed course from capturing the projection.
    pub fn project(&self, x: f64, y: f64, hint: f64) -> Projection {
        let lo = hint - WINDOW_BACK;
        let hi = hint + WINDOW_AHEAD;
        let mut best: Option<(f64, f64, f64)> = None; // (dist2, arc, lateral)
        for seg in 0..self.waypoints.len() - 1 {
            if self.arcs[seg + 1] < lo || self.arcs[seg] > hi {
                continue;
            }
            let (ax, ay) = self.waypoints[seg];
            let (bx, by) = self.waypoints[seg + 1];
            let (sx, sy) = (bx - ax, by - ay);
            let seg_len = self.arcs[seg + 1] - self.arcs[seg];
            let t = ((x - ax) * sx + (y - ay) * sy) / (seg_len * seg_len);
            let t = t.clamp(0.0, 1.0);
            let (px, py) = (ax + t * sx, ay + t * sy);
            let (dx, dy) = (x - px, y - py);
            let dist2 = dx * dx + dy * dy;
            let closer = match best {
                None => true,
                Some((bd, _, _)) => dist2 < bd,
            };
            if closer {
                // Cross product of segment direction with the offset gives
                // the side: > 0 left of travel direction.
                let cross = sx * dy - sy * dx;
                let lateral = if cross >= 0.0 {
                    crate::math::sqrt(dist2)
                } else {
                    -crate::math::sqrt(dist2)
                };
                best = Some((dist2, self.arcs[seg] + t * seg_len, lateral));
            }
        }
        let (dist2, arc, lateral) = best.expect("projection window always covers >= 1 segment");
        Projection { arc, distance: crate::math::sqrt(dist2), lateral }
    }

    /// Plain-text encoding: `track-v1 <corridor_half_width> <inner_dt>`
    /// header, then one `x y` line per waypoint. Floats use shortest
    /// round-trip formatting, so parse(encode(t)) == t.
    pub fn encode(&self) -> String {
        let mut out = alloc::format!("track-v1 {} {}\n", self.corridor_half_width, self.inner_dt);
        for (x, y) in &self.waypoints {
            out.push_str(&alloc::format!("{x} {y}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TrackError> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                None => return Err(TrackError::BadHeader),
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) => break l,
            }
        };
        let mut parts = header.split_whitespace();
        if parts.next() != Some("track-v1") {
            return Err(TrackError::BadHeader);
        }
        let chw: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or(TrackError::BadHeader)?;
        let inner_dt: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or(TrackError::BadHeader)?;
        if parts.next().is_some() {
            return Err(TrackError::BadHeader);
        }
        let mut waypoints = Vec::new();
        for (idx, l) in lines {
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            let mut nums = l.split_whitespace();
            let x: f64 = nums
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or(TrackError::BadLine { line: idx + 1 })?;
            let y: f64 = nums
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or(TrackError::BadLine { line: idx + 1 })?;
            if nums.next().is_some() {
                return Err(TrackError::BadLine { line: idx + 1 });
            }
            waypoints.push((x, y));
        }
        TrackSpec::new(waypoints, chw, inner_dt)
    }

    /// The default benchmark course: a stadium with two 60 m straights and
    /// two 180-degree turns of radius 15 m, 20 waypoints evenly spaced by
    /// arc-length, 6 m corridor half-width. Long straights reward slow
    /// control rates; the turns demand fast ones.
    pub fn stadium() -> TrackSpec {
        const STRAIGHT: f64 = 60.0;
        const RADIUS: f64 = 15.0;
        const N: usize = 20;
        let half_circ = core::f64::consts::PI * RADIUS;
        let perimeter = 2.0 * STRAIGHT + 2.0 * half_circ;
        // N evenly spaced waypoints plus an explicit closing point back at
        // the start, so a full lap is the success condition.
        let mut waypoints = Vec::with_capacity(N + 1);
        for k in 0..N {
            let s = perimeter * k as f64 / N as f64;
            let p = if s < STRAIGHT {
                (s, 0.0)
            } else if s < STRAIGHT + half_circ {
                let phi = (s - STRAIGHT) / RADIUS; // 0..pi around (60, 15)
                (
                    STRAIGHT + RADIUS * crate::math::sin(phi),
                    RADIUS - RADIUS * crate::math::cos(phi),
                )
            } else if s < 2.0 * STRAIGHT + half_circ {
                (STRAIGHT - (s - STRAIGHT - half_circ), 2.0 * RADIUS)
            } else {
                let phi = (s - 2.0 * STRAIGHT - half_circ) / RADIUS; // 0..pi around (0, 15)
                (-RADIUS * crate::math::sin(phi), RADIUS + RADIUS * crate::math::cos(phi))
            };
            waypoints.push(p);
        }
        waypoints.push((0.0, 0.0));
        TrackSpec::new(waypoints, 6.0, 1.0 / 120.0).expect("stadium constants are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_track() -> TrackSpec {
        TrackSpec::new(vec![(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)], 2.0, 0.01).unwrap()
    }

    #[test]
    fn arcs_accumulate_segment_lengths() {
        let t = straight_track();
        assert_eq!(t.waypoint_arc(0), 0.0);
        assert_eq!(t.waypoint_arc(1), 10.0);
        assert_eq!(t.waypoint_arc(2), 20.0);
        assert_eq!(t.total_length(), 20.0);
    }

    #[test]
    fn pose_at_interpolates_and_clamps() {
        let t = straight_track();
        let (x, y, h) = t.pose_at(0.0);
        assert_eq!((x, y, h), t.start_pose);
        let (x, y, h) = t.pose_at(13.0);
        assert!((x - 13.0).abs() < 1e-12 && y == 0.0 && h == 0.0);
        let (x, _, _) = t.pose_at(500.0);
        assert_eq!(x, 20.0);
        let stadium = TrackSpec::stadium();
        for i in 0..stadium.waypoint_count() {
            let (x, y, _) = stadium.pose_at(stadium.waypoint_arc(i));
            let (wx, wy) = stadium.waypoints[i];
            assert!((x - wx).abs() < 1e-9 && (y - wy).abs() < 1e-9, "waypoint {i}");
        }
    }

    #[test]
    fn start_pose_faces_second_waypoint() {
        let t = TrackSpec::new(vec![(1.0, 1.0), (1.0, 5.0)], 1.0, 0.01).unwrap();
        assert_eq!(t.start_pose.0, 1.0);
        assert_eq!(t.start_pose.1, 1.0);
        assert!((t.start_pose.2 - core::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert_eq!(
            TrackSpec::new(vec![(0.0, 0.0)], 1.0, 0.01),
            Err(TrackError::TooFewWaypoints)
        );
        assert_eq!(
            TrackSpec::new(vec![(0.0, 0.0), (0.0, 0.0)], 1.0, 0.01),
            Err(TrackError::DuplicateWaypoint { index: 1 })
        );
        assert_eq!(
            TrackSpec::new(vec![(0.0, 0.0), (1.0, 0.0)], 0.0, 0.01),
            Err(TrackError::NonPositiveCorridor)
        );
        assert_eq!(
            TrackSpec::new(vec![(0.0, 0.0), (1.0, 0.0)], 1.0, 0.0),
            Err(TrackError::NonPositiveInnerDt)
        );
    }

    #[test]
    fn projection_on_centerline() {
        let t = straight_track();
        let p = t.project(5.0, 0.0, 0.0);
        assert_eq!(p.arc, 5.0);
        assert_eq!(p.distance, 0.0);
        assert_eq!(p.lateral, 0.0);
    }

    #[test]
    fn projection_lateral_sign_is_left_positive() {
        let t = straight_track();
        // Path runs +x; left of travel is +y.
        assert!(t.project(5.0, 1.0, 5.0).lateral > 0.0);
        assert!(t.project(5.0, -1.0, 5.0).lateral < 0.0);
    }

    #[test]
    fn projection_window_ignores_far_segments() {
        // A hairpin: the return leg passes 1 m away from the outbound leg.
        // With progress still near the start, the projection must stick to
        // the outbound leg even though the return leg is closer in space.
        let t = TrackSpec::new(
            vec![(0.0, 0.0), (30.0, 0.0), (30.0, 1.0), (0.0, 1.0)],
            5.0,
            0.01,
        )
        .unwrap();
        let p = t.project(2.0, 0.4, 1.0);
        assert!(p.arc < 5.0, "arc {} captured by return leg", p.arc);
        assert!((p.distance - 0.4).abs() < 1e-12);
    }

    #[test]
    fn target_index_is_first_strictly_ahead() {
        let t = straight_track();
        assert_eq!(t.target_index(0.0), 1);
        assert_eq!(t.target_index(9.99), 1);
        assert_eq!(t.target_index(10.0), 2);
        assert_eq!(t.target_index(25.0), 2);
    }

    #[test]
    fn encode_parse_round_trip_is_exact() {
        let t = TrackSpec::stadium();
        let text = t.encode();
        let back = TrackSpec::parse(&text).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert_eq!(TrackSpec::parse(""), Err(TrackError::BadHeader));
        assert_eq!(TrackSpec::parse("track-v2 1 0.01\n0 0\n1 0\n"), Err(TrackError::BadHeader));
        assert_eq!(
            TrackSpec::parse("track-v1 1 0.01\n0 0\n1 zero\n"),
            Err(TrackError::BadLine { line: 3 })
        );
    }

    #[test]
    fn stadium_has_expected_shape() {
        let t = TrackSpec::stadium();
        assert_eq!(t.waypoint_count(), 21);
        assert_eq!(t.corridor_half_width, 6.0);
        assert_eq!(t.waypoints[0], (0.0, 0.0));
        assert_eq!(t.waypoints[20], (0.0, 0.0), "closing point returns to the start");
        let perimeter = 120.0 + 2.0 * core::f64::consts::PI * 15.0;
        // Polyline length is slightly under the smooth perimeter (chords).
        assert!(t.total_length() < perimeter);
        assert!(t.total_length() > 0.98 * perimeter);
        // Evenly distributed: consecutive chord lengths match on straights.
        let d01 = t.waypoint_arc(1) - t.waypoint_arc(0);
        assert!((d01 - perimeter / 20.0).abs() < 1e-9);
    }
}
