//! Planar helpers: validity checks, snapping, even-odd containment and
//! guaranteed-interior representative points.

use geo::{Coord, LineString, MultiPolygon, Point, Polygon};

/// Grid spacing for snap rounding, metres.
pub const SNAP_GRID_M: f64 = 1e-9;

pub fn snap_coord(c: Coord<f64>) -> Coord<f64> {
    let inv = 1.0 / SNAP_GRID_M;
    Coord {
        x: (c.x * inv).round() / inv,
        y: (c.y * inv).round() / inv,
    }
}

pub fn snap_ring(ring: &LineString<f64>) -> LineString<f64> {
    LineString::new(ring.0.iter().copied().map(snap_coord).collect())
}

pub fn snap_polygon(p: &Polygon<f64>) -> Polygon<f64> {
    Polygon::new(snap_ring(p.exterior()), p.interiors().iter().map(snap_ring).collect())
}

/// Twice the signed shoelace area of a closed ring.
fn twice_signed_area(ring: &LineString<f64>) -> f64 {
    ring.0.windows(2).map(|w| w[0].x * w[1].y - w[1].x * w[0].y).sum()
}

/// Shoelace area of a polygon minus its holes.
pub fn polygon_area(p: &Polygon<f64>) -> f64 {
    let outer = twice_signed_area(p.exterior()).abs();
    let holes: f64 = p.interiors().iter().map(|r| twice_signed_area(r).abs()).sum();
    (outer - holes) / 2.0
}

pub fn line_length(l: &LineString<f64>) -> f64 {
    l.0.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum()
}

fn orient(a: Coord<f64>, b: Coord<f64>, c: Coord<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Coord<f64>, b: Coord<f64>, p: Coord<f64>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test.
fn segments_touch(p1: Coord<f64>, p2: Coord<f64>, q1: Coord<f64>, q2: Coord<f64>) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Why a ring is not a simple closed curve, if it is not.
pub fn ring_problem(ring: &LineString<f64>) -> Option<String> {
    let pts = &ring.0;
    if pts.len() < 4 || pts.first() != pts.last() {
        return Some("ring must be closed with at least three distinct vertices".into());
    }
    if pts.iter().any(|c| !c.x.is_finite() || !c.y.is_finite()) {
        return Some("ring has non-finite coordinates".into());
    }
    let n = pts.len() - 1;
    for i in 0..n {
        if pts[i] == pts[i + 1] {
            return Some(format!("repeated vertex at position {i}"));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // adjacent edges may only share their common vertex
                let (a, b, c) = if j == i + 1 {
                    (pts[i], pts[i + 1], pts[j + 1])
                } else {
                    (pts[j], pts[0], pts[1])
                };
                if orient(a, b, c) == 0.0 && (c.x - b.x) * (a.x - b.x) + (c.y - b.y) * (a.y - b.y) > 0.0 {
                    return Some(format!("edges {i} and {j} fold back on each other"));
                }
                continue;
            }
            if segments_touch(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                return Some(format!("edges {i} and {j} intersect"));
            }
        }
    }
    if twice_signed_area(ring) == 0.0 {
        return Some("ring has zero area".into());
    }
    None
}

pub fn polygon_problem(p: &Polygon<f64>) -> Option<String> {
    if let Some(e) = ring_problem(p.exterior()) {
        return Some(format!("exterior: {e}"));
    }
    for (i, r) in p.interiors().iter().enumerate() {
        if let Some(e) = ring_problem(r) {
            return Some(format!("hole {i}: {e}"));
        }
    }
    if polygon_area(p) <= 0.0 {
        return Some("polygon has no positive area".into());
    }
    None
}

fn rings(p: &Polygon<f64>) -> impl Iterator<Item = &LineString<f64>> {
    std::iter::once(p.exterior()).chain(p.interiors())
}

/// Even-odd crossing test against every ring of every part.
pub fn contains_even_odd(shape: &MultiPolygon<f64>, pt: Point<f64>) -> bool {
    let (x, y) = (pt.x(), pt.y());
    let mut inside = false;
    for ring in shape.0.iter().flat_map(rings) {
        for w in ring.0.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a.y > y) != (b.y > y) {
                let cross = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x < cross {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// A point strictly inside the polygon: the midpoint of the widest
/// interior run along a horizontal line that passes through no vertex.
pub fn polygon_interior_point(p: &Polygon<f64>) -> Point<f64> {
    let mut ys: Vec<f64> = rings(p).flat_map(|r| r.0.iter().map(|c| c.y)).collect();
    ys.sort_by(|a, b| a.total_cmp(b));
    ys.dedup();
    if ys.len() < 2 {
        let c = p.exterior().0[0];
        return Point::new(c.x, c.y);
    }
    // widest gap between consecutive vertex heights
    let (lo, hi) = ys.windows(2).map(|w| (w[0], w[1])).fold((ys[0], ys[1]), |best, cur| {
        if cur.1 - cur.0 > best.1 - best.0 {
            cur
        } else {
            best
        }
    });
    let y = lo + (hi - lo) / 2.0;
    let mut xs: Vec<f64> = rings(p)
        .flat_map(|r| r.0.windows(2))
        .filter(|w| (w[0].y > y) != (w[1].y > y))
        .map(|w| w[0].x + (y - w[0].y) * (w[1].x - w[0].x) / (w[1].y - w[0].y))
        .collect();
    xs.sort_by(|a, b| a.total_cmp(b));
    let (a, b) = xs
        .chunks_exact(2)
        .map(|c| (c[0], c[1]))
        .fold(
            (xs[0], xs[0]),
            |best, cur| if cur.1 - cur.0 > best.1 - best.0 { cur } else { best },
        );
    Point::new(a + (b - a) / 2.0, y)
}

/// The point halfway along the line's length.
pub fn line_midpoint(l: &LineString<f64>) -> Point<f64> {
    let half = line_length(l) / 2.0;
    let mut walked = 0.0;
    for w in l.0.windows(2) {
        let seg = (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
        if walked + seg >= half && seg > 0.0 {
            let t = (half - walked) / seg;
            return Point::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y));
        }
        walked += seg;
    }
    let c = l.0[0];
    Point::new(c.x, c.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use geo::{coord, polygon};
    use proptest::prelude::*;

    fn square(x: f64, y: f64, s: f64) -> Polygon<f64> {
        polygon![(x: x, y: y), (x: x + s, y: y), (x: x + s, y: y + s), (x: x, y: y + s), (x: x, y: y)]
    }

    #[test]
    fn shoelace_and_length() {
        assert_eq!(polygon_area(&square(0.0, 0.0, 2.0)), 4.0);
        let holed = Polygon::new(
            square(0.0, 0.0, 4.0).exterior().clone(),
            vec![square(1.0, 1.0, 1.0).exterior().clone()],
        );
        assert_eq!(polygon_area(&holed), 15.0);
        let l = LineString::new(vec![
            coord! {x: 0.0, y: 0.0},
            coord! {x: 3.0, y: 4.0},
            coord! {x: 3.0, y: 10.0},
        ]);
        assert_eq!(line_length(&l), 11.0);
        assert_eq!(line_midpoint(&l), Point::new(3.0, 4.5));
    }

    #[test]
    fn bowtie_is_rejected() {
        let bowtie = polygon![(x: 0.0, y: 0.0), (x: 1.0, y: 1.0), (x: 1.0, y: 0.0), (x: 0.0, y: 1.0), (x: 0.0, y: 0.0)];
        assert!(polygon_problem(&bowtie).unwrap().contains("intersect"));
        assert!(polygon_problem(&square(0.0, 0.0, 1.0)).is_none());
        let open = Polygon::new(
            LineString::new(vec![coord! {x: 0.0, y: 0.0}, coord! {x: 1.0, y: 0.0}]),
            vec![],
        );
        assert!(polygon_problem(&open).is_some());
    }

    #[test]
    fn even_odd_respects_holes() {
        let holed = Polygon::new(
            square(0.0, 0.0, 4.0).exterior().clone(),
            vec![square(1.0, 1.0, 2.0).exterior().clone()],
        );
        let mp = MultiPolygon::new(vec![holed]);
        assert!(contains_even_odd(&mp, Point::new(0.5, 0.5)));
        assert!(!contains_even_odd(&mp, Point::new(2.0, 2.0)));
        assert!(!contains_even_odd(&mp, Point::new(5.0, 2.0)));
    }

    #[test]
    fn c_shape_interior_point_avoids_the_centroid() {
        // C opening to the right; its centroid sits in the notch
        let c = polygon![
            (x: 0.0, y: 0.0), (x: 10.0, y: 0.0), (x: 10.0, y: 2.0), (x: 2.0, y: 2.0),
            (x: 2.0, y: 8.0), (x: 10.0, y: 8.0), (x: 10.0, y: 10.0), (x: 0.0, y: 10.0), (x: 0.0, y: 0.0)
        ];
        let mp = MultiPolygon::new(vec![c.clone()]);
        use geo::Centroid;
        assert!(!contains_even_odd(&mp, c.centroid().unwrap()));
        let rp = polygon_interior_point(&c);
        assert!(contains_even_odd(&mp, rp));
    }

    /// Star-shaped polygon around the origin from sorted angles.
    fn star(radii: &[f64], jitter: &[f64]) -> Polygon<f64> {
        let n = radii.len();
        let mut pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let a = (i as f64 + 0.5 * jitter[i]) / n as f64 * std::f64::consts::TAU;
                (radii[i] * a.cos(), radii[i] * a.sin())
            })
            .collect();
        pts.push(pts[0]);
        Polygon::new(LineString::from(pts), vec![])
    }

    proptest! {
        #[test]
        fn representative_point_is_strictly_inside(
            radii in prop::collection::vec(0.5f64..10.0, 3..24),
            jitter in prop::collection::vec(0.0f64..0.9, 24),
            dx in -1e5f64..1e5,
            dy in -1e5f64..1e5,
        ) {
            let p = star(&radii, &jitter);
            let p = Polygon::new(
                LineString::new(p.exterior().0.iter().map(|c| coord! {x: c.x + dx, y: c.y + dy}).collect()),
                vec![],
            );
            prop_assume!(polygon_problem(&p).is_none());
            let rp = polygon_interior_point(&p);
            prop_assert!(contains_even_odd(&MultiPolygon::new(vec![p.clone()]), rp));
            // strictly: nudging in any axis direction stays inside for a tiny step
            let eps = 1e-9 * (1.0 + dx.abs().max(dy.abs()));
            for (ex, ey) in [(eps, 0.0), (-eps, 0.0), (0.0, eps), (0.0, -eps)] {
                prop_assert!(contains_even_odd(&MultiPolygon::new(vec![p.clone()]), Point::new(rp.x() + ex, rp.y() + ey)));
            }
        }
    }
}
