//! 2D convex geometry for the support polygon: hull construction and
//! margin-shrunk half-plane containment.

use nalgebra::Vector2;

/// Convex polygon with vertices in counterclockwise order.
#[derive(Debug, Clone)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vector2<f64>>,
}

/// Outward half-plane `normal . p <= offset` bounding a polygon edge.
#[derive(Debug, Clone, Copy)]
pub struct HalfPlane {
    pub normal: Vector2<f64>,
    pub offset: f64,
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain. Returns the hull in counterclockwise order;
/// collinear boundary points are dropped. Errors if the input is degenerate
/// (fewer than 3 distinct non-collinear points).
pub fn convex_hull(points: &[Vector2<f64>]) -> Result<ConvexPolygon, DegenerateHull> {
    let mut pts: Vec<Vector2<f64>> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| a == b);
    if pts.len() < 3 {
        return Err(DegenerateHull);
    }
    let mut lower: Vec<Vector2<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vector2<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(DegenerateHull);
    }
    Ok(ConvexPolygon { vertices: lower })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegenerateHull;

impl std::fmt::Display for DegenerateHull {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "points are collinear; no 2D hull exists")
    }
}

impl std::error::Error for DegenerateHull {}

impl ConvexPolygon {
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut twice = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            twice += a.x * b.y - b.x * a.y;
        }
        twice.abs() / 2.0
    }

    /// Outward half-planes of the edges (counterclockwise vertex order).
    pub fn half_planes(&self) -> Vec<HalfPlane> {
        let n = self.vertices.len();
        let mut planes = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let edge = b - a;
            let normal = Vector2::new(edge.y, -edge.x).normalize();
            planes.push(HalfPlane {
                normal,
                offset: normal.dot(&a),
            });
        }
        planes
    }

    /// Signed clearance of `p`: the smallest margin by which every edge
    /// half-plane is satisfied. Positive strictly inside, negative outside.
    pub fn clearance(&self, p: &Vector2<f64>) -> f64 {
        self.half_planes()
            .iter()
            .map(|h| h.offset - h.normal.dot(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `p` lies inside the polygon shrunk inward by `margin`.
    pub fn contains_with_margin(&self, p: &Vector2<f64>, margin: f64) -> bool {
        self.clearance(p) >= margin
    }
}
