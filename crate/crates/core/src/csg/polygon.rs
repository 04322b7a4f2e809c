use nalgebra::{Point3, Vector3};

use crate::geometry::Box3;

/// Coplanarity tolerance for plane classification, in meters.
pub const PLANE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub w: f64,
}

impl Plane {
    pub fn from_points(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<Plane> {
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len <= f64::MIN_POSITIVE || !len.is_finite() {
            return None;
        }
        let normal = n / len;
        Some(Plane {
            normal,
            w: normal.dot(&a.coords),
        })
    }

    pub fn flipped(&self) -> Plane {
        Plane {
            normal: -self.normal,
            w: -self.w,
        }
    }

    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.w
    }
}

/// Convex planar polygon with outward orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Point3<f64>>,
    pub plane: Plane,
}

const COPLANAR: u8 = 0;
const FRONT: u8 = 1;
const BACK: u8 = 2;
const SPANNING: u8 = 3;

impl Polygon {
    pub fn from_triangle(a: Point3<f64>, b: Point3<f64>, c: Point3<f64>) -> Option<Polygon> {
        let plane = Plane::from_points(&a, &b, &c)?;
        Some(Polygon {
            vertices: vec![a, b, c],
            plane,
        })
    }

    pub fn flip(&mut self) {
        self.vertices.reverse();
        self.plane = self.plane.flipped();
    }

    pub fn bounds(&self) -> Box3 {
        Box3::from_points(&self.vertices)
    }

    /// Split by `plane` into the four output lists: coplanar polygons go to
    /// `coplanar_front` or `coplanar_back` by facing.
    pub fn split(
        self,
        plane: &Plane,
        coplanar_front: &mut Vec<Polygon>,
        coplanar_back: &mut Vec<Polygon>,
        front: &mut Vec<Polygon>,
        back: &mut Vec<Polygon>,
    ) {
        let mut kind = COPLANAR;
        let types: Vec<(u8, f64)> = self
            .vertices
            .iter()
            .map(|v| {
                let t = plane.distance(v);
                let ty = if t < -PLANE_EPSILON {
                    BACK
                } else if t > PLANE_EPSILON {
                    FRONT
                } else {
                    COPLANAR
                };
                kind |= ty;
                (ty, t)
            })
            .collect();

        match kind {
            COPLANAR => {
                if plane.normal.dot(&self.plane.normal) > 0.0 {
                    coplanar_front.push(self)
                } else {
                    coplanar_back.push(self)
                }
            }
            FRONT => front.push(self),
            BACK => back.push(self),
            _ => {
                let n = self.vertices.len();
                let mut f = Vec::with_capacity(n + 1);
                let mut b = Vec::with_capacity(n + 1);
                for i in 0..n {
                    let j = (i + 1) % n;
                    let (ti, di) = types[i];
                    let (tj, dj) = types[j];
                    let vi = self.vertices[i];
                    let vj = self.vertices[j];
                    if ti != BACK {
                        f.push(vi);
                    }
                    if ti != FRONT {
                        b.push(vi);
                    }
                    if (ti | tj) == SPANNING {
                        let t = di / (di - dj);
                        let v = vi + (vj - vi) * t;
                        f.push(v);
                        b.push(v);
                    }
                }
                if f.len() >= 3 {
                    front.push(Polygon {
                        vertices: f,
                        plane: self.plane,
                    });
                }
                if b.len() >= 3 {
                    back.push(Polygon {
                        vertices: b,
                        plane: self.plane,
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polygon {
        Polygon {
            vertices: vec![
                Point3::new(-1.0, 0.0, -1.0),
                Point3::new(1.0, 0.0, -1.0),
                Point3::new(1.0, 0.0, 1.0),
                Point3::new(-1.0, 0.0, 1.0),
            ],
            plane: Plane {
                normal: Vector3::new(0.0, -1.0, 0.0),
                w: 0.0,
            },
        }
    }

    #[test]
    fn spanning_polygon_splits_in_two() {
        let cut = Plane {
            normal: Vector3::x(),
            w: 0.25,
        };
        let (mut cf, mut cb, mut f, mut b) = (vec![], vec![], vec![], vec![]);
        square().split(&cut, &mut cf, &mut cb, &mut f, &mut b);
        assert_eq!((cf.len(), cb.len(), f.len(), b.len()), (0, 0, 1, 1));
        assert!(f[0].vertices.iter().all(|v| v.x >= 0.25 - 1e-12));
        assert!(b[0].vertices.iter().all(|v| v.x <= 0.25 + 1e-12));
    }

    #[test]
    fn coplanar_goes_by_facing() {
        let p = Plane {
            normal: Vector3::y(),
            w: 0.0,
        };
        let (mut cf, mut cb, mut f, mut b) = (vec![], vec![], vec![], vec![]);
        square().split(&p, &mut cf, &mut cb, &mut f, &mut b);
        assert_eq!((cf.len(), cb.len()), (0, 1));
        square().split(&p.flipped(), &mut cf, &mut cb, &mut f, &mut b);
        assert_eq!((cf.len(), cb.len()), (1, 1));
    }
}
