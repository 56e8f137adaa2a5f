//! Analytic primitives: surface sampling, signed distance and ray casts,
//! all in the primitive's local frame.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::geometry::Vec3;

const RAY_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    /// Axis-aligned box centered at the origin.
    Box { half: Vec3 },
    /// Cylinder along local z, centered at the origin.
    Cylinder { radius: f64, half_height: f64 },
    /// Capsule along local x: a segment from `-half_length` to
    /// `+half_length` swept by a sphere.
    Capsule { radius: f64, half_length: f64 },
    /// Axis-aligned ellipsoid centered at the origin.
    Ellipsoid { radii: Vec3 },
}

impl Primitive {
    pub fn area(&self) -> f64 {
        match *self {
            Primitive::Box { half } => 8.0 * (half.x * half.y + half.y * half.z + half.x * half.z),
            Primitive::Cylinder { radius, half_height } => {
                2.0 * PI * radius * (2.0 * half_height) + 2.0 * PI * radius * radius
            }
            Primitive::Capsule { radius, half_length } => {
                2.0 * PI * radius * (2.0 * half_length) + 4.0 * PI * radius * radius
            }
            Primitive::Ellipsoid { radii } => {
                // Thomsen's approximation, within about 1%.
                let p = 1.6075;
                let (a, b, c) = (radii.x.powf(p), radii.y.powf(p), radii.z.powf(p));
                4.0 * PI * ((a * b + a * c + b * c) / 3.0).powf(1.0 / p)
            }
        }
    }

    /// Uniform-by-area surface point and its outward normal.
    pub fn sample_surface(&self, rng: &mut impl Rng) -> (Vec3, Vec3) {
        match *self {
            Primitive::Box { half } => {
                let areas = [half.y * half.z, half.x * half.z, half.x * half.y];
                let total: f64 = areas.iter().sum::<f64>() * 2.0;
                let mut pick = rng.random_range(0.0..total);
                let mut axis = 2;
                for (k, a) in areas.iter().enumerate() {
                    if pick < 2.0 * a {
                        axis = k;
                        break;
                    }
                    pick -= 2.0 * a;
                }
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let mut p = Vec3::new(
                    rng.random_range(-half.x..=half.x),
                    rng.random_range(-half.y..=half.y),
                    rng.random_range(-half.z..=half.z),
                );
                p[axis] = sign * half[axis];
                let mut n = Vec3::zeros();
                n[axis] = sign;
                (p, n)
            }
            Primitive::Cylinder { radius, half_height } => {
                let side = 2.0 * PI * radius * 2.0 * half_height;
                let caps = 2.0 * PI * radius * radius;
                if rng.random_range(0.0..side + caps) < side {
                    let a = rng.random_range(0.0..2.0 * PI);
                    let n = Vec3::new(a.cos(), a.sin(), 0.0);
                    let z = rng.random_range(-half_height..=half_height);
                    (Vec3::new(radius * n.x, radius * n.y, z), n)
                } else {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    let r = radius * rng.random::<f64>().sqrt();
                    let a = rng.random_range(0.0..2.0 * PI);
                    (Vec3::new(r * a.cos(), r * a.sin(), sign * half_height), Vec3::new(0.0, 0.0, sign))
                }
            }
            Primitive::Capsule { radius, half_length } => {
                let side = 2.0 * PI * radius * 2.0 * half_length;
                let caps = 4.0 * PI * radius * radius;
                if rng.random_range(0.0..side + caps) < side {
                    let a = rng.random_range(0.0..2.0 * PI);
                    let n = Vec3::new(0.0, a.cos(), a.sin());
                    let x = rng.random_range(-half_length..=half_length);
                    (Vec3::new(x, 0.0, 0.0) + radius * n, n)
                } else {
                    let n = Vec3::from(UnitSphere.sample(rng));
                    let c = Vec3::new(half_length.copysign(n.x), 0.0, 0.0);
                    (c + radius * n, n)
                }
            }
            Primitive::Ellipsoid { radii } => {
                // Rejection on the area element of the sphere-to-ellipsoid map.
                let (a, b, c) = (radii.x, radii.y, radii.z);
                let gmax = (b * c).max(a * c).max(a * b);
                loop {
                    let u = Vec3::from(UnitSphere.sample(rng));
                    let g = ((b * c * u.x).powi(2) + (a * c * u.y).powi(2) + (a * b * u.z).powi(2)).sqrt();
                    if rng.random_range(0.0..gmax) < g {
                        let p = Vec3::new(a * u.x, b * u.y, c * u.z);
                        let n = Vec3::new(p.x / (a * a), p.y / (b * b), p.z / (c * c)).normalize();
                        return (p, n);
                    }
                }
            }
        }
    }

    /// Signed distance, negative inside. Exact except for ellipsoids, where
    /// it is a first-order estimate that is exact on the surface.
    pub fn sdf(&self, p: &Vec3) -> f64 {
        match *self {
            Primitive::Box { half } => {
                let q = p.abs() - half;
                q.sup(&Vec3::zeros()).norm() + q.max().min(0.0)
            }
            Primitive::Cylinder { radius, half_height } => {
                let dx = p.xy().norm() - radius;
                let dz = p.z.abs() - half_height;
                let outside = nalgebra::Vector2::new(dx.max(0.0), dz.max(0.0)).norm();
                outside + dx.max(dz).min(0.0)
            }
            Primitive::Capsule { radius, half_length } => {
                let x = p.x.clamp(-half_length, half_length);
                (p - Vec3::new(x, 0.0, 0.0)).norm() - radius
            }
            Primitive::Ellipsoid { radii } => {
                let k0 = p.component_div(&radii).norm();
                let k1 = p.component_div(&radii.component_mul(&radii)).norm();
                if k1 == 0.0 {
                    -radii.min()
                } else {
                    k0 * (k0 - 1.0) / k1
                }
            }
        }
    }

    /// Whether `p` lies strictly inside, beyond a small tolerance.
    pub fn contains(&self, p: &Vec3, tolerance: f64) -> bool {
        match *self {
            Primitive::Ellipsoid { radii } => {
                let shrunk = radii.map(|r| (r - tolerance).max(0.0));
                shrunk.min() > 0.0 && p.component_div(&shrunk).norm_squared() < 1.0
            }
            _ => self.sdf(p) < -tolerance,
        }
    }

    /// Smallest positive ray parameter at which `o + t d` meets the surface.
    pub fn ray(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut take = |t: f64| {
            if t > RAY_EPS && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };
        match *self {
            Primitive::Box { half } => {
                let (mut near, mut far) = (f64::NEG_INFINITY, f64::INFINITY);
                for k in 0..3 {
                    if d[k].abs() < 1e-300 {
                        if o[k].abs() > half[k] {
                            return None;
                        }
                    } else {
                        let t1 = (-half[k] - o[k]) / d[k];
                        let t2 = (half[k] - o[k]) / d[k];
                        near = near.max(t1.min(t2));
                        far = far.min(t1.max(t2));
                    }
                }
                if near <= far {
                    take(near);
                    take(far);
                }
            }
            Primitive::Cylinder { radius, half_height } => {
                let a = d.x * d.x + d.y * d.y;
                let b = 2.0 * (o.x * d.x + o.y * d.y);
                let c = o.x * o.x + o.y * o.y - radius * radius;
                for t in quadratic(a, b, c) {
                    if (o.z + t * d.z).abs() <= half_height {
                        take(t);
                    }
                }
                if d.z != 0.0 {
                    for h in [-half_height, half_height] {
                        let t = (h - o.z) / d.z;
                        let q = o + t * d;
                        if q.x * q.x + q.y * q.y <= radius * radius {
                            take(t);
                        }
                    }
                }
            }
            Primitive::Capsule { radius, half_length } => {
                let a = d.y * d.y + d.z * d.z;
                let b = 2.0 * (o.y * d.y + o.z * d.z);
                let c = o.y * o.y + o.z * o.z - radius * radius;
                for t in quadratic(a, b, c) {
                    if (o.x + t * d.x).abs() <= half_length {
                        take(t);
                    }
                }
                for end in [-half_length, half_length] {
                    let oc = o - Vec3::new(end, 0.0, 0.0);
                    for t in quadratic(d.norm_squared(), 2.0 * oc.dot(d), oc.norm_squared() - radius * radius) {
                        let x = o.x + t * d.x;
                        if x * end.signum() >= half_length {
                            take(t);
                        }
                    }
                }
            }
            Primitive::Ellipsoid { radii } => {
                let os = o.component_div(&radii);
                let ds = d.component_div(&radii);
                for t in quadratic(ds.norm_squared(), 2.0 * os.dot(&ds), os.norm_squared() - 1.0) {
                    take(t);
                }
            }
        }
        best
    }

    /// Distance from the local origin down to the lowest surface point.
    pub fn bottom(&self) -> f64 {
        match *self {
            Primitive::Box { half } => half.z,
            Primitive::Cylinder { half_height, .. } => half_height,
            Primitive::Capsule { radius, .. } => radius,
            Primitive::Ellipsoid { radii } => radii.z,
        }
    }
}

/// Real roots of `a t² + b t + c`, ascending; none when `a` is zero.
fn quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a.abs() < 1e-300 {
        return Vec::new();
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    // Numerically stable pair.
    let q = -0.5 * (b + s.copysign(b));
    let (mut t1, mut t2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    if t1 > t2 {
        std::mem::swap(&mut t1, &mut t2);
    }
    vec![t1, t2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn shapes() -> Vec<Primitive> {
        vec![
            Primitive::Box { half: Vec3::new(0.03, 0.02, 0.01) },
            Primitive::Cylinder { radius: 0.04, half_height: 0.05 },
            Primitive::Capsule { radius: 0.007, half_length: 0.06 },
            Primitive::Ellipsoid { radii: Vec3::new(0.025, 0.018, 0.008) },
            Primitive::Ellipsoid { radii: Vec3::repeat(0.03) },
        ]
    }

    #[test]
    fn samples_lie_on_surface_with_outward_normals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for s in shapes() {
            for _ in 0..2000 {
                let (p, n) = s.sample_surface(&mut rng);
                assert!(s.sdf(&p).abs() < 1e-9, "{s:?} {p:?} sdf={}", s.sdf(&p));
                assert!((n.norm() - 1.0).abs() < 1e-9);
                assert!(s.sdf(&(p + 1e-4 * n)) > 0.0);
                assert!(s.sdf(&(p - 1e-4 * n)) < 0.0);
            }
        }
    }

    #[test]
    fn sphere_area_and_sdf_are_exact() {
        let s = Primitive::Ellipsoid { radii: Vec3::repeat(2.0) };
        assert!((s.area() - 16.0 * PI).abs() < 1e-9);
        assert!((s.sdf(&Vec3::new(3.0, 0.0, 0.0)) - 1.0).abs() < 1e-12);
        let c = Primitive::Capsule { radius: 1.0, half_length: 2.0 };
        assert!((c.sdf(&Vec3::new(4.0, 0.0, 0.0)) - 1.0).abs() < 1e-12);
        assert!((c.sdf(&Vec3::new(0.0, 3.0, 0.0)) - 2.0).abs() < 1e-12);
        let b = Primitive::Box { half: Vec3::new(1.0, 1.0, 1.0) };
        assert!((b.sdf(&Vec3::new(2.0, 2.0, 0.0)) - 2f64.sqrt()).abs() < 1e-12);
        assert!((b.sdf(&Vec3::zeros()) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ray_hits_match_sampled_surfaces() {
        // A ray aimed at a sampled, camera-facing point must hit the surface
        // no later than that point.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let eye = Vec3::new(0.3, -0.2, 0.4);
        for s in shapes() {
            for _ in 0..1000 {
                let (p, n) = s.sample_surface(&mut rng);
                let d = p - eye;
                let t = s.ray(&eye, &d).expect("ray hits");
                assert!(t <= 1.0 + 1e-9);
                let hit = eye + t * d;
                assert!(s.sdf(&hit).abs() < 1e-9);
                if n.dot(&d) < 0.0 {
                    assert!((t - 1.0).abs() < 1e-6 || t < 1.0);
                }
            }
            assert!(s.ray(&eye, &(eye * 2.0)).is_none());
        }
    }
}
