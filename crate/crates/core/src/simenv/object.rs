use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim2real::Range;

/// Object geometry. Only the bounding-sphere radius enters contact checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    Ellipsoid { semi_axes: [f64; 3] },
    Cylinder { radius: f64, half_height: f64 },
    Capsule { radius: f64, half_length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Box,
    Sphere,
    Ellipsoid,
    Cylinder,
    Capsule,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Box,
        ShapeKind::Sphere,
        ShapeKind::Ellipsoid,
        ShapeKind::Cylinder,
        ShapeKind::Capsule,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Box => "box",
            ShapeKind::Sphere => "sphere",
            ShapeKind::Ellipsoid => "ellipsoid",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Capsule => "capsule",
        }
    }
}

impl Shape {
    pub fn kind(&self) -> ShapeKind {
        match self {
            Shape::Box { .. } => ShapeKind::Box,
            Shape::Sphere { .. } => ShapeKind::Sphere,
            Shape::Ellipsoid { .. } => ShapeKind::Ellipsoid,
            Shape::Cylinder { .. } => ShapeKind::Cylinder,
            Shape::Capsule { .. } => ShapeKind::Capsule,
        }
    }

    fn sizes(&self) -> Vec<f64> {
        match *self {
            Shape::Box { half_extents } => half_extents.to_vec(),
            Shape::Sphere { radius } => vec![radius],
            Shape::Ellipsoid { semi_axes } => semi_axes.to_vec(),
            Shape::Cylinder { radius, half_height } => vec![radius, half_height],
            Shape::Capsule { radius, half_length } => vec![radius, half_length],
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Box { half_extents: [a, b, c] } => (a * a + b * b + c * c).sqrt(),
            Shape::Sphere { radius } => radius,
            Shape::Ellipsoid { semi_axes: [a, b, c] } => a.max(b).max(c),
            Shape::Cylinder { radius, half_height } => radius.hypot(half_height),
            Shape::Capsule { radius, half_length } => radius + half_length,
        }
    }
}

/// Physical description of one thrown object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// kg
    pub mass: f64,
    /// Linear velocity damping (1/s).
    pub damping: f64,
}

impl ObjectSpec {
    pub fn validate(&self) -> Result<()> {
        let sizes_ok = self.shape.sizes().iter().all(|s| s.is_finite() && *s > 0.0);
        if !sizes_ok || !(self.mass > 0.0) || !(self.damping >= 0.0) || !self.damping.is_finite() {
            return Err(Error::Config(format!("invalid object spec {self:?}")));
        }
        Ok(())
    }

    pub fn bounding_radius(&self) -> f64 {
        self.shape.bounding_radius()
    }
}

impl Default for ObjectSpec {
    fn default() -> Self {
        ObjectSpec {
            shape: Shape::Sphere { radius: 0.045 },
            mass: 0.2,
            damping: 0.05,
        }
    }
}

/// Ranges the training objects are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectCatalog {
    pub shapes: Vec<ShapeKind>,
    /// Characteristic size (m); each shape scales its dimensions from it.
    pub size: Range,
    /// Per-dimension aspect multipliers applied to the characteristic size.
    pub aspect: Range,
    pub mass: Range,
    pub damping: Range,
    /// Used when randomization is disabled.
    pub default: ObjectSpec,
}

impl Default for ObjectCatalog {
    fn default() -> Self {
        ObjectCatalog {
            shapes: ShapeKind::ALL.to_vec(),
            size: Range::new(0.03, 0.055),
            aspect: Range::new(0.7, 1.0),
            mass: Range::new(0.05, 0.5),
            damping: Range::new(0.0, 0.2),
            default: ObjectSpec::default(),
        }
    }
}

impl ObjectCatalog {
    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::Config("object catalog needs at least one shape".into()));
        }
        for r in [self.size, self.aspect, self.mass, self.damping] {
            if !r.is_valid() || r.low < 0.0 {
                return Err(Error::Config(format!("invalid object range {r:?}")));
            }
        }
        if self.size.low <= 0.0 || self.aspect.low <= 0.0 || self.mass.low <= 0.0 {
            return Err(Error::Config("object sizes and masses must be positive".into()));
        }
        self.default.validate()
    }

    /// Draw a shape kind uniformly, then its dimensions and physical parameters.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ObjectSpec {
        let kind = self.shapes[rng.random_range(0..self.shapes.len())];
        self.sample_kind(rng, kind)
    }

    pub fn sample_kind<R: Rng + ?Sized>(&self, rng: &mut R, kind: ShapeKind) -> ObjectSpec {
        let s = self.size.sample(rng);
        let mut dim = || s * self.aspect.sample(rng);
        let shape = match kind {
            ShapeKind::Box => Shape::Box {
                half_extents: [dim(), dim(), dim()],
            },
            ShapeKind::Sphere => Shape::Sphere { radius: s },
            ShapeKind::Ellipsoid => Shape::Ellipsoid {
                semi_axes: [s, dim(), dim()],
            },
            ShapeKind::Cylinder => Shape::Cylinder {
                radius: dim(),
                half_height: dim(),
            },
            ShapeKind::Capsule => Shape::Capsule {
                radius: 0.7 * dim(),
                half_length: 0.5 * dim(),
            },
        };
        ObjectSpec {
            shape,
            mass: self.mass.sample(rng),
            damping: self.damping.sample(rng),
        }
    }
}

/// An evaluation object class: either a training shape drawn from the
/// catalog, or a fixed held-out parameter tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObjectClass {
    Training(ShapeKind),
    HeldOut { name: String, spec: ObjectSpec },
}

impl ObjectClass {
    pub fn name(&self) -> String {
        match self {
            ObjectClass::Training(k) => k.name().to_string(),
            ObjectClass::HeldOut { name, .. } => name.clone(),
        }
    }

    pub fn training() -> Vec<ObjectClass> {
        ShapeKind::ALL.iter().map(|k| ObjectClass::Training(*k)).collect()
    }

    /// Five unseen objects, each with at least one parameter outside the
    /// training ranges: (bounding radius m, mass kg, damping 1/s).
    pub fn held_out() -> Vec<ObjectClass> {
        let tuple = |name: &str, r: f64, mass: f64, damping: f64| ObjectClass::HeldOut {
            name: name.to_string(),
            spec: ObjectSpec {
                shape: Shape::Sphere { radius: r },
                mass,
                damping,
            },
        };
        vec![
            tuple("bowl", 0.11, 0.25, 0.25),
            tuple("bottle", 0.10, 0.65, 0.05),
            tuple("wine-cup", 0.09, 0.15, 0.30),
            tuple("cup", 0.05, 0.03, 0.25),
            tuple("bread", 0.08, 0.07, 0.35),
        ]
    }
}

/// Thrown-object kinematic state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub spec: ObjectSpec,
    pub launched: bool,
    pub held: bool,
    pub grounded: bool,
    /// Control step at which the object is released.
    pub launch_step: u32,
    /// Object position in the palm frame while held.
    pub attachment: Option<Vector3<f64>>,
}

impl ObjectState {
    pub fn airborne(&self) -> bool {
        self.launched && !self.grounded
    }
}

/// Where throws start and where they are aimed, relative to the robot start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LauncherConfig {
    pub release_x: Range,
    pub release_y: Range,
    pub release_z: Range,
    /// Distance of the ballistic landing point from the robot start (m).
    pub landing_radius: Range,
    /// Bearing of the landing point from the robot's forward axis (rad).
    pub landing_bearing: Range,
    /// Seconds from release to landing.
    pub flight_time: Range,
    /// Throws faster than this are rejected and redrawn (m/s).
    pub max_speed: f64,
    pub max_tries: usize,
}

impl Default for LauncherConfig {
    fn default() -> Self {
        LauncherConfig {
            release_x: Range::new(2.0, 3.0),
            release_y: Range::new(-0.6, 0.6),
            release_z: Range::new(1.0, 2.0),
            landing_radius: Range::new(0.3, 1.5),
            landing_bearing: Range::new(-1.2, 1.2),
            flight_time: Range::new(0.8, 1.6),
            max_speed: 6.0,
            max_tries: 1000,
        }
    }
}

impl LauncherConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            self.release_x,
            self.release_y,
            self.release_z,
            self.landing_radius,
            self.landing_bearing,
            self.flight_time,
        ];
        if ranges.iter().any(|r| !r.is_valid())
            || self.flight_time.low <= 0.0
            || self.landing_radius.low < 0.0
            || self.release_z.low <= 0.0
            || !(self.max_speed > 0.0)
            || self.max_tries == 0
        {
            return Err(Error::Config(format!("invalid launcher config {self:?}")));
        }
        Ok(())
    }
}

/// A sampled throw: release position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throw {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub flight_time: f64,
    pub landing: [f64; 2],
}

/// Sample a release point in the thrower box, a landing point in the annulus
/// sector and a flight time, then solve the release velocity in closed form.
/// Throws above `max_speed` are redrawn.
pub fn launch_object<R: Rng + ?Sized>(rng: &mut R, cfg: &LauncherConfig, gravity: f64) -> Result<Throw> {
    for _ in 0..cfg.max_tries {
        let p0 = Vector3::new(
            cfg.release_x.sample(rng),
            cfg.release_y.sample(rng),
            cfg.release_z.sample(rng),
        );
        let r = cfg.landing_radius.sample(rng);
        let bearing = cfg.landing_bearing.sample(rng);
        let t = cfg.flight_time.sample(rng);
        let landing = [r * bearing.cos(), r * bearing.sin()];
        let v0 = Vector3::new(
            (landing[0] - p0.x) / t,
            (landing[1] - p0.y) / t,
            (0.5 * gravity * t * t - p0.z) / t,
        );
        if v0.norm() <= cfg.max_speed {
            return Ok(Throw {
                position: p0,
                velocity: v0,
                flight_time: t,
                landing,
            });
        }
    }
    Err(Error::LaunchRejected { tries: cfg.max_tries })
}

/// Closed-form drag-free landing (z = 0) of a projectile.
pub fn ballistic_landing(p0: &Vector3<f64>, v0: &Vector3<f64>, gravity: f64) -> ([f64; 2], f64) {
    let t = (v0.z + (v0.z * v0.z + 2.0 * gravity * p0.z).sqrt()) / gravity;
    ([p0.x + v0.x * t, p0.y + v0.y * t], t)
}

/// Advance position and velocity by `dt` under gravity and linear damping.
/// Uses the exact solution of `v' = g - c·v`, so constant-gravity flight
/// carries no integration error.
pub fn integrate_flight(position: &mut Vector3<f64>, velocity: &mut Vector3<f64>, gravity: f64, damping: f64, dt: f64) {
    let g = Vector3::new(0.0, 0.0, -gravity);
    let c = damping;
    // phi1 = (1 - e^{-c dt}) / c, phi2 = (dt - phi1) / c, both finite as c -> 0.
    let (phi1, phi2) = if c * dt < 1e-6 {
        let h = dt;
        (
            h - c * h * h / 2.0 + c * c * h * h * h / 6.0,
            h * h / 2.0 - c * h * h * h / 6.0 + c * c * h * h * h * h / 24.0,
        )
    } else {
        let phi1 = -(-c * dt).exp_m1() / c;
        (phi1, (dt - phi1) / c)
    };
    let decay = 1.0 - c * phi1;
    *position += *velocity * phi1 + g * phi2;
    *velocity = *velocity * decay + g * phi1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bounding_radii() {
        assert_eq!(Shape::Sphere { radius: 0.05 }.bounding_radius(), 0.05);
        assert!((Shape::Box { half_extents: [0.03, 0.04, 0.0] }.bounding_radius() - 0.05).abs() < 1e-15);
        assert!((Shape::Cylinder { radius: 0.03, half_height: 0.04 }.bounding_radius() - 0.05).abs() < 1e-15);
        assert_eq!(Shape::Capsule { radius: 0.02, half_length: 0.03 }.bounding_radius(), 0.05);
        assert_eq!(Shape::Ellipsoid { semi_axes: [0.01, 0.05, 0.02] }.bounding_radius(), 0.05);
    }

    #[test]
    fn dropped_object_lands_below_release() {
        let p0 = Vector3::new(0.4, -0.2, 1.5);
        let (land, t) = ballistic_landing(&p0, &Vector3::zeros(), 9.81);
        assert_eq!(land, [0.4, -0.2]);
        assert!((t - (2.0 * 1.5 / 9.81f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sampled_throw_lands_where_aimed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = LauncherConfig::default();
        for _ in 0..500 {
            let throw = launch_object(&mut rng, &cfg, 9.81).unwrap();
            let (land, t) = ballistic_landing(&throw.position, &throw.velocity, 9.81);
            assert!((land[0] - throw.landing[0]).abs() < 1e-9);
            assert!((land[1] - throw.landing[1]).abs() < 1e-9);
            assert!((t - throw.flight_time).abs() < 1e-9);
            assert!(throw.velocity.norm() <= cfg.max_speed);
        }
    }

    #[test]
    fn impossible_launcher_is_rejected() {
        let cfg = LauncherConfig {
            max_speed: 0.1,
            max_tries: 10,
            ..Default::default()
        };
        let err = launch_object(&mut ChaCha8Rng::seed_from_u64(0), &cfg, 9.81).unwrap_err();
        assert!(matches!(err, Error::LaunchRejected { tries: 10 }));
    }

    #[test]
    fn damped_flight_matches_analytic_solution() {
        // v(t) = g/c·(e^{-ct} - 1) + v0·e^{-ct} on z, x decays freely.
        let (g, c) = (9.81, 0.3);
        let mut p = Vector3::new(0.0, 0.0, 2.0);
        let mut v = Vector3::new(2.0, 0.0, 1.0);
        for _ in 0..500 {
            integrate_flight(&mut p, &mut v, g, c, 0.002);
        }
        let t: f64 = 1.0;
        let e = (-c * t).exp();
        let vx = 2.0 * e;
        let vz = 1.0 * e - g / c * (1.0 - e);
        let px = 2.0 / c * (1.0 - e);
        let pz = 2.0 + (1.0 + g / c) / c * (1.0 - e) - g / c * t;
        assert!((v.x - vx).abs() < 1e-10 && (v.z - vz).abs() < 1e-10);
        assert!((p.x - px).abs() < 1e-10 && (p.z - pz).abs() < 1e-10);
    }

    #[test]
    fn catalog_samples_respect_ranges() {
        let cat = ObjectCatalog::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let s = cat.sample(&mut rng);
            s.validate().unwrap();
            assert!(cat.mass.contains(s.mass) && cat.damping.contains(s.damping));
            assert!(s.bounding_radius() < 0.1);
        }
    }

    #[test]
    fn held_out_tuples_leave_training_ranges() {
        let cat = ObjectCatalog::default();
        for class in ObjectClass::held_out() {
            let ObjectClass::HeldOut { spec, .. } = class else { unreachable!() };
            let outside = !cat.mass.contains(spec.mass) || !cat.damping.contains(spec.damping) || spec.bounding_radius() > 0.1;
            assert!(outside, "{spec:?}");
        }
    }
}
