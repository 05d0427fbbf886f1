use serde::{Deserialize, Serialize};

/// Planar pose and body-frame velocity of the omnidirectional base.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    /// Heading, kept in (-π, π].
    pub yaw: f64,
    pub vx: f64,
    pub vy: f64,
}

pub fn normalize_yaw(yaw: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = (yaw + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

impl BasePose {
    pub fn at(x: f64, y: f64, yaw: f64) -> Self {
        BasePose {
            x,
            y,
            yaw: normalize_yaw(yaw),
            vx: 0.0,
            vy: 0.0,
        }
    }

    /// Rotate a body-frame planar vector into the world frame.
    pub fn body_to_world(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn world_to_body(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
    }
}

/// Parallel motion: the body-frame velocity command is held for `dt` with a
/// fixed heading, so the world displacement is exact for a constant command.
pub fn base_step(pose: &BasePose, cmd: [f64; 2], dt: f64) -> BasePose {
    debug_assert!(dt > 0.0);
    let [wx, wy] = pose.body_to_world(cmd);
    BasePose {
        x: pose.x + wx * dt,
        y: pose.y + wy * dt,
        yaw: pose.yaw,
        vx: cmd[0],
        vy: cmd[1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_command_is_identity() {
        let p = BasePose::at(0.3, -1.2, 0.7);
        let q = base_step(&p, [0.0, 0.0], 0.04);
        assert_eq!((q.x, q.y, q.yaw), (p.x, p.y, p.yaw));
    }

    #[test]
    fn axis_aligned() {
        let q = base_step(&BasePose::default(), [1.0, 0.0], 0.04);
        assert_eq!(q.x, 0.04);
        assert_eq!(q.y, 0.0);
    }

    #[test]
    fn rotated_heading() {
        // R(π/2)·(1, 0) = (cos π/2, sin π/2) = (0, 1)
        let q = base_step(&BasePose::at(0.0, 0.0, FRAC_PI_2), [1.0, 0.0], 0.04);
        assert!(q.x.abs() < 1e-15);
        assert!((q.y - 0.04).abs() < 1e-15);
        assert_eq!(q.yaw, FRAC_PI_2);
    }

    #[test]
    fn yaw_range() {
        assert_eq!(normalize_yaw(PI), PI);
        assert_eq!(normalize_yaw(-PI), PI);
        assert!((normalize_yaw(2.5 * PI) - 0.5 * PI).abs() < 1e-12);
    }
}
