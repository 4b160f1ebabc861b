use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};

/// Cross-product matrix: `skew(a) * b == a x b`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(PI - 0.01 + 0.02), -PI + 0.01, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(6.2), 6.2 - TAU, epsilon = 1e-12);
        for i in -1000..1000 {
            let a = wrap_angle(i as f64 * 0.0173);
            assert!(a > -PI && a <= PI);
        }
    }

    #[test]
    fn skew_is_cross() {
        let a = Vector3::new(1.0, -2.0, 0.5);
        let b = Vector3::new(0.3, 0.7, -1.1);
        assert_relative_eq!(skew(&a) * b, a.cross(&b));
    }
}
