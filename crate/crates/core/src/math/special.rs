//! Sphere and ball constants.

#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

/// Surface area `|∂B(0,1)| = 2 π^{n/2} / Γ(n/2)` of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / libm::tgamma(h)
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n) / n as f64
}

/// `E|ω₁|` for `ω` uniform on the unit sphere of `R^m` (`m ≥ 1`).
pub fn mean_abs_coordinate(m: usize) -> f64 {
    let m = m as f64;
    libm::tgamma(m / 2.0) / (PI.sqrt() * libm::tgamma((m + 1.0) / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_abs_coordinate_low_dims() {
        assert!((mean_abs_coordinate(1) - 1.0).abs() < 1e-15);
        assert!((mean_abs_coordinate(2) - 2.0 / PI).abs() < 1e-15);
        assert!((mean_abs_coordinate(3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }
}
