//! Gamma function and unit-ball volumes.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function (Lanczos approximation with reflection for x < 1/2).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Lebesgue measure of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

/// Surface measure of the unit sphere in R^n, n * omega_n.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factorials() {
        let mut f = 1.0;
        for k in 1..15 {
            assert_relative_eq!(gamma(k as f64), f, max_relative = 1e-13);
            f *= k as f64;
        }
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn ball_volumes_match_recursion() {
        // omega_n = 2 pi / n * omega_{n-2}
        let mut even = 1.0;
        let mut odd = 2.0;
        assert_relative_eq!(unit_ball_volume(1), odd, max_relative = 1e-13);
        for n in 2..12 {
            if n % 2 == 0 {
                even *= 2.0 * PI / n as f64;
                assert_relative_eq!(unit_ball_volume(n), even, max_relative = 1e-13);
            } else {
                odd *= 2.0 * PI / n as f64;
                assert_relative_eq!(unit_ball_volume(n), odd, max_relative = 1e-13);
            }
        }
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, max_relative = 1e-13);
    }
}
