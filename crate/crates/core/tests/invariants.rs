//! Property tests for the optical-path geometry: randomized invariants
//! that must hold for every admissible configuration.

use enclosure::geometry::{path_length, snell_point, LayeredMedium, Point3};
use enclosure::indicator::LogVal;
use proptest::prelude::*;

fn medium_strategy() -> impl Strategy<Value = LayeredMedium> {
    (0.3f64..2.0, 1.1f64..4.0)
        .prop_map(|(gp, ratio)| LayeredMedium::new(gp, gp * ratio).unwrap())
}

fn lower_point() -> impl Strategy<Value = Point3> {
    (-1.5f64..1.5, -1.5f64..1.5, -2.5f64..-0.2).prop_map(|(a, b, c)| Point3::new(a, b, c))
}

fn upper_point() -> impl Strategy<Value = Point3> {
    (-1.5f64..1.5, -1.5f64..1.5, 0.2f64..2.5).prop_map(|(a, b, c)| Point3::new(a, b, c))
}

proptest! {
    /// The refraction point minimizes the optical path: any other interface
    /// point gives a path at least as long.
    #[test]
    fn snell_point_is_global_minimizer(
        medium in medium_strategy(),
        x in lower_point(),
        y in upper_point(),
        dz1 in -3.0f64..3.0,
        dz2 in -3.0f64..3.0,
    ) {
        let s = snell_point(&x, &y, &medium).unwrap();
        let z = [s.z_prime[0] + dz1, s.z_prime[1] + dz2];
        let l_other = path_length(&x, &y, z, &medium).unwrap();
        prop_assert!(l_other >= s.l_value - 1e-12);
    }

    /// Refraction law at the interface: the sines of the two ray angles are
    /// in the ratio of the wave speeds.
    #[test]
    fn refraction_residual_vanishes(
        medium in medium_strategy(),
        x in lower_point(),
        y in upper_point(),
    ) {
        let s = snell_point(&x, &y, &medium).unwrap();
        let residual = s.theta_minus.sin() * medium.slow_minus()
            - s.theta_plus.sin() * medium.slow_plus();
        prop_assert!(residual.abs() <= 1e-10, "residual {residual}");
    }

    /// With equal wave speeds the broken ray degenerates to the straight
    /// segment: the optical path is the Euclidean distance over the speed.
    #[test]
    fn equal_speeds_degenerate_to_straight_line(
        gamma in 0.3f64..4.0,
        x in lower_point(),
        y in upper_point(),
    ) {
        let medium = LayeredMedium::equal_speeds(gamma).unwrap();
        let s = snell_point(&x, &y, &medium).unwrap();
        let straight = x.dist(&y) / gamma.sqrt();
        prop_assert!((s.l_value - straight).abs() <= 1e-9 * straight.max(1.0));
        // the refraction point lies on the segment: where it crosses x3 = 0
        let t = -x.x3 / (y.x3 - x.x3);
        let cross = [x.x1 + t * (y.x1 - x.x1), x.x2 + t * (y.x2 - x.x2)];
        prop_assert!((s.z_prime[0] - cross[0]).hypot(s.z_prime[1] - cross[1]) <= 1e-6);
    }

    /// Horizontal translation invariance: shifting source and receiver
    /// together shifts the refraction point and preserves the distance.
    #[test]
    fn horizontal_translation_invariance(
        medium in medium_strategy(),
        x in lower_point(),
        y in upper_point(),
        s1 in -5.0f64..5.0,
        s2 in -5.0f64..5.0,
    ) {
        let a = snell_point(&x, &y, &medium).unwrap();
        let shift = Point3::new(s1, s2, 0.0);
        let b = snell_point(&x.add(&shift), &y.add(&shift), &medium).unwrap();
        prop_assert!((a.l_value - b.l_value).abs() <= 1e-9 * a.l_value.max(1.0));
        prop_assert!((a.z_prime[0] + s1 - b.z_prime[0]).abs() <= 1e-6);
        prop_assert!((a.z_prime[1] + s2 - b.z_prime[1]).abs() <= 1e-6);
    }

    /// Signed log-scale addition agrees with plain arithmetic wherever the
    /// latter does not overflow.
    #[test]
    fn logval_addition_matches_values(
        a in -1e3f64..1e3,
        b in -1e3f64..1e3,
    ) {
        let sum = LogVal::from_value(a).add(&LogVal::from_value(b)).value();
        prop_assert!((sum - (a + b)).abs() <= 1e-9 * (a.abs() + b.abs()).max(1.0));
    }
}
