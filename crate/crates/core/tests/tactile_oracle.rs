//! Rendered contact patches against the analytic sphere–plane intersection.

use nalgebra::Vector3;
use proptest::prelude::*;
use tactigrasp_core::geometry::{make_primitive, Pose, Primitive};
use tactigrasp_core::tactile::{render_tactile, SensorGeom};

/// Checks the disc of radius `sqrt(2rd − d²)` around `(cy, cz)`: pixel centers more than
/// half a pitch inside are in contact, those more than half a pitch outside are not.
/// Returns the largest in-contact center distance.
fn check_disc(r: f64, d: f64, cy: f64, cz: f64) -> f64 {
    let s = SensorGeom::default();
    let sphere = make_primitive(&Primitive::Sphere { radius: r }, 96).unwrap();
    let frame = render_tactile(&sphere, &Pose::from_translation(Vector3::new(r - d, cy, cz)), &s);
    let a = (2.0 * r * d - d * d).sqrt();
    let pitch = s.pitch();
    let mut reach: f64 = 0.0;
    for row in 0..s.height_px {
        for col in 0..s.width_px {
            let (y, z) = s.pixel_center(col, row);
            let dist = (y - cy).hypot(z - cz);
            let touching = frame.get(col, row) > 0.0;
            if dist < a - pitch / 2.0 {
                assert!(touching, "pixel ({col},{row}) at {dist} inside disc {a}");
            }
            if dist > a + pitch / 2.0 {
                assert!(!touching, "pixel ({col},{row}) at {dist} outside disc {a}");
            }
            if touching {
                reach = reach.max(dist);
            }
        }
    }
    reach
}

#[test]
fn sphere_ten_mm_half_mm_press() {
    let a = (2.0f64 * 0.01 * 0.0005 - 0.0005 * 0.0005).sqrt();
    assert!((a - 0.003122).abs() < 1e-6);
    let reach = check_disc(0.01, 0.0005, 0.0, 0.0);
    assert!((reach - a).abs() <= SensorGeom::default().pitch(), "{reach} vs {a}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn disc_radius_matches_geometry(
        r in 0.006f64..0.02,
        d in 0.0002f64..0.0012,
        cy in -0.002f64..0.002,
        cz in -0.004f64..0.004,
    ) {
        let a = (2.0 * r * d - d * d).sqrt();
        let reach = check_disc(r, d, cy, cz);
        prop_assert!((reach - a).abs() <= SensorGeom::default().pitch());
    }
}
