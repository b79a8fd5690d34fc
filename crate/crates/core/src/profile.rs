//! Fixed smooth profiles shared by partitions and cutoffs.

/// Quintic smoothstep on [0, 1], clamped outside. C² with vanishing first
/// and second derivatives at both ends.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    (t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)).min(1.0)
}

/// Radial bump: 1 at 0, 0 for |t| ≥ 1.
pub fn bump(t: f64) -> f64 {
    smoothstep(1.0 - t.abs())
}

/// The ν profile: 1 on [0, 1/2], 0 on [2/3, ∞), quintic transition between.
pub fn nu(t: f64) -> f64 {
    if t >= 2.0 / 3.0 {
        0.0
    } else {
        1.0 - smoothstep((t - 0.5) * 6.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(nu(0.5), 1.0);
        assert_eq!(nu(2.0 / 3.0), 0.0);
    }

    proptest! {
        #[test]
        fn nu_plateaus(t in 0.0f64..3.0) {
            let v = nu(t);
            prop_assert!((0.0..=1.0).contains(&v));
            if t <= 0.5 { prop_assert_eq!(v, 1.0); }
            if t >= 2.0 / 3.0 { prop_assert_eq!(v, 0.0); }
        }

        #[test]
        fn smoothstep_symmetric(t in 0.0f64..1.0) {
            prop_assert!((smoothstep(t) + smoothstep(1.0 - t) - 1.0).abs() < 1e-14);
        }
    }
}
