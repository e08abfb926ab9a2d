use proptest::prelude::*;

use tribody_cli::config::Range;
use tribody_cli::LoadedConfig;

proptest! {
    #[test]
    fn range_is_inclusive_and_directional(start in -500.0f64..500.0, step in 0.5f64..50.0, count in 1usize..60, down in any::<bool>()) {
        let step = if down { -step } else { step };
        let stop = start + step * (count as f64 - 1.0) + 0.3 * step;
        let v = Range { start, stop, step }.values("r").unwrap();
        prop_assert_eq!(v.len(), count);
        prop_assert_eq!(v[0], start);
        for w in v.windows(2) {
            prop_assert!((w[1] - w[0] - step).abs() < 1e-9);
        }
        let last = *v.last().unwrap();
        prop_assert!((stop - last) * step.signum() >= -1e-9);
        prop_assert!((stop - last).abs() < step.abs());
    }

    #[test]
    fn range_pointing_away_is_rejected(start in -500.0f64..500.0, step in 0.5f64..50.0, gap in 1.0f64..100.0) {
        let r = Range { start, stop: start - gap, step };
        prop_assert!(r.values("sweep.range_hz").unwrap_err().to_string().contains("sweep.range_hz"));
    }

    #[test]
    fn gaps_outside_the_table_name_their_key(d1 in 1.0f64..2000.0, d2 in 60.0f64..900.0) {
        let text = format!("[geometry]\nd1_nm = {d1}\nd2_nm = {d2}\n");
        let result = LoadedConfig::from_str(&text, ".");
        let inside = (50.0..=1000.0).contains(&d1);
        match result {
            Ok(_) => prop_assert!(inside),
            Err(e) => {
                prop_assert!(!inside, "{}", e);
                prop_assert_eq!(e.exit_code(), 2);
                prop_assert!(e.to_string().contains("geometry.d1_nm"), "{}", e);
            }
        }
    }
}
