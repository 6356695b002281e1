use proptest::prelude::*;
use wrapped_haptics::display::{map_uncertainty, render, ArmLocation, Layout, MAX_RENDER_PSI, MIN_RENDER_PSI};

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

proptest! {
    #[test]
    fn mapping_is_monotone_and_bounded(a in -1.0..2.0f64, b in -1.0..2.0f64) {
        let (pa, pb) = (map_uncertainty(a).unwrap(), map_uncertainty(b).unwrap());
        prop_assert!((MIN_RENDER_PSI..=MAX_RENDER_PSI).contains(&pa));
        if a < b {
            prop_assert!(pa <= pb);
        }
    }

    #[test]
    fn rendering_preserves_argmax(u in prop::collection::vec(0.0..1.0f64, 3)) {
        let local = render(&Layout::default_local(), &u, 0.0).unwrap();
        let felt: Vec<f64> = local.locations.iter().map(|l| l.pressures[0]).collect();
        prop_assert_eq!(argmax(&felt), argmax(&u));

        let global = render(&Layout::default_global(), &u, 0.0).unwrap();
        for loc in &global.locations {
            prop_assert_eq!(argmax(&loc.pressures), argmax(&u));
        }
    }

    #[test]
    fn global_locations_match_bitwise(u in prop::collection::vec(0.0..1.0f64, 1..6)) {
        let layout = Layout::global(&ArmLocation::ALL, u.len()).unwrap();
        let frame = render(&layout, &u, 1.5).unwrap();
        let first: Vec<u64> = frame.locations[0].pressures.iter().map(|p| p.to_bits()).collect();
        for loc in &frame.locations[1..] {
            let bits: Vec<u64> = loc.pressures.iter().map(|p| p.to_bits()).collect();
            prop_assert_eq!(&bits, &first);
        }
    }

    #[test]
    fn local_locations_are_independent(u in prop::collection::vec(0.0..1.0f64, 3), j in 0usize..3, v in 0.0..1.0f64) {
        let layout = Layout::default_local();
        let before = render(&layout, &u, 0.0).unwrap();
        let mut changed = u.clone();
        changed[j] = v;
        let after = render(&layout, &changed, 0.0).unwrap();
        for i in (0..3).filter(|&i| i != j) {
            prop_assert_eq!(&before.locations[i].pressures, &after.locations[i].pressures);
        }
    }
}
