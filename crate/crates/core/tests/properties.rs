use proptest::prelude::*;

use dsnprint::correlate::masked_corr_counted;
use dsnprint::filter::{bin_radius, build_hp_mask, dct2, dct_residue, idct2, DctFilterSpec, Plane};
use dsnprint::fingerprint::{build_reference, saturation_mask, SaturationMask};
use dsnprint::frame_io::{decode_pgm, encode_pgm, Frame, ReferencePattern};
use dsnprint::simulate::{capture_dark, capture_flat, SensorParams, SensorProfile};
use dsnprint::thermal::{
    activation_energy, fit_exponential, identify_temperature, slope_for_activation_energy,
    IdentifyOptions, DEFAULT_GRID_STEP_C,
};

fn plane(max_side: usize) -> impl Strategy<Value = Plane> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(-65536.0..65536.0f64, w * h)
            .prop_map(move |d| Plane::new(w, h, d).unwrap())
    })
}

fn frame(max_side: usize) -> impl Strategy<Value = Frame> {
    (1..=max_side, 1..=max_side, 8u8..=16).prop_flat_map(|(w, h, bd)| {
        let full = ((1u32 << bd) - 1) as u16;
        prop::collection::vec(0..=full, w * h).prop_map(move |d| Frame::new(w, h, bd, d).unwrap())
    })
}

fn pattern(max_side: usize) -> impl Strategy<Value = ReferencePattern> {
    (1..=max_side, 1..=max_side, 1u32..1000, -5000i32..12000).prop_flat_map(|(w, h, n, centi)| {
        (
            prop::collection::vec(-1e3f32..1e3, w * h),
            prop::collection::vec(any::<bool>(), w * h),
        )
            .prop_map(move |(d, m)| {
                let data = d
                    .iter()
                    .zip(&m)
                    .map(|(&v, &k)| if k { 0.0 } else { f64::from(v) })
                    .collect();
                ReferencePattern::new(w, h, data, m, n, f64::from(centi) / 100.0).unwrap()
            })
    })
}

/// A correlation operand pair with an exclusion mask that keeps at least
/// two pixels.
fn corr_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>)> {
    (3usize..200).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0..100.0f64, n),
            prop::collection::vec(-100.0..100.0f64, n),
            prop::collection::vec(prop::bool::weighted(0.3), n),
        )
            .prop_map(|(x, y, mut m)| {
                m[0] = false;
                m[1] = false;
                (x, y, m)
            })
    })
}

fn as_pattern(y: &[f64], mask: &[bool]) -> ReferencePattern {
    let data = y
        .iter()
        .zip(mask)
        .map(|(&v, &k)| if k { 0.0 } else { v })
        .collect();
    ReferencePattern::new(y.len(), 1, data, mask.to_vec(), 1, 0.0).unwrap()
}

fn corr(x: &[f64], y: &[f64], mask: &[bool]) -> Option<(f64, usize)> {
    let xp = Plane::new(x.len(), 1, x.to_vec()).unwrap();
    masked_corr_counted(&xp, &as_pattern(y, mask), None).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dct_round_trip(p in plane(64)) {
        let back = idct2(&dct2(&p));
        for (a, b) in p.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn dct_preserves_energy(p in plane(48)) {
        let e = p.energy();
        let c = dct2(&p).energy();
        prop_assert!((e - c).abs() <= 1e-6 * e.max(1e-300));
    }

    #[test]
    fn residue_is_linear_and_kills_constants(
        (a, b) in (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            let f = move || prop::collection::vec(0u16..512, w * h)
                .prop_map(move |d| Frame::new(w, h, 10, d).unwrap());
            (f(), f())
        }),
        c in 0u16..1024,
    ) {
        let spec = DctFilterSpec::default();
        let sum = Frame::new(
            a.width(),
            a.height(),
            10,
            a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
        ).unwrap();
        let ra = dct_residue(&a, &spec);
        let rb = dct_residue(&b, &spec);
        let rs = dct_residue(&sum, &spec);
        for i in 0..ra.data().len() {
            prop_assert!((rs.data()[i] - ra.data()[i] - rb.data()[i]).abs() <= 1e-9);
        }
        let flat = Frame::new(a.width(), a.height(), 10, vec![c; a.data().len()]).unwrap();
        prop_assert!(dct_residue(&flat, &spec).data().iter().all(|v| v.abs() <= 1e-9));
        prop_assert_eq!(dct_residue(&a, &spec), ra);
    }

    #[test]
    fn gain_is_monotone_in_radius(w in 1usize..40, h in 1usize..40, c in 0.01f64..3.1) {
        let spec = DctFilterSpec::new(c).unwrap();
        let mask = build_hp_mask(&spec, w, h);
        let mut bins: Vec<(f64, f64)> = (0..h)
            .flat_map(|v| (0..w).map(move |u| (u, v)))
            .map(|(u, v)| (bin_radius(u, v, w, h), mask.get(u, v)))
            .collect();
        bins.sort_by(|x, y| x.0.total_cmp(&y.0));
        for pair in bins.windows(2) {
            prop_assert!(pair[1].1 >= pair[0].1);
        }
    }

    #[test]
    fn pattern_bytes_round_trip(p in pattern(24)) {
        let back = ReferencePattern::from_bytes(&p.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn pgm_round_trip(f in frame(24)) {
        prop_assert_eq!(decode_pgm(&encode_pgm(&f)).unwrap(), f);
    }

    #[test]
    fn decoded_samples_stay_in_range(
        w in 1usize..6, h in 1usize..6, bits in 8u8..=16,
        body in prop::collection::vec(any::<u8>(), 0..80),
    ) {
        let mut bytes = format!("P5\n{w} {h}\n{}\n", (1u32 << bits) - 1).into_bytes();
        bytes.extend(body);
        if let Ok(f) = decode_pgm(&bytes) {
            prop_assert!(f.data().iter().all(|&v| u32::from(v) <= f.full_scale()));
        }
    }

    #[test]
    fn adding_a_frame_never_unmasks(
        frames in (1usize..8, 1usize..8).prop_flat_map(|(w, h)| {
            prop::collection::vec(
                prop::collection::vec(0u16..=255, w * h)
                    .prop_map(move |d| Frame::new(w, h, 8, d).unwrap()),
                2..5,
            )
        }),
        t in 0.5f64..0.99,
    ) {
        let fewer = saturation_mask(&frames[..frames.len() - 1], t).unwrap();
        let all = saturation_mask(&frames, t).unwrap();
        for (a, b) in fewer.bits().iter().zip(all.bits()) {
            prop_assert!(!a || *b);
        }
    }

    #[test]
    fn reference_is_order_free_and_zero_mean(
        (w, h, residues, rot) in (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
            (
                Just(w),
                Just(h),
                prop::collection::vec(
                    prop::collection::vec(-50.0..50.0f64, w * h)
                        .prop_map(move |d| Plane::new(w, h, d).unwrap()),
                    1..8,
                ),
                0usize..8,
            )
        }),
        mask_bits in prop::collection::vec(prop::bool::weighted(0.2), 100),
    ) {
        let mask = SaturationMask::from_bits(w, h, mask_bits[..w * h].to_vec()).unwrap();
        let p = build_reference(&residues, &mask, 25.0).unwrap();
        let mut shuffled = residues.clone();
        shuffled.rotate_left(rot % residues.len());
        shuffled.reverse();
        let q = build_reference(&shuffled, &mask, 25.0).unwrap();
        for (a, b) in p.data().iter().zip(q.data()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let kept: Vec<f64> = p.data().iter().zip(mask.bits()).filter(|(_, &m)| !m).map(|(v, _)| *v).collect();
        if !kept.is_empty() {
            prop_assert!((kept.iter().sum::<f64>() / kept.len() as f64).abs() <= 1e-9);
        }
        prop_assert_eq!(p.frame_count() as usize, residues.len());
    }

    #[test]
    fn correlation_is_symmetric_and_bounded((x, y, m) in corr_case()) {
        if let (Some((r1, n1)), Some((r2, n2))) = (corr(&x, &y, &m), corr(&y, &x, &m)) {
            prop_assert!((r1 - r2).abs() <= 1e-12);
            prop_assert_eq!(n1, n2);
            prop_assert_eq!(n1, m.iter().filter(|&&k| !k).count());
            prop_assert!(r1.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn correlation_is_affine_invariant(
        (x, y, m) in corr_case(),
        alpha in 0.01f64..100.0,
        beta in -1e3f64..1e3,
    ) {
        let Some((r, _)) = corr(&x, &y, &m) else { return Ok(()); };
        let up: Vec<f64> = x.iter().map(|v| alpha * v + beta).collect();
        let down: Vec<f64> = x.iter().map(|v| -alpha * v + beta).collect();
        prop_assert!((corr(&up, &y, &m).unwrap().0 - r).abs() <= 1e-9);
        prop_assert!((corr(&down, &y, &m).unwrap().0 + r).abs() <= 1e-9);
    }

    #[test]
    fn fit_scales_with_data(
        a in 0.001f64..1.0,
        b in -0.05f64..0.1,
        noise in prop::collection::vec(-0.02f64..0.02, 9),
        alpha in 0.1f64..50.0,
    ) {
        let pts: Vec<(f64, f64)> = noise
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let t = 10.0 + 5.0 * i as f64;
                (t, a * (b * t).exp() * (1.0 + e))
            })
            .collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(t, y)| (t, alpha * y)).collect();
        let f = fit_exponential(&pts).unwrap();
        let g = fit_exponential(&scaled).unwrap();
        // the solver stops on a 1e-12 relative SSE change, which pins the
        // parameters only to about its square root
        prop_assert!((g.a / (alpha * f.a) - 1.0).abs() <= 1e-6);
        prop_assert!((g.b - f.b).abs() <= 1e-6);
        prop_assert!((g.adj_r2 - f.adj_r2).abs() <= 1e-9);
        prop_assert!(f.adj_r2 <= 1.0);
    }

    #[test]
    fn breakpoint_follows_scale_and_shift(
        knee in 15.0f64..45.0,
        b in 0.01f64..0.08,
        noise in prop::collection::vec(-0.01f64..0.01, 9),
        alpha in 0.1f64..20.0,
        shift_steps in -200i32..200,
    ) {
        let pts: Vec<(f64, f64)> = noise
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let t = 10.0 + 5.0 * i as f64;
                (t, 0.01 * (b * t.min(knee)).exp() * (1.0 + e))
            })
            .collect();
        let opts = IdentifyOptions::default();
        let base = identify_temperature(&pts, &opts).unwrap();

        let scaled: Vec<_> = pts.iter().map(|&(t, y)| (t, alpha * y)).collect();
        let s = identify_temperature(&scaled, &opts).unwrap();
        prop_assert!((s.t_star_c - base.t_star_c).abs() <= DEFAULT_GRID_STEP_C + 1e-9);

        let delta = f64::from(shift_steps) * DEFAULT_GRID_STEP_C;
        let shifted: Vec<_> = pts.iter().map(|&(t, y)| (t + delta, y)).collect();
        let m = identify_temperature(&shifted, &opts).unwrap();
        prop_assert!((m.t_star_c - (base.t_star_c + delta)).abs() <= DEFAULT_GRID_STEP_C + 1e-9);
        prop_assert!((m.b - base.b).abs() <= 1e-9);
        prop_assert_eq!(base.forensic_range_c, (base.t_star_c - 4.5, base.t_star_c + 4.5));
    }

    #[test]
    fn energy_is_linear_and_invertible(b1 in -0.2f64..0.2, b2 in -0.2f64..0.2, t in 200.0f64..400.0) {
        let e1 = activation_energy(b1, t).unwrap();
        let e2 = activation_energy(b2, t).unwrap();
        let mid = activation_energy(0.5 * (b1 + b2), t).unwrap();
        prop_assert!((mid - 0.5 * (e1 + e2)).abs() <= 1e-12);
        prop_assert!((slope_for_activation_energy(e1, t).unwrap() - b1).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulator_is_seed_deterministic(seed in any::<u64>(), idx in any::<u64>(), t in -20.0f64..80.0) {
        let params = SensorParams::default().with_size(17, 9).with_seed(seed);
        let a = SensorProfile::generate(params.clone()).unwrap();
        let b = SensorProfile::generate(params).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(capture_dark(&a, t, 0.01, idx).unwrap(), capture_dark(&b, t, 0.01, idx).unwrap());
        prop_assert_eq!(capture_flat(&a, t, 0.01, 0.0, idx).unwrap(), capture_dark(&a, t, 0.01, idx).unwrap());
    }
}
