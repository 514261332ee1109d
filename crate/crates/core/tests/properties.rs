use proptest::prelude::*;

use otfs_isac::metrics::sensing_errors;
use otfs_isac::{
    embed_pilot, make_data_frame, make_pilot_grid, papr_db, pilot_mask_frame, rdm_bistatic,
    rdm_monostatic, ChannelRealization, Complex64, DDFrame, Detection, FrameDims, PathParams,
    PhysicalConfig, QamConstellation, TimeSignal,
};

fn dims() -> FrameDims {
    FrameDims::new(16, 8).unwrap()
}

proptest! {
    #[test]
    fn embed_touches_only_the_block(seed in any::<u64>(), m0 in 0usize..12, n0 in 0usize..6, mp in 1usize..5, np in 1usize..3) {
        let d = dims();
        let data = make_data_frame(d, &QamConstellation::new(16).unwrap(), seed);
        let pilot = make_pilot_grid(d, (m0, n0), (mp, np), seed ^ 1).unwrap();
        let out = embed_pilot(&data, &pilot).unwrap();
        for m in 0..d.m() {
            for n in 0..d.n() {
                if pilot.contains(m, n) {
                    prop_assert_eq!(out.get(m, n), Complex64::new(pilot.symbol_at(m, n).unwrap(), 0.0));
                } else {
                    prop_assert_eq!(out.get(m, n), data.get(m, n));
                }
            }
        }
    }

    #[test]
    fn mask_depends_only_on_pilot(a in any::<u64>(), b in any::<u64>(), pseed in any::<u64>()) {
        let d = dims();
        let qam = QamConstellation::qpsk();
        let pilot = make_pilot_grid(d, (3, 2), (7, 4), pseed).unwrap();
        let fa = pilot_mask_frame(&embed_pilot(&make_data_frame(d, &qam, a), &pilot).unwrap(), &pilot).unwrap();
        let fb = pilot_mask_frame(&embed_pilot(&make_data_frame(d, &qam, b), &pilot).unwrap(), &pilot).unwrap();
        prop_assert_eq!(fa, fb);
    }

    #[test]
    fn seeded_generation_reproduces(seed in any::<u64>()) {
        let d = dims();
        let qam = QamConstellation::new(64).unwrap();
        prop_assert_eq!(make_data_frame(d, &qam, seed), make_data_frame(d, &qam, seed));
        prop_assert_eq!(
            make_pilot_grid(d, (0, 0), (16, 8), seed).unwrap(),
            make_pilot_grid(d, (0, 0), (16, 8), seed).unwrap()
        );
    }

    #[test]
    fn full_frame_pilot_bistatic_is_monostatic(seed in any::<u64>(), l in 0usize..16, k in 0usize..8) {
        let d = dims();
        let pilot = make_pilot_grid(d, (0, 0), (16, 8), seed).unwrap();
        let x = embed_pilot(&DDFrame::zeros(d), &pilot).unwrap();
        let ch = ChannelRealization::single(d, Complex64::new(0.6, -0.2), l, k).unwrap();
        let y = otfs_isac::apply_dd_channel(&x, &ch).unwrap();
        let bi = rdm_bistatic(&y, &pilot).unwrap();
        let mono = rdm_monostatic(&y, &x).unwrap();
        prop_assert_eq!(bi.z(), mono.z());
    }

    #[test]
    fn impulse_papr_is_length(len in 1usize..500, at in 0usize..500, amp in 0.01..100.0f64) {
        let mut samples = vec![Complex64::new(0.0, 0.0); len];
        samples[at % len] = Complex64::new(0.0, amp);
        let signal = TimeSignal::new(FrameDims::new(len, 1).unwrap(), samples, 1.0).unwrap();
        prop_assert!((papr_db(&signal).unwrap() - 10.0 * (len as f64).log10()).abs() < 1e-12);
    }

    #[test]
    fn sensing_errors_ignore_detection_order(shift in 0usize..3, dl in 0usize..3, dk in 0usize..3) {
        let cfg = PhysicalConfig::new(60e9, 480e3, 64, 16).unwrap();
        let truth = ChannelRealization::new(cfg.dims(), vec![
            PathParams::new(Complex64::new(1.0, 0.0), 4, 2).unwrap(),
            PathParams::new(Complex64::new(0.5, 0.0), 20, 5).unwrap(),
            PathParams::new(Complex64::new(0.3, 0.0), 40, 7).unwrap(),
        ]).unwrap();
        let det = |l: usize, k: usize| Detection {
            l,
            k,
            magnitude: 1.0,
            range_m: cfg.bin_to_range(l),
            speed_mps: cfg.bin_to_speed_signed(k),
        };
        let mut dets = vec![det(4 + dl, 2), det(20, 5 + dk), det(41, 7)];
        let reference = sensing_errors(&dets, &truth, &cfg);
        dets.rotate_left(shift);
        dets.swap(0, 2);
        prop_assert_eq!(sensing_errors(&dets, &truth, &cfg), reference);
    }
}
