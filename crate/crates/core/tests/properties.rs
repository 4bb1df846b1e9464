use proptest::prelude::*;

use serpens::generate::{generate_random, RandomSpec};
use serpens::layout::{
    compile, deserialize_image, map_element, serialize_image, Config, SerpensImage, LANES_PER_CHANNEL,
};
use serpens::models::cycle_count;
use serpens::mtx::{parse_matrix_market, write_matrix_market};
use serpens::sim::{check_hazards, simulate, verify_trace, SimOptions};
use serpens::sparse::{max_relative_error, reference_spmv, DenseVector, SparseMatrix, Triplet};

fn sorted_bits(t: impl IntoIterator<Item = Triplet>) -> Vec<(usize, usize, u32)> {
    let mut v: Vec<_> = t.into_iter().map(|t| (t.row, t.col, t.val.to_bits())).collect();
    v.sort_unstable();
    v
}

fn arb_config() -> impl Strategy<Value = Config> {
    (
        1usize..5,
        prop::sample::select(vec![16usize, 32, 128, 8192]),
        1usize..6,
        1usize..3,
        1usize..40,
    )
        .prop_map(|(channels, segment_width, latency, urams_per_pe, uram_depth)| Config {
            channels,
            segment_width,
            latency,
            urams_per_pe,
            uram_depth,
            ..Config::default()
        })
}

fn arb_matrix() -> impl Strategy<Value = SparseMatrix> {
    (
        1usize..300,
        1usize..300,
        0usize..2000,
        any::<u64>(),
        prop::sample::select(vec![0.0, 0.8, 1.5]),
    )
        .prop_map(|(m, k, nnz, seed, skew)| {
            let nnz = nnz.min(m * k);
            generate_random(&RandomSpec {
                nrows: m,
                ncols: k,
                nnz,
                seed,
                skew,
            })
            .unwrap()
        })
}

fn vectors(a: &SparseMatrix, seed: u64) -> (DenseVector, DenseVector) {
    let f = |i: usize, salt: u64| {
        let h = (i as u64 ^ seed.rotate_left(17) ^ salt).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        ((h >> 40) as f32 / (1u64 << 24) as f32) * 2.0 - 1.0
    };
    let x = (0..a.ncols()).map(|i| f(i, 1)).collect::<Vec<_>>();
    let y = (0..a.nrows()).map(|i| f(i, 2)).collect::<Vec<_>>();
    (x.into(), y.into())
}

fn all_lanes(img: &SerpensImage) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..img.config().channels).flat_map(|c| (0..LANES_PER_CHANNEL).map(move |l| (c, l)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn compile_preserves_the_triplet_multiset(a in arb_matrix(), cfg in arb_config()) {
        let img = compile(&a, &cfg).unwrap();
        prop_assert_eq!(sorted_bits(img.decode_triplets()), sorted_bits(a.triplets()));
    }

    #[test]
    fn every_lane_is_hazard_free_and_segment_ordered(a in arb_matrix(), cfg in arb_config()) {
        let img = compile(&a, &cfg).unwrap();
        for (c, l) in all_lanes(&img) {
            prop_assert!(check_hazards(&img.lane_stream(c, l), cfg.latency).is_empty());
        }
        // segment (and window) indices never decrease along a lane
        let mut last = vec![(0usize, 0usize); cfg.pes()];
        for (p, _) in img.valid_elements() {
            let key = (p.row_window, p.segment);
            prop_assert!(key >= last[p.pe()]);
            last[p.pe()] = key;
        }
        let stats = img.stats();
        prop_assert!(stats.padding_ratio >= 0.0 && stats.padding_ratio < 1.0 || stats.total_slots == 0);
        for c in 0..cfg.channels {
            prop_assert!(stats.words_per_channel[c] >= stats.valid_per_channel[c].div_ceil(8));
        }
    }

    #[test]
    fn compile_is_deterministic_and_serializes_exactly(a in arb_matrix(), cfg in arb_config()) {
        let b1 = serialize_image(&compile(&a, &cfg).unwrap());
        let b2 = serialize_image(&compile(&a, &cfg).unwrap());
        prop_assert_eq!(&b1, &b2);
        prop_assert_eq!(serialize_image(&deserialize_image(&b1).unwrap()), b1);
    }

    #[test]
    fn simulator_matches_oracle(a in arb_matrix(), cfg in arb_config(), seed in any::<u64>(),
                                ab in prop::sample::select(vec![(1.0f32, 0.0f32), (2.0, -1.0), (0.0, 1.0), (0.5, 3.0)])) {
        let img = compile(&a, &cfg).unwrap();
        let (x, y) = vectors(&a, seed);
        let r = simulate(&img, &x, &y, ab.0, ab.1, SimOptions { trace: true, ..SimOptions::default() }).unwrap();
        let want = reference_spmv(&a, &x, &y, ab.0, ab.1).unwrap();
        prop_assert!(max_relative_error(r.y_out.as_slice(), want.as_slice()) <= 1e-4);
        prop_assert_eq!(r.hazard_violations, 0);
        prop_assert!(verify_trace(&r).pass);
        let bound = cycle_count(a.nrows() as u64, a.ncols() as u64, a.nnz() as u64, cfg.channels as u64);
        prop_assert!(r.cycles.total >= bound, "{} < {}", r.cycles.total, bound);
    }

    #[test]
    fn matrix_market_round_trip(a in arb_matrix()) {
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b = parse_matrix_market(&buf[..]).unwrap();
        prop_assert_eq!(sorted_bits(b.triplets()), sorted_bits(a.triplets()));
    }

    #[test]
    fn permutation_matrix_permutes_exactly(perm in Just((0..200usize).collect::<Vec<_>>()).prop_shuffle(),
                                           xs in prop::collection::vec(-1e6f32..1e6, 200)) {
        let a = SparseMatrix::from_triplets(200, 200, perm.iter().enumerate().map(|(i, &j)| Triplet::new(i, j, 1.0)).collect()).unwrap();
        let x = DenseVector::new(xs.clone());
        let y = reference_spmv(&a, &x, &DenseVector::zeros(200), 1.0, 0.0).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            prop_assert_eq!(y[i].to_bits(), xs[j].to_bits());
        }
        let img = compile(&a, &Config::default()).unwrap();
        let r = simulate(&img, &x, &DenseVector::zeros(200), 1.0, 0.0, SimOptions::default()).unwrap();
        prop_assert_eq!(r.y_out, y);
    }

    #[test]
    fn oracle_is_linear_in_alpha(a in arb_matrix(), seed in any::<u64>(), a1 in 0.1f32..4.0, a2 in 0.1f32..4.0) {
        let (x, y) = vectors(&a, seed);
        let whole = reference_spmv(&a, &x, &y, a1 + a2, 0.0).unwrap();
        let p1 = reference_spmv(&a, &x, &y, a1, 0.0).unwrap();
        let p2 = reference_spmv(&a, &x, &y, a2, 0.0).unwrap();
        let sum: Vec<f32> = p1.as_slice().iter().zip(p2.as_slice()).map(|(u, v)| u + v).collect();
        prop_assert!(max_relative_error(&sum, whole.as_slice()) <= 1e-6);
    }
}

/// The scheduler keeps each color's elements in CSR order and segments in
/// ascending order, so every row is accumulated in ascending column order,
/// exactly like the oracle.
#[test]
fn simulator_is_bitwise_equal_to_oracle() {
    for seed in 0..20 {
        let a = generate_random(&RandomSpec::power_law(700, 900, 9000, seed, 1.1)).unwrap();
        let cfg = Config {
            channels: 2,
            segment_width: 128,
            latency: 3,
            ..Config::default()
        };
        let img = compile(&a, &cfg).unwrap();
        let (x, y) = vectors(&a, seed);
        let r = simulate(&img, &x, &y, 1.5, -0.5, SimOptions::default()).unwrap();
        let want = reference_spmv(&a, &x, &y, 1.5, -0.5).unwrap();
        assert_eq!(r.y_out, want);
    }
}

#[test]
fn pe_address_spaces_are_disjoint() {
    let cfg = Config {
        channels: 2,
        urams_per_pe: 1,
        uram_depth: 8,
        ..Config::default()
    };
    let mut seen = std::collections::HashSet::new();
    for row in 0..cfg.window_rows() {
        let p = map_element(row, 0, &cfg);
        assert!(p.address() < cfg.pe_addresses());
        assert!(
            seen.insert((p.pe(), p.address(), p.row_local % 2)),
            "row {row} collides"
        );
    }
}
