use nnsketch::oracle::{gen_queries, gen_random, Distribution};
use nnsketch::{BuildOptions, DecodeError, Engine, PointSet, Sketch};
use proptest::prelude::*;

fn sketch(points: &PointSet, engine: Engine, distances: bool, seed: u64) -> Sketch {
    let params = points.params(0.25, 0.1, points.len().min(4), seed).unwrap();
    let opts = BuildOptions {
        engine,
        distances,
        ..BuildOptions::default()
    };
    Sketch::build(points, &params, &opts).unwrap()
}

fn small_sets() -> impl Strategy<Value = (PointSet, u64)> {
    (1usize..=3, 3usize..=24, any::<u64>()).prop_flat_map(|(d, n, seed)| {
        let n = n.max(d);
        prop::collection::vec(-64i64..=64, n * d)
            .prop_map(move |coords| (PointSet::new(d, 64, coords).unwrap(), seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_blobs_are_canonical((points, seed) in small_sets(), distances in any::<bool>()) {
        let sk = sketch(&points, Engine::Exact, distances, seed);
        let (blob, sizes) = sk.encode_with_breakdown();
        prop_assert_eq!(sizes.total(), blob.len() as u64 * 8);
        let back = Sketch::decode(&blob).unwrap();
        prop_assert_eq!(back.encode(), blob);
        for y in gen_queries(&points, 6, seed) {
            prop_assert_eq!(back.query_ann(&y).unwrap(), sk.query_ann(&y).unwrap());
            if distances {
                prop_assert_eq!(back.query_all_distances(&y).unwrap(), sk.query_all_distances(&y).unwrap());
            }
        }
    }

    #[test]
    fn quadtree_blobs_are_canonical((points, seed) in small_sets()) {
        let sk = sketch(&points, Engine::Quadtree, false, seed);
        let blob = sk.encode();
        let back = Sketch::decode(&blob).unwrap();
        prop_assert_eq!(&back, &sk);
        prop_assert_eq!(back.encode(), blob);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = Sketch::decode(&bytes);
    }
}

fn fixture() -> Vec<u8> {
    let points = gen_random(32, 2, 128, Distribution::Uniform, 4).unwrap();
    sketch(&points, Engine::Exact, true, 4).encode()
}

#[test]
fn header_is_checked() {
    let blob = fixture();
    assert_eq!(&blob[..4], b"NNSK");
    assert_eq!(u16::from_le_bytes([blob[4], blob[5]]), 1);

    let mut bad = blob.clone();
    bad[0] = b'X';
    assert!(matches!(Sketch::decode(&bad), Err(DecodeError::BadMagic)));
    let mut bad = blob.clone();
    bad[4] = 2;
    assert!(matches!(Sketch::decode(&bad), Err(DecodeError::UnsupportedVersion(2))));
    assert!(Sketch::decode(&[]).is_err());
}

#[test]
fn every_truncation_and_extension_is_rejected() {
    let blob = fixture();
    for cut in 0..blob.len() {
        assert!(Sketch::decode(&blob[..cut]).is_err(), "prefix of {cut} bytes accepted");
    }
    let mut long = blob.clone();
    long.push(0);
    assert!(Sketch::decode(&long).is_err());
}
