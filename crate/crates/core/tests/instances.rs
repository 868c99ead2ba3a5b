use nnsketch::geometry::dist_sq_int;
use nnsketch::io::{load_points, read_key, save_points, write_key, write_text};
use nnsketch::oracle::{exact_nn, gen_hard_instance, gen_random, Distribution};

#[test]
fn hard_instance_key_matches_brute_force() {
    let inst = gen_hard_instance(32, 0.5, 1024, 8, true).unwrap();
    assert_eq!(inst.k, 4);
    assert_eq!(inst.queries.len(), 32 * 32);
    let mut planted = 0;
    for (y, e) in inst.queries.iter().zip(&inst.key) {
        assert_eq!(*y, inst.query(e.i, e.j));
        let (nn, _) = exact_nn(&inst.points, y).unwrap();
        assert_eq!(nn, e.expected, "query ({}, {})", e.i, e.j);
        planted += inst.bit(e.i, e.j) as usize;
        // The answer is x_i exactly when bit j of x_i is set.
        assert_eq!(e.expected == e.i, inst.bit(e.i, e.j));
    }
    assert_eq!(planted, 32 * 4);
}

#[test]
fn hard_instance_rows_have_the_planted_norms() {
    let inst = gen_hard_instance(16, 0.5, 4096, 2, false).unwrap();
    let s = inst.scale as f64;
    let zero = vec![0i64; inst.points.dim()];
    for i in 0..16 {
        let x = inst.points.row(i);
        // Data coordinates: k entries of s/√k, so ‖x‖ ≈ s, ignoring the id block.
        let data = dist_sq_int(&x[..16], &zero[..16]) as f64;
        assert!((data.sqrt() - s).abs() <= 2.0, "‖x_{i}‖ = {}", data.sqrt());
        assert_eq!(inst.support[i].len(), 4);
    }
}

#[test]
fn files_roundtrip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let points = gen_random(40, 5, 512, Distribution::GaussianClusters { count: 2, spread: 30.0 }, 6).unwrap();

    let bin = dir.path().join("p.npts");
    save_points(&bin, &points).unwrap();
    assert_eq!(load_points(&bin).unwrap(), points);

    let txt = dir.path().join("p.txt");
    std::fs::write(&txt, write_text(&points)).unwrap();
    assert_eq!(load_points(&txt).unwrap(), points);

    let inst = gen_hard_instance(16, 0.5, 1024, 1, false).unwrap();
    assert_eq!(read_key(&write_key(&inst.key)).unwrap(), inst.key);

    std::fs::write(&txt, b"\xff\xfe").unwrap();
    assert!(load_points(&txt).is_err());
}
