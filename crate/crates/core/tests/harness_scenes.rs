use meshfuse::geometry::{point_triangle_distance, IndexedMesh, Point3, Triangle};
use meshfuse::harness::scenes::{breakdown_layout, in_center, CENTER_MAX, CENTER_MIN};
use meshfuse::harness::{accuracy_completeness, count_holes, gen_breakdown};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn d(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn distances_match_all_pairs_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..5 {
        let verts: Vec<Point3> = (0..120).map(|_| [rng.random(), rng.random(), 0.2 * rng.random::<f64>()]).collect();
        let mut m = IndexedMesh::new(verts);
        while m.len() < 150 {
            let t = Triangle(std::array::from_fn(|_| rng.random_range(0..100u32)));
            if t.is_valid() {
                m.push(t);
            }
        }
        let reference: Vec<Point3> = (0..1000).map(|_| [rng.random(), rng.random(), rng.random_range(-0.2..0.4)]).collect();
        let thr = 0.05;
        let got = accuracy_completeness(&m, &reference, thr);
        let used: std::collections::BTreeSet<u32> = m.triangles().iter().flat_map(|t| t.0).collect();
        let acc: Vec<f64> = used
            .iter()
            .map(|&v| reference.iter().map(|r| d(&m.vertices[v as usize], r)).fold(f64::INFINITY, f64::min))
            .collect();
        let com: Vec<f64> = reference
            .iter()
            .map(|r| {
                m.triangles()
                    .iter()
                    .map(|t| {
                        let [a, b, c] = t.0.map(|v| &m.vertices[v as usize]);
                        point_triangle_distance(r, a, b, c)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let (a, c) = (got.accuracy.unwrap(), got.completeness.unwrap());
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + y.abs());
        assert_eq!(a.count, acc.len());
        assert!(close(a.mean, acc.iter().sum::<f64>() / acc.len() as f64), "case {case}");
        assert!(close(a.median, median(acc.clone())));
        assert!(close(c.mean, com.iter().sum::<f64>() / com.len() as f64), "case {case}");
        assert!(close(c.median, median(com.clone())));
        assert_eq!(c.within, com.iter().filter(|&&x| x <= thr).count() as f64 / 1000.0);
        assert_eq!(got.holes, count_holes(&m).holes);
    }
}

#[test]
fn ratio_four_thins_the_center_by_four() {
    let n = 100_000;
    let ds = gen_breakdown(n, 4, None, 1).unwrap();
    let layout = breakdown_layout(n, 4, None).unwrap();
    let center_area = (CENTER_MAX - CENTER_MIN).powi(2);
    let outer: Vec<_> = ds.points.iter().filter(|p| !in_center(&p.position)).collect();
    let inner = ds.points.len() - outer.len();
    let outer_density = outer.len() as f64 / (1.0 - center_area);
    let want = outer_density / 4.0 * center_area;
    assert!((inner as f64 / want - 1.0).abs() < 0.05, "{inner} vs {want}");
    assert_eq!(inner, layout.n_center);
}

#[test]
fn extreme_ratio_keeps_enough_center_points() {
    let ds = gen_breakdown(1_000_000, 4096, None, 2).unwrap();
    let inner = ds.points.iter().filter(|p| in_center(&p.position)).count();
    assert!(inner >= 4, "{inner}");
}
