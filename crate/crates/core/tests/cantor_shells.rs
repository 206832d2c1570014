use std::sync::Arc;

use carnot_gdms::gdms::ValidationConfig;
use carnot_gdms::group::{GPoint, GroupSpec};
use carnot_gdms::systems::{shell_count_rate, CantorShellParams, CantorShells, PackingEffort};

#[test]
fn two_shells_at_epsilon_two() {
    let g = Arc::new(GroupSpec::heisenberg(1).unwrap());
    let params = CantorShellParams {
        epsilon: 2.0,
        shells: 2,
        seed: 11,
        effort: PackingEffort::default(),
    };
    let cs = CantorShells::build(g.clone(), &params, 1 << 24).unwrap();
    let q = g.homogeneous_dim() as f64;
    let rho = [1.0f64, 1.25];
    let mut normalized = Vec::new();
    for (n, pts) in cs.points.iter().enumerate() {
        let rate = shell_count_rate(&g, 2.0, n + 1);
        let c = pts.len() as f64 / (rate * rho[n].powf(q - 1.0));
        println!("shell {}: {} points, rate {rate}, constant {c:.2}", n + 1, pts.len());
        normalized.push(c);
        for (k, p) in pts.iter().enumerate() {
            assert!((g.norm(p) - rho[n]).abs() < 1e-12);
            assert!(cs.nearest[n][k] >= ((n + 3) as f64).powf(-2.0) * (1.0 - 1e-12));
        }
    }
    // the count follows (n + 2)^{epsilon (Q - 1)} rho_n^{Q - 1} up to a
    // shell-independent constant
    assert!((normalized[1] / normalized[0]).ln().abs() < 2f64.ln(), "{normalized:?}");

    let cfg = ValidationConfig {
        points_per_edge: 8,
        ..ValidationConfig::default()
    };
    let sys = cs.system(&cfg).unwrap();
    assert_eq!(sys.edges().len(), cs.edge_count());
    let o = GPoint::origin(&g);
    let dom = &sys.vertices()[0].region;
    for (i, e) in sys.edges().iter().enumerate().step_by(97) {
        let (n, k) = if i < cs.points[0].len() {
            (0, i)
        } else {
            (1, i - cs.points[0].len())
        };
        let (c, r) = e.map.image_ball(dom).unwrap();
        // the image sits inside B(p_k, d_k / 10 + slack)
        assert!(g.dist(&c, &cs.points[n][k]) + r <= cs.nearest[n][k] * 0.2);
        assert!(g.dist(&o, &c) > 0.5);
    }
}
