// cross-check of the ising-graph coeffs interface against the hand-coded
// coupled equations at one grid point
use std::process::Command;

#[test]
fn graph_coeffs_match_hand_coded_system() {
    let dir = std::env::temp_dir().join("cold-cli-graph");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("graph.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": {"name": "ising-graph", "n": 3},
            "model": {"couplings": [[0,1,0.8],[1,2,-0.5],[0,2,0.3]],
                      "x_fields": [[0.2,1.0],[0.1,0.7],[-0.3,0.9]],
                      "z_fields": [[-1.0,0.0],[-0.9,0.1],[-1.1,0.0]]}}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cold"))
        .args(["coeffs", "--config", cfg.to_str().unwrap(), "--grid", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim().lines().collect();
    // n=3 full ansatz: 3 alphas + 4 coefficients per pair * 3 pairs
    assert_eq!(lines[0].split(',').count(), 1 + 3 + 12);

    // hand-coded fixture at lambda = 0.5
    let mut j = nalgebra::DMatrix::zeros(3, 3);
    for &(a, b, v) in &[(0usize, 1usize, 0.8f64), (1, 2, -0.5), (0, 2, 0.3)] {
        j[(a, b)] = v;
        j[(b, a)] = v;
    }
    let fields = cold_core::lcd::hand_coded::GraphFields {
        j,
        dj: nalgebra::DMatrix::zeros(3, 3),
        x: vec![0.2 + 0.5, 0.1 + 0.35, -0.3 + 0.45],
        z: vec![-1.0, -0.9 + 0.05, -1.1],
        dx: vec![1.0, 0.7, 0.9],
        dz: vec![0.0, 0.1, 0.0],
    };
    let (m, b) = cold_core::lcd::hand_coded::ising_graph_system(&fields);
    let want = cold_core::lcd::solve_min_norm(&m, &b);
    let mid: Vec<f64> = lines[2]
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    for (i, w) in want.iter().enumerate() {
        assert!((mid[i] - w).abs() < 1e-8, "var {i}: {} vs {w}", mid[i]);
    }
}
