//! Regenerates the bundled example datasets and run configs under `data/`.
//! Everything is seeded, so reruns reproduce the committed files byte for
//! byte:
//!
//! ```text
//! cargo run -p christoffel-cli --example gen_data -- data
//! ```

use std::path::Path;

use christoffel::hilbert::{write_points_csv, CompactSet, HPoint};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data".to_string());
    let dir = Path::new(&dir);
    std::fs::create_dir_all(dir).expect("create data dir");

    // 200 points of the unit ball in the first two coordinates
    let ball = CompactSet::ball(HPoint::origin(2), 1.0).unwrap();
    write_points_csv(&dir.join("train_ball.csv"), &ball.sample(2, 200, 11)).unwrap();

    // 80 points of the Hilbert cube, truncated at 4 coordinates
    let cube = CompactSet::hilbert_cube();
    write_points_csv(&dir.join("train_cube.csv"), &cube.sample(4, 80, 7)).unwrap();

    // queries: a few in-support cube points plus far-away outliers
    let mut queries = cube.sample(4, 8, 13);
    queries.push(HPoint::new(vec![2.0, 0.0, 0.0, 0.0]));
    queries.push(HPoint::new(vec![0.0, -1.5, 0.5, 0.0]));
    queries.push(HPoint::new(vec![1.0, 1.0, 1.0, 1.0]));
    queries.push(HPoint::new(vec![-3.0, 0.25, 0.0, 0.0]));
    write_points_csv(&dir.join("queries.csv"), &queries).unwrap();

    // cloud for the atom-mixture sweep
    let cloud_set = CompactSet::ball(HPoint::origin(4), 0.8).unwrap();
    write_points_csv(&dir.join("atom_cloud.csv"), &cloud_set.sample(4, 120, 1003)).unwrap();

    std::fs::write(
        dir.join("fit_cube.json"),
        r#"{
  "d": 2,
  "n": 2,
  "ridge": 0.0,
  "rank_tol": 1e-10,
  "mode": "full",
  "seed": 42,
  "data": "train_cube.csv",
  "output": "cube_model.txt"
}
"#,
    )
    .unwrap();

    std::fs::write(
        dir.join("sweep_atom.json"),
        r#"{
  "seed": 42,
  "output": "sweep_atom.csv",
  "measure": {
    "type": "mixture",
    "components": [
      { "weight": 0.3, "measure": { "type": "atom", "point": [1.1, 0.9, -1.0, 0.7] } },
      { "weight": 0.7, "measure": { "type": "empirical", "data": "atom_cloud.csv" } }
    ]
  },
  "sweep": {
    "kind": "atom",
    "z": [1.1, 0.9, -1.0, 0.7],
    "diagonal": [1, 2, 3, 4]
  }
}
"#,
    )
    .unwrap();

    std::fs::write(
        dir.join("sweep_outside.json"),
        r#"{
  "seed": 42,
  "mode": "pseudo",
  "rank_tol": 1e-13,
  "output": "sweep_outside.csv",
  "data": "train_ball.csv",
  "sweep": {
    "kind": "outside",
    "z": [2.5, 1.0],
    "n": 2,
    "d_from": 1,
    "d_to": 8,
    "support": { "type": "ball", "center": [0.0, 0.0], "radius": 1.0 }
  }
}
"#,
    )
    .unwrap();

    println!("wrote bundled datasets and configs under {}", dir.display());
}
