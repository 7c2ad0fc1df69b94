//! Regenerate the bundled synthetic stand-in datasets under `datasets/`.
//!
//! The bundled `umls` and `kinship` directories are deterministic synthetic
//! graphs matching the published vocabulary and split sizes of the original
//! benchmarks (which are not redistributed here). Run from the workspace
//! root:
//!
//! ```text
//! cargo run -p hyperkge --example make_datasets
//! ```

use std::path::Path;

use hyperkge::synthetic::{grouped_kg, kinship_shape, umls_shape};

fn main() {
    let specs = [
        ("datasets/umls", umls_shape(), 15usize),
        ("datasets/kinship", kinship_shape(), 11usize),
    ];
    for (dir, shape, groups) in specs {
        let kg = grouped_kg(&shape, groups, 1).expect("generator parameters are valid");
        kg.write_to(Path::new(dir)).expect("write dataset");
        println!(
            "{dir}: {} train / {} valid / {} test",
            kg.train.len(),
            kg.valid.len(),
            kg.test.len()
        );
    }
}
