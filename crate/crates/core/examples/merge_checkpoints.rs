//! Build two small checkpoints, merge them with each operator and inspect
//! the results.
//!
//! ```text
//! cargo run --example merge_checkpoints
//! ```

use paretomerge::checkpoint::{check_compatible, load_checkpoint, save_checkpoint};
use paretomerge::merge::{decode_genotype, LinearBounds, MergeEndpoints};
use paretomerge::{Checkpoint, Genotype};

fn endpoint(scale: f32) -> Checkpoint {
    let w: Vec<f32> = (0..12).map(|i| scale * (i as f32 - 5.5)).collect();
    Checkpoint::new()
        .with_tensor("block.0.weight", vec![3, 4], w)
        .unwrap()
        .with_tensor("block.0.bias", vec![4], vec![scale, -scale, 0.5 * scale, 0.0])
        .unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile_dir();
    let (s2_path, s1_path) = (dir.join("system2.pmrg"), dir.join("system1.pmrg"));
    save_checkpoint(&endpoint(1.0), &s2_path)?;
    save_checkpoint(&endpoint(-0.25), &s1_path)?;

    let system2 = load_checkpoint(&s2_path)?;
    let system1 = load_checkpoint(&s1_path)?;
    println!("compatibility: {}", check_compatible(&system2, &system1));
    let endpoints = MergeEndpoints::new(system2, system1)?;

    for g in [
        Genotype::ta(0.0),
        Genotype::ta(0.4),
        Genotype::ties(0.4, 0.25),
        Genotype::ties(0.4, 1.0),
        Genotype::linear(0.6, 0.4),
    ] {
        let merged = decode_genotype(&g, &endpoints, LinearBounds::default())?;
        let bias = merged.get("block.0.bias").unwrap().data();
        println!("{:<22} bias = {bias:?}", g.to_string());
    }

    let incompatible = Checkpoint::new().with_tensor("block.0.weight", vec![12], vec![0.0; 12])?;
    println!("against a reshaped copy: {}", check_compatible(endpoints.system2(), &incompatible));
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("paretomerge-merge-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
