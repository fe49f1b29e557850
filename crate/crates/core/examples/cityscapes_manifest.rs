//! Builds a dataset manifest from a Cityscapes directory tree.
//!
//! cargo run --example cityscapes_manifest -- <cityscapes_root> <split> <manifest.json>

use std::path::PathBuf;

use roadscale::dataset_io::{cityscapes_manifest, write_json};

fn main() -> roadscale::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [root, split, out] = args.as_slice() else {
        eprintln!("usage: cityscapes_manifest <cityscapes_root> <split> <manifest.json>");
        std::process::exit(2);
    };
    run(root, split, out).map(|_| ())
}

pub fn run(root: &str, split: &str, out: &str) -> roadscale::Result<usize> {
    let root = PathBuf::from(root);
    let manifest = cityscapes_manifest(&root, split)?;
    // paths in the manifest are relative to the Cityscapes root
    let out = PathBuf::from(out);
    write_json(&out, &manifest)?;
    println!("{} frames -> {}", manifest.frames.len(), out.display());
    if out.parent().map(|p| p.canonicalize().ok()) != Some(root.canonicalize().ok()) {
        println!("note: move the manifest into {} before loading it", root.display());
    }
    Ok(manifest.frames.len())
}
