//! Generate both synthetic twins, write them as MDT1 files, and read one
//! back to show the round trip is exact.

use novscope::container::{load_dataset, save_dataset};
use novscope::dataset::{candidate_set, generate_synthetic_domains, generate_synthetic_particles};

fn main() {
    let domains = generate_synthetic_domains(64, 64, 16, 16.0, 3.0, 1.0, 0)
        .unwrap()
        .with_noise_std(0.05)
        .unwrap();
    let particles =
        generate_synthetic_particles(64, 64, 16, 12, (3.0, 6.0), 1.5, 0).unwrap();

    let dir = std::env::temp_dir();
    let path = dir.join("domains.mdt");
    save_dataset(&path, &domains).unwrap();
    save_dataset(&dir.join("particles.mdt"), &particles).unwrap();

    let reloaded = load_dataset(&path).unwrap();
    assert_eq!(reloaded.image(), domains.image());

    for (name, ds) in [("domains", &domains), ("particles", &particles)] {
        println!(
            "{name}: {}x{} patch={} candidates={} noise_std={}",
            ds.height(),
            ds.width(),
            ds.patch_size(),
            candidate_set(ds).len(),
            ds.noise_std(),
        );
    }
    println!("wrote {} and {}", path.display(), dir.join("particles.mdt").display());
}
