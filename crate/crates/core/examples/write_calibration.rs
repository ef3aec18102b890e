//! Writes the exact calibration of a simulated scene, relative to its first
//! camera.
//!
//! cargo run --example write_calibration -- scenes/orbit.json calibration.txt

use depthgrid::sim::Simulator;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [scene, out] = args.as_slice() else {
        eprintln!("usage: write_calibration <scene.json> <calibration.txt>");
        std::process::exit(2);
    };
    let sim = Simulator::from_file(scene).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2);
    });
    let set = sim.calibration_set();
    std::fs::write(out, set.to_text()).expect("write calibration");
    println!("wrote {} cameras to {out}", set.transforms.len());
}
