//! One lidar and one camera scan from the start of the running example,
//! fused into known-free maps and written out as PBM images.

use safenav::env::{sense, Environment, KnownFreeMap, SensorSpec};
use safenav::grid::StateGrid;

fn main() -> safenav::Result<()> {
    let env = Environment::running_example();
    let pos = StateGrid::new(&[0.0, 0.0], &[10.0, 10.0], &[81, 81], &[false, false])?
        .with_position_dims(2)?;
    let out =
        std::path::PathBuf::from(std::env::var("SAFENAV_OUT_DIR").unwrap_or_else(|_| "out".into()))
            .join("sensing");
    std::fs::create_dir_all(&out)?;

    // facing the obstacle from its left
    let x = [3.0, 2.5, 0.0];
    for (name, spec) in [
        ("lidar", SensorSpec::lidar()),
        ("camera", SensorSpec::camera()),
    ] {
        let scan = sense(&env, &spec, &x, &pos);
        let mut map = KnownFreeMap::from_disk(pos.clone(), [x[0], x[1]], 0.5);
        let fresh = map.fuse(&scan.free)?;
        map.record_hits(&scan.hits);
        println!(
            "{name:>6}: {} nodes seen free ({} new), {} ray hits on the obstacle",
            scan.free.count(),
            fresh.count(),
            scan.hits.len()
        );
        let path = out.join(format!("{name}.pbm"));
        map.write_pbm(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        println!("        wrote {}", path.display());
    }

    // a second scan further on only adds nodes
    let mut map = KnownFreeMap::from_disk(pos.clone(), [x[0], x[1]], 0.5);
    map.fuse(&sense(&env, &SensorSpec::camera(), &x, &pos).free)?;
    let before = map.known_free().clone();
    let fresh = map.fuse(&sense(&env, &SensorSpec::camera(), &[3.5, 5.0, -0.5], &pos).free)?;
    assert!(before.is_subset_of(map.known_free()));
    println!("second camera scan adds {} nodes", fresh.count());
    Ok(())
}
