//! Round-trips a colored cloud through both PCD encodings. Coordinates and
//! colors survive unchanged, while NaN rows are dropped on load.
//!
//! ```text
//! cargo run --example pcd_roundtrip
//! ```

use semloc::cloud::{load_pcd, parse_pcd, save_pcd, write_pcd, PcdEncoding, Point3, PointCloud, Rgb};

fn main() -> semloc::Result<()> {
    let points: Vec<Point3> = (0..8)
        .map(|i| {
            let t = f64::from(i) * 0.1;
            Point3::with_color(t, 2.0 * t, 0.5, Rgb::new(32 * i as u8, 255 - 32 * i as u8, 128))
        })
        .collect();
    let cloud = PointCloud::new(points);

    let ascii = write_pcd(&cloud, PcdEncoding::Ascii)?;
    let header: String = String::from_utf8_lossy(&ascii).lines().take(11).collect::<Vec<_>>().join("\n");
    println!("ASCII header:\n{header}\n");

    let dir = std::env::temp_dir().join("semloc-pcd-roundtrip");
    std::fs::create_dir_all(&dir).map_err(|source| semloc::Error::Io { path: dir.clone(), source })?;
    for (encoding, name) in [(PcdEncoding::Ascii, "cloud_ascii.pcd"), (PcdEncoding::Binary, "cloud_binary.pcd")] {
        let path = dir.join(name);
        save_pcd(&cloud, &path, encoding)?;
        let back = load_pcd(&path)?;
        let same = back.points == cloud.points;
        println!("{encoding:?}: {} points, identical after reload: {same} ({})", back.len(), path.display());
    }

    // A row with a NaN coordinate is skipped and counted.
    let text = "VERSION .7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nWIDTH 3\nHEIGHT 1\n\
                VIEWPOINT 0 0 0 1 0 0 0\nPOINTS 3\nDATA ascii\n0 0 0\nnan 1 1\n1 1 1\n";
    let (parsed, dropped) = parse_pcd(text.as_bytes())?;
    println!("hand-written cloud: {} finite points kept, {dropped} dropped", parsed.len());
    Ok(())
}
