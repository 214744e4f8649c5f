//! Seeded synthetic scenes: each category is a fixed mix of colored
//! primitives, re-placed slightly for every cloud and sampled with Gaussian
//! positional noise.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use rayon::prelude::*;

use super::config::{cloud_list, CloudEntry};
use crate::cloud::{save_pcd, PcdEncoding, Point3, PointCloud, Rgb};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Rectangle `center + a u + b v` for `a, b` in `[-1, 1]`; `u` and `v` are
    /// orthogonal half-axes.
    Plane {
        center: [f64; 3],
        u: [f64; 3],
        v: [f64; 3],
    },
    /// Axis-aligned box surface.
    Cuboid {
        center: [f64; 3],
        half: [f64; 3],
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Vertical open cylinder standing on `base`.
    Cylinder {
        base: [f64; 3],
        radius: f64,
        height: f64,
    },
}

impl Shape {
    fn area(&self) -> f64 {
        let v = |a: [f64; 3]| Vector3::from(a);
        match *self {
            Shape::Plane { u, v: w, .. } => 4.0 * v(u).norm() * v(w).norm(),
            Shape::Cuboid { half: [a, b, c], .. } => 8.0 * (a * b + b * c + a * c),
            Shape::Sphere { radius, .. } => 4.0 * std::f64::consts::PI * radius * radius,
            Shape::Cylinder { radius, height, .. } => 2.0 * std::f64::consts::PI * radius * height,
        }
    }

    /// Same shape moved by `shift` and grown by `scale` about its anchor.
    fn varied(&self, shift: Vector3<f64>, scale: f64) -> Shape {
        let mv = |p: [f64; 3]| (Vector3::from(p) + shift).into();
        let sc = |p: [f64; 3]| (Vector3::from(p) * scale).into();
        match *self {
            Shape::Plane { center, u, v } => Shape::Plane { center: mv(center), u: sc(u), v: sc(v) },
            Shape::Cuboid { center, half } => Shape::Cuboid { center: mv(center), half: sc(half) },
            Shape::Sphere { center, radius } => Shape::Sphere { center: mv(center), radius: radius * scale },
            Shape::Cylinder { base, radius, height } => {
                Shape::Cylinder { base: mv(base), radius: radius * scale, height: height * scale }
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        let v = |a: [f64; 3]| Vector3::from(a);
        match *self {
            Shape::Plane { center, u, v: w } => {
                v(center) + v(u) * rng.random_range(-1.0..=1.0) + v(w) * rng.random_range(-1.0..=1.0)
            }
            Shape::Cuboid { center, half: [a, b, c] } => {
                // pick a face pair by area, then a side
                let areas = [b * c, a * c, a * b];
                let mut t = rng.random_range(0.0..areas.iter().sum::<f64>());
                let axis = areas
                    .iter()
                    .position(|&s| {
                        t -= s;
                        t < 0.0
                    })
                    .unwrap_or(2);
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let mut p = [rng.random_range(-a..=a), rng.random_range(-b..=b), rng.random_range(-c..=c)];
                p[axis] = side * [a, b, c][axis];
                v(center) + v(p)
            }
            Shape::Sphere { center, radius } => {
                let d: [f64; 3] = UnitSphere.sample(rng);
                v(center) + v(d) * radius
            }
            Shape::Cylinder { base, radius, height } => {
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                v(base) + Vector3::new(radius * t.cos(), radius * t.sin(), rng.random_range(0.0..=height))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub color: Rgb,
}

/// A category's geometric template.
#[derive(Debug, Clone, PartialEq)]
pub struct Archetype {
    pub code: String,
    pub primitives: Vec<Primitive>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub categories: Vec<Archetype>,
    /// Standard deviation of the per-coordinate Gaussian noise, meters.
    pub noise_sigma: f64,
    pub points_per_cloud: usize,
    pub clouds_per_category: usize,
    pub seed: u64,
    /// Per-cloud placement variation: shifts up to `jitter * 0.1` m and
    /// size changes up to `jitter` (relative).
    pub jitter: f64,
    pub viewpoint: Point3,
}

fn prim(shape: Shape, (r, g, b): (u8, u8, u8)) -> Primitive {
    Primitive { shape, color: Rgb::new(r, g, b) }
}

fn floor(half: f64) -> Shape {
    Shape::Plane { center: [0.0, 0.0, 0.0], u: [half, 0.0, 0.0], v: [0.0, half, 0.0] }
}

/// The five built-in desk-scale categories: CR (corridor: floor between two
/// walls), HA (hall: floor with columns), PO (professor office: desk with a
/// globe), SO (student office: scattered small boxes) and TR (technical room:
/// back wall, tanks and pipes).
pub fn desk_categories() -> Vec<Archetype> {
    let grey = (128, 128, 128);
    vec![
        Archetype {
            code: "CR".into(),
            primitives: vec![
                prim(Shape::Plane { center: [0.0, 0.0, 0.0], u: [0.15, 0.0, 0.0], v: [0.0, 0.4, 0.0] }, grey),
                prim(
                    Shape::Plane { center: [-0.15, 0.0, 0.12], u: [0.0, 0.4, 0.0], v: [0.0, 0.0, 0.12] },
                    (200, 190, 160),
                ),
                prim(
                    Shape::Plane { center: [0.15, 0.0, 0.12], u: [0.0, 0.4, 0.0], v: [0.0, 0.0, 0.12] },
                    (200, 190, 160),
                ),
            ],
        },
        Archetype {
            code: "HA".into(),
            primitives: vec![
                prim(floor(0.35), grey),
                prim(Shape::Cylinder { base: [-0.15, 0.1, 0.0], radius: 0.05, height: 0.3 }, (230, 230, 230)),
                prim(Shape::Cylinder { base: [0.15, 0.1, 0.0], radius: 0.05, height: 0.3 }, (230, 230, 230)),
                prim(Shape::Cylinder { base: [0.0, -0.15, 0.0], radius: 0.05, height: 0.3 }, (230, 230, 230)),
            ],
        },
        Archetype {
            code: "PO".into(),
            primitives: vec![
                prim(floor(0.3), (120, 80, 40)),
                prim(Shape::Cuboid { center: [0.0, 0.0, 0.08], half: [0.18, 0.1, 0.08] }, (90, 60, 30)),
                prim(Shape::Sphere { center: [0.08, 0.0, 0.22], radius: 0.06 }, (30, 90, 200)),
            ],
        },
        Archetype {
            code: "SO".into(),
            primitives: vec![
                prim(floor(0.3), (150, 150, 170)),
                prim(Shape::Cuboid { center: [-0.15, -0.1, 0.04], half: [0.04, 0.04, 0.04] }, (220, 40, 40)),
                prim(Shape::Cuboid { center: [0.12, -0.12, 0.05], half: [0.05, 0.03, 0.05] }, (40, 180, 40)),
                prim(Shape::Cuboid { center: [0.0, 0.14, 0.03], half: [0.06, 0.04, 0.03] }, (240, 200, 20)),
                prim(Shape::Cuboid { center: [0.15, 0.12, 0.04], half: [0.03, 0.05, 0.04] }, (40, 40, 220)),
            ],
        },
        Archetype {
            code: "TR".into(),
            primitives: vec![
                prim(floor(0.3), (100, 100, 100)),
                prim(
                    Shape::Plane { center: [0.0, 0.3, 0.15], u: [0.3, 0.0, 0.0], v: [0.0, 0.0, 0.15] },
                    (180, 180, 150),
                ),
                prim(Shape::Sphere { center: [-0.12, 0.05, 0.09], radius: 0.09 }, (200, 120, 40)),
                prim(Shape::Sphere { center: [0.14, 0.0, 0.07], radius: 0.07 }, (200, 120, 40)),
                prim(Shape::Cylinder { base: [0.0, -0.15, 0.0], radius: 0.025, height: 0.25 }, (60, 60, 60)),
            ],
        },
    ]
}

impl SceneSpec {
    /// Desk-scale defaults over the built-in categories.
    pub fn desk(seed: u64) -> Self {
        SceneSpec {
            categories: desk_categories(),
            noise_sigma: 0.001,
            points_per_cloud: 3000,
            clouds_per_category: 50,
            seed,
            jitter: 0.3,
            viewpoint: Point3::new(0.0, -0.9, 0.8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.len() < 2 {
            return Err(Error::InvalidParameter("a scene spec needs at least two categories".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.jitter >= 0.0) {
            return Err(Error::InvalidParameter("noise sigma and jitter must be non-negative".into()));
        }
        if self.points_per_cloud == 0 || self.clouds_per_category == 0 {
            return Err(Error::InvalidParameter("points and clouds per category must be positive".into()));
        }
        if let Some(a) = self.categories.iter().find(|a| a.primitives.is_empty()) {
            return Err(Error::InvalidParameter(format!("category {} has no primitives", a.code)));
        }
        Ok(())
    }

    /// Cloud `index` of category `category`; independent of every other cloud.
    pub fn generate_cloud(&self, category: usize, index: usize) -> PointCloud {
        let archetype = &self.categories[category];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((category as u64) << 32) | index as u64);

        let shapes: Vec<(Shape, Rgb)> = archetype
            .primitives
            .iter()
            .map(|p| {
                let mut jit = |s: f64| if self.jitter > 0.0 { rng.random_range(-s..=s) * self.jitter } else { 0.0 };
                let shift = Vector3::new(jit(0.1), jit(0.1), 0.0);
                let scale = 1.0 + jit(1.0);
                (p.shape.varied(shift, scale), p.color)
            })
            .collect();
        let areas: Vec<f64> = shapes.iter().map(|(s, _)| s.area()).collect();
        let total: f64 = areas.iter().sum();
        let noise = Normal::new(0.0, self.noise_sigma).expect("validated sigma");

        let points = (0..self.points_per_cloud)
            .map(|_| {
                let mut t = rng.random_range(0.0..total);
                let k = areas
                    .iter()
                    .position(|&a| {
                        t -= a;
                        t < 0.0
                    })
                    .unwrap_or(shapes.len() - 1);
                let (shape, color) = shapes[k];
                let mut p = shape.sample(&mut rng);
                if self.noise_sigma > 0.0 {
                    p += Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                }
                Point3::from_coords(p, Some(color))
            })
            .collect();
        PointCloud::new(points).with_viewpoint(self.viewpoint).with_label(archetype.code.clone())
    }
}

/// What the generator wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub training: Vec<CloudEntry>,
    pub test: Vec<CloudEntry>,
    pub manifest: PathBuf,
}

/// Writes every cloud as `<code>_<nnn>.pcd` (binary) into `out_dir`, plus a
/// `manifest.cfg` listing them. With `split = Some(f)` the first
/// `round(f * n)` clouds of each category go to `[training]` and the rest to
/// `[test]`; otherwise all are training clouds.
pub fn generate_synthetic_dataset(spec: &SceneSpec, out_dir: &Path, split: Option<f64>) -> Result<SyntheticDataset> {
    spec.validate()?;
    if let Some(f) = split {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!("split fraction must lie in [0, 1], got {f}")));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.categories.len()).flat_map(|c| (0..spec.clouds_per_category).map(move |i| (c, i))).collect();
    let written: Vec<CloudEntry> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let code = &spec.categories[c].code;
            let name = format!("{code}_{i:03}.pcd");
            save_pcd(&spec.generate_cloud(c, i), out_dir.join(&name), PcdEncoding::Binary)?;
            Ok(CloudEntry { path: PathBuf::from(name), label: code.clone() })
        })
        .collect::<Result<_>>()?;

    let n_train = split.map_or(spec.clouds_per_category, |f| (f * spec.clouds_per_category as f64).round() as usize);
    let (mut training, mut test) = (Vec::new(), Vec::new());
    for (entry, &(_, i)) in written.into_iter().zip(&jobs) {
        if i < n_train {
            training.push(entry);
        } else {
            test.push(entry);
        }
    }
    let mut text = String::from("# synthetic scenes; paths are relative to this file\n");
    for (name, list) in [("training", &training), ("test", &test)] {
        if !list.is_empty() {
            text.push_str(&format!("\n[{name}]\n{}", cloud_list(list)));
        }
    }
    let manifest = out_dir.join("manifest.cfg");
    std::fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))?;
    let absolute =
        |v: Vec<CloudEntry>| v.into_iter().map(|e| CloudEntry { path: out_dir.join(e.path), label: e.label }).collect();
    Ok(SyntheticDataset { training: absolute(training), test: absolute(test), manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::load_pcd;

    #[test]
    fn noiseless_plane_is_exact() {
        let spec = SceneSpec {
            categories: vec![
                Archetype { code: "A".into(), primitives: vec![prim(floor(0.5), (1, 2, 3))] },
                Archetype { code: "B".into(), primitives: vec![prim(floor(0.2), (1, 2, 3))] },
            ],
            noise_sigma: 0.0,
            points_per_cloud: 500,
            clouds_per_category: 1,
            seed: 3,
            jitter: 0.5,
            viewpoint: Point3::new(0.0, 0.0, 1.0),
        };
        let c = spec.generate_cloud(0, 0);
        assert_eq!(c.len(), 500);
        assert!(c.points.iter().all(|p| p.z == 0.0));
        assert_eq!(c.label.as_deref(), Some("A"));
    }

    #[test]
    fn same_seed_gives_identical_files() {
        let spec = SceneSpec { points_per_cloud: 200, clouds_per_category: 2, ..SceneSpec::desk(9) };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let da = generate_synthetic_dataset(&spec, a.path(), Some(0.5)).unwrap();
        generate_synthetic_dataset(&spec, b.path(), Some(0.5)).unwrap();
        assert_eq!((da.training.len(), da.test.len()), (5, 5));
        for e in da.training.iter().chain(&da.test) {
            let name = e.path.file_name().unwrap();
            assert_eq!(std::fs::read(&e.path).unwrap(), std::fs::read(b.path().join(name)).unwrap());
        }
        let back = load_pcd(&da.training[0].path).unwrap();
        assert_eq!(back.label.as_deref(), Some("CR"));
        let manifest = std::fs::read_to_string(&da.manifest).unwrap();
        assert!(manifest.contains("[training]\nCR_000.pcd\tCR\n"));
    }

    #[test]
    fn clouds_differ_across_indices_and_seeds() {
        let spec = SceneSpec { points_per_cloud: 50, ..SceneSpec::desk(1) };
        assert_ne!(spec.generate_cloud(2, 0), spec.generate_cloud(2, 1));
        assert_ne!(spec.generate_cloud(2, 0), SceneSpec { seed: 2, ..spec.clone() }.generate_cloud(2, 0));
        assert_eq!(spec.generate_cloud(4, 7), spec.generate_cloud(4, 7));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SceneSpec::desk(0);
        spec.categories.truncate(1);
        assert!(spec.validate().is_err());
        let spec = SceneSpec { noise_sigma: -1.0, ..SceneSpec::desk(0) };
        assert!(generate_synthetic_dataset(&spec, Path::new("/nonexistent"), None).is_err());
    }
}
