//! PCD v0.7 reader and writer.
//!
//! Supported fields are `x y z`, an optional packed `rgb`/`rgba`, and optional
//! `normal_x normal_y normal_z [curvature]`; anything else is skipped. DATA may be
//! `ascii` or `binary`; `binary_compressed` is rejected. Rows with a non-finite
//! coordinate are dropped and counted. The organized layout (WIDTH x HEIGHT) is
//! not preserved.
//!
//! The writer stores coordinates and normals as 8-byte floats so that binary
//! round trips are bit-exact, and color as a 4-byte float with bit pattern
//! `0x00RRGGBB`. A cloud label travels in a `# label <name>` comment line.

use std::fmt::Write as _;
use std::path::Path;

use super::{Normal3, Point3, PointCloud, Rgb};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcdEncoding {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    F4,
    F8,
    U1,
    U2,
    U4,
    I1,
    I2,
    I4,
    U8,
    I8,
}

impl Scalar {
    fn parse(ty: &str, size: usize) -> Result<Self> {
        Ok(match (ty, size) {
            ("F", 4) => Scalar::F4,
            ("F", 8) => Scalar::F8,
            ("U", 1) => Scalar::U1,
            ("U", 2) => Scalar::U2,
            ("U", 4) => Scalar::U4,
            ("U", 8) => Scalar::U8,
            ("I", 1) => Scalar::I1,
            ("I", 2) => Scalar::I2,
            ("I", 4) => Scalar::I4,
            ("I", 8) => Scalar::I8,
            _ => return Err(Error::PcdHeader(format!("unsupported TYPE {ty} with SIZE {size}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::U1 | Scalar::I1 => 1,
            Scalar::U2 | Scalar::I2 => 2,
            Scalar::F4 | Scalar::U4 | Scalar::I4 => 4,
            Scalar::F8 | Scalar::U8 | Scalar::I8 => 8,
        }
    }

    /// Numeric value of a little-endian binary element.
    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::F4 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F8 => f64::from_le_bytes(b.try_into().unwrap()),
            Scalar::U1 => b[0] as f64,
            Scalar::I1 => b[0] as i8 as f64,
            Scalar::U2 => u16::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::I2 => i16::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::U4 => u32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::I4 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::U8 => u64::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::I8 => i64::from_le_bytes(b.try_into().unwrap()) as f64,
        }
    }

    /// Raw 32-bit pattern, used for packed color.
    fn bits32(self, b: &[u8]) -> Option<u32> {
        match self {
            Scalar::F4 | Scalar::U4 | Scalar::I4 => Some(u32::from_le_bytes(b.try_into().unwrap())),
            _ => None,
        }
    }

    fn parse_ascii(self, tok: &str) -> Result<f64> {
        let bad = || Error::PcdData(format!("cannot parse `{tok}`"));
        match self {
            Scalar::F4 | Scalar::F8 => parse_float(tok).ok_or_else(bad),
            _ => tok
                .parse::<i64>()
                .map(|v| v as f64)
                .or_else(|_| tok.parse::<u64>().map(|v| v as f64))
                .map_err(|_| bad()),
        }
    }

    fn parse_ascii_bits32(self, tok: &str) -> Result<u32> {
        let bad = || Error::PcdData(format!("cannot parse color `{tok}`"));
        match self {
            Scalar::F4 => parse_float(tok).map(|v| (v as f32).to_bits()).ok_or_else(bad),
            Scalar::U4 | Scalar::I4 => {
                tok.parse::<u32>().or_else(|_| tok.parse::<i32>().map(|v| v as u32)).map_err(|_| bad())
            }
            _ => Err(bad()),
        }
    }
}

fn parse_float(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "nan" | "-nan" => Some(f64::NAN),
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

#[derive(Debug)]
struct Field {
    name: String,
    scalar: Scalar,
    count: usize,
    /// Byte offset inside a binary row.
    offset: usize,
    /// Element offset inside an ascii row.
    column: usize,
}

#[derive(Debug)]
struct Header {
    fields: Vec<Field>,
    points: usize,
    viewpoint: Point3,
    label: Option<String>,
    encoding: PcdEncoding,
    row_bytes: usize,
}

impl Header {
    fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// Reads a PCD file; NaN rows are dropped (see [`parse_pcd`] for the count).
pub fn load_pcd(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (cloud, dropped) = parse_pcd(&bytes)?;
    if dropped > 0 {
        log::debug!("{}: dropped {dropped} non-finite points", path.display());
    }
    Ok(cloud)
}

/// Parses an in-memory PCD file, returning the cloud and the number of dropped rows.
pub fn parse_pcd(bytes: &[u8]) -> Result<(PointCloud, usize)> {
    let (header, data_start) = parse_header(bytes)?;
    let payload = &bytes[data_start..];
    let rows: Vec<Vec<f64>> = match header.encoding {
        PcdEncoding::Ascii => read_ascii_rows(&header, payload)?,
        PcdEncoding::Binary => read_binary_rows(&header, payload)?,
    };
    build_cloud(&header, rows)
}

const COLOR_SLOT: &str = "\u{0}color";

fn parse_header(bytes: &[u8]) -> Result<(Header, usize)> {
    let mut pos = 0;
    let mut fields: Vec<String> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut types: Vec<String> = Vec::new();
    let mut counts: Option<Vec<usize>> = None;
    let mut width: Option<usize> = None;
    let mut height: usize = 1;
    let mut points: Option<usize> = None;
    let mut viewpoint = Point3::ORIGIN;
    let mut label = None;
    let mut version_seen = false;

    loop {
        if pos >= bytes.len() {
            return Err(Error::PcdHeader("missing DATA line".into()));
        }
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| pos + i);
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::PcdHeader("header is not valid text".into()))?
            .trim();
        pos = (end + 1).min(bytes.len());
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(l) = comment.trim().strip_prefix("label ") {
                label = Some(l.trim().to_string());
            }
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap().to_ascii_uppercase();
        let rest: Vec<&str> = toks.collect();
        let parse_usize =
            |s: &str| s.parse::<usize>().map_err(|_| Error::PcdHeader(format!("{key}: bad integer `{s}`")));
        match key.as_str() {
            "VERSION" => {
                let v = rest.first().copied().unwrap_or("");
                if v != "0.7" && v != ".7" {
                    return Err(Error::PcdHeader(format!("unsupported VERSION `{v}`")));
                }
                version_seen = true;
            }
            "FIELDS" | "COLUMNS" => fields = rest.iter().map(|s| s.to_string()).collect(),
            "SIZE" => sizes = rest.iter().map(|s| parse_usize(s)).collect::<Result<_>>()?,
            "TYPE" => types = rest.iter().map(|s| s.to_ascii_uppercase()).collect(),
            "COUNT" => counts = Some(rest.iter().map(|s| parse_usize(s)).collect::<Result<_>>()?),
            "WIDTH" => width = Some(parse_usize(rest.first().copied().unwrap_or(""))?),
            "HEIGHT" => height = parse_usize(rest.first().copied().unwrap_or(""))?,
            "POINTS" => points = Some(parse_usize(rest.first().copied().unwrap_or(""))?),
            "VIEWPOINT" => {
                if rest.len() != 7 {
                    return Err(Error::PcdHeader("VIEWPOINT needs 7 values".into()));
                }
                let v: Vec<f64> = rest
                    .iter()
                    .map(|s| parse_float(s).ok_or_else(|| Error::PcdHeader(format!("bad VIEWPOINT value `{s}`"))))
                    .collect::<Result<_>>()?;
                viewpoint = Point3::new(v[0], v[1], v[2]);
            }
            "DATA" => {
                let enc = match rest.first().map(|s| s.to_ascii_lowercase()).as_deref() {
                    Some("ascii") => PcdEncoding::Ascii,
                    Some("binary") => PcdEncoding::Binary,
                    Some(other) => return Err(Error::UnsupportedEncoding(other.to_string())),
                    None => return Err(Error::PcdHeader("DATA without encoding".into())),
                };
                if !version_seen {
                    return Err(Error::PcdHeader("missing VERSION".into()));
                }
                let header =
                    assemble_header(fields, sizes, types, counts, width, height, points, viewpoint, label, enc)?;
                return Ok((header, pos));
            }
            other => return Err(Error::PcdHeader(format!("unknown header key `{other}`"))),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble_header(
    names: Vec<String>,
    sizes: Vec<usize>,
    types: Vec<String>,
    counts: Option<Vec<usize>>,
    width: Option<usize>,
    height: usize,
    points: Option<usize>,
    viewpoint: Point3,
    label: Option<String>,
    encoding: PcdEncoding,
) -> Result<Header> {
    if names.is_empty() {
        return Err(Error::PcdHeader("missing FIELDS".into()));
    }
    let counts = counts.unwrap_or_else(|| vec![1; names.len()]);
    if sizes.len() != names.len() || types.len() != names.len() || counts.len() != names.len() {
        return Err(Error::PcdHeader(format!(
            "COUNT/SIZE/TYPE lengths ({}/{}/{}) inconsistent with {} FIELDS",
            counts.len(),
            sizes.len(),
            types.len(),
            names.len()
        )));
    }
    let width = width.ok_or_else(|| Error::PcdHeader("missing WIDTH".into()))?;
    let declared = width * height;
    if let Some(p) = points {
        if p != declared {
            return Err(Error::PointCountMismatch { declared, found: p });
        }
    }

    let mut fields = Vec::with_capacity(names.len());
    let (mut offset, mut column) = (0, 0);
    for (((name, size), ty), count) in names.into_iter().zip(sizes).zip(types).zip(counts) {
        let scalar = Scalar::parse(&ty, size)?;
        if count == 0 {
            return Err(Error::PcdHeader(format!("field `{name}` has COUNT 0")));
        }
        fields.push(Field { name, scalar, count, offset, column });
        offset += size * count;
        column += count;
    }

    for axis in ["x", "y", "z"] {
        let f = fields
            .iter()
            .find(|f| f.name == axis)
            .ok_or_else(|| Error::PcdHeader(format!("missing field `{axis}`")))?;
        if f.count != 1 || !matches!(f.scalar, Scalar::F4 | Scalar::F8) {
            return Err(Error::PcdHeader(format!("field `{axis}` must be a single F 4 or F 8 value")));
        }
    }
    let normal_fields = ["normal_x", "normal_y", "normal_z"];
    let normals_present = normal_fields.iter().filter(|n| fields.iter().any(|f| &f.name == *n)).count();
    if normals_present != 0 && normals_present != 3 {
        return Err(Error::PcdHeader("partial normal fields".into()));
    }
    if let Some(f) = fields.iter_mut().find(|f| f.name == "rgb" || f.name == "rgba") {
        if f.count != 1 || f.scalar.size() != 4 {
            return Err(Error::PcdHeader("packed color must be a single 4-byte value".into()));
        }
        f.name = COLOR_SLOT.into();
    }
    Ok(Header { fields, points: declared, viewpoint, label, encoding, row_bytes: offset })
}

/// Each row holds one f64 per named field (first element only); color is
/// carried as its 32-bit pattern stored losslessly in an f64.
fn read_ascii_rows(header: &Header, payload: &[u8]) -> Result<Vec<Vec<f64>>> {
    let text = std::str::from_utf8(payload).map_err(|_| Error::PcdData("ascii payload is not text".into()))?;
    let expected_cols: usize = header.fields.iter().map(|f| f.count).sum();
    let mut rows = Vec::with_capacity(header.points);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != expected_cols {
            return Err(Error::PcdData(format!(
                "row {} has {} values, expected {expected_cols}",
                rows.len(),
                toks.len()
            )));
        }
        let row = header
            .fields
            .iter()
            .map(|f| {
                let tok = toks[f.column];
                if f.name == COLOR_SLOT {
                    f.scalar.parse_ascii_bits32(tok).map(f64::from)
                } else {
                    f.scalar.parse_ascii(tok)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != header.points {
        return Err(Error::PointCountMismatch { declared: header.points, found: rows.len() });
    }
    Ok(rows)
}

fn read_binary_rows(header: &Header, payload: &[u8]) -> Result<Vec<Vec<f64>>> {
    let stride = header.row_bytes;
    let need = stride * header.points;
    if payload.len() < need {
        return Err(Error::PointCountMismatch { declared: header.points, found: payload.len() / stride.max(1) });
    }
    Ok(payload[..need]
        .chunks_exact(stride)
        .map(|row| {
            header
                .fields
                .iter()
                .map(|f| {
                    let b = &row[f.offset..f.offset + f.scalar.size()];
                    if f.name == COLOR_SLOT {
                        f64::from(f.scalar.bits32(b).unwrap())
                    } else {
                        f.scalar.decode(b)
                    }
                })
                .collect()
        })
        .collect())
}

fn build_cloud(header: &Header, rows: Vec<Vec<f64>>) -> Result<(PointCloud, usize)> {
    let col = |name: &str| header.fields.iter().position(|f| f.name == name);
    let (xi, yi, zi) = (col("x").unwrap(), col("y").unwrap(), col("z").unwrap());
    let ci = col(COLOR_SLOT);
    let ni = header
        .field("normal_x")
        .map(|_| (col("normal_x").unwrap(), col("normal_y").unwrap(), col("normal_z").unwrap(), col("curvature")));

    let mut points = Vec::with_capacity(rows.len());
    let mut normals = ni.map(|_| Vec::with_capacity(rows.len()));
    let mut dropped = 0;
    for row in rows {
        let p = Point3 { x: row[xi], y: row[yi], z: row[zi], color: ci.map(|c| Rgb::from_packed(row[c] as u32)) };
        if !p.is_finite() {
            dropped += 1;
            continue;
        }
        points.push(p);
        if let (Some(out), Some((a, b, c, k))) = (normals.as_mut(), ni) {
            let curvature = k.map_or(0.0, |k| row[k]);
            let n = Normal3 { nx: row[a], ny: row[b], nz: row[c], curvature };
            out.push(if n.is_valid() { n } else { Normal3::INVALID });
        }
    }
    let cloud = PointCloud { points, normals, viewpoint: header.viewpoint, label: header.label.clone() };
    Ok((cloud, dropped))
}

/// Serializes a non-empty cloud to PCD bytes.
pub fn write_pcd(cloud: &PointCloud, encoding: PcdEncoding) -> Result<Vec<u8>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let color = cloud.has_color();
    let normals = cloud.normals.as_ref();
    if let Some(ns) = normals {
        if ns.len() != cloud.len() {
            return Err(Error::DimensionMismatch { expected: cloud.len(), found: ns.len() });
        }
    }

    let (mut names, mut sizes, mut types) = (vec!["x", "y", "z"], vec![8, 8, 8], vec!["F", "F", "F"]);
    if color {
        names.push("rgb");
        sizes.push(4);
        types.push("F");
    }
    if normals.is_some() {
        for n in ["normal_x", "normal_y", "normal_z", "curvature"] {
            names.push(n);
            sizes.push(8);
            types.push("F");
        }
    }

    let mut h = String::new();
    h.push_str("# .PCD v0.7 - Point Cloud Data file format\n");
    if let Some(label) = &cloud.label {
        let _ = writeln!(h, "# label {label}");
    }
    h.push_str("VERSION 0.7\n");
    let _ = writeln!(h, "FIELDS {}", names.join(" "));
    let _ = writeln!(h, "SIZE {}", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "));
    let _ = writeln!(h, "TYPE {}", types.join(" "));
    let _ = writeln!(h, "COUNT {}", vec!["1"; names.len()].join(" "));
    let _ = writeln!(h, "WIDTH {}", cloud.len());
    h.push_str("HEIGHT 1\n");
    let vp = &cloud.viewpoint;
    let _ = writeln!(h, "VIEWPOINT {} {} {} 1 0 0 0", vp.x, vp.y, vp.z);
    let _ = writeln!(h, "POINTS {}", cloud.len());
    let _ = writeln!(
        h,
        "DATA {}",
        match encoding {
            PcdEncoding::Ascii => "ascii",
            PcdEncoding::Binary => "binary",
        }
    );

    let mut out = h.into_bytes();
    for (i, p) in cloud.points.iter().enumerate() {
        let packed = p.color.unwrap_or_default().to_packed();
        let n = normals.map(|ns| ns[i]);
        match encoding {
            PcdEncoding::Binary => {
                for v in [p.x, p.y, p.z] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                if color {
                    out.extend_from_slice(&packed.to_le_bytes());
                }
                if let Some(n) = n {
                    for v in [n.nx, n.ny, n.nz, n.curvature] {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
            PcdEncoding::Ascii => {
                let mut line = format!("{} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z));
                if color {
                    let _ = write!(line, " {:e}", f32::from_bits(packed));
                }
                if let Some(n) = n {
                    for v in [n.nx, n.ny, n.nz, n.curvature] {
                        let _ = write!(line, " {}", fmt_f64(v));
                    }
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
        }
    }
    Ok(out)
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

/// Writes `cloud` to `path`. Rejects empty clouds.
pub fn save_pcd(cloud: &PointCloud, path: impl AsRef<Path>, encoding: PcdEncoding) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_pcd(cloud, encoding)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nWIDTH 1\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS 1\nDATA ascii\n0 0 0\n";

    #[test]
    fn one_row_at_origin() {
        let (c, dropped) = parse_pcd(MINIMAL.as_bytes()).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(c.points, vec![Point3::new(0.0, 0.0, 0.0)]);
        assert!(c.normals.is_none());
    }

    #[test]
    fn width_larger_than_rows_is_a_count_mismatch() {
        let text = "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nWIDTH 4\nHEIGHT 1\nPOINTS 4\nDATA ascii\n0 0 0\n1 1 1\n2 2 2\n";
        let err = parse_pcd(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::PointCountMismatch { declared: 4, found: 3 }), "{err}");
        assert!(err.to_string().contains("point count mismatch"));
    }

    #[test]
    fn points_disagreeing_with_width() {
        let text = MINIMAL.replace("POINTS 1", "POINTS 2");
        assert!(matches!(parse_pcd(text.as_bytes()), Err(Error::PointCountMismatch { .. })));
    }

    #[test]
    fn compressed_data_is_rejected() {
        let text = MINIMAL.replace("DATA ascii", "DATA binary_compressed");
        assert!(matches!(parse_pcd(text.as_bytes()), Err(Error::UnsupportedEncoding(_))));
    }

    #[test]
    fn size_list_shorter_than_fields() {
        let text = MINIMAL.replace("SIZE 4 4 4", "SIZE 4 4");
        assert!(matches!(parse_pcd(text.as_bytes()), Err(Error::PcdHeader(_))));
    }

    #[test]
    fn nan_rows_are_dropped_and_counted() {
        let text = MINIMAL.replace("WIDTH 1", "WIDTH 3").replace("POINTS 1", "POINTS 3") + "nan nan nan\n1 2 3\n";
        let (c, dropped) = parse_pcd(text.as_bytes()).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn packed_red_survives_a_round_trip() {
        let cloud = PointCloud::new(vec![Point3::with_color(0.5, -1.0, 2.0, Rgb::new(255, 0, 0))]);
        for enc in [PcdEncoding::Ascii, PcdEncoding::Binary] {
            let (back, _) = parse_pcd(&write_pcd(&cloud, enc).unwrap()).unwrap();
            assert_eq!(back.points[0].color, Some(Rgb::new(255, 0, 0)), "{enc:?}");
        }
    }

    #[test]
    fn reads_float_packed_rgb_written_by_pcl() {
        // PCL writes the packed float in decimal; 0x00ff0000 as f32
        let v = f32::from_bits(0x00ff_0000);
        let text = format!(
            "VERSION 0.7\nFIELDS x y z rgb\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\nWIDTH 1\nHEIGHT 1\nPOINTS 1\nDATA ascii\n1 2 3 {v:e}\n"
        );
        let (c, _) = parse_pcd(text.as_bytes()).unwrap();
        assert_eq!(c.points[0].color, Some(Rgb::new(255, 0, 0)));
    }

    #[test]
    fn binary_f32_with_padding_field() {
        let mut bytes = b"VERSION 0.7\nFIELDS x y z _ rgb\nSIZE 4 4 4 1 4\nTYPE F F F U U\nCOUNT 1 1 1 4 1\nWIDTH 2\nHEIGHT 1\nVIEWPOINT 1 2 3 1 0 0 0\nPOINTS 2\nDATA binary\n".to_vec();
        for (x, rgb) in [(1.5f32, 0x0000_ff00u32), (-2.0, 0x0001_0203)] {
            for v in [x, 0.0, 0.25] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            bytes.extend_from_slice(&[0; 4]);
            bytes.extend_from_slice(&rgb.to_le_bytes());
        }
        let (c, _) = parse_pcd(&bytes).unwrap();
        assert_eq!(c.viewpoint, Point3::new(1.0, 2.0, 3.0));
        assert_eq!(c.points[0], Point3::with_color(1.5, 0.0, 0.25, Rgb::new(0, 255, 0)));
        assert_eq!(c.points[1].color, Some(Rgb::new(1, 2, 3)));
    }

    #[test]
    fn ascii_output_declares_point_count() {
        let cloud = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0)]);
        let text = String::from_utf8(write_pcd(&cloud, PcdEncoding::Ascii).unwrap()).unwrap();
        assert!(text.contains("POINTS 1\n"));
    }

    #[test]
    fn empty_cloud_cannot_be_saved() {
        let dir = tempfile::tempdir().unwrap();
        let err = save_pcd(&PointCloud::default(), dir.path().join("e.pcd"), PcdEncoding::Binary);
        assert!(matches!(err, Err(Error::EmptyCloud)));
    }

    #[test]
    fn unwritable_path() {
        let cloud = PointCloud::new(vec![Point3::ORIGIN]);
        let err = save_pcd(&cloud, "/nonexistent-dir/x.pcd", PcdEncoding::Binary);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn label_and_normals_round_trip() {
        let mut cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)])
            .with_label("CR")
            .with_viewpoint(Point3::new(0.0, 0.0, 1.5));
        cloud.set_normals(vec![Normal3::new(0.0, 0.0, 1.0, 0.01), Normal3::new(0.0, 1.0, 0.0, 0.0)]).unwrap();
        let (back, _) = parse_pcd(&write_pcd(&cloud, PcdEncoding::Ascii).unwrap()).unwrap();
        assert_eq!(back, cloud);
    }

    fn arb_point() -> impl Strategy<Value = Point3> {
        (-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3, any::<[u8; 3]>())
            .prop_map(|(x, y, z, c)| Point3::with_color(x, y, z, Rgb::new(c[0], c[1], c[2])))
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(points in prop::collection::vec(arb_point(), 1..200)) {
            let cloud = PointCloud::new(points);
            let (back, dropped) = parse_pcd(&write_pcd(&cloud, PcdEncoding::Binary).unwrap()).unwrap();
            prop_assert_eq!(dropped, 0);
            prop_assert_eq!(back, cloud);
        }

        #[test]
        fn ascii_round_trip_within_1e6(points in prop::collection::vec(arb_point(), 1..100)) {
            let cloud = PointCloud::new(points);
            let (back, _) = parse_pcd(&write_pcd(&cloud, PcdEncoding::Ascii).unwrap()).unwrap();
            prop_assert_eq!(back.len(), cloud.len());
            for (a, b) in back.points.iter().zip(&cloud.points) {
                prop_assert!(a.distance(b) <= 1e-6);
                prop_assert_eq!(a.color, b.color);
            }
        }
    }
}
