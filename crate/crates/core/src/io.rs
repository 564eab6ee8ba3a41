//! Text formats for matrices, partitions and streams, plus atomic writes and
//! the SHA-256 manifest.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hierarchy::Stream;
use crate::metric::{FiniteMetricSpace, Metric, PointCloud};
use crate::quotient::Partition;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("not a number: `{}`", s.trim())))
}

/// Matrix file: a header `id,<id_1>,...,<id_n>` then one row per point,
/// `<id_i>,d_i1,...,d_in`. Lines starting with `#` are comments.
pub fn write_matrix(space: &FiniteMetricSpace) -> String {
    let mut out = String::new();
    if let Some(label) = space.label() {
        out.push_str(&format!("# {label}\n"));
    }
    out.push_str("id");
    for id in space.ids() {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for i in 0..space.len() {
        out.push_str(space.id(i));
        for v in space.row(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(text: &str) -> Result<FiniteMetricSpace> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty matrix file"))?;
    let mut cols = header.split(',');
    if cols.next().map(str::trim) != Some("id") {
        return Err(parse_err(hline, "header must start with `id`"));
    }
    let ids: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    let n = ids.len();
    let mut dist = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (ln, line) in lines {
        let mut cells = line.split(',');
        let id = cells.next().unwrap_or("").trim();
        if rows >= n {
            return Err(parse_err(ln, "more rows than header ids"));
        }
        if id != ids[rows] {
            return Err(parse_err(
                ln,
                format!("row id `{id}` does not match header id `{}`", ids[rows]),
            ));
        }
        let vals = cells
            .map(|c| parse_f64(ln, c))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != n {
            return Err(parse_err(
                ln,
                format!("expected {n} distances, found {}", vals.len()),
            ));
        }
        dist.extend(vals);
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {n} rows, found {rows}"),
        ));
    }
    let label = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .map(str::to_string);
    let space = FiniteMetricSpace::with_ids(ids, dist)?;
    Ok(match label {
        Some(l) => space.with_label(l),
        None => space,
    })
}

/// Partition file: `point_id,class_label` per line, every point exactly once.
pub fn read_partition(space: &FiniteMetricSpace, text: &str) -> Result<Partition> {
    let mut labels: Vec<Option<String>> = vec![None; space.len()];
    for (ln, line) in content_lines(text) {
        let (id, class) = line
            .split_once(',')
            .ok_or_else(|| parse_err(ln, "expected `point_id,class`"))?;
        let p = space
            .index_of(id.trim())
            .ok_or_else(|| parse_err(ln, format!("unknown point `{}`", id.trim())))?;
        if labels[p].replace(class.trim().to_string()).is_some() {
            return Err(parse_err(ln, format!("point `{}` listed twice", id.trim())));
        }
    }
    let mut names: Vec<String> = Vec::new();
    let mut out = Vec::with_capacity(labels.len());
    for (p, l) in labels.into_iter().enumerate() {
        let l = l.ok_or_else(|| {
            Error::PartitionMismatch(format!("point `{}` has no class", space.id(p)))
        })?;
        let k = names.iter().position(|x| *x == l).unwrap_or_else(|| {
            names.push(l);
            names.len() - 1
        });
        out.push(k);
    }
    Ok(Partition::from_labels(&out))
}

pub fn write_partition(space: &FiniteMetricSpace, partition: &Partition) -> String {
    (0..space.len())
        .map(|p| format!("{},{}\n", space.id(p), partition.class_of(p)))
        .collect()
}

pub const STREAM_DISTANCE_LINE: &str = "# distance: euclidean";

/// Stream CSV: the distance rule line, a header `index,coord_0,...` and one row per sample.
pub fn write_stream(stream: &Stream) -> String {
    let pc = stream.points();
    let mut out = format!("{STREAM_DISTANCE_LINE}\nindex");
    for k in 0..pc.dim() {
        out.push_str(&format!(",coord_{k}"));
    }
    out.push('\n');
    for i in 0..pc.len() {
        out.push_str(&i.to_string());
        for v in pc.point(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_stream(text: &str, seed: u64) -> Result<Stream> {
    let first = text.lines().next().unwrap_or("").trim();
    if first != STREAM_DISTANCE_LINE {
        return Err(parse_err(
            1,
            format!("first line must be `{STREAM_DISTANCE_LINE}`"),
        ));
    }
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(2, "missing header"))?;
    let dim = header.split(',').count() - 1;
    if !header.starts_with("index") || dim == 0 {
        return Err(parse_err(hl, "header must be `index,coord_0,...`"));
    }
    let mut coords = Vec::new();
    for (expected, (ln, line)) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != dim + 1 {
            return Err(parse_err(
                ln,
                format!("expected {} fields, found {}", dim + 1, cells.len()),
            ));
        }
        if cells[0].trim().parse::<usize>().ok() != Some(expected) {
            return Err(parse_err(ln, format!("expected index {expected}")));
        }
        for c in &cells[1..] {
            coords.push(parse_f64(ln, c)?);
        }
    }
    Stream::new(PointCloud::new(dim, coords)?, seed)
}

/// Writes through a sibling temp file and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("no file name in {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `manifest` in `dir`: one `<sha256>  <file name>` line per file, sorted by name.
pub fn write_manifest(dir: &Path, files: &[PathBuf]) -> Result<PathBuf> {
    let mut entries = Vec::new();
    for f in files {
        let bytes = fs::read(f)?;
        let name = f
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        entries.push((name, sha256_hex(&bytes)));
    }
    entries.sort();
    let body: String = entries.iter().map(|(n, h)| format!("{h}  {n}\n")).collect();
    let path = dir.join("manifest");
    write_atomic(&path, &body)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_motif_stream;

    #[test]
    fn matrix_round_trip_is_exact() {
        let pc = PointCloud::from_points(&[[0.0, 0.1], [0.3, 0.7], [1.0 / 3.0, 2.0]]);
        let s = FiniteMetricSpace::from_metric(&pc)
            .unwrap()
            .with_label("three");
        let back = read_matrix(&write_matrix(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn matrix_errors_carry_lines() {
        let bad = "id,a,b\na,0,1\nb,1,x\n";
        assert!(matches!(
            read_matrix(bad),
            Err(Error::Parse { line: 3, .. })
        ));
        let asym = "id,a,b\na,0,1\nb,2,0\n";
        assert_eq!(read_matrix(asym), Err(Error::AsymmetricDistance(0, 1)));
        let short = "id,a,b\na,0,1\n";
        assert!(matches!(read_matrix(short), Err(Error::Parse { .. })));
    }

    #[test]
    fn partition_file() {
        let s = read_matrix("id,a,b,c\na,0,1,2\nb,1,0,1\nc,2,1,0\n").unwrap();
        let p = read_partition(&s, "a,x\nc,x\nb,y\n").unwrap();
        assert_eq!(p.labels(), &[0, 1, 0]);
        assert_eq!(
            read_partition(&s, "a,x\nb,y\n").unwrap_err(),
            Error::PartitionMismatch("point `c` has no class".into())
        );
        assert!(matches!(
            read_partition(&s, "a,x\na,y\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert_eq!(read_partition(&s, &write_partition(&s, &p)).unwrap(), p);
    }

    #[test]
    fn stream_round_trip() {
        let s = gen_motif_stream(4, 3, 0.001, 2).unwrap();
        let back = read_stream(&write_stream(&s), 2).unwrap();
        assert_eq!(back, s);
        assert!(read_stream("index,coord_0\n0,1\n", 0).is_err());
    }

    #[test]
    fn atomic_write_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        write_atomic(&a, "x\n").unwrap();
        let m = write_manifest(dir.path(), &[a]).unwrap();
        let text = fs::read_to_string(m).unwrap();
        assert_eq!(text, format!("{}  a.csv\n", sha256_hex(b"x\n")));
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
