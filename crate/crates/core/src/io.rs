//! Path serialization: CSV and a compact binary frame.
//!
//! Both formats carry the noise header `(seed, path_index)` so a stored
//! path can be re-derived from its generator. CSV columns are `t` followed
//! by the algebra coordinates (or the row-major matrix entries for group
//! paths). The binary frame is little-endian f64 data behind a fixed
//! header.

use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::group::GroupDescriptor;
use crate::path::{AlgebraPath, GroupPath};
use crate::rng::NoiseSpec;

const FRAME_MAGIC: &[u8; 4] = b"LSPF";
const FRAME_VERSION: u8 = 1;
const KIND_ALGEBRA: u8 = 0;
const KIND_GROUP: u8 = 1;

// ----- CSV ------------------------------------------------------------------

pub fn write_algebra_csv(w: &mut impl Write, path: &AlgebraPath, noise: &NoiseSpec) -> Result<()> {
    writeln!(w, "# liestoch-path v1 kind=algebra group={}", path.group().name())?;
    writeln!(w, "# seed={} path_index={}", noise.seed, noise.path_index)?;
    write!(w, "t")?;
    for i in 0..path.group().dim() {
        write!(w, ",y{}", i + 1)?;
    }
    writeln!(w)?;
    for (k, t) in path.grid().times().enumerate() {
        write!(w, "{t}")?;
        for v in path.value(k).iter() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Appends an estimator output as one more CSV column block, sharing the
/// path frame layout: a header comment, then `t,value` rows.
pub fn write_real_csv(
    w: &mut impl Write,
    label: &str,
    path: &crate::path::RealPath,
    noise: &NoiseSpec,
) -> Result<()> {
    writeln!(w, "# liestoch-path v1 kind=real label={label}")?;
    writeln!(w, "# seed={} path_index={}", noise.seed, noise.path_index)?;
    writeln!(w, "t,{label}")?;
    for (k, t) in path.grid().times().enumerate() {
        writeln!(w, "{t},{}", path.value(k))?;
    }
    Ok(())
}

pub fn write_group_csv(w: &mut impl Write, path: &GroupPath, noise: &NoiseSpec) -> Result<()> {
    let m = path.group().embed_dim();
    writeln!(w, "# liestoch-path v1 kind=group group={}", path.group().name())?;
    writeln!(w, "# seed={} path_index={}", noise.seed, noise.path_index)?;
    write!(w, "t")?;
    for r in 0..m {
        for c in 0..m {
            write!(w, ",m{}{}", r + 1, c + 1)?;
        }
    }
    writeln!(w)?;
    for (k, t) in path.grid().times().enumerate() {
        write!(w, "{t}")?;
        let mat = path.value(k);
        for r in 0..m {
            for c in 0..m {
                write!(w, ",{}", mat[(r, c)])?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads back an algebra-path CSV produced by [`write_algebra_csv`].
pub fn read_algebra_csv(
    r: &mut impl BufRead,
    group: &Arc<GroupDescriptor>,
) -> Result<(AlgebraPath, NoiseSpec)> {
    let mut lines = Vec::new();
    for line in r.lines() {
        lines.push(line?);
    }
    let header = lines
        .first()
        .ok_or_else(|| Error::MalformedFrame("empty csv".into()))?;
    if !header.contains("kind=algebra") {
        return Err(Error::MalformedFrame("not an algebra path csv".into()));
    }
    let expected = format!("group={}", group.name());
    if !header.contains(&expected) {
        return Err(Error::MalformedFrame(format!(
            "csv header {header:?} does not match group {}",
            group.name()
        )));
    }
    let noise_line = lines
        .get(1)
        .ok_or_else(|| Error::MalformedFrame("missing noise header".into()))?;
    let noise = parse_noise_header(noise_line)?;

    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in lines.iter().skip(3) {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t: f64 = fields
            .next()
            .ok_or_else(|| Error::MalformedFrame("missing time field".into()))?
            .parse()
            .map_err(|e| Error::MalformedFrame(format!("bad time: {e}")))?;
        let coords: std::result::Result<Vec<f64>, _> = fields.map(str::parse).collect();
        let coords = coords.map_err(|e| Error::MalformedFrame(format!("bad value: {e}")))?;
        times.push(t);
        values.push(DVector::from_vec(coords));
    }
    let steps = values.len().checked_sub(1).filter(|s| *s >= 2).ok_or_else(|| {
        Error::MalformedFrame("csv holds fewer than 3 path values".into())
    })?;
    let horizon = *times.last().unwrap();
    let grid = TimeGrid::new(horizon, steps)?;
    Ok((AlgebraPath::new(Arc::clone(group), grid, values)?, noise))
}

fn parse_noise_header(line: &str) -> Result<NoiseSpec> {
    let mut seed = None;
    let mut path_index = None;
    for token in line.trim_start_matches('#').split_whitespace() {
        if let Some(v) = token.strip_prefix("seed=") {
            seed = v.parse().ok();
        }
        if let Some(v) = token.strip_prefix("path_index=") {
            path_index = v.parse().ok();
        }
    }
    match (seed, path_index) {
        (Some(s), Some(p)) => Ok(NoiseSpec::new(s, p)),
        _ => Err(Error::MalformedFrame(format!("bad noise header: {line:?}"))),
    }
}

// ----- binary frame -----------------------------------------------------------

fn write_frame_header(
    w: &mut impl Write,
    kind: u8,
    group: &GroupDescriptor,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    width: u64,
) -> Result<()> {
    w.write_all(FRAME_MAGIC)?;
    w.write_all(&[FRAME_VERSION, kind])?;
    let name = group.name().as_bytes();
    w.write_all(&(name.len() as u16).to_le_bytes())?;
    w.write_all(name)?;
    w.write_all(&noise.seed.to_le_bytes())?;
    w.write_all(&noise.path_index.to_le_bytes())?;
    w.write_all(&grid.horizon().to_le_bytes())?;
    w.write_all(&(grid.steps() as u64).to_le_bytes())?;
    w.write_all(&width.to_le_bytes())?;
    Ok(())
}

struct FrameHeader {
    kind: u8,
    group_name: String,
    noise: NoiseSpec,
    grid: TimeGrid,
    width: u64,
}

fn read_frame_header(r: &mut impl Read) -> Result<FrameHeader> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FRAME_MAGIC {
        return Err(Error::MalformedFrame("bad magic".into()));
    }
    let mut vk = [0u8; 2];
    r.read_exact(&mut vk)?;
    if vk[0] != FRAME_VERSION {
        return Err(Error::MalformedFrame(format!("unsupported version {}", vk[0])));
    }
    let mut len = [0u8; 2];
    r.read_exact(&mut len)?;
    let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
    r.read_exact(&mut name)?;
    let group_name = String::from_utf8(name)
        .map_err(|_| Error::MalformedFrame("group name not utf-8".into()))?;
    let mut u = [0u8; 8];
    r.read_exact(&mut u)?;
    let seed = u64::from_le_bytes(u);
    r.read_exact(&mut u)?;
    let path_index = u64::from_le_bytes(u);
    r.read_exact(&mut u)?;
    let horizon = f64::from_le_bytes(u);
    r.read_exact(&mut u)?;
    let steps = u64::from_le_bytes(u) as usize;
    r.read_exact(&mut u)?;
    let width = u64::from_le_bytes(u);
    Ok(FrameHeader {
        kind: vk[1],
        group_name,
        noise: NoiseSpec::new(seed, path_index),
        grid: TimeGrid::new(horizon, steps)?,
        width,
    })
}

pub fn write_algebra_frame(w: &mut impl Write, path: &AlgebraPath, noise: &NoiseSpec) -> Result<()> {
    write_frame_header(
        w,
        KIND_ALGEBRA,
        path.group(),
        path.grid(),
        noise,
        path.group().dim() as u64,
    )?;
    for v in path.values() {
        for x in v.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_algebra_frame(
    r: &mut impl Read,
    group: &Arc<GroupDescriptor>,
) -> Result<(AlgebraPath, NoiseSpec)> {
    let header = read_frame_header(r)?;
    if header.kind != KIND_ALGEBRA {
        return Err(Error::MalformedFrame("frame does not hold an algebra path".into()));
    }
    if header.group_name != group.name() {
        return Err(Error::MalformedFrame(format!(
            "frame group {} does not match {}",
            header.group_name,
            group.name()
        )));
    }
    if header.width != group.dim() as u64 {
        return Err(Error::MalformedFrame("frame width mismatch".into()));
    }
    let mut values = Vec::with_capacity(header.grid.len());
    let mut buf = [0u8; 8];
    for _ in 0..header.grid.len() {
        let mut v = DVector::zeros(group.dim());
        for i in 0..group.dim() {
            r.read_exact(&mut buf)?;
            v[i] = f64::from_le_bytes(buf);
        }
        values.push(v);
    }
    Ok((
        AlgebraPath::new(Arc::clone(group), header.grid, values)?,
        header.noise,
    ))
}

pub fn write_group_frame(w: &mut impl Write, path: &GroupPath, noise: &NoiseSpec) -> Result<()> {
    let m = path.group().embed_dim() as u64;
    write_frame_header(w, KIND_GROUP, path.group(), path.grid(), noise, m * m)?;
    for mat in path.values() {
        for r_idx in 0..path.group().embed_dim() {
            for c in 0..path.group().embed_dim() {
                w.write_all(&mat[(r_idx, c)].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_group_frame(
    r: &mut impl Read,
    group: &Arc<GroupDescriptor>,
) -> Result<(GroupPath, NoiseSpec)> {
    let header = read_frame_header(r)?;
    if header.kind != KIND_GROUP {
        return Err(Error::MalformedFrame("frame does not hold a group path".into()));
    }
    if header.group_name != group.name() {
        return Err(Error::MalformedFrame(format!(
            "frame group {} does not match {}",
            header.group_name,
            group.name()
        )));
    }
    let m = group.embed_dim();
    if header.width != (m * m) as u64 {
        return Err(Error::MalformedFrame("frame width mismatch".into()));
    }
    let mut values = Vec::with_capacity(header.grid.len());
    let mut buf = [0u8; 8];
    for _ in 0..header.grid.len() {
        let mut mat = DMatrix::zeros(m, m);
        for r_idx in 0..m {
            for c in 0..m {
                r.read_exact(&mut buf)?;
                mat[(r_idx, c)] = f64::from_le_bytes(buf);
            }
        }
        values.push(mat);
    }
    Ok((GroupPath::new(Arc::clone(group), header.grid, values)?, header.noise))
}
