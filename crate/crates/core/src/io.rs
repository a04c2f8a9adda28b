//! Plain-text deformation files.
//!
//! ```text
//! # nanorod deformation v1
//! L 2
//! k 4
//! layers 8
//! end_cells true
//! cross_section 0,0 1,0
//! atoms 54
//! 0 0 0 0 0 0
//! ...
//! ```
//!
//! `cross_section` lists cell indices `i,j` (midpoint `(i + 1/2, j + 1/2)`).
//! Each atom line is `x1 x2 x3 y1 y2 y3` with hatted integer reference
//! coordinates and physical positions, atoms in lexicographic order of
//! `(x1, x2, x3)`. Floats use shortest round-trip formatting.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::energy::Deformation;
use crate::error::{Error, Result};
use crate::lattice::{CrossSection, RodLattice};

const MAGIC: &str = "# nanorod deformation v1";

pub fn format_deformation(def: &Deformation) -> String {
    let lat = def.lattice();
    let mut out = String::new();
    let cells: Vec<String> = lat.cross_section().midpoints().iter().map(|(i, j)| format!("{i},{j}")).collect();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "L {}", lat.length()).unwrap();
    writeln!(out, "k {}", lat.k()).unwrap();
    writeln!(out, "layers {}", lat.layers()).unwrap();
    writeln!(out, "end_cells {}", lat.has_end_cells()).unwrap();
    writeln!(out, "cross_section {}", cells.join(" ")).unwrap();
    writeln!(out, "atoms {}", lat.atom_count()).unwrap();
    for (a, p) in def.positions().iter().enumerate() {
        let c = lat.atom_coords(a);
        writeln!(out, "{} {} {} {} {} {}", c[0], c[1], c[2], p.x, p.y, p.z).unwrap();
    }
    out
}

fn header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<&'a str> {
    let (n, line) = lines.next().ok_or_else(|| Error::Parse(format!("missing `{key}` line")))?;
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' ').or(if rest.is_empty() { Some("") } else { None }))
        .ok_or_else(|| Error::Parse(format!("line {}: expected `{key}`", n + 1)))
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad {what}: `{s}`")))
}

pub fn parse_deformation(text: &str) -> Result<Deformation> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(Error::Parse("missing deformation header".into())),
    }
    let length: f64 = num(header(&mut lines, "L")?, "L")?;
    let k: u32 = num(header(&mut lines, "k")?, "k")?;
    let layers: usize = num(header(&mut lines, "layers")?, "layers")?;
    let end_cells: bool = num(header(&mut lines, "end_cells")?, "end_cells")?;
    let cells = header(&mut lines, "cross_section")?
        .split_whitespace()
        .map(|tok| {
            let (i, j) = tok.split_once(',').ok_or_else(|| Error::Parse(format!("bad cell `{tok}`")))?;
            Ok((num(i, "cell")?, num(j, "cell")?))
        })
        .collect::<Result<Vec<(i32, i32)>>>()?;
    let cs = CrossSection::new(&cells)?;
    let lattice = if end_cells { RodLattice::new(cs, length, k)? } else { RodLattice::window(cs, layers, k)? };
    if lattice.layers() != layers {
        return Err(Error::Parse(format!("layers {layers} inconsistent with L = {length}, k = {k}")));
    }
    let count: usize = num(header(&mut lines, "atoms")?, "atom count")?;
    if count != lattice.atom_count() {
        return Err(Error::Parse(format!("expected {} atoms, header says {count}", lattice.atom_count())));
    }
    let mut positions = Vec::with_capacity(count);
    for a in 0..count {
        let (n, line) = lines.next().ok_or_else(|| Error::Parse(format!("missing atom {a}")))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(Error::Parse(format!("line {}: expected 6 fields", n + 1)));
        }
        let coords = [num::<i32>(f[0], "x1")?, num(f[1], "x2")?, num(f[2], "x3")?];
        if coords != lattice.atom_coords(a) {
            return Err(Error::Parse(format!("line {}: atoms out of lexicographic order", n + 1)));
        }
        positions.push(Vector3::new(num(f[3], "y1")?, num(f[4], "y2")?, num(f[5], "y3")?));
    }
    Deformation::new(Arc::new(lattice), positions)
}

pub fn write_deformation(path: &Path, def: &Deformation) -> Result<()> {
    std::fs::write(path, format_deformation(def))?;
    Ok(())
}

pub fn read_deformation(path: &Path) -> Result<Deformation> {
    parse_deformation(&std::fs::read_to_string(path)?)
}
