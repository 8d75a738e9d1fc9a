//! Field exchange format: CSV text and a compact little-endian binary block.
//!
//! CSV layout (format `QHDTURB-FIELD-01`):
//!
//! ```text
//! # QHDTURB-FIELD-01 csv
//! # kind = scalar
//! # dim = 1
//! # axis0 = 64 1.5625e-1 -5e0 periodic
//! # <any other comment lines are ignored by the reader>
//! x0,value
//! -5e0,1.2e-3
//! ...
//! ```
//!
//! One row per grid point in row-major order: coordinates `x0..` then values
//! (`value` for scalars, `c0..` for vectors, `re,im` for complex fields).
//!
//! Binary layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 16 | magic `QHDTURB-FIELD-01` |
//! | 1 | kind: 0 scalar, 1 vector, 2 complex |
//! | 1 | dim |
//! | 6 | zero padding |
//! | 32 per axis | u64 points, f64 spacing, f64 origin, u8 periodic, 7 zero bytes |
//! | 8 | u64 value count |
//! | 8 per value | f64 values, component-major |

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField, WaveFunction};
use crate::grid::{Axis, Grid, MAX_DIM};

pub const MAGIC: &[u8; 16] = b"QHDTURB-FIELD-01";
pub const CSV_SIGNATURE: &str = "# QHDTURB-FIELD-01 csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
    Complex,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector => "vector",
            FieldKind::Complex => "complex",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "scalar" => Some(FieldKind::Scalar),
            "vector" => Some(FieldKind::Vector),
            "complex" => Some(FieldKind::Complex),
            _ => None,
        }
    }

    fn code(self) -> u8 {
        match self {
            FieldKind::Scalar => 0,
            FieldKind::Vector => 1,
            FieldKind::Complex => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(FieldKind::Scalar),
            1 => Some(FieldKind::Vector),
            2 => Some(FieldKind::Complex),
            _ => None,
        }
    }

    /// Values stored per grid point.
    pub fn components(self, dim: usize) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => dim,
            FieldKind::Complex => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Scalar(ScalarField),
    Vector(VectorField),
    Complex(WaveFunction),
}

impl FieldData {
    pub fn kind(&self) -> FieldKind {
        match self {
            FieldData::Scalar(_) => FieldKind::Scalar,
            FieldData::Vector(_) => FieldKind::Vector,
            FieldData::Complex(_) => FieldKind::Complex,
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            FieldData::Scalar(f) => f.grid(),
            FieldData::Vector(f) => f.grid(),
            FieldData::Complex(f) => f.grid(),
        }
    }

    /// Component-major flat values (`re` block then `im` block for complex).
    fn flat_components(&self) -> Vec<&[f64]> {
        match self {
            FieldData::Scalar(f) => vec![f.values()],
            FieldData::Vector(f) => f.components().iter().map(|c| c.as_slice()).collect(),
            FieldData::Complex(_) => unreachable!("complex fields are split on demand"),
        }
    }

    fn component_vectors(&self) -> Vec<Vec<f64>> {
        match self {
            FieldData::Complex(f) => vec![
                f.values().iter().map(|z| z.re).collect(),
                f.values().iter().map(|z| z.im).collect(),
            ],
            _ => self.flat_components().into_iter().map(|c| c.to_vec()).collect(),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            FieldData::Scalar(f) => Ok(f),
            other => Err(Error::Format(format!("expected scalar field, found {}", other.kind().name()))),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            FieldData::Vector(f) => Ok(f),
            other => Err(Error::Format(format!("expected vector field, found {}", other.kind().name()))),
        }
    }

    pub fn into_complex(self) -> Result<WaveFunction> {
        match self {
            FieldData::Complex(f) => Ok(f),
            other => Err(Error::Format(format!("expected complex field, found {}", other.kind().name()))),
        }
    }
}

impl From<ScalarField> for FieldData {
    fn from(f: ScalarField) -> Self {
        FieldData::Scalar(f)
    }
}

impl From<VectorField> for FieldData {
    fn from(f: VectorField) -> Self {
        FieldData::Vector(f)
    }
}

impl From<WaveFunction> for FieldData {
    fn from(f: WaveFunction) -> Self {
        FieldData::Complex(f)
    }
}

fn build(kind: FieldKind, grid: Grid, comps: Vec<Vec<f64>>) -> Result<FieldData> {
    Ok(match kind {
        FieldKind::Scalar => {
            let values = comps.into_iter().next().unwrap_or_default();
            FieldData::Scalar(ScalarField::new(grid, values)?)
        }
        FieldKind::Vector => FieldData::Vector(VectorField::new(grid, comps)?),
        FieldKind::Complex => {
            let values = comps[0]
                .iter()
                .zip(&comps[1])
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect();
            FieldData::Complex(WaveFunction::new(grid, values)?)
        }
    })
}

/// Serializes `field` as CSV. `meta` lines are written as `# key = value`
/// comments after the structural header.
pub fn encode_csv(field: &FieldData, meta: &[(String, String)]) -> String {
    let grid = field.grid();
    let dim = grid.dim();
    let comps = field.component_vectors();
    let mut out = String::new();
    out.push_str(CSV_SIGNATURE);
    out.push('\n');
    out.push_str(&format!("# kind = {}\n# dim = {dim}\n", field.kind().name()));
    for (k, a) in grid.axes().iter().enumerate() {
        out.push_str(&format!(
            "# axis{k} = {} {:e} {:e} {}\n",
            a.points,
            a.spacing,
            a.origin,
            if a.periodic { "periodic" } else { "bounded" }
        ));
    }
    for (k, v) in meta {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    let mut columns: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    match field.kind() {
        FieldKind::Scalar => columns.push("value".into()),
        FieldKind::Vector => columns.extend((0..dim).map(|k| format!("c{k}"))),
        FieldKind::Complex => columns.extend(["re".to_string(), "im".to_string()]),
    }
    out.push_str(&columns.join(","));
    out.push('\n');
    let mut row = String::new();
    for i in 0..grid.len() {
        row.clear();
        let p = grid.point(i);
        for x in &p[..dim] {
            row.push_str(&format!("{x:e},"));
        }
        for (c, comp) in comps.iter().enumerate() {
            if c > 0 {
                row.push(',');
            }
            row.push_str(&format!("{:e}", comp[i]));
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Header fields recovered from a CSV document, including free-form metadata.
#[derive(Clone, Debug)]
pub struct CsvField {
    pub field: FieldData,
    pub meta: Vec<(String, String)>,
}

fn parse_axis(k: usize, s: &str) -> Result<Axis> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(Error::Format(format!("axis{k}: expected 4 fields")));
    }
    let points = parts[0]
        .parse()
        .map_err(|_| Error::Format(format!("axis{k}: bad point count")))?;
    let spacing = parts[1]
        .parse()
        .map_err(|_| Error::Format(format!("axis{k}: bad spacing")))?;
    let origin = parts[2]
        .parse()
        .map_err(|_| Error::Format(format!("axis{k}: bad origin")))?;
    let periodic = match parts[3] {
        "periodic" => true,
        "bounded" => false,
        other => return Err(Error::Format(format!("axis{k}: unknown boundary {other:?}"))),
    };
    Ok(Axis {
        points,
        spacing,
        origin,
        periodic,
    })
}

/// Parses a CSV field document. Coordinates must match the header grid.
pub fn decode_csv(text: &str) -> Result<CsvField> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim_end() == CSV_SIGNATURE => {}
        _ => return Err(Error::Format("missing QHDTURB-FIELD-01 csv signature".into())),
    }
    let mut kind = None;
    let mut dim: Option<usize> = None;
    let mut axes: [Option<Axis>; MAX_DIM] = [None, None, None];
    let mut meta = Vec::new();
    let mut column_line = None;
    for line in lines.by_ref() {
        let Some(comment) = line.strip_prefix('#') else {
            column_line = Some(line);
            break;
        };
        let Some((k, v)) = comment.split_once('=') else {
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        match k {
            "kind" => {
                kind = Some(
                    FieldKind::from_name(v)
                        .ok_or_else(|| Error::Format(format!("unknown field kind {v:?}")))?,
                )
            }
            "dim" => {
                let d: usize = v.parse().map_err(|_| Error::Format("bad dim".into()))?;
                if !(1..=MAX_DIM).contains(&d) {
                    return Err(Error::Format(format!("dim {d} out of range")));
                }
                dim = Some(d);
            }
            _ => match k.strip_prefix("axis").and_then(|n| n.parse::<usize>().ok()) {
                Some(n) if n < MAX_DIM => axes[n] = Some(parse_axis(n, v)?),
                Some(n) => return Err(Error::Format(format!("axis{n} out of range"))),
                None => meta.push((k.to_string(), v.to_string())),
            },
        }
    }
    let kind = kind.ok_or_else(|| Error::Format("missing kind".into()))?;
    let dim = dim.ok_or_else(|| Error::Format("missing dim".into()))?;
    let axes: Vec<Axis> = axes[..dim]
        .iter()
        .enumerate()
        .map(|(k, a)| a.clone().ok_or_else(|| Error::Format(format!("missing axis{k}"))))
        .collect::<Result<_>>()?;
    let grid = Grid::new(axes)?;
    let ncomp = kind.components(dim);
    let width = dim + ncomp;
    let columns = column_line.ok_or_else(|| Error::Format("missing column header".into()))?;
    if columns.split(',').count() != width {
        return Err(Error::Format(format!("expected {width} columns")));
    }

    let n = grid.len();
    let mut comps: Vec<Vec<f64>> = vec![Vec::new(); ncomp];
    let mut row = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        if row >= n {
            return Err(Error::Format(format!("more than {n} data rows")));
        }
        let mut fields = line.split(',');
        let p = grid.point(row);
        for (k, &expected) in p[..dim].iter().enumerate() {
            let x: f64 = parse_number(fields.next(), row)?;
            let tol = 1e-9 * (grid.axis(k).spacing + expected.abs());
            if (x - expected).abs() > tol {
                return Err(Error::Format(format!(
                    "row {row}: coordinate x{k} = {x} does not match grid ({expected})"
                )));
            }
        }
        for comp in comps.iter_mut() {
            comp.push(parse_number(fields.next(), row)?);
        }
        if fields.next().is_some() {
            return Err(Error::Format(format!("row {row}: too many columns")));
        }
        row += 1;
    }
    if row != n {
        return Err(Error::Format(format!("expected {n} data rows, found {row}")));
    }
    Ok(CsvField {
        field: build(kind, grid, comps)?,
        meta,
    })
}

fn parse_number(s: Option<&str>, row: usize) -> Result<f64> {
    let s = s.ok_or_else(|| Error::Format(format!("row {row}: too few columns")))?;
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("row {row}: bad number {s:?}")))?;
    if !x.is_finite() {
        return Err(Error::Format(format!("row {row}: non-finite value")));
    }
    Ok(x)
}

pub fn encode_binary(field: &FieldData) -> Vec<u8> {
    let grid = field.grid();
    let comps = field.component_vectors();
    let count = comps.iter().map(Vec::len).sum::<usize>();
    let mut out = Vec::with_capacity(24 + 32 * grid.dim() + 8 + 8 * count);
    out.extend_from_slice(MAGIC);
    out.push(field.kind().code());
    out.push(grid.dim() as u8);
    out.extend_from_slice(&[0u8; 6]);
    for a in grid.axes() {
        out.extend_from_slice(&(a.points as u64).to_le_bytes());
        out.extend_from_slice(&a.spacing.to_le_bytes());
        out.extend_from_slice(&a.origin.to_le_bytes());
        out.push(a.periodic as u8);
        out.extend_from_slice(&[0u8; 7]);
    }
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for comp in &comps {
        for v in comp {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format("truncated binary field".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<FieldData> {
    let mut r = Reader { bytes };
    if r.take(16)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let kind = FieldKind::from_code(r.u8()?).ok_or_else(|| Error::Format("unknown field kind".into()))?;
    let dim = r.u8()? as usize;
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(Error::Format(format!("dim {dim} out of range")));
    }
    if r.take(6)?.iter().any(|&b| b != 0) {
        return Err(Error::Format("nonzero header padding".into()));
    }
    let mut axes = Vec::with_capacity(dim);
    for _ in 0..dim {
        let points = usize::try_from(r.u64()?).map_err(|_| Error::Format("point count too large".into()))?;
        let spacing = r.f64()?;
        let origin = r.f64()?;
        let periodic = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(Error::Format("bad periodicity flag".into())),
        };
        if r.take(7)?.iter().any(|&b| b != 0) {
            return Err(Error::Format("nonzero axis padding".into()));
        }
        axes.push(Axis {
            points,
            spacing,
            origin,
            periodic,
        });
    }
    let grid = Grid::new(axes)?;
    let ncomp = kind.components(dim);
    let expected = grid
        .len()
        .checked_mul(ncomp)
        .ok_or_else(|| Error::Format("value count overflows".into()))?;
    let count = r.u64()?;
    if count != expected as u64 {
        return Err(Error::Format(format!("value count {count}, grid needs {expected}")));
    }
    if r.bytes.len() != expected.saturating_mul(8) {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            r.bytes.len(),
            expected.saturating_mul(8)
        )));
    }
    let n = grid.len();
    let mut comps = Vec::with_capacity(ncomp);
    for _ in 0..ncomp {
        let mut c = Vec::with_capacity(n);
        for _ in 0..n {
            let v = r.f64()?;
            if !v.is_finite() {
                return Err(Error::Format("non-finite value".into()));
            }
            c.push(v);
        }
        comps.push(c);
    }
    build(kind, grid, comps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Grid {
        Grid::new(vec![Axis::periodic(8, 3.0), Axis::bounded(9, -1.0, 2.0)]).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = grid2();
        let v = VectorField::from_fn(&g, |x| [x[0].sin() / 3.0, x[1] * 1e-17, 0.0]).unwrap();
        let field = FieldData::from(v);
        let text = encode_csv(&field, &[("name".into(), "velocity".into())]);
        let back = decode_csv(&text).unwrap();
        assert_eq!(back.field, field);
        assert_eq!(back.meta, vec![("name".to_string(), "velocity".to_string())]);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let g = grid2();
        let psi = WaveFunction::from_fn(&g, |x| Complex64::new(x[0], -x[1] / 7.0)).unwrap();
        let field = FieldData::from(psi);
        let bytes = encode_binary(&field);
        assert_eq!(&bytes[..16], MAGIC);
        assert_eq!(decode_binary(&bytes).unwrap(), field);
    }

    #[test]
    fn decoders_reject_damage() {
        let g = grid2();
        let field = FieldData::from(ScalarField::from_fn(&g, |x| x[0] + x[1]).unwrap());
        let bytes = encode_binary(&field);
        assert!(decode_binary(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[16] = 9;
        assert!(decode_binary(&bad).is_err());

        let text = encode_csv(&field, &[]);
        let dropped: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(decode_csv(&dropped).is_err());
        assert!(decode_csv(&text.replacen("# axis0 = 8 3.75e-1", "# axis0 = 8 3.5e-1", 1)).is_err());
        assert!(decode_csv(&text.replace(CSV_SIGNATURE, "# other")).is_err());
    }
}
