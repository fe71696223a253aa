//! Matrix files: headerless CSV (rows are coordinates, columns samples) and
//! the little-endian binary `HSMX` layout.
//!
//! The binary layout is the magic `HSMX`, `u32` rows, `u32` cols, then the
//! entries in column-major order as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub const HSMX_MAGIC: &[u8; 4] = b"HSMX";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_csv<R: Read>(reader: R) -> Result<Mat> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Format(format!(
                    "row {} has {} fields, expected {c}",
                    rows + 1,
                    rec.len()
                )))
            }
            _ => {}
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("row {}: cannot parse `{field}`", rows + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Mat::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_csv<W: Write>(m: &Mat, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in m.rows() {
        w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_hsmx<R: Read>(mut reader: R) -> Result<Mat> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != HSMX_MAGIC {
        return Err(Error::Format("missing HSMX magic".into()));
    }
    let rows = read_u32(&mut reader)? as usize;
    let cols = read_u32(&mut reader)? as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
    let mut data = vec![0.0; len];
    let mut buf = [0u8; 8];
    for x in data.iter_mut() {
        reader
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("HSMX payload is truncated".into()))?;
        *x = f64::from_le_bytes(buf);
    }
    // column-major payload
    let t = Mat::from_shape_vec((cols, rows), data).map_err(|e| Error::Format(e.to_string()))?;
    Ok(t.reversed_axes().as_standard_layout().to_owned())
}

pub fn write_hsmx<W: Write>(m: &Mat, mut writer: W) -> Result<()> {
    let (rows, cols) = m.dim();
    let too_big = |d: usize| u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")));
    writer.write_all(HSMX_MAGIC)?;
    writer.write_all(&too_big(rows)?.to_le_bytes())?;
    writer.write_all(&too_big(cols)?.to_le_bytes())?;
    for col in m.columns() {
        for &x in col.iter() {
            writer.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub(crate) fn read_u32<R: Read>(reader: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    reader
        .read_exact(&mut b)
        .map_err(|_| Error::Format("unexpected end of header".into()))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads CSV or HSMX, chosen by sniffing the magic bytes.
pub fn read_matrix(path: &Path) -> Result<Mat> {
    let mut f = BufReader::new(File::open(path)?);
    let mut head = [0u8; 4];
    let got = f.read(&mut head)?;
    let chained = std::io::Cursor::new(head[..got].to_vec()).chain(f);
    if got == 4 && &head == HSMX_MAGIC {
        read_hsmx(chained)
    } else {
        read_csv(chained)
    }
}

/// Writes HSMX when the extension is `.hsmx` or `.bin`, CSV otherwise.
pub fn write_matrix(m: &Mat, path: &Path) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("hsmx") | Some("bin") => write_hsmx(m, w),
        _ => write_csv(m, w),
    }
}
