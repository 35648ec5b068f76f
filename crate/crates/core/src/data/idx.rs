//! Reader for the IDX container used by MNIST: a 4-byte big-endian magic
//! (two zero bytes, a type code, the number of dimensions), one big-endian
//! u32 per dimension, then the payload. Only unsigned-byte payloads are
//! supported.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};

use crate::error::{Error, Result};
use crate::model::Table;

const TYPE_U8: u8 = 0x08;

pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn truncate(&mut self, n: usize) {
        self.count = self.count.min(n);
        self.pixels.truncate(self.count * self.rows * self.cols);
    }

    /// One row per image, pixel intensities scaled to `[0,1]`.
    pub fn to_table(&self) -> Table {
        let data = self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Table::new(self.count, self.rows * self.cols, data)
            .expect("pixel buffer sized at parse time")
    }
}

fn read_header(
    path: &Path,
    bytes: &[u8],
    expect_dims: u8,
) -> Result<(Cursor<Vec<u8>>, Vec<usize>)> {
    let mut cur = Cursor::new(bytes.to_vec());
    let bad = |msg: String| Error::data(path, None, msg);
    let magic = cur
        .read_u32::<BigEndian>()
        .map_err(|_| bad("file too short for an IDX header".into()))?;
    let [z0, z1, ty, ndims] = magic.to_be_bytes();
    if z0 != 0 || z1 != 0 {
        return Err(bad(format!("bad IDX magic {magic:#010x}")));
    }
    if ty != TYPE_U8 {
        return Err(bad(format!("unsupported IDX element type {ty:#04x}")));
    }
    if ndims != expect_dims {
        return Err(bad(format!(
            "expected {expect_dims} dimensions, found {ndims}"
        )));
    }
    let dims = (0..ndims)
        .map(|_| cur.read_u32::<BigEndian>().map(|d| d as usize))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|_| bad("truncated IDX header".into()))?;
    Ok((cur, dims))
}

fn read_payload(path: &Path, cur: &mut Cursor<Vec<u8>>, len: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; len];
    cur.read_exact(&mut buf)
        .map_err(|_| Error::data(path, None, format!("IDX payload shorter than {len} bytes")))?;
    Ok(buf)
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (mut cur, dims) = read_header(path, &bytes, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let pixels = read_payload(path, &mut cur, count * rows * cols)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (mut cur, dims) = read_header(path, &bytes, 1)?;
    read_payload(path, &mut cur, dims[0])
}
