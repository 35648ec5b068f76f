use crate::error::{Error, Result};
use crate::model::Table;

pub const QUARTER_NAMES: [&str; 4] = ["top_left", "top_right", "bottom_left", "bottom_right"];

/// Row-major pixel indices of the four quarters of an `h x w` image.
///
/// Each quarter is the `h/2 x w/2` corner block extended by
/// `floor(overlap * h)` rows and `floor(overlap * w)` columns toward the
/// centre. Order: top-left, top-right, bottom-left, bottom-right.
pub fn quarter_indices(h: usize, w: usize, overlap: f64) -> Result<[Vec<usize>; 4]> {
    if !(0.0..0.5).contains(&overlap) {
        return Err(Error::input(format!(
            "overlap {overlap} is outside [0, 0.5)"
        )));
    }
    if h < 2 || w < 2 || !h.is_multiple_of(2) || !w.is_multiple_of(2) {
        return Err(Error::input(format!(
            "image size {h}x{w} must be even in both dimensions"
        )));
    }
    let (hh, hw) = (h / 2, w / 2);
    let eh = ((overlap * h as f64).floor() as usize).min(hh);
    let ew = ((overlap * w as f64).floor() as usize).min(hw);
    let top = 0..hh + eh;
    let bottom = hh - eh..h;
    let left = 0..hw + ew;
    let right = hw - ew..w;
    let block = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| -> Vec<usize> {
        rows.flat_map(|r| cols.clone().map(move |c| r * w + c))
            .collect()
    };
    Ok([
        block(top.clone(), left.clone()),
        block(top, right.clone()),
        block(bottom.clone(), left),
        block(bottom, right),
    ])
}

/// Cuts each flattened `h x w` image (one per row of `images`) into four
/// quarter views.
pub fn quarter_views(images: &Table, h: usize, w: usize, overlap: f64) -> Result<Vec<Table>> {
    if images.n_cols() != h * w {
        return Err(Error::input(format!(
            "images have {} pixels, expected {h}x{w}",
            images.n_cols()
        )));
    }
    let quarters = quarter_indices(h, w, overlap)?;
    quarters
        .iter()
        .map(|idx| {
            let mut data = Vec::with_capacity(images.n_rows() * idx.len());
            for row in images.rows() {
                data.extend(idx.iter().map(|&p| row[p]));
            }
            Table::new(images.n_rows(), idx.len(), data)
        })
        .collect()
}
