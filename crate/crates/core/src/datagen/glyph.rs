//! Built-in 5×7 bitmap glyphs rendered onto square canvases.

use super::resample::rotate_2d;
use super::{DatagenError, Grid};

/// Symbols with a built-in bitmap.
pub const GLYPH_ROSTER: [char; 12] = ['a', 'e', 'b', 'd', 'p', 'i', 'j', 'z', '2', 'k', 'x', 'u'];

const ROWS: usize = 7;
const COLS: usize = 5;

fn bitmap(symbol: char) -> Option<[&'static str; ROWS]> {
    Some(match symbol {
        'a' => [".....", ".....", ".###.", "....#", ".####", "#...#", ".####"],
        'e' => [".....", ".....", ".###.", "#...#", "#####", "#....", ".###."],
        'b' => ["#....", "#....", "####.", "#...#", "#...#", "#...#", "####."],
        'd' => ["....#", "....#", ".####", "#...#", "#...#", "#...#", ".####"],
        'p' => ["####.", "#...#", "#...#", "#...#", "####.", "#....", "#...."],
        'i' => ["..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."],
        'j' => ["...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."],
        'z' => [".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"],
        '2' => [".....", ".....", ".###.", "#...#", "..##.", ".#...", "#####"],
        'k' => ["#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."],
        'x' => [".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"],
        'u' => [".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"],
        _ => return None,
    })
}

/// Parses a single-character class name into a roster symbol.
pub fn parse_symbol(name: &str) -> Result<char, DatagenError> {
    let mut chars = name.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if bitmap(c).is_some() => Ok(c),
        _ => Err(DatagenError::Roster(name.to_string())),
    }
}

/// Unrotated glyph: the bitmap scaled by nearest-neighbour to a box about
/// 60% of the canvas height, centred.
pub fn canonical_glyph(symbol: char, size: usize) -> Result<Grid, DatagenError> {
    let rows = bitmap(symbol).ok_or_else(|| DatagenError::Roster(symbol.to_string()))?;
    if size < 32 || !size.is_power_of_two() {
        return Err(DatagenError::Domain(format!("glyph canvas must be a power of two >= 32, got {size}")));
    }
    let box_h = (0.6 * size as f64).round() as usize;
    let box_w = (box_h as f64 * COLS as f64 / ROWS as f64).round() as usize;
    let (oy, ox) = ((size - box_h) / 2, (size - box_w) / 2);
    Ok(Grid::from_fn(2, size, |idx| {
        let (y, x) = (idx / size, idx % size);
        if y < oy || y >= oy + box_h || x < ox || x >= ox + box_w {
            return 0.0;
        }
        let r = (y - oy) * ROWS / box_h;
        let c = (x - ox) * COLS / box_w;
        if rows[r].as_bytes()[c] == b'#' {
            1.0
        } else {
            0.0
        }
    }))
}

/// Rotates a binary image and thresholds it back to `{0, 1}` at 0.5.
pub fn rotate_binary(g: &Grid, angle_deg: f64) -> Grid {
    rotate_2d(g, angle_deg).map(|v| if v >= 0.5 { 1.0 } else { 0.0 })
}

/// Renders `symbol` rotated by `angle_deg` (strictly inside ±45°).
pub fn make_glyph(symbol: char, angle_deg: f64, size: usize) -> Result<Grid, DatagenError> {
    if !(angle_deg > -45.0 && angle_deg < 45.0) {
        return Err(DatagenError::Domain(format!("glyph angle must lie in (-45, 45), got {angle_deg}")));
    }
    let base = canonical_glyph(symbol, size)?;
    Ok(rotate_binary(&base, angle_deg))
}
