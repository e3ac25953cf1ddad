//! Text rendering of the home plan.
//!
//! Walls become box-drawing characters on an integer grid and icons become
//! two-letter glyphs. Selectable icons are upper case and starred in the
//! legend; furniture (oid 0) is lower case.

use std::collections::BTreeSet;
use std::fmt::Write;

use robohome_core::map::{HomeMap, MapIconRecord};

const N: u8 = 1;
const E: u8 = 2;
const S: u8 = 4;
const W: u8 = 8;

/// Map units per grid cell. Rows are taller than columns because terminal
/// cells are roughly twice as high as they are wide.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scale {
    pub x: i32,
    pub y: i32,
}

impl Default for Scale {
    fn default() -> Self {
        Scale { x: 10, y: 20 }
    }
}

#[derive(Clone, Copy)]
enum Cell {
    Empty,
    Box(u8),
    Diagonal(char),
    Glyph(char),
}

fn box_char(mask: u8) -> char {
    match mask {
        0 => ' ',
        m if m == N | S || m == N || m == S => '│',
        m if m == E | W || m == E || m == W => '─',
        m if m == E | S => '┌',
        m if m == S | W => '┐',
        m if m == N | E => '└',
        m if m == N | W => '┘',
        m if m == N | E | S => '├',
        m if m == N | S | W => '┤',
        m if m == E | S | W => '┬',
        m if m == N | E | W => '┴',
        _ => '┼',
    }
}

struct Grid {
    cells: Vec<Vec<Cell>>,
}

impl Grid {
    fn new(cols: usize, rows: usize) -> Self {
        Grid {
            cells: vec![vec![Cell::Empty; cols]; rows],
        }
    }

    fn link(&mut self, c: usize, r: usize, bits: u8) {
        let cell = &mut self.cells[r][c];
        *cell = match *cell {
            Cell::Box(m) => Cell::Box(m | bits),
            Cell::Glyph(g) => Cell::Glyph(g),
            _ => Cell::Box(bits),
        };
    }

    fn segment(&mut self, (c0, r0): (usize, usize), (c1, r1): (usize, usize)) {
        if r0 == r1 {
            let (a, b) = (c0.min(c1), c0.max(c1));
            for c in a..b {
                self.link(c, r0, E);
                self.link(c + 1, r0, W);
            }
            if a == b {
                self.link(a, r0, 0);
            }
        } else if c0 == c1 {
            let (a, b) = (r0.min(r1), r0.max(r1));
            for r in a..b {
                self.link(c0, r, S);
                self.link(c0, r + 1, N);
            }
        } else {
            // Bresenham; a run going down-right on screen is a backslash.
            let ch = if (c1 > c0) == (r1 > r0) { '╲' } else { '╱' };
            let (mut x, mut y) = (c0 as i64, r0 as i64);
            let (x1, y1) = (c1 as i64, r1 as i64);
            let dx = (x1 - x).abs();
            let dy = -(y1 - y).abs();
            let sx = if x < x1 { 1 } else { -1 };
            let sy = if y < y1 { 1 } else { -1 };
            let mut err = dx + dy;
            loop {
                let cell = &mut self.cells[y as usize][x as usize];
                if matches!(cell, Cell::Empty) {
                    *cell = Cell::Diagonal(ch);
                }
                if x == x1 && y == y1 {
                    break;
                }
                let e2 = 2 * err;
                if e2 >= dy {
                    err += dy;
                    x += sx;
                }
                if e2 <= dx {
                    err += dx;
                    y += sy;
                }
            }
        }
    }

    fn is_glyph(&self, c: usize, r: usize) -> bool {
        matches!(self.cells[r][c], Cell::Glyph(_))
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for row in &self.cells {
            let line: String = row
                .iter()
                .map(|c| match *c {
                    Cell::Empty => ' ',
                    Cell::Box(m) => box_char(m),
                    Cell::Diagonal(ch) | Cell::Glyph(ch) => ch,
                })
                .collect();
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Pick a distinct two-letter glyph per icon, in map order.
pub fn glyphs(icons: &[MapIconRecord]) -> Vec<String> {
    let mut taken = BTreeSet::new();
    let mut out = Vec::with_capacity(icons.len());
    for icon in icons {
        let chars: Vec<char> = icon
            .name
            .chars()
            .filter(char::is_ascii_alphanumeric)
            .map(|c| c.to_ascii_uppercase())
            .collect();
        let first = chars.first().copied().unwrap_or('X');
        let mut candidates: Vec<String> = Vec::new();
        if let Some(&second) = chars.get(1) {
            candidates.push(format!("{first}{second}"));
        }
        if let Some(&last) = chars.last() {
            candidates.push(format!("{first}{last}"));
        }
        candidates.extend(chars.iter().skip(2).map(|c| format!("{first}{c}")));
        candidates.extend(('2'..='9').chain('A'..='Z').map(|c| format!("{first}{c}")));
        let glyph = candidates
            .into_iter()
            .find(|g| !taken.contains(g))
            .unwrap_or_else(|| format!("{first}?"));
        taken.insert(glyph.clone());
        out.push(if icon.selectable() {
            glyph
        } else {
            glyph.to_ascii_lowercase()
        });
    }
    out
}

/// Render walls, icons and a legend.
pub fn render(map: &HomeMap, scale: Scale) -> String {
    let points = map
        .walls
        .iter()
        .flat_map(|w| w.vertices.iter().copied())
        .chain(map.icons.iter().map(|i| i.position));
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
    for (x, y) in points {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let mut out = String::new();
    if min_x > max_x {
        out.push_str("(empty map)\n");
        return out;
    }
    let cell = |(x, y): (i32, i32)| -> (usize, usize) {
        let c = (f64::from(x - min_x) / f64::from(scale.x)).round() as usize;
        let r = (f64::from(y - min_y) / f64::from(scale.y)).round() as usize;
        (c, r)
    };
    let (max_c, max_r) = cell((max_x, max_y));
    // Two spare columns so a glyph at the right edge still fits.
    let cols = max_c + 3;
    let mut grid = Grid::new(cols, max_r + 1);
    for wall in &map.walls {
        for pair in wall.vertices.windows(2) {
            grid.segment(cell(pair[0]), cell(pair[1]));
        }
    }
    let glyphs = glyphs(&map.icons);
    for (icon, glyph) in map.icons.iter().zip(&glyphs) {
        let (mut c, r) = cell(icon.position);
        c = c.min(cols - 2);
        while c + 1 < cols && (grid.is_glyph(c, r) || grid.is_glyph(c + 1, r)) {
            c += 1;
        }
        if c + 1 >= cols {
            continue;
        }
        for (i, ch) in glyph.chars().enumerate() {
            grid.cells[r][c + i] = Cell::Glyph(ch);
        }
    }
    out.push_str(&grid.render());
    let _ = writeln!(
        out,
        "\nscale: 1 column = {} units, 1 row = {} units; * marks selectable items",
        scale.x, scale.y
    );
    let name_width = map.icons.iter().map(|i| i.name.chars().count()).max().unwrap_or(0);
    for (icon, glyph) in map.icons.iter().zip(&glyphs) {
        let mark = if icon.selectable() { '*' } else { ' ' };
        let _ = writeln!(
            out,
            "{mark} {glyph}  oid {:<3} {:<name_width$}  {}",
            icon.oid.0, icon.name, icon.icon_id
        );
    }
    out
}
