//! Top-down (x, y) renderings of a body: ASCII for terminals, SVG for docs.

use std::collections::BTreeMap;

use crate::morphology::{ModuleKind, MorphologyTree};

fn glyph(kind: ModuleKind) -> char {
    match kind {
        ModuleKind::Core => 'C',
        ModuleKind::Brick => 'B',
        ModuleKind::ActiveHinge => 'H',
    }
}

fn projection(tree: &MorphologyTree) -> BTreeMap<(i32, i32), Vec<ModuleKind>> {
    let mut cells: BTreeMap<(i32, i32), Vec<ModuleKind>> = BTreeMap::new();
    for module in tree.modules() {
        cells
            .entry((module.position[0], module.position[1]))
            .or_default()
            .push(module.kind);
    }
    cells
}

/// ASCII top-down view, one character per cell, y increasing upwards.
///
/// Cells holding several stacked modules render as the count digit; the core
/// cell always renders as `C`.
pub fn render_ascii(tree: &MorphologyTree) -> String {
    let cells = projection(tree);
    let xs: Vec<i32> = cells.keys().map(|c| c.0).collect();
    let ys: Vec<i32> = cells.keys().map(|c| c.1).collect();
    let (x0, x1) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
    let (y0, y1) = (*ys.iter().min().unwrap(), *ys.iter().max().unwrap());
    let mut out = String::new();
    for y in (y0..=y1).rev() {
        for x in x0..=x1 {
            out.push(match cells.get(&(x, y)) {
                None => '.',
                Some(stack) if stack.contains(&ModuleKind::Core) => 'C',
                Some(stack) if stack.len() == 1 => glyph(stack[0]),
                Some(stack) => char::from_digit(stack.len().min(9) as u32, 10).unwrap(),
            });
        }
        out.push('\n');
    }
    out
}

/// SVG top-down view with one square per cell.
pub fn render_svg(tree: &MorphologyTree) -> String {
    const CELL: i32 = 24;
    let cells = projection(tree);
    let xs: Vec<i32> = cells.keys().map(|c| c.0).collect();
    let ys: Vec<i32> = cells.keys().map(|c| c.1).collect();
    let (x0, x1) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
    let (y0, y1) = (*ys.iter().min().unwrap(), *ys.iter().max().unwrap());
    let width = (x1 - x0 + 1) * CELL;
    let height = (y1 - y0 + 1) * CELL;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    );
    for (&(x, y), stack) in &cells {
        let px = (x - x0) * CELL;
        let py = (y1 - y) * CELL;
        let fill = if stack.contains(&ModuleKind::Core) {
            "#e6b422"
        } else if stack[0] == ModuleKind::ActiveHinge {
            "#c0392b"
        } else {
            "#7f8c8d"
        };
        out.push_str(&format!(
            "  <rect x=\"{px}\" y=\"{py}\" width=\"{CELL}\" height=\"{CELL}\" \
             fill=\"{fill}\" stroke=\"#2c3e50\"/>\n"
        ));
        if stack.len() > 1 {
            out.push_str(&format!(
                "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                px + CELL / 2,
                py + CELL / 2 + 4,
                stack.len()
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}
