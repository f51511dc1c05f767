//! SVG drawing of planar slab partitions.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use convpart::clip_slab_2d;
use convpart::report::PartitionDump;

/// One filled polygon per slab, shaded from white (smallest value) to
/// black (largest). The view box is the domain square with `y` pointing up.
pub fn render_svg(dump: &PartitionDump) -> Result<String> {
    if dump.d != 2 {
        bail!("rendering supports d=2 only");
    }
    let domain = dump.domain()?;
    let slabs = dump.slabs()?;
    let (x0, y0, side) = (domain.corner()[0], domain.corner()[1], domain.side());
    let lo = dump.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = dump.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let stroke = side / 1000.0;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0} {y0} {side} {side}" width="800" height="800">"#
    )?;
    writeln!(
        out,
        r##"<g transform="matrix(1 0 0 -1 0 {})" stroke="#d03020" stroke-width="{stroke}" stroke-linejoin="round">"##,
        2.0 * y0 + side
    )?;
    for (slab, &v) in slabs.iter().zip(&dump.values) {
        let poly = clip_slab_2d(slab)?;
        if poly.len() < 3 {
            continue;
        }
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        let g = (255.0 * (1.0 - t)).round().clamp(0.0, 255.0) as u8;
        let points: Vec<String> = poly.iter().map(|p| format!("{},{}", p[0], p[1])).collect();
        writeln!(
            out,
            r#"<polygon points="{}" fill="rgb({g},{g},{g})"/>"#,
            points.join(" ")
        )?;
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Vertex lists of every `<polygon>` in an SVG produced by [`render_svg`].
pub fn polygons(svg: &str) -> Vec<Vec<[f64; 2]>> {
    svg.lines()
        .filter_map(|l| l.trim().strip_prefix(r#"<polygon points=""#))
        .map(|rest| {
            rest.split('"')
                .next()
                .unwrap_or_default()
                .split_whitespace()
                .filter_map(|pair| {
                    let (x, y) = pair.split_once(',')?;
                    Some([x.parse().ok()?, y.parse().ok()?])
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use convpart::report::{CubeDump, SlabDump};

    fn square_dump(level: u32) -> PartitionDump {
        let n = 1usize << level;
        let side = 1.0 / n as f64;
        let mut cells = Vec::new();
        for j in 0..n {
            for i in 0..n {
                cells.push(SlabDump {
                    parent: CubeDump {
                        corner: vec![i as f64 * side, j as f64 * side],
                        side,
                        level,
                    },
                    direction: vec![1.0, 0.0],
                    lo: 0.0,
                    hi: side,
                    closed_hi: true,
                });
            }
        }
        let values = (0..cells.len()).map(|i| i as f64).collect();
        PartitionDump {
            d: 2,
            label: None,
            domain: CubeDump {
                corner: vec![0.0, 0.0],
                side: 1.0,
                level: 0,
            },
            cells,
            values,
        }
    }

    #[test]
    fn one_square() {
        let svg = render_svg(&square_dump(0)).unwrap();
        assert!(svg.contains(r#"viewBox="0 0 1 1""#));
        let polys = polygons(&svg);
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].len(), 4);
    }

    #[test]
    fn four_squares() {
        let svg = render_svg(&square_dump(1)).unwrap();
        let polys = polygons(&svg);
        assert_eq!(polys.len(), 4);
        assert!(polys.iter().all(|p| p.len() == 4));
        assert!(svg.contains("rgb(255,255,255)") && svg.contains("rgb(0,0,0)"));
    }

    #[test]
    fn rejects_3d() {
        let mut dump = square_dump(0);
        dump.d = 3;
        assert_eq!(
            render_svg(&dump).unwrap_err().to_string(),
            "rendering supports d=2 only"
        );
    }
}
