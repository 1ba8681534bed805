//! Weight logos: per-position stacked-letter rendering of averaged
//! nucleotide weights (SVG plus a TSV sidecar with the raw matrix).

use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::seqdata::NUCLEOTIDES;

/// 4 x L mean weights, rows in A,C,G,T order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightLogo {
    pub matrix: [Vec<f64>; 4],
    pub instance_count: usize,
}

impl WeightLogo {
    pub fn positions(&self) -> usize {
        self.matrix[0].len()
    }
}

/// Entrywise mean of weight vectors, reshaped to 4 x L.
pub fn average_weights(weights: &[Vec<f64>], l: usize) -> Result<WeightLogo> {
    if weights.is_empty() {
        return Err(Error::EmptyInput("no weight vectors to average".into()));
    }
    for w in weights {
        if w.len() != 4 * l {
            return Err(Error::DimensionMismatch {
                expected: 4 * l,
                got: w.len(),
            });
        }
    }
    let mut matrix = [vec![0.0; l], vec![0.0; l], vec![0.0; l], vec![0.0; l]];
    for w in weights {
        for pos in 0..l {
            for slot in 0..4 {
                matrix[slot][pos] += w[4 * pos + slot];
            }
        }
    }
    let count = weights.len() as f64;
    for row in &mut matrix {
        for v in row.iter_mut() {
            *v /= count;
        }
    }
    Ok(WeightLogo {
        matrix,
        instance_count: weights.len(),
    })
}

const COLUMN_WIDTH: f64 = 40.0;
const COLUMN_HEIGHT: f64 = 160.0; // height of the largest |weight| letter
const MARGIN: f64 = 20.0;

const FILLS: [&str; 4] = ["#109648", "#255c99", "#f7b32b", "#d62839"]; // A C G T
const NEGATIVE_FILL: &str = "#9a9a9a";

/// Render the logo as an SVG 1.1 document.
///
/// Per position, letters stack by ascending weight (smallest at the bottom
/// of the stack, largest at the top). Heights scale by |weight| against the
/// logo-wide maximum. Negative weights render below the baseline in gray.
pub fn render_svg(logo: &WeightLogo) -> String {
    let l = logo.positions();
    let max_abs = logo
        .matrix
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let width = 2.0 * MARGIN + l as f64 * COLUMN_WIDTH;
    let height = 2.0 * (MARGIN + COLUMN_HEIGHT);
    let baseline = MARGIN + COLUMN_HEIGHT;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN}\" y1=\"{baseline}\" x2=\"{:.1}\" y2=\"{baseline}\" stroke=\"#000\" stroke-width=\"1\"/>\n",
        width - MARGIN
    ));
    if max_abs > 0.0 {
        for pos in 0..l {
            let x = MARGIN + pos as f64 * COLUMN_WIDTH;
            // ascending weight order: stack positives up from the baseline
            // with the smallest at the bottom
            let mut entries: Vec<(usize, f64)> =
                (0..4).map(|slot| (slot, logo.matrix[slot][pos])).collect();
            entries.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            let mut y_up = baseline;
            for &(slot, w) in entries.iter().filter(|&&(_, w)| w > 0.0) {
                let h = w / max_abs * COLUMN_HEIGHT;
                y_up -= h;
                svg.push_str(&letter(slot, x, y_up, h, FILLS[slot]));
            }
            // negatives hang below the baseline, smallest |w| nearest it
            let mut y_down = baseline;
            for &(slot, w) in entries.iter().rev().filter(|&&(_, w)| w < 0.0) {
                let h = -w / max_abs * COLUMN_HEIGHT;
                svg.push_str(&letter(slot, x, y_down, h, NEGATIVE_FILL));
                y_down += h;
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn letter(slot: usize, x: f64, y_top: f64, height: f64, fill: &str) -> String {
    // glyph box is 10x10 at font-size 13 (cap height ~10); the transform
    // stretches it to the requested column slice
    let sx = COLUMN_WIDTH / 10.0;
    let sy = height / 10.0;
    format!(
        "  <g transform=\"translate({x:.3},{y:.3}) scale({sx:.4},{sy:.4})\" data-letter=\"{nt}\" data-top=\"{y_top:.3}\"><text x=\"5\" y=\"10\" font-size=\"13\" font-family=\"monospace\" text-anchor=\"middle\" fill=\"{fill}\">{nt}</text></g>\n",
        nt = NUCLEOTIDES[slot],
        y = y_top,
    )
}

/// TSV sidecar: header `pos A C G T`, one row per position, 6 decimals.
pub fn sidecar_tsv(logo: &WeightLogo) -> String {
    let mut out = format!("# instances {}\npos\tA\tC\tG\tT\n", logo.instance_count);
    for pos in 0..logo.positions() {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            pos + 1,
            logo.matrix[0][pos],
            logo.matrix[1][pos],
            logo.matrix[2][pos],
            logo.matrix[3][pos]
        ));
    }
    out
}

/// Parse a sidecar TSV back into a logo.
pub fn read_sidecar<R: BufRead>(r: R) -> Result<WeightLogo> {
    let mut matrix: [Vec<f64>; 4] = Default::default();
    let mut instance_count = 0usize;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("# instances ") {
            instance_count = rest.trim().parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: "bad instance count".into(),
            })?;
            continue;
        }
        if line.is_empty() || line.starts_with('#') || line.starts_with("pos") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: lineno + 1,
                message: "expected pos A C G T".into(),
            });
        }
        for slot in 0..4 {
            let v: f64 = fields[slot + 1].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad weight: {}", fields[slot + 1]),
            })?;
            matrix[slot].push(v);
        }
    }
    if matrix[0].is_empty() {
        return Err(Error::EmptyInput("logo sidecar".into()));
    }
    Ok(WeightLogo {
        matrix,
        instance_count,
    })
}

/// Write the SVG to `path` and the TSV sidecar next to it (same stem,
/// `.tsv` extension).
pub fn emit_weight_logo(logo: &WeightLogo, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(logo))?;
    std::fs::write(path.with_extension("tsv"), sidecar_tsv(logo))?;
    Ok(())
}
