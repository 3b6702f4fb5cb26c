//! The two-parallel-segment diagram: each exposure arm is a unit segment
//! carrying its two stratum conditionals and the marginal between them, with
//! the dissection ratio marked. Unit coordinate equals probability, so the
//! geometry is exact up to SVG formatting precision.

use std::fmt::Write as _;

use num::{BigInt, Zero};
use serde::Serialize;

use crate::analysis::{dissection, Side};
use crate::error::{Error, Result};
use crate::prob::Probability;
use crate::tables::{Exposure, Outcome, StratifiedTable};

/// Marks on one arm's segment: the two stratum conditionals and the marginal.
/// The marginal always lies in the closed interval of the two conditionals.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentMarks {
    /// p(x | arm, z') — second stratum.
    pub cond_z_prime: Probability,
    /// p(x | arm, z) — first stratum.
    pub cond_z: Probability,
    /// p(x | arm), pooled.
    pub marginal: Probability,
    /// (p(z | arm), p(z' | arm)); `None` when the segment is degenerate
    /// (equal conditionals), in which case the brace annotation is suppressed.
    pub ratio: Option<(Probability, Probability)>,
}

/// Abstract coordinates of the diagram, renderable to SVG.
#[derive(Debug, Clone, Serialize)]
pub struct FigureModel {
    /// Exposed arm (y).
    pub top: SegmentMarks,
    /// Unexposed arm (y').
    pub bottom: SegmentMarks,
    /// Closed intersection of the two spanned intervals; `None` when they are
    /// disjoint, i.e. no reversal is possible.
    pub overlap_interval: Option<(Probability, Probability)>,
}

fn segment_marks(table: &StratifiedTable, side: Side) -> Result<SegmentMarks> {
    let given = match side {
        Side::Exposed => Exposure::Exposed,
        Side::Unexposed => Exposure::Unexposed,
    };
    let strata = table.strata();
    let cond_z = strata[0].counts.cond_prob(Outcome::Success, given)?;
    let cond_z_prime = strata[1].counts.cond_prob(Outcome::Success, given)?;
    let pooled = table.pool();
    let marginal = pooled.cond_prob(Outcome::Success, given)?;
    let ratio = match dissection(table, side) {
        Ok(_) => {
            let arm_total = pooled.margin(given);
            let w_z = Probability::from_counts(strata[0].counts.margin(given), arm_total)?;
            let w_z_prime = Probability::from_counts(strata[1].counts.margin(given), arm_total)?;
            Some((w_z, w_z_prime))
        }
        Err(Error::DegenerateSegment(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SegmentMarks {
        cond_z_prime,
        cond_z,
        marginal,
        ratio,
    })
}

/// Builds the diagram model from a binary-stratified table.
pub fn build_figure(table: &StratifiedTable) -> Result<FigureModel> {
    if table.len() != 2 {
        return Err(Error::NotBinaryStratifier(table.len()));
    }
    let top = segment_marks(table, Side::Exposed)?;
    let bottom = segment_marks(table, Side::Unexposed)?;
    let span = |m: &SegmentMarks| {
        let lo = m.cond_z.clone().min(m.cond_z_prime.clone());
        let hi = m.cond_z.clone().max(m.cond_z_prime.clone());
        (lo, hi)
    };
    let (t_lo, t_hi) = span(&top);
    let (b_lo, b_hi) = span(&bottom);
    let lo = t_lo.max(b_lo);
    let hi = t_hi.min(b_hi);
    let overlap_interval = if lo <= hi { Some((lo, hi)) } else { None };
    Ok(FigureModel {
        top,
        bottom,
        overlap_interval,
    })
}

#[derive(Debug, Clone)]
pub struct RenderOptions {
    /// Unit-segment width in SVG user units; probability p lands at x = p * width.
    pub width: u32,
    /// Draw textual labels for each mark and the ratio annotations.
    pub labels: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            width: 600,
            labels: true,
        }
    }
}

fn coord(p: &Probability, width: u32) -> String {
    format!("{:.6}", p.to_f64() * width as f64)
}

/// Reduced integer ratio text, e.g. "1:3" for weights 1/4 and 3/4.
fn ratio_text(a: &Probability, b: &Probability) -> String {
    let ra = a.as_rational();
    let rb = b.as_rational();
    // a/(a+b) etc. have a common denominator once brought over lcm; reduce
    // the cross products instead.
    let left: BigInt = ra.numer() * rb.denom();
    let right: BigInt = rb.numer() * ra.denom();
    let g = num::integer::gcd(left.clone(), right.clone());
    if g.is_zero() {
        return "0:0".to_string();
    }
    format!("{}:{}", left / &g, right / &g)
}

/// Deterministic SVG 1.1 rendering; identical model and options give
/// byte-identical output.
pub fn render_svg(model: &FigureModel, opts: &RenderOptions) -> String {
    let w = opts.width;
    let pad = 60u32;
    let top_y = 80u32;
    let bottom_y = 200u32;
    let tick = 7u32;
    let total_w = w + 2 * pad;
    let total_h = bottom_y + 80;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{total_w}\" height=\"{total_h}\" viewBox=\"0 0 {total_w} {total_h}\">"
    );
    let _ = writeln!(s, "<g transform=\"translate({pad},0)\" font-family=\"monospace\" font-size=\"12\">");

    if let Some((lo, hi)) = &model.overlap_interval {
        let x0 = coord(lo, w);
        let _ = writeln!(
            s,
            "<rect x=\"{x0}\" y=\"{top_y}\" width=\"{:.6}\" height=\"{}\" fill=\"#dce9f5\"/>",
            (hi.to_f64() - lo.to_f64()) * w as f64,
            bottom_y - top_y
        );
    } else if opts.labels {
        let _ = writeln!(
            s,
            "<text x=\"{:.6}\" y=\"{}\" fill=\"#7a2020\">no reversal possible (intervals disjoint)</text>",
            w as f64 / 2.0 - 120.0,
            (top_y + bottom_y) / 2
        );
    }

    for (y, marks, label_above) in [(top_y, &model.top, true), (bottom_y, &model.bottom, false)] {
        let _ = writeln!(
            s,
            "<line x1=\"0.000000\" y1=\"{y}\" x2=\"{w}.000000\" y2=\"{y}\" stroke=\"#444444\" stroke-width=\"1\"/>"
        );
        // Unit endpoints.
        for (x, t) in [(0u32, "0"), (w, "1")] {
            let _ = writeln!(
                s,
                "<line x1=\"{x}.000000\" y1=\"{}\" x2=\"{x}.000000\" y2=\"{}\" stroke=\"#444444\" stroke-width=\"1\"/>",
                y - tick,
                y + tick
            );
            if opts.labels {
                let _ = writeln!(
                    s,
                    "<text x=\"{x}.000000\" y=\"{}\" text-anchor=\"middle\" fill=\"#444444\">{t}</text>",
                    y + tick + 14
                );
            }
        }
        let arm = if label_above { "y" } else { "y'" };
        let marks_list = [
            (&marks.cond_z_prime, format!("p(x|{arm},z')")),
            (&marks.cond_z, format!("p(x|{arm},z)")),
            (&marks.marginal, format!("p(x|{arm})")),
        ];
        for (i, (p, name)) in marks_list.iter().enumerate() {
            let x = coord(p, w);
            let color = if i == 2 { "#b03030" } else { "#1f5fa8" };
            let _ = writeln!(
                s,
                "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>",
                y - tick,
                y + tick
            );
            if opts.labels {
                let ty = if label_above {
                    y - tick - 6 - 14 * (i as u32)
                } else {
                    y + tick + 16 + 14 * (i as u32)
                };
                let _ = writeln!(
                    s,
                    "<text x=\"{x}\" y=\"{ty}\" text-anchor=\"middle\" fill=\"{color}\">{name}={:.6}</text>",
                    p.to_f64()
                );
            }
        }
        if opts.labels {
            if let Some((wz, wzp)) = &marks.ratio {
                let mid = (marks.cond_z.to_f64() + marks.cond_z_prime.to_f64()) / 2.0;
                let ty = if label_above { y - tick - 48 } else { y + tick + 62 };
                let _ = writeln!(
                    s,
                    "<text x=\"{:.6}\" y=\"{ty}\" text-anchor=\"middle\" fill=\"#2f7d4f\">p(z|{arm}):p(z'|{arm}) = {}</text>",
                    mid * w as f64,
                    ratio_text(wz, wzp)
                );
            }
        }
    }

    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}
