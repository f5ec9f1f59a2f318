//! Deterministic SVG figures: the butterfly as vertical band segments over
//! `alpha = phi / 2 pi`, and the two shifted butterflies with the defect
//! energy curve on top.

use std::fmt::Write;

use crate::curve::EnergyCurve;
use crate::error::{Error, Result};
use crate::spectral::BandData;

pub const WIDTH: f64 = 1200.0;
pub const HEIGHT: f64 = 900.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 40.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 80.0;

pub enum Plot<'a> {
    Butterfly(&'a [BandData]),
    /// Channel `i` is the butterfly shifted by `kappa[i]`.
    Overlay {
        butterfly: &'a [BandData],
        kappa: [f64; 2],
        curve: &'a EnergyCurve,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgStyle {
    pub band_colors: [String; 2],
    pub curve_color: String,
    pub curve_width: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            band_colors: ["#1f4e9c".into(), "#c0392b".into()],
            curve_color: "#111111".into(),
            curve_width: 2.0,
        }
    }
}

struct Frame {
    emin: f64,
    emax: f64,
}

impl Frame {
    fn x(&self, alpha: f64) -> f64 {
        LEFT + alpha * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, e: f64) -> f64 {
        TOP + (self.emax - e) / (self.emax - self.emin) * (HEIGHT - TOP - BOTTOM)
    }
}

pub fn render_svg(plot: &Plot, style: &SvgStyle) -> Result<String> {
    let (layers, curve): (Vec<(&[BandData], f64)>, Option<&EnergyCurve>) = match plot {
        Plot::Butterfly(data) => (vec![(data, 0.0)], None),
        Plot::Overlay {
            butterfly,
            kappa,
            curve,
        } => (
            vec![(butterfly, kappa[0]), (butterfly, kappa[1])],
            Some(curve),
        ),
    };
    if layers[0].0.is_empty() || curve.is_some_and(|c| c.samples.is_empty()) {
        return Err(Error::EmptyData);
    }
    let kmin = layers.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
    let kmax = layers.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    let mut frame = Frame {
        emin: -3.0 + kmin,
        emax: 3.0 + kmax,
    };
    if let Some(c) = curve {
        for s in &c.samples {
            frame.emin = frame.emin.min(s.energy);
            frame.emax = frame.emax.max(s.energy);
        }
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    axes(&mut out, &frame);
    for (i, (data, shift)) in layers.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<g class="layer" id="bands-{}" stroke="{}" stroke-width="1">"#,
            i + 1,
            style.band_colors[i % 2]
        );
        for d in data.iter() {
            let x = frame.x(d.alpha());
            for b in &d.bands {
                let _ = writeln!(
                    out,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
                    frame.y(b.emax + shift),
                    frame.y(b.emin + shift)
                );
            }
        }
        let _ = writeln!(out, "</g>");
    }
    if let Some(c) = curve {
        let points: Vec<String> = c
            .samples
            .iter()
            .map(|s| {
                format!(
                    "{:.2},{:.2}",
                    frame.x(s.phi / std::f64::consts::TAU),
                    frame.y(s.energy)
                )
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<g class="layer" id="curve"><polyline fill="none" stroke="{}" stroke-width="{}" points="{}"/></g>"#,
            style.curve_color,
            style.curve_width,
            points.join(" ")
        );
    }
    let _ = writeln!(out, "</svg>");
    Ok(out)
}

fn axes(out: &mut String, f: &Frame) {
    let (x0, x1) = (f.x(0.0), f.x(1.0));
    let (y0, y1) = (f.y(f.emin), f.y(f.emax));
    let _ = writeln!(
        out,
        r##"<g id="axes" stroke="#444444" stroke-width="1" font-family="sans-serif" font-size="14">"##
    );
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none"/>"#,
        x1 - x0,
        y0 - y1
    );
    for i in 0..=4 {
        let a = i as f64 / 4.0;
        let x = f.x(a);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
            y0 + 6.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" stroke="none">{a}</text>"#,
            y0 + 24.0
        );
    }
    let lo = f.emin.ceil() as i64;
    let hi = f.emax.floor() as i64;
    for e in lo..=hi {
        let y = f.y(e as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}"/>"#,
            x0 - 6.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" stroke="none">{e}</text>"#,
            x0 - 10.0,
            y + 5.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" stroke="none">flux per face / 2π</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        out,
        r#"<text x="24" y="{:.2}" text-anchor="middle" stroke="none" transform="rotate(-90 24 {:.2})">E</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let _ = writeln!(out, "</g>");
}
