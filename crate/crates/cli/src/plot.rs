use std::path::Path;

use anyhow::{anyhow, Result};
use odeim_bd::bethe::{QZero, SpectralScan};
use odeim_bd::field::eta_eval;
use odeim_bd::{FieldSolution, Which};
use plotters::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> anyhow::Error {
    anyhow!("plot: {e}")
}

fn bounds(ys: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = ys.filter(|y| y.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-3);
    (lo - pad, hi + pad)
}

const COLORS: [RGBColor; 3] = [RGBColor(200, 30, 30), RGBColor(30, 120, 30), RGBColor(30, 60, 200)];

/// log10|Q| of the unshifted scan points against Re theta, with optional zero markers.
pub fn q_plot(path: &Path, scan: &SpectralScan, zeros: &[QZero]) -> Result<()> {
    let pts = scan.base_values();
    let series: Vec<(Which, Vec<(f64, f64)>)> = [Which::Plus, Which::Zero, Which::Minus]
        .into_iter()
        .map(|w| (w, pts.iter().filter_map(|(t, q)| q.map(|q| (t.re, q.get(w).norm().log10()))).collect()))
        .collect();
    let (x0, x1) = bounds(scan.grid.iter().map(|t| t.re));
    let (y0, y1) = bounds(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.1)));
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let title = format!("{} Q-functions, log10|Q|", scan.source);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(50)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(err)?;
    chart.configure_mesh().x_desc("Re theta").y_desc("log10|Q|").draw().map_err(err)?;
    for (i, (w, s)) in series.into_iter().enumerate() {
        let c = COLORS[i];
        chart
            .draw_series(LineSeries::new(s, c.stroke_width(2)))
            .map_err(err)?
            .label(format!("Q {}", w.as_str()))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
    }
    for z in zeros {
        let i = match z.which {
            Which::Plus => 0,
            Which::Zero => 1,
            Which::Minus => 2,
        };
        let c = COLORS[i];
        chart
            .draw_series(std::iter::once(Circle::new((z.theta.re, y0 + 0.04 * (y1 - y0) * (i as f64 + 1.0)), 4, c.filled())))
            .map_err(err)?;
    }
    chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw().map_err(err)?;
    root.present().map_err(err)?;
    Ok(())
}

/// eta(rho, phi) against ln rho on three rays, with the large-rho profile -(1/3) ln|p|^2 on phi = 0.
pub fn field_plot(path: &Path, sol: &FieldSolution) -> Result<()> {
    let p = &sol.params;
    let cone = std::f64::consts::PI / (3.0 * p.alpha);
    let rays = [0.0, 0.5 * cone, cone];
    let step = (sol.rho.len() / 400).max(1);
    let rhos: Vec<f64> = sol.rho.iter().step_by(step).copied().collect();
    let mut series = Vec::new();
    for &phi in &rays {
        let s: Vec<(f64, f64)> = rhos.iter().filter_map(|&r| eta_eval(sol, r, phi).ok().map(|v| (r.ln(), v.eta))).collect();
        series.push((format!("phi = {phi:.3}"), s));
    }
    let a3 = 3.0 * p.alpha;
    let outer: Vec<(f64, f64)> = rhos
        .iter()
        .filter(|&&r| (r.powf(a3) - p.s.powf(a3)).abs() > 1e-3)
        .map(|&r| (r.ln(), -(2.0 / 3.0) * (r.powf(a3) - p.s.powf(a3)).abs().ln()))
        .collect();
    let (x0, x1) = bounds(rhos.iter().map(|r| r.ln()));
    let (y0, y1) = bounds(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.1)));
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let title = format!("eta, alpha = {}, g = {}, s = {}", p.alpha, p.g, p.s);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(50)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(err)?;
    chart.configure_mesh().x_desc("ln rho").y_desc("eta").draw().map_err(err)?;
    for (i, (name, s)) in series.into_iter().enumerate() {
        let c = COLORS[i];
        chart
            .draw_series(LineSeries::new(s, c.stroke_width(2)))
            .map_err(err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
    }
    let outer: Vec<(f64, f64)> = outer.into_iter().filter(|p| p.1 >= y0 && p.1 <= y1).collect();
    chart
        .draw_series(outer.into_iter().step_by(4).map(|p| Circle::new(p, 1, BLACK.filled())))
        .map_err(err)?
        .label("-(1/3) ln|p|^2, phi = 0")
        .legend(|(x, y)| Circle::new((x + 10, y), 2, BLACK.filled()));
    chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw().map_err(err)?;
    root.present().map_err(err)?;
    Ok(())
}
