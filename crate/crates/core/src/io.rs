//! CSV readers and writers for Q tables, zero lists and conformal-limit tables.

use std::io::{Read, Write};

use crate::bethe::{ConformalLimitTable, QZero, SourceKind, SpectralScan};
use crate::error::{Error, Result};
use crate::params::{energy_of_theta, C64};
use crate::qtriple::{Gauge, QTriple};

pub const Q_COLUMNS: [&str; 10] = [
    "theta_re", "theta_im", "q_plus_re", "q_plus_im", "q_zero_re", "q_zero_im", "q_minus_re", "q_minus_im", "cond", "drift",
];

pub const ZERO_COLUMNS: [&str; 7] =
    ["theta_re", "theta_im", "which", "abs_q_at_zero", "bae_residual_re", "bae_residual_im", "bae_residual_abs"];

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn q_record(q: &QTriple) -> Vec<String> {
    [q.theta, q.q_plus, q.q_zero, q.q_minus]
        .iter()
        .flat_map(|c| [fmt(c.re), fmt(c.im)])
        .chain([fmt(q.cond), fmt(q.drift)])
        .collect()
}

/// Writes Q-triples. Conformal tables carry two extra columns `E_re, E_im`.
/// Lines starting with '#' hold the gauge tag and any failed points.
pub fn write_q_csv<W: Write>(
    mut out: W,
    triples: &[QTriple],
    source: SourceKind,
    alpha: f64,
    failures: &[(C64, &str)],
) -> Result<()> {
    let gauge = triples.first().map(|q| q.gauge).unwrap_or(Gauge::ChiUnit);
    writeln!(out, "# source={source} gauge={gauge}")?;
    for (t, msg) in failures {
        writeln!(out, "# failed theta={},{}: {}", t.re, t.im, msg.replace('\n', " "))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = Q_COLUMNS.to_vec();
    if source == SourceKind::Conformal {
        header.extend(["E_re", "E_im"]);
    }
    w.write_record(&header)?;
    for q in triples {
        let mut rec = q_record(q);
        if source == SourceKind::Conformal {
            let e = energy_of_theta(q.theta, alpha);
            rec.extend([fmt(e.re), fmt(e.im)]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// All successful points of a scan in (grid, shift) order.
pub fn write_scan_csv<W: Write>(out: W, scan: &SpectralScan) -> Result<()> {
    let triples: Vec<QTriple> = scan.points.iter().filter_map(|p| p.q.as_ref().ok().copied()).collect();
    write_q_csv(out, &triples, scan.source, scan.alpha, &scan.failures())
}

fn comment_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace().find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

fn parse(field: Option<&str>, name: &str) -> Result<f64> {
    let f = field.ok_or_else(|| Error::Format(format!("missing column {name}")))?;
    f.trim().parse().map_err(|_| Error::Format(format!("bad number '{f}' in column {name}")))
}

/// Reads a Q table written by [`write_q_csv`]; the gauge is taken from the comment header.
pub fn read_q_csv<R: Read>(input: R) -> Result<Vec<QTriple>> {
    read_q_table(input).map(|t| t.1)
}

/// As [`read_q_csv`], also returning the source tag of the comment header if present.
pub fn read_q_table<R: Read>(mut input: R) -> Result<(Option<SourceKind>, Vec<QTriple>)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut gauge = Gauge::ChiUnit;
    let mut source = None;
    for line in text.lines().filter(|l| l.starts_with('#')) {
        if let Some(g) = comment_value(line, "gauge") {
            gauge = g.parse()?;
        }
        if let Some(s) = comment_value(line, "source") {
            source = Some(s.parse()?);
        }
    }
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.clone();
    let idx = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("missing column {name}")))
    };
    let cols: Vec<usize> = Q_COLUMNS.iter().map(|c| idx(c)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = cols.iter().zip(Q_COLUMNS).map(|(&i, n)| parse(rec.get(i), n)).collect::<Result<_>>()?;
        out.push(QTriple {
            theta: C64::new(v[0], v[1]),
            q_plus: C64::new(v[2], v[3]),
            q_zero: C64::new(v[4], v[5]),
            q_minus: C64::new(v[6], v[7]),
            gauge,
            cond: v[8],
            drift: v[9],
        });
    }
    Ok((source, out))
}

pub fn write_zeros_csv<W: Write>(out: W, zeros: &[QZero]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ZERO_COLUMNS)?;
    for z in zeros {
        let b = z.bae.unwrap_or(C64::new(f64::NAN, f64::NAN));
        w.write_record([
            fmt(z.theta.re),
            fmt(z.theta.im),
            z.which.as_str().to_string(),
            fmt(z.abs_q),
            fmt(b.re),
            fmt(b.im),
            fmt(b.norm()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_limit_csv<W: Write>(out: W, table: &ConformalLimitTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "s", "E_re", "E_im", "q_massive_re", "q_massive_im", "q_conformal_re", "q_conformal_im", "ratio_re", "ratio_im",
        "normalized_re", "normalized_im", "drift",
    ])?;
    for (i, r) in table.rows.iter().enumerate() {
        let drift = if i == 0 { String::new() } else { fmt(table.drift[i - 1]) };
        let mut rec = vec![fmt(r.s)];
        for c in [r.energy, r.q_massive, r.q_conformal, r.ratio, r.normalized] {
            rec.extend([fmt(c.re), fmt(c.im)]);
        }
        rec.push(drift);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_round_trip() {
        let q = QTriple {
            theta: C64::new(0.3, -0.1),
            q_plus: C64::new(1.0 / 3.0, 2e-17),
            q_zero: C64::new(-4.5, 0.0),
            q_minus: C64::new(1e300, -7.25),
            gauge: Gauge::Psi0Unit,
            cond: 12.5,
            drift: 3e-9,
        };
        let mut buf = Vec::new();
        write_q_csv(&mut buf, &[q, q], SourceKind::Conformal, 1.0, &[(C64::new(2.0, 0.0), "boom")]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# source=conformal gauge=Psi0-unit\n# failed"));
        assert!(text.contains("cond,drift,E_re,E_im"));
        let back = read_q_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![q, q]);
    }

    #[test]
    fn bad_number_rejected() {
        let text = format!("{}\n1,0,x,0,0,0,0,0,1,0\n", Q_COLUMNS.join(","));
        assert!(matches!(read_q_csv(text.as_bytes()), Err(Error::Format(_))));
    }
}
