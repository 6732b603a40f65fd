//! Closed-form memory/load points, the lower convex envelope, and tradeoff
//! tables.
//!
//! All arithmetic is exact; floats only appear when a table is written out as
//! CSV.

use std::fmt;
use std::io::Write;

use num::{ToPrimitive, Zero};
use serde::Serialize;

use crate::combinatorics::binom;
use crate::error::{Error, Result};
use crate::{ratio, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeTag {
    Coded,
    Uncoded,
    SharedLinkRef,
    Envelope,
}

impl SchemeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Coded => "coded",
            SchemeTag::Uncoded => "uncoded",
            SchemeTag::SharedLinkRef => "shared-link-ref",
            SchemeTag::Envelope => "envelope",
        }
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One `(M, R)` pair in files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadPoint {
    pub scheme: SchemeTag,
    pub k: usize,
    pub n: usize,
    pub t: Option<usize>,
    pub m: Rational,
    pub r: Rational,
}

fn check_kn(k: usize, n: usize) -> Result<()> {
    if k.min(n) < 2 {
        return Err(Error::InvalidParams(format!(
            "need min(K, N) >= 2, got K={k}, N={n}"
        )));
    }
    Ok(())
}

fn big_binom(x: usize, y: usize) -> Result<Rational> {
    let v = binom(x as i64, y as i64)?;
    Ok(Rational::from_integer(v.into()))
}

/// Corner point `t` of the coded scheme:
/// `M = (N+t-1)/K`, `R = (C(U,t) - C(U-N,t)) / C(U,t-1)` with `U = (K-1)N`.
pub fn load_coded(k: usize, n: usize, t: usize) -> Result<LoadPoint> {
    check_kn(k, n)?;
    let u = (k - 1) * n;
    if t < 1 || t > u + 1 {
        return Err(Error::InvalidParams(format!(
            "t={t} outside [1 : {}]",
            u + 1
        )));
    }
    let r = (big_binom(u, t)? - big_binom(u - n, t)?) / big_binom(u, t - 1)?;
    Ok(LoadPoint {
        scheme: SchemeTag::Coded,
        k,
        n,
        t: Some(t),
        m: ratio((n + t - 1) as i64, k as i64),
        r,
    })
}

/// Load of the uncoded scheme, `K (N - M) / (K - 1)`, for `M ∈ [N/K, N]`.
pub fn load_uncoded(k: usize, n: usize, m: &Rational) -> Result<LoadPoint> {
    check_kn(k, n)?;
    let lo = ratio(n as i64, k as i64);
    let hi = ratio(n as i64, 1);
    if *m < lo || *m > hi {
        return Err(Error::InvalidParams(format!(
            "M={m} outside [{lo}, {hi}]"
        )));
    }
    let r = ratio(k as i64, (k - 1) as i64) * (hi - m);
    Ok(LoadPoint {
        scheme: SchemeTag::Uncoded,
        k,
        n,
        t: None,
        m: m.clone(),
        r,
    })
}

/// Piecewise-linear lower convex envelope, stored as hull vertices sorted by
/// memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    vertices: Vec<(Rational, Rational)>,
}

fn cross(o: &(Rational, Rational), a: &(Rational, Rational), b: &(Rational, Rational)) -> Rational {
    (&a.0 - &o.0) * (&b.1 - &o.1) - (&a.1 - &o.1) * (&b.0 - &o.0)
}

/// Lower convex hull of `points` in the `(M, R)` plane. Collinear interior
/// points are dropped.
pub fn convex_envelope(points: &[LoadPoint]) -> Result<Envelope> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("convex envelope of no points".into()));
    }
    let mut pts: Vec<(Rational, Rational)> =
        points.iter().map(|p| (p.m.clone(), p.r.clone())).collect();
    pts.sort();
    // Lowest load per memory value.
    pts.dedup_by(|later, earlier| later.0 == earlier.0);

    let mut hull: Vec<(Rational, Rational)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p) <= Rational::zero() {
            hull.pop();
        }
        hull.push(p);
    }
    Ok(Envelope { vertices: hull })
}

impl Envelope {
    pub fn vertices(&self) -> &[(Rational, Rational)] {
        &self.vertices
    }

    pub fn domain(&self) -> (Rational, Rational) {
        (
            self.vertices[0].0.clone(),
            self.vertices[self.vertices.len() - 1].0.clone(),
        )
    }

    /// Memory-sharing load at `m`. A single-vertex envelope is constant.
    pub fn eval(&self, m: &Rational) -> Result<Rational> {
        if self.vertices.len() == 1 {
            return Ok(self.vertices[0].1.clone());
        }
        let (lo, hi) = self.domain();
        if *m < lo || *m > hi {
            return Err(Error::InvalidArgument(format!(
                "M={m} outside envelope domain [{lo}, {hi}]"
            )));
        }
        let i = self
            .vertices
            .windows(2)
            .position(|w| *m <= w[1].0)
            .expect("m is inside the domain");
        let (m0, r0) = &self.vertices[i];
        let (m1, r1) = &self.vertices[i + 1];
        Ok(r0 + (r1 - r0) * (m - m0) / (m1 - m0))
    }

    /// Slopes between consecutive vertices, left to right.
    pub fn slopes(&self) -> Vec<Rational> {
        self.vertices
            .windows(2)
            .map(|w| (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0))
            .collect()
    }
}

/// One coded corner with the comparison loads at the same memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeoffRow {
    pub t: usize,
    pub m: Rational,
    pub r_coded: Rational,
    pub r_uncoded: Rational,
    pub envelope: Rational,
}

pub fn coded_corners(k: usize, n: usize) -> Result<Vec<LoadPoint>> {
    check_kn(k, n)?;
    let u = (k - 1) * n;
    (1..=u + 1).map(|t| load_coded(k, n, t)).collect()
}

/// Rows for every `t ∈ [1 : U+1]`.
pub fn tradeoff_table(k: usize, n: usize) -> Result<Vec<TradeoffRow>> {
    let corners = coded_corners(k, n)?;
    let env = convex_envelope(&corners)?;
    corners
        .into_iter()
        .map(|c| {
            Ok(TradeoffRow {
                t: c.t.expect("coded corner"),
                r_uncoded: load_uncoded(k, n, &c.m)?.r,
                envelope: env.eval(&c.m)?,
                m: c.m,
                r_coded: c.r,
            })
        })
        .collect()
}

/// Formats like C's `%.12g`.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    const DIGITS: i32 = 12;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..DIGITS).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

fn fmt_rational(r: &Rational) -> String {
    format_sig12(r.to_f64().unwrap_or(f64::NAN))
}

/// Writes the table with columns `scheme,K,N,t,M,R`: one `coded` row per
/// corner, then the `uncoded` and `envelope` loads at the same memories. The
/// `t` column is empty on rows without a corner index.
pub fn write_tradeoff_csv<W: Write>(mut out: W, k: usize, n: usize, rows: &[TradeoffRow]) -> Result<()> {
    writeln!(out, "scheme,K,N,t,M,R")?;
    for row in rows {
        writeln!(out, "coded,{k},{n},{},{},{}", row.t, fmt_rational(&row.m), fmt_rational(&row.r_coded))?;
    }
    for row in rows {
        writeln!(out, "uncoded,{k},{n},,{},{}", fmt_rational(&row.m), fmt_rational(&row.r_uncoded))?;
    }
    for row in rows {
        writeln!(out, "envelope,{k},{n},,{},{}", fmt_rational(&row.m), fmt_rational(&row.envelope))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coded_examples() {
        let p = load_coded(2, 3, 2).unwrap();
        assert_eq!((p.m, p.r), (ratio(2, 1), ratio(1, 1)));
        let p = load_coded(2, 3, 4).unwrap();
        assert_eq!((p.m, p.r), (ratio(3, 1), ratio(0, 1)));
        let p = load_coded(2, 2, 1).unwrap();
        assert_eq!((p.m, p.r), (ratio(1, 1), ratio(2, 1)));
        assert!(load_coded(2, 3, 0).is_err());
        assert!(load_coded(2, 3, 5).is_err());
    }

    #[test]
    fn uncoded_examples() {
        assert_eq!(load_uncoded(2, 3, &ratio(2, 1)).unwrap().r, ratio(2, 1));
        assert_eq!(load_uncoded(4, 3, &ratio(3, 1)).unwrap().r, ratio(0, 1));
        assert_eq!(load_uncoded(10, 5, &ratio(2, 1)).unwrap().r, ratio(10, 3));
        assert_eq!(load_uncoded(10, 5, &ratio(1, 2)).unwrap().r, ratio(5, 1));
        assert!(load_uncoded(10, 5, &ratio(1, 3)).is_err());
    }

    fn pt(m: (i64, i64), r: (i64, i64)) -> LoadPoint {
        LoadPoint {
            scheme: SchemeTag::Coded,
            k: 2,
            n: 2,
            t: None,
            m: ratio(m.0, m.1),
            r: ratio(r.0, r.1),
        }
    }

    #[test]
    fn envelope_degenerate_cases() {
        let env = convex_envelope(&[pt((0, 1), (4, 1)), pt((1, 1), (3, 1)), pt((2, 1), (2, 1))]).unwrap();
        assert_eq!(env.vertices().len(), 2);

        let single = convex_envelope(&[pt((1, 1), (7, 1))]).unwrap();
        assert_eq!(single.eval(&ratio(5, 1)).unwrap(), ratio(7, 1));

        assert!(convex_envelope(&[]).is_err());
    }

    #[test]
    fn envelope_drops_points_above_hull_and_interpolates() {
        let env = convex_envelope(&[
            pt((0, 1), (4, 1)),
            pt((1, 1), (3, 1)),
            pt((2, 1), (0, 1)),
        ])
        .unwrap();
        assert_eq!(env.vertices().len(), 2);
        assert_eq!(env.eval(&ratio(1, 1)).unwrap(), ratio(2, 1));
        assert!(env.eval(&ratio(3, 1)).is_err());
    }

    #[test]
    fn table_for_example() {
        let rows = tradeoff_table(2, 3).unwrap();
        assert_eq!(rows.len(), 4);
        let row = rows.iter().find(|r| r.m == ratio(2, 1)).unwrap();
        assert_eq!(row.r_coded, ratio(1, 1));
        assert_eq!(row.r_uncoded, ratio(2, 1));
        for (k, n) in [(2, 2), (3, 4), (10, 5)] {
            let last = tradeoff_table(k, n).unwrap().pop().unwrap();
            assert_eq!(last.m, ratio(n as i64, 1));
            assert_eq!(last.envelope, ratio(0, 1));
        }
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(2.0), "2");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig12(10.0 / 3.0), "3.33333333333");
        assert_eq!(format_sig12(0.5), "0.5");
        assert_eq!(format_sig12(1e-7), "1e-07");
        assert_eq!(format_sig12(123456789012345.0), "1.23456789012e+14");
    }

    #[test]
    fn csv_shape() {
        let rows = tradeoff_table(2, 3).unwrap();
        let mut buf = Vec::new();
        write_tradeoff_csv(&mut buf, 2, 3, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scheme,K,N,t,M,R");
        assert_eq!(lines.len(), 1 + 3 * 4);
        assert!(lines.contains(&"coded,2,3,2,2,1"));
        assert!(lines.contains(&"uncoded,2,3,,2,2"));
    }
}
