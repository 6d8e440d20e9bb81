//! CSV import and export. Floats are written with 17 significant digits so
//! that reading them back reproduces the same bits.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::ldp::{ConcentrationRow, GrowthProfile, SupErrorRow};
use crate::market::{MarketPath, PairMeasure};
use crate::portfolio::ValueSeries;
use crate::simplex::SimplexPoint;
use crate::universal::{TraceRow, WealthDistribution};

/// Round-trip float formatting.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn parse_float(field: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("line {line}: cannot parse {field:?} as a number")))
}

/// `t,mu_1,...,mu_n`.
pub fn write_path<W: Write>(path: &MarketPath, w: W) -> Result<()> {
    let mut out = writer(w);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(indexed("mu", path.dim()))
        .collect();
    out.write_record(&header)?;
    for (t, p) in path.points().iter().enumerate() {
        out.write_record(std::iter::once(t.to_string()).chain(p.iter().map(|&x| fmt_float(x))))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a path written by [`write_path`]. Rows must be numbered `0, 1, ...`.
pub fn read_path<R: Read>(r: R) -> Result<MarketPath> {
    let mut reader = csv::Reader::from_reader(r);
    let n = reader.headers()?.len().saturating_sub(1);
    if n < 2 {
        return Err(Error::TooFewCoordinates(n));
    }
    let mut points = Vec::new();
    for (expected_t, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let t: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("line {line}: bad time index {:?}", &record[0])))?;
        if t != expected_t {
            return Err(Error::InvalidParameter(format!(
                "line {line}: expected t = {expected_t}, got {t}"
            )));
        }
        let coords = record
            .iter()
            .skip(1)
            .map(|f| parse_float(f, line))
            .collect::<Result<Vec<_>>>()?;
        points.push(SimplexPoint::open(coords)?);
    }
    MarketPath::from_points(points)
}

/// `p_1..p_n,q_1..q_n,weight`.
pub fn write_pair_measure<W: Write>(measure: &PairMeasure, w: W) -> Result<()> {
    let mut out = writer(w);
    let n = measure.dim();
    let header: Vec<String> = indexed("p", n)
        .chain(indexed("q", n))
        .chain(["weight".to_string()])
        .collect();
    out.write_record(&header)?;
    for a in measure.atoms() {
        out.write_record(
            a.p.iter()
                .chain(a.q.iter())
                .chain(std::iter::once(&a.weight))
                .map(|&x| fmt_float(x)),
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pair_measure<R: Read>(r: R) -> Result<PairMeasure> {
    let mut reader = csv::Reader::from_reader(r);
    let width = reader.headers()?.len();
    if width < 5 || width % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "pair measure needs 2n + 1 columns, got {width}"
        )));
    }
    let n = (width - 1) / 2;
    let mut atoms = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let v = record
            .iter()
            .map(|f| parse_float(f, line))
            .collect::<Result<Vec<_>>>()?;
        atoms.push((
            SimplexPoint::open(v[..n].to_vec())?,
            SimplexPoint::open(v[n..2 * n].to_vec())?,
            v[2 * n],
        ));
    }
    PairMeasure::new(atoms)
}

/// `t,V,logV`.
pub fn write_value_series<W: Write>(series: &ValueSeries, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["t", "V", "logV"])?;
    for (t, &lv) in series.log_values().iter().enumerate() {
        out.write_record([t.to_string(), fmt_float(lv.exp()), fmt_float(lv)])?;
    }
    out.flush()?;
    Ok(())
}

/// `label,t,logV,growth_rate` for `log_values[member][k]` at `horizons[k]`.
pub fn write_family_report<W: Write>(
    labels: &[String],
    horizons: &[usize],
    log_values: &[Vec<f64>],
    w: W,
) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["label", "t", "logV", "growth_rate"])?;
    for (label, values) in labels.iter().zip(log_values) {
        for (&t, &lv) in horizons.iter().zip(values) {
            let rate = if t == 0 { 0.0 } else { lv / t as f64 };
            out.write_record([label.clone(), t.to_string(), fmt_float(lv), fmt_float(rate)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `t,V_hat,V_star,logV_hat,logV_star,log_ratio,pi_hat_1..pi_hat_n`, where
/// `log_ratio` is `(1/t) log(V_hat/V*)`. The portfolio columns are empty on
/// rows without a next trade.
pub fn write_trace<W: Write>(rows: &[TraceRow], n: usize, w: W) -> Result<()> {
    let mut out = writer(w);
    let header: Vec<String> = ["t", "V_hat", "V_star", "logV_hat", "logV_star", "log_ratio"]
        .into_iter()
        .map(String::from)
        .chain(indexed("pi_hat", n))
        .collect();
    out.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.t.to_string(),
            fmt_float(row.log_v_hat.exp()),
            fmt_float(row.log_v_star.exp()),
            fmt_float(row.log_v_hat),
            fmt_float(row.log_v_star),
            fmt_float(row.log_ratio_rate()),
        ];
        match &row.pi_hat {
            Some(p) => rec.extend(p.iter().map(|&x| fmt_float(x))),
            None => rec.extend(std::iter::repeat_n(String::new(), n)),
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `label,lambda0,nu_t,logV_t`.
pub fn write_posterior<W: Write>(wd: &WealthDistribution<'_>, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["label", "lambda0", "nu_t", "logV_t"])?;
    let prior = wd.prior();
    for (((label, lw), nu), lv) in prior
        .labels()
        .into_iter()
        .zip(prior.log_weights())
        .zip(wd.posterior())
        .zip(wd.log_values())
    {
        out.write_record([label, fmt_float(lw.exp()), fmt_float(nu), fmt_float(*lv)])?;
    }
    out.flush()?;
    Ok(())
}

/// `t,set_mass,empirical_rate,target_rate`.
pub fn write_concentration<W: Write>(rows: &[ConcentrationRow], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["t", "set_mass", "empirical_rate", "target_rate"])?;
    for r in rows {
        out.write_record([
            r.t.to_string(),
            fmt_float(r.set_mass()),
            fmt_float(r.empirical_rate),
            fmt_float(r.target_rate),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `t,sup_error`.
pub fn write_sup_error<W: Write>(rows: &[SupErrorRow], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["t", "sup_error"])?;
    for r in rows {
        out.write_record([r.t.to_string(), fmt_float(r.sup_error)])?;
    }
    out.flush()?;
    Ok(())
}

/// `label,W,I`.
pub fn write_profile<W: Write>(profile: &GrowthProfile, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["label", "W", "I"])?;
    for r in &profile.rows {
        out.write_record([r.label.clone(), fmt_float(r.growth), fmt_float(r.rate)])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{empirical_pair_measure, markov_grid_path, MarkovChain};

    fn sample_path() -> MarketPath {
        let chain = MarkovChain::from_coords(
            vec![vec![0.1, 0.2, 0.7], vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
            vec![vec![0.5, 0.5], vec![0.9, 0.1]],
        )
        .unwrap();
        markov_grid_path(&chain, 0, 1, 30).unwrap()
    }

    #[test]
    fn path_round_trip_is_bit_exact() {
        let path = sample_path();
        let mut buf = Vec::new();
        write_path(&path, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,mu_1,mu_2,mu_3\n"));
        let back = read_path(buf.as_slice()).unwrap();
        assert_eq!(back.len(), path.len());
        for (a, b) in back.points().iter().zip(path.points()) {
            assert!(a.same_bits(b));
        }
    }

    #[test]
    fn path_reader_rejects_bad_rows() {
        assert!(read_path("t,mu_1,mu_2\n0,0.5,0.5\n2,0.4,0.6\n".as_bytes()).is_err());
        assert!(read_path("t,mu_1,mu_2\n0,0.5,0.5\n1,0.4,0.7\n".as_bytes()).is_err());
        assert!(read_path("t,mu_1,mu_2\n0,0.5,0.5\n1,abc,0.6\n".as_bytes()).is_err());
        assert!(read_path("t,mu_1,mu_2\n0,0.5,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn pair_measure_round_trip() {
        let m = empirical_pair_measure(&sample_path(), 30).unwrap();
        let mut buf = Vec::new();
        write_pair_measure(&m, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("p_1,p_2,p_3,q_1,q_2,q_3,weight\n"));
        let back = read_pair_measure(buf.as_slice()).unwrap();
        assert_eq!(back.atoms().len(), m.atoms().len());
        for (a, b) in back.atoms().iter().zip(m.atoms()) {
            assert_eq!(a.weight.to_bits(), b.weight.to_bits());
            assert!(a.p.same_bits(&b.p) && a.q.same_bits(&b.q));
        }
    }

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(1.0).parse::<f64>().unwrap(), 1.0);
        let x = std::f64::consts::PI;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn value_series_csv() {
        let s = ValueSeries::from_log_values(vec![0.0, 2f64.ln()]);
        let mut buf = Vec::new();
        write_value_series(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,V,logV");
        assert!(lines[2].starts_with("1,2.0000000000000000e0,"));
    }
}
