//! Run artifacts: `records.csv`, `events.jsonl`, `summary.json`.

use std::io::Write;
use std::path::Path;

use crate::sim::{SimEvent, SimOutput, SimRecord, Summary};
use crate::Scalar;

pub const RECORDS_HEADER: &str =
    "t,vehicle_id,x,v,a,u,spacing_true,spacing_measured,tau_hat,tau_var,lcl,ucl,violation,active_tau_star";

/// `printf("%.{sig}g")`-style formatting: `sig` significant digits, trailing
/// zeros dropped, exponent form outside `1e-5 <= |x| < 10^sig`.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= sig as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn f<S: Scalar>(x: S) -> String {
    fmt_sig(x.as_f64(), 9)
}

pub fn write_records<S: Scalar, W: Write>(
    records: &[SimRecord<S>],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f(r.t),
            r.vehicle_id,
            f(r.x),
            f(r.v),
            f(r.a),
            f(r.u),
            f(r.spacing_true),
            f(r.spacing_measured),
            f(r.tau_hat),
            f(r.tau_var),
            f(r.lcl),
            f(r.ucl),
            u8::from(r.violation),
            f(r.active_tau_star),
        )?;
    }
    Ok(())
}

pub fn write_events<S: Scalar, W: Write>(
    events: &[SimEvent<S>],
    mut out: W,
) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(summary: &Summary, out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(out, summary)?;
    Ok(())
}

/// Writes the three run artifacts into `dir`, creating it if needed.
pub fn write_run<S: Scalar>(output: &SimOutput<S>, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let buffered = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
    let mut w = buffered("records.csv")?;
    write_records(&output.records, &mut w)?;
    w.flush()?;
    let mut w = buffered("events.jsonl")?;
    write_events(&output.events, &mut w)?;
    w.flush()?;
    let mut w = buffered("summary.json")?;
    write_summary(&output.summary, &mut w)?;
    writeln!(w)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig(1.6, 9), "1.6");
        assert_eq!(fmt_sig(37.0, 9), "37");
        assert_eq!(fmt_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(fmt_sig(123456.789012, 9), "123456.789");
        assert_eq!(fmt_sig(-2.0 / 0.45, 9), "-4.44444444");
        assert_eq!(fmt_sig(1.25e-7, 9), "1.25e-7");
        assert_eq!(fmt_sig(1.0e12, 9), "1e12");
        assert_eq!(fmt_sig(999999999.6, 9), "1e9");
        assert_eq!(fmt_sig(0.0001, 9), "0.0001");
        assert_eq!(fmt_sig(0.0, 9), "0");
    }

    #[test]
    fn formatted_values_round_trip_to_nine_digits() {
        for &x in &[std::f64::consts::PI, 8.94, -1234.56789123, 2.5e-6] {
            let back: f64 = fmt_sig(x, 9).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-9);
        }
    }
}
