use std::io::{self, Write};

use serde_json::{json, Value};
use stochmatch::simulate::SimReport;

#[derive(Clone, Debug)]
pub struct Row {
    pub instance: String,
    pub quantity: String,
    pub value: f64,
    pub sim: Option<SimReport>,
}

impl Row {
    pub fn exact(instance: &str, quantity: &str, value: f64) -> Self {
        Row {
            instance: instance.to_string(),
            quantity: quantity.to_string(),
            value,
            sim: None,
        }
    }

    pub fn estimate(instance: &str, quantity: &str, report: SimReport) -> Self {
        Row {
            instance: instance.to_string(),
            quantity: quantity.to_string(),
            value: report.mean,
            sim: Some(report),
        }
    }
}

/// An embedded expectation checked by `examples`.
#[derive(Clone, Debug)]
pub struct Check {
    pub instance: String,
    pub quantity: String,
    pub expected: String,
    pub observed: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("scientific notation");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv(out: &mut dyn Write, rows: &[Row]) -> io::Result<()> {
    out.write_all(b"instance,quantity,value,stderr,lo,hi,trials,seed\n")?;
    for r in rows {
        let (stderr, lo, hi, trials, seed) = match &r.sim {
            Some(s) => (
                sig12(s.stderr),
                sig12(s.ci95.0),
                sig12(s.ci95.1),
                s.trials.to_string(),
                s.seed.to_string(),
            ),
            None => Default::default(),
        };
        let line = [
            csv_field(&r.instance),
            csv_field(&r.quantity),
            sig12(r.value),
            stderr,
            lo,
            hi,
            trials,
            seed,
        ]
        .join(",");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn write_json(out: &mut dyn Write, rows: &[Row], checks: &[Check]) -> io::Result<()> {
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut v = json!({
                "instance": r.instance,
                "quantity": r.quantity,
                "value": num(r.value),
            });
            if let Some(s) = &r.sim {
                v["stderr"] = num(s.stderr);
                v["lo"] = num(s.ci95.0);
                v["hi"] = num(s.ci95.1);
                v["trials"] = json!(s.trials);
                v["seed"] = json!(s.seed);
            }
            v
        })
        .collect();
    let mut doc = json!({ "results": rows });
    if !checks.is_empty() {
        doc["checks"] = checks
            .iter()
            .map(|c| {
                json!({
                    "instance": c.instance,
                    "quantity": c.quantity,
                    "expected": c.expected,
                    "observed": num(c.observed),
                    "pass": c.pass,
                })
            })
            .collect();
    }
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    out.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.8), "0.8");
        assert_eq!(sig12(1.25), "1.25");
        assert_eq!(sig12(3.36 / 3.924), "0.85626911315");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(100000.0), "100000");
        assert_eq!(sig12(1e-9), "1e-9");
        assert_eq!(sig12(-2.5), "-2.5");
        assert_eq!(sig12(0.0), "0");
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[Row::exact("order_gap", "order_gap", 0.8)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "instance,quantity,value,stderr,lo,hi,trials,seed\norder_gap,order_gap,0.8,,,,,\n"
        );
    }
}
