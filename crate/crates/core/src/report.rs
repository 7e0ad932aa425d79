//! Result serialization: JSON helpers for non-finite floats and the CSV
//! tables emitted by the command-line tools.

use serde::Serialize;

use crate::mep::Eigenpair;
use crate::tracker::PathResult;

/// Serialize f64 with ±∞ and NaN written as strings, since JSON has no
/// literal for them.
pub mod ext_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}

pub mod ext_f64_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(serde::Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::ext_f64")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_some(&Wrap(*x)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Eigenpairs ordered by increasing ‖λ‖ (ties by start index).
pub fn sorted_by_norm(pairs: &[Eigenpair]) -> Vec<&Eigenpair> {
    let mut v: Vec<&Eigenpair> = pairs.iter().collect();
    v.sort_by(|a, b| {
        a.lambda_norm()
            .total_cmp(&b.lambda_norm())
            .then_with(|| a.start_index.cmp(&b.start_index))
    });
    v
}

fn write_rows<W: std::io::Write>(out: W, header: Vec<String>, rows: Vec<Vec<String>>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header).map_err(std::io::Error::other)?;
    for r in rows {
        w.write_record(&r).map_err(std::io::Error::other)?;
    }
    w.flush()
}

fn lambda_header(k: usize) -> Vec<String> {
    (1..=k).flat_map(|j| [format!("lambda{j}_re"), format!("lambda{j}_im")]).collect()
}

fn lambda_cells(p: &Eigenpair) -> Vec<String> {
    p.lambda.iter().flat_map(|z| [fmt(z.re), fmt(z.im)]).collect()
}

/// One row per eigenpair: λ, η, deviation, α, certificate, κ_fp, path data.
pub fn write_eigenpair_csv<W: std::io::Write>(out: W, k: usize, pairs: &[Eigenpair]) -> std::io::Result<()> {
    let mut header = lambda_header(k);
    header.extend(
        [
            "eta",
            "deviation",
            "alpha",
            "certified",
            "kappa_fp",
            "kappa_std_lower",
            "kappa_std_estimate",
            "kappa_std_upper",
            "multiplicity",
            "inconsistent",
            "path_status",
            "newton_iters",
        ]
        .map(String::from),
    );
    let rows = sorted_by_norm(pairs)
        .into_iter()
        .map(|p| {
            let d = &p.diagnostics;
            let mut r = lambda_cells(p);
            r.extend([
                fmt(d.backward_error),
                fmt(d.deviation),
                opt(d.alpha.map(|a| a.alpha)),
                d.alpha.map(|a| a.certified.to_string()).unwrap_or_default(),
                opt(d.kappa_fp),
                opt(d.kappa_std.map(|s| s.lower)),
                opt(d.kappa_std.map(|s| s.estimate)),
                opt(d.kappa_std.map(|s| s.upper)),
                p.multiplicity.to_string(),
                p.inconsistent.to_string(),
                "converged".into(),
                d.newton_iters.to_string(),
            ]);
            r
        })
        .collect();
    write_rows(out, header, rows)
}

/// Per-eigenpair α certificate table.
pub fn write_certify_csv<W: std::io::Write>(out: W, k: usize, pairs: &[Eigenpair]) -> std::io::Result<()> {
    let mut header = vec!["rank".to_string(), "lambda_norm".to_string()];
    header.extend(lambda_header(k));
    header.extend(["alpha", "beta", "gamma", "certified", "eta"].map(String::from));
    let rows = sorted_by_norm(pairs)
        .into_iter()
        .enumerate()
        .map(|(rank, p)| {
            let mut r = vec![(rank + 1).to_string(), fmt(p.lambda_norm())];
            r.extend(lambda_cells(p));
            let a = p.diagnostics.alpha;
            r.extend([
                opt(a.map(|a| a.alpha)),
                opt(a.map(|a| a.beta)),
                opt(a.map(|a| a.gamma)),
                a.map(|a| a.certified.to_string()).unwrap_or_default(),
                fmt(p.diagnostics.backward_error),
            ]);
            r
        })
        .collect();
    write_rows(out, header, rows)
}

/// Per-eigenpair condition numbers, plus the κ trace columns when present.
pub fn write_condition_csv<W: std::io::Write>(out: W, k: usize, pairs: &[Eigenpair]) -> std::io::Result<()> {
    let sorted = sorted_by_norm(pairs);
    let trace_ts: Vec<f64> = sorted
        .iter()
        .find_map(|p| p.diagnostics.kappa_trace.as_ref())
        .map(|t| t.iter().map(|s| s.t).collect())
        .unwrap_or_default();
    let mut header = vec!["rank".to_string(), "lambda_norm".to_string()];
    header.extend(lambda_header(k));
    header.extend(["kappa_fp", "kappa_std_lower", "kappa_std_estimate", "kappa_std_upper"].map(String::from));
    header.extend(trace_ts.iter().map(|t| format!("kappa_t{t:.2}")));
    let rows = sorted
        .into_iter()
        .enumerate()
        .map(|(rank, p)| {
            let d = &p.diagnostics;
            let mut r = vec![(rank + 1).to_string(), fmt(p.lambda_norm())];
            r.extend(lambda_cells(p));
            r.extend([
                opt(d.kappa_fp),
                opt(d.kappa_std.map(|s| s.lower)),
                opt(d.kappa_std.map(|s| s.estimate)),
                opt(d.kappa_std.map(|s| s.upper)),
            ]);
            match &d.kappa_trace {
                Some(tr) => r.extend(tr.iter().map(|s| fmt(s.kappa))),
                None => r.extend(trace_ts.iter().map(|_| String::new())),
            }
            r
        })
        .collect();
    write_rows(out, header, rows)
}

/// Trace of one path: t, h, Newton count, residual, then eigenvalue coordinates.
pub fn write_trace_csv<W: std::io::Write>(out: W, path: &PathResult) -> std::io::Result<()> {
    let rows = path.trace.as_deref().unwrap_or_default();
    let width = rows.first().map_or(0, |r| r.lambda.len());
    let mut header: Vec<String> = ["t", "h", "newton_iters", "residual"].map(String::from).to_vec();
    header.extend((0..width).flat_map(|j| [format!("z{j}_re"), format!("z{j}_im")]));
    let body = rows
        .iter()
        .map(|r| {
            let mut v = vec![fmt(r.t), fmt(r.h), r.newton_iters.to_string(), fmt(r.residual)];
            v.extend(r.lambda.iter().flat_map(|z| [fmt(z.re), fmt(z.im)]));
            v
        })
        .collect();
    write_rows(out, header, body)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("result types serialize")
}
