//! CSV and JSON writers. Every table starts with the schema tag
//! [`SCHEMA`]; numbers are written with a fixed number of significant
//! digits so that identical runs produce identical bytes. Rates appear in
//! rad/s and as `MHz/2π` companions.

use serde_json::{json, Value};

use crate::beam::ModeIndex;
use crate::coupling::CouplingResult;
use crate::spectroscopy::to_mhz;
use crate::sweeps::{DetuningSweep, SweepKind, SweepRecord};

pub const SCHEMA: &str = "cavicrys-schema=1";

/// `value` in scientific notation with `precision` significant digits;
/// `nan`/`inf`/`-inf` for non-finite values.
pub fn format_number(value: f64, precision: usize) -> String {
    if value.is_nan() {
        "nan".into()
    } else if value.is_infinite() {
        if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{:.*e}", precision.max(1) - 1, value)
    }
}

fn rounded(value: f64, precision: usize) -> Value {
    if value.is_finite() {
        json!(format_number(value, precision).parse::<f64>().expect("formatted float"))
    } else {
        Value::Null
    }
}

fn opt(value: Option<f64>, precision: usize) -> Value {
    value.map_or(Value::Null, |v| rounded(v, precision))
}

fn rate_fields(obj: &mut serde_json::Map<String, Value>, name: &str, rate: f64, precision: usize) {
    obj.insert(format!("{name}_rad_per_s"), rounded(rate, precision));
    obj.insert(format!("{name}_mhz_over_2pi"), rounded(to_mhz(rate), precision));
}

fn to_json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

pub fn coupling_csv(mode: ModeIndex, r: &CouplingResult, optical_depth: f64, precision: usize) -> String {
    let f = |v| format_number(v, precision);
    format!(
        "# {SCHEMA}\nmode,method,g_squared,g_rate_rad_per_s,g_rate_mhz_over_2pi,est_rel_error,evaluations,optical_depth\n\
         {mode},{},{},{},{},{},{},{}\n",
        r.method_used,
        f(r.g_squared),
        f(r.g_rate),
        f(to_mhz(r.g_rate)),
        f(r.est_rel_error),
        r.evaluations,
        f(optical_depth),
    )
}

pub fn coupling_json(mode: ModeIndex, r: &CouplingResult, optical_depth: f64, precision: usize) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("schema".into(), json!(SCHEMA));
    obj.insert("mode".into(), json!(mode.to_string()));
    obj.insert("method".into(), json!(r.method_used.name()));
    obj.insert("g_squared".into(), rounded(r.g_squared, precision));
    obj.insert("g_rate".into(), rounded(r.g_rate, precision));
    rate_fields(&mut obj, "g_rate", r.g_rate, precision);
    obj.insert("est_rel_error".into(), rounded(r.est_rel_error, precision));
    obj.insert("evaluations".into(), json!(r.evaluations));
    obj.insert("optical_depth".into(), rounded(optical_depth, precision));
    to_json_text(&Value::Object(obj))
}

pub fn sweep_csv(records: &[SweepRecord], precision: usize) -> String {
    let f = |v| format_number(v, precision);
    let mut out = format!("# {SCHEMA}\nsweep_value,mode,raw_G_squared,normalized_value,est_rel_error\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            f(r.sweep_value),
            r.mode,
            f(r.raw_g_squared),
            r.normalized_value.map(f).unwrap_or_default(),
            f(r.est_rel_error),
        ));
    }
    for r in records.iter().filter(|r| r.error.is_some()) {
        out.push_str(&format!(
            "# error,{},{},{}\n",
            f(r.sweep_value),
            r.mode,
            csv_field(r.error.as_deref().unwrap_or_default())
        ));
    }
    out
}

pub fn sweep_json(kind: SweepKind, records: &[SweepRecord], precision: usize) -> String {
    let rows: Vec<Value> = records
        .iter()
        .map(|r| {
            json!({
                "sweep_value": rounded(r.sweep_value, precision),
                "mode": r.mode.to_string(),
                "raw_G_squared": rounded(r.raw_g_squared, precision),
                "normalized_value": opt(r.normalized_value, precision),
                "est_rel_error": rounded(r.est_rel_error, precision),
                "error": r.error,
            })
        })
        .collect();
    to_json_text(&json!({ "schema": SCHEMA, "kind": kind.to_string(), "records": rows }))
}

pub fn detuning_csv(sweep: &DetuningSweep, precision: usize) -> String {
    let f = |v| format_number(v, precision);
    let mut out = format!(
        "# {SCHEMA}\nmode,detuning_rad_per_s,detuning_mhz_over_2pi,broadening_rad_per_s,\
         broadening_mhz_over_2pi,sigma_rad_per_s,sigma_mhz_over_2pi\n"
    );
    for r in &sweep.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.mode,
            f(r.detuning),
            f(to_mhz(r.detuning)),
            f(r.broadening),
            f(to_mhz(r.broadening)),
            f(r.sigma),
            f(to_mhz(r.sigma)),
        ));
    }
    out.push_str(
        "# fit,mode,computed_g_rate_mhz_over_2pi,g_rate_mhz_over_2pi,g_sigma_mhz_over_2pi,\
         gamma_mhz_over_2pi,gamma_sigma_mhz_over_2pi,error\n",
    );
    for m in &sweep.fits {
        let computed = f(to_mhz(m.coupling.g_rate));
        match &m.fit {
            Some(fit) => out.push_str(&format!(
                "# fit,{},{},{},{},{},{},{}\n",
                m.mode,
                computed,
                f(to_mhz(fit.g_rate)),
                f(to_mhz(fit.g_sigma)),
                f(to_mhz(fit.gamma_fit)),
                f(to_mhz(fit.gamma_sigma)),
                csv_field(&fit.warnings.join("; ")),
            )),
            None => out.push_str(&format!(
                "# fit,{},{},,,,,{}\n",
                m.mode,
                computed,
                csv_field(m.error.as_deref().unwrap_or("fit failed"))
            )),
        }
    }
    out
}

pub fn detuning_json(sweep: &DetuningSweep, precision: usize) -> String {
    let records: Vec<Value> = sweep
        .records
        .iter()
        .map(|r| {
            let mut obj = serde_json::Map::new();
            obj.insert("mode".into(), json!(r.mode.to_string()));
            rate_fields(&mut obj, "detuning", r.detuning, precision);
            rate_fields(&mut obj, "broadening", r.broadening, precision);
            rate_fields(&mut obj, "sigma", r.sigma, precision);
            Value::Object(obj)
        })
        .collect();
    let fits: Vec<Value> = sweep
        .fits
        .iter()
        .map(|m| {
            let mut obj = serde_json::Map::new();
            obj.insert("mode".into(), json!(m.mode.to_string()));
            rate_fields(&mut obj, "computed_g_rate", m.coupling.g_rate, precision);
            if let Some(fit) = &m.fit {
                rate_fields(&mut obj, "g_rate", fit.g_rate, precision);
                rate_fields(&mut obj, "g_sigma", fit.g_sigma, precision);
                rate_fields(&mut obj, "gamma", fit.gamma_fit, precision);
                rate_fields(&mut obj, "gamma_sigma", fit.gamma_sigma, precision);
                obj.insert("warnings".into(), json!(fit.warnings));
            }
            obj.insert("error".into(), json!(m.error));
            Value::Object(obj)
        })
        .collect();
    to_json_text(&json!({
        "schema": SCHEMA,
        "kind": SweepKind::Detuning.to_string(),
        "records": records,
        "fits": fits,
    }))
}
