use std::fmt::Write as _;

use nucspin_core::experiments::{ Series, TransportPoint };

/// `%.12g`-style decimal: 12 significant digits, trailing zeros dropped,
/// scientific notation outside [1e-5, 1e12).
pub fn g12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let fixed = format!("{:.*}", (11 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { s }
}

pub const RUN_HEADER: &str = "series,x,shots,survivors,clicks,value,error";
pub const TRANSPORT_HEADER: &str = "t,delta,velocity,position";

pub fn series_csv(series: &[Series]) -> String {
    let mut out = String::new();
    out.push_str(RUN_HEADER);
    out.push('\n');
    for s in series {
        for p in &s.points {
            let err = p.error.map(g12).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{},{}", s.name, g12(p.x), p.shots, p.survivors, p.clicks, g12(p.value), err);
        }
    }
    out
}

pub fn transport_csv(points: &[TransportPoint]) -> String {
    let mut out = String::new();
    out.push_str(TRANSPORT_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", g12(p.t), g12(p.delta), g12(p.velocity), g12(p.position));
    }
    out
}
