//! Value lists for sweeps and scans: `1,2,5`, `geom:START:STOP:COUNT` or
//! `lin:START:STOP:COUNT`. Both grids include their endpoints.

use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueList(pub Vec<f64>);

impl FromStr for ValueList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let values = match s.split_once(':') {
            Some(("geom", rest)) => {
                let (start, stop, count) = grid_args(rest)?;
                if !(start > 0.0 && stop > 0.0) {
                    return Err(format!("geometric grid needs positive endpoints, got {s:?}"));
                }
                let step = (stop / start).ln();
                grid(count, stop, |t| start * (step * t).exp())
            }
            Some(("lin", rest)) => {
                let (start, stop, count) = grid_args(rest)?;
                grid(count, stop, |t| start + (stop - start) * t)
            }
            Some((kind, _)) => return Err(format!("unknown grid kind {kind:?}; use geom or lin")),
            None => s
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad value {v:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?,
        };
        if values.is_empty() {
            return Err("empty value list".into());
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(format!("non-finite value {v}"));
        }
        Ok(ValueList(values))
    }
}

fn grid_args(rest: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = rest.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(format!("expected START:STOP:COUNT, got {rest:?}"));
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("bad value {v:?}: {e}"));
    let count: usize = count.parse().map_err(|e| format!("bad count {count:?}: {e}"))?;
    if count == 0 {
        return Err("grid count must be at least 1".into());
    }
    Ok((num(start)?, num(stop)?, count))
}

/// `count` points at `t = k / (count - 1)`; the last one is exactly `stop`.
fn grid(count: usize, stop: f64, at: impl Fn(f64) -> f64) -> Vec<f64> {
    if count == 1 {
        return vec![at(0.0)];
    }
    let mut out: Vec<f64> = (0..count).map(|k| at(k as f64 / (count - 1) as f64)).collect();
    out[count - 1] = stop;
    out
}

/// Node counts such as `2,3,4` or `lin:2:6:5`.
pub fn as_counts(list: &ValueList, what: &str) -> Result<Vec<usize>, String> {
    list.0
        .iter()
        .map(|&v| {
            let n = v.round();
            if (v - n).abs() > 1e-9 || n < 0.0 {
                Err(format!("{what} must be whole numbers, got {v}"))
            } else {
                Ok(n as usize)
            }
        })
        .collect()
}
