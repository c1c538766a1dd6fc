use serde::{Deserialize, Serialize};

use super::svdd::SvddModel;
use super::vbattery::VirtualBattery;
use crate::error::Result;

/// Tradable flexibility model: `{"type": ..., "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum Surrogate {
    Svdd(SvddModel),
    VirtualBattery(VirtualBattery),
}

impl Surrogate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn numeric_arrays<'a>(v: &'a serde_json::Value, out: &mut Vec<Vec<f64>>) {
    match v {
        serde_json::Value::Array(items) => {
            let nums: Vec<f64> = items.iter().filter_map(|i| i.as_f64()).collect();
            if !nums.is_empty() && nums.len() == items.len() {
                out.push(nums);
            }
            items.iter().for_each(|i| numeric_arrays(i, out));
        }
        serde_json::Value::Object(map) => map.values().for_each(|i| numeric_arrays(i, out)),
        _ => {}
    }
}

/// True when `bytes` carry the baseline vector: either its serialized form
/// verbatim, or any JSON number array holding it as a contiguous window.
pub fn contains_series(bytes: &[u8], series: &[f64]) -> bool {
    if series.is_empty() {
        return false;
    }
    let compact = serde_json::to_vec(series).unwrap_or_default();
    if bytes.windows(compact.len()).any(|w| w == compact.as_slice()) {
        return true;
    }
    let Ok(value) = serde_json::from_slice::<serde_json::Value>(bytes) else {
        return false;
    };
    let mut arrays = Vec::new();
    numeric_arrays(&value, &mut arrays);
    arrays.iter().any(|a| {
        a.windows(series.len())
            .any(|w| w.iter().zip(series).all(|(x, y)| (x - y).abs() <= 1e-9 * y.abs().max(1.0)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flex::svdd::{svdd_fit_points, SigmoidKernel, SvddParams};
    use crate::flex::vbattery::vbattery_fit_rows;

    #[test]
    fn round_trip_and_tag() {
        let vb = vbattery_fit_rows(&[vec![1.0, -1.0], vec![2.0, 0.0]], 0.0, 1.0).unwrap();
        let s = Surrogate::VirtualBattery(vb);
        let json = s.to_json().unwrap();
        assert!(json.contains("\"type\": \"virtual_battery\""));
        assert_eq!(Surrogate::from_json(&json).unwrap(), s);
        let svdd = svdd_fit_points(&[vec![0.0, 1.0], vec![1.0, 0.0]], &SvddParams::new(0.5, SigmoidKernel::for_dimension(2)))
            .unwrap();
        let s = Surrogate::Svdd(svdd);
        assert_eq!(Surrogate::from_json(&s.to_json().unwrap()).unwrap(), s);
    }

    #[test]
    fn scan_finds_embedded_series() {
        let baseline = vec![0.731, 1.204, 0.915];
        let leaky = serde_json::json!({"params": {"x": [9.0, 0.731, 1.204, 0.915, 2.0]}});
        assert!(contains_series(leaky.to_string().as_bytes(), &baseline));
        let clean = serde_json::json!({"params": {"x": [0.731, 9.0, 1.204]}});
        assert!(!contains_series(clean.to_string().as_bytes(), &baseline));
    }
}
