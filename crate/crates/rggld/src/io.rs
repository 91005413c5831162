//! JSON and CSV representations of measures, kernels, and rate values.
//!
//! Measures serialize as `{"entries": [[key, mass], ...], "total": t}` with
//! keys in sorted order, so identical inputs produce byte-identical output.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::Kernel;
use crate::measures::{Colour, CountableMeasure, LocalityVector, NeighbourhoodMeasure};
use crate::rates::RateValue;

/// Key types that can cross the JSON/CSV boundary.
pub trait MeasureKey: Ord + Clone {
    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Option<Self>;
    /// Column names for the key part of a CSV row.
    fn csv_header() -> &'static str;
    fn csv_fields(&self) -> String;
}

impl MeasureKey for u32 {
    fn to_json(&self) -> Value {
        json!(self)
    }
    fn from_json(v: &Value) -> Option<Self> {
        v.as_u64().and_then(|x| u32::try_from(x).ok())
    }
    fn csv_header() -> &'static str {
        "index"
    }
    fn csv_fields(&self) -> String {
        self.to_string()
    }
}

impl MeasureKey for (Colour, Colour) {
    fn to_json(&self) -> Value {
        json!([self.0, self.1])
    }
    fn from_json(v: &Value) -> Option<Self> {
        let arr = v.as_array()?;
        if arr.len() != 2 {
            return None;
        }
        Some((u32::from_json(&arr[0])?, u32::from_json(&arr[1])?))
    }
    fn csv_header() -> &'static str {
        "a,b"
    }
    fn csv_fields(&self) -> String {
        format!("{},{}", self.0, self.1)
    }
}

impl MeasureKey for (Colour, LocalityVector) {
    fn to_json(&self) -> Value {
        let locality: Vec<Value> = self.1.iter().map(|(b, k)| json!([b, k])).collect();
        json!([self.0, locality])
    }
    fn from_json(v: &Value) -> Option<Self> {
        let arr = v.as_array()?;
        if arr.len() != 2 {
            return None;
        }
        let colour = u32::from_json(&arr[0])?;
        let mut counts = Vec::new();
        for pair in arr[1].as_array()? {
            let pair = pair.as_array()?;
            if pair.len() != 2 {
                return None;
            }
            counts.push((u32::from_json(&pair[0])?, u32::from_json(&pair[1])?));
        }
        Some((colour, LocalityVector::from_counts(counts)))
    }
    fn csv_header() -> &'static str {
        "colour,locality"
    }
    fn csv_fields(&self) -> String {
        let locality: Vec<String> = self.1.iter().map(|(b, k)| format!("{b}:{k}")).collect();
        format!("{},{}", self.0, locality.join(";"))
    }
}

pub fn measure_to_json<K: MeasureKey>(m: &CountableMeasure<K>) -> Value {
    let entries: Vec<Value> = m.iter().map(|(k, mass)| json!([k.to_json(), mass])).collect();
    json!({ "entries": entries, "total": m.total() })
}

pub fn measure_from_json<K: MeasureKey>(v: &Value) -> Result<CountableMeasure<K>> {
    let entries = v
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("measure: missing `entries` array".into()))?;
    let mut parsed = Vec::with_capacity(entries.len());
    for entry in entries {
        let pair = entry
            .as_array()
            .filter(|p| p.len() == 2)
            .ok_or_else(|| Error::Parse(format!("measure entry {entry} not a [key, mass] pair")))?;
        let key = K::from_json(&pair[0])
            .ok_or_else(|| Error::Parse(format!("measure key {} malformed", pair[0])))?;
        let mass = pair[1]
            .as_f64()
            .ok_or_else(|| Error::Parse(format!("measure mass {} not a number", pair[1])))?;
        parsed.push((key, mass));
    }
    CountableMeasure::from_entries(parsed)
}

pub fn measure_to_csv<K: MeasureKey>(m: &CountableMeasure<K>) -> String {
    let mut out = format!("{},mass\n", K::csv_header());
    for (k, mass) in m.iter() {
        out.push_str(&format!("{},{}\n", k.csv_fields(), mass));
    }
    out
}

/// Finite values serialize as numbers, the infinite rate as the string
/// `"inf"` (JSON has no infinity literal).
pub fn rate_value_to_json(v: &RateValue) -> Value {
    match v {
        RateValue::Finite(x) => json!(x),
        RateValue::Infinite => json!("inf"),
    }
}

/// Accepts either a bare matrix `[[...], ...]` or
/// `{"matrix": [[...], ...], "names": [...]}`.
pub fn kernel_from_json(v: &Value) -> Result<(Kernel, Option<Vec<String>>)> {
    let (matrix, names) = if let Some(obj) = v.as_object() {
        let matrix = obj
            .get("matrix")
            .ok_or_else(|| Error::Parse("kernel: missing `matrix`".into()))?;
        let names: Option<Vec<String>> =
            obj.get("names").and_then(Value::as_array).map(|arr| {
                arr.iter()
                    .map(|n| n.as_str().unwrap_or_default().to_string())
                    .collect()
            });
        (matrix, names)
    } else {
        (v, None)
    };
    let rows = matrix
        .as_array()
        .ok_or_else(|| Error::Parse("kernel: matrix must be an array of rows".into()))?;
    let mut parsed = Vec::with_capacity(rows.len());
    for row in rows {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Parse("kernel: row must be an array".into()))?;
        let mut entries = Vec::with_capacity(row.len());
        for x in row {
            entries.push(
                x.as_f64()
                    .ok_or_else(|| Error::Parse(format!("kernel entry {x} not a number")))?,
            );
        }
        parsed.push(entries);
    }
    if let Some(names) = &names {
        if names.len() != parsed.len() {
            return Err(Error::Parse(format!(
                "kernel: {} names for {} colours",
                names.len(),
                parsed.len()
            )));
        }
    }
    Ok((Kernel::new(parsed)?, names))
}

pub fn kernel_to_json(kernel: &Kernel) -> Value {
    json!({ "matrix": kernel.rows() })
}

/// Parses a comma-separated probability vector such as `0.5,0.5`.
pub fn parse_probability_vector(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        out.push(
            part.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{part}` is not a number")))?,
        );
    }
    Ok(out)
}

/// Parses a comma-separated list of counts such as `50,100`.
pub fn parse_count_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        out.push(
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("`{part}` is not a count")))?,
        );
    }
    Ok(out)
}

/// Lossless round trip helper used by the neighbourhood-measure CLI inputs.
pub fn neighbourhood_from_json(v: &Value) -> Result<NeighbourhoodMeasure> {
    measure_from_json(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_json_round_trip() {
        let m = CountableMeasure::from_entries([(0u32, 0.25), (3, 0.75)]).unwrap();
        let v = measure_to_json(&m);
        let back: CountableMeasure<u32> = measure_from_json(&v).unwrap();
        assert_eq!(m, back);
        assert_eq!(v["total"], json!(1.0));
    }

    #[test]
    fn pair_measure_json_round_trip() {
        let m =
            CountableMeasure::from_entries([((0u32, 1u32), 0.5), ((1, 0), 0.5)]).unwrap();
        let back: CountableMeasure<(u32, u32)> =
            measure_from_json(&measure_to_json(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn neighbourhood_json_round_trip() {
        let m = CountableMeasure::from_entries([
            ((0u32, LocalityVector::empty()), 0.5),
            ((1, LocalityVector::from_counts([(0, 2), (1, 1)])), 0.5),
        ])
        .unwrap();
        let back = neighbourhood_from_json(&measure_to_json(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn csv_layout() {
        let m = CountableMeasure::from_entries([(1u32, 0.5), (0, 0.5)]).unwrap();
        let csv = measure_to_csv(&m);
        assert_eq!(csv, "index,mass\n0,0.5\n1,0.5\n");
    }

    #[test]
    fn kernel_json_forms() {
        let bare = json!([[1.0, 0.5], [0.5, 2.0]]);
        let (k, names) = kernel_from_json(&bare).unwrap();
        assert_eq!(k.at(0, 1), 0.5);
        assert!(names.is_none());

        let named = json!({"matrix": [[1.0]], "names": ["solo"]});
        let (_, names) = kernel_from_json(&named).unwrap();
        assert_eq!(names.unwrap(), vec!["solo".to_string()]);

        let bad = json!({"matrix": [[1.0, 0.2], [0.3, 1.0]]});
        assert!(kernel_from_json(&bad).is_err());
    }

    #[test]
    fn rate_value_json() {
        assert_eq!(rate_value_to_json(&RateValue::Finite(0.25)), json!(0.25));
        assert_eq!(rate_value_to_json(&RateValue::Infinite), json!("inf"));
    }

    #[test]
    fn vector_parsers() {
        assert_eq!(parse_probability_vector("0.5, 0.5").unwrap(), vec![0.5, 0.5]);
        assert!(parse_probability_vector("0.5,x").is_err());
        assert_eq!(parse_count_list("50,100").unwrap(), vec![50, 100]);
        assert!(parse_count_list("5.5").is_err());
    }
}
