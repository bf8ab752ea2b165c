//! JSON file formats for boxes, hashes, ensembles, and joint distributions.
//!
//! Entries are accepted either as JSON numbers (float mode) or as strings
//! "p/q" / "p" (exact rationals). A file with any float entry yields a float
//! table; exact workflows must write rationals throughout.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::adversary::AttackEnsemble;
use crate::boxes::{self, BoxShape, BoxTable};
use crate::error::{Error, Result};
use crate::hashing::HashFunction;
use crate::scalar::Scalar;
use crate::security::JointDistribution;

/// "p/q", "p", or a JSON number.
pub fn scalar_from_value(v: &Value) -> Result<Scalar> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .map(Scalar::float)
            .ok_or_else(|| Error::parse(format!("number out of range: {n}"))),
        Value::String(s) => scalar_from_str(s),
        other => Err(Error::parse(format!("expected number or rational string, got {other}"))),
    }
}

pub fn scalar_from_str(s: &str) -> Result<Scalar> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s, "1"),
    };
    let p: i64 = num
        .parse()
        .map_err(|_| Error::parse(format!("bad rational numerator in {s:?}")))?;
    let q: i64 = den
        .parse()
        .map_err(|_| Error::parse(format!("bad rational denominator in {s:?}")))?;
    if q == 0 {
        return Err(Error::parse(format!("zero denominator in {s:?}")));
    }
    Ok(Scalar::ratio(p, q))
}

fn parse_entries(raw: &[Value]) -> Result<Vec<Scalar>> {
    raw.iter().map(scalar_from_value).collect()
}

#[derive(Deserialize)]
struct BoxDto {
    shape: Option<BoxShape>,
    entries: Option<Vec<Value>>,
    product: Option<Vec<Value>>,
}

pub fn box_from_value(v: &Value) -> Result<BoxTable> {
    let dto: BoxDto = serde_json::from_value(v.clone())?;
    match (dto.product, dto.shape, dto.entries) {
        (Some(parts), None, None) => {
            if parts.is_empty() {
                return Err(Error::parse("product form needs at least one factor"));
            }
            let factors = parts.iter().map(box_from_value).collect::<Result<Vec<_>>>()?;
            boxes::tensor(&factors)
        }
        (None, Some(shape), Some(entries)) => BoxTable::new(shape, parse_entries(&entries)?),
        _ => Err(Error::parse(
            "box file needs either {\"shape\", \"entries\"} or {\"product\": [...]}",
        )),
    }
}

pub fn read_box(path: impl AsRef<Path>) -> Result<BoxTable> {
    box_from_value(&read_value(path)?)
}

#[derive(Deserialize)]
struct HashDto {
    nr: usize,
    ns: usize,
    nc: usize,
    table: Vec<u32>,
}

pub fn hash_from_value(v: &Value) -> Result<HashFunction> {
    let dto: HashDto = serde_json::from_value(v.clone())?;
    HashFunction::from_table(dto.nr, dto.ns, dto.nc, dto.table)
}

pub fn read_hash(path: impl AsRef<Path>) -> Result<HashFunction> {
    hash_from_value(&read_value(path)?)
}

#[derive(Deserialize)]
struct ComponentDto {
    weight: Value,
    #[serde(rename = "box")]
    box_value: Value,
}

#[derive(Deserialize)]
struct EnsembleDto {
    ensemble: Vec<ComponentDto>,
}

pub fn ensemble_from_value(v: &Value) -> Result<AttackEnsemble> {
    let dto: EnsembleDto = serde_json::from_value(v.clone())?;
    let components = dto
        .ensemble
        .iter()
        .map(|c| Ok((scalar_from_value(&c.weight)?, box_from_value(&c.box_value)?)))
        .collect::<Result<Vec<_>>>()?;
    AttackEnsemble::new(components)
}

pub fn read_ensemble(path: impl AsRef<Path>) -> Result<AttackEnsemble> {
    ensemble_from_value(&read_value(path)?)
}

#[derive(Deserialize)]
struct JointDto {
    shape: BoxShape,
    eve_outcomes: usize,
    eve_settings: usize,
    entries: Vec<Value>,
}

pub fn joint_from_value(v: &Value) -> Result<JointDistribution> {
    let dto: JointDto = serde_json::from_value(v.clone())?;
    JointDistribution::new(dto.shape, dto.eve_outcomes, dto.eve_settings, parse_entries(&dto.entries)?)
}

pub fn read_joint(path: impl AsRef<Path>) -> Result<JointDistribution> {
    joint_from_value(&read_value(path)?)
}

/// What a file contains, keyed on its distinguishing fields.
pub enum Document {
    Box(BoxTable),
    Joint(JointDistribution),
    Ensemble(AttackEnsemble),
}

pub fn document_from_value(v: &Value) -> Result<Document> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse("expected a JSON object at top level"))?;
    if obj.contains_key("ensemble") {
        Ok(Document::Ensemble(ensemble_from_value(v)?))
    } else if obj.contains_key("eve_outcomes") {
        Ok(Document::Joint(joint_from_value(v)?))
    } else {
        Ok(Document::Box(box_from_value(v)?))
    }
}

pub fn read_document(path: impl AsRef<Path>) -> Result<Document> {
    document_from_value(&read_value(path)?)
}

pub fn read_value(path: impl AsRef<Path>) -> Result<Value> {
    let text = std::fs::read_to_string(path.as_ref())?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn scalar_tokens() {
        assert_eq!(scalar_from_value(&json!("1/2")).unwrap(), Scalar::ratio(1, 2));
        assert_eq!(scalar_from_value(&json!("-3/8")).unwrap(), Scalar::ratio(-3, 8));
        assert_eq!(scalar_from_value(&json!("0")).unwrap(), Scalar::zero());
        let f = scalar_from_value(&json!(0.25)).unwrap();
        assert!(!f.is_exact() && f.to_f64() == 0.25);
        assert!(scalar_from_value(&json!("1/0")).is_err());
        assert!(scalar_from_value(&json!("x/2")).is_err());
        assert!(scalar_from_value(&json!([1])).is_err());
    }

    fn pr_value() -> Value {
        let pr = boxes::pr_box();
        let entries: Vec<Value> = pr
            .entries()
            .iter()
            .map(|e| {
                if e.is_zero() {
                    json!("0")
                } else {
                    json!("1/2")
                }
            })
            .collect();
        json!({"shape": pr.shape(), "entries": entries})
    }

    #[test]
    fn box_roundtrip_exact() {
        let parsed = box_from_value(&pr_value()).unwrap();
        assert_eq!(parsed.entries(), boxes::pr_box().entries());
        assert_eq!(parsed.mode(), crate::scalar::Mode::Exact);
    }

    #[test]
    fn product_form_tensors() {
        let v = json!({"product": [pr_value(), pr_value()]});
        let parsed = box_from_value(&v).unwrap();
        let direct = boxes::tensor(&[boxes::pr_box(), boxes::pr_box()]).unwrap();
        assert_eq!(parsed.entries(), direct.entries());
        assert!(box_from_value(&json!({"product": []})).is_err());
        assert!(box_from_value(&json!({"shape": boxes::pr_box().shape()})).is_err());
    }

    #[test]
    fn hash_file() {
        let v = json!({"nr": 2, "ns": 1, "nc": 1, "table": [0, 3, 1, 2]});
        let h = hash_from_value(&v).unwrap();
        assert_eq!((h.n_r(), h.n_s(), h.n_c()), (2, 1, 1));
        assert_eq!(h.table(), &[0, 3, 1, 2]);
        let bad = json!({"nr": 2, "ns": 1, "nc": 0, "table": [0, 1, 2, 0]});
        assert!(hash_from_value(&bad).is_err());
    }

    #[test]
    fn ensemble_file() {
        let v = json!({"ensemble": [
            {"weight": "1/2", "box": pr_value()},
            {"weight": "1/2", "box": pr_value()},
        ]});
        let ens = ensemble_from_value(&v).unwrap();
        assert_eq!(ens.components().len(), 2);
    }

    #[test]
    fn document_detection() {
        match document_from_value(&pr_value()).unwrap() {
            Document::Box(_) => {}
            _ => panic!("expected box"),
        }
        let ens = json!({"ensemble": [{"weight": "1", "box": pr_value()}]});
        match document_from_value(&ens).unwrap() {
            Document::Ensemble(_) => {}
            _ => panic!("expected ensemble"),
        }
        let joint = {
            let pr = boxes::pr_box();
            let entries: Vec<Value> =
                pr.entries().iter().map(|e| json!(e.to_f64())).collect();
            json!({
                "shape": pr.shape(),
                "eve_outcomes": 1,
                "eve_settings": 1,
                "entries": entries,
            })
        };
        match document_from_value(&joint).unwrap() {
            Document::Joint(j) => assert!(j.is_nonsignaling(1e-12)),
            _ => panic!("expected joint"),
        }
    }

    #[test]
    fn file_roundtrip() {
        let dir = std::env::temp_dir().join(format!("bellkey-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pr.json");
        std::fs::write(&path, serde_json::to_string(&pr_value()).unwrap()).unwrap();
        let parsed = read_box(&path).unwrap();
        assert_eq!(parsed.entries(), boxes::pr_box().entries());
        assert!(read_box(dir.join("missing.json")).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
