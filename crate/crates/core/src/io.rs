//! Canonical JSON instance format.
//!
//! ```json
//! {"n": 3, "revenues": ["20", "19", "18"],
//!  "trees": [{"nodes": [{"split": {"product": 1, "left": 1, "right": 2}},
//!                       {"leaf": {"option": 1}}, {"leaf": {"option": 0}}],
//!             "root": 0}],
//!  "lambda": ["1"]}
//! ```
//!
//! Revenues and weights are written as decimal strings (fractions such as
//! `"1/3"` when no finite decimal exists) and read from either strings or JSON
//! numbers.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{DecisionForest, Instance, Node, NodeId, ProductCatalog, PurchaseTree};
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    nodes: Vec<Node>,
    root: NodeId,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    n: usize,
    revenues: Vec<Value>,
    trees: Vec<TreeDoc>,
    lambda: Vec<Value>,
}

fn read_scalar<T: Scalar>(v: &Value, what: &str) -> Result<T> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => return Err(Error::Parse(format!("{what}: expected number or string, got {other}"))),
    };
    T::parse_decimal(&text).ok_or_else(|| Error::Parse(format!("{what}: cannot read {text:?}")))
}

pub fn instance_from_json<T: Scalar>(text: &str) -> Result<Instance<T>> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.revenues.len() != doc.n {
        return Err(Error::InvalidInstance(format!("n = {} but {} revenues", doc.n, doc.revenues.len())));
    }
    let revenues = doc
        .revenues
        .iter()
        .enumerate()
        .map(|(i, v)| read_scalar(v, &format!("revenues[{i}]")))
        .collect::<Result<Vec<T>>>()?;
    let lambda = doc
        .lambda
        .iter()
        .enumerate()
        .map(|(i, v)| read_scalar(v, &format!("lambda[{i}]")))
        .collect::<Result<Vec<T>>>()?;
    let trees = doc
        .trees
        .into_iter()
        .enumerate()
        .map(|(t, d)| {
            PurchaseTree::new(d.nodes, d.root).map_err(|e| Error::InvalidInstance(format!("tree {t}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(ProductCatalog::new(revenues)?, DecisionForest::new(trees, lambda)?)
}

pub fn instance_to_json<T: Scalar>(instance: &Instance<T>) -> String {
    let doc = InstanceDoc {
        n: instance.n(),
        revenues: instance.catalog.revenues().iter().map(|r| Value::String(r.to_decimal())).collect(),
        trees: instance
            .forest
            .trees()
            .iter()
            .map(|t| TreeDoc { nodes: t.nodes().to_vec(), root: t.root() })
            .collect(),
        lambda: instance.forest.lambda().iter().map(|w| Value::String(w.to_decimal())).collect(),
    };
    serde_json::to_string(&doc).expect("instance serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    const DOC: &str = r#"{"n":2,"revenues":["1.5",3],"trees":[{"nodes":[{"split":{"product":2,"left":1,"right":2}},{"leaf":{"option":2}},{"leaf":{"option":0}}],"root":0},{"nodes":[{"leaf":{"option":0}}],"root":0}],"lambda":["1/3","2/3"]}"#;

    #[test]
    fn round_trips_exactly() {
        let inst: Instance<BigRational> = instance_from_json(DOC).unwrap();
        let text = instance_to_json(&inst);
        let again: Instance<BigRational> = instance_from_json(&text).unwrap();
        assert_eq!(inst, again);
        assert_eq!(text, instance_to_json(&again));
        assert!(text.contains(r#""revenues":["1.5","3"]"#));
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(instance_from_json::<f64>(r#"{"n":1}"#).is_err());
        let bad = DOC.replace(r#""product":2"#, r#""product":3"#);
        assert!(instance_from_json::<f64>(&bad).is_err());
    }
}
