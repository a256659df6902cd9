//! Time-linked training examples stored column-wise.

use std::io::{Read, Write};

use super::EstimateError;
use crate::model::Time;

/// Where a block of examples came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub run_id: String,
    pub window: (Time, Time),
}

/// One example, borrowed from a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleRef<'a> {
    pub t: u32,
    pub inputs: &'a [f64],
    pub label: f64,
}

/// Examples `(t, inputs@now-t, output@now)`. The input vector already holds
/// the encoded offset as its last feature.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDataset {
    pub estimate: String,
    n_features: usize,
    t: Vec<u32>,
    features: Vec<f64>,
    labels: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

impl TrainingDataset {
    pub fn new(estimate: &str, n_features: usize) -> Self {
        Self {
            estimate: estimate.into(),
            n_features,
            t: Vec::new(),
            features: Vec::new(),
            labels: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, t: u32, inputs: &[f64], label: f64) -> Result<(), EstimateError> {
        if inputs.len() != self.n_features {
            return Err(EstimateError::SchemaMismatch {
                expected: self.n_features,
                found: inputs.len(),
            });
        }
        self.t.push(t);
        self.features.extend_from_slice(inputs);
        self.labels.push(label);
        Ok(())
    }

    pub fn get(&self, i: usize) -> ExampleRef<'_> {
        ExampleRef {
            t: self.t[i],
            inputs: self.inputs(i),
            label: self.labels[i],
        }
    }

    pub fn inputs(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn offsets(&self) -> &[u32] {
        &self.t
    }

    pub fn iter(&self) -> impl Iterator<Item = ExampleRef<'_>> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Appends all examples of `other`.
    pub fn extend(&mut self, other: &TrainingDataset) -> Result<(), EstimateError> {
        if other.n_features != self.n_features {
            return Err(EstimateError::SchemaMismatch {
                expected: self.n_features,
                found: other.n_features,
            });
        }
        self.t.extend_from_slice(&other.t);
        self.features.extend_from_slice(&other.features);
        self.labels.extend_from_slice(&other.labels);
        self.provenance.extend(other.provenance.iter().cloned());
        Ok(())
    }

    /// Writes `t,feat_0..feat_{n-1},label`. Floats use the shortest exact form,
    /// so reading the file back yields identical values.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EstimateError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n_features).map(|i| format!("feat_{i}")));
        header.push("label".into());
        w.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(self.n_features + 2);
        for ex in self.iter() {
            row.clear();
            row.push(ex.t.to_string());
            row.extend(ex.inputs.iter().map(|v| v.to_string()));
            row.push(ex.label.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(estimate: &str, input: R) -> Result<Self, EstimateError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let n = header.len();
        let well_formed = n >= 2
            && &header[0] == "t"
            && &header[n - 1] == "label"
            && (1..n - 1).all(|i| header[i] == *format!("feat_{}", i - 1));
        if !well_formed {
            return Err(EstimateError::Format(
                "dataset header must be t,feat_0..feat_{n-1},label".into(),
            ));
        }
        let mut ds = Self::new(estimate, n - 2);
        let mut inputs = Vec::with_capacity(n - 2);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| EstimateError::Format(format!("row {}: bad {what}", line + 1));
            let t: u32 = rec[0].parse().map_err(|_| bad("t"))?;
            inputs.clear();
            for i in 1..n - 1 {
                inputs.push(rec[i].parse().map_err(|_| bad("feature"))?);
            }
            let label = rec[n - 1].parse().map_err(|_| bad("label"))?;
            ds.push(t, &inputs, label)?;
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut ds = TrainingDataset::new("x", 2);
        ds.push(1, &[0.1, 1.0 / 3.0], 1.0).unwrap();
        ds.push(30, &[-2.5e-9, 7.0], 0.0).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,feat_0,feat_1,label\n"));
        let back = TrainingDataset::read_csv("x", buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mut ds = TrainingDataset::new("x", 2);
        assert!(ds.push(1, &[0.0], 1.0).is_err());
        let other = TrainingDataset::new("y", 3);
        assert!(ds.extend(&other).is_err());
    }

    #[test]
    fn bad_header_is_rejected() {
        let csv = "t,a,label\n1,0,1\n";
        assert!(TrainingDataset::read_csv("x", csv.as_bytes()).is_err());
    }
}
