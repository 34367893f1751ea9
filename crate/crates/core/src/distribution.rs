//! Discrete distributions over outcome sequences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::reduction::Label;

/// Probability masses keyed by outcome sequence, kept in lexicographic order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Distribution {
    masses: BTreeMap<Vec<Label>, f64>,
}

/// One serialized row of a [`Distribution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub sequence: Vec<Label>,
    pub probability: f64,
}

impl Distribution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `p` to the mass of `sequence`.
    pub fn add(&mut self, sequence: Vec<Label>, p: f64) {
        *self.masses.entry(sequence).or_insert(0.0) += p;
    }

    pub fn get(&self, sequence: &[Label]) -> f64 {
        self.masses.get(sequence).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.masses.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Label>, f64)> {
        self.masses.iter().map(|(k, &v)| (k, v))
    }

    /// Total mass on sequences satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&[Label]) -> bool) -> f64 {
        self.iter().filter(|(k, _)| pred(k)).map(|(_, p)| p).sum()
    }

    /// Only the sequences satisfying `pred`, masses unchanged.
    pub fn restrict(&self, pred: impl Fn(&[Label]) -> bool) -> Self {
        Self {
            masses: self
                .masses
                .iter()
                .filter(|(k, _)| pred(k))
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
        }
    }

    /// ½ Σ |p − q| over the union of supports.
    pub fn tv_distance(&self, other: &Distribution) -> f64 {
        let mut sum = 0.0;
        for (k, p) in self.iter() {
            sum += (p - other.get(k)).abs();
        }
        for (k, q) in other.iter() {
            if !self.masses.contains_key(k) {
                sum += q.abs();
            }
        }
        0.5 * sum
    }

    pub fn entries(&self) -> Vec<Entry> {
        self.iter()
            .map(|(k, p)| Entry {
                sequence: k.clone(),
                probability: p,
            })
            .collect()
    }
}

impl FromIterator<(Vec<Label>, f64)> for Distribution {
    fn from_iter<I: IntoIterator<Item = (Vec<Label>, f64)>>(iter: I) -> Self {
        let mut d = Distribution::new();
        for (k, p) in iter {
            d.add(k, p);
        }
        d
    }
}

impl Serialize for Distribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.entries().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries
            .into_iter()
            .map(|e| (e.sequence, e.probability))
            .collect())
    }
}

/// `[1, 2]` → `"1-2"`; the empty sequence is `""`.
pub fn format_sequence(seq: &[Label]) -> String {
    seq.iter()
        .map(|y| y.to_string())
        .collect::<Vec<_>>()
        .join("-")
}
