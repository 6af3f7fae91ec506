use crate::error::{Error, Result};
use crate::tensor::{sq_dist, Vector};

/// Index of the bank entry closest to `query` in Euclidean distance.
/// Ties go to the lowest index.
pub fn nearest_index<'a, I>(query: &[f64], bank: I) -> Result<usize>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in bank.into_iter().enumerate() {
        if v.len() != query.len() {
            return Err(Error::dims("nearest_neighbor", query.len(), v.len()));
        }
        let d = sq_dist(query, v);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i).ok_or(Error::Empty("nearest-neighbor bank"))
}

pub fn nearest_neighbor<'a, P>(query: &Vector, bank: &'a [(Vector, P)]) -> Result<&'a P> {
    let i = nearest_index(query, bank.iter().map(|(v, _)| v.as_slice()))?;
    Ok(&bank[i].1)
}

/// Flat bank of equal-length keys with payload indices, for repeated queries.
#[derive(Debug, Clone)]
pub struct KeyBank {
    dim: usize,
    keys: Vec<f64>,
}

impl KeyBank {
    pub fn new(keys: &[Vector]) -> Result<Self> {
        let dim = keys.first().ok_or(Error::Empty("nearest-neighbor bank"))?.dim();
        let mut flat = Vec::with_capacity(keys.len() * dim);
        for k in keys {
            if k.dim() != dim {
                return Err(Error::dims("KeyBank::new", dim, k.dim()));
            }
            flat.extend_from_slice(k);
        }
        Ok(KeyBank { dim, keys: flat })
    }

    pub fn len(&self) -> usize {
        self.keys.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, i: usize) -> &[f64] {
        &self.keys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nearest(&self, query: &[f64]) -> Result<usize> {
        nearest_index(query, self.keys.chunks_exact(self.dim))
    }
}
