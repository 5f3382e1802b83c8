//! Sorted sparse vectors over slot ids.

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGrad {
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl SparseGrad {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn unit(i: usize, v: f64) -> Self {
        Self {
            idx: vec![i as u32],
            val: vec![v],
        }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().map(|&i| i as usize).zip(self.val.iter().copied())
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.idx.binary_search(&(i as u32)) {
            Ok(k) => self.val[k],
            Err(_) => 0.0,
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.val.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c * other`, merging by sorted key union.
    pub fn add_scaled(&mut self, other: &SparseGrad, c: f64) {
        if other.is_empty() {
            return;
        }
        if self.is_empty() {
            self.idx.extend_from_slice(&other.idx);
            self.val.extend(other.val.iter().map(|v| v * c));
            return;
        }
        let mut idx = Vec::with_capacity(self.idx.len() + other.idx.len());
        let mut val = Vec::with_capacity(idx.capacity());
        let (mut a, mut b) = (0, 0);
        while a < self.idx.len() && b < other.idx.len() {
            match self.idx[a].cmp(&other.idx[b]) {
                std::cmp::Ordering::Less => {
                    idx.push(self.idx[a]);
                    val.push(self.val[a]);
                    a += 1;
                }
                std::cmp::Ordering::Greater => {
                    idx.push(other.idx[b]);
                    val.push(other.val[b] * c);
                    b += 1;
                }
                std::cmp::Ordering::Equal => {
                    idx.push(self.idx[a]);
                    val.push(self.val[a] + other.val[b] * c);
                    a += 1;
                    b += 1;
                }
            }
        }
        idx.extend_from_slice(&self.idx[a..]);
        val.extend_from_slice(&self.val[a..]);
        idx.extend_from_slice(&other.idx[b..]);
        val.extend(other.val[b..].iter().map(|v| v * c));
        self.idx = idx;
        self.val = val;
    }

    pub fn add_unit(&mut self, i: usize, v: f64) {
        match self.idx.binary_search(&(i as u32)) {
            Ok(k) => self.val[k] += v,
            Err(k) => {
                self.idx.insert(k, i as u32);
                self.val.insert(k, v);
            }
        }
    }

    /// `dense += c * self`.
    pub fn add_to_dense(&self, dense: &mut [f64], c: f64) {
        for (i, v) in self.iter() {
            dense[i] += c * v;
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        self.add_to_dense(&mut d, 1.0);
        d
    }
}
