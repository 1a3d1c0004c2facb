use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::tensor::Tensor;

/// A gathered mini-batch.
#[derive(Clone, Debug)]
pub struct Batch {
    /// `[B,H,W,C]`
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
    /// Positions in the source dataset.
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Index lists of one epoch. The permutation is seeded by `seed + epoch`;
/// the final batch may be short.
pub fn batch_order(n: usize, batch_size: usize, seed: u64, epoch: usize, shuffle: bool) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(epoch as u64));
        idx.shuffle(&mut rng);
    }
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Iterator that gathers each batch on demand.
pub struct Batches<'a> {
    data: &'a Dataset,
    order: std::vec::IntoIter<Vec<usize>>,
}

impl<'a> Batches<'a> {
    pub(crate) fn new(data: &'a Dataset, order: Vec<Vec<usize>>) -> Self {
        Self {
            data,
            order: order.into_iter(),
        }
    }
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        self.order.next().map(|idx| self.data.gather(&idx))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.order.size_hint()
    }
}

impl ExactSizeIterator for Batches<'_> {}
