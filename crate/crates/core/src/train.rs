//! Seeded shuffling and the mini-batch loop shared by both trainers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{AdadeltaState, Parameters};

/// Generator for parameter initialization.
pub(crate) fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for epoch `epoch`; a separate ChaCha stream per epoch.
pub(crate) fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

/// Example order for one epoch. Negatives (per `is_negative`) are kept with
/// probability `negative_keep`.
pub(crate) fn epoch_order(
    rng: &mut ChaCha8Rng,
    n: usize,
    negative_keep: f64,
    is_negative: impl Fn(usize) -> bool,
) -> Vec<usize> {
    let mut order: Vec<usize> = if negative_keep >= 1.0 {
        (0..n).collect()
    } else {
        (0..n)
            .filter(|&i| !is_negative(i) || rng.gen_bool(negative_keep.max(0.0)))
            .collect()
    };
    order.shuffle(rng);
    order
}

/// Runs one pass over `order` in mini-batches. `batch_grad` returns the batch
/// loss and a gradient buffer shaped like the model. Returns the mean batch loss.
pub(crate) fn run_epoch<M, F>(
    model: &mut M,
    optimizer: &mut AdadeltaState,
    order: &[usize],
    batch_size: usize,
    mut batch_grad: F,
) -> Result<f64>
where
    M: Parameters + Clone,
    F: FnMut(&M, &[usize]) -> Result<(f64, M)>,
{
    let mut total = 0.0;
    let mut batches = 0usize;
    for batch in order.chunks(batch_size.max(1)) {
        let (loss, grad) = batch_grad(model, batch)?;
        grad.check_finite()?;
        optimizer.step(model, &grad);
        total += loss;
        batches += 1;
    }
    model.check_finite()?;
    Ok(if batches == 0 {
        0.0
    } else {
        total / batches as f64
    })
}
