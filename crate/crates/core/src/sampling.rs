use rand::Rng;

/// Draws an index from a discrete distribution given as an iterator of
/// probabilities. Mass lost to rounding falls on the last positive entry.
pub(crate) fn sample_index<R: Rng + ?Sized, I>(probs: I, rng: &mut R) -> usize
where
    I: IntoIterator<Item = f64>,
{
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = i;
        if u < acc {
            return i;
        }
    }
    last_positive
}
