use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::scenegen::Dataset;

/// Stratified split: each class keeps `round(count · test_fraction)` of its
/// samples for the test side. Returns sample indices into `ds`, each side
/// in ascending order.
pub fn split_indices(
    ds: &Dataset,
    test_fraction: f64,
    rng: &mut RngStream,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut by_class = vec![Vec::new(); ds.classes.len()];
    for (i, s) in ds.samples.iter().enumerate() {
        by_class[s.class_index].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, members) in by_class.iter_mut().enumerate() {
        let n = members.len();
        if (n as f64) * test_fraction < 1.0 {
            return Err(Error::Config(format!(
                "class {c} has {n} samples, too few for test fraction {test_fraction}"
            )));
        }
        let k = ((n as f64) * test_fraction).round() as usize;
        rng.shuffle(members);
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// [`split_indices`] materialised as two datasets.
pub fn split_dataset(
    ds: &Dataset,
    test_fraction: f64,
    rng: &mut RngStream,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, test_fraction, rng)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}
