use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Per-filter maximum over all spatial positions, with the flat spatial
/// index of the first maximum.
pub fn global_max_pool(input: &Tensor) -> Result<(Vec<f64>, Vec<usize>)> {
    input.expect_rank(3, "[K, H, W] feature map")?;
    let s = input.shape();
    let spatial = s[1] * s[2];
    if spatial == 0 {
        return Err(Error::ShapeMismatch {
            expected: "non-empty spatial dims".into(),
            got: format!("{s:?}"),
        });
    }
    Ok(max_pool_raw(input.data(), s[0], spatial))
}

pub(crate) fn max_pool_raw(data: &[f64], filters: usize, spatial: usize) -> (Vec<f64>, Vec<usize>) {
    let mut values = Vec::with_capacity(filters);
    let mut argmax = Vec::with_capacity(filters);
    for map in data.chunks_exact(spatial).take(filters) {
        let mut best = 0;
        for (i, &v) in map.iter().enumerate() {
            if v > map[best] {
                best = i;
            }
        }
        values.push(map[best]);
        argmax.push(best);
    }
    (values, argmax)
}

/// Routes each filter's gradient to its argmax position.
pub fn global_max_pool_backward(shape: &[usize], argmax: &[usize], grad_out: &[f64]) -> Tensor {
    let mut grad = Tensor::zeros(shape);
    let spatial = shape[1] * shape[2];
    for (k, (&i, &g)) in argmax.iter().zip(grad_out).enumerate() {
        grad.data_mut()[k * spatial + i] = g;
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_map() {
        let t = Tensor::new(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (v, idx) = global_max_pool(&t).unwrap();
        assert_eq!(v, vec![4.0]);
        assert_eq!(idx, vec![3]);
    }

    #[test]
    fn ties_go_to_first_index() {
        let t = Tensor::new(&[1, 2, 3], vec![7.0; 6]).unwrap();
        let (v, idx) = global_max_pool(&t).unwrap();
        assert_eq!((v[0], idx[0]), (7.0, 0));
        let g = global_max_pool_backward(t.shape(), &idx, &[1.0]);
        assert_eq!(g.data(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_exhaustive_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Tensor::from_fn(&[45, 153, 3], |_| rng.random_range(-10.0..10.0));
        let (v, idx) = global_max_pool(&t).unwrap();
        for k in 0..45 {
            let mut best = f64::NEG_INFINITY;
            for y in 0..153 {
                for x in 0..3 {
                    best = best.max(t.get(&[k, y, x]));
                }
            }
            assert_eq!(v[k], best);
            assert_eq!(t.data()[k * 459 + idx[k]], best);
        }
        let g = global_max_pool_backward(t.shape(), &idx, &[1.0; 45]);
        for map in g.data().chunks(459) {
            assert_eq!(map.iter().sum::<f64>(), 1.0);
            assert_eq!(map.iter().filter(|&&x| x != 0.0).count(), 1);
        }
    }
}
