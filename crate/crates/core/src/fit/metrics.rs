use super::FitError;

fn same_len(a: &[f64], b: &[f64]) -> Result<(), FitError> {
    if a.len() != b.len() {
        return Err(FitError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Mean squared error `(1/n) sum (a_i - p_i)^2`.
pub fn mse(predicted: &[f64], actual: &[f64]) -> Result<f64, FitError> {
    same_len(predicted, actual)?;
    if predicted.is_empty() {
        return Err(FitError::TooShort { needed: 1, got: 0 });
    }
    let s: f64 = predicted.iter().zip(actual).map(|(p, a)| (a - p) * (a - p)).sum();
    Ok(s / predicted.len() as f64)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of the average ranks.
pub fn spearman(predicted: &[f64], actual: &[f64]) -> Result<f64, FitError> {
    same_len(predicted, actual)?;
    if predicted.len() < 2 {
        return Err(FitError::TooShort {
            needed: 2,
            got: predicted.len(),
        });
    }
    let rp = average_ranks(predicted);
    let ra = average_ranks(actual);
    let n = rp.len() as f64;
    let mp = rp.iter().sum::<f64>() / n;
    let ma = ra.iter().sum::<f64>() / n;
    let (mut cov, mut vp, mut va) = (0.0, 0.0, 0.0);
    for (p, a) in rp.iter().zip(&ra) {
        cov += (p - mp) * (a - ma);
        vp += (p - mp) * (p - mp);
        va += (a - ma) * (a - ma);
    }
    if vp == 0.0 || va == 0.0 {
        return Err(FitError::ZeroVariance);
    }
    Ok((cov / (vp * va).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 4.0]).unwrap(), 2.0);
        assert!((mse(&[3.0], &[3.1]).unwrap() - 0.01).abs() < 1e-15);
        assert!(mse(&[], &[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(FitError::ZeroVariance));
    }

    #[test]
    fn ties_get_mean_rank() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
        // ranks p = [1.5, 1.5, 3], a = [1, 2, 3] -> r = sqrt(3)/2
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 3f64.sqrt() / 2.0).abs() < 1e-12, "{r}");
    }
}
