//! Parameter grids and an order-preserving map over sweep points.
//!
//! With the `parallel` feature the map fans out over rayon's pool; without it
//! the same call runs sequentially. Output order always follows input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Maps `f` over `items`, in parallel when the `parallel` feature is enabled.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Like [`map`] but stops at the first error in input order.
pub fn try_map<T, R, E, F>(items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map(items, f).into_iter().collect()
}

fn check_range(start: f64, stop: f64, count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidParameter("sweep count must be >= 1".into()));
    }
    if !(start.is_finite() && stop.is_finite()) {
        return Err(Error::InvalidParameter("sweep range must be finite".into()));
    }
    Ok(())
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    check_range(start, stop, count)?;
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|k| if k + 1 == count { stop } else { start + step * k as f64 })
        .collect())
}

/// `count` logarithmically spaced points from `start` to `stop` inclusive.
pub fn logspace(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    check_range(start, stop, count)?;
    if start <= 0.0 || stop <= 0.0 {
        return Err(Error::InvalidParameter(
            "logarithmic sweep needs positive bounds".into(),
        ));
    }
    Ok(linspace(start.ln(), stop.ln(), count)?
        .into_iter()
        .enumerate()
        .map(|(k, x)| match k {
            0 => start,
            _ if k + 1 == count => stop,
            _ => x.exp(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let g = linspace(1.0, 5.0, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[99], 5.0);
        assert_eq!(linspace(2.0, 3.0, 1).unwrap(), vec![2.0]);
        assert!(linspace(0.0, 1.0, 0).is_err());
        assert!(linspace(0.0, f64::INFINITY, 3).is_err());
    }

    #[test]
    fn logspace_endpoints() {
        let g = logspace(1e-4, 1e-1, 4).unwrap();
        assert_eq!(g[0], 1e-4);
        assert_eq!(g[3], 1e-1);
        assert!((g[1] - 1e-3).abs() < 1e-15);
        assert!(logspace(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = map(&items, |x| x * x);
        assert_eq!(out, map_sequential(&items, |x| x * x));
        let err = try_map(&items, |&x| {
            if x == 10 || x == 500 {
                Err(Error::InvalidParameter(format!("{x}")))
            } else {
                Ok(x)
            }
        });
        assert_eq!(err, Err(Error::InvalidParameter("10".into())));
    }
}
