use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ManifoldError;
use crate::expr::{parse_with_coords, Expr, ParseError, Point};

/// A coordinate chart together with the closed box that identity checks
/// sample from.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    coords: Vec<String>,
    bounds: Vec<(f64, f64)>,
}

pub const DEFAULT_BOUNDS: (f64, f64) = (-1.0, 1.0);

impl Chart {
    pub fn new(coords: Vec<String>, bounds: Vec<(f64, f64)>) -> Result<Arc<Chart>, ManifoldError> {
        if coords.is_empty() {
            return Err(ManifoldError::EmptyChart);
        }
        if coords.len() != bounds.len() {
            return Err(ManifoldError::BoundsArity { coords: coords.len(), bounds: bounds.len() });
        }
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].contains(c) {
                return Err(ManifoldError::DuplicateCoordinate(c.clone()));
            }
        }
        for (c, &(lo, hi)) in coords.iter().zip(&bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(ManifoldError::EmptyInterval { coord: c.clone(), lo, hi });
            }
        }
        Ok(Arc::new(Chart { coords, bounds }))
    }

    /// Chart sampled on `[-1, 1]` in every coordinate.
    pub fn with_default_box<S: AsRef<str>>(coords: &[S]) -> Result<Arc<Chart>, ManifoldError> {
        let coords: Vec<String> = coords.iter().map(|c| c.as_ref().to_string()).collect();
        let bounds = vec![DEFAULT_BOUNDS; coords.len()];
        Chart::new(coords, bounds)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn coord(&self, i: usize) -> Expr {
        Expr::coord(&self.coords[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    /// Parses an expression that may only mention this chart's coordinates.
    pub fn parse(&self, text: &str) -> Result<Expr, ParseError> {
        parse_with_coords(text, &self.coords)
    }

    pub fn point(&self, values: &[f64]) -> Point {
        Point::new(self.coords.clone(), values.to_vec()).expect("point arity matches chart")
    }

    /// Deterministic sample of `count` points: the first half from a Halton
    /// sequence over the box, the rest uniform from a ChaCha8 stream seeded
    /// with `seed`.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        sample_box(&self.bounds, count, seed)
    }
}

pub fn sample_box(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let lattice = count.div_ceil(2);
    let primes = first_primes(bounds.len());
    let mut points = Vec::with_capacity(count);
    for k in 1..=lattice {
        points.push(
            bounds
                .iter()
                .zip(&primes)
                .map(|(&(lo, hi), &p)| lo + (hi - lo) * radical_inverse(k as u64, p))
                .collect(),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in lattice..count {
        points.push(
            bounds
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                .collect(),
        );
    }
    points
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while k > 0 {
        out += f * (k % base) as f64;
        k /= base;
        f *= inv;
    }
    out
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2;
    while primes.len() < count {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_names_and_empty_intervals() {
        let err = Chart::new(vec!["x".into(), "x".into()], vec![(0.0, 1.0); 2]).unwrap_err();
        assert_eq!(err, ManifoldError::DuplicateCoordinate("x".into()));
        let err = Chart::new(vec!["x".into()], vec![(1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, ManifoldError::EmptyInterval { .. }));
    }

    #[test]
    fn samples_stay_in_the_box_and_are_reproducible() {
        let chart = Chart::new(vec!["a".into(), "b".into(), "c".into()], vec![(-1.0, 1.0), (0.5, 2.0), (3.0, 3.0)])
            .unwrap();
        let pts = chart.sample_points(100, 42);
        assert_eq!(pts.len(), 100);
        for p in &pts {
            for (v, &(lo, hi)) in p.iter().zip(chart.bounds()) {
                assert!(*v >= lo && *v <= hi);
            }
        }
        assert_eq!(pts, chart.sample_points(100, 42));
        assert_ne!(pts[60], chart.sample_points(100, 7)[60]);
        // lattice half does not depend on the seed
        assert_eq!(pts[10], chart.sample_points(100, 7)[10]);
    }

    #[test]
    fn primes_for_halton_bases() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }
}
