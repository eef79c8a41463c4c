//! Datasets over a finite universe and the queries asked of them.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::cell::Cell;
use core::fmt;

use crate::error::{Error, Result};

/// Index of an element of the finite universe `X = {0, .., |X|-1}`.
pub type ElementId = u32;

/// An indexed sample `S` of `n >= 1` universe elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    points: Vec<ElementId>,
    universe_size: usize,
}

impl Dataset {
    pub fn new(points: Vec<ElementId>, universe_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("points", "a dataset needs at least one point"));
        }
        if points.iter().any(|p| *p as usize >= universe_size) {
            return Err(Error::invalid("points", "element id outside the universe"));
        }
        Ok(Dataset {
            points,
            universe_size,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn points(&self) -> &[ElementId] {
        &self.points
    }

    pub fn get(&self, index: usize) -> ElementId {
        self.points[index]
    }

    /// Replaces the point at `index`, producing a neighbouring dataset.
    pub fn with_replaced(&self, index: usize, element: ElementId) -> Result<Self> {
        if element as usize >= self.universe_size {
            return Err(Error::invalid("element", "element id outside the universe"));
        }
        let mut points = self.points.clone();
        points[index] = element;
        Ok(Dataset {
            points,
            universe_size: self.universe_size,
        })
    }
}

/// A statistic `q: X -> [0, 1]` with a counter of point evaluations.
///
/// The counter is the machine-independent cost measure: every evaluation
/// made through [`StatQuery::eval`] is counted.
pub struct StatQuery<'a> {
    f: Box<dyn Fn(ElementId) -> f64 + 'a>,
    evals: Cell<u64>,
}

impl<'a> StatQuery<'a> {
    pub fn new(f: impl Fn(ElementId) -> f64 + 'a) -> Self {
        StatQuery {
            f: Box::new(f),
            evals: Cell::new(0),
        }
    }

    /// Query defined by its value at every universe element.
    pub fn from_table(values: Vec<f64>) -> StatQuery<'static> {
        StatQuery::new(move |x| values[x as usize])
    }

    /// Evaluates at one point, counting the evaluation.
    pub fn eval(&self, x: ElementId) -> Result<f64> {
        self.evals.set(self.evals.get() + 1);
        let v = (self.f)(x);
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::QueryOutOfRange { value: v });
        }
        Ok(v)
    }

    /// Evaluates without touching the counter; for ground-truth oracles
    /// that sit outside the mechanism's cost model.
    pub fn peek(&self, x: ElementId) -> f64 {
        (self.f)(x)
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.get()
    }

    /// Mean over the given points, in order.
    pub fn mean_over(&self, points: &[ElementId]) -> Result<f64> {
        let mut sum = 0.0;
        for p in points {
            sum += self.eval(*p)?;
        }
        Ok(sum / points.len() as f64)
    }
}

impl fmt::Debug for StatQuery<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StatQuery")
            .field("eval_count", &self.evals.get())
            .finish_non_exhaustive()
    }
}

/// A counting query `q: X -> {0, 1}`.
///
/// Wraps a [`StatQuery`] taking values 0.0 and 1.0, so it can be handed to
/// any statistical-query mechanism; both views share one counter.
#[derive(Debug)]
pub struct CountingQuery<'a> {
    inner: StatQuery<'a>,
}

impl<'a> CountingQuery<'a> {
    pub fn new(f: impl Fn(ElementId) -> bool + 'a) -> Self {
        CountingQuery {
            inner: StatQuery::new(move |x| if f(x) { 1.0 } else { 0.0 }),
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> CountingQuery<'static> {
        CountingQuery::new(move |x| bits[x as usize])
    }

    pub fn eval(&self, x: ElementId) -> bool {
        self.inner.evals.set(self.inner.evals.get() + 1);
        (self.inner.f)(x) == 1.0
    }

    pub fn peek(&self, x: ElementId) -> bool {
        self.inner.peek(x) == 1.0
    }

    pub fn eval_count(&self) -> u64 {
        self.inner.eval_count()
    }

    pub fn as_stat(&self) -> &StatQuery<'a> {
        &self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_rejects_bad_points() {
        assert!(Dataset::new(vec![], 4).is_err());
        assert!(Dataset::new(vec![0, 4], 4).is_err());
        let d = Dataset::new(vec![0, 3], 4).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.with_replaced(0, 9).is_err());
        assert_eq!(d.with_replaced(0, 2).unwrap().points(), &[2, 3]);
    }

    #[test]
    fn counters_only_increase_and_are_shared() {
        let q = CountingQuery::new(|x| x % 2 == 0);
        assert!(q.eval(0));
        assert!(!q.eval(1));
        assert_eq!(q.as_stat().eval(2).unwrap(), 1.0);
        assert_eq!(q.eval_count(), 3);
        let _ = q.peek(4);
        assert_eq!(q.eval_count(), 3);
    }

    #[test]
    fn out_of_range_values_reported() {
        let q = StatQuery::new(|_| 1.5);
        assert_eq!(q.eval(0), Err(Error::QueryOutOfRange { value: 1.5 }));
        let q = StatQuery::new(|_| f64::NAN);
        assert!(q.eval(0).is_err());
    }
}
