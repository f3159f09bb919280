//! Compensated and order-independent summation.

use num_complex::Complex64;

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: Complex64,
    comp: Complex64,
}

fn two_sum(acc: f64, comp: &mut f64, x: f64) -> f64 {
    let t = acc + x;
    if acc.abs() >= x.abs() {
        *comp += (acc - t) + x;
    } else {
        *comp += (x - t) + acc;
    }
    t
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: Complex64) {
        self.sum.re = two_sum(self.sum.re, &mut self.comp.re, x.re);
        self.sum.im = two_sum(self.sum.im, &mut self.comp.im, x.im);
    }

    pub fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

/// Pairwise reduction with a fixed tree shape: the result depends only on the
/// order of `items`, not on how they were produced.
pub fn tree_reduce<T, F>(mut items: Vec<T>, combine: F) -> Option<T>
where
    F: Fn(T, T) -> T,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut acc = Neumaier::new();
        acc.add(Complex64::new(1.0, -1.0));
        for _ in 0..10_000 {
            acc.add(Complex64::new(1e-16, 1e-16));
        }
        acc.add(Complex64::new(-1.0, 1.0));
        let v = acc.value();
        assert!((v.re - 1e-12).abs() < 1e-24);
        assert!((v.im - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn tree_reduce_shapes() {
        assert_eq!(tree_reduce(Vec::<i32>::new(), |a, b| a + b), None);
        assert_eq!(tree_reduce(vec![5], |a, b| a + b), Some(5));
        let s = tree_reduce((0..7).map(|i| i.to_string()).collect(), |a, b| format!("({a}{b})"));
        assert_eq!(s.unwrap(), "(((01)(23))((45)6))");
    }
}
