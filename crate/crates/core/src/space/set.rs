use std::cmp::Ordering;

use num::{One, Zero};

use super::arc::Arc;
use crate::rational::Rational;

/// Open interval `(lo, hi)` with `0 <= lo < hi <= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Interval {
        debug_assert!(lo < hi && !(lo < Rational::zero()) && hi <= Rational::one());
        Interval { lo, hi }
    }

    pub fn unit() -> Interval {
        Interval { lo: Rational::zero(), hi: Rational::one() }
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    Union,
    Intersection,
    /// Interior of `A \ B`, which keeps results open.
    Difference,
}

/// An open subset of the circle given as a finite union of open arcs.
///
/// Canonical form: the circle is cut at 0 and the set is stored as sorted,
/// pairwise disjoint open intervals of `[0, 1]`. Two intervals may share an
/// endpoint only when that point is absent from the set. `through_zero`
/// records whether the point `0 = 1` belongs to the set; it is set only when
/// the first interval starts at 0 and the last ends at 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct IntervalSet {
    parts: Vec<Interval>,
    through_zero: bool,
}

impl IntervalSet {
    pub fn empty() -> IntervalSet {
        IntervalSet::default()
    }

    pub fn full() -> IntervalSet {
        IntervalSet { parts: vec![Interval::unit()], through_zero: true }
    }

    pub fn from_arc(arc: &Arc) -> IntervalSet {
        let (parts, through_zero) = arc.pieces();
        let mut parts = parts;
        parts.sort_by(|a, b| a.lo.cmp(&b.lo));
        IntervalSet { parts, through_zero }
    }

    /// Union of arbitrary arcs in canonical form.
    pub fn canonicalize(arcs: &[Arc]) -> IntervalSet {
        let mut pieces = Vec::with_capacity(arcs.len() + 1);
        let mut zero = false;
        for arc in arcs {
            let (p, z) = arc.pieces();
            pieces.extend(p);
            zero |= z;
        }
        Self::merge(pieces, zero)
    }

    /// Sorts and merges overlapping open intervals. Touching intervals stay
    /// apart because the shared endpoint is not covered.
    fn merge(mut pieces: Vec<Interval>, through_zero: bool) -> IntervalSet {
        pieces.sort_by(|a, b| a.lo.cmp(&b.lo).then_with(|| b.hi.cmp(&a.hi)));
        let mut parts: Vec<Interval> = Vec::with_capacity(pieces.len());
        for p in pieces {
            match parts.last_mut() {
                Some(last) if p.lo < last.hi => {
                    if p.hi > last.hi {
                        last.hi = p.hi;
                    }
                }
                _ => parts.push(p),
            }
        }
        IntervalSet { parts, through_zero }
    }

    /// Wraps parts that are already sorted, disjoint and non-overlapping.
    pub(crate) fn from_parts(parts: Vec<Interval>, through_zero: bool) -> IntervalSet {
        IntervalSet { parts, through_zero }
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn through_zero(&self) -> bool {
        self.through_zero
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.through_zero && self.parts.len() == 1 && self.parts[0].lo.is_zero() && self.parts[0].hi.is_one()
    }

    /// Lebesgue length; measure for general densities lives on
    /// [`super::DoublingMeasure`].
    pub fn length(&self) -> Rational {
        crate::rational::sum(self.parts.iter().map(Interval::length))
    }

    /// Point membership; `x` is read modulo 1.
    pub fn contains(&self, x: &Rational) -> bool {
        let x = x - x.floor();
        if x.is_zero() {
            return self.through_zero;
        }
        // last part with lo < x
        let idx = self.parts.partition_point(|p| p.lo < x);
        idx > 0 && x < self.parts[idx - 1].hi
    }

    /// Whether `x` lies in the closure of the set.
    pub fn closure_contains(&self, x: &Rational) -> bool {
        let x = x - x.floor();
        if x.is_zero() {
            return self.through_zero
                || self.parts.first().is_some_and(|p| p.lo.is_zero())
                || self.parts.last().is_some_and(|p| p.hi.is_one());
        }
        let idx = self.parts.partition_point(|p| p.lo <= x);
        idx > 0 && x <= self.parts[idx - 1].hi
    }

    /// Exact point-set inclusion `self ⊆ other`.
    pub fn is_subset(&self, other: &IntervalSet) -> bool {
        if self.through_zero && !other.through_zero {
            return false;
        }
        self.parts.iter().all(|p| {
            let idx = other.parts.partition_point(|q| q.lo <= p.lo);
            idx > 0 && {
                let q = &other.parts[idx - 1];
                q.lo <= p.lo && p.hi <= q.hi
            }
        })
    }

    /// Whether the two open sets share a point.
    pub fn intersects(&self, other: &IntervalSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let a = &self.parts[i];
            let b = &other.parts[j];
            if a.lo < b.hi && b.lo < a.hi {
                return true;
            }
            if a.hi <= b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        false
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        self.boolean(BoolOp::Union, other)
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        self.boolean(BoolOp::Intersection, other)
    }

    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        self.boolean(BoolOp::Difference, other)
    }

    /// Exact set operation by sweeping the merged breakpoints of both sets.
    pub fn boolean(&self, op: BoolOp, other: &IntervalSet) -> IntervalSet {
        let mut cuts: Vec<&Rational> = Vec::with_capacity(2 * (self.parts.len() + other.parts.len()) + 2);
        let zero = Rational::zero();
        let one = Rational::one();
        cuts.push(&zero);
        cuts.push(&one);
        for p in self.parts.iter().chain(other.parts.iter()) {
            cuts.push(&p.lo);
            cuts.push(&p.hi);
        }
        cuts.sort();
        cuts.dedup();

        let piece_in = |set: &IntervalSet, lo: &Rational, hi: &Rational| -> bool {
            let idx = set.parts.partition_point(|p| &p.lo <= lo);
            idx > 0 && hi <= &set.parts[idx - 1].hi
        };
        let keep_piece = |a: bool, b: bool| match op {
            BoolOp::Union => a || b,
            BoolOp::Intersection => a && b,
            BoolOp::Difference => a && !b,
        };
        let keep_point = |x: &Rational| match op {
            BoolOp::Union => self.contains(x) || other.contains(x),
            BoolOp::Intersection => self.contains(x) && other.contains(x),
            BoolOp::Difference => self.contains(x) && !other.closure_contains(x),
        };

        let mut parts: Vec<Interval> = Vec::new();
        let mut open: Option<Rational> = None;
        let mut open_end: Option<&Rational> = None;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let inside = keep_piece(piece_in(self, lo, hi), piece_in(other, lo, hi));
            if inside {
                let joined = open_end == Some(lo) && keep_point(lo);
                if !joined {
                    if let (Some(start), Some(end)) = (open.take(), open_end) {
                        parts.push(Interval::new(start, end.clone()));
                    }
                    open = Some(lo.clone());
                }
                open_end = Some(hi);
            } else if let (Some(start), Some(end)) = (open.take(), open_end.take()) {
                parts.push(Interval::new(start, end.clone()));
            }
        }
        if let (Some(start), Some(end)) = (open, open_end) {
            parts.push(Interval::new(start, end.clone()));
        }
        let through_zero = keep_point(&zero);
        debug_assert!(
            !through_zero
                || (parts.first().is_some_and(|p| p.lo.is_zero()) && parts.last().is_some_and(|p| p.hi.is_one()))
        );
        IntervalSet { parts, through_zero }
    }

    /// Total order on canonical sets, used only for deterministic sorting.
    pub fn cmp_canonical(&self, other: &IntervalSet) -> Ordering {
        let key = |s: &IntervalSet| s.parts.iter().map(|p| (p.lo.clone(), p.hi.clone())).collect::<Vec<_>>();
        key(self).cmp(&key(other)).then(self.through_zero.cmp(&other.through_zero))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn arc(c: Rational, r: Rational) -> Arc {
        Arc::new(c, r).unwrap()
    }

    fn iv(lo: Rational, hi: Rational) -> IntervalSet {
        IntervalSet::canonicalize(&[Arc::from_endpoints(lo, hi).unwrap()])
    }

    #[test]
    fn canonicalize_examples() {
        assert!(IntervalSet::canonicalize(&[]).is_empty());
        let half = IntervalSet::canonicalize(&[arc(frac(1, 4), frac(1, 4))]);
        assert_eq!(half.parts(), &[Interval::new(int(0), frac(1, 2))]);
        let merged = IntervalSet::canonicalize(&[arc(frac(1, 6), frac(1, 6)), arc(frac(3, 8), frac(1, 8))]);
        assert_eq!(merged, half);
    }

    #[test]
    fn touching_arcs_stay_apart() {
        let s = IntervalSet::canonicalize(&[arc(frac(1, 4), frac(1, 4)), arc(frac(3, 4), frac(1, 4))]);
        assert_eq!(s.parts().len(), 2);
        assert!(!s.contains(&frac(1, 2)));
        assert!(!s.contains(&int(0)));
        assert!(!s.is_full());
        assert_eq!(s.length(), int(1));
    }

    #[test]
    fn boolean_examples() {
        let a = iv(int(0), frac(1, 2));
        let b = iv(frac(1, 4), frac(3, 4));
        assert_eq!(a.intersection(&b), iv(frac(1, 4), frac(1, 2)));
        assert_eq!(a.union(&IntervalSet::empty()), a);
        let comp = IntervalSet::full().difference(&a);
        assert_eq!(comp, iv(frac(1, 2), int(1)));
        assert_eq!(comp.length() + a.length(), int(1));
    }

    #[test]
    fn union_across_zero() {
        let a = IntervalSet::from_arc(&arc(int(0), frac(1, 8)));
        let b = iv(frac(1, 16), frac(1, 2));
        let u = a.union(&b);
        assert!(u.through_zero());
        assert!(u.contains(&int(0)));
        assert!(u.contains(&frac(1, 8)));
        assert_eq!(u.parts().len(), 2);
        assert_eq!(u.length(), frac(1, 2) + frac(1, 8));
    }

    #[test]
    fn difference_takes_interior() {
        let full = IntervalSet::full();
        let mid = iv(frac(1, 4), frac(1, 2));
        let d = full.difference(&mid);
        assert!(!d.contains(&frac(1, 4)));
        assert!(d.contains(&int(0)));
        assert!(d.contains(&frac(3, 4)));
        assert_eq!(d.length(), frac(3, 4));
        let z = IntervalSet::from_arc(&arc(int(0), frac(1, 8)));
        let d2 = z.difference(&iv(int(0), frac(1, 16)));
        assert!(!d2.through_zero());
        assert_eq!(d2.length(), frac(1, 8) + frac(1, 16));
    }

    #[test]
    fn subset_is_exact() {
        let a = iv(int(0), frac(1, 2));
        let split = iv(int(0), frac(1, 4)).union(&iv(frac(1, 4), frac(1, 2)));
        assert!(split.is_subset(&a));
        assert!(!a.is_subset(&split));
        assert!(a.is_subset(&IntervalSet::full()));
        let z = IntervalSet::from_arc(&arc(int(0), frac(1, 8)));
        let no_zero = iv(int(0), frac(1, 8)).union(&iv(frac(7, 8), int(1)));
        assert!(!z.is_subset(&no_zero));
        assert!(no_zero.is_subset(&z));
    }

    #[test]
    fn closure_membership() {
        let a = iv(frac(1, 4), frac(1, 2));
        assert!(a.closure_contains(&frac(1, 4)));
        assert!(a.closure_contains(&frac(1, 2)));
        assert!(!a.closure_contains(&frac(3, 4)));
        assert!(iv(int(0), frac(1, 2)).closure_contains(&int(0)));
    }
}
