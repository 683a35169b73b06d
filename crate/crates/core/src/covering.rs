//! Greedy 5r covering for finite families of arcs.

use std::collections::BTreeMap;
use std::ops::Bound;

use serde::{Deserialize, Serialize};

use crate::rational::{int, Rational};
use crate::serde_rational;
use crate::space::{Arc, IntervalSet};

/// Disjoint subfamily chosen by [`vitali_5r`]. `selected` holds positions in
/// the input slice (0-based), in the order they were chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverSelection {
    pub selected: Vec<usize>,
    #[serde(with = "serde_rational")]
    pub factor: Rational,
}

impl CoverSelection {
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut v = self.selected.clone();
        v.sort_unstable();
        v
    }

    pub fn with_factor(mut self, factor: Rational) -> Self {
        self.factor = factor;
        self
    }
}

/// Pairwise disjoint open intervals keyed by left endpoint.
#[derive(Default)]
struct DisjointPieces {
    by_lo: BTreeMap<Rational, Rational>,
}

impl DisjointPieces {
    fn hits(&self, arc: &Arc) -> bool {
        let (pieces, _) = arc_pieces(arc);
        pieces.iter().any(|(lo, hi)| {
            // rightmost stored piece starting before `hi`; disjointness makes
            // its right end the largest among those
            self.by_lo.range((Bound::Unbounded, Bound::Excluded(hi.clone()))).next_back().is_some_and(|(_, r)| r > lo)
        })
    }

    fn insert(&mut self, arc: &Arc) {
        for (lo, hi) in arc_pieces(arc).0 {
            self.by_lo.insert(lo, hi);
        }
    }
}

fn arc_pieces(arc: &Arc) -> (Vec<(Rational, Rational)>, bool) {
    let set = arc.to_set();
    let z = set.through_zero();
    (set.parts().iter().map(|p| (p.lo.clone(), p.hi.clone())).collect(), z)
}

/// Processes arcs by decreasing radius (ties: smaller position first) and
/// keeps each one disjoint from everything kept so far.
pub fn vitali_5r(balls: &[Arc]) -> CoverSelection {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&i, &j| balls[j].radius().cmp(balls[i].radius()).then(i.cmp(&j)));
    let mut kept = DisjointPieces::default();
    let mut selected = Vec::new();
    for i in order {
        if !kept.hits(&balls[i]) {
            kept.insert(&balls[i]);
            selected.push(i);
        }
    }
    CoverSelection { selected, factor: int(5) }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverVerification {
    pub disjoint: bool,
    pub covered: bool,
    /// Two selected positions whose arcs meet.
    pub overlapping: Option<(usize, usize)>,
    /// An input position not contained in the dilated selection.
    pub uncovered: Option<usize>,
}

impl CoverVerification {
    pub fn passed(&self) -> bool {
        self.disjoint && self.covered
    }
}

/// Exact check that the selection is disjoint and that its dilates by
/// `sel.factor` contain every input arc.
pub fn verify_cover(input: &[Arc], sel: &CoverSelection) -> CoverVerification {
    let mut overlapping = None;
    let mut by_pos: Vec<usize> = sel.sorted_indices();
    by_pos.dedup();
    'outer: for (k, &i) in by_pos.iter().enumerate() {
        for &j in &by_pos[k + 1..] {
            if input[i].intersects(&input[j]) {
                overlapping = Some((i, j));
                break 'outer;
            }
        }
    }
    let dilated: Vec<Arc> = sel.selected.iter().map(|&i| input[i].dilate(&sel.factor)).collect();
    let cover = IntervalSet::canonicalize(&dilated);
    let uncovered = input.iter().position(|b| !b.to_set().is_subset(&cover));
    CoverVerification { disjoint: overlapping.is_none(), covered: uncovered.is_none(), overlapping, uncovered }
}

/// Every unselected arc meets a selected arc of radius at least its own.
/// Returns the first offending position otherwise.
pub fn verify_structure(input: &[Arc], sel: &CoverSelection) -> Result<(), usize> {
    let mut chosen = vec![false; input.len()];
    for &i in &sel.selected {
        chosen[i] = true;
    }
    for (i, ball) in input.iter().enumerate() {
        if chosen[i] {
            continue;
        }
        let ok = sel.selected.iter().any(|&j| input[j].radius() >= ball.radius() && input[j].intersects(ball));
        if !ok {
            return Err(i);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;

    fn arc(c: Rational, r: Rational) -> Arc {
        Arc::new(c, r).unwrap()
    }

    #[test]
    fn disjoint_input_all_selected() {
        let balls: Vec<Arc> = (0..8).map(|j| arc(frac(2 * j + 1, 16), frac(1, 16))).collect();
        let sel = vitali_5r(&balls);
        assert_eq!(sel.sorted_indices(), (0..8).collect::<Vec<_>>());
        assert!(verify_cover(&balls, &sel).passed());
    }

    #[test]
    fn nested_keeps_larger() {
        let balls = [arc(frac(1, 2), frac(1, 8)), arc(frac(1, 2), frac(1, 4))];
        assert_eq!(vitali_5r(&balls).selected, vec![1]);
        let balls = [arc(frac(1, 2), frac(1, 4)), arc(frac(1, 2), frac(1, 8))];
        assert_eq!(vitali_5r(&balls).selected, vec![0]);
    }

    #[test]
    fn three_ball_example() {
        let balls = [arc(frac(1, 2), frac(1, 10)), arc(frac(11, 20), frac(1, 20)), arc(frac(1, 5), frac(1, 20))];
        let sel = vitali_5r(&balls);
        assert_eq!(sel.sorted_indices(), vec![0, 2]);
        assert!(balls[0].dilate(&int(5)).is_full());
        assert!(verify_cover(&balls, &sel).passed());
        assert!(verify_cover(&balls, &sel.clone().with_factor(int(3))).passed());
        assert_eq!(verify_structure(&balls, &sel), Ok(()));
    }

    #[test]
    fn bad_selection_has_witness() {
        let balls = [arc(int(0), frac(1, 16)), arc(frac(1, 2), frac(1, 16))];
        let sel = CoverSelection { selected: vec![0], factor: int(5) };
        let v = verify_cover(&balls, &sel);
        assert!(!v.covered);
        assert_eq!(v.uncovered, Some(1));
        assert_eq!(verify_structure(&balls, &sel), Err(1));
        let overlapping = CoverSelection { selected: vec![0, 1], factor: int(5) };
        let touching = [arc(frac(1, 4), frac(1, 4)), arc(frac(1, 2), frac(1, 8))];
        assert_eq!(verify_cover(&touching, &overlapping).overlapping, Some((0, 1)));
    }

    #[test]
    fn equal_radii_tie_break_by_position() {
        let balls = [arc(frac(1, 4), frac(1, 8)), arc(frac(3, 8), frac(1, 8)), arc(frac(1, 8), frac(1, 8))];
        assert_eq!(vitali_5r(&balls).selected, vec![0]);
    }

    #[test]
    fn wrapping_arcs_conflict_through_zero() {
        let balls = [arc(int(0), frac(1, 8)), arc(frac(15, 16), frac(1, 32)), arc(frac(1, 2), frac(1, 32))];
        let sel = vitali_5r(&balls);
        assert_eq!(sel.selected, vec![0, 2]);
        assert!(verify_cover(&balls, &sel).passed());
    }

    #[test]
    fn empty_input() {
        let sel = vitali_5r(&[]);
        assert!(sel.selected.is_empty());
        assert!(verify_cover(&[], &sel).passed());
    }
}
