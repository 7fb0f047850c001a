use ndarray::{concatenate, Array2, Axis};

use super::transition::Transition;

/// Column-stacked view of a list of transitions.
#[derive(Debug, Clone)]
pub struct Batch {
    pub s: Array2<f64>,
    pub a: Array2<f64>,
    pub r: Vec<f64>,
    pub s_next: Array2<f64>,
    pub terminal: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Self {
        let n = items.len();
        let sd = items.first().map_or(0, |t| t.s.len());
        let ad = items.first().map_or(0, |t| t.a.len());
        let mut s = Vec::with_capacity(n * sd);
        let mut a = Vec::with_capacity(n * ad);
        let mut s_next = Vec::with_capacity(n * sd);
        for t in items {
            s.extend_from_slice(&t.s);
            a.extend_from_slice(&t.a);
            s_next.extend_from_slice(&t.s_next);
        }
        Self {
            s: Array2::from_shape_vec((n, sd), s).expect("uniform state width"),
            a: Array2::from_shape_vec((n, ad), a).expect("uniform action width"),
            r: items.iter().map(|t| t.r).collect(),
            s_next: Array2::from_shape_vec((n, sd), s_next).expect("uniform state width"),
            terminal: items.iter().map(|t| t.terminal).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `[s | a]` rows.
    pub fn state_action(&self) -> Array2<f64> {
        concatenate(Axis(1), &[self.s.view(), self.a.view()]).expect("same row count")
    }

    /// `[s | a | s']` rows.
    pub fn state_action_next(&self) -> Array2<f64> {
        concatenate(Axis(1), &[self.s.view(), self.a.view(), self.s_next.view()]).expect("same row count")
    }
}

/// `[left | right]` rows.
pub fn hconcat(left: &Array2<f64>, right: &Array2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[left.view(), right.view()]).expect("same row count")
}

/// `left` rows followed by `right` rows.
pub fn vconcat(top: &Array2<f64>, bottom: &Array2<f64>) -> Array2<f64> {
    concatenate(Axis(0), &[top.view(), bottom.view()]).expect("same column count")
}
