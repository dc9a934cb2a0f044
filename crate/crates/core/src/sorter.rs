//! Confidence ordering of predictions.

use serde::{Deserialize, Serialize};

use crate::classifier::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Logit,
    #[default]
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neuron {
    #[default]
    Machine,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Descending,
    Ascending,
}

/// Defaults to the softmax of the machine neuron, highest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SortKey {
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub neuron: Neuron,
    #[serde(default)]
    pub direction: Direction,
}

impl SortKey {
    pub fn value(&self, p: &Prediction) -> f64 {
        match (self.activation, self.neuron) {
            (Activation::Logit, Neuron::Machine) => p.logit_machine(),
            (Activation::Logit, Neuron::Human) => p.logit_human(),
            (Activation::Softmax, Neuron::Machine) => p.softmax_machine(),
            (Activation::Softmax, Neuron::Human) => p.softmax_human(),
        }
    }
}

/// Orders items by `value` in the key's direction; equal values fall back
/// to ascending id.
pub fn order_by<T>(items: &[T], direction: Direction, value: impl Fn(&T) -> f64, id: impl Fn(&T) -> u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| {
        let (va, vb) = (value(&items[a]), value(&items[b]));
        let primary = match direction {
            Direction::Descending => vb.total_cmp(&va),
            Direction::Ascending => va.total_cmp(&vb),
        };
        primary.then_with(|| id(&items[a]).cmp(&id(&items[b])))
    });
    idx
}

/// Sample ids ordered by the selected activation. The machine neuron is the
/// output neuron matching each prediction's true machine side.
pub fn sort_predictions(predictions: &[Prediction], key: SortKey) -> Vec<u64> {
    order_by(predictions, key.direction, |p| key.value(p), |p| p.sample_id)
        .into_iter()
        .map(|i| predictions[i].sample_id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Side;

    fn pred(id: u64, logits: [f64; 2]) -> Prediction {
        Prediction::from_logits(id, logits, Side::Right)
    }

    #[test]
    fn singleton_and_empty() {
        assert_eq!(sort_predictions(&[pred(4, [0.0, 1.0])], SortKey::default()), vec![4]);
        assert!(sort_predictions(&[], SortKey::default()).is_empty());
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let preds = [pred(5, [0.0, 1.0]), pred(2, [0.0, 1.0]), pred(9, [0.0, 1.0])];
        assert_eq!(sort_predictions(&preds, SortKey::default()), vec![2, 5, 9]);
        let asc = SortKey {
            direction: Direction::Ascending,
            ..Default::default()
        };
        assert_eq!(sort_predictions(&preds, asc), vec![2, 5, 9]);
    }

    #[test]
    fn keys_select_neurons() {
        // right is the machine side; machine logit is logits[1]
        let preds = [pred(0, [3.0, 1.0]), pred(1, [-5.0, 0.5])];
        let logit_machine = SortKey {
            activation: Activation::Logit,
            ..Default::default()
        };
        // 0.5 > 1.0 is false, so id 0 (1.0) first
        assert_eq!(sort_predictions(&preds, logit_machine), vec![0, 1]);
        // softmax machine: id 1 has p ≈ 1, id 0 has p ≈ 0.12
        assert_eq!(sort_predictions(&preds, SortKey::default()), vec![1, 0]);
        let human = SortKey {
            neuron: Neuron::Human,
            ..Default::default()
        };
        assert_eq!(sort_predictions(&preds, human), vec![0, 1]);
    }
}
