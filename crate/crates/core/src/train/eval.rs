use crate::error::{Error, Result};
use crate::model::FtpModel;
use crate::prompt::PromptSet;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub top1: f64,
    pub top5: f64,
    /// Top-1 per class; NaN for classes absent from the split.
    pub per_class: Vec<f64>,
    pub samples: usize,
}

/// Rank of the true class among all classes; ties go to the lower class
/// index, as with a first-maximum argmax.
fn rank_of(probs: &[f32], label: usize) -> usize {
    let p = probs[label];
    probs
        .iter()
        .enumerate()
        .filter(|&(i, &q)| q > p || (q == p && i < label))
        .count()
}

pub fn evaluate(model: &FtpModel, maps: &[Tensor], labels: &[usize], prompts: PromptSet) -> Result<Metrics> {
    if maps.len() != labels.len() || maps.is_empty() {
        return Err(Error::Contract(format!(
            "evaluate: {} maps for {} labels",
            maps.len(),
            labels.len()
        )));
    }
    let c = model.config.classes;
    let mut hit1 = 0usize;
    let mut hit5 = 0usize;
    let mut class_hits = vec![0usize; c];
    let mut class_n = vec![0usize; c];
    for (m, &y) in maps.iter().zip(labels) {
        if y >= c {
            return Err(Error::Shape(format!("label {y} out of range for {c} classes")));
        }
        let p = model.probabilities(m, prompts)?;
        let r = rank_of(p.data(), y);
        class_n[y] += 1;
        if r == 0 {
            hit1 += 1;
            class_hits[y] += 1;
        }
        if r < 5 {
            hit5 += 1;
        }
    }
    let n = labels.len() as f64;
    Ok(Metrics {
        top1: hit1 as f64 / n,
        top5: hit5 as f64 / n,
        per_class: class_hits
            .iter()
            .zip(&class_n)
            .map(|(&h, &k)| if k == 0 { f64::NAN } else { h as f64 / k as f64 })
            .collect(),
        samples: labels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_lower_index() {
        assert_eq!(rank_of(&[0.25, 0.25, 0.5], 0), 1);
        assert_eq!(rank_of(&[0.25, 0.25, 0.5], 1), 2);
        assert_eq!(rank_of(&[0.5, 0.5], 1), 1);
        assert_eq!(rank_of(&[0.5, 0.5], 0), 0);
    }
}
