//! Softmax, the classification and similarity objectives, and cosine similarity.

use serde::Serialize;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;
/// Floor on `|m - s|` inside the similarity loss.
pub const SIMILARITY_EPS: f64 = 1e-4;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Binary cross-entropy for one example. `p_one` is P(y = 1).
pub fn cross_entropy(p_one: f64, y: usize) -> f64 {
    let p = clamp_probability(p_one);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Target cosine score: +1 for coreferent pairs (y = 0), -1 otherwise.
pub fn similarity_margin(y: usize) -> f64 {
    if y == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `ln max(|m - s|, eps)` for one example.
pub fn similarity_loss(s: f64, y: usize) -> f64 {
    (similarity_margin(y) - s).abs().max(SIMILARITY_EPS).ln()
}

/// d/ds of [`similarity_loss`]; zero inside the clamped region.
pub fn similarity_loss_grad(s: f64, y: usize) -> f64 {
    let m = similarity_margin(y);
    let gap = (m - s).abs();
    if gap <= SIMILARITY_EPS {
        0.0
    } else {
        // d/ds ln|m - s| = -1 / (m - s)
        -1.0 / (m - s)
    }
}

pub fn total_loss(l1: f64, l2: f64) -> f64 {
    l1 + l2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossValues {
    /// Mean cross-entropy of the classifier.
    pub l1: f64,
    /// Summed similarity loss of the scorer.
    pub l2: f64,
    pub l_all: f64,
}

impl LossValues {
    pub fn new(l1: f64, l2: f64) -> Self {
        Self {
            l1,
            l2,
            l_all: total_loss(l1, l2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cosine {
    pub value: f64,
    /// Set when either input had zero norm; `value` is then 0.
    pub degenerate: bool,
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Cosine {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu2: f64 = u.iter().map(|a| a * a).sum();
    let nv2: f64 = v.iter().map(|a| a * a).sum();
    if nu2 == 0.0 || nv2 == 0.0 {
        return Cosine {
            value: 0.0,
            degenerate: true,
        };
    }
    Cosine {
        // sqrt(n * n) == n, so identical inputs give exactly 1.
        value: (dot / (nu2 * nv2).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// Gradients of cos(u, v) scaled by `ds`, returned as (du, dv).
pub(crate) fn cosine_backward(u: &[f64], v: &[f64], cos: Cosine, ds: f64) -> (Vec<f64>, Vec<f64>) {
    if cos.degenerate || ds == 0.0 {
        return (vec![0.0; u.len()], vec![0.0; v.len()]);
    }
    let nu2: f64 = u.iter().map(|a| a * a).sum();
    let nv2: f64 = v.iter().map(|a| a * a).sum();
    let inv = 1.0 / (nu2 * nv2).sqrt();
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let s = dot * inv;
    let du = u
        .iter()
        .zip(v)
        .map(|(a, b)| ds * (b * inv - s * a / nu2))
        .collect();
    let dv = v
        .iter()
        .zip(u)
        .map(|(b, a)| ds * (a * inv - s * b / nv2))
        .collect();
    (du, dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        for c in [-50.0, 0.0, 3.25, 700.0] {
            let p = softmax(&[c, c, c]);
            for x in p {
                assert!((x - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] < 1e-300);
    }

    #[test]
    fn cross_entropy_cases() {
        assert!((cross_entropy(0.5, 0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((cross_entropy(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        // y = 0, P(y=1) = 0.25: -ln 0.75
        assert!((cross_entropy(0.25, 0) - 0.287_682_072_451_780_9).abs() < 1e-15);
        assert!(cross_entropy(1.0, 1) < 1.1e-7);
        assert!(cross_entropy(0.0, 1).is_finite());
    }

    #[test]
    fn similarity_loss_cases() {
        assert_eq!(similarity_loss(0.0, 0), 0.0);
        assert!((similarity_loss(0.9, 0) - (-2.302_585_092_994_045_5)).abs() < 1e-12);
        assert!((similarity_loss(1.0, 0) - (-9.210_340_371_976_182)).abs() < 1e-12);
        assert!((similarity_loss(-1.0, 1) - (1e-4f64).ln()).abs() < 1e-15);
        assert_eq!(similarity_loss_grad(1.0, 0), 0.0);
    }

    #[test]
    fn total_loss_cases() {
        assert_eq!(total_loss(0.5, -1.0), -0.5);
        assert_eq!(total_loss(0.0, 0.0), 0.0);
        let batch = LossValues::new(0.75, -2.5);
        assert_eq!(batch.l_all, -1.75);
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).value, 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).value, 0.0);
        assert_eq!(cosine_similarity(&[1.0, -2.0], &[-1.0, 2.0]).value, -1.0);
        let z = cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]);
        assert!(z.degenerate);
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn cosine_gradient_matches_finite_differences() {
        let u = [0.3, -1.2, 0.7];
        let v = [1.1, 0.4, -0.5];
        let c = cosine_similarity(&u, &v);
        let (du, dv) = cosine_backward(&u, &v, c, 1.0);
        let h = 1e-6;
        for i in 0..3 {
            let mut up = u;
            let mut um = u;
            up[i] += h;
            um[i] -= h;
            let num =
                (cosine_similarity(&up, &v).value - cosine_similarity(&um, &v).value) / (2.0 * h);
            assert!((num - du[i]).abs() < 1e-8);
            let mut vp = v;
            let mut vm = v;
            vp[i] += h;
            vm[i] -= h;
            let num =
                (cosine_similarity(&u, &vp).value - cosine_similarity(&u, &vm).value) / (2.0 * h);
            assert!((num - dv[i]).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in prop::collection::vec(-300.0f64..300.0, 1..8), c in -100.0f64..100.0) {
            let p = softmax(&logits);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = logits.iter().map(|x| x + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn cross_entropy_nonnegative(p in 0.0f64..=1.0, y in 0usize..2) {
            prop_assert!(cross_entropy(p, y) >= 0.0);
        }

        #[test]
        fn similarity_loss_bounded_and_monotone(s in -1.0f64..=1.0, t in -1.0f64..=1.0, y in 0usize..2) {
            let l = similarity_loss(s, y);
            prop_assert!(l >= SIMILARITY_EPS.ln() - 1e-15);
            prop_assert!(l <= 2f64.ln() + 1e-15);
            let m = similarity_margin(y);
            let (near, far) = if (m - s).abs() <= (m - t).abs() { (s, t) } else { (t, s) };
            prop_assert!(similarity_loss(near, y) <= similarity_loss(far, y));
        }

        #[test]
        fn cosine_is_scale_invariant(
            u in prop::collection::vec(-5.0f64..5.0, 3),
            v in prop::collection::vec(-5.0f64..5.0, 3),
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            let c = cosine_similarity(&u, &v);
            prop_assume!(!c.degenerate);
            let us: Vec<f64> = u.iter().map(|x| x * a).collect();
            let vs: Vec<f64> = v.iter().map(|x| x * b).collect();
            let cs = cosine_similarity(&us, &vs);
            prop_assert!((c.value - cs.value).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c.value));
        }
    }
}
