//! Closed-form Shapley attribution for the linear (logistic) model in
//! log-odds space: phi_j = w_j (x_j - mu_j), base = w . mu + b. Exact for
//! a linear function of independent players.

use super::Attribution;
use crate::error::{Error, Result};
use crate::models::{LogisticModel, OutputSpace};

pub fn shap_linear(
    model: &LogisticModel,
    patient_id: &str,
    row: &[f64],
    background_means: &[f64],
) -> Result<Attribution> {
    let p = model.weights.len();
    if row.len() != p || background_means.len() != p {
        return Err(Error::config(format!(
            "shap_linear: dimension mismatch (weights {p}, row {}, background {})",
            row.len(),
            background_means.len()
        )));
    }
    let phi: Vec<f64> = model
        .weights
        .iter()
        .zip(row.iter().zip(background_means))
        .map(|(w, (x, mu))| w * (x - mu))
        .collect();
    let base_value = model.intercept
        + model
            .weights
            .iter()
            .zip(background_means)
            .map(|(w, mu)| w * mu)
            .sum::<f64>();
    Ok(Attribution {
        patient_id: patient_id.to_string(),
        base_value,
        phi,
        output_space: OutputSpace::LogOdds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(weights: Vec<f64>, intercept: f64) -> LogisticModel {
        LogisticModel {
            weights,
            intercept,
            l2_lambda: 0.0,
            loss_trace: vec![],
        }
    }

    #[test]
    fn at_background_mean_phi_is_zero() {
        let m = model(vec![2.0, -1.0], 0.3);
        let mu = [1.0, 3.0];
        let a = shap_linear(&m, "p", &mu, &mu).unwrap();
        assert_eq!(a.phi, vec![0.0, 0.0]);
        assert_eq!(a.base_value, m.margin_row(&mu));
    }

    #[test]
    fn hand_computed_example() {
        let m = model(vec![2.0, 0.0], 0.0);
        let a = shap_linear(&m, "p", &[1.5, 7.0], &[1.0, 3.0]).unwrap();
        assert_eq!(a.phi, vec![1.0, 0.0]);
    }

    #[test]
    fn phi_sums_to_margin_difference_exactly() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let p = rng.random_range(1..8);
            let w: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let mu: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let m = model(w.clone(), rng.random::<f64>());
            let a = shap_linear(&m, "p", &x, &mu).unwrap();
            let lhs: f64 = a.phi.iter().sum();
            let rhs: f64 = w.iter().zip(x.iter().zip(&mu)).map(|(w, (x, mu))| w * x - w * mu).sum();
            assert!((lhs - rhs).abs() < 1e-12);
            assert!(a.local_accuracy_residual(m.margin_row(&x)) < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = model(vec![1.0, 2.0], 0.0);
        assert!(shap_linear(&m, "p", &[1.0], &[0.0, 0.0]).is_err());
    }
}
