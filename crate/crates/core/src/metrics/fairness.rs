use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessStats {
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub gini: f64,
    /// Distinct counts ascending with the fraction of participants at or below each.
    pub cdf: Vec<(u64, f64)>,
}

impl FairnessStats {
    /// CSV block with header `count,cdf`.
    pub fn cdf_csv(&self) -> String {
        let mut out = String::from("count,cdf\n");
        for (c, f) in &self.cdf {
            out.push_str(&format!("{c},{f}\n"));
        }
        out
    }
}

pub fn fairness_stats(counts: &[u64]) -> FairnessStats {
    if counts.is_empty() {
        return FairnessStats {
            mean: 0.0,
            variance: 0.0,
            gini: 0.0,
            cdf: Vec::new(),
        };
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let variance = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;

    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    // Sorted-rank form of Σ_i Σ_j |x_i − x_j| / (2 n² mean).
    let gini = if mean == 0.0 {
        0.0
    } else {
        let weighted: f64 = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x as f64)
            .sum();
        weighted / (n * n * mean)
    };

    let mut cdf = Vec::new();
    for (i, &c) in sorted.iter().enumerate() {
        if sorted.get(i + 1) != Some(&c) {
            cdf.push((c, (i + 1) as f64 / n));
        }
    }
    FairnessStats {
        mean,
        variance,
        gini,
        cdf,
    }
}
