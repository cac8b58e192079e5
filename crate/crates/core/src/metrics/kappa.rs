use crate::model::BehaviourClass;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KappaError {
    #[error("kappa needs at least one rated pair")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaResult {
    pub kappa: f64,
    /// Observed agreement.
    pub observed: f64,
    /// Agreement expected by chance from the two marginals.
    pub expected: f64,
    /// Set when chance agreement is 1 and kappa is defined by convention.
    pub degenerate: bool,
}

/// Cohen's kappa for two raters labelling the same items.
pub fn cohens_kappa(pairs: &[(BehaviourClass, BehaviourClass)]) -> Result<KappaResult, KappaError> {
    if pairs.is_empty() {
        return Err(KappaError::EmptyInput);
    }
    let n = pairs.len() as f64;
    let mut a = [0u64; BehaviourClass::COUNT];
    let mut b = [0u64; BehaviourClass::COUNT];
    let mut agree = 0u64;
    for (x, y) in pairs {
        a[x.index()] += 1;
        b[y.index()] += 1;
        agree += u64::from(x == y);
    }
    let observed = agree as f64 / n;
    let expected = a.iter().zip(&b).map(|(&ca, &cb)| ca as f64 * cb as f64).sum::<f64>() / (n * n);
    if expected == 1.0 {
        let perfect = observed == 1.0;
        return Ok(KappaResult {
            kappa: if perfect { 1.0 } else { 0.0 },
            observed,
            expected,
            degenerate: true,
        });
    }
    Ok(KappaResult {
        kappa: (observed - expected) / (1.0 - expected),
        observed,
        expected,
        degenerate: false,
    })
}
