use serde::Serialize;

use super::partition::{Coalition, PseudonymityPartition};
use super::AdversaryError;

/// Giant-class security summary of a partition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecurityReport {
    pub n: usize,
    pub coalition_size: usize,
    pub giant_class_size: usize,
    /// Users outside the giant class.
    pub residue: usize,
    /// Largest `ε` with `residue <= n^(1-ε)`.
    pub epsilon_star: f64,
    pub epsilon: Option<f64>,
    /// `secure_at(epsilon)` when an `epsilon` was supplied.
    pub secure: Option<bool>,
}

impl SecurityReport {
    pub fn secure_at(&self, epsilon: f64) -> bool {
        self.residue as f64 <= (self.n as f64).powf(1.0 - epsilon)
    }
}

/// Largest `ε` with `residue <= n^(1-ε)`. A residue of zero is treated as
/// one, so the value is capped at 1.
pub(crate) fn epsilon_star(n: usize, residue: usize) -> f64 {
    1.0 - (residue.max(1) as f64).ln() / (n as f64).ln()
}

/// Takes the largest class as the giant class and measures what is left.
pub fn security_margin(
    partition: &PseudonymityPartition,
    coalition: &Coalition,
    epsilon: Option<f64>,
) -> Result<SecurityReport, AdversaryError> {
    if partition.all_singletons() {
        return Err(AdversaryError::DegeneratePartition);
    }
    if let Some(&u) = coalition
        .members()
        .iter()
        .find(|&&u| u >= partition.num_users())
    {
        return Err(AdversaryError::NoSuchUser(u));
    }
    let n = partition.num_users();
    let giant = partition.largest_class().len();
    let residue = n - giant;
    let mut report = SecurityReport {
        n,
        coalition_size: coalition.len(),
        giant_class_size: giant,
        residue,
        epsilon_star: epsilon_star(n, residue),
        epsilon,
        secure: None,
    };
    report.secure = epsilon.map(|e| report.secure_at(e));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{analytic_coalition, Provenance};
    use crate::algebra::Field;
    use crate::geometry::{build_pg2, build_w3};
    use crate::upir::{Protocol, UpirSystem};

    #[test]
    fn w3_5_single_eavesdropper() {
        let gq = build_w3(&Field::new(5).unwrap()).unwrap();
        let sys = UpirSystem::new(gq.structure().clone()).unwrap();
        let c = Coalition::new([0], sys.num_users()).unwrap();
        let p = analytic_coalition(&sys, Some(&gq), &c, Protocol::Encrypted).unwrap();
        let r = security_margin(&p, &c, Some(0.3)).unwrap();
        assert_eq!((r.n, r.giant_class_size, r.residue), (156, 125, 31));
        // 1 - ln 31 / ln 156
        assert!(
            (r.epsilon_star - 0.319_983).abs() < 1e-5,
            "{}",
            r.epsilon_star
        );
        assert_eq!(r.secure, Some(true));
        assert!(!r.secure_at(0.33));
        assert!(r.residue >= r.coalition_size);
    }

    #[test]
    fn plane_is_degenerate() {
        let sys = UpirSystem::new(build_pg2(&Field::new(3).unwrap()).unwrap()).unwrap();
        let c = Coalition::new([4], sys.num_users()).unwrap();
        let p = analytic_coalition(&sys, None, &c, Protocol::Plaintext).unwrap();
        assert_eq!(
            security_margin(&p, &c, None),
            Err(AdversaryError::DegeneratePartition)
        );
    }

    #[test]
    fn giant_plus_residue_is_n() {
        let p = PseudonymityPartition::from_keys(vec![0, 1, 1, 2, 1, 0], Provenance::Empirical);
        let c = Coalition::new([3], 6).unwrap();
        let r = security_margin(&p, &c, None).unwrap();
        assert_eq!(r.giant_class_size + r.residue, r.n);
        assert_eq!(r.giant_class_size, 3);
        assert_eq!(r.secure, None);
    }
}
