use serde::{Deserialize, Serialize};

/// `(1 + β²)PR / (β²P + R)`, and 0 when both are 0. `p` and `r` must be
/// in the same unit (fractions or percentages); the result uses it too.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * p + r;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / den
    }
}

/// Edit counts behind precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditCounts {
    pub matched: usize,
    pub proposed: usize,
    pub gold: usize,
}

impl EditCounts {
    /// 1 when nothing was proposed.
    pub fn precision(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.matched as f64 / self.proposed as f64
        }
    }

    /// 1 when there is nothing to find.
    pub fn recall(&self) -> f64 {
        if self.gold == 0 {
            1.0
        } else {
            self.matched as f64 / self.gold as f64
        }
    }

    pub fn f(&self, beta: f64) -> f64 {
        f_beta(self.precision(), self.recall(), beta)
    }
}

impl std::ops::AddAssign for EditCounts {
    fn add_assign(&mut self, o: Self) {
        self.matched += o.matched;
        self.proposed += o.proposed;
        self.gold += o.gold;
    }
}

impl std::iter::Sum for EditCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |mut a, b| {
            a += b;
            a
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_precision_and_recall() {
        for x in [0.1, 0.5, 37.0] {
            for beta in [0.5, 1.0, 2.0] {
                assert!((f_beta(x, x, beta) - x).abs() < 1e-12);
            }
        }
        assert_eq!(f_beta(0.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn empty_conventions() {
        let c = EditCounts {
            matched: 0,
            proposed: 0,
            gold: 3,
        };
        assert_eq!((c.precision(), c.recall()), (1.0, 0.0));
        assert_eq!(c.f(0.5), 0.0);
    }
}
