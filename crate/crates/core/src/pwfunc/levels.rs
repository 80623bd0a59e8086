use serde::{Deserialize, Serialize};

/// Log-levels stored as integer multiples of a fixed step; `None` is −∞.
///
/// Concavity is decided on the integer codes, never on floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerCodedLevels {
    pub codes: Vec<Option<i64>>,
    /// Real value of one code unit (ε/k).
    pub step: f64,
}

impl IntegerCodedLevels {
    pub fn new(codes: Vec<Option<i64>>, step: f64) -> Self {
        Self { codes, step }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Index range `l..=r` of finite entries, if any.
    pub fn finite_span(&self) -> Option<(usize, usize)> {
        let l = self.codes.iter().position(Option::is_some)?;
        let r = self.codes.iter().rposition(Option::is_some)?;
        Some((l, r))
    }

    /// The finite codes between the first and last finite entries.
    pub fn finite_codes(&self) -> Vec<i64> {
        match self.finite_span() {
            Some((l, r)) => self.codes[l..=r].iter().map(|c| c.unwrap_or(i64::MIN)).collect(),
            None => Vec::new(),
        }
    }

    pub fn is_log_concave(&self) -> bool {
        check_log_concave(self)
    }
}

/// True iff the finite codes form one contiguous block whose consecutive
/// differences are non-increasing.
pub fn check_log_concave(levels: &IntegerCodedLevels) -> bool {
    let Some((l, r)) = levels.finite_span() else {
        return true;
    };
    let block = &levels.codes[l..=r];
    if block.iter().any(Option::is_none) {
        return false;
    }
    let vals: Vec<i128> = block.iter().map(|c| c.expect("checked") as i128).collect();
    vals.windows(3).all(|w| w[2] - w[1] <= w[1] - w[0])
}
