use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Integer parameters of a split tree: branch factor `b`, items kept by an
/// internal node `s0`, items forced into each child on overflow `s1`, and
/// leaf capacity `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitParams {
    pub b: usize,
    pub s0: usize,
    pub s1: usize,
    pub s: usize,
}

impl SplitParams {
    pub fn new(b: usize, s0: usize, s1: usize, s: usize) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidParams(format!("branch factor b={b} must be at least 2")));
        }
        if s0 > s + 1 || b * s1 > s + 1 - s0 {
            return Err(Error::InvalidParams(format!("need b*s1 <= s+1-s0, got b={b} s0={s0} s1={s1} s={s}")));
        }
        if s == 0 && s0 == 0 {
            return Err(Error::InvalidParams("s=0 with s0=0: no node can hold an item".into()));
        }
        Ok(SplitParams { b, s0, s1, s })
    }

    /// Number of items that are distributed by the multinomial part of a
    /// split of a node holding `n` items.
    pub fn free_items(&self, n: u64) -> u64 {
        n - (self.s0 + self.b * self.s1) as u64
    }
}

/// One realisation of the split vector: `b` probabilities summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitVectorDraw(Vec<f64>);

pub(crate) const DRAW_SUM_TOL: f64 = 1e-12;

impl SplitVectorDraw {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        check_components(&components)?;
        Ok(SplitVectorDraw(components))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn check_components(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidDraw("empty vector".into()));
    }
    if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidDraw(format!("component {x} outside [0,1]")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > DRAW_SUM_TOL {
        return Err(Error::InvalidDraw(format!("components sum to {sum}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_paper_presets() {
        assert!(SplitParams::new(2, 1, 0, 1).is_ok());
        assert!(SplitParams::new(2, 0, 0, 1).is_ok());
        assert!(SplitParams::new(5, 1, 0, 4).is_ok());
        assert!(SplitParams::new(3, 0, 1, 2).is_ok());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SplitParams::new(1, 1, 0, 1).is_err());
        assert!(SplitParams::new(2, 3, 0, 1).is_err());
        assert!(SplitParams::new(2, 1, 1, 1).is_err());
        assert!(SplitParams::new(2, 0, 0, 0).is_err());
    }

    #[test]
    fn draw_validation() {
        assert!(SplitVectorDraw::new(vec![0.25, 0.75]).is_ok());
        assert!(SplitVectorDraw::new(vec![0.5, 0.6]).is_err());
        assert!(SplitVectorDraw::new(vec![-0.1, 1.1]).is_err());
        assert!(SplitVectorDraw::new(vec![]).is_err());
    }
}
