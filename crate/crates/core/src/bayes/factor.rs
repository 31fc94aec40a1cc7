//! Dense factors over binary variables.

/// A non-negative function of a set of binary variables.
///
/// `vars` is sorted ascending; entry `i` of `values` corresponds to the
/// assignment where `vars[j]` takes bit `k - 1 - j` of `i`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    vars: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Factor {
            vars: Vec::new(),
            values: vec![value],
        }
    }

    #[cfg(test)]
    pub fn new(vars: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert!(vars.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(values.len(), 1 << vars.len());
        Factor { vars, values }
    }

    /// Family factor `P(child | parents)` from a CPT whose rows are indexed by
    /// `parents` in the given order (first parent most significant).
    pub fn from_cpt(child: usize, parents: &[usize], rows: &[f64]) -> Self {
        let mut vars: Vec<usize> = parents.iter().copied().chain([child]).collect();
        vars.sort_unstable();
        let k = vars.len();
        let pos = |v: usize| k - 1 - vars.iter().position(|&x| x == v).unwrap();
        let child_bit = pos(child);
        let parent_bits: Vec<usize> = parents.iter().map(|&p| pos(p)).collect();
        let values = (0..1usize << k)
            .map(|i| {
                let row = parent_bits
                    .iter()
                    .fold(0, |acc, &b| acc << 1 | (i >> b & 1));
                let p = rows[row];
                if i >> child_bit & 1 == 1 {
                    p
                } else {
                    1.0 - p
                }
            })
            .collect();
        Factor { vars, values }
    }

    pub fn unary(var: usize, v_not: f64, v_implied: f64) -> Self {
        Factor {
            vars: vec![var],
            values: vec![v_not, v_implied],
        }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn bit_of(&self, var: usize) -> Option<usize> {
        let k = self.vars.len();
        self.vars.iter().position(|&v| v == var).map(|p| k - 1 - p)
    }

    /// Fix `var` to `value` and drop it from the scope.
    pub fn restrict(&self, var: usize, value: bool) -> Factor {
        let Some(bit) = self.bit_of(var) else {
            return self.clone();
        };
        let vars: Vec<usize> = self.vars.iter().copied().filter(|&v| v != var).collect();
        let low_mask = (1usize << bit) - 1;
        let values = (0..1usize << vars.len())
            .map(|j| {
                let high = (j & !low_mask) << 1;
                let i = high | usize::from(value) << bit | (j & low_mask);
                self.values[i]
            })
            .collect();
        Factor { vars, values }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(bit) = self.bit_of(var) else {
            return self.clone();
        };
        let vars: Vec<usize> = self.vars.iter().copied().filter(|&v| v != var).collect();
        let low_mask = (1usize << bit) - 1;
        let values = (0..1usize << vars.len())
            .map(|j| {
                let base = (j & !low_mask) << 1 | (j & low_mask);
                self.values[base] + self.values[base | 1 << bit]
            })
            .collect();
        Factor { vars, values }
    }

    /// Sum out every variable not in `keep`.
    pub fn marginalize_to(&self, keep: &[usize]) -> Factor {
        let drop: Vec<usize> = self
            .vars
            .iter()
            .copied()
            .filter(|v| !keep.contains(v))
            .collect();
        drop.into_iter().fold(self.clone(), |f, v| f.sum_out(v))
    }

    pub fn product(&self, other: &Factor) -> Factor {
        if self.vars.is_empty() {
            return other.scale(self.values[0]);
        }
        if other.vars.is_empty() {
            return self.scale(other.values[0]);
        }
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        let k = vars.len();
        // for each result bit, where it lands in each operand (if at all)
        let map = |f: &Factor| -> Vec<(usize, usize)> {
            vars.iter()
                .enumerate()
                .filter_map(|(p, &v)| f.bit_of(v).map(|b| (k - 1 - p, b)))
                .collect()
        };
        let map_a = map(self);
        let map_b = map(other);
        let project = |i: usize, m: &[(usize, usize)]| {
            m.iter()
                .fold(0, |acc, &(from, to)| acc | (i >> from & 1) << to)
        };
        let values = (0..1usize << k)
            .map(|i| self.values[project(i, &map_a)] * other.values[project(i, &map_b)])
            .collect();
        Factor { vars, values }
    }

    pub fn scale(&self, c: f64) -> Factor {
        Factor {
            vars: self.vars.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    #[cfg(test)]
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub(crate) fn product_all<'a>(factors: impl IntoIterator<Item = &'a Factor>) -> Factor {
    factors
        .into_iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cpt_factor_layout() {
        // child 0 with parent 1; P(child | parent=0) = 0.2, P(child | parent=1) = 0.8
        let f = Factor::from_cpt(0, &[1], &[0.2, 0.8]);
        assert_eq!(f.vars(), &[0, 1]);
        // index bits: var0 is the high bit, var1 the low bit
        assert_eq!(f.values(), &[0.8, 1.0 - 0.8, 0.2, 0.8]);
    }

    #[test]
    fn cpt_respects_parent_order() {
        // rows indexed (p2, p1) with p2 most significant
        let f = Factor::from_cpt(0, &[2, 1], &[0.1, 0.2, 0.3, 0.4]);
        let implied = f.restrict(0, true);
        // implied has vars [1, 2]: index = p1 << 1 | p2
        assert_eq!(implied.values(), &[0.1, 0.3, 0.2, 0.4]);
    }

    #[test]
    fn product_then_sum_out() {
        let a = Factor::unary(3, 0.8, 0.2);
        let b = Factor::from_cpt(5, &[3], &[0.2, 0.8]);
        let joint = a.product(&b);
        assert_eq!(joint.vars(), &[3, 5]);
        let m = joint.sum_out(3);
        assert!((m.values()[1] - (0.8 * 0.2 + 0.2 * 0.8)).abs() < 1e-15);
        assert!((joint.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn restrict_middle_variable() {
        let f = Factor::new(vec![0, 1, 2], (0..8).map(f64::from).collect());
        let r = f.restrict(1, true);
        assert_eq!(r.vars(), &[0, 2]);
        assert_eq!(r.values(), &[2.0, 3.0, 6.0, 7.0]);
        let s = f.sum_out(1);
        assert_eq!(s.values(), &[2.0, 4.0, 10.0, 12.0]);
    }
}
