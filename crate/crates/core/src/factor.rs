//! Dense discrete factors over integer-labelled variables.
//!
//! Values are stored row-major over the scope, which is kept sorted in
//! ascending variable order; the last variable varies fastest.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    let mut acc = 1;
    for i in (0..cards.len()).rev() {
        out[i] = acc;
        acc *= cards[i];
    }
    out
}

/// Advance a mixed-radix counter; returns false after wrapping past the end.
fn advance(digits: &mut [usize], cards: &[usize]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < cards[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    /// Builds a factor from a table laid out over `vars` in the given order
    /// (first variable most significant). `vars` must not repeat.
    pub fn from_table(vars: &[usize], cards: &[usize], values: Vec<f64>) -> Self {
        assert_eq!(vars.len(), cards.len());
        assert_eq!(values.len(), cards.iter().product::<usize>());
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by_key(|&i| vars[i]);
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return Factor {
                vars: vars.to_vec(),
                cards: cards.to_vec(),
                values,
            };
        }
        let sorted_vars: Vec<usize> = order.iter().map(|&i| vars[i]).collect();
        let sorted_cards: Vec<usize> = order.iter().map(|&i| cards[i]).collect();
        let src_strides = strides(cards);
        let mut out = vec![0.0; values.len()];
        let mut digits = vec![0; vars.len()];
        let mut k = 0;
        loop {
            let src: usize = digits
                .iter()
                .zip(&order)
                .map(|(&d, &o)| d * src_strides[o])
                .sum();
            out[k] = values[src];
            k += 1;
            if !advance(&mut digits, &sorted_cards) {
                break;
            }
        }
        Factor {
            vars: sorted_vars,
            cards: sorted_cards,
            values: out,
        }
    }

    /// Point mass on `state` for a single variable.
    pub fn indicator(var: usize, card: usize, state: usize) -> Self {
        let mut values = vec![0.0; card];
        values[state] = 1.0;
        Factor {
            vars: vec![var],
            cards: vec![card],
            values,
        }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.binary_search(&var).is_ok()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Value at a full assignment given in scope order.
    pub fn value_at(&self, assignment: &[usize]) -> f64 {
        let st = strides(&self.cards);
        let idx: usize = assignment.iter().zip(&st).map(|(a, s)| a * s).sum();
        self.values[idx]
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        for &v in &other.vars {
            if let Err(pos) = vars.binary_search(&v) {
                vars.insert(pos, v);
            }
        }
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.card_of(*v)
                    .or_else(|| other.card_of(*v))
                    .expect("variable in union")
            })
            .collect();
        let map_strides = |f: &Factor| -> Vec<usize> {
            let st = strides(&f.cards);
            vars.iter()
                .map(|v| match f.vars.binary_search(v) {
                    Ok(i) => st[i],
                    Err(_) => 0,
                })
                .collect()
        };
        let sa = map_strides(self);
        let sb = map_strides(other);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut digits = vec![0; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        loop {
            values.push(self.values[ia] * other.values[ib]);
            // incremental odometer keeping operand offsets in sync
            let mut i = vars.len();
            let mut done = true;
            while i > 0 {
                i -= 1;
                digits[i] += 1;
                ia += sa[i];
                ib += sb[i];
                if digits[i] < cards[i] {
                    done = false;
                    break;
                }
                ia -= sa[i] * cards[i];
                ib -= sb[i] * cards[i];
                digits[i] = 0;
            }
            if done {
                break;
            }
        }
        Factor {
            vars,
            cards,
            values,
        }
    }

    pub fn card_of(&self, var: usize) -> Option<usize> {
        self.vars.binary_search(&var).ok().map(|i| self.cards[i])
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor {
            vars,
            cards,
            values,
        }
    }

    /// Restricts `var` to `state` and drops it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor {
            vars,
            cards,
            values,
        }
    }

    /// Sums out every variable except `keep`.
    pub fn marginalize_to(&self, keep: &[usize]) -> Factor {
        let mut out = self.clone();
        for &v in &self.vars {
            if !keep.contains(&v) {
                out = out.sum_out(v);
            }
        }
        out
    }

    /// Divides by the largest entry and returns it (0 leaves the factor untouched).
    pub fn rescale(&mut self) -> f64 {
        let max = self.values.iter().copied().fold(0.0_f64, f64::max);
        if max > 0.0 {
            for v in &mut self.values {
                *v /= max;
            }
        }
        max
    }

    /// Scales entries to sum to one; returns the previous total.
    pub fn normalize(&mut self) -> f64 {
        let total = self.total();
        if total > 0.0 {
            for v in &mut self.values {
                *v /= total;
            }
        }
        total
    }
}
