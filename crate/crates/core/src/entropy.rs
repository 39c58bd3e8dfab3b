//! Order-q conditional empirical entropy with incremental updates.
//!
//! Contexts wrap around the end of the sequence, so every position contributes
//! exactly one `(context, symbol)` count. The coding length
//! `N·H_q = Σ_u n(u) log n(u) − Σ_{u,a} n(u,a) log n(u,a)` is kept as a
//! compensated running sum, which makes single-symbol changes cost O(q).

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dense tables are used while the number of contexts stays at or below this.
pub const DENSE_CONTEXT_LIMIT: u64 = 4096;

/// `max(1, ⌈½·log_A N⌉)`, clamped below `N`.
pub fn default_order(len: usize, alphabet: usize) -> usize {
    if len <= 1 {
        return 0;
    }
    let q = if alphabet <= 1 {
        1
    } else {
        let q = (0.5 * (len as f64).ln() / (alphabet as f64).ln()).ceil();
        (q as usize).max(1)
    };
    q.min(len - 1)
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone)]
enum CountStore {
    Dense {
        joint: Vec<u32>,
        context: Vec<u32>,
    },
    Sparse {
        joint: HashMap<u64, u32>,
        context: HashMap<u64, u32>,
    },
}

impl CountStore {
    /// Adds `step` (±1) to a joint cell and returns the previous count.
    fn bump_joint(&mut self, key: u64, step: i32) -> u32 {
        match self {
            CountStore::Dense { joint, .. } => bump(&mut joint[key as usize], step),
            CountStore::Sparse { joint, .. } => bump_sparse(joint, key, step),
        }
    }

    fn bump_context(&mut self, key: u64, step: i32) -> u32 {
        match self {
            CountStore::Dense { context, .. } => bump(&mut context[key as usize], step),
            CountStore::Sparse { context, .. } => bump_sparse(context, key, step),
        }
    }

    fn joint(&self, key: u64) -> u32 {
        match self {
            CountStore::Dense { joint, .. } => joint[key as usize],
            CountStore::Sparse { joint, .. } => joint.get(&key).copied().unwrap_or(0),
        }
    }

    fn context(&self, key: u64) -> u32 {
        match self {
            CountStore::Dense { context, .. } => context[key as usize],
            CountStore::Sparse { context, .. } => context.get(&key).copied().unwrap_or(0),
        }
    }
}

fn bump(cell: &mut u32, step: i32) -> u32 {
    let old = *cell;
    *cell = old
        .checked_add_signed(step)
        .expect("context count underflow");
    old
}

fn bump_sparse(map: &mut HashMap<u64, u32>, key: u64, step: i32) -> u32 {
    let cell = map.entry(key).or_insert(0);
    let old = bump(cell, step);
    if *cell == 0 {
        map.remove(&key);
    }
    old
}

/// Joint and context occurrence counts of a symbol sequence.
#[derive(Debug, Clone)]
pub struct ContextCounts {
    order: usize,
    alphabet: usize,
    len: usize,
    /// `A^k` for `k = 0..=order`.
    powers: Vec<u64>,
    /// `n log2 n` for `n = 0..=len`.
    nlogn: Vec<f64>,
    store: CountStore,
    coding_bits: Compensated,
}

impl ContextCounts {
    /// Counts every `(context, symbol)` pair of `symbols` with circular
    /// order-`order` contexts over an alphabet of `alphabet` symbols.
    pub fn build(symbols: &[usize], order: usize, alphabet: usize) -> Result<Self> {
        let len = symbols.len();
        if len == 0 {
            return Err(Error::invalid("empty symbol sequence"));
        }
        if order >= len {
            return Err(Error::invalid(format!(
                "order {order} must be below length {len}"
            )));
        }
        if alphabet == 0 {
            return Err(Error::invalid("alphabet must be nonempty"));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s >= alphabet) {
            return Err(Error::invalid(format!(
                "symbol {s} outside alphabet of {alphabet}"
            )));
        }
        let a = alphabet as u64;
        let mut powers = Vec::with_capacity(order + 1);
        let mut p = 1u64;
        powers.push(p);
        for _ in 0..order {
            p = p.checked_mul(a).ok_or_else(|| {
                Error::invalid(format!("alphabet {alphabet}^{order} contexts overflow"))
            })?;
            powers.push(p);
        }
        let contexts = p;
        contexts.checked_mul(a).ok_or_else(|| {
            Error::invalid(format!("alphabet {alphabet}^{} cells overflow", order + 1))
        })?;
        let store = if contexts <= DENSE_CONTEXT_LIMIT {
            CountStore::Dense {
                joint: vec![0; (contexts * a) as usize],
                context: vec![0; contexts as usize],
            }
        } else {
            CountStore::Sparse {
                joint: HashMap::new(),
                context: HashMap::new(),
            }
        };
        let nlogn = (0..=len)
            .map(|n| {
                if n == 0 {
                    0.0
                } else {
                    n as f64 * (n as f64).log2()
                }
            })
            .collect();
        let mut counts = ContextCounts {
            order,
            alphabet,
            len,
            powers,
            nlogn,
            store,
            coding_bits: Compensated::default(),
        };
        counts.fill(symbols);
        Ok(counts)
    }

    fn fill(&mut self, symbols: &[usize]) {
        for i in 0..self.len {
            let ctx = self.context_key(symbols, i);
            self.store
                .bump_joint(ctx * self.alphabet as u64 + symbols[i] as u64, 1);
            self.store.bump_context(ctx, 1);
        }
        self.coding_bits = Compensated::default();
        let mut acc = Compensated::default();
        match &self.store {
            CountStore::Dense { joint, context } => {
                for &n in context {
                    acc.add(self.nlogn[n as usize]);
                }
                for &n in joint {
                    acc.add(-self.nlogn[n as usize]);
                }
            }
            CountStore::Sparse { joint, context } => {
                let mut ctx: Vec<_> = context.iter().collect();
                ctx.sort_unstable();
                for (_, &n) in ctx {
                    acc.add(self.nlogn[n as usize]);
                }
                let mut jt: Vec<_> = joint.iter().collect();
                jt.sort_unstable();
                for (_, &n) in jt {
                    acc.add(-self.nlogn[n as usize]);
                }
            }
        }
        self.coding_bits = acc;
    }

    /// Rebuilds all counts from `symbols`, discarding accumulated rounding.
    pub fn refresh(&mut self, symbols: &[usize]) {
        debug_assert_eq!(symbols.len(), self.len);
        self.store = match &self.store {
            CountStore::Dense { joint, context } => CountStore::Dense {
                joint: vec![0; joint.len()],
                context: vec![0; context.len()],
            },
            CountStore::Sparse { .. } => CountStore::Sparse {
                joint: HashMap::new(),
                context: HashMap::new(),
            },
        };
        self.fill(symbols);
    }

    fn context_key(&self, symbols: &[usize], pos: usize) -> u64 {
        let n = self.len;
        (1..=self.order)
            .map(|k| symbols[(pos + n - k) % n] as u64 * self.powers[k - 1])
            .sum()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Occurrences of `symbol` after the context given oldest-first.
    pub fn joint_count(&self, context: &[usize], symbol: usize) -> u32 {
        let key = self.key_of(context);
        self.store.joint(key * self.alphabet as u64 + symbol as u64)
    }

    pub fn context_count(&self, context: &[usize]) -> u32 {
        self.store.context(self.key_of(context))
    }

    fn key_of(&self, context: &[usize]) -> u64 {
        assert_eq!(
            context.len(),
            self.order,
            "context length must equal the order"
        );
        // context[0] is the oldest symbol, i.e. lag `order`.
        context
            .iter()
            .enumerate()
            .map(|(j, &s)| s as u64 * self.powers[self.order - 1 - j])
            .sum()
    }

    /// Total number of counted positions (always the sequence length).
    pub fn total(&self) -> u64 {
        match &self.store {
            CountStore::Dense { joint, .. } => joint.iter().map(|&c| c as u64).sum(),
            CountStore::Sparse { joint, .. } => joint.values().map(|&c| c as u64).sum(),
        }
    }

    /// `N·H_q` in bits.
    pub fn coding_bits(&self) -> f64 {
        self.coding_bits.value().max(0.0)
    }

    /// Conditional empirical entropy in bits per symbol.
    pub fn h_q(&self) -> f64 {
        self.coding_bits() / self.len as f64
    }

    fn check_position(&self, symbols: &[usize], pos: usize, new_symbol: usize) -> Result<()> {
        if pos >= self.len || symbols.len() != self.len {
            return Err(Error::invalid(format!(
                "position {pos} out of range for length {}",
                self.len
            )));
        }
        if new_symbol >= self.alphabet {
            return Err(Error::invalid(format!(
                "symbol {new_symbol} outside alphabet of {}",
                self.alphabet
            )));
        }
        Ok(())
    }

    /// Applies a ±1 step to one `(context, symbol)` cell and returns the
    /// change in coding bits.
    fn step(&mut self, ctx: u64, symbol: usize, step: i32) -> f64 {
        let a = self.alphabet as u64;
        let j = self.store.bump_joint(ctx * a + symbol as u64, step) as usize;
        let c = self.store.bump_context(ctx, step) as usize;
        let (j2, c2) = if step > 0 {
            (j + 1, c + 1)
        } else {
            (j - 1, c - 1)
        };
        (self.nlogn[c2] - self.nlogn[c]) - (self.nlogn[j2] - self.nlogn[j])
    }

    /// Affected cells for a change at `pos`: the context of `pos` itself and,
    /// for each lag `d = 1..=q`, the context of `pos + d` with the symbol at
    /// `pos` removed, together with that position's own symbol.
    fn affected(&self, symbols: &[usize], pos: usize) -> (u64, Vec<(u64, usize, u64)>) {
        let n = self.len;
        let own = self.context_key(symbols, pos);
        let old = symbols[pos] as u64;
        let later = (1..=self.order)
            .map(|d| {
                let j = (pos + d) % n;
                let weight = self.powers[d - 1];
                (
                    self.context_key(symbols, j) - old * weight,
                    symbols[j],
                    weight,
                )
            })
            .collect();
        (own, later)
    }

    /// Writes into `out[a]` the coding bits that would result from setting
    /// `symbols[pos] = a`, for every symbol `a`. Counts are left unchanged.
    pub fn candidate_bits(&mut self, symbols: &[usize], pos: usize, out: &mut [f64]) {
        self.candidate_bits_where(symbols, pos, out, |_| true);
    }

    /// Like [`ContextCounts::candidate_bits`] but only for symbols accepted
    /// by `keep`; other entries of `out` are left untouched.
    pub fn candidate_bits_where(
        &mut self,
        symbols: &[usize],
        pos: usize,
        out: &mut [f64],
        keep: impl Fn(usize) -> bool,
    ) {
        assert!(pos < self.len && out.len() == self.alphabet);
        let base = self.coding_bits.value();
        let old = symbols[pos];
        let (own, later) = self.affected(symbols, pos);

        let mut removed = self.step(own, old, -1);
        for &(ctx, target, weight) in &later {
            removed += self.step(ctx + old as u64 * weight, target, -1);
        }
        for (a, slot) in out.iter_mut().enumerate() {
            if !keep(a) {
                continue;
            }
            let mut added = self.step(own, a, 1);
            for &(ctx, target, weight) in &later {
                added += self.step(ctx + a as u64 * weight, target, 1);
            }
            *slot = (base + (removed + added)).max(0.0);
            self.step(own, a, -1);
            for &(ctx, target, weight) in &later {
                self.step(ctx + a as u64 * weight, target, -1);
            }
        }
        self.step(own, old, 1);
        for &(ctx, target, weight) in &later {
            self.step(ctx + old as u64 * weight, target, 1);
        }
    }

    /// Sets `symbols[pos] = new_symbol`, updates the counts and returns the
    /// new conditional entropy in bits per symbol.
    pub fn delta_h_q(
        &mut self,
        symbols: &mut [usize],
        pos: usize,
        new_symbol: usize,
    ) -> Result<f64> {
        self.check_position(symbols, pos, new_symbol)?;
        let old = symbols[pos];
        if old != new_symbol {
            let (own, later) = self.affected(symbols, pos);
            let mut delta = Compensated::default();
            delta.add(self.step(own, old, -1));
            for &(ctx, target, weight) in &later {
                delta.add(self.step(ctx + old as u64 * weight, target, -1));
            }
            delta.add(self.step(own, new_symbol, 1));
            for &(ctx, target, weight) in &later {
                delta.add(self.step(ctx + new_symbol as u64 * weight, target, 1));
            }
            self.coding_bits.add(delta.value());
            symbols[pos] = new_symbol;
        }
        Ok(self.h_q())
    }
}
