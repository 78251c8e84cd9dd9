//! Vector-space payloads carried by interpolants.

/// Values an interpolant can be built over: anything closed under linear
/// combination, with a norm for diagnostics.
pub trait Payload: Clone + Send + Sync {
    /// Zero element with the same shape as `self`.
    fn zeros_like(&self) -> Self;

    /// `self += a * x`.
    fn axpy(&mut self, a: f64, x: &Self);

    fn norm(&self) -> f64;

    fn scaled(&self, a: f64) -> Self {
        let mut out = self.zeros_like();
        out.axpy(a, self);
        out
    }
}

impl Payload for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }

    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl Payload for Vec<f64> {
    fn zeros_like(&self) -> Self {
        vec![0.0; self.len()]
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        assert_eq!(self.len(), x.len(), "payload length mismatch");
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }

    fn norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Linear combination `sum_i w_i x_i` over the entries with non-zero weight.
/// Panics when `terms` has no entry.
pub fn combine<'a, V: Payload + 'a>(terms: impl IntoIterator<Item = (f64, &'a V)>) -> V {
    let mut iter = terms.into_iter();
    let (w0, x0) = iter.next().expect("empty linear combination");
    let mut acc = x0.scaled(w0);
    for (w, x) in iter {
        if w != 0.0 {
            acc.axpy(w, x);
        }
    }
    acc
}
