//! Analytic test-function families with exact boost derivatives.
//!
//! The boosts act intrinsically on a slice as `L^i = w_τ ∂_{x^i}` with
//! `L^i w_τ = x^i` and `L^j x^i = δ^{ij} w_τ`. A word of boosts applied to a
//! smooth function therefore expands into a finite sum of terms
//! `c · w_τ^a · x^{b₁}⋯x^{b_m} · ∂_Γ u` with integer coefficients; the
//! expansion is performed symbolically once per word and evaluated against
//! closed-form partial derivatives of the family.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{weight, SliceGrid, SliceParams};
use crate::{K_MAX, MAX_DIM};

/// Modulation wavenumber of the `ModulatedBump` family, in units of `1/scale`
/// along the first axis.
pub const MODULATION_FREQ: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("boost word of length {requested} exceeds the supported order {max}")]
    OrderUnsupported { requested: usize, max: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian,
    Bump,
    ModulatedBump,
    /// Constant extension `u ≡ c`; validation only (boosts kill it).
    Constant,
}

/// A test function with closed-form partial derivatives up to order 3.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TestFamily {
    pub kind: FamilyKind,
    pub center: Vec<f64>,
    pub scale: f64,
    pub amplitude: f64,
}

impl TestFamily {
    pub fn gaussian(center: Vec<f64>, scale: f64, amplitude: f64) -> Self {
        TestFamily { kind: FamilyKind::Gaussian, center, scale, amplitude }
    }

    pub fn bump(center: Vec<f64>, scale: f64, amplitude: f64) -> Self {
        TestFamily { kind: FamilyKind::Bump, center, scale, amplitude }
    }

    pub fn modulated_bump(center: Vec<f64>, scale: f64, amplitude: f64) -> Self {
        TestFamily { kind: FamilyKind::ModulatedBump, center, scale, amplitude }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        TestFamily { kind: FamilyKind::Constant, center: vec![0.0; dim], scale: 1.0, amplitude: value }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Highest boost-derivative order available in closed form.
    pub fn max_exact_order(&self) -> usize {
        K_MAX
    }

    /// Pullback under the dilation `x ↦ x/λ`: same peak values, support
    /// scaled by `λ`.
    pub fn dilate(&self, lambda: f64) -> Self {
        TestFamily {
            kind: self.kind,
            center: self.center.iter().map(|c| c * lambda).collect(),
            scale: self.scale * lambda,
            amplitude: self.amplitude,
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        TestFamily { amplitude, ..self.clone() }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.partial(&[], x)
    }

    /// Closed-form partial derivative `∂_{axes} u (x)`; `axes` is a sorted
    /// list of 0-based axes with `axes.len() ≤ 3`.
    pub fn partial(&self, axes: &[usize], x: &[f64]) -> f64 {
        debug_assert!(axes.len() <= K_MAX);
        debug_assert_eq!(x.len(), self.dim());
        match self.kind {
            FamilyKind::Constant => {
                if axes.is_empty() {
                    self.amplitude
                } else {
                    0.0
                }
            }
            FamilyKind::Gaussian => self.gaussian_partial(axes, x),
            FamilyKind::Bump => self.amplitude * self.bump_partial_y(axes, x) * self.inv_scale_pow(axes.len()),
            FamilyKind::ModulatedBump => self.modulated_partial(axes, x),
        }
    }

    fn inv_scale_pow(&self, order: usize) -> f64 {
        self.scale.powi(-(order as i32))
    }

    fn reduced(&self, x: &[f64], y: &mut [f64; MAX_DIM]) -> f64 {
        let mut q = 0.0;
        for i in 0..self.dim() {
            let yi = (x[i] - self.center[i]) / self.scale;
            y[i] = yi;
            q += yi * yi;
        }
        q
    }

    fn gaussian_partial(&self, axes: &[usize], x: &[f64]) -> f64 {
        let mut y = [0.0; MAX_DIM];
        let q = self.reduced(x, &mut y);
        let g = self.amplitude * (-q).exp();
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let core = match axes {
            [] => 1.0,
            [a] => -2.0 * y[*a],
            [a, b] => 4.0 * y[*a] * y[*b] - 2.0 * d(*a, *b),
            [a, b, c] => {
                4.0 * (d(*a, *b) * y[*c] + d(*a, *c) * y[*b] + d(*b, *c) * y[*a])
                    - 8.0 * y[*a] * y[*b] * y[*c]
            }
            _ => unreachable!(),
        };
        core * g * self.inv_scale_pow(axes.len())
    }

    /// Bump profile partials in the reduced variable `y`; amplitude and the
    /// `1/scale` chain factors are applied by the caller.
    fn bump_partial_y(&self, axes: &[usize], x: &[f64]) -> f64 {
        let mut y = [0.0; MAX_DIM];
        let q = self.reduced(x, &mut y);
        if q >= 1.0 {
            return 0.0;
        }
        // g(q) = exp(1 − 1/(1−q)), normalized so g(0) = 1.
        let m = 1.0 / (1.0 - q);
        let g = (1.0 - m).exp();
        let g1 = -m * m * g;
        let g2 = (m.powi(4) - 2.0 * m.powi(3)) * g;
        let g3 = (-m.powi(6) + 6.0 * m.powi(5) - 6.0 * m.powi(4)) * g;
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        match axes {
            [] => g,
            [a] => 2.0 * y[*a] * g1,
            [a, b] => 4.0 * y[*a] * y[*b] * g2 + 2.0 * d(*a, *b) * g1,
            [a, b, c] => {
                8.0 * y[*a] * y[*b] * y[*c] * g3
                    + 4.0 * (d(*a, *b) * y[*c] + d(*a, *c) * y[*b] + d(*b, *c) * y[*a]) * g2
            }
            _ => unreachable!(),
        }
    }

    /// Cosine factor partials in `y`: nonzero only for derivatives along the
    /// first axis.
    fn cos_partial_y(&self, order: usize, y0: f64) -> f64 {
        let k = MODULATION_FREQ;
        let phase = k * y0;
        let kp = k.powi(order as i32);
        match order % 4 {
            0 => kp * phase.cos(),
            1 => -kp * phase.sin(),
            2 => -kp * phase.cos(),
            _ => kp * phase.sin(),
        }
    }

    fn modulated_partial(&self, axes: &[usize], x: &[f64]) -> f64 {
        let mut y = [0.0; MAX_DIM];
        let q = self.reduced(x, &mut y);
        if q >= 1.0 {
            return 0.0;
        }
        // Leibniz over subsets of the derivative axes: the cosine factor only
        // depends on y₀, so complement subsets containing another axis drop.
        let n = axes.len();
        let mut total = 0.0;
        for mask in 0..(1usize << n) {
            let mut bump_axes = [0usize; K_MAX];
            let mut nb = 0;
            let mut cos_order = 0usize;
            let mut cos_ok = true;
            for (pos, &ax) in axes.iter().enumerate() {
                if mask & (1 << pos) != 0 {
                    bump_axes[nb] = ax;
                    nb += 1;
                } else if ax == 0 {
                    cos_order += 1;
                } else {
                    cos_ok = false;
                    break;
                }
            }
            if !cos_ok {
                continue;
            }
            let mut ba = bump_axes[..nb].to_vec();
            ba.sort_unstable();
            total += self.bump_partial_y(&ba, x) * self.cos_partial_y(cos_order, y[0]);
        }
        self.amplitude * total * self.inv_scale_pow(n)
    }
}

/// A word of boost applications; entries are 0-based axes, applied first to
/// last: `word = [i, j]` means `L^j L^i u`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoostIndex(pub Vec<usize>);

impl BoostIndex {
    pub fn empty() -> Self {
        BoostIndex(Vec::new())
    }

    pub fn from_axes(axes: &[usize]) -> Self {
        BoostIndex(axes.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Catalog of sorted partial-derivative multi-indices up to a given order.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    pub dim: usize,
    list: Vec<Vec<usize>>,
}

impl MultiIndexSet {
    pub fn new(dim: usize, max_order: usize) -> Self {
        let mut list = vec![Vec::new()];
        let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..max_order {
            let mut next = Vec::new();
            for idx in &frontier {
                let start = idx.last().copied().unwrap_or(0);
                for ax in start..dim {
                    let mut ext = idx.clone();
                    ext.push(ax);
                    next.push(ext);
                }
            }
            list.extend(next.iter().cloned());
            frontier = next;
        }
        MultiIndexSet { dim, list }
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn index_of(&self, sorted_axes: &[usize]) -> usize {
        self.list
            .iter()
            .position(|m| m.as_slice() == sorted_axes)
            .expect("multi-index outside catalog")
    }

    pub fn axes(&self, idx: usize) -> &[usize] {
        &self.list[idx]
    }
}

/// All partial derivatives of one family at one point, aligned with a
/// [`MultiIndexSet`].
pub struct PartialTable<'a> {
    pub set: &'a MultiIndexSet,
    pub values: Vec<f64>,
}

impl<'a> PartialTable<'a> {
    pub fn evaluate(set: &'a MultiIndexSet, family: &TestFamily, x: &[f64]) -> Self {
        let values = set.list.iter().map(|axes| family.partial(axes, x)).collect();
        PartialTable { set, values }
    }
}

/// One summand of an expanded boost word: `coeff · w^w_pow · Π x[b] · ∂_Γ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostTerm {
    pub coeff: f64,
    pub w_pow: i32,
    pub x_axes: Vec<usize>,
    pub partial_idx: usize,
}

/// Symbolic expansion of `L^{word}` against a multi-index catalog.
#[derive(Debug, Clone)]
pub struct CompiledWord {
    pub order: usize,
    pub terms: Vec<BoostTerm>,
}

type TermKey = (i32, Vec<usize>, Vec<usize>);

/// Expand a boost word into its exact polynomial form.
pub fn compile_word(word: &BoostIndex, set: &MultiIndexSet) -> CompiledWord {
    let mut terms: BTreeMap<TermKey, i64> = BTreeMap::new();
    terms.insert((0, Vec::new(), Vec::new()), 1);
    for &axis in &word.0 {
        let mut next: BTreeMap<TermKey, i64> = BTreeMap::new();
        let mut add = |key: TermKey, c: i64| {
            if c != 0 {
                *next.entry(key).or_insert(0) += c;
            }
        };
        for ((w_pow, x_axes, partial), &coeff) in &terms {
            // L^i (w^a x_B ∂_Γ u) expands by the product rule with
            // ∂_i w = x_i / w, then multiplies through by w.
            if *w_pow != 0 {
                let mut xb = x_axes.clone();
                xb.push(axis);
                xb.sort_unstable();
                add((w_pow - 1, xb, partial.clone()), coeff * (*w_pow as i64));
            }
            let hits = x_axes.iter().filter(|&&b| b == axis).count() as i64;
            if hits > 0 {
                let mut xb = x_axes.clone();
                let pos = xb.iter().position(|&b| b == axis).unwrap();
                xb.remove(pos);
                add((w_pow + 1, xb, partial.clone()), coeff * hits);
            }
            let mut gamma = partial.clone();
            gamma.push(axis);
            gamma.sort_unstable();
            add((w_pow + 1, x_axes.clone(), gamma), coeff);
        }
        terms = next.into_iter().filter(|(_, c)| *c != 0).collect();
    }
    let compiled = terms
        .into_iter()
        .map(|((w_pow, x_axes, partial), coeff)| BoostTerm {
            coeff: coeff as f64,
            w_pow,
            x_axes,
            partial_idx: set.index_of(&partial),
        })
        .collect();
    CompiledWord { order: word.len(), terms: compiled }
}

impl CompiledWord {
    /// Evaluate against a partial table at a node with weight `w`.
    pub fn eval(&self, w: f64, x: &[f64], table: &PartialTable<'_>) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            let mut v = t.coeff * w.powi(t.w_pow) * table.values[t.partial_idx];
            for &b in &t.x_axes {
                v *= x[b];
            }
            total += v;
        }
        total
    }
}

/// Exact boost derivative `(L^{word} u)(x)` on the slice `Σ_τ`.
pub fn evaluate(
    family: &TestFamily,
    word: &BoostIndex,
    params: SliceParams,
    x: &[f64],
) -> Result<f64, FieldError> {
    if word.len() > family.max_exact_order() {
        return Err(FieldError::OrderUnsupported {
            requested: word.len(),
            max: family.max_exact_order(),
        });
    }
    let set = MultiIndexSet::new(params.dim, word.len());
    let compiled = compile_word(word, &set);
    let table = PartialTable::evaluate(&set, family, x);
    Ok(compiled.eval(weight(params, x), x, &table))
}

/// Exact boost derivative of the weight itself: `L^{word} w_τ`.
///
/// Uses `L^i w_τ = x^i` and `L^j x^i = δ^{ij} w_τ`; the result is always one
/// of `±…·w_τ`, `±…·x^i` or zero, and satisfies `|L^{word} w_τ| ≤ w_τ`.
pub fn weight_derivative(word: &BoostIndex, params: SliceParams, x: &[f64]) -> f64 {
    assert!(!word.is_empty(), "weight_derivative needs at least one boost");
    // State machine over the exact alternation W → x^i → δ W → …
    enum State {
        W,
        X(usize),
    }
    let mut state = State::W;
    for &axis in &word.0 {
        state = match state {
            State::W => State::X(axis),
            State::X(i) => {
                if i == axis {
                    State::W
                } else {
                    return 0.0;
                }
            }
        };
    }
    match state {
        State::W => weight(params, x),
        State::X(i) => x[i],
    }
}

/// A function sampled on a slice grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: SliceGrid,
    pub values: Vec<f64>,
    pub source: Option<TestFamily>,
}

impl ScalarField {
    pub fn from_values(grid: SliceGrid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.num_nodes() {
            return Err(FieldError::Invalid(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.num_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::Invalid("non-finite field value".into()));
        }
        Ok(ScalarField { grid, values, source: None })
    }

    pub fn zero(grid: SliceGrid) -> Self {
        let n = grid.num_nodes();
        ScalarField { grid, values: vec![0.0; n], source: None }
    }
}

/// Sample a family onto a grid. Bump values are exactly zero outside the
/// support ball.
pub fn sample(family: &TestFamily, grid: &SliceGrid) -> ScalarField {
    let mut values = Vec::with_capacity(grid.num_nodes());
    let mut x = [0.0; MAX_DIM];
    for flat in 0..grid.num_nodes() {
        grid.node(flat, &mut x);
        values.push(family.value(&x[..grid.dim()]));
    }
    ScalarField { grid: grid.clone(), values, source: Some(family.clone()) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SliceParams;

    fn params(dim: usize, tau: f64) -> SliceParams {
        SliceParams::new(dim, tau).unwrap()
    }

    #[test]
    fn empty_word_is_value_at_peak() {
        let fam = TestFamily::gaussian(vec![0.5, -0.25], 1.5, 2.25);
        let v = evaluate(&fam, &BoostIndex::empty(), params(2, 1.0), &[0.5, -0.25]).unwrap();
        assert_eq!(v, 2.25);
    }

    #[test]
    fn boost_kills_constant() {
        let fam = TestFamily::constant(2, 3.0);
        let p = params(2, 1.0);
        for word in [vec![0], vec![1], vec![0, 1], vec![1, 1, 0]] {
            let v = evaluate(&fam, &BoostIndex::from_axes(&word), p, &[0.4, 0.7]).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn gaussian_first_boost_hand_value() {
        // L¹ u at x = (1, 0), τ = 1: w = √2, ∂₁u = −2 e^{−1}, so w·∂₁u = −2√2 e^{−1}.
        let fam = TestFamily::gaussian(vec![0.0, 0.0], 1.0, 1.0);
        let v = evaluate(&fam, &BoostIndex::from_axes(&[0]), params(2, 1.0), &[1.0, 0.0]).unwrap();
        let expect = -2.0 * 2.0_f64.sqrt() * (-1.0_f64).exp();
        assert!((v - expect).abs() < 1e-14, "{v} vs {expect}");
    }

    #[test]
    fn order_cap_enforced() {
        let fam = TestFamily::bump(vec![0.0, 0.0], 1.0, 1.0);
        let word = BoostIndex::from_axes(&[0, 1, 0, 1]);
        match evaluate(&fam, &word, params(2, 1.0), &[0.1, 0.1]) {
            Err(FieldError::OrderUnsupported { requested: 4, max: 3 }) => {}
            other => panic!("expected OrderUnsupported, got {other:?}"),
        }
    }

    #[test]
    fn weight_derivative_rules() {
        let p = params(2, 2.0);
        let x = [0.7, -1.1];
        // single boost: x^i
        assert_eq!(weight_derivative(&BoostIndex::from_axes(&[0]), p, &x), 0.7);
        assert_eq!(weight_derivative(&BoostIndex::from_axes(&[1]), p, &x), -1.1);
        // repeated axis: back to w
        let w = weight(p, &x);
        assert_eq!(weight_derivative(&BoostIndex::from_axes(&[1, 1]), p, &x), w);
        // mixed axes: L² x¹ = 0
        assert_eq!(weight_derivative(&BoostIndex::from_axes(&[0, 1]), p, &x), 0.0);
        // order 3: L¹ L¹ L¹ w = L¹ w (period 2) = x¹... through the chain:
        // w → x¹ → w → x¹
        assert_eq!(weight_derivative(&BoostIndex::from_axes(&[0, 0, 0]), p, &x), 0.7);
    }

    #[test]
    fn weight_derivative_bounded_by_weight() {
        let p = params(3, 0.7);
        let x = [1.3, -0.2, 2.4];
        let w = weight(p, &x);
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let v = weight_derivative(&BoostIndex::from_axes(&[a, b, c]), p, &x);
                    assert!(v.abs() <= w + 1e-15);
                }
            }
        }
    }

    /// Nested central differences of the plain family values composed with
    /// w_τ factors: reference for L^{word} u up to order 2.
    fn fd_boost(fam: &TestFamily, word: &[usize], p: SliceParams, x: &[f64], h: f64) -> f64 {
        match word {
            [] => fam.value(x),
            [rest @ .., last] => {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[*last] += h;
                xm[*last] -= h;
                let fp = fd_boost(fam, rest, p, &xp, h);
                let fm = fd_boost(fam, rest, p, &xm, h);
                weight(p, x) * (fp - fm) / (2.0 * h)
            }
        }
    }

    #[test]
    fn finite_difference_cross_check_richardson() {
        let p = params(2, 1.3);
        let x = [0.45, -0.3];
        let fams = [
            TestFamily::gaussian(vec![0.1, 0.0], 0.8, 1.7),
            TestFamily::bump(vec![0.0, 0.0], 2.0, 0.9),
            TestFamily::modulated_bump(vec![0.2, -0.1], 1.8, 1.1),
        ];
        for fam in &fams {
            for word in [vec![0], vec![1], vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]] {
                let exact = evaluate(fam, &BoostIndex::from_axes(&word), p, &x).unwrap();
                let hs = [2e-3, 1e-3, 5e-4];
                let errs: Vec<f64> =
                    hs.iter().map(|&h| (fd_boost(fam, &word, p, &x, h) - exact).abs()).collect();
                // Richardson slope between successive halvings.
                for k in 0..2 {
                    if errs[k + 1] > 1e-11 {
                        let slope = (errs[k] / errs[k + 1]).log2();
                        assert!(
                            slope >= 1.9,
                            "family {:?} word {:?}: slope {slope}, errs {errs:?}",
                            fam.kind,
                            word
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn third_order_boost_against_fd() {
        // third-order words checked against a deeper FD nest at one h with a
        // loose tolerance (the FD error is O(h²) with a larger constant)
        let p = params(2, 1.1);
        let x = [0.31, 0.22];
        let fam = TestFamily::gaussian(vec![0.0, 0.0], 1.0, 1.0);
        for word in [vec![0, 0, 0], vec![0, 1, 0], vec![1, 1, 0]] {
            let exact = evaluate(&fam, &BoostIndex::from_axes(&word), p, &x).unwrap();
            let approx = fd_boost(&fam, &word, p, &x, 1e-3);
            assert!((exact - approx).abs() < 1e-4, "word {word:?}: {exact} vs {approx}");
        }
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let fam = TestFamily::bump(vec![0.0, 0.0], 1.0, 1.0);
        let p = params(2, 1.0);
        let grid = SliceGrid::new(p, 2.0, 9).unwrap();
        let field = sample(&fam, &grid);
        let mut x = [0.0; MAX_DIM];
        for flat in 0..grid.num_nodes() {
            grid.node(flat, &mut x);
            let r2: f64 = x[..2].iter().map(|v| v * v).sum();
            if r2 >= 1.0 {
                assert_eq!(field.values[flat], 0.0);
            }
        }
    }

    #[test]
    fn zero_amplitude_samples_to_zero() {
        let fam = TestFamily::gaussian(vec![0.0, 0.0], 1.0, 0.0);
        let grid = SliceGrid::new(params(2, 1.0), 3.0, 9).unwrap();
        let field = sample(&fam, &grid);
        assert!(field.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_tail_below_threshold() {
        // R ≥ 6·scale + |center| keeps the boundary value under 1e−12·amp.
        let fam = TestFamily::gaussian(vec![1.0, 0.0], 1.0, 3.0);
        let v = fam.value(&[7.0, 0.0]);
        assert!(v.abs() < 1e-12 * 3.0, "tail {v}");
    }

    #[test]
    fn compiled_second_order_structure() {
        // L^j L^i u = x_j u_i + w² u_ij: two terms.
        let set = MultiIndexSet::new(2, 2);
        let word = BoostIndex::from_axes(&[0, 1]);
        let compiled = compile_word(&word, &set);
        assert_eq!(compiled.terms.len(), 2);
    }
}
