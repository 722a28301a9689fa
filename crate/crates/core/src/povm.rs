//! Coincidence-click matrices and the POVMs they define on the time space.
//!
//! Each party measures either time of arrival (`T`, computational basis) or
//! a neighbouring-bin superposition (`S`, outputs `+`/`-`). A click pattern
//! such as `SS_{a,b}(i,j)` is the probability of Alice seeing output `a` in
//! bin `i` and Bob output `b` in bin `j`. POVM elements carry the click they
//! are measured by and a rational weight with `Tr(E ρ) = weight · click`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Ket, Operator};
use crate::model::{check_even_dimension, superposition_ket, Protocol, Sign};

/// A single coincidence click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClickLabel {
    /// Both parties measure time of arrival.
    Tt { i: usize, j: usize },
    /// Both parties measure superpositions, outputs `a` and `b`.
    Ss { a: Sign, b: Sign, i: usize, j: usize },
    /// Alice measures time of arrival, Bob a superposition with output `b`.
    Ts { b: Sign, i: usize, j: usize },
    /// Alice measures a superposition with output `a`, Bob time of arrival.
    St { a: Sign, i: usize, j: usize },
    /// Polarization-entangled analyzer: superpositions with equal outputs,
    /// `SS_{1,1} + SS_{2,2}`.
    SsSame { i: usize, j: usize },
    /// Polarization-entangled analyzer: superpositions with opposite outputs,
    /// `SS_{1,2} + SS_{2,1}`.
    SsOpposite { i: usize, j: usize },
}

impl fmt::Display for ClickLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ClickLabel::Tt { i, j } => write!(f, "TT({i},{j})"),
            ClickLabel::Ss { a, b, i, j } => {
                write!(f, "SS_{}{}({i},{j})", a.outcome(), b.outcome())
            }
            ClickLabel::Ts { b, i, j } => write!(f, "TS_{}({i},{j})", b.outcome()),
            ClickLabel::St { a, i, j } => write!(f, "ST_{}({i},{j})", a.outcome()),
            ClickLabel::SsSame { i, j } => write!(f, "SS_s({i},{j})"),
            ClickLabel::SsOpposite { i, j } => write!(f, "SS_o({i},{j})"),
        }
    }
}

/// What a POVM element is measured by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementLabel {
    /// A coincidence click.
    Click(ClickLabel),
    /// Diagonal remainder completing a POVM: the projector onto interior
    /// bin pairs and the anti-corners `(0, d-1)`, `(d-1, 0)`. Measured by the
    /// sum of the matching `TT` clicks.
    Residual,
}

impl fmt::Display for ElementLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementLabel::Click(c) => c.fmt(f),
            ElementLabel::Residual => write!(f, "residual"),
        }
    }
}

/// Positive rational weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Weight {
    /// Numerator.
    pub num: u32,
    /// Denominator.
    pub den: u32,
}

impl Weight {
    /// `num / den`.
    pub const fn new(num: u32, den: u32) -> Weight {
        Weight { num, den }
    }

    /// Floating-point value.
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// One POVM element with its click label and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmElement {
    /// Click that measures the element.
    pub label: ElementLabel,
    /// Positive semidefinite operator on the `d²`-dimensional time space.
    pub operator: Operator,
    /// `Tr(E ρ) = weight · click`.
    pub weight: Weight,
}

/// A POVM on the two-party time space with labelled elements.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPovm {
    /// Short name used in diagnostics.
    pub name: String,
    /// Number of time bins.
    pub d: usize,
    /// Elements in construction order.
    pub elements: Vec<PovmElement>,
}

impl LabeledPovm {
    /// `Σ_k E_k`.
    pub fn sum(&self) -> Operator {
        let n = self.d * self.d;
        let mut acc = Operator::zeros(n, n).into_matrix();
        for e in &self.elements {
            acc += e.operator.matrix();
        }
        Operator::from_matrix(acc)
    }

    /// Largest entrywise deviation of `Σ_k E_k` from the identity.
    pub fn completeness_error(&self) -> f64 {
        self.sum().max_abs_diff(&Operator::identity(self.d * self.d))
    }
}

/// A single-party time ket used to build product elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LocalKet {
    Bin(usize),
    Sup(usize, Sign),
}

impl LocalKet {
    fn ket(self, d: usize) -> Result<Ket> {
        match self {
            LocalKet::Bin(i) => Ket::basis(d, i),
            LocalKet::Sup(i, s) => superposition_ket(i, s, d),
        }
    }
}

fn product_element(x: LocalKet, y: LocalKet, d: usize) -> Result<PovmElement> {
    let (label, weight) = match (x, y) {
        (LocalKet::Bin(i), LocalKet::Bin(j)) => (ClickLabel::Tt { i, j }, Weight::new(1, 1)),
        (LocalKet::Bin(i), LocalKet::Sup(j, b)) => (ClickLabel::Ts { b, i, j }, Weight::new(2, 1)),
        (LocalKet::Sup(i, a), LocalKet::Bin(j)) => (ClickLabel::St { a, i, j }, Weight::new(2, 1)),
        (LocalKet::Sup(i, a), LocalKet::Sup(j, b)) => {
            (ClickLabel::Ss { a, b, i, j }, Weight::new(4, 1))
        }
    };
    let k = x.ket(d)?.tensor(&y.ket(d)?);
    Ok(PovmElement { label: ElementLabel::Click(label), operator: k.projector(), weight })
}

fn product_povm(name: &str, local: &[LocalKet], d: usize) -> Result<LabeledPovm> {
    let mut elements = Vec::with_capacity(local.len() * local.len());
    for &x in local {
        for &y in local {
            elements.push(product_element(x, y, d)?);
        }
    }
    Ok(LabeledPovm { name: name.to_string(), d, elements })
}

/// Computational-basis POVM `{|i,j⟩⟨i,j|}` measured by `TT(i,j)`.
pub fn build_m0(d: usize) -> Result<LabeledPovm> {
    check_even_dimension(d)?;
    let local: Vec<LocalKet> = (0..d).map(LocalKet::Bin).collect();
    product_povm("M0", &local, d)
}

/// Superposition POVM on odd-bin pairs `{|i±⟩}` for odd `i`, measured by
/// `SS_{a,b}(i,j)` with weight 4.
pub fn build_m1_p1(d: usize) -> Result<LabeledPovm> {
    check_even_dimension(d)?;
    let local: Vec<LocalKet> = (1..d)
        .step_by(2)
        .flat_map(|i| Sign::BOTH.map(|s| LocalKet::Sup(i, s)))
        .collect();
    product_povm("M1", &local, d)
}

/// Interleaved POVM from the basis `{|0⟩, |i±⟩ (even 0 < i < d-1), |d-1⟩}`.
///
/// Mixes superposition and time-of-arrival clicks. For `d = 2` no even
/// interior bin exists and the POVM reduces to the four computational
/// corner projectors.
pub fn build_m2_p1(d: usize) -> Result<LabeledPovm> {
    check_even_dimension(d)?;
    let mut local = vec![LocalKet::Bin(0)];
    for i in (2..d - 1).step_by(2) {
        local.extend(Sign::BOTH.map(|s| LocalKet::Sup(i, s)));
    }
    local.push(LocalKet::Bin(d - 1));
    product_povm("M2", &local, d)
}

/// POVM of the polarization-entangled analyzer, scaled by `1/3`.
///
/// Contains the same/opposite-output projectors on
/// `(|i+,j+⟩ + |i-,j-⟩)/√2` and `(|i+,j-⟩ + |i-,j+⟩)/√2`, the boundary
/// mismatched projectors on bins `0` and `d-1`, and a diagonal residual.
///
/// The residual is `3I` minus the other elements: every bin pair except the
/// boundary pairs, plus the anti-corners `(0, d-1)` and `(d-1, 0)`. For
/// `d = 2` this is `I - |0,0⟩⟨0,0| - |1,1⟩⟨1,1|`.
pub fn build_m1_p2(d: usize) -> Result<LabeledPovm> {
    check_even_dimension(d)?;
    let third = |op: Operator| op.scale(1.0 / 3.0);
    let two_thirds = Weight::new(2, 3);
    let mut elements = Vec::new();
    let sq = std::f64::consts::FRAC_1_SQRT_2;
    for i in 1..d {
        for j in 1..d {
            let ip = superposition_ket(i, Sign::Plus, d)?;
            let im = superposition_ket(i, Sign::Minus, d)?;
            let jp = superposition_ket(j, Sign::Plus, d)?;
            let jm = superposition_ket(j, Sign::Minus, d)?;
            let same = ip.tensor(&jp).add(&im.tensor(&jm)).scale(sq.into());
            let opp = ip.tensor(&jm).add(&im.tensor(&jp)).scale(sq.into());
            elements.push(PovmElement {
                label: ElementLabel::Click(ClickLabel::SsSame { i, j }),
                operator: third(same.projector()),
                weight: two_thirds,
            });
            elements.push(PovmElement {
                label: ElementLabel::Click(ClickLabel::SsOpposite { i, j }),
                operator: third(opp.projector()),
                weight: two_thirds,
            });
        }
    }
    for edge in [0, d - 1] {
        for j in 1..d {
            for s in Sign::BOTH {
                let mut e = product_element(LocalKet::Bin(edge), LocalKet::Sup(j, s), d)?;
                e.operator = third(e.operator);
                e.weight = two_thirds;
                elements.push(e);
            }
        }
    }
    for edge in [0, d - 1] {
        for i in 1..d {
            for s in Sign::BOTH {
                let mut e = product_element(LocalKet::Sup(i, s), LocalKet::Bin(edge), d)?;
                e.operator = third(e.operator);
                e.weight = two_thirds;
                elements.push(e);
            }
        }
    }
    let diag: Vec<f64> = (0..d * d)
        .map(|k| if in_residual(k / d, k % d, d) { 1.0 } else { 0.0 })
        .collect();
    elements.push(PovmElement {
        label: ElementLabel::Residual,
        operator: third(Operator::diagonal(&diag)),
        weight: Weight::new(1, 3),
    });
    Ok(LabeledPovm { name: "M1".into(), d, elements })
}

/// Bin pairs covered by the residual of [`build_m1_p2`].
fn in_residual(i: usize, j: usize, d: usize) -> bool {
    let edge = |x: usize| x == 0 || x == d - 1;
    !(edge(i) || edge(j)) || (i == 0 && j == d - 1) || (i == d - 1 && j == 0)
}

/// The POVMs whose statistics constrain the entropy program.
pub fn povms_for(protocol: Protocol, d: usize) -> Result<Vec<LabeledPovm>> {
    match protocol.measurement_protocol() {
        Protocol::P2 => Ok(vec![build_m0(d)?, build_m1_p2(d)?]),
        _ => Ok(vec![build_m0(d)?, build_m1_p1(d)?, build_m2_p1(d)?]),
    }
}

/// All coincidence-click probabilities of one analyzer configuration.
///
/// Matrices are stored `d × d` and indexed by the actual bin numbers;
/// entries outside a click's admissible range are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickMatrices {
    /// Number of time bins.
    pub d: usize,
    /// `TT(i,j)`, `0 ≤ i,j ≤ d-1`.
    pub tt: DMatrix<f64>,
    /// `SS_{a,b}(i,j)`, `1 ≤ i,j ≤ d-1`, indexed `[a][b]` with `+ = 0`.
    pub ss: [[DMatrix<f64>; 2]; 2],
    /// `TS_b(i,j)`, `0 ≤ i ≤ d-1`, `1 ≤ j ≤ d-1`.
    pub ts: [DMatrix<f64>; 2],
    /// `ST_a(i,j)`, `1 ≤ i ≤ d-1`, `0 ≤ j ≤ d-1`.
    pub st: [DMatrix<f64>; 2],
}

fn sign_index(s: Sign) -> usize {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

impl ClickMatrices {
    fn zeros(d: usize) -> ClickMatrices {
        let z = DMatrix::<f64>::zeros(d, d);
        ClickMatrices {
            d,
            tt: z.clone(),
            ss: [[z.clone(), z.clone()], [z.clone(), z.clone()]],
            ts: [z.clone(), z.clone()],
            st: [z.clone(), z],
        }
    }

    /// Probability of a single click.
    pub fn click(&self, label: ClickLabel) -> Result<f64> {
        let d = self.d;
        let check = |ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Dimension(format!("click {label} out of range for d = {d}")))
            }
        };
        match label {
            ClickLabel::Tt { i, j } => {
                check(i < d && j < d)?;
                Ok(self.tt[(i, j)])
            }
            ClickLabel::Ss { a, b, i, j } => {
                check((1..d).contains(&i) && (1..d).contains(&j))?;
                Ok(self.ss[sign_index(a)][sign_index(b)][(i, j)])
            }
            ClickLabel::Ts { b, i, j } => {
                check(i < d && (1..d).contains(&j))?;
                Ok(self.ts[sign_index(b)][(i, j)])
            }
            ClickLabel::St { a, i, j } => {
                check((1..d).contains(&i) && j < d)?;
                Ok(self.st[sign_index(a)][(i, j)])
            }
            ClickLabel::SsSame { i, j } => {
                check((1..d).contains(&i) && (1..d).contains(&j))?;
                Ok(self.ss[0][0][(i, j)] + self.ss[1][1][(i, j)])
            }
            ClickLabel::SsOpposite { i, j } => {
                check((1..d).contains(&i) && (1..d).contains(&j))?;
                Ok(self.ss[0][1][(i, j)] + self.ss[1][0][(i, j)])
            }
        }
    }

    /// Value measured for a POVM element label (before weighting).
    pub fn element_value(&self, label: ElementLabel) -> Result<f64> {
        match label {
            ElementLabel::Click(c) => self.click(c),
            ElementLabel::Residual => {
                let d = self.d;
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        if in_residual(i, j, d) {
                            s += self.tt[(i, j)];
                        }
                    }
                }
                Ok(s)
            }
        }
    }
}

fn time_state(rho: &DensityMatrix) -> Result<usize> {
    let n = rho.dim();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::Dimension(format!(
            "time state must act on d² dimensions, got {n}"
        )));
    }
    check_even_dimension(d)?;
    Ok(d)
}

fn expect(rho: &DensityMatrix, k: &Ket) -> Result<f64> {
    Ok(rho.operator().expectation(k)?.re)
}

fn fill_common(rho: &DensityMatrix, d: usize, out: &mut ClickMatrices) -> Result<()> {
    for i in 0..d {
        for j in 0..d {
            out.tt[(i, j)] = expect(rho, &Ket::basis(d, i)?.tensor(&Ket::basis(d, j)?))?;
        }
    }
    for s in Sign::BOTH {
        for i in 0..d {
            for j in 1..d {
                let k = Ket::basis(d, i)?.tensor(&superposition_ket(j, s, d)?);
                out.ts[sign_index(s)][(i, j)] = 0.5 * expect(rho, &k)?;
                let k = superposition_ket(j, s, d)?.tensor(&Ket::basis(d, i)?);
                out.st[sign_index(s)][(j, i)] = 0.5 * expect(rho, &k)?;
            }
        }
    }
    Ok(())
}

/// Click probabilities of the diagonal-polarization analyzer for a time
/// state `ρ_T` on `d²` dimensions.
///
/// `TT(i,j) = ⟨i,j|ρ|i,j⟩`, `SS_{a,b}(i,j) = ¼⟨i±,j±|ρ|i±,j±⟩`,
/// `TS_b(i,j) = ½⟨i,j±|ρ|i,j±⟩` and `ST_a(i,j) = ½⟨i±,j|ρ|i±,j⟩`.
pub fn click_probabilities_p1(rho: &DensityMatrix) -> Result<ClickMatrices> {
    let d = time_state(rho)?;
    let mut out = ClickMatrices::zeros(d);
    fill_common(rho, d, &mut out)?;
    for a in Sign::BOTH {
        for b in Sign::BOTH {
            for i in 1..d {
                for j in 1..d {
                    let k = superposition_ket(i, a, d)?.tensor(&superposition_ket(j, b, d)?);
                    out.ss[sign_index(a)][sign_index(b)][(i, j)] = 0.25 * expect(rho, &k)?;
                }
            }
        }
    }
    Ok(out)
}

/// Click probabilities of the polarization-entangled analyzer.
///
/// Time-of-arrival and mismatched clicks follow the diagonal analyzer;
/// superposition clicks are coherent sums
/// `SS_{1,1} = SS_{2,2} = ⅛⟨χ_s|ρ|χ_s⟩` with `χ_s = |i+,j+⟩ + |i-,j-⟩`, and
/// `SS_{1,2} = SS_{2,1} = ⅛⟨χ_o|ρ|χ_o⟩` with `χ_o = |i+,j-⟩ + |i-,j+⟩`.
pub fn click_probabilities_p2(rho: &DensityMatrix) -> Result<ClickMatrices> {
    let d = time_state(rho)?;
    let mut out = ClickMatrices::zeros(d);
    fill_common(rho, d, &mut out)?;
    for i in 1..d {
        for j in 1..d {
            let ip = superposition_ket(i, Sign::Plus, d)?;
            let im = superposition_ket(i, Sign::Minus, d)?;
            let jp = superposition_ket(j, Sign::Plus, d)?;
            let jm = superposition_ket(j, Sign::Minus, d)?;
            let same = 0.125 * expect(rho, &ip.tensor(&jp).add(&im.tensor(&jm)))?;
            let opp = 0.125 * expect(rho, &ip.tensor(&jm).add(&im.tensor(&jp)))?;
            out.ss[0][0][(i, j)] = same;
            out.ss[1][1][(i, j)] = same;
            out.ss[0][1][(i, j)] = opp;
            out.ss[1][0][(i, j)] = opp;
        }
    }
    Ok(out)
}

/// Click probabilities of the given analyzer.
pub fn click_probabilities(protocol: Protocol, rho: &DensityMatrix) -> Result<ClickMatrices> {
    match protocol.measurement_protocol() {
        Protocol::P2 => click_probabilities_p2(rho),
        _ => click_probabilities_p1(rho),
    }
}

/// One equality constraint `Tr(E σ) = value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Label of the POVM element.
    pub label: ElementLabel,
    /// The POVM element `E`.
    pub operator: Operator,
    /// Observed `weight · click`.
    pub value: f64,
}

/// Constraints originating from one POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSetting {
    /// POVM name.
    pub name: String,
    /// Retained constraints.
    pub constraints: Vec<Constraint>,
    /// Total probability of elements left out of the program because they
    /// are implied by other settings.
    pub omitted_mass: f64,
}

/// Observed statistics of every POVM of an analyzer configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    /// Number of time bins.
    pub d: usize,
    /// One entry per POVM.
    pub settings: Vec<ConstraintSetting>,
}

impl ConstraintSet {
    /// Iterates over all retained constraints.
    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.settings.iter().flat_map(|s| s.constraints.iter())
    }

    /// Number of retained constraints.
    pub fn len(&self) -> usize {
        self.settings.iter().map(|s| s.constraints.len()).sum()
    }

    /// No constraint retained.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Turns observed clicks into constraints `Tr(E_k σ) = weight_k · click_k`.
///
/// Residual elements are dropped and their mass recorded, since they are
/// fixed by the time-of-arrival statistics.
pub fn constraints_from_clicks(
    povms: &[LabeledPovm],
    clicks: &ClickMatrices,
) -> Result<ConstraintSet> {
    let mut settings = Vec::with_capacity(povms.len());
    for p in povms {
        if p.d != clicks.d {
            return Err(Error::Dimension(format!(
                "POVM for d = {} used with clicks for d = {}",
                p.d, clicks.d
            )));
        }
        let mut constraints = Vec::with_capacity(p.elements.len());
        let mut omitted_mass = 0.0;
        for e in &p.elements {
            let value = e.weight.value() * clicks.element_value(e.label)?;
            if e.label == ElementLabel::Residual {
                omitted_mass += value;
            } else {
                constraints.push(Constraint { label: e.label, operator: e.operator.clone(), value });
            }
        }
        settings.push(ConstraintSetting { name: p.name.clone(), constraints, omitted_mass });
    }
    Ok(ConstraintSet { d: clicks.d, settings })
}

/// Constraints observed on a time state through the analyzer's POVMs.
pub fn constraints_from_state(protocol: Protocol, rho: &DensityMatrix) -> Result<ConstraintSet> {
    let clicks = click_probabilities(protocol, rho)?;
    let povms = povms_for(protocol, clicks.d)?;
    constraints_from_clicks(&povms, &clicks)
}
