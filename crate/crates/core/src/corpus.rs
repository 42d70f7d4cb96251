//! Curated measure specs for classification tests and demos: line measures
//! sharing the unit frame so every pair is directly comparable, plus the
//! canonical comparison pairs with their expected verdicts.

use crate::dyadic::Ambient;
use crate::measure::{Atom, Frame, MeasureSpec, NonatomicPart};
use num_complex::Complex64;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn line(atoms: Vec<Atom>, level: u32, cells: &[(u64, f64)], accumulation: Vec<Complex64>) -> MeasureSpec {
    MeasureSpec::new(
        Ambient::Line,
        Frame::unit(),
        atoms,
        NonatomicPart { level, densities: cells.iter().copied().collect() },
        accumulation,
    )
    .expect("curated spec is valid")
}

pub fn lebesgue() -> MeasureSpec {
    MeasureSpec::uniform(Ambient::Line, 3)
}

/// Same null sets as Lebesgue, different density.
pub fn density_seven() -> MeasureSpec {
    line(vec![], 3, &(1..=8).map(|j| (j, 7.0)).collect::<Vec<_>>(), vec![])
}

/// Lebesgue discretized one level finer.
pub fn lebesgue_fine() -> MeasureSpec {
    MeasureSpec::uniform(Ambient::Line, 4)
}

pub fn left_half() -> MeasureSpec {
    line(vec![], 1, &[(1, 1.0)], vec![])
}

pub fn right_half() -> MeasureSpec {
    line(vec![], 1, &[(2, 1.0)], vec![])
}

/// Positive only on the odd finest cells: singular to its even twin.
pub fn odd_cells() -> MeasureSpec {
    line(vec![], 3, &[(1, 1.0), (3, 1.0), (5, 1.0), (7, 1.0)], vec![])
}

pub fn even_cells() -> MeasureSpec {
    line(vec![], 3, &[(2, 1.0), (4, 1.0), (6, 1.0), (8, 1.0)], vec![])
}

/// Lebesgue plus a dense-atom model: finitely many atoms marching to a
/// declared accumulation point at 0. The support gains the declared point;
/// the cluster set does not change.
pub fn rational_atom_model() -> MeasureSpec {
    let atoms = (1..=4).map(|n| Atom { point: re(0.5f64.powi(n)), mass: 0.01 }).collect();
    line(atoms, 3, &(1..=8).map(|j| (j, 1.0)).collect::<Vec<_>>(), vec![re(0.0)])
}

/// Left-half Lebesgue with one isolated atom off the continuous support.
pub fn left_half_with_atom() -> MeasureSpec {
    line(vec![Atom { point: re(0.75), mass: 0.5 }], 1, &[(1, 1.0)], vec![])
}

/// Supported on the two middle quarters.
pub fn middle_quarters() -> MeasureSpec {
    line(vec![], 2, &[(2, 1.0), (3, 1.0)], vec![])
}

/// Full support with uneven densities: equivalent to Lebesgue.
pub fn weighted_mix() -> MeasureSpec {
    line(vec![], 3, &(1..=8).map(|j| (j, 0.25 * j as f64)).collect::<Vec<_>>(), vec![])
}

/// Purely atomic with an infinite support model: atoms `2^-n` accumulating
/// at 0 (and reaching 1, so the unit frame is already the bounding box).
pub fn reciprocal_powers() -> MeasureSpec {
    let atoms = (0..=8).map(|n| Atom { point: re(0.5f64.powi(n)), mass: 1.0 }).collect();
    line(atoms, 0, &[], vec![re(0.0)])
}

/// Every curated line spec, named. All share the unit frame.
pub fn corpus() -> Vec<(&'static str, MeasureSpec)> {
    vec![
        ("lebesgue", lebesgue()),
        ("density-seven", density_seven()),
        ("lebesgue-fine", lebesgue_fine()),
        ("left-half", left_half()),
        ("right-half", right_half()),
        ("odd-cells", odd_cells()),
        ("even-cells", even_cells()),
        ("rational-atom-model", rational_atom_model()),
        ("left-half-with-atom", left_half_with_atom()),
        ("middle-quarters", middle_quarters()),
        ("weighted-mix", weighted_mix()),
        ("reciprocal-powers", reciprocal_powers()),
    ]
}

/// A named comparison with its expected verdicts.
pub struct CorpusPair {
    pub name: &'static str,
    pub m1: MeasureSpec,
    pub m2: MeasureSpec,
    pub expect_similar_mod_compact: bool,
    pub expect_approx_similar: bool,
}

/// The six canonical comparisons of the classifier truth table.
pub fn truth_table_pairs() -> Vec<CorpusPair> {
    vec![
        CorpusPair {
            name: "self-vs-self",
            m1: lebesgue(),
            m2: lebesgue(),
            expect_similar_mod_compact: true,
            expect_approx_similar: true,
        },
        CorpusPair {
            name: "lebesgue-vs-dense-atoms",
            m1: lebesgue(),
            m2: rational_atom_model(),
            expect_similar_mod_compact: true,
            expect_approx_similar: false,
        },
        CorpusPair {
            name: "left-vs-right-half",
            m1: left_half(),
            m2: right_half(),
            expect_similar_mod_compact: false,
            expect_approx_similar: false,
        },
        CorpusPair {
            name: "singular-interleaved",
            m1: odd_cells(),
            m2: even_cells(),
            expect_similar_mod_compact: false,
            expect_approx_similar: false,
        },
        CorpusPair {
            name: "density-one-vs-seven",
            m1: lebesgue(),
            m2: density_seven(),
            expect_similar_mod_compact: true,
            expect_approx_similar: true,
        },
        CorpusPair {
            name: "extra-isolated-atom",
            m1: left_half(),
            m2: left_half_with_atom(),
            expect_similar_mod_compact: true,
            expect_approx_similar: false,
        },
    ]
}
