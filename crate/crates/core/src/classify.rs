//! Decision procedures for when two multiplication operators are similar
//! modulo compacts or approximately similar, plus the constructive witnesses:
//! the indicator-neighborhood embedding pair, diagonal matching toward a
//! shared cluster set, and the atom-absorption demonstration.

use crate::dyadic::{self, Ambient};
use crate::lpnum::{mult_operator, Coord, LpOperator, NormEstimate, NormMethod, WeightedSpace};
use crate::measure::{ClosedSetDesc, MeasureSpec};
use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// One structured fact feeding a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reason {
    EquivalentNonatomic(bool),
    ClusterSetsEqual(bool),
    SupportsEqual(bool),
}

/// Outcome of a classification: similarity modulo compacts (when the
/// criterion applies) and approximate similarity, with the facts behind them.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub similar_mod_compact: Option<bool>,
    pub approx_similar: bool,
    pub reasons: Vec<Reason>,
}

/// Spectrum of the multiplication operator: the support of the measure.
pub fn spectrum(m: &MeasureSpec) -> ClosedSetDesc {
    m.support()
}

/// Essential spectrum: the cluster points of the support.
pub fn essential_spectrum(m: &MeasureSpec) -> ClosedSetDesc {
    m.cluster_points()
}

fn facts(m1: &MeasureSpec, m2: &MeasureSpec) -> Result<(bool, bool, bool)> {
    let (n1, n2, _) = MeasureSpec::normalize_pair(m1, m2)?;
    let equivalent = n1.equivalent_nonatomic(&n2)?;
    let clusters = n1.cluster_points().same_as(&n2.cluster_points());
    let supports = n1.support().same_as(&n2.support());
    Ok((equivalent, clusters, supports))
}

/// Similarity modulo compact operators, decided by the equivalence of the
/// continuous parts and equality of the cluster sets. Needs `p != 2` and
/// infinite supports.
pub fn similar_mod_compact(m1: &MeasureSpec, m2: &MeasureSpec, p: f64) -> Result<Verdict> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::BadExponent(p));
    }
    if p == 2.0 {
        return Err(Error::HilbertCaseExcluded);
    }
    if !m1.support_is_infinite() || !m2.support_is_infinite() {
        return Err(Error::HypothesisViolated("supports must not be finite sets".into()));
    }
    let (equivalent, clusters, supports) = facts(m1, m2)?;
    Ok(Verdict {
        similar_mod_compact: Some(equivalent && clusters),
        approx_similar: equivalent && supports,
        reasons: vec![
            Reason::EquivalentNonatomic(equivalent),
            Reason::ClusterSetsEqual(clusters),
            Reason::SupportsEqual(supports),
        ],
    })
}

/// Approximate similarity: equivalence of the continuous parts and exact
/// support equality. No exponent hypothesis.
pub fn approx_similar(m1: &MeasureSpec, m2: &MeasureSpec) -> Result<Verdict> {
    let (equivalent, _, supports) = facts(m1, m2)?;
    Ok(Verdict {
        similar_mod_compact: None,
        approx_similar: equivalent && supports,
        reasons: vec![Reason::EquivalentNonatomic(equivalent), Reason::SupportsEqual(supports)],
    })
}

/// Almost-intertwining embedding of a diagonal sequence operator into the
/// measure space: `L` maps unit vectors to normalized indicators of shrinking
/// neighborhoods, `R` averages back, and `R L = I` exactly when the
/// neighborhoods are disjoint.
#[derive(Debug, Clone)]
pub struct EmbeddingPair {
    pub l: LpOperator,
    pub r: LpOperator,
    /// Neighborhood radii, strictly decreasing.
    pub epsilons: Vec<f64>,
    /// Exact norm of `Mhat L - L diag(entries)`.
    pub defect_ml_ld: f64,
    /// Exact norm of `R Mhat - diag(entries) R`.
    pub defect_rm_dr: f64,
    /// Max entry deviation of `R L` from the identity.
    pub defect_rl_i: f64,
    pub norm_l: NormEstimate,
    pub norm_r: NormEstimate,
    /// Distance from the diagonal model to the ideal operator.
    pub discretization: f64,
}

impl EmbeddingPair {
    /// All four defect norms within the target, allowing the resolution gap
    /// (a cell reached by a radius can stick out by its diameter).
    pub fn within(&self, target: f64) -> bool {
        let slack = target + 2.0 * self.discretization;
        self.defect_ml_ld <= slack
            && self.defect_rm_dr <= slack
            && self.defect_rl_i <= target
            && self.norm_l.lower <= 1.0 + target
            && self.norm_r.lower <= 1.0 + target
    }
}

/// Build the embedding pair for diagonal `entries` inside the nonatomic part
/// of `m`, with neighborhoods realized as unions of positive finest cells
/// meeting the ball of radius `eps_n` around each entry.
pub fn build_embedding(
    m: &MeasureSpec,
    entries: &[Complex64],
    p: f64,
    target_defect: f64,
    finest: u32,
) -> Result<EmbeddingPair> {
    if !(target_defect > 0.0) {
        return Err(Error::InvalidSpec(format!("target defect must be positive, got {target_defect}")));
    }
    for (a, x) in entries.iter().enumerate() {
        for y in &entries[a + 1..] {
            if (x - y).norm() <= 1e-12 {
                return Err(Error::InvalidSpec("diagonal entries must be distinct".into()));
            }
        }
    }
    let (normalized, _) = m.normalize()?;
    let (nonatomic, _) = normalized.split_parts();
    let (mhat, disc) = mult_operator(&nonatomic, finest, p)?;
    let space = mhat.domain.clone();
    let k = entries.len();
    let q = space.dual_exponent();

    // Global nearest-pair distance keeps the radius schedule strictly
    // decreasing across entries.
    let min_dist = entries
        .iter()
        .enumerate()
        .flat_map(|(a, x)| entries[a + 1..].iter().map(move |y| (x - y).norm()))
        .fold(f64::INFINITY, f64::min);
    let base = target_defect.min(min_dist / 2.0);

    let mut epsilons = Vec::with_capacity(k);
    let mut neighborhoods: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut used = vec![false; space.dim()];
    for (n, &lam) in entries.iter().enumerate() {
        let eps = base * 0.5f64.powi(n as i32 + 1);
        let mut cells = Vec::new();
        for (i, &coord) in space.coords.iter().enumerate() {
            let Coord::Cell(cell) = coord else { continue };
            if dyadic::geometry(cell, nonatomic.ambient).distance(lam) < eps {
                if used[i] {
                    return Err(Error::Refine { level: finest });
                }
                used[i] = true;
                cells.push(i);
            }
        }
        if cells.is_empty() {
            return Err(Error::EntryOffSupport { x: lam.re, y: lam.im });
        }
        epsilons.push(eps);
        neighborhoods.push(cells);
    }

    let masses: Vec<f64> = neighborhoods
        .iter()
        .map(|cells| cells.iter().map(|&i| space.weights[i]).sum())
        .collect();
    let mut lmat: DMatrix<Complex64> = DMatrix::zeros(space.dim(), k);
    let mut rmat: DMatrix<Complex64> = DMatrix::zeros(k, space.dim());
    for (n, cells) in neighborhoods.iter().enumerate() {
        let lscale = masses[n].powf(-1.0 / p);
        let rscale = masses[n].powf(-1.0 / q);
        for &i in cells {
            lmat[(i, n)] = Complex64::new(lscale, 0.0);
            rmat[(n, i)] = Complex64::new(space.weights[i] * rscale, 0.0);
        }
    }
    let seq = WeightedSpace::sequence(k, p)?;
    let l = LpOperator::new(seq.clone(), space.clone(), lmat)?;
    let r = LpOperator::new(space.clone(), seq, rmat)?;

    // Disjoint supports make both defect operators exact direct sums: the
    // commutator with Mhat is a max of one column norm (for L) or one
    // Hoelder functional norm (for R) per entry.
    let mut defect_ml_ld = 0.0f64;
    let mut defect_rm_dr = 0.0f64;
    for (n, cells) in neighborhoods.iter().enumerate() {
        let lam = entries[n];
        let col: f64 = cells
            .iter()
            .map(|&i| space.weights[i] * (mhat.entries[(i, i)] - lam).norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
            / masses[n].powf(1.0 / p);
        defect_ml_ld = defect_ml_ld.max(col);
        let row: f64 = cells
            .iter()
            .map(|&i| space.weights[i] * (mhat.entries[(i, i)] - lam).norm().powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
            / masses[n].powf(1.0 / q);
        defect_rm_dr = defect_rm_dr.max(row);
    }
    let rl = &r.entries * &l.entries;
    let mut defect_rl_i = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let expect = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::default() };
            defect_rl_i = defect_rl_i.max((rl[(i, j)] - expect).norm());
        }
    }

    Ok(EmbeddingPair {
        l,
        r,
        epsilons,
        defect_ml_ld,
        defect_rm_dr,
        defect_rl_i,
        norm_l: NormEstimate::exact(1.0, NormMethod::ExactDisjointBlocks),
        norm_r: NormEstimate::exact(1.0, NormMethod::ExactDisjointBlocks),
        discretization: disc,
    })
}

/// A pairing of two diagonal sequences sharing a cluster set: a far-from-the-
/// cluster head matched by nearest neighbor, and a rank-matched tail whose
/// deviations shrink.
#[derive(Debug, Clone)]
pub struct Matching {
    /// Pairs of original indices `(into d1, into d2)`.
    pub pairs: Vec<(usize, usize)>,
    pub head_size: usize,
    /// `|d1 - d2|` over the tail pairs, nonincreasing.
    pub tail_deviation: Vec<f64>,
}

const CLUSTER_TOL: f64 = 0.1;

/// Greedy bottleneck matching of two diagonal sequences toward a common
/// cluster set. Both tails must actually approach the cluster set.
pub fn match_diagonals(
    d1: &[Complex64],
    d2: &[Complex64],
    cluster: &ClosedSetDesc,
    ambient: Ambient,
) -> Result<Matching> {
    if d1.len() != d2.len() {
        return Err(Error::HypothesisViolated(format!(
            "diagonal lengths differ: {} vs {}",
            d1.len(),
            d2.len()
        )));
    }
    for d in [d1, d2] {
        for (a, x) in d.iter().enumerate() {
            for y in &d[a + 1..] {
                if (x - y).norm() <= 1e-12 {
                    return Err(Error::InvalidSpec("diagonal entries must be distinct".into()));
                }
            }
        }
    }
    if d1.is_empty() {
        return Ok(Matching { pairs: Vec::new(), head_size: 0, tail_deviation: Vec::new() });
    }
    let sorted_desc = |d: &[Complex64]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.sort_by(|&a, &b| {
            cluster
                .distance(d[b], ambient)
                .partial_cmp(&cluster.distance(d[a], ambient))
                .unwrap()
                .then((d[a].re, d[a].im).partial_cmp(&(d[b].re, d[b].im)).unwrap())
        });
        idx
    };
    let s1 = sorted_desc(d1);
    let s2 = sorted_desc(d2);
    // Shared cluster set: the closest entries of both lists must reach it.
    for (d, s) in [(d1, &s1), (d2, &s2)] {
        let nearest = cluster.distance(d[*s.last().unwrap()], ambient);
        if nearest > CLUSTER_TOL {
            return Err(Error::HypothesisViolated(format!(
                "entries stay at distance {nearest} from the declared cluster set"
            )));
        }
    }
    let dev = |i: usize, j: usize| (d1[s1[i]] - d2[s2[j]]).norm();
    // Smallest head whose removal leaves the rank-paired deviations
    // nonincreasing.
    let n = d1.len();
    let mut head_size = 0;
    for h in 0..n {
        if (h + 1..n).all(|i| dev(i, i) <= dev(i - 1, i - 1) + 1e-12) {
            head_size = h;
            break;
        }
        head_size = h + 1;
    }
    // Head: nearest-neighbor pairing among the far entries.
    let mut pairs = Vec::with_capacity(n);
    let mut taken = vec![false; head_size];
    for i in 0..head_size {
        let (j, _) = (0..head_size)
            .filter(|&j| !taken[j])
            .map(|j| (j, dev(i, j)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("head slot available");
        taken[j] = true;
        pairs.push((s1[i], s2[j]));
    }
    let mut tail_deviation = Vec::with_capacity(n - head_size);
    for i in head_size..n {
        pairs.push((s1[i], s2[i]));
        tail_deviation.push(dev(i, i));
    }
    Ok(Matching { pairs, head_size, tail_deviation })
}

/// One resolution step of the absorption demonstration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AbsorbStep {
    pub target: f64,
    pub defect_ml_ld: f64,
    pub defect_rm_dr: f64,
    pub defect_rl_i: f64,
    pub within_target: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsorbReport {
    pub steps: Vec<AbsorbStep>,
}

impl AbsorbReport {
    pub fn all_within(&self) -> bool {
        self.steps.iter().all(|s| s.within_target)
    }
}

/// Demonstrate absorption of a diagonal block: build the embedding pair at
/// shrinking target defects and report the defect trend.
pub fn atom_absorb_demo(
    m: &MeasureSpec,
    entries: &[Complex64],
    p: f64,
    finest: u32,
) -> Result<AbsorbReport> {
    let mut steps = Vec::new();
    for target in [0.2, 0.1, 0.05] {
        if entries.is_empty() {
            steps.push(AbsorbStep {
                target,
                defect_ml_ld: 0.0,
                defect_rm_dr: 0.0,
                defect_rl_i: 0.0,
                within_target: true,
            });
            continue;
        }
        let emb = build_embedding(m, entries, p, target, finest)?;
        steps.push(AbsorbStep {
            target,
            defect_ml_ld: emb.defect_ml_ld,
            defect_rm_dr: emb.defect_rm_dr,
            defect_rl_i: emb.defect_rl_i,
            within_target: emb.within(target),
        });
    }
    Ok(AbsorbReport { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::CellId;
    use crate::measure::{Atom, Frame, NonatomicPart};
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;

    fn lebesgue(level: u32) -> MeasureSpec {
        MeasureSpec::uniform(Ambient::Line, level)
    }

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn self_comparison_is_true_true() {
        let m = lebesgue(3);
        let v = similar_mod_compact(&m, &m, 3.0).unwrap();
        assert_eq!(v.similar_mod_compact, Some(true));
        assert!(v.approx_similar);
        assert!(approx_similar(&m, &m).unwrap().approx_similar);
    }

    #[test]
    fn hilbert_and_finite_support_hypotheses() {
        let m = lebesgue(2);
        assert!(matches!(similar_mod_compact(&m, &m, 2.0), Err(Error::HilbertCaseExcluded)));
        let finite = MeasureSpec::new(
            Ambient::Line,
            Frame::unit(),
            vec![Atom { point: re(0.5), mass: 1.0 }],
            NonatomicPart::default(),
            vec![],
        )
        .unwrap();
        assert!(matches!(
            similar_mod_compact(&m, &finite, 3.0),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn halves_disagree_everywhere() {
        let mut left = lebesgue(1);
        left.nonatomic.densities.remove(&2);
        let mut right = lebesgue(1);
        right.nonatomic.densities.remove(&1);
        let v = similar_mod_compact(&left, &right, 3.0).unwrap();
        assert_eq!(v.similar_mod_compact, Some(false));
        assert!(!v.approx_similar);
    }

    #[test]
    fn isolated_atom_breaks_support_not_clusters() {
        let mut left = lebesgue(1);
        left.nonatomic.densities.remove(&2);
        let mut with_atom = left.clone();
        with_atom.atoms = vec![Atom { point: re(0.75), mass: 0.5 }];
        let v = similar_mod_compact(&left, &with_atom, 1.5).unwrap();
        assert_eq!(v.similar_mod_compact, Some(true));
        assert!(!v.approx_similar);
        assert!(v.reasons.contains(&Reason::SupportsEqual(false)));
    }

    #[test]
    fn spectra_delegate() {
        let m = lebesgue(2);
        assert_eq!(spectrum(&m).cells, BTreeSet::from([CellId::ROOT]));
        assert!(spectrum(&m).points.is_empty());
        assert_eq!(essential_spectrum(&m).cells, BTreeSet::from([CellId::ROOT]));
        let atoms = MeasureSpec::new(
            Ambient::Line,
            Frame::unit(),
            vec![Atom { point: re(0.25), mass: 1.0 }, Atom { point: re(0.75), mass: 1.0 }],
            NonatomicPart::default(),
            vec![],
        )
        .unwrap();
        assert_eq!(spectrum(&atoms).points.len(), 2);
        assert!(essential_spectrum(&atoms).is_empty());
    }

    #[test]
    fn embedding_single_entry_exact() {
        let emb = build_embedding(&lebesgue(0), &[re(0.5)], 3.0, 0.25, 6).unwrap();
        assert_eq!(emb.epsilons.len(), 1);
        assert_relative_eq!(emb.norm_l.lower, 1.0);
        assert!(emb.defect_rl_i <= 1e-12);
        // The L column really is a normalized indicator: unit norm image.
        let e0 = nalgebra::DVector::from_element(1, Complex64::new(1.0, 0.0));
        let image = emb.l.apply(&e0);
        assert_relative_eq!(emb.l.codomain.vec_norm(&image), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn embedding_two_disjoint_entries() {
        let emb = build_embedding(&lebesgue(0), &[re(0.25), re(0.75)], 2.0, 0.2, 8).unwrap();
        assert!(emb.defect_rl_i <= 1e-12);
        assert!(emb.epsilons[1] < emb.epsilons[0]);
        assert!(emb.within(0.2), "defects {} {}", emb.defect_ml_ld, emb.defect_rm_dr);
    }

    #[test]
    fn embedding_errors() {
        // Off the support of the left-half measure.
        let mut left = lebesgue(1);
        left.nonatomic.densities.remove(&2);
        assert!(matches!(
            build_embedding(&left, &[re(0.9)], 2.0, 0.01, 8),
            Err(Error::EntryOffSupport { .. })
        ));
        assert!(build_embedding(&lebesgue(0), &[re(0.5), re(0.5)], 2.0, 0.1, 6).is_err());
    }

    #[test]
    fn matching_identity_and_permutation() {
        let d: Vec<Complex64> = (1..=10).map(|n| re(1.0 / n as f64)).collect();
        let cluster = ClosedSetDesc { cells: BTreeSet::new(), points: vec![re(0.0)] };
        let m = match_diagonals(&d, &d, &cluster, Ambient::Line).unwrap();
        assert!(m.tail_deviation.iter().all(|&v| v <= 1e-12));
        for &(i, j) in &m.pairs {
            assert_relative_eq!(d[i].re, d[j].re);
        }
        let mut perm = d.clone();
        perm.reverse();
        let mp = match_diagonals(&d, &perm, &cluster, Ambient::Line).unwrap();
        let mut seen1: Vec<usize> = mp.pairs.iter().map(|&(i, _)| i).collect();
        let mut seen2: Vec<usize> = mp.pairs.iter().map(|&(_, j)| j).collect();
        seen1.sort_unstable();
        seen2.sort_unstable();
        assert_eq!(seen1, (0..10).collect::<Vec<_>>());
        assert_eq!(seen2, (0..10).collect::<Vec<_>>());
        for &(i, j) in &mp.pairs {
            assert_relative_eq!(d[i].re, perm[j].re, max_relative = 1e-12);
        }
    }

    #[test]
    fn matching_reciprocal_vs_reciprocal_squared() {
        let d1: Vec<Complex64> = (1..=50).map(|n| re(1.0 / n as f64)).collect();
        let d2: Vec<Complex64> = (1..=50).map(|n| re(1.0 / (n * n) as f64)).collect();
        let cluster = ClosedSetDesc { cells: BTreeSet::new(), points: vec![re(0.0)] };
        let m = match_diagonals(&d1, &d2, &cluster, Ambient::Line).unwrap();
        assert!(m.tail_deviation.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(*m.tail_deviation.last().unwrap() < 0.05);
    }

    #[test]
    fn matching_rejects_wrong_cluster_set() {
        let d1: Vec<Complex64> = (1..=10).map(|n| re(1.0 / n as f64)).collect();
        let d2: Vec<Complex64> = (1..=10).map(|n| re(1.0 + 1.0 / n as f64)).collect();
        let cluster = ClosedSetDesc { cells: BTreeSet::new(), points: vec![re(0.0)] };
        assert!(matches!(
            match_diagonals(&d1, &d2, &cluster, Ambient::Line),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn absorb_demo_trends_under_targets() {
        let report =
            atom_absorb_demo(&lebesgue(0), &[re(0.25), re(0.75)], 3.0, 10).unwrap();
        assert_eq!(report.steps.len(), 3);
        assert!(report.all_within());
        let empty = atom_absorb_demo(&lebesgue(0), &[], 3.0, 6).unwrap();
        assert!(empty.all_within());
        assert_eq!(empty.steps[0].defect_ml_ld, 0.0);
    }
}
