//! Diagonal-plus-small decomposition of the multiplication operator.
//!
//! The pipeline: pick diagonal entries (one representative point per dyadic
//! cell), pick the indicator cutoff from the target accuracy, build the hybrid
//! Haar basis, form `D` (diagonal in that basis) and the remainder
//! `K = Mhat - D`, and assemble a certificate whose every number is either an
//! exact disjoint-block norm or a bracketing estimate labeled with its side.
//! Atoms bypass the basis machinery entirely: they are exact diagonal
//! coordinates contributing zero to `K`.

use crate::dyadic::{self, Ambient, CellId};
use crate::haar::{ElementKind, HaarBasis};
use crate::lpnum::{
    self, hs_norm, mult_operator, norm_exact_disjoint, Coord, LpOperator, NormEstimate,
    WeightedSpace,
};
use crate::measure::MeasureSpec;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Chosen diagonal entries: one point per dyadic cell, every level up to the
/// finest. Cells meeting the support get the center of their heaviest
/// finest-level descendant (ties broken toward the lowest index); cells
/// missing it get 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPlan {
    pub lambda: BTreeMap<(u32, u64), Complex64>,
    pub finest: u32,
}

impl DiagonalPlan {
    pub fn entry(&self, level: u32, index: u64) -> Complex64 {
        self.lambda.get(&(level, index)).copied().unwrap_or_default()
    }
}

/// Representative points for every cell of the tree over the nonatomic part.
/// Expects a normalized spec (unit frame); works level by level bottom-up.
pub fn choose_lambda(m: &MeasureSpec, finest: u32) -> Result<DiagonalPlan> {
    let finest = finest.max(m.nonatomic.level);
    let refined = m.refine(finest)?;
    let map = refined.frame.to_map();
    // best[j-1] = (mass, finest index) of the heaviest positive descendant.
    let mut best: Vec<Option<(f64, u64)>> = (1..=(1u64 << finest))
        .map(|j| refined.nonatomic.densities.get(&j).map(|&d| (d, j)))
        .collect();
    let mut lambda = BTreeMap::new();
    for n in (0..=finest).rev() {
        for (jm1, slot) in best.iter().enumerate() {
            let j = jm1 as u64 + 1;
            let point = match slot {
                Some((_, fj)) => map.backward(
                    dyadic::geometry(CellId { level: finest, index: *fj }, refined.ambient)
                        .center(),
                ),
                None => Complex64::default(),
            };
            lambda.insert((n, j), point);
        }
        if n > 0 {
            best = best
                .chunks(2)
                .map(|pair| match (pair[0], pair[1]) {
                    (Some(a), Some(b)) => Some(if b.0 > a.0 { b } else { a }),
                    (a, b) => a.or(b),
                })
                .collect();
        }
    }
    Ok(DiagonalPlan { lambda, finest })
}

/// The per-level distance rate for tail blocks at level `n >= 1`: the
/// diameter bound of the parent cell `A_{n-1,j}`.
pub fn tail_rate(ambient: Ambient, n: u32) -> f64 {
    match ambient {
        Ambient::Line => 0.5f64.powi(n as i32 - 1),
        Ambient::Plane => 2.0 * 2.0f64.powf(-(n as f64 - 1.0) / 2.0),
    }
}

/// The distance rate for the level-`cutoff` indicator head blocks.
pub fn head_rate(ambient: Ambient, cutoff: u32) -> f64 {
    match ambient {
        Ambient::Line => 0.5f64.powi(cutoff as i32),
        Ambient::Plane => 2.0 * 2.0f64.powf(-(cutoff as f64) / 2.0),
    }
}

/// Closed-form geometric total of head rate plus the full tail series from
/// `cutoff + 1` on: `3 * 2^-N` on the line, `(3 + sqrt 2) * 2^(1 - N/2)` on
/// the plane.
pub fn rate_total(ambient: Ambient, cutoff: u32) -> f64 {
    match ambient {
        Ambient::Line => 3.0 * 0.5f64.powi(cutoff as i32),
        Ambient::Plane => (3.0 + 2.0f64.sqrt()) * 2.0 * 2.0f64.powf(-(cutoff as f64) / 2.0),
    }
}

/// Smallest cutoff `N <= cap` with `constant * rate_total(N) < epsilon`.
pub fn choose_cutoff(p: f64, epsilon: f64, constant: f64, ambient: Ambient, cap: u32) -> Result<u32> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::BadExponent(p));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidSpec(format!("epsilon must be positive, got {epsilon}")));
    }
    (0..=cap)
        .find(|&n| constant * rate_total(ambient, n) < epsilon)
        .ok_or(Error::LevelCapExceeded { epsilon, cap })
}

/// Exact norms `||(Mhat - lambda) u||` of the disjoint blocks of one basis
/// group, element by element, via the direct-sum norm of 1-column blocks.
fn group_block_norms(
    basis: &HaarBasis,
    centers: &[Complex64],
    plan: &DiagonalPlan,
    group: &[usize],
) -> Result<Vec<f64>> {
    let mut blocks = Vec::with_capacity(group.len());
    for &e in group {
        let el = &basis.elements[e];
        let (lv, ix) = match el.kind {
            ElementKind::Head { cell } => (cell.level, cell.index),
            ElementKind::Tail { n, j } => (n - 1, j),
        };
        let lam = plan.entry(lv, ix);
        let coords: Vec<Coord> = el.values.iter().map(|&(i, _)| basis.space.coords[i]).collect();
        let weights: Vec<f64> = el.values.iter().map(|&(i, _)| basis.space.weights[i]).collect();
        let col = DVector::from_iterator(
            el.values.len(),
            el.values.iter().map(|&(i, v)| (centers[i] - lam) * v),
        );
        let codomain = WeightedSpace::new(coords, weights, basis.space.p)?;
        let domain = WeightedSpace::new(vec![Coord::Atom(e)], vec![1.0], basis.space.p)?;
        blocks.push(LpOperator::new(domain, codomain, DMatrix::from_column_slice(el.values.len(), 1, col.as_slice()))?);
    }
    // The direct-sum norm cross-checks disjointness; per-block norms follow
    // from the same column evaluation.
    norm_exact_disjoint(&blocks)?;
    Ok(blocks
        .iter()
        .map(|b| {
            let col = DVector::from_fn(b.codomain.dim(), |i, _| b.entries[(i, 0)]);
            b.codomain.vec_norm(&col)
        })
        .collect())
}

/// Exact per-element and per-level block norms of `Mhat - D` for the hybrid
/// basis of the nonatomic part, without forming any dense matrix. Cheap enough
/// for the deepest levels the cell count allows.
#[derive(Debug, Clone)]
pub struct BlockNorms {
    /// Norms for the head elements, in element order.
    pub head: Vec<f64>,
    /// Level -> norms for that level's tail elements, in element order.
    pub tail: BTreeMap<u32, Vec<f64>>,
}

impl BlockNorms {
    pub fn head_max(&self) -> f64 {
        self.head.iter().copied().fold(0.0, f64::max)
    }

    pub fn tail_max(&self, n: u32) -> f64 {
        self.tail.get(&n).map_or(0.0, |v| v.iter().copied().fold(0.0, f64::max))
    }
}

/// Block norms for a measure (nonatomic part) at the given resolution and
/// cutoff, together with the basis and plan that produced them.
pub fn block_norms(
    m: &MeasureSpec,
    p: f64,
    finest: u32,
    cutoff: u32,
) -> Result<(HaarBasis, DiagonalPlan, BlockNorms)> {
    let (normalized, _) = m.normalize()?;
    let (nonatomic, _) = normalized.split_parts();
    let finest = finest.max(nonatomic.nonatomic.level);
    let basis = HaarBasis::hybrid(&nonatomic, finest, cutoff, p)?;
    let plan = choose_lambda(&nonatomic, finest)?;
    let (mhat, _) = mult_operator(&nonatomic, finest, p)?;
    let centers: Vec<Complex64> = (0..basis.dim()).map(|i| mhat.entries[(i, i)]).collect();
    let head = group_block_norms(&basis, &centers, &plan, &basis.head_indices())?;
    let mut tail = BTreeMap::new();
    for n in cutoff + 1..=finest {
        let group = basis.tail_indices(n);
        if !group.is_empty() {
            tail.insert(n, group_block_norms(&basis, &centers, &plan, &group)?);
        }
    }
    Ok((basis, plan, BlockNorms { head, tail }))
}

/// Everything the decomposition claims, with each number labeled exact or
/// one-sided.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionCertificate {
    pub ambient: Ambient,
    pub p: f64,
    pub finest_level: u32,
    pub cutoff: u32,
    pub target_epsilon: f64,
    /// `||M - Mhat||`, from the finest cell diameter.
    pub discretization_error: f64,
    /// Exact max block norm of the level-`cutoff` indicator head.
    pub head_norm: f64,
    /// Level -> exact max block norm over that level's tail elements.
    pub per_level_block_norm: BTreeMap<u32, f64>,
    /// Bracketing of the head coordinate-projection norm.
    pub head_proj: NormEstimate,
    /// Level -> bracketing of that level's coordinate-projection norm.
    pub per_level_proj: BTreeMap<u32, NormEstimate>,
    /// Rate-only closed-form total at the cutoff (constant 1).
    pub paper_bound_at_cutoff: f64,
    /// Max block norm: attained on a basis vector, so a true lower bound.
    pub total_k_bound_lower: f64,
    /// Triangle-inequality total: sum of block norm times projection upper.
    pub total_k_bound_upper: f64,
    /// Line case: level -> 1-summing bound shape of the level's block
    /// multipliers (head recorded under the cutoff level). Up to the
    /// p-dependent constant.
    pub pi1_bounds: Option<BTreeMap<u32, f64>>,
    /// p = 2 only: exact Hilbert-Schmidt norm of `K`.
    pub hs_norm_k: Option<f64>,
}

impl DecompositionCertificate {
    /// Upper bounds on `||K (I - P_head - ... - P_M)||` for
    /// `M = cutoff..=finest`: the remaining triangle-inequality tail.
    pub fn tail_decay(&self) -> Vec<f64> {
        (self.cutoff..=self.finest_level)
            .map(|m| {
                self.per_level_block_norm
                    .iter()
                    .filter(|(&n, _)| n > m)
                    .map(|(n, b)| b * proj_upper(&self.per_level_proj[n]))
                    .sum()
            })
            .collect()
    }

    /// One deterministic text record per field, one line per level.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        let mut push = |line: String| {
            out.push_str(&line);
            out.push('\n');
        };
        push("record certificate".into());
        push(format!("ambient {:?}", self.ambient).to_lowercase());
        push(format!("p {}", self.p));
        push(format!("finest_level {}", self.finest_level));
        push(format!("cutoff {}", self.cutoff));
        push(format!("target_epsilon {}", self.target_epsilon));
        push(format!("discretization_error {}", self.discretization_error));
        push(format!(
            "head block_norm {} proj_lower {} proj_upper {}",
            self.head_norm,
            self.head_proj.lower,
            proj_upper(&self.head_proj)
        ));
        for (n, b) in &self.per_level_block_norm {
            let proj = &self.per_level_proj[n];
            push(format!(
                "level {n} block_norm {b} rate {} proj_lower {} proj_upper {}",
                tail_rate(self.ambient, *n),
                proj.lower,
                proj_upper(proj)
            ));
        }
        if let Some(pi1) = &self.pi1_bounds {
            for (n, v) in pi1 {
                push(format!("pi1 level {n} bound_shape {v}"));
            }
        }
        if let Some(hs) = self.hs_norm_k {
            push(format!("hs_norm_k {hs}"));
        }
        push(format!("paper_bound_at_cutoff {}", self.paper_bound_at_cutoff));
        push(format!("total_k_bound lower {} upper {}", self.total_k_bound_lower, self.total_k_bound_upper));
        out
    }
}

fn proj_upper(est: &NormEstimate) -> f64 {
    est.upper.expect("projection estimates always carry an upper bound")
}

/// A finished decomposition run: the diagonal model, its split, the basis
/// over the nonatomic coordinates, and the certificate.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Normalized input, nonatomic part refined to the finest level.
    pub measure: MeasureSpec,
    pub mhat: LpOperator,
    pub d: LpOperator,
    pub k: LpOperator,
    /// Absent when the measure is purely atomic.
    pub basis: Option<HaarBasis>,
    pub plan: DiagonalPlan,
    pub cert: DecompositionCertificate,
}

impl Decomposition {
    /// Number of leading coordinates that are cells (the rest are atoms).
    pub fn cell_dim(&self) -> usize {
        self.basis.as_ref().map_or(0, |b| b.dim())
    }

    /// Pad a cell-coordinate vector with zeros on the atom coordinates.
    fn embed(&self, f: &DVector<Complex64>) -> DVector<Complex64> {
        let mut g = DVector::from_element(self.mhat.domain.dim(), Complex64::default());
        for i in 0..f.len() {
            g[i] = f[i];
        }
        g
    }
}

const PROJ_SAMPLES: usize = 8;
const PROJ_SEED: u64 = 42;

fn lambda_index(kind: &ElementKind) -> (u32, u64) {
    match *kind {
        ElementKind::Head { cell } => (cell.level, cell.index),
        ElementKind::Tail { n, j } => (n - 1, j),
    }
}

/// `Mhat = D + K` with a certified bound on `||K||`.
///
/// The cutoff starts at the rate-only closed form and grows until the
/// certified upper bound (plus the discretization error) beats `epsilon`;
/// running out of levels reports the cap.
pub fn decompose(m: &MeasureSpec, p: f64, epsilon: f64, finest: u32) -> Result<Decomposition> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidSpec(format!("epsilon must be positive, got {epsilon}")));
    }
    let (normalized, _) = m.normalize()?;
    let finest = finest.max(normalized.nonatomic.level);
    let normalized = if normalized.nonatomic.is_empty() {
        normalized
    } else {
        normalized.refine(finest)?
    };
    let (mhat, disc) = mult_operator(&normalized, finest, p)?;

    if normalized.nonatomic.is_empty() {
        // Purely atomic: multiplication is already diagonal, K = 0.
        let dim = mhat.domain.dim();
        let d = mhat.clone();
        let k = LpOperator::new(mhat.domain.clone(), mhat.codomain.clone(), DMatrix::zeros(dim, dim))?;
        let cert = DecompositionCertificate {
            ambient: normalized.ambient,
            p,
            finest_level: finest,
            cutoff: 0,
            target_epsilon: epsilon,
            discretization_error: 0.0,
            head_norm: 0.0,
            per_level_block_norm: BTreeMap::new(),
            head_proj: NormEstimate::exact(0.0, lpnum::NormMethod::ExactDisjointBlocks),
            per_level_proj: BTreeMap::new(),
            paper_bound_at_cutoff: 0.0,
            total_k_bound_lower: 0.0,
            total_k_bound_upper: 0.0,
            pi1_bounds: (normalized.ambient == Ambient::Line).then(BTreeMap::new),
            hs_norm_k: (p == 2.0).then_some(0.0),
        };
        let plan = choose_lambda(&normalized, finest)?;
        return Ok(Decomposition { measure: normalized, mhat, d, k, basis: None, plan, cert });
    }

    let start = choose_cutoff(p, epsilon, 1.0, normalized.ambient, finest)?;
    let mut last_err = None;
    for cutoff in start..=finest {
        match decompose_at_cutoff(&normalized, &mhat, disc, p, epsilon, finest, cutoff)? {
            dec if dec.cert.total_k_bound_upper + disc < epsilon => return Ok(dec),
            dec => last_err = Some(dec.cert.total_k_bound_upper),
        }
    }
    let _ = last_err;
    Err(Error::LevelCapExceeded { epsilon, cap: finest })
}

fn decompose_at_cutoff(
    normalized: &MeasureSpec,
    mhat: &LpOperator,
    disc: f64,
    p: f64,
    epsilon: f64,
    finest: u32,
    cutoff: u32,
) -> Result<Decomposition> {
    let (nonatomic, _) = normalized.split_parts();
    let basis = HaarBasis::hybrid(&nonatomic, finest, cutoff, p)?;
    let plan = choose_lambda(&nonatomic, finest)?;
    let dim = mhat.domain.dim();
    let cell_dim = basis.dim();
    let centers: Vec<Complex64> = (0..cell_dim).map(|i| mhat.entries[(i, i)]).collect();

    // D in the cell basis: sum over elements of lambda * value-column times
    // dual-row, plus the exact atom diagonal.
    let mut dmat: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
    for el in &basis.elements {
        let (lv, ix) = lambda_index(&el.kind);
        let lam = plan.entry(lv, ix);
        for &(i, v) in &el.values {
            for &(kk, u) in &el.dual {
                dmat[(i, kk)] += lam * v * u;
            }
        }
    }
    for c in cell_dim..dim {
        dmat[(c, c)] = mhat.entries[(c, c)];
    }
    let d = LpOperator::new(mhat.domain.clone(), mhat.codomain.clone(), dmat)?;
    let k = LpOperator::new(
        mhat.domain.clone(),
        mhat.codomain.clone(),
        &mhat.entries - &d.entries,
    )?;

    // Exact block norms and projection brackets, level by level.
    let head_group = basis.head_indices();
    let head_norms = group_block_norms(&basis, &centers, &plan, &head_group)?;
    let head_norm = head_norms.iter().copied().fold(0.0, f64::max);
    let head_proj = NormEstimate {
        lower: basis.projection_lower(&head_group, PROJ_SAMPLES, PROJ_SEED),
        upper: Some(basis.projection_upper(&head_group)?),
        method: lpnum::NormMethod::Interpolation,
    };
    let mut per_level_block_norm = BTreeMap::new();
    let mut per_level_proj = BTreeMap::new();
    let mut tail_norms_by_level = BTreeMap::new();
    for n in cutoff + 1..=finest {
        let group = basis.tail_indices(n);
        if group.is_empty() {
            continue;
        }
        let norms = group_block_norms(&basis, &centers, &plan, &group)?;
        per_level_block_norm.insert(n, norms.iter().copied().fold(0.0, f64::max));
        per_level_proj.insert(
            n,
            NormEstimate {
                lower: basis.projection_lower(&group, PROJ_SAMPLES, PROJ_SEED),
                upper: Some(basis.projection_upper(&group)?),
                method: lpnum::NormMethod::Interpolation,
            },
        );
        tail_norms_by_level.insert(n, norms);
    }

    let total_upper = head_norm * proj_upper(&head_proj)
        + per_level_block_norm
            .iter()
            .map(|(n, b)| b * proj_upper(&per_level_proj[n]))
            .sum::<f64>();
    let total_lower = per_level_block_norm.values().copied().fold(head_norm, f64::max);

    let pi1_bounds = (normalized.ambient == Ambient::Line).then(|| {
        let mut map = BTreeMap::new();
        map.insert(cutoff, lpnum::pi1_diag_bound(&head_norms, p).expect("p validated"));
        for (n, norms) in &tail_norms_by_level {
            map.insert(*n, lpnum::pi1_diag_bound(norms, p).expect("p validated"));
        }
        map
    });
    let hs_norm_k = (p == 2.0).then(|| hs_norm(&k).expect("p = 2 spaces"));

    let cert = DecompositionCertificate {
        ambient: normalized.ambient,
        p,
        finest_level: finest,
        cutoff,
        target_epsilon: epsilon,
        discretization_error: disc,
        head_norm,
        per_level_block_norm,
        head_proj,
        per_level_proj,
        paper_bound_at_cutoff: rate_total(normalized.ambient, cutoff),
        total_k_bound_lower: total_lower,
        total_k_bound_upper: total_upper,
        pi1_bounds,
        hs_norm_k,
    };
    Ok(Decomposition {
        measure: normalized.clone(),
        mhat: mhat.clone(),
        d,
        k,
        basis: Some(basis),
        plan,
        cert,
    })
}

/// Line-only decomposition, guaranteeing the 1-summing certificate fields.
pub fn decompose_line(m: &MeasureSpec, p: f64, epsilon: f64, finest: u32) -> Result<Decomposition> {
    if m.ambient != Ambient::Line {
        return Err(Error::AmbientMismatch { expected: Ambient::Line, got: m.ambient });
    }
    decompose(m, p, epsilon, finest)
}

/// One re-checked claim of a certificate.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Independent re-verification of every certificate claim.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: String) {
        self.checks.push(CheckResult { name: name.into(), passed, detail });
    }
}

/// Re-check a decomposition against its own certificate: exact split, block
/// inequalities from the actual `D`, projection-composed bounds on samples,
/// monotone dominated tail decay, and diagonality of `D` in the basis.
pub fn verify_certificate(dec: &Decomposition) -> VerifyReport {
    let mut report = VerifyReport { checks: Vec::new() };
    let cert = &dec.cert;

    // Exactness of the split.
    let split_err = (&dec.d.entries + &dec.k.entries - &dec.mhat.entries)
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    report.push("split-exact", split_err <= 1e-12, format!("max |D+K-Mhat| = {split_err}"));

    let Some(basis) = &dec.basis else {
        let kmax = dec.k.entries.iter().map(|v| v.norm()).fold(0.0, f64::max);
        report.push("atomic-k-zero", kmax == 0.0, format!("max |K| = {kmax}"));
        return report;
    };

    // (a) Per-block inequalities recomputed from the actual operators.
    let diff = &dec.mhat.entries - &dec.d.entries;
    for (e, el) in basis.elements.iter().enumerate() {
        let (rate, label) = match el.kind {
            ElementKind::Head { cell } => {
                (head_rate(cert.ambient, cert.cutoff), format!("head ({},{})", cell.level, cell.index))
            }
            ElementKind::Tail { n, j } => (tail_rate(cert.ambient, n), format!("tail ({n},{j})")),
        };
        let f = dec.embed(&basis.element_vector(e));
        let image = &diff * &f;
        let norm = dec.mhat.codomain.vec_norm(&image);
        let recorded = match el.kind {
            ElementKind::Head { .. } => cert.head_norm,
            ElementKind::Tail { n, .. } => cert.per_level_block_norm.get(&n).copied().unwrap_or(0.0),
        };
        if norm > rate + 1e-12 || norm > recorded + 1e-9 {
            report.push(
                "block-inequality",
                false,
                format!("{label}: norm {norm} exceeds rate {rate} or recorded {recorded}"),
            );
        }
    }
    if !report.checks.iter().any(|c| c.name == "block-inequality") {
        report.push("block-inequality", true, "all blocks within rate and recorded norms".into());
    }

    // (b) Composed bounds ||(Mhat - D) P_n f|| <= blockNorm * projUpper * ||f||
    // on seeded samples.
    let mut rng = ChaCha8Rng::seed_from_u64(PROJ_SEED);
    let mut composed_ok = true;
    let mut composed_detail = String::from("sampled composed bounds hold");
    let mut groups: Vec<(String, Vec<usize>, f64, f64)> = vec![(
        "head".into(),
        basis.head_indices(),
        cert.head_norm,
        proj_upper(&cert.head_proj),
    )];
    for (n, b) in &cert.per_level_block_norm {
        groups.push((format!("level {n}"), basis.tail_indices(*n), *b, proj_upper(&cert.per_level_proj[n])));
    }
    for (label, group, block, proj) in &groups {
        for _ in 0..4 {
            let f = DVector::from_fn(basis.dim(), |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let nf = basis.space.vec_norm(&f);
            let pf = basis.project(group, &f);
            let image = &diff * &dec.embed(&pf);
            let got = dec.mhat.codomain.vec_norm(&image);
            if got > block * proj * nf * (1.0 + 1e-9) + 1e-12 {
                composed_ok = false;
                composed_detail =
                    format!("{label}: ||(Mhat-D)P f|| = {got} > {block} * {proj} * {nf}");
            }
        }
    }
    report.push("projection-composed", composed_ok, composed_detail);

    // (c) Tail decay: nonincreasing and dominated by the rate series times
    // the worst projection bound.
    let decay = cert.tail_decay();
    let nonincreasing = decay.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let proj_max = cert
        .per_level_proj
        .values()
        .map(proj_upper)
        .fold(proj_upper(&cert.head_proj), f64::max);
    let dominated = decay.iter().enumerate().all(|(i, &u)| {
        let m = cert.cutoff + i as u32;
        let series: f64 = (m + 1..=cert.finest_level).map(|n| tail_rate(cert.ambient, n)).sum();
        u <= proj_max * series + 1e-12
    });
    let last_zero = decay.last().is_none_or(|&u| u == 0.0);
    report.push(
        "tail-decay",
        nonincreasing && dominated && last_zero,
        format!("decay sequence {decay:?}, proj_max {proj_max}"),
    );

    // (d) D diagonal in the hybrid basis.
    let mut offdiag = 0.0f64;
    let mut diag_err = 0.0f64;
    for (e, el) in basis.elements.iter().enumerate() {
        let (lv, ix) = lambda_index(&el.kind);
        let lam = dec.plan.entry(lv, ix);
        let g = &dec.d.entries * dec.embed(&basis.element_vector(e));
        let coeffs = basis.analyze(&g.rows(0, basis.dim()).into_owned());
        for (i, c) in coeffs.iter().enumerate() {
            if i == e {
                diag_err = diag_err.max((c - lam).norm());
            } else {
                offdiag = offdiag.max(c.norm());
            }
        }
    }
    report.push(
        "diagonal-in-basis",
        offdiag <= 1e-10 && diag_err <= 1e-10,
        format!("max off-diagonal {offdiag}, max diagonal deviation {diag_err}"),
    );

    // Totals recomputed.
    let recomputed_upper = cert.head_norm * proj_upper(&cert.head_proj)
        + cert
            .per_level_block_norm
            .iter()
            .map(|(n, b)| b * proj_upper(&cert.per_level_proj[n]))
            .sum::<f64>();
    report.push(
        "totals",
        cert.total_k_bound_lower <= cert.total_k_bound_upper + 1e-12
            && (recomputed_upper - cert.total_k_bound_upper).abs() <= 1e-12,
        format!("lower {} upper {}", cert.total_k_bound_lower, cert.total_k_bound_upper),
    );

    // Line case: 1-summing shapes within their per-level rate shapes; p = 2:
    // Hilbert-Schmidt norm dominated by the recorded shape sum.
    if let Some(pi1) = &cert.pi1_bounds {
        let q = cert.p / (cert.p - 1.0);
        let e = q.min(2.0);
        let mut ok = true;
        let mut detail = String::from("pi1 shapes within rate shapes");
        for (&n, &v) in pi1 {
            let (count_exp, rate) = if n == cert.cutoff {
                (n as f64, head_rate(cert.ambient, n))
            } else {
                ((n as f64 - 1.0), tail_rate(cert.ambient, n))
            };
            let shape = 2.0f64.powf(count_exp / e) * rate;
            if v > shape + 1e-12 {
                ok = false;
                detail = format!("level {n}: pi1 shape {v} exceeds {shape}");
            }
        }
        report.push("pi1-shapes", ok, detail);
        if let Some(hs) = cert.hs_norm_k {
            let total: f64 = pi1.values().sum();
            report.push(
                "hs-dominated",
                hs <= total + 1e-10,
                format!("hs {hs} vs pi1 shape sum {total}"),
            );
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpnum::{op_norm, NormMode, PowerOpts};
    use crate::measure::{Atom, Frame, NonatomicPart};
    use approx::assert_relative_eq;

    fn lebesgue(level: u32) -> MeasureSpec {
        MeasureSpec::uniform(Ambient::Line, level)
    }

    #[test]
    fn lambda_heaviest_descendant_with_tie_break() {
        // Equal masses: ties go to the lowest finest index, so cell
        // (2,3) = [1/2, 3/4) gets the center of [1/2, 9/16) at L = 4.
        let plan = choose_lambda(&lebesgue(0), 4).unwrap();
        assert_relative_eq!(plan.entry(2, 3).re, 17.0 / 32.0);
        assert_relative_eq!(plan.entry(0, 1).re, 1.0 / 32.0);
        // Uneven masses: the heavier half wins.
        let m = MeasureSpec::new(
            Ambient::Line,
            Frame::unit(),
            vec![],
            NonatomicPart { level: 2, densities: [(1, 1.0), (2, 5.0), (3, 1.0)].into() },
            vec![],
        )
        .unwrap();
        let plan = choose_lambda(&m, 3).unwrap();
        // Heaviest cell is (2,2) = [1/4,1/2); its equal-mass finest halves tie
        // toward index 3, whose center is 5/16.
        assert_relative_eq!(plan.entry(0, 1).re, 5.0 / 16.0);
        assert_relative_eq!(plan.entry(1, 1).re, 5.0 / 16.0);
    }

    #[test]
    fn lambda_zero_off_support_and_constant_on_chain() {
        let m = MeasureSpec::new(
            Ambient::Line,
            Frame::unit(),
            vec![],
            NonatomicPart { level: 3, densities: [(6, 1.0)].into() },
            vec![],
        )
        .unwrap();
        let plan = choose_lambda(&m, 3).unwrap();
        assert_eq!(plan.entry(3, 1), Complex64::default());
        assert_eq!(plan.entry(1, 1), Complex64::default());
        // The single positive cell's center appears at every ancestor level.
        let center = 11.0 / 16.0;
        for (n, j) in [(0u32, 1u64), (1, 2), (2, 3), (3, 6)] {
            assert_relative_eq!(plan.entry(n, j).re, center);
        }
    }

    #[test]
    fn cutoff_closed_forms() {
        assert_eq!(choose_cutoff(2.0, 10.0, 1.0, Ambient::Plane, 14).unwrap(), 0);
        // Line, constant 1, epsilon 1/4: need 3 * 2^-N < 1/4 -> N = 4.
        assert_eq!(choose_cutoff(2.0, 0.25, 1.0, Ambient::Line, 14).unwrap(), 4);
        assert!(matches!(
            choose_cutoff(2.0, 1e-9, 1.0, Ambient::Line, 14),
            Err(Error::LevelCapExceeded { .. })
        ));
        // Halving epsilon raises the plane cutoff by at most 2.
        let mut eps = 8.0;
        let mut prev = choose_cutoff(3.0, eps, 1.0, Ambient::Plane, 40).unwrap();
        for _ in 0..6 {
            eps /= 2.0;
            let n = choose_cutoff(3.0, eps, 1.0, Ambient::Plane, 40).unwrap();
            assert!(n >= prev && n <= prev + 2, "{prev} -> {n}");
            prev = n;
        }
    }

    #[test]
    fn block_norms_within_rates_line() {
        for p in [1.5, 2.0, 3.0] {
            let (_, _, norms) = block_norms(&lebesgue(0), p, 8, 2).unwrap();
            assert!(norms.head_max() <= head_rate(Ambient::Line, 2) + 1e-12);
            for n in 3..=8 {
                assert!(
                    norms.tail_max(n) <= tail_rate(Ambient::Line, n) + 1e-12,
                    "level {n}: {} > {}",
                    norms.tail_max(n),
                    tail_rate(Ambient::Line, n)
                );
            }
        }
    }

    #[test]
    fn block_norms_within_rates_plane() {
        let m = MeasureSpec::uniform(Ambient::Plane, 0);
        let (_, _, norms) = block_norms(&m, 3.0, 7, 1).unwrap();
        for n in 2..=7 {
            assert!(norms.tail_max(n) <= tail_rate(Ambient::Plane, n) + 1e-12);
        }
    }

    #[test]
    fn decompose_lebesgue_certified() {
        for eps in [0.5, 0.1] {
            let dec = decompose(&lebesgue(0), 2.0, eps, 8).unwrap();
            let cert = &dec.cert;
            assert!(cert.total_k_bound_upper + cert.discretization_error < eps);
            assert!(cert.total_k_bound_lower <= cert.total_k_bound_upper);
            for (n, b) in &cert.per_level_block_norm {
                assert!(*b <= tail_rate(Ambient::Line, *n) + 1e-12);
            }
            let report = verify_certificate(&dec);
            assert!(report.ok(), "failures: {:?}", report.failures());
        }
        // Smaller epsilon never yields a smaller cutoff.
        let n_loose = decompose(&lebesgue(0), 2.0, 0.5, 8).unwrap().cert.cutoff;
        let n_tight = decompose(&lebesgue(0), 2.0, 0.1, 8).unwrap().cert.cutoff;
        assert!(n_tight >= n_loose);
    }

    #[test]
    fn decompose_exact_split_and_p2_norm_oracle() {
        let dec = decompose(&lebesgue(0), 2.0, 0.5, 6).unwrap();
        let err = (&dec.d.entries + &dec.k.entries - &dec.mhat.entries)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12);
        // Power iteration on K stays below the certified upper bound.
        let est = op_norm(&dec.k, NormMode::PowerIteration(PowerOpts::default())).unwrap();
        assert!(est.lower <= dec.cert.total_k_bound_upper * (1.0 + 1e-9));
        assert!(est.lower >= dec.cert.total_k_bound_lower * (1.0 - 1e-6));
    }

    #[test]
    fn decompose_purely_atomic_is_exact() {
        let m = MeasureSpec::new(
            Ambient::Line,
            Frame::unit(),
            vec![
                Atom { point: Complex64::new(0.25, 0.0), mass: 1.0 },
                Atom { point: Complex64::new(0.75, 0.0), mass: 0.5 },
            ],
            NonatomicPart::default(),
            vec![],
        )
        .unwrap();
        let dec = decompose(&m, 3.0, 0.1, 5).unwrap();
        assert_eq!(dec.k.entries.iter().map(|v| v.norm()).fold(0.0, f64::max), 0.0);
        assert_eq!(dec.d.entries, dec.mhat.entries);
        assert_eq!(dec.cert.discretization_error, 0.0);
        assert!(verify_certificate(&dec).ok());
    }

    #[test]
    fn decompose_plane_uniform() {
        let m = MeasureSpec::uniform(Ambient::Plane, 0);
        let dec = decompose(&m, 3.0, 1.0, 7).unwrap();
        for (n, b) in &dec.cert.per_level_block_norm {
            assert!(*b <= tail_rate(Ambient::Plane, *n) + 1e-12);
        }
        assert!(dec.cert.total_k_bound_upper + dec.cert.discretization_error < 1.0);
        let report = verify_certificate(&dec);
        assert!(report.ok(), "failures: {:?}", report.failures());
        assert!(dec.cert.pi1_bounds.is_none());
    }

    #[test]
    fn fault_injected_diagonal_is_caught() {
        let mut dec = decompose(&lebesgue(0), 2.0, 0.5, 6).unwrap();
        // Move one diagonal-plan entry outside its cell and rebuild one
        // column of D accordingly: block check (a) must flag it.
        let basis = dec.basis.as_ref().unwrap();
        let e = basis.tail_indices(dec.cert.cutoff + 1)[0];
        let el = basis.elements[e].clone();
        let bad = Complex64::new(10.0, 0.0);
        let (lv, ix) = super::lambda_index(&el.kind);
        let old = dec.plan.entry(lv, ix);
        for &(i, v) in &el.values {
            for &(kk, u) in &el.dual {
                dec.d.entries[(i, kk)] += (bad - old) * v * u;
                dec.k.entries[(i, kk)] -= (bad - old) * v * u;
            }
        }
        let report = verify_certificate(&dec);
        assert!(!report.ok());
        assert!(report
            .failures()
            .iter()
            .any(|c| c.name == "block-inequality" && c.detail.contains("tail")));
    }

    #[test]
    fn line_pi1_certificate() {
        // p = 2: Hilbert-Schmidt norm of K dominated by the shape sum.
        let dec = decompose_line(&lebesgue(0), 2.0, 0.5, 8).unwrap();
        let hs = dec.cert.hs_norm_k.unwrap();
        let pi1 = dec.cert.pi1_bounds.as_ref().unwrap();
        let total: f64 = pi1.values().sum();
        assert!(hs > 0.0 && hs <= total + 1e-10);
        // p = 4 (q = 4/3): shapes are finite and decreasing in n.
        let dec4 = decompose_line(&lebesgue(0), 4.0, 0.5, 8).unwrap();
        let pi14 = dec4.cert.pi1_bounds.as_ref().unwrap();
        let tail: Vec<f64> = pi14
            .iter()
            .filter(|(&n, _)| n > dec4.cert.cutoff)
            .map(|(_, &v)| v)
            .collect();
        assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{tail:?}");
        // Plane input refuses the line-only entry point.
        assert!(decompose_line(&MeasureSpec::uniform(Ambient::Plane, 0), 2.0, 0.5, 6).is_err());
    }

    #[test]
    fn certificate_serializes_and_round_trips() {
        let dec = decompose(&lebesgue(0), 2.0, 0.5, 6).unwrap();
        let json = serde_json::to_string_pretty(&dec.cert).unwrap();
        let back: DecompositionCertificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back.cutoff, dec.cert.cutoff);
        assert_eq!(back.per_level_block_norm, dec.cert.per_level_block_norm);
        let records = dec.cert.to_records();
        assert!(records.contains("record certificate"));
        assert!(records.contains("total_k_bound lower"));
        assert_eq!(records, dec.cert.to_records());
    }

    #[test]
    fn tail_decay_nonincreasing() {
        let dec = decompose(&lebesgue(0), 3.0, 0.5, 8).unwrap();
        let decay = dec.cert.tail_decay();
        assert!(decay.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(*decay.last().unwrap(), 0.0);
    }

    #[test]
    fn mixed_atoms_pass_through() {
        let m = MeasureSpec::new(
            Ambient::Line,
            Frame::unit(),
            vec![Atom { point: Complex64::new(0.3, 0.0), mass: 0.25 }],
            NonatomicPart { level: 1, densities: [(2, 1.0)].into() },
            vec![],
        )
        .unwrap();
        let dec = decompose(&m, 2.0, 0.5, 6).unwrap();
        let dim = dec.mhat.domain.dim();
        // Atom coordinate: exact diagonal entry, zero K row and column.
        assert_relative_eq!(dec.d.entries[(dim - 1, dim - 1)].re, 0.3);
        for i in 0..dim {
            assert_eq!(dec.k.entries[(dim - 1, i)].norm(), 0.0);
            assert_eq!(dec.k.entries[(i, dim - 1)].norm(), 0.0);
        }
        assert!(verify_certificate(&dec).ok());
    }
}
