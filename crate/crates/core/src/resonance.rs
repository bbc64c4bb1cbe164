//! Resonant interactions of characteristic phases.
//!
//! A tuple `(l_1, ..., l_{2nu+1})` produces the wave vector `kappa` when
//!
//! ```text
//! sum_k (-1)^{k+1} kappa_{l_k} = kappa
//! sum_k (-1)^{k+1} q(kappa_{l_k}) = q(kappa),   q(k) = sum_m eta_m k_m^2
//! ```
//!
//! Both identities are checked in exact integer arithmetic.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Integer lattice vector labelling a phase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WaveVector(Vec<i64>);

impl WaveVector {
    pub fn new(components: Vec<i64>) -> Self {
        Self(components)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }

    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn norm_sq(&self) -> i128 {
        self.0.iter().map(|&c| (c as i128) * (c as i128)).sum()
    }

    pub fn dot(&self, other: &Self) -> i128 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a as i128 * b as i128)
            .sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Parses `(1,0)` or `1,0`.
    pub fn parse(text: &str) -> Result<Self> {
        let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
        let comps = inner
            .split(',')
            .map(|c| c.trim().parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::domain(format!("bad wave vector '{text}': {e}")))?;
        if comps.is_empty() {
            return Err(Error::domain(format!("empty wave vector '{text}'")));
        }
        Ok(Self(comps))
    }

    /// Parses a `;`-separated list such as `(1,0);(1,1);(0,1)`.
    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        let list: Vec<Self> = text
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(Self::parse)
            .collect::<Result<_>>()?;
        if let Some(first) = list.first() {
            if list.iter().any(|k| k.dim() != first.dim()) {
                return Err(Error::structural("wave vectors have different dimensions"));
            }
        }
        Ok(list)
    }
}

impl fmt::Display for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Signs `eta` of the operator `sum_m eta_m d^2/dx_m^2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct Signature(Vec<i8>);

impl Signature {
    pub fn new(etas: Vec<i8>) -> Result<Self> {
        if etas.is_empty() || etas.iter().any(|&e| e != 1 && e != -1) {
            return Err(Error::domain(format!(
                "signature entries must be +1 or -1, got {etas:?}"
            )));
        }
        Ok(Self(etas))
    }

    pub fn elliptic(dim: usize) -> Self {
        Self(vec![1; dim])
    }

    /// Parses a string of `+` and `-`, one per axis.
    pub fn parse(text: &str) -> Result<Self> {
        let etas = text
            .trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                _ => Err(Error::domain(format!(
                    "bad signature character '{c}' in '{text}'"
                ))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(etas)
    }

    pub fn etas(&self) -> &[i8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_elliptic(&self) -> bool {
        self.0.iter().all(|&e| e == 1)
    }

    /// `sum_m eta_m k_m^2`.
    pub fn quadratic(&self, k: &WaveVector) -> i128 {
        self.0
            .iter()
            .zip(&k.0)
            .map(|(&e, &c)| e as i128 * c as i128 * c as i128)
            .sum()
    }

    /// Group velocity `(eta_m kappa_m)` of the phase `kappa`.
    pub fn velocity(&self, k: &WaveVector) -> Vec<f64> {
        self.0
            .iter()
            .zip(&k.0)
            .map(|(&e, &c)| e as f64 * c as f64)
            .collect()
    }

    pub fn as_string(&self) -> String {
        self.0
            .iter()
            .map(|&e| if e > 0 { '+' } else { '-' })
            .collect()
    }
}

impl TryFrom<Vec<i8>> for Signature {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Signature> for Vec<i8> {
    fn from(s: Signature) -> Self {
        s.0
    }
}

/// Closed (possibly truncated) set of wave vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSet {
    signature: Signature,
    nu: usize,
    vectors: Vec<WaveVector>,
    origin_count: usize,
    witnesses: Vec<Option<Vec<usize>>>,
    generations: usize,
    truncated_by_box: bool,
    truncated_by_generations: bool,
}

impl PhaseSet {
    /// Phase set made of the given vectors only, with no closure applied.
    pub fn from_vectors(vectors: Vec<WaveVector>, signature: Signature, nu: usize) -> Result<Self> {
        validate_vectors(&vectors, &signature, nu)?;
        let origin_count = vectors.len();
        Ok(Self {
            signature,
            nu,
            witnesses: vec![None; origin_count],
            vectors,
            origin_count,
            generations: 0,
            truncated_by_box: false,
            truncated_by_generations: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.signature.dim()
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn vectors(&self) -> &[WaveVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn origin_count(&self) -> usize {
        self.origin_count
    }

    pub fn generations(&self) -> usize {
        self.generations
    }

    pub fn truncated(&self) -> bool {
        self.truncated_by_box || self.truncated_by_generations
    }

    pub fn truncated_by_box(&self) -> bool {
        self.truncated_by_box
    }

    pub fn truncated_by_generations(&self) -> bool {
        self.truncated_by_generations
    }

    pub fn index_of(&self, k: &WaveVector) -> Option<usize> {
        self.vectors.iter().position(|v| v == k)
    }

    /// Tuple that first produced vector `j`, `None` for members of the
    /// initial set.
    pub fn witness(&self, j: usize) -> Option<&[usize]> {
        self.witnesses.get(j).and_then(|w| w.as_deref())
    }

    /// Integer coefficients `c` with `kappa_j = sum_i c_i kappa_i` over the
    /// initial vectors, obtained by unfolding witnesses.
    pub fn origin_combination(&self, j: usize) -> Vec<i64> {
        let mut coeffs = vec![0i64; self.origin_count];
        let mut stack = vec![(j, 1i64)];
        while let Some((idx, sign)) = stack.pop() {
            match &self.witnesses[idx] {
                None => coeffs[idx] += sign,
                Some(tuple) => {
                    for (k, &l) in tuple.iter().enumerate() {
                        stack.push((l, if k % 2 == 0 { sign } else { -sign }));
                    }
                }
            }
        }
        coeffs
    }

    /// Velocity `v_j = (eta_m kappa_{j,m})` of each phase.
    pub fn velocities(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|k| self.signature.velocity(k))
            .collect()
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vectors.iter().map(|v| v.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ResonantTuple {
    pub indices: Vec<usize>,
    pub target: usize,
}

impl ResonantTuple {
    /// Whether the last entry equals the target, i.e. the product of the
    /// first `2nu` entries is non-oscillatory relative to it.
    pub fn ends_in_target(&self) -> bool {
        self.indices.last() == Some(&self.target)
    }
}

fn validate_vectors(vectors: &[WaveVector], signature: &Signature, nu: usize) -> Result<()> {
    if nu == 0 {
        return Err(Error::domain("nu must be at least 1"));
    }
    if vectors.is_empty() {
        return Err(Error::domain("phase set must be nonempty"));
    }
    if let Some(bad) = vectors.iter().find(|k| k.dim() != signature.dim()) {
        return Err(Error::structural(format!(
            "wave vector {bad} does not match signature dimension {}",
            signature.dim()
        )));
    }
    let distinct: BTreeSet<_> = vectors.iter().collect();
    if distinct.len() != vectors.len() {
        return Err(Error::domain("wave vectors must be distinct"));
    }
    Ok(())
}

pub fn is_resonant(
    signature: &Signature,
    nu: usize,
    kappas: &[WaveVector],
    target: &WaveVector,
) -> Result<bool> {
    if kappas.len() != 2 * nu + 1 {
        return Err(Error::structural(format!(
            "expected {} wave vectors, got {}",
            2 * nu + 1,
            kappas.len()
        )));
    }
    let d = signature.dim();
    if target.dim() != d || kappas.iter().any(|k| k.dim() != d) {
        return Err(Error::structural("wave vector dimension mismatch"));
    }
    let mut lin = vec![0i128; d];
    let mut quad = 0i128;
    for (k, kappa) in kappas.iter().enumerate() {
        let s: i128 = if k % 2 == 0 { 1 } else { -1 };
        for (acc, &c) in lin.iter_mut().zip(kappa.components()) {
            *acc += s * c as i128;
        }
        quad += s * signature.quadratic(kappa);
    }
    let lin_ok = lin
        .iter()
        .zip(target.components())
        .all(|(&a, &b)| a == b as i128);
    Ok(lin_ok && quad == signature.quadratic(target))
}

/// Sum and quadratic sum of a group of wave vectors.
type Moments = (Vec<i64>, i128);

fn moments(vectors: &[WaveVector], sig: &Signature, idx: &[usize], d: usize) -> Moments {
    let mut s = vec![0i64; d];
    let mut q = 0i128;
    for &i in idx {
        for (a, &c) in s.iter_mut().zip(vectors[i].components()) {
            *a += c;
        }
        q += sig.quadratic(&vectors[i]);
    }
    (s, q)
}

/// Calls `f` on every multiset of size `r` drawn from `0..n`, as a
/// nondecreasing index list.
fn for_each_multiset(n: usize, r: usize, mut f: impl FnMut(&[usize])) {
    if r == 0 {
        f(&[]);
        return;
    }
    let mut idx = vec![0usize; r];
    loop {
        f(&idx);
        let mut pos = r;
        while pos > 0 && idx[pos - 1] == n - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        idx[pos - 1] += 1;
        let v = idx[pos - 1];
        for slot in idx[pos..].iter_mut() {
            *slot = v;
        }
    }
}

/// Calls `f` on every ordered tuple of length `r` over `0..n`.
fn for_each_tuple(n: usize, r: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; r];
    if n == 0 && r > 0 {
        return;
    }
    loop {
        f(&idx);
        let mut pos = r;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn interleave(pos: &[usize], neg: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(pos.len() + neg.len());
    for (k, &p) in pos.iter().enumerate() {
        out.push(p);
        if let Some(&n) = neg.get(k) {
            out.push(n);
        }
    }
    out
}

/// Closes `phi0` under resonant interactions inside the box
/// `|kappa|_inf <= box_radius`, for at most `max_generations` rounds.
pub fn close_phase_set(
    phi0: &[WaveVector],
    signature: &Signature,
    nu: usize,
    max_generations: usize,
    box_radius: i64,
) -> Result<PhaseSet> {
    validate_vectors(phi0, signature, nu)?;
    if let Some(k) = phi0.iter().find(|k| k.sup_norm() > box_radius) {
        return Err(Error::domain(format!(
            "{k} lies outside the box of radius {box_radius}"
        )));
    }
    let d = signature.dim();
    let mut set = PhaseSet::from_vectors(phi0.to_vec(), signature.clone(), nu)?;
    loop {
        let (found, outside) = resonant_targets(&set.vectors, signature, nu, d, box_radius);
        set.truncated_by_box = outside;
        if found.is_empty() {
            break;
        }
        if set.generations == max_generations {
            set.truncated_by_generations = true;
            break;
        }
        set.generations += 1;
        for (k, witness) in found {
            set.vectors.push(k);
            set.witnesses.push(Some(witness));
        }
    }
    Ok(set)
}

/// New in-box targets (sorted, with a witness tuple each) and whether some
/// target fell outside the box.
fn resonant_targets(
    vectors: &[WaveVector],
    sig: &Signature,
    nu: usize,
    d: usize,
    box_radius: i64,
) -> (Vec<(WaveVector, Vec<usize>)>, bool) {
    let n = vectors.len();
    let mut pos: HashMap<Moments, Vec<usize>> = HashMap::new();
    for_each_multiset(n, nu + 1, |idx| {
        pos.entry(moments(vectors, sig, idx, d))
            .or_insert_with(|| idx.to_vec());
    });
    let mut neg: HashMap<Moments, Vec<usize>> = HashMap::new();
    for_each_multiset(n, nu, |idx| {
        neg.entry(moments(vectors, sig, idx, d))
            .or_insert_with(|| idx.to_vec());
    });
    // Sorted iteration keeps witnesses deterministic.
    let mut pos: Vec<_> = pos.into_iter().collect();
    pos.sort();
    let mut neg: Vec<_> = neg.into_iter().collect();
    neg.sort();
    let known: BTreeSet<&WaveVector> = vectors.iter().collect();
    let mut found: BTreeSet<(WaveVector, Vec<usize>)> = BTreeSet::new();
    let mut seen: BTreeSet<WaveVector> = BTreeSet::new();
    let mut outside = false;
    for ((ps, pq), pidx) in &pos {
        for ((ns, nq), nidx) in &neg {
            let t = WaveVector(ps.iter().zip(ns).map(|(a, b)| a - b).collect());
            if pq - nq != sig.quadratic(&t) || known.contains(&t) || seen.contains(&t) {
                continue;
            }
            if t.sup_norm() > box_radius {
                outside = true;
                continue;
            }
            seen.insert(t.clone());
            found.insert((t, interleave(pidx, nidx)));
        }
    }
    (found.into_iter().collect(), outside)
}

/// Every ordered tuple in `J^{2nu+1}` resonating to phase `target`, in
/// lexicographic order.
pub fn resonant_tuples(set: &PhaseSet, target: usize) -> Result<Vec<ResonantTuple>> {
    if target >= set.len() {
        return Err(Error::structural(format!(
            "target index {target} out of range"
        )));
    }
    let (vectors, sig, nu, d) = (&set.vectors, &set.signature, set.nu, set.dim());
    let n = vectors.len();
    let mut neg: HashMap<Moments, Vec<Vec<usize>>> = HashMap::new();
    for_each_tuple(n, nu, |idx| {
        neg.entry(moments(vectors, sig, idx, d))
            .or_default()
            .push(idx.to_vec());
    });
    let kt = &vectors[target];
    let qt = sig.quadratic(kt);
    let mut out = Vec::new();
    for_each_tuple(n, nu + 1, |pidx| {
        let (ps, pq) = moments(vectors, sig, pidx, d);
        let need: Vec<i64> = ps.iter().zip(kt.components()).map(|(a, b)| a - b).collect();
        if let Some(list) = neg.get(&(need, pq - qt)) {
            for nidx in list {
                out.push(ResonantTuple {
                    indices: interleave(pidx, nidx),
                    target,
                });
            }
        }
    });
    out.sort();
    Ok(out)
}

/// Cubic elliptic resonance by the rectangle characterization: either a
/// degenerate pairing or `kappa_k, kappa_l, kappa_m, kappa_j` are the corners
/// of a rectangle with `kappa_l` and `kappa_j` opposite.
pub fn rectangle_oracle(kappas: [&WaveVector; 3], target: &WaveVector) -> bool {
    let [k, l, m] = kappas;
    if k.add(m).sub(l) != *target {
        return false;
    }
    if (k == target && m == l) || (m == target && k == l) {
        return true;
    }
    let u = k.sub(l);
    let w = m.sub(l);
    !u.is_zero() && !w.is_zero() && u.dot(&w) == 0
}

/// Cubic resonance for `eta = (-1, +1)` in two dimensions. After translating
/// the target to the origin, `kappa_l = kappa_k + kappa_m` and the sides
/// `kappa_k = (p_k, q_k)`, `kappa_m = (p_m, q_m)` satisfy `q_k q_m = p_k p_m`.
pub fn parallelogram_oracle(kappas: [&WaveVector; 3], target: &WaveVector) -> bool {
    let [k, l, m] = kappas;
    if [k, l, m, target].iter().any(|v| v.dim() != 2) {
        return false;
    }
    let (k, l, m) = (k.sub(target), l.sub(target), m.sub(target));
    if l != k.add(&m) {
        return false;
    }
    if k.is_zero() || m.is_zero() {
        return true;
    }
    let (pk, qk) = (k.0[0] as i128, k.0[1] as i128);
    let (pm, qm) = (m.0[0] as i128, m.0[1] as i128);
    qk * qm == pk * pm
}

/// Searches orthogonal nonzero pairs `kappa_1 . kappa_3 = 0` with
/// `K(kappa_1) + K(kappa_3) != -2 mu / lambda`, returning the rectangle
/// `(kappa_1, kappa_1 + kappa_3, kappa_3)` whose fourth corner is the origin.
///
/// Candidates are ordered by length, then by descending lexicographic order.
pub fn find_admissible_triple(
    kernel: &KernelSpec,
    lambda: f64,
    mu: f64,
    dim: usize,
    search_radius: i64,
) -> Result<Option<[WaveVector; 3]>> {
    if lambda == 0.0 {
        return Err(Error::domain(
            "lambda must be nonzero; the local case needs no kernel search",
        ));
    }
    if dim < 2 {
        return Err(Error::domain("orthogonal pairs need dimension at least 2"));
    }
    if kernel.dim() != dim {
        return Err(Error::structural("kernel dimension does not match"));
    }
    let side = (2 * search_radius + 1) as usize;
    let mut cands: Vec<WaveVector> = Vec::new();
    for_each_tuple(side, dim, |idx| {
        let v = WaveVector(idx.iter().map(|&i| i as i64 - search_radius).collect());
        if !v.is_zero() {
            cands.push(v);
        }
    });
    cands.sort_by(|a, b| a.norm_sq().cmp(&b.norm_sq()).then_with(|| b.cmp(a)));
    let target = -2.0 * mu / lambda;
    for (i, a) in cands.iter().enumerate() {
        for b in &cands[i + 1..] {
            if a.dot(b) != 0 {
                continue;
            }
            let s = kernel.evaluate(&a.to_f64())? + kernel.evaluate(&b.to_f64())?;
            if (s - target).abs() > 1e-9 {
                return Ok(Some([a.clone(), a.add(b), b.clone()]));
            }
        }
    }
    Ok(None)
}
