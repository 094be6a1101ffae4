//! Vector datasets, `fvecs`/`ivecs` files, Euclidean distance and exact kNN.
//!
//! Both file formats are a sequence of records `[i32 len LE][len x 4-byte LE payload]`.
//! `fvecs` carries IEEE-754 `f32` payloads and `ivecs` carries `i32` payloads.

use std::cmp::Ordering;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// `count` vectors of dimension `dim`, stored row-major. Ids are implicit row indices.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f32>,
}

impl VectorSet {
    /// Builds a set from row-major `data`. Rejects NaN/Inf and ragged input.
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            if !data.is_empty() {
                return Err(invalid!("dim must be positive"));
            }
        } else if data.len() % dim != 0 {
            return Err(invalid!("{} values do not form rows of dimension {dim}", data.len()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid!(
                "non-finite value {} at row {}, column {}",
                data[pos],
                pos / dim,
                pos % dim
            ));
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(invalid!("row {i} has {} components, expected {dim}", row.len()));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// Standard normal vectors, deterministic in `seed`.
    pub fn gaussian(count: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..count * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact panics on a zero chunk size
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Scales every non-zero row to unit length.
    pub fn normalize(&mut self) {
        let dim = self.dim.max(1);
        for row in self.data.chunks_exact_mut(dim) {
            let norm = row.iter().map(|v| v * v).sum::<f32>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    /// Row `i` of the result is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[u32]) -> Self {
        let mut data = Vec::with_capacity(order.len() * self.dim);
        for &id in order {
            data.extend_from_slice(self.get(id as usize));
        }
        Self { dim: self.dim, data }
    }

    pub fn take(&self, count: usize) -> Self {
        Self {
            dim: self.dim,
            data: self.data[..count.min(self.count()) * self.dim].to_vec(),
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn decode_records(bytes: &[u8], path: &Path, what: &str) -> Result<(usize, Vec<[u8; 4]>)> {
    let mut pos = 0;
    let mut dim = None;
    let mut words = Vec::with_capacity(bytes.len() / 4);
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(Error::format(
                path,
                format!("truncated {what} record header at byte {pos}"),
            ));
        }
        let len = i32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        if len <= 0 {
            return Err(Error::format(
                path,
                format!("non-positive record length {len} at byte {pos}"),
            ));
        }
        let len = len as usize;
        match dim {
            None => dim = Some(len),
            Some(d) if d != len => {
                return Err(Error::format(
                    path,
                    format!("inconsistent record length {len} at byte {pos}, expected {d}"),
                ))
            }
            _ => {}
        }
        pos += 4;
        if bytes.len() - pos < 4 * len {
            return Err(Error::format(
                path,
                format!("truncated {what} record payload at byte {pos}"),
            ));
        }
        for chunk in bytes[pos..pos + 4 * len].chunks_exact(4) {
            words.push(chunk.try_into().unwrap());
        }
        pos += 4 * len;
    }
    Ok((dim.unwrap_or(0), words))
}

/// Reads an `fvecs` file. All records must share one dimension; values must be finite.
pub fn read_fvecs(path: impl AsRef<Path>) -> Result<VectorSet> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let (dim, words) = decode_records(&bytes, path, "fvecs")?;
    let data = words.into_iter().map(f32::from_le_bytes).collect();
    VectorSet::new(dim, data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_fvecs(vs: &VectorSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = (vs.dim() as i32).to_le_bytes();
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        for row in vs.rows().take(vs.count()) {
            w.write_all(&header)?;
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// Reads an `ivecs` file. Records may not be ragged.
pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<i32>>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let (dim, words) = decode_records(&bytes, path, "ivecs")?;
    if dim == 0 {
        return Ok(Vec::new());
    }
    Ok(words
        .chunks_exact(dim)
        .map(|rec| rec.iter().map(|w| i32::from_le_bytes(*w)).collect())
        .collect())
}

pub fn write_ivecs(lists: &[Vec<i32>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(first) = lists.first() {
        if first.is_empty() || lists.iter().any(|l| l.len() != first.len()) {
            return Err(invalid!("ivecs records must be non-empty and of equal length"));
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        for list in lists {
            w.write_all(&(list.len() as i32).to_le_bytes())?;
            for v in list {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// Squared Euclidean distance. Eight independent accumulators so the loop vectorizes.
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let tail: f32 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for i in 0..8 {
            let d = ca[i] - cb[i];
            acc[i] += d * d;
        }
    }
    acc.iter().sum::<f32>() + tail
}

#[inline]
pub(crate) fn l2(a: &[f32], b: &[f32]) -> f32 {
    squared_l2(a, b).sqrt()
}

/// Euclidean distance (with the square root).
pub fn distance(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(l2(a, b))
}

/// One kNN entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub dist: f32,
}

impl Neighbor {
    pub fn new(id: u32, dist: f32) -> Self {
        Self { id, dist }
    }

    /// Ascending distance, ties by ascending id.
    #[inline]
    pub fn cmp_by_distance(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then_with(|| self.id.cmp(&other.id))
    }
}

/// Distance-sorted neighbors of one query; ties broken by ascending id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborList(Vec<Neighbor>);

impl NeighborList {
    /// Sorts `entries` into canonical order.
    pub fn new(mut entries: Vec<Neighbor>) -> Self {
        entries.sort_unstable_by(Neighbor::cmp_by_distance);
        Self(entries)
    }

    pub fn from_pairs(pairs: &[(u32, f32)]) -> Self {
        Self::new(pairs.iter().map(|&(id, dist)| Neighbor { id, dist }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Neighbor] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Neighbor> {
        self.0.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().map(|n| n.id)
    }

    pub fn top_ids(&self, k: usize) -> Vec<u32> {
        self.0.iter().take(k).map(|n| n.id).collect()
    }

    /// `d_i` with 1-based `i`, as in `d_k`.
    pub fn dist(&self, i: usize) -> f32 {
        self.0[i - 1].dist
    }

    pub fn truncated(&self, m: usize) -> Self {
        Self(self.0[..m.min(self.0.len())].to_vec())
    }

    pub fn into_inner(self) -> Vec<Neighbor> {
        self.0
    }
}

impl std::ops::Index<usize> for NeighborList {
    type Output = Neighbor;
    fn index(&self, i: usize) -> &Neighbor {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a NeighborList {
    type Item = &'a Neighbor;
    type IntoIter = std::slice::Iter<'a, Neighbor>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Exact `m` nearest neighbors of `q` by a full scan, optionally skipping one id.
pub fn knn_scan(base: &VectorSet, q: &[f32], m: usize, exclude: Option<u32>) -> NeighborList {
    let mut all: Vec<Neighbor> = base
        .rows()
        .enumerate()
        .filter(|(i, _)| Some(*i as u32) != exclude)
        .map(|(i, v)| Neighbor::new(i as u32, l2(q, v)))
        .collect();
    let m = m.min(all.len());
    if m == 0 {
        return NeighborList::default();
    }
    if m < all.len() {
        all.select_nth_unstable_by(m - 1, Neighbor::cmp_by_distance);
        all.truncate(m);
    }
    NeighborList::new(all)
}

/// Exact `m`-NN of every query. Parallel over queries; the result does not
/// depend on the thread count.
pub fn brute_force_knn(base: &VectorSet, queries: &VectorSet, m: usize) -> Result<Vec<NeighborList>> {
    if m == 0 || m > base.count() {
        return Err(invalid!("m = {m} must be in 1..={}", base.count()));
    }
    if queries.count() > 0 && queries.dim() != base.dim() {
        return Err(Error::DimMismatch {
            expected: base.dim(),
            found: queries.dim(),
        });
    }
    Ok((0..queries.count())
        .into_par_iter()
        .map(|i| knn_scan(base, queries.get(i), m, None))
        .collect())
}

/// Distances from one query to every base vector, sorted lazily in growing prefixes.
///
/// Used where the number of neighbors needed is not known up front.
#[derive(Clone, Debug)]
pub struct QueryDistances {
    all: Vec<Neighbor>,
    sorted: usize,
}

impl QueryDistances {
    pub fn new(base: &VectorSet, q: &[f32]) -> Self {
        let all = base
            .rows()
            .enumerate()
            .map(|(i, v)| Neighbor::new(i as u32, l2(q, v)))
            .collect();
        Self { all, sorted: 0 }
    }

    pub fn total(&self) -> usize {
        self.all.len()
    }

    /// The first `m` neighbors in canonical order (fewer if the base is smaller).
    pub fn prefix(&mut self, m: usize) -> &[Neighbor] {
        let m = m.min(self.all.len());
        if m > self.sorted {
            let tail = &mut self.all[self.sorted..];
            let want = m - self.sorted;
            if want < tail.len() {
                tail.select_nth_unstable_by(want - 1, Neighbor::cmp_by_distance);
            }
            tail[..want].sort_unstable_by(Neighbor::cmp_by_distance);
            self.sorted = m;
        }
        &self.all[..m]
    }

    /// All distances in unspecified order.
    pub fn unordered(&self) -> &[Neighbor] {
        &self.all
    }

    /// Number of base vectors within `radius` (inclusive).
    pub fn count_within(&self, radius: f32) -> usize {
        self.all.iter().filter(|n| n.dist <= radius).count()
    }

    pub fn mean_distance(&self) -> f64 {
        if self.all.is_empty() {
            return 0.0;
        }
        self.all.iter().map(|n| n.dist as f64).sum::<f64>() / self.all.len() as f64
    }
}

/// Ground truth as `ivecs` rows and `fvecs` distance rows.
pub fn ground_truth_tables(gt: &[NeighborList]) -> (Vec<Vec<i32>>, VectorSet) {
    let ids = gt.iter().map(|l| l.ids().map(|i| i as i32).collect()).collect();
    let dim = gt.first().map_or(0, NeighborList::len);
    let data = gt.iter().flat_map(|l| l.iter().map(|n| n.dist)).collect();
    (ids, VectorSet { dim, data })
}

/// Rebuilds neighbor lists from `ivecs` ids by recomputing distances.
pub fn neighbor_lists_from_ids(base: &VectorSet, queries: &VectorSet, ids: &[Vec<i32>]) -> Result<Vec<NeighborList>> {
    if ids.len() != queries.count() {
        return Err(invalid!(
            "ground truth has {} rows for {} queries",
            ids.len(),
            queries.count()
        ));
    }
    ids.iter()
        .enumerate()
        .map(|(qi, row)| {
            let q = queries.get(qi);
            let entries = row
                .iter()
                .map(|&id| {
                    if id < 0 || id as usize >= base.count() {
                        Err(invalid!("ground-truth id {id} out of range"))
                    } else {
                        Ok(Neighbor::new(id as u32, l2(q, base.get(id as usize))))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(NeighborList::new(entries))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(distance(&[1.0; 4], &[0.0; 4]).unwrap(), 2.0);
        assert!(matches!(distance(&[1.0], &[1.0, 2.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn vector_set_rejects_non_finite() {
        assert!(VectorSet::new(2, vec![1.0, f32::NAN]).is_err());
        assert!(VectorSet::new(2, vec![1.0, f32::INFINITY]).is_err());
        assert!(VectorSet::new(2, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn knn_one_dimensional() {
        let base = VectorSet::from_rows(&[[0.0f32], [1.0], [2.0]]).unwrap();
        let q = VectorSet::from_rows(&[[0.1f32]]).unwrap();
        let gt = brute_force_knn(&base, &q, 2).unwrap();
        assert_eq!(gt[0].top_ids(2), vec![0, 1]);
        assert!((gt[0][0].dist - 0.1).abs() < 1e-6);
        assert!((gt[0][1].dist - 0.9).abs() < 1e-6);
        assert!(brute_force_knn(&base, &q, 4).is_err());
    }

    #[test]
    fn knn_ties_break_by_id() {
        let base = VectorSet::from_rows(&[[2.0f32], [0.0], [1.0], [1.0]]).unwrap();
        let q = VectorSet::from_rows(&[[0.0f32]]).unwrap();
        let gt = brute_force_knn(&base, &q, 4).unwrap();
        assert_eq!(gt[0].top_ids(4), vec![1, 2, 3, 0]);
    }

    #[test]
    fn query_distances_prefix_matches_full_sort() {
        let base = VectorSet::gaussian(500, 6, 3);
        let q = VectorSet::gaussian(1, 6, 4);
        let mut qd = QueryDistances::new(&base, q.get(0));
        let full = knn_scan(&base, q.get(0), 500, None);
        for m in [1, 7, 40, 41, 200, 500, 900] {
            let got = qd.prefix(m).to_vec();
            assert_eq!(got.as_slice(), &full.as_slice()[..m.min(500)]);
        }
    }

    #[test]
    fn truncated_and_non_positive_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.fvecs");
        fs::write(&p, [0u8; 13]).unwrap();
        assert!(matches!(read_fvecs(&p), Err(Error::Format { .. })));
        fs::write(&p, (-1i32).to_le_bytes()).unwrap();
        assert!(matches!(read_ivecs(&p), Err(Error::Format { .. })));
        let mut mixed = Vec::new();
        mixed.extend_from_slice(&1i32.to_le_bytes());
        mixed.extend_from_slice(&1.0f32.to_le_bytes());
        mixed.extend_from_slice(&2i32.to_le_bytes());
        mixed.extend_from_slice(&[0u8; 8]);
        fs::write(&p, &mixed).unwrap();
        assert!(read_fvecs(&p).is_err());
    }
}
