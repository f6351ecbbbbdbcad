//! Two-dimensional projection of a speaker embedding for plotting.
//!
//! Principal directions come from the covariance of the vectors, found by
//! power iteration with deflation. Vectors are projected without centering so
//! the origin stays where the cones meet.

use std::collections::BTreeMap;
use std::io::Write;

use crate::corpus::{SpeakerId, StanceLabel};
use crate::embed::{dot, norm, SpeakerEmbedding};

const MAX_ITERS: usize = 10_000;
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaRow {
    pub speaker: SpeakerId,
    pub pc1: f64,
    pub pc2: f64,
    pub label: Option<StanceLabel>,
}

fn covariance(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let dim = vectors.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n as f64;
        }
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for v in vectors {
        let c: Vec<f64> = v.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += c[i] * c[j] / n as f64;
            }
        }
    }
    cov
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Dominant eigenpair of a symmetric positive semidefinite matrix. The
/// returned vector has its largest-magnitude entry positive.
fn power_iteration(m: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let dim = m.len();
    // deterministic start with no special symmetry
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 / (i as f64 + 1.0).sqrt()).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERS {
        let w = mat_vec(m, &v);
        let wn = norm(&w);
        if wn < TOL {
            return (0.0, v);
        }
        let next: Vec<f64> = w.iter().map(|x| x / wn).collect();
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        lambda = wn;
        if delta < TOL {
            break;
        }
    }
    let pivot = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    (lambda, v)
}

/// The two leading principal directions of the embedding vectors.
pub fn principal_directions(vectors: &[Vec<f64>]) -> [Vec<f64>; 2] {
    let mut cov = covariance(vectors);
    let (l1, d1) = power_iteration(&cov);
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x -= l1 * d1[i] * d1[j];
        }
    }
    let (_, mut d2) = power_iteration(&cov);
    // keep the second direction orthogonal to the first
    let proj = dot(&d2, &d1);
    d2.iter_mut().zip(&d1).for_each(|(x, y)| *x -= proj * y);
    let n2 = norm(&d2);
    if n2 > TOL {
        d2.iter_mut().for_each(|x| *x /= n2);
    }
    [d1, d2]
}

pub fn pca_projection(emb: &SpeakerEmbedding, labels: &BTreeMap<SpeakerId, StanceLabel>) -> Vec<PcaRow> {
    if emb.vectors.is_empty() {
        return Vec::new();
    }
    let [d1, d2] = principal_directions(&emb.vectors);
    emb.order
        .iter()
        .zip(&emb.vectors)
        .map(|(s, v)| PcaRow {
            speaker: s.clone(),
            pc1: dot(v, &d1),
            pc2: dot(v, &d2),
            label: labels.get(s).copied(),
        })
        .collect()
}

/// Writes `speaker,pc1,pc2,label` CSV.
pub fn write_pca_csv<W: Write>(rows: &[PcaRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["speaker", "pc1", "pc2", "label"])?;
    for r in rows {
        w.write_record([
            r.speaker.as_str(),
            &r.pc1.to_string(),
            &r.pc2.to_string(),
            r.label.map_or("", StanceLabel::code),
        ])?;
    }
    w.flush()?;
    Ok(())
}
