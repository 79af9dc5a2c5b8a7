use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use super::{LdaConfig, LdaModel, Matrix, TopicModelError};
use crate::corpus::{BowDocument, TermId};

/// Collapsed Gibbs sampler state. [`super::train_lda`] drives it to
/// completion; tests step it one sweep at a time to check the count
/// invariants.
pub struct GibbsSampler {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    doc_ids: Vec<String>,
    tokens: Vec<Vec<TermId>>,
    z: Vec<Vec<u16>>,
    n_dk: Vec<u32>,
    n_kw: Vec<u32>,
    n_k: Vec<u32>,
    rng: ChaCha8Rng,
    seed: u64,
    partitions: usize,
    chunk_size: usize,
    sweeps: usize,
    phi_acc: Vec<f64>,
    theta_acc: Vec<f64>,
    samples: usize,
}

impl GibbsSampler {
    pub fn new(corpus: &[BowDocument], vocab_size: usize, cfg: &LdaConfig) -> Result<Self, TopicModelError> {
        cfg.validate()?;
        if corpus.is_empty() {
            return Err(TopicModelError::EmptyCorpus);
        }
        for d in corpus {
            if let Some(&(t, _)) = d.counts.iter().find(|&&(t, _)| t as usize >= vocab_size) {
                return Err(TopicModelError::VocabularyMismatch(format!(
                    "document {} has term id {t} ≥ vocabulary size {vocab_size}",
                    d.review_id
                )));
            }
        }
        let k = cfg.k;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let tokens: Vec<Vec<TermId>> = corpus.iter().map(BowDocument::token_ids).collect();
        let mut n_dk = vec![0u32; corpus.len() * k];
        let mut n_kw = vec![0u32; k * vocab_size];
        let mut n_k = vec![0u32; k];
        let z = tokens
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        n_dk[d * k + t] += 1;
                        n_kw[t * vocab_size + w as usize] += 1;
                        n_k[t] += 1;
                        t as u16
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            k,
            v: vocab_size,
            alpha: cfg.alpha_value(),
            beta: cfg.beta,
            doc_ids: corpus.iter().map(|d| d.review_id.clone()).collect(),
            tokens,
            z,
            n_dk,
            n_kw,
            n_k,
            rng,
            seed: cfg.seed,
            partitions: cfg.partitions.max(1),
            chunk_size: cfg.chunk_size.max(1),
            sweeps: 0,
            phi_acc: vec![0.0; k * vocab_size],
            theta_acc: vec![0.0; corpus.len() * k],
            samples: 0,
        })
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    /// Resamples every token once, in document order.
    pub fn sweep(&mut self) {
        if self.partitions > 1 && self.tokens.len() >= self.partitions {
            self.sweep_partitioned();
        } else {
            self.sweep_serial();
        }
        self.sweeps += 1;
    }

    fn sweep_serial(&mut self) {
        let (k, v) = (self.k, self.v);
        let vbeta = v as f64 * self.beta;
        let mut p = vec![0.0f64; k];
        for d in 0..self.tokens.len() {
            if d % self.chunk_size == 0 && d > 0 {
                log::trace!("sweep {}: {} documents", self.sweeps + 1, d);
            }
            let dk = &mut self.n_dk[d * k..(d + 1) * k];
            for (i, &w) in self.tokens[d].iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][i] as usize;
                dk[old] -= 1;
                self.n_kw[old * v + w] -= 1;
                self.n_k[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (dk[t] as f64 + self.alpha) * (self.n_kw[t * v + w] as f64 + self.beta)
                        / (self.n_k[t] as f64 + vbeta);
                    p[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = p.iter().position(|&c| u < c).unwrap_or(k - 1);
                dk[new] += 1;
                self.n_kw[new * v + w] += 1;
                self.n_k[new] += 1;
                self.z[d][i] = new as u16;
            }
        }
    }

    /// Approximate distributed sweep: each partition samples against a
    /// snapshot of the topic-word counts with its own random stream, then the
    /// count deltas are merged. Results differ from the serial sampler and
    /// depend on the partition count.
    fn sweep_partitioned(&mut self) {
        let (k, v, alpha, beta) = (self.k, self.v, self.alpha, self.beta);
        let vbeta = v as f64 * beta;
        let m = self.tokens.len();
        let per = m.div_ceil(self.partitions);
        let snapshot_kw = self.n_kw.clone();
        let snapshot_k = self.n_k.clone();
        let sweep = self.sweeps as u64;
        let seed = self.seed;

        let tokens = &self.tokens;
        let results: Vec<(Vec<u32>, Vec<u32>)> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .z
                .chunks_mut(per)
                .zip(self.n_dk.chunks_mut(per * k))
                .enumerate()
                .map(|(part, (z_part, dk_part))| {
                    let mut kw = snapshot_kw.clone();
                    let mut nk = snapshot_k.clone();
                    let docs = &tokens[part * per..(part * per + z_part.len())];
                    s.spawn(move || {
                        let stream = seed ^ (sweep.wrapping_mul(0x9E37_79B9_7F4A_7C15)) ^ (part as u64 + 1);
                        let mut rng = ChaCha8Rng::seed_from_u64(stream);
                        let mut p = vec![0.0f64; k];
                        for (local, doc) in docs.iter().enumerate() {
                            let dk = &mut dk_part[local * k..(local + 1) * k];
                            for (i, &w) in doc.iter().enumerate() {
                                let w = w as usize;
                                let old = z_part[local][i] as usize;
                                dk[old] -= 1;
                                kw[old * v + w] -= 1;
                                nk[old] -= 1;
                                let mut total = 0.0;
                                for t in 0..k {
                                    total += (dk[t] as f64 + alpha) * (kw[t * v + w] as f64 + beta)
                                        / (nk[t] as f64 + vbeta);
                                    p[t] = total;
                                }
                                let u = rng.random::<f64>() * total;
                                let new = p.iter().position(|&c| u < c).unwrap_or(k - 1);
                                dk[new] += 1;
                                kw[new * v + w] += 1;
                                nk[new] += 1;
                                z_part[local][i] = new as u16;
                            }
                        }
                        (kw, nk)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut kw: Vec<i64> = snapshot_kw.iter().map(|&c| c as i64).collect();
        let mut nk: Vec<i64> = snapshot_k.iter().map(|&c| c as i64).collect();
        for (local_kw, local_k) in &results {
            for (acc, (&l, &s)) in kw.iter_mut().zip(local_kw.iter().zip(&snapshot_kw)) {
                *acc += l as i64 - s as i64;
            }
            for (acc, (&l, &s)) in nk.iter_mut().zip(local_k.iter().zip(&snapshot_k)) {
                *acc += l as i64 - s as i64;
            }
        }
        self.n_kw = kw.into_iter().map(|c| c as u32).collect();
        self.n_k = nk.into_iter().map(|c| c as u32).collect();
    }

    /// Collapsed corpus log-likelihood log p(w | z, β):
    /// K·[lnΓ(Vβ) − V·lnΓ(β)] + Σ_k [Σ_w lnΓ(n_kw + β) − lnΓ(n_k + Vβ)].
    pub fn log_likelihood(&self) -> f64 {
        let (k, v, beta) = (self.k, self.v, self.beta);
        let vbeta = v as f64 * beta;
        let lg_beta = ln_gamma(beta);
        let mut ll = k as f64 * (ln_gamma(vbeta) - v as f64 * lg_beta);
        for t in 0..k {
            let row = &self.n_kw[t * v..(t + 1) * v];
            // Zero counts contribute lnΓ(β) each; add them in bulk.
            let zeros = row.iter().filter(|&&c| c == 0).count();
            ll += zeros as f64 * lg_beta;
            ll += row
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| ln_gamma(c as f64 + beta))
                .sum::<f64>();
            ll -= ln_gamma(self.n_k[t] as f64 + vbeta);
        }
        ll
    }

    /// Checks that the count matrices agree with the topic assignments.
    pub fn check_counts(&self) -> Result<(), String> {
        let (k, v) = (self.k, self.v);
        let mut kw = vec![0u32; k * v];
        let mut nk = vec![0u32; k];
        for (d, doc) in self.tokens.iter().enumerate() {
            let dk = &self.n_dk[d * k..(d + 1) * k];
            let total: u32 = dk.iter().sum();
            if total as usize != doc.len() {
                return Err(format!("doc {d}: Σ_k n_dk = {total} but length {}", doc.len()));
            }
            let mut expect = vec![0u32; k];
            for (i, &w) in doc.iter().enumerate() {
                let t = self.z[d][i] as usize;
                expect[t] += 1;
                kw[t * v + w as usize] += 1;
                nk[t] += 1;
            }
            if expect != dk {
                return Err(format!("doc {d}: n_dk disagrees with assignments"));
            }
        }
        if kw != self.n_kw {
            return Err("n_kw disagrees with assignments".into());
        }
        if nk != self.n_k {
            return Err("n_k disagrees with assignments".into());
        }
        let tokens: usize = self.tokens.iter().map(Vec::len).sum();
        if nk.iter().map(|&c| c as usize).sum::<usize>() != tokens {
            return Err("Σ_k n_k differs from corpus size".into());
        }
        Ok(())
    }

    /// Point estimate of φ from the current counts.
    pub fn current_phi(&self) -> Matrix {
        let (k, v, beta) = (self.k, self.v, self.beta);
        let mut data = Vec::with_capacity(k * v);
        for t in 0..k {
            let denom = self.n_k[t] as f64 + v as f64 * beta;
            data.extend(self.n_kw[t * v..(t + 1) * v].iter().map(|&c| (c as f64 + beta) / denom));
        }
        Matrix::from_vec(k, v, data)
    }

    /// Point estimate of θ from the current counts.
    pub fn current_theta(&self) -> Matrix {
        let k = self.k;
        let mut data = Vec::with_capacity(self.tokens.len() * k);
        for (d, doc) in self.tokens.iter().enumerate() {
            let denom = doc.len() as f64 + k as f64 * self.alpha;
            data.extend(self.n_dk[d * k..(d + 1) * k].iter().map(|&c| (c as f64 + self.alpha) / denom));
        }
        Matrix::from_vec(self.tokens.len(), k, data)
    }

    /// Adds the current φ and θ estimates to the running posterior means.
    pub fn accumulate(&mut self) {
        let (phi, theta) = (self.current_phi(), self.current_theta());
        for (acc, x) in self.phi_acc.iter_mut().zip(phi.data()) {
            *acc += x;
        }
        for (acc, x) in self.theta_acc.iter_mut().zip(theta.data()) {
            *acc += x;
        }
        self.samples += 1;
    }

    /// Posterior-mean estimates (or the current state when nothing was
    /// accumulated), rows renormalized.
    pub fn estimates(&self) -> (Matrix, Matrix) {
        let (mut phi, mut theta) = if self.samples == 0 {
            (self.current_phi(), self.current_theta())
        } else {
            let s = self.samples as f64;
            (
                Matrix::from_vec(self.k, self.v, self.phi_acc.iter().map(|x| x / s).collect()),
                Matrix::from_vec(self.tokens.len(), self.k, self.theta_acc.iter().map(|x| x / s).collect()),
            )
        };
        phi.normalize_rows();
        theta.normalize_rows();
        (phi, theta)
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn into_model(self, config: LdaConfig, log_likelihood_trace: Vec<f64>) -> LdaModel {
        let (phi, theta) = self.estimates();
        LdaModel::new(config, phi, theta, self.doc_ids, log_likelihood_trace)
    }
}

/// Folds an unseen document into a trained model: Gibbs sweeps over its
/// tokens with φ fixed. Returns θ averaged over the second half of the
/// sweeps.
pub fn fold_in(phi: &Matrix, alpha: f64, tokens: &[TermId], sweeps: usize, seed: u64) -> Vec<f64> {
    let k = phi.rows();
    if tokens.is_empty() {
        return vec![1.0 / k as f64; k];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n_dk = vec![0u32; k];
    let mut z: Vec<usize> = tokens
        .iter()
        .map(|_| {
            let t = rng.random_range(0..k);
            n_dk[t] += 1;
            t
        })
        .collect();
    let denom = tokens.len() as f64 + k as f64 * alpha;
    let mut acc = vec![0.0; k];
    let mut samples = 0usize;
    let mut p = vec![0.0; k];
    for s in 0..sweeps {
        for (i, &w) in tokens.iter().enumerate() {
            n_dk[z[i]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (n_dk[t] as f64 + alpha) * phi.get(t, w as usize);
                p[t] = total;
            }
            let u = rng.random::<f64>() * total;
            let new = p.iter().position(|&c| u < c).unwrap_or(k - 1);
            n_dk[new] += 1;
            z[i] = new;
        }
        if s >= sweeps / 2 {
            for t in 0..k {
                acc[t] += (n_dk[t] as f64 + alpha) / denom;
            }
            samples += 1;
        }
    }
    let mut theta: Vec<f64> = acc.iter().map(|x| x / samples.max(1) as f64).collect();
    let sum: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|x| *x /= sum);
    theta
}
