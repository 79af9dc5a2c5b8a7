use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::AlignError;
use crate::http::HttpClient;
use crate::textprep::{clean_text, lemma_of, tokenize, TextResources};

pub const BUNDLED_WORD_VECTORS: &str = include_str!("../../resources/word_vectors.tsv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub dim: usize,
    pub provider_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, provider_id: &str) -> Self {
        Self {
            dim: values.len(),
            values,
            provider_id: provider_id.to_string(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.values.iter().map(|x| x * c).collect(), &self.provider_id)
    }
}

/// Turns text into a fixed-dimension vector. Implementations must be
/// deterministic per text.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError>;
}

/// Mean of bundled word vectors over the words of the text. Words are looked
/// up as written and then by lemma; unknown and all-zero words are skipped.
pub struct StaticVectors {
    dims: Vec<String>,
    table: HashMap<String, Vec<f64>>,
    lemmas: Arc<HashMap<String, String>>,
}

pub const STATIC_PROVIDER_ID: &str = "static-vectors";

impl StaticVectors {
    pub fn bundled() -> Self {
        static LEMMAS: OnceLock<Arc<HashMap<String, String>>> = OnceLock::new();
        let lemmas = LEMMAS
            .get_or_init(|| Arc::new(TextResources::bundled().lemmas))
            .clone();
        Self::parse(BUNDLED_WORD_VECTORS, lemmas).expect("bundled vectors are well-formed")
    }

    /// Parses `word<TAB>x1 x2 …` lines. An optional `# dims: a b …` header
    /// names the dimensions.
    pub fn parse(text: &str, lemmas: Arc<HashMap<String, String>>) -> Result<Self, AlignError> {
        let mut dims = Vec::new();
        let mut table = HashMap::new();
        let mut width = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if let Some(rest) = line.strip_prefix("# dims:") {
                dims = rest.split_whitespace().map(String::from).collect();
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| AlignError::Schema(format!("word vectors line {}: {m}", i + 1));
            let (word, rest) = line.split_once('\t').ok_or_else(|| bad("expected word<TAB>values".into()))?;
            let values: Vec<f64> = rest
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|_| bad(format!("bad number {x:?}"))))
                .collect::<Result<_, _>>()?;
            match width {
                None => width = Some(values.len()),
                Some(w) if w != values.len() => {
                    return Err(bad(format!("expected {w} values, found {}", values.len())))
                }
                _ => {}
            }
            table.insert(word.to_lowercase(), values);
        }
        let width = width.ok_or_else(|| AlignError::Schema("word vector table is empty".into()))?;
        if dims.is_empty() {
            dims = (0..width).map(|i| format!("d{i}")).collect();
        } else if dims.len() != width {
            return Err(AlignError::Schema(format!(
                "header names {} dimensions, rows have {width}",
                dims.len()
            )));
        }
        Ok(Self { dims, table, lemmas })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dim_names(&self) -> &[String] {
        &self.dims
    }

    /// Vector of a single word, if the table has a non-zero entry for it.
    pub fn word_vector(&self, word: &str) -> Option<&[f64]> {
        let usable = |v: &Vec<f64>| v.iter().any(|&x| x != 0.0);
        if let Some(v) = self.table.get(word).filter(|v| usable(v)) {
            return Some(v);
        }
        self.table
            .get(&lemma_of(word, &self.lemmas))
            .filter(|v| usable(v))
            .map(Vec::as_slice)
    }
}

impl EmbeddingProvider for StaticVectors {
    fn id(&self) -> &str {
        STATIC_PROVIDER_ID
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError> {
        if text.trim().is_empty() {
            return Err(AlignError::EmptyText);
        }
        let mut sum = vec![0.0; self.dim()];
        let mut n = 0usize;
        for word in tokenize(&clean_text(text)) {
            if let Some(v) = self.word_vector(&word) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                n += 1;
            }
        }
        if n == 0 {
            return Err(AlignError::NoKnownWords(text.to_string()));
        }
        sum.iter_mut().for_each(|s| *s /= n as f64);
        Ok(EmbeddingVector::new(sum, STATIC_PROVIDER_ID))
    }
}

/// Remote embedding endpoint: `POST {base}/embed {"text": …}` answered by
/// `{"vector": […], "dim": n}`. The first response fixes the dimension.
pub struct HttpEmbedding {
    endpoint: String,
    client: Box<dyn HttpClient>,
    dim: OnceLock<usize>,
}

pub const HTTP_PROVIDER_ID: &str = "http-inference";

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
    dim: usize,
}

impl HttpEmbedding {
    pub fn new(base_url: &str, client: Box<dyn HttpClient>) -> Self {
        Self {
            endpoint: format!("{}/embed", base_url.trim_end_matches('/')),
            client,
            dim: OnceLock::new(),
        }
    }
}

impl EmbeddingProvider for HttpEmbedding {
    fn id(&self) -> &str {
        HTTP_PROVIDER_ID
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError> {
        if text.trim().is_empty() {
            return Err(AlignError::EmptyText);
        }
        let body = serde_json::to_string(&EmbedRequest { text }).expect("request serializes");
        let resp = self
            .client
            .post(&self.endpoint, "application/json", &body)
            .map_err(|e| AlignError::Provider(e.to_string()))?;
        if !resp.is_success() {
            return Err(AlignError::Provider(format!(
                "{} returned status {}",
                self.endpoint, resp.status
            )));
        }
        let parsed: EmbedResponse =
            serde_json::from_str(&resp.body).map_err(|e| AlignError::Provider(format!("bad embed response: {e}")))?;
        if parsed.vector.len() != parsed.dim || parsed.vector.iter().any(|x| !x.is_finite()) {
            return Err(AlignError::Provider("embed response vector disagrees with dim".into()));
        }
        let fixed = *self.dim.get_or_init(|| parsed.dim);
        if fixed != parsed.dim {
            return Err(AlignError::DimensionMismatch(fixed, parsed.dim));
        }
        Ok(EmbeddingVector::new(parsed.vector, HTTP_PROVIDER_ID))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::{HttpResponse, ReplayHttp};

    #[test]
    fn static_mean_of_words() {
        let sv = StaticVectors::bundled();
        let e = sv.embed("privacy data protection").unwrap();
        let words = ["privacy", "data", "protection"].map(|w| sv.word_vector(w).unwrap().to_vec());
        for d in 0..sv.dim() {
            let mean = words.iter().map(|v| v[d]).sum::<f64>() / 3.0;
            assert!((e.values[d] - mean).abs() < 1e-12);
        }
        assert_eq!(e, sv.embed("privacy data protection").unwrap());
        assert_eq!(e.dim, sv.dim());
    }

    #[test]
    fn static_errors_and_lemmas() {
        let sv = StaticVectors::bundled();
        assert!(matches!(sv.embed("   "), Err(AlignError::EmptyText)));
        assert!(matches!(sv.embed("zzqx blorp"), Err(AlignError::NoKnownWords(_))));
        // inflected forms resolve through the lemma table
        assert_eq!(sv.embed("users helped").unwrap(), sv.embed("user help").unwrap());
    }

    #[test]
    fn ragged_table_rejected() {
        let lem = Arc::new(HashMap::new());
        assert!(StaticVectors::parse("a\t1 0\nb\t1\n", lem.clone()).is_err());
        assert!(StaticVectors::parse("# dims: x\na\t1 0\n", lem.clone()).is_err());
        assert_eq!(StaticVectors::parse("a\t1 0\n", lem).unwrap().dim(), 2);
    }

    #[test]
    fn http_provider_contract() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayHttp::new(dir.path());
        replay
            .record(
                "POST",
                "http://model.test/embed",
                r#"{"text":"privacy"}"#,
                &HttpResponse { status: 200, body: r#"{"vector":[0.5,0.5],"dim":2}"#.into() },
            )
            .unwrap();
        replay
            .record(
                "POST",
                "http://model.test/embed",
                r#"{"text":"wide"}"#,
                &HttpResponse { status: 200, body: r#"{"vector":[1,2,3],"dim":3}"#.into() },
            )
            .unwrap();
        replay
            .record(
                "POST",
                "http://model.test/embed",
                r#"{"text":"down"}"#,
                &HttpResponse { status: 503, body: String::new() },
            )
            .unwrap();
        let p = HttpEmbedding::new("http://model.test/", Box::new(replay));
        assert_eq!(p.embed("privacy").unwrap().values, [0.5, 0.5]);
        assert!(matches!(p.embed("wide"), Err(AlignError::DimensionMismatch(2, 3))));
        assert!(matches!(p.embed("down"), Err(AlignError::Provider(_))));
        assert!(matches!(p.embed("unrecorded"), Err(AlignError::Provider(_))));
    }
}
